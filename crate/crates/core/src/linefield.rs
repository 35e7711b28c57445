//! Linearizing line fields `x ↦ l_x`, the sets `E(P)`, the density `A₀(P)`
//! and the mass `A(P)`.
//!
//! A field is constant on each of its `resolution` cells, so whether
//! `l_x ∈ P` depends only on the cell and every `|E(P)|` is a cell count
//! times the cell width. Membership in `E(P)` uses half-open edges, which is
//! what makes the `E(P)` of one scale partition `[0,1)`.

use crate::dyadic::{pow2, DyadicInterval, RealInterval};
use crate::geometry::{bracket, delta};
use crate::tile::{Line, Tile, TileKey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Constant,
    PiecewiseRandom,
    ChirpMatched,
    Adversarial,
    /// Built directly from caller-supplied lines.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FieldJson", try_from = "FieldJson")]
pub struct LineField {
    resolution: usize,
    lines: Vec<Line>,
    generator: Generator,
}

#[derive(Serialize, Deserialize)]
struct FieldJson {
    generator: Generator,
    resolution: usize,
    cells: Vec<Line>,
}

impl From<LineField> for FieldJson {
    fn from(f: LineField) -> Self {
        FieldJson { generator: f.generator, resolution: f.resolution, cells: f.lines }
    }
}

impl TryFrom<FieldJson> for LineField {
    type Error = LineFieldError;
    fn try_from(j: FieldJson) -> Result<Self, Self::Error> {
        if j.cells.len() != j.resolution {
            return Err(LineFieldError::CellCount { resolution: j.resolution, cells: j.cells.len() });
        }
        LineField::from_lines(j.cells, j.generator)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LineFieldError {
    #[error("resolution {0} is not a power of two")]
    Resolution(usize),
    #[error("resolution {resolution} but {cells} cells")]
    CellCount { resolution: usize, cells: usize },
    #[error("non-finite coefficients in cell {0}")]
    NonFinite(usize),
}

impl std::fmt::Display for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Generator::Constant => "constant",
            Generator::PiecewiseRandom => "piecewise-random",
            Generator::ChirpMatched => "chirp-matched",
            Generator::Adversarial => "adversarial",
            Generator::Explicit => "explicit",
        };
        f.write_str(s)
    }
}

/// Line with values `u` at 0 and `v` at 1.
fn endpoint_line(u: f64, v: f64) -> Line {
    Line::through(0.0, u, 1.0, v)
}

impl LineField {
    pub fn from_lines(lines: Vec<Line>, generator: Generator) -> Result<Self, LineFieldError> {
        let n = lines.len();
        if !n.is_power_of_two() {
            return Err(LineFieldError::Resolution(n));
        }
        if let Some(i) = lines.iter().position(|l| !(l.c.is_finite() && l.b.is_finite())) {
            return Err(LineFieldError::NonFinite(i));
        }
        Ok(Self { resolution: n, lines, generator })
    }

    pub fn constant(resolution: usize, l: Line) -> Self {
        Self::from_lines(vec![l; resolution], Generator::Constant).expect("valid constant field")
    }

    /// Independent random lines on `pieces` equal blocks, with both endpoint
    /// values `l(0), l(1)` uniform in `range` shrunk by one unit.
    pub fn piecewise_random(resolution: usize, pieces: usize, range: RealInterval, seed: u64) -> Self {
        assert!(pieces > 0 && resolution % pieces == 0, "pieces must divide the resolution");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (range.left + 1.0, range.right - 1.0);
        let block = resolution / pieces;
        let mut lines = Vec::with_capacity(resolution);
        for _ in 0..pieces {
            let l = endpoint_line(rng.gen_range(lo..hi), rng.gen_range(lo..hi));
            lines.extend(std::iter::repeat(l).take(block));
        }
        Self { resolution, lines, generator: Generator::PiecewiseRandom }
    }

    /// Every fiber is `c0 + 2 b0 z`, the line that demodulates `e^{i b0 x²}`
    /// with carrier `c0`.
    pub fn chirp_matched(resolution: usize, c0: f64, b0: f64) -> Self {
        Self { resolution, lines: vec![Line::new(c0, b0); resolution], generator: Generator::ChirpMatched }
    }

    /// Plants a tree below `top`: on an evenly spaced fraction `density` of
    /// the cells of `I_top` the fiber is a random line inside the top
    /// (edge values drawn from the middle half of its edges); every other
    /// cell carries the line `far`.
    pub fn adversarial(resolution: usize, top: &Tile, density: f64, far: Line, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lines = vec![far; resolution];
        let cells = spread_cells(resolution, top.time, density);
        let a = top.alpha_edge();
        let w = top.omega_edge();
        let (x0, x1) = (top.time.left(), top.time.right());
        for i in cells {
            let u = a.left + a.length() * rng.gen_range(0.25..0.75);
            let v = w.left + w.length() * rng.gen_range(0.25..0.75);
            lines[i] = Line::through(x0, u, x1, v);
        }
        Self { resolution, lines, generator: Generator::Adversarial }
    }

    /// Replaces the lines on `cells` (used to build custom instances).
    pub fn with_cells(mut self, cells: impl IntoIterator<Item = usize>, l: Line) -> Self {
        for i in cells {
            self.lines[i] = l;
        }
        self.generator = Generator::Explicit;
        self
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn log2_resolution(&self) -> i32 {
        self.resolution.trailing_zeros() as i32
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn line(&self, cell: usize) -> Line {
        self.lines[cell]
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// The fiber `l_x`.
    pub fn line_at(&self, x: f64) -> Line {
        let i = ((x * self.resolution as f64).floor() as i64).clamp(0, self.resolution as i64 - 1);
        self.lines[i as usize]
    }

    /// Cell range covering a time interval of scale `≤ log2 resolution`.
    pub fn cells_of(&self, i: &DyadicInterval) -> std::ops::Range<usize> {
        let shift = self.log2_resolution() - i.scale;
        assert!(shift >= 0, "field resolution {} does not refine scale {}", self.resolution, i.scale);
        let lo = (i.index as usize) << shift;
        lo..lo + (1usize << shift)
    }

    /// Cells `x` of `I_P` with `l_x ∈ P` (half-open edges).
    pub fn e_cells<'a>(&'a self, p: &'a Tile) -> impl Iterator<Item = usize> + 'a {
        self.cells_of(&p.time).filter(move |&i| p.contains_line_half_open(&self.lines[i]))
    }

    /// `|E(P)|`, exact.
    pub fn measure_e(&self, p: &Tile) -> f64 {
        self.e_cells(p).count() as f64 * self.cell_width()
    }

    /// `χ_{E(P)}` sampled on the field's cells.
    pub fn e_indicator(&self, p: &Tile) -> Vec<bool> {
        let mut v = vec![false; self.resolution];
        for i in self.e_cells(p) {
            v[i] = true;
        }
        v
    }

    /// `A₀(P) = |E(P)|/|I|`.
    pub fn density(&self, p: &Tile) -> f64 {
        self.measure_e(p) / p.time.length()
    }

    /// `|{x ∈ I : dist^I(l_x, l0) < 2|I|⁻¹}|`.
    pub fn density_set(&self, l0: &Line, i: &DyadicInterval) -> f64 {
        let thr = 2.0 / i.length();
        let r = i.to_real();
        let n = self
            .cells_of(i)
            .filter(|&c| crate::geometry::dist_sup(&self.lines[c], l0, &r) < thr)
            .count();
        n as f64 * self.cell_width()
    }

    /// Grid tile of scale `k` whose `E` contains cell `cell`.
    pub fn tile_of_cell(&self, cell: usize, k: i32) -> TileKey {
        let t = (cell >> (self.log2_resolution() - k)) as i64;
        let i = DyadicInterval::time(k, t);
        let l = self.lines[cell];
        let len = pow2(k);
        TileKey {
            scale: k,
            t,
            a: (l.eval(i.left()) / len).floor() as i64,
            w: (l.eval(i.right()) / len).floor() as i64,
        }
    }
}

/// Evenly spaced cells of `i` making up a fraction `density` of it.
pub fn spread_cells(resolution: usize, i: DyadicInterval, density: f64) -> Vec<usize> {
    let shift = resolution.trailing_zeros() as i32 - i.scale;
    assert!(shift >= 0);
    let n = 1usize << shift;
    let lo = (i.index as usize) << shift;
    let m = ((density.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
    (0..m).map(|j| lo + j * n / m.max(1)).collect()
}

/// Occupied grid tiles of each scale with their `E`-cell counts: for every
/// `(k, t)` the sorted list of `((a, w), count)` with `count > 0`.
#[derive(Debug, Clone)]
pub struct Occupancy {
    resolution: usize,
    levels: Vec<Vec<Vec<((i64, i64), u32)>>>,
}

impl Occupancy {
    pub fn build(field: &LineField, k_max: i32) -> Self {
        assert!(k_max <= field.log2_resolution(), "field too coarse for scale {k_max}");
        let levels = (0..=k_max)
            .map(|k| {
                let mut per_t: Vec<Vec<((i64, i64), u32)>> = vec![Vec::new(); 1usize << k];
                for cell in 0..field.resolution() {
                    let key = field.tile_of_cell(cell, k);
                    per_t[key.t as usize].push(((key.a, key.w), 1));
                }
                for v in per_t.iter_mut() {
                    v.sort_unstable_by_key(|e| e.0);
                    v.dedup_by(|b, a| {
                        if a.0 == b.0 {
                            a.1 += b.1;
                            true
                        } else {
                            false
                        }
                    });
                }
                per_t
            })
            .collect();
        Self { resolution: field.resolution(), levels }
    }

    pub fn k_max(&self) -> i32 {
        self.levels.len() as i32 - 1
    }

    /// Occupied tiles over `I = (k, t)` with their `|E|`.
    pub fn occupied(&self, k: i32, t: i64) -> impl Iterator<Item = (Tile, f64)> + '_ {
        let h = 1.0 / self.resolution as f64;
        self.levels[k as usize][t as usize]
            .iter()
            .map(move |&((a, w), c)| (Tile::new(k, t, a, w), c as f64 * h))
    }

    /// `|E(P)|` for a grid tile, from the histogram.
    pub fn measure_e(&self, p: &Tile) -> f64 {
        let k = p.scale();
        let list = &self.levels[k as usize][p.time.index as usize];
        match list.binary_search_by_key(&(p.alpha.index, p.omega.index), |e| e.0) {
            Ok(i) => list[i].1 as f64 / self.resolution as f64,
            Err(_) => 0.0,
        }
    }

    /// Tiles `P̄` with `|E(P̄)|/|I| ≥ threshold` over all scales.
    pub fn dense_tiles(&self, threshold: f64) -> Vec<(Tile, f64)> {
        let mut out = Vec::new();
        for k in 0..=self.k_max() {
            for t in 0..(1i64 << k) {
                let len = pow2(-k);
                out.extend(self.occupied(k, t).filter(|(_, m)| *m / len >= threshold));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassConfig {
    pub n: i32,
    pub tol: f64,
}

impl Default for MassConfig {
    fn default() -> Self {
        Self { n: 10, tol: 1e-6 }
    }
}

/// `A(P) = sup_{I ⊆ I'} A₀(P')·⌈Δ(2P, 2P')⌉^N` over every dyadic `P'` whose
/// `E` is nonempty (the others contribute 0). Candidates with
/// `⌈Δ⌉^N < tol` are skipped, so the result is exact up to `tol`.
pub fn mass(p: &Tile, occ: &Occupancy, cfg: &MassConfig) -> f64 {
    let k = p.scale();
    assert!(k <= occ.k_max(), "tile scale {k} beyond the occupancy table");
    let p2 = p.dilate(2.0);
    let mut best: f64 = 0.0;
    for k1 in (0..=k).rev() {
        let t1 = p.time.index >> (k - k1);
        let len = pow2(-k1);
        for (q, m) in occ.occupied(k1, t1) {
            let dens = m / len;
            if dens <= best {
                continue;
            }
            let w = bracket(delta(&p2, &q.dilate(2.0))).powi(cfg.n);
            if w < cfg.tol {
                continue;
            }
            best = best.max(dens * w);
        }
    }
    best
}

/// Masses of a tile list, in parallel.
pub fn masses(tiles: &[Tile], occ: &Occupancy, cfg: &MassConfig) -> Vec<f64> {
    tiles.par_iter().map(|p| mass(p, occ, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tile::window_tiles;

    fn window() -> RealInterval {
        RealInterval::new(-32.0, 32.0)
    }

    #[test]
    fn measure_examples() {
        let p = Tile::new(0, 0, 0, 0);
        let full = LineField::constant(64, Line::new(0.5, 0.0));
        assert_eq!(full.measure_e(&p), 1.0);
        assert_eq!(full.density(&p), 1.0);
        let miss = LineField::constant(64, Line::new(2.0, 0.0));
        assert_eq!(miss.measure_e(&p), 0.0);
        let half = miss.clone().with_cells((0..64).step_by(2), Line::new(0.5, 0.0));
        assert_eq!(half.measure_e(&p), 0.5);
    }

    #[test]
    fn e_partitions_each_scale() {
        for seed in 0..5 {
            let f = LineField::piecewise_random(256, 16, window(), seed);
            for k in [0, 2, 4] {
                let tiles = window_tiles(&[k], window());
                let total: f64 = tiles.iter().map(|p| f.measure_e(p)).sum();
                assert_eq!(total, 1.0, "seed {seed} scale {k}");
            }
        }
    }

    #[test]
    fn e_partitions_fixed_slope_class() {
        // Fibers of one grid slope fill a single class 𝒫(k, β).
        let k = 1;
        let f = LineField::from_lines(
            (0..64).map(|i| Line::new(-20.0 + 0.6 * i as f64, 4.0)).collect(),
            Generator::Explicit,
        )
        .unwrap();
        let total: f64 = crate::tile::tile_partition(k, 8.0, window())
            .unwrap()
            .map(|p| f.measure_e(&p))
            .sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn occupancy_matches_scan() {
        let f = LineField::piecewise_random(128, 8, window(), 3);
        let occ = Occupancy::build(&f, 4);
        for p in window_tiles(&[0, 2, 4], window()) {
            assert_eq!(occ.measure_e(&p), f.measure_e(&p));
        }
    }

    #[test]
    fn density_set_examples() {
        let i = DyadicInterval::time(2, 1);
        let l0 = Line::new(3.0, 1.0);
        let same = LineField::constant(64, l0);
        assert_eq!(same.density_set(&l0, &i), i.length());
        let off = LineField::constant(64, Line::new(3.0 + 10.0 / i.length(), 1.0));
        assert_eq!(off.density_set(&l0, &i), 0.0);
        let child = i.children()[0];
        assert_eq!(same.density_set(&l0, &child), 0.5 * same.density_set(&l0, &i));
    }

    #[test]
    fn mass_examples() {
        let cfg = MassConfig::default();
        let p = Tile::new(2, 1, 0, 0);
        let through = LineField::constant(64, p.central_line());
        let occ = Occupancy::build(&through, 4);
        assert_eq!(mass(&p, &occ, &cfg), 1.0);
        let empty = LineField::constant(64, Line::new(1e6, 0.0));
        let occ = Occupancy::build(&empty, 4);
        assert_eq!(mass(&p, &occ, &cfg), 0.0);
    }

    #[test]
    fn mass_dominates_density_and_tol_is_monotone() {
        let f = LineField::piecewise_random(256, 32, window(), 9);
        let occ = Occupancy::build(&f, 4);
        let loose = MassConfig { n: 10, tol: 1e-2 };
        let tight = MassConfig { n: 10, tol: 1e-9 };
        for p in window_tiles(&[0, 2, 4], RealInterval::new(-8.0, 8.0)) {
            let m = mass(&p, &occ, &loose);
            assert!(m >= f.density(&p));
            assert!(mass(&p, &occ, &tight) >= m);
        }
    }

    #[test]
    fn spread_is_exact() {
        let i = DyadicInterval::time(1, 1);
        for d in [0.0, 0.125, 0.5, 1.0] {
            let c = spread_cells(64, i, d);
            assert_eq!(c.len() as f64, d * 32.0);
            assert!(c.iter().all(|&j| (32..64).contains(&j)));
        }
    }

    #[test]
    fn planted_field_fills_top() {
        let top = Tile::new(1, 0, 1, 1);
        let far = Line::new(1e4, 0.0);
        let f = LineField::adversarial(128, &top, 0.25, far, 1);
        assert_eq!(f.density(&top), 0.25);
    }

    #[test]
    fn json_schema() {
        let f = LineField::constant(2, Line::new(1.0, 0.5));
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"generator":"constant","resolution":2,"cells":[{"c":1.0,"b":0.5},{"c":1.0,"b":0.5}]}"#);
        let g: LineField = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        assert!(serde_json::from_str::<LineField>(r#"{"generator":"constant","resolution":4,"cells":[]}"#).is_err());
    }
}
