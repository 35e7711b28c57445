//! Interaction functionals between lines and tiles: `⌈x⌉`, `Δ_l(P)`,
//! `Δ(P₁,P₂)`, the critical intersection interval and the separation
//! intervals of two trees.
//!
//! Infima run over closed parallelograms. `Δ(P₁,P₂)` is the ℓ∞ distance, in
//! the coordinates `(l(left I₂), l(right I₂))`, between the lines of the
//! larger tile and the edge box of the smaller one; it is computed exactly by
//! separating-axis duality.

use crate::dyadic::RealInterval;
use crate::tile::{Line, Tile, Top};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub fn dist_at(l1: &Line, l2: &Line, x0: f64) -> f64 {
    (l1.eval(x0) - l2.eval(x0)).abs()
}

/// `sup_{x∈A} |l₁(x) − l₂(x)|`, attained at an endpoint.
pub fn dist_sup(l1: &Line, l2: &Line, a: &RealInterval) -> f64 {
    dist_at(l1, l2, a.left).max(dist_at(l1, l2, a.right))
}

/// `⌈x⌉ = 1/(1+|x|)`.
pub fn bracket(x: f64) -> f64 {
    1.0 / (1.0 + x.abs())
}

/// `Δ_l(P)`: closest line of the closed tile to `l` in `dist^I`, over `|aω|`.
pub fn delta_line(p: &Tile, l: &Line) -> f64 {
    let a = p.alpha_edge();
    let w = p.omega_edge();
    let d = a.dist(l.eval(p.time.left())).max(w.dist(l.eval(p.time.right())));
    d / p.freq_width()
}

/// `Δ(P₁,P₂)` without the extra fields; argument order is irrelevant.
/// Equal lengths over different intervals are measured from both sides and
/// the larger value is kept, so the functional stays symmetric.
pub fn delta(p1: &Tile, p2: &Tile) -> f64 {
    let one_sided = |big: &Tile, small: &Tile| {
        big.edge_box().separation(&small.edge_box(), true).max(0.0) / small.freq_width()
    };
    match p1.time.scale.cmp(&p2.time.scale) {
        std::cmp::Ordering::Less => one_sided(p1, p2),
        std::cmp::Ordering::Greater => one_sided(p2, p1),
        std::cmp::Ordering::Equal => one_sided(p1, p2).max(one_sided(p2, p1)),
    }
}

/// Abscissa where two lines cross; `+∞` for parallel lines.
pub fn x_intersect(l1: &Line, l2: &Line) -> f64 {
    if l1.b == l2.b {
        f64::INFINITY
    } else {
        (l2.c - l1.c) / (2.0 * (l1.b - l2.b))
    }
}

/// `I*` as its two pieces.
fn star_pieces(p: &Tile) -> [RealInterval; 2] {
    let (r, l) = p.time.star_intervals();
    [r, l]
}

fn closed_cap(a: &RealInterval, b: &RealInterval) -> Option<RealInterval> {
    let l = a.left.max(b.left);
    let r = a.right.min(b.right);
    (l < r).then(|| RealInterval::new(l, r))
}

/// Geometric data of a pair of tiles, stored with `|I₁| ≥ |I₂|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    pub delta: f64,
    pub bracket: f64,
    pub x_intersect: f64,
    /// `None` when empty.
    pub critical: Option<RealInterval>,
    pub gamma: f64,
}

/// `Δ(P₁,P₂)`, `⌈Δ⌉`, `x^i`, `γ` and `I₁,₂ = [x^i−γ, x^i+γ] ∩ I₁* ∩ I₂*`.
pub fn delta_pair(p1: &Tile, p2: &Tile, eps0: f64) -> PairGeometry {
    let d = delta(p1, p2);
    let br = bracket(d);
    let x = x_intersect(&p1.central_line(), &p2.central_line());
    let min_len = p1.time.length().min(p2.time.length());
    let gamma = min_len * br.powf(0.5 - eps0);
    let mut critical = None;
    if x.is_finite() {
        let core = RealInterval::new(x - gamma, x + gamma);
        // γ ≤ min|I| while the two pieces of each I* are 7|I| apart, so at
        // most one piece of each can meet the core.
        'outer: for a in star_pieces(p1) {
            for b in star_pieces(p2) {
                if let Some(c) = closed_cap(&core, &a).and_then(|c| closed_cap(&c, &b)) {
                    critical = Some(c);
                    break 'outer;
                }
            }
        }
    }
    PairGeometry { delta: d, bracket: br, x_intersect: x, critical, gamma }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeSeparationGeometry {
    pub w: f64,
    pub i_s: Option<RealInterval>,
    pub i_c: Option<RealInterval>,
    pub delta_sep: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("separation parameter must lie in (0,1), got {0}")]
    DeltaRange(f64),
}

/// Separation interval `I_s` and its enlargement `I_c = 3δ^{1/2−ε} I_s`
/// for two trees given by their tops and top frequency lines.
pub fn separation_geometry(
    tree1: (&Top, &Line),
    tree2: (&Top, &Line),
    delta_sep: f64,
    eps: f64,
) -> Result<TreeSeparationGeometry, GeometryError> {
    if !(delta_sep > 0.0 && delta_sep < 1.0) {
        return Err(GeometryError::DeltaRange(delta_sep));
    }
    let p1 = tree1.0.rep();
    let p2 = tree2.0.rep();
    let br = bracket(delta(p1, p2));
    let min_len = p1.time.length().min(p2.time.length());
    let w = min_len * (br / delta_sep).sqrt() / 100.0;
    let x = x_intersect(tree1.1, tree2.1);
    let mut i_s = None;
    let mut i_c = None;
    if x.is_finite() {
        let core = RealInterval::new(x - w, x + w);
        i_s = closed_cap(&core, &p1.time.tilde()).and_then(|c| closed_cap(&c, &p2.time.tilde()));
        i_c = i_s.map(|s| s.dilate(3.0 * delta_sep.powf(0.5 - eps)));
    }
    Ok(TreeSeparationGeometry { w, i_s, i_c, delta_sep })
}

/// CSV of `(i, j, Δ, ⌈Δ⌉)` for every ordered pair of a tile collection.
pub fn pair_matrix_csv(tiles: &[Tile]) -> String {
    let mut s = String::from("i,j,delta,bracket\n");
    for (i, p) in tiles.iter().enumerate() {
        for (j, q) in tiles.iter().enumerate() {
            let d = delta(p, q);
            let _ = writeln!(s, "{i},{j},{d:.12e},{:.12e}", bracket(d));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tile::leq;
    use proptest::prelude::*;

    /// Brute force over a `g × g` grid of edge values of the larger tile.
    /// The inner infimum over the smaller tile is the distance to its edges.
    fn grid_delta(p1: &Tile, p2: &Tile, g: usize) -> f64 {
        match p1.time.scale.cmp(&p2.time.scale) {
            std::cmp::Ordering::Less => grid_one_sided(p1, p2, g),
            std::cmp::Ordering::Greater => grid_one_sided(p2, p1, g),
            std::cmp::Ordering::Equal => grid_one_sided(p1, p2, g).max(grid_one_sided(p2, p1, g)),
        }
    }

    fn grid_one_sided(big: &Tile, small: &Tile, g: usize) -> f64 {
        let (a, w) = (big.alpha_edge(), big.omega_edge());
        let (sa, sw) = (small.alpha_edge(), small.omega_edge());
        let mut best = f64::INFINITY;
        for i in 0..g {
            let u = a.left + (a.right - a.left) * i as f64 / (g - 1) as f64;
            for j in 0..g {
                let v = w.left + (w.right - w.left) * j as f64 / (g - 1) as f64;
                let l = Line::through(big.time.left(), u, big.time.right(), v);
                let d = sa.dist(l.eval(small.time.left())).max(sw.dist(l.eval(small.time.right())));
                best = best.min(d);
            }
        }
        best / small.freq_width()
    }

    #[test]
    fn distances() {
        let l1 = Line::new(0.0, 0.0);
        let l2 = Line::new(0.0, 1.0);
        assert_eq!(dist_sup(&l1, &l1, &RealInterval::new(0.0, 1.0)), 0.0);
        assert_eq!(dist_sup(&l1, &l2, &RealInterval::new(0.0, 1.0)), 2.0);
        assert_eq!(bracket(0.0), 1.0);
        assert_eq!(bracket(3.0), 0.25);
        assert_eq!(bracket(-3.0), 0.25);
    }

    #[test]
    fn delta_line_examples() {
        let p = Tile::new(0, 0, 0, 0);
        assert_eq!(delta_line(&p, &p.central_line()), 0.0);
        assert_eq!(delta_line(&p, &Line::new(10.0, 0.0)), 9.0);
        let l = Line::new(7.3, 1.1);
        assert!(delta_line(&p.dilate(2.0), &l) * 2.0 <= delta_line(&p, &l));
    }

    #[test]
    fn delta_pair_examples() {
        let p = Tile::new(0, 0, 0, 0);
        let g = delta_pair(&p, &p, 0.1);
        assert_eq!((g.delta, g.bracket), (0.0, 1.0));
        assert_eq!(delta(&p, &p.shift_rows(10)), 9.0);
        assert_eq!(grid_delta(&p, &p.shift_rows(10), 11), 9.0);
    }

    #[test]
    fn critical_interval_shape() {
        let p1 = Tile::new(3, 2, 0, 0);
        let p2 = Tile::new(3, 3, -9, -7);
        let g = delta_pair(&p1, &p2, 0.1);
        assert!(g.x_intersect.is_finite());
        let c = g.critical.expect("lines cross inside both stars");
        assert!(c.length() <= 2.0 * g.gamma + 1e-15);
        assert!((g.gamma / 0.125 - g.bracket.powf(0.4)).abs() < 1e-12);
        assert!(delta_pair(&p1, &p1.shift_rows(3), 0.1).critical.is_none());
    }

    #[test]
    fn separation_examples() {
        let p = Tile::new(2, 1, 0, 0);
        let top = Top::single(p);
        let l = p.central_line();
        let s = separation_geometry((&top, &l), (&top, &l), 0.25, 0.05).unwrap();
        assert!((s.w - 0.25 * 2.0 / 100.0).abs() < 1e-15);
        let q = Top::single(p.shift_rows(5));
        let lq = q.rep().central_line();
        let s = separation_geometry((&top, &l), (&q, &lq), 0.25, 0.05).unwrap();
        assert!(s.i_s.is_none() && s.i_c.is_none());
        let r = Tile::new(2, 1, 0, 1);
        let tr = Top::single(r);
        let lr = r.central_line();
        let s = separation_geometry((&top, &l), (&tr, &lr), 0.25, 0.05).unwrap();
        let is = s.i_s.unwrap();
        let ic = s.i_c.unwrap();
        assert!((ic.length() - 3.0 * 0.25f64.powf(0.45) * is.length()).abs() < 1e-12);
        assert!(separation_geometry((&top, &l), (&tr, &lr), 1.0, 0.05).is_err());
    }

    #[test]
    fn exact_matches_grid_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let k1 = rng.gen_range(0..3);
            let k2 = rng.gen_range(0..3);
            let p1 = Tile::new(k1, rng.gen_range(0..1 << k1), rng.gen_range(-4..4), rng.gen_range(-4..4));
            let p2 = Tile::new(k2, rng.gen_range(0..1 << k2), rng.gen_range(-4..4), rng.gen_range(-4..4));
            let exact = delta(&p1, &p2);
            let g = 41;
            let grid = grid_delta(&p1, &p2, g);
            let step = p1.freq_width().max(p2.freq_width()) / (g - 1) as f64 / p1.freq_width().min(p2.freq_width());
            assert!(exact <= grid + 1e-12, "{exact} {grid}");
            assert!(grid - exact <= 2.0 * step + 1e-12, "{exact} {grid} {step}");
        }
    }

    #[test]
    fn zero_delta_iff_dilates_compare() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut hits = 0;
        for _ in 0..5000 {
            let k2 = 2 * rng.gen_range(0..2);
            let k1 = k2 + 2 * rng.gen_range(0..2);
            let t1 = rng.gen_range(0..1i64 << k1);
            let p1 = Tile::new(k1, t1, rng.gen_range(-3..3), rng.gen_range(-3..3));
            let p2 = Tile::new(k2, t1 >> (k1 - k2), rng.gen_range(-2..2), rng.gen_range(-2..2));
            let d = delta(&p1, &p2);
            hits += (d == 0.0) as usize;
            // aP₁ ≤ P₂ exactly when the ℓ∞ gap d·|ω₁| is below the
            // expansion (a−1)|ω₁|/2, so Δ = 0 iff every a > 1 works.
            for a in [1.5, 2.0, 4.0, 10.0] {
                assert_eq!(a > 1.0 + 2.0 * d, leq(&p1.dilate(a), &p2), "{p1:?} {p2:?} {a}");
            }
            if d > 0.0 {
                assert!(!leq(&p1.dilate(1.0 + d), &p2));
            } else {
                assert!(leq(&p1.dilate(1.0 + 1e-9), &p2));
            }
        }
        assert!(hits > 100);
    }

    fn tile_strategy() -> impl Strategy<Value = Tile> {
        (0..4i32, 0..16i64, -6..6i64, -6..6i64)
            .prop_map(|(k, t, a, w)| Tile::new(k, t % (1 << k), a, w))
    }

    proptest! {
        #[test]
        fn symmetric(p in tile_strategy(), q in tile_strategy()) {
            prop_assert_eq!(delta(&p, &q), delta(&q, &p));
        }

        #[test]
        fn translation_and_shear_invariant(p in tile_strategy(), q in tile_strategy(), m in -3i64..3, s in -2i64..2) {
            // Shift by m·8 in frequency and shear by slope s·64; both keep grid tiles on the grid.
            let move_tile = |t: &Tile| {
                let k = t.scale();
                let width = (1i64 << k) as f64;
                let l = t.time.left();
                let r = t.time.right();
                let da = (8.0 * m as f64 + 64.0 * s as f64 * l) / width;
                let dw = (8.0 * m as f64 + 64.0 * s as f64 * r) / width;
                Tile::new(k, t.time.index, t.alpha.index + da as i64, t.omega.index + dw as i64)
            };
            let d0 = delta(&p, &q);
            let d1 = delta(&move_tile(&p), &move_tile(&q));
            prop_assert!((d0 - d1).abs() < 1e-12);
        }

        #[test]
        fn dilation_shrinks_delta_line(p in tile_strategy(), c in -20.0f64..20.0, b in -10.0f64..10.0) {
            let l = Line::new(c, b);
            prop_assert!(delta_line(&p.dilate(2.0), &l) <= delta_line(&p, &l) + 1e-12);
        }
    }
}
