//! The selection algorithm: mass strata, maximal tiles, chain pruning, the
//! counting function and exceptional set, the split into antichains and
//! forests, tree assembly, rows, and validators for trees, forests and rows.
//!
//! Everything runs on a finite universe of grid tiles. Sets are index lists
//! into the universe, kept sorted, and every tile ends in exactly one
//! terminal bucket.

use crate::dyadic::{pow2, DyadicInterval, RealInterval};
use crate::geometry::{bracket, delta};
use crate::linefield::{masses, LineField, MassConfig, Occupancy};
use crate::tile::{leq, lneq, top_leq, trianglelefteq, EdgeBox, Tile, TileKey, Top};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Finite tile universe with lookups by key and by time interval.
#[derive(Debug, Clone)]
pub struct Universe {
    pub scales: Vec<i32>,
    pub window: RealInterval,
    tiles: Vec<Tile>,
    by_key: BTreeMap<TileKey, usize>,
    by_time: BTreeMap<(i32, i64), Vec<usize>>,
}

impl Universe {
    /// All grid tiles at `scales` with both edges meeting `window`.
    pub fn new(scales: &[i32], window: RealInterval) -> Self {
        Self::from_tiles(scales.to_vec(), window, crate::tile::window_tiles(scales, window))
    }

    pub fn from_tiles(scales: Vec<i32>, window: RealInterval, mut tiles: Vec<Tile>) -> Self {
        tiles.sort_by_key(|p| p.key());
        tiles.dedup_by_key(|p| p.key());
        let mut by_key = BTreeMap::new();
        let mut by_time: BTreeMap<(i32, i64), Vec<usize>> = BTreeMap::new();
        for (i, p) in tiles.iter().enumerate() {
            by_key.insert(p.key(), i);
            by_time.entry((p.time.scale, p.time.index)).or_default().push(i);
        }
        Self { scales, window, tiles, by_key, by_time }
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn index_of(&self, p: &Tile) -> Option<usize> {
        self.by_key.get(&p.key()).copied()
    }

    pub fn at_time(&self, i: &DyadicInterval) -> &[usize] {
        self.by_time.get(&(i.scale, i.index)).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn max_scale(&self) -> i32 {
        self.scales.iter().copied().max().unwrap_or(0)
    }
}

/// Time-interval index of a subset, for ancestor lookups.
struct TimeIndex {
    by_time: BTreeMap<(i32, i64), Vec<usize>>,
    scales: Vec<i32>,
}

impl TimeIndex {
    fn new(tiles: &[Tile], members: &[usize]) -> Self {
        let mut by_time: BTreeMap<(i32, i64), Vec<usize>> = BTreeMap::new();
        let mut scales = BTreeSet::new();
        for &i in members {
            let p = &tiles[i];
            by_time.entry((p.time.scale, p.time.index)).or_default().push(i);
            scales.insert(p.time.scale);
        }
        Self { by_time, scales: scales.into_iter().collect() }
    }

    /// Members whose interval strictly contains `i`.
    fn strictly_above<'a>(&'a self, i: &'a DyadicInterval) -> impl Iterator<Item = usize> + 'a {
        self.scales.iter().filter(move |&&s| s < i.scale).flat_map(move |&s| {
            let a = i.ancestor(s);
            self.by_time.get(&(a.scale, a.index)).into_iter().flatten().copied()
        })
    }

    /// Members whose interval contains `i` (including equal).
    fn above_or_equal<'a>(&'a self, i: &'a DyadicInterval) -> impl Iterator<Item = usize> + 'a {
        self.scales.iter().filter(move |&&s| s <= i.scale).flat_map(move |&s| {
            let a = i.ancestor(s);
            self.by_time.get(&(a.scale, a.index)).into_iter().flatten().copied()
        })
    }
}

/// Longest `≨`-chain above each member inside `members`: `h(P) = 0` when
/// nothing in the set lies strictly above `P`.
pub fn chain_heights(tiles: &[Tile], members: &[usize]) -> BTreeMap<usize, usize> {
    let idx = TimeIndex::new(tiles, members);
    let mut order: Vec<usize> = members.to_vec();
    order.sort_by_key(|&i| (tiles[i].time.scale, tiles[i].key()));
    let mut h: BTreeMap<usize, usize> = BTreeMap::new();
    for &i in &order {
        let p = &tiles[i];
        let best = idx
            .strictly_above(&p.time)
            .filter(|&q| lneq(p, &tiles[q]))
            .map(|q| h[&q] + 1)
            .max()
            .unwrap_or(0);
        h.insert(i, best);
    }
    h
}

fn comparable(p: &Tile, q: &Tile) -> bool {
    leq(p, q) || leq(q, p)
}

/// Splits `members` into antichains: first by chain height, then greedily
/// inside a height class should two equal-interval tiles compare.
pub fn antichain_layers(tiles: &[Tile], members: &[usize]) -> Vec<Vec<usize>> {
    let h = chain_heights(tiles, members);
    let mut by_height: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&i, &v) in &h {
        by_height.entry(v).or_default().push(i);
    }
    let mut layers = Vec::new();
    for (_, group) in by_height {
        let mut colours: Vec<Vec<usize>> = Vec::new();
        for i in group {
            match colours.iter_mut().find(|c| c.iter().all(|&j| !comparable(&tiles[i], &tiles[j]))) {
                Some(c) => c.push(i),
                None => colours.push(vec![i]),
            }
        }
        layers.extend(colours);
    }
    layers
}

/// First comparable pair in a set, if any.
pub fn find_chain_pair(tiles: &[Tile]) -> Option<(usize, usize)> {
    for i in 0..tiles.len() {
        for j in i + 1..tiles.len() {
            if comparable(&tiles[i], &tiles[j]) {
                return Some((i, j));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub top: Top,
    pub members: Vec<Tile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub delta: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TreeViolation {
    /// `(3/2)P ≰ top`.
    NotUnderTop { tile: TileKey },
    /// A brother with `(3/2)P_u ≤ top` is missing.
    BrotherMissing { tile: TileKey, brother: TileKey },
    /// `P₁ ≤ P ≤ P₂` with `P` outside the tree.
    NotConvex { lower: TileKey, middle: TileKey, upper: TileKey },
    InvalidTop { reason: String },
}

/// Tree conditions (top domination, brothers, convexity) against the ambient universe. Brothers outside the
/// universe are exempt from the brother condition.
pub fn validate_tree(tree: &Tree, universe: &Universe) -> Vec<TreeViolation> {
    let mut out = Vec::new();
    if let Err(e) = tree.top.validate() {
        out.push(TreeViolation::InvalidTop { reason: e.to_string() });
    }
    let keys: BTreeSet<TileKey> = tree.members.iter().map(|p| p.key()).collect();
    for p in &tree.members {
        if !top_leq(&p.dilate(1.5), &tree.top) {
            out.push(TreeViolation::NotUnderTop { tile: p.key() });
        }
        for b in [p.upper_brother(), p.lower_brother()] {
            if universe.index_of(&b).is_some() && !keys.contains(&b.key()) && top_leq(&b.dilate(1.5), &tree.top) {
                out.push(TreeViolation::BrotherMissing { tile: p.key(), brother: b.key() });
            }
        }
    }
    let mut times: BTreeSet<(i32, i64)> = BTreeSet::new();
    for p in &tree.members {
        for &s in &universe.scales {
            if s <= p.time.scale {
                let a = p.time.ancestor(s);
                times.insert((a.scale, a.index));
            }
        }
    }
    for (s, t) in times {
        for &u in universe.at_time(&DyadicInterval::time(s, t)) {
            let q = &universe.tiles()[u];
            if keys.contains(&q.key()) {
                continue;
            }
            let upper = tree.members.iter().find(|m| leq(q, m));
            let lower = upper.and_then(|_| tree.members.iter().find(|m| leq(m, q)));
            if let (Some(lo), Some(hi)) = (lower, upper) {
                out.push(TreeViolation::NotConvex { lower: lo.key(), middle: q.key(), upper: hi.key() });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ForestViolation {
    Mass { tree: usize, tile: TileKey, mass: f64 },
    NotSeparated { tree: usize, tile: TileKey, other_tree: usize },
    Counting { x: f64, count: usize, limit: f64 },
}

/// Forest hypotheses: (1) masses at most `δ`, (2) `2P ≰ 2P̃_k` across
/// trees, (3) no point in more than `Kδ⁻²` top intervals.
pub fn validate_forest(forest: &Forest, mass_of: &dyn Fn(&Tile) -> f64) -> Vec<ForestViolation> {
    let mut out = Vec::new();
    for (j, t) in forest.trees.iter().enumerate() {
        for p in &t.members {
            let m = mass_of(p);
            if m > forest.delta {
                out.push(ForestViolation::Mass { tree: j, tile: p.key(), mass: m });
            }
            let p2 = p.dilate(2.0);
            for (k, o) in forest.trees.iter().enumerate() {
                if k != j && o.top.tiles.iter().any(|q| leq(&p2, &q.dilate(2.0))) {
                    out.push(ForestViolation::NotSeparated { tree: j, tile: p.key(), other_tree: k });
                }
            }
        }
    }
    let tops: Vec<DyadicInterval> = forest.trees.iter().map(|t| t.top.time()).collect();
    let limit = forest.k / (forest.delta * forest.delta);
    if let Some((x, count)) = max_overlap(&tops) {
        if count as f64 > limit {
            out.push(ForestViolation::Counting { x, count, limit });
        }
    }
    out
}

/// Point of maximal overlap of a family of time intervals.
fn max_overlap(intervals: &[DyadicInterval]) -> Option<(f64, usize)> {
    let finest = intervals.iter().map(|i| i.scale).max()?;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for i in intervals {
        let shift = finest - i.scale;
        let lo = i.index << shift;
        for c in lo..lo + (1i64 << shift) {
            *counts.entry(c).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by_key(|&(c, n)| (n, std::cmp::Reverse(c)))
        .map(|(c, n)| ((c as f64 + 0.5) * pow2(-finest), n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RowViolation {
    TopsOverlap { a: usize, b: usize },
    NotNormal { tree: usize, tile: TileKey },
}

/// `|I| ≤ (δ¹⁰⁰/K)|I₀|` and `dist(I, ∂I₀) > 20(δ¹⁰⁰/K)|I₀|`.
pub fn is_normal_member(p: &Tile, i0: &DyadicInterval, delta: f64, k: f64) -> bool {
    let r = delta.powi(100) / k;
    let len0 = i0.length();
    let d = (p.time.left() - i0.left()).min(i0.right() - p.time.right());
    p.time.length() <= r * len0 && d > 20.0 * r * len0
}

/// Row conditions: disjoint top intervals and normal members.
pub fn validate_row(row: &Row, delta: f64, k: f64) -> Vec<RowViolation> {
    let mut out = Vec::new();
    for a in 0..row.trees.len() {
        for b in a + 1..row.trees.len() {
            if row.trees[a].top.time().intersects(&row.trees[b].top.time()) {
                out.push(RowViolation::TopsOverlap { a, b });
            }
        }
        let i0 = row.trees[a].top.time();
        for p in &row.trees[a].members {
            if !is_normal_member(p, &i0, delta, k) {
                out.push(RowViolation::NotNormal { tree: a, tile: p.key() });
            }
        }
    }
    out
}

/// Separation: disjoint tops, or every member of one tree inside the other's
/// top interval has `⌈Δ(P, P₂)⌉ < δ` against that tree's representative.
pub fn validate_separation(t1: &Tree, t2: &Tree, delta_sep: f64) -> bool {
    let (i1, i2) = (t1.top.time(), t2.top.time());
    if !i1.intersects(&i2) {
        return true;
    }
    let side = |a: &Tree, b: &Tree| {
        let rep = b.top.rep();
        a.members
            .iter()
            .filter(|p| p.time.is_subset_of(&b.top.time()))
            .all(|p| bracket(delta(p, rep)) < delta_sep)
    };
    side(t1, t2) && side(t2, t1)
}

/// A tile or a union of consecutive brothers over one time interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub tiles: Vec<Tile>,
}

impl Unit {
    pub fn time(&self) -> DyadicInterval {
        self.tiles[0].time
    }

    pub fn edge_box(&self) -> EdgeBox {
        let mut b = self.tiles[0].edge_box();
        for p in &self.tiles[1..] {
            let e = p.edge_box();
            b.a_lo = b.a_lo.min(e.a_lo);
            b.a_hi = b.a_hi.max(e.a_hi);
            b.w_lo = b.w_lo.min(e.w_lo);
            b.w_hi = b.w_hi.max(e.w_hi);
        }
        b
    }

    /// `self < other`: strictly smaller interval inside `other`'s and a
    /// common interior line.
    pub fn below(&self, other: &Unit) -> bool {
        let (a, b) = (self.time(), other.time());
        a.scale > b.scale && a.is_subset_of(&b) && other.edge_box().separation(&self.edge_box(), false) < 0.0
    }
}

/// Groups tiles of one tree into units: runs of brothers sharing a time
/// interval become one unit.
pub fn brother_units(members: &[Tile]) -> Vec<Unit> {
    let mut by_time: BTreeMap<(i32, i64, i64), Vec<Tile>> = BTreeMap::new();
    for p in members {
        by_time.entry((p.time.scale, p.time.index, p.slope_index())).or_default().push(*p);
    }
    let mut out = Vec::new();
    for (_, mut v) in by_time {
        v.sort_by_key(|p| p.alpha.index);
        let mut run = vec![v[0]];
        for p in v.into_iter().skip(1) {
            if p.alpha.index == run.last().unwrap().alpha.index + 1 {
                run.push(p);
            } else {
                out.push(Unit { tiles: std::mem::replace(&mut run, vec![p]) });
            }
        }
        out.push(Unit { tiles: run });
    }
    out
}

/// Per-unit longest chains `P < P₁ < …` above (`up`) or below.
fn unit_chain_lengths(units: &[Unit], up: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by_key(|&i| units[i].time().scale);
    if !up {
        order.reverse();
    }
    let mut len = vec![0usize; units.len()];
    for (pos, &i) in order.iter().enumerate() {
        let mut best = 0;
        for &j in &order[..pos] {
            let rel = if up { units[i].below(&units[j]) } else { units[j].below(&units[i]) };
            if rel {
                best = best.max(len[j] + 1);
            }
        }
        len[i] = best;
    }
    len
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeParams {
    pub mass: MassConfig,
    #[serde(rename = "K")]
    pub k: f64,
}

impl DecomposeParams {
    pub fn from_config(c: &crate::config::Config) -> Self {
        Self { mass: MassConfig { n: c.mass_n, tol: c.mass_tol }, k: c.k_count }
    }
}

/// Where a tile ends up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "bucket", rename_all = "kebab-case")]
pub enum Terminal {
    ZeroMass,
    ChainPruned { n: u32, layer: usize },
    Exceptional { n: u32 },
    Antichain { n: u32, j: u32, layer: usize },
    EmptyTop { n: u32, j: u32 },
    Top { n: u32, j: u32 },
    MinPruned { n: u32, j: u32, layer: usize },
    Repair { n: u32, j: u32, layer: usize },
    RowChain { n: u32, j: u32, plus: bool, layer: usize },
    Boundary { n: u32, j: u32, tree: usize },
    Normal { n: u32, j: u32, tree: usize },
    RowResidual { n: u32, j: u32, layer: usize },
}

impl Terminal {
    /// Buckets that must be antichains.
    pub fn is_antichain_layer(&self) -> bool {
        matches!(
            self,
            Terminal::ChainPruned { .. }
                | Terminal::Antichain { .. }
                | Terminal::EmptyTop { .. }
                | Terminal::Top { .. }
                | Terminal::MinPruned { .. }
                | Terminal::Repair { .. }
                | Terminal::RowChain { .. }
                | Terminal::RowResidual { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    pub threshold: f64,
    /// `‖N‖₁ = Σ|Ī_k|`.
    pub n_l1: f64,
    /// Runs `(left, right, N)` of the step function `N` with `N > 0`.
    pub runs: Vec<(f64, f64, u32)>,
    pub g_measure: f64,
    /// `|G_n|·2ⁿK`.
    pub g_constant: f64,
    pub dropped_maximal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowsReport {
    pub rows: Vec<Row>,
    /// `log₂(K¹⁰⁰δ⁻¹⁰⁰)`.
    pub chain_bound: f64,
    pub plus_layers: Vec<Vec<TileKey>>,
    pub minus_layers: Vec<Vec<TileKey>>,
    pub boundary: Vec<Vec<TileKey>>,
    pub residual_layers: Vec<Vec<TileKey>>,
    pub f_measure: f64,
    /// `|F|·K/δ⁵⁰`.
    pub f_constant: f64,
    pub row_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub j: u32,
    pub size: usize,
    /// The `P^r`.
    pub maximal: Vec<TileKey>,
    /// Tiles under two maximal tiles whose `4P^k`, `4P^l` do not compare.
    pub cover_violations: usize,
    pub a1: usize,
    pub a2: Vec<TileKey>,
    pub antichain_layers: Vec<Vec<TileKey>>,
    pub empty_tops: Vec<TileKey>,
    pub orbit_sizes: Vec<usize>,
    pub orbit_violations: usize,
    /// `S̄_k ∝ S̄_l` without `4P^k ≤ 4P^l`.
    pub relation_violations: usize,
    pub tops_deleted: Vec<TileKey>,
    pub min_layers: Vec<Vec<TileKey>>,
    pub repair_layers: Vec<Vec<TileKey>>,
    pub repairs: usize,
    pub forest: Forest,
    pub rows: RowsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumReport {
    pub n: u32,
    pub size: usize,
    pub maximal: Vec<TileKey>,
    pub sum_e_maximal: f64,
    /// Tiles with a chain of length `n` above them that are not in `𝒫_n⁰`.
    pub claim_violations: usize,
    pub chain_layers: Vec<Vec<TileKey>>,
    pub counting: CountingReport,
    pub exceptional: Vec<TileKey>,
    pub buckets: Vec<BucketReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conservation {
    pub input: usize,
    pub assigned: usize,
    pub duplicates: usize,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub tree_violations: usize,
    pub forest_violations: usize,
    pub row_violations: usize,
    pub antichain_violations: usize,
    pub row_count_violations: usize,
    pub orbit_violations: usize,
    pub claim_violations: usize,
    pub cover_violations: usize,
    pub relation_violations: usize,
    pub repairs: usize,
}

impl ValidationSummary {
    /// The hard postconditions.
    pub fn passed(&self) -> bool {
        self.tree_violations == 0
            && self.forest_violations == 0
            && self.row_violations == 0
            && self.antichain_violations == 0
            && self.row_count_violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseSummary {
    pub scales: Vec<i32>,
    pub window: RealInterval,
    pub tiles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub universe: UniverseSummary,
    pub params: DecomposeParams,
    pub zero_mass: usize,
    pub strata: Vec<StratumReport>,
    pub assignment: Vec<(TileKey, Terminal)>,
    pub conservation: Conservation,
    pub validation: ValidationSummary,
}

impl DecompositionReport {
    pub fn forests(&self) -> impl Iterator<Item = &Forest> {
        self.strata.iter().flat_map(|s| s.buckets.iter().map(|b| &b.forest))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One CSV row per stage count and stratum.
    pub fn summary_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("n,size,maximal,chain_layers,g_measure,buckets,trees,rows,f_measure\n");
        for st in &self.strata {
            let trees: usize = st.buckets.iter().map(|b| b.forest.trees.len()).sum();
            let rows: usize = st.buckets.iter().map(|b| b.rows.rows.len()).sum();
            let f: f64 = st.buckets.iter().map(|b| b.rows.f_measure).sum();
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6e},{},{},{},{:.6e}",
                st.n,
                st.size,
                st.maximal.len(),
                st.chain_layers.len(),
                st.counting.g_measure,
                st.buckets.len(),
                trees,
                rows,
                f
            );
        }
        s
    }
}

/// `n` with `2^{-n-1} < A ≤ 2^{-n}`; `None` for `A = 0`.
pub fn stratum_index(a: f64) -> Option<u32> {
    if a <= 0.0 {
        return None;
    }
    let mut n = (-a.log2()).floor().max(0.0) as i64;
    while a > pow2(-(n as i32)) {
        n -= 1;
    }
    while a <= pow2(-(n as i32) - 1) {
        n += 1;
    }
    Some(n as u32)
}

/// Strata `n ↦ tiles` (sorted) and the zero-mass tiles.
pub fn stratify(mass: &[f64]) -> (BTreeMap<u32, Vec<usize>>, Vec<usize>) {
    let mut strata: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    let mut zero = Vec::new();
    for (i, &a) in mass.iter().enumerate() {
        match stratum_index(a) {
            Some(n) => strata.entry(n).or_default().push(i),
            None => zero.push(i),
        }
    }
    (strata, zero)
}

/// Maximal elements under `≤` of the tiles (all scales) with
/// `|E(P)|/|I| ≥ 2^{-n-1}`, with their `|E|`.
pub fn maximal_tiles(n: u32, occ: &Occupancy) -> Vec<(Tile, f64)> {
    let dense = occ.dense_tiles(pow2(-(n as i32) - 1));
    let tiles: Vec<Tile> = dense.iter().map(|d| d.0).collect();
    let all: Vec<usize> = (0..tiles.len()).collect();
    let idx = TimeIndex::new(&tiles, &all);
    let mut out: Vec<(Tile, f64)> = dense
        .iter()
        .enumerate()
        .filter(|(i, (p, _))| !idx.strictly_above(&p.time).any(|q| q != *i && leq(p, &tiles[q])))
        .map(|(_, d)| *d)
        .collect();
    out.sort_by_key(|d| d.0.key());
    out
}

/// `N` on cells of width `2^{-res_log2}`, `G_n = {N > 2^{2n}K}` as a cell
/// mask, and the counting report.
pub fn counting_exceptional(maximal: &[Tile], n: u32, k: f64, res_log2: i32) -> (Vec<u32>, Vec<bool>, CountingReport) {
    let cells = 1usize << res_log2;
    let mut count = vec![0u32; cells];
    for p in maximal {
        let shift = res_log2 - p.time.scale;
        let lo = (p.time.index as usize) << shift;
        for c in &mut count[lo..lo + (1usize << shift)] {
            *c += 1;
        }
    }
    let threshold = pow2(2 * n as i32) * k;
    let g: Vec<bool> = count.iter().map(|&c| c as f64 > threshold).collect();
    let h = pow2(-res_log2);
    let g_measure = g.iter().filter(|&&b| b).count() as f64 * h;
    let mut runs = Vec::new();
    let mut start = 0;
    for c in 1..=cells {
        if c == cells || count[c] != count[start] {
            if count[start] > 0 {
                runs.push((start as f64 * h, c as f64 * h, count[start]));
            }
            start = c;
        }
    }
    let dropped = maximal.iter().filter(|p| interval_in_mask(&p.time, &g, res_log2)).count();
    let report = CountingReport {
        threshold,
        n_l1: maximal.iter().map(|p| p.time.length()).sum(),
        runs,
        g_measure,
        g_constant: g_measure * pow2(n as i32) * k,
        dropped_maximal: dropped,
    };
    (count, g, report)
}

fn interval_in_mask(i: &DyadicInterval, mask: &[bool], res_log2: i32) -> bool {
    let shift = res_log2 - i.scale;
    let lo = (i.index as usize) << shift;
    mask[lo..lo + (1usize << shift)].iter().all(|&b| b)
}

/// Union-find over `0..n`.
struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = i;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Drives the pipeline and records every tile's terminal bucket.
struct Pipeline<'a> {
    u: &'a Universe,
    mass: &'a [f64],
    e: &'a [f64],
    params: DecomposeParams,
    terminal: Vec<Vec<Terminal>>,
}

impl<'a> Pipeline<'a> {
    fn tiles(&self) -> &'a [Tile] {
        self.u.tiles()
    }

    fn assign(&mut self, i: usize, t: Terminal) {
        self.terminal[i].push(t);
    }

    fn keys(&self, set: &[usize]) -> Vec<TileKey> {
        set.iter().map(|&i| self.tiles()[i].key()).collect()
    }

    fn layers_into(&mut self, set: &[usize], mk: impl Fn(usize) -> Terminal) -> Vec<Vec<TileKey>> {
        let layers = antichain_layers(self.tiles(), set);
        for (l, layer) in layers.iter().enumerate() {
            for &i in layer {
                self.assign(i, mk(l));
            }
        }
        layers.iter().map(|l| self.keys(l)).collect()
    }

    fn stratum(&mut self, n: u32, members: &[usize], occ: &Occupancy, res_log2: i32) -> StratumReport {
        let tiles = self.tiles();
        let maximal_e = maximal_tiles(n, occ);
        let maximal: Vec<Tile> = maximal_e.iter().map(|d| d.0).collect();
        let sum_e_maximal = maximal_e.iter().map(|d| d.1).sum();
        let max_idx = TimeIndex::new(&maximal, &(0..maximal.len()).collect::<Vec<_>>());

        // 𝒫_n⁰ and the chain claim.
        let heights = chain_heights(tiles, members);
        let mut p0 = Vec::new();
        let mut d = Vec::new();
        let mut claim_violations = 0;
        for &i in members {
            let p4 = tiles[i].dilate(4.0);
            let under = max_idx.above_or_equal(&tiles[i].time).any(|q| trianglelefteq(&p4, &maximal[q]));
            if under {
                p0.push(i);
            } else {
                d.push(i);
                if heights[&i] >= n as usize {
                    claim_violations += 1;
                }
            }
        }
        let chain_layers = self.layers_into(&d, |l| Terminal::ChainPruned { n, layer: l });

        // Counting function and exceptional set.
        let (_, g, counting) = counting_exceptional(&maximal, n, self.params.k, res_log2);
        let kept_max: Vec<Tile> =
            maximal.iter().filter(|p| !interval_in_mask(&p.time, &g, res_log2)).copied().collect();
        let kept_idx = TimeIndex::new(&kept_max, &(0..kept_max.len()).collect::<Vec<_>>());
        let mut exceptional = Vec::new();
        let mut pg = Vec::new();
        for &i in &p0 {
            if interval_in_mask(&tiles[i].time, &g, res_log2) {
                exceptional.push(i);
                self.assign(i, Terminal::Exceptional { n });
            } else {
                pg.push(i);
            }
        }

        // Buckets by B(P).
        let mut buckets: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for &i in &pg {
            let p4 = tiles[i].dilate(4.0);
            let b = kept_idx.above_or_equal(&tiles[i].time).filter(|&q| trianglelefteq(&p4, &kept_max[q])).count();
            let j = if b == 0 { 0 } else { (usize::BITS - 1 - b.leading_zeros()) as u32 };
            buckets.entry(j).or_default().push(i);
        }
        let bucket_reports = buckets.into_iter().map(|(j, set)| self.bucket(n, j, &set)).collect();

        StratumReport {
            n,
            size: members.len(),
            maximal: maximal.iter().map(|p| p.key()).collect(),
            sum_e_maximal,
            claim_violations,
            chain_layers,
            counting,
            exceptional: self.keys(&exceptional),
            buckets: bucket_reports,
        }
    }

    fn bucket(&mut self, n: u32, j: u32, set: &[usize]) -> BucketReport {
        let tiles = self.tiles();
        let idx = TimeIndex::new(tiles, set);
        // Maximal elements of 4𝒫_nj.
        let maximal: Vec<usize> = set
            .iter()
            .copied()
            .filter(|&i| {
                let p4 = tiles[i].dilate(4.0);
                idx.above_or_equal(&tiles[i].time).all(|q| {
                    let q4 = tiles[q].dilate(4.0);
                    !leq(&p4, &q4) || leq(&q4, &p4)
                })
            })
            .collect();
        let is_max: BTreeSet<usize> = maximal.iter().copied().collect();
        let mi = TimeIndex::new(tiles, &maximal);

        let mut cover_violations = 0;
        let mut a1 = Vec::new();
        let mut a2 = Vec::new();
        let mut b = Vec::new();
        for &i in set {
            let p = &tiles[i];
            let p4 = p.dilate(4.0);
            let under: Vec<usize> =
                mi.above_or_equal(&p.time).filter(|&q| trianglelefteq(&p4, &tiles[q].dilate(4.0))).collect();
            for x in 0..under.len() {
                for y in x + 1..under.len() {
                    let (k4, l4) = (tiles[under[x]].dilate(4.0), tiles[under[y]].dilate(4.0));
                    if !(leq(&k4, &l4) && leq(&l4, &k4)) {
                        cover_violations += 1;
                    }
                }
            }
            let p15 = p.dilate(1.5);
            let ups: Vec<usize> = mi.above_or_equal(&p.time).filter(|&q| leq(&p15, &tiles[q])).collect();
            if ups.is_empty() {
                a1.push(i);
            } else if !is_max.contains(&i) && ups.iter().any(|&q| tiles[q].time == p.time) {
                a2.push(i);
            } else {
                b.push(i);
            }
        }
        let a: Vec<usize> = a1.iter().chain(&a2).copied().collect();
        let antichain_layers = self.layers_into(&a, |l| Terminal::Antichain { n, j, layer: l });

        // S_k for each maximal tile.
        let b_set: BTreeSet<usize> = b.iter().copied().collect();
        let mut s: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &i in &b {
            if is_max.contains(&i) {
                continue;
            }
            let p15 = tiles[i].dilate(1.5);
            for q in mi.strictly_above(&tiles[i].time) {
                if lneq(&p15, &tiles[q]) {
                    s.entry(q).or_default().push(i);
                }
            }
        }
        let mut empty_tops = Vec::new();
        let mut live: Vec<usize> = Vec::new();
        for &k in &maximal {
            if s.get(&k).map_or(true, |v| v.is_empty()) {
                empty_tops.push(k);
            } else {
                live.push(k);
            }
        }
        for &k in &empty_tops {
            self.assign(k, Terminal::EmptyTop { n, j });
        }

        // ∝ classes over S̄_k.
        let pos: BTreeMap<usize, usize> = live.iter().enumerate().map(|(a, &k)| (k, a)).collect();
        let mut owners: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (&k, v) in &s {
            if let Some(&a) = pos.get(&k) {
                owners.entry(k).or_default().push(a);
                for &i in v {
                    owners.entry(i).or_default().push(a);
                }
            }
        }
        let mut dsu = Dsu::new(live.len());
        let owned: Vec<usize> = owners.keys().copied().collect();
        for &x in &owned {
            let ox = owners[&x].clone();
            for w in ox.windows(2) {
                dsu.union(w[0], w[1]);
            }
        }
        let mut relation_violations = 0;
        for (ai, &x) in owned.iter().enumerate() {
            let x2 = tiles[x].dilate(2.0);
            for &y in &owned[ai + 1..] {
                let y2 = tiles[y].dilate(2.0);
                if leq(&x2, &y2) || leq(&y2, &x2) {
                    let (kx, ky) = (owners[&x][0], owners[&y][0]);
                    if dsu.find(kx) != dsu.find(ky) {
                        let (p, q) = (tiles[live[kx]].dilate(4.0), tiles[live[ky]].dilate(4.0));
                        if !(leq(&p, &q) || leq(&q, &p)) {
                            relation_violations += 1;
                        }
                    }
                    dsu.union(kx, ky);
                }
            }
        }
        let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for a in 0..live.len() {
            let r = dsu.find(a);
            classes.entry(r).or_default().push(a);
        }
        let orbit_sizes: Vec<usize> = classes.values().map(|c| c.len()).collect();
        let orbit_violations = orbit_sizes.iter().filter(|&&c| c > 4).count();

        // Trees: members, reduced top, deleted tops and minimal tiles.
        let mut tops_deleted = Vec::new();
        let mut trees: Vec<(Top, Vec<usize>)> = Vec::new();
        let mut residual: Vec<usize> = Vec::new();
        let mut min_all = Vec::new();
        for class in classes.values() {
            let tops: Vec<usize> = class.iter().map(|&a| live[a]).collect();
            tops_deleted.extend(&tops);
            let mut members: BTreeSet<usize> = BTreeSet::new();
            for &k in &tops {
                members.extend(s[&k].iter().copied());
            }
            for &k in &tops {
                members.remove(&k);
            }
            let top = self.reduced_top(&tops);
            let mem: Vec<usize> = members.into_iter().collect();
            let min: Vec<usize> = mem
                .iter()
                .copied()
                .filter(|&i| {
                    mem.iter().all(|&q| {
                        !tiles[q].time.intersects(&tiles[i].time) || tiles[i].time.is_subset_of(&tiles[q].time)
                    })
                })
                .collect();
            let min_set: BTreeSet<usize> = min.iter().copied().collect();
            min_all.extend(&min);
            trees.push((top, mem.into_iter().filter(|i| !min_set.contains(i)).collect()));
        }
        for &k in &tops_deleted {
            self.assign(k, Terminal::Top { n, j });
        }
        let min_layers = self.layers_into(&min_all, |l| Terminal::MinPruned { n, j, layer: l });
        // Tiles of ℬ in no class (not expected).
        let placed: BTreeSet<usize> = trees
            .iter()
            .flat_map(|t| t.1.iter().copied())
            .chain(tops_deleted.iter().copied())
            .chain(min_all.iter().copied())
            .chain(empty_tops.iter().copied())
            .collect();
        residual.extend(b_set.iter().copied().filter(|i| !placed.contains(i)));

        // Repair to a fixpoint against the tree conditions and the forest hypotheses.
        let delta = pow2(-(n as i32));
        let repairs = self.repair(&mut trees, &mut residual, delta);
        let repair_layers = self.layers_into(&residual, |l| Terminal::Repair { n, j, layer: l });
        let forest = Forest {
            trees: trees
                .iter()
                .map(|(t, m)| Tree { top: t.clone(), members: m.iter().map(|&i| tiles[i]).collect() })
                .collect(),
            delta,
            k: self.params.k,
        };
        let rows = self.rows(n, j, &forest);

        BucketReport {
            j,
            size: set.len(),
            maximal: self.keys(&maximal),
            cover_violations,
            a1: a1.len(),
            a2: self.keys(&a2),
            antichain_layers,
            empty_tops: self.keys(&empty_tops),
            orbit_sizes,
            orbit_violations,
            relation_violations,
            tops_deleted: self.keys(&tops_deleted),
            min_layers,
            repair_layers,
            repairs,
            forest,
            rows,
        }
    }

    /// Top of a class: the member with largest `|E|` plus up to three more
    /// members on the same interval with pairwise `4P ≤ 4P'`.
    fn reduced_top(&self, class_tops: &[usize]) -> Top {
        let tiles = self.tiles();
        let mut order = class_tops.to_vec();
        order.sort_by(|&a, &b| {
            self.e[b].partial_cmp(&self.e[a]).unwrap().then_with(|| tiles[a].key().cmp(&tiles[b].key()))
        });
        let mut chosen = vec![order[0]];
        for &c in &order[1..] {
            if chosen.len() == 4 {
                break;
            }
            let c4 = tiles[c].dilate(4.0);
            let fits = tiles[c].time == tiles[chosen[0]].time
                && chosen.iter().all(|&x| {
                    let x4 = tiles[x].dilate(4.0);
                    leq(&c4, &x4) && leq(&x4, &c4)
                });
            if fits {
                chosen.push(c);
            }
        }
        Top::new_unchecked(chosen.iter().map(|&i| tiles[i]).collect())
    }

    fn repair(&self, trees: &mut Vec<(Top, Vec<usize>)>, residual: &mut Vec<usize>, delta: f64) -> usize {
        let tiles = self.tiles();
        let mut removed = 0;
        loop {
            let mut drop: BTreeSet<(usize, usize)> = BTreeSet::new();
            for (t, (top, mem)) in trees.iter().enumerate() {
                let tree = Tree { top: top.clone(), members: mem.iter().map(|&i| tiles[i]).collect() };
                for v in validate_tree(&tree, self.u) {
                    let bad: Vec<TileKey> = match v {
                        TreeViolation::NotUnderTop { tile } => vec![tile],
                        TreeViolation::BrotherMissing { tile, .. } => vec![tile],
                        TreeViolation::NotConvex { middle, .. } => {
                            let q = &tiles[self.u.by_key[&middle]];
                            tree.members.iter().filter(|m| leq(m, q)).map(|m| m.key()).collect()
                        }
                        TreeViolation::InvalidTop { .. } => tree.members.iter().map(|m| m.key()).collect(),
                    };
                    for k in bad {
                        drop.insert((t, self.u.by_key[&k]));
                    }
                }
            }
            let forest = Forest {
                trees: trees
                    .iter()
                    .map(|(t, m)| Tree { top: t.clone(), members: m.iter().map(|&i| tiles[i]).collect() })
                    .collect(),
                delta,
                k: self.params.k,
            };
            let mass_of = |p: &Tile| self.mass[self.u.by_key[&p.key()]];
            for v in validate_forest(&forest, &mass_of) {
                match v {
                    ForestViolation::Mass { tree, tile, .. } | ForestViolation::NotSeparated { tree, tile, .. } => {
                        drop.insert((tree, self.u.by_key[&tile]));
                    }
                    ForestViolation::Counting { x, .. } => {
                        // Empty the latest tree whose top covers the hot spot.
                        if let Some(t) = (0..trees.len()).rev().find(|&t| {
                            trees[t].0.time().contains_point(x) && !trees[t].1.is_empty()
                        }) {
                            for &i in &trees[t].1 {
                                drop.insert((t, i));
                            }
                        }
                    }
                }
            }
            if drop.is_empty() {
                break;
            }
            for (t, i) in drop {
                if let Some(p) = trees[t].1.iter().position(|&x| x == i) {
                    trees[t].1.remove(p);
                    residual.push(i);
                    removed += 1;
                }
            }
        }
        residual.sort_unstable();
        residual.dedup();
        removed
    }

    fn rows(&mut self, n: u32, j: u32, forest: &Forest) -> RowsReport {
        let (delta, k) = (forest.delta, forest.k);
        let tiles = self.tiles();
        let chain_bound = (k.powi(100) * delta.powi(-100)).log2();
        let m = chain_bound.floor().max(1.0) as usize;
        // 𝒫⁺, 𝒫⁻ over brother units of all trees.
        let mut units: Vec<(usize, Unit)> = Vec::new();
        for (t, tree) in forest.trees.iter().enumerate() {
            units.extend(brother_units(&tree.members).into_iter().map(|u| (t, u)));
        }
        let only: Vec<Unit> = units.iter().map(|u| u.1.clone()).collect();
        let up = unit_chain_lengths(&only, true);
        let plus: Vec<usize> = (0..only.len()).filter(|&u| up[u] < m).collect();
        let rest: Vec<usize> = (0..only.len()).filter(|&u| up[u] >= m).collect();
        let rest_units: Vec<Unit> = rest.iter().map(|&u| only[u].clone()).collect();
        let down = unit_chain_lengths(&rest_units, false);
        let minus: Vec<usize> = (0..rest.len()).filter(|&r| down[r] < m).map(|r| rest[r]).collect();
        let kept: Vec<usize> = (0..rest.len()).filter(|&r| down[r] >= m).map(|r| rest[r]).collect();
        let expand = |us: &[usize]| -> Vec<usize> {
            let mut v: Vec<usize> = us
                .iter()
                .flat_map(|&u| units[u].1.tiles.iter().map(|p| self.u.by_key[&p.key()]))
                .collect();
            v.sort_unstable();
            v
        };
        let plus_tiles = expand(&plus);
        let minus_tiles = expand(&minus);
        let plus_layers = self.layers_into(&plus_tiles, |l| Terminal::RowChain { n, j, plus: true, layer: l });
        let minus_layers = self.layers_into(&minus_tiles, |l| Terminal::RowChain { n, j, plus: false, layer: l });

        // F_j and the split into 𝒫^C and 𝒫^N.
        let rho = 100.0 * delta.powi(100) / (k * k);
        let mut f_measure = 0.0;
        for tree in &forest.trees {
            let len = tree.top.time().length();
            f_measure += 2.0 * (rho * len).min(0.5 * len);
        }
        let mut boundary = vec![Vec::new(); forest.trees.len()];
        let mut normal: Vec<Vec<Tile>> = vec![Vec::new(); forest.trees.len()];
        let mut residual = Vec::new();
        for &u in &kept {
            let t = units[u].0;
            let i0 = forest.trees[t].top.time();
            let edge = (rho * i0.length()).min(0.5 * i0.length());
            for p in &units[u].1.tiles {
                let idx = self.u.by_key[&p.key()];
                let in_f = p.time.right() <= i0.left() + edge || p.time.left() >= i0.right() - edge;
                if in_f {
                    boundary[t].push(p.key());
                    self.assign(idx, Terminal::Boundary { n, j, tree: t });
                } else if is_normal_member(p, &i0, delta, k) {
                    normal[t].push(*p);
                    self.assign(idx, Terminal::Normal { n, j, tree: t });
                } else {
                    residual.push(idx);
                }
            }
        }
        residual.sort_unstable();
        let residual_layers = self.layers_into(&residual, |l| Terminal::RowResidual { n, j, layer: l });

        // Rows: peel maximal disjoint top intervals.
        let mut remaining: Vec<usize> = (0..forest.trees.len()).collect();
        let mut rows = Vec::new();
        while !remaining.is_empty() {
            let mut taken: Vec<usize> = Vec::new();
            for &t in &remaining {
                let it = forest.trees[t].top.time();
                let covered = remaining.iter().any(|&o| {
                    let io = forest.trees[o].top.time();
                    io.scale < it.scale && it.is_subset_of(&io)
                });
                if !covered && !taken.iter().any(|&o| forest.trees[o].top.time() == it) {
                    taken.push(t);
                }
            }
            remaining.retain(|t| !taken.contains(t));
            rows.push(Row {
                trees: taken
                    .iter()
                    .map(|&t| Tree { top: forest.trees[t].top.clone(), members: normal[t].clone() })
                    .collect(),
            });
        }
        let _ = tiles;
        RowsReport {
            rows,
            chain_bound,
            plus_layers,
            minus_layers,
            boundary,
            residual_layers,
            f_measure,
            f_constant: f_measure * k / delta.powi(50),
            row_limit: (k / (delta * delta)).ceil(),
        }
    }
}

/// Runs the whole selection algorithm on `universe` for the line field.
pub fn decompose(universe: &Universe, field: &LineField, params: DecomposeParams) -> DecompositionReport {
    let occ = Occupancy::build(field, universe.max_scale().max(0));
    let mass = masses(universe.tiles(), &occ, &params.mass);
    decompose_with(universe, field, &occ, &mass, params)
}

/// As [`decompose`], reusing precomputed occupancy and masses.
pub fn decompose_with(
    universe: &Universe,
    field: &LineField,
    occ: &Occupancy,
    mass: &[f64],
    params: DecomposeParams,
) -> DecompositionReport {
    let e: Vec<f64> = universe.tiles().iter().map(|p| occ.measure_e(p)).collect();
    let mut pipe = Pipeline { u: universe, mass, e: &e, params, terminal: vec![Vec::new(); universe.len()] };
    let (strata, zero) = stratify(mass);
    for &i in &zero {
        pipe.assign(i, Terminal::ZeroMass);
    }
    let res_log2 = field.log2_resolution();
    let reports: Vec<StratumReport> =
        strata.iter().map(|(&n, members)| pipe.stratum(n, members, occ, res_log2)).collect();

    let tiles = universe.tiles();
    let duplicates = pipe.terminal.iter().filter(|t| t.len() > 1).count();
    let missing = pipe.terminal.iter().filter(|t| t.is_empty()).count();
    let assignment: Vec<(TileKey, Terminal)> = pipe
        .terminal
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.first().map(|&b| (tiles[i].key(), b)))
        .collect();
    let conservation =
        Conservation { input: universe.len(), assigned: assignment.len(), duplicates, missing };

    // Hard postconditions.
    let mass_of = |p: &Tile| mass[universe.by_key[&p.key()]];
    let mut v = ValidationSummary {
        tree_violations: 0,
        forest_violations: 0,
        row_violations: 0,
        antichain_violations: 0,
        row_count_violations: 0,
        orbit_violations: 0,
        claim_violations: 0,
        cover_violations: 0,
        relation_violations: 0,
        repairs: 0,
    };
    for s in &reports {
        v.claim_violations += s.claim_violations;
        for b in &s.buckets {
            v.orbit_violations += b.orbit_violations;
            v.cover_violations += b.cover_violations;
            v.relation_violations += b.relation_violations;
            v.repairs += b.repairs;
            for t in &b.forest.trees {
                v.tree_violations += validate_tree(t, universe).len();
            }
            v.forest_violations += validate_forest(&b.forest, &mass_of).len();
            for r in &b.rows.rows {
                v.row_violations += validate_row(r, b.forest.delta, b.forest.k).len();
            }
            if b.rows.rows.len() as f64 > b.rows.row_limit {
                v.row_count_violations += 1;
            }
        }
    }
    let mut layers: BTreeMap<Terminal, Vec<Tile>> = BTreeMap::new();
    for (i, t) in pipe.terminal.iter().enumerate() {
        if let Some(b) = t.first() {
            if b.is_antichain_layer() {
                layers.entry(*b).or_default().push(tiles[i]);
            }
        }
    }
    v.antichain_violations = layers.values().filter(|l| find_chain_pair(l).is_some()).count();

    DecompositionReport {
        universe: UniverseSummary { scales: universe.scales.clone(), window: universe.window, tiles: universe.len() },
        params,
        zero_mass: zero.len(),
        strata: reports,
        assignment,
        conservation,
        validation: v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tile::Line;

    fn window() -> RealInterval {
        RealInterval::new(-8.0, 8.0)
    }

    fn params() -> DecomposeParams {
        DecomposeParams { mass: MassConfig::default(), k: 16.0 }
    }

    #[test]
    fn stratum_bands() {
        assert_eq!(stratum_index(1.0), Some(0));
        assert_eq!(stratum_index(0.5), Some(1));
        assert_eq!(stratum_index(0.6), Some(0));
        assert_eq!(stratum_index(0.25), Some(2));
        assert_eq!(stratum_index(0.2), Some(2));
        assert_eq!(stratum_index(0.0), None);
        for a in [1e-9, 0.3, 0.77, 1.0 / 1024.0] {
            let n = stratum_index(a).unwrap() as i32;
            assert!(pow2(-n - 1) < a && a <= pow2(-n));
        }
    }

    #[test]
    fn full_field_single_stratum() {
        let u = Universe::new(&[0], RealInterval::new(0.0, 1.0));
        let f = LineField::constant(16, Line::new(0.5, 0.0));
        let r = decompose(&u, &f, params());
        assert_eq!(r.strata.len(), 1);
        assert_eq!(r.strata[0].n, 0);
        assert_eq!(r.conservation.missing, 0);
    }

    #[test]
    fn empty_field_all_zero_mass() {
        let u = Universe::new(&[0, 2], window());
        let f = LineField::constant(64, Line::new(1e6, 0.0));
        let r = decompose(&u, &f, params());
        assert!(r.strata.is_empty());
        assert_eq!(r.zero_mass, u.len());
    }

    #[test]
    fn maximal_examples() {
        let p = Tile::new(0, 0, 0, 0);
        let f = LineField::constant(16, p.central_line());
        let occ = Occupancy::build(&f, 2);
        let m = maximal_tiles(0, &occ);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].0, p);
    }

    #[test]
    fn counting_examples() {
        let i = Tile::new(1, 0, 0, 0);
        let disjoint = [i, Tile::new(1, 1, 0, 0)];
        let (count, g, rep) = counting_exceptional(&disjoint, 0, 1.0, 4);
        assert!(count.iter().all(|&c| c <= 1));
        assert!(g.iter().all(|&b| !b));
        assert_eq!(rep.n_l1, 1.0);
        let copies: Vec<Tile> = (0..17).map(|r| i.shift_rows(r)).collect();
        let (_, g, rep) = counting_exceptional(&copies, 0, 16.0, 4);
        assert_eq!(g.iter().filter(|&&b| b).count(), 8);
        assert_eq!(rep.g_measure, 0.5);
        assert_eq!(rep.dropped_maximal, 17);
    }

    #[test]
    fn layering_is_antichain_cover() {
        let u = Universe::new(&[0, 2, 4], window());
        let all: Vec<usize> = (0..u.len()).step_by(7).collect();
        let layers = antichain_layers(u.tiles(), &all);
        let total: usize = layers.iter().map(|l| l.len()).sum();
        assert_eq!(total, all.len());
        for l in &layers {
            let t: Vec<Tile> = l.iter().map(|&i| u.tiles()[i]).collect();
            assert!(find_chain_pair(&t).is_none());
        }
        let same: Vec<usize> = u.at_time(&DyadicInterval::time(2, 1)).to_vec();
        assert_eq!(antichain_layers(u.tiles(), &same).len(), 1);
    }

    #[test]
    fn chain_heights_on_a_chain() {
        let top = Tile::new(0, 0, 0, 0);
        let mid = Tile::new(2, 0, 0, 0);
        let low = Tile::new(4, 0, 0, 0);
        let tiles = vec![top, mid, low];
        let h = chain_heights(&tiles, &[0, 1, 2]);
        assert_eq!((h[&0], h[&1], h[&2]), (0, 1, 2));
    }

    #[test]
    fn rows_peel_nested_tops() {
        let mk = |k, t| Tree { top: Top::single(Tile::new(k, t, 0, 0)), members: vec![] };
        let forest = Forest { trees: vec![mk(0, 0), mk(2, 1), mk(4, 5), mk(2, 3)], delta: 0.5, k: 16.0 };
        let u = Universe::new(&[0], window());
        let mass = vec![0.0; u.len()];
        let e = mass.clone();
        let mut p = Pipeline { u: &u, mass: &mass, e: &e, params: params(), terminal: vec![vec![]; u.len()] };
        let r = p.rows(1, 0, &forest);
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.rows[0].trees.len(), 1);
        assert_eq!(r.rows[1].trees.len(), 2);
        let flat = Forest { trees: vec![mk(2, 0), mk(2, 1), mk(2, 2)], delta: 0.5, k: 16.0 };
        assert_eq!(p.rows(1, 0, &flat).rows.len(), 1);
        for row in &r.rows {
            assert!(validate_row(row, 0.5, 16.0).is_empty());
        }
    }

    #[test]
    fn separation_examples() {
        let t = |p: Tile| Tree { top: Top::single(p), members: vec![p.shift_rows(0)] };
        let a = t(Tile::new(2, 0, 0, 0));
        let b = t(Tile::new(2, 1, 0, 0));
        assert!(validate_separation(&a, &b, 0.5));
        assert!(!validate_separation(&a, &a, 1.0));
        // Same scale, frequency distance D rows: separated iff 1/(1+D') < δ
        // where D' = Δ between the two tiles.
        for d in 1..8 {
            let far = t(Tile::new(2, 0, 0, 0).shift_rows(d));
            let dd = delta(&a.members[0], far.top.rep());
            for delta_sep in [0.1, 0.3, 0.6] {
                assert_eq!(validate_separation(&a, &far, delta_sep), 1.0 / (1.0 + dd) < delta_sep);
            }
        }
    }

    #[test]
    fn tree_validator_flags_each_condition() {
        let u = Universe::new(&[0, 2], window());
        let top = Top::single(Tile::new(0, 0, 0, 0));
        let far = Tile::new(2, 0, 5, 5);
        let bad = Tree { top: top.clone(), members: vec![far] };
        assert!(validate_tree(&bad, &u).iter().any(|v| matches!(v, TreeViolation::NotUnderTop { .. })));
        let m = Tile::new(2, 0, 0, 0);
        let lonely = Tree { top, members: vec![m] };
        assert!(validate_tree(&lonely, &u).iter().any(|v| matches!(v, TreeViolation::BrotherMissing { .. })));
    }

    #[test]
    fn units_merge_brothers() {
        let p = Tile::new(2, 1, 0, 0);
        let units = brother_units(&[p, p.upper_brother(), p.shift_rows(5)]);
        assert_eq!(units.len(), 2);
        assert_eq!(units.iter().map(|u| u.tiles.len()).max(), Some(2));
        let big = Unit { tiles: vec![Tile::new(0, 0, 0, 0)] };
        assert!(units[0].below(&big) || units[1].below(&big));
    }

    #[test]
    fn pipeline_postconditions_on_random_fields() {
        let u = Universe::new(&[0, 2, 4], RealInterval::new(-16.0, 16.0));
        for seed in 0..3 {
            let f = LineField::piecewise_random(64, 8, RealInterval::new(-16.0, 16.0), seed);
            let r = decompose(&u, &f, params());
            assert_eq!(r.conservation.missing, 0, "seed {seed}");
            assert_eq!(r.conservation.duplicates, 0, "seed {seed}");
            assert!(r.validation.passed(), "seed {seed}: {:?}", r.validation);
            for s in &r.strata {
                assert!(s.sum_e_maximal <= 1.0 + 1e-12);
            }
        }
    }
}
