//! Tiles `P = [α, ω, I]`, their parallelograms and the order relations.
//!
//! A line `l` belongs to a (possibly dilated) tile when `l(left(I)) ∈ aα` and
//! `l(right(I)) ∈ aω`. Every relation between two tiles is decided in the
//! coordinates `(l(x0), l(x1))` of the lines at the two endpoints of the
//! smaller time interval, where the lines of a tile form a parallelogram and
//! the edge constraints of the other tile form an axis-aligned box.

use crate::dyadic::{pow2, DyadicInterval, RealInterval};
use serde::{Deserialize, Serialize};
use std::hash::{Hash, Hasher};

/// The line `l(x) = c + 2 b x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub c: f64,
    pub b: f64,
}

impl Line {
    pub fn new(c: f64, b: f64) -> Self {
        Self { c, b }
    }

    /// Line through `(x0, y0)` and `(x1, y1)`, `x0 != x1`.
    pub fn through(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let slope = (y1 - y0) / (x1 - x0);
        Self { c: y0 - slope * x0, b: 0.5 * slope }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c + 2.0 * self.b * x
    }

    pub fn slope(&self) -> f64 {
        2.0 * self.b
    }
}

/// Tile with dilation factor `a` acting on the frequency edges only.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tile {
    pub alpha: DyadicInterval,
    pub omega: DyadicInterval,
    pub time: DyadicInterval,
    #[serde(rename = "a")]
    pub dilation: f64,
}

/// Identity of an undilated tile: `(scale, time index, α index, ω index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileKey {
    pub scale: i32,
    pub t: i64,
    pub a: i64,
    pub w: i64,
}

impl PartialEq for Tile {
    fn eq(&self, o: &Self) -> bool {
        self.alpha == o.alpha
            && self.omega == o.omega
            && self.time == o.time
            && self.dilation.to_bits() == o.dilation.to_bits()
    }
}

impl Eq for Tile {}

impl Hash for Tile {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.alpha.hash(h);
        self.omega.hash(h);
        self.time.hash(h);
        self.dilation.to_bits().hash(h);
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TileError {
    #[error("slope {slope} is not an integer")]
    NonIntegerSlope { slope: f64 },
    #[error("slope {slope} is not a multiple of 4^{scale}; no grid tile at scale {scale} has it")]
    OffGridSlope { slope: i64, scale: i32 },
    #[error("a top needs 1 to 4 tiles, got {0}")]
    TopSize(usize),
    #[error("top members must share their time interval")]
    TopTime,
    #[error("top members {0} and {1} violate 4P ≤ 4P'")]
    TopOrder(usize, usize),
}

/// Closed edge constraints of a tile: lines `l` with `l(l) ∈ [a_lo, a_hi]`
/// and `l(r) ∈ [w_lo, w_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeBox {
    pub l: f64,
    pub r: f64,
    pub a_lo: f64,
    pub a_hi: f64,
    pub w_lo: f64,
    pub w_hi: f64,
}

impl EdgeBox {
    /// Coefficients `(p, q)` with `line(x) = p·u + q·v` for the line through
    /// `(l, u)` and `(r, v)`.
    fn weights(&self, x: f64) -> (f64, f64) {
        let t = (x - self.l) / (self.r - self.l);
        (1.0 - t, t)
    }

    /// `min` over lines of the box of `d0·line(x0) + d1·line(x1)`.
    fn min_pairing(&self, x0: f64, x1: f64, d0: f64, d1: f64) -> f64 {
        let (p0, q0) = self.weights(x0);
        let (p1, q1) = self.weights(x1);
        let cu = d0 * p0 + d1 * p1;
        let cv = d0 * q0 + d1 * q1;
        let mu = if cu >= 0.0 { cu * self.a_lo } else { cu * self.a_hi };
        let mv = if cv >= 0.0 { cv * self.w_lo } else { cv * self.w_hi };
        mu + mv
    }

    /// `max` over the target box of `d0·u + d1·v`.
    fn max_corner(&self, d0: f64, d1: f64) -> f64 {
        let mu = if d0 >= 0.0 { d0 * self.a_hi } else { d0 * self.a_lo };
        let mv = if d1 >= 0.0 { d1 * self.w_hi } else { d1 * self.w_lo };
        mu + mv
    }

    /// Largest separation between the lines of `self` evaluated at the
    /// endpoints of `dst`'s time interval and the box of `dst`, over the
    /// separating-axis candidates. With `normalize` the directions have unit
    /// ℓ¹ norm and a positive result is the ℓ∞ distance between the two sets;
    /// otherwise only the sign is meaningful (and it is exact on dyadic data).
    pub fn separation(&self, dst: &EdgeBox, normalize: bool) -> f64 {
        let (x0, x1) = (dst.l, dst.r);
        let (p0, q0) = self.weights(x0);
        let (p1, q1) = self.weights(x1);
        let dirs = [(1.0, 0.0), (0.0, 1.0), (p1, -p0), (q1, -q0)];
        let mut best = f64::NEG_INFINITY;
        for &(d0, d1) in &dirs {
            for s in [1.0, -1.0] {
                let (mut e0, mut e1) = (s * d0, s * d1);
                let n: f64 = e0.abs() + e1.abs();
                if n == 0.0 {
                    continue;
                }
                if normalize {
                    e0 /= n;
                    e1 /= n;
                }
                let gap = self.min_pairing(x0, x1, e0, e1) - dst.max_corner(e0, e1);
                if gap > best {
                    best = gap;
                }
            }
        }
        best
    }

    /// Values `(line(x0), line(x1))` of the four corner lines.
    pub fn corner_values(&self, x0: f64, x1: f64) -> [(f64, f64); 4] {
        let (p0, q0) = self.weights(x0);
        let (p1, q1) = self.weights(x1);
        let mut out = [(0.0, 0.0); 4];
        for (i, (u, v)) in [
            (self.a_lo, self.w_lo),
            (self.a_lo, self.w_hi),
            (self.a_hi, self.w_lo),
            (self.a_hi, self.w_hi),
        ]
        .into_iter()
        .enumerate()
        {
            out[i] = (p0 * u + q0 * v, p1 * u + q1 * v);
        }
        out
    }

    pub fn contains_values(&self, u: f64, v: f64) -> bool {
        u >= self.a_lo && u <= self.a_hi && v >= self.w_lo && v <= self.w_hi
    }

    pub fn central_line(&self) -> Line {
        Line::through(self.l, 0.5 * (self.a_lo + self.a_hi), self.r, 0.5 * (self.w_lo + self.w_hi))
    }

    pub fn edge_width(&self) -> f64 {
        self.w_hi - self.w_lo
    }
}

impl Tile {
    /// Undilated tile at time scale `k`: `I = [t 2^-k, (t+1) 2^-k)`,
    /// `α = [a 2^k, (a+1) 2^k)`, `ω = [w 2^k, (w+1) 2^k)`.
    pub fn new(k: i32, t: i64, a: i64, w: i64) -> Self {
        Self {
            alpha: DyadicInterval::freq(-k, a),
            omega: DyadicInterval::freq(-k, w),
            time: DyadicInterval::time(k, t),
            dilation: 1.0,
        }
    }

    pub fn from_key(k: TileKey) -> Self {
        Self::new(k.scale, k.t, k.a, k.w)
    }

    pub fn key(&self) -> TileKey {
        TileKey { scale: self.time.scale, t: self.time.index, a: self.alpha.index, w: self.omega.index }
    }

    pub fn scale(&self) -> i32 {
        self.time.scale
    }

    /// `aP`; dilations compose multiplicatively.
    pub fn dilate(&self, a: f64) -> Tile {
        assert!(a > 0.0);
        Tile { dilation: self.dilation * a, ..*self }
    }

    pub fn undilated(&self) -> Tile {
        Tile { dilation: 1.0, ..*self }
    }

    pub fn alpha_edge(&self) -> RealInterval {
        self.alpha.dilate(self.dilation)
    }

    pub fn omega_edge(&self) -> RealInterval {
        self.omega.dilate(self.dilation)
    }

    /// `|aω|`.
    pub fn freq_width(&self) -> f64 {
        self.dilation * self.omega.length()
    }

    pub fn edge_box(&self) -> EdgeBox {
        let a = self.alpha_edge();
        let w = self.omega_edge();
        EdgeBox {
            l: self.time.left(),
            r: self.time.right(),
            a_lo: a.left,
            a_hi: a.right,
            w_lo: w.left,
            w_hi: w.right,
        }
    }

    /// Integer slope index `j`: `tan β = j·4^k`.
    pub fn slope_index(&self) -> i64 {
        self.omega.index - self.alpha.index
    }

    pub fn tan_beta(&self) -> f64 {
        (self.omega.center() - self.alpha.center()) / self.time.length()
    }

    pub fn central_line(&self) -> Line {
        Line::through(self.time.left(), self.alpha.center(), self.time.right(), self.omega.center())
    }

    /// Closed-edge membership of a line.
    pub fn contains_line(&self, l: &Line) -> bool {
        let a = self.alpha_edge();
        let w = self.omega_edge();
        a.contains_closed(l.eval(self.time.left())) && w.contains_closed(l.eval(self.time.right()))
    }

    /// Half-open membership (the convention that makes `E(P)` a partition).
    pub fn contains_line_half_open(&self, l: &Line) -> bool {
        self.alpha_edge().contains(l.eval(self.time.left()))
            && self.omega_edge().contains(l.eval(self.time.right()))
    }

    /// `(P_u, P_l)`.
    pub fn brothers(&self) -> (Tile, Tile) {
        (self.upper_brother(), self.lower_brother())
    }

    pub fn upper_brother(&self) -> Tile {
        Tile { alpha: self.alpha.right_brother(), omega: self.omega.right_brother(), ..*self }
    }

    pub fn lower_brother(&self) -> Tile {
        Tile { alpha: self.alpha.left_brother(), omega: self.omega.left_brother(), ..*self }
    }

    /// Translate by `m` frequency rows.
    pub fn shift_rows(&self, m: i64) -> Tile {
        Tile { alpha: self.alpha.shifted(m), omega: self.omega.shifted(m), ..*self }
    }

    pub fn area(&self) -> f64 {
        self.time.length() * self.freq_width()
    }

    /// Parallelogram corners, counter-clockwise from the lower left.
    pub fn vertices(&self) -> [(f64, f64); 4] {
        let a = self.alpha_edge();
        let w = self.omega_edge();
        let (l, r) = (self.time.left(), self.time.right());
        [(l, a.left), (r, w.left), (r, w.right), (l, a.right)]
    }
}

/// `P1 ≤ P2`: `I1 ⊆ I2` and some line lies in both tiles. Lines on the common
/// boundary of two touching tiles do not count (interiors must meet).
pub fn leq(p1: &Tile, p2: &Tile) -> bool {
    p1.time.is_subset_of(&p2.time) && p2.edge_box().separation(&p1.edge_box(), false) < 0.0
}

/// `P1 ⊴ P2`: `I1 ⊆ I2` and every line of `P2` lies in `P1`.
pub fn trianglelefteq(p1: &Tile, p2: &Tile) -> bool {
    if !p1.time.is_subset_of(&p2.time) {
        return false;
    }
    let dst = p1.edge_box();
    p2.edge_box()
        .corner_values(dst.l, dst.r)
        .iter()
        .all(|&(u, v)| dst.contains_values(u, v))
}

/// `P1 ≨ P2`: `P1 ≤ P2` and `|I1| < |I2|`.
pub fn lneq(p1: &Tile, p2: &Tile) -> bool {
    p1.time.scale > p2.time.scale && leq(p1, p2)
}

/// Closed parallelograms over nested time intervals share a line.
pub fn closures_meet(p1: &Tile, p2: &Tile) -> bool {
    let (small, big) = if p1.time.length() <= p2.time.length() { (p1, p2) } else { (p2, p1) };
    big.edge_box().separation(&small.edge_box(), false) <= 0.0
}

/// Set of 1 to 4 tiles with a common time interval, pairwise `4P^j ≤ 4P^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Top {
    pub tiles: Vec<Tile>,
    pub representative: usize,
}

impl Top {
    /// Validated top; the representative is the member whose central line
    /// has the smallest value at the centre of `I`.
    pub fn new(tiles: Vec<Tile>) -> Result<Self, TileError> {
        let t = Self::new_unchecked(tiles);
        t.validate()?;
        Ok(t)
    }

    pub fn new_unchecked(tiles: Vec<Tile>) -> Self {
        let representative = tiles
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let ca = a.central_line().eval(a.time.center());
                let cb = b.central_line().eval(b.time.center());
                ca.partial_cmp(&cb).unwrap().then_with(|| a.key().cmp(&b.key()))
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        Self { tiles, representative }
    }

    pub fn single(p: Tile) -> Self {
        Self { tiles: vec![p], representative: 0 }
    }

    pub fn validate(&self) -> Result<(), TileError> {
        let n = self.tiles.len();
        if n == 0 || n > 4 {
            return Err(TileError::TopSize(n));
        }
        let i0 = self.tiles[0].time;
        if self.tiles.iter().any(|p| p.time != i0) {
            return Err(TileError::TopTime);
        }
        for j in 0..n {
            for k in 0..n {
                if !leq(&self.tiles[j].dilate(4.0), &self.tiles[k].dilate(4.0)) {
                    return Err(TileError::TopOrder(j, k));
                }
            }
        }
        Ok(())
    }

    pub fn rep(&self) -> &Tile {
        &self.tiles[self.representative]
    }

    pub fn time(&self) -> DyadicInterval {
        self.tiles[0].time
    }
}

/// `P ≤ P̃`: `P ≤ P^j` for some member.
pub fn top_leq(p: &Tile, top: &Top) -> bool {
    top.tiles.iter().any(|q| leq(p, q))
}

/// `𝒫(k, β)` restricted to tiles whose left edge `α` meets `window`.
/// Grid tiles at scale `k` have `tan β ∈ 4^k ℤ`; other integer slopes are rejected.
pub fn tile_partition(
    k: i32,
    tan_beta: f64,
    window: RealInterval,
) -> Result<impl Iterator<Item = Tile>, TileError> {
    if tan_beta.fract() != 0.0 || !tan_beta.is_finite() {
        return Err(TileError::NonIntegerSlope { slope: tan_beta });
    }
    let slope = tan_beta as i64;
    let unit = 1i64 << (2 * k);
    if slope % unit != 0 {
        return Err(TileError::OffGridSlope { slope, scale: k });
    }
    let j = slope / unit;
    let (lo, hi) = freq_index_range(k, window);
    Ok((0..(1i64 << k)).flat_map(move |t| (lo..hi).map(move |a| Tile::new(k, t, a, a + j))))
}

/// Indices of the scale-`(-k)` frequency intervals meeting `window`.
pub fn freq_index_range(k: i32, window: RealInterval) -> (i64, i64) {
    let len = pow2(k);
    let lo = (window.left / len).floor() as i64;
    let hi = (window.right / len).ceil() as i64;
    (lo, hi.max(lo))
}

/// Every tile at the given scales whose two edges meet `window` (all slopes).
pub fn window_tiles(scales: &[i32], window: RealInterval) -> Vec<Tile> {
    let mut out = Vec::new();
    for &k in scales {
        let (lo, hi) = freq_index_range(k, window);
        for t in 0..(1i64 << k) {
            for a in lo..hi {
                for w in lo..hi {
                    out.push(Tile::new(k, t, a, w));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> Tile {
        Tile::new(0, 0, 0, 0)
    }

    #[test]
    fn central_lines() {
        let l = unit().central_line();
        assert_eq!((l.c, l.b), (0.5, 0.0));
        let p = Tile::new(0, 0, 0, 1);
        assert_eq!(p.central_line().slope(), 1.0);
        assert_eq!(p.tan_beta().atan(), std::f64::consts::FRAC_PI_4);
        assert_eq!(p.dilate(2.0).central_line(), p.central_line());
    }

    #[test]
    fn line_membership() {
        let p = unit();
        assert!(p.contains_line(&Line::new(0.5, 0.0)));
        assert!(!p.contains_line(&Line::new(2.0, 0.0)));
        assert!(p.contains_line(&Line::new(0.0, 0.5)));
        assert!(!p.contains_line_half_open(&Line::new(0.0, 0.5)));
    }

    #[test]
    fn brother_tiles() {
        let (u, l) = unit().brothers();
        assert_eq!(u.alpha, DyadicInterval::freq(0, 1));
        assert_eq!(u.omega, DyadicInterval::freq(0, 1));
        assert_eq!(l.alpha.index, -1);
        assert_eq!(unit().upper_brother().lower_brother(), unit());
        assert_eq!(u.shift_rows(1), unit().shift_rows(1).upper_brother());
    }

    #[test]
    fn partitions() {
        let w = RealInterval::new(0.0, 3.0);
        let v: Vec<_> = tile_partition(0, 0.0, w).unwrap().collect();
        assert_eq!(v.len(), 3);
        assert_eq!(v[2].alpha, DyadicInterval::freq(0, 2));
        let v: Vec<_> = tile_partition(1, 0.0, RealInterval::new(0.0, 1.0)).unwrap().collect();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|p| p.omega.length() == 2.0));
        assert!(tile_partition(1, 0.5, w).is_err());
        assert!(tile_partition(1, 2.0, w).is_err());
        assert_eq!(tile_partition(1, 8.0, w).unwrap().next().unwrap().slope_index(), 2);
    }

    #[test]
    fn partition_tiles_are_disjoint() {
        let w = RealInterval::new(-4.0, 4.0);
        for (k, s) in [(0, 0.0), (0, 3.0), (1, 4.0), (2, -16.0)] {
            let v: Vec<_> = tile_partition(k, s, w).unwrap().collect();
            for (i, p) in v.iter().enumerate() {
                for q in &v[i + 1..] {
                    assert!(!leq(p, q) && !leq(q, p), "{p:?} {q:?}");
                }
            }
        }
    }

    #[test]
    fn order_examples() {
        let p = unit();
        assert!(leq(&p, &p));
        assert!(!leq(&p, &p.shift_rows(3)));
        assert!(!leq(&p, &p.shift_rows(1)));
        assert!(trianglelefteq(&p, &p));
        assert!(!lneq(&p, &p));
        let child = Tile::new(1, 0, 0, 0);
        assert!(lneq(&child, &p));
        assert!(!leq(&p, &child));
    }

    #[test]
    fn area_is_dilation() {
        for a in [1.0, 1.5, 2.0, 4.0] {
            assert_eq!(Tile::new(3, 2, -1, 4).dilate(a).area(), a);
        }
    }

    #[test]
    fn tops() {
        let p = Tile::new(2, 1, 0, 0);
        let top = Top::new(vec![p, p.upper_brother()]).unwrap();
        assert_eq!(top.rep(), &p);
        assert!(top_leq(&p, &top));
        assert!(!top_leq(&Tile::new(2, 2, 0, 0), &top));
        assert!(Top::new(vec![p, p.shift_rows(9)]).is_err());
        assert!(Top::new(vec![p, Tile::new(2, 0, 0, 0)]).is_err());
        let single = Top::single(p);
        let q = Tile::new(3, 2, 0, 0);
        assert_eq!(top_leq(&q, &single), leq(&q, &p));
    }

    #[test]
    fn json_shape() {
        let s = serde_json::to_value(Tile::new(1, 1, 0, 2)).unwrap();
        assert_eq!(s["a"], 1.0);
        assert_eq!(s["time"]["axis"], "time");
        assert_eq!(s["omega"]["index"], 2);
    }

    /// Tiles on scales `{0, 2, 4}` near a common corridor, so that comparable
    /// pairs are frequent.
    fn sparse_tile() -> impl Strategy<Value = Tile> {
        (0..3i32, 0..64i64, -3..3i64, -3..3i64).prop_map(|(s, t, da, dw)| {
            let k = 2 * s;
            let t = t % (1 << k);
            Tile::new(k, t, da, dw)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn leq_implies_doubled_trianglelefteq(p in sparse_tile(), q in sparse_tile()) {
            if leq(&p, &q) {
                prop_assert!(trianglelefteq(&p.dilate(2.0), &q.dilate(2.0)));
            }
        }

        #[test]
        fn trianglelefteq_transitive(p in sparse_tile(), q in sparse_tile(), r in sparse_tile()) {
            if trianglelefteq(&p, &q) && trianglelefteq(&q, &r) {
                prop_assert!(trianglelefteq(&p, &r));
            }
        }

        #[test]
        fn central_line_belongs(p in sparse_tile(), a in 1.0f64..4.0) {
            prop_assert!(p.dilate(a).contains_line(&p.central_line()));
        }

        #[test]
        fn leq_reflexive(p in sparse_tile()) {
            prop_assert!(leq(&p, &p));
            prop_assert!(trianglelefteq(&p, &p));
        }
    }
}
