//! The odd kernel `ψ`, its dyadic rescalings `ψ_k(y) = 2^k ψ(2^k y)`, the
//! 13-piece split of `ψ` and the sparse average `R = Σ_{k∈10ℕ} ψ_k`.
//!
//! `ψ(y) = χ(y)/y` where `χ(y) = θ(log₂|y|) − θ(log₂|y| − 1)` and `θ` is a
//! smooth step from 0 (at 1) to 1 (at 2) built on `exp(−1/t)`. The sum over
//! scales telescopes in `θ`, which is what makes `Σ_{k≥0} ψ_k(y) = 1/y`
//! exact on `0 < |y| < 1`.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Number of pieces in [`split_13`].
pub const PIECES: usize = 13;
/// Piece supported in `4 < |y| < 5`.
pub const NARROW_PIECE: u8 = 6;

fn bump_tail(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = bump_tail(t);
    a / (a + bump_tail(1.0 - t))
}

fn theta(s: f64) -> f64 {
    smooth_step(s - 1.0)
}

/// Partition-of-unity bump on `2 < |y| < 8`: `Σ_{k∈ℤ} χ(2^k y) = 1`.
pub fn chi(y: f64) -> f64 {
    let a = y.abs();
    if a <= 2.0 || a >= 8.0 {
        return 0.0;
    }
    let s = a.log2();
    theta(s) - theta(s - 1.0)
}

/// Weight of piece `j ∈ 1..=13` at `|y|`; supported in `1+j/2 < |y| < 2+j/2`.
fn piece_weight(j: u8, a: f64) -> f64 {
    let lo = 1.0 + 0.5 * j as f64;
    let step = |t: f64| smooth_step(2.0 * t);
    step(a - lo) - step(a - lo - 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    /// `ψ` itself.
    Full,
    /// `ψ^j`, `1 ≤ j ≤ 13`.
    Piece(u8),
}

/// `ψ` or one of its pieces, rescaled to scale `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelPiece {
    pub profile: Profile,
    pub scale: i32,
}

impl KernelPiece {
    pub fn eval(&self, y: f64) -> f64 {
        let s = f64::powi(2.0, self.scale);
        s * profile_eval(self.profile, s * y)
    }

    /// Open support `lo < |y| < hi`.
    pub fn support(&self) -> (f64, f64) {
        let (lo, hi) = profile_support(self.profile);
        let s = f64::powi(2.0, -self.scale);
        (lo * s, hi * s)
    }

    pub fn is_narrow(&self) -> bool {
        self.profile == Profile::Piece(NARROW_PIECE)
    }
}

fn profile_eval(p: Profile, y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    match p {
        Profile::Full => chi(y) / y,
        Profile::Piece(j) => {
            let a = y.abs();
            let (lo, hi) = profile_support(p);
            if a <= lo || a >= hi {
                0.0
            } else {
                piece_weight(j, a) * chi(y) / y
            }
        }
    }
}

fn profile_support(p: Profile) -> (f64, f64) {
    match p {
        Profile::Full => (2.0, 8.0),
        Profile::Piece(j) => {
            let lo = (1.0 + 0.5 * j as f64).max(2.0);
            let hi = (2.0 + 0.5 * j as f64).min(8.0);
            (lo, hi)
        }
    }
}

pub fn build_psi() -> KernelPiece {
    KernelPiece { profile: Profile::Full, scale: 0 }
}

/// The 13 pieces `ψ^1, …, ψ^13` of `psi`, summing to it pointwise.
pub fn split_13(psi: &KernelPiece) -> Vec<KernelPiece> {
    assert_eq!(psi.profile, Profile::Full, "split applies to the full kernel");
    (1..=PIECES as u8).map(|j| KernelPiece { profile: Profile::Piece(j), scale: psi.scale }).collect()
}

/// The narrow piece used by the tile operators.
pub fn narrow(scale: i32) -> KernelPiece {
    KernelPiece { profile: Profile::Piece(NARROW_PIECE), scale }
}

pub fn psi_k(psi: &KernelPiece, k: i32) -> KernelPiece {
    assert!(k >= 0, "scale must be non-negative");
    KernelPiece { profile: psi.profile, scale: psi.scale + k }
}

/// `Σ_{k=0}^{k_max} ψ_k(y)`.
pub fn telescoped(psi: &KernelPiece, k_max: i32, y: f64) -> f64 {
    (0..=k_max).map(|k| psi_k(psi, k).eval(y)).sum()
}

/// `R(y) = Σ_{k∈10ℕ, k≤k_max} ψ_k(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedKernel {
    pub profile: Profile,
    pub k_max: i32,
}

impl AveragedKernel {
    pub fn eval(&self, y: f64) -> f64 {
        let base = KernelPiece { profile: self.profile, scale: 0 };
        (0..=self.k_max).step_by(10).map(|k| psi_k(&base, k).eval(y)).sum()
    }

    pub fn scales(&self) -> Vec<i32> {
        (0..=self.k_max).step_by(10).collect()
    }
}

pub fn build_r(psi: &KernelPiece, k_max: i32) -> AveragedKernel {
    AveragedKernel { profile: psi.profile, k_max }
}

/// `∫ piece(y) e^{-iξy} dy` by the midpoint rule with `n` nodes per side.
pub fn fourier_abs(piece: &KernelPiece, xi: f64, n: usize) -> f64 {
    let (lo, hi) = piece.support();
    let h = (hi - lo) / n as f64;
    // Odd kernel: the two sides combine to -2i·v·sin(ξy), a purely imaginary transform.
    let im: f64 = (0..n)
        .map(|i| {
            let y = lo + (i as f64 + 0.5) * h;
            2.0 * piece.eval(y) * (xi * y).sin()
        })
        .sum();
    im.abs() * h
}

/// Telescoping error `max |Σ_{k≤k_max} ψ_k(y) − 1/y|` over `points`
/// log-spaced samples of `8·2^{-k_max} < |y| < 1`, both signs.
pub fn telescoping_error(k_max: i32, points: usize) -> f64 {
    let psi = build_psi();
    let lo = (8.0 * f64::powi(2.0, -k_max)).ln();
    let half = points / 2;
    let mut worst: f64 = 0.0;
    for i in 0..half {
        let t = (i as f64 + 0.5) / half as f64;
        let y = (lo * (1.0 - t)).exp();
        for s in [1.0, -1.0] {
            let e = (telescoped(&psi, k_max, s * y) - 1.0 / (s * y)).abs();
            worst = worst.max(e);
        }
    }
    worst
}

/// CSV rows `y, ψ(y), ψ_k(y), R(y)` on a uniform grid of `[lo, hi]`.
pub fn sample_csv(k: i32, k_max: i32, lo: f64, hi: f64, n: usize) -> String {
    let psi = build_psi();
    let pk = psi_k(&psi, k);
    let r = build_r(&psi, k_max);
    let mut s = String::from("y,psi,psi_k,R\n");
    for i in 0..n {
        let y = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
        let _ = writeln!(s, "{y:.10e},{:.12e},{:.12e},{:.12e}", psi.eval(y), pk.eval(y), r.eval(y));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| -9.0 + 18.0 * (i as f64 + 0.37) / n as f64)
    }

    #[test]
    fn psi_is_odd_and_supported() {
        let psi = build_psi();
        for y in samples(1000) {
            assert_eq!(psi.eval(-y), -psi.eval(y));
        }
        assert_eq!(psi.eval(1.0), 0.0);
        assert_eq!(psi.eval(9.0), 0.0);
        assert_eq!(psi.eval(2.0), 0.0);
        assert!(psi.eval(4.0) > 0.0);
    }

    #[test]
    fn partition_of_unity() {
        for y in [0.01, 0.3, 0.77, 3.0, 5.5, 123.0] {
            let s: f64 = (-20..20).map(|k| chi(f64::powi(2.0, k) * y)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn telescoping_point() {
        let psi = build_psi();
        assert!((telescoped(&psi, 20, 0.3) - 1.0 / 0.3).abs() < 1e-9);
    }

    #[test]
    fn telescoping_range() {
        assert!(telescoping_error(10, 10_000) < 1e-8);
    }

    #[test]
    fn pieces_sum_to_psi() {
        let psi = build_psi();
        let pieces = split_13(&psi);
        assert_eq!(pieces.len(), 13);
        for y in samples(1000) {
            let s: f64 = pieces.iter().map(|p| p.eval(y)).sum();
            assert!((s - psi.eval(y)).abs() < 1e-10);
            for p in &pieces {
                assert_eq!(p.eval(-y), -p.eval(y));
            }
        }
        let n = narrow(0);
        assert!(n.eval(4.5) != 0.0);
        assert_eq!(n.eval(3.9), 0.0);
        assert_eq!(n.eval(5.0), 0.0);
        for (j, p) in pieces.iter().enumerate() {
            let j = j as f64 + 1.0;
            for y in samples(2000) {
                if p.eval(y) != 0.0 {
                    assert!(y.abs() > 1.0 + j / 2.0 && y.abs() < 2.0 + j / 2.0);
                }
            }
        }
    }

    #[test]
    fn mean_zero() {
        for p in split_13(&build_psi()) {
            let n = 20_000;
            let h = 18.0 / n as f64;
            let s: f64 = (0..n).map(|i| p.eval(-9.0 + (i as f64 + 0.5) * h)).sum::<f64>() * h;
            assert!(s.abs() < 1e-10);
        }
    }

    #[test]
    fn rescaling() {
        let psi = build_psi();
        assert_eq!(psi_k(&psi, 0), psi);
        let l1 = |p: &KernelPiece| {
            let (lo, hi) = p.support();
            let n = 40_000;
            let h = (hi - lo) / n as f64;
            2.0 * (0..n).map(|i| p.eval(lo + (i as f64 + 0.5) * h).abs()).sum::<f64>() * h
        };
        let base = l1(&psi);
        for k in 1..6 {
            assert!((l1(&psi_k(&psi, k)) - base).abs() < 1e-9);
        }
        let (lo, hi) = psi_k(&narrow(0), 3).support();
        assert_eq!((lo, hi), (0.5, 0.625));
    }

    #[test]
    fn averaged_kernel() {
        let psi = build_psi();
        let r = build_r(&psi, 20);
        assert_eq!(r.scales(), vec![0, 10, 20]);
        for y in samples(500) {
            assert_eq!(r.eval(-y), -r.eval(y));
            if y.abs() > 2.0 && y.abs() < 8.0 {
                assert_eq!(r.eval(y), psi.eval(y));
            }
        }
    }

    #[test]
    fn fourier_decay() {
        let psi = build_psi();
        let xs: Vec<f64> = (0..12).map(|i| 10.0 * f64::powf(2.0, i as f64 * 0.5)).collect();
        let env: Vec<f64> = xs
            .iter()
            .map(|&x| (0..16).map(|j| fourier_abs(&psi, x * (1.0 + j as f64 / 64.0), 4000)).fold(0.0, f64::max))
            .collect();
        let fit = crate::report::fit_loglog(&xs, &env).unwrap();
        assert!(fit.slope < -4.0, "slope {}", fit.slope);
    }
}
