//! Sampled functions on the torus and the discretized operators: the
//! truncated Hilbert transform, the direct quadratic Carleson maximal
//! function, the tile operators `T_P`, `T_P*`, `T_k`, dense assembly,
//! operator norms and the maximal functions `M`, `M_δ`, `f*_r`.
//!
//! Samples sit at the cell centres `x_j = (j + 1/2)h`, `h = 1/n`, and all
//! convolutions are periodic: `f(x_j − m h) = f[(j − m) mod n]`. With
//! kernel weights `w_m = h·ψ⁶_k(m h)` the tile operator reads
//!
//! `T_P f(x_j) = χ_{E(P)}(x_j) Σ_m w_m e^{i(L_j y_m − b_j y_m²)} f[j − m]`,
//!
//! where `y_m = m h`, `L_j = l_{x_j}(x_j) = c_j + 2 b_j x_j`.

use crate::dyadic::DyadicInterval;
use crate::kernel::{build_psi, narrow, psi_k, KernelPiece};
use crate::linefield::LineField;
use crate::tile::Tile;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Complex samples on the uniform grid of `[0,1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> Complex64) -> Self {
        Self { values: (0..n).map(|j| f((j as f64 + 0.5) / n as f64)).collect() }
    }

    pub fn from_real(v: Vec<f64>) -> Self {
        Self { values: v.into_iter().map(|x| Complex64::new(x, 0.0)).collect() }
    }

    /// Independent standard complex Gaussians.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut g = || -> f64 { rng.sample(StandardNormal) };
        Self { values: (0..n).map(|_| Complex64::new(g(), g())).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn h(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h()
    }

    /// `⟨f, g⟩ = h Σ f conj(g)`.
    pub fn inner(&self, g: &SampledFunction) -> Complex64 {
        assert_eq!(self.len(), g.len());
        self.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum::<Complex64>() * self.h()
    }

    pub fn norm2(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.h()).sqrt()
    }

    /// `(h Σ |f|^r)^{1/r}`.
    pub fn norm_r(&self, r: f64) -> f64 {
        (self.values.iter().map(|v| v.norm().powf(r)).sum::<f64>() * self.h()).powf(1.0 / r)
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, o: &SampledFunction) {
        for (a, b) in self.values.iter_mut().zip(&o.values) {
            *a += b;
        }
    }

    /// Multiplies by `χ` of a set of samples.
    pub fn restrict(&self, keep: &[bool]) -> SampledFunction {
        let values = self
            .values
            .iter()
            .zip(keep)
            .map(|(v, &k)| if k { *v } else { Complex64::new(0.0, 0.0) })
            .collect();
        SampledFunction { values }
    }

    /// CSV rows `index,re,im`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,re,im\n");
        for (j, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{j},{:.17e},{:.17e}", v.re, v.im);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("tile scale {scale} exceeds k_max = {k_max}")]
    Scale { scale: i32, k_max: i32 },
    #[error("sample count {n} must be a power of two and a multiple of the field resolution {resolution}")]
    Grid { n: usize, resolution: usize },
    #[error("function has {got} samples, operator expects {want}")]
    Length { got: usize, want: usize },
    #[error("intervals {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("power iteration stalled: residual {residual:.3e} after {iterations} steps")]
    NoConvergence { residual: f64, iterations: usize },
}

/// Nonzero weights `(m, w_m = h·κ(m h))` of a kernel on the sample grid.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub m: Vec<i64>,
    pub w: Vec<f64>,
}

impl KernelTable {
    pub fn build(piece: &KernelPiece, n: usize) -> Self {
        let (_, hi) = piece.support();
        let h = 1.0 / n as f64;
        let reach = (hi * n as f64).ceil() as i64;
        let mut m = Vec::new();
        let mut w = Vec::new();
        for i in -reach..=reach {
            let v = piece.eval(i as f64 * h);
            if v != 0.0 {
                m.push(i);
                w.push(h * v);
            }
        }
        Self { m, w }
    }

    /// Sum of several tables with the same `n`.
    fn merged(tables: &[KernelTable]) -> (Vec<i64>, Vec<f64>) {
        let mut acc = std::collections::BTreeMap::new();
        for t in tables {
            for (&m, &w) in t.m.iter().zip(&t.w) {
                *acc.entry(m).or_insert(0.0) += w;
            }
        }
        acc.into_iter().unzip()
    }
}

/// Kernel folded onto the torus: `K[r] = Σ_{m ≡ r} w_m e^{i(a y_m + b y_m²)}`.
pub fn fold_kernel(m: &[i64], w: &[f64], n: usize, a: f64, b: f64) -> Vec<Complex64> {
    let h = 1.0 / n as f64;
    let mut k = vec![Complex64::new(0.0, 0.0); n];
    for (&mi, &wi) in m.iter().zip(w) {
        let y = mi as f64 * h;
        k[mi.rem_euclid(n as i64) as usize] += Complex64::from_polar(wi, a * y + b * y * y);
    }
    k
}

/// Periodic convolution `(K * f)[j] = Σ_r K[r] f[j − r]`, by FFT.
pub fn circular_convolve(k: &[Complex64], f: &[Complex64]) -> Vec<Complex64> {
    let mut c = Convolver::new(f);
    c.apply(k)
}

/// The same convolution summed directly.
pub fn circular_convolve_direct(k: &[Complex64], f: &[Complex64]) -> Vec<Complex64> {
    let n = f.len();
    let support: Vec<(usize, Complex64)> =
        k.iter().enumerate().filter(|(_, v)| v.norm_sqr() != 0.0).map(|(r, v)| (r, *v)).collect();
    (0..n)
        .into_par_iter()
        .map(|j| {
            let mut s = Complex64::new(0.0, 0.0);
            for &(r, kv) in &support {
                s += kv * f[(j + n - r) % n];
            }
            s
        })
        .collect()
}

/// Convolution against a fixed `f` with its spectrum cached.
struct Convolver {
    spectrum: Vec<Complex64>,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Convolver {
    fn new(f: &[Complex64]) -> Self {
        let mut planner = rustfft::FftPlanner::new();
        let forward = planner.plan_fft_forward(f.len());
        let inverse = planner.plan_fft_inverse(f.len());
        let mut spectrum = f.to_vec();
        forward.process(&mut spectrum);
        Self { spectrum, forward, inverse }
    }

    fn apply(&mut self, k: &[Complex64]) -> Vec<Complex64> {
        let n = k.len();
        let mut buf = k.to_vec();
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }
}

/// Weights of `Σ_{k≤k_max} ψ_k` (the truncated `1/y`) on an `n`-point grid.
pub fn truncated_hilbert_table(n: usize, k_max: i32) -> (Vec<i64>, Vec<f64>) {
    let psi = build_psi();
    let tables: Vec<KernelTable> = (0..=k_max).map(|k| KernelTable::build(&psi_k(&psi, k), n)).collect();
    KernelTable::merged(&tables)
}

/// `Hf = Σ_{k≤k_max} ∫ ψ_k(y) f(x − y) dy`.
pub fn hilbert(f: &SampledFunction, k_max: i32) -> SampledFunction {
    let n = f.len();
    let (m, w) = truncated_hilbert_table(n, k_max);
    SampledFunction { values: circular_convolve(&fold_kernel(&m, &w, n, 0.0, 0.0), &f.values) }
}

/// `max_{(a,b) ∈ grid} |∫ e^{i(ay + by²)} Σ_{k≤k_max} ψ_k(y) f(x − y) dy|`.
pub fn quad_carleson_direct(f: &SampledFunction, a_grid: &[f64], b_grid: &[f64], k_max: i32) -> Vec<f64> {
    let n = f.len();
    let (m, w) = truncated_hilbert_table(n, k_max);
    let mut conv = Convolver::new(&f.values);
    let mut best = vec![0.0f64; n];
    for &a in a_grid {
        for &b in b_grid {
            let g = conv.apply(&fold_kernel(&m, &w, n, a, b));
            for (o, v) in best.iter_mut().zip(&g) {
                *o = o.max(v.norm());
            }
        }
    }
    best
}

/// Dense matrix of a linear operator on `n` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<Complex64>,
}

impl OperatorMatrix {
    pub fn apply(&self, f: &SampledFunction) -> SampledFunction {
        let v = nalgebra::DVector::from_column_slice(&f.values);
        SampledFunction { values: (&self.matrix * v).iter().copied().collect() }
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix { matrix: self.matrix.adjoint() }
    }

    /// Largest singular value. The matrix acts on samples and the `L²` norm
    /// carries the same weight `h` on both sides, so no rescaling is needed.
    pub fn norm(&self) -> f64 {
        if self.matrix.iter().all(|v| v.norm_sqr() == 0.0) {
            return 0.0;
        }
        self.matrix.clone().singular_values().max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    MatrixSvd,
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub norm: f64,
    pub iterations: usize,
    /// `‖A*A v − λ v‖` at the final iterate (0 for the SVD).
    pub residual: f64,
}

/// Tile operators of one line field at a fixed sample count.
#[derive(Debug, Clone)]
pub struct TileOperator<'a> {
    field: &'a LineField,
    n: usize,
    k_max: i32,
    tables: Vec<KernelTable>,
}

impl<'a> TileOperator<'a> {
    pub fn new(field: &'a LineField, n: usize, k_max: i32) -> Result<Self, OperatorError> {
        if !n.is_power_of_two() || n % field.resolution() != 0 {
            return Err(OperatorError::Grid { n, resolution: field.resolution() });
        }
        let tables = (0..=k_max).map(|k| KernelTable::build(&narrow(k), n)).collect();
        Ok(Self { field, n, k_max, tables })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    pub fn field(&self) -> &LineField {
        self.field
    }

    fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    fn check_scale(&self, k: i32) -> Result<(), OperatorError> {
        if k < 0 || k > self.k_max {
            return Err(OperatorError::Scale { scale: k, k_max: self.k_max });
        }
        Ok(())
    }

    fn check_len(&self, f: &SampledFunction) -> Result<(), OperatorError> {
        if f.len() != self.n {
            return Err(OperatorError::Length { got: f.len(), want: self.n });
        }
        Ok(())
    }

    fn cell(&self, j: usize) -> usize {
        j / (self.n / self.field.resolution())
    }

    /// `(L_j, b_j)` of the fiber at sample `j`.
    fn phase_coeffs(&self, j: usize) -> (f64, f64) {
        let l = self.field.line(self.cell(j));
        let x = (j as f64 + 0.5) * self.h();
        (l.eval(x), l.b)
    }

    /// Samples of `I`.
    pub fn samples_of(&self, i: &DyadicInterval) -> std::ops::Range<usize> {
        let per = self.n as f64 * i.length();
        let lo = (i.index as f64 * per) as usize;
        lo..lo + per as usize
    }

    /// Samples of `E(P)`.
    pub fn e_samples(&self, p: &Tile) -> Vec<usize> {
        self.samples_of(&p.time)
            .filter(|&j| p.contains_line_half_open(&self.field.line(self.cell(j))))
            .collect()
    }

    fn row(&self, k: i32, j: usize, f: &[Complex64]) -> Complex64 {
        let t = &self.tables[k as usize];
        let (l, b) = self.phase_coeffs(j);
        let h = self.h();
        let n = self.n as i64;
        let mut s = Complex64::new(0.0, 0.0);
        for (&m, &w) in t.m.iter().zip(&t.w) {
            let y = m as f64 * h;
            s += Complex64::from_polar(w, l * y - b * y * y) * f[(j as i64 - m).rem_euclid(n) as usize];
        }
        s
    }

    /// `T_P f`.
    pub fn apply_tile(&self, f: &SampledFunction, p: &Tile) -> Result<SampledFunction, OperatorError> {
        self.check_scale(p.scale())?;
        self.check_len(f)?;
        let mut out = SampledFunction::zeros(self.n);
        for j in self.e_samples(p) {
            out.values[j] = self.row(p.scale(), j, &f.values);
        }
        Ok(out)
    }

    /// `T_P* g(z) = −Σ_m w_m e^{i(L_{j} y_m + b_{j} y_m²)} (χ_{E(P)} g)[j]`,
    /// `j = z − m`.
    pub fn adjoint_tile(&self, g: &SampledFunction, p: &Tile) -> Result<SampledFunction, OperatorError> {
        self.check_scale(p.scale())?;
        self.check_len(g)?;
        let t = &self.tables[p.scale() as usize];
        let h = self.h();
        let n = self.n as i64;
        let mut out = SampledFunction::zeros(self.n);
        for j in self.e_samples(p) {
            let (l, b) = self.phase_coeffs(j);
            let gj = g.values[j];
            for (&m, &w) in t.m.iter().zip(&t.w) {
                let y = m as f64 * h;
                let z = (j as i64 + m).rem_euclid(n) as usize;
                out.values[z] -= Complex64::from_polar(w, l * y + b * y * y) * gj;
            }
        }
        Ok(out)
    }

    /// `T_k f`: the scale-`k` piece without any `E`-restriction.
    pub fn apply_scale(&self, f: &SampledFunction, k: i32) -> Result<SampledFunction, OperatorError> {
        self.check_scale(k)?;
        self.check_len(f)?;
        let values = (0..self.n).into_par_iter().map(|j| self.row(k, j, &f.values)).collect();
        Ok(SampledFunction { values })
    }

    /// `Σ_{P ∈ tiles} T_P f`.
    pub fn apply_tiles(&self, f: &SampledFunction, tiles: &[Tile]) -> Result<SampledFunction, OperatorError> {
        let mut out = SampledFunction::zeros(self.n);
        for p in tiles {
            out.add_assign(&self.apply_tile(f, p)?);
        }
        Ok(out)
    }

    pub fn adjoint_tiles(&self, g: &SampledFunction, tiles: &[Tile]) -> Result<SampledFunction, OperatorError> {
        let mut out = SampledFunction::zeros(self.n);
        for p in tiles {
            out.add_assign(&self.adjoint_tile(g, p)?);
        }
        Ok(out)
    }

    /// The linearized operator `Σ_{k≤k_max} ∫ e^{i(l_x(x)y − b(x)y²)} ψ⁶_k(y) f(x−y) dy`
    /// evaluated point by point from the kernel formula, without tables or tiles.
    pub fn linearized_direct(&self, f: &SampledFunction) -> SampledFunction {
        let h = self.h();
        let n = self.n as i64;
        let values = (0..self.n)
            .into_par_iter()
            .map(|j| {
                let (l, b) = self.phase_coeffs(j);
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..=self.k_max {
                    let piece = narrow(k);
                    let (lo, hi) = piece.support();
                    let m_lo = (lo / h).floor() as i64;
                    let m_hi = (hi / h).ceil() as i64;
                    for mag in m_lo..=m_hi {
                        for m in [mag, -mag] {
                            let y = m as f64 * h;
                            let v = piece.eval(y);
                            if v != 0.0 {
                                let fv = f.values[(j as i64 - m).rem_euclid(n) as usize];
                                s += Complex64::from_polar(h * v, l * y - b * y * y) * fv;
                            }
                        }
                    }
                }
                s
            })
            .collect();
        SampledFunction { values }
    }

    /// Dense matrix of `Σ_{P ∈ tiles} T_P`.
    pub fn matrix(&self, tiles: &[Tile]) -> Result<OperatorMatrix, OperatorError> {
        let n = self.n;
        let mut a = DMatrix::<Complex64>::zeros(n, n);
        let h = self.h();
        for p in tiles {
            self.check_scale(p.scale())?;
            let t = &self.tables[p.scale() as usize];
            for j in self.e_samples(p) {
                let (l, b) = self.phase_coeffs(j);
                for (&m, &w) in t.m.iter().zip(&t.w) {
                    let y = m as f64 * h;
                    let col = (j as i64 - m).rem_euclid(n as i64) as usize;
                    a[(j, col)] += Complex64::from_polar(w, l * y - b * y * y);
                }
            }
        }
        Ok(OperatorMatrix { matrix: a })
    }

    /// The nonzero rows of `Σ_{P ∈ tiles} T_P` (samples of `∪E(P)`), sorted,
    /// with the matching dense row block.
    pub fn row_block(&self, tiles: &[Tile]) -> Result<(Vec<usize>, DMatrix<Complex64>), OperatorError> {
        let mut per_row: std::collections::BTreeMap<usize, Vec<i32>> = std::collections::BTreeMap::new();
        for p in tiles {
            self.check_scale(p.scale())?;
            for j in self.e_samples(p) {
                per_row.entry(j).or_default().push(p.scale());
            }
        }
        let rows: Vec<usize> = per_row.keys().copied().collect();
        let h = self.h();
        let n = self.n as i64;
        let mut b = DMatrix::<Complex64>::zeros(rows.len(), self.n);
        for (r, (&j, scales)) in per_row.iter().enumerate() {
            let (l, bj) = self.phase_coeffs(j);
            for &k in scales {
                let t = &self.tables[k as usize];
                for (&m, &w) in t.m.iter().zip(&t.w) {
                    let y = m as f64 * h;
                    b[(r, (j as i64 - m).rem_euclid(n) as usize)] += Complex64::from_polar(w, l * y - bj * y * y);
                }
            }
        }
        Ok((rows, b))
    }

    /// `‖(Σ_{P ∈ tiles} T_P) χ_cols‖` from the row block: the square root of
    /// the top eigenvalue of the Gram matrix of the nonzero rows. `cols =
    /// None` keeps every column; `keep_rows` restricts the output side.
    pub fn block_norm(
        &self,
        tiles: &[Tile],
        cols: Option<&[bool]>,
        keep_rows: Option<&[bool]>,
    ) -> Result<f64, OperatorError> {
        let (rows, b) = self.row_block(tiles)?;
        let kept: Vec<usize> = match keep_rows {
            Some(k) => (0..rows.len()).filter(|&r| k[rows[r]]).collect(),
            None => (0..rows.len()).collect(),
        };
        let b = b.select_rows(kept.iter());
        let b = match cols {
            Some(c) => b.select_columns((0..self.n).filter(|&j| c[j]).collect::<Vec<_>>().iter()),
            None => b,
        };
        if b.nrows() == 0 || b.ncols() == 0 {
            return Ok(0.0);
        }
        // Gram matrix on the smaller side.
        let gram = if b.nrows() <= b.ncols() { &b * b.adjoint() } else { b.adjoint() * &b };
        let top = gram.symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(*v));
        Ok(top.max(0.0).sqrt())
    }

    /// `‖Σ_{P ∈ tiles} T_P‖_{L²→L²}`.
    pub fn operator_norm(&self, tiles: &[Tile], mode: NormMode) -> Result<NormEstimate, OperatorError> {
        match mode {
            NormMode::MatrixSvd => {
                Ok(NormEstimate { norm: self.matrix(tiles)?.norm(), iterations: 0, residual: 0.0 })
            }
            NormMode::PowerIteration => self.power_iteration(tiles, 1e-13, 20_000),
        }
    }

    /// Power iteration on `A*A` through the evaluators.
    pub fn power_iteration(&self, tiles: &[Tile], tol: f64, max_iter: usize) -> Result<NormEstimate, OperatorError> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9e37);
        let mut v = SampledFunction::random(self.n, &mut rng);
        let nv = v.norm2();
        v.scale(1.0 / nv);
        let mut lambda = 0.0;
        for it in 1..=max_iter {
            let w = self.adjoint_tiles(&self.apply_tiles(&v, tiles)?, tiles)?;
            let nw = w.norm2();
            if nw == 0.0 {
                return Ok(NormEstimate { norm: 0.0, iterations: it, residual: 0.0 });
            }
            let new_lambda = w.inner(&v).re;
            let mut r = w.clone();
            for (a, b) in r.values.iter_mut().zip(&v.values) {
                *a -= b * new_lambda;
            }
            let residual = r.norm2();
            let done = (new_lambda - lambda).abs() <= tol * new_lambda && residual <= 1e-6 * new_lambda;
            lambda = new_lambda;
            v = w;
            v.scale(1.0 / nw);
            if done {
                return Ok(NormEstimate { norm: lambda.sqrt(), iterations: it, residual });
            }
            if it == max_iter {
                return Err(OperatorError::NoConvergence { residual, iterations: it });
            }
        }
        unreachable!()
    }
}

/// Dyadic averages of `|f|^r` for every scale, finest first: `avg[s][i]`
/// is the mean over the `i`-th block of `2^s` samples.
fn dyadic_averages(vals: &[f64]) -> Vec<Vec<f64>> {
    let mut levels = vec![vals.to_vec()];
    while levels.last().unwrap().len() > 1 {
        let prev = levels.last().unwrap();
        levels.push(prev.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect());
    }
    levels
}

/// Dyadic Hardy-Littlewood maximal function of `|f|`.
pub fn maximal(f: &SampledFunction) -> Vec<f64> {
    maximal_of(&f.abs())
}

fn maximal_of(vals: &[f64]) -> Vec<f64> {
    let n = vals.len();
    assert!(n.is_power_of_two());
    let levels = dyadic_averages(vals);
    (0..n)
        .map(|j| levels.iter().enumerate().map(|(s, lv)| lv[j >> s]).fold(0.0, f64::max))
        .collect()
}

/// `f*_r = (M|f|^r)^{1/r}`.
pub fn maximal_r(f: &SampledFunction, r: f64) -> Vec<f64> {
    let p: Vec<f64> = f.abs().iter().map(|v| v.powf(r)).collect();
    maximal_of(&p).into_iter().map(|v| v.powf(1.0 / r)).collect()
}

/// `M_δ f`: on `E_j` the largest average of `|f|` over dyadic `I ⊇ I_j`,
/// zero off `∪ E_j`. `E_j` lists sample indices inside `I_j`.
pub fn maximal_restricted(
    f: &SampledFunction,
    pairs: &[(DyadicInterval, Vec<usize>)],
) -> Result<Vec<f64>, OperatorError> {
    for a in 0..pairs.len() {
        for b in a + 1..pairs.len() {
            if pairs[a].0.intersects(&pairs[b].0) {
                return Err(OperatorError::Overlap(a, b));
            }
        }
    }
    let n = f.len();
    let levels = dyadic_averages(&f.abs());
    let log_n = n.trailing_zeros() as i32;
    let mut out = vec![0.0; n];
    for (i, e) in pairs {
        let value = (0..=i.scale)
            .map(|s| {
                let anc = i.ancestor(s);
                levels[(log_n - s) as usize][anc.index as usize]
            })
            .fold(0.0, f64::max);
        for &j in e {
            out[j] = value;
        }
    }
    Ok(out)
}
