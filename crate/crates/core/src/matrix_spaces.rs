//! Finite sections of the matrix spaces `M`, `M₊`, `M_α`, `M_α̂`, `M_α̂₊`.
//!
//! A [`TruncMatrix`] is an `N×N` complex matrix standing in for the upper
//! left corner of an infinite matrix indexed from 1. The module provides
//! the difference operator `Δ`, the commutator with `𝒩 = diag{1,2,3,…}`,
//! the five norms that build the `α̂` and `α̂₊` composites, matrix
//! exponentials, Sobolev-weighted operator norms, and a plain-text
//! dump/load format used for reproducible fixtures.
//!
//! Norms are norms of the finite section only; no padding is invented
//! past the truncation edge (`Δ` genuinely shrinks the dimension by one).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("dimension {0} too small: truncated matrices need dim >= 2")]
    DimTooSmall(usize),
    #[error("matrix does not satisfy claimed structure {structure:?} (deviation {deviation:.3e})")]
    StructureViolated {
        structure: MatrixStructure,
        deviation: f64,
    },
    #[error("operation requires a diagonal matrix")]
    NotDiagonal,
    #[error("non-finite matrix entries")]
    NonFinite,
    #[error("sobolev exponent {0} outside [-2, 2]")]
    SobolevRange(f64),
    #[error("matrix exponential of anti-Hermitian input failed unitarity check: {0:.3e}")]
    ExpNotUnitary(f64),
    #[error("matrix text parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MatrixStructure {
    General,
    Hermitian,
    AntiHermitian,
    Diagonal,
}

impl MatrixStructure {
    pub fn tag(&self) -> &'static str {
        match self {
            MatrixStructure::General => "general",
            MatrixStructure::Hermitian => "hermitian",
            MatrixStructure::AntiHermitian => "anti_hermitian",
            MatrixStructure::Diagonal => "diagonal",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "general" => Some(MatrixStructure::General),
            "hermitian" => Some(MatrixStructure::Hermitian),
            "anti_hermitian" => Some(MatrixStructure::AntiHermitian),
            "diagonal" => Some(MatrixStructure::Diagonal),
            _ => None,
        }
    }
}

/// Finite section of an infinite matrix, indices 1-based in all formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncMatrix {
    dim: usize,
    entries: DMatrix<Complex64>,
    structure: MatrixStructure,
}

/// The five norms of a section plus the composite definitions
/// `‖A‖_α̂ = max(‖A‖, |ΔA|_α)` and
/// `‖A‖_α̂₊ = max(‖A‖, ‖[𝒩,A]‖, |ΔA|_α, |[𝒩,ΔA]|_α)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormReport {
    pub op_norm: f64,
    pub comm_norm: f64,
    pub alpha_norm: f64,
    pub delta_alpha_norm: f64,
    pub delta_comm_alpha_norm: f64,
    pub alpha: f64,
}

impl NormReport {
    pub fn alpha_hat(&self) -> f64 {
        self.op_norm.max(self.delta_alpha_norm)
    }

    pub fn alpha_hat_plus(&self) -> f64 {
        self.op_norm
            .max(self.comm_norm)
            .max(self.delta_alpha_norm)
            .max(self.delta_comm_alpha_norm)
    }

    pub fn zero(alpha: f64) -> Self {
        NormReport {
            op_norm: 0.0,
            comm_norm: 0.0,
            alpha_norm: 0.0,
            delta_alpha_norm: 0.0,
            delta_comm_alpha_norm: 0.0,
            alpha,
        }
    }

    /// Fieldwise max, used to form the sup over a θ grid.
    pub fn max_with(&self, other: &NormReport) -> NormReport {
        NormReport {
            op_norm: self.op_norm.max(other.op_norm),
            comm_norm: self.comm_norm.max(other.comm_norm),
            alpha_norm: self.alpha_norm.max(other.alpha_norm),
            delta_alpha_norm: self.delta_alpha_norm.max(other.delta_alpha_norm),
            delta_comm_alpha_norm: self.delta_comm_alpha_norm.max(other.delta_comm_alpha_norm),
            alpha: self.alpha,
        }
    }
}

/// Dense spectral norms switch to power iteration above this size.
const DENSE_NORM_LIMIT: usize = 512;
/// Relative tolerance of the structure verification on construction.
const STRUCTURE_TOL: f64 = 1e-12;

impl TruncMatrix {
    /// Wrap entries with a claimed structure; the claim is verified.
    pub fn new(
        entries: DMatrix<Complex64>,
        structure: MatrixStructure,
    ) -> Result<Self, MatrixError> {
        let dim = entries.nrows();
        if dim < 2 || entries.ncols() != dim {
            return Err(MatrixError::DimTooSmall(dim.min(entries.ncols())));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(MatrixError::NonFinite);
        }
        let m = TruncMatrix {
            dim,
            entries,
            structure,
        };
        let dev = m.structure_deviation(structure);
        let scale = 1.0 + m.max_abs_entry();
        if dev > STRUCTURE_TOL * scale {
            return Err(MatrixError::StructureViolated {
                structure,
                deviation: dev,
            });
        }
        Ok(m)
    }

    pub fn zeros(dim: usize) -> Self {
        TruncMatrix {
            dim,
            entries: DMatrix::zeros(dim, dim),
            structure: MatrixStructure::Diagonal,
        }
    }

    pub fn identity(dim: usize) -> Self {
        TruncMatrix {
            dim,
            entries: DMatrix::identity(dim, dim),
            structure: MatrixStructure::Diagonal,
        }
    }

    /// `𝒩 = diag{1, 2, 3, …}` truncated.
    pub fn number_operator(dim: usize) -> Self {
        Self::from_real_diagonal(&(1..=dim).map(|i| i as f64).collect::<Vec<_>>())
    }

    /// `𝔸 = diag{1, 3, 5, …}`, the unperturbed oscillator.
    pub fn oscillator_diagonal(dim: usize) -> Self {
        Self::from_real_diagonal(&(1..=dim).map(|i| (2 * i - 1) as f64).collect::<Vec<_>>())
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut entries = DMatrix::zeros(dim, dim);
        for (i, &d) in diag.iter().enumerate() {
            entries[(i, i)] = Complex64::new(d, 0.0);
        }
        TruncMatrix {
            dim,
            entries,
            structure: MatrixStructure::Diagonal,
        }
    }

    pub fn from_real(
        entries_real: DMatrix<f64>,
        structure: MatrixStructure,
    ) -> Result<Self, MatrixError> {
        let entries = entries_real.map(|x| Complex64::new(x, 0.0));
        Self::new(entries, structure)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn structure(&self) -> MatrixStructure {
        self.structure
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Entry `A_i^j` with 1-based indices.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i - 1, j - 1)]
    }

    pub fn is_diagonal(&self) -> bool {
        self.structure == MatrixStructure::Diagonal
    }

    /// Real diagonal as a vector; valid when diagonal or Hermitian.
    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.entries[(i, i)].re).collect()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn structure_deviation(&self, structure: MatrixStructure) -> f64 {
        match structure {
            MatrixStructure::General => 0.0,
            MatrixStructure::Hermitian => (0..self.dim)
                .flat_map(|i| (0..self.dim).map(move |j| (i, j)))
                .map(|(i, j)| (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm())
                .fold(0.0, f64::max),
            MatrixStructure::AntiHermitian => (0..self.dim)
                .flat_map(|i| (0..self.dim).map(move |j| (i, j)))
                .map(|(i, j)| (self.entries[(i, j)] + self.entries[(j, i)].conj()).norm())
                .fold(0.0, f64::max),
            MatrixStructure::Diagonal => (0..self.dim)
                .flat_map(|i| (0..self.dim).map(move |j| (i, j)))
                .filter(|(i, j)| i != j)
                .map(|(i, j)| self.entries[(i, j)].norm())
                .fold(0.0, f64::max),
        }
    }

    /// Force exact Hermitian symmetry, `(A + A†)/2`.
    pub fn hermitize(entries: DMatrix<Complex64>) -> Self {
        let dim = entries.nrows();
        let sym = (&entries + entries.adjoint()) * Complex64::new(0.5, 0.0);
        TruncMatrix {
            dim,
            entries: sym,
            structure: MatrixStructure::Hermitian,
        }
    }

    /// Force exact anti-Hermitian symmetry, `(A - A†)/2`.
    pub fn antihermitize(entries: DMatrix<Complex64>) -> Self {
        let dim = entries.nrows();
        let asym = (&entries - entries.adjoint()) * Complex64::new(0.5, 0.0);
        TruncMatrix {
            dim,
            entries: asym,
            structure: MatrixStructure::AntiHermitian,
        }
    }

    pub fn general(entries: DMatrix<Complex64>) -> Self {
        let dim = entries.nrows();
        TruncMatrix {
            dim,
            entries,
            structure: MatrixStructure::General,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let structure = if factor.im == 0.0 {
            self.structure
        } else {
            MatrixStructure::General
        };
        TruncMatrix {
            dim: self.dim,
            entries: &self.entries * factor,
            structure,
        }
    }

    pub fn add(&self, other: &TruncMatrix) -> Self {
        assert_eq!(self.dim, other.dim);
        let structure = if self.structure == other.structure {
            self.structure
        } else {
            MatrixStructure::General
        };
        TruncMatrix {
            dim: self.dim,
            entries: &self.entries + &other.entries,
            structure,
        }
    }

    pub fn sub(&self, other: &TruncMatrix) -> Self {
        assert_eq!(self.dim, other.dim);
        let structure = if self.structure == other.structure {
            self.structure
        } else {
            MatrixStructure::General
        };
        TruncMatrix {
            dim: self.dim,
            entries: &self.entries - &other.entries,
            structure,
        }
    }

    pub fn adjoint(&self) -> Self {
        TruncMatrix {
            dim: self.dim,
            entries: self.entries.adjoint(),
            structure: self.structure,
        }
    }

    pub fn matvec(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.entries * v
    }
}

/// Matrix product through a cache-friendly gemm. The naive nalgebra
/// product is several times slower at the sizes the KAM step uses.
pub fn mat_mul(a: &TruncMatrix, b: &TruncMatrix) -> TruncMatrix {
    assert_eq!(a.dim, b.dim);
    TruncMatrix {
        dim: a.dim,
        entries: gemm(&a.entries, &b.entries),
        structure: MatrixStructure::General,
    }
}

pub(crate) fn gemm(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let k = a.ncols();
    let m = b.ncols();
    assert_eq!(k, b.nrows());
    let mut c = DMatrix::<Complex64>::zeros(n, m);
    // Column-major storage: row stride 1, column stride = nrows.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            n,
            k,
            m,
            [1.0, 0.0],
            a.as_slice().as_ptr() as *const [f64; 2],
            1,
            n as isize,
            b.as_slice().as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_slice().as_mut_ptr() as *mut [f64; 2],
            1,
            n as isize,
        );
    }
    c
}

/// Commutator `[A, B] = AB - BA`.
pub fn commutator(a: &TruncMatrix, b: &TruncMatrix) -> TruncMatrix {
    let ab = gemm(&a.entries, &b.entries);
    let ba = gemm(&b.entries, &a.entries);
    TruncMatrix {
        dim: a.dim,
        entries: ab - ba,
        structure: MatrixStructure::General,
    }
}

/// Largest singular value of the section (the `ℓ² → ℓ²` operator norm).
///
/// Dense path: Hermitian eigendecomposition of `A†A`. Past
/// `DENSE_NORM_LIMIT` a power iteration on `A†A` with relative tolerance
/// `1e-8` takes over.
pub fn op_norm(a: &TruncMatrix) -> f64 {
    if a.is_diagonal() {
        return (0..a.dim)
            .map(|i| a.entries[(i, i)].norm())
            .fold(0.0, f64::max);
    }
    if a.max_abs_entry() == 0.0 {
        return 0.0;
    }
    if a.dim <= DENSE_NORM_LIMIT {
        let gram = gemm(&a.entries.adjoint(), &a.entries);
        let eig = SymmetricEigen::new(gram);
        eig.eigenvalues
            .iter()
            .fold(0.0f64, |acc, &l| acc.max(l.max(0.0)))
            .sqrt()
    } else {
        power_iteration_norm(a)
    }
}

fn power_iteration_norm(a: &TruncMatrix) -> f64 {
    let n = a.dim;
    // deterministic start vector
    let mut v = DVector::from_fn(n, |i, _| {
        Complex64::new(1.0 + (i as f64 * 0.7).sin(), (i as f64 * 0.3).cos())
    });
    v /= Complex64::new(v.norm(), 0.0);
    let mut lambda = 0.0f64;
    for _ in 0..10_000 {
        let w = &a.entries * &v;
        let u = a.entries.adjoint() * w;
        let new_lambda = u.norm();
        if new_lambda == 0.0 {
            return 0.0;
        }
        let next = &u / Complex64::new(new_lambda, 0.0);
        let delta = (new_lambda - lambda).abs();
        v = next;
        lambda = new_lambda;
        if delta <= 1e-8 * lambda.max(1e-300) {
            break;
        }
    }
    lambda.sqrt()
}

/// Difference matrix `(ΔA)_i^j = A_{i+1}^{j+1} - A_i^j`, one dimension
/// smaller. Diagonal input stays diagonal; Hermitian stays Hermitian.
pub fn difference(a: &TruncMatrix) -> Result<TruncMatrix, MatrixError> {
    if a.dim < 2 {
        return Err(MatrixError::DimTooSmall(a.dim));
    }
    let n = a.dim - 1;
    let entries = DMatrix::from_fn(n, n, |i, j| a.entries[(i + 1, j + 1)] - a.entries[(i, j)]);
    let structure = a.structure;
    Ok(TruncMatrix {
        dim: n,
        entries,
        structure,
    })
}

/// `|A|_α = sup_{i,j} (i∧j)^α |A_i^j|` over the section (1-based).
pub fn alpha_norm(a: &TruncMatrix, alpha: f64) -> f64 {
    let mut max = 0.0f64;
    for i in 1..=a.dim {
        for j in 1..=a.dim {
            let w = (i.min(j) as f64).powf(alpha);
            max = max.max(w * a.entry(i, j).norm());
        }
    }
    max
}

/// `[𝒩, A]`, i.e. entries `(i - j) A_i^j`. Hermitian input gives an
/// anti-Hermitian commutator.
pub fn comm_with_n(a: &TruncMatrix) -> TruncMatrix {
    let entries = DMatrix::from_fn(a.dim, a.dim, |i, j| {
        a.entries[(i, j)] * Complex64::new(i as f64 - j as f64, 0.0)
    });
    let structure = match a.structure {
        MatrixStructure::Hermitian => MatrixStructure::AntiHermitian,
        MatrixStructure::AntiHermitian => MatrixStructure::Hermitian,
        MatrixStructure::Diagonal => MatrixStructure::Diagonal,
        MatrixStructure::General => MatrixStructure::General,
    };
    TruncMatrix {
        dim: a.dim,
        entries,
        structure,
    }
}

/// All five norms of the section, computed from the operations above.
pub fn full_report(a: &TruncMatrix, alpha: f64) -> Result<NormReport, MatrixError> {
    let delta = difference(a)?;
    let comm = comm_with_n(a);
    let delta_comm = comm_with_n(&delta);
    Ok(NormReport {
        op_norm: op_norm(a),
        comm_norm: op_norm(&comm),
        alpha_norm: alpha_norm(a, alpha),
        delta_alpha_norm: alpha_norm(&delta, alpha),
        delta_comm_alpha_norm: alpha_norm(&delta_comm, alpha),
        alpha,
    })
}

/// `e^S` by scaling and squaring of the truncated power series, backward
/// error below `tol`. Anti-Hermitian input is verified to produce a
/// unitary result (within `10·tol`).
pub fn mat_exp(s: &TruncMatrix, tol: f64) -> Result<TruncMatrix, MatrixError> {
    assert!(tol > 0.0, "mat_exp tolerance must be positive");
    if s.entries
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(MatrixError::NonFinite);
    }
    let n = s.dim;
    let norm1 = one_norm(&s.entries);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = &s.entries * Complex64::new(1.0 / 2f64.powi(squarings as i32), 0.0);
    let mut result = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let scaled_norm = norm1 / 2f64.powi(squarings as i32);
    let mut k = 1usize;
    loop {
        term = gemm(&term, &scaled) / Complex64::new(k as f64, 0.0);
        result += &term;
        // remainder of the series is below term_norm * sum of tail ratios
        let term_norm = one_norm(&term);
        let tail_bound = term_norm * scaled_norm
            / (k as f64 + 1.0)
            / (1.0 - scaled_norm / (k as f64 + 2.0)).max(0.5);
        if tail_bound <= tol * 0.5f64.powi(squarings as i32 + 1) || k > 40 {
            break;
        }
        k += 1;
    }
    for _ in 0..squarings {
        result = gemm(&result, &result);
    }
    let out = TruncMatrix {
        dim: n,
        entries: result,
        structure: MatrixStructure::General,
    };
    if s.structure == MatrixStructure::AntiHermitian {
        let dev = unitarity_defect(&out);
        if dev > 10.0 * tol.max(1e-14) {
            return Err(MatrixError::ExpNotUnitary(dev));
        }
    }
    Ok(out)
}

/// `‖U†U - I‖` (operator norm).
pub fn unitarity_defect(u: &TruncMatrix) -> f64 {
    let gram = gemm(&u.entries.adjoint(), &u.entries);
    let diff = gram - DMatrix::<Complex64>::identity(u.dim, u.dim);
    op_norm(&TruncMatrix {
        dim: u.dim,
        entries: diff,
        structure: MatrixStructure::General,
    })
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Operator norm of `D^{s/2} A D^{-s/2}` with `D = diag{1,2,3,…}`: the
/// norm of the section as a map `ℓ²_s → ℓ²_s`. `s` is restricted to
/// `[-2, 2]`, the range in which the `‖·‖₊` control holds.
pub fn sobolev_op_norm(a: &TruncMatrix, s: f64) -> Result<f64, MatrixError> {
    if !(-2.0..=2.0).contains(&s) {
        return Err(MatrixError::SobolevRange(s));
    }
    if a.is_diagonal() {
        return Ok(op_norm(a));
    }
    let entries = DMatrix::from_fn(a.dim, a.dim, |i, j| {
        let w = ((i + 1) as f64 / (j + 1) as f64).powf(s / 2.0);
        a.entries[(i, j)] * Complex64::new(w, 0.0)
    });
    Ok(op_norm(&TruncMatrix {
        dim: a.dim,
        entries,
        structure: MatrixStructure::General,
    }))
}

/// Exhaustive check of the diagonal-difference bound
/// `|d_i - d_j| <= |ΔA|_α |i-j| / (i∧j)^α` over the section.
pub fn diag_diff_bound_check(a: &TruncMatrix, alpha: f64) -> Result<bool, MatrixError> {
    if !a.is_diagonal() {
        return Err(MatrixError::NotDiagonal);
    }
    let delta = difference(a)?;
    let bound = alpha_norm(&delta, alpha);
    let d: Vec<f64> = a.real_diagonal();
    for i in 1..=a.dim {
        for j in 1..=a.dim {
            if i == j {
                continue;
            }
            let lhs = (d[i - 1] - d[j - 1]).abs();
            let rhs = bound * (i as f64 - j as f64).abs() / (i.min(j) as f64).powf(alpha);
            if lhs > rhs * (1.0 + 1e-12) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------
// Text fixture format
// ---------------------------------------------------------------------

/// Maximum dimension accepted by the parser (keeps fixtures sane).
pub const PARSE_DIM_LIMIT: usize = 1024;

/// Serialize in the fixture format:
///
/// ```text
/// qho-mat 1
/// dim <N>
/// structure <general|hermitian|anti_hermitian|diagonal>
/// alpha <float>
/// <re> <im>          (N² row-major pairs)
/// ```
pub fn write_text(a: &TruncMatrix, alpha: f64) -> String {
    let mut out = String::new();
    out.push_str("qho-mat 1\n");
    out.push_str(&format!("dim {}\n", a.dim));
    out.push_str(&format!("structure {}\n", a.structure.tag()));
    out.push_str(&format!("alpha {}\n", fmt_f64(alpha)));
    for i in 1..=a.dim {
        for j in 1..=a.dim {
            let z = a.entry(i, j);
            out.push_str(&format!("{} {}\n", fmt_f64(z.re), fmt_f64(z.im)));
        }
    }
    out
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parse the fixture format. Never panics on malformed input.
pub fn parse_text(text: &str) -> Result<(TruncMatrix, f64), MatrixError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err("empty input"))?;
    if header.trim() != "qho-mat 1" {
        return Err(err("bad header, expected 'qho-mat 1'"));
    }
    let dim_line = lines.next().ok_or_else(|| err("missing dim line"))?;
    let dim: usize = field(dim_line, "dim")?
        .parse()
        .map_err(|_| err("dim is not an integer"))?;
    if dim < 2 {
        return Err(MatrixError::DimTooSmall(dim));
    }
    if dim > PARSE_DIM_LIMIT {
        return Err(err(&format!("dim {dim} exceeds limit {PARSE_DIM_LIMIT}")));
    }
    let structure_line = lines.next().ok_or_else(|| err("missing structure line"))?;
    let structure = MatrixStructure::from_tag(field(structure_line, "structure")?)
        .ok_or_else(|| err("unknown structure tag"))?;
    let alpha_line = lines.next().ok_or_else(|| err("missing alpha line"))?;
    let alpha: f64 = field(alpha_line, "alpha")?
        .parse()
        .map_err(|_| err("alpha is not a float"))?;
    if !alpha.is_finite() {
        return Err(err("alpha is not finite"));
    }
    let mut values = Vec::with_capacity(2 * dim * dim);
    for line in lines {
        for tok in line.split_whitespace() {
            if values.len() == 2 * dim * dim {
                return Err(err("trailing data after matrix entries"));
            }
            let v: f64 = tok.parse().map_err(|_| err("bad float token"))?;
            values.push(v);
        }
    }
    if values.len() != 2 * dim * dim {
        return Err(err(&format!(
            "expected {} floats, got {}",
            2 * dim * dim,
            values.len()
        )));
    }
    let entries = DMatrix::from_fn(dim, dim, |i, j| {
        let base = 2 * (i * dim + j);
        Complex64::new(values[base], values[base + 1])
    });
    let m = TruncMatrix::new(entries, structure)?;
    Ok((m, alpha))
}

fn field<'a>(line: &'a str, key: &str) -> Result<&'a str, MatrixError> {
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(v), None) if k == key => Ok(v),
        _ => Err(err(&format!("expected '{key} <value>' line"))),
    }
}

fn err(msg: &str) -> MatrixError {
    MatrixError::Parse(msg.to_string())
}
