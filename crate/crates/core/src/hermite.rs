//! Truncated Hermite eigenbasis of the quantum harmonic oscillator.
//!
//! The basis functions `h_i` (1-based, `i = 1..=n_max`) are the normalized
//! eigenfunctions of `H = -d²/dx² + x²` with eigenvalues `λ_i = 2i - 1`.
//! Values are produced by the stable three-term recurrence for the
//! normalized Hermite *functions* (Gaussian factor included), so nothing
//! overflows past index ~20 the way raw Hermite polynomials do.

use crate::quadrature::{self, GaussHermite};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HermiteError {
    #[error(
        "quadrature underresolved: quad_size {quad_size} < 2*n_max + {margin} = {needed} \
         (products of basis functions would not integrate exactly)"
    )]
    QuadratureUnderresolved {
        quad_size: usize,
        margin: usize,
        needed: usize,
    },
    #[error("basis index {index} out of range 1..={n_max}")]
    IndexOutOfRange { index: usize, n_max: usize },
    #[error("weighted-norm quadrature underresolved: rules of order {coarse} and {fine} differ by {discrepancy:.3e}")]
    WeightedNormUnderresolved {
        coarse: usize,
        fine: usize,
        discrepancy: f64,
    },
}

/// Extra nodes required beyond `2 * n_max` when building a basis.
pub const QUAD_MARGIN: usize = 8;

/// Truncated eigenbasis `{h_i}_{i <= n_max}` with its Gauss–Hermite rule.
///
/// `quad_weights` are the modified weights `w_q e^{x_q²}` (see
/// [`quadrature::gauss_hermite`]); inner products are plain weighted sums
/// of function values. One extra row of values is kept so ladder
/// identities can be checked at the truncation edge.
#[derive(Debug)]
pub struct HermiteBasis {
    pub n_max: usize,
    pub quad_nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    pub normalized: bool,
    values: Vec<Vec<f64>>,
}

/// Ladder operator selector: `T = ∂_x + x` lowers, `T† = -∂_x + x` raises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    T,
    Tdagger,
}

/// Exact eigenvalue `λ_i = 2i - 1` of the unperturbed oscillator.
pub fn eigenvalue(i: usize) -> i64 {
    assert!(i >= 1, "eigenvalues are 1-based");
    2 * i as i64 - 1
}

/// Ladder action on `h_i`.
///
/// `T h_i = √(2(i-1)) h_{i-1}` (annihilates `h_1`),
/// `T† h_i = √(2i) h_{i+1}`. Total function: no error path.
pub fn ladder_apply(i: usize, which: Ladder) -> (f64, Option<usize>) {
    assert!(i >= 1, "ladder indices are 1-based");
    match which {
        Ladder::T => {
            if i == 1 {
                (0.0, None)
            } else {
                ((2.0 * (i as f64 - 1.0)).sqrt(), Some(i - 1))
            }
        }
        Ladder::Tdagger => ((2.0 * i as f64).sqrt(), Some(i + 1)),
    }
}

/// Values `h_1(x), ..., h_count(x)` at a single point by the normalized
/// recurrence `h_{i+1} = √(2/i) x h_i - √((i-1)/i) h_{i-1}`.
pub fn hermite_values(x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if count >= 1 {
        out.push(cur);
    }
    for i in 1..count {
        let next = x * (2.0 / i as f64).sqrt() * cur - ((i as f64 - 1.0) / i as f64).sqrt() * prev;
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Build the basis with a `quad_size`-node Gauss–Hermite rule.
///
/// Requires `quad_size >= 2*n_max + QUAD_MARGIN` so that all products
/// `h_i h_j` (and one ladder index beyond) integrate exactly with margin.
pub fn build_basis(n_max: usize, quad_size: usize) -> Result<HermiteBasis, HermiteError> {
    assert!(n_max >= 1);
    let needed = 2 * n_max + QUAD_MARGIN;
    if quad_size < needed {
        return Err(HermiteError::QuadratureUnderresolved {
            quad_size,
            margin: QUAD_MARGIN,
            needed,
        });
    }
    let GaussHermite { nodes, weights } = quadrature::gauss_hermite(quad_size);
    let values = build_value_table(&nodes, n_max + 1);
    Ok(HermiteBasis {
        n_max,
        quad_nodes: nodes,
        quad_weights: weights,
        normalized: true,
        values,
    })
}

fn build_value_table(nodes: &[f64], rows: usize) -> Vec<Vec<f64>> {
    let mut values = vec![vec![0.0; nodes.len()]; rows];
    for (q, &x) in nodes.iter().enumerate() {
        let col = hermite_values(x, rows);
        for (i, v) in col.into_iter().enumerate() {
            values[i][q] = v;
        }
    }
    values
}

impl HermiteBasis {
    /// `h_i` at the quadrature nodes (`i` up to `n_max + 1`).
    pub fn values(&self, i: usize) -> &[f64] {
        assert!(
            (1..=self.n_max + 1).contains(&i),
            "basis row {i} out of range"
        );
        &self.values[i - 1]
    }

    /// Quadrature inner product `⟨f, g⟩` of two node-sampled functions.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.quad_weights
            .iter()
            .zip(f)
            .zip(g)
            .map(|((w, a), b)| w * a * b)
            .sum()
    }

    /// `⟨h_i, h_j⟩` by quadrature.
    pub fn gram_entry(&self, i: usize, j: usize) -> f64 {
        self.inner(self.values(i), self.values(j))
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 1..=self.n_max {
            for j in i..=self.n_max {
                let target = if i == j { 1.0 } else { 0.0 };
                max = max.max((self.gram_entry(i, j) - target).abs());
            }
        }
        max
    }

    /// `∂_x h_i` at the quadrature nodes via the analytic recurrence
    /// `∂_x h_i = √(2(i-1)) h_{i-1} - x h_i`.
    pub fn derivative_values(&self, i: usize) -> Vec<f64> {
        assert!((1..=self.n_max).contains(&i));
        let c = (2.0 * (i as f64 - 1.0)).sqrt();
        let hi = self.values(i);
        self.quad_nodes
            .iter()
            .enumerate()
            .map(|(q, &x)| {
                let low = if i >= 2 { self.values(i - 1)[q] } else { 0.0 };
                c * low - x * hi[q]
            })
            .collect()
    }

    /// Max residual over nodes and `i <= n_max` of
    /// `∂_x h_i = -√(i/2) h_{i+1} + √((i-1)/2) h_{i-1}`.
    pub fn ladder_identity_residual(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 1..=self.n_max {
            let deriv = self.derivative_values(i);
            let up = self.values(i + 1);
            let a = (i as f64 / 2.0).sqrt();
            let b = ((i as f64 - 1.0) / 2.0).sqrt();
            for q in 0..self.quad_nodes.len() {
                let low = if i >= 2 { self.values(i - 1)[q] } else { 0.0 };
                let rhs = -a * up[q] + b * low;
                max = max.max((deriv[q] - rhs).abs());
            }
        }
        max
    }

    /// Max residual of `⟨h_i, H h_j⟩ = (2i-1) δ_ij` with `H` applied via
    /// `T T† = H + Id`, i.e. `⟨T†h_i, T†h_j⟩ - ⟨h_i,h_j⟩ = (2i-1) δ_ij`.
    pub fn eigenrelation_residual(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 1..=self.n_max {
            let (ci, ti) = ladder_apply(i, Ladder::Tdagger);
            for j in i..=self.n_max {
                let (cj, tj) = ladder_apply(j, Ladder::Tdagger);
                let raise = ci * cj * self.gram_entry(ti.unwrap(), tj.unwrap());
                let gram = self.gram_entry(i, j);
                let target = if i == j { eigenvalue(i) as f64 } else { 0.0 };
                max = max.max((raise - gram - target).abs());
            }
        }
        max
    }

    /// `‖(1+|x|)^δ h_i‖_{L²}` by a half-line Gauss–Legendre rule.
    ///
    /// The integrand is folded to `[0, ∞)` where `(1+x)^{2δ} h_i(x)²` is
    /// smooth (the kink of `|x|` sits at the fold), then integrated on
    /// `[0, X]` with `X` past the classical turning point. Resolution is
    /// validated by comparing two rule orders.
    pub fn weighted_norm(&self, i: usize, delta: f64) -> Result<f64, HermiteError> {
        if !(1..=self.n_max).contains(&i) {
            return Err(HermiteError::IndexOutOfRange {
                index: i,
                n_max: self.n_max,
            });
        }
        assert!((0.0..=1.0).contains(&delta), "delta must be in [0,1]");
        let coarse = 24 * self.n_max.max(8);
        let fine = coarse + coarse / 2;
        let val_coarse = self.weighted_norm_sq_halfline(i, delta, coarse);
        let val_fine = self.weighted_norm_sq_halfline(i, delta, fine);
        let discrepancy = (val_coarse - val_fine).abs();
        if discrepancy > 1e-12 * (1.0 + val_fine.abs()) {
            return Err(HermiteError::WeightedNormUnderresolved {
                coarse,
                fine,
                discrepancy,
            });
        }
        Ok(val_fine.sqrt())
    }

    fn weighted_norm_sq_halfline(&self, i: usize, delta: f64, order: usize) -> f64 {
        let x_max = (2.0 * self.n_max as f64 + 1.0).sqrt() + 12.0;
        // composite rule: panels keep the per-panel degree moderate
        let panels = 8;
        let per = order.div_ceil(panels);
        let mut total = 0.0;
        for p in 0..panels {
            let a = x_max * p as f64 / panels as f64;
            let b = x_max * (p + 1) as f64 / panels as f64;
            let (xs, ws) = quadrature::gauss_legendre_on(per, a, b);
            let part: f64 = xs
                .iter()
                .zip(&ws)
                .map(|(&x, &w)| {
                    let h = hermite_values(x, i)[i - 1];
                    w * (1.0 + x).powf(2.0 * delta) * h * h
                })
                .sum();
            total += part;
        }
        2.0 * total
    }

    /// Diagnostic ratio `‖(1+|x|)^δ h_i‖ / λ^δ` with `λ = √(2i-1)`, the
    /// square root of the oscillator eigenvalue (`H h = λ² h` in the
    /// normalization of the weighted-norm bound).
    pub fn weighted_norm_ratio(&self, i: usize, delta: f64) -> Result<f64, HermiteError> {
        let norm = self.weighted_norm(i, delta)?;
        let lambda = (2.0 * i as f64 - 1.0).sqrt();
        Ok(norm / lambda.powf(delta))
    }
}
