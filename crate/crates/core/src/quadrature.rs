//! Gauss quadrature rules used across the crate.
//!
//! Two rules are provided: Gauss–Legendre on `[-1, 1]` (used for the
//! τ-integral of the KAM step and for weighted-norm integrals on the half
//! line) and Gauss–Hermite with the `e^{-x²}` weight compensated
//! analytically. The Hermite rule never materializes the raw weights
//! `w_q ~ e^{-x_q²}` (they underflow long before 512 nodes); instead it
//! returns the modified weights `w_q e^{x_q²}` computed from the
//! Christoffel identity in terms of the bounded Hermite *functions*.

/// Gauss–Legendre rule of order `n` on `[-1, 1]`.
///
/// Nodes are symmetric about 0 and strictly increasing. Newton iteration
/// on the three-term recurrence; converges to machine precision.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre: order must be >= 1");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess for the i-th root (descending).
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(z) and P_n'(z).
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| half * w).collect(),
    )
}

/// Gauss–Hermite rule with the weight function folded out.
///
/// `nodes` are the roots of the degree-`n` Hermite polynomial (strictly
/// increasing, symmetric about 0). `weights` are the *modified* weights
/// `w̃_q = w_q e^{x_q²}`, so that
///
/// ```text
/// ∫ f(x) dx ≈ Σ_q w̃_q f(x_q)
/// ```
///
/// is exact whenever `f = p(x) e^{-x²}` with `deg p ≤ 2n-1`. This is the
/// form needed for integrands assembled from normalized Hermite functions
/// (which carry their own Gaussian factor).
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Value of the orthonormal Hermite *function* of polynomial degree `deg`
/// at `x`, together with the previous one (`deg-1`). Degree 0 is
/// `π^{-1/4} e^{-x²/2}`.
fn hermite_fn_pair(deg: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    for j in 0..deg {
        let next =
            x * (2.0 / (j + 1) as f64).sqrt() * cur - (j as f64 / (j + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

pub fn gauss_hermite(n: usize) -> GaussHermite {
    assert!(n >= 2, "gauss_hermite: need at least 2 nodes");
    let mut roots_desc: Vec<f64> = Vec::with_capacity(n.div_ceil(2));
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..n.div_ceil(2) {
        // Standard initial guesses for Hermite roots, largest first.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * roots_desc[0],
            3 => 1.91 * z - 0.91 * roots_desc[1],
            _ => 2.0 * z - roots_desc[i - 2],
        };
        // Newton on the Hermite function of degree n (same roots as the
        // polynomial, no overflow at large |x|).
        for _ in 0..200 {
            let (f, fm1) = hermite_fn_pair(n, z);
            // d/dx φ_n = sqrt(2n) φ_{n-1} - x φ_n
            let df = (2.0 * nf).sqrt() * fm1 - z * f;
            let dz = f / df;
            z -= dz;
            if dz.abs() <= 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
        roots_desc.push(z);
    }
    let mut nodes = vec![0.0; n];
    for (i, &r) in roots_desc.iter().enumerate() {
        nodes[n - 1 - i] = r;
        nodes[i] = -r;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    // Christoffel identity: w_q = 1 / Σ_{d<n} p_d(x_q)², hence
    // w̃_q = w_q e^{x_q²} = 1 / Σ_{d<n} φ_d(x_q)².
    let weights = nodes
        .iter()
        .map(|&x| {
            let mut prev = 0.0;
            let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
            let mut sum_sq = cur * cur;
            for j in 0..n - 1 {
                let next = x * (2.0 / (j + 1) as f64).sqrt() * cur
                    - (j as f64 / (j + 1) as f64).sqrt() * prev;
                prev = cur;
                cur = next;
                sum_sq += cur * cur;
            }
            1.0 / sum_sq
        })
        .collect();
    GaussHermite { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let (xs, ws) = gauss_legendre(8);
        // degree up to 15 exact; check x^14 on [-1,1] = 2/15
        let val: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(14)).sum();
        assert!((val - 2.0 / 15.0).abs() < 1e-14);
        let sum_w: f64 = ws.iter().sum();
        assert!((sum_w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_mapped_interval() {
        let (xs, ws) = gauss_legendre_on(16, 0.0, 3.0);
        let val: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x * x).sum();
        assert!((val - 9.0).abs() < 1e-12);
    }

    #[test]
    fn hermite_nodes_symmetric_increasing() {
        for n in [2usize, 7, 40, 512] {
            let rule = gauss_hermite(n);
            for q in 1..n {
                assert!(rule.nodes[q] > rule.nodes[q - 1]);
            }
            for q in 0..n {
                assert_eq!(rule.nodes[q], -rule.nodes[n - 1 - q]);
            }
            assert!(rule.weights.iter().all(|w| w.is_finite() && *w > 0.0));
        }
    }

    #[test]
    fn hermite_integrates_gaussian_moments() {
        // ∫ x^{2m} e^{-x²} dx = Γ(m+1/2); with modified weights the
        // integrand must carry the Gaussian explicitly.
        let rule = gauss_hermite(40);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let moments = [sqrt_pi, 0.5 * sqrt_pi, 0.75 * sqrt_pi];
        for (m, want) in moments.iter().enumerate() {
            let got: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(2 * m as i32) * (-x * x).exp())
                .sum();
            assert!(
                (got - want).abs() < 1e-12,
                "moment {m}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn hermite_large_rule_no_underflow() {
        let rule = gauss_hermite(512);
        // ground-state normalization via the modified weights
        let got: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| {
                let h1 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
                w * h1 * h1
            })
            .sum();
        assert!((got - 1.0).abs() < 1e-13, "got {got}");
    }
}
