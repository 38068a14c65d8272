//! Time evolution: the reduced diagonal flow, its transport back through
//! the KAM transformation, and an independent direct integrator used as
//! the ground-truth oracle.
//!
//! The direct integrator works in the rotating (interaction) frame
//! `w = e^{iΛ₀t} u`, where the stiff diagonal is propagated exactly and
//! only the ε-small perturbation is stepped with the classical 4-stage
//! explicit scheme, so accuracy scales with ε and not with the largest
//! eigenvalue.

use crate::hermite::HermiteBasis;
use crate::matrix_spaces::{unitarity_defect, MatrixError, TruncMatrix};
use crate::perturbation::{fourier_p, FourierMatrix, PerturbError, PotentialSpec};
use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("time step {dt:.3e} exceeds the stiff limit 0.5/λ_N = {max:.3e}")]
    StepTooLarge { dt: f64, max: f64 },
    #[error("transformation not unitary at t={t:.3}: defect {defect:.3e}")]
    Unitarity { t: f64, defect: f64 },
    #[error("perturbation error: {0}")]
    Perturb(#[from] PerturbError),
    #[error("matrix error: {0}")]
    Matrix(#[from] MatrixError),
    #[error("dimension mismatch: state {state}, operator {operator}")]
    Dimension { state: usize, operator: usize },
}

/// Hermite coefficient vector with the weighted sequence norms
/// `‖u‖_p = √(Σ i^p |u_i|²)` (indices 1-based).
#[derive(Debug, Clone)]
pub struct StateVector {
    pub coeffs: DVector<Complex64>,
}

impl StateVector {
    pub fn new(coeffs: DVector<Complex64>) -> Self {
        StateVector { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn norm_p(&self, p: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(idx, z)| ((idx + 1) as f64).powf(p) * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Gaussian-weighted low-mode profile, normalized in ℓ².
    pub fn gaussian_profile(dim: usize, width: f64) -> Self {
        let mut v = DVector::from_fn(dim, |i, _| {
            let x = (i + 1) as f64 / width;
            Complex64::new(
                (-x * x).exp(),
                0.3 * (-x * x).exp() * (i as f64 * 0.7).sin(),
            )
        });
        let n = v.norm();
        v /= Complex64::new(n, 0.0);
        StateVector::new(v)
    }

    /// Single basis mode `e_i` (1-based).
    pub fn single_mode(dim: usize, i: usize) -> Self {
        assert!((1..=dim).contains(&i));
        let mut v = DVector::zeros(dim);
        v[i - 1] = Complex64::new(1.0, 0.0);
        StateVector::new(v)
    }

    /// Rough profile `u_i ~ i^{-5/4}`: finite `ℋ¹` norm, divergent `ℋ²`
    /// tail (at truncation scale), exercising the p range.
    pub fn rough_profile(dim: usize) -> Self {
        let mut v = DVector::from_fn(dim, |i, _| {
            let idx = (i + 1) as f64;
            Complex64::new(idx.powf(-1.25), 0.0) * Complex64::new(0.0, idx * 0.9).exp()
        });
        let n = v.norm();
        v /= Complex64::new(n, 0.0);
        StateVector::new(v)
    }
}

/// `v_i(t) = e^{-i λ_i^∞ t} v_i(0)`: the reduced flow, an exact isometry
/// of every `ℓ²_p`.
pub fn evolve_reduced(lambda_inf: &[f64], v0: &StateVector, t: f64) -> StateVector {
    assert_eq!(lambda_inf.len(), v0.dim());
    let coeffs = DVector::from_fn(v0.dim(), |i, _| {
        v0.coeffs[i] * Complex64::new(0.0, -lambda_inf[i] * t).exp()
    });
    StateVector::new(coeffs)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Sobolev norms `[‖ψ‖_0, ‖ψ‖_1, ‖ψ‖_2]` per time.
    pub norms: Vec<[f64; 3]>,
}

impl Trajectory {
    fn from_states(times: Vec<f64>, states: Vec<StateVector>) -> Self {
        let norms = states
            .iter()
            .map(|s| [s.norm_p(0.0), s.norm_p(1.0), s.norm_p(2.0)])
            .collect();
        Trajectory {
            times,
            states,
            norms,
        }
    }
}

/// Evolve through the reduced system:
/// `ψ(t) = U(ωt) e^{-i t Λ^∞} U(0)⁻¹ ψ₀` with `U⁻¹ = U†` (unitary).
///
/// Unitarity of the resynthesized transformation is checked at the first
/// grid point and every 16th one after that.
pub fn evolve_original(
    u_fourier: &FourierMatrix,
    lambda_inf: &[f64],
    psi0: &StateVector,
    t_grid: &[f64],
    omega: &[f64],
    unitary_tol: f64,
) -> Result<Trajectory, DynamicsError> {
    let dim = psi0.dim();
    if u_fourier.dim() != dim {
        return Err(DynamicsError::Dimension {
            state: dim,
            operator: u_fourier.dim(),
        });
    }
    let u0 = u_fourier.resynthesize(&vec![0.0; omega.len()]);
    check_unitary(&u0, 0.0, unitary_tol)?;
    let w0 = StateVector::new(u0.adjoint().matvec(&psi0.coeffs));
    let mut states = Vec::with_capacity(t_grid.len());
    for (idx, &t) in t_grid.iter().enumerate() {
        let theta: Vec<f64> = omega.iter().map(|w| w * t).collect();
        let u_t = u_fourier.resynthesize(&theta);
        if idx % 16 == 0 {
            check_unitary(&u_t, t, unitary_tol)?;
        }
        let v = evolve_reduced(lambda_inf, &w0, t);
        states.push(StateVector::new(u_t.matvec(&v.coeffs)));
    }
    Ok(Trajectory::from_states(t_grid.to_vec(), states))
}

fn check_unitary(u: &TruncMatrix, t: f64, tol: f64) -> Result<(), DynamicsError> {
    let defect = unitarity_defect(u);
    if defect > tol {
        return Err(DynamicsError::Unitarity { t, defect });
    }
    Ok(())
}

/// Direct integration of `i u̇ = (𝔸 + ε P(ωt)) u` in the rotating frame;
/// the ground-truth oracle for [`evolve_original`].
///
/// `dt` must satisfy the stiff-limit precondition `dt <= 0.5/λ_N`; grid
/// intervals are subdivided into equal substeps no longer than `dt`.
pub fn direct_integrate(
    basis: &HermiteBasis,
    v: &PotentialSpec,
    omega: &[f64],
    eps: f64,
    psi0: &StateVector,
    t_grid: &[f64],
    dt: f64,
) -> Result<Trajectory, DynamicsError> {
    let dim = basis.n_max;
    if psi0.dim() != dim {
        return Err(DynamicsError::Dimension {
            state: psi0.dim(),
            operator: dim,
        });
    }
    let lam_max = (2 * dim - 1) as f64;
    let dt_max = 0.5 / lam_max;
    if dt > dt_max {
        return Err(DynamicsError::StepTooLarge { dt, max: dt_max });
    }
    let k_max = v.k_support.unwrap_or(8);
    let modes = fourier_p(basis, v, k_max, 2, false)?;
    let lam: Vec<f64> = (1..=dim).map(|i| (2 * i - 1) as f64).collect();

    // ẇ = -i ε Q(t) w, Q(t) = e^{iΛt} P(ωt) e^{-iΛt}
    let apply_rhs = |t: f64, w: &DVector<Complex64>| -> DVector<Complex64> {
        let mut u = DVector::from_fn(dim, |i, _| w[i] * Complex64::new(0.0, -lam[i] * t).exp());
        u = apply_modes(&modes, omega, t, &u);
        DVector::from_fn(dim, |i, _| {
            u[i] * Complex64::new(0.0, lam[i] * t).exp() * Complex64::new(0.0, -eps)
        })
    };

    let mut w = psi0.coeffs.clone();
    let mut t_cur = t_grid.first().copied().unwrap_or(0.0);
    let mut states = Vec::with_capacity(t_grid.len());
    let mut push_state = |t: f64, w: &DVector<Complex64>| {
        let u = DVector::from_fn(dim, |i, _| w[i] * Complex64::new(0.0, -lam[i] * t).exp());
        states.push(StateVector::new(u));
    };
    push_state(t_cur, &w);
    for &t_next in &t_grid[1..] {
        let span = t_next - t_cur;
        let substeps = (span / dt).ceil().max(1.0) as usize;
        let h = span / substeps as f64;
        for s in 0..substeps {
            let t = t_cur + s as f64 * h;
            let k1 = apply_rhs(t, &w);
            let k2 = apply_rhs(t + 0.5 * h, &(&w + &k1 * Complex64::new(0.5 * h, 0.0)));
            let k3 = apply_rhs(t + 0.5 * h, &(&w + &k2 * Complex64::new(0.5 * h, 0.0)));
            let k4 = apply_rhs(t + h, &(&w + &k3 * Complex64::new(h, 0.0)));
            w += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
                * Complex64::new(h / 6.0, 0.0);
        }
        t_cur = t_next;
        push_state(t_cur, &w);
    }
    Ok(Trajectory::from_states(t_grid.to_vec(), states))
}

/// `P(ωt) u` by mode-wise matvecs (no matrix is materialized).
fn apply_modes(
    modes: &FourierMatrix,
    omega: &[f64],
    t: f64,
    u: &DVector<Complex64>,
) -> DVector<Complex64> {
    let mut acc = DVector::zeros(u.len());
    for (k, m) in modes.modes() {
        let phase: f64 = k.iter().zip(omega).map(|(&ki, &w)| ki as f64 * w * t).sum();
        let factor = Complex64::new(phase.cos(), phase.sin());
        acc += m.matvec(u) * factor;
    }
    acc
}

/// Largest-magnitude frequency of a coefficient time series by direct
/// evaluation of the discrete-time Fourier transform on a frequency grid
/// (the series are short; no FFT machinery needed).
pub fn dominant_frequency(
    samples: &[Complex64],
    dt: f64,
    freq_lo: f64,
    freq_hi: f64,
    n_scan: usize,
) -> f64 {
    let mut best = (freq_lo, 0.0f64);
    for s in 0..n_scan {
        let f = freq_lo + (freq_hi - freq_lo) * s as f64 / (n_scan - 1) as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, &z) in samples.iter().enumerate() {
            // e^{+i f t} compensates the e^{-i f t} carried by the signal
            acc += z * Complex64::new(0.0, f * dt * idx as f64).exp();
        }
        let mag = acc.norm();
        if mag > best.1 {
            best = (f, mag);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::build_basis;

    #[test]
    fn reduced_flow_phases() {
        let lam = [1.0, 3.0, 5.0];
        let v0 = StateVector::single_mode(3, 3);
        // t = 0 identity
        let same = evolve_reduced(&lam, &v0, 0.0);
        assert_eq!(same.coeffs, v0.coeffs);
        // λ all zero
        let frozen = evolve_reduced(&[0.0; 3], &v0, 7.3);
        assert_eq!(frozen.coeffs, v0.coeffs);
        // e_3 with λ_3 = 5 at t = π/5 picks up e^{-iπ} = -1
        let flipped = evolve_reduced(&lam, &v0, std::f64::consts::PI / 5.0);
        assert!((flipped.coeffs[2] + Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn reduced_flow_is_isometry() {
        let dim = 32;
        let lam: Vec<f64> = (1..=dim).map(|i| (2 * i - 1) as f64 + 1e-3).collect();
        let v0 = StateVector::gaussian_profile(dim, 6.0);
        for p in [0.0, 0.7, 1.0, 2.0] {
            let before = v0.norm_p(p);
            let after = evolve_reduced(&lam, &v0, 17.23).norm_p(p);
            assert!((before - after).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_integrator_eps_zero_matches_exact_flow() {
        let dim = 16;
        let basis = build_basis(dim, 48).unwrap();
        let v = PotentialSpec::cos_x_minus_theta(0.1, 2.0);
        let psi0 = StateVector::gaussian_profile(dim, 4.0);
        let t_grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let lam: Vec<f64> = (1..=dim).map(|i| (2 * i - 1) as f64).collect();
        let traj = direct_integrate(&basis, &v, &[1.1], 0.0, &psi0, &t_grid, 0.01).unwrap();
        let exact = evolve_reduced(&lam, &psi0, 1.0);
        let got = &traj.states.last().unwrap().coeffs;
        let dev = (got - &exact.coeffs).norm();
        assert!(dev < 1e-13, "dev {dev}");
    }

    #[test]
    fn direct_integrator_rejects_large_step() {
        let dim = 16;
        let basis = build_basis(dim, 48).unwrap();
        let v = PotentialSpec::constant(1.0);
        let psi0 = StateVector::single_mode(dim, 1);
        let err = direct_integrate(&basis, &v, &[], 0.1, &psi0, &[0.0, 1.0], 0.5).unwrap_err();
        assert!(matches!(err, DynamicsError::StepTooLarge { .. }));
    }

    #[test]
    fn direct_integrator_fourth_order_self_convergence() {
        let dim = 24;
        let basis = build_basis(dim, 64).unwrap();
        let v = PotentialSpec::cos_x_minus_theta(0.1, 2.0);
        let psi0 = StateVector::gaussian_profile(dim, 5.0);
        let t_grid = [0.0, 1.0];
        // large eps so truncation error dominates round-off
        let eps = 0.1;
        let omega = [1.37];
        let base_dt = 8e-3; // within 0.5/λ_N = 0.5/47
        let mut finals = Vec::new();
        for level in 0..3 {
            let dt = base_dt / 2f64.powi(level);
            let traj = direct_integrate(&basis, &v, &omega, eps, &psi0, &t_grid, dt).unwrap();
            finals.push(traj.states.last().unwrap().coeffs.clone());
        }
        let e01 = (&finals[0] - &finals[1]).norm();
        let e12 = (&finals[1] - &finals[2]).norm();
        let ratio = e01 / e12;
        assert!(
            (ratio - 16.0).abs() <= 0.3 * 16.0,
            "convergence ratio {ratio}, errors {e01:.3e}/{e12:.3e}"
        );
    }

    #[test]
    fn norm_conservation_under_direct_flow() {
        let dim = 24;
        let basis = build_basis(dim, 64).unwrap();
        let v = PotentialSpec::cos_x_minus_theta(0.1, 2.0);
        let psi0 = StateVector::gaussian_profile(dim, 5.0);
        let t_grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let traj = direct_integrate(&basis, &v, &[1.37], 1e-3, &psi0, &t_grid, 2e-3).unwrap();
        for n in &traj.norms {
            assert!((n[0] - 1.0).abs() < 1e-9, "l2 drift {}", (n[0] - 1.0).abs());
        }
    }

    #[test]
    fn evolve_original_eps_zero_is_exact_oscillator_flow() {
        use crate::perturbation::FourierMatrix;
        let dim = 16;
        let mut u_id = FourierMatrix::new(1, 0, 1);
        u_id.insert(vec![0], TruncMatrix::identity(dim));
        let lam: Vec<f64> = (1..=dim).map(|i| (2 * i - 1) as f64).collect();
        let psi0 = StateVector::gaussian_profile(dim, 4.0);
        let t_grid: Vec<f64> = (0..=8).map(|i| i as f64 * 0.7).collect();
        let traj = evolve_original(&u_id, &lam, &psi0, &t_grid, &[1.1], 1e-10).unwrap();
        for (idx, &t) in t_grid.iter().enumerate() {
            let exact = evolve_reduced(&lam, &psi0, t);
            let dev = (&traj.states[idx].coeffs - &exact.coeffs).norm();
            assert!(dev < 1e-13, "t={t}: {dev}");
            for p in 0..3 {
                assert!((traj.norms[idx][p] - traj.norms[0][p]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trajectory_spectrum_matches_reduced_eigenvalue() {
        // after reduction the coefficients are finite phase sums
        // e^{i(k·ω - λ_j^∞)t}; for a single-mode start dominated by the
        // k = 0 term, the spectral peak of u_j(t) sits at λ_j^∞ within
        // the window resolution
        use crate::kam::{run, KamParams};
        let params = KamParams {
            n_max: 20,
            quad_size: 64,
            m_max: 2,
            ..KamParams::flagship(1e-3, vec![0.323379783225])
        };
        let v = crate::perturbation::PotentialSpec::cos_x_minus_theta(0.1, 2.0);
        let result = run(&params, &v).unwrap();
        assert!(result.kept);
        let j = 3usize;
        let psi0 = StateVector::single_mode(20, j);
        let t_window = 200.0;
        let n_samp = 2048;
        let dt = t_window / n_samp as f64;
        let t_grid: Vec<f64> = (0..n_samp).map(|i| i as f64 * dt).collect();
        let traj = evolve_original(
            &result.u_fourier,
            &result.lambda_inf,
            &psi0,
            &t_grid,
            &result.omega,
            1e-8,
        )
        .unwrap();
        let series: Vec<Complex64> = traj.states.iter().map(|s| s.coeffs[j - 1]).collect();
        let lam_j = result.lambda_inf[j - 1];
        let got = dominant_frequency(&series, dt, lam_j - 0.5, lam_j + 0.5, 4001);
        let resolution = std::f64::consts::TAU / t_window;
        assert!(
            (got - lam_j).abs() <= resolution,
            "peak {got} vs lambda_inf {lam_j} (resolution {resolution})"
        );
    }

    #[test]
    fn dominant_frequency_of_pure_phase() {
        let f_true = 5.0;
        let dt = 0.05;
        let samples: Vec<Complex64> = (0..512)
            .map(|i| Complex64::new(0.0, -f_true * dt * i as f64).exp())
            .collect();
        let got = dominant_frequency(&samples, dt, 4.0, 6.0, 2001);
        assert!((got - f_true).abs() < 0.05, "got {got}");
    }
}
