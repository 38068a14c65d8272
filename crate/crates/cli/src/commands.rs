//! The batch subcommands. Each one is deterministic given its
//! configuration (seeds included) and writes CSV/JSON under the output
//! directory. Exit codes: 0 success, 2 config error, 3 frequency
//! rejected by the resonance carving, 4 numerical-tolerance failure.

use crate::config::{InitialState, RunConfig};
use crate::output::{write_json, Csv, CsvCell};
use anyhow::Context;
use qho_kam::dynamics::{direct_integrate, evolve_original, StateVector, Trajectory};
use qho_kam::hermite::build_basis;
use qho_kam::homological::estimate_excluded_measure;
use qho_kam::kam::{self, build_schedule, carve_kappa, nu1, KamResult};
use qho_kam::matrix_spaces::fmt_f64;
use qho_kam::perturbation::{decay_report, fourier_p, save_fourier};
use qho_kam::sampler::OmegaSampler;
use qho_kam::TruncMatrix;
use serde::Serialize;
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_REJECTED: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub fn cmd_perturbation(cfg: &RunConfig, out: &Path, strict: bool) -> anyhow::Result<i32> {
    let basis = build_basis(cfg.n_max, cfg.quad_size)?;
    let v = cfg.potential_spec();
    let spot = v.spot_check(101, 8);
    let k_max = cfg.k_max.or(v.k_support).unwrap_or(8);
    let pf = fourier_p(
        &basis,
        &v,
        k_max,
        cfg.oversample,
        strict || cfg.strict_aliasing,
    )?;
    save_fourier(&pf, cfg.alpha, &out.join("perturbation"))?;
    let report = decay_report(&pf, cfg.delta)?;
    #[derive(Serialize)]
    struct PerturbationReport<'a> {
        spot_check: &'a qho_kam::perturbation::SpotCheckReport,
        decay: &'a qho_kam::perturbation::DecayReport,
    }
    write_json(
        &out.join("decay_report.json"),
        &PerturbationReport {
            spot_check: &spot,
            decay: &report,
        },
    )?;
    Ok(EXIT_OK)
}

/// Pick the frequency: the configured one, or the first sampler point
/// accepted by the step-0 carving.
fn resolve_omega(cfg: &RunConfig) -> anyhow::Result<Vec<f64>> {
    if let Some(omega) = &cfg.omega {
        return Ok(omega.clone());
    }
    let schedule = build_schedule(cfg.eps.clamp(1e-300, 0.999), cfg.sigma0, cfg.m_max)?;
    let gamma = kam::effective_gamma(&schedule, 0, cfg.n_freq, cfg.alpha, cfg.gamma);
    let kappa = carve_kappa(gamma, cfg.alpha);
    let a = TruncMatrix::oscillator_diagonal(16);
    let sampler = OmegaSampler::new(cfg.n_freq.max(1), cfg.seed);
    for idx in 0..4096u64 {
        let omega = sampler.point(idx);
        let scan = qho_kam::homological::carve_resonances(
            &a,
            &omega,
            kappa,
            schedule.k_cut[1],
            2.0 * cfg.eps,
            gamma,
            cfg.alpha,
        )?;
        if scan.kept {
            return Ok(omega);
        }
    }
    anyhow::bail!("no sampler frequency passed the step-0 carving in 4096 attempts")
}

fn write_kam_outputs(result: &KamResult, cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let mut log = Csv::new(&[
        "m",
        "eps_m",
        "kappa_m",
        "k_cut_m",
        "gamma_carve",
        "kappa_carve",
        "op_norm",
        "comm_norm",
        "alpha_norm",
        "delta_alpha_norm",
        "delta_comm_alpha_norm",
        "alpha_hat",
        "alpha_hat_plus",
        "a_tilde_norm",
        "residual_rel",
        "min_divisor",
        "homo_verify_ok",
    ]);
    for s in &result.steps {
        log.row(&[
            CsvCell::Int(s.m as i64),
            CsvCell::Float(s.eps_m),
            CsvCell::Float(s.kappa_m),
            CsvCell::Float(s.k_cut_m),
            CsvCell::Float(s.gamma_carve),
            CsvCell::Float(s.kappa_carve),
            CsvCell::Float(s.norms.op_norm),
            CsvCell::Float(s.norms.comm_norm),
            CsvCell::Float(s.norms.alpha_norm),
            CsvCell::Float(s.norms.delta_alpha_norm),
            CsvCell::Float(s.norms.delta_comm_alpha_norm),
            CsvCell::Float(s.norms.alpha_hat()),
            CsvCell::Float(s.norms.alpha_hat_plus()),
            CsvCell::Float(s.a_tilde_norm),
            CsvCell::Float(s.residual_rel),
            CsvCell::Float(s.min_divisor),
            CsvCell::Int(i64::from(s.homo_verify_ok)),
        ]);
    }
    log.write_to(&out.join("step_log.csv"))?;

    let mut lam = Csv::new(&["i", "lambda_unperturbed", "lambda_inf", "drift"]);
    for (i, l) in result.lambda_inf.iter().enumerate() {
        let l0 = (2 * (i + 1) - 1) as f64;
        lam.row(&[
            CsvCell::Int((i + 1) as i64),
            CsvCell::Float(l0),
            CsvCell::Float(*l),
            CsvCell::Float(l - l0),
        ]);
    }
    lam.write_to(&out.join("lambda_inf.csv"))?;
    save_fourier(&result.u_fourier, cfg.alpha, &out.join("u_fourier"))?;
    write_json(&out.join("kam_summary.json"), result)?;
    Ok(())
}

pub fn cmd_kam(cfg: &RunConfig, out: &Path) -> anyhow::Result<i32> {
    let mut params = cfg.kam_params_with_omega(resolve_omega(cfg)?);
    let v = cfg.potential_spec();
    let result = kam::run(&params, &v)?;
    write_kam_outputs(&result, cfg, out)?;
    if !result.kept {
        if let Some(scan) = &result.rejection {
            if let Some(first) = scan.violations.first() {
                eprintln!(
                    "frequency rejected: divisor {} at k={:?}, i={}, j={} below kappa={}",
                    fmt_f64(first.value),
                    first.k,
                    first.i,
                    first.j,
                    fmt_f64(scan.kappa)
                );
            } else {
                eprintln!(
                    "frequency rejected by the Melnikov condition at K={}",
                    scan.k_cut
                );
            }
        }
        return Ok(EXIT_REJECTED);
    }
    if cfg.omega_stencil {
        // central finite-difference diagnostic for the ω-derivative of
        // the limit spectrum (2-point stencil, h = 1e-5 per component)
        let h = 1e-5;
        let base_omega = params.omega.clone();
        let mut stencil = Csv::new(&["i", "component", "dlambda_domega"]);
        for d in 0..base_omega.len() {
            let mut plus = base_omega.clone();
            plus[d] += h;
            let mut minus = base_omega.clone();
            minus[d] -= h;
            params.omega = plus;
            let rp = kam::run(&params, &v)?;
            params.omega = minus;
            let rm = kam::run(&params, &v)?;
            if !(rp.kept && rm.kept) {
                eprintln!("omega stencil point rejected; derivative column skipped");
                continue;
            }
            for i in 0..cfg.n_max {
                stencil.row(&[
                    CsvCell::Int((i + 1) as i64),
                    CsvCell::Int(d as i64),
                    CsvCell::Float((rp.lambda_inf[i] - rm.lambda_inf[i]) / (2.0 * h)),
                ]);
            }
        }
        params.omega = base_omega;
        stencil.write_to(&out.join("lambda_domega.csv"))?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_measure(cfg: &RunConfig, out: &Path, seed: u64) -> anyhow::Result<i32> {
    if cfg.n_freq == 0 {
        anyhow::bail!("measure scans need a θ-dependent potential (n_freq >= 1)");
    }
    if !cfg.measure_eps_grid.is_empty() {
        let rows = kam::measure_scan(
            cfg.n_freq,
            cfg.alpha,
            &cfg.measure_eps_grid,
            cfg.sigma0,
            cfg.m_max,
            cfg.gamma,
            cfg.measure_n_samples,
            seed,
        )?;
        let mut csv = Csv::new(&[
            "eps",
            "m",
            "gamma",
            "kappa_carve",
            "k_cut",
            "fraction_step",
            "fraction_cum",
            "fraction_cum_global_k",
        ]);
        for r in &rows {
            csv.row(&[
                CsvCell::Float(r.eps),
                CsvCell::Int(r.m as i64),
                CsvCell::Float(r.gamma),
                CsvCell::Float(r.kappa_carve),
                CsvCell::Float(r.k_cut),
                CsvCell::Float(r.fraction_step),
                CsvCell::Float(r.fraction_cum),
                CsvCell::Float(r.fraction_cum_global_k),
            ]);
        }
        csv.write_to(&out.join("measure_scan.csv"))?;
        return Ok(EXIT_OK);
    }
    let grid = if cfg.measure_kappa_grid.is_empty() {
        vec![1e-8, 1e-6, 1e-4]
    } else {
        cfg.measure_kappa_grid.clone()
    };
    let a = TruncMatrix::oscillator_diagonal(16);
    let mut csv = Csv::new(&[
        "kappa",
        "k_cut",
        "gamma",
        "fraction",
        "carve_fraction",
        "melnikov_fraction",
    ]);
    for &kappa in &grid {
        let gamma = kappa.powf(nu1(cfg.alpha)).clamp(1e-9, 0.2499);
        let est = estimate_excluded_measure(
            &a,
            cfg.n_freq,
            kappa,
            cfg.measure_k_cut,
            2.0 * cfg.eps,
            gamma,
            cfg.alpha,
            cfg.measure_n_samples,
            seed,
        )?;
        csv.row(&[
            CsvCell::Float(kappa),
            CsvCell::Float(cfg.measure_k_cut),
            CsvCell::Float(gamma),
            CsvCell::Float(est.fraction),
            CsvCell::Float(est.carve_fraction),
            CsvCell::Float(est.melnikov_fraction),
        ]);
    }
    csv.write_to(&out.join("measure_scan.csv"))?;
    Ok(EXIT_OK)
}

pub fn cmd_verify(seed: u64, out: &Path) -> anyhow::Result<i32> {
    let report = qho_kam::verify::run_all(seed);
    write_json(&out.join("verify_report.json"), &report)?;
    if report.pass {
        Ok(EXIT_OK)
    } else {
        eprintln!("verification failed; see verify_report.json");
        Ok(EXIT_NUMERICAL)
    }
}

fn initial_state(cfg: &RunConfig) -> StateVector {
    match cfg.evolve_initial {
        InitialState::Gaussian => StateVector::gaussian_profile(cfg.n_max, 6.0),
        InitialState::Rough => StateVector::rough_profile(cfg.n_max),
        InitialState::SingleMode(i) => StateVector::single_mode(cfg.n_max, i),
    }
}

pub fn cmd_evolve(cfg: &RunConfig, out: &Path) -> anyhow::Result<i32> {
    let params = cfg.kam_params_with_omega(resolve_omega(cfg)?);
    let v = cfg.potential_spec();
    let result = kam::run(&params, &v).context("kam run for evolution")?;
    if !result.kept {
        eprintln!("frequency rejected; no evolution performed");
        return Ok(EXIT_REJECTED);
    }
    let psi0 = initial_state(cfg);
    let t_grid: Vec<f64> = (0..cfg.evolve_n_times)
        .map(|i| cfg.evolve_t_max * i as f64 / (cfg.evolve_n_times - 1) as f64)
        .collect();
    let traj = evolve_original(
        &result.u_fourier,
        &result.lambda_inf,
        &psi0,
        &t_grid,
        &params.omega,
        1e-8,
    )?;
    let cross: Option<Trajectory> = if cfg.evolve_cross_check {
        let basis = build_basis(cfg.n_max, cfg.quad_size)?;
        let dt = cfg
            .evolve_dt
            .unwrap_or(0.4 / (2.0 * cfg.n_max as f64 - 1.0));
        Some(direct_integrate(
            &basis,
            &v,
            &params.omega,
            cfg.eps,
            &psi0,
            &t_grid,
            dt,
        )?)
    } else {
        None
    };
    let mut header = vec![
        "t".to_string(),
        "norm_p0".to_string(),
        "norm_p1".to_string(),
        "norm_p2".to_string(),
    ];
    for i in 1..=8 {
        header.push(format!("re_{i}"));
        header.push(format!("im_{i}"));
    }
    if cross.is_some() {
        header.push("cross_check_l2_dist".to_string());
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header_refs);
    for (idx, &t) in traj.times.iter().enumerate() {
        let mut cells = vec![
            CsvCell::Float(t),
            CsvCell::Float(traj.norms[idx][0]),
            CsvCell::Float(traj.norms[idx][1]),
            CsvCell::Float(traj.norms[idx][2]),
        ];
        for i in 0..8 {
            let z = traj.states[idx].coeffs[i];
            cells.push(CsvCell::Float(z.re));
            cells.push(CsvCell::Float(z.im));
        }
        if let Some(direct) = &cross {
            let dist = (&traj.states[idx].coeffs - &direct.states[idx].coeffs).norm();
            cells.push(CsvCell::Float(dist));
        }
        csv.row(&cells);
    }
    csv.write_to(&out.join("trajectory.csv"))?;
    Ok(EXIT_OK)
}
