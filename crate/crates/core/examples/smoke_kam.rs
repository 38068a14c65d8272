// scratch: flagship run timing + contraction check
use qho_kam::kam::{run, KamParams};
use qho_kam::perturbation::PotentialSpec;
use std::time::Instant;

fn main() {
    let omega = 0.323379783225f64;
    let params = KamParams::flagship(1e-3, vec![omega]);
    let v = PotentialSpec::cos_x_minus_theta(0.1, 2.0);
    let t0 = Instant::now();
    let result = run(&params, &v).unwrap();
    println!(
        "run took {:.1} s, kept = {}",
        t0.elapsed().as_secs_f64(),
        result.kept
    );
    for s in &result.steps {
        println!(
            "m={} eps_m={:.3e} alpha_hat(P_m)={:.3e} ratio={:.3} a_tilde={:.3e} resid={:.3e} min_div={:.3e} gamma={:.2e}",
            s.m, s.eps_m, s.norms.alpha_hat(), s.norms.alpha_hat() / s.eps_m,
            s.a_tilde_norm, s.residual_rel, s.min_divisor, s.gamma_carve
        );
    }
    let drift = result
        .lambda_inf
        .iter()
        .enumerate()
        .map(|(i, l)| (l - (2 * (i + 1) - 1) as f64).abs())
        .fold(0.0f64, f64::max);
    println!(
        "max lambda drift = {:.3e} (2 eps = {:.1e})",
        drift,
        2.0 * params.eps
    );
    println!(
        "P_final modes: {} (max order {})",
        result.p_final.n_modes(),
        result.p_final.max_mode_order()
    );
    println!(
        "U modes: {}, max order {}",
        result.u_fourier.n_modes(),
        result.u_fourier.max_mode_order()
    );
    for p in [0.0, 1.0, 2.0] {
        let mut worst = 0.0f64;
        for t in 0..8 {
            let theta = [std::f64::consts::TAU * t as f64 / 8.0];
            let u = result.u_fourier.resynthesize(&theta);
            let diff = u.sub(&qho_kam::TruncMatrix::identity(128));
            worst = worst.max(qho_kam::matrix_spaces::sobolev_op_norm(&diff, p).unwrap());
        }
        println!(
            "sup_theta |U - id|_(l2_{p}) = {:.4e}  (bound 4 eps^2/3 = {:.4e})",
            worst,
            4.0 * params.eps.powf(2.0 / 3.0)
        );
    }
}
