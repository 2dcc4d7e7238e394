//! End-to-end acceptance gates. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::{FRAC_PI_6, PI};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rough_imager::forward::{assemble_rhs, assemble_system, eval_far_field, solve_density, RhsSource, SolverSettings};
use rough_imager::geometry::{build_mesh, SplineBasis, SurfaceProfile};
use rough_imager::inversion::{
    lm_step, recursive_newton, window_guess, Flag, ForwardState, InversionConfig, InversionState,
};
use rough_imager::synth::{far_grid, make_dataset, Grid, NoiseDistribution, NoiseSpec};
use rough_imager::verification::{
    far_field_remainders, flat_null, intensity_shift_deviation, lattice_shift, translation_phase_error,
};
use rough_imager::waves::IncidentConfig;
use rough_imager::Complex64;

type Check = Result<(bool, String), String>;

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn flat_surface_null() -> Check {
    let settings = SolverSettings::default();
    let mut worst: (f64, f64) = (0.0, 0.0);
    for k in [1.0, 5.0, 10.0] {
        for theta in [-FRAC_PI_6, 0.0, 1.2] {
            let (far, near) = flat_null(k, theta, &settings).map_err(e)?;
            worst = (worst.0.max(far), worst.1.max(near));
        }
    }
    Ok((
        worst.0 <= 1e-8 && worst.1 <= 1e-8,
        format!("max |u^inf| = {:.2e}, max |u^near - u^r| = {:.2e}", worst.0, worst.1),
    ))
}

fn far_field(
    profile: &SurfaceProfile,
    cfg: &IncidentConfig,
    n: usize,
    angles: &[f64],
) -> Result<Vec<Complex64>, String> {
    let mesh = build_mesh(profile, 1.0, n, 8).map_err(e)?;
    let op = assemble_system(&mesh, cfg.k(), cfg.k().max(1.0)).map_err(e)?;
    let g = assemble_rhs(&mesh, RhsSource::Incident(cfg)).map_err(e)?;
    let sol = solve_density(&op, &g).map_err(e)?;
    Ok(eval_far_field(&sol, angles))
}

fn self_convergence() -> Check {
    let cfg = IncidentConfig::single(5.0, -FRAC_PI_6).map_err(e)?;
    let angles = far_grid(200).map_err(e)?;
    let coarse = far_field(&SurfaceProfile::Example1, &cfg, 128, &angles)?;
    let fine = far_field(&SurfaceProfile::Example1, &cfg, 256, &angles)?;
    let diff = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok((diff < 1e-6, format!("max |u^inf_128 - u^inf_256| = {diff:.2e}")))
}

fn fine_settings() -> SolverSettings {
    SolverSettings {
        min_nodes: 256,
        ..SolverSettings::default()
    }
}

fn translation_invariance() -> Check {
    let cfg = IncidentConfig::single(5.0, -FRAC_PI_6).map_err(e)?;
    let angles = far_grid(200).map_err(e)?;
    let s = fine_settings();
    let phase = translation_phase_error(&SurfaceProfile::Example1, 0.3, &cfg, &angles, &s).map_err(e)?;
    let intensity = intensity_shift_deviation(&SurfaceProfile::Example1, 0.3, &cfg, &angles, &s).map_err(e)?;
    Ok((
        phase <= 1e-6 && intensity <= 1e-6,
        format!("phase relation error {phase:.2e}, intensity deviation {intensity:.2e}"),
    ))
}

fn lattice_invariance() -> Check {
    let pair = [-FRAC_PI_6, FRAC_PI_6];
    let cfg = IncidentConfig::new(5.0, pair.to_vec()).map_err(e)?;
    let angles = far_grid(200).map_err(e)?;
    // the lattice shift is -2 pi / 5, so the disc must hold h(x + 1.26)
    let s = SolverSettings {
        radius: 2.5,
        min_nodes: 768,
        ..SolverSettings::default()
    };
    let ell = lattice_shift(5.0, pair).map_err(e)?;
    let on = intensity_shift_deviation(&SurfaceProfile::Example1, ell, &cfg, &angles, &s).map_err(e)?;
    let off = intensity_shift_deviation(&SurfaceProfile::Example1, 0.5 * ell, &cfg, &angles, &s).map_err(e)?;
    // measured value of the half-shift deviation, kept as a regression pin
    const HALF_SHIFT_DEVIATION: f64 = 0.9782;
    Ok((
        (ell + 2.0 * PI / 5.0).abs() < 1e-14 && on <= 1e-6 && off > 1e-3 && (off - HALF_SHIFT_DEVIATION).abs() < 1e-3,
        format!("shift {ell:.6}: deviation {on:.2e}; half shift: deviation {off:.4e} (pinned {HALF_SHIFT_DEVIATION})"),
    ))
}

fn far_field_rate() -> Check {
    let cfg = IncidentConfig::single(5.0, -FRAC_PI_6).map_err(e)?;
    let mut worst: f64 = 0.0;
    let mut ratios = Vec::new();
    for angle in [PI / 6.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
        let rem =
            far_field_remainders(&SurfaceProfile::Example1, &cfg, angle, &[1e3, 2e3], &fine_settings()).map_err(e)?;
        let ratio = rem[0] / rem[1];
        worst = worst.max((ratio - 2.0).abs() / 2.0);
        ratios.push(format!("{ratio:.4}"));
    }
    Ok((
        worst <= 0.2,
        format!("remainder ratios r = 1e3 / 2e3: {}", ratios.join(", ")),
    ))
}

fn frechet_gate() -> Check {
    let basis = SplineBasis::new(10, 1.0).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let settings = fine_settings();
    let setups = [
        (
            IncidentConfig::new(3.0, vec![-FRAC_PI_6, FRAC_PI_6]).map_err(e)?,
            Grid::far(200).map_err(e)?,
        ),
        (
            IncidentConfig::single(3.0, -FRAC_PI_6).map_err(e)?,
            Grid::near(1.0, 1.0, 200).map_err(e)?,
        ),
    ];
    let epsilons = [1e-3, 1e-4, 1e-5];
    let mut worst_at = [0.0f64; 3];
    let mut ok = true;
    for (cfg, grid) in &setups {
        let base =
            ForwardState::new(&SurfaceProfile::Example1, std::slice::from_ref(cfg), grid, &settings).map_err(e)?;
        let jac = base.jacobian(&basis).map_err(e)?;
        for _ in 0..3 {
            let v: DVector<f64> = DVector::from_fn(10, |_, _| rng.gen_range(-1.0..1.0));
            let v = &v / v.norm();
            let analytic = &jac * &v;
            let map = |t: f64| -> Result<Vec<f64>, String> {
                let coeffs: Vec<f64> = (&v * t).iter().cloned().collect();
                let p = SurfaceProfile::Example1.plus(SurfaceProfile::spline(basis.clone(), coeffs).map_err(e)?);
                let fs = ForwardState::new(&p, std::slice::from_ref(cfg), grid, &settings).map_err(e)?;
                Ok(fs.intensities().swap_remove(0))
            };
            let mut fds = Vec::new();
            let mut errs = Vec::new();
            for eps in epsilons {
                let (plus, minus) = (map(eps)?, map(-eps)?);
                let fd =
                    DVector::from_iterator(plus.len(), plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * eps)));
                errs.push((&fd - &analytic).norm() / fd.norm());
                fds.push(fd);
            }
            // the quotients converge at second order in eps, so below 1e-3 the
            // mismatch sits at the discretisation floor
            let step1 = (&fds[0] - &fds[1]).norm();
            let step2 = (&fds[1] - &fds[2]).norm();
            ok &= errs.iter().all(|r| *r <= 5e-2) && step2 <= 0.05 * step1;
            for (w, r) in worst_at.iter_mut().zip(&errs) {
                *w = w.max(*r);
            }
        }
    }
    Ok((
        ok,
        format!(
            "worst relative error at eps = 1e-3, 1e-4, 1e-5: {:.3e}, {:.3e}, {:.3e}",
            worst_at[0], worst_at[1], worst_at[2]
        ),
    ))
}

fn beta_rule() -> Check {
    let scalar = lm_step(&DMatrix::from_element(1, 1, 1.0), &DVector::from_element(1, -1.0), 0.8).map_err(e)?;
    let scalar_ok = (scalar.beta - 4.0).abs() <= 1e-12 * 4.0 && (scalar.delta[0] - 0.2).abs() <= 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut all_reachable = true;
    for trial in 0..50 {
        let (m, n) = (40 + trial, 10);
        let j = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        // residual mostly inside the range of J so that 0.8 |r| is reachable
        let x = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let noise = DVector::from_fn(m, |_, _| rng.gen_range(-0.05..0.05));
        let r = &j * x + noise;
        let step = lm_step(&j, &r, 0.8).map_err(e)?;
        all_reachable &= !step.target_unreachable;
        // independent check through the SVD of J
        let svd = j.clone().svd(true, true);
        let u = svd.u.unwrap();
        let c = u.transpose() * &r;
        let perp2 = (r.norm_squared() - c.norm_squared()).max(0.0);
        let lin: f64 = svd
            .singular_values
            .iter()
            .zip(c.iter())
            .map(|(s, ci)| (step.beta * ci / (s * s + step.beta)).powi(2))
            .sum::<f64>()
            + perp2;
        let direct = (&r + &j * &step.delta).norm();
        let target = 0.8 * r.norm();
        worst = worst
            .max((lin.sqrt() - target).abs() / target)
            .max((direct - target).abs() / target);
    }
    Ok((
        scalar_ok && all_reachable && worst <= 1e-8,
        format!(
            "scalar beta = {:.15}, worst relative mismatch of |r + J delta| vs 0.8 |r| = {worst:.2e}",
            scalar.beta
        ),
    ))
}

fn max_profile_error(state: &InversionState, basis: &SplineBasis) -> Result<(f64, f64), String> {
    let rec = state.profile(basis).map_err(e)?;
    let mut worst: f64 = 0.0;
    let mut apex = (0.0, f64::NEG_INFINITY);
    for i in 0..=2000 {
        let x = -1.0 + i as f64 * 1e-3;
        let h = rec.eval(x, 0).map_err(e)?;
        worst = worst.max((h - SurfaceProfile::Example1.eval(x, 0).map_err(e)?).abs());
        if h > apex.1 {
            apex = (x, h);
        }
    }
    Ok((worst, apex.0))
}

fn desk_run(
    angles: Vec<Vec<f64>>,
    grid: Grid,
    initial: Vec<f64>,
    delta: f64,
) -> Result<(InversionState, SplineBasis), String> {
    let settings = SolverSettings::default();
    let noise = NoiseSpec {
        delta,
        seed: 1,
        distribution: NoiseDistribution::ClampedNormal,
    };
    let sets = make_dataset(
        &SurfaceProfile::Example1,
        "example1",
        &angles,
        &[1.0, 3.0, 5.0, 7.0],
        &grid,
        &noise,
        &settings.refined(1.5),
    )
    .map_err(e)?;
    let basis = SplineBasis::new(10, 1.0).map_err(e)?;
    let config = InversionConfig::new(basis.clone(), initial, delta);
    let state = recursive_newton(&sets, &config).map_err(e)?;
    Ok((state, basis))
}

fn reconstruction_gate(state: &InversionState, basis: &SplineBasis) -> Check {
    let (worst, apex) = max_profile_error(state, basis)?;
    Ok((
        worst <= 0.08 && (apex + 0.2).abs() <= 0.1,
        format!("max |h_rec - h| = {worst:.4}, apex at x1 = {apex:.3}"),
    ))
}

fn desk_far() -> Check {
    let (state, basis) = desk_run(
        vec![vec![-FRAC_PI_6, FRAC_PI_6]],
        Grid::far(200).map_err(e)?,
        window_guess(10, 2, 4, 0.1),
        0.01,
    )?;
    reconstruction_gate(&state, &basis)
}

fn desk_near() -> Check {
    let (state, basis) = desk_run(
        vec![vec![-FRAC_PI_6]],
        Grid::near(1.0, 1.0, 200).map_err(e)?,
        vec![0.0; 10],
        0.01,
    )?;
    reconstruction_gate(&state, &basis)
}

fn stopping_behaviour() -> Check {
    let (state, _) = desk_run(
        vec![vec![-FRAC_PI_6, FRAC_PI_6]],
        Grid::far(200).map_err(e)?,
        window_guess(10, 2, 4, 0.1),
        0.05,
    )?;
    let mut ok = state.checkpoints.len() == 4;
    let mut parts = Vec::new();
    for c in &state.checkpoints {
        let capped = c.flags.contains(&Flag::IterationCap);
        ok &= c.err < 0.075 || capped;
        parts.push(format!(
            "k = {}: {:.4}{}",
            c.k,
            c.err,
            if capped { " (cap)" } else { "" }
        ));
    }
    let last = state.checkpoints.last().map_or(f64::INFINITY, |c| c.err);
    ok &= last < 0.075;
    Ok((ok, format!("Err_k per stage: {}", parts.join(", "))))
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Check)> = vec![
        (
            "flat surface gives no scattered field",
            Duration::from_secs(10),
            flat_surface_null,
        ),
        (
            "far field self-convergence n = 128 vs 256",
            Duration::from_secs(30),
            self_convergence,
        ),
        ("one-wave translation invariance", Duration::MAX, translation_invariance),
        (
            "two-wave lattice invariance and breaking",
            Duration::MAX,
            lattice_invariance,
        ),
        ("far-field remainder decays like 1/r", Duration::MAX, far_field_rate),
        ("Jacobian matches central differences", Duration::MAX, frechet_gate),
        ("damping parameter rule", Duration::MAX, beta_rule),
        (
            "desk-scale far-field reconstruction",
            Duration::from_secs(900),
            desk_far,
        ),
        (
            "desk-scale near-field reconstruction",
            Duration::from_secs(900),
            desk_near,
        ),
        ("stopping rule at 5% noise", Duration::MAX, stopping_behaviour),
    ];
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (passed, detail) = match outcome {
            Ok((p, d)) => (p, d),
            Err(msg) => (false, format!("error: {msg}")),
        };
        let in_time = elapsed <= budget;
        let passed = passed && in_time;
        if !passed {
            failures += 1;
        }
        let budget_note = if budget == Duration::MAX {
            String::new()
        } else {
            format!(", budget {}s", budget.as_secs())
        };
        println!(
            "criterion {:>2} {}: {name}: {detail} [{:.1}s{budget_note}]",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
