//! Computable checks of the uniqueness theory and of the forward solver,
//! reported as named pass/fail properties.
//!
//! One incident wave: shifting the surface by `l` multiplies the far field
//! by `exp(ik l (sin theta - cos t))`, so intensities cannot locate it.
//! Two waves: intensities are unchanged only for shifts on the lattice
//! `2 pi n / (k (sin theta_1 - sin theta_2))`.

use std::f64::consts::PI;

use crate::forward::{eval_far_field, eval_near_field, eval_scattered, solve_scattering, SolverSettings};
use crate::geometry::SurfaceProfile;
use crate::synth::far_grid;
use crate::waves::{reflected, IncidentConfig};
use crate::{Complex64, Error, Point, Result};

/// Outcome of one property check.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyReport {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// Threshold the value was compared against; see `name` for the sense.
    pub threshold: f64,
    pub detail: String,
}

impl PropertyReport {
    fn at_most(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        PropertyReport {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
            detail,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        PropertyReport {
            name: name.into(),
            passed: value >= threshold,
            value,
            threshold,
            detail,
        }
    }

    fn within(name: &str, value: f64, lo: f64, hi: f64, detail: String) -> Self {
        PropertyReport {
            name: name.into(),
            passed: value >= lo && value <= hi,
            value,
            threshold: hi,
            detail: format!("{detail}, accepted range [{lo}, {hi}]"),
        }
    }

    /// `name, PASS|FAIL, value, threshold, detail`.
    pub fn line(&self) -> String {
        format!(
            "{}, {}, {:.6e}, {:.6e}, {}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.value,
            self.threshold,
            self.detail
        )
    }
}

/// Parameters of the property suite.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifySettings {
    pub profile: SurfaceProfile,
    pub k: f64,
    /// Incidence angle for the one-wave checks.
    pub theta: f64,
    /// Angle pair for the lattice checks.
    pub pair: [f64; 2],
    pub shift: f64,
    pub n_f: usize,
    /// Solver for translation checks; its radius must hold both surfaces.
    pub settings: SolverSettings,
    /// Solver for the lattice checks, usually with a larger radius since the
    /// lattice shift is long.
    pub lattice_settings: SolverSettings,
    pub flat_wavenumbers: Vec<f64>,
}

impl Default for VerifySettings {
    fn default() -> Self {
        let fine = SolverSettings {
            min_nodes: 256,
            ..SolverSettings::default()
        };
        VerifySettings {
            profile: SurfaceProfile::Example1,
            k: 5.0,
            theta: -PI / 6.0,
            pair: [-PI / 6.0, PI / 6.0],
            shift: 0.3,
            n_f: 200,
            lattice_settings: SolverSettings {
                radius: 2.5,
                min_nodes: 768,
                ..fine.clone()
            },
            settings: fine,
            flat_wavenumbers: vec![1.0, 5.0, 10.0],
        }
    }
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn intensity_deviation(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = a.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.norm_sqr() - y.norm_sqr()).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Largest `|u^inf|` and largest `|u^near - u^r|` for the flat surface.
pub fn flat_null(k: f64, theta: f64, settings: &SolverSettings) -> Result<(f64, f64)> {
    let cfg = IncidentConfig::single(k, theta)?;
    let sol = solve_scattering(&SurfaceProfile::Flat, &cfg, settings)?;
    let far = max_norm(&eval_far_field(&sol, &far_grid(200)?));
    let near = eval_near_field(&sol, &cfg, 1.0, 1.0, 200)?;
    let pts = crate::forward::segment_points(1.0, 1.0, 200);
    let dev = near
        .iter()
        .zip(&pts)
        .map(|(u, x)| (u - reflected(&cfg, x)).norm())
        .fold(0.0, f64::max);
    Ok((far, dev))
}

/// Far fields of `profile` and of its shift by `shift`, at the same angles.
pub fn shifted_far_fields(
    profile: &SurfaceProfile,
    shift: f64,
    cfg: &IncidentConfig,
    angles: &[f64],
    settings: &SolverSettings,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let base = solve_scattering(profile, cfg, settings)?;
    let moved = solve_scattering(&profile.clone().shifted(shift), cfg, settings)?;
    Ok((eval_far_field(&base, angles), eval_far_field(&moved, angles)))
}

/// `max |u_l^inf - exp(ik l (sin theta - cos t)) u^inf| / max |u^inf|` for
/// one incident wave.
pub fn translation_phase_error(
    profile: &SurfaceProfile,
    shift: f64,
    cfg: &IncidentConfig,
    angles: &[f64],
    settings: &SolverSettings,
) -> Result<f64> {
    if cfg.angles().len() != 1 {
        return Err(Error::Config(
            "the translation relation needs a single incident wave".into(),
        ));
    }
    let (base, moved) = shifted_far_fields(profile, shift, cfg, angles, settings)?;
    let st = cfg.angles()[0].sin();
    let k = cfg.k();
    let err = angles
        .iter()
        .zip(base.iter().zip(&moved))
        .map(|(t, (u, v))| (v - Complex64::from_polar(1.0, k * shift * (st - t.cos())) * u).norm())
        .fold(0.0, f64::max);
    Ok(err / max_norm(&base))
}

/// Shortest nonzero shift leaving two-wave intensities invariant.
pub fn lattice_shift(k: f64, pair: [f64; 2]) -> Result<f64> {
    let ds = pair[0].sin() - pair[1].sin();
    if ds == 0.0 || !(k > 0.0) {
        return Err(Error::Config("lattice shift needs k > 0 and distinct angles".into()));
    }
    Ok(2.0 * PI / (k * ds))
}

/// `max | |u_l^inf|^2 - |u^inf|^2 | / max |u^inf|^2`.
pub fn intensity_shift_deviation(
    profile: &SurfaceProfile,
    shift: f64,
    cfg: &IncidentConfig,
    angles: &[f64],
    settings: &SolverSettings,
) -> Result<f64> {
    let (base, moved) = shifted_far_fields(profile, shift, cfg, angles, settings)?;
    Ok(intensity_deviation(&base, &moved))
}

/// `|sqrt(r) exp(-ikr) u^s(r xhat) - u^inf(xhat)|` at each radius.
pub fn far_field_remainders(
    profile: &SurfaceProfile,
    cfg: &IncidentConfig,
    angle: f64,
    radii: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<f64>> {
    let sol = solve_scattering(profile, cfg, settings)?;
    let pattern = eval_far_field(&sol, &[angle])[0];
    let xhat = Point::new(angle.cos(), angle.sin());
    radii
        .iter()
        .map(|&r| {
            let us = eval_scattered(&sol, &(xhat * r))?;
            Ok((r.sqrt() * Complex64::from_polar(1.0, -cfg.k() * r) * us - pattern).norm())
        })
        .collect()
}

/// Runs every property with the given parameters.
pub fn run_suite(v: &VerifySettings) -> Result<Vec<PropertyReport>> {
    let mut out = Vec::new();
    let angles = far_grid(v.n_f)?;

    for &k in &v.flat_wavenumbers {
        let (far, near) = flat_null(k, v.theta, &v.settings)?;
        out.push(PropertyReport::at_most(
            "flat-far-field-vanishes",
            far,
            1e-8,
            format!("k = {k}"),
        ));
        out.push(PropertyReport::at_most(
            "flat-near-field-is-reflected-wave",
            near,
            1e-8,
            format!("k = {k}"),
        ));
    }

    let one = IncidentConfig::single(v.k, v.theta)?;
    let (base, moved) = shifted_far_fields(&v.profile, v.shift, &one, &angles, &v.settings)?;
    let st = v.theta.sin();
    let phase_err = angles
        .iter()
        .zip(base.iter().zip(&moved))
        .map(|(t, (u, w))| (w - Complex64::from_polar(1.0, v.k * v.shift * (st - t.cos())) * u).norm())
        .fold(0.0, f64::max)
        / max_norm(&base);
    out.push(PropertyReport::at_most(
        "one-wave-shift-phase-relation",
        phase_err,
        1e-6,
        format!("k = {}, shift = {}", v.k, v.shift),
    ));
    out.push(PropertyReport::at_most(
        "one-wave-shift-intensity-invariance",
        intensity_deviation(&base, &moved),
        1e-6,
        format!("k = {}, shift = {}", v.k, v.shift),
    ));

    let two = IncidentConfig::new(v.k, v.pair.to_vec())?;
    let ell = lattice_shift(v.k, v.pair)?;
    let far_of = |p: &SurfaceProfile| -> Result<Vec<Complex64>> {
        Ok(eval_far_field(
            &solve_scattering(p, &two, &v.lattice_settings)?,
            &angles,
        ))
    };
    let base = far_of(&v.profile)?;
    let on = intensity_deviation(&base, &far_of(&v.profile.clone().shifted(ell))?);
    out.push(PropertyReport::at_most(
        "two-wave-lattice-shift-invariance",
        on,
        1e-6,
        format!("k = {}, shift = {ell:.6}", v.k),
    ));
    let off = intensity_deviation(&base, &far_of(&v.profile.clone().shifted(0.5 * ell))?);
    out.push(PropertyReport::at_least(
        "two-wave-half-lattice-shift-detected",
        off,
        1e-3,
        format!("k = {}, shift = {:.6}", v.k, 0.5 * ell),
    ));

    let rem = far_field_remainders(&v.profile, &one, PI / 3.0, &[1e3, 2e3], &v.settings)?;
    out.push(PropertyReport::within(
        "far-field-remainder-halves",
        rem[0] / rem[1],
        1.6,
        2.4,
        format!("remainders {:.3e} at r = 1e3, {:.3e} at r = 2e3", rem[0], rem[1]),
    ));
    Ok(out)
}
