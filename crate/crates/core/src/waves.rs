//! Downward plane waves and their mirror images in the plane `x2 = 0`.

use std::f64::consts::FRAC_PI_2;

use crate::{Complex64, Error, Point, Result};

/// Wavenumber plus one or two incidence angles `theta` in `(-pi/2, pi/2)`.
/// The direction of travel is `d = (sin theta, -cos theta)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IncidentConfig {
    k: f64,
    angles: Vec<f64>,
}

impl IncidentConfig {
    pub fn new(k: f64, angles: Vec<f64>) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Config(format!("wavenumber must be positive, got {k}")));
        }
        if angles.is_empty() || angles.len() > 2 {
            return Err(Error::Config(format!(
                "expected one or two incidence angles, got {}",
                angles.len()
            )));
        }
        if let Some(a) = angles.iter().find(|a| !(a.abs() < FRAC_PI_2)) {
            return Err(Error::Config(format!("incidence angle {a} outside (-pi/2, pi/2)")));
        }
        if angles.len() == 2 && angles[0] == angles[1] {
            return Err(Error::Config("the two incidence angles must differ".into()));
        }
        Ok(IncidentConfig { k, angles })
    }

    pub fn single(k: f64, angle: f64) -> Result<Self> {
        Self::new(k, vec![angle])
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Same directions at another wavenumber.
    pub fn with_k(&self, k: f64) -> Result<Self> {
        Self::new(k, self.angles.clone())
    }

    /// Unit propagation directions `d_l`.
    pub fn directions(&self) -> Vec<Point> {
        self.angles.iter().map(|t| Point::new(t.sin(), -t.cos())).collect()
    }
}

fn plane_pair(k: f64, theta: f64, x: &Point) -> (Complex64, Complex64) {
    let (s, c) = theta.sin_cos();
    let down = Complex64::from_polar(1.0, k * (s * x.x - c * x.y));
    let up = Complex64::from_polar(1.0, k * (s * x.x + c * x.y));
    (down, up)
}

/// `u^i + u^r = sum_l [exp(ik d_l.x) - exp(ik d_l'.x)]` with the reflected
/// direction `d_l' = (sin theta_l, cos theta_l)`.
pub fn incident_plus_reflected(cfg: &IncidentConfig, x: &Point) -> Complex64 {
    cfg.angles
        .iter()
        .map(|&t| {
            let (down, up) = plane_pair(cfg.k, t, x);
            down - up
        })
        .sum()
}

/// The incident part `u^i = sum_l exp(ik d_l.x)` alone.
pub fn incident(cfg: &IncidentConfig, x: &Point) -> Complex64 {
    cfg.angles.iter().map(|&t| plane_pair(cfg.k, t, x).0).sum()
}

/// The reflected part `u^r = -sum_l exp(ik d_l'.x)` alone.
pub fn reflected(cfg: &IncidentConfig, x: &Point) -> Complex64 {
    -cfg.angles.iter().map(|&t| plane_pair(cfg.k, t, x).1).sum::<Complex64>()
}

/// Analytic gradient of [`incident_plus_reflected`].
pub fn grad_incident_plus_reflected(cfg: &IncidentConfig, x: &Point) -> [Complex64; 2] {
    let ik = Complex64::new(0.0, cfg.k);
    let mut g = [Complex64::new(0.0, 0.0); 2];
    for &t in &cfg.angles {
        let (s, c) = t.sin_cos();
        let (down, up) = plane_pair(cfg.k, t, x);
        g[0] += ik * s * (down - up);
        g[1] += ik * (-c * down - c * up);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_6, PI};

    fn c_close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn vanishes_on_axis() {
        let cfg = IncidentConfig::new(3.7, vec![-0.4, 1.1]).unwrap();
        for i in 0..20 {
            let x = Point::new(-5.0 + i as f64 * 0.51, 0.0);
            assert!(incident_plus_reflected(&cfg, &x).norm() < 1e-14);
            assert!(grad_incident_plus_reflected(&cfg, &x)[0].norm() < 1e-13);
        }
    }

    #[test]
    fn normal_incidence_values() {
        let cfg = IncidentConfig::single(PI, 0.0).unwrap();
        assert!(incident_plus_reflected(&cfg, &Point::new(0.0, 1.0)).norm() < 1e-15);
        let v = incident_plus_reflected(&cfg, &Point::new(0.0, 0.5));
        assert!(c_close(v, Complex64::new(0.0, -2.0), 1e-15));
        let g = grad_incident_plus_reflected(&IncidentConfig::single(1.0, 0.0).unwrap(), &Point::zeros());
        assert!(c_close(g[1], Complex64::new(0.0, -2.0), 1e-15));
        assert!(g[0].norm() < 1e-15);
    }

    #[test]
    fn flat_normal_derivative_on_axis() {
        let (k, th) = (2.3, -FRAC_PI_6);
        let cfg = IncidentConfig::single(k, th).unwrap();
        for x1 in [-0.7, 0.0, 0.4] {
            let g = grad_incident_plus_reflected(&cfg, &Point::new(x1, 0.0));
            let expected = Complex64::new(0.0, -2.0 * k * th.cos()) * Complex64::from_polar(1.0, k * x1 * th.sin());
            assert!(c_close(g[1], expected, 1e-14));
        }
    }

    #[test]
    fn helmholtz_residual() {
        let cfg = IncidentConfig::new(4.0, vec![-FRAC_PI_6, FRAC_PI_6]).unwrap();
        let (x, h) = (Point::new(0.3, 0.7), 1e-3);
        let u = |p: Point| incident_plus_reflected(&cfg, &p);
        let lap = (u(x + Point::new(h, 0.0))
            + u(x - Point::new(h, 0.0))
            + u(x + Point::new(0.0, h))
            + u(x - Point::new(0.0, h))
            - u(x) * 4.0)
            / (h * h);
        assert!((lap + u(x) * 16.0).norm() < 1e-4);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = IncidentConfig::new(5.0, vec![-0.3, 0.9]).unwrap();
        let e = 1e-6;
        for x in [Point::new(0.1, 0.2), Point::new(-1.3, 0.8), Point::new(0.6, -0.4)] {
            let g = grad_incident_plus_reflected(&cfg, &x);
            for (d, dir) in [Point::new(e, 0.0), Point::new(0.0, e)].iter().enumerate() {
                let fd =
                    (incident_plus_reflected(&cfg, &(x + dir)) - incident_plus_reflected(&cfg, &(x - dir))) / (2.0 * e);
                assert!(c_close(fd, g[d], 1e-6));
            }
        }
    }

    #[test]
    fn reflected_part_has_unit_modulus() {
        let cfg = IncidentConfig::single(7.0, 0.4).unwrap();
        for i in 0..10 {
            let x = Point::new(-1.0 + 0.2 * i as f64, 1.0);
            assert_abs_diff_eq!(reflected(&cfg, &x).norm(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(IncidentConfig::new(0.0, vec![0.1]).is_err());
        assert!(IncidentConfig::new(1.0, vec![]).is_err());
        assert!(IncidentConfig::new(1.0, vec![0.1, 0.2, 0.3]).is_err());
        assert!(IncidentConfig::new(1.0, vec![FRAC_PI_2]).is_err());
        assert!(IncidentConfig::new(1.0, vec![0.2, 0.2]).is_err());
    }

    #[test]
    fn directions_point_downward() {
        let cfg = IncidentConfig::new(1.0, vec![-1.2, 0.7]).unwrap();
        for d in cfg.directions() {
            assert_abs_diff_eq!(d.norm(), 1.0, epsilon = 1e-15);
            assert!(d.y < 0.0);
        }
    }

    proptest! {
        #[test]
        fn translation_identity(ell in -3.0f64..3.0, x1 in -2.0f64..2.0, x2 in -1.0f64..2.0, th in -1.5f64..1.5) {
            // incident wave alone: u^i(x) = e^{ik ell sin theta} u^i(x - (ell, 0))
            let k = 2.7;
            let cfg = IncidentConfig::single(k, th).unwrap();
            let ui = |p: Point| incident(&cfg, &p);
            let x = Point::new(x1, x2);
            let lhs = ui(x);
            let rhs = Complex64::from_polar(1.0, k * ell * th.sin()) * ui(x - Point::new(ell, 0.0));
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
