//! Bessel and Hankel functions of orders zero and one for real positive
//! arguments, and the free-space Green's function of the 2-D Helmholtz
//! equation.
//!
//! Three evaluation regimes are used:
//!
//! * `z <= 8`: ascending power series for `J0`, `J1`, `Y0`, `Y1`.
//! * `8 < z < 25`: Miller's backward recurrence for `J_n`, normalised with
//!   `J0 + 2 sum J_2k = 1`, and the Neumann series for `Y0`, `Y1`.
//! * `z >= 25`: Hankel's asymptotic expansion, truncated at its smallest
//!   term (which is below `1e-20` on this range).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::{Error, Point, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// Values of `J0, Y0, J1, Y1` at a common argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesselSet {
    pub j0: f64,
    pub y0: f64,
    pub j1: f64,
    pub y1: f64,
}

impl BesselSet {
    pub fn h0(&self) -> Complex64 {
        Complex64::new(self.j0, self.y0)
    }

    pub fn h1(&self) -> Complex64 {
        Complex64::new(self.j1, self.y1)
    }
}

/// Evaluates `J0, Y0, J1, Y1` at `z > 0`.
///
/// The caller is responsible for `z > 0`; use [`bessel_set`] for a checked
/// entry point.
pub(crate) fn bessel_set_unchecked(z: f64) -> BesselSet {
    if z <= SERIES_LIMIT {
        series(z)
    } else if z < ASYMPTOTIC_LIMIT {
        miller_neumann(z)
    } else {
        hankel_asymptotic(z)
    }
}

/// Checked evaluation of `J0, Y0, J1, Y1`.
pub fn bessel_set(z: f64) -> Result<BesselSet> {
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::Domain(format!(
            "Bessel functions of the second kind need z > 0, got {z}"
        )));
    }
    Ok(bessel_set_unchecked(z))
}

/// Hankel function of the first kind of order zero, `H0(z) = J0(z) + i Y0(z)`.
pub fn hankel1_0(z: f64) -> Result<Complex64> {
    bessel_set(z).map(|b| b.h0())
}

/// Hankel function of the first kind of order one, `H1(z) = J1(z) + i Y1(z)`.
pub fn hankel1_1(z: f64) -> Result<Complex64> {
    bessel_set(z).map(|b| b.h1())
}

fn series(z: f64) -> BesselSet {
    let q = -0.25 * z * z;
    let log_term = (0.5 * z).ln() + EULER_GAMMA;

    // J0 and the Y0 remainder share the term (-z^2/4)^k / (k!)^2.
    let mut t0 = 1.0;
    let mut j0 = 1.0;
    let mut y0_sum = 0.0;
    // J1 and the Y1 remainder share (z/2) (-z^2/4)^k / (k! (k+1)!).
    let mut t1 = 0.5 * z;
    let mut j1 = t1;
    let mut harmonic = 0.0;
    let mut y1_sum = t1; // k = 0 term: (H_0 + H_1) = 1
    for k in 1..60 {
        let kf = k as f64;
        harmonic += 1.0 / kf;
        t0 *= q / (kf * kf);
        t1 *= q / (kf * (kf + 1.0));
        j0 += t0;
        y0_sum += harmonic * t0;
        j1 += t1;
        y1_sum += (2.0 * harmonic + 1.0 / (kf + 1.0)) * t1;
        if t0.abs() < 1e-18 && t1.abs() < 1e-18 {
            break;
        }
    }
    let y0 = 2.0 / PI * (log_term * j0 - y0_sum);
    let y1 = 2.0 / PI * log_term * j1 - 2.0 / (PI * z) - y1_sum / PI;
    BesselSet { j0, y0, j1, y1 }
}

fn miller_neumann(z: f64) -> BesselSet {
    const BIG: f64 = 1e250;
    const SCALE: f64 = 1e-250;

    let mut start = (z + 40.0).ceil() as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let two_over_z = 2.0 / z;

    let mut j_next = 0.0; // J_{n+1}
    let mut j_cur = 1e-30; // J_n, unnormalised
    let mut norm = 0.0; // J0 + 2 sum J_{2k}
    let mut even_sum = 0.0; // sum_{k>=1} (-1)^k J_{2k} / k
    let mut odd_sum = 0.0; // sum_{m>=0} c_m J_{2m+1}
    let mut j1 = 0.0;

    let mut n = start;
    loop {
        if n % 2 == 0 {
            if n > 0 {
                let k = (n / 2) as f64;
                norm += 2.0 * j_cur;
                let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
                even_sum += sign * j_cur / k;
            } else {
                norm += j_cur;
            }
        } else {
            let m = (n - 1) / 2;
            let sign_m = if m % 2 == 0 { 1.0 } else { -1.0 };
            let mut c = -sign_m / (m as f64 + 1.0);
            if m >= 1 {
                c -= sign_m / m as f64;
            }
            odd_sum += c * j_cur;
            if n == 1 {
                j1 = j_cur;
            }
        }
        if n == 0 {
            break;
        }
        let j_prev = n as f64 * two_over_z * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        n -= 1;
        if j_cur.abs() > BIG {
            j_cur *= SCALE;
            j_next *= SCALE;
            norm *= SCALE;
            even_sum *= SCALE;
            odd_sum *= SCALE;
            j1 *= SCALE;
        }
    }
    let j0 = j_cur / norm;
    let j1 = j1 / norm;
    let even_sum = even_sum / norm;
    let odd_sum = odd_sum / norm;
    let log_term = (0.5 * z).ln() + EULER_GAMMA;
    let y0 = 2.0 / PI * log_term * j0 - 4.0 / PI * even_sum;
    let y1 = 2.0 / PI * (log_term * j1 - j0 / z) + 2.0 / PI * odd_sum;
    BesselSet { j0, y0, j1, y1 }
}

/// `(P, Q)` of Hankel's expansion for order `nu`.
fn hankel_pq(nu: f64, z: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= (mu - odd * odd) / (kf * 8.0 * z);
        let size = term.abs();
        if size > last {
            break;
        }
        last = size;
        // terms alternate in pairs: +P0, +Q1, -P2, -Q3, +P4, ...
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if size < 1e-20 {
            break;
        }
    }
    (p, q)
}

fn hankel_asymptotic(z: f64) -> BesselSet {
    let (s, c) = z.sin_cos();
    let amp = (2.0 / (PI * z)).sqrt();
    // chi0 = z - pi/4, chi1 = z - 3 pi/4
    let cos0 = FRAC_1_SQRT_2 * (c + s);
    let sin0 = FRAC_1_SQRT_2 * (s - c);
    let cos1 = FRAC_1_SQRT_2 * (s - c);
    let sin1 = -FRAC_1_SQRT_2 * (s + c);
    let (p0, q0) = hankel_pq(0.0, z);
    let (p1, q1) = hankel_pq(1.0, z);
    BesselSet {
        j0: amp * (p0 * cos0 - q0 * sin0),
        y0: amp * (p0 * sin0 + q0 * cos0),
        j1: amp * (p1 * cos1 - q1 * sin1),
        y1: amp * (p1 * sin1 + q1 * cos1),
    }
}

/// Distance `|x - y|`, rejecting coincident points.
fn separation(x: &Point, y: &Point) -> Result<f64> {
    let r = (x - y).norm();
    if r == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(r)
}

/// Fundamental solution `Phi_k(x, y) = (i/4) H0(k |x - y|)`.
pub fn phi(k: f64, x: &Point, y: &Point) -> Result<Complex64> {
    let r = separation(x, y)?;
    let h0 = hankel1_0(k * r)?;
    Ok(Complex64::new(0.0, 0.25) * h0)
}

/// Gradient of `Phi_k(x, y)` with respect to the source point `y`:
/// `(ik/4) H1(k|x-y|) (x - y)/|x - y|`.
pub fn grad_phi(k: f64, x: &Point, y: &Point) -> Result<[Complex64; 2]> {
    let r = separation(x, y)?;
    let h1 = hankel1_1(k * r)?;
    let f = Complex64::new(0.0, 0.25 * k) * h1 / r;
    let d = x - y;
    Ok([f * d.x, f * d.y])
}
