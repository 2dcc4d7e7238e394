//! Nyström discretisation of the combined-field integral equation on the
//! closed contour `∂D_R^-`, and evaluation of the scattered, near and far
//! fields from the solved density.
//!
//! The scattered field is represented as
//! `u^s(x) = ∫ [∂Φ(x,y)/∂ν(y) - iη Φ(x,y)] φ(y) ds(y)`. On the surface part
//! the boundary condition reads `φ + 2(K - iηS)φ = -2(u^i + u^r)`; on the
//! lower half circle the representation is made odd under reflection in the
//! plane, giving `½φ + (K - iηS)φ + (K^re - iηS^re)φ = 0` with the kernels
//! evaluated at the mirror image of the collocation point.
//!
//! Direct kernels are split into a `ln(4 sin²((t-τ)/2))` part, integrated
//! with Kress' trigonometric weights, and a smooth remainder handled by the
//! trapezoidal rule in the graded parameter. Mirrored kernels are smooth
//! away from the two corners and use the trapezoidal rule directly.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use crate::geometry::{build_mesh, BoundaryMesh, MeshNode, Segment, SurfaceProfile};
use crate::special_fn::{bessel_set_unchecked, EULER_GAMMA};
use crate::waves::{grad_incident_plus_reflected, incident_plus_reflected, reflected, IncidentConfig};
use crate::{Complex64, Error, Point, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Mesh resolution and coupling policy shared by data generation and
/// inversion.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub radius: f64,
    pub grading: u32,
    /// Target points per wavelength along the longer sub-arc, before the
    /// factor two lost to grading in the middle of each arc.
    pub points_per_wavelength: f64,
    pub min_nodes: usize,
    /// Coupling parameter; `None` selects `max(1, k)`.
    pub eta: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            radius: 1.0,
            grading: 8,
            points_per_wavelength: 10.0,
            min_nodes: 64,
            eta: None,
        }
    }
}

impl SolverSettings {
    pub fn eta_for(&self, k: f64) -> f64 {
        self.eta.unwrap_or(k.max(1.0))
    }

    /// Intervals per sub-arc at wavenumber `k`: at least `min_nodes`, and
    /// enough for the requested points per wavelength on the longer arc.
    pub fn nodes_for(&self, profile: &SurfaceProfile, k: f64) -> usize {
        let arc = (PI * self.radius).max(surface_length(profile, self.radius));
        let wavelengths = k * arc / (2.0 * PI);
        let n = (2.0 * self.points_per_wavelength * wavelengths).ceil() as usize;
        let n = n.max(self.min_nodes).max(8);
        n + n % 2
    }

    pub fn mesh_for(&self, profile: &SurfaceProfile, k: f64) -> Result<BoundaryMesh> {
        build_mesh(profile, self.radius, self.nodes_for(profile, k), self.grading)
    }

    /// Same policy with the resolution multiplied by `ratio`.
    pub fn refined(&self, ratio: f64) -> Self {
        SolverSettings {
            points_per_wavelength: self.points_per_wavelength * ratio,
            min_nodes: (self.min_nodes as f64 * ratio).ceil() as usize,
            ..self.clone()
        }
    }
}

/// Length of the graph of `h` over `[-R, R]`.
fn surface_length(profile: &SurfaceProfile, radius: f64) -> f64 {
    let m = 4000;
    let dx = 2.0 * radius / m as f64;
    (0..m)
        .map(|i| {
            let x = -radius + (i as f64 + 0.5) * dx;
            (1.0 + profile.jet(x)[1].powi(2)).sqrt() * dx
        })
        .sum()
}

/// Kress' weights `R_l` for the product integration of
/// `ln(4 sin²((t-τ)/2))` against trigonometric interpolants on `2n` points.
pub(crate) fn log_weights(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (0..2 * n)
        .map(|l| {
            let s: f64 = (1..n).map(|m| ((m * l) as f64 * PI / nf).cos() / m as f64).sum();
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            -2.0 * PI / nf * s - PI / (nf * nf) * sign
        })
        .collect()
}

/// `ln(4 sin²(l pi / 2n))` for `l = 0..2n`, with the singular `l = 0` entry
/// set to zero.
pub(crate) fn log_kernel(n: usize) -> Vec<f64> {
    (0..2 * n)
        .map(|l| {
            if l == 0 {
                0.0
            } else {
                (4.0 * (l as f64 * PI / (2.0 * n as f64)).sin().powi(2)).ln()
            }
        })
        .collect()
}

/// Unnormalised normal `(z2', -z1')`, of length `|z'|`.
fn scaled_normal(node: &MeshNode) -> Point {
    Point::new(node.velocity.y, -node.velocity.x)
}

/// `(z2' z1'' - z1' z2'') / (4 pi |z'|^2)`, the diagonal limit of the
/// double-layer kernel times `|z'|`.
fn curvature_limit(node: &MeshNode) -> f64 {
    let (v, a) = (node.velocity, node.acceleration);
    (v.y * a.x - v.x * a.y) / (4.0 * PI * node.speed * node.speed)
}

/// Diagonal limit of the smooth part of the single-layer kernel, without
/// the `|z'|` factor.
fn single_layer_limit(k: f64, speed: f64) -> Complex64 {
    Complex64::new(
        -EULER_GAMMA / (2.0 * PI) - (k * k * speed * speed / 4.0).ln() / (4.0 * PI),
        0.25,
    )
}

/// The dense matrix of the discretised operator together with its LU
/// factorisation, reusable for any number of right-hand sides.
#[derive(Clone)]
pub struct SystemOperator {
    k: f64,
    eta: f64,
    mesh: Arc<BoundaryMesh>,
    matrix: DMatrix<Complex64>,
    lu: LU<Complex64, Dyn, Dyn>,
}

impl std::fmt::Debug for SystemOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemOperator")
            .field("k", &self.k)
            .field("eta", &self.eta)
            .field("unknowns", &self.matrix.nrows())
            .finish()
    }
}

impl SystemOperator {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn mesh(&self) -> &Arc<BoundaryMesh> {
        &self.mesh
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }
}

/// Assembles and factorises the Nyström matrix for `mesh` at wavenumber `k`
/// with coupling parameter `eta`.
pub fn assemble_system(mesh: &BoundaryMesh, k: f64, eta: f64) -> Result<SystemOperator> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Config(format!("wavenumber must be positive, got {k}")));
    }
    if eta == 0.0 || !eta.is_finite() {
        return Err(Error::Config(format!(
            "coupling parameter must be real and nonzero, got {eta}"
        )));
    }
    let n = mesh.n();
    let step = mesh.step();
    let weights = log_weights(n);
    let logs = log_kernel(n);
    let unknowns = mesh.unknowns();
    let grid = mesh.grid();
    let size = unknowns.len();
    let ieta = I * eta;

    let rows: Vec<Vec<Complex64>> = unknowns
        .par_iter()
        .map(|&gi| {
            let xi = &grid[gi];
            let (scale, jump) = match xi.segment {
                Segment::Surface => (2.0, 1.0),
                _ => (1.0, 0.5),
            };
            let mut row = vec![ZERO; size];
            for (col, &gj) in unknowns.iter().enumerate() {
                let yj = &grid[gj];
                let l = gi.abs_diff(gj);
                let (a1, a2) = if gi == gj {
                    let a1 = ieta * (yj.speed / (4.0 * PI));
                    let a2 = curvature_limit(yj) - ieta * single_layer_limit(k, yj.speed) * yj.speed;
                    (a1, a2)
                } else {
                    let d = xi.separation(yj);
                    let r = d.norm();
                    let b = bessel_set_unchecked(k * r);
                    let q = d.dot(&scaled_normal(yj)) / r;
                    let dl = I * (k / 4.0) * b.h1() * q;
                    let dl1 = -(k / (4.0 * PI)) * b.j1 * q;
                    let sl = I * 0.25 * b.h0() * yj.speed;
                    let sl1 = -(b.j0 * yj.speed) / (4.0 * PI);
                    let a = dl - ieta * sl;
                    let a1 = dl1 - ieta * sl1;
                    (a1, a - a1 * logs[l])
                };
                row[col] = (a1 * weights[l] + a2 * step) * scale;
            }
            if xi.segment == Segment::Semicircle {
                for (col, &gj) in unknowns.iter().enumerate() {
                    let yj = &grid[gj];
                    let d = xi.mirrored_separation(yj);
                    let r = d.norm();
                    let b = bessel_set_unchecked(k * r);
                    let q = d.dot(&scaled_normal(yj)) / r;
                    let val = I * (k / 4.0) * b.h1() * q - ieta * (I * 0.25 * b.h0() * yj.speed);
                    row[col] += val * step;
                }
            }
            let ii = unknowns.iter().position(|&g| g == gi).unwrap_or(0);
            row[ii] += jump;
            row
        })
        .collect();

    let mut matrix = DMatrix::from_element(size, size, ZERO);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            matrix[(i, j)] = *v;
        }
    }
    if matrix.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("system matrix".into()));
    }
    let lu = matrix.clone().lu();
    let u = lu.u();
    let diag = u.diagonal();
    let (lo, hi) = diag
        .iter()
        .map(|v| v.norm())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(lo > 1e-13 * hi) {
        return Err(Error::Solver(format!(
            "system matrix numerically singular (pivot ratio {:.3e})",
            lo / hi
        )));
    }
    Ok(SystemOperator {
        k,
        eta,
        mesh: Arc::new(mesh.clone()),
        matrix,
        lu,
    })
}

/// Boundary data for the integral equation.
#[derive(Clone, Copy, Debug)]
pub enum RhsSource<'a> {
    /// Plane-wave scattering: the datum is `-(u^i + u^r)` on the surface.
    Incident(&'a IncidentConfig),
    /// Arbitrary Dirichlet datum on the surface, one value per collocation
    /// node in unknown order; entries on the half circle are ignored.
    Dirichlet(&'a [Complex64]),
}

/// Right-hand side: twice the Dirichlet datum on surface rows, zero on the
/// half circle.
pub fn assemble_rhs(mesh: &BoundaryMesh, source: RhsSource<'_>) -> Result<DVector<Complex64>> {
    if let RhsSource::Dirichlet(f) = source {
        if f.len() != mesh.len() {
            return Err(Error::Config(format!(
                "boundary datum has {} values for {} nodes",
                f.len(),
                mesh.len()
            )));
        }
    }
    Ok(DVector::from_iterator(
        mesh.len(),
        mesh.nodes().enumerate().map(|(i, node)| {
            if node.segment != Segment::Surface {
                return ZERO;
            }
            match source {
                RhsSource::Incident(cfg) => -2.0 * incident_plus_reflected(cfg, &node.point),
                RhsSource::Dirichlet(f) => 2.0 * f[i],
            }
        }),
    ))
}

/// A solved boundary density together with the data needed to evaluate
/// fields from it.
#[derive(Clone, Debug)]
pub struct DensitySolution {
    k: f64,
    eta: f64,
    mesh: Arc<BoundaryMesh>,
    density: DVector<Complex64>,
    residual: f64,
}

impl DensitySolution {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn mesh(&self) -> &BoundaryMesh {
        &self.mesh
    }

    /// Density values at the collocation nodes, in unknown order.
    pub fn density(&self) -> &DVector<Complex64> {
        &self.density
    }

    /// `max|Pφ - g| / max|g|` of the discrete system (0 for `g = 0`).
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Solves `Pφ = g` with the stored factorisation.
pub fn solve_density(op: &SystemOperator, g: &DVector<Complex64>) -> Result<DensitySolution> {
    let size = op.matrix.nrows();
    if g.len() != size {
        return Err(Error::Config(format!(
            "right-hand side has {} entries, system has {size}",
            g.len()
        )));
    }
    let gmax = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (density, residual) = if gmax == 0.0 {
        (DVector::from_element(size, ZERO), 0.0)
    } else {
        let phi = op.lu.solve(g).ok_or_else(|| Error::Solver("LU solve failed".into()))?;
        if phi.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("boundary density".into()));
        }
        let res = (&op.matrix * &phi - g).iter().map(|v| v.norm()).fold(0.0, f64::max) / gmax;
        (phi, res)
    };
    Ok(DensitySolution {
        k: op.k,
        eta: op.eta,
        mesh: op.mesh.clone(),
        density,
        residual,
    })
}

/// Builds the mesh prescribed by `settings`, assembles, and solves the
/// plane-wave scattering problem for `profile`.
pub fn solve_scattering(
    profile: &SurfaceProfile,
    cfg: &IncidentConfig,
    settings: &SolverSettings,
) -> Result<DensitySolution> {
    let mesh = settings.mesh_for(profile, cfg.k())?;
    let op = assemble_system(&mesh, cfg.k(), settings.eta_for(cfg.k()))?;
    solve_density(&op, &assemble_rhs(&mesh, RhsSource::Incident(cfg))?)
}

/// Scattered field `u^s(x)` by the trapezoidal rule on the mesh.
///
/// Accurate for points a few node spacings away from `∂D_R^-`; the error
/// grows as `x` approaches the contour.
pub fn eval_scattered(sol: &DensitySolution, x: &Point) -> Result<Complex64> {
    let k = sol.k;
    let ieta = I * sol.eta;
    let mut acc = ZERO;
    for (node, phi) in sol.mesh.nodes().zip(sol.density.iter()) {
        let d = x - node.point;
        let r = d.norm();
        if r == 0.0 {
            return Err(Error::Singularity);
        }
        let b = bessel_set_unchecked(k * r);
        let dl = I * (k / 4.0) * b.h1() * d.dot(&node.normal) / r;
        let sl = I * 0.25 * b.h0();
        acc += (dl - ieta * sl) * node.weight * phi;
    }
    Ok(acc)
}

/// [`eval_scattered`] at many points in parallel.
pub fn eval_scattered_many(sol: &DensitySolution, points: &[Point]) -> Result<Vec<Complex64>> {
    points.par_iter().map(|x| eval_scattered(sol, x)).collect()
}

/// Far-field pattern at observation angles `t` (direction `(cos t, sin t)`),
/// normally taken in `(0, pi)`.
pub fn eval_far_field(sol: &DensitySolution, angles: &[f64]) -> Vec<Complex64> {
    let k = sol.k;
    let pref = Complex64::from_polar(1.0, -PI / 4.0) / (8.0 * PI * k).sqrt();
    angles
        .par_iter()
        .map(|&t| {
            let xhat = Point::new(t.cos(), t.sin());
            let sum: Complex64 = sol
                .mesh
                .nodes()
                .zip(sol.density.iter())
                .map(|(node, phi)| {
                    let amp = k * node.normal.dot(&xhat) + sol.eta;
                    Complex64::from_polar(node.weight * amp, -k * xhat.dot(&node.point)) * phi
                })
                .sum();
            pref * sum
        })
        .collect()
}

/// `m` equidistant points `(x1, H)` with `x1` from `-L` to `L`.
pub fn segment_points(height: f64, half_width: f64, m: usize) -> Vec<Point> {
    let step = if m > 1 { 2.0 * half_width / (m - 1) as f64 } else { 0.0 };
    (0..m)
        .map(|j| Point::new(-half_width + j as f64 * step, height))
        .collect()
}

/// Near field `u^r + u^s` on the segment `{(x1, H) : |x1| <= L}`.
pub fn eval_near_field(
    sol: &DensitySolution,
    cfg: &IncidentConfig,
    height: f64,
    half_width: f64,
    m: usize,
) -> Result<Vec<Complex64>> {
    if m < 2 {
        return Err(Error::Config(format!(
            "near-field segment needs at least 2 points, got {m}"
        )));
    }
    if !(half_width > 0.0) {
        return Err(Error::Config(format!(
            "segment half-width must be positive, got {half_width}"
        )));
    }
    let top = sol.mesh.profile().max_height();
    if !(height > top) {
        return Err(Error::Config(format!(
            "measurement height {height} not above the surface maximum {top}"
        )));
    }
    if (cfg.k() - sol.k).abs() > 1e-12 * sol.k {
        return Err(Error::Config("incident wavenumber differs from the solved one".into()));
    }
    let points = segment_points(height, half_width, m);
    let scattered = eval_scattered_many(sol, &points)?;
    Ok(points
        .iter()
        .zip(scattered)
        .map(|(x, us)| reflected(cfg, x) + us)
        .collect())
}

/// Fourier differentiation matrix on `2n` equispaced points of a period.
fn fourier_derivative(n: usize) -> DMatrix<f64> {
    let size = 2 * n;
    DMatrix::from_fn(size, size, |i, j| {
        if i == j {
            0.0
        } else {
            let l = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (l * PI / size as f64).tan()
        }
    })
}

/// Normal derivative of the combined-layer potential on the contour, from
/// the side the normal points to.
///
/// The hypersingular part uses Maue's identity
/// `T φ = d/ds S(dφ/ds) + k² ν·S(νφ)`, with tangential derivatives taken by
/// trigonometric differentiation in the graded parameter. The result is
/// accurate away from the two corners, which is where it is needed: spline
/// perturbations vanish near `x_A` and `x_B`.
#[derive(Clone)]
pub struct NormalTrace {
    mesh: Arc<BoundaryMesh>,
    eta: f64,
    diff: DMatrix<f64>,
    /// Single layer without the speed factor, on the full `2n` grid.
    single_full: DMatrix<Complex64>,
    /// `k² S_νν - iη K'` on the collocation nodes.
    smooth: DMatrix<Complex64>,
}

impl NormalTrace {
    pub fn new(mesh: &BoundaryMesh, k: f64, eta: f64) -> Result<Self> {
        let n = mesh.n();
        let size = 2 * n;
        let step = mesh.step();
        let weights = log_weights(n);
        let logs = log_kernel(n);
        let grid = mesh.grid();
        let ieta = I * eta;

        let single_rows: Vec<Vec<Complex64>> = (0..size)
            .into_par_iter()
            .map(|i| {
                let xi = &grid[i];
                let corner = xi.segment == Segment::Corner;
                (0..size)
                    .map(|j| {
                        let l = i.abs_diff(j);
                        if corner {
                            // the derivative density vanishes to high order at
                            // the corners, so the plain rule suffices there
                            if i == j {
                                return ZERO;
                            }
                            let r = xi.separation(&grid[j]).norm();
                            return I * 0.25 * bessel_set_unchecked(k * r).h0() * step;
                        }
                        if i == j {
                            let a1 = Complex64::new(-1.0 / (4.0 * PI), 0.0);
                            return a1 * weights[0] + single_layer_limit(k, xi.speed) * step;
                        }
                        let r = xi.separation(&grid[j]).norm();
                        if r == 0.0 {
                            return ZERO;
                        }
                        let b = bessel_set_unchecked(k * r);
                        let a = I * 0.25 * b.h0();
                        let a1 = Complex64::new(-b.j0 / (4.0 * PI), 0.0);
                        a1 * weights[l] + (a - a1 * logs[l]) * step
                    })
                    .collect()
            })
            .collect();
        let single_full = DMatrix::from_fn(size, size, |i, j| single_rows[i][j]);

        let unknowns = mesh.unknowns();
        let smooth_rows: Vec<Vec<Complex64>> = unknowns
            .par_iter()
            .map(|&gi| {
                let xi = &grid[gi];
                unknowns
                    .iter()
                    .map(|&gj| {
                        let yj = &grid[gj];
                        let l = gi.abs_diff(gj);
                        let (a1, a2) = if gi == gj {
                            let s1 = -yj.speed / (4.0 * PI);
                            let a1 = Complex64::new(k * k * s1, 0.0);
                            let a2 = k * k * single_layer_limit(k, yj.speed) * yj.speed - ieta * curvature_limit(yj);
                            (a1, a2)
                        } else {
                            let d = xi.separation(yj);
                            let r = d.norm();
                            let b = bessel_set_unchecked(k * r);
                            let nn = xi.normal.dot(&yj.normal);
                            let sl = I * 0.25 * b.h0() * yj.speed * nn;
                            let sl1 = -(b.j0 * yj.speed * nn) / (4.0 * PI);
                            let q = d.dot(&xi.normal) * yj.speed / r;
                            let adj = -I * (k / 4.0) * b.h1() * q;
                            let adj1 = (k / (4.0 * PI)) * b.j1 * q;
                            let a = k * k * sl - ieta * adj;
                            let a1 = k * k * sl1 - ieta * adj1;
                            (a1, a - a1 * logs[l])
                        };
                        a1 * weights[l] + a2 * step
                    })
                    .collect()
            })
            .collect();
        let m = unknowns.len();
        let smooth = DMatrix::from_fn(m, m, |i, j| smooth_rows[i][j]);
        if single_full
            .iter()
            .chain(smooth.iter())
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::NonFinite("normal-derivative operator".into()));
        }
        Ok(NormalTrace {
            mesh: Arc::new(mesh.clone()),
            eta,
            diff: fourier_derivative(n),
            single_full,
            smooth,
        })
    }

    /// `∂u^s/∂ν` at every collocation node, in unknown order.
    pub fn apply(&self, density: &DVector<Complex64>) -> Vec<Complex64> {
        let mesh = &self.mesh;
        let n = mesh.n();
        let size = 2 * n;
        let unknowns = mesh.unknowns();
        let mut full = DVector::from_element(size, ZERO);
        for (&g, v) in unknowns.iter().zip(density.iter()) {
            full[g] = *v;
        }
        full[0] = (full[1] + full[size - 1]) * 0.5;
        full[n] = (full[n - 1] + full[n + 1]) * 0.5;
        let diff = self.diff.map(|v| Complex64::new(v, 0.0));
        let dphi = &diff * &full;
        let outer = &diff * (&self.single_full * dphi);
        let rest = &self.smooth * density;
        let half = I * (0.5 * self.eta);
        unknowns
            .iter()
            .enumerate()
            .map(|(i, &g)| outer[g] / mesh.grid()[g].speed + rest[i] + half * density[i])
            .collect()
    }
}

/// Normal derivative of the total field `u^i + u^r + u^s` at every
/// collocation node, in unknown order.
pub fn total_normal_derivative(trace: &NormalTrace, sol: &DensitySolution, cfg: &IncidentConfig) -> Vec<Complex64> {
    let scattered = trace.apply(&sol.density);
    sol.mesh
        .nodes()
        .zip(scattered)
        .map(|(node, us)| {
            let g = grad_incident_plus_reflected(cfg, &node.point);
            us + g[0] * node.normal.x + g[1] * node.normal.y
        })
        .collect()
}
