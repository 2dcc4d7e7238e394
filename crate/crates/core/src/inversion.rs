//! Reconstruction of a spline-parameterised surface from intensity data.
//!
//! The data maps send coefficients `a` of `h = sum a_i phi_{i,M}` to
//! `|u^inf|^2` on observation angles or `|u^r + u^s|^2` on a segment above
//! the surface. Their derivative in the direction `phi_i` is
//! `2 Re(conj(u) u')`, where `u'` is the scattered field for the Dirichlet
//! datum `-phi_i nu_2 du/dnu` on the surface; all `M` derivative problems
//! reuse the factorisation of the base solve.
//!
//! [`recursive_newton`] sweeps the wavenumbers in ascending order. At each
//! one it takes Levenberg-Marquardt steps, with the damping chosen so the
//! linearised residual is `rho` times the current one, until the averaged
//! relative residual drops below `tau delta`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::forward::{
    assemble_rhs, assemble_system, eval_far_field, eval_scattered_many, solve_density, total_normal_derivative,
    DensitySolution, NormalTrace, RhsSource, SolverSettings, SystemOperator,
};
use crate::geometry::{BoundaryMesh, Segment, SplineBasis, SurfaceProfile};
use crate::synth::{measured_field, Grid, MeasurementSet};
use crate::waves::IncidentConfig;
use crate::{Complex64, Error, Result};

/// Base solves at one wavenumber for every incident configuration, kept
/// together with the factorisation for derivative solves.
pub struct ForwardState {
    mesh: BoundaryMesh,
    op: SystemOperator,
    incident: Vec<IncidentConfig>,
    grid: Grid,
    solutions: Vec<DensitySolution>,
    fields: Vec<Vec<Complex64>>,
}

impl ForwardState {
    pub fn new(
        profile: &SurfaceProfile,
        incident: &[IncidentConfig],
        grid: &Grid,
        settings: &SolverSettings,
    ) -> Result<Self> {
        let k = incident
            .first()
            .ok_or_else(|| Error::Config("no incident configuration".into()))?
            .k();
        if incident.iter().any(|c| c.k() != k) {
            return Err(Error::Config("incident configurations at different wavenumbers".into()));
        }
        let mesh = settings.mesh_for(profile, k)?;
        let op = assemble_system(&mesh, k, settings.eta_for(k))?;
        let solutions = incident
            .iter()
            .map(|cfg| solve_density(&op, &assemble_rhs(&mesh, RhsSource::Incident(cfg))?))
            .collect::<Result<Vec<_>>>()?;
        let fields = incident
            .iter()
            .zip(&solutions)
            .map(|(cfg, sol)| measured_field(sol, cfg, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(ForwardState {
            mesh,
            op,
            incident: incident.to_vec(),
            grid: grid.clone(),
            solutions,
            fields,
        })
    }

    pub fn mesh(&self) -> &BoundaryMesh {
        &self.mesh
    }

    pub fn solutions(&self) -> &[DensitySolution] {
        &self.solutions
    }

    /// Measured complex fields, one vector per incident configuration.
    pub fn fields(&self) -> &[Vec<Complex64>] {
        &self.fields
    }

    /// `|field|^2`, one vector per incident configuration.
    pub fn intensities(&self) -> Vec<Vec<f64>> {
        self.fields
            .iter()
            .map(|f| f.iter().map(|v| v.norm_sqr()).collect())
            .collect()
    }

    /// `du/dnu` of the total field at every collocation node, one vector per
    /// incident configuration.
    pub fn normal_derivatives(&self) -> Result<Vec<Vec<Complex64>>> {
        let trace = NormalTrace::new(&self.mesh, self.op.k(), self.op.eta())?;
        Ok(self
            .incident
            .iter()
            .zip(&self.solutions)
            .map(|(cfg, sol)| total_normal_derivative(&trace, sol, cfg))
            .collect())
    }

    /// Derivative of the stacked intensities in the direction `phi_i`,
    /// given the normal derivatives from [`ForwardState::normal_derivatives`].
    pub fn frechet_column(
        &self,
        normal_derivatives: &[Vec<Complex64>],
        basis: &SplineBasis,
        i: usize,
    ) -> Result<Vec<f64>> {
        if i == 0 || i > basis.count() {
            return Err(Error::Config(format!("spline index {i} outside 1..={}", basis.count())));
        }
        let mut column = Vec::with_capacity(self.incident.len() * self.grid.len());
        for (l, du) in normal_derivatives.iter().enumerate() {
            let datum: Vec<Complex64> = self
                .mesh
                .nodes()
                .zip(du)
                .map(|(node, d)| {
                    if node.segment != Segment::Surface {
                        return Complex64::new(0.0, 0.0);
                    }
                    let dh = basis.jet(i, node.point.x)[0];
                    -dh * node.normal.y * d
                })
                .collect();
            let sol = solve_density(&self.op, &assemble_rhs(&self.mesh, RhsSource::Dirichlet(&datum))?)?;
            let derivative = match &self.grid {
                Grid::Far { angles } => eval_far_field(&sol, angles),
                // the reflected wave does not depend on the surface
                Grid::Near { .. } => eval_scattered_many(&sol, &self.grid.points())?,
            };
            column.extend(
                self.fields[l]
                    .iter()
                    .zip(&derivative)
                    .map(|(u, du)| 2.0 * (u.conj() * du).re),
            );
        }
        Ok(column)
    }

    /// Jacobian of the stacked intensities with respect to all spline
    /// coefficients; rows run over incident configurations, then grid points.
    pub fn jacobian(&self, basis: &SplineBasis) -> Result<DMatrix<f64>> {
        let du = self.normal_derivatives()?;
        let columns = (1..=basis.count())
            .into_par_iter()
            .map(|i| self.frechet_column(&du, basis, i))
            .collect::<Result<Vec<_>>>()?;
        let rows = self.incident.len() * self.grid.len();
        let jac = DMatrix::from_fn(rows, basis.count(), |r, c| columns[c][r]);
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Jacobian".into()));
        }
        Ok(jac)
    }
}

/// `|u^inf|^2` on `angles` for the surface `sum a_i phi_{i,M}`.
pub fn forward_map_far(
    a: &[f64],
    basis: &SplineBasis,
    cfg: &IncidentConfig,
    angles: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<f64>> {
    let profile = SurfaceProfile::spline(basis.clone(), a.to_vec())?;
    let grid = Grid::Far {
        angles: angles.to_vec(),
    };
    let state = ForwardState::new(&profile, std::slice::from_ref(cfg), &grid, settings)?;
    Ok(state.intensities().swap_remove(0))
}

/// `|u^r + u^s|^2` on `m` points of `{(x1, H) : |x1| <= L}` for the surface
/// `sum a_i phi_{i,M}`.
pub fn forward_map_near(
    a: &[f64],
    basis: &SplineBasis,
    cfg: &IncidentConfig,
    height: f64,
    half_width: f64,
    m: usize,
    settings: &SolverSettings,
) -> Result<Vec<f64>> {
    let profile = SurfaceProfile::spline(basis.clone(), a.to_vec())?;
    let grid = Grid::near(height, half_width, m)?;
    let state = ForwardState::new(&profile, std::slice::from_ref(cfg), &grid, settings)?;
    Ok(state.intensities().swap_remove(0))
}

/// `du/dnu` of the total field at the surface nodes of `sol`'s mesh, in
/// mesh order.
pub fn boundary_normal_derivative(sol: &DensitySolution, cfg: &IncidentConfig) -> Result<Vec<Complex64>> {
    let trace = NormalTrace::new(sol.mesh(), sol.k(), sol.eta())?;
    let all = total_normal_derivative(&trace, sol, cfg);
    Ok(sol
        .mesh()
        .nodes()
        .zip(all)
        .filter(|(n, _)| n.segment == Segment::Surface)
        .map(|(_, v)| v)
        .collect())
}

/// A damped Gauss-Newton step.
#[derive(Clone, Debug)]
pub struct LmStep {
    pub delta: DVector<f64>,
    pub beta: f64,
    /// `|r + J delta|`.
    pub linear_residual: f64,
    /// Even the undamped step cannot reduce the residual to `rho |r|`.
    pub target_unreachable: bool,
}

/// Smallest damping used when the target residual is out of reach, relative
/// to the largest squared singular value.
const BETA_FLOOR: f64 = 1e-10;

/// Minimises `|r + J delta|^2 + beta |delta|^2` with `beta > 0` chosen so
/// that `|r + J delta| = rho |r|`.
///
/// Uses the SVD `J = U S V^T`: with `c = U^T r` the linearised residual is
/// `sqrt(sum (beta c_i / (s_i^2 + beta))^2 + |r_perp|^2)`, increasing in
/// `beta`, and the equation is solved by bisection in `log beta` followed by a
/// few Newton steps on the squared residual.
pub fn lm_step(jacobian: &DMatrix<f64>, residual: &DVector<f64>, rho: f64) -> Result<LmStep> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Config(format!("rho must lie in (0, 1), got {rho}")));
    }
    if jacobian.nrows() != residual.len() {
        return Err(Error::Config("Jacobian and residual sizes differ".into()));
    }
    if jacobian.iter().chain(residual.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Jacobian or residual".into()));
    }
    let rnorm = residual.norm();
    let cols = jacobian.ncols();
    if rnorm == 0.0 {
        return Ok(LmStep {
            delta: DVector::zeros(cols),
            beta: f64::INFINITY,
            linear_residual: 0.0,
            target_unreachable: false,
        });
    }
    let svd = jacobian.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::Solver("SVD without U".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::Solver("SVD without V".into()))?;
    let sigma = &svd.singular_values;
    let c = u.transpose() * residual;
    let perp2 = (rnorm * rnorm - c.norm_squared()).max(0.0);
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(Error::DegenerateData("Jacobian vanishes identically".into()));
    }
    let target = rho * rnorm;
    let lin = |beta: f64| -> f64 {
        let s: f64 = sigma
            .iter()
            .zip(c.iter())
            .map(|(s, ci)| (beta * ci / (s * s + beta)).powi(2))
            .sum();
        (s + perp2).sqrt()
    };
    let floor = BETA_FLOOR * smax * smax;
    let (beta, unreachable) = if lin(floor) >= target {
        (floor, true)
    } else {
        let (mut lo, mut hi) = (floor.ln(), (smax * smax).ln());
        while lin(hi.exp()) < target {
            hi += 5.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if lin(mid.exp()) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        // Newton on lin^2 - target^2 removes the last bits of bisection error
        let mut beta = (0.5 * (lo + hi)).exp();
        for _ in 0..4 {
            let (l2, dl2) = sigma.iter().zip(c.iter()).fold((perp2, 0.0), |(v, d), (s, ci)| {
                let q = s * s + beta;
                let f = beta * ci / q;
                (v + f * f, d + 2.0 * f * ci * s * s / (q * q))
            });
            if dl2 <= 0.0 {
                break;
            }
            let next = beta - (l2 - target * target) / dl2;
            if !(next > 0.0) || (lin(next) - target).abs() > (lin(beta) - target).abs() {
                break;
            }
            beta = next;
        }
        (beta, false)
    };
    let scaled = DVector::from_iterator(
        sigma.len(),
        sigma.iter().zip(c.iter()).map(|(s, ci)| -s * ci / (s * s + beta)),
    );
    let delta = vt.transpose() * scaled;
    Ok(LmStep {
        linear_residual: lin(beta),
        delta,
        beta,
        target_unreachable: unreachable,
    })
}

/// Averaged relative residual `(1/n_d) sum_l |F_l - d_l| / |d_l|`.
pub fn err_k(predicted: &[Vec<f64>], data: &[Vec<f64>]) -> Result<f64> {
    if data.is_empty() || predicted.len() != data.len() {
        return Err(Error::Config("prediction and data sets do not match".into()));
    }
    let mut total = 0.0;
    for (p, d) in predicted.iter().zip(data) {
        if p.len() != d.len() {
            return Err(Error::Config("prediction and data lengths differ".into()));
        }
        let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dn == 0.0 {
            return Err(Error::DegenerateData("all-zero data vector".into()));
        }
        let rn = p.iter().zip(d).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        total += rn / dn;
    }
    Ok(total / data.len() as f64)
}

/// Parameters of the frequency sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct InversionConfig {
    pub basis: SplineBasis,
    pub rho: f64,
    pub tau: f64,
    /// Assumed relative noise level of the data.
    pub delta: f64,
    pub max_inner: usize,
    pub initial: Vec<f64>,
    pub settings: SolverSettings,
    /// Consecutive residual increases tolerated at one wavenumber.
    pub divergence_limit: usize,
}

impl InversionConfig {
    /// Defaults `rho = 0.8`, `tau = 1.5`, 25 inner iterations.
    pub fn new(basis: SplineBasis, initial: Vec<f64>, delta: f64) -> Self {
        InversionConfig {
            basis,
            rho: 0.8,
            tau: 1.5,
            delta,
            max_inner: 25,
            initial,
            settings: SolverSettings::default(),
            divergence_limit: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.tau > 1.0) {
            return Err(Error::Config(format!("tau must exceed 1, got {}", self.tau)));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Config(format!(
                "noise level must be nonnegative, got {}",
                self.delta
            )));
        }
        if self.initial.len() != self.basis.count() {
            return Err(Error::Config(format!(
                "initial guess has {} coefficients, basis has {}",
                self.initial.len(),
                self.basis.count()
            )));
        }
        Ok(())
    }
}

/// `value` on the 1-based index window `first..=last`, zero elsewhere.
pub fn window_guess(count: usize, first: usize, last: usize, value: f64) -> Vec<f64> {
    (1..=count)
        .map(|i| if i >= first && i <= last { value } else { 0.0 })
        .collect()
}

/// Notable events of an inner iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flag {
    /// `Err_k < tau delta`: advance to the next wavenumber.
    Converged,
    /// The inner iteration cap was reached.
    IterationCap,
    /// The damped step could not reach `rho |r|` even undamped.
    TargetUnreachable,
    /// Residual increased too many times in a row; reverted to the best
    /// iterate at this wavenumber.
    Diverged,
    /// The step produced a surface the solver rejects and was shortened,
    /// or reverted if no shortening helped.
    InadmissibleStep,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::Converged => "converged",
            Flag::IterationCap => "iteration-cap",
            Flag::TargetUnreachable => "target-unreachable",
            Flag::Diverged => "diverged",
            Flag::InadmissibleStep => "inadmissible-step",
        })
    }
}

/// One evaluation of the residual, and the step taken from it if any.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: f64,
    pub iteration: usize,
    pub err: f64,
    pub beta: Option<f64>,
    pub step_norm: Option<f64>,
    pub flags: Vec<Flag>,
}

/// Reconstruction after finishing one wavenumber.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub k: f64,
    pub coefficients: Vec<f64>,
    pub err: f64,
    pub iterations: usize,
    pub flags: Vec<Flag>,
}

/// Step halvings tried before a rejected step is abandoned.
const MAX_HALVINGS: usize = 10;

/// Progress of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct InversionState {
    pub coefficients: Vec<f64>,
    /// Index of the wavenumber being (or last) processed.
    pub frequency_index: usize,
    /// Inner iterations taken at the current wavenumber.
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub checkpoints: Vec<Checkpoint>,
}

impl InversionState {
    pub fn profile(&self, basis: &SplineBasis) -> Result<SurfaceProfile> {
        SurfaceProfile::spline(basis.clone(), self.coefficients.clone())
    }
}

/// A failed sweep together with the state reached before the failure.
#[derive(Debug)]
pub struct InversionFailure {
    pub error: Error,
    pub state: InversionState,
}

impl fmt::Display for InversionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (at frequency index {}, iteration {})",
            self.error, self.state.frequency_index, self.state.iterations
        )
    }
}

impl std::error::Error for InversionFailure {}

fn stacked(values: &[Vec<f64>]) -> DVector<f64> {
    DVector::from_iterator(values.iter().map(Vec::len).sum(), values.iter().flatten().cloned())
}

/// Runs the ascending-frequency Levenberg-Marquardt sweep over `datasets`.
pub fn recursive_newton(
    datasets: &[MeasurementSet],
    config: &InversionConfig,
) -> std::result::Result<InversionState, InversionFailure> {
    let mut state = InversionState {
        coefficients: config.initial.clone(),
        frequency_index: 0,
        iterations: 0,
        history: Vec::new(),
        checkpoints: Vec::new(),
    };
    if let Err(error) = config.validate() {
        return Err(InversionFailure { error, state });
    }
    if datasets.is_empty() {
        return Err(InversionFailure {
            error: Error::Config("no datasets".into()),
            state,
        });
    }
    let mut order: Vec<&MeasurementSet> = datasets.iter().collect();
    order.sort_by(|a, b| a.k.total_cmp(&b.k));
    for (fi, set) in order.into_iter().enumerate() {
        state.frequency_index = fi;
        state.iterations = 0;
        if let Err(error) = sweep_frequency(set, config, &mut state) {
            return Err(InversionFailure { error, state });
        }
    }
    Ok(state)
}

fn sweep_frequency(set: &MeasurementSet, config: &InversionConfig, state: &mut InversionState) -> Result<()> {
    let basis = &config.basis;
    let threshold = config.tau * config.delta;
    let data = stacked(&set.values);
    let evaluate = |a: &[f64]| -> Result<(ForwardState, f64)> {
        let profile = SurfaceProfile::spline(basis.clone(), a.to_vec())?;
        let fs = ForwardState::new(&profile, &set.incident, &set.grid, &config.settings)?;
        let err = err_k(&fs.intensities(), &set.values)?;
        Ok((fs, err))
    };

    let (mut current, mut err) = evaluate(&state.coefficients)?;
    let mut best = (state.coefficients.clone(), err);
    let mut increases = 0;
    let mut unreachable_run = 0;
    let finish_flags: Vec<Flag>;
    let mut iteration = 0;
    loop {
        let mut record = IterationRecord {
            k: set.k,
            iteration,
            err,
            beta: None,
            step_norm: None,
            flags: Vec::new(),
        };
        if err < threshold {
            record.flags.push(Flag::Converged);
            finish_flags = record.flags.clone();
            state.history.push(record);
            break;
        }
        if iteration >= config.max_inner {
            record.flags.push(Flag::IterationCap);
            if best.1 < err {
                state.coefficients = best.0.clone();
                err = best.1;
            }
            finish_flags = record.flags.clone();
            state.history.push(record);
            break;
        }
        let jac = current.jacobian(basis)?;
        let residual = stacked(&current.intensities()) - &data;
        let step = lm_step(&jac, &residual, config.rho)?;
        record.beta = Some(step.beta);
        record.step_norm = Some(step.delta.norm());
        if step.target_unreachable {
            record.flags.push(Flag::TargetUnreachable);
            unreachable_run += 1;
        } else {
            unreachable_run = 0;
        }
        iteration += 1;
        state.iterations = iteration;
        // halve steps that leave the admissible surfaces
        let mut scale = 1.0;
        let mut outcome = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = state
                .coefficients
                .iter()
                .zip(step.delta.iter())
                .map(|(a, d)| a + scale * d)
                .collect();
            match evaluate(&trial) {
                Ok(found) => {
                    outcome = Some((trial, found));
                    break;
                }
                Err(Error::Config(_)) => scale *= 0.5,
                Err(e) => return Err(e),
            }
        }
        if scale < 1.0 {
            record.flags.push(Flag::InadmissibleStep);
            record.step_norm = Some(scale * step.delta.norm());
        }
        match outcome {
            Some((trial, (next, next_err))) => {
                state.coefficients = trial;
                current = next;
                increases = if next_err > err { increases + 1 } else { 0 };
                err = next_err;
                if err < best.1 {
                    best = (state.coefficients.clone(), err);
                }
            }
            None => {
                state.coefficients = best.0.clone();
                err = best.1;
                finish_flags = record.flags.clone();
                state.history.push(record);
                break;
            }
        }
        if increases >= config.divergence_limit {
            record.flags.push(Flag::Diverged);
            state.coefficients = best.0.clone();
            err = best.1;
            finish_flags = record.flags.clone();
            state.history.push(record);
            break;
        }
        if unreachable_run >= 2 {
            finish_flags = record.flags.clone();
            state.history.push(record);
            // the final iterate has not been scored yet
            state.history.push(IterationRecord {
                k: set.k,
                iteration,
                err,
                beta: None,
                step_norm: None,
                flags: Vec::new(),
            });
            break;
        }
        state.history.push(record);
    }
    state.checkpoints.push(Checkpoint {
        k: set.k,
        coefficients: state.coefficients.clone(),
        err,
        iterations: iteration,
        flags: finish_flags,
    });
    Ok(())
}
