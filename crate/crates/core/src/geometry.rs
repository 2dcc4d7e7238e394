//! Surface profiles, the quartic spline basis used to parameterise
//! reconstructions, and the graded discretisation of the closed contour
//! `Gamma_R ∪ ∂B_R^-` (the perturbed surface plus the lower half circle).

use std::f64::consts::PI;
use std::ops::Mul;

use crate::{Error, Point, Result};

/// Mirror image `(x1, -x2)` of a point in the `x1` axis.
pub fn reflect(x: &Point) -> Point {
    Point::new(x.x, -x.y)
}

const BINOM5: [f64; 6] = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];

/// Centred quartic B-spline `phi(t)`, supported on `(-2.5, 2.5)` with unit
/// integral.
pub fn quartic_spline(t: f64) -> f64 {
    quartic_spline_jet(t)[0]
}

/// Value, first and second derivative of the quartic B-spline.
pub(crate) fn quartic_spline_jet(t: f64) -> [f64; 3] {
    if t <= -2.5 || t >= 2.5 {
        return [0.0; 3];
    }
    if t > 0.0 {
        // the truncated power sum cancels badly on the right half
        let [v, d1, d2] = quartic_spline_jet(-t);
        return [v, -d1, d2];
    }
    let mut out = [0.0; 3];
    for (j, &c) in BINOM5.iter().enumerate() {
        let z = t + 2.5 - j as f64;
        if z <= 0.0 {
            break;
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let z2 = z * z;
        out[0] += sign * c * z2 * z2 / 24.0;
        out[1] += sign * c * z2 * z / 6.0;
        out[2] += sign * c * z2 / 2.0;
    }
    out
}

/// Span of `M` translated quartic splines `phi((t - t_i)/h)` with
/// `h = 2R/(M+5)` and centres `t_i = (i+2)h - R`, `i = 1..=M`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineBasis {
    count: usize,
    radius: f64,
}

impl SplineBasis {
    pub fn new(count: usize, radius: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("spline basis needs at least one function".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Config(format!("spline radius must be positive, got {radius}")));
        }
        Ok(SplineBasis { count, radius })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Knot spacing `h = 2R/(M+5)`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.count as f64 + 5.0)
    }

    /// Centre of the `i`-th function, 1-based.
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 2.0) * self.spacing() - self.radius
    }

    /// Open support interval of the `i`-th function.
    pub fn support(&self, i: usize) -> (f64, f64) {
        let c = self.center(i);
        let w = 2.5 * self.spacing();
        (c - w, c + w)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.count {
            return Err(Error::Config(format!("spline index {i} outside 1..={}", self.count)));
        }
        Ok(())
    }

    pub(crate) fn jet(&self, i: usize, t: f64) -> [f64; 3] {
        let h = self.spacing();
        let j = quartic_spline_jet((t - self.center(i)) / h);
        [j[0], j[1] / h, j[2] / (h * h)]
    }

    /// `phi_{i,M}` or one of its first two derivatives at `t`.
    pub fn eval(&self, i: usize, t: f64, deriv: usize) -> Result<f64> {
        self.check_index(i)?;
        check_deriv(deriv)?;
        Ok(self.jet(i, t)[deriv])
    }

    /// `sum_i coeffs[i-1] phi_{i,M}` with derivatives.
    pub(crate) fn combination_jet(&self, coeffs: &[f64], t: f64) -> [f64; 3] {
        let h = self.spacing();
        // only functions whose centre lies within 2.5h of t contribute
        let pos = (t + self.radius) / h - 2.0;
        let lo = ((pos - 2.5).floor().max(1.0)) as usize;
        let hi = ((pos + 2.5).ceil().min(self.count as f64)).max(0.0) as usize;
        let mut out = [0.0; 3];
        for i in lo..=hi {
            let a = coeffs[i - 1];
            if a == 0.0 {
                continue;
            }
            let j = self.jet(i, t);
            out[0] += a * j[0];
            out[1] += a * j[1];
            out[2] += a * j[2];
        }
        out
    }
}

/// Free-function form of [`SplineBasis::eval`].
pub fn basis_eval(i: usize, count: usize, radius: f64, t: f64, deriv: usize) -> Result<f64> {
    SplineBasis::new(count, radius)?.eval(i, t, deriv)
}

fn check_deriv(deriv: usize) -> Result<()> {
    if deriv > 2 {
        return Err(Error::Config(format!("derivative order {deriv} not available (max 2)")));
    }
    Ok(())
}

/// Value with first and second derivative, closed under products.
#[derive(Clone, Copy, Debug)]
struct Jet {
    v: f64,
    d1: f64,
    d2: f64,
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}

/// `exp(16/(25x^2-16)) (0.5 + 0.1 sin(16 pi x))` on `|x| < 4/5`.
fn multiscale_jet(x: f64) -> Jet {
    let den = 25.0 * x * x - 16.0;
    let g = 16.0 / den;
    let e = g.exp();
    if e == 0.0 {
        return Jet {
            v: 0.0,
            d1: 0.0,
            d2: 0.0,
        };
    }
    let g1 = -800.0 * x / (den * den);
    let g2 = -800.0 / (den * den) + 80_000.0 * x * x / (den * den * den);
    let bump = Jet {
        v: e,
        d1: e * g1,
        d2: e * (g1 * g1 + g2),
    };
    let w = 16.0 * PI;
    let (s, c) = (w * x).sin_cos();
    let wiggle = Jet {
        v: 0.5 + 0.1 * s,
        d1: 0.1 * w * c,
        d2: -0.1 * w * w * s,
    };
    bump * wiggle
}

/// Piecewise-linear graph through sorted vertices, zero outside.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    vertices: Vec<[f64; 2]>,
}

/// Stand-in for the piecewise-linear test surface, whose vertices are not
/// published numerically.
pub const DEFAULT_PIECEWISE_VERTICES: [[f64; 2]; 6] = [
    [-0.7, 0.0],
    [-0.45, 0.3],
    [-0.2, 0.1],
    [0.1, 0.4],
    [0.35, 0.15],
    [0.6, 0.0],
];

impl Polyline {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Config("a polyline profile needs at least two vertices".into()));
        }
        if vertices.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(Error::Config("polyline vertices must have increasing x1".into()));
        }
        let first = vertices[0][1];
        let last = vertices[vertices.len() - 1][1];
        if first != 0.0 || last != 0.0 {
            return Err(Error::Config("polyline must start and end at height 0".into()));
        }
        Ok(Polyline { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    fn jet(&self, x: f64) -> [f64; 3] {
        let v = &self.vertices;
        if x < v[0][0] || x >= v[v.len() - 1][0] {
            return [0.0; 3];
        }
        let idx = v.partition_point(|p| p[0] <= x) - 1;
        let (a, b) = (v[idx], v[idx + 1]);
        let slope = (b[1] - a[1]) / (b[0] - a[0]);
        [a[1] + slope * (x - a[0]), slope, 0.0]
    }
}

/// A spline-parameterised profile `sum_i a_i phi_{i,M}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineProfile {
    pub basis: SplineBasis,
    pub coeffs: Vec<f64>,
}

/// The graph `x2 = h(x1)` of a compactly supported surface perturbation.
#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceProfile {
    Flat,
    /// `phi((x1 + 0.2)/0.3)`.
    Example1,
    /// Piecewise-linear, vertices supplied by the caller.
    Piecewise(Polyline),
    /// `exp(16/(25x^2-16)) (0.5 + 0.1 sin 16 pi x)` for `|x| < 4/5`.
    Example4,
    /// The `Example4` profile multiplied by `sin(pi x)`.
    Example5,
    Spline(SplineProfile),
    /// `h(x1 - shift)`.
    Shifted {
        inner: Box<SurfaceProfile>,
        shift: f64,
    },
    Sum(Box<SurfaceProfile>, Box<SurfaceProfile>),
}

/// Names accepted by [`SurfaceProfile::from_preset`].
pub const PRESET_NAMES: [&str; 5] = [
    "flat",
    "example1",
    "example3-piecewise",
    "example4-multiscale",
    "example5-multiscale",
];

impl SurfaceProfile {
    /// Looks up a closed-form preset. `example3-piecewise` takes its vertices
    /// from `vertices`, falling back to [`DEFAULT_PIECEWISE_VERTICES`].
    pub fn from_preset(name: &str, vertices: Option<Vec<[f64; 2]>>) -> Result<Self> {
        match name {
            "flat" => Ok(SurfaceProfile::Flat),
            "example1" => Ok(SurfaceProfile::Example1),
            "example3-piecewise" => {
                let v = vertices.unwrap_or_else(|| DEFAULT_PIECEWISE_VERTICES.to_vec());
                Ok(SurfaceProfile::Piecewise(Polyline::new(v)?))
            }
            "example4-multiscale" => Ok(SurfaceProfile::Example4),
            "example5-multiscale" => Ok(SurfaceProfile::Example5),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    pub fn spline(basis: SplineBasis, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.count() {
            return Err(Error::Config(format!(
                "{} spline coefficients given for a basis of {}",
                coeffs.len(),
                basis.count()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("spline coefficients".into()));
        }
        Ok(SurfaceProfile::Spline(SplineProfile { basis, coeffs }))
    }

    pub fn shifted(self, shift: f64) -> Self {
        SurfaceProfile::Shifted {
            inner: Box::new(self),
            shift,
        }
    }

    pub fn plus(self, other: SurfaceProfile) -> Self {
        SurfaceProfile::Sum(Box::new(self), Box::new(other))
    }

    /// `[h, h', h'']` at `x1`.
    pub fn jet(&self, x1: f64) -> [f64; 3] {
        match self {
            SurfaceProfile::Flat => [0.0; 3],
            SurfaceProfile::Example1 => {
                let j = quartic_spline_jet((x1 + 0.2) / 0.3);
                [j[0], j[1] / 0.3, j[2] / 0.09]
            }
            SurfaceProfile::Piecewise(p) => p.jet(x1),
            SurfaceProfile::Example4 => {
                if x1.abs() >= 0.8 {
                    return [0.0; 3];
                }
                let j = multiscale_jet(x1);
                [j.v, j.d1, j.d2]
            }
            SurfaceProfile::Example5 => {
                if x1.abs() >= 0.8 {
                    return [0.0; 3];
                }
                let (s, c) = (PI * x1).sin_cos();
                let j = multiscale_jet(x1)
                    * Jet {
                        v: s,
                        d1: PI * c,
                        d2: -PI * PI * s,
                    };
                [j.v, j.d1, j.d2]
            }
            SurfaceProfile::Spline(sp) => sp.basis.combination_jet(&sp.coeffs, x1),
            SurfaceProfile::Shifted { inner, shift } => inner.jet(x1 - shift),
            SurfaceProfile::Sum(a, b) => {
                let (ja, jb) = (a.jet(x1), b.jet(x1));
                [ja[0] + jb[0], ja[1] + jb[1], ja[2] + jb[2]]
            }
        }
    }

    /// `h`, `h'` or `h''` at `x1` for `deriv` = 0, 1, 2.
    pub fn eval(&self, x1: f64, deriv: usize) -> Result<f64> {
        check_deriv(deriv)?;
        Ok(self.jet(x1)[deriv])
    }

    /// Closed interval containing the support, `None` for the flat surface.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            SurfaceProfile::Flat => None,
            SurfaceProfile::Example1 => Some((-0.95, 0.55)),
            SurfaceProfile::Piecewise(p) => {
                let v = p.vertices();
                Some((v[0][0], v[v.len() - 1][0]))
            }
            SurfaceProfile::Example4 | SurfaceProfile::Example5 => Some((-0.8, 0.8)),
            SurfaceProfile::Spline(sp) => {
                let active: Vec<usize> = (1..=sp.basis.count()).filter(|&i| sp.coeffs[i - 1] != 0.0).collect();
                match (active.first(), active.last()) {
                    (Some(&lo), Some(&hi)) => Some((sp.basis.support(lo).0, sp.basis.support(hi).1)),
                    _ => None,
                }
            }
            SurfaceProfile::Shifted { inner, shift } => inner.support().map(|(a, b)| (a + shift, b + shift)),
            SurfaceProfile::Sum(a, b) => match (a.support(), b.support()) {
                (Some(x), Some(y)) => Some((x.0.min(y.0), x.1.max(y.1))),
                (x, None) => x,
                (None, y) => y,
            },
        }
    }

    /// Largest value of `h` over its support, sampled on 4001 points.
    pub fn max_height(&self) -> f64 {
        match self.support() {
            None => 0.0,
            Some((a, b)) => (0..=4000)
                .map(|i| self.jet(a + (b - a) * i as f64 / 4000.0)[0])
                .fold(0.0, f64::max),
        }
    }
}

/// Free-function form of [`SurfaceProfile::eval`].
pub fn profile_eval(p: &SurfaceProfile, x1: f64, deriv: usize) -> Result<f64> {
    p.eval(x1, deriv)
}

/// Polynomial grading substitution `w: [0, 2pi] -> [0, 2pi]` whose first
/// `p - 1` derivatives vanish at both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grading {
    order: u32,
}

impl Grading {
    pub fn new(order: u32) -> Result<Self> {
        if order < 2 {
            return Err(Error::Config(format!("grading order must be at least 2, got {order}")));
        }
        Ok(Grading { order })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    fn v(&self, s: f64) -> [f64; 3] {
        let p = self.order as f64;
        let c = 1.0 / p - 0.5;
        let u = (PI - s) / PI;
        [
            c * u * u * u + (s - PI) / (p * PI) + 0.5,
            -3.0 * c * u * u / PI + 1.0 / (p * PI),
            6.0 * c * u / (PI * PI),
        ]
    }

    /// `1 - w(s) / 2pi`, without cancellation near `s = 2pi`.
    pub(crate) fn complement(&self, s: f64) -> f64 {
        let p = self.order as i32;
        let a = self.v(s)[0].powi(p);
        let b = self.v(2.0 * PI - s)[0].powi(p);
        b / (a + b)
    }

    /// `w(s) / 2pi` and its first two derivatives in `s`.
    pub(crate) fn fraction(&self, s: f64) -> [f64; 3] {
        let p = self.order as i32;
        let pf = p as f64;
        let [v, v1, v2] = self.v(s);
        let [u, u1, u2] = {
            let r = self.v(2.0 * PI - s);
            [r[0], -r[1], r[2]]
        };
        let a = v.powi(p);
        let a1 = pf * v.powi(p - 1) * v1;
        let a2 = pf * (pf - 1.0) * v.powi(p - 2) * v1 * v1 + pf * v.powi(p - 1) * v2;
        let b = u.powi(p);
        let b1 = pf * u.powi(p - 1) * u1;
        let b2 = pf * (pf - 1.0) * u.powi(p - 2) * u1 * u1 + pf * u.powi(p - 1) * u2;
        let sum = a + b;
        let num1 = a1 * b - a * b1;
        [
            a / sum,
            num1 / (sum * sum),
            ((a2 * b - a * b2) * sum - 2.0 * num1 * (a1 + b1)) / (sum * sum * sum),
        ]
    }
}

/// Which piece of the contour a grid point lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    /// One of the two endpoints `x_A = (-R, 0)`, `x_B = (R, 0)`.
    Corner,
    /// The lower half circle `|x| = R`, `x2 < 0`.
    Semicircle,
    /// The perturbed surface `Gamma_R`.
    Surface,
}

/// The corner a grid point is closer to along the contour.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// A grid point of the graded parameterisation.
#[derive(Clone, Copy, Debug)]
pub struct MeshNode {
    /// Global parameter `t` in `[0, 2pi)`.
    pub param: f64,
    pub point: Point,
    /// `dz/dt`.
    pub velocity: Point,
    /// `d^2z/dt^2`.
    pub acceleration: Point,
    /// `|dz/dt|`.
    pub speed: f64,
    /// Unit normal pointing out of `D_R^-`.
    pub normal: Point,
    /// Trapezoidal weight `(pi/n) |dz/dt|`, zero at the corners.
    pub weight: f64,
    pub segment: Segment,
    pub side: Side,
    /// `point` minus the corner on `side`, computed without cancellation so
    /// that nodes graded within rounding distance of a corner stay distinct.
    pub offset: Point,
}

impl MeshNode {
    /// `x - y` for two grid points, exact to relative precision even when
    /// both sit next to the same corner.
    pub fn separation(&self, other: &MeshNode) -> Point {
        if self.side == other.side {
            self.offset - other.offset
        } else {
            self.point - other.point
        }
    }

    /// `x^re - y` where `x^re` mirrors this point in the plane.
    pub fn mirrored_separation(&self, other: &MeshNode) -> Point {
        if self.side == other.side {
            reflect(&self.offset) - other.offset
        } else {
            reflect(&self.point) - other.point
        }
    }
}

/// Discretisation of `∂D_R^-` on `2n` equispaced values of a global
/// `2pi`-periodic parameter. Grid index 0 is `x_A`, `1..n` lie on the half
/// circle, `n` is `x_B` and `n+1..2n` lie on the surface. Corners carry zero
/// weight and are not collocation nodes.
#[derive(Clone, Debug)]
pub struct BoundaryMesh {
    n: usize,
    radius: f64,
    grading: Grading,
    profile: SurfaceProfile,
    nodes: Vec<MeshNode>,
    unknowns: Vec<usize>,
}

impl BoundaryMesh {
    /// Intervals per sub-arc.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn profile(&self) -> &SurfaceProfile {
        &self.profile
    }

    /// All `2n` grid points including the two corners.
    pub fn grid(&self) -> &[MeshNode] {
        &self.nodes
    }

    /// Grid indices of the collocation nodes (everything but the corners).
    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    pub fn len(&self) -> usize {
        self.unknowns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unknowns.is_empty()
    }

    /// Collocation nodes in unknown order.
    pub fn nodes(&self) -> impl Iterator<Item = &MeshNode> + '_ {
        self.unknowns.iter().map(move |&g| &self.nodes[g])
    }

    pub fn corners(&self) -> (Point, Point) {
        (Point::new(-self.radius, 0.0), Point::new(self.radius, 0.0))
    }

    /// Quadrature approximation of the contour length.
    pub fn arclength(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// Grid spacing in the global parameter, `pi / n`.
    pub fn step(&self) -> f64 {
        PI / self.n as f64
    }
}

/// Builds the graded mesh of `∂D_R^-` for `profile`.
///
/// `n` is the number of parameter intervals per sub-arc; each arc then has
/// `n - 1` collocation nodes. `grading` is the polynomial order of the
/// substitution clustering nodes at the two corners.
pub fn build_mesh(profile: &SurfaceProfile, radius: f64, n: usize, grading: u32) -> Result<BoundaryMesh> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Config(format!("contour radius must be positive, got {radius}")));
    }
    if n < 8 || n % 2 != 0 {
        return Err(Error::Config(format!(
            "nodes per sub-arc must be even and >= 8, got {n}"
        )));
    }
    let grading = Grading::new(grading)?;
    if let Some((a, b)) = profile.support() {
        if a <= -radius || b >= radius {
            return Err(Error::Config(format!(
                "profile support [{a}, {b}] not strictly inside (-{radius}, {radius})"
            )));
        }
    }

    let step = PI / n as f64;
    let mut nodes = Vec::with_capacity(2 * n);
    for j in 0..2 * n {
        let t = j as f64 * step;
        let on_circle = j < n;
        let local = 2.0 * if on_circle { t } else { t - PI };
        let [u, u1, u2] = grading.fraction(local);
        let rest = grading.complement(local);
        let (du, ddu) = (2.0 * u1, 4.0 * u2);
        let segment = match (j, on_circle) {
            (0, _) => Segment::Corner,
            (j, _) if j == n => Segment::Corner,
            (_, true) => Segment::Semicircle,
            _ => Segment::Surface,
        };
        let (point, offset, velocity, acceleration, side) = if on_circle {
            // theta = pi + pi u, written through whichever of u, 1 - u is small
            let (cos_t, sin_t, offset, side) = if u <= 0.5 {
                let a = PI * u;
                let (s, c) = a.sin_cos();
                let half = (0.5 * a).sin();
                (-c, -s, Point::new(2.0 * radius * half * half, -radius * s), Side::A)
            } else {
                let a = PI * rest;
                let (s, c) = a.sin_cos();
                let half = (0.5 * a).sin();
                (c, -s, Point::new(-2.0 * radius * half * half, -radius * s), Side::B)
            };
            let dth = PI * du;
            let ddth = PI * ddu;
            let tangent = Point::new(-radius * sin_t, radius * cos_t);
            (
                Point::new(radius * cos_t, radius * sin_t),
                offset,
                tangent * dth,
                Point::new(-radius * cos_t, -radius * sin_t) * (dth * dth) + tangent * ddth,
                side,
            )
        } else {
            // x1 = R - 2R u runs from x_B back to x_A
            let (x1, off1, side) = if u <= 0.5 {
                (radius - 2.0 * radius * u, -2.0 * radius * u, Side::B)
            } else {
                (-radius + 2.0 * radius * rest, 2.0 * radius * rest, Side::A)
            };
            let dx = -2.0 * radius * du;
            let ddx = -2.0 * radius * ddu;
            let [h, h1, h2] = if segment == Segment::Corner {
                [0.0; 3]
            } else {
                profile.jet(x1)
            };
            (
                Point::new(x1, h),
                Point::new(off1, h),
                Point::new(dx, h1 * dx),
                Point::new(ddx, h2 * dx * dx + h1 * ddx),
                side,
            )
        };
        let speed = velocity.norm();
        let normal = if segment == Segment::Corner {
            // bisector of the two one-sided normals
            let sign = if side == Side::A { -1.0 } else { 1.0 };
            Point::new(sign, 1.0) / 2f64.sqrt()
        } else {
            Point::new(velocity.y, -velocity.x) / speed
        };
        if segment == Segment::Surface && point.y != 0.0 && point.norm() >= radius {
            return Err(Error::Config(format!(
                "surface point ({}, {}) leaves the disc of radius {radius}",
                point.x, point.y
            )));
        }
        nodes.push(MeshNode {
            param: t,
            point,
            velocity,
            acceleration,
            speed,
            normal,
            weight: if segment == Segment::Corner { 0.0 } else { step * speed },
            segment,
            side,
            offset,
        });
    }
    let unknowns = (0..2 * n).filter(|&j| j != 0 && j != n).collect();
    Ok(BoundaryMesh {
        n,
        radius,
        grading,
        profile: profile.clone(),
        nodes,
        unknowns,
    })
}
