//! Synthetic intensity-only measurements: measurement grids, the
//! multiplicative noise model, and a plain-text dataset format.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::forward::{
    assemble_rhs, assemble_system, eval_far_field, eval_near_field, segment_points, solve_density, DensitySolution,
    RhsSource, SolverSettings,
};
use crate::geometry::SurfaceProfile;
use crate::waves::IncidentConfig;
use crate::{Complex64, Error, Point, Result};

/// `n_f` equidistant observation angles `pi (j - 1/2) / n_f`, `j = 1..=n_f`.
pub fn far_grid(n_f: usize) -> Result<Vec<f64>> {
    if n_f < 2 {
        return Err(Error::Config(format!(
            "far-field grid needs at least 2 angles, got {n_f}"
        )));
    }
    Ok((1..=n_f).map(|j| PI * (j as f64 - 0.5) / n_f as f64).collect())
}

/// Distribution of the factor `zeta` in `|u|^2 (1 + delta zeta)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseDistribution {
    /// Standard normal clamped to `[-1, 1]`.
    #[default]
    ClampedNormal,
    /// Uniform on `[-1, 1]`.
    Uniform,
}

impl NoiseDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseDistribution::ClampedNormal => "clamped-normal",
            NoiseDistribution::Uniform => "uniform",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "clamped-normal" => Ok(NoiseDistribution::ClampedNormal),
            "uniform" => Ok(NoiseDistribution::Uniform),
            other => Err(Error::Parse(format!("unknown noise distribution `{other}`"))),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            NoiseDistribution::ClampedNormal => rng.sample::<f64, _>(StandardNormal).clamp(-1.0, 1.0),
            NoiseDistribution::Uniform => rng.gen_range(-1.0..=1.0),
        }
    }
}

/// Noise level, seed and distribution of a dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
    pub distribution: NoiseDistribution,
}

impl NoiseSpec {
    pub fn exact() -> Self {
        NoiseSpec {
            delta: 0.0,
            seed: 0,
            distribution: NoiseDistribution::default(),
        }
    }
}

/// Multiplies every entry by `1 + delta zeta_j` with one draw per entry.
///
/// `stream` selects an independent ChaCha stream under the same seed, so
/// each data vector gets its own reproducible sequence regardless of the
/// order in which vectors are produced.
pub fn add_noise_stream(
    exact: &[f64],
    delta: f64,
    seed: u64,
    stream: u64,
    distribution: NoiseDistribution,
) -> Result<Vec<f64>> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::Config(format!("noise level must be nonnegative, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(exact.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Ok(exact
        .iter()
        .map(|v| v * (1.0 + delta * distribution.draw(&mut rng)))
        .collect())
}

/// [`add_noise_stream`] on stream 0 with the default distribution.
pub fn add_noise(exact: &[f64], delta: f64, seed: u64) -> Result<Vec<f64>> {
    add_noise_stream(exact, delta, seed, 0, NoiseDistribution::default())
}

/// Where the intensities are recorded.
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    /// Observation angles in `(0, pi)`.
    Far { angles: Vec<f64> },
    /// `points` equidistant points on `{(x1, height) : |x1| <= half_width}`.
    Near {
        height: f64,
        half_width: f64,
        points: usize,
    },
}

impl Grid {
    pub fn far(n_f: usize) -> Result<Self> {
        Ok(Grid::Far { angles: far_grid(n_f)? })
    }

    pub fn near(height: f64, half_width: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Config(format!(
                "near-field grid needs at least 2 points, got {points}"
            )));
        }
        if !(half_width > 0.0) || !height.is_finite() {
            return Err(Error::Config("near-field segment must have positive half-width".into()));
        }
        Ok(Grid::Near {
            height,
            half_width,
            points,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Grid::Far { .. } => "far",
            Grid::Near { .. } => "near",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Far { angles } => angles.len(),
            Grid::Near { points, .. } => *points,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Angles for far grids, `x1` coordinates for near grids.
    pub fn coordinates(&self) -> Vec<f64> {
        match self {
            Grid::Far { angles } => angles.clone(),
            Grid::Near {
                height,
                half_width,
                points,
            } => segment_points(*height, *half_width, *points)
                .iter()
                .map(|p| p.x)
                .collect(),
        }
    }

    /// Measurement locations in the plane (unit directions for far grids).
    pub fn points(&self) -> Vec<Point> {
        match self {
            Grid::Far { angles } => angles.iter().map(|t| Point::new(t.cos(), t.sin())).collect(),
            Grid::Near {
                height,
                half_width,
                points,
            } => segment_points(*height, *half_width, *points),
        }
    }
}

/// Complex far-field or near-field values of a solved density on `grid`.
pub fn measured_field(sol: &DensitySolution, cfg: &IncidentConfig, grid: &Grid) -> Result<Vec<Complex64>> {
    match grid {
        Grid::Far { angles } => Ok(eval_far_field(sol, angles)),
        Grid::Near {
            height,
            half_width,
            points,
        } => eval_near_field(sol, cfg, *height, *half_width, *points),
    }
}

/// Exact intensities at wavenumber `k` for every incident configuration,
/// from one factorisation. Returns the intensities, the coupling parameter
/// and the mesh size used.
pub fn exact_intensities(
    profile: &SurfaceProfile,
    k: f64,
    incident: &[IncidentConfig],
    grid: &Grid,
    settings: &SolverSettings,
) -> Result<(Vec<Vec<f64>>, f64, usize)> {
    let mesh = settings.mesh_for(profile, k)?;
    let eta = settings.eta_for(k);
    let op = assemble_system(&mesh, k, eta)?;
    let values = incident
        .iter()
        .map(|cfg| {
            let sol = solve_density(&op, &assemble_rhs(&mesh, RhsSource::Incident(cfg))?)?;
            Ok(measured_field(&sol, cfg, grid)?.iter().map(|v| v.norm_sqr()).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok((values, eta, mesh.n()))
}

/// Intensity data at one wavenumber, one vector per incident configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    pub k: f64,
    pub grid: Grid,
    pub incident: Vec<IncidentConfig>,
    pub values: Vec<Vec<f64>>,
    pub noise: NoiseSpec,
    pub eta: f64,
    pub mesh_n: usize,
    /// Human-readable description of the generating profile.
    pub profile: String,
}

/// Wavenumbers `1, 3, ..., 2N - 1`.
pub fn odd_wavenumbers(count: usize) -> Vec<f64> {
    (0..count).map(|i| (2 * i + 1) as f64).collect()
}

/// Forward-solves `profile` for every wavenumber and incident
/// configuration, and applies noise with one ChaCha stream per data vector.
pub fn make_dataset(
    profile: &SurfaceProfile,
    profile_label: &str,
    angles: &[Vec<f64>],
    ks: &[f64],
    grid: &Grid,
    noise: &NoiseSpec,
    settings: &SolverSettings,
) -> Result<Vec<MeasurementSet>> {
    if angles.is_empty() || ks.is_empty() {
        return Err(Error::Config(
            "dataset needs at least one wavenumber and one incident configuration".into(),
        ));
    }
    ks.iter()
        .enumerate()
        .map(|(ki, &k)| {
            let incident = angles
                .iter()
                .map(|a| IncidentConfig::new(k, a.clone()))
                .collect::<Result<Vec<_>>>()?;
            let (exact, eta, mesh_n) = exact_intensities(profile, k, &incident, grid, settings)?;
            let values = exact
                .iter()
                .enumerate()
                .map(|(l, v)| {
                    let stream = (ki * angles.len() + l) as u64;
                    add_noise_stream(v, noise.delta, noise.seed, stream, noise.distribution)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MeasurementSet {
                k,
                grid: grid.clone(),
                incident,
                values,
                noise: *noise,
                eta,
                mesh_n,
                profile: profile_label.to_string(),
            })
        })
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(";")
}

impl MeasurementSet {
    /// Serialises to the `#`-header text format read by [`MeasurementSet::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# kind = {}", self.grid.kind());
        let _ = writeln!(s, "# k = {:?}", self.k);
        match &self.grid {
            Grid::Far { angles } => {
                let _ = writeln!(s, "# grid = far");
                let _ = writeln!(s, "# points = {}", angles.len());
            }
            Grid::Near {
                height,
                half_width,
                points,
            } => {
                let _ = writeln!(s, "# grid = near");
                let _ = writeln!(s, "# height = {height:?}");
                let _ = writeln!(s, "# half_width = {half_width:?}");
                let _ = writeln!(s, "# points = {points}");
            }
        }
        let thetas: Vec<String> = self.incident.iter().map(|c| join(c.angles())).collect();
        let _ = writeln!(s, "# incident = {}", thetas.join(" | "));
        let _ = writeln!(s, "# delta = {:?}", self.noise.delta);
        let _ = writeln!(s, "# seed = {}", self.noise.seed);
        let _ = writeln!(s, "# noise = {}", self.noise.distribution.name());
        let _ = writeln!(
            s,
            "# noise_draws = one per measurement point, one stream per data vector"
        );
        let _ = writeln!(s, "# eta = {:?}", self.eta);
        let _ = writeln!(s, "# mesh_n = {}", self.mesh_n);
        let _ = writeln!(s, "# profile = {}", self.profile);
        let coords = self.grid.coordinates();
        for (l, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "# block = {l}");
            for (j, (x, y)) in coords.iter().zip(v).enumerate() {
                let _ = writeln!(s, "{j}, {x:.16e}, {y:.16e}");
            }
        }
        s
    }

    /// Reads the format written by [`MeasurementSet::to_text`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut header = std::collections::HashMap::new();
        let mut blocks: Vec<Vec<(f64, f64)>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((key, value)) = rest.split_once('=') {
                    let key = key.trim();
                    if key == "block" {
                        blocks.push(Vec::new());
                    } else {
                        header.insert(key.to_string(), value.trim().to_string());
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let block = blocks
                .last_mut()
                .ok_or_else(|| Error::Parse(format!("line {}: data before any block header", lineno + 1)))?;
            if fields.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 fields", lineno + 1)));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number `{s}`", lineno + 1)))
            };
            block.push((num(fields[1])?, num(fields[2])?));
        }
        let get = |key: &str| {
            header
                .get(key)
                .map(String::as_str)
                .ok_or_else(|| Error::Parse(format!("missing header `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| Error::Parse(format!("header `{key}` is not a number")))
        };
        let k = num("k")?;
        let points = num("points")? as usize;
        let grid = match get("grid")? {
            "far" => Grid::far(points)?,
            "near" => Grid::near(num("height")?, num("half_width")?, points)?,
            other => return Err(Error::Parse(format!("unknown grid `{other}`"))),
        };
        let incident = get("incident")?
            .split('|')
            .map(|group| {
                let angles = group
                    .split(';')
                    .map(|a| {
                        a.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Parse(format!("bad angle `{a}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                IncidentConfig::new(k, angles)
            })
            .collect::<Result<Vec<_>>>()?;
        if blocks.len() != incident.len() {
            return Err(Error::Parse(format!(
                "{} data blocks for {} incident configurations",
                blocks.len(),
                incident.len()
            )));
        }
        if let Some(b) = blocks.iter().find(|b| b.len() != points) {
            return Err(Error::Parse(format!("block with {} rows, expected {points}", b.len())));
        }
        Ok(MeasurementSet {
            k,
            grid,
            incident,
            values: blocks.iter().map(|b| b.iter().map(|r| r.1).collect()).collect(),
            noise: NoiseSpec {
                delta: num("delta")?,
                seed: get("seed")?.parse().map_err(|_| Error::Parse("bad seed".into()))?,
                distribution: NoiseDistribution::parse(get("noise")?)?,
            },
            eta: num("eta")?,
            mesh_n: num("mesh_n")? as usize,
            profile: get("profile")?.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_6;

    #[test]
    fn far_grid_layout() {
        let g = far_grid(2).unwrap();
        assert!((g[0] - PI / 4.0).abs() < 1e-15 && (g[1] - 3.0 * PI / 4.0).abs() < 1e-15);
        let g = far_grid(200).unwrap();
        assert!((g[1] - g[0] - PI / 200.0).abs() < 1e-14);
        assert!(g.iter().all(|&t| t > 0.0 && t < PI));
        assert!(far_grid(1).is_err());
    }

    #[test]
    fn noise_is_bounded_and_reproducible() {
        let exact: Vec<f64> = (0..500).map(|i| 1.0 + i as f64).collect();
        assert_eq!(add_noise(&exact, 0.0, 3).unwrap(), exact);
        for dist in [NoiseDistribution::ClampedNormal, NoiseDistribution::Uniform] {
            let a = add_noise_stream(&exact, 0.05, 42, 3, dist).unwrap();
            let b = add_noise_stream(&exact, 0.05, 42, 3, dist).unwrap();
            assert_eq!(a, b);
            let c = add_noise_stream(&exact, 0.05, 42, 4, dist).unwrap();
            assert_ne!(a, c);
            for (x, y) in exact.iter().zip(&a) {
                assert!((y - x).abs() <= 0.05 * x * (1.0 + 1e-12));
            }
        }
        assert!(add_noise(&exact, -0.1, 1).is_err());
    }

    proptest! {
        #[test]
        fn noisy_intensities_stay_nonnegative(seed in 0u64..1000, delta in 0.0f64..1.0) {
            let exact = vec![0.3, 2.0, 0.0, 7.5];
            let noisy = add_noise(&exact, delta, seed).unwrap();
            prop_assert!(noisy.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn odd_frequency_ladder() {
        assert_eq!(
            odd_wavenumbers(10),
            vec![1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0]
        );
    }

    #[test]
    fn flat_surface_scatters_nothing() {
        let sets = make_dataset(
            &SurfaceProfile::Flat,
            "flat",
            &[vec![-FRAC_PI_6]],
            &[1.0, 3.0],
            &Grid::far(50).unwrap(),
            &NoiseSpec::exact(),
            &SolverSettings::default(),
        )
        .unwrap();
        for s in &sets {
            assert!(s.values[0].iter().all(|v| *v <= 1e-16));
        }
    }

    #[test]
    fn dataset_round_trips_through_text() {
        let noise = NoiseSpec {
            delta: 0.05,
            seed: 9,
            distribution: NoiseDistribution::Uniform,
        };
        for grid in [Grid::far(20).unwrap(), Grid::near(1.0, 1.0, 15).unwrap()] {
            let sets = make_dataset(
                &SurfaceProfile::Example1,
                "example1",
                &[vec![-FRAC_PI_6, FRAC_PI_6], vec![0.2, -0.4]],
                &[1.0],
                &grid,
                &noise,
                &SolverSettings::default(),
            )
            .unwrap();
            let text = sets[0].to_text();
            assert!(text.lines().filter(|l| !l.starts_with('#')).count() == 2 * grid.len());
            let back = MeasurementSet::parse(&text).unwrap();
            assert_eq!(back, sets[0]);
        }
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let run = || {
            make_dataset(
                &SurfaceProfile::Example1,
                "example1",
                &[vec![-FRAC_PI_6]],
                &[1.0, 3.0],
                &Grid::far(30).unwrap(),
                &NoiseSpec {
                    delta: 0.05,
                    seed: 5,
                    distribution: NoiseDistribution::ClampedNormal,
                },
                &SolverSettings::default(),
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_text(), y.to_text());
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(matches!(MeasurementSet::parse("1, 2, 3"), Err(Error::Parse(_))));
        assert!(MeasurementSet::parse("# kind = far\n").is_err());
    }
}
