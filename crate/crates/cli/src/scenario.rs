//! Scenario configuration files.
//!
//! Scalar fields that must be positive are newtypes validated during
//! deserialization, so a bad value is reported with its line and column.

use std::path::PathBuf;

use potentia::grids::{ball_grid, box_grid, fibonacci_sphere};
use potentia::{make_measure, DiscreteMeasure, Point, Region};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

macro_rules! checked_newtype {
    ($name:ident, $inner:ty, $repr:literal, $check:expr, $what:literal) => {
        #[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = $repr)]
        pub struct $name(pub $inner);

        impl TryFrom<$inner> for $name {
            type Error = String;
            fn try_from(v: $inner) -> Result<Self, String> {
                let check: fn($inner) -> bool = $check;
                if check(v) {
                    Ok($name(v))
                } else {
                    Err(format!(concat!("expected ", $what, ", got {}"), v))
                }
            }
        }
    };
}

checked_newtype!(Positive, f64, "f64", |v| v > 0.0 && v.is_finite(), "a finite positive number");
checked_newtype!(NonNegative, f64, "f64", |v| v >= 0.0 && v.is_finite(), "a finite non-negative number");
checked_newtype!(Count, usize, "usize", |v| v > 0, "a positive count");
checked_newtype!(Fraction, f64, "f64", |v| v > 0.0 && v <= 1.0, "a fraction in (0, 1]");
checked_newtype!(QFactor, f64, "f64", |v| v >= 1.0 && v.is_finite(), "a finite factor >= 1");

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub alpha: Positive,
    pub dim: Count,
    /// Defaults to half the smallest nearest-neighbour spacing of the region.
    #[serde(default)]
    pub epsilon: Option<NonNegative>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    Sphere {
        radius: Positive,
        count: Count,
        #[serde(default)]
        center: [f64; 3],
    },
    Ball {
        radius: Positive,
        spacing: Positive,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        counts: Vec<Count>,
    },
    Points {
        points: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Equal atoms on a sphere.
    Shell {
        radius: Positive,
        mass: Positive,
        count: Count,
        #[serde(default)]
        center: [f64; 3],
    },
    Atoms {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    /// `count` atoms of equal weight uniformly at random in a box.
    UniformBox {
        lo: [f64; 3],
        hi: [f64; 3],
        count: Count,
        mass: Positive,
    },
    /// Random weights on the region points, normalized to `mass`.
    OnRegion {
        mass: Positive,
    },
}

/// Subset of the region points.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubsetSpec {
    /// Points with `normal · x ≥ offset`.
    Halfspace {
        normal: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    Every {
        step: Count,
    },
    Random {
        fraction: Fraction,
    },
    Single {
        index: usize,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    /// Directions, normalized on use.
    #[serde(default)]
    pub rays: Vec<Vec<f64>>,
    #[serde(default)]
    pub radii: Vec<f64>,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    /// Also probe at every region point and source atom.
    #[serde(default)]
    pub include_region: bool,
    #[serde(default)]
    pub include_source: bool,
}

/// Closed-form values to compare against.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Classical {
    pub capacity: Option<Positive>,
    pub swept_mass: Option<NonNegative>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Sweep with its certificate, region potentials and Pythagoras check.
    Sweep {
        #[serde(default)]
        tol: Option<Positive>,
    },
    Domination {
        #[serde(default)]
        tol_rel: Option<Positive>,
    },
    Mass {
        #[serde(default)]
        tol_rel: Option<Positive>,
    },
    Equilibrium {
        #[serde(default)]
        tol: Option<Positive>,
        #[serde(default)]
        frostman_tol: Option<Positive>,
    },
    Truncated {
        q_factor: QFactor,
    },
    Idempotence,
    Uniqueness,
    Rest {
        subset: SubsetSpec,
    },
    Monotonicity {
        subset: SubsetSpec,
        #[serde(default)]
        tol: Option<Positive>,
    },
    MinimalPotential {
        competitors: Count,
    },
    Exhaustion {
        chains: Count,
        length: Count,
        #[serde(default)]
        tol: Option<Positive>,
    },
    Decreasing {
        chains: Count,
        length: Count,
        extra: RegionSpec,
        #[serde(default)]
        tol: Option<Positive>,
    },
    EquilibriumExhaustion {
        chains: Count,
        length: Count,
        #[serde(default)]
        tol: Option<Positive>,
    },
    /// Potentials of the source and the swept measure along the probe rays.
    Profile,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Sweep { .. } => "sweep",
            Experiment::Domination { .. } => "domination",
            Experiment::Mass { .. } => "mass",
            Experiment::Equilibrium { .. } => "equilibrium",
            Experiment::Truncated { .. } => "truncated",
            Experiment::Idempotence => "idempotence",
            Experiment::Uniqueness => "uniqueness",
            Experiment::Rest { .. } => "rest",
            Experiment::Monotonicity { .. } => "monotonicity",
            Experiment::MinimalPotential { .. } => "minimal_potential",
            Experiment::Exhaustion { .. } => "exhaustion",
            Experiment::Decreasing { .. } => "decreasing",
            Experiment::EquilibriumExhaustion { .. } => "equilibrium_exhaustion",
            Experiment::Profile => "profile",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kernel: KernelConfig,
    pub region: RegionSpec,
    pub source: SourceSpec,
    #[serde(default)]
    pub probes: ProbeSpec,
    pub experiments: Vec<Experiment>,
    #[serde(default)]
    pub classical: Classical,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if scenario.experiments.is_empty() {
        return Err(CliError::Config("scenario declares no experiments".into()));
    }
    Ok(scenario)
}

fn point(coords: Vec<f64>) -> Result<Point, CliError> {
    Point::new(coords).map_err(|e| CliError::Config(e.to_string()))
}

fn config<T>(r: potentia::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(e.to_string()))
}

impl RegionSpec {
    pub fn build(&self, label: &str) -> Result<Region, CliError> {
        let pts = match self {
            RegionSpec::Sphere { radius, count, center } => config(fibonacci_sphere(count.0, radius.0, *center))?,
            RegionSpec::Ball { radius, spacing } => config(ball_grid(radius.0, spacing.0))?,
            RegionSpec::Box { lo, hi, counts } => {
                let counts: Vec<usize> = counts.iter().map(|c| c.0).collect();
                config(box_grid(lo, hi, &counts))?
            }
            RegionSpec::Points { points } => points.iter().cloned().map(point).collect::<Result<_, _>>()?,
        };
        config(Region::new(pts, label))
    }

    /// Same generator with a different point count; used by refinement.
    pub fn with_count(&self, n: usize) -> Result<RegionSpec, CliError> {
        match self {
            RegionSpec::Sphere { radius, center, .. } => Ok(RegionSpec::Sphere {
                radius: *radius,
                count: Count(n),
                center: *center,
            }),
            _ => Err(CliError::Config("refinement needs a sphere region".into())),
        }
    }
}

impl SourceSpec {
    pub fn build(&self, region: &Region, rng: &mut ChaCha8Rng) -> Result<DiscreteMeasure, CliError> {
        match self {
            SourceSpec::Shell { radius, mass, count, center } => {
                let pts = config(fibonacci_sphere(count.0, radius.0, *center))?;
                config(make_measure(pts, vec![mass.0 / count.0 as f64; count.0]))
            }
            SourceSpec::Atoms { points, weights } => {
                let pts = points.iter().cloned().map(point).collect::<Result<_, _>>()?;
                config(make_measure(pts, weights.clone()))
            }
            SourceSpec::UniformBox { lo, hi, count, mass } => {
                let pts = (0..count.0)
                    .map(|_| point((0..3).map(|d| rng.gen_range(lo[d]..hi[d])).collect()))
                    .collect::<Result<_, _>>()?;
                config(make_measure(pts, vec![mass.0 / count.0 as f64; count.0]))
            }
            SourceSpec::OnRegion { mass } => {
                let raw: Vec<f64> = (0..region.len()).map(|_| rng.gen_range(0.1..1.0)).collect();
                let total: f64 = raw.iter().sum();
                config(region.measure(raw.iter().map(|w| w * mass.0 / total).collect()))
            }
        }
    }
}

impl SubsetSpec {
    pub fn indices(&self, region: &Region, rng: &mut ChaCha8Rng) -> Result<Vec<usize>, CliError> {
        let n = region.len();
        let idx: Vec<usize> = match self {
            SubsetSpec::Halfspace { normal, offset } => region
                .points()
                .iter()
                .enumerate()
                .filter(|(_, p)| p.coords().iter().zip(normal).map(|(a, b)| a * b).sum::<f64>() >= *offset)
                .map(|(i, _)| i)
                .collect(),
            SubsetSpec::Every { step } => (0..n).step_by(step.0).collect(),
            SubsetSpec::Random { fraction } => {
                let mut all: Vec<usize> = (0..n).collect();
                all.shuffle(rng);
                let k = ((fraction.0 * n as f64).ceil() as usize).clamp(1, n);
                let mut chosen = all[..k].to_vec();
                chosen.sort_unstable();
                chosen
            }
            SubsetSpec::Single { index } => {
                if *index >= n {
                    return Err(CliError::Config(format!("subset index {index} out of range for {n} points")));
                }
                vec![*index]
            }
        };
        if idx.is_empty() {
            return Err(CliError::Config("subset selects no region points".into()));
        }
        Ok(idx)
    }
}

impl ProbeSpec {
    pub fn build(&self, region: &Region, source: &DiscreteMeasure) -> Result<Vec<Point>, CliError> {
        let mut out = Vec::new();
        for ray in &self.rays {
            let norm = ray.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Err(CliError::Config("probe ray must be a nonzero direction".into()));
            }
            for r in &self.radii {
                out.push(point(ray.iter().map(|v| v / norm * r).collect())?);
            }
        }
        for p in &self.points {
            out.push(point(p.clone())?);
        }
        if self.include_region {
            out.extend(region.points().iter().cloned());
        }
        if self.include_source {
            out.extend(source.points().iter().cloned());
        }
        Ok(out)
    }
}

/// Deterministic generator for one named purpose within a scenario.
pub fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_count_is_rejected_with_position() {
        let text = r#"{
  "name": "bad",
  "kernel": {"alpha": 2.0, "dim": 3},
  "region": {"type": "sphere", "radius": 1.0, "count": 0},
  "source": {"type": "on_region", "mass": 1.0},
  "experiments": [{"kind": "sweep"}]
}"#;
        match parse_scenario(text) {
            Err(CliError::Config(msg)) => assert!(msg.contains("line 4"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let text = r#"{"name": "x", "kernel": {"alpha": 2.0, "dim": 3, "eps": 0.1},
            "region": {"type": "sphere", "radius": 1.0, "count": 4},
            "source": {"type": "on_region", "mass": 1.0}, "experiments": [{"kind": "sweep"}]}"#;
        assert!(matches!(parse_scenario(text), Err(CliError::Config(_))));
    }

    #[test]
    fn halfspace_subset() {
        let region = RegionSpec::Sphere { radius: Positive(1.0), count: Count(50), center: [0.0; 3] }
            .build("s")
            .unwrap();
        let sub = SubsetSpec::Halfspace { normal: vec![0.0, 0.0, 1.0], offset: 0.0 };
        let idx = sub.indices(&region, &mut stream(1, 0)).unwrap();
        assert_eq!(idx.len(), 25);
    }
}
