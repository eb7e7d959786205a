use potentia::balayage::{
    check_certificate, check_domination, check_idempotence, check_mass, check_minimal_potential,
    check_monotonicity, check_pythagoras, check_region_potentials, check_sweep_with_rest, check_uniqueness,
    decreasing_experiment, exhaustion_experiment, sweep, sweep_truncated, ChainOutcome, MONOTONE_TOL,
};
use potentia::coneqp::DEFAULT_TOLERANCE;
use potentia::equilibrium::{
    check_equilibrium, equilibrium_by_potential_bound, equilibrium_exhaustion, equilibrium_measure, frostman_excess,
};
use potentia::{
    region_subset, Detail, DiscreteMeasure, EnergyContext, EquilibriumResult, KernelSpec, Point, Region,
    SweepResult, TheoremReport,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scenario::{stream, Experiment, Scenario};
use crate::CliError;

const EQUILIBRIUM_TOL: f64 = 1e-8;
const FROSTMAN_TOL: f64 = 1e-2;
const ROUTES_REL: f64 = 1e-6;
const CAPACITY_REL: f64 = 5e-2;

/// A plot-ready numeric table, written as `tables/<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledSweep {
    pub experiment: String,
    pub result: SweepResult,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledEquilibrium {
    pub experiment: String,
    pub result: EquilibriumResult,
}

/// Everything a scenario run produced. Serialized as `results.json`; it
/// holds no timestamps so identical inputs give identical bytes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioResults {
    pub scenario: String,
    pub kernel: KernelSpec,
    pub grid_spacing: Option<f64>,
    pub region_size: usize,
    pub source_mass: f64,
    pub all_pass: bool,
    pub reports: Vec<TheoremReport>,
    pub warnings: Vec<String>,
    pub sweeps: Vec<LabeledSweep>,
    pub equilibria: Vec<LabeledEquilibrium>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub results: ScenarioResults,
    pub tables: Vec<Table>,
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Multiplies every report tolerance.
    pub tol_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { tol_scale: 1.0 }
    }
}

#[derive(Default)]
struct ExperimentOutput {
    reports: Vec<TheoremReport>,
    sweeps: Vec<LabeledSweep>,
    equilibria: Vec<LabeledEquilibrium>,
    tables: Vec<Table>,
    warnings: Vec<String>,
}

/// Immutable state shared by all experiments of one run.
struct Setup<'a> {
    scenario: &'a Scenario,
    ctx: EnergyContext,
    region: Region,
    source: DiscreteMeasure,
    probes: Vec<Point>,
    base: SweepResult,
    equilibrium: Option<EquilibriumResult>,
}

/// Builds the region, kernel, source and probes of a scenario.
pub fn prepare(scenario: &Scenario) -> Result<(Region, KernelSpec, DiscreteMeasure, Vec<Point>), CliError> {
    let region = scenario.region.build("region")?;
    let h = region.min_spacing();
    let epsilon = match (scenario.kernel.epsilon, h) {
        (Some(e), _) => e.0,
        (None, Some(h)) => h / 2.0,
        (None, None) => {
            return Err(CliError::Config(
                "epsilon is required when the region has fewer than two points".into(),
            ))
        }
    };
    let kernel = KernelSpec::new(scenario.kernel.alpha.0, scenario.kernel.dim.0, epsilon)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let source = scenario.source.build(&region, &mut stream(scenario.seed, 0))?;
    let probes = scenario.probes.build(&region, &source)?;
    Ok((region, kernel, source, probes))
}

pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput, CliError> {
    let (region, kernel, source, probes) = prepare(scenario)?;
    let ctx = EnergyContext::new(kernel);
    let base = sweep(&ctx, &source, &region, DEFAULT_TOLERANCE).map_err(|e| CliError::from_core("sweep", e))?;
    let needs_eq = scenario
        .experiments
        .iter()
        .any(|e| matches!(e, Experiment::Mass { .. } | Experiment::Equilibrium { .. }));
    let equilibrium = if needs_eq {
        Some(equilibrium_measure(&ctx, &region, DEFAULT_TOLERANCE).map_err(|e| CliError::from_core("equilibrium", e))?)
    } else {
        None
    };
    let setup = Setup {
        scenario,
        ctx,
        region,
        source,
        probes,
        base,
        equilibrium,
    };

    let outputs: Vec<ExperimentOutput> = scenario
        .experiments
        .par_iter()
        .enumerate()
        .map(|(i, exp)| {
            log::info!("{}: running {}", scenario.name, exp.name());
            run_experiment(&setup, i, exp).map_err(|e| CliError::from_core(exp.name(), e))
        })
        .collect::<Result<_, _>>()?;

    let mut results = ScenarioResults {
        scenario: scenario.name.clone(),
        kernel: *setup.ctx.kernel(),
        grid_spacing: setup.region.min_spacing(),
        region_size: setup.region.len(),
        source_mass: setup.source.total_mass(),
        all_pass: true,
        reports: Vec::new(),
        warnings: Vec::new(),
        sweeps: Vec::new(),
        equilibria: Vec::new(),
    };
    let mut tables = Vec::new();
    for out in outputs {
        results.reports.extend(out.reports);
        results.warnings.extend(out.warnings);
        results.sweeps.extend(out.sweeps);
        results.equilibria.extend(out.equilibria);
        tables.extend(out.tables);
    }
    for r in &mut results.reports {
        rescale(r, opts.tol_scale);
    }
    results.all_pass = results.reports.iter().all(|r| r.pass);
    for w in &results.warnings {
        log::warn!("{}: {w}", scenario.name);
    }
    Ok(RunOutput { results, tables })
}

fn rescale(r: &mut TheoremReport, scale: f64) {
    r.tolerance *= scale;
    r.pass = r.worst_residual <= r.tolerance;
}

fn with_tolerance(r: TheoremReport, tol: f64) -> TheoremReport {
    TheoremReport::new(r.theorem_id, tol, r.details)
}

fn run_experiment(s: &Setup, index: usize, exp: &Experiment) -> potentia::Result<ExperimentOutput> {
    let ctx = &s.ctx;
    let mu = &s.source;
    let region = &s.region;
    let name = exp.name().to_string();
    let mut out = ExperimentOutput::default();
    let purpose = 1000 * (index as u64 + 1);

    match exp {
        Experiment::Sweep { tol } => {
            let tol = tol.map_or(DEFAULT_TOLERANCE, |t| t.0);
            let result = if tol == DEFAULT_TOLERANCE {
                s.base.clone()
            } else {
                sweep(ctx, mu, region, tol)?
            };
            out.reports.push(check_certificate(&result));
            out.reports.extend(check_region_potentials(ctx, mu, &result, region, tol)?);
            out.reports.push(check_pythagoras(ctx, mu, &result)?);
            out.sweeps.push(LabeledSweep { experiment: name, result });
        }
        Experiment::Domination { tol_rel } => {
            let mut report = check_domination(ctx, mu, &s.base, &s.probes)?;
            if let Some(rel) = tol_rel {
                let max_source = report.details.iter().map(|d| d.rhs).fold(0.0, f64::max);
                report = with_tolerance(report, rel.0 * max_source);
            }
            let mut table = Table::new("domination", &["probe", "radius", "source_potential", "swept_potential", "excess"]);
            for (j, (d, p)) in report.details.iter().zip(&s.probes).enumerate() {
                table.push(vec![j.to_string(), num(p.norm()), num(d.rhs), num(d.lhs), num(d.residual)]);
            }
            out.reports.push(report);
            out.tables.push(table);
        }
        Experiment::Mass { tol_rel } => {
            let eq = s.equilibrium.as_ref().expect("equilibrium computed for mass checks");
            let mut reports = check_mass(ctx, mu, &s.base, eq)?;
            let source_mass = mu.total_mass();
            if let Some(rel) = tol_rel {
                reports[1] = with_tolerance(reports[1].clone(), rel.0 * source_mass);
            }
            let rel = tol_rel.map_or(potentia::balayage::MASS_FORMULA_REL, |t| t.0);
            let formula = reports[1].details[0].rhs;
            let mut table = Table::new("mass", &["source_mass", "swept_mass", "formula", "classical"]);
            let classical = s.scenario.classical.swept_mass.map(|c| c.0);
            table.push(vec![
                num(source_mass),
                num(s.base.swept_mass),
                num(formula),
                classical.map_or_else(String::new, num),
            ]);
            if let Some(c) = classical {
                reports.push(TheoremReport::new(
                    "mass.classical",
                    rel * source_mass,
                    vec![Detail::new("swept vs classical", s.base.swept_mass, c, (s.base.swept_mass - c).abs())],
                ));
            }
            out.reports.extend(reports);
            out.tables.push(table);
        }
        Experiment::Equilibrium { tol, frostman_tol } => {
            let eq = s.equilibrium.clone().expect("equilibrium computed");
            out.reports
                .extend(check_equilibrium(&eq, tol.map_or(EQUILIBRIUM_TOL, |t| t.0)));
            let oracle = equilibrium_by_potential_bound(ctx, region, DEFAULT_TOLERANCE)?;
            let rel = (eq.capacity - oracle.capacity).abs() / eq.capacity.max(f64::MIN_POSITIVE);
            out.reports.push(TheoremReport::new(
                "equilibrium.routes_agree",
                ROUTES_REL,
                vec![Detail::new("unit mass vs potential bound", eq.capacity, oracle.capacity, rel)],
            ));
            let classical = s.scenario.classical.capacity.map(|c| c.0);
            if let Some(c) = classical {
                out.reports.push(TheoremReport::new(
                    "equilibrium.classical_capacity",
                    CAPACITY_REL,
                    vec![Detail::new("capacity vs classical", eq.capacity, c, (eq.capacity - c).abs() / c)],
                ));
            }
            let mut frostman_probes = s.probes.clone();
            frostman_probes.extend(region.points().iter().cloned());
            let excess = frostman_excess(ctx, &eq, &frostman_probes)?;
            let limit = frostman_tol.map_or(FROSTMAN_TOL, |t| t.0);
            if excess > limit {
                out.warnings.push(format!(
                    "equilibrium potential exceeds 1 by {excess:e} (> {limit:e}) at a probe; \
                     the regularized kernel does not satisfy the maximum principle exactly"
                ));
            }
            let mut table = Table::new("capacity", &["points", "spacing", "epsilon", "capacity", "classical", "relative_error"]);
            table.push(vec![
                region.len().to_string(),
                region.min_spacing().map_or_else(String::new, num),
                num(ctx.kernel().epsilon),
                num(eq.capacity),
                classical.map_or_else(String::new, num),
                classical.map_or_else(String::new, |c| num((eq.capacity - c).abs() / c)),
            ]);
            out.tables.push(table);
            out.equilibria.push(LabeledEquilibrium { experiment: name, result: eq });
        }
        Experiment::Truncated { q_factor } => {
            let (result, report) = sweep_truncated(ctx, mu, region, q_factor.0, DEFAULT_TOLERANCE)?;
            if !report.pass {
                out.warnings.push(format!(
                    "truncated sweep with q = {} differs from the uncapped sweep; \
                     the regularized kernel violates the maximum principle here",
                    q_factor.0
                ));
            }
            out.reports.push(report);
            out.sweeps.push(LabeledSweep { experiment: name, result });
        }
        Experiment::Idempotence => {
            let support = Region::new(mu.support().iter().map(|&i| mu.points()[i].clone()).collect(), "support");
            let carried = match support {
                Ok(sup) => region_subset(&sup, region)?,
                Err(_) => true,
            };
            let input = if carried { mu } else { &s.base.swept };
            out.reports.push(check_idempotence(ctx, input, region)?);
        }
        Experiment::Uniqueness => {
            let mut perm: Vec<usize> = (0..region.len()).collect();
            perm.shuffle(&mut stream(s.scenario.seed, purpose));
            out.reports.push(check_uniqueness(ctx, mu, region, &perm)?);
        }
        Experiment::Rest { subset } => {
            let idx = subset
                .indices(region, &mut stream(s.scenario.seed, purpose))
                .map_err(|e| potentia::Error::Validation(e.to_string()))?;
            let a = region.select(&idx, "subset")?;
            out.reports.push(check_sweep_with_rest(ctx, mu, &a, region)?);
        }
        Experiment::Monotonicity { subset, tol } => {
            let idx = subset
                .indices(region, &mut stream(s.scenario.seed, purpose))
                .map_err(|e| potentia::Error::Validation(e.to_string()))?;
            let a = region.select(&idx, "subset")?;
            out.reports.push(check_monotonicity(
                ctx,
                mu,
                &a,
                region,
                &s.probes,
                tol.map_or(MONOTONE_TOL, |t| t.0),
            )?);
        }
        Experiment::MinimalPotential { competitors } => {
            let mut rng = stream(s.scenario.seed, purpose);
            let scale = 0.1 * s.base.swept_mass.max(1e-3) / region.len() as f64;
            let rho: Vec<Vec<f64>> = (0..competitors.0)
                .map(|_| {
                    (0..region.len())
                        .map(|_| if rng.gen_bool(0.2) { rng.gen_range(0.0..scale) } else { 0.0 })
                        .collect()
                })
                .collect();
            out.reports.push(check_minimal_potential(
                ctx,
                mu,
                region,
                &s.base,
                &rho,
                &s.probes,
                s.base.kkt_tolerance,
            )?);
        }
        Experiment::Exhaustion { chains, length, tol } => {
            let tol = tol.map_or(MONOTONE_TOL, |t| t.0);
            let runs: Vec<ChainOutcome> = (0..chains.0)
                .into_par_iter()
                .map(|c| {
                    let chain = increasing_chain(region, length.0, &mut stream(s.scenario.seed, purpose + c as u64))?;
                    exhaustion_experiment(ctx, mu, region, &chain, &s.probes, tol)
                })
                .collect::<potentia::Result<_>>()?;
            out.reports.extend(merge_reports(&runs));
            out.tables.push(chain_table("exhaustion", &runs));
        }
        Experiment::Decreasing { chains, length, extra, tol } => {
            let tol = tol.map_or(MONOTONE_TOL, |t| t.0);
            let extra = extra
                .build("extra")
                .map_err(|e| potentia::Error::Validation(e.to_string()))?;
            let runs: Vec<ChainOutcome> = (0..chains.0)
                .into_par_iter()
                .map(|c| {
                    let chain =
                        decreasing_chain(region, &extra, length.0, &mut stream(s.scenario.seed, purpose + c as u64))?;
                    decreasing_experiment(ctx, mu, region, &chain, &s.probes, tol)
                })
                .collect::<potentia::Result<_>>()?;
            out.reports.extend(merge_reports(&runs));
            out.tables.push(chain_table("decreasing", &runs));
        }
        Experiment::EquilibriumExhaustion { chains, length, tol } => {
            let tol = tol.map_or(MONOTONE_TOL, |t| t.0);
            let runs = (0..chains.0)
                .into_par_iter()
                .map(|c| {
                    let chain = increasing_chain(region, length.0, &mut stream(s.scenario.seed, purpose + c as u64))?;
                    equilibrium_exhaustion(ctx, region, &chain, &s.probes, tol)
                })
                .collect::<potentia::Result<Vec<_>>>()?;
            let mut table = Table::new("equilibrium_exhaustion", &["chain", "step", "capacity", "full_capacity"]);
            let mut merged: Vec<TheoremReport> = Vec::new();
            for (c, run) in runs.iter().enumerate() {
                for (i, cap) in run.capacities.iter().enumerate() {
                    table.push(vec![c.to_string(), i.to_string(), num(*cap), num(run.full_capacity)]);
                }
                merge_into(&mut merged, c, &run.reports);
            }
            out.reports.extend(merged);
            out.tables.push(table);
        }
        Experiment::Profile => {
            let mut table = Table::new("profile", &["ray", "radius", "source_potential", "swept_potential"]);
            let spec = &s.scenario.probes;
            let mut pts = Vec::new();
            let mut keys = Vec::new();
            for (r, ray) in spec.rays.iter().enumerate() {
                let norm = ray.iter().map(|v| v * v).sum::<f64>().sqrt();
                for radius in &spec.radii {
                    let p = Point::new(ray.iter().map(|v| v / norm * radius).collect())?;
                    pts.push(p);
                    keys.push((r, *radius));
                }
            }
            let src = ctx.potential(mu, &pts)?;
            let swept = ctx.potential(&s.base.swept, &pts)?;
            for ((r, radius), (a, b)) in keys.iter().zip(src.iter().zip(&swept)) {
                table.push(vec![r.to_string(), num(*radius), num(*a), num(*b)]);
            }
            out.tables.push(table);
        }
    }
    Ok(out)
}

/// Random increasing chain of `length` subregions ending with all of `region`.
fn increasing_chain(region: &Region, length: usize, rng: &mut impl Rng) -> potentia::Result<Vec<Region>> {
    let n = region.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let sizes = chain_sizes(n, length, rng);
    sizes
        .iter()
        .enumerate()
        .map(|(k, &m)| region.select(&perm[..m], format!("K{k}")))
        .collect()
}

/// Random decreasing chain `region ∪ E_1 ⊋ … ⊋ region`, with `E_k` shrinking
/// subsets of `extra`.
fn decreasing_chain(region: &Region, extra: &Region, length: usize, rng: &mut impl Rng) -> potentia::Result<Vec<Region>> {
    let n = extra.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut sizes: Vec<usize> = vec![0];
    if length > 1 {
        sizes.extend(chain_sizes(n, length - 1, rng));
    }
    sizes.reverse();
    sizes
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let part = extra.select(&perm[..m], "extra")?;
            region.union(&part, format!("A{k}"))
        })
        .collect()
}

/// `length` strictly increasing sizes in `1..=n`, the last equal to `n`.
fn chain_sizes(n: usize, length: usize, rng: &mut impl Rng) -> Vec<usize> {
    let length = length.min(n).max(1);
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    let mut sizes: Vec<usize> = cuts[..length - 1].to_vec();
    sizes.sort_unstable();
    sizes.push(n);
    sizes
}

fn merge_into(merged: &mut Vec<TheoremReport>, chain: usize, reports: &[TheoremReport]) {
    for r in reports {
        let details = r.details.iter().map(|d| Detail {
            label: format!("chain {chain}: {}", d.label),
            ..d.clone()
        });
        match merged.iter_mut().find(|m| m.theorem_id == r.theorem_id) {
            Some(m) => {
                let mut all = std::mem::take(&mut m.details);
                all.extend(details);
                *m = TheoremReport::new(r.theorem_id.clone(), r.tolerance, all);
            }
            None => merged.push(TheoremReport::new(r.theorem_id.clone(), r.tolerance, details.collect())),
        }
    }
}

fn merge_reports(runs: &[ChainOutcome]) -> Vec<TheoremReport> {
    let mut merged = Vec::new();
    for (c, run) in runs.iter().enumerate() {
        merge_into(&mut merged, c, &run.reports);
    }
    merged
}

fn chain_table(name: &str, runs: &[ChainOutcome]) -> Table {
    let mut table = Table::new(name, &["chain", "step", "distance_to_target", "residual_norm", "swept_mass"]);
    for (c, run) in runs.iter().enumerate() {
        for i in 0..run.distances.len() {
            table.push(vec![
                c.to_string(),
                i.to_string(),
                num(run.distances[i]),
                num(run.residual_norms[i]),
                num(run.swept_masses[i]),
            ]);
        }
    }
    table
}
