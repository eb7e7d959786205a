//! Refinement studies: one scenario at several grid sizes with `ε = h/2`.

use potentia::balayage::{check_domination, check_mass, sweep};
use potentia::coneqp::DEFAULT_TOLERANCE;
use potentia::equilibrium::equilibrium_measure;
use potentia::{Detail, EnergyContext, TheoremReport};
use serde::{Deserialize, Serialize};

use crate::runner::{prepare, Table};
use crate::scenario::Scenario;
use crate::CliError;

/// Columns may grow by this factor between consecutive levels.
pub const MONOTONE_SLACK: f64 = 0.10;
/// Values below this are treated as round-off and never fail the check.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Level {
    pub points: usize,
    pub spacing: f64,
    pub epsilon: f64,
    pub capacity: f64,
    pub capacity_error: Option<f64>,
    /// `max(0, max over probes of κμ^A − κμ)`.
    pub domination_residual: f64,
    pub domination_tolerance: f64,
    /// `|μ^A(X) − Σ μᵢ κγ(xᵢ)| / μ(X)`.
    pub mass_formula_residual: f64,
    pub swept_mass: f64,
    /// `|μ^A(X) − classical| / classical`.
    pub mass_classical_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefineResults {
    pub scenario: String,
    pub levels: Vec<Level>,
    pub reports: Vec<TheoremReport>,
    pub all_pass: bool,
}

pub fn run_level(scenario: &Scenario, points: usize) -> Result<Level, CliError> {
    let mut sc = scenario.clone();
    sc.region = scenario.region.with_count(points)?;
    sc.kernel.epsilon = None;
    let (region, kernel, source, probes) = prepare(&sc)?;
    let ctx = EnergyContext::new(kernel);
    let solver = |what: &str| {
        let what = what.to_string();
        move |e| CliError::from_core(&what, e)
    };
    let s = sweep(&ctx, &source, &region, DEFAULT_TOLERANCE).map_err(solver("sweep"))?;
    let eq = equilibrium_measure(&ctx, &region, DEFAULT_TOLERANCE).map_err(solver("equilibrium"))?;
    let dom = check_domination(&ctx, &source, &s, &probes).map_err(solver("domination"))?;
    let mass = check_mass(&ctx, &source, &s, &eq).map_err(solver("mass"))?;
    let source_mass = source.total_mass();
    let capacity_error = sc.classical.capacity.map(|c| (eq.capacity - c.0).abs() / c.0);
    let mass_classical_error = sc
        .classical
        .swept_mass
        .filter(|c| c.0 > 0.0)
        .map(|c| (s.swept_mass - c.0).abs() / c.0);
    Ok(Level {
        points: region.len(),
        spacing: region.min_spacing().unwrap_or(0.0),
        epsilon: kernel.epsilon,
        capacity: eq.capacity,
        capacity_error,
        domination_residual: dom.worst_residual.max(0.0),
        domination_tolerance: dom.tolerance,
        mass_formula_residual: mass[1].worst_residual / source_mass,
        swept_mass: s.swept_mass,
        mass_classical_error,
    })
}

/// Report that `values` never grows by more than the slack between levels.
pub fn nonincreasing(id: &str, values: &[f64]) -> TheoremReport {
    let details = values
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let allowed = (w[0] * (1.0 + MONOTONE_SLACK)).max(NOISE_FLOOR);
            Detail::new(format!("level {i} -> {}", i + 1), w[1], allowed, w[1] - allowed)
        })
        .collect();
    TheoremReport::new(id, 0.0, details)
}

pub fn refine(scenario: &Scenario, levels: &[usize]) -> Result<(RefineResults, Table), CliError> {
    if levels.is_empty() {
        return Err(CliError::Config("refinement needs at least one level".into()));
    }
    if levels.iter().any(|&n| n < 2) {
        return Err(CliError::Config("refinement levels need at least two points".into()));
    }
    // Levels run one after another: each one is already parallel inside.
    let rows = levels
        .iter()
        .map(|&n| run_level(scenario, n))
        .collect::<Result<Vec<_>, _>>()?;

    let mut reports = Vec::new();
    if rows.iter().all(|r| r.capacity_error.is_some()) {
        let v: Vec<f64> = rows.iter().map(|r| r.capacity_error.unwrap()).collect();
        reports.push(nonincreasing("refine.capacity_error", &v));
    }
    let v: Vec<f64> = rows.iter().map(|r| r.domination_residual).collect();
    reports.push(nonincreasing("refine.domination_residual", &v));
    let v: Vec<f64> = rows.iter().map(|r| r.mass_formula_residual).collect();
    reports.push(nonincreasing("refine.mass_formula_residual", &v));
    if rows.iter().all(|r| r.mass_classical_error.is_some()) {
        let v: Vec<f64> = rows.iter().map(|r| r.mass_classical_error.unwrap()).collect();
        reports.push(nonincreasing("refine.mass_classical_error", &v));
    }

    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
    let table = Table {
        name: "refine".into(),
        header: [
            "points",
            "spacing",
            "epsilon",
            "capacity",
            "capacity_error",
            "domination_residual",
            "domination_tolerance",
            "mass_formula_residual",
            "swept_mass",
            "mass_classical_error",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.points.to_string(),
                    format!("{:e}", r.spacing),
                    format!("{:e}", r.epsilon),
                    format!("{:e}", r.capacity),
                    opt(r.capacity_error),
                    format!("{:e}", r.domination_residual),
                    format!("{:e}", r.domination_tolerance),
                    format!("{:e}", r.mass_formula_residual),
                    format!("{:e}", r.swept_mass),
                    opt(r.mass_classical_error),
                ]
            })
            .collect(),
    };
    let all_pass = reports.iter().all(|r| r.pass);
    Ok((
        RefineResults {
            scenario: scenario.name.clone(),
            levels: rows,
            reports,
            all_pass,
        },
        table,
    ))
}
