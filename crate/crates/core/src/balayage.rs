//! Sweeping of positive measures onto regions, and numerical checks of the
//! properties the swept measure is supposed to have.
//!
//! On a finite region every property "nearly everywhere on A" becomes "at
//! every region point", and the region is closed, so the projection onto
//! the cone of measures carried by the region is both the inner and the
//! outer balayage.

use rayon::prelude::*;

use crate::coneqp::{project_in, ProjectionProblem, DEFAULT_TOLERANCE};
use crate::energy::EnergyContext;
use crate::equilibrium::check_increasing;
use crate::error::{Error, Result};
use crate::report::{Detail, TheoremReport};
use crate::types::{region_subset, DiscreteMeasure, EquilibriumResult, Point, Region, SweepResult};

/// Relative domination tolerance: `tol_dom = DOMINATION_REL · max κμ`.
pub const DOMINATION_REL: f64 = 1e-3;
/// Mass-formula tolerance relative to the source mass.
pub const MASS_FORMULA_REL: f64 = 2e-2;
/// Mass positivity slack relative to the source mass.
pub const MASS_POSITIVITY_REL: f64 = 1e-9;
/// Rest tolerance relative to `‖μ‖`.
pub const REST_REL: f64 = 1e-6;
/// Absolute tolerance for monotone sequences and the Cauchy inequality.
pub const MONOTONE_TOL: f64 = 1e-7;
/// Energy-distance tolerance for identities the solver should meet exactly.
pub const IDENTITY_TOL: f64 = 1e-8;
pub const PYTHAGORAS_REL: f64 = 1e-6;

/// Sweeps `mu` onto `region` (no mass cap).
pub fn sweep(ctx: &EnergyContext, mu: &DiscreteMeasure, region: &Region, tol: f64) -> Result<SweepResult> {
    sweep_with(ctx, mu, region, None, tol)
}

/// Sweeps `mu` onto `region` among measures of mass at most `cap`.
pub fn sweep_capped(
    ctx: &EnergyContext,
    mu: &DiscreteMeasure,
    region: &Region,
    cap: f64,
    tol: f64,
) -> Result<SweepResult> {
    sweep_with(ctx, mu, region, Some(cap), tol)
}

fn sweep_with(
    ctx: &EnergyContext,
    mu: &DiscreteMeasure,
    region: &Region,
    cap: Option<f64>,
    tol: f64,
) -> Result<SweepResult> {
    let mut problem = ProjectionProblem::new(mu.clone(), region.clone(), *ctx.kernel()).with_tolerance(tol);
    problem.mass_cap = cap;
    let proj = project_in(ctx, &problem)?;
    let swept = region.measure(proj.weights)?;
    let energy_distance = ctx.energy_distance(mu, &swept)?;
    Ok(SweepResult {
        region_label: region.label().to_string(),
        energy_distance,
        kkt_stationarity: proj.certificate.stationarity_residual,
        kkt_dual_feasibility: proj.certificate.dual_feasibility,
        kkt_complementarity: proj.certificate.complementarity,
        kkt_tolerance: proj.certificate.tolerance,
        multiplier: proj.certificate.multiplier,
        source_mass: mu.total_mass(),
        swept_mass: swept.total_mass(),
        mass_cap_active: proj.cap_active,
        iterations: proj.iterations,
        active_set_size: proj.active_set_size,
        jitter: proj.jitter,
        swept,
    })
}

/// The KKT residuals recorded in `result` against its own tolerance.
pub fn check_certificate(result: &SweepResult) -> TheoremReport {
    TheoremReport::new(
        "sweep.kkt",
        result.kkt_tolerance,
        vec![
            Detail::new("stationarity", result.kkt_stationarity, 0.0, result.kkt_stationarity),
            Detail::new("dual feasibility", result.kkt_dual_feasibility, 0.0, result.kkt_dual_feasibility),
            Detail::new("complementarity", result.kkt_complementarity, 0.0, result.kkt_complementarity),
        ],
    )
}

/// Potential relations on the region: `κμ^A = κμ` on the support of `μ^A`
/// and `κμ^A ≥ κμ` at every region point, both scaled by `1 + κμ`.
pub fn check_region_potentials(
    ctx: &EnergyContext,
    mu: &DiscreteMeasure,
    result: &SweepResult,
    region: &Region,
    tol: f64,
) -> Result<Vec<TheoremReport>> {
    let source = ctx.potential(mu, region.points())?;
    let swept = ctx.potential(&result.swept, region.points())?;
    let mut equality = Vec::new();
    let mut lower = Vec::new();
    for (i, ((s, a), w)) in source.iter().zip(&swept).zip(result.swept.weights()).enumerate() {
        let scale = 1.0 + s.abs();
        if *w > 0.0 {
            equality.push(Detail::new(format!("point {i}"), *a, *s, (a - s).abs() / scale));
        }
        lower.push(Detail::new(format!("point {i}"), *a, *s, (s - a) / scale));
    }
    Ok(vec![
        TheoremReport::new("sweep.equality_on_support", tol, equality),
        TheoremReport::new("sweep.lower_bound_on_region", tol, lower),
    ])
}

/// `‖μ‖² = ‖μ − μ^A‖² + ‖μ^A‖²`, relative to `‖μ‖²`.
pub fn check_pythagoras(ctx: &EnergyContext, mu: &DiscreteMeasure, result: &SweepResult) -> Result<TheoremReport> {
    let total = ctx.energy(mu)?;
    let dist = ctx.energy_distance_sq(mu, &result.swept)?;
    let swept = ctx.energy(&result.swept)?;
    let residual = if total > 0.0 {
        (total - dist - swept).abs() / total
    } else {
        (dist + swept).abs()
    };
    Ok(TheoremReport::new(
        "sweep.pythagoras",
        PYTHAGORAS_REL,
        vec![Detail::new("|mu|^2", total, dist + swept, residual)],
    ))
}

/// `κμ^A ≤ κμ` at every probe, with tolerance `1e-3 · max κμ`.
pub fn check_domination(
    ctx: &EnergyContext,
    mu: &DiscreteMeasure,
    result: &SweepResult,
    probes: &[Point],
) -> Result<TheoremReport> {
    let source = ctx.potential(mu, probes)?;
    let swept = ctx.potential(&result.swept, probes)?;
    let max_source = source.iter().copied().fold(0.0f64, f64::max);
    let details = source
        .iter()
        .zip(&swept)
        .enumerate()
        .map(|(j, (s, a))| Detail::at_most(format!("probe {j}"), *a, *s))
        .collect();
    Ok(TheoremReport::new("domination", DOMINATION_REL * max_source, details))
}

/// Positivity of mass `μ^A(X) ≤ μ(X)` and the mass formula
/// `μ^A(X) = Σ μᵢ κγ_A(xᵢ)`.
pub fn check_mass(
    ctx: &EnergyContext,
    mu: &DiscreteMeasure,
    result: &SweepResult,
    gamma: &EquilibriumResult,
) -> Result<Vec<TheoremReport>> {
    let source = mu.total_mass();
    let pot = ctx.potential(&gamma.gamma, mu.points())?;
    let formula: f64 = pot.iter().zip(mu.weights()).map(|(g, w)| g * w).sum();
    Ok(vec![
        TheoremReport::new(
            "mass.positivity",
            MASS_POSITIVITY_REL * source,
            vec![Detail::at_most("swept vs source", result.swept_mass, source)],
        ),
        TheoremReport::new(
            "mass.formula",
            MASS_FORMULA_REL * source,
            vec![Detail::new(
                "swept vs integral of equilibrium potential",
                result.swept_mass,
                formula,
                (result.swept_mass - formula).abs(),
            )],
        ),
    ])
}

/// Sweep with mass cap `q_factor · μ(X)`, compared against the uncapped
/// sweep. The report fails when the two differ or the cap binds.
pub fn sweep_truncated(
    ctx: &EnergyContext,
    mu: &DiscreteMeasure,
    region: &Region,
    q_factor: f64,
    tol: f64,
) -> Result<(SweepResult, TheoremReport)> {
    if !(q_factor >= 1.0 && q_factor.is_finite()) {
        return Err(Error::Validation(format!("q_factor must be finite and >= 1, got {q_factor}")));
    }
    let capped = sweep_capped(ctx, mu, region, q_factor * mu.total_mass(), tol)?;
    let free = sweep(ctx, mu, region, tol)?;
    let dist = ctx.energy_distance(&capped.swept, &free.swept)?;
    let report = TheoremReport::new(
        "truncated.identity",
        IDENTITY_TOL,
        vec![
            Detail::new("capped vs uncapped", dist, 0.0, dist),
            Detail::new("cap multiplier", capped.multiplier, 0.0, capped.multiplier),
        ],
    );
    if !report.pass {
        log::warn!(
            "truncated sweep onto {} differs from the uncapped sweep (distance {:e}, multiplier {:e}); \
             the regularized kernel violates the maximum principle here",
            region.label(),
            dist,
            capped.multiplier
        );
    }
    Ok((capped, report))
}

/// `κμ^A ≤ κμ^Q` at the probes for `A ⊆ Q`.
pub fn check_monotonicity(
    ctx: &EnergyContext,
    mu: &DiscreteMeasure,
    a: &Region,
    q: &Region,
    probes: &[Point],
    tol: f64,
) -> Result<TheoremReport> {
    require_subset(a, q)?;
    let (sa, sq) = rayon::join(|| sweep(ctx, mu, a, DEFAULT_TOLERANCE), || sweep(ctx, mu, q, DEFAULT_TOLERANCE));
    let pa = ctx.potential(&sa?.swept, probes)?;
    let pq = ctx.potential(&sq?.swept, probes)?;
    let details = pa
        .iter()
        .zip(&pq)
        .enumerate()
        .map(|(j, (x, y))| Detail::at_most(format!("probe {j}"), *x, *y))
        .collect();
    Ok(TheoremReport::new("monotonicity", tol, details))
}

/// `μ^A = (μ^Q)^A` for `A ⊆ Q`, to `1e-6 · ‖μ‖` in energy distance.
pub fn check_sweep_with_rest(
    ctx: &EnergyContext,
    mu: &DiscreteMeasure,
    a: &Region,
    q: &Region,
) -> Result<TheoremReport> {
    require_subset(a, q)?;
    let direct = sweep(ctx, mu, a, DEFAULT_TOLERANCE)?;
    let via_q = sweep(ctx, mu, q, DEFAULT_TOLERANCE)?;
    let rested = sweep(ctx, &via_q.swept, a, DEFAULT_TOLERANCE)?;
    let dist = ctx.energy_distance(&direct.swept, &rested.swept)?;
    let norm = ctx.energy(mu)?.sqrt();
    Ok(TheoremReport::new(
        "sweep_with_rest",
        REST_REL * norm,
        vec![Detail::new("direct vs through Q", dist, 0.0, dist)],
    ))
}

/// `μ^A = μ` for `μ` carried by `A`.
pub fn check_idempotence(ctx: &EnergyContext, mu: &DiscreteMeasure, region: &Region) -> Result<TheoremReport> {
    let support = Region::new(
        mu.support().iter().map(|&i| mu.points()[i].clone()).collect(),
        "support",
    );
    match support {
        Ok(s) if !region_subset(&s, region)? => {
            return Err(Error::Validation(format!(
                "measure is not carried by region {}",
                region.label()
            )))
        }
        _ => {}
    }
    let result = sweep(ctx, mu, region, DEFAULT_TOLERANCE)?;
    let dist = ctx.energy_distance(mu, &result.swept)?;
    Ok(TheoremReport::new(
        "idempotence",
        IDENTITY_TOL,
        vec![Detail::new("mu vs swept", dist, 0.0, dist)],
    ))
}

/// Sweeps onto `region` and onto a reordering of it; the projection is
/// unique, so both must agree.
pub fn check_uniqueness(
    ctx: &EnergyContext,
    mu: &DiscreteMeasure,
    region: &Region,
    permutation: &[usize],
) -> Result<TheoremReport> {
    let mut seen = vec![false; region.len()];
    if permutation.len() != region.len() || permutation.iter().any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true)) {
        return Err(Error::Validation("not a permutation of the region indices".into()));
    }
    let shuffled = region.select(permutation, format!("{} (permuted)", region.label()))?;
    let a = sweep(ctx, mu, region, DEFAULT_TOLERANCE)?;
    let b = sweep(ctx, mu, &shuffled, DEFAULT_TOLERANCE)?;
    let dist = ctx.energy_distance(&a.swept, &b.swept)?;
    Ok(TheoremReport::new(
        "uniqueness",
        IDENTITY_TOL,
        vec![Detail::new("original vs permuted", dist, 0.0, dist)],
    ))
}

/// `κμ^A ≤ κν` at the probes for competitors `ν = μ^A + ρ`, `ρ ≥ 0` on the
/// region. Each competitor's membership `κν ≥ κμ` on the region is checked
/// in the same report.
pub fn check_minimal_potential(
    ctx: &EnergyContext,
    mu: &DiscreteMeasure,
    region: &Region,
    result: &SweepResult,
    perturbations: &[Vec<f64>],
    probes: &[Point],
    tol: f64,
) -> Result<TheoremReport> {
    let swept_probe = ctx.potential(&result.swept, probes)?;
    let source_region = ctx.potential(mu, region.points())?;
    let mut details = Vec::new();
    for (c, rho) in perturbations.iter().enumerate() {
        let nu = result.swept.plus(&region.measure(rho.clone())?)?;
        for (i, (v, s)) in ctx.potential(&nu, region.points())?.iter().zip(&source_region).enumerate() {
            details.push(Detail::new(format!("competitor {c} membership at point {i}"), *v, *s, s - v));
        }
        for (j, (v, a)) in ctx.potential(&nu, probes)?.iter().zip(&swept_probe).enumerate() {
            details.push(Detail::at_most(format!("competitor {c} probe {j}"), *a, *v));
        }
    }
    Ok(TheoremReport::new("minimal_potential", tol, details))
}

/// Distances and probe potentials along a chain of sweeps.
#[derive(Clone, Debug)]
pub struct ChainOutcome {
    /// `‖μ^{K_i} − μ^A‖`.
    pub distances: Vec<f64>,
    /// `‖μ − μ^{K_i}‖`.
    pub residual_norms: Vec<f64>,
    /// `potentials[i][j] = κμ^{K_i}(probe j)`.
    pub potentials: Vec<Vec<f64>>,
    pub target_potentials: Vec<f64>,
    pub swept_masses: Vec<f64>,
    pub reports: Vec<TheoremReport>,
}

fn sweep_chain(ctx: &EnergyContext, mu: &DiscreteMeasure, chain: &[Region]) -> Result<Vec<SweepResult>> {
    chain
        .par_iter()
        .map(|k| sweep(ctx, mu, k, DEFAULT_TOLERANCE))
        .collect()
}

fn same_set(a: &Region, b: &Region) -> Result<bool> {
    Ok(region_subset(a, b)? && region_subset(b, a)?)
}

/// Sweeps onto an increasing chain `K_1 ⊆ … ⊆ K_m` whose last element has
/// the same points as `region`, and checks that `μ^{K_i} → μ^A` in energy
/// with nondecreasing probe potentials, plus the Cauchy inequality
/// `‖μ^{K_i} − μ^{K_j}‖² ≤ ‖μ − μ^{K_i}‖² − ‖μ − μ^{K_j}‖²` for `i < j`.
pub fn exhaustion_experiment(
    ctx: &EnergyContext,
    mu: &DiscreteMeasure,
    region: &Region,
    chain: &[Region],
    probes: &[Point],
    tol: f64,
) -> Result<ChainOutcome> {
    check_increasing(chain, region)?;
    if let Some(last) = chain.last() {
        if !same_set(last, region)? {
            return Err(Error::NestingViolation(format!(
                "last chain element {} does not exhaust {}",
                last.label(),
                region.label()
            )));
        }
    }
    let target = sweep(ctx, mu, region, DEFAULT_TOLERANCE)?;
    let sweeps = sweep_chain(ctx, mu, chain)?;
    let mut out = chain_outcome(ctx, &target, &sweeps, probes)?;

    let m = sweeps.len();
    let mut dist_monotone = Vec::new();
    let mut pot_monotone = Vec::new();
    for i in 1..m {
        dist_monotone.push(Detail::at_most(
            format!("K{i}"),
            out.distances[i],
            out.distances[i - 1],
        ));
        for (j, (prev, next)) in out.potentials[i - 1].iter().zip(&out.potentials[i]).enumerate() {
            pot_monotone.push(Detail::at_most(format!("K{} -> K{i} probe {j}", i - 1), *prev, *next));
        }
    }
    let final_distance: Vec<Detail> = out
        .distances
        .last()
        .map(|d| vec![Detail::new("last vs direct", *d, 0.0, *d)])
        .unwrap_or_default();

    let mut cauchy = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let lhs = ctx.energy_distance_sq(&sweeps[i].swept, &sweeps[j].swept)?;
            let rhs = out.residual_norms[i].powi(2) - out.residual_norms[j].powi(2);
            cauchy.push(Detail::at_most(format!("K{i}, K{j}"), lhs, rhs));
        }
    }

    out.reports = vec![
        TheoremReport::new("exhaustion.distance_monotone", tol, dist_monotone),
        TheoremReport::new("exhaustion.final_distance", tol, final_distance),
        TheoremReport::new("exhaustion.potential_monotone", tol, pot_monotone),
        TheoremReport::new("exhaustion.cauchy", tol, cauchy),
    ];
    Ok(out)
}

/// Sweeps onto a decreasing chain `A_1 ⊇ … ⊇ A_m` whose last element has
/// the same points as `region`; probe potentials must not increase and the
/// last sweep must agree with the direct sweep.
pub fn decreasing_experiment(
    ctx: &EnergyContext,
    mu: &DiscreteMeasure,
    region: &Region,
    chain: &[Region],
    probes: &[Point],
    tol: f64,
) -> Result<ChainOutcome> {
    for (i, pair) in chain.windows(2).enumerate() {
        if !region_subset(&pair[1], &pair[0])? {
            return Err(Error::NestingViolation(format!(
                "chain element {} ({}) is not contained in element {i} ({})",
                i + 1,
                pair[1].label(),
                pair[0].label()
            )));
        }
    }
    if let Some(last) = chain.last() {
        if !same_set(last, region)? {
            return Err(Error::NestingViolation(format!(
                "chain does not decrease to {}; last element is {}",
                region.label(),
                last.label()
            )));
        }
    }
    let target = sweep(ctx, mu, region, DEFAULT_TOLERANCE)?;
    let sweeps = sweep_chain(ctx, mu, chain)?;
    let mut out = chain_outcome(ctx, &target, &sweeps, probes)?;

    let mut pot_monotone = Vec::new();
    for i in 1..sweeps.len() {
        for (j, (prev, next)) in out.potentials[i - 1].iter().zip(&out.potentials[i]).enumerate() {
            pot_monotone.push(Detail::at_most(format!("A{} -> A{i} probe {j}", i - 1), *next, *prev));
        }
    }
    let final_distance: Vec<Detail> = out
        .distances
        .last()
        .map(|d| vec![Detail::new("last vs direct", *d, 0.0, *d)])
        .unwrap_or_default();
    out.reports = vec![
        TheoremReport::new("decreasing.potential_monotone", tol, pot_monotone),
        TheoremReport::new("decreasing.final_distance", tol, final_distance),
    ];
    Ok(out)
}

fn chain_outcome(
    ctx: &EnergyContext,
    target: &SweepResult,
    sweeps: &[SweepResult],
    probes: &[Point],
) -> Result<ChainOutcome> {
    let mut distances = Vec::with_capacity(sweeps.len());
    let mut residual_norms = Vec::with_capacity(sweeps.len());
    let mut potentials = Vec::with_capacity(sweeps.len());
    for s in sweeps {
        distances.push(ctx.energy_distance(&s.swept, &target.swept)?);
        residual_norms.push(s.energy_distance);
        potentials.push(ctx.potential(&s.swept, probes)?);
    }
    Ok(ChainOutcome {
        distances,
        residual_norms,
        potentials,
        target_potentials: ctx.potential(&target.swept, probes)?,
        swept_masses: sweeps.iter().map(|s| s.swept_mass).collect(),
        reports: Vec::new(),
    })
}

fn require_subset(a: &Region, q: &Region) -> Result<()> {
    if region_subset(a, q)? {
        Ok(())
    } else {
        Err(Error::NestingViolation(format!(
            "{} is not contained in {}",
            a.label(),
            q.label()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::equilibrium_measure;
    use crate::kernel::KernelSpec;
    use crate::types::make_measure;
    use approx::assert_relative_eq;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn ctx() -> EnergyContext {
        EnergyContext::new(KernelSpec::newtonian(3, 0.2).unwrap())
    }

    fn square() -> Region {
        Region::new(
            vec![p(&[0.0; 3]), p(&[1.0, 0.0, 0.0]), p(&[0.0, 1.0, 0.0]), p(&[1.0, 1.0, 0.0])],
            "square",
        )
        .unwrap()
    }

    fn far_source() -> DiscreteMeasure {
        make_measure(vec![p(&[0.5, 0.5, 2.0]), p(&[3.0, 0.0, 1.0])], vec![1.0, 0.5]).unwrap()
    }

    #[test]
    fn fixed_point_and_zero() {
        let c = ctx();
        let r = square();
        let mu = r.measure(vec![0.2, 0.0, 0.7, 0.1]).unwrap();
        let s = sweep(&c, &mu, &r, 1e-9).unwrap();
        assert!(s.energy_distance <= 1e-8);
        assert!(check_idempotence(&c, &mu, &r).unwrap().pass);
        let z = sweep(&c, &DiscreteMeasure::zero(), &r, 1e-9).unwrap();
        assert_eq!(z.swept_mass, 0.0);
    }

    #[test]
    fn empty_region_sweeps_to_zero() {
        let s = sweep(&ctx(), &far_source(), &Region::empty("e"), 1e-9).unwrap();
        assert!(s.swept.is_empty());
        assert_eq!(s.swept_mass, 0.0);
    }

    #[test]
    fn certificate_and_region_potentials() {
        let c = ctx();
        let r = square();
        let mu = far_source();
        let s = sweep(&c, &mu, &r, 1e-9).unwrap();
        assert!(check_certificate(&s).pass);
        assert!(check_pythagoras(&c, &mu, &s).unwrap().pass);
        for rep in check_region_potentials(&c, &mu, &s, &r, 1e-9).unwrap() {
            assert!(rep.pass, "{rep:?}");
        }
        // On the region the domination check reduces to complementarity.
        let dom = check_domination(&c, &mu, &s, r.points()).unwrap();
        assert!(dom.worst_residual <= 1e-9 * (1.0 + dom.details.iter().map(|d| d.rhs).fold(0.0, f64::max)));
    }

    #[test]
    fn mass_checks_on_region_measure() {
        let c = ctx();
        let r = square();
        let mu = r.measure(vec![0.5, 0.5, 0.0, 0.25]).unwrap();
        let s = sweep(&c, &mu, &r, 1e-9).unwrap();
        let eq = equilibrium_measure(&c, &r, 1e-12).unwrap();
        let reports = check_mass(&c, &mu, &s, &eq).unwrap();
        assert!(reports.iter().all(|r| r.pass));
        assert_relative_eq!(s.swept_mass, 1.25, max_relative = 1e-9);
    }

    #[test]
    fn rest_monotonicity_uniqueness() {
        let c = ctx();
        let q = square();
        let a = q.select(&[0, 3], "diag").unwrap();
        let mu = far_source();
        let probes = vec![p(&[0.5, 0.5, 5.0]), p(&[-2.0, 0.0, 0.0]), p(&[0.5, 0.5, 0.0])];
        assert!(check_sweep_with_rest(&c, &mu, &a, &q).unwrap().pass);
        assert!(check_sweep_with_rest(&c, &mu, &q, &q).unwrap().pass);
        assert!(check_monotonicity(&c, &mu, &a, &q, &probes, MONOTONE_TOL).unwrap().pass);
        assert!(check_uniqueness(&c, &mu, &q, &[3, 1, 0, 2]).unwrap().pass);
        assert!(check_uniqueness(&c, &mu, &q, &[0, 0, 1, 2]).is_err());
        assert!(matches!(
            check_sweep_with_rest(&c, &mu, &q, &a),
            Err(Error::NestingViolation(_))
        ));
    }

    #[test]
    fn truncated_matches_uncapped_for_exterior_source() {
        let c = ctx();
        let (s, rep) = sweep_truncated(&c, &far_source(), &square(), 1.0, 1e-9).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(!s.mass_cap_active);
        assert!(sweep_truncated(&c, &far_source(), &square(), 0.5, 1e-9).is_err());
    }

    #[test]
    fn chains() {
        let c = ctx();
        let q = square();
        let chain = vec![q.select(&[0], "k0").unwrap(), q.select(&[0, 2], "k1").unwrap(), q.clone()];
        let probes = vec![p(&[0.5, 0.5, 5.0]), p(&[2.0, 2.0, 0.0])];
        let out = exhaustion_experiment(&c, &far_source(), &q, &chain, &probes, MONOTONE_TOL).unwrap();
        assert!(out.reports.iter().all(|r| r.pass), "{:?}", out.reports);
        let trivial = exhaustion_experiment(&c, &far_source(), &q, std::slice::from_ref(&q), &probes, MONOTONE_TOL).unwrap();
        assert!(trivial.reports.iter().all(|r| r.pass));

        let down: Vec<Region> = chain.iter().rev().cloned().collect();
        let k0 = chain[0].clone();
        let out = decreasing_experiment(&c, &far_source(), &k0, &down, &probes, MONOTONE_TOL).unwrap();
        assert!(out.reports.iter().all(|r| r.pass), "{:?}", out.reports);
        assert!(decreasing_experiment(&c, &far_source(), &k0, &chain, &probes, MONOTONE_TOL).is_err());
        assert!(exhaustion_experiment(&c, &far_source(), &q, &chain[..2], &probes, MONOTONE_TOL).is_err());
    }

    #[test]
    fn minimal_potential() {
        let c = ctx();
        let q = square();
        let mu = far_source();
        let s = sweep(&c, &mu, &q, 1e-9).unwrap();
        let rho = vec![vec![0.1, 0.0, 0.0, 0.0], vec![0.0, 0.3, 0.2, 0.05]];
        let probes = vec![p(&[0.5, 0.5, 5.0]), p(&[2.0, 2.0, 0.0])];
        assert!(check_minimal_potential(&c, &mu, &q, &s, &rho, &probes, 1e-9).unwrap().pass);
    }
}
