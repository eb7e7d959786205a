//! Equilibrium measures and capacities of finite regions.
//!
//! The primary route minimizes the energy over unit-mass measures on the
//! region and rescales: if `ν*` attains `E* = min ‖ν‖²` then
//! `γ = ν* / E*` and `c = 1 / E*`. The potential-bound route
//! `min ½‖ν‖² − ν(X), ν ≥ 0` yields `γ` directly and is kept as an
//! independent cross-check.

use crate::coneqp::{solve_nnls_core, MassConstraint, DEFAULT_TOLERANCE};
use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::linalg::{factor_gram, JitterPolicy, Matrix};
use crate::report::{Detail, TheoremReport};
use crate::types::{region_subset, EquilibriumResult, Point, Region};

fn region_gram(ctx: &EnergyContext, region: &Region) -> Result<Matrix> {
    let k = ctx.gram(region.points(), region.points())?;
    let factor = factor_gram(&k, &JitterPolicy::default())?;
    let mut k = (*k).clone();
    if factor.jitter > 0.0 {
        for i in 0..k.rows() {
            k.set(i, i, k.get(i, i) + factor.jitter);
        }
    }
    Ok(k)
}

/// Unit-mass energy minimizer and its energy.
fn unit_mass_minimizer(ctx: &EnergyContext, region: &Region, tol: f64) -> Result<(Vec<f64>, f64, usize)> {
    let k = region_gram(ctx, region)?;
    let n = region.len();
    let zeros = vec![0.0; n];
    let s = solve_nnls_core(&k, &zeros, MassConstraint::Exactly(1.0), tol, 10 * n)?;
    let energy = k.bilinear(&s.weights, &s.weights);
    Ok((s.weights, energy, s.iterations))
}

fn finish(
    ctx: &EnergyContext,
    region: &Region,
    weights: Vec<f64>,
    iterations: usize,
) -> Result<EquilibriumResult> {
    let gamma = region.measure(weights)?;
    let k = ctx.gram(region.points(), region.points())?;
    let pot = k.mul_vec(gamma.weights());
    let min_potential_on_region = pot.iter().copied().fold(f64::INFINITY, f64::min);
    let max_potential_on_support = gamma
        .support()
        .iter()
        .map(|&i| pot[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let mass = gamma.total_mass();
    let energy = k.bilinear(gamma.weights(), gamma.weights());
    Ok(EquilibriumResult {
        region_label: region.label().to_string(),
        capacity: mass,
        mass,
        energy,
        gamma,
        min_potential_on_region,
        max_potential_on_support,
        iterations,
    })
}

fn empty_result(region: &Region) -> EquilibriumResult {
    EquilibriumResult {
        region_label: region.label().to_string(),
        gamma: crate::types::DiscreteMeasure::zero(),
        capacity: 0.0,
        mass: 0.0,
        energy: 0.0,
        min_potential_on_region: 0.0,
        max_potential_on_support: 0.0,
        iterations: 0,
    }
}

/// Equilibrium measure via the unit-mass energy minimizer.
pub fn equilibrium_measure(ctx: &EnergyContext, region: &Region, tol: f64) -> Result<EquilibriumResult> {
    if region.is_empty() {
        return Ok(empty_result(region));
    }
    let (nu, energy, iterations) = unit_mass_minimizer(ctx, region, tol)?;
    let capacity = 1.0 / energy;
    let mut result = finish(ctx, region, nu.iter().map(|w| w * capacity).collect(), iterations)?;
    result.capacity = capacity;
    Ok(result)
}

/// `[min {‖ν‖² : ν ≥ 0 on the region, ν(X) = 1}]⁻¹`.
pub fn capacity_via_unit_mass(ctx: &EnergyContext, region: &Region, tol: f64) -> Result<f64> {
    if region.is_empty() {
        return Ok(0.0);
    }
    let (_, energy, _) = unit_mass_minimizer(ctx, region, tol)?;
    Ok(1.0 / energy)
}

/// Equilibrium measure as the minimizer of `½‖ν‖² − ν(X)`, i.e. the
/// projection of "potential 1 on the region" onto the cone.
pub fn equilibrium_by_potential_bound(
    ctx: &EnergyContext,
    region: &Region,
    tol: f64,
) -> Result<EquilibriumResult> {
    if region.is_empty() {
        return Ok(empty_result(region));
    }
    let k = region_gram(ctx, region)?;
    let n = region.len();
    let s = solve_nnls_core(&k, &vec![1.0; n], MassConstraint::Free, tol, 10 * n)?;
    finish(ctx, region, s.weights, s.iterations)
}

/// Checks `c = γ(X) = ‖γ‖²`, `κγ ≥ 1` on the region and `κγ ≤ 1` on the
/// support of `γ`, all to relative tolerance `tol`.
pub fn check_equilibrium(eq: &EquilibriumResult, tol: f64) -> Vec<TheoremReport> {
    let c = eq.capacity;
    let identity = TheoremReport::new(
        "equilibrium.capacity_identity",
        tol * c.max(f64::MIN_POSITIVE),
        vec![
            Detail::new("mass", c, eq.mass, (c - eq.mass).abs()),
            Detail::new("energy", c, eq.energy, (c - eq.energy).abs()),
        ],
    );
    let bounds = if eq.gamma.is_empty() {
        TheoremReport::new("equilibrium.potential_bounds", tol, Vec::new())
    } else {
        TheoremReport::new(
            "equilibrium.potential_bounds",
            tol,
            vec![
                Detail::new("min on region", eq.min_potential_on_region, 1.0, 1.0 - eq.min_potential_on_region),
                Detail::at_most("max on support", eq.max_potential_on_support, 1.0),
            ],
        )
    };
    vec![identity, bounds]
}

/// Largest `κγ − 1` over the probes; positive values are maximum-principle
/// violations caused by the kernel regularization.
pub fn frostman_excess(ctx: &EnergyContext, eq: &EquilibriumResult, probes: &[Point]) -> Result<f64> {
    let pot = ctx.potential(&eq.gamma, probes)?;
    Ok(pot.iter().map(|v| v - 1.0).fold(f64::NEG_INFINITY, f64::max))
}

/// Equilibrium potentials along an increasing chain of subregions.
#[derive(Clone, Debug)]
pub struct EquilibriumExhaustion {
    pub capacities: Vec<f64>,
    /// `potentials[i][j]` is `κγ_{chain[i]}` at probe `j`.
    pub potentials: Vec<Vec<f64>>,
    pub full_capacity: f64,
    pub full_potentials: Vec<f64>,
    pub reports: Vec<TheoremReport>,
}

pub fn equilibrium_exhaustion(
    ctx: &EnergyContext,
    region: &Region,
    chain: &[Region],
    probes: &[Point],
    tol: f64,
) -> Result<EquilibriumExhaustion> {
    check_increasing(chain, region)?;
    let full = equilibrium_measure(ctx, region, DEFAULT_TOLERANCE)?;
    let full_potentials = ctx.potential(&full.gamma, probes)?;
    let mut capacities = Vec::with_capacity(chain.len());
    let mut potentials = Vec::with_capacity(chain.len());
    for sub in chain {
        let eq = equilibrium_measure(ctx, sub, DEFAULT_TOLERANCE)?;
        capacities.push(eq.capacity);
        potentials.push(ctx.potential(&eq.gamma, probes)?);
    }

    let mut monotone = Vec::new();
    let mut cap_monotone = Vec::new();
    for i in 1..chain.len() {
        for (j, (prev, next)) in potentials[i - 1].iter().zip(&potentials[i]).enumerate() {
            monotone.push(Detail::at_most(format!("K{} -> K{} probe {j}", i - 1, i), *prev, *next));
        }
        cap_monotone.push(Detail::at_most(
            format!("K{} -> K{}", i - 1, i),
            capacities[i - 1],
            capacities[i],
        ));
    }
    for (j, (last, full)) in potentials
        .last()
        .map(|p| p.as_slice())
        .unwrap_or(&[])
        .iter()
        .zip(&full_potentials)
        .enumerate()
    {
        monotone.push(Detail::at_most(format!("last -> full probe {j}"), *last, *full));
    }
    let limit: Vec<Detail> = potentials
        .last()
        .map(|last| {
            last.iter()
                .zip(&full_potentials)
                .enumerate()
                .map(|(j, (a, b))| Detail::new(format!("probe {j}"), *a, *b, (a - b).abs()))
                .collect()
        })
        .unwrap_or_default();

    Ok(EquilibriumExhaustion {
        reports: vec![
            TheoremReport::new("equilibrium_exhaustion.potential_monotone", tol, monotone),
            TheoremReport::new("equilibrium_exhaustion.capacity_monotone", tol, cap_monotone),
            TheoremReport::new("equilibrium_exhaustion.limit", 1e-8, limit),
        ],
        capacities,
        potentials,
        full_capacity: full.capacity,
        full_potentials,
    })
}

/// Each element is contained in the next, the last in `region`.
pub(crate) fn check_increasing(chain: &[Region], region: &Region) -> Result<()> {
    for (i, pair) in chain.windows(2).enumerate() {
        if !region_subset(&pair[0], &pair[1])? {
            return Err(Error::NestingViolation(format!(
                "chain element {i} ({}) is not contained in element {} ({})",
                pair[0].label(),
                i + 1,
                pair[1].label()
            )));
        }
    }
    if let Some(last) = chain.last() {
        if !region_subset(last, region)? {
            return Err(Error::NestingViolation(format!(
                "last chain element {} is not contained in {}",
                last.label(),
                region.label()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use approx::assert_relative_eq;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn ctx(eps: f64) -> EnergyContext {
        EnergyContext::new(KernelSpec::newtonian(3, eps).unwrap())
    }

    #[test]
    fn single_point() {
        // D = (0.25)^(−1/2) = 2.
        let c = ctx(0.5);
        let r = Region::new(vec![p(&[0.0; 3])], "pt").unwrap();
        let eq = equilibrium_measure(&c, &r, 1e-12).unwrap();
        assert_relative_eq!(eq.capacity, 0.5, max_relative = 1e-15);
        assert_relative_eq!(eq.gamma.weights()[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(eq.min_potential_on_region, 1.0, max_relative = 1e-15);
        assert_relative_eq!(capacity_via_unit_mass(&c, &r, 1e-12).unwrap(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn two_symmetric_points() {
        // D = 2, k = 1.25^(−1/2): w = 1/(D+k) each, capacity 2/(D+k).
        let c = ctx(0.5);
        let r = Region::new(vec![p(&[0.0; 3]), p(&[1.0, 0.0, 0.0])], "two").unwrap();
        let eq = equilibrium_measure(&c, &r, 1e-12).unwrap();
        for w in eq.gamma.weights() {
            assert_relative_eq!(*w, 0.34549150281252633, max_relative = 1e-13);
        }
        assert_relative_eq!(eq.capacity, 0.6909830056250527, max_relative = 1e-13);
        let oracle = equilibrium_by_potential_bound(&c, &r, 1e-12).unwrap();
        assert_relative_eq!(oracle.capacity, eq.capacity, max_relative = 1e-13);
        assert!(check_equilibrium(&eq, 1e-9).iter().all(|r| r.pass));
    }

    #[test]
    fn empty_region_has_zero_capacity() {
        let c = ctx(0.5);
        let eq = equilibrium_measure(&c, &Region::empty("e"), 1e-9).unwrap();
        assert_eq!(eq.capacity, 0.0);
        assert!(eq.gamma.is_empty());
    }

    #[test]
    fn capacity_monotone_under_inclusion() {
        let c = ctx(0.2);
        let pts: Vec<_> = (0..6).map(|i| p(&[i as f64 * 0.4, (i % 2) as f64 * 0.3, 0.0])).collect();
        let q = Region::new(pts.clone(), "q").unwrap();
        let b = Region::new(pts[..3].to_vec(), "b").unwrap();
        let cb = capacity_via_unit_mass(&c, &b, 1e-12).unwrap();
        let cq = capacity_via_unit_mass(&c, &q, 1e-12).unwrap();
        assert!(cb <= cq + 1e-12);
    }

    #[test]
    fn exhaustion_rejects_bad_nesting() {
        let c = ctx(0.2);
        let q = Region::new(vec![p(&[0.0; 3]), p(&[1.0, 0.0, 0.0])], "q").unwrap();
        let other = Region::new(vec![p(&[5.0, 0.0, 0.0])], "o").unwrap();
        let err = equilibrium_exhaustion(&c, &q, &[other], &[p(&[0.0, 0.0, 2.0])], 1e-7).unwrap_err();
        assert!(matches!(err, Error::NestingViolation(_)));
    }

    #[test]
    fn constant_chain_is_constant() {
        let c = ctx(0.2);
        let q = Region::new(vec![p(&[0.0; 3]), p(&[1.0, 0.0, 0.0]), p(&[0.0, 1.0, 0.0])], "q").unwrap();
        let out = equilibrium_exhaustion(&c, &q, &[q.clone(), q.clone(), q.clone()], &[p(&[0.0, 0.0, 2.0])], 1e-7)
            .unwrap();
        assert!(out.reports.iter().all(|r| r.pass));
        assert_eq!(out.potentials[0], out.potentials[2]);
    }
}
