//! Orthogonal projection in the energy norm onto the cone of positive
//! measures carried by a region, optionally intersected with a mass cap.
//!
//! With `K` the Gram matrix of the region and `b` the potential of the
//! source at the region points, the projection minimizes
//!
//! ```text
//!     ½ wᵀ K w − bᵀ w    subject to  w ≥ 0  [, Σw ≤ cap]
//! ```
//!
//! which is `½‖μ − ν‖²` up to a constant. The optimality conditions are the
//! discrete form of `(μ − μ_F, ν) ≤ 0` for all `ν` in the cone and
//! `(μ − μ_F, μ_F) = 0`:
//!
//! ```text
//!     (Kw − b)ᵢ + λ ≥ 0  everywhere,   = 0  where wᵢ > 0,   λ ≥ 0,   λ(cap − Σw) = 0
//! ```

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg::{factor_gram, IncrementalCholesky, JitterPolicy, Matrix};
use crate::types::{DiscreteMeasure, Region};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Linear constraint on the total mass `Σw`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MassConstraint {
    Free,
    AtMost(f64),
    Exactly(f64),
}

impl MassConstraint {
    fn bound(&self) -> Option<f64> {
        match *self {
            MassConstraint::Free => None,
            MassConstraint::AtMost(c) | MassConstraint::Exactly(c) => Some(c),
        }
    }
}

/// Output of [`solve_nnls_core`].
#[derive(Clone, Debug)]
pub struct NnlsSolution {
    pub weights: Vec<f64>,
    /// Multiplier of the mass constraint, zero when it is absent or slack.
    pub multiplier: f64,
    /// `Kw − b`.
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub active_set_size: usize,
    pub constraint_active: bool,
}

enum Blocking {
    Index(usize),
    Cap,
}

/// Primal active-set method for `min ½wᵀKw − bᵀw, w ≥ 0` with an optional
/// mass constraint.
///
/// The passive set `P` (coordinates allowed to be positive) is grown by the
/// most violated dual coordinate, lowest index first on ties, and shrunk by
/// the ratio step whenever the equality-restricted solution leaves the
/// feasible set. `K[P, P]` is kept factored and updated in `O(|P|²)`.
/// `tol` is relative to `1 + ‖b‖∞`.
pub fn solve_nnls_core(
    k: &Matrix,
    b: &[f64],
    mass: MassConstraint,
    tol: f64,
    max_iter: usize,
) -> Result<NnlsSolution> {
    let n = b.len();
    if k.rows() != n || k.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k.rows(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    if let Some(c) = mass.bound() {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Validation(format!("mass bound must be finite and >= 0, got {c}")));
        }
        if n == 0 && matches!(mass, MassConstraint::Exactly(t) if t > 0.0) {
            return Err(Error::Validation("positive mass requested on an empty region".into()));
        }
    }
    let b_inf = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = tol * (1.0 + b_inf);

    // A zero bound pins w = 0; only the multiplier remains to be chosen.
    if mass.bound() == Some(0.0) || n == 0 {
        let b_max = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let multiplier = match mass {
            MassConstraint::Free => 0.0,
            MassConstraint::AtMost(_) => b_max.max(0.0),
            MassConstraint::Exactly(_) => b_max,
        };
        return Ok(NnlsSolution {
            weights: vec![0.0; n],
            multiplier: if n == 0 { 0.0 } else { multiplier },
            gradient: b.iter().map(|v| -v).collect(),
            iterations: 0,
            active_set_size: 0,
            constraint_active: mass.bound().is_some() && n > 0,
        });
    }

    let mut solver = ActiveSet::new(k, b, mass);
    if let MassConstraint::Exactly(t) = mass {
        // Cheapest vertex of the simplex.
        let start = (0..n)
            .min_by(|&i, &j| {
                let fi = 0.5 * t * t * k.get(i, i) - t * b[i];
                let fj = 0.5 * t * t * k.get(j, j) - t * b[j];
                fi.partial_cmp(&fj).expect("finite objective")
            })
            .expect("non-empty");
        solver.w[start] = t;
        solver.add(start)?;
        solver.cap_working = true;
    }

    let mut visited: HashSet<u64> = HashSet::new();
    let mut iterations = 0usize;
    loop {
        let (z, lambda) = solver.restricted_solution();
        let sum_z: f64 = z.iter().sum();
        let cap_violated = match mass {
            MassConstraint::AtMost(c) => !solver.cap_working && sum_z > c,
            _ => false,
        };
        let infeasible = z.iter().any(|&v| v <= 0.0);

        if !infeasible && !cap_violated {
            for (pos, &i) in solver.passive.iter().enumerate() {
                solver.w[i] = z[pos];
            }
            solver.lambda = if solver.cap_working { lambda } else { 0.0 };
            solver.refresh_gradient();

            let mut best: Option<(usize, f64)> = None;
            for i in 0..n {
                if solver.in_passive[i] {
                    continue;
                }
                let v = solver.gradient[i] + solver.lambda;
                if best.map_or(true, |(_, bv)| v < bv) {
                    best = Some((i, v));
                }
            }
            let cap_multiplier = match mass {
                MassConstraint::AtMost(_) if solver.cap_working => solver.lambda,
                _ => f64::INFINITY,
            };
            let bound_multiplier = best.map_or(f64::INFINITY, |(_, v)| v);
            if bound_multiplier.min(cap_multiplier) >= -scale {
                break;
            }

            iterations += 1;
            if iterations > max_iter {
                return Err(solver.non_convergence(iterations, scale));
            }
            if !visited.insert(solver.signature()) {
                return Err(Error::Cycling { iterations });
            }
            if cap_multiplier < bound_multiplier {
                solver.cap_working = false;
            } else {
                let (i, _) = best.expect("violated coordinate");
                solver.add(i)?;
            }
        } else {
            let mut alpha = f64::INFINITY;
            let mut blocking = None;
            for (pos, &i) in solver.passive.iter().enumerate() {
                if z[pos] <= 0.0 {
                    let a = solver.w[i] / (solver.w[i] - z[pos]);
                    if a < alpha {
                        alpha = a;
                        blocking = Some(Blocking::Index(pos));
                    }
                }
            }
            if cap_violated {
                let c = mass.bound().expect("capped");
                let sum_w: f64 = solver.passive.iter().map(|&i| solver.w[i]).sum();
                let a = (c - sum_w) / (sum_z - sum_w);
                if a < alpha {
                    alpha = a;
                    blocking = Some(Blocking::Cap);
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            for (pos, &i) in solver.passive.iter().enumerate() {
                solver.w[i] += alpha * (z[pos] - solver.w[i]);
            }
            match blocking.expect("ratio step has a blocking constraint") {
                Blocking::Cap => solver.cap_working = true,
                Blocking::Index(pos) => {
                    let i = solver.passive[pos];
                    solver.w[i] = 0.0;
                }
            }
            solver.drop_nonpositive();

            iterations += 1;
            if iterations > max_iter {
                solver.refresh_gradient();
                return Err(solver.non_convergence(iterations, scale));
            }
        }
    }

    let active_set_size = solver.passive.len();
    let constraint_active = solver.cap_working;
    Ok(NnlsSolution {
        weights: solver.w,
        multiplier: solver.lambda,
        gradient: solver.gradient,
        iterations,
        active_set_size,
        constraint_active,
    })
}

struct ActiveSet<'a> {
    k: &'a Matrix,
    b: &'a [f64],
    mass: MassConstraint,
    w: Vec<f64>,
    gradient: Vec<f64>,
    lambda: f64,
    passive: Vec<usize>,
    in_passive: Vec<bool>,
    chol: IncrementalCholesky,
    cap_working: bool,
}

impl<'a> ActiveSet<'a> {
    fn new(k: &'a Matrix, b: &'a [f64], mass: MassConstraint) -> Self {
        let n = b.len();
        ActiveSet {
            k,
            b,
            mass,
            w: vec![0.0; n],
            gradient: b.iter().map(|v| -v).collect(),
            lambda: 0.0,
            passive: Vec::new(),
            in_passive: vec![false; n],
            chol: IncrementalCholesky::default(),
            cap_working: false,
        }
    }

    fn add(&mut self, i: usize) -> Result<()> {
        let cross: Vec<f64> = self.passive.iter().map(|&j| self.k.get(j, i)).collect();
        self.chol
            .push(&cross, self.k.get(i, i))
            .map_err(|pivot| Error::NotPositiveDefinite { smallest_pivot: pivot })?;
        self.passive.push(i);
        self.in_passive[i] = true;
        Ok(())
    }

    fn drop_nonpositive(&mut self) {
        for pos in (0..self.passive.len()).rev() {
            let i = self.passive[pos];
            if self.w[i] <= 0.0 {
                self.w[i] = 0.0;
                self.passive.remove(pos);
                self.in_passive[i] = false;
                self.chol.remove(pos);
            }
        }
    }

    /// Minimizer over `span{eᵢ : i ∈ P}`, with the mass constraint as an
    /// equality when it is in the working set.
    fn restricted_solution(&self) -> (Vec<f64>, f64) {
        if self.passive.is_empty() {
            return (Vec::new(), 0.0);
        }
        let rhs: Vec<f64> = self.passive.iter().map(|&i| self.b[i]).collect();
        let mut z = self.chol.solve(&rhs);
        let mut lambda = 0.0;
        if self.cap_working {
            let t = self.mass.bound().expect("working mass constraint");
            let v = self.chol.solve(&vec![1.0; self.passive.len()]);
            let sum_z: f64 = z.iter().sum();
            let sum_v: f64 = v.iter().sum();
            lambda = (sum_z - t) / sum_v;
            for (zi, vi) in z.iter_mut().zip(&v) {
                *zi -= lambda * vi;
            }
        }
        (z, lambda)
    }

    fn refresh_gradient(&mut self) {
        let n = self.b.len();
        for i in 0..n {
            let row = self.k.row(i);
            let s: f64 = self.passive.iter().map(|&j| row[j] * self.w[j]).sum();
            self.gradient[i] = s - self.b[i];
        }
    }

    fn signature(&self) -> u64 {
        let mut p = self.passive.clone();
        p.sort_unstable();
        let mut h = DefaultHasher::new();
        p.hash(&mut h);
        self.cap_working.hash(&mut h);
        h.finish()
    }

    fn non_convergence(&self, iterations: usize, _scale: f64) -> Error {
        let mut stationarity = 0.0f64;
        let mut dual = 0.0f64;
        for i in 0..self.w.len() {
            let v = self.gradient[i] + self.lambda;
            if self.w[i] > 0.0 {
                stationarity = stationarity.max(v.abs());
            }
            dual = dual.max(-v);
        }
        Error::NonConvergence {
            iterations,
            stationarity,
            dual_feasibility: dual,
            best: self.w.clone(),
        }
    }
}

/// Residuals of the projection's optimality conditions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    /// `max |(Kw − b)ᵢ + λ|` over coordinates with `wᵢ > 0`.
    pub stationarity_residual: f64,
    /// `max max(0, −((Kw − b)ᵢ + λ))` over all coordinates.
    pub dual_feasibility: f64,
    /// `|wᵀ(Kw − b) + λΣw| + λ·|cap − Σw|`.
    pub complementarity: f64,
    pub multiplier: f64,
    /// `tol · (1 + ‖b‖∞)`.
    pub tolerance: f64,
}

impl KktCertificate {
    pub fn compute(
        k: &Matrix,
        b: &[f64],
        w: &[f64],
        multiplier: f64,
        mass: MassConstraint,
        tol: f64,
    ) -> Self {
        let g = k.mul_vec(w);
        let b_inf = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut stationarity = 0.0f64;
        let mut dual = 0.0f64;
        let mut wg = 0.0;
        for i in 0..w.len() {
            let gi = g[i] - b[i];
            let v = gi + multiplier;
            if w[i] > 0.0 {
                stationarity = stationarity.max(v.abs());
            }
            dual = dual.max(-v);
            wg += w[i] * gi;
        }
        let total: f64 = w.iter().sum();
        let slack = match mass {
            MassConstraint::AtMost(c) => multiplier * (c - total).abs(),
            _ => 0.0,
        };
        KktCertificate {
            stationarity_residual: stationarity,
            dual_feasibility: dual,
            complementarity: (wg + multiplier * total).abs() + slack,
            multiplier,
            tolerance: tol * (1.0 + b_inf),
        }
    }

    pub fn worst(&self) -> f64 {
        self.stationarity_residual
            .max(self.dual_feasibility)
            .max(self.complementarity)
    }

    pub fn satisfied(&self) -> bool {
        self.worst() <= self.tolerance
    }
}

/// Projection of `source` onto the measures carried by `region`.
#[derive(Clone, Debug)]
pub struct ProjectionProblem {
    pub source: DiscreteMeasure,
    pub region: Region,
    pub kernel: KernelSpec,
    /// Upper bound on the total mass of the projection.
    pub mass_cap: Option<f64>,
    pub tolerance: f64,
    /// Defaults to ten times the region size.
    pub max_iterations: Option<usize>,
}

impl ProjectionProblem {
    pub fn new(source: DiscreteMeasure, region: Region, kernel: KernelSpec) -> Self {
        ProjectionProblem {
            source,
            region,
            kernel,
            mass_cap: None,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: None,
        }
    }

    pub fn with_mass_cap(mut self, cap: f64) -> Self {
        self.mass_cap = Some(cap);
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    /// Weights on the region points, in region order.
    pub weights: Vec<f64>,
    pub certificate: KktCertificate,
    pub iterations: usize,
    pub active_set_size: usize,
    pub cap_active: bool,
    pub jitter: f64,
}

/// Projects with a throwaway energy context.
pub fn project(problem: &ProjectionProblem) -> Result<Projection> {
    project_in(&EnergyContext::uncached(problem.kernel), problem)
}

/// Projects using (and filling) the Gram cache of `ctx`.
pub fn project_in(ctx: &EnergyContext, problem: &ProjectionProblem) -> Result<Projection> {
    if ctx.kernel() != &problem.kernel {
        return Err(Error::Validation("projection kernel differs from the context kernel".into()));
    }
    if !(problem.tolerance > 0.0) {
        return Err(Error::Validation(format!(
            "tolerance must be positive, got {}",
            problem.tolerance
        )));
    }
    if let Some(cap) = problem.mass_cap {
        if !(cap >= 0.0 && cap.is_finite()) {
            return Err(Error::Validation(format!("mass cap must be finite and >= 0, got {cap}")));
        }
    }
    if let (Some(ds), Some(dr)) = (problem.source.dim(), problem.region.dim()) {
        if ds != dr {
            return Err(Error::DimensionMismatch {
                expected: dr,
                found: ds,
            });
        }
    }
    let region = &problem.region;
    let n = region.len();
    let mass = problem.mass_cap.map_or(MassConstraint::Free, MassConstraint::AtMost);

    let trivial = |certificate| Projection {
        weights: vec![0.0; n],
        certificate,
        iterations: 0,
        active_set_size: 0,
        cap_active: false,
        jitter: 0.0,
    };
    if n == 0 {
        return Ok(trivial(KktCertificate::default()));
    }
    let b = ctx.potential(&problem.source, region.points())?;
    if problem.source.is_zero() {
        let cert = KktCertificate {
            tolerance: problem.tolerance,
            ..KktCertificate::default()
        };
        return Ok(trivial(cert));
    }

    let k = ctx.gram(region.points(), region.points())?;
    let factor = factor_gram(&k, &JitterPolicy::default())?;
    let max_iter = problem.max_iterations.unwrap_or(10 * n);
    let solution = if factor.jitter > 0.0 {
        let mut kj = (*k).clone();
        for i in 0..n {
            kj.set(i, i, kj.get(i, i) + factor.jitter);
        }
        solve_nnls_core(&kj, &b, mass, problem.tolerance, max_iter)?
    } else {
        solve_nnls_core(&k, &b, mass, problem.tolerance, max_iter)?
    };
    let certificate = KktCertificate::compute(
        &k,
        &b,
        &solution.weights,
        solution.multiplier,
        mass,
        problem.tolerance,
    );
    if !certificate.satisfied() {
        log::warn!(
            "projection onto {} finished with KKT residual {:e} above {:e}",
            region.label(),
            certificate.worst(),
            certificate.tolerance
        );
    }
    Ok(Projection {
        weights: solution.weights,
        certificate,
        iterations: solution.iterations,
        active_set_size: solution.active_set_size,
        cap_active: solution.constraint_active,
        jitter: factor.jitter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{make_measure, Point};
    use approx::assert_relative_eq;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn solve(k: &[Vec<f64>], b: &[f64], mass: MassConstraint) -> NnlsSolution {
        solve_nnls_core(&Matrix::from_rows(k), b, mass, 1e-12, 100).unwrap()
    }

    #[test]
    fn scalar_interior() {
        let s = solve(&[vec![2.0]], &[1.0], MassConstraint::Free);
        assert_relative_eq!(s.weights[0], 0.5, max_relative = 1e-15);
        assert_eq!(s.multiplier, 0.0);
    }

    #[test]
    fn scalar_on_face() {
        let s = solve(&[vec![2.0]], &[-1.0], MassConstraint::Free);
        assert_eq!(s.weights, vec![0.0]);
        assert_eq!(s.gradient[0], 1.0);
    }

    #[test]
    fn binding_cap() {
        // Symmetric 2x2: w = (0.1, 0.1) and λ = 1 − 0.3 = 0.7 by hand.
        let s = solve(&[vec![2.0, 1.0], vec![1.0, 2.0]], &[1.0, 1.0], MassConstraint::AtMost(0.2));
        assert_relative_eq!(s.weights[0], 0.1, max_relative = 1e-14);
        assert_relative_eq!(s.weights[1], 0.1, max_relative = 1e-14);
        assert_relative_eq!(s.multiplier, 0.7, max_relative = 1e-14);
        assert!(s.constraint_active);
    }

    #[test]
    fn slack_cap_matches_uncapped() {
        let k = [vec![2.0, 1.0], vec![1.0, 2.0]];
        let free = solve(&k, &[1.0, 1.0], MassConstraint::Free);
        let capped = solve(&k, &[1.0, 1.0], MassConstraint::AtMost(5.0));
        assert_eq!(free.weights, capped.weights);
        assert_eq!(capped.multiplier, 0.0);
    }

    #[test]
    fn zero_cap_pins_zero() {
        let s = solve(&[vec![2.0, 1.0], vec![1.0, 2.0]], &[1.0, 0.5], MassConstraint::AtMost(0.0));
        assert_eq!(s.weights, vec![0.0, 0.0]);
        assert_eq!(s.multiplier, 1.0);
    }

    #[test]
    fn exact_mass_on_simplex() {
        // Two symmetric points: the unit-mass energy minimizer is uniform.
        let k = [vec![2.0, 0.8944271909999159], vec![0.8944271909999159, 2.0]];
        let s = solve(&k, &[0.0, 0.0], MassConstraint::Exactly(1.0));
        assert_relative_eq!(s.weights[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(s.weights[1], 0.5, max_relative = 1e-14);
    }

    #[test]
    fn invalid_inputs() {
        let k = Matrix::from_rows(&[vec![2.0]]);
        assert!(solve_nnls_core(&k, &[1.0], MassConstraint::AtMost(-1.0), 1e-9, 10).is_err());
        assert!(solve_nnls_core(&k, &[1.0], MassConstraint::Free, 0.0, 10).is_err());
        assert!(solve_nnls_core(&k, &[1.0, 2.0], MassConstraint::Free, 1e-9, 10).is_err());
    }

    #[test]
    fn iteration_budget() {
        let k = Matrix::from_rows(&[
            vec![2.0, 0.1, 0.1],
            vec![0.1, 2.0, 0.1],
            vec![0.1, 0.1, 2.0],
        ]);
        let err = solve_nnls_core(&k, &[1.0, 1.0, 1.0], MassConstraint::Free, 1e-9, 1).unwrap_err();
        match err {
            Error::NonConvergence { best, .. } => assert_eq!(best.len(), 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn source_on_region_is_fixed() {
        let kernel = KernelSpec::newtonian(3, 0.2).unwrap();
        let pts = vec![p(&[0.0; 3]), p(&[1.0, 0.0, 0.0]), p(&[0.0, 1.0, 0.0])];
        let region = Region::new(pts.clone(), "r").unwrap();
        let mu = make_measure(pts, vec![0.3, 0.0, 1.2]).unwrap();
        let proj = project(&ProjectionProblem::new(mu.clone(), region, kernel)).unwrap();
        for (w, m) in proj.weights.iter().zip(mu.weights()) {
            assert_relative_eq!(*w, *m, epsilon = 1e-12);
        }
        assert!(proj.certificate.satisfied());
    }

    #[test]
    fn single_point_closed_form() {
        // Region {0}, ε = 0.5 so K = [2]; unit source at distance 3 gives
        // b = 9.25^(−1/2) and w* = b / 2.
        let kernel = KernelSpec::newtonian(3, 0.5).unwrap();
        let region = Region::new(vec![p(&[0.0; 3])], "pt").unwrap();
        let mu = make_measure(vec![p(&[3.0, 0.0, 0.0])], vec![1.0]).unwrap();
        let proj = project(&ProjectionProblem::new(mu, region, kernel)).unwrap();
        assert_relative_eq!(proj.weights[0], 0.1643989873053573, max_relative = 1e-14);
    }

    #[test]
    fn zero_source_and_empty_region() {
        let kernel = KernelSpec::newtonian(3, 0.5).unwrap();
        let region = Region::new(vec![p(&[0.0; 3]), p(&[1.0, 0.0, 0.0])], "r").unwrap();
        let proj = project(&ProjectionProblem::new(DiscreteMeasure::zero(), region, kernel)).unwrap();
        assert_eq!(proj.weights, vec![0.0, 0.0]);
        let mu = make_measure(vec![p(&[3.0, 0.0, 0.0])], vec![1.0]).unwrap();
        let proj = project(&ProjectionProblem::new(mu, Region::empty("e"), kernel)).unwrap();
        assert!(proj.weights.is_empty());
    }

    #[test]
    fn negative_cap_rejected() {
        let kernel = KernelSpec::newtonian(3, 0.5).unwrap();
        let region = Region::new(vec![p(&[0.0; 3])], "r").unwrap();
        let mu = make_measure(vec![p(&[3.0, 0.0, 0.0])], vec![1.0]).unwrap();
        let problem = ProjectionProblem::new(mu, region, kernel).with_mass_cap(-0.1);
        assert!(matches!(project(&problem), Err(Error::Validation(_))));
    }
}
