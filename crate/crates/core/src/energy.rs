//! Potentials, mutual energies and energy-norm distances of discrete
//! measures under a single kernel.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::kernel::{assemble_gram, KernelSpec};
use crate::linalg::Matrix;
use crate::types::{DiscreteMeasure, Point};

/// Radicands down to `-GUARD · scale` are treated as round-off and clamped.
const RADICAND_GUARD: f64 = 1e-12;

type BlockKey = (u64, usize, u64, usize);

/// The pre-Hilbert space of measures for one kernel, with a cache of Gram
/// blocks keyed by the contents of the two point sets.
#[derive(Debug)]
pub struct EnergyContext {
    kernel: KernelSpec,
    cache: RwLock<HashMap<BlockKey, Arc<Matrix>>>,
    caching: bool,
}

fn fingerprint(points: &[Point]) -> (u64, usize) {
    let mut h = DefaultHasher::new();
    points.hash(&mut h);
    (h.finish(), points.len())
}

impl EnergyContext {
    pub fn new(kernel: KernelSpec) -> Self {
        EnergyContext {
            kernel,
            cache: RwLock::new(HashMap::new()),
            caching: true,
        }
    }

    /// A context that never stores blocks.
    pub fn uncached(kernel: KernelSpec) -> Self {
        EnergyContext {
            caching: false,
            ..EnergyContext::new(kernel)
        }
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn clear_cache(&self) {
        self.cache.write().expect("cache lock poisoned").clear();
    }

    pub fn cached_blocks(&self) -> usize {
        self.cache.read().expect("cache lock poisoned").len()
    }

    /// `κ(rows[i], cols[j])`.
    pub fn gram(&self, rows: &[Point], cols: &[Point]) -> Result<Arc<Matrix>> {
        if !self.caching {
            return Ok(Arc::new(assemble_gram(&self.kernel, rows, cols)?));
        }
        let (hr, nr) = fingerprint(rows);
        let (hc, nc) = fingerprint(cols);
        let key = (hr, nr, hc, nc);
        if let Some(m) = self.cache.read().expect("cache lock poisoned").get(&key) {
            return Ok(Arc::clone(m));
        }
        // Identical inputs give bitwise-identical blocks, so a concurrent
        // insert of the same key is harmless.
        let block = Arc::new(assemble_gram(&self.kernel, rows, cols)?);
        self.cache
            .write()
            .expect("cache lock poisoned")
            .insert(key, Arc::clone(&block));
        Ok(block)
    }

    fn check_measure(&self, mu: &DiscreteMeasure) -> Result<()> {
        match mu.dim() {
            Some(d) if d != self.kernel.dim => Err(Error::DimensionMismatch {
                expected: self.kernel.dim,
                found: d,
            }),
            _ => Ok(()),
        }
    }

    /// `κμ` at each probe.
    pub fn potential(&self, mu: &DiscreteMeasure, probes: &[Point]) -> Result<Vec<f64>> {
        self.check_measure(mu)?;
        if mu.is_empty() {
            for p in probes {
                self.kernel.check_dim(p)?;
            }
            return Ok(vec![0.0; probes.len()]);
        }
        let g = self.gram(probes, mu.points())?;
        Ok(g.mul_vec(mu.weights()))
    }

    /// `κ(μ, ν) = Σᵢⱼ μᵢ νⱼ κ(xᵢ, yⱼ)`.
    pub fn mutual_energy(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
        self.check_measure(mu)?;
        self.check_measure(nu)?;
        if mu.is_empty() || nu.is_empty() {
            return Ok(0.0);
        }
        let g = self.gram(mu.points(), nu.points())?;
        Ok(g.bilinear(mu.weights(), nu.weights()))
    }

    /// `‖μ‖²`.
    pub fn energy(&self, mu: &DiscreteMeasure) -> Result<f64> {
        self.mutual_energy(mu, mu)
    }

    /// `‖μ − ν‖`.
    ///
    /// The difference is formed coefficient-wise on the union of the two
    /// supports and then fed through the bilinear form, which avoids the
    /// cancellation of `‖μ‖² − 2(μ,ν) + ‖ν‖²` when the measures are close.
    pub fn energy_distance(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
        Ok(self.energy_distance_sq(mu, nu)?.sqrt())
    }

    /// `‖μ − ν‖²`, clamped at zero within the round-off guard.
    pub fn energy_distance_sq(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
        self.check_measure(mu)?;
        self.check_measure(nu)?;
        let mu = mu.trimmed();
        let nu = nu.trimmed();
        let mut index: HashMap<&Point, usize> = HashMap::new();
        let mut points: Vec<Point> = Vec::with_capacity(mu.len() + nu.len());
        let mut coeff: Vec<f64> = Vec::with_capacity(mu.len() + nu.len());
        for (sign, m) in [(1.0, &mu), (-1.0, &nu)] {
            for (p, w) in m.points().iter().zip(m.weights()) {
                match index.get(p) {
                    Some(&i) => coeff[i] += sign * w,
                    None => {
                        index.insert(p, points.len());
                        points.push(p.clone());
                        coeff.push(sign * w);
                    }
                }
            }
        }
        if points.is_empty() {
            return Ok(0.0);
        }
        let g = assemble_gram(&self.kernel, &points, &points)?;
        let radicand = g.bilinear(&coeff, &coeff);
        if radicand >= 0.0 {
            // Adding zero turns a negative zero positive.
            return Ok(radicand + 0.0);
        }
        let scale = g.bilinear(
            &coeff.iter().map(|c| c.abs()).collect::<Vec<_>>(),
            &coeff.iter().map(|c| c.abs()).collect::<Vec<_>>(),
        );
        if radicand >= -RADICAND_GUARD * scale {
            Ok(0.0)
        } else {
            Err(Error::NumericalConsistency { radicand })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::make_measure;
    use approx::assert_relative_eq;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn ctx(eps: f64) -> EnergyContext {
        EnergyContext::new(KernelSpec::newtonian(3, eps).unwrap())
    }

    fn atom(c: &[f64], w: f64) -> DiscreteMeasure {
        make_measure(vec![p(c)], vec![w]).unwrap()
    }

    #[test]
    fn potential_examples() {
        let c = ctx(0.0);
        let v = c.potential(&atom(&[0.0; 3], 1.0), &[p(&[1.0, 0.0, 0.0])]).unwrap();
        assert_eq!(v, vec![1.0]);
        let z = c.potential(&DiscreteMeasure::zero(), &[p(&[1.0, 0.0, 0.0]), p(&[0.0; 3])]).unwrap();
        assert_eq!(z, vec![0.0, 0.0]);
        let two = make_measure(vec![p(&[1.0, 0.0, 0.0]), p(&[-1.0, 0.0, 0.0])], vec![0.5, 0.5]).unwrap();
        assert_eq!(c.potential(&two, &[p(&[0.0; 3])]).unwrap(), vec![1.0]);
    }

    #[test]
    fn potential_on_atom_needs_epsilon() {
        let c = ctx(0.0);
        assert!(c.potential(&atom(&[0.0; 3], 1.0), &[p(&[0.0; 3])]).is_err());
    }

    #[test]
    fn mutual_energy_examples() {
        let c = ctx(0.0);
        let e = c.mutual_energy(&atom(&[0.0; 3], 1.0), &atom(&[1.0, 0.0, 0.0], 1.0)).unwrap();
        assert_eq!(e, 1.0);
        assert_eq!(c.mutual_energy(&DiscreteMeasure::zero(), &atom(&[0.0; 3], 1.0)).unwrap(), 0.0);
        assert_eq!(ctx(0.5).energy(&atom(&[0.0; 3], 1.0)).unwrap(), 2.0);
        assert!(c.energy(&atom(&[0.0; 3], 1.0)).is_err());
    }

    #[test]
    fn energy_distance_examples() {
        let c = ctx(0.5);
        let a = atom(&[0.0; 3], 1.0);
        let b = atom(&[1.0, 0.0, 0.0], 1.0);
        assert_eq!(c.energy_distance(&a, &a).unwrap(), 0.0);
        assert_relative_eq!(
            c.energy_distance(&a, &DiscreteMeasure::zero()).unwrap(),
            2f64.sqrt(),
            max_relative = 1e-15
        );
        // 2·2.0 − 2·(1.25)^(−1/2), from an independent scalar evaluation.
        assert_relative_eq!(
            c.energy_distance_sq(&a, &b).unwrap(),
            2.2111456180001685,
            max_relative = 1e-14
        );
    }

    #[test]
    fn energy_distance_resolves_near_coincident_measures() {
        let c = ctx(0.1);
        let pts: Vec<_> = (0..5).map(|i| p(&[i as f64 * 0.3, 0.0, 0.0])).collect();
        let mu = make_measure(pts.clone(), vec![1.0; 5]).unwrap();
        let nu = make_measure(pts, vec![1.0, 1.0, 1.0 + 1e-10, 1.0, 1.0]).unwrap();
        let d = c.energy_distance(&mu, &nu).unwrap();
        // Only one coefficient differs, so ‖μ−ν‖ = 1e-10·√κ(x,x) = 1e-10·√10.
        assert_relative_eq!(d, 1e-10 * 10f64.sqrt(), max_relative = 1e-5);
    }

    #[test]
    fn cache_reuses_blocks() {
        let c = ctx(0.1);
        let pts = vec![p(&[0.0; 3]), p(&[1.0, 0.0, 0.0])];
        let a = c.gram(&pts, &pts).unwrap();
        let b = c.gram(&pts, &pts).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(c.cached_blocks(), 1);
        let u = EnergyContext::uncached(*c.kernel());
        u.gram(&pts, &pts).unwrap();
        assert_eq!(u.cached_blocks(), 0);
    }

    #[test]
    fn dimension_checked() {
        let c = ctx(0.1);
        let m = make_measure(vec![p(&[0.0; 4])], vec![1.0]).unwrap();
        assert!(c.energy(&m).is_err());
    }
}
