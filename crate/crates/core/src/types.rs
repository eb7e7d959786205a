//! Points, discrete measures, regions and the result records built from them.
//!
//! Point identity is bitwise coordinate equality. Regions are generated from
//! shared grids, so nesting `A ⊂ Q` is decided exactly without any geometric
//! tolerance.

use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of ℝⁿ with finite coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Validation("point has no coordinates".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::Validation(format!("non-finite coordinate {c}")));
        }
        Ok(Point(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Point::new(coords)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl PartialEq for Point {
    fn eq(&self, other: &Self) -> bool {
        self.0.len() == other.0.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Eq for Point {}

impl Hash for Point {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.len().hash(state);
        for c in &self.0 {
            c.to_bits().hash(state);
        }
    }
}

fn common_dim(points: &[Point]) -> Result<Option<usize>> {
    let Some(first) = points.first() else {
        return Ok(None);
    };
    let dim = first.dim();
    for p in points {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
    }
    Ok(Some(dim))
}

/// Finite atomic positive measure `Σ wᵢ δ_{xᵢ}`.
///
/// Atoms with zero weight are kept; the support is the set of atoms with
/// positive weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr")]
pub struct DiscreteMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct MeasureRepr {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl TryFrom<MeasureRepr> for DiscreteMeasure {
    type Error = Error;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        make_measure(r.points, r.weights)
    }
}

/// Builds a measure, merging atoms at identical points by summing weights.
pub fn make_measure(points: Vec<Point>, weights: Vec<f64>) -> Result<DiscreteMeasure> {
    if points.len() != weights.len() {
        return Err(Error::Validation(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    common_dim(&points)?;
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Validation(format!(
            "weights must be finite and non-negative, got {w}"
        )));
    }

    let mut index: HashMap<Point, usize> = HashMap::with_capacity(points.len());
    let mut merged_points = Vec::with_capacity(points.len());
    let mut merged_weights: Vec<f64> = Vec::with_capacity(points.len());
    for (p, w) in points.into_iter().zip(weights) {
        match index.get(&p) {
            Some(&i) => merged_weights[i] += w,
            None => {
                index.insert(p.clone(), merged_points.len());
                merged_points.push(p);
                merged_weights.push(w);
            }
        }
    }
    Ok(DiscreteMeasure {
        points: merged_points,
        weights: merged_weights,
    })
}

impl DiscreteMeasure {
    pub fn zero() -> Self {
        DiscreteMeasure {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Point::dim)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// True when every weight is zero.
    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    /// Indices of atoms with positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        make_measure(
            self.points.clone(),
            self.weights.iter().map(|w| w * factor).collect(),
        )
    }

    /// Sum of two measures, atoms merged by point identity.
    pub fn plus(&self, other: &DiscreteMeasure) -> Result<Self> {
        let points = self.points.iter().chain(&other.points).cloned().collect();
        let weights = self.weights.iter().chain(&other.weights).copied().collect();
        make_measure(points, weights)
    }

    /// The same measure with zero-weight atoms dropped.
    pub fn trimmed(&self) -> Self {
        let keep = self.support();
        DiscreteMeasure {
            points: keep.iter().map(|&i| self.points[i].clone()).collect(),
            weights: keep.iter().map(|&i| self.weights[i]).collect(),
        }
    }
}

/// A finite point cloud onto which measures are swept.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RegionRepr")]
pub struct Region {
    points: Vec<Point>,
    label: String,
}

#[derive(Deserialize)]
struct RegionRepr {
    points: Vec<Point>,
    label: String,
}

impl TryFrom<RegionRepr> for Region {
    type Error = Error;
    fn try_from(r: RegionRepr) -> Result<Self> {
        if r.points.is_empty() {
            Ok(Region::empty(r.label))
        } else {
            Region::new(r.points, r.label)
        }
    }
}

impl Region {
    /// A non-empty region of pairwise distinct points.
    pub fn new(points: Vec<Point>, label: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation(
                "region is empty; use Region::empty for the empty set".into(),
            ));
        }
        common_dim(&points)?;
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if !seen.insert(p) {
                return Err(Error::Validation(format!(
                    "duplicate point {:?} in region",
                    p.coords()
                )));
            }
        }
        Ok(Region {
            points,
            label: label.into(),
        })
    }

    pub fn empty(label: impl Into<String>) -> Self {
        Region {
            points: Vec::new(),
            label: label.into(),
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Point::dim)
    }

    /// Subregion made of the given indices, in the given order.
    pub fn select(&self, indices: &[usize], label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if indices.is_empty() {
            return Ok(Region::empty(label));
        }
        let points = indices
            .iter()
            .map(|&i| {
                self.points
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Validation(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Region::new(points, label)
    }

    /// Union with another region; points of `self` come first.
    pub fn union(&self, other: &Region, label: impl Into<String>) -> Result<Self> {
        let mut seen: HashSet<&Point> = self.points.iter().collect();
        let mut points = self.points.clone();
        for p in &other.points {
            if seen.insert(p) {
                points.push(p.clone());
            }
        }
        if points.is_empty() {
            return Ok(Region::empty(label));
        }
        Region::new(points, label)
    }

    /// The measure on this region's points with the given weights.
    pub fn measure(&self, weights: Vec<f64>) -> Result<DiscreteMeasure> {
        make_measure(self.points.clone(), weights)
    }

    /// Smallest nearest-neighbour distance, `None` for fewer than two points.
    pub fn min_spacing(&self) -> Option<f64> {
        min_spacing(&self.points)
    }
}

pub fn min_spacing(points: &[Point]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(points[i].dist_sq(&points[j]));
        }
    }
    Some(best.sqrt())
}

/// True iff every point of `b` occurs in `q`.
pub fn region_subset(b: &Region, q: &Region) -> Result<bool> {
    if let (Some(db), Some(dq)) = (b.dim(), q.dim()) {
        if db != dq {
            return Err(Error::DimensionMismatch {
                expected: dq,
                found: db,
            });
        }
    }
    let members: HashSet<&Point> = q.points.iter().collect();
    Ok(b.points.iter().all(|p| members.contains(p)))
}

/// Swept measure with its optimality certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub region_label: String,
    /// Weights on every region point, in region order.
    pub swept: DiscreteMeasure,
    pub energy_distance: f64,
    pub kkt_stationarity: f64,
    pub kkt_dual_feasibility: f64,
    pub kkt_complementarity: f64,
    /// Scale the KKT residuals are measured against, `tol · (1 + ‖b‖∞)`.
    pub kkt_tolerance: f64,
    pub multiplier: f64,
    pub source_mass: f64,
    pub swept_mass: f64,
    pub mass_cap_active: bool,
    pub iterations: usize,
    pub active_set_size: usize,
    pub jitter: f64,
}

/// Equilibrium measure of a region and its capacity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub region_label: String,
    pub gamma: DiscreteMeasure,
    pub capacity: f64,
    pub mass: f64,
    pub energy: f64,
    pub min_potential_on_region: f64,
    pub max_potential_on_support: f64,
    pub iterations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn unit_atom() {
        let m = make_measure(vec![p(&[0.0, 0.0, 0.0])], vec![1.0]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.total_mass(), 1.0);
    }

    #[test]
    fn duplicate_atoms_merge() {
        let m = make_measure(vec![p(&[0.0; 3]), p(&[0.0; 3])], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weights(), &[1.0]);
    }

    #[test]
    fn negative_weight_rejected() {
        let err = make_measure(vec![p(&[1.0, 0.0, 0.0])], vec![-1.0]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let err = make_measure(vec![p(&[0.0; 3]), p(&[0.0; 4])], vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn zero_weights_are_kept_but_not_support() {
        let m = make_measure(vec![p(&[0.0; 3]), p(&[1.0, 0.0, 0.0])], vec![0.0, 2.0]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.support(), vec![1]);
    }

    #[test]
    fn non_finite_coordinate_rejected() {
        assert!(Point::new(vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn subset_examples() {
        let q = Region::new(vec![p(&[0.0; 3]), p(&[1.0, 0.0, 0.0])], "q").unwrap();
        let b = Region::new(vec![p(&[0.0; 3])], "b").unwrap();
        let far = Region::new(vec![p(&[2.0, 0.0, 0.0])], "far").unwrap();
        assert!(region_subset(&b, &q).unwrap());
        assert!(region_subset(&q, &q).unwrap());
        assert!(!region_subset(&far, &b).unwrap());
        assert!(region_subset(&Region::empty("e"), &b).unwrap());
    }

    #[test]
    fn subset_dimension_mismatch() {
        let a = Region::new(vec![p(&[0.0; 3])], "a").unwrap();
        let b = Region::new(vec![p(&[0.0; 4])], "b").unwrap();
        assert!(region_subset(&a, &b).is_err());
    }

    #[test]
    fn region_rejects_duplicates_and_implicit_empty() {
        assert!(Region::new(vec![p(&[0.0; 3]), p(&[0.0; 3])], "d").is_err());
        assert!(Region::new(Vec::new(), "e").is_err());
    }

    #[test]
    fn negative_zero_is_a_distinct_point() {
        assert_ne!(p(&[0.0, 0.0, 0.0]), p(&[-0.0, 0.0, 0.0]));
    }

    #[test]
    fn json_field_names() {
        let m = make_measure(vec![p(&[1.0, 2.0, 3.0])], vec![0.25]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"points":[[1.0,2.0,3.0]],"weights":[0.25]}"#);
        let r = Region::new(vec![p(&[1.0, 2.0, 3.0])], "a").unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"points":[[1.0,2.0,3.0]],"label":"a"}"#);
        let bad: std::result::Result<DiscreteMeasure, _> =
            serde_json::from_str(r#"{"points":[[0,0,0]],"weights":[-1]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn min_spacing_brute_force() {
        let r = Region::new(
            vec![p(&[0.0; 3]), p(&[3.0, 0.0, 0.0]), p(&[0.0, 0.5, 0.0])],
            "r",
        )
        .unwrap();
        assert_eq!(r.min_spacing(), Some(0.5));
    }
}
