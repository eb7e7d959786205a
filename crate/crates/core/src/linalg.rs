//! Dense row-major matrices and Cholesky factorizations.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub(crate) fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `M x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `yᵀ M x`
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        assert_eq!(y.len(), self.rows);
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .filter(|&i| y[i] != 0.0)
            .map(|i| y[i] * dot(self.row(i), x))
            .sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs_diag(&self) -> f64 {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..i).all(|j| self.get(i, j).to_bits() == self.get(j, i).to_bits())
            })
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative jitter ladder: each rung adds `δ · trace / size` to the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct JitterPolicy {
    pub ladder: Vec<f64>,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            ladder: vec![0.0, 1e-12, 1e-10, 1e-8],
        }
    }
}

impl JitterPolicy {
    pub fn none() -> Self {
        JitterPolicy { ladder: vec![0.0] }
    }
}

/// Lower Cholesky factor `L` with `K + jitter·I = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct GramFactor {
    n: usize,
    /// Packed lower triangle, row `i` holds `L[i][0..=i]`.
    lower: Vec<f64>,
    /// Absolute amount added to the diagonal.
    pub jitter: f64,
    /// Ladder rung that succeeded.
    pub relative_jitter: f64,
    /// Smallest squared pivot `L[i][i]²`.
    pub min_pivot: f64,
}

impl GramFactor {
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.lower[start..start + i + 1]
    }

    pub fn l(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.row(i)[j]
        }
    }

    /// Solves `(K + jitter·I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = b.to_vec();
        for i in 0..self.n {
            let r = self.row(i);
            y[i] = (y[i] - dot(&r[..i], &y[..i])) / r[i];
        }
        for i in (0..self.n).rev() {
            y[i] /= self.row(i)[i];
            let yi = y[i];
            let r = self.row(i);
            for j in 0..i {
                y[j] -= r[j] * yi;
            }
        }
        y
    }
}

/// Cholesky factorization of a symmetric matrix, escalating diagonal jitter
/// through `policy.ladder` until every pivot is acceptable.
///
/// A pivot is acceptable when it clears the round-off floor
/// `16·n·ε_mach·max|Kᵢᵢ|` and is at least ten times the jitter applied, so
/// jitter can repair round-off but cannot manufacture rank.
pub fn factor_gram(gram: &Matrix, policy: &JitterPolicy) -> Result<GramFactor> {
    if !gram.is_square() {
        return Err(Error::Validation(format!(
            "gram matrix is {}x{}",
            gram.rows(),
            gram.cols()
        )));
    }
    if gram.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InfiniteKernel);
    }
    if !gram.is_symmetric() {
        return Err(Error::Validation("gram matrix is not symmetric".into()));
    }
    let n = gram.rows();
    if n == 0 {
        return Ok(GramFactor {
            n,
            lower: Vec::new(),
            jitter: 0.0,
            relative_jitter: 0.0,
            min_pivot: f64::INFINITY,
        });
    }
    let scale = gram.trace() / n as f64;
    let floor = 16.0 * n as f64 * f64::EPSILON * gram.max_abs_diag();
    let mut smallest = f64::NAN;
    for &delta in &policy.ladder {
        let jitter = delta * scale;
        match try_cholesky(gram, jitter, floor.max(10.0 * jitter)) {
            Ok((lower, min_pivot)) => {
                if delta > 0.0 {
                    log::warn!("gram factorization needed relative jitter {delta:e}");
                }
                return Ok(GramFactor {
                    n,
                    lower,
                    jitter,
                    relative_jitter: delta,
                    min_pivot,
                });
            }
            Err(pivot) => smallest = pivot,
        }
    }
    Err(Error::NotPositiveDefinite {
        smallest_pivot: smallest,
    })
}

/// Returns the packed factor and smallest pivot, or the offending pivot.
fn try_cholesky(gram: &Matrix, jitter: f64, floor: f64) -> std::result::Result<(Vec<f64>, f64), f64> {
    let n = gram.rows();
    let mut lower = vec![0.0; n * (n + 1) / 2];
    let mut min_pivot = f64::INFINITY;
    for i in 0..n {
        let ri = i * (i + 1) / 2;
        for j in 0..=i {
            let rj = j * (j + 1) / 2;
            let s = dot(&lower[ri..ri + j], &lower[rj..rj + j]);
            if i == j {
                let pivot = gram.get(i, i) + jitter - s;
                if !(pivot > floor) {
                    return Err(pivot);
                }
                min_pivot = min_pivot.min(pivot);
                lower[ri + i] = pivot.sqrt();
            } else {
                lower[ri + j] = (gram.get(i, j) - s) / lower[rj + j];
            }
        }
    }
    Ok((lower, min_pivot))
}

/// Cholesky factor of a principal submatrix `K[P, P]` that supports
/// appending and deleting indices of `P` in `O(|P|²)`.
#[derive(Clone, Debug, Default)]
pub(crate) struct IncrementalCholesky {
    /// Row `i` holds `L[i][0..=i]`.
    rows: Vec<Vec<f64>>,
}

impl IncrementalCholesky {
    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Appends an index whose column restricted to the current set is
    /// `cross` and whose diagonal entry is `diag`. Returns the new pivot on
    /// failure.
    pub fn push(&mut self, cross: &[f64], diag: f64) -> std::result::Result<(), f64> {
        let m = self.rows.len();
        debug_assert_eq!(cross.len(), m);
        let mut row = cross.to_vec();
        for i in 0..m {
            let r = &self.rows[i];
            row[i] = (row[i] - dot(&r[..i], &row[..i])) / r[i];
        }
        let pivot = diag - dot(&row, &row);
        if !(pivot > 0.0) {
            return Err(pivot);
        }
        row.push(pivot.sqrt());
        self.rows.push(row);
        Ok(())
    }

    /// Removes position `k` and restores triangularity with Givens rotations.
    pub fn remove(&mut self, k: usize) {
        self.rows.remove(k);
        let m = self.rows.len();
        for j in k..m {
            let a = self.rows[j][j];
            let b = self.rows[j][j + 1];
            let r = a.hypot(b);
            let (c, s) = (a / r, b / r);
            for i in j..m {
                let x = self.rows[i][j];
                let y = self.rows[i][j + 1];
                self.rows[i][j] = c * x + s * y;
                self.rows[i][j + 1] = -s * x + c * y;
            }
            self.rows[j].pop();
            if self.rows[j][j] < 0.0 {
                for i in j..m {
                    self.rows[i][j] = -self.rows[i][j];
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = self.rows.len();
        debug_assert_eq!(b.len(), m);
        let mut y = b.to_vec();
        for i in 0..m {
            let r = &self.rows[i];
            y[i] = (y[i] - dot(&r[..i], &y[..i])) / r[i];
        }
        for i in (0..m).rev() {
            y[i] /= self.rows[i][i];
            let yi = y[i];
            let r = &self.rows[i];
            for j in 0..i {
                y[j] -= r[j] * yi;
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reconstruct(f: &GramFactor) -> Matrix {
        let n = f.size();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| f.l(i, k) * f.l(j, k)).sum();
                m.set(i, j, s);
            }
        }
        m
    }

    #[test]
    fn one_by_one() {
        let f = factor_gram(&Matrix::from_rows(&[vec![2.0]]), &JitterPolicy::default()).unwrap();
        assert_relative_eq!(f.l(0, 0), 2f64.sqrt(), max_relative = 1e-15);
        assert_eq!(f.jitter, 0.0);
    }

    #[test]
    fn two_by_two_separated_points() {
        // Two atoms at distance 3 with epsilon 0.5: diagonal 2, off-diagonal
        // (9.25)^(-1/2); eigenvalues 2 ± 0.32879797 from the 2x2 formula.
        let k = 0.3287979746107146;
        let g = Matrix::from_rows(&[vec![2.0, k], vec![k, 2.0]]);
        let f = factor_gram(&g, &JitterPolicy::default()).unwrap();
        assert_eq!(f.jitter, 0.0);
        assert!(f.min_pivot > 0.0);
        // The product of pivots equals the determinant (2-k)(2+k).
        let det = f.l(0, 0).powi(2) * f.l(1, 1).powi(2);
        assert_relative_eq!(det, 1.6712020253892854 * 2.3287979746107146, max_relative = 1e-14);
        let r = reconstruct(&f);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(r.get(i, j), g.get(i, j), max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn duplicated_row_is_hard_error() {
        let g = Matrix::from_rows(&[
            vec![2.0, 2.0, 0.5],
            vec![2.0, 2.0, 0.5],
            vec![0.5, 0.5, 2.0],
        ]);
        let err = factor_gram(&g, &JitterPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn asymmetric_rejected() {
        let g = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.5, 2.0]]);
        assert!(factor_gram(&g, &JitterPolicy::default()).is_err());
    }

    #[test]
    fn jitter_cannot_manufacture_rank() {
        // Smallest eigenvalue is -1e-13, so rung 0 fails.
        let e = 1e-13;
        let g = Matrix::from_rows(&[vec![1.0, 1.0 + e], vec![1.0 + e, 1.0]]);
        let f = factor_gram(&g, &JitterPolicy::default());
        // 1e-12 · trace/n = 1e-12 > 10·|λmin| fails the pivot/jitter ratio,
        // while 1e-10 and 1e-8 give pivots ≈ 2·jitter: rank cannot be
        // manufactured, so this must still be rejected.
        assert!(f.is_err());
        let g = Matrix::from_rows(&[vec![1.0, 0.5 + e], vec![0.5 + e, 1.0]]);
        assert_eq!(factor_gram(&g, &JitterPolicy::default()).unwrap().jitter, 0.0);
    }

    #[test]
    fn solve_matches_matrix() {
        let g = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.25],
            vec![0.5, 0.25, 2.0],
        ]);
        let f = factor_gram(&g, &JitterPolicy::none()).unwrap();
        let x = f.solve(&[1.0, 2.0, 3.0]);
        let b = g.mul_vec(&x);
        for (bi, ei) in b.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(*bi, ei, max_relative = 1e-14);
        }
    }

    #[test]
    fn incremental_push_and_remove() {
        let g = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5, 0.2],
            vec![1.0, 3.0, 0.25, 0.1],
            vec![0.5, 0.25, 2.0, 0.3],
            vec![0.2, 0.1, 0.3, 5.0],
        ]);
        let mut inc = IncrementalCholesky::default();
        let order = [2usize, 0, 3, 1];
        for (m, &i) in order.iter().enumerate() {
            let cross: Vec<f64> = order[..m].iter().map(|&j| g.get(j, i)).collect();
            inc.push(&cross, g.get(i, i)).unwrap();
        }
        inc.remove(1); // drop index 0
        let kept = [2usize, 3, 1];
        let b = [1.0, -2.0, 0.5];
        let x = inc.solve(&b);
        for (r, &i) in kept.iter().enumerate() {
            let s: f64 = kept.iter().zip(&x).map(|(&j, xj)| g.get(i, j) * xj).sum();
            assert_relative_eq!(s, b[r], max_relative = 1e-13, epsilon = 1e-14);
        }
        inc.remove(2); // only index 3 remains, K = [5]
        inc.remove(0);
        assert_eq!(inc.len(), 1);
        assert_relative_eq!(inc.solve(&[3.0])[0], 0.6, max_relative = 1e-14);
    }
}
