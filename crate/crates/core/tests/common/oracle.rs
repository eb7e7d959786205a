//! Brute-force reference for `min ½wᵀKw − bᵀw, w ≥ 0 [, Σw ≤ cap]`.
//!
//! Every subset S of coordinates is tried as the support: the equality
//! system on S (with or without the cap as an equality) is solved by
//! Gaussian elimination, feasible candidates are kept, and the one with the
//! smallest objective wins. Nothing here shares code with the library.

#![allow(dead_code)]

/// Solves `a x = rhs` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (rhs[i] - s) / a[i][i];
    }
    Some(x)
}

pub fn objective(k: &[Vec<f64>], b: &[f64], w: &[f64]) -> f64 {
    let n = b.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += w[i] * k[i][j] * w[j];
        }
    }
    0.5 * q - b.iter().zip(w).map(|(x, y)| x * y).sum::<f64>()
}

/// `sqrt((x−y)ᵀ K (x−y))`.
pub fn k_distance(k: &[Vec<f64>], x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut q = 0.0;
    for i in 0..d.len() {
        for j in 0..d.len() {
            q += d[i] * k[i][j] * d[j];
        }
    }
    q.max(0.0).sqrt()
}

pub fn enumerate(k: &[Vec<f64>], b: &[f64], cap: Option<f64>) -> Vec<f64> {
    let n = b.len();
    let feas = 1e-12;
    let mut best = vec![0.0; n];
    let mut best_obj = 0.0;
    for mask in 1u32..(1u32 << n) {
        let s: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let m = s.len();
        let mut candidates = Vec::new();
        let a: Vec<Vec<f64>> = s.iter().map(|&i| s.iter().map(|&j| k[i][j]).collect()).collect();
        let rhs: Vec<f64> = s.iter().map(|&i| b[i]).collect();
        if let Some(x) = gauss_solve(a.clone(), rhs.clone()) {
            candidates.push(x);
        }
        if let Some(c) = cap {
            let mut aug = a.clone();
            for r in aug.iter_mut() {
                r.push(1.0);
            }
            let mut last = vec![1.0; m];
            last.push(0.0);
            aug.push(last);
            let mut r2 = rhs.clone();
            r2.push(c);
            if let Some(mut x) = gauss_solve(aug, r2) {
                x.truncate(m);
                candidates.push(x);
            }
        }
        for x in candidates {
            if x.iter().any(|&v| v < -feas) {
                continue;
            }
            let total: f64 = x.iter().sum();
            if let Some(c) = cap {
                if total > c * (1.0 + 1e-12) + feas {
                    continue;
                }
            }
            let mut w = vec![0.0; n];
            for (pos, &i) in s.iter().enumerate() {
                w[i] = x[pos].max(0.0);
            }
            let obj = objective(k, b, &w);
            if obj < best_obj {
                best_obj = obj;
                best = w;
            }
        }
    }
    best
}
