//! Deterministic point clouds used by scenarios and tests.

use crate::error::{Error, Result};
use crate::types::Point;

/// `count` nearly uniform points on the sphere of `radius` about `center`
/// (golden-angle spiral).
pub fn fibonacci_sphere(count: usize, radius: f64, center: [f64; 3]) -> Result<Vec<Point>> {
    if count == 0 || !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Validation(format!(
            "sphere grid needs count > 0 and a positive radius, got {count} and {radius}"
        )));
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let theta = golden * i as f64;
            Point::new(vec![
                center[0] + radius * rho * theta.cos(),
                center[1] + radius * rho * theta.sin(),
                center[2] + radius * z,
            ])
        })
        .collect()
}

/// Cubic lattice points of the given spacing inside the closed ball.
pub fn ball_grid(radius: f64, spacing: f64) -> Result<Vec<Point>> {
    if !(radius > 0.0 && spacing > 0.0 && radius.is_finite()) {
        return Err(Error::Validation("ball grid needs positive radius and spacing".into()));
    }
    let m = (radius / spacing).floor() as i64;
    let mut out = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            for k in -m..=m {
                let c = [i as f64 * spacing, j as f64 * spacing, k as f64 * spacing];
                if c.iter().map(|v| v * v).sum::<f64>() <= radius * radius * (1.0 + 1e-12) {
                    out.push(Point::new(c.to_vec())?);
                }
            }
        }
    }
    Ok(out)
}

/// Regular grid with `counts[d]` points along axis `d` spanning `[lo[d], hi[d]]`.
pub fn box_grid(lo: &[f64], hi: &[f64], counts: &[usize]) -> Result<Vec<Point>> {
    if lo.len() != hi.len() || lo.len() != counts.len() || lo.is_empty() {
        return Err(Error::Validation("box grid bounds and counts must have equal, nonzero length".into()));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::Validation("box grid counts must be positive".into()));
    }
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; counts.len()];
    for _ in 0..total {
        let coords = idx
            .iter()
            .enumerate()
            .map(|(d, &i)| {
                if counts[d] == 1 {
                    0.5 * (lo[d] + hi[d])
                } else {
                    lo[d] + (hi[d] - lo[d]) * i as f64 / (counts[d] - 1) as f64
                }
            })
            .collect();
        out.push(Point::new(coords)?);
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(out)
}
