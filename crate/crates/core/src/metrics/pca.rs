use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const JACOBI_SWEEPS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub coords: Vec<[f64; 2]>,
    /// Variance captured by each component (covariance eigenvalues).
    pub explained: [f64; 2],
    /// Unit principal directions, one row per component.
    pub components: [Vec<f64>; 2],
    pub mean: Vec<f64>,
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with eigenvectors as columns of `vecs`
/// (row-major `n×n`).
pub fn symmetric_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != n * n {
        return invalid(format!("eigen input has {} values, expected {n}x{n}", a.len()));
    }
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let vals = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for r in 0..n {
            vecs[r * n + col] = v[r * n + src];
        }
    }
    Ok((vals, vecs))
}

/// Flip `v` so its first entry with magnitude above `tol` is positive.
fn fix_sign(v: &mut [f64], tol: f64) {
    if let Some(&x) = v.iter().find(|x| x.abs() > tol) {
        if x < 0.0 {
            v.iter_mut().for_each(|y| *y = -*y);
        }
    }
}

/// Project rows onto the top two principal directions of their covariance.
pub fn pca_project(rows: &[Vec<f64>]) -> Result<Projection> {
    let n = rows.len();
    if n < 2 {
        return invalid(format!("pca needs at least 2 rows, got {n}"));
    }
    let d = rows[0].len();
    if d < 2 {
        return invalid(format!("pca needs at least 2 columns, got {d}"));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return invalid(format!("ragged pca input: row of width {} vs {d}", r.len()));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return invalid("pca input contains non-finite values");
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    let mut cov = vec![0.0; d * d];
    for r in &centered {
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += r[i] * r[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= denom;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    if trace <= 0.0 {
        return Ok(Projection {
            coords: vec![[0.0; 2]; n],
            explained: [0.0; 2],
            components: [vec![0.0; d], vec![0.0; d]],
            mean,
        });
    }
    let (vals, vecs) = symmetric_eigen(&cov, d)?;
    let tol = 1e-12 * trace.sqrt();
    let mut components: [Vec<f64>; 2] = [vec![0.0; d], vec![0.0; d]];
    let mut explained = [0.0; 2];
    for k in 0..2 {
        // Components with negligible variance project to exactly zero.
        if vals[k] > 1e-12 * trace {
            explained[k] = vals[k];
            components[k] = (0..d).map(|r| vecs[r * d + k]).collect();
            fix_sign(&mut components[k], tol);
        }
    }
    let coords = centered
        .iter()
        .map(|r| {
            let dot = |c: &Vec<f64>| r.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [dot(&components[0]), dot(&components[1])]
        })
        .collect();
    Ok(Projection { coords, explained, components, mean })
}

/// Centroid of the rows of `coords` whose label equals `label`.
pub fn centroid<L: PartialEq>(coords: &[[f64; 2]], labels: &[L], label: &L) -> Option<[f64; 2]> {
    let mut acc = [0.0; 2];
    let mut k = 0usize;
    for (c, l) in coords.iter().zip(labels) {
        if l == label {
            acc[0] += c[0];
            acc[1] += c[1];
            k += 1;
        }
    }
    (k > 0).then(|| [acc[0] / k as f64, acc[1] / k as f64])
}
