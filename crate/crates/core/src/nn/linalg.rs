//! One-sided (Hestenes) Jacobi SVD.

use super::{NnError, Tensor};

/// Thin SVD `A = U·diag(sigma)·Vᵀ` with `k = min(m, n)` singular values in
/// descending order; `U` is `m×k`, `V` is `n×k`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Tensor,
    pub sigma: Vec<f64>,
    pub v: Tensor,
}

const MAX_SWEEPS: usize = 80;

pub fn svd(a: &Tensor) -> Result<Svd, NnError> {
    if a.rank() != 2 {
        return Err(NnError::Shape(format!(
            "svd needs a matrix, got {:?}",
            a.shape()
        )));
    }
    if !a.is_finite() {
        return Err(NnError::NonFinite("svd input".into()));
    }
    if a.rows() < a.cols() {
        let Svd { u, sigma, v } = svd_tall(&a.transpose());
        return Ok(Svd { u: v, sigma, v: u });
    }
    Ok(svd_tall(a))
}

/// Requires `m ≥ n`. Orthogonalizes the columns of `A` by plane rotations
/// accumulated into `V`; the column norms are then the singular values.
fn svd_tall(a: &Tensor) -> Svd {
    let (m, n) = (a.rows(), a.cols());
    // Column-major working copies keep each rotation on contiguous memory.
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| a.get(i, j)).collect())
        .collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = 0.0;
                    for i in 0..m {
                        al += cp[i] * cp[i];
                        be += cq[i] * cq[i];
                        ga += cp[i] * cq[i];
                    }
                    (al, be, ga)
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (c.iter().map(|v| v * v).sum::<f64>().sqrt(), j))
        .collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    let sigma: Vec<f64> = order.iter().map(|&(s, _)| s).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let tiny = smax * m.max(n) as f64 * f64::EPSILON;
    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &(s, j)) in order.iter().enumerate() {
        if s > tiny && s > 0.0 {
            ucols.push(cols[j].iter().map(|v| v / s).collect());
        } else {
            ucols.push(vec![0.0; m]);
            missing.push(k);
        }
    }
    complete_orthonormal(&mut ucols, &missing);

    let mut u = Tensor::zeros(&[m, n]);
    let mut v = Tensor::zeros(&[n, n]);
    for (k, &(_, j)) in order.iter().enumerate() {
        for i in 0..m {
            u.set(i, k, ucols[k][i]);
        }
        for i in 0..n {
            v.set(i, k, vcols[j][i]);
        }
    }
    Svd { u, sigma, v }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the columns listed in `missing` with unit vectors orthogonal to all
/// others (Gram-Schmidt against the standard basis).
fn complete_orthonormal(cols: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let m = cols[0].len();
    let mut candidate = 0;
    for &k in missing {
        loop {
            let mut e = vec![0.0; m];
            e[candidate % m] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (j, other) in cols.iter().enumerate() {
                    if j == k {
                        continue;
                    }
                    let d: f64 = e.iter().zip(other).map(|(a, b)| a * b).sum();
                    for (x, o) in e.iter_mut().zip(other) {
                        *x -= d * o;
                    }
                }
            }
            let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-6 {
                cols[k] = e.into_iter().map(|v| v / norm).collect();
                break;
            }
            if candidate > 2 * m {
                unreachable!("a complement direction always exists when k ≤ m");
            }
        }
    }
}
