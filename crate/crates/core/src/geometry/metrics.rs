//! Chamfer distance and a k-NN structural similarity.
//!
//! Neighbor search is exhaustive; clouds in this crate stay in the low
//! thousands of points.
//!
//! `pointsim(a, b, k)` is defined as follows. For every point `p` of a cloud
//! `X`, its feature `f_X(p)` is the population variance of the Euclidean
//! distances from `p` to its `k` nearest points of `X` (the point itself
//! included, so one distance is 0). For a point `p ∈ A` with nearest point
//! `q ∈ B`, the local similarity is `1 − |f_A(p) − f_B(q)| / max(f_A(p), f_B(q))`
//! (1 when both features are 0). `S(A→B)` averages this over `A`, and
//! `pointsim(a, b, k) = (S(A→B) + S(B→A)) / 2`, which lies in `[0, 1]`.

use super::{GeometryError, PointCloud};

struct Soa {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

impl Soa {
    fn new(pc: &PointCloud) -> Self {
        let p = pc.points();
        Self {
            x: p.iter().map(|v| v[0]).collect(),
            y: p.iter().map(|v| v[1]).collect(),
            z: p.iter().map(|v| v[2]).collect(),
        }
    }
}

/// For each point of `a`: index of and squared distance to its nearest point
/// in `b`. Ties go to the lowest index.
pub fn nearest_neighbors(a: &PointCloud, b: &PointCloud) -> Vec<(usize, f64)> {
    let soa = Soa::new(b);
    a.points()
        .iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for j in 0..soa.x.len() {
                let dx = p[0] - soa.x[j];
                let dy = p[1] - soa.y[j];
                let dz = p[2] - soa.z[j];
                let d = dx * dx + dy * dy + dz * dz;
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .collect()
}

/// Mean squared nearest-neighbor distance from `a` to `b` plus the same from
/// `b` to `a`.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
    let ab: f64 = nearest_neighbors(a, b).iter().map(|&(_, d)| d).sum::<f64>() / a.len() as f64;
    let ba: f64 = nearest_neighbors(b, a).iter().map(|&(_, d)| d).sum::<f64>() / b.len() as f64;
    ab + ba
}

/// Per-point variance of the distances to the `k` nearest points (self
/// included).
pub fn knn_spread(pc: &PointCloud, k: usize) -> Result<Vec<f64>, GeometryError> {
    if k < 2 || k > pc.len() {
        return Err(GeometryError::Invalid(format!(
            "k = {k} outside [2, {}]",
            pc.len()
        )));
    }
    let soa = Soa::new(pc);
    let mut dists = vec![0.0; pc.len()];
    Ok(pc
        .points()
        .iter()
        .map(|p| {
            for j in 0..soa.x.len() {
                let dx = p[0] - soa.x[j];
                let dy = p[1] - soa.y[j];
                let dz = p[2] - soa.z[j];
                dists[j] = (dx * dx + dy * dy + dz * dz).sqrt();
            }
            dists.select_nth_unstable_by(k - 1, f64::total_cmp);
            let near = &mut dists[..k];
            near.sort_by(f64::total_cmp);
            let mean = near.iter().sum::<f64>() / k as f64;
            near.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / k as f64
        })
        .collect())
}

fn directed_similarity(fa: &[f64], fb: &[f64], nn: &[(usize, f64)]) -> f64 {
    let total: f64 = fa
        .iter()
        .zip(nn)
        .map(|(&u, &(j, _))| {
            let v = fb[j];
            let m = u.max(v);
            if m == 0.0 {
                1.0
            } else {
                1.0 - (u - v).abs() / m
            }
        })
        .sum();
    total / fa.len() as f64
}

/// Symmetric structural similarity in `[0, 1]`; see the module docs for the
/// exact definition.
pub fn pointsim(a: &PointCloud, b: &PointCloud, k: usize) -> Result<f64, GeometryError> {
    let fa = knn_spread(a, k)?;
    let fb = knn_spread(b, k)?;
    let ab = directed_similarity(&fa, &fb, &nearest_neighbors(a, b));
    let ba = directed_similarity(&fb, &fa, &nearest_neighbors(b, a));
    Ok(0.5 * (ab + ba))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chamfer_of_two_single_points() {
        let a = PointCloud::new(vec![[0.0; 3]]).unwrap();
        let b = PointCloud::new(vec![[1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(chamfer(&a, &b), 2.0);
        assert_eq!(chamfer(&a, &a), 0.0);
    }

    #[test]
    fn pointsim_rejects_bad_k() {
        let a = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert!(pointsim(&a, &a, 1).is_err());
        assert!(pointsim(&a, &a, 4).is_err());
        assert_eq!(pointsim(&a, &a, 3).unwrap(), 1.0);
    }
}
