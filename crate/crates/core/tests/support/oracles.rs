// Independent reference computations shared by the integration and
// acceptance tests. Nothing here calls into the library's numerical paths.
#![allow(dead_code)]

/// Symmetric eigenvalues by the cyclic two-sided Jacobi method, descending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// `AᵀA` by explicit triple loop.
pub fn gram_columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows[0].len();
    let mut g = vec![vec![0.0; n]; n];
    for r in rows {
        for i in 0..n {
            for j in 0..n {
                g[i][j] += r[i] * r[j];
            }
        }
    }
    g
}

/// Participation ratio and condition number from eigenvalues of `ZᵀZ`
/// (clamped at zero), restricted to the `min(B, d)` leading ones.
pub fn spectrum_from_eigs(eigs: &[f64], k: usize) -> (f64, f64) {
    let lam: Vec<f64> = eigs.iter().take(k).map(|&l| l.max(0.0)).collect();
    let s: f64 = lam.iter().sum();
    let s2: f64 = lam.iter().map(|l| l * l).sum();
    let kappa = (lam[0] / lam[k - 1]).sqrt();
    (s * s / s2, kappa)
}

/// Symmetric Chamfer distance by the O(N·M) double loop, squared distances,
/// mean per direction.
pub fn brute_chamfer(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let d2 = |p: &[f64; 3], q: &[f64; 3]| (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>();
    let dir = |x: &[[f64; 3]], y: &[[f64; 3]]| {
        let mut total = 0.0;
        for p in x {
            let mut best = f64::INFINITY;
            for q in y {
                best = best.min(d2(p, q));
            }
            total += best;
        }
        total / x.len() as f64
    };
    dir(a, b) + dir(b, a)
}

/// Exact GELU `x·Φ(x)` with Φ from `erfc_ref` below.
pub fn gelu_ref(x: f64) -> f64 {
    x * 0.5 * erfc_ref(-x / std::f64::consts::SQRT_2)
}

/// erfc via continued fraction for |x| ≥ 2 and Taylor series otherwise.
pub fn erfc_ref(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc_ref(-x);
    }
    if x < 2.0 {
        // erf Taylor series: 2/√π Σ (−1)^n x^(2n+1) / (n! (2n+1))
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x * x / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // Lentz evaluation of erfc(x) = exp(−x²)/√π · 1/(x + 1/2/(x + 1/(x + 3/2/(x + ...))))
        let mut f = x;
        let tiny = 1e-300;
        let mut c = f;
        let mut d = 0.0;
        for k in 1..500 {
            let a = k as f64 / 2.0;
            d = x + a * d;
            d = if d.abs() < tiny { tiny } else { d };
            c = x + a / c;
            c = if c.abs() < tiny { tiny } else { c };
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x * x).exp() / std::f64::consts::PI.sqrt() / f
    }
}

/// Scalar Newton-Schulz quintic iterated `steps` times from each start value
/// on a fine grid over `[lo, 1]`; returns the (min, max) of the images.
pub fn quintic_range(lo: f64, steps: usize) -> (f64, f64) {
    let (a, b, c) = (3.4445, -4.7750, 2.0315);
    let mut mn = f64::INFINITY;
    let mut mx = f64::NEG_INFINITY;
    let n = 200_000;
    for i in 0..=n {
        let mut x = lo + (1.0 - lo) * i as f64 / n as f64;
        for _ in 0..steps {
            x = a * x + b * x.powi(3) + c * x.powi(5);
        }
        mn = mn.min(x);
        mx = mx.max(x);
    }
    (mn, mx)
}

/// Max relative error with an absolute floor so near-zero entries do not
/// dominate: |a − n| / max(|a|, |n|, floor).
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
