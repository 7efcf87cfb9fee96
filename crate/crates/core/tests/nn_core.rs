#[path = "support/oracles.rs"]
mod oracles;

use oracles::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use squeeze3d::nn::*;

fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(
        r,
        c,
        (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// Loss `Σ w ⊙ net(x)` with a fixed random weighting; returns
/// (max relative error over parameters, over input).
fn fd_check(net: &mut Network, x: &Tensor, w: &Tensor, seed: u64) -> (f64, f64) {
    let h = 1e-5;
    let loss = |net: &Network, x: &Tensor| -> f64 {
        let (y, _) = net.forward(x, Mode::Train, seed).unwrap();
        y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
    };
    let (_, cache) = net.forward(x, Mode::Train, seed).unwrap();
    let (grads, gx) = net.backward(&cache, w).unwrap();
    let analytic: Vec<f64> = grads
        .flat()
        .iter()
        .flat_map(|t| t.data().to_vec())
        .collect();

    let mut numeric = Vec::with_capacity(analytic.len());
    let n_tensors = net.params().len();
    for t in 0..n_tensors {
        let len = net.params()[t].len();
        for j in 0..len {
            let orig = net.params()[t].data()[j];
            net.params_mut()[t].data_mut()[j] = orig + h;
            let lp = loss(net, x);
            net.params_mut()[t].data_mut()[j] = orig - h;
            let lm = loss(net, x);
            net.params_mut()[t].data_mut()[j] = orig;
            numeric.push((lp - lm) / (2.0 * h));
        }
    }
    let mut num_x = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[j] += h;
        let mut xm = x.clone();
        xm.data_mut()[j] -= h;
        num_x.push((loss(net, &xp) - loss(net, &xm)) / (2.0 * h));
    }
    (
        max_rel_err(&analytic, &numeric, 1e-3),
        max_rel_err(gx.data(), &num_x, 1e-3),
    )
}

#[test]
fn gelu_at_zero_and_identity_linear() {
    assert_eq!(gelu(0.0), 0.0);
    let layer = Layer {
        spec: LayerSpec::linear(3, 3),
        params: vec![Tensor::identity(3), Tensor::zeros(&[3])],
    };
    let net = Network::from_layers(vec![layer]).unwrap();
    let x = Tensor::matrix(2, 3, vec![0.5, -1.0, 2.0, 3.0, 0.0, -0.25]).unwrap();
    assert_eq!(net.predict(&x).unwrap(), x);
}

#[test]
fn gelu_matches_independent_erfc() {
    for i in -60..=60 {
        let x = i as f64 / 10.0;
        assert!((gelu(x) - gelu_ref(x)).abs() < 1e-14, "x={x}");
    }
}

#[test]
fn two_layer_forward_matches_straight_line_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let specs = vec![
        LayerSpec::linear(4, 5),
        LayerSpec::gelu(5),
        LayerSpec::linear(5, 2),
    ];
    let net = Network::new(specs, &mut rng).unwrap();
    let x = random_matrix(&mut rng, 3, 4);
    let y = net.predict(&x).unwrap();

    let p = net.params();
    let (w1, b1, w2, b2) = (p[0].data(), p[1].data(), p[2].data(), p[3].data());
    for r in 0..3 {
        let mut hidden = [0.0; 5];
        for o in 0..5 {
            let mut acc = b1[o];
            for i in 0..4 {
                acc += w1[o * 4 + i] * x.get(r, i);
            }
            hidden[o] = gelu_ref(acc);
        }
        for o in 0..2 {
            let mut acc = b2[o];
            for i in 0..5 {
                acc += w2[o * 5 + i] * hidden[i];
            }
            assert!((acc - y.get(r, o)).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let specs = vec![
        LayerSpec::linear(3, 4),
        LayerSpec::layernorm(4),
        LayerSpec::gelu(4),
        LayerSpec::linear(4, 2),
    ];
    let net = Network::new(specs, &mut rng).unwrap();
    let x = random_matrix(&mut rng, 5, 3);
    let (_, cache) = net.forward(&x, Mode::Train, 0).unwrap();
    let (grads, gx) = net.backward(&cache, &Tensor::zeros(&[5, 2])).unwrap();
    assert!(grads.all_zero());
    assert!(gx.data().iter().all(|&v| v == 0.0));
}

#[test]
fn linear_sum_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = Network::new(vec![LayerSpec::linear(6, 4)], &mut rng).unwrap();
    let x = random_matrix(&mut rng, 3, 6);
    let ones = Tensor::matrix(3, 4, vec![1.0; 12]).unwrap();
    let (ep, ex) = fd_check(&mut net, &x, &ones, 0);
    assert!(ep < 1e-6 && ex < 1e-6, "param {ep:e} input {ex:e}");
}

#[test]
fn layernorm_gradient_on_four_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut net = Network::new(vec![LayerSpec::layernorm(4)], &mut rng).unwrap();
    for p in net.params_mut() {
        for v in p.data_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
    }
    let x = Tensor::matrix(1, 4, vec![0.3, -1.2, 2.5, 0.7]).unwrap();
    let w = random_matrix(&mut rng, 1, 4);
    let (ep, ex) = fd_check(&mut net, &x, &w, 0);
    assert!(ep < 1e-6 && ex < 1e-6, "param {ep:e} input {ex:e}");
}

fn random_net(rng: &mut impl Rng) -> Network {
    let d_in = rng.random_range(2..6);
    let h = rng.random_range(2..7);
    let d_out = rng.random_range(1..5);
    let rate = rng.random_range(0.0..0.5);
    let specs = vec![
        LayerSpec::linear(d_in, h),
        LayerSpec::layernorm(h),
        LayerSpec::gelu(h),
        LayerSpec::dropout(h, rate),
        LayerSpec::linear(h, h),
        LayerSpec::residual(h, 1),
        LayerSpec::gelu(h),
        LayerSpec::linear(h, d_out),
    ];
    let mut net = Network::new(specs, rng).unwrap();
    for p in net.params_mut() {
        for v in p.data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    net
}

#[test]
fn every_layer_kind_passes_gradient_check_on_random_nets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..100 {
        let mut net = random_net(&mut rng);
        let b = rng.random_range(1..4);
        let x = random_matrix(&mut rng, b, net.in_dim());
        let w = random_matrix(&mut rng, b, net.out_dim());
        let (ep, ex) = fd_check(&mut net, &x, &w, trial);
        assert!(
            ep < 1e-4 && ex < 1e-4,
            "trial {trial}: param {ep:e} input {ex:e}"
        );
    }
}

#[test]
fn backward_rejects_eval_and_stale_caches() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net = Network::new(vec![LayerSpec::linear(2, 2)], &mut rng).unwrap();
    let x = random_matrix(&mut rng, 1, 2);
    let g = Tensor::zeros(&[1, 2]);
    let (_, eval_cache) = net.forward(&x, Mode::Eval, 0).unwrap();
    assert!(matches!(
        net.backward(&eval_cache, &g),
        Err(NnError::Cache(_))
    ));
    let (_, cache) = net.forward(&x, Mode::Train, 0).unwrap();
    net.params_mut()[1].data_mut()[0] = 0.5;
    assert!(matches!(net.backward(&cache, &g), Err(NnError::Cache(_))));
}

#[test]
fn dimension_mismatch_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = Network::new(vec![LayerSpec::linear(3, 2)], &mut rng).unwrap();
    let err = net
        .forward(&Tensor::zeros(&[2, 4]), Mode::Eval, 0)
        .unwrap_err();
    assert!(err.to_string().contains("expects [batch, 3]"), "{err}");
    assert!(Network::new(vec![LayerSpec::linear(3, 2), LayerSpec::gelu(3)], &mut rng).is_err());
    assert!(Network::new(
        vec![LayerSpec::linear(3, 2), LayerSpec::residual(2, 0)],
        &mut rng
    )
    .is_err());
}

#[test]
fn dropout_is_identity_in_eval_and_seeded_in_train() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = Network::new(
        vec![LayerSpec::linear(8, 8), LayerSpec::dropout(8, 0.5)],
        &mut rng,
    )
    .unwrap();
    let x = random_matrix(&mut rng, 4, 8);
    let (eval, _) = net.forward(&x, Mode::Eval, 1).unwrap();
    let plain = Network::from_layers(vec![net.layers()[0].clone()])
        .unwrap()
        .predict(&x)
        .unwrap();
    assert_eq!(eval, plain);
    let (a, _) = net.forward(&x, Mode::Train, 42).unwrap();
    let (b, _) = net.forward(&x, Mode::Train, 42).unwrap();
    let (c, _) = net.forward(&x, Mode::Train, 43).unwrap();
    assert_eq!(a.data(), b.data());
    assert_ne!(a.data(), c.data());
}

fn train_k_steps(kind: OptimizerKind, seed: u64, k: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = random_net(&mut rng);
    let mut opt = OptimizerState::new(kind, &net.params());
    for step in 0..k {
        let x = random_matrix(&mut rng, 3, net.in_dim());
        let (y, cache) = net.forward(&x, Mode::Train, step as u64).unwrap();
        let (grads, _) = net.backward(&cache, &y).unwrap();
        let g: Vec<Tensor> = grads.flat().into_iter().cloned().collect();
        let g_refs: Vec<&Tensor> = g.iter().collect();
        opt.step(&mut net.params_mut(), &g_refs, 1e-2).unwrap();
    }
    net.params()
        .iter()
        .flat_map(|t| t.data().to_vec())
        .collect()
}

#[test]
fn optimizers_are_bit_deterministic() {
    for kind in [
        OptimizerKind::Adam(AdamConfig::default()),
        OptimizerKind::Muon(MuonConfig::default()),
    ] {
        let a = train_k_steps(kind, 77, 10);
        let b = train_k_steps(kind, 77, 10);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn svd_squares_match_jacobi_eigenvalues_of_gram() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = random_matrix(&mut rng, 8, 5);
    let rows: Vec<Vec<f64>> = (0..8).map(|i| a.row(i).to_vec()).collect();
    let eig = jacobi_eigenvalues(&gram_columns(&rows));
    let s = svd(&a).unwrap();
    for (sig, lam) in s.sigma.iter().zip(&eig) {
        assert!(
            (sig * sig - lam).abs() < 1e-8 * eig[0].max(1.0),
            "{sig} {lam}"
        );
    }
}

fn check_svd(a: &Tensor) {
    let s = svd(a).unwrap();
    let k = a.rows().min(a.cols());
    assert_eq!(s.sigma.len(), k);
    assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]) && s.sigma.iter().all(|&v| v >= 0.0));
    let mut us = s.u.clone();
    for i in 0..us.rows() {
        for j in 0..k {
            let v = us.get(i, j) * s.sigma[j];
            us.set(i, j, v);
        }
    }
    let recon = us.matmul_t(&s.v).unwrap();
    let err = recon.sub(a).unwrap().frobenius_norm() / a.frobenius_norm().max(1e-300);
    assert!(err < 1e-8, "reconstruction {err:e} for {:?}", a.shape());
    for f in [&s.u, &s.v] {
        let g = f.t_matmul(f).unwrap();
        assert!(g.sub(&Tensor::identity(k)).unwrap().max_abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn svd_reconstructs_random_matrices(r in 1usize..=64, c in 1usize..=64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        check_svd(&random_matrix(&mut rng, r, c));
    }
}

#[test]
fn svd_handles_rank_deficient_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let u = random_matrix(&mut rng, 6, 1);
    let v = random_matrix(&mut rng, 1, 4);
    let a = u.matmul(&v).unwrap();
    check_svd(&a);
    let s = svd(&a).unwrap();
    assert!(s.sigma[1] < 1e-12 * s.sigma[0]);
}

#[test]
fn newton_schulz_on_permutation_preserves_direction() {
    let p = Tensor::from_rows(&[
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![1.0, 0.0, 0.0],
    ])
    .unwrap();
    let out = newton_schulz(&p, 6);
    // All singular values equal: the output is the input times one scalar,
    // and that scalar is the scalar quintic iterated from 1/√3.
    let (a, b, c) = NS_COEFFS;
    let mut s = 1.0 / 3f64.sqrt();
    for _ in 0..6 {
        s = a * s + b * s.powi(3) + c * s.powi(5);
    }
    let expected = p.scale(s);
    assert!(out.sub(&expected).unwrap().max_abs() < 1e-6);
    let (lo, hi) = quintic_range(0.05 / 8f64.sqrt() / 2.0, 6);
    assert!((lo..=hi).contains(&s));
}

#[test]
fn newton_schulz_rank_one_maps_support_near_one() {
    let u = Tensor::matrix(3, 1, vec![1.0 / 3f64.sqrt(); 3]).unwrap();
    let v = Tensor::matrix(1, 3, vec![0.6, 0.8, 0.0]).unwrap();
    let g = u.matmul(&v).unwrap();
    let s = svd(&newton_schulz(&g, 6)).unwrap().sigma;
    let (lo, hi) = quintic_range(0.5, 6);
    assert!(s[0] >= lo - 1e-9 && s[0] <= hi + 1e-9, "{s:?}");
    assert!(s[1] < 1e-9 && s[2] < 1e-9);
}

#[test]
fn newton_schulz_singular_values_within_quintic_band() {
    // The band is the image of the scalar quintic over every normalized
    // singular value the conditioned inputs can have.
    let (lo, hi) = quintic_range(0.05 / 8f64.sqrt() / 2.0, 6);
    assert!(lo > 0.68 && hi < 1.135, "band [{lo}, {hi}]");
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 200 {
        let r = rng.random_range(2..=8);
        let c = rng.random_range(2..=8);
        let g = random_matrix(&mut rng, r, c);
        let sv = svd(&g).unwrap().sigma;
        if sv[sv.len() - 1] / sv[0] <= 0.05 {
            continue;
        }
        checked += 1;
        let out = newton_schulz(&g, 6);
        let so = svd(&out).unwrap().sigma;
        assert!(
            so.iter().all(|&s| s >= lo - 1e-9 && s <= hi + 1e-9),
            "{so:?}"
        );
        if r == 8 && c == 8 {
            let dev = out
                .matmul_t(&out)
                .unwrap()
                .sub(&Tensor::identity(8))
                .unwrap()
                .frobenius_norm();
            let bound = 8f64.sqrt() * (1.0 - lo * lo).max(hi * hi - 1.0);
            assert!(dev <= bound, "{dev} > {bound}");
        }
    }
}
