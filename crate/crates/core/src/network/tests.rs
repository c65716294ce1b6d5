use super::*;
use crate::diffengine::gradcheck::check_gradients_at;
use crate::diffengine::{DType, Graph, Tensor};
use crate::geometry::{GeometryConfig, MeasurementMatrix};
use crate::linalg::C64;
use crate::solvers::{ista_solve, RegLambda, SolverConfig, Step};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn geometry(m: usize, n: usize) -> MeasurementMatrix {
    let cfg = GeometryConfig {
        baseline_count: m,
        elevation_bins: n,
        ..GeometryConfig::default()
    };
    cfg.measurement_matrix().unwrap()
}

fn tiny_config() -> NetworkConfig {
    NetworkConfig {
        c0: 2,
        n1: 2,
        n2: 2,
        slice_width: 4,
        theta_init: 1e-2,
    }
}

fn random_complex(rng: &mut ChaCha8Rng, len: usize) -> Vec<C64> {
    (0..len)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

#[test]
fn closed_form_count_matches_enumeration() {
    let r = geometry(24, 128);
    let p = init_params(&r, NetworkConfig::default(), 0).unwrap();
    assert_eq!(p.real_scalar_count(), parameter_count(24, 128, 16, 16, 32));
    assert_eq!(parameter_count(24, 128, 16, 16, 32), 2_349_618);
    let r = geometry(4, 16);
    let p = init_params(&r, tiny_config(), 0).unwrap();
    assert_eq!(p.real_scalar_count(), parameter_count(4, 16, 2, 2, 2));
    assert_eq!(p.names().len(), p.tensors.iter().count());
    p.validate().unwrap();
}

#[test]
fn init_is_deterministic_per_seed() {
    let r = geometry(4, 16);
    let a = init_params(&r, tiny_config(), 7).unwrap();
    let b = init_params(&r, tiny_config(), 7).unwrap();
    let c = init_params(&r, tiny_config(), 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.tensors.encoder, c.tensors.encoder);
    assert_eq!(a.tensors.pre, c.tensors.pre);
    assert!(a.tensors.head.bias.real_data().unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn init_rejects_bad_config() {
    let r = geometry(4, 12);
    assert!(init_params(&r, tiny_config(), 0).is_err());
    let r = geometry(4, 16);
    let cfg = NetworkConfig { c0: 0, ..tiny_config() };
    assert!(init_params(&r, cfg, 0).is_err());
}

#[test]
fn from_flat_round_trip_and_length_checks() {
    let r = geometry(4, 16);
    let p = init_params(&r, tiny_config(), 1).unwrap();
    let flat: Vec<Tensor> = p.tensors.iter().cloned().collect();
    let back = NetParams::from_flat(2, 2, flat.clone()).unwrap();
    assert_eq!(back, p.tensors);
    assert!(NetParams::from_flat(2, 2, flat[1..].to_vec()).is_err());
    let mut longer = flat;
    longer.push(Tensor::scalar(0.0));
    assert!(NetParams::from_flat(2, 2, longer).is_err());
}

#[test]
fn analytic_stack_matches_ista() {
    let r = geometry(24, 128);
    let l = r.lipschitz();
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g_obs = random_complex(&mut rng, 24);
        let lambda = 0.5;
        for k in [1, 4, 16] {
            let cfg = SolverConfig {
                reg_lambda: RegLambda::Fixed(lambda),
                max_iters: k,
                tol: 0.0,
                step: Step::AUTO,
            };
            let oracle = ista_solve(&r, &g_obs, &cfg).unwrap();
            let stack = analytic_stack(&r, k, lambda / l);
            let zero = vec![C64::new(0.0, 0.0); 128];
            let (out, per_block) = lista_stack_forward(&stack, &g_obs, &zero).unwrap();
            assert_eq!(per_block.len(), k);
            let err = out
                .iter()
                .zip(&oracle.gamma)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "seed {seed}, k {k}: {err}");
        }
    }
}

#[test]
fn lista_degenerate_cases() {
    let r = geometry(4, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g_obs = random_complex(&mut rng, 4);
    let zero = vec![C64::new(0.0, 0.0); 16];
    let (out, _) = lista_stack_forward(&analytic_stack(&r, 3, 1e9), &g_obs, &zero).unwrap();
    assert!(out.iter().all(|c| c.norm() == 0.0));
    let (out, _) =
        lista_stack_forward(&analytic_stack(&r, 3, 1e-3), &[C64::new(0.0, 0.0); 4], &zero).unwrap();
    assert!(out.iter().all(|c| c.norm() == 0.0));
    assert!(lista_stack_forward(&analytic_stack(&r, 1, 0.0), &g_obs[..3], &zero).is_err());
}

#[test]
fn pre_image_is_columnwise() {
    let r = geometry(4, 16);
    let p = init_params(&r, tiny_config(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = 5;
    let obs = random_complex(&mut rng, 4 * a);
    let out = pre_image(&p, &obs).unwrap();
    assert_eq!(out.len(), 16 * a);

    // reversing the azimuth columns reverses the output columns
    let perm: Vec<usize> = (0..a).rev().collect();
    let permute = |v: &[C64], rows: usize| -> Vec<C64> {
        (0..rows)
            .flat_map(|i| perm.iter().map(move |&j| v[i * a + j]))
            .collect()
    };
    let out_p = pre_image(&p, &permute(&obs, 4)).unwrap();
    assert_eq!(out_p, permute(&out, 16));

    let zero = pre_image(&p, &vec![C64::new(0.0, 0.0); 4 * a]).unwrap();
    assert!(zero.iter().all(|c| c.norm() == 0.0));

    let col: Vec<C64> = (0..4).map(|i| obs[i * a + 2]).collect();
    let (single, _) = lista_stack_forward(&p.tensors.pre, &col, &[C64::new(0.0, 0.0); 16]).unwrap();
    let from_slice: Vec<C64> = (0..16).map(|i| out[i * a + 2]).collect();
    assert_eq!(single, from_slice);
}

#[test]
fn encoder_shapes_and_homogeneity() {
    let r = geometry(24, 128);
    let p = init_params(&r, NetworkConfig::default(), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x: Vec<f64> = (0..2 * 128 * 104).map(|_| rng.random_range(-1.0..1.0)).collect();
    let pyr = encode(&p, &Tensor::real([2, 128, 104], x).unwrap()).unwrap();
    let shapes: Vec<&[usize]> = pyr.iter().map(|t| t.shape()).collect();
    assert_eq!(
        shapes,
        vec![&[16, 128, 104][..], &[32, 64, 52], &[64, 32, 26], &[128, 16, 13]]
    );

    let zero = encode(&p, &Tensor::zeros([2, 128, 104], DType::Real64)).unwrap();
    assert!(zero.iter().all(|t| t.real_data().unwrap().iter().all(|v| *v == 0.0)));

    let out = fuse(&p, &pyr, 100).unwrap();
    assert_eq!(out.shape(), &[2, 128, 100]);
    let out = fuse(&p, &zero, 100).unwrap();
    assert!(out.real_data().unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn gradient_reaches_every_encoder_kernel() {
    let r = geometry(4, 16);
    let cfg = NetworkConfig { c0: 4, ..tiny_config() };
    let p = init_params(&r, cfg, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut g = Graph::new();
    let vars = bind(&p, &mut g, true);
    let x: Vec<f64> = (0..2 * 16 * 8).map(|_| rng.random_range(0.0..1.0)).collect();
    let xv = g.constant(Tensor::real([2, 16, 8], x).unwrap());
    let pyr = encode_graph(&mut g, &vars, xv).unwrap();
    let out = fuse_graph(&mut g, &vars, &pyr).unwrap();
    let loss = g.l1_loss(out).unwrap();
    g.backward(loss).unwrap();
    for d in &vars.encoder {
        for k in [d.first.kernel, d.second.kernel] {
            let grad = g.grad(k).unwrap().real_data().unwrap();
            assert!(grad.iter().any(|v| *v != 0.0));
        }
    }
}

#[test]
fn final_image_degenerate_cases() {
    let r = geometry(4, 16);
    let p = init_params(&r, tiny_config(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = 3;
    let obs = random_complex(&mut rng, 4 * a);
    let zero = vec![C64::new(0.0, 0.0); 16 * a];
    let out = final_image(&p, &obs, &zero).unwrap();
    // with a zero start the final stack is a plain stack from zero
    let mut swapped = p.clone();
    swapped.tensors.pre = p.tensors.fin.clone();
    assert_eq!(out, pre_image(&swapped, &obs).unwrap());

    let col: Vec<C64> = (0..4).map(|i| obs[i * a + 1]).collect();
    let start = random_complex(&mut rng, 16 * a);
    let out = final_image(&p, &obs, &start).unwrap();
    let col_start: Vec<C64> = (0..16).map(|i| start[i * a + 1]).collect();
    let (single, _) = lista_stack_forward(&p.tensors.fin, &col, &col_start).unwrap();
    assert_eq!(single, (0..16).map(|i| out[i * a + 1]).collect::<Vec<_>>());

    let mut huge = p.clone();
    for t in huge.tensors.thetas_mut() {
        *t = Tensor::real([1], vec![1e9]).unwrap();
    }
    let out = final_image(&huge, &obs, &start).unwrap();
    assert!(out.iter().all(|c| c.norm() == 0.0));
    assert!(final_image(&p, &obs, &start[1..]).is_err());
}

#[test]
fn forward_shapes_for_several_configs() {
    for (m, n, width, c0) in [(24, 128, 100, 16), (4, 16, 4, 2), (6, 32, 20, 3)] {
        let r = geometry(m, n);
        let cfg = NetworkConfig {
            c0,
            n1: 2,
            n2: 2,
            slice_width: width,
            theta_init: 1e-2,
        };
        let p = init_params(&r, cfg, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = random_complex(&mut rng, m * width);
        let out = forward(&p, &obs).unwrap();
        for v in [&out.gamma_1d, &out.gamma_2d, &out.gamma_final] {
            assert_eq!(v.len(), n * width);
        }
        assert_eq!(out, forward(&p, &obs).unwrap());
    }
}

#[test]
fn forward_rejects_bad_observation() {
    let r = geometry(4, 16);
    let p = init_params(&r, tiny_config(), 0).unwrap();
    assert!(matches!(forward(&p, &[C64::new(1.0, 0.0); 7]), Err(crate::Error::Shape(_))));
}

#[test]
fn end_to_end_gradient_matches_finite_differences() {
    let r = geometry(4, 16);
    let mut p = init_params(&r, tiny_config(), 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // nonzero biases keep the zero-padded columns off the ReLU kink
    let names = p.names();
    for (t, name) in p.tensors.iter_mut().zip(&names) {
        if name.ends_with("bias") {
            for v in t.real_data_mut().unwrap() {
                *v = rng.random_range(0.1..0.5);
            }
        }
    }
    let obs = Tensor::complex([4, 4], random_complex(&mut rng, 16)).unwrap();
    let target = Tensor::complex([16, 4], random_complex(&mut rng, 64)).unwrap();
    let mut inputs: Vec<Tensor> = p.tensors.iter().cloned().collect();
    let count = inputs.len();
    inputs.push(obs);
    inputs.push(target);

    let probes: Vec<(usize, usize)> = (0..60)
        .map(|_| {
            let i = rng.random_range(0..count);
            (i, rng.random_range(0..inputs[i].real_dof()))
        })
        .collect();
    let check = check_gradients_at(&inputs, 1e-6, &probes, |g, v| {
        let net = NetParams::from_flat(2, 2, v[..count].iter().copied())?;
        let out = forward_graph(g, &net, v[count], 16, 8)?;
        let a = g.mse_loss(out.gamma_1d, v[count + 1])?;
        let b = g.mse_loss(out.gamma_2d, v[count + 1])?;
        let c = g.mse_loss(out.gamma_final, v[count + 1])?;
        let s = g.add(a, b)?;
        g.add(s, c)
    })
    .unwrap();
    assert!(check.rel_error < 1e-4, "{}", check.rel_error);
}
