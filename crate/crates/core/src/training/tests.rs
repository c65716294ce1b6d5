use super::*;
use crate::geometry::{generate_scene, synthesize_observation, GeometryConfig, SceneSpec};
use crate::network::{init_params, NetworkConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_setup(a: usize, d: usize) -> (SliceDataset, NetworkParams) {
    let geo = GeometryConfig {
        baseline_count: 4,
        elevation_bins: 16,
        ..GeometryConfig::default()
    };
    let r = geo.measurement_matrix().unwrap();
    let spec = SceneSpec::oblique_plane(a, d, -20.0, 20.0, 1.0, 1.0);
    let truth = generate_scene(&spec, r.grid()).unwrap();
    let obs = synthesize_observation(&r, &truth, 0.05, 3).unwrap();
    let cfg = NetworkConfig {
        c0: 2,
        n1: 2,
        n2: 2,
        slice_width: a,
        theta_init: 1e-2,
    };
    (make_slices(&truth, &obs).unwrap(), init_params(&r, cfg, 1).unwrap())
}

#[test]
fn slices_follow_range_order() {
    let geo = GeometryConfig {
        baseline_count: 4,
        elevation_bins: 16,
        ..GeometryConfig::default()
    };
    let r = geo.measurement_matrix().unwrap();
    let spec = SceneSpec::oblique_plane(5, 3, -20.0, 20.0, 2.0, 1.0);
    let truth = generate_scene(&spec, r.grid()).unwrap();
    let obs = synthesize_observation(&r, &truth, 0.1, 1).unwrap();
    let ds = make_slices(&truth, &obs).unwrap();
    assert_eq!(ds.len(), 3);
    for (k, item) in ds.items.iter().enumerate() {
        assert_eq!(item.range_index, k);
        let expected: Vec<C64> = truth.slice(k).iter().map(|v| C64::new(*v, 0.0)).collect();
        assert_eq!(item.target, expected);
        assert_eq!(item.obs, obs.slice(k));
    }
    let (train, held) = ds.split(0.34);
    assert_eq!((train.len(), held.len()), (2, 1));
    assert_eq!(held.items[0].range_index, 2);
}

#[test]
fn composite_loss_hand_values() {
    let (n, a) = (8, 5);
    let mut target = vec![C64::new(0.0, 0.0); n * a];
    for col in 0..a {
        target[(col % n) * a + col] = C64::new(1.0, 0.0);
    }
    let same = StageOutputs {
        gamma_1d: target.clone(),
        gamma_2d: target.clone(),
        gamma_final: target.clone(),
    };
    let cfg = TrainConfig::default();
    let parts = composite_loss(&same, &target, a, &cfg).unwrap();
    assert!((parts.total - 0.11).abs() < 1e-15, "{}", parts.total);
    assert_eq!((parts.l1d, parts.l2d), (0.0, 0.0));

    let zero = vec![C64::new(0.0, 0.0); n * a];
    let zeros = StageOutputs {
        gamma_1d: zero.clone(),
        gamma_2d: zero.clone(),
        gamma_final: zero.clone(),
    };
    assert_eq!(composite_loss(&zeros, &zero, a, &cfg).unwrap().total, 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut rand_vec = || -> Vec<C64> {
        (0..n * a)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    };
    let out = StageOutputs {
        gamma_1d: rand_vec(),
        gamma_2d: rand_vec(),
        gamma_final: rand_vec(),
    };
    let no_weights = TrainConfig {
        alpha: 0.0,
        beta: 0.0,
        ..cfg
    };
    let parts = composite_loss(&out, &target, a, &no_weights).unwrap();
    assert_eq!(parts.total, parts.l1d);
    let expected: f64 = out
        .gamma_1d
        .iter()
        .zip(&target)
        .map(|(x, t)| (x - t).norm_sqr())
        .sum::<f64>()
        / a as f64;
    assert!((parts.l1d - expected).abs() < 1e-14);
    assert!(composite_loss(&out, &target[1..], a, &cfg).is_err());
}

#[test]
fn frozen_shrinkage_blocks() {
    let (ds, init) = tiny_setup(6, 2);
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        lista_learning_rate: Some(0.0),
        epochs: 2,
        ..TrainConfig::default()
    };
    let (params, _) = train(&ds, init.clone(), &cfg).unwrap();
    assert_eq!(params.tensors.pre, init.tensors.pre);
    assert_eq!(params.tensors.fin, init.tensors.fin);
    assert_ne!(params.tensors.head, init.tensors.head);
    assert_ne!(params.tensors.encoder, init.tensors.encoder);
}

#[test]
fn zero_learning_rate_keeps_everything_fixed() {
    let (ds, init) = tiny_setup(6, 2);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        epochs: 3,
        ..TrainConfig::default()
    };
    let (params, history) = train(&ds, init.clone(), &cfg).unwrap();
    assert_eq!(params, init);
    assert_eq!(history.len(), 3);
    assert!(history.iter().all(|h| h.loss == history[0].loss));
    assert_eq!(history.iter().map(|h| h.epoch).collect::<Vec<_>>(), vec![0, 1, 2]);
}

#[test]
fn training_is_reproducible_and_keeps_thresholds_non_negative() {
    let (ds, init) = tiny_setup(6, 3);
    let cfg = TrainConfig {
        learning_rate: 5e-2,
        epochs: 4,
        ..TrainConfig::default()
    };
    let (a, ha) = train(&ds, init.clone(), &cfg).unwrap();
    let (b, hb) = train(&ds, init, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    let mut a = a;
    for t in a.tensors.thetas_mut() {
        assert!(t.item().unwrap() >= 0.0);
    }
}

#[test]
fn resume_continues_numbering_and_matches_straight_run() {
    let (ds, init) = tiny_setup(6, 2);
    let cfg = TrainConfig {
        learning_rate: 1e-2,
        epochs: 4,
        ..TrainConfig::default()
    };
    let (full, hist_full) = train_resume(&ds, TrainState::new(init.clone()), &cfg, |_, _| Ok(())).unwrap();
    let half = TrainConfig { epochs: 2, ..cfg };
    let (mid, h1) = train_resume(&ds, TrainState::new(init), &half, |_, _| Ok(())).unwrap();
    let (end, h2) = train_resume(&ds, mid, &half, |_, _| Ok(())).unwrap();
    assert_eq!(end, full);
    assert_eq!([h1, h2].concat(), hist_full);
    assert_eq!(hist_full.last().unwrap().epoch, 3);
}

#[test]
fn sgd_moves_against_the_gradient() {
    let (ds, init) = tiny_setup(6, 1);
    let cfg = TrainConfig {
        optimizer: OptimizerKind::Sgd,
        learning_rate: 1e-4,
        epochs: 2,
        ..TrainConfig::default()
    };
    let (_, h) = train(&ds, init, &cfg).unwrap();
    assert!(h[1].loss.total < h[0].loss.total);
}

#[test]
fn nan_guard_reports_epoch_and_slice() {
    let (ds, mut init) = tiny_setup(6, 2);
    let mut ds = ds;
    ds.items[1].obs[0] = C64::new(f64::NAN, 0.0);
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let err = train(&ds, init.clone(), &cfg).unwrap_err();
    assert!(matches!(err, Error::NonFinite { epoch: 0, slice: 1 }), "{err:?}");
    init.tensors.head.bias = init.tensors.head.bias.zeros_like();
    assert!(train(&SliceDataset { items: vec![], ..ds }, init, &cfg).is_err());
}

#[test]
fn composite_gradient_matches_finite_differences_per_group() {
    use crate::diffengine::gradcheck::check_gradients_at;
    use crate::network::{forward_graph, NetParams};
    let (ds, mut init) = tiny_setup(4, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let names = init.names();
    for (t, name) in init.tensors.iter_mut().zip(&names) {
        if name.ends_with("bias") {
            for v in t.real_data_mut().unwrap() {
                *v = rng.random_range(0.1..0.5);
            }
        }
    }
    let item = &ds.items[0];
    let mut inputs: Vec<Tensor> = init.tensors.iter().cloned().collect();
    let count = inputs.len();
    inputs.push(Tensor::complex([4, 4], item.obs.clone()).unwrap());
    inputs.push(Tensor::complex([16, 4], item.target.clone()).unwrap());
    let cfg = TrainConfig::default();
    // every tensor of every group, a few coordinates each
    let probes: Vec<(usize, usize)> = (0..count)
        .flat_map(|i| {
            let dof = inputs[i].real_dof();
            (0..3).map(move |k| (i, (k * 7919) % dof))
        })
        .collect();
    let r = check_gradients_at(&inputs, 1e-6, &probes, |g, v| {
        let net = NetParams::from_flat(2, 2, v[..count].iter().copied())?;
        let out = forward_graph(g, &net, v[count], 16, 8)?;
        Ok(composite_loss_graph(g, &out, v[count + 1], 4, &cfg)?.0)
    })
    .unwrap();
    assert!(r.rel_error < 1e-4, "{}", r.rel_error);
}
