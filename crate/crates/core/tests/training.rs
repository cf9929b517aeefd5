use gaitspace::models::{latent_override, to_polar, uniform_bins, ModelConfig, PlannerModel, TerrainAutoencoder, VaeModel};
use gaitspace::nn::{gradient_check, Activation, DenseNet, Layer};
use gaitspace::oracle::{generate_episode, CommandSchedule, EpisodeSpec, GaitKind, GaitParams, OracleConfig, STATE_DIM};
use gaitspace::terrain::HeightMap;
use gaitspace::training::*;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn tiny() -> ModelConfig {
    ModelConfig {
        width: 6,
        latent: 4,
        history: 3,
        horizon: 2,
        bins: 8,
        ..ModelConfig::default()
    }
}

fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.sample::<f64, _>(StandardNormal))
}

fn random_batch(rng: &mut ChaCha8Rng, cfg: &ModelConfig, b: usize) -> Batch {
    Batch {
        history: randn(rng, b, cfg.history * STATE_DIM),
        terrain: randn(rng, b, cfg.history * 2),
        target: randn(rng, b, cfg.horizon * STATE_DIM),
        contacts: Array2::from_shape_simple_fn((b, cfg.horizon * 4), || if rng.gen::<bool>() { 1.0 } else { 0.0 }),
        action: randn(rng, b, 3),
        label: Array1::from_shape_fn(b, |i| [-1.0, 0.0, 1.0][i % 3]),
    }
}

fn models(seed: u64) -> (VaeModel, TerrainAutoencoder, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vae = VaeModel::new(tiny(), &mut rng).unwrap();
    let ter = TerrainAutoencoder::new(&tiny(), &mut rng);
    (vae, ter, rng)
}

/// Replace a net's output layer with zero weights and the given bias.
fn constant_output(net: &mut DenseNet, bias: &[f64]) {
    let last = net.layers_mut().last_mut().unwrap();
    last.weight.fill(0.0);
    last.bias.assign(&Array1::from(bias.to_vec()));
}

#[test]
fn perfect_reconstruction_leaves_only_kl() {
    let (mut vae, mut ter, mut rng) = models(1);
    let mut batch = random_batch(&mut rng, &tiny(), 1);
    batch.target.fill(0.3);
    let truth: Vec<f64> = batch.contacts.iter().map(|c| if *c > 0.5 { 40.0 } else { -40.0 }).collect();
    constant_output(&mut vae.decoder, &vec![0.3; tiny().horizon * STATE_DIM]);
    constant_output(&mut vae.predictor, &truth);
    let noise = randn(&mut rng, 1, 4);
    let (l, _) = vae_loss(&vae, &ter, &batch, noise.view(), 0.7, 1.0).unwrap();
    assert_eq!(l.mse, 0.0);
    assert!(l.bce < 1e-15);
    assert!((l.total - 0.7 * l.kl).abs() < 1e-12);

    // terrain: both reconstructions exact → 0
    batch.terrain.fill(-0.2);
    constant_output(ter.decoder.as_mut().unwrap(), &vec![-0.2; tiny().history * 2]);
    let (t, _) = terrain_loss(&vae, &ter, &batch, 1.0).unwrap();
    assert_eq!(t.total, 0.0);
}

#[test]
fn zero_weights_reduce_to_mse() {
    let (vae, ter, mut rng) = models(2);
    let batch = random_batch(&mut rng, &tiny(), 5);
    let noise = randn(&mut rng, 5, 4);
    let (l, _) = vae_loss(&vae, &ter, &batch, noise.view(), 0.0, 0.0).unwrap();
    assert_eq!(l.total, l.mse);
    assert!(l.kl >= 0.0 && l.bce >= 0.0 && l.mse >= 0.0);
    let (l, _) = vae_loss(&vae, &ter, &batch, noise.view(), 0.5, 1.0).unwrap();
    assert!((l.total - (l.mse + 0.5 * l.kl + l.bce)).abs() < 1e-9);

    let (t, _) = terrain_loss(&vae, &ter, &batch, 0.0).unwrap();
    assert_eq!(t.total, t.terrain_mse);
}

#[test]
fn vae_gradients_match_finite_differences() {
    let (vae, ter, mut rng) = models(3);
    let batch = random_batch(&mut rng, &tiny(), 4);
    let noise = randn(&mut rng, 4, 4);
    let (beta, gamma) = (0.37, 1.0);
    let (_, g) = vae_loss(&vae, &ter, &batch, noise.view(), beta, gamma).unwrap();
    let heads: [(&str, fn(&mut VaeModel) -> &mut DenseNet, _); 3] = [
        ("encoder", |m| &mut m.encoder, g.encoder.to_vec()),
        ("decoder", |m| &mut m.decoder, g.decoder.to_vec()),
        ("predictor", |m| &mut m.predictor, g.predictor.to_vec()),
    ];
    for (name, pick, analytic) in heads {
        let mut probe = vae.clone();
        let params = pick(&mut probe).params_to_vec();
        let report = gradient_check(
            |p| {
                pick(&mut probe).set_params_from_slice(p).unwrap();
                let pass = LossPass::new(&probe, &ter, &batch, noise.view()).unwrap();
                pass.vae_breakdown(beta, gamma).total
            },
            &params,
            &analytic,
            1e-6,
            400,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-4, "{name}: {report:?}");
    }
}

#[test]
fn terrain_gradients_match_finite_differences() {
    let (vae, ter, mut rng) = models(4);
    let batch = random_batch(&mut rng, &tiny(), 4);
    let (_, g) = terrain_loss(&vae, &ter, &batch, 1.0).unwrap();
    let zero = Array2::zeros((4, 4));
    for (which, analytic) in [(0, g.encoder.to_vec()), (1, g.decoder.to_vec())] {
        let mut probe = ter.clone();
        let params = if which == 0 {
            probe.encoder.params_to_vec()
        } else {
            probe.decoder.as_ref().unwrap().params_to_vec()
        };
        let report = gradient_check(
            |p| {
                if which == 0 {
                    probe.encoder.set_params_from_slice(p).unwrap();
                } else {
                    probe.decoder.as_mut().unwrap().set_params_from_slice(p).unwrap();
                }
                LossPass::new(&vae, &probe, &batch, zero.view()).unwrap().terrain_breakdown(1.0).total
            },
            &params,
            &analytic,
            1e-6,
            400,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-4, "terrain head {which}: {report:?}");
    }
}

#[test]
fn robot_path_reaches_terrain_encoder() {
    let (vae, ter, mut rng) = models(5);
    let batch = random_batch(&mut rng, &tiny(), 3);
    let (_, with) = terrain_loss(&vae, &ter, &batch, 1.0).unwrap();
    let (_, without) = terrain_loss(&vae, &ter, &batch, 0.0).unwrap();
    assert_ne!(with.encoder.to_vec(), without.encoder.to_vec());
    assert_eq!(with.decoder.to_vec(), without.decoder.to_vec());
}

#[test]
fn non_finite_input_reports_batch_index() {
    let (vae, ter, mut rng) = models(6);
    let mut batch = random_batch(&mut rng, &tiny(), 3);
    batch.history[[2, 5]] = f64::NAN;
    let noise = Array2::zeros((3, 4));
    match vae_loss(&vae, &ter, &batch, noise.view(), 1.0, 1.0) {
        Err(TrainError::NonFinite { batch_index, .. }) => assert_eq!(batch_index, 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn geco_update_rules() {
    let mut g = GecoState::new(1.0, 0.1, 1e-2, 0.99);
    g.update(0.1);
    assert_eq!(g.beta, 1.0);
    for _ in 0..1000 {
        g.update(0.1);
    }
    assert!((g.beta - 1.0).abs() < 1e-9);

    let mut g = GecoState::new(1.0, 0.1, 1e-2, 0.99);
    assert!(g.update(0.5) < 1.0);
    let mut g = GecoState::new(1.0, 0.1, 1e-2, 0.99);
    assert!(g.update(0.01) > 1.0);
    let mut g = GecoState::new(2.0, 0.1, 0.0, 0.99);
    g.update(5.0);
    g.update(0.0);
    assert_eq!(g.beta, 2.0);
    let mut g = GecoState::new(1.0, 0.0, 1e3, 0.0);
    g.update(1e3);
    assert_eq!(g.beta, 1e-6);
}

#[test]
fn geco_sign_lowers_reconstruction_error() {
    // Scalar model: minimize (x − 1)² + β x²  →  x* = 1/(1+β), MSE = (β/(1+β))².
    let mse = |beta: f64| (beta / (1.0 + beta)).powi(2);
    let mut g = GecoState::new(1.0, 0.01, 0.5, 0.0);
    let before = mse(g.beta);
    g.update(before);
    let after = mse(g.beta);
    g.update(after);
    assert!(after < before && mse(g.beta) < after);
}

#[test]
fn planner_loss_closed_forms() {
    let bins = uniform_bins(64, 6.0);
    let uniform = PlannerModel::from_parts(
        DenseNet::from_layers(vec![Layer::zeros(12, 64, Activation::Identity)]).unwrap(),
        bins.clone(),
    )
    .unwrap();
    let s = PlannerSample {
        phi: 0.3,
        z_g: vec![0.1; 10],
        radius: 3.0,
        bin: 32,
    };
    let (l, _) = planner_loss(&uniform, &[&s]).unwrap();
    assert!((l.cross_entropy - 64f64.ln()).abs() < 1e-12);
    assert!((l.cross_entropy - 4.1589).abs() < 1e-4);

    let mut layer = Layer::zeros(12, 64, Activation::Identity);
    layer.bias.fill(-30.0);
    layer.bias[20] = 30.0;
    let peaked = PlannerModel::from_parts(DenseNet::from_layers(vec![layer]).unwrap(), bins.clone()).unwrap();
    let exact = PlannerSample {
        radius: bins[20],
        bin: 20,
        ..s.clone()
    };
    let (l, _) = planner_loss(&peaked, &[&exact]).unwrap();
    assert!(l.mse < 1e-20 && l.cross_entropy < 1e-20, "{l:?}");
}

#[test]
fn planner_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = ModelConfig {
        width: 8,
        bins: 6,
        r_max: 3.0,
        ..ModelConfig::default()
    };
    let model = PlannerModel::new(&cfg, &mut rng);
    let samples: Vec<PlannerSample> = (0..5)
        .map(|_| {
            let radius = rng.gen_range(0.0..3.0);
            PlannerSample {
                phi: rng.gen_range(-4.0..4.0),
                z_g: (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                radius,
                bin: model.nearest_bin(radius),
            }
        })
        .collect();
    let refs: Vec<&PlannerSample> = samples.iter().collect();
    let (_, g) = planner_loss(&model, &refs).unwrap();
    let mut probe = model.clone();
    let report = gradient_check(
        |p| {
            probe.net.set_params_from_slice(p).unwrap();
            planner_loss(&probe, &refs).unwrap().0.total
        },
        &model.net.params_to_vec(),
        &g.to_vec(),
        1e-6,
        usize::MAX,
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn planning_dim_selection_by_variance() {
    let lv = [-3.0f64, -2.0, 0.0, 0.5, 0.1, 0.2, 0.0, 0.3, 1.0, 0.4];
    let var: Vec<f64> = lv.iter().map(|v| v.exp()).collect();
    assert_eq!(select_lowest_two(&var), [0, 1]);
    let mut shuffled: Vec<(usize, f64)> = var.iter().copied().enumerate().collect();
    shuffled.reverse();
    let mut back = vec![0.0; 10];
    for (i, v) in shuffled {
        back[i] = v;
    }
    assert_eq!(select_lowest_two(&back), [0, 1]);
}

#[test]
fn polar_extraction_examples_and_roundtrip() {
    let (r, phi) = to_polar(1.0, 0.0);
    assert!((r - 1.0).abs() < 1e-15 && (phi - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    let (r, phi) = to_polar(1.0, 1.0);
    assert!((r - std::f64::consts::SQRT_2).abs() < 1e-15 && (phi - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let (a, b) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let (r, phi) = to_polar(a, b);
        let mut z = vec![0.0; 10];
        latent_override(&mut z, [3, 7], r, phi).unwrap();
        assert!((z[3] - a).abs() < 1e-9 && (z[7] - b).abs() < 1e-9);
    }
}

fn one_episode_set(cfg: ModelConfig, seconds: f64) -> TrainingSet {
    let oracle = OracleConfig::default();
    let spec = EpisodeSpec {
        gait: GaitParams::preset(GaitKind::Trot),
        terrain_id: "flat".into(),
        commands: CommandSchedule::constant([0.2, 0.0, 0.0]),
        duration: seconds,
        seed: 1,
        amplitude: 1.0,
        phase0: Some(0.0),
    };
    let ep = generate_episode(&spec, &HeightMap::flat(), &oracle).unwrap();
    TrainingSet::build(&[ep], cfg, &oracle, 8, 0).unwrap()
}

#[test]
fn windows_follow_layout() {
    let cfg = ModelConfig::default();
    let set = one_episode_set(cfg, 3.0);
    assert_eq!(set.train[0].frame, 632);
    assert!(set.train.iter().all(|w| w.frame + 20 < 1200));
    assert_eq!(set.train[1].frame - set.train[0].frame, 8);
    let w = set.raw_window(set.train[0]);
    assert_eq!(w.history.len(), 80 * STATE_DIM);
    assert_eq!(w.target.len(), 20 * STATE_DIM);
    assert_eq!(w.contacts.len(), 80);
    assert_eq!(w.terrain.len(), 160);
    // earliest encoder frame is the pose reference
    assert!(w.history[45..51].iter().all(|v| v.abs() < 1e-12));
    // target frames are the next M states verbatim
    let ep = &set.episodes[0];
    assert_eq!(&w.target[..STATE_DIM], &ep.states[633][..]);
}

#[test]
fn training_is_deterministic_and_divergence_aborts() {
    let cfg = ModelConfig {
        width: 16,
        ..ModelConfig::default()
    };
    let set = one_episode_set(cfg, 2.5);
    let tc = TrainingConfig {
        batch: 8,
        vae_steps: 6,
        selection_every: 8,
        ..TrainingConfig::default()
    };
    let oracle = OracleConfig::default();
    let (a, ra) = train_vae(&set, &tc, &oracle, 11, "h", |_| {}).unwrap();
    let (b, rb) = train_vae(&set, &tc, &oracle, 11, "h", |_| {}).unwrap();
    assert_eq!(a.vae.encoder.params_to_vec(), b.vae.encoder.params_to_vec());
    assert_eq!(a.vae.decoder.params_to_vec(), b.vae.decoder.params_to_vec());
    assert_eq!(a.terrain.encoder.params_to_vec(), b.terrain.encoder.params_to_vec());
    assert_eq!(ra.epochs, rb.epochs);
    assert_ne!(ra.planning_dims[0], ra.planning_dims[1]);

    let bad = TrainingConfig {
        divergence_factor: 1e-12,
        divergence_patience: 3,
        ..tc
    };
    match train_vae(&set, &bad, &oracle, 11, "h", |_| {}) {
        Err(TrainError::Diverged { step, .. }) => assert_eq!(step, 3),
        other => panic!("expected divergence, got {:?}", other.map(|r| r.1)),
    }
}

#[test]
fn planner_targets_average_the_radius_over_one_stride() {
    let cfg = ModelConfig {
        width: 16,
        ..ModelConfig::default()
    };
    let set = one_episode_set(cfg, 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vae = VaeModel::new(cfg, &mut rng).unwrap();
    let ter = TerrainAutoencoder::new(&cfg, &mut rng);
    let planner = PlannerModel::new(&cfg, &mut rng);
    let dims = [1, 6];
    // shuffled order must not matter
    let mut windows = set.train.clone();
    windows.reverse();
    let samples = extract_planner_dataset(&vae, &ter, dims, &planner, &set, &windows).unwrap();
    let enc = encode_windows(&vae, &ter, &set, &windows).unwrap();
    let inst: Vec<(f64, f64)> = (0..windows.len()).map(|r| to_polar(enc.mean[[r, 1]], enc.mean[[r, 6]])).collect();
    let half = set.episodes[0].stride_frames / 2;
    for (r, s) in samples.iter().enumerate() {
        let near: Vec<f64> = (0..windows.len())
            .filter(|&o| windows[o].frame.abs_diff(windows[r].frame) <= half)
            .map(|o| inst[o].0)
            .collect();
        let mean = near.iter().sum::<f64>() / near.len() as f64;
        assert!((s.radius - mean).abs() < 1e-12);
        assert_eq!(s.phi, inst[r].1);
        assert_eq!(s.bin, planner.nearest_bin(s.radius));
    }
}
