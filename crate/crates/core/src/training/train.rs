use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::data::{TrainingSet, Window};
use super::loss::{planner_loss, GecoState, LossPass, PlannerLossBreakdown, PlannerSample};
use super::{TrainError, TrainingConfig};
use crate::models::{to_polar, ModelBundle, ModelConfig, PlannerModel, TerrainAutoencoder, VaeModel};
use crate::nn::{AdamConfig, AdamState, LOGVAR_MAX, LOGVAR_MIN};
use crate::oracle::{GaitKind, OracleConfig};
use std::f64::consts::{PI, TAU};

const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub step: usize,
    pub mse: f64,
    pub kl: f64,
    pub bce: f64,
    pub terrain_mse: f64,
    pub total: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldoutMetrics {
    pub windows: usize,
    pub contact_accuracy: f64,
    pub contact_accuracy_by_gait: BTreeMap<String, f64>,
    pub recon_mse: f64,
    pub terrain_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeReport {
    pub seed: u64,
    pub config_hash: String,
    pub steps: usize,
    pub train_windows: usize,
    pub heldout_windows: usize,
    pub stride_shift_mse: f64,
    pub kappa: f64,
    pub initial_loss: f64,
    pub epochs: Vec<EpochLog>,
    /// `(step, β)` every 50 steps.
    pub beta_trace: Vec<(usize, f64)>,
    pub planning_dims: [usize; 2],
    pub latent_variance: Vec<f64>,
    /// Per-stride winding of the planning dims, per gait (rad).
    #[serde(default)]
    pub planning_winding: BTreeMap<String, f64>,
    #[serde(default)]
    pub planning_dims_looped: bool,
    pub heldout: Option<HeldoutMetrics>,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerReport {
    pub seed: u64,
    pub steps: usize,
    pub train_samples: usize,
    pub heldout_samples: usize,
    pub epochs: Vec<(usize, f64, f64)>,
    pub heldout_radius_mse: Option<f64>,
    pub heldout_cross_entropy: Option<f64>,
    pub r_max: f64,
    /// Mean target radius per terrain id.
    pub mean_target_radius: BTreeMap<String, f64>,
    pub elapsed_seconds: f64,
}

fn sample_windows(rng: &mut ChaCha8Rng, pool: &[Window], n: usize) -> Vec<Window> {
    (0..n).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
}

fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
}

struct Divergence {
    initial: Option<f64>,
    streak: usize,
    factor: f64,
    patience: usize,
}

impl Divergence {
    fn check(&mut self, step: usize, loss: f64) -> Result<(), TrainError> {
        let initial = *self.initial.get_or_insert(loss);
        if loss > self.factor * initial || !loss.is_finite() {
            self.streak += 1;
            if self.streak >= self.patience {
                return Err(TrainError::Diverged {
                    step,
                    loss,
                    initial,
                    factor: self.factor,
                    patience: self.patience,
                });
            }
        } else {
            self.streak = 0;
        }
        Ok(())
    }
}

/// Posterior means and log-variances for a list of windows.
#[derive(Debug, Clone)]
pub struct EncodedWindows {
    pub mean: Array2<f64>,
    pub logvar: Array2<f64>,
    pub terrain: Array2<f64>,
}

pub fn encode_windows(
    vae: &VaeModel,
    terrain: &TerrainAutoencoder,
    set: &TrainingSet,
    windows: &[Window],
) -> Result<EncodedWindows, TrainError> {
    let l = vae.config.latent;
    let norms = super::FeatureNorms {
        input: vae.input_norm.clone(),
        target: vae.target_norm.clone(),
        action: vae.action_norm.clone(),
        terrain: terrain.norm.clone(),
    };
    let mut mean = Array2::zeros((windows.len(), l));
    let mut logvar = Array2::zeros((windows.len(), l));
    let mut zg = Array2::zeros((windows.len(), terrain.encoder.out_dim()));
    for (c, chunk) in windows.chunks(EVAL_CHUNK).enumerate() {
        let batch = set.batch(chunk, &norms)?;
        let h = vae.encoder.forward_batch(batch.history.view())?;
        let h = h.output();
        let r0 = c * EVAL_CHUNK;
        let r1 = r0 + chunk.len();
        mean.slice_mut(s![r0..r1, ..]).assign(&h.slice(s![.., ..l]));
        logvar
            .slice_mut(s![r0..r1, ..])
            .assign(&h.slice(s![.., l..]).mapv(|v| v.clamp(LOGVAR_MIN, LOGVAR_MAX)));
        let t = terrain.encoder.forward_batch(batch.terrain.view())?;
        zg.slice_mut(s![r0..r1, ..]).assign(t.output());
    }
    Ok(EncodedWindows {
        mean,
        logvar,
        terrain: zg,
    })
}

/// Indices of the two smallest values; near-ties (1e−9) go to the lower index.
pub fn select_lowest_two(values: &[f64]) -> [usize; 2] {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        if (values[a] - values[b]).abs() <= 1e-9 {
            a.cmp(&b)
        } else {
            values[a].total_cmp(&values[b])
        }
    });
    [idx[0], idx[1]]
}

/// Mean angle swept per stride by the `(dims[0], dims[1])` trace, per gait.
/// Consecutive windows of an episode are unwrapped; positive is the
/// direction of increasing `atan2(z[dims[0]], z[dims[1]])`.
pub fn stride_winding(
    mean: &Array2<f64>,
    set: &TrainingSet,
    windows: &[Window],
    dims: [usize; 2],
) -> BTreeMap<GaitKind, f64> {
    let mut acc: BTreeMap<GaitKind, (f64, f64)> = BTreeMap::new();
    for r in 1..windows.len() {
        let (a, b) = (windows[r - 1], windows[r]);
        if a.episode != b.episode || b.frame <= a.frame {
            continue;
        }
        let ep = &set.episodes[b.episode];
        let (_, p0) = to_polar(mean[[r - 1, dims[0]]], mean[[r - 1, dims[1]]]);
        let (_, p1) = to_polar(mean[[r, dims[0]]], mean[[r, dims[1]]]);
        let e = acc.entry(ep.gait).or_insert((0.0, 0.0));
        e.0 += (p1 - p0 + PI).rem_euclid(TAU) - PI;
        e.1 += (b.frame - a.frame) as f64 / ep.stride_frames.max(1) as f64;
    }
    acc.into_iter().filter(|(_, (_, n))| *n > 0.0).map(|(g, (w, n))| (g, w / n)).collect()
}

/// Planning dims chosen over `windows`.
#[derive(Debug, Clone, PartialEq)]
pub struct DimSelection {
    pub dims: [usize; 2],
    /// Mean predicted variance per latent dim.
    pub variance: Vec<f64>,
    /// Per-stride winding of the chosen pair, per gait.
    pub winding: BTreeMap<GaitKind, f64>,
    /// Whether the pair met the one-turn-per-stride rule.
    pub looped: bool,
}

/// Among ordered dim pairs whose trace sweeps one positive turn per stride
/// (2π ± π/2) for every gait, the pair with the lowest summed variance.
/// Without such a pair, the two lowest-variance dims.
pub fn select_planning_dims(
    vae: &VaeModel,
    terrain: &TerrainAutoencoder,
    set: &TrainingSet,
    windows: &[Window],
) -> Result<DimSelection, TrainError> {
    let enc = encode_windows(vae, terrain, set, windows)?;
    let variance = enc.logvar.mapv(f64::exp).mean_axis(Axis(0)).expect("non-empty").to_vec();
    let l = variance.len();
    let mut best: Option<(f64, [usize; 2], BTreeMap<GaitKind, f64>)> = None;
    for i in 0..l {
        for j in i + 1..l {
            let w = stride_winding(&enc.mean, set, windows, [i, j]);
            if w.is_empty() {
                continue;
            }
            let sign = w.values().next().copied().unwrap_or(0.0).signum();
            if !w.values().all(|v| (v * sign - TAU).abs() <= PI / 2.0) {
                continue;
            }
            let (dims, w) = if sign > 0.0 {
                ([i, j], w)
            } else {
                ([j, i], w.into_iter().map(|(g, v)| (g, -v)).collect())
            };
            let cost = variance[i] + variance[j];
            if best.as_ref().is_none_or(|(c, _, _)| cost < *c - 1e-12) {
                best = Some((cost, dims, w));
            }
        }
    }
    Ok(match best {
        Some((_, dims, winding)) => DimSelection {
            dims,
            variance,
            winding,
            looped: true,
        },
        None => {
            let dims = select_lowest_two(&variance);
            DimSelection {
                winding: stride_winding(&enc.mean, set, windows, dims),
                dims,
                variance,
                looped: false,
            }
        }
    })
}

/// Contact accuracy and reconstruction errors using posterior means.
pub fn evaluate_vae(
    vae: &VaeModel,
    terrain: &TerrainAutoencoder,
    set: &TrainingSet,
    windows: &[Window],
) -> Result<HeldoutMetrics, TrainError> {
    let norms = super::FeatureNorms {
        input: vae.input_norm.clone(),
        target: vae.target_norm.clone(),
        action: vae.action_norm.clone(),
        terrain: terrain.norm.clone(),
    };
    let mut hits: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let (mut recon, mut ter, mut n) = (0.0, 0.0, 0usize);
    for chunk in windows.chunks(EVAL_CHUNK) {
        let batch = set.batch(chunk, &norms)?;
        let noise = Array2::zeros((chunk.len(), vae.config.latent));
        let pass = LossPass::new(vae, terrain, &batch, noise.view())?;
        recon += pass.robot_mse() * chunk.len() as f64;
        ter += pass.terrain_mse() * chunk.len() as f64;
        n += chunk.len();
        let cache = vae
            .predictor
            .forward_batch(ndarray::concatenate(
                Axis(1),
                &[
                    pass_mean(vae, &batch)?.view(),
                    batch.action.view(),
                    batch.label.view().insert_axis(Axis(1)),
                ],
            )
            .expect("rows match")
            .view())?;
        for (r, w) in chunk.iter().enumerate() {
            let name = set.episodes[w.episode].gait.name().to_string();
            let e = hits.entry(name).or_insert((0, 0));
            for (l, t) in cache.output().row(r).iter().zip(batch.contacts.row(r)) {
                e.0 += usize::from((*l > 0.0) == (*t > 0.5));
                e.1 += 1;
            }
        }
    }
    let (hit, tot) = hits.values().fold((0, 0), |a, v| (a.0 + v.0, a.1 + v.1));
    Ok(HeldoutMetrics {
        windows: n,
        contact_accuracy: hit as f64 / tot.max(1) as f64,
        contact_accuracy_by_gait: hits.into_iter().map(|(k, (h, t))| (k, h as f64 / t.max(1) as f64)).collect(),
        recon_mse: recon / n.max(1) as f64,
        terrain_mse: ter / n.max(1) as f64,
    })
}

fn pass_mean(vae: &VaeModel, batch: &super::Batch) -> Result<Array2<f64>, TrainError> {
    let h = vae.encoder.forward_batch(batch.history.view())?;
    Ok(h.output().slice(s![.., ..vae.config.latent]).to_owned())
}

/// Train the robot VAE and terrain autoencoder jointly. `on_epoch` sees
/// each epoch summary as it completes.
pub fn train_vae(
    set: &TrainingSet,
    cfg: &TrainingConfig,
    oracle: &OracleConfig,
    seed: u64,
    config_hash: &str,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(ModelBundle, VaeReport), TrainError> {
    cfg.validate()?;
    let started = Instant::now();
    let mcfg: ModelConfig = set.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vae = VaeModel::new(mcfg, &mut rng)?;
    let mut terrain = TerrainAutoencoder::new(&mcfg, &mut rng);
    let norms = set.fit_norms(4);
    vae.input_norm = norms.input.clone();
    vae.target_norm = norms.target.clone();
    vae.action_norm = norms.action.clone();
    terrain.norm = norms.terrain.clone();
    let shift = set.stride_shift_mse(&norms, 4);
    let kappa = (cfg.kappa_scale * shift).max(cfg.kappa_floor);
    let mut geco = GecoState::new(cfg.initial_beta, kappa, cfg.geco_rate, cfg.geco_decay);

    let adam = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut opt_enc = AdamState::new(&vae.encoder, adam);
    let mut opt_dec = AdamState::new(&vae.decoder, adam);
    let mut opt_pred = AdamState::new(&vae.predictor, adam);
    let mut opt_tenc = AdamState::new(&terrain.encoder, adam);
    let mut opt_tdec = AdamState::new(terrain.decoder.as_ref().expect("fresh model"), adam);

    let steps_per_epoch = set.train.len().div_ceil(cfg.batch).max(1);
    let mut divergence = Divergence {
        initial: None,
        streak: 0,
        factor: cfg.divergence_factor,
        patience: cfg.divergence_patience.max(1),
    };
    let mut epochs = Vec::new();
    let mut beta_trace = Vec::new();
    let mut acc = [0.0f64; 5];
    let mut acc_n = 0usize;
    for step in 0..cfg.vae_steps {
        let windows = sample_windows(&mut rng, &set.train, cfg.batch);
        let batch = set.batch(&windows, &norms)?;
        let noise = normal(&mut rng, cfg.batch, mcfg.latent);
        let beta = geco.beta;
        let (vl, tl, vg, tg) = {
            let pass = LossPass::new(&vae, &terrain, &batch, noise.view())?;
            (
                pass.vae_breakdown(beta, cfg.gamma),
                pass.terrain_breakdown(1.0),
                pass.vae_gradients(beta, cfg.gamma)?,
                pass.terrain_gradients(1.0)?,
            )
        };
        divergence.check(step + 1, vl.total)?;
        opt_enc.step(&mut vae.encoder, &vg.encoder)?;
        opt_dec.step(&mut vae.decoder, &vg.decoder)?;
        opt_pred.step(&mut vae.predictor, &vg.predictor)?;
        opt_tenc.step(&mut terrain.encoder, &tg.encoder)?;
        opt_tdec.step(terrain.decoder.as_mut().expect("fresh model"), &tg.decoder)?;
        geco.update(vl.mse);
        if step % 50 == 0 {
            beta_trace.push((step, geco.beta));
        }
        for (a, v) in acc.iter_mut().zip([vl.mse, vl.kl, vl.bce, tl.terrain_mse, vl.total]) {
            *a += v;
        }
        acc_n += 1;
        if (step + 1) % steps_per_epoch == 0 || step + 1 == cfg.vae_steps {
            let n = acc_n as f64;
            let log = EpochLog {
                epoch: epochs.len(),
                step: step + 1,
                mse: acc[0] / n,
                kl: acc[1] / n,
                bce: acc[2] / n,
                terrain_mse: acc[3] / n,
                total: acc[4] / n,
                beta: geco.beta,
            };
            on_epoch(&log);
            epochs.push(log);
            acc = [0.0; 5];
            acc_n = 0;
        }
    }

    let selection: Vec<Window> = set.train.iter().step_by(cfg.selection_every.max(1)).copied().collect();
    let selection = select_planning_dims(&vae, &terrain, set, &selection)?;
    let dims = selection.dims;
    let heldout = if set.heldout.is_empty() {
        None
    } else {
        Some(evaluate_vae(&vae, &terrain, set, &set.heldout)?)
    };
    let report = VaeReport {
        seed,
        config_hash: config_hash.to_string(),
        steps: cfg.vae_steps,
        train_windows: set.train.len(),
        heldout_windows: set.heldout.len(),
        stride_shift_mse: shift,
        kappa,
        initial_loss: divergence.initial.unwrap_or(f64::NAN),
        epochs,
        beta_trace,
        planning_dims: dims,
        latent_variance: selection.variance,
        planning_winding: selection.winding.iter().map(|(g, w)| (g.to_string(), *w)).collect(),
        planning_dims_looped: selection.looped,
        heldout,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    let bundle = ModelBundle {
        vae,
        terrain,
        planner: None,
        planning_dims: Some(dims),
        oracle: oracle.clone(),
        seed,
        config_hash: config_hash.to_string(),
    };
    Ok((bundle, report))
}

/// Planner training samples: phase of the encoded planning dims, the terrain
/// code and, as target, the planning radius averaged over the stride centred
/// on the window (windows of the same episode within half a stride).
///
/// Encoded loops are rarely circular; the instantaneous radius then swings
/// with phase and a uniformly advancing φ would spend most of the stride at
/// the small-radius end.
pub fn extract_planner_dataset(
    vae: &VaeModel,
    terrain: &TerrainAutoencoder,
    dims: [usize; 2],
    planner: &PlannerModel,
    set: &TrainingSet,
    windows: &[Window],
) -> Result<Vec<PlannerSample>, TrainError> {
    if dims[0] == dims[1] {
        return Err(crate::models::ModelError::SamePlanningDims(dims[0]).into());
    }
    let enc = encode_windows(vae, terrain, set, windows)?;
    let polar: Vec<(f64, f64)> =
        (0..windows.len()).map(|r| to_polar(enc.mean[[r, dims[0]]], enc.mean[[r, dims[1]]])).collect();
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.sort_by_key(|&r| (windows[r].episode, windows[r].frame));
    let mut radius = vec![0.0; windows.len()];
    let (mut lo, mut hi, mut sum) = (0, 0, 0.0);
    for (k, &r) in order.iter().enumerate() {
        let w = windows[r];
        let half = set.episodes[w.episode].stride_frames / 2;
        let near = |o: usize| windows[o].episode == w.episode && windows[o].frame.abs_diff(w.frame) <= half;
        while hi < order.len() && (hi <= k || near(order[hi])) {
            sum += polar[order[hi]].0;
            hi += 1;
        }
        while !near(order[lo]) {
            sum -= polar[order[lo]].0;
            lo += 1;
        }
        radius[r] = sum / (hi - lo) as f64;
    }
    Ok((0..windows.len())
        .map(|r| PlannerSample {
            phi: polar[r].1,
            z_g: enc.terrain.row(r).to_vec(),
            radius: radius[r],
            bin: planner.nearest_bin(radius[r]),
        })
        .collect())
}

fn planner_windows(set: &TrainingSet, pool: &[Window], gait: GaitKind) -> Vec<Window> {
    pool.iter().filter(|w| set.episodes[w.episode].gait == gait).copied().collect()
}

/// Radius MSE and cross-entropy of the bundle's planner on `windows` of `gait`.
pub fn evaluate_planner(
    bundle: &ModelBundle,
    set: &TrainingSet,
    windows: &[Window],
    gait: GaitKind,
) -> Result<Option<PlannerLossBreakdown>, TrainError> {
    let planner = bundle.planner()?;
    let w = planner_windows(set, windows, gait);
    if w.is_empty() {
        return Ok(None);
    }
    let samples = extract_planner_dataset(&bundle.vae, &bundle.terrain, bundle.planning_dims()?, planner, set, &w)?;
    let refs: Vec<&PlannerSample> = samples.iter().collect();
    Ok(Some(planner_loss(planner, &refs)?.0))
}

/// Behavioural cloning of the planning-dim radius from phase and terrain.
pub fn train_planner(
    bundle: &ModelBundle,
    set: &TrainingSet,
    cfg: &TrainingConfig,
    seed: u64,
    mut on_epoch: impl FnMut(usize, f64, f64),
) -> Result<(PlannerModel, PlannerReport), TrainError> {
    cfg.validate()?;
    let started = Instant::now();
    let dims = bundle.planning_dims()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x504c_414e);
    let mut planner = PlannerModel::new(bundle.config(), &mut rng);
    let train_w = planner_windows(set, &set.train, cfg.planner_gait);
    if train_w.is_empty() {
        return Err(TrainError::NoPlannerData(cfg.planner_gait));
    }
    let heldout_w = planner_windows(set, &set.heldout, cfg.planner_gait);
    let samples = extract_planner_dataset(&bundle.vae, &bundle.terrain, dims, &planner, set, &train_w)?;
    let heldout = extract_planner_dataset(&bundle.vae, &bundle.terrain, dims, &planner, set, &heldout_w)?;

    let mut by_terrain: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (s, w) in samples.iter().zip(&train_w) {
        let e = by_terrain.entry(set.episodes[w.episode].terrain.clone()).or_insert((0.0, 0));
        e.0 += s.radius;
        e.1 += 1;
    }

    let mut opt = AdamState::new(
        &planner.net,
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let steps_per_epoch = samples.len().div_ceil(cfg.batch).max(1);
    let mut divergence = Divergence {
        initial: None,
        streak: 0,
        factor: cfg.divergence_factor,
        patience: cfg.divergence_patience.max(1),
    };
    let mut epochs = Vec::new();
    let (mut acc_mse, mut acc_ce, mut acc_n) = (0.0, 0.0, 0usize);
    for step in 0..cfg.planner_steps {
        let picks: Vec<&PlannerSample> = (0..cfg.batch).map(|_| &samples[rng.gen_range(0..samples.len())]).collect();
        let (loss, grads) = planner_loss(&planner, &picks)?;
        divergence.check(step + 1, loss.total)?;
        opt.step(&mut planner.net, &grads)?;
        acc_mse += loss.mse;
        acc_ce += loss.cross_entropy;
        acc_n += 1;
        if (step + 1) % steps_per_epoch == 0 || step + 1 == cfg.planner_steps {
            let n = acc_n as f64;
            on_epoch(step + 1, acc_mse / n, acc_ce / n);
            epochs.push((step + 1, acc_mse / n, acc_ce / n));
            (acc_mse, acc_ce, acc_n) = (0.0, 0.0, 0);
        }
    }
    let (heldout_radius_mse, heldout_cross_entropy) = if heldout.is_empty() {
        (None, None)
    } else {
        let refs: Vec<&PlannerSample> = heldout.iter().collect();
        let (loss, _) = planner_loss(&planner, &refs)?;
        (Some(loss.mse), Some(loss.cross_entropy))
    };
    let report = PlannerReport {
        seed,
        steps: cfg.planner_steps,
        train_samples: samples.len(),
        heldout_samples: heldout.len(),
        epochs,
        heldout_radius_mse,
        heldout_cross_entropy,
        r_max: bundle.config().r_max,
        mean_target_radius: by_terrain.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((planner, report))
}
