//! Losses and their gradients: VAE (reconstruction + KL + contact BCE),
//! terrain autoencoder and planner.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::data::Batch;
use super::TrainError;
use crate::models::{PlannerModel, TerrainAutoencoder, VaeModel};
use crate::nn::{ForwardCache, Gradients, LOGVAR_MAX, LOGVAR_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaeLossBreakdown {
    pub mse: f64,
    pub kl: f64,
    pub beta: f64,
    pub bce: f64,
    pub gamma: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerrainLossBreakdown {
    pub robot_mse: f64,
    pub terrain_mse: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct VaeGradients {
    pub encoder: Gradients,
    pub decoder: Gradients,
    pub predictor: Gradients,
}

#[derive(Debug, Clone)]
pub struct TerrainGradients {
    pub encoder: Gradients,
    pub decoder: Gradients,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn first_bad_row(a: &Array2<f64>) -> Option<usize> {
    a.rows().into_iter().position(|r| r.iter().any(|v| !v.is_finite()))
}

fn concat(parts: &[ArrayView2<f64>]) -> Array2<f64> {
    ndarray::concatenate(Axis(1), parts).expect("matching row counts")
}

/// One shared forward pass through every head for a batch and noise draw.
pub struct LossPass<'a> {
    vae: &'a VaeModel,
    terrain: &'a TerrainAutoencoder,
    batch: &'a Batch,
    noise: Array2<f64>,
    enc: ForwardCache,
    logvar: Array2<f64>,
    std: Array2<f64>,
    ter_enc: ForwardCache,
    ter_dec: ForwardCache,
    dec: ForwardCache,
    pred: ForwardCache,
}

impl<'a> LossPass<'a> {
    pub fn new(vae: &'a VaeModel, terrain: &'a TerrainAutoencoder, batch: &'a Batch, noise: ArrayView2<f64>) -> Result<Self, TrainError> {
        let l = vae.config.latent;
        let b = batch.len();
        if noise.dim() != (b, l) {
            return Err(TrainError::Shape {
                what: "noise",
                expected: b * l,
                got: noise.len(),
            });
        }
        let ter_decoder = terrain.decoder.as_ref().ok_or(TrainError::Model(crate::models::ModelError::Missing("terrain decoder")))?;
        let enc = vae.encoder.forward_batch(batch.history.view())?;
        let h = enc.output();
        let mean = h.slice(s![.., ..l]);
        let logvar = h.slice(s![.., l..]).mapv(|v| v.clamp(LOGVAR_MIN, LOGVAR_MAX));
        let std = logvar.mapv(|v| (0.5 * v).exp());
        let z = &mean + &(&std * &noise);
        let ter_enc = terrain.encoder.forward_batch(batch.terrain.view())?;
        let ter_dec = ter_decoder.forward_batch(ter_enc.output().view())?;
        let label = batch.label.view().insert_axis(Axis(1));
        let dec_in = concat(&[z.view(), ter_enc.output().view(), batch.action.view(), label]);
        let dec = vae.decoder.forward_batch(dec_in.view())?;
        let pred_in = concat(&[z.view(), batch.action.view(), label]);
        let pred = vae.predictor.forward_batch(pred_in.view())?;
        for (what, arr) in [
            ("encoder", enc.output()),
            ("terrain encoder", ter_enc.output()),
            ("terrain decoder", ter_dec.output()),
            ("decoder", dec.output()),
            ("contact predictor", pred.output()),
        ] {
            if let Some(row) = first_bad_row(arr) {
                return Err(TrainError::NonFinite { what, batch_index: row });
            }
        }
        Ok(Self {
            vae,
            terrain,
            batch,
            noise: noise.to_owned(),
            enc,
            logvar,
            std,
            ter_enc,
            ter_dec,
            dec,
            pred,
        })
    }

    fn mean(&self) -> ArrayView2<'_, f64> {
        self.enc.output().slice(s![.., ..self.vae.config.latent])
    }

    pub fn robot_mse(&self) -> f64 {
        let d = self.dec.output() - &self.batch.target;
        d.mapv(|v| v * v).mean().unwrap_or(0.0)
    }

    pub fn terrain_mse(&self) -> f64 {
        let d = self.ter_dec.output() - &self.batch.terrain;
        d.mapv(|v| v * v).mean().unwrap_or(0.0)
    }

    /// Mean over the batch of the per-sample KL to N(0, I).
    pub fn kl(&self) -> f64 {
        let b = self.batch.len() as f64;
        let mu = self.mean();
        let mut total = 0.0;
        Zip::from(&mu).and(&self.logvar).for_each(|m, lv| total += 0.5 * (m * m + lv.exp() - 1.0 - lv));
        total / b
    }

    /// Mean binary cross-entropy of the contact logits.
    pub fn bce(&self) -> f64 {
        let logits = self.pred.output();
        let mut total = 0.0;
        Zip::from(logits).and(&self.batch.contacts).for_each(|l, s| total += softplus(*l) - s * l);
        total / logits.len() as f64
    }

    pub fn vae_breakdown(&self, beta: f64, gamma: f64) -> VaeLossBreakdown {
        let mse = self.robot_mse();
        let kl = self.kl();
        let bce = self.bce();
        VaeLossBreakdown {
            mse,
            kl,
            beta,
            bce,
            gamma,
            total: mse + beta * kl + gamma * bce,
        }
    }

    /// `robot_weight` scales the robot-reconstruction path (1 in training).
    pub fn terrain_breakdown(&self, robot_weight: f64) -> TerrainLossBreakdown {
        let robot_mse = self.robot_mse();
        let terrain_mse = self.terrain_mse();
        TerrainLossBreakdown {
            robot_mse,
            terrain_mse,
            total: robot_weight * robot_mse + terrain_mse,
        }
    }

    fn decoder_backward(&self) -> Result<(Gradients, Array2<f64>), TrainError> {
        let up = (self.dec.output() - &self.batch.target) * (2.0 / self.dec.output().len() as f64);
        let (g, input) = self.vae.decoder.backward_cached(&self.dec, up.view(), true)?;
        Ok((g, input.expect("requested")))
    }

    pub fn vae_gradients(&self, beta: f64, gamma: f64) -> Result<VaeGradients, TrainError> {
        let l = self.vae.config.latent;
        let b = self.batch.len() as f64;
        let (decoder, dec_in) = self.decoder_backward()?;
        let logits = self.pred.output();
        let n = logits.len() as f64;
        let mut up = Array2::zeros(logits.raw_dim());
        Zip::from(&mut up)
            .and(logits)
            .and(&self.batch.contacts)
            .for_each(|u, l, s| *u = gamma * (sigmoid(*l) - s) / n);
        let (predictor, pred_in) = self.vae.predictor.backward_cached(&self.pred, up.view(), true)?;
        let pred_in = pred_in.expect("requested");
        let dz = &dec_in.slice(s![.., ..l]) + &pred_in.slice(s![.., ..l]);
        let mu = self.mean();
        let raw_lv = self.enc.output().slice(s![.., l..]);
        let dmu = &dz + &(&mu * (beta / b));
        let mut dlv = Array2::zeros(dz.raw_dim());
        Zip::from(&mut dlv)
            .and(&dz)
            .and(&self.noise)
            .and(&self.std)
            .and(&self.logvar)
            .and(&raw_lv)
            .for_each(|out, dz, e, sd, lv, raw| {
                *out = if (LOGVAR_MIN..=LOGVAR_MAX).contains(raw) {
                    dz * e * 0.5 * sd + beta * 0.5 * (lv.exp() - 1.0) / b
                } else {
                    0.0
                };
            });
        let up_enc = concat(&[dmu.view(), dlv.view()]);
        let (encoder, _) = self.vae.encoder.backward_cached(&self.enc, up_enc.view(), false)?;
        Ok(VaeGradients {
            encoder,
            decoder,
            predictor,
        })
    }

    pub fn terrain_gradients(&self, robot_weight: f64) -> Result<TerrainGradients, TrainError> {
        let l = self.vae.config.latent;
        let ter_decoder = self.terrain.decoder.as_ref().expect("checked in new");
        let up = (self.ter_dec.output() - &self.batch.terrain) * (2.0 / self.ter_dec.output().len() as f64);
        let (decoder, dz_t) = ter_decoder.backward_cached(&self.ter_dec, up.view(), true)?;
        let mut dz = dz_t.expect("requested");
        if robot_weight != 0.0 {
            let (_, dec_in) = self.decoder_backward()?;
            dz.scaled_add(robot_weight, &dec_in.slice(s![.., l..2 * l]));
        }
        let (encoder, _) = self.terrain.encoder.backward_cached(&self.ter_enc, dz.view(), false)?;
        Ok(TerrainGradients { encoder, decoder })
    }
}

/// Loss value and gradients of the VAE objective.
pub fn vae_loss(
    vae: &VaeModel,
    terrain: &TerrainAutoencoder,
    batch: &Batch,
    noise: ArrayView2<f64>,
    beta: f64,
    gamma: f64,
) -> Result<(VaeLossBreakdown, VaeGradients), TrainError> {
    let pass = LossPass::new(vae, terrain, batch, noise)?;
    Ok((pass.vae_breakdown(beta, gamma), pass.vae_gradients(beta, gamma)?))
}

/// Terrain autoencoder loss `MSE(X⁺, X̂⁺) + MSE(X_g, X̂_g)`. The robot term
/// uses the posterior mean so the value is deterministic.
pub fn terrain_loss(
    vae: &VaeModel,
    terrain: &TerrainAutoencoder,
    batch: &Batch,
    robot_weight: f64,
) -> Result<(TerrainLossBreakdown, TerrainGradients), TrainError> {
    let noise = Array2::zeros((batch.len(), vae.config.latent));
    let pass = LossPass::new(vae, terrain, batch, noise.view())?;
    Ok((pass.terrain_breakdown(robot_weight), pass.terrain_gradients(robot_weight)?))
}

/// GECO controller for the KL weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GecoState {
    pub beta: f64,
    pub kappa: f64,
    pub moving_average: Option<f64>,
    pub rate: f64,
    pub decay: f64,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl GecoState {
    pub fn new(beta: f64, kappa: f64, rate: f64, decay: f64) -> Self {
        Self {
            beta,
            kappa,
            moving_average: None,
            rate,
            decay,
            beta_min: 1e-6,
            beta_max: 1e4,
        }
    }

    /// Fold in a batch reconstruction MSE. β shrinks while the moving average
    /// sits above κ and grows once reconstruction is better than κ.
    pub fn update(&mut self, mse: f64) -> f64 {
        let ma = match self.moving_average {
            None => mse,
            Some(prev) => self.decay * prev + (1.0 - self.decay) * mse,
        };
        self.moving_average = Some(ma);
        self.beta = (self.beta * (-self.rate * (ma - self.kappa)).exp()).clamp(self.beta_min, self.beta_max);
        self.beta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerSample {
    pub phi: f64,
    pub z_g: Vec<f64>,
    pub radius: f64,
    pub bin: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerLossBreakdown {
    pub mse: f64,
    pub cross_entropy: f64,
    pub total: f64,
}

pub fn planner_inputs(samples: &[&PlannerSample]) -> Array2<f64> {
    let d = samples.first().map_or(0, |s| s.z_g.len()) + 2;
    let mut x = Array2::zeros((samples.len(), d));
    for (r, s) in samples.iter().enumerate() {
        let row = PlannerModel::input(s.phi, &s.z_g);
        x.row_mut(r).assign(&Array1::from(row));
    }
    x
}

/// `MSE(R, R*) + CE(softmax(logits), r*)`, both averaged over the batch.
pub fn planner_loss(model: &PlannerModel, samples: &[&PlannerSample]) -> Result<(PlannerLossBreakdown, Gradients), TrainError> {
    let x = planner_inputs(samples);
    let cache = model.net.forward_batch(x.view())?;
    let logits = cache.output();
    if let Some(row) = first_bad_row(logits) {
        return Err(TrainError::NonFinite {
            what: "planner",
            batch_index: row,
        });
    }
    let b = samples.len() as f64;
    let c = model.bins.len();
    let mut up = Array2::zeros(logits.raw_dim());
    let (mut mse, mut ce) = (0.0, 0.0);
    for (r, s) in samples.iter().enumerate() {
        let row = logits.row(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let p: Vec<f64> = row.iter().map(|v| (v - lse).exp()).collect();
        let radius: f64 = p.iter().zip(&model.bins).map(|(p, b)| p * b).sum();
        let err = radius - s.radius;
        mse += err * err;
        ce += lse - row[s.bin];
        for k in 0..c {
            let onehot = if k == s.bin { 1.0 } else { 0.0 };
            up[[r, k]] = (2.0 * err * p[k] * (model.bins[k] - radius) + p[k] - onehot) / b;
        }
    }
    let (grads, _) = model.net.backward_cached(&cache, up.view(), false)?;
    let (mse, ce) = (mse / b, ce / b);
    Ok((
        PlannerLossBreakdown {
            mse,
            cross_entropy: ce,
            total: mse + ce,
        },
        grads,
    ))
}
