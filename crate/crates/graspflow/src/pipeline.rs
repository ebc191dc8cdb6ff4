//! End-to-end training pipeline shared by the CLI and integration tests:
//! autoencoder pre-training, condition encoding, split handling,
//! translated-variant expansion, and velocity-field fitting, all driven
//! by one [`RunConfig`].

use crate::config::RunConfig;
use crate::encoder::{train_autoencoder, AutoencoderNet, DepthImage};
use crate::error::{Error, Result};
use crate::pose::to_vec7;
use crate::rng::Rng;
use crate::scene::PairedGrasp;
use crate::velocity::{
    fit_grouped, shifted_variants, split_indices, FitReport, FlowSample, VelocityNet,
};

/// Everything `train` produces in memory, before any artifact is written.
pub struct TrainedModels {
    pub encoder: AutoencoderNet,
    pub net: VelocityNet,
    /// Per-epoch autoencoder reconstruction MSE.
    pub ae_history: Vec<f64>,
    /// Velocity-field loss history (train rows include variants; val rows
    /// are clean held-out pairs).
    pub report: FitReport,
    /// Clean flow samples, one per dataset pair, in dataset order.
    pub samples: Vec<FlowSample>,
    /// Dataset-pair indices held out of flow training.
    pub val_idx: Vec<usize>,
}

/// Condition-encode every pair with a given encoder.
pub fn build_samples(
    pairs: &[PairedGrasp],
    encoder: &AutoencoderNet,
    corpus: &[DepthImage],
) -> Result<Vec<FlowSample>> {
    pairs
        .iter()
        .zip(corpus)
        .map(|(p, img)| {
            Ok(FlowSample {
                g_rigid: to_vec7(&p.g_rigid),
                g_soft: to_vec7(&p.g_soft),
                condition: encoder.encode(img)?,
            })
        })
        .collect()
}

/// Train the full model stack on an in-memory dataset.
pub fn train_models(
    cfg: &RunConfig,
    pairs: &[PairedGrasp],
    corpus: &[DepthImage],
) -> Result<TrainedModels> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::Data("dataset holds no pairs".into()));
    }
    if pairs.len() != corpus.len() {
        return Err(Error::Data(format!(
            "{} pairs but {} depth images",
            pairs.len(),
            corpus.len()
        )));
    }

    let mut rng = Rng::derive(cfg.seed, 0xae);
    let mut encoder = AutoencoderNet::new(corpus[0].pixels(), &mut rng);
    let ae_history = train_autoencoder(&mut encoder, corpus, &cfg.ae_config(), &mut rng)?;

    let samples = build_samples(pairs, &encoder, corpus)?;
    let tcfg = cfg.train_config();
    // hold validation out before expanding the training split with
    // translated condition variants, so no variant leaks a val pair
    let (train_idx, val_idx) = split_indices(samples.len(), tcfg.split_fraction, tcfg.seed);
    let mut all = samples.clone();
    let mut groups: Vec<Vec<usize>> = train_idx.iter().map(|&i| vec![i]).collect();
    if cfg.cfm_shift_variants > 0 {
        let mut srng = Rng::derive(cfg.seed, 0x5f17);
        for (g, &i) in groups.iter_mut().zip(&train_idx) {
            let variants = shifted_variants(
                &all[i],
                &pairs[i].scene,
                &encoder,
                cfg.cfm_shift_variants,
                cfg.cfm_shift_px,
                &mut srng,
            )?;
            for v in variants {
                g.push(all.len());
                all.push(v);
            }
        }
    }
    let mut net = VelocityNet::new(cfg.output_activation, &mut Rng::derive(cfg.seed, 0xcf));
    let report = fit_grouped(&mut net, &all, &groups, &val_idx, &tcfg)?;
    Ok(TrainedModels {
        encoder,
        net,
        ae_history,
        report,
        samples,
        val_idx,
    })
}
