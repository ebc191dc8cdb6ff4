//! Run configuration: defaults, `key=value` overrides, and the echo
//! written alongside every output directory.

use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::ode::{IntegratorConfig, Method};
use crate::velocity::TrainConfig;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub pairs_per_object: usize,
    pub trials_per_split: usize,
    pub ae_epochs: usize,
    pub ae_batch_size: usize,
    pub ae_lr: f64,
    pub ae_noise: f64,
    pub ae_shift_px: f64,
    pub ae_scale_jitter: f64,
    pub cfm_epochs: usize,
    pub cfm_batch_size: usize,
    pub cfm_lr: f64,
    pub cfm_cond_noise: f64,
    pub cfm_weight_decay: f64,
    pub cfm_aug_scale: f64,
    pub cfm_aug_rotations: bool,
    pub cfm_tc_gamma: f64,
    pub cfm_rows_per_pair: usize,
    /// Translated condition variants added per training pair (0 disables).
    pub cfm_shift_variants: usize,
    /// Max sub-pixel shift magnitude for those variants, in pixels.
    pub cfm_shift_px: f64,
    /// Probability a grouped training row uses the pair's canonical
    /// sample instead of one of its translated variants.
    pub cfm_canonical_weight: f64,
    pub split_fraction: f64,
    pub output_activation: Activation,
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let integ = IntegratorConfig::default();
        RunConfig {
            seed: 0,
            pairs_per_object: 15,
            trials_per_split: 200,
            ae_epochs: 800,
            ae_batch_size: 32,
            ae_lr: 1e-3,
            ae_noise: 0.02,
            ae_shift_px: 1.0,
            ae_scale_jitter: 0.03,
            cfm_epochs: 8000,
            cfm_batch_size: 32,
            cfm_lr: 1e-3,
            cfm_cond_noise: 0.02,
            cfm_weight_decay: 0.0,
            cfm_aug_scale: 0.5,
            cfm_aug_rotations: true,
            cfm_tc_gamma: 2.0,
            cfm_rows_per_pair: 2,
            cfm_shift_variants: 12,
            cfm_shift_px: 3.2,
            split_fraction: 0.8,
            output_activation: Activation::Identity,
            method: Method::Dopri5,
            rtol: integ.rtol,
            atol: integ.atol,
            initial_step: integ.initial_step,
            max_steps: integ.max_steps,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pairs_per_object == 0 {
            return Err(Error::Usage("pairs_per_object must be positive".into()));
        }
        if self.trials_per_split == 0 {
            return Err(Error::Usage("trials_per_split must be positive".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Usage("split_fraction must lie in (0, 1)".into()));
        }
        if self.ae_lr <= 0.0 || self.cfm_lr <= 0.0 {
            return Err(Error::Usage("learning rates must be positive".into()));
        }
        if self.cfm_shift_px < 0.0 {
            return Err(Error::Usage("cfm_shift_px must be >= 0".into()));
        }
        if self.ae_shift_px < 0.0 || self.ae_scale_jitter < 0.0 {
            return Err(Error::Usage("augmentation levels must be non-negative".into()));
        }
        if self.ae_noise < 0.0 || self.cfm_cond_noise < 0.0 || self.cfm_weight_decay < 0.0 {
            return Err(Error::Usage("noise and decay levels must be non-negative".into()));
        }
        if self.ae_batch_size < 2 || self.cfm_batch_size < 2 {
            return Err(Error::Usage("batch sizes must be at least 2".into()));
        }
        if self.rtol <= 0.0 || self.atol <= 0.0 {
            return Err(Error::Usage("tolerances must be positive".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step <= 1.0) {
            return Err(Error::Usage("initial_step must lie in (0, 1]".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Usage("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Apply `key=value` overrides; unknown keys are an error.
    pub fn apply_kv(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in map {
            self.apply_one(k, v)?;
        }
        self.validate()
    }

    fn apply_one(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse::<T>()
                .map_err(|_| Error::Usage(format!("bad value {value:?} for {key}")))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "pairs_per_object" => self.pairs_per_object = num(key, value)?,
            "trials_per_split" => self.trials_per_split = num(key, value)?,
            "ae_epochs" => self.ae_epochs = num(key, value)?,
            "ae_batch_size" => self.ae_batch_size = num(key, value)?,
            "ae_lr" => self.ae_lr = num(key, value)?,
            "ae_noise" => self.ae_noise = num(key, value)?,
            "ae_shift_px" => self.ae_shift_px = num(key, value)?,
            "ae_scale_jitter" => self.ae_scale_jitter = num(key, value)?,
            "cfm_epochs" => self.cfm_epochs = num(key, value)?,
            "cfm_batch_size" => self.cfm_batch_size = num(key, value)?,
            "cfm_lr" => self.cfm_lr = num(key, value)?,
            "cfm_cond_noise" => self.cfm_cond_noise = num(key, value)?,
            "cfm_weight_decay" => self.cfm_weight_decay = num(key, value)?,
            "cfm_aug_scale" => self.cfm_aug_scale = num(key, value)?,
            "cfm_tc_gamma" => self.cfm_tc_gamma = num(key, value)?,
            "cfm_shift_px" => self.cfm_shift_px = num(key, value)?,
            "cfm_shift_variants" => {
                self.cfm_shift_variants = value
                    .parse()
                    .map_err(|_| Error::Usage(format!("bad value for {key}: {value:?}")))?
            }
            "cfm_rows_per_pair" => {
                self.cfm_rows_per_pair = value
                    .parse()
                    .map_err(|_| Error::Usage(format!("bad integer for {key}: {value}")))?
            }
            "cfm_aug_rotations" => {
                self.cfm_aug_rotations = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(Error::Usage(format!("bad bool for {key}: {value}"))),
                }
            }
            "split_fraction" => self.split_fraction = num(key, value)?,
            "output_activation" => {
                self.output_activation = match value {
                    "identity" => Activation::Identity,
                    "relu" => Activation::Relu,
                    other => {
                        return Err(Error::Usage(format!(
                            "output_activation must be identity or relu, got {other:?}"
                        )))
                    }
                }
            }
            "method" => self.method = Method::parse(value)?,
            "rtol" => self.rtol = num(key, value)?,
            "atol" => self.atol = num(key, value)?,
            "initial_step" => self.initial_step = num(key, value)?,
            "max_steps" => self.max_steps = num(key, value)?,
            other => return Err(Error::Usage(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("seed".into(), self.seed.to_string());
        m.insert("pairs_per_object".into(), self.pairs_per_object.to_string());
        m.insert("trials_per_split".into(), self.trials_per_split.to_string());
        m.insert("ae_epochs".into(), self.ae_epochs.to_string());
        m.insert("ae_batch_size".into(), self.ae_batch_size.to_string());
        m.insert("ae_lr".into(), self.ae_lr.to_string());
        m.insert("ae_noise".into(), self.ae_noise.to_string());
        m.insert("ae_shift_px".into(), self.ae_shift_px.to_string());
        m.insert("ae_scale_jitter".into(), self.ae_scale_jitter.to_string());
        m.insert("cfm_epochs".into(), self.cfm_epochs.to_string());
        m.insert("cfm_batch_size".into(), self.cfm_batch_size.to_string());
        m.insert("cfm_lr".into(), self.cfm_lr.to_string());
        m.insert("cfm_cond_noise".into(), self.cfm_cond_noise.to_string());
        m.insert("cfm_weight_decay".into(), self.cfm_weight_decay.to_string());
        m.insert("cfm_aug_scale".into(), self.cfm_aug_scale.to_string());
        m.insert("cfm_aug_rotations".into(), self.cfm_aug_rotations.to_string());
        m.insert("cfm_tc_gamma".into(), self.cfm_tc_gamma.to_string());
        m.insert("cfm_rows_per_pair".into(), self.cfm_rows_per_pair.to_string());
        m.insert("cfm_shift_variants".into(), self.cfm_shift_variants.to_string());
        m.insert("cfm_shift_px".into(), self.cfm_shift_px.to_string());
        m.insert("split_fraction".into(), self.split_fraction.to_string());
        m.insert(
            "output_activation".into(),
            match self.output_activation {
                Activation::Relu => "relu",
                _ => "identity",
            }
            .into(),
        );
        m.insert("method".into(), self.method.name().into());
        m.insert("rtol".into(), self.rtol.to_string());
        m.insert("atol".into(), self.atol.to_string());
        m.insert("initial_step".into(), self.initial_step.to_string());
        m.insert("max_steps".into(), self.max_steps.to_string());
        m
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let map = crate::persist::parse_kv(&text)?;
        let mut cfg = RunConfig::default();
        cfg.apply_kv(&map)?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, crate::persist::format_kv(&self.to_kv()))?;
        Ok(())
    }

    pub fn ae_config(&self) -> crate::encoder::AeTrainConfig {
        crate::encoder::AeTrainConfig {
            epochs: self.ae_epochs,
            batch_size: self.ae_batch_size,
            lr: self.ae_lr,
            noise: self.ae_noise,
            shift_px: self.ae_shift_px,
            scale_jitter: self.ae_scale_jitter,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.cfm_epochs,
            batch_size: self.cfm_batch_size,
            lr: self.cfm_lr,
            cond_noise: self.cfm_cond_noise,
            weight_decay: self.cfm_weight_decay,
            aug_scale: self.cfm_aug_scale,
            aug_rotations: self.cfm_aug_rotations,
            tc_gamma: self.cfm_tc_gamma,
            rows_per_pair: self.cfm_rows_per_pair,
            seed: self.seed,
            split_fraction: self.split_fraction,
            output_activation: self.output_activation,
        }
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            method: self.method,
            rtol: self.rtol,
            atol: self.atol,
            initial_step: self.initial_step,
            max_steps: self.max_steps,
            ..IntegratorConfig::default()
        }
    }
}
