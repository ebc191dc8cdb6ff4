//! Conditional velocity network v(g_t, t, c) and its training loop.
//!
//! The network regresses the constant displacement between a paired
//! rigid/soft pose along the straight interpolation path, conditioned on
//! the scene latent. Loss is mean squared error over the batch and over
//! the 7 output components.

use crate::encoder::COND_DIM;
use crate::error::{Error, Result};
use crate::nn::{mse, mse_grad, Activation, Adam, BlockSpec, Mlp, Mode};
use crate::ode::VectorField;
use crate::pose::{
    interpolate_pose, quat_dot, quat_from_yaw, quat_mul, quat_normalize, target_velocity,
    PoseVec7,
    Velocity7,
};
use crate::rng::Rng;
use crate::tensor::Tensor2;

/// Network input: 7 pose + 1 progression + 128 condition.
pub const INPUT_DIM: usize = 7 + 1 + COND_DIM;
pub const OUTPUT_DIM: usize = 7;
/// Hidden layer widths.
pub const HIDDEN: [usize; 4] = [128, 256, 256, 128];

/// One training pair with its frozen scene condition. The progression
/// time and interpolated state are drawn fresh at batch time.
#[derive(Debug, Clone)]
pub struct FlowSample {
    pub g_rigid: PoseVec7,
    pub g_soft: PoseVec7,
    pub condition: Vec<f64>,
}

impl FlowSample {
    /// Interpolated state and target velocity at progression time `t_c`.
    pub fn at(&self, t_c: f64) -> Result<(PoseVec7, Velocity7)> {
        let g_t = interpolate_pose(&self.g_rigid, &self.g_soft, t_c)?;
        Ok((g_t, target_velocity(&self.g_rigid, &self.g_soft)))
    }

    /// Like `at`, but on a symmetry-transformed copy of the pair. The
    /// correction preserves the grasp yaw, recenters laterally on the
    /// object, and sets a scene-determined depth, so the pair family is
    /// closed under four condition-free transforms (the scene, hence the
    /// latent, is unchanged by all of them):
    /// - `yaw`: rigidly rotate grasp and target about the vertical axis
    ///   through the object center (target yaw follows);
    /// - `offset_rot`: rotate the lateral offset of the start pose about
    ///   the center (the target does not depend on offset direction);
    /// - `azim_rot`: rotate the tilt azimuth of the start orientation
    ///   (the target depends only on the yaw component);
    /// - `scale`: move the start along the correction path,
    ///   g0' = (1+s)·g0 − s·g1 renormalized; s > 0 amplifies the
    ///   deviation, s ∈ (−1, 0) shrinks it, s = −1 is the fixed point.
    pub fn at_augmented(&self, aug: &RowAug, t_c: f64) -> Result<(PoseVec7, Velocity7)> {
        if aug.is_identity() {
            return self.at(t_c);
        }
        let (start, target) = augment_pair(&self.g_rigid, &self.g_soft, aug);
        let g_t = interpolate_pose(&start, &target, t_c)?;
        Ok((g_t, target_velocity(&start, &target)))
    }
}

/// Translated copies of a flow sample: the pair's scene is re-rendered
/// at a translated position and re-encoded as a fresh condition, while
/// both poses translate by the same world offset — an exact joint
/// symmetry of scene, proposal, and correction. The dataset's distinct
/// scene placements are sparse relative to the placement jitter, so
/// these variants are what lets the field interpolate conditions for
/// scene positions it never saw. `max_shift_px` is in pixels of the
/// depth image, matching the autoencoder's augmentation unit.
pub fn shifted_variants(
    sample: &FlowSample,
    scene: &crate::scene::SceneSpec,
    enc: &crate::encoder::AutoencoderNet,
    count: usize,
    max_shift_px: f64,
    rng: &mut Rng,
) -> Result<Vec<FlowSample>> {
    use crate::scene::{render_depth, IMG_RES, WORKSPACE};
    let m_per_px = WORKSPACE / IMG_RES as f64;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let wx = rng.range(-max_shift_px, max_shift_px) * m_per_px;
        let wy = rng.range(-max_shift_px, max_shift_px) * m_per_px;
        let mut moved = scene.clone();
        moved.position[0] += wx;
        moved.position[1] += wy;
        let condition = enc.encode(&render_depth(&moved))?;
        let mut g_rigid = sample.g_rigid;
        let mut g_soft = sample.g_soft;
        g_rigid.0[4] += wx;
        g_rigid.0[5] += wy;
        g_soft.0[4] += wx;
        g_soft.0[5] += wy;
        out.push(FlowSample {
            g_rigid,
            g_soft,
            condition,
        });
    }
    Ok(out)
}

/// Condition-free pair transform parameters; see [`FlowSample::at_augmented`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RowAug {
    pub scale: f64,
    pub yaw: f64,
    pub offset_rot: f64,
    pub azim_rot: f64,
}

impl RowAug {
    pub fn is_identity(&self) -> bool {
        self.scale == 0.0 && self.yaw == 0.0 && self.offset_rot == 0.0 && self.azim_rot == 0.0
    }
}

fn rot_z_xy(v: &mut [f64], angle: f64) {
    let (s, c) = angle.sin_cos();
    let (x, y) = (v[0], v[1]);
    v[0] = c * x - s * y;
    v[1] = s * x + c * y;
}

/// Apply a [`RowAug`] to a hemisphere-aligned pair, returning the new
/// (start, target). Exact under the correction's symmetries.
pub fn augment_pair(g_rigid: &PoseVec7, g_soft: &PoseVec7, aug: &RowAug) -> (PoseVec7, PoseVec7) {
    let g0 = g_rigid.0;
    let g1 = g_soft.0;
    let mut q0 = [g0[0], g0[1], g0[2], g0[3]];
    let mut q1 = [g1[0], g1[1], g1[2], g1[3]];
    let center = [g1[4], g1[5]];
    let mut offset = [g0[4] - center[0], g0[5] - center[1], g0[6]];

    if aug.azim_rot != 0.0 {
        // q0 = q_tilt ⊗ q_yaw with q_yaw the normalized (w, 0, 0, z) part;
        // conjugate the tilt by a vertical rotation to move its azimuth
        let wz = (q0[0] * q0[0] + q0[3] * q0[3]).sqrt();
        if wz > 1e-9 {
            let q_yaw = [q0[0] / wz, 0.0, 0.0, q0[3] / wz];
            let q_yaw_inv = [q_yaw[0], 0.0, 0.0, -q_yaw[3]];
            let q_tilt = quat_mul(&q0, &q_yaw_inv);
            let rz = quat_from_yaw(aug.azim_rot);
            let rz_inv = [rz[0], 0.0, 0.0, -rz[3]];
            let q_tilt = quat_mul(&quat_mul(&rz, &q_tilt), &rz_inv);
            q0 = quat_normalize(&quat_mul(&q_tilt, &q_yaw));
        }
    }
    if aug.yaw != 0.0 {
        let rz = quat_from_yaw(aug.yaw);
        q0 = quat_normalize(&quat_mul(&rz, &q0));
        q1 = quat_normalize(&quat_mul(&rz, &q1));
        rot_z_xy(&mut offset, aug.yaw);
    }
    if aug.offset_rot != 0.0 {
        rot_z_xy(&mut offset, aug.offset_rot);
    }
    if quat_dot(&q0, &q1) < 0.0 {
        for q in &mut q1 {
            *q = -*q;
        }
    }
    let mut start = [
        q0[0], q0[1], q0[2], q0[3],
        center[0] + offset[0], center[1] + offset[1], offset[2],
    ];
    let target = PoseVec7([q1[0], q1[1], q1[2], q1[3], g1[4], g1[5], g1[6]]);
    if aug.scale != 0.0 {
        for k in 0..7 {
            start[k] = (1.0 + aug.scale) * start[k] - aug.scale * target.0[k];
        }
        let qn = (start[0] * start[0] + start[1] * start[1] + start[2] * start[2]
            + start[3] * start[3])
            .sqrt();
        if qn > 1e-9 {
            for q in &mut start[..4] {
                *q /= qn;
            }
        }
    }
    (PoseVec7(start), target)
}

/// Fresh progression time draw, uniform on [0, 1).
pub fn sample_tc(rng: &mut Rng) -> f64 {
    rng.f64()
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub split_fraction: f64,
    pub output_activation: Activation,
    /// Std of Gaussian noise added to condition vectors during training
    /// (augmentation; evaluation always sees clean conditions).
    pub cond_noise: f64,
    /// Decoupled weight decay applied by the optimizer.
    pub weight_decay: f64,
    /// Max path-scaling extrapolation for training rows; each row draws
    /// s uniform on [−1, aug_scale]. 0 disables path scaling.
    pub aug_scale: f64,
    /// Draw random vertical-axis symmetry rotations (grasp yaw, offset
    /// direction, tilt azimuth) per training row.
    pub aug_rotations: bool,
    /// Progression-time sampling bias: t = 1 − (1 − u)^tc_gamma. 1 is
    /// uniform; > 1 concentrates draws near t = 1, where the field must
    /// contract precisely onto the predicted target.
    pub tc_gamma: f64,
    /// Minimum number of (t, transform) draws per training pair per
    /// epoch (raised automatically so a full batch always exists).
    pub rows_per_pair: usize,
    /// Probability that a grouped training row uses the group's
    /// canonical sample rather than one of its condition variants.
    pub canonical_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
            split_fraction: 0.8,
            output_activation: Activation::Identity,
            cond_noise: 0.0,
            weight_decay: 0.0,
            aug_scale: 0.0,
            aug_rotations: false,
            tc_gamma: 1.0,
            rows_per_pair: 1,
            canonical_weight: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Usage("epochs must be >= 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Usage("split fraction must be in (0, 1)".into()));
        }
        if !(self.cond_noise >= 0.0) {
            return Err(Error::Usage("cond_noise must be non-negative".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Usage("weight_decay must be non-negative".into()));
        }
        if !(self.aug_scale >= 0.0) {
            return Err(Error::Usage("aug_scale must be non-negative".into()));
        }
        if !(self.tc_gamma > 0.0) {
            return Err(Error::Usage("tc_gamma must be positive".into()));
        }
        if self.rows_per_pair == 0 {
            return Err(Error::Usage("rows_per_pair must be >= 1".into()));
        }
        if !(self.canonical_weight >= 0.0 && self.canonical_weight <= 1.0) {
            return Err(Error::Usage("canonical_weight must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// The velocity network: four batch-normed SiLU hidden layers
/// (128, 256, 256, 128) and an affine head whose activation is
/// configurable. Identity is the default; ReLU clamps every output
/// component nonnegative, which cannot express downward motion.
pub struct VelocityNet {
    pub mlp: Mlp,
    pub output_activation: Activation,
}

impl VelocityNet {
    pub fn specs(output_activation: Activation) -> Vec<BlockSpec> {
        let widths = [INPUT_DIM, HIDDEN[0], HIDDEN[1], HIDDEN[2], HIDDEN[3]];
        let mut specs: Vec<BlockSpec> = widths
            .windows(2)
            .map(|w| BlockSpec {
                input: w[0],
                output: w[1],
                bn: true,
                act: Activation::Silu,
            })
            .collect();
        specs.push(BlockSpec {
            input: HIDDEN[3],
            output: OUTPUT_DIM,
            bn: false,
            act: output_activation,
        });
        specs
    }

    pub fn new(output_activation: Activation, rng: &mut Rng) -> Self {
        let mut mlp = Mlp::new(&Self::specs(output_activation));
        mlp.init(rng);
        VelocityNet {
            mlp,
            output_activation,
        }
    }

    pub fn from_mlp(mlp: Mlp) -> Result<Self> {
        let specs = mlp.specs();
        if specs.len() != 5
            || specs[0].input != INPUT_DIM
            || specs[4].output != OUTPUT_DIM
            || specs.iter().take(4).map(|s| s.output).collect::<Vec<_>>() != HIDDEN
        {
            return Err(Error::Data("not a velocity-net checkpoint".into()));
        }
        let output_activation = specs[4].act;
        Ok(VelocityNet {
            mlp,
            output_activation,
        })
    }

    /// Position components enter and leave the net scaled by this factor so
    /// that metre-scale coordinates (a few centimetres in magnitude) carry
    /// gradient signal comparable to the unit-scale quaternion components.
    /// External interfaces (`forward_eval`, checkpoints' eval behaviour)
    /// remain in physical units.
    pub const POS_SCALE: f64 = 10.0;

    fn input_row(g_t: &PoseVec7, t_c: f64, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != COND_DIM {
            return Err(Error::Data(format!(
                "condition has {} dims, expected {COND_DIM}",
                c.len()
            )));
        }
        if !(0.0..=1.0).contains(&t_c) {
            return Err(Error::Usage(format!("t_c={t_c} outside [0,1]")));
        }
        let mut row = Vec::with_capacity(INPUT_DIM);
        row.extend_from_slice(&g_t.0);
        for v in &mut row[4..7] {
            *v *= Self::POS_SCALE;
        }
        row.push(t_c);
        row.extend_from_slice(c);
        Ok(row)
    }

    /// Evaluate the field for one state. Eval mode (running statistics);
    /// deterministic and safe on a shared frozen net.
    pub fn forward_eval(&self, g_t: &PoseVec7, t_c: f64, c: &[f64]) -> Result<Velocity7> {
        let row = Self::input_row(g_t, t_c, c)?;
        let x = Tensor2::from_vec(1, INPUT_DIM, row)?;
        let y = self.mlp.infer(&x)?;
        let mut out = [0.0; 7];
        out.copy_from_slice(y.row(0));
        for v in &mut out[4..7] {
            *v /= Self::POS_SCALE;
        }
        Ok(Velocity7(out))
    }

    /// Train-mode batch forward (batch statistics, tape recorded).
    pub fn forward_train(&mut self, x: &Tensor2) -> Result<Tensor2> {
        self.mlp.forward(x, Mode::Train)
    }
}

/// A batch row: sample index plus its fresh progression time.
#[derive(Debug, Clone, Copy)]
pub struct BatchRow {
    pub sample: usize,
    pub t_c: f64,
}

fn batch_tensors_aug(
    samples: &[FlowSample],
    rows: &[(BatchRow, RowAug)],
) -> Result<(Tensor2, Tensor2)> {
    if rows.is_empty() {
        return Err(Error::Usage("empty batch".into()));
    }
    let mut xs = Vec::with_capacity(rows.len() * INPUT_DIM);
    let mut ts = Vec::with_capacity(rows.len() * OUTPUT_DIM);
    for (row, aug) in rows {
        let s = &samples[row.sample];
        let (g_t, mut u) = s.at_augmented(aug, row.t_c)?;
        xs.extend(VelocityNet::input_row(&g_t, row.t_c, &s.condition)?);
        for v in &mut u.0[4..7] {
            *v *= VelocityNet::POS_SCALE;
        }
        ts.extend_from_slice(&u.0);
    }
    Ok((
        Tensor2::from_vec(rows.len(), INPUT_DIM, xs)?,
        Tensor2::from_vec(rows.len(), OUTPUT_DIM, ts)?,
    ))
}

fn batch_tensors(samples: &[FlowSample], rows: &[BatchRow]) -> Result<(Tensor2, Tensor2)> {
    let rows: Vec<(BatchRow, RowAug)> =
        rows.iter().map(|r| (*r, RowAug::default())).collect();
    batch_tensors_aug(samples, &rows)
}

fn cfm_batch_loss_aug(
    net: &mut VelocityNet,
    samples: &[FlowSample],
    rows: &[(BatchRow, RowAug)],
) -> Result<f64> {
    let (x, target) = batch_tensors_aug(samples, rows)?;
    let pred = net.forward_train(&x)?;
    let loss = mse(&pred, &target)?;
    net.mlp.zero_grad();
    net.mlp.backward(&mse_grad(&pred, &target)?)?;
    Ok(loss)
}

/// Flow-matching batch loss: mean over batch and over the 7 components of
/// the squared prediction error, with gradients left on the net's tape.
pub fn cfm_batch_loss(
    net: &mut VelocityNet,
    samples: &[FlowSample],
    rows: &[BatchRow],
) -> Result<f64> {
    let (x, target) = batch_tensors(samples, rows)?;
    let pred = net.forward_train(&x)?;
    let loss = mse(&pred, &target)?;
    net.mlp.zero_grad();
    net.mlp.backward(&mse_grad(&pred, &target)?)?;
    Ok(loss)
}

/// Eval-mode batch loss, no gradients (used for validation).
pub fn cfm_eval_loss(
    net: &VelocityNet,
    samples: &[FlowSample],
    rows: &[BatchRow],
) -> Result<f64> {
    let (x, target) = batch_tensors(samples, rows)?;
    let pred = net.mlp.infer(&x)?;
    mse(&pred, &target)
}

/// Deterministic train/validation split: membership is a pure function
/// of (seed, index).
pub fn split_indices(n: usize, split_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = Rng::derive(seed, 0xb0a7);
    rng.shuffle(&mut idx);
    let n_train = ((n as f64 * split_fraction).round() as usize).clamp(1, n.max(1));
    let val = idx.split_off(n_train.min(idx.len()));
    (idx, val)
}

#[derive(Debug, Clone, Default)]
pub struct FitReport {
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
}

/// Train the velocity net. Per epoch, every training pair gets a fresh
/// t_c draw (several per pair when the dataset is smaller than one
/// batch, so batch statistics stay well-defined); rows are shuffled and
/// consumed in batches. Validation rows never influence parameters.
pub fn fit(net: &mut VelocityNet, samples: &[FlowSample], cfg: &TrainConfig) -> Result<FitReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Data("empty training dataset".into()));
    }
    let (train_idx, val_idx) = split_indices(samples.len(), cfg.split_fraction, cfg.seed);
    fit_on_split(net, samples, &train_idx, &val_idx, cfg)
}

/// Training loop with an explicit index split. An empty validation set
/// gives a validation-free run (val losses reported as NaN-free zeros
/// are avoided; the vector stays empty).
pub fn fit_on_split(
    net: &mut VelocityNet,
    samples: &[FlowSample],
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig,
) -> Result<FitReport> {
    let groups: Vec<Vec<usize>> = train_idx.iter().map(|&i| vec![i]).collect();
    fit_grouped(net, samples, &groups, val_idx, cfg)
}

/// Training loop over sample groups: each group holds one canonical
/// sample (first entry) plus synthetic variants of the same underlying
/// pair (e.g. translated condition copies). Every per-epoch row draws
/// the canonical sample half the time and a uniform variant otherwise,
/// so variants widen condition coverage without starving the dataset's
/// actual conditions of gradient signal. Grouping keeps the per-epoch
/// cost at one group = one pair regardless of how many variants exist,
/// and keeps pairs equally represented.
pub fn fit_grouped(
    net: &mut VelocityNet,
    samples: &[FlowSample],
    train_groups: &[Vec<usize>],
    val_idx: &[usize],
    cfg: &TrainConfig,
) -> Result<FitReport> {
    cfg.validate()?;
    if train_groups.is_empty() || train_groups.iter().any(|g| g.is_empty()) {
        return Err(Error::Data("empty training split".into()));
    }
    let mut rng = Rng::derive(cfg.seed, 0x7c41);
    let mut val_rng = Rng::derive(cfg.seed, 0x7c42);
    let mut opt = Adam::new(cfg.lr, net.mlp.trainable_len());
    opt.weight_decay = cfg.weight_decay;
    let batch = cfg.batch_size.max(2);
    // draw enough rows per pair that one batch of stats always exists
    let rows_per_pair = batch.div_ceil(train_groups.len()).max(cfg.rows_per_pair);
    let mut report = FitReport::default();
    for epoch in 0..cfg.epochs {
        // cosine decay to lr/1000: batch-stat noise puts the loss floor
        // at O(lr), so the tail rate controls final precision
        let progress = epoch as f64 / cfg.epochs.max(1) as f64;
        let lr_min = cfg.lr / 1000.0;
        opt.lr = lr_min + 0.5 * (cfg.lr - lr_min) * (1.0 + (std::f64::consts::PI * progress).cos());
        let mut rows: Vec<(BatchRow, RowAug)> =
            Vec::with_capacity(train_groups.len() * rows_per_pair);
        for group in train_groups {
            for _ in 0..rows_per_pair {
                let sample = if group.len() == 1 || rng.f64() < cfg.canonical_weight {
                    group[0]
                } else {
                    group[1 + rng.index(group.len() - 1)]
                };
                let mut aug = RowAug::default();
                if cfg.aug_scale > 0.0 {
                    aug.scale = rng.range(-1.0, cfg.aug_scale);
                }
                if cfg.aug_rotations {
                    let pi = std::f64::consts::PI;
                    aug.yaw = rng.range(-pi, pi);
                    aug.offset_rot = rng.range(-pi, pi);
                    aug.azim_rot = rng.range(-pi, pi);
                }
                let t_c = if cfg.tc_gamma != 1.0 {
                    1.0 - (1.0 - rng.f64()).powf(cfg.tc_gamma)
                } else {
                    sample_tc(&mut rng)
                };
                rows.push((BatchRow { sample, t_c }, aug));
            }
        }
        rng.shuffle(&mut rows);
        // fresh condition corruption every epoch; indices are unchanged
        let noisy: Vec<FlowSample>;
        let epoch_samples: &[FlowSample] = if cfg.cond_noise > 0.0 {
            noisy = samples
                .iter()
                .map(|s| FlowSample {
                    condition: s
                        .condition
                        .iter()
                        .map(|c| c + cfg.cond_noise * rng.normal())
                        .collect(),
                    ..s.clone()
                })
                .collect();
            &noisy
        } else {
            samples
        };
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        let mut start = 0usize;
        while start < rows.len() {
            let mut end = (start + batch).min(rows.len());
            // never leave a trailing single row: batch norm needs >= 2
            if rows.len() - end == 1 {
                end = rows.len();
            }
            if end - start == 1 {
                end = rows.len();
            }
            let chunk = &rows[start..end];
            let loss = cfm_batch_loss_aug(net, epoch_samples, chunk)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            opt.step(&mut net.mlp)?;
            epoch_loss += loss * chunk.len() as f64;
            seen += chunk.len();
            start = end;
        }
        report.train_losses.push(epoch_loss / seen as f64);
        if !val_idx.is_empty() {
            let val_rows: Vec<BatchRow> = val_idx
                .iter()
                .map(|&sample| BatchRow {
                    sample,
                    t_c: sample_tc(&mut val_rng),
                })
                .collect();
            let vl = cfm_eval_loss(net, samples, &val_rows)?;
            if !vl.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite validation loss at epoch {epoch}"
                )));
            }
            report.val_losses.push(vl);
        }
    }
    Ok(report)
}

/// Adapter exposing a frozen net + condition as an ODE vector field.
pub struct NetField<'a> {
    pub net: &'a VelocityNet,
    pub condition: &'a [f64],
}

impl VectorField for NetField<'_> {
    fn dim(&self) -> usize {
        OUTPUT_DIM
    }

    fn eval(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let g = PoseVec7([y[0], y[1], y[2], y[3], y[4], y[5], y[6]]);
        // adaptive solvers may probe marginally outside [0,1]
        let v = self.net.forward_eval(&g, t.clamp(0.0, 1.0), self.condition)?;
        Ok(v.0.to_vec())
    }
}
