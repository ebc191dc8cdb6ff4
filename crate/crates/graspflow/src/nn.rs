//! Reverse-mode layer stack: affine, batch normalization, SiLU/ReLU,
//! mean-squared error, and an Adam optimizer. Everything is f64.
//!
//! Each layer records the forward intermediates it needs (its slice of
//! the gradient tape); `Mlp::backward` replays the blocks in exact
//! reverse order and accumulates parameter gradients. Calling backward
//! without a preceding train-mode forward is an error.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Silu,
    Relu,
}

impl Activation {
    pub fn tag(&self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Silu => 1,
            Activation::Relu => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Silu),
            2 => Ok(Activation::Relu),
            other => Err(Error::Data(format!("unknown activation tag {other}"))),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Affine layer y = x·W + b with W stored (in × out) row-major.
#[derive(Debug, Clone)]
pub struct Affine {
    pub w: Tensor2,
    pub b: Vec<f64>,
    pub gw: Tensor2,
    pub gb: Vec<f64>,
    cache_x: Option<Tensor2>,
}

impl Affine {
    pub fn new(input: usize, output: usize) -> Self {
        Affine {
            w: Tensor2::zeros(input, output),
            b: vec![0.0; output],
            gw: Tensor2::zeros(input, output),
            gb: vec![0.0; output],
            cache_x: None,
        }
    }

    pub fn init(&mut self, rng: &mut Rng) {
        // symmetric uniform init, biases zero
        let bound = (6.0 / (self.w.rows + self.w.cols) as f64).sqrt();
        for v in self.w.data.iter_mut() {
            *v = rng.range(-bound, bound);
        }
        self.b.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn forward(&mut self, x: &Tensor2, record: bool) -> Result<Tensor2> {
        let mut y = x.matmul(&self.w)?;
        for i in 0..y.rows {
            for j in 0..y.cols {
                y.data[i * y.cols + j] += self.b[j];
            }
        }
        if record {
            self.cache_x = Some(x.clone());
        }
        Ok(y)
    }

    /// Shared-state forward for frozen inference.
    pub fn infer(&self, x: &Tensor2) -> Result<Tensor2> {
        let mut y = x.matmul(&self.w)?;
        for i in 0..y.rows {
            for j in 0..y.cols {
                y.data[i * y.cols + j] += self.b[j];
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor2) -> Result<Tensor2> {
        let x = self
            .cache_x
            .take()
            .ok_or_else(|| Error::Usage("affine backward without forward".into()))?;
        let gw = x.t_matmul(dy)?;
        for (a, b) in self.gw.data.iter_mut().zip(&gw.data) {
            *a += b;
        }
        for i in 0..dy.rows {
            for j in 0..dy.cols {
                self.gb[j] += dy.get(i, j);
            }
        }
        dy.matmul_t(&self.w)
    }
}

struct BnCache {
    xhat: Tensor2,
    inv_std: Vec<f64>,
}

/// Per-feature batch normalization with running statistics.
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    pub g_gamma: Vec<f64>,
    pub g_beta: Vec<f64>,
    cache: Option<BnCache>,
}

impl BatchNorm {
    pub fn new(features: usize, momentum: f64, eps: f64) -> Self {
        BatchNorm {
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum,
            eps,
            g_gamma: vec![0.0; features],
            g_beta: vec![0.0; features],
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor2, mode: Mode) -> Result<Tensor2> {
        match mode {
            Mode::Eval => Ok(self.infer(x)),
            Mode::Train => {
                let n = x.rows;
                if n < 2 {
                    return Err(Error::Usage(
                        "batch normalization requires batch size >= 2 in train mode".into(),
                    ));
                }
                let f = x.cols;
                let mut mean = vec![0.0; f];
                for i in 0..n {
                    for j in 0..f {
                        mean[j] += x.get(i, j);
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n as f64);
                let mut var = vec![0.0; f];
                for i in 0..n {
                    for j in 0..f {
                        let d = x.get(i, j) - mean[j];
                        var[j] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);

                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
                let mut xhat = Tensor2::zeros(n, f);
                let mut y = Tensor2::zeros(n, f);
                for i in 0..n {
                    for j in 0..f {
                        let h = (x.get(i, j) - mean[j]) * inv_std[j];
                        xhat.set(i, j, h);
                        y.set(i, j, self.gamma[j] * h + self.beta[j]);
                    }
                }
                // running stats: unbiased variance, conventional momentum
                let unbias = n as f64 / (n as f64 - 1.0);
                for j in 0..f {
                    self.running_mean[j] =
                        (1.0 - self.momentum) * self.running_mean[j] + self.momentum * mean[j];
                    self.running_var[j] = (1.0 - self.momentum) * self.running_var[j]
                        + self.momentum * var[j] * unbias;
                }
                self.cache = Some(BnCache { xhat, inv_std });
                Ok(y)
            }
        }
    }

    pub fn infer(&self, x: &Tensor2) -> Tensor2 {
        let mut y = Tensor2::zeros(x.rows, x.cols);
        for j in 0..x.cols {
            let scale = self.gamma[j] / (self.running_var[j] + self.eps).sqrt();
            let shift = self.beta[j] - scale * self.running_mean[j];
            for i in 0..x.rows {
                y.set(i, j, scale * x.get(i, j) + shift);
            }
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor2) -> Result<Tensor2> {
        let BnCache { xhat, inv_std } = self
            .cache
            .take()
            .ok_or_else(|| Error::Usage("batchnorm backward without forward".into()))?;
        let n = dy.rows as f64;
        let f = dy.cols;
        let mut sum_dy = vec![0.0; f];
        let mut sum_dy_xhat = vec![0.0; f];
        for i in 0..dy.rows {
            for j in 0..f {
                sum_dy[j] += dy.get(i, j);
                sum_dy_xhat[j] += dy.get(i, j) * xhat.get(i, j);
            }
        }
        for j in 0..f {
            self.g_gamma[j] += sum_dy_xhat[j];
            self.g_beta[j] += sum_dy[j];
        }
        let mut dx = Tensor2::zeros(dy.rows, f);
        for i in 0..dy.rows {
            for j in 0..f {
                let term =
                    dy.get(i, j) - sum_dy[j] / n - xhat.get(i, j) * sum_dy_xhat[j] / n;
                dx.set(i, j, self.gamma[j] * inv_std[j] * term);
            }
        }
        Ok(dx)
    }
}

/// affine (+ optional batch norm) + activation.
pub struct Block {
    pub affine: Affine,
    pub bn: Option<BatchNorm>,
    pub act: Activation,
    act_cache: Option<Tensor2>,
}

/// Batch-norm defaults: momentum 0.1, epsilon 1e-5.
pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

impl Block {
    pub fn new(input: usize, output: usize, bn: bool, act: Activation) -> Self {
        Block {
            affine: Affine::new(input, output),
            bn: bn.then(|| BatchNorm::new(output, BN_MOMENTUM, BN_EPS)),
            act,
            act_cache: None,
        }
    }

    fn apply_act(&self, z: &Tensor2) -> Tensor2 {
        match self.act {
            Activation::Identity => z.clone(),
            Activation::Silu => z.map(silu),
            Activation::Relu => z.map(relu),
        }
    }

    pub fn forward(&mut self, x: &Tensor2, mode: Mode) -> Result<Tensor2> {
        let record = mode == Mode::Train;
        let mut z = self.affine.forward(x, record)?;
        if let Some(bn) = self.bn.as_mut() {
            z = bn.forward(&z, mode)?;
        }
        let y = self.apply_act(&z);
        if record {
            self.act_cache = Some(z);
        }
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor2) -> Result<Tensor2> {
        let mut z = self.affine.infer(x)?;
        if let Some(bn) = self.bn.as_ref() {
            z = bn.infer(&z);
        }
        Ok(self.apply_act(&z))
    }

    pub fn backward(&mut self, dy: &Tensor2) -> Result<Tensor2> {
        let z = self
            .act_cache
            .take()
            .ok_or_else(|| Error::Usage("block backward without forward".into()))?;
        let dz = match self.act {
            Activation::Identity => dy.clone(),
            Activation::Silu => {
                let mut d = dy.clone();
                for (g, &zv) in d.data.iter_mut().zip(&z.data) {
                    *g *= silu_grad(zv);
                }
                d
            }
            Activation::Relu => {
                let mut d = dy.clone();
                for (g, &zv) in d.data.iter_mut().zip(&z.data) {
                    if zv <= 0.0 {
                        *g = 0.0;
                    }
                }
                d
            }
        };
        let dz = match self.bn.as_mut() {
            Some(bn) => bn.backward(&dz)?,
            None => dz,
        };
        self.affine.backward(&dz)
    }
}

/// Shape/activation descriptor of one block, used by checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub input: usize,
    pub output: usize,
    pub bn: bool,
    pub act: Activation,
}

/// A fixed feed-forward stack of [`Block`]s.
pub struct Mlp {
    pub blocks: Vec<Block>,
}

impl Mlp {
    pub fn new(specs: &[BlockSpec]) -> Self {
        Mlp {
            blocks: specs
                .iter()
                .map(|s| Block::new(s.input, s.output, s.bn, s.act))
                .collect(),
        }
    }

    pub fn specs(&self) -> Vec<BlockSpec> {
        self.blocks
            .iter()
            .map(|b| BlockSpec {
                input: b.affine.w.rows,
                output: b.affine.w.cols,
                bn: b.bn.is_some(),
                act: b.act,
            })
            .collect()
    }

    pub fn init(&mut self, rng: &mut Rng) {
        for b in self.blocks.iter_mut() {
            b.affine.init(rng);
        }
    }

    pub fn forward(&mut self, x: &Tensor2, mode: Mode) -> Result<Tensor2> {
        self.forward_range(x, mode, 0, self.blocks.len())
    }

    /// Forward through blocks[from..to] only (e.g. the encoder half of an
    /// autoencoder).
    pub fn forward_range(
        &mut self,
        x: &Tensor2,
        mode: Mode,
        from: usize,
        to: usize,
    ) -> Result<Tensor2> {
        let mut y = x.clone();
        for b in &mut self.blocks[from..to] {
            y = b.forward(&y, mode)?;
        }
        if !y.is_finite() {
            return Err(Error::Numerical("non-finite forward output".into()));
        }
        Ok(y)
    }

    /// Eval-mode forward on shared state; safe from multiple threads.
    pub fn infer(&self, x: &Tensor2) -> Result<Tensor2> {
        self.infer_range(x, 0, self.blocks.len())
    }

    pub fn infer_range(&self, x: &Tensor2, from: usize, to: usize) -> Result<Tensor2> {
        let mut y = x.clone();
        for b in &self.blocks[from..to] {
            y = b.infer(&y)?;
        }
        if !y.is_finite() {
            return Err(Error::Numerical("non-finite inference output".into()));
        }
        Ok(y)
    }

    pub fn backward(&mut self, dloss: &Tensor2) -> Result<Tensor2> {
        let mut d = dloss.clone();
        for b in self.blocks.iter_mut().rev() {
            d = b.backward(&d)?;
        }
        Ok(d)
    }

    pub fn zero_grad(&mut self) {
        for b in self.blocks.iter_mut() {
            b.affine.gw.data.iter_mut().for_each(|g| *g = 0.0);
            b.affine.gb.iter_mut().for_each(|g| *g = 0.0);
            if let Some(bn) = b.bn.as_mut() {
                bn.g_gamma.iter_mut().for_each(|g| *g = 0.0);
                bn.g_beta.iter_mut().for_each(|g| *g = 0.0);
            }
        }
    }

    /// Visit (parameter, gradient) slices of the trainable parameters in
    /// fixed forward order: per block W, b, then gamma, beta.
    pub fn visit_trainable(&mut self, mut f: impl FnMut(&mut [f64], &[f64])) {
        for b in self.blocks.iter_mut() {
            f(&mut b.affine.w.data, &b.affine.gw.data);
            f(&mut b.affine.b, &b.affine.gb);
            if let Some(bn) = b.bn.as_mut() {
                f(&mut bn.gamma, &bn.g_gamma);
                f(&mut bn.beta, &bn.g_beta);
            }
        }
    }

    pub fn trainable_len(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| {
                b.affine.w.data.len()
                    + b.affine.b.len()
                    + b.bn.as_ref().map_or(0, |bn| bn.gamma.len() * 2)
            })
            .sum()
    }

    /// All state in checkpoint order: per block W row-major, b, then if
    /// batch-normed gamma, beta, running_mean, running_var.
    pub fn state_blob(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend_from_slice(&b.affine.w.data);
            out.extend_from_slice(&b.affine.b);
            if let Some(bn) = b.bn.as_ref() {
                out.extend_from_slice(&bn.gamma);
                out.extend_from_slice(&bn.beta);
                out.extend_from_slice(&bn.running_mean);
                out.extend_from_slice(&bn.running_var);
            }
        }
        out
    }

    pub fn load_blob(&mut self, blob: &[f64]) -> Result<()> {
        let mut pos = 0usize;
        let mut take = |dst: &mut [f64]| -> Result<()> {
            let end = pos + dst.len();
            if end > blob.len() {
                return Err(Error::Data("checkpoint parameter blob too short".into()));
            }
            dst.copy_from_slice(&blob[pos..end]);
            pos = end;
            Ok(())
        };
        for b in self.blocks.iter_mut() {
            take(&mut b.affine.w.data)?;
            take(&mut b.affine.b)?;
            if let Some(bn) = b.bn.as_mut() {
                take(&mut bn.gamma)?;
                take(&mut bn.beta)?;
                take(&mut bn.running_mean)?;
                take(&mut bn.running_var)?;
            }
        }
        if pos != blob.len() {
            return Err(Error::Data(format!(
                "checkpoint parameter blob has {} extra values",
                blob.len() - pos
            )));
        }
        Ok(())
    }
}

/// Mean squared error over all entries.
pub fn mse(pred: &Tensor2, target: &Tensor2) -> Result<f64> {
    if pred.rows != target.rows || pred.cols != target.cols {
        return Err(Error::Data(format!(
            "mse shape mismatch: {}x{} vs {}x{}",
            pred.rows, pred.cols, target.rows, target.cols
        )));
    }
    let n = (pred.rows * pred.cols) as f64;
    let s: f64 = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(s / n)
}

/// Gradient of [`mse`] with respect to `pred`: 2/N (pred − target).
pub fn mse_grad(pred: &Tensor2, target: &Tensor2) -> Result<Tensor2> {
    if pred.rows != target.rows || pred.cols != target.cols {
        return Err(Error::Data("mse shape mismatch".into()));
    }
    let n = (pred.rows * pred.cols) as f64;
    let mut g = Tensor2::zeros(pred.rows, pred.cols);
    for (o, (p, t)) in g.data.iter_mut().zip(pred.data.iter().zip(&target.data)) {
        *o = 2.0 * (p - t) / n;
    }
    Ok(g)
}

/// Adam with bias correction over an [`Mlp`]'s trainable parameters.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay (AdamW); 0 disables it.
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, param_count: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    /// One update step. A non-finite gradient anywhere aborts before any
    /// parameter is mutated.
    pub fn step(&mut self, mlp: &mut Mlp) -> Result<()> {
        let mut finite = true;
        mlp.visit_trainable(|_, g| {
            if !g.iter().all(|x| x.is_finite()) {
                finite = false;
            }
        });
        if !finite {
            return Err(Error::Numerical("non-finite gradient in Adam step".into()));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (lr, b1, b2, eps, wd) = (self.lr, self.beta1, self.beta2, self.eps, self.weight_decay);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut off = 0usize;
        mlp.visit_trainable(|p, g| {
            for k in 0..p.len() {
                let i = off + k;
                m[i] = b1 * m[i] + (1.0 - b1) * g[k];
                v[i] = b2 * v[i] + (1.0 - b2) * g[k] * g[k];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[k] -= lr * (mhat / (vhat.sqrt() + eps) + wd * p[k]);
            }
            off += p.len();
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_tensor(rows: usize, cols: usize, rng: &mut Rng) -> Tensor2 {
        Tensor2::from_fn(rows, cols, |_, _| rng.range(-1.0, 1.0))
    }

    #[test]
    fn affine_identity_weights() {
        let mut layer = Affine::new(3, 3);
        for i in 0..3 {
            layer.w.set(i, i, 1.0);
        }
        let x = Tensor2::from_vec(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]).unwrap();
        let y = layer.forward(&x, false).unwrap();
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn affine_zero_input_gives_bias() {
        let mut rng = Rng::seeded(1);
        let mut layer = Affine::new(4, 2);
        layer.init(&mut rng);
        layer.b = vec![0.3, -0.7];
        let y = layer.forward(&Tensor2::zeros(3, 4), false).unwrap();
        for i in 0..3 {
            assert_eq!(y.row(i), &[0.3, -0.7]);
        }
    }

    #[test]
    fn activation_values() {
        assert_eq!(silu(0.0), 0.0);
        assert_eq!(relu(-2.5), 0.0);
        assert_eq!(relu(2.5), 2.5);
        assert!((silu(1.0) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn batchnorm_normalizes_and_eval_identity() {
        let mut bn = BatchNorm::new(2, BN_MOMENTUM, BN_EPS);
        // columns with exact mean 0 and population variance 1
        let a = (3.0f64 / 2.0).sqrt();
        let x = Tensor2::from_vec(3, 2, vec![-a, a, 0.0, 0.0, a, -a]).unwrap();
        let y = bn.forward(&x, Mode::Train).unwrap();
        for (yv, xv) in y.data.iter().zip(&x.data) {
            assert!((yv - xv).abs() < 1e-5);
        }

        // eval mode with default running stats is the identity
        let mut bn = BatchNorm::new(2, BN_MOMENTUM, BN_EPS);
        let y = bn.forward(&x, Mode::Eval).unwrap();
        for (yv, xv) in y.data.iter().zip(&x.data) {
            assert!((yv - xv).abs() < 1e-5 * xv.abs().max(1.0));
        }
    }

    #[test]
    fn batchnorm_constant_column_goes_to_zero() {
        let mut bn = BatchNorm::new(1, BN_MOMENTUM, BN_EPS);
        let x = Tensor2::from_vec(4, 1, vec![0.7; 4]).unwrap();
        let y = bn.forward(&x, Mode::Train).unwrap();
        for v in &y.data {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn batchnorm_rejects_batch_of_one() {
        let mut bn = BatchNorm::new(2, BN_MOMENTUM, BN_EPS);
        let x = Tensor2::zeros(1, 2);
        assert!(bn.forward(&x, Mode::Train).is_err());
    }

    #[test]
    fn batchnorm_train_stats() {
        // pre-gamma/beta output has per-feature mean ~0 and variance ~1.
        // Data variance is made large so the epsilon floor is negligible.
        let mut rng = Rng::seeded(9);
        let mut bn = BatchNorm::new(5, BN_MOMENTUM, BN_EPS);
        let x = Tensor2::from_fn(64, 5, |_, _| rng.range(-100.0, 100.0));
        let y = bn.forward(&x, Mode::Train).unwrap();
        for j in 0..5 {
            let mut mean = 0.0;
            for i in 0..64 {
                mean += y.get(i, j);
            }
            mean /= 64.0;
            assert!(mean.abs() < 1e-9);
            let mut var = 0.0;
            for i in 0..64 {
                var += (y.get(i, j) - mean).powi(2);
            }
            var /= 64.0;
            assert!((var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mse_values() {
        let a = Tensor2::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = a.map(|x| x + 1.0);
        assert_eq!(mse(&b, &a).unwrap(), 1.0);

        // scalar-loop oracle on a random pair
        let mut rng = Rng::seeded(5);
        let p = random_tensor(4, 6, &mut rng);
        let t = random_tensor(4, 6, &mut rng);
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..6 {
                acc += (p.get(i, j) - t.get(i, j)).powi(2);
            }
        }
        assert!((mse(&p, &t).unwrap() - acc / 24.0).abs() < 1e-12);
    }

    #[test]
    fn mse_rejects_shape_mismatch() {
        let a = Tensor2::zeros(2, 2);
        let b = Tensor2::zeros(2, 3);
        assert!(mse(&a, &b).is_err());
    }

    #[test]
    fn single_affine_analytic_gradient() {
        // dL/dW = 2/N xᵀ(y−t) for L = mean over entries
        let mut rng = Rng::seeded(11);
        let mut mlp = Mlp::new(&[BlockSpec {
            input: 3,
            output: 2,
            bn: false,
            act: Activation::Identity,
        }]);
        mlp.init(&mut rng);
        let x = random_tensor(5, 3, &mut rng);
        let t = random_tensor(5, 2, &mut rng);
        let y = mlp.forward(&x, Mode::Train).unwrap();
        mlp.zero_grad();
        mlp.backward(&mse_grad(&y, &t).unwrap()).unwrap();
        let n = 10.0;
        for i in 0..3 {
            for j in 0..2 {
                let mut expect = 0.0;
                for r in 0..5 {
                    expect += x.get(r, i) * (y.get(r, j) - t.get(r, j));
                }
                expect *= 2.0 / n;
                assert!((mlp.blocks[0].affine.gw.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_loss_grad_gives_zero_param_grads() {
        let mut rng = Rng::seeded(12);
        let mut mlp = Mlp::new(&[
            BlockSpec {
                input: 4,
                output: 6,
                bn: true,
                act: Activation::Silu,
            },
            BlockSpec {
                input: 6,
                output: 3,
                bn: false,
                act: Activation::Identity,
            },
        ]);
        mlp.init(&mut rng);
        let x = random_tensor(4, 4, &mut rng);
        let _ = mlp.forward(&x, Mode::Train).unwrap();
        mlp.zero_grad();
        mlp.backward(&Tensor2::zeros(4, 3)).unwrap();
        mlp.visit_trainable(|_, g| {
            assert!(g.iter().all(|&v| v == 0.0));
        });
    }

    #[test]
    fn backward_without_forward_errors() {
        let mut mlp = Mlp::new(&[BlockSpec {
            input: 2,
            output: 2,
            bn: false,
            act: Activation::Identity,
        }]);
        assert!(mlp.backward(&Tensor2::zeros(1, 2)).is_err());
    }

    /// Central finite-difference gradient of the MSE loss with respect to
    /// every trainable parameter; the independent oracle for backward.
    pub(crate) fn finite_diff_check(
        mlp: &mut Mlp,
        x: &Tensor2,
        t: &Tensor2,
        h: f64,
        tol: f64,
    ) {
        let y = mlp.forward(x, Mode::Train).unwrap();
        mlp.zero_grad();
        mlp.backward(&mse_grad(&y, t).unwrap()).unwrap();

        let mut analytic = Vec::new();
        mlp.visit_trainable(|_, g| analytic.extend_from_slice(g));

        // Probing every parameter of a big net is too slow; sample a
        // fixed stride across the whole parameter vector instead.
        let nparams = analytic.len();
        let stride = (nparams / 200).max(1);
        let mut probed = 0usize;
        let mut k = 0usize;
        while k < nparams {
            let grad = analytic[k];
            let loss_at = |mlp: &mut Mlp, delta: f64, k: usize| -> f64 {
                let mut off = 0usize;
                let mut old = 0.0;
                mlp.visit_trainable(|p, _| {
                    if k >= off && k < off + p.len() {
                        old = p[k - off];
                        p[k - off] += delta;
                    }
                    off += p.len();
                });
                // snapshot running stats so train-mode probes do not drift
                let saved: Vec<Vec<f64>> = mlp
                    .blocks
                    .iter()
                    .flat_map(|b| {
                        b.bn.as_ref()
                            .map(|bn| vec![bn.running_mean.clone(), bn.running_var.clone()])
                            .unwrap_or_default()
                    })
                    .collect();
                let y = mlp.forward(x, Mode::Train).unwrap();
                let l = mse(&y, t).unwrap();
                let mut it = saved.into_iter();
                for b in mlp.blocks.iter_mut() {
                    if let Some(bn) = b.bn.as_mut() {
                        bn.running_mean = it.next().unwrap();
                        bn.running_var = it.next().unwrap();
                    }
                }
                // restore parameter
                let mut off = 0usize;
                mlp.visit_trainable(|p, _| {
                    if k >= off && k < off + p.len() {
                        p[k - off] = old;
                    }
                    off += p.len();
                });
                l
            };
            let lp = loss_at(mlp, h, k);
            let lm = loss_at(mlp, -h, k);
            let numeric = (lp - lm) / (2.0 * h);
            // below the central-difference noise floor both estimates are
            // indistinguishable from zero
            if grad.abs() < 1e-7 && numeric.abs() < 1e-7 {
                probed += 1;
                k += stride;
                continue;
            }
            let denom = grad.abs().max(numeric.abs()).max(1e-8);
            let rel = (grad - numeric).abs() / denom;
            assert!(
                rel < tol,
                "param {k}: analytic {grad} vs numeric {numeric} (rel {rel})"
            );
            probed += 1;
            k += stride;
        }
        assert!(probed > 0);
    }

    #[test]
    fn gradient_check_small_net() {
        let mut rng = Rng::seeded(21);
        let mut mlp = Mlp::new(&[
            BlockSpec {
                input: 5,
                output: 8,
                bn: true,
                act: Activation::Silu,
            },
            BlockSpec {
                input: 8,
                output: 6,
                bn: true,
                act: Activation::Relu,
            },
            BlockSpec {
                input: 6,
                output: 3,
                bn: false,
                act: Activation::Identity,
            },
        ]);
        mlp.init(&mut rng);
        let x = random_tensor(8, 5, &mut rng);
        let t = random_tensor(8, 3, &mut rng);
        finite_diff_check(&mut mlp, &x, &t, 1e-5, 1e-4);
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut rng = Rng::seeded(31);
        let mut mlp = Mlp::new(&[BlockSpec {
            input: 3,
            output: 3,
            bn: false,
            act: Activation::Identity,
        }]);
        mlp.init(&mut rng);
        let before = mlp.state_blob();
        let mut opt = Adam::new(1e-3, mlp.trainable_len());
        mlp.zero_grad();
        opt.step(&mut mlp).unwrap();
        assert_eq!(mlp.state_blob(), before);
    }

    #[test]
    fn adam_first_step_magnitude() {
        // constant gradient, step 1: bias-corrected update magnitude ~ lr
        let mut mlp = Mlp::new(&[BlockSpec {
            input: 1,
            output: 1,
            bn: false,
            act: Activation::Identity,
        }]);
        mlp.blocks[0].affine.gw.data[0] = 0.37;
        mlp.blocks[0].affine.gb[0] = 0.0;
        let before = mlp.blocks[0].affine.w.data[0];
        let mut opt = Adam::new(1e-3, mlp.trainable_len());
        opt.step(&mut mlp).unwrap();
        let delta = (mlp.blocks[0].affine.w.data[0] - before).abs();
        assert!((delta - 1e-3).abs() < 1e-6);
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut mlp = Mlp::new(&[BlockSpec {
            input: 1,
            output: 1,
            bn: false,
            act: Activation::Identity,
        }]);
        mlp.blocks[0].affine.gw.data[0] = f64::NAN;
        let before = mlp.blocks[0].affine.w.data[0];
        let mut opt = Adam::new(1e-3, mlp.trainable_len());
        assert!(opt.step(&mut mlp).is_err());
        assert_eq!(mlp.blocks[0].affine.w.data[0], before);
    }

    #[test]
    fn adam_minimizes_quadratic_bowl() {
        // f(w) = |w|^2 on a 1-layer bias vector; 500 steps at lr 1e-2
        let mut mlp = Mlp::new(&[BlockSpec {
            input: 1,
            output: 4,
            bn: false,
            act: Activation::Identity,
        }]);
        mlp.blocks[0].affine.b = vec![0.5, -0.5, 0.5, -0.5]; // |w| = 1
        let mut opt = Adam::new(1e-2, mlp.trainable_len());
        for _ in 0..500 {
            mlp.zero_grad();
            for j in 0..4 {
                mlp.blocks[0].affine.gb[j] = 2.0 * mlp.blocks[0].affine.b[j];
            }
            opt.step(&mut mlp).unwrap();
        }
        let norm: f64 = mlp.blocks[0]
            .affine
            .b
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        assert!(norm < 1e-3, "norm {norm}");
    }

    #[test]
    fn state_blob_round_trip() {
        let mut rng = Rng::seeded(41);
        let specs = [
            BlockSpec {
                input: 4,
                output: 5,
                bn: true,
                act: Activation::Silu,
            },
            BlockSpec {
                input: 5,
                output: 2,
                bn: false,
                act: Activation::Identity,
            },
        ];
        let mut a = Mlp::new(&specs);
        a.init(&mut rng);
        let blob = a.state_blob();
        let mut b = Mlp::new(&specs);
        b.load_blob(&blob).unwrap();
        assert_eq!(a.state_blob(), b.state_blob());
        assert!(b.load_blob(&blob[..blob.len() - 1]).is_err());
    }
}
