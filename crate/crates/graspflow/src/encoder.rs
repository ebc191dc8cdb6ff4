//! Depth-image autoencoder. The bottleneck activation is the 128-d
//! condition vector consumed by the velocity network; the decoder exists
//! only to train that bottleneck by reconstruction.

use crate::error::{Error, Result};
use crate::nn::{mse, mse_grad, Activation, Adam, BlockSpec, Mlp, Mode};
use crate::rng::Rng;
use crate::tensor::Tensor2;

/// Condition vector dimension (bottleneck width).
pub const COND_DIM: usize = 128;
/// Camera plane height: the largest valid depth reading (table plane).
pub const Z_MAX: f64 = crate::scene::CAMERA_Z;
/// Height span covered by the normalization; objects are well under this.
pub const HEIGHT_SPAN: f64 = 0.2;

/// Orthographic top-down depth image, row-major, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn uniform(width: u32, height: u32, value: f32) -> Self {
        DepthImage {
            width,
            height,
            data: vec![value; (width * height) as usize],
        }
    }

    pub fn pixels(&self) -> usize {
        (self.width * self.height) as usize
    }
}

/// Map depth to normalized height above the table, in [0, 1]: the empty
/// background reads exactly 0, taller surfaces read higher. Contrast is
/// stretched over [`HEIGHT_SPAN`] rather than the full camera range, so
/// object structure fills the value range the reconstruction loss sees.
/// Invertible via [`denormalize_depth`].
pub fn normalize_depth(img: &DepthImage) -> Result<Vec<f64>> {
    img.data
        .iter()
        .map(|&v| {
            let v = v as f64;
            if !(Z_MAX - HEIGHT_SPAN..=Z_MAX).contains(&v) {
                return Err(Error::Data(format!(
                    "depth value {v} outside [{}, {Z_MAX}]",
                    Z_MAX - HEIGHT_SPAN
                )));
            }
            Ok((Z_MAX - v) / HEIGHT_SPAN)
        })
        .collect()
}

pub fn denormalize_depth(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| Z_MAX - v * HEIGHT_SPAN).collect()
}

/// Fully-affine encoder–decoder with a fixed 128-wide bottleneck:
/// pixels→512→256→128→256→512→pixels, SiLU between affine layers.
pub struct AutoencoderNet {
    pub mlp: Mlp,
    pub input_dim: usize,
}

/// Blocks 0..3 form the encoder; the bottleneck is block 2's output.
pub const ENCODER_BLOCKS: usize = 3;

impl AutoencoderNet {
    pub fn specs(input_dim: usize) -> Vec<BlockSpec> {
        vec![
            BlockSpec {
                input: input_dim,
                output: 512,
                bn: false,
                act: Activation::Silu,
            },
            BlockSpec {
                input: 512,
                output: 256,
                bn: false,
                act: Activation::Silu,
            },
            BlockSpec {
                input: 256,
                output: COND_DIM,
                bn: false,
                act: Activation::Identity,
            },
            BlockSpec {
                input: COND_DIM,
                output: 256,
                bn: false,
                act: Activation::Silu,
            },
            BlockSpec {
                input: 256,
                output: 512,
                bn: false,
                act: Activation::Silu,
            },
            BlockSpec {
                input: 512,
                output: input_dim,
                bn: false,
                act: Activation::Identity,
            },
        ]
    }

    pub fn new(input_dim: usize, rng: &mut Rng) -> Self {
        let mut mlp = Mlp::new(&Self::specs(input_dim));
        mlp.init(rng);
        AutoencoderNet { mlp, input_dim }
    }

    pub fn from_mlp(mlp: Mlp) -> Result<Self> {
        let specs = mlp.specs();
        if specs.len() != 6 || specs[ENCODER_BLOCKS - 1].output != COND_DIM {
            return Err(Error::Data("not an autoencoder checkpoint".into()));
        }
        let input_dim = specs[0].input;
        Ok(AutoencoderNet { mlp, input_dim })
    }

    fn image_rows(&self, imgs: &[&DepthImage]) -> Result<Tensor2> {
        let mut data = Vec::with_capacity(imgs.len() * self.input_dim);
        for img in imgs {
            if img.pixels() != self.input_dim {
                return Err(Error::Data(format!(
                    "image has {} pixels, encoder expects {}",
                    img.pixels(),
                    self.input_dim
                )));
            }
            data.extend(normalize_depth(img)?);
        }
        Tensor2::from_vec(imgs.len(), self.input_dim, data)
    }

    /// Deterministic 128-d latent for one image.
    pub fn encode(&self, img: &DepthImage) -> Result<Vec<f64>> {
        let x = self.image_rows(&[img])?;
        let z = self.mlp.infer_range(&x, 0, ENCODER_BLOCKS)?;
        Ok(z.row(0).to_vec())
    }

    /// Latent for an already-normalized depth row (see [`normalize_depth`]).
    pub fn encode_normalized(&self, row: &[f64]) -> Result<Vec<f64>> {
        let x = Tensor2::from_vec(1, row.len(), row.to_vec())?;
        let z = self.mlp.infer_range(&x, 0, ENCODER_BLOCKS)?;
        Ok(z.row(0).to_vec())
    }

    /// Latents for a batch of images, one row each.
    pub fn encode_batch(&self, imgs: &[DepthImage]) -> Result<Tensor2> {
        let refs: Vec<&DepthImage> = imgs.iter().collect();
        let x = self.image_rows(&refs)?;
        self.mlp.infer_range(&x, 0, ENCODER_BLOCKS)
    }

    /// Reconstruction MSE of the frozen net on a corpus (normalized units).
    pub fn reconstruction_mse(&self, corpus: &[DepthImage]) -> Result<f64> {
        let refs: Vec<&DepthImage> = corpus.iter().collect();
        let x = self.image_rows(&refs)?;
        let y = self.mlp.infer(&x)?;
        mse(&y, &x)
    }
}

/// Train the autoencoder by reconstruction on normalized depth images.
/// Autoencoder training hyperparameters.
///
/// `noise` is the std of Gaussian pixel corruption on the input only
/// (denoising objective). `shift_px`/`scale_jitter` are equivariant
/// augmentations applied to input *and* target: random sub-pixel
/// translation (bilinear, background-padded) and random height scaling.
/// They populate the latent manifold along exactly the directions a
/// downstream reader must decode — object center and top height — so the
/// bottleneck interpolates between corpus scenes instead of memorizing
/// them.
#[derive(Debug, Clone)]
pub struct AeTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub noise: f64,
    pub shift_px: f64,
    pub scale_jitter: f64,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        AeTrainConfig {
            epochs: 800,
            batch_size: 32,
            lr: 1e-3,
            noise: 0.02,
            shift_px: 1.0,
            scale_jitter: 0.03,
        }
    }
}

/// Bilinear translation + height scaling of one normalized image row.
/// Out-of-window samples read background (0).
/// Sub-pixel translate (bilinear, background-0 padded) and height-scale a
/// normalized depth row. Shifting by (dx, dy) pixels moves the scene
/// content by the same amount in the world's +x/+y directions.
pub fn shift_scale_row(row: &[f64], w: usize, h: usize, dx: f64, dy: f64, scale: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(row.len());
    let sample = |x: f64, y: f64| -> f64 {
        if x < 0.0 || y < 0.0 {
            return 0.0;
        }
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let get = |xi: usize, yi: usize| -> f64 {
            if xi < w && yi < h {
                row[yi * w + xi]
            } else {
                0.0
            }
        };
        get(x0, y0) * (1.0 - fx) * (1.0 - fy)
            + get(x0 + 1, y0) * fx * (1.0 - fy)
            + get(x0, y0 + 1) * (1.0 - fx) * fy
            + get(x0 + 1, y0 + 1) * fx * fy
    };
    for r in 0..h {
        for c in 0..w {
            out.push(scale * sample(c as f64 - dx, r as f64 - dy));
        }
    }
    out
}

/// Returns the per-epoch training MSE history. See [`AeTrainConfig`] for
/// the corruption/augmentation knobs.
pub fn train_autoencoder(
    net: &mut AutoencoderNet,
    corpus: &[DepthImage],
    cfg: &AeTrainConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if corpus.is_empty() {
        return Err(Error::Data("autoencoder corpus is empty".into()));
    }
    let refs: Vec<&DepthImage> = corpus.iter().collect();
    let all = net.image_rows(&refs)?;
    let n = corpus.len();
    let dim = net.input_dim;
    let (w, h) = (corpus[0].width as usize, corpus[0].height as usize);
    let (epochs, lr, noise) = (cfg.epochs, cfg.lr, cfg.noise);
    let mut opt = Adam::new(lr, net.mlp.trainable_len());
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        // cosine decay to lr/1000, same schedule as the flow trainer
        let progress = epoch as f64 / epochs.max(1) as f64;
        let lr_min = lr / 1000.0;
        opt.lr = lr_min + 0.5 * (lr - lr_min) * (1.0 + (std::f64::consts::PI * progress).cos());
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let mut data = Vec::with_capacity(chunk.len() * dim);
            for &i in chunk {
                if cfg.shift_px > 0.0 || cfg.scale_jitter > 0.0 {
                    let dx = cfg.shift_px * rng.normal();
                    let dy = cfg.shift_px * rng.normal();
                    let scale = 1.0 + cfg.scale_jitter * rng.normal();
                    data.extend(shift_scale_row(all.row(i), w, h, dx, dy, scale));
                } else {
                    data.extend_from_slice(all.row(i));
                }
            }
            let clean = Tensor2::from_vec(chunk.len(), dim, data)?;
            let x = if noise > 0.0 {
                let mut corrupted = clean.clone();
                for v in corrupted.data.iter_mut() {
                    *v += noise * rng.normal();
                }
                corrupted
            } else {
                clean.clone()
            };
            let y = net.mlp.forward(&x, Mode::Train)?;
            let loss = mse(&y, &clean)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite autoencoder loss at epoch {epoch}"
                )));
            }
            net.mlp.zero_grad();
            net.mlp.backward(&mse_grad(&y, &clean)?)?;
            opt.step(&mut net.mlp)?;
            epoch_loss += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        history.push(epoch_loss / seen as f64);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_round_trip() {
        let img = DepthImage {
            width: 2,
            height: 2,
            data: vec![0.5, 0.44, 0.40, 0.36],
        };
        let n = normalize_depth(&img).unwrap();
        assert_eq!(n[0], 0.0);
        assert!(n.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let d = denormalize_depth(&n);
        for (a, b) in d.iter().zip(&img.data) {
            assert!((a - *b as f64).abs() < 1e-7);
        }
    }

    #[test]
    fn normalize_background_reads_zero_and_height_monotone() {
        let bg = DepthImage::uniform(4, 4, Z_MAX as f32);
        assert!(normalize_depth(&bg).unwrap().iter().all(|&v| v == 0.0));
        // closer surface (smaller depth) maps to a larger value
        let near = normalize_depth(&DepthImage::uniform(1, 1, 0.38)).unwrap()[0];
        let far = normalize_depth(&DepthImage::uniform(1, 1, 0.46)).unwrap()[0];
        assert!(near > far);
    }

    #[test]
    fn normalize_rejects_out_of_range() {
        let img = DepthImage::uniform(1, 1, (Z_MAX + 0.01) as f32);
        assert!(normalize_depth(&img).is_err());
        let img = DepthImage::uniform(1, 1, (Z_MAX - HEIGHT_SPAN - 0.01) as f32);
        assert!(normalize_depth(&img).is_err());
    }

    #[test]
    fn encode_is_deterministic() {
        let mut rng = Rng::seeded(5);
        let net = AutoencoderNet::new(16, &mut rng);
        let img = DepthImage {
            width: 4,
            height: 4,
            data: (0..16).map(|i| 0.5 - 0.01 * i as f32).collect(),
        };
        let a = net.encode(&img).unwrap();
        let b = net.encode(&img).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), COND_DIM);
    }

    #[test]
    fn encode_rejects_wrong_size() {
        let mut rng = Rng::seeded(5);
        let net = AutoencoderNet::new(16, &mut rng);
        let img = DepthImage::uniform(3, 3, 0.5);
        assert!(net.encode(&img).is_err());
    }

    #[test]
    fn overfits_single_image() {
        let mut rng = Rng::seeded(8);
        let mut net = AutoencoderNet::new(16, &mut rng);
        let img = DepthImage {
            width: 4,
            height: 4,
            data: (0..16).map(|i| 0.4 + 0.02 * (i % 5) as f32).collect(),
        };
        let untrained = net.reconstruction_mse(std::slice::from_ref(&img)).unwrap();
        train_autoencoder(
            &mut net,
            std::slice::from_ref(&img),
            &AeTrainConfig { epochs: 800, batch_size: 1, noise: 0.0, shift_px: 0.0, scale_jitter: 0.0, ..Default::default() },
            &mut rng,
        )
        .unwrap();
        let trained = net.reconstruction_mse(std::slice::from_ref(&img)).unwrap();
        assert!(trained < 1e-6, "mse {trained}");
        assert!(trained < untrained);
    }

    #[test]
    fn empty_corpus_is_error() {
        let mut rng = Rng::seeded(8);
        let mut net = AutoencoderNet::new(16, &mut rng);
        assert!(train_autoencoder(&mut net, &[], &AeTrainConfig::default(), &mut rng).is_err());
    }
}
