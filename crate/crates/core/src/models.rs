//! The six generator/discriminator architectures.
//!
//! The structured-noise variants condition exclusively through the noise
//! vector: their discriminators take no label input at all. The recurrent
//! conditional baselines do the opposite, concatenating the class one-hot to
//! every time step on both sides and discriminating per step.

use crate::error::{Error, Result};
use crate::nn::{
    CausalConv1D, Conv2D, ConvTranspose2D, DenseLayer, GRUCell, InitScheme, Layer, TCNBlock,
};
use crate::noise::NoiseSpec;
use crate::tensor::Var;
use crate::{Graph, Param, Tensor};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariantTag {
    SnsLinear,
    SnsRnn,
    SnsTcn,
    SnsImage,
    RcganRnn,
    RcganTcn,
}

impl VariantTag {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "SNS-Linear" => Ok(VariantTag::SnsLinear),
            "SNS-RNN" => Ok(VariantTag::SnsRnn),
            "SNS-TCN" => Ok(VariantTag::SnsTcn),
            "SNS-Image" => Ok(VariantTag::SnsImage),
            "RCGAN-RNN" => Ok(VariantTag::RcganRnn),
            "RCGAN-TCN" => Ok(VariantTag::RcganTcn),
            other => Err(Error::config(format!(
                "unknown variant {other:?}; expected one of SNS-Linear, SNS-RNN, SNS-TCN, SNS-Image, RCGAN-RNN, RCGAN-TCN"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VariantTag::SnsLinear => "SNS-Linear",
            VariantTag::SnsRnn => "SNS-RNN",
            VariantTag::SnsTcn => "SNS-TCN",
            VariantTag::SnsImage => "SNS-Image",
            VariantTag::RcganRnn => "RCGAN-RNN",
            VariantTag::RcganTcn => "RCGAN-TCN",
        }
    }

    pub fn is_rcgan(self) -> bool {
        matches!(self, VariantTag::RcganRnn | VariantTag::RcganTcn)
    }

    pub fn is_image(self) -> bool {
        matches!(self, VariantTag::SnsImage)
    }
}

/// Variant tag plus its architecture hyperparameters. Defaults: FC hidden
/// 500; GRU hidden 512 (structured-noise) / 256 (recurrent-conditional);
/// TCN kernel 8 with one block; image models use 4x4 kernels at stride 2
/// with two layers on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVariant {
    pub tag: VariantTag,
    /// FC or GRU hidden width, by family.
    pub hidden_size: usize,
    pub tcn_kernel: usize,
    /// Hidden channel width of the TCN block (not pinned upstream).
    pub tcn_channels: usize,
    /// Per-step noise dimension for the recurrent-conditional generators.
    pub rcgan_noise_dim: usize,
    /// Seed-map channels of the image generator; halves per deconv layer.
    pub image_channels: usize,
}

impl ModelVariant {
    pub fn new(tag: VariantTag) -> Self {
        let hidden_size = match tag {
            VariantTag::SnsLinear => 500,
            VariantTag::SnsRnn => 512,
            VariantTag::RcganRnn => 256,
            _ => 0,
        };
        ModelVariant {
            tag,
            hidden_size,
            tcn_kernel: 8,
            tcn_channels: 64,
            rcgan_noise_dim: 32,
            image_channels: 128,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(ModelVariant::new(VariantTag::parse(s)?))
    }
}

/// What the generator must emit and the discriminator must consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataShape {
    Series { len: usize },
    Image { channels: usize, height: usize, width: usize },
}

impl DataShape {
    pub fn series_len(&self) -> Option<usize> {
        match self {
            DataShape::Series { len } => Some(*len),
            DataShape::Image { .. } => None,
        }
    }
}

const IMAGE_KERNEL: usize = 4;
const IMAGE_STRIDE: usize = 2;
const IMAGE_PADDING: usize = 1;

/// Builds a parameter-initialized generator/discriminator pair. Identical
/// rng state yields bit-identical parameters.
pub fn build<R: Rng + ?Sized>(
    variant: &ModelVariant,
    data_shape: DataShape,
    noise_spec: &NoiseSpec,
    rng: &mut R,
) -> Result<(Generator, Discriminator)> {
    noise_spec.validate()?;
    let scheme = InitScheme::default();
    match (variant.tag, data_shape) {
        (VariantTag::SnsImage, DataShape::Series { .. }) => Err(Error::config(
            "SNS-Image needs an image dataset, got a series shape".to_string(),
        )),
        (VariantTag::SnsLinear, DataShape::Series { len }) => {
            let gen = Generator::Linear {
                hidden: DenseLayer::new("gen.hidden", noise_spec.dim(), variant.hidden_size),
                out: DenseLayer::new("gen.out", variant.hidden_size, len),
            };
            let dis = Discriminator::Linear {
                hidden: DenseLayer::new("dis.hidden", len, variant.hidden_size),
                out: DenseLayer::new("dis.out", variant.hidden_size, 1),
            };
            init_pair(&gen, &dis, scheme, rng);
            Ok((gen, dis))
        }
        (VariantTag::SnsRnn, DataShape::Series { len }) => {
            let h = variant.hidden_size;
            let gen = Generator::Rnn {
                init_hidden: DenseLayer::new("gen.init_hidden", noise_spec.dim(), h),
                cell: GRUCell::new("gen.cell", 1, h),
                head: DenseLayer::new("gen.head", h, 1),
                series_len: len,
            };
            let dis = Discriminator::Rnn {
                cell: GRUCell::new("dis.cell", 1, h),
                head: DenseLayer::new("dis.head", h, 1),
            };
            init_pair(&gen, &dis, scheme, rng);
            Ok((gen, dis))
        }
        (VariantTag::SnsTcn, DataShape::Series { len }) => {
            let c = variant.tcn_channels;
            let gen = Generator::Tcn {
                seed: DenseLayer::new("gen.seed", noise_spec.dim(), c * len),
                block: TCNBlock::new("gen.block", c, c, variant.tcn_kernel, 1),
                head: CausalConv1D::new("gen.head", c, 1, 1, 1),
                channels: c,
                series_len: len,
            };
            let dis = Discriminator::Tcn {
                block: TCNBlock::new("dis.block", 1, c, variant.tcn_kernel, 1),
                head: DenseLayer::new("dis.head", c * len, 1),
                series_len: len,
            };
            init_pair(&gen, &dis, scheme, rng);
            Ok((gen, dis))
        }
        (VariantTag::SnsImage, DataShape::Image { channels, height, width }) => {
            if height % 4 != 0 || width % 4 != 0 {
                return Err(Error::config(format!(
                    "image extents must be divisible by 4 for the two stride-2 layers, got {height}x{width}"
                )));
            }
            let c = variant.image_channels;
            let (h0, w0) = (height / 4, width / 4);
            let gen = Generator::Image {
                seed: DenseLayer::new("gen.seed", noise_spec.dim(), c * h0 * w0),
                deconv1: ConvTranspose2D::new(
                    "gen.deconv1",
                    c,
                    c / 2,
                    IMAGE_KERNEL,
                    IMAGE_STRIDE,
                    IMAGE_PADDING,
                ),
                deconv2: ConvTranspose2D::new(
                    "gen.deconv2",
                    c / 2,
                    channels,
                    IMAGE_KERNEL,
                    IMAGE_STRIDE,
                    IMAGE_PADDING,
                ),
                channels: c,
                seed_hw: (h0, w0),
            };
            let dis = Discriminator::Image {
                conv1: Conv2D::new(
                    "dis.conv1",
                    channels,
                    c / 2,
                    IMAGE_KERNEL,
                    IMAGE_STRIDE,
                    IMAGE_PADDING,
                ),
                conv2: Conv2D::new("dis.conv2", c / 2, c, IMAGE_KERNEL, IMAGE_STRIDE, IMAGE_PADDING),
                head: DenseLayer::new("dis.head", c * h0 * w0, 1),
            };
            init_pair(&gen, &dis, scheme, rng);
            Ok((gen, dis))
        }
        (tag, DataShape::Image { .. }) => Err(Error::config(format!(
            "{} needs a series dataset, got an image shape",
            tag.name()
        ))),
        (VariantTag::RcganRnn, DataShape::Series { len }) => {
            let h = variant.hidden_size;
            let n = noise_spec.num_classes;
            let gen = Generator::RcganRnn {
                cell: GRUCell::new("gen.cell", variant.rcgan_noise_dim + n, h),
                head: DenseLayer::new("gen.head", h, 1),
                noise_dim: variant.rcgan_noise_dim,
                num_classes: n,
                series_len: len,
            };
            let dis = Discriminator::RcganRnn {
                cell: GRUCell::new("dis.cell", 1 + n, h),
                head: DenseLayer::new("dis.head", h, 1),
                num_classes: n,
            };
            init_pair(&gen, &dis, scheme, rng);
            Ok((gen, dis))
        }
        (VariantTag::RcganTcn, DataShape::Series { len }) => {
            let c = variant.tcn_channels;
            let n = noise_spec.num_classes;
            let gen = Generator::RcganTcn {
                block: TCNBlock::new(
                    "gen.block",
                    variant.rcgan_noise_dim + n,
                    c,
                    variant.tcn_kernel,
                    1,
                ),
                head: CausalConv1D::new("gen.head", c, 1, 1, 1),
                noise_dim: variant.rcgan_noise_dim,
                num_classes: n,
                series_len: len,
            };
            let dis = Discriminator::RcganTcn {
                block: TCNBlock::new("dis.block", 1 + n, c, variant.tcn_kernel, 1),
                head: CausalConv1D::new("dis.head", c, 1, 1, 1),
                num_classes: n,
            };
            init_pair(&gen, &dis, scheme, rng);
            Ok((gen, dis))
        }
    }
}

fn init_pair<R: Rng + ?Sized>(gen: &Generator, dis: &Discriminator, scheme: InitScheme, rng: &mut R) {
    gen.init(scheme, rng);
    dis.init(scheme, rng);
}

fn one_hot_rows(classes: &[usize], num_classes: usize) -> Result<Tensor> {
    let mut data = vec![0.0; classes.len() * num_classes];
    for (row, &c) in data.chunks_exact_mut(num_classes).zip(classes) {
        if c >= num_classes {
            return Err(Error::domain(format!("class {c} out of range for {num_classes} classes")));
        }
        row[c] = 1.0;
    }
    Tensor::new(vec![classes.len(), num_classes], data)
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

pub enum Generator {
    Linear {
        hidden: DenseLayer<f64>,
        out: DenseLayer<f64>,
    },
    Rnn {
        init_hidden: DenseLayer<f64>,
        cell: GRUCell<f64>,
        head: DenseLayer<f64>,
        series_len: usize,
    },
    Tcn {
        seed: DenseLayer<f64>,
        block: TCNBlock<f64>,
        head: CausalConv1D<f64>,
        channels: usize,
        series_len: usize,
    },
    Image {
        seed: DenseLayer<f64>,
        deconv1: ConvTranspose2D<f64>,
        deconv2: ConvTranspose2D<f64>,
        channels: usize,
        seed_hw: (usize, usize),
    },
    RcganRnn {
        cell: GRUCell<f64>,
        head: DenseLayer<f64>,
        noise_dim: usize,
        num_classes: usize,
        series_len: usize,
    },
    RcganTcn {
        block: TCNBlock<f64>,
        head: CausalConv1D<f64>,
        noise_dim: usize,
        num_classes: usize,
        series_len: usize,
    },
}

impl Generator {
    pub fn is_rcgan(&self) -> bool {
        matches!(self, Generator::RcganRnn { .. } | Generator::RcganTcn { .. })
    }

    /// Per-step noise dimension (recurrent-conditional generators only).
    pub fn rcgan_noise_dim(&self) -> Option<usize> {
        match self {
            Generator::RcganRnn { noise_dim, .. } | Generator::RcganTcn { noise_dim, .. } => {
                Some(*noise_dim)
            }
            _ => None,
        }
    }

    pub fn series_len(&self) -> Option<usize> {
        match self {
            Generator::Linear { out, .. } => Some(out.out_dim()),
            Generator::Rnn { series_len, .. }
            | Generator::Tcn { series_len, .. }
            | Generator::RcganRnn { series_len, .. }
            | Generator::RcganTcn { series_len, .. } => Some(*series_len),
            Generator::Image { .. } => None,
        }
    }

    /// Samples from the structured noise space: `z_c` is (batch, N·B).
    /// Series generators emit (batch, T); the image generator (batch, ch, H, W).
    pub fn sns_generate(&self, g: &mut Graph, z: Var) -> Result<Var> {
        match self {
            Generator::Rnn { series_len, .. } => self.sns_generate_steps(g, z, *series_len),
            Generator::Linear { hidden, out } => {
                let h = hidden.forward(g, z)?;
                let h = g.leaky_relu(h)?;
                let y = out.forward(g, h)?;
                g.tanh(y)
            }
            Generator::Tcn { seed, block, head, channels, series_len } => {
                let batch = g.shape(z)[0];
                let s = seed.forward(g, z)?;
                let s = g.leaky_relu(s)?;
                let s = g.reshape(s, vec![batch, *channels, *series_len])?;
                let y = block.forward(g, s)?;
                let y = head.forward(g, y)?;
                let y = g.tanh(y)?;
                g.reshape(y, vec![batch, *series_len])
            }
            Generator::Image { seed, deconv1, deconv2, channels, seed_hw } => {
                let batch = g.shape(z)[0];
                let s = seed.forward(g, z)?;
                let s = g.leaky_relu(s)?;
                let s = g.reshape(s, vec![batch, *channels, seed_hw.0, seed_hw.1])?;
                let y = deconv1.forward(g, s)?;
                let y = g.leaky_relu(y)?;
                let y = deconv2.forward(g, y)?;
                g.tanh(y)
            }
            Generator::RcganRnn { .. } | Generator::RcganTcn { .. } => Err(Error::config(
                "recurrent-conditional generators take per-step noise; use rcgan_generate".to_string(),
            )),
        }
    }

    /// Autoregressive generation truncated or extended to `steps` (only the
    /// RNN variant can vary its length at inference).
    pub fn sns_generate_steps(&self, g: &mut Graph, z: Var, steps: usize) -> Result<Var> {
        let Generator::Rnn { init_hidden, cell, head, .. } = self else {
            return Err(Error::config("variable-length generation needs the RNN variant".to_string()));
        };
        let batch = g.shape(z)[0];
        let mut h = init_hidden.forward(g, z)?;
        let mut prev = g.constant(Tensor::zeros(vec![batch, 1]));
        let mut outputs = Vec::with_capacity(steps);
        for _ in 0..steps {
            h = cell.step(g, prev, h)?;
            let y = head.forward(g, h)?;
            let y = g.tanh(y)?;
            outputs.push(y);
            prev = y;
        }
        g.concat(1, &outputs)
    }

    /// Recurrent-conditional generation: one noise vector per step
    /// (batch, T, noise_dim), the class one-hot concatenated at every step.
    pub fn rcgan_generate(&self, g: &mut Graph, noise: &Tensor, classes: &[usize]) -> Result<Var> {
        if noise.rank() != 3 {
            return Err(Error::shape(format!(
                "per-step noise must be rank-3 (batch, T, dim), got {:?}",
                noise.shape()
            )));
        }
        let (batch, t_len, dim) = (noise.shape()[0], noise.shape()[1], noise.shape()[2]);
        if batch != classes.len() {
            return Err(Error::shape(format!(
                "noise batch {batch} does not match {} classes",
                classes.len()
            )));
        }
        match self {
            Generator::RcganRnn { cell, head, noise_dim, num_classes, .. } => {
                if dim != *noise_dim {
                    return Err(Error::shape(format!(
                        "per-step noise dim {dim} does not match generator dim {noise_dim}"
                    )));
                }
                let onehot = one_hot_rows(classes, *num_classes)?;
                // step-major (T·batch, dim + N) input for one fused input-path matmul
                let width = dim + num_classes;
                let mut data = vec![0.0; t_len * batch * width];
                for t in 0..t_len {
                    for b in 0..batch {
                        let dst = &mut data[(t * batch + b) * width..(t * batch + b + 1) * width];
                        dst[..dim].copy_from_slice(
                            &noise.data()[(b * t_len + t) * dim..(b * t_len + t + 1) * dim],
                        );
                        dst[dim..].copy_from_slice(onehot.row(b));
                    }
                }
                let steps = g.constant(Tensor::new(vec![t_len * batch, width], data)?);
                let x_act = cell.input_path(g, steps)?;
                let mut h = g.constant(Tensor::zeros(vec![batch, cell.hidden_size()]));
                let mut outputs = Vec::with_capacity(t_len);
                for t in 0..t_len {
                    let xa = g.narrow(x_act, 0, t * batch, batch)?;
                    h = cell.step_precomputed(g, xa, h)?;
                    let y = head.forward(g, h)?;
                    outputs.push(g.tanh(y)?);
                }
                g.concat(1, &outputs)
            }
            Generator::RcganTcn { block, head, noise_dim, num_classes, .. } => {
                if dim != *noise_dim {
                    return Err(Error::shape(format!(
                        "per-step noise dim {dim} does not match generator dim {noise_dim}"
                    )));
                }
                // channels = noise dims then one-hot planes, constant over time
                let width = dim + num_classes;
                let mut data = vec![0.0; batch * width * t_len];
                for b in 0..batch {
                    for d in 0..dim {
                        for t in 0..t_len {
                            data[(b * width + d) * t_len + t] =
                                noise.data()[(b * t_len + t) * dim + d];
                        }
                    }
                    let c = classes[b];
                    if c >= *num_classes {
                        return Err(Error::domain(format!(
                            "class {c} out of range for {num_classes} classes"
                        )));
                    }
                    for t in 0..t_len {
                        data[(b * width + dim + c) * t_len + t] = 1.0;
                    }
                }
                let x = g.constant(Tensor::new(vec![batch, width, t_len], data)?);
                let y = block.forward(g, x)?;
                let y = head.forward(g, y)?;
                let y = g.tanh(y)?;
                g.reshape(y, vec![batch, t_len])
            }
            _ => Err(Error::config(
                "structured-noise generators take z_c vectors; use sns_generate".to_string(),
            )),
        }
    }

    /// Unified entry: draws the right kind of noise for this generator and
    /// emits one sample per requested class.
    pub fn generate_for_classes<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        noise_spec: &NoiseSpec,
        classes: &[usize],
        rng: &mut R,
    ) -> Result<Var> {
        if self.is_rcgan() {
            let t_len = self.series_len().expect("rcgan generators emit series");
            let dim = self.rcgan_noise_dim().expect("rcgan noise dim");
            let data: Vec<f64> = (0..classes.len() * t_len * dim)
                .map(|_| crate::Scalar::std_normal(rng))
                .collect();
            let noise = Tensor::new(vec![classes.len(), t_len, dim], data)?;
            self.rcgan_generate(g, &noise, classes)
        } else {
            let z = crate::noise::sample_batch::<f64, R>(noise_spec, classes, rng)?;
            let zv = g.constant(z);
            self.sns_generate(g, zv)
        }
    }
}

impl Layer<f64> for Generator {
    fn params(&self) -> Vec<Param> {
        match self {
            Generator::Linear { hidden, out } => [hidden.params(), out.params()].concat(),
            Generator::Rnn { init_hidden, cell, head, .. } => {
                [init_hidden.params(), cell.params(), head.params()].concat()
            }
            Generator::Tcn { seed, block, head, .. } => {
                [seed.params(), block.params(), head.params()].concat()
            }
            Generator::Image { seed, deconv1, deconv2, .. } => {
                [seed.params(), deconv1.params(), deconv2.params()].concat()
            }
            Generator::RcganRnn { cell, head, .. } => [cell.params(), head.params()].concat(),
            Generator::RcganTcn { block, head, .. } => [block.params(), head.params()].concat(),
        }
    }

    fn init<R: Rng + ?Sized>(&self, scheme: InitScheme, rng: &mut R) {
        match self {
            Generator::Linear { hidden, out } => {
                hidden.init(scheme, rng);
                out.init(scheme, rng);
            }
            Generator::Rnn { init_hidden, cell, head, .. } => {
                init_hidden.init(scheme, rng);
                cell.init(scheme, rng);
                head.init(scheme, rng);
            }
            Generator::Tcn { seed, block, head, .. } => {
                seed.init(scheme, rng);
                block.init(scheme, rng);
                head.init(scheme, rng);
            }
            Generator::Image { seed, deconv1, deconv2, .. } => {
                seed.init(scheme, rng);
                deconv1.init(scheme, rng);
                deconv2.init(scheme, rng);
            }
            Generator::RcganRnn { cell, head, .. } => {
                cell.init(scheme, rng);
                head.init(scheme, rng);
            }
            Generator::RcganTcn { block, head, .. } => {
                block.init(scheme, rng);
                head.init(scheme, rng);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Discriminator
// ---------------------------------------------------------------------------

pub enum Discriminator {
    Linear {
        hidden: DenseLayer<f64>,
        out: DenseLayer<f64>,
    },
    Rnn {
        cell: GRUCell<f64>,
        head: DenseLayer<f64>,
    },
    Tcn {
        block: TCNBlock<f64>,
        head: DenseLayer<f64>,
        series_len: usize,
    },
    Image {
        conv1: Conv2D<f64>,
        conv2: Conv2D<f64>,
        head: DenseLayer<f64>,
    },
    RcganRnn {
        cell: GRUCell<f64>,
        head: DenseLayer<f64>,
        num_classes: usize,
    },
    RcganTcn {
        block: TCNBlock<f64>,
        head: CausalConv1D<f64>,
        num_classes: usize,
    },
}

impl Discriminator {
    pub fn is_rcgan(&self) -> bool {
        matches!(self, Discriminator::RcganRnn { .. } | Discriminator::RcganTcn { .. })
    }

    /// How many label inputs the discrimination path takes: structurally 0
    /// for the structured-noise family, 1 for the recurrent-conditional one.
    pub fn label_input_count(&self) -> usize {
        usize::from(self.is_rcgan())
    }

    /// Class-blind scoring: one logit per sample, shape (batch, 1). There is
    /// no label argument on this path by construction.
    pub fn sns_discriminate(&self, g: &mut Graph, sample: Var) -> Result<Var> {
        match self {
            Discriminator::Linear { hidden, out } => {
                let h = hidden.forward(g, sample)?;
                let h = g.leaky_relu(h)?;
                out.forward(g, h)
            }
            Discriminator::Rnn { cell, head } => {
                let shape = g.shape(sample).to_vec();
                if shape.len() != 2 {
                    return Err(Error::shape(format!("series input must be rank-2, got {shape:?}")));
                }
                let (batch, t_len) = (shape[0], shape[1]);
                let mut h = g.constant(Tensor::zeros(vec![batch, cell.hidden_size()]));
                for t in 0..t_len {
                    let x_t = g.narrow(sample, 1, t, 1)?;
                    h = cell.step(g, x_t, h)?;
                }
                head.forward(g, h)
            }
            Discriminator::Tcn { block, head, series_len } => {
                let shape = g.shape(sample).to_vec();
                if shape.len() != 2 || shape[1] != *series_len {
                    return Err(Error::shape(format!(
                        "series input must be (batch, {series_len}), got {shape:?}"
                    )));
                }
                let batch = shape[0];
                let x = g.reshape(sample, vec![batch, 1, *series_len])?;
                let y = block.forward(g, x)?;
                let flat_dim = head.in_dim();
                let y = g.reshape(y, vec![batch, flat_dim])?;
                head.forward(g, y)
            }
            Discriminator::Image { conv1, conv2, head } => {
                let shape = g.shape(sample).to_vec();
                if shape.len() != 4 {
                    return Err(Error::shape(format!("image input must be rank-4, got {shape:?}")));
                }
                let batch = shape[0];
                let y = conv1.forward(g, sample)?;
                let y = g.leaky_relu(y)?;
                let y = conv2.forward(g, y)?;
                let y = g.leaky_relu(y)?;
                let y = g.reshape(y, vec![batch, head.in_dim()])?;
                head.forward(g, y)
            }
            Discriminator::RcganRnn { .. } | Discriminator::RcganTcn { .. } => Err(Error::config(
                "recurrent-conditional discriminators need the class argument; use rcgan_discriminate"
                    .to_string(),
            )),
        }
    }

    /// Per-step conditional scoring: the class one-hot joins the series value
    /// at every step; output is (batch, T) logits.
    pub fn rcgan_discriminate(&self, g: &mut Graph, series: Var, classes: &[usize]) -> Result<Var> {
        let shape = g.shape(series).to_vec();
        if shape.len() != 2 {
            return Err(Error::shape(format!("series input must be rank-2, got {shape:?}")));
        }
        let (batch, t_len) = (shape[0], shape[1]);
        if batch != classes.len() {
            return Err(Error::shape(format!(
                "series batch {batch} does not match {} classes",
                classes.len()
            )));
        }
        match self {
            Discriminator::RcganRnn { cell, head, num_classes } => {
                let onehot = g.constant(one_hot_rows(classes, *num_classes)?);
                // assemble all step inputs, then one fused input-path matmul
                let mut step_inputs = Vec::with_capacity(t_len);
                for t in 0..t_len {
                    let x_t = g.narrow(series, 1, t, 1)?;
                    step_inputs.push(g.concat(1, &[x_t, onehot])?);
                }
                let all_steps = g.concat(0, &step_inputs)?;
                let x_act = cell.input_path(g, all_steps)?;
                let mut h = g.constant(Tensor::zeros(vec![batch, cell.hidden_size()]));
                let mut logits = Vec::with_capacity(t_len);
                for t in 0..t_len {
                    let xa = g.narrow(x_act, 0, t * batch, batch)?;
                    h = cell.step_precomputed(g, xa, h)?;
                    logits.push(head.forward(g, h)?);
                }
                g.concat(1, &logits)
            }
            Discriminator::RcganTcn { block, head, num_classes } => {
                let x = g.reshape(series, vec![batch, 1, t_len])?;
                let mut planes = vec![0.0; batch * num_classes * t_len];
                for (b, &c) in classes.iter().enumerate() {
                    if c >= *num_classes {
                        return Err(Error::domain(format!(
                            "class {c} out of range for {num_classes} classes"
                        )));
                    }
                    planes[(b * num_classes + c) * t_len..(b * num_classes + c + 1) * t_len]
                        .fill(1.0);
                }
                let onehot = g.constant(Tensor::new(vec![batch, *num_classes, t_len], planes)?);
                let x = g.concat(1, &[x, onehot])?;
                let y = block.forward(g, x)?;
                let y = head.forward(g, y)?;
                g.reshape(y, vec![batch, t_len])
            }
            _ => Err(Error::config(
                "structured-noise discriminators are class-blind; use sns_discriminate".to_string(),
            )),
        }
    }
}

impl Layer<f64> for Discriminator {
    fn params(&self) -> Vec<Param> {
        match self {
            Discriminator::Linear { hidden, out } => [hidden.params(), out.params()].concat(),
            Discriminator::Rnn { cell, head } => [cell.params(), head.params()].concat(),
            Discriminator::Tcn { block, head, .. } => [block.params(), head.params()].concat(),
            Discriminator::Image { conv1, conv2, head } => {
                [conv1.params(), conv2.params(), head.params()].concat()
            }
            Discriminator::RcganRnn { cell, head, .. } => [cell.params(), head.params()].concat(),
            Discriminator::RcganTcn { block, head, .. } => [block.params(), head.params()].concat(),
        }
    }

    fn init<R: Rng + ?Sized>(&self, scheme: InitScheme, rng: &mut R) {
        match self {
            Discriminator::Linear { hidden, out } => {
                hidden.init(scheme, rng);
                out.init(scheme, rng);
            }
            Discriminator::Rnn { cell, head } => {
                cell.init(scheme, rng);
                head.init(scheme, rng);
            }
            Discriminator::Tcn { block, head, .. } => {
                block.init(scheme, rng);
                head.init(scheme, rng);
            }
            Discriminator::Image { conv1, conv2, head } => {
                conv1.init(scheme, rng);
                conv2.init(scheme, rng);
                head.init(scheme, rng);
            }
            Discriminator::RcganRnn { cell, head, .. } => {
                cell.init(scheme, rng);
                head.init(scheme, rng);
            }
            Discriminator::RcganTcn { block, head, .. } => {
                block.init(scheme, rng);
                head.init(scheme, rng);
            }
        }
    }
}
