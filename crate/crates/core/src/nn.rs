//! Neural layers composing the generators and discriminators: dense maps,
//! GRU cells, dilated causal convolution blocks, and 2-D (transposed)
//! convolutions. Layers own their parameters; forward passes are recorded on
//! a caller-supplied [`Graph`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Graph, Param, Tensor, Var};
use rand::Rng;

/// Weight initialization; biases are always zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    Normal { std: f64 },
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme::Normal { std: 0.02 }
    }
}

pub trait Layer<F: Scalar> {
    fn params(&self) -> Vec<Param<F>>;

    /// Draws fresh weights from `scheme` and zeroes biases, consuming the
    /// stream in a fixed field order.
    fn init<R: Rng + ?Sized>(&self, scheme: InitScheme, rng: &mut R);
}

/// Initializes a fresh module; deterministic given the stream state.
pub fn init_params<F: Scalar, L: Layer<F>, R: Rng + ?Sized>(
    layer: &L,
    scheme: InitScheme,
    rng: &mut R,
) {
    layer.init(scheme, rng);
}

fn fill_normal<F: Scalar, R: Rng + ?Sized>(param: &Param<F>, std: f64, rng: &mut R) {
    let s = F::from_config(std);
    param.update(|data| {
        for v in data.iter_mut() {
            *v = s * F::std_normal(rng);
        }
    });
}

fn fill_zero<F: Scalar>(param: &Param<F>) {
    param.update(|data| data.iter_mut().for_each(|v| *v = F::zero()));
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// Fully connected map `x · Wᵀ + b`.
pub struct DenseLayer<F: Scalar> {
    pub weight: Param<F>, // (out, in)
    pub bias: Param<F>,   // (out,)
    in_dim: usize,
    out_dim: usize,
}

impl<F: Scalar> DenseLayer<F> {
    pub fn new(name: &str, in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            weight: Param::new(format!("{name}.weight"), Tensor::zeros(vec![out_dim, in_dim])),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(vec![out_dim])),
            in_dim,
            out_dim,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// `x` (batch, in) -> (batch, out).
    pub fn forward(&self, g: &mut Graph<F>, x: Var) -> Result<Var> {
        let w = g.param(&self.weight);
        let b = g.param(&self.bias);
        g.linear(x, w, b)
    }
}

impl<F: Scalar> Layer<F> for DenseLayer<F> {
    fn params(&self) -> Vec<Param<F>> {
        vec![self.weight.clone(), self.bias.clone()]
    }

    fn init<R: Rng + ?Sized>(&self, scheme: InitScheme, rng: &mut R) {
        let InitScheme::Normal { std } = scheme;
        fill_normal(&self.weight, std, rng);
        fill_zero(&self.bias);
    }
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

/// Gated recurrent cell. Gate weights are stored packed: the input path as
/// one (3H, in) matrix over [update | reset | candidate], the hidden path as
/// (2H, H) over [update | reset] plus a separate (H, H) candidate matrix,
/// because the reset gate multiplies `h` before the candidate's hidden
/// matmul.
pub struct GRUCell<F: Scalar> {
    pub weight_x: Param<F>,      // (3H, in)
    pub bias_x: Param<F>,        // (3H,)
    pub weight_h_gates: Param<F>, // (2H, H)
    pub bias_h_gates: Param<F>,  // (2H,)
    pub weight_h_cand: Param<F>, // (H, H)
    pub bias_h_cand: Param<F>,   // (H,)
    input_size: usize,
    hidden_size: usize,
}

impl<F: Scalar> GRUCell<F> {
    pub fn new(name: &str, input_size: usize, hidden_size: usize) -> Self {
        let h = hidden_size;
        GRUCell {
            weight_x: Param::new(format!("{name}.weight_x"), Tensor::zeros(vec![3 * h, input_size])),
            bias_x: Param::new(format!("{name}.bias_x"), Tensor::zeros(vec![3 * h])),
            weight_h_gates: Param::new(
                format!("{name}.weight_h_gates"),
                Tensor::zeros(vec![2 * h, h]),
            ),
            bias_h_gates: Param::new(format!("{name}.bias_h_gates"), Tensor::zeros(vec![2 * h])),
            weight_h_cand: Param::new(format!("{name}.weight_h_cand"), Tensor::zeros(vec![h, h])),
            bias_h_cand: Param::new(format!("{name}.bias_h_cand"), Tensor::zeros(vec![h])),
            input_size,
            hidden_size,
        }
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    /// Input-path activations for a batch of step inputs; splitting this out
    /// lets sequence models run one big matmul over all steps.
    pub fn input_path(&self, g: &mut Graph<F>, x: Var) -> Result<Var> {
        let w = g.param(&self.weight_x);
        let b = g.param(&self.bias_x);
        g.linear(x, w, b)
    }

    /// One recurrence step: `x_t` (batch, in), `h_prev` (batch, H) -> (batch, H).
    pub fn step(&self, g: &mut Graph<F>, x_t: Var, h_prev: Var) -> Result<Var> {
        let xa = self.input_path(g, x_t)?;
        self.step_precomputed(g, xa, h_prev)
    }

    /// Recurrence step taking precomputed input-path activations (batch, 3H).
    pub fn step_precomputed(&self, g: &mut Graph<F>, x_act: Var, h_prev: Var) -> Result<Var> {
        let h = self.hidden_size;
        if g.shape(x_act) != [g.shape(h_prev)[0], 3 * h] {
            return Err(Error::shape(format!(
                "gru step: input path {:?} does not match hidden {:?} for hidden size {h}",
                g.shape(x_act),
                g.shape(h_prev)
            )));
        }
        let wg = g.param(&self.weight_h_gates);
        let bg = g.param(&self.bias_h_gates);
        let ha = g.linear(h_prev, wg, bg)?; // (batch, 2H)

        let xz = g.narrow(x_act, 1, 0, h)?;
        let xr = g.narrow(x_act, 1, h, h)?;
        let xc = g.narrow(x_act, 1, 2 * h, h)?;
        let hz = g.narrow(ha, 1, 0, h)?;
        let hr = g.narrow(ha, 1, h, h)?;

        let z_pre = g.add(xz, hz)?;
        let update = g.sigmoid(z_pre)?;
        let r_pre = g.add(xr, hr)?;
        let reset = g.sigmoid(r_pre)?;

        let gated_h = g.mul(reset, h_prev)?;
        let wc = g.param(&self.weight_h_cand);
        let bc = g.param(&self.bias_h_cand);
        let hc = g.linear(gated_h, wc, bc)?;
        let c_pre = g.add(xc, hc)?;
        let cand = g.tanh(c_pre)?;

        // h_t = (1 - z) ⊙ h_prev + z ⊙ cand
        let ones = g.constant(Tensor::filled(g.shape(update).to_vec(), F::one()));
        let keep = g.sub(ones, update)?;
        let kept = g.mul(keep, h_prev)?;
        let injected = g.mul(update, cand)?;
        g.add(kept, injected)
    }
}

impl<F: Scalar> Layer<F> for GRUCell<F> {
    fn params(&self) -> Vec<Param<F>> {
        vec![
            self.weight_x.clone(),
            self.bias_x.clone(),
            self.weight_h_gates.clone(),
            self.bias_h_gates.clone(),
            self.weight_h_cand.clone(),
            self.bias_h_cand.clone(),
        ]
    }

    fn init<R: Rng + ?Sized>(&self, scheme: InitScheme, rng: &mut R) {
        let InitScheme::Normal { std } = scheme;
        fill_normal(&self.weight_x, std, rng);
        fill_zero(&self.bias_x);
        fill_normal(&self.weight_h_gates, std, rng);
        fill_zero(&self.bias_h_gates);
        fill_normal(&self.weight_h_cand, std, rng);
        fill_zero(&self.bias_h_cand);
    }
}

// ---------------------------------------------------------------------------
// Causal 1-D convolution and the TCN block
// ---------------------------------------------------------------------------

/// Length-preserving dilated causal convolution over (batch, ch, T).
pub struct CausalConv1D<F: Scalar> {
    pub weight: Param<F>, // (out_ch, in_ch, k)
    pub bias: Param<F>,   // (out_ch,)
    dilation: usize,
}

impl<F: Scalar> CausalConv1D<F> {
    pub fn new(name: &str, in_ch: usize, out_ch: usize, kernel: usize, dilation: usize) -> Self {
        CausalConv1D {
            weight: Param::new(
                format!("{name}.weight"),
                Tensor::zeros(vec![out_ch, in_ch, kernel]),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(vec![out_ch])),
            dilation,
        }
    }

    pub fn forward(&self, g: &mut Graph<F>, x: Var) -> Result<Var> {
        let w = g.param(&self.weight);
        let b = g.param(&self.bias);
        g.causal_conv1d(x, w, b, self.dilation)
    }
}

impl<F: Scalar> Layer<F> for CausalConv1D<F> {
    fn params(&self) -> Vec<Param<F>> {
        vec![self.weight.clone(), self.bias.clone()]
    }

    fn init<R: Rng + ?Sized>(&self, scheme: InitScheme, rng: &mut R) {
        let InitScheme::Normal { std } = scheme;
        fill_normal(&self.weight, std, rng);
        fill_zero(&self.bias);
    }
}

/// One dilated causal conv followed by leaky ReLU, with a residual
/// connection; a 1x1 projection carries the residual when channel counts
/// differ. Output at time t depends only on inputs at times <= t.
pub struct TCNBlock<F: Scalar> {
    pub conv: CausalConv1D<F>,
    pub residual_proj: Option<CausalConv1D<F>>,
}

impl<F: Scalar> TCNBlock<F> {
    pub fn new(name: &str, in_ch: usize, out_ch: usize, kernel: usize, dilation: usize) -> Self {
        let conv = CausalConv1D::new(&format!("{name}.conv"), in_ch, out_ch, kernel, dilation);
        let residual_proj = (in_ch != out_ch)
            .then(|| CausalConv1D::new(&format!("{name}.proj"), in_ch, out_ch, 1, 1));
        TCNBlock { conv, residual_proj }
    }

    /// `x` (batch, in_ch, T) -> (batch, out_ch, T).
    pub fn forward(&self, g: &mut Graph<F>, x: Var) -> Result<Var> {
        let y = self.conv.forward(g, x)?;
        let y = g.leaky_relu(y)?;
        let skip = match &self.residual_proj {
            Some(proj) => proj.forward(g, x)?,
            None => x,
        };
        g.add(y, skip)
    }
}

impl<F: Scalar> Layer<F> for TCNBlock<F> {
    fn params(&self) -> Vec<Param<F>> {
        let mut p = self.conv.params();
        if let Some(proj) = &self.residual_proj {
            p.extend(proj.params());
        }
        p
    }

    fn init<R: Rng + ?Sized>(&self, scheme: InitScheme, rng: &mut R) {
        self.conv.init(scheme, rng);
        if let Some(proj) = &self.residual_proj {
            proj.init(scheme, rng);
        }
    }
}

// ---------------------------------------------------------------------------
// 2-D convolutions
// ---------------------------------------------------------------------------

pub struct Conv2D<F: Scalar> {
    pub weight: Param<F>, // (out_ch, in_ch, kh, kw)
    pub bias: Param<F>,   // (out_ch,)
    stride: usize,
    padding: usize,
}

impl<F: Scalar> Conv2D<F> {
    pub fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        Conv2D {
            weight: Param::new(
                format!("{name}.weight"),
                Tensor::zeros(vec![out_ch, in_ch, kernel, kernel]),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(vec![out_ch])),
            stride,
            padding,
        }
    }

    /// Output spatial extent for an input extent.
    pub fn out_extent(&self, extent: usize) -> usize {
        let k = self.weight.shape()[2];
        (extent + 2 * self.padding - k) / self.stride + 1
    }

    pub fn forward(&self, g: &mut Graph<F>, x: Var) -> Result<Var> {
        let w = g.param(&self.weight);
        let b = g.param(&self.bias);
        g.conv2d(x, w, b, self.stride, self.padding)
    }
}

impl<F: Scalar> Layer<F> for Conv2D<F> {
    fn params(&self) -> Vec<Param<F>> {
        vec![self.weight.clone(), self.bias.clone()]
    }

    fn init<R: Rng + ?Sized>(&self, scheme: InitScheme, rng: &mut R) {
        let InitScheme::Normal { std } = scheme;
        fill_normal(&self.weight, std, rng);
        fill_zero(&self.bias);
    }
}

pub struct ConvTranspose2D<F: Scalar> {
    pub weight: Param<F>, // (in_ch, out_ch, kh, kw)
    pub bias: Param<F>,   // (out_ch,)
    stride: usize,
    padding: usize,
}

impl<F: Scalar> ConvTranspose2D<F> {
    pub fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        ConvTranspose2D {
            weight: Param::new(
                format!("{name}.weight"),
                Tensor::zeros(vec![in_ch, out_ch, kernel, kernel]),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(vec![out_ch])),
            stride,
            padding,
        }
    }

    /// Output spatial extent for an input extent: (e−1)·stride − 2·padding + k.
    pub fn out_extent(&self, extent: usize) -> usize {
        let k = self.weight.shape()[2];
        (extent - 1) * self.stride + k - 2 * self.padding
    }

    pub fn forward(&self, g: &mut Graph<F>, x: Var) -> Result<Var> {
        let w = g.param(&self.weight);
        let b = g.param(&self.bias);
        g.conv_transpose2d(x, w, b, self.stride, self.padding)
    }
}

impl<F: Scalar> Layer<F> for ConvTranspose2D<F> {
    fn params(&self) -> Vec<Param<F>> {
        vec![self.weight.clone(), self.bias.clone()]
    }

    fn init<R: Rng + ?Sized>(&self, scheme: InitScheme, rng: &mut R) {
        let InitScheme::Normal { std } = scheme;
        fill_normal(&self.weight, std, rng);
        fill_zero(&self.bias);
    }
}
