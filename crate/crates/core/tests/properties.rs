//! Property tests: gradient soundness on random geometries, broadcasting
//! reduction, causality, shape algebra, noise-space exactness, metric
//! bounds, and bit-level determinism.

mod common;

use common::{analytic_gradients, max_grad_deviation};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use snsgan_core::eval::score_from_probabilities;
use snsgan_core::nn::{CausalConv1D, Conv2D, ConvTranspose2D, GRUCell, InitScheme, Layer, TCNBlock};
use snsgan_core::noise::{apply_class_shift, sample_base, sample_structured, NoiseSpec};
use snsgan_core::training::d_loss;
use snsgan_core::{Graph, Param, Scalar, Tensor};

fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn random_tensor(shape: Vec<usize>, scale: f64, r: &mut ChaCha12Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| scale * <f64 as Scalar>::std_normal(r)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    /// Analytic gradients match central finite differences for a composed
    /// random expression on random small shapes.
    #[test]
    fn gradient_property_on_random_shapes(rows in 1usize..5, cols in 1usize..6, seed in 0u64..1000) {
        let mut r = rng(seed);
        let a = Param::new("a", random_tensor(vec![rows, cols], 1.0, &mut r));
        let b = Param::new("b", random_tensor(vec![cols], 1.0, &mut r));
        let params = [a, b];
        let build = || {
            let mut g = Graph::new();
            let av = g.param(&params[0]);
            let bv = g.param(&params[1]);
            let s = g.mul(av, bv).unwrap();       // broadcast multiply
            let t = g.tanh(s).unwrap();
            let u = g.add(t, av).unwrap();
            let loss = g.mean_all(u).unwrap();
            g.backward(loss).unwrap();
            g.value(loss).item()
        };
        let analytic = analytic_gradients(&params, || { build(); });
        max_grad_deviation(&params, &analytic, build, 1e-4, 1e-9);
    }

    /// The gradient of a broadcast operand equals the reduction-sum of the
    /// unbroadcast gradient over the broadcast axes.
    #[test]
    fn broadcast_gradient_reduces_over_leading_axes(rows in 1usize..6, cols in 1usize..6, seed in 0u64..1000) {
        let mut r = rng(seed);
        let full = random_tensor(vec![rows, cols], 1.0, &mut r);
        let small = Param::new("s", random_tensor(vec![cols], 1.0, &mut r));
        let big = Param::new("b", Tensor::new(vec![rows, cols], {
            // tile the small tensor so both graphs compute the same value
            let sv = small.value_clone();
            (0..rows).flat_map(|_| sv.data().to_vec()).collect()
        }).unwrap());

        // broadcast graph
        small.zero_grad();
        let mut g = Graph::new();
        let f = g.constant(full.clone());
        let sv = g.param(&small);
        let y = g.mul(f, sv).unwrap();
        let y = g.tanh(y).unwrap();
        let loss = g.sum_all(y).unwrap();
        g.backward(loss).unwrap();
        let got = small.grad_clone();

        // unbroadcast graph, reduced by hand
        big.zero_grad();
        let mut g = Graph::new();
        let f = g.constant(full);
        let bv = g.param(&big);
        let y = g.mul(f, bv).unwrap();
        let y = g.tanh(y).unwrap();
        let loss = g.sum_all(y).unwrap();
        g.backward(loss).unwrap();
        let unreduced = big.grad_clone();
        for (j, &g_small) in got.iter().enumerate() {
            let manual: f64 = (0..rows).map(|i| unreduced[i * cols + j]).sum();
            prop_assert!((g_small - manual).abs() < 1e-12);
        }
    }

    /// Perturbing one time step never changes earlier TCN outputs.
    #[test]
    fn tcn_causality_on_random_geometry(
        in_ch in 1usize..4,
        out_ch in 1usize..5,
        kernel in 1usize..9,
        dilation in 1usize..4,
        t_len in 2usize..24,
        poke in 0usize..24,
        seed in 0u64..1000,
    ) {
        let poke_t = poke % t_len;
        let mut r = rng(seed);
        let block = TCNBlock::<f64>::new("tcn", in_ch, out_ch, kernel, dilation);
        block.init(InitScheme::default(), &mut r);
        let base = random_tensor(vec![1, in_ch, t_len], 1.0, &mut r);
        let mut poked = base.clone();
        poked.data_mut()[poke_t] += 0.5; // channel 0

        let run = |x: &Tensor| {
            let mut g = Graph::new();
            let xv = g.constant(x.clone());
            let y = block.forward(&mut g, xv).unwrap();
            g.value(y).data().to_vec()
        };
        let (a, b) = (run(&base), run(&poked));
        for c in 0..out_ch {
            for t in 0..poke_t {
                prop_assert_eq!(a[c * t_len + t], b[c * t_len + t]);
            }
        }
    }

    /// Declared output-shape formulas match realized shapes.
    #[test]
    fn conv_shape_algebra(
        in_ch in 1usize..3,
        out_ch in 1usize..4,
        kernel in 1usize..5,
        stride in 1usize..3,
        padding in 0usize..3,
        extent in 3usize..12,
        seed in 0u64..100,
    ) {
        prop_assume!(extent + 2 * padding >= kernel);
        let mut r = rng(seed);
        let conv = Conv2D::<f64>::new("c", in_ch, out_ch, kernel, stride, padding);
        conv.init(InitScheme::default(), &mut r);
        let x = random_tensor(vec![1, in_ch, extent, extent], 1.0, &mut r);
        let mut g = Graph::new();
        let xv = g.constant(x);
        let y = conv.forward(&mut g, xv).unwrap();
        let want = conv.out_extent(extent);
        prop_assert_eq!(g.shape(y), &[1, out_ch, want, want]);

        prop_assume!((extent - 1) * stride + kernel > 2 * padding);
        let deconv = ConvTranspose2D::<f64>::new("d", in_ch, out_ch, kernel, stride, padding);
        deconv.init(InitScheme::default(), &mut r);
        let x = random_tensor(vec![1, in_ch, extent, extent], 1.0, &mut r);
        let mut g = Graph::new();
        let xv = g.constant(x);
        let y = deconv.forward(&mut g, xv).unwrap();
        let want = deconv.out_extent(extent);
        prop_assert_eq!(g.shape(y), &[1, out_ch, want, want]);
    }

    /// A structured draw equals its base draw plus the block one-hot shift,
    /// bit for bit, with all other entries untouched.
    #[test]
    fn structured_noise_shift_exactness(
        classes in 1usize..12,
        block in 1usize..8,
        class_pick in 0usize..12,
        shift in -3.0f64..3.0,
        seed in 0u64..10_000,
    ) {
        let class = class_pick % classes;
        let spec = NoiseSpec::new(classes, block).unwrap().with_shift(shift);
        let z_c: Vec<f64> = sample_structured(&spec, class, &mut rng(seed)).unwrap();
        let base: Vec<f64> = sample_base(&spec, &mut rng(seed));
        for (d, (&got, &z)) in z_c.iter().zip(&base).enumerate() {
            let in_block = d / block == class;
            let want = if in_block { z + shift } else { z };
            prop_assert_eq!(got.to_bits(), want.to_bits(), "dimension {}", d);
        }
    }

    /// GRU output stays inside the convex-combination envelope.
    #[test]
    fn gru_convex_combination_bound(seed in 0u64..1000) {
        let mut r = rng(seed);
        let cell = GRUCell::<f64>::new("gru", 3, 5);
        cell.init(InitScheme::Normal { std: 0.6 }, &mut r);
        let x = random_tensor(vec![2, 3], 2.0, &mut r);
        let h0 = random_tensor(vec![2, 5], 1.5, &mut r);
        let bound = h0.data().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut g = Graph::new();
        let xv = g.constant(x);
        let hv = g.constant(h0);
        let h1 = cell.step(&mut g, xv, hv).unwrap();
        for &v in g.value(h1).data() {
            prop_assert!(v.abs() <= bound + 1e-12);
        }
    }

    /// The discriminator loss is nonnegative and exactly 2 ln 2 at the
    /// indifferent point.
    #[test]
    fn d_loss_floor(seed in 0u64..1000, n in 1usize..16) {
        let mut r = rng(seed);
        let real = random_tensor(vec![n, 1], 3.0, &mut r);
        let fake = random_tensor(vec![n, 1], 3.0, &mut r);
        let mut g = Graph::new();
        let rv = g.constant(real);
        let fv = g.constant(fake);
        let loss = d_loss(&mut g, rv, fv).unwrap();
        prop_assert!(g.value(loss).item() >= 0.0);

        let mut g = Graph::new();
        let rv = g.constant(Tensor::zeros(vec![n, 1]));
        let fv = g.constant(Tensor::zeros(vec![n, 1]));
        let loss = d_loss(&mut g, rv, fv).unwrap();
        prop_assert!((g.value(loss).item() - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    /// The inception-like score always lands in [1, N] on random tables.
    #[test]
    fn score_bounds_on_random_tables(rows in 2usize..20, classes in 2usize..8, seed in 0u64..1000) {
        let mut r = rng(seed);
        let mut probs = Vec::with_capacity(rows * classes);
        for _ in 0..rows {
            let raw: Vec<f64> = (0..classes).map(|_| <f64 as Scalar>::std_normal(&mut r).abs() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            probs.extend(raw.into_iter().map(|v| v / total));
        }
        let score = score_from_probabilities(&probs, classes).unwrap();
        prop_assert!(score >= 1.0 - 1e-9, "score {}", score);
        prop_assert!(score <= classes as f64 + 1e-9, "score {}", score);
    }
}

/// Identical seeds and inputs reproduce forward values and gradients bit for
/// bit, including through the data-parallel convolution kernels.
#[test]
fn forward_and_gradients_are_bit_deterministic() {
    let run = || {
        let mut r = rng(77);
        let conv = Conv2D::<f64>::new("c", 2, 4, 3, 2, 1);
        conv.init(InitScheme::default(), &mut r);
        let cell = GRUCell::<f64>::new("g", 4, 8);
        cell.init(InitScheme::default(), &mut r);
        let x = random_tensor(vec![16, 2, 8, 8], 1.0, &mut r);

        let mut g = Graph::new();
        let xv = g.constant(x);
        let y = conv.forward(&mut g, xv).unwrap();
        let y = g.relu(y).unwrap();
        let batch = 16;
        let y = g.reshape(y, vec![batch * 16, 4]).unwrap();
        let mut h = g.constant(Tensor::zeros(vec![batch * 16, 8]));
        h = cell.step(&mut g, y, h).unwrap();
        let loss = g.mean_all(h).unwrap();
        g.backward(loss).unwrap();
        let mut out = vec![g.value(loss).item()];
        for p in conv.params().iter().chain(cell.params().iter()) {
            out.extend(p.grad_clone());
        }
        out
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

/// Sampled batches are row-independent draws: the recovery diagnostic on
/// each row finds the row's class with overwhelming probability at wide
/// blocks.
#[test]
fn batch_rows_recover_their_classes() {
    let spec = NoiseSpec::new(6, 64).unwrap();
    let classes: Vec<usize> = (0..120).map(|i| i % 6).collect();
    let batch = snsgan_core::noise::sample_batch::<f64, _>(&spec, &classes, &mut rng(5)).unwrap();
    for (i, &c) in classes.iter().enumerate() {
        let row = batch.row(i);
        assert_eq!(snsgan_core::noise::infer_class_from_noise(&spec, row).unwrap(), c);
    }
}

/// Applying the shift twice lands exactly 2x the shift on the block.
#[test]
fn shift_composes_exactly_on_zero_vector() {
    let spec = NoiseSpec::new(4, 3).unwrap().with_shift(0.25);
    let mut z = vec![0.0f64; spec.dim()];
    apply_class_shift(&spec, 2, &mut z).unwrap();
    apply_class_shift(&spec, 2, &mut z).unwrap();
    for (d, &v) in z.iter().enumerate() {
        let want = if d / 3 == 2 { 0.5 } else { 0.0 };
        assert_eq!(v, want);
    }
}

/// The causal conv layer keeps length even when the kernel span exceeds the
/// series (left padding, never an error).
#[test]
fn causal_conv_longer_kernel_than_input() {
    let conv = CausalConv1D::<f64>::new("c", 1, 1, 8, 2);
    conv.init(InitScheme::default(), &mut rng(3));
    let mut g = Graph::new();
    let x = g.constant(Tensor::zeros(vec![1, 1, 3]));
    let y = conv.forward(&mut g, x).unwrap();
    assert_eq!(g.shape(y), &[1, 1, 3]);
}
