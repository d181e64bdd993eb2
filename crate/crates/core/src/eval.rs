//! Classifier-based generation quality metrics: an inception-like score, a
//! Fréchet distance on learned features, conditional accuracy, and
//! intra-class diversity.
//!
//! No pretrained scoring network exists for arbitrary series data, so every
//! metric runs through a small classifier trained on the real train split.
//! Each report carries that classifier's test accuracy so the reader can
//! judge how much the scores mean; a classifier below 1.5/N accuracy refuses
//! to produce metrics at all.

use crate::datasets::{DataSplit, LabeledImageDataset, LabeledSeriesDataset};
use crate::error::{Error, Result};
use crate::models::Generator;
use crate::nn::{Conv2D, DenseLayer, InitScheme, Layer};
use crate::noise::NoiseSpec;
use crate::training::{adam_step, AdamState, TrainConfig};
use crate::{Graph, Param, Tensor};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Classifier training settings (plain supervised Adam).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Epoch cap; training stops early at the loss floor.
    pub classifier_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Mean train cross-entropy below which training counts as converged.
    /// Scores depend on prediction confidence, not just accuracy, so the
    /// stop criterion is the loss.
    pub loss_floor: f64,
    /// Generated samples per class for conditional accuracy and diversity.
    pub samples_per_class: usize,
    /// Width of the penultimate feature layer.
    pub feature_dim: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            classifier_epochs: 400,
            batch_size: 64,
            learning_rate: 1e-3,
            loss_floor: 0.01,
            samples_per_class: 100,
            feature_dim: FEATURE_DIM,
        }
    }
}

/// Default width of the classifier's penultimate feature layer.
pub const FEATURE_DIM: usize = 128;

enum ClassifierNet {
    Series {
        hidden: DenseLayer<f64>,
        head: DenseLayer<f64>,
    },
    Image {
        conv1: Conv2D<f64>,
        conv2: Conv2D<f64>,
        feat: DenseLayer<f64>,
        head: DenseLayer<f64>,
    },
}

impl ClassifierNet {
    fn params(&self) -> Vec<Param> {
        match self {
            ClassifierNet::Series { hidden, head } => [hidden.params(), head.params()].concat(),
            ClassifierNet::Image { conv1, conv2, feat, head } => {
                [conv1.params(), conv2.params(), feat.params(), head.params()].concat()
            }
        }
    }

    /// Penultimate features, then logits.
    fn forward(&self, g: &mut Graph, x: crate::Var) -> Result<(crate::Var, crate::Var)> {
        match self {
            ClassifierNet::Series { hidden, head } => {
                let h = hidden.forward(g, x)?;
                let features = g.relu(h)?;
                let logits = head.forward(g, features)?;
                Ok((features, logits))
            }
            ClassifierNet::Image { conv1, conv2, feat, head } => {
                let batch = g.shape(x)[0];
                let y = conv1.forward(g, x)?;
                let y = g.relu(y)?;
                let y = conv2.forward(g, y)?;
                let y = g.relu(y)?;
                let y = g.reshape(y, vec![batch, feat.in_dim()])?;
                let y = feat.forward(g, y)?;
                let features = g.relu(y)?;
                let logits = head.forward(g, features)?;
                Ok((features, logits))
            }
        }
    }
}

/// Frozen scoring network plus the bookkeeping the metrics need.
pub struct EvalClassifier {
    net: ClassifierNet,
    pub num_classes: usize,
    pub feature_dim: usize,
    /// Accuracy on the held-out test split; reported with every metric.
    pub test_accuracy: f64,
    /// Global feature scale (sqrt of total train-feature variance); dividing
    /// by it makes Fréchet distances comparable across classifiers.
    feature_scale: f64,
}

enum SplitRef<'a> {
    Series(&'a DataSplit<LabeledSeriesDataset>),
    Images(&'a DataSplit<LabeledImageDataset>),
}

impl<'a> SplitRef<'a> {
    fn num_classes(&self) -> usize {
        match self {
            SplitRef::Series(s) => s.train.num_classes,
            SplitRef::Images(s) => s.train.num_classes,
        }
    }

    fn train_len(&self) -> usize {
        match self {
            SplitRef::Series(s) => s.train.len(),
            SplitRef::Images(s) => s.train.len(),
        }
    }

    fn batch(&self, train: bool, idx: &[usize]) -> (Tensor, Vec<usize>) {
        match self {
            SplitRef::Series(s) => {
                let d = if train { &s.train } else { &s.test };
                (d.batch(idx), idx.iter().map(|&i| d.labels[i]).collect())
            }
            SplitRef::Images(s) => {
                let d = if train { &s.train } else { &s.test };
                (d.batch(idx), idx.iter().map(|&i| d.labels[i]).collect())
            }
        }
    }

    fn test_len(&self) -> usize {
        match self {
            SplitRef::Series(s) => s.test.len(),
            SplitRef::Images(s) => s.test.len(),
        }
    }
}

fn train_classifier_impl(
    data: SplitRef,
    config: &EvalConfig,
    seed: u64,
) -> Result<EvalClassifier> {
    let n = data.num_classes();
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 classes to score, got {n}")));
    }
    if data.train_len() == 0 || data.test_len() == 0 {
        return Err(Error::domain("classifier needs non-empty train and test splits".to_string()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let feature_dim = config.feature_dim;
    let net = match &data {
        SplitRef::Series(s) => {
            let hidden = DenseLayer::new("clf.hidden", s.train.series_len, feature_dim);
            let head = DenseLayer::new("clf.head", feature_dim, n);
            hidden.init(InitScheme::Normal { std: 0.1 }, &mut rng);
            head.init(InitScheme::Normal { std: 0.1 }, &mut rng);
            ClassifierNet::Series { hidden, head }
        }
        SplitRef::Images(s) => {
            let (h, w) = (s.train.height, s.train.width);
            if h % 4 != 0 || w % 4 != 0 {
                return Err(Error::config(format!(
                    "image extents must be divisible by 4 for the conv stack, got {h}x{w}"
                )));
            }
            let conv1 = Conv2D::new("clf.conv1", s.train.channels, 32, 4, 2, 1);
            let conv2 = Conv2D::new("clf.conv2", 32, 64, 4, 2, 1);
            let feat = DenseLayer::new("clf.feat", 64 * (h / 4) * (w / 4), feature_dim);
            let head = DenseLayer::new("clf.head", feature_dim, n);
            conv1.init(InitScheme::Normal { std: 0.05 }, &mut rng);
            conv2.init(InitScheme::Normal { std: 0.05 }, &mut rng);
            feat.init(InitScheme::Normal { std: 0.05 }, &mut rng);
            head.init(InitScheme::Normal { std: 0.05 }, &mut rng);
            ClassifierNet::Image { conv1, conv2, feat, head }
        }
    };

    let params = net.params();
    for p in &params {
        p.zero_grad();
    }
    let mut opt = AdamState::new(&params);
    let opt_config = TrainConfig {
        learning_rate: config.learning_rate,
        beta1: 0.9,
        beta2: 0.999,
        ..TrainConfig::default()
    };
    let mut indices: Vec<usize> = (0..data.train_len()).collect();
    for _epoch in 0..config.classifier_epochs {
        indices.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in indices.chunks(config.batch_size) {
            let (batch, labels) = data.batch(true, chunk);
            let mut g = Graph::new();
            let x = g.constant(batch);
            let (_, logits) = net.forward(&mut g, x)?;
            let loss = g.softmax_cross_entropy(logits, &labels)?;
            let loss_val = g.value(loss).item();
            if !loss_val.is_finite() {
                return Err(Error::numeric("classifier loss became non-finite".to_string()));
            }
            loss_sum += loss_val;
            batches += 1;
            g.backward(loss)?;
            adam_step(&mut opt, &params, &opt_config)?;
            for p in &params {
                p.zero_grad();
            }
        }
        if loss_sum / batches as f64 <= config.loss_floor {
            break;
        }
    }

    // held-out accuracy
    let mut correct = 0usize;
    let test_idx: Vec<usize> = (0..data.test_len()).collect();
    for chunk in test_idx.chunks(256) {
        let (batch, labels) = data.batch(false, chunk);
        let mut g = Graph::new();
        let x = g.constant(batch);
        let (_, logits) = net.forward(&mut g, x)?;
        correct += count_correct(g.value(logits).data(), &labels, n);
    }
    let test_accuracy = correct as f64 / data.test_len() as f64;
    if test_accuracy < 1.5 / n as f64 {
        return Err(Error::MetricUnreliable(format!(
            "classifier test accuracy {test_accuracy:.3} is barely above chance (1/{n}); refusing to score"
        )));
    }

    let mut clf = EvalClassifier {
        net,
        num_classes: n,
        feature_dim,
        test_accuracy,
        feature_scale: 1.0,
    };

    // fix the feature scale from train-split features: total variance 1
    let mut feats = Vec::new();
    for chunk in (0..data.train_len()).collect::<Vec<_>>().chunks(256) {
        let (batch, _) = data.batch(true, chunk);
        feats.extend(clf.features(&batch)?);
    }
    let rows = data.train_len();
    let mut total_var = 0.0;
    for d in 0..feature_dim {
        let mean = (0..rows).map(|r| feats[r * feature_dim + d]).sum::<f64>() / rows as f64;
        total_var += (0..rows).map(|r| (feats[r * feature_dim + d] - mean).powi(2)).sum::<f64>()
            / (rows as f64 - 1.0).max(1.0);
    }
    clf.feature_scale = total_var.sqrt().max(1e-12);
    Ok(clf)
}

fn count_correct(logits: &[f64], labels: &[usize], n: usize) -> usize {
    logits
        .chunks_exact(n)
        .zip(labels)
        .filter(|(row, &label)| argmax(row) == label)
        .count()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Trains the scoring classifier for a series dataset.
pub fn train_eval_classifier(
    data: &DataSplit<LabeledSeriesDataset>,
    config: &EvalConfig,
    seed: u64,
) -> Result<EvalClassifier> {
    train_classifier_impl(SplitRef::Series(data), config, seed)
}

/// Trains the scoring classifier for an image dataset.
pub fn train_eval_classifier_images(
    data: &DataSplit<LabeledImageDataset>,
    config: &EvalConfig,
    seed: u64,
) -> Result<EvalClassifier> {
    train_classifier_impl(SplitRef::Images(data), config, seed)
}

impl EvalClassifier {
    /// Softmax class probabilities, row-major (batch, N).
    pub fn probabilities(&self, inputs: &Tensor) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let x = g.constant(inputs.clone());
        let (_, logits) = self.net.forward(&mut g, x)?;
        let probs = g.softmax(logits)?;
        Ok(g.value(probs).data().to_vec())
    }

    /// Scale-normalized penultimate features, row-major (batch, feature_dim).
    pub fn features(&self, inputs: &Tensor) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let x = g.constant(inputs.clone());
        let (features, _) = self.net.forward(&mut g, x)?;
        let mut out = g.value(features).data().to_vec();
        if self.feature_scale != 1.0 {
            for v in &mut out {
                *v /= self.feature_scale;
            }
        }
        Ok(out)
    }

    pub fn predict(&self, inputs: &Tensor) -> Result<Vec<usize>> {
        let probs = self.probabilities(inputs)?;
        Ok(probs.chunks_exact(self.num_classes).map(argmax).collect())
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// exp(E_x[KL(p(y|x) || p(y))]) over an explicit probability table; `p(y)` is
/// the mean of the rows. Lies in [1, N].
pub fn score_from_probabilities(probs: &[f64], num_classes: usize) -> Result<f64> {
    if num_classes == 0 || probs.len() % num_classes != 0 {
        return Err(Error::shape(format!(
            "probability table of {} values is not divisible into {num_classes} classes",
            probs.len()
        )));
    }
    let rows = probs.len() / num_classes;
    if rows < 2 {
        return Err(Error::domain(format!("need at least 2 samples to score, got {rows}")));
    }
    let mut marginal = vec![0.0; num_classes];
    for row in probs.chunks_exact(num_classes) {
        for (m, &p) in marginal.iter_mut().zip(row) {
            *m += p / rows as f64;
        }
    }
    let mut total_kl = 0.0;
    for row in probs.chunks_exact(num_classes) {
        for (&p, &q) in row.iter().zip(&marginal) {
            if p > 0.0 {
                total_kl += p * (p / q).ln();
            }
        }
    }
    Ok((total_kl / rows as f64).exp())
}

/// Inception-like score of a sample set under the classifier.
pub fn inception_like_score(clf: &EvalClassifier, samples: &Tensor) -> Result<f64> {
    if samples.shape()[0] < 2 {
        return Err(Error::domain(format!(
            "need at least 2 samples to score, got {}",
            samples.shape()[0]
        )));
    }
    let probs = clf.probabilities(samples)?;
    score_from_probabilities(&probs, clf.num_classes)
}

/// Squared Fréchet distance between Gaussian fits of two feature sets
/// (row-major, `dim` columns): |μ1−μ2|² + Tr(C1 + C2 − 2·(C1C2)^½).
///
/// The matrix square root comes from the eigendecomposition of the
/// symmetrized product with negative eigenvalues clamped to zero.
pub fn frechet_from_features(real: &[f64], fake: &[f64], dim: usize) -> Result<f64> {
    let n1 = real.len() / dim;
    let n2 = fake.len() / dim;
    if real.len() % dim != 0 || fake.len() % dim != 0 {
        return Err(Error::shape(format!("feature buffers not divisible by dim {dim}")));
    }
    for (name, n) in [("first", n1), ("second", n2)] {
        if n < dim + 1 {
            return Err(Error::domain(format!(
                "{name} sample set has {n} rows; covariance needs at least {} for {dim}-dim features",
                dim + 1
            )));
        }
    }
    let (mu1, c1) = gaussian_fit(real, dim);
    let (mu2, c2) = gaussian_fit(fake, dim);

    let mut mean_term = 0.0;
    for (a, b) in mu1.iter().zip(&mu2) {
        let d = a - b;
        mean_term += d * d;
    }

    // fixed-order product of the two (bitwise symmetric) covariances
    let mut product = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += c1[i * dim + k] * c2[k * dim + j];
            }
            product[i * dim + j] = acc;
        }
    }
    let mut sym = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            sym[(i, j)] = 0.5 * (product[i * dim + j] + product[j * dim + i]);
        }
    }
    let eigenvalues = sym.symmetric_eigenvalues();
    let sqrt_trace: f64 = eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();

    let tr1: f64 = (0..dim).map(|i| c1[i * dim + i]).sum();
    let tr2: f64 = (0..dim).map(|i| c2[i * dim + i]).sum();
    // tr1 + tr2 groups first so the result is bit-symmetric in the arguments
    Ok(mean_term + (tr1 + tr2) - 2.0 * sqrt_trace)
}

/// Mean and (sample) covariance with bitwise-symmetric storage.
fn gaussian_fit(rows: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() / dim;
    let mut mean = vec![0.0; dim];
    for row in rows.chunks_exact(dim) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let denom = (n as f64 - 1.0).max(1.0);
    let mut cov = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let mut acc = 0.0;
            for row in rows.chunks_exact(dim) {
                acc += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
            let v = acc / denom;
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }
    (mean, cov)
}

/// Fréchet distance between classifier features of two sample sets.
pub fn frechet_feature_distance(
    clf: &EvalClassifier,
    real_samples: &Tensor,
    fake_samples: &Tensor,
) -> Result<f64> {
    let real = clf.features(real_samples)?;
    let fake = clf.features(fake_samples)?;
    frechet_from_features(&real, &fake, clf.feature_dim)
}

/// Conditional accuracy and its per-class breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct CondAccuracy {
    pub macro_avg: f64,
    pub per_class: Vec<f64>,
}

/// Fraction of per-class sample tensors the classifier assigns to their
/// intended class; macro-averaged.
pub fn conditional_accuracy_from_samples(
    clf: &EvalClassifier,
    samples_by_class: &[Tensor],
) -> Result<CondAccuracy> {
    if samples_by_class.len() != clf.num_classes {
        return Err(Error::shape(format!(
            "need one sample tensor per class ({}), got {}",
            clf.num_classes,
            samples_by_class.len()
        )));
    }
    let mut per_class = Vec::with_capacity(samples_by_class.len());
    for (class, samples) in samples_by_class.iter().enumerate() {
        let preds = clf.predict(samples)?;
        if preds.is_empty() {
            return Err(Error::domain(format!("class {class} has no samples")));
        }
        let hits = preds.iter().filter(|&&p| p == class).count();
        per_class.push(hits as f64 / preds.len() as f64);
    }
    let macro_avg = per_class.iter().sum::<f64>() / per_class.len() as f64;
    Ok(CondAccuracy { macro_avg, per_class })
}

/// Generates `per_class_count` samples for each class and measures how often
/// the classifier recovers the intended class.
pub fn conditional_accuracy<R: Rng + ?Sized>(
    clf: &EvalClassifier,
    gen: &Generator,
    noise_spec: &NoiseSpec,
    per_class_count: usize,
    rng: &mut R,
) -> Result<CondAccuracy> {
    let samples = generate_by_class(gen, noise_spec, per_class_count, rng)?;
    conditional_accuracy_from_samples(clf, &samples)
}

/// One tensor of generated samples per class.
pub fn generate_by_class<R: Rng + ?Sized>(
    gen: &Generator,
    noise_spec: &NoiseSpec,
    per_class_count: usize,
    rng: &mut R,
) -> Result<Vec<Tensor>> {
    if per_class_count == 0 {
        return Err(Error::domain("need at least one sample per class".to_string()));
    }
    let mut out = Vec::with_capacity(noise_spec.num_classes);
    for class in 0..noise_spec.num_classes {
        let classes = vec![class; per_class_count];
        let mut g = Graph::new();
        g.set_frozen(true);
        let y = gen.generate_for_classes(&mut g, noise_spec, &classes, rng)?;
        out.push(g.value(y).clone());
    }
    Ok(out)
}

/// Mean pairwise Euclidean distance within each class's sample tensor
/// (rows flattened). Zero means total mode collapse.
pub fn intra_class_diversity(samples_by_class: &[Tensor]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(samples_by_class.len());
    for (class, samples) in samples_by_class.iter().enumerate() {
        let n = samples.shape()[0];
        if n < 2 {
            return Err(Error::domain(format!(
                "class {class} has {n} samples; diversity needs at least 2"
            )));
        }
        let width = samples.numel() / n;
        let data = samples.data();
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let mut d2 = 0.0;
                for (a, b) in data[i * width..(i + 1) * width]
                    .iter()
                    .zip(&data[j * width..(j + 1) * width])
                {
                    let d = a - b;
                    d2 += d * d;
                }
                total += d2.sqrt();
            }
        }
        out.push(total / (n * (n - 1) / 2) as f64);
    }
    Ok(out)
}

/// Full evaluation report for one generator, plus the classifier quality.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub score: f64,
    pub frechet_distance: f64,
    pub conditional_accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub intra_class_diversity: Vec<f64>,
    pub classifier_test_accuracy: f64,
}

/// Scores a trained generator against a real reference sample tensor.
pub fn evaluate_generator<R: Rng + ?Sized>(
    clf: &EvalClassifier,
    gen: &Generator,
    noise_spec: &NoiseSpec,
    real_reference: &Tensor,
    per_class_count: usize,
    rng: &mut R,
) -> Result<MetricReport> {
    let by_class = generate_by_class(gen, noise_spec, per_class_count, rng)?;
    let cond = conditional_accuracy_from_samples(clf, &by_class)?;
    let diversity = intra_class_diversity(&by_class)?;

    // pool the per-class tensors for the set-level scores
    let per = by_class[0].shape()[0];
    let mut pooled = Vec::with_capacity(by_class.len() * by_class[0].numel());
    for t in &by_class {
        pooled.extend_from_slice(t.data());
    }
    let mut shape = by_class[0].shape().to_vec();
    shape[0] = per * by_class.len();
    let pooled = Tensor::new(shape, pooled)?;

    Ok(MetricReport {
        score: inception_like_score(clf, &pooled)?,
        frechet_distance: frechet_feature_distance(clf, real_reference, &pooled)?,
        conditional_accuracy: cond.macro_avg,
        per_class_accuracy: cond.per_class,
        intra_class_diversity: diversity,
        classifier_test_accuracy: clf.test_accuracy,
    })
}

/// The real-data reference row: test samples scored as if generated, with
/// the Fréchet distance taken test-against-train.
pub fn evaluate_real_reference(
    clf: &EvalClassifier,
    split: &DataSplit<LabeledSeriesDataset>,
) -> Result<MetricReport> {
    let all_test: Vec<usize> = (0..split.test.len()).collect();
    let test_batch = split.test.batch(&all_test);
    let all_train: Vec<usize> = (0..split.train.len()).collect();
    let train_batch = split.train.batch(&all_train);

    let by_class: Vec<Tensor> = (0..split.test.num_classes)
        .map(|c| split.test.batch(&split.test.indices_of_class(c)))
        .collect();
    let cond = conditional_accuracy_from_samples(clf, &by_class)?;
    Ok(MetricReport {
        score: inception_like_score(clf, &test_batch)?,
        frechet_distance: frechet_feature_distance(clf, &train_batch, &test_batch)?,
        conditional_accuracy: cond.macro_avg,
        per_class_accuracy: cond.per_class,
        intra_class_diversity: intra_class_diversity(&by_class)?,
        classifier_test_accuracy: clf.test_accuracy,
    })
}
