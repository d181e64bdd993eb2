//! Dataset ingestion: UCR-format labeled series, MNIST-format IDX images,
//! synthetic sinusoid sets for verification, and normalization.
//!
//! Format contracts are bit-exact. A UCR file holds one series per line,
//! tab-separated, class label first. IDX files are big-endian with magic
//! 0x00000803 (images) / 0x00000801 (labels). Matching writers sit next to
//! the loaders so round trips can be checked without external data.

use crate::error::{Error, Result};
use crate::Tensor;
use rand::Rng;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

/// Univariate labeled time series, all rows the same length, labels densely
/// re-indexed to 0..N-1.
#[derive(Debug, Clone)]
pub struct LabeledSeriesDataset {
    pub name: String,
    pub num_classes: usize,
    pub series_len: usize,
    /// Row-major (n, series_len).
    pub series: Vec<f64>,
    pub labels: Vec<usize>,
    /// Original label values in sorted order; index = dense label.
    pub label_values: Vec<f64>,
}

impl LabeledSeriesDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.series[i * self.series_len..(i + 1) * self.series_len]
    }

    /// Gathers the given rows into a (k, T) tensor.
    pub fn batch(&self, indices: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(indices.len() * self.series_len);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Tensor::new(vec![indices.len(), self.series_len], data).expect("rectangular batch")
    }

    pub fn indices_of_class(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.series.len() != self.len() * self.series_len {
            return Err(Error::shape("series storage does not match row count".to_string()));
        }
        let mut seen = vec![false; self.num_classes];
        for &l in &self.labels {
            if l >= self.num_classes {
                return Err(Error::format(format!("label {l} outside 0..{}", self.num_classes)));
            }
            seen[l] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::format("label set is not dense".to_string()));
        }
        Ok(())
    }
}

/// Labeled image set with values in [-1, 1].
#[derive(Debug, Clone)]
pub struct LabeledImageDataset {
    pub name: String,
    pub num_classes: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Row-major (n, channels, height, width).
    pub images: Vec<f64>,
    pub labels: Vec<usize>,
}

impl LabeledImageDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_numel(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.image_numel();
        &self.images[i * n..(i + 1) * n]
    }

    /// Gathers the given images into a (k, ch, H, W) tensor.
    pub fn batch(&self, indices: &[usize]) -> Tensor {
        let n = self.image_numel();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(self.image(i));
        }
        Tensor::new(vec![indices.len(), self.channels, self.height, self.width], data)
            .expect("consistent image extents")
    }

    pub fn indices_of_class(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }
}

/// Train/test pair sharing one label mapping and one normalization.
#[derive(Debug, Clone)]
pub struct DataSplit<D> {
    pub train: D,
    pub test: D,
}

// ---------------------------------------------------------------------------
// UCR-format series files
// ---------------------------------------------------------------------------

fn parse_ucr_rows(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut raw_labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut values = Vec::new();
        for (field_no, field) in line.split('\t').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(format!(
                    "{}: row {}: field {} is not numeric: {field:?}",
                    path.display(),
                    line_no + 1,
                    field_no + 1
                ))
            })?;
            values.push(v);
        }
        if values.len() < 2 {
            return Err(Error::format(format!(
                "{}: row {}: need a label and at least one value",
                path.display(),
                line_no + 1
            )));
        }
        let label = values.remove(0);
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::format(format!(
                    "{}: row {} has {} values, expected {w}",
                    path.display(),
                    line_no + 1,
                    values.len()
                )));
            }
            _ => {}
        }
        raw_labels.push(label);
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::format(format!("{}: no series rows", path.display())));
    }
    Ok((raw_labels, rows))
}

fn dense_label_map(raw: &[f64]) -> (Vec<f64>, BTreeMap<u64, usize>) {
    // order by the label's numeric value, stably, using the bit pattern of
    // the (finite) f64 as the map key
    let mut values: Vec<f64> = raw.to_vec();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite labels"));
    values.dedup();
    let map = values.iter().enumerate().map(|(i, v)| (v.to_bits(), i)).collect();
    (values, map)
}

fn assemble_series(
    name: &str,
    raw_labels: Vec<f64>,
    rows: Vec<Vec<f64>>,
    label_values: &[f64],
    map: &BTreeMap<u64, usize>,
) -> Result<LabeledSeriesDataset> {
    let series_len = rows[0].len();
    let labels = raw_labels
        .iter()
        .map(|l| {
            map.get(&l.to_bits()).copied().ok_or_else(|| {
                Error::format(format!("label {l} missing from the joint label map"))
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    let dataset = LabeledSeriesDataset {
        name: name.to_string(),
        num_classes: label_values.len(),
        series_len,
        series: rows.into_iter().flatten().collect(),
        labels,
        label_values: label_values.to_vec(),
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Loads one UCR-format TSV file; labels are re-indexed to 0..N-1 in sorted
/// original-value order.
pub fn load_ucr_tsv(path: impl AsRef<Path>) -> Result<LabeledSeriesDataset> {
    let path = path.as_ref();
    let (raw_labels, rows) = parse_ucr_rows(path)?;
    let (label_values, map) = dense_label_map(&raw_labels);
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    assemble_series(&name, raw_labels, rows, &label_values, &map)
}

/// Loads a train/test pair with one label mapping across both files.
pub fn load_ucr_pair(
    train_path: impl AsRef<Path>,
    test_path: impl AsRef<Path>,
) -> Result<DataSplit<LabeledSeriesDataset>> {
    let (train_raw, train_rows) = parse_ucr_rows(train_path.as_ref())?;
    let (test_raw, test_rows) = parse_ucr_rows(test_path.as_ref())?;
    if train_rows[0].len() != test_rows[0].len() {
        return Err(Error::format(format!(
            "train series length {} differs from test {}",
            train_rows[0].len(),
            test_rows[0].len()
        )));
    }
    let joint: Vec<f64> = train_raw.iter().chain(&test_raw).copied().collect();
    let (label_values, map) = dense_label_map(&joint);
    let name = train_path
        .as_ref()
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(DataSplit {
        train: assemble_series(&name, train_raw, train_rows, &label_values, &map)?,
        test: assemble_series(&name, test_raw, test_rows, &label_values, &map)?,
    })
}

/// Writes a dataset in the UCR TSV format (original label values restored).
pub fn write_ucr_tsv(dataset: &LabeledSeriesDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..dataset.len() {
        let label = dataset.label_values[dataset.labels[i]];
        write!(out, "{label}")?;
        for v in dataset.row(i) {
            write!(out, "\t{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// IDX-format image files
// ---------------------------------------------------------------------------

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct IdxReader {
    data: Vec<u8>,
    pos: usize,
    path: String,
}

impl IdxReader {
    fn open(path: &Path) -> Result<Self> {
        let mut data = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut data)?;
        Ok(IdxReader { data, pos: 0, path: path.display().to_string() })
    }

    fn u32_be(&mut self) -> Result<u32> {
        if self.pos + 4 > self.data.len() {
            return Err(Error::format(format!("{}: truncated header", self.path)));
        }
        let v = u32::from_be_bytes(self.data[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v)
    }

    fn bytes(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::format(format!(
                "{}: truncated payload, wanted {n} bytes at offset {}",
                self.path, self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::format(format!(
                "{}: {} trailing bytes after payload",
                self.path,
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Loads an IDX image/label file pair; pixels scale from [0, 255] to [-1, 1].
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledImageDataset> {
    let images_path = images_path.as_ref();
    let mut img = IdxReader::open(images_path)?;
    let magic = img.u32_be()?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(format!(
            "{}: bad image magic {magic:#010x}, want {IDX_IMAGES_MAGIC:#010x}",
            images_path.display()
        )));
    }
    let n = img.u32_be()? as usize;
    let h = img.u32_be()? as usize;
    let w = img.u32_be()? as usize;
    let pixels = img.bytes(n * h * w)?.to_vec();
    img.finish()?;

    let labels_path = labels_path.as_ref();
    let mut lab = IdxReader::open(labels_path)?;
    let magic = lab.u32_be()?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(format!(
            "{}: bad label magic {magic:#010x}, want {IDX_LABELS_MAGIC:#010x}",
            labels_path.display()
        )));
    }
    let n_labels = lab.u32_be()? as usize;
    if n_labels != n {
        return Err(Error::format(format!(
            "image count {n} does not match label count {n_labels}"
        )));
    }
    let raw_labels = lab.bytes(n)?.to_vec();
    lab.finish()?;

    // dense re-index in sorted original order, as for series labels
    let mut values: Vec<u8> = raw_labels.clone();
    values.sort_unstable();
    values.dedup();
    let map: BTreeMap<u8, usize> = values.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|v| map[v]).collect();

    let images: Vec<f64> = pixels.iter().map(|&p| f64::from(p) / 255.0 * 2.0 - 1.0).collect();
    Ok(LabeledImageDataset {
        name: images_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        num_classes: values.len(),
        channels: 1,
        height: h,
        width: w,
        images,
        labels,
    })
}

/// Writes grayscale images and labels as an IDX file pair.
pub fn write_mnist_idx(
    pixels: &[u8],
    labels: &[u8],
    height: usize,
    width: usize,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let n = labels.len();
    if pixels.len() != n * height * width {
        return Err(Error::shape(format!(
            "pixel buffer holds {} bytes, want {n} x {height} x {width}",
            pixels.len()
        )));
    }
    let mut img = std::io::BufWriter::new(std::fs::File::create(images_path)?);
    img.write_all(&IDX_IMAGES_MAGIC.to_be_bytes())?;
    img.write_all(&(n as u32).to_be_bytes())?;
    img.write_all(&(height as u32).to_be_bytes())?;
    img.write_all(&(width as u32).to_be_bytes())?;
    img.write_all(pixels)?;
    img.flush()?;

    let mut lab = std::io::BufWriter::new(std::fs::File::create(labels_path)?);
    lab.write_all(&IDX_LABELS_MAGIC.to_be_bytes())?;
    lab.write_all(&(n as u32).to_be_bytes())?;
    lab.write_all(labels)?;
    lab.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic series
// ---------------------------------------------------------------------------

/// Class-separable sinusoid generator for desk-scale verification. Class k
/// is `amplitude_k * sin(2π f_k t / T + phase_k)` plus Gaussian noise;
/// default frequencies 2k+1 cycles per window keep classes harmonically
/// separated.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub series_len: usize,
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    pub noise_std: f64,
    pub samples: usize,
}

impl SyntheticSpec {
    pub fn new(num_classes: usize, series_len: usize, samples: usize) -> Self {
        SyntheticSpec {
            num_classes,
            series_len,
            frequencies: (0..num_classes).map(|k| (2 * k + 1) as f64).collect(),
            amplitudes: vec![0.8; num_classes],
            phases: vec![0.0; num_classes],
            noise_std: 0.05,
            samples,
        }
    }

    pub fn with_noise_std(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.series_len == 0 || self.samples == 0 {
            return Err(Error::config("synthetic spec extents must be positive".to_string()));
        }
        if self.frequencies.len() != self.num_classes
            || self.amplitudes.len() != self.num_classes
            || self.phases.len() != self.num_classes
        {
            return Err(Error::config("per-class parameter lists must have one entry per class".to_string()));
        }
        let mut f = self.frequencies.clone();
        f.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if f.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("classes must have distinct frequencies".to_string()));
        }
        Ok(())
    }

    /// Noise-free class template at each time step.
    pub fn template(&self, class: usize) -> Vec<f64> {
        let t_len = self.series_len as f64;
        (0..self.series_len)
            .map(|t| {
                self.amplitudes[class]
                    * (2.0 * std::f64::consts::PI * self.frequencies[class] * t as f64 / t_len
                        + self.phases[class])
                        .sin()
            })
            .collect()
    }
}

/// Balanced, deterministic synthetic dataset (classes round-robin).
pub fn synth_make<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<LabeledSeriesDataset> {
    spec.validate()?;
    let templates: Vec<Vec<f64>> = (0..spec.num_classes).map(|k| spec.template(k)).collect();
    let mut series = Vec::with_capacity(spec.samples * spec.series_len);
    let mut labels = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples {
        let class = i % spec.num_classes;
        labels.push(class);
        series.extend(
            templates[class]
                .iter()
                .map(|&v| v + spec.noise_std * <f64 as crate::scalar::Scalar>::std_normal(rng)),
        );
    }
    let dataset = LabeledSeriesDataset {
        name: "synthetic".to_string(),
        num_classes: spec.num_classes,
        series_len: spec.series_len,
        series,
        labels,
        label_values: (0..spec.num_classes).map(|k| k as f64).collect(),
    };
    dataset.validate()?;
    Ok(dataset)
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Affine map of the train-split [min, max] onto [-1, 1].
    MinMaxPm1,
    /// Standardize by the train-split mean and standard deviation.
    ZScore,
}

/// The fitted affine map `y = (x - offset) / scale`, invertible for
/// round-tripping generated samples back to data units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormMap {
    pub mode: NormMode,
    pub offset: f64,
    pub scale: f64,
}

impl NormMap {
    /// Fits on the train split only.
    pub fn fit(mode: NormMode, train_values: &[f64]) -> Result<Self> {
        match mode {
            NormMode::MinMaxPm1 => {
                let min = train_values.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = train_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if !(max > min) {
                    return Err(Error::domain(format!(
                        "degenerate value range [{min}, {max}] cannot be min-max normalized"
                    )));
                }
                // y = 2 (x - min)/(max - min) - 1  ==  (x - mid) / (half-range)
                Ok(NormMap {
                    mode,
                    offset: (min + max) / 2.0,
                    scale: (max - min) / 2.0,
                })
            }
            NormMode::ZScore => {
                let n = train_values.len() as f64;
                let mean = train_values.iter().sum::<f64>() / n;
                let var = train_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                if !(std > 0.0) {
                    return Err(Error::domain("zero-variance data cannot be z-scored".to_string()));
                }
                Ok(NormMap { mode, offset: mean, scale: std })
            }
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.offset) / self.scale
    }

    pub fn invert(&self, y: f64) -> f64 {
        y * self.scale + self.offset
    }

    pub fn apply_all(&self, values: &mut [f64]) {
        for v in values.iter_mut() {
            *v = self.apply(*v);
        }
    }
}

/// Normalizes a train/test split in place with train-split statistics and
/// returns the fitted map.
pub fn normalize(
    split: &mut DataSplit<LabeledSeriesDataset>,
    mode: NormMode,
) -> Result<NormMap> {
    let map = NormMap::fit(mode, &split.train.series)?;
    map.apply_all(&mut split.train.series);
    map.apply_all(&mut split.test.series);
    Ok(map)
}
