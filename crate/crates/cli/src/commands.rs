//! The five workflows behind the CLI verbs.

use crate::config::{
    model_identity, noise_spec_for, BenchmarkConfig, DatasetSource, ExperimentConfig,
};
use crate::report::{
    write_benchmark_csv, write_epochs_csv, write_metrics_csv, write_samples_csv, BenchmarkRow,
};
use crate::{checkpoint, pgm, svg};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use snsgan_core::datasets::{
    load_mnist_idx, load_ucr_pair, load_ucr_tsv, normalize, synth_make, DataSplit,
    LabeledImageDataset, LabeledSeriesDataset, NormMode, SyntheticSpec,
};
use snsgan_core::error::{Error, Result};
use snsgan_core::eval::{
    evaluate_generator, evaluate_real_reference, train_eval_classifier,
    train_eval_classifier_images, EvalClassifier, MetricReport,
};
use snsgan_core::models::{build, DataShape, Discriminator, Generator, ModelVariant};
use snsgan_core::nn::Layer;
use snsgan_core::noise::NoiseSpec;
use snsgan_core::training::{train_gan, Callbacks, TrainConfig, TrainingSet};
use snsgan_core::{Param, Tensor};
use std::path::{Path, PathBuf};

// deterministic stream offsets so each phase draws from its own rng
const SEED_BUILD: u64 = 0x01;
const SEED_CLASSIFIER: u64 = 0x02;
const SEED_EVAL: u64 = 0x03;
const SEED_SYNTH_TRAIN: u64 = 0xDA7A_0001;
const SEED_SYNTH_TEST: u64 = 0xDA7A_0002;

/// A dataset loaded and normalized, ready for training.
pub enum LoadedData {
    Series(DataSplit<LabeledSeriesDataset>),
    Images(DataSplit<LabeledImageDataset>),
}

impl LoadedData {
    pub fn num_classes(&self) -> usize {
        match self {
            LoadedData::Series(s) => s.train.num_classes,
            LoadedData::Images(s) => s.train.num_classes,
        }
    }

    pub fn data_shape(&self) -> DataShape {
        match self {
            LoadedData::Series(s) => DataShape::Series { len: s.train.series_len },
            LoadedData::Images(s) => DataShape::Image {
                channels: s.train.channels,
                height: s.train.height,
                width: s.train.width,
            },
        }
    }

    pub fn shape_desc(&self) -> String {
        match self.data_shape() {
            DataShape::Series { len } => format!("series:{len}"),
            DataShape::Image { channels, height, width } => {
                format!("image:{channels}x{height}x{width}")
            }
        }
    }

    fn train_reference(&self) -> Tensor {
        match self {
            LoadedData::Series(s) => {
                let idx: Vec<usize> = (0..s.train.len()).collect();
                s.train.batch(&idx)
            }
            LoadedData::Images(s) => {
                let idx: Vec<usize> = (0..s.train.len()).collect();
                s.train.batch(&idx)
            }
        }
    }

    fn train_classifier(&self, config: &ExperimentConfig, seed: u64) -> Result<EvalClassifier> {
        match self {
            LoadedData::Series(s) => train_eval_classifier(s, &config.eval, seed),
            LoadedData::Images(s) => train_eval_classifier_images(s, &config.eval, seed),
        }
    }
}

/// Loads and normalizes the dataset a config names, verifying any expected
/// characteristics.
pub fn load_dataset(source: &DatasetSource) -> Result<LoadedData> {
    match source {
        DatasetSource::Synthetic { classes, length, train_samples, test_samples, noise_std } => {
            let spec = SyntheticSpec::new(*classes, *length, *train_samples)
                .with_noise_std(*noise_std);
            let train = synth_make(&spec, &mut ChaCha12Rng::seed_from_u64(SEED_SYNTH_TRAIN))?;
            let test_spec = SyntheticSpec { samples: *test_samples, ..spec };
            let test = synth_make(&test_spec, &mut ChaCha12Rng::seed_from_u64(SEED_SYNTH_TEST))?;
            let mut split = DataSplit { train, test };
            normalize(&mut split, NormMode::MinMaxPm1)?;
            Ok(LoadedData::Series(split))
        }
        DatasetSource::Ucr { name, train_path, test_path, expect_classes, expect_length, expect_train } => {
            let mut split = load_ucr_pair(train_path, test_path)?;
            split.train.name = name.clone();
            split.test.name = name.clone();
            for (what, got, want) in [
                ("classes", split.train.num_classes, *expect_classes),
                ("series length", split.train.series_len, *expect_length),
                ("train rows", split.train.len(), *expect_train),
            ] {
                if let Some(want) = want {
                    if got != want {
                        return Err(Error::format(format!(
                            "{name}: expected {want} {what}, file has {got}"
                        )));
                    }
                }
            }
            normalize(&mut split, NormMode::MinMaxPm1)?;
            Ok(LoadedData::Series(split))
        }
        DatasetSource::Mnist { name, train_images, train_labels, test_images, test_labels } => {
            let mut train = load_mnist_idx(train_images, train_labels)?;
            let mut test = load_mnist_idx(test_images, test_labels)?;
            train.name = name.clone();
            test.name = name.clone();
            if train.num_classes != test.num_classes {
                return Err(Error::format(format!(
                    "{name}: train has {} classes, test has {}",
                    train.num_classes, test.num_classes
                )));
            }
            if (train.height, train.width) != (test.height, test.width) {
                return Err(Error::format(format!("{name}: train/test image extents differ")));
            }
            Ok(LoadedData::Images(DataSplit { train, test }))
        }
    }
}

/// Dataset plus the models and noise space built for it.
pub struct PreparedExperiment {
    pub data: LoadedData,
    pub noise: NoiseSpec,
    pub gen: Generator,
    pub dis: Discriminator,
    pub identity: String,
}

pub fn prepare(config: &ExperimentConfig) -> Result<PreparedExperiment> {
    let data = load_dataset(&config.dataset)?;
    let noise = noise_spec_for(config, data.num_classes())?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed ^ SEED_BUILD);
    let (gen, dis) = build(&config.variant, data.data_shape(), &noise, &mut rng)?;
    let identity = model_identity(config, data.num_classes(), &data.shape_desc());
    Ok(PreparedExperiment { data, noise, gen, dis, identity })
}

fn all_params(gen: &Generator, dis: &Discriminator) -> Vec<Param> {
    gen.params().into_iter().chain(dis.params()).collect()
}

/// Trains per the config and writes three artifacts into `out_dir`:
/// `checkpoint.snsg`, `epochs.csv`, and `metrics.csv`.
pub fn cmd_train(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let prepared = prepare(config)?;
    let training_set = match &prepared.data {
        LoadedData::Series(s) => TrainingSet::Series(&s.train),
        LoadedData::Images(s) => TrainingSet::Images(&s.train),
    };
    let report = train_gan(
        &prepared.gen,
        &prepared.dis,
        training_set,
        &prepared.noise,
        &config.train,
        Callbacks::default(),
    )?;

    let clf = prepared.data.train_classifier(config, config.seed ^ SEED_CLASSIFIER)?;
    let reference = prepared.data.train_reference();
    let metrics = evaluate_generator(
        &clf,
        &prepared.gen,
        &prepared.noise,
        &reference,
        config.eval.samples_per_class,
        &mut ChaCha12Rng::seed_from_u64(config.seed ^ SEED_EVAL),
    )?;

    std::fs::create_dir_all(&config.out_dir)?;
    let ck = config.out_dir.join("checkpoint.snsg");
    let ep = config.out_dir.join("epochs.csv");
    let me = config.out_dir.join("metrics.csv");
    checkpoint::save(&ck, &prepared.identity, &all_params(&prepared.gen, &prepared.dis))?;
    write_epochs_csv(&ep, &report)?;
    write_metrics_csv(&me, &metrics)?;
    Ok(vec![ck, ep, me])
}

fn load_into(config: &ExperimentConfig, checkpoint_path: &Path) -> Result<PreparedExperiment> {
    let prepared = prepare(config)?;
    checkpoint::load(
        checkpoint_path,
        &prepared.identity,
        &all_params(&prepared.gen, &prepared.dis),
    )?;
    Ok(prepared)
}

/// Generates `count` samples of one class from a checkpoint: CSV for series
/// models, a PGM grid for image models.
pub fn cmd_generate(
    config: &ExperimentConfig,
    checkpoint_path: &Path,
    class: usize,
    count: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    if count == 0 {
        return Err(Error::domain("count must be at least 1".to_string()));
    }
    let prepared = load_into(config, checkpoint_path)?;
    if class >= prepared.noise.num_classes {
        return Err(Error::domain(format!(
            "class {class} out of range for {} classes",
            prepared.noise.num_classes
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let classes = vec![class; count];
    let mut g = snsgan_core::Graph::new();
    g.set_frozen(true);
    let samples = prepared.gen.generate_for_classes(&mut g, &prepared.noise, &classes, &mut rng)?;
    let values = g.value(samples);

    match prepared.data.data_shape() {
        DataShape::Series { len } => write_samples_csv(out, seed, class, len, values.data()),
        DataShape::Image { channels, height, width } => {
            if channels != 1 {
                return Err(Error::config(
                    "image sample output supports single-channel models".to_string(),
                ));
            }
            pgm::write_grid(out, values.data(), count, height, width, seed, class)
        }
    }
}

/// Scores a checkpoint against its dataset and writes one metrics CSV.
pub fn cmd_evaluate(
    config: &ExperimentConfig,
    checkpoint_path: &Path,
    seed: u64,
    out: &Path,
) -> Result<MetricReport> {
    let prepared = load_into(config, checkpoint_path)?;
    let clf = prepared.data.train_classifier(config, seed ^ SEED_CLASSIFIER)?;
    let reference = prepared.data.train_reference();
    let metrics = evaluate_generator(
        &clf,
        &prepared.gen,
        &prepared.noise,
        &reference,
        config.eval.samples_per_class,
        &mut ChaCha12Rng::seed_from_u64(seed ^ SEED_EVAL),
    )?;
    write_metrics_csv(out, &metrics)?;
    Ok(metrics)
}

/// Runs the variant x dataset x seed grid and writes the comparison table,
/// including one real-data reference row per dataset and seed. Cell failures
/// land in the status column; the grid continues.
pub fn cmd_benchmark(config: &BenchmarkConfig, out: &Path) -> Result<Vec<BenchmarkRow>> {
    struct Group {
        dataset_idx: usize,
        seed: u64,
    }
    let mut datasets = Vec::new();
    for source in &config.datasets {
        match load_dataset(source)? {
            LoadedData::Series(split) => datasets.push((source.name(), split)),
            LoadedData::Images(_) => {
                return Err(Error::config(
                    "the benchmark grid runs on series datasets".to_string(),
                ))
            }
        }
    }

    let groups: Vec<Group> = (0..datasets.len())
        .flat_map(|d| config.seeds.iter().map(move |&s| Group { dataset_idx: d, seed: s }))
        .collect();

    // groups are independent; kernels are bit-deterministic, so parallel
    // scheduling cannot change any cell's numbers
    let results: Vec<Vec<BenchmarkRow>> = groups
        .par_iter()
        .map(|group| {
            let (name, split) = &datasets[group.dataset_idx];
            let seed = group.seed;
            let mut rows = Vec::new();

            let eval_cfg = config.eval.clone();
            let clf = match train_eval_classifier(split, &eval_cfg, seed ^ SEED_CLASSIFIER) {
                Ok(c) => c,
                Err(e) => {
                    rows.push(BenchmarkRow {
                        model: "Real Data".to_string(),
                        dataset: name.clone(),
                        seed,
                        report: None,
                        status: format!("classifier failed: {e}"),
                    });
                    for v in &config.variants {
                        rows.push(BenchmarkRow {
                            model: v.tag.name().to_string(),
                            dataset: name.clone(),
                            seed,
                            report: None,
                            status: "skipped: classifier failed".to_string(),
                        });
                    }
                    return rows;
                }
            };

            rows.push(match evaluate_real_reference(&clf, split) {
                Ok(r) => BenchmarkRow {
                    model: "Real Data".to_string(),
                    dataset: name.clone(),
                    seed,
                    report: Some(r),
                    status: "ok".to_string(),
                },
                Err(e) => BenchmarkRow {
                    model: "Real Data".to_string(),
                    dataset: name.clone(),
                    seed,
                    report: None,
                    status: e.to_string(),
                },
            });

            for variant in &config.variants {
                let cell = run_benchmark_cell(variant, split, config, seed, &clf);
                rows.push(match cell {
                    Ok(r) => BenchmarkRow {
                        model: variant.tag.name().to_string(),
                        dataset: name.clone(),
                        seed,
                        report: Some(r),
                        status: "ok".to_string(),
                    },
                    Err(e) => BenchmarkRow {
                        model: variant.tag.name().to_string(),
                        dataset: name.clone(),
                        seed,
                        report: None,
                        status: e.to_string(),
                    },
                });
            }
            rows
        })
        .collect();

    let rows: Vec<BenchmarkRow> = results.into_iter().flatten().collect();
    write_benchmark_csv(out, &rows)?;
    Ok(rows)
}

fn run_benchmark_cell(
    variant: &ModelVariant,
    split: &DataSplit<LabeledSeriesDataset>,
    config: &BenchmarkConfig,
    seed: u64,
    clf: &EvalClassifier,
) -> Result<MetricReport> {
    let noise = NoiseSpec::new(split.train.num_classes, config.noise_block)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ SEED_BUILD);
    let (gen, dis) = build(variant, DataShape::Series { len: split.train.series_len }, &noise, &mut rng)?;
    let train_cfg = TrainConfig { seed, ..config.train.clone() };
    train_gan(&gen, &dis, TrainingSet::Series(&split.train), &noise, &train_cfg, Callbacks::default())?;
    let idx: Vec<usize> = (0..split.train.len()).collect();
    let reference = split.train.batch(&idx);
    evaluate_generator(
        clf,
        &gen,
        &noise,
        &reference,
        config.eval.samples_per_class,
        &mut ChaCha12Rng::seed_from_u64(seed ^ SEED_EVAL),
    )
}

/// Builds per-class overlay panels from a UCR-format dataset file and/or
/// generated-sample CSVs, and writes the SVG.
pub fn cmd_plot(inputs: &[PathBuf], out: &Path, max_series_per_panel: usize) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::domain("plot needs at least one input file".to_string()));
    }
    let mut panels: std::collections::BTreeMap<usize, svg::ClassPanel> =
        std::collections::BTreeMap::new();
    let mut titles = Vec::new();

    for input in inputs {
        let is_samples_csv = input.extension().and_then(|e| e.to_str()) == Some("csv");
        if is_samples_csv {
            let (meta, rows) = crate::report::read_samples_csv(input)?;
            let kv = crate::report::parse_meta(&meta);
            let class: usize = kv
                .get("class")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| {
                    Error::format(format!("{}: missing class metadata", input.display()))
                })?;
            let panel = panels.entry(class).or_insert_with(|| svg::ClassPanel {
                class,
                ..Default::default()
            });
            panel.generated.extend(rows.into_iter().take(max_series_per_panel));
        } else {
            let ds = load_ucr_tsv(input)?;
            // display in the same [-1, 1] space as generated samples
            let map = snsgan_core::datasets::NormMap::fit(NormMode::MinMaxPm1, &ds.series)?;
            for class in 0..ds.num_classes {
                let panel = panels.entry(class).or_insert_with(|| svg::ClassPanel {
                    class,
                    ..Default::default()
                });
                for &i in ds.indices_of_class(class).iter().take(max_series_per_panel) {
                    panel.real.push(ds.row(i).iter().map(|&v| map.apply(v)).collect());
                }
            }
        }
        titles.push(
            input.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        );
    }

    let panels: Vec<svg::ClassPanel> = panels.into_values().collect();
    svg::write_plot(out, &panels, &titles.join(" + "))
}
