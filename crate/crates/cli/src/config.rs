//! Experiment configuration: a line-oriented `key = value` format with
//! `[section]` headers. Unknown keys are collected and reported together;
//! `#` starts a comment.

use snsgan_core::error::{Error, Result};
use snsgan_core::eval::EvalConfig;
use snsgan_core::models::ModelVariant;
use snsgan_core::noise::NoiseSpec;
use snsgan_core::training::{GenLossMode, TrainConfig};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Where the real data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Ucr {
        name: String,
        train_path: PathBuf,
        test_path: PathBuf,
        /// Expected characteristics, verified at load when present.
        expect_classes: Option<usize>,
        expect_length: Option<usize>,
        expect_train: Option<usize>,
    },
    Mnist {
        name: String,
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    Synthetic {
        classes: usize,
        length: usize,
        train_samples: usize,
        test_samples: usize,
        noise_std: f64,
    },
}

impl DatasetSource {
    pub fn name(&self) -> String {
        match self {
            DatasetSource::Ucr { name, .. } | DatasetSource::Mnist { name, .. } => name.clone(),
            DatasetSource::Synthetic { classes, length, .. } => {
                format!("synthetic-{classes}x{length}")
            }
        }
    }

    pub fn is_image(&self) -> bool {
        matches!(self, DatasetSource::Mnist { .. })
    }
}

/// One fully specified experiment: (config, seed) determines every output.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub variant: ModelVariant,
    pub dataset: DatasetSource,
    /// Per-class noise block size; the full spec is completed with the
    /// dataset's class count at load time.
    pub noise_block: usize,
    pub noise_shift: f64,
    pub noise_base_std: f64,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
}

/// Grid settings for the benchmark command.
#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub variants: Vec<ModelVariant>,
    pub seeds: Vec<u64>,
    pub datasets: Vec<DatasetSource>,
    pub noise_block: usize,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Default)]
struct RawSection {
    name: String,
    line: usize,
    entries: BTreeMap<String, (String, usize)>,
}

fn parse_sections(text: &str, path: &Path) -> Result<Vec<RawSection>> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                Error::config(format!("{}:{}: unterminated section header", path.display(), idx + 1))
            })?;
            sections.push(RawSection {
                name: name.trim().to_string(),
                line: idx + 1,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(format!(
                "{}:{}: expected `key = value`, got {line:?}",
                path.display(),
                idx + 1
            )));
        };
        let section = sections.last_mut().ok_or_else(|| {
            Error::config(format!(
                "{}:{}: `{key}` appears before any [section]",
                path.display(),
                idx + 1
            ))
        })?;
        section
            .entries
            .insert(key.trim().to_string(), (value.trim().to_string(), idx + 1));
    }
    Ok(sections)
}

struct SectionReader {
    name: String,
    entries: BTreeMap<String, (String, usize)>,
    taken: Vec<String>,
}

impl SectionReader {
    fn new(raw: RawSection) -> Self {
        SectionReader { name: raw.name, entries: raw.entries, taken: Vec::new() }
    }

    fn get(&mut self, key: &str) -> Option<String> {
        self.taken.push(key.to_string());
        self.entries.get(key).map(|(v, _)| v.clone())
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.get(key).ok_or_else(|| {
            Error::config(format!("section [{}] is missing required key `{key}`", self.name))
        })
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::config(format!("[{}] {key} = {v:?} is not a valid value", self.name))
            }),
        }
    }

    fn unknown_keys(&self) -> Vec<String> {
        self.entries
            .keys()
            .filter(|k| !self.taken.contains(k))
            .map(|k| format!("[{}] {k}", self.name))
            .collect()
    }
}

fn read_dataset(mut sec: SectionReader, base: &Path) -> Result<(DatasetSource, Vec<String>)> {
    let source = sec.require("source")?;
    let dataset = match source.as_str() {
        "synthetic" => DatasetSource::Synthetic {
            classes: sec.parse("classes")?.unwrap_or(2),
            length: sec.parse("length")?.unwrap_or(32),
            train_samples: sec.parse("train_samples")?.unwrap_or(400),
            test_samples: sec.parse("test_samples")?.unwrap_or(400),
            noise_std: sec.parse("noise_std")?.unwrap_or(0.05),
        },
        "ucr" => DatasetSource::Ucr {
            name: sec.get("name").unwrap_or_else(|| "ucr".to_string()),
            train_path: base.join(sec.require("train_path")?),
            test_path: base.join(sec.require("test_path")?),
            expect_classes: sec.parse("expect_classes")?,
            expect_length: sec.parse("expect_length")?,
            expect_train: sec.parse("expect_train")?,
        },
        "mnist" => DatasetSource::Mnist {
            name: sec.get("name").unwrap_or_else(|| "mnist".to_string()),
            train_images: base.join(sec.require("train_images")?),
            train_labels: base.join(sec.require("train_labels")?),
            test_images: base.join(sec.require("test_images")?),
            test_labels: base.join(sec.require("test_labels")?),
        },
        other => {
            return Err(Error::config(format!(
                "[dataset] source = {other:?}; expected synthetic, ucr, or mnist"
            )))
        }
    };
    Ok((dataset, sec.unknown_keys()))
}

fn read_train(sec: &mut SectionReader) -> Result<TrainConfig> {
    let mut train = TrainConfig::default();
    if let Some(v) = sec.parse("learning_rate")? {
        train.learning_rate = v;
    }
    if let Some(v) = sec.parse("beta1")? {
        train.beta1 = v;
    }
    if let Some(v) = sec.parse("beta2")? {
        train.beta2 = v;
    }
    if let Some(v) = sec.parse("batch_size")? {
        train.batch_size = v;
    }
    if let Some(v) = sec.parse("epochs")? {
        train.epochs = v;
    }
    if let Some(v) = sec.parse("d_steps")? {
        train.d_steps_per_g_step = v;
    }
    if let Some(v) = sec.get("generator_loss") {
        train.generator_loss = GenLossMode::parse(&v)?;
    }
    Ok(train)
}

fn read_eval(sec: &mut SectionReader) -> Result<EvalConfig> {
    let mut eval = EvalConfig::default();
    if let Some(v) = sec.parse("classifier_epochs")? {
        eval.classifier_epochs = v;
    }
    if let Some(v) = sec.parse("batch_size")? {
        eval.batch_size = v;
    }
    if let Some(v) = sec.parse("learning_rate")? {
        eval.learning_rate = v;
    }
    if let Some(v) = sec.parse("loss_floor")? {
        eval.loss_floor = v;
    }
    if let Some(v) = sec.parse("samples_per_class")? {
        eval.samples_per_class = v;
    }
    if let Some(v) = sec.parse("feature_dim")? {
        eval.feature_dim = v;
    }
    Ok(eval)
}

/// Loads a training/evaluation experiment config. Paths are resolved
/// relative to the config file's directory.
pub fn load_experiment(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let sections = parse_sections(&text, path)?;

    let mut variant = None;
    let mut dataset = None;
    let mut noise_block = 1usize;
    let mut noise_shift = 1.0f64;
    let mut noise_base_std = 1.0f64;
    let mut train = TrainConfig::default();
    let mut eval = EvalConfig::default();
    let mut out_dir = base.join("out");
    let mut seed = 0u64;
    let mut unknown = Vec::new();

    for raw in sections {
        let line = raw.line;
        let mut sec = SectionReader::new(raw);
        match sec.name.as_str() {
            "experiment" => {
                if let Some(v) = sec.get("variant") {
                    let mut parsed = ModelVariant::parse(&v)?;
                    if let Some(h) = sec.parse("hidden_size")? {
                        parsed.hidden_size = h;
                    }
                    if let Some(k) = sec.parse("tcn_kernel")? {
                        parsed.tcn_kernel = k;
                    }
                    if let Some(c) = sec.parse("tcn_channels")? {
                        parsed.tcn_channels = c;
                    }
                    if let Some(d) = sec.parse("rcgan_noise_dim")? {
                        parsed.rcgan_noise_dim = d;
                    }
                    if let Some(c) = sec.parse("image_channels")? {
                        parsed.image_channels = c;
                    }
                    variant = Some(parsed);
                }
                if let Some(v) = sec.parse("seed")? {
                    seed = v;
                }
                if let Some(v) = sec.get("out_dir") {
                    out_dir = base.join(v);
                }
                unknown.extend(sec.unknown_keys());
            }
            "dataset" => {
                if dataset.is_some() {
                    return Err(Error::config(format!(
                        "{}:{line}: more than one [dataset] section",
                        path.display()
                    )));
                }
                let (d, u) = read_dataset(sec, &base)?;
                dataset = Some(d);
                unknown.extend(u);
            }
            "noise" => {
                if let Some(v) = sec.parse("block_size")? {
                    noise_block = v;
                }
                if let Some(v) = sec.parse("shift")? {
                    noise_shift = v;
                }
                if let Some(v) = sec.parse("base_std")? {
                    noise_base_std = v;
                }
                unknown.extend(sec.unknown_keys());
            }
            "train" => {
                train = read_train(&mut sec)?;
                unknown.extend(sec.unknown_keys());
            }
            "eval" => {
                eval = read_eval(&mut sec)?;
                unknown.extend(sec.unknown_keys());
            }
            other => {
                return Err(Error::config(format!(
                    "{}:{line}: unknown section [{other}]",
                    path.display()
                )))
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::config(format!("unknown config keys: {}", unknown.join(", "))));
    }

    let variant =
        variant.ok_or_else(|| Error::config("missing [experiment] variant".to_string()))?;
    let dataset =
        dataset.ok_or_else(|| Error::config("missing [dataset] section".to_string()))?;
    train.seed = seed;
    Ok(ExperimentConfig {
        variant,
        dataset,
        noise_block,
        noise_shift,
        noise_base_std,
        train,
        eval,
        out_dir,
        seed,
    })
}

/// Loads a benchmark grid config: one [benchmark] section, one or more
/// [dataset] sections, optional [train]/[eval]/[noise] overrides.
pub fn load_benchmark(path: impl AsRef<Path>) -> Result<BenchmarkConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let sections = parse_sections(&text, path)?;

    let mut variants = Vec::new();
    let mut seeds = vec![0u64];
    let mut datasets = Vec::new();
    let mut noise_block = 1usize;
    let mut train = TrainConfig::default();
    let mut eval = EvalConfig::default();
    let mut unknown = Vec::new();

    for raw in sections {
        let mut sec = SectionReader::new(raw);
        match sec.name.as_str() {
            "benchmark" => {
                let list = sec.require("variants")?;
                variants = list
                    .split(',')
                    .map(|v| ModelVariant::parse(v.trim()))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(s) = sec.get("seeds") {
                    seeds = s
                        .split(',')
                        .map(|v| {
                            v.trim().parse::<u64>().map_err(|_| {
                                Error::config(format!("[benchmark] seeds entry {v:?} is not an integer"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                }
                unknown.extend(sec.unknown_keys());
            }
            "dataset" => {
                let (d, u) = read_dataset(sec, &base)?;
                datasets.push(d);
                unknown.extend(u);
            }
            "noise" => {
                if let Some(v) = sec.parse("block_size")? {
                    noise_block = v;
                }
                unknown.extend(sec.unknown_keys());
            }
            "train" => {
                train = read_train(&mut sec)?;
                unknown.extend(sec.unknown_keys());
            }
            "eval" => {
                eval = read_eval(&mut sec)?;
                unknown.extend(sec.unknown_keys());
            }
            other => return Err(Error::config(format!("unknown section [{other}]"))),
        }
    }
    if !unknown.is_empty() {
        return Err(Error::config(format!("unknown config keys: {}", unknown.join(", "))));
    }
    if variants.is_empty() {
        return Err(Error::config("benchmark needs a [benchmark] variants list".to_string()));
    }
    if datasets.is_empty() {
        return Err(Error::config("benchmark needs at least one [dataset] section".to_string()));
    }
    if seeds.is_empty() {
        return Err(Error::config("benchmark needs at least one seed".to_string()));
    }
    Ok(BenchmarkConfig { variants, seeds, datasets, noise_block, train, eval })
}

/// Canonical identity of the model a config describes; checkpoints refuse to
/// load under a different identity.
pub fn model_identity(config: &ExperimentConfig, num_classes: usize, shape_desc: &str) -> String {
    let v = &config.variant;
    format!(
        "variant={};data={};classes={};block={};shift={};base_std={};hidden={};tcn_kernel={};tcn_channels={};rcgan_noise_dim={};image_channels={}",
        v.tag.name(),
        shape_desc,
        num_classes,
        config.noise_block,
        config.noise_shift,
        config.noise_base_std,
        v.hidden_size,
        v.tcn_kernel,
        v.tcn_channels,
        v.rcgan_noise_dim,
        v.image_channels,
    )
}

/// The noise spec an experiment uses once the class count is known.
pub fn noise_spec_for(config: &ExperimentConfig, num_classes: usize) -> Result<NoiseSpec> {
    Ok(NoiseSpec::new(num_classes, config.noise_block)?
        .with_shift(config.noise_shift)
        .with_base_std(config.noise_base_std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use snsgan_core::models::VariantTag;

    fn write_tmp(name: &str, text: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("snsgan-config-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn parses_a_full_experiment() {
        let p = write_tmp(
            "full.cfg",
            "[experiment]\nvariant = SNS-Linear\nseed = 9\nout_dir = runs/x\n\n\
             [dataset]\nsource = synthetic\nclasses = 2\nlength = 32\n\n\
             [noise]\nblock_size = 8\n\n[train]\nepochs = 10\nbatch_size = 16\n\n\
             [eval]\nsamples_per_class = 50\n",
        );
        let cfg = load_experiment(&p).unwrap();
        assert_eq!(cfg.variant.tag, VariantTag::SnsLinear);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.noise_block, 8);
        assert_eq!(cfg.train.epochs, 10);
        assert_eq!(cfg.train.batch_size, 16);
        assert_eq!(cfg.eval.samples_per_class, 50);
        assert_eq!(cfg.train.learning_rate, 2e-4);
    }

    #[test]
    fn unknown_keys_are_listed_together() {
        let p = write_tmp(
            "unknown.cfg",
            "[experiment]\nvariant = SNS-Linear\nbogus = 1\n\n[dataset]\nsource = synthetic\nwhatever = 2\n",
        );
        let err = load_experiment(&p).unwrap_err().to_string();
        assert!(err.contains("[experiment] bogus"), "{err}");
        assert!(err.contains("[dataset] whatever"), "{err}");
    }

    #[test]
    fn missing_dataset_is_an_error() {
        let p = write_tmp("nodata.cfg", "[experiment]\nvariant = SNS-Linear\n");
        assert!(load_experiment(&p).is_err());
    }

    #[test]
    fn benchmark_grid_parses_variant_lists_and_seeds() {
        let p = write_tmp(
            "bench.cfg",
            "[benchmark]\nvariants = SNS-Linear, RCGAN-RNN\nseeds = 1, 2, 3\n\n\
             [dataset]\nsource = synthetic\nclasses = 3\nlength = 15\n\n[train]\nepochs = 5\n",
        );
        let cfg = load_benchmark(&p).unwrap();
        assert_eq!(cfg.variants.len(), 2);
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.datasets.len(), 1);
        assert_eq!(cfg.train.epochs, 5);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let p = write_tmp(
            "comments.cfg",
            "# top comment\n[experiment]\nvariant = SNS-TCN # inline\n\n[dataset]\nsource = synthetic\n",
        );
        let cfg = load_experiment(&p).unwrap();
        assert_eq!(cfg.variant.tag, VariantTag::SnsTcn);
    }
}
