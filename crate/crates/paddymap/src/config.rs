//! Pipeline configuration: a single TOML file with sections, validated up
//! front with every problem reported at once. CLI flags override config
//! keys after parsing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{ConfigIssue, Error, Result};
use crate::features::Variant;
use crate::nn::{Arch, ModelSpec, TrainConfig};
use crate::stratify::CLASS_NAMES;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub monthly_dir: PathBuf,
    pub elevation: Option<PathBuf>,
    pub sar_pre: Option<PathBuf>,
    pub sar_growing: Option<PathBuf>,
    pub reference_landcover: PathBuf,
    pub rice_polygons: PathBuf,
    pub sampling_region: PathBuf,
    pub ceo_csv: PathBuf,
    pub output_dir: PathBuf,
    pub override_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesSection {
    #[serde(default = "default_variants")]
    pub variants: Vec<String>,
    #[serde(default)]
    pub include_indices: bool,
    #[serde(default = "default_pre_months")]
    pub pre_months: Vec<u32>,
    #[serde(default = "default_growing_months")]
    pub growing_months: Vec<u32>,
    /// Divisor applied to optical reflectance at ingest (10000 for raw
    /// provider mosaics, 1.0 for already-scaled data).
    #[serde(default = "default_one")]
    pub reflectance_divisor: f64,
    /// Optional product pixel size; composites are resampled onto a grid of
    /// this resolution when it differs from the mosaics.
    pub pixel_size: Option<f64>,
}

fn default_variants() -> Vec<String> {
    vec!["rgbn".into(), "rgbne".into(), "rgbns".into(), "rgbnes".into()]
}

fn default_pre_months() -> Vec<u32> {
    vec![3, 4, 5]
}

fn default_growing_months() -> Vec<u32> {
    vec![6, 7, 8, 9]
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    #[serde(default = "default_k")]
    pub k: usize,
    pub seed: Option<u64>,
    /// Cap on the number of valid pixels fed to the k-means fit; pixels are
    /// drawn by seeded subsampling above this.
    #[serde(default = "default_sample_cap")]
    pub sample_cap: usize,
}

fn default_k() -> usize {
    7
}

fn default_sample_cap() -> usize {
    200_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub counts: BTreeMap<String, usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    #[serde(default = "default_fractions")]
    pub fractions: [f64; 3],
    pub seed: Option<u64>,
}

fn default_fractions() -> [f64; 3] {
    [0.7, 0.2, 0.1]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub arch: String,
    #[serde(default = "default_hidden")]
    pub hidden: [usize; 3],
    #[serde(default = "default_dropout")]
    pub dropout: f32,
    #[serde(default = "default_base_filters")]
    pub base_filters: usize,
}

fn default_hidden() -> [usize; 3] {
    [256, 128, 64]
}

fn default_dropout() -> f32 {
    0.2
}

fn default_base_filters() -> usize {
    32
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default = "default_aug")]
    pub augment_prob: f64,
    pub seed: Option<u64>,
}

fn default_epochs() -> usize {
    30
}
fn default_batch() -> usize {
    32
}
fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-7
}
fn default_aug() -> f64 {
    0.8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSection {
    pub survey_acres: f64,
}

/// Raw deserialized file; `PipelineConfig::load` turns it into the
/// validated form.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    paths: PathsSection,
    features: FeaturesSection,
    cluster: ClusterSection,
    /// reference land-cover code -> class name (cropland/forest/builtup/other)
    reference_mapping: BTreeMap<String, String>,
    sampling: SamplingSection,
    split: SplitSection,
    model: ModelSection,
    train: TrainSection,
    area: AreaSection,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub paths: PathsSection,
    pub variants: Vec<Variant>,
    pub include_indices: bool,
    pub pre_months: Vec<u32>,
    pub growing_months: Vec<u32>,
    pub reflectance_divisor: f64,
    pub pixel_size: Option<f64>,
    pub cluster_k: usize,
    pub cluster_seed: u64,
    pub cluster_sample_cap: usize,
    pub reference_mapping: BTreeMap<i64, u8>,
    pub sampling_counts: [usize; 5],
    pub sampling_seed: u64,
    pub split_fractions: (f64, f64, f64),
    pub split_seed: u64,
    pub arch: Arch,
    pub hidden: [usize; 3],
    pub dropout: f32,
    pub base_filters: usize,
    pub train: TrainConfig,
    pub survey_acres: f64,
}

/// Flag-level overrides applied after parsing, before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub variant: Option<String>,
    pub arch: Option<String>,
    pub with_indices: bool,
    pub seed_sampling: Option<u64>,
    pub seed_split: Option<u64>,
    pub seed_training: Option<u64>,
}

impl PipelineConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<PipelineConfig> {
        if !path.exists() {
            return Err(Error::Config(vec![ConfigIssue {
                field: "config".into(),
                message: format!("file not found: {}", path.display()),
            }]));
        }
        let text = std::fs::read_to_string(path)?;
        let raw: RawConfig = toml::from_str(&text).map_err(|e| {
            Error::Config(vec![ConfigIssue { field: "config".into(), message: e.to_string() }])
        })?;
        Self::from_raw(raw, overrides, path.parent().unwrap_or(Path::new(".")))
    }

    fn from_raw(mut raw: RawConfig, overrides: &Overrides, base: &Path) -> Result<PipelineConfig> {
        let mut issues: Vec<ConfigIssue> = Vec::new();
        let mut issue = |field: &str, message: String| {
            issues.push(ConfigIssue { field: field.into(), message });
        };

        // flag overrides
        if let Some(v) = &overrides.variant {
            raw.features.variants = vec![v.clone()];
        }
        if overrides.with_indices {
            raw.features.include_indices = true;
        }
        if let Some(a) = &overrides.arch {
            raw.model.arch = a.clone();
        }
        if let Some(s) = overrides.seed_sampling {
            raw.sampling.seed = Some(s);
        }
        if let Some(s) = overrides.seed_split {
            raw.split.seed = Some(s);
        }
        if let Some(s) = overrides.seed_training {
            raw.train.seed = Some(s);
        }

        // resolve paths relative to the config file
        let rel = |p: &PathBuf| -> PathBuf {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        let mut paths = raw.paths.clone();
        paths.monthly_dir = rel(&paths.monthly_dir);
        paths.reference_landcover = rel(&paths.reference_landcover);
        paths.rice_polygons = rel(&paths.rice_polygons);
        paths.sampling_region = rel(&paths.sampling_region);
        paths.ceo_csv = rel(&paths.ceo_csv);
        paths.output_dir = rel(&paths.output_dir);
        paths.elevation = paths.elevation.as_ref().map(|p| rel(p));
        paths.sar_pre = paths.sar_pre.as_ref().map(|p| rel(p));
        paths.sar_growing = paths.sar_growing.as_ref().map(|p| rel(p));
        paths.override_table = paths.override_table.as_ref().map(|p| rel(p));

        // variants
        let mut variants = Vec::new();
        for name in &raw.features.variants {
            match Variant::parse(name) {
                Some(v) => {
                    if !variants.contains(&v) {
                        variants.push(v);
                    }
                }
                None => issue("features.variants", format!("unknown variant {name:?}")),
            }
        }
        if variants.is_empty() {
            issue("features.variants", "at least one variant required".into());
        }

        // months
        for (field, months) in [
            ("features.pre_months", &raw.features.pre_months),
            ("features.growing_months", &raw.features.growing_months),
        ] {
            for &m in months {
                if !(1..=12).contains(&m) {
                    issue(field, format!("month {m} outside 1..=12"));
                }
            }
        }
        if raw.features.growing_months.is_empty() {
            issue("features.growing_months", "growing window must be non-empty".into());
        }
        if raw.features.reflectance_divisor <= 0.0 {
            issue("features.reflectance_divisor", "must be positive".into());
        }

        // input files exist
        let want_file = |issues: &mut Vec<ConfigIssue>, field: &str, p: &Path| {
            if !p.exists() {
                issues.push(ConfigIssue {
                    field: field.into(),
                    message: format!("path does not exist: {}", p.display()),
                });
            }
        };
        want_file(&mut issues, "paths.monthly_dir", &paths.monthly_dir);
        want_file(&mut issues, "paths.reference_landcover", &paths.reference_landcover);
        want_file(&mut issues, "paths.rice_polygons", &paths.rice_polygons);
        want_file(&mut issues, "paths.sampling_region", &paths.sampling_region);
        want_file(&mut issues, "paths.ceo_csv", &paths.ceo_csv);
        if let Some(p) = &paths.override_table {
            want_file(&mut issues, "paths.override_table", p);
        }
        let needs_elevation = variants.iter().any(|v| v.wants_elevation());
        let needs_sar = variants.iter().any(|v| v.wants_sar());
        match (&paths.elevation, needs_elevation) {
            (None, true) => issues.push(ConfigIssue {
                field: "paths.elevation".into(),
                message: "required by an elevation variant".into(),
            }),
            (Some(p), _) => want_file(&mut issues, "paths.elevation", p),
            _ => {}
        }
        for (field, p) in [("paths.sar_pre", &paths.sar_pre), ("paths.sar_growing", &paths.sar_growing)] {
            match (p, needs_sar) {
                (None, true) => issues.push(ConfigIssue {
                    field: field.into(),
                    message: "required by a SAR variant".into(),
                }),
                (Some(p), _) => want_file(&mut issues, field, p),
                _ => {}
            }
        }

        // reference mapping
        let mut reference_mapping = BTreeMap::new();
        for (code, name) in &raw.reference_mapping {
            let parsed_code: Option<i64> = code.parse().ok();
            let class = crate::stratify::parse_four_class(name);
            match (parsed_code, class) {
                (Some(c), Some(cl)) => {
                    reference_mapping.insert(c, cl);
                }
                (None, _) => issue("reference_mapping", format!("bad code {code:?}")),
                (_, None) => issue("reference_mapping", format!("unknown class {name:?}")),
            }
        }
        if reference_mapping.is_empty() {
            issue("reference_mapping", "at least one code mapping required".into());
        }

        // sampling counts by class name
        let mut sampling_counts = [0usize; 5];
        for (name, &count) in &raw.sampling.counts {
            match crate::stratify::parse_class_name(name) {
                Some(id) => sampling_counts[id as usize] = count,
                None => issue("sampling.counts", format!("unknown class {name:?}")),
            }
        }
        for name in CLASS_NAMES {
            if !raw.sampling.counts.keys().any(|k| crate::stratify::parse_class_name(k) == crate::stratify::parse_class_name(name)) {
                issue("sampling.counts", format!("missing count for class {name:?}"));
            }
        }

        // seeds must be explicit
        let sampling_seed = raw.sampling.seed.unwrap_or_else(|| {
            issue("sampling.seed", "seed must be explicit".into());
            0
        });
        let cluster_seed = raw.cluster.seed.unwrap_or_else(|| {
            issue("cluster.seed", "seed must be explicit".into());
            0
        });
        let split_seed = raw.split.seed.unwrap_or_else(|| {
            issue("split.seed", "seed must be explicit".into());
            0
        });
        let train_seed = raw.train.seed.unwrap_or_else(|| {
            issue("train.seed", "seed must be explicit".into());
            0
        });

        let f = raw.split.fractions;
        if (f[0] + f[1] + f[2] - 1.0).abs() > 1e-9 {
            issue("split.fractions", format!("must sum to 1, got {}", f[0] + f[1] + f[2]));
        }

        let arch = Arch::parse(&raw.model.arch).unwrap_or_else(|| {
            issue("model.arch", format!("unknown architecture {:?}", raw.model.arch));
            Arch::Dnn
        });
        if raw.cluster.k == 0 {
            issue("cluster.k", "k must be >= 1".into());
        }
        if raw.area.survey_acres <= 0.0 {
            issue("area.survey_acres", "must be positive".into());
        }
        let train = TrainConfig {
            epochs: raw.train.epochs,
            batch_size: raw.train.batch_size,
            learning_rate: raw.train.learning_rate,
            beta1: raw.train.beta1,
            beta2: raw.train.beta2,
            epsilon: raw.train.epsilon,
            augment_prob: raw.train.augment_prob,
            seed: train_seed,
        };
        if let Err(e) = train.validate() {
            issue("train", e.to_string());
        }

        if !issues.is_empty() {
            return Err(Error::Config(issues));
        }

        Ok(PipelineConfig {
            paths,
            variants,
            include_indices: raw.features.include_indices,
            pre_months: raw.features.pre_months,
            growing_months: raw.features.growing_months,
            reflectance_divisor: raw.features.reflectance_divisor,
            pixel_size: raw.features.pixel_size,
            cluster_k: raw.cluster.k,
            cluster_seed,
            cluster_sample_cap: raw.cluster.sample_cap,
            reference_mapping,
            sampling_counts,
            sampling_seed,
            split_fractions: (f[0], f[1], f[2]),
            split_seed,
            arch,
            hidden: raw.model.hidden,
            dropout: raw.model.dropout,
            base_filters: raw.model.base_filters,
            train,
            survey_acres: raw.area.survey_acres,
        })
    }

    /// Model spec for a given input channel count.
    pub fn model_spec(&self, input_channels: usize) -> ModelSpec {
        ModelSpec {
            arch: self.arch,
            input_channels,
            hidden: self.hidden,
            dropout: self.dropout,
            base_filters: self.base_filters,
            ..ModelSpec::dnn(input_channels)
        }
    }

    pub fn patch_size(&self) -> usize {
        match self.arch {
            Arch::Dnn => 1,
            Arch::Unet => 256,
        }
    }
}
