//! Crate-wide error type with stable, distinguishable codes.
//!
//! The CLI maps these onto process exit codes: configuration problems exit
//! with 2, data/input problems with 3, everything else with 4.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // -- file ingestion --------------------------------------------------
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("unsupported compression in {path}: {detail}")]
    UnsupportedCompression { path: PathBuf, detail: String },
    #[error("missing geotransform in {0}")]
    MissingGeotransform(PathBuf),
    #[error("unsupported tiff layout in {path}: {detail}")]
    UnsupportedTiff { path: PathBuf, detail: String },
    #[error("malformed file {path}: {detail}")]
    Malformed { path: PathBuf, detail: String },

    // -- binary container formats ----------------------------------------
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("truncated payload: {0}")]
    Truncated(String),
    #[error("empty band name")]
    EmptyBandName,

    // -- grid / raster algebra -------------------------------------------
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("crs mismatch: {left:?} vs {right:?}")]
    CrsMismatch { left: String, right: String },
    #[error("zero overlap between source and target grids")]
    ZeroOverlap,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("window out of bounds: col {col} row {row} size {w}x{h} in {width}x{height}")]
    WindowOutOfBounds { col: usize, row: usize, w: usize, h: usize, width: usize, height: usize },
    #[error("duplicate band name: {0}")]
    DuplicateBandName(String),
    #[error("missing band: {0}")]
    MissingBand(String),
    #[error("unclosed ring (class {class_id}): first and last vertex differ")]
    UnclosedRing { class_id: u32 },
    #[error("degenerate ring (class {class_id}): {count} vertices, need at least 4")]
    DegenerateRing { class_id: u32, count: usize },
    #[error("geographic (non-metric) grid: {0}")]
    GeographicGrid(String),

    // -- feature construction ----------------------------------------------
    #[error("empty composite window")]
    EmptyWindow,
    #[error("month {0} not present among provided mosaics")]
    MissingMonth(u32),
    #[error("missing mandatory source for variant {variant}: {input}")]
    MissingSource { variant: String, input: String },

    // -- clustering / sampling ---------------------------------------------
    #[error("k ({k}) exceeds number of points ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("non-finite value in clustering input")]
    NonFiniteInput,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cluster {0} has no pixels and no override")]
    EmptyCluster(u32),
    #[error("stratum {class_id} has {available} pixels, {requested} requested")]
    InsufficientStratum { class_id: u32, available: usize, requested: usize },
    #[error("split fractions must sum to 1, got {0}")]
    BadFractions(f64),
    #[error("empty input: {0}")]
    EmptyInput(String),

    // -- model / training ---------------------------------------------------
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("channel mismatch: model expects {expected}, input has {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("checkpoint spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("odd spatial dimensions for 2x2 max pooling: {h}x{w}")]
    OddSpatialDims { h: usize, w: usize },
    #[error("spatial size {h}x{w} not divisible by {denom}")]
    IndivisibleSpatial { h: usize, w: usize, denom: usize },

    // -- evaluation ----------------------------------------------------------
    #[error("missing column {0:?} in csv header")]
    MissingColumn(String),
    #[error("row {row}: {detail}")]
    BadRow { row: usize, detail: String },
    #[error("plot {plot_id} outside raster extent")]
    PlotOutsideRaster { plot_id: u64 },
    #[error("non-binary value {value} at pixel {index} in agreement input")]
    NonBinaryInput { value: f32, index: usize },
    #[error("agreement requires exactly 4 binary maps, got {0}")]
    AgreementArity(usize),

    // -- orchestration ---------------------------------------------------------
    #[error("configuration invalid:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),
    #[error("stage {stage} failed: {source}")]
    Stage { stage: String, #[source] source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Other(String),
}

/// One field-level configuration problem; the CLI reports all of them at once.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {}: {}", i.field, i.message))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    /// Process exit code contract: 2 config, 3 data, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Stage { source, .. } => source.exit_code(),
            Error::MissingFile(_)
            | Error::UnsupportedCompression { .. }
            | Error::MissingGeotransform(_)
            | Error::UnsupportedTiff { .. }
            | Error::Malformed { .. }
            | Error::BadMagic { .. }
            | Error::VersionMismatch { .. }
            | Error::Truncated(_)
            | Error::EmptyBandName
            | Error::CrsMismatch { .. }
            | Error::ZeroOverlap
            | Error::GridMismatch(_)
            | Error::MissingBand(_)
            | Error::UnclosedRing { .. }
            | Error::DegenerateRing { .. }
            | Error::GeographicGrid(_)
            | Error::MissingMonth(_)
            | Error::MissingSource { .. }
            | Error::InsufficientStratum { .. }
            | Error::MissingColumn(_)
            | Error::BadRow { .. }
            | Error::PlotOutsideRaster { .. }
            | Error::NonBinaryInput { .. }
            | Error::EmptyCluster(_)
            | Error::EmptyInput(_)
            | Error::ChannelMismatch { .. }
            | Error::SpecMismatch(_) => 3,
            _ => 4,
        }
    }
}
