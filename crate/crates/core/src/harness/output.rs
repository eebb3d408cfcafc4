//! Experiment results and their on-disk form.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::config::SimConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SumRate,
    DeltaRa,
    Scaling,
    Contrast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Per-cell sum rate, averaged over subcarriers.
    SumRate,
    /// Worst-case rate gap `2 sum_m d_m` of one draw.
    DeltaRa,
    DEst,
    DHat,
    /// Perfect-CSIT sum rate minus RA sum rate, fixed codebook.
    RaGap,
    /// Perfect-CSIT sum rate minus chordal-CDI sum rate, zeroforcing.
    ZfGap,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::SumRate => "sum-rate",
            Metric::DeltaRa => "delta-ra",
            Metric::DEst => "d-est",
            Metric::DHat => "d-hat",
            Metric::RaGap => "ra-gap",
            Metric::ZfGap => "zf-gap",
        }
    }
}

/// Analytical values attached to a series. Absent entries did not apply.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundValues {
    pub d_est: Option<f64>,
    pub d_hat: Option<f64>,
    pub lemma2_empirical_d: Option<f64>,
    pub lemma2_lemma3: Option<f64>,
    pub theorem1: Option<f64>,
    pub lemma3_d: Option<f64>,
    pub covering_delta: Option<f64>,
    pub jindal_gap: Option<f64>,
}

impl BoundValues {
    pub const COLUMNS: [&'static str; 8] = [
        "d_est",
        "d_hat",
        "lemma2_empirical_d",
        "lemma2_lemma3",
        "theorem1",
        "lemma3_d",
        "covering_delta",
        "jindal_gap",
    ];

    fn values(&self) -> [Option<f64>; 8] {
        [
            self.d_est,
            self.d_hat,
            self.lemma2_empirical_d,
            self.lemma2_lemma3,
            self.theorem1,
            self.lemma3_d,
            self.covering_delta,
            self.jindal_gap,
        ]
    }
}

/// One curve: a strategy at one `(SNR, B)` point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub strategy: String,
    pub metric: Metric,
    pub snr_db: f64,
    pub bits: u32,
    pub samples: usize,
    /// Per-draw values in draw order; empty for aggregated-only metrics.
    pub per_draw: Vec<f64>,
    pub mean: f64,
    pub std_err: f64,
    /// `(x, P[X <= x])`; empty for aggregated-only metrics.
    pub cdf: Vec<[f64; 2]>,
    pub bounds: BoundValues,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub d_hat: Option<f64>,
    pub d_est: Option<f64>,
    /// `-1 / (n_t - 1)`.
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastSummary {
    /// RA gap at the highest SNR divided by the RA gap 20 dB below it.
    pub ra_gap_ratio: Option<f64>,
    pub zf_gap_ratio: Option<f64>,
    /// ZF gap is nondecreasing along the SNR grid.
    pub zf_gap_monotone: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// Single-cell scope: rates are per-cell sums over scheduled users.
    pub metric: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub metadata: Metadata,
    pub config: SimConfig,
    pub series: Vec<Series>,
    pub slopes: Option<Slopes>,
    pub contrast: Option<ContrastSummary>,
    pub notes: Vec<String>,
}

impl ExperimentResult {
    pub(crate) fn new(kind: ExperimentKind, cfg: &SimConfig) -> Self {
        ExperimentResult {
            kind,
            metadata: Metadata {
                metric: "per-cell sum rate, nats/s/Hz".into(),
                config_hash: config_hash(cfg),
                master_seed: cfg.master_seed,
                version: env!("CARGO_PKG_VERSION").into(),
            },
            config: cfg.clone(),
            series: Vec::new(),
            slopes: None,
            contrast: None,
            notes: Vec::new(),
        }
    }

    pub fn find(&self, strategy: &str, metric: Metric, snr_db: f64) -> Option<&Series> {
        self.series.iter().find(|s| s.strategy == strategy && s.metric == metric && s.snr_db == snr_db)
    }
}

/// SHA-256 of the JSON form of the config, which omits the worker count.
pub fn config_hash(cfg: &SimConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config is serialisable");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub const CSV_HEADER: [&str; 9] = [
    "strategy",
    "metric",
    "snr_db",
    "B",
    "mean_rate_nats",
    "mean_rate_bits",
    "std_err_nats",
    "cdf_x",
    "cdf_y",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV rows: one per CDF grid point, or a single row when a series has no
/// grid.
pub fn curves_csv(result: &ExperimentResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = CSV_HEADER.iter().chain(BoundValues::COLUMNS.iter()).copied().collect();
    w.write_record(&header).map_err(csv_err)?;
    for s in &result.series {
        let base = [
            s.strategy.clone(),
            s.metric.name().to_string(),
            s.snr_db.to_string(),
            s.bits.to_string(),
            s.mean.to_string(),
            (s.mean / std::f64::consts::LN_2).to_string(),
            s.std_err.to_string(),
        ];
        let bounds: Vec<String> = s.bounds.values().iter().map(|&b| opt(b)).collect();
        let points: Vec<[Option<f64>; 2]> =
            if s.cdf.is_empty() { vec![[None, None]] } else { s.cdf.iter().map(|p| [Some(p[0]), Some(p[1])]).collect() };
        for p in points {
            let mut row: Vec<String> = base.to_vec();
            row.push(opt(p[0]));
            row.push(opt(p[1]));
            row.extend(bounds.iter().cloned());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Writes `result.json` and `curves.csv` into `out_dir`, creating it.
pub fn emit(result: &ExperimentResult, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut json = serde_json::to_string_pretty(result)?;
    json.push('\n');
    std::fs::write(out_dir.join("result.json"), json)?;
    std::fs::write(out_dir.join("curves.csv"), curves_csv(result)?)?;
    Ok(())
}

pub fn load_result(path: &Path) -> Result<ExperimentResult> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
