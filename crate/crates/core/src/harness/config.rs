//! Experiment configuration.
//!
//! Configurations are TOML documents. Unknown keys are rejected, and every
//! validation failure names the offending field.
//!
//! ```toml
//! n_t = 4
//! n_r = 1
//! n_s = 2
//! num_users = 10
//! num_draws = 10000
//! snr_db = [0.0, 10.0, 20.0]
//! bits = 4
//! master_seed = 1
//! strategies = ["perfect", "chordal", "ra-full", "ra-efficient"]
//! scheduler = "greedy"
//! precoder = "fixed-codebook"
//! ra_configs = "up-to-ns"
//! transmit_codebook = { kind = "random-unitary", seed = 7 }
//! feedback_codebook = { kind = "transmit-union-rvq", seed = 11 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::SystemParams;
use crate::codebook::{load_codebook, Codebook};
use crate::error::{Error, Result};
use crate::feedback::ConfigSpace;
use crate::numerics::SeedSpec;
use crate::scheduler::ScheduleMethod;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// The base station sees the effective channel itself.
    Perfect,
    Chordal,
    RaFull,
    RaEfficient,
    Lemma1,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Perfect => "perfect",
            Strategy::Chordal => "chordal",
            Strategy::RaFull => "ra-full",
            Strategy::RaEfficient => "ra-efficient",
            Strategy::Lemma1 => "lemma1",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precoder {
    #[default]
    FixedCodebook,
    Zf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RaConfigs {
    /// Every schedule of at most `n_s` users.
    #[default]
    UpToNs,
    /// Only schedules serving `n_t` users.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CodebookSpec {
    CanonicalOnb,
    Dft,
    RandomUnitary { seed: u64 },
    /// `2^bits` isotropic directions; `bits` defaults to the experiment's B.
    Rvq { seed: u64, bits: Option<u32> },
    /// The transmit codebook followed by `2^B - |C|` isotropic directions.
    TransmitUnionRvq { seed: u64 },
    /// Simplex quantiser lifted to `n_t = 3`.
    Simplex,
    File { path: PathBuf },
}

fn default_n_r() -> usize {
    1
}
fn default_n_s() -> usize {
    2
}
fn default_one() -> f64 {
    1.0
}
fn default_subcarriers() -> usize {
    1
}
fn default_rho() -> f64 {
    0.95
}
fn default_workers() -> usize {
    1
}
fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::Perfect, Strategy::Chordal, Strategy::RaFull, Strategy::RaEfficient]
}
fn default_scheduler() -> ScheduleMethod {
    ScheduleMethod::Greedy
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_t: usize,
    #[serde(default = "default_n_r")]
    pub n_r: usize,
    #[serde(default = "default_n_s")]
    pub n_s: usize,
    #[serde(default = "default_one")]
    pub noise_var: f64,
    pub num_users: usize,
    pub num_draws: usize,
    pub snr_db: Vec<f64>,
    pub bits: u32,
    /// Feedback sizes swept by the scaling experiment.
    #[serde(default)]
    pub bits_list: Vec<u32>,
    pub transmit_codebook: CodebookSpec,
    pub feedback_codebook: CodebookSpec,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_scheduler")]
    pub scheduler: ScheduleMethod,
    #[serde(default)]
    pub precoder: Precoder,
    #[serde(default)]
    pub ra_configs: RaConfigs,
    #[serde(default = "default_subcarriers")]
    pub subcarriers: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    pub master_seed: u64,
    /// Thread count. Never serialised: outputs must not depend on it.
    #[serde(default = "default_workers", skip_serializing)]
    pub workers: usize,
}

fn field_err(field: &str, msg: impl Into<String>) -> Error {
    Error::Config { field: field.into(), msg: msg.into() }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| field_err("<document>", e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file. Relative codebook paths are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: SimConfig =
            toml::from_str(&text).map_err(|e| field_err(&path.display().to_string(), e.message()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for spec in [&mut cfg.transmit_codebook, &mut cfg.feedback_codebook] {
            if let CodebookSpec::File { path: p } = spec {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serialisable")
    }

    pub fn params(&self) -> Result<SystemParams> {
        let snr = self.snr_db.first().copied().unwrap_or(0.0);
        let p = SystemParams::new(self.n_t, self.n_r, self.n_s, 10f64.powf(snr / 10.0) * self.noise_var, self.noise_var);
        p.map_err(|e| field_err("n_t/n_r/n_s/noise_var", e.to_string()))
    }

    pub fn params_at(&self, snr_db: f64) -> Result<SystemParams> {
        Ok(self.params()?.with_snr_db(snr_db))
    }

    pub fn ra_space(&self) -> ConfigSpace {
        match self.ra_configs {
            RaConfigs::UpToNs => ConfigSpace::UpTo(self.n_s),
            RaConfigs::Full => ConfigSpace::Full,
        }
    }

    /// Seed of the fading process; draw `d`, user `m` uses `child(&[d, m])`.
    pub fn channel_seed(&self) -> SeedSpec {
        SeedSpec::new(self.master_seed, 0)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.num_draws == 0 {
            return Err(field_err("num_draws", "must be at least 1"));
        }
        if self.num_users == 0 {
            return Err(field_err("num_users", "must be at least 1"));
        }
        if self.snr_db.is_empty() {
            return Err(field_err("snr_db", "list is empty"));
        }
        if let Some(x) = self.snr_db.iter().find(|x| !x.is_finite()) {
            return Err(field_err("snr_db", format!("value {x} is not finite")));
        }
        if self.bits > 24 {
            return Err(field_err("bits", "at most 24 bits are supported"));
        }
        if self.bits_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(field_err("bits_list", "must be strictly increasing"));
        }
        if self.bits_list.iter().any(|&b| b > 24) {
            return Err(field_err("bits_list", "at most 24 bits are supported"));
        }
        if self.strategies.is_empty() {
            return Err(field_err("strategies", "list is empty"));
        }
        if self.subcarriers == 0 {
            return Err(field_err("subcarriers", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(field_err("rho", "must lie in [0, 1]"));
        }
        if self.workers == 0 {
            return Err(field_err("workers", "must be at least 1"));
        }
        if self.ra_configs == RaConfigs::Full && self.n_s != self.n_t {
            return Err(field_err("ra_configs", "`full` requires n_s = n_t"));
        }
        Ok(())
    }

    /// Builds `(C, V)` for feedback size `bits` and checks `|C| >= n_s`.
    pub fn codebooks(&self, bits: u32) -> Result<(Codebook, Codebook)> {
        let c = build(&self.transmit_codebook, self.n_t, bits, None).map_err(|e| field_err("transmit_codebook", e.to_string()))?;
        if c.dim() != self.n_t {
            return Err(field_err("transmit_codebook", format!("dimension {} differs from n_t = {}", c.dim(), self.n_t)));
        }
        if c.len() < self.n_s {
            return Err(field_err("transmit_codebook", format!("{} beams cannot serve n_s = {}", c.len(), self.n_s)));
        }
        let v = build(&self.feedback_codebook, self.n_t, bits, Some(&c)).map_err(|e| field_err("feedback_codebook", e.to_string()))?;
        if v.dim() != self.n_t {
            return Err(field_err("feedback_codebook", format!("dimension {} differs from n_t = {}", v.dim(), self.n_t)));
        }
        if self.strategies.contains(&Strategy::Lemma1) && !(c.is_unitary() && v.contains_all(&c)) {
            return Err(field_err("strategies", "lemma1 needs a unitary transmit codebook contained in the feedback codebook"));
        }
        Ok((c, v))
    }
}

fn build(spec: &CodebookSpec, n_t: usize, bits: u32, transmit: Option<&Codebook>) -> Result<Codebook> {
    Ok(match spec {
        CodebookSpec::CanonicalOnb => Codebook::canonical_onb(n_t),
        CodebookSpec::Dft => Codebook::dft(n_t),
        CodebookSpec::RandomUnitary { seed } => Codebook::random_unitary(n_t, SeedSpec::new(*seed, 0)),
        CodebookSpec::Rvq { seed, bits: b } => Codebook::rvq(n_t, b.unwrap_or(bits), SeedSpec::new(*seed, 0)),
        CodebookSpec::TransmitUnionRvq { seed } => {
            let c = transmit.ok_or_else(|| Error::Precondition("only valid as feedback codebook".into()))?;
            let total = 1usize << bits;
            if total <= c.len() {
                return Err(Error::Precondition(format!("2^{bits} codewords leave no room beyond |C| = {}", c.len())));
            }
            c.union(&Codebook::rvq_with_size(n_t, total - c.len(), SeedSpec::new(*seed, 0)))?
        }
        CodebookSpec::Simplex => {
            if n_t != 3 {
                return Err(Error::Precondition("the simplex quantiser needs n_t = 3".into()));
            }
            crate::bounds::simplex_quantizer(bits)?.to_codebook()
        }
        CodebookSpec::File { path } => load_codebook(path)?,
    })
}
