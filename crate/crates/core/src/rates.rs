//! Shannon rates of a beam assignment under equal power allocation.
//!
//! All rates are in nats.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::SystemParams;
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::numerics::{check_dims, gain_slice, CVec};

/// Injective map from scheduled user ids to transmit codeword indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeamAssignment {
    pairs: BTreeMap<usize, usize>,
}

impl BeamAssignment {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds an assignment from `(user, beam)` pairs.
    pub fn from_pairs(pairs: &[(usize, usize)]) -> Result<Self> {
        let mut a = Self::empty();
        for &(m, b) in pairs {
            a.insert(m, b)?;
        }
        Ok(a)
    }

    /// Adds or moves user `m` to beam `b`, keeping the map injective.
    pub fn insert(&mut self, m: usize, b: usize) -> Result<()> {
        if self.pairs.iter().any(|(&u, &beam)| beam == b && u != m) {
            return Err(Error::NonInjective { beam: b });
        }
        self.pairs.insert(m, b);
        Ok(())
    }

    pub fn remove(&mut self, m: usize) -> Option<usize> {
        self.pairs.remove(&m)
    }

    /// Checks beam ranges and `|S| <= n_s`.
    pub fn validate(&self, codebook: &Codebook, params: &SystemParams) -> Result<()> {
        if self.pairs.len() > params.n_s {
            return Err(Error::TooManyScheduled { scheduled: self.pairs.len(), limit: params.n_s });
        }
        for &b in self.pairs.values() {
            if b >= codebook.len() {
                return Err(Error::BeamOutOfRange { beam: b, size: codebook.len() });
            }
        }
        Ok(())
    }

    pub fn beam_of(&self, m: usize) -> Option<usize> {
        self.pairs.get(&m).copied()
    }

    pub fn contains(&self, m: usize) -> bool {
        self.pairs.contains_key(&m)
    }

    /// `(user, beam)` pairs in increasing user order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|(&m, &b)| (m, b))
    }

    pub fn users(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairs.keys().copied()
    }

    pub fn beams(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairs.values().copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub per_user: BTreeMap<usize, f64>,
    pub sum: f64,
}

impl RateReport {
    pub fn from_rates(per_user: BTreeMap<usize, f64>) -> Self {
        let sum = per_user.values().sum();
        RateReport { per_user, sum }
    }
}

/// `ln(1 + own / (noise + interference))`.
#[inline]
pub fn rate_from_gains(own: f64, interference: f64, noise: f64) -> f64 {
    (own / (noise + interference)).ln_1p()
}

/// Rate of a receiver with effective vector `v` served by `own` while
/// `interferers` are active, `k` streams in total.
pub fn rate_with_beams(v: &CVec, own: &CVec, interferers: &[&CVec], k: usize, params: &SystemParams) -> Result<f64> {
    check_dims(v.dim(), own.dim())?;
    let mut intf = 0.0;
    for w in interferers {
        check_dims(v.dim(), w.dim())?;
        intf += gain_slice(v.as_slice(), w.as_slice());
    }
    Ok(rate_from_gains(gain_slice(v.as_slice(), own.as_slice()), intf, params.noise_term(k)))
}

/// Rate of scheduled user `m` whose effective vector is `v` (the true
/// `h_hat` or the feedback reconstruction).
pub fn user_rate(assign: &BeamAssignment, codebook: &Codebook, v: &CVec, m: usize, params: &SystemParams) -> Result<f64> {
    assign.validate(codebook, params)?;
    check_dims(codebook.dim(), v.dim())?;
    let own = assign.beam_of(m).ok_or(Error::MissingUser(m))?;
    let w = codebook.vectors();
    let intf: f64 = assign.pairs().filter(|&(u, _)| u != m).map(|(_, b)| gain_slice(v.as_slice(), w[b].as_slice())).sum();
    Ok(rate_from_gains(gain_slice(v.as_slice(), w[own].as_slice()), intf, params.noise_term(assign.len())))
}

/// Per-user and total rates; `vectors[m]` is the effective vector of user `m`.
pub fn sum_rate(assign: &BeamAssignment, codebook: &Codebook, vectors: &[CVec], params: &SystemParams) -> Result<RateReport> {
    let mut per_user = BTreeMap::new();
    for m in assign.users() {
        let v = vectors.get(m).ok_or(Error::MissingUser(m))?;
        per_user.insert(m, user_rate(assign, codebook, v, m, params)?);
    }
    Ok(RateReport::from_rates(per_user))
}

/// Mean of [`user_rate`] over per-subcarrier effective vectors.
pub fn averaged_user_rate(
    assign: &BeamAssignment,
    codebook: &Codebook,
    per_subcarrier: &[CVec],
    m: usize,
    params: &SystemParams,
) -> Result<f64> {
    if per_subcarrier.is_empty() {
        return Err(Error::EmptyDimension(0));
    }
    let mut acc = 0.0;
    for v in per_subcarrier {
        acc += user_rate(assign, codebook, v, m, params)?;
    }
    Ok(acc / per_subcarrier.len() as f64)
}
