//! CDI/CQI selection strategies.
//!
//! Rates inside the RA distance are written on the normalised scale: with
//! `lambda^2 = P ||h_hat||^2 / (n_t sigma^2)` the true rate of a
//! configuration `(k, own beam j, interferer set T)` is
//! `ln(1 + lambda^2 psi_j / (k / n_t + lambda^2 sum_T psi_i))` with
//! `psi_i = |<h, w_i>|^2`, and the feedback `(theta, nu)` predicts the same
//! expression with `theta^2` and `|<nu, w_i>|^2`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::channel::{mrc_effective, sinr_optimal_filter_for, EffectiveChannel, SystemParams, UserChannel};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::numerics::{check_dims, gain_slice, CVec};
use crate::rates::rate_from_gains;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyTag {
    Chordal,
    RaFull,
    RaEfficient,
    Lemma1,
    RaMultiAntenna,
}

impl StrategyTag {
    pub fn name(self) -> &'static str {
        match self {
            StrategyTag::Chordal => "chordal",
            StrategyTag::RaFull => "ra-full",
            StrategyTag::RaEfficient => "ra-efficient",
            StrategyTag::Lemma1 => "lemma1",
            StrategyTag::RaMultiAntenna => "ra-multi-antenna",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackMessage {
    pub cdi_index: usize,
    /// CQI `theta >= 0` on the normalised amplitude scale of `lambda`.
    pub cqi: f64,
    pub strategy: StrategyTag,
    pub scalar_product_count: u64,
}

impl FeedbackMessage {
    /// Vector `theta nu` on the effective-channel scale, the base
    /// station's stand-in for `h_hat`.
    pub fn effective_vector(&self, v: &Codebook, params: &SystemParams) -> CVec {
        v.vectors()[self.cdi_index].scale_real(self.cqi * params.amplitude_scale())
    }
}

/// Worst-case rate mismatch and the configuration attaining it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    /// Nats.
    pub value: f64,
    pub k: usize,
    pub own: usize,
    pub interferers: Vec<usize>,
}

/// Which scheduled-set sizes the RA distance ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfigSpace {
    /// All `1 <= |S| <= n`.
    UpTo(usize),
    /// Fully loaded cell, `|S| = n_t`.
    Full,
}

/// One user's view of a schedule: `k = |S|`, own beam, interfering beams.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    pub k: usize,
    pub own: usize,
    pub interferers: Vec<usize>,
}

/// Every configuration a user can experience.
///
/// A user's rate depends on `(S, pi)` only through `|S|`, its own beam and
/// the set of beams of the other scheduled users, so enumerating those
/// triples covers every schedule as long as enough users exist.
#[derive(Clone, Debug)]
pub struct ConfigSet {
    n_t: usize,
    configs: Vec<Config>,
}

fn combinations(pool: &[usize], r: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() == r {
        out.push(prefix.clone());
        return;
    }
    for (i, &x) in pool.iter().enumerate() {
        prefix.push(x);
        combinations(&pool[i + 1..], r, prefix, out);
        prefix.pop();
    }
}

impl ConfigSet {
    pub fn new(codebook_len: usize, n_t: usize, space: ConfigSpace) -> Result<Self> {
        if codebook_len == 0 {
            return Err(Error::EmptyCodebook);
        }
        let ks: Vec<usize> = match space {
            ConfigSpace::UpTo(n) => (1..=n).collect(),
            ConfigSpace::Full => vec![n_t],
        };
        if ks.is_empty() || ks.iter().any(|&k| k > codebook_len || k > n_t) {
            return Err(Error::Precondition(format!(
                "configuration sizes {ks:?} need 1 <= k <= min(n_t = {n_t}, |C| = {codebook_len})"
            )));
        }
        let mut configs = Vec::new();
        for &k in &ks {
            for own in 0..codebook_len {
                let pool: Vec<usize> = (0..codebook_len).filter(|&i| i != own).collect();
                let mut sets = Vec::new();
                combinations(&pool, k - 1, &mut Vec::new(), &mut sets);
                configs.extend(sets.into_iter().map(|interferers| Config { k, own, interferers }));
            }
        }
        Ok(ConfigSet { n_t, configs })
    }

    pub fn configs(&self) -> &[Config] {
        &self.configs
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// True rates from `|<h_hat, w_i>|^2`.
    pub fn true_rates(&self, gains: &[f64], params: &SystemParams) -> Vec<f64> {
        self.configs
            .iter()
            .map(|c| {
                let intf: f64 = c.interferers.iter().map(|&i| gains[i]).sum();
                rate_from_gains(gains[c.own], intf, params.noise_term(c.k))
            })
            .collect()
    }

    /// `(own gain, summed interferer gain, noise k / n_t)` per configuration
    /// for the feedback direction with gains `|<nu, w_i>|^2`.
    fn feedback_terms(&self, gains: &[f64]) -> Vec<[f64; 3]> {
        self.configs
            .iter()
            .map(|c| {
                let intf: f64 = c.interferers.iter().map(|&i| gains[i]).sum();
                [gains[c.own], intf, c.k as f64 / self.n_t as f64]
            })
            .collect()
    }

    fn profile(&self, value: f64, idx: usize) -> GapProfile {
        let c = &self.configs[idx];
        GapProfile { value, k: c.k, own: c.own, interferers: c.interferers.clone() }
    }
}

#[inline]
fn predicted(term: &[f64; 3], t: f64) -> f64 {
    rate_from_gains(t * term[0], t * term[1], term[2])
}

/// Largest `|r_c - predicted_c(t)|` and the first configuration attaining it.
fn gap_at(rates: &[f64], terms: &[[f64; 3]], t: f64) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, (r, term)) in rates.iter().zip(terms).enumerate() {
        let g = (r - predicted(term, t)).abs();
        if g > best.0 {
            best = (g, i);
        }
    }
    best
}

/// Worst under-prediction and worst over-prediction at `t`.
fn balance(rates: &[f64], terms: &[[f64; 3]], t: f64) -> (f64, f64) {
    let (mut under, mut over) = (0.0f64, 0.0f64);
    for (r, term) in rates.iter().zip(terms) {
        let d = r - predicted(term, t);
        if d > 0.0 {
            under = under.max(d);
        } else {
            over = over.max(-d);
        }
    }
    (under, over)
}

const LOG_SEARCH_HALF_WIDTH: f64 = 50.0;
const LOG_SEARCH_TOL: f64 = 1e-12;

/// Minimises the gap over `theta`, returning `(gap, config index, theta)`.
///
/// Each predicted rate increases with `t = theta^2`, so the worst
/// under-prediction is nonincreasing in `t` and the worst over-prediction
/// nondecreasing; the optimum sits where they cross. The crossing is
/// bracketed by bisection on `ln t` around `ln lambda_ref^2`, and the
/// supplied candidates are evaluated as well.
fn minimise_over_theta(rates: &[f64], terms: &[[f64; 3]], lambda_ref_sq: f64, candidates: &[f64]) -> (f64, usize, f64) {
    let mut best = (f64::INFINITY, 0, 0.0);
    let mut consider = |theta: f64| {
        if !(theta.is_finite() && theta >= 0.0) {
            return;
        }
        let (g, idx) = gap_at(rates, terms, theta * theta);
        if g < best.0 {
            best = (g, idx, theta);
        }
    };
    consider(0.0);
    for &c in candidates {
        consider(c);
    }
    if lambda_ref_sq > 0.0 && lambda_ref_sq.is_finite() {
        let centre = lambda_ref_sq.ln();
        let theta_of = |s: f64| (0.5 * s).exp();
        let over_wins = |s: f64| {
            let th = theta_of(s);
            let (u, o) = balance(rates, terms, th * th);
            u <= o
        };
        let (mut lo, mut hi) = (centre - LOG_SEARCH_HALF_WIDTH, centre + LOG_SEARCH_HALF_WIDTH);
        if over_wins(lo) {
            consider(theta_of(lo));
        } else if !over_wins(hi) {
            consider(theta_of(hi));
        } else {
            while hi - lo > LOG_SEARCH_TOL * centre.abs().max(1.0) {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if over_wins(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            consider(theta_of(lo));
            consider(theta_of(hi));
        }
    }
    best
}

/// `theta = sqrt(lambda^2 |<h, nu>|^2)`.
pub fn cqi_effective(lambda_sq: f64, h: &CVec, nu: &CVec) -> Result<f64> {
    check_dims(h.dim(), nu.dim())?;
    Ok((lambda_sq * gain_slice(h.as_slice(), nu.as_slice())).sqrt())
}

/// CQI of the constructive strategy: `theta~ = lambda~ eta / theta_w`,
/// where `x~ = x^2 / (1 + x^2)`, mapped back to `theta`.
fn lemma1_cqi(lambda_sq: f64, eta: f64, theta_w: f64) -> Option<f64> {
    if !(theta_w > 0.0) {
        return None;
    }
    let lt = lambda_sq / (1.0 + lambda_sq);
    let vt = lt * (eta / theta_w).min(1.0);
    Some((vt / (1.0 - vt)).sqrt())
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in values.enumerate() {
        if v > best.0 {
            best = (v, i);
        }
    }
    best.1
}

/// Minimum chordal distance quantiser with the effective-gain CQI.
pub fn chordal_cdi(eff: &EffectiveChannel, v: &Codebook) -> Result<FeedbackMessage> {
    if v.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    let h = eff.direction();
    check_dims(v.dim(), h.dim())?;
    let idx = argmax_first(v.vectors().iter().map(|nu| gain_slice(h.as_slice(), nu.as_slice())));
    Ok(FeedbackMessage {
        cdi_index: idx,
        cqi: cqi_effective(eff.lambda_sq(), h, &v.vectors()[idx])?,
        strategy: StrategyTag::Chordal,
        scalar_product_count: v.len() as u64,
    })
}

/// Table `|<nu_j, w_i>|^2`, computed once per codebook pair.
#[derive(Clone, Debug)]
pub struct CrossGainTable {
    gains: Vec<Vec<f64>>,
    c_len: usize,
}

impl CrossGainTable {
    pub fn new(c: &Codebook, v: &Codebook) -> Result<Self> {
        if c.is_empty() || v.is_empty() {
            return Err(Error::EmptyCodebook);
        }
        check_dims(c.dim(), v.dim())?;
        Ok(CrossGainTable { gains: v.cross_gains(c), c_len: c.len() })
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.gains[j]
    }

    pub fn v_len(&self) -> usize {
        self.gains.len()
    }

    pub fn c_len(&self) -> usize {
        self.c_len
    }
}

/// Low-complexity RA quantiser: matches the beam-gain profile of `h` over
/// `C` in the max norm, then reports the effective-gain CQI.
///
/// The scalar-product count is `|C| |V|`, table construction included.
pub fn efficient_cdi(eff: &EffectiveChannel, c: &Codebook, v: &Codebook, table: &CrossGainTable) -> Result<FeedbackMessage> {
    if c.is_empty() || v.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    if table.c_len() != c.len() || table.v_len() != v.len() {
        return Err(Error::Precondition("cross-gain table does not match the codebooks".into()));
    }
    let h = eff.direction();
    check_dims(c.dim(), h.dim())?;
    let psi: Vec<f64> = c.vectors().iter().map(|w| gain_slice(h.as_slice(), w.as_slice())).collect();
    let mut best = (f64::INFINITY, 0);
    for j in 0..v.len() {
        let d = psi.iter().zip(table.row(j)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if d < best.0 {
            best = (d, j);
        }
    }
    Ok(FeedbackMessage {
        cdi_index: best.1,
        cqi: cqi_effective(eff.lambda_sq(), h, &v.vectors()[best.1])?,
        strategy: StrategyTag::RaEfficient,
        scalar_product_count: (c.len() * v.len()) as u64,
    })
}

/// Index of the strongest transmit beam, lowest index on ties.
fn strongest_beam(h: &CVec, c: &Codebook) -> usize {
    argmax_first(c.vectors().iter().map(|w| gain_slice(h.as_slice(), w.as_slice())))
}

/// Constructive strategy: the chordally closest `nu` among those at least
/// as aligned with the strongest beam `w*` as `h` is.
pub fn lemma1_feedback(eff: &EffectiveChannel, c: &Codebook, v: &Codebook) -> Result<FeedbackMessage> {
    if c.is_empty() || v.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    check_dims(c.dim(), v.dim())?;
    if !v.contains_all(c) {
        return Err(Error::Precondition("transmit codebook must be contained in the feedback codebook".into()));
    }
    let h = eff.direction();
    check_dims(c.dim(), h.dim())?;
    let w_star = &c.vectors()[strongest_beam(h, c)];
    let eta = gain_slice(h.as_slice(), w_star.as_slice());
    let mut best: Option<(f64, usize, f64)> = None;
    for (j, nu) in v.vectors().iter().enumerate() {
        let theta_w = gain_slice(nu.as_slice(), w_star.as_slice());
        if theta_w < eta - 1e-12 {
            continue;
        }
        let g = gain_slice(h.as_slice(), nu.as_slice());
        if best.is_none_or(|(bg, _, _)| g > bg) {
            best = Some((g, j, theta_w));
        }
    }
    let (_, idx, theta_w) = best.expect("w* itself is feasible when C is contained in V");
    Ok(FeedbackMessage {
        cdi_index: idx,
        cqi: lemma1_cqi(eff.lambda_sq(), eta, theta_w).unwrap_or(0.0),
        strategy: StrategyTag::Lemma1,
        scalar_product_count: (c.len() * v.len() + c.len() + v.len()) as u64,
    })
}

/// Upper bound on the fully loaded RA distance of `(theta, nu)` for a
/// unitary `C`; it does not depend on `theta`.
pub fn lemma1_rhs(eff: &EffectiveChannel, nu: &CVec, c: &Codebook) -> Result<f64> {
    if c.len() < 2 || !c.is_unitary() {
        return Err(Error::Precondition("bound needs a unitary transmit codebook with at least two beams".into()));
    }
    let h = eff.direction();
    check_dims(c.dim(), h.dim())?;
    check_dims(c.dim(), nu.dim())?;
    let star = strongest_beam(h, c);
    let w_star = &c.vectors()[star];
    let eta = gain_slice(h.as_slice(), w_star.as_slice());
    let theta_w = gain_slice(nu.as_slice(), w_star.as_slice());
    let l2 = eff.lambda_sq();
    let mut worst = f64::NEG_INFINITY;
    for (i, w) in c.vectors().iter().enumerate() {
        if i == star {
            continue;
        }
        let psi = gain_slice(h.as_slice(), w.as_slice());
        let phi = gain_slice(nu.as_slice(), w.as_slice());
        let leak = if phi == 0.0 { 0.0 } else { phi / theta_w * (theta_w - eta).abs() };
        let num = l2 * ((psi - phi).abs() + leak);
        let den = 1.0 + l2 * (1.0 - psi.max(phi));
        worst = worst.max((num / den).ln_1p());
    }
    Ok(worst)
}

/// Precomputed state for RA quantisation against fixed codebooks.
#[derive(Clone, Debug)]
pub struct RaSolver<'a> {
    c: &'a Codebook,
    v: &'a Codebook,
    params: SystemParams,
    configs: ConfigSet,
    table: CrossGainTable,
    terms: Vec<Vec<[f64; 3]>>,
}

impl<'a> RaSolver<'a> {
    pub fn new(c: &'a Codebook, v: &'a Codebook, params: &SystemParams, space: ConfigSpace) -> Result<Self> {
        params.validate()?;
        check_dims(params.n_t, c.dim())?;
        let configs = ConfigSet::new(c.len(), params.n_t, space)?;
        let table = CrossGainTable::new(c, v)?;
        let terms = (0..v.len()).map(|j| configs.feedback_terms(table.row(j))).collect();
        Ok(RaSolver { c, v, params: *params, configs, table, terms })
    }

    pub fn configs(&self) -> &ConfigSet {
        &self.configs
    }

    fn true_rates_of(&self, eff: &EffectiveChannel) -> Vec<f64> {
        let hh = eff.h_hat();
        let g: Vec<f64> = self.c.vectors().iter().map(|w| gain_slice(hh.as_slice(), w.as_slice())).collect();
        self.configs.true_rates(&g, &self.params)
    }

    fn search(
        &self,
        rates: &[f64],
        lambda_ref_sq: f64,
        candidates: impl Fn(usize) -> Vec<f64>,
    ) -> (usize, f64, f64, usize) {
        let mut best = (0, 0.0, f64::INFINITY, 0);
        for j in 0..self.v.len() {
            let (gap, idx, theta) = minimise_over_theta(rates, &self.terms[j], lambda_ref_sq, &candidates(j));
            if gap < best.2 {
                best = (j, theta, gap, idx);
            }
        }
        best
    }

    /// Full RA quantiser: minimises the RA distance over `nu` in `V` and
    /// `theta >= 0`.
    pub fn solve(&self, eff: &EffectiveChannel) -> Result<(FeedbackMessage, GapProfile)> {
        check_dims(self.c.dim(), eff.h_hat().dim())?;
        let rates = self.true_rates_of(eff);
        let h = eff.direction();
        let l2 = eff.lambda_sq();
        let star = strongest_beam(h, self.c);
        let eta = gain_slice(h.as_slice(), self.c.vectors()[star].as_slice());
        let (j, theta, gap, idx) = self.search(&rates, l2, |j| {
            let mut cands = vec![(l2 * gain_slice(h.as_slice(), self.v.vectors()[j].as_slice())).sqrt()];
            cands.extend(lemma1_cqi(l2, eta, self.table.row(j)[star]));
            cands
        });
        let msg = FeedbackMessage {
            cdi_index: j,
            cqi: theta,
            strategy: StrategyTag::RaFull,
            scalar_product_count: (self.c.len() * self.v.len() + self.c.len()) as u64,
        };
        Ok((msg, self.configs.profile(gap, idx)))
    }

    /// RA distance of a given feedback pair.
    pub fn distance(&self, eff: &EffectiveChannel, theta: f64, cdi_index: usize) -> Result<GapProfile> {
        let terms = self.terms.get(cdi_index).ok_or(Error::BeamOutOfRange { beam: cdi_index, size: self.v.len() })?;
        let rates = self.true_rates_of(eff);
        let (gap, idx) = gap_at(&rates, terms, theta * theta);
        Ok(self.configs.profile(gap, idx))
    }

    /// True rate of every configuration for a multi-antenna user with the
    /// SINR-optimal receive filter, averaged over subcarriers.
    pub fn filtered_true_rates(&self, h: &UserChannel) -> Result<Vec<f64>> {
        check_dims(self.params.n_t, h.n_t())?;
        let w = self.c.vectors();
        let mut acc = vec![0.0; self.configs.len()];
        for hf in h.subcarriers() {
            for (slot, cfg) in acc.iter_mut().zip(self.configs.configs()) {
                let intf: Vec<&CVec> = cfg.interferers.iter().map(|&i| &w[i]).collect();
                let (_, sinr) = sinr_optimal_filter_for(hf, &w[cfg.own], &intf, cfg.k, &self.params)?;
                *slot += sinr.ln_1p();
            }
        }
        let f = h.num_subcarriers() as f64;
        Ok(acc.into_iter().map(|r| r / f).collect())
    }

    /// RA quantiser whose true rates use the SINR-optimal receive filter of
    /// each configuration, averaged over subcarriers.
    pub fn solve_multiantenna(&self, h: &UserChannel) -> Result<(FeedbackMessage, GapProfile)> {
        let rates = self.filtered_true_rates(h)?;
        let effs: Vec<EffectiveChannel> = h.subcarriers().iter().map(|hf| mrc_effective(hf, &self.params)).collect();
        let f = effs.len() as f64;
        let lambda_ref_sq = effs.iter().map(|e| e.lambda_sq()).sum::<f64>() / f;
        let (j, theta, gap, idx) = self.search(&rates, lambda_ref_sq, |j| {
            let nu = self.v.vectors()[j].as_slice();
            let t = effs.iter().map(|e| e.lambda_sq() * gain_slice(e.direction().as_slice(), nu)).sum::<f64>() / f;
            vec![t.sqrt()]
        });
        let msg = FeedbackMessage {
            cdi_index: j,
            cqi: theta,
            strategy: StrategyTag::RaMultiAntenna,
            scalar_product_count: (self.c.len() * self.v.len()) as u64,
        };
        Ok((msg, self.configs.profile(gap, idx)))
    }
}

/// RA distance `max |r(h_hat) - r(theta nu)|` over schedules of up to
/// `n_s` users.
pub fn ra_distance(eff: &EffectiveChannel, theta: f64, nu: &CVec, c: &Codebook, params: &SystemParams) -> Result<GapProfile> {
    ra_distance_in(eff, theta, nu, c, params, ConfigSpace::UpTo(params.n_s))
}

pub fn ra_distance_in(
    eff: &EffectiveChannel,
    theta: f64,
    nu: &CVec,
    c: &Codebook,
    params: &SystemParams,
    space: ConfigSpace,
) -> Result<GapProfile> {
    check_dims(c.dim(), eff.h_hat().dim())?;
    check_dims(c.dim(), nu.dim())?;
    let configs = ConfigSet::new(c.len(), params.n_t, space)?;
    let hh = eff.h_hat();
    let g: Vec<f64> = c.vectors().iter().map(|w| gain_slice(hh.as_slice(), w.as_slice())).collect();
    let rates = configs.true_rates(&g, params);
    let f: Vec<f64> = c.vectors().iter().map(|w| gain_slice(nu.as_slice(), w.as_slice())).collect();
    let (gap, idx) = gap_at(&rates, &configs.feedback_terms(&f), theta * theta);
    Ok(configs.profile(gap, idx))
}

/// Full RA quantiser over schedules of up to `n_s` users.
pub fn ra_feedback(eff: &EffectiveChannel, c: &Codebook, v: &Codebook, params: &SystemParams) -> Result<FeedbackMessage> {
    Ok(RaSolver::new(c, v, params, ConfigSpace::UpTo(params.n_s))?.solve(eff)?.0)
}

pub fn ra_feedback_multiantenna(h: &UserChannel, c: &Codebook, v: &Codebook, params: &SystemParams) -> Result<FeedbackMessage> {
    Ok(RaSolver::new(c, v, params, ConfigSpace::UpTo(params.n_s))?.solve_multiantenna(h)?.0)
}

/// One Monte Carlo sample of the worst-case rate gap:
/// `2 sum_{m in users} d_m(h_hat_m, theta_m nu_m)`.
pub fn gap_sample_delta_ra(
    effs: &[EffectiveChannel],
    feedback: &[FeedbackMessage],
    users: &BTreeSet<usize>,
    solver: &RaSolver<'_>,
) -> Result<f64> {
    let mut total = 0.0;
    for &m in users {
        let eff = effs.get(m).ok_or(Error::MissingUser(m))?;
        let fb = feedback.get(m).ok_or(Error::MissingUser(m))?;
        total += solver.distance(eff, fb.cqi, fb.cdi_index)?.value;
    }
    Ok(2.0 * total)
}
