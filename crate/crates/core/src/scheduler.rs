//! User selection and beam assignment at the base station.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::{sinr_optimal_filter_for, SystemParams, UserChannel};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::numerics::{check_dims, cholesky_solve, gain_slice, CMat, CVec, C64};
use crate::rates::{rate_from_gains, BeamAssignment, RateReport};

/// Largest user count the exhaustive scheduler accepts.
pub const BRUTE_MAX_USERS: usize = 12;
/// Largest transmit codebook the exhaustive scheduler accepts.
pub const BRUTE_MAX_BEAMS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMethod {
    Brute,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDecision {
    pub assignment: BeamAssignment,
    /// Sum rate predicted from the scheduler inputs (nats).
    pub predicted_sum_rate: f64,
    pub method: ScheduleMethod,
}

/// Zeroforcing decision; beams are not codebook members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecodedDecision {
    pub users: Vec<usize>,
    pub beams: Vec<CVec>,
    pub predicted_sum_rate: f64,
}

/// `|<v_m, w_i>|^2` for every input and beam.
fn gain_table(inputs: &[CVec], c: &Codebook) -> Result<Vec<Vec<f64>>> {
    inputs
        .iter()
        .map(|v| {
            check_dims(c.dim(), v.dim())?;
            Ok(c.vectors().iter().map(|w| gain_slice(v.as_slice(), w.as_slice())).collect())
        })
        .collect()
}

/// Sum rate of `users[i] -> beams[i]`, accumulated in user order.
fn predicted_sum(gains: &[Vec<f64>], users: &[usize], beams: &[usize], params: &SystemParams) -> f64 {
    let noise = params.noise_term(users.len());
    let mut total = 0.0;
    for (i, &m) in users.iter().enumerate() {
        let g = &gains[m];
        let intf: f64 = beams.iter().enumerate().filter(|&(l, _)| l != i).map(|(_, &b)| g[b]).sum();
        total += rate_from_gains(g[beams[i]], intf, noise);
    }
    total
}

fn check_inputs(inputs: &[CVec], c: &Codebook, params: &SystemParams) -> Result<()> {
    params.validate()?;
    if inputs.is_empty() {
        return Err(Error::Precondition("at least one user is required".into()));
    }
    if c.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    Ok(())
}

/// Visits every injective map of `k` slots into `0..n` in lexicographic order.
fn for_each_injection(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(n: usize, k: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for b in 0..n {
            if !used[b] {
                used[b] = true;
                cur.push(b);
                rec(n, k, used, cur, f);
                cur.pop();
                used[b] = false;
            }
        }
    }
    rec(n, k, &mut vec![false; n], &mut Vec::with_capacity(k), f);
}

/// Visits every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for m in start..n {
            cur.push(m);
            rec(m + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

fn lex_key_cmp(a: (&[usize], &[usize]), b: (&[usize], &[usize])) -> Ordering {
    a.0.cmp(b.0).then_with(|| a.1.cmp(b.1))
}

fn to_assignment(users: &[usize], beams: &[usize]) -> BeamAssignment {
    let pairs: Vec<(usize, usize)> = users.iter().copied().zip(beams.iter().copied()).collect();
    BeamAssignment::from_pairs(&pairs).expect("enumerated maps are injective")
}

/// Exhaustive search over user sets of size `1..=n_s` and injective beam
/// maps; `inputs[m]` is the effective vector the base station holds for
/// user `m`. Exact ties go to the lexicographically smallest
/// `(sorted users, beams in user order)`.
pub fn schedule_bruteforce(inputs: &[CVec], c: &Codebook, params: &SystemParams) -> Result<ScheduleDecision> {
    check_inputs(inputs, c, params)?;
    if inputs.len() > BRUTE_MAX_USERS || c.len() > BRUTE_MAX_BEAMS {
        return Err(Error::TooLarge(format!(
            "{} users, {} beams; limits are {BRUTE_MAX_USERS} and {BRUTE_MAX_BEAMS}",
            inputs.len(),
            c.len()
        )));
    }
    let gains = gain_table(inputs, c)?;
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for k in 1..=params.n_s.min(inputs.len()).min(c.len()) {
        for_each_subset(inputs.len(), k, &mut |users| {
            for_each_injection(c.len(), k, &mut |beams| {
                let r = predicted_sum(&gains, users, beams, params);
                let better = match &best {
                    None => true,
                    Some((br, bu, bb)) => {
                        r > *br || (r == *br && lex_key_cmp((users, beams), (bu, bb)) == Ordering::Less)
                    }
                };
                if better {
                    best = Some((r, users.to_vec(), beams.to_vec()));
                }
            });
        });
    }
    let (rate, users, beams) = best.expect("at least one user and one beam");
    Ok(ScheduleDecision { assignment: to_assignment(&users, &beams), predicted_sum_rate: rate, method: ScheduleMethod::Brute })
}

/// Adds the `(user, beam)` pair with the largest resulting sum rate until
/// nothing improves it or `n_s` users are scheduled.
pub fn schedule_greedy(inputs: &[CVec], c: &Codebook, params: &SystemParams) -> Result<ScheduleDecision> {
    check_inputs(inputs, c, params)?;
    let gains = gain_table(inputs, c)?;
    let mut chosen: BTreeMap<usize, usize> = BTreeMap::new();
    let mut current = 0.0;
    let limit = params.n_s.min(c.len());
    while chosen.len() < limit {
        let mut best: Option<(f64, usize, usize)> = None;
        for m in (0..inputs.len()).filter(|m| !chosen.contains_key(m)) {
            for b in (0..c.len()).filter(|b| !chosen.values().any(|x| x == b)) {
                let mut trial = chosen.clone();
                trial.insert(m, b);
                let users: Vec<usize> = trial.keys().copied().collect();
                let beams: Vec<usize> = trial.values().copied().collect();
                let r = predicted_sum(&gains, &users, &beams, params);
                if best.is_none_or(|(br, _, _)| r > br) {
                    best = Some((r, m, b));
                }
            }
        }
        match best {
            Some((r, m, b)) if r > current || chosen.is_empty() => {
                chosen.insert(m, b);
                current = r;
            }
            _ => break,
        }
    }
    let users: Vec<usize> = chosen.keys().copied().collect();
    let beams: Vec<usize> = chosen.values().copied().collect();
    Ok(ScheduleDecision {
        assignment: to_assignment(&users, &beams),
        predicted_sum_rate: current,
        method: ScheduleMethod::Greedy,
    })
}

/// Unit-norm zeroforcing beams for the given directions: the normalised
/// columns of `G^H (G G^H)^{-1}` where `G` stacks the conjugated directions.
pub fn zf_beams(cdis: &[CVec]) -> Result<Vec<CVec>> {
    let k = cdis.len();
    if k == 0 {
        return Err(Error::Precondition("at least one direction is required".into()));
    }
    let n = cdis[0].dim();
    for d in cdis {
        check_dims(n, d.dim())?;
    }
    if k > n {
        return Err(Error::Singular);
    }
    let mut gram = CMat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let z: C64 = cdis[i].as_slice().iter().zip(cdis[j].as_slice()).map(|(a, b)| a.conj() * b).sum();
            gram.set(i, j, z);
        }
    }
    let mut beams = Vec::with_capacity(k);
    for i in 0..k {
        let x = cholesky_solve(&gram, &CVec::basis(k, i))?;
        let mut col = vec![C64::new(0.0, 0.0); n];
        for (d, xi) in cdis.iter().zip(x.as_slice()) {
            for (c, a) in col.iter_mut().zip(d.as_slice()) {
                *c += a * xi;
            }
        }
        let col = CVec::new(col)?.normalized().ok_or(Error::Singular)?;
        beams.push(col);
    }
    Ok(beams)
}

/// Zeroforcing with equal power; the predicted rate of user `i` is
/// `ln(1 + |<v_i, b_i>|^2 / (sigma^2 k / P))`.
pub fn zf_precode(users: &[usize], inputs: &[CVec], params: &SystemParams) -> Result<PrecodedDecision> {
    if users.len() > params.n_s.min(params.n_t) {
        return Err(Error::TooManyScheduled { scheduled: users.len(), limit: params.n_s.min(params.n_t) });
    }
    let vs: Vec<&CVec> = users.iter().map(|&m| inputs.get(m).ok_or(Error::MissingUser(m))).collect::<Result<_>>()?;
    let dirs: Vec<CVec> = vs.iter().map(|v| v.normalized().ok_or(Error::Singular)).collect::<Result<_>>()?;
    let beams = zf_beams(&dirs)?;
    let noise = params.noise_term(users.len());
    let predicted = vs.iter().zip(&beams).map(|(v, b)| rate_from_gains(gain_slice(v.as_slice(), b.as_slice()), 0.0, noise)).sum();
    Ok(PrecodedDecision { users: users.to_vec(), beams, predicted_sum_rate: predicted })
}

/// Greedy zeroforcing user selection: adds the user that most increases
/// the predicted ZF sum rate, skipping rank-deficient sets.
pub fn schedule_zf_greedy(inputs: &[CVec], params: &SystemParams) -> Result<PrecodedDecision> {
    params.validate()?;
    if inputs.is_empty() {
        return Err(Error::Precondition("at least one user is required".into()));
    }
    let mut chosen: Vec<usize> = Vec::new();
    let mut current: Option<PrecodedDecision> = None;
    while chosen.len() < params.n_s.min(params.n_t) {
        let mut best: Option<PrecodedDecision> = None;
        for m in (0..inputs.len()).filter(|m| !chosen.contains(m)) {
            let mut trial = chosen.clone();
            trial.push(m);
            trial.sort_unstable();
            let Ok(d) = zf_precode(&trial, inputs, params) else { continue };
            if best.as_ref().is_none_or(|b| d.predicted_sum_rate > b.predicted_sum_rate) {
                best = Some(d);
            }
        }
        match best {
            Some(d) if current.as_ref().is_none_or(|c| d.predicted_sum_rate > c.predicted_sum_rate) => {
                chosen = d.users.clone();
                current = Some(d);
            }
            _ => break,
        }
    }
    current.ok_or_else(|| Error::Precondition("no user has a usable direction".into()))
}

/// Realised rates of users served by explicit beams, using the
/// SINR-optimal receive filter and averaging over subcarriers.
pub fn realize_beam_rates(users: &[usize], beams: &[&CVec], channels: &[UserChannel], params: &SystemParams) -> Result<RateReport> {
    check_dims(users.len(), beams.len())?;
    let k = users.len();
    let mut per_user = BTreeMap::new();
    for (i, &m) in users.iter().enumerate() {
        let ch = channels.get(m).ok_or(Error::MissingUser(m))?;
        let interferers: Vec<&CVec> = beams.iter().enumerate().filter(|&(l, _)| l != i).map(|(_, b)| *b).collect();
        let mut acc = 0.0;
        for h in ch.subcarriers() {
            let (_, sinr) = sinr_optimal_filter_for(h, beams[i], &interferers, k, params)?;
            acc += sinr.ln_1p();
        }
        per_user.insert(m, acc / ch.num_subcarriers() as f64);
    }
    Ok(RateReport::from_rates(per_user))
}

/// Realised rates of a codebook decision on the true channels.
pub fn realize_rates(decision: &ScheduleDecision, c: &Codebook, channels: &[UserChannel], params: &SystemParams) -> Result<RateReport> {
    decision.assignment.validate(c, params)?;
    let users: Vec<usize> = decision.assignment.users().collect();
    let beams: Vec<&CVec> = decision.assignment.beams().map(|b| &c.vectors()[b]).collect();
    realize_beam_rates(&users, &beams, channels, params)
}

pub fn realize_zf_rates(decision: &PrecodedDecision, channels: &[UserChannel], params: &SystemParams) -> Result<RateReport> {
    let beams: Vec<&CVec> = decision.beams.iter().collect();
    realize_beam_rates(&decision.users, &beams, channels, params)
}
