//! Closed-form rate-gap bounds, covering constants and the `n_t = 3`
//! simplex quantiser.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::channel::{EffectiveChannel, SystemParams};
use crate::codebook::{Codebook, CodebookKind};
use crate::error::{Error, Result};
use crate::numerics::{check_dims, gain_slice, sample_complex_gaussian, CVec, SeedSpec};

/// Covering density of the `d`-dimensional Euclidean ball: the best known
/// values for `d <= 4` and the Rogers bound `4 d ln d` beyond.
pub fn covering_density(d: usize) -> Result<f64> {
    match d {
        0 | 1 => Err(Error::InvalidParams(format!("covering density needs d >= 2, got {d}"))),
        2 => Ok(1.2091),
        3 => Ok(1.4635),
        4 => Ok(1.7655),
        _ => {
            let d = d as f64;
            Ok(4.0 * d * d.ln())
        }
    }
}

/// `ln( Theta binom(2d, d) Gamma(1 + d/2) sqrt(d + 1) / (d! pi^{d/2}) )`.
fn ln_covering_factor(d: usize) -> Result<f64> {
    let theta = covering_density(d)?;
    let df = d as f64;
    let ln_binom = ln_gamma(2.0 * df + 1.0) - 2.0 * ln_gamma(df + 1.0);
    Ok(theta.ln() + ln_binom + ln_gamma(1.0 + df / 2.0) + 0.5 * (df + 1.0).ln()
        - ln_gamma(df + 1.0)
        - 0.5 * df * std::f64::consts::PI.ln())
}

/// Quantisation constant `c(n_t)` of the covering argument.
pub fn c_nt(n_t: usize) -> Result<f64> {
    if n_t < 3 {
        return Err(Error::InvalidParams(format!("c(n_t) needs n_t >= 3, got {n_t}")));
    }
    let d = n_t - 1;
    Ok((ln_covering_factor(d)? / d as f64).exp())
}

/// Smallest `B` for which the covering bound on `D(B)` is stated:
/// `(n_t - 1)/2 log2((n_t - 1)^{3/2})`.
pub fn validity_threshold(n_t: usize) -> f64 {
    let d = (n_t - 1) as f64;
    d / 2.0 * (d * d.sqrt()).log2()
}

pub fn is_valid_bits(bits: u32, n_t: usize) -> bool {
    bits as f64 >= validity_threshold(n_t)
}

/// `c(n_t) E[lambda^2] 2^{-B/(n_t-1)}`.
pub fn lemma3_bound(bits: u32, n_t: usize, mean_lambda_sq: f64) -> Result<f64> {
    Ok(c_nt(n_t)? * mean_lambda_sq * (-(bits as f64) / (n_t - 1) as f64).exp2())
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..500 {
        if (b - a).abs() <= rel_tol * (a.abs() + b.abs()).max(1.0) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [a, b] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Smallest `epsilon` the inner search considers.
pub const LEMMA2_EPS_MIN: f64 = 1e-12;
/// Largest `epsilon` the inner search considers.
pub const LEMMA2_EPS_MAX: f64 = 1e6;

/// `min_{epsilon in (0, 1e6]} (1 + eps) D / (1 + eps D / (n_t - 1))`,
/// searched over `ln eps`.
pub fn lemma2_inner(d: f64, n_t: usize) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    let m = (n_t.max(2) - 1) as f64;
    let f = |s: f64| {
        let e = s.exp();
        (1.0 + e) * d / (1.0 + e * d / m)
    };
    golden_min(f, LEMMA2_EPS_MIN.ln(), LEMMA2_EPS_MAX.ln(), 1e-10).1
}

/// `2 sum_m ln(1 + min_eps (1 + eps) D_m / (1 + eps D_m / (n_t - 1)))`.
pub fn lemma2_bound(d_values: &[f64], n_t: usize) -> f64 {
    2.0 * d_values.iter().map(|&d| lemma2_inner(d, n_t).ln_1p()).sum::<f64>()
}

/// `2 n_t ln(1 + snr 2^{-B/(n_t-1) - 1})`, the `n_t = 3` gap with the
/// simplex quantiser.
pub fn ra_nt3_gap(bits: u32, snr: f64, n_t: usize) -> Result<f64> {
    if n_t != 3 {
        return Err(Error::InvalidParams("the simplex-quantiser gap is stated for n_t = 3".into()));
    }
    let arg = snr * (-(bits as f64) / (n_t - 1) as f64 - 1.0).exp2();
    Ok(2.0 * n_t as f64 * arg.ln_1p())
}

/// Per-user zeroforcing gap with chordal quantisation, `ln(1 + snr 2^{-B/(n_t-1)})`.
pub fn jindal_gap(bits: u32, n_t: usize, snr: f64) -> f64 {
    (snr * (-(bits as f64) / (n_t.max(2) - 1) as f64).exp2()).ln_1p()
}

/// `4 n_s ln(1 + snr n_t D_hat)`.
pub fn theorem1_bound(n_s: usize, n_t: usize, snr: f64, d_hat: f64) -> f64 {
    4.0 * n_s as f64 * (snr * n_t as f64 * d_hat).ln_1p()
}

/// Upper bound on the number of `l_inf` balls of radius `delta` covering
/// the standard `d`-simplex.
pub fn covering_number_bound(d: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParams(format!("delta must be positive, got {delta}")));
    }
    Ok((ln_covering_factor(d)? - d as f64 * delta.ln()).exp())
}

/// Radius at which [`covering_number_bound`] equals `2^bits`.
pub fn covering_delta(d: usize, bits: u32) -> Result<f64> {
    Ok(((ln_covering_factor(d)? - bits as f64 * std::f64::consts::LN_2) / d as f64).exp())
}

/// `min_{0 <= t < 1} max_i |a_i - t b_i|`, exact.
///
/// The objective is convex and piecewise linear in `t`; its minimum lies at
/// an endpoint, a zero of one term, or a crossing of two terms.
pub fn minmax_scaled_fit(a: &[f64], b: &[f64]) -> f64 {
    let obj = |t: f64| a.iter().zip(b).map(|(x, y)| (x - t * y).abs()).fold(0.0, f64::max);
    let mut cands = vec![0.0, 1.0];
    for i in 0..a.len() {
        if b[i] > 0.0 {
            cands.push(a[i] / b[i]);
        }
        for j in (i + 1)..a.len() {
            let s = b[i] + b[j];
            if s > 0.0 {
                cands.push((a[i] + a[j]) / s);
            }
            let d = b[i] - b[j];
            if d != 0.0 {
                cands.push((a[i] - a[j]) / d);
            }
        }
    }
    cands.into_iter().filter(|t| (0.0..=1.0).contains(t)).map(obj).fold(f64::INFINITY, f64::min)
}

/// Per-draw terms of `D(B)` and `D_hat(B)` for one effective channel.
///
/// Returns `(1/(1 - lambda~) min_{theta~, nu} max_w |lambda~ psi_w - theta~ phi_w|,
/// min_nu max_w |psi_w - phi_w|)`.
pub fn d_sample(eff: &EffectiveChannel, c: &Codebook, v: &Codebook) -> Result<(f64, f64)> {
    check_dims(c.dim(), eff.direction().dim())?;
    check_dims(c.dim(), v.dim())?;
    let h = eff.direction();
    let lt = eff.lambda_tilde();
    let a: Vec<f64> = c.vectors().iter().map(|w| lt * gain_slice(h.as_slice(), w.as_slice())).collect();
    let psi: Vec<f64> = c.vectors().iter().map(|w| gain_slice(h.as_slice(), w.as_slice())).collect();
    let (mut best_d, mut best_hat) = (f64::INFINITY, f64::INFINITY);
    for nu in v.vectors() {
        let phi: Vec<f64> = c.vectors().iter().map(|w| gain_slice(nu.as_slice(), w.as_slice())).collect();
        best_d = best_d.min(minmax_scaled_fit(&a, &phi));
        best_hat = best_hat.min(psi.iter().zip(&phi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    Ok(((1.0 + eff.lambda_sq()) * best_d, best_hat))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalD {
    pub samples: usize,
    pub d_est: f64,
    pub d_est_se: f64,
    pub d_hat_est: f64,
    pub d_hat_se: f64,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimates of `D(B)` and `D_hat(B)` for the supplied
/// feedback codebook under Rayleigh fading.
///
/// The minimum over all codebooks of size `2^B` is not searched, so both
/// numbers are upper estimates of the quantities they stand for. Draw `i`
/// uses the stream `seed.child(&[i])`; results do not depend on the thread
/// count.
pub fn empirical_d(c: &Codebook, v: &Codebook, params: &SystemParams, samples: usize, seed: SeedSpec) -> Result<EmpiricalD> {
    if samples == 0 {
        return Err(Error::InvalidParams("at least one sample is required".into()));
    }
    check_dims(params.n_t, c.dim())?;
    let draws: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let hh = sample_complex_gaussian(params.n_t, seed.child(&[i as u64]));
            d_sample(&EffectiveChannel::new(hh, params), c, v)
        })
        .collect::<Result<_>>()?;
    let ds: Vec<f64> = draws.iter().map(|x| x.0).collect();
    let hs: Vec<f64> = draws.iter().map(|x| x.1).collect();
    let (d_est, d_est_se) = mean_se(&ds);
    let (d_hat_est, d_hat_se) = mean_se(&hs);
    Ok(EmpiricalD { samples, d_est, d_est_se, d_hat_est, d_hat_se })
}

/// Quantiser of the standard 2-simplex with `2^B` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexQuantizer {
    pub bits: u32,
    pub points: Vec<[f64; 3]>,
    /// Worst-case `l_inf` error of the construction.
    pub delta: f64,
}

impl SimplexQuantizer {
    /// Feedback codebook with `nu = (sqrt q_1, sqrt q_2, sqrt q_3)`, whose
    /// gain profile against the canonical basis is `q`.
    pub fn to_codebook(&self) -> Codebook {
        let vectors = self.points.iter().map(|q| CVec::from_real(&[q[0].sqrt(), q[1].sqrt(), q[2].sqrt()]).expect("finite")).collect();
        Codebook::new(vectors, CodebookKind::Simplex).expect("points lie on the simplex")
    }
}

/// `2^B`-point quantiser of the standard 2-simplex (`n_t = 3`, `B` even).
///
/// With `k = 2^{B/2}` the simplex is cut into `(2k)^2` triangles of the
/// lattice `(i, j, l) / (2k)`, `i + j + l = 2k`. The lattice is
/// 3-coloured by `(i - j) mod 3` and every small triangle has one vertex
/// of each colour, so the vertices of one colour are within `1/(2k)` of
/// every point in `l_inf`, and the other vertices sit at exactly `1/(2k)`.
/// A colour class holds fewer than `k^2` points once `k >= 4`; the
/// remaining slots are filled with further lattice vertices in
/// lexicographic order, which leaves the error at
/// `1/(2k) = 2^{-B/2 - 1}`.
///
/// For `B = 2` no four points reach `1/4`: the three corner points leave a
/// gap on at least two edges, and the fourth point, which must cover the
/// centroid, can close at most two edge gaps and only at `(1/2, 1/4, 1/4)`
/// up to symmetry, which leaves half of the third edge uncovered. The
/// subtriangle centroids are returned instead, with error `1/3`.
pub fn simplex_quantizer(bits: u32) -> Result<SimplexQuantizer> {
    if bits == 0 || !bits.is_multiple_of(2) {
        return Err(Error::InvalidParams(format!("simplex quantiser needs an even B >= 2, got {bits}")));
    }
    if bits > 20 {
        return Err(Error::TooLarge(format!("B = {bits}")));
    }
    let k = 1usize << (bits / 2);
    let size = k * k;
    if k == 2 {
        let kf = k as f64;
        let mut points = Vec::new();
        for i in 0..k {
            for j in 0..(k - i) {
                points.push([(3 * i + 1) as f64 / (3.0 * kf), (3 * j + 1) as f64 / (3.0 * kf), (3 * (k - i - j) - 2) as f64 / (3.0 * kf)]);
                if i + j + 1 < k {
                    points.push([(3 * i + 2) as f64 / (3.0 * kf), (3 * j + 2) as f64 / (3.0 * kf), (3 * (k - i - j) - 4) as f64 / (3.0 * kf)]);
                }
            }
        }
        return Ok(SimplexQuantizer { bits, points, delta: 2.0 / (3.0 * kf) });
    }
    let n = 2 * k;
    let lattice: Vec<(usize, usize, usize)> = (0..=n).flat_map(|i| (0..=n - i).map(move |j| (i, j, n - i - j))).collect();
    let colour = |&(i, j, _): &(usize, usize, usize)| (i + 3 * n - j).is_multiple_of(3);
    let mut chosen: Vec<(usize, usize, usize)> = lattice.iter().filter(|p| colour(p)).copied().collect();
    chosen.extend(lattice.iter().filter(|p| !colour(p)).take(size - chosen.len()).copied());
    chosen.sort_unstable();
    let nf = n as f64;
    let points = chosen.into_iter().map(|(i, j, l)| [i as f64 / nf, j as f64 / nf, l as f64 / nf]).collect();
    Ok(SimplexQuantizer { bits, points, delta: 1.0 / nf })
}

/// `max_x min_q ||x - q||_inf` over the probe lattice `(a, b, c) / m`.
pub fn measured_delta(points: &[[f64; 3]], m: usize) -> f64 {
    let mf = m as f64;
    let mut worst = 0.0f64;
    for a in 0..=m {
        for b in 0..=(m - a) {
            let x = [a as f64 / mf, b as f64 / mf, (m - a - b) as f64 / mf];
            let mut best = f64::INFINITY;
            for q in points {
                let d = (x[0] - q[0]).abs().max((x[1] - q[1]).abs()).max((x[2] - q[2]).abs());
                best = best.min(d);
            }
            worst = worst.max(best);
        }
    }
    worst
}

/// Probe resolution: the smallest multiple of `2k` giving at least
/// `min_points` probes, so the lattice vertices are probed exactly.
pub fn probe_resolution(bits: u32, min_points: usize) -> usize {
    let step = 2usize << (bits / 2);
    let step = step.max(6);
    let mut m = step;
    while (m + 1) * (m + 2) / 2 < min_points {
        m += step;
    }
    m
}

/// Closed-form quantities for one `(n_t, B, n_s, SNR)` point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n_t: usize,
    pub bits: u32,
    pub n_s: usize,
    pub snr: f64,
    pub mean_lambda_sq: f64,
    pub c_nt: f64,
    pub d_bound: f64,
    pub lemma2_bound: f64,
    pub theorem1_bound: f64,
    pub jindal_gap: f64,
    pub ra_nt3_gap: Option<f64>,
    pub valid: bool,
}

/// Rayleigh fading gives `E[lambda^2] = P / sigma^2`; `D_hat` is taken
/// from the covering bound with frame constant 1.
pub fn bounds_report(n_t: usize, bits: u32, n_s: usize, snr: f64) -> Result<BoundsReport> {
    let c = c_nt(n_t)?;
    let d_bound = lemma3_bound(bits, n_t, snr)?;
    let d_hat = c * (-(bits as f64) / (n_t - 1) as f64).exp2();
    Ok(BoundsReport {
        n_t,
        bits,
        n_s,
        snr,
        mean_lambda_sq: snr,
        c_nt: c,
        d_bound,
        lemma2_bound: lemma2_bound(&vec![d_bound; n_t], n_t),
        theorem1_bound: theorem1_bound(n_s, n_t, snr, d_hat),
        jindal_gap: jindal_gap(bits, n_t, snr),
        ra_nt3_gap: if n_t == 3 { Some(ra_nt3_gap(bits, snr, 3)?) } else { None },
        valid: is_valid_bits(bits, n_t),
    })
}
