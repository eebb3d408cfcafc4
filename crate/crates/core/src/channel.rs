//! Channel generation and receive filtering.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::numerics::{
    cholesky_solve, complex_gaussian, hermitian_largest_eigenpair, inner, CMat, CVec, SeedSpec, C64,
};
use crate::rates::BeamAssignment;
use crate::textio;

/// Antenna counts, scheduling limit and power budget of one cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n_t: usize,
    pub n_r: usize,
    /// Maximum number of simultaneously scheduled users.
    pub n_s: usize,
    /// Total transmit power (linear).
    pub power: f64,
    /// Receiver noise variance (linear).
    pub noise_var: f64,
}

impl SystemParams {
    pub fn new(n_t: usize, n_r: usize, n_s: usize, power: f64, noise_var: f64) -> Result<Self> {
        let p = SystemParams { n_t, n_r, n_s, power, noise_var };
        p.validate()?;
        Ok(p)
    }

    /// Unit noise variance and `P = 10^(snr_db / 10)`.
    pub fn from_snr_db(n_t: usize, n_r: usize, n_s: usize, snr_db: f64) -> Result<Self> {
        Self::new(n_t, n_r, n_s, 10f64.powf(snr_db / 10.0), 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 || self.n_r == 0 || self.n_s == 0 {
            return Err(Error::InvalidParams("antenna counts and n_s must be positive".into()));
        }
        if self.n_s > self.n_t {
            return Err(Error::InvalidParams(format!("n_s = {} exceeds n_t = {}", self.n_s, self.n_t)));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::InvalidParams(format!("power must be positive, got {}", self.power)));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::InvalidParams(format!("noise variance must be positive, got {}", self.noise_var)));
        }
        Ok(())
    }

    pub fn snr(&self) -> f64 {
        self.power / self.noise_var
    }

    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        SystemParams { power: 10f64.powf(snr_db / 10.0) * self.noise_var, ..*self }
    }

    /// Noise term `sigma^2 |S| / P` of the rate formula.
    pub fn noise_term(&self, scheduled: usize) -> f64 {
        self.noise_var * scheduled as f64 / self.power
    }

    /// Factor mapping a normalised amplitude (`lambda` or a CQI value) to
    /// the effective-channel scale: `||h_hat|| = lambda * sqrt(n_t sigma^2 / P)`.
    pub fn amplitude_scale(&self) -> f64 {
        (self.n_t as f64 * self.noise_var / self.power).sqrt()
    }
}

/// Per-subcarrier MIMO channel of one user, each matrix `n_r x n_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserChannel {
    subcarriers: Vec<CMat>,
    rho: Option<f64>,
}

impl UserChannel {
    pub fn new(subcarriers: Vec<CMat>, rho: Option<f64>) -> Result<Self> {
        let first = subcarriers.first().ok_or(Error::EmptyDimension(0))?;
        let (r, c) = (first.rows(), first.cols());
        for m in &subcarriers {
            if m.rows() != r {
                return Err(Error::DimensionMismatch { expected: r, found: m.rows() });
            }
            if m.cols() != c {
                return Err(Error::DimensionMismatch { expected: c, found: m.cols() });
            }
        }
        if let Some(rho) = rho {
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::InvalidParams(format!("rho must lie in [0, 1], got {rho}")));
            }
        }
        Ok(UserChannel { subcarriers, rho })
    }

    pub fn single(h: CMat) -> Self {
        UserChannel { subcarriers: vec![h], rho: None }
    }

    pub fn subcarriers(&self) -> &[CMat] {
        &self.subcarriers
    }

    pub fn num_subcarriers(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn n_r(&self) -> usize {
        self.subcarriers[0].rows()
    }

    pub fn n_t(&self) -> usize {
        self.subcarriers[0].cols()
    }

    pub fn primary(&self) -> &CMat {
        &self.subcarriers[0]
    }

    /// Arithmetic mean of the subcarrier matrices.
    pub fn averaged(&self) -> CMat {
        let mut acc = self.subcarriers[0].clone();
        for m in &self.subcarriers[1..] {
            acc = acc.add(m).expect("shapes checked at construction");
        }
        acc.scale_real(1.0 / self.subcarriers.len() as f64)
    }
}

/// Draws `f` Rayleigh subcarrier matrices linked by the Gauss-Markov chain
/// `H_{f+1} = rho H_f + sqrt(1 - rho^2) W_f`.
pub fn draw_user_channel(params: &SystemParams, f: usize, rho: f64, seed: SeedSpec) -> Result<UserChannel> {
    if f == 0 {
        return Err(Error::InvalidParams("at least one subcarrier is required".into()));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParams(format!("rho must lie in [0, 1], got {rho}")));
    }
    let mut rng = seed.rng();
    let n = params.n_r * params.n_t;
    let innovation = (1.0 - rho * rho).max(0.0).sqrt();
    let mut current = complex_gaussian(&mut rng, n);
    let mut mats = Vec::with_capacity(f);
    mats.push(CMat::new(params.n_r, params.n_t, current.clone())?);
    for _ in 1..f {
        let w = complex_gaussian(&mut rng, n);
        current = current.iter().zip(&w).map(|(h, w)| h * rho + w * innovation).collect();
        mats.push(CMat::new(params.n_r, params.n_t, current.clone())?);
    }
    UserChannel::new(mats, Some(rho))
}

/// `H^H u`, so that `<u, H x> = <h_hat, x>` for every `x`.
pub fn effective_channel(h: &CMat, u: &CVec) -> Result<CVec> {
    h.adjoint_mul_vec(u)
}

/// Effective channel together with its direction and normalised SNR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveChannel {
    h_hat: CVec,
    lambda_sq: f64,
    direction: CVec,
    degenerate: bool,
}

impl EffectiveChannel {
    pub fn new(h_hat: CVec, params: &SystemParams) -> Self {
        let norm = h_hat.norm2();
        let lambda_sq = params.power * norm * norm / (params.n_t as f64 * params.noise_var);
        match h_hat.normalized() {
            Some(direction) => EffectiveChannel { h_hat, lambda_sq, direction, degenerate: false },
            None => {
                let dim = h_hat.dim();
                EffectiveChannel { h_hat, lambda_sq: 0.0, direction: CVec::basis(dim, 0), degenerate: true }
            }
        }
    }

    /// Builds `lambda * h` on the effective-channel scale.
    pub fn from_direction(direction: &CVec, lambda_sq: f64, params: &SystemParams) -> Self {
        let h_hat = direction.scale_real(lambda_sq.sqrt() * params.amplitude_scale());
        Self::new(h_hat, params)
    }

    pub fn h_hat(&self) -> &CVec {
        &self.h_hat
    }

    pub fn lambda_sq(&self) -> f64 {
        self.lambda_sq
    }

    /// `lambda^2 / (1 + lambda^2)`.
    pub fn lambda_tilde(&self) -> f64 {
        self.lambda_sq / (1.0 + self.lambda_sq)
    }

    pub fn direction(&self) -> &CVec {
        &self.direction
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceiveFilter {
    pub u: CVec,
    /// Set for the all-zero channel, where `u = e1` is returned.
    pub degenerate: bool,
}

/// Maximum ratio combiner: dominant left singular vector of `H`.
pub fn mrc_filter(h: &CMat) -> ReceiveFilter {
    if h.frobenius_norm() == 0.0 {
        return ReceiveFilter { u: CVec::basis(h.rows(), 0), degenerate: true };
    }
    if h.rows() == 1 {
        return ReceiveFilter { u: CVec::basis(1, 0), degenerate: false };
    }
    let gram = h.mul(&h.adjoint()).expect("conformable");
    let (_, u) = hermitian_largest_eigenpair(&gram).expect("Gram matrices are Hermitian");
    ReceiveFilter { u, degenerate: false }
}

/// Effective channel seen through the MRC filter of `h`.
pub fn mrc_effective(h: &CMat, params: &SystemParams) -> EffectiveChannel {
    let f = mrc_filter(h);
    let h_hat = effective_channel(h, &f.u).expect("filter has n_r entries");
    EffectiveChannel::new(h_hat, params)
}

/// SINR-maximising receive filter for a user served by `own` while the
/// beams in `interferers` are co-scheduled, `scheduled` users in total.
///
/// The maximiser of the generalised Rayleigh quotient with a rank-one
/// signal matrix `g g^H` (`g = H w_own`) is `Q^{-1} g`, where `Q` is the
/// interference-plus-noise matrix; the attained SINR is `g^H Q^{-1} g`.
pub fn sinr_optimal_filter_for(
    h: &CMat,
    own: &CVec,
    interferers: &[&CVec],
    scheduled: usize,
    params: &SystemParams,
) -> Result<(CVec, f64)> {
    let g = h.mul_vec(own)?;
    let mut q = CMat::identity(h.rows()).scale_real(params.noise_term(scheduled));
    for w in interferers {
        let gi = h.mul_vec(w)?;
        q = q.add(&CMat::outer(&gi, &gi))?;
    }
    let x = cholesky_solve(&q, &g)?;
    let sinr = inner(&g, &x)?.re.max(0.0);
    let u = match x.normalized() {
        Some(u) => u.phase_normalized(),
        None => CVec::basis(h.rows(), 0),
    };
    Ok((u, sinr))
}

/// [`sinr_optimal_filter_for`] for user `m` of a codebook assignment.
pub fn sinr_optimal_filter(
    h: &CMat,
    assign: &BeamAssignment,
    codebook: &Codebook,
    m: usize,
    params: &SystemParams,
) -> Result<(CVec, f64)> {
    assign.validate(codebook, params)?;
    let own_idx = assign.beam_of(m).ok_or(Error::MissingUser(m))?;
    let own = &codebook.vectors()[own_idx];
    let interferers: Vec<&CVec> =
        assign.pairs().filter(|&(u, _)| u != m).map(|(_, b)| &codebook.vectors()[b]).collect();
    sinr_optimal_filter_for(h, own, &interferers, assign.len(), params)
}

/// Writes channels as stacked matrix rows in the codebook text format.
pub fn save_channels(channels: &[UserChannel], path: &Path) -> Result<()> {
    let first = channels.first().ok_or(Error::EmptyDimension(0))?;
    let (n_r, n_t, f) = (first.n_r(), first.n_t(), first.num_subcarriers());
    let mut rows: Vec<&[C64]> = Vec::new();
    for ch in channels {
        if ch.n_r() != n_r || ch.n_t() != n_t || ch.num_subcarriers() != f {
            return Err(Error::Precondition("all channels must share shape and subcarrier count".into()));
        }
        for m in ch.subcarriers() {
            for i in 0..n_r {
                rows.push(&m.as_slice()[i * n_t..(i + 1) * n_t]);
            }
        }
    }
    let text = textio::write_records(
        &[("dim", n_t), ("size", rows.len()), ("rows", n_r), ("subcarriers", f)],
        Some("user channels, n_r rows per matrix, subcarriers consecutive per user"),
        rows.into_iter(),
    );
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_channels(path: &Path) -> Result<Vec<UserChannel>> {
    let text = std::fs::read_to_string(path)?;
    let doc = textio::parse(path, &text, &["dim", "size", "rows", "subcarriers"])?;
    let (n_t, n_r, f) = (doc.header["dim"], doc.header["rows"], doc.header["subcarriers"]);
    let per_user = n_r * f;
    if per_user == 0 || doc.records.len() % per_user != 0 || doc.records.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: doc.header_line,
            msg: format!("size must be a positive multiple of rows*subcarriers = {per_user}"),
        });
    }
    let mut users = Vec::new();
    for chunk in doc.records.chunks(per_user) {
        let mats = chunk
            .chunks(n_r)
            .map(|rows| CMat::new(n_r, n_t, rows.iter().flat_map(|r| r.entries.iter().copied()).collect()))
            .collect::<Result<Vec<_>>>()?;
        users.push(UserChannel::new(mats, None)?);
    }
    Ok(users)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sample_complex_gaussian;

    fn params(n_t: usize, n_r: usize) -> SystemParams {
        SystemParams::new(n_t, n_r, n_t.min(2), 10.0, 1.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::new(2, 1, 3, 1.0, 1.0).is_err());
        assert!(SystemParams::new(2, 1, 2, 0.0, 1.0).is_err());
        assert!(SystemParams::new(2, 1, 2, 1.0, -1.0).is_err());
        let p = SystemParams::from_snr_db(4, 1, 2, 20.0).unwrap();
        assert!((p.snr() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn single_subcarrier_and_degenerate_chain() {
        let p = params(4, 2);
        let one = draw_user_channel(&p, 1, 0.5, SeedSpec::new(1, 1)).unwrap();
        assert_eq!(one.num_subcarriers(), 1);
        assert_eq!((one.n_r(), one.n_t()), (2, 4));
        let same = draw_user_channel(&p, 3, 1.0, SeedSpec::new(1, 2)).unwrap();
        assert_eq!(same.subcarriers()[0], same.subcarriers()[1]);
        assert_eq!(same.subcarriers()[1], same.subcarriers()[2]);
        assert!(draw_user_channel(&p, 0, 0.5, SeedSpec::new(1, 1)).is_err());
        assert!(draw_user_channel(&p, 2, 1.5, SeedSpec::new(1, 1)).is_err());
    }

    #[test]
    fn uncorrelated_subcarriers_when_rho_zero() {
        let p = SystemParams::new(1, 1, 1, 1.0, 1.0).unwrap();
        let n = 10_000;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let ch = draw_user_channel(&p, 2, 0.0, SeedSpec::new(4, i)).unwrap();
            acc += ch.subcarriers()[0].get(0, 0).conj() * ch.subcarriers()[1].get(0, 0);
        }
        let corr = (acc / n as f64).norm();
        assert!(corr < 0.02, "correlation {corr}");
    }

    #[test]
    fn correlated_subcarriers_follow_rho() {
        let p = SystemParams::new(1, 1, 1, 1.0, 1.0).unwrap();
        let n = 10_000;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let ch = draw_user_channel(&p, 2, 0.95, SeedSpec::new(5, i)).unwrap();
            acc += ch.subcarriers()[0].get(0, 0).conj() * ch.subcarriers()[1].get(0, 0);
        }
        assert!(((acc / n as f64).re - 0.95).abs() < 0.03);
    }

    #[test]
    fn effective_channel_basics() {
        let h = CMat::new(1, 2, vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.25)]).unwrap();
        let e = effective_channel(&h, &CVec::basis(1, 0)).unwrap();
        assert_eq!(e.as_slice(), &[C64::new(1.0, -2.0), C64::new(-0.5, -0.25)]);
        let id = effective_channel(&CMat::identity(3), &CVec::basis(3, 0)).unwrap();
        assert_eq!(id, CVec::basis(3, 0));
    }

    #[test]
    fn effective_channel_adjoint_identity_and_linearity() {
        for s in 0..20 {
            let g: Vec<CVec> = (0..2).map(|r| sample_complex_gaussian(4, SeedSpec::new(s, r))).collect();
            let h = CMat::from_rows(&g).unwrap();
            let u = sample_complex_gaussian(2, SeedSpec::new(s, 10));
            let x = sample_complex_gaussian(4, SeedSpec::new(s, 11));
            let hh = effective_channel(&h, &u).unwrap();
            let lhs = inner(&u, &h.mul_vec(&x).unwrap()).unwrap();
            let rhs = inner(&hh, &x).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
            let alpha = C64::new(0.3, -1.7);
            let scaled = effective_channel(&h, &u.scale(alpha)).unwrap();
            assert!(scaled.sub(&hh.scale(alpha)).unwrap().norm2() < 1e-12);
        }
    }

    #[test]
    fn effective_channel_invariants() {
        let p = params(3, 1);
        let hh = sample_complex_gaussian(3, SeedSpec::new(3, 3));
        let e = EffectiveChannel::new(hh.clone(), &p);
        assert!(e.direction().sub(&hh.scale_real(1.0 / hh.norm2())).unwrap().norm2() < 1e-12);
        let expect = p.power * hh.norm2().powi(2) / (3.0 * p.noise_var);
        assert!((e.lambda_sq() - expect).abs() < 1e-12 * expect);
        let back = EffectiveChannel::from_direction(e.direction(), e.lambda_sq(), &p);
        assert!(back.h_hat().sub(&hh).unwrap().norm2() < 1e-12);
        let zero = EffectiveChannel::new(CVec::zeros(3), &p);
        assert!(zero.is_degenerate());
        assert_eq!(zero.lambda_sq(), 0.0);
    }

    #[test]
    fn mrc_simple_cases() {
        let f = mrc_filter(&CMat::new(1, 3, vec![C64::new(0.3, 0.1); 3]).unwrap());
        assert_eq!(f.u, CVec::basis(1, 0));
        let h = CMat::from_real_rows(&[&[2.0, 0.0], &[0.0, 0.0]]).unwrap();
        let f = mrc_filter(&h);
        assert!((f.u[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        let z = mrc_filter(&CMat::zeros(2, 2));
        assert!(z.degenerate);
        assert_eq!(z.u, CVec::basis(2, 0));
    }

    #[test]
    fn mrc_matches_grid_search() {
        for s in 0..5 {
            let rows: Vec<CVec> = (0..2).map(|r| sample_complex_gaussian(4, SeedSpec::new(50 + s, r))).collect();
            let h = CMat::from_rows(&rows).unwrap();
            let f = mrc_filter(&h);
            let got = effective_channel(&h, &f.u).unwrap().norm2();
            let mut best = 0.0f64;
            for i in 0..=100 {
                let t = std::f64::consts::FRAC_PI_2 * i as f64 / 100.0;
                for j in 0..100 {
                    let ph = 2.0 * std::f64::consts::PI * j as f64 / 100.0;
                    let u = CVec::new(vec![C64::new(t.cos(), 0.0), C64::from_polar(t.sin(), ph)]).unwrap();
                    best = best.max(effective_channel(&h, &u).unwrap().norm2());
                }
            }
            assert!(got >= best - 1e-12);
            assert!((got - best).abs() < 1e-3, "{got} vs {best}");
        }
    }

    #[test]
    fn sinr_filter_single_antenna_matches_scalar_sinr() {
        let p = params(3, 1);
        let h = CMat::from_rows(&[sample_complex_gaussian(3, SeedSpec::new(8, 0))]).unwrap();
        let c = Codebook::dft(3);
        let assign = BeamAssignment::from_pairs(&[(0, 1), (1, 2)]).unwrap();
        let (_, sinr) = sinr_optimal_filter(&h, &assign, &c, 0, &p).unwrap();
        let hh = effective_channel(&h, &CVec::basis(1, 0)).unwrap();
        let own = inner(&hh, &c.vectors()[1]).unwrap().norm_sqr();
        let intf = inner(&hh, &c.vectors()[2]).unwrap().norm_sqr();
        let expect = own / (p.noise_term(2) + intf);
        assert!((sinr - expect).abs() < 1e-12 * expect.max(1.0));
    }

    #[test]
    fn sinr_filter_without_interference() {
        let p = SystemParams::new(2, 2, 1, 5.0, 0.5).unwrap();
        let assign = BeamAssignment::from_pairs(&[(0, 0)]).unwrap();
        let (_, sinr) = sinr_optimal_filter(&CMat::identity(2), &assign, &Codebook::canonical_onb(2), 0, &p).unwrap();
        assert!((sinr - 10.0).abs() < 1e-12);
    }

    #[test]
    fn sinr_filter_dominates_mrc_and_random_filters() {
        let p = SystemParams::new(4, 2, 2, 10.0, 1.0).unwrap();
        let c = Codebook::random_unitary(4, SeedSpec::new(1, 1));
        let assign = BeamAssignment::from_pairs(&[(0, 0), (1, 3)]).unwrap();
        let sinr_of = |h: &CMat, u: &CVec| {
            let hh = effective_channel(h, &u.normalized().unwrap()).unwrap();
            let own = inner(&hh, &c.vectors()[0]).unwrap().norm_sqr();
            let intf = inner(&hh, &c.vectors()[3]).unwrap().norm_sqr();
            own / (p.noise_term(2) + intf)
        };
        for s in 0..50 {
            let rows: Vec<CVec> = (0..2).map(|r| sample_complex_gaussian(4, SeedSpec::new(900 + s, r))).collect();
            let h = CMat::from_rows(&rows).unwrap();
            let (u, best) = sinr_optimal_filter(&h, &assign, &c, 0, &p).unwrap();
            assert!((sinr_of(&h, &u) - best).abs() < 1e-9 * best.max(1.0));
            let mrc = sinr_of(&h, &mrc_filter(&h).u);
            assert!(best >= mrc - 1e-12);
            for r in 0..20 {
                let u = sample_complex_gaussian(2, SeedSpec::new(7000 + s, r));
                assert!(mrc.max(best) >= sinr_of(&h, &u) - 1e-12);
                assert!(best >= sinr_of(&h, &u) - 1e-12);
            }
        }
    }

    #[test]
    fn channel_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ch.txt");
        let p = params(3, 2);
        let chans: Vec<UserChannel> =
            (0..3).map(|u| draw_user_channel(&p, 2, 0.9, SeedSpec::new(2, u)).unwrap()).collect();
        save_channels(&chans, &path).unwrap();
        let back = load_channels(&path).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in chans.iter().zip(&back) {
            assert_eq!(a.subcarriers(), b.subcarriers());
        }
    }
}
