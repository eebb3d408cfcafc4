//! Monte Carlo experiment drivers.
//!
//! Draw `d` derives every random quantity from `cfg.channel_seed()` and
//! `d`, so results do not depend on the worker count. Per-draw outputs are
//! collected in draw order and reduced on one thread.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::bounds::{c_nt, covering_delta, empirical_d, jindal_gap, lemma2_bound, lemma3_bound, theorem1_bound};
use crate::channel::{draw_user_channel, mrc_effective, EffectiveChannel, SystemParams, UserChannel};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::feedback::{chordal_cdi, efficient_cdi, gap_sample_delta_ra, lemma1_feedback, CrossGainTable, FeedbackMessage, RaSolver};
use crate::harness::config::{Precoder, RaConfigs, SimConfig, Strategy};
use crate::harness::output::{BoundValues, ContrastSummary, ExperimentKind, ExperimentResult, Metric, Series, Slopes};
use crate::harness::stats::{cdf_grid, log2_slope, mean_se};
use crate::numerics::CVec;
use crate::scheduler::{
    realize_rates, realize_zf_rates, schedule_bruteforce, schedule_greedy, schedule_zf_greedy, ScheduleDecision, ScheduleMethod,
};

/// Supplies the user channels of draw `d`.
pub type ChannelSource<'a> = dyn Fn(usize) -> Result<Vec<UserChannel>> + Sync + 'a;

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// I.i.d. Rayleigh users with Gauss-Markov subcarriers.
pub fn rayleigh_source(cfg: &SimConfig) -> Result<impl Fn(usize) -> Result<Vec<UserChannel>> + Sync + '_> {
    let params = cfg.params()?;
    let seed = cfg.channel_seed();
    Ok(move |d: usize| {
        (0..cfg.num_users)
            .map(|m| draw_user_channel(&params, cfg.subcarriers, cfg.rho, seed.child(&[d as u64, m as u64])))
            .collect()
    })
}

/// Shared per-SNR state.
struct Point<'a> {
    params: SystemParams,
    c: &'a Codebook,
    v: &'a Codebook,
    solver: RaSolver<'a>,
    table: CrossGainTable,
}

impl<'a> Point<'a> {
    fn new(cfg: &SimConfig, snr_db: f64, c: &'a Codebook, v: &'a Codebook) -> Result<Self> {
        let params = cfg.params_at(snr_db)?;
        let solver = RaSolver::new(c, v, &params, cfg.ra_space())?;
        Ok(Point { params, c, v, solver, table: CrossGainTable::new(c, v)? })
    }

    /// Feedback of one user. Multi-antenna or multi-subcarrier users report
    /// on the MRC effective channel of their subcarrier-averaged matrix,
    /// except under `ra-full`, which uses filtered, averaged true rates.
    fn feedback(&self, strategy: Strategy, ch: &UserChannel, eff: &EffectiveChannel) -> Result<Option<FeedbackMessage>> {
        Ok(Some(match strategy {
            Strategy::Perfect => return Ok(None),
            Strategy::Chordal => chordal_cdi(eff, self.v)?,
            Strategy::RaEfficient => efficient_cdi(eff, self.c, self.v, &self.table)?,
            Strategy::Lemma1 => lemma1_feedback(eff, self.c, self.v)?,
            Strategy::RaFull => {
                if ch.n_r() == 1 && ch.num_subcarriers() == 1 {
                    self.solver.solve(eff)?.0
                } else {
                    self.solver.solve_multiantenna(ch)?.0
                }
            }
        }))
    }

    /// Scheduler input `theta * sqrt(n_t sigma^2 / P) * nu`, or the
    /// effective channel itself without feedback.
    fn input(&self, eff: &EffectiveChannel, msg: &Option<FeedbackMessage>) -> CVec {
        match msg {
            Some(m) => m.effective_vector(self.v, &self.params),
            None => eff.h_hat().clone(),
        }
    }

    fn schedule(&self, method: ScheduleMethod, inputs: &[CVec]) -> Result<ScheduleDecision> {
        match method {
            ScheduleMethod::Brute => schedule_bruteforce(inputs, self.c, &self.params),
            ScheduleMethod::Greedy => schedule_greedy(inputs, self.c, &self.params),
        }
    }

    fn realized(&self, cfg: &SimConfig, precoder: Precoder, inputs: &[CVec], channels: &[UserChannel]) -> Result<f64> {
        Ok(match precoder {
            Precoder::FixedCodebook => realize_rates(&self.schedule(cfg.scheduler, inputs)?, self.c, channels, &self.params)?.sum,
            Precoder::Zf => realize_zf_rates(&schedule_zf_greedy(inputs, &self.params)?, channels, &self.params)?.sum,
        })
    }
}

fn effective_channels(channels: &[UserChannel], params: &SystemParams) -> Vec<EffectiveChannel> {
    channels.iter().map(|ch| mrc_effective(&ch.averaged(), params)).collect()
}

fn check_users(channels: &[UserChannel], cfg: &SimConfig) -> Result<()> {
    if channels.len() != cfg.num_users {
        return Err(Error::Precondition(format!("source produced {} users, expected {}", channels.len(), cfg.num_users)));
    }
    Ok(())
}

fn series(strategy: &str, metric: Metric, snr_db: f64, bits: u32, per_draw: Vec<f64>) -> Series {
    let (mean, std_err) = mean_se(&per_draw);
    Series {
        strategy: strategy.into(),
        metric,
        snr_db,
        bits,
        samples: per_draw.len(),
        cdf: cdf_grid(&per_draw),
        per_draw,
        mean,
        std_err,
        bounds: BoundValues::default(),
    }
}

pub fn run_sum_rate_experiment(cfg: &SimConfig) -> Result<ExperimentResult> {
    let source = rayleigh_source(cfg)?;
    run_sum_rate_with(cfg, &source)
}

/// Sum-rate experiment over channels from `source`.
pub fn run_sum_rate_with(cfg: &SimConfig, source: &ChannelSource<'_>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (c, v) = cfg.codebooks(cfg.bits)?;
    let points: Vec<Point> = cfg.snr_db.iter().map(|&s| Point::new(cfg, s, &c, &v)).collect::<Result<_>>()?;
    let strategies = &cfg.strategies;
    let draws: Vec<Vec<Vec<f64>>> = in_pool(cfg.workers, || {
        (0..cfg.num_draws)
            .into_par_iter()
            .map(|d| {
                let channels = source(d)?;
                check_users(&channels, cfg)?;
                points
                    .iter()
                    .map(|pt| {
                        let effs = effective_channels(&channels, &pt.params);
                        strategies
                            .iter()
                            .map(|&st| {
                                let inputs: Vec<CVec> = channels
                                    .iter()
                                    .zip(&effs)
                                    .map(|(ch, eff)| Ok(pt.input(eff, &pt.feedback(st, ch, eff)?)))
                                    .collect::<Result<_>>()?;
                                pt.realized(cfg, cfg.precoder, &inputs, &channels)
                            })
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut result = ExperimentResult::new(ExperimentKind::SumRate, cfg);
    for (s, &snr_db) in cfg.snr_db.iter().enumerate() {
        for (k, st) in strategies.iter().enumerate() {
            let per_draw: Vec<f64> = draws.iter().map(|d| d[s][k]).collect();
            result.series.push(series(st.name(), Metric::SumRate, snr_db, cfg.bits, per_draw));
        }
    }
    if cfg.n_r > 1 || cfg.subcarriers > 1 {
        result.notes.push("feedback other than ra-full is computed on the MRC direction of the subcarrier-averaged channel".into());
    }
    Ok(result)
}

/// Lemma 2 applies when `C` is orthonormal and contained in `V`.
fn lemma2_applicable(c: &Codebook, v: &Codebook) -> bool {
    c.is_unitary() && v.contains_all(c)
}

pub fn run_delta_ra_experiment(cfg: &SimConfig) -> Result<ExperimentResult> {
    let source = rayleigh_source(cfg)?;
    run_delta_ra_with(cfg, &source)
}

/// Estimates `Delta R_RA` for every configured feedback strategy.
///
/// With `ra_configs = full` every user is scheduled, so the gap sums over
/// all users. Otherwise it sums over the users the scheduler selects from
/// either the true effective channels or the feedback.
pub fn run_delta_ra_with(cfg: &SimConfig, source: &ChannelSource<'_>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (c, v) = cfg.codebooks(cfg.bits)?;
    let points: Vec<Point> = cfg.snr_db.iter().map(|&s| Point::new(cfg, s, &c, &v)).collect::<Result<_>>()?;
    let strategies: Vec<Strategy> = cfg.strategies.iter().copied().filter(|&s| s != Strategy::Perfect).collect();
    if strategies.is_empty() {
        return Err(Error::Config { field: "strategies".into(), msg: "no feedback strategy to evaluate".into() });
    }
    let full = cfg.ra_configs == RaConfigs::Full;
    let draws: Vec<Vec<Vec<f64>>> = in_pool(cfg.workers, || {
        (0..cfg.num_draws)
            .into_par_iter()
            .map(|d| {
                let channels = source(d)?;
                check_users(&channels, cfg)?;
                points
                    .iter()
                    .map(|pt| {
                        let effs = effective_channels(&channels, &pt.params);
                        let s_h: BTreeSet<usize> = if full {
                            (0..cfg.num_users).collect()
                        } else {
                            let inputs: Vec<CVec> = effs.iter().map(|e| e.h_hat().clone()).collect();
                            pt.schedule(cfg.scheduler, &inputs)?.assignment.users().collect()
                        };
                        strategies
                            .iter()
                            .map(|&st| {
                                let msgs: Vec<FeedbackMessage> = channels
                                    .iter()
                                    .zip(&effs)
                                    .map(|(ch, eff)| Ok(pt.feedback(st, ch, eff)?.expect("feedback strategy")))
                                    .collect::<Result<_>>()?;
                                let mut users = s_h.clone();
                                if !full {
                                    let inputs: Vec<CVec> = msgs.iter().map(|m| m.effective_vector(pt.v, &pt.params)).collect();
                                    users.extend(pt.schedule(cfg.scheduler, &inputs)?.assignment.users());
                                }
                                gap_sample_delta_ra(&effs, &msgs, &users, &pt.solver)
                            })
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut result = ExperimentResult::new(ExperimentKind::DeltaRa, cfg);
    let with_lemma2 = lemma2_applicable(&c, &v) && full;
    if !with_lemma2 {
        result.notes.push("lemma 2 bound columns omitted: they need ra_configs = full and a unitary C contained in V".into());
    }
    let d_seed = cfg.channel_seed().child(&[u64::MAX]);
    for (s, &snr_db) in cfg.snr_db.iter().enumerate() {
        let params = points[s].params;
        let mut bounds = BoundValues::default();
        if with_lemma2 {
            let emp = in_pool(cfg.workers, || empirical_d(&c, &v, &params, cfg.num_draws, d_seed.child(&[s as u64])))??;
            bounds.d_est = Some(emp.d_est);
            bounds.d_hat = Some(emp.d_hat_est);
            bounds.lemma2_empirical_d = Some(lemma2_bound(&vec![emp.d_est; cfg.num_users], cfg.n_t));
            bounds.theorem1 = Some(theorem1_bound(cfg.n_s, cfg.n_t, params.snr(), emp.d_hat_est));
            if cfg.n_t >= 3 {
                let d3 = lemma3_bound(cfg.bits, cfg.n_t, params.snr())?;
                bounds.lemma3_d = Some(d3);
                bounds.lemma2_lemma3 = Some(lemma2_bound(&vec![d3; cfg.num_users], cfg.n_t));
            }
        }
        for (k, st) in strategies.iter().enumerate() {
            let per_draw: Vec<f64> = draws.iter().map(|d| d[s][k]).collect();
            let mut ser = series(st.name(), Metric::DeltaRa, snr_db, cfg.bits, per_draw);
            ser.bounds = bounds.clone();
            result.series.push(ser);
        }
    }
    Ok(result)
}

/// Tabulates `D(B)` and `D_hat(B)` over `cfg.bits_list` at the first SNR
/// and fits their log2 slopes.
pub fn run_scaling_experiment(cfg: &SimConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let bits_list = if cfg.bits_list.is_empty() { vec![cfg.bits] } else { cfg.bits_list.clone() };
    let snr_db = cfg.snr_db[0];
    let params = cfg.params_at(snr_db)?;
    let mut result = ExperimentResult::new(ExperimentKind::Scaling, cfg);
    let name = match cfg.feedback_codebook {
        crate::harness::config::CodebookSpec::Rvq { .. } => "rvq",
        _ => "feedback-codebook",
    };
    let (mut xs, mut d_hat, mut d_est) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &bits) in bits_list.iter().enumerate() {
        let (c, v) = cfg.codebooks(bits)?;
        let seed = cfg.channel_seed().child(&[u64::MAX - 1, i as u64]);
        let emp = in_pool(cfg.workers, || empirical_d(&c, &v, &params, cfg.num_draws, seed))??;
        let mut bounds = BoundValues {
            d_est: Some(emp.d_est),
            d_hat: Some(emp.d_hat_est),
            jindal_gap: Some(jindal_gap(bits, cfg.n_t, params.snr())),
            ..BoundValues::default()
        };
        if cfg.n_t >= 3 {
            bounds.lemma3_d = Some(c_nt(cfg.n_t)? * (-(bits as f64) / (cfg.n_t - 1) as f64).exp2());
            bounds.covering_delta = Some(covering_delta(cfg.n_t - 1, bits)?);
        }
        for (metric, mean, se) in [(Metric::DHat, emp.d_hat_est, emp.d_hat_se), (Metric::DEst, emp.d_est, emp.d_est_se)] {
            result.series.push(Series {
                strategy: name.into(),
                metric,
                snr_db,
                bits,
                samples: emp.samples,
                per_draw: Vec::new(),
                mean,
                std_err: se,
                cdf: Vec::new(),
                bounds: bounds.clone(),
            });
        }
        xs.push(bits as f64);
        d_hat.push(emp.d_hat_est);
        d_est.push(emp.d_est);
    }
    result.slopes = Some(Slopes {
        d_hat: log2_slope(&xs, &d_hat),
        d_est: log2_slope(&xs, &d_est),
        target: -1.0 / (cfg.n_t.max(2) - 1) as f64,
    });
    if bits_list.len() < 2 {
        result.notes.push("slope undefined with a single feedback size".into());
    }
    Ok(result)
}

pub fn run_contrast_experiment(cfg: &SimConfig) -> Result<ExperimentResult> {
    let source = rayleigh_source(cfg)?;
    run_contrast_with(cfg, &source)
}

/// Realised rate loss against perfect CSIT for fixed-codebook RA and for
/// zeroforcing on chordal CDI, across the SNR grid.
pub fn run_contrast_with(cfg: &SimConfig, source: &ChannelSource<'_>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (c, v) = cfg.codebooks(cfg.bits)?;
    let points: Vec<Point> = cfg.snr_db.iter().map(|&s| Point::new(cfg, s, &c, &v)).collect::<Result<_>>()?;
    let draws: Vec<Vec<[f64; 2]>> = in_pool(cfg.workers, || {
        (0..cfg.num_draws)
            .into_par_iter()
            .map(|d| {
                let channels = source(d)?;
                check_users(&channels, cfg)?;
                points
                    .iter()
                    .map(|pt| {
                        let effs = effective_channels(&channels, &pt.params);
                        let perfect: Vec<CVec> = effs.iter().map(|e| e.h_hat().clone()).collect();
                        let fb = |st: Strategy| -> Result<Vec<CVec>> {
                            channels.iter().zip(&effs).map(|(ch, eff)| Ok(pt.input(eff, &pt.feedback(st, ch, eff)?))).collect()
                        };
                        let ra = pt.realized(cfg, Precoder::FixedCodebook, &perfect, &channels)?
                            - pt.realized(cfg, Precoder::FixedCodebook, &fb(Strategy::RaFull)?, &channels)?;
                        let zf = pt.realized(cfg, Precoder::Zf, &perfect, &channels)?
                            - pt.realized(cfg, Precoder::Zf, &fb(Strategy::Chordal)?, &channels)?;
                        Ok([ra, zf])
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut result = ExperimentResult::new(ExperimentKind::Contrast, cfg);
    let mut ra_means = Vec::new();
    let mut zf_means = Vec::new();
    for (s, &snr_db) in cfg.snr_db.iter().enumerate() {
        let ra = series("ra-full", Metric::RaGap, snr_db, cfg.bits, draws.iter().map(|d| d[s][0]).collect());
        let mut zf = series("chordal-zf", Metric::ZfGap, snr_db, cfg.bits, draws.iter().map(|d| d[s][1]).collect());
        zf.bounds.jindal_gap = Some(jindal_gap(cfg.bits, cfg.n_t, points[s].params.snr()));
        ra_means.push((snr_db, ra.mean));
        zf_means.push((snr_db, zf.mean));
        result.series.push(ra);
        result.series.push(zf);
    }
    let ratio = |means: &[(f64, f64)]| -> Option<f64> {
        let &(top, hi) = means.iter().max_by(|a, b| a.0.total_cmp(&b.0))?;
        let &(_, lo) = means.iter().find(|m| m.0 == top - 20.0)?;
        Some(hi / lo)
    };
    let mut sorted = zf_means.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    result.contrast = Some(ContrastSummary {
        ra_gap_ratio: ratio(&ra_means),
        zf_gap_ratio: ratio(&zf_means),
        zf_gap_monotone: sorted.windows(2).all(|w| w[0].1 <= w[1].1),
    });
    Ok(result)
}
