//! Synthetic sessions by Ogata thinning, and parameter-recovery checks.
//!
//! The dominating rate is rebuilt at every accepted event and at every
//! window boundary. Over a window `[t, t_end]` it is the sum over targets of
//! `μ0 + Σ_f ν^{e,f} sup S^f` (the supremum of each subtitle's shape over
//! the window, which is exact per subtitle because shapes are unimodal),
//! plus the current excitation, which can only decay until the next event.
//! Windows end no later than `t + window` and never extend past the next
//! subtitle, so no new shape switches on inside a window.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::spectral_radius;
use crate::error::{Error, Result};
use crate::events::{SessionCollection, VideoSession};
use crate::fitter::{bootstrap_fit, BootstrapConfig, FitConfig, FitReport};
use crate::intensity::HawkesParams;
use crate::rng::{substream, Stream};

pub const DEFAULT_WINDOW: f64 = 0.5;
pub const DEFAULT_MAX_EVENTS: usize = 1_000_000;

/// Where the exogenous subtitle stream comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtitleSource {
    /// Homogeneous Poisson rate (per minute) for each label.
    Rates(Vec<f64>),
    /// The same fixed subtitle times, per label, in every session.
    Fixed(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub duration: f64,
    pub seed: u64,
    pub subtitles: SubtitleSource,
    /// Longest window over which one dominating rate is used.
    pub window: f64,
    /// Abort once a session holds this many events.
    pub max_events: usize,
}

impl SimConfig {
    pub fn new(duration: f64, seed: u64, subtitles: SubtitleSource) -> Self {
        SimConfig {
            duration,
            seed,
            subtitles,
            window: DEFAULT_WINDOW,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }

    pub fn validate(&self, n_labels: usize) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidInput("simulation duration must be positive".into()));
        }
        if !(self.window > 0.0) {
            return Err(Error::InvalidInput("bound window must be positive".into()));
        }
        match &self.subtitles {
            SubtitleSource::Rates(r) => {
                if r.len() != n_labels {
                    return Err(Error::InvalidInput(format!("expected {n_labels} subtitle rates, got {}", r.len())));
                }
                if r.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidInput("subtitle rates must be finite and nonnegative".into()));
                }
            }
            SubtitleSource::Fixed(times) => {
                if times.len() != n_labels {
                    return Err(Error::InvalidInput(format!(
                        "expected {n_labels} subtitle lists, got {}",
                        times.len()
                    )));
                }
                for l in times {
                    if l.windows(2).any(|w| w[0] > w[1]) || l.iter().any(|&t| !(0.0..=self.duration).contains(&t)) {
                        return Err(Error::InvalidInput("fixed subtitle times must be sorted and within [0, T]".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

fn poisson_times<R: Rng>(rate: f64, duration: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let exp = Exp::new(rate).expect("positive rate");
    let mut t = exp.sample(rng);
    while t < duration {
        out.push(t);
        t += exp.sample(rng);
    }
    out
}

/// Independent homogeneous Poisson subtitle times per label on `[0, T)`.
pub fn simulate_subtitles(rates: &[f64], duration: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = substream(seed, Stream::Subtitles, 0);
    rates.iter().map(|&r| poisson_times(r, duration, &mut rng)).collect()
}

/// Ogata thinning of one session with the given subtitle stream.
pub fn simulate_with_subtitles<R: Rng>(
    params: &HawkesParams,
    subtitles: Vec<Vec<f64>>,
    duration: f64,
    window: f64,
    max_events: usize,
    id: String,
    rng: &mut R,
) -> Result<VideoSession> {
    let n = params.emotions.len();
    let shape = &params.shape;
    let pe = &params.per_emotion;
    let mu0_total: f64 = pe.iter().map(|p| p.mu0).sum();
    let nu_col: Vec<f64> = (0..n).map(|f| pe.iter().map(|p| p.nu[f]).sum()).collect();
    // All subtitle times, merged, to find window ends.
    let mut sub_all: Vec<f64> = subtitles.iter().flatten().copied().collect();
    sub_all.sort_by(f64::total_cmp);

    let mut chat: Vec<Vec<f64>> = vec![Vec::new(); n];
    // endo[e][f]: Σ_{t_j^f < t} exp(−(t − t_j^f)/γ^e) at the current time.
    let mut endo = vec![vec![0.0; n]; n];
    let mut t = 0.0_f64;
    let mut n_events = 0usize;
    let mut lambda = vec![0.0; n];

    let decay = |endo: &mut Vec<Vec<f64>>, dt: f64| {
        if dt > 0.0 {
            for (e, row) in endo.iter_mut().enumerate() {
                let k = (-dt / pe[e].gamma).exp();
                for a in row.iter_mut() {
                    *a *= k;
                }
            }
        }
    };
    let endo_rate = |endo: &Vec<Vec<f64>>, e: usize| -> f64 {
        endo[e].iter().zip(&pe[e].alpha).map(|(a, al)| a * al).sum::<f64>() / pe[e].gamma
    };

    while t < duration {
        let next_sub = sub_all[sub_all.partition_point(|&s| s <= t)..].first().copied();
        let mut t_end = (t + window).min(duration);
        if let Some(s) = next_sub {
            t_end = t_end.min(s);
        }
        let mut bound = mu0_total;
        for f in 0..n {
            if nu_col[f] > 0.0 {
                let sup: f64 = subtitles[f]
                    .iter()
                    .take_while(|&&tau| tau <= t)
                    .map(|&tau| shape.sup_on(t - tau, t_end - tau))
                    .sum();
                bound += nu_col[f] * sup;
            }
        }
        bound += (0..n).map(|e| endo_rate(&endo, e)).sum::<f64>();

        if !(bound > 0.0) {
            t = t_end;
            continue;
        }
        let s = t + Exp::new(bound).expect("positive bound").sample(rng);
        if s >= t_end {
            decay(&mut endo, t_end - t);
            t = t_end;
            continue;
        }
        decay(&mut endo, s - t);
        t = s;

        let mut total = 0.0;
        for e in 0..n {
            let video: f64 = (0..n)
                .filter(|&f| pe[e].nu[f] != 0.0)
                .map(|f| pe[e].nu[f] * crate::intensity::background_s(t, &subtitles[f], shape))
                .sum();
            lambda[e] = pe[e].mu0 + video + endo_rate(&endo, e);
            total += lambda[e];
        }
        if total > bound * (1.0 + 1e-12) {
            return Err(Error::BoundViolated {
                time: t,
                intensity: total,
                bound,
            });
        }
        let u: f64 = rng.random::<f64>() * bound;
        if u >= total {
            continue;
        }
        // Label by intensity share; `u < total` is itself uniform on [0, total).
        let mut acc = 0.0;
        let mut label = n - 1;
        for (e, &l) in lambda.iter().enumerate() {
            acc += l;
            if u < acc {
                label = e;
                break;
            }
        }
        chat[label].push(t);
        for row in endo.iter_mut() {
            row[label] += 1.0;
        }
        n_events += 1;
        if n_events > max_events {
            return Err(Error::Supercritical {
                events: n_events,
                time: t,
                spectral_radius: spectral_radius(&params.alpha_matrix()),
            });
        }
    }

    Ok(VideoSession {
        id,
        duration,
        chat,
        subtitles,
    })
}

fn warn_if_supercritical(params: &HawkesParams) {
    let rho = spectral_radius(&params.alpha_matrix());
    if rho >= 1.0 {
        log::warn!("spectral radius of the branching matrix is {rho:.4} >= 1; the process may explode");
    }
}

fn session_subtitles(sim: &SimConfig, index: usize) -> Vec<Vec<f64>> {
    match &sim.subtitles {
        SubtitleSource::Rates(r) => {
            let mut rng = substream(sim.seed, Stream::Subtitles, index as u64);
            r.iter().map(|&x| poisson_times(x, sim.duration, &mut rng)).collect()
        }
        SubtitleSource::Fixed(times) => times.clone(),
    }
}

/// Session number `index` of a corpus drawn with `sim`. Each index has its
/// own random streams, so a session does not depend on how many others are
/// drawn or in which order.
pub fn simulate_session_indexed(params: &HawkesParams, sim: &SimConfig, index: usize) -> Result<VideoSession> {
    params.validate()?;
    sim.validate(params.emotions.len())?;
    let subs = session_subtitles(sim, index);
    let mut rng = substream(sim.seed, Stream::Simulate, index as u64);
    simulate_with_subtitles(
        params,
        subs,
        sim.duration,
        sim.window,
        sim.max_events,
        format!("sim{index:04}"),
        &mut rng,
    )
}

pub fn simulate_session(params: &HawkesParams, sim: &SimConfig) -> Result<VideoSession> {
    warn_if_supercritical(params);
    simulate_session_indexed(params, sim, 0)
}

pub fn simulate_corpus(params: &HawkesParams, sim: &SimConfig, n_sessions: usize) -> Result<SessionCollection> {
    warn_if_supercritical(params);
    let sessions = (0..n_sessions)
        .into_par_iter()
        .map(|k| simulate_session_indexed(params, sim, k))
        .collect::<Result<Vec<_>>>()?;
    SessionCollection::new(params.emotions.clone(), sessions)
}

/// Acceptance tolerances for recovered parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryTolerances {
    pub alpha_rel: f64,
    pub alpha_abs: f64,
    /// α entries with smaller true values are reported but not checked.
    pub alpha_min_truth: f64,
    pub mu0_rel: f64,
    pub nu_rel: f64,
    pub nu_min_truth: f64,
    pub gamma_rel: f64,
}

impl Default for RecoveryTolerances {
    fn default() -> Self {
        RecoveryTolerances {
            alpha_rel: 0.2,
            alpha_abs: 0.05,
            alpha_min_truth: 0.1,
            mu0_rel: 0.15,
            nu_rel: 0.3,
            nu_min_truth: 0.1,
            gamma_rel: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub target: String,
    /// `mu0`, `gamma`, `nu[<label>]` or `alpha[<label>]`.
    pub parameter: String,
    pub truth: f64,
    pub estimate: f64,
    pub abs_error: f64,
    /// `None` when the truth is zero.
    pub rel_error: Option<f64>,
    pub replica_mean: Option<f64>,
    pub replica_std: Option<f64>,
    /// Truth inside `mean ± 2 std` of the replicas.
    pub within_2std: Option<bool>,
    /// Whether a tolerance applies to this entry, and if so whether it holds.
    pub checked: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub n_sessions: usize,
    pub duration: f64,
    pub events_per_label: Vec<usize>,
    pub spectral_radius: f64,
    pub tolerances: RecoveryTolerances,
    pub rows: Vec<RecoveryRow>,
    pub failed_labels: Vec<String>,
    pub passed: bool,
}

impl RecoveryReport {
    pub fn failures(&self) -> impl Iterator<Item = &RecoveryRow> {
        self.rows.iter().filter(|r| r.checked && !r.pass)
    }
}

/// Compares a fit report against the parameters that generated the data.
pub fn recovery_report(
    truth: &HawkesParams,
    fit: &FitReport,
    collection: &SessionCollection,
    tol: &RecoveryTolerances,
) -> RecoveryReport {
    let n = truth.emotions.len();
    let mut rows = Vec::new();
    let mut failed_labels = Vec::new();
    for e in 0..n {
        let t = &truth.per_emotion[e];
        let est = &fit.params.per_emotion[e];
        let fitted = fit.status[e].status.is_some();
        if !fitted {
            failed_labels.push(t.target.clone());
        }
        let mean = fit.bootstrap.mean[e].as_ref();
        let std = fit.bootstrap.std[e].as_ref();
        let mut push = |parameter: String, truth_v: f64, est_v: f64, m: Option<f64>, s: Option<f64>, tolerance: Option<(f64, f64)>| {
            let abs_error = (est_v - truth_v).abs();
            let rel_error = (truth_v != 0.0).then(|| abs_error / truth_v.abs());
            let (checked, pass) = match tolerance {
                Some((rel, abs)) => (true, fitted && abs_error <= (rel * truth_v.abs()).max(abs)),
                None => (false, true),
            };
            rows.push(RecoveryRow {
                target: t.target.clone(),
                parameter,
                truth: truth_v,
                estimate: est_v,
                abs_error,
                rel_error,
                replica_mean: m,
                replica_std: s,
                within_2std: m.zip(s).map(|(m, s)| (truth_v - m).abs() <= 2.0 * s),
                checked,
                pass,
            });
        };
        push("mu0".into(), t.mu0, est.mu0, mean.map(|m| m.mu0), std.map(|s| s.mu0), Some((tol.mu0_rel, 0.0)));
        push("gamma".into(), t.gamma, est.gamma, mean.map(|m| m.gamma), std.map(|s| s.gamma), Some((tol.gamma_rel, 0.0)));
        for f in 0..n {
            let label = truth.emotions.label(f);
            push(
                format!("nu[{label}]"),
                t.nu[f],
                est.nu[f],
                mean.map(|m| m.nu[f]),
                std.map(|s| s.nu[f]),
                (t.nu[f] >= tol.nu_min_truth).then_some((tol.nu_rel, 0.0)),
            );
        }
        for f in 0..n {
            let label = truth.emotions.label(f);
            push(
                format!("alpha[{label}]"),
                t.alpha[f],
                est.alpha[f],
                mean.map(|m| m.alpha[f]),
                std.map(|s| s.alpha[f]),
                (t.alpha[f] >= tol.alpha_min_truth).then_some((tol.alpha_rel, tol.alpha_abs)),
            );
        }
    }
    let passed = failed_labels.is_empty() && rows.iter().all(|r| r.pass);
    RecoveryReport {
        n_sessions: collection.len(),
        duration: collection.sessions.first().map_or(0.0, |s| s.duration),
        events_per_label: (0..n).map(|e| collection.label_count(e)).collect(),
        spectral_radius: spectral_radius(&truth.alpha_matrix()),
        tolerances: *tol,
        rows,
        failed_labels,
        passed,
    }
}

/// Simulates `n_sessions` from `truth`, fits them with replicas, and scores
/// the recovery.
pub fn round_trip_validate(
    truth: &HawkesParams,
    n_sessions: usize,
    sim: &SimConfig,
    fit_config: &FitConfig,
    bootstrap: &BootstrapConfig,
    tol: &RecoveryTolerances,
) -> Result<(RecoveryReport, FitReport, SessionCollection)> {
    let collection = simulate_corpus(truth, sim, n_sessions)?;
    let fit = bootstrap_fit(&collection, &truth.shape, fit_config, bootstrap)?;
    let report = recovery_report(truth, &fit, &collection, tol);
    Ok((report, fit, collection))
}
