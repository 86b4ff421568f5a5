//! Maximum-likelihood fitting, one target label at a time.
//!
//! The likelihood factorizes over target labels, so each label's
//! `2|E| + 2` parameters are fitted independently. The optimizer is the
//! bounded L-BFGS of [`crate::optim`]. It minimizes the negated
//! log-likelihood divided by the label's event count, which keeps the
//! tolerances meaningful across corpus sizes. Uncertainty comes from refits
//! on random subsets of sessions drawn *without* replacement ("replicas").

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EmotionSet, SessionCollection};
use crate::intensity::{EmotionParams, HawkesParams};
use crate::kernels::ShapeConfig;
use crate::likelihood::{loglik_and_grad, PreparedSession};
use crate::optim::{minimize_bounded, OptimOptions, OptimStatus};
use crate::rng::{substream, Stream};
use crate::stats::mean_std;

/// Closed interval for one parameter family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bounds {
    pub mu0: Range,
    pub nu: Range,
    pub alpha: Range,
    pub gamma: Range,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            mu0: Range::new(0.0, 50.0),
            nu: Range::new(1e-6, 10.0),
            alpha: Range::new(0.0, 50.0),
            gamma: Range::new(0.1, 20.0),
        }
    }
}

impl Bounds {
    /// Lower and upper bound vectors in `[mu0, nu.., alpha.., gamma]` layout.
    pub fn vectors(&self, n_labels: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![self.mu0.lo];
        let mut hi = vec![self.mu0.hi];
        lo.extend(std::iter::repeat_n(self.nu.lo, n_labels));
        hi.extend(std::iter::repeat_n(self.nu.hi, n_labels));
        lo.extend(std::iter::repeat_n(self.alpha.lo, n_labels));
        hi.extend(std::iter::repeat_n(self.alpha.hi, n_labels));
        lo.push(self.gamma.lo);
        hi.push(self.gamma.hi);
        (lo, hi)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("mu0", self.mu0), ("nu", self.nu), ("alpha", self.alpha), ("gamma", self.gamma)] {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi && r.lo >= 0.0) {
                return Err(Error::InvalidInput(format!("bad {name} bounds [{}, {}]", r.lo, r.hi)));
            }
        }
        if self.gamma.lo <= 0.0 {
            return Err(Error::InvalidInput("gamma lower bound must be positive".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: &EmotionParams) -> bool {
        self.mu0.contains(p.mu0)
            && self.gamma.contains(p.gamma)
            && p.nu.iter().all(|&v| self.nu.contains(v))
            && p.alpha.iter().all(|&v| self.alpha.contains(v))
    }
}

/// Multipliers of the fitted `γ` at which the objective is re-evaluated for
/// the profile diagnostic.
pub const GAMMA_PROFILE_MULTIPLIERS: [f64; 8] = [0.5, 0.75, 0.9, 1.0, 1.1, 1.25, 1.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub bounds: Bounds,
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub value_tol: f64,
    pub value_patience: usize,
    pub memory: usize,
    pub n_starts: usize,
    pub seed: u64,
    pub gamma_profile: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        let o = OptimOptions::default();
        FitConfig {
            bounds: Bounds::default(),
            max_iterations: o.max_iterations,
            grad_tol: o.grad_tol,
            value_tol: o.value_tol,
            value_patience: o.value_patience,
            memory: o.memory,
            n_starts: 3,
            seed: 0,
            gamma_profile: true,
        }
    }
}

impl FitConfig {
    pub fn optim_options(&self) -> OptimOptions {
        OptimOptions {
            max_iterations: self.max_iterations,
            grad_tol: self.grad_tol,
            value_tol: self.value_tol,
            value_patience: self.value_patience,
            memory: self.memory,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.n_starts == 0 || self.max_iterations == 0 || self.memory == 0 {
            return Err(Error::InvalidInput(
                "n_starts, max_iterations and memory must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub gamma: f64,
    pub loglik: f64,
}

/// Outcome of fitting one target label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionFit {
    pub params: EmotionParams,
    pub loglik: f64,
    pub n_events: usize,
    pub status: OptimStatus,
    pub iterations: usize,
    pub evaluations: usize,
    pub projected_grad_norm: f64,
    /// Log-likelihood at the initialization of the winning start.
    pub initial_loglik: f64,
    /// Which of the starts won (0 is the deterministic one).
    pub start: usize,
    /// Log-likelihood with `γ` moved and everything else held at the optimum.
    pub gamma_profile: Vec<ProfilePoint>,
}

impl EmotionFit {
    pub fn normalized_loglik(&self) -> f64 {
        self.loglik / self.n_events as f64
    }
}

/// Deterministic starting point.
pub fn initial_params(target: &str, e: usize, n_labels: usize, n_events: usize, total_duration: f64, bounds: &Bounds) -> EmotionParams {
    EmotionParams {
        target: target.to_string(),
        mu0: bounds.mu0.clamp(0.5 * n_events as f64 / total_duration),
        gamma: bounds.gamma.clamp(1.0),
        nu: vec![bounds.nu.clamp(0.1); n_labels],
        alpha: (0..n_labels)
            .map(|f| bounds.alpha.clamp(if f == e { 0.3 } else { 0.1 }))
            .collect(),
    }
}

fn jittered(x0: &[f64], lower: &[f64], upper: &[f64], seed: u64, e: usize, start: usize) -> Vec<f64> {
    let mut rng = substream(seed, Stream::InitJitter, ((e as u64) << 16) | start as u64);
    let ln2 = std::f64::consts::LN_2;
    x0.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&x, (&lo, &hi))| (x * rng.random_range(-ln2..ln2).exp()).clamp(lo, hi))
        .collect()
}

/// Negated log-likelihood per event and its gradient, as the optimizer wants it.
fn objective<'a>(
    e: usize,
    target: &'a str,
    sessions: &'a [&'a PreparedSession],
    n_events: usize,
) -> impl FnMut(&[f64], &mut [f64]) -> f64 + 'a {
    let scale = 1.0 / n_events as f64;
    move |x, grad| {
        let p = EmotionParams::from_vector(target, x);
        match loglik_and_grad(e, &p, sessions) {
            Ok((value, g, _)) => {
                for (gi, v) in grad.iter_mut().zip(g) {
                    *gi = -v * scale;
                }
                -value * scale
            }
            Err(_) => {
                grad.fill(0.0);
                f64::INFINITY
            }
        }
    }
}

/// Fits target label `e` on prepared sessions.
pub fn fit_emotion(
    e: usize,
    emotions: &EmotionSet,
    sessions: &[&PreparedSession],
    config: &FitConfig,
) -> Result<EmotionFit> {
    config.validate()?;
    let target = emotions.label(e);
    let n = emotions.len();
    let n_events: usize = sessions.iter().map(|s| s.count(e)).sum();
    if n_events == 0 {
        return Err(Error::NoEvents(target.to_string()));
    }
    let total_duration: f64 = sessions.iter().map(|s| s.duration).sum();
    let x0 = initial_params(target, e, n, n_events, total_duration, &config.bounds).to_vector();
    let (lower, upper) = config.bounds.vectors(n);
    let options = config.optim_options();

    let mut best: Option<(usize, crate::optim::OptimResult)> = None;
    for start in 0..config.n_starts {
        let x_start = if start == 0 {
            x0.clone()
        } else {
            jittered(&x0, &lower, &upper, config.seed, e, start)
        };
        let r = minimize_bounded(objective(e, target, sessions, n_events), &x_start, &lower, &upper, &options);
        log::debug!(
            "{target} start {start}: value {:.6} after {} iterations ({:?})",
            -r.value,
            r.iterations,
            r.status
        );
        // Strict improvement only, so ties keep the earlier start.
        if best.as_ref().is_none_or(|(_, b)| r.value < b.value) {
            best = Some((start, r));
        }
    }
    let (start, r) = best.expect("at least one start");
    if !r.value.is_finite() {
        return Err(Error::Numerical(format!("{target}: objective not finite at any start")));
    }
    let scale = n_events as f64;
    let params = EmotionParams::from_vector(target, &r.x);

    let gamma_profile = if config.gamma_profile {
        let mut pts = Vec::with_capacity(GAMMA_PROFILE_MULTIPLIERS.len());
        for m in GAMMA_PROFILE_MULTIPLIERS {
            let gamma = config.bounds.gamma.clamp(params.gamma * m);
            let p = EmotionParams {
                gamma,
                ..params.clone()
            };
            let (loglik, _, _) = loglik_and_grad(e, &p, sessions)?;
            pts.push(ProfilePoint { gamma, loglik });
        }
        pts
    } else {
        Vec::new()
    };

    Ok(EmotionFit {
        params,
        loglik: -r.value * scale,
        n_events,
        status: r.status,
        iterations: r.iterations,
        evaluations: r.evaluations,
        projected_grad_norm: r.projected_grad_norm,
        initial_loglik: -r.initial_value * scale,
        start,
        gamma_profile,
    })
}

/// Per-label outcome; a failed label does not stop the others.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelOutcome {
    Fitted(EmotionFit),
    Failed { target: String, error: String },
}

impl LabelOutcome {
    pub fn fit(&self) -> Option<&EmotionFit> {
        match self {
            LabelOutcome::Fitted(f) => Some(f),
            LabelOutcome::Failed { .. } => None,
        }
    }
}

/// Fits of every label of one corpus (or one replica subset).
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub emotions: EmotionSet,
    pub shape: ShapeConfig,
    pub labels: Vec<LabelOutcome>,
}

impl FitResult {
    /// Parameter set with failed labels filled by the no-event maximum:
    /// zero baseline and excitation, `ν` at its lower bound.
    pub fn params(&self, bounds: &Bounds) -> HawkesParams {
        let n = self.emotions.len();
        HawkesParams {
            emotions: self.emotions.clone(),
            shape: self.shape,
            per_emotion: self
                .labels
                .iter()
                .map(|o| match o {
                    LabelOutcome::Fitted(f) => f.params.clone(),
                    LabelOutcome::Failed { target, .. } => EmotionParams {
                        target: target.clone(),
                        mu0: bounds.mu0.lo,
                        gamma: bounds.gamma.clamp(1.0),
                        nu: vec![bounds.nu.lo; n],
                        alpha: vec![bounds.alpha.lo; n],
                    },
                })
                .collect(),
        }
    }

    pub fn n_failed(&self) -> usize {
        self.labels.iter().filter(|o| o.fit().is_none()).count()
    }
}

pub fn prepare_sessions(collection: &SessionCollection, shape: &ShapeConfig) -> Vec<PreparedSession> {
    collection
        .sessions
        .par_iter()
        .map(|s| PreparedSession::new(s, shape))
        .collect()
}

/// Fits every label on already prepared sessions; labels run concurrently.
pub fn fit_all_prepared(
    emotions: &EmotionSet,
    shape: &ShapeConfig,
    sessions: &[&PreparedSession],
    config: &FitConfig,
) -> FitResult {
    let labels = (0..emotions.len())
        .into_par_iter()
        .map(|e| match fit_emotion(e, emotions, sessions, config) {
            Ok(f) => LabelOutcome::Fitted(f),
            Err(err) => LabelOutcome::Failed {
                target: emotions.label(e).to_string(),
                error: err.to_string(),
            },
        })
        .collect();
    FitResult {
        emotions: emotions.clone(),
        shape: *shape,
        labels,
    }
}

pub fn fit_all(collection: &SessionCollection, shape: &ShapeConfig, config: &FitConfig) -> FitResult {
    let prepared = prepare_sessions(collection, shape);
    let refs: Vec<&PreparedSession> = prepared.iter().collect();
    fit_all_prepared(&collection.emotion_set, shape, &refs, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub n_replicas: usize,
    /// Fraction of sessions in each replica, drawn without replacement.
    pub frac: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_replicas: 10,
            frac: 0.6,
        }
    }
}

impl BootstrapConfig {
    pub fn subset_size(&self, n_sessions: usize) -> usize {
        ((self.frac * n_sessions as f64).round() as usize).clamp(1, n_sessions.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frac > 0.0 && self.frac <= 1.0) {
            return Err(Error::InvalidInput(format!("frac must be in (0, 1], got {}", self.frac)));
        }
        Ok(())
    }
}

/// Sorted session indices of replica `r`.
pub fn replica_members(seed: u64, replica: usize, n_sessions: usize, size: usize) -> Vec<usize> {
    let mut rng = substream(seed, Stream::Bootstrap, replica as u64);
    let mut idx = rand::seq::index::sample(&mut rng, n_sessions, size).into_vec();
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replica {
    pub index: usize,
    pub sessions: Vec<usize>,
    /// `None` for labels skipped in this replica.
    pub per_emotion: Vec<Option<EmotionParams>>,
    pub skipped: Vec<String>,
}

/// Per-parameter mean and standard deviation over the replicas that fitted
/// the label, in the params layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub target: String,
    pub n: usize,
    pub mu0: f64,
    pub gamma: f64,
    pub nu: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub n: usize,
    pub frac: f64,
    pub seed: u64,
    pub sessions_per_replica: usize,
    pub mean: Vec<Option<ParamSummary>>,
    pub std: Vec<Option<ParamSummary>>,
    pub replicas: Vec<Replica>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelLoglik {
    pub target: String,
    pub value: Option<f64>,
    pub normalized: Option<f64>,
    pub n_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStatus {
    pub target: String,
    pub status: Option<OptimStatus>,
    pub iterations: usize,
    pub evaluations: usize,
    pub projected_grad_norm: Option<f64>,
    pub start: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub gamma_profile: Vec<ProfilePoint>,
}

/// Fit report file: the params file fields followed by diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub params: HawkesParams,
    pub loglik: Vec<LabelLoglik>,
    pub status: Vec<LabelStatus>,
    pub bootstrap: BootstrapSummary,
}

impl FitReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn n_failed(&self) -> usize {
        self.status.iter().filter(|s| s.status.is_none()).count()
    }
}

fn summarize(target: &str, estimates: &[&EmotionParams]) -> (ParamSummary, ParamSummary) {
    let n_labels = estimates[0].n_labels();
    let stat = |get: &dyn Fn(&EmotionParams) -> f64| {
        let v: Vec<f64> = estimates.iter().map(|p| get(p)).collect();
        mean_std(&v)
    };
    let (mu0_m, mu0_s) = stat(&|p| p.mu0);
    let (g_m, g_s) = stat(&|p| p.gamma);
    let nu: Vec<(f64, f64)> = (0..n_labels).map(|f| stat(&|p| p.nu[f])).collect();
    let alpha: Vec<(f64, f64)> = (0..n_labels).map(|f| stat(&|p| p.alpha[f])).collect();
    let n = estimates.len();
    (
        ParamSummary {
            target: target.to_string(),
            n,
            mu0: mu0_m,
            gamma: g_m,
            nu: nu.iter().map(|x| x.0).collect(),
            alpha: alpha.iter().map(|x| x.0).collect(),
        },
        ParamSummary {
            target: target.to_string(),
            n,
            mu0: mu0_s,
            gamma: g_s,
            nu: nu.iter().map(|x| x.1).collect(),
            alpha: alpha.iter().map(|x| x.1).collect(),
        },
    )
}

/// Full-corpus fit plus `n_replicas` refits on random session subsets.
///
/// The reported parameters are those of the full-corpus fit; replicas supply
/// the mean and standard deviation. A replica whose subset has no events of
/// some label skips that label.
pub fn bootstrap_fit(
    collection: &SessionCollection,
    shape: &ShapeConfig,
    config: &FitConfig,
    bootstrap: &BootstrapConfig,
) -> Result<FitReport> {
    config.validate()?;
    bootstrap.validate()?;
    shape.validate()?;
    if collection.is_empty() {
        return Err(Error::InvalidInput("no sessions to fit".into()));
    }
    let prepared = prepare_sessions(collection, shape);
    let all: Vec<&PreparedSession> = prepared.iter().collect();
    let emotions = &collection.emotion_set;
    let n_labels = emotions.len();
    let size = bootstrap.subset_size(prepared.len());

    let full = fit_all_prepared(emotions, shape, &all, config);
    let replicas: Vec<(Vec<usize>, FitResult)> = (0..bootstrap.n_replicas)
        .into_par_iter()
        .map(|r| {
            let members = replica_members(config.seed, r, prepared.len(), size);
            let subset: Vec<&PreparedSession> = members.iter().map(|&i| &prepared[i]).collect();
            let fit = fit_all_prepared(emotions, shape, &subset, config);
            (members, fit)
        })
        .collect();

    let mut mean = Vec::with_capacity(n_labels);
    let mut std = Vec::with_capacity(n_labels);
    for e in 0..n_labels {
        let est: Vec<&EmotionParams> = replicas
            .iter()
            .filter_map(|(_, f)| f.labels[e].fit().map(|x| &x.params))
            .collect();
        if est.is_empty() {
            mean.push(None);
            std.push(None);
        } else {
            let (m, s) = summarize(emotions.label(e), &est);
            mean.push(Some(m));
            std.push(Some(s));
        }
    }
    let replicas = replicas
        .into_iter()
        .enumerate()
        .map(|(index, (sessions, fit))| Replica {
            index,
            sessions,
            skipped: fit
                .labels
                .iter()
                .filter_map(|o| match o {
                    LabelOutcome::Failed { target, .. } => Some(target.clone()),
                    LabelOutcome::Fitted(_) => None,
                })
                .collect(),
            per_emotion: fit.labels.iter().map(|o| o.fit().map(|f| f.params.clone())).collect(),
        })
        .collect();

    let loglik = full
        .labels
        .iter()
        .enumerate()
        .map(|(e, o)| LabelLoglik {
            target: emotions.label(e).to_string(),
            value: o.fit().map(|f| f.loglik),
            normalized: o.fit().map(|f| f.normalized_loglik()),
            n_events: collection.label_count(e),
        })
        .collect();
    let status = full
        .labels
        .iter()
        .enumerate()
        .map(|(e, o)| match o {
            LabelOutcome::Fitted(f) => LabelStatus {
                target: emotions.label(e).to_string(),
                status: Some(f.status),
                iterations: f.iterations,
                evaluations: f.evaluations,
                projected_grad_norm: Some(f.projected_grad_norm),
                start: Some(f.start),
                error: None,
                gamma_profile: f.gamma_profile.clone(),
            },
            LabelOutcome::Failed { target, error } => LabelStatus {
                target: target.clone(),
                status: None,
                iterations: 0,
                evaluations: 0,
                projected_grad_norm: None,
                start: None,
                error: Some(error.clone()),
                gamma_profile: Vec::new(),
            },
        })
        .collect();

    Ok(FitReport {
        params: full.params(&config.bounds),
        loglik,
        status,
        bootstrap: BootstrapSummary {
            n: bootstrap.n_replicas,
            frac: bootstrap.frac,
            seed: config.seed,
            sessions_per_replica: size,
            mean,
            std,
            replicas,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::VideoSession;
    use crate::likelihood::loglik_total;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    fn poisson_collection(labels: &[&str], rate: f64, durations: &[f64], seed: u64) -> SessionCollection {
        let set = EmotionSet::new(labels.iter().copied()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exp = Exp::new(rate).unwrap();
        let sessions = durations
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let mut s = VideoSession::empty(format!("s{k}"), d, labels.len());
                for l in &mut s.chat {
                    let mut t = exp.sample(&mut rng);
                    while t < d {
                        l.push(t);
                        t += exp.sample(&mut rng);
                    }
                }
                s
            })
            .collect();
        SessionCollection::new(set, sessions).unwrap()
    }

    #[test]
    fn poisson_mle() {
        let c = poisson_collection(&["a"], 2.0, &[25.0; 4], 11);
        let n = c.label_count(0) as f64;
        // With excitation switched off by the bounds the MLE is N / ΣT.
        let mut cfg = FitConfig::default();
        cfg.bounds.alpha = Range::new(0.0, 0.0);
        let r = fit_all(&c, &ShapeConfig::default(), &cfg);
        let f = r.labels[0].fit().unwrap();
        assert!(f.status.converged(), "{:?}", f.status);
        assert!((f.params.mu0 - n / 100.0).abs() <= 1e-3 * n / 100.0, "{} vs {}", f.params.mu0, n / 100.0);
        assert!(f.loglik >= f.initial_loglik);

        // Free excitation can only do at least as well as the Poisson MLE.
        let free = fit_all(&c, &ShapeConfig::default(), &FitConfig::default());
        let g = free.labels[0].fit().unwrap();
        assert!(g.loglik >= f.loglik - 1e-6);
        assert!(Bounds::default().contains(&g.params));
    }

    #[test]
    fn fitted_value_matches_likelihood_module() {
        let c = poisson_collection(&["a", "b"], 1.0, &[20.0, 30.0], 3);
        let r = fit_all(&c, &ShapeConfig::default(), &FitConfig::default());
        let params = r.params(&Bounds::default());
        for e in 0..2 {
            let f = r.labels[e].fit().unwrap();
            let direct = loglik_total(e, &params, &c.sessions).unwrap().value;
            assert!((f.loglik - direct).abs() < 1e-8 * direct.abs());
            assert!(Bounds::default().contains(&f.params));
            assert_eq!(f.gamma_profile.len(), GAMMA_PROFILE_MULTIPLIERS.len());
            let at_opt = f.gamma_profile.iter().find(|p| p.gamma == f.params.gamma).unwrap();
            assert!((at_opt.loglik - f.loglik).abs() < 1e-8 * f.loglik.abs());
        }
    }

    #[test]
    fn missing_label_is_recorded_not_fatal() {
        let mut c = poisson_collection(&["a", "b"], 1.0, &[20.0], 5);
        c.sessions[0].chat[1].clear();
        let r = fit_all(&c, &ShapeConfig::default(), &FitConfig::default());
        assert!(r.labels[0].fit().is_some());
        assert!(matches!(&r.labels[1], LabelOutcome::Failed { target, .. } if target == "b"));
        assert_eq!(r.n_failed(), 1);
        let p = r.params(&Bounds::default());
        assert_eq!(p.per_emotion[1].mu0, 0.0);
        p.validate().unwrap();
    }

    #[test]
    fn jitter_respects_bounds() {
        let b = Bounds::default();
        let (lo, hi) = b.vectors(2);
        let x0 = initial_params("a", 0, 2, 10, 1.0, &b).to_vector();
        for s in 1..20 {
            let x = jittered(&x0, &lo, &hi, 9, 0, s);
            for i in 0..x.len() {
                assert!(x[i] >= lo[i] && x[i] <= hi[i]);
                if x0[i] > 0.0 && x0[i] * 2.0 < hi[i] && x0[i] * 0.5 > lo[i] {
                    let ratio = x[i] / x0[i];
                    assert!((0.5..=2.0).contains(&ratio));
                }
            }
        }
    }

    #[test]
    fn replica_membership() {
        let a = replica_members(4, 0, 397, BootstrapConfig::default().subset_size(397));
        assert_eq!(a.len(), 238);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a, replica_members(4, 0, 397, 238));
        assert_ne!(a, replica_members(4, 1, 397, 238));
        assert_eq!(BootstrapConfig { n_replicas: 1, frac: 0.01 }.subset_size(10), 1);
    }

    #[test]
    fn single_full_replica_equals_full_fit() {
        let c = poisson_collection(&["a", "b"], 1.0, &[20.0, 15.0, 10.0], 8);
        let cfg = FitConfig::default();
        let rep = bootstrap_fit(&c, &ShapeConfig::default(), &cfg, &BootstrapConfig { n_replicas: 1, frac: 1.0 }).unwrap();
        for e in 0..2 {
            let m = rep.bootstrap.mean[e].as_ref().unwrap();
            let s = rep.bootstrap.std[e].as_ref().unwrap();
            let p = &rep.params.per_emotion[e];
            assert_eq!(m.mu0, p.mu0);
            assert_eq!(m.alpha, p.alpha);
            assert_eq!(s.mu0, 0.0);
            assert!(s.nu.iter().chain(&s.alpha).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let c = poisson_collection(&["a", "b"], 1.0, &[20.0, 15.0, 10.0, 12.0, 8.0], 21);
        let cfg = FitConfig {
            seed: 77,
            ..FitConfig::default()
        };
        let b = BootstrapConfig { n_replicas: 4, frac: 0.6 };
        let r1 = bootstrap_fit(&c, &ShapeConfig::default(), &cfg, &b).unwrap().to_json().unwrap();
        let r2 = bootstrap_fit(&c, &ShapeConfig::default(), &cfg, &b).unwrap().to_json().unwrap();
        assert_eq!(r1, r2);
        let back: FitReport = serde_json::from_str(&r1).unwrap();
        assert_eq!(back.bootstrap.replicas.len(), 4);
        assert!(back.bootstrap.replicas.iter().all(|r| r.sessions.len() == 3));
        // The report starts with a loadable params file.
        let p: HawkesParams = serde_json::from_str(&r1).unwrap();
        p.validate().unwrap();
    }

    #[test]
    fn replicas_without_label_events_skip_the_label() {
        let mut c = poisson_collection(&["a", "b"], 1.0, &[10.0, 10.0, 10.0, 10.0], 2);
        for s in &mut c.sessions[1..] {
            s.chat[1].clear();
        }
        let rep = bootstrap_fit(&c, &ShapeConfig::default(), &FitConfig::default(), &BootstrapConfig { n_replicas: 6, frac: 0.25 }).unwrap();
        let skipped: Vec<&Replica> = rep.bootstrap.replicas.iter().filter(|r| !r.sessions.contains(&0)).collect();
        assert!(!skipped.is_empty());
        for r in skipped {
            assert_eq!(r.skipped, vec!["b".to_string()]);
            assert!(r.per_emotion[1].is_none());
        }
        let n_b = rep.bootstrap.replicas.iter().filter(|r| r.per_emotion[1].is_some()).count();
        assert_eq!(rep.bootstrap.mean[1].as_ref().map_or(0, |m| m.n), n_b);
    }

    #[test]
    fn label_fit_ignores_other_labels_parameters() {
        // Fitting `a` on a corpus must not depend on anything but the events.
        let c = poisson_collection(&["a", "b"], 1.5, &[20.0, 15.0], 13);
        let prepared = prepare_sessions(&c, &ShapeConfig::default());
        let refs: Vec<&PreparedSession> = prepared.iter().collect();
        let cfg = FitConfig::default();
        let f1 = fit_emotion(0, &c.emotion_set, &refs, &cfg).unwrap();
        let f2 = fit_all_prepared(&c.emotion_set, &ShapeConfig::default(), &refs, &cfg);
        assert_eq!(&f1, f2.labels[0].fit().unwrap());
    }
}
