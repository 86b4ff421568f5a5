//! Exact log-likelihood of one target label, its analytic gradient, and the
//! O(N) recursion for the excitation sums.
//!
//! For target `e` on a session of length `T`,
//!
//! ```text
//! log L^e = Σ_i log λ^e(t_i^e) − μ0 T − Σ_f ν^f M^f_1
//!           + Σ_f α^f Σ_j (exp(−(T − t_j^f)/γ) − 1)
//! ```
//!
//! Because every source shares the decay time `γ` of the target, the
//! excitation felt at `t` from label `f` is `α^f/γ · A^f(t)` with
//! `A^f(t) = Σ_{t_j^f < t} exp(−(t − t_j^f)/γ)`, and `A^f` can be carried
//! forward event by event: `A(t') = exp(−(t' − t)/γ) A(t)` plus one per
//! event crossed.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::VideoSession;
use crate::intensity::{BackgroundCache, EmotionParams, HawkesParams};
use crate::kernels::ShapeConfig;

/// Value substituted for `log L` when the intensity vanishes at an event, so
/// that line searches see a finite, very poor objective.
pub const DEGENERATE_LOGLIK: f64 = -1e100;

/// A session with its chat events merged into one time-ordered stream and
/// the parameter-free background quantities precomputed.
#[derive(Debug, Clone)]
pub struct PreparedSession {
    pub id: String,
    pub duration: f64,
    n_labels: usize,
    times: Vec<f64>,
    labels: Vec<usize>,
    counts: Vec<usize>,
    cache: BackgroundCache,
}

impl PreparedSession {
    pub fn new(session: &VideoSession, shape: &ShapeConfig) -> Self {
        let mut merged: Vec<(f64, usize)> = session
            .chat
            .iter()
            .enumerate()
            .flat_map(|(f, l)| l.iter().map(move |&t| (t, f)))
            .collect();
        merged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (times, labels): (Vec<f64>, Vec<usize>) = merged.into_iter().unzip();
        let cache = BackgroundCache::new(session, shape, &times);
        PreparedSession {
            id: session.id.clone(),
            duration: session.duration,
            n_labels: session.n_labels(),
            counts: session.chat.iter().map(Vec::len).collect(),
            times,
            labels,
            cache,
        }
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn count(&self, label: usize) -> usize {
        self.counts[label]
    }

    pub fn n_events(&self) -> usize {
        self.times.len()
    }

    pub fn cache(&self) -> &BackgroundCache {
        &self.cache
    }

    /// Merged event times and their labels.
    pub fn events(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.times.iter().copied().zip(self.labels.iter().copied())
    }

    /// Walks the merged stream with decay time `gamma`, calling
    /// `visit(index, a, b)` at every event of label `target` with the state
    /// just before the event: `a[f] = Σ_{t_j^f < t} e^{−(t−t_j^f)/γ}` and
    /// `b[f] = Σ_{t_j^f < t} (t − t_j^f) e^{−(t−t_j^f)/γ}`. Events sharing a
    /// timestamp do not see each other. Returns the state at `T` with every
    /// event included.
    pub fn walk<F>(&self, target: usize, gamma: f64, mut visit: F) -> (Vec<f64>, Vec<f64>)
    where
        F: FnMut(usize, &[f64], &[f64]),
    {
        let n = self.n_labels;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut last = 0.0;
        let mut i = 0;
        let len = self.times.len();
        while i < len {
            let t = self.times[i];
            decay(&mut a, &mut b, t - last, gamma);
            last = t;
            let mut j = i;
            while j < len && self.times[j] == t {
                if self.labels[j] == target {
                    visit(j, &a, &b);
                }
                j += 1;
            }
            for k in i..j {
                a[self.labels[k]] += 1.0;
            }
            i = j;
        }
        decay(&mut a, &mut b, self.duration - last, gamma);
        (a, b)
    }
}

#[inline]
fn decay(a: &mut [f64], b: &mut [f64], dt: f64, gamma: f64) {
    if dt == 0.0 {
        return;
    }
    let k = (-dt / gamma).exp();
    for (ai, bi) in a.iter_mut().zip(b.iter_mut()) {
        *bi = k * (*bi + dt * *ai);
        *ai *= k;
    }
}

/// Evaluation path for the excitation sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EndoMethod {
    #[default]
    Recursive,
    /// Direct O(N²) double sum; kept as a reference for the recursion.
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionLogLik {
    pub value: f64,
    /// Index (in the merged stream) of the first target event at which the
    /// intensity was not positive; `value` is then [`DEGENERATE_LOGLIK`].
    pub degenerate_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogLikReport {
    pub value: f64,
    pub per_session: Vec<f64>,
    pub n_events: usize,
    /// `value / n_events`; absent when the target has no events.
    pub normalized: Option<f64>,
    pub degenerate: bool,
}

fn check_lambda(lambda: f64, index: usize) -> Result<bool> {
    if lambda.is_nan() || lambda.is_infinite() {
        return Err(Error::NonFinite {
            index,
            message: format!("intensity evaluated to {lambda}"),
        });
    }
    Ok(lambda > 0.0)
}

/// Log-likelihood of target `e` on one prepared session.
pub fn loglik_prepared(
    e: usize,
    p: &EmotionParams,
    s: &PreparedSession,
    method: EndoMethod,
) -> Result<SessionLogLik> {
    let g = p.gamma;
    let mut sum_log = 0.0;
    let mut degenerate_at = None;
    let mut failure = None;
    let exo = |i: usize| -> f64 {
        p.mu0
            + s.cache
                .s_at(i)
                .iter()
                .zip(&p.nu)
                .map(|(sf, nu)| sf * nu)
                .sum::<f64>()
    };

    let endo_comp = match method {
        EndoMethod::Recursive => {
            let (a_end, _) = s.walk(e, g, |i, a, _| {
                if failure.is_some() || degenerate_at.is_some() {
                    return;
                }
                let endo: f64 = a.iter().zip(&p.alpha).map(|(a, al)| al * a).sum::<f64>() / g;
                let lambda = exo(i) + endo;
                match check_lambda(lambda, i) {
                    Ok(true) => sum_log += lambda.ln(),
                    Ok(false) => degenerate_at = Some(i),
                    Err(err) => failure = Some(err),
                }
            });
            a_end
                .iter()
                .zip(&s.counts)
                .zip(&p.alpha)
                .map(|((a, &n), al)| al * (a - n as f64))
                .sum::<f64>()
        }
        EndoMethod::Naive => {
            for (i, (t, label)) in s.events().enumerate() {
                if label != e {
                    continue;
                }
                let mut endo = 0.0;
                for (tj, f) in s.events() {
                    if tj < t {
                        endo += p.alpha[f] / g * (-(t - tj) / g).exp();
                    }
                }
                let lambda = exo(i) + endo;
                match check_lambda(lambda, i)? {
                    true => sum_log += lambda.ln(),
                    false => {
                        degenerate_at = Some(i);
                        break;
                    }
                }
            }
            s.events()
                .map(|(tj, f)| p.alpha[f] * (-(s.duration - tj) / g).exp_m1())
                .sum::<f64>()
        }
    };
    if let Some(err) = failure {
        return Err(err);
    }
    if degenerate_at.is_some() {
        return Ok(SessionLogLik {
            value: DEGENERATE_LOGLIK,
            degenerate_at,
        });
    }
    let video: f64 = s.cache.m1.iter().zip(&p.nu).map(|(m, nu)| m * nu).sum();
    let value = sum_log - p.mu0 * s.duration - video + endo_comp;
    if !value.is_finite() {
        return Err(Error::NonFinite {
            index: s.n_events(),
            message: format!("log-likelihood evaluated to {value}"),
        });
    }
    Ok(SessionLogLik {
        value,
        degenerate_at: None,
    })
}

/// Log-likelihood of target `e` on a single raw session.
pub fn loglik_session(e: usize, params: &HawkesParams, session: &VideoSession) -> Result<SessionLogLik> {
    let prepared = PreparedSession::new(session, &params.shape);
    loglik_prepared(e, &params.per_emotion[e], &prepared, EndoMethod::Recursive)
}

/// Corpus log-likelihood of target `e`: sessions are evaluated concurrently
/// and summed in session order.
pub fn loglik_total_prepared(
    e: usize,
    p: &EmotionParams,
    sessions: &[&PreparedSession],
    method: EndoMethod,
) -> Result<LogLikReport> {
    if sessions.is_empty() {
        return Err(Error::InvalidInput("log-likelihood needs at least one session".into()));
    }
    let per: Vec<SessionLogLik> = sessions
        .par_iter()
        .map(|s| loglik_prepared(e, p, s, method))
        .collect::<Result<_>>()?;
    let degenerate = per.iter().any(|v| v.degenerate_at.is_some());
    let per_session: Vec<f64> = per.iter().map(|v| v.value).collect();
    let value = per_session.iter().sum::<f64>();
    let n_events = sessions.iter().map(|s| s.count(e)).sum::<usize>();
    Ok(LogLikReport {
        value,
        per_session,
        n_events,
        normalized: (n_events > 0).then(|| value / n_events as f64),
        degenerate,
    })
}

pub fn loglik_total(e: usize, params: &HawkesParams, sessions: &[VideoSession]) -> Result<LogLikReport> {
    let prepared: Vec<PreparedSession> = sessions
        .iter()
        .map(|s| PreparedSession::new(s, &params.shape))
        .collect();
    let refs: Vec<&PreparedSession> = prepared.iter().collect();
    loglik_total_prepared(e, &params.per_emotion[e], &refs, EndoMethod::Recursive)
}

/// Excitation intensity `Σ_f α^f A^f(t_i)/γ` at every event of target `e`,
/// via the recursion.
pub fn endo_sum_recursive(e: usize, p: &EmotionParams, s: &PreparedSession) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.count(e));
    s.walk(e, p.gamma, |_, a, _| {
        out.push(a.iter().zip(&p.alpha).map(|(a, al)| al * a).sum::<f64>() / p.gamma)
    });
    out
}

/// Same quantity by direct summation over all earlier events.
pub fn endo_sum_naive(e: usize, p: &EmotionParams, s: &PreparedSession) -> Vec<f64> {
    s.events()
        .filter(|&(_, l)| l == e)
        .map(|(t, _)| {
            s.events()
                .filter(|&(tj, _)| tj < t)
                .map(|(tj, f)| p.alpha[f] / p.gamma * (-(t - tj) / p.gamma).exp())
                .sum()
        })
        .collect()
}

/// Log-likelihood and its gradient with respect to `[mu0, nu.., alpha.., gamma]`
/// summed over `sessions` in order. A degenerate session makes the value
/// [`DEGENERATE_LOGLIK`] and the gradient zero.
pub fn loglik_and_grad(
    e: usize,
    p: &EmotionParams,
    sessions: &[&PreparedSession],
) -> Result<(f64, Vec<f64>, bool)> {
    let n = p.n_labels();
    let g = p.gamma;
    let mut grad = vec![0.0; 2 * n + 2];
    let mut total = 0.0;
    let (i_nu, i_alpha, i_gamma) = (1, 1 + n, 1 + 2 * n);
    for s in sessions {
        let mut sum_log = 0.0;
        let mut degenerate = false;
        let mut failure = None;
        let mut g_local = vec![0.0; 2 * n + 2];
        let (a_end, b_end) = s.walk(e, g, |i, a, b| {
            if degenerate || failure.is_some() {
                return;
            }
            let sf = s.cache.s_at(i);
            let video: f64 = sf.iter().zip(&p.nu).map(|(x, nu)| x * nu).sum();
            let mut endo = 0.0;
            let mut d_gamma = 0.0;
            for f in 0..n {
                endo += p.alpha[f] * a[f];
                d_gamma += p.alpha[f] * (b[f] / g - a[f]);
            }
            endo /= g;
            d_gamma /= g * g;
            let lambda = p.mu0 + video + endo;
            match check_lambda(lambda, i) {
                Ok(true) => {}
                Ok(false) => {
                    degenerate = true;
                    return;
                }
                Err(err) => {
                    failure = Some(err);
                    return;
                }
            }
            sum_log += lambda.ln();
            let w = 1.0 / lambda;
            g_local[0] += w;
            for f in 0..n {
                g_local[i_nu + f] += sf[f] * w;
                g_local[i_alpha + f] += a[f] / g * w;
            }
            g_local[i_gamma] += d_gamma * w;
        });
        if let Some(err) = failure {
            return Err(err);
        }
        if degenerate {
            return Ok((DEGENERATE_LOGLIK, vec![0.0; 2 * n + 2], true));
        }
        let mut value = sum_log - p.mu0 * s.duration;
        g_local[0] -= s.duration;
        for f in 0..n {
            let m1 = s.cache.m1[f];
            value -= p.nu[f] * m1;
            g_local[i_nu + f] -= m1;
            let tail = a_end[f] - s.counts[f] as f64;
            value += p.alpha[f] * tail;
            g_local[i_alpha + f] += tail;
            g_local[i_gamma] += p.alpha[f] * b_end[f] / (g * g);
        }
        total += value;
        for (acc, v) in grad.iter_mut().zip(&g_local) {
            *acc += v;
        }
    }
    if !total.is_finite() || grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            index: 0,
            message: format!("log-likelihood {total} or gradient not finite"),
        });
    }
    Ok((total, grad, false))
}

/// Analytic gradient of the corpus log-likelihood of target `e`.
pub fn grad_loglik(e: usize, params: &HawkesParams, sessions: &[VideoSession]) -> Result<Vec<f64>> {
    let prepared: Vec<PreparedSession> = sessions
        .iter()
        .map(|s| PreparedSession::new(s, &params.shape))
        .collect();
    let refs: Vec<&PreparedSession> = prepared.iter().collect();
    Ok(loglik_and_grad(e, &params.per_emotion[e], &refs)?.1)
}
