//! Post-fit interpretation: how much of each event's intensity came from
//! outside (baseline plus video) versus from earlier chat events, the
//! baseline/video split of the exogenous part, branching-matrix stability,
//! and time-rescaling residuals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::{SessionCollection, VideoSession};
use crate::intensity::{compensator, endo_rate, m1, video_rate, HawkesParams};
use crate::likelihood::PreparedSession;
use crate::stats::{ks_test_exp1, KsResult};

/// Ratios at one event, evaluated with the left-limit intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRatios {
    pub time: f64,
    /// `μ(t)/λ(t)`.
    pub r_exo: f64,
    /// `endo(t)/λ(t)`.
    pub r_endo: f64,
    /// `μ0/μ(t)`; `None` when the exogenous rate is zero.
    pub r0: Option<f64>,
    /// `μ1(t)/μ(t)`.
    pub r1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceRow {
    pub session: String,
    pub label: String,
    pub n_events: usize,
    pub r_exo_mean: Option<f64>,
    pub r_endo_mean: Option<f64>,
    pub r0_mean: Option<f64>,
    pub r1_mean: Option<f64>,
}

/// Per-session, per-label ratio averages; optionally the raw per-event values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceReport {
    pub rows: Vec<InfluenceRow>,
    /// `events[k][e]` holds the ratios of label `e` in session `k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<Vec<Vec<EventRatios>>>>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Per-event ratios of label `e` in one session.
pub fn event_ratios(params: &HawkesParams, prepared: &PreparedSession, e: usize) -> Result<Vec<EventRatios>> {
    let p = &params.per_emotion[e];
    let times: Vec<f64> = prepared.events().map(|(t, _)| t).collect();
    let mut out = Vec::with_capacity(prepared.count(e));
    let mut failure = None;
    prepared.walk(e, p.gamma, |i, a, _| {
        if failure.is_some() {
            return;
        }
        let video: f64 = prepared
            .cache()
            .s_at(i)
            .iter()
            .zip(&p.nu)
            .map(|(s, nu)| s * nu)
            .sum();
        let endo = a.iter().zip(&p.alpha).map(|(a, al)| a * al).sum::<f64>() / p.gamma;
        let exo = p.mu0 + video;
        let lambda = exo + endo;
        if !(lambda > 0.0) {
            failure = Some(Error::Numerical(format!(
                "zero intensity for {} at t={} in session {:?}",
                p.target, times[i], prepared.id
            )));
            return;
        }
        let (r0, r1) = if exo > 0.0 {
            (Some(p.mu0 / exo), Some(video / exo))
        } else {
            (None, None)
        };
        out.push(EventRatios {
            time: times[i],
            r_exo: exo / lambda,
            r_endo: endo / lambda,
            r0,
            r1,
        });
    });
    match failure {
        Some(err) => Err(err),
        None => Ok(out),
    }
}

fn check_labels(params: &HawkesParams, collection: &SessionCollection) -> Result<()> {
    if params.emotions != collection.emotion_set {
        return Err(Error::EmotionSetMismatch(format!(
            "params use {:?}, events use {:?}",
            params.emotions.labels(),
            collection.emotion_set.labels()
        )));
    }
    Ok(())
}

/// Averages of `R_exo`, `R_endo`, `R_0`, `R_1` over the event times of each
/// label in each session. `R_0`/`R_1` averages skip events whose exogenous
/// rate is zero.
pub fn influence_decomposition(
    params: &HawkesParams,
    collection: &SessionCollection,
    keep_events: bool,
) -> Result<InfluenceReport> {
    check_labels(params, collection)?;
    let n = params.emotions.len();
    let mut rows = Vec::new();
    let mut events = Vec::new();
    for session in &collection.sessions {
        let prepared = PreparedSession::new(session, &params.shape);
        let mut per_label = Vec::with_capacity(n);
        for e in 0..n {
            let ratios = event_ratios(params, &prepared, e)?;
            rows.push(InfluenceRow {
                session: session.id.clone(),
                label: params.emotions.label(e).to_string(),
                n_events: ratios.len(),
                r_exo_mean: mean(ratios.iter().map(|r| r.r_exo)),
                r_endo_mean: mean(ratios.iter().map(|r| r.r_endo)),
                r0_mean: mean(ratios.iter().filter_map(|r| r.r0)),
                r1_mean: mean(ratios.iter().filter_map(|r| r.r1)),
            });
            per_label.push(ratios);
        }
        events.push(per_label);
    }
    Ok(InfluenceReport {
        rows,
        events: keep_events.then_some(events),
    })
}

/// Spontaneous-vs-video split of label `e` in one session: per-event `R_0`
/// and its average. Fails when both `μ0` and `μ1(t)` vanish at an event.
pub fn spontaneous_ratio(params: &HawkesParams, session: &VideoSession, e: usize) -> Result<(Vec<f64>, Option<f64>)> {
    let p = &params.per_emotion[e];
    let mut r0 = Vec::with_capacity(session.count(e));
    for &t in &session.chat[e] {
        let video = video_rate(t, e, params, session);
        let exo = p.mu0 + video;
        if !(exo > 0.0) {
            return Err(Error::Numerical(format!(
                "baseline and video rate both zero for {} at t={t}",
                p.target
            )));
        }
        r0.push(p.mu0 / exo);
    }
    let avg = mean(r0.iter().copied());
    Ok((r0, avg))
}

/// Ratios sampled on a uniform grid `0, step, 2 step, … < T` instead of at
/// event times.
pub fn influence_on_grid(params: &HawkesParams, session: &VideoSession, e: usize, step: f64) -> Result<Vec<EventRatios>> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput("grid step must be positive".into()));
    }
    let p = &params.per_emotion[e];
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * step;
        if t >= session.duration {
            break;
        }
        let video = video_rate(t, e, params, session);
        let exo = p.mu0 + video;
        let endo = endo_rate(t, e, params, session);
        let lambda = exo + endo;
        if lambda > 0.0 {
            out.push(EventRatios {
                time: t,
                r_exo: exo / lambda,
                r_endo: endo / lambda,
                r0: (exo > 0.0).then(|| p.mu0 / exo),
                r1: (exo > 0.0).then(|| video / exo),
            });
        }
        k += 1;
    }
    Ok(out)
}

/// Corpus-level endo/exo dominance for one label, computed two ways.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceSummary {
    pub label: String,
    pub n_events: usize,
    pub n_sessions: usize,
    /// Mean of `R_exo` over all events in the corpus.
    pub r_exo_event_mean: Option<f64>,
    pub r_endo_event_mean: Option<f64>,
    /// Mean over sessions of the per-session averages.
    pub r_endo_session_mean: Option<f64>,
    pub r0_event_mean: Option<f64>,
    /// `mean(R_endo) / mean(R_exo)` over events.
    pub endo_exo_ratio_of_means: Option<f64>,
    /// `mean(R_endo / R_exo)` over events.
    pub endo_exo_mean_of_ratios: Option<f64>,
}

pub fn influence_summary(report: &InfluenceReport, params: &HawkesParams) -> Result<Vec<InfluenceSummary>> {
    let events = report
        .events
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("influence summary needs per-event ratios".into()))?;
    Ok((0..params.emotions.len())
        .map(|e| {
            let all: Vec<&EventRatios> = events.iter().flat_map(|s| s[e].iter()).collect();
            let exo = mean(all.iter().map(|r| r.r_exo));
            let endo = mean(all.iter().map(|r| r.r_endo));
            let session_means: Vec<f64> = events
                .iter()
                .filter_map(|s| mean(s[e].iter().map(|r| r.r_endo)))
                .collect();
            InfluenceSummary {
                label: params.emotions.label(e).to_string(),
                n_events: all.len(),
                n_sessions: session_means.len(),
                r_exo_event_mean: exo,
                r_endo_event_mean: endo,
                r_endo_session_mean: mean(session_means.iter().copied()),
                r0_event_mean: mean(all.iter().filter_map(|r| r.r0)),
                endo_exo_ratio_of_means: match (endo, exo) {
                    (Some(n), Some(d)) if d > 0.0 => Some(n / d),
                    _ => None,
                },
                endo_exo_mean_of_ratios: mean(
                    all.iter().filter(|r| r.r_exo > 0.0).map(|r| r.r_endo / r.r_exo),
                ),
            }
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `session,label,r_exo_mean,r_endo_mean,r0_mean,r1_mean,n_events`; labels
/// with no events leave the ratio columns empty.
pub fn write_influence_csv<W: std::io::Write>(report: &InfluenceReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["session", "label", "r_exo_mean", "r_endo_mean", "r0_mean", "r1_mean", "n_events"])?;
    for r in &report.rows {
        w.write_record([
            r.session.clone(),
            r.label.clone(),
            opt(r.r_exo_mean),
            opt(r.r_endo_mean),
            opt(r.r0_mean),
            opt(r.r1_mean),
            r.n_events.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<influence output>", e))?;
    Ok(())
}

pub fn write_influence_summary_csv<W: std::io::Write>(rows: &[InfluenceSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label",
        "n_events",
        "n_sessions",
        "r_exo_event_mean",
        "r_endo_event_mean",
        "r_endo_session_mean",
        "r0_event_mean",
        "endo_exo_ratio_of_means",
        "endo_exo_mean_of_ratios",
    ])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.n_events.to_string(),
            r.n_sessions.to_string(),
            opt(r.r_exo_event_mean),
            opt(r.r_endo_event_mean),
            opt(r.r_endo_session_mean),
            opt(r.r0_event_mean),
            opt(r.endo_exo_ratio_of_means),
            opt(r.endo_exo_mean_of_ratios),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<influence output>", e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Branching matrix
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchingReport {
    pub alpha: Vec<Vec<f64>>,
    /// `Σ_e α^{e,f}`: expected direct offspring of any label per `f` event.
    pub column_sums: Vec<f64>,
    pub row_sums: Vec<f64>,
    pub spectral_radius: f64,
    pub subcritical: bool,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Spectral radius of a nonnegative square matrix by power iteration.
///
/// Iterates on `A + I`: its Perron root is `ρ(A) + 1` and it dominates every
/// other eigenvalue strictly in modulus, so the iteration cannot cycle on
/// periodic matrices. Stagnation (no progress on the change over a long
/// stretch) restarts from a perturbed vector.
pub fn power_iteration(a: &[Vec<f64>], tol: f64, max_iterations: usize) -> PowerIteration {
    let n = a.len();
    if a.iter().flatten().all(|&v| v == 0.0) {
        return PowerIteration {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut est = 0.0_f64;
    let mut best = f64::INFINITY;
    let mut since_progress = 0;
    for it in 1..=max_iterations {
        for i in 0..n {
            y[i] = x[i] + a[i].iter().zip(&x).map(|(aij, xj)| aij * xj).sum::<f64>();
        }
        // Rayleigh quotient and eigen-residual of the current unit vector.
        est = x.iter().zip(&y).map(|(p, q)| p * q).sum();
        let residual = x
            .iter()
            .zip(&y)
            .map(|(p, q)| (q - est * p).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol * est.abs().max(1.0) {
            return PowerIteration {
                value: (est - 1.0).max(0.0),
                iterations: it,
                converged: true,
            };
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if residual < 0.5 * best {
            best = residual;
            since_progress = 0;
        } else {
            since_progress += 1;
            if since_progress > 1000 {
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi += 1e-3 * (1.0 + i as f64) / n as f64;
                }
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.iter_mut().for_each(|v| *v /= norm);
                best = f64::INFINITY;
                since_progress = 0;
            }
        }
    }
    PowerIteration {
        value: (est - 1.0).max(0.0),
        iterations: max_iterations,
        converged: false,
    }
}

pub fn spectral_radius(alpha: &[Vec<f64>]) -> f64 {
    power_iteration(alpha, 1e-10, 10_000).value
}

pub fn branching_report(alpha: &[Vec<f64>]) -> Result<BranchingReport> {
    let n = alpha.len();
    if alpha.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("branching matrix must be square".into()));
    }
    if alpha.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(
            "branching matrix entries must be finite and nonnegative".into(),
        ));
    }
    let column_sums = (0..n).map(|f| alpha.iter().map(|r| r[f]).sum()).collect();
    let row_sums = alpha.iter().map(|r| r.iter().sum()).collect();
    let pi = power_iteration(alpha, 1e-10, 10_000);
    Ok(BranchingReport {
        alpha: alpha.to_vec(),
        column_sums,
        row_sums,
        spectral_radius: pi.value,
        subcritical: pi.value < 1.0,
        iterations: pi.iterations,
        converged: pi.converged,
    })
}

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub label: String,
    /// `Λ(0, t_i) − Λ(0, t_{i−1})` with `t_0 = 0`.
    pub residuals: Vec<f64>,
    /// Number of zero increments (simultaneous events).
    pub zero_gaps: usize,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
}

pub const MIN_RESIDUAL_EVENTS: usize = 10;

/// Compensator values `Λ^e(0, t_i)` at each event of label `e`.
pub fn compensator_at_events(params: &HawkesParams, session: &VideoSession, e: usize) -> Vec<f64> {
    let p = &params.per_emotion[e];
    let prepared = PreparedSession::new(session, &params.shape);
    let times: Vec<f64> = prepared.events().map(|(t, _)| t).collect();
    let mut out = Vec::with_capacity(session.count(e));
    prepared.walk(e, p.gamma, |i, a, _| {
        let t = times[i];
        let mut value = p.mu0 * t;
        for f in 0..p.n_labels() {
            if p.nu[f] != 0.0 {
                value += p.nu[f] * m1(&session.subtitles[f], t, &params.shape);
            }
            let before = session.chat[f].partition_point(|&tj| tj < t) as f64;
            value += p.alpha[f] * (before - a[f]);
        }
        out.push(value);
    });
    out
}

/// Time-rescaling residuals of label `e` and their KS test against Exp(1).
pub fn residual_diagnostics(params: &HawkesParams, session: &VideoSession, e: usize) -> Result<ResidualReport> {
    let n = session.count(e);
    if n < MIN_RESIDUAL_EVENTS {
        return Err(Error::InvalidInput(format!(
            "residual diagnostics need at least {MIN_RESIDUAL_EVENTS} events of {:?}, found {n}",
            params.emotions.label(e)
        )));
    }
    let comp = compensator_at_events(params, session, e);
    let mut residuals = Vec::with_capacity(n);
    let mut prev = 0.0;
    for c in comp {
        residuals.push((c - prev).max(0.0));
        prev = c;
    }
    let zero_gaps = residuals.iter().filter(|&&r| r == 0.0).count();
    let KsResult {
        statistic, p_value, ..
    } = ks_test_exp1(&residuals);
    Ok(ResidualReport {
        label: params.emotions.label(e).to_string(),
        residuals,
        zero_gaps,
        ks_statistic: statistic,
        ks_p_value: p_value,
    })
}

/// Residuals of every label of a session pooled; under the generating
/// model they are i.i.d. Exp(1).
pub fn pooled_residuals(params: &HawkesParams, session: &VideoSession) -> Vec<f64> {
    (0..params.emotions.len())
        .flat_map(|e| {
            let comp = compensator_at_events(params, session, e);
            let mut prev = 0.0;
            comp.into_iter()
                .map(move |c| {
                    let r = c - prev;
                    prev = c;
                    r
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Compensator at the end of the session, the expected event count of label `e`.
pub fn expected_count(params: &HawkesParams, session: &VideoSession, e: usize) -> f64 {
    compensator(e, params, session, session.duration)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::EmotionSet;
    use crate::intensity::{exo_rate, total_intensity, EmotionParams};
    use crate::kernels::ShapeConfig;
    use proptest::prelude::*;

    fn fixture() -> (HawkesParams, VideoSession) {
        let params = HawkesParams {
            emotions: EmotionSet::new(["a", "b"]).unwrap(),
            shape: ShapeConfig::default(),
            per_emotion: vec![
                EmotionParams {
                    target: "a".into(),
                    mu0: 0.4,
                    gamma: 0.7,
                    nu: vec![0.8, 0.3],
                    alpha: vec![0.5, 0.2],
                },
                EmotionParams {
                    target: "b".into(),
                    mu0: 0.2,
                    gamma: 1.3,
                    nu: vec![0.1, 0.6],
                    alpha: vec![0.3, 0.4],
                },
            ],
        };
        let session = VideoSession {
            id: "f".into(),
            duration: 6.0,
            chat: vec![
                vec![0.3, 0.9, 1.4, 1.4, 2.2, 3.7, 4.1, 5.5],
                vec![0.5, 1.4, 2.9, 3.0, 4.8],
            ],
            subtitles: vec![vec![0.1, 1.0, 1.05, 3.3], vec![2.0, 4.0]],
        };
        (params, session)
    }

    fn collection(session: VideoSession, params: &HawkesParams) -> SessionCollection {
        SessionCollection::new(params.emotions.clone(), vec![session]).unwrap()
    }

    #[test]
    fn ratio_identities() {
        let (params, session) = fixture();
        let r = influence_decomposition(&params, &collection(session.clone(), &params), true).unwrap();
        let events = r.events.as_ref().unwrap();
        for e in 0..2 {
            let ev = &events[0][e];
            assert_eq!(ev.len(), session.count(e));
            if e == 0 {
                // Nothing precedes the first event of the corpus.
                assert_eq!(ev[0].r_exo, 1.0);
                assert_eq!(ev[0].r_endo, 0.0);
            }
            for x in ev {
                assert!((x.r_exo + x.r_endo - 1.0).abs() <= 1e-15);
                assert!((x.r0.unwrap() + x.r1.unwrap() - 1.0).abs() <= 1e-15);
                assert!((0.0..=1.0).contains(&x.r_exo) && (0.0..=1.0).contains(&x.r0.unwrap()));
                // Cross-check against the direct intensity evaluation.
                let lam = total_intensity(x.time, e, &params, &session);
                let exo = exo_rate(x.time, e, &params, &session);
                assert!((x.r_exo - exo / lam).abs() < 1e-12);
            }
        }
        assert_eq!(r.rows.len(), 2);
    }

    #[test]
    fn no_excitation_means_no_endo_share() {
        let (mut params, session) = fixture();
        for p in &mut params.per_emotion {
            p.alpha = vec![0.0, 0.0];
        }
        let r = influence_decomposition(&params, &collection(session, &params), false).unwrap();
        for row in &r.rows {
            assert_eq!(row.r_endo_mean, Some(0.0));
            assert_eq!(row.r_exo_mean, Some(1.0));
        }
    }

    #[test]
    fn spontaneous_ratio_cases() {
        let (mut params, mut session) = fixture();
        let no_subs = VideoSession {
            subtitles: vec![vec![], vec![]],
            ..session.clone()
        };
        let (r0, avg) = spontaneous_ratio(&params, &no_subs, 0).unwrap();
        assert!(r0.iter().all(|&v| v == 1.0));
        assert_eq!(avg, Some(1.0));

        params.per_emotion[0].mu0 = 0.0;
        let (r0, _) = spontaneous_ratio(&params, &session, 0).unwrap();
        assert!(r0.iter().all(|&v| v == 0.0));
        assert!(spontaneous_ratio(&params, &no_subs, 0).is_err());

        // μ0 equal to the video rate at an event gives exactly one half.
        params.per_emotion[0].mu0 = 0.4;
        let t = session.chat[0][2];
        let v = video_rate(t, 0, &params, &session);
        params.per_emotion[0].mu0 = v;
        session.chat[0] = vec![t];
        let (r0, _) = spontaneous_ratio(&params, &session, 0).unwrap();
        assert_eq!(r0, vec![0.5]);
    }

    #[test]
    fn grid_mode() {
        let (params, session) = fixture();
        let g = influence_on_grid(&params, &session, 1, 0.25).unwrap();
        assert_eq!(g.len(), 24);
        assert_eq!(g[0].r_exo, 1.0);
        assert!(influence_on_grid(&params, &session, 1, 0.0).is_err());
    }

    #[test]
    fn emotion_mismatch_rejected() {
        let (params, session) = fixture();
        let other = SessionCollection::new(EmotionSet::new(["b", "a"]).unwrap(), vec![session]).unwrap();
        assert!(matches!(
            influence_decomposition(&params, &other, false),
            Err(Error::EmotionSetMismatch(_))
        ));
    }

    #[test]
    fn summary_reports_both_dominance_measures() {
        let (params, session) = fixture();
        let r = influence_decomposition(&params, &collection(session, &params), true).unwrap();
        let s = influence_summary(&r, &params).unwrap();
        assert_eq!(s.len(), 2);
        let a = &s[0];
        let endo = a.r_endo_event_mean.unwrap();
        let exo = a.r_exo_event_mean.unwrap();
        assert!((endo + exo - 1.0).abs() < 1e-12);
        assert!((a.endo_exo_ratio_of_means.unwrap() - endo / exo).abs() < 1e-12);
        assert!(a.endo_exo_mean_of_ratios.unwrap() >= 0.0);
    }

    #[test]
    fn spectral_radius_fixtures() {
        assert!((spectral_radius(&[vec![0.5, 0.0], vec![0.0, 0.3]]) - 0.5).abs() < 1e-8);
        assert!((spectral_radius(&[vec![0.4, 0.2], vec![0.3, 0.5]]) - 0.7).abs() < 1e-8);
        assert_eq!(spectral_radius(&vec![vec![0.0; 3]; 3]), 0.0);
        // Periodic matrix: eigenvalues ±0.9.
        assert!((spectral_radius(&[vec![0.0, 0.9], vec![0.9, 0.0]]) - 0.9).abs() < 1e-8);
    }

    #[test]
    fn branching_report_checks() {
        let r = branching_report(&[vec![0.4, 0.2], vec![0.3, 0.5]]).unwrap();
        assert_eq!(r.column_sums, vec![0.7, 0.7]);
        assert!(r.subcritical && r.converged);
        let r = branching_report(&[vec![1.2]]).unwrap();
        assert!(!r.subcritical);
        assert!(branching_report(&[vec![-0.1]]).is_err());
        assert!(branching_report(&[vec![0.1, 0.2]]).is_err());
    }

    #[test]
    fn residuals_need_enough_events_and_tolerate_ties() {
        let (params, session) = fixture();
        assert!(residual_diagnostics(&params, &session, 1).is_err());
        let mut s = session.clone();
        s.chat[0] = (0..12).map(|i| 0.4 * i as f64 + 0.1).collect();
        let dup = s.chat[0][4];
        s.chat[0].insert(5, dup);
        let r = residual_diagnostics(&params, &s, 0).unwrap();
        assert_eq!(r.residuals.len(), 13);
        assert_eq!(r.zero_gaps, 1);
        assert!(r.ks_p_value.is_finite());
        // Increments sum to the compensator at the last event.
        let total: f64 = r.residuals.iter().sum();
        let direct = compensator(0, &params, &s, *s.chat[0].last().unwrap());
        assert!((total - direct).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn power_iteration_bounded_by_row_and_column_sums(m in prop::collection::vec(0.0f64..1.0, 9)) {
            let a: Vec<Vec<f64>> = m.chunks(3).map(|r| r.to_vec()).collect();
            let r = branching_report(&a).unwrap();
            let max_col = r.column_sums.iter().cloned().fold(0.0, f64::max);
            let max_row = r.row_sums.iter().cloned().fold(0.0, f64::max);
            prop_assert!(r.spectral_radius >= 0.0);
            prop_assert!(r.spectral_radius <= max_col + 1e-9);
            prop_assert!(r.spectral_radius <= max_row + 1e-9);
        }

        #[test]
        fn endo_share_grows_with_alpha(scale in 1.0f64..5.0) {
            let (params, session) = fixture();
            let mut scaled = params.clone();
            for p in &mut scaled.per_emotion {
                for a in &mut p.alpha {
                    *a *= scale;
                }
            }
            let c = collection(session, &params);
            let base = influence_decomposition(&params, &c, false).unwrap();
            let more = influence_decomposition(&scaled, &c, false).unwrap();
            for (x, y) in base.rows.iter().zip(&more.rows) {
                prop_assert!(y.r_endo_mean.unwrap() >= x.r_endo_mean.unwrap() - 1e-15);
            }
        }
    }
}
