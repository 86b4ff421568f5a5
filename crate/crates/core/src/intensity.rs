//! Exogenous background, conditional intensity and compensator.
//!
//! Every sum over history uses strict inequality: an event (or subtitle) at
//! time `t` does not contribute to the intensity at `t`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EmotionSet, VideoSession};
use crate::kernels::{exp_kernel, ExpKernelParams, ShapeConfig};

/// Parameters of the intensity of one target label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionParams {
    pub target: String,
    /// Spontaneous baseline rate (events/min).
    pub mu0: f64,
    /// Decay time of the excitation kernel (min), shared by all sources.
    pub gamma: f64,
    /// Weight of the exogenous shape of each source label.
    pub nu: Vec<f64>,
    /// Branching weight from each source label's chat events.
    pub alpha: Vec<f64>,
}

impl EmotionParams {
    pub fn n_labels(&self) -> usize {
        self.nu.len()
    }

    pub fn kernel(&self, source: usize) -> ExpKernelParams {
        ExpKernelParams {
            alpha: self.alpha[source],
            gamma: self.gamma,
        }
    }

    /// Flat parameter vector `[mu0, nu.., alpha.., gamma]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.n_labels() + 2);
        v.push(self.mu0);
        v.extend_from_slice(&self.nu);
        v.extend_from_slice(&self.alpha);
        v.push(self.gamma);
        v
    }

    pub fn from_vector(target: &str, v: &[f64]) -> Self {
        let n = (v.len() - 2) / 2;
        EmotionParams {
            target: target.to_string(),
            mu0: v[0],
            nu: v[1..1 + n].to_vec(),
            alpha: v[1 + n..1 + 2 * n].to_vec(),
            gamma: v[1 + 2 * n],
        }
    }
}

/// Full parameter set; also the on-disk params file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    pub emotions: EmotionSet,
    pub shape: ShapeConfig,
    pub per_emotion: Vec<EmotionParams>,
}

impl HawkesParams {
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        let n = self.emotions.len();
        if self.per_emotion.len() != n {
            return Err(Error::InvalidInput(format!(
                "expected {n} per-emotion entries, found {}",
                self.per_emotion.len()
            )));
        }
        for (e, p) in self.per_emotion.iter().enumerate() {
            if p.target != self.emotions.label(e) {
                return Err(Error::InvalidInput(format!(
                    "entry {e} targets {:?}, expected {:?}",
                    p.target,
                    self.emotions.label(e)
                )));
            }
            if p.nu.len() != n || p.alpha.len() != n {
                return Err(Error::InvalidInput(format!(
                    "{}: nu and alpha must have {n} entries",
                    p.target
                )));
            }
            let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
            if !finite_nonneg(p.mu0)
                || !(p.gamma > 0.0 && p.gamma.is_finite())
                || !p.nu.iter().chain(&p.alpha).all(|&x| finite_nonneg(x))
            {
                return Err(Error::InvalidInput(format!(
                    "{}: parameters must be nonnegative with gamma > 0",
                    p.target
                )));
            }
        }
        Ok(())
    }

    /// `alpha[e][f]`: expected direct offspring of label `e` per `f` event.
    pub fn alpha_matrix(&self) -> Vec<Vec<f64>> {
        self.per_emotion.iter().map(|p| p.alpha.clone()).collect()
    }

    pub fn nu_matrix(&self) -> Vec<Vec<f64>> {
        self.per_emotion.iter().map(|p| p.nu.clone()).collect()
    }

    pub fn n_parameters(&self) -> usize {
        self.per_emotion.iter().map(|p| 2 * p.n_labels() + 2).sum()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let params: HawkesParams = serde_json::from_str(&text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// `S^f(t) = Σ_{τ_j < t} s(t − τ_j)` for sorted `subtitle_times`.
pub fn background_s(t: f64, subtitle_times: &[f64], shape: &ShapeConfig) -> f64 {
    let end = subtitle_times.partition_point(|&tau| tau < t);
    subtitle_times[..end].iter().map(|&tau| shape.value(t - tau)).sum()
}

/// `M^f_1(T) = ∫_0^T S^f(s) ds`, summed term by term from the shape's
/// cumulative mass.
pub fn m1(subtitle_times: &[f64], upto: f64, shape: &ShapeConfig) -> f64 {
    let end = subtitle_times.partition_point(|&tau| tau < upto);
    subtitle_times[..end]
        .iter()
        .map(|&tau| shape.cumulative(upto - tau))
        .sum()
}

/// Time-varying part of the exogenous rate, `Σ_f ν^{e,f} S^f(t)`.
pub fn video_rate(t: f64, e: usize, params: &HawkesParams, session: &VideoSession) -> f64 {
    let p = &params.per_emotion[e];
    session
        .subtitles
        .iter()
        .zip(&p.nu)
        .filter(|(_, &nu)| nu != 0.0)
        .map(|(subs, &nu)| nu * background_s(t, subs, &params.shape))
        .sum()
}

/// `μ^e(t) = μ0^e + Σ_f ν^{e,f} S^f(t)`.
pub fn exo_rate(t: f64, e: usize, params: &HawkesParams, session: &VideoSession) -> f64 {
    params.per_emotion[e].mu0 + video_rate(t, e, params, session)
}

/// Excitation from chat events strictly before `t`.
pub fn endo_rate(t: f64, e: usize, params: &HawkesParams, session: &VideoSession) -> f64 {
    let p = &params.per_emotion[e];
    session
        .chat
        .iter()
        .enumerate()
        .map(|(f, times)| {
            let k = p.kernel(f);
            let end = times.partition_point(|&tj| tj < t);
            times[..end].iter().map(|&tj| exp_kernel(t - tj, k)).sum::<f64>()
        })
        .sum()
}

/// Conditional intensity `λ^e(t)` given the chat history before `t`.
pub fn total_intensity(t: f64, e: usize, params: &HawkesParams, session: &VideoSession) -> f64 {
    exo_rate(t, e, params, session) + endo_rate(t, e, params, session)
}

/// `Λ^e(0, t) = μ0 t + Σ_f ν M^f_1(t) + Σ_f Σ_{t_j < t} α (1 − e^{−(t − t_j)/γ})`.
pub fn compensator(e: usize, params: &HawkesParams, session: &VideoSession, t: f64) -> f64 {
    let p = &params.per_emotion[e];
    let base = p.mu0 * t;
    let video: f64 = session
        .subtitles
        .iter()
        .zip(&p.nu)
        .map(|(subs, &nu)| nu * m1(subs, t, &params.shape))
        .sum();
    let endo: f64 = session
        .chat
        .iter()
        .enumerate()
        .map(|(f, times)| {
            let end = times.partition_point(|&tj| tj < t);
            -p.alpha[f]
                * times[..end]
                    .iter()
                    .map(|&tj| (-(t - tj) / p.gamma).exp_m1())
                    .sum::<f64>()
        })
        .sum();
    base + video + endo
}

/// Background quantities that do not depend on fitted parameters: `S^f` at a
/// fixed list of query times and `M^f_1` over the whole session. The fitter
/// only rescales these by `ν`, so they are computed once per session.
#[derive(Debug, Clone)]
pub struct BackgroundCache {
    n_labels: usize,
    /// `m1[f]` over `[0, T]`.
    pub m1: Vec<f64>,
    s: Vec<f64>,
}

impl BackgroundCache {
    pub fn new(session: &VideoSession, shape: &ShapeConfig, query_times: &[f64]) -> Self {
        let n = session.n_labels();
        let m1 = session
            .subtitles
            .iter()
            .map(|subs| m1(subs, session.duration, shape))
            .collect();
        let mut s = Vec::with_capacity(query_times.len() * n);
        for &t in query_times {
            for subs in &session.subtitles {
                s.push(background_s(t, subs, shape));
            }
        }
        BackgroundCache { n_labels: n, m1, s }
    }

    /// `S^f` for every `f` at query time `i`.
    #[inline]
    pub fn s_at(&self, i: usize) -> &[f64] {
        &self.s[i * self.n_labels..(i + 1) * self.n_labels]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use proptest::prelude::*;

    fn params_1d(mu0: f64, nu: f64, alpha: f64, gamma: f64, shape: ShapeConfig) -> HawkesParams {
        HawkesParams {
            emotions: EmotionSet::new(["x"]).unwrap(),
            shape,
            per_emotion: vec![EmotionParams {
                target: "x".into(),
                mu0,
                gamma,
                nu: vec![nu],
                alpha: vec![alpha],
            }],
        }
    }

    fn seconds_shape() -> ShapeConfig {
        ShapeConfig::lognormal_from_peak_median(2.0, 10.0).unwrap()
    }

    fn fixture() -> (HawkesParams, VideoSession) {
        let set = EmotionSet::new(["a", "b"]).unwrap();
        let params = HawkesParams {
            emotions: set,
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

    #[test]
    fn background_landmarks() {
        let shape = seconds_shape();
        assert_eq!(background_s(5.0, &[], &shape), 0.0);
        let one = background_s(10.0, &[0.0], &shape);
        assert!((one - 0.031_446_546_098_234_95).abs() < 1e-12);
        assert_eq!(background_s(10.0, &[0.0, 0.0], &shape), 2.0 * one);
        // Subtitle at the query instant does not count yet.
        assert_eq!(background_s(3.0, &[3.0], &shape), 0.0);
    }

    #[test]
    fn exo_rate_scaling_and_cross_terms() {
        let (mut params, session) = fixture();
        for p in &mut params.per_emotion {
            p.nu = vec![0.0, 0.0];
        }
        assert_eq!(exo_rate(2.5, 0, &params, &session), 0.4);
        params.per_emotion[0].mu0 = 0.0;
        params.per_emotion[0].nu = vec![0.0, 2.0];
        let s = background_s(2.5, &session.subtitles[1], &params.shape);
        assert!(s > 0.0);
        assert_eq!(exo_rate(2.5, 0, &params, &session), 2.0 * s);
    }

    #[test]
    fn intensity_landmarks() {
        let none = VideoSession::empty("e", 5.0, 1);
        let p = params_1d(1.5, 0.3, 0.8, 0.6, ShapeConfig::default());
        assert_eq!(total_intensity(2.0, 0, &p, &none), 1.5);

        let p = params_1d(0.5, 0.0, 1.0, 0.6, ShapeConfig::default());
        let mut s = VideoSession::empty("e", 5.0, 1);
        s.chat[0] = vec![2.0 - 0.6];
        let lam = total_intensity(2.0, 0, &p, &s);
        assert!((lam - (0.5 + (-1.0f64).exp() / 0.6)).abs() < 1e-14);
        // Strict inequality at an event time.
        s.chat[0] = vec![2.0];
        assert_eq!(total_intensity(2.0, 0, &p, &s), 0.5);
    }

    #[test]
    fn jump_at_events() {
        let (params, session) = fixture();
        let t = 1.4; // one `a` event twice and one `b` event at this instant
        let h = 1e-9;
        for e in 0..2 {
            let p = &params.per_emotion[e];
            let left = total_intensity(t, e, &params, &session);
            let right = total_intensity(t + h, e, &params, &session);
            let jump = (2.0 * p.alpha[0] + p.alpha[1]) / p.gamma;
            assert!((right - left - jump).abs() < 1e-6, "{e}: {}", right - left);
        }
    }

    #[test]
    fn compensator_landmarks() {
        let none = VideoSession::empty("e", 5.0, 1);
        let p = params_1d(2.0, 0.0, 0.0, 1.0, ShapeConfig::default());
        assert_eq!(compensator(0, &p, &none, 3.0), 6.0);

        let p = params_1d(0.0, 0.0, 0.7, 0.5, ShapeConfig::default());
        let mut s = VideoSession::empty("e", 1e4, 1);
        s.chat[0] = vec![1.0];
        assert!((compensator(0, &p, &s, 1e4) - 0.7).abs() < 1e-12);

        let p = params_1d(0.0, 1.3, 0.0, 1.0, seconds_shape());
        let mut s = VideoSession::empty("e", 100.0, 1);
        s.subtitles[0] = vec![0.0];
        assert!((compensator(0, &p, &s, 10.0) - 1.3 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn m1_landmarks() {
        let shape = seconds_shape();
        assert!((m1(&[0.0], 1e9, &shape) - 1.0).abs() < 1e-12);
        assert!((m1(&[5.0], 15.0, &shape) - 0.5).abs() < 1e-12);
        let one = m1(&[2.0], 7.0, &shape);
        assert_eq!(m1(&[2.0, 2.0, 2.0], 7.0, &shape), 3.0 * one);
    }

    #[test]
    fn m1_matches_quadrature() {
        let subs = [0.1, 1.0, 1.05, 3.3, 7.9];
        for shape in [ShapeConfig::default(), ShapeConfig::Powerlaw { c: 2.5, eps: 1.0 / 60.0 }] {
            // Integrate piecewise between subtitle times so each kink is an endpoint.
            let mut knots = vec![0.0];
            knots.extend_from_slice(&subs);
            knots.push(9.0);
            let q: f64 = knots
                .windows(2)
                .map(|w| integrate(|t| background_s(t, &subs, &shape), w[0], w[1], 1e-11))
                .sum();
            let closed = m1(&subs, 9.0, &shape);
            assert!((q - closed).abs() < 1e-6 * closed.max(1.0), "{shape:?}: {q} vs {closed}");
        }
    }

    #[test]
    fn compensator_matches_intensity_quadrature() {
        let (params, session) = fixture();
        let mut knots: Vec<f64> = session
            .chat
            .iter()
            .chain(&session.subtitles)
            .flatten()
            .copied()
            .collect();
        knots.extend([0.0, session.duration]);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        for e in 0..2 {
            for (t1, t2) in [(0.0, 6.0), (0.7, 3.1), (2.0, 2.5)] {
                let mut pts: Vec<f64> = knots.iter().copied().filter(|&k| k > t1 && k < t2).collect();
                pts.insert(0, t1);
                pts.push(t2);
                let q: f64 = pts
                    .windows(2)
                    .map(|w| integrate(|t| total_intensity(t, e, &params, &session), w[0], w[1], 1e-11))
                    .sum();
                let d = compensator(e, &params, &session, t2) - compensator(e, &params, &session, t1);
                assert!((q - d).abs() < 1e-6, "e={e} [{t1},{t2}]: {q} vs {d}");
            }
        }
    }

    #[test]
    fn params_validation() {
        let (mut params, _) = fixture();
        assert!(params.validate().is_ok());
        assert_eq!(params.n_parameters(), 12);
        params.per_emotion[1].alpha[0] = -0.1;
        assert!(params.validate().is_err());
        let (mut params, _) = fixture();
        params.per_emotion[1].target = "a".into();
        assert!(params.validate().is_err());
    }

    #[test]
    fn vector_layout() {
        let (params, _) = fixture();
        let p = &params.per_emotion[1];
        let v = p.to_vector();
        assert_eq!(v, vec![0.2, 0.1, 0.6, 0.3, 0.4, 1.3]);
        assert_eq!(&EmotionParams::from_vector("b", &v), p);
    }

    proptest! {
        #[test]
        fn intensity_bounded_below_and_compensator_monotone(t1 in 0.0f64..6.0, dt in 0.0f64..3.0) {
            let (params, session) = fixture();
            for e in 0..2 {
                let lam = total_intensity(t1, e, &params, &session);
                prop_assert!(lam >= params.per_emotion[e].mu0);
                prop_assert!(lam > 0.0);
                let a = compensator(e, &params, &session, t1);
                let b = compensator(e, &params, &session, t1 + dt);
                prop_assert!(b >= a - 1e-12);
            }
        }
    }
}
