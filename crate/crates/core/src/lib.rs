//! Multivariate Hawkes processes for labeled event streams driven by a
//! time-varying exogenous source.
//!
//! Each target label `e` has conditional intensity
//!
//! ```text
//! λ^e(t) = μ0^e + Σ_f ν^{e,f} S^f(t) + Σ_f Σ_{t_j^f < t} (α^{e,f}/γ^e) exp(-(t - t_j^f)/γ^e)
//! ```
//!
//! where `S^f(t)` is a sum of shape functions (log-normal by default) anchored
//! at the times subtitles of label `f` appear in the exogenous stream. The
//! crate covers ingestion and filtering of event files ([`events`]), the
//! shape and kernel functions ([`kernels`]), intensity and compensator
//! evaluation ([`intensity`]), the exact log-likelihood with analytic
//! gradients ([`likelihood`]), bounded quasi-Newton fitting with subsampled
//! replicas ([`fitter`]), thinning simulation ([`simulator`]) and post-fit
//! analytics ([`analytics`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod events;
pub mod fitter;
pub mod intensity;
pub mod kernels;
pub mod likelihood;
pub mod optim;
pub mod quad;
pub mod rng;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use events::{EmotionSet, SessionCollection, SessionStats, VideoSession};
pub use fitter::{BootstrapConfig, FitConfig, FitReport, FitResult};
pub use intensity::{EmotionParams, HawkesParams};
pub use kernels::{ExpKernelParams, ShapeConfig};
pub use likelihood::{LogLikReport, PreparedSession};
pub use simulator::{SimConfig, SubtitleSource};


