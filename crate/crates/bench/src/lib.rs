//! Fixtures shared by the benchmarks.

use exohawkes::{EmotionParams, EmotionSet, HawkesParams, ShapeConfig};

/// Subcritical parameters on `n` labels with self-excitation `alpha` on the
/// diagonal and a weak coupling elsewhere.
pub fn fixture_params(n: usize, mu0: f64, alpha: f64) -> HawkesParams {
    let labels: Vec<String> = (0..n).map(|i| format!("l{i}")).collect();
    HawkesParams {
        emotions: EmotionSet::new(labels.clone()).expect("distinct labels"),
        shape: ShapeConfig::default(),
        per_emotion: labels
            .iter()
            .enumerate()
            .map(|(e, l)| EmotionParams {
                target: l.clone(),
                mu0,
                gamma: 1.0,
                nu: (0..n).map(|f| if f == e { 0.5 } else { 0.05 }).collect(),
                alpha: (0..n).map(|f| if f == e { alpha } else { 0.05 }).collect(),
            })
            .collect(),
    }
}
