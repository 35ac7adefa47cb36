//! Shared fixtures for the criterion benchmarks.

use deepbeam::channel::{CsiSample, SampleStream, ScenarioConfig, StreamPurpose};

/// Reference desk-scale scenario (M = K = 4) at a fixed error ratio and
/// power budget.
pub fn fixture(n: usize, tau: f64, p_db: f64) -> (ScenarioConfig, Vec<CsiSample>) {
    let cfg = ScenarioConfig {
        seed: 2024,
        ..Default::default()
    };
    let mut stream = SampleStream::new(&cfg, StreamPurpose::Timing);
    let samples = (0..n)
        .map(|_| stream.next_with(Some(tau), Some(p_db), None))
        .collect();
    (cfg, samples)
}
