#![allow(dead_code)]

use repseg::harness::{ExperimentConfig, SynthParams};

const BENCHMARK: &str = include_str!("../../config/benchmark.json");

/// Synthetic generator and experiment settings of the committed benchmark.
pub fn benchmark() -> (SynthParams, ExperimentConfig) {
    let value: serde_json::Value = serde_json::from_str(BENCHMARK).expect("benchmark config parses");
    let synth: SynthParams = serde_json::from_value(value["synth"].clone()).expect("synth section");
    let cfg = ExperimentConfig::from_json(&value["experiment"].to_string()).expect("experiment section");
    (synth, cfg)
}

/// A small, fast variant of the benchmark for pipeline tests.
pub fn small(n: usize, epochs: usize) -> (SynthParams, ExperimentConfig) {
    let (mut synth, mut cfg) = benchmark();
    synth.n_sequences = n;
    synth.reps_range = (2, 5);
    cfg.schedule.epochs = epochs;
    cfg.folds = 3;
    (synth, cfg)
}
