//! Acceptance criteria A1-A6. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repseg::decode::{segments_from_binary, DecodeParams};
use repseg::harness::{run_experiment_on, synth_generate, ExperimentReport};
use repseg::labels::{binary_labels, count_label, density_map};
use repseg::metrics::{count_metrics, mae_frames, segmentation_iou};
use repseg::neural::{grad_check, Head, ModelConfig};
use repseg::skeleton::{RepetitionAnnotation, Segment};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn a1_gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for layers in 1..=3 {
        for conv in [false, true] {
            for head in [Head::Binary, Head::Density, Head::Count] {
                let cfg = ModelConfig {
                    hidden_dim: 12,
                    conv_channels: 12,
                    lstm_layers: layers,
                    use_conv: conv,
                    ..ModelConfig::new(6, head)
                };
                let report = grad_check(&cfg, 20, 1e-4).expect("gradient check runs");
                worst = worst.max(report.max_rel_error);
                if !report.passed {
                    failures.push(format!("{head}/{layers}/{conv}"));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && worst < 1e-4 && secs < 60.0,
        format!("18 configs, max rel error {worst:.2e} (< 1e-4), {secs:.1} s (< 60 s), failing {failures:?}"),
    )
}

fn random_annotation(rng: &mut ChaCha8Rng) -> RepetitionAnnotation {
    let mut t = 0;
    let mut segments = Vec::new();
    for _ in 0..rng.random_range(0..=12) {
        t += rng.random_range(0..15);
        let len = rng.random_range(1..45);
        segments.push(Segment::new(t, t + len));
        t += len;
    }
    let length = (t + rng.random_range(0..10)).max(1);
    RepetitionAnnotation::new(segments, length).expect("generated annotation is valid")
}

fn a2_labels() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_sum = 0.0f64;
    let mut bad = 0;
    for _ in 0..1000 {
        let ann = random_annotation(&mut rng);
        let density = density_map(&ann, 1.0 / 6.0).expect("density map");
        let binary = binary_labels(&ann);
        worst_sum = worst_sum.max((density.iter().sum::<f64>() - count_label(&ann) as f64).abs());
        let complementary = density.iter().zip(&binary).all(|(&d, &b)| (d > 0.0) == (b == 0));
        let peaks_inside = ann.segments.iter().all(|s| {
            let slot = &density[s.start..s.end];
            let top = slot.iter().cloned().fold(f64::MIN, f64::max);
            let rising = slot.windows(2).take_while(|w| w[1] >= w[0]).count();
            let falling = slot[rising..].windows(2).all(|w| w[1] <= w[0]);
            let centre = (s.start + s.end - 1) as f64 / 2.0;
            let argmax = s.start + slot.iter().position(|&v| v == top).unwrap();
            top > 0.0 && falling && (argmax as f64 - centre).abs() <= 0.5
        });
        bad += usize::from(!complementary || !peaks_inside);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_sum < 1e-6 && bad == 0 && secs < 10.0,
        format!("1000 annotations, max |sum - count| {worst_sum:.1e} (< 1e-6), {bad} support/peak violations, {secs:.2} s (< 10 s)"),
    )
}

/// Mask formulation: frames inside kept repetitions, with short gaps between
/// consecutive kept repetitions filled, read back as maximal runs.
fn run_length_oracle(bits: &[bool], min_segment: usize, min_gap: usize) -> Vec<Segment> {
    let text: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
    let mut kept = Vec::new();
    let mut offset = 0;
    for piece in text.split('1') {
        if piece.len() >= min_segment && !piece.is_empty() {
            kept.push((offset, offset + piece.len()));
        }
        offset += piece.len() + 1;
    }
    let mut mask = vec![false; bits.len()];
    for (i, &(s, e)) in kept.iter().enumerate() {
        mask[s..e].iter_mut().for_each(|m| *m = true);
        if let Some(&(next, _)) = kept.get(i + 1) {
            if next - e < min_gap {
                mask[e..next].iter_mut().for_each(|m| *m = true);
            }
        }
    }
    let mut out = Vec::new();
    let mut t = 0;
    while t < mask.len() {
        if mask[t] {
            let s = t;
            while t < mask.len() && mask[t] {
                t += 1;
            }
            out.push(Segment::new(s, t));
        } else {
            t += 1;
        }
    }
    out
}

fn a3_decoder() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut mismatches = Vec::new();
    for len in 0..=12usize {
        for code in 0u32..(1 << len) {
            let bits: Vec<bool> = (0..len).map(|i| code >> i & 1 == 1).collect();
            let probs: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
            for min_segment in 1..=3 {
                for min_gap in 1..=3 {
                    let params = DecodeParams { min_segment_frames: min_segment, min_gap_frames: min_gap, ..Default::default() };
                    let got = segments_from_binary(&probs, &params).segments;
                    if got != run_length_oracle(&bits, min_segment, min_gap) {
                        mismatches.push((code, len, min_segment, min_gap));
                    }
                    checked += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches.is_empty() && secs < 30.0,
        format!(
            "{checked} strings x parameters, {} mismatches (first {:?}), {secs:.2} s (< 30 s)",
            mismatches.len(),
            mismatches.first()
        ),
    )
}

fn a4_metrics() -> Outcome {
    let gt = vec![Segment::new(3, 20), Segment::new(25, 47), Segment::new(60, 81)];
    let counts = count_metrics(&[3, 7, 0], &[3, 7, 0]).expect("count metrics");
    let identical = counts.mae_abs == 0.0
        && counts.obo == 1.0
        && segmentation_iou(&gt, &gt) == 1.0
        && mae_frames(&gt, &gt).expect("matched").mae_f == 0.0;
    let shifts_exact = (1..=5).all(|k| {
        let pred: Vec<Segment> = gt.iter().map(|s| s.shifted(k)).collect();
        mae_frames(&gt, &pred).expect("matched").mae_f == k as f64
    });
    let third = segmentation_iou(&[Segment::new(0, 10)], &[Segment::new(5, 15)]);
    let third_ok = (third - 1.0 / 3.0).abs() <= 1e-12;
    outcome(
        identical && shifts_exact && third_ok,
        format!("identical inputs perfect: {identical}, +k shift gives MAE-F k: {shifts_exact}, IoU (0,10)/(5,15) = {third:.15}"),
    )
}

fn benchmark_run(head: Head, seed: u64) -> (ExperimentReport, f64) {
    let (synth, mut cfg) = common::benchmark();
    cfg.head = head;
    cfg.seed = seed;
    let start = Instant::now();
    let samples = synth_generate(&synth).expect("benchmark data");
    let output = run_experiment_on(&samples, &cfg).expect("benchmark run");
    (output.report, start.elapsed().as_secs_f64())
}

fn a5_end_to_end(report: &ExperimentReport, secs: f64) -> Outcome {
    let m = &report.overall;
    let iou = m.iou.unwrap_or(0.0);
    let mae_f = m.mae_f.unwrap_or(f64::INFINITY);
    outcome(
        report.n_samples == 300 && m.obo >= 0.90 && iou >= 0.65 && mae_f <= 10.0 && m.mae_abs <= 0.6 && secs <= 1200.0,
        format!(
            "{} sequences, 5 folds: OBO {:.4} (>= 0.90), IoU {iou:.4} (>= 0.65), MAE-F {mae_f:.2} (<= 10), MAE {:.4} (<= 0.6), {secs:.0} s (<= 1200 s)",
            report.n_samples, m.obo, m.mae_abs
        ),
    )
}

fn a6_head_ordering(density_seed1: &ExperimentReport) -> Outcome {
    let mut density = vec![density_seed1.overall.obo];
    let mut count = Vec::new();
    for seed in 1..=3 {
        if seed > 1 {
            density.push(benchmark_run(Head::Density, seed).0.overall.obo);
        }
        count.push(benchmark_run(Head::Count, seed).0.overall.obo);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (d, c) = (mean(&density), mean(&count));
    outcome(d >= c, format!("mean OBO over seeds 1-3: density {d:.4} {density:.3?} >= count {c:.4} {count:.3?}"))
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, o: Outcome| {
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    };
    report("A1 gradient correctness", a1_gradients());
    report("A2 label consistency", a2_labels());
    report("A3 decoder oracle equivalence", a3_decoder());
    report("A4 metric ground truths", a4_metrics());
    let (density, secs) = benchmark_run(Head::Density, 1);
    report("A5 synthetic end-to-end", a5_end_to_end(&density, secs));
    report("A6 head ordering", a6_head_ordering(&density));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
