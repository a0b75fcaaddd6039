//! Built-in oracle checks behind `forge kernel selftest` and
//! `forge losses selftest`.
//!
//! Every check recomputes its expectation from scratch — brute-force
//! reference implementations, closed-form constants, finite differences —
//! and compares the library against it, so a passing run means the shipped
//! binary agrees with independent arithmetic on this machine. One
//! `PASS`/`FAIL` line is printed per check, followed by a tally; the caller
//! turns a nonzero failure count into exit code 1.

use forge_core::archkernel::{
    attention, build_llm_input, perceiver_resample, sample_token, sampling_distribution,
    select_prompt_span, softmax_rows, vq_assign, AttentionWeights, Codebook, Matrix,
    PromptPolicy, SamplingConfig,
};
use forge_core::losses::{
    adv_d, adv_g, cross_entropy, cross_entropy_grad, fm_loss, grad_check,
    hifi_generator_total, lm_weighted, mel_loss, mel_loss_grad, DiscriminatorTrace,
    LossWeights, TokenBatch, DEFAULT_GRAD_EPS, DEFAULT_GRAD_TOLERANCE,
};
use forge_core::dsp::{MelConfig, MelSpectrogram};
use forge_core::rng::SplitMix64;

/// Which check table to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Kernel,
    Losses,
}

impl Scope {
    fn label(self) -> &'static str {
        match self {
            Scope::Kernel => "kernel",
            Scope::Losses => "losses",
        }
    }

    fn checks(self) -> &'static [Check] {
        match self {
            Scope::Kernel => KERNEL_CHECKS,
            Scope::Losses => LOSSES_CHECKS,
        }
    }
}

/// One named check; `Ok` carries a short success detail, `Err` the reason.
struct Check {
    name: &'static str,
    run: fn(&mut SplitMix64) -> Result<String, String>,
}

/// Run every check in the scope, printing one line per check and a tally.
/// Returns the number of failures.
pub fn run(scope: Scope, seed: u64) -> usize {
    let mut rng = SplitMix64::new(seed);
    let checks = scope.checks();
    let mut passed = 0usize;
    for check in checks {
        match (check.run)(&mut rng) {
            Ok(detail) => {
                passed += 1;
                println!("PASS {} ({detail})", check.name);
            }
            Err(reason) => println!("FAIL {}: {reason}", check.name),
        }
    }
    println!("{} selftest: {passed}/{} passed", scope.label(), checks.len());
    checks.len() - passed
}

// ==== small plain-vec helpers (oracle side) ==================================

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = b[0].len();
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

fn softmax_row_oracle(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

fn random_rows(rows: usize, cols: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.next_range(-1.0, 1.0)).collect())
        .collect()
}

fn to_matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows.to_vec()).expect("well-formed test matrix")
}

fn max_abs_diff(a: &Matrix, b: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, row) in b.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((a.get(i, j) - v).abs());
        }
    }
    worst
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

// ==== kernel checks ==========================================================

/// Reference attention computed head by head with plain nested vectors.
fn naive_attention(
    q_in: &[Vec<f64>],
    k_in: &[Vec<f64>],
    v_in: &[Vec<f64>],
    w_q: &[Vec<Vec<f64>>],
    w_k: &[Vec<Vec<f64>>],
    w_v: &[Vec<Vec<f64>>],
    w_o: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let heads = w_q.len();
    let d_head = w_q[0][0].len();
    let mut concat: Vec<Vec<f64>> = vec![Vec::new(); q_in.len()];
    for h in 0..heads {
        let q = mat_mul(q_in, &w_q[h]);
        let k = mat_mul(k_in, &w_k[h]);
        let v = mat_mul(v_in, &w_v[h]);
        let scale = 1.0 / (d_head as f64).sqrt();
        for (i, q_row) in q.iter().enumerate() {
            let scores: Vec<f64> = k
                .iter()
                .map(|k_row| {
                    q_row.iter().zip(k_row).map(|(a, b)| a * b).sum::<f64>() * scale
                })
                .collect();
            let probs = softmax_row_oracle(&scores);
            for j in 0..d_head {
                let out: f64 = probs.iter().zip(&v).map(|(p, vr)| p * vr[j]).sum();
                concat[i].push(out);
            }
        }
    }
    mat_mul(&concat, w_o)
}

fn check_attention_oracle(rng: &mut SplitMix64) -> Result<String, String> {
    let d = 8;
    let mut worst = 0.0f64;
    for case in 0..20 {
        let heads = [1usize, 2, 4][case % 3];
        let d_head = d / heads;
        let q_rows = 1 + rng.next_below(5) as usize;
        let kv_rows = 1 + rng.next_below(6) as usize;
        let q_in = random_rows(q_rows, d, rng);
        let k_in = random_rows(kv_rows, d, rng);
        let v_in = random_rows(kv_rows, d, rng);
        let w_q: Vec<Vec<Vec<f64>>> = (0..heads).map(|_| random_rows(d, d_head, rng)).collect();
        let w_k: Vec<Vec<Vec<f64>>> = (0..heads).map(|_| random_rows(d, d_head, rng)).collect();
        let w_v: Vec<Vec<Vec<f64>>> = (0..heads).map(|_| random_rows(d, d_head, rng)).collect();
        let w_o = random_rows(d, d, rng);
        let weights = AttentionWeights::new(
            heads,
            w_q.iter().map(|m| to_matrix(m)).collect(),
            w_k.iter().map(|m| to_matrix(m)).collect(),
            w_v.iter().map(|m| to_matrix(m)).collect(),
            to_matrix(&w_o),
        )
        .map_err(|e| e.to_string())?;
        let got = attention(&to_matrix(&q_in), &to_matrix(&k_in), &to_matrix(&v_in), &weights)
            .map_err(|e| e.to_string())?;
        let want = naive_attention(&q_in, &k_in, &v_in, &w_q, &w_k, &w_v, &w_o);
        worst = worst.max(max_abs_diff(&got, &want));
    }
    if worst <= 1e-9 {
        Ok(format!("20 cases, worst |Δ| {worst:.2e}"))
    } else {
        Err(format!("worst |Δ| {worst:.2e} exceeds 1e-9"))
    }
}

fn check_softmax_rows(rng: &mut SplitMix64) -> Result<String, String> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let rows = 1 + rng.next_below(6) as usize;
        let cols = 1 + rng.next_below(8) as usize;
        let m = to_matrix(&random_rows(rows, cols, rng));
        let soft = softmax_rows(&m).map_err(|e| e.to_string())?;
        for i in 0..rows {
            let sum: f64 = soft.row(i).iter().sum();
            worst = worst.max((sum - 1.0).abs());
        }
    }
    if worst <= 1e-9 {
        Ok(format!("10 matrices, worst |row sum − 1| {worst:.2e}"))
    } else {
        Err(format!("row sum off by {worst:.2e}"))
    }
}

fn check_perceiver_rows(rng: &mut SplitMix64) -> Result<String, String> {
    let d = 8;
    let weights = AttentionWeights::identity(d, 2).map_err(|e| e.to_string())?;
    let latents = to_matrix(&random_rows(4, d, rng));
    for len in 1..=64usize {
        let input = to_matrix(&random_rows(len, d, rng));
        let out = perceiver_resample(&input, &latents, &weights).map_err(|e| e.to_string())?;
        if out.rows() != 4 || out.cols() != d {
            return Err(format!(
                "input length {len} produced shape {}×{}, expected 4×{d}",
                out.rows(),
                out.cols()
            ));
        }
    }
    Ok("output stays 4 rows for input lengths 1..=64".to_string())
}

fn check_vq_exhaustive(rng: &mut SplitMix64) -> Result<String, String> {
    let mut checked = 0usize;
    for _ in 0..30 {
        let n_codes = 4 + rng.next_below(8) as usize;
        let dim = 2 + rng.next_below(4) as usize;
        // Distinct rows with probability one under a continuous draw.
        let codes = random_rows(n_codes, dim, rng);
        let codebook =
            Codebook::new(to_matrix(&codes)).map_err(|e| e.to_string())?;
        let frames = random_rows(10, dim, rng);
        let got = vq_assign(&to_matrix(&frames), &codebook).map_err(|e| e.to_string())?;
        for (frame, &assigned) in frames.iter().zip(&got) {
            let dists: Vec<f64> = codes
                .iter()
                .map(|c| frame.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect();
            let best = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            let want = dists.iter().position(|&d| d == best).unwrap();
            if assigned != want {
                return Err(format!(
                    "frame assigned to code {assigned}, exhaustive search says {want}"
                ));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} assignments match exhaustive search"))
}

fn check_vq_tie_break(_rng: &mut SplitMix64) -> Result<String, String> {
    let codebook = Codebook::new(to_matrix(&[
        vec![0.0],
        vec![2.0],
        vec![4.0],
    ]))
    .map_err(|e| e.to_string())?;
    // 1.0 sits exactly between codes 0 and 1; the lower index must win.
    let got = vq_assign(&to_matrix(&[vec![1.0]]), &codebook).map_err(|e| e.to_string())?;
    if got == vec![0] {
        Ok("equidistant frame resolves to the lower index".to_string())
    } else {
        Err(format!("equidistant frame went to {got:?}, expected [0]"))
    }
}

fn check_llm_layout(rng: &mut SplitMix64) -> Result<String, String> {
    let d = 6;
    let speaker = random_rows(2, d, rng);
    let text = random_rows(3, d, rng);
    let audio = random_rows(4, d, rng);
    let input = build_llm_input(
        &to_matrix(&speaker),
        &to_matrix(&text),
        Some(&to_matrix(&audio)),
    )
    .map_err(|e| e.to_string())?;
    if input.offsets() != (0, 2, 5) {
        return Err(format!("offsets {:?}, expected (0, 2, 5)", input.offsets()));
    }
    if input.rows() != 9 {
        return Err(format!("{} rows, expected 9", input.rows()));
    }
    let back = [
        (input.speaker(), &speaker),
        (input.text(), &text),
        (input.audio().ok_or("audio slice missing")?, &audio),
    ];
    for (got, want) in back {
        if max_abs_diff(&got, want) != 0.0 {
            return Err("a section slice did not round-trip bit-exactly".to_string());
        }
    }
    let no_audio = build_llm_input(&to_matrix(&speaker), &to_matrix(&text), None)
        .map_err(|e| e.to_string())?;
    if no_audio.audio().is_some() || no_audio.rows() != 5 {
        return Err("inference-style input should have no audio section".to_string());
    }
    Ok("sections concatenate and slice back bit-exactly".to_string())
}

fn check_hifi_equal_rows(rng: &mut SplitMix64) -> Result<String, String> {
    let h = to_matrix(&random_rows(5, 3, rng));
    let s = to_matrix(&random_rows(5, 3, rng));
    let combined = forge_core::archkernel::hifi_combine(&h, &s).map_err(|e| e.to_string())?;
    let added = h.add(&s).map_err(|e| e.to_string())?;
    if combined.data() == added.data() {
        Ok("matching row counts reduce to plain addition".to_string())
    } else {
        Err("length-matched combine differs from plain addition".to_string())
    }
}

fn check_hifi_midpoint(_rng: &mut SplitMix64) -> Result<String, String> {
    // Two conditioning rows stretched over three output rows: the middle
    // row must be their exact average.
    let h = to_matrix(&vec![vec![0.0, 0.0]; 3]);
    let s = to_matrix(&[vec![0.0, 10.0], vec![4.0, 20.0]]);
    let got = forge_core::archkernel::hifi_combine(&h, &s).map_err(|e| e.to_string())?;
    let want = [vec![0.0, 10.0], vec![2.0, 15.0], vec![4.0, 20.0]];
    if max_abs_diff(&got, &want) == 0.0 {
        Ok("endpoints copied, midpoint averaged exactly".to_string())
    } else {
        Err(format!("got {:?}", got.data()))
    }
}

fn check_greedy_equals_argmax(rng: &mut SplitMix64) -> Result<String, String> {
    let config = SamplingConfig {
        top_k: 1,
        ..SamplingConfig::default()
    };
    for _ in 0..10_000 {
        let len = 2 + rng.next_below(16) as usize;
        let logits: Vec<f64> = (0..len).map(|_| rng.next_range(-4.0, 4.0)).collect();
        let got = sample_token(&logits, &config, rng).map_err(|e| e.to_string())?;
        let want = argmax(&logits);
        if got != want {
            return Err(format!("picked {got}, argmax is {want}"));
        }
    }
    Ok("10000 greedy draws equal the argmax".to_string())
}

fn check_sampling_frequency(rng: &mut SplitMix64) -> Result<String, String> {
    let config = SamplingConfig {
        temperature: 1.0,
        top_k: 2,
        ..SamplingConfig::default()
    };
    let logits = [2.0, 1.0];
    let draws = 100_000usize;
    let mut zeros = 0usize;
    for _ in 0..draws {
        if sample_token(&logits, &config, rng).map_err(|e| e.to_string())? == 0 {
            zeros += 1;
        }
    }
    let freq = zeros as f64 / draws as f64;
    let want = 1.0 / (1.0 + (-1.0f64).exp());
    let diff = (freq - want).abs();
    if diff <= 0.02 {
        Ok(format!("frequency {freq:.4} vs closed form {want:.4}"))
    } else {
        Err(format!("frequency {freq:.4} is {diff:.4} from {want:.4}"))
    }
}

fn check_temperature_keeps_argmax(rng: &mut SplitMix64) -> Result<String, String> {
    for _ in 0..20 {
        let logits: Vec<f64> = (0..8).map(|_| rng.next_range(-3.0, 3.0)).collect();
        let want = argmax(&logits);
        for temperature in [0.5, 0.85, 1.0, 2.0] {
            let config = SamplingConfig {
                temperature,
                top_k: 5,
                ..SamplingConfig::default()
            };
            let dist = sampling_distribution(&logits, &config).map_err(|e| e.to_string())?;
            if argmax(&dist) != want {
                return Err(format!(
                    "temperature {temperature} moved the argmax from {want} to {}",
                    argmax(&dist)
                ));
            }
        }
    }
    Ok("argmax unchanged across temperatures 0.5/0.85/1.0/2.0".to_string())
}

fn check_prompt_short_clip(rng: &mut SplitMix64) -> Result<String, String> {
    let policy = PromptPolicy::default();
    let span = select_prompt_span(0.8, &policy, rng).map_err(|e| e.to_string())?;
    if span.len_s != 0.4 {
        return Err(format!("0.8 s clip gave length {}, expected 0.4", span.len_s));
    }
    if span.start_s < 0.0 || span.start_s + span.len_s > 0.8 + 1e-9 {
        return Err(format!("span start {} leaves the clip", span.start_s));
    }
    Ok("0.8 s clip surrenders exactly half".to_string())
}

fn check_prompt_bounds(rng: &mut SplitMix64) -> Result<String, String> {
    let policy = PromptPolicy::default();
    for _ in 0..10_000 {
        let duration = rng.next_range(6.0, 30.0);
        let span = select_prompt_span(duration, &policy, rng).map_err(|e| e.to_string())?;
        if !(1.0..=6.0).contains(&span.len_s) {
            return Err(format!("length {} outside [1, 6]", span.len_s));
        }
        if span.start_s < 0.0 || span.start_s + span.len_s > duration + 1e-9 {
            return Err(format!(
                "span [{}, +{}] leaves a {duration} s clip",
                span.start_s, span.len_s
            ));
        }
    }
    Ok("10000 spans stayed within [1, 6] s and inside the clip".to_string())
}

const KERNEL_CHECKS: &[Check] = &[
    Check { name: "attention_matches_naive_oracle", run: check_attention_oracle },
    Check { name: "softmax_rows_sum_to_one", run: check_softmax_rows },
    Check { name: "perceiver_output_rows_are_fixed", run: check_perceiver_rows },
    Check { name: "vq_matches_exhaustive_search", run: check_vq_exhaustive },
    Check { name: "vq_tie_breaks_to_lowest_index", run: check_vq_tie_break },
    Check { name: "llm_input_layout_round_trips", run: check_llm_layout },
    Check { name: "hifi_combine_adds_matched_lengths", run: check_hifi_equal_rows },
    Check { name: "hifi_combine_interpolates_midpoint", run: check_hifi_midpoint },
    Check { name: "greedy_sampling_equals_argmax", run: check_greedy_equals_argmax },
    Check { name: "sampling_frequency_matches_closed_form", run: check_sampling_frequency },
    Check { name: "temperature_preserves_argmax", run: check_temperature_keeps_argmax },
    Check { name: "prompt_short_clip_takes_half", run: check_prompt_short_clip },
    Check { name: "prompt_spans_stay_in_band", run: check_prompt_bounds },
];

// ==== losses checks ==========================================================

fn spectrogram(frames: Vec<Vec<f64>>) -> MelSpectrogram {
    let bins = frames.first().map_or(1, Vec::len);
    let config = MelConfig {
        mel_bins: bins,
        ..MelConfig::default()
    };
    MelSpectrogram::from_frames(frames, config).expect("well-formed test spectrogram")
}

fn check_ce_uniform(_rng: &mut SplitMix64) -> Result<String, String> {
    let batch = TokenBatch::new(vec![vec![0.0; 4]; 3], vec![0, 1, 2])
        .map_err(|e| e.to_string())?;
    let got = cross_entropy(&batch);
    let want = (4.0f64).ln();
    if (got - want).abs() <= 1e-12 {
        Ok(format!("uniform logits cost ln(4) = {want:.6}"))
    } else {
        Err(format!("got {got}, expected ln(4) = {want}"))
    }
}

fn check_ce_oracle(rng: &mut SplitMix64) -> Result<String, String> {
    // Direct −log softmax without max subtraction; safe at this scale.
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let vocab = 2 + rng.next_below(6) as usize;
        let steps = 1 + rng.next_below(4) as usize;
        let logits: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..vocab).map(|_| rng.next_range(-2.0, 2.0)).collect())
            .collect();
        let targets: Vec<usize> = (0..steps)
            .map(|_| rng.next_below(vocab as u64) as usize)
            .collect();
        let want = logits
            .iter()
            .zip(&targets)
            .map(|(row, &t)| row.iter().map(|l| l.exp()).sum::<f64>().ln() - row[t])
            .sum::<f64>()
            / steps as f64;
        let batch = TokenBatch::new(logits, targets).map_err(|e| e.to_string())?;
        worst = worst.max((cross_entropy(&batch) - want).abs());
    }
    if worst <= 1e-12 {
        Ok(format!("10 batches, worst |Δ| {worst:.2e}"))
    } else {
        Err(format!("worst |Δ| {worst:.2e} exceeds 1e-12"))
    }
}

fn check_lm_mixture(_rng: &mut SplitMix64) -> Result<String, String> {
    let got = lm_weighted(2.0, 3.0, &LossWeights::default());
    if got == 3.02 {
        Ok("0.01·2 + 1.0·3 = 3.02 exactly".to_string())
    } else {
        Err(format!("got {got}, expected exactly 3.02"))
    }
}

fn check_adv_hand_values(_rng: &mut SplitMix64) -> Result<String, String> {
    let trace = DiscriminatorTrace {
        real_scores: vec![0.5],
        fake_scores: vec![0.25],
        real_features: Vec::new(),
        fake_features: Vec::new(),
    };
    let d = adv_d(&trace).map_err(|e| e.to_string())?;
    let g = adv_g(&trace).map_err(|e| e.to_string())?;
    if d == 0.3125 && g == 0.5625 {
        Ok("(0.5, 0.25) scores give 0.3125 / 0.5625 exactly".to_string())
    } else {
        Err(format!("got adv_d {d}, adv_g {g}; expected 0.3125 / 0.5625"))
    }
}

fn check_adv_identity(_rng: &mut SplitMix64) -> Result<String, String> {
    let fooled = DiscriminatorTrace {
        real_scores: vec![1.0, 1.0],
        fake_scores: vec![1.0, 1.0],
        real_features: Vec::new(),
        fake_features: Vec::new(),
    };
    let sharp = DiscriminatorTrace {
        real_scores: vec![1.0, 1.0],
        fake_scores: vec![0.0, 0.0],
        real_features: Vec::new(),
        fake_features: Vec::new(),
    };
    let g = adv_g(&fooled).map_err(|e| e.to_string())?;
    let d = adv_d(&sharp).map_err(|e| e.to_string())?;
    if g == 0.0 && d == 0.0 {
        Ok("both objectives vanish at their optima".to_string())
    } else {
        Err(format!("adv_g {g}, adv_d {d}; expected exact zeros"))
    }
}

fn check_mel_hand_values(_rng: &mut SplitMix64) -> Result<String, String> {
    let real = spectrogram(vec![vec![0.25, -0.5], vec![0.75, 0.0]]);
    let identity = mel_loss(&real, &real).map_err(|e| e.to_string())?;
    let shifted = spectrogram(vec![vec![0.75, 0.0], vec![1.25, 0.5]]);
    let offset = mel_loss(&real, &shifted).map_err(|e| e.to_string())?;
    if identity == 0.0 && offset == 0.5 {
        Ok("identity is 0, a uniform 0.5 offset prices at 0.5".to_string())
    } else {
        Err(format!("identity {identity}, offset {offset}; expected 0 and 0.5"))
    }
}

fn check_fm_hand_value(_rng: &mut SplitMix64) -> Result<String, String> {
    let trace = DiscriminatorTrace {
        real_scores: vec![1.0],
        fake_scores: vec![0.0],
        real_features: vec![vec![1.0, 3.0], vec![2.0]],
        fake_features: vec![vec![0.0, 1.0], vec![0.0]],
    };
    let got = fm_loss(&trace).map_err(|e| e.to_string())?;
    // Layer means: (1 + 2)/2 = 1.5 and 2/1 = 2, summed over layers.
    if got == 3.5 {
        Ok("two-layer hand case totals 3.5 exactly".to_string())
    } else {
        Err(format!("got {got}, expected exactly 3.5"))
    }
}

fn check_generator_hand_total(_rng: &mut SplitMix64) -> Result<String, String> {
    // Per trace: adv_g = (0.5 − 1)² = 0.25 and fm = |0.1 − 0| = 0.1; the mel
    // spectrograms sit 0.02 apart. Two traces with default weights:
    // 2·(0.25 + 2·0.1) + 45·0.02 = 1.8.
    let trace = DiscriminatorTrace {
        real_scores: vec![1.0],
        fake_scores: vec![0.5],
        real_features: vec![vec![0.1]],
        fake_features: vec![vec![0.0]],
    };
    let real = spectrogram(vec![vec![0.0]]);
    let fake = spectrogram(vec![vec![0.02]]);
    let total = hifi_generator_total(
        &[trace.clone(), trace],
        &real,
        &fake,
        &LossWeights::default(),
    )
    .map_err(|e| e.to_string())?;
    if total == 1.8 {
        Ok("two-trace hand case totals 1.8 exactly".to_string())
    } else {
        Err(format!("got {total}, expected exactly 1.8"))
    }
}

fn check_zero_lambdas(rng: &mut SplitMix64) -> Result<String, String> {
    let trace = DiscriminatorTrace {
        real_scores: vec![rng.next_range(0.0, 1.0)],
        fake_scores: vec![rng.next_range(0.0, 1.0)],
        real_features: vec![vec![rng.next_range(-1.0, 1.0)]],
        fake_features: vec![vec![rng.next_range(-1.0, 1.0)]],
    };
    let real = spectrogram(vec![vec![0.0]]);
    let fake = spectrogram(vec![vec![1.0]]);
    let weights = LossWeights {
        lambda_fm: 0.0,
        lambda_mel: 0.0,
        ..LossWeights::default()
    };
    let total = hifi_generator_total(std::slice::from_ref(&trace), &real, &fake, &weights)
        .map_err(|e| e.to_string())?;
    let adv_only = adv_g(&trace).map_err(|e| e.to_string())?;
    if total == adv_only {
        Ok("zero λ's reduce the total to the adversarial term".to_string())
    } else {
        Err(format!("got {total}, expected {adv_only}"))
    }
}

fn check_ce_gradient(rng: &mut SplitMix64) -> Result<String, String> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let vocab = 3 + rng.next_below(6) as usize;
        let steps = 1 + rng.next_below(4) as usize;
        let logits: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..vocab).map(|_| rng.next_range(-2.0, 2.0)).collect())
            .collect();
        let targets: Vec<usize> = (0..steps)
            .map(|_| rng.next_below(vocab as u64) as usize)
            .collect();
        let batch = TokenBatch::new(logits.clone(), targets.clone())
            .map_err(|e| e.to_string())?;
        let analytic: Vec<f64> = cross_entropy_grad(&batch).concat();
        let flat: Vec<f64> = logits.concat();
        let f = |x: &[f64]| {
            let rows: Vec<Vec<f64>> = x.chunks(vocab).map(<[f64]>::to_vec).collect();
            cross_entropy(&TokenBatch::new(rows, targets.clone()).expect("valid batch"))
        };
        let err =
            grad_check(f, &analytic, &flat, DEFAULT_GRAD_EPS).map_err(|e| e.to_string())?;
        worst = worst.max(err);
    }
    if worst < DEFAULT_GRAD_TOLERANCE {
        Ok(format!("50 batches, worst relative error {worst:.2e}"))
    } else {
        Err(format!(
            "worst relative error {worst:.2e} exceeds {DEFAULT_GRAD_TOLERANCE:.0e}"
        ))
    }
}

fn check_mel_subgradient(rng: &mut SplitMix64) -> Result<String, String> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let frames = 1 + rng.next_below(3) as usize;
        let bins = 1 + rng.next_below(4) as usize;
        let real: Vec<Vec<f64>> = vec![vec![0.0; bins]; frames];
        // Keep every entry at least 0.2 from its reference so the finite
        // difference never straddles the kink at zero.
        let fake: Vec<Vec<f64>> = (0..frames)
            .map(|_| {
                (0..bins)
                    .map(|_| {
                        let magnitude = rng.next_range(0.2, 1.0);
                        if rng.next_f64() < 0.5 {
                            -magnitude
                        } else {
                            magnitude
                        }
                    })
                    .collect()
            })
            .collect();
        let real_spec = spectrogram(real.clone());
        let analytic: Vec<f64> = mel_loss_grad(&real_spec, &spectrogram(fake.clone()))
            .map_err(|e| e.to_string())?
            .concat();
        let flat: Vec<f64> = fake.concat();
        let f = |x: &[f64]| {
            let rows: Vec<Vec<f64>> = x.chunks(bins).map(<[f64]>::to_vec).collect();
            mel_loss(&real_spec, &spectrogram(rows)).expect("matched shapes")
        };
        let err =
            grad_check(f, &analytic, &flat, DEFAULT_GRAD_EPS).map_err(|e| e.to_string())?;
        worst = worst.max(err);
    }
    if worst < DEFAULT_GRAD_TOLERANCE {
        Ok(format!("50 spectrogram pairs, worst relative error {worst:.2e}"))
    } else {
        Err(format!(
            "worst relative error {worst:.2e} exceeds {DEFAULT_GRAD_TOLERANCE:.0e}"
        ))
    }
}

fn check_grad_checker_detects_errors(_rng: &mut SplitMix64) -> Result<String, String> {
    // f(x) = x² at x = 3 has derivative 6; hand the checker 12 instead.
    let f = |x: &[f64]| x[0] * x[0];
    let err = grad_check(f, &[12.0], &[3.0], DEFAULT_GRAD_EPS).map_err(|e| e.to_string())?;
    if err > 1e-3 {
        Ok(format!("doubled gradient flagged with error {err:.3}"))
    } else {
        Err(format!("doubled gradient slipped through with error {err:.2e}"))
    }
}

const LOSSES_CHECKS: &[Check] = &[
    Check { name: "cross_entropy_uniform_costs_ln_vocab", run: check_ce_uniform },
    Check { name: "cross_entropy_matches_direct_formula", run: check_ce_oracle },
    Check { name: "weighted_mixture_hits_constant", run: check_lm_mixture },
    Check { name: "adversarial_hand_values_exact", run: check_adv_hand_values },
    Check { name: "adversarial_losses_vanish_at_optima", run: check_adv_identity },
    Check { name: "mel_identity_and_offset_exact", run: check_mel_hand_values },
    Check { name: "feature_matching_hand_value_exact", run: check_fm_hand_value },
    Check { name: "generator_total_hand_case_exact", run: check_generator_hand_total },
    Check { name: "zero_lambdas_leave_adversarial_term", run: check_zero_lambdas },
    Check { name: "cross_entropy_gradient_passes_check", run: check_ce_gradient },
    Check { name: "mel_subgradient_passes_check", run: check_mel_subgradient },
    Check { name: "gradient_checker_flags_bad_gradients", run: check_grad_checker_detects_errors },
];

// ==== tests ==================================================================
