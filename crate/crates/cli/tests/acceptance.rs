//! The acceptance gate: one test per shipping criterion.
//!
//! Each test states its criterion, recomputes the expected answer with an
//! oracle written in this file (brute force, closed form, or hand
//! arithmetic frozen as a golden constant), and compares the toolkit
//! against it. The two end-to-end criteria drive the compiled `forge`
//! binary the way a user would.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use forge_core::archkernel::{
    attention, perceiver_resample, sample_token, sampling_distribution, select_prompt_span,
    softmax_rows, vq_assign, AttentionWeights, Codebook, Matrix, PromptPolicy, SamplingConfig,
};
use forge_core::losses::{
    adv_d, adv_g, cross_entropy, cross_entropy_grad, fm_loss, grad_check,
    hifi_generator_total, lm_weighted, mel_loss, mel_loss_grad, DiscriminatorTrace,
    LossWeights, TokenBatch, DEFAULT_GRAD_EPS, DEFAULT_GRAD_TOLERANCE,
};
use forge_core::dsp::{MelConfig, MelSpectrogram};
use forge_core::metrics::{
    cer, duration_equality, speech_bert_score, EmbeddingSequence,
};
use forge_core::rng::SplitMix64;

// ==== shared helpers =========================================================

fn random_rows(rows: usize, cols: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.next_range(-1.0, 1.0)).collect())
        .collect()
}

fn to_matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows.to_vec()).expect("well-formed test matrix")
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

// ==== criterion 1: CER against a brute-force DP oracle ======================

/// Textbook full-matrix edit distance, kept deliberately naive.
fn edit_distance_oracle(a: &[char], b: &[char]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in dp[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = usize::from(a[i - 1] != b[j - 1]);
            dp[i][j] = (dp[i - 1][j] + 1)
                .min(dp[i][j - 1] + 1)
                .min(dp[i - 1][j - 1] + sub);
        }
    }
    dp[a.len()][b.len()]
}

#[test]
fn criterion_01_cer_matches_bruteforce_oracle_in_under_a_second() {
    let alphabet = ['a', 'b', 'c', 'd'];
    let mut rng = SplitMix64::new(11);
    let mut cases = Vec::new();
    for _ in 0..1000 {
        let ref_len = 1 + rng.next_below(20) as usize;
        let hyp_len = rng.next_below(21) as usize;
        let reference: String = (0..ref_len)
            .map(|_| alphabet[rng.next_below(4) as usize])
            .collect();
        let hypothesis: String = (0..hyp_len)
            .map(|_| alphabet[rng.next_below(4) as usize])
            .collect();
        cases.push((hypothesis, reference));
    }

    let start = Instant::now();
    for (hypothesis, reference) in &cases {
        let got = cer(hypothesis, reference).unwrap();
        let h: Vec<char> = hypothesis.chars().collect();
        let r: Vec<char> = reference.chars().collect();
        let want = edit_distance_oracle(&h, &r) as f64 / r.len() as f64;
        assert_eq!(got, want, "hyp {hypothesis:?} vs ref {reference:?}");
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(1),
        "1000 pairs took {elapsed:?}"
    );
}

// ==== criterion 2: duration-equality axioms ==================================

#[test]
fn criterion_02_duration_equality_axioms_hold() {
    assert_eq!(duration_equality(2.0, 4.0).unwrap(), 0.5);

    let mut rng = SplitMix64::new(12);
    for _ in 0..10_000 {
        let a = rng.next_range(0.05, 30.0);
        let b = rng.next_range(0.05, 30.0);
        let de = duration_equality(a, b).unwrap();
        assert!(de > 0.0 && de <= 1.0, "de({a}, {b}) = {de} outside (0, 1]");
        assert_eq!(de, duration_equality(b, a).unwrap(), "symmetry at ({a}, {b})");
        assert_eq!(duration_equality(a, a).unwrap(), 1.0, "identity at {a}");
        let k = rng.next_range(0.5, 10.0);
        let scaled = duration_equality(k * a, k * b).unwrap();
        assert!(
            (de - scaled).abs() <= 1e-12,
            "scale invariance: de({a},{b}) = {de} vs k={k} giving {scaled}"
        );
    }
}

// ==== criterion 3: SpeechBERTScore against O(n·m) matching ==================

fn cosine_oracle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn sbs_oracle(generated: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    let total: f64 = generated
        .iter()
        .map(|g| {
            reference
                .iter()
                .map(|r| cosine_oracle(g, r))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    total / generated.len() as f64
}

/// Frames bounded away from the zero vector so cosines are well defined.
fn random_frames(count: usize, dim: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let magnitude = rng.next_range(0.1, 1.1);
                    if rng.next_f64() < 0.5 {
                        -magnitude
                    } else {
                        magnitude
                    }
                })
                .collect()
        })
        .collect()
}

#[test]
fn criterion_03_speech_bert_score_matches_bruteforce_and_shows_asymmetry() {
    let mut rng = SplitMix64::new(13);

    // Identical sequences score 1 within 1e-9.
    for _ in 0..20 {
        let dim = 1 + rng.next_below(8) as usize;
        let frames = random_frames(1 + rng.next_below(16) as usize, dim, &mut rng);
        let seq = EmbeddingSequence::new(frames).unwrap();
        let score = speech_bert_score(&seq, &seq).unwrap();
        assert!((score - 1.0).abs() <= 1e-9, "self-score {score}");
    }

    // Equivalence with the O(n·m) oracle on 200 random pairs.
    for _ in 0..200 {
        let dim = 1 + rng.next_below(8) as usize;
        let gen_frames = random_frames(1 + rng.next_below(16) as usize, dim, &mut rng);
        let ref_frames = random_frames(1 + rng.next_below(16) as usize, dim, &mut rng);
        let got = speech_bert_score(
            &EmbeddingSequence::new(gen_frames.clone()).unwrap(),
            &EmbeddingSequence::new(ref_frames.clone()).unwrap(),
        )
        .unwrap();
        let want = sbs_oracle(&gen_frames, &ref_frames);
        assert!(
            (got - want).abs() <= 1e-9,
            "got {got}, oracle {want} (Δ {})",
            (got - want).abs()
        );
    }

    // Asymmetry: a single matched frame against a two-frame reference scores
    // 1, while the reverse direction leaves one frame unmatched.
    let one = EmbeddingSequence::new(vec![vec![1.0, 0.0]]).unwrap();
    let two = EmbeddingSequence::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let forward = speech_bert_score(&one, &two).unwrap();
    let backward = speech_bert_score(&two, &one).unwrap();
    assert_eq!(forward, 1.0);
    assert_eq!(backward, 0.5);
}

// ==== criterion 4: attention and perceiver against a naive oracle ===========

fn mat_mul_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = b[0].len();
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

fn softmax_oracle(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

#[allow(clippy::too_many_arguments)]
fn attention_oracle(
    q_in: &[Vec<f64>],
    k_in: &[Vec<f64>],
    v_in: &[Vec<f64>],
    w_q: &[Vec<Vec<f64>>],
    w_k: &[Vec<Vec<f64>>],
    w_v: &[Vec<Vec<f64>>],
    w_o: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let d_head = w_q[0][0].len();
    let scale = 1.0 / (d_head as f64).sqrt();
    let mut concat: Vec<Vec<f64>> = vec![Vec::new(); q_in.len()];
    for h in 0..w_q.len() {
        let q = mat_mul_oracle(q_in, &w_q[h]);
        let k = mat_mul_oracle(k_in, &w_k[h]);
        let v = mat_mul_oracle(v_in, &w_v[h]);
        for (i, q_row) in q.iter().enumerate() {
            let scores: Vec<f64> = k
                .iter()
                .map(|k_row| {
                    q_row.iter().zip(k_row).map(|(a, b)| a * b).sum::<f64>() * scale
                })
                .collect();
            let probs = softmax_oracle(&scores);
            for j in 0..d_head {
                concat[i].push(probs.iter().zip(&v).map(|(p, vr)| p * vr[j]).sum());
            }
        }
    }
    mat_mul_oracle(&concat, w_o)
}

#[test]
fn criterion_04_attention_and_perceiver_match_the_naive_oracle() {
    let mut rng = SplitMix64::new(14);
    let d = 8;

    for case in 0..100 {
        let heads = [1usize, 2, 4][case % 3];
        let d_head = d / heads;
        let q_in = random_rows(1 + rng.next_below(5) as usize, d, &mut rng);
        let k_in = random_rows(1 + rng.next_below(6) as usize, d, &mut rng);
        let v_in = random_rows(k_in.len(), d, &mut rng);
        let w_q: Vec<Vec<Vec<f64>>> =
            (0..heads).map(|_| random_rows(d, d_head, &mut rng)).collect();
        let w_k: Vec<Vec<Vec<f64>>> =
            (0..heads).map(|_| random_rows(d, d_head, &mut rng)).collect();
        let w_v: Vec<Vec<Vec<f64>>> =
            (0..heads).map(|_| random_rows(d, d_head, &mut rng)).collect();
        let w_o = random_rows(d, d, &mut rng);
        let weights = AttentionWeights::new(
            heads,
            w_q.iter().map(|m| to_matrix(m)).collect(),
            w_k.iter().map(|m| to_matrix(m)).collect(),
            w_v.iter().map(|m| to_matrix(m)).collect(),
            to_matrix(&w_o),
        )
        .unwrap();
        let got =
            attention(&to_matrix(&q_in), &to_matrix(&k_in), &to_matrix(&v_in), &weights)
                .unwrap();
        let want = attention_oracle(&q_in, &k_in, &v_in, &w_q, &w_k, &w_v, &w_o);
        for (i, row) in want.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!(
                    (got.get(i, j) - v).abs() <= 1e-9,
                    "case {case}: ({i}, {j}) differs by {}",
                    (got.get(i, j) - v).abs()
                );
            }
        }
    }

    // Perceiver resampling pins the output row count to the latent count.
    let weights = AttentionWeights::identity(d, 2).unwrap();
    let latents = to_matrix(&random_rows(3, d, &mut rng));
    for len in 1..=64usize {
        let input = to_matrix(&random_rows(len, d, &mut rng));
        let out = perceiver_resample(&input, &latents, &weights).unwrap();
        assert_eq!((out.rows(), out.cols()), (3, d), "input length {len}");
    }

    // Softmax rows are probability rows.
    for _ in 0..20 {
        let m = to_matrix(&random_rows(
            1 + rng.next_below(5) as usize,
            1 + rng.next_below(7) as usize,
            &mut rng,
        ));
        let soft = softmax_rows(&m).unwrap();
        for i in 0..soft.rows() {
            let sum: f64 = soft.row(i).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9, "row {i} sums to {sum}");
        }
    }
}

// ==== criterion 5: VQ assignment equals exhaustive search ====================

#[test]
fn criterion_05_vq_assignment_is_exhaustive_search() {
    let mut rng = SplitMix64::new(15);

    for _ in 0..100 {
        let n_codes = 2 + rng.next_below(10) as usize;
        let dim = 1 + rng.next_below(6) as usize;
        let codes = random_rows(n_codes, dim, &mut rng);
        let codebook = Codebook::new(to_matrix(&codes)).unwrap();
        let frames = random_rows(1 + rng.next_below(12) as usize, dim, &mut rng);
        let got = vq_assign(&to_matrix(&frames), &codebook).unwrap();
        for (frame, &assigned) in frames.iter().zip(&got) {
            let dists: Vec<f64> = codes
                .iter()
                .map(|c| frame.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect();
            let best = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            let want = dists.iter().position(|&v| v == best).unwrap();
            assert_eq!(assigned, want);
        }

        // Self-assignment: every code is its own nearest neighbour.
        let identity = vq_assign(codebook.codes(), &codebook).unwrap();
        let expected: Vec<usize> = (0..n_codes).collect();
        assert_eq!(identity, expected);
    }

    // Documented tie-break: equidistant frames take the lower index.
    let codebook =
        Codebook::new(to_matrix(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 5.0]])).unwrap();
    let tied = vq_assign(&to_matrix(&[vec![1.0, 0.0]]), &codebook).unwrap();
    assert_eq!(tied, vec![0]);
}

// ==== criterion 6: sampling behaviour ========================================

#[test]
fn criterion_06_sampling_matches_argmax_frequency_and_temperature_claims() {
    let mut rng = SplitMix64::new(16);

    // top_k = 1 is argmax on 10^4 random vectors.
    let greedy = SamplingConfig {
        top_k: 1,
        ..SamplingConfig::default()
    };
    for _ in 0..10_000 {
        let len = 2 + rng.next_below(15) as usize;
        let logits: Vec<f64> = (0..len).map(|_| rng.next_range(-5.0, 5.0)).collect();
        let got = sample_token(&logits, &greedy, &mut rng).unwrap();
        assert_eq!(got, argmax(&logits));
    }

    // Two-way logits (2, 1) at T = 1, k = 2: P(0) = 1/(1 + e^{-1}).
    let config = SamplingConfig {
        temperature: 1.0,
        top_k: 2,
        ..SamplingConfig::default()
    };
    let logits = [2.0, 1.0];
    let mut draw_rng = SplitMix64::new(1606);
    let draws = 100_000;
    let mut zeros = 0usize;
    for _ in 0..draws {
        if sample_token(&logits, &config, &mut draw_rng).unwrap() == 0 {
            zeros += 1;
        }
    }
    let frequency = zeros as f64 / f64::from(draws);
    let closed_form = 1.0 / (1.0 + (-1.0f64).exp());
    assert!(
        (frequency - closed_form).abs() <= 0.02,
        "frequency {frequency} vs closed form {closed_form}"
    );

    // Temperature rescales but never moves the distribution's argmax.
    for _ in 0..25 {
        let logits: Vec<f64> = (0..10).map(|_| rng.next_range(-3.0, 3.0)).collect();
        let want = argmax(&logits);
        for temperature in [0.5, 0.85, 1.0, 2.0] {
            let config = SamplingConfig {
                temperature,
                top_k: 6,
                ..SamplingConfig::default()
            };
            let dist = sampling_distribution(&logits, &config).unwrap();
            assert_eq!(argmax(&dist), want, "temperature {temperature}");
        }
    }
}

// ==== criterion 7: loss constants and identity cases =========================

#[test]
fn criterion_07_loss_constants_and_identities_are_exact() {
    // 0.01·2 + 1.0·3 under the default mixing weights.
    assert_eq!(lm_weighted(2.0, 3.0, &LossWeights::default()), 3.02);

    // Two traces, each adv_g = 0.25 and fm = 0.1; mel term 0.02:
    // 2·(0.25 + 2·0.1) + 45·0.02 = 1.8.
    let trace = DiscriminatorTrace {
        real_scores: vec![1.0],
        fake_scores: vec![0.5],
        real_features: vec![vec![0.1]],
        fake_features: vec![vec![0.0]],
    };
    let bins_1 = MelConfig {
        mel_bins: 1,
        ..MelConfig::default()
    };
    let real = MelSpectrogram::from_frames(vec![vec![0.0]], bins_1.clone()).unwrap();
    let fake = MelSpectrogram::from_frames(vec![vec![0.02]], bins_1.clone()).unwrap();
    let total = hifi_generator_total(
        &[trace.clone(), trace],
        &real,
        &fake,
        &LossWeights::default(),
    )
    .unwrap();
    assert_eq!(total, 1.8);

    // Identity cases vanish exactly.
    let optimal_d = DiscriminatorTrace {
        real_scores: vec![1.0, 1.0, 1.0],
        fake_scores: vec![0.0, 0.0, 0.0],
        real_features: Vec::new(),
        fake_features: Vec::new(),
    };
    assert_eq!(adv_d(&optimal_d).unwrap(), 0.0);
    let fooled_g = DiscriminatorTrace {
        real_scores: vec![0.5, 0.5],
        fake_scores: vec![1.0, 1.0],
        real_features: vec![vec![0.25, -0.5]],
        fake_features: vec![vec![0.25, -0.5]],
    };
    assert_eq!(adv_g(&fooled_g).unwrap(), 0.0);
    assert_eq!(fm_loss(&fooled_g).unwrap(), 0.0);
    let mel = MelSpectrogram::from_frames(
        vec![vec![0.5, -1.25], vec![0.0, 3.0]],
        MelConfig {
            mel_bins: 2,
            ..MelConfig::default()
        },
    )
    .unwrap();
    assert_eq!(mel_loss(&mel, &mel).unwrap(), 0.0);

    // A confidently correct prediction costs exactly nothing: the winning
    // logit swallows the log-sum-exp at this margin.
    let confident = TokenBatch::new(vec![vec![100.0, 0.0, 0.0]], vec![0]).unwrap();
    assert_eq!(cross_entropy(&confident), 0.0);
}

// ==== criterion 8: gradient checks ===========================================

#[test]
fn criterion_08_gradients_pass_finite_difference_checks() {
    let mut rng = SplitMix64::new(18);

    for _ in 0..50 {
        let vocab = 3 + rng.next_below(6) as usize;
        let steps = 1 + rng.next_below(4) as usize;
        let logits: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..vocab).map(|_| rng.next_range(-2.0, 2.0)).collect())
            .collect();
        let targets: Vec<usize> = (0..steps)
            .map(|_| rng.next_below(vocab as u64) as usize)
            .collect();
        let batch = TokenBatch::new(logits.clone(), targets.clone()).unwrap();
        let analytic: Vec<f64> = cross_entropy_grad(&batch).concat();
        let flat: Vec<f64> = logits.concat();
        let f = |x: &[f64]| {
            let rows: Vec<Vec<f64>> = x.chunks(vocab).map(<[f64]>::to_vec).collect();
            cross_entropy(&TokenBatch::new(rows, targets.clone()).unwrap())
        };
        let err = grad_check(f, &analytic, &flat, DEFAULT_GRAD_EPS).unwrap();
        assert!(err < DEFAULT_GRAD_TOLERANCE, "cross-entropy error {err}");
    }

    for _ in 0..50 {
        let frames = 1 + rng.next_below(3) as usize;
        let bins = 1 + rng.next_below(4) as usize;
        let config = MelConfig {
            mel_bins: bins,
            ..MelConfig::default()
        };
        let real =
            MelSpectrogram::from_frames(vec![vec![0.0; bins]; frames], config.clone())
                .unwrap();
        // Entries at least 0.2 from the reference: the finite difference
        // stays clear of the absolute-value kink.
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
        let fake_spec = MelSpectrogram::from_frames(fake.clone(), config.clone()).unwrap();
        let analytic: Vec<f64> = mel_loss_grad(&real, &fake_spec).unwrap().concat();
        let flat: Vec<f64> = fake.concat();
        let f = |x: &[f64]| {
            let rows: Vec<Vec<f64>> = x.chunks(bins).map(<[f64]>::to_vec).collect();
            mel_loss(
                &real,
                &MelSpectrogram::from_frames(rows, config.clone()).unwrap(),
            )
            .unwrap()
        };
        let err = grad_check(f, &analytic, &flat, DEFAULT_GRAD_EPS).unwrap();
        assert!(err < DEFAULT_GRAD_TOLERANCE, "mel subgradient error {err}");
    }
}

// ==== criteria 9 and 11: the binary end to end ===============================

fn run_forge(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_forge"))
        .current_dir(dir)
        .args(args)
        .arg("--quiet")
        .output()
        .expect("forge binary runs");
    assert!(
        out.status.success(),
        "forge {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// The six-record decision table, derived by hand:
///
/// - dur-short: 8 820 samples / 22 050 Hz = 0.4 s < 0.5 → duration-min
/// - dur-long: 253 575 / 22 050 = 11.5 s > 11 → duration-max
/// - text-long: 201 characters > 200 → text-length
/// - silent: 16 muted frames of 40 → ratio 0.4 > 0.35 → silence
/// - ratio-low: 25 chars / 5 s = 5 chars/s < 6 → ratio-band
/// - pass: 48 chars / 6 s = 8 chars/s, inside [6, 25] → accept
const GOLDEN_REPORT: &str = concat!(
    "{\"id\":\"dur-short\",\"status\":\"reject\",\"rule\":\"duration-min\",\"value\":0.4}\n",
    "{\"id\":\"dur-long\",\"status\":\"reject\",\"rule\":\"duration-max\",\"value\":11.5}\n",
    "{\"id\":\"text-long\",\"status\":\"reject\",\"rule\":\"text-length\",\"value\":201.0}\n",
    "{\"id\":\"silent\",\"status\":\"reject\",\"rule\":\"silence\",\"value\":0.4}\n",
    "{\"id\":\"ratio-low\",\"status\":\"reject\",\"rule\":\"ratio-band\",\"value\":5.0}\n",
    "{\"id\":\"pass\",\"status\":\"accept\"}\n",
);

#[test]
fn criterion_09_canonical_records_produce_the_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    run_forge(dir.path(), &["make-fixtures", "--out-dir", "fx"]);
    run_forge(
        dir.path(),
        &[
            "filter",
            "--manifest",
            "fx/manifest.jsonl",
            "--policy",
            "fx/policy.cfg",
            "--out-accepted",
            "accepted.jsonl",
            "--out-report",
            "report.jsonl",
        ],
    );
    let report = fs::read_to_string(dir.path().join("report.jsonl")).unwrap();
    assert_eq!(report, GOLDEN_REPORT);
    let accepted = fs::read_to_string(dir.path().join("accepted.jsonl")).unwrap();
    let ids: Vec<&str> = accepted.lines().collect();
    assert_eq!(ids.len(), 1);
    assert!(ids[0].contains("\"id\":\"pass\""));
}

// ==== criterion 10: prompt policy ============================================

#[test]
fn criterion_10_prompt_policy_halves_short_clips_and_bounds_long_ones() {
    let policy = PromptPolicy::default();
    let mut rng = SplitMix64::new(20);

    let span = select_prompt_span(0.8, &policy, &mut rng).unwrap();
    assert_eq!(span.len_s, 0.4);

    for _ in 0..10_000 {
        let duration = rng.next_range(6.0, 40.0);
        let span = select_prompt_span(duration, &policy, &mut rng).unwrap();
        assert!(
            (1.0..=6.0).contains(&span.len_s),
            "length {} for a {duration} s clip",
            span.len_s
        );
        assert!(span.start_s >= 0.0);
        assert!(span.start_s + span.len_s <= duration + 1e-9);
    }
}

// ==== criterion 11: end-to-end determinism ===================================

fn tree_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut stack = vec![dir.to_path_buf()];
    let mut files = Vec::new();
    while let Some(current) = stack.pop() {
        for entry in fs::read_dir(&current).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p.strip_prefix(dir).unwrap().to_path_buf(), bytes)
        })
        .collect()
}

fn full_pipeline(dir: &Path) {
    run_forge(dir, &["--seed", "42", "make-fixtures", "--out-dir", "fx"]);
    run_forge(
        dir,
        &[
            "--seed",
            "42",
            "filter",
            "--manifest",
            "fx/manifest.jsonl",
            "--policy",
            "fx/policy.cfg",
            "--out-accepted",
            "accepted.jsonl",
            "--out-report",
            "report.jsonl",
        ],
    );
    run_forge(
        dir,
        &[
            "--seed",
            "42",
            "eval",
            "--pairs",
            "fx/pairs.jsonl",
            "--metrics",
            "cer,secs,sbs,de,mos",
            "--out",
            "eval.jsonl",
        ],
    );
}

#[test]
fn criterion_11_pipeline_reruns_are_byte_identical() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    full_pipeline(first.path());
    full_pipeline(second.path());

    let a = tree_bytes(first.path());
    let b = tree_bytes(second.path());
    assert_eq!(a.len(), b.len());
    for ((path_a, bytes_a), (path_b, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(path_a, path_b);
        assert_eq!(
            bytes_a, bytes_b,
            "{} differs between identically seeded runs",
            path_a.display()
        );
    }
}
