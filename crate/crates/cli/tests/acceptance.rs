//! Acceptance suite. Runs every top-level criterion in order and prints one
//! PASS/FAIL line per criterion; exits non-zero if any failed.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use pmu_core::audio::{synthesize, Component, CorpusPreset, CorpusSpec, SynthSpec};
use pmu_core::detect::{Classifier, Detector, DetectorConfig, HitEvent};
use pmu_core::dsp::{design_lowpass, filter_apply, spectrogram, FrontEnd, SpectrogramConfig};
use pmu_core::eval::{merge_classes, ClassMapping, ConfusionMatrix};
use pmu_core::game::{
    log_from_jsonl, log_to_jsonl, replay, Command as MatchCommand, MatchConfig, MatchEvent, MatchState,
};
use pmu_core::nn::{forward, loss_and_gradients, Arch, ModelParams, Tensor};
use pmu_core::train::{
    lr_at_step, split_dataset, split_features, synthesize_features, train_model, Checkpoint, DatasetManifest,
    LabelSet, ManifestEntry, SplitRatio, TrainConfig,
};
use pmu_serve::{ServeConfig, Service};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const RATE: u32 = 44_100;

// Tolerances and budgets.
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_EPS: f64 = 1e-4;
const FILTER_CUTOFF_DB: f64 = -3.01;
const FILTER_CUTOFF_TOL_DB: f64 = 0.1;
const FILTER_STOP_DB: f64 = -60.0;
const E2E_MIN_ACCURACY: f64 = 0.95;
const MACRO_TOL: f64 = 1e-9;
const HOP_BUDGET_MS: f64 = 20.0;
const STATE_LATENCY: Duration = Duration::from_millis(100);

type Outcome = Result<String, String>;

struct Ctx {
    dir: tempfile::TempDir,
    checkpoint: Option<PathBuf>,
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(start: Instant, budget: Duration, what: &str) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure!(t < budget, "{what} took {t:?}, budget {budget:?}");
    Ok(t)
}

// ---------------------------------------------------------------------------

fn shape(_: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let spec = SynthSpec::new(RATE, 1.0).with(Component::tone(1000.0, 0.5, 0.0, 1.0));
    let clip = synthesize(&spec, 0).map_err(|e| e.to_string())?;
    let s = spectrogram(&clip, &SpectrogramConfig::default()).map_err(|e| e.to_string())?;
    // T = 1 + floor((N - W) / H) with N = 44100, W = 1323, H = 882
    let expected_t = 1 + (44_100 - 1323) / 882;
    ensure!(expected_t == 49, "frame formula gives {expected_t}");
    ensure!(s.shape() == (49, 40), "spectrogram shape {:?}", s.shape());
    ensure!(matches!(FrontEnd::assist_tone().input_shape(), Ok((49, 40))), "front end shape");

    let arch = Arch::new((49, 40), 4);
    ensure!(arch.conv_output_shape() == (25, 20, 8), "conv output {:?}", arch.conv_output_shape());
    ensure!(arch.fc_input_len() == 4000, "flattened length {}", arch.fc_input_len());
    let params = ModelParams::init(arch, 1).map_err(|e| e.to_string())?;
    let fc = params.tensors()[2].shape().to_vec();
    ensure!(fc == [4, 4000], "fc weights shape {fc:?}");
    let out = forward(&Tensor::from(s), &params).map_err(|e| e.to_string())?;
    ensure!(out.hidden.len() == 4000, "hidden length {}", out.hidden.len());
    let t = within(start, Duration::from_secs(1), "shape check")?;
    Ok(format!("49x40 -> 25x20x8 = 4000, fc 4x4000 ({t:.0?})"))
}

// ---------------------------------------------------------------------------

fn oracle_loss(params: &ModelParams, batch: &[(Tensor, usize)]) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|(x, y)| -forward(x, params).unwrap().probabilities[*y].ln())
        .sum();
    total / batch.len() as f64
}

fn relu_masks(params: &ModelParams, batch: &[(Tensor, usize)]) -> Vec<bool> {
    batch
        .iter()
        .flat_map(|(x, _)| forward(x, params).unwrap().pre_activation.into_iter().map(|v| v > 0.0))
        .collect()
}

fn gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = Arch::new((7, 6), 3);
    let mut params = ModelParams::zeros(arch).unwrap();
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    let batch: Vec<(Tensor, usize)> = (0..2)
        .map(|_| {
            let data = (0..42).map(|_| rng.random_range(-1.0..1.0)).collect();
            (Tensor::new(vec![7, 6], data).unwrap(), rng.random_range(0..3))
        })
        .collect();
    let refs: Vec<(&Tensor, usize)> = batch.iter().map(|(x, y)| (x, *y)).collect();
    let (_, grads) = loss_and_gradients(&refs, &params).unwrap();
    let base_mask = relu_masks(&params, &batch);

    let mut worst: f64 = 0.0;
    for (ti, g) in grads.tensors().iter().enumerate() {
        for i in 0..g.data().len() {
            let analytic = g.data()[i];
            let mut eps = GRAD_EPS;
            let numeric = loop {
                let probe = |delta: f64| {
                    let mut p = params.clone();
                    p.tensors_mut()[ti].data_mut()[i] += delta;
                    (oracle_loss(&p, &batch), relu_masks(&p, &batch))
                };
                let (lp, mp) = probe(eps);
                let (lm, mm) = probe(-eps);
                if (mp == base_mask && mm == base_mask) || eps < 1e-9 {
                    break (lp - lm) / (2.0 * eps);
                }
                eps /= 10.0;
            };
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

fn gradient_oracle(_: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let errors: Vec<(u64, f64)> = (0..100).map(|s| (s, gradient_error(s))).collect();
    let (seed, worst) = errors.iter().copied().fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    ensure!(worst < GRAD_REL_TOL, "max relative error {worst:.3e} at seed {seed}");
    let t = within(start, Duration::from_secs(30), "gradient oracle")?;
    Ok(format!("100 seeds, max rel. error {worst:.2e} ({t:.1?})"))
}

// ---------------------------------------------------------------------------

/// Amplitude of the `freq` component of `x`, by projection onto sin/cos over
/// a whole number of periods.
fn tone_amplitude(x: &[f32], freq: f64) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for (n, &v) in x.iter().enumerate() {
        let w = 2.0 * std::f64::consts::PI * freq * n as f64 / RATE as f64;
        s += v as f64 * w.sin();
        c += v as f64 * w.cos();
    }
    2.0 * s.hypot(c) / x.len() as f64
}

fn filter_spec(_: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let coeffs = design_lowpass(252.0, RATE as f64).map_err(|e| e.to_string())?;
    let sweep = [32.0, 64.0, 128.0, 252.0, 500.0, 1000.0, 2000.0, 5000.0, 10_000.0];
    let mut gains = Vec::new();
    for &f in &sweep {
        let clip = synthesize(&SynthSpec::new(RATE, 1.5).with(Component::tone(f, 0.5, 0.0, 1.5)), 0)
            .map_err(|e| e.to_string())?;
        let y = filter_apply(&coeffs, &clip).map_err(|e| e.to_string())?;
        // skip the transient, then measure one second (an integer number of periods for every sweep tone)
        let tail = RATE as usize / 2..RATE as usize / 2 + RATE as usize;
        let g = 20.0 * (tone_amplitude(&y.channel(0)[tail.clone()], f) / tone_amplitude(&clip.channel(0)[tail], f)).log10();
        gains.push((f, g));
    }
    let at = |f: f64| gains.iter().find(|(x, _)| *x == f).unwrap().1;
    let cut = at(252.0);
    let stop = at(10_000.0);
    ensure!((cut - FILTER_CUTOFF_DB).abs() <= FILTER_CUTOFF_TOL_DB, "gain at 252 Hz {cut:.3} dB");
    ensure!(stop <= FILTER_STOP_DB, "gain at 10 kHz {stop:.2} dB");
    ensure!(gains.windows(2).all(|w| w[1].1 < w[0].1), "sweep not monotone: {gains:?}");
    ensure!(at(32.0).abs() < 0.01, "passband gain {:.4} dB", at(32.0));
    let t = within(start, Duration::from_secs(5), "filter sweep")?;
    Ok(format!("252 Hz {cut:.3} dB, 10 kHz {stop:.1} dB ({t:.1?})"))
}

// ---------------------------------------------------------------------------

fn pmu(args: &[&str], paths: &[&Path]) -> Result<Value, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pmu"));
    cmd.env_remove("PMU_CONFIG").args(args);
    for p in paths {
        cmd.arg(p);
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "pmu {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).map_err(|e| format!("pmu {args:?} output: {e}"))
}

fn end_to_end(ctx: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let root = ctx.dir.path();
    let corpus = root.join("corpus");
    let splits = root.join("splits");
    let ckpt = root.join("model.ckpt");
    let synth = pmu(&["synth", "--preset", "five", "--clips-per-class", "200", "--seed", "1", "--out"], &[&corpus])?;
    ensure!(synth["clips"] == 1000, "corpus size {}", synth["clips"]);
    pmu(
        &["train", "--steps", "1500", "--seed", "1", "--manifest"],
        &[&corpus.join("manifest.jsonl"), Path::new("--out"), &ckpt, Path::new("--splits-dir"), &splits],
    )?;
    let report = pmu(&["eval", "--checkpoint"], &[&ckpt, Path::new("--manifest"), &splits.join("test.jsonl")])?;
    ctx.checkpoint = Some(ckpt);

    let counts: Vec<Vec<u64>> = serde_json::from_value(report["counts"].clone()).map_err(|e| e.to_string())?;
    let total: u64 = counts.iter().flatten().sum();
    let correct: u64 = (0..counts.len()).map(|i| counts[i][i]).sum();
    let accuracy = correct as f64 / total as f64;
    let recalls: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(i, row)| row[i] as f64 / row.iter().sum::<u64>() as f64)
        .collect();
    let mean_recall = recalls.iter().sum::<f64>() / recalls.len() as f64;
    let macro_acc = report["macro_accuracy"].as_f64().ok_or("no macro accuracy")?;
    ensure!(total == 100, "test set size {total}");
    ensure!(report["micro_accuracy"].as_f64() == Some(accuracy), "reported accuracy disagrees with counts");
    ensure!(accuracy >= E2E_MIN_ACCURACY, "test accuracy {accuracy:.3}, counts {counts:?}");
    ensure!((macro_acc - mean_recall).abs() <= MACRO_TOL, "macro {macro_acc} vs mean recall {mean_recall}");
    let t = within(start, Duration::from_secs(600), "end-to-end run")?;
    Ok(format!("test accuracy {accuracy:.3}, macro {macro_acc:.4} = mean recall ({t:.1?})"))
}

// ---------------------------------------------------------------------------

struct OracleMerge {
    classes: Vec<String>,
    counts: Vec<Vec<u64>>,
}

fn brute_force_merge(cm: &ConfusionMatrix, mapping: &ClassMapping) -> OracleMerge {
    let mut classes: Vec<String> = Vec::new();
    for c in cm.classes() {
        let target = &mapping[c];
        if !classes.contains(target) {
            classes.push(target.clone());
        }
    }
    let index = |name: &str| classes.iter().position(|c| c == name).unwrap();
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (t, row) in cm.counts().iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            // one relabelled example at a time
            for _ in 0..n {
                let nt = index(&mapping[&cm.classes()[t]]);
                let np = index(&mapping[&cm.classes()[p]]);
                counts[nt][np] += 1;
            }
        }
    }
    OracleMerge { classes, counts }
}

fn oracle_accuracies(m: &OracleMerge) -> (f64, Option<f64>) {
    let total: u64 = m.counts.iter().flatten().sum();
    let diag: u64 = (0..m.counts.len()).map(|i| m.counts[i][i]).sum();
    let mut sum = 0.0;
    for (i, row) in m.counts.iter().enumerate() {
        let n: u64 = row.iter().sum();
        if n == 0 {
            return (diag as f64 / total as f64, None);
        }
        sum += row[i] as f64 / n as f64;
    }
    (diag as f64 / total as f64, Some(sum / m.counts.len() as f64))
}

fn merge_oracle(_: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut with_empty = 0;
    for trial in 0..1000 {
        let k = rng.random_range(2..=8);
        let classes: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
        let counts: Vec<Vec<u64>> = (0..k)
            .map(|_| {
                let sparse = rng.random_bool(0.1);
                (0..k).map(|_| if sparse { 0 } else { rng.random_range(0..40) }).collect()
            })
            .collect();
        let groups = rng.random_range(1..=k);
        let mapping: ClassMapping = classes
            .iter()
            .map(|c| (c.clone(), format!("g{}", rng.random_range(0..groups))))
            .collect();
        let cm = ConfusionMatrix::from_counts(classes, counts);
        if cm.total() == 0 {
            continue;
        }
        let merged = merge_classes(&cm, &mapping).map_err(|e| format!("trial {trial}: {e}"))?;
        let oracle = brute_force_merge(&cm, &mapping);
        ensure!(merged.classes() == oracle.classes.as_slice(), "trial {trial}: class order");
        ensure!(merged.counts() == oracle.counts.as_slice(), "trial {trial}: counts");
        let (micro, macro_acc) = oracle_accuracies(&oracle);
        ensure!(merged.micro_accuracy().ok() == Some(micro), "trial {trial}: micro accuracy");
        match macro_acc {
            Some(m) => ensure!(merged.overall_accuracy().ok() == Some(m), "trial {trial}: macro accuracy"),
            None => {
                with_empty += 1;
                ensure!(merged.overall_accuracy().is_err(), "trial {trial}: empty row must be an error");
            }
        }
    }
    let t = within(start, Duration::from_secs(10), "merge oracle")?;
    Ok(format!("1000 matrices exact ({with_empty} with an empty merged row) ({t:.1?})"))
}

// ---------------------------------------------------------------------------

fn split_and_schedule(_: &mut Ctx) -> Outcome {
    for (n, expected) in [(1200usize, (960, 120, 120)), (540, (432, 54, 54))] {
        let labels = LabelSet::six_class();
        let entries = labels
            .classes()
            .iter()
            .flat_map(|c| {
                (0..n).map(move |i| ManifestEntry {
                    path: format!("{c}/{i}.wav").into(),
                    label: c.clone(),
                    location: Default::default(),
                    clothing: Default::default(),
                })
            })
            .collect();
        let manifest = DatasetManifest::new(entries, labels).map_err(|e| e.to_string())?;
        let split = split_dataset(&manifest, SplitRatio::default(), 7).map_err(|e| e.to_string())?;
        for (((c, tr), (_, va)), (_, te)) in split
            .train
            .class_counts()
            .into_iter()
            .zip(split.val.class_counts())
            .zip(split.test.class_counts())
        {
            ensure!((tr, va, te) == expected, "{n} per class: {c} split {:?}", (tr, va, te));
        }
    }
    let cfg = TrainConfig::default();
    let lr = |s| lr_at_step(s, &cfg).map_err(|e| e.to_string());
    ensure!(lr(0)? == 0.001 && lr(11_999)? == 0.001, "first phase");
    ensure!(lr(12_000)? == 0.0001 && lr(14_999)? == 0.0001, "second phase");
    ensure!(lr_at_step(15_000, &cfg).is_err(), "step past the schedule must be rejected");
    Ok("1200 -> 960/120/120, 540 -> 432/54/54; lr 1e-3 @0,11999; 1e-4 @12000,14999".into())
}

// ---------------------------------------------------------------------------

fn stream(duration_s: f64, hits_s: &[f64], seed: u64) -> Vec<f32> {
    let mut spec = SynthSpec::new(RATE, duration_s)
        .with(Component::tone(10_000.0, 0.1, 0.0, duration_s))
        .with(Component::Noise {
            amplitude: 0.004,
            start_s: 0.0,
            duration_s,
        });
    for &t in hits_s {
        spec = spec
            .with(Component::Burst {
                amplitude: 0.25,
                start_s: t,
                duration_s: 0.3,
                decay_rate: 25.0,
            })
            .with(Component::tone(3000.0, 0.35, t, 0.3));
    }
    synthesize(&spec, seed).unwrap().channel(0).to_vec()
}

type Trace = (Vec<(u64, usize, Vec<u64>)>, Vec<HitEvent>);

fn run_stream(ckpt: &Checkpoint, samples: &[f32], chunk: usize) -> Result<(Trace, Duration), String> {
    let mut det = Detector::new("pmu-1", Classifier::new(ckpt.clone()), DetectorConfig::default())
        .map_err(|e| e.to_string())?;
    let mut decisions = Vec::new();
    let mut events = Vec::new();
    let start = Instant::now();
    for c in samples.chunks(chunk) {
        for d in det.push_decisions(c).map_err(|e| e.to_string())? {
            let bits = d.probabilities.iter().map(|p| p.to_bits()).collect();
            decisions.push((d.end_sample, d.class, bits));
            events.extend(d.event);
        }
    }
    Ok(((decisions, events), start.elapsed()))
}

fn streaming(ctx: &mut Ctx) -> Outcome {
    let path = ctx.checkpoint.as_ref().ok_or("no checkpoint from the end-to-end criterion")?;
    let ckpt = Checkpoint::load(&std::fs::read(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let samples = stream(10.0, &[2.0, 5.0, 7.5], 31);

    let (reference, elapsed) = run_stream(&ckpt, &samples, 441)?;
    let hops = reference.0.len();
    ensure!(hops == 1 + (samples.len() - 44_100) / 882, "{hops} decisions");
    let per_hop_ms = elapsed.as_secs_f64() * 1000.0 / hops as f64;
    ensure!(per_hop_ms < HOP_BUDGET_MS, "mean per-hop {per_hop_ms:.2} ms");

    for chunk in [64, 441, 4410, 44_100] {
        let (trace, _) = run_stream(&ckpt, &samples, chunk)?;
        ensure!(trace == reference, "chunk size {chunk} changed the decision/event stream");
    }
    let events: Vec<String> = reference.1.iter().map(|e| format!("{}@{}ms", e.location, e.timestamp_ms)).collect();
    Ok(format!(
        "mean per-hop {per_hop_ms:.2} ms over {hops} hops; events [{}] identical across chunk sizes 64/441/4410/44100",
        events.join(", ")
    ))
}

// ---------------------------------------------------------------------------

fn random_event(rng: &mut ChaCha8Rng, last_seq: u64) -> MatchEvent {
    let pmus = ["a1", "a2", "b1", "ghost"];
    let locations = ["hand", "forearm", "upper_arm", "torso", "elbow"];
    match rng.random_range(0..100) {
        0..=59 => MatchEvent::Hit(HitEvent {
            pmu_id: pmus[rng.random_range(0..pmus.len())].into(),
            location: locations[rng.random_range(0..locations.len())].into(),
            confidence: rng.random_range(0.8..1.0),
            timestamp_ms: 0,
        }),
        60..=69 => MatchEvent::Override {
            target_seq: rng.random_range(0..=last_seq + 1),
            location: (rng.random_bool(0.8)).then(|| locations[rng.random_range(0..4)].to_string()),
        },
        70..=74 => MatchEvent::SwordClash {
            source: "sword".into(),
            intensity: Some(rng.random_range(0.0..1.0)),
        },
        _ => MatchEvent::Command(match rng.random_range(0..9) {
            0 | 1 => MatchCommand::Start,
            2 => MatchCommand::Pause,
            3 => MatchCommand::Resume,
            4 => MatchCommand::End,
            5 => MatchCommand::Reset,
            6 => MatchCommand::Bind {
                pmu_id: "b2".into(),
                player_id: "p2".into(),
            },
            7 => MatchCommand::Assign {
                player_id: "p1".into(),
                role: ["tank", "striker", "balanced"][rng.random_range(0..3)].into(),
            },
            _ => MatchCommand::Confirm {
                target_seq: rng.random_range(0..=last_seq + 1),
            },
        }),
    }
}

fn determinism_and_replay(_: &mut Ctx) -> Outcome {
    let spec = CorpusSpec::preset(CorpusPreset::FiveClass, 20, 5);
    let fe = FrontEnd::assist_tone();
    let set = synthesize_features(&spec, &fe).map_err(|e| e.to_string())?;
    ensure!(
        set.inputs == synthesize_features(&spec, &fe).map_err(|e| e.to_string())?.inputs,
        "featurization not deterministic"
    );
    let [train, val, _] = split_features(&set, SplitRatio::default(), 5).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        batch_size: 20,
        eval_interval: 25,
        seed: 5,
        ..TrainConfig::default()
    }
    .scaled_to(200);
    let arch = Arch::new(fe.input_shape().map_err(|e| e.to_string())?, 5);
    let runs: Vec<(Vec<[u64; 4]>, Vec<u8>)> = (0..2)
        .map(|_| {
            let out = train_model(&train, &val, arch.clone(), &cfg).unwrap();
            let history = out
                .history
                .iter()
                .map(|r| [r.step, r.lr.to_bits(), r.train_loss.to_bits(), r.val_accuracy.to_bits()])
                .collect();
            let bytes = Checkpoint::new(out.params, fe.clone(), set.label_set.clone()).unwrap().save();
            (history, bytes)
        })
        .collect();
    ensure!(runs[0].0 == runs[1].0, "training history differs between identical runs");
    ensure!(runs[0].1 == runs[1].1, "checkpoint bytes differ between identical runs");
    ensure!(runs[0].0.len() == 8, "{} history rows", runs[0].0.len());

    let mut config = MatchConfig::default();
    config.refractory_ms = 300;
    config.players[0].pmus = vec!["a1".into(), "a2".into()];
    config.players[1].pmus = vec!["b1".into()];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut entries = 0;
    for _ in 0..200 {
        let mut live = MatchState::new(config.clone()).map_err(|e| e.to_string())?;
        let mut ts = 0;
        for _ in 0..rng.random_range(1..150) {
            ts += rng.random_range(0..400);
            let ev = random_event(&mut rng, live.last_seq());
            live.apply_event(ev, ts);
        }
        entries += live.log.len();
        let recorded = log_from_jsonl(&log_to_jsonl(&live.log)).map_err(|e| e.to_string())?;
        let rebuilt = replay(config.clone(), &recorded).map_err(|e| e.to_string())?;
        ensure!(rebuilt == live, "replayed state differs from the live state");
    }
    Ok(format!("two runs bit-identical (8 history rows, checkpoint bytes); 200 logs / {entries} events replay exactly"))
}

// ---------------------------------------------------------------------------

async fn service_match() -> Outcome {
    use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = ServeConfig {
        tcp_port: 0,
        http_port: 0,
        token: "acceptance".into(),
        event_log: Some(dir.path().join("events.jsonl")),
        ..Default::default()
    };
    cfg.match_config.refractory_ms = 0;
    cfg.match_config.players[0].pmus = vec!["pmu-p1".into()];
    cfg.match_config.players[1].pmus = vec!["pmu-p2".into()];
    let match_config = cfg.match_config.clone();
    let svc = Service::start(cfg).await.map_err(|e| e.to_string())?;
    let state_url = format!("http://{}/state", svc.http_addr());
    let client = reqwest::Client::new();
    let get_state = || async {
        client.get(&state_url).send().await.unwrap().json::<Value>().await.unwrap()
    };

    let (r, mut w) = tokio::net::TcpStream::connect(svc.tcp_addr()).await.map_err(|e| e.to_string())?.into_split();
    let mut lines = BufReader::new(r).lines();
    let mut send = async |msg: Value| -> Value {
        w.write_all(format!("{msg}\n").as_bytes()).await.unwrap();
        let line = tokio::time::timeout(Duration::from_secs(5), lines.next_line()).await.unwrap().unwrap().unwrap();
        serde_json::from_str(&line).unwrap()
    };
    let auth = send(json!({"type": "command", "seq": 1, "payload": {"command": "auth", "token": "acceptance"}})).await;
    ensure!(auth["type"] == "ack", "auth: {auth}");
    let start = send(json!({"type": "command", "seq": 2, "payload": {"command": "start"}})).await;
    ensure!(start["payload"]["disposition"]["status"] == "applied", "start: {start}");

    let hit = |seq: u64, pmu: &str| {
        json!({"type": "hit", "seq": seq, "ts_ms": 0,
               "payload": {"pmu_id": pmu, "location": "torso", "confidence": 0.93, "timestamp_ms": seq}})
    };
    let mut seq = 3;
    let mut worst = Duration::ZERO;
    let mut hp = 100u64;
    let mut duplicates = 0;
    loop {
        // p1 strikes p2's torso: balanced 10 * 1.5 - 5 = 10 damage
        let before = Instant::now();
        let ack = send(hit(seq, "pmu-p2")).await;
        ensure!(ack["payload"]["disposition"]["status"] == "applied", "hit {seq}: {ack}");
        let seen = loop {
            let state = get_state().await;
            if state["players"][1]["hp"].as_u64() == Some(hp - 10) {
                break before.elapsed();
            }
            ensure!(before.elapsed() < Duration::from_secs(1), "hp never dropped after hit {seq}");
        };
        worst = worst.max(seen);
        hp -= 10;

        if seq % 3 == 0 {
            let log_len = get_state().await["log_len"].clone();
            let again = send(hit(seq, "pmu-p2")).await;
            ensure!(again["payload"]["duplicate"] == true, "resend of {seq}: {again}");
            let after = get_state().await;
            ensure!(after["players"][1]["hp"].as_u64() == Some(hp), "duplicate seq {seq} applied twice");
            ensure!(after["log_len"] == log_len, "duplicate seq {seq} logged");
            duplicates += 1;
        }
        seq += 1;
        if hp == 0 {
            break;
        }
    }
    let end = get_state().await;
    ensure!(end["phase"] == "finished" && end["winner"] == "p1", "final state: {end}");
    ensure!(worst < STATE_LATENCY, "hit to /state latency {worst:?}");

    let text = std::fs::read_to_string(dir.path().join("events.jsonl")).map_err(|e| e.to_string())?;
    let rebuilt = replay(match_config, &log_from_jsonl(&text).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!(&rebuilt == svc.handle().state().as_ref(), "event log does not replay to the live state");
    svc.shutdown();
    Ok(format!(
        "match to KO in {} hits; worst hit->/state {worst:.1?}; {duplicates} duplicate seqs applied once; log replays",
        seq - 3
    ))
}

fn service(_: &mut Ctx) -> Outcome {
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(service_match())
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn(&mut Ctx) -> Outcome); 9] = [
        ("shape reproduction", shape),
        ("gradient oracle", gradient_oracle),
        ("filter spec", filter_spec),
        ("synthetic end-to-end", end_to_end),
        ("merged-metric oracle", merge_oracle),
        ("split and schedule", split_and_schedule),
        ("streaming real-time budget", streaming),
        ("determinism and replay", determinism_and_replay),
        ("service integration", service),
    ];
    let mut ctx = Ctx {
        dir: tempfile::tempdir().expect("tempdir"),
        checkpoint: None,
    };
    let mut failed = Vec::new();
    println!("acceptance: {} criteria", criteria.len());
    for (name, f) in criteria {
        let outcome = match catch_unwind(AssertUnwindSafe(|| f(&mut ctx))) {
            Ok(o) => o,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                println!("FAIL  {name}: {why}");
                failed.push(name);
            }
        }
    }
    let summary: BTreeMap<&str, usize> = [("passed", criteria.len() - failed.len()), ("failed", failed.len())].into();
    println!("acceptance summary: {summary:?}");
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
