//! End-to-end: synthetic corpus → features → training → eval → streaming.

use std::sync::OnceLock;

use pmu_core::audio::{synthesize, AudioClip, Component, CorpusPreset, CorpusSpec, SynthSpec};
use pmu_core::detect::{Classifier, Detector, DetectorConfig};
use pmu_core::dsp::FrontEnd;
use pmu_core::eval::{confusion, report, RunMetadata};
use pmu_core::nn::Arch;
use pmu_core::train::{predict_all, split_features, synthesize_features, train_model, Checkpoint, FeatureSet, TrainConfig};

struct Trained {
    classifier: Classifier,
    test: FeatureSet,
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec = CorpusSpec::preset(CorpusPreset::FiveClass, 200, 1);
        let fe = FrontEnd::assist_tone();
        let all = synthesize_features(&spec, &fe).unwrap();
        let cfg = TrainConfig::default().scaled_to(1500);
        let [train, val, test] = split_features(&all, cfg.split, cfg.seed).unwrap();
        let arch = Arch::new(fe.input_shape().unwrap(), all.label_set.len());
        let out = train_model(&train, &val, arch, &cfg).unwrap();
        let ckpt = Checkpoint::new(out.params, fe, all.label_set.clone()).unwrap();
        Trained {
            classifier: Classifier::new(ckpt),
            test,
        }
    })
}

const RATE: u32 = 44_100;

/// Continuous assist tone with a light noise floor, plus forearm-like hits
/// starting at each of `hits_s`.
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

#[test]
fn synthetic_corpus_reaches_target_accuracy() {
    let t = trained();
    let params = &t.classifier.checkpoint().params;
    let preds = predict_all(params, &t.test.inputs).unwrap();
    let cm = confusion(&preds, &t.test.labels, t.test.label_set.classes()).unwrap();
    let acc = cm.micro_accuracy().unwrap();
    assert!(acc >= 0.95, "test accuracy {acc}\n{}", cm.to_csv());

    let r = report(&cm, RunMetadata::default(), None).unwrap();
    let recalls = cm.per_class_accuracy().unwrap();
    let mean = recalls.iter().sum::<f64>() / recalls.len() as f64;
    assert!((r.raw.macro_accuracy.unwrap() - mean).abs() <= 1e-9);
}

#[test]
fn classify_windows() {
    let c = &trained().classifier;
    let quiet = AudioClip::mono(RATE, stream(1.0, &[], 5)).unwrap();
    let (class, probs) = c.classify_window(&quiet).unwrap();
    assert_eq!(c.class_name(class), "silence", "{probs:?}");
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let hit = AudioClip::mono(RATE, stream(1.0, &[0.4], 6)).unwrap();
    let (class, probs) = c.classify_window(&hit).unwrap();
    assert_eq!(c.class_name(class), "forearm");
    assert!(probs[class] > DetectorConfig::default().threshold, "{probs:?}");
}

fn detect_all(samples: &[f32], chunk: usize) -> Vec<pmu_core::detect::HitEvent> {
    let mut d = Detector::new("pmu-1", trained().classifier.clone(), DetectorConfig::default()).unwrap();
    samples.chunks(chunk).flat_map(|c| d.push_samples(c).unwrap()).collect()
}

#[test]
fn quiet_stream_emits_nothing() {
    assert!(detect_all(&stream(3.0, &[], 7), 4410).is_empty());
    assert!(detect_all(&vec![0.0; 3 * 44_100], 4410).is_empty());
}

#[test]
fn single_burst_emits_one_event() {
    let events = detect_all(&stream(3.0, &[1.2], 8), 4410);
    assert_eq!(events.len(), 1, "{events:?}");
    let e = &events[0];
    assert_eq!(e.location, "forearm");
    assert!(e.confidence >= 0.8);
    assert!(e.timestamp_ms >= 1200 && e.timestamp_ms <= 2600, "{e:?}");
}

#[test]
fn close_bursts_collapse_under_refractory() {
    let events = detect_all(&stream(3.0, &[1.2, 1.3], 9), 4410);
    assert_eq!(events.len(), 1, "{events:?}");
}

#[test]
fn chunking_invariance_on_trained_model() {
    let samples = stream(4.0, &[0.7, 2.5], 10);
    let reference = detect_all(&samples, samples.len());
    assert_eq!(reference.len(), 2, "{reference:?}");
    for chunk in [64, 441, 4410, 44_100] {
        assert_eq!(detect_all(&samples, chunk), reference, "chunk {chunk}");
    }
    for pair in reference.windows(2) {
        assert!(pair[1].timestamp_ms - pair[0].timestamp_ms >= 500);
    }
}
