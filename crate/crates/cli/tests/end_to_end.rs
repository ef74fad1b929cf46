//! Drives the `serpent` binary through every subcommand on a small synthetic
//! corpus written to a temporary directory.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serpent_cli::commands::PredictionOutput;
use serpent_core::audio::{write_wav, AudioClip};
use serpent_core::diarize::{der, parse_rttm, Segment};

const RATE: u32 = 16000;

/// RAVDESS emotion codes for the seven classes, paired with a distinct
/// fundamental and harmonic profile per class.
const CLASSES: [(&str, f64, [f64; 3]); 7] = [
    ("05", 120.0, [1.0, 0.6, 0.3]),
    ("07", 180.0, [1.0, 0.0, 0.5]),
    ("06", 260.0, [0.5, 1.0, 0.2]),
    ("03", 340.0, [1.0, 0.3, 0.0]),
    ("01", 430.0, [0.2, 0.5, 1.0]),
    ("04", 520.0, [1.0, 1.0, 1.0]),
    ("08", 640.0, [0.7, 0.0, 0.0]),
];

fn tone(f0: f64, profile: &[f64], secs: f64, rate: u32, amp: f64) -> Vec<f64> {
    let n = (secs * rate as f64).round() as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            let v: f64 = profile.iter().enumerate().map(|(h, a)| a * (2.0 * PI * f0 * (h + 1) as f64 * t).sin()).sum();
            amp * v / 2.0
        })
        .collect()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("ravdess/Actor_01");
        fs::create_dir_all(&corpus).unwrap();
        for (code, f0, profile) in CLASSES {
            for rep in 1..=3 {
                let name = format!("03-01-{code}-01-01-0{rep}-01.wav");
                let clip = AudioClip::new(tone(f0 * (1.0 + 0.01 * rep as f64), &profile, 1.6, RATE, 0.5), RATE).unwrap();
                write_wav(corpus.join(name), &clip).unwrap();
            }
        }
        fs::write(
            dir.path().join("pipeline.toml"),
            "out_dir = \"out\"\n[corpora]\nravdess_dir = \"ravdess\"\n[model]\nepochs = 3\nbatch_size = 16\n",
        )
        .unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let out = Command::new(env!("CARGO_BIN_EXE_serpent"))
            .arg("--config")
            .arg(self.path("pipeline.toml"))
            .args(args)
            .env_remove("SERPENT_CONFIG")
            .output()
            .unwrap();
        out
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "serpent {args:?} failed:\n{}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn full_pipeline_is_deterministic() {
    let fx = Fixture::new();

    let stdout = fx.ok(&["ingest"]);
    assert!(stdout.contains("21 clips"), "{stdout}");
    let manifest = read(&fx.path("out/manifest.csv"));
    assert_eq!(String::from_utf8_lossy(&manifest).lines().count(), 22);
    let counts = fs::read_to_string(fx.path("out/label_counts.csv")).unwrap();
    assert!(counts.lines().skip(1).all(|l| l.ends_with(",3")), "{counts}");
    fx.ok(&["ingest"]);
    assert_eq!(read(&fx.path("out/manifest.csv")), manifest);

    fx.ok(&["extract"]);
    let features = read(&fx.path("out/features.csv"));
    assert_eq!(String::from_utf8_lossy(&features).lines().count(), 1 + 21 * 3);
    fx.ok(&["extract"]);
    assert_eq!(read(&fx.path("out/features.csv")), features);

    let stdout = fx.ok(&["train"]);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("epoch ")).count(), 3, "{stdout}");
    let report = read(&fx.path("out/report.txt"));
    let model = read(&fx.path("out/model.json"));
    for name in ["history.csv", "report.csv", "confusion.csv"] {
        assert!(fx.path("out").join(name).exists(), "{name}");
    }
    fx.ok(&["train"]);
    assert_eq!(read(&fx.path("out/report.txt")), report);
    assert_eq!(read(&fx.path("out/model.json")), model);

    fx.ok(&["report"]);
    assert_eq!(read(&fx.path("out/report.txt")), report);

    fx.ok(&["--seed", "7", "train"]);
    assert_ne!(read(&fx.path("out/model.json")), model);
}

#[test]
fn untrained_checkpoint_predicts_a_distribution() {
    let fx = Fixture::new();
    fx.ok(&["ingest"]);
    fx.ok(&["extract"]);
    fx.ok(&["--epochs", "0", "train"]);

    let silence = fx.path("silence.wav");
    write_wav(&silence, &AudioClip::silence(RATE as usize * 2, RATE)).unwrap();
    let json = fx.ok(&["predict", silence.to_str().unwrap()]);
    let result: PredictionOutput = serde_json::from_str(&json).unwrap();
    let probs = result.probabilities.unwrap();
    assert_eq!(probs.len(), 7);
    assert!((probs.values().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(probs.contains_key(&result.label.unwrap()));
    assert!(result.segments.is_none());
}

fn two_speaker_clip() -> (AudioClip, Vec<Segment>) {
    let mut samples = vec![];
    let mut reference = vec![];
    let mut t = 0.0;
    for _ in 0..3 {
        for (spk, f0, profile) in [("A", 140.0, &[1.0, 0.5, 0.25][..]), ("B", 700.0, &[1.0, 0.0, 0.4][..])] {
            samples.extend(tone(f0, profile, 3.0, RATE, 0.5));
            samples.extend(vec![0.0; (0.3 * RATE as f64) as usize]);
            reference.push(Segment::new(t, t + 3.0, spk));
            t += 3.3;
        }
    }
    (AudioClip::new(samples, RATE).unwrap(), reference)
}

#[test]
fn diarized_prediction_separates_two_speakers() {
    let fx = Fixture::new();
    fx.ok(&["ingest"]);
    fx.ok(&["extract"]);
    fx.ok(&["train"]);

    let (clip, reference) = two_speaker_clip();
    let wav = fx.path("dialogue.wav");
    write_wav(&wav, &clip).unwrap();
    let json = fx.ok(&["predict", wav.to_str().unwrap(), "--num-speakers", "2"]);
    let result: PredictionOutput = serde_json::from_str(&json).unwrap();
    assert!(result.label.is_none());
    let segments = result.segments.unwrap();
    let speakers: std::collections::BTreeSet<&str> = segments.iter().map(|s| s.speaker.as_str()).collect();
    assert_eq!(speakers.len(), 2);
    for s in &segments {
        assert!(s.end > s.start);
        assert!((s.probabilities.values().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let rttm = fs::read_to_string(result.rttm.unwrap()).unwrap();
    let hyp = parse_rttm(&rttm).unwrap();
    assert_eq!(hyp.len(), segments.len());
    assert!(der(&reference, &hyp, 0.25).unwrap() <= 0.10);

    let rttm_out = fx.path("turns.rttm");
    fx.ok(&["diarize", wav.to_str().unwrap(), "--num-speakers", "2", "--rttm-out", rttm_out.to_str().unwrap()]);
    assert_eq!(parse_rttm(&fs::read_to_string(&rttm_out).unwrap()).unwrap(), hyp);
}

#[test]
fn failures_exit_nonzero() {
    let fx = Fixture::new();
    fs::write(fx.path("empty.toml"), "out_dir = \"out\"\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_serpent"))
        .args(["--config", fx.path("empty.toml").to_str().unwrap(), "ingest"])
        .output()
        .unwrap();
    assert!(!out.status.success());

    // extract before ingest has no manifest
    assert!(!fx.run(&["extract"]).status.success());

    fx.ok(&["ingest"]);
    fs::write(fx.path("out/model.json"), "{\"format_version\": 99}").unwrap();
    let wav = fx.path("ravdess/Actor_01/03-01-05-01-01-01-01.wav");
    let out = fx.run(&["predict", wav.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.json"));

    // one undecodable clip in 21 is above the 1% tolerance but still writes the table
    fs::write(fx.path("ravdess/Actor_01/03-01-05-01-01-01-01.wav"), b"not a wav").unwrap();
    let out = fx.run(&["extract"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping"));
    assert_eq!(fs::read_to_string(fx.path("out/features.csv")).unwrap().lines().count(), 1 + 20 * 3);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let fx = Fixture::new();
    fs::write(fx.path("bad.toml"), "[model]\nepoch = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_serpent"))
        .args(["--config", fx.path("bad.toml").to_str().unwrap(), "ingest"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
