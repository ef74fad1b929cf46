//! Corpus scanning into the integrated manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serpent_core::dataset::{label_counts, load_movieclips, scan_corpus, Corpus, EmotionLabel, ManifestEntry, NUM_EMOTIONS};

use crate::config::PipelineConfig;
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub rows: usize,
    pub counts: [usize; NUM_EMOTIONS],
    /// Files present under a corpus root whose names did not parse.
    pub skipped: usize,
    pub manifest: PathBuf,
}

fn roots(cfg: &PipelineConfig) -> [(Corpus, Option<&Path>); 5] {
    let c = &cfg.corpora;
    [
        (Corpus::Ravdess, c.ravdess_dir.as_deref()),
        (Corpus::Cremad, c.cremad_dir.as_deref()),
        (Corpus::Tess, c.tess_dir.as_deref()),
        (Corpus::Savee, c.savee_dir.as_deref()),
        (Corpus::Movieclips, c.movieclips_manifest.as_deref()),
    ]
}

fn manifest_bytes(entries: &[ManifestEntry]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in entries {
        w.serialize(e)?;
    }
    w.into_inner().context("flushing manifest")
}

fn histogram(counts: &[usize; NUM_EMOTIONS]) -> String {
    let max = counts.iter().copied().max().unwrap_or(0).max(1);
    let mut out = String::new();
    for label in EmotionLabel::ALL {
        let n = counts[label.code()];
        let bar = "#".repeat((n * 50).div_ceil(max));
        out.push_str(&format!("{:>9} {n:>7} {bar}\n", label.name()));
    }
    out
}

/// Scans every configured corpus, writes `manifest.csv` and
/// `label_counts.csv`, and prints a per-emotion histogram. Missing roots and
/// unexpected file counts are warnings; an empty result is an error.
pub fn ingest(cfg: &PipelineConfig, out: &mut dyn Write) -> Result<IngestSummary> {
    let mut entries = Vec::new();
    let mut skipped = 0;
    for (corpus, root) in roots(cfg) {
        let Some(root) = root else { continue };
        if !root.exists() {
            eprintln!("warning: {corpus} root {} does not exist; skipping", root.display());
            continue;
        }
        let found = if corpus == Corpus::Movieclips {
            load_movieclips(root).with_context(|| format!("loading {corpus} manifest {}", root.display()))?
        } else {
            let (found, bad) = scan_corpus(corpus, root).with_context(|| format!("scanning {corpus}"))?;
            for p in &bad {
                eprintln!("warning: {corpus}: skipped {} (not a recognised speech clip name)", p.display());
            }
            skipped += bad.len();
            found
        };
        if found.len() != corpus.expected_count() {
            eprintln!("warning: {corpus} has {} clips, expected {}", found.len(), corpus.expected_count());
        }
        entries.extend(found);
    }
    if entries.is_empty() {
        bail!("no clips found; configure at least one corpus root under [corpora]");
    }

    let counts = label_counts(entries.iter().map(|e| &e.label));
    let manifest = cfg.manifest_path();
    write_atomic(&manifest, &manifest_bytes(&entries)?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["emotion", "count"])?;
    for label in EmotionLabel::ALL {
        w.write_record([label.name().to_string(), counts[label.code()].to_string()])?;
    }
    write_atomic(&cfg.out_dir.join("label_counts.csv"), &w.into_inner().context("flushing counts")?)?;

    write!(out, "{}", histogram(&counts))?;
    writeln!(out, "{} clips written to {}", entries.len(), manifest.display())?;
    Ok(IngestSummary { rows: entries.len(), counts, skipped, manifest })
}
