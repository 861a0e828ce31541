//! Output files of a run: raw samples, summary, variance table and the
//! manifest tying them to the config and seed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::fluctuation::{CenteringMode, FluctuationSample};
use crate::verify_harness::{ExperimentConfig, SummaryReport};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SAMPLES_JSONL: &str = "samples.jsonl";
pub const SAMPLES_CSV: &str = "samples.csv";
pub const VARIANCE_TABLE: &str = "variance_table.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    #[default]
    Jsonl,
    Csv,
}

/// One raw sample as written to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub n: f64,
    pub t: f64,
    pub replicate: u64,
    pub value: f64,
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    pub centering_mode: CenteringMode,
    pub accuracy_flag: Option<bool>,
}

impl From<&FluctuationSample> for SampleRecord {
    fn from(s: &FluctuationSample) -> Self {
        Self {
            n: s.n,
            t: s.t,
            replicate: s.replicate_id,
            value: s.value,
            l: s.half_widths.clone(),
            centering_mode: s.centering_mode,
            accuracy_flag: s.accuracy_flag,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Incomplete,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: RunStatus,
    pub command: String,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub seed_derivation: String,
    pub workers: usize,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub runtime_seconds: Option<f64>,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn start(command: &str, config: &ExperimentConfig, workers: usize) -> Self {
        Self {
            status: RunStatus::Incomplete,
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            master_seed: config.master_seed,
            seed_derivation: crate::rng::DERIVATION_RULE.into(),
            workers,
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: None,
            runtime_seconds: None,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_samples(path: &Path, samples: &[FluctuationSample], format: SampleFormat) -> Result<()> {
    let file = File::create(path)?;
    match format {
        SampleFormat::Jsonl => {
            let mut w = BufWriter::new(file);
            for s in samples {
                serde_json::to_writer(&mut w, &SampleRecord::from(s))?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        SampleFormat::Csv => {
            let mut w = csv::Writer::from_writer(file);
            w.write_record(["n", "t", "replicate", "value", "L", "centering_mode", "accuracy_flag"])?;
            for s in samples {
                let l = s.half_widths.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
                let flag = s.accuracy_flag.map_or(String::new(), |f| f.to_string());
                w.write_record([
                    s.n.to_string(),
                    s.t.to_string(),
                    s.replicate_id.to_string(),
                    s.value.to_string(),
                    l,
                    format!("{:?}", s.centering_mode),
                    flag,
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn read_samples_jsonl(path: &Path) -> Result<Vec<SampleRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

#[derive(Serialize)]
struct VarianceRow {
    n: f64,
    t: f64,
    half_width: f64,
    f_n: f64,
    mean: f64,
    variance: f64,
    variance_lower: f64,
    variance_upper: f64,
    unnormalized_variance: f64,
    unnormalized_lower: f64,
    unnormalized_upper: f64,
    normalized_ratio: f64,
}

pub fn write_variance_table(path: &Path, summary: &SummaryReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for sc in &summary.scales {
        for p in &sc.per_t {
            w.serialize(VarianceRow {
                n: sc.n,
                t: p.t,
                half_width: sc.half_width,
                f_n: sc.f_n,
                mean: p.mean,
                variance: p.variance.estimate,
                variance_lower: p.variance.ci.lower,
                variance_upper: p.variance.ci.upper,
                unnormalized_variance: p.unnormalized_variance.estimate,
                unnormalized_lower: p.unnormalized_variance.ci.lower,
                unnormalized_upper: p.unnormalized_variance.ci.upper,
                normalized_ratio: p.normalized_ratio,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn digest_file(path: &Path) -> Result<OutputDigest> {
    let bytes = fs::read(path)?;
    Ok(OutputDigest {
        file: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

/// Paths written by a run, in the order they are produced.
pub fn output_paths(dir: &Path, format: SampleFormat) -> Vec<PathBuf> {
    let samples = match format {
        SampleFormat::Jsonl => SAMPLES_JSONL,
        SampleFormat::Csv => SAMPLES_CSV,
    };
    vec![dir.join(samples), dir.join(SUMMARY_FILE), dir.join(VARIANCE_TABLE)]
}
