//! Writes an [`AlignmentReport`] as csv tables plus a json document.
//!
//! Output is a pure function of the report: rows follow the report's order,
//! csv numbers use twelve decimals, and nothing time-dependent is written.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ingest::Ideology;
use crate::pipeline::AlignmentReport;

pub const ALIGNMENT_CSV: &str = "alignment.csv";
pub const PER_TOPIC_CSV: &str = "per_topic.csv";
pub const DISTRIBUTIONS_CSV: &str = "distributions.csv";
pub const REPORT_JSON: &str = "report.json";

/// Model and mode columns used for the human partisan baseline rows.
pub const BASELINE_MODEL: &str = "human";
pub const BASELINE_MODE: &str = "partisan_baseline";
pub const BASELINE_GROUP: &str = "liberal_vs_conservative";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("serializing report: {0}")]
    Serialize(String),
}

fn num(x: f64) -> String {
    format!("{x:.12}")
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| ReportError::Serialize(e.to_string());
    w.write_record(header).map_err(ser)?;
    for row in rows {
        w.write_record(&row).map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ReportError::Serialize(e.to_string()))
}

/// `model,mode,group,taxonomy,mean,std,p_value,significant`, baselines first.
pub fn alignment_csv(report: &AlignmentReport) -> Result<String, ReportError> {
    let mut rows = Vec::new();
    for b in &report.baselines {
        rows.push(vec![
            BASELINE_MODEL.into(),
            BASELINE_MODE.into(),
            BASELINE_GROUP.into(),
            b.taxonomy.to_string(),
            num(b.score.mean),
            num(b.score.std_dev),
            String::new(),
            String::new(),
        ]);
    }
    for c in &report.cells {
        for group in Ideology::BOTH {
            let s = c.score(group);
            rows.push(vec![
                c.model.clone(),
                c.mode.to_string(),
                group.to_string(),
                c.taxonomy.to_string(),
                num(s.mean),
                num(s.std_dev),
                c.significance.map(|r| num(r.p_value)).unwrap_or_default(),
                c.significant.map(|b| b.to_string()).unwrap_or_default(),
            ]);
        }
    }
    table(
        &[
            "model",
            "mode",
            "group",
            "taxonomy",
            "mean",
            "std",
            "p_value",
            "significant",
        ],
        rows,
    )
}

/// `model,mode,group,taxonomy,topic,score`.
pub fn per_topic_csv(report: &AlignmentReport) -> Result<String, ReportError> {
    let mut rows = Vec::new();
    for b in &report.baselines {
        for (topic, s) in &b.score.per_topic {
            rows.push(vec![
                BASELINE_MODEL.into(),
                BASELINE_MODE.into(),
                BASELINE_GROUP.into(),
                b.taxonomy.to_string(),
                topic.clone(),
                num(*s),
            ]);
        }
    }
    for c in &report.cells {
        for group in Ideology::BOTH {
            for (topic, s) in &c.score(group).per_topic {
                rows.push(vec![
                    c.model.clone(),
                    c.mode.to_string(),
                    group.to_string(),
                    c.taxonomy.to_string(),
                    topic.clone(),
                    num(*s),
                ]);
            }
        }
    }
    table(&["model", "mode", "group", "taxonomy", "topic", "score"], rows)
}

/// `source,taxonomy,topic,category,mean_score,share`, one row per category.
pub fn distributions_csv(report: &AlignmentReport) -> Result<String, ReportError> {
    let mut rows = Vec::new();
    for d in &report.distributions {
        for ((label, mean), share) in d.taxonomy.labels().iter().zip(&d.mean_scores).zip(&d.shares) {
            rows.push(vec![
                d.source.clone(),
                d.taxonomy.to_string(),
                d.topic.clone(),
                label.to_string(),
                num(*mean),
                num(*share),
            ]);
        }
    }
    table(
        &["source", "taxonomy", "topic", "category", "mean_score", "share"],
        rows,
    )
}

pub fn report_json(report: &AlignmentReport) -> Result<String, ReportError> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| ReportError::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes all report files into `out_dir`, creating it if needed, and
/// returns their paths.
pub fn emit_report(report: &AlignmentReport, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let files = [
        (ALIGNMENT_CSV, alignment_csv(report)?),
        (PER_TOPIC_CSV, per_topic_csv(report)?),
        (DISTRIBUTIONS_CSV, distributions_csv(report)?),
        (REPORT_JSON, report_json(report)?),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, content) in files {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
