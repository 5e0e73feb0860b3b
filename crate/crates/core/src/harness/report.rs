use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::metrics::DetectionMetrics;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCell {
    pub train: String,
    pub test: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub preset: String,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Arithmetic mean of the fold accuracies.
    pub mean_accuracy: Option<f64>,
    pub detection: Option<DetectionMetrics>,
    pub cross: Vec<CrossCell>,
    pub config: BTreeMap<String, String>,
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

impl RunReport {
    pub fn new(dataset: &str, cfg: &PipelineConfig, folds: Vec<FoldResult>) -> Self {
        let mut r = Self {
            dataset: dataset.to_string(),
            preset: cfg.preset.clone(),
            seed: cfg.seed,
            folds,
            mean_accuracy: None,
            detection: None,
            cross: Vec::new(),
            config: cfg.to_map(),
        };
        r.recompute_mean();
        r
    }

    pub fn recompute_mean(&mut self) {
        let acc: Vec<f64> = self.folds.iter().map(|f| f.accuracy).collect();
        self.mean_accuracy = mean(&acc);
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            "json" => Ok(Self::Json),
            other => Err(HarnessError::Config(format!("unknown report format {other:?}"))),
        }
    }
}

const CSV_HEADER: [&str; 5] = ["section", "name", "train", "test", "value"];

/// One row per value; numbers at full precision.
pub fn render_csv(report: &RunReport) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    let mut row = |section: &str, name: &str, train: &str, test: &str, value: String| w.write_record([section, name, train, test, &value]);
    row("meta", "dataset", "", "", report.dataset.clone())?;
    row("meta", "preset", "", "", report.preset.clone())?;
    row("meta", "seed", "", "", report.seed.to_string())?;
    for f in &report.folds {
        row("fold", &f.fold.to_string(), &f.train_samples.to_string(), &f.test_samples.to_string(), f.accuracy.to_string())?;
    }
    if let Some(m) = report.mean_accuracy {
        row("mean", "accuracy", "", "", m.to_string())?;
    }
    if let Some(d) = &report.detection {
        row("detection", "recall", "", "", d.recall.to_string())?;
        row("detection", "precision", "", "", d.precision.to_string())?;
        row("detection", "f_measure", "", "", d.f_measure.to_string())?;
    }
    for c in &report.cross {
        row("cross", "accuracy", &c.train, &c.test, c.accuracy.to_string())?;
    }
    for (k, v) in &report.config {
        row("config", k, "", "", v.clone())?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Report(e.to_string()))
}

/// Inverse of [`render_csv`].
pub fn parse_csv(text: &str) -> Result<RunReport, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut report = RunReport {
        dataset: String::new(),
        preset: String::new(),
        seed: 0,
        folds: Vec::new(),
        mean_accuracy: None,
        detection: None,
        cross: Vec::new(),
        config: BTreeMap::new(),
    };
    let bad = |what: &str| HarnessError::Report(format!("bad csv value for {what}"));
    let num = |s: &str, what: &str| -> Result<f64, HarnessError> { s.parse().map_err(|_| bad(what)) };
    let mut det = [None; 3];
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let (section, name, train, test, value) = (field(0), field(1), field(2), field(3), field(4));
        match (section, name) {
            ("meta", "dataset") => report.dataset = value.to_string(),
            ("meta", "preset") => report.preset = value.to_string(),
            ("meta", "seed") => report.seed = value.parse().map_err(|_| bad("seed"))?,
            ("fold", _) => report.folds.push(FoldResult {
                fold: name.parse().map_err(|_| bad("fold"))?,
                train_samples: train.parse().map_err(|_| bad("fold"))?,
                test_samples: test.parse().map_err(|_| bad("fold"))?,
                accuracy: num(value, "fold")?,
            }),
            ("mean", _) => report.mean_accuracy = Some(num(value, "mean")?),
            ("detection", "recall") => det[0] = Some(num(value, "recall")?),
            ("detection", "precision") => det[1] = Some(num(value, "precision")?),
            ("detection", "f_measure") => det[2] = Some(num(value, "f_measure")?),
            ("cross", _) => report.cross.push(CrossCell { train: train.into(), test: test.into(), accuracy: num(value, "cross")? }),
            ("config", k) => {
                report.config.insert(k.to_string(), value.to_string());
            }
            _ => return Err(HarnessError::Report(format!("unknown csv row {section},{name}"))),
        }
    }
    if let [Some(recall), Some(precision), Some(f_measure)] = det {
        report.detection = Some(DetectionMetrics { recall, precision, f_measure });
    }
    Ok(report)
}

/// Tables with two-decimal percentages.
pub fn render_markdown(report: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}\n", report.dataset);
    let _ = writeln!(s, "Preset `{}`, seed {}.\n", report.preset, report.seed);
    if !report.folds.is_empty() {
        s.push_str("| Fold | Train | Test | Accuracy (%) |\n|---|---|---|---|\n");
        for f in &report.folds {
            let _ = writeln!(s, "| {} | {} | {} | {:.2} |", f.fold + 1, f.train_samples, f.test_samples, f.accuracy);
        }
        if let Some(m) = report.mean_accuracy {
            let _ = writeln!(s, "| Mean | | | {m:.2} |");
        }
        s.push('\n');
    }
    if let Some(d) = &report.detection {
        s.push_str("| Recall (%) | Precision (%) | F-Measure (%) |\n|---|---|---|\n");
        let _ = writeln!(s, "| {:.2} | {:.2} | {:.2} |\n", d.recall, d.precision, d.f_measure);
    }
    if !report.cross.is_empty() {
        let mut tests: Vec<&str> = report.cross.iter().map(|c| c.test.as_str()).collect();
        tests.dedup();
        tests.sort_unstable();
        tests.dedup();
        let mut trains: Vec<&str> = report.cross.iter().map(|c| c.train.as_str()).collect();
        trains.sort_unstable();
        trains.dedup();
        let _ = writeln!(s, "| Train \\ Test | {} |", tests.join(" | "));
        let _ = writeln!(s, "|---|{}", "---|".repeat(tests.len()));
        for tr in trains {
            let cells: Vec<String> = tests
                .iter()
                .map(|te| {
                    report
                        .cross
                        .iter()
                        .find(|c| c.train == tr && c.test == *te)
                        .map_or_else(|| "-".to_string(), |c| format!("{:.2}", c.accuracy))
                })
                .collect();
            let _ = writeln!(s, "| {tr} | {} |", cells.join(" | "));
        }
        s.push('\n');
    }
    if !report.config.is_empty() {
        s.push_str("| Setting | Value |\n|---|---|\n");
        for (k, v) in &report.config {
            let _ = writeln!(s, "| {k} | `{v}` |");
        }
    }
    s
}

pub fn render_report(report: &RunReport, format: ReportFormat) -> Result<String, HarnessError> {
    match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => Ok(render_markdown(report)),
        ReportFormat::Json => report.to_json(),
    }
}

pub fn emit_report(report: &RunReport, path: &Path, format: ReportFormat) -> Result<(), HarnessError> {
    fs::write(path, render_report(report, format)?)?;
    Ok(())
}
