//! CSV and JSON report files.
//!
//! Every CSV starts with one `# config: {...}` line carrying the run
//! configuration, then a header row. Bodies contain no timestamps, so equal
//! inputs give equal bytes; wall-clock figures go to `timing.json` only.

use std::io::Write;
use std::path::Path;

use opf_activeset_core::nn::EpochStats;
use opf_activeset_core::policy::{AccuracyCell, EvalReport, FixedStatusReport, FrequencyRow};
use opf_activeset_core::polytope::RowKind;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Failure;

/// Accumulates CSV text with the config line in front.
pub struct CsvReport {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvReport {
    pub fn new(cfg: &RunConfig, header: &[&str]) -> Self {
        let mut buf = Vec::new();
        let echo = serde_json::to_string(cfg).expect("config serializes");
        let _ = writeln!(buf, "# config: {echo}");
        let mut writer = csv::WriterBuilder::new().from_writer(buf);
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }

    pub fn save(self, path: &Path) -> Result<(), Failure> {
        std::fs::write(path, self.into_bytes())
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
    }
}

/// Strips the `# config:` line so bodies of two runs can be compared.
pub fn csv_body(bytes: &[u8]) -> &[u8] {
    match bytes.iter().position(|&b| b == b'\n') {
        Some(i) if bytes.starts_with(b"# ") => &bytes[i + 1..],
        _ => bytes,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

pub fn f(v: f64) -> String {
    v.to_string()
}

pub fn history_csv(cfg: &RunConfig, history: &[EpochStats]) -> CsvReport {
    let mut r = CsvReport::new(cfg, &["epoch", "mean_loss", "train_top1"]);
    for h in history {
        r.row([h.epoch.to_string(), f(h.mean_loss), f(h.train_top1)]);
    }
    r
}

pub fn discovery_csv(cfg: &RunConfig, curve: &[(usize, usize)]) -> CsvReport {
    let mut r = CsvReport::new(cfg, &["samples_drawn", "dictionary_size"]);
    for &(n, k) in curve {
        r.row([n.to_string(), k.to_string()]);
    }
    r
}

pub fn accuracy_csv(cfg: &RunConfig, report: &EvalReport) -> CsvReport {
    let mut r = CsvReport::new(
        cfg,
        &[
            "k",
            "accuracy",
            "feasibility_rate",
            "optimal",
            "suboptimal",
            "no_feasible_candidate",
            "mean_gap",
            "max_gap",
            "mean_candidates",
        ],
    );
    for s in &report.per_k {
        r.row([
            s.k.to_string(),
            f(s.accuracy),
            f(s.feasibility_rate),
            s.optimal.to_string(),
            s.suboptimal.to_string(),
            s.gap.n_no_candidate.to_string(),
            f(s.gap.mean_gap),
            f(s.gap.max_gap),
            f(s.mean_candidates),
        ]);
    }
    r
}

pub fn confusion_csv(cfg: &RunConfig, report: &EvalReport) -> CsvReport {
    let mut r = CsvReport::new(cfg, &["true_class", "predicted_class", "count"]);
    for (t, row) in report.confusion.iter().enumerate() {
        for (p, &c) in row.iter().enumerate() {
            if c > 0 {
                r.row([t.to_string(), p.to_string(), c.to_string()]);
            }
        }
    }
    r
}

fn kind_fields(kind: RowKind) -> (&'static str, usize, &'static str) {
    match kind {
        RowKind::GenUpper(g) => ("generator", g, "upper"),
        RowKind::GenLower(g) => ("generator", g, "lower"),
        RowKind::FlowUpper(l) => ("flow", l, "upper"),
        RowKind::FlowLower(l) => ("flow", l, "lower"),
    }
}

pub fn fixed_status_csv(cfg: &RunConfig, report: &FixedStatusReport) -> CsvReport {
    let mut r = CsvReport::new(
        cfg,
        &["row", "class", "element", "limit", "active", "inactive", "fixed"],
    );
    for s in &report.rows {
        let (class, element, limit) = kind_fields(s.kind);
        r.row([
            s.row.to_string(),
            class.to_string(),
            element.to_string(),
            limit.to_string(),
            s.active.to_string(),
            s.inactive.to_string(),
            u8::from(s.is_fixed()).to_string(),
        ]);
    }
    r
}

pub fn frequency_csv(cfg: &RunConfig, rows: &[FrequencyRow]) -> CsvReport {
    let mut r = CsvReport::new(cfg, &["class", "count", "frequency"]);
    for row in rows {
        r.row([row.class.to_string(), row.count.to_string(), f(row.frequency)]);
    }
    r
}

pub fn cells_csv(cfg: &RunConfig, setting: &str, cells: &[AccuracyCell]) -> CsvReport {
    let mut r = CsvReport::new(cfg, &[setting, "k", "accuracy"]);
    for c in cells {
        r.row([c.setting.to_string(), c.k.to_string(), f(c.eta)]);
    }
    r
}
