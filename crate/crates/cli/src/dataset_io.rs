//! Dataset container: one JSON header line, then CSV sample records.
//!
//! ```text
//! {"format":"opf-activeset-dataset","version":1,"case_name":...,"dictionary":[[3,17],...],...}
//! label,cost,w_4,w_5,...,p_0,p_1,...
//! 0,1234.5,0.0123,-0.0071,...,0.35,0.2,...
//! ```
//!
//! `w_<i>` columns hold ω at internal bus index `i` (load buses only, in
//! header `load_buses` order); `p_<g>` columns hold the optimal dispatch.
//! Floats are written in shortest round-trip form, so reading and writing
//! again reproduces the file byte for byte.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use opf_activeset_core::active_set::ActiveSet;
use opf_activeset_core::scenario::{ActiveSetDictionary, Dataset, DatasetMeta, LabeledSample};
use serde::{Deserialize, Serialize};

pub const DATASET_FORMAT: &str = "opf-activeset-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub case_name: String,
    pub sigma_frac: f64,
    pub seed: u64,
    pub generator_version: String,
    pub n_bus: usize,
    pub n_gen: usize,
    pub load_buses: Vec<usize>,
    pub n_drawn: usize,
    pub n_infeasible: usize,
    pub n_samples: usize,
    /// Active sets by class label, each a sorted list of polytope rows.
    pub dictionary: Vec<ActiveSet>,
    pub counts: Vec<usize>,
    pub binding: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetIoError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a dataset file: {0}")]
    BadHeader(String),
    #[error("dataset format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("record {record}: {reason}")]
    BadRecord { record: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn header_of(ds: &Dataset) -> DatasetHeader {
    let m = &ds.meta;
    DatasetHeader {
        format: DATASET_FORMAT.to_string(),
        version: DATASET_VERSION,
        case_name: m.case_name.clone(),
        sigma_frac: m.sigma_frac,
        seed: m.seed,
        generator_version: m.generator_version.clone(),
        n_bus: m.n_bus,
        n_gen: ds.samples.first().map_or(0, |s| s.p_star.len()),
        load_buses: m.load_buses.clone(),
        n_drawn: m.n_drawn,
        n_infeasible: m.n_infeasible,
        n_samples: ds.len(),
        dictionary: ds.dictionary.sets().to_vec(),
        counts: ds.dictionary.counts().to_vec(),
        binding: ds.dictionary.binding(),
    }
}

pub fn write_dataset<W: Write>(ds: &Dataset, out: W) -> Result<(), DatasetIoError> {
    let header = header_of(ds);
    let mut out = std::io::BufWriter::new(out);
    serde_json::to_writer(&mut out, &header).map_err(|e| DatasetIoError::BadHeader(e.to_string()))?;
    out.write_all(b"\n")?;
    let mut w = csv::WriterBuilder::new().from_writer(out);
    let mut names = vec!["label".to_string(), "cost".to_string()];
    names.extend(header.load_buses.iter().map(|b| format!("w_{b}")));
    names.extend((0..header.n_gen).map(|g| format!("p_{g}")));
    w.write_record(&names)?;
    let mut rec = Vec::with_capacity(names.len());
    for s in &ds.samples {
        rec.clear();
        rec.push(s.label.to_string());
        rec.push(s.cost.to_string());
        rec.extend(header.load_buses.iter().map(|&b| s.omega[b].to_string()));
        rec.extend(s.p_star.iter().map(|p| p.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset, DatasetIoError> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let probe: serde_json::Value =
        serde_json::from_str(first.trim_end()).map_err(|e| DatasetIoError::BadHeader(e.to_string()))?;
    if probe.get("format").and_then(|f| f.as_str()) != Some(DATASET_FORMAT) {
        return Err(DatasetIoError::BadHeader("missing format tag".into()));
    }
    let found = probe.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != DATASET_VERSION {
        return Err(DatasetIoError::VersionMismatch {
            found,
            expected: DATASET_VERSION,
        });
    }
    let header: DatasetHeader =
        serde_json::from_value(probe).map_err(|e| DatasetIoError::BadHeader(e.to_string()))?;
    let dictionary = ActiveSetDictionary::from_parts(header.dictionary.clone(), header.counts.clone())
        .map_err(|e| DatasetIoError::BadHeader(e.to_string()))?;
    if dictionary.binding() != header.binding {
        return Err(DatasetIoError::BadHeader("dictionary hash does not match its contents".into()));
    }

    let mut csv = csv::ReaderBuilder::new().from_reader(reader);
    let nl = header.load_buses.len();
    let width = 2 + nl + header.n_gen;
    if csv.headers()?.len() != width {
        return Err(DatasetIoError::BadHeader("column count differs from header".into()));
    }
    let mut samples = Vec::with_capacity(header.n_samples);
    for (i, rec) in csv.records().enumerate() {
        let rec = rec?;
        let bad = |reason: String| DatasetIoError::BadRecord { record: i, reason };
        if rec.len() != width {
            return Err(bad(format!("{} fields, expected {width}", rec.len())));
        }
        let num = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|_| bad(format!("field {k} `{}` is not a number", &rec[k])))
        };
        let label: usize = rec[0]
            .parse()
            .map_err(|_| bad(format!("label `{}` is not an index", &rec[0])))?;
        if label >= dictionary.len() {
            return Err(bad(format!("label {label} outside the dictionary")));
        }
        let cost = num(1)?;
        let mut omega = vec![0.0; header.n_bus];
        for (k, &b) in header.load_buses.iter().enumerate() {
            *omega
                .get_mut(b)
                .ok_or_else(|| bad(format!("load bus {b} outside {} buses", header.n_bus)))? = num(2 + k)?;
        }
        let p_star = (0..header.n_gen).map(|g| num(2 + nl + g)).collect::<Result<_, _>>()?;
        samples.push(LabeledSample {
            omega,
            label,
            p_star,
            cost,
            feasible: true,
        });
    }
    if samples.len() != header.n_samples {
        return Err(DatasetIoError::BadHeader(format!(
            "header promises {} samples, file holds {}",
            header.n_samples,
            samples.len()
        )));
    }
    Ok(Dataset {
        samples,
        dictionary,
        meta: DatasetMeta {
            case_name: header.case_name,
            sigma_frac: header.sigma_frac,
            seed: header.seed,
            generator_version: header.generator_version,
            n_bus: header.n_bus,
            load_buses: header.load_buses,
            n_drawn: header.n_drawn,
            n_infeasible: header.n_infeasible,
        },
    })
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), DatasetIoError> {
    write_dataset(ds, std::fs::File::create(path)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetIoError> {
    read_dataset(std::fs::File::open(path)?)
}
