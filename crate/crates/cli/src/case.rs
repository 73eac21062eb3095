//! MATPOWER `.m` case files.
//!
//! Only the numeric matrices `mpc.bus`, `mpc.gen`, `mpc.branch` and
//! `mpc.gencost` plus the scalar `mpc.baseMVA` are read; every other
//! assignment (bus names, areas, version strings) is skipped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use opf_activeset_core::network::{first_unreachable, Branch, Bus, Generator, Network};

/// Minimum columns per table: the fields a DC-OPF reads.
const MIN_BUS_COLS: usize = 13;
const MIN_GEN_COLS: usize = 10;
const MIN_BRANCH_COLS: usize = 13;
const MIN_GENCOST_COLS: usize = 4;

// bus
const BUS_I: usize = 0;
const BUS_TYPE: usize = 1;
const PD: usize = 2;
const REF: f64 = 3.0;
// gen
const GEN_BUS: usize = 0;
const GEN_STATUS: usize = 7;
const PMAX: usize = 8;
const PMIN: usize = 9;
// branch
const F_BUS: usize = 0;
const T_BUS: usize = 1;
const BR_X: usize = 3;
const RATE_A: usize = 5;
const BR_STATUS: usize = 10;
// gencost
const MODEL: usize = 0;
const NCOST: usize = 3;
const COST: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct RawCase {
    pub case_name: String,
    pub base_mva: f64,
    pub bus: Vec<Vec<f64>>,
    pub gen: Vec<Vec<f64>>,
    pub branch: Vec<Vec<f64>>,
    pub gencost: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CaseError {
    #[error("case file has no `{0}` table")]
    MissingTable(String),
    #[error("table `{table}` row at line {line} has too few columns")]
    MalformedRow { table: String, line: usize },
    #[error("line {line}, column {column}: `{token}` is not a number")]
    NonNumericToken {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("baseMVA must be positive")]
    NonpositiveBase,
    #[error("table `{table}` row {row} refers to unknown bus {bus}")]
    UnknownBus { table: String, row: usize, bus: f64 },
    #[error("network is disconnected: bus {bus} is unreachable from the reference bus")]
    DisconnectedNetwork { bus: usize },
    #[error("bus table has no reference bus (type 3)")]
    NoReferenceBus,
    #[error("branch {branch} has nonpositive reactance")]
    NonpositiveReactance { branch: usize },
    #[error("generator {gen} has no cost row or an unsupported cost model")]
    BadCost { gen: usize },
}

fn strip_comment(line: &str) -> &str {
    // `%` inside quoted strings only occurs in name tables, which are skipped
    line.split('%').next().unwrap_or("")
}

fn parse_number(tok: &str, line: usize, column: usize) -> Result<f64, CaseError> {
    let t = tok.trim();
    let v = match t {
        "Inf" | "inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => t.parse::<f64>(),
    };
    v.map_err(|_| CaseError::NonNumericToken {
        line,
        column,
        token: t.to_string(),
    })
}

struct Table {
    rows: Vec<Vec<f64>>,
    first_lines: Vec<usize>,
}

/// Parses MATPOWER case text.
pub fn parse_case(text: &str) -> Result<RawCase, CaseError> {
    let mut case_name = String::new();
    let mut base_mva = None;
    let mut tables: HashMap<String, Table> = HashMap::new();

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((lineno, raw)) = lines.next() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("function") {
            if let Some((_, name)) = rest.split_once('=') {
                case_name = name.trim().trim_end_matches(';').trim().to_string();
            }
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else {
            continue;
        };
        let Some((field, value)) = rest.split_once('=') else {
            continue;
        };
        let field = field.trim();
        let value = value.trim();
        if field == "baseMVA" {
            let tok = value.trim_end_matches(';').trim();
            base_mva = Some(parse_number(tok, lineno, 1)?);
            continue;
        }
        let Some(body) = value.strip_prefix('[') else {
            // cell arrays and strings are not needed; skip a braced block
            if value.starts_with('{') && !value.contains('}') {
                for (_, l) in lines.by_ref() {
                    if strip_comment(l).contains('}') {
                        break;
                    }
                }
            }
            continue;
        };
        let mut table = Table {
            rows: Vec::new(),
            first_lines: Vec::new(),
        };
        let mut pending: Vec<f64> = Vec::new();
        let mut pending_line = lineno;
        let mut chunk = body.to_string();
        let mut chunk_line = lineno;
        loop {
            let (content, closed) = match chunk.find(']') {
                Some(i) => (&chunk[..i], true),
                None => (chunk.as_str(), false),
            };
            // rows end at `;` or at the end of a line
            let pieces: Vec<&str> = content.split(';').collect();
            for (k, piece) in pieces.iter().enumerate() {
                let mut col = pending.len();
                for tok in piece.split(|c: char| c.is_whitespace() || c == ',') {
                    if tok.is_empty() {
                        continue;
                    }
                    col += 1;
                    if pending.is_empty() {
                        pending_line = chunk_line;
                    }
                    pending.push(parse_number(tok, chunk_line, col)?);
                }
                let row_ends = k + 1 < pieces.len() || !closed;
                if row_ends && !pending.is_empty() {
                    table.rows.push(std::mem::take(&mut pending));
                    table.first_lines.push(pending_line);
                }
            }
            if closed {
                if !pending.is_empty() {
                    table.rows.push(std::mem::take(&mut pending));
                    table.first_lines.push(pending_line);
                }
                break;
            }
            match lines.next() {
                Some((l, raw)) => {
                    chunk = strip_comment(raw).to_string();
                    chunk_line = l;
                }
                None => break,
            }
        }
        tables.insert(field.to_string(), table);
    }

    let base_mva = base_mva.ok_or_else(|| CaseError::MissingTable("baseMVA".into()))?;
    if !(base_mva > 0.0) {
        return Err(CaseError::NonpositiveBase);
    }
    let mut take = |name: &str, min_cols: usize| -> Result<Vec<Vec<f64>>, CaseError> {
        let t = tables
            .remove(name)
            .ok_or_else(|| CaseError::MissingTable(name.to_string()))?;
        for (row, &line) in t.rows.iter().zip(&t.first_lines) {
            if row.len() < min_cols {
                return Err(CaseError::MalformedRow {
                    table: name.to_string(),
                    line,
                });
            }
        }
        Ok(t.rows)
    };
    Ok(RawCase {
        bus: take("bus", MIN_BUS_COLS)?,
        gen: take("gen", MIN_GEN_COLS)?,
        branch: take("branch", MIN_BRANCH_COLS)?,
        gencost: take("gencost", MIN_GENCOST_COLS)?,
        case_name,
        base_mva,
    })
}

/// Writes a case file that [`parse_case`] reads back to an identical `RawCase`.
pub fn serialize_case(raw: &RawCase) -> String {
    let mut out = String::new();
    let name = if raw.case_name.is_empty() {
        "case"
    } else {
        &raw.case_name
    };
    let _ = writeln!(out, "function mpc = {name}");
    let _ = writeln!(out, "mpc.version = '2';");
    let _ = writeln!(out, "mpc.baseMVA = {};", raw.base_mva);
    for (field, rows) in [
        ("bus", &raw.bus),
        ("gen", &raw.gen),
        ("branch", &raw.branch),
        ("gencost", &raw.gencost),
    ] {
        let _ = writeln!(out, "\nmpc.{field} = [");
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
            let _ = writeln!(out, "\t{};", cells.join("\t"));
        }
        let _ = writeln!(out, "];");
    }
    out
}

fn format_number(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "Inf".into() } else { "-Inf".into() }
    } else {
        format!("{v}")
    }
}

/// Linear cost coefficient of one `gencost` row, in $/MWh.
fn linear_cost(row: &[f64]) -> Option<f64> {
    let n = row.get(NCOST).copied()? as usize;
    let coeffs = row.get(COST..COST + if row[MODEL] == 1.0 { 2 * n } else { n })?;
    match row[MODEL] as i64 {
        2 => Some(match n {
            0 | 1 => 0.0,
            _ => coeffs[n - 2],
        }),
        // piecewise linear: average slope across the breakpoints
        1 if n >= 2 => {
            let (x0, y0) = (coeffs[0], coeffs[1]);
            let (x1, y1) = (coeffs[2 * n - 2], coeffs[2 * n - 1]);
            (x1 > x0).then(|| (y1 - y0) / (x1 - x0))
        }
        _ => None,
    }
}

/// Converts a parsed case to a per-unit DC network.
///
/// Out-of-service generators and branches are dropped, a zero `RATE_A`
/// becomes an unlimited branch, and only the linear cost term is kept
/// (scaled to $ per p.u.). Bus order follows the bus table.
pub fn build_network(raw: &RawCase) -> Result<Network, CaseError> {
    let base = raw.base_mva;
    let mut index = HashMap::new();
    for (i, row) in raw.bus.iter().enumerate() {
        index.insert(row[BUS_I] as i64, i);
    }
    let bus_of = |table: &str, row: usize, id: f64| {
        index
            .get(&(id as i64))
            .copied()
            .ok_or_else(|| CaseError::UnknownBus {
                table: table.to_string(),
                row,
                bus: id,
            })
    };

    let buses: Vec<Bus> = raw
        .bus
        .iter()
        .map(|row| {
            let demand = row[PD] / base;
            Bus {
                id: row[BUS_I] as usize,
                demand,
                is_load: demand > 0.0,
            }
        })
        .collect();
    let slack_bus = raw
        .bus
        .iter()
        .position(|row| row[BUS_TYPE] == REF)
        .ok_or(CaseError::NoReferenceBus)?;

    let mut generators = Vec::new();
    for (g, row) in raw.gen.iter().enumerate() {
        if row[GEN_STATUS] <= 0.0 {
            continue;
        }
        let cost_row = raw.gencost.get(g).ok_or(CaseError::BadCost { gen: g })?;
        let c1 = linear_cost(cost_row).ok_or(CaseError::BadCost { gen: g })?;
        generators.push(Generator {
            bus: bus_of("gen", g, row[GEN_BUS])?,
            p_min: row[PMIN] / base,
            p_max: row[PMAX] / base,
            cost: c1 * base,
        });
    }

    let mut branches = Vec::new();
    for (l, row) in raw.branch.iter().enumerate() {
        if row[BR_STATUS] <= 0.0 {
            continue;
        }
        if !(row[BR_X] > 0.0) {
            return Err(CaseError::NonpositiveReactance { branch: l });
        }
        let rate = row[RATE_A];
        branches.push(Branch {
            from: bus_of("branch", l, row[F_BUS])?,
            to: bus_of("branch", l, row[T_BUS])?,
            susceptance: 1.0 / row[BR_X],
            f_max: if rate > 0.0 { rate / base } else { f64::INFINITY },
        });
    }

    if let Some(b) = first_unreachable(buses.len(), slack_bus, &branches) {
        return Err(CaseError::DisconnectedNetwork { bus: buses[b].id });
    }
    Ok(Network {
        name: raw.case_name.clone(),
        base_mva: base,
        buses,
        generators,
        branches,
        slack_bus,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read case file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Case { path: String, source: CaseError },
}

/// Reads, parses and converts a case file. A missing function header
/// falls back to the file stem for the case name.
pub fn load_case(path: &Path) -> Result<(RawCase, Network), LoadError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: shown.clone(),
        source,
    })?;
    let wrap = |source| LoadError::Case {
        path: shown.clone(),
        source,
    };
    let mut raw = parse_case(&text).map_err(wrap)?;
    if raw.case_name.is_empty() {
        raw.case_name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    let net = build_network(&raw).map_err(wrap)?;
    Ok((raw, net))
}
