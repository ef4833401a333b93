//! File formats shared with the command-line tool. Every CSV has a header
//! row and parses back through this module.
//!
//! * Two-priced rules: `value,qv,qc` with the capacity in a sidecar JSON
//!   metadata file next to the CSV.
//! * Payment curves: `value,x,p_rn,p_vc,p_cap,bid` (bid empty where the
//!   allocation is zero).
//! * Revenue reports: `mechanism,revenue,ci,ratio,pass`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auctions::AgentCurves;
use crate::two_price::TwoPricedRule;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed {what} at line {line}: {detail}")]
    Parse { what: &'static str, line: usize, detail: String },
    #[error("rule file rejected: {0}")]
    BadRule(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleMeta {
    #[serde(with = "crate::dist::capacity_serde")]
    pub capacity: f64,
}

fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn rule_to_csv(rule: &TwoPricedRule<f64>) -> String {
    let mut out = String::from("value,qv,qc\n");
    for i in 0..rule.len() {
        let _ = writeln!(out, "{},{},{}", rule.grid[i], rule.qv[i], rule.qc[i]);
    }
    out
}

/// Write `value,qv,qc` rows plus the capacity sidecar `<stem>.meta.json`.
pub fn write_rule(path: &Path, rule: &TwoPricedRule<f64>) -> Result<(), IoError> {
    fs::write(path, rule_to_csv(rule))?;
    let meta = RuleMeta { capacity: rule.capacity };
    fs::write(meta_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_rule(path: &Path) -> Result<TwoPricedRule<f64>, IoError> {
    let meta: RuleMeta = serde_json::from_str(&fs::read_to_string(meta_path(path))?)?;
    let text = fs::read_to_string(path)?;
    let mut grid = Vec::new();
    let mut qv = Vec::new();
    let mut qc = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "value,qv,qc" {
                return Err(IoError::Parse { what: "rule csv", line: 1, detail: "bad header".into() });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(IoError::Parse { what: "rule csv", line: i + 1, detail: "need 3 fields".into() });
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| IoError::Parse { what: "rule csv", line: i + 1, detail: e.to_string() })
        };
        grid.push(parse(fields[0])?);
        qv.push(parse(fields[1])?);
        qc.push(parse(fields[2])?);
    }
    TwoPricedRule::new(grid, qv, qc, meta.capacity).map_err(|e| IoError::BadRule(e.to_string()))
}

/// Flat table of one agent's payment curves.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub value: Vec<f64>,
    pub x: Vec<f64>,
    pub p_rn: Vec<f64>,
    pub p_vc: Vec<f64>,
    pub p_cap: Vec<f64>,
    /// Payment per win; empty column entries where the allocation is zero.
    pub bid: Vec<Option<f64>>,
}

impl CurveTable {
    pub fn from_curves(c: &AgentCurves) -> Self {
        let n = c.alloc.len();
        let mut bid = vec![None; n];
        for (v, b) in c.bid.values.iter().zip(&c.bid.bids) {
            if let Some(i) = c.alloc.grid.iter().position(|g| g == v) {
                bid[i] = Some(*b);
            }
        }
        CurveTable {
            value: c.alloc.grid.clone(),
            x: c.alloc.x.clone(),
            p_rn: c.p_rn.p.clone(),
            p_vc: c.p_vc.p.clone(),
            p_cap: c.p_cap.p.clone(),
            bid,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,x,p_rn,p_vc,p_cap,bid\n");
        for i in 0..self.value.len() {
            let bid = self.bid[i].map(|b| b.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.value[i], self.x[i], self.p_rn[i], self.p_vc[i], self.p_cap[i], bid
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, IoError> {
        let mut t = CurveTable {
            value: vec![],
            x: vec![],
            p_rn: vec![],
            p_vc: vec![],
            p_cap: vec![],
            bid: vec![],
        };
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line.trim() != "value,x,p_rn,p_vc,p_cap,bid" {
                    return Err(IoError::Parse { what: "curve csv", line: 1, detail: "bad header".into() });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(IoError::Parse { what: "curve csv", line: i + 1, detail: "need 6 fields".into() });
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| IoError::Parse { what: "curve csv", line: i + 1, detail: e.to_string() })
            };
            t.value.push(parse(fields[0])?);
            t.x.push(parse(fields[1])?);
            t.p_rn.push(parse(fields[2])?);
            t.p_vc.push(parse(fields[3])?);
            t.p_cap.push(parse(fields[4])?);
            t.bid.push(if fields[5].trim().is_empty() { None } else { Some(parse(fields[5])?) });
        }
        Ok(t)
    }
}

/// One line of a revenue/ratio report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub mechanism: String,
    pub revenue: f64,
    pub ci: f64,
    pub ratio: f64,
    pub pass: bool,
}

pub fn report_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("mechanism,revenue,ci,ratio,pass\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.mechanism, r.revenue, r.ci, r.ratio, r.pass);
    }
    out
}

pub fn report_from_csv(text: &str) -> Result<Vec<ReportRow>, IoError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "mechanism,revenue,ci,ratio,pass" {
                return Err(IoError::Parse { what: "report csv", line: 1, detail: "bad header".into() });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(IoError::Parse { what: "report csv", line: i + 1, detail: "need 5 fields".into() });
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| IoError::Parse { what: "report csv", line: i + 1, detail: e.to_string() })
        };
        rows.push(ReportRow {
            mechanism: fields[0].trim().to_string(),
            revenue: parse(fields[1])?,
            ci: parse(fields[2])?,
            ratio: parse(fields[3])?,
            pass: fields[4].trim() == "true",
        });
    }
    Ok(rows)
}
