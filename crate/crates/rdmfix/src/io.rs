//! Text formats: density-matrix files, fix reports and sweep tables.
//!
//! A density-matrix file starts with the header line
//!
//! ```text
//! RDMFIX1 <SPIN|DOCI> <L> <N>
//! ```
//!
//! with `L` spatial orbitals (at most 32) and an even electron count `N` in
//! `[2, 2L]`. Blank lines and `#` comments are skipped anywhere. A DOCI
//! payload is `L` rows of the pair matrix followed by `L` rows of the
//! exchange matrix, whitespace-separated; both must be symmetric and the
//! exchange diagonal zero. A SPIN payload is one canonical element per line,
//!
//! ```text
//! a b c d value
//! ```
//!
//! with spin orbitals `a < b`, `c < d`, `(a,b) <= (c,d)` in pair-index
//! order; omitted elements are zero and duplicates are rejected. Values are
//! written with 17 significant digits so parsing a serialized file
//! reproduces every value bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{RdmError, Result};
use crate::fixer::FixReport;
use crate::rdm::{pair_count, pair_index, Doci2Rdm, Spin2Rdm, ValidationReport};
use crate::sweep::SweepRow;

/// Format tag expected on the header line.
pub const FORMAT_TAG: &str = "RDMFIX1";
/// Largest spatial orbital count a file may declare.
pub const MAX_LEVELS: usize = 32;
/// Version stamp written above the sweep table header.
pub const SWEEP_SCHEMA: &str = "rdmfix.sweep.v1";

/// A density matrix in either representation, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum RdmFile {
    Spin(Spin2Rdm),
    Doci(Doci2Rdm),
}

impl RdmFile {
    pub fn representation(&self) -> &'static str {
        match self {
            RdmFile::Spin(_) => "SPIN",
            RdmFile::Doci(_) => "DOCI",
        }
    }

    pub fn parse_str(text: &str) -> Result<RdmFile> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (line_no, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file, expected a header line"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(
                line_no,
                format!("header must be '{FORMAT_TAG} <SPIN|DOCI> <L> <N>', got '{header}'"),
            ));
        }
        if fields[0] != FORMAT_TAG {
            return Err(parse_err(
                line_no,
                format!("unknown format tag '{}'", fields[0]),
            ));
        }
        let l: usize = fields[2]
            .parse()
            .map_err(|_| parse_err(line_no, format!("invalid orbital count '{}'", fields[2])))?;
        let n: usize = fields[3]
            .parse()
            .map_err(|_| parse_err(line_no, format!("invalid electron count '{}'", fields[3])))?;
        if l == 0 || l > MAX_LEVELS {
            return Err(parse_err(
                line_no,
                format!("orbital count {l} outside [1, {MAX_LEVELS}]"),
            ));
        }
        if n < 2 || n % 2 != 0 || n > 2 * l {
            return Err(parse_err(
                line_no,
                format!("electron count {n} must be even and within [2, {}]", 2 * l),
            ));
        }
        match fields[1] {
            "DOCI" => parse_doci(lines, l, n),
            "SPIN" => parse_spin(lines, l, n),
            other => Err(parse_err(
                line_no,
                format!("unknown representation '{other}' (expected SPIN or DOCI)"),
            )),
        }
    }

    pub fn read_path(path: &Path) -> Result<RdmFile> {
        let text = std::fs::read_to_string(path)?;
        RdmFile::parse_str(&text)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        match self {
            RdmFile::Doci(r) => {
                writeln!(out, "{FORMAT_TAG} DOCI {} {}", r.l(), r.n()).unwrap();
                for m in [r.pair_matrix(), r.exchange_matrix()] {
                    for a in 0..r.l() {
                        let row: Vec<String> =
                            (0..r.l()).map(|b| format!("{:.16e}", m[(a, b)])).collect();
                        writeln!(out, "{}", row.join(" ")).unwrap();
                    }
                }
            }
            RdmFile::Spin(g2) => {
                writeln!(out, "{FORMAT_TAG} SPIN {} {}", g2.l(), g2.n()).unwrap();
                let m = g2.num_spin_orbitals();
                for b in 1..m {
                    for a in 0..b {
                        let p = pair_index(a, b);
                        for d in 1..m {
                            for c in 0..d {
                                let q = pair_index(c, d);
                                if q < p {
                                    continue;
                                }
                                let v = g2.packed()[(p, q)];
                                if v != 0.0 {
                                    writeln!(out, "{a} {b} {c} {d} {v:.16e}").unwrap();
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> RdmError {
    RdmError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_value(line_no: usize, token: &str) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line_no, format!("invalid number '{token}'")))?;
    if !v.is_finite() {
        return Err(parse_err(line_no, format!("non-finite value '{token}'")));
    }
    Ok(v)
}

fn parse_doci<'a>(
    mut lines: impl Iterator<Item = (usize, &'a str)>,
    l: usize,
    n: usize,
) -> Result<RdmFile> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * l);
    let mut last_line = 0;
    for _ in 0..2 * l {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| parse_err(last_line + 1, format!("expected {} matrix rows", 2 * l)))?;
        last_line = line_no;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| parse_value(line_no, t))
            .collect::<Result<_>>()?;
        if row.len() != l {
            return Err(parse_err(
                line_no,
                format!("expected {l} values per row, got {}", row.len()),
            ));
        }
        rows.push(row);
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(parse_err(line_no, "trailing content after the matrices"));
    }
    let pi = DMatrix::from_fn(l, l, |a, b| rows[a][b]);
    let d = DMatrix::from_fn(l, l, |a, b| rows[l + a][b]);
    for (name, m) in [("pair", &pi), ("exchange", &d)] {
        for a in 0..l {
            for b in 0..a {
                if m[(a, b)] != m[(b, a)] {
                    return Err(parse_err(
                        last_line,
                        format!("{name} matrix is not symmetric at ({a},{b})"),
                    ));
                }
            }
        }
    }
    for a in 0..l {
        if d[(a, a)] != 0.0 {
            return Err(parse_err(
                last_line,
                format!("exchange diagonal ({a},{a}) must be zero"),
            ));
        }
    }
    let r = Doci2Rdm::new(l, n, pi, d).map_err(|e| parse_err(last_line, e.to_string()))?;
    Ok(RdmFile::Doci(r))
}

fn parse_spin<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    l: usize,
    n: usize,
) -> Result<RdmFile> {
    let m = 2 * l;
    let k = pair_count(m);
    let mut mat = DMatrix::zeros(k, k);
    let mut seen = vec![false; k * k];
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(parse_err(
                line_no,
                format!("expected 'a b c d value', got {} fields", fields.len()),
            ));
        }
        let mut idx = [0usize; 4];
        for (slot, token) in idx.iter_mut().zip(&fields[..4]) {
            *slot = token
                .parse()
                .map_err(|_| parse_err(line_no, format!("invalid index '{token}'")))?;
        }
        let [a, b, c, d] = idx;
        if b >= m || d >= m {
            return Err(parse_err(
                line_no,
                format!("index out of range for {m} spin orbitals"),
            ));
        }
        if a >= b || c >= d {
            return Err(parse_err(line_no, "indices must satisfy a < b and c < d"));
        }
        let p = pair_index(a, b);
        let q = pair_index(c, d);
        if q < p {
            return Err(parse_err(
                line_no,
                "element not in canonical order: (a,b) must not come after (c,d)",
            ));
        }
        if seen[p * k + q] {
            return Err(parse_err(line_no, format!("duplicate element {a} {b} {c} {d}")));
        }
        seen[p * k + q] = true;
        let v = parse_value(line_no, fields[4])?;
        mat[(p, q)] = v;
        mat[(q, p)] = v;
    }
    let g2 = Spin2Rdm::from_packed(l, n, mat).map_err(|e| parse_err(0, e.to_string()))?;
    Ok(RdmFile::Spin(g2))
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a fix report as a JSON document.
pub fn report_json(
    mode: &str,
    report: &FixReport,
    initial: &ValidationReport,
    final_state: &ValidationReport,
) -> String {
    let validation = |rep: &ValidationReport| {
        let mut obj = serde_json::Map::new();
        obj.insert("max_violation".into(), rep.max_violation().into());
        obj.insert("trace_error".into(), rep.trace_error.into());
        obj.insert("min_eig_p".into(), rep.min_eig_p.into());
        obj.insert("min_eig_q".into(), rep.min_eig_q.into());
        obj.insert("min_eig_g".into(), rep.min_eig_g.into());
        if let Some(v) = rep.exchange_sum_error {
            obj.insert("exchange_sum_error".into(), v.into());
        }
        if let Some(v) = rep.min_g2x2 {
            obj.insert("min_g2x2".into(), v.into());
        }
        if let Some(v) = rep.min_exchange_entry {
            obj.insert("min_exchange_entry".into(), v.into());
        }
        if let Some(v) = rep.min_hole_exchange_entry {
            obj.insert("min_hole_exchange_entry".into(), v.into());
        }
        if let Some(v) = rep.occupation_consistency {
            obj.insert("occupation_consistency".into(), v.into());
        }
        serde_json::Value::Object(obj)
    };
    let sweeps: Vec<serde_json::Value> = report
        .records
        .iter()
        .map(|rec| {
            serde_json::json!({
                "sweep": rec.sweep,
                "frobenius_change": rec.frobenius_change,
                "conditions": rec.conditions.iter().map(|c| serde_json::json!({
                    "name": c.name,
                    "trace_error": c.trace_error,
                    "min_value": c.min_value,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "mode": mode,
        "converged": report.converged,
        "sweeps_used": report.sweeps_used,
        "final_cost": report.final_cost,
        "initial": validation(initial),
        "final": validation(final_state),
        "sweeps": sweeps,
    });
    serde_json::to_string_pretty(&doc).expect("report is valid JSON") + "\n"
}

/// Renders sweep rows as a versioned table: a schema comment, the fixed
/// header, one line per grid point.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    writeln!(out, "# schema: {SWEEP_SCHEMA}").unwrap();
    writeln!(
        out,
        "g,e_exact,e_pccd,pccd_converged,e_fixed,fixer_converged,\
         cost_resp_vs_fixed,cost_resp_vs_exact,cost_fixed_vs_exact,\
         violation_initial,sweeps_used"
    )
    .unwrap();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_float(r.g),
            fmt_float(r.e_exact),
            fmt_float(r.e_pccd),
            r.pccd_converged,
            fmt_float(r.e_fixed),
            r.fixer_converged,
            fmt_float(r.cost_resp_vs_fixed),
            fmt_float(r.cost_resp_vs_exact),
            fmt_float(r.cost_fixed_vs_exact),
            fmt_float(r.violation_initial),
            r.sweeps_used
        )
        .unwrap();
    }
    out
}
