//! CSV formats for trajectories and measure tables.
//!
//! Floats are written with 17 significant digits so every value survives a
//! round trip; infinities are written as `inf`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::measures::{DecompositionCurve, DecompositionPoint};
use crate::simulate::{Scheme, TrajectoryEnsemble};

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_float(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ if s.bytes().any(|b| b.is_ascii_alphabetic() && b != b'e' && b != b'E') => None,
        _ => s.parse().ok(),
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Header `time,<node>...`, a metadata comment, then one block per
/// trajectory introduced by `# trajectory <k>`.
pub fn write_trajectories(ensemble: &TrajectoryEnsemble) -> String {
    let mut out = String::new();
    out.push_str("time");
    for l in &ensemble.labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "# seed={} dt={} scheme={} steps={} n_traj={}",
        ensemble.seed,
        format_float(ensemble.dt),
        ensemble.scheme,
        ensemble.steps,
        ensemble.n_traj
    );
    for k in 0..ensemble.n_traj {
        let _ = writeln!(out, "# trajectory {k}");
        let traj = ensemble.trajectory(k);
        for s in 0..ensemble.steps {
            out.push_str(&format_float(ensemble.time(s)));
            for v in &traj[s * ensemble.nodes()..(s + 1) * ensemble.nodes()] {
                out.push(',');
                out.push_str(&format_float(*v));
            }
            out.push('\n');
        }
    }
    out
}

/// Reads the trajectory format back. Without a metadata line the step is
/// taken from the first two time stamps and the seed is zero.
pub fn parse_trajectories(text: &str) -> Result<TrajectoryEnsemble> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_error(1, "empty file"))?;
    let mut cols = header.split(',').map(str::trim);
    if cols.next() != Some("time") {
        return Err(parse_error(hline, "header must start with `time`"));
    }
    let labels: Vec<String> = cols.map(str::to_string).collect();
    if labels.is_empty() || labels.iter().any(|l| l.is_empty()) {
        return Err(parse_error(hline, "missing node columns"));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(parse_error(hline, format!("duplicate column `{l}`")));
        }
    }
    let n = labels.len();

    let mut seed = 0u64;
    let mut scheme = Scheme::Exact;
    let mut dt: Option<f64> = None;
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for (line, l) in lines {
        if let Some(comment) = l.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("trajectory") {
                let k: usize = rest
                    .trim()
                    .parse()
                    .map_err(|_| parse_error(line, "bad trajectory index"))?;
                if k != blocks.len() {
                    return Err(parse_error(line, format!("expected trajectory {}", blocks.len())));
                }
                blocks.push(Vec::new());
            } else {
                for kv in comment.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("seed", v)) => {
                            seed = v.parse().map_err(|_| parse_error(line, "bad seed"))?
                        }
                        Some(("dt", v)) => {
                            dt = Some(
                                parse_float(v)
                                    .filter(|d| d.is_finite() && *d > 0.0)
                                    .ok_or_else(|| parse_error(line, "bad dt"))?,
                            )
                        }
                        Some(("scheme", v)) => {
                            scheme = v.parse().map_err(|_| parse_error(line, "bad scheme"))?
                        }
                        _ => {}
                    }
                }
            }
            continue;
        }
        let first = blocks.len() == 1;
        let block = blocks
            .last_mut()
            .ok_or_else(|| parse_error(line, "data before `# trajectory 0`"))?;
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            return Err(parse_error(
                line,
                format!("expected {} fields, found {}", n + 1, fields.len()),
            ));
        }
        let mut row = Vec::with_capacity(n + 1);
        for f in &fields {
            let v = parse_float(f)
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(line, format!("bad number `{f}`")))?;
            row.push(v);
        }
        if first {
            times.push(row[0]);
        }
        block.extend_from_slice(&row[1..]);
    }
    let steps = blocks.first().map_or(0, |b| b.len() / n);
    if blocks.iter().any(|b| b.len() != steps * n) {
        return Err(parse_error(0, "trajectories differ in length"));
    }
    let dt = match dt {
        Some(d) => d,
        None if times.len() >= 2 && times[1] > times[0] => times[1] - times[0],
        None => 1.0,
    };
    Ok(TrajectoryEnsemble {
        labels,
        dt,
        steps,
        n_traj: blocks.len(),
        seed,
        scheme,
        data: blocks.concat(),
    })
}

/// A numeric table with `# key=value` metadata lines after the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub footer: Vec<(String, String)>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.footer
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format_float(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        for (k, v) in &self.footer {
            let _ = writeln!(out, "# {k}={v}");
        }
        out
    }
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut footer = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let line = i + 1;
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(c) = l.strip_prefix('#') {
            if let Some((k, v)) = c.trim().split_once('=') {
                footer.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        match &columns {
            None => {
                let cols: Vec<String> = l.split(',').map(|c| c.trim().to_string()).collect();
                if cols.iter().any(|c| c.is_empty()) {
                    return Err(parse_error(line, "empty column name"));
                }
                columns = Some(cols);
            }
            Some(cols) => {
                let fields: Vec<&str> = l.split(',').map(str::trim).collect();
                if fields.len() != cols.len() {
                    return Err(parse_error(
                        line,
                        format!("expected {} fields, found {}", cols.len(), fields.len()),
                    ));
                }
                let row = fields
                    .iter()
                    .map(|f| parse_float(f).ok_or_else(|| parse_error(line, format!("bad number `{f}`"))))
                    .collect::<Result<Vec<_>>>()?;
                rows.push(row);
            }
        }
    }
    Ok(Table {
        columns: columns.ok_or_else(|| parse_error(1, "missing header"))?,
        rows,
        footer,
    })
}

/// Curve table with the standard measure columns, optional extra columns
/// (one value per point) and the summary footer.
pub fn curve_table(curve: &DecompositionCurve, extra: &[(&str, Vec<f64>)]) -> Table {
    let mut columns: Vec<String> = DecompositionPoint::COLUMNS.iter().map(|c| c.to_string()).collect();
    columns.extend(extra.iter().map(|(n, _)| n.to_string()));
    let rows = curve
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = p.values().to_vec();
            r.extend(extra.iter().map(|(_, v)| v[i]));
            r
        })
        .collect();
    let parents: Vec<&str> = curve.conditioned_on.iter().collect();
    Table {
        columns,
        rows,
        footer: vec![
            ("source".into(), curve.source.clone()),
            ("target".into(), curve.target.clone()),
            ("conditioned_on".into(), parents.join(" ")),
            ("r_wb_conditioned".into(), curve.r_wb_conditioned.to_string()),
            ("peak_i".into(), format_float(curve.peak_i)),
            ("peak_c".into(), format_float(curve.peak_c)),
            ("tau_opt".into(), format_float(curve.tau_opt)),
            ("tau_res".into(), format_float(curve.tau_res)),
        ],
    }
}
