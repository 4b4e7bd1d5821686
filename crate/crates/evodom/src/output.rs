//! File formats. Numbers are written as the shortest decimal that parses
//! back to the same `f64`, lines end in `\n`, so identical runs give
//! identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use evodom_core::dynamics::PullbackRow;
use evodom_core::monotone::{IterationTrace, NodalPath};
use evodom_core::{EvolutionLaw, Grid};
use serde::Serialize;

use crate::error::CliError;

pub const TRAJECTORY_HEADER: &str = "t,y,v1,v2,x,u1,u2";
pub const CONVERGENCE_HEADER: &str = "iter,gap_upper,gap_lower,periodicity_residual,violation";
pub const SWEEP_HEADER: &str = "param,R1,R2,rho_bar_inv_sq,regime";
/// Prefix of the row appended to a trajectory cut short by blow-up.
pub const TRUNCATION_MARKER: &str = "# truncated";

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_file(path, &text)
}

/// Shortest round-trip decimal, with an exponent for very large or small values.
pub fn num(v: f64) -> String {
    ryu::Buffer::new().format(v).to_string()
}

fn row(out: &mut String, values: &[f64]) {
    let mut buf = ryu::Buffer::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(buf.format(*v));
    }
    out.push('\n');
}

pub fn trajectory_csv(rows: &[PullbackRow], truncated: Option<(f64, f64)>) -> String {
    let mut out = String::with_capacity(64 * rows.len() + 32);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        row(&mut out, &[r.t, r.y, r.v1, r.v2, r.x, r.u1, r.u2]);
    }
    if let Some((t, sup)) = truncated {
        writeln!(out, "{TRUNCATION_MARKER} at t={} sup={}", num(t), num(sup)).unwrap();
    }
    out
}

/// Candidate path in the trajectory schema, boundary values included as
/// given (unlike [`trajectory_csv`] rows from a pullback, which pin them to 0).
pub fn candidate_csv(times: &[f64], path: &[NodalPath; 2], law: &EvolutionLaw, grid: &Grid) -> String {
    let ys = grid.all_nodes();
    let mut out = String::new();
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for (k, &t) in times.iter().enumerate() {
        let rho = law.rho(t);
        for (j, &y) in ys.iter().enumerate() {
            let (v1, v2) = (path[0][k][j], path[1][k][j]);
            row(&mut out, &[t, y, v1, v2, rho * y, v1, v2]);
        }
    }
    out
}

/// Reads a trajectory-schema file as a nodal path on `grid`. Rows must be
/// grouped by time with every node, boundaries included, in ascending order.
pub fn read_candidate(path: &Path, grid: &Grid) -> Result<(Vec<f64>, [NodalPath; 2]), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let schema = |line: usize, msg: String| CliError::Schema {
        path: path.display().to_string(),
        msg: format!("line {line}: {msg}"),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == TRAJECTORY_HEADER => {}
        Some((i, h)) => return Err(schema(i + 1, format!("expected header `{TRAJECTORY_HEADER}`, found `{h}`"))),
        None => return Err(schema(1, "empty file".into())),
    }
    let ys = grid.all_nodes();
    let per = ys.len();
    let tol = 1e-9 * grid.interval().length();
    let mut times = Vec::new();
    let mut v: [NodalPath; 2] = [Vec::new(), Vec::new()];
    let mut count = 0usize;
    for (i, line) in lines {
        let fields: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| schema(i + 1, format!("bad number: {e}")))?;
        if fields.len() != 7 {
            return Err(schema(i + 1, format!("expected 7 columns, found {}", fields.len())));
        }
        let j = count % per;
        if j == 0 {
            times.push(fields[0]);
            v[0].push(Vec::with_capacity(per));
            v[1].push(Vec::with_capacity(per));
        } else if fields[0] != *times.last().unwrap() {
            return Err(schema(i + 1, format!("time {} has {j} rows, the grid has {per} nodes", times.last().unwrap())));
        }
        if (fields[1] - ys[j]).abs() > tol {
            return Err(schema(i + 1, format!("node {j} should be at y = {}, found {}", ys[j], fields[1])));
        }
        v[0].last_mut().unwrap().push(fields[2]);
        v[1].last_mut().unwrap().push(fields[3]);
        count += 1;
    }
    if count == 0 || count % per != 0 {
        return Err(schema(text.lines().count(), format!("last time level is incomplete ({per} nodes expected)")));
    }
    Ok((times, v))
}

pub fn convergence_csv(trace: &IterationTrace) -> String {
    let mut out = String::new();
    out.push_str(CONVERGENCE_HEADER);
    out.push('\n');
    for r in &trace.records {
        write!(out, "{},", r.m).unwrap();
        row(&mut out, &[r.gap_upper, r.gap_lower, r.periodicity_residual, r.violation]);
    }
    out
}

/// One line of `sweep.csv`; `None` marks a parameter value without a valid model.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub values: Option<SweepValues>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepValues {
    pub r: [f64; 2],
    pub rho_bar_inv_sq: f64,
    pub regime: &'static str,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        match &r.values {
            Some(v) => {
                let [p, r1, r2, m] = [r.param, v.r[0], v.r[1], v.rho_bar_inv_sq].map(num);
                writeln!(out, "{p},{r1},{r2},{m},{}", v.regime).unwrap()
            }
            None => writeln!(out, "{},,,,invalid", num(r.param)).unwrap(),
        }
    }
    out
}
