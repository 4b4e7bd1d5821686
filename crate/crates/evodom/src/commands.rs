//! The subcommands. Each writes its files into `out` and a short report to
//! `log`, and returns the process exit code.

use std::io::Write;
use std::path::Path;

use evodom_core::dynamics::{
    periodic_attractor, pullback, simulate_into, stability_product, species_sup, STABILITY_LIMIT,
};
use evodom_core::indexes::{classify_with_lambda0, compare_thresholds, IndexReport};
use evodom_core::monotone::{
    check_coupled_pair, monotone_iterate_periodic, uniform_times, MonotoneConfig, SolutionPairCandidate,
    TransformContext,
};
use evodom_core::presets::sweep_law;
use evodom_core::{eigen, Error, Species, StatePair, Trajectory};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::error::{exit, CliError};
use crate::output::{self, SweepRow, SweepValues};

macro_rules! say {
    ($log:expr, $($arg:tt)*) => {
        writeln!($log, $($arg)*).map_err(|e| CliError::io(Path::new("<stdout>"), e))?
    };
}

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn lambda0(run: &Resolved) -> Result<f64, CliError> {
    Ok(eigen::principal_eigenpair(&run.grid)?.lambda0)
}

/// `meta.json`: the resolved configuration plus grid facts and `extra`.
fn write_meta(out: &Path, run: &Resolved, command: &str, lambda0: f64, extra: Value) -> Result<(), CliError> {
    let iv = run.grid.interval();
    let mut meta = json!({
        "command": command,
        "config": run.config,
        "grid": {
            "interior_nodes": run.grid.len(),
            "spacing": run.grid.spacing(),
            "left": iv.left,
            "right": iv.right,
        },
        "lambda0": lambda0,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
        m.extend(e);
    }
    output::write_json(&out.join("meta.json"), &meta)
}

fn warn_stability(run: &Resolved) -> Result<(), CliError> {
    let prod = stability_product(&run.params, run.config.stepper.dt)?;
    if prod > STABILITY_LIMIT {
        eprintln!("warning: dt * max(k1, k2) = {prod} exceeds {STABILITY_LIMIT}; consider a smaller dt");
    }
    Ok(())
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexesDoc {
    pub lambda0: f64,
    pub R1: f64,
    pub R2: f64,
    pub lam1: f64,
    pub lam2: f64,
    pub R1_star: f64,
    pub R2_star: f64,
    pub D1: f64,
    pub D2: f64,
    pub D1_star: f64,
    pub D2_star: f64,
    pub rho_bar_inv_sq: f64,
    pub regime: &'static str,
    pub coexistence_certified: bool,
    pub threshold_ordering: &'static str,
    pub side_ok_1: bool,
    pub side_ok_2: bool,
    pub M1: f64,
    pub M2: f64,
}

impl IndexesDoc {
    pub fn new(r: &IndexReport) -> Result<Self, CliError> {
        let certified = matches!(
            r.regime,
            evodom_core::indexes::Regime::PersistenceBoth {
                coexistence_certified: true
            }
        );
        Ok(Self {
            lambda0: r.lambda0,
            R1: r.r[0],
            R2: r.r[1],
            lam1: r.lam[0],
            lam2: r.lam[1],
            R1_star: r.r_star[0],
            R2_star: r.r_star[1],
            D1: r.thresholds.evolving[0],
            D2: r.thresholds.evolving[1],
            D1_star: r.thresholds.fixed[0],
            D2_star: r.thresholds.fixed[1],
            rho_bar_inv_sq: r.rho_bar_inv_sq,
            regime: r.regime.label(),
            coexistence_certified: certified,
            threshold_ordering: compare_thresholds(r)?.label(),
            side_ok_1: r.side_ok[0],
            side_ok_2: r.side_ok[1],
            M1: r.m_bound[0],
            M2: r.m_bound[1],
        })
    }
}

pub fn cmd_indexes(run: &Resolved, out: &Path, log: &mut dyn Write) -> Result<u8, CliError> {
    let l0 = lambda0(run)?;
    let report = classify_with_lambda0(&run.params, l0, run.config.quadrature_nodes)?;
    let doc = IndexesDoc::new(&report)?;
    ensure_dir(out)?;
    output::write_json(&out.join("indexes.json"), &doc)?;
    write_meta(out, run, "indexes", l0, json!({}))?;

    say!(log, "lambda0          {}", doc.lambda0);
    say!(log, "rho_bar_inv_sq   {}", doc.rho_bar_inv_sq);
    say!(log, "{:<8} {:>14} {:>14}", "", "species 1", "species 2");
    for (name, a, b) in [
        ("R", doc.R1, doc.R2),
        ("R*", doc.R1_star, doc.R2_star),
        ("lambda", doc.lam1, doc.lam2),
        ("D", doc.D1, doc.D2),
        ("D*", doc.D1_star, doc.D2_star),
        ("M", doc.M1, doc.M2),
    ] {
        say!(log, "{name:<8} {a:>14.6} {b:>14.6}");
    }
    say!(log, "{:<8} {:>14} {:>14}", "side ok", doc.side_ok_1, doc.side_ok_2);
    say!(log, "regime           {}", doc.regime);
    say!(log, "thresholds       {}", doc.threshold_ordering);
    Ok(exit::OK)
}

pub fn cmd_simulate(run: &Resolved, out: &Path, log: &mut dyn Write) -> Result<u8, CliError> {
    let l0 = lambda0(run)?;
    warn_stability(run)?;
    let cfg = run.stepper();
    let mut traj = Trajectory::new();
    let ic = run.config.ic.initial_condition();
    let (status, truncated, code) = match simulate_into(&run.params, &run.grid, &ic, &cfg, &mut traj) {
        Ok(()) => ("ok", None, exit::OK),
        Err(Error::BlowUp { t, sup }) => ("blow_up", Some((t, sup)), exit::BLOW_UP),
        Err(e) => return Err(e.into()),
    };
    let rows = pullback(traj.snapshots(), run.params.law(), &run.grid);
    ensure_dir(out)?;
    output::write_file(&out.join("trajectory.csv"), &output::trajectory_csv(&rows, truncated))?;
    let last = traj.last().expect("initial state is always recorded");
    write_meta(
        out,
        run,
        "simulate",
        l0,
        json!({
            "status": status,
            "snapshots": traj.len(),
            "final_t": last.t,
            "blow_up": truncated.map(|(t, sup)| json!({ "t": t, "sup": sup })),
        }),
    )?;
    say!(log, "snapshots        {}", traj.len());
    say!(log, "final t          {}", last.t);
    say!(log, "final sup v1     {:e}", last.v1.sup());
    say!(log, "final sup v2     {:e}", last.v2.sup());
    if let Some((t, sup)) = truncated {
        say!(log, "blow-up at t = {t} (sup {sup:e}); partial output kept");
    }
    Ok(code)
}

/// Largest sup distance between two paths on the same phases.
fn path_distance(a: &[StatePair], b: &[StatePair]) -> Option<f64> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x.t - y.t).abs() > 1e-9) {
        return None;
    }
    Some(a.iter().zip(b).fold(0.0, |m, (x, y)| m.max(x.sup_distance(y))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    /// Sup distance between the attractor and the upper limit.
    pub upper: Option<f64>,
    pub lower: Option<f64>,
    /// Sup distance between the upper and lower limits.
    pub spread: f64,
    pub attractor_converged: bool,
    pub attractor_periods: usize,
    pub attractor_residual: f64,
    pub monotone_converged: bool,
    pub monotone_iterations: usize,
    pub sup_v1: f64,
    pub sup_v2: f64,
}

pub fn cmd_periodic(run: &Resolved, out: &Path, log: &mut dyn Write) -> Result<u8, CliError> {
    let l0 = lambda0(run)?;
    warn_stability(run)?;
    let c = &run.config;
    let scfg = run.stepper();
    let ic = c.ic.initial_condition();
    let att = periodic_attractor(&run.params, &run.grid, &ic, &scfg, c.attractor.tol, c.attractor.max_periods)?;
    let mcfg = MonotoneConfig {
        dt: c.stepper.dt,
        tol: c.monotone.tol,
        max_iter: c.monotone.max_iter,
        record_every: c.stepper.record_every,
        quadrature_nodes: c.quadrature_nodes,
        keep_iterates: 0,
    };
    let mono = monotone_iterate_periodic(&run.params, &run.grid, &mcfg)?;
    let agreement = Agreement {
        upper: path_distance(&att.snapshots, &mono.upper),
        lower: path_distance(&att.snapshots, &mono.lower),
        spread: mono.spread(),
        attractor_converged: att.converged,
        attractor_periods: att.periods,
        attractor_residual: att.residual,
        monotone_converged: mono.converged,
        monotone_iterations: mono.iterations,
        sup_v1: species_sup(&att.snapshots, Species::One),
        sup_v2: species_sup(&att.snapshots, Species::Two),
    };
    let law = run.params.law();
    ensure_dir(out)?;
    let csv = |snaps: &[StatePair]| output::trajectory_csv(&pullback(snaps, law, &run.grid), None);
    output::write_file(&out.join("attractor.csv"), &csv(&att.snapshots))?;
    output::write_file(&out.join("monotone_upper.csv"), &csv(&mono.upper))?;
    output::write_file(&out.join("monotone_lower.csv"), &csv(&mono.lower))?;
    output::write_file(&out.join("convergence.csv"), &output::convergence_csv(&mono.trace))?;
    output::write_json(&out.join("agreement.json"), &agreement)?;
    let converged = att.converged && mono.converged;
    write_meta(
        out,
        run,
        "periodic",
        l0,
        json!({
            "converged": converged,
            "attractor_converged": att.converged,
            "monotone_converged": mono.converged,
            "degenerate_lower": mono.degenerate_lower,
        }),
    )?;

    let show = |d: Option<f64>| d.map_or("n/a".to_string(), |v| format!("{v:e}"));
    say!(log, "attractor        converged={} periods={} residual={:e}", att.converged, att.periods, att.residual);
    say!(log, "monotone         converged={} iterations={}", mono.converged, mono.iterations);
    say!(log, "sup v1, v2       {:e} {:e}", agreement.sup_v1, agreement.sup_v2);
    say!(log, "agreement        upper={} lower={} spread={:e}", show(agreement.upper), show(agreement.lower), agreement.spread);
    Ok(if converged { exit::OK } else { exit::NO_CONVERGENCE })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// `rho = 1 - m |sin(pi t)|`, `T = 1`.
    Amplitude,
    D1,
    D2,
}

impl SweepAxis {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "m_amplitude" => Some(SweepAxis::Amplitude),
            "d1" => Some(SweepAxis::D1),
            "d2" => Some(SweepAxis::D2),
            _ => None,
        }
    }
}

/// Row values of a sweep; evaluated independently of each other.
pub fn sweep_rows(run: &Resolved, axis: SweepAxis, from: f64, to: f64, steps: usize) -> Result<Vec<SweepRow>, CliError> {
    if !(from.is_finite() && to.is_finite()) {
        return Err(CliError::Config(format!("sweep range must be finite, got [{from}, {to}]")));
    }
    if steps < 2 {
        return Err(CliError::Config(format!("sweep needs at least 2 steps, got {steps}")));
    }
    let l0 = lambda0(run)?;
    let nodes = run.config.quadrature_nodes;
    (0..steps)
        .map(|k| {
            let param = if k + 1 == steps {
                to
            } else {
                from + (to - from) * k as f64 / (steps - 1) as f64
            };
            let params = match axis {
                SweepAxis::Amplitude => sweep_law(param).and_then(|law| run.params.with_law(law)),
                SweepAxis::D1 => run.params.with_diffusion(Species::One, param),
                SweepAxis::D2 => run.params.with_diffusion(Species::Two, param),
            };
            let params = match params {
                Ok(p) => p,
                Err(Error::Config(_) | Error::DomainCollapse { .. }) => return Ok(SweepRow { param, values: None }),
                Err(e) => return Err(e.into()),
            };
            let r = classify_with_lambda0(&params, l0, nodes)?;
            Ok(SweepRow {
                param,
                values: Some(SweepValues {
                    r: r.r,
                    rho_bar_inv_sq: r.rho_bar_inv_sq,
                    regime: r.regime.label(),
                }),
            })
        })
        .collect()
}

pub fn cmd_sweep(
    run: &Resolved,
    out: &Path,
    log: &mut dyn Write,
    axis: SweepAxis,
    from: f64,
    to: f64,
    steps: usize,
) -> Result<u8, CliError> {
    let rows = sweep_rows(run, axis, from, to, steps)?;
    ensure_dir(out)?;
    output::write_file(&out.join("sweep.csv"), &output::sweep_csv(&rows))?;
    let axis_name = match axis {
        SweepAxis::Amplitude => "m_amplitude",
        SweepAxis::D1 => "d1",
        SweepAxis::D2 => "d2",
    };
    let invalid = rows.iter().filter(|r| r.values.is_none()).count();
    write_meta(
        out,
        run,
        "sweep",
        lambda0(run)?,
        json!({ "sweep": { "axis": axis_name, "from": from, "to": to, "steps": steps }, "invalid_rows": invalid }),
    )?;
    say!(log, "{} rows over {axis_name} in [{from}, {to}], {invalid} invalid", rows.len());
    Ok(exit::OK)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyDoc {
    pub ok: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub location: Option<Value>,
    pub residuals: Vec<(String, f64)>,
    pub upper_file: String,
    pub lower_file: String,
}

/// Checks candidate upper/lower files. Missing files are generated: the
/// constant `(M1, M)` upper pair and the zero lower pair.
pub fn cmd_verify(
    run: &Resolved,
    out: &Path,
    log: &mut dyn Write,
    upper: Option<&Path>,
    lower: Option<&Path>,
) -> Result<u8, CliError> {
    let l0 = lambda0(run)?;
    let c = &run.config;
    let law = run.params.law();
    ensure_dir(out)?;
    let ctx = TransformContext::new(&run.params, 0.0)?;
    let times = uniform_times(run.params.period(), c.verify.intervals);
    let generated = SolutionPairCandidate::constant(&run.grid, &times, [ctx.m1, ctx.m], [0.0, 0.0]);

    let load = |given: Option<&Path>, name: &str, path: &[_; 2]| -> Result<(String, Vec<f64>, [_; 2]), CliError> {
        match given {
            Some(p) => {
                let (t, v) = output::read_candidate(p, &run.grid)?;
                Ok((p.display().to_string(), t, v))
            }
            None => {
                output::write_file(&out.join(name), &output::candidate_csv(&times, path, law, &run.grid))?;
                // relative to `out`, so reruns elsewhere give the same report
                Ok((name.to_string(), times.clone(), path.clone()))
            }
        }
    };
    let (upper_file, ut, up) = load(upper, "upper.csv", &generated.upper)?;
    let (lower_file, lt, lo) = load(lower, "lower.csv", &generated.lower)?;
    if ut.len() != lt.len() || ut.iter().zip(&lt).any(|(a, b)| (a - b).abs() > 1e-9) {
        return Err(CliError::Schema {
            path: lower_file,
            msg: "upper and lower candidates use different time levels".into(),
        });
    }
    let cand = SolutionPairCandidate {
        times: ut,
        upper: up,
        lower: lo,
    };
    let report = check_coupled_pair(&cand, &run.params, &run.grid, c.verify.rel_tol)?;
    let doc = VerifyDoc {
        ok: report.ok,
        worst_violation: report.worst_violation,
        tolerance: report.tolerance,
        location: report
            .location
            .map(|s| json!({ "condition": s.condition, "t": s.t, "y": s.y })),
        residuals: report.residuals.iter().map(|(n, r)| (n.to_string(), *r)).collect(),
        upper_file,
        lower_file,
    };
    output::write_json(&out.join("verify.json"), &doc)?;
    write_meta(out, run, "verify", l0, json!({ "ok": report.ok }))?;

    for (name, r) in &report.residuals {
        let mark = if *r >= -report.tolerance { "ok" } else { "VIOLATED" };
        say!(log, "{name:<18} {r:>14.6e}  {mark}");
    }
    match report.location {
        Some(s) if !report.ok => say!(
            log,
            "not ok: worst violation {:e} in {} at t = {}, y = {}",
            report.worst_violation,
            s.condition,
            s.t,
            s.y
        ),
        _ => say!(log, "ok"),
    }
    Ok(if report.ok { exit::OK } else { exit::FAILURE })
}
