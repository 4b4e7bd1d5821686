//! Time integration of the fixed-domain system and pullback to the evolving
//! domain.
//!
//! Space is discretized with the three-point Laplacian; diffusion is implicit
//! and the reaction (with dilution) explicit, so every step costs two
//! tridiagonal solves per species.

use alloc::vec::Vec;
use libm::round;

use crate::error::{config, Error, Result};
use crate::grid::{Field, Grid, StatePair, Trajectory};
use crate::model::{CoefficientsAt, ModelParams, Species};
use crate::monotone::lipschitz_constants;
use crate::periodic::EvolutionLaw;
use crate::tridiag::Toeplitz;

/// Solutions whose sup norm exceeds this are reported as blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e6;

/// `dt * max(k1, k2)` above this triggers a stability warning.
pub const STABILITY_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Backward Euler diffusion with `d/rho^2` frozen at the new time level.
    #[default]
    ImexBe,
    /// Crank-Nicolson diffusion with the averaged coefficient and a Heun
    /// predictor-corrector for the reaction.
    ImexCn,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ImexBe => "imex_be",
            Scheme::ImexCn => "imex_cn",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "imex_be" => Some(Scheme::ImexBe),
            "imex_cn" => Some(Scheme::ImexCn),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Record a snapshot every this many steps.
    pub record_every: usize,
}

impl StepperConfig {
    pub fn new(dt: f64, t_end: f64, scheme: Scheme, record_every: usize) -> Result<Self> {
        let cfg = Self {
            dt,
            t_end,
            scheme,
            record_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return config(alloc::format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return config(alloc::format!(
                "t_end must be at least dt, got t_end = {} and dt = {}",
                self.t_end,
                self.dt
            ));
        }
        if self.record_every == 0 {
            return config("record_every must be at least 1");
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`; the step is adjusted to land on it.
    pub fn steps(&self) -> usize {
        steps_for(self.t_end, self.dt)
    }

    pub fn effective_dt(&self) -> f64 {
        self.t_end / self.steps() as f64
    }
}

pub(crate) fn steps_for(span: f64, dt: f64) -> usize {
    (round(span / dt) as usize).max(1)
}

/// `dt * max(k1, k2)`; values above [`STABILITY_LIMIT`] deserve a warning.
pub fn stability_product(params: &ModelParams, dt: f64) -> Result<f64> {
    let k = lipschitz_constants(params)?;
    Ok(dt * k.k1.max(k.k2))
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// `v_i = A sin(pi (y - left) / L)` for both species.
    SineBump { amplitude: f64 },
    /// Interior values for each species.
    Sampled { v1: Field, v2: Field },
    /// Both species equal to `value` at every interior node.
    ConstantClipped { value: f64 },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::SineBump { amplitude: 5.0 }
    }
}

impl InitialCondition {
    pub fn fields(&self, grid: &Grid) -> Result<(Field, Field)> {
        let (v1, v2) = match self {
            InitialCondition::SineBump { amplitude } => {
                let iv = grid.interval();
                let f: Field = grid
                    .interior()
                    .iter()
                    .map(|y| amplitude * libm::sin(core::f64::consts::PI * (y - iv.left) / iv.length()))
                    .collect::<Vec<_>>()
                    .into();
                (f.clone(), f)
            }
            InitialCondition::Sampled { v1, v2 } => {
                if v1.len() != grid.len() || v2.len() != grid.len() {
                    return config(alloc::format!(
                        "sampled initial data has {} and {} values, the grid has {} interior nodes",
                        v1.len(),
                        v2.len(),
                        grid.len()
                    ));
                }
                (v1.clone(), v2.clone())
            }
            InitialCondition::ConstantClipped { value } => {
                let f = Field(alloc::vec![*value; grid.len()]);
                (f.clone(), f)
            }
        };
        for (name, f) in [("v1", &v1), ("v2", &v2)] {
            if !f.iter().all(|v| v.is_finite() && *v >= 0.0) {
                return config(alloc::format!("initial {name} must be finite and nonnegative"));
            }
        }
        Ok((v1, v2))
    }

    pub fn state(&self, grid: &Grid) -> Result<StatePair> {
        let (v1, v2) = self.fields(grid)?;
        Ok(StatePair::new(v1, v2, 0.0))
    }
}

/// `f1, f2` including dilution, evaluated at time `t`.
pub fn reaction(params: &ModelParams, t: f64, v1: f64, v2: f64) -> (f64, f64) {
    params.coefficients_at(t).reaction(v1, v2)
}

/// Solves `(I + r A_b) u = rhs` in place, where `A_b` is `-h^2 Delta_h` with
/// boundary value `b`.
pub(crate) fn implicit_diffusion(solver: &mut Toeplitz, r: f64, boundary: f64, rhs: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    rhs[0] += r * boundary;
    rhs[n - 1] += r * boundary;
    solver.solve(1.0 + 2.0 * r, -r, rhs)
}

/// Reusable stepper bound to one parameter set and grid.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    params: &'a ModelParams,
    grid: Grid,
    scheme: Scheme,
    solver: Toeplitz,
    inv_h2: f64,
}

impl<'a> Integrator<'a> {
    pub fn new(params: &'a ModelParams, grid: Grid, scheme: Scheme) -> Self {
        let h = grid.spacing();
        Self {
            params,
            grid,
            scheme,
            solver: Toeplitz::new(grid.len()),
            inv_h2: 1.0 / (h * h),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn step(&mut self, state: &StatePair, dt: f64) -> Result<StatePair> {
        self.advance(state, state.t + dt)
    }

    /// Advances `state` to `t_next`.
    pub fn advance(&mut self, state: &StatePair, t_next: f64) -> Result<StatePair> {
        let n = self.grid.len();
        if state.v1.len() != n || state.v2.len() != n {
            return config(alloc::format!(
                "state has {} and {} values, the grid has {n} interior nodes",
                state.v1.len(),
                state.v2.len()
            ));
        }
        let dt = t_next - state.t;
        let now = self.params.coefficients_at(state.t);
        let next = self.params.coefficients_at(t_next);
        let (f1, f2) = reaction_fields(&now, &state.v1, &state.v2);

        let (v1, v2) = match self.scheme {
            Scheme::ImexBe => {
                let mut out = [Vec::new(), Vec::new()];
                for (s, (v, f)) in [(&state.v1, &f1), (&state.v2, &f2)].into_iter().enumerate() {
                    let mut rhs: Vec<f64> = v.iter().zip(f).map(|(v, f)| v + dt * f).collect();
                    let r = dt * next.diffusion[s] * self.inv_h2;
                    implicit_diffusion(&mut self.solver, r, 0.0, &mut rhs)?;
                    out[s] = rhs;
                }
                let [a, b] = out;
                (a, b)
            }
            Scheme::ImexCn => {
                let mut explicit = [Vec::new(), Vec::new()];
                let mut predicted = [Vec::new(), Vec::new()];
                let mut r = [0.0; 2];
                for (s, (v, f)) in [(&state.v1, &f1), (&state.v2, &f2)].into_iter().enumerate() {
                    r[s] = 0.5 * dt * (now.diffusion[s] + next.diffusion[s]) * self.inv_h2;
                    explicit[s] = half_explicit(v, r[s]);
                    let mut rhs: Vec<f64> = explicit[s].iter().zip(f).map(|(e, f)| e + dt * f).collect();
                    self.solver.solve(1.0 + r[s], -0.5 * r[s], &mut rhs)?;
                    predicted[s] = rhs;
                }
                let (g1, g2) = reaction_fields(&next, &predicted[0], &predicted[1]);
                let mut out = [Vec::new(), Vec::new()];
                for (s, (f, g)) in [(&f1, &g1), (&f2, &g2)].into_iter().enumerate() {
                    let mut rhs: Vec<f64> = explicit[s]
                        .iter()
                        .zip(f.iter().zip(g))
                        .map(|(e, (f, g))| e + 0.5 * dt * (f + g))
                        .collect();
                    self.solver.solve(1.0 + r[s], -0.5 * r[s], &mut rhs)?;
                    out[s] = rhs;
                }
                let [a, b] = out;
                (a, b)
            }
        };
        let out = StatePair::new(Field(v1), Field(v2), t_next);
        check_blow_up(&out)?;
        Ok(out)
    }
}

fn reaction_fields(c: &CoefficientsAt, v1: &[f64], v2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    v1.iter().zip(v2).map(|(a, b)| c.reaction(*a, *b)).unzip()
}

/// `(I - (r/2) A_0) v` with zero boundary values.
fn half_explicit(v: &[f64], r: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|j| {
            let left = if j == 0 { 0.0 } else { v[j - 1] };
            let right = if j + 1 == n { 0.0 } else { v[j + 1] };
            v[j] - 0.5 * r * (2.0 * v[j] - left - right)
        })
        .collect()
}

fn check_blow_up(state: &StatePair) -> Result<()> {
    if !(state.v1.is_finite() && state.v2.is_finite()) {
        return Err(Error::BlowUp {
            t: state.t,
            sup: f64::INFINITY,
        });
    }
    let sup = state.sup_norm();
    if sup > BLOW_UP_THRESHOLD {
        return Err(Error::BlowUp { t: state.t, sup });
    }
    Ok(())
}

/// One step of `cfg.scheme` with step `cfg.dt`.
pub fn step(params: &ModelParams, grid: &Grid, state: &StatePair, cfg: &StepperConfig) -> Result<StatePair> {
    Integrator::new(params, *grid, cfg.scheme).step(state, cfg.dt)
}

/// Integrates from `t = 0` to `cfg.t_end`, recording `t = 0`, every
/// `record_every`-th step and the final time.
pub fn simulate(params: &ModelParams, grid: &Grid, ic: &InitialCondition, cfg: &StepperConfig) -> Result<Trajectory> {
    let mut traj = Trajectory::new();
    simulate_into(params, grid, ic, cfg, &mut traj)?;
    Ok(traj)
}

/// Like [`simulate`], but snapshots recorded before an error stay in `traj`.
pub fn simulate_into(
    params: &ModelParams,
    grid: &Grid,
    ic: &InitialCondition,
    cfg: &StepperConfig,
    traj: &mut Trajectory,
) -> Result<()> {
    cfg.validate()?;
    let mut state = ic.state(grid)?;
    traj.push(state.clone())?;
    let steps = cfg.steps();
    let mut integ = Integrator::new(params, *grid, cfg.scheme);
    for k in 1..=steps {
        let t = cfg.t_end * k as f64 / steps as f64;
        state = integ.advance(&state, t)?;
        if k % cfg.record_every == 0 || k == steps {
            traj.push(state.clone())?;
        }
    }
    Ok(())
}

/// One node of a snapshot on both the reference and the physical domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullbackRow {
    pub t: f64,
    pub y: f64,
    pub v1: f64,
    pub v2: f64,
    pub x: f64,
    pub u1: f64,
    pub u2: f64,
}

/// Maps every snapshot to `x = rho(t) y`, `u_i(x, t) = v_i(y, t)`, including
/// both boundary nodes. Rows are grouped by snapshot, nodes ascending.
pub fn pullback(snapshots: &[StatePair], law: &EvolutionLaw, grid: &Grid) -> Vec<PullbackRow> {
    let ys = grid.all_nodes();
    let mut rows = Vec::with_capacity(snapshots.len() * ys.len());
    for s in snapshots {
        let rho = law.rho(s.t);
        let v1 = s.v1.with_boundary(0.0);
        let v2 = s.v2.with_boundary(0.0);
        for (j, y) in ys.iter().enumerate() {
            rows.push(PullbackRow {
                t: s.t,
                y: *y,
                v1: v1[j],
                v2: v2[j],
                x: rho * y,
                u1: v1[j],
                u2: v2[j],
            });
        }
    }
    rows
}

/// A periodic state found by iterating the period map.
#[derive(Debug, Clone, PartialEq)]
pub struct Attractor {
    /// Snapshots over the last period, with `t` the phase in `[0, T]`.
    pub snapshots: Vec<StatePair>,
    /// `||v((m+1)T) - v(mT)||_inf` for the last period.
    pub residual: f64,
    /// The residual of every period in order.
    pub residual_history: Vec<f64>,
    pub periods: usize,
    pub converged: bool,
}

impl Attractor {
    /// State at phase 0 (equal to the state at phase `T` within the residual).
    pub fn start(&self) -> &StatePair {
        &self.snapshots[0]
    }
}

/// Integrates whole periods from `ic` until consecutive period-start states
/// differ by less than `tol`, or `max_periods` is reached (then
/// `converged = false`). `cfg.t_end` is not used.
pub fn periodic_attractor(
    params: &ModelParams,
    grid: &Grid,
    ic: &InitialCondition,
    cfg: &StepperConfig,
    tol: f64,
    max_periods: usize,
) -> Result<Attractor> {
    if !(tol > 0.0) {
        return config(alloc::format!("attractor tolerance must be positive, got {tol}"));
    }
    if max_periods == 0 {
        return config("max_periods must be at least 1");
    }
    if !(cfg.dt > 0.0) || cfg.record_every == 0 {
        cfg.validate()?;
    }
    let period = params.period();
    let steps = steps_for(period, cfg.dt);
    let mut integ = Integrator::new(params, *grid, cfg.scheme);
    let mut state = ic.state(grid)?;
    let mut history = Vec::new();
    let mut snapshots = Vec::new();
    for m in 0..max_periods {
        let base = m as f64 * period;
        let start = state.clone();
        snapshots.clear();
        snapshots.push(StatePair::new(start.v1.clone(), start.v2.clone(), 0.0));
        for k in 1..=steps {
            let phase = period * k as f64 / steps as f64;
            state = integ.advance(&state, base + phase)?;
            if k % cfg.record_every == 0 || k == steps {
                snapshots.push(StatePair::new(state.v1.clone(), state.v2.clone(), phase));
            }
        }
        let residual = state.sup_distance(&start);
        history.push(residual);
        if residual < tol {
            return Ok(Attractor {
                snapshots,
                residual,
                residual_history: history,
                periods: m + 1,
                converged: true,
            });
        }
    }
    let residual = *history.last().unwrap_or(&f64::INFINITY);
    Ok(Attractor {
        snapshots,
        residual,
        residual_history: history,
        periods: max_periods,
        converged: false,
    })
}

/// Sup over the snapshots of species `s`.
pub fn species_sup(snapshots: &[StatePair], s: Species) -> f64 {
    snapshots
        .iter()
        .map(|p| match s {
            Species::One => p.v1.sup(),
            Species::Two => p.v2.sup(),
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
