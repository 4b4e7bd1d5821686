//! Quasimonotone transform, coupled upper/lower solutions and the monotone
//! iteration schemes for periodic and initial-value problems.
//!
//! With `v3 = M - v2` the system becomes quasimonotone nondecreasing in
//! `(v1, v3)`. Adding `k_i V` to both sides makes the sources
//!
//! ```text
//! F1 = k1 V1 + f1(V1, M - V3)
//! F2 = k2 V3 - f2(V1, M - V3)
//! ```
//!
//! nondecreasing in every argument on the invariant box, so freezing them at
//! the previous iterate gives ordered sequences of linear problems.

use alloc::vec;
use alloc::vec::Vec;
use libm::fabs;

use crate::dynamics::{steps_for, InitialCondition};
use crate::eigen::{periodic_eigenfunction, principal_eigenpair, Eigenpair};
use crate::error::{config, Error, Result};
use crate::grid::{Field, Grid, StatePair};
use crate::indexes::{classify_with_lambda0, upper_bound, IndexReport};
use crate::model::{CoefficientsAt, ModelParams, Species};
use crate::periodic::{extrema_over_period, PeriodicFn, EXTREMA_SAMPLES};
use crate::quadrature::DEFAULT_NODES;
use crate::tridiag::{solve_interleaved, Factored};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzConstants {
    pub k1: f64,
    pub k2: f64,
}

impl LipschitzConstants {
    pub fn get(&self, s: Species) -> f64 {
        match s {
            Species::One => self.k1,
            Species::Two => self.k2,
        }
    }
}

fn extrema(f: &PeriodicFn) -> Result<(f64, f64)> {
    extrema_over_period(|t| f.eval_closed(t), f.period(), EXTREMA_SAMPLES)
}

/// `k1 = a1^M + (b1^M + 2 c1^M) a1^M / c1^m + b1^M a2^M / c2^m + n |rho'|^M / rho^m`
/// and symmetrically for `k2`.
pub fn lipschitz_constants(params: &ModelParams) -> Result<LipschitzConstants> {
    let mut a_max = [0.0; 2];
    let mut b_max = [0.0; 2];
    let mut c_max = [0.0; 2];
    let mut c_min = [0.0; 2];
    for s in Species::BOTH {
        let sp = params.species(s);
        let i = s.index();
        a_max[i] = extrema(&sp.growth)?.1;
        b_max[i] = extrema(&sp.competition)?.1;
        (c_min[i], c_max[i]) = extrema(&sp.crowding)?;
        if !(c_min[i] > 0.0) {
            return config(alloc::format!("c{} must be positive, minimum is {}", i + 1, c_min[i]));
        }
    }
    let law = params.law();
    let rho = law.rho_fn();
    let (_, rho_dot_max) = extrema_over_period(|t| fabs(rho.deriv_closed(t)), law.period(), EXTREMA_SAMPLES)?;
    let (rho_min, _) = extrema(rho)?;
    let dilution = law.dimension() as f64 * rho_dot_max / rho_min;
    let k = |i: usize, j: usize| {
        a_max[i] + (b_max[i] + 2.0 * c_max[i]) * a_max[i] / c_min[i] + b_max[i] * a_max[j] / c_min[j] + dilution
    };
    Ok(LipschitzConstants { k1: k(0, 1), k2: k(1, 0) })
}

/// Bounds used by the transform and the lower-iterate scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformContext {
    /// `M = max(M2, sup v2(., 0))`.
    pub m: f64,
    pub m1: f64,
    pub m2: f64,
    /// Scale of the eigenfunction lower iterate.
    pub epsilon: f64,
}

impl TransformContext {
    pub fn new(params: &ModelParams, sup_v2_initial: f64) -> Result<Self> {
        let m1 = upper_bound(params, Species::One)?;
        let m2 = upper_bound(params, Species::Two)?;
        Ok(Self {
            m: m2.max(sup_v2_initial),
            m1,
            m2,
            epsilon: 0.0,
        })
    }
}

/// `(v1, v2) -> (v1, M - v2)`.
pub fn transform_v3(state: &StatePair, ctx: &TransformContext) -> Result<(Field, Field)> {
    let sup = state.v2.sup();
    if sup > ctx.m {
        return Err(Error::BoundViolation { sup, bound: ctx.m });
    }
    let v3 = state.v2.iter().map(|v| ctx.m - v).collect::<Vec<_>>();
    Ok((state.v1.clone(), Field(v3)))
}

/// `(v1, v3) -> (v1, M - v3)` at time `t`.
pub fn inverse_v3(v1: &Field, v3: &Field, t: f64, ctx: &TransformContext) -> StatePair {
    let v2 = v3.iter().map(|v| ctx.m - v).collect::<Vec<_>>();
    StatePair::new(v1.clone(), Field(v2), t)
}

#[inline]
fn sources(c: &CoefficientsAt, k: &LipschitzConstants, m: f64, v1: f64, v3: f64) -> (f64, f64) {
    let (f1, f2) = c.reaction(v1, m - v3);
    (k.k1 * v1 + f1, k.k2 * v3 - f2)
}

/// `(F1, F2)` of the transformed system at time `t`.
pub fn transformed_sources(
    params: &ModelParams,
    k: &LipschitzConstants,
    m: f64,
    t: f64,
    v1: f64,
    v3: f64,
) -> (f64, f64) {
    sources(&params.coefficients_at(t), k, m, v1, v3)
}

/// Values at `[time][node]`, boundary nodes included.
pub type NodalPath = Vec<Vec<f64>>;

/// Candidate upper `(V1~, V2~)` and lower `(V1^, V2^)` solutions over one
/// period on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPairCandidate {
    pub times: Vec<f64>,
    pub upper: [NodalPath; 2],
    pub lower: [NodalPath; 2],
}

impl SolutionPairCandidate {
    /// Spatially and temporally constant candidate. Upper values are also
    /// used on the boundary; lower values are replaced by 0 there.
    pub fn constant(grid: &Grid, times: &[f64], upper: [f64; 2], lower: [f64; 2]) -> Self {
        let nodes = grid.len() + 2;
        let path = |v: f64, zero_boundary: bool| -> NodalPath {
            let mut row = vec![v; nodes];
            if zero_boundary {
                row[0] = 0.0;
                row[nodes - 1] = 0.0;
            }
            vec![row; times.len()]
        };
        Self {
            times: times.to_vec(),
            upper: [path(upper[0], false), path(upper[1], false)],
            lower: [path(lower[0], true), path(lower[1], true)],
        }
    }
}

/// Uniform grid of `intervals + 1` times over `[0, T]`.
pub fn uniform_times(period: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|k| period * k as f64 / intervals as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationSite {
    pub condition: &'static str,
    pub t: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPairReport {
    pub ok: bool,
    /// Largest amount by which any condition fails (0 if none does).
    pub worst_violation: f64,
    pub location: Option<ViolationSite>,
    /// Worst residual per condition; negative means violated.
    pub residuals: Vec<(&'static str, f64)>,
    pub tolerance: f64,
}

/// Conditions evaluated by [`check_coupled_pair`].
pub const CONDITIONS: [&str; 10] = [
    "lower_1_pde",
    "upper_1_pde",
    "lower_2_pde",
    "upper_2_pde",
    "boundary_1",
    "boundary_2",
    "periodic_lower",
    "periodic_upper",
    "order",
    "lower_nonnegative",
];

/// Checks the coupled upper/lower inequalities with central differences in
/// space and forward differences in time. A condition holds when its
/// residual is at least `-rel_tol * max(1, sup |candidate|)`.
pub fn check_coupled_pair(
    cand: &SolutionPairCandidate,
    params: &ModelParams,
    grid: &Grid,
    rel_tol: f64,
) -> Result<CoupledPairReport> {
    let nodes = grid.len() + 2;
    let period = params.period();
    let kt = cand.times.len();
    if kt < 2 {
        return config("candidate needs at least two time levels");
    }
    if fabs(cand.times[0]) > 1e-9 * period || fabs(cand.times[kt - 1] - period) > 1e-9 * period {
        return config(alloc::format!(
            "candidate times must span [0, {period}], got [{}, {}]",
            cand.times[0],
            cand.times[kt - 1]
        ));
    }
    let step = period / (kt - 1) as f64;
    for (k, t) in cand.times.iter().enumerate() {
        if fabs(t - step * k as f64) > 1e-9 * period {
            return config(alloc::format!("candidate time grid is not uniform at index {k} (t = {t})"));
        }
    }
    for path in cand.upper.iter().chain(cand.lower.iter()) {
        if path.len() != kt || path.iter().any(|row| row.len() != nodes) {
            return config(alloc::format!(
                "candidate must have {kt} time levels of {nodes} nodes each"
            ));
        }
    }
    let sup = cand
        .upper
        .iter()
        .chain(cand.lower.iter())
        .flat_map(|p| p.iter().flatten())
        .fold(0.0f64, |m, v| m.max(fabs(*v)));
    if !sup.is_finite() {
        return config("candidate contains non-finite values");
    }
    let tol = rel_tol * sup.max(1.0);
    let ys = grid.all_nodes();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());

    let mut worst = [f64::INFINITY; 10];
    let mut sites: [Option<ViolationSite>; 10] = [None; 10];
    let mut record = |c: usize, r: f64, t: f64, y: f64| {
        if r < worst[c] {
            worst[c] = r;
            sites[c] = Some(ViolationSite {
                condition: CONDITIONS[c],
                t,
                y,
            });
        }
    };

    let [u1, u2] = &cand.upper;
    let [l1, l2] = &cand.lower;
    for k in 0..kt - 1 {
        let t = cand.times[k];
        let dt = cand.times[k + 1] - t;
        let c = params.coefficients_at(t);
        let op = |p: &NodalPath, s: usize, j: usize| {
            let row = &p[k];
            (p[k + 1][j] - row[j]) / dt - c.diffusion[s] * (row[j - 1] - 2.0 * row[j] + row[j + 1]) * inv_h2
        };
        for j in 1..nodes - 1 {
            let y = ys[j];
            let (f1_lower, _) = c.reaction(l1[k][j], u2[k][j]);
            let (f1_upper, _) = c.reaction(u1[k][j], l2[k][j]);
            let (_, f2_lower) = c.reaction(u1[k][j], l2[k][j]);
            let (_, f2_upper) = c.reaction(l1[k][j], u2[k][j]);
            record(0, f1_lower - op(l1, 0, j), t, y);
            record(1, op(u1, 0, j) - f1_upper, t, y);
            record(2, f2_lower - op(l2, 1, j), t, y);
            record(3, op(u2, 1, j) - f2_upper, t, y);
        }
    }
    for k in 0..kt {
        let t = cand.times[k];
        for (s, cond) in [(0usize, 4usize), (1, 5)] {
            for j in [0, nodes - 1] {
                let (u, l) = (cand.upper[s][k][j], cand.lower[s][k][j]);
                record(cond, u, t, ys[j]);
                record(cond, -fabs(l), t, ys[j]);
            }
        }
        for s in 0..2 {
            for j in 0..nodes {
                record(8, cand.upper[s][k][j] - cand.lower[s][k][j], t, ys[j]);
                record(9, cand.lower[s][k][j], t, ys[j]);
            }
        }
    }
    for s in 0..2 {
        for j in 0..nodes {
            record(6, cand.lower[s][kt - 1][j] - cand.lower[s][0][j], 0.0, ys[j]);
            record(7, cand.upper[s][0][j] - cand.upper[s][kt - 1][j], 0.0, ys[j]);
        }
    }

    let mut worst_violation = 0.0;
    let mut location = None;
    for c in 0..CONDITIONS.len() {
        if worst[c] < -tol && -worst[c] > worst_violation {
            worst_violation = -worst[c];
            location = sites[c];
        }
    }
    Ok(CoupledPairReport {
        ok: location.is_none(),
        worst_violation,
        location,
        residuals: CONDITIONS.iter().copied().zip(worst).collect(),
        tolerance: tol,
    })
}

/// Starting upper and lower iterates and how they were built.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialIterates {
    pub candidate: SolutionPairCandidate,
    /// Constant upper values `(V1~, V2~)`.
    pub upper: [f64; 2],
    pub epsilon0: f64,
    pub epsilon: f64,
    /// Which species carry an `eps * phi_i` lower iterate.
    pub lower_species: [bool; 2],
    /// The lower iterate fell back to zero because `epsilon0 <= 0`.
    pub degenerate_lower: bool,
}

/// Builds upper/lower starting iterates on `times` (uniform over `[0, T]`).
///
/// * both `R_i <= 1`: upper `(M1, M2)`, lower `(0, 0)`;
/// * only `R_j > 1`: upper `V_i~ = 0`, `V_j~ = M_j`; lower `(0, eps phi_j)`
///   with `eps0 = min_t a_j (1 - 1/R_j) / c_j^M`;
/// * both `R_i > 1`: upper `(M1, M2)`; lower `eps (phi_1, phi_2)` with
///   `eps0 = min_t min_i (a_i (1 - 1/R_i) - b_i M_j) / c_i^M`, or `(0, 0)` if
///   that is not positive.
///
/// In every case `eps = eps0 / 2`.
pub fn initial_iterates(
    params: &ModelParams,
    grid: &Grid,
    pair: &Eigenpair,
    report: &IndexReport,
    times: &[f64],
    quadrature_nodes: usize,
) -> Result<InitialIterates> {
    let m = report.m_bound;
    let persist = [report.r[0] > 1.0, report.r[1] > 1.0];
    let c_max = [
        extrema(&params.species(Species::One).crowding)?.1,
        extrema(&params.species(Species::Two).crowding)?.1,
    ];
    let term = |s: Species, coupled: bool| -> Result<f64> {
        let i = s.index();
        let sp = params.species(s);
        let other = m[s.other().index()];
        let r = report.r[i];
        let (lo, _) = extrema_over_period(
            |t| {
                let b = if coupled { sp.competition.eval_closed(t) * other } else { 0.0 };
                (sp.growth.eval_closed(t) * (1.0 - 1.0 / r) - b) / c_max[i]
            },
            params.period(),
            EXTREMA_SAMPLES,
        )?;
        Ok(lo)
    };

    let (upper, epsilon0, lower_species) = match persist {
        [false, false] => (m, 0.0, [false, false]),
        [true, false] => ([m[0], 0.0], term(Species::One, false)?, [true, false]),
        [false, true] => ([0.0, m[1]], term(Species::Two, false)?, [false, true]),
        [true, true] => (
            m,
            term(Species::One, true)?.min(term(Species::Two, true)?),
            [true, true],
        ),
    };
    let degenerate_lower = lower_species.iter().any(|b| *b) && !(epsilon0 > 0.0);
    let epsilon = if degenerate_lower { 0.0 } else { 0.5 * epsilon0.max(0.0) };
    let lower_species = if degenerate_lower { [false, false] } else { lower_species };

    let mut candidate = SolutionPairCandidate::constant(grid, times, upper, [0.0, 0.0]);
    for s in Species::BOTH {
        if !lower_species[s.index()] {
            continue;
        }
        let phi = periodic_eigenfunction(params, s, pair, times, quadrature_nodes)?;
        for (k, row) in candidate.lower[s.index()].iter_mut().enumerate() {
            for (j, p) in pair.psi0.iter().enumerate() {
                row[j + 1] = epsilon * p * phi.g[k];
            }
        }
    }
    Ok(InitialIterates {
        candidate,
        upper,
        epsilon0,
        epsilon,
        lower_species,
        degenerate_lower,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneConfig {
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Stride of the returned snapshots, in steps.
    pub record_every: usize,
    pub quadrature_nodes: usize,
    /// Keep the iterates `m = 0..=keep_iterates` in the result.
    pub keep_iterates: usize,
}

impl Default for MonotoneConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            tol: 1e-6,
            max_iter: 5000,
            record_every: 100,
            quadrature_nodes: DEFAULT_NODES,
            keep_iterates: 0,
        }
    }
}

impl MonotoneConfig {
    fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return config(alloc::format!("dt must be positive, got {}", self.dt));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return config(alloc::format!("monotone tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 || self.record_every == 0 {
            return config("max_iter and record_every must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub m: usize,
    /// `||upper^(m) - upper^(m-1)||_inf` over the whole path.
    pub gap_upper: f64,
    pub gap_lower: f64,
    /// `||upper^(m) - lower^(m)||_inf`.
    pub spread: f64,
    /// `||X(T) - X(0)||_inf`, worst of both sequences.
    pub periodicity_residual: f64,
    /// Largest breach of `lower^(m-1) <= lower^(m) <= upper^(m) <= upper^(m-1)`.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

/// The `m`-th upper and lower iterates in `(v1, v2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IteratePair {
    pub m: usize,
    pub upper: Vec<StatePair>,
    pub lower: Vec<StatePair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneResult {
    /// Limit of the upper sequence in `(v1, v2)`, i.e. the largest `v1` and
    /// smallest `v2`. Times are phases for the periodic scheme.
    pub upper: Vec<StatePair>,
    pub lower: Vec<StatePair>,
    pub trace: IterationTrace,
    pub converged: bool,
    pub iterations: usize,
    pub context: TransformContext,
    pub lipschitz: LipschitzConstants,
    pub report: IndexReport,
    pub degenerate_lower: bool,
    /// Early iterates, see [`MonotoneConfig::keep_iterates`].
    pub iterates: Vec<IteratePair>,
}

impl MonotoneResult {
    /// Largest sup distance between the upper and lower limits.
    pub fn spread(&self) -> f64 {
        self.upper
            .iter()
            .zip(&self.lower)
            .fold(0.0, |m, (u, l)| m.max(u.sup_distance(l)))
    }
}

/// Path of one transformed sequence `(V1, V3)` at every step, interior only,
/// stored row after row.
#[derive(Debug, Clone)]
struct Sequence {
    n: usize,
    v: [Vec<f64>; 2],
}

impl Sequence {
    fn from_rows(first: &[Vec<f64>], third: &[Vec<f64>]) -> Self {
        let n = first[0].len();
        Self {
            n,
            v: [first.concat(), third.concat()],
        }
    }

    /// Original-variable rows `(v1, v2)` mapped to `(v1, M - v2)`.
    fn from_original(first: &[Vec<f64>], second: &[Vec<f64>], m: f64) -> Self {
        let third: Vec<Vec<f64>> = second.iter().map(|row| row.iter().map(|v| m - v).collect()).collect();
        Self::from_rows(first, &third)
    }

    fn constant(v1: f64, v3: f64, n: usize, count: usize) -> Self {
        Self {
            n,
            v: [vec![v1; n * count], vec![v3; n * count]],
        }
    }

    fn row(&self, c: usize, k: usize) -> &[f64] {
        &self.v[c][k * self.n..(k + 1) * self.n]
    }

    fn last_rows(&self) -> [Vec<f64>; 2] {
        let k = self.v[0].len() / self.n - 1;
        [self.row(0, k).to_vec(), self.row(1, k).to_vec()]
    }

    fn distance(&self, other: &Sequence) -> f64 {
        (0..2).fold(0.0, |d, c| d.max(crate::grid::sup_distance(&self.v[c], &other.v[c])))
    }

    /// `max(self - other)` pointwise (positive where `self > other`).
    fn excess_over(&self, other: &Sequence) -> f64 {
        let mut d = 0.0f64;
        for c in 0..2 {
            for (x, y) in self.v[c].iter().zip(&other.v[c]) {
                d = d.max(x - y);
            }
        }
        d
    }

    fn end_to_start(&self) -> f64 {
        let k = self.v[0].len() / self.n - 1;
        (0..2).fold(0.0, |d, c| d.max(crate::grid::sup_distance(self.row(c, 0), self.row(c, k))))
    }
}

/// Shared linear sweep: `X^{n+1} = P[(1 - dt k) X^n + dt (k X_prev^n + F(X_prev^n))]`
/// with `P = (I + dt d/rho^2(t_{n+1}) A)^{-1}`. Its fixed point is exactly the
/// `imex_be` scheme.
struct Sweeper {
    k: LipschitzConstants,
    m: f64,
    times: Vec<f64>,
    coeffs: Vec<CoefficientsAt>,
    /// Factored `I + dt d_i/rho^2(t_{n+1}) A` per step and component.
    factors: Vec<[Factored; 2]>,
    /// `dt d_i/rho^2(t_{n+1}) / h^2` per step and component.
    couplings: Vec<[f64; 2]>,
}

impl Sweeper {
    fn new(params: &ModelParams, grid: &Grid, k: LipschitzConstants, m: f64, times: Vec<f64>) -> Result<Self> {
        let coeffs: Vec<CoefficientsAt> = times.iter().map(|t| params.coefficients_at(*t)).collect();
        let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
        let n = grid.len();
        let mut factors = Vec::with_capacity(times.len() - 1);
        let mut couplings = Vec::with_capacity(times.len() - 1);
        for step in 0..times.len() - 1 {
            let dt = times[step + 1] - times[step];
            let r = [0, 1].map(|c| dt * coeffs[step + 1].diffusion[c] * inv_h2);
            factors.push([
                Factored::new(1.0 + 2.0 * r[0], -r[0], n)?,
                Factored::new(1.0 + 2.0 * r[1], -r[1], n)?,
            ]);
            couplings.push(r);
        }
        Ok(Self {
            k,
            m,
            times,
            coeffs,
            factors,
            couplings,
        })
    }

    fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Advances the upper and lower sequences together; `out` must have the
    /// same shape as `prev` and receives the new paths.
    fn sweep(&self, prev: [&Sequence; 2], start: [[Vec<f64>; 2]; 2], out: [&mut Sequence; 2]) -> Result<()> {
        let n = prev[0].n;
        let kk = [self.k.k1, self.k.k2];
        let [ou, ol] = out;
        for (o, s) in [(&mut *ou, &start[0]), (&mut *ol, &start[1])] {
            for c in 0..2 {
                o.v[c][..n].copy_from_slice(&s[c]);
            }
        }
        for step in 0..self.steps() {
            let dt = self.times[step + 1] - self.times[step];
            let c = &self.coeffs[step];
            let (lo, hi) = (step * n, (step + 1) * n);
            for (o, p) in [(&mut *ou, prev[0]), (&mut *ol, prev[1])] {
                let [o1, o3] = &mut o.v;
                let (done1, next1) = o1.split_at_mut(hi);
                let (done3, next3) = o3.split_at_mut(hi);
                let (x1, x3) = (&done1[lo..], &done3[lo..]);
                let (p1, p3) = (&p.v[0][lo..hi], &p.v[1][lo..hi]);
                for j in 0..n {
                    let (f1, f3) = sources(c, &self.k, self.m, p1[j], p3[j]);
                    next1[j] = (1.0 - dt * kk[0]) * x1[j] + dt * f1;
                    next3[j] = (1.0 - dt * kk[1]) * x3[j] + dt * f3;
                }
                let boundary = self.couplings[step][1] * self.m;
                next3[0] += boundary;
                next3[n - 1] += boundary;
            }
            let [u1, u3] = &mut ou.v;
            let [l1, l3] = &mut ol.v;
            let (hi2, f) = (hi + n, &self.factors[step]);
            solve_interleaved(
                [&f[0], &f[1], &f[0], &f[1]],
                [&mut u1[hi..hi2], &mut u3[hi..hi2], &mut l1[hi..hi2], &mut l3[hi..hi2]],
            );
        }
        for o in [&*ou, &*ol] {
            if o.v.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp {
                    t: self.times[self.steps()],
                    sup: f64::INFINITY,
                });
            }
        }
        Ok(())
    }
}

/// Stops once the geometric tail estimate `gap / (1 - q)` of both sequences
/// is below `tol / 2`, with `q` the last ratio of consecutive gaps.
#[derive(Debug, Default)]
struct StopRule {
    last: [Option<f64>; 2],
}

impl StopRule {
    fn done(&mut self, gaps: [f64; 2], tol: f64) -> bool {
        let mut ok = true;
        for (i, gap) in gaps.into_iter().enumerate() {
            let estimate = match self.last[i] {
                _ if gap == 0.0 => 0.0,
                Some(prev) if prev > 0.0 => gap / (1.0 - (gap / prev).min(0.999)),
                _ => f64::INFINITY,
            };
            self.last[i] = Some(gap);
            ok &= estimate < 0.5 * tol;
        }
        ok
    }
}

fn interior_rows(path: &NodalPath) -> Vec<Vec<f64>> {
    path.iter().map(|row| row[1..row.len() - 1].to_vec()).collect()
}

fn snapshots(seq: &Sequence, times: &[f64], stride: usize, ctx: &TransformContext) -> Vec<StatePair> {
    let last = times.len() - 1;
    (0..=last)
        .filter(|k| k % stride == 0 || *k == last)
        .map(|k| inverse_v3(&Field(seq.row(0, k).to_vec()), &Field(seq.row(1, k).to_vec()), times[k], ctx))
        .collect()
}

struct Outcome {
    upper: Sequence,
    lower: Sequence,
    trace: IterationTrace,
    converged: bool,
    iterations: usize,
    kept: Vec<(usize, Sequence, Sequence)>,
}

fn iterate<S>(sweeper: &Sweeper, mut upper: Sequence, mut lower: Sequence, cfg: &MonotoneConfig, start: S) -> Result<Outcome>
where
    S: Fn(&Sequence) -> [Vec<f64>; 2],
{
    let mut trace = IterationTrace::default();
    let mut rule = StopRule::default();
    let mut new_upper = upper.clone();
    let mut new_lower = lower.clone();
    let mut kept = Vec::new();
    if cfg.keep_iterates > 0 {
        kept.push((0, upper.clone(), lower.clone()));
    }
    for m in 1..=cfg.max_iter {
        sweeper.sweep(
            [&upper, &lower],
            [start(&upper), start(&lower)],
            [&mut new_upper, &mut new_lower],
        )?;
        let gap_upper = new_upper.distance(&upper);
        let gap_lower = new_lower.distance(&lower);
        let violation = lower
            .excess_over(&new_lower)
            .max(new_lower.excess_over(&new_upper))
            .max(new_upper.excess_over(&upper));
        trace.records.push(IterationRecord {
            m,
            gap_upper,
            gap_lower,
            spread: new_upper.distance(&new_lower),
            periodicity_residual: new_upper.end_to_start().max(new_lower.end_to_start()),
            violation,
        });
        if violation > 10.0 * cfg.tol {
            return Err(Error::MonotonicityFailure { iteration: m, violation });
        }
        core::mem::swap(&mut upper, &mut new_upper);
        core::mem::swap(&mut lower, &mut new_lower);
        if m <= cfg.keep_iterates {
            kept.push((m, upper.clone(), lower.clone()));
        }
        if rule.done([gap_upper, gap_lower], cfg.tol) {
            return Ok(Outcome {
                upper,
                lower,
                trace,
                converged: true,
                iterations: m,
                kept,
            });
        }
    }
    Ok(Outcome {
        upper,
        lower,
        trace,
        converged: false,
        iterations: cfg.max_iter,
        kept,
    })
}

fn kept_pairs(kept: &[(usize, Sequence, Sequence)], times: &[f64], stride: usize, ctx: &TransformContext) -> Vec<IteratePair> {
    kept.iter()
        .map(|(m, u, l)| IteratePair {
            m: *m,
            upper: snapshots(u, times, stride, ctx),
            lower: snapshots(l, times, stride, ctx),
        })
        .collect()
}

/// Monotone iteration for the periodic problem. Each iteration solves the
/// linear problems over one period starting from the previous iterate's value
/// at `T`. Non-convergence within `max_iter` is reported through
/// `converged = false`.
pub fn monotone_iterate_periodic(params: &ModelParams, grid: &Grid, cfg: &MonotoneConfig) -> Result<MonotoneResult> {
    cfg.validate()?;
    let pair = principal_eigenpair(grid)?;
    let report = classify_with_lambda0(params, pair.lambda0, cfg.quadrature_nodes)?;
    let k = lipschitz_constants(params)?;
    let mut ctx = TransformContext::new(params, 0.0)?;
    let period = params.period();
    let times = uniform_times(period, steps_for(period, cfg.dt));
    let init = initial_iterates(params, grid, &pair, &report, &times, cfg.quadrature_nodes)?;
    ctx.epsilon = init.epsilon;

    let [u1, u2] = &init.candidate.upper;
    let [l1, l2] = &init.candidate.lower;
    // (V1, V3): upper pairs the upper V1 with the lower V2 and vice versa
    let upper = Sequence::from_original(&interior_rows(u1), &interior_rows(l2), ctx.m);
    let lower = Sequence::from_original(&interior_rows(l1), &interior_rows(u2), ctx.m);

    let sweeper = Sweeper::new(params, grid, k, ctx.m, times.clone())?;
    let out = iterate(&sweeper, upper, lower, cfg, Sequence::last_rows)?;
    Ok(MonotoneResult {
        upper: snapshots(&out.upper, &times, cfg.record_every, &ctx),
        lower: snapshots(&out.lower, &times, cfg.record_every, &ctx),
        trace: out.trace,
        converged: out.converged,
        iterations: out.iterations,
        context: ctx,
        lipschitz: k,
        report,
        degenerate_lower: init.degenerate_lower,
        iterates: kept_pairs(&out.kept, &times, cfg.record_every, &ctx),
    })
}

/// Monotone iteration for the initial-value problem on `[0, t_end]`, with the
/// initial data pinned in every iteration. Starts from the constant upper
/// iterate `(max(M1, sup v1_0), M)` and the zero lower iterate.
pub fn monotone_iterate_ivp(
    params: &ModelParams,
    grid: &Grid,
    ic: &InitialCondition,
    t_end: f64,
    cfg: &MonotoneConfig,
) -> Result<MonotoneResult> {
    cfg.validate()?;
    if !(t_end.is_finite() && t_end >= cfg.dt) {
        return config(alloc::format!("t_end must be at least dt, got {t_end}"));
    }
    let (v10, v20) = ic.fields(grid)?;
    let pair = principal_eigenpair(grid)?;
    let report = classify_with_lambda0(params, pair.lambda0, cfg.quadrature_nodes)?;
    let k = lipschitz_constants(params)?;
    let ctx = TransformContext::new(params, v20.sup().max(0.0))?;
    let top1 = ctx.m1.max(v10.sup());
    let times = uniform_times(t_end, steps_for(t_end, cfg.dt));
    let (n, count) = (grid.len(), times.len());

    let upper = Sequence::constant(top1, ctx.m, n, count);
    let lower = Sequence::constant(0.0, 0.0, n, count);
    let (_, v30) = transform_v3(&StatePair::new(v10.clone(), v20, 0.0), &ctx)?;
    let pinned = [v10.0.clone(), v30.0];

    let sweeper = Sweeper::new(params, grid, k, ctx.m, times.clone())?;
    let out = iterate(&sweeper, upper, lower, cfg, |_: &Sequence| pinned.clone())?;
    Ok(MonotoneResult {
        upper: snapshots(&out.upper, &times, cfg.record_every, &ctx),
        lower: snapshots(&out.lower, &times, cfg.record_every, &ctx),
        trace: out.trace,
        converged: out.converged,
        iterations: out.iterations,
        context: ctx,
        lipschitz: k,
        report,
        degenerate_lower: false,
        iterates: kept_pairs(&out.kept, &times, cfg.record_every, &ctx),
    })
}
