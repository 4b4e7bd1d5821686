//! Time-periodic coefficients and the evolution law of the domain.
//!
//! Every coefficient of the model is a [`PeriodicFn`]: one of a few closed
//! forms or a sampled table, evaluated at `t mod T`. Two families of
//! evaluators exist:
//!
//! * [`PeriodicFn::eval`] / [`PeriodicFn::deriv`] wrap any `t` into `[0, T)`
//!   and return the right derivative at kinks. Time integrators use these.
//! * [`PeriodicFn::eval_closed`] / [`PeriodicFn::deriv_closed`] take a phase
//!   in the closed interval `[0, T]` without wrapping, so the value at `T` is
//!   the left limit of the formula. Quadrature and extrema over one period
//!   use these; for a law that is not exactly periodic this is what exposes
//!   the mismatch `rho(T) != rho(0)`.

use alloc::vec::Vec;
use libm::{cos, fabs, floor, log, sin};

use crate::error::{config, Error, Result};

/// Number of samples used when checking positivity and taking extrema.
pub const EXTREMA_SAMPLES: usize = 10_000;

/// Shape of a periodic function.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `base + amplitude * sin(omega * t + phase)`
    AffineSin {
        base: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// `base + amplitude * |sin(omega * t)|`
    AffineAbsSin { base: f64, amplitude: f64, omega: f64 },
    /// `(t, value)` pairs covering `[0, T]`, linearly interpolated.
    Sampled(Vec<(f64, f64)>),
}

/// A `T`-periodic scalar function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicFn {
    profile: Profile,
    period: f64,
}

impl PeriodicFn {
    pub fn new(profile: Profile, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return config(alloc::format!("period must be positive, got {period}"));
        }
        match &profile {
            Profile::Constant(c) => finite("constant", *c)?,
            Profile::AffineSin {
                base,
                amplitude,
                omega,
                phase,
            } => {
                for (name, v) in [
                    ("base", base),
                    ("amplitude", amplitude),
                    ("omega", omega),
                    ("phase", phase),
                ] {
                    finite(name, *v)?;
                }
            }
            Profile::AffineAbsSin {
                base,
                amplitude,
                omega,
            } => {
                for (name, v) in [("base", base), ("amplitude", amplitude), ("omega", omega)] {
                    finite(name, *v)?;
                }
            }
            Profile::Sampled(table) => check_table(table, period)?,
        }
        Ok(Self { profile, period })
    }

    pub fn constant(value: f64, period: f64) -> Result<Self> {
        Self::new(Profile::Constant(value), period)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Same profile, different period. Used to align constant coefficients
    /// with the period of the evolution law.
    pub fn with_period(&self, period: f64) -> Result<Self> {
        Self::new(self.profile.clone(), period)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.profile, Profile::Constant(_))
    }

    /// Phase of `t` in `[0, T)`.
    pub fn phase(&self, t: f64) -> f64 {
        let tau = t - self.period * floor(t / self.period);
        if tau >= self.period {
            0.0
        } else {
            tau
        }
    }

    /// `f(t mod T)`.
    pub fn eval(&self, t: f64) -> f64 {
        self.eval_closed(self.phase(t))
    }

    /// Derivative at `t mod T`; the right derivative at kinks.
    pub fn deriv(&self, t: f64) -> f64 {
        self.deriv_at(self.phase(t), false)
    }

    /// Value at a phase `tau` in `[0, T]`, without wrapping `T` back to `0`.
    pub fn eval_closed(&self, tau: f64) -> f64 {
        match &self.profile {
            Profile::Constant(c) => *c,
            Profile::AffineSin {
                base,
                amplitude,
                omega,
                phase,
            } => base + amplitude * sin(omega * tau + phase),
            Profile::AffineAbsSin {
                base,
                amplitude,
                omega,
            } => base + amplitude * fabs(sin(omega * tau)),
            Profile::Sampled(table) => interpolate(table, tau),
        }
    }

    /// Derivative at a phase in `[0, T]`: right derivative at interior kinks
    /// and at `0`, left derivative at `T`.
    pub fn deriv_closed(&self, tau: f64) -> f64 {
        let at_end = tau >= self.period;
        self.deriv_at(tau, at_end)
    }

    fn deriv_at(&self, tau: f64, left: bool) -> f64 {
        match &self.profile {
            Profile::Constant(_) => 0.0,
            Profile::AffineSin {
                amplitude,
                omega,
                phase,
                ..
            } => amplitude * omega * cos(omega * tau + phase),
            Profile::AffineAbsSin {
                amplitude, omega, ..
            } => {
                let s = sin(omega * tau);
                let c = cos(omega * tau);
                let slope = if fabs(s) <= 1e-12 {
                    // kink of |sin|
                    if left {
                        -fabs(omega * c)
                    } else {
                        fabs(omega * c)
                    }
                } else {
                    omega * c * s.signum()
                };
                amplitude * slope
            }
            Profile::Sampled(_) => {
                let step = self.period * 1e-6;
                (self.eval(tau + step) - self.eval(tau - step + self.period)) / (2.0 * step)
            }
        }
    }

    /// Lower bound that holds everywhere, for forms where it is known exactly.
    fn exact_min(&self) -> Option<f64> {
        match &self.profile {
            Profile::Constant(c) => Some(*c),
            Profile::AffineSin {
                base, amplitude, ..
            } => Some(base - fabs(*amplitude)),
            Profile::AffineAbsSin {
                base, amplitude, ..
            } => Some(base.min(base + amplitude)),
            Profile::Sampled(table) => table.iter().map(|p| p.1).reduce(f64::min),
        }
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        config(alloc::format!("{name} must be finite"))
    }
}

fn check_table(table: &[(f64, f64)], period: f64) -> Result<()> {
    if table.len() < 2 {
        return config("sampled table needs at least two points");
    }
    for w in table.windows(2) {
        if !(w[1].0 > w[0].0) {
            return config("sampled table times must be strictly increasing");
        }
    }
    if table.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return config("sampled table contains non-finite entries");
    }
    let (t0, v0) = table[0];
    let (t1, v1) = table[table.len() - 1];
    let tol = 1e-9 * period;
    if fabs(t0) > tol || fabs(t1 - period) > tol {
        return config(alloc::format!(
            "sampled table must cover [0, {period}], got [{t0}, {t1}]"
        ));
    }
    if fabs(v0 - v1) > 1e-12 * (1.0 + fabs(v0)) {
        return config("sampled table must close periodically (first value == last value)");
    }
    Ok(())
}

fn interpolate(table: &[(f64, f64)], tau: f64) -> f64 {
    let idx = table.partition_point(|p| p.0 <= tau);
    if idx == 0 {
        return table[0].1;
    }
    if idx >= table.len() {
        return table[table.len() - 1].1;
    }
    let (ta, va) = table[idx - 1];
    let (tb, vb) = table[idx];
    va + (vb - va) * (tau - ta) / (tb - ta)
}

/// Minimum and maximum of `g` over `samples` uniform points of `[0, period]`.
pub fn extrema_over_period<G>(g: G, period: f64, samples: usize) -> Result<(f64, f64)>
where
    G: Fn(f64) -> f64,
{
    if samples < 1000 {
        return config(alloc::format!("extrema need at least 1000 samples, got {samples}"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..samples {
        let t = period * k as f64 / (samples - 1) as f64;
        let v = g(t);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: "extrema sample",
                t,
            });
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Scale factor `rho(t)` of the isotropic map `x = rho(t) y`, together with
/// the spatial dimension that enters the dilution term.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionLaw {
    rho: PeriodicFn,
    dimension: u32,
    periodicity_residual: f64,
}

impl EvolutionLaw {
    pub fn new(rho: PeriodicFn, dimension: u32) -> Result<Self> {
        if dimension == 0 {
            return config("spatial dimension must be at least 1");
        }
        let r0 = rho.eval_closed(0.0);
        if fabs(r0 - 1.0) > 1e-12 {
            return config(alloc::format!("evolution law must satisfy rho(0) = 1, got {r0}"));
        }
        let period = rho.period();
        let exact_min = rho.exact_min().unwrap_or(f64::INFINITY);
        let (sampled_min, _) = extrema_over_period(|t| rho.eval_closed(t), period, EXTREMA_SAMPLES)?;
        let min = exact_min.min(sampled_min);
        if min <= 0.0 {
            // locate the first offending sample for the report
            let t = (0..EXTREMA_SAMPLES)
                .map(|k| period * k as f64 / (EXTREMA_SAMPLES - 1) as f64)
                .find(|&t| rho.eval_closed(t) <= 0.0)
                .unwrap_or(0.0);
            return Err(Error::DomainCollapse { t, rho: min });
        }
        let periodicity_residual = fabs(rho.eval_closed(period) - r0);
        Ok(Self {
            rho,
            dimension,
            periodicity_residual,
        })
    }

    /// The fixed domain, `rho = 1`.
    pub fn fixed(period: f64) -> Result<Self> {
        Self::new(PeriodicFn::constant(1.0, period)?, 1)
    }

    pub fn rho_fn(&self) -> &PeriodicFn {
        &self.rho
    }

    pub fn period(&self) -> f64 {
        self.rho.period()
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    pub fn rho(&self, t: f64) -> f64 {
        self.rho.eval(t)
    }

    pub fn rho_dot(&self, t: f64) -> f64 {
        self.rho.deriv(t)
    }

    /// `|rho(T) - rho(0)|` with `rho(T)` taken as the left limit of the
    /// formula. Non-zero means the law is not genuinely `T`-periodic.
    pub fn periodicity_residual(&self) -> f64 {
        self.periodicity_residual
    }

    /// Dilution coefficient `n rho'(t) / rho(t)`.
    ///
    /// Positivity of `rho` is established when the law is built, so this
    /// cannot fail.
    pub fn dilution(&self, t: f64) -> f64 {
        self.dimension as f64 * self.rho.deriv(t) / self.rho.eval(t)
    }

    /// Dilution at a phase in the closed period `[0, T]`.
    pub fn dilution_closed(&self, tau: f64) -> f64 {
        self.dimension as f64 * self.rho.deriv_closed(tau) / self.rho.eval_closed(tau)
    }

    /// `n (ln rho(T) - ln rho(0))`: the exact integral of the dilution term
    /// over one period.
    pub fn dilution_integral(&self) -> f64 {
        self.dimension as f64 * (log(self.rho.eval_closed(self.period())) - log(self.rho.eval_closed(0.0)))
    }
}
