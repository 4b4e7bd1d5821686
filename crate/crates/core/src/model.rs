use libm::fabs;

use crate::error::{config, Result};
use crate::periodic::{extrema_over_period, EvolutionLaw, PeriodicFn, EXTREMA_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    One,
    Two,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::One, Species::Two];

    pub fn index(self) -> usize {
        match self {
            Species::One => 0,
            Species::Two => 1,
        }
    }

    pub fn other(self) -> Species {
        match self {
            Species::One => Species::Two,
            Species::Two => Species::One,
        }
    }
}

/// Coefficients of one species: `d_i`, growth `a_i(t)`, interspecific
/// competition `b_i(t)` and intraspecific competition `c_i(t)`.
///
/// `a_i` and `b_i` may be zero; `c_i` must stay positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesParams {
    pub diffusion: f64,
    pub growth: PeriodicFn,
    pub competition: PeriodicFn,
    pub crowding: PeriodicFn,
}

impl SpeciesParams {
    pub fn with_diffusion(&self, diffusion: f64) -> Self {
        Self {
            diffusion,
            ..self.clone()
        }
    }
}

/// The reference interval `Omega(0) = (left, right)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub left: f64,
    pub right: f64,
}

impl Interval {
    pub fn new(left: f64, right: f64) -> Result<Self> {
        if !(left.is_finite() && right.is_finite() && left < right) {
            return config(alloc::format!("interval ({left}, {right}) is empty or non-finite"));
        }
        Ok(Self { left, right })
    }

    pub fn length(&self) -> f64 {
        self.right - self.left
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    species: [SpeciesParams; 2],
    law: EvolutionLaw,
    interval: Interval,
}

impl ModelParams {
    pub fn new(
        first: SpeciesParams,
        second: SpeciesParams,
        law: EvolutionLaw,
        interval: Interval,
    ) -> Result<Self> {
        let period = law.period();
        for (i, sp) in [&first, &second].into_iter().enumerate() {
            let idx = i + 1;
            if !(sp.diffusion.is_finite() && sp.diffusion > 0.0) {
                return config(alloc::format!("d{idx} must be positive, got {}", sp.diffusion));
            }
            for (name, f) in [("a", &sp.growth), ("b", &sp.competition), ("c", &sp.crowding)] {
                if fabs(f.period() - period) > 1e-12 * period {
                    return config(alloc::format!(
                        "{name}{idx} has period {} but the evolution law has period {period}",
                        f.period()
                    ));
                }
                let (lo, _) = extrema_over_period(|t| f.eval_closed(t), period, EXTREMA_SAMPLES)?;
                // growth and competition may vanish (pure diffusion, uncoupled
                // species); crowding divides the bounds and must not
                let ok = if name == "c" { lo > 0.0 } else { lo >= 0.0 };
                if !ok {
                    let req = if name == "c" { "positive" } else { "nonnegative" };
                    return config(alloc::format!("{name}{idx} must be {req}, minimum is {lo}"));
                }
            }
        }
        Ok(Self {
            species: [first, second],
            law,
            interval,
        })
    }

    pub fn species(&self, s: Species) -> &SpeciesParams {
        &self.species[s.index()]
    }

    pub fn law(&self) -> &EvolutionLaw {
        &self.law
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn period(&self) -> f64 {
        self.law.period()
    }

    /// Copy with one diffusion coefficient replaced.
    pub fn with_diffusion(&self, s: Species, d: f64) -> Result<Self> {
        let mut species = self.species.clone();
        species[s.index()] = species[s.index()].with_diffusion(d);
        let [a, b] = species;
        Self::new(a, b, self.law.clone(), self.interval)
    }

    /// Copy on a different evolution law. Constant coefficients follow the
    /// new period; time-varying ones must already match it.
    pub fn with_law(&self, law: EvolutionLaw) -> Result<Self> {
        let period = law.period();
        let realign = |f: &PeriodicFn| -> Result<PeriodicFn> {
            if f.is_constant() {
                f.with_period(period)
            } else {
                Ok(f.clone())
            }
        };
        let mut out = self.species.clone();
        for sp in out.iter_mut() {
            sp.growth = realign(&sp.growth)?;
            sp.competition = realign(&sp.competition)?;
            sp.crowding = realign(&sp.crowding)?;
        }
        let [a, b] = out;
        Self::new(a, b, law, self.interval)
    }

    /// All time-dependent coefficients evaluated at `t`.
    pub fn coefficients_at(&self, t: f64) -> CoefficientsAt {
        let [s1, s2] = &self.species;
        let rho = self.law.rho(t);
        CoefficientsAt {
            a: [s1.growth.eval(t), s2.growth.eval(t)],
            b: [s1.competition.eval(t), s2.competition.eval(t)],
            c: [s1.crowding.eval(t), s2.crowding.eval(t)],
            dilution: self.law.dilution(t),
            diffusion: [s1.diffusion / (rho * rho), s2.diffusion / (rho * rho)],
        }
    }
}

/// Snapshot of the coefficients at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientsAt {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
    pub dilution: f64,
    /// Effective diffusion `d_i / rho(t)^2` on the reference domain.
    pub diffusion: [f64; 2],
}

impl CoefficientsAt {
    /// Reaction terms including dilution:
    /// `f1 = v1 (a1 - c1 v1 - b1 v2) - (n rho'/rho) v1`, and symmetrically.
    #[inline]
    pub fn reaction(&self, v1: f64, v2: f64) -> (f64, f64) {
        let f1 = v1 * (self.a[0] - self.c[0] * v1 - self.b[0] * v2) - self.dilution * v1;
        let f2 = v2 * (self.a[1] - self.b[1] * v1 - self.c[1] * v2) - self.dilution * v2;
        (f1, f2)
    }
}
