//! Parameter sets of the three reference scenarios.
//!
//! All three share `d1 = 0.2`, `d2 = 0.1`, `a_i = 1.2`, `b_i = 0.013`,
//! `c_i = 0.012`, `Omega(0) = (0, 1)` and `n = 1`; they differ in the
//! evolution rate:
//!
//! | preset      | rho(t)            | period |
//! |-------------|-------------------|--------|
//! | `example5_1` | `1`               | 2      |
//! | `example5_2` | `1 + 0.5 |sin t|` | pi     |
//! | `example5_3` | `1 - 0.3 |sin t|` | pi     |
//!
//! `|sin t|` has period `pi`, so the evolving presets use it; averages over
//! that period give `mean(rho^-2) = 0.6020` and `1.5853`. The same formulas
//! cut off at `T = 2` are available from [`literal_example_law`] for
//! comparison, but they are not periodic.

use core::f64::consts::PI;

use crate::error::Result;
use crate::model::{Interval, ModelParams, SpeciesParams};
use crate::periodic::{EvolutionLaw, PeriodicFn, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Example5_1,
    Example5_2,
    Example5_3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Example5_1, Preset::Example5_2, Preset::Example5_3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Example5_1 => "example5_1",
            Preset::Example5_2 => "example5_2",
            Preset::Example5_3 => "example5_3",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Amplitude `m` in `rho = 1 + m |sin t|`.
    pub fn amplitude(self) -> f64 {
        match self {
            Preset::Example5_1 => 0.0,
            Preset::Example5_2 => 0.5,
            Preset::Example5_3 => -0.3,
        }
    }

    pub fn law(self) -> Result<EvolutionLaw> {
        match self {
            Preset::Example5_1 => EvolutionLaw::fixed(2.0),
            _ => example_law(self.amplitude()),
        }
    }

    pub fn params(self) -> Result<ModelParams> {
        base_params(self.law()?)
    }
}

/// `rho = 1 + amplitude |sin t|` over its true period `pi`.
pub fn example_law(amplitude: f64) -> Result<EvolutionLaw> {
    abs_sin_law(amplitude, 1.0, PI)
}

/// `rho = 1 + amplitude |sin t|` cut off at `T = 2`.
pub fn literal_example_law(amplitude: f64) -> Result<EvolutionLaw> {
    abs_sin_law(amplitude, 1.0, 2.0)
}

/// `rho = 1 - m |sin(pi t)|` with `T = 1`, used by the amplitude sweep.
pub fn sweep_law(m: f64) -> Result<EvolutionLaw> {
    abs_sin_law(-m, PI, 1.0)
}

fn abs_sin_law(amplitude: f64, omega: f64, period: f64) -> Result<EvolutionLaw> {
    let rho = PeriodicFn::new(
        Profile::AffineAbsSin {
            base: 1.0,
            amplitude,
            omega,
        },
        period,
    )?;
    EvolutionLaw::new(rho, 1)
}

fn base_params(law: EvolutionLaw) -> Result<ModelParams> {
    let period = law.period();
    let species = |d: f64| -> Result<SpeciesParams> {
        Ok(SpeciesParams {
            diffusion: d,
            growth: PeriodicFn::constant(1.2, period)?,
            competition: PeriodicFn::constant(0.013, period)?,
            crowding: PeriodicFn::constant(0.012, period)?,
        })
    };
    ModelParams::new(species(0.2)?, species(0.1)?, law, Interval::new(0.0, 1.0)?)
}
