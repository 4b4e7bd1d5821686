//! Reproduction indexes, principal eigenvalues, diffusion thresholds and the
//! persistence/extinction classification.

use libm::fabs;

use crate::eigen::principal_eigenpair;
use crate::error::{config, Error, Result};
use crate::grid::Grid;
use crate::model::{ModelParams, Species};
use crate::periodic::{extrema_over_period, EvolutionLaw, EXTREMA_SAMPLES};
use crate::quadrature::integrate_period;

/// `|R_i - 1|` below this is reported as a tie.
pub const TIE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    BothExtinct,
    Species1Persists,
    Species2Persists,
    PersistenceBoth { coexistence_certified: bool },
}

impl Regime {
    /// `R_i = 1` counts as the extinction side.
    pub fn from_indexes(r1: f64, r2: f64, coexistence_certified: bool) -> Self {
        match (r1 > 1.0, r2 > 1.0) {
            (false, false) => Regime::BothExtinct,
            (true, false) => Regime::Species1Persists,
            (false, true) => Regime::Species2Persists,
            (true, true) => Regime::PersistenceBoth {
                coexistence_certified,
            },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::BothExtinct => "BothExtinct",
            Regime::Species1Persists => "Species1Persists",
            Regime::Species2Persists => "Species2Persists",
            Regime::PersistenceBoth { .. } => "PersistenceBoth",
        }
    }

    pub fn persists(self, s: Species) -> bool {
        matches!(
            (self, s),
            (Regime::PersistenceBoth { .. }, _)
                | (Regime::Species1Persists, Species::One)
                | (Regime::Species2Persists, Species::Two)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// `D_i` on the evolving domain.
    pub evolving: [f64; 2],
    /// `D_i*` on the fixed domain.
    pub fixed: [f64; 2],
}

/// Everything the classification needs, indexed by species.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexReport {
    pub lambda0: f64,
    pub r: [f64; 2],
    pub lam: [f64; 2],
    pub r_star: [f64; 2],
    pub thresholds: Thresholds,
    pub rho_bar_inv_sq: f64,
    pub regime: Regime,
    /// `(a1/b1)^m (1 - 1/R1) > M2` and `(a2/b2)^m (1 - 1/R2) > M1`.
    pub side_ok: [bool; 2],
    pub m_bound: [f64; 2],
    pub tie: [bool; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdOrdering {
    Equal,
    /// `D_i > D_i*`: evolution helps persistence.
    EvolvingLarger,
    /// `D_i < D_i*`.
    EvolvingSmaller,
}

impl ThresholdOrdering {
    pub fn label(self) -> &'static str {
        match self {
            ThresholdOrdering::Equal => "equal",
            ThresholdOrdering::EvolvingLarger => "evolving_larger",
            ThresholdOrdering::EvolvingSmaller => "evolving_smaller",
        }
    }
}

/// Period mean of `rho^-2`.
pub fn rho_bar_inv_sq(law: &EvolutionLaw, nodes: usize) -> Result<f64> {
    let rho = law.rho_fn();
    let integral = integrate_period(
        |t| {
            let r = rho.eval_closed(t);
            1.0 / (r * r)
        },
        law.period(),
        nodes,
    )?;
    Ok(integral / law.period())
}

/// Period mean `a_i` bar.
pub fn mean_growth(params: &ModelParams, species: Species, nodes: usize) -> Result<f64> {
    let a = &params.species(species).growth;
    Ok(integrate_period(|t| a.eval_closed(t), params.period(), nodes)? / params.period())
}

fn check_lambda0(lambda0: f64) -> Result<()> {
    if lambda0.is_finite() && lambda0 > 0.0 {
        Ok(())
    } else {
        config(alloc::format!("lambda0 must be positive, got {lambda0}"))
    }
}

/// `R_i = int a_i / (d_i lambda0 int rho^-2)`.
pub fn reproduction_index(
    params: &ModelParams,
    lambda0: f64,
    species: Species,
    nodes: usize,
) -> Result<f64> {
    check_lambda0(lambda0)?;
    let a_bar = mean_growth(params, species, nodes)?;
    let rho = rho_bar_inv_sq(params.law(), nodes)?;
    Ok(a_bar / (params.species(species).diffusion * lambda0 * rho))
}

/// `R_i*`, the index with `rho` replaced by 1.
pub fn fixed_domain_index(
    params: &ModelParams,
    lambda0: f64,
    species: Species,
    nodes: usize,
) -> Result<f64> {
    check_lambda0(lambda0)?;
    let a_bar = mean_growth(params, species, nodes)?;
    Ok(a_bar / (params.species(species).diffusion * lambda0))
}

/// `lambda_i = (1/T) int d_i lambda0 / rho^2 - (1/T) int a_i`.
pub fn principal_lambda(
    params: &ModelParams,
    lambda0: f64,
    species: Species,
    nodes: usize,
) -> Result<f64> {
    check_lambda0(lambda0)?;
    let a_bar = mean_growth(params, species, nodes)?;
    let rho = rho_bar_inv_sq(params.law(), nodes)?;
    Ok(params.species(species).diffusion * lambda0 * rho - a_bar)
}

/// `D_i* = a_i bar / lambda0` and `D_i = D_i* / mean(rho^-2)`.
pub fn diffusion_thresholds(params: &ModelParams, lambda0: f64, nodes: usize) -> Result<Thresholds> {
    check_lambda0(lambda0)?;
    let rho = rho_bar_inv_sq(params.law(), nodes)?;
    let mut out = Thresholds {
        evolving: [0.0; 2],
        fixed: [0.0; 2],
    };
    for s in Species::BOTH {
        let star = mean_growth(params, s, nodes)? / lambda0;
        out.fixed[s.index()] = star;
        out.evolving[s.index()] = star / rho;
    }
    Ok(out)
}

/// Orders `D_i` against `D_i*` by the sign of `mean(rho^-2) - 1` and checks
/// that both species agree with it.
pub fn compare_thresholds(report: &IndexReport) -> Result<ThresholdOrdering> {
    let gap = report.rho_bar_inv_sq - 1.0;
    let label = if fabs(gap) <= 1e-12 {
        ThresholdOrdering::Equal
    } else if gap < 0.0 {
        ThresholdOrdering::EvolvingLarger
    } else {
        ThresholdOrdering::EvolvingSmaller
    };
    for s in Species::BOTH {
        let d = report.thresholds.evolving[s.index()];
        let star = report.thresholds.fixed[s.index()];
        let ok = match label {
            ThresholdOrdering::Equal => fabs(d - star) <= 1e-10 * star.max(1.0),
            ThresholdOrdering::EvolvingLarger => d > star,
            ThresholdOrdering::EvolvingSmaller => d < star,
        };
        if !ok {
            return Err(Error::Internal(alloc::format!(
                "threshold ordering {} does not hold for species {}: D = {d}, D* = {star}",
                label.label(),
                s.index() + 1
            )));
        }
    }
    Ok(label)
}

/// `M_i = max_t (a_i - n rho'/rho) / c_i`.
pub fn upper_bound(params: &ModelParams, species: Species) -> Result<f64> {
    let sp = params.species(species);
    let law = params.law();
    let (_, hi) = extrema_over_period(
        |t| (sp.growth.eval_closed(t) - law.dilution_closed(t)) / sp.crowding.eval_closed(t),
        params.period(),
        EXTREMA_SAMPLES,
    )?;
    Ok(hi)
}

/// `min_t a_i / b_i`.
fn min_growth_over_competition(params: &ModelParams, species: Species) -> Result<f64> {
    let sp = params.species(species);
    let (lo, _) = extrema_over_period(
        |t| {
            // no competition: the side condition holds trivially
            let b = sp.competition.eval_closed(t);
            if b == 0.0 {
                f64::MAX
            } else {
                sp.growth.eval_closed(t) / b
            }
        },
        params.period(),
        EXTREMA_SAMPLES,
    )?;
    Ok(lo)
}

/// Computes `lambda0` on `grid` and every index, threshold and flag.
pub fn classify_regime(params: &ModelParams, grid: &Grid, nodes: usize) -> Result<IndexReport> {
    let pair = principal_eigenpair(grid)?;
    classify_with_lambda0(params, pair.lambda0, nodes)
}

pub fn classify_with_lambda0(params: &ModelParams, lambda0: f64, nodes: usize) -> Result<IndexReport> {
    let mut r = [0.0; 2];
    let mut lam = [0.0; 2];
    let mut r_star = [0.0; 2];
    let mut m_bound = [0.0; 2];
    for s in Species::BOTH {
        let i = s.index();
        r[i] = reproduction_index(params, lambda0, s, nodes)?;
        lam[i] = principal_lambda(params, lambda0, s, nodes)?;
        r_star[i] = fixed_domain_index(params, lambda0, s, nodes)?;
        m_bound[i] = upper_bound(params, s)?;
    }
    let mut side_ok = [false; 2];
    for s in Species::BOTH {
        let i = s.index();
        let other = s.other().index();
        let lhs = min_growth_over_competition(params, s)? * (1.0 - 1.0 / r[i]);
        side_ok[i] = lhs > m_bound[other];
    }
    let regime = Regime::from_indexes(r[0], r[1], side_ok[0] && side_ok[1]);
    Ok(IndexReport {
        lambda0,
        r,
        lam,
        r_star,
        thresholds: diffusion_thresholds(params, lambda0, nodes)?,
        rho_bar_inv_sq: rho_bar_inv_sq(params.law(), nodes)?,
        regime,
        side_ok,
        m_bound,
        tie: [fabs(r[0] - 1.0) < TIE_TOLERANCE, fabs(r[1] - 1.0) < TIE_TOLERANCE],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{literal_example_law, Preset};
    use crate::quadrature::DEFAULT_NODES;
    use core::f64::consts::PI;

    const N: usize = DEFAULT_NODES;
    const PI2: f64 = PI * PI;

    #[test]
    fn fixed_domain_mean_is_one() {
        let law = EvolutionLaw::fixed(2.0).unwrap();
        assert!((rho_bar_inv_sq(&law, N).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn preset_means_match_reported_values() {
        let grow = rho_bar_inv_sq(&Preset::Example5_2.law().unwrap(), N).unwrap();
        let shrink = rho_bar_inv_sq(&Preset::Example5_3.law().unwrap(), N).unwrap();
        assert!((grow - 0.6020).abs() < 5e-4, "{grow}");
        assert!((shrink - 1.5853).abs() < 5e-4, "{shrink}");
    }

    #[test]
    fn literal_cutoff_differs_from_reported_values() {
        // Cutting |sin t| off at T = 2 changes the mean noticeably.
        let grow = rho_bar_inv_sq(&literal_example_law(0.5).unwrap(), N).unwrap();
        assert!((grow - 0.570167).abs() < 1e-5, "{grow}");
    }

    #[test]
    fn example_5_1_indexes() {
        let params = Preset::Example5_1.params().unwrap();
        let r1 = reproduction_index(&params, PI2, Species::One, N).unwrap();
        let r2 = reproduction_index(&params, PI2, Species::Two, N).unwrap();
        assert!((r1 - 0.6079).abs() < 5e-4);
        assert!((r2 - 1.2159).abs() < 5e-4);
        for s in Species::BOTH {
            let r = reproduction_index(&params, PI2, s, N).unwrap();
            let star = fixed_domain_index(&params, PI2, s, N).unwrap();
            assert_eq!(r, star);
            let d = params.species(s).diffusion;
            assert!((star - 1.2 / (d * PI2)).abs() < 1e-12);
        }
        let lam2 = principal_lambda(&params, PI2, Species::Two, N).unwrap();
        assert!((lam2 - (0.1 * PI2 - 1.2)).abs() < 1e-13);
        assert!(lam2 < 0.0);
    }

    #[test]
    fn example_5_2_index_is_fixed_index_over_mean() {
        let params = Preset::Example5_2.params().unwrap();
        let r1 = reproduction_index(&params, PI2, Species::One, N).unwrap();
        let star = fixed_domain_index(&params, PI2, Species::One, N).unwrap();
        let rho = rho_bar_inv_sq(params.law(), N).unwrap();
        assert!((r1 - star / rho).abs() < 1e-12);
        assert!(r1 > 1.0);
    }

    #[test]
    fn thresholds() {
        let fixed = Preset::Example5_1.params().unwrap();
        let t = diffusion_thresholds(&fixed, PI2, N).unwrap();
        for i in 0..2 {
            assert!((t.fixed[i] - 1.2 / PI2).abs() < 1e-12);
            assert!((t.fixed[i] - 0.12159).abs() < 1e-5);
            assert!((t.evolving[i] - t.fixed[i]).abs() < 1e-10);
        }
        let grow = Preset::Example5_2.params().unwrap();
        let t = diffusion_thresholds(&grow, PI2, N).unwrap();
        // D_i = (1.2/pi^2)/0.6020 with the rounded mean
        assert!((t.evolving[0] - 0.20198).abs() < 2e-4);
    }

    #[test]
    fn classification_of_presets() {
        let expect = [
            (Preset::Example5_1, "BothExtinct", ThresholdOrdering::Equal),
            (Preset::Example5_2, "PersistenceBoth", ThresholdOrdering::EvolvingLarger),
            (Preset::Example5_3, "BothExtinct", ThresholdOrdering::EvolvingSmaller),
        ];
        for (preset, _, ordering) in expect {
            let params = preset.params().unwrap();
            let grid = Grid::new(params.interval(), 199).unwrap();
            let report = classify_regime(&params, &grid, N).unwrap();
            assert_eq!(compare_thresholds(&report).unwrap(), ordering);
            match preset {
                Preset::Example5_1 => assert_eq!(report.regime, Regime::Species2Persists),
                Preset::Example5_2 => assert_eq!(
                    report.regime,
                    Regime::PersistenceBoth {
                        coexistence_certified: false
                    }
                ),
                Preset::Example5_3 => assert_eq!(report.regime, Regime::BothExtinct),
            }
        }
    }

    #[test]
    fn index_at_threshold_is_one_and_brackets() {
        for preset in Preset::ALL {
            let params = preset.params().unwrap();
            let t = diffusion_thresholds(&params, PI2, N).unwrap();
            for s in Species::BOTH {
                let d = t.evolving[s.index()];
                let at = params.with_diffusion(s, d).unwrap();
                let r = reproduction_index(&at, PI2, s, N).unwrap();
                assert!((r - 1.0).abs() < 1e-8);
                let below = reproduction_index(&params.with_diffusion(s, d * (1.0 - 1e-3)).unwrap(), PI2, s, N).unwrap();
                let above = reproduction_index(&params.with_diffusion(s, d * (1.0 + 1e-3)).unwrap(), PI2, s, N).unwrap();
                assert!(below > 1.0 && above < 1.0);
            }
        }
    }

    #[test]
    fn index_decreases_with_diffusion() {
        let params = Preset::Example5_3.params().unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=40 {
            let d = 0.01 * k as f64;
            let r = reproduction_index(&params.with_diffusion(Species::One, d).unwrap(), PI2, Species::One, N)
                .unwrap();
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn regime_boundary_counts_as_extinction() {
        assert_eq!(Regime::from_indexes(1.0, 1.0, false), Regime::BothExtinct);
        assert_eq!(Regime::from_indexes(1.0 + 1e-12, 1.0, false), Regime::Species1Persists);
    }

    #[test]
    fn rejects_non_positive_lambda0() {
        let params = Preset::Example5_1.params().unwrap();
        assert!(reproduction_index(&params, 0.0, Species::One, N).is_err());
    }
}
