//! Monotone iteration: ordering of the iterates, agreement of the limits
//! with direct integration, and the limits themselves.

use evodom_core::dynamics::{periodic_attractor, simulate, InitialCondition, Scheme, StepperConfig};
use evodom_core::monotone::{monotone_iterate_ivp, monotone_iterate_periodic, MonotoneConfig, MonotoneResult};
use evodom_core::presets::{example_law, Preset};
use evodom_core::*;

const NODES: usize = 49;
const DT: f64 = 2e-3;

fn cfg(tol: f64, max_iter: usize) -> MonotoneConfig {
    MonotoneConfig {
        dt: DT,
        tol,
        max_iter,
        record_every: 25,
        ..MonotoneConfig::default()
    }
}

fn grid(p: &ModelParams) -> Grid {
    Grid::new(p.interval(), NODES).unwrap()
}

/// Periodic state from the period map, recorded on the same phases as `cfg`.
fn attractor(p: &ModelParams) -> Vec<StatePair> {
    let scfg = StepperConfig::new(DT, p.period(), Scheme::ImexBe, 25).unwrap();
    let att = periodic_attractor(p, &grid(p), &InitialCondition::default(), &scfg, 1e-9, 2000).unwrap();
    assert!(att.converged);
    att.snapshots
}

fn path_distance(a: &[StatePair], b: &[StatePair]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| {
        assert!((x.t - y.t).abs() < 1e-12);
        m.max(x.sup_distance(y))
    })
}

fn max_violation(r: &MonotoneResult) -> f64 {
    r.trace.records.iter().map(|x| x.violation).fold(0.0, f64::max)
}

fn uncoupled() -> ModelParams {
    let law = example_law(0.5).unwrap();
    let period = law.period();
    let sp = |d: f64, a: f64, c: f64| SpeciesParams {
        diffusion: d,
        growth: PeriodicFn::constant(a, period).unwrap(),
        competition: PeriodicFn::constant(0.0, period).unwrap(),
        crowding: PeriodicFn::constant(c, period).unwrap(),
    };
    ModelParams::new(sp(0.05, 1.2, 0.5), sp(0.04, 1.0, 0.4), law, Interval::new(0.0, 1.0).unwrap()).unwrap()
}

#[test]
fn fixed_domain_iterates_are_ordered_and_match_the_attractor() {
    let p = Preset::Example5_1.params().unwrap();
    let r = monotone_iterate_periodic(&p, &grid(&p), &cfg(1e-6, 5000)).unwrap();
    assert!(r.converged, "{:?}", r.trace.records.last());
    assert!(max_violation(&r) <= 1e-8);
    let att = attractor(&p);
    assert!(path_distance(&r.upper, &att) < 1e-5);
    assert!(path_distance(&r.lower, &att) < 1e-5);
}

#[test]
fn early_iterates_sandwich_the_periodic_state() {
    let p = Preset::Example5_1.params().unwrap();
    let mut c = cfg(1e-6, 5);
    c.keep_iterates = 5;
    let r = monotone_iterate_periodic(&p, &grid(&p), &c).unwrap();
    assert_eq!(r.iterates.len(), 6);
    let att = attractor(&p);
    let slack = 1e-5;
    for it in &r.iterates {
        for ((u, l), a) in it.upper.iter().zip(&it.lower).zip(&att) {
            for j in 0..a.v1.len() {
                assert!(l.v1[j] <= a.v1[j] + slack && a.v1[j] <= u.v1[j] + slack, "m = {}", it.m);
                assert!(u.v2[j] <= a.v2[j] + slack && a.v2[j] <= l.v2[j] + slack, "m = {}", it.m);
            }
        }
    }
    for w in r.iterates.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        for k in 0..prev.upper.len() {
            let (pu, pl, nu, nl) = (&prev.upper[k], &prev.lower[k], &next.upper[k], &next.lower[k]);
            for j in 0..pu.v1.len() {
                assert!(pl.v1[j] <= nl.v1[j] + 1e-8 && nl.v1[j] <= nu.v1[j] + 1e-8 && nu.v1[j] <= pu.v1[j] + 1e-8);
                assert!(pu.v2[j] <= nu.v2[j] + 1e-8 && nu.v2[j] <= nl.v2[j] + 1e-8 && nl.v2[j] <= pl.v2[j] + 1e-8);
            }
        }
    }
}

#[test]
fn shrinking_domain_limits_vanish() {
    let p = Preset::Example5_3.params().unwrap();
    let tol = 1e-6;
    let r = monotone_iterate_periodic(&p, &grid(&p), &cfg(tol, 5000)).unwrap();
    assert!(r.converged);
    for s in r.upper.iter().chain(&r.lower) {
        assert!(s.sup() < tol, "sup {}", s.sup());
    }
}

#[test]
fn limits_are_periodic() {
    for preset in [Preset::Example5_1, Preset::Example5_3] {
        let p = preset.params().unwrap();
        let tol = 1e-6;
        let r = monotone_iterate_periodic(&p, &grid(&p), &cfg(tol, 5000)).unwrap();
        for lim in [&r.upper, &r.lower] {
            let gap = lim.first().unwrap().sup_distance(lim.last().unwrap());
            assert!(gap <= 10.0 * tol, "{preset:?}: {gap}");
        }
    }
}

#[test]
fn uncoupled_limits_coincide_and_solve_the_logistic_scheme() {
    let p = uncoupled();
    let g = grid(&p);
    let tol = 1e-9;
    let mut c = cfg(tol, 20_000);
    c.record_every = 1;
    let r = monotone_iterate_periodic(&p, &g, &c).unwrap();
    assert!(r.converged);
    assert!(r.spread() < 10.0 * tol, "spread {}", r.spread());
    assert!(r.upper[0].v1.sup() > 1.0 && r.upper[0].v2.sup() > 1.0);

    // discrete residual of v_t - d/rho^2 v_yy = (a - n rho'/rho - c v) v
    let h = g.spacing();
    let rho_min = (0..1000).map(|k| p.law().rho(p.period() * k as f64 / 1000.0)).fold(f64::INFINITY, f64::min);
    for s in Species::BOTH {
        let sp = p.species(s);
        let (a, cc, d) = (sp.growth.eval(0.0), sp.crowding.eval(0.0), sp.diffusion);
        let bound = 4.0 * tol * (1.0 / DT + 4.0 * d / (rho_min * rho_min * h * h) + a + 2.0 * cc * r.context.m);
        let field = |st: &StatePair| match s {
            Species::One => st.v1.clone(),
            Species::Two => st.v2.clone(),
        };
        for w in r.upper.windows(2) {
            let (old, new) = (field(&w[0]), field(&w[1]));
            let (t0, t1) = (w[0].t, w[1].t);
            let diff = d / p.law().rho(t1).powi(2);
            let lap = g.neg_laplacian(&new, 0.0);
            for j in 0..new.len() {
                let f = (a - p.law().dilution(t0) - cc * old[j]) * old[j];
                let res = (new[j] - old[j]) / (t1 - t0) + diff * lap[j] - f;
                assert!(res.abs() < bound, "{s:?} t = {t1}: residual {res} > {bound}");
            }
        }
    }
}

#[test]
fn ivp_spread_never_grows_and_limits_match_direct_integration() {
    let p = Preset::Example5_2.params().unwrap();
    let g = grid(&p);
    let ic = InitialCondition::default();
    let r = monotone_iterate_ivp(&p, &g, &ic, p.period(), &cfg(1e-7, 2000)).unwrap();
    assert!(r.converged);
    for w in r.trace.records.windows(2) {
        assert!(w[1].spread <= w[0].spread * (1.0 + 1e-12) + 1e-12, "{w:?}");
    }
    let scfg = StepperConfig::new(DT, p.period(), Scheme::ImexBe, 25).unwrap();
    let traj = simulate(&p, &g, &ic, &scfg).unwrap();
    assert!(path_distance(&r.upper, traj.snapshots()) < 1e-5);
    assert!(path_distance(&r.lower, traj.snapshots()) < 1e-5);
}

#[test]
fn expanding_domain_lower_limit_matches_the_attractor() {
    let p = Preset::Example5_2.params().unwrap();
    let r = monotone_iterate_periodic(&p, &grid(&p), &cfg(1e-6, 500)).unwrap();
    let last = r.trace.records.last().unwrap();
    assert!(last.gap_lower < 1e-9, "{last:?}");
    assert!(max_violation(&r) <= 1e-8);
    let att = attractor(&p);
    assert!(path_distance(&r.lower, &att) < 1e-5);
}
