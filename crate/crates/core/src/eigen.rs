//! Principal Dirichlet eigenpair of the three-point Laplacian and the
//! separable periodic-parabolic eigenfunctions built on it.

use alloc::vec::Vec;
use libm::{exp, fabs, log};

use crate::error::{config, Error, Result};
use crate::grid::{Field, Grid};
use crate::indexes;
use crate::model::{ModelParams, Species};
use crate::quadrature::simpson;
use crate::tridiag::Toeplitz;

const MAX_ITERATIONS: usize = 10_000;
const EIGENVALUE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    /// Smallest eigenvalue of `-Delta_h`.
    pub lambda0: f64,
    /// Positive eigenvector with maximum value 1.
    pub psi0: Field,
    /// `||(-Delta_h) psi0 - lambda0 psi0||_inf / ||psi0||_inf`.
    pub residual: f64,
    pub iterations: usize,
}

/// Inverse power iteration (shift 0) with tridiagonal solves.
pub fn principal_eigenpair(grid: &Grid) -> Result<Eigenpair> {
    let n = grid.len();
    let h2 = grid.spacing() * grid.spacing();
    let mut solver = Toeplitz::new(n);
    let mut psi = alloc::vec![1.0; n];
    let mut lambda = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        // (-Delta_h) w = psi  <=>  tridiag(-1, 2, -1) w = h^2 psi
        let mut w: Vec<f64> = psi.iter().map(|p| p * h2).collect();
        solver.solve(2.0, -1.0, &mut w)?;
        let wmax = w.iter().fold(0.0f64, |m, v| m.max(fabs(*v)));
        if !(wmax > 0.0 && wmax.is_finite()) {
            return Err(Error::Internal("inverse iteration produced a zero vector".into()));
        }
        let estimate = 1.0 / wmax;
        psi = w.into_iter().map(|v| v / wmax).collect();
        let settled = fabs(estimate - lambda) < EIGENVALUE_TOL * estimate;
        lambda = estimate;
        if settled {
            converged = true;
            break;
        }
    }

    let lap = grid.neg_laplacian(&psi, 0.0);
    let num: f64 = psi.iter().zip(&lap).map(|(p, l)| p * l).sum();
    let den: f64 = psi.iter().map(|p| p * p).sum();
    let rayleigh = num / den;
    let residual = lap
        .iter()
        .zip(&psi)
        .fold(0.0f64, |m, (l, p)| m.max(fabs(l - rayleigh * p)));

    if !converged {
        return Err(Error::NoConvergence {
            what: "inverse power iteration",
            iterations,
            residual,
        });
    }
    if psi.iter().any(|p| *p <= 0.0) {
        return Err(Error::Internal("principal eigenvector is not positive".into()));
    }
    Ok(Eigenpair {
        lambda0: rayleigh,
        psi0: Field(psi),
        residual,
        iterations,
    })
}

/// `phi_i(y, t) = psi0(y) g_i(t)` sampled at a set of phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicEigenfunction {
    pub species: Species,
    /// The periodic-parabolic principal eigenvalue used in the exponent.
    pub lambda: f64,
    pub times: Vec<f64>,
    /// Time factor, normalized so its maximum over `times` is 1.
    pub g: Vec<f64>,
    pub psi0: Field,
    /// `|g(T) - g(0)|` for the normalized factor.
    pub periodicity_residual: f64,
}

impl PeriodicEigenfunction {
    /// Whether the evolution law made the construction non-periodic.
    pub fn inconsistent_law(&self) -> bool {
        self.periodicity_residual > 1e-6
    }

    /// The field `phi(., times[k])`.
    pub fn field(&self, k: usize) -> Field {
        Field(self.psi0.iter().map(|p| p * self.g[k]).collect())
    }
}

/// Builds the separable eigenfunction of the linearization at `(0, 0)`.
///
/// `times` must start at 0, increase, and stay within `[0, T]`. The time
/// factor is `g(t) = exp(int_0^t [a - n rho'/rho - d lambda0 / rho^2 + lambda] ds)`;
/// the dilution part is integrated exactly as `n ln(rho(t)/rho(0))`.
pub fn periodic_eigenfunction(
    params: &ModelParams,
    species: Species,
    pair: &Eigenpair,
    times: &[f64],
    quadrature_nodes: usize,
) -> Result<PeriodicEigenfunction> {
    let period = params.period();
    if times.is_empty() || times[0] != 0.0 {
        return config("eigenfunction times must start at 0");
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times[times.len() - 1] > period * (1.0 + 1e-12) {
        return config("eigenfunction times must increase within one period");
    }
    let lambda = indexes::principal_lambda(params, pair.lambda0, species, quadrature_nodes)?;
    let sp = params.species(species);
    let law = params.law();
    let n = law.dimension() as f64;
    let rho0 = law.rho_fn().eval_closed(0.0);
    let integrand = |s: f64| {
        let r = law.rho_fn().eval_closed(s);
        sp.growth.eval_closed(s) - sp.diffusion * pair.lambda0 / (r * r)
    };

    let mut exponent = Vec::with_capacity(times.len() + 1);
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &t in times {
        if t > prev {
            acc += simpson(integrand, prev, t, 2)?;
        }
        prev = t;
        let tau = t.min(period);
        exponent.push(acc + lambda * t - n * log(law.rho_fn().eval_closed(tau) / rho0));
    }
    // value at the end of the period, for the periodicity check
    if prev < period {
        acc += simpson(integrand, prev, period, 2)?;
    }
    let end = acc + lambda * period - n * log(law.rho_fn().eval_closed(period) / rho0);

    let top = exponent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let g: Vec<f64> = exponent.iter().map(|e| exp(e - top)).collect();
    let periodicity_residual = fabs(exp(end - top) - exp(-top));
    Ok(PeriodicEigenfunction {
        species,
        lambda,
        times: times.to_vec(),
        g,
        psi0: pair.psi0.clone(),
        periodicity_residual,
    })
}
