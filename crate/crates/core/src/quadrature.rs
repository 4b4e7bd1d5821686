use crate::error::{config, Error, Result};

/// Default number of Simpson subintervals per period.
pub const DEFAULT_NODES: usize = 4096;

/// Composite Simpson rule for `g` over `[0, period]` with `nodes`
/// subintervals (`nodes` even).
pub fn integrate_period<G>(g: G, period: f64, nodes: usize) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    simpson(g, 0.0, period, nodes)
}

pub fn simpson<G>(g: G, a: f64, b: f64, nodes: usize) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    if nodes < 2 || nodes % 2 != 0 {
        return config(alloc::format!(
            "Simpson rule needs an even number of subintervals >= 2, got {nodes}"
        ));
    }
    let h = (b - a) / nodes as f64;
    let mut sum = 0.0;
    for k in 0..=nodes {
        let t = if k == nodes { b } else { a + k as f64 * h };
        let v = g(t);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: "quadrature integrand",
                t,
            });
        }
        let w = if k == 0 || k == nodes {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * v;
    }
    Ok(sum * h / 3.0)
}
