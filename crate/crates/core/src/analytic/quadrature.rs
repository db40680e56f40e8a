//! ASER as `-∫₀^∞ P'(λ) F(λ) dλ` by adaptive quadrature in `t = √λ`.

use crate::constellation::{sep_derivative, SepParams};
use crate::quad::{integrate_with_breaks, QuadControl};

use super::{cdf_direct, relayed_cdf, AnalyticError, CdfModel};

/// Relative tolerance of the outer integral.
pub const QUAD_REL_TOL: f64 = 1e-8;

/// Slowest exponential decay rate of `-P'(λ)`.
fn decay_rate(p: &SepParams) -> f64 {
    match *p {
        SepParams::Hqam { alpha, .. } => alpha / 2.0,
        SepParams::Rqam { zeta, rho, n2, .. } => {
            if n2 > 0.0 {
                zeta.min(rho).powi(2) / 2.0
            } else {
                zeta * zeta / 2.0
            }
        }
        SepParams::Xqam { c, .. } => c,
    }
}

pub fn aser_quadrature(model: &CdfModel, p: &SepParams) -> Result<f64, AnalyticError> {
    let cfg = model.config;
    let snrs = model.snrs;
    // The outage CDF grows like λ^K near the origin.
    let k = (cfg.ns * cfg.nd + cfg.nr.min(cfg.ns) * cfg.nr.min(cfg.nd)) as f64;
    let inner_tol = QUAD_REL_TOL * 1e-2;
    aser_integral(p, k, |l| cdf_direct(model, l) * relayed_cdf(&cfg, &snrs, l, inner_tol))
}

/// The same integral for an arbitrary CDF, used to check the integrator
/// against limits with a known answer.
pub fn aser_quadrature_with(p: &SepParams, cdf: impl Fn(f64) -> f64) -> Result<f64, AnalyticError> {
    aser_integral(p, 0.0, cdf)
}

fn aser_integral(p: &SepParams, k: f64, cdf: impl Fn(f64) -> f64) -> Result<f64, AnalyticError> {
    let a = decay_rate(p);
    let peak = (k + 0.5) / a;
    let l_max = (2.0 * k + 200.0) / a;
    let t_max = l_max.sqrt();
    let f = |t: f64| {
        if t <= 0.0 {
            // 2t·P'(t²) has a finite limit, but F(0) = 0 unless degenerate.
            let c = cdf(0.0);
            if c == 0.0 {
                return 0.0;
            }
            let t = 1e-300f64;
            return -2.0 * t * sep_derivative(p, t * t).unwrap_or(0.0) * c;
        }
        let l = t * t;
        let d = sep_derivative(p, l).unwrap_or(0.0);
        if d == 0.0 {
            return 0.0;
        }
        -2.0 * t * d * cdf(l)
    };
    let mut breaks = vec![0.0];
    for x in [peak / 16.0, peak / 4.0, peak, 2.0 * peak, 4.0 * peak] {
        let t = x.sqrt();
        if t > *breaks.last().unwrap() && t < t_max {
            breaks.push(t);
        }
    }
    breaks.push(t_max);
    let ctl = QuadControl { rel_tol: QUAD_REL_TOL, abs_tol: 0.0, max_evals: 100_000 };
    Ok(integrate_with_breaks(f, &breaks, &ctl)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::sep_conditional;

    #[test]
    fn degenerate_cdfs() {
        let p = SepParams::rqam(4, 4, 1.0);
        let one = aser_quadrature_with(&p, |_| 1.0).unwrap();
        assert!((one - sep_conditional(&p, 0.0)).abs() < 1e-9, "{one}");
        assert_eq!(aser_quadrature_with(&p, |_| 0.0).unwrap(), 0.0);
    }
}
