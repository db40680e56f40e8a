//! End-to-end SNR distribution of the selected relay link and the average
//! symbol error rate, in closed form and by direct quadrature.

mod closed;
mod jint;
mod quadrature;

pub use closed::{aser_closed_form, aser_closed_form_at, ClosedFormReport, Precision};
pub use quadrature::{aser_quadrature, aser_quadrature_with, QUAD_REL_TOL};

use thiserror::Error;

use crate::quad::{integrate, QuadControl, QuadError};
use crate::specfun::{bessel_k, binom, gamma_p_int, log_gamma, multinomial_omega};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("closed form needs more than {bits} bits of working precision")]
    PrecisionExhausted { bits: u32 },
    #[error("closed-form value {value:e} lies outside [0, 1]")]
    OutOfRange { value: f64 },
    #[error("z-series did not reach its truncation floor within {terms} terms")]
    SeriesCap { terms: usize },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Antenna counts and node geometry. Distances share an arbitrary unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub ns: usize,
    pub nr: usize,
    pub nd: usize,
    pub d_sd: f64,
    pub d_sr: f64,
    pub d_rd: f64,
    pub phi: f64,
}

impl NetworkConfig {
    /// Relay a third of the way from source to destination, pathloss
    /// exponent 2.5.
    pub fn symmetric(n: usize) -> Self {
        Self::with_antennas(n, n, n)
    }

    pub fn with_antennas(ns: usize, nr: usize, nd: usize) -> Self {
        NetworkConfig { ns, nr, nd, d_sd: 1.0, d_sr: 1.0 / 3.0, d_rd: 2.0 / 3.0, phi: 2.5 }
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        if self.ns == 0 || self.nr == 0 || self.nd == 0 {
            return Err(AnalyticError::Config("antenna counts must be at least 1".into()));
        }
        if self.ns > 8 || self.nr > 8 || self.nd > 8 {
            return Err(AnalyticError::Config("antenna counts above 8 are not supported".into()));
        }
        for (name, d) in [("D_SD", self.d_sd), ("D_SR", self.d_sr), ("D_RD", self.d_rd)] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(AnalyticError::Config(format!("{name} must be positive, got {d}")));
            }
        }
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return Err(AnalyticError::Config(format!("pathloss exponent must be non-negative, got {}", self.phi)));
        }
        Ok(())
    }
}

/// Average link SNRs (linear): direct, source–relay and relay–destination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvgSnrTriple {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Link SNRs from the direct-link SNR in dB and the pathloss geometry.
pub fn avg_snr_from_geometry(cfg: &NetworkConfig, snr_sd_db: f64) -> AvgSnrTriple {
    let l0 = db_to_linear(snr_sd_db);
    AvgSnrTriple {
        l0,
        l1: l0 * (cfg.d_sd / cfg.d_sr).powf(cfg.phi),
        l2: l0 * (cfg.d_sd / cfg.d_rd).powf(cfg.phi),
    }
}

/// `C(N_S,v)(-1)^v Ω_{w,v,N_D} / λ₀^w`, the coefficient of `λ^w e^{-vλ/λ₀}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectTerm {
    pub v: usize,
    pub w: usize,
    pub c1: f64,
}

/// One term `c·e^{-Tλ} λ^{j+n+N_D} K_ϑ(2√χ λ)` of the relayed-link CDF.
/// The coefficient is kept as `sign · e^{ln_c}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayTerm {
    pub i: usize,
    pub j: usize,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub ln_c: f64,
    pub sign: f64,
    pub chi: f64,
    pub t: f64,
    pub theta: i64,
}

impl RelayTerm {
    pub fn coefficient(&self) -> f64 {
        self.sign * self.ln_c.exp()
    }

    pub fn power(&self, nd: usize) -> usize {
        self.j + self.n + nd
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfModel {
    pub config: NetworkConfig,
    pub snrs: AvgSnrTriple,
    pub direct_terms: Vec<DirectTerm>,
    pub relay_terms: Vec<RelayTerm>,
}

pub fn build_cdf_model(cfg: &NetworkConfig, snrs: &AvgSnrTriple) -> Result<CdfModel, AnalyticError> {
    cfg.validate()?;
    for x in [snrs.l0, snrs.l1, snrs.l2] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(AnalyticError::Config(format!("average SNRs must be positive, got {x}")));
        }
    }
    let (ns, nr, nd) = (cfg.ns, cfg.nr, cfg.nd);
    let AvgSnrTriple { l0, l1, l2 } = *snrs;
    let mut direct_terms = Vec::new();
    for v in 0..=ns {
        for w in 0..=v * (nd - 1) {
            let sign = if v % 2 == 0 { 1.0 } else { -1.0 };
            let c1 = sign * binom(ns as u32, v as u32) * multinomial_omega(w, v, nd) / l0.powi(w as i32);
            direct_terms.push(DirectTerm { v, w, c1 });
        }
    }
    let mut relay_terms = Vec::new();
    let ln_gamma_nd = log_gamma(nd as f64).expect("positive");
    for i in 1..=ns {
        for j in 0..=i * (nr - 1) {
            for m in 0..nr {
                for n in 0..=m * (nd - 1) {
                    let p = j + n + nd;
                    for r in 0..p {
                        let theta = r as i64 - j as i64 + 1;
                        let ln_c = (2.0 * nr as f64).ln()
                            + multinomial_omega(j, i, nr).ln()
                            + multinomial_omega(n, m, nd).ln()
                            - ln_gamma_nd
                            - 0.5 * (r + j + 1) as f64 * l1.ln()
                            - 0.5 * (2 * nd + 2 * n + j - r - 1) as f64 * l2.ln()
                            + 0.5 * theta as f64 * ((i as f64).ln() - ((m + 1) as f64).ln())
                            + binom(ns as u32, i as u32).ln()
                            + binom(nr as u32 - 1, m as u32).ln()
                            + binom(p as u32 - 1, r as u32).ln();
                        let sign = if (i + m) % 2 == 0 { 1.0 } else { -1.0 };
                        relay_terms.push(RelayTerm {
                            i,
                            j,
                            m,
                            n,
                            r,
                            ln_c,
                            sign,
                            chi: (i * (m + 1)) as f64 / (l1 * l2),
                            t: i as f64 / l1 + (m + 1) as f64 / l2,
                            theta,
                        });
                    }
                }
            }
        }
    }
    Ok(CdfModel { config: *cfg, snrs: *snrs, direct_terms, relay_terms })
}

/// CDF of the selected direct-link SNR, `P(N_D, λ/λ₀)^{N_S}`.
pub fn cdf_direct(model: &CdfModel, lambda: f64) -> f64 {
    let c = &model.config;
    gamma_p_int(c.nd as u32, lambda / model.snrs.l0).powi(c.ns as i32)
}

/// CDF of the selected direct-link SNR as the term-by-term expansion.
/// Numerically fine for `λ` comparable to `λ₀`; cancels badly near 0.
pub fn cdf_direct_series(model: &CdfModel, lambda: f64) -> f64 {
    model
        .direct_terms
        .iter()
        .map(|t| t.c1 * lambda.powi(t.w as i32) * (-(t.v as f64) * lambda / model.snrs.l0).exp())
        .sum()
}

/// Relayed-link CDF, `P(XY/(X+Y) ≤ λ)` for the selected hop SNRs, via
/// `F_Y(λ) + ∫₀^∞ f_Y(λ+t) F_X(λ + λ²/t) dt`. All contributions are positive,
/// so tiny values keep full relative accuracy.
pub fn cdf_relayed(model: &CdfModel, lambda: f64) -> f64 {
    relayed_cdf(&model.config, &model.snrs, lambda, 1e-11)
}

pub(crate) fn relayed_cdf(cfg: &NetworkConfig, snrs: &AvgSnrTriple, lambda: f64, rel_tol: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let (ns, nr, nd) = (cfg.ns as i32, cfg.nr as u32, cfg.nd as u32);
    let (l1, l2) = (snrs.l1, snrs.l2);
    let f_x = |x: f64| gamma_p_int(nr, x / l1).powi(ns);
    let f_y = |y: f64| gamma_p_int(nd, y / l2).powi(nr as i32);
    let ln_norm = -log_gamma(nd as f64).expect("positive") - l2.ln() + (nr as f64).ln();
    let pdf_y = |y: f64| {
        let x = y / l2;
        if x <= 0.0 {
            return 0.0;
        }
        let base = ((nd as f64 - 1.0) * x.ln() - x + ln_norm).exp();
        if nr > 1 {
            base * gamma_p_int(nd, x).powi(nr as i32 - 1)
        } else {
            base
        }
    };
    let head = f_y(lambda);
    if head >= 1.0 {
        return 1.0;
    }
    // t = λ₂·u/(1-u) folds (0, ∞) onto (0, 1).
    let g = |u: f64| {
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        let t = l2 * u / (1.0 - u);
        let jac = l2 / ((1.0 - u) * (1.0 - u));
        pdf_y(lambda + t) * f_x(lambda + lambda * lambda / t) * jac
    };
    let ctl = QuadControl { rel_tol, abs_tol: 0.0, max_evals: 20_000 };
    // The F_X factor switches on where t is of order λ²/λ₁; split there.
    let knee = {
        let t = (lambda * lambda / l1).max(1e-300);
        t / (t + l2)
    };
    let mut breaks = vec![0.0];
    for f in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
        let u = knee * f;
        if u > 0.0 && u < 0.9 && u > *breaks.last().unwrap() {
            breaks.push(u);
        }
    }
    for u in [0.5, 0.9] {
        if u > *breaks.last().unwrap() {
            breaks.push(u);
        }
    }
    breaks.push(1.0);
    let tail = crate::quad::integrate_with_breaks(g, &breaks, &ctl).map(|r| r.value).unwrap_or_else(|e| e.value);
    (head + tail).min(1.0)
}

/// Relayed-link CDF as the term-by-term Bessel expansion, with the small-
/// argument limit of `λ^P K_ϑ(βλ)` at the origin. Loses accuracy when the
/// terms cancel (λ far below the hop SNRs or many antennas).
pub fn cdf_relayed_series(model: &CdfModel, lambda: f64) -> f64 {
    let nd = model.config.nd;
    let mut sum = 1.0;
    for t in &model.relay_terms {
        let p = t.power(nd) as f64;
        let nu = t.theta.unsigned_abs() as f64;
        let beta = 2.0 * t.chi.sqrt();
        let x = beta * lambda;
        let val = if x < 1e-8 {
            // K_ν(x) ≈ Γ(ν)/2·(2/x)^ν for ν ≥ 1; K_0(x) ≈ -ln(x/2) - γ.
            if nu >= 1.0 {
                let ln = log_gamma(nu).expect("positive") - std::f64::consts::LN_2 + nu * (2.0 / beta).ln();
                (t.ln_c + ln).exp() * t.sign * lambda.powf(p - nu) * (-t.t * lambda).exp()
            } else if lambda == 0.0 {
                0.0
            } else {
                t.coefficient() * lambda.powf(p) * (-(x / 2.0).ln() - 0.577_215_664_901_532_9)
            }
        } else {
            match bessel_k(nu, x) {
                Ok(k) => t.coefficient() * (-t.t * lambda).exp() * lambda.powf(p) * k,
                Err(_) => f64::NAN,
            }
        };
        sum += val;
    }
    sum
}

/// Upper bound on the end-to-end outage CDF, `F_SD(λ)·F_SRD(λ)`.
pub fn cdf_e2e(model: &CdfModel, lambda: f64) -> f64 {
    cdf_direct(model, lambda) * cdf_relayed(model, lambda)
}

/// Plain numerical integration helper used by oracles in the tests.
pub fn integrate_positive(f: impl FnMut(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64, AnalyticError> {
    Ok(integrate(f, a, b, &QuadControl { rel_tol, abs_tol: 0.0, max_evals: 400_000 })?.value)
}
