//! Runs the requested evaluators over the SNR grid.

use relay_aser::analytic::{
    aser_closed_form_at, aser_quadrature, avg_snr_from_geometry, build_cdf_model, AnalyticError, Precision,
};
use relay_aser::constellation::sep_params;
use relay_aser::montecarlo::{aser_semi_analytic, relay_symbol_sim, until_precise, SimEstimate};

use crate::config::{Evaluator, SweepSpec};

/// Adaptive Monte Carlo sizing used when no trial count is configured.
pub const MC_INITIAL_TRIALS: u64 = 1_000_000;
pub const MC_MAX_TRIALS: u64 = 100_000_000;
pub const MC_TARGET_REL_ERR: f64 = 0.05;

/// One grid point. A requested evaluator that failed holds `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub aser_closed: Option<f64>,
    pub aser_quadrature: Option<f64>,
    pub mc: Option<SimEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub snr_db: f64,
    pub evaluator: Evaluator,
    pub error: AnalyticError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<PointFailure>,
}

/// Seed of grid point `j`: consecutive offsets from the master seed, each
/// keying its own ChaCha family of chunk streams.
pub fn point_seed(seed: u64, j: usize) -> u64 {
    seed.wrapping_add(j as u64)
}

/// Evaluates every grid point in order. `progress` sees each finished row.
pub fn run_sweep(spec: &SweepSpec, mut progress: impl FnMut(&SweepRow)) -> Result<SweepOutcome, AnalyticError> {
    spec.network.validate()?;
    let p = sep_params(&spec.constellation);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    // Successive points need similar precision; start each one just below
    // the rung its predecessor settled on.
    let mut hint = Precision::LOWEST;
    for (j, snr_db) in spec.grid().into_iter().enumerate() {
        let snrs = avg_snr_from_geometry(&spec.network, snr_db);
        let model = build_cdf_model(&spec.network, &snrs)?;
        let mut row = SweepRow { snr_db, aser_closed: None, aser_quadrature: None, mc: None };
        if spec.wants(Evaluator::Closed) {
            row.aser_closed = Some(match aser_closed_form_at(&model, &p, hint) {
                Ok(r) => {
                    hint = r.hint();
                    r.value
                }
                Err(error) => {
                    hint = Precision::LOWEST;
                    failures.push(PointFailure { snr_db, evaluator: Evaluator::Closed, error });
                    f64::NAN
                }
            });
        }
        if spec.wants(Evaluator::Quadrature) {
            row.aser_quadrature = Some(aser_quadrature(&model, &p).unwrap_or_else(|error| {
                failures.push(PointFailure { snr_db, evaluator: Evaluator::Quadrature, error });
                f64::NAN
            }));
        }
        if spec.wants_mc() {
            let seed = point_seed(spec.seed, j);
            let run = |t: u64| {
                if spec.wants(Evaluator::McSemi) {
                    aser_semi_analytic(&spec.network, &snrs, &p, t, seed)
                } else {
                    relay_symbol_sim(&spec.network, &snrs, &spec.constellation, t, seed)
                }
            };
            row.mc = Some(match spec.trials {
                Some(t) => run(t),
                None => until_precise(MC_INITIAL_TRIALS, MC_MAX_TRIALS, MC_TARGET_REL_ERR, run),
            });
        }
        progress(&row);
        rows.push(row);
    }
    Ok(SweepOutcome { rows, failures })
}
