use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::plan::Method;
use super::run::TrialResult;

/// Mean and standard error of one `(scenario, n, method, tau)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: u8,
    pub n: usize,
    pub method: Method,
    pub tau: f64,
    pub trials: usize,
    pub mse_mean: f64,
    /// Sample standard deviation over `sqrt(trials)`; 0 for a single trial.
    pub mse_se: f64,
    pub delta_n2_mean: f64,
    pub coverage_mean: f64,
    pub crossings_total: usize,
}

/// Groups trial results by cell. Rows are ordered by `(scenario, n, method, tau)`, and
/// values within a cell are summed in trial order, so the table does not depend on the
/// order of `results`.
pub fn aggregate(results: &[TrialResult]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(u8, usize, Method, u64), Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        // Levels are in (0, 1), so the bit pattern orders like the value.
        cells
            .entry((r.scenario, r.n, r.method, r.tau.to_bits()))
            .or_default()
            .push(r);
    }
    cells
        .into_values()
        .map(|mut rs| {
            rs.sort_by_key(|r| (r.trial, r.seed));
            let k = rs.len() as f64;
            let mean = |f: fn(&TrialResult) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / k;
            let mse_mean = mean(|r| r.mse);
            let mse_se = if rs.len() > 1 {
                let ss: f64 = rs.iter().map(|r| (r.mse - mse_mean).powi(2)).sum();
                (ss / (k - 1.0)).sqrt() / k.sqrt()
            } else {
                0.0
            };
            SummaryRow {
                scenario: rs[0].scenario,
                n: rs[0].n,
                method: rs[0].method,
                tau: rs[0].tau,
                trials: rs.len(),
                mse_mean,
                mse_se,
                delta_n2_mean: mean(|r| r.delta_n2),
                coverage_mean: mean(|r| r.coverage),
                crossings_total: rs.iter().map(|r| r.crossings).sum(),
            }
        })
        .collect()
}
