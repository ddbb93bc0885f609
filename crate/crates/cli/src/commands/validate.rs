use std::path::Path;
use std::time::Instant;

use atfcm_core::montecarlo::{compare, simulate, Quantity, ValidationRow};
use atfcm_core::trajectory::IntentVector;
use atfcm_core::{Evaluator, McConfig, Result};
use serde::Serialize;

use crate::output::{num, write_json, Table};

#[derive(Debug, Clone, Serialize)]
pub struct QuantityCount {
    pub quantity: Quantity,
    pub rows: usize,
    pub failures: usize,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateSummary {
    pub scenario: String,
    pub version_hash: String,
    pub samples: usize,
    pub seed: u64,
    pub rows: usize,
    pub failures: usize,
    /// Rows outside the 4σ bound alone, without the edge tolerance.
    pub strict_failures: usize,
    /// Largest deviation as a fraction of its bound.
    pub max_bound_ratio: f64,
    pub quantities: Vec<QuantityCount>,
    pub wall_ms: f64,
}

impl ValidateSummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Closed form against `config.samples` forward samples.
pub fn run_validation(
    evaluator: &Evaluator,
    intents: &IntentVector,
    config: &McConfig,
) -> Result<(Vec<ValidationRow>, ValidateSummary)> {
    let start = Instant::now();
    let field = evaluator.field(&evaluator.marginals(intents)?)?;
    let mc = simulate(evaluator, intents, config)?;
    let rows = compare(&field, &mc)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let quantities = [Quantity::Presence, Quantity::OccupancyMean, Quantity::Congestion]
        .into_iter()
        .map(|q| {
            let of: Vec<&ValidationRow> = rows.iter().filter(|r| r.quantity == q).collect();
            QuantityCount {
                quantity: q,
                rows: of.len(),
                failures: of.iter().filter(|r| !r.pass).count(),
                max_deviation: of.iter().map(|r| r.deviation()).fold(0.0, f64::max),
            }
        })
        .collect();
    let summary = ValidateSummary {
        scenario: evaluator.scenario().name.clone(),
        version_hash: crate::version_hash(evaluator.scenario()),
        samples: config.samples,
        seed: config.seed,
        rows: rows.len(),
        failures: rows.iter().filter(|r| !r.pass).count(),
        strict_failures: rows.iter().filter(|r| !r.pass_strict()).count(),
        max_bound_ratio: rows.iter().map(|r| r.deviation() / r.bound()).fold(0.0, f64::max),
        quantities,
        wall_ms,
    };
    Ok((rows, summary))
}

fn quantity_name(q: Quantity) -> &'static str {
    match q {
        Quantity::Presence => "presence",
        Quantity::OccupancyMean => "occupancy_mean",
        Quantity::Congestion => "congestion",
    }
}

pub fn write_rows(path: &Path, evaluator: &Evaluator, rows: &[ValidationRow]) -> Result<()> {
    let grid = evaluator.grid();
    let mut t = Table::create(
        path,
        &[
            "quantity",
            "sector",
            "flight",
            "bin",
            "time_min",
            "closed_form",
            "monte_carlo",
            "sigma_bound",
            "edge_tolerance",
            "bound",
            "pass",
        ],
    )?;
    for r in rows {
        t.row([
            quantity_name(r.quantity).to_string(),
            r.sector.clone(),
            r.flight.clone(),
            r.bin.to_string(),
            num(grid.bin_start(r.bin)),
            num(r.closed_form),
            num(r.monte_carlo),
            num(r.sigma_bound),
            num(r.edge_tolerance),
            num(r.bound()),
            r.pass.to_string(),
        ])?;
    }
    t.finish()
}

/// Writes `validation.csv` and `validation.json` into `out`.
pub fn validate(evaluator: &Evaluator, intents: &IntentVector, config: &McConfig, out: &Path) -> Result<ValidateSummary> {
    crate::output::create_dir(out)?;
    let (rows, summary) = run_validation(evaluator, intents, config)?;
    write_rows(&out.join("validation.csv"), evaluator, &rows)?;
    write_json(&out.join("validation.json"), &summary)?;
    Ok(summary)
}
