use std::path::Path;

use atfcm_core::occupancy::{monitor_alarms, Alarm, FlightMarginals, OccupancyField, DEFAULT_ALARM_RATIO};
use atfcm_core::trajectory::IntentVector;
use atfcm_core::{Evaluator, ObjectivePoint, PmfMethod, Result, TimeGrid};
use serde::Serialize;

use crate::output::{num, write_json, Table};

/// Everything derived from one intent vector.
#[derive(Debug, Clone)]
pub struct PlanEvaluation {
    pub intents: IntentVector,
    pub flights: Vec<FlightMarginals>,
    pub field: OccupancyField,
    pub objectives: ObjectivePoint,
    pub alarms: Vec<Alarm>,
}

/// Evaluates a plan. `C2` is summed from the full field in the same order
/// as the optimizer, so both report identical values.
pub fn evaluate_plan(evaluator: &Evaluator, intents: &IntentVector) -> Result<PlanEvaluation> {
    let marginals = evaluator.marginals(intents)?;
    let c1 = evaluator.c1(&marginals);
    let field = evaluator.field(&marginals)?;
    let c2 = evaluator.c2_from_field(&field);
    let alarms = monitor_alarms(&field, DEFAULT_ALARM_RATIO);
    Ok(PlanEvaluation {
        intents: intents.clone(),
        flights: evaluator.flight_marginals(marginals),
        field,
        objectives: ObjectivePoint::new(c1, c2),
        alarms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorSummary {
    pub sector: String,
    pub min_capacity: u32,
    pub peak_expected: f64,
    pub peak_expected_min: i64,
    pub peak_congestion: f64,
    pub peak_congestion_min: i64,
}

fn argmax(values: &[f64]) -> (usize, f64) {
    values.iter().enumerate().fold((0, 0.0), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
}

pub fn sector_summaries(field: &OccupancyField) -> Vec<SectorSummary> {
    field
        .sectors
        .iter()
        .map(|s| {
            let (eb, e) = argmax(&s.expected);
            let (cb, c) = argmax(&s.congestion_probability());
            SectorSummary {
                sector: s.sector.clone(),
                min_capacity: s.capacity.iter().copied().min().unwrap_or(0),
                peak_expected: e,
                peak_expected_min: field.grid.bin_start(eb) as i64,
                peak_congestion: c,
                peak_congestion_min: field.grid.bin_start(cb) as i64,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateSummary {
    pub scenario: String,
    pub version_hash: String,
    pub method: PmfMethod,
    pub c1: f64,
    pub c2: f64,
    pub alarms: Vec<Alarm>,
    pub sectors: Vec<SectorSummary>,
}

pub fn write_marginals(path: &Path, grid: &TimeGrid, flights: &[FlightMarginals], evaluator: &Evaluator) -> Result<()> {
    let mut t = Table::create(path, &["flight", "waypoint_index", "waypoint", "bin", "time_min", "probability"])?;
    for (f, plan) in flights.iter().zip(&evaluator.scenario().flights) {
        for (i, (pdf, wp)) in f.marginals.iter().zip(&plan.waypoints).enumerate() {
            for (bin, p) in pdf.iter() {
                t.row([f.flight.clone(), i.to_string(), wp.id.clone(), bin.to_string(), num(grid.bin_start(bin)), num(p)])?;
            }
        }
    }
    t.finish()
}

pub fn write_presence(path: &Path, field: &OccupancyField) -> Result<()> {
    let mut t = Table::create(path, &["sector", "flight", "bin", "time_min", "probability"])?;
    for s in &field.sectors {
        for c in &s.presence {
            for (k, &p) in c.values.iter().enumerate() {
                let bin = c.first_bin + k;
                t.row([s.sector.clone(), c.flight.clone(), bin.to_string(), num(field.grid.bin_start(bin)), num(p)])?;
            }
        }
    }
    t.finish()
}

pub fn write_congestion(path: &Path, field: &OccupancyField) -> Result<()> {
    let mut t = Table::create(
        path,
        &["sector", "bin", "time_min", "capacity", "flights", "expected_occupancy", "congestion_probability"],
    )?;
    for s in &field.sectors {
        let congestion = s.congestion_probability();
        for (bin, congestion) in congestion.iter().enumerate() {
            t.row([
                s.sector.clone(),
                bin.to_string(),
                num(field.grid.bin_start(bin)),
                s.capacity[bin].to_string(),
                s.pmfs[bin].n_max().to_string(),
                num(s.expected[bin]),
                num(*congestion),
            ])?;
        }
    }
    t.finish()
}

/// Writes `marginals.csv`, `presence.csv`, `congestion.csv` and
/// `summary.json` into `out`.
pub fn evaluate(evaluator: &Evaluator, intents: &IntentVector, out: &Path) -> Result<EvaluateSummary> {
    crate::output::create_dir(out)?;
    let plan = evaluate_plan(evaluator, intents)?;
    write_marginals(&out.join("marginals.csv"), evaluator.grid(), &plan.flights, evaluator)?;
    write_presence(&out.join("presence.csv"), &plan.field)?;
    write_congestion(&out.join("congestion.csv"), &plan.field)?;
    let summary = EvaluateSummary {
        scenario: evaluator.scenario().name.clone(),
        version_hash: crate::version_hash(evaluator.scenario()),
        method: evaluator.pmf_config().method,
        c1: plan.objectives.c1,
        c2: plan.objectives.c2,
        sectors: sector_summaries(&plan.field),
        alarms: plan.alarms,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
