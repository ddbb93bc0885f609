//! Forward-sampling estimate of presence, occupancy and congestion.
//!
//! Each sample draws every flight's overfly bins from the same conditional
//! laws used by inference. A flight counts as inside a sector at bin `b`
//! when `bin(entry) ≤ b < bin(exit)`, which is the discrete form of "the
//! presence interval covers the bin's representative instant".

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::Evaluator;
use crate::occupancy::OccupancyField;
use crate::trajectory::{departure_pdf, ChainSampler, IntentVector};

/// Samples drawn from one RNG substream.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { samples: 100_000, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct McPresence {
    pub flight: String,
    pub sector: String,
    /// In-sector frequency per bin.
    pub frequency: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct McSector {
    pub sector: String,
    /// `histogram[bin][n]`: samples with `n` flights inside.
    pub histogram: Vec<Vec<u64>>,
    pub mean: Vec<f64>,
    /// Fraction of samples where the count exceeds capacity.
    pub congestion: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct McResult {
    pub samples: usize,
    pub sectors: Vec<McSector>,
    pub presence: Vec<McPresence>,
}

/// Forward-samples the scenario `config.samples` times.
///
/// Chunk `c` of [`CHUNK`] samples uses ChaCha8 seeded with `config.seed` on
/// stream `c`, so results do not depend on how chunks are scheduled.
pub fn simulate(evaluator: &Evaluator, intents: &IntentVector, config: &McConfig) -> Result<McResult> {
    if config.samples == 0 {
        return Err(Error::Config("samples must be positive".into()));
    }
    let scenario = evaluator.scenario();
    let grid = *evaluator.grid();
    let env = scenario.envelope;
    // Validates intents up front.
    evaluator.marginals(intents)?;
    let mut samplers = Vec::with_capacity(scenario.flights.len());
    for ((f, targets), bounds) in scenario.flights.iter().zip(&intents.flights).zip(evaluator.bounds()) {
        let p1 = departure_pdf(bounds.departure, targets[0], &env, &grid)?;
        samplers.push(ChainSampler { p1, bounds: bounds.clone(), targets, env: &env, grid: &grid });
        debug_assert_eq!(f.n_waypoints(), targets.len());
    }
    let mut crossings = Vec::new();
    for f in &scenario.flights {
        let cs = f.sector_crossings()?;
        crossings.push(
            cs.into_iter()
                .map(|c| Ok((scenario.sector_index(&c.sector)?, c)))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let n_sectors = scenario.sectors.len();
    let h = grid.horizon;
    let n_flights_in: Vec<usize> = (0..n_sectors)
        .map(|s| crossings.iter().flatten().filter(|(i, _)| *i == s).count())
        .collect();
    let mut histogram: Vec<Vec<Vec<u64>>> = n_flights_in.iter().map(|&n| vec![vec![0u64; n + 1]; h]).collect();
    let presence_slots: Vec<(usize, usize)> = crossings
        .iter()
        .enumerate()
        .flat_map(|(f, cs)| (0..cs.len()).map(move |c| (f, c)))
        .collect();
    let mut presence_counts = vec![vec![0u64; h]; presence_slots.len()];

    let mut count = vec![vec![0usize; h]; n_sectors];
    let mut buf = Vec::new();
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); samplers.len()];
    let chunks = config.samples.div_ceil(CHUNK);
    for chunk in 0..chunks {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(chunk as u64);
        let n = CHUNK.min(config.samples - chunk * CHUNK);
        for _ in 0..n {
            for (sampler, out) in samplers.iter().zip(bins.iter_mut()) {
                sampler.draw(&mut rng, &mut buf, out)?;
            }
            count.iter_mut().for_each(|c| c.fill(0));
            let mut slot = 0;
            for (f, cs) in crossings.iter().enumerate() {
                for (s, c) in cs {
                    let (a, b) = (bins[f][c.entry], bins[f][c.exit]);
                    for t in a..b {
                        count[*s][t] += 1;
                        presence_counts[slot][t] += 1;
                    }
                    slot += 1;
                }
            }
            for (s, per_bin) in count.iter().enumerate() {
                for (t, &k) in per_bin.iter().enumerate() {
                    histogram[s][t][k] += 1;
                }
            }
        }
    }

    let total = config.samples as f64;
    let capacities = evaluator.capacities();
    let sectors = histogram
        .into_iter()
        .enumerate()
        .map(|(s, hist)| {
            let mean = hist
                .iter()
                .map(|row| row.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum::<f64>() / total)
                .collect();
            let congestion = hist
                .iter()
                .zip(&capacities[s])
                .map(|(row, &cap)| row.iter().skip(cap as usize + 1).sum::<u64>() as f64 / total)
                .collect();
            McSector { sector: scenario.sectors[s].id.clone(), histogram: hist, mean, congestion }
        })
        .collect();
    let presence = presence_slots
        .iter()
        .zip(presence_counts)
        .map(|(&(f, c), counts)| McPresence {
            flight: scenario.flights[f].id.clone(),
            sector: crossings[f][c].1.sector.clone(),
            frequency: counts.into_iter().map(|k| k as f64 / total).collect(),
        })
        .collect();
    Ok(McResult { samples: config.samples, sectors, presence })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Presence,
    OccupancyMean,
    Congestion,
}

/// One closed-form vs Monte-Carlo comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub quantity: Quantity,
    pub sector: String,
    /// Empty for sector-level quantities.
    pub flight: String,
    pub bin: usize,
    pub closed_form: f64,
    pub monte_carlo: f64,
    /// `4σ` binomial bound.
    pub sigma_bound: f64,
    /// One-bin edge tolerance: the largest change of the closed form to a
    /// neighbouring bin.
    pub edge_tolerance: f64,
    pub pass: bool,
}

impl ValidationRow {
    pub fn bound(&self) -> f64 {
        self.sigma_bound + self.edge_tolerance
    }

    pub fn deviation(&self) -> f64 {
        (self.closed_form - self.monte_carlo).abs()
    }

    /// Whether the deviation is within `4σ` alone.
    pub fn pass_strict(&self) -> bool {
        self.deviation() <= self.sigma_bound
    }
}

/// `4·sqrt(v/K)` with the variance floored at `1/K` so that bins with tiny
/// probabilities tolerate a single hit.
pub fn sigma_bound(variance: f64, samples: usize) -> f64 {
    let k = samples as f64;
    4.0 * (variance.max(1.0 / k) / k).sqrt()
}

fn edge(values: &[f64], bin: usize) -> f64 {
    let v = values[bin];
    let prev = if bin > 0 { (values[bin - 1] - v).abs() } else { 0.0 };
    let next = values.get(bin + 1).map_or(0.0, |n| (n - v).abs());
    prev.max(next)
}

/// One closed-form curve compared bin by bin.
struct Series<'a> {
    quantity: Quantity,
    sector: &'a str,
    flight: &'a str,
    closed_form: &'a [f64],
    samples: usize,
}

impl Series<'_> {
    fn row(&self, bin: usize, mc: f64, var: f64) -> ValidationRow {
        let cf = self.closed_form;
        let sigma = sigma_bound(var, self.samples);
        let edge_tolerance = edge(cf, bin);
        let deviation = (cf[bin] - mc).abs();
        ValidationRow {
            quantity: self.quantity,
            sector: self.sector.to_string(),
            flight: self.flight.to_string(),
            bin,
            closed_form: cf[bin],
            monte_carlo: mc,
            sigma_bound: sigma,
            edge_tolerance,
            pass: deviation <= sigma + edge_tolerance,
        }
    }
}

/// Compares every presence curve, occupancy mean and congestion
/// probability of `field` with the sampled frequencies.
pub fn compare(field: &OccupancyField, mc: &McResult) -> Result<Vec<ValidationRow>> {
    let k = mc.samples;
    let h = field.grid.horizon;
    let mut rows = Vec::new();
    let mut used = vec![false; mc.presence.len()];
    for s in &field.sectors {
        for curve in &s.presence {
            let idx = mc
                .presence
                .iter()
                .enumerate()
                .position(|(i, p)| !used[i] && p.flight == curve.flight && p.sector == curve.sector)
                .ok_or_else(|| Error::ModelInconsistency(format!("no samples for {} in {}", curve.flight, curve.sector)))?;
            used[idx] = true;
            let cf: Vec<f64> = (0..h).map(|b| curve.at(b)).collect();
            let series =
                Series { quantity: Quantity::Presence, sector: &s.sector, flight: &curve.flight, closed_form: &cf, samples: k };
            for (b, &q) in mc.presence[idx].frequency.iter().enumerate() {
                rows.push(series.row(b, q, cf[b] * (1.0 - cf[b])));
            }
        }
        let sampled = mc
            .sectors
            .iter()
            .find(|m| m.sector == s.sector)
            .ok_or_else(|| Error::UnknownId { kind: "sector", id: s.sector.clone() })?;
        let var_k: Vec<f64> = (0..h)
            .map(|b| s.presence.iter().map(|c| c.at(b) * (1.0 - c.at(b))).sum())
            .collect();
        let series =
            Series { quantity: Quantity::OccupancyMean, sector: &s.sector, flight: "", closed_form: &s.expected, samples: k };
        for (b, (&mean, &var)) in sampled.mean.iter().zip(&var_k).enumerate() {
            rows.push(series.row(b, mean, var));
        }
        let congestion = s.congestion_probability();
        let series =
            Series { quantity: Quantity::Congestion, sector: &s.sector, flight: "", closed_form: &congestion, samples: k };
        for (b, (&p, &freq)) in congestion.iter().zip(&sampled.congestion).enumerate() {
            rows.push(series.row(b, freq, p * (1.0 - p)));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::generate_x_instance;
    use crate::occupancy::PmfConfig;
    use crate::scenario::Scenario;

    /// X-instance shrunk to a deterministic world: no speed margin, no
    /// probable interval spread, single-instant departure windows.
    fn deterministic() -> Scenario {
        let mut s = generate_x_instance();
        s.envelope.alpha = 1.0;
        s.envelope.speedup_factor = 1.0;
        s.envelope.delta = 1.0;
        s.envelope.min_first_support_min = 0.0;
        for f in &mut s.flights {
            f.first_point_window_min = [f.scheduled_departure_min; 2];
        }
        s
    }

    #[test]
    fn deterministic_world_gives_exact_frequencies() {
        let s = deterministic();
        let ev = Evaluator::new(&s, PmfConfig::default()).unwrap();
        let intents = ev.nominal_intents();
        let field = ev.field(&ev.marginals(&intents).unwrap()).unwrap();
        let mc = simulate(&ev, &intents, &McConfig { samples: 50, seed: 1 }).unwrap();
        for row in compare(&field, &mc).unwrap() {
            assert!(row.monte_carlo == 0.0 || row.monte_carlo == 1.0 || row.quantity == Quantity::OccupancyMean);
            assert_eq!(row.closed_form, row.monte_carlo, "{row:?}");
        }
    }

    #[test]
    fn same_seed_same_histograms() {
        let s = generate_x_instance();
        let ev = Evaluator::new(&s, PmfConfig::default()).unwrap();
        let intents = ev.nominal_intents();
        let a = simulate(&ev, &intents, &McConfig { samples: 300, seed: 7 }).unwrap();
        let b = simulate(&ev, &intents, &McConfig { samples: 300, seed: 7 }).unwrap();
        assert_eq!(a.sectors[2].histogram, b.sectors[2].histogram);
    }
}
