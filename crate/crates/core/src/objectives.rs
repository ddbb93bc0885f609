//! Genome decoding and the two expected costs.
//!
//! `C1` is the expected super-linear delay at the last waypoint,
//! `Σ_f E[(T_n − A_f)_+^β]`. `C2` integrates the expected excess occupancy
//! `Σ_{n > C} (n − C)^λ · Pr(K = n)` over sectors and time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::occupancy::{
    gather_presences, occupancy_field, FlightMarginals, OccupancyField, PmfConfig, PmfMethod, PresenceCurve,
};
use crate::prob::{DiscretePdf, TimeGrid};
use crate::scenario::Scenario;
use crate::trajectory::{feasible_bounds, propagate_marginals, FeasibleBounds, IntentVector, SectorCrossing};

/// Genes in `[0, 1]`: per flight, the departure gene then one per segment.
pub type Genome = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub c1: f64,
    pub c2: f64,
}

impl ObjectivePoint {
    pub fn new(c1: f64, c2: f64) -> Self {
        Self { c1, c2 }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.c1, self.c2]
    }
}

/// Pareto dominance for minimization.
pub fn dominates(a: &ObjectivePoint, b: &ObjectivePoint) -> bool {
    a.c1 <= b.c1 && a.c2 <= b.c2 && (a.c1 < b.c1 || a.c2 < b.c2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// Exponent on positive arrival delay.
    pub delay_exponent: f64,
    /// Exponent `λ` on occupancy excess.
    pub risk_aversion: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self { delay_exponent: 2.0, risk_aversion: 2.0 }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delay_exponent > 1.0 && self.risk_aversion >= 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("delay_exponent must be > 1 and risk_aversion ≥ 1, got {self:?}")))
        }
    }
}

/// Precomputed scenario view shared by every evaluation.
#[derive(Debug, Clone)]
pub struct Evaluator {
    scenario: Scenario,
    grid: TimeGrid,
    bounds: Vec<FeasibleBounds>,
    crossings: Vec<Vec<(usize, SectorCrossing)>>,
    capacities: Vec<Vec<u32>>,
    pmf: PmfConfig,
}

impl Evaluator {
    pub fn new(scenario: &Scenario, pmf: PmfConfig) -> Result<Self> {
        scenario.validate()?;
        let grid = scenario.time_grid()?;
        let bounds = scenario.flights.iter().map(|f| feasible_bounds(f, &scenario.envelope)).collect();
        let mut crossings = Vec::with_capacity(scenario.flights.len());
        for f in &scenario.flights {
            let cs = f
                .sector_crossings()?
                .into_iter()
                .map(|c| Ok((scenario.sector_index(&c.sector)?, c)))
                .collect::<Result<Vec<_>>>()?;
            crossings.push(cs);
        }
        Ok(Self {
            scenario: scenario.clone(),
            grid,
            bounds,
            crossings,
            capacities: scenario.capacity_profiles(),
            pmf,
        })
    }

    pub fn with_method(scenario: &Scenario, method: PmfMethod) -> Result<Self> {
        Self::new(scenario, PmfConfig::with_method(method))
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn bounds(&self) -> &[FeasibleBounds] {
        &self.bounds
    }

    pub fn capacities(&self) -> &[Vec<u32>] {
        &self.capacities
    }

    pub fn pmf_config(&self) -> &PmfConfig {
        &self.pmf
    }

    pub fn dimension(&self) -> usize {
        self.scenario.dimension()
    }

    /// Maps genes affinely onto the feasible box.
    pub fn decode(&self, genome: &[f64]) -> Result<IntentVector> {
        if genome.len() != self.dimension() {
            return Err(Error::GenomeLength { got: genome.len(), expected: self.dimension() });
        }
        if let Some((i, g)) = genome.iter().enumerate().find(|(_, g)| !(0.0..=1.0).contains(*g)) {
            return Err(Error::Config(format!("gene {i} = {g} outside [0, 1]")));
        }
        let lerp = |(lo, hi): (f64, f64), g: f64| lo + g * (hi - lo);
        let mut genes = genome.iter().copied();
        let mut flights = Vec::with_capacity(self.bounds.len());
        for b in &self.bounds {
            let mut t = lerp(b.departure, genes.next().expect("length checked"));
            let mut targets = Vec::with_capacity(b.segments.len() + 1);
            targets.push(t);
            for &seg in &b.segments {
                t += lerp(seg, genes.next().expect("length checked"));
                targets.push(t);
            }
            flights.push(targets);
        }
        Ok(IntentVector { flights })
    }

    /// Inverse of [`Self::decode`]; degenerate intervals map to gene 0.
    pub fn encode(&self, intents: &IntentVector) -> Result<Genome> {
        self.check_shape(intents)?;
        let unlerp = |(lo, hi): (f64, f64), v: f64| if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
        let mut genome = Vec::with_capacity(self.dimension());
        for (b, t) in self.bounds.iter().zip(&intents.flights) {
            genome.push(unlerp(b.departure, t[0]));
            for (i, &seg) in b.segments.iter().enumerate() {
                genome.push(unlerp(seg, t[i + 1] - t[i]));
            }
        }
        Ok(genome)
    }

    /// Targets at the scheduled overfly times.
    pub fn nominal_intents(&self) -> IntentVector {
        IntentVector { flights: self.scenario.flights.iter().map(|f| f.nominal_targets()).collect() }
    }

    fn check_shape(&self, intents: &IntentVector) -> Result<()> {
        if intents.flights.len() != self.scenario.flights.len() {
            return Err(Error::Config(format!(
                "intent file has {} flights, scenario has {}",
                intents.flights.len(),
                self.scenario.flights.len()
            )));
        }
        Ok(())
    }

    /// Marginals of every flight at every waypoint.
    pub fn marginals(&self, intents: &IntentVector) -> Result<Vec<Vec<DiscretePdf>>> {
        self.check_shape(intents)?;
        self.scenario
            .flights
            .iter()
            .zip(&intents.flights)
            .map(|(f, t)| propagate_marginals(f, t, &self.scenario.envelope, &self.grid))
            .collect()
    }

    pub fn c1(&self, marginals: &[Vec<DiscretePdf>]) -> f64 {
        let beta = self.scenario.costs.delay_exponent;
        self.scenario
            .flights
            .iter()
            .zip(marginals)
            .map(|(f, m)| {
                let a = f.scheduled_arrival_min;
                m.last().expect("at least two waypoints").expectation_of(|tau| (tau - a).max(0.0).powf(beta))
            })
            .sum()
    }

    fn curves(&self, marginals: &[Vec<DiscretePdf>]) -> Result<Vec<Vec<PresenceCurve>>> {
        let mut per_sector = vec![Vec::new(); self.scenario.sectors.len()];
        for ((f, m), cs) in self.scenario.flights.iter().zip(marginals).zip(&self.crossings) {
            for (s, c) in cs {
                per_sector[*s].push(crate::occupancy::presence_curve(&f.id, &c.sector, &m[c.entry], &m[c.exit])?);
            }
        }
        Ok(per_sector)
    }

    /// Congestion cost. PMFs are only built where more flights than the
    /// capacity can be present.
    pub fn c2(&self, marginals: &[Vec<DiscretePdf>]) -> Result<f64> {
        let lambda = self.scenario.costs.risk_aversion;
        let curves = self.curves(marginals)?;
        let mut buf = Vec::new();
        let mut total = 0.0;
        for (s, sector_curves) in curves.iter().enumerate() {
            let refs: Vec<&PresenceCurve> = sector_curves.iter().collect();
            for bin in 0..self.grid.horizon {
                let cap = self.capacities[s][bin];
                gather_presences(&refs, bin, &mut buf);
                if buf.len() <= cap as usize {
                    continue;
                }
                total += self.pmf.pmf(&buf)?.excess_cost(cap, lambda);
            }
        }
        Ok(total * self.grid.step_f64())
    }

    pub fn evaluate_intents(&self, intents: &IntentVector) -> Result<ObjectivePoint> {
        let m = self.marginals(intents)?;
        Ok(ObjectivePoint { c1: self.c1(&m), c2: self.c2(&m)? })
    }

    pub fn evaluate(&self, genome: &[f64]) -> Result<ObjectivePoint> {
        self.evaluate_intents(&self.decode(genome)?)
    }

    pub fn flight_marginals(&self, marginals: Vec<Vec<DiscretePdf>>) -> Vec<FlightMarginals> {
        self.scenario
            .flights
            .iter()
            .zip(marginals)
            .zip(&self.crossings)
            .map(|((f, m), cs)| FlightMarginals {
                flight: f.id.clone(),
                marginals: m,
                crossings: cs.iter().map(|(_, c)| c.clone()).collect(),
            })
            .collect()
    }

    /// Full occupancy field (every sector-bin PMF).
    pub fn field(&self, marginals: &[Vec<DiscretePdf>]) -> Result<OccupancyField> {
        let flights = self.flight_marginals(marginals.to_vec());
        occupancy_field(&flights, &self.scenario.sectors, &self.capacities, &self.grid, &self.pmf)
    }

    /// `C2` recomputed from a full field, in the same summation order as
    /// [`Self::c2`].
    pub fn c2_from_field(&self, field: &OccupancyField) -> f64 {
        let lambda = self.scenario.costs.risk_aversion;
        let mut total = 0.0;
        for s in &field.sectors {
            for (pmf, &cap) in s.pmfs.iter().zip(&s.capacity) {
                if pmf.n_max() > cap as usize {
                    total += pmf.excess_cost(cap, lambda);
                }
            }
        }
        total * self.grid.step_f64()
    }
}

pub fn decode(genome: &[f64], scenario: &Scenario) -> Result<IntentVector> {
    Evaluator::new(scenario, PmfConfig::default())?.decode(genome)
}

pub fn eval_c1(intents: &IntentVector, scenario: &Scenario) -> Result<f64> {
    let ev = Evaluator::new(scenario, PmfConfig::default())?;
    Ok(ev.c1(&ev.marginals(intents)?))
}

pub fn eval_c2(intents: &IntentVector, scenario: &Scenario, method: PmfMethod) -> Result<f64> {
    let ev = Evaluator::with_method(scenario, method)?;
    ev.c2(&ev.marginals(intents)?)
}
