//! Scenario model and its versioned JSON file format.
//!
//! Field names carry their unit (`_min`, `_nm`, `_kt`). Times are integer
//! minutes except nominal overfly times, which may be fractional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::CostConfig;
use crate::occupancy::Sector;
use crate::prob::TimeGrid;
use crate::trajectory::{feasible_bounds, FlightPlan, IntentVector, SpeedEnvelope};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub origin_min: i64,
    pub step_min: i64,
    pub horizon_bins: usize,
}

impl GridConfig {
    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.origin_min, self.step_min, self.horizon_bins)
    }
}

/// Capacity override of one sector over `[from_min, to_min)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disruption {
    pub sector: String,
    pub from_min: i64,
    pub to_min: i64,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub grid: GridConfig,
    pub sectors: Vec<Sector>,
    pub flights: Vec<FlightPlan>,
    pub envelope: SpeedEnvelope,
    pub costs: CostConfig,
    pub disruptions: Vec<Disruption>,
}

// File mirror with signed capacities so that negative values can be
// reported against the sector that carries them.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    version: u32,
    name: String,
    grid: GridConfig,
    sectors: Vec<RawSector>,
    flights: Vec<FlightPlan>,
    #[serde(default)]
    envelope: SpeedEnvelope,
    #[serde(default)]
    costs: CostConfig,
    #[serde(default)]
    disruptions: Vec<RawDisruption>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSector {
    id: String,
    capacity: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisruption {
    sector: String,
    from_min: i64,
    to_min: i64,
    capacity: i64,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

fn capacity(value: i64, what: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::Schema(format!("{what}: capacity {value} must be a non-negative integer")))
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if probe.version != SCENARIO_VERSION {
            return Err(Error::UnknownVersion { found: probe.version, supported: SCENARIO_VERSION });
        }
        let raw: RawScenario = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let sectors = raw
            .sectors
            .into_iter()
            .map(|s| {
                let capacity = capacity(s.capacity, &format!("sector '{}'", s.id))?;
                Ok(Sector { id: s.id, capacity })
            })
            .collect::<Result<Vec<_>>>()?;
        let disruptions = raw
            .disruptions
            .into_iter()
            .map(|d| {
                let capacity = capacity(d.capacity, &format!("disruption on sector '{}'", d.sector))?;
                Ok(Disruption { sector: d.sector, from_min: d.from_min, to_min: d.to_min, capacity })
            })
            .collect::<Result<Vec<_>>>()?;
        let scenario = Scenario {
            version: raw.version,
            name: raw.name,
            grid: raw.grid,
            sectors,
            flights: raw.flights,
            envelope: raw.envelope,
            costs: raw.costs,
            disruptions,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Canonical serialization: pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        self.grid.time_grid()
    }

    pub fn sector_index(&self, id: &str) -> Result<usize> {
        self.sectors
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| Error::UnknownId { kind: "sector", id: id.to_string() })
    }

    pub fn flight_index(&self, id: &str) -> Result<usize> {
        self.flights
            .iter()
            .position(|f| f.id == id)
            .ok_or_else(|| Error::UnknownId { kind: "flight", id: id.to_string() })
    }

    /// Genome length: one departure gene plus one gene per segment.
    pub fn dimension(&self) -> usize {
        self.flights.iter().map(|f| f.segments.len() + 1).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::UnknownVersion { found: self.version, supported: SCENARIO_VERSION });
        }
        let grid = self.time_grid().map_err(|e| Error::Schema(format!("grid: {e}")))?;
        self.envelope.validate()?;
        self.costs.validate()?;
        for (i, s) in self.sectors.iter().enumerate() {
            if self.sectors[..i].iter().any(|o| o.id == s.id) {
                return Err(Error::Schema(format!("duplicate sector '{}'", s.id)));
            }
        }
        for (i, f) in self.flights.iter().enumerate() {
            if self.flights[..i].iter().any(|o| o.id == f.id) {
                return Err(Error::Schema(format!("duplicate flight '{}'", f.id)));
            }
            f.validate()?;
            for c in f.sector_crossings()? {
                if self.sector_index(&c.sector).is_err() {
                    return Err(Error::Schema(format!("flight '{}' crosses unknown sector '{}'", f.id, c.sector)));
                }
            }
            self.check_horizon(f, &grid)?;
        }
        for d in &self.disruptions {
            self.check_disruption(d, &grid)?;
        }
        Ok(())
    }

    /// Every reachable overfly time must fall inside the grid.
    fn check_horizon(&self, f: &FlightPlan, grid: &TimeGrid) -> Result<()> {
        let bounds = feasible_bounds(f, &self.envelope);
        let (lo, hi) = bounds.departure;
        let pad = (self.envelope.min_first_support_min - (hi - lo)).max(0.0) / 2.0;
        let earliest = lo - pad;
        let mut latest = hi + pad;
        for &(_, seg_hi) in &bounds.segments {
            latest += seg_hi + grid.step_f64();
        }
        if earliest < grid.start() || latest >= grid.end() {
            return Err(Error::Schema(format!(
                "flight '{}' may fly over [{earliest:.1}, {latest:.1}] min, outside the grid [{}, {}) min",
                f.id,
                grid.start(),
                grid.end()
            )));
        }
        Ok(())
    }

    fn check_disruption(&self, d: &Disruption, grid: &TimeGrid) -> Result<()> {
        self.sector_index(&d.sector)?;
        let aligned = grid.is_aligned(d.from_min) && grid.is_aligned(d.to_min);
        let inside = d.from_min >= grid.origin && d.to_min as f64 <= grid.end();
        if !aligned || !inside || d.to_min <= d.from_min {
            return Err(Error::Config(format!(
                "disruption window [{}, {}) min on '{}' must be non-empty, inside the grid and aligned to {} min bins",
                d.from_min, d.to_min, d.sector, grid.step
            )));
        }
        Ok(())
    }

    /// Per-bin capacity of a sector, later disruptions overriding earlier ones.
    pub fn capacity_profile(&self, sector: usize) -> Vec<u32> {
        let grid = self.time_grid().expect("validated grid");
        let s = &self.sectors[sector];
        let mut cap = vec![s.capacity; grid.horizon];
        for d in self.disruptions.iter().filter(|d| d.sector == s.id) {
            let from = ((d.from_min - grid.origin) / grid.step) as usize;
            let to = ((d.to_min - grid.origin) / grid.step) as usize;
            cap[from..to.min(grid.horizon)].fill(d.capacity);
        }
        cap
    }

    pub fn capacity_profiles(&self) -> Vec<Vec<u32>> {
        (0..self.sectors.len()).map(|s| self.capacity_profile(s)).collect()
    }
}

/// Returns a copy of `scenario` where `sector` has capacity `new_capacity`
/// over `[from_min, to_min)`.
pub fn apply_disruption(
    scenario: &Scenario,
    sector: &str,
    from_min: i64,
    to_min: i64,
    new_capacity: u32,
) -> Result<Scenario> {
    let d = Disruption { sector: sector.to_string(), from_min, to_min, capacity: new_capacity };
    scenario.check_disruption(&d, &scenario.time_grid()?)?;
    let mut out = scenario.clone();
    out.disruptions.push(d);
    Ok(out)
}

pub const INTENTS_VERSION: u32 = 1;

/// Target times of one flight, first point first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightIntent {
    pub flight: String,
    pub targets_min: Vec<f64>,
}

/// On-disk intent vector, keyed by flight id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentFile {
    pub version: u32,
    pub flights: Vec<FlightIntent>,
}

impl IntentFile {
    pub fn from_vector(scenario: &Scenario, intents: &IntentVector) -> Self {
        let flights = scenario
            .flights
            .iter()
            .zip(&intents.flights)
            .map(|(f, t)| FlightIntent { flight: f.id.clone(), targets_min: t.clone() })
            .collect();
        Self { version: INTENTS_VERSION, flights }
    }

    /// Orders targets as the scenario's flights; every flight must appear once.
    pub fn to_vector(&self, scenario: &Scenario) -> Result<IntentVector> {
        if self.version != INTENTS_VERSION {
            return Err(Error::UnknownVersion { found: self.version, supported: INTENTS_VERSION });
        }
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; scenario.flights.len()];
        for fi in &self.flights {
            let i = scenario.flight_index(&fi.flight)?;
            if slots[i].replace(fi.targets_min.clone()).is_some() {
                return Err(Error::Schema(format!("flight '{}' listed twice", fi.flight)));
            }
        }
        let flights = slots
            .into_iter()
            .zip(&scenario.flights)
            .map(|(t, f)| t.ok_or_else(|| Error::Schema(format!("no targets for flight '{}'", f.id))))
            .collect::<Result<Vec<_>>>()?;
        Ok(IntentVector { flights })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("intents serialize");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
