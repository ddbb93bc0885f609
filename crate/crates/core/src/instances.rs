//! Deterministic benchmark scenarios.

use crate::objectives::CostConfig;
use crate::occupancy::Sector;
use crate::scenario::{GridConfig, Scenario, SCENARIO_VERSION};
use crate::trajectory::{FlightPlan, Segment, SpeedEnvelope, Waypoint};

/// Cruise speed of every generated flight, knots.
pub const CRUISE_KT: f64 = 460.0;
/// Nominal time to cross one sector, minutes.
pub const SECTOR_CROSSING_MIN: f64 = 30.0;
const WINDOW_BEFORE_MIN: i64 = 10;
const WINDOW_AFTER_MIN: i64 = 20;

fn nm_for(minutes: f64) -> f64 {
    CRUISE_KT * minutes / 60.0
}

struct Leg<'a> {
    position: String,
    minutes: f64,
    exits: Option<&'a str>,
    enters: Option<&'a str>,
}

/// Builds a flight from its first waypoint and the legs that follow;
/// `legs[0].minutes` is ignored.
fn flight(id: String, departure: i64, legs: Vec<Leg>) -> FlightPlan {
    let mut t = departure as f64;
    let mut waypoints = Vec::with_capacity(legs.len());
    let mut segments = Vec::with_capacity(legs.len() - 1);
    for (i, leg) in legs.into_iter().enumerate() {
        if i > 0 {
            t += leg.minutes;
            segments.push(Segment { distance_nm: nm_for(leg.minutes), speed_kt: CRUISE_KT });
        }
        waypoints.push(Waypoint {
            id: format!("{id}-{i}"),
            position: leg.position,
            eto_min: t,
            exits: leg.exits.map(Into::into),
            enters: leg.enters.map(Into::into),
        });
    }
    FlightPlan {
        scheduled_departure_min: departure,
        scheduled_arrival_min: t,
        first_point_window_min: [departure - WINDOW_BEFORE_MIN, departure + WINDOW_AFTER_MIN],
        id,
        waypoints,
        segments,
    }
}

/// Five sectors laid out as an X around a central sector `C`, ten flights.
///
/// Every flight crosses an arm, `C`, then the opposite arm, at 460 kt with
/// 30 min per sector. Arms are split in two 15 min legs so each flight has
/// six waypoints (outer boundary, arm midpoint, arm/C boundary, C/arm
/// boundary, arm midpoint, outer boundary), hence six genes per flight and a
/// 60-dimensional genome.
///
/// Flights leave every 2 min from t = 10 min, cycling through the four
/// directions so that each arm sees two or three flights entering early in
/// their trajectories and the same number, with the same spacing, leaving
/// late.
pub fn generate_x_instance() -> Scenario {
    let sectors = [("NW", 2), ("NE", 1), ("C", 3), ("SW", 1), ("SE", 2)]
        .map(|(id, capacity)| Sector { id: id.into(), capacity })
        .to_vec();
    let routes = [("NW", "SE"), ("SE", "NW"), ("NE", "SW"), ("SW", "NE")];
    let half = SECTOR_CROSSING_MIN / 2.0;
    let flights = (0..10)
        .map(|k| {
            let (from, to) = routes[k % 4];
            let legs = vec![
                Leg { position: format!("{from}/outer"), minutes: 0.0, exits: None, enters: Some(from) },
                Leg { position: format!("{from}/mid"), minutes: half, exits: None, enters: None },
                Leg { position: format!("{from}|C"), minutes: half, exits: Some(from), enters: Some("C") },
                Leg { position: format!("C|{to}"), minutes: SECTOR_CROSSING_MIN, exits: Some("C"), enters: Some(to) },
                Leg { position: format!("{to}/mid"), minutes: half, exits: None, enters: None },
                Leg { position: format!("{to}/outer"), minutes: half, exits: Some(to), enters: None },
            ];
            flight(format!("X{:02}", k + 1), 10 + 2 * k as i64, legs)
        })
        .collect();
    Scenario {
        version: SCENARIO_VERSION,
        name: "x-instance".into(),
        grid: GridConfig { origin_min: 0, step_min: 1, horizon_bins: 180 },
        sectors,
        flights,
        envelope: SpeedEnvelope::default(),
        costs: CostConfig::default(),
        disruptions: vec![],
    }
}

pub const GRID_SIZE: usize = 4;
pub const GRID_FLIGHTS_PER_FLOW: usize = 30;
pub const GRID_FLOW_SPACING_MIN: i64 = 6;

fn cell(r: usize, c: usize) -> String {
    format!("R{}C{}", r + 1, c + 1)
}

/// 16 sectors on a 4×4 grid (row 1 north, column 1 west) and 300 flights in
/// ten flows of 30 crossing four sectors each: four southbound flows (one
/// per column), four westbound flows (one per row), and the two diagonals
/// from the north-west and south-east corners.
///
/// Flights of a flow leave every 6 min; flow `j` starts at `10 + j` min.
/// Orthogonal sector crossings take 30 min, diagonal ones √2 longer.
/// Capacities are synthetic: the peak of the nominal deterministic
/// occupancy of each sector plus one.
pub fn generate_grid_instance() -> Scenario {
    let mut flows: Vec<(String, Vec<String>, f64)> = Vec::new();
    for c in 0..GRID_SIZE {
        flows.push((format!("S{}", c + 1), (0..GRID_SIZE).map(|r| cell(r, c)).collect(), 1.0));
    }
    for r in 0..GRID_SIZE {
        flows.push((format!("W{}", r + 1), (0..GRID_SIZE).rev().map(|c| cell(r, c)).collect(), 1.0));
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    flows.push(("DSE".into(), (0..GRID_SIZE).map(|i| cell(i, i)).collect(), sqrt2));
    flows.push(("DNW".into(), (0..GRID_SIZE).rev().map(|i| cell(i, i)).collect(), sqrt2));

    let mut flights = Vec::with_capacity(flows.len() * GRID_FLIGHTS_PER_FLOW);
    for (j, (name, path, stretch)) in flows.iter().enumerate() {
        let minutes = SECTOR_CROSSING_MIN * stretch;
        for i in 0..GRID_FLIGHTS_PER_FLOW {
            let mut legs = Vec::with_capacity(path.len() + 1);
            legs.push(Leg { position: format!("{}/in", path[0]), minutes: 0.0, exits: None, enters: Some(path[0].as_str()) });
            for w in path.windows(2) {
                legs.push(Leg {
                    position: format!("{}|{}", w[0], w[1]),
                    minutes,
                    exits: Some(w[0].as_str()),
                    enters: Some(w[1].as_str()),
                });
            }
            let last = path.last().expect("non-empty path");
            legs.push(Leg { position: format!("{last}/out"), minutes, exits: Some(last.as_str()), enters: None });
            let departure = 10 + j as i64 + GRID_FLOW_SPACING_MIN * i as i64;
            flights.push(flight(format!("{name}-{:02}", i + 1), departure, legs));
        }
    }

    let grid = GridConfig { origin_min: 0, step_min: 1, horizon_bins: 480 };
    let mut sectors: Vec<Sector> = (0..GRID_SIZE)
        .flat_map(|r| (0..GRID_SIZE).map(move |c| Sector { id: cell(r, c), capacity: 0 }))
        .collect();
    for s in &mut sectors {
        s.capacity = nominal_peak(&flights, &s.id, &grid) + 1;
    }
    Scenario {
        version: SCENARIO_VERSION,
        name: "grid-instance".into(),
        grid,
        sectors,
        flights,
        envelope: SpeedEnvelope::default(),
        costs: CostConfig::default(),
        disruptions: vec![],
    }
}

/// Peak occupancy when every flight flies exactly its nominal schedule,
/// counting a flight in bin `b` when `bin(entry) ≤ b < bin(exit)`.
pub fn nominal_peak(flights: &[FlightPlan], sector: &str, grid: &GridConfig) -> u32 {
    let bin = |t: f64| ((t - grid.origin_min as f64) / grid.step_min as f64).floor() as usize;
    let mut count = vec![0u32; grid.horizon_bins];
    for f in flights {
        for c in f.sector_crossings().expect("generated chains are consistent") {
            if c.sector == sector {
                let (a, b) = (bin(f.waypoints[c.entry].eto_min), bin(f.waypoints[c.exit].eto_min));
                count[a..b].iter_mut().for_each(|n| *n += 1);
            }
        }
    }
    count.into_iter().max().unwrap_or(0)
}
