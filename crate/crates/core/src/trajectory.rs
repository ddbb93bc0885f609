//! Flight-plan uncertainty model.
//!
//! A flight is a Markov chain over its waypoint overfly times. The first
//! point follows a triangular law over the departure window; each next
//! overfly time follows a triangular law over the feasible duration interval
//! of the segment, peaked at the target time of arrival (clamped into that
//! interval) and limited to a probable interval of fixed length.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{DiscretePdf, TimeGrid, TriangularSpec};

/// Below this width an interval is treated as a single instant.
const DEGENERATE_WIDTH: f64 = 1e-9;
/// Slack when checking targets against their feasible intervals.
const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub id: String,
    /// Reporting name only.
    #[serde(default)]
    pub position: String,
    /// Nominal (scheduled) overfly time, minutes.
    pub eto_min: f64,
    /// Sector left at this point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exits: Option<String>,
    /// Sector entered at this point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enters: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub distance_nm: f64,
    pub speed_kt: f64,
}

impl Segment {
    pub fn nominal_minutes(&self) -> f64 {
        60.0 * self.distance_nm / self.speed_kt
    }
}

/// One sector traversal: entered at waypoint `entry`, left at waypoint `exit`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorCrossing {
    pub sector: String,
    pub entry: usize,
    pub exit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightPlan {
    pub id: String,
    pub scheduled_departure_min: i64,
    /// Scheduled arrival `A_f` used by the delay cost.
    pub scheduled_arrival_min: f64,
    /// Feasible interval for the first-point target.
    pub first_point_window_min: [i64; 2],
    pub waypoints: Vec<Waypoint>,
    pub segments: Vec<Segment>,
}

impl FlightPlan {
    pub fn n_waypoints(&self) -> usize {
        self.waypoints.len()
    }

    /// Structural checks: chain lengths, positive segments, strictly
    /// increasing nominal times and a consistent sector boundary chain.
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Schema(format!("flight '{}': {msg}", self.id)));
        if self.waypoints.len() < 2 {
            return err("needs at least two waypoints".into());
        }
        if self.segments.len() + 1 != self.waypoints.len() {
            return err(format!(
                "{} segments for {} waypoints",
                self.segments.len(),
                self.waypoints.len()
            ));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.distance_nm > 0.0 && s.distance_nm.is_finite()) {
                return err(format!("segment {i}: distance must be positive"));
            }
            if !(s.speed_kt > 0.0 && s.speed_kt.is_finite()) {
                return err(format!("segment {i}: speed must be positive"));
            }
        }
        for (i, w) in self.waypoints.windows(2).enumerate() {
            if w[1].eto_min.partial_cmp(&w[0].eto_min) != Some(std::cmp::Ordering::Greater) {
                return err(format!(
                    "arrow of time violated: waypoint {} ({}) at {} min is not after waypoint {} ({}) at {} min",
                    i + 1,
                    w[1].id,
                    w[1].eto_min,
                    i,
                    w[0].id,
                    w[0].eto_min
                ));
            }
        }
        let [lo, hi] = self.first_point_window_min;
        if hi < lo {
            return err(format!("first-point window [{lo}, {hi}] is reversed"));
        }
        self.sector_crossings().map(|_| ())
    }

    /// Sector traversals implied by the waypoint boundary roles.
    pub fn sector_crossings(&self) -> Result<Vec<SectorCrossing>> {
        let mut out = Vec::new();
        let mut current: Option<(String, usize)> = None;
        for (i, w) in self.waypoints.iter().enumerate() {
            if let Some(exited) = &w.exits {
                match current.take() {
                    Some((sector, entry)) if &sector == exited => {
                        out.push(SectorCrossing { sector, entry, exit: i })
                    }
                    Some((sector, _)) => {
                        return Err(Error::Schema(format!(
                            "flight '{}': waypoint {} exits '{exited}' while inside '{sector}'",
                            self.id, w.id
                        )))
                    }
                    None => {
                        return Err(Error::Schema(format!(
                            "flight '{}': waypoint {} exits '{exited}' without entering it",
                            self.id, w.id
                        )))
                    }
                }
            }
            if let Some(entered) = &w.enters {
                if let Some((sector, _)) = &current {
                    return Err(Error::Schema(format!(
                        "flight '{}': waypoint {} enters '{entered}' before exiting '{sector}'",
                        self.id, w.id
                    )));
                }
                current = Some((entered.clone(), i));
            }
        }
        if let Some((sector, _)) = current {
            return Err(Error::Schema(format!(
                "flight '{}': sector '{sector}' is never exited",
                self.id
            )));
        }
        Ok(out)
    }

    /// Nominal targets: the scheduled overfly times.
    pub fn nominal_targets(&self) -> Vec<f64> {
        self.waypoints.iter().map(|w| w.eto_min).collect()
    }
}

/// Speed-control envelope and uncertainty shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedEnvelope {
    /// Slow-down factor on the nominal speed.
    pub alpha: f64,
    /// Speed-up factor on the nominal speed.
    pub speedup_factor: f64,
    /// Path-stretch factor.
    pub delta: f64,
    /// Length of the probable interval around each target, minutes.
    pub probable_len_min: f64,
    /// Minimum support of the first-point density, minutes.
    pub min_first_support_min: f64,
}

impl Default for SpeedEnvelope {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            speedup_factor: 1.05,
            delta: 1.05,
            probable_len_min: 24.0,
            min_first_support_min: 15.0,
        }
    }
}

impl SpeedEnvelope {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.alpha <= 1.0
            && self.speedup_factor >= 1.0
            && self.delta >= 1.0
            && self.probable_len_min > 0.0
            && self.min_first_support_min >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid speed envelope {self:?}")))
        }
    }

    /// `[d/(β·V), δ·d/(α·V)]` in minutes.
    pub fn duration_bounds(&self, segment: &Segment) -> (f64, f64) {
        let nominal = segment.nominal_minutes();
        (nominal / self.speedup_factor, self.delta * nominal / self.alpha)
    }
}

/// Box constraints of one flight: departure interval and per-segment
/// duration intervals, minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleBounds {
    pub departure: (f64, f64),
    pub segments: Vec<(f64, f64)>,
}

pub fn feasible_bounds(plan: &FlightPlan, env: &SpeedEnvelope) -> FeasibleBounds {
    let [lo, hi] = plan.first_point_window_min;
    FeasibleBounds {
        departure: (lo as f64, hi as f64),
        segments: plan.segments.iter().map(|s| env.duration_bounds(s)).collect(),
    }
}

/// Target times of arrival, one vector per flight (first point first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentVector {
    pub flights: Vec<Vec<f64>>,
}

/// Checks a flight's targets against its box constraints.
pub fn check_targets(plan: &FlightPlan, bounds: &FeasibleBounds, targets: &[f64]) -> Result<()> {
    let violation = |waypoint: usize, detail: String| {
        Err(Error::ConstraintViolation { flight: plan.id.clone(), waypoint, detail })
    };
    if targets.len() != plan.n_waypoints() {
        return violation(
            0,
            format!("{} targets for {} waypoints", targets.len(), plan.n_waypoints()),
        );
    }
    let (dlo, dhi) = bounds.departure;
    if !(targets[0] >= dlo - FEASIBILITY_TOL && targets[0] <= dhi + FEASIBILITY_TOL) {
        return violation(0, format!("first target {} outside [{dlo}, {dhi}]", targets[0]));
    }
    for (i, &(lo, hi)) in bounds.segments.iter().enumerate() {
        let d = targets[i + 1] - targets[i];
        if !(d >= lo - FEASIBILITY_TOL && d <= hi + FEASIBILITY_TOL) {
            return violation(i + 1, format!("duration {d:.4} min outside [{lo:.4}, {hi:.4}]"));
        }
    }
    Ok(())
}

/// Writes bin masses of the distribution of the next overfly time into
/// `out` and returns the first bin. Shared by inference and sampling.
fn conditional_into(
    t_prev: f64,
    target: f64,
    seg_bounds: (f64, f64),
    env: &SpeedEnvelope,
    grid: &TimeGrid,
    out: &mut Vec<f64>,
) -> Result<usize> {
    out.clear();
    let prev_bin = grid.bin_of(t_prev).ok_or(Error::HorizonOverflow {
        lo: t_prev,
        hi: t_prev,
        grid_lo: grid.start(),
        grid_hi: grid.end(),
    })?;
    // Arrow of time: nothing may land in the bin of the previous point.
    let earliest = grid.bin_end(prev_bin);
    let feas_lo = (t_prev + seg_bounds.0).max(earliest);
    let feas_hi = (t_prev + seg_bounds.1).max(feas_lo);
    let mode = target.clamp(feas_lo, feas_hi);
    let half = 0.5 * env.probable_len_min;
    let lo = (mode - half).max(feas_lo);
    let hi = (mode + half).min(feas_hi);
    if hi < lo {
        return Err(Error::ModelInconsistency(format!(
            "empty probable interval [{lo}, {hi}] around mode {mode}"
        )));
    }
    if hi - lo < DEGENERATE_WIDTH {
        let bin = grid.bin_of(lo).ok_or(Error::HorizonOverflow {
            lo,
            hi,
            grid_lo: grid.start(),
            grid_hi: grid.end(),
        })?;
        out.push(1.0);
        return Ok(bin);
    }
    triangle_into(&TriangularSpec { lo, mode, hi }, grid, out)
}

/// Allocation-free twin of [`crate::prob::discretize_triangular`].
fn triangle_into(spec: &TriangularSpec, grid: &TimeGrid, out: &mut Vec<f64>) -> Result<usize> {
    if spec.lo < grid.start() || spec.hi > grid.end() {
        return Err(Error::HorizonOverflow {
            lo: spec.lo,
            hi: spec.hi,
            grid_lo: grid.start(),
            grid_hi: grid.end(),
        });
    }
    let first = grid.bin_of(spec.lo).expect("checked against grid bounds");
    let last = grid
        .bin_of(spec.hi)
        .map(|k| if grid.bin_start(k) == spec.hi { k.saturating_sub(1) } else { k })
        .unwrap_or(grid.horizon - 1)
        .max(first);
    let mut prev = 0.0;
    for k in first..=last {
        let c = spec.cdf(grid.bin_end(k));
        out.push((c - prev).max(0.0));
        prev = c;
    }
    Ok(first)
}

/// Distribution of the next overfly time given the previous one at `t_prev`.
pub fn conditional_pdf(
    t_prev: f64,
    target: f64,
    seg_bounds: (f64, f64),
    env: &SpeedEnvelope,
    grid: &TimeGrid,
) -> Result<DiscretePdf> {
    let mut buf = Vec::new();
    let first = conditional_into(t_prev, target, seg_bounds, env, grid, &mut buf)?;
    DiscretePdf::new(*grid, first, buf)
}

/// Density of the first overfly time: triangular over the departure window,
/// peaked at the first target, widened symmetrically to the minimum support.
pub fn departure_pdf(
    window: (f64, f64),
    target: f64,
    env: &SpeedEnvelope,
    grid: &TimeGrid,
) -> Result<DiscretePdf> {
    let (mut lo, mut hi) = window;
    if hi - lo < env.min_first_support_min {
        let center = 0.5 * (lo + hi);
        lo = center - 0.5 * env.min_first_support_min;
        hi = center + 0.5 * env.min_first_support_min;
    }
    let mode = target.clamp(lo, hi);
    if hi - lo < DEGENERATE_WIDTH {
        let bin = grid.bin_of(mode).ok_or(Error::HorizonOverflow {
            lo,
            hi,
            grid_lo: grid.start(),
            grid_hi: grid.end(),
        })?;
        return DiscretePdf::point_mass(*grid, bin);
    }
    crate::prob::discretize_triangular(&TriangularSpec { lo, mode, hi }, grid)
}

/// Pushes `initial` through the chain of segments, returning the marginal of
/// every waypoint from the starting one. `targets[i]` is the target of the
/// waypoint reached through `segments[i - 1]`; `targets[0]` is unused.
pub fn propagate_chain(
    initial: DiscretePdf,
    seg_bounds: &[(f64, f64)],
    targets: &[f64],
    env: &SpeedEnvelope,
    grid: &TimeGrid,
) -> Result<Vec<DiscretePdf>> {
    debug_assert_eq!(seg_bounds.len() + 1, targets.len());
    let mut marginals = Vec::with_capacity(targets.len());
    marginals.push(initial);
    let mut cond = Vec::new();
    let mut acc: Vec<f64> = Vec::new();
    for (i, &bounds) in seg_bounds.iter().enumerate() {
        let prev = marginals.last().expect("non-empty");
        acc.clear();
        acc.resize(grid.horizon, 0.0);
        let (mut lo, mut hi) = (usize::MAX, 0usize);
        for (b, m) in prev.iter() {
            if m == 0.0 {
                continue;
            }
            let first = conditional_into(grid.bin_mid(b), targets[i + 1], bounds, env, grid, &mut cond)?;
            for (j, c) in cond.iter().enumerate() {
                acc[first + j] += m * c;
            }
            lo = lo.min(first);
            hi = hi.max(first + cond.len() - 1);
        }
        let next = DiscretePdf::new(*grid, lo, acc[lo..=hi].to_vec())?;
        marginals.push(next);
    }
    Ok(marginals)
}

/// Marginal overfly-time distribution at every waypoint of `plan`.
pub fn propagate_marginals(
    plan: &FlightPlan,
    targets: &[f64],
    env: &SpeedEnvelope,
    grid: &TimeGrid,
) -> Result<Vec<DiscretePdf>> {
    let bounds = feasible_bounds(plan, env);
    check_targets(plan, &bounds, targets)?;
    let p1 = departure_pdf(bounds.departure, targets[0], env, grid)?;
    propagate_chain(p1, &bounds.segments, targets, env, grid)
}

/// Forward-samples one trajectory; returns the overfly bin of each waypoint.
///
/// Uses the same conditional construction as [`propagate_marginals`], so the
/// sample law is exactly the propagated chain.
pub fn sample_plan_bins<R: Rng + ?Sized>(
    plan: &FlightPlan,
    targets: &[f64],
    env: &SpeedEnvelope,
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let bounds = feasible_bounds(plan, env);
    check_targets(plan, &bounds, targets)?;
    let p1 = departure_pdf(bounds.departure, targets[0], env, grid)?;
    let sampler = ChainSampler { p1, bounds, targets, env, grid };
    let mut buf = Vec::new();
    let mut out = Vec::with_capacity(targets.len());
    sampler.draw(rng, &mut buf, &mut out)?;
    Ok(out)
}

/// Forward-samples one trajectory; returns the overfly time of each
/// waypoint as the start of its grid bin (integer minutes).
pub fn sample_plan<R: Rng + ?Sized>(
    plan: &FlightPlan,
    targets: &[f64],
    env: &SpeedEnvelope,
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<Vec<i64>> {
    Ok(sample_plan_bins(plan, targets, env, grid, rng)?
        .into_iter()
        .map(|b| grid.origin + b as i64 * grid.step)
        .collect())
}

/// Reusable forward sampler for one flight.
pub(crate) struct ChainSampler<'a> {
    pub p1: DiscretePdf,
    pub bounds: FeasibleBounds,
    pub targets: &'a [f64],
    pub env: &'a SpeedEnvelope,
    pub grid: &'a TimeGrid,
}

impl ChainSampler<'_> {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, buf: &mut Vec<f64>, out: &mut Vec<usize>) -> Result<()> {
        out.clear();
        let mut bin = self.p1.sample_bin(rng.random::<f64>());
        out.push(bin);
        for (i, &seg) in self.bounds.segments.iter().enumerate() {
            let first =
                conditional_into(self.grid.bin_mid(bin), self.targets[i + 1], seg, self.env, self.grid, buf)?;
            let total: f64 = buf.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = buf.len() - 1;
            for (j, &m) in buf.iter().enumerate() {
                if u < m {
                    pick = j;
                    break;
                }
                u -= m;
            }
            bin = first + pick;
            out.push(bin);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn wp(id: &str, eto: f64, exits: Option<&str>, enters: Option<&str>) -> Waypoint {
        Waypoint {
            id: id.into(),
            position: String::new(),
            eto_min: eto,
            exits: exits.map(Into::into),
            enters: enters.map(Into::into),
        }
    }

    /// Straight flight of `n_seg` segments of `minutes` each at 460 kt.
    fn straight(n_seg: usize, minutes: f64, dep: i64, window: [i64; 2]) -> FlightPlan {
        let segment = Segment { distance_nm: 460.0 * minutes / 60.0, speed_kt: 460.0 };
        let waypoints = (0..=n_seg)
            .map(|i| {
                let exits = (i > 0).then_some("S");
                let enters = (i == 0).then_some("S");
                wp(&format!("W{i}"), dep as f64 + i as f64 * minutes, exits.filter(|_| i == n_seg), enters)
            })
            .collect();
        FlightPlan {
            id: "F".into(),
            scheduled_departure_min: dep,
            scheduled_arrival_min: dep as f64 + n_seg as f64 * minutes,
            first_point_window_min: window,
            waypoints,
            segments: vec![segment; n_seg],
        }
    }

    #[test]
    fn bounds_for_twenty_minute_segment() {
        let env = SpeedEnvelope::default();
        let s = Segment { distance_nm: 460.0 / 3.0, speed_kt: 460.0 };
        let (lo, hi) = env.duration_bounds(&s);
        assert!((lo - 19.05).abs() < 0.01, "{lo}");
        assert!((hi - 23.33).abs() < 0.01, "{hi}");
        // Fastest crossing flies 483 kt; slowest flies 414 kt on the stretched path.
        let v = |d: f64, minutes: f64| 60.0 * d / minutes;
        assert!((v(s.distance_nm, lo) - 483.0).abs() < 1e-9);
        assert!((v(env.delta * s.distance_nm, hi) - 414.0).abs() < 1e-9);
    }

    #[test]
    fn bounds_for_thirty_minute_segment() {
        let env = SpeedEnvelope::default();
        let (lo, hi) = env.duration_bounds(&Segment { distance_nm: 230.0, speed_kt: 460.0 });
        assert!((lo - 28.57).abs() < 0.01);
        assert!((hi - 35.00).abs() < 0.01);
    }

    #[test]
    fn identity_envelope_collapses_bounds() {
        let env = SpeedEnvelope { alpha: 1.0, speedup_factor: 1.0, delta: 1.0, ..Default::default() };
        let (lo, hi) = env.duration_bounds(&Segment { distance_nm: 230.0, speed_kt: 460.0 });
        assert_eq!(lo, hi);
        assert_eq!(lo, 30.0);
    }

    #[test]
    fn feasible_bounds_uses_window_and_segments() {
        let plan = straight(2, 30.0, 10, [0, 30]);
        let b = feasible_bounds(&plan, &SpeedEnvelope::default());
        assert_eq!(b.departure, (0.0, 30.0));
        assert_eq!(b.segments.len(), 2);
    }

    #[test]
    fn centered_target_gives_symmetric_conditional() {
        let grid = TimeGrid::minutes(0, 200);
        let env = SpeedEnvelope::default();
        // Feasible [40, 80], target in the middle: probable interval [48, 72].
        let pdf = conditional_pdf(10.0, 60.0, (30.0, 70.0), &env, &grid).unwrap();
        assert!((pdf.cdf(59) - 0.5).abs() < 1e-12);
        assert_eq!(pdf.support_lo(), 48);
        assert_eq!(pdf.support_hi(), 71);
    }

    #[test]
    fn early_target_clamps_to_lower_bound_with_late_tail() {
        let grid = TimeGrid::minutes(0, 200);
        let env = SpeedEnvelope::default();
        let pdf = conditional_pdf(10.5, 20.0, (28.57, 35.0), &env, &grid).unwrap();
        // Mode sits on the earliest feasible time, mass decays toward later bins.
        assert_eq!(pdf.mode_bin(), grid.bin_of(10.5 + 28.57).unwrap());
        let masses = pdf.masses();
        for w in masses.windows(2).skip(1) {
            assert!(w[0] >= w[1]);
        }
        assert!(pdf.mean() > 10.5 + 28.57 + 1.0);
    }

    #[test]
    fn conditional_respects_arrow_of_time() {
        let grid = TimeGrid::minutes(0, 100);
        let env = SpeedEnvelope::default();
        // Very short segment: lower bound would fall inside the previous bin.
        let pdf = conditional_pdf(10.2, 10.5, (0.1, 3.0), &env, &grid).unwrap();
        assert!(pdf.support_lo() > 10);
    }

    #[test]
    fn point_mass_start_and_one_segment_equals_conditional() {
        let grid = TimeGrid::minutes(0, 200);
        let env = SpeedEnvelope { min_first_support_min: 0.0, ..Default::default() };
        let plan = straight(1, 30.0, 10, [10, 10]);
        let targets = vec![10.0, 40.0];
        let marginals = propagate_marginals(&plan, &targets, &env, &grid).unwrap();
        assert_eq!(marginals[0].support_width(), 1);
        let bounds = feasible_bounds(&plan, &env);
        let direct = conditional_pdf(grid.bin_mid(10), 40.0, bounds.segments[0], &env, &grid).unwrap();
        assert_eq!(marginals[1].support_lo(), direct.support_lo());
        for (a, b) in marginals[1].masses().iter().zip(direct.masses()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn nominal_targets_drift_later_than_nominal_crossing() {
        let grid = TimeGrid::minutes(0, 300);
        let env = SpeedEnvelope::default();
        let plan = straight(4, 30.0, 30, [20, 50]);
        let marginals = propagate_marginals(&plan, &plan.nominal_targets(), &env, &grid).unwrap();
        let means: Vec<f64> = marginals.iter().map(|m| m.mean()).collect();
        for w in means.windows(2) {
            assert!(w[1] - w[0] > 30.0, "{means:?}");
        }
        for w in marginals.windows(2) {
            assert!(w[1].support_width() >= w[0].support_width());
        }
    }

    #[test]
    fn out_of_bounds_intent_names_flight_and_waypoint() {
        let grid = TimeGrid::minutes(0, 300);
        let env = SpeedEnvelope::default();
        let plan = straight(2, 30.0, 30, [20, 50]);
        let err = propagate_marginals(&plan, &[30.0, 60.0, 110.0], &env, &grid).unwrap_err();
        match err {
            Error::ConstraintViolation { flight, waypoint, .. } => {
                assert_eq!(flight, "F");
                assert_eq!(waypoint, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(propagate_marginals(&plan, &[60.0, 90.0, 120.0], &env, &grid).is_err());
    }

    #[test]
    fn degenerate_chain_samples_the_unique_trajectory() {
        let grid = TimeGrid::minutes(0, 200);
        let env = SpeedEnvelope {
            alpha: 1.0,
            speedup_factor: 1.0,
            delta: 1.0,
            min_first_support_min: 0.0,
            ..Default::default()
        };
        let plan = straight(3, 30.0, 10, [10, 10]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let times = sample_plan(&plan, &plan.nominal_targets(), &env, &grid, &mut rng).unwrap();
        assert_eq!(times, vec![10, 40, 70, 100]);
    }

    #[test]
    fn samples_are_strictly_increasing_and_match_marginals() {
        let grid = TimeGrid::minutes(0, 300);
        let env = SpeedEnvelope::default();
        let plan = straight(4, 30.0, 30, [20, 50]);
        let targets = plan.nominal_targets();
        let marginals = propagate_marginals(&plan, &targets, &env, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut counts = vec![vec![0u32; grid.horizon]; targets.len()];
        for _ in 0..n {
            let bins = sample_plan_bins(&plan, &targets, &env, &grid, &mut rng).unwrap();
            for w in bins.windows(2) {
                assert!(w[0] < w[1]);
            }
            for (i, &b) in bins.iter().enumerate() {
                counts[i][b] += 1;
            }
        }
        for (i, (m, c)) in marginals.iter().zip(&counts).enumerate() {
            for (b, &k) in c.iter().enumerate() {
                let freq = k as f64 / n as f64;
                assert!((freq - m.mass_at(b)).abs() < 0.01, "waypoint {i} bin {b}");
            }
        }
    }

    #[test]
    fn sector_chain_validation() {
        let mut plan = straight(2, 30.0, 30, [20, 50]);
        plan.waypoints[1].exits = Some("S".into());
        plan.waypoints[1].enters = Some("T".into());
        plan.waypoints[2].exits = Some("T".into());
        let crossings = plan.sector_crossings().unwrap();
        assert_eq!(
            crossings,
            vec![
                SectorCrossing { sector: "S".into(), entry: 0, exit: 1 },
                SectorCrossing { sector: "T".into(), entry: 1, exit: 2 }
            ]
        );
        plan.waypoints[2].exits = Some("S".into());
        assert!(plan.validate().is_err());
        let mut plan = straight(2, 30.0, 30, [20, 50]);
        plan.waypoints[2].eto_min = 40.0;
        let msg = plan.validate().unwrap_err().to_string();
        assert!(msg.contains("arrow of time"), "{msg}");
    }

    /// Random flight with segment widths no larger than half the probable
    /// interval, so each conditional support equals its feasible interval.
    fn random_flight() -> impl Strategy<Value = (FlightPlan, Vec<f64>)> {
        (
            prop::collection::vec(10.0f64..55.0, 1..5),
            prop::collection::vec(0.0f64..=1.0, 6),
            5i64..=60,
        )
            .prop_map(|(minutes, genes, wlen)| {
                let env = SpeedEnvelope::default();
                let dep = 20;
                let mut plan = straight(minutes.len(), 30.0, dep, [dep, dep + wlen]);
                for (s, m) in plan.segments.iter_mut().zip(&minutes) {
                    s.distance_nm = 460.0 * m / 60.0;
                }
                let bounds = feasible_bounds(&plan, &env);
                let mut targets = vec![bounds.departure.0 + genes[0] * (bounds.departure.1 - bounds.departure.0)];
                for (i, &(lo, hi)) in bounds.segments.iter().enumerate() {
                    let prev = targets[i];
                    targets.push(prev + lo + genes[i + 1] * (hi - lo));
                }
                (plan, targets)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn support_widths_never_shrink((plan, targets) in random_flight()) {
            let grid = TimeGrid::minutes(0, 500);
            let marginals = propagate_marginals(&plan, &targets, &SpeedEnvelope::default(), &grid).unwrap();
            for w in marginals.windows(2) {
                prop_assert!(w[1].support_width() >= w[0].support_width());
                prop_assert!(w[1].support_lo() > w[0].support_lo());
            }
        }

        #[test]
        fn marginals_are_normalized((plan, targets) in random_flight()) {
            let grid = TimeGrid::minutes(0, 500);
            for m in propagate_marginals(&plan, &targets, &SpeedEnvelope::default(), &grid).unwrap() {
                let s: f64 = m.masses().iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn sub_chain_reproduces_tail((plan, targets) in random_flight(), start_frac in 0.0f64..1.0) {
            let grid = TimeGrid::minutes(0, 500);
            let env = SpeedEnvelope::default();
            let full = propagate_marginals(&plan, &targets, &env, &grid).unwrap();
            let start = ((full.len() - 1) as f64 * start_frac) as usize;
            let bounds = feasible_bounds(&plan, &env);
            let tail = propagate_chain(full[start].clone(), &bounds.segments[start..], &targets[start..], &env, &grid).unwrap();
            for (a, b) in full[start..].iter().zip(&tail) {
                for k in 0..grid.horizon {
                    prop_assert!((a.mass_at(k) - b.mass_at(k)).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn later_target_never_moves_marginals_earlier((plan, targets) in random_flight(), which in 0usize..6, frac in 0.0f64..=1.0) {
            let grid = TimeGrid::minutes(0, 500);
            let env = SpeedEnvelope::default();
            let bounds = feasible_bounds(&plan, &env);
            let i = which % targets.len();
            // Largest later move that keeps every duration feasible.
            let room_before = if i == 0 { bounds.departure.1 - targets[0] } else { targets[i - 1] + bounds.segments[i - 1].1 - targets[i] };
            let room_after = if i + 1 < targets.len() { targets[i + 1] - targets[i] - bounds.segments[i].0 } else { f64::INFINITY };
            let shift = frac * room_before.min(room_after).max(0.0);
            let mut later = targets.clone();
            later[i] += shift;
            let a = propagate_marginals(&plan, &targets, &env, &grid).unwrap();
            let b = propagate_marginals(&plan, &later, &env, &grid).unwrap();
            for w in i..targets.len() {
                for k in 0..grid.horizon {
                    prop_assert!(b[w].cdf(k) <= a[w].cdf(k) + 1e-12, "waypoint {w} bin {k}");
                }
            }
        }
    }
}
