//! Sector presence and occupancy-count distributions.
//!
//! A flight is inside a sector between its entry and exit overfly times, so
//! the probability of presence at an instant is `F_entry − F_exit` there.
//! The number of flights inside a sector is then a sum of independent,
//! non-identical Bernoulli variables (a Poisson-Binomial law), computed either
//! by direct convolution or by inverting its characteristic function with an
//! FFT.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{DiscretePdf, TimeGrid, NORMALIZATION_EPS};
use crate::trajectory::SectorCrossing;

/// Presence below this value does not count toward `N_s^t`.
pub const PRESENCE_CUTOFF: f64 = 1e-12;
/// Roundoff allowance on probabilities that should be non-negative.
pub const NEGATIVE_TOL: f64 = 1e-12;
pub const DEFAULT_DIRECT_CAP: usize = 20;
pub const DEFAULT_AUTO_THRESHOLD: usize = 20;
/// Largest `N` accepted by the exhaustive-enumeration oracle.
pub const ENUMERATION_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sector {
    pub id: String,
    /// Base capacity `C_s`, flights.
    pub capacity: u32,
}

/// Probability of presence of one flight in one sector, bin by bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PresenceCurve {
    pub sector: String,
    pub flight: String,
    /// Bin of `values[0]`.
    pub first_bin: usize,
    pub values: Vec<f64>,
}

impl PresenceCurve {
    pub fn at(&self, bin: usize) -> f64 {
        bin.checked_sub(self.first_bin)
            .and_then(|i| self.values.get(i))
            .copied()
            .unwrap_or(0.0)
    }
}

/// `Pr(K = n)` for `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CongestionPmf {
    pub pmf: Vec<f64>,
}

impl CongestionPmf {
    pub fn empty() -> Self {
        Self { pmf: vec![1.0] }
    }

    pub fn n_max(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().fold(0.0, |acc, (n, p)| acc + n as f64 * p)
    }

    /// `Pr(K > capacity)`.
    pub fn prob_exceeding(&self, capacity: u32) -> f64 {
        self.pmf.iter().skip(capacity as usize + 1).fold(0.0, |acc, p| acc + p)
    }

    /// `Σ_{n > C} (n − C)^λ · Pr(K = n)`.
    pub fn excess_cost(&self, capacity: u32, risk_aversion: f64) -> f64 {
        let c = capacity as usize;
        self.pmf
            .iter()
            .enumerate()
            .skip(c + 1)
            .fold(0.0, |acc, (n, p)| acc + ((n - c) as f64).powf(risk_aversion) * p)
    }
}

/// How occupancy PMFs are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PmfMethod {
    Direct,
    Fft,
    #[default]
    Auto,
}

impl std::str::FromStr for PmfMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "fft" => Ok(Self::Fft),
            "auto" => Ok(Self::Auto),
            other => Err(Error::Config(format!("unknown method '{other}' (direct|fft|auto)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmfConfig {
    pub method: PmfMethod,
    /// The direct method refuses larger `N`.
    pub direct_cap: usize,
    /// `Auto` uses the direct method up to this `N`.
    pub auto_threshold: usize,
}

impl Default for PmfConfig {
    fn default() -> Self {
        Self {
            method: PmfMethod::Auto,
            direct_cap: DEFAULT_DIRECT_CAP,
            auto_threshold: DEFAULT_AUTO_THRESHOLD,
        }
    }
}

impl PmfConfig {
    pub fn with_method(method: PmfMethod) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn pmf(&self, presences: &[f64]) -> Result<CongestionPmf> {
        match self.method {
            PmfMethod::Direct => congestion_pmf_direct(presences, self.direct_cap),
            PmfMethod::Fft => congestion_pmf_fft(presences),
            PmfMethod::Auto if presences.len() <= self.auto_threshold => {
                congestion_pmf_direct(presences, usize::MAX)
            }
            PmfMethod::Auto => congestion_pmf_fft(presences),
        }
    }
}

/// Probability that the flight is inside the sector at the instant
/// representing `bin`: entered at or before the bin, not yet exited.
pub fn presence_probability(entry: &DiscretePdf, exit: &DiscretePdf, bin: usize) -> Result<f64> {
    clip_presence(entry.cdf(bin) - exit.cdf(bin))
}

/// Probability of presence at some time in the bin range `[from, to]`:
/// entered before the range ends and not exited before it starts.
pub fn presence_over_interval(
    entry: &DiscretePdf,
    exit: &DiscretePdf,
    from: usize,
    to: usize,
) -> Result<f64> {
    clip_presence(entry.cdf(to) - exit.cdf_signed(from as i64 - 1))
}

fn clip_presence(p: f64) -> Result<f64> {
    if p < -NEGATIVE_TOL {
        return Err(Error::ModelInconsistency(format!(
            "negative presence probability {p}: exit distribution precedes entry"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Presence curve over every bin where it can be non-zero.
pub fn presence_curve(
    flight: &str,
    sector: &str,
    entry: &DiscretePdf,
    exit: &DiscretePdf,
) -> Result<PresenceCurve> {
    let first = entry.support_lo();
    let last = exit.support_hi().max(first);
    let values = (first..last)
        .map(|b| presence_probability(entry, exit, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(PresenceCurve {
        sector: sector.to_string(),
        flight: flight.to_string(),
        first_bin: first,
        values,
    })
}

/// Exhaustive sum over all `2^N` in/out assignments. Test oracle.
pub fn congestion_pmf_enumerated(presences: &[f64]) -> Result<CongestionPmf> {
    let n = presences.len();
    if n > ENUMERATION_CAP {
        return Err(Error::SizeCap { n, cap: ENUMERATION_CAP });
    }
    let mut pmf = vec![0.0; n + 1];
    for mask in 0u64..(1u64 << n) {
        let mut prob = 1.0;
        for (f, &p) in presences.iter().enumerate() {
            prob *= if mask >> f & 1 == 1 { p } else { 1.0 - p };
        }
        pmf[mask.count_ones() as usize] += prob;
    }
    Ok(CongestionPmf { pmf })
}

/// Exact PMF by adding one Bernoulli at a time, `O(N²)`.
pub fn congestion_pmf_direct(presences: &[f64], cap: usize) -> Result<CongestionPmf> {
    let n = presences.len();
    if n > cap {
        return Err(Error::SizeCap { n, cap });
    }
    check_presences(presences)?;
    let mut pmf = vec![0.0; n + 1];
    pmf[0] = 1.0;
    for (k, &p) in presences.iter().enumerate() {
        let q = 1.0 - p;
        for j in (1..=k + 1).rev() {
            pmf[j] = pmf[j] * q + pmf[j - 1] * p;
        }
        pmf[0] *= q;
    }
    Ok(CongestionPmf { pmf })
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward_fft(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

/// PMF by inverting the characteristic function
/// `φ(l) = Π_f (1 − p_f + p_f·e^{iwl})`, `w = 2π/(N+1)`, with one DFT.
pub fn congestion_pmf_fft(presences: &[f64]) -> Result<CongestionPmf> {
    check_presences(presences)?;
    let n = presences.len();
    let m = n + 1;
    let w = 2.0 * std::f64::consts::PI / m as f64;
    let mut phi = vec![Complex64::new(0.0, 0.0); m];
    // φ(m − l) = conj(φ(l)): only half the samples need the product.
    for l in 0..=m / 2 {
        let z = Complex64::from_polar(1.0, w * l as f64);
        let mut acc = Complex64::new(1.0, 0.0);
        for &p in presences {
            acc *= Complex64::new(1.0 - p, 0.0) + z * p;
        }
        phi[l] = acc;
        if l != 0 && l != m - l {
            phi[m - l] = acc.conj();
        }
    }
    forward_fft(m).process(&mut phi);
    let scale = 1.0 / m as f64;
    let mut pmf = Vec::with_capacity(m);
    for c in &phi {
        let v = c.re * scale;
        if v < -NEGATIVE_TOL {
            return Err(Error::ModelInconsistency(format!("FFT produced probability {v}")));
        }
        pmf.push(v.max(0.0));
    }
    let sum: f64 = pmf.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_EPS {
        return Err(Error::Normalization { sum });
    }
    pmf.iter_mut().for_each(|v| *v /= sum);
    Ok(CongestionPmf { pmf })
}

fn check_presences(presences: &[f64]) -> Result<()> {
    match presences.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(p) => Err(Error::ModelInconsistency(format!("presence {p} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Marginals of one flight along with the sectors it traverses.
#[derive(Debug, Clone)]
pub struct FlightMarginals {
    pub flight: String,
    pub marginals: Vec<DiscretePdf>,
    pub crossings: Vec<SectorCrossing>,
}

impl FlightMarginals {
    /// Presence curves, one per sector crossing.
    pub fn presence_curves(&self) -> Result<Vec<PresenceCurve>> {
        self.crossings
            .iter()
            .map(|c| presence_curve(&self.flight, &c.sector, &self.marginals[c.entry], &self.marginals[c.exit]))
            .collect()
    }
}

/// Occupancy of one sector over the grid.
#[derive(Debug, Clone)]
pub struct SectorField {
    pub sector: String,
    /// Capacity per bin.
    pub capacity: Vec<u32>,
    pub presence: Vec<PresenceCurve>,
    /// Occupancy PMF per bin.
    pub pmfs: Vec<CongestionPmf>,
    /// `E[K]` per bin, computed as the sum of presences.
    pub expected: Vec<f64>,
}

impl SectorField {
    pub fn congestion_probability(&self) -> Vec<f64> {
        self.pmfs
            .iter()
            .zip(&self.capacity)
            .map(|(pmf, &c)| pmf.prob_exceeding(c))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct OccupancyField {
    pub grid: TimeGrid,
    pub sectors: Vec<SectorField>,
}

impl OccupancyField {
    pub fn sector(&self, id: &str) -> Option<&SectorField> {
        self.sectors.iter().find(|s| s.sector == id)
    }
}

/// Presence values `> PRESENCE_CUTOFF` of every curve at `bin`.
pub(crate) fn gather_presences(curves: &[&PresenceCurve], bin: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend(curves.iter().map(|c| c.at(bin)).filter(|&p| p > PRESENCE_CUTOFF));
}

/// Builds presence curves and per-bin occupancy PMFs for every sector.
///
/// `capacities[s]` holds the per-bin capacity of `sectors[s]`.
pub fn occupancy_field(
    flights: &[FlightMarginals],
    sectors: &[Sector],
    capacities: &[Vec<u32>],
    grid: &TimeGrid,
    config: &PmfConfig,
) -> Result<OccupancyField> {
    let mut all_curves = Vec::new();
    for f in flights {
        all_curves.extend(f.presence_curves()?);
    }
    let mut out = Vec::with_capacity(sectors.len());
    let mut buf = Vec::new();
    for (s, sector) in sectors.iter().enumerate() {
        let curves: Vec<&PresenceCurve> = all_curves.iter().filter(|c| c.sector == sector.id).collect();
        let mut pmfs = Vec::with_capacity(grid.horizon);
        let mut expected = Vec::with_capacity(grid.horizon);
        for bin in 0..grid.horizon {
            gather_presences(&curves, bin, &mut buf);
            expected.push(buf.iter().fold(0.0, |acc, p| acc + p));
            pmfs.push(if buf.is_empty() { CongestionPmf::empty() } else { config.pmf(&buf)? });
        }
        out.push(SectorField {
            sector: sector.id.clone(),
            capacity: capacities[s].clone(),
            presence: curves.into_iter().cloned().collect(),
            pmfs,
            expected,
        });
    }
    Ok(OccupancyField { grid: *grid, sectors: out })
}

/// Monitoring alarm over a maximal run of bins at or above the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub sector: String,
    pub from_bin: usize,
    /// Inclusive.
    pub to_bin: usize,
    pub start_min: i64,
    pub end_min: i64,
    pub peak_bin: usize,
    pub peak_expected: f64,
    pub capacity_at_peak: u32,
}

pub const DEFAULT_ALARM_RATIO: f64 = 0.9;

/// One alarm per maximal run of bins where `E[K] ≥ ratio · C` (and the
/// sector is not empty).
pub fn monitor_alarms(field: &OccupancyField, threshold_ratio: f64) -> Vec<Alarm> {
    let mut alarms = Vec::new();
    for s in &field.sectors {
        let mut open: Option<Alarm> = None;
        for (bin, (&e, &c)) in s.expected.iter().zip(&s.capacity).enumerate() {
            let hot = e > 0.0 && e >= threshold_ratio * c as f64;
            match (&mut open, hot) {
                (Some(a), true) => {
                    a.to_bin = bin;
                    if e > a.peak_expected {
                        a.peak_bin = bin;
                        a.peak_expected = e;
                        a.capacity_at_peak = c;
                    }
                }
                (None, true) => {
                    open = Some(Alarm {
                        sector: s.sector.clone(),
                        from_bin: bin,
                        to_bin: bin,
                        start_min: 0,
                        end_min: 0,
                        peak_bin: bin,
                        peak_expected: e,
                        capacity_at_peak: c,
                    })
                }
                (Some(_), false) => alarms.push(open.take().expect("open alarm")),
                (None, false) => {}
            }
        }
        alarms.extend(open);
    }
    for a in &mut alarms {
        a.start_min = field.grid.bin_start(a.from_bin) as i64;
        a.end_min = field.grid.bin_end(a.to_bin) as i64;
    }
    alarms
}
