//! Discrete-time probability kernels.
//!
//! Every overfly-time distribution in the model lives on a [`TimeGrid`] of
//! fixed-width bins. Bin `k` covers `[origin + k*step, origin + (k+1)*step)`
//! and, wherever a single instant is needed (conditioning, cost integrals),
//! it is represented by its midpoint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of any distribution.
pub const NORMALIZATION_EPS: f64 = 1e-9;

/// Discretized planning horizon, integer minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub origin: i64,
    pub step: i64,
    pub horizon: usize,
}

impl TimeGrid {
    pub fn new(origin: i64, step: i64, horizon: usize) -> Result<Self> {
        if step <= 0 {
            return Err(Error::Config(format!("grid step must be positive, got {step}")));
        }
        if horizon == 0 {
            return Err(Error::Config("grid horizon must be positive".into()));
        }
        Ok(Self { origin, step, horizon })
    }

    /// One-minute grid starting at `origin`.
    pub fn minutes(origin: i64, horizon: usize) -> Self {
        Self { origin, step: 1, horizon }
    }

    pub fn start(&self) -> f64 {
        self.origin as f64
    }

    pub fn end(&self) -> f64 {
        self.bin_start(self.horizon)
    }

    pub fn step_f64(&self) -> f64 {
        self.step as f64
    }

    pub fn bin_start(&self, k: usize) -> f64 {
        (self.origin + k as i64 * self.step) as f64
    }

    pub fn bin_end(&self, k: usize) -> f64 {
        self.bin_start(k + 1)
    }

    pub fn bin_mid(&self, k: usize) -> f64 {
        self.bin_start(k) + 0.5 * self.step_f64()
    }

    /// Bin containing `t`, or `None` outside the grid.
    pub fn bin_of(&self, t: f64) -> Option<usize> {
        if !t.is_finite() || t < self.start() || t >= self.end() {
            return None;
        }
        let k = ((t - self.start()) / self.step_f64()).floor() as usize;
        Some(k.min(self.horizon - 1))
    }

    /// True when `t` falls on a bin boundary (grid-aligned time).
    pub fn is_aligned(&self, t: i64) -> bool {
        (t - self.origin).rem_euclid(self.step) == 0
    }
}

/// Probability mass over a contiguous run of grid bins.
///
/// The support is trimmed so that the first and last stored bins carry
/// non-zero mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePdf {
    grid: TimeGrid,
    lo: usize,
    mass: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscretePdf {
    /// Builds a distribution from raw masses starting at bin `lo`.
    ///
    /// Rejects negative entries, bins beyond the horizon and totals outside
    /// `1 ± NORMALIZATION_EPS`.
    pub fn new(grid: TimeGrid, lo: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::ModelInconsistency("negative or non-finite probability mass".into()));
        }
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_EPS {
            return Err(Error::Normalization { sum });
        }
        let first = mass.iter().position(|&m| m > 0.0).unwrap_or(0);
        let last = mass.iter().rposition(|&m| m > 0.0).unwrap_or(0);
        let lo = lo + first;
        let mass = mass[first..=last].to_vec();
        if lo + mass.len() > grid.horizon {
            return Err(Error::HorizonOverflow {
                lo: grid.bin_start(lo),
                hi: grid.bin_start(lo + mass.len()),
                grid_lo: grid.start(),
                grid_hi: grid.end(),
            });
        }
        let cumulative = mass
            .iter()
            .scan(0.0, |acc, m| {
                *acc += m;
                Some(*acc)
            })
            .collect();
        Ok(Self { grid, lo, mass, cumulative })
    }

    pub fn point_mass(grid: TimeGrid, bin: usize) -> Result<Self> {
        Self::new(grid, bin, vec![1.0])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn support_lo(&self) -> usize {
        self.lo
    }

    /// Last bin with non-zero mass (inclusive).
    pub fn support_hi(&self) -> usize {
        self.lo + self.mass.len() - 1
    }

    /// Number of bins between the first and last non-zero bin, inclusive.
    pub fn support_width(&self) -> usize {
        self.mass.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_at(&self, bin: usize) -> f64 {
        if bin < self.lo || bin > self.support_hi() {
            0.0
        } else {
            self.mass[bin - self.lo]
        }
    }

    /// `(bin, mass)` pairs over the support.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.mass.iter().enumerate().map(move |(i, &m)| (self.lo + i, m))
    }

    /// Probability that the event happened in bin `bin` or earlier.
    pub fn cdf(&self, bin: usize) -> f64 {
        if bin < self.lo {
            0.0
        } else if bin >= self.support_hi() {
            1.0
        } else {
            self.cumulative[bin - self.lo]
        }
    }

    /// CDF with a signed bin index, so that `cdf_signed(-1) == 0`.
    pub fn cdf_signed(&self, bin: i64) -> f64 {
        if bin < 0 {
            0.0
        } else {
            self.cdf(bin as usize)
        }
    }

    /// `Σ_k penalty(τ_k) · mass_k`, with `τ_k` the midpoint of bin `k`.
    pub fn expectation_of<F: Fn(f64) -> f64>(&self, penalty: F) -> f64 {
        self.iter().map(|(k, m)| penalty(self.grid.bin_mid(k)) * m).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expectation_of(|t| t)
    }

    /// Bin of maximal mass (earliest on ties).
    pub fn mode_bin(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m > self.mass[best] {
                best = i;
            }
        }
        self.lo + best
    }

    /// Draws a bin by inverse-CDF lookup of a uniform `u ∈ [0, 1)`.
    pub fn sample_bin(&self, u: f64) -> usize {
        let target = u * self.cumulative[self.mass.len() - 1];
        let idx = self.cumulative.partition_point(|&c| c <= target);
        self.lo + idx.min(self.mass.len() - 1)
    }
}

/// Free-standing form of [`DiscretePdf::cdf`].
pub fn cdf(pdf: &DiscretePdf, bin: usize) -> f64 {
    pdf.cdf(bin)
}

/// Free-standing form of [`DiscretePdf::expectation_of`].
pub fn expectation_of<F: Fn(f64) -> f64>(pdf: &DiscretePdf, penalty: F) -> f64 {
    pdf.expectation_of(penalty)
}

/// Triangular law on `[lo, hi]` with its peak at `mode`, in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularSpec {
    pub lo: f64,
    pub mode: f64,
    pub hi: f64,
}

impl TriangularSpec {
    pub fn new(lo: f64, mode: f64, hi: f64) -> Result<Self> {
        let spec = Self { lo, mode, hi };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lo.is_finite()
            && self.hi.is_finite()
            && self.mode.is_finite()
            && self.hi > self.lo
            && self.lo <= self.mode
            && self.mode <= self.hi;
        if ok {
            Ok(())
        } else {
            Err(Error::DegenerateSpec { lo: self.lo, mode: self.mode, hi: self.hi })
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (a, c, b) = (self.lo, self.mode, self.hi);
        if x <= a || x >= b {
            0.0
        } else if x <= c {
            2.0 * (x - a) / ((b - a) * (c - a))
        } else {
            2.0 * (b - x) / ((b - a) * (b - c))
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (a, c, b) = (self.lo, self.mode, self.hi);
        if x <= a {
            0.0
        } else if x >= b {
            1.0
        } else if x <= c {
            (x - a) * (x - a) / ((b - a) * (c - a))
        } else {
            1.0 - (b - x) * (b - x) / ((b - a) * (b - c))
        }
    }
}

/// Integrates the triangular density exactly over each grid bin.
pub fn discretize_triangular(spec: &TriangularSpec, grid: &TimeGrid) -> Result<DiscretePdf> {
    spec.validate()?;
    if spec.lo < grid.start() || spec.hi > grid.end() {
        return Err(Error::HorizonOverflow {
            lo: spec.lo,
            hi: spec.hi,
            grid_lo: grid.start(),
            grid_hi: grid.end(),
        });
    }
    let first = grid.bin_of(spec.lo).expect("checked against grid bounds");
    // `hi` may sit exactly on the grid end or on a bin boundary.
    let last = grid
        .bin_of(spec.hi)
        .map(|k| if grid.bin_start(k) == spec.hi { k.saturating_sub(1) } else { k })
        .unwrap_or(grid.horizon - 1)
        .max(first);
    let mass = (first..=last)
        .map(|k| spec.cdf(grid.bin_end(k)) - spec.cdf(grid.bin_start(k)))
        .map(|m| m.max(0.0))
        .collect();
    DiscretePdf::new(*grid, first, mass)
}
