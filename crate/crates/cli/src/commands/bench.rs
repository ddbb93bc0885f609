//! Direct versus FFT timing of the occupancy PMF.

use std::hint::black_box;
use std::path::Path;
use std::time::{Duration, Instant};

use atfcm_core::occupancy::{congestion_pmf_direct, congestion_pmf_enumerated, congestion_pmf_fft};
use atfcm_core::Result;
use serde::Serialize;

use crate::output::{num, Table};

/// Largest size timed with literal subset enumeration; the O(N²)
/// convolution times larger sizes.
pub const ENUMERATION_MAX_N: usize = 12;
const BATCHES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectMethod {
    Enumeration,
    Convolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub direct_ns: f64,
    pub fft_ns: f64,
    pub direct_method: DirectMethod,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.direct_ns / self.fft_ns
    }
}

/// Sizes timed up to `n_max`: every size to 16, then a sparser ladder that
/// includes 300.
pub fn sizes(n_max: usize) -> Vec<usize> {
    let ladder = [20, 24, 32, 40, 48, 64, 80, 96, 128, 160, 192, 256, 300, 384, 448, 512];
    let mut out: Vec<usize> = (1..=16).chain(ladder).filter(|&n| n <= n_max).collect();
    if n_max > 512 {
        out.extend((1..).map(|k| 512 + 128 * k).take_while(|&n| n <= n_max));
    }
    out
}

/// Deterministic presences spread over (0.05, 0.95).
pub fn presences(n: usize) -> Vec<f64> {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    (1..=n).map(|f| 0.05 + 0.9 * (f as f64 * golden).fract()).collect()
}

/// Best per-call time over a few batches, each lasting about `target`.
pub fn time_per_call<F: FnMut()>(mut f: F, target: Duration) -> f64 {
    let t0 = Instant::now();
    f();
    let once = t0.elapsed().max(Duration::from_nanos(1));
    let reps = ((target.as_secs_f64() / once.as_secs_f64()) as usize).clamp(1, 1_000_000);
    (0..BATCHES)
        .map(|_| {
            let t = Instant::now();
            for _ in 0..reps {
                f();
            }
            t.elapsed().as_secs_f64() * 1e9 / reps as f64
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn bench_pbin(n_max: usize, target: Duration) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for n in sizes(n_max) {
        let p = presences(n);
        let method = if n <= ENUMERATION_MAX_N { DirectMethod::Enumeration } else { DirectMethod::Convolution };
        // Surface errors once before timing.
        match method {
            DirectMethod::Enumeration => congestion_pmf_enumerated(&p)?,
            DirectMethod::Convolution => congestion_pmf_direct(&p, usize::MAX)?,
        };
        congestion_pmf_fft(&p)?;
        let direct_ns = match method {
            DirectMethod::Enumeration => time_per_call(|| drop(black_box(congestion_pmf_enumerated(black_box(&p)))), target),
            DirectMethod::Convolution => {
                time_per_call(|| drop(black_box(congestion_pmf_direct(black_box(&p), usize::MAX))), target)
            }
        };
        let fft_ns = time_per_call(|| drop(black_box(congestion_pmf_fft(black_box(&p)))), target);
        rows.push(BenchRow { n, direct_ns, fft_ns, direct_method: method });
    }
    Ok(rows)
}

/// Least-squares slope of `log(time)` against `log(N)` over rows with
/// `n ≥ n_min`.
pub fn loglog_slope(rows: &[BenchRow], n_min: usize, time: impl Fn(&BenchRow) -> f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.n >= n_min).map(|r| ((r.n as f64).ln(), time(r).ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Smallest timed `N` from which FFT is faster at every larger size.
pub fn crossover(rows: &[BenchRow]) -> Option<usize> {
    let mut from = None;
    for r in rows.iter().rev() {
        if r.fft_ns < r.direct_ns {
            from = Some(r.n);
        } else {
            break;
        }
    }
    from
}

pub fn write_rows(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut t = Table::create(path, &["N", "direct_ns", "fft_ns", "direct_method"])?;
    for r in rows {
        let method = match r.direct_method {
            DirectMethod::Enumeration => "enumeration",
            DirectMethod::Convolution => "convolution",
        };
        t.row([r.n.to_string(), num(r.direct_ns.round()), num(r.fft_ns.round()), method.to_string()])?;
    }
    t.finish()
}
