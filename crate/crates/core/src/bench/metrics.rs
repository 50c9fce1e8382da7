//! Figures of merit: particles advanced per second, run aggregation and
//! parallel speedup.

use crate::error::{Error, Result};

/// Millions of particles advanced per second:
/// `total_particles / mean_mover_s / 10⁶`.
pub fn mpa(total_particles: usize, mean_mover_s: f64) -> Result<f64> {
    if total_particles == 0 || !(mean_mover_s > 0.0 && mean_mover_s.is_finite()) {
        return Err(Error::Metric(format!(
            "need positive particles and mover time, got {total_particles} and {mean_mover_s}"
        )));
    }
    Ok(total_particles as f64 / mean_mover_s / 1e6)
}

/// Arithmetic mean of per-cycle mover times, turned into one MPA/s figure.
pub fn mpa_from_cycles(total_particles: usize, mover_s: &[f64]) -> Result<f64> {
    if mover_s.is_empty() {
        return Err(Error::Metric("no cycles to average".into()));
    }
    mpa(
        total_particles,
        mover_s.iter().sum::<f64>() / mover_s.len() as f64,
    )
}

/// Drops the first `warmup` runs and returns the harmonic mean and the
/// sample standard deviation of the rest.
pub fn aggregate_runs(per_run_mpa: &[f64], warmup: usize) -> Result<(f64, f64)> {
    if per_run_mpa.len() <= warmup {
        return Err(Error::Metric(format!(
            "{} runs leave nothing after {warmup} warmup runs",
            per_run_mpa.len()
        )));
    }
    let kept = &per_run_mpa[warmup..];
    if let Some(bad) = kept.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Metric(format!("non-positive run value {bad}")));
    }
    let n = kept.len() as f64;
    let harmonic = n / kept.iter().map(|x| 1.0 / x).sum::<f64>();
    let stddev = if kept.len() < 2 {
        0.0
    } else {
        let mean = kept.iter().sum::<f64>() / n;
        (kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok((harmonic, stddev))
}

/// Speedup `S = perf_n / perf_1` and efficiency `E = S / n`.
pub fn speedup_efficiency(perf_1: f64, perf_n: f64, n: usize) -> Result<(f64, f64)> {
    if n == 0 || !(perf_1 > 0.0 && perf_n > 0.0 && perf_1.is_finite() && perf_n.is_finite()) {
        return Err(Error::Metric(format!(
            "speedup needs positive performance and workers, got {perf_1}, {perf_n}, {n}"
        )));
    }
    let s = perf_n / perf_1;
    Ok((s, s / n as f64))
}
