//! Measurement methodology: throughput metrics, repetitions with warmup,
//! scaling sweeps and phase profiles.

mod harness;
mod metrics;

pub use harness::{
    phase_profile, ppc_sweep, profile_of, run_bench, scaling_summary, scaling_sweep, summary_rows,
    write_bench_csv, write_profile_csv, write_summary_csv, BenchRecord, CycleRecord, ProfileRecord,
    ScalingRecord, SummaryRow, BENCH_HEADER, PROFILE_HEADER, SUMMARY_HEADER, WARMUP_RUNS,
};
pub use metrics::{aggregate_runs, mpa, mpa_from_cycles, speedup_efficiency};
