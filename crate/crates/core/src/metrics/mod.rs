//! Scoring and statistics: accuracy tables, confidence intervals, error
//! consistency, Fréchet distance and rank correlation.

mod accuracy;
mod frechet;
mod interval;
mod kappa;
mod kendall;
mod log;

pub use accuracy::{
    accuracy_table, benchmark_score, best_observers, laion_c_score, render_benchmark_table, write_accuracy_csv,
    AccuracyTable, BenchmarkRow, BestObservers, GroupBy, GroupKey, LaionCScore, Tally, BENCHMARK_COLUMN_ORDER,
};
pub use frechet::{fit_featureset, frechet_distance, read_features, write_features, FeatureSet, FEATURE_MAGIC};
pub use interval::wilson_interval;
pub use kappa::{error_consistency, ErrorConsistency, Kappa};
pub use kendall::kendall_tau_b;
pub use log::{read_logs, Observation, ObservationLog, ObservationRow};
