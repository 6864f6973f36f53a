//! Benchmark targets, synthetic and CSV series, and windowing.

pub mod csv;
pub mod functions;
pub mod series;
pub mod windows;

pub use self::csv::load_csv_series;
pub use functions::{builtin_target, sample_dataset, Dataset, TargetFunction, TargetName};
pub use series::{generate_series, SeriesSpec, APPENDIX_COEFFS};
pub use windows::{make_windows, MinMax, Split, WindowDataset};
