//! Data-generating processes and Monte Carlo power studies.

mod dgp;
mod power;
mod presets;

pub use dgp::{gen_mean_shift, gen_move_stretch, gen_one_factor, FactorConfig, MeanShiftConfig, MoveStretchConfig};
pub use power::{
    ecdf_csv, move_stretch_grid, pvalue_ecdf, run_power_study, run_replications, EcdfSeries, PowerCell,
    PowerStudyConfig, PowerTable, PowerTest, TestSeries, MIN_REPLICATIONS,
};
pub use presets::{gen_example_preset, Preset};
