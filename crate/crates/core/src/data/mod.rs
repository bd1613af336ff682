//! Data ingestion, partition construction, synthetic data, and artifact
//! writers.

mod io;
mod partition;
mod simulate;

pub use io::{
    read_dataset, read_dataset_path, read_samples_csv, summary_config, write_cumulative_hazard_csv,
    write_dataset_csv, write_grid_csv, write_hazard_csv, write_outputs, write_samples_csv,
    write_summary_json, write_survival_csv, SampleTable, SummaryConfig, SummaryDiagnostics,
    SummaryDoc, SummaryFit,
};
pub use partition::build_partition;
pub use simulate::{
    simulate, Censoring, CovariateSpec, SimulationReport, SimulationSpec,
};
