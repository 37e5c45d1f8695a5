//! Configuration, experiment execution, archives, snapshots and plot data.

mod archive;
mod config;
mod snapshot;

pub use archive::{
    config_digest, describe, emit_plot_data, emit_reports, fmt_f64, load_archived_config,
    report_archive, run_experiment, summary, write_archive, ArchiveCheck, CsvTable, Manifest,
    ManifestFile, PlotSeries, Refusal, RunArchive, Timings, CONFIG_FILE, MANIFEST,
};
pub use config::{
    parse_config, CheckSpec, ChemoSpec, ExperimentConfig, ExperimentKind, FieldSpec, GridSpec,
    HeatSpec, ReportSpec, SweepSpec,
};
pub use snapshot::{
    decode_snapshot, encode_snapshot, read_snapshot, write_snapshot, MAGIC, VERSION,
};
