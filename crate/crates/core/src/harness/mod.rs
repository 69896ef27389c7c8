//! Configuration, experiment runs, sweeps and plots.

mod config;
mod plot;
mod run;
mod sweep;

pub use config::{
    Auto, AlgorithmSection, GossipChoice, InnerChoice, ProblemKind, ProblemSection, RunConfig, RunSection,
    SpectrumKind, StopChoice, SweepSection, TopologySection,
};
pub use plot::{emit_plot, plot_coordinates, read_telemetry_csv, render_svg};
pub use run::{assemble, auto_gossip_steps, auto_lambda, run_experiment, Experiment, Resolved, RunRecord};
pub use sweep::{apply_override, run_sweep, sweep_summary_csv, write_sweep};
