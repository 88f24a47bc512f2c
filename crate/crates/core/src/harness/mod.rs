//! Scenario presets, replicated experiments, regret reports and figure files.

pub mod experiment;
pub mod figures;
pub mod scenario;

pub use experiment::{run_experiment, sweep, Estimate, RegretReport, RunRecord};
pub use figures::emit_figures;
pub use scenario::{load_scenario, preset, preset_names, Scenario};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "MODSIM_OUT";

/// Output directory: explicit argument, else `MODSIM_OUT`, else `out`.
pub fn output_dir(explicit: Option<&std::path::Path>) -> std::path::PathBuf {
    if let Some(dir) = explicit {
        return dir.to_path_buf();
    }
    std::env::var_os(OUT_DIR_ENV)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::path::PathBuf::from("out"))
}
