// A run driven by a TOML config, as the `solve` subcommand does it.

use membranes::cli::{run_config, RunOptions, RunOutcome};
use membranes::config::RunConfig;

const CONFIG: &str = r#"
[problem]
mode = "obstacle"
nodes = 257
kernel = { kind = "local" }
f = "2"
obstacle = "0"
exterior = "0.25"

[solver]
method = "active_set"

[analysis]
exponent_anchors = "auto-free-boundary"
exponent_degree = "linear"

[analysis.assert]
free_boundary = [-0.5, 0.5]
exact = "pos(|x| - 0.5)^2"
"#;

/// Runs the config into a fresh directory and returns the outcome.
pub fn run_example() -> membranes::Result<RunOutcome> {
    let config = RunConfig::from_toml(CONFIG)?;
    let out = tempfile::tempdir().map_err(|e| membranes::Error::Internal(e.to_string()))?;
    let outcome = run_config(&config, &RunOptions { out: Some(out.path().to_path_buf()), ..RunOptions::default() });
    let s = &outcome.summary;
    println!("exit {} converged {} max residual {:.2e}", outcome.exit_code, s.converged, s.max_residual);
    let mut files: Vec<String> = std::fs::read_dir(out.path())
        .map_err(|e| membranes::Error::Internal(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    println!("artifacts: {}", files.join(", "));
    Ok(outcome)
}

fn main() -> membranes::Result<()> {
    run_example().map(|_| ())
}
