// Sweep the order of the second membrane and read the exponents off the summary rows.

use membranes::cli::{parse_sweep_spec, sweep};
use membranes::config::RunConfig;

const BASE: &str = r#"
[problem]
mode = "two_membranes"
nodes = 257
kernel1 = { kind = "fractional", s = 0.3 }
kernel2 = { kind = "fractional", s = 0.7 }
f1 = "2"
f2 = "-1"
exterior1 = "0.3"
exterior2 = "-0.3"

[solver]
method = "alternating_obstacle"

[analysis]
exponent_anchors = "none"
"#;

/// Returns `(s2, converged, max residual)` for each cell.
pub fn run_example() -> membranes::Result<Vec<(f64, bool, f64)>> {
    let config = RunConfig::from_toml(BASE)?;
    let axes = parse_sweep_spec("problem.kernel2.s=0.5,0.7,0.9")?;
    let out = tempfile::tempdir().map_err(|e| membranes::Error::Internal(e.to_string()))?;
    let outcome = sweep(&config, &axes, Some(out.path().to_path_buf()), 2)?;
    let rows: Vec<(f64, bool, f64)> = outcome
        .rows
        .iter()
        .map(|(values, o)| (values[0], o.summary.converged, o.summary.max_residual))
        .collect();
    for (s2, converged, residual) in &rows {
        println!("s2 = {s2}: converged {converged}, max residual {residual:.2e}");
    }
    Ok(rows)
}

fn main() -> membranes::Result<()> {
    run_example().map(|_| ())
}
