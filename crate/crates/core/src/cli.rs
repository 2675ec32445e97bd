//! Run orchestration: solve, residuals, diagnostics and the optional frequency, with
//! artifacts written under one directory per run; parameter sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Anchors, Problem, RunConfig};
use crate::diagnostics::{
    comparison_test, default_radii, estimate_exponent, free_boundary, free_boundary_nodes,
    ComparisonVerdict, ExponentFit, FitDegree,
};
use crate::energy::{MembraneSystem, ProblemSpec};
use crate::error::{Error, Result};
use crate::frequency::{
    classify_point, compute_frequency, extend_solution, geometric_radii,
    mollified_obstacle_extension, Classification, FrequencyParams, FrequencyReport, PointVerdict,
};
use crate::grid_kernel::{Grid, GridFunction, KernelKind, Point, TailModel};
use crate::io::{self, ArtifactDir};
use crate::obstacle::{contact_intervals, solve_obstacle_with, ObstacleProblemSpec};
use crate::solver::{solve_system, SolveReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;

/// Environment variable bounding the sweep worker count.
pub const WORKERS_ENV: &str = "MEMBRANES_WORKERS";

/// Overrides applied on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub anchors: Option<Anchors>,
    /// Turns the frequency stage on with defaults when the config has none.
    pub force_frequency: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub assemble_s: f64,
    pub solve_s: f64,
    pub diagnostics_s: f64,
    pub frequency_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnchorFits {
    pub anchor: Point,
    /// Fit of `u - φ` (obstacle) or `u1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first: Option<ExponentFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second: Option<ExponentFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrequencyOutcome {
    pub report: FrequencyReport,
    pub verdict: PointVerdict,
    pub curvature_exponent: f64,
}

/// Short per-run summary; one sweep row.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunSummary {
    pub converged: bool,
    pub max_residual: f64,
    pub exponent_1: Option<f64>,
    pub exponent_2: Option<f64>,
    pub gap: Option<f64>,
    pub classification: Option<Classification>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub dir: PathBuf,
    pub summary: RunSummary,
}

#[derive(Serialize)]
struct Report<'a> {
    solve: &'a SolveReport,
    contact_intervals: Vec<[f64; 2]>,
    free_boundary: Vec<Point>,
    exponents: &'a [AnchorFits],
    comparisons: &'a [ComparisonVerdict],
    #[serde(skip_serializing_if = "Option::is_none")]
    frequency: Option<&'a FrequencyOutcome>,
}

#[derive(Serialize)]
struct ManifestBody<'a> {
    config_sha256: String,
    config: &'a RunConfig,
    exit_code: i32,
    timings: &'a Timings,
    operator_cache_hits: Vec<bool>,
    warnings: &'a [String],
    assertions: &'a [Assertion],
    summary: &'a RunSummary,
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Expression(_) => EXIT_CONFIG,
        _ => EXIT_NOT_CONVERGED,
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Config(_) | Error::Expression(_) => e,
        other => Error::Config(other.to_string()),
    }
}

/// Reads, validates and runs a config file.
pub fn run_file(path: &Path, options: &RunOptions) -> RunOutcome {
    let fallback = options.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            return failed(
                fallback,
                EXIT_CONFIG,
                format!("cannot read {}: {e}", path.display()),
            )
        }
    };
    match RunConfig::from_toml(&text) {
        Ok(config) => run_config(&config, options),
        Err(e) => failed(fallback, EXIT_CONFIG, format!("{}: {e}", path.display())),
    }
}

fn failed(dir: PathBuf, exit_code: i32, message: String) -> RunOutcome {
    RunOutcome {
        exit_code,
        dir,
        summary: RunSummary {
            error: Some(message),
            ..RunSummary::default()
        },
    }
}

/// Runs a validated config; hard errors become exit codes, never panics.
pub fn run_config(config: &RunConfig, options: &RunOptions) -> RunOutcome {
    let mut config = config.clone();
    if let Some(a) = &options.anchors {
        config.analysis.exponent_anchors = a.clone();
    }
    if options.force_frequency {
        let fr = config
            .analysis
            .frequency
            .get_or_insert_with(Default::default);
        fr.enabled = true;
    }
    let dir = options
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.dir));
    if let Err(e) = config.validate() {
        return failed(dir, EXIT_CONFIG, e.to_string());
    }
    match execute(&config, &dir) {
        Ok(outcome) => outcome,
        Err(e) => failed(dir, code_of(&e), e.to_string()),
    }
}

enum Solution {
    Pair(crate::energy::MembranePair, ProblemSpec),
    Single(GridFunction, ObstacleProblemSpec),
}

fn execute(config: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut timings = Timings::default();
    let mut warnings = config.warnings();
    let solver = config.solver.build()?;
    let cache = config.output.cache_dir.as_ref().map(PathBuf::from);
    let problem = config.build()?;

    let t = Instant::now();
    let (solution, report, hits) = match problem {
        Problem::TwoMembranes(spec) => {
            let (op1, hit1) = io::cached_operator(cache.as_deref(), &spec.grid, &spec.kernel1)?;
            let (op2, hit2) = io::cached_operator(cache.as_deref(), &spec.grid, &spec.kernel2)?;
            let system = MembraneSystem::with_operators(&spec, op1, op2)?;
            timings.assemble_s = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let (pair, report) = solve_system(&system, &solver)?;
            timings.solve_s = t.elapsed().as_secs_f64();
            (Solution::Pair(pair, spec), report, vec![hit1, hit2])
        }
        Problem::Obstacle(spec) => {
            let (op, hit) = io::cached_operator(cache.as_deref(), spec.grid(), &spec.kernel)?;
            timings.assemble_s = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let (u, report) = solve_obstacle_with(&spec, &op, &solver)?;
            timings.solve_s = t.elapsed().as_secs_f64();
            (Solution::Single(u, spec), report, vec![hit])
        }
    };
    warnings.extend(report.warnings.iter().cloned());
    let grid: Arc<Grid> = match &solution {
        Solution::Pair(p, _) => p.u1.grid().clone(),
        Solution::Single(u, _) => u.grid().clone(),
    };

    let t = Instant::now();
    let fb_points = free_boundary(&report.contact, &grid);
    let intervals = if grid.dim() == 1 {
        contact_intervals(&report.contact, &grid)
    } else {
        Vec::new()
    };
    let anchors: Vec<Point> = match &config.analysis.exponent_anchors {
        Anchors::Keyword(k) if k == "none" => Vec::new(),
        Anchors::Keyword(_) => free_boundary_nodes(&report.contact, &grid)
            .iter()
            .map(|&i| grid.point(i))
            .collect(),
        Anchors::Points(pts) => pts
            .iter()
            .map(|q| [q[0], q.get(1).copied().unwrap_or(0.0)])
            .collect(),
    };
    let degree = config.degree()?;
    let radii = default_radii(grid.h());
    let fits: Vec<AnchorFits> = anchors
        .iter()
        .map(|&x0| fit_anchor(&solution, x0, degree, &radii))
        .collect();
    let comparisons = match &solution {
        Solution::Pair(_, spec) => config
            .analysis
            .comparison
            .iter()
            .map(|c| {
                comparison_test(
                    spec,
                    &shifted(spec, c.exterior_shift, c.forcing_shift)?,
                    &solver,
                )
            })
            .collect::<Result<Vec<_>>>()?,
        Solution::Single(..) => Vec::new(),
    };
    timings.diagnostics_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let frequency = match (&config.analysis.frequency, &solution) {
        (Some(fr), Solution::Single(u, spec)) if fr.enabled => {
            Some(frequency_stage(config, fr, u, spec, &report).map_err(config_error)?)
        }
        _ => None,
    };
    timings.frequency_s = t.elapsed().as_secs_f64();

    let mut artifacts = ArtifactDir::create(dir)?;
    match &solution {
        Solution::Pair(pair, _) => {
            io::membranes_csv(&mut artifacts, "solution.csv", pair, &report.contact)?
        }
        Solution::Single(u, spec) => io::obstacle_csv(
            &mut artifacts,
            "solution.csv",
            u,
            &spec.obstacle,
            &report.contact,
        )?,
    }
    for (k, f) in fits.iter().enumerate() {
        for (tag, fit) in [("1", &f.first), ("2", &f.second)] {
            if let Some(fit) = fit {
                artifacts.write_json(&format!("exponent_{k}_{tag}.json"), fit)?;
                io::exponent_csv(&mut artifacts, &format!("exponent_{k}_{tag}.csv"), fit)?;
            }
        }
    }
    if let Some(fr) = &frequency {
        artifacts.write_json("frequency.json", &fr.report)?;
        io::frequency_csv(&mut artifacts, "frequency.csv", &fr.report)?;
    }
    artifacts.write_json(
        "report.json",
        &Report {
            solve: &report,
            contact_intervals: intervals.clone(),
            free_boundary: fb_points.clone(),
            exponents: &fits,
            comparisons: &comparisons,
            frequency: frequency.as_ref(),
        },
    )?;

    let assertions = check_assertions(
        config,
        &solution,
        &grid,
        &fb_points,
        &fits,
        &comparisons,
        frequency.as_ref(),
    );
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let summary = RunSummary {
        converged: report.converged,
        max_residual: report.residuals.max(),
        exponent_1: mean(
            fits.iter()
                .filter_map(|f| f.first.as_ref().map(|x| x.exponent))
                .collect(),
        ),
        exponent_2: mean(
            fits.iter()
                .filter_map(|f| f.second.as_ref().map(|x| x.exponent))
                .collect(),
        ),
        gap: mean(fits.iter().filter_map(|f| f.gap).collect()),
        classification: frequency.as_ref().map(|f| f.verdict.classification),
        error: None,
    };
    let exit_code = if !report.converged {
        EXIT_NOT_CONVERGED
    } else if assertions.iter().any(|a| !a.passed) {
        EXIT_ASSERTION
    } else {
        EXIT_OK
    };
    timings.total_s = start.elapsed().as_secs_f64();
    let config_text = config.to_toml()?;
    artifacts.finish(&ManifestBody {
        config_sha256: io::sha256_hex(config_text.as_bytes()),
        config,
        exit_code,
        timings: &timings,
        operator_cache_hits: hits,
        warnings: &warnings,
        assertions: &assertions,
        summary: &summary,
    })?;
    Ok(RunOutcome {
        exit_code,
        dir: dir.to_path_buf(),
        summary,
    })
}

fn fit_anchor(solution: &Solution, x0: Point, degree: FitDegree, radii: &[f64]) -> AnchorFits {
    let mut errors = Vec::new();
    let mut fit = |u: &GridFunction| match estimate_exponent(u, x0, degree, radii) {
        Ok(f) => Some(f),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };
    let (first, second) = match solution {
        Solution::Pair(pair, _) => (fit(&pair.u1), fit(&pair.u2)),
        Solution::Single(u, spec) => match u.linear_combination(1.0, &spec.obstacle, -1.0) {
            Ok(w) => (fit(&w), None),
            Err(e) => {
                errors.push(e.to_string());
                (None, None)
            }
        },
    };
    let gap = match (&first, &second) {
        (Some(a), Some(b)) => Some(b.exponent - a.exponent),
        _ => None,
    };
    AnchorFits {
        anchor: x0,
        first,
        second,
        gap,
        errors,
    }
}

/// `spec` with exterior data raised by `lift` and both forcings lowered by `push`.
fn shifted(spec: &ProblemSpec, lift: f64, push: f64) -> Result<ProblemSpec> {
    let raise = |g: &GridFunction, c: f64| -> Result<GridFunction> {
        let tail = g.tail();
        let tail = if tail.exponent == 0.0 || tail.coeff == 0.0 {
            TailModel::constant(tail.eval(1.0) + c)
        } else if c == 0.0 {
            tail
        } else {
            return Err(Error::Config(
                "analysis.comparison: exterior shifts need constant tails".into(),
            ));
        };
        GridFunction::new(
            g.grid().clone(),
            g.values().iter().map(|v| v + c).collect(),
            tail,
        )
    };
    ProblemSpec::new(
        spec.kernel1.clone(),
        spec.kernel2.clone(),
        raise(&spec.f1, -push)?,
        raise(&spec.f2, -push)?,
        raise(&spec.exterior1, lift)?,
        raise(&spec.exterior2, lift)?,
    )
}

fn frequency_stage(
    config: &RunConfig,
    fr: &crate::config::run::FrequencySection,
    u: &GridFunction,
    spec: &ObstacleProblemSpec,
    report: &SolveReport,
) -> Result<FrequencyOutcome> {
    let grid = u.grid().clone();
    let s = match spec.kernel.kind() {
        KernelKind::LocalMatrix { .. } => {
            return Err(Error::Config(
                "analysis.frequency: needs a fractional kernel".into(),
            ));
        }
        _ => spec.kernel.order(),
    };
    if grid.interior().iter().any(|&i| spec.f.values()[i] != 0.0) {
        return Err(Error::Config("analysis.frequency: requires f = 0".into()));
    }
    let delta = config.problem.obstacle_delta.unwrap_or(1.0 - s);
    let defaults = FrequencyParams::defaults(s, delta);
    let center = match fr.at {
        Some(x) => x,
        None => {
            let nodes = free_boundary_nodes(&report.contact, &grid);
            let last = nodes.last().ok_or_else(|| {
                Error::Config("analysis.frequency: no contact point found".into())
            })?;
            grid.point(*last)[0]
        }
    };
    let params = FrequencyParams {
        alpha: fr.alpha.unwrap_or(defaults.alpha),
        epsilon: fr.epsilon.unwrap_or(defaults.epsilon),
        c0: fr.c0.unwrap_or(defaults.c0),
        r0: defaults.r0,
        center,
    };
    let h = grid.h();
    let field = extend_solution(u, s, fr.height, (h, h))?;
    let mollified = mollified_obstacle_extension(&spec.obstacle, &field)?;
    let radii = geometric_radii(fr.r_min, fr.r_max, fr.radii);
    let mut report = compute_frequency(&field, &mollified.field, &params, &radii)?;
    let verdict = classify_point(&report, s, params.alpha)?;
    report.classification = Some(verdict.classification);
    Ok(FrequencyOutcome {
        report,
        verdict,
        curvature_exponent: mollified.curvature_exponent,
    })
}

fn check_assertions(
    config: &RunConfig,
    solution: &Solution,
    grid: &Grid,
    fb: &[Point],
    fits: &[AnchorFits],
    comparisons: &[ComparisonVerdict],
    frequency: Option<&FrequencyOutcome>,
) -> Vec<Assertion> {
    let a = &config.analysis.assertions;
    let mut out = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        out.push(Assertion {
            name: name.into(),
            passed,
            detail,
        })
    };
    let h = grid.h();
    let first: &GridFunction = match solution {
        Solution::Pair(p, _) => &p.u1,
        Solution::Single(u, _) => u,
    };
    if let Some(expected) = &a.free_boundary {
        let tol = a.free_boundary_tol.unwrap_or(2.0) * h;
        let found: Vec<f64> = fb.iter().map(|p| p[0]).collect();
        let ok = found.len() == expected.len()
            && expected
                .iter()
                .all(|e| found.iter().any(|f| (f - e).abs() <= tol));
        push(
            "free_boundary",
            ok,
            format!("found {found:?}, expected {expected:?} within {tol}"),
        );
    }
    let band =
        |name: &str, band: [f64; 2], values: Vec<f64>, push: &mut dyn FnMut(&str, bool, String)| {
            let ok = !values.is_empty() && values.iter().all(|v| *v >= band[0] && *v <= band[1]);
            push(name, ok, format!("values {values:?}, band {band:?}"));
        };
    if let Some(b) = a.exponent_band {
        band(
            "exponent_band",
            b,
            fits.iter()
                .filter_map(|f| f.first.as_ref().map(|x| x.exponent))
                .collect(),
            &mut push,
        );
    }
    if let Some(b) = a.exponent_band_u2 {
        band(
            "exponent_band_u2",
            b,
            fits.iter()
                .filter_map(|f| f.second.as_ref().map(|x| x.exponent))
                .collect(),
            &mut push,
        );
    }
    if let Some(b) = a.gap_band {
        band(
            "gap_band",
            b,
            fits.iter().filter_map(|f| f.gap).collect(),
            &mut push,
        );
    }
    for (k, c) in comparisons.iter().enumerate() {
        push(
            &format!("comparison_{k}"),
            c.ordered,
            format!("worst gap {:e}, threshold {:e}", c.worst_gap, c.threshold),
        );
    }
    if let Some(limit) = a.max_frequency_defect {
        match frequency {
            Some(f) => push(
                "frequency_defect",
                f.report.max_defect <= limit,
                format!("defect {}", f.report.max_defect),
            ),
            None => push("frequency_defect", false, "frequency stage disabled".into()),
        }
    }
    if let Some(expected) = &a.classification {
        let got = frequency.map(|f| f.verdict.classification);
        let want = match expected.as_str() {
            "regular" => Classification::Regular,
            "singular" => Classification::Singular,
            _ => Classification::Undetermined,
        };
        push("classification", got == Some(want), format!("got {got:?}"));
    }
    if let Some(limit) = a.max_abs_solution {
        let worst = match solution {
            Solution::Pair(p, _) => p.u1.max_abs().max(p.u2.max_abs()),
            Solution::Single(u, _) => u.max_abs(),
        };
        push(
            "max_abs_solution",
            worst <= limit,
            format!("max |u| = {worst:e}"),
        );
    }
    if let Some(exact) = &a.exact {
        let err = grid
            .interior()
            .iter()
            .map(|&i| (first.values()[i] - exact.eval(grid.point(i))).abs())
            .fold(0.0f64, f64::max);
        let limit = a.max_error.unwrap_or(5.0 * h * h);
        push(
            "max_error",
            err <= limit,
            format!("error {err:e}, limit {limit:e}"),
        );
    }
    out
}

/// One swept parameter: dotted path and its values.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<f64>,
}

/// `path=v1,v2;other.path=v3`.
pub fn parse_sweep_spec(spec: &str) -> Result<Vec<SweepAxis>> {
    let mut out = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (path, values) = part.split_once('=').ok_or_else(|| {
            Error::Config(format!("sweep: expected 'name=v1,v2,...', got '{part}'"))
        })?;
        let values = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("sweep: '{v}' is not a number in '{part}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(SweepAxis {
            path: path.trim().to_string(),
            values,
        });
    }
    if out.is_empty() {
        return Err(Error::Config("sweep: empty parameter grid".into()));
    }
    Ok(out)
}

fn set_numeric(root: &mut toml::Value, path: &str, v: f64) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, key) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("sweep: '{path}' is not a config field")))?;
        let next = table
            .get_mut(*key)
            .ok_or_else(|| Error::Config(format!("sweep: unknown parameter '{path}'")))?;
        if k + 1 == parts.len() {
            *next = match next {
                toml::Value::Integer(_) if v.fract() == 0.0 => toml::Value::Integer(v as i64),
                toml::Value::Float(_) | toml::Value::Integer(_) => toml::Value::Float(v),
                _ => return Err(Error::Config(format!("sweep: '{path}' is not numeric"))),
            };
            return Ok(());
        }
        node = next;
    }
    Err(Error::Config(format!("sweep: unknown parameter '{path}'")))
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub exit_code: i32,
    pub dir: PathBuf,
    pub rows: Vec<(Vec<f64>, RunOutcome)>,
}

/// Worker count from the flag, else the environment, else the machine.
pub fn worker_count(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Runs the cartesian grid of `axes` over `config`, one directory per cell, and writes
/// `summary.csv`.
pub fn sweep(
    config: &RunConfig,
    axes: &[SweepAxis],
    out: Option<PathBuf>,
    workers: usize,
) -> Result<SweepOutcome> {
    let dir = out.unwrap_or_else(|| PathBuf::from(&config.output.dir));
    let base = config.to_value()?;
    let mut cells: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        cells = cells
            .into_iter()
            .flat_map(|c| {
                axis.values
                    .iter()
                    .map(move |&v| [c.clone(), vec![v]].concat())
            })
            .collect();
    }
    // every cell must be a valid config before anything runs
    let configs = cells
        .iter()
        .map(|values| {
            let mut value = base.clone();
            for (axis, &v) in axes.iter().zip(values) {
                set_numeric(&mut value, &axis.path, v)?;
            }
            RunConfig::from_value(value)
        })
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let outcomes: Vec<RunOutcome> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(k, c)| {
                let options = RunOptions {
                    out: Some(dir.join(format!("cell_{k:03}"))),
                    ..RunOptions::default()
                };
                run_config(c, &options)
            })
            .collect()
    });
    let mut artifacts = ArtifactDir::create(&dir)?;
    let mut header: Vec<&str> = vec!["cell"];
    header.extend(axes.iter().map(|a| a.path.as_str()));
    header.extend([
        "exit_code",
        "converged",
        "max_residual",
        "exponent_1",
        "exponent_2",
        "gap",
        "classification",
        "error",
    ]);
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    let rows: Vec<Vec<String>> = cells
        .iter()
        .zip(&outcomes)
        .enumerate()
        .map(|(k, (values, o))| {
            let mut row = vec![k.to_string()];
            row.extend(values.iter().map(|v| format!("{v:?}")));
            let s = &o.summary;
            row.extend([
                o.exit_code.to_string(),
                s.converged.to_string(),
                format!("{:?}", s.max_residual),
                opt(s.exponent_1),
                opt(s.exponent_2),
                opt(s.gap),
                s.classification
                    .map(|c| format!("{c:?}"))
                    .unwrap_or_default(),
                s.error.clone().unwrap_or_default(),
            ]);
            row
        })
        .collect();
    artifacts.write_csv("summary.csv", &header, &rows)?;
    let exit_code = outcomes
        .iter()
        .map(|o| o.exit_code)
        .max()
        .unwrap_or(EXIT_OK);
    let axes_out: BTreeMap<&str, &Vec<f64>> =
        axes.iter().map(|a| (a.path.as_str(), &a.values)).collect();
    artifacts.finish(&serde_json::json!({
        "kind": "sweep",
        "axes": axes_out,
        "cells": cells.len(),
        "workers": workers,
        "exit_code": exit_code,
    }))?;
    Ok(SweepOutcome {
        exit_code,
        dir,
        rows: cells.into_iter().zip(outcomes).collect(),
    })
}

/// `sweep` from a config file and a grid spec; config problems give exit 2.
pub fn sweep_file(path: &Path, spec: &str, out: Option<PathBuf>, workers: usize) -> SweepOutcome {
    let dir = out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let result = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
        .and_then(|text| RunConfig::from_toml(&text))
        .and_then(|config| {
            let axes = parse_sweep_spec(spec)?;
            sweep(&config, &axes, out, workers)
        });
    match result {
        Ok(o) => o,
        Err(e) => {
            let code = code_of(&e);
            SweepOutcome {
                exit_code: code,
                dir: dir.clone(),
                rows: vec![(Vec::new(), failed(dir, code, e.to_string()))],
            }
        }
    }
}

/// `"auto"` or points `x` / `x,y`, several separated by `;`.
pub fn parse_anchor_spec(spec: &str) -> Result<Anchors> {
    if spec.trim() == "auto" {
        return Ok(Anchors::default());
    }
    let pts = spec
        .split(';')
        .map(|p| {
            p.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("--at: '{v}' is not a number")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Anchors::Points(pts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_specs_parse() {
        let axes = parse_sweep_spec("problem.kernel2.s=0.5,0.7; problem.nodes=17").unwrap();
        assert_eq!(axes.len(), 2);
        assert_eq!(axes[0].values, vec![0.5, 0.7]);
        assert!(parse_sweep_spec("nope").is_err());
        assert!(parse_sweep_spec("a=1,x").is_err());
    }

    #[test]
    fn anchor_specs_parse() {
        assert_eq!(parse_anchor_spec("auto").unwrap(), Anchors::default());
        assert_eq!(
            parse_anchor_spec("0.5;-0.25").unwrap(),
            Anchors::Points(vec![vec![0.5], vec![-0.25]])
        );
        assert!(parse_anchor_spec("a").is_err());
    }
}
