//! Subcommand implementations and the pipeline pieces shared with presets.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use geotomo::io::{read_fanbeam, FANBEAM_HEADER, PREPPED_HEADER};
use geotomo::{
    beta_conjugate_locus, forward_i0, forward_i1_xperp, is_beta_free, make_phantom, neumann_invert,
    precompute_basepoints, prep, terminator, trace_from_influx, FanBeamData, Formula, InfluxGrid, Phantom,
    PhantomSpec, ReconstructionReport, ScalarGrid, TerminatorSettings,
};

use crate::config::{RawConfig, RunConfig};
use crate::output::{Metrics, OutDir};
use crate::{CliError, Command, Common, Transform};

/// Runs `f` on a pool of `threads` workers (0 = all available).
pub fn with_threads<T>(threads: usize, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    pool.install(f)
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::from_raw(&RawConfig::load(&common.config)?)?;
    if let Some(dir) = &common.out_dir {
        cfg.out_dir = dir.clone();
    }
    Ok(cfg)
}

pub fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Reproduce { experiment, out_dir, n, threads } => {
            with_threads(threads, || crate::experiments::reproduce(experiment, &out_dir, n).map(|_| ()))
        }
        Command::Terminator { config, out_dir, k_min, k_max, k_steps } => {
            let raw = match &config {
                Some(p) => RawConfig::load(p)?,
                None => RawConfig::default(),
            };
            let threads = RunConfig::threads_of(&raw)?;
            let out = out_dir.or_else(|| RunConfig::out_dir_of(&raw)).unwrap_or_else(|| "out".into());
            with_threads(threads, || {
                let ks = k_grid(k_min, k_max, k_steps)?;
                let rows = terminator_sweep(&raw, &ks)?;
                let mut dir = OutDir::create(&out)?;
                dir.text("terminator.csv", &terminator_csv(&rows))?;
                Ok(())
            })
        }
        Command::Phantom(common) => {
            let cfg = load(&common)?;
            with_threads(cfg.threads, || cmd_phantom(&cfg))
        }
        Command::Geodesics(common) => {
            let cfg = load(&common)?;
            with_threads(cfg.threads, || cmd_geodesics(&cfg))
        }
        Command::Forward { common, transform } => {
            let cfg = load(&common)?;
            with_threads(cfg.threads, || cmd_forward(&cfg, transform))
        }
        Command::Invert { common, formula, iterations } => {
            let mut cfg = load(&common)?;
            if let Some(it) = iterations {
                cfg.iterations = it;
            }
            with_threads(cfg.threads, || {
                let mut out = OutDir::create(&cfg.out_dir)?;
                let (data, truth) = match &cfg.data {
                    Some(path) => (read_data(path)?, cfg.phantom.map(|_| phantom(&cfg)).transpose()?.map(|p| p.grid)),
                    None => {
                        let ph = phantom(&cfg)?;
                        (synthesize(&cfg, &ph, formula.into())?, Some(ph.grid))
                    }
                };
                invert_and_write(&mut out, "", &cfg, &data, formula.into(), truth.as_ref(), "invert").map(|_| ())
            })
        }
        Command::Simplicity { common, beta } => {
            let cfg = load(&common)?;
            with_threads(cfg.threads, || cmd_simplicity(&cfg, beta))
        }
    }
}

pub fn phantom(cfg: &RunConfig) -> Result<Phantom, CliError> {
    let kind = cfg.phantom.ok_or_else(|| CliError::Config("missing required key 'phantom.kind'".into()))?;
    let spec = if cfg.phantom_random {
        PhantomSpec::random(kind, &cfg.manifold.domain, cfg.seed)
    } else {
        PhantomSpec::default_for(kind)
    };
    let ph = make_phantom(&spec, cfg.grid_spec()?, cfg.manifold.domain)?;
    for w in &ph.warnings {
        eprintln!("geotomo: warning: {w}");
    }
    Ok(ph)
}

/// Synthetic data for `formula`: `I0 f` for frc, `I1[X_perp h]` for hrc.
pub fn synthesize(cfg: &RunConfig, ph: &Phantom, formula: Formula) -> Result<FanBeamData, CliError> {
    let grid = InfluxGrid::build(cfg.n)?;
    let params = cfg.trace_params()?;
    Ok(match formula {
        Formula::Frc => forward_i0(&cfg.manifold, &ph.sampler, &grid, &params)?,
        Formula::Hrc => forward_i1_xperp(&cfg.manifold, &ph.sampler, &grid, &params)?,
    })
}

fn read_data(path: &Path) -> Result<FanBeamData, CliError> {
    let f = File::open(path).map_err(|e| CliError::Config(format!("io.data: cannot open {}: {e}", path.display())))?;
    let (data, header) = read_fanbeam(BufReader::new(f))?;
    if header != FANBEAM_HEADER {
        return Err(geotomo::GeoError::Format(format!("{}: expected '{FANBEAM_HEADER}'", path.display())).into());
    }
    Ok(data)
}

/// Inverts `data`, writing the reconstruction, error grid, prepped data and
/// metrics under `prefix`. A trapped abort is reported after the partial
/// results are on disk.
pub fn invert_and_write(
    out: &mut OutDir,
    prefix: &str,
    cfg: &RunConfig,
    data: &FanBeamData,
    formula: Formula,
    truth: Option<&ScalarGrid>,
    experiment: &str,
) -> Result<ReconstructionReport, CliError> {
    let params = cfg.trace_params()?;
    let table = precompute_basepoints(&cfg.manifold, cfg.grid_spec()?, cfg.n_theta, &params)?;
    let failed = table.count_failed();
    if failed > 0 {
        eprintln!("geotomo: warning: {failed} basepoint table entries failed and contribute zero");
    }
    let report = neumann_invert(data, formula, cfg.iterations, &cfg.manifold, &table, &params, truth)?;
    out.fanbeam(&format!("{prefix}prepped.csv"), &prep(data, formula), PREPPED_HEADER)?;
    out.grid(&format!("{prefix}reconstruction.csv"), &report.result)?;
    let error = truth.map(|t| report.result.abs_diff(t)).transpose()?;
    if let Some(e) = &error {
        out.grid(&format!("{prefix}error.csv"), e)?;
    }
    if cfg.pgm {
        out.pgm(&format!("{prefix}reconstruction.pgm"), &report.result)?;
        if let Some(e) = &error {
            out.pgm(&format!("{prefix}error.pgm"), e)?;
        }
    }
    out.json(&format!("{prefix}metrics.json"), &Metrics::from_report(experiment, &report))?;
    if let Some(e) = &report.aborted {
        return Err(CliError::Geo(clone_error(e)));
    }
    Ok(report)
}

fn clone_error(e: &geotomo::GeoError) -> geotomo::GeoError {
    match e {
        geotomo::GeoError::Trapped(t) => geotomo::GeoError::Trapped(t.clone()),
        other => geotomo::GeoError::NotApplicable(other.to_string()),
    }
}

fn cmd_phantom(cfg: &RunConfig) -> Result<(), CliError> {
    let ph = phantom(cfg)?;
    let mut out = OutDir::create(&cfg.out_dir)?;
    out.grid("phantom.csv", &ph.grid)?;
    if cfg.pgm {
        out.pgm("phantom.pgm", &ph.grid)?;
    }
    Ok(())
}

fn cmd_geodesics(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = InfluxGrid::new(cfg.geodesics_n_beta, cfg.geodesics_n_alpha)?;
    let params = cfg.trace_params()?;
    let mut out = OutDir::create(&cfg.out_dir)?;
    let mut index = String::from("beta,alpha,tau,exit_x,exit_y\n");
    for idx in 0..grid.len() {
        let c = grid.coord(idx);
        let path = trace_from_influx(&cfg.manifold, c, &params)?;
        let _ = writeln!(
            index,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            c.beta, c.alpha, path.tau, path.exit_point[0], path.exit_point[1]
        );
        let mut csv = String::from("t,x,y,theta\n");
        for (t, p) in path.times().zip(&path.samples) {
            let _ = writeln!(csv, "{t:.16e},{:.16e},{:.16e},{:.16e}", p.x, p.y, p.theta);
        }
        out.text(&format!("geodesics/geodesic_{idx:05}.csv"), &csv)?;
    }
    out.text("geodesics/index.csv", &index)?;
    Ok(())
}

fn cmd_forward(cfg: &RunConfig, transform: Transform) -> Result<(), CliError> {
    let ph = phantom(cfg)?;
    let formula = match transform {
        Transform::I0 => Formula::Frc,
        Transform::I1 => Formula::Hrc,
    };
    let data = synthesize(cfg, &ph, formula)?;
    let mut out = OutDir::create(&cfg.out_dir)?;
    out.fanbeam("fanbeam.csv", &data, FANBEAM_HEADER)?;
    Ok(())
}

fn cmd_simplicity(cfg: &RunConfig, beta: f64) -> Result<(), CliError> {
    let grid = InfluxGrid::new(cfg.jacobi_n_beta, cfg.jacobi_n_alpha)?;
    let params = cfg.trace_params()?;
    let free = is_beta_free(&cfg.manifold, beta, &grid, &params)?;
    let locus = beta_conjugate_locus(&cfg.manifold, beta, &grid, &params)?;
    let mut csv = String::from("beta,alpha,t,x,y\n");
    for (c, p) in &locus {
        let _ = writeln!(csv, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", c.beta, c.alpha, p.t, p.position[0], p.position[1]);
    }
    let mut out = OutDir::create(&cfg.out_dir)?;
    out.text("conjugate_points.csv", &csv)?;
    out.json(
        "simplicity.json",
        &serde_json::json!({ "beta": beta, "beta_free": free, "conjugate_points": locus.len() }),
    )?;
    println!("beta_free={free}");
    Ok(())
}

/// `k_steps` equispaced values from `k_min` to `k_max` inclusive.
pub fn k_grid(k_min: f64, k_max: f64, k_steps: usize) -> Result<Vec<f64>, CliError> {
    if !(k_min.is_finite() && k_max.is_finite() && k_min >= 0.0 && k_max >= k_min) || k_steps == 0 {
        return Err(CliError::Config(format!("invalid k sweep [{k_min}, {k_max}] with {k_steps} steps")));
    }
    if k_steps == 1 {
        return Ok(vec![k_min]);
    }
    Ok((0..k_steps).map(|i| k_min + (k_max - k_min) * i as f64 / (k_steps - 1) as f64).collect())
}

/// Terminator of the lens `metric.k = k` for each `k`; other keys come from
/// `raw`, with the unit disk and `solver.dt = 0.01` as defaults.
pub fn terminator_sweep(raw: &RawConfig, ks: &[f64]) -> Result<Vec<(f64, f64)>, CliError> {
    let mut raw = raw.clone();
    match raw.entries.get("metric.kind").map(String::as_str) {
        None | Some("lens") => raw.set("metric.kind", "lens"),
        Some(other) => return Err(CliError::Config(format!("terminator sweeps need metric.kind = lens, got '{other}'"))),
    }
    raw.entries.entry("domain.kind".into()).or_insert_with(|| "circle".into());
    raw.entries.entry("solver.dt".into()).or_insert_with(|| "0.01".into());
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        raw.set("metric.k", k);
        let cfg = RunConfig::from_raw(&raw)?;
        let grid = InfluxGrid::new(cfg.jacobi_n_beta, cfg.jacobi_n_alpha)?;
        let settings = TerminatorSettings { eps: cfg.jacobi_eps, beta_cap: cfg.jacobi_cap, ..Default::default() };
        let t = terminator(&cfg.manifold, &settings, &grid, &cfg.trace_params()?)?;
        rows.push((k, t.value));
    }
    Ok(rows)
}

pub fn terminator_csv(rows: &[(f64, f64)]) -> String {
    let mut csv = String::from("k,beta_ter\n");
    for (k, b) in rows {
        let _ = writeln!(csv, "{k:.6},{b:.6}");
    }
    csv
}
