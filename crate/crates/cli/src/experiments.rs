//! Preset experiments. Each writes its artifacts and a `manifest.json`
//! listing the files and headline metrics.

use std::path::Path;

use geotomo::Formula;
use serde_json::{json, Map, Value};

use crate::commands::{invert_and_write, k_grid, phantom, synthesize, terminator_csv, terminator_sweep};
use crate::config::{RawConfig, RunConfig};
use crate::output::OutDir;
use crate::{CliError, Experiment};

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Cpc => "cpc",
            Experiment::Cnc => "cnc",
            Experiment::NonsimpleEquator => "nonsimple-equator",
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
            Experiment::TerminatorSweep => "terminator-sweep",
        }
    }

    pub fn default_n(self) -> usize {
        match self {
            Experiment::Cpc | Experiment::Cnc => 200,
            Experiment::NonsimpleEquator => 160,
            Experiment::Exp1 | Experiment::Exp2 | Experiment::Exp3 => 150,
            Experiment::TerminatorSweep => 128,
        }
    }
}

struct Case {
    name: String,
    raw: RawConfig,
}

fn raw(pairs: &[(&str, String)]) -> RawConfig {
    let mut r = RawConfig::default();
    for (k, v) in pairs {
        r.set(k, v);
    }
    r
}

fn curvature_cases(kind: &str, second_domain: (&str, &str)) -> Vec<Case> {
    let mut cases = Vec::new();
    for (dname, dkind) in [("circle", "circle"), second_domain] {
        for r in [1.2, 2.0] {
            let mut c = raw(&[
                ("metric.kind", kind.into()),
                ("metric.R", r.to_string()),
                ("domain.kind", dkind.into()),
                ("phantom.kind", "disc_pack".into()),
            ]);
            match dkind {
                "ellipse" => {
                    c.set("domain.a", 1.0);
                    c.set("domain.b", 0.8);
                }
                "perturbed" => {
                    c.set("domain.a", 1.0);
                    c.set("domain.b", 0.05);
                }
                _ => {}
            }
            cases.push(Case { name: format!("R{r}_{dname}"), raw: c });
        }
    }
    cases
}

fn lens_cases(phantom: &str) -> Vec<Case> {
    [0.3, 0.6, 1.2]
        .into_iter()
        .map(|k| Case {
            name: format!("k{k}"),
            raw: raw(&[
                ("metric.kind", "lens".into()),
                ("metric.k", k.to_string()),
                ("metric.sigma", "0.25".into()),
                ("metric.center_x", "0.2".into()),
                ("metric.center_y", "0".into()),
                ("domain.kind", "circle".into()),
                ("phantom.kind", phantom.into()),
                ("solver.iterations", "9".into()),
            ]),
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    Some(v[v.len() / 2])
}

fn run_cases(
    out: &mut OutDir,
    cases: Vec<Case>,
    n: usize,
    formula: Formula,
    experiment: &str,
) -> Result<Map<String, Value>, CliError> {
    let mut metrics = Map::new();
    for mut case in cases {
        case.raw.set("grid.n", n);
        case.raw.set("io.pgm", "true");
        let cfg = RunConfig::from_raw(&case.raw)?;
        let ph = phantom(&cfg)?;
        let data = synthesize(&cfg, &ph, formula)?;
        let prefix = format!("{}/", case.name);
        out.grid(&format!("{prefix}phantom.csv"), &ph.grid)?;
        out.fanbeam(&format!("{prefix}fanbeam.csv"), &data, geotomo::io::FANBEAM_HEADER)?;
        let report = invert_and_write(out, &prefix, &cfg, &data, formula, Some(&ph.grid), experiment)?;
        let errs = &report.per_iteration_field_error;
        let mut m = Map::new();
        m.insert("rel_l2_field".into(), json!(errs.first()));
        if errs.len() > 1 {
            m.insert("rel_l2_field_final".into(), json!(errs.last()));
            m.insert("rel_l2_field_min".into(), json!(errs.iter().copied().fold(f64::INFINITY, f64::min)));
        }
        if experiment == "nonsimple-equator" {
            let err = report.result.abs_diff(&ph.grid)?;
            let (mut left, mut center) = (Vec::new(), Vec::new());
            for k in err.inside_indices() {
                let [x, _] = cfg.grid_spec()?.node(k % n, k / n);
                if x < -0.6 {
                    left.push(err.values[k]);
                } else if x.abs() < 0.3 {
                    center.push(err.values[k]);
                }
            }
            let (l, c) = (median(left), median(center));
            m.insert("median_error_left".into(), json!(l));
            m.insert("median_error_center".into(), json!(c));
            if let (Some(l), Some(c)) = (l, c) {
                m.insert("median_ratio".into(), json!(l / c));
            }
        }
        metrics.insert(case.name, Value::Object(m));
    }
    Ok(metrics)
}

/// Runs `experiment` at resolution `n` (or its default) into `out_root` and
/// returns the manifest.
pub fn reproduce(experiment: Experiment, out_root: &Path, n: Option<usize>) -> Result<Value, CliError> {
    let n = n.unwrap_or(experiment.default_n());
    let name = experiment.name();
    let mut out = OutDir::create(out_root)?;
    let metrics = match experiment {
        Experiment::Cpc => run_cases(&mut out, curvature_cases("const_pos", ("ellipse", "ellipse")), n, Formula::Frc, name)?,
        Experiment::Cnc => {
            run_cases(&mut out, curvature_cases("const_neg", ("perturbed", "perturbed")), n, Formula::Frc, name)?
        }
        Experiment::NonsimpleEquator => {
            let case = Case {
                name: "R1_ellipse".into(),
                raw: raw(&[
                    ("metric.kind", "const_pos".into()),
                    ("metric.R", "1".into()),
                    ("domain.kind", "ellipse".into()),
                    ("domain.a", "1.2".into()),
                    ("domain.b", "0.8".into()),
                    ("phantom.kind", "smooth_bumps".into()),
                ]),
            };
            run_cases(&mut out, vec![case], n, Formula::Frc, name)?
        }
        Experiment::Exp1 => run_cases(&mut out, lens_cases("smooth_bumps"), n, Formula::Frc, name)?,
        Experiment::Exp2 => run_cases(&mut out, lens_cases("smooth_bumps"), n, Formula::Hrc, name)?,
        Experiment::Exp3 => run_cases(&mut out, lens_cases("disc_pack"), n, Formula::Hrc, name)?,
        Experiment::TerminatorSweep => {
            let mut r = RawConfig::default();
            r.set("metric.sigma", 0.25);
            r.set("jacobi.n_beta", 2 * n);
            r.set("jacobi.n_alpha", n);
            let rows = terminator_sweep(&r, &k_grid(0.05, 1.25, 31)?)?;
            out.text("terminator.csv", &terminator_csv(&rows))?;
            let mut m = Map::new();
            if let Some(w) = rows.windows(2).find(|w| (w[0].1 - 1.0) * (w[1].1 - 1.0) <= 0.0 && w[0].1 != w[1].1) {
                let ((k0, b0), (k1, b1)) = (w[0], w[1]);
                m.insert("crossing_k_lo".into(), json!(k0));
                m.insert("crossing_k_hi".into(), json!(k1));
                m.insert("crossing_k".into(), json!(k0 + (1.0 - b0) * (k1 - k0) / (b1 - b0)));
            }
            m
        }
    };
    let manifest = json!({
        "experiment": name,
        "n": n,
        "files": out.relative_files(),
        "metrics": metrics,
    });
    out.json("manifest.json", &manifest)?;
    Ok(manifest)
}
