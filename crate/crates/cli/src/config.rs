//! Flat `key = value` configuration files with `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use geotomo::{GridSpec, Manifold, Metric, PhantomKind, StarShapedDomain, TraceParams};

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "metric.kind",
    "metric.R",
    "metric.k",
    "metric.sigma",
    "metric.center_x",
    "metric.center_y",
    "domain.kind",
    "domain.R",
    "domain.a",
    "domain.b",
    "grid.n",
    "grid.n_theta",
    "solver.dt",
    "solver.max_steps",
    "solver.iterations",
    "phantom.kind",
    "phantom.random",
    "seed",
    "io.out_dir",
    "io.data",
    "io.pgm",
    "threads",
    "jacobi.n_beta",
    "jacobi.n_alpha",
    "jacobi.eps",
    "jacobi.cap",
    "geodesics.n_beta",
    "geodesics.n_alpha",
];

/// Raw key-value pairs; later assignments win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key or value", lineno + 1)));
            }
            if !KNOWN_KEYS.contains(&k) {
                return Err(CliError::Config(format!("line {}: unknown key '{k}'", lineno + 1)));
            }
            entries.insert(k.to_string(), v.to_string());
        }
        Ok(RawConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.str(key)
            .map(|v| v.parse::<T>().map_err(|_| CliError::Config(format!("{key}: cannot parse '{v}'"))))
            .transpose()
    }

    fn req<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.num(key)?.ok_or_else(|| CliError::Config(format!("missing required key '{key}'")))
    }

    fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.str(key) {
            None | Some("false") | Some("0") | Some("no") => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some(v) => Err(CliError::Config(format!("{key}: expected true/false, got '{v}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifold: Manifold,
    pub n: usize,
    pub n_theta: usize,
    pub dt: f64,
    pub max_steps: usize,
    pub iterations: usize,
    pub phantom: Option<PhantomKind>,
    pub phantom_random: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: Option<PathBuf>,
    pub pgm: bool,
    pub threads: usize,
    pub jacobi_n_beta: usize,
    pub jacobi_n_alpha: usize,
    pub jacobi_eps: f64,
    pub jacobi_cap: f64,
    pub geodesics_n_beta: usize,
    pub geodesics_n_alpha: usize,
}

fn invalid(e: geotomo::GeoError) -> CliError {
    CliError::Config(e.to_string())
}

fn parse_metric(raw: &RawConfig) -> Result<Metric, CliError> {
    let kind = raw.str("metric.kind").ok_or_else(|| CliError::Config("missing required key 'metric.kind'".into()))?;
    let m = match kind {
        "euclidean" => Metric::Euclidean,
        "const_pos" => Metric::const_pos(raw.req("metric.R")?).map_err(invalid)?,
        "const_neg" => Metric::const_neg(raw.req("metric.R")?).map_err(invalid)?,
        "lens" => {
            let center = [raw.num("metric.center_x")?.unwrap_or(0.0), raw.num("metric.center_y")?.unwrap_or(0.0)];
            Metric::lens(raw.req("metric.k")?, raw.num("metric.sigma")?.unwrap_or(0.25), center).map_err(invalid)?
        }
        other => return Err(CliError::Config(format!("metric.kind: unknown metric '{other}'"))),
    };
    Ok(m)
}

fn parse_domain(raw: &RawConfig) -> Result<StarShapedDomain, CliError> {
    let kind = raw.str("domain.kind").ok_or_else(|| CliError::Config("missing required key 'domain.kind'".into()))?;
    let d = match kind {
        "circle" => StarShapedDomain::circle(raw.num("domain.R")?.unwrap_or(1.0)).map_err(invalid)?,
        "ellipse" => StarShapedDomain::ellipse(raw.req("domain.a")?, raw.req("domain.b")?).map_err(invalid)?,
        "perturbed" => StarShapedDomain::perturbed(raw.req("domain.a")?, raw.req("domain.b")?).map_err(invalid)?,
        other => return Err(CliError::Config(format!("domain.kind: unknown domain '{other}'"))),
    };
    Ok(d)
}

pub fn parse_phantom_kind(s: &str) -> Result<PhantomKind, CliError> {
    match s {
        "smooth_bumps" => Ok(PhantomKind::SmoothBumps),
        "disc_pack" => Ok(PhantomKind::DiscPack),
        other => Err(CliError::Config(format!("phantom.kind: unknown phantom '{other}'"))),
    }
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let manifold = Manifold::new(parse_metric(raw)?, parse_domain(raw)?).map_err(invalid)?;
        let n: usize = raw.num("grid.n")?.unwrap_or(100);
        if n < 8 {
            return Err(CliError::Config(format!("grid.n must be >= 8, got {n}")));
        }
        let r_max = manifold.r_max();
        let dt: f64 = raw.num("solver.dt")?.unwrap_or(2.0 * r_max / n as f64);
        if !(dt.is_finite() && dt > 0.0) {
            return Err(CliError::Config(format!("solver.dt must be > 0, got {dt}")));
        }
        let max_steps = raw.num("solver.max_steps")?.unwrap_or((8.0 * r_max / dt).ceil() as usize);
        let iterations: i64 = raw.num("solver.iterations")?.unwrap_or(0);
        if iterations < 0 {
            return Err(CliError::Config(format!("solver.iterations must be >= 0, got {iterations}")));
        }
        let phantom = raw.str("phantom.kind").map(parse_phantom_kind).transpose()?;
        Ok(RunConfig {
            manifold,
            n,
            n_theta: raw.num("grid.n_theta")?.unwrap_or(2 * n),
            dt,
            max_steps,
            iterations: iterations as usize,
            phantom,
            phantom_random: raw.flag("phantom.random")?,
            seed: raw.num("seed")?.unwrap_or(0),
            out_dir: PathBuf::from(raw.str("io.out_dir").unwrap_or("out")),
            data: raw.str("io.data").map(PathBuf::from),
            pgm: raw.flag("io.pgm")?,
            threads: raw.num("threads")?.unwrap_or(0),
            jacobi_n_beta: raw.num("jacobi.n_beta")?.unwrap_or(256),
            jacobi_n_alpha: raw.num("jacobi.n_alpha")?.unwrap_or(128),
            jacobi_eps: raw.num("jacobi.eps")?.unwrap_or(1e-3),
            jacobi_cap: raw.num("jacobi.cap")?.unwrap_or(64.0),
            geodesics_n_beta: raw.num("geodesics.n_beta")?.unwrap_or(16),
            geodesics_n_alpha: raw.num("geodesics.n_alpha")?.unwrap_or(8),
        })
    }

    pub fn threads_of(raw: &RawConfig) -> Result<usize, CliError> {
        Ok(raw.num("threads")?.unwrap_or(0))
    }

    pub fn out_dir_of(raw: &RawConfig) -> Option<PathBuf> {
        raw.str("io.out_dir").map(PathBuf::from)
    }

    pub fn trace_params(&self) -> Result<TraceParams, CliError> {
        TraceParams::new(self.dt, self.max_steps).map_err(invalid)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        GridSpec::covering(&self.manifold.domain, self.n).map_err(invalid)
    }
}
