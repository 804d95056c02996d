//! Plain-text file formats: fan-beam CSV, grid CSV and PGM.

use std::io::{BufRead, Write};

use crate::error::{GeoError, Result};
use crate::fields::{GridSpec, ScalarGrid};
use crate::geometry::StarShapedDomain;
use crate::ray_transform::{FanBeamData, InfluxGrid};

pub const FANBEAM_HEADER: &str = "# geotomo fanbeam v1";
pub const PREPPED_HEADER: &str = "# geotomo fanbeam-prepped v1";
pub const GRID_HEADER: &str = "# geotomo grid v1";

pub fn write_fanbeam<W: Write>(out: &mut W, data: &FanBeamData, header: &str) -> Result<()> {
    let g = &data.grid;
    writeln!(out, "{header}")?;
    writeln!(out, "n_beta={},n_alpha={}", g.n_beta, g.n_alpha)?;
    for i in 0..g.n_beta {
        for j in 0..g.n_alpha {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", g.beta(i), g.alpha(j), data.get(i, j))?;
        }
    }
    Ok(())
}

fn parse_kv<'a>(line: &'a str, keys: &[&str]) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.trim().split(',').collect();
    if parts.len() != keys.len() {
        return Err(GeoError::Format(format!("expected {} fields in '{line}'", keys.len())));
    }
    parts
        .iter()
        .zip(keys)
        .map(|(p, k)| {
            p.strip_prefix(k)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| GeoError::Format(format!("expected '{k}=' in '{line}'")))
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| GeoError::Format(format!("bad number '{s}'")))
}

/// Reads either fan-beam variant; returns the data and its header line.
pub fn read_fanbeam<R: BufRead>(input: R) -> Result<(FanBeamData, String)> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.ok_or_else(|| GeoError::Format("empty file".into()))?;
    let header = header.trim().to_string();
    if header != FANBEAM_HEADER && header != PREPPED_HEADER {
        return Err(GeoError::Format(format!("unknown header '{header}'")));
    }
    let dims = lines.next().transpose()?.ok_or_else(|| GeoError::Format("missing dimensions".into()))?;
    let kv = parse_kv(&dims, &["n_beta", "n_alpha"])?;
    let grid = InfluxGrid::new(parse_num(kv[0])?, parse_num(kv[1])?).map_err(|e| GeoError::Format(e.to_string()))?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(GeoError::Format(format!("expected beta,alpha,value in '{line}'")));
        }
        values.push(parse_num::<f64>(cols[2])?);
    }
    if values.len() != grid.len() {
        return Err(GeoError::Format(format!("expected {} rows, found {}", grid.len(), values.len())));
    }
    let data = FanBeamData::new(grid, values).map_err(|e| GeoError::Format(e.to_string()))?;
    Ok((data, header))
}

pub fn write_grid<W: Write>(out: &mut W, g: &ScalarGrid) -> Result<()> {
    writeln!(out, "{GRID_HEADER}")?;
    writeln!(out, "n={},r_max={:.16e}", g.n(), g.r_max())?;
    for j in 0..g.n() {
        for i in 0..g.n() {
            let [x, y] = g.spec.node(i, j);
            writeln!(out, "{i},{j},{x:.16e},{y:.16e},{:.16e}", g.get(i, j))?;
        }
    }
    Ok(())
}

/// Reads a grid file; `domain` supplies the mask.
pub fn read_grid<R: BufRead>(input: R, domain: StarShapedDomain) -> Result<ScalarGrid> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != GRID_HEADER {
        return Err(GeoError::Format(format!("unknown header '{}'", header.trim())));
    }
    let dims = lines.next().transpose()?.ok_or_else(|| GeoError::Format("missing dimensions".into()))?;
    let kv = parse_kv(&dims, &["n", "r_max"])?;
    let spec = GridSpec::new(parse_num(kv[0])?, parse_num(kv[1])?).map_err(|e| GeoError::Format(e.to_string()))?;
    let mut values = vec![0.0; spec.len()];
    let mut seen = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(GeoError::Format(format!("expected i,j,x,y,value in '{line}'")));
        }
        let (i, j): (usize, usize) = (parse_num(cols[0])?, parse_num(cols[1])?);
        if i >= spec.n || j >= spec.n {
            return Err(GeoError::Format(format!("node ({i}, {j}) out of range")));
        }
        values[j * spec.n + i] = parse_num(cols[4])?;
        seen += 1;
    }
    if seen != spec.len() {
        return Err(GeoError::Format(format!("expected {} rows, found {seen}", spec.len())));
    }
    ScalarGrid::from_values(spec, domain, values).map_err(|e| GeoError::Format(e.to_string()))
}

/// 8-bit ASCII PGM with min-max scaling; row 0 is the top (largest y).
pub fn write_pgm<W: Write>(out: &mut W, g: &ScalarGrid) -> Result<()> {
    let n = g.n();
    let (lo, hi) = g.min_max();
    let span = if hi > lo { hi - lo } else { 1.0 };
    writeln!(out, "P2\n{n} {n}\n255")?;
    for j in (0..n).rev() {
        let row: Vec<String> =
            (0..n).map(|i| (((g.get(i, j) - lo) / span * 255.0).round() as u8).to_string()).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}
