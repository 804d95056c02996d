//! Output directory bookkeeping and the metrics JSON schema.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use geotomo::io::{write_fanbeam, write_grid, write_pgm};
use geotomo::{FanBeamData, ReconstructionReport, ScalarGrid};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub rel_l2_field: Option<f64>,
    pub rel_l2_data: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Metrics {
    pub experiment: String,
    pub iterations: Vec<IterationMetrics>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Metrics {
    pub fn from_report(experiment: &str, report: &ReconstructionReport) -> Self {
        let iterations = report
            .per_iteration_data_error
            .iter()
            .enumerate()
            .map(|(k, &d)| IterationMetrics {
                iteration: k,
                rel_l2_field: report.per_iteration_field_error.get(k).copied().and_then(finite),
                rel_l2_data: finite(d),
            })
            .collect();
        Metrics { experiment: experiment.to_string(), iterations }
    }
}

/// A directory that remembers every file written below it.
#[derive(Debug)]
pub struct OutDir {
    pub root: PathBuf,
    pub files: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)?;
        Ok(OutDir { root: root.to_path_buf(), files: Vec::new() })
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let f = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(f))
    }

    pub fn grid(&mut self, name: &str, g: &ScalarGrid) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        write_grid(&mut w, g)?;
        w.flush()?;
        Ok(())
    }

    pub fn pgm(&mut self, name: &str, g: &ScalarGrid) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        write_pgm(&mut w, g)?;
        w.flush()?;
        Ok(())
    }

    pub fn fanbeam(&mut self, name: &str, d: &FanBeamData, header: &str) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        write_fanbeam(&mut w, d, header)?;
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        w.write_all(contents.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    /// Written paths relative to `root`, with `/` separators.
    pub fn relative_files(&self) -> Vec<String> {
        self.files
            .iter()
            .map(|p| {
                let rel = p.strip_prefix(&self.root).unwrap_or(p);
                rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect::<Vec<_>>().join("/")
            })
            .collect()
    }
}
