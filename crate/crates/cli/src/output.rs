//! Files written by the image and benchmark commands.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dpd_core::diagnostics::{read_history, write_history, HistoryRecord};
use dpd_core::imaging::{read_dpdf, read_pgm, write_dpdf, write_pgm, ImageGrid};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::experiments::ImageRun;

/// `prefix` with `suffix` appended to its file name.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

/// Reads `.dpdf` files losslessly and anything else as PGM.
pub fn read_image(path: &Path) -> CliResult<ImageGrid> {
    let img = if path.extension().is_some_and(|e| e == "dpdf") {
        read_dpdf(path)
    } else {
        read_pgm(path)
    };
    img.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn io_context(path: &Path) -> impl Fn(dpd_core::DpdError) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes `prefix.pgm` and `prefix.dpdf`.
pub fn write_image_pair(prefix: &Path, img: &ImageGrid) -> CliResult<()> {
    let pgm = with_suffix(prefix, ".pgm");
    write_pgm(&pgm, img).map_err(io_context(&pgm))?;
    let raw = with_suffix(prefix, ".dpdf");
    write_dpdf(&raw, img).map_err(io_context(&raw))
}

pub fn write_history_file(path: &Path, records: &[HistoryRecord]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    write_history(BufWriter::new(file), records).map_err(io_context(path))
}

pub fn read_history_file(path: &Path) -> CliResult<Vec<HistoryRecord>> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    read_history(BufReader::new(file)).map_err(io_context(path))
}

/// Run metadata written next to the recovered image.
#[derive(Debug, Clone, Serialize)]
pub struct RunSidecar {
    pub command: &'static str,
    pub regime: String,
    pub iters: usize,
    pub seed: u64,
    pub kernel: String,
    pub degraded_here: bool,
    pub parameters: BTreeMap<&'static str, f64>,
    pub norm_a: f64,
    pub lipschitz_f: f64,
    /// `none` or `heuristic-continuation:halve-every-H`.
    pub continuation: String,
    /// `μ_g` in force at each iteration.
    pub mu_g: Vec<f64>,
    pub final_snr_db: Option<f64>,
}

impl RunSidecar {
    pub fn from_run(
        command: &'static str,
        run: &ImageRun,
        seed: u64,
        kernel: &str,
        degraded_here: bool,
        parameters: Vec<(&'static str, f64)>,
        continuation: String,
    ) -> Self {
        Self {
            command,
            regime: run.regime.clone(),
            iters: run.history.len(),
            seed,
            kernel: kernel.to_string(),
            degraded_here,
            parameters: parameters.into_iter().collect(),
            norm_a: run.norm_a,
            lipschitz_f: run.lipschitz_f,
            continuation,
            mu_g: run.mu_g_trace.clone(),
            final_snr_db: run.final_snr_db,
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut out = BufWriter::new(File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?);
        serde_json::to_writer_pretty(&mut out, self).map_err(|e| CliError::Io(e.to_string()))?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffix_keeps_dotted_prefixes() {
        assert_eq!(
            with_suffix(Path::new("out/run.v1"), ".pgm"),
            PathBuf::from("out/run.v1.pgm")
        );
    }

    #[test]
    fn missing_image_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["nope.pgm", "nope.dpdf"] {
            assert!(matches!(read_image(&dir.path().join(name)), Err(CliError::Io(_))));
        }
    }
}
