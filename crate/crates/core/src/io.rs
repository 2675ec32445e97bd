//! Artifact files: solution and table CSVs, JSON reports, the manifest, and the
//! assembled-operator cache.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::ExponentFit;
use crate::energy::MembranePair;
use crate::error::{Error, Result};
use crate::frequency::FrequencyReport;
use crate::grid_kernel::{
    build_operator, DiscreteNonlocalOperator, Grid, GridFunction, KernelSpec,
};

pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One written file with its content hash.
#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
}

/// Collects the files of one artifact directory.
#[derive(Debug)]
pub struct ArtifactDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl ArtifactDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    fn record(&mut self, name: &str, bytes: &[u8], columns: Vec<String>) -> Result<()> {
        fs::write(self.root.join(name), bytes)?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
            columns,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.record(name, &text, Vec::new())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.record(name, &bytes, header.iter().map(|s| s.to_string()).collect())
    }

    /// Writes `manifest.json`, listing every file recorded so far.
    pub fn finish<T: Serialize>(&self, body: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a, T> {
            schema_version: u32,
            crate_version: &'static str,
            #[serde(flatten)]
            body: &'a T,
            files: &'a [FileEntry],
        }
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            crate_version: env!("CARGO_PKG_VERSION"),
            body,
            files: &self.files,
        };
        let mut text = serde_json::to_vec_pretty(&manifest)?;
        text.push(b'\n');
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn coords(grid: &Grid, idx: usize) -> Vec<String> {
    let p = grid.point(idx);
    if grid.dim() == 1 {
        vec![num(p[0])]
    } else {
        vec![num(p[0]), num(p[1])]
    }
}

fn coord_header(grid: &Grid) -> Vec<&'static str> {
    if grid.dim() == 1 {
        vec!["x"]
    } else {
        vec!["x", "y"]
    }
}

/// Interior nodes: `x[,y],u1,u2,contact`.
pub fn membranes_csv(
    dir: &mut ArtifactDir,
    name: &str,
    pair: &MembranePair,
    contact: &[bool],
) -> Result<()> {
    let grid = pair.u1.grid().clone();
    let mut header = coord_header(&grid);
    header.extend(["u1", "u2", "contact"]);
    let rows: Vec<Vec<String>> = grid
        .interior()
        .iter()
        .enumerate()
        .map(|(slot, &i)| {
            let mut r = coords(&grid, i);
            r.extend([
                num(pair.u1.values()[i]),
                num(pair.u2.values()[i]),
                (contact[slot] as u8).to_string(),
            ]);
            r
        })
        .collect();
    dir.write_csv(name, &header, &rows)
}

/// Interior nodes: `x[,y],u,phi,contact`.
pub fn obstacle_csv(
    dir: &mut ArtifactDir,
    name: &str,
    u: &GridFunction,
    phi: &GridFunction,
    contact: &[bool],
) -> Result<()> {
    let grid = u.grid().clone();
    let mut header = coord_header(&grid);
    header.extend(["u", "phi", "contact"]);
    let rows: Vec<Vec<String>> = grid
        .interior()
        .iter()
        .enumerate()
        .map(|(slot, &i)| {
            let mut r = coords(&grid, i);
            r.extend([
                num(u.values()[i]),
                num(phi.values()[i]),
                (contact[slot] as u8).to_string(),
            ]);
            r
        })
        .collect();
    dir.write_csv(name, &header, &rows)
}

/// `r,osc,log_r,log_osc`.
pub fn exponent_csv(dir: &mut ArtifactDir, name: &str, fit: &ExponentFit) -> Result<()> {
    let rows: Vec<Vec<String>> = fit
        .table()
        .iter()
        .map(|row| row.iter().map(|&v| num(v)).collect())
        .collect();
    dir.write_csv(name, &["r", "osc", "log_r", "log_osc"], &rows)
}

/// `r,F,Phi`.
pub fn frequency_csv(dir: &mut ArtifactDir, name: &str, report: &FrequencyReport) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..report.radii.len())
        .map(|k| {
            vec![
                num(report.radii[k]),
                num(report.f_values[k]),
                num(report.phi[k]),
            ]
        })
        .collect();
    dir.write_csv(name, &["r", "F", "Phi"], &rows)
}

/// Cache key `(grid hash, kernel hash)`.
pub fn operator_key(grid: &Grid, kernel: &KernelSpec) -> Result<String> {
    let kernel_bytes = bincode::serialize(kernel).map_err(|e| Error::Cache(e.to_string()))?;
    Ok(format!(
        "{}-{}",
        &grid.content_hash()[..16],
        &sha256_hex(&kernel_bytes)[..16]
    ))
}

/// Loads the operator from `cache_dir` when present and matching, otherwise assembles and
/// stores it. Returns the operator and whether the cache was hit.
pub fn cached_operator(
    cache_dir: Option<&Path>,
    grid: &Arc<Grid>,
    kernel: &KernelSpec,
) -> Result<(DiscreteNonlocalOperator, bool)> {
    let Some(dir) = cache_dir else {
        return Ok((build_operator(grid, kernel)?, false));
    };
    let path = dir.join(format!("op-{}.bin", operator_key(grid, kernel)?));
    if let Ok(bytes) = fs::read(&path) {
        if let Ok(op) = bincode::deserialize::<DiscreteNonlocalOperator>(&bytes) {
            if op.kernel() == kernel && op.grid().content_hash() == grid.content_hash() {
                return Ok((op, true));
            }
        }
    }
    let op = build_operator(grid, kernel)?;
    fs::create_dir_all(dir)?;
    let bytes = bincode::serialize(&op).map_err(|e| Error::Cache(e.to_string()))?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, &path)?;
    Ok((op, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_kernel::DEFAULT_EXTERIOR_RADIUS;

    #[test]
    fn cache_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let grid = Arc::new(Grid::with_interior_nodes(1, 15, DEFAULT_EXTERIOR_RADIUS).unwrap());
        let kernel = KernelSpec::fractional(0.4).unwrap();
        let (a, hit) = cached_operator(Some(tmp.path()), &grid, &kernel).unwrap();
        assert!(!hit);
        let (b, hit) = cached_operator(Some(tmp.path()), &grid, &kernel).unwrap();
        assert!(hit);
        assert_eq!(a.diagonal(), b.diagonal());
        let other = KernelSpec::fractional(0.6).unwrap();
        assert_ne!(
            operator_key(&grid, &kernel).unwrap(),
            operator_key(&grid, &other).unwrap()
        );
    }

    #[test]
    fn manifest_lists_hashes() {
        let tmp = tempfile::tempdir().unwrap();
        let mut dir = ArtifactDir::create(tmp.path().join("a")).unwrap();
        dir.write_csv("t.csv", &["a", "b"], &[vec!["1".into(), "2".into()]])
            .unwrap();
        dir.finish(&serde_json::json!({"note": "x"})).unwrap();
        let m: serde_json::Value =
            serde_json::from_slice(&fs::read(tmp.path().join("a/manifest.json")).unwrap()).unwrap();
        assert_eq!(m["schema_version"], 1);
        assert_eq!(m["files"][0]["sha256"], sha256_hex(b"a,b\n1,2\n"));
        assert_eq!(m["files"][0]["columns"][1], "b");
    }
}
