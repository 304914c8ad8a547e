use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::SceneConfig;
use super::reconstruct::{Reconstruction, RunReport};
use crate::geometry::io::{read_mesh, write_mesh};
use crate::geometry::{hausdorff_report, HausdorffReport};
use crate::octree::write_volume;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub reconstruction: PathBuf,
    pub ground_truth: PathBuf,
    pub hausdorff: HausdorffReport,
}

impl Evaluation {
    pub fn summary(&self) -> String {
        let h = &self.hausdorff;
        format!(
            "samples {}\nrec -> gt: rms {:.6} max {:.6} mean {:.6}\ngt -> rec: rms {:.6} max {:.6} mean {:.6}",
            h.samples, h.forward.rms, h.forward.max, h.forward.mean, h.backward.rms, h.backward.max, h.backward.mean
        )
    }
}

/// Loads both meshes and measures the sampled distances in both directions.
pub fn evaluate(reconstruction: &Path, ground_truth: &Path, samples: usize) -> Result<Evaluation> {
    if samples == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let rec = read_mesh::<f64>(reconstruction)?;
    let gt = read_mesh::<f64>(ground_truth)?;
    Ok(Evaluation {
        reconstruction: reconstruction.to_path_buf(),
        ground_truth: ground_truth.to_path_buf(),
        hausdorff: hausdorff_report(&rec, &gt, samples)?,
    })
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes the mesh and JSON report to the config's output paths, plus the volume dump when
/// asked. Returns the paths written.
pub fn write_outputs(config: &SceneConfig, rec: &Reconstruction, dump_volume: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mesh_path = config.resolve(&config.output.mesh);
    let report_path = config.resolve(&config.output.report);
    for p in [&mesh_path, &report_path] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    write_mesh(&mesh_path, &rec.mesh)?;
    write_json::<RunReport>(&report_path, &rec.report)?;
    let mut written = vec![mesh_path, report_path];
    if let Some(p) = dump_volume {
        write_volume(p, &rec.volume)?;
        written.push(p.to_path_buf());
    }
    Ok(written)
}
