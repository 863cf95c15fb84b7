//! File readers and writers shared by the subcommands. Every error names
//! the file involved.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gridfuse::geometry::Camera;
use gridfuse::npy::{self, NpyArray};
use gridfuse::{ply, ClassMapping, PointCloud};

use crate::failure::{Failure, Outcome};

fn ext(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

pub fn read_npy(path: &Path) -> Outcome<NpyArray> {
    Ok(npy::read_file(path)?)
}

pub fn read_cameras(path: &Path) -> Outcome<Vec<Camera>> {
    let cams = gridfuse::cameras::read_cameras(path)?;
    if cams.is_empty() {
        return Err(Failure::data("camera file lists no cameras").at(path));
    }
    Ok(cams)
}

/// A `.ply` cloud, or an `(N, 3)` float `.npy` array of positions.
pub fn read_cloud(path: &Path) -> Outcome<PointCloud> {
    match ext(path).as_str() {
        "ply" => Ok(ply::read_ply_file(path)?),
        "npy" => {
            let a = read_npy(path)?;
            if a.shape.len() != 2 || a.shape[1] != 3 || !matches!(a.dtype, npy::Dtype::F32 | npy::Dtype::F64) {
                return Err(Failure::data(format!(
                    "expected an (N, 3) float array, found {} with shape {:?}",
                    a.dtype.descr(),
                    a.shape
                ))
                .at(path));
            }
            let v = a.to_f64();
            let positions = v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
            Ok(PointCloud::from_positions(positions))
        }
        _ => Err(Failure::usage("point clouds must be .ply or .npy files").at(path)),
    }
}

/// Labels from a 1-D integer `.npy` array.
pub fn read_labels(path: &Path) -> Outcome<Vec<u8>> {
    let a = read_npy(path)?;
    if a.shape.len() != 1 {
        return Err(Failure::data(format!("expected a 1-D label array, found shape {:?}", a.shape)).at(path));
    }
    a.to_labels().map_err(|e| Failure::from(e).at(path))
}

/// An `(N, K)` float array as rows of `f64`.
pub fn read_rows(path: &Path) -> Outcome<(usize, Vec<Vec<f64>>)> {
    let a = read_npy(path)?;
    if a.shape.len() != 2 || !matches!(a.dtype, npy::Dtype::F32 | npy::Dtype::F64) {
        return Err(Failure::data(format!(
            "expected an (N, K) float array, found {} with shape {:?}",
            a.dtype.descr(),
            a.shape
        ))
        .at(path));
    }
    let k = a.shape[1];
    let rows = a.to_f64().chunks(k.max(1)).map(<[f64]>::to_vec).collect();
    Ok((k, rows))
}

/// `<stem>.npy` files directly inside `dir`, keyed by stem.
pub fn npy_files(dir: &Path) -> Outcome<BTreeMap<String, PathBuf>> {
    if !dir.is_dir() {
        return Err(Failure::data("not a directory").at(dir));
    }
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Failure::from(e).at(dir))? {
        let path = entry.map_err(|e| Failure::from(e).at(dir))?.path();
        if path.is_file() && ext(&path) == "npy" {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

pub fn read_mapping(path: Option<&Path>) -> Outcome<Option<ClassMapping>> {
    path.map(|p| {
        let text = fs::read_to_string(p).map_err(|e| Failure::from(e).at(p))?;
        ClassMapping::parse(&text).map_err(|e| Failure::from(e).at(p))
    })
    .transpose()
}

pub fn write(path: &Path, bytes: &[u8]) -> Outcome {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::from(e).at(parent))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::from(e).at(path))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn npy_u8(labels: &[u8]) -> Outcome<Vec<u8>> {
    Ok(npy::to_bytes_u8(&[labels.len()], labels)?)
}

pub fn npy_i32(data: &[i32]) -> Outcome<Vec<u8>> {
    let mut out = Vec::new();
    npy::write_i32(&mut out, &[data.len()], data)?;
    Ok(out)
}

pub fn npy_f64(shape: &[usize], data: &[f64]) -> Outcome<Vec<u8>> {
    let mut out = Vec::new();
    npy::write_f64(&mut out, shape, data)?;
    Ok(out)
}

/// Camera ids become file names, so they may not contain path syntax.
pub fn file_stem_for(id: &str) -> Outcome<&str> {
    let ok = !id.is_empty() && id != "." && id != ".." && !id.contains(['/', '\\', '\0']);
    if ok {
        Ok(id)
    } else {
        Err(Failure::data(format!("camera id '{id}' cannot be used as a file name")))
    }
}

pub fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::from(e).at(dir))
}
