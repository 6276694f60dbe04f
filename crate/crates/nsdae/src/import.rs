//! Import of externally assembled systems from MatrixMarket files, driven
//! by a small plain-text manifest, plus the matching export.
//!
//! Manifest format: one `key = value` pair per line, `#` comments. Paths
//! are resolved relative to the manifest location.
//!
//! ```text
//! # required
//! m  = mass.mtx
//! a  = diffusion.mtx
//! b  = divergence.mtx
//! mq = pressure-mass.mtx
//! re = 60
//! # optional right-hand sides: constant vectors or tabulated series
//! f  = forcing.mtx
//! g  = constraint-data.mtx
//! f_series = forcing.tab
//! g_series = constraint-data.tab
//! # optional convection tensor, rows j, columns a*n+b
//! conv = convection.mtx
//! ```
//!
//! A tabulation file holds one `t v_1 ... v_n` line per sample. A missing
//! convection entry means a Stokes/Oseen linearization (`N == 0`). A
//! rank-deficient `B` is deflated on import, with the matching rows of
//! `g` and of the pressure mass removed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mmio;
use crate::pencil::{deflate_pressure_kernel, DEFLATION_CONSISTENCY_TOL};
use crate::system::{Convection, ConvectionTensor, SemiDiscreteSystem, TimeFn};

/// Parsed manifest: key/value pairs plus the base directory.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub dir: PathBuf,
    pub entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: "expected 'key = value'".into(),
                });
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Manifest { dir, entries })
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.entries.get(key).map(|v| self.dir.join(v))
    }

    fn required_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)
            .ok_or_else(|| Error::InvalidConfig(format!("manifest is missing the '{key}' entry")))
    }
}

fn read_tabulation(path: &Path, dim: usize) -> Result<TimeFn> {
    let text = std::fs::read_to_string(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|s| {
                s.parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: "bad number".into(),
                })
            })
            .collect::<Result<_>>()?;
        if nums.len() != dim + 1 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: format!("expected 1 + {dim} values, got {}", nums.len()),
            });
        }
        times.push(nums[0]);
        values.push(DVector::from_vec(nums[1..].to_vec()));
    }
    TimeFn::tabulated(times, values)
}

fn read_rhs(manifest: &Manifest, key: &str, dim: usize) -> Result<TimeFn> {
    if let Some(p) = manifest.path(&format!("{key}_series")) {
        return read_tabulation(&p, dim);
    }
    if let Some(p) = manifest.path(key) {
        let v = mmio::read_vector(&p)?;
        if v.len() != dim {
            return Err(Error::dim(format!(
                "vector '{key}' has length {}, expected {dim}",
                v.len()
            )));
        }
        return Ok(TimeFn::Constant(v));
    }
    Ok(TimeFn::zero(dim))
}

/// Build a [`SemiDiscreteSystem`] from the files named in a manifest.
pub fn import_system(manifest_path: impl AsRef<Path>) -> Result<SemiDiscreteSystem> {
    let manifest = Manifest::read(manifest_path)?;
    let mass = mmio::read_matrix(manifest.required_path("m")?)?;
    let a_lin = mmio::read_matrix(manifest.required_path("a")?)?;
    let b = mmio::read_matrix(manifest.required_path("b")?)?;
    let m_q = mmio::read_matrix(manifest.required_path("mq")?)?;
    let reynolds: f64 = manifest
        .entries
        .get("re")
        .ok_or_else(|| Error::InvalidConfig("manifest is missing the 're' entry".into()))?
        .parse()
        .map_err(|_| Error::InvalidConfig("'re' is not a number".into()))?;

    let n = mass.nrows();
    let m = b.nrows();
    let f = read_rhs(&manifest, "f", n)?;
    let g = read_rhs(&manifest, "g", m)?;

    let convection = match manifest.path("conv") {
        None => Convection::Zero,
        Some(p) => {
            let h = mmio::read_matrix(&p)?;
            Convection::Tensor(Arc::new(ConvectionTensor::from_matrix(&h, n)?))
        }
    };

    // deflate a rank-deficient constraint; every tabulated sample must be
    // consistent with the same dropped rows
    let samples: Vec<(f64, DVector<f64>)> = match &g {
        TimeFn::Constant(v) => vec![(0.0, v.clone())],
        TimeFn::PiecewiseLinear { times, values } => {
            times.iter().copied().zip(values.iter().cloned()).collect()
        }
    };
    let deflated = deflate_pressure_kernel(&b, &samples[0].1, DEFLATION_CONSISTENCY_TOL)?;
    for (_, gv) in &samples[1..] {
        let check = deflate_pressure_kernel(&b, gv, DEFLATION_CONSISTENCY_TOL)?;
        if check.kept != deflated.kept {
            return Err(Error::InconsistentConstraint(
                "tabulated constraint data is inconsistent across samples".into(),
            ));
        }
    }
    let (b, g, m_q) = if deflated.dropped.is_empty() {
        (b, g, m_q)
    } else {
        let g = g.select_rows(&deflated.kept);
        let m_q = m_q
            .select_rows(&deflated.kept)?
            .select_cols(&deflated.kept)?;
        (deflated.b, g, m_q)
    };

    SemiDiscreteSystem::new(mass, a_lin, b, convection, f, g, m_q, reynolds)
}

/// Write a system back to MatrixMarket files plus a manifest. Constant
/// right-hand sides are written as vectors, tabulations as series files;
/// built-in grid convection has no file representation, so only `Zero`
/// and tensor convection can be exported.
pub fn export_system(sys: &SemiDiscreteSystem, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    mmio::write_matrix(dir.join("mass.mtx"), &sys.mass)?;
    mmio::write_matrix(dir.join("diffusion.mtx"), &sys.a_lin)?;
    mmio::write_matrix(dir.join("divergence.mtx"), &sys.b)?;
    mmio::write_matrix(dir.join("pressure-mass.mtx"), &sys.m_q)?;
    let mut manifest = String::from("# exported semi-discrete system\n");
    manifest.push_str("m = mass.mtx\na = diffusion.mtx\nb = divergence.mtx\nmq = pressure-mass.mtx\n");
    manifest.push_str(&format!("re = {:.16e}\n", sys.reynolds));

    let write_rhs = |name: &str, fun: &TimeFn| -> Result<String> {
        match fun {
            TimeFn::Constant(v) => {
                mmio::write_vector(dir.join(format!("{name}.mtx")), v)?;
                Ok(format!("{name} = {name}.mtx\n"))
            }
            TimeFn::PiecewiseLinear { times, values } => {
                let mut text = String::new();
                for (t, v) in times.iter().zip(values) {
                    text.push_str(&format!("{t:.16e}"));
                    for x in v.iter() {
                        text.push_str(&format!(" {x:.16e}"));
                    }
                    text.push('\n');
                }
                std::fs::write(dir.join(format!("{name}.tab")), text)?;
                Ok(format!("{name}_series = {name}.tab\n"))
            }
        }
    };
    manifest.push_str(&write_rhs("f", &sys.f)?);
    manifest.push_str(&write_rhs("g", &sys.g)?);

    match &sys.convection {
        Convection::Zero => {}
        Convection::Tensor(tensor) => {
            mmio::write_matrix(dir.join("convection.mtx"), &tensor.to_matrix())?;
            manifest.push_str("conv = convection.mtx\n");
        }
        Convection::Eval(_) => {
            return Err(Error::InvalidConfig(
                "only tensor convection can be exported to files".into(),
            ))
        }
    }
    let manifest_path = dir.join("system.manifest");
    std::fs::write(&manifest_path, manifest)?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;
    use approx::assert_relative_eq;

    fn write_toy_manifest(dir: &Path, extra: &str) -> PathBuf {
        mmio::write_matrix(dir.join("m.mtx"), &SparseMatrix::identity(2)).unwrap();
        mmio::write_matrix(dir.join("a.mtx"), &SparseMatrix::identity(2)).unwrap();
        mmio::write_matrix(
            dir.join("b.mtx"),
            &SparseMatrix::from_triplets(1, 2, vec![(0, 0, 1.0)]).unwrap(),
        )
        .unwrap();
        mmio::write_matrix(dir.join("mq.mtx"), &SparseMatrix::identity(1)).unwrap();
        let path = dir.join("sys.manifest");
        std::fs::write(
            &path,
            format!("m = m.mtx\na = a.mtx\nb = b.mtx\nmq = mq.mtx\nre = 10\n{extra}"),
        )
        .unwrap();
        path
    }

    #[test]
    fn stokes_import_has_zero_convection() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_toy_manifest(dir.path(), "");
        let sys = import_system(&path).unwrap();
        assert!(sys.convection.is_zero());
        let v = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(sys.convection.eval(&v).norm(), 0.0);
        assert_eq!(sys.f.eval(0.0).norm(), 0.0);
    }

    #[test]
    fn tensor_convection_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        // N(v)_0 = v_0 v_1, N(v)_1 = 2 v_1 v_1
        let h = SparseMatrix::from_triplets(2, 4, vec![(0, 1, 1.0), (1, 3, 2.0)]).unwrap();
        mmio::write_matrix(dir.path().join("h.mtx"), &h).unwrap();
        let path = write_toy_manifest(dir.path(), "conv = h.mtx\n");
        let sys = import_system(&path).unwrap();
        let v = DVector::from_vec(vec![3.0, 4.0]);
        let n = sys.convection.eval(&v);
        assert_relative_eq!(n[0], 12.0, epsilon = 1e-15);
        assert_relative_eq!(n[1], 32.0, epsilon = 1e-15);
    }

    #[test]
    fn import_export_round_trip_matches() {
        let dir = tempfile::tempdir().unwrap();
        let h = SparseMatrix::from_triplets(2, 4, vec![(0, 1, 0.5)]).unwrap();
        mmio::write_matrix(dir.path().join("h.mtx"), &h).unwrap();
        mmio::write_vector(dir.path().join("f.mtx"), &DVector::from_vec(vec![0.25, -1.0]))
            .unwrap();
        let path = write_toy_manifest(dir.path(), "conv = h.mtx\nf = f.mtx\n");
        let sys = import_system(&path).unwrap();

        let out = dir.path().join("export");
        let manifest2 = export_system(&sys, &out).unwrap();
        let sys2 = import_system(&manifest2).unwrap();
        assert_eq!(sys.mass, sys2.mass);
        assert_eq!(sys.a_lin, sys2.a_lin);
        assert_eq!(sys.b, sys2.b);
        assert_eq!(sys.m_q, sys2.m_q);
        assert_eq!(sys.f.eval(0.0), sys2.f.eval(0.0));
        assert_eq!(sys.reynolds, sys2.reynolds);
        let v = DVector::from_vec(vec![1.5, -2.0]);
        assert_eq!(sys.convection.eval(&v), sys2.convection.eval(&v));
    }

    #[test]
    fn rank_deficient_b_is_deflated_on_import() {
        let dir = tempfile::tempdir().unwrap();
        mmio::write_matrix(dir.path().join("m.mtx"), &SparseMatrix::identity(2)).unwrap();
        mmio::write_matrix(dir.path().join("a.mtx"), &SparseMatrix::identity(2)).unwrap();
        // second constraint row is zero, with consistent zero data
        mmio::write_matrix(
            dir.path().join("b.mtx"),
            &SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0)]).unwrap(),
        )
        .unwrap();
        mmio::write_matrix(dir.path().join("mq.mtx"), &SparseMatrix::identity(2)).unwrap();
        let path = dir.path().join("sys.manifest");
        std::fs::write(&path, "m = m.mtx\na = a.mtx\nb = b.mtx\nmq = mq.mtx\nre = 1\n").unwrap();
        let sys = import_system(&path).unwrap();
        assert_eq!(sys.m(), 1);
        assert_eq!(sys.b.nrows(), 1);
    }

    #[test]
    fn missing_entries_and_dimension_mismatches_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("incomplete.manifest");
        std::fs::write(&path, "m = m.mtx\n").unwrap();
        assert!(import_system(&path).is_err());

        let path = write_toy_manifest(dir.path(), "f = f.mtx\n");
        mmio::write_vector(dir.path().join("f.mtx"), &DVector::zeros(5)).unwrap();
        assert!(matches!(
            import_system(&path),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn tabulated_rhs_is_read() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("f.tab"), "0 1 0\n1 3 0\n").unwrap();
        let path = write_toy_manifest(dir.path(), "f_series = f.tab\n");
        let sys = import_system(&path).unwrap();
        assert_relative_eq!(sys.f.eval(0.5)[0], 2.0, epsilon = 1e-15);
    }
}
