//! Binary serialization of a fitted model plus its training labels.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes  "GKECAMDL"
//! version          u32      currently 1
//! kernel kind      u8       0 = cosine, 1 = gaussian, 2 = polynomial
//! normalize        u8       0 / 1
//! kernel params             gaussian: f64 width
//!                           polynomial: u32 degree, f64 offset
//! feature_len      u64
//! n_train          u64
//! k                u64      number of retained axes
//! labels           n_train × (u32 length, UTF-8 bytes)
//! train features   n_train × feature_len × f64
//! axes             k × (u64 index, f64 eigenvalue, f64 contribution,
//!                       n_train × f64 vector)
//! ```
//!
//! Floats are written bit-exact, so save → load → save reproduces the file
//! byte for byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::kernel::{KernelKind, KernelSpec};

use super::{KecaModel, SelectedAxis};

const MAGIC: &[u8; 8] = b"GKECAMDL";
const VERSION: u32 = 1;

/// Hard ceilings against nonsense sizes in corrupt files.
const MAX_COUNT: u64 = 1 << 32;
const MAX_LABEL_BYTES: u32 = 1 << 20;

pub fn save_model(path: impl AsRef<Path>, model: &KecaModel, labels: &[String]) -> Result<()> {
    let path = path.as_ref();
    if labels.len() != model.train.len() {
        return Err(Error::Model {
            reason: format!(
                "{} labels for {} training samples",
                labels.len(),
                model.train.len()
            ),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);

    w.write_all(MAGIC).map_err(io_err)?;
    w.write_u32::<LittleEndian>(VERSION).map_err(io_err)?;
    let kind = match model.spec.kind {
        KernelKind::Cosine => 0u8,
        KernelKind::Gaussian { .. } => 1,
        KernelKind::Polynomial { .. } => 2,
    };
    w.write_u8(kind).map_err(io_err)?;
    w.write_u8(model.spec.normalize as u8).map_err(io_err)?;
    match model.spec.kind {
        KernelKind::Cosine => {}
        KernelKind::Gaussian { width } => w.write_f64::<LittleEndian>(width).map_err(io_err)?,
        KernelKind::Polynomial { degree, offset } => {
            w.write_u32::<LittleEndian>(degree).map_err(io_err)?;
            w.write_f64::<LittleEndian>(offset).map_err(io_err)?;
        }
    }
    w.write_u64::<LittleEndian>(model.feature_len as u64).map_err(io_err)?;
    w.write_u64::<LittleEndian>(model.train.len() as u64).map_err(io_err)?;
    w.write_u64::<LittleEndian>(model.axes.len() as u64).map_err(io_err)?;
    for label in labels {
        let bytes = label.as_bytes();
        w.write_u32::<LittleEndian>(bytes.len() as u32).map_err(io_err)?;
        w.write_all(bytes).map_err(io_err)?;
    }
    for row in &model.train {
        for &v in row {
            w.write_f64::<LittleEndian>(v).map_err(io_err)?;
        }
    }
    for axis in &model.axes {
        w.write_u64::<LittleEndian>(axis.index as u64).map_err(io_err)?;
        w.write_f64::<LittleEndian>(axis.eigenvalue).map_err(io_err)?;
        w.write_f64::<LittleEndian>(axis.contribution).map_err(io_err)?;
        for &v in &axis.vector {
            w.write_f64::<LittleEndian>(v).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(KecaModel, Vec<String>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |reason: String| Error::ModelFile {
        path: path.to_path_buf(),
        reason,
    };
    let read_err = |e: std::io::Error| Error::ModelFile {
        path: path.to_path_buf(),
        reason: format!("truncated or unreadable: {e}"),
    };

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(read_err)?;
    if &magic != MAGIC {
        return Err(bad(format!(
            "wrong magic {:?}, expected {:?} — not a model file",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(MAGIC)
        )));
    }
    let version = r.read_u32::<LittleEndian>().map_err(read_err)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}, expected {VERSION}")));
    }
    let kind_tag = r.read_u8().map_err(read_err)?;
    let normalize = match r.read_u8().map_err(read_err)? {
        0 => false,
        1 => true,
        other => return Err(bad(format!("invalid normalize flag {other}"))),
    };
    let kind = match kind_tag {
        0 => KernelKind::Cosine,
        1 => KernelKind::Gaussian {
            width: r.read_f64::<LittleEndian>().map_err(read_err)?,
        },
        2 => {
            let degree = r.read_u32::<LittleEndian>().map_err(read_err)?;
            let offset = r.read_f64::<LittleEndian>().map_err(read_err)?;
            KernelKind::Polynomial { degree, offset }
        }
        other => return Err(bad(format!("unknown kernel tag {other}"))),
    };
    let spec = KernelSpec { kind, normalize };
    spec.validate()?;

    let feature_len = r.read_u64::<LittleEndian>().map_err(read_err)?;
    let n_train = r.read_u64::<LittleEndian>().map_err(read_err)?;
    let k = r.read_u64::<LittleEndian>().map_err(read_err)?;
    if feature_len == 0 || n_train == 0 || k == 0 {
        return Err(bad(format!(
            "degenerate sizes: feature_len {feature_len}, n_train {n_train}, k {k}"
        )));
    }
    if feature_len > MAX_COUNT || n_train > MAX_COUNT || k > n_train {
        return Err(bad(format!(
            "implausible sizes: feature_len {feature_len}, n_train {n_train}, k {k}"
        )));
    }
    let feature_len = feature_len as usize;
    let n_train = n_train as usize;
    let k = k as usize;

    let mut labels = Vec::with_capacity(n_train);
    for _ in 0..n_train {
        let len = r.read_u32::<LittleEndian>().map_err(read_err)?;
        if len > MAX_LABEL_BYTES {
            return Err(bad(format!("implausible label length {len}")));
        }
        let mut buf = vec![0u8; len as usize];
        r.read_exact(&mut buf).map_err(read_err)?;
        labels.push(String::from_utf8(buf).map_err(|e| bad(format!("label not UTF-8: {e}")))?);
    }
    let mut train = Vec::with_capacity(n_train);
    for _ in 0..n_train {
        let mut row = Vec::with_capacity(feature_len);
        for _ in 0..feature_len {
            row.push(r.read_f64::<LittleEndian>().map_err(read_err)?);
        }
        train.push(row);
    }
    let mut axes = Vec::with_capacity(k);
    for _ in 0..k {
        let index = r.read_u64::<LittleEndian>().map_err(read_err)?;
        if index >= n_train as u64 {
            return Err(bad(format!("axis index {index} out of range for {n_train} samples")));
        }
        let eigenvalue = r.read_f64::<LittleEndian>().map_err(read_err)?;
        let contribution = r.read_f64::<LittleEndian>().map_err(read_err)?;
        let mut vector = Vec::with_capacity(n_train);
        for _ in 0..n_train {
            vector.push(r.read_f64::<LittleEndian>().map_err(read_err)?);
        }
        axes.push(SelectedAxis {
            index: index as usize,
            eigenvalue,
            contribution,
            vector,
        });
    }
    let model = KecaModel::from_parts(spec, train, feature_len, axes)?;
    Ok((model, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keca::Retention;
    use std::fs;

    fn sample_model() -> (KecaModel, Vec<String>) {
        let points: Vec<Vec<f64>> = (0..6)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.5).cos(), i as f64 * 0.1])
            .collect();
        let spec = KernelSpec {
            kind: KernelKind::Gaussian { width: 0.9 },
            normalize: true,
        };
        let model = KecaModel::fit(&points, spec, Retention::Count(3)).unwrap();
        let labels = (0..6).map(|i| format!("s{}", i / 2)).collect();
        (model, labels)
    }

    #[test]
    fn round_trip_preserves_model_and_labels_bit_for_bit() {
        let (model, labels) = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.bin");
        save_model(&p, &model, &labels).unwrap();
        let (back, back_labels) = load_model(&p).unwrap();
        assert_eq!(back, model);
        assert_eq!(back_labels, labels);

        // Saving the loaded model reproduces the identical byte stream.
        let original = fs::read(&p).unwrap();
        let p2 = dir.path().join("model2.bin");
        save_model(&p2, &back, &back_labels).unwrap();
        assert_eq!(fs::read(&p2).unwrap(), original);
    }

    #[test]
    fn round_trip_covers_every_kernel_kind() {
        let points = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.7, 0.7]];
        let dir = tempfile::tempdir().unwrap();
        for (i, kind) in [
            KernelKind::Cosine,
            KernelKind::Gaussian { width: 2.5 },
            KernelKind::Polynomial { degree: 2, offset: 1.0 },
        ]
        .into_iter()
        .enumerate()
        {
            let spec = KernelSpec { kind, normalize: i % 2 == 0 };
            let model = KecaModel::fit(&points, spec, Retention::Count(2)).unwrap();
            let labels = vec!["a".into(), "b".into(), "c".into()];
            let p = dir.path().join(format!("m{i}.bin"));
            save_model(&p, &model, &labels).unwrap();
            let (back, _) = load_model(&p).unwrap();
            assert_eq!(back, model, "kind {i}");
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bogus.bin");
        fs::write(&p, b"NOTMODELfollowed by junk").unwrap();
        let err = load_model(&p).unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        let (model, labels) = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.bin");
        save_model(&p, &model, &labels).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes[8] = 99; // version field
        fs::write(&p, &bytes).unwrap();
        let err = load_model(&p).unwrap_err().to_string();
        assert!(err.contains("version 99"), "{err}");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let (model, labels) = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.bin");
        save_model(&p, &model, &labels).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
        let err = load_model(&p).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn label_count_must_match_training_samples() {
        let (model, _) = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.bin");
        let err = save_model(&p, &model, &["one".into()]).unwrap_err().to_string();
        assert!(err.contains("labels"), "{err}");
    }
}
