//! Grayscale raster I/O, resizing, and labeled dataset loading.
//!
//! Images are stored as `f64` intensities in `[0, 255]`, row-major with the
//! origin at the top-left corner. Only 8-bit PGM files (magics `P2` and `P5`)
//! are supported; sample values are read verbatim, never rescaled by `maxval`.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A grayscale image. Dimensions are always at least 1×1 and every sample
/// lies in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Builds an image from row-major samples, validating the container
    /// invariants (positive dimensions, matching length, values in `[0, 255]`).
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image {
                reason: format!("dimensions must be positive, got {width}x{height}"),
            });
        }
        if data.len() != width * height {
            return Err(Error::Image {
                reason: format!(
                    "expected {} samples for {}x{}, got {}",
                    width * height,
                    width,
                    height,
                    data.len()
                ),
            });
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::Image {
                reason: format!("sample value {bad} outside [0, 255]"),
            });
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    /// Reads an 8-bit PGM file (`P2` ASCII or `P5` binary).
    pub fn load_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (width, height, data) = decode_pgm(&bytes).map_err(|reason| Error::Pgm {
            path: path.to_path_buf(),
            reason,
        })?;
        GrayImage::new(width, height, data)
    }

    /// Writes the image as binary `P5` with maxval 255. Samples are rounded
    /// to the nearest integer. The header layout is fixed, so saving the same
    /// image twice produces byte-identical files.
    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| v.round() as u8));
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Bilinear resampling with endpoint alignment: source position for
    /// target index `t` is `t * (src_len - 1) / (dst_len - 1)`, so the corner
    /// pixels map exactly. A target dimension of 1 samples position 0.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<GrayImage> {
        if width == 0 || height == 0 {
            return Err(Error::Image {
                reason: format!("resize target must be positive, got {width}x{height}"),
            });
        }
        let mut data = Vec::with_capacity(width * height);
        for ty in 0..height {
            let sy = source_pos(ty, height, self.height);
            let y0 = sy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let fy = sy - y0 as f64;
            for tx in 0..width {
                let sx = source_pos(tx, width, self.width);
                let x0 = sx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let fx = sx - x0 as f64;
                let top = (1.0 - fx) * self.get(x0, y0) + fx * self.get(x1, y0);
                let bottom = (1.0 - fx) * self.get(x0, y1) + fx * self.get(x1, y1);
                let v = (1.0 - fy) * top + fy * bottom;
                // Convex combination of in-range samples; the clamp only
                // guards against the last-ulp overshoot of (1-f)+f != 1.
                data.push(v.clamp(0.0, 255.0));
            }
        }
        GrayImage::new(width, height, data)
    }
}

fn source_pos(t: usize, dst: usize, src: usize) -> f64 {
    if dst > 1 {
        t as f64 * (src - 1) as f64 / (dst - 1) as f64
    } else {
        0.0
    }
}

/// Decodes a PGM byte stream. Returns `(width, height, samples)` or a
/// human-readable reason string (the caller attaches the path).
fn decode_pgm(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<f64>), String> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token().ok_or("missing magic number")?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(format!(
                "unsupported magic {:?} (only P2 and P5 are handled)",
                String::from_utf8_lossy(other)
            ))
        }
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format!("dimensions must be positive, got {width}x{height}"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval} (must be 1..=255)"));
    }
    let expected = width * height;
    let data = if binary {
        // The header ends with exactly one whitespace byte before the raster.
        match cur.bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err("missing whitespace separator after maxval".into()),
        }
        let raster = &cur.bytes[cur.pos..];
        if raster.len() < expected {
            return Err(format!(
                "truncated raster: expected {expected} bytes, found {}",
                raster.len()
            ));
        }
        raster[..expected].iter().map(|&b| b as f64).collect()
    } else {
        let mut data = Vec::with_capacity(expected);
        for i in 0..expected {
            let v = cur.number("sample").map_err(|_| {
                format!("truncated raster: expected {expected} samples, found {i}")
            })?;
            if v > maxval {
                return Err(format!("sample value {v} exceeds maxval {maxval}"));
            }
            data.push(v as f64);
        }
        data
    };
    Ok((width, height, data))
}

/// Byte cursor over a PGM header. Comments run from `#` to end of line and
/// count as whitespace.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        let tok = self
            .token()
            .ok_or_else(|| format!("missing {what} in header"))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| format!("invalid {what} {:?}", String::from_utf8_lossy(tok)))
    }
}

/// How a dataset entry participates in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Used to fit the subspace model and class statistics.
    Train,
    /// Probe whose identity is enrolled; the system should accept it.
    PositiveTest,
    /// Probe whose identity is not enrolled; the system should reject it.
    NegativeTest,
}

impl Role {
    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "train" => Some(Role::Train),
            "positive-test" => Some(Role::PositiveTest),
            "negative-test" => Some(Role::NegativeTest),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::PositiveTest => "positive-test",
            Role::NegativeTest => "negative-test",
        }
    }
}

/// One loaded dataset entry: the image (already resized to the working
/// geometry), its class label, and its role.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub image: GrayImage,
    pub label: String,
    pub role: Role,
    pub path: PathBuf,
}

/// A dataset assembled from a manifest file.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub entries: Vec<LabeledImage>,
}

impl Dataset {
    /// Loads a CSV manifest of the form
    ///
    /// ```text
    /// path,label,role
    /// faces/s1_1.pgm,s1,train
    /// faces/s1_9.pgm,s1,positive-test
    /// ```
    ///
    /// Relative image paths are resolved against the manifest's directory.
    /// Every image is resized to `width`×`height` on load. Validation
    /// rejects duplicate `(path, role)` pairs, unknown roles, rows with the
    /// wrong field count, and positive-test labels that have no training
    /// rows (such probes could never be accepted correctly).
    pub fn load_manifest(path: impl AsRef<Path>, width: usize, height: usize) -> Result<Dataset> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().unwrap_or_else(|| Path::new(""));
        let manifest_err = |line: usize, reason: String| Error::Manifest {
            path: path.to_path_buf(),
            line,
            reason,
        };

        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((i, l)) if l.trim().is_empty() => {
                    // Tolerate leading blank lines but nothing else.
                    let _ = i;
                }
                Some((i, l)) => break (i, l),
                None => return Err(manifest_err(0, "empty manifest".into())),
            }
        };
        if header.1.trim() != "path,label,role" {
            return Err(manifest_err(
                header.0 + 1,
                format!("header must be \"path,label,role\", got {:?}", header.1),
            ));
        }

        let mut entries = Vec::new();
        let mut seen: HashSet<(PathBuf, Role)> = HashSet::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(manifest_err(
                    line_no,
                    format!("expected 3 comma-separated fields, got {}", fields.len()),
                ));
            }
            let (raw_path, label, raw_role) = (fields[0], fields[1], fields[2]);
            if raw_path.is_empty() {
                return Err(manifest_err(line_no, "empty path".into()));
            }
            if label.is_empty() {
                return Err(manifest_err(line_no, "empty label".into()));
            }
            let role = Role::parse(raw_role).ok_or_else(|| {
                manifest_err(
                    line_no,
                    format!(
                        "unknown role {raw_role:?} (expected train, positive-test or negative-test)"
                    ),
                )
            })?;
            let img_path = if Path::new(raw_path).is_absolute() {
                PathBuf::from(raw_path)
            } else {
                dir.join(raw_path)
            };
            if !seen.insert((img_path.clone(), role)) {
                return Err(manifest_err(
                    line_no,
                    format!("duplicate entry {raw_path:?} with role {}", role.name()),
                ));
            }
            let image = GrayImage::load_pgm(&img_path)?.resize_bilinear(width, height)?;
            entries.push(LabeledImage {
                image,
                label: label.to_string(),
                role,
                path: img_path,
            });
        }

        let train_labels: HashSet<&str> = entries
            .iter()
            .filter(|e| e.role == Role::Train)
            .map(|e| e.label.as_str())
            .collect();
        for e in &entries {
            if e.role == Role::PositiveTest && !train_labels.contains(e.label.as_str()) {
                return Err(manifest_err(
                    0,
                    format!(
                        "positive-test label {:?} has no training rows ({})",
                        e.label,
                        e.path.display()
                    ),
                ));
            }
        }

        Ok(Dataset { entries })
    }

    /// Every entry, in manifest order.
    pub fn entries(&self) -> &[LabeledImage] {
        &self.entries
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &LabeledImage> {
        self.entries.iter().filter(move |e| e.role == role)
    }

    pub fn train(&self) -> impl Iterator<Item = &LabeledImage> {
        self.with_role(Role::Train)
    }

    /// Positive and negative probes, in manifest order.
    pub fn probes(&self) -> impl Iterator<Item = &LabeledImage> {
        self.entries.iter().filter(|e| e.role != Role::Train)
    }
}
