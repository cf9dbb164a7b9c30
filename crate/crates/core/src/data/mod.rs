//! Datasets of grey track images labelled with the track-centre pixel.

pub mod pnm;
mod preprocess;
pub mod synth;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use preprocess::preprocess_image;
pub use synth::{generate_synthetic, GenConfig};

use crate::tensor::Tensor;

pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("image {path}: {reason}")]
    Image { path: String, reason: String },
    #[error("{file} row {row}: {reason}")]
    Row {
        file: String,
        row: usize,
        reason: String,
    },
    #[error("unsupported image extent {shape:?} for a {side}x{side} target")]
    UnsupportedExtent { shape: Vec<usize>, side: usize },
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("dataset is empty")]
    Empty,
    #[error("dataset images differ in shape: {0:?} vs {1:?}")]
    MixedShapes(Vec<usize>, Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `[side, side]`, values in [0, 1]
    pub image: Tensor,
    /// track centre `(x, y)` in pixels, each in `[0, side]`
    pub label_px: [f32; 2],
}

impl Sample {
    pub fn side(&self) -> usize {
        self.image.shape()[0]
    }

    pub fn label_norm(&self) -> [f32; 2] {
        let s = self.side();
        self.label_px.map(|p| normalize_label(p, s))
    }
}

/// Pixel coordinate to the tanh range: `p / (side / 2) - 1`.
pub fn normalize_label(p: f32, side: usize) -> f32 {
    (p as f64 / (side as f64 / 2.0) - 1.0) as f32
}

pub fn denormalize_label(v: f32, side: usize) -> f32 {
    ((v as f64 + 1.0) * side as f64 / 2.0) as f32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub split: Split,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, split: Split) -> Result<Self, DataError> {
        let first = samples
            .first()
            .ok_or(DataError::Empty)?
            .image
            .shape()
            .to_vec();
        if let Some(s) = samples.iter().find(|s| s.image.shape() != first.as_slice()) {
            return Err(DataError::MixedShapes(first, s.image.shape().to_vec()));
        }
        Ok(Self { samples, split })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn side(&self) -> usize {
        self.samples[0].side()
    }

    /// Deterministic shuffle, then the last `test_fraction` becomes the test
    /// split (at least one sample on each side when `len >= 2`).
    pub fn split(self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
        let mut samples = self.samples;
        crate::rng::Rng::derive(seed, &[0x5EED]).shuffle(&mut samples);
        let n = samples.len();
        let mut n_test = (n as f64 * test_fraction).round() as usize;
        if n >= 2 {
            n_test = n_test.clamp(1, n - 1);
        }
        let test = samples.split_off(n - n_test);
        Ok((
            Dataset::new(samples, Split::Train)?,
            Dataset::new(test, Split::Test)?,
        ))
    }
}

/// Reads a PGM/PPM file and preprocesses it to a `side`x`side` tensor.
pub fn load_image(path: &Path, side: usize) -> Result<Tensor, DataError> {
    let img = pnm::read(path)?;
    preprocess_image(&img.to_tensor(), side)
}

pub fn image_file_name(index: usize) -> String {
    format!("image_{index}.pgm")
}

/// Writes `image_<i>.pgm` files and `labels.csv` into `dir`.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<(), DataError> {
    let io = |path: &Path| {
        let p = path.display().to_string();
        move |source| DataError::Io { path: p, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut csv = String::from("filename,x,y\n");
    for (i, s) in ds.samples.iter().enumerate() {
        let name = image_file_name(i);
        pnm::write(&dir.join(&name), &pnm::PnmImage::from_unit_tensor(&s.image))?;
        csv.push_str(&format!("{name},{},{}\n", s.label_px[0], s.label_px[1]));
    }
    let labels = dir.join(LABELS_FILE);
    fs::write(&labels, csv).map_err(io(&labels))
}

/// Loads `dir/labels.csv` and the images it names, in row order. Images are
/// preprocessed to `side` (default: their stored extent) and labels are
/// rescaled from stored resolution to `side`.
pub fn load_dataset(dir: &Path, side: Option<usize>) -> Result<Dataset, DataError> {
    let labels_path = dir.join(LABELS_FILE);
    let file = labels_path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&labels_path)
        .map_err(|e| DataError::Row {
            file: file.clone(),
            row: 0,
            reason: e.to_string(),
        })?;
    let row_err = |row: usize, reason: String| DataError::Row {
        file: file.clone(),
        row,
        reason,
    };
    let headers = reader.headers().map_err(|e| row_err(0, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["filename", "x", "y"] {
        return Err(row_err(0, "header must be `filename,x,y`".into()));
    }
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| row_err(row, e.to_string()))?;
        if record.len() != 3 {
            return Err(row_err(
                row,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let coord = |k: usize| -> Result<f32, DataError> {
            record[k]
                .parse::<f32>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| row_err(row, format!("bad coordinate `{}`", &record[k])))
        };
        let (x, y) = (coord(1)?, coord(2)?);
        let path: PathBuf = dir.join(&record[0]);
        if !path.is_file() {
            return Err(row_err(
                row,
                format!("image file `{}` not found", &record[0]),
            ));
        }
        let img = pnm::read(&path)?;
        if img.width != img.height {
            return Err(row_err(
                row,
                format!("image `{}` is not square", &record[0]),
            ));
        }
        let stored = img.width;
        for v in [x, y] {
            if !(0.0..=stored as f32).contains(&v) {
                return Err(row_err(
                    row,
                    format!(
                        "label ({x}, {y}) outside [0, {stored}] for `{}`",
                        &record[0]
                    ),
                ));
            }
        }
        let target = side.unwrap_or(stored);
        let image = preprocess_image(&img.to_tensor(), target)?;
        let scale = target as f64 / stored as f64;
        let label_px = if stored == target {
            [x, y]
        } else {
            [(x as f64 * scale) as f32, (y as f64 * scale) as f32]
        };
        samples.push(Sample { image, label_px });
    }
    Dataset::new(samples, Split::Train)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_round_trip() {
        for p in [0.0f32, 4.0, 55.5, 56.0, 84.0, 111.9, 112.0] {
            let n = normalize_label(p, 112);
            assert!((denormalize_label(n, 112) - p).abs() < 1e-5);
        }
        assert_eq!(normalize_label(56.0, 112), 0.0);
        assert_eq!(normalize_label(0.0, 112), -1.0);
    }

    #[test]
    fn written_dataset_loads_back_equal() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_synthetic(&GenConfig::for_side(56, 6, 2)).unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path(), None).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn missing_image_is_named() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(LABELS_FILE), "filename,x,y\nnope.pgm,1,2\n").unwrap();
        let err = load_dataset(dir.path(), None).unwrap_err().to_string();
        assert!(err.contains("nope.pgm") && err.contains("row 1"), "{err}");
    }

    #[test]
    fn out_of_range_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let img = pnm::PnmImage::from_unit_tensor(&Tensor::zeros(&[112, 112]));
        pnm::write(&dir.path().join("a.pgm"), &img).unwrap();
        fs::write(dir.path().join(LABELS_FILE), "filename,x,y\na.pgm,300,10\n").unwrap();
        let err = load_dataset(dir.path(), None).unwrap_err().to_string();
        assert!(err.contains("outside"), "{err}");
    }

    #[test]
    fn malformed_row_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let img = pnm::PnmImage::from_unit_tensor(&Tensor::zeros(&[8, 8]));
        pnm::write(&dir.path().join("a.pgm"), &img).unwrap();
        fs::write(
            dir.path().join(LABELS_FILE),
            "filename,x,y\na.pgm,1,2\na.pgm,x,2\n",
        )
        .unwrap();
        let err = load_dataset(dir.path(), None).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn downscale_converts_labels() {
        let dir = tempfile::tempdir().unwrap();
        let img = pnm::PnmImage {
            width: 224,
            height: 224,
            channels: 3,
            data: vec![200; 224 * 224 * 3],
        };
        pnm::write(&dir.path().join("c.ppm"), &img).unwrap();
        fs::write(dir.path().join(LABELS_FILE), "filename,x,y\nc.ppm,68,110\n").unwrap();
        let ds = load_dataset(dir.path(), Some(112)).unwrap();
        assert_eq!(ds.samples[0].label_px, [34.0, 55.0]);
        assert_eq!(ds.side(), 112);
    }

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let ds = generate_synthetic(&GenConfig::for_side(8, 10, 1)).unwrap();
        let (a, b) = ds.clone().split(0.2, 4).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let (a2, b2) = ds.split(0.2, 4).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }
}
