//! Minimal binary PGM (`P5`) and PPM (`P6`) support, 8-bit samples only.

use std::fs;
use std::path::Path;

use super::DataError;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmImage {
    pub width: usize,
    pub height: usize,
    /// 1 for PGM, 3 for PPM
    pub channels: usize,
    pub data: Vec<u8>,
}

impl PnmImage {
    /// `[h, w]` or `[h, w, 3]` tensor of raw 0..255 values.
    pub fn to_tensor(&self) -> Tensor {
        let shape = if self.channels == 1 {
            vec![self.height, self.width]
        } else {
            vec![self.height, self.width, 3]
        };
        Tensor::from_parts(shape, self.data.iter().map(|&b| b as f32).collect())
    }

    /// Grey image from a `[h, w]` tensor of values in [0, 1].
    pub fn from_unit_tensor(t: &Tensor) -> Self {
        assert_eq!(t.shape().len(), 2, "grey image tensor must be 2-D");
        Self {
            width: t.shape()[1],
            height: t.shape()[0],
            channels: 1,
            data: t.data().iter().map(|&v| quantize(v)).collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn skip_space_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            b if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Result<usize, String> {
    skip_space_and_comments(bytes, pos);
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("bad header field at byte {start}"))
}

pub fn decode(bytes: &[u8]) -> Result<PnmImage, String> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err("not a binary PGM/PPM (expected P5 or P6)".into()),
    };
    let mut pos = 2;
    let width = header_number(bytes, &mut pos)?;
    let height = header_number(bytes, &mut pos)?;
    let maxval = header_number(bytes, &mut pos)?;
    if width == 0 || height == 0 {
        return Err("zero image extent".into());
    }
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}, expected 255"));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err("missing whitespace after header".into());
    }
    pos += 1;
    let n = width * height * channels;
    let data = bytes
        .get(pos..pos + n)
        .ok_or_else(|| {
            format!(
                "raster truncated: need {n} bytes, have {}",
                bytes.len() - pos
            )
        })?
        .to_vec();
    Ok(PnmImage {
        width,
        height,
        channels,
        data,
    })
}

pub fn read(path: &Path) -> Result<PnmImage, DataError> {
    let bytes = fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes).map_err(|reason| DataError::Image {
        path: path.display().to_string(),
        reason,
    })
}

pub fn write(path: &Path, img: &PnmImage) -> Result<(), DataError> {
    fs::write(path, img.encode()).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_with_comment() {
        let img = PnmImage {
            width: 3,
            height: 2,
            channels: 1,
            data: vec![0, 1, 2, 253, 254, 255],
        };
        assert_eq!(decode(&img.encode()).unwrap(), img);
        let with_comment = b"P5\n# made by hand\n3 2\n255\n\x00\x01\x02\xfd\xfe\xff";
        assert_eq!(decode(with_comment).unwrap(), img);
    }

    #[test]
    fn ppm_tensor_shape() {
        let img = PnmImage {
            width: 2,
            height: 1,
            channels: 3,
            data: vec![10, 20, 30, 40, 50, 60],
        };
        let back = decode(&img.encode()).unwrap();
        assert_eq!(back.to_tensor().shape(), &[1, 2, 3]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }
}
