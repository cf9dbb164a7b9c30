use super::DataError;
use crate::tensor::Tensor;

/// Luma weights for RGB to grey.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Converts a raw `[h, w]` or `[h, w, 3]` image with 0..255 values into a
/// `[side, side]` grey tensor in [0, 1]: luminance, then 2x2 mean pooling
/// per halving step, then division by 255.
///
/// The input must be square with extent `side * 2^k`.
pub fn preprocess_image(raw: &Tensor, side: usize) -> Result<Tensor, DataError> {
    let shape = raw.shape();
    let unsupported = || DataError::UnsupportedExtent {
        shape: shape.to_vec(),
        side,
    };
    let (h, w) = match shape {
        [h, w] => (*h, *w),
        [h, w, 3] => (*h, *w),
        _ => return Err(unsupported()),
    };
    if h != w || side == 0 || h < side || h % side != 0 || !(h / side).is_power_of_two() {
        return Err(unsupported());
    }
    let src = raw.data();
    let mut grey: Vec<f64> = if shape.len() == 3 {
        src.chunks_exact(3)
            .map(|px| LUMA[0] * px[0] as f64 + LUMA[1] * px[1] as f64 + LUMA[2] * px[2] as f64)
            .collect()
    } else {
        src.iter().map(|&v| v as f64).collect()
    };
    let mut cur = h;
    while cur > side {
        let half = cur / 2;
        let mut next = vec![0.0; half * half];
        for y in 0..half {
            for x in 0..half {
                let a = grey[2 * y * cur + 2 * x];
                let b = grey[2 * y * cur + 2 * x + 1];
                let c = grey[(2 * y + 1) * cur + 2 * x];
                let d = grey[(2 * y + 1) * cur + 2 * x + 1];
                next[y * half + x] = (a + b + c + d) / 4.0;
            }
        }
        grey = next;
        cur = half;
    }
    let data = grey
        .into_iter()
        .map(|v| ((v / 255.0).clamp(0.0, 1.0)) as f32)
        .collect();
    Ok(Tensor::from_parts(vec![side, side], data))
}
