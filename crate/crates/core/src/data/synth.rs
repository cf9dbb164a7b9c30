//! Procedural road images: a bright centre line on a darker surface.

use rayon::prelude::*;

use super::{DataError, Dataset, Sample, Split};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Fraction of the image height at which labels are taken.
pub const REFERENCE_ROW_FRACTION: f64 = 0.75;

/// Closed range `[lo, hi]`.
pub type Range = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub count: usize,
    pub side: usize,
    /// line width in pixels
    pub width: Range,
    /// degrees from vertical
    pub angle: Range,
    /// horizontal offset of the line at the reference row, pixels from centre
    pub offset: Range,
    /// road surface grey level
    pub road_level: Range,
    /// line grey level
    pub line_level: Range,
    /// global brightness multiplier
    pub brightness: Range,
    /// std-dev of additive Gaussian noise, in [0, 1] units
    pub noise_sigma: f64,
    pub seed: u64,
}

impl GenConfig {
    /// Defaults scaled to an image of `side` pixels.
    pub fn for_side(side: usize, count: usize, seed: u64) -> Self {
        let s = side as f64 / 112.0;
        Self {
            count,
            side,
            width: (5.0 * s, 12.0 * s),
            angle: (-30.0, 30.0),
            offset: (-36.0 * s, 36.0 * s),
            road_level: (0.12, 0.4),
            line_level: (0.7, 0.95),
            brightness: (0.75, 1.15),
            noise_sigma: 0.03,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::Config(m.to_string()));
        if self.count == 0 {
            return bad("count must be at least 1");
        }
        if self.side < 8 || self.side % 4 != 0 {
            return bad("side must be a multiple of 4 and at least 8");
        }
        for (name, (lo, hi)) in [
            ("width", self.width),
            ("angle", self.angle),
            ("offset", self.offset),
            ("road level", self.road_level),
            ("line level", self.line_level),
            ("brightness", self.brightness),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(&format!("{name} range must satisfy lo <= hi"));
            }
        }
        if self.width.0 <= 0.0 {
            return bad("line width must be positive");
        }
        if self.angle.0 <= -80.0 || self.angle.1 >= 80.0 {
            return bad("angle must lie within (-80, 80) degrees");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be non-negative");
        }
        Ok(())
    }
}

/// Parameters of one rendered scene.
#[derive(Debug, Clone, Copy)]
pub struct Scene {
    pub side: usize,
    pub center_x: f64,
    pub angle_deg: f64,
    pub width: f64,
    pub road: f64,
    pub line: f64,
    pub brightness: f64,
}

impl Scene {
    pub fn reference_row(&self) -> f64 {
        REFERENCE_ROW_FRACTION * self.side as f64
    }

    /// Noise-free intensity at pixel `(x, y)`, sampled at the pixel centre.
    pub fn intensity(&self, x: usize, y: usize) -> f64 {
        let theta = self.angle_deg.to_radians();
        let dx = x as f64 + 0.5 - self.center_x;
        let dy = y as f64 + 0.5 - self.reference_row();
        let dist = (dx * theta.cos() - dy * theta.sin()).abs();
        let coverage = (self.width / 2.0 + 0.5 - dist).clamp(0.0, 1.0);
        self.brightness * (self.road + (self.line - self.road) * coverage)
    }

    /// Label in pixel coordinates: the centreline at the reference row.
    pub fn label(&self) -> [f32; 2] {
        let s = self.side as f64;
        [
            self.center_x.clamp(0.0, s) as f32,
            self.reference_row().clamp(0.0, s) as f32,
        ]
    }
}

fn render(scene: &Scene, noise_sigma: f64, rng: &mut Rng) -> Tensor {
    let side = scene.side;
    let mut data = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let mut v = scene.intensity(x, y);
            if noise_sigma > 0.0 {
                v += noise_sigma * rng.normal();
            }
            // stored as 8-bit, so keep the quantized value
            data.push(super::pnm::quantize(v as f32) as f32 / 255.0);
        }
    }
    Tensor::from_parts(vec![side, side], data)
}

fn sample_scene(cfg: &GenConfig, rng: &mut Rng) -> Scene {
    let mut pick = |(lo, hi): Range| rng.uniform_f64(lo, hi);
    let offset = pick(cfg.offset);
    let angle_deg = pick(cfg.angle);
    let width = pick(cfg.width);
    let road = pick(cfg.road_level);
    let line = pick(cfg.line_level);
    let brightness = pick(cfg.brightness);
    Scene {
        side: cfg.side,
        center_x: cfg.side as f64 / 2.0 + offset,
        angle_deg,
        width,
        road,
        line,
        brightness,
    }
}

/// Renders `cfg.count` samples. Sample `i` depends only on `(seed, i)`.
pub fn generate_synthetic(cfg: &GenConfig) -> Result<Dataset, DataError> {
    cfg.validate()?;
    let samples = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::derive(cfg.seed, &[i as u64]);
            let scene = sample_scene(cfg, &mut rng);
            Sample {
                image: render(&scene, cfg.noise_sigma, &mut rng),
                label_px: scene.label(),
            }
        })
        .collect();
    Dataset::new(samples, Split::Train)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(count: usize, seed: u64) -> GenConfig {
        GenConfig {
            noise_sigma: 0.0,
            brightness: (1.0, 1.0),
            ..GenConfig::for_side(112, count, seed)
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(&quiet(5, 42)).unwrap();
        let b = generate_synthetic(&quiet(5, 42)).unwrap();
        assert_eq!(a, b);
        let noisy = GenConfig::for_side(56, 3, 1);
        assert_eq!(
            generate_synthetic(&noisy).unwrap(),
            generate_synthetic(&noisy).unwrap()
        );
    }

    #[test]
    fn vertical_centred_line_label() {
        let cfg = GenConfig {
            angle: (0.0, 0.0),
            offset: (0.0, 0.0),
            ..quiet(1, 0)
        };
        let ds = generate_synthetic(&cfg).unwrap();
        assert_eq!(ds.samples[0].label_px, [56.0, 84.0]);
    }

    #[test]
    fn labels_sit_on_rendered_line() {
        let ds = generate_synthetic(&quiet(40, 3)).unwrap();
        for s in &ds.samples {
            let side = s.image.shape()[0];
            let row = s.label_px[1] as usize;
            let line = &s.image.data()[row * side..(row + 1) * side];
            let max = line.iter().cloned().fold(f32::MIN, f32::max);
            let cols: Vec<f64> = (0..side)
                .filter(|&c| line[c] == max)
                .map(|c| c as f64 + 0.5)
                .collect();
            let centroid = cols.iter().sum::<f64>() / cols.len() as f64;
            assert!(
                (centroid - s.label_px[0] as f64).abs() <= 1.0,
                "label {:?} centroid {centroid}",
                s.label_px
            );
        }
    }

    #[test]
    fn labels_stay_clear_of_edges() {
        let ds = generate_synthetic(&GenConfig::for_side(112, 200, 9)).unwrap();
        for s in &ds.samples {
            assert!(s.label_px[0] >= 4.0 && s.label_px[0] <= 108.0);
            assert!(s.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = quiet(0, 0);
        assert!(generate_synthetic(&cfg).is_err());
        cfg.count = 1;
        cfg.noise_sigma = -1.0;
        assert!(generate_synthetic(&cfg).is_err());
        cfg.noise_sigma = 0.0;
        cfg.width = (3.0, 2.0);
        assert!(generate_synthetic(&cfg).is_err());
    }
}
