use crate::error::{bail, Result};
use crate::tokenizer::{AudioClip, ImageTensor, CHANNELS};

/// Overlap of each output cell with the source cells along one axis, as
/// `(source index, weight)` lists whose weights sum to 1.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let w = (hi.min(s as f64 + 1.0) - lo.max(s as f64)) / scale;
                    (w > 0.0).then_some((s, w))
                })
                .collect()
        })
        .collect()
}

/// Area-average resize to `height × width`. Never enlarges.
pub fn downsample_image(img: &ImageTensor, height: usize, width: usize) -> Result<ImageTensor> {
    if height == 0 || width == 0 || height > img.height() || width > img.width() {
        bail!(
            Usage,
            "cannot resize {}x{} to {height}x{width}: only shrinking is supported",
            img.height(),
            img.width()
        );
    }
    if (height, width) == (img.height(), img.width()) {
        return Ok(img.clone());
    }
    let wy = axis_weights(img.height(), height);
    let wx = axis_weights(img.width(), width);
    let mut out = Vec::with_capacity(CHANNELS * height * width);
    for c in 0..CHANNELS {
        for row in &wy {
            for col in &wx {
                let mut acc = 0.0;
                for &(sy, a) in row {
                    for &(sx, b) in col {
                        acc += a * b * img.pixel(sy, sx, c);
                    }
                }
                out.push(acc.clamp(0.0, 1.0));
            }
        }
    }
    ImageTensor::new(height, width, out)
}

/// Keeps every `factor`-th sample, starting with the first. No anti-alias filter.
pub fn downsample_audio(clip: &AudioClip, factor: usize) -> Result<AudioClip> {
    if factor == 0 {
        bail!(Usage, "downsampling factor must be at least 1");
    }
    let samples = clip.samples().iter().step_by(factor).copied().collect();
    AudioClip::new(samples, (clip.sample_rate() / factor as u32).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn constant_stays_constant() {
        let img = ImageTensor::filled(45, 70, 0.3).unwrap();
        let small = downsample_image(&img, 32, 32).unwrap();
        assert!(small.data().iter().all(|v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn checkerboard_averages_to_half() {
        let data = (0..3 * 64 * 64).map(|i| ((i / 64 + i % 64) % 2) as f64).collect();
        let img = ImageTensor::new(64, 64, data).unwrap();
        let small = downsample_image(&img, 32, 32).unwrap();
        assert!(small.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn full_hd_respects_block_bounds() {
        let mut rng = Rng::new(3);
        let (h, w) = (1080, 1920);
        let img = ImageTensor::new(h, w, (0..3 * h * w).map(|_| rng.uniform()).collect()).unwrap();
        let small = downsample_image(&img, 32, 32).unwrap();
        for c in 0..3 {
            for oy in 0..32 {
                for ox in 0..32 {
                    let (y0, y1) = (oy * h / 32, ((oy + 1) * h).div_ceil(32));
                    let (x0, x1) = (ox * w / 32, ((ox + 1) * w).div_ceil(32));
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for y in y0..y1 {
                        for x in x0..x1 {
                            lo = lo.min(img.pixel(y, x, c));
                            hi = hi.max(img.pixel(y, x, c));
                        }
                    }
                    let v = small.pixel(oy, ox, c);
                    assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn target_size_is_a_fixed_point() {
        let mut rng = Rng::new(4);
        let img = ImageTensor::new(50, 40, (0..6000).map(|_| rng.uniform()).collect()).unwrap();
        let once = downsample_image(&img, 32, 32).unwrap();
        assert_eq!(downsample_image(&once, 32, 32).unwrap(), once);
        assert!(matches!(downsample_image(&once, 33, 32), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn audio_decimation() {
        let ramp = AudioClip::new((0..10).map(|i| i as f64 / 10.0).collect(), 100).unwrap();
        assert_eq!(downsample_audio(&ramp, 1).unwrap(), ramp);
        let half = downsample_audio(&ramp, 2).unwrap();
        assert_eq!(half.samples(), [0.0, 0.2, 0.4, 0.6, 0.8]);
        assert_eq!(half.sample_rate(), 50);
        let long = AudioClip::new(vec![0.0; 22050], 44100).unwrap();
        assert_eq!(downsample_audio(&long, 10).unwrap().len(), 2205);
        assert!(downsample_audio(&ramp, 0).is_err());
    }
}
