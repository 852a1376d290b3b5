use std::f64::consts::TAU;

use super::{Dataset, PairedSample};
use crate::error::{bail, Result};
use crate::numerics::Rng;
use crate::tokenizer::{AudioClip, ImageTensor, CHANNELS};

/// Number of shared latent factors behind each synthetic pair.
pub const FACTORS: usize = 3;

/// Clips are treated as half a second long.
pub fn synth_sample_rate(audio_len: usize) -> u32 {
    (2 * audio_len) as u32
}

/// Sample `index` of the stream for `seed`; depends on nothing else.
///
/// Factors `f ∈ [0,1)³`. The first drives both modalities strongly: overall image
/// brightness and the signed amplitude of a slow audio swell. The others add detail:
/// per-channel tint (f1, f2), grating frequency (f1) and angle (f2), carrier amplitude
/// and frequency (f1), and a quiet second partial (f2). Both modalities get small
/// independent noise.
pub fn synth_sample(index: usize, height: usize, width: usize, audio_len: usize, seed: u64) -> Result<PairedSample> {
    if height == 0 || width == 0 || audio_len == 0 {
        bail!(Dimension, "synthetic shapes must be positive");
    }
    let mut rng = Rng::new(seed).fork(index as u64);
    let f: Vec<f64> = (0..FACTORS).map(|_| rng.uniform()).collect();

    let freq = 1.0 + 2.0 * f[1];
    let (sin_a, cos_a) = (std::f64::consts::PI * f[2]).sin_cos();
    let mut pixels = Vec::with_capacity(CHANNELS * height * width);
    for g in [f[1], 1.0 - f[1], f[2]] {
        let tint = 0.2 + 0.45 * f[0] + 0.15 * g;
        for h in 0..height {
            let v = (h as f64 + 0.5) / height as f64;
            for w in 0..width {
                let u = (w as f64 + 0.5) / width as f64;
                let grating = (TAU * freq * (u * cos_a + v * sin_a) + TAU * f[0]).sin();
                pixels.push((tint + 0.1 * grating + 0.02 * rng.normal()).clamp(0.0, 1.0));
            }
        }
    }

    let swell = 0.5 * (2.0 * f[0] - 1.0);
    let amp = 0.1 + 0.15 * f[1];
    let carrier = 2.0 + 6.0 * f[1];
    let partial = 1.0 + 3.0 * f[2];
    let samples = (0..audio_len)
        .map(|k| {
            let t = k as f64 / audio_len as f64;
            let s = amp * (TAU * carrier * t + TAU * f[2]).sin()
                + 0.1 * (TAU * partial * t).sin()
                + swell * (std::f64::consts::PI * t).sin();
            (s + 0.01 * rng.normal()).clamp(-1.0, 1.0)
        })
        .collect();

    Ok(PairedSample {
        id: format!("synth-{index:05}"),
        image: ImageTensor::new(height, width, pixels)?,
        audio: AudioClip::new(samples, synth_sample_rate(audio_len))?,
    })
}

/// Samples `0..n` of the stream for `seed`.
pub fn synth_dataset(n: usize, height: usize, width: usize, audio_len: usize, seed: u64) -> Result<Vec<PairedSample>> {
    if n == 0 {
        bail!(Usage, "synthetic dataset needs at least one sample");
    }
    crate::numerics::par::map_indexed(n, |i| synth_sample(i, height, width, audio_len, seed))
        .into_iter()
        .collect()
}

/// Training samples `0..n_train` and held-out samples `n_train..n_train + n_val` of one stream.
pub fn synth_split(n_train: usize, n_val: usize, height: usize, width: usize, audio_len: usize, seed: u64) -> Result<Dataset> {
    let mut all = synth_dataset(n_train + n_val, height, width, audio_len, seed)?;
    let val = all.split_off(n_train);
    Dataset::new(all, val)
}
