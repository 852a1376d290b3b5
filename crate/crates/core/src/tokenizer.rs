//! Column-stripe tokenization of RGB images and equal-segment tokenization of audio.

use std::fmt;

use crate::error::{bail, Result};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Modality {
    Visual,
    Audio,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Visual => "visual",
            Modality::Audio => "audio",
        }
    }

    pub fn other(self) -> Modality {
        match self {
            Modality::Visual => Modality::Audio,
            Modality::Audio => Modality::Visual,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const CHANNELS: usize = 3;

/// RGB image with pixels in `[0, 1]`, stored channel-planar: index `(c·H + h)·W + w`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            bail!(Dimension, "image extents must be positive, got {height}x{width}");
        }
        if data.len() != CHANNELS * height * width {
            bail!(
                Dimension,
                "{height}x{width}x3 image needs {} values, got {}",
                CHANNELS * height * width,
                data.len()
            );
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            bail!(Dimension, "pixel value {v} outside [0, 1]");
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Clamps arbitrary reals (e.g. decoder output) into `[0, 1]`; NaN maps to 0.
    pub fn from_unclamped(height: usize, width: usize, data: &[f64]) -> Result<Self> {
        let clamped = data
            .iter()
            .map(|&v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Self::new(height, width, clamped)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; CHANNELS * height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, h: usize, w: usize, c: usize) -> f64 {
        self.data[(c * self.height + h) * self.width + w]
    }

    /// One channel as an `H × W` matrix.
    pub fn channel(&self, c: usize) -> Tensor {
        let plane = self.height * self.width;
        Tensor::from_parts(
            vec![self.height, self.width],
            self.data[c * plane..(c + 1) * plane].to_vec(),
        )
    }
}

/// Mono waveform with samples in `[−1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            bail!(Dimension, "audio clip has no samples");
        }
        if let Some(v) = samples.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            bail!(Dimension, "audio sample {v} outside [-1, 1]");
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Clamps arbitrary reals into `[−1, 1]`; NaN maps to 0.
    pub fn from_unclamped(samples: &[f64], sample_rate: u32) -> Result<Self> {
        let clamped = samples
            .iter()
            .map(|&v| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) })
            .collect();
        Self::new(clamped, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TokenBundle {
    modality: Modality,
    tokens: Vec<Vec<f64>>,
}

impl TokenBundle {
    pub fn new(modality: Modality, tokens: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = tokens.first() else {
            bail!(Tokenization, "token bundle is empty");
        };
        let len = first.len();
        if len == 0 || tokens.iter().any(|t| t.len() != len) {
            bail!(Tokenization, "tokens must share one positive length");
        }
        Ok(Self { modality, tokens })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn tokens(&self) -> &[Vec<f64>] {
        &self.tokens
    }

    pub fn token_len(&self) -> usize {
        self.tokens[0].len()
    }

    pub fn count(&self) -> usize {
        self.tokens.len()
    }
}

/// Column-major vectorization: entry `h + H·w` holds `channel[h][w]`.
pub fn vectorize_columns(channel: &Tensor) -> Result<Vec<f64>> {
    let (rows, cols) = channel.dims2()?;
    let mut out = Vec::with_capacity(rows * cols);
    for w in 0..cols {
        for h in 0..rows {
            out.push(channel.get2(h, w));
        }
    }
    Ok(out)
}

fn stripe_layout(stripes: usize, width: usize) -> Result<(usize, usize)> {
    if stripes == 0 || stripes % CHANNELS != 0 {
        bail!(
            Tokenization,
            "stripe count L = {stripes} must be a positive multiple of 3"
        );
    }
    let per_channel = stripes / CHANNELS;
    if width % per_channel != 0 {
        bail!(
            Tokenization,
            "image width W = {width} is not divisible by L/3 = {per_channel}"
        );
    }
    Ok((per_channel, width / per_channel))
}

/// Splits every channel into `L/3` contiguous column blocks and vectorizes each block
/// column-major. Token order: red blocks left to right, then green, then blue.
pub fn image_to_stripes(img: &ImageTensor, stripes: usize) -> Result<TokenBundle> {
    let (per_channel, block) = stripe_layout(stripes, img.width)?;
    let mut tokens = Vec::with_capacity(stripes);
    for c in 0..CHANNELS {
        for b in 0..per_channel {
            let mut t = Vec::with_capacity(img.height * block);
            for w in b * block..(b + 1) * block {
                for h in 0..img.height {
                    t.push(img.pixel(h, w, c));
                }
            }
            tokens.push(t);
        }
    }
    TokenBundle::new(Modality::Visual, tokens)
}

/// Inverse of [`image_to_stripes`].
pub fn reassemble_image(bundle: &TokenBundle, height: usize, width: usize) -> Result<ImageTensor> {
    if bundle.modality != Modality::Visual {
        bail!(Tokenization, "cannot reassemble an image from audio tokens");
    }
    let (per_channel, block) = stripe_layout(bundle.count(), width)?;
    if bundle.token_len() != height * block {
        bail!(
            Tokenization,
            "token length {} does not match a {height}x{width} image with {} stripes",
            bundle.token_len(),
            bundle.count()
        );
    }
    let mut data = vec![0.0; CHANNELS * height * width];
    for (i, t) in bundle.tokens.iter().enumerate() {
        let (c, b) = (i / per_channel, i % per_channel);
        for (j, &v) in t.iter().enumerate() {
            let (w, h) = (b * block + j / height, j % height);
            data[(c * height + h) * width + w] = v;
        }
    }
    ImageTensor::new(height, width, data)
}

/// `M` contiguous equal segments in temporal order.
pub fn audio_to_segments(clip: &AudioClip, segments: usize) -> Result<TokenBundle> {
    if segments == 0 || clip.len() % segments != 0 {
        bail!(
            Tokenization,
            "audio length {} is not divisible by M = {segments}",
            clip.len()
        );
    }
    let seg = clip.len() / segments;
    TokenBundle::new(
        Modality::Audio,
        clip.samples.chunks(seg).map(<[f64]>::to_vec).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn random_image(h: usize, w: usize, rng: &mut Rng) -> ImageTensor {
        ImageTensor::new(h, w, (0..3 * h * w).map(|_| rng.uniform()).collect()).unwrap()
    }

    #[test]
    fn vectorize_2x2() {
        let m = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(vectorize_columns(&m).unwrap(), vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn vectorize_single_column_is_identity() {
        let m = Tensor::matrix(4, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(vectorize_columns(&m).unwrap(), vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn vectorize_32x32_index_by_index() {
        let data: Vec<f64> = (0..1024).map(|i| i as f64).collect();
        let m = Tensor::matrix(32, 32, data).unwrap();
        let v = vectorize_columns(&m).unwrap();
        assert_eq!(v.len(), 1024);
        for h in 0..32 {
            for w in 0..32 {
                assert_eq!(v[32 * w + h], m.get2(h, w));
            }
        }
    }

    #[test]
    fn paper_image_gives_six_tokens_of_512() {
        let img = random_image(32, 32, &mut Rng::new(1));
        let t = image_to_stripes(&img, 6).unwrap();
        assert_eq!((t.count(), t.token_len()), (6, 512));
    }

    #[test]
    fn one_stripe_per_channel() {
        let img = random_image(2, 2, &mut Rng::new(2));
        let t = image_to_stripes(&img, 3).unwrap();
        assert_eq!((t.count(), t.token_len()), (3, 4));
        for c in 0..3 {
            assert_eq!(t.tokens()[c], vectorize_columns(&img.channel(c)).unwrap());
        }
    }

    #[test]
    fn stripe_count_must_be_multiple_of_three() {
        let img = random_image(32, 32, &mut Rng::new(3));
        assert!(matches!(image_to_stripes(&img, 4), Err(crate::Error::Tokenization(_))));
        let narrow = random_image(4, 5, &mut Rng::new(3));
        let err = image_to_stripes(&narrow, 6).unwrap_err().to_string();
        assert!(err.contains("width"), "{err}");
    }

    #[test]
    fn stripes_hold_one_channel_and_contiguous_columns() {
        // encode (c, h, w) in the pixel value so every token can be traced back
        let (h, w) = (4, 6);
        let data: Vec<f64> = (0..3 * h * w).map(|i| i as f64 / (3 * h * w) as f64).collect();
        let img = ImageTensor::new(h, w, data).unwrap();
        let t = image_to_stripes(&img, 6).unwrap();
        for (i, tok) in t.tokens().iter().enumerate() {
            let idx: Vec<usize> = tok.iter().map(|v| (v * (3 * h * w) as f64).round() as usize).collect();
            let chans: Vec<usize> = idx.iter().map(|k| k / (h * w)).collect();
            assert!(chans.iter().all(|&c| c == i / 2));
            let mut cols: Vec<usize> = idx.iter().map(|k| k % w).collect();
            cols.dedup();
            assert_eq!(cols.len(), 3);
            assert!(cols.windows(2).all(|p| p[1] == p[0] + 1));
        }
    }

    #[test]
    fn roundtrip_8x8_and_paper_scale() {
        let mut rng = Rng::new(4);
        let small = random_image(8, 8, &mut rng);
        assert_eq!(reassemble_image(&image_to_stripes(&small, 6).unwrap(), 8, 8).unwrap(), small);
        let big = random_image(32, 32, &mut rng);
        assert_eq!(reassemble_image(&image_to_stripes(&big, 6).unwrap(), 32, 32).unwrap(), big);
    }

    #[test]
    fn reassemble_with_wrong_height_fails() {
        let img = random_image(8, 8, &mut Rng::new(5));
        let t = image_to_stripes(&img, 6).unwrap();
        assert!(reassemble_image(&t, 7, 8).is_err());
    }

    #[test]
    fn audio_segments() {
        let clip = AudioClip::new((0..10).map(|i| i as f64 / 10.0).collect(), 8000).unwrap();
        let t = audio_to_segments(&clip, 2).unwrap();
        assert_eq!(t.tokens()[0], clip.samples()[..5].to_vec());
        assert_eq!(t.tokens()[1], clip.samples()[5..].to_vec());
        assert!(audio_to_segments(&clip, 3).is_err());
        let paper = AudioClip::new(vec![0.0; 2205], 4410).unwrap();
        let t = audio_to_segments(&paper, 5).unwrap();
        assert_eq!((t.count(), t.token_len()), (5, 441));
    }

    proptest! {
        #[test]
        fn stripes_roundtrip(h in 1usize..9, blocks in 1usize..4, block in 1usize..4, seed in any::<u64>()) {
            let w = blocks * block;
            let img = random_image(h, w, &mut Rng::new(seed));
            let t = image_to_stripes(&img, 3 * blocks).unwrap();
            prop_assert_eq!(reassemble_image(&t, h, w).unwrap(), img);
        }

        #[test]
        fn segments_concatenate_back(m in 1usize..8, seg in 1usize..20, seed in any::<u64>()) {
            let mut rng = Rng::new(seed);
            let clip = AudioClip::new((0..m * seg).map(|_| 2.0 * rng.uniform() - 1.0).collect(), 100).unwrap();
            let t = audio_to_segments(&clip, m).unwrap();
            prop_assert_eq!(t.tokens().concat(), clip.samples().to_vec());
        }
    }
}
