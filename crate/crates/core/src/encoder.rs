//! Frozen parallel stripe encoders, reparameterization, and latent concatenation.

use sha2::{Digest, Sha256};

use crate::error::{bail, Result};
use crate::numerics::{gaussian_matrix, matvec, par, Rng, Tensor};
use crate::tokenizer::{audio_to_segments, image_to_stripes, AudioClip, ImageTensor, Modality, TokenBundle};

/// Frozen compression matrices for one modality, one `out_dim × in_dim` matrix per token.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderBank {
    modality: Modality,
    matrices: Vec<Tensor>,
    in_dim: usize,
    out_dim: usize,
    seed: u64,
}

/// Matrix `i` is drawn with `Rng::new(seed).fork(i)`, so every matrix is reproducible
/// from the seed and its index alone.
pub fn build_bank(modality: Modality, in_dim: usize, out_dim: usize, count: usize, seed: u64) -> Result<EncoderBank> {
    if count == 0 {
        bail!(Configuration, "{modality} bank needs at least one matrix");
    }
    if out_dim == 0 || out_dim >= in_dim {
        bail!(
            Configuration,
            "{modality} bank must compress: need 0 < N' < N, got N' = {out_dim}, N = {in_dim}"
        );
    }
    let root = Rng::new(seed);
    let matrices = (0..count)
        .map(|i| gaussian_matrix(out_dim, in_dim, &mut root.fork(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncoderBank {
        modality,
        matrices,
        in_dim,
        out_dim,
        seed,
    })
}

impl EncoderBank {
    /// Rebuilds a bank from stored matrices (checkpoint loading).
    pub fn from_matrices(modality: Modality, matrices: Vec<Tensor>, seed: u64) -> Result<Self> {
        let Some(first) = matrices.first() else {
            bail!(Configuration, "{modality} bank has no matrices");
        };
        let (out_dim, in_dim) = first.dims2()?;
        if matrices.iter().any(|m| m.shape() != [out_dim, in_dim]) {
            bail!(Configuration, "{modality} bank matrices differ in shape");
        }
        if out_dim >= in_dim {
            bail!(Configuration, "{modality} bank matrices are not compressive");
        }
        Ok(Self {
            modality,
            matrices,
            in_dim,
            out_dim,
            seed,
        })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn matrices(&self) -> &[Tensor] {
        &self.matrices
    }

    pub fn count(&self) -> usize {
        self.matrices.len()
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// SHA-256 over every matrix's little-endian bytes, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.matrices {
            h.update(m.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn check_tokens(&self, tokens: &TokenBundle) -> Result<()> {
        if tokens.modality() != self.modality {
            bail!(
                Dimension,
                "{} tokens given to the {} bank",
                tokens.modality(),
                self.modality
            );
        }
        if tokens.count() != self.count() || tokens.token_len() != self.in_dim {
            bail!(
                Dimension,
                "bank expects {} tokens of length {}, got {} of length {}",
                self.count(),
                self.in_dim,
                tokens.count(),
                tokens.token_len()
            );
        }
        Ok(())
    }

    /// `μ = Σ_i matrix_i · token_i`, one task per token, summed in index order.
    pub fn compress(&self, tokens: &TokenBundle) -> Result<Vec<f64>> {
        self.check_tokens(tokens)?;
        let parts = par::map_indexed(self.count(), |i| matvec(&self.matrices[i], &tokens.tokens()[i]));
        self.reduce(parts)
    }

    /// Same as [`compress`](Self::compress) without any task fan-out.
    pub fn compress_serial(&self, tokens: &TokenBundle) -> Result<Vec<f64>> {
        self.check_tokens(tokens)?;
        let parts = (0..self.count())
            .map(|i| matvec(&self.matrices[i], &tokens.tokens()[i]))
            .collect();
        self.reduce(parts)
    }

    fn reduce(&self, parts: Vec<Result<Vec<f64>>>) -> Result<Vec<f64>> {
        let mut mu = vec![0.0; self.out_dim];
        for part in parts {
            for (m, p) in mu.iter_mut().zip(part?) {
                *m += p;
            }
        }
        Ok(mu)
    }

    pub fn encode_image(&self, img: &ImageTensor) -> Result<Vec<f64>> {
        self.compress(&image_to_stripes(img, self.count())?)
    }

    pub fn encode_audio(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        self.compress(&audio_to_segments(clip, self.count())?)
    }
}

/// Population standard deviation over every element of every `μ` in the batch.
pub fn batch_sigma(mus: &[Vec<f64>]) -> Result<f64> {
    // Welford's running update
    let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
    for v in mus.iter().flatten() {
        n += 1;
        let delta = v - mean;
        mean += delta / n as f64;
        m2 += delta * (v - mean);
    }
    if n < 2 {
        bail!(Numeric, "batch sigma needs at least 2 scalars, got {n}");
    }
    Ok((m2 / n as f64).max(0.0).sqrt())
}

/// `z = μ + σ·ε` with fresh standard-normal `ε`.
pub fn reparameterize(mu: &[f64], sigma: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        bail!(Numeric, "sigma must be finite and nonnegative, got {sigma}");
    }
    Ok(mu.iter().map(|m| m + sigma * rng.normal()).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModalityCode {
    pub mu: Vec<f64>,
    pub sigma: f64,
    pub z: Vec<f64>,
}

/// Serial concatenation of per-modality codes, visual first.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentVector {
    parts: Vec<(Modality, Vec<f64>)>,
}

impl LatentVector {
    pub fn parts(&self) -> &[(Modality, Vec<f64>)] {
        &self.parts
    }

    pub fn total_len(&self) -> usize {
        self.parts.iter().map(|(_, v)| v.len()).sum()
    }

    pub fn values(&self) -> Vec<f64> {
        self.parts.iter().flat_map(|(_, v)| v.iter().copied()).collect()
    }

    pub fn has(&self, modality: Modality) -> bool {
        self.parts.iter().any(|(m, _)| *m == modality)
    }
}

pub fn build_latent(visual: Option<&ModalityCode>, audio: Option<&ModalityCode>) -> Result<LatentVector> {
    let parts: Vec<_> = [(Modality::Visual, visual), (Modality::Audio, audio)]
        .into_iter()
        .filter_map(|(m, code)| code.map(|c| (m, c.z.clone())))
        .collect();
    if parts.is_empty() {
        bail!(Configuration, "latent needs at least one modality");
    }
    Ok(LatentVector { parts })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EncoderBanks {
    pub visual: Option<EncoderBank>,
    pub audio: Option<EncoderBank>,
}

impl EncoderBanks {
    pub fn get(&self, modality: Modality) -> Option<&EncoderBank> {
        match modality {
            Modality::Visual => self.visual.as_ref(),
            Modality::Audio => self.audio.as_ref(),
        }
    }

    /// Latent length when every bank is present.
    pub fn latent_len(&self) -> usize {
        self.visual.as_ref().map_or(0, EncoderBank::out_dim) + self.audio.as_ref().map_or(0, EncoderBank::out_dim)
    }

    pub fn hashes(&self) -> Vec<String> {
        [&self.visual, &self.audio]
            .into_iter()
            .flatten()
            .map(EncoderBank::content_hash)
            .collect()
    }
}

/// How `σ` is chosen for the reparameterization step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaPolicy {
    /// Population std of all `μ` elements in the current batch, per modality.
    Batch,
    /// Externally supplied values (dataset-level statistics, or 0 for a noise-free code).
    Fixed { visual: f64, audio: f64 },
}

/// Encodes a batch. Either modality may be absent; present ones must cover the batch.
/// Noise is drawn sample by sample, visual before audio.
pub fn encode_batch(
    images: Option<&[ImageTensor]>,
    clips: Option<&[AudioClip]>,
    banks: &EncoderBanks,
    sigma: SigmaPolicy,
    rng: &mut Rng,
) -> Result<Vec<LatentVector>> {
    let n = match (images, clips) {
        (None, None) => bail!(Configuration, "latent needs at least one modality"),
        (Some(i), Some(c)) if i.len() != c.len() => {
            bail!(Dimension, "{} images but {} audio clips", i.len(), c.len())
        }
        (Some(i), _) => i.len(),
        (None, Some(c)) => c.len(),
    };
    let visual_mu = match images {
        Some(imgs) => {
            let bank = banks.visual.as_ref().ok_or_else(|| crate::Error::Configuration("no visual bank".into()))?;
            Some(par::map_indexed(n, |i| bank.encode_image(&imgs[i])).into_iter().collect::<Result<Vec<_>>>()?)
        }
        None => None,
    };
    let audio_mu = match clips {
        Some(cl) => {
            let bank = banks.audio.as_ref().ok_or_else(|| crate::Error::Configuration("no audio bank".into()))?;
            Some(par::map_indexed(n, |i| bank.encode_audio(&cl[i])).into_iter().collect::<Result<Vec<_>>>()?)
        }
        None => None,
    };
    let pick = |mus: &Option<Vec<Vec<f64>>>, fixed: f64| -> Result<f64> {
        match (mus, sigma) {
            (Some(m), SigmaPolicy::Batch) => batch_sigma(m),
            _ => Ok(fixed),
        }
    };
    let (fixed_v, fixed_a) = match sigma {
        SigmaPolicy::Fixed { visual, audio } => (visual, audio),
        SigmaPolicy::Batch => (0.0, 0.0),
    };
    let sigma_v = pick(&visual_mu, fixed_v)?;
    let sigma_a = pick(&audio_mu, fixed_a)?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let v = match &visual_mu {
            Some(m) => Some(ModalityCode {
                z: reparameterize(&m[i], sigma_v, rng)?,
                mu: m[i].clone(),
                sigma: sigma_v,
            }),
            None => None,
        };
        let a = match &audio_mu {
            Some(m) => Some(ModalityCode {
                z: reparameterize(&m[i], sigma_a, rng)?,
                mu: m[i].clone(),
                sigma: sigma_a,
            }),
            None => None,
        };
        out.push(build_latent(v.as_ref(), a.as_ref())?);
    }
    Ok(out)
}

/// Tokenize → compress → σ → reparameterize → concatenate, for a single pair.
pub fn encode_pair(
    img: Option<&ImageTensor>,
    clip: Option<&AudioClip>,
    banks: &EncoderBanks,
    sigma: SigmaPolicy,
    rng: &mut Rng,
) -> Result<LatentVector> {
    let imgs = img.map(|i| vec![i.clone()]);
    let clips = clip.map(|c| vec![c.clone()]);
    let mut out = encode_batch(imgs.as_deref(), clips.as_deref(), banks, sigma, rng)?;
    Ok(out.remove(0))
}
