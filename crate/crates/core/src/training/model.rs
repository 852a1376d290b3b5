use super::adam::Adam;
use super::config::{LossConfig, ModelSpec, TrainConfig};
use super::history::TrainHistory;
use crate::data_io::PairedSample;
use crate::decoder::{forward_graph, init_decoder, DecoderConfig, DecoderParams};
use crate::encoder::{build_bank, reparameterize, EncoderBank, EncoderBanks};
use crate::error::{bail, Result};
use crate::infotheory::IiProjections;
use crate::numerics::{par, Graph, Rng, Tensor, Var};
use crate::tokenizer::{AudioClip, ImageTensor, Modality};

/// Fork labels that keep the independent random streams apart.
pub(crate) mod stream {
    pub const DECODER_INIT: u64 = 0x100;
    pub const EPOCH: u64 = 1 << 32;
    pub const EVAL: u64 = 0xE7A1;
    pub const MONITOR: u64 = 0x3017;
    pub const GENERATE: u64 = 0x6E4E;
}

/// One trainable decoder with the frozen projections its II term uses.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderSlot {
    pub modality: Modality,
    pub config: DecoderConfig,
    pub params: DecoderParams,
    pub projections: IiProjections,
}

/// Everything a checkpoint restores.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub spec: ModelSpec,
    pub loss: LossConfig,
    pub train: TrainConfig,
    pub banks: EncoderBanks,
    /// Visual first when both are present.
    pub decoders: Vec<DecoderSlot>,
    pub optimizer: Adam,
    /// Mean training image (channel-planar) and waveform.
    pub baseline_image: Vec<f64>,
    pub baseline_audio: Vec<f64>,
    pub epochs_done: usize,
    pub history: TrainHistory,
}

pub(crate) fn bank_seed(spec: &ModelSpec, m: Modality) -> u64 {
    Rng::new(spec.bank_seed).fork(m as u64).seed()
}

pub(crate) fn projection_seed(loss: &LossConfig, m: Modality) -> u64 {
    Rng::new(loss.projection_seed).fork(m as u64).seed()
}

/// Frozen banks for every input modality of `spec`.
pub fn build_banks(spec: &ModelSpec) -> Result<EncoderBanks> {
    let mut banks = EncoderBanks::default();
    if spec.visual_code > 0 {
        banks.visual = Some(build_bank(
            Modality::Visual,
            spec.stripe_len(),
            spec.visual_code,
            spec.stripes,
            bank_seed(spec, Modality::Visual),
        )?);
    }
    if spec.audio_code > 0 {
        banks.audio = Some(build_bank(
            Modality::Audio,
            spec.segment_len(),
            spec.audio_code,
            spec.segments,
            bank_seed(spec, Modality::Audio),
        )?);
    }
    Ok(banks)
}

/// `[x1, x2, y]` data lengths for the II term of the decoder producing `m`.
pub(crate) fn ii_dims(spec: &ModelSpec, m: Modality) -> [usize; 3] {
    [spec.data_len(m), spec.data_len(m.other()), spec.data_len(m)]
}

pub(crate) fn check_samples(spec: &ModelSpec, samples: &[PairedSample]) -> Result<()> {
    for s in samples {
        if (s.image.height(), s.image.width(), s.audio.len()) != (spec.image_height, spec.image_width, spec.audio_len) {
            bail!(
                Dimension,
                "sample {} is {}x{} / {} samples, model expects {}x{} / {}",
                s.id,
                s.image.height(),
                s.image.width(),
                s.audio.len(),
                spec.image_height,
                spec.image_width,
                spec.audio_len
            );
        }
    }
    Ok(())
}

fn mean_rows<'a>(rows: impl Iterator<Item = &'a [f64]>, len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    let mut n = 0usize;
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
        n += 1;
    }
    acc.iter().map(|a| a / n.max(1) as f64).collect()
}

impl ModelState {
    /// Fresh model: banks from the bank seed, decoders initialized from the training
    /// seed, projections from the loss seed, baselines from `samples`.
    pub fn new(spec: ModelSpec, loss: LossConfig, train: TrainConfig, samples: &[PairedSample]) -> Result<Self> {
        spec.validate()?;
        loss.validate()?;
        train.validate(&loss)?;
        if samples.is_empty() {
            bail!(Usage, "training needs at least one sample");
        }
        check_samples(&spec, samples)?;
        let banks = build_banks(&spec)?;
        let mut decoders = Vec::new();
        for m in [Modality::Visual, Modality::Audio] {
            if let Some(cfg) = spec.decoder(m) {
                let mut rng = Rng::new(train.seed).fork(stream::DECODER_INIT + m as u64);
                decoders.push(DecoderSlot {
                    modality: m,
                    config: cfg.clone(),
                    params: init_decoder(cfg, &mut rng)?,
                    projections: IiProjections::new(ii_dims(&spec, m), loss.projection_dim, projection_seed(&loss, m))?,
                });
            }
        }
        let sizes: Vec<usize> = decoders
            .iter()
            .flat_map(|d| d.params.tensors().into_iter().map(Tensor::len))
            .collect();
        let optimizer = Adam::new(train.learning_rate, &sizes);
        let baseline_image = mean_rows(samples.iter().map(|s| s.image.data()), spec.image_len());
        let baseline_audio = mean_rows(samples.iter().map(|s| s.audio.samples()), spec.audio_len);
        Ok(Self {
            spec,
            loss,
            train,
            banks,
            decoders,
            optimizer,
            baseline_image,
            baseline_audio,
            epochs_done: 0,
            history: TrainHistory::default(),
        })
    }

    pub fn decoder(&self, m: Modality) -> Option<&DecoderSlot> {
        self.decoders.iter().find(|d| d.modality == m)
    }

    pub fn baseline(&self, m: Modality) -> &[f64] {
        match m {
            Modality::Visual => &self.baseline_image,
            Modality::Audio => &self.baseline_audio,
        }
    }

    pub fn latent_len(&self) -> usize {
        self.spec.latent_len()
    }

    /// Noise-free codes `μ` for each input modality of the model, one row per item.
    pub fn encode_mus(&self, images: Option<&[ImageTensor]>, clips: Option<&[AudioClip]>) -> Result<Codes> {
        let run = |bank: &EncoderBank, n: usize, f: &(dyn Fn(&EncoderBank, usize) -> Result<Vec<f64>> + Sync)| {
            par::map_indexed(n, |i| f(bank, i)).into_iter().collect::<Result<Vec<_>>>()
        };
        let visual = match (&self.banks.visual, images) {
            (Some(bank), Some(imgs)) => Some(run(bank, imgs.len(), &|b, i| b.encode_image(&imgs[i]))?),
            (Some(_), None) => bail!(Configuration, "this model needs image input"),
            (None, Some(_)) => bail!(Configuration, "this model takes no image input"),
            (None, None) => None,
        };
        let audio = match (&self.banks.audio, clips) {
            (Some(bank), Some(cl)) => Some(run(bank, cl.len(), &|b, i| b.encode_audio(&cl[i]))?),
            (Some(_), None) => bail!(Configuration, "this model needs audio input"),
            (None, Some(_)) => bail!(Configuration, "this model takes no audio input"),
            (None, None) => None,
        };
        if let (Some(v), Some(a)) = (&visual, &audio) {
            if v.len() != a.len() {
                bail!(Dimension, "{} images but {} audio clips", v.len(), a.len());
            }
        }
        Ok(Codes { visual, audio })
    }

    /// Decoder outputs `[B, D]` for a `[B, latent]` batch, constants only.
    pub fn decode(&self, z: &Tensor) -> Result<Vec<(Modality, Tensor)>> {
        let mut g = Graph::new();
        let zc = g.constant(z.clone());
        let mut out = Vec::new();
        for d in &self.decoders {
            let bound: Vec<(Var, Var)> = d
                .params
                .layers
                .iter()
                .map(|(w, b)| (g.constant(w.clone()), g.constant(b.clone())))
                .collect();
            let y = forward_graph(&mut g, &d.config, &bound, zc)?;
            let b = z.dims2()?.0;
            out.push((d.modality, g.value(y).reshape(vec![b, d.config.output.len()])?));
        }
        Ok(out)
    }
}

/// Per-modality `μ` rows; `None` for modalities the model does not take as input.
#[derive(Clone, Debug, PartialEq)]
pub struct Codes {
    pub visual: Option<Vec<Vec<f64>>>,
    pub audio: Option<Vec<Vec<f64>>>,
}

impl Codes {
    pub fn len(&self) -> usize {
        self.visual.as_ref().or(self.audio.as_ref()).map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, m: Modality) -> Option<&Vec<Vec<f64>>> {
        match m {
            Modality::Visual => self.visual.as_ref(),
            Modality::Audio => self.audio.as_ref(),
        }
    }

    /// `[B, latent]` samples for rows `idx`: for each row, visual `z` then audio `z`,
    /// each drawn with its own `σ`.
    pub fn sample(&self, idx: &[usize], sigma: [f64; 2], rng: &mut Rng) -> Result<Tensor> {
        let width: usize = [&self.visual, &self.audio]
            .iter()
            .filter_map(|c| c.as_ref().map(|rows| rows[0].len()))
            .sum();
        let mut data = Vec::with_capacity(idx.len() * width);
        for &i in idx {
            for (k, code) in [&self.visual, &self.audio].into_iter().enumerate() {
                if let Some(rows) = code {
                    data.extend(reparameterize(&rows[i], sigma[k], rng)?);
                }
            }
        }
        Tensor::matrix(idx.len(), width, data)
    }
}
