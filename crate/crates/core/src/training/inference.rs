use super::model::{stream, ModelState};
use crate::data_io::PairedSample;
use crate::encoder::batch_sigma;
use crate::error::{bail, Result};
use crate::infotheory::{interaction_info_gaussian, plugin_interaction_info, SampleBatch, Summarizer};
use crate::numerics::{Rng, Tensor};
use crate::tokenizer::{AudioClip, ImageTensor, Modality};

/// Rows decoded per forward pass during evaluation and generation.
const DECODE_CHUNK: usize = 64;

/// Metrics for one decoder on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderMetrics {
    pub modality: Modality,
    /// Mean over samples of `‖y − x‖²`.
    pub mse: f64,
    /// The same error for the mean training signal.
    pub baseline_mse: f64,
    pub ii_plugin_bits: Option<f64>,
    pub ii_gaussian_nats: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalMetrics {
    pub samples: usize,
    pub decoders: Vec<DecoderMetrics>,
}

impl EvalMetrics {
    pub fn get(&self, m: Modality) -> Option<&DecoderMetrics> {
        self.decoders.iter().find(|d| d.modality == m)
    }

    fn sum(&self, f: impl Fn(&DecoderMetrics) -> Option<f64>) -> Option<f64> {
        self.decoders.iter().map(f).sum()
    }

    /// Summed across decoders, as in the training history.
    pub fn ii_plugin_bits(&self) -> Option<f64> {
        self.sum(|d| d.ii_plugin_bits)
    }

    pub fn ii_gaussian_nats(&self) -> Option<f64> {
        self.sum(|d| d.ii_gaussian_nats)
    }
}

/// Decodes rows `[n, latent]` chunk by chunk, returning one row list per decoder.
fn decode_rows(state: &ModelState, z: &Tensor) -> Result<Vec<(Modality, Vec<Vec<f64>>)>> {
    let (n, len) = z.dims2()?;
    let mut out: Vec<(Modality, Vec<Vec<f64>>)> = state.decoders.iter().map(|d| (d.modality, Vec::new())).collect();
    for start in (0..n).step_by(DECODE_CHUNK) {
        let rows = DECODE_CHUNK.min(n - start);
        let chunk = Tensor::matrix(rows, len, z.data()[start * len..(start + rows) * len].to_vec())?;
        for (k, (_, y)) in state.decode(&chunk)?.into_iter().enumerate() {
            let width = y.shape()[1];
            out[k].1.extend(y.data().chunks(width).map(<[f64]>::to_vec));
        }
    }
    Ok(out)
}

fn sigmas(codes: &super::model::Codes) -> Result<[f64; 2]> {
    let s = |c: Option<&Vec<Vec<f64>>>| c.map_or(Ok(0.0), |rows| batch_sigma(rows));
    Ok([s(codes.visual.as_ref())?, s(codes.audio.as_ref())?])
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Reconstruction and II metrics of `samples`. `z` is drawn with `σ` taken over the
/// whole split; `with_ii = false` skips both II estimators.
pub fn evaluate(state: &ModelState, samples: &[PairedSample], seed: u64, with_ii: bool) -> Result<EvalMetrics> {
    if samples.is_empty() {
        bail!(Usage, "cannot evaluate an empty split");
    }
    super::model::check_samples(&state.spec, samples)?;
    let images: Vec<ImageTensor> = samples.iter().map(|s| s.image.clone()).collect();
    let clips: Vec<AudioClip> = samples.iter().map(|s| s.audio.clone()).collect();
    let codes = state.encode_mus(
        state.banks.visual.is_some().then_some(images.as_slice()),
        state.banks.audio.is_some().then_some(clips.as_slice()),
    )?;
    let mut rng = Rng::new(seed).fork(stream::EVAL);
    let all: Vec<usize> = (0..samples.len()).collect();
    let z = codes.sample(&all, sigmas(&codes)?, &mut rng)?;
    let data = |m: Modality| -> Vec<Vec<f64>> {
        match m {
            Modality::Visual => images.iter().map(|i| i.data().to_vec()).collect(),
            Modality::Audio => clips.iter().map(|c| c.samples().to_vec()).collect(),
        }
    };
    let n = samples.len() as f64;
    let mut decoders = Vec::new();
    for (m, y) in decode_rows(state, &z)? {
        let x1 = data(m);
        let base = state.baseline(m);
        let mse = x1.iter().zip(&y).map(|(a, b)| sq_dist(a, b)).sum::<f64>() / n;
        let baseline_mse = x1.iter().map(|a| sq_dist(a, base)).sum::<f64>() / n;
        let (mut plugin, mut gauss) = (None, None);
        if with_ii && samples.len() >= 2 {
            let proj = &state.decoder(m).expect("decoded modality has a decoder").projections;
            let batch = SampleBatch::new(x1, data(m.other()), y)?;
            plugin = Some(plugin_interaction_info(&batch, state.train.plugin_bins, Summarizer::default())?);
            if batch.len() >= proj.min_batch() {
                gauss = Some(interaction_info_gaussian(&batch, proj, state.loss.ridge)?);
            }
        }
        decoders.push(DecoderMetrics {
            modality: m,
            mse,
            baseline_mse,
            ii_plugin_bits: plugin,
            ii_gaussian_nats: gauss,
        });
    }
    Ok(EvalMetrics { samples: samples.len(), decoders })
}

/// One generated output set.
#[derive(Clone, Debug, PartialEq)]
pub struct Generation {
    pub input: usize,
    pub draw: usize,
    pub image: Option<ImageTensor>,
    pub audio: Option<AudioClip>,
}

/// `count` draws per input, each with fresh `ε`. The inputs must be exactly the
/// modalities the model was trained on; `σ` is taken over all supplied inputs.
pub fn generate(
    state: &ModelState,
    images: Option<&[ImageTensor]>,
    clips: Option<&[AudioClip]>,
    count: usize,
    seed: u64,
) -> Result<Vec<Generation>> {
    if count == 0 {
        bail!(Usage, "count must be at least 1");
    }
    let codes = state.encode_mus(images, clips)?;
    if codes.is_empty() {
        bail!(Usage, "no inputs to generate from");
    }
    let sigma = sigmas(&codes)?;
    let mut rng = Rng::new(seed).fork(stream::GENERATE);
    let idx: Vec<usize> = (0..codes.len()).flat_map(|i| std::iter::repeat_n(i, count)).collect();
    let z = codes.sample(&idx, sigma, &mut rng)?;
    let decoded = decode_rows(state, &z)?;
    let spec = &state.spec;
    let mut out = Vec::with_capacity(idx.len());
    for (row, &input) in idx.iter().enumerate() {
        let mut g = Generation {
            input,
            draw: row % count,
            image: None,
            audio: None,
        };
        for (m, rows) in &decoded {
            match m {
                Modality::Visual => {
                    g.image = Some(ImageTensor::from_unclamped(spec.image_height, spec.image_width, &rows[row])?)
                }
                Modality::Audio => g.audio = Some(AudioClip::from_unclamped(&rows[row], spec.sample_rate)?),
            }
        }
        out.push(g);
    }
    Ok(out)
}
