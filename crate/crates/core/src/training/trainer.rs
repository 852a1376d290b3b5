use super::config::{IiBackend, LossConfig, ModelSpec, SigmaScope, TrainConfig};
use super::history::{EpochRecord, TrainHistory};
use super::loss::loss_graph;
use super::model::{check_samples, stream, Codes, ModelState};
use crate::data_io::PairedSample;
use crate::decoder::forward_graph;
use crate::encoder::batch_sigma;
use crate::error::{bail, Error, Result};
use crate::infotheory::{plugin_interaction_info, SampleBatch, Summarizer};
use crate::numerics::{Graph, Rng, Tensor, Var};
use crate::tokenizer::{AudioClip, ImageTensor, Modality};

/// Inputs that stay fixed for a whole run: data rows and the frozen codes `μ`.
pub(crate) struct Prepared {
    pub codes: Codes,
    /// Visual rows then audio rows, one per sample.
    pub rows: [Vec<Vec<f64>>; 2],
    /// Per-modality `σ` over the whole dataset.
    pub dataset_sigma: [f64; 2],
}

fn slot(m: Modality) -> usize {
    match m {
        Modality::Visual => 0,
        Modality::Audio => 1,
    }
}

fn sigma_of(rows: Option<&Vec<Vec<f64>>>, idx: Option<&[usize]>) -> Result<f64> {
    match (rows, idx) {
        (None, _) => Ok(0.0),
        (Some(r), None) => batch_sigma(r),
        (Some(r), Some(idx)) => batch_sigma(&idx.iter().map(|&i| r[i].clone()).collect::<Vec<_>>()),
    }
}

impl Prepared {
    pub fn new(state: &ModelState, samples: &[PairedSample]) -> Result<Self> {
        let images: Vec<ImageTensor> = samples.iter().map(|s| s.image.clone()).collect();
        let clips: Vec<AudioClip> = samples.iter().map(|s| s.audio.clone()).collect();
        let codes = state.encode_mus(
            state.banks.visual.is_some().then_some(images.as_slice()),
            state.banks.audio.is_some().then_some(clips.as_slice()),
        )?;
        let dataset_sigma = [sigma_of(codes.visual.as_ref(), None)?, sigma_of(codes.audio.as_ref(), None)?];
        Ok(Self {
            rows: [
                images.iter().map(|i| i.data().to_vec()).collect(),
                clips.iter().map(|c| c.samples().to_vec()).collect(),
            ],
            codes,
            dataset_sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn batch(&self, m: Modality, idx: &[usize]) -> Result<Tensor> {
        let rows = &self.rows[slot(m)];
        let d = rows[0].len();
        Tensor::matrix(idx.len(), d, idx.iter().flat_map(|&i| rows[i].iter().copied()).collect())
    }

    pub fn gather(&self, m: Modality, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.rows[slot(m)][i].clone()).collect()
    }

    /// Per-modality `σ` for a batch under `scope`.
    pub fn sigma(&self, scope: SigmaScope, idx: &[usize]) -> Result<[f64; 2]> {
        match scope {
            SigmaScope::Dataset => Ok(self.dataset_sigma),
            SigmaScope::Zero => Ok([0.0; 2]),
            SigmaScope::Batch => Ok([
                sigma_of(self.codes.visual.as_ref(), Some(idx))?,
                sigma_of(self.codes.audio.as_ref(), Some(idx))?,
            ]),
        }
    }
}

/// Smallest batch the loss can evaluate.
fn smallest_batch(loss: &LossConfig) -> usize {
    match loss.ii_backend {
        IiBackend::Gaussian => 3 * loss.projection_dim + 3,
        IiBackend::Off => 1,
    }
}

/// Shuffled minibatches; a final remainder smaller than `smallest` joins the batch before it.
pub(crate) fn make_batches(n: usize, batch_size: usize, smallest: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < smallest) {
        let tail = batches.pop().unwrap_or_default();
        if let Some(prev) = batches.last_mut() {
            prev.extend(tail);
        }
    }
    batches
}

struct BatchLoss {
    graph: Graph,
    total: Var,
    ii: Option<Var>,
    recon: [Option<Var>; 2],
    /// Decoder outputs `[B, D]`, one per decoder.
    outputs: Vec<Var>,
    /// Parameter leaves in optimizer order.
    params: Vec<Var>,
}

/// Builds the summed decoder losses for rows `idx`, drawing `z` from `rng`.
fn batch_loss(state: &ModelState, prep: &Prepared, idx: &[usize], rng: &mut Rng) -> Result<BatchLoss> {
    let b = idx.len();
    let sigma = prep.sigma(state.train.sigma_scope, idx)?;
    let z = prep.codes.sample(idx, sigma, rng)?;
    let mut g = Graph::new();
    let zc = g.constant(z);
    let mut params: Vec<Var> = Vec::new();
    let mut total: Option<Var> = None;
    let mut ii: Option<Var> = None;
    let mut recon = [None; 2];
    let mut outputs = Vec::new();
    for d in &state.decoders {
        let bound = d.params.bind(&mut g);
        params.extend(bound.iter().flat_map(|&(w, b)| [w, b]));
        let y = forward_graph(&mut g, &d.config, &bound, zc)?;
        let y = g.reshape(y, vec![b, d.config.output.len()])?;
        let x1 = prep.batch(d.modality, idx)?;
        let x2 = prep.batch(d.modality.other(), idx)?;
        let vars = loss_graph(&mut g, &x1, &x2, y, &d.projections, &state.loss)?;
        total = Some(match total {
            None => vars.total,
            Some(t) => g.add(t, vars.total)?,
        });
        if let Some(v) = vars.ii {
            ii = Some(match ii {
                None => v,
                Some(t) => g.add(t, v)?,
            });
        }
        recon[slot(d.modality)] = Some(vars.recon);
        outputs.push(y);
    }
    let Some(total) = total else {
        bail!(Configuration, "model has no decoder");
    };
    let value = g.scalar(total);
    if !value.is_finite() {
        bail!(Numeric, "loss is {value}");
    }
    Ok(BatchLoss { graph: g, total, ii, recon, outputs, params })
}

/// One optimizer step on the rows `idx`.
fn train_step(state: &mut ModelState, prep: &Prepared, idx: &[usize], rng: &mut Rng) -> Result<()> {
    let bl = batch_loss(state, prep, idx, rng)?;
    let grads = bl.graph.backward(bl.total)?;
    let flat: Vec<Vec<f64>> = bl.params.iter().map(|&v| grads.flat(v)).collect();
    let mut tensors: Vec<&mut Tensor> = state.decoders.iter_mut().flat_map(|d| d.params.tensors_mut()).collect();
    state.optimizer.step(&mut tensors, &flat)
}

fn diverged(epoch: usize, batch: usize, e: Error) -> Error {
    match e {
        Error::Numeric(message) => Error::Diverged { epoch, batch, message },
        other => other,
    }
}

/// Loss of the whole training set after an epoch, over fixed batches in index order with
/// the same noise draw every epoch, so successive records differ only through the
/// parameters.
fn monitor(state: &ModelState, prep: &Prepared, epoch: usize) -> Result<EpochRecord> {
    let n = prep.len();
    let smallest = smallest_batch(&state.loss);
    let mut batches: Vec<Vec<usize>> = (0..n).collect::<Vec<_>>().chunks(state.train.batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < smallest) {
        let tail = batches.pop().unwrap_or_default();
        batches.last_mut().expect("at least one batch").extend(tail);
    }
    let mut rng = Rng::new(state.train.seed).fork(stream::MONITOR);
    let mut outputs: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(n); state.decoders.len()];
    let (mut total, mut ii, mut recon) = (0.0, 0.0, [0.0; 2]);
    for (bi, idx) in batches.iter().enumerate() {
        let bl = batch_loss(state, prep, idx, &mut rng).map_err(|e| diverged(epoch, bi + 1, e))?;
        let g = &bl.graph;
        let w = idx.len() as f64 / n as f64;
        total += w * g.scalar(bl.total);
        ii += w * bl.ii.map_or(0.0, |v| g.scalar(v));
        for k in 0..2 {
            recon[k] += w * bl.recon[k].map_or(0.0, |v| g.scalar(v));
        }
        for (k, &y) in bl.outputs.iter().enumerate() {
            let y = g.value(y);
            outputs[k].extend(y.data().chunks(y.shape()[1]).map(<[f64]>::to_vec));
        }
    }
    let all: Vec<usize> = (0..n).collect();
    let mut plugin = None;
    if n >= 2 {
        let mut sum = 0.0;
        for (k, d) in state.decoders.iter().enumerate() {
            let batch = SampleBatch::new(
                prep.gather(d.modality, &all),
                prep.gather(d.modality.other(), &all),
                std::mem::take(&mut outputs[k]),
            )?;
            sum += plugin_interaction_info(&batch, state.train.plugin_bins, Summarizer::default())?;
        }
        plugin = Some(sum);
    }
    let has = |m| state.decoder(m).is_some();
    Ok(EpochRecord {
        epoch,
        total_loss: total,
        ii_nats: (state.loss.ii_backend == IiBackend::Gaussian).then_some(ii),
        ii_plugin_bits: plugin,
        mse_visual: has(Modality::Visual).then_some(recon[0]),
        mse_audio: has(Modality::Audio).then_some(recon[1]),
    })
}

fn run_epoch(state: &mut ModelState, prep: &Prepared) -> Result<EpochRecord> {
    let epoch = state.epochs_done + 1;
    let mut rng = Rng::new(state.train.seed).fork(stream::EPOCH + epoch as u64);
    let batches = make_batches(prep.len(), state.train.batch_size, smallest_batch(&state.loss), &mut rng);
    for (bi, idx) in batches.iter().enumerate() {
        train_step(state, prep, idx, &mut rng).map_err(|e| diverged(epoch, bi + 1, e))?;
    }
    monitor(state, prep, epoch)
}

/// Trains `epochs` more epochs on `samples`, appending to the state's history.
/// `on_epoch` runs after each epoch and may abort the run with an error.
pub fn run_epochs<F>(state: &mut ModelState, samples: &[PairedSample], epochs: usize, mut on_epoch: F) -> Result<()>
where
    F: FnMut(&ModelState, &EpochRecord) -> Result<()>,
{
    check_samples(&state.spec, samples)?;
    let smallest = smallest_batch(&state.loss);
    if samples.len() < smallest {
        bail!(
            Configuration,
            "{} training samples are fewer than the {smallest} the {} II backend needs",
            samples.len(),
            state.loss.ii_backend.as_str()
        );
    }
    let prep = Prepared::new(state, samples)?;
    for _ in 0..epochs {
        let record = run_epoch(state, &prep)?;
        state.epochs_done += 1;
        state.history.push(record.clone());
        on_epoch(state, &record)?;
    }
    Ok(())
}

/// Fresh model trained for `train_cfg.epochs` epochs.
pub fn train(
    samples: &[PairedSample],
    spec: ModelSpec,
    train_cfg: TrainConfig,
    loss_cfg: LossConfig,
) -> Result<(ModelState, TrainHistory)> {
    let epochs = train_cfg.epochs;
    let mut state = ModelState::new(spec, loss_cfg, train_cfg, samples)?;
    run_epochs(&mut state, samples, epochs, |_, _| Ok(()))?;
    let history = state.history.clone();
    Ok((state, history))
}
