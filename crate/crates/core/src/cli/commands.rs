use std::path::{Path, PathBuf};

use super::config::{KeySet, RunConfig};
use crate::data_io::{
    conform, conform_audio, conform_image, load_dataset, load_ppm, load_wav, synth_split, write_ppm, write_wav, Dataset,
    PairedSample, Split,
};
use crate::error::{bail, Result};
use crate::infotheory::{pid_decompose, JointDistribution};
use crate::kvtext::KvText;
use crate::tokenizer::{AudioClip, ImageTensor, Modality};
use crate::training::{
    evaluate, generate as generate_outputs, load_checkpoint, run_epochs, save_checkpoint, EvalMetrics, IiBackend,
    InputMode, LossConfig, ModelSpec, ModelState, SigmaScope, TrainConfig,
};

pub const HISTORY_FILE: &str = "history.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.csv";
pub const METRICS_HEADER: &str =
    "split,samples,mse_visual,baseline_mse_visual,mse_audio,baseline_mse_audio,ii_plugin_bits,ii_gaussian_nats";

const TRAIN_KEYS: KeySet = KeySet {
    defaults: &[
        ("preset", "desk"),
        ("mode", "joint"),
        ("epochs", "50"),
        ("batch_size", "64"),
        ("learning_rate", "0.001"),
        ("seed", "1"),
        ("bank_seed", "1"),
        ("ii_backend", "gaussian"),
        ("ii_weight", "1"),
        ("recon_weight", "1"),
        ("projection_dim", "8"),
        ("ridge", "0.000001"),
        ("projection_seed", "1"),
        ("sigma_scope", "batch"),
        ("plugin_bins", "16"),
        ("sample_every", "10"),
        ("synthetic_val", "0"),
        ("data_seed", "1"),
        ("out", "run"),
    ],
    optional: &["latent", "data", "synthetic", "resume"],
};

/// Settings a resumed run takes from its checkpoint instead of the command line.
const MODEL_KEYS: [&str; 14] = [
    "preset",
    "mode",
    "latent",
    "batch_size",
    "learning_rate",
    "seed",
    "bank_seed",
    "ii_backend",
    "ii_weight",
    "recon_weight",
    "projection_dim",
    "ridge",
    "projection_seed",
    "sigma_scope",
];

const GENERATE_KEYS: KeySet = KeySet {
    defaults: &[("count", "1"), ("seed", "1"), ("out", "generated")],
    optional: &["checkpoint", "from", "inputs"],
};

const EVAL_KEYS: KeySet = KeySet {
    defaults: &[
        ("split", "all"),
        ("ii", "gaussian"),
        ("seed", "1"),
        ("synthetic_val", "0"),
        ("data_seed", "1"),
        ("out", "eval"),
    ],
    optional: &["checkpoint", "data", "synthetic"],
};

fn parse<T: std::str::FromStr>(cfg: &RunConfig, key: &str) -> Result<T> {
    cfg.values.parse_req(key)
}

fn parse_opt<T: std::str::FromStr>(cfg: &RunConfig, key: &str) -> Result<Option<T>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(_) => cfg.values.parse_opt(key),
    }
}

/// Training and validation pairs shaped for `spec`.
fn load_data(cfg: &RunConfig, spec: &ModelSpec) -> Result<Dataset> {
    match (cfg.get("data"), parse_opt::<usize>(cfg, "synthetic")?) {
        (Some(_), Some(_)) => bail!(Usage, "pass either --data or --synthetic, not both"),
        (None, None) => bail!(Usage, "no dataset: pass --data PATH or --synthetic N"),
        (None, Some(n)) => synth_split(
            n,
            parse(cfg, "synthetic_val")?,
            spec.image_height,
            spec.image_width,
            spec.audio_len,
            parse(cfg, "data_seed")?,
        ),
        (Some(path), None) => {
            let raw = load_dataset(path)?;
            let shape = |samples: &[PairedSample]| -> Result<Vec<PairedSample>> {
                samples
                    .iter()
                    .map(|s| conform(s, spec.image_height, spec.image_width, spec.audio_len))
                    .collect()
            };
            Dataset::new(shape(raw.split(Split::Train))?, shape(raw.split(Split::Val))?)
        }
    }
}

fn model_from_config(cfg: &RunConfig) -> Result<(ModelSpec, LossConfig, TrainConfig)> {
    let spec = ModelSpec::preset(
        cfg.values.require("preset")?,
        InputMode::parse(cfg.values.require("mode")?)?,
        parse_opt(cfg, "latent")?,
        parse(cfg, "bank_seed")?,
    )?;
    let loss = LossConfig {
        ii_backend: IiBackend::parse(cfg.values.require("ii_backend")?)?,
        ii_weight: parse(cfg, "ii_weight")?,
        recon_weight: parse(cfg, "recon_weight")?,
        projection_dim: parse(cfg, "projection_dim")?,
        ridge: parse(cfg, "ridge")?,
        projection_seed: parse(cfg, "projection_seed")?,
    };
    let train = TrainConfig {
        epochs: parse(cfg, "epochs")?,
        batch_size: parse(cfg, "batch_size")?,
        learning_rate: parse(cfg, "learning_rate")?,
        seed: parse(cfg, "seed")?,
        sigma_scope: SigmaScope::parse(cfg.values.require("sigma_scope")?)?,
        plugin_bins: parse(cfg, "plugin_bins")?,
    };
    loss.validate()?;
    train.validate(&loss)?;
    Ok((spec, loss, train))
}

/// Echoes the model settings a state actually uses into the resolved config.
fn record_model(cfg: &mut RunConfig, state: &ModelState) {
    cfg.set("preset", &state.spec.preset);
    cfg.set("mode", state.spec.mode);
    cfg.set("latent", state.spec.latent_len());
    cfg.set("bank_seed", state.spec.bank_seed);
    for kv in [state.loss.to_kv(), state.train.to_kv()] {
        for k in kv.keys().filter(|k| *k != "epochs") {
            cfg.set(k, kv.get(k).unwrap_or_default());
        }
    }
}

fn model_inputs(state: &ModelState, sample: &PairedSample) -> (Option<Vec<ImageTensor>>, Option<Vec<AudioClip>>) {
    (
        state.banks.visual.is_some().then(|| vec![sample.image.clone()]),
        state.banks.audio.is_some().then(|| vec![sample.audio.clone()]),
    )
}

fn write_outputs(state: &ModelState, sample: &PairedSample, seed: u64, stem: &Path) -> Result<()> {
    let (images, clips) = model_inputs(state, sample);
    for g in generate_outputs(state, images.as_deref(), clips.as_deref(), 1, seed)? {
        if let Some(img) = &g.image {
            write_ppm(img, stem.with_extension("ppm"))?;
        }
        if let Some(clip) = &g.audio {
            write_wav(clip, stem.with_extension("wav"))?;
        }
    }
    Ok(())
}

pub fn train(file: Option<&Path>, flags: &KvText) -> Result<()> {
    let mut cfg = RunConfig::resolve("train", &TRAIN_KEYS, file, flags)?;
    let resume = cfg.get("resume").map(PathBuf::from);
    let (mut state, data) = match &resume {
        Some(path) => {
            if let Some(k) = MODEL_KEYS.iter().find(|k| flags.get(k).is_some()) {
                bail!(Usage, "--resume takes {k} from the checkpoint; drop the flag");
            }
            let state = load_checkpoint(path)?;
            let data = load_data(&cfg, &state.spec)?;
            (state, data)
        }
        None => {
            let (spec, loss, train) = model_from_config(&cfg)?;
            let data = load_data(&cfg, &spec)?;
            if data.split(Split::Train).is_empty() {
                bail!(Usage, "the dataset has no training pairs");
            }
            (ModelState::new(spec, loss, train, data.split(Split::Train))?, data)
        }
    };
    let train_set = data.split(Split::Train);
    if train_set.is_empty() {
        bail!(Usage, "the dataset has no training pairs");
    }
    let epochs: usize = parse(&cfg, "epochs")?;
    if epochs == 0 {
        bail!(Configuration, "epochs must be at least 1");
    }
    let sample_every: usize = parse(&cfg, "sample_every")?;
    record_model(&mut cfg, &state);
    cfg.write_resolved()?;

    let out = cfg.out.clone();
    let samples_dir = out.join("samples");
    std::fs::create_dir_all(&samples_dir)?;
    let reference = &train_set[0];
    write_ppm(&reference.image, samples_dir.join("reference.ppm"))?;
    write_wav(&reference.audio, samples_dir.join("reference.wav"))?;
    let seed = state.train.seed;
    let last = state.epochs_done + epochs;
    eprintln!(
        "training {} ({} mode, latent {}) on {} pairs for {epochs} epochs",
        state.spec.preset,
        state.spec.mode,
        state.spec.latent_len(),
        train_set.len()
    );
    run_epochs(&mut state, train_set, epochs, |st, rec| {
        std::fs::write(out.join(HISTORY_FILE), st.history.to_csv())?;
        eprintln!(
            "epoch {:>4}  loss {:.6}  ii {} nats  plug-in {} bits",
            rec.epoch,
            rec.total_loss,
            rec.ii_nats.map_or("-".into(), |v| format!("{v:.4}")),
            rec.ii_plugin_bits.map_or("-".into(), |v| format!("{v:.4}"))
        );
        if rec.epoch == last || (sample_every > 0 && rec.epoch % sample_every == 0) {
            write_outputs(st, reference, seed, &samples_dir.join(format!("epoch-{:04}", rec.epoch)))?;
        }
        Ok(())
    })?;
    save_checkpoint(&state, out.join(CHECKPOINT_FILE))?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn generate(file: Option<&Path>, flags: &KvText) -> Result<()> {
    let cfg = RunConfig::resolve("generate", &GENERATE_KEYS, file, flags)?;
    let Some(checkpoint) = cfg.get("checkpoint") else {
        bail!(Usage, "generate needs --checkpoint");
    };
    let Some(from) = cfg.get("from") else {
        bail!(Usage, "generate needs --from audio|image|both");
    };
    let inputs: Vec<&str> = cfg.get("inputs").map(|s| s.split(',').collect()).unwrap_or_default();
    if inputs.is_empty() {
        bail!(Usage, "generate needs at least one --in file");
    }
    let state = load_checkpoint(checkpoint)?;
    let spec = &state.spec;
    let is_ppm = |p: &&str| p.to_ascii_lowercase().ends_with(".ppm");
    let (image_paths, audio_paths): (Vec<&str>, Vec<&str>) = match from {
        "image" => (inputs.clone(), vec![]),
        "audio" => (vec![], inputs.clone()),
        "both" => inputs.iter().copied().partition(is_ppm),
        other => bail!(Usage, "--from must be audio, image or both, got {other:?}"),
    };
    let images = image_paths
        .iter()
        .map(|p| conform_image(&load_ppm(p)?, spec.image_height, spec.image_width))
        .collect::<Result<Vec<_>>>()?;
    let clips = audio_paths
        .iter()
        .map(|p| conform_audio(&load_wav(p)?, spec.audio_len))
        .collect::<Result<Vec<_>>>()?;
    let outputs = generate_outputs(
        &state,
        (!images.is_empty()).then_some(images.as_slice()),
        (!clips.is_empty()).then_some(clips.as_slice()),
        parse(&cfg, "count")?,
        parse(&cfg, "seed")?,
    )?;
    cfg.write_resolved()?;
    for g in outputs {
        let stem = cfg.out.join(format!("gen-{:03}-{:03}", g.input, g.draw));
        if let Some(img) = &g.image {
            let path = stem.with_extension("ppm");
            write_ppm(img, &path)?;
            println!("{}", path.display());
        }
        if let Some(clip) = &g.audio {
            let path = stem.with_extension("wav");
            write_wav(clip, &path)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn metrics_row(split: &str, m: &EvalMetrics) -> String {
    let part = |modality| {
        m.get(modality)
            .map_or((None, None), |d| (Some(d.mse), Some(d.baseline_mse)))
    };
    let (mv, bv) = part(Modality::Visual);
    let (ma, ba) = part(Modality::Audio);
    format!(
        "{split},{},{},{},{},{},{},{}",
        m.samples,
        opt(mv),
        opt(bv),
        opt(ma),
        opt(ba),
        opt(m.ii_plugin_bits()),
        opt(m.ii_gaussian_nats())
    )
}

pub fn eval(file: Option<&Path>, flags: &KvText) -> Result<()> {
    let cfg = RunConfig::resolve("eval", &EVAL_KEYS, file, flags)?;
    let Some(checkpoint) = cfg.get("checkpoint") else {
        bail!(Usage, "eval needs --checkpoint");
    };
    let with_ii = match cfg.values.require("ii")? {
        "gaussian" | "on" => true,
        "off" => false,
        other => bail!(Usage, "--ii must be gaussian or off, got {other:?}"),
    };
    let state = load_checkpoint(checkpoint)?;
    let data = load_data(&cfg, &state.spec)?;
    let splits: Vec<Split> = match cfg.values.require("split")? {
        "all" => [Split::Train, Split::Val]
            .into_iter()
            .filter(|s| !data.split(*s).is_empty())
            .collect(),
        one => vec![Split::parse(one)?],
    };
    if splits.is_empty() {
        bail!(Usage, "the dataset is empty");
    }
    let seed: u64 = parse(&cfg, "seed")?;
    let mut csv = format!("{METRICS_HEADER}\n");
    for split in splits {
        let m = evaluate(&state, data.split(split), seed, with_ii)?;
        csv.push_str(&metrics_row(split.as_str(), &m));
        csv.push('\n');
    }
    cfg.write_resolved()?;
    std::fs::write(cfg.out.join(METRICS_FILE), &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn pid(case: Option<&str>, joint: Option<&Path>) -> Result<()> {
    let (label, dist) = match (case, joint) {
        (Some("xor"), None) => ("xor".to_string(), JointDistribution::xor()),
        (Some("copy"), None) => ("copy".to_string(), JointDistribution::copy()),
        (Some("indep"), None) => ("indep".to_string(), JointDistribution::independent()),
        (Some(other), None) => bail!(Usage, "--case must be xor, copy or indep, got {other:?}"),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| crate::Error::Usage(format!("{}: {e}", path.display())))?;
            (path.display().to_string(), JointDistribution::parse(&text)?)
        }
        _ => bail!(Usage, "pass exactly one of --case or --joint"),
    };
    let r = pid_decompose(&dist)?;
    println!("joint: {label} (cards {:?})", dist.cards());
    println!("{r}");
    Ok(())
}
