use std::fmt;

use crate::decoder::DecoderConfig;
use crate::error::{bail, Result};
use crate::infotheory::{DEFAULT_BINS, DEFAULT_PROJECTION_DIM, DEFAULT_RIDGE};
use crate::kvtext::KvText;
use crate::tokenizer::{Modality, CHANNELS};

/// Which modalities feed the latent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputMode {
    Joint,
    /// Latent is `z_a` alone; only the visual decoder trains.
    AudioOnly,
    /// Latent is `z_v` alone; only the audio decoder trains.
    VisualOnly,
}

impl InputMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(InputMode::Joint),
            "audio-only" | "audio-only-input" => Ok(InputMode::AudioOnly),
            "visual-only" | "visual-only-input" => Ok(InputMode::VisualOnly),
            other => bail!(Configuration, "unknown mode {other:?}; expected joint, audio-only or visual-only"),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InputMode::Joint => "joint",
            InputMode::AudioOnly => "audio-only",
            InputMode::VisualOnly => "visual-only",
        }
    }

    pub fn uses_input(self, m: Modality) -> bool {
        match self {
            InputMode::Joint => true,
            InputMode::AudioOnly => m == Modality::Audio,
            InputMode::VisualOnly => m == Modality::Visual,
        }
    }

    pub fn trains_decoder(self, m: Modality) -> bool {
        self == InputMode::Joint || !self.uses_input(m)
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const EXPERIMENT_PRESETS: [&str; 6] = ["desk", "desk-visual", "desk-audio", "paper", "paper-visual", "paper-audio"];

/// The four full-size experiments: joint latents 300 and 400, audio-only latents 200 and 250.
pub const PAPER_EXPERIMENTS: [(InputMode, usize); 4] = [
    (InputMode::Joint, 300),
    (InputMode::Joint, 400),
    (InputMode::AudioOnly, 200),
    (InputMode::AudioOnly, 250),
];

/// Everything that fixes the model's shapes and frozen encoders.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub preset: String,
    pub mode: InputMode,
    pub image_height: usize,
    pub image_width: usize,
    pub stripes: usize,
    pub audio_len: usize,
    pub segments: usize,
    pub sample_rate: u32,
    /// Bank output lengths; 0 when the modality is not an input.
    pub visual_code: usize,
    pub audio_code: usize,
    pub bank_seed: u64,
    pub visual_decoder: Option<DecoderConfig>,
    pub audio_decoder: Option<DecoderConfig>,
}

struct Scale {
    height: usize,
    width: usize,
    stripes: usize,
    audio_len: usize,
    segments: usize,
    sample_rate: u32,
    joint_latent: usize,
    single_latent: usize,
}

const DESK: Scale = Scale {
    height: 8,
    width: 8,
    stripes: 6,
    audio_len: 64,
    segments: 2,
    sample_rate: 128,
    joint_latent: 16,
    single_latent: 16,
};

const PAPER: Scale = Scale {
    height: 32,
    width: 32,
    stripes: 6,
    audio_len: 2205,
    segments: 5,
    sample_rate: 4410,
    joint_latent: 300,
    single_latent: 200,
};

impl ModelSpec {
    /// Resolves a named experiment preset. `latent` overrides the preset's default
    /// latent length; in joint mode it is split evenly between the two banks.
    pub fn preset(name: &str, mode: InputMode, latent: Option<usize>, bank_seed: u64) -> Result<Self> {
        let (scale, family, decoders) = match name {
            "desk" => (&DESK, "desk", [true, true]),
            "desk-visual" => (&DESK, "desk", [true, false]),
            "desk-audio" => (&DESK, "desk", [false, true]),
            "paper" => (&PAPER, "paper", [true, true]),
            "paper-visual" => (&PAPER, "paper", [true, false]),
            "paper-audio" => (&PAPER, "paper", [false, true]),
            other => bail!(
                Configuration,
                "unknown preset {other:?}; expected one of {}",
                EXPERIMENT_PRESETS.join(", ")
            ),
        };
        let latent = latent.unwrap_or(match mode {
            InputMode::Joint => scale.joint_latent,
            _ => scale.single_latent,
        });
        let (visual_code, audio_code) = match mode {
            InputMode::Joint => {
                if latent % 2 != 0 {
                    bail!(Configuration, "joint latent length {latent} must be even to split across two banks");
                }
                (latent / 2, latent / 2)
            }
            InputMode::AudioOnly => (0, latent),
            InputMode::VisualOnly => (latent, 0),
        };
        let want_visual = decoders[0] && mode.trains_decoder(Modality::Visual);
        let want_audio = decoders[1] && mode.trains_decoder(Modality::Audio);
        if !want_visual && !want_audio {
            bail!(Configuration, "preset {name} has no decoder that {mode} mode can train");
        }
        let spec = Self {
            preset: name.to_string(),
            mode,
            image_height: scale.height,
            image_width: scale.width,
            stripes: scale.stripes,
            audio_len: scale.audio_len,
            segments: scale.segments,
            sample_rate: scale.sample_rate,
            visual_code,
            audio_code,
            bank_seed,
            visual_decoder: want_visual
                .then(|| DecoderConfig::preset(&format!("{family}-visual"), latent))
                .transpose()?,
            audio_decoder: want_audio
                .then(|| DecoderConfig::preset(&format!("{family}-audio"), latent))
                .transpose()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn latent_len(&self) -> usize {
        self.visual_code + self.audio_code
    }

    pub fn image_len(&self) -> usize {
        CHANNELS * self.image_height * self.image_width
    }

    pub fn stripe_len(&self) -> usize {
        self.image_len() / self.stripes
    }

    pub fn segment_len(&self) -> usize {
        self.audio_len / self.segments
    }

    pub fn decoder(&self, m: Modality) -> Option<&DecoderConfig> {
        match m {
            Modality::Visual => self.visual_decoder.as_ref(),
            Modality::Audio => self.audio_decoder.as_ref(),
        }
    }

    /// Length of one modality's data vector.
    pub fn data_len(&self, m: Modality) -> usize {
        match m {
            Modality::Visual => self.image_len(),
            Modality::Audio => self.audio_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stripes == 0 || self.stripes % CHANNELS != 0 || self.image_width % (self.stripes / CHANNELS) != 0 {
            bail!(
                Configuration,
                "{} stripes do not tile a {}x{}x3 image",
                self.stripes,
                self.image_height,
                self.image_width
            );
        }
        if self.segments == 0 || self.audio_len % self.segments != 0 {
            bail!(Configuration, "{} segments do not tile {} samples", self.segments, self.audio_len);
        }
        for (m, code, token) in [
            (Modality::Visual, self.visual_code, self.stripe_len()),
            (Modality::Audio, self.audio_code, self.segment_len()),
        ] {
            if self.mode.uses_input(m) != (code > 0) {
                bail!(Configuration, "{m} code length {code} does not fit {} mode", self.mode);
            }
            if code >= token {
                bail!(Configuration, "{m} code length {code} must be below the token length {token}");
            }
        }
        for m in [Modality::Visual, Modality::Audio] {
            if let Some(d) = self.decoder(m) {
                d.validate()?;
                if d.latent_len != self.latent_len() || d.output.len() != self.data_len(m) {
                    bail!(Configuration, "{m} decoder {} does not fit the model shapes", d.name);
                }
                if !self.mode.trains_decoder(m) {
                    bail!(Configuration, "{} mode cannot train a {m} decoder", self.mode);
                }
            }
        }
        if self.visual_decoder.is_none() && self.audio_decoder.is_none() {
            bail!(Configuration, "model has no decoder");
        }
        Ok(())
    }

    /// Shape and seed fields as `key = value` text; decoders are stored separately.
    pub fn to_kv(&self) -> KvText {
        let mut kv = KvText::new();
        kv.set("preset", &self.preset);
        kv.set("mode", self.mode);
        kv.set("image_height", self.image_height);
        kv.set("image_width", self.image_width);
        kv.set("stripes", self.stripes);
        kv.set("audio_len", self.audio_len);
        kv.set("segments", self.segments);
        kv.set("sample_rate", self.sample_rate);
        kv.set("visual_code", self.visual_code);
        kv.set("audio_code", self.audio_code);
        kv.set("bank_seed", self.bank_seed);
        kv
    }

    pub fn from_kv(kv: &KvText, visual_decoder: Option<DecoderConfig>, audio_decoder: Option<DecoderConfig>) -> Result<Self> {
        let spec = Self {
            preset: kv.require("preset")?.to_string(),
            mode: InputMode::parse(kv.require("mode")?)?,
            image_height: kv.parse_req("image_height")?,
            image_width: kv.parse_req("image_width")?,
            stripes: kv.parse_req("stripes")?,
            audio_len: kv.parse_req("audio_len")?,
            segments: kv.parse_req("segments")?,
            sample_rate: kv.parse_req("sample_rate")?,
            visual_code: kv.parse_req("visual_code")?,
            audio_code: kv.parse_req("audio_code")?,
            bank_seed: kv.parse_req("bank_seed")?,
            visual_decoder,
            audio_decoder,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IiBackend {
    Gaussian,
    Off,
}

impl IiBackend {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(IiBackend::Gaussian),
            "off" => Ok(IiBackend::Off),
            other => bail!(Configuration, "unknown II backend {other:?}; expected gaussian or off"),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IiBackend::Gaussian => "gaussian",
            IiBackend::Off => "off",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossConfig {
    pub ii_backend: IiBackend,
    pub ii_weight: f64,
    pub recon_weight: f64,
    pub projection_dim: usize,
    pub ridge: f64,
    pub projection_seed: u64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            ii_backend: IiBackend::Gaussian,
            ii_weight: 1.0,
            recon_weight: 1.0,
            projection_dim: DEFAULT_PROJECTION_DIM,
            ridge: DEFAULT_RIDGE,
            projection_seed: 1,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.ii_weight.is_finite() || !self.recon_weight.is_finite() {
            bail!(Configuration, "loss weights must be finite");
        }
        if self.projection_dim == 0 {
            bail!(Configuration, "projection dimension must be at least 1");
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            bail!(Configuration, "ridge must be finite and nonnegative");
        }
        Ok(())
    }

    /// Smallest batch the loss accepts.
    pub fn min_batch(&self) -> usize {
        match self.ii_backend {
            IiBackend::Gaussian => 3 * self.projection_dim + 3,
            IiBackend::Off => 4,
        }
    }

    pub fn to_kv(&self) -> KvText {
        let mut kv = KvText::new();
        kv.set("ii_backend", self.ii_backend.as_str());
        kv.set("ii_weight", self.ii_weight);
        kv.set("recon_weight", self.recon_weight);
        kv.set("projection_dim", self.projection_dim);
        kv.set("ridge", self.ridge);
        kv.set("projection_seed", self.projection_seed);
        kv
    }

    pub fn from_kv(kv: &KvText) -> Result<Self> {
        let cfg = Self {
            ii_backend: IiBackend::parse(kv.require("ii_backend")?)?,
            ii_weight: kv.parse_req("ii_weight")?,
            recon_weight: kv.parse_req("recon_weight")?,
            projection_dim: kv.parse_req("projection_dim")?,
            ridge: kv.parse_req("ridge")?,
            projection_seed: kv.parse_req("projection_seed")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Scope of the `σ` statistic used when sampling `z` during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigmaScope {
    Batch,
    Dataset,
    /// `σ = 0`: noise-free codes, for overfit sanity checks.
    Zero,
}

impl SigmaScope {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(SigmaScope::Batch),
            "dataset" => Ok(SigmaScope::Dataset),
            "zero" => Ok(SigmaScope::Zero),
            other => bail!(Configuration, "unknown sigma scope {other:?}; expected batch, dataset or zero"),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SigmaScope::Batch => "batch",
            SigmaScope::Dataset => "dataset",
            SigmaScope::Zero => "zero",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub sigma_scope: SigmaScope,
    /// Bins for the plug-in II monitor.
    pub plugin_bins: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 1,
            sigma_scope: SigmaScope::Batch,
            plugin_bins: DEFAULT_BINS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, loss: &LossConfig) -> Result<()> {
        if self.epochs == 0 {
            bail!(Configuration, "epochs must be at least 1");
        }
        if self.batch_size < loss.min_batch() {
            bail!(
                Configuration,
                "batch size {} is below the minimum {} for the {} II backend",
                self.batch_size,
                loss.min_batch(),
                loss.ii_backend.as_str()
            );
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            bail!(Configuration, "learning rate must be positive and finite");
        }
        if self.plugin_bins < 2 {
            bail!(Configuration, "plug-in monitor needs at least 2 bins");
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvText {
        let mut kv = KvText::new();
        kv.set("epochs", self.epochs);
        kv.set("batch_size", self.batch_size);
        kv.set("learning_rate", self.learning_rate);
        kv.set("seed", self.seed);
        kv.set("sigma_scope", self.sigma_scope.as_str());
        kv.set("plugin_bins", self.plugin_bins);
        kv
    }

    pub fn from_kv(kv: &KvText) -> Result<Self> {
        Ok(Self {
            epochs: kv.parse_req("epochs")?,
            batch_size: kv.parse_req("batch_size")?,
            learning_rate: kv.parse_req("learning_rate")?,
            seed: kv.parse_req("seed")?,
            sigma_scope: SigmaScope::parse(kv.require("sigma_scope")?)?,
            plugin_bins: kv.parse_req("plugin_bins")?,
        })
    }
}
