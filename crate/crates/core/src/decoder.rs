//! Trainable decoders: a transposed-convolution trunk fed by the latent as a `len × 1 × 1`
//! feature map, ending either in a 3-channel image or a fully connected waveform head.

use std::fmt::Write as _;

use crate::encoder::LatentVector;
use crate::error::{bail, Result};
use crate::numerics::{ConvGeometry, Graph, Rng, Tensor, Var};
use crate::tokenizer::CHANNELS;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    ConvTranspose2d,
    FullyConnected,
    Relu,
}

/// One layer. For fully connected layers `in_channels`/`out_channels` are the feature
/// counts and the geometry fields are zero; ReLU layers carry no sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl LayerSpec {
    pub fn conv_t(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize, output_padding: usize) -> Self {
        Self {
            kind: LayerKind::ConvTranspose2d,
            kernel,
            stride,
            padding,
            output_padding,
            in_channels,
            out_channels,
        }
    }

    pub fn fc(in_features: usize, out_features: usize) -> Self {
        Self {
            kind: LayerKind::FullyConnected,
            kernel: 0,
            stride: 0,
            padding: 0,
            output_padding: 0,
            in_channels: in_features,
            out_channels: out_features,
        }
    }

    pub fn relu() -> Self {
        Self {
            kind: LayerKind::Relu,
            kernel: 0,
            stride: 0,
            padding: 0,
            output_padding: 0,
            in_channels: 0,
            out_channels: 0,
        }
    }

    fn geometry(&self) -> ConvGeometry {
        ConvGeometry {
            stride: self.stride,
            padding: self.padding,
            output_padding: self.output_padding,
        }
    }

    fn has_params(&self) -> bool {
        self.kind != LayerKind::Relu
    }

    fn weight_shape(&self) -> Vec<usize> {
        match self.kind {
            LayerKind::ConvTranspose2d => vec![self.in_channels, self.out_channels, self.kernel, self.kernel],
            LayerKind::FullyConnected => vec![self.out_channels, self.in_channels],
            LayerKind::Relu => Vec::new(),
        }
    }

    fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::ConvTranspose2d => self.in_channels * self.kernel * self.kernel,
            _ => self.in_channels,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputShape {
    /// `3 × height × width`
    Image { height: usize, width: usize },
    Audio { len: usize },
}

impl OutputShape {
    pub fn len(&self) -> usize {
        match *self {
            OutputShape::Image { height, width } => CHANNELS * height * width,
            OutputShape::Audio { len } => len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoderConfig {
    pub name: String,
    pub latent_len: usize,
    pub layers: Vec<LayerSpec>,
    pub output: OutputShape,
}

pub const DECODER_PRESETS: [&str; 4] = ["paper-visual", "paper-audio", "desk-visual", "desk-audio"];

/// The paper-scale trunk reaches `32 × 32` through strides 8, 2, 2.
fn paper_trunk(latent: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::conv_t(latent, 64, 7, 8, 0, 1),
        LayerSpec::relu(),
        LayerSpec::conv_t(64, 64, 3, 2, 1, 1),
        LayerSpec::relu(),
        LayerSpec::conv_t(64, 32, 3, 2, 1, 1),
        LayerSpec::relu(),
    ]
}

/// Desk trunk: `1 → 2 → 4 → 8`, channels 16, 16, 8.
fn desk_trunk(latent: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::conv_t(latent, 16, 2, 2, 0, 0),
        LayerSpec::relu(),
        LayerSpec::conv_t(16, 16, 3, 2, 1, 1),
        LayerSpec::relu(),
        LayerSpec::conv_t(16, 8, 3, 2, 1, 1),
        LayerSpec::relu(),
    ]
}

impl DecoderConfig {
    /// Looks up a named preset. Paper presets emit 32×32×3 images or 2205 samples,
    /// desk presets 8×8×3 images or 64 samples.
    pub fn preset(name: &str, latent_len: usize) -> Result<Self> {
        if latent_len == 0 {
            bail!(Configuration, "latent length must be positive");
        }
        let (layers, output) = match name {
            "paper-visual" => {
                let mut l = paper_trunk(latent_len);
                l.push(LayerSpec::conv_t(32, 3, 3, 1, 1, 0));
                (l, OutputShape::Image { height: 32, width: 32 })
            }
            "paper-audio" => {
                let mut l = paper_trunk(latent_len);
                l.push(LayerSpec::fc(32 * 32 * 32, 2205));
                (l, OutputShape::Audio { len: 2205 })
            }
            "desk-visual" => {
                let mut l = desk_trunk(latent_len);
                l.push(LayerSpec::conv_t(8, 3, 3, 1, 1, 0));
                (l, OutputShape::Image { height: 8, width: 8 })
            }
            "desk-audio" => {
                let mut l = desk_trunk(latent_len);
                l.push(LayerSpec::fc(8 * 8 * 8, 64));
                (l, OutputShape::Audio { len: 64 })
            }
            other => bail!(
                Configuration,
                "unknown decoder preset {other:?}; expected one of {}",
                DECODER_PRESETS.join(", ")
            ),
        };
        let cfg = Self {
            name: name.to_string(),
            latent_len,
            layers,
            output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Walks the shape chain from `latent × 1 × 1` and checks it lands on `output`.
    /// Returns the `(channels, height, width)` trace after every layer.
    pub fn validate(&self) -> Result<Vec<(usize, usize, usize)>> {
        if self.layers.is_empty() {
            bail!(Configuration, "{}: decoder has no layers", self.name);
        }
        let mut shape = (self.latent_len, 1usize, 1usize);
        let mut trace = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            shape = match l.kind {
                LayerKind::Relu => shape,
                LayerKind::ConvTranspose2d => {
                    if l.in_channels != shape.0 {
                        bail!(
                            Configuration,
                            "{}: layer {i} expects {} channels, gets {}",
                            self.name,
                            l.in_channels,
                            shape.0
                        );
                    }
                    if l.kernel == 0 || l.stride == 0 || l.out_channels == 0 {
                        bail!(Configuration, "{}: layer {i} has a zero kernel, stride or width", self.name);
                    }
                    if l.output_padding >= l.stride {
                        bail!(
                            Configuration,
                            "{}: layer {i} output_padding {} must be below stride {}",
                            self.name,
                            l.output_padding,
                            l.stride
                        );
                    }
                    let g = l.geometry();
                    match (g.output_extent(shape.1, l.kernel), g.output_extent(shape.2, l.kernel)) {
                        (Some(h), Some(w)) => (l.out_channels, h, w),
                        _ => bail!(Configuration, "{}: layer {i} collapses the feature map", self.name),
                    }
                }
                LayerKind::FullyConnected => {
                    let features = shape.0 * shape.1 * shape.2;
                    if l.in_channels != features || l.out_channels == 0 {
                        bail!(
                            Configuration,
                            "{}: layer {i} expects {} features, gets {features}",
                            self.name,
                            l.in_channels
                        );
                    }
                    (l.out_channels, 1, 1)
                }
            };
            trace.push(shape);
        }
        let ok = match self.output {
            OutputShape::Image { height, width } => {
                self.layers.last().map(|l| l.kind) == Some(LayerKind::ConvTranspose2d) && shape == (CHANNELS, height, width)
            }
            OutputShape::Audio { len } => {
                self.layers.last().map(|l| l.kind) == Some(LayerKind::FullyConnected) && shape == (len, 1, 1)
            }
        };
        if !ok {
            bail!(
                Configuration,
                "{}: layers end at {shape:?}, which does not match {:?}",
                self.name,
                self.output
            );
        }
        Ok(trace)
    }

    pub fn param_shapes(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        self.layers
            .iter()
            .filter(|l| l.has_params())
            .map(|l| (l.weight_shape(), vec![l.out_channels]))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|(w, b)| w.iter().product::<usize>() + b[0])
            .sum()
    }

    /// Line-oriented text form, inverse of [`from_text`](Self::from_text).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "latent = {}", self.latent_len);
        let _ = match self.output {
            OutputShape::Image { height, width } => writeln!(s, "output = image {height} {width}"),
            OutputShape::Audio { len } => writeln!(s, "output = audio {len}"),
        };
        for l in &self.layers {
            let _ = match l.kind {
                LayerKind::Relu => writeln!(s, "layer = relu"),
                LayerKind::FullyConnected => writeln!(s, "layer = fc {} {}", l.in_channels, l.out_channels),
                LayerKind::ConvTranspose2d => writeln!(
                    s,
                    "layer = convt {} {} {} {} {} {}",
                    l.in_channels, l.out_channels, l.kernel, l.stride, l.padding, l.output_padding
                ),
            };
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (mut name, mut latent, mut output, mut layers) = (None, None, None, Vec::new());
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let Some((key, value)) = line.split_once('=') else {
                bail!(Format, "decoder config line without '=': {line:?}");
            };
            let value = value.trim();
            let nums = |v: &str| -> Result<Vec<usize>> {
                v.split_whitespace()
                    .map(|t| t.parse().map_err(|_| crate::Error::Format(format!("bad number {t:?} in {line:?}"))))
                    .collect()
            };
            match key.trim() {
                "name" => name = Some(value.to_string()),
                "latent" => latent = nums(value)?.first().copied(),
                "output" => {
                    let (kind, rest) = value.split_once(' ').unwrap_or((value, ""));
                    output = Some(match (kind, nums(rest)?.as_slice()) {
                        ("image", [h, w]) => OutputShape::Image { height: *h, width: *w },
                        ("audio", [n]) => OutputShape::Audio { len: *n },
                        _ => bail!(Format, "bad output line {line:?}"),
                    });
                }
                "layer" => {
                    let (kind, rest) = value.split_once(' ').unwrap_or((value, ""));
                    layers.push(match (kind, nums(rest)?.as_slice()) {
                        ("relu", []) => LayerSpec::relu(),
                        ("fc", [i, o]) => LayerSpec::fc(*i, *o),
                        ("convt", [i, o, k, s, p, op]) => LayerSpec::conv_t(*i, *o, *k, *s, *p, *op),
                        _ => bail!(Format, "bad layer line {line:?}"),
                    });
                }
                other => bail!(Format, "unknown decoder config key {other:?}"),
            }
        }
        match (name, latent, output) {
            (Some(name), Some(latent_len), Some(output)) => {
                let cfg = Self {
                    name,
                    latent_len,
                    layers,
                    output,
                };
                cfg.validate()?;
                Ok(cfg)
            }
            _ => bail!(Format, "decoder config needs name, latent and output lines"),
        }
    }
}

/// Weight and bias tensors for every parameterized layer, in layer order.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderParams {
    pub layers: Vec<(Tensor, Tensor)>,
}

/// Weights N(0, 1/fan_in) (fan_in = in_channels·k² for transposed convolutions),
/// zero biases. Drawn layer by layer, row-major, from one stream.
pub fn init_decoder(config: &DecoderConfig, rng: &mut Rng) -> Result<DecoderParams> {
    config.validate()?;
    let mut layers = Vec::new();
    for l in config.layers.iter().filter(|l| l.has_params()) {
        let shape = l.weight_shape();
        let n: usize = shape.iter().product();
        let scale = 1.0 / (l.fan_in() as f64).sqrt();
        let w = (0..n).map(|_| scale * rng.normal()).collect();
        layers.push((Tensor::new(shape, w)?, Tensor::zeros(&[l.out_channels])?));
    }
    Ok(DecoderParams { layers })
}

impl DecoderParams {
    pub fn zeros(config: &DecoderConfig) -> Result<Self> {
        config.validate()?;
        let layers = config
            .param_shapes()
            .into_iter()
            .map(|(w, b)| Ok((Tensor::zeros(&w)?, Tensor::zeros(&b)?)))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn check(&self, config: &DecoderConfig) -> Result<()> {
        let shapes = config.param_shapes();
        if shapes.len() != self.layers.len()
            || shapes
                .iter()
                .zip(&self.layers)
                .any(|((ws, bs), (w, b))| w.shape() != ws.as_slice() || b.shape() != bs.as_slice())
        {
            bail!(Configuration, "{}: parameter shapes do not match the config", config.name);
        }
        Ok(())
    }

    /// Every tensor in order `w0, b0, w1, b1, …`.
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// Adds every parameter to the graph as a differentiable leaf.
    pub fn bind(&self, g: &mut Graph) -> Vec<(Var, Var)> {
        self.layers
            .iter()
            .map(|(w, b)| (g.param(w.clone()), g.param(b.clone())))
            .collect()
    }
}

/// Forward pass of a `[B, latent_len]` batch. Images come back as `[B, 3, H, W]`,
/// waveforms as `[B, len]`.
pub fn forward_graph(g: &mut Graph, config: &DecoderConfig, params: &[(Var, Var)], latent: Var) -> Result<Var> {
    let (batch, len) = g.value(latent).dims2()?;
    if len != config.latent_len {
        bail!(
            Dimension,
            "{}: latent has length {len}, decoder expects {}",
            config.name,
            config.latent_len
        );
    }
    let mut x = g.reshape(latent, vec![batch, len, 1, 1])?;
    let mut p = params.iter();
    for l in &config.layers {
        x = match l.kind {
            LayerKind::Relu => g.relu(x)?,
            LayerKind::ConvTranspose2d => {
                let &(w, b) = p.next().ok_or_else(|| crate::Error::Configuration("too few parameter tensors".into()))?;
                g.conv_transpose2d(x, w, b, l.geometry())?
            }
            LayerKind::FullyConnected => {
                let &(w, b) = p.next().ok_or_else(|| crate::Error::Configuration("too few parameter tensors".into()))?;
                let features = g.value(x).len() / batch;
                let flat = g.reshape(x, vec![batch, features])?;
                g.linear(flat, w, b)?
            }
        };
    }
    if p.next().is_some() {
        bail!(Configuration, "{}: too many parameter tensors", config.name);
    }
    Ok(x)
}

fn decode_values(latent: &LatentVector, config: &DecoderConfig, params: &DecoderParams) -> Result<Vec<f64>> {
    params.check(config)?;
    let values = latent.values();
    if values.len() != config.latent_len {
        bail!(
            Dimension,
            "{}: latent has length {}, decoder expects {}",
            config.name,
            values.len(),
            config.latent_len
        );
    }
    let mut g = Graph::new();
    let z = g.constant(Tensor::matrix(1, values.len(), values)?);
    let bound: Vec<(Var, Var)> = params
        .layers
        .iter()
        .map(|(w, b)| (g.constant(w.clone()), g.constant(b.clone())))
        .collect();
    let out = forward_graph(&mut g, config, &bound, z)?;
    Ok(g.value(out).data().to_vec())
}

/// Raw (unclamped) `[3, H, W]` image.
pub fn decode_visual(latent: &LatentVector, config: &DecoderConfig, params: &DecoderParams) -> Result<Tensor> {
    let OutputShape::Image { height, width } = config.output else {
        bail!(Configuration, "{} is not a visual decoder", config.name);
    };
    Tensor::new(vec![CHANNELS, height, width], decode_values(latent, config, params)?)
}

/// Raw (unclamped) waveform.
pub fn decode_audio(latent: &LatentVector, config: &DecoderConfig, params: &DecoderParams) -> Result<Vec<f64>> {
    if !matches!(config.output, OutputShape::Audio { .. }) {
        bail!(Configuration, "{} is not an audio decoder", config.name);
    }
    decode_values(latent, config, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{build_latent, ModalityCode};
    use crate::numerics::grad_check_coords;

    fn latent(values: Vec<f64>) -> LatentVector {
        let code = ModalityCode { mu: values.clone(), sigma: 0.0, z: values };
        build_latent(Some(&code), None).unwrap()
    }

    /// Independent shape oracle: one extent through the transposed-conv formula.
    fn extent(input: usize, k: usize, s: usize, p: usize, op: usize) -> usize {
        (input - 1) * s + k + op - 2 * p
    }

    #[test]
    fn paper_visual_shapes() {
        let cfg = DecoderConfig::preset("paper-visual", 300).unwrap();
        let trace = cfg.validate().unwrap();
        let spatial: Vec<usize> = trace.iter().map(|t| t.1).collect();
        assert_eq!(spatial, [8, 8, 16, 16, 32, 32, 32]);
        let channels: Vec<usize> = trace.iter().step_by(2).map(|t| t.0).collect();
        assert_eq!(channels, [64, 64, 32, 3]);
        let shapes = cfg.param_shapes();
        assert_eq!(shapes[0].0, [300, 64, 7, 7]);
        assert_eq!(shapes[1].0, [64, 64, 3, 3]);
        assert_eq!(shapes[2].0, [64, 32, 3, 3]);
        assert_eq!(shapes[3].0, [32, 3, 3, 3]);
        assert_eq!(cfg.output, OutputShape::Image { height: 32, width: 32 });
    }

    #[test]
    fn paper_audio_head() {
        let cfg = DecoderConfig::preset("paper-audio", 250).unwrap();
        assert_eq!(cfg.validate().unwrap().last(), Some(&(2205, 1, 1)));
        assert_eq!(cfg.param_shapes()[3].0, [2205, 32 * 32 * 32]);
    }

    #[test]
    fn desk_shapes_follow_the_formula() {
        let mut e = 1;
        for (k, s, p, op) in [(2, 2, 0, 0), (3, 2, 1, 1), (3, 2, 1, 1), (3, 1, 1, 0)] {
            e = extent(e, k, s, p, op);
        }
        assert_eq!(e, 8);
        let v = DecoderConfig::preset("desk-visual", 16).unwrap();
        assert_eq!(v.validate().unwrap().last(), Some(&(3, 8, 8)));
        let a = DecoderConfig::preset("desk-audio", 16).unwrap();
        assert_eq!(a.validate().unwrap().last(), Some(&(64, 1, 1)));
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = DecoderConfig::preset("paper-visual", 300).unwrap();
        cfg.layers[0].output_padding = 9;
        assert!(matches!(cfg.validate(), Err(crate::Error::Configuration(_))));
        assert!(init_decoder(&cfg, &mut Rng::new(0)).is_err());
        let mut cfg = DecoderConfig::preset("desk-visual", 16).unwrap();
        cfg.layers[2].in_channels = 15;
        assert!(cfg.validate().is_err());
        let mut cfg = DecoderConfig::preset("desk-visual", 16).unwrap();
        cfg.output = OutputShape::Image { height: 16, width: 16 };
        assert!(cfg.validate().is_err());
        assert!(DecoderConfig::preset("nope", 16).is_err());
        assert!(DecoderConfig::preset("desk-audio", 0).is_err());
    }

    #[test]
    fn text_roundtrip() {
        for name in DECODER_PRESETS {
            let cfg = DecoderConfig::preset(name, 40).unwrap();
            assert_eq!(DecoderConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        }
        assert!(DecoderConfig::from_text("name = x\nlatent = 2\n").is_err());
    }

    #[test]
    fn init_statistics_and_determinism() {
        let cfg = DecoderConfig::preset("desk-visual", 16).unwrap();
        let a = init_decoder(&cfg, &mut Rng::new(3)).unwrap();
        assert_eq!(a, init_decoder(&cfg, &mut Rng::new(3)).unwrap());
        assert_ne!(a, init_decoder(&cfg, &mut Rng::new(4)).unwrap());
        a.check(&cfg).unwrap();
        assert_eq!(a.len(), cfg.param_count());
        // first layer: fan_in = 16·2·2, 1024 weights
        let w = a.layers[0].0.data();
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var * 64.0 - 1.0).abs() < 0.15, "{var}");
        assert!(a.layers.iter().all(|(_, b)| b.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let v = DecoderConfig::preset("desk-visual", 16).unwrap();
        let img = decode_visual(&latent(vec![0.7; 16]), &v, &DecoderParams::zeros(&v).unwrap()).unwrap();
        assert_eq!(img.shape(), [3, 8, 8]);
        assert!(img.data().iter().all(|&x| x == 0.0));
        let a = DecoderConfig::preset("desk-audio", 16).unwrap();
        let wav = decode_audio(&latent(vec![-0.3; 16]), &a, &DecoderParams::zeros(&a).unwrap()).unwrap();
        assert_eq!(wav, vec![0.0; 64]);
    }

    #[test]
    fn paper_visual_forward_is_32x32x3() {
        let cfg = DecoderConfig::preset("paper-visual", 300).unwrap();
        let p = init_decoder(&cfg, &mut Rng::new(1)).unwrap();
        let img = decode_visual(&latent(Rng::new(2).normals(300)), &cfg, &p).unwrap();
        assert_eq!(img.shape(), [3, 32, 32]);
        assert!(img.is_finite());
    }

    #[test]
    #[ignore = "allocates the 72M-parameter paper audio head"]
    fn paper_audio_forward_is_2205() {
        let cfg = DecoderConfig::preset("paper-audio", 300).unwrap();
        let p = DecoderParams::zeros(&cfg).unwrap();
        assert_eq!(decode_audio(&latent(vec![1.0; 300]), &cfg, &p).unwrap().len(), 2205);
    }

    #[test]
    fn latent_length_mismatch() {
        let cfg = DecoderConfig::preset("desk-visual", 16).unwrap();
        let p = DecoderParams::zeros(&cfg).unwrap();
        assert!(matches!(decode_visual(&latent(vec![0.0; 15]), &cfg, &p), Err(crate::Error::Dimension(_))));
        assert!(decode_audio(&latent(vec![0.0; 16]), &cfg, &p).is_err());
    }

    #[test]
    fn output_gradient_matches_finite_differences() {
        for name in ["desk-visual", "desk-audio"] {
            let cfg = DecoderConfig::preset(name, 6).unwrap();
            let params = init_decoder(&cfg, &mut Rng::new(5)).unwrap();
            let z = Tensor::matrix(2, 6, Rng::new(6).normals(12)).unwrap();
            let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
            let theta = Tensor::vector(params.flatten()).unwrap();
            let f = |g: &mut Graph, theta: Var| -> Result<Var> {
                let mut bound = Vec::new();
                let mut off = 0;
                let shapes = cfg.param_shapes();
                for (i, (ws, bs)) in shapes.iter().enumerate() {
                    let w = g.slice(theta, off, sizes[2 * i])?;
                    let w = g.reshape(w, ws.clone())?;
                    off += sizes[2 * i];
                    let b = g.slice(theta, off, sizes[2 * i + 1])?;
                    let b = g.reshape(b, bs.clone())?;
                    off += sizes[2 * i + 1];
                    bound.push((w, b));
                }
                let zc = g.constant(z.clone());
                let out = forward_graph(g, &cfg, &bound, zc)?;
                g.sum(out)
            };
            // up to 40 random coordinates from every weight and bias tensor
            let mut rng = Rng::new(7);
            let mut coords = Vec::new();
            let mut start = 0;
            for &n in &sizes {
                coords.extend((0..n.min(40)).map(|_| start + rng.below(n)));
                start += n;
            }
            let report = grad_check_coords(f, &theta, 1e-6, &coords).unwrap();
            assert!(report.checked > report.skipped_at_kinks, "{name}: {report:?}");
            assert!(report.max_rel_error < 1e-6, "{name}: {report:?}");
        }
    }
}
