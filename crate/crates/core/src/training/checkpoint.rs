//! Checkpoint container.
//!
//! ```text
//! magic   8 bytes  "PCVAECKP"
//! version u32      1
//! count   u32      number of sections
//! table   count × { name_len u16, name bytes (UTF-8), kind u8, offset u64, len u64 }
//! payloads
//! ```
//!
//! Offsets are absolute. Kind 0 is UTF-8 text, kind 1 a tensor:
//! `ndim u32, dims ndim × u64, data f64 × product(dims)`. Every integer and float is
//! little-endian.

use std::collections::BTreeMap;
use std::path::Path;

use super::adam::Adam;
use super::config::{LossConfig, ModelSpec, TrainConfig};
use super::history::TrainHistory;
use super::model::{ii_dims, DecoderSlot, ModelState};
use crate::decoder::{DecoderConfig, DecoderParams};
use crate::encoder::{EncoderBank, EncoderBanks};
use crate::error::{bail, Result};
use crate::infotheory::IiProjections;
use crate::kvtext::KvText;
use crate::numerics::Tensor;
use crate::tokenizer::Modality;

pub const MAGIC: &[u8; 8] = b"PCVAECKP";
pub const VERSION: u32 = 1;

const KIND_TEXT: u8 = 0;
const KIND_TENSOR: u8 = 1;

enum Payload {
    Text(String),
    Tensor(Tensor),
}

fn tensor_bytes(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 8 * t.shape().len() + 8 * t.len());
    out.extend((t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend((d as u64).to_le_bytes());
    }
    out.extend(t.to_le_bytes());
    out
}

fn encode(sections: &[(String, Payload)]) -> Vec<u8> {
    let bodies: Vec<(u8, Vec<u8>)> = sections
        .iter()
        .map(|(_, p)| match p {
            Payload::Text(s) => (KIND_TEXT, s.as_bytes().to_vec()),
            Payload::Tensor(t) => (KIND_TENSOR, tensor_bytes(t)),
        })
        .collect();
    let table_len: usize = sections.iter().map(|(n, _)| 2 + n.len() + 1 + 8 + 8).sum();
    let mut offset = (8 + 4 + 4 + table_len) as u64;
    let mut out = Vec::new();
    out.extend(MAGIC);
    out.extend(VERSION.to_le_bytes());
    out.extend((sections.len() as u32).to_le_bytes());
    for ((name, _), (kind, body)) in sections.iter().zip(&bodies) {
        out.extend((name.len() as u16).to_le_bytes());
        out.extend(name.as_bytes());
        out.push(*kind);
        out.extend(offset.to_le_bytes());
        out.extend((body.len() as u64).to_le_bytes());
        offset += body.len() as u64;
    }
    for (_, body) in bodies {
        out.extend(body);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        match self.pos.checked_add(n).filter(|&end| end <= self.bytes.len()) {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => bail!(Checkpoint, "truncated: wanted {n} bytes at offset {}", self.pos),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn decode_tensor(body: &[u8], name: &str) -> Result<Tensor> {
    let mut r = Reader { bytes: body, pos: 0 };
    let ndim = r.u32()? as usize;
    if ndim > 8 {
        bail!(Checkpoint, "section {name}: implausible rank {ndim}");
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(usize::try_from(r.u64()?).map_err(|_| crate::Error::Checkpoint(format!("section {name}: huge dim")))?);
    }
    let count = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
    let Some(count) = count.filter(|c| c.checked_mul(8) == Some(body.len() - r.pos)) else {
        bail!(Checkpoint, "section {name}: dims {dims:?} do not match {} payload bytes", body.len() - r.pos);
    };
    let data = r.take(count * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Tensor::new(dims, data).map_err(|e| crate::Error::Checkpoint(format!("section {name}: {e}")))
}

fn decode(bytes: &[u8]) -> Result<BTreeMap<String, Payload>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8).ok() != Some(MAGIC.as_slice()) {
        bail!(Checkpoint, "not a checkpoint (bad magic)");
    }
    let version = r.u32()?;
    if version != VERSION {
        bail!(Checkpoint, "unsupported version {version}, expected {VERSION}");
    }
    let count = r.u32()?;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let Ok(name) = String::from_utf8(r.take(len)?.to_vec()) else {
            bail!(Checkpoint, "section name is not UTF-8");
        };
        let kind = r.u8()?;
        let (offset, size) = (r.u64()?, r.u64()?);
        let body = usize::try_from(offset)
            .ok()
            .zip(usize::try_from(size).ok())
            .and_then(|(o, s)| bytes.get(o..o.checked_add(s)?));
        let Some(body) = body else {
            bail!(Checkpoint, "section {name} runs past the end of the file (truncated)");
        };
        let payload = match kind {
            KIND_TEXT => match std::str::from_utf8(body) {
                Ok(s) => Payload::Text(s.to_string()),
                Err(_) => bail!(Checkpoint, "section {name} is not UTF-8"),
            },
            KIND_TENSOR => Payload::Tensor(decode_tensor(body, &name)?),
            other => bail!(Checkpoint, "section {name} has unknown kind {other}"),
        };
        if out.insert(name.clone(), payload).is_some() {
            bail!(Checkpoint, "duplicate section {name}");
        }
    }
    Ok(out)
}

fn state_kv(state: &ModelState) -> KvText {
    let mut kv = KvText::new();
    kv.set("epochs_done", state.epochs_done);
    kv.set("adam_t", state.optimizer.t);
    kv.set("adam_learning_rate", state.optimizer.learning_rate);
    for bank in [&state.banks.visual, &state.banks.audio].into_iter().flatten() {
        kv.set(&format!("bank_{}_seed", bank.modality()), bank.seed());
    }
    kv
}

/// Serializes every part of the state that a resumed run or generation needs.
pub fn checkpoint_bytes(state: &ModelState) -> Vec<u8> {
    let mut s: Vec<(String, Payload)> = vec![
        ("spec".into(), Payload::Text(state.spec.to_kv().to_text())),
        ("loss".into(), Payload::Text(state.loss.to_kv().to_text())),
        ("train".into(), Payload::Text(state.train.to_kv().to_text())),
        ("state".into(), Payload::Text(state_kv(state).to_text())),
        ("history".into(), Payload::Text(state.history.to_csv())),
    ];
    for bank in [&state.banks.visual, &state.banks.audio].into_iter().flatten() {
        for (i, m) in bank.matrices().iter().enumerate() {
            s.push((format!("bank.{}.{i}", bank.modality()), Payload::Tensor(m.clone())));
        }
    }
    for d in &state.decoders {
        let m = d.modality;
        s.push((format!("decoder.{m}"), Payload::Text(d.config.to_text())));
        for (i, t) in d.params.tensors().into_iter().enumerate() {
            s.push((format!("param.{m}.{i}"), Payload::Tensor(t.clone())));
        }
        for (role, t) in [("x1", d.projections.x1()), ("x2", d.projections.x2()), ("y", d.projections.y())] {
            s.push((format!("proj.{m}.{role}"), Payload::Tensor(t.clone())));
        }
    }
    for (i, (m, v)) in state.optimizer.m.iter().zip(&state.optimizer.v).enumerate() {
        s.push((format!("adam.m.{i}"), Payload::Tensor(Tensor::vector(m.clone()).expect("finite moments"))));
        s.push((format!("adam.v.{i}"), Payload::Tensor(Tensor::vector(v.clone()).expect("finite moments"))));
    }
    s.push(("baseline.image".into(), Payload::Tensor(Tensor::vector(state.baseline_image.clone()).expect("finite"))));
    s.push(("baseline.audio".into(), Payload::Tensor(Tensor::vector(state.baseline_audio.clone()).expect("finite"))));
    encode(&s)
}

struct Sections(BTreeMap<String, Payload>);

impl Sections {
    fn text(&self, name: &str) -> Result<&str> {
        match self.0.get(name) {
            Some(Payload::Text(s)) => Ok(s),
            Some(Payload::Tensor(_)) => bail!(Checkpoint, "section {name} should be text"),
            None => bail!(Checkpoint, "missing section {name}"),
        }
    }

    fn tensor(&self, name: &str) -> Result<Tensor> {
        match self.0.get(name) {
            Some(Payload::Tensor(t)) => Ok(t.clone()),
            Some(Payload::Text(_)) => bail!(Checkpoint, "section {name} should be a tensor"),
            None => bail!(Checkpoint, "missing section {name}"),
        }
    }

    fn kv(&self, name: &str) -> Result<KvText> {
        KvText::parse(self.text(name)?)
    }

    fn has(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }
}

fn as_checkpoint_error(e: crate::Error) -> crate::Error {
    match e {
        crate::Error::Checkpoint(_) => e,
        other => crate::Error::Checkpoint(other.to_string()),
    }
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<ModelState> {
    let s = Sections(decode(bytes)?);
    rebuild(&s).map_err(as_checkpoint_error)
}

fn rebuild(s: &Sections) -> Result<ModelState> {
    let decoder_cfg = |m: Modality| -> Result<Option<DecoderConfig>> {
        let name = format!("decoder.{m}");
        if s.has(&name) {
            Ok(Some(DecoderConfig::from_text(s.text(&name)?)?))
        } else {
            Ok(None)
        }
    };
    let spec = ModelSpec::from_kv(&s.kv("spec")?, decoder_cfg(Modality::Visual)?, decoder_cfg(Modality::Audio)?)?;
    let loss = LossConfig::from_kv(&s.kv("loss")?)?;
    let train = TrainConfig::from_kv(&s.kv("train")?)?;
    let st = s.kv("state")?;

    let mut banks = EncoderBanks::default();
    for (m, count) in [(Modality::Visual, spec.stripes), (Modality::Audio, spec.segments)] {
        if !spec.mode.uses_input(m) {
            continue;
        }
        let matrices = (0..count).map(|i| s.tensor(&format!("bank.{m}.{i}"))).collect::<Result<Vec<_>>>()?;
        let bank = EncoderBank::from_matrices(m, matrices, st.parse_req(&format!("bank_{m}_seed"))?)?;
        let (code, token) = match m {
            Modality::Visual => (spec.visual_code, spec.stripe_len()),
            Modality::Audio => (spec.audio_code, spec.segment_len()),
        };
        if (bank.out_dim(), bank.in_dim()) != (code, token) {
            bail!(Checkpoint, "{m} bank is {}x{}, spec wants {code}x{token}", bank.out_dim(), bank.in_dim());
        }
        match m {
            Modality::Visual => banks.visual = Some(bank),
            Modality::Audio => banks.audio = Some(bank),
        }
    }

    let mut decoders = Vec::new();
    for m in [Modality::Visual, Modality::Audio] {
        let Some(config) = spec.decoder(m).cloned() else {
            continue;
        };
        let shapes = config.param_shapes();
        let mut layers = Vec::new();
        for i in 0..shapes.len() {
            layers.push((s.tensor(&format!("param.{m}.{}", 2 * i))?, s.tensor(&format!("param.{m}.{}", 2 * i + 1))?));
        }
        let params = DecoderParams { layers };
        params.check(&config)?;
        let projections = IiProjections::from_matrices(
            s.tensor(&format!("proj.{m}.x1"))?,
            s.tensor(&format!("proj.{m}.x2"))?,
            s.tensor(&format!("proj.{m}.y"))?,
        )?;
        if projections.input_dims() != ii_dims(&spec, m) || projections.dim() != loss.projection_dim {
            bail!(Checkpoint, "{m} projections do not fit the model");
        }
        decoders.push(DecoderSlot { modality: m, config, params, projections });
    }

    let sizes: Vec<usize> = decoders.iter().flat_map(|d| d.params.tensors().into_iter().map(Tensor::len)).collect();
    let mut optimizer = Adam::new(st.parse_req("adam_learning_rate")?, &sizes);
    optimizer.t = st.parse_req("adam_t")?;
    for (i, &n) in sizes.iter().enumerate() {
        let (m, v) = (s.tensor(&format!("adam.m.{i}"))?, s.tensor(&format!("adam.v.{i}"))?);
        if m.len() != n || v.len() != n {
            bail!(Checkpoint, "optimizer moment {i} has the wrong length");
        }
        optimizer.m[i] = m.into_data();
        optimizer.v[i] = v.into_data();
    }
    let baseline_image = s.tensor("baseline.image")?.into_data();
    let baseline_audio = s.tensor("baseline.audio")?.into_data();
    if baseline_image.len() != spec.image_len() || baseline_audio.len() != spec.audio_len {
        bail!(Checkpoint, "baselines do not fit the model shapes");
    }
    let history = TrainHistory::from_csv(s.text("history")?)?;
    let epochs_done = st.parse_req("epochs_done")?;
    if history.len() != epochs_done {
        bail!(Checkpoint, "history has {} rows for {epochs_done} epochs", history.len());
    }
    Ok(ModelState {
        spec,
        loss,
        train,
        banks,
        decoders,
        optimizer,
        baseline_image,
        baseline_audio,
        epochs_done,
        history,
    })
}

pub fn save_checkpoint(state: &ModelState, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(state))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelState> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| crate::Error::Checkpoint(format!("{}: {e}", path.display())))?;
    checkpoint_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::synth_dataset;
    use crate::training::config::InputMode;
    use crate::training::trainer::{run_epochs, train};

    fn small(mode: InputMode) -> (ModelState, Vec<crate::data_io::PairedSample>) {
        let data = synth_dataset(40, 8, 8, 64, 4).unwrap();
        let spec = ModelSpec::preset("desk", mode, None, 3).unwrap();
        let cfg = TrainConfig { epochs: 1, batch_size: 27, ..TrainConfig::default() };
        (train(&data, spec, cfg, LossConfig::default()).unwrap().0, data)
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        for mode in [InputMode::Joint, InputMode::AudioOnly, InputMode::VisualOnly] {
            let (state, _) = small(mode);
            let bytes = checkpoint_bytes(&state);
            assert_eq!(&bytes[..8], MAGIC);
            let back = checkpoint_from_bytes(&bytes).unwrap();
            assert_eq!(back, state);
            assert_eq!(checkpoint_bytes(&back), bytes);
        }
    }

    #[test]
    fn corruption_is_a_checkpoint_error() {
        let (state, _) = small(InputMode::Joint);
        let bytes = checkpoint_bytes(&state);
        for cut in [0, 5, 12, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(checkpoint_from_bytes(&bytes[..cut]), Err(crate::Error::Checkpoint(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(checkpoint_from_bytes(&bad), Err(crate::Error::Checkpoint(_))));
        let mut bad = bytes;
        bad[8] = 2;
        assert!(matches!(checkpoint_from_bytes(&bad), Err(crate::Error::Checkpoint(_))));
    }

    #[test]
    fn resume_matches_an_uninterrupted_run() {
        let (mut once, data) = small(InputMode::Joint);
        let mut resumed = checkpoint_from_bytes(&checkpoint_bytes(&once)).unwrap();
        run_epochs(&mut once, &data, 1, |_, _| Ok(())).unwrap();
        run_epochs(&mut resumed, &data, 1, |_, _| Ok(())).unwrap();
        assert_eq!(checkpoint_bytes(&resumed), checkpoint_bytes(&once));
    }

    #[test]
    fn files_roundtrip() {
        let (state, _) = small(InputMode::VisualOnly);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.bin");
        save_checkpoint(&state, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), state);
        assert!(matches!(load_checkpoint(dir.path().join("missing.bin")), Err(crate::Error::Checkpoint(_))));
    }
}
