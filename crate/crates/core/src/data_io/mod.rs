//! Paired image/audio data: PPM and WAV files, resizing, manifests, and a synthetic
//! generator.

mod ppm;
mod resample;
mod synth;
mod wav;

use std::fs;
use std::path::{Path, PathBuf};

pub use ppm::{decode_ppm, encode_ppm, load_ppm, write_ppm};
pub use resample::{downsample_audio, downsample_image};
pub use synth::{synth_dataset, synth_sample, synth_sample_rate, synth_split, FACTORS};
pub use wav::{load_wav, write_wav};

use crate::error::{bail, Result};
use crate::numerics::par;
use crate::tokenizer::{AudioClip, ImageTensor};

#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    pub id: String,
    pub image: ImageTensor,
    pub audio: AudioClip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => bail!(Format, "unknown split {other:?}; expected train or val"),
        }
    }
}

/// Shape-uniform samples split into training and held-out parts.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<PairedSample>,
    pub val: Vec<PairedSample>,
}

impl Dataset {
    pub fn new(train: Vec<PairedSample>, val: Vec<PairedSample>) -> Result<Self> {
        let mut all = train.iter().chain(&val);
        if let Some(first) = all.next() {
            let shape = (first.image.height(), first.image.width(), first.audio.len());
            if let Some(bad) = all.find(|s| (s.image.height(), s.image.width(), s.audio.len()) != shape) {
                bail!(
                    Dimension,
                    "sample {} does not match the dataset shape {}x{} / {}",
                    bad.id,
                    shape.0,
                    shape.1,
                    shape.2
                );
            }
        }
        Ok(Self { train, val })
    }

    pub fn split(&self, split: Split) -> &[PairedSample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
        }
    }

    /// `(height, width, audio length)` of the samples, if there are any.
    pub fn shape(&self) -> Option<(usize, usize, usize)> {
        self.train
            .iter()
            .chain(&self.val)
            .next()
            .map(|s| (s.image.height(), s.image.width(), s.audio.len()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub audio: PathBuf,
    pub split: Split,
}

/// `manifest.txt`: one `id image_path audio_path split` line per pair, whitespace
/// separated, paths relative to the manifest's directory. Blank lines and `#` comments
/// are ignored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.txt";

impl DatasetManifest {
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [id, image, audio, split] = fields[..] else {
                bail!(Format, "manifest line {}: expected 4 fields, got {}", n + 1, fields.len());
            };
            entries.push(ManifestEntry {
                id: id.to_string(),
                image: image.into(),
                audio: audio.into(),
                split: Split::parse(split)?,
            });
        }
        Ok(Self {
            root: root.into(),
            entries,
        })
    }

    /// Accepts the manifest file itself or the directory holding `manifest.txt`.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file)
            .map_err(|e| crate::Error::Usage(format!("cannot read manifest {}: {e}", file.display())))?;
        Self::parse(&text, file.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# id image audio split\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{} {} {} {}\n",
                e.id,
                e.image.display(),
                e.audio.display(),
                e.split.as_str()
            ));
        }
        s
    }

    /// Parses every listed file (in parallel) and checks the shapes are uniform.
    pub fn load(&self) -> Result<Dataset> {
        let loaded = par::map_indexed(self.entries.len(), |i| -> Result<(Split, PairedSample)> {
            let e = &self.entries[i];
            Ok((
                e.split,
                PairedSample {
                    id: e.id.clone(),
                    image: load_ppm(self.root.join(&e.image))?,
                    audio: load_wav(self.root.join(&e.audio))?,
                },
            ))
        });
        let (mut train, mut val) = (Vec::new(), Vec::new());
        for item in loaded {
            let (split, sample) = item?;
            match split {
                Split::Train => train.push(sample),
                Split::Val => val.push(sample),
            }
        }
        Dataset::new(train, val)
    }
}

pub fn load_dataset(manifest: impl AsRef<Path>) -> Result<Dataset> {
    DatasetManifest::read(manifest)?.load()
}

/// Writes `images/<id>.ppm`, `audio/<id>.wav` and `manifest.txt` under `dir`.
pub fn write_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("images"))?;
    fs::create_dir_all(dir.join("audio"))?;
    let mut entries = Vec::new();
    for (split, samples) in [(Split::Train, &dataset.train), (Split::Val, &dataset.val)] {
        for s in samples {
            let image = PathBuf::from("images").join(format!("{}.ppm", s.id));
            let audio = PathBuf::from("audio").join(format!("{}.wav", s.id));
            write_ppm(&s.image, dir.join(&image))?;
            write_wav(&s.audio, dir.join(&audio))?;
            entries.push(ManifestEntry {
                id: s.id.clone(),
                image,
                audio,
                split,
            });
        }
    }
    let manifest = DatasetManifest {
        root: dir.to_path_buf(),
        entries,
    };
    fs::write(dir.join(MANIFEST_FILE), manifest.to_text())?;
    Ok(manifest)
}

/// Brings a sample to the model's shapes: area-average the image down, and decimate
/// audio by an exact integer factor.
pub fn conform(sample: &PairedSample, height: usize, width: usize, audio_len: usize) -> Result<PairedSample> {
    Ok(PairedSample {
        id: sample.id.clone(),
        image: conform_image(&sample.image, height, width)?,
        audio: conform_audio(&sample.audio, audio_len)?,
    })
}

pub fn conform_image(img: &ImageTensor, height: usize, width: usize) -> Result<ImageTensor> {
    downsample_image(img, height, width)
}

pub fn conform_audio(clip: &AudioClip, audio_len: usize) -> Result<AudioClip> {
    let len = clip.len();
    if len < audio_len || len % audio_len != 0 {
        bail!(
            Usage,
            "audio of {len} samples cannot be decimated to {audio_len}: need an integer multiple"
        );
    }
    downsample_audio(clip, len / audio_len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_grammar() {
        let m = DatasetManifest::parse("# header\n a i/a.ppm w/a.wav train\n\nb i/b.ppm w/b.wav val # note\n", "/d").unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[1].split, Split::Val);
        assert_eq!(DatasetManifest::parse(&m.to_text(), "/d").unwrap(), m);
        assert!(DatasetManifest::parse("a b c\n", "/d").is_err());
        assert!(DatasetManifest::parse("a b c test\n", "/d").is_err());
    }

    #[test]
    fn dataset_roundtrip_through_files() {
        let d = synth_split(4, 2, 6, 5, 20, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&d, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.train.len(), 4);
        assert_eq!(back.val.len(), 2);
        assert_eq!(back.val[1].id, d.val[1].id);
        // 8-bit and 16-bit quantization bounds
        for (a, b) in d.train.iter().zip(&back.train) {
            assert!(a.image.data().iter().zip(b.image.data()).all(|(x, y)| (x - y).abs() <= 0.5 / 255.0 + 1e-12));
            assert!(a.audio.samples().iter().zip(b.audio.samples()).all(|(x, y)| (x - y).abs() <= 0.5 / 32768.0 + 1e-12));
        }
    }

    #[test]
    fn missing_files_and_mixed_shapes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), "a nope.ppm nope.wav train\n").unwrap();
        assert!(load_dataset(dir.path()).is_err());
        let a = synth_dataset(1, 4, 4, 8, 1).unwrap();
        let b = synth_dataset(1, 5, 4, 8, 1).unwrap();
        assert!(Dataset::new(a, b).is_err());
    }

    #[test]
    fn conform_shapes() {
        let s = synth_sample(0, 16, 16, 128, 1).unwrap();
        let c = conform(&s, 8, 8, 64).unwrap();
        assert_eq!((c.image.height(), c.audio.len()), (8, 64));
        assert!(conform(&s, 8, 8, 100).is_err());
        assert!(conform(&s, 32, 32, 64).is_err());
    }
}
