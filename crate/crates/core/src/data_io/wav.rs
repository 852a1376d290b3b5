use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{bail, Result};
use crate::tokenizer::AudioClip;

fn format_err(e: hound::Error) -> crate::Error {
    match e {
        hound::Error::IoError(io) => crate::Error::Io(io),
        other => crate::Error::Format(format!("wav: {other}")),
    }
}

/// 16-bit PCM, mono or stereo; stereo keeps channel 0. Samples map to `s / 32768`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let mut reader = WavReader::open(path).map_err(format_err)?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        bail!(
            Format,
            "only 16-bit PCM is supported, got {} bits {:?}",
            spec.bits_per_sample,
            spec.sample_format
        );
    }
    if !(1..=2).contains(&spec.channels) {
        bail!(Format, "only mono or stereo is supported, got {} channels", spec.channels);
    }
    let channels = usize::from(spec.channels);
    let mut samples = Vec::with_capacity(reader.len() as usize / channels);
    for (i, s) in reader.samples::<i16>().enumerate() {
        let s = s.map_err(format_err)?;
        if i % channels == 0 {
            samples.push(f64::from(s) / 32768.0);
        }
    }
    AudioClip::new(samples, spec.sample_rate)
}

/// Mono 16-bit PCM, each sample `round(x · 32768)` clamped to the `i16` range.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec).map_err(format_err)?;
    for &x in clip.samples() {
        w.write_sample((x * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
            .map_err(format_err)?;
    }
    w.finalize().map_err(format_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn write_raw(path: &Path, channels: u16, bits: u16, format: SampleFormat, frames: &[i32]) {
        let spec = WavSpec {
            channels,
            sample_rate: 8000,
            bits_per_sample: bits,
            sample_format: format,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for &f in frames {
            match format {
                SampleFormat::Int => w.write_sample(f).unwrap(),
                SampleFormat::Float => w.write_sample(f as f32).unwrap(),
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn mono_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.wav");
        write_raw(&p, 1, 16, SampleFormat::Int, &[0; 10]);
        let clip = load_wav(&p).unwrap();
        assert_eq!(clip.samples(), [0.0; 10]);
        assert_eq!(clip.sample_rate(), 8000);
    }

    #[test]
    fn stereo_keeps_the_first_channel() {
        let dir = tempfile::tempdir().unwrap();
        let (mono, stereo) = (dir.path().join("m.wav"), dir.path().join("s.wav"));
        let frames = [100, -200, 32767, -32768, 7];
        write_raw(&mono, 1, 16, SampleFormat::Int, &frames);
        let doubled: Vec<i32> = frames.iter().flat_map(|&f| [f, f]).collect();
        write_raw(&stereo, 2, 16, SampleFormat::Int, &doubled);
        assert_eq!(load_wav(&stereo).unwrap(), load_wav(&mono).unwrap());
        assert_eq!(load_wav(&mono).unwrap().samples()[3], -1.0);
    }

    #[test]
    fn unsupported_encodings() {
        let dir = tempfile::tempdir().unwrap();
        let p24 = dir.path().join("a.wav");
        write_raw(&p24, 1, 24, SampleFormat::Int, &[1, 2, 3]);
        assert!(matches!(load_wav(&p24), Err(crate::Error::Format(_))));
        let pf = dir.path().join("b.wav");
        write_raw(&pf, 1, 32, SampleFormat::Float, &[0, 1]);
        assert!(matches!(load_wav(&pf), Err(crate::Error::Format(_))));
        let junk = dir.path().join("c.wav");
        std::fs::write(&junk, b"RIFX nonsense").unwrap();
        assert!(matches!(load_wav(&junk), Err(crate::Error::Format(_))));
    }

    #[test]
    fn sixteen_bit_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.wav");
        let mut rng = Rng::new(4);
        let samples: Vec<f64> = (0..500).map(|_| (rng.below(65536) as f64 - 32768.0) / 32768.0).collect();
        let clip = AudioClip::new(samples, 4410).unwrap();
        write_wav(&clip, &p).unwrap();
        assert_eq!(load_wav(&p).unwrap(), clip);
    }

    #[test]
    fn full_scale_positive_clamps() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.wav");
        write_wav(&AudioClip::new(vec![1.0, -1.0], 100).unwrap(), &p).unwrap();
        assert_eq!(load_wav(&p).unwrap().samples(), [32767.0 / 32768.0, -1.0]);
    }
}
