use std::fs;
use std::path::Path;

use crate::error::{bail, Result};
use crate::tokenizer::{ImageTensor, CHANNELS};

/// Parses a binary (P6) PPM with maxval 255. Header comments are skipped.
pub fn decode_ppm(bytes: &[u8]) -> Result<ImageTensor> {
    if !bytes.starts_with(b"P6") {
        bail!(Format, "not a binary PPM (P6) file");
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            bail!(Format, "truncated or malformed PPM header");
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| crate::Error::Format("PPM header number out of range".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        bail!(Format, "PPM maxval {maxval} unsupported, need 255");
    }
    if width == 0 || height == 0 {
        bail!(Format, "PPM has a zero extent");
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        bail!(Format, "PPM header must end with one whitespace byte");
    }
    let body = &bytes[pos + 1..];
    let n = width * height * CHANNELS;
    if body.len() < n {
        bail!(Format, "PPM pixel data is short: {} of {n} bytes", body.len());
    }
    let plane = width * height;
    let mut data = vec![0.0; n];
    for (i, px) in body[..n].chunks_exact(CHANNELS).enumerate() {
        for (c, &b) in px.iter().enumerate() {
            data[c * plane + i] = f64::from(b) / 255.0;
        }
    }
    ImageTensor::new(height, width, data)
}

/// P6 bytes with each value rounded to the nearest of 256 levels.
pub fn encode_ppm(img: &ImageTensor) -> Vec<u8> {
    let (h, w) = (img.height(), img.width());
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    let plane = h * w;
    for i in 0..plane {
        for c in 0..CHANNELS {
            out.push((img.data()[c * plane + i] * 255.0).round() as u8);
        }
    }
    out
}

pub fn load_ppm(path: impl AsRef<Path>) -> Result<ImageTensor> {
    decode_ppm(&fs::read(path)?)
}

pub fn write_ppm(img: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_ppm(img))?;
    Ok(())
}
