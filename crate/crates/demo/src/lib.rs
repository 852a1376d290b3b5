//! Browser bindings: exact PID of a small joint distribution, stripe tokenization and
//! frozen-bank encoding of a synthetic image, and the Gaussian MI estimate.
//!
//! Each operation has a plain Rust form returning JSON text, wrapped for JavaScript below.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use pcvae::data_io::synth_sample;
use pcvae::encoder::build_bank;
use pcvae::infotheory::{gaussian_mi, pid_decompose, sample_covariance, JointDistribution};
use pcvae::numerics::Rng;
use pcvae::tokenizer::{image_to_stripes, reassemble_image, Modality};

const SIDE: usize = 32;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Text form of a built-in joint: `xor`, `copy` or `indep`.
pub fn preset_text(name: &str) -> Result<String, String> {
    let joint = match name {
        "xor" => JointDistribution::xor(),
        "copy" => JointDistribution::copy(),
        "indep" => JointDistribution::independent(),
        other => return Err(format!("unknown case {other:?}; expected xor, copy or indep")),
    };
    Ok(joint.to_text())
}

/// Decomposition of a joint given in the `cards n1 n2 n3` / `x1 x2 y p` text form.
pub fn pid_report(text: &str) -> Result<Value, String> {
    let joint = JointDistribution::parse(text).map_err(err)?;
    let r = pid_decompose(&joint).map_err(err)?;
    Ok(json!({
        "cards": joint.cards(),
        "total": r.total,
        "unique1": r.unique1,
        "unique2": r.unique2,
        "redundancy": r.redundancy,
        "synergy": r.synergy,
        "interaction": r.interaction,
        "interaction_sr": r.interaction_sr,
    }))
}

/// A synthetic 32×32 image cut into `stripes` tokens, each compressed by its own frozen
/// Gaussian matrix to `code_len` values.
pub fn stripe_report(seed: u64, stripes: usize, code_len: usize) -> Result<Value, String> {
    let img = synth_sample(0, SIDE, SIDE, 64, seed).map_err(err)?.image;
    let bundle = image_to_stripes(&img, stripes).map_err(err)?;
    let back = reassemble_image(&bundle, SIDE, SIDE).map_err(err)?;
    let bank = build_bank(Modality::Visual, bundle.token_len(), code_len, stripes, seed).map_err(err)?;
    let mu = bank.compress(&bundle).map_err(err)?;
    let rgba: Vec<u8> = (0..SIDE * SIDE)
        .flat_map(|i| {
            let (h, w) = (i / SIDE, i % SIDE);
            let px = |c| (img.pixel(h, w, c) * 255.0).round() as u8;
            [px(0), px(1), px(2), 255]
        })
        .collect();
    let block = SIDE / (stripes / 3);
    Ok(json!({
        "side": SIDE,
        "rgba": rgba,
        "block": block,
        "token_len": bundle.token_len(),
        "tokens": bundle.tokens(),
        "mu": mu,
        "roundtrip_exact": back == img,
    }))
}

/// Gaussian MI estimate from `n` draws of a correlated pair against `−½ ln(1 − ρ²)`.
pub fn gaussian_report(rho: f64, n: usize, seed: u64) -> Result<Value, String> {
    if !(rho.abs() < 1.0) {
        return Err(format!("correlation must lie strictly between -1 and 1, got {rho}"));
    }
    let mut rng = Rng::new(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let (a, b) = (rng.normal(), rng.normal());
            vec![a, rho * a + (1.0 - rho * rho).sqrt() * b]
        })
        .collect();
    let cov = sample_covariance(&rows).map_err(err)?;
    let estimate = gaussian_mi(&cov, &[0], &[1]).map_err(err)?;
    let points: Vec<[f64; 2]> = rows.iter().take(500).map(|r| [r[0], r[1]]).collect();
    Ok(json!({
        "estimate": estimate,
        "exact": -0.5 * (1.0 - rho * rho).ln(),
        "points": points,
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn preset(name: &str) -> Result<String, JsError> {
    preset_text(name).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn pid(text: &str) -> Result<String, JsError> {
    to_js(pid_report(text))
}

#[wasm_bindgen]
pub fn stripes(seed: u32, stripes: usize, code_len: usize) -> Result<String, JsError> {
    to_js(stripe_report(u64::from(seed), stripes, code_len))
}

#[wasm_bindgen]
pub fn gaussian(rho: f64, n: usize, seed: u32) -> Result<String, JsError> {
    to_js(gaussian_report(rho, n, u64::from(seed)))
}
