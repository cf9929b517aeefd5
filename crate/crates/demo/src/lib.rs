//! wasm-bindgen surface for the static page in `www/`.

use gaitspace::oracle::{contact_schedule, swing_profile, GaitKind, GaitParams};
use gaitspace::terrain::design_filter;
use wasm_bindgen::prelude::*;

fn gait(name: &str) -> Result<GaitParams, JsError> {
    let kind: GaitKind = name.parse().map_err(|e: gaitspace::oracle::OracleError| JsError::new(&e.to_string()))?;
    Ok(GaitParams::preset(kind))
}

/// Stance flags over `strides` strides, `samples` per stride, leg-major
/// (`[LF.., RF.., LH.., RH..]`), 1 = stance.
#[wasm_bindgen]
pub fn gait_schedule(name: &str, strides: u32, samples: u32) -> Result<Vec<u8>, JsError> {
    let g = gait(name)?;
    let n = (strides * samples) as usize;
    let mut out = vec![0u8; 4 * n];
    for t in 0..n {
        let c = contact_schedule(&g, t as f64 / samples as f64);
        for leg in 0..4 {
            out[leg * n + t] = u8::from(c[leg]);
        }
    }
    Ok(out)
}

/// Duty factor and stride period (s) of a preset gait.
#[wasm_bindgen]
pub fn gait_timing(name: &str) -> Result<Vec<f64>, JsError> {
    let g = gait(name)?;
    Ok(vec![g.duty, g.stride_period])
}

/// Swing foot path as interleaved `(forward, height)` pairs.
#[wasm_bindgen]
pub fn swing_path(height: f64, length: f64, samples: u32) -> Vec<f64> {
    let n = samples.max(2);
    (0..n)
        .flat_map(|i| {
            let (x, z) = swing_profile(i as f64 / (n - 1) as f64, height, length);
            [x, z]
        })
        .collect()
}

/// Unit step response of the terrain filter.
#[wasm_bindgen]
pub fn filter_step(rise_time: f64, zeta: f64, rate_hz: f64, seconds: f64) -> Result<Vec<f64>, JsError> {
    let mut f = design_filter(rise_time, zeta, 1.0 / rate_hz).map_err(|e| JsError::new(&e.to_string()))?;
    let n = (seconds * rate_hz).round() as usize;
    (0..n).map(|_| f.step(1.0).map_err(|e| JsError::new(&e.to_string()))).collect()
}
