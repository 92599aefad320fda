//! Browser bindings for three interactive views: the exceptional set of a
//! sampled weight sequence, its density curve, and one delayed renewal
//! coupling. Every entry point takes plain values and returns a JSON string.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use gapcomplete::gapdist::{make_distribution, DistributionSpec, GapDistribution};
use gapcomplete::renewal::meeting_sample;
use gapcomplete::seed::rng_from_seed;
use gapcomplete::sumset::{exceptional_set, representable_exact_distinct};
use gapcomplete::weights::generate_weights_seeded;

const MAX_HORIZON: u64 = 2_000_000;
const MAX_LISTED: usize = 200;

fn law(spec_json: &str) -> Result<GapDistribution, String> {
    let spec: DistributionSpec = serde_json::from_str(spec_json).map_err(|e| e.to_string())?;
    make_distribution(&spec).map_err(|e| e.to_string())
}

fn check_horizon(n: u64) -> Result<(), String> {
    if !(10..=MAX_HORIZON).contains(&n) {
        return Err(format!("horizon must lie in [10, {MAX_HORIZON}]"));
    }
    Ok(())
}

pub fn exceptions_json(spec_json: &str, horizon: u64, k: u32, seed: u64) -> Result<Value, String> {
    check_horizon(horizon)?;
    if !(1..=6).contains(&k) {
        return Err("k must lie in [1, 6]".into());
    }
    let dist = law(spec_json)?;
    let seq = generate_weights_seeded(&dist, horizon, seed);
    let table = representable_exact_distinct(seq.weights(), k, horizon).map_err(|e| e.to_string())?;
    let ex = exceptional_set(&table, 1, horizon).map_err(|e| e.to_string())?;
    Ok(json!({
        "label": dist.label(),
        "gcd": dist.support_gcd(),
        "weights": seq.len(),
        "exceptional": ex.values.len(),
        "last_exception": ex.last_exception,
        "largest": ex.values.iter().rev().take(MAX_LISTED).rev().collect::<Vec<_>>(),
    }))
}

pub fn density_json(spec_json: &str, horizon: u64, seed: u64, points: usize) -> Result<Value, String> {
    check_horizon(horizon)?;
    let dist = law(spec_json)?;
    let seq = generate_weights_seeded(&dist, horizon, seed);
    let ws = seq.weights();
    let points = points.clamp(2, 2000);
    // log-spaced sample points in [1, N]
    let ratio = (horizon as f64).powf(1.0 / (points - 1) as f64);
    let mut ms: Vec<u64> = (0..points).map(|i| ratio.powi(i as i32).round() as u64).collect();
    ms.push(horizon);
    ms.retain(|&m| (1..=horizon).contains(&m));
    ms.dedup();
    let curve: Vec<[f64; 2]> = ms
        .iter()
        .map(|&m| [m as f64, ws.partition_point(|&w| w <= m) as f64 / m as f64])
        .collect();
    let mut sigma = (u64::MAX, 1u64);
    let mut count = 0;
    for m in 1..=horizon {
        if ws.get(count).is_some_and(|&w| w == m) {
            count += 1;
        }
        if (count as u128) * (sigma.1 as u128) < (sigma.0 as u128) * (m as u128) {
            sigma = (count as u64, m);
        }
    }
    Ok(json!({
        "label": dist.label(),
        "target": dist.mean().finite().map(|m| 1.0 / m),
        "curve": curve,
        "sigma_window": [sigma.0, sigma.1],
    }))
}

pub fn meeting_json(spec_json: &str, b: u64, cap: u64, seed: u64) -> Result<Value, String> {
    let dist = law(spec_json)?;
    let cap = cap.clamp(1, 10_000_000);
    let mut rng = rng_from_seed(seed);
    let sample = meeting_sample(&dist, b, cap, &mut rng).map_err(|e| e.to_string())?;
    // replay D_i = W_i - U_i, keeping at most ~2000 points
    let steps = sample.meeting_index.unwrap_or(cap);
    let stride = (steps / 2000).max(1);
    let (mut xs, mut ys) = (rng_from_seed(sample.x_seed), rng_from_seed(sample.y_seed));
    let mut diff = 0i64;
    let mut walk = vec![[0.0, 0.0]];
    for i in 1..=steps {
        diff += dist.sample(&mut xs) as i64 - dist.sample(&mut ys) as i64;
        if i % stride == 0 || i == steps {
            walk.push([i as f64, diff as f64]);
        }
    }
    Ok(json!({
        "label": dist.label(),
        "b": b,
        "cap": cap,
        "meeting_index": sample.meeting_index,
        "meeting_value": sample.meeting_value.map(|v| v.to_string()),
        "first_common_range_value": sample.first_common_range_value.map(|v| v.to_string()),
        "walk": walk,
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

/// Exceptional set of the exact-`k`-distinct sums of one sampled sequence.
#[wasm_bindgen]
pub fn exceptions(spec_json: &str, horizon: u32, k: u32, seed: u32) -> Result<String, JsValue> {
    to_js(exceptions_json(spec_json, horizon.into(), k, seed.into()))
}

/// `A(m)/m` at log-spaced `m` plus the window Schnirelmann density.
#[wasm_bindgen]
pub fn density(spec_json: &str, horizon: u32, seed: u32, points: u32) -> Result<String, JsValue> {
    to_js(density_json(spec_json, horizon.into(), seed.into(), points as usize))
}

/// One coupling run with the difference walk it took.
#[wasm_bindgen]
pub fn meeting(spec_json: &str, b: u32, cap: u32, seed: u32) -> Result<String, JsValue> {
    to_js(meeting_json(spec_json, b.into(), cap.into(), seed.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GEO: &str = r#"{"kind":"geometric","p":0.6}"#;

    #[test]
    fn exceptions_view() {
        let v = exceptions_json(GEO, 5000, 2, 1).unwrap();
        assert!(v["weights"].as_u64().unwrap() > 2500);
        assert_eq!(v["gcd"], 1);
        let listed = v["largest"].as_array().unwrap();
        assert_eq!(listed.last().and_then(Value::as_u64), v["last_exception"].as_u64());
        assert!(exceptions_json(GEO, 5, 2, 1).is_err());
        assert!(exceptions_json(r#"{"kind":"nope"}"#, 100, 2, 1).is_err());
    }

    #[test]
    fn density_view() {
        let v = density_json(GEO, 100_000, 2, 50).unwrap();
        let curve = v["curve"].as_array().unwrap();
        let last = curve.last().unwrap()[1].as_f64().unwrap();
        assert!((last - 0.6).abs() < 0.02);
        assert_eq!(curve.last().unwrap()[0].as_f64(), Some(100_000.0));
    }

    #[test]
    fn meeting_view() {
        let v = meeting_json(r#"{"kind":"geometric","p":0.5}"#, 3, 100_000, 4).unwrap();
        let walk = v["walk"].as_array().unwrap();
        if let Some(k) = v["meeting_index"].as_u64() {
            let end = walk.last().unwrap();
            assert_eq!(end[0].as_f64(), Some(k as f64));
            assert_eq!(end[1].as_f64(), Some(3.0));
        }
        assert!(meeting_json(r#"{"kind":"finite-pmf","pmf":[[2,1.0]]}"#, 1, 10, 0).is_err());
    }
}
