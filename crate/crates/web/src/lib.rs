//! Browser bindings. Every export returns a JSON string for the page to parse.

use serde_json::json;
use wasm_bindgen::prelude::*;

use l1stab::certify;
use l1stab::geometry;
use l1stab::harness::{self, EnsembleSpec};

fn js_err(e: l1stab::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Vertices of a 2-D polygon `{z : aᵢᵀz ≤ 1}` whose normals are sorted by angle.
fn polygon_vertices(normals: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let mut sorted: Vec<&Vec<f64>> = normals.iter().collect();
    sorted.sort_by(|a, b| a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])));
    (0..sorted.len())
        .map(|i| {
            let a = sorted[i];
            let b = sorted[(i + 1) % sorted.len()];
            let det = a[0] * b[1] - a[1] * b[0];
            [(b[1] - a[1]) / det, (a[0] - b[0]) / det]
        })
        .collect()
}

/// Planar polytope with `k` equally spaced normals and its Hausdorff distance to the disc.
#[wasm_bindgen]
pub fn polygon(k: usize, seed: u64) -> Result<String, JsValue> {
    let p = geometry::dudley_polytope(2, k, seed).map_err(js_err)?;
    let h = geometry::hausdorff_to_ball(&p).map_err(js_err)?;
    let formula = 1.0 / (std::f64::consts::PI / k as f64).cos() - 1.0;
    Ok(json!({
        "normals": p.normals,
        "vertices": polygon_vertices(&p.normals),
        "hausdorff": h.value,
        "formula": formula,
    })
    .to_string())
}

/// Draws a Gaussian matrix and checks weak RSP, RSP and NSP of order `k`.
#[wasm_bindgen]
pub fn certify_random(m: usize, n: usize, k: usize, seed: u64) -> Result<String, JsValue> {
    let spec = EnsembleSpec::gaussian(m, n, k, 1, seed);
    spec.validate().map_err(js_err)?;
    let a = harness::gen_one(&spec, 0).map_err(js_err)?;
    let weak = certify::certify_weak_rsp(&a, k).map_err(js_err)?;
    let rsp = certify::certify_rsp(&a, k).map_err(js_err)?;
    let nsp = certify::certify_nsp(&a, k).map_err(js_err)?;
    let rows: Vec<Vec<f64>> = a.a().row_iter().map(|r| r.iter().copied().collect()).collect();
    let violated = match &weak {
        certify::WeakRsp::Violated(pair) => Some(json!({ "s1": pair.s1, "s2": pair.s2 })),
        certify::WeakRsp::Holds => None,
    };
    Ok(json!({
        "matrix": rows,
        "weak_rsp": weak.holds(),
        "rsp": rsp.holds(),
        "nsp": nsp.holds(),
        "rho": nsp.rho().value(),
        "violated_pair": violated,
    })
    .to_string())
}

/// Weak-RSP frequency for `m = 1..n−1`.
#[wasm_bindgen]
pub fn phase(n: usize, k: usize, per_point: usize, seed: u64) -> Result<String, JsValue> {
    let ms: Vec<usize> = (1..n).collect();
    let curve = harness::phase_experiment(n, k, &ms, per_point, seed).map_err(js_err)?;
    serde_json::to_string(&curve).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_vertices() {
        let normals = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]];
        let v = polygon_vertices(&normals);
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|p| (p[0].abs() - 1.0).abs() < 1e-12 && (p[1].abs() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn exports_return_json() {
        let p: serde_json::Value = serde_json::from_str(&polygon(8, 0).unwrap()).unwrap();
        assert!((p["hausdorff"].as_f64().unwrap() - p["formula"].as_f64().unwrap()).abs() < 1e-12);
        let c: serde_json::Value = serde_json::from_str(&certify_random(3, 6, 1, 2).unwrap()).unwrap();
        assert_eq!(c["matrix"].as_array().unwrap().len(), 3);
        let ph: serde_json::Value = serde_json::from_str(&phase(5, 1, 4, 1).unwrap()).unwrap();
        assert_eq!(ph["points"].as_array().unwrap().len(), 4);
    }
}
