//! Browser bindings. Each export returns a JSON string; the `*_json` functions
//! are the same operations for native callers.

use onecircuit::circuit_graph::{Eta, VertexId};
use onecircuit::comp_op::{build_from_target_h0, subnormality_evidence, DerivativeTable};
use onecircuit::exotic::{exotic_pipeline, PairSource, PipelineOptions};
use onecircuit::moments::MomentSequence;
use onecircuit::qspecial::{asc_beta_measure, asc_gamma_measure, quartic_pair};
use onecircuit::scalar::Precision;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn to_string(v: Value) -> String {
    serde_json::to_string(&v).expect("JSON values serialize")
}

/// Atoms of `beta`, `gamma` (Al-Salam–Carlitz with a, q), `zeta` or `rho` (quartic pair).
pub fn measure_json(kind: &str, a: f64, q: f64, atoms: usize) -> Result<String, String> {
    let m = match kind {
        "beta" => asc_beta_measure(a, q, atoms),
        "gamma" => asc_gamma_measure(a, q, atoms),
        "zeta" | "rho" => quartic_pair(atoms).map(|(z, r)| if kind == "zeta" { z } else { r }),
        other => return Err(format!("unknown measure {other}")),
    }
    .map_err(|e| e.to_string())?;
    let mut moments = Vec::new();
    for n in 0..=6 {
        moments.push(m.moment(n).map_err(|e| e.to_string())?.0);
    }
    Ok(to_string(json!({
        "measure": m,
        "total_mass": m.total_mass(),
        "moments": moments,
    })))
}

/// h-table of the model with h_n(x_0) = (sⁿ + s⁻ⁿ)/2, plus its shift-dominance test.
pub fn two_point_table_json(s: f64, max_n: u32) -> Result<String, String> {
    if !(s > 0.0 && s < 1.0) {
        return Err("s must lie in (0, 1)".into());
    }
    let gamma: Vec<f64> = (0..=max_n + 4).map(|n| 0.5 * (s.powi(n as i32) + s.powi(-(n as i32)))).collect();
    let model = build_from_target_h0(&MomentSequence::exact(gamma), 0, 1.0).map_err(|e| e.to_string())?;
    let table = DerivativeTable::compute(&model, max_n);
    let ev = subnormality_evidence(&model, max_n.min(16), 1e-9, Precision::High);
    let x0: Vec<Option<f64>> = table.rows.iter().map(|r| r[0].value).collect();
    let branch = table.vertices.iter().position(|v| *v == VertexId::Branch(1, 1));
    let x11: Vec<Option<f64>> = match branch {
        Some(k) => table.rows.iter().map(|r| r[k].value).collect(),
        None => Vec::new(),
    };
    Ok(to_string(json!({
        "csv": table.to_csv(),
        "h_x0": x0,
        "h_x11": x11,
        "shift_dominance": ev.shift_dominance,
    })))
}

/// Summary of the non-hyponormal construction on G_{η,0} from the quartic pair.
pub fn exotic_json(eta: u32, atoms: usize) -> Result<String, String> {
    let eta = if eta == 0 { Eta::Infinite } else { Eta::Finite(eta) };
    let opts = PipelineOptions { atoms, ..PipelineOptions::default() };
    let (_, rep) = exotic_pipeline(eta, PairSource::Quartic, &opts).map_err(|e| e.to_string())?;
    let hankel: Vec<Value> = rep
        .hankel_evidence
        .iter()
        .map(|h| {
            json!({
                "vertex": h.vertex,
                "verdict": h.report.as_ref().map(|r| r.verdict),
                "depth": h.report.as_ref().and_then(|r| r.stieltjes_depth()),
            })
        })
        .collect();
    Ok(to_string(json!({
        "eta": rep.eta,
        "a": rep.epslem.as_ref().map(|e| e.a),
        "xi": rep.xi.xi,
        "nu_at_one": rep.xi.nu_at_one,
        "verdict": rep.hyponormality.verdict,
        "min_slack": rep.hyponormality.min_slack,
        "min_slack_at": rep.hyponormality.min_slack_at,
        "budski_left": rep.diagnostics.budski_left,
        "budski_right": rep.diagnostics.budski_right,
        "hankel": hankel,
    })))
}

#[wasm_bindgen]
pub fn measure(kind: &str, a: f64, q: f64, atoms: usize) -> Result<String, JsError> {
    measure_json(kind, a, q, atoms).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn two_point_table(s: f64, max_n: u32) -> Result<String, JsError> {
    two_point_table_json(s, max_n).map_err(|e| JsError::new(&e))
}

/// `eta = 0` means infinitely many branches.
#[wasm_bindgen]
pub fn exotic(eta: u32, atoms: usize) -> Result<String, JsError> {
    exotic_json(eta, atoms).map_err(|e| JsError::new(&e))
}
