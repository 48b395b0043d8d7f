//! Browser demo bindings: the draw distributions, the three-hypothesis
//! classifier, and the accuracy-versus-draws simulation, each returned as
//! a JSON string for the static page in `static/`.
//!
//! Errors come back as `{"error": "..."}` so the page can surface them
//! without unwrapping exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use grouplink_core::calibration::{accuracy_curve, SimulationConfig};
use grouplink_core::classifier::{draw_pmf, log_likelihoods, ClassLabel, PopulationParams};

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}"))
}

fn error_json(message: impl std::fmt::Display) -> String {
    to_json(&serde_json::json!({ "error": message.to_string() }))
}

#[derive(Serialize)]
struct PmfTable {
    g: u32,
    p: f64,
    y: Vec<u32>,
    abstainer: Vec<f64>,
    voter: Vec<f64>,
    unmatched: Vec<f64>,
}

/// Per-draw probability of each count `y` in `[0, g]` under the three
/// hypotheses.
#[wasm_bindgen]
pub fn pmf_table_json(g: u32, p: f64) -> String {
    let params = match PopulationParams::new(p, g, 1.0) {
        Ok(params) => params,
        Err(e) => return error_json(e),
    };
    let pmf_of = |class: ClassLabel| -> Vec<f64> {
        (0..=g).map(|y| draw_pmf(y, class, &params).unwrap()).collect()
    };
    to_json(&PmfTable {
        g,
        p,
        y: (0..=g).collect(),
        abstainer: pmf_of(ClassLabel::MatchedAbstainer),
        voter: pmf_of(ClassLabel::MatchedVoter),
        unmatched: pmf_of(ClassLabel::Unmatched),
    })
}

#[derive(Serialize)]
struct ClassifyResponse {
    label: &'static str,
    ll_abstainer: f64,
    ll_voter: f64,
    ll_unmatched: f64,
    n_draws: usize,
}

/// Log likelihoods and label of a comma-separated draw sequence.
#[wasm_bindgen]
pub fn likelihoods_json(g: u32, p: f64, draws_csv: &str) -> String {
    let params = match PopulationParams::new(p, g, 1.0) {
        Ok(params) => params,
        Err(e) => return error_json(e),
    };
    let mut draws = Vec::new();
    for token in draws_csv.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        match token.parse::<u32>() {
            Ok(y) if y <= g => draws.push(y),
            _ => return error_json(format!("draw {token:?} is not an integer in [0, {g}]")),
        }
    }
    match log_likelihoods(&draws, &params) {
        Ok(ll) => to_json(&ClassifyResponse {
            label: ll.best_label().as_str(),
            ll_abstainer: ll.abstainer,
            ll_voter: ll.voter,
            ll_unmatched: ll.unmatched,
            n_draws: draws.len(),
        }),
        Err(e) => error_json(e),
    }
}

#[derive(Serialize)]
struct CurveResponse {
    m: Vec<usize>,
    acc_voter: Vec<Option<f64>>,
    acc_abstainer: Vec<Option<f64>>,
}

/// Conditional accuracy of both matched classes versus draws per record,
/// simulated at turnout `t` and match rate `mm` over `n` records.
#[wasm_bindgen]
pub fn accuracy_curve_json(t: f64, mm: f64, n: usize, m_max: usize, m_step: usize, seed: u64) -> String {
    if m_step == 0 || m_max < m_step {
        return error_json("m_step must be positive and at most m_max");
    }
    let mut cfg = SimulationConfig::new(t, mm, n, 5, seed);
    // One replicate keeps the in-browser latency interactive.
    cfg.replicates = 1;
    let grid: Vec<usize> = (m_step..=m_max).step_by(m_step).collect();
    match accuracy_curve(&cfg, &grid) {
        Ok(curve) => to_json(&CurveResponse {
            m: curve.iter().map(|p| p.m).collect(),
            acc_voter: curve.iter().map(|p| p.acc_voter).collect(),
            acc_abstainer: curve.iter().map(|p| p.acc_abstainer).collect(),
        }),
        Err(e) => error_json(e),
    }
}
