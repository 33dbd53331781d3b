//! wasm-bindgen bindings behind `www/index.html`.

use irs_backscatter::baselines::SchemeKind;
use irs_backscatter::estimator::{build_training_matrix, dft_training, optimal_phase, phase_grid_search};
use irs_backscatter::experiments::{run_snr_sweep, ExperimentConfig};
use wasm_bindgen::prelude::*;

const MAX_N: usize = 64;
const MAX_TRIALS: usize = 2000;

fn check_n(n: usize) -> Result<(), String> {
    if (1..=MAX_N).contains(&n) {
        Ok(())
    } else {
        Err(format!("N must be in 1..={MAX_N}"))
    }
}

/// `[phi_0, trace_0, phi_1, trace_1, ...]` over a uniform phase grid for the
/// DFT plan with `K = N + 1`, followed by the grid argmin and the trace at `2 pi / 3`.
pub fn phase_trace_curve_impl(n: usize, grid: usize) -> Result<Vec<f64>, String> {
    check_n(n)?;
    if !(8..=4096).contains(&grid) {
        return Err("grid must be in 8..=4096".into());
    }
    let plan = dft_training(n + 1, n).map_err(|e| e.to_string())?;
    let search = phase_grid_search(plan.reflections(), grid).map_err(|e| e.to_string())?;
    let at_optimal = build_training_matrix(&plan).map_err(|e| e.to_string())?.trace_inverse_gram();
    let mut out: Vec<f64> = search.evaluated.iter().flat_map(|&(p, t)| [p, t]).collect();
    out.extend([search.best_phase, search.best_trace, optimal_phase(), at_optimal]);
    Ok(out)
}

/// Row-major `|A^H A|` for the DFT plan with `K = N + 1` rotated by `phi`.
pub fn gram_magnitudes_impl(n: usize, phi: f64) -> Result<Vec<f64>, String> {
    check_n(n)?;
    let plan = dft_training(n + 1, n).map_err(|e| e.to_string())?.with_phase(phi);
    let m = build_training_matrix(&plan).map_err(|e| e.to_string())?;
    let g = m.gram();
    Ok((0..g.nrows()).flat_map(|i| (0..g.ncols()).map(move |j| (i, j))).map(|(i, j)| g[(i, j)].norm()).collect())
}

/// Small reference-SNR sweep over the default scenario, returned as JSON rows.
pub fn snr_sweep_impl(n: usize, trials: usize, seed: u64) -> Result<String, String> {
    check_n(n)?;
    if !(1..=MAX_TRIALS).contains(&trials) {
        return Err(format!("trials must be in 1..={MAX_TRIALS}"));
    }
    let mut config = ExperimentConfig {
        schemes: vec![SchemeKind::PerfectCsi, SchemeKind::Proposed, SchemeKind::Baseline1, SchemeKind::Baseline2],
        trials,
        seed,
        ..Default::default()
    };
    config.scenario.n_subsurfaces = n;
    let result = run_snr_sweep(&config).map_err(|e| e.to_string())?;
    serde_json::to_string(&result.rows).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn phase_trace_curve(n: usize, grid: usize) -> Result<Vec<f64>, JsError> {
    phase_trace_curve_impl(n, grid).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn gram_magnitudes(n: usize, phi: f64) -> Result<Vec<f64>, JsError> {
    gram_magnitudes_impl(n, phi).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn snr_sweep(n: usize, trials: usize, seed: u64) -> Result<String, JsError> {
    snr_sweep_impl(n, trials, seed).map_err(|e| JsError::new(&e))
}
