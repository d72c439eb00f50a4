//! Browser bindings: ground-state profile, Λ curve on a weighted annulus and
//! a coarse spike solve rendered as a meridian heatmap. Every export returns
//! a JSON string.

use serde_json::{json, Value};
use spikeforge::experiments::{
    lambda_exponent, regime_classify, weighted_annulus_preset, PredictedRegime,
};
use spikeforge::fd_solver::{continuation_sweep, SolverOptions};
use spikeforge::ground_state::{
    energy_i_infinity, solve_limit_ground_state, verify_pohozaev, GroundStateOptions,
};
use spikeforge::params::Exponents;
use spikeforge::Result;
use wasm_bindgen::prelude::*;

const RADII: (f64, f64) = (0.5, 2.0);

fn demo_gs_options() -> GroundStateOptions {
    GroundStateOptions {
        cells: 2000,
        ..GroundStateOptions::default()
    }
}

pub fn ground_state_json(p: f64, q: f64, n: usize) -> Result<Value> {
    let exp = Exponents::new(p, q, n)?;
    let prof = solve_limit_ground_state(&exp, &demo_gs_options())?;
    let stride = (prof.r.len() / 400).max(1);
    let pick = |w: &[f64]| w.iter().step_by(stride).copied().collect::<Vec<_>>();
    Ok(json!({
        "r": pick(&prof.r),
        "u": pick(&prof.u),
        "v": pick(&prof.v),
        "u0": prof.u[0],
        "v0": prof.v[0],
        "i_infinity": energy_i_infinity(&prof),
        "pohozaev_residual": verify_pohozaev(&prof)?.max_residual(),
    }))
}

pub fn lambda_curve_json(p: f64, q: f64, alpha: f64, beta: f64, samples: usize) -> Result<Value> {
    let exp = Exponents::new(p, q, 3)?;
    let bundle = weighted_annulus_preset(alpha, beta, &exp, RADII)?;
    let pb = &bundle.problem;
    let samples = samples.clamp(2, 2000);
    let mut r = Vec::with_capacity(samples);
    let mut lambda = Vec::with_capacity(samples);
    for i in 0..samples {
        let x = RADII.0 + (RADII.1 - RADII.0) * i as f64 / (samples - 1) as f64;
        r.push(x);
        lambda.push(spikeforge::concentration::lambda_value(
            &pb.a,
            &pb.b,
            &pb.c,
            &[0.0, 0.0, x],
            &exp,
        )?);
    }
    Ok(json!({
        "r": r,
        "lambda": lambda,
        "exponent": lambda_exponent(alpha, beta, &exp),
        "regime": regime_classify(alpha, beta, &exp),
    }))
}

/// Solves the weighted annulus from a bump on the boundary where Λ is
/// smallest, continuing from ε = 0.3 down to `eps`, and rasterises `u` on the
/// meridian half plane.
pub fn spike_json(p: f64, q: f64, alpha: f64, beta: f64, eps: f64, cells: usize) -> Result<Value> {
    let exp = Exponents::new(p, q, 3)?;
    let bundle = weighted_annulus_preset(alpha, beta, &exp, RADII)?;
    let problem = &bundle.problem;
    let prof = solve_limit_ground_state(&exp, &demo_gs_options())?;
    let comps = problem.domain.boundary_components();
    let comp = match regime_classify(alpha, beta, &exp) {
        PredictedRegime::InnerBoundary => comps[0],
        _ => comps[comps.len() - 1],
    };
    let eps = eps.clamp(0.08, 0.3);
    let mut seq = vec![0.3];
    while *seq.last().unwrap() * 0.7 > eps {
        let next = seq.last().unwrap() * 0.7;
        seq.push(next);
    }
    if *seq.last().unwrap() > eps {
        seq.push(eps);
    }
    let cells = cells.clamp(16, 96);
    let opts = SolverOptions {
        nr: cells,
        nt: cells,
        ..SolverOptions::default()
    };
    let sol = continuation_sweep(problem, &seq, &prof, &comp, &opts)?
        .pop()
        .expect("non-empty sequence");
    let (w, h) = (120usize, 240usize);
    let top = sol.u.iter().cloned().fold(0.0, f64::max);
    let mut raster = Vec::with_capacity(w * h);
    for iy in 0..h {
        let z = RADII.1 * (1.0 - 2.0 * (iy as f64 + 0.5) / h as f64);
        for ix in 0..w {
            let rho = RADII.1 * (ix as f64 + 0.5) / w as f64;
            let r = rho.hypot(z);
            let cell = if r < RADII.0 || r > RADII.1 {
                -1.0
            } else {
                sol.grid.interpolate(&sol.u, r, rho.atan2(z)) / top
            };
            raster.push(cell);
        }
    }
    Ok(json!({
        "width": w,
        "height": h,
        "extent": RADII.1,
        "raster": raster,
        "eps": sol.eps,
        "max_u": top,
        "argmax_r": sol.argmax_u.r,
        "argmax_theta": sol.argmax_u.theta,
        "c_eps": sol.c_eps,
        "residual_norm": sol.residual_norm,
        "start_radius": comp.radius,
    }))
}

fn export(v: Result<Value>) -> std::result::Result<String, JsError> {
    v.map(|v| v.to_string())
        .map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn ground_state(p: f64, q: f64, n: u32) -> std::result::Result<String, JsError> {
    export(ground_state_json(p, q, n as usize))
}

#[wasm_bindgen]
pub fn lambda_curve(
    p: f64,
    q: f64,
    alpha: f64,
    beta: f64,
    samples: u32,
) -> std::result::Result<String, JsError> {
    export(lambda_curve_json(p, q, alpha, beta, samples as usize))
}

#[wasm_bindgen]
pub fn spike(
    p: f64,
    q: f64,
    alpha: f64,
    beta: f64,
    eps: f64,
    cells: u32,
) -> std::result::Result<String, JsError> {
    export(spike_json(p, q, alpha, beta, eps, cells as usize))
}
