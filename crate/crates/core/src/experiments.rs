//! Preset problems, regime classification, the energy expansion fit and the
//! sweep runner behind the reproducible experiments.

use crate::concentration::{lambda_value, predict_concentration, BoundaryPrediction, Regime};
use crate::error::{Error, Result};
use crate::fd_solver::{continuation_sweep, DiscreteSolution, SolverOptions, SystemProblem};
use crate::ground_state::{
    half_space_moments, solve_limit_ground_state, GroundStateOptions, MomentTable, RadialProfile,
};
use crate::params::{BoundaryComponent, CoefficientField, DomainSpec, Exponents, Shape};
use serde::{Deserialize, Serialize};

/// Default ε schedule of a sweep.
pub const DEFAULT_EPS: [f64; 5] = [0.3, 0.21, 0.15, 0.10, 0.07];

/// A problem together with what it is meant to reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemBundle {
    pub id: String,
    pub problem: SystemProblem,
    pub description: String,
    /// Fibre of the orbit a reduced point stands for, e.g. `S^1`.
    pub orbit: Option<String>,
    /// Weights `(α, β)` of a weighted-annulus preset.
    pub weights: Option<(f64, f64)>,
}

/// Hopf-reduced problem: weights `1/(2|x|)` on the annulus
/// `(inner²/2, outer²/2)` of the reduced space.
pub fn hopf_preset(n_reduced: usize, exp: &Exponents, radii: (f64, f64)) -> Result<ProblemBundle> {
    let orbit = match n_reduced {
        3 => "S^1",
        5 => "S^3",
        9 => "S^7",
        other => return Err(Error::UnsupportedDimension(other)),
    };
    if exp.n() != n_reduced {
        return Err(Error::Precondition(format!(
            "exponents are for n = {}, preset needs n = {n_reduced}",
            exp.n()
        )));
    }
    let (ra, rb) = radii;
    let domain = DomainSpec::annulus(ra * ra / 2.0, rb * rb / 2.0, n_reduced)?;
    let w = CoefficientField::power(0.5, -1.0)?;
    Ok(ProblemBundle {
        id: format!("hopf-n{n_reduced}"),
        problem: SystemProblem {
            domain,
            a: w.clone(),
            b: w.clone(),
            c: w,
            exponents: *exp,
        },
        description: format!(
            "Hopf reduction of the annulus {ra} < |x| < {rb} in R^{}",
            2 * (n_reduced - 1)
        ),
        orbit: Some(orbit.to_string()),
        weights: None,
    })
}

/// `a = (2|x|)^{α/2-1}`, `b = (2|x|)^{β/2-1}`, `c = (2|x|)^{-1}` on an annulus in R³.
pub fn weighted_annulus_preset(
    alpha: f64,
    beta: f64,
    exp: &Exponents,
    radii: (f64, f64),
) -> Result<ProblemBundle> {
    if exp.n() != 3 {
        return Err(Error::Precondition(format!(
            "weighted annulus is three-dimensional, got n = {}",
            exp.n()
        )));
    }
    if !(alpha.is_finite() && beta.is_finite()) {
        return Err(Error::InvalidCoefficient("weights must be finite".into()));
    }
    let domain = DomainSpec::annulus(radii.0, radii.1, 3)?;
    let two_r = |e: f64| -> Result<CoefficientField> {
        Ok(CoefficientField::product(
            CoefficientField::constant(2f64.powf(e))?,
            CoefficientField::power(1.0, e)?,
        ))
    };
    Ok(ProblemBundle {
        id: format!("weighted-a{alpha}-b{beta}"),
        problem: SystemProblem {
            domain,
            a: two_r(alpha / 2.0 - 1.0)?,
            b: two_r(beta / 2.0 - 1.0)?,
            c: two_r(-1.0)?,
            exponents: *exp,
        },
        description: format!("weighted annulus, alpha = {alpha}, beta = {beta}"),
        orbit: Some("S^1".into()),
        weights: Some((alpha, beta)),
    })
}

/// Constant coefficients `a = b = c = 1`.
pub fn constant_preset(domain: DomainSpec, exp: &Exponents) -> Result<ProblemBundle> {
    let one = CoefficientField::constant(1.0)?;
    Ok(ProblemBundle {
        id: "constant".into(),
        problem: SystemProblem {
            domain,
            a: one.clone(),
            b: one.clone(),
            c: one,
            exponents: *exp,
        },
        description: "constant coefficients".into(),
        orbit: None,
        weights: None,
    })
}

/// `E = (pq - 1 - α(q+1) - β(p+1)) / (pq - 1)`; on the weighted annulus
/// `Λ = (2|x|)^{E/2}`.
pub fn lambda_exponent(alpha: f64, beta: f64, exp: &Exponents) -> f64 {
    let d = exp.pq_minus_one();
    (d - alpha * (exp.q() + 1.0) - beta * (exp.p() + 1.0)) / d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictedRegime {
    InnerBoundary,
    OuterBoundary,
    Degenerate,
}

/// Sign of `E`, with `|E| ≤ 1e-12` counted as zero.
pub fn regime_classify(alpha: f64, beta: f64, exp: &Exponents) -> PredictedRegime {
    let e = lambda_exponent(alpha, beta, exp);
    if e.abs() <= 1e-12 {
        PredictedRegime::Degenerate
    } else if e > 0.0 {
        PredictedRegime::InnerBoundary
    } else {
        PredictedRegime::OuterBoundary
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservedRegime {
    InnerBoundary,
    OuterBoundary,
    Interior,
}

fn regime_of_component(domain: &DomainSpec, comp: Option<BoundaryComponent>) -> ObservedRegime {
    match (comp, domain.shape) {
        (None, _) => ObservedRegime::Interior,
        (Some(_), Shape::Ball { .. }) => ObservedRegime::OuterBoundary,
        (Some(c), Shape::Annulus { .. }) if c.index == 0 => ObservedRegime::InnerBoundary,
        (Some(_), Shape::Annulus { .. }) => ObservedRegime::OuterBoundary,
    }
}

/// Regime read off the maxima at the two smallest ε of a sweep.
pub fn observed_regime(sweep: &[DiscreteSolution]) -> Result<ObservedRegime> {
    if sweep.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least two solutions to read a regime".into(),
        ));
    }
    let mut by_eps: Vec<&DiscreteSolution> = sweep.iter().collect();
    by_eps.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let domain = by_eps[0].grid.domain;
    let r0 = regime_of_component(&domain, by_eps[0].argmax_component());
    let r1 = regime_of_component(&domain, by_eps[1].argmax_component());
    Ok(if r0 == r1 {
        r0
    } else {
        ObservedRegime::Interior
    })
}

/// Curvature term `(n-1)Hγ + η` under one sign convention for `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConventionCheck {
    /// `+1` for the inner-normal convention (ball has `H = 1/R`), `-1` for the opposite.
    pub h_sign: f64,
    pub predicted_slope: f64,
    /// `|slope| / |(n-1)Hγ + η|`.
    pub magnitude_ratio: f64,
    pub sign_agrees: bool,
    pub within_25_percent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub component: usize,
    pub points: Vec<(f64, f64)>,
    pub intercept: f64,
    pub slope: f64,
    pub fit_residual: f64,
    /// `Λ(x₀) I∞`.
    pub leading_term: f64,
    pub intercept_relative_error: f64,
    pub mean_curvature: f64,
    pub gamma: f64,
    pub eta: f64,
    pub conventions: [ConventionCheck; 2],
    /// Convention whose magnitude fits within 25%, if any (`+1` or `-1`).
    pub winning_convention: Option<f64>,
    /// Same comparison with the curvature coefficient `(2/(n+1)) Λ/√c ∫⟨∇U,∇V⟩z_n`
    /// (the normal moment) in place of γ.
    pub normal_moment_gamma: f64,
    pub normal_moment_conventions: [ConventionCheck; 2],
}

fn convention(h_sign: f64, slope: f64, h: f64, gamma: f64, eta: f64, n: usize) -> ConventionCheck {
    let term = (n as f64 - 1.0) * h_sign * h * gamma + eta;
    let predicted = -term;
    let ratio = slope.abs() / term.abs().max(f64::MIN_POSITIVE);
    ConventionCheck {
        h_sign,
        predicted_slope: predicted,
        magnitude_ratio: ratio,
        sign_agrees: predicted.signum() == slope.signum(),
        within_25_percent: (ratio - 1.0).abs() <= 0.25,
    }
}

/// Least-squares fit of `c_ε/εⁿ = intercept + slope·ε`, compared with the
/// two-term expansion at the boundary component the sweep concentrates on.
pub fn energy_expansion_fit(
    sweep: &[DiscreteSolution],
    prediction: &BoundaryPrediction,
    moments: &MomentTable,
    problem: &SystemProblem,
) -> Result<ExpansionFit> {
    let mut eps: Vec<f64> = sweep.iter().map(|s| s.eps).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "expansion fit needs at least 4 distinct eps values, got {}",
            eps.len()
        )));
    }
    let comps: Vec<Option<usize>> = sweep
        .iter()
        .map(|s| s.argmax_component().map(|c| c.index))
        .collect();
    let component = match comps[0] {
        Some(c) if comps.iter().all(|x| *x == Some(c)) => c,
        _ => {
            return Err(Error::Precondition(
                "sweep does not concentrate on a single boundary component".into(),
            ))
        }
    };
    let n = problem.domain.n;
    let points: Vec<(f64, f64)> = sweep
        .iter()
        .map(|s| (s.eps, s.c_eps / s.eps.powi(n as i32)))
        .collect();
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let fit_residual = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    let report = prediction
        .components
        .iter()
        .find(|c| c.index == component)
        .ok_or_else(|| Error::Precondition("prediction lacks the sweep's component".into()))?;
    let mut x0 = vec![0.0; n];
    x0[n - 1] = report.radius;
    let lam = lambda_value(&problem.a, &problem.b, &problem.c, &x0, &problem.exponents)?;
    let leading_term = lam * moments.i_infinity;
    let (c0, _) = problem.c.evaluate(&x0)?;
    let normal_moment_gamma = 2.0 / (n as f64 + 1.0) * lam / c0.sqrt() * moments.grad_moment;
    let h = report.mean_curvature;
    let conventions = [
        convention(1.0, slope, h, report.gamma, report.eta, n),
        convention(-1.0, slope, h, report.gamma, report.eta, n),
    ];
    let winning_convention = conventions
        .iter()
        .filter(|c| c.within_25_percent && c.sign_agrees)
        .map(|c| c.h_sign)
        .next();
    Ok(ExpansionFit {
        component,
        points,
        intercept,
        slope,
        fit_residual,
        leading_term,
        intercept_relative_error: (intercept - leading_term).abs() / leading_term,
        mean_curvature: h,
        gamma: report.gamma,
        eta: report.eta,
        conventions,
        winning_convention,
        normal_moment_gamma,
        normal_moment_conventions: [
            convention(1.0, slope, h, normal_moment_gamma, report.eta, n),
            convention(-1.0, slope, h, normal_moment_gamma, report.eta, n),
        ],
    })
}

/// One ε entry of a sweep, as recorded in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    pub argmax_r: f64,
    pub argmax_theta: f64,
    pub argmax_v_r: f64,
    pub argmax_v_theta: f64,
    pub distance_to_boundary: f64,
    pub argmax_separation_cells: usize,
    pub c_eps: f64,
    pub scaled_energy: f64,
    pub residual_norm: f64,
    pub newton_iterations: usize,
    /// `L²` mass fraction within `10ε/√c(x_max)` of the maximum.
    pub mass_fraction: f64,
}

impl SweepRecord {
    pub fn from_solution(sol: &DiscreteSolution, problem: &SystemProblem) -> Result<Self> {
        let c = problem.c.radial(sol.argmax_u.r)?.0;
        Ok(SweepRecord {
            eps: sol.eps,
            argmax_r: sol.argmax_u.r,
            argmax_theta: sol.argmax_u.theta,
            argmax_v_r: sol.argmax_v.r,
            argmax_v_theta: sol.argmax_v.theta,
            distance_to_boundary: sol.argmax_distance_to_boundary(),
            argmax_separation_cells: sol.argmax_separation_cells(),
            c_eps: sol.c_eps,
            scaled_energy: sol.c_eps / sol.eps.powi(sol.grid.n as i32),
            residual_norm: sol.residual_norm,
            newton_iterations: sol.newton_iterations,
            mass_fraction: sol.mass_fraction_near_argmax(10.0 * sol.eps / c.sqrt()),
        })
    }
}

/// Sweep started from one boundary component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSweep {
    pub start_component: usize,
    pub start_radius: f64,
    pub records: Vec<SweepRecord>,
    pub error: Option<String>,
}

/// Boundary localization of one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    /// Smallest `C` with `dist(argmax, ∂Ω) ≤ C ε` over the sweep.
    pub fitted_c: f64,
    pub on_boundary_at_two_smallest: bool,
    /// Largest grid separation of the maxima of `u` and `v`.
    pub max_separation_cells: usize,
    /// `L²` mass fraction within `10ε` of the maximum at the smallest ε.
    pub min_mass_fraction_at_smallest: f64,
}

pub fn localization(sweep: &[DiscreteSolution]) -> Result<Localization> {
    if sweep.len() < 2 {
        return Err(Error::InsufficientData(
            "localization needs at least two solutions".into(),
        ));
    }
    let mut by_eps: Vec<&DiscreteSolution> = sweep.iter().collect();
    by_eps.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let fitted_c = sweep
        .iter()
        .map(|s| s.argmax_distance_to_boundary() / s.eps)
        .fold(0.0, f64::max);
    Ok(Localization {
        fitted_c,
        on_boundary_at_two_smallest: by_eps[..2].iter().all(|s| s.argmax_component().is_some()),
        max_separation_cells: sweep
            .iter()
            .map(|s| s.argmax_separation_cells())
            .max()
            .unwrap_or(0),
        min_mass_fraction_at_smallest: by_eps[0].mass_fraction_near_argmax(10.0 * by_eps[0].eps),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub preset: String,
    pub claim: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub preset: String,
    pub description: String,
    pub orbit: Option<String>,
    pub problem: SystemProblem,
    pub eps: Vec<f64>,
    pub solver: SolverOptions,
    pub ground_state: GroundStateOptions,
    pub i_infinity: f64,
    pub moments: MomentTable,
    /// Weighted-annulus exponent `E`, when applicable.
    pub lambda_exponent: Option<f64>,
    pub classified: Option<PredictedRegime>,
    pub prediction: BoundaryPrediction,
    pub candidates: Vec<CandidateSweep>,
    /// Start component of the least-energy candidate.
    pub selected: Option<usize>,
    pub regime_observed: Option<ObservedRegime>,
    pub localization: Option<Localization>,
    pub expansion_fit: Option<ExpansionFit>,
    pub verdicts: Vec<Verdict>,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// Records of the selected sweep.
    pub fn selected_records(&self) -> Option<&[SweepRecord]> {
        let s = self.selected?;
        self.candidates
            .iter()
            .find(|c| c.start_component == s)
            .map(|c| c.records.as_slice())
    }
}

/// Runs `jobs` on up to `threads` scoped workers, returning results in input order.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    threads: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let mut out: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let f = &f;
        for (slots, part) in out.chunks_mut(chunk).zip(items.chunks(chunk)) {
            scope.spawn(move || {
                for (slot, item) in slots.iter_mut().zip(part) {
                    *slot = Some(f(item));
                }
            });
        }
    });
    out.into_iter()
        .map(|r| r.expect("worker finished"))
        .collect()
}

fn observed_from_prediction(
    pred: &BoundaryPrediction,
    domain: &DomainSpec,
) -> Option<ObservedRegime> {
    if pred.regime != Regime::LambdaDriven {
        return None;
    }
    let comps = pred.predicted_components();
    if comps.len() != 1 {
        return None;
    }
    let comp = domain
        .boundary_components()
        .into_iter()
        .find(|c| c.index == comps[0]);
    Some(regime_of_component(domain, comp))
}

fn expected_from_classifier(c: PredictedRegime) -> Option<ObservedRegime> {
    match c {
        PredictedRegime::InnerBoundary => Some(ObservedRegime::InnerBoundary),
        PredictedRegime::OuterBoundary => Some(ObservedRegime::OuterBoundary),
        PredictedRegime::Degenerate => None,
    }
}

/// Solves the ground state, predicts, sweeps from every boundary component,
/// keeps the least-energy sweep and checks the claims attached to the preset.
pub fn run_experiment(
    bundle: &ProblemBundle,
    eps: &[f64],
    solver: &SolverOptions,
    gs: &GroundStateOptions,
    threads: usize,
) -> Result<ExperimentReport> {
    let problem = &bundle.problem;
    problem.validate()?;
    let prof = solve_limit_ground_state(&problem.exponents, gs)?;
    run_experiment_with_profile(bundle, eps, solver, gs, &prof, threads)
}

pub fn run_experiment_with_profile(
    bundle: &ProblemBundle,
    eps: &[f64],
    solver: &SolverOptions,
    gs: &GroundStateOptions,
    prof: &RadialProfile,
    threads: usize,
) -> Result<ExperimentReport> {
    let problem = &bundle.problem;
    problem.validate()?;
    let moments = half_space_moments(prof)?;
    let prediction = predict_concentration(
        &problem.domain,
        &problem.a,
        &problem.b,
        &problem.c,
        &problem.exponents,
        prof,
    )?;
    let components = problem.domain.boundary_components();
    let results = parallel_map(&components, threads, |comp| {
        continuation_sweep(problem, eps, prof, comp, solver)
    });
    let mut candidates = Vec::new();
    let mut converged: Vec<(usize, Vec<DiscreteSolution>)> = Vec::new();
    for (comp, res) in components.iter().zip(results) {
        match res {
            Ok(sweep) => {
                let records = sweep
                    .iter()
                    .map(|s| SweepRecord::from_solution(s, problem))
                    .collect::<Result<Vec<_>>>()?;
                candidates.push(CandidateSweep {
                    start_component: comp.index,
                    start_radius: comp.radius,
                    records,
                    error: None,
                });
                converged.push((comp.index, sweep));
            }
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => candidates.push(CandidateSweep {
                start_component: comp.index,
                start_radius: comp.radius,
                records: Vec::new(),
                error: Some(e.to_string()),
            }),
        }
    }
    // least energy at the smallest ε
    let winner = converged
        .iter()
        .min_by(|a, b| {
            let ea = a.1.last().map(|s| s.c_eps).unwrap_or(f64::INFINITY);
            let eb = b.1.last().map(|s| s.c_eps).unwrap_or(f64::INFINITY);
            ea.total_cmp(&eb)
        })
        .map(|(i, s)| (*i, s));
    let (lambda_exp, classified) = match bundle.weights {
        Some((al, be)) => (
            Some(lambda_exponent(al, be, &problem.exponents)),
            Some(regime_classify(al, be, &problem.exponents)),
        ),
        None => (None, None),
    };
    let mut report = ExperimentReport {
        preset: bundle.id.clone(),
        description: bundle.description.clone(),
        orbit: bundle.orbit.clone(),
        problem: problem.clone(),
        eps: eps.to_vec(),
        solver: *solver,
        ground_state: *gs,
        i_infinity: moments.i_infinity,
        moments,
        lambda_exponent: lambda_exp,
        classified,
        prediction,
        candidates,
        selected: winner.map(|w| w.0),
        regime_observed: None,
        localization: None,
        expansion_fit: None,
        verdicts: Vec::new(),
    };
    let id = bundle.id.clone();
    let verdict = |claim: &str, passed: bool, detail: String| Verdict {
        preset: id.clone(),
        claim: claim.to_string(),
        passed,
        detail,
    };
    let Some((_, sweep)) = winner else {
        report.verdicts.push(verdict(
            "sweep converged",
            false,
            "no candidate sweep converged".into(),
        ));
        return Ok(report);
    };
    let observed = observed_regime(sweep)?;
    report.regime_observed = Some(observed);
    let loc = localization(sweep)?;
    report.localization = Some(loc);
    report.verdicts.push(verdict(
        "boundary localization",
        loc.on_boundary_at_two_smallest,
        format!(
            "argmax on the boundary at the two smallest eps: {}, fitted C = {:.3}",
            loc.on_boundary_at_two_smallest, loc.fitted_c
        ),
    ));
    let small_sep = sweep
        .iter()
        .filter(|s| s.eps <= 0.15 + 1e-12)
        .map(|s| s.argmax_separation_cells())
        .max()
        .unwrap_or(0);
    report.verdicts.push(verdict(
        "common maximum",
        small_sep <= 2,
        format!("maxima of u and v at most {small_sep} cells apart for eps <= 0.15"),
    ));
    if let Some(expected) = observed_from_prediction(&report.prediction, &problem.domain) {
        report.verdicts.push(verdict(
            "predictor matches sweep",
            expected == observed,
            format!("predicted {expected:?}, observed {observed:?}"),
        ));
    }
    if let Some(c) = classified {
        match expected_from_classifier(c) {
            Some(expected) => report.verdicts.push(verdict(
                "classifier matches sweep",
                expected == observed,
                format!(
                    "E = {:.6}, classified {c:?}, observed {observed:?}",
                    lambda_exp.unwrap_or(f64::NAN)
                ),
            )),
            None => report.verdicts.push(verdict(
                "degenerate exponent gives constant lambda",
                report.prediction.constancy_witness <= report.prediction.tolerance,
                format!(
                    "constancy witness {:e}, observed {observed:?}",
                    report.prediction.constancy_witness
                ),
            )),
        }
    }
    if eps.len() >= 4 {
        match energy_expansion_fit(sweep, &report.prediction, &moments, problem) {
            Ok(fit) => {
                report.verdicts.push(verdict(
                    "expansion intercept",
                    fit.intercept_relative_error <= 0.05,
                    format!(
                        "intercept {:.6} vs lambda*I = {:.6} ({:.2}%)",
                        fit.intercept,
                        fit.leading_term,
                        100.0 * fit.intercept_relative_error
                    ),
                ));
                report.expansion_fit = Some(fit);
            }
            Err(e) => report
                .verdicts
                .push(verdict("expansion intercept", false, e.to_string())),
        }
    }
    Ok(report)
}

/// Named end-to-end presets.
pub const PRESET_IDS: [&str; 7] = [
    "hopf-s1",
    "hopf-s3",
    "hopf-s7",
    "annulus-regime-flip",
    "annulus-degenerate",
    "annulus-constant",
    "ball-constant",
];

/// Pre-reduction annulus radii of the Hopf presets.
pub const HOPF_RADII: (f64, f64) = (1.0, 2.0);
/// Annulus of the weighted and constant presets (equal to the reduced Hopf annulus).
pub const WEIGHTED_RADII: (f64, f64) = (0.5, 2.0);

/// Problems run by a named preset (the regime flip runs two).
pub fn preset_bundles(id: &str) -> Result<Vec<ProblemBundle>> {
    let named = |mut b: ProblemBundle, name: &str| {
        b.id = name.to_string();
        b
    };
    Ok(match id {
        "hopf-s1" => vec![named(
            hopf_preset(3, &Exponents::new(3.0, 3.0, 3)?, HOPF_RADII)?,
            id,
        )],
        "hopf-s3" => vec![named(
            hopf_preset(5, &Exponents::new(2.0, 2.0, 5)?, HOPF_RADII)?,
            id,
        )],
        "hopf-s7" => vec![named(
            hopf_preset(9, &Exponents::new(1.5, 1.5, 9)?, HOPF_RADII)?,
            id,
        )],
        "annulus-regime-flip" => {
            let exp = Exponents::new(3.0, 3.0, 3)?;
            vec![
                named(
                    weighted_annulus_preset(0.5, 0.5, &exp, WEIGHTED_RADII)?,
                    "annulus-regime-flip/E=+1/2",
                ),
                named(
                    weighted_annulus_preset(2.0, 2.0, &exp, WEIGHTED_RADII)?,
                    "annulus-regime-flip/E=-1",
                ),
            ]
        }
        "annulus-degenerate" => vec![named(
            weighted_annulus_preset(1.0, 0.0, &Exponents::new(2.0, 2.0, 3)?, WEIGHTED_RADII)?,
            id,
        )],
        "annulus-constant" => vec![named(
            constant_preset(
                DomainSpec::annulus(WEIGHTED_RADII.0, WEIGHTED_RADII.1, 3)?,
                &Exponents::new(3.0, 3.0, 3)?,
            )?,
            id,
        )],
        "ball-constant" => vec![named(
            constant_preset(DomainSpec::ball(1.0, 3)?, &Exponents::new(3.0, 3.0, 3)?)?,
            id,
        )],
        other => {
            return Err(Error::Precondition(format!(
                "unknown preset '{other}'; known: {}",
                PRESET_IDS.join(", ")
            )))
        }
    })
}

/// Convention-stability verdict across reports that carry an expansion fit:
/// which curvature sign convention makes the fitted slope's sign agree.
pub fn convention_summary(reports: &[ExperimentReport]) -> Vec<(String, f64, Option<f64>)> {
    reports
        .iter()
        .filter_map(|r| {
            let fit = r.expansion_fit.as_ref()?;
            let sign = fit
                .conventions
                .iter()
                .find(|c| c.sign_agrees)
                .map(|c| c.h_sign);
            Some((r.preset.clone(), fit.slope, sign))
        })
        .collect()
}

/// Plain-text table of reports.
pub fn summary_table(reports: &[ExperimentReport]) -> String {
    let mut s = format!(
        "{:<28} {:>9} {:>16} {:>16} {:>12} {:>8} {:>7}\n",
        "preset", "E", "predicted", "observed", "intercept%", "slope", "passed"
    );
    for r in reports {
        let predicted = match (r.classified, r.prediction.regime) {
            (Some(c), _) => format!("{c:?}"),
            (None, Regime::LambdaDriven) => {
                observed_from_prediction(&r.prediction, &r.problem.domain)
                    .map(|o| format!("{o:?}"))
                    .unwrap_or_else(|| "LambdaDriven".into())
            }
            (None, Regime::CurvatureDriven) => "CurvatureDriven".into(),
        };
        let e = r
            .lambda_exponent
            .map(|e| format!("{e:.4}"))
            .unwrap_or_else(|| "-".into());
        let observed = r
            .regime_observed
            .map(|o| format!("{o:?}"))
            .unwrap_or_else(|| "none".into());
        let (ie, slope) = match &r.expansion_fit {
            Some(f) => (
                format!("{:.2}", 100.0 * f.intercept_relative_error),
                if f.slope >= 0.0 { "+" } else { "-" }.to_string(),
            ),
            None => ("-".into(), "-".into()),
        };
        s.push_str(&format!(
            "{:<28} {:>9} {:>16} {:>16} {:>12} {:>8} {:>7}\n",
            r.preset,
            e,
            predicted,
            observed,
            ie,
            slope,
            if r.all_passed() { "yes" } else { "no" }
        ));
    }
    s
}
