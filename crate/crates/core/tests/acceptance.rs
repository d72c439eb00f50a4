//! Acceptance criteria 1–9. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; exits non-zero if any hard check fails.

mod common;

use common::{frozen_energy, half_plane_moments, identity_residuals, profile_at, rel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikeforge::concentration::{lambda_from_values, rescale_profile, Regime};
use spikeforge::experiments::{
    preset_bundles, run_experiment_with_profile, ExperimentReport, ObservedRegime, PredictedRegime,
    DEFAULT_EPS,
};
use spikeforge::fd_solver::{
    build_grid_with, initial_guess_bump, jacobian_action, system_residual, SolverOptions, Spacing,
    SystemProblem,
};
use spikeforge::ground_state::{
    decay_rate, energy_i_infinity, solve_limit_ground_state, solve_scalar_ground_state,
    verify_pohozaev, GroundStateOptions, RadialProfile,
};
use spikeforge::output::{report_files, Provenance};
use spikeforge::params::{CoefficientField, DomainSpec, Exponents};
use std::time::{Duration, Instant};

struct Outcome {
    passed: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            passed: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.passed &= ok;
        self.lines
            .push(format!("    [{}] {what}", if ok { "ok" } else { "FAIL" }));
    }

    fn note(&mut self, what: String) {
        self.lines.push(format!("    [report] {what}"));
    }
}

fn gs(p: f64, q: f64, n: usize) -> RadialProfile {
    solve_limit_ground_state(
        &Exponents::new(p, q, n).unwrap(),
        &GroundStateOptions::default(),
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    for (p, q, n) in [(3.0, 3.0, 3), (2.0, 3.0, 3), (2.0, 2.0, 4)] {
        let exp = Exponents::new(p, q, n).unwrap();
        let opts = GroundStateOptions::default();
        let prof = solve_limit_ground_state(&exp, &opts).unwrap();
        let fine = solve_limit_ground_state(&exp, &opts.refined()).unwrap();
        let coarse = verify_pohozaev(&prof).unwrap().max_residual();
        let refined = verify_pohozaev(&fine).unwrap().max_residual();
        o.check(
            coarse <= 1e-3,
            format!("({p},{q},{n}) module residual {coarse:.2e} <= 1e-3"),
        );
        o.check(
            refined <= 2.5e-4,
            format!("({p},{q},{n}) refined residual {refined:.2e} <= 2.5e-4"),
        );
        let hp = half_plane_moments(&fine, 2400);
        let r = identity_residuals(&hp, n);
        let worst = r.iter().cloned().fold(0.0, f64::max);
        o.check(
            worst <= 1e-3,
            format!(
                "({p},{q},{n}) half-plane quadrature residuals i {:.1e} ii {:.1e} iii {:.1e} iv {:.1e}",
                r[0], r[1], r[2], r[3]
            ),
        );
    }
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let prof = gs(3.0, 3.0, 3);
    let i_inf = energy_i_infinity(&prof);
    let (p, q) = (3.0f64, 3.0f64);
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (a0, b0, c0): (f64, f64, f64) = (
            rng.gen_range(0.25..=4.0),
            rng.gen_range(0.25..=4.0),
            rng.gen_range(0.25..=4.0),
        );
        // u = A U(√c r) solves the frozen system iff A c B^{-q} = b and B c A^{-p} = a
        let la = ((b0 / c0).ln() + q * (a0 / c0).ln()) / (1.0 - p * q);
        let lb = (a0 / c0).ln() + p * la;
        let amp = (la.exp(), lb.exp());
        let oracle = frozen_energy(&prof, a0, b0, c0, amp);
        let module = lambda_from_values(a0, b0, c0, &prof.exponents) * i_inf;
        let rescaled = rescale_profile(&prof, a0, b0, c0).unwrap().energy();
        worst = worst.max(rel(oracle, module)).max(rel(rescaled, module));
    }
    o.check(
        worst <= 1e-4,
        format!("10 seeded triples in [1/4,4]^3: worst relative error {worst:.2e} <= 1e-4"),
    );
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    for p in [2.0, 3.0] {
        let opts = GroundStateOptions::default();
        let sys = solve_limit_ground_state(&Exponents::new(p, p, 3).unwrap(), &opts).unwrap();
        let sc = solve_scalar_ground_state(p, 3, &opts).unwrap();
        let d = sys
            .r
            .iter()
            .enumerate()
            .take_while(|(_, r)| **r <= sc.trusted_radius)
            .map(|(i, _)| (sys.u[i] - sc.u[i]).abs().max((sys.v[i] - sc.u[i]).abs()))
            .fold(0.0, f64::max);
        o.check(
            d <= 1e-6,
            format!(
                "p = q = {p}: max |system - shooting| = {d:.2e} on r <= {:.2} (w(0) = {:.10})",
                sc.trusted_radius, sc.u[0]
            ),
        );
    }
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    for (p, q, n) in [(3.0, 3.0, 3), (2.0, 3.0, 3), (2.0, 2.0, 4)] {
        let prof = gs(p, q, n);
        let (du, dv) = decay_rate(&prof).unwrap();
        // independent two-point estimate of the same rate
        let (r1, r2) = (0.5 * prof.r_max, 0.7 * prof.r_max);
        let k = 0.5 * (n as f64 - 1.0);
        let w = |r: f64| profile_at(&prof, r).0 * r.powf(k);
        let two_point = (w(r1) / w(r2)).ln() / (r2 - r1);
        o.check(
            (du - 1.0).abs() <= 0.1 && (dv - 1.0).abs() <= 0.1 && (two_point - 1.0).abs() <= 0.1,
            format!("({p},{q},{n}) fitted rates {du:.4}, {dv:.4}; two-point {two_point:.4}"),
        );
    }
    o
}

struct Sweeps {
    hopf: ExperimentReport,
    flip_plus: ExperimentReport,
    flip_minus: ExperimentReport,
    ball: ExperimentReport,
    hopf_time: Duration,
}

fn run_preset(id: &str, prof: &RadialProfile) -> (Vec<ExperimentReport>, Duration) {
    let t = Instant::now();
    let reports = preset_bundles(id)
        .unwrap()
        .iter()
        .map(|b| {
            run_experiment_with_profile(
                b,
                &DEFAULT_EPS,
                &SolverOptions::default(),
                &GroundStateOptions::default(),
                prof,
                2,
            )
            .unwrap()
        })
        .collect();
    (reports, t.elapsed())
}

fn sweeps() -> Sweeps {
    let prof = gs(3.0, 3.0, 3);
    std::thread::scope(|s| {
        let hopf = s.spawn(|| run_preset("hopf-s1", &prof));
        let flip = s.spawn(|| run_preset("annulus-regime-flip", &prof));
        let ball = s.spawn(|| run_preset("ball-constant", &prof));
        let (mut h, hopf_time) = hopf.join().unwrap();
        let (mut f, _) = flip.join().unwrap();
        let (mut b, _) = ball.join().unwrap();
        let flip_minus = f.pop().unwrap();
        let flip_plus = f.pop().unwrap();
        Sweeps {
            hopf: h.pop().unwrap(),
            flip_plus,
            flip_minus,
            ball: b.pop().unwrap(),
            hopf_time,
        }
    })
}

fn criterion_5(s: &Sweeps) -> Outcome {
    let mut o = Outcome::new();
    for r in [&s.hopf, &s.flip_plus, &s.flip_minus, &s.ball] {
        let domain = r.problem.domain;
        for c in r.candidates.iter().filter(|c| c.error.is_none()) {
            let mut recs = c.records.clone();
            recs.sort_by(|a, b| a.eps.total_cmp(&b.eps));
            let fitted_c = recs
                .iter()
                .map(|x| domain.distance_to_boundary(x.argmax_r) / x.eps)
                .fold(0.0, f64::max);
            let on_boundary = recs[..2]
                .iter()
                .all(|x| domain.component_at(x.argmax_r).is_some());
            let sep = recs
                .iter()
                .map(|x| x.argmax_separation_cells)
                .max()
                .unwrap();
            o.check(
                on_boundary && sep <= 2,
                format!(
                    "{} from component {}: C = {fitted_c:.3}, on boundary at eps {} and {}: {on_boundary}, u/v maxima <= {sep} cells apart",
                    r.preset, c.start_component, recs[0].eps, recs[1].eps
                ),
            );
        }
    }
    o
}

fn criterion_6(s: &Sweeps) -> Outcome {
    let mut o = Outcome::new();
    let r = &s.hopf;
    let recs = r.selected_records().unwrap();
    let inner = r.problem.domain.radial_extent().0;
    let last = recs.last().unwrap();
    o.check(
        r.regime_observed == Some(ObservedRegime::InnerBoundary),
        format!("observed regime {:?}", r.regime_observed),
    );
    o.check(
        (last.argmax_r - inner).abs() <= 1e-12,
        format!(
            "argmax radius at eps = {} is {} (inner radius {inner})",
            last.eps, last.argmax_r
        ),
    );
    o.check(
        r.prediction.regime == Regime::LambdaDriven
            && r.prediction.predicted_components() == vec![0],
        format!(
            "prediction {:?} on components {:?}",
            r.prediction.regime,
            r.prediction.predicted_components()
        ),
    );
    o.check(
        s.hopf_time <= Duration::from_secs(600),
        format!("runtime {:.1} s <= 600 s", s.hopf_time.as_secs_f64()),
    );
    o
}

fn criterion_7(s: &Sweeps) -> Outcome {
    let mut o = Outcome::new();
    for (r, want_e, class, obs) in [
        (
            &s.flip_plus,
            0.5,
            PredictedRegime::InnerBoundary,
            ObservedRegime::InnerBoundary,
        ),
        (
            &s.flip_minus,
            -1.0,
            PredictedRegime::OuterBoundary,
            ObservedRegime::OuterBoundary,
        ),
    ] {
        let e = r.lambda_exponent.unwrap();
        o.check(
            (e - want_e).abs() <= 1e-12
                && r.classified == Some(class)
                && r.regime_observed == Some(obs),
            format!(
                "{}: E = {e}, classified {:?}, observed {:?}",
                r.preset, r.classified, r.regime_observed
            ),
        );
    }
    o
}

fn criterion_8(s: &Sweeps) -> Outcome {
    let mut o = Outcome::new();
    let fit = s.hopf.expansion_fit.as_ref().unwrap();
    o.check(
        fit.intercept_relative_error <= 0.05,
        format!(
            "Hopf intercept {:.4} vs Lambda I = {:.4}: {:.2}% <= 5%",
            fit.intercept,
            fit.leading_term,
            100.0 * fit.intercept_relative_error
        ),
    );
    let mut paper_winners = Vec::new();
    let mut normal_winners = Vec::new();
    for r in [&s.hopf, &s.flip_plus, &s.flip_minus, &s.ball] {
        let f = r.expansion_fit.as_ref().unwrap();
        let pick = |c: &[spikeforge::experiments::ConventionCheck; 2]| {
            c.iter()
                .find(|x| x.within_25_percent && x.sign_agrees)
                .map(|x| x.h_sign)
        };
        paper_winners.push(pick(&f.conventions));
        normal_winners.push(pick(&f.normal_moment_conventions));
        o.note(format!(
            "{}: slope {:.3}; with gamma {:.3}: predicted {:.3} / {:.3} (H sign +1 / -1); with normal-moment gamma {:.3}: {:.3} / {:.3}",
            r.preset,
            f.slope,
            f.gamma,
            f.conventions[0].predicted_slope,
            f.conventions[1].predicted_slope,
            f.normal_moment_gamma,
            f.normal_moment_conventions[0].predicted_slope,
            f.normal_moment_conventions[1].predicted_slope
        ));
    }
    let stable =
        |w: &[Option<f64>]| w.iter().all(|x| x.is_some()) && w.windows(2).all(|p| p[0] == p[1]);
    o.note(format!(
        "convention fitting within 25% with the stated gamma: {paper_winners:?} (stable: {})",
        stable(&paper_winners)
    ));
    o.note(format!(
        "convention fitting within 25% with the normal-moment gamma: {normal_winners:?} (stable: {})",
        stable(&normal_winners)
    ));
    o
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new();
    let prof = gs(3.0, 3.0, 3);
    let exp = prof.exponents;
    let hopf = preset_bundles("hopf-s1").unwrap().remove(0).problem;
    let ball = SystemProblem {
        domain: DomainSpec::ball(1.0, 3).unwrap(),
        a: CoefficientField::constant(1.0).unwrap(),
        b: CoefficientField::constant(1.0).unwrap(),
        c: CoefficientField::constant(1.0).unwrap(),
        exponents: exp,
    };
    let mut worst: f64 = 0.0;
    for (problem, spacing) in [(&hopf, Spacing::Graded), (&ball, Spacing::Uniform)] {
        let grid = build_grid_with(&problem.domain, 3, 40, 36, spacing).unwrap();
        let eps = 0.2;
        let r0 = problem.domain.radial_extent().1;
        let (u, v) = initial_guess_bump(&prof, problem, (r0, 0.3), eps, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let du: Vec<f64> = (0..u.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dv: Vec<f64> = (0..u.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jv = jacobian_action(problem, &grid, eps, (&u, &v), (&du, &dv)).unwrap();
        let t = 1e-6;
        let shift = |s: f64| {
            let uu: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + s * b).collect();
            let vv: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a + s * b).collect();
            system_residual(problem, &grid, eps, &uu, &vv).unwrap()
        };
        let (fp, fm) = (shift(t), shift(-t));
        let fd: Vec<f64> = fp
            .iter()
            .zip(&fm)
            .map(|(a, b)| (a - b) / (2.0 * t))
            .collect();
        let num: f64 = fd
            .iter()
            .zip(&jv)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = jv.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    o.check(
        worst <= 1e-6,
        format!("Jacobian vs central differences: relative error {worst:.2e} <= 1e-6"),
    );
    // u = v = 1 solves the constant-coefficient system exactly, so the residual
    // is the discrete Laplacian of a constant
    let mut lap: f64 = 0.0;
    for spacing in [Spacing::Uniform, Spacing::Graded] {
        for domain in [
            DomainSpec::ball(1.0, 3).unwrap(),
            DomainSpec::annulus(0.5, 2.0, 3).unwrap(),
        ] {
            let p = SystemProblem {
                domain,
                ..ball.clone()
            };
            let grid = build_grid_with(&domain, 3, 128, 128, spacing).unwrap();
            let one = vec![1.0; grid.nodes()];
            let f = system_residual(&p, &grid, 0.1, &one, &one).unwrap();
            lap = lap.max(f.iter().map(|x| x.abs()).fold(0.0, f64::max));
        }
    }
    o.check(
        lap <= 1e-12,
        format!("constant-field residual {lap:.2e} <= 1e-12"),
    );
    let run = || {
        let (reports, _) = run_preset("ball-constant", &prof);
        report_files(&reports, &Provenance::new("acceptance")).unwrap()
    };
    let (a, b) = (run(), run());
    let same = a.len() == b.len()
        && a.iter()
            .zip(&b)
            .all(|(x, y)| x.0 == y.0 && x.1.as_bytes() == y.1.as_bytes());
    o.check(
        same,
        format!(
            "reproduce ball-constant twice: {} output files byte-identical",
            a.len()
        ),
    );
    o
}

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored
    let started = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "Pohozaev identities", criterion_1()),
        (2, "energy scaling identity", criterion_2()),
        (3, "scalar-oracle equivalence", criterion_3()),
        (4, "exponential decay", criterion_4()),
    ];
    let s = sweeps();
    results.push((5, "boundary localization", criterion_5(&s)));
    results.push((6, "Hopf reproduction", criterion_6(&s)));
    results.push((7, "regime flip", criterion_7(&s)));
    results.push((8, "two-term expansion", criterion_8(&s)));
    results.push((9, "solver self-consistency", criterion_9()));
    let mut all = true;
    println!();
    for (k, name, o) in &results {
        all &= o.passed;
        println!(
            "criterion {k} {name}: {}",
            if o.passed { "PASS" } else { "FAIL" }
        );
        for l in &o.lines {
            println!("{l}");
        }
    }
    println!(
        "acceptance: {} in {:.1} s",
        if all { "all criteria pass" } else { "FAILURES" },
        started.elapsed().as_secs_f64()
    );
    if !all {
        std::process::exit(1);
    }
}
