use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikeforge::concentration::predict_concentration;
use spikeforge::experiments::{energy_expansion_fit, preset_bundles};
use spikeforge::fd_solver::{build_grid_with, continuation_sweep, SolverOptions, Spacing};
use spikeforge::ground_state::{
    half_space_moments, profile_residual, solve_limit_ground_state, weight_zi_sq_zn, weight_zn,
    weight_zn_cubed, GroundStateOptions,
};
use spikeforge::params::{sphere_area, DomainSpec, Exponents};
use spikeforge::Error;

#[test]
fn half_space_reduction_constants_match_monte_carlo() {
    // uniform samples in the unit half ball; radial weight is the indicator of r < 1
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [3usize, 4, 5] {
        let half_ball = 0.5 * sphere_area(n - 1) / n as f64;
        let (mut s1, mut s3, mut st, mut hits) = (0.0, 0.0, 0.0, 0u64);
        while hits < 8_000_000 {
            let z: Vec<f64> = (0..n)
                .map(|k| {
                    if k + 1 == n {
                        rng.gen_range(0.0..1.0)
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect();
            let r2: f64 = z.iter().map(|x| x * x).sum();
            if r2 >= 1.0 {
                continue;
            }
            hits += 1;
            let zn = z[n - 1];
            s1 += zn;
            s3 += zn.powi(3) / r2;
            st += z[0] * z[0] * zn / r2;
        }
        let mean = |s: f64| half_ball * s / hits as f64;
        let radial = 1.0 / (n as f64 + 1.0);
        for (mc, exact) in [
            (mean(s1), weight_zn(n) * radial),
            (mean(s3), weight_zn_cubed(n) * radial),
            (mean(st), weight_zi_sq_zn(n) * radial),
        ] {
            assert!(
                (mc - exact).abs() <= 1e-3 * exact.abs().max(1e-2),
                "n = {n}: {mc} vs {exact}"
            );
        }
    }
}

/// Smallest positive root of the derivative of the spherical Bessel function j1.
fn first_neumann_root() -> f64 {
    let dj1 = |x: f64| {
        let (s, c) = x.sin_cos();
        // j1(x) = sin x / x² - cos x / x
        2.0 * c / (x * x) - 2.0 * s / x.powi(3) + s / x
    };
    let (mut lo, mut hi) = (1.0, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dj1(lo) * dj1(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn ball_neumann_eigenvalue_matches_bessel_root() {
    let k = first_neumann_root();
    assert!((k - 2.0816).abs() < 1e-3);
    let domain = DomainSpec::ball(1.0, 3).unwrap();
    let grid = build_grid_with(&domain, 3, 24, 24, Spacing::Uniform).unwrap();
    let m = grid.nodes();
    // symmetric form V^{1/2} (-Δ) V^{-1/2}
    let mut a = Mat::<f64>::zeros(m, m);
    let mut e = vec![0.0; m];
    for l in 0..m {
        e[l] = 1.0;
        let col = grid.laplacian(&e);
        e[l] = 0.0;
        for (i, x) in col.iter().enumerate() {
            a[(i, l)] = -x * (grid.vol[i] / grid.vol[l]).sqrt();
        }
    }
    let sym = Mat::<f64>::from_fn(m, m, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let ev = sym.self_adjoint_eigenvalues(Side::Lower).unwrap();
    assert!(ev[0].abs() < 1e-8, "constant mode {}", ev[0]);
    let first = ev[1];
    assert!(
        (first - k * k).abs() <= 0.05 * k * k,
        "{first} vs {}",
        k * k
    );
}

#[test]
fn ground_state_is_insensitive_to_the_truncation_radius() {
    let exp = Exponents::new(3.0, 3.0, 3).unwrap();
    let base = GroundStateOptions::default();
    let a = solve_limit_ground_state(&exp, &base).unwrap();
    let b = solve_limit_ground_state(
        &exp,
        &GroundStateOptions {
            r_max: 1.25 * base.r_max,
            cells: (1.25 * base.cells as f64) as usize,
            ..base
        },
    )
    .unwrap();
    assert!((a.u[0] - b.u[0]).abs() <= 1e-6 * a.u[0]);
    assert!(profile_residual(&a) < 1e-6);
}

#[test]
fn predictor_rejects_mismatched_profile() {
    let exp = Exponents::new(3.0, 3.0, 3).unwrap();
    let prof = solve_limit_ground_state(&exp, &GroundStateOptions::default()).unwrap();
    let bundle = preset_bundles("hopf-s1").unwrap().remove(0);
    let other = Exponents::new(2.0, 3.0, 3).unwrap();
    let p = &bundle.problem;
    assert!(matches!(
        predict_concentration(&p.domain, &p.a, &p.b, &p.c, &other, &prof),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn expansion_fit_needs_four_points() {
    let exp = Exponents::new(3.0, 3.0, 3).unwrap();
    let prof = solve_limit_ground_state(&exp, &GroundStateOptions::default()).unwrap();
    let problem = preset_bundles("ball-constant").unwrap().remove(0).problem;
    let opts = SolverOptions {
        nr: 48,
        nt: 48,
        ..SolverOptions::default()
    };
    let comp = problem.domain.boundary_components()[0];
    let sweep = continuation_sweep(&problem, &[0.3, 0.21, 0.15], &prof, &comp, &opts).unwrap();
    assert_eq!(sweep.len(), 3);
    let prediction = predict_concentration(
        &problem.domain,
        &problem.a,
        &problem.b,
        &problem.c,
        &exp,
        &prof,
    )
    .unwrap();
    let moments = half_space_moments(&prof).unwrap();
    assert!(matches!(
        energy_expansion_fit(&sweep, &prediction, &moments, &problem),
        Err(Error::InsufficientData(_))
    ));
}
