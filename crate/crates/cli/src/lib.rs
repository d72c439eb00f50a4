//! Command-line front end: configuration merging, subcommands, output files
//! and exit codes.

pub mod config;

use config::{Resolved, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use spikeforge::concentration::{lambda_value, predict_concentration, rescale_profile, Regime};
use spikeforge::experiments::{
    preset_bundles, regime_classify, run_experiment_with_profile, ExperimentReport, SweepRecord,
};
use spikeforge::fd_solver::continuation_sweep;
use spikeforge::ground_state::{
    energy_i_infinity, half_space_moments, solve_limit_ground_state, solve_scalar_ground_state,
    verify_pohozaev, PohozaevReport, RadialProfile,
};
use spikeforge::output::{
    profile_csv, profile_header, report_files, sci, solution_csv, stamped_json, svg_line_plot,
    Provenance, Series,
};
use spikeforge::Error;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_THRESHOLD: i32 = 4;

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Error raised by the toolkit or by configuration handling.
    Error(Error),
    /// Run completed but a configured acceptance threshold was missed.
    Threshold(String),
    /// Run completed but no sweep converged.
    NoConvergence(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Error(e) if e.is_validation() => EXIT_VALIDATION,
            Failure::Error(_) | Failure::NoConvergence(_) => EXIT_SOLVER,
            Failure::Threshold(_) => EXIT_THRESHOLD,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Error(e) => e.kind(),
            Failure::Threshold(_) => "ThresholdFailure",
            Failure::NoConvergence(_) => "NoConvergence",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Error(e) => e.to_string(),
            Failure::Threshold(m) | Failure::NoConvergence(m) => m.clone(),
        }
    }

    fn eps(&self) -> Option<f64> {
        match self {
            Failure::Error(Error::AtEpsilon { eps, .. }) => Some(*eps),
            _ => None,
        }
    }
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    version: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<&'a str>,
}

/// Machine-readable description of a failure.
pub fn error_json(f: &Failure, config_hash: Option<&str>) -> String {
    serde_json::to_string(&ErrorJson {
        error: f.kind(),
        message: f.message(),
        exit_code: f.exit_code(),
        eps: f.eps(),
        version: spikeforge::output::VERSION,
        config_hash,
    })
    .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", f.kind()))
}

/// Subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GroundState,
    Moments,
    Lambda,
    Predict,
    Solve,
    Sweep,
    Reproduce,
    VerifyIdentities,
}

/// Worker count from `SPIKEFORGE_THREADS`, defaulting to the available parallelism.
pub fn thread_count() -> Result<usize, Error> {
    match std::env::var("SPIKEFORGE_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Format(format!(
                "SPIKEFORGE_THREADS = '{s}' is not a positive integer"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}

struct Ctx {
    res: Resolved,
    prov: Provenance,
    out: PathBuf,
    threads: usize,
}

impl Ctx {
    fn write(&self, name: &str, body: &str) -> Result<(), Error> {
        std::fs::write(self.out.join(name), body)
            .map_err(|e| Error::Io(format!("{}: {e}", self.out.join(name).display())))
    }
}

/// Runs one subcommand; returns the process exit code. Human-readable output
/// goes to stdout, the error JSON of a failure to stderr and `error.json`.
pub fn execute(cmd: Command, cfg: RunConfig) -> i32 {
    let mut hash: Option<String> = None;
    let mut out: Option<PathBuf> = None;
    let result = (|| -> Result<(), Failure> {
        let res = cfg.resolve(cmd)?;
        let prov = Provenance::new(res.hash()?);
        hash = Some(prov.config_hash.clone());
        std::fs::create_dir_all(&res.out)
            .map_err(|e| Error::Io(format!("{}: {e}", res.out.display())))?;
        out = Some(res.out.clone());
        let ctx = Ctx {
            out: res.out.clone(),
            threads: thread_count()?,
            res,
            prov,
        };
        match cmd {
            Command::GroundState => cmd_ground_state(&ctx),
            Command::Moments => cmd_moments(&ctx),
            Command::Lambda => cmd_lambda(&ctx),
            Command::Predict => cmd_predict(&ctx),
            Command::Solve => cmd_solve(&ctx),
            Command::Sweep => cmd_sweep(&ctx),
            Command::Reproduce => cmd_reproduce(&ctx),
            Command::VerifyIdentities => cmd_verify(&ctx),
        }
    })();
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let js = error_json(&f, hash.as_deref());
            eprintln!("{js}");
            if let Some(dir) = out {
                let _ = std::fs::write(dir.join("error.json"), format!("{js}\n"));
            }
            f.exit_code()
        }
    }
}

fn profile(ctx: &Ctx) -> Result<RadialProfile, Error> {
    solve_limit_ground_state(&ctx.res.exponents()?, &ctx.res.ground_state)
}

#[derive(Serialize)]
struct PohozaevFile {
    threshold: f64,
    passed: bool,
    report: PohozaevReport,
}

fn cmd_ground_state(ctx: &Ctx) -> Result<(), Failure> {
    let prof = profile(ctx)?;
    let report = verify_pohozaev(&prof)?;
    let threshold = ctx.res.thresholds.pohozaev;
    let passed = report.max_residual() <= threshold;
    ctx.write("profile.csv", &profile_csv(&prof, &ctx.prov))?;
    ctx.write(
        "profile.json",
        &stamped_json(&profile_header(&prof), &ctx.prov)?,
    )?;
    ctx.write(
        "pohozaev.json",
        &stamped_json(
            &PohozaevFile {
                threshold,
                passed,
                report,
            },
            &ctx.prov,
        )?,
    )?;
    println!(
        "U(0) = {}  V(0) = {}  I = {}  max Pohozaev residual = {:e}",
        prof.u[0],
        prof.v[0],
        energy_i_infinity(&prof),
        report.max_residual()
    );
    if passed {
        Ok(())
    } else {
        Err(Failure::Threshold(format!(
            "Pohozaev residual {:e} above {threshold:e}",
            report.max_residual()
        )))
    }
}

fn cmd_moments(ctx: &Ctx) -> Result<(), Failure> {
    let prof = profile(ctx)?;
    let m = half_space_moments(&prof)?;
    let body = stamped_json(&m, &ctx.prov)?;
    ctx.write("moments.json", &body)?;
    print!("{body}");
    Ok(())
}

/// `Λ` along the last axis across the radial extent.
fn lambda_curve(ctx: &Ctx, samples: usize) -> Result<Vec<(f64, f64)>, Error> {
    let pb = ctx.res.problem()?;
    let (lo, hi) = pb.problem.domain.radial_extent();
    let lo = if lo > 0.0 { lo } else { 1e-3 * hi };
    let n = pb.problem.domain.n;
    (0..samples)
        .map(|k| {
            let r = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
            let mut x = vec![0.0; n];
            x[n - 1] = r;
            let p = &pb.problem;
            Ok((r, lambda_value(&p.a, &p.b, &p.c, &x, &p.exponents)?))
        })
        .collect()
}

#[derive(Serialize)]
struct LambdaFile {
    lambda_exponent: Option<f64>,
    classified: Option<spikeforge::experiments::PredictedRegime>,
    samples: Vec<(f64, f64)>,
}

fn cmd_lambda(ctx: &Ctx) -> Result<(), Failure> {
    let pb = ctx.res.problem()?;
    let curve = lambda_curve(ctx, ctx.res.samples)?;
    let exp = pb.problem.exponents;
    let (e, class) = match pb.weights {
        Some((al, be)) => (
            Some(spikeforge::experiments::lambda_exponent(al, be, &exp)),
            Some(regime_classify(al, be, &exp)),
        ),
        None => (None, None),
    };
    let mut csv = format!(
        "# spikeforge {} config_hash {}\nr,lambda\n",
        ctx.prov.version, ctx.prov.config_hash
    );
    for (r, l) in &curve {
        csv.push_str(&format!("{},{}\n", sci(*r), sci(*l)));
    }
    ctx.write("lambda.csv", &csv)?;
    ctx.write(
        "lambda.json",
        &stamped_json(
            &LambdaFile {
                lambda_exponent: e,
                classified: class,
                samples: curve.clone(),
            },
            &ctx.prov,
        )?,
    )?;
    ctx.write(
        "lambda.svg",
        &svg_line_plot(
            &format!("Lambda along the radius ({})", pb.id),
            "|x|",
            "Lambda",
            &[Series {
                label: "Lambda".into(),
                points: curve,
                markers: false,
            }],
            &ctx.prov,
        ),
    )?;
    if let (Some(e), Some(c)) = (e, class) {
        println!("E = {e}  classified {c:?}");
    }
    Ok(())
}

fn cmd_predict(ctx: &Ctx) -> Result<(), Failure> {
    let pb = ctx.res.problem()?;
    let p = &pb.problem;
    p.validate()?;
    let prof = solve_limit_ground_state(&p.exponents, &ctx.res.ground_state)?;
    let pred = predict_concentration(&p.domain, &p.a, &p.b, &p.c, &p.exponents, &prof)?;
    ctx.write("prediction.json", &stamped_json(&pred, &ctx.prov)?)?;
    let mut series = vec![Series {
        label: "Lambda".into(),
        points: lambda_curve(ctx, ctx.res.samples)?,
        markers: false,
    }];
    if pred.regime == Regime::CurvatureDriven {
        series.push(Series {
            label: "H gamma + eta".into(),
            points: pred
                .components
                .iter()
                .map(|c| (c.radius, c.h_gamma_plus_eta))
                .collect(),
            markers: true,
        });
    }
    ctx.write(
        "lambda.svg",
        &svg_line_plot(
            &format!("Concentration functional ({})", pb.id),
            "|x|",
            "value",
            &series,
            &ctx.prov,
        ),
    )?;
    println!(
        "{:?}: predicted components {:?}",
        pred.regime,
        pred.predicted_components()
    );
    Ok(())
}

#[derive(Serialize)]
struct SolutionMeta {
    preset: String,
    start_component: usize,
    nr: usize,
    nt: usize,
    record: SweepRecord,
}

fn cmd_solve(ctx: &Ctx) -> Result<(), Failure> {
    let pb = ctx.res.problem()?;
    let p = &pb.problem;
    p.validate()?;
    let eps = *ctx
        .res
        .eps
        .first()
        .ok_or_else(|| Error::Precondition("solve needs an eps value".into()))?;
    let comp = p
        .domain
        .boundary_components()
        .into_iter()
        .find(|c| c.index == ctx.res.component)
        .ok_or_else(|| {
            Error::Precondition(format!(
                "domain has no boundary component {}",
                ctx.res.component
            ))
        })?;
    let prof = solve_limit_ground_state(&p.exponents, &ctx.res.ground_state)?;
    let sol = continuation_sweep(p, &[eps], &prof, &comp, &ctx.res.solver)?
        .pop()
        .expect("one eps value");
    ctx.write("solution.csv", &solution_csv(&sol, &ctx.prov))?;
    let record = SweepRecord::from_solution(&sol, p)?;
    ctx.write(
        "solution.json",
        &stamped_json(
            &SolutionMeta {
                preset: pb.id.clone(),
                start_component: comp.index,
                nr: sol.grid.nr,
                nt: sol.grid.nt,
                record: record.clone(),
            },
            &ctx.prov,
        )?,
    )?;
    println!(
        "eps = {eps}: argmax at r = {}, theta = {}, c_eps/eps^n = {}",
        record.argmax_r, record.argmax_theta, record.scaled_energy
    );
    Ok(())
}

fn finish_reports(ctx: &Ctx, reports: &[ExperimentReport]) -> Result<(), Failure> {
    for (name, body) in report_files(reports, &ctx.prov)? {
        ctx.write(name, &body)?;
    }
    print!("{}", spikeforge::output::summary_text(reports, &ctx.prov));
    if let Some(r) = reports.iter().find(|r| r.selected.is_none()) {
        return Err(Failure::NoConvergence(format!(
            "no sweep converged for {}",
            r.preset
        )));
    }
    let failed: Vec<String> = reports
        .iter()
        .flat_map(|r| r.verdicts.iter())
        .filter(|v| !v.passed)
        .map(|v| format!("{}: {}", v.preset, v.claim))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Threshold(format!(
            "failed claims: {}",
            failed.join("; ")
        )))
    }
}

fn cmd_sweep(ctx: &Ctx) -> Result<(), Failure> {
    let pb = ctx.res.problem()?;
    if ctx.res.fit && ctx.res.eps.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "expansion fit needs at least 4 eps values, got {}",
            ctx.res.eps.len()
        ))
        .into());
    }
    pb.problem.validate()?;
    let prof = solve_limit_ground_state(&pb.problem.exponents, &ctx.res.ground_state)?;
    let mut report = run_experiment_with_profile(
        &pb,
        &ctx.res.eps,
        &ctx.res.solver,
        &ctx.res.ground_state,
        &prof,
        ctx.threads,
    )?;
    if !ctx.res.fit {
        report.expansion_fit = None;
        report.verdicts.retain(|v| v.claim != "expansion intercept");
    }
    finish_reports(ctx, &[report])
}

fn cmd_reproduce(ctx: &Ctx) -> Result<(), Failure> {
    let id = ctx
        .res
        .preset
        .clone()
        .ok_or_else(|| Error::Precondition("reproduce needs a preset id".into()))?;
    let bundles = preset_bundles(&id)?;
    let mut reports = Vec::new();
    let mut cache: Vec<RadialProfile> = Vec::new();
    for b in &bundles {
        let exp = b.problem.exponents;
        let prof = match cache.iter().find(|p| p.exponents == exp) {
            Some(p) => p.clone(),
            None => {
                let p = solve_limit_ground_state(&exp, &ctx.res.ground_state)?;
                cache.push(p.clone());
                p
            }
        };
        reports.push(run_experiment_with_profile(
            b,
            &ctx.res.eps,
            &ctx.res.solver,
            &ctx.res.ground_state,
            &prof,
            ctx.threads,
        )?);
    }
    finish_reports(ctx, &reports)
}

#[derive(Serialize)]
struct ScalingCase {
    a0: f64,
    b0: f64,
    c0: f64,
    energy: f64,
    lambda_i: f64,
    relative_error: f64,
}

#[derive(Serialize)]
struct OracleCheck {
    max_difference: f64,
    trusted_radius: f64,
    threshold: f64,
    passed: bool,
}

#[derive(Serialize)]
struct IdentitiesFile {
    pohozaev: PohozaevReport,
    pohozaev_refined: PohozaevReport,
    pohozaev_threshold: f64,
    pohozaev_refined_threshold: f64,
    seed: u64,
    scaling: Vec<ScalingCase>,
    scaling_threshold: f64,
    scalar_oracle: Option<OracleCheck>,
    passed: bool,
}

/// Largest difference between two profiles on a shared grid, up to `radius`.
pub fn max_difference_up_to(a: &RadialProfile, b: &RadialProfile, radius: f64) -> f64 {
    a.r.iter()
        .zip(a.u.iter().zip(&a.v))
        .zip(b.u.iter().zip(&b.v))
        .take_while(|((r, _), _)| **r <= radius)
        .map(|((_, (ua, va)), (ub, vb))| (ua - ub).abs().max((va - vb).abs()))
        .fold(0.0, f64::max)
}

fn cmd_verify(ctx: &Ctx) -> Result<(), Failure> {
    let exp = ctx.res.exponents()?;
    let gs = ctx.res.ground_state;
    let th = &ctx.res.thresholds;
    let prof = solve_limit_ground_state(&exp, &gs)?;
    let fine = solve_limit_ground_state(&exp, &gs.refined())?;
    let pz = verify_pohozaev(&prof)?;
    let pz_fine = verify_pohozaev(&fine)?;
    let i_inf = energy_i_infinity(&prof);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.res.seed);
    let mut scaling = Vec::new();
    for _ in 0..ctx.res.samples.min(1000) {
        let (a0, b0, c0): (f64, f64, f64) = (
            rng.gen_range(0.25..=4.0),
            rng.gen_range(0.25..=4.0),
            rng.gen_range(0.25..=4.0),
        );
        let energy = rescale_profile(&prof, a0, b0, c0)?.energy();
        let lambda_i = spikeforge::concentration::lambda_from_values(a0, b0, c0, &exp) * i_inf;
        scaling.push(ScalingCase {
            a0,
            b0,
            c0,
            energy,
            lambda_i,
            relative_error: (energy - lambda_i).abs() / lambda_i.abs(),
        });
    }
    let scalar_oracle = if exp.p() == exp.q() {
        let sc = solve_scalar_ground_state(exp.p(), exp.n(), &gs)?;
        let d = max_difference_up_to(&sc, &prof, sc.trusted_radius);
        Some(OracleCheck {
            max_difference: d,
            trusted_radius: sc.trusted_radius,
            threshold: th.oracle,
            passed: d <= th.oracle,
        })
    } else {
        None
    };
    let passed = pz.max_residual() <= th.pohozaev
        && pz_fine.max_residual() <= th.pohozaev_refined
        && scaling.iter().all(|s| s.relative_error <= th.scaling)
        && scalar_oracle.as_ref().is_none_or(|o| o.passed);
    let file = IdentitiesFile {
        pohozaev: pz,
        pohozaev_refined: pz_fine,
        pohozaev_threshold: th.pohozaev,
        pohozaev_refined_threshold: th.pohozaev_refined,
        seed: ctx.res.seed,
        scaling,
        scaling_threshold: th.scaling,
        scalar_oracle,
        passed,
    };
    ctx.write(
        "pohozaev.json",
        &stamped_json(
            &PohozaevFile {
                threshold: th.pohozaev,
                passed: pz.max_residual() <= th.pohozaev,
                report: pz,
            },
            &ctx.prov,
        )?,
    )?;
    ctx.write("identities.json", &stamped_json(&file, &ctx.prov)?)?;
    let worst_scaling = file
        .scaling
        .iter()
        .map(|s| s.relative_error)
        .fold(0.0, f64::max);
    println!(
        "Pohozaev {:e} (refined {:e}); energy scaling {:e}; scalar oracle {}",
        pz.max_residual(),
        pz_fine.max_residual(),
        worst_scaling,
        file.scalar_oracle
            .as_ref()
            .map(|o| format!("{:e}", o.max_difference))
            .unwrap_or_else(|| "n/a".into())
    );
    if passed {
        Ok(())
    } else {
        Err(Failure::Threshold("identity check above threshold".into()))
    }
}

/// Output directory a config resolves to, for callers that inspect results.
pub fn output_dir(cfg: &RunConfig) -> &Path {
    cfg.output
        .dir
        .as_deref()
        .unwrap_or_else(|| Path::new(config::DEFAULT_OUT))
}
