//! TOML run configuration, command-line overrides and resolution into a
//! fully specified run.

use crate::Command;
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spikeforge::experiments::{
    constant_preset, preset_bundles, weighted_annulus_preset, ProblemBundle, DEFAULT_EPS,
    PRESET_IDS,
};
use spikeforge::fd_solver::{SolverOptions, Spacing, SystemProblem};
use spikeforge::ground_state::GroundStateOptions;
use spikeforge::params::{CoefficientField, DomainSpec, Exponents};
use spikeforge::Error;
use std::path::{Path, PathBuf};

pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsBlock {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    /// `annulus` or `ball`.
    pub shape: Option<String>,
    pub inner: Option<f64>,
    pub outer: Option<f64>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsBlock {
    /// Form descriptors such as `const(1)`, `pow(0.5,-1)`, `prod(const(2),pow(1,-1))`.
    pub a: Option<String>,
    pub b: Option<String>,
    pub c: Option<String>,
    /// Weighted-annulus weights; exclusive with `a`, `b`, `c`.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub eps: Option<Vec<f64>>,
    pub fit: Option<bool>,
    pub component: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub pohozaev: f64,
    pub pohozaev_refined: f64,
    pub scaling: f64,
    pub oracle: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            pohozaev: 1e-3,
            pohozaev_refined: 2.5e-4,
            scaling: 1e-4,
            oracle: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
}

/// Everything a config file may set. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    /// Random coefficient triples checked by `verify-identities`, or points of the Λ curve.
    pub samples: Option<usize>,
    #[serde(default)]
    pub exponents: ExponentsBlock,
    #[serde(default)]
    pub domain: DomainBlock,
    #[serde(default)]
    pub coefficients: CoefficientsBlock,
    pub ground_state: Option<GroundStateOptions>,
    pub solver: Option<SolverOptions>,
    #[serde(default)]
    pub sweep: SweepBlock,
    pub thresholds: Option<Thresholds>,
    #[serde(default)]
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fills defaults and builds the problem a command needs.
    pub fn resolve(&self, cmd: Command) -> Result<Resolved, Error> {
        let needs_problem = matches!(
            cmd,
            Command::Lambda | Command::Predict | Command::Solve | Command::Sweep
        );
        let explicit_problem = self.domain != DomainBlock::default()
            || self.coefficients != CoefficientsBlock::default();
        if self.preset.is_some()
            && (explicit_problem || self.exponents != ExponentsBlock::default())
        {
            return Err(Error::Precondition(
                "a preset fixes the problem; drop the exponents, domain and coefficient settings"
                    .into(),
            ));
        }
        let problem = match (&self.preset, cmd) {
            (Some(_), Command::Reproduce) => None,
            (None, Command::Reproduce) => {
                return Err(Error::Precondition(format!(
                    "reproduce needs a preset: {}",
                    PRESET_IDS.join(", ")
                )))
            }
            (Some(id), _) => Some(single_bundle(id)?),
            (None, _) if needs_problem || explicit_problem => Some(self.explicit_problem()?),
            (None, _) => None,
        };
        let exponents = match &problem {
            Some(p) => Some(p.problem.exponents),
            None => match (self.exponents.p, self.exponents.q, self.exponents.n) {
                (Some(p), Some(q), Some(n)) => Some(Exponents::new(p, q, n)?),
                _ if cmd == Command::Reproduce => None,
                _ => {
                    return Err(Error::Precondition(
                        "exponents p, q and n are required".into(),
                    ))
                }
            },
        };
        let eps = self.sweep.eps.clone().unwrap_or_else(|| match cmd {
            Command::Solve => vec![0.15],
            _ => DEFAULT_EPS.to_vec(),
        });
        if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::Precondition(format!(
                "eps values must be positive, got {eps:?}"
            )));
        }
        let samples = self.samples.unwrap_or(match cmd {
            Command::VerifyIdentities => 10,
            _ => 201,
        });
        if samples < 2 {
            return Err(Error::Precondition("samples must be at least 2".into()));
        }
        Ok(Resolved {
            command: cmd,
            preset: self.preset.clone(),
            problem,
            exponents,
            ground_state: self.ground_state.unwrap_or_default(),
            solver: self.solver.unwrap_or_default(),
            eps,
            fit: self.sweep.fit.unwrap_or(true),
            component: self.sweep.component.unwrap_or(0),
            thresholds: self.thresholds.unwrap_or_default(),
            seed: self.seed.unwrap_or(0),
            samples,
            out: self
                .output
                .dir
                .clone()
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        })
    }

    fn explicit_problem(&self) -> Result<ProblemBundle, Error> {
        let e = &self.exponents;
        let (Some(p), Some(q), Some(n)) = (e.p, e.q, e.n) else {
            return Err(Error::Precondition(
                "exponents p, q and n are required".into(),
            ));
        };
        let exp = Exponents::new(p, q, n)?;
        let d = &self.domain;
        let domain = match d.shape.as_deref() {
            Some("annulus") | None => {
                if d.radius.is_some() {
                    return Err(Error::InvalidDomain("an annulus has no 'radius'".into()));
                }
                DomainSpec::annulus(
                    d.inner
                        .ok_or_else(|| Error::InvalidDomain("annulus needs 'inner'".into()))?,
                    d.outer
                        .ok_or_else(|| Error::InvalidDomain("annulus needs 'outer'".into()))?,
                    n,
                )?
            }
            Some("ball") => {
                if d.inner.is_some() || d.outer.is_some() {
                    return Err(Error::InvalidDomain("a ball has only a 'radius'".into()));
                }
                DomainSpec::ball(
                    d.radius
                        .ok_or_else(|| Error::InvalidDomain("ball needs 'radius'".into()))?,
                    n,
                )?
            }
            Some(other) => {
                return Err(Error::InvalidDomain(format!(
                    "unknown shape '{other}', expected annulus or ball"
                )))
            }
        };
        let c = &self.coefficients;
        let forms = c.a.is_some() || c.b.is_some() || c.c.is_some();
        match (c.alpha, c.beta) {
            (Some(al), Some(be)) => {
                if forms {
                    return Err(Error::InvalidCoefficient(
                        "give either alpha/beta or a/b/c, not both".into(),
                    ));
                }
                let (inner, outer) = domain.radial_extent();
                if matches!(d.shape.as_deref(), Some("ball")) {
                    return Err(Error::InvalidDomain(
                        "weighted coefficients need an annulus".into(),
                    ));
                }
                weighted_annulus_preset(al, be, &exp, (inner, outer))
            }
            (None, None) => {
                let parse = |s: &Option<String>| -> Result<CoefficientField, Error> {
                    match s {
                        Some(t) => t.parse(),
                        None => CoefficientField::constant(1.0),
                    }
                };
                if !forms {
                    return constant_preset(domain, &exp);
                }
                let problem = SystemProblem {
                    domain,
                    a: parse(&c.a)?,
                    b: parse(&c.b)?,
                    c: parse(&c.c)?,
                    exponents: exp,
                };
                problem.validate()?;
                Ok(ProblemBundle {
                    id: "custom".into(),
                    problem,
                    description: "user-defined coefficients".into(),
                    orbit: None,
                    weights: None,
                })
            }
            _ => Err(Error::InvalidCoefficient(
                "alpha and beta must be given together".into(),
            )),
        }
    }
}

/// A preset id naming exactly one problem, including the sub-ids of
/// multi-problem presets such as `annulus-regime-flip/E=-1`.
pub fn single_bundle(id: &str) -> Result<ProblemBundle, Error> {
    let base = id.split('/').next().unwrap_or(id);
    let bundles = preset_bundles(base)?;
    if bundles.len() == 1 && base == id {
        return Ok(bundles.into_iter().next().expect("one bundle"));
    }
    let ids: Vec<String> = bundles.iter().map(|b| b.id.clone()).collect();
    bundles.into_iter().find(|b| b.id == id).ok_or_else(|| {
        Error::Precondition(format!(
            "preset '{id}' names several problems; choose one of {}",
            ids.join(", ")
        ))
    })
}

/// A fully specified run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub command: Command,
    pub preset: Option<String>,
    pub problem: Option<ProblemBundle>,
    #[serde(skip)]
    exponents: Option<Exponents>,
    pub ground_state: GroundStateOptions,
    pub solver: SolverOptions,
    pub eps: Vec<f64>,
    pub fit: bool,
    pub component: usize,
    pub thresholds: Thresholds,
    pub seed: u64,
    pub samples: usize,
    /// Not part of the hash: where files go does not change them.
    #[serde(skip)]
    pub out: PathBuf,
}

impl Resolved {
    pub fn problem(&self) -> Result<ProblemBundle, Error> {
        self.problem
            .clone()
            .ok_or_else(|| Error::Precondition("this command needs a problem".into()))
    }

    pub fn exponents(&self) -> Result<Exponents, Error> {
        self.exponents
            .ok_or_else(|| Error::Precondition("this command needs exponents".into()))
    }

    /// SHA-256 of the canonical JSON of the resolved run, plus the exponents.
    pub fn hash(&self) -> Result<String, Error> {
        let body = serde_json::to_string(&(self, self.exponents))
            .map_err(|e| Error::Format(e.to_string()))?;
        let digest = Sha256::digest(body.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Flags shared by every subcommand; each overrides the matching config key.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML config file; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Named problem (see `reproduce`).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub q: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// `annulus` or `ball`.
    #[arg(long)]
    pub shape: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub inner: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub outer: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub radius: Option<f64>,
    /// Coefficient form for `a`, e.g. `pow(0.5,-1)`.
    #[arg(long = "coef-a", value_name = "FORM")]
    pub a: Option<String>,
    #[arg(long = "coef-b", value_name = "FORM")]
    pub b: Option<String>,
    #[arg(long = "coef-c", value_name = "FORM")]
    pub c: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Ground-state cells.
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub nr: Option<usize>,
    #[arg(long)]
    pub nt: Option<usize>,
    /// `graded` or `uniform` meridian grid.
    #[arg(long)]
    pub spacing: Option<String>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eps: Option<Vec<f64>>,
    /// Skip the energy expansion fit in `sweep`.
    #[arg(long)]
    pub no_fit: bool,
    /// Boundary component to plant the spike on in `solve`.
    #[arg(long)]
    pub component: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Pohozaev residual threshold.
    #[arg(long)]
    pub pohozaev_threshold: Option<f64>,
}

impl Flags {
    /// Config file (if any) with these flags applied on top.
    pub fn into_config(self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    pub fn apply(self, cfg: &mut RunConfig) -> Result<(), Error> {
        fn set<T>(slot: &mut Option<T>, v: Option<T>) {
            if v.is_some() {
                *slot = v;
            }
        }
        set(&mut cfg.output.dir, self.out);
        set(&mut cfg.preset, self.preset);
        set(&mut cfg.exponents.p, self.p);
        set(&mut cfg.exponents.q, self.q);
        set(&mut cfg.exponents.n, self.n);
        set(&mut cfg.domain.shape, self.shape);
        set(&mut cfg.domain.inner, self.inner);
        set(&mut cfg.domain.outer, self.outer);
        set(&mut cfg.domain.radius, self.radius);
        set(&mut cfg.coefficients.a, self.a);
        set(&mut cfg.coefficients.b, self.b);
        set(&mut cfg.coefficients.c, self.c);
        set(&mut cfg.coefficients.alpha, self.alpha);
        set(&mut cfg.coefficients.beta, self.beta);
        set(&mut cfg.sweep.eps, self.eps);
        set(&mut cfg.sweep.component, self.component);
        if self.no_fit {
            cfg.sweep.fit = Some(false);
        }
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.samples, self.samples);
        if self.cells.is_some() || self.r_max.is_some() {
            let gs = cfg.ground_state.get_or_insert_with(Default::default);
            if let Some(c) = self.cells {
                gs.cells = c;
            }
            if let Some(r) = self.r_max {
                gs.r_max = r;
            }
        }
        if self.nr.is_some() || self.nt.is_some() || self.spacing.is_some() {
            let so = cfg.solver.get_or_insert_with(Default::default);
            if let Some(v) = self.nr {
                so.nr = v;
            }
            if let Some(v) = self.nt {
                so.nt = v;
            }
            if let Some(s) = self.spacing {
                so.spacing = match s.as_str() {
                    "graded" => Spacing::Graded,
                    "uniform" => Spacing::Uniform,
                    other => {
                        return Err(Error::Format(format!(
                            "spacing '{other}' is not graded or uniform"
                        )))
                    }
                };
            }
        }
        if let Some(t) = self.pohozaev_threshold {
            cfg.thresholds.get_or_insert_with(Default::default).pohozaev = t;
        }
        Ok(())
    }
}
