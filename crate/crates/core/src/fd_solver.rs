//! Axisymmetric finite-volume solver for the ε-system on annuli and balls.
//!
//! Unknowns live on the nodes of a meridian `(r, θ)` grid; each node owns the
//! control volume cut out of `[r_{i-1/2}, r_{i+1/2}] × [θ_{j-1/2}, θ_{j+1/2}]`
//! with exact measure `r^{n-1} sin^{n-2}θ`. Fluxes vanish through the sphere
//! boundaries (Neumann) and the axis.

use crate::concentration::ConcentrationExponents;
use crate::error::{Error, Result};
use crate::ground_state::RadialProfile;
use crate::linalg::SparseLuSolver;
use crate::params::{
    sphere_area, BoundaryComponent, CoefficientField, DomainSpec, Exponents, Shape,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Inner radius of the excised core of a ball, relative to its radius.
pub const BALL_CORE_FRACTION: f64 = 1e-3;

/// `∫_0^x sin^m θ dθ`.
fn sin_power_integral(m: usize, x: f64) -> f64 {
    match m {
        0 => x,
        1 => 1.0 - x.cos(),
        _ => {
            let mf = m as f64;
            -x.sin().powi(m as i32 - 1) * x.cos() / mf
                + (mf - 1.0) / mf * sin_power_integral(m - 2, x)
        }
    }
}

/// `∫_a^b r^k dr` for integer `k ≥ 0`.
fn radial_power_integral(k: i32, a: f64, b: f64) -> f64 {
    (b.powi(k + 1) - a.powi(k + 1)) / (k as f64 + 1.0)
}

/// Node placement of a meridian grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Uniform,
    /// Radial nodes clustered towards both spheres (4x finer at the ends),
    /// angular nodes clustered exponentially towards the axis `θ = 0`.
    #[default]
    Graded,
}

/// Radial grading amplitude: end spacing is `1 - RADIAL_GRADING` times the mean.
const RADIAL_GRADING: f64 = 0.75;
/// Angular grading rate: last spacing is `e^ANGULAR_GRADING` times the first.
const ANGULAR_GRADING: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeridianGrid {
    pub domain: DomainSpec,
    pub n: usize,
    pub nr: usize,
    pub nt: usize,
    pub spacing: Spacing,
    pub r_min: f64,
    pub r_max: f64,
    /// Smallest radial and angular spacing.
    pub hr: f64,
    pub ht: f64,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    /// Control-volume measure per node (without the `|S^{n-2}|` factor).
    pub vol: Vec<f64>,
    /// Coefficient of the face between `(i, j)` and `(i+1, j)`, index `i * (nt+1) + j`.
    pub radial_face: Vec<f64>,
    /// Coefficient of the face between `(i, j)` and `(i, j+1)`, index `i * nt + j`.
    pub angular_face: Vec<f64>,
}

impl MeridianGrid {
    pub fn nodes(&self) -> usize {
        (self.nr + 1) * (self.nt + 1)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * (self.nt + 1) + j
    }

    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k / (self.nt + 1), k % (self.nt + 1))
    }

    /// `(-L w)` summed over the faces of node `k`, i.e. `Σ coef (w_k - w_nb)`.
    fn flux_sum(&self, w: &[f64], k: usize) -> f64 {
        let (i, j) = self.coords(k);
        let nt = self.nt;
        let mut s = 0.0;
        if i > 0 {
            s += self.radial_face[(i - 1) * (nt + 1) + j] * (w[k] - w[k - (nt + 1)]);
        }
        if i < self.nr {
            s += self.radial_face[i * (nt + 1) + j] * (w[k] - w[k + nt + 1]);
        }
        if j > 0 {
            s += self.angular_face[i * nt + j - 1] * (w[k] - w[k - 1]);
        }
        if j < nt {
            s += self.angular_face[i * nt + j] * (w[k] - w[k + 1]);
        }
        s
    }

    /// Discrete `Δw` per unit volume at every node.
    pub fn laplacian(&self, w: &[f64]) -> Vec<f64> {
        (0..self.nodes())
            .map(|k| -self.flux_sum(w, k) / self.vol[k])
            .collect()
    }

    /// Meridian-plane Cartesian coordinates `(ρ, z)` of a node.
    pub fn planar(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.coords(k);
        (
            self.r[i] * self.theta[j].sin(),
            self.r[i] * self.theta[j].cos(),
        )
    }

    /// Bilinear interpolation of a nodal field at `(r, θ)`, clamped to the grid.
    pub fn interpolate(&self, w: &[f64], r: f64, theta: f64) -> f64 {
        let locate = |nodes: &[f64], x: f64| -> (usize, f64) {
            let last = nodes.len() - 1;
            let x = x.clamp(nodes[0], nodes[last]);
            let i = nodes
                .partition_point(|&t| t <= x)
                .saturating_sub(1)
                .min(last - 1);
            (i, (x - nodes[i]) / (nodes[i + 1] - nodes[i]))
        };
        let (i, fr) = locate(&self.r, r);
        let (j, ft) = locate(&self.theta, theta);
        let w00 = w[self.index(i, j)];
        let w10 = w[self.index(i + 1, j)];
        let w01 = w[self.index(i, j + 1)];
        let w11 = w[self.index(i + 1, j + 1)];
        (1.0 - fr) * ((1.0 - ft) * w00 + ft * w01) + fr * ((1.0 - ft) * w10 + ft * w11)
    }
}

/// Uniformly spaced grid.
pub fn build_grid(domain: &DomainSpec, n: usize, nr: usize, nt: usize) -> Result<MeridianGrid> {
    build_grid_with(domain, n, nr, nt, Spacing::Uniform)
}

pub fn build_grid_with(
    domain: &DomainSpec,
    n: usize,
    nr: usize,
    nt: usize,
    spacing: Spacing,
) -> Result<MeridianGrid> {
    domain.validate()?;
    if nr < 16 || nt < 16 {
        return Err(Error::BadResolution(format!(
            "need at least 16 cells per direction, got {nr}x{nt}"
        )));
    }
    if n != domain.n || n < 3 {
        return Err(Error::InvalidDomain(format!(
            "grid dimension {n} must match the domain's {} and be >= 3",
            domain.n
        )));
    }
    let (r_min, r_max) = match domain.shape {
        Shape::Annulus { inner, outer } => (inner, outer),
        Shape::Ball { radius } => (BALL_CORE_FRACTION * radius, radius),
    };
    let (rmap, tmap): (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) = match spacing {
        Spacing::Uniform => (Box::new(|s| s), Box::new(|s| s)),
        Spacing::Graded => (
            Box::new(|s: f64| s - RADIAL_GRADING * (2.0 * PI * s).sin() / (2.0 * PI)),
            Box::new(|s: f64| ((ANGULAR_GRADING * s).exp() - 1.0) / (ANGULAR_GRADING.exp() - 1.0)),
        ),
    };
    let r: Vec<f64> = (0..=nr)
        .map(|i| match i {
            0 => r_min,
            _ if i == nr => r_max,
            _ => r_min + (r_max - r_min) * rmap(i as f64 / nr as f64),
        })
        .collect();
    let theta: Vec<f64> = (0..=nt)
        .map(|j| match j {
            0 => 0.0,
            _ if j == nt => PI,
            _ => PI * tmap(j as f64 / nt as f64),
        })
        .collect();
    let hr = r
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let ht = theta
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let m = n - 2;
    // faces halfway between nodes; the outermost faces are the domain limits
    let face_r = |i: usize| {
        if i == 0 {
            r_min
        } else if i > nr {
            r_max
        } else {
            0.5 * (r[i - 1] + r[i])
        }
    };
    let face_t = |j: usize| {
        if j == 0 {
            0.0
        } else if j > nt {
            PI
        } else {
            0.5 * (theta[j - 1] + theta[j])
        }
    };
    let rvol: Vec<f64> = (0..=nr)
        .map(|i| radial_power_integral(n as i32 - 1, face_r(i), face_r(i + 1)))
        .collect();
    let rang: Vec<f64> = (0..=nr)
        .map(|i| radial_power_integral(n as i32 - 3, face_r(i), face_r(i + 1)))
        .collect();
    let tvol: Vec<f64> = (0..=nt)
        .map(|j| sin_power_integral(m, face_t(j + 1)) - sin_power_integral(m, face_t(j)))
        .collect();
    let mut vol = Vec::with_capacity((nr + 1) * (nt + 1));
    for i in 0..=nr {
        for j in 0..=nt {
            vol.push(rvol[i] * tvol[j]);
        }
    }
    let mut radial_face = Vec::with_capacity(nr * (nt + 1));
    for i in 0..nr {
        let rf = face_r(i + 1);
        let dr = r[i + 1] - r[i];
        for j in 0..=nt {
            radial_face.push(rf.powi(n as i32 - 1) * tvol[j] / dr);
        }
    }
    let mut angular_face = Vec::with_capacity((nr + 1) * nt);
    for i in 0..=nr {
        for j in 0..nt {
            let tf = face_t(j + 1);
            angular_face.push(rang[i] * tf.sin().powi(m as i32) / (theta[j + 1] - theta[j]));
        }
    }
    let grid = MeridianGrid {
        domain: *domain,
        n,
        nr,
        nt,
        spacing,
        r_min,
        r_max,
        hr,
        ht,
        r,
        theta,
        vol,
        radial_face,
        angular_face,
    };
    let ones = vec![1.0; grid.nodes()];
    let worst = grid
        .laplacian(&ones)
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    if worst > 1e-12 {
        return Err(Error::BadResolution(format!(
            "constant-field Laplacian residual {worst:e}"
        )));
    }
    Ok(grid)
}

/// Coefficients, exponents and domain of one ε-problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemProblem {
    pub domain: DomainSpec,
    pub a: CoefficientField,
    pub b: CoefficientField,
    pub c: CoefficientField,
    pub exponents: Exponents,
}

impl SystemProblem {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.domain.n != self.exponents.n() {
            return Err(Error::Precondition(format!(
                "domain dimension {} differs from exponent dimension {}",
                self.domain.n,
                self.exponents.n()
            )));
        }
        for f in [&self.a, &self.b, &self.c] {
            f.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub nr: usize,
    pub nt: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    /// Floor of the positivity projection.
    pub clamp: f64,
    /// Threshold on the scale-free energy `c_ε / ε^n` below which a
    /// converged state counts as trivial.
    pub rho: f64,
    pub spacing: Spacing,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            nr: 128,
            nt: 128,
            tol: 1e-9,
            max_iter: 60,
            max_backtracks: 30,
            clamp: 1e-14,
            rho: 1e-6,
            spacing: Spacing::Graded,
        }
    }
}

/// Coefficient values sampled at the grid radii.
struct NodeCoefficients {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl NodeCoefficients {
    fn new(problem: &SystemProblem, grid: &MeridianGrid) -> Result<Self> {
        let sample = |f: &CoefficientField| -> Result<Vec<f64>> {
            grid.r.iter().map(|&r| f.radial(r).map(|v| v.0)).collect()
        };
        Ok(NodeCoefficients {
            a: sample(&problem.a)?,
            b: sample(&problem.b)?,
            c: sample(&problem.c)?,
        })
    }
}

fn pos_pow(s: f64, e: f64) -> f64 {
    s.max(0.0).powf(e)
}

/// Residual assembler for the interleaved state `[u_0, v_0, u_1, v_1, ...]`.
struct Discretization<'a> {
    grid: &'a MeridianGrid,
    coef: NodeCoefficients,
    p: f64,
    q: f64,
    eps2: f64,
}

impl<'a> Discretization<'a> {
    fn new(problem: &SystemProblem, grid: &'a MeridianGrid, eps: f64) -> Result<Self> {
        Ok(Discretization {
            grid,
            coef: NodeCoefficients::new(problem, grid)?,
            p: problem.exponents.p(),
            q: problem.exponents.q(),
            eps2: eps * eps,
        })
    }

    fn split(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            x.iter().step_by(2).copied().collect(),
            x.iter().skip(1).step_by(2).copied().collect(),
        )
    }

    /// Node-gather residual, per unit volume.
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let (u, v) = Self::split(x);
        let mut out = vec![0.0; x.len()];
        for k in 0..g.nodes() {
            let i = k / (g.nt + 1);
            let (a, b, c) = (self.coef.a[i], self.coef.b[i], self.coef.c[i]);
            out[2 * k] =
                self.eps2 * g.flux_sum(&u, k) / g.vol[k] + c * u[k] - b * pos_pow(v[k], self.q);
            out[2 * k + 1] =
                self.eps2 * g.flux_sum(&v, k) / g.vol[k] + c * v[k] - a * pos_pow(u[k], self.p);
        }
        out
    }

    /// Face-scatter residual, coded independently of [`Self::residual`].
    fn residual_by_faces(&self, x: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let nt = g.nt;
        let mut flux = vec![0.0; x.len()];
        let mut scatter = |k0: usize, k1: usize, w: f64| {
            for comp in 0..2 {
                let d = w * (x[2 * k0 + comp] - x[2 * k1 + comp]);
                flux[2 * k0 + comp] += d;
                flux[2 * k1 + comp] -= d;
            }
        };
        for i in 0..g.nr {
            for j in 0..=nt {
                scatter(
                    i * (nt + 1) + j,
                    (i + 1) * (nt + 1) + j,
                    g.radial_face[i * (nt + 1) + j],
                );
            }
        }
        for i in 0..=g.nr {
            for j in 0..nt {
                scatter(
                    i * (nt + 1) + j,
                    i * (nt + 1) + j + 1,
                    g.angular_face[i * nt + j],
                );
            }
        }
        let mut out = vec![0.0; x.len()];
        for i in 0..=g.nr {
            for j in 0..=nt {
                let k = i * (nt + 1) + j;
                let (u, v) = (x[2 * k], x[2 * k + 1]);
                out[2 * k] = self.eps2 * flux[2 * k] / g.vol[k] + self.coef.c[i] * u
                    - self.coef.b[i] * pos_pow(v, self.q);
                out[2 * k + 1] = self.eps2 * flux[2 * k + 1] / g.vol[k] + self.coef.c[i] * v
                    - self.coef.a[i] * pos_pow(u, self.p);
            }
        }
        out
    }

    fn jacobian(&self, x: &[f64]) -> Vec<(usize, usize, f64)> {
        let g = self.grid;
        let nt = g.nt;
        let mut e = Vec::with_capacity(12 * g.nodes());
        for k in 0..g.nodes() {
            let (i, j) = g.coords(k);
            let s = self.eps2 / g.vol[k];
            let mut nbrs: [(usize, f64); 4] = [(usize::MAX, 0.0); 4];
            if i > 0 {
                nbrs[0] = (k - (nt + 1), g.radial_face[(i - 1) * (nt + 1) + j]);
            }
            if i < g.nr {
                nbrs[1] = (k + nt + 1, g.radial_face[i * (nt + 1) + j]);
            }
            if j > 0 {
                nbrs[2] = (k - 1, g.angular_face[i * nt + j - 1]);
            }
            if j < nt {
                nbrs[3] = (k + 1, g.angular_face[i * nt + j]);
            }
            let diag: f64 = nbrs
                .iter()
                .filter(|n| n.0 != usize::MAX)
                .map(|n| n.1)
                .sum::<f64>()
                * s
                + self.coef.c[i];
            let (u, v) = (x[2 * k], x[2 * k + 1]);
            for comp in 0..2 {
                let row = 2 * k + comp;
                e.push((row, row, diag));
                for &(nb, w) in &nbrs {
                    if nb != usize::MAX {
                        e.push((row, 2 * nb + comp, -s * w));
                    }
                }
            }
            e.push((
                2 * k,
                2 * k + 1,
                -self.q * self.coef.b[i] * pos_pow(v, self.q - 1.0),
            ));
            e.push((
                2 * k + 1,
                2 * k,
                -self.p * self.coef.a[i] * pos_pow(u, self.p - 1.0),
            ));
        }
        e
    }

    /// `|S^{n-2}| [ε² Σ_faces coef Δu Δv + Σ vol (c uv - a F(u) - b G(v))]`.
    fn energy(&self, u: &[f64], v: &[f64]) -> f64 {
        let g = self.grid;
        let nt = g.nt;
        let mut grad = 0.0;
        for i in 0..g.nr {
            for j in 0..=nt {
                let k = i * (nt + 1) + j;
                grad += g.radial_face[k] * (u[k + nt + 1] - u[k]) * (v[k + nt + 1] - v[k]);
            }
        }
        for i in 0..=g.nr {
            for j in 0..nt {
                let k = i * (nt + 1) + j;
                grad += g.angular_face[i * nt + j] * (u[k + 1] - u[k]) * (v[k + 1] - v[k]);
            }
        }
        let mut bulk = 0.0;
        for k in 0..g.nodes() {
            let i = k / (nt + 1);
            bulk += g.vol[k]
                * (self.coef.c[i] * u[k] * v[k]
                    - self.coef.a[i] * pos_pow(u[k], self.p + 1.0) / (self.p + 1.0)
                    - self.coef.b[i] * pos_pow(v[k], self.q + 1.0) / (self.q + 1.0));
        }
        sphere_area(g.n - 2) * (self.eps2 * grad + bulk)
    }
}

fn max_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn interleave(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).flat_map(|(a, b)| [*a, *b]).collect()
}

/// Grid location of a maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub i: usize,
    pub j: usize,
    pub r: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSolution {
    pub grid: MeridianGrid,
    pub exponents: Exponents,
    pub eps: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub residual_norm: f64,
    pub c_eps: f64,
    pub argmax_u: GridPoint,
    pub argmax_v: GridPoint,
    pub newton_iterations: usize,
}

impl DiscreteSolution {
    /// Distance from the maximum of `u` to the boundary.
    pub fn argmax_distance_to_boundary(&self) -> f64 {
        self.grid.domain.distance_to_boundary(self.argmax_u.r)
    }

    /// Grid-index distance between the maxima of `u` and `v`.
    pub fn argmax_separation_cells(&self) -> usize {
        self.argmax_u
            .i
            .abs_diff(self.argmax_v.i)
            .max(self.argmax_u.j.abs_diff(self.argmax_v.j))
    }

    /// Boundary component the maximum of `u` sits on, if any.
    pub fn argmax_component(&self) -> Option<BoundaryComponent> {
        let comps = self.grid.domain.boundary_components();
        if self.argmax_u.i == 0 && matches!(self.grid.domain.shape, Shape::Annulus { .. }) {
            comps.into_iter().find(|c| c.index == 0)
        } else if self.argmax_u.i == self.grid.nr {
            comps.into_iter().last()
        } else {
            None
        }
    }

    /// Fraction of `∫ u²` (meridian measure) within distance `radius` of the maximum of `u`.
    pub fn mass_fraction_near_argmax(&self, radius: f64) -> f64 {
        let g = &self.grid;
        let k0 = g.index(self.argmax_u.i, self.argmax_u.j);
        let (rho0, z0) = g.planar(k0);
        let (mut near, mut total) = (0.0, 0.0);
        for k in 0..g.nodes() {
            let w = g.vol[k] * self.u[k] * self.u[k];
            let (rho, z) = g.planar(k);
            total += w;
            if ((rho - rho0).powi(2) + (z - z0).powi(2)).sqrt() <= radius {
                near += w;
            }
        }
        near / total
    }
}

fn argmax(grid: &MeridianGrid, w: &[f64]) -> GridPoint {
    let mut best = 0;
    for k in 1..w.len() {
        if w[k] > w[best] {
            best = k;
        }
    }
    let (i, j) = grid.coords(best);
    GridPoint {
        i,
        j,
        r: grid.r[i],
        theta: grid.theta[j],
    }
}

/// The limit profile planted at `x0` with spatial scale `ε/√c(x0)` and the
/// amplitudes of the frozen-coefficient problem there. `x0` is a point of the
/// meridian half-plane given as `(r, θ)`.
pub fn initial_guess_bump(
    prof: &RadialProfile,
    problem: &SystemProblem,
    x0: (f64, f64),
    eps: f64,
    grid: &MeridianGrid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("eps = {eps} must be positive")));
    }
    let (r0, t0) = x0;
    let a0 = problem.a.radial(r0)?.0;
    let b0 = problem.b.radial(r0)?.0;
    let c0 = problem.c.radial(r0)?.0;
    let (amp_u, amp_v) = ConcentrationExponents::new(&prof.exponents).amplitudes(a0, b0, c0);
    let scale = c0.sqrt() / eps;
    let (rho0, z0) = (r0 * t0.sin(), r0 * t0.cos());
    let mut u = Vec::with_capacity(grid.nodes());
    let mut v = Vec::with_capacity(grid.nodes());
    for k in 0..grid.nodes() {
        let (rho, z) = grid.planar(k);
        let d = ((rho - rho0).powi(2) + (z - z0).powi(2)).sqrt();
        let (uu, vv) = prof.sample(d * scale);
        u.push((amp_u * uu).max(1e-14));
        v.push((amp_v * vv).max(1e-14));
    }
    Ok((u, v))
}

/// Residual of a state in the ε-system, per unit volume, interleaved.
pub fn system_residual(
    problem: &SystemProblem,
    grid: &MeridianGrid,
    eps: f64,
    u: &[f64],
    v: &[f64],
) -> Result<Vec<f64>> {
    Ok(Discretization::new(problem, grid, eps)?.residual(&interleave(u, v)))
}

/// Same residual as [`system_residual`], assembled face by face.
pub fn system_residual_by_faces(
    problem: &SystemProblem,
    grid: &MeridianGrid,
    eps: f64,
    u: &[f64],
    v: &[f64],
) -> Result<Vec<f64>> {
    Ok(Discretization::new(problem, grid, eps)?.residual_by_faces(&interleave(u, v)))
}

/// Jacobian of [`system_residual`] applied to the direction `(du, dv)`.
pub fn jacobian_action(
    problem: &SystemProblem,
    grid: &MeridianGrid,
    eps: f64,
    state: (&[f64], &[f64]),
    dir: (&[f64], &[f64]),
) -> Result<Vec<f64>> {
    let d = Discretization::new(problem, grid, eps)?;
    let x = interleave(state.0, state.1);
    let dx = interleave(dir.0, dir.1);
    Ok(crate::linalg::triplet_matvec(x.len(), &d.jacobian(&x), &dx))
}

/// Discrete energy of the state `(u, v)` at `eps`.
pub fn discrete_energy(
    problem: &SystemProblem,
    grid: &MeridianGrid,
    eps: f64,
    u: &[f64],
    v: &[f64],
) -> Result<f64> {
    Ok(Discretization::new(problem, grid, eps)?.energy(u, v))
}

pub fn solve_system(
    problem: &SystemProblem,
    grid: &MeridianGrid,
    eps: f64,
    init: (Vec<f64>, Vec<f64>),
    opts: &SolverOptions,
) -> Result<DiscreteSolution> {
    problem.validate()?;
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("eps = {eps} must be positive")));
    }
    if init.0.len() != grid.nodes() || init.1.len() != grid.nodes() {
        return Err(Error::Precondition(
            "initial guess does not match the grid".into(),
        ));
    }
    let disc = Discretization::new(problem, grid, eps)?;
    let mut x = interleave(&init.0, &init.1);
    for xi in x.iter_mut() {
        *xi = xi.max(0.0);
    }
    let (x, f, iterations) = newton(&disc, x, opts)?;
    let (u, v) = Discretization::split(&x);
    let umax = u.iter().cloned().fold(0.0, f64::max);
    let umin = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_eps = disc.energy(&u, &v);
    if umax < 1e-6 {
        return Err(Error::CollapsedToTrivial(format!("max u = {umax:e}")));
    }
    if (umax - umin) <= 1e-3 * umax {
        return Err(Error::CollapsedToTrivial(format!(
            "near-constant state, u in [{umin}, {umax}]"
        )));
    }
    if c_eps / eps.powi(grid.n as i32) <= opts.rho {
        return Err(Error::CollapsedToTrivial(format!(
            "energy {c_eps:e} not above rho * eps^n, rho = {:e}",
            opts.rho
        )));
    }
    if u.iter().chain(&v).any(|w| !(*w > 0.0)) {
        return Err(Error::NonPositive(
            "converged state has non-positive entries".into(),
        ));
    }
    Ok(DiscreteSolution {
        grid: grid.clone(),
        exponents: problem.exponents,
        eps,
        argmax_u: argmax(grid, &u),
        argmax_v: argmax(grid, &v),
        residual_norm: max_norm(&f),
        c_eps,
        u,
        v,
        newton_iterations: iterations,
    })
}

/// Damped Newton with an `L²` backtracking line search.
fn newton(
    disc: &Discretization,
    mut x: Vec<f64>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let mut lu = SparseLuSolver::new(x.len());
    let mut f = disc.residual(&x);
    let mut iterations = 0;
    loop {
        let jac = disc.jacobian(&x);
        if converged(&f, &roundoff_scale(&jac, &x), opts.tol) {
            return Ok((x, f, iterations));
        }
        if iterations >= opts.max_iter {
            return Err(Error::NewtonDivergence(format!(
                "no convergence in {} iterations (residual {:e})",
                opts.max_iter,
                max_norm(&f)
            )));
        }
        iterations += 1;
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let dx = lu.solve(&jac, &neg)?;
        let f_norm = l2_norm(&f);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = x
                .iter()
                .zip(&dx)
                .map(|(xi, di)| (xi + t * di).max(opts.clamp))
                .collect();
            let ft = disc.residual(&trial);
            if l2_norm(&ft) < (1.0 - 1e-4 * t) * f_norm || max_norm(&ft) <= opts.tol {
                x = trial;
                f = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDivergence(format!(
                "residual {:e} did not decrease after {} backtracks",
                max_norm(&f),
                opts.max_backtracks
            )));
        }
    }
}

/// Per-row magnitude `Σ_j |J_kj x_j|` of the terms that cancel in the residual.
fn roundoff_scale(jac: &[(usize, usize, f64)], x: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; x.len()];
    for &(i, j, a) in jac {
        s[i] += (a * x[j]).abs();
    }
    s
}

/// `|F_k| ≤ tol`, relaxed to the rounding level of row `k` where that level exceeds `tol`.
fn converged(f: &[f64], scale: &[f64], tol: f64) -> bool {
    const ROUNDING_FACTOR: f64 = 16.0 * f64::EPSILON;
    f.iter()
        .zip(scale)
        .all(|(fk, sk)| fk.abs() <= tol.max(ROUNDING_FACTOR * sk))
}

/// Previous solution dilated about its maximum by `factor > 1` (in the
/// meridian plane) and resampled on the same grid.
fn dilate(sol: &DiscreteSolution, factor: f64) -> (Vec<f64>, Vec<f64>) {
    let g = &sol.grid;
    let (rc, tc) = (sol.argmax_u.r, sol.argmax_u.theta);
    let (rho_c, z_c) = (rc * tc.sin(), rc * tc.cos());
    let mut u = Vec::with_capacity(g.nodes());
    let mut v = Vec::with_capacity(g.nodes());
    for k in 0..g.nodes() {
        let (rho, z) = g.planar(k);
        let y_rho = (rho_c + (rho - rho_c) * factor).abs();
        let y_z = z_c + (z - z_c) * factor;
        let r = (y_rho * y_rho + y_z * y_z).sqrt();
        let t = y_rho.atan2(y_z);
        u.push(g.interpolate(&sol.u, r, t).max(1e-14));
        v.push(g.interpolate(&sol.v, r, t).max(1e-14));
    }
    (u, v)
}

/// Solves along a decreasing `eps` sequence, starting from a bump planted at
/// the pole `θ = 0` of `component` and warm-starting each later solve from
/// the previous solution.
pub fn continuation_sweep(
    problem: &SystemProblem,
    eps_seq: &[f64],
    prof: &RadialProfile,
    component: &BoundaryComponent,
    opts: &SolverOptions,
) -> Result<Vec<DiscreteSolution>> {
    problem.validate()?;
    if eps_seq.is_empty() {
        return Err(Error::Precondition("empty eps sequence".into()));
    }
    for w in eps_seq.windows(2) {
        if !(w[1] < w[0]) || w[1] < 0.5 * w[0] {
            return Err(Error::Precondition(format!(
                "eps sequence must decrease with ratio >= 0.5, got {} -> {}",
                w[0], w[1]
            )));
        }
    }
    let grid = build_grid_with(
        &problem.domain,
        problem.domain.n,
        opts.nr,
        opts.nt,
        opts.spacing,
    )?;
    let mut out: Vec<DiscreteSolution> = Vec::with_capacity(eps_seq.len());
    for &eps in eps_seq {
        let sol = match out.last() {
            None => initial_guess_bump(prof, problem, (component.radius, 0.0), eps, &grid)
                .and_then(|init| solve_system(problem, &grid, eps, init, opts)),
            Some(prev) => continue_to(problem, &grid, prof, prev, eps, opts, 0),
        }
        .map_err(|e| Error::AtEpsilon {
            eps,
            source: Box::new(e),
        })?;
        out.push(sol);
    }
    Ok(out)
}

const MAX_SUBSTEP_DEPTH: usize = 4;

/// Warm-started solve at `eps` from `prev`. A failed step is retried through
/// an intermediate (unrecorded) value of ε, and as a last resort from a fresh
/// bump planted at the previous maximum.
fn continue_to(
    problem: &SystemProblem,
    grid: &MeridianGrid,
    prof: &RadialProfile,
    prev: &DiscreteSolution,
    eps: f64,
    opts: &SolverOptions,
    depth: usize,
) -> Result<DiscreteSolution> {
    let first = solve_system(problem, grid, eps, dilate(prev, prev.eps / eps), opts);
    let err = match first {
        Ok(sol) => return Ok(sol),
        Err(e) if e.is_validation() => return Err(e),
        Err(e) => e,
    };
    if depth < MAX_SUBSTEP_DEPTH {
        let mid = (prev.eps * eps).sqrt();
        if let Ok(m) = continue_to(problem, grid, prof, prev, mid, opts, depth + 1) {
            if let Ok(sol) = continue_to(problem, grid, prof, &m, eps, opts, depth + 1) {
                return Ok(sol);
            }
        }
    }
    if depth == 0 {
        let at = (prev.argmax_u.r, prev.argmax_u.theta);
        if let Ok(sol) = initial_guess_bump(prof, problem, at, eps, grid)
            .and_then(|init| solve_system(problem, grid, eps, init, opts))
        {
            return Ok(sol);
        }
    }
    Err(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{solve_limit_ground_state, GroundStateOptions};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_problem(domain: DomainSpec) -> SystemProblem {
        let one = CoefficientField::constant(1.0).unwrap();
        SystemProblem {
            domain,
            a: one.clone(),
            b: one.clone(),
            c: one,
            exponents: Exponents::new(3.0, 3.0, domain.n).unwrap(),
        }
    }

    #[test]
    fn sin_power_recurrence() {
        for m in 0..6 {
            let x = 1.1;
            let steps = 200_000;
            let h = x / steps as f64;
            let quad: f64 = (0..steps)
                .map(|k| ((k as f64 + 0.5) * h).sin().powi(m as i32) * h)
                .sum();
            assert_relative_eq!(sin_power_integral(m, x), quad, max_relative = 1e-9);
        }
    }

    #[test]
    fn volumes_sum_to_shell_measure() {
        for n in [3, 5, 9] {
            let d = DomainSpec::annulus(1.0, 3.0, n).unwrap();
            let g = build_grid(&d, n, 32, 24).unwrap();
            let total: f64 = g.vol.iter().sum::<f64>() * sphere_area(n - 2);
            let exact = sphere_area(n - 1) * (3f64.powi(n as i32) - 1.0) / n as f64;
            assert_relative_eq!(total, exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn constant_field_laplacian_vanishes() {
        let d = DomainSpec::annulus(1.0, 3.0, 3).unwrap();
        let g = build_grid(&d, 3, 64, 64).unwrap();
        let lap = g.laplacian(&vec![2.5; g.nodes()]);
        assert!(max_norm(&lap) <= 1e-12);
    }

    #[test]
    fn coarse_grid_rejected() {
        let d = DomainSpec::annulus(1.0, 3.0, 3).unwrap();
        assert!(matches!(
            build_grid(&d, 3, 64, 8),
            Err(Error::BadResolution(_))
        ));
    }

    #[test]
    fn laplacian_of_radial_quadratic() {
        // Δ r² = 2n, exact for the flux form away from the boundary rows
        let n = 5;
        let d = DomainSpec::annulus(1.0, 2.0, n).unwrap();
        let g = build_grid(&d, n, 64, 32).unwrap();
        let w: Vec<f64> = (0..g.nodes()).map(|k| g.r[g.coords(k).0].powi(2)).collect();
        let lap = g.laplacian(&w);
        for k in 0..g.nodes() {
            let (i, _) = g.coords(k);
            if i > 0 && i < g.nr {
                assert!((lap[k] - 2.0 * n as f64).abs() < 1e-3, "{} at {k}", lap[k]);
            }
        }
    }

    #[test]
    fn two_residual_codes_agree_and_jacobian_matches() {
        let d = DomainSpec::annulus(1.0, 2.0, 3).unwrap();
        let mut problem = unit_problem(d);
        problem.a = CoefficientField::power(0.5, -1.0).unwrap();
        problem.exponents = Exponents::new(2.0, 3.0, 3).unwrap();
        let g = build_grid(&d, 3, 20, 18).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Vec<f64> = (0..g.nodes()).map(|_| rng.gen_range(0.1..2.0)).collect();
        let v: Vec<f64> = (0..g.nodes()).map(|_| rng.gen_range(0.1..2.0)).collect();
        let r1 = system_residual(&problem, &g, 0.3, &u, &v).unwrap();
        let r2 = system_residual_by_faces(&problem, &g, 0.3, &u, &v).unwrap();
        let scale = max_norm(&r1);
        for (x, y) in r1.iter().zip(&r2) {
            assert!((x - y).abs() <= 1e-12 * scale.max(1.0));
        }
        let du: Vec<f64> = (0..g.nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dv: Vec<f64> = (0..g.nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jv = jacobian_action(&problem, &g, 0.3, (&u, &v), (&du, &dv)).unwrap();
        let h = 1e-6;
        let up: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + h * b).collect();
        let vp: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a + h * b).collect();
        let um: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a - h * b).collect();
        let vm: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a - h * b).collect();
        let fp = system_residual(&problem, &g, 0.3, &up, &vp).unwrap();
        let fm = system_residual(&problem, &g, 0.3, &um, &vm).unwrap();
        let fd: Vec<f64> = fp
            .iter()
            .zip(&fm)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        let diff: Vec<f64> = fd.iter().zip(&jv).map(|(a, b)| a - b).collect();
        assert!(
            l2_norm(&diff) <= 1e-6 * l2_norm(&jv),
            "{}",
            l2_norm(&diff) / l2_norm(&jv)
        );
    }

    #[test]
    fn zero_guess_collapses() {
        let d = DomainSpec::ball(1.0, 3).unwrap();
        let problem = unit_problem(d);
        let g = build_grid(&d, 3, 16, 16).unwrap();
        let z = vec![0.0; g.nodes()];
        assert!(matches!(
            solve_system(&problem, &g, 0.2, (z.clone(), z), &SolverOptions::default()),
            Err(Error::CollapsedToTrivial(_))
        ));
    }

    #[test]
    fn zero_state_has_zero_energy() {
        let d = DomainSpec::ball(1.0, 3).unwrap();
        let problem = unit_problem(d);
        let g = build_grid(&d, 3, 16, 16).unwrap();
        let z = vec![0.0; g.nodes()];
        assert_eq!(discrete_energy(&problem, &g, 0.2, &z, &z).unwrap(), 0.0);
    }

    #[test]
    fn increasing_sequence_rejected() {
        let d = DomainSpec::ball(1.0, 3).unwrap();
        let problem = unit_problem(d);
        let prof = solve_limit_ground_state(
            &problem.exponents,
            &GroundStateOptions {
                cells: 1000,
                ..Default::default()
            },
        )
        .unwrap();
        let comp = d.boundary_components()[0];
        let r = continuation_sweep(
            &problem,
            &[0.1, 0.2],
            &prof,
            &comp,
            &SolverOptions::default(),
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn ball_spike_sits_on_the_boundary_pole() {
        let d = DomainSpec::ball(1.0, 3).unwrap();
        let problem = unit_problem(d);
        let prof = solve_limit_ground_state(
            &problem.exponents,
            &GroundStateOptions {
                cells: 1000,
                ..Default::default()
            },
        )
        .unwrap();
        let opts = SolverOptions {
            nr: 64,
            nt: 64,
            ..Default::default()
        };
        let g = build_grid(&d, 3, opts.nr, opts.nt).unwrap();
        let init = initial_guess_bump(&prof, &problem, (1.0, 0.0), 0.2, &g).unwrap();
        let sol = solve_system(&problem, &g, 0.2, init, &opts).unwrap();
        assert!(sol.residual_norm <= 1e-9);
        assert_eq!((sol.argmax_u.i, sol.argmax_u.j), (g.nr, 0));
        assert!(sol.u.iter().all(|&x| x > 0.0));
        assert!(sol.c_eps > 0.0);
        let again = system_residual_by_faces(&problem, &g, 0.2, &sol.u, &sol.v).unwrap();
        assert!(max_norm(&again) <= 1e-9 + 1e-12);
    }
}
