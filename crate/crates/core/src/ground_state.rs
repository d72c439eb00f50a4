//! Radial ground state `(U, V)` of the unit-coefficient limit system
//! `-ΔU + U = V^q`, `-ΔV + V = U^p` on `R^n`, its half-space energy and
//! moment integrals, and the Pohozaev-type identities they satisfy.

use crate::error::{Error, Result};
use crate::linalg::SparseLuSolver;
use crate::params::{sphere_area, Exponents};
use serde::{Deserialize, Serialize};

/// Sampled radial profile on the uniform grid `r_i = i h`, `i = 0..=M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub exponents: Exponents,
    pub r_max: f64,
    pub h: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    /// Max-norm of the discrete residual (finite-difference profiles) or the
    /// shooting bracket spread (shooting profiles).
    pub residual_norm: f64,
    /// Radius up to which the samples are trustworthy; `r_max` except for
    /// shooting profiles, whose trajectories separate in the far tail.
    pub trusted_radius: f64,
}

impl RadialProfile {
    pub fn n(&self) -> usize {
        self.exponents.n()
    }

    pub fn cells(&self) -> usize {
        self.r.len() - 1
    }

    /// Cubic Hermite interpolation of `(U, V)` at radius `s`; zero beyond `r_max`.
    pub fn sample(&self, s: f64) -> (f64, f64) {
        if s >= self.r_max {
            return (0.0, 0.0);
        }
        let s = s.max(0.0);
        let m = self.cells();
        let k = ((s / self.h).floor() as usize).min(m - 1);
        let t = (s - self.r[k]) / self.h;
        let herm = |y0: f64, y1: f64, d0: f64, d1: f64| {
            let t2 = t * t;
            let t3 = t2 * t;
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                + (t3 - 2.0 * t2 + t) * self.h * d0
                + (-2.0 * t3 + 3.0 * t2) * y1
                + (t3 - t2) * self.h * d1
        };
        (
            herm(self.u[k], self.u[k + 1], self.du[k], self.du[k + 1]),
            herm(self.v[k], self.v[k + 1], self.dv[k], self.dv[k + 1]),
        )
    }

    fn check_shape(&self) -> Result<()> {
        let m = self.r.len();
        if m < 8
            || [self.u.len(), self.v.len(), self.du.len(), self.dv.len()]
                .iter()
                .any(|&l| l != m)
        {
            return Err(Error::Format(
                "profile arrays have inconsistent or too short lengths".into(),
            ));
        }
        Ok(())
    }
}

/// Options for the finite-difference ground state solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundStateOptions {
    pub r_max: f64,
    pub cells: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub continuation_step: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            r_max: 20.0,
            cells: 4000,
            tol: 1e-10,
            max_iter: 60,
            continuation_step: 0.25,
        }
    }
}

impl GroundStateOptions {
    pub fn h(&self) -> f64 {
        self.r_max / self.cells as f64
    }

    pub fn refined(&self) -> Self {
        GroundStateOptions {
            cells: self.cells * 2,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0)
            || self.cells < 16
            || !(self.tol > 0.0)
            || !(self.continuation_step > 0.0)
        {
            return Err(Error::Precondition(format!(
                "invalid ground state options {self:?}"
            )));
        }
        Ok(())
    }
}

fn odd_pow(s: f64, e: f64) -> f64 {
    s.signum() * s.abs().powf(e)
}

// ---------------------------------------------------------------------------
// scalar shooting oracle

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    /// `w` crossed zero: `w(0)` too large.
    Over,
    /// `w'` turned positive while `w > 0`: `w(0)` too small.
    Under,
}

struct Trajectory {
    w: Vec<f64>,
    dw: Vec<f64>,
    outcome: Shot,
}

/// Integrates `w'' + (n-1)/r w' - w + w^p = 0`, `w(0) = w0`, `w'(0) = 0` with
/// RK4, recording `(w, w')` at multiples of `h` until the first event.
fn shoot(w0: f64, p: f64, n: usize, h: f64, substeps: usize, r_end: f64) -> Trajectory {
    let nm1 = n as f64 - 1.0;
    let ds = h / substeps as f64;
    let rhs = |r: f64, w: f64, dw: f64| -> (f64, f64) { (dw, -nm1 / r * dw + w - odd_pow(w, p)) };
    let mut w_rec = vec![w0];
    let mut dw_rec = vec![0.0];
    // series start on the first substep: w = w0 + k s^2 / (2n), k = w0 - w0^p
    let k = w0 - w0.powf(p);
    let mut r = ds;
    let mut w = w0 + k * ds * ds / (2.0 * n as f64);
    let mut dw = k * ds / n as f64;
    let mut step = 1usize;
    loop {
        if w <= 0.0 {
            return Trajectory {
                w: w_rec,
                dw: dw_rec,
                outcome: Shot::Over,
            };
        }
        if dw >= 0.0 {
            return Trajectory {
                w: w_rec,
                dw: dw_rec,
                outcome: Shot::Under,
            };
        }
        if step % substeps == 0 {
            w_rec.push(w);
            dw_rec.push(dw);
        }
        if r >= r_end {
            // Unreachable in floating point for a genuine bracket; treat as undershoot.
            return Trajectory {
                w: w_rec,
                dw: dw_rec,
                outcome: Shot::Under,
            };
        }
        let (k1w, k1d) = rhs(r, w, dw);
        let (k2w, k2d) = rhs(r + 0.5 * ds, w + 0.5 * ds * k1w, dw + 0.5 * ds * k1d);
        let (k3w, k3d) = rhs(r + 0.5 * ds, w + 0.5 * ds * k2w, dw + 0.5 * ds * k2d);
        let (k4w, k4d) = rhs(r + ds, w + ds * k3w, dw + ds * k3d);
        w += ds / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        dw += ds / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        r += ds;
        step += 1;
    }
}

/// Positive radial decaying solution of `-Δw + w = w^p` by bisection
/// shooting on `w(0)`, sampled on the grid of `opts`; returned with `U = V = w`.
pub fn solve_scalar_ground_state(
    p: f64,
    n: usize,
    opts: &GroundStateOptions,
) -> Result<RadialProfile> {
    let exponents = Exponents::new(p, p, n)?;
    opts.validate()?;
    let h = opts.h();
    let substeps = ((h / 2.5e-4).ceil() as usize).max(1);
    let r_end = 4.0 * opts.r_max.max(20.0);
    let classify = |w0: f64| shoot(w0, p, n, h, substeps, r_end).outcome;

    let mut lo = 1.0 + 1e-6;
    if classify(lo) != Shot::Under {
        return Err(Error::ShootingFailure(format!(
            "w(0) = {lo} does not undershoot"
        )));
    }
    let mut hi = 2.0;
    while classify(hi) != Shot::Over {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::ShootingFailure(
                "no overshooting w(0) below 1e6".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match classify(mid) {
            Shot::Under => lo = mid,
            Shot::Over => hi = mid,
        }
    }
    if hi - lo > 1e-10 * hi {
        return Err(Error::ShootingFailure(format!(
            "bracket [{lo}, {hi}] did not close"
        )));
    }

    let a = shoot(lo, p, n, h, substeps, r_end);
    let b = shoot(hi, p, n, h, substeps, r_end);
    let m = opts.cells;
    let len = a.w.len().min(b.w.len()).min(m + 1);
    let sep_tol = 1e-10;
    let mut trusted = 0;
    let mut spread: f64 = 0.0;
    while trusted < len {
        let d = (a.w[trusted] - b.w[trusted]).abs();
        if d > sep_tol {
            break;
        }
        spread = spread.max(d);
        trusted += 1;
    }
    if trusted < 2 {
        return Err(Error::ShootingFailure(
            "trajectories separate immediately".into(),
        ));
    }
    let mut w = vec![0.0; m + 1];
    let mut dw = vec![0.0; m + 1];
    for i in 0..trusted {
        w[i] = 0.5 * (a.w[i] + b.w[i]);
        dw[i] = 0.5 * (a.dw[i] + b.dw[i]);
    }
    // Past the separation radius continue with the linearized far field
    // w ~ C r^{-(n-1)/2} e^{-r}, forced to zero at r_max.
    let last = trusted - 1;
    let r_last = last as f64 * h;
    let decay = |r: f64| (r_last / r).powf((n as f64 - 1.0) / 2.0) * (-(r - r_last)).exp();
    for i in trusted..=m {
        let r = i as f64 * h;
        w[i] = w[last] * decay(r);
        dw[i] = -w[i] * (1.0 + (n as f64 - 1.0) / (2.0 * r));
    }
    w[m] = 0.0;

    let r: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
    Ok(RadialProfile {
        exponents,
        r_max: opts.r_max,
        h,
        r,
        u: w.clone(),
        v: w,
        du: dw.clone(),
        dv: dw,
        residual_norm: spread,
        trusted_radius: last as f64 * h,
    })
}

// ---------------------------------------------------------------------------
// finite-difference system

struct RadialSystem {
    p: f64,
    q: f64,
    n: usize,
    h: f64,
    m: usize,
}

/// Fourth-order centered stencil of `-Δ` at node `i`, as `(column, weight)`
/// pairs over the unknowns `0..m`. Values beyond the origin are reflected
/// evenly; `w_M = 0` and `w_{M+1} = -w_{M-1}` at the truncation radius.
fn neg_laplacian_stencil(i: usize, m: usize, n: usize, h: f64) -> [(usize, f64); 5] {
    let h2 = h * h;
    let weights: [f64; 5] = if i == 0 {
        let s = n as f64 / (12.0 * h2);
        [-s, 16.0 * s, -30.0 * s, 16.0 * s, -s]
    } else {
        let r = i as f64 * h;
        let a = (n as f64 - 1.0) / r / (12.0 * h);
        let d2 = [-1.0, 16.0, -30.0, 16.0, -1.0];
        let d1 = [1.0, -8.0, 0.0, 8.0, -1.0];
        let mut w = [0.0; 5];
        for k in 0..5 {
            w[k] = d2[k] / (12.0 * h2) + a * d1[k];
        }
        w
    };
    let mut out = [(usize::MAX, 0.0); 5];
    for (k, &wk) in weights.iter().enumerate() {
        let j = i as isize + k as isize - 2;
        let (col, sign) = if j < 0 {
            ((-j) as usize, 1.0)
        } else if (j as usize) < m {
            (j as usize, 1.0)
        } else if j as usize == m {
            (usize::MAX, 0.0)
        } else {
            (2 * m - j as usize, -1.0)
        };
        out[k] = (col, -wk * sign);
    }
    out
}

impl RadialSystem {
    /// Residual in interleaved layout `[F_U0, F_V0, F_U1, ...]`.
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.m];
        for i in 0..self.m {
            let st = neg_laplacian_stencil(i, self.m, self.n, self.h);
            let (mut lu, mut lv) = (0.0, 0.0);
            for &(col, w) in &st {
                if col != usize::MAX {
                    lu += w * x[2 * col];
                    lv += w * x[2 * col + 1];
                }
            }
            let (ui, vi) = (x[2 * i], x[2 * i + 1]);
            out[2 * i] = lu + ui - odd_pow(vi, self.q);
            out[2 * i + 1] = lv + vi - odd_pow(ui, self.p);
        }
        out
    }

    fn jacobian(&self, x: &[f64]) -> Vec<(usize, usize, f64)> {
        let mut e = Vec::with_capacity(14 * self.m);
        for i in 0..self.m {
            let st = neg_laplacian_stencil(i, self.m, self.n, self.h);
            let (ui, vi) = (x[2 * i], x[2 * i + 1]);
            for comp in 0..2 {
                let row = 2 * i + comp;
                e.push((row, row, 1.0));
                for &(col, w) in &st {
                    if col != usize::MAX {
                        e.push((row, 2 * col + comp, w));
                    }
                }
            }
            e.push((2 * i, 2 * i + 1, -self.q * vi.abs().powf(self.q - 1.0)));
            e.push((2 * i + 1, 2 * i, -self.p * ui.abs().powf(self.p - 1.0)));
        }
        e
    }
}

fn deinterleave(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        x.iter().step_by(2).copied().collect(),
        x.iter().skip(1).step_by(2).copied().collect(),
    )
}

fn max_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Damped Newton on the radial system starting from `x`; returns the converged
/// iterate and its max-norm residual.
fn newton_radial(
    sys: &RadialSystem,
    mut x: Vec<f64>,
    opts: &GroundStateOptions,
) -> Result<(Vec<f64>, f64)> {
    let mut solver = SparseLuSolver::new(2 * sys.m);
    let mut f = sys.residual(&x);
    for _ in 0..opts.max_iter {
        let res = max_norm(&f);
        if res <= opts.tol {
            return Ok((x, res));
        }
        let jac = sys.jacobian(&x);
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let dx = solver.solve(&jac, &neg)?;
        let base = l2_norm(&f);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=30 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            let ft = sys.residual(&trial);
            let nt = l2_norm(&ft);
            if nt.is_finite() && nt < (1.0 - 1e-4 * lambda) * base {
                x = trial;
                f = ft;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // Roundoff floor: the step no longer reduces the residual.
            let res = max_norm(&f);
            if res <= 1e3 * opts.tol {
                return Ok((x, res));
            }
            return Err(Error::NewtonDivergence(format!(
                "line search failed at residual {res:e}"
            )));
        }
    }
    let res = max_norm(&f);
    if res <= opts.tol {
        Ok((x, res))
    } else {
        Err(Error::NewtonDivergence(format!(
            "no convergence in {} iterations (residual {res:e})",
            opts.max_iter
        )))
    }
}

/// Fourth-order centered derivative with even reflection at the origin and odd
/// reflection about the zero at the last node.
fn centered_derivative(w: &[f64], h: f64) -> Vec<f64> {
    let m = w.len() - 1;
    let at = |j: isize| -> f64 {
        if j < 0 {
            w[(-j) as usize]
        } else if (j as usize) <= m {
            w[j as usize]
        } else {
            -w[2 * m - j as usize]
        }
    };
    (0..=m)
        .map(|i| {
            let i = i as isize;
            (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) / (12.0 * h)
        })
        .collect()
}

fn profile_from_state(
    exponents: Exponents,
    x: &[f64],
    opts: &GroundStateOptions,
    residual: f64,
) -> Result<RadialProfile> {
    let m = opts.cells;
    let h = opts.h();
    let (mut u, mut v) = deinterleave(x);
    if u.iter().chain(&v).any(|&w| w <= 0.0) {
        return Err(Error::NonPositive(format!(
            "converged profile has min(U) = {:e}, min(V) = {:e}",
            u.iter().cloned().fold(f64::INFINITY, f64::min),
            v.iter().cloned().fold(f64::INFINITY, f64::min)
        )));
    }
    u.push(0.0);
    v.push(0.0);
    let du = centered_derivative(&u, h);
    let dv = centered_derivative(&v, h);
    Ok(RadialProfile {
        exponents,
        r_max: opts.r_max,
        h,
        r: (0..=m).map(|i| i as f64 * h).collect(),
        u,
        v,
        du,
        dv,
        residual_norm: residual,
        trusted_radius: opts.r_max,
    })
}

/// Newton solve of the coupled radial finite-difference system for `exp`,
/// continued from the scalar ground state on the diagonal `p = q = min(p, q)`.
pub fn solve_limit_ground_state(
    exp: &Exponents,
    opts: &GroundStateOptions,
) -> Result<RadialProfile> {
    opts.validate()?;
    let n = exp.n();
    let base = exp.p().min(exp.q());
    let seed = solve_scalar_ground_state(base, n, opts)?;
    let m = opts.cells;
    let mut x = Vec::with_capacity(2 * m);
    for i in 0..m {
        x.push(seed.u[i].max(1e-300));
        x.push(seed.v[i].max(1e-300));
    }
    // path of exponent pairs from the diagonal to the target
    let mut path = vec![(base, base)];
    let target_big = exp.p().max(exp.q());
    let mut t = base;
    while t < target_big {
        t = (t + opts.continuation_step).min(target_big);
        path.push(if exp.p() >= exp.q() {
            (t, base)
        } else {
            (base, t)
        });
    }
    let mut residual = f64::NAN;
    for &(p, q) in &path {
        let sys = RadialSystem {
            p,
            q,
            n,
            h: opts.h(),
            m,
        };
        let (nx, res) = newton_radial(&sys, x, opts)?;
        x = nx;
        residual = res;
    }
    profile_from_state(*exp, &x, opts, residual)
}

/// Max-norm residual of an arbitrary sampled pair in the radial discretization.
pub fn profile_residual(prof: &RadialProfile) -> f64 {
    let m = prof.cells();
    let sys = RadialSystem {
        p: prof.exponents.p(),
        q: prof.exponents.q(),
        n: prof.n(),
        h: prof.h,
        m,
    };
    let mut x = Vec::with_capacity(2 * m);
    for i in 0..m {
        x.push(prof.u[i]);
        x.push(prof.v[i]);
    }
    max_norm(&sys.residual(&x))
}

/// Max-norm residual of `-ΔU + c U - b V^q`, `-ΔV + c V - a U^p` for a radial
/// pair sampled at `r_i = i h` (last sample is the truncation zero), using the
/// same stencil as the ground state solver.
pub fn frozen_residual(
    n: usize,
    p: f64,
    q: f64,
    h: f64,
    coeffs: (f64, f64, f64),
    u: &[f64],
    v: &[f64],
) -> f64 {
    let (a, b, c) = coeffs;
    let m = u.len() - 1;
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let (mut lu, mut lv) = (0.0, 0.0);
        for (col, w) in neg_laplacian_stencil(i, m, n, h) {
            if col != usize::MAX {
                lu += w * u[col];
                lv += w * v[col];
            }
        }
        worst = worst.max((lu + c * u[i] - b * odd_pow(v[i], q)).abs());
        worst = worst.max((lv + c * v[i] - a * odd_pow(u[i], p)).abs());
    }
    worst
}

// ---------------------------------------------------------------------------
// quadrature

/// Composite trapezoid of `f(i)` on a uniform grid with `len` nodes.
pub(crate) fn trapezoid(len: usize, h: f64, f: impl Fn(usize) -> f64) -> f64 {
    let mut s = 0.5 * (f(0) + f(len - 1));
    for i in 1..len - 1 {
        s += f(i);
    }
    s * h
}

fn prim_f(s: f64, p: f64) -> f64 {
    s.abs().powf(p + 1.0) / (p + 1.0)
}

/// `∫_{R^n_+} g(|z|) z_n dz = weight_zn(n) ∫ g(r) r^n dr`.
pub fn weight_zn(n: usize) -> f64 {
    sphere_area(n - 2) / (n as f64 - 1.0)
}

/// Reduction constant for the weight `z_n^3 / |z|^2`.
pub fn weight_zn_cubed(n: usize) -> f64 {
    2.0 * weight_zn(n) / (n as f64 + 1.0)
}

/// Reduction constant for the weight `z_i^2 z_n / |z|^2`, `i < n`.
pub fn weight_zi_sq_zn(n: usize) -> f64 {
    weight_zn(n) / (n as f64 + 1.0)
}

/// Half-space energy `I∞` of a radial pair.
pub fn energy_i_infinity(prof: &RadialProfile) -> f64 {
    half_space_energy(prof, 1.0, 1.0, 1.0)
}

/// `∫_{R^n_+} [U'V' + c UV - a F(U) - b G(V)]` for a radial pair with frozen coefficients.
pub fn half_space_energy(prof: &RadialProfile, a: f64, b: f64, c: f64) -> f64 {
    let n = prof.n();
    let (p, q) = (prof.exponents.p(), prof.exponents.q());
    let nm1 = n as i32 - 1;
    0.5 * sphere_area(n - 1)
        * trapezoid(prof.r.len(), prof.h, |i| {
            let (u, v) = (prof.u[i], prof.v[i]);
            (prof.du[i] * prof.dv[i] + c * u * v - a * prim_f(u, p) - b * prim_f(v, q))
                * prof.r[i].powi(nm1)
        })
}

/// Half-space integrals consumed by the boundary functions and the identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub i_infinity: f64,
    pub grad_moment: f64,
    pub normal_moment: f64,
    pub tangential_moment: f64,
    pub f_moment: f64,
    pub g_moment: f64,
    pub uv_moment: f64,
    pub trace: f64,
}

pub fn half_space_moments(prof: &RadialProfile) -> Result<MomentTable> {
    prof.check_shape()?;
    let n = prof.n();
    let (p, q) = (prof.exponents.p(), prof.exponents.q());
    let len = prof.r.len();
    let rn = |i: usize| prof.r[i].powi(n as i32);
    let grad_radial = trapezoid(len, prof.h, |i| prof.du[i] * prof.dv[i] * rn(i));
    let c1 = weight_zn(n);
    Ok(MomentTable {
        i_infinity: energy_i_infinity(prof),
        grad_moment: c1 * grad_radial,
        normal_moment: weight_zn_cubed(n) * grad_radial,
        tangential_moment: weight_zi_sq_zn(n) * grad_radial,
        f_moment: c1 * trapezoid(len, prof.h, |i| prim_f(prof.u[i], p) * rn(i)),
        g_moment: c1 * trapezoid(len, prof.h, |i| prim_f(prof.v[i], q) * rn(i)),
        uv_moment: c1 * trapezoid(len, prof.h, |i| prof.u[i] * prof.v[i] * rn(i)),
        trace: 0.5
            * sphere_area(n - 2)
            * trapezoid(len, prof.h, |i| {
                prof.u[i] * prof.v[i] * prof.r[i].powi(n as i32 - 2)
            }),
    })
}

/// Both sides of one identity and their relative residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_residual: f64,
}

impl IdentityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        IdentityCheck {
            lhs,
            rhs,
            relative_residual: (lhs - rhs).abs() / scale,
        }
    }
}

/// The four weighted identities for radial solutions of the unit half-space problem.
///
/// `ii` uses the trace with a minus sign, which is what integrating
/// `∂_n(uv)` over the half-space produces; `ii_plus_trace` keeps the
/// opposite sign for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    pub i: IdentityCheck,
    pub ii: IdentityCheck,
    pub iii: IdentityCheck,
    pub iv: IdentityCheck,
    pub ii_plus_trace: IdentityCheck,
}

impl PohozaevReport {
    pub fn max_residual(&self) -> f64 {
        [self.i, self.ii, self.iii, self.iv]
            .iter()
            .map(|c| c.relative_residual)
            .fold(0.0, f64::max)
    }
}

pub fn verify_pohozaev(prof: &RadialProfile) -> Result<PohozaevReport> {
    let mt = half_space_moments(prof)?;
    let n = prof.n() as f64;
    let (p, q) = (prof.exponents.p(), prof.exponents.q());
    let c1 = weight_zn(prof.n());
    let len = prof.r.len();
    let rn = |i: usize| prof.r[i].powi(prof.n() as i32);
    // ∫ [½ f(u)u - F(u) + ½ g(v)v - G(v)] z_n
    let nonlinear = c1
        * trapezoid(len, prof.h, |i| {
            let (u, v) = (prof.u[i].abs(), prof.v[i].abs());
            (0.5 * u.powf(p + 1.0) - prim_f(u, p) + 0.5 * v.powf(q + 1.0) - prim_f(v, q)) * rn(i)
        });
    // ∫ [<∇u,∇v> + uv - F - G] z_n
    let weighted_energy = mt.grad_moment + mt.uv_moment - mt.f_moment - mt.g_moment;
    Ok(PohozaevReport {
        i: IdentityCheck::new(mt.normal_moment, 2.0 / (n + 1.0) * mt.grad_moment),
        ii: IdentityCheck::new(nonlinear, weighted_energy - mt.trace),
        iii: IdentityCheck::new(weighted_energy, 2.0 * mt.normal_moment),
        iv: IdentityCheck::new(mt.tangential_moment, mt.grad_moment / (n + 1.0)),
        ii_plus_trace: IdentityCheck::new(nonlinear, weighted_energy + mt.trace),
    })
}

/// Negated least-squares slopes of `log(r^{(n-1)/2} U)` and `log(r^{(n-1)/2} V)`
/// on `[0.5, 0.75] r_max`; the power removes the algebraic factor of the
/// linearized tail `K_{(n-2)/2}(r) r^{-(n-2)/2}`.
pub fn decay_rate(prof: &RadialProfile) -> Result<(f64, f64)> {
    prof.check_shape()?;
    let lo = 0.5 * prof.r_max;
    let hi = 0.75 * prof.r_max;
    let half_power = 0.5 * (prof.n() as f64 - 1.0);
    let fit = |w: &[f64]| -> Result<f64> {
        let peak = w.iter().cloned().fold(0.0, f64::max);
        let decayed = prof
            .r
            .iter()
            .zip(w)
            .find(|(_, &x)| x < 1e-4 * peak)
            .map(|(r, _)| *r);
        match decayed {
            Some(r) if r < hi => {}
            _ => {
                return Err(Error::TailTooShort(format!(
                "profile does not fall below 1e-4 of its maximum before r = {hi}; increase r_max"
            )))
            }
        }
        let pts: Vec<(f64, f64)> = prof
            .r
            .iter()
            .zip(w)
            .filter(|(r, _)| **r >= lo && **r <= hi)
            .map(|(r, x)| (*r, x.ln() + half_power * r.ln()))
            .collect();
        if pts.len() < 2 || pts.iter().any(|(_, y)| !y.is_finite()) {
            return Err(Error::TailTooShort(
                "fit window empty or non-positive".into(),
            ));
        }
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Ok(-sxy / sxx)
    };
    Ok((fit(&prof.u)?, fit(&prof.v)?))
}
