#![allow(dead_code)]

use spikeforge::ground_state::RadialProfile;
use spikeforge::params::sphere_area;

/// Composite Simpson on `[a, b]` with `m` (even) intervals.
pub fn simpson(m: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    assert!(m % 2 == 0);
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `(U, V, U', V')` at radius `r`: Hermite values, four-point Lagrange derivatives.
pub fn profile_at(prof: &RadialProfile, r: f64) -> (f64, f64, f64, f64) {
    if r >= prof.r_max {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let (u, v) = prof.sample(r);
    let m = prof.r.len();
    let k = ((r / prof.h).floor() as usize).clamp(1, m - 3);
    let t = r / prof.h - (k - 1) as f64;
    let w = [
        -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
        t * (t - 2.0) * (t - 3.0) / 2.0,
        -t * (t - 1.0) * (t - 3.0) / 2.0,
        t * (t - 1.0) * (t - 2.0) / 6.0,
    ];
    let lag = |y: &[f64]| (0..4).map(|j| w[j] * y[k - 1 + j]).sum::<f64>();
    (u, v, lag(&prof.du), lag(&prof.dv))
}

/// Half-space integrals evaluated on the quarter plane `(ρ, z_n)` with
/// `dz = |S^{n-2}| ρ^{n-2} dρ dz_n`, independently of the radial reductions.
#[derive(Debug, Clone, Copy)]
pub struct HalfPlaneMoments {
    pub grad: f64,
    pub normal: f64,
    pub tangential: f64,
    pub f: f64,
    pub g: f64,
    pub uv: f64,
    pub half_trace: f64,
    pub nonlinear: f64,
    pub energy: f64,
}

pub fn half_plane_moments(prof: &RadialProfile, m: usize) -> HalfPlaneMoments {
    let n = prof.n();
    let (p, q) = (prof.exponents.p(), prof.exponents.q());
    let big_l = prof.r_max;
    let area = sphere_area(n - 2);
    let h = big_l / m as f64;
    let wt = |k: usize| {
        if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut acc = [0.0f64; 8];
    for i in 0..=m {
        let rho = i as f64 * h;
        let wr = wt(i) * rho.powi(n as i32 - 2);
        if wr == 0.0 {
            continue;
        }
        for j in 0..=m {
            let z = j as f64 * h;
            let r = (rho * rho + z * z).sqrt();
            let (u, v, du, dv) = profile_at(prof, r);
            let w = wr * wt(j);
            let gg = du * dv;
            let (c2n, c2t) = if r > 0.0 {
                (z * z / (r * r), rho * rho / ((n as f64 - 1.0) * r * r))
            } else {
                (0.0, 0.0)
            };
            let fu = u.abs().powf(p + 1.0) / (p + 1.0);
            let gv = v.abs().powf(q + 1.0) / (q + 1.0);
            acc[0] += w * gg * z;
            acc[1] += w * gg * c2n * z;
            acc[2] += w * gg * c2t * z;
            acc[3] += w * fu * z;
            acc[4] += w * gv * z;
            acc[5] += w * u * v * z;
            acc[6] += w * (0.5 * u.abs().powf(p + 1.0) - fu + 0.5 * v.abs().powf(q + 1.0) - gv) * z;
            acc[7] += w * (gg + u * v - fu - gv);
        }
    }
    let s = area * h * h / 9.0;
    let half_trace = 0.5
        * area
        * simpson(m, 0.0, big_l, |rho| {
            let (u, v) = prof.sample(rho);
            u * v * rho.powi(n as i32 - 2)
        });
    HalfPlaneMoments {
        grad: s * acc[0],
        normal: s * acc[1],
        tangential: s * acc[2],
        f: s * acc[3],
        g: s * acc[4],
        uv: s * acc[5],
        half_trace,
        nonlinear: s * acc[6],
        energy: s * acc[7],
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Relative residuals of the four weighted identities from [`half_plane_moments`].
pub fn identity_residuals(m: &HalfPlaneMoments, n: usize) -> [f64; 4] {
    let n = n as f64;
    let weighted = m.grad + m.uv - m.f - m.g;
    [
        rel(m.normal, 2.0 / (n + 1.0) * m.grad),
        rel(m.nonlinear, weighted - m.half_trace),
        rel(weighted, 2.0 * m.normal),
        rel(m.tangential, m.grad / (n + 1.0)),
    ]
}

/// Frozen-coefficient half-space energy of `u = A U(√c₀ r)`, `v = B V(√c₀ r)`,
/// integrated in physical radius.
pub fn frozen_energy(prof: &RadialProfile, a0: f64, b0: f64, c0: f64, amp: (f64, f64)) -> f64 {
    let n = prof.n();
    let (p, q) = (prof.exponents.p(), prof.exponents.q());
    let sc = c0.sqrt();
    let end = prof.r_max / sc;
    0.5 * sphere_area(n - 1)
        * simpson(24_000, 0.0, end, |r| {
            let (uu, vv, du, dv) = profile_at(prof, sc * r);
            let (u, v) = (amp.0 * uu, amp.1 * vv);
            let (ur, vr) = (amp.0 * sc * du, amp.1 * sc * dv);
            (ur * vr + c0 * u * v
                - a0 * u.abs().powf(p + 1.0) / (p + 1.0)
                - b0 * v.abs().powf(q + 1.0) / (q + 1.0))
                * r.powi(n as i32 - 1)
        })
}
