//! Concentration functional, rescaling of the limit profile, boundary
//! functions γ and η, and the boundary concentration predictor.

use crate::error::{Error, Result};
use crate::ground_state::{frozen_residual, half_space_moments, MomentTable, RadialProfile};
use crate::params::{
    norm, sphere_area, BoundaryComponent, CoefficientField, DomainSpec, Exponents, Shape,
};
use serde::{Deserialize, Serialize};

/// Relative variation of Λ below which it counts as constant on the boundary.
pub const CONSTANCY_TOLERANCE: f64 = 1e-8;

/// Boundary samples per component.
pub const SAMPLES_PER_COMPONENT: usize = 256;

/// Exponents of the map between the anisotropic and unit limit problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationExponents {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl ConcentrationExponents {
    pub fn new(exp: &Exponents) -> Self {
        let d = exp.pq_minus_one();
        ConcentrationExponents {
            alpha1: 1.0 / d,
            alpha2: exp.p() / d,
            beta1: exp.q() / d,
            beta2: 1.0 / d,
        }
    }

    /// Amplitudes `(A, B)` with `u = A U(√c x)`, `v = B V(√c x)`.
    pub fn amplitudes(&self, a0: f64, b0: f64, c0: f64) -> (f64, f64) {
        let (rb, ra) = (b0 / c0, a0 / c0);
        (
            rb.powf(-self.alpha1) * ra.powf(-self.beta1),
            rb.powf(-self.alpha2) * ra.powf(-self.beta2),
        )
    }
}

/// Λ from frozen coefficient values.
pub fn lambda_from_values(a0: f64, b0: f64, c0: f64, exp: &Exponents) -> f64 {
    let ce = ConcentrationExponents::new(exp);
    (b0 / c0).powf(-(ce.alpha1 + ce.alpha2))
        * (a0 / c0).powf(-(ce.beta1 + ce.beta2))
        * c0.powf(1.0 - exp.n() as f64 / 2.0)
}

/// Λ at the point `x`.
pub fn lambda_value(
    a: &CoefficientField,
    b: &CoefficientField,
    c: &CoefficientField,
    x: &[f64],
    exp: &Exponents,
) -> Result<f64> {
    let (a0, _) = a.evaluate(x)?;
    let (b0, _) = b.evaluate(x)?;
    let (c0, _) = c.evaluate(x)?;
    Ok(lambda_from_values(a0, b0, c0, exp))
}

/// Limit profile mapped to the frozen-coefficient problem
/// `-Δu + c₀u = b₀v^q`, `-Δv + c₀v = a₀u^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisotropicProfile {
    pub coefficients: (f64, f64, f64),
    pub amplitudes: (f64, f64),
    pub exponents: Exponents,
    /// Grid step in physical radius.
    pub h: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
}

pub fn rescale_profile(
    prof: &RadialProfile,
    a0: f64,
    b0: f64,
    c0: f64,
) -> Result<AnisotropicProfile> {
    for (name, val) in [("a0", a0), ("b0", b0), ("c0", c0)] {
        if !(val.is_finite() && val > 0.0) {
            return Err(Error::InvalidCoefficient(format!(
                "{name} = {val} must be positive"
            )));
        }
    }
    let (amp_u, amp_v) = ConcentrationExponents::new(&prof.exponents).amplitudes(a0, b0, c0);
    let sc = c0.sqrt();
    Ok(AnisotropicProfile {
        coefficients: (a0, b0, c0),
        amplitudes: (amp_u, amp_v),
        exponents: prof.exponents,
        h: prof.h / sc,
        r: prof.r.iter().map(|r| r / sc).collect(),
        u: prof.u.iter().map(|x| amp_u * x).collect(),
        v: prof.v.iter().map(|x| amp_v * x).collect(),
        du: prof.du.iter().map(|x| amp_u * sc * x).collect(),
        dv: prof.dv.iter().map(|x| amp_v * sc * x).collect(),
    })
}

impl AnisotropicProfile {
    /// Half-space energy `∫[u'v' + c₀uv - a₀F(u) - b₀G(v)]` in physical radius.
    pub fn energy(&self) -> f64 {
        let n = self.exponents.n();
        let (p, q) = (self.exponents.p(), self.exponents.q());
        let (a0, b0, c0) = self.coefficients;
        let len = self.r.len();
        let mut acc = 0.0;
        for i in 0..len {
            let (u, v) = (self.u[i], self.v[i]);
            let g = self.du[i] * self.dv[i] + c0 * u * v
                - a0 * u.powf(p + 1.0) / (p + 1.0)
                - b0 * v.powf(q + 1.0) / (q + 1.0);
            let w = if i == 0 || i == len - 1 { 0.5 } else { 1.0 };
            acc += w * g * self.r[i].powi(n as i32 - 1);
        }
        0.5 * sphere_area(n - 1) * acc * self.h
    }

    /// Max-norm discrete residual in the frozen-coefficient system.
    pub fn residual(&self) -> f64 {
        frozen_residual(
            self.exponents.n(),
            self.exponents.p(),
            self.exponents.q(),
            self.h,
            self.coefficients,
            &self.u,
            &self.v,
        )
    }
}

/// Directional derivative of a field along `dir`, divided by its value.
fn log_derivative(f: &CoefficientField, x: &[f64], dir: &[f64]) -> Result<f64> {
    let (val, grad) = f.evaluate(x)?;
    Ok(grad.iter().zip(dir).map(|(g, d)| g * d).sum::<f64>() / val)
}

/// `(γ, η)` at the boundary point `x0` with unit inner normal `inner_normal`,
/// from moments of the unit limit profile.
pub fn gamma_eta(
    moments: &MomentTable,
    a: &CoefficientField,
    b: &CoefficientField,
    c: &CoefficientField,
    exp: &Exponents,
    x0: &[f64],
    inner_normal: &[f64],
) -> Result<(f64, f64)> {
    let lam = lambda_value(a, b, c, x0, exp)?;
    let (c0, _) = c.evaluate(x0)?;
    let pref = lam / c0.sqrt();
    let n = exp.n() as f64;
    let gamma = 5.0 / (n + 1.0) * pref * moments.grad_moment;
    let eta = pref
        * (log_derivative(a, x0, inner_normal)? * moments.f_moment
            + log_derivative(b, x0, inner_normal)? * moments.g_moment
            - log_derivative(c, x0, inner_normal)? * moments.uv_moment);
    Ok((gamma, eta))
}

/// Mean curvature of the boundary at `x` with respect to the inner normal,
/// normalised so a ball of radius `R` has `H = 1/R`.
pub fn mean_curvature(domain: &DomainSpec, x: &[f64]) -> Result<f64> {
    let r = norm(x);
    let comp = domain
        .component_at(r)
        .ok_or(Error::NotOnBoundary { radius: r })?;
    Ok(component_curvature(&comp))
}

fn component_curvature(comp: &BoundaryComponent) -> f64 {
    // inner normal -x/|x| on a sphere seen from inside gives +1/R
    -comp.inner_normal.sign() / comp.radius
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LambdaDriven,
    CurvatureDriven,
}

/// Values on one boundary sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub index: usize,
    pub radius: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub mean_curvature: f64,
    pub gamma: f64,
    pub eta: f64,
    pub h_gamma_plus_eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedPoint {
    pub component: usize,
    pub radius: f64,
    /// Representative point (the pole on the last axis); the whole sphere is
    /// an orbit of equivalent points.
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPrediction {
    pub regime: Regime,
    pub constancy_witness: f64,
    pub tolerance: f64,
    pub samples_per_component: usize,
    pub components: Vec<ComponentReport>,
    /// argmin Λ when Λ-driven; union of both extremizer sets of `Hγ + η` otherwise.
    pub predicted_points: Vec<PredictedPoint>,
    pub curvature_argmax: Vec<PredictedPoint>,
    pub curvature_argmin: Vec<PredictedPoint>,
}

impl BoundaryPrediction {
    /// Component indices of the predicted points.
    pub fn predicted_components(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.predicted_points.iter().map(|p| p.component).collect();
        v.dedup();
        v
    }
}

/// Points spread uniformly in angle over a great circle of the sphere `|x| = radius`.
fn boundary_samples(radius: f64, n: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            let mut x = vec![0.0; n];
            x[n - 1] = radius * phi.cos();
            x[n - 2] = radius * phi.sin();
            x
        })
        .collect()
}

fn extremizers(values: &[(usize, f64)], want_max: bool) -> Vec<usize> {
    let best = values.iter().map(|v| v.1).fold(
        if want_max {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        },
        |acc, v| {
            if want_max {
                acc.max(v)
            } else {
                acc.min(v)
            }
        },
    );
    let scale = values
        .iter()
        .map(|v| v.1.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    values
        .iter()
        .filter(|v| (v.1 - best).abs() <= CONSTANCY_TOLERANCE * scale)
        .map(|v| v.0)
        .collect()
}

pub fn predict_concentration(
    domain: &DomainSpec,
    a: &CoefficientField,
    b: &CoefficientField,
    c: &CoefficientField,
    exp: &Exponents,
    prof: &RadialProfile,
) -> Result<BoundaryPrediction> {
    domain.validate()?;
    if domain.n != exp.n() || prof.exponents != *exp {
        return Err(Error::Precondition(format!(
            "domain dimension {}, exponents {:?} and profile exponents {:?} must agree",
            domain.n, exp, prof.exponents
        )));
    }
    if let Shape::Ball { .. } = domain.shape {
        for f in [a, b, c] {
            f.bounds(domain)?;
        }
    }
    let moments = half_space_moments(prof)?;
    let n = domain.n;
    let mut components = Vec::new();
    let (mut global_min, mut global_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for comp in domain.boundary_components() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in boundary_samples(comp.radius, n, SAMPLES_PER_COMPONENT) {
            let l = lambda_value(a, b, c, &x, exp)?;
            lo = lo.min(l);
            hi = hi.max(l);
        }
        global_min = global_min.min(lo);
        global_max = global_max.max(hi);
        let pole = comp.pole(n);
        let (gamma, eta) = gamma_eta(&moments, a, b, c, exp, &pole, &comp.inner_normal_at(&pole))?;
        let h = component_curvature(&comp);
        components.push(ComponentReport {
            index: comp.index,
            radius: comp.radius,
            lambda_min: lo,
            lambda_max: hi,
            mean_curvature: h,
            gamma,
            eta,
            h_gamma_plus_eta: h * gamma + eta,
        });
    }
    let constancy_witness = (global_max - global_min) / global_max;
    let point = |idx: usize| {
        let comp = &components[idx];
        let mut x = vec![0.0; n];
        x[n - 1] = comp.radius;
        PredictedPoint {
            component: comp.index,
            radius: comp.radius,
            point: x,
        }
    };
    let hge: Vec<(usize, f64)> = components
        .iter()
        .map(|c| (c.index, c.h_gamma_plus_eta))
        .collect();
    let curvature_argmax: Vec<PredictedPoint> =
        extremizers(&hge, true).into_iter().map(point).collect();
    let curvature_argmin: Vec<PredictedPoint> =
        extremizers(&hge, false).into_iter().map(point).collect();
    let (regime, predicted_points) = if constancy_witness > CONSTANCY_TOLERANCE {
        let lam: Vec<(usize, f64)> = components.iter().map(|c| (c.index, c.lambda_min)).collect();
        (
            Regime::LambdaDriven,
            extremizers(&lam, false).into_iter().map(point).collect(),
        )
    } else {
        let mut pts = curvature_argmax.clone();
        for p in &curvature_argmin {
            if !pts.iter().any(|q| q.component == p.component) {
                pts.push(p.clone());
            }
        }
        pts.sort_by_key(|p| p.component);
        (Regime::CurvatureDriven, pts)
    };
    Ok(BoundaryPrediction {
        regime,
        constancy_witness,
        tolerance: CONSTANCY_TOLERANCE,
        samples_per_component: SAMPLES_PER_COMPONENT,
        components,
        predicted_points,
        curvature_argmax,
        curvature_argmin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{solve_limit_ground_state, GroundStateOptions};
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn profile333() -> &'static RadialProfile {
        static P: OnceLock<RadialProfile> = OnceLock::new();
        P.get_or_init(|| {
            let exp = Exponents::new(3.0, 3.0, 3).unwrap();
            solve_limit_ground_state(
                &exp,
                &GroundStateOptions {
                    cells: 2000,
                    ..Default::default()
                },
            )
            .unwrap()
        })
    }

    fn hopf() -> CoefficientField {
        CoefficientField::power(0.5, -1.0).unwrap()
    }

    #[test]
    fn exponent_sums() {
        let exp = Exponents::new(2.0, 3.0, 3).unwrap();
        let ce = ConcentrationExponents::new(&exp);
        assert_relative_eq!(ce.alpha1 + ce.alpha2, 3.0 / 5.0, max_relative = 1e-15);
        assert_relative_eq!(ce.beta1 + ce.beta2, 4.0 / 5.0, max_relative = 1e-15);
    }

    #[test]
    fn unit_fields_give_unit_lambda() {
        let one = CoefficientField::constant(1.0).unwrap();
        let exp = Exponents::new(2.0, 3.0, 3).unwrap();
        assert_eq!(
            lambda_value(&one, &one, &one, &[0.3, -1.0, 2.0], &exp).unwrap(),
            1.0
        );
    }

    #[test]
    fn hopf_lambda_is_power_of_radius() {
        for (p, q, n) in [(3.0, 3.0, 3), (2.0, 2.0, 5), (1.5, 1.5, 9)] {
            let exp = Exponents::new(p, q, n).unwrap();
            for r in [0.5, 1.0, 2.7] {
                let mut x = vec![0.0; n];
                x[0] = r;
                let l = lambda_value(&hopf(), &hopf(), &hopf(), &x, &exp).unwrap();
                assert_relative_eq!(
                    l,
                    (2.0 * r).powf(n as f64 / 2.0 - 1.0),
                    max_relative = 1e-13
                );
            }
        }
    }

    #[test]
    fn identity_rescale() {
        let prof = profile333();
        let ap = rescale_profile(prof, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(ap.u, prof.u);
        assert_eq!(ap.dv, prof.dv);
    }

    #[test]
    fn rescaled_residual_is_controlled() {
        let prof = profile333();
        let ap = rescale_profile(prof, 2.0, 1.0, 4.0).unwrap();
        let unit = frozen_residual(3, 3.0, 3.0, prof.h, (1.0, 1.0, 1.0), &prof.u, &prof.v);
        assert!(
            ap.residual() <= 10.0 * unit.max(1e-14),
            "{} vs {}",
            ap.residual(),
            unit
        );
    }

    #[test]
    fn constant_fields_have_zero_eta() {
        let prof = profile333();
        let m = half_space_moments(prof).unwrap();
        let k = CoefficientField::constant(2.0).unwrap();
        let exp = prof.exponents;
        let (g, e) = gamma_eta(&m, &k, &k, &k, &exp, &[0.0, 0.0, 1.0], &[0.0, 0.0, -1.0]).unwrap();
        assert!(g > 0.0);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn hopf_eta_on_inner_sphere() {
        let prof = profile333();
        let m = half_space_moments(prof).unwrap();
        let exp = prof.exponents;
        let r0 = 0.5;
        let x0 = [0.0, 0.0, r0];
        let (_, eta) =
            gamma_eta(&m, &hopf(), &hopf(), &hopf(), &exp, &x0, &[0.0, 0.0, 1.0]).unwrap();
        let c0 = 1.0 / (2.0 * r0);
        let lam = (2.0 * r0).powf(0.5);
        let expected = -(lam / c0.sqrt()) / r0 * (m.f_moment + m.g_moment - m.uv_moment);
        assert_relative_eq!(eta, expected, max_relative = 1e-12);
    }

    #[test]
    fn curvature_convention() {
        let ball = DomainSpec::ball(2.0, 3).unwrap();
        assert_eq!(mean_curvature(&ball, &[0.0, 2.0, 0.0]).unwrap(), 0.5);
        let ann = DomainSpec::annulus(1.0, 3.0, 3).unwrap();
        assert_relative_eq!(mean_curvature(&ann, &[3.0, 0.0, 0.0]).unwrap(), 1.0 / 3.0);
        assert_eq!(mean_curvature(&ann, &[0.0, 0.0, 1.0]).unwrap(), -1.0);
        assert!(matches!(
            mean_curvature(&ann, &[0.0, 0.0, 2.0]),
            Err(Error::NotOnBoundary { .. })
        ));
    }

    #[test]
    fn hopf_prediction_is_inner_boundary() {
        let prof = profile333();
        let dom = DomainSpec::annulus(0.5, 2.0, 3).unwrap();
        let pred =
            predict_concentration(&dom, &hopf(), &hopf(), &hopf(), &prof.exponents, prof).unwrap();
        assert_eq!(pred.regime, Regime::LambdaDriven);
        assert_eq!(pred.predicted_components(), vec![0]);
    }

    #[test]
    fn constant_fields_are_curvature_driven() {
        let prof = profile333();
        let dom = DomainSpec::annulus(1.0, 3.0, 3).unwrap();
        let k = CoefficientField::constant(1.0).unwrap();
        let pred = predict_concentration(&dom, &k, &k, &k, &prof.exponents, prof).unwrap();
        assert_eq!(pred.regime, Regime::CurvatureDriven);
        assert_eq!(pred.constancy_witness, 0.0);
        assert_eq!(pred.curvature_argmax[0].component, 1);
        assert_eq!(pred.curvature_argmin[0].component, 0);
        assert_eq!(pred.predicted_points.len(), 2);
    }

    #[test]
    fn mismatched_dimension_is_rejected() {
        let prof = profile333();
        let dom = DomainSpec::annulus(1.0, 3.0, 4).unwrap();
        let k = CoefficientField::constant(1.0).unwrap();
        assert!(predict_concentration(&dom, &k, &k, &k, &prof.exponents, prof).is_err());
    }
}
