//! Shared domain types: exponent triples, radial coefficient fields and the
//! annulus / ball domains every solver works on.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Validated exponent triple `(p, q, n)` strictly below the critical hyperbola.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    p: f64,
    q: f64,
    n: usize,
}

impl Exponents {
    pub fn new(p: f64, q: f64, n: usize) -> Result<Self> {
        validate_exponents(p, q, n)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `pq - 1`, positive for every validated triple.
    pub fn pq_minus_one(&self) -> f64 {
        self.p * self.q - 1.0
    }

    /// Same `(p, q)` in another dimension, re-validated.
    pub fn with_dimension(&self, n: usize) -> Result<Self> {
        validate_exponents(self.p, self.q, n)
    }
}

pub fn validate_exponents(p: f64, q: f64, n: usize) -> Result<Exponents> {
    if !p.is_finite() || !q.is_finite() {
        return Err(Error::RangeViolation(format!(
            "p = {p}, q = {q} must be finite"
        )));
    }
    if p <= 1.0 || q <= 1.0 {
        return Err(Error::RangeViolation(format!(
            "need p > 1 and q > 1, got p = {p}, q = {q}"
        )));
    }
    if n < 3 {
        return Err(Error::RangeViolation(format!("need n >= 3, got n = {n}")));
    }
    let lhs = 1.0 / (p + 1.0) + 1.0 / (q + 1.0);
    let rhs = (n as f64 - 2.0) / n as f64;
    if lhs <= rhs {
        return Err(Error::SubcriticalViolation(format!(
            "1/(p+1) + 1/(q+1) = {lhs} is not > (n-2)/n = {rhs} for (p, q, n) = ({p}, {q}, {n})"
        )));
    }
    if p * q - 1.0 <= 0.0 {
        return Err(Error::RangeViolation(format!(
            "pq - 1 = {} must be positive",
            p * q - 1.0
        )));
    }
    Ok(Exponents { p, q, n })
}

/// Closed family of positive radial weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum CoefficientField {
    /// The constant `k`.
    Constant { k: f64 },
    /// `scale * |x|^exponent`.
    PowerOfRadius { scale: f64, exponent: f64 },
    /// Pointwise product of two fields.
    Product {
        left: Box<CoefficientField>,
        right: Box<CoefficientField>,
    },
}

impl CoefficientField {
    pub fn constant(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidCoefficient(format!(
                "constant {k} must be finite and positive"
            )));
        }
        Ok(CoefficientField::Constant { k })
    }

    pub fn power(scale: f64, exponent: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0 && exponent.is_finite()) {
            return Err(Error::InvalidCoefficient(format!(
                "power form needs a positive scale and finite exponent, got {scale}*|x|^{exponent}"
            )));
        }
        Ok(CoefficientField::PowerOfRadius { scale, exponent })
    }

    pub fn product(left: CoefficientField, right: CoefficientField) -> Self {
        CoefficientField::Product {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// The field collapsed to `scale * r^exponent`; every member of the family has this form.
    pub fn collapse(&self) -> (f64, f64) {
        match self {
            CoefficientField::Constant { k } => (*k, 0.0),
            CoefficientField::PowerOfRadius { scale, exponent } => (*scale, *exponent),
            CoefficientField::Product { left, right } => {
                let (s1, e1) = left.collapse();
                let (s2, e2) = right.collapse();
                (s1 * s2, e1 + e2)
            }
        }
    }

    /// Re-checks the leaf parameters, for fields built by deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            CoefficientField::Constant { k } => Self::constant(*k).map(|_| ()),
            CoefficientField::PowerOfRadius { scale, exponent } => {
                Self::power(*scale, *exponent).map(|_| ())
            }
            CoefficientField::Product { left, right } => {
                left.validate()?;
                right.validate()
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        self.collapse().1 == 0.0
    }

    /// Value and radial derivative at radius `r`.
    pub fn radial(&self, r: f64) -> Result<(f64, f64)> {
        let (s, e) = self.collapse();
        if e == 0.0 {
            return Ok((s, 0.0));
        }
        if !(r > 0.0) {
            return Err(Error::SingularPoint {
                radius: r,
                detail: format!("{s}*|x|^{e} is not positive and finite at the origin"),
            });
        }
        let value = s * r.powf(e);
        Ok((value, e * value / r))
    }

    /// Value and Cartesian gradient at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let r = norm(x);
        let (value, dr) = self.radial(r)?;
        let grad = if dr == 0.0 {
            vec![0.0; x.len()]
        } else {
            x.iter().map(|xi| dr * xi / r).collect()
        };
        Ok((value, grad))
    }

    /// Bounds `(K1, K2)` of the field on the closure of `domain`.
    pub fn bounds(&self, domain: &DomainSpec) -> Result<(f64, f64)> {
        let (s, e) = self.collapse();
        if e == 0.0 {
            return Ok((s, s));
        }
        let (lo, hi) = domain.radial_extent();
        if lo == 0.0 {
            return Err(Error::SingularPoint {
                radius: 0.0,
                detail: format!("{s}*|x|^{e} degenerates at the centre of a ball domain"),
            });
        }
        let a = s * lo.powf(e);
        let b = s * hi.powf(e);
        Ok((a.min(b), a.max(b)))
    }
}

impl std::fmt::Display for CoefficientField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoefficientField::Constant { k } => write!(f, "const({k})"),
            CoefficientField::PowerOfRadius { scale, exponent } => {
                write!(f, "pow({scale},{exponent})")
            }
            CoefficientField::Product { left, right } => write!(f, "prod({left},{right})"),
        }
    }
}

impl std::str::FromStr for CoefficientField {
    type Err = Error;

    /// Parses `const(k)`, `pow(s,e)` and `prod(F,G)`; a bare number is a constant.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(k) = s.parse::<f64>() {
            return CoefficientField::constant(k);
        }
        let open = s
            .find('(')
            .ok_or_else(|| Error::Format(format!("bad field descriptor `{s}`")))?;
        if !s.ends_with(')') {
            return Err(Error::Format(format!("bad field descriptor `{s}`")));
        }
        let head = &s[..open];
        let body = &s[open + 1..s.len() - 1];
        let args = split_top_level(body);
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number `{t}` in `{s}`")))
        };
        match (head, args.as_slice()) {
            ("const", [k]) => CoefficientField::constant(num(k)?),
            ("pow", [a, b]) => CoefficientField::power(num(a)?, num(b)?),
            ("prod", [a, b]) => Ok(CoefficientField::product(a.parse()?, b.parse()?)),
            _ => Err(Error::Format(format!("bad field descriptor `{s}`"))),
        }
    }
}

fn split_top_level(body: &str) -> Vec<&str> {
    let mut depth = 0i32;
    let mut start = 0;
    let mut out = Vec::new();
    for (i, ch) in body.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&body[start..]);
    out
}

/// Domain shapes supported by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Annulus { inner: f64, outer: f64 },
    Ball { radius: f64 },
}

/// Sign of the inward unit normal relative to the outward radial direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalOrientation {
    /// Inner normal is `+x/|x|` (inner sphere of an annulus).
    Outward,
    /// Inner normal is `-x/|x|` (outer sphere).
    Inward,
}

impl NormalOrientation {
    pub fn sign(self) -> f64 {
        match self {
            NormalOrientation::Outward => 1.0,
            NormalOrientation::Inward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryComponent {
    pub index: usize,
    pub radius: f64,
    pub inner_normal: NormalOrientation,
}

impl BoundaryComponent {
    /// Unit normal pointing into the domain at `x` on this sphere.
    pub fn inner_normal_at(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        x.iter()
            .map(|xi| self.inner_normal.sign() * xi / r)
            .collect()
    }

    /// The point of this sphere on the positive last axis.
    pub fn pole(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        x[n - 1] = self.radius;
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub shape: Shape,
    pub n: usize,
}

impl DomainSpec {
    pub fn annulus(inner: f64, outer: f64, n: usize) -> Result<Self> {
        if !(inner > 0.0 && outer > inner && outer.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "annulus needs 0 < inner < outer, got ({inner}, {outer})"
            )));
        }
        Self::checked_dimension(Shape::Annulus { inner, outer }, n)
    }

    pub fn ball(radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Self::checked_dimension(Shape::Ball { radius }, n)
    }

    fn checked_dimension(shape: Shape, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDomain(format!("dimension {n} too small")));
        }
        Ok(DomainSpec { shape, n })
    }

    pub fn validate(&self) -> Result<()> {
        match self.shape {
            Shape::Annulus { inner, outer } => Self::annulus(inner, outer, self.n).map(|_| ()),
            Shape::Ball { radius } => Self::ball(radius, self.n).map(|_| ()),
        }
    }

    /// `(min |x|, max |x|)` over the closure.
    pub fn radial_extent(&self) -> (f64, f64) {
        match self.shape {
            Shape::Annulus { inner, outer } => (inner, outer),
            Shape::Ball { radius } => (0.0, radius),
        }
    }

    pub fn boundary_components(&self) -> Vec<BoundaryComponent> {
        match self.shape {
            Shape::Annulus { inner, outer } => vec![
                BoundaryComponent {
                    index: 0,
                    radius: inner,
                    inner_normal: NormalOrientation::Outward,
                },
                BoundaryComponent {
                    index: 1,
                    radius: outer,
                    inner_normal: NormalOrientation::Inward,
                },
            ],
            Shape::Ball { radius } => {
                vec![BoundaryComponent {
                    index: 0,
                    radius,
                    inner_normal: NormalOrientation::Inward,
                }]
            }
        }
    }

    /// Boundary component containing a point at radius `r`, within a relative tolerance.
    pub fn component_at(&self, r: f64) -> Option<BoundaryComponent> {
        self.boundary_components()
            .into_iter()
            .find(|c| (r - c.radius).abs() <= 1e-9 * c.radius.max(1.0))
    }

    /// Distance from a point at radius `r` to the boundary.
    pub fn distance_to_boundary(&self, r: f64) -> f64 {
        match self.shape {
            Shape::Annulus { inner, outer } => (r - inner).min(outer - r).max(0.0),
            Shape::Ball { radius } => (radius - r).max(0.0),
        }
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `Γ(m/2)` for a positive integer `m`.
pub fn gamma_half(m: usize) -> f64 {
    assert!(m > 0);
    if m % 2 == 0 {
        (1..m / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < m as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Surface area of the unit sphere `S^k ⊂ R^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    2.0 * PI.powf((k as f64 + 1.0) / 2.0) / gamma_half(k + 1)
}
