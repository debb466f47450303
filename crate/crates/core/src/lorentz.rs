//! Minkowski space `R^{3,1}` with signature `(-,+,+,+)`, the three models of
//! hyperbolic space and the plane/horosphere duality.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::tol::{EPS_DUAL, EPS_GEOM, EPS_MODEL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LorentzError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("vector is not unit space-like (<w,w> = {0})")]
    NotUnitSpacelike(f64),
    #[error("vector is not future light-like (<u,u> = {0})")]
    NotLightlike(f64),
    #[error("planes intersect: -<w1,w2> = {0} < 1")]
    PlanesIntersect(f64),
    #[error("planes are disjoint: |<w1,w2>| = {0} >= 1")]
    PlanesDisjoint(f64),
    #[error("plane is on the wrong side of the horosphere: -<u,w> = {0}")]
    WrongSide(f64),
    #[error("horospheres share their centre")]
    SameCentre,
    #[error("point is not on the hyperboloid (<x,x> = {0})")]
    OffHyperboloid(f64),
    #[error("projective point outside the unit ball")]
    OutsideBall,
    #[error("half-space height must be positive")]
    NonPositiveHeight,
}

/// A vector of Minkowski space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MVec {
    pub x: [f64; 4],
}

impl MVec {
    pub fn new(x0: f64, x1: f64, x2: f64, x3: f64) -> Result<Self, LorentzError> {
        let x = [x0, x1, x2, x3];
        if x.iter().all(|c| c.is_finite()) {
            Ok(MVec { x })
        } else {
            Err(LorentzError::NonFinite)
        }
    }

    /// Unchecked constructor for internal arithmetic.
    pub const fn raw(x: [f64; 4]) -> Self {
        MVec { x }
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        MVec { x: [v[0], v[1], v[2], v[3]] }
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.x[0], self.x[1], self.x[2], self.x[3])
    }

    pub fn dot(self, other: MVec) -> f64 {
        lorentz_dot(self, other)
    }

    pub fn norm2(self) -> f64 {
        lorentz_dot(self, self)
    }

    pub fn is_finite(self) -> bool {
        self.x.iter().all(|c| c.is_finite())
    }

    pub fn apply(self, m: &Matrix4<f64>) -> MVec {
        MVec::from_vector(&(m * self.to_vector()))
    }
}

impl Add for MVec {
    type Output = MVec;
    fn add(self, o: MVec) -> MVec {
        MVec::raw([self.x[0] + o.x[0], self.x[1] + o.x[1], self.x[2] + o.x[2], self.x[3] + o.x[3]])
    }
}

impl Sub for MVec {
    type Output = MVec;
    fn sub(self, o: MVec) -> MVec {
        MVec::raw([self.x[0] - o.x[0], self.x[1] - o.x[1], self.x[2] - o.x[2], self.x[3] - o.x[3]])
    }
}

impl Mul<MVec> for f64 {
    type Output = MVec;
    fn mul(self, v: MVec) -> MVec {
        MVec::raw([self * v.x[0], self * v.x[1], self * v.x[2], self * v.x[3]])
    }
}

impl Neg for MVec {
    type Output = MVec;
    fn neg(self) -> MVec {
        -1.0 * self
    }
}

pub fn lorentz_dot(a: MVec, b: MVec) -> f64 {
    -a.x[0] * b.x[0] + a.x[1] * b.x[1] + a.x[2] * b.x[2] + a.x[3] * b.x[3]
}

/// The Lorentz metric `J = diag(-1, 1, 1, 1)`.
pub fn metric() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(-1.0, 1.0, 1.0, 1.0))
}

/// The light-like vector whose horospheres are the horizontal planes of the
/// half-space model.
pub const E_INF: MVec = MVec::raw([1.0, 0.0, 0.0, 1.0]);

/// A point of the upper half-space model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpacePoint {
    pub z: Complex64,
    pub t: f64,
}

/// A point on the sphere at infinity of the half-space model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryPoint {
    Finite(Complex64),
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelPoint {
    Hyperboloid(MVec),
    Projective([f64; 3]),
    HalfSpace(HalfSpacePoint),
}

impl ModelPoint {
    pub fn hyperboloid(x: MVec) -> Result<Self, LorentzError> {
        if !x.is_finite() {
            return Err(LorentzError::NonFinite);
        }
        let n = x.norm2();
        if (n + 1.0).abs() > EPS_MODEL * x.x[0].abs().max(1.0).powi(2) || x.x[0] <= 0.0 {
            return Err(LorentzError::OffHyperboloid(n));
        }
        Ok(ModelPoint::Hyperboloid(x))
    }

    pub fn projective(p: [f64; 3]) -> Result<Self, LorentzError> {
        if p.iter().any(|c| !c.is_finite()) {
            return Err(LorentzError::NonFinite);
        }
        if p.iter().map(|c| c * c).sum::<f64>() >= 1.0 {
            return Err(LorentzError::OutsideBall);
        }
        Ok(ModelPoint::Projective(p))
    }

    pub fn half_space(z: Complex64, t: f64) -> Result<Self, LorentzError> {
        if !(z.re.is_finite() && z.im.is_finite() && t.is_finite()) {
            return Err(LorentzError::NonFinite);
        }
        if t <= 0.0 {
            return Err(LorentzError::NonPositiveHeight);
        }
        Ok(ModelPoint::HalfSpace(HalfSpacePoint { z, t }))
    }

    pub fn to_hyperboloid(self) -> MVec {
        match self {
            ModelPoint::Hyperboloid(x) => x,
            ModelPoint::Projective(p) => {
                let s = 1.0 / (1.0 - p[0] * p[0] - p[1] * p[1] - p[2] * p[2]).sqrt();
                MVec::raw([s, s * p[0], s * p[1], s * p[2]])
            }
            ModelPoint::HalfSpace(HalfSpacePoint { z, t }) => halfspace_to_minkowski(z, t),
        }
    }

    pub fn to_projective(self) -> [f64; 3] {
        match self {
            ModelPoint::Projective(p) => p,
            other => {
                let x = other.to_hyperboloid();
                [x.x[1] / x.x[0], x.x[2] / x.x[0], x.x[3] / x.x[0]]
            }
        }
    }

    pub fn to_half_space(self) -> HalfSpacePoint {
        match self {
            ModelPoint::HalfSpace(h) => h,
            other => {
                let x = other.to_hyperboloid();
                let t = 1.0 / (x.x[0] - x.x[3]);
                HalfSpacePoint { z: Complex64::new(x.x[1] * t, x.x[2] * t), t }
            }
        }
    }
}

/// The hyperboloid point corresponding to `(z, t)` in the half-space model.
pub fn halfspace_to_minkowski(z: Complex64, t: f64) -> MVec {
    let q = z.norm_sqr() + t * t;
    MVec::raw([(q + 1.0) / (2.0 * t), z.re / t, z.im / t, (q - 1.0) / (2.0 * t)])
}

/// The light-like vector `(|z|^2+1, 2 Re z, 2 Im z, |z|^2-1) / 2` whose
/// projective class is the boundary point `z`.
pub fn light_vector(z: Complex64) -> MVec {
    let q = z.norm_sqr();
    MVec::raw([(q + 1.0) / 2.0, z.re, z.im, (q - 1.0) / 2.0])
}

/// Footprint on the sphere at infinity of a non-zero vector: for light-like
/// vectors this is the centre of the dual horosphere, for space-like ones it
/// is the Euclidean centre of the dual hemisphere.
pub fn footprint(u: MVec) -> BoundaryPoint {
    let den = u.x[0] - u.x[3];
    if den.abs() <= EPS_GEOM * (u.x[0].abs() + u.x[3].abs()).max(1e-300) {
        BoundaryPoint::Infinity
    } else {
        BoundaryPoint::Finite(Complex64::new(u.x[1] / den, u.x[2] / den))
    }
}

/// Euclidean radius of the hemisphere dual to a unit space-like `w`, or of
/// the horoball dual to a light-like `u` (then the radius is its diameter
/// halved, i.e. the horoball has Euclidean diameter `1 / |<u, e_inf>|`).
pub fn hemisphere_radius(w: MVec) -> f64 {
    1.0 / lorentz_dot(w, E_INF).abs()
}

/// Half-space `{ v : <v, w> <= 0 }` dual to a unit space-like vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualHalfSpace {
    pub w: MVec,
}

impl DualHalfSpace {
    pub fn contains(&self, v: MVec) -> bool {
        lorentz_dot(v, self.w) <= EPS_GEOM
    }
}

pub fn dual_halfspace(w: MVec) -> Result<DualHalfSpace, LorentzError> {
    check_unit_spacelike(w)?;
    Ok(DualHalfSpace { w })
}

/// Horosphere `{ v : <v, u> = -1 }` dual to a future light-like vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horosphere {
    pub u: MVec,
}

impl Horosphere {
    /// Projective class of `u`, normalised to `x0 = 1`.
    pub fn centre(&self) -> [f64; 4] {
        let s = 1.0 / self.u.x[0];
        [1.0, s * self.u.x[1], s * self.u.x[2], s * self.u.x[3]]
    }

    pub fn contains(&self, v: MVec) -> bool {
        (lorentz_dot(v, self.u) + 1.0).abs() <= EPS_GEOM * lorentz_dot(v, self.u).abs().max(1.0)
    }

    /// Closed horoball bounded by the horosphere.
    pub fn in_horoball(&self, v: MVec) -> bool {
        -lorentz_dot(v, self.u) <= 1.0 + EPS_GEOM
    }
}

pub fn dual_horosphere(u: MVec) -> Result<Horosphere, LorentzError> {
    check_lightlike(u)?;
    Ok(Horosphere { u })
}

fn check_unit_spacelike(w: MVec) -> Result<(), LorentzError> {
    if !w.is_finite() {
        return Err(LorentzError::NonFinite);
    }
    let n = w.norm2();
    if (n - 1.0).abs() > EPS_DUAL * scale2(w) {
        return Err(LorentzError::NotUnitSpacelike(n));
    }
    Ok(())
}

fn check_lightlike(u: MVec) -> Result<(), LorentzError> {
    if !u.is_finite() {
        return Err(LorentzError::NonFinite);
    }
    let n = u.norm2();
    if n.abs() > EPS_DUAL * scale2(u) || u.x[0] <= 0.0 {
        return Err(LorentzError::NotLightlike(n));
    }
    Ok(())
}

fn scale2(v: MVec) -> f64 {
    v.x.iter().map(|c| c * c).sum::<f64>().max(1.0)
}

pub fn distance_plane_plane(w1: MVec, w2: MVec) -> Result<f64, LorentzError> {
    check_unit_spacelike(w1)?;
    check_unit_spacelike(w2)?;
    let c = -lorentz_dot(w1, w2);
    if c < 1.0 - EPS_GEOM {
        return Err(LorentzError::PlanesIntersect(c));
    }
    Ok(c.max(1.0).acosh())
}

pub fn angle_plane_plane(w1: MVec, w2: MVec) -> Result<f64, LorentzError> {
    check_unit_spacelike(w1)?;
    check_unit_spacelike(w2)?;
    let c = lorentz_dot(w1, w2);
    if c.abs() >= 1.0 {
        return Err(LorentzError::PlanesDisjoint(c.abs()));
    }
    Ok((-c).acos())
}

/// Signed distance `log(-<u,w>)`; negative when the horosphere crosses the plane.
pub fn distance_horosphere_plane(u: MVec, w: MVec) -> Result<f64, LorentzError> {
    check_lightlike(u)?;
    check_unit_spacelike(w)?;
    let e = -lorentz_dot(u, w);
    if e <= 0.0 {
        return Err(LorentzError::WrongSide(e));
    }
    Ok(e.ln())
}

/// Signed distance `log(-<u1,u2>/2)`; negative values mean overlapping horoballs.
pub fn distance_horosphere_horosphere(u1: MVec, u2: MVec) -> Result<f64, LorentzError> {
    check_lightlike(u1)?;
    check_lightlike(u2)?;
    let e = -0.5 * lorentz_dot(u1, u2);
    // Two future light-like vectors pair to zero exactly when they are parallel.
    if e <= EPS_GEOM * u1.x[0] * u2.x[0] {
        return Err(LorentzError::SameCentre);
    }
    Ok(e.ln())
}

/// Distance in the half-space model, `cosh d = 1 + |p - q|^2 / (2 t_p t_q)`.
pub fn halfspace_distance(p: HalfSpacePoint, q: HalfSpacePoint) -> f64 {
    let d2 = (p.z - q.z).norm_sqr() + (p.t - q.t).powi(2);
    (1.0 + d2 / (2.0 * p.t * q.t)).acosh()
}

/// Boost of rapidity `s` in the `(x0, x_axis)` plane.
pub fn boost(axis: usize, s: f64) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m[(0, 0)] = s.cosh();
    m[(axis, axis)] = s.cosh();
    m[(0, axis)] = s.sinh();
    m[(axis, 0)] = s.sinh();
    m
}

/// Rotation by `a` in the spatial `(i, j)` plane.
pub fn rotation(i: usize, j: usize, a: f64) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m[(i, i)] = a.cos();
    m[(j, j)] = a.cos();
    m[(i, j)] = -a.sin();
    m[(j, i)] = a.sin();
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2};

    fn v(a: f64, b: f64, c: f64, d: f64) -> MVec {
        MVec::new(a, b, c, d).unwrap()
    }

    #[test]
    fn dot_examples() {
        assert_eq!(lorentz_dot(v(1., 0., 0., 0.), v(1., 0., 0., 0.)), -1.0);
        assert_eq!(lorentz_dot(v(1., 1., 0., 0.), v(1., 1., 0., 0.)), 0.0);
        assert_eq!(lorentz_dot(v(2., 2., 0., 0.), v(2., -2., 0., 0.)), -8.0);
        assert!(MVec::new(f64::NAN, 0., 0., 0.).is_err());
    }

    #[test]
    fn halfspace_membership() {
        let h = dual_halfspace(v(0., 1., 0., 0.)).unwrap();
        assert!(h.contains(v(1., 0., 0., 0.)));
        let s = 2f64.sqrt();
        // (sqrt 2, 1, 0, 0) already lies on the hyperboloid
        assert!(!h.contains(v(s, 1., 0., 0.)));
        assert!(dual_halfspace(v(0., 2., 0., 0.)).is_err());
    }

    #[test]
    fn horosphere_examples() {
        let h = dual_horosphere(v(1., 1., 0., 0.)).unwrap();
        assert!(h.contains(v(1., 0., 0., 0.)));
        assert_eq!(h.centre(), [1., 1., 0., 0.]);
        let h2 = dual_horosphere(v(2., 2., 0., 0.)).unwrap();
        // the origin is on h and outside the smaller horoball of 2u
        assert!(h.in_horoball(v(1., 0., 0., 0.)));
        assert!(!h2.in_horoball(v(1., 0., 0., 0.)));
        assert!(dual_horosphere(v(1., 0., 0., 0.)).is_err());
    }

    #[test]
    fn horosphere_height_in_half_space() {
        for &h in &[0.5, 1.0, 3.0] {
            let u = h * E_INF;
            let hs = dual_horosphere(u).unwrap();
            let p = halfspace_to_minkowski(Complex64::new(0.3, -1.2), h);
            assert!(hs.contains(p));
        }
    }

    #[test]
    fn plane_distances() {
        let w1 = v(0., 1., 0., 0.);
        assert!(distance_plane_plane(w1, v(0., -1., 0., 0.)).unwrap().abs() < 1e-15);
        let s: f64 = 0.7;
        let d = distance_plane_plane(w1, v(s.sinh(), -s.cosh(), 0., 0.)).unwrap();
        assert!((d - s).abs() < 1e-12);
        assert!(matches!(distance_plane_plane(w1, v(0., 0., 1., 0.)), Err(LorentzError::PlanesIntersect(_))));
    }

    #[test]
    fn plane_angles() {
        let w1 = v(0., 1., 0., 0.);
        assert!((angle_plane_plane(w1, v(0., 0., 1., 0.)).unwrap() - FRAC_PI_2).abs() < 1e-15);
        let a: f64 = 1.1;
        let got = angle_plane_plane(w1, v(0., -a.cos(), a.sin(), 0.)).unwrap();
        assert!((got - a).abs() < 1e-12);
        let w2 = v(1.5f64.sinh(), 1.5f64.cosh(), 0., 0.);
        assert!(matches!(angle_plane_plane(w1, w2), Err(LorentzError::PlanesDisjoint(_))));
    }

    #[test]
    fn horosphere_plane_distance() {
        // -<u,w> = 1 and e
        let w = v(0., 1., 0., 0.);
        let u = v(1., -1., 0., 0.);
        assert!(distance_horosphere_plane(u, w).unwrap().abs() < 1e-15);
        assert!((distance_horosphere_plane(E * u, w).unwrap() - 1.0).abs() < 1e-15);
        assert!(distance_horosphere_plane(v(1., 1., 0., 0.), w).is_err());
        // horosphere C x {2} against the unit hemisphere centred at 0
        // the unit hemisphere, with its dual pointing away from the horoball
        let hemi = v(0., 0., 0., -1.);
        assert!((hemisphere_radius(hemi) - 1.0).abs() < 1e-15);
        let d = distance_horosphere_plane(2.0 * E_INF, hemi).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-14);
        let direct = halfspace_distance(HalfSpacePoint { z: Complex64::new(0., 0.), t: 1.0 }, HalfSpacePoint { z: Complex64::new(0., 0.), t: 2.0 });
        assert!((d - direct).abs() < 1e-14);
    }

    #[test]
    fn horosphere_horosphere_distance() {
        let u1 = v(1., 1., 0., 0.);
        let u2 = v(1., -1., 0., 0.);
        assert!(distance_horosphere_horosphere(u1, u2).unwrap().abs() < 1e-15);
        let d = distance_horosphere_horosphere(E * u1, E * u2).unwrap();
        assert!((d - 2.0).abs() < 1e-14);
        assert_eq!(distance_horosphere_horosphere(u1, 2.0 * u1), Err(LorentzError::SameCentre));
    }

    #[test]
    fn halfspace_distance_examples() {
        let p = HalfSpacePoint { z: Complex64::new(0., 0.), t: 1.0 };
        assert_eq!(halfspace_distance(p, p), 0.0);
        let q = HalfSpacePoint { z: Complex64::new(0., 0.), t: E };
        assert!((halfspace_distance(p, q) - 1.0).abs() < 1e-14);
        let q = HalfSpacePoint { z: Complex64::new(1., 0.), t: 1.0 };
        assert!((halfspace_distance(p, q) - 1.5f64.acosh()).abs() < 1e-15);
    }

    #[test]
    fn model_round_trip_small() {
        let x = ModelPoint::hyperboloid(halfspace_to_minkowski(Complex64::new(0.2, 0.4), 0.7)).unwrap();
        let h = ModelPoint::HalfSpace(x.to_half_space());
        let back = ModelPoint::Projective(h.to_projective()).to_hyperboloid();
        for i in 0..4 {
            assert!((back.x[i] - x.to_hyperboloid().x[i]).abs() < 1e-12);
        }
        assert!(ModelPoint::projective([0.8, 0.8, 0.0]).is_err());
        assert!(ModelPoint::half_space(Complex64::new(0., 0.), -1.0).is_err());
    }

    #[test]
    fn footprint_of_light_vector() {
        let z = Complex64::new(-0.4, 2.5);
        match footprint(light_vector(z)) {
            BoundaryPoint::Finite(w) => assert!((w - z).norm() < 1e-14),
            BoundaryPoint::Infinity => panic!(),
        }
        assert_eq!(footprint(E_INF), BoundaryPoint::Infinity);
    }
}
