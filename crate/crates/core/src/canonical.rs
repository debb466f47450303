//! Safe horospherical cross-sections, tilt classification of faces and the
//! flip algorithm towards the Kojima decomposition.

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::PI;

use nalgebra::{Matrix4, Rotation3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::lorentz::{
    boost, distance_horosphere_horosphere, distance_horosphere_plane, footprint, hemisphere_radius, lorentz_dot, BoundaryPoint, MVec, E_INF,
};
use crate::tetshape::{
    angles_from_vertices, edge_slot, frame, horosphere_circumradius, others, tilts, validate_angles, HoroRadii, ShapeError, TetAngles, TetShape,
};
use crate::tol::{EPS_GEOM, EPS_TILT};
use crate::triangulation::{move_three_two, move_two_three, Classes, Tetrahedron, Triangulation, TriangulationError, VertexKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CanonicalError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Triangulation(#[from] TriangulationError),
    #[error("cusp development exceeded {0} tetrahedra")]
    DevelopmentOverflow(usize),
    #[error("no truncated vertices: safe heights need a non-empty boundary")]
    NotApplicable,
    #[error("cusp {0}: the development shows fewer than two distinct truncation radii")]
    NoSecondRadius(usize),
    #[error("vertex class {0} is not a toric cusp")]
    NotACusp(usize),
    #[error("face {1} of tetrahedron {0} is glued to its own tetrahedron")]
    SelfAdjacentFace(usize, usize),
    #[error("singular gluing frame at face {1} of tetrahedron {0}")]
    SingularFrame(usize, usize),
    #[error("expected {0} entries, got {1}")]
    WrongLength(usize, usize),
    #[error("move produced a non-geometric tetrahedron: {0}")]
    NonGeometricMove(String),
}

type Result<T> = std::result::Result<T, CanonicalError>;

/// Default cap on developed tetrahedra per cusp.
pub const DEVELOPMENT_CAP: usize = 100_000;

/// `k(r1, r2, d)`: a height above which a horosphere is safe.
pub fn k_height(r1: f64, r2: f64, d: f64) -> f64 {
    3f64.sqrt() * (r1 * r1 + d * d / 4.0) / (r1 - r2)
}

// ---------------------------------------------------------------------------
// lifts

/// Vertex vectors (ideal ones scaled by their radius, truncated ones unit)
/// and outward unit face normals of one tetrahedron in its own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Lift {
    pub verts: [MVec; 4],
    pub normals: [MVec; 4],
}

pub fn lift_tet(tet: &Tetrahedron, angles: &TetAngles, radii: &HoroRadii) -> std::result::Result<Lift, ShapeError> {
    let f = frame(&tet.comb, angles, tet.orientation)?;
    let mut verts = [MVec::raw([0.0; 4]); 4];
    for (v, x) in verts.iter_mut().enumerate() {
        *x = f.lifted_vertex(&tet.comb, v, radii)?;
    }
    Ok(Lift { verts, normals: f.normals })
}

fn lift_all(tri: &Triangulation, angles: &[TetAngles], radii: &[HoroRadii]) -> Result<Vec<Lift>> {
    check_len(tri, angles.len())?;
    check_len(tri, radii.len())?;
    tri.tets.par_iter().zip(angles.par_iter().zip(radii.par_iter())).map(|(t, (a, r))| lift_tet(t, a, r).map_err(CanonicalError::from)).collect()
}

fn check_len(tri: &Triangulation, n: usize) -> Result<()> {
    if n != tri.len() {
        return Err(CanonicalError::WrongLength(tri.len(), n));
    }
    Ok(())
}

fn columns(c: [MVec; 4]) -> Matrix4<f64> {
    Matrix4::from_columns(&c.map(|v| v.to_vector()))
}

/// Map taking the neighbour across face `f` of `t` from its own frame into
/// the frame of `t`, matching the shared face and its normal.
fn glue_matrix(tri: &Triangulation, lifts: &[Lift], t: usize, f: usize) -> Result<Matrix4<f64>> {
    let g = tri.tets[t].glued(f);
    let (a, b) = (&lifts[t], &lifts[g.tet]);
    let o = others(f);
    let x = columns([a.verts[o[0]], a.verts[o[1]], a.verts[o[2]], -a.normals[f]]);
    let p = |v: usize| g.perm.apply(v);
    let y = columns([b.verts[p(o[0])], b.verts[p(o[1])], b.verts[p(o[2])], b.normals[p(f)]]);
    let yi = y.try_inverse().ok_or(CanonicalError::SingularFrame(t, f))?;
    Ok(x * yi)
}

/// Lorentz map sending the future light-like `u` to `E_INF`.
fn cusp_frame(u: MVec) -> Matrix4<f64> {
    let s = Vector3::new(u.x[1], u.x[2], u.x[3]);
    let rot = Rotation3::rotation_between(&s, &Vector3::z()).unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), PI));
    let mut r = Matrix4::identity();
    r.fixed_view_mut::<3, 3>(1, 1).copy_from(rot.matrix());
    let w = MVec::from_vector(&(r * u.to_vector()));
    boost(3, -w.x[0].ln()) * r
}

// ---------------------------------------------------------------------------
// base radii

/// Radii that agree across every gluing, normalised so that the first link
/// triangle of each cusp has circumradius 1.
pub fn base_radii(tri: &Triangulation, classes: &Classes, angles: &[TetAngles]) -> Vec<HoroRadii> {
    let mut out = vec![HoroRadii::default(); tri.len()];
    for vc in classes.vertices.iter().filter(|c| c.kind == VertexKind::Ideal) {
        let (t0, v0) = vc.members[0];
        out[t0].0[v0] = Some(1.0);
        let mut queue = VecDeque::from([(t0, v0)]);
        while let Some((t, v)) = queue.pop_front() {
            let r = out[t].0[v].unwrap();
            for f in others(v) {
                let g = tri.tets[t].glued(f);
                let (nt, nv, nf) = (g.tet, g.perm.apply(v), g.perm.apply(f));
                if out[nt].0[nv].is_none() {
                    // the shared side has length 2 R sin(angle at the opposite corner)
                    out[nt].0[nv] = Some(r * angles[t].at(v, f).sin() / angles[nt].at(nv, nf).sin());
                    queue.push_back((nt, nv));
                }
            }
        }
    }
    out
}

/// Radii giving every cusp the cross-section area of the same number of
/// regular triangles with circumradius 1.
pub fn equal_area_radii(tri: &Triangulation, angles: &[TetAngles]) -> Result<Vec<HoroRadii>> {
    check_len(tri, angles.len())?;
    let classes = tri.classes()?;
    let mut radii = base_radii(tri, &classes, angles);
    let unit = 3.0 * 3f64.sqrt() / 4.0;
    for vc in classes.vertices.iter().filter(|c| c.kind == VertexKind::Ideal) {
        let area: f64 = vc
            .members
            .iter()
            .map(|&(t, v)| {
                let r = radii[t].0[v].unwrap();
                2.0 * r * r * others(v).iter().map(|&w| angles[t].at(v, w).sin()).product::<f64>()
            })
            .sum();
        let s = (unit * vc.members.len() as f64 / area).sqrt();
        for &(t, v) in &vc.members {
            radii[t].0[v] = radii[t].0[v].map(|r| r * s);
        }
    }
    Ok(radii)
}

/// Radii of the horospheres at the given heights, each height read in the
/// frame where the base radii of its cusp sit at height 1.
pub fn radii_from_heights(tri: &Triangulation, angles: &[TetAngles], heights: &[(usize, f64)]) -> Result<Vec<HoroRadii>> {
    check_len(tri, angles.len())?;
    let classes = tri.classes()?;
    let mut radii = base_radii(tri, &classes, angles);
    for (t, r) in radii.iter_mut().enumerate() {
        for v in 0..4 {
            if let Some(x) = r.0[v].as_mut() {
                let vc = classes.vertex_of[t][v];
                let h = heights.iter().find(|c| c.0 == vc).ok_or(CanonicalError::NotACusp(vc))?.1;
                *x /= h;
            }
        }
    }
    Ok(radii)
}

/// Inverse of [`radii_from_heights`] for radii that agree across gluings.
pub fn heights_from_radii(tri: &Triangulation, angles: &[TetAngles], radii: &[HoroRadii]) -> Result<Vec<(usize, f64)>> {
    check_len(tri, angles.len())?;
    check_len(tri, radii.len())?;
    let classes = tri.classes()?;
    let base = base_radii(tri, &classes, angles);
    classes
        .vertices
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == VertexKind::Ideal)
        .map(|(i, c)| {
            let (t, v) = c.members[0];
            let r = radii[t].0[v].ok_or(CanonicalError::Shape(ShapeError::MissingRadius(v)))?;
            Ok((i, base[t].0[v].unwrap() / r))
        })
        .collect::<Result<_>>()
}

// ---------------------------------------------------------------------------
// cusp development

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stage {
    /// Placed at infinity across vertical faces.
    Vertical,
    /// Glued in layers until two radii appear.
    Layered,
    /// Glued while it may still meet the cylinder over the slice.
    Covering,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DevCopy {
    pub tet: usize,
    /// Local vertex sitting at infinity, for the vertical copies.
    pub at_infinity: Option<usize>,
    /// From the tetrahedron's own frame to the cusp frame.
    pub matrix: Matrix4<f64>,
    pub stage: Stage,
}

/// A finite piece of the universal cover around one cusp, with the cusp
/// at infinity and its first link triangle at height 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CuspDevelopment {
    pub vertex_class: usize,
    pub copies: Vec<DevCopy>,
    /// Largest radius of the faces opposite the cusp.
    pub rho: f64,
    /// Largest truncation radius among the vertical copies.
    pub r: Option<f64>,
    /// Corners of the projected link triangles.
    pub omega: Vec<Complex64>,
    pub d: f64,
    pub r1_prime: f64,
    pub r2_prime: f64,
    pub r1: f64,
    pub r2: f64,
}

struct Developer<'a> {
    tri: &'a Triangulation,
    lifts: &'a [Lift],
    glue: HashMap<(usize, usize), Matrix4<f64>>,
    copies: Vec<DevCopy>,
    seen: HashSet<(usize, [i64; 3])>,
    cap: usize,
}

impl Developer<'_> {
    fn glue(&mut self, t: usize, f: usize) -> Result<Matrix4<f64>> {
        if let Some(m) = self.glue.get(&(t, f)) {
            return Ok(*m);
        }
        let m = glue_matrix(self.tri, self.lifts, t, f)?;
        self.glue.insert((t, f), m);
        Ok(m)
    }

    /// Identifies a copy by the half-space position of a fixed point.
    fn key(tet: usize, m: &Matrix4<f64>) -> (usize, [i64; 3]) {
        let p = m.column(0);
        let den = p[0] - p[3];
        let q = |x: f64| (x * 1e6).round() as i64;
        (tet, [q(-den.ln()), q(p[1]), q(p[2])])
    }

    /// Neighbour of copy `c` across face `f`, if not placed yet.
    fn across(&mut self, c: usize, f: usize, stage: Stage) -> Result<Option<(DevCopy, usize)>> {
        let (t, m) = (self.copies[c].tet, self.copies[c].matrix);
        let g = self.tri.tets[t].glued(f);
        let nm = m * self.glue(t, f)?;
        if self.seen.contains(&Self::key(g.tet, &nm)) {
            return Ok(None);
        }
        Ok(Some((DevCopy { tet: g.tet, at_infinity: None, matrix: nm, stage }, g.perm.apply(f))))
    }

    fn push(&mut self, copy: DevCopy) -> Result<usize> {
        if self.copies.len() >= self.cap {
            return Err(CanonicalError::DevelopmentOverflow(self.cap));
        }
        self.seen.insert(Self::key(copy.tet, &copy.matrix));
        self.copies.push(copy);
        Ok(self.copies.len() - 1)
    }

    fn vector(&self, c: &DevCopy, v: usize) -> MVec {
        self.lifts[c.tet].verts[v].apply(&c.matrix)
    }

    fn truncation_radii(&self, c: &DevCopy) -> Vec<f64> {
        let tet = &self.tri.tets[c.tet];
        (0..4).filter(|&v| !tet.comb.ideal[v]).map(|v| hemisphere_radius(self.vector(c, v))).collect()
    }

    fn has_vertex_at_infinity(&self, c: &DevCopy) -> bool {
        let tet = &self.tri.tets[c.tet];
        (0..4).any(|v| tet.comb.ideal[v] && footprint(self.vector(c, v)) == BoundaryPoint::Infinity)
    }

    /// Smallest face ball containing the copy, as `(centre, radius)`.
    fn enclosing_ball(&self, c: &DevCopy) -> Option<(Complex64, f64)> {
        (0..4)
            .filter_map(|k| {
                let n = self.lifts[c.tet].normals[k].apply(&c.matrix);
                let e = lorentz_dot(n, E_INF);
                match footprint(n) {
                    BoundaryPoint::Finite(z) if e > EPS_GEOM => Some((z, 1.0 / e)),
                    _ => None,
                }
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Distinct values in decreasing order, merged at relative tolerance.
fn distinct_desc(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        if out.last().is_none_or(|&y| (y - x).abs() > 1e-9 * y.abs().max(1.0)) {
            out.push(x);
        }
    }
    out
}

pub fn develop_cusp(tri: &Triangulation, angles: &[TetAngles], vertex_class: usize) -> Result<CuspDevelopment> {
    develop_cusp_capped(tri, angles, vertex_class, DEVELOPMENT_CAP)
}

pub fn develop_cusp_capped(tri: &Triangulation, angles: &[TetAngles], vertex_class: usize, cap: usize) -> Result<CuspDevelopment> {
    check_len(tri, angles.len())?;
    let classes = tri.classes()?;
    let base = base_radii(tri, &classes, angles);
    let lifts = lift_all(tri, angles, &base)?;
    develop_with(tri, &classes, &lifts, vertex_class, cap)
}

fn develop_with(tri: &Triangulation, classes: &Classes, lifts: &[Lift], vc: usize, cap: usize) -> Result<CuspDevelopment> {
    let class = classes.vertices.get(vc).ok_or(CanonicalError::NotACusp(vc))?;
    if class.kind != VertexKind::Ideal {
        return Err(CanonicalError::NotACusp(vc));
    }
    if !tri.has_truncated() {
        return Err(CanonicalError::NotApplicable);
    }
    let mut dev = Developer { tri, lifts, glue: HashMap::new(), copies: Vec::new(), seen: HashSet::new(), cap };

    // vertical copies, one per link triangle
    let (t0, v0) = class.members[0];
    let start = cusp_frame(lifts[t0].verts[v0]);
    dev.push(DevCopy { tet: t0, at_infinity: Some(v0), matrix: start, stage: Stage::Vertical })?;
    let mut placed = HashSet::from([(t0, v0)]);
    let mut i = 0;
    while i < dev.copies.len() {
        let (t, v) = (dev.copies[i].tet, dev.copies[i].at_infinity.unwrap());
        for f in others(v) {
            let g = tri.tets[t].glued(f);
            let nv = g.perm.apply(v);
            if placed.insert((g.tet, nv)) {
                let m = dev.copies[i].matrix * dev.glue(t, f)?;
                dev.push(DevCopy { tet: g.tet, at_infinity: Some(nv), matrix: m, stage: Stage::Vertical })?;
            }
        }
        i += 1;
    }
    let vertical = dev.copies.len();

    let mut rho: f64 = 0.0;
    let mut omega = Vec::new();
    let mut radii = Vec::new();
    for c in &dev.copies {
        let v = c.at_infinity.unwrap();
        rho = rho.max(hemisphere_radius(lifts[c.tet].normals[v].apply(&c.matrix)));
        for w in others(v) {
            if let BoundaryPoint::Finite(z) = footprint(dev.vector(c, w)) {
                omega.push(z);
            }
        }
        radii.extend(dev.truncation_radii(c));
    }
    let r = radii.iter().copied().reduce(f64::max);
    let mut d: f64 = 0.0;
    for (a, za) in omega.iter().enumerate() {
        for zb in &omega[a + 1..] {
            d = d.max((za - zb).norm());
        }
    }

    // layers below the vertical copies until two radii show up
    let mut frontier: Vec<(usize, usize)> = (0..vertical).map(|c| (c, dev.copies[c].at_infinity.unwrap())).collect();
    while distinct_desc(&radii).len() < 2 {
        if frontier.is_empty() {
            return Err(CanonicalError::NoSecondRadius(vc));
        }
        let mut next = Vec::new();
        for (c, f) in std::mem::take(&mut frontier) {
            if let Some((copy, entry)) = dev.across(c, f, Stage::Layered)? {
                radii.extend(dev.truncation_radii(&copy));
                let id = dev.push(copy)?;
                next.extend((0..4).filter(|&k| k != entry).map(|k| (id, k)));
            }
        }
        frontier = next;
    }
    let top = distinct_desc(&radii);
    let (r1_prime, r2_prime) = (top[0], top[1]);

    // everything that may still reach the cylinder over the slice
    let centre = omega.iter().sum::<Complex64>() / omega.len().max(1) as f64;
    let spread = omega.iter().map(|z| (z - centre).norm()).fold(0.0, f64::max);
    let mut queue: VecDeque<(usize, usize)> = frontier.into();
    while let Some((c, f)) = queue.pop_front() {
        let Some((copy, entry)) = dev.across(c, f, Stage::Covering)? else { continue };
        if dev.has_vertex_at_infinity(&copy) {
            continue;
        }
        let meets = match dev.enclosing_ball(&copy) {
            Some((z, big_r)) => big_r > r2_prime && (z - centre).norm() - spread < (big_r * big_r - r2_prime * r2_prime).sqrt(),
            None => true,
        };
        if meets {
            radii.extend(dev.truncation_radii(&copy));
            let id = dev.push(copy)?;
            queue.extend((0..4).filter(|&k| k != entry).map(|k| (id, k)));
        }
    }
    let fin = distinct_desc(&radii);
    Ok(CuspDevelopment { vertex_class: vc, copies: dev.copies, rho, r, omega, d, r1_prime, r2_prime, r1: fin[0], r2: fin[1] })
}

// ---------------------------------------------------------------------------
// cross-sections

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CuspHeight {
    pub vertex_class: usize,
    pub height: f64,
    pub k: f64,
    pub r1: f64,
    pub r2: f64,
    pub d: f64,
    pub rho: f64,
    pub copies: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSection {
    pub cusps: Vec<CuspHeight>,
    pub lambda: f64,
    /// Radii at every ideal vertex, consistent across gluings.
    pub radii: Vec<HoroRadii>,
}

impl CrossSection {
    pub fn height_of(&self, vertex_class: usize) -> Option<f64> {
        self.cusps.iter().find(|c| c.vertex_class == vertex_class).map(|c| c.height)
    }

    /// Same cross-section with every height multiplied by `s`.
    pub fn scaled(&self, s: f64) -> CrossSection {
        let mut out = self.clone();
        for c in &mut out.cusps {
            c.height *= s;
        }
        for r in &mut out.radii {
            for x in r.0.iter_mut().flatten() {
                *x /= s;
            }
        }
        out
    }
}

pub fn cross_section(tri: &Triangulation, angles: &[TetAngles]) -> Result<CrossSection> {
    cross_section_capped(tri, angles, DEVELOPMENT_CAP).map(|(cs, _)| cs)
}

fn cross_section_capped(tri: &Triangulation, angles: &[TetAngles], cap: usize) -> Result<(CrossSection, Vec<CuspDevelopment>)> {
    check_len(tri, angles.len())?;
    let classes = tri.classes()?;
    let cusps: Vec<usize> = (0..classes.vertices.len()).filter(|&i| classes.vertices[i].kind == VertexKind::Ideal).collect();
    let base = base_radii(tri, &classes, angles);
    if cusps.is_empty() {
        return Ok((CrossSection { cusps: vec![], lambda: 1.0, radii: base }, vec![]));
    }
    let lifts = lift_all(tri, angles, &base)?;
    let devs: Vec<CuspDevelopment> = cusps.par_iter().map(|&vc| develop_with(tri, &classes, &lifts, vc, cap)).collect::<Result<_>>()?;
    let ks: Vec<f64> = devs.iter().map(|d| k_height(d.r1, d.r2, d.d)).collect();
    let lambda = devs.iter().zip(&ks).map(|(d, k)| k / d.r1).fold(0.0, f64::max);
    let heights: Vec<CuspHeight> = devs
        .iter()
        .zip(&ks)
        .map(|(d, &k)| CuspHeight {
            vertex_class: d.vertex_class,
            height: lambda * k,
            k,
            r1: d.r1,
            r2: d.r2,
            d: d.d,
            rho: d.rho,
            copies: d.copies.len(),
        })
        .collect();
    let hs: Vec<(usize, f64)> = heights.iter().map(|c| (c.vertex_class, c.height)).collect();
    let radii = radii_from_heights(tri, angles, &hs)?;
    Ok((CrossSection { cusps: heights, lambda, radii }, devs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub pairs_checked: usize,
    pub violations: usize,
    /// Smallest value of `1 - (e^{d1} + e^{d2}) / (2 e^{d12})` over the pairs.
    pub worst_margin: f64,
    pub second_hypothesis: String,
}

impl HypothesisReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks the horoball separation inequality on every pair of horosphere
/// lifts that appears in the developments, against the boundary planes that
/// appear there as well.
pub fn verify_cross_section(tri: &Triangulation, angles: &[TetAngles], cs: &CrossSection) -> Result<HypothesisReport> {
    let guaranteed = "guaranteed by construction".to_string();
    let classes = tri.classes()?;
    if cs.cusps.is_empty() {
        return Ok(HypothesisReport { pairs_checked: 0, violations: 0, worst_margin: 1.0, second_hypothesis: guaranteed });
    }
    let base = base_radii(tri, &classes, angles);
    let lifts = lift_all(tri, angles, &base)?;
    let mut pairs_checked = 0;
    let mut violations = 0;
    let mut worst_margin = f64::INFINITY;
    for ch in &cs.cusps {
        let dev = develop_with(tri, &classes, &lifts, ch.vertex_class, DEVELOPMENT_CAP)?;
        let q = |z: Complex64| ((z.re * 1e6).round() as i64, (z.im * 1e6).round() as i64);
        let mut horo: Vec<MVec> = Vec::new();
        let mut horo_seen = HashSet::new();
        let mut planes: Vec<MVec> = Vec::new();
        let mut plane_seen = HashSet::new();
        for c in &dev.copies {
            let tet = &tri.tets[c.tet];
            for v in 0..4 {
                let x = lifts[c.tet].verts[v].apply(&c.matrix);
                let key = match footprint(x) {
                    BoundaryPoint::Infinity => None,
                    BoundaryPoint::Finite(z) => Some(q(z)),
                };
                if tet.comb.ideal[v] {
                    let h = cs.height_of(classes.vertex_of[c.tet][v]).unwrap();
                    if horo_seen.insert(key) {
                        horo.push(h * x);
                    }
                } else if plane_seen.insert((key, (hemisphere_radius(x) * 1e6).round() as i64)) {
                    planes.push(x);
                }
            }
        }
        let to_boundary = |u: MVec| -> Result<f64> {
            let mut best = f64::INFINITY;
            for &w in &planes {
                let d = distance_horosphere_plane(u, w).map_err(|_| CanonicalError::Shape(ShapeError::DegenerateLift))?;
                best = best.min(d);
            }
            Ok(best)
        };
        let dist: Vec<f64> = horo.iter().map(|&u| to_boundary(u)).collect::<Result<_>>()?;
        for a in 0..horo.len() {
            for b in a + 1..horo.len() {
                let Ok(d12) = distance_horosphere_horosphere(horo[a], horo[b]) else { continue };
                pairs_checked += 1;
                let margin = 1.0 - (dist[a].exp() + dist[b].exp()) / (2.0 * d12.exp());
                worst_margin = worst_margin.min(margin);
                if margin <= 0.0 {
                    violations += 1;
                }
            }
        }
    }
    Ok(HypothesisReport { pairs_checked, violations, worst_margin, second_hypothesis: guaranteed })
}

// ---------------------------------------------------------------------------
// tilts

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FaceClass {
    Convex,
    Flat,
    Concave,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceTilt {
    pub tet: usize,
    pub face: usize,
    pub other_tet: usize,
    pub other_face: usize,
    pub t: f64,
    pub t_other: f64,
    pub sum: f64,
    /// `sum` divided by the largest tilt magnitude in the triangulation.
    pub normalized: f64,
    pub class: FaceClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltReport {
    pub scale: f64,
    pub faces: Vec<FaceTilt>,
}

pub fn classify(normalized: f64, eps: f64) -> FaceClass {
    if normalized > eps {
        FaceClass::Concave
    } else if normalized >= -eps {
        FaceClass::Flat
    } else {
        FaceClass::Convex
    }
}

pub fn tilt_table(tri: &Triangulation, angles: &[TetAngles], radii: &[HoroRadii]) -> Result<Vec<[f64; 4]>> {
    check_len(tri, angles.len())?;
    check_len(tri, radii.len())?;
    tri.tets
        .par_iter()
        .zip(angles.par_iter().zip(radii.par_iter()))
        .map(|(tet, (a, r))| {
            let shape = TetShape::new(tet.comb, *a)?;
            Ok(tilts(&shape, r)?)
        })
        .collect()
}

/// Every face once, listed from its smaller `(tet, face)` side.
pub fn tilt_report(tri: &Triangulation, angles: &[TetAngles], radii: &[HoroRadii], eps: f64) -> Result<TiltReport> {
    let table = tilt_table(tri, angles, radii)?;
    let scale = table.iter().flatten().fold(0.0f64, |m, t| m.max(t.abs())).max(f64::MIN_POSITIVE);
    let mut faces = Vec::new();
    for (t, tet) in tri.tets.iter().enumerate() {
        for f in 0..4 {
            let g = tet.glued(f);
            let nf = g.perm.apply(f);
            if (g.tet, nf) < (t, f) {
                continue;
            }
            let (a, b) = (table[t][f], table[g.tet][nf]);
            let sum = a + b;
            faces.push(FaceTilt {
                tet: t,
                face: f,
                other_tet: g.tet,
                other_face: nf,
                t: a,
                t_other: b,
                sum,
                normalized: sum / scale,
                class: classify(sum / scale, eps),
            });
        }
    }
    Ok(TiltReport { scale, faces })
}

pub fn face_tilt_sum(tri: &Triangulation, angles: &[TetAngles], radii: &[HoroRadii], tet: usize, face: usize, eps: f64) -> Result<FaceTilt> {
    let report = tilt_report(tri, angles, radii, eps)?;
    let g = tri.tets[tet].glued(face);
    let key = (tet, face).min((g.tet, g.perm.apply(face)));
    Ok(report.faces.into_iter().find(|x| (x.tet, x.face) == key).expect("every face is listed"))
}

// ---------------------------------------------------------------------------
// geometric moves

/// A triangulation with dihedral angles and radii at its ideal vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Geometric {
    pub tri: Triangulation,
    pub angles: Vec<TetAngles>,
    pub radii: Vec<HoroRadii>,
}

impl Geometric {
    pub fn new(tri: Triangulation, angles: Vec<TetAngles>, radii: Vec<HoroRadii>) -> Result<Self> {
        check_len(&tri, angles.len())?;
        check_len(&tri, radii.len())?;
        Ok(Geometric { tri, angles, radii })
    }

    fn lift(&self, t: usize) -> Result<Lift> {
        Ok(lift_tet(&self.tri.tets[t], &self.angles[t], &self.radii[t])?)
    }

    /// Neighbour across `(t, f)` expressed in the frame of `t`.
    fn neighbour_in_frame(&self, t: usize, f: usize) -> Result<(usize, Lift)> {
        let g = self.tri.tets[t].glued(f);
        let (a, b) = (self.lift(t)?, self.lift(g.tet)?);
        let m = {
            let o = others(f);
            let p = |v: usize| g.perm.apply(v);
            let x = columns([a.verts[o[0]], a.verts[o[1]], a.verts[o[2]], -a.normals[f]]);
            let y = columns([b.verts[p(o[0])], b.verts[p(o[1])], b.verts[p(o[2])], b.normals[p(f)]]);
            x * y.try_inverse().ok_or(CanonicalError::SingularFrame(t, f))?
        };
        Ok((g.tet, Lift { verts: b.verts.map(|v| v.apply(&m)), normals: b.normals.map(|v| v.apply(&m)) }))
    }

    /// New shapes for `created`, each spanned by the listed points.
    fn rebuild(&self, tri: Triangulation, kept: &[Option<usize>], created: &[usize], spans: &[[MVec; 4]]) -> Result<Geometric> {
        let n = tri.len();
        let mut angles = vec![TetAngles([0.0; 6]); n];
        let mut radii = vec![HoroRadii::default(); n];
        for (old, k) in kept.iter().enumerate() {
            if let Some(k) = *k {
                angles[k] = self.angles[old];
                radii[k] = self.radii[old];
            }
        }
        for (&idx, x) in created.iter().zip(spans) {
            let comb = tri.tets[idx].comb;
            let a = angles_from_vertices(x, &comb)?;
            let report = validate_angles(&comb, &a);
            if !report.is_valid() {
                return Err(CanonicalError::NonGeometricMove(report.failures.join("; ")));
            }
            angles[idx] = a;
            for v in 0..4 {
                if comb.ideal[v] {
                    radii[idx].0[v] = Some(horosphere_circumradius(x, &comb, v)?);
                }
            }
        }
        Ok(Geometric { tri, angles, radii })
    }
}

/// Coefficients of `x4` in the basis of the vertices of `t`, scaled to
/// max-norm one, with the vertex opposite `face` first.
fn admissibility_coefficients(g: &Geometric, t: usize, face: usize) -> Result<[f64; 4]> {
    let b = g.tri.tets[t].glued(face);
    if b.tet == t {
        return Err(CanonicalError::SelfAdjacentFace(t, face));
    }
    let a = g.lift(t)?;
    let (_, nb) = g.neighbour_in_frame(t, face)?;
    let p4 = nb.verts[b.perm.apply(face)];
    let sol = columns(a.verts).lu().solve(&p4.to_vector()).ok_or(CanonicalError::SingularFrame(t, face))?;
    let scale = sol.amax().max(f64::MIN_POSITIVE);
    let [x1, x2, x3] = others(face);
    Ok([sol[face] / scale, sol[x1] / scale, sol[x2] / scale, sol[x3] / scale])
}

/// The segment between the two opposite vertices crosses the interior of
/// the shared face.
pub fn admissible(g: &Geometric, tet: usize, face: usize) -> Result<bool> {
    let c = admissibility_coefficients(g, tet, face)?;
    Ok(c[0] < -EPS_GEOM && c[1..].iter().all(|&x| x > EPS_GEOM))
}

pub fn geometric_two_three(g: &Geometric, tet: usize, face: usize) -> Result<(Geometric, [usize; 3])> {
    let (tri, rec) = move_two_three(&g.tri, tet, face)?;
    let a = g.lift(tet)?;
    let (_, b) = g.neighbour_in_frame(tet, face)?;
    let av = rec.a_vertices;
    let p = [a.verts[av[0]], a.verts[av[1]], a.verts[av[2]], a.verts[av[3]], b.verts[rec.b4]];
    let spans: Vec<[MVec; 4]> = (1..4)
        .map(|k| {
            let ij: Vec<usize> = (1..4).filter(|&x| x != k).collect();
            [p[0], p[ij[0]], p[ij[1]], p[4]]
        })
        .collect();
    let out = g.rebuild(tri, &rec.kept, &rec.created, &spans)?;
    Ok((out, rec.created))
}

pub fn geometric_three_two(g: &Geometric, edge_class: usize) -> Result<(Geometric, [usize; 2])> {
    let (tri, rec) = move_three_two(&g.tri, edge_class)?;
    let t0 = rec.removed[0];
    let a = g.lift(t0)?;
    // the second tetrahedron is reached through the face opposite Q3
    let (t1, b) = g.neighbour_in_frame(t0, rec.points[3].1)?;
    debug_assert_eq!(t1, rec.removed[1]);
    let pt = |i: usize| if i == 2 { b.verts[rec.points[2].1] } else { a.verts[rec.points[i].1] };
    let spans = [[pt(0), pt(1), pt(2), pt(3)], [pt(4), pt(1), pt(2), pt(3)]];
    let out = g.rebuild(tri, &rec.kept, &rec.created, &spans)?;
    Ok((out, rec.created))
}

// ---------------------------------------------------------------------------
// the flip algorithm

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonizeConfig {
    /// Defaults to `10 n^3` for `n` initial tetrahedra.
    pub max_moves: Option<usize>,
    pub tilt_eps: f64,
    pub development_cap: usize,
    /// Radii to use instead of the computed cross-section.
    #[serde(skip)]
    pub radii: Option<Vec<HoroRadii>>,
}

impl Default for CanonizeConfig {
    fn default() -> Self {
        CanonizeConfig { max_moves: None, tilt_eps: EPS_TILT, development_cap: DEVELOPMENT_CAP, radii: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CanonStatus {
    /// Every face strictly convex.
    Canonical,
    /// No concave face, some flat ones.
    Subdivision,
    /// A concave face remains and no move applies, or the cap was hit.
    Stuck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MoveKind {
    TwoThree,
    ThreeTwo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoveLog {
    pub kind: MoveKind,
    pub tet: usize,
    pub face: usize,
    /// Normalised tilt sum of the face that triggered the move.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalCells {
    /// Flat faces as `(tet, face)`.
    pub transparent: Vec<(usize, usize)>,
    /// Tetrahedra grouped into cells across transparent faces.
    pub cells: Vec<Vec<usize>>,
    /// Pairs of distinct cells sharing an opaque face.
    pub adjacency: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonizeOutcome {
    pub status: CanonStatus,
    pub cap_hit: bool,
    pub moves: Vec<MoveLog>,
    pub state: Geometric,
    pub tilts: TiltReport,
    pub cells: CanonicalCells,
    pub cross_section: Option<CrossSection>,
    /// Faces glued to their own tetrahedron seen non-convex, over all rounds.
    pub self_adjacent_violations: usize,
    /// Faces created by a move that were not convex right after it.
    pub creation_violations: usize,
}

/// Radii for the tilt computation: safe heights when there is boundary,
/// equal-area cusps when there is none, nothing for compact manifolds.
pub fn section_radii(tri: &Triangulation, angles: &[TetAngles], cap: usize) -> Result<(Vec<HoroRadii>, Option<CrossSection>)> {
    if !tri.has_ideal() {
        return Ok((vec![HoroRadii::default(); tri.len()], None));
    }
    if !tri.has_truncated() {
        return Ok((equal_area_radii(tri, angles)?, None));
    }
    let (cs, _) = cross_section_capped(tri, angles, cap)?;
    Ok((cs.radii.clone(), Some(cs)))
}

fn cells_of(tri: &Triangulation, report: &TiltReport) -> CanonicalCells {
    let n = tri.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    let mut transparent = Vec::new();
    for f in report.faces.iter().filter(|f| f.class == FaceClass::Flat) {
        transparent.push((f.tet, f.face));
        let (a, b) = (find(&mut parent, f.tet), find(&mut parent, f.other_tet));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut index = HashMap::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut cell_of = vec![0; n];
    for t in 0..n {
        let r = find(&mut parent, t);
        let i = *index.entry(r).or_insert_with(|| {
            cells.push(Vec::new());
            cells.len() - 1
        });
        cells[i].push(t);
        cell_of[t] = i;
    }
    let mut adjacency: Vec<(usize, usize)> = report
        .faces
        .iter()
        .filter(|f| f.class != FaceClass::Flat)
        .map(|f| (cell_of[f.tet].min(cell_of[f.other_tet]), cell_of[f.tet].max(cell_of[f.other_tet])))
        .filter(|(a, b)| a != b)
        .collect();
    adjacency.sort_unstable();
    adjacency.dedup();
    CanonicalCells { transparent, cells, adjacency }
}

/// Non-zero edges of a face shared by three distinct tetrahedra.
fn valence_three_edges(classes: &Classes, t: usize, f: usize) -> Vec<usize> {
    let o = others(f);
    let mut out = Vec::new();
    for (x, y) in [(o[0], o[1]), (o[0], o[2]), (o[1], o[2])] {
        let ec = classes.edge_of[t][edge_slot(x, y)];
        let class = &classes.edges[ec];
        if class.zero || class.valence() != 3 {
            continue;
        }
        let tets: HashSet<usize> = class.members.iter().map(|m| m.tet).collect();
        if tets.len() == 3 && !out.contains(&ec) {
            out.push(ec);
        }
    }
    out
}

pub fn canonize(tri: &Triangulation, angles: &[TetAngles], config: &CanonizeConfig) -> Result<CanonizeOutcome> {
    check_len(tri, angles.len())?;
    let (radii, cross_section) = match &config.radii {
        Some(r) => (r.clone(), None),
        None => section_radii(tri, angles, config.development_cap)?,
    };
    let mut state = Geometric::new(tri.clone(), angles.to_vec(), radii)?;
    let cap = config.max_moves.unwrap_or(10 * tri.len().pow(3));
    let mut moves = Vec::new();
    let mut self_adjacent_violations = 0;
    let mut creation_violations = 0;
    let mut fresh: Vec<usize> = Vec::new();
    loop {
        let report = tilt_report(&state.tri, &state.angles, &state.radii, config.tilt_eps)?;
        self_adjacent_violations += report.faces.iter().filter(|f| f.tet == f.other_tet && f.class != FaceClass::Convex).count();
        creation_violations +=
            report.faces.iter().filter(|f| fresh.contains(&f.tet) && fresh.contains(&f.other_tet) && f.class != FaceClass::Convex).count();
        let mut concave: Vec<&FaceTilt> = report.faces.iter().filter(|f| f.class == FaceClass::Concave && f.tet != f.other_tet).collect();
        let finish = |status, cap_hit, state: Geometric, report: TiltReport, moves, sav, cv| {
            let cells = cells_of(&state.tri, &report);
            CanonizeOutcome {
                status,
                cap_hit,
                moves,
                state,
                tilts: report,
                cells,
                cross_section: cross_section.clone(),
                self_adjacent_violations: sav,
                creation_violations: cv,
            }
        };
        if concave.is_empty() && !report.faces.iter().any(|f| f.class == FaceClass::Concave) {
            let status = if report.faces.iter().any(|f| f.class == FaceClass::Flat) { CanonStatus::Subdivision } else { CanonStatus::Canonical };
            return Ok(finish(status, false, state, report, moves, self_adjacent_violations, creation_violations));
        }
        if moves.len() >= cap {
            return Ok(finish(CanonStatus::Stuck, true, state, report, moves, self_adjacent_violations, creation_violations));
        }
        concave.sort_by(|a, b| b.normalized.total_cmp(&a.normalized).then((a.tet, a.face).cmp(&(b.tet, b.face))));
        let classes = state.tri.classes()?;
        let mut applied = None;
        for face in &concave {
            if admissible(&state, face.tet, face.face)? {
                if let Ok((next, created)) = geometric_two_three(&state, face.tet, face.face) {
                    applied = Some((next, created.to_vec(), MoveKind::TwoThree, *face));
                    break;
                }
            }
            let mut done = false;
            for ec in valence_three_edges(&classes, face.tet, face.face) {
                if let Ok((next, created)) = geometric_three_two(&state, ec) {
                    applied = Some((next, created.to_vec(), MoveKind::ThreeTwo, *face));
                    done = true;
                    break;
                }
            }
            if done {
                break;
            }
        }
        let Some((next, created, kind, face)) = applied else {
            return Ok(finish(CanonStatus::Stuck, false, state, report, moves, self_adjacent_violations, creation_violations));
        };
        moves.push(MoveLog { kind, tet: face.tet, face: face.face, normalized: face.normalized });
        state = next;
        fresh = created;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, SolveStatus, SolverConfig};
    use crate::triangulation::examples;
    use crate::triangulation::isosig;

    fn solved(tri: &Triangulation) -> Vec<TetAngles> {
        let out = solve(tri, &SolverConfig::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Solved);
        let sys = crate::equations::assemble(tri).unwrap();
        out.tet_angles(&sys)
    }

    #[test]
    fn height_constant() {
        assert!((k_height(1.0, 0.5, 2.0) - 4.0 * 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn glue_maps_are_isometries() {
        let tri = examples::mixed_pair();
        let angles = solved(&tri);
        let classes = tri.classes().unwrap();
        let lifts = lift_all(&tri, &angles, &base_radii(&tri, &classes, &angles)).unwrap();
        let j = crate::lorentz::metric();
        for t in 0..tri.len() {
            for f in 0..4 {
                let m = glue_matrix(&tri, &lifts, t, f).unwrap();
                assert!((m.transpose() * j * m - j).amax() < 1e-8, "{t} {f}");
            }
        }
    }

    #[test]
    fn cusp_frame_sends_to_infinity() {
        let u = crate::lorentz::light_vector(Complex64::new(0.3, -1.2));
        let m = cusp_frame(2.5 * u);
        let w = u.apply(&m);
        assert!((2.5 * w - E_INF).x.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn figure_eight_is_canonical() {
        let tri = examples::figure_eight();
        let angles = solved(&tri);
        let out = canonize(&tri, &angles, &CanonizeConfig::default()).unwrap();
        assert_eq!(out.status, CanonStatus::Canonical);
        assert!(out.moves.is_empty());
        let s0 = out.tilts.faces[0].sum;
        assert!(s0 < 0.0);
        assert!(out.tilts.faces.iter().all(|f| (f.sum - s0).abs() < 1e-9));
    }

    #[test]
    fn flip_round_trip() {
        let tri = examples::figure_eight();
        let angles = solved(&tri);
        let radii = equal_area_radii(&tri, &angles).unwrap();
        let g = Geometric::new(tri.clone(), angles, radii).unwrap();
        let (g2, _) = geometric_two_three(&g, 0, 0).unwrap();
        assert_eq!(g2.tri.len(), 3);
        let rep = tilt_report(&g2.tri, &g2.angles, &g2.radii, EPS_TILT).unwrap();
        assert!(rep.faces.iter().any(|f| f.class == FaceClass::Concave));
        let out = canonize(&g2.tri, &g2.angles, &CanonizeConfig::default()).unwrap();
        assert_eq!(out.moves.len(), 1);
        assert_eq!(out.moves[0].kind, MoveKind::ThreeTwo);
        assert_eq!(out.status, CanonStatus::Canonical);
        assert_eq!(isosig(&out.state.tri), isosig(&tri));
        assert_eq!(out.self_adjacent_violations, 0);
        assert_eq!(out.creation_violations, 0);
        for a in &out.state.angles {
            assert!(a.0.iter().all(|t| (t - PI / 3.0).abs() < 1e-8));
        }
    }

    /// Radii making all six octahedron vertices the same size: the axis
    /// cusp sees half a square side, the equator cusp half a diagonal.
    pub(crate) fn octahedral_radii(tri: &Triangulation) -> Vec<HoroRadii> {
        let c = tri.classes().unwrap();
        (0..tri.len()).map(|t| HoroRadii(std::array::from_fn(|v| Some(if c.vertex_of[t][v] == 0 { 1.0 } else { 2f64.sqrt() })))).collect()
    }

    #[test]
    fn heights_and_radii_invert() {
        let tri = examples::whitehead();
        let angles = solved(&tri);
        let hs = vec![(0, 1.0), (1, 0.5f64.sqrt())];
        let r = radii_from_heights(&tri, &angles, &hs).unwrap();
        assert!(r.iter().zip(octahedral_radii(&tri)).all(|(a, b)| (0..4).all(|v| (a.0[v].unwrap() - b.0[v].unwrap()).abs() < 1e-9)));
        let back = heights_from_radii(&tri, &angles, &r).unwrap();
        assert!(back.iter().zip(&hs).all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() < 1e-12));
    }

    #[test]
    fn whitehead_with_octahedral_radii_has_flat_faces() {
        let tri = examples::whitehead();
        let angles = solved(&tri);
        let cfg = CanonizeConfig { radii: Some(octahedral_radii(&tri)), ..Default::default() };
        let out = canonize(&tri, &angles, &cfg).unwrap();
        assert_eq!(out.status, CanonStatus::Subdivision);
        assert_eq!(out.cells.transparent.len(), 4);
        assert_eq!(out.cells.cells, vec![vec![0, 1, 2, 3]]);
        // equal radii at every vertex keep the four tetrahedra
        let out = canonize(&tri, &angles, &CanonizeConfig::default()).unwrap();
        assert_eq!(out.status, CanonStatus::Canonical);
    }

    #[test]
    fn compact_pair_needs_no_radii() {
        let tri = examples::compact_pair();
        let angles = solved(&tri);
        let cs = cross_section(&tri, &angles).unwrap();
        assert!(cs.cusps.is_empty());
        let out = canonize(&tri, &angles, &CanonizeConfig::default()).unwrap();
        assert_ne!(out.status, CanonStatus::Stuck);
        assert_eq!(out.self_adjacent_violations, 0);
    }

    #[test]
    fn mixed_pair_development() {
        let tri = examples::mixed_pair();
        let angles = solved(&tri);
        let dev = develop_cusp(&tri, &angles, tri.classes().unwrap().vertices.iter().position(|c| c.kind == VertexKind::Ideal).unwrap()).unwrap();
        assert!(dev.r1 > dev.r2 && dev.r2 > 0.0);
        assert!(dev.d > 0.0);
        assert!(dev.copies.iter().filter(|c| c.stage == Stage::Vertical).all(|c| c.at_infinity.is_some()));
        let cs = cross_section(&tri, &angles).unwrap();
        let h = cs.cusps[0].height;
        assert!(h > dev.rho.max(dev.r1));
        // one cusp: lambda = k / r1, so h = k^2 / r1
        assert!((h - cs.cusps[0].k.powi(2) / dev.r1).abs() < 1e-9 * h);
    }

    #[test]
    fn cross_section_radii_agree_across_faces() {
        let tri = examples::mixed_pair();
        let angles = solved(&tri);
        let cs = cross_section(&tri, &angles).unwrap();
        // the link side in a face has the same length seen from both sides
        for (t, tet) in tri.tets.iter().enumerate() {
            for v in (0..4).filter(|&v| tet.comb.ideal[v]) {
                for f in others(v) {
                    let g = tet.glued(f);
                    let (nt, nv, nf) = (g.tet, g.perm.apply(v), g.perm.apply(f));
                    let a = cs.radii[t].0[v].unwrap() * angles[t].at(v, f).sin();
                    let b = cs.radii[nt].0[nv].unwrap() * angles[nt].at(nv, nf).sin();
                    assert!((a - b).abs() < 1e-9 * a.abs());
                }
            }
        }
    }

    #[test]
    fn hypothesis_one_breaks_for_low_heights() {
        let tri = examples::mixed_pair();
        let angles = solved(&tri);
        let cs = cross_section(&tri, &angles).unwrap();
        let ok = verify_cross_section(&tri, &angles, &cs).unwrap();
        assert!(ok.pairs_checked > 0);
        assert!(ok.holds(), "{ok:?}");
        // both sides scale differently with the heights: h and h^2
        let tenth = verify_cross_section(&tri, &angles, &cs.scaled(0.1)).unwrap();
        assert!((1.0 - tenth.worst_margin - 10.0 * (1.0 - ok.worst_margin)).abs() < 1e-9);
        let low = verify_cross_section(&tri, &angles, &cs.scaled(1e-3)).unwrap();
        assert!(!low.holds(), "{low:?}");
    }

    #[test]
    fn regular_pair_is_admissible() {
        let tri = examples::figure_eight();
        let angles = solved(&tri);
        let radii = equal_area_radii(&tri, &angles).unwrap();
        let g = Geometric::new(tri, angles, radii).unwrap();
        assert!(admissible(&g, 0, 0).unwrap());
        let (g2, created) = geometric_two_three(&g, 0, 0).unwrap();
        // faces around the new edge are not admissible
        let t = created[0];
        let f = 1;
        assert!(!admissible(&g2, t, f).unwrap());
    }
}
