//! Geometry of a single partially truncated tetrahedron: validity of the
//! dihedral angle moduli, lengths, the sigma invariant, cusp moduli and the
//! tilt pipeline, plus the Gram-matrix reconstruction used as an oracle.
//!
//! Edge slots follow one fixed labelling: slot `k` joins the vertices
//! `EDGES[k]`, and slot `k + 3` is the edge opposite to slot `k`.
//!
//! | slot | vertices | classical label |
//! |------|----------|-----------------|
//! | 0    | 0 1      | e1              |
//! | 1    | 0 2      | e2              |
//! | 2    | 0 3      | e3              |
//! | 3    | 2 3      | e4              |
//! | 4    | 1 3      | e5              |
//! | 5    | 1 2      | e6              |

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::lorentz::{lorentz_dot, MVec};
use crate::perm::parity;
use crate::tol::EPS_GEOM;

pub const EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [2, 3], [1, 3], [1, 2]];

/// Edge slot joining `a` and `b`.
pub fn edge_slot(a: usize, b: usize) -> usize {
    match (a.min(b), a.max(b)) {
        (0, 1) => 0,
        (0, 2) => 1,
        (0, 3) => 2,
        (2, 3) => 3,
        (1, 3) => 4,
        (1, 2) => 5,
        _ => panic!("no edge between {a} and {b}"),
    }
}

pub fn opposite_edge(k: usize) -> usize {
    (k + 3) % 6
}

/// The three edge slots at vertex `v`.
pub fn vertex_edges(v: usize) -> [usize; 3] {
    let o = others(v);
    [edge_slot(v, o[0]), edge_slot(v, o[1]), edge_slot(v, o[2])]
}

/// The three vertices different from `v`, increasing.
pub fn others(v: usize) -> [usize; 3] {
    let mut out = [0; 3];
    let mut n = 0;
    for w in 0..4 {
        if w != v {
            out[n] = w;
            n += 1;
        }
    }
    out
}

/// The two vertices not in `{a, b}`.
pub fn complement(a: usize, b: usize) -> [usize; 2] {
    let mut out = [0; 2];
    let mut n = 0;
    for w in 0..4 {
        if w != a && w != b {
            out[n] = w;
            n += 1;
        }
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("the two edges coincide")]
    SameEdge,
    #[error("the two edges are opposite")]
    OppositeEdges,
    #[error("length formula out of domain (cosh = {0})")]
    FormulaDomain(f64),
    #[error("face {0} is not exceptional")]
    NotExceptional(usize),
    #[error("vertex {0} is not ideal")]
    VertexNotIdeal(usize),
    #[error("edge {0} is not incident to vertex {1}")]
    NotIncident(usize, usize),
    #[error("missing horosphere radius at ideal vertex {0}")]
    MissingRadius(usize),
    #[error("singular Gram matrix (det = {0})")]
    SingularGram(f64),
    #[error("degenerate lift")]
    DegenerateLift,
    #[error("invalid moduli: {0}")]
    InvalidAngles(String),
    #[error("zero edge {0} has an ideal endpoint")]
    ZeroEdgeAtIdealVertex(usize),
}

/// Which vertices are ideal and which edges have length zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct TetCombinatorics {
    pub ideal: [bool; 4],
    pub zero: [bool; 6],
}

impl TetCombinatorics {
    pub fn new(ideal: [bool; 4], zero: [bool; 6]) -> Result<Self, ShapeError> {
        for k in 0..6 {
            if zero[k] && (ideal[EDGES[k][0]] || ideal[EDGES[k][1]]) {
                return Err(ShapeError::ZeroEdgeAtIdealVertex(k));
            }
        }
        Ok(TetCombinatorics { ideal, zero })
    }

    pub fn all_ideal() -> Self {
        TetCombinatorics { ideal: [true; 4], zero: [false; 6] }
    }

    pub fn compact() -> Self {
        TetCombinatorics::default()
    }

    /// Exceptional face data `(a, b, c)`: ideal vertex `a` and zero edge
    /// `{b, c}` on the face opposite `d`.
    pub fn exceptional(&self, face: usize) -> Option<(usize, usize, usize)> {
        let vs = others(face);
        for i in 0..3 {
            let a = vs[i];
            let b = vs[(i + 1) % 3];
            let c = vs[(i + 2) % 3];
            if self.ideal[a] && self.zero[edge_slot(b, c)] {
                return Some((a, b.min(c), b.max(c)));
            }
        }
        None
    }
}

/// Dihedral angles by edge slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TetAngles(pub [f64; 6]);

impl TetAngles {
    pub fn uniform(t: f64) -> Self {
        TetAngles([t; 6])
    }

    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.0[edge_slot(a, b)]
    }

    pub fn vertex_sum(&self, v: usize) -> f64 {
        vertex_edges(v).iter().map(|&k| self.0[k]).sum()
    }

    /// Angles after relabelling the vertices by `p`: the new edge `{p(a), p(b)}`
    /// carries the old angle of `{a, b}`.
    pub fn permuted(&self, p: crate::Perm4) -> TetAngles {
        let mut out = [0.0; 6];
        for k in 0..6 {
            out[edge_slot(p.apply(EDGES[k][0]), p.apply(EDGES[k][1]))] = self.0[k];
        }
        TetAngles(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub zero_edges_ok: bool,
    pub range_ok: bool,
    pub vertex_sums_ok: [bool; 4],
    pub failures: Vec<String>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn validate_angles(comb: &TetCombinatorics, angles: &TetAngles) -> ValidityReport {
    let mut failures = Vec::new();
    let mut zero_edges_ok = true;
    let mut range_ok = true;
    for k in 0..6 {
        let t = angles.0[k];
        if !t.is_finite() || !(0.0..std::f64::consts::PI).contains(&t) {
            range_ok = false;
            failures.push(format!("edge {k}: angle {t} outside [0, pi)"));
        } else if (t == 0.0) != comb.zero[k] {
            zero_edges_ok = false;
            failures.push(format!("edge {k}: zero angle does not match the zero-edge flag"));
        }
    }
    let mut vertex_sums_ok = [true; 4];
    for v in 0..4 {
        let s = angles.vertex_sum(v) - std::f64::consts::PI;
        let ok = if comb.ideal[v] { s.abs() <= EPS_GEOM } else { s < -EPS_GEOM };
        if !ok {
            vertex_sums_ok[v] = false;
            failures.push(format!("vertex {v}: angle sum - pi = {s:e} but vertex is {}", if comb.ideal[v] { "ideal" } else { "not ideal" }));
        }
    }
    ValidityReport { zero_edges_ok, range_ok, vertex_sums_ok, failures }
}

/// `2 c1 c2 c3 + c1^2 + c2^2 + c3^2 - 1` over the cosines of the angles at `v`.
pub fn d_theta(angles: &TetAngles, v: usize) -> f64 {
    let [a, b, c] = vertex_edges(v).map(|k| angles.0[k].cos());
    2.0 * a * b * c + a * a + b * b + c * c - 1.0
}

/// Numerator of the cosh of the internal length of edge slot `e`.
pub fn c_theta(angles: &TetAngles, e: usize) -> f64 {
    let [i, j] = EDGES[e];
    let [k, l] = complement(i, j);
    let c = |a: usize, b: usize| angles.at(a, b).cos();
    let ij = angles.at(i, j);
    ij.cos() * (c(i, l) * c(j, k) + c(i, k) * c(j, l)) + c(i, k) * c(j, k) + c(i, l) * c(j, l) + c(k, l) * ij.sin().powi(2)
}

/// Length of an edge, tagged by its kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Length {
    Zero,
    Finite(f64),
    HalfLine,
    Line,
}

impl Length {
    pub fn tag(&self) -> LengthTag {
        match self {
            Length::Zero => LengthTag::Zero,
            Length::Finite(_) => LengthTag::Finite,
            Length::HalfLine => LengthTag::HalfLine,
            Length::Line => LengthTag::Line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LengthTag {
    Zero,
    Finite,
    HalfLine,
    Line,
}

fn shared_vertex(e_i: usize, e_j: usize) -> Result<(usize, usize, usize, usize), ShapeError> {
    if e_i == e_j {
        return Err(ShapeError::SameEdge);
    }
    if opposite_edge(e_i) == e_j {
        return Err(ShapeError::OppositeEdges);
    }
    let [a, b] = EDGES[e_i];
    let [c, d] = EDGES[e_j];
    let v = if a == c || a == d { a } else { b };
    let x = if a == v { b } else { a };
    let y = if c == v { d } else { c };
    let w = complement(x, y).into_iter().find(|&w| w != v).unwrap();
    Ok((v, x, y, w))
}

/// The tag of the boundary edge between internal edges `e_i`, `e_j`.
pub fn boundary_edge_tag(comb: &TetCombinatorics, e_i: usize, e_j: usize) -> Result<LengthTag, ShapeError> {
    let (v, _, _, _) = shared_vertex(e_i, e_j)?;
    Ok(match (comb.zero[e_i], comb.zero[e_j]) {
        _ if comb.ideal[v] => LengthTag::Zero,
        (true, true) => LengthTag::Line,
        (true, false) | (false, true) => LengthTag::HalfLine,
        (false, false) => LengthTag::Finite,
    })
}

/// `(cos a cos b + cos c) / (sin a sin b)` at the common vertex of `e_i`, `e_j`,
/// with `c` the third angle there.
pub fn boundary_cosh(angles: &TetAngles, e_i: usize, e_j: usize) -> Result<f64, ShapeError> {
    let (v, _, _, w) = shared_vertex(e_i, e_j)?;
    let a = angles.0[e_i];
    let b = angles.0[e_j];
    let c = angles.at(v, w);
    Ok((a.cos() * b.cos() + c.cos()) / (a.sin() * b.sin()))
}

pub fn boundary_edge_length(comb: &TetCombinatorics, angles: &TetAngles, e_i: usize, e_j: usize) -> Result<Length, ShapeError> {
    Ok(match boundary_edge_tag(comb, e_i, e_j)? {
        LengthTag::Zero => Length::Zero,
        LengthTag::Line => Length::Line,
        LengthTag::HalfLine => Length::HalfLine,
        LengthTag::Finite => {
            let ch = boundary_cosh(angles, e_i, e_j)?;
            if ch < 1.0 - EPS_GEOM {
                return Err(ShapeError::FormulaDomain(ch));
            }
            Length::Finite(ch.max(1.0).acosh())
        }
    })
}

pub fn internal_edge_tag(comb: &TetCombinatorics, e: usize) -> LengthTag {
    let [i, j] = EDGES[e];
    match (comb.ideal[i], comb.ideal[j]) {
        (true, true) => LengthTag::Line,
        (true, false) | (false, true) => LengthTag::HalfLine,
        _ if comb.zero[e] => LengthTag::Zero,
        _ => LengthTag::Finite,
    }
}

/// `c(e) / sqrt(d(v) d(v'))` for an edge with non-ideal ends.
pub fn internal_cosh(angles: &TetAngles, e: usize) -> f64 {
    let [i, j] = EDGES[e];
    c_theta(angles, e) / (d_theta(angles, i) * d_theta(angles, j)).sqrt()
}

pub fn internal_edge_length(comb: &TetCombinatorics, angles: &TetAngles, e: usize) -> Result<Length, ShapeError> {
    match internal_edge_tag(comb, e) {
        LengthTag::Line => Ok(Length::Line),
        LengthTag::HalfLine => Ok(Length::HalfLine),
        tag => {
            let ch = internal_cosh(angles, e);
            if !(ch >= 1.0 - EPS_GEOM) {
                return Err(ShapeError::FormulaDomain(ch));
            }
            if tag == LengthTag::Zero {
                if (ch - 1.0).abs() > 1e-7 {
                    return Err(ShapeError::FormulaDomain(ch));
                }
                Ok(Length::Zero)
            } else {
                Ok(Length::Finite(ch.max(1.0).acosh()))
            }
        }
    }
}

/// Vertices `(a, b, c)` of the face opposite `d`, ordered so that the order
/// is positive for the boundary orientation induced by `orientation`.
pub fn oriented_face(d: usize, orientation: i8) -> [usize; 3] {
    let [a, b, c] = others(d);
    if parity([d, a, b, c]) * orientation > 0 {
        [a, b, c]
    } else {
        [a, c, b]
    }
}

/// Whether `(a, b, c)` is a positive cyclic order around vertex `v`.
pub fn positive_at_vertex(v: usize, a: usize, b: usize, c: usize, orientation: i8) -> bool {
    parity([v, a, b, c]) * orientation > 0
}

/// Signed horosphere distance on an exceptional face.
pub fn sigma(comb: &TetCombinatorics, angles: &TetAngles, face: usize, orientation: i8) -> Result<f64, ShapeError> {
    let (a, b, c) = comb.exceptional(face).ok_or(ShapeError::NotExceptional(face))?;
    let d = face;
    let term = |x: usize| {
        let t = angles.at(a, x);
        (t.sin() / (t.cos() + angles.at(x, d).cos())).ln()
    };
    let eps = if positive_in_face(d, a, b, c, orientation) { 1.0 } else { -1.0 };
    Ok(eps * (term(c) - term(b)))
}

fn positive_in_face(d: usize, a: usize, b: usize, c: usize, orientation: i8) -> bool {
    parity([d, a, b, c]) * orientation > 0
}

/// Cusp modulus of edge `e` seen from the ideal vertex `v`.
pub fn cusp_modulus_z(comb: &TetCombinatorics, angles: &TetAngles, e: usize, v: usize, orientation: i8) -> Result<Complex64, ShapeError> {
    if !comb.ideal[v] {
        return Err(ShapeError::VertexNotIdeal(v));
    }
    let [p, q] = EDGES[e];
    if p != v && q != v {
        return Err(ShapeError::NotIncident(e, v));
    }
    let a = if p == v { q } else { p };
    let [b, c] = complement(v, a);
    let (b, c) = if positive_at_vertex(v, a, b, c, orientation) { (b, c) } else { (c, b) };
    Ok(raw_modulus(angles, v, a, b, c))
}

/// `sin th(vb) / sin th(vc) * exp(i th(va))` at the corner `a` of the link
/// triangle at `v` whose positive order is `(a, b, c)`.
pub fn raw_modulus(angles: &TetAngles, v: usize, a: usize, b: usize, c: usize) -> Complex64 {
    let r = angles.at(v, b).sin() / angles.at(v, c).sin();
    Complex64::from_polar(r, angles.at(v, a))
}

/// The positive constant appearing in the non-ideal `D` values.
pub fn g_theta(angles: &TetAngles) -> f64 {
    let c: [f64; 6] = angles.0.map(f64::cos);
    let mut g = -1.0 + c.iter().map(|x| x * x).sum::<f64>();
    for v in 0..4 {
        let [a, b, d] = vertex_edges(v);
        g += 2.0 * c[a] * c[b] * c[d];
    }
    for k in 0..3 {
        let o = k + 3;
        let rest: f64 = (0..6).filter(|&j| j != k && j != o).map(|j| c[j]).product();
        g += 2.0 * rest;
        g -= c[k] * c[k] * c[o] * c[o];
    }
    g
}

/// Horosphere radii at the ideal vertices.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct HoroRadii(pub [Option<f64>; 4]);

impl HoroRadii {
    pub fn uniform(comb: &TetCombinatorics, r: f64) -> Self {
        HoroRadii(std::array::from_fn(|v| comb.ideal[v].then_some(r)))
    }
}

/// Derived per-tetrahedron geometry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TetShape {
    pub comb: TetCombinatorics,
    pub angles: TetAngles,
    pub d: [f64; 4],
    pub c: [f64; 6],
    pub internal: [Length; 6],
    /// Boundary lengths keyed by `(vertex, the two other vertices)`.
    pub boundary: Vec<((usize, usize, usize), Length)>,
    pub g: f64,
    pub gram: [[f64; 4]; 4],
}

impl TetShape {
    pub fn new(comb: TetCombinatorics, angles: TetAngles) -> Result<Self, ShapeError> {
        let report = validate_angles(&comb, &angles);
        if !report.is_valid() {
            return Err(ShapeError::InvalidAngles(report.failures.join("; ")));
        }
        let d = std::array::from_fn(|v| d_theta(&angles, v));
        let c = std::array::from_fn(|e| c_theta(&angles, e));
        let mut internal = [Length::Zero; 6];
        for (e, slot) in internal.iter_mut().enumerate() {
            *slot = internal_edge_length(&comb, &angles, e)?;
        }
        let mut boundary = Vec::with_capacity(12);
        for v in 0..4 {
            let o = others(v);
            for (x, y) in [(o[0], o[1]), (o[0], o[2]), (o[1], o[2])] {
                let l = boundary_edge_length(&comb, &angles, edge_slot(v, x), edge_slot(v, y))?;
                boundary.push(((v, x, y), l));
            }
        }
        let gram = gram_matrix(&angles);
        let gram = std::array::from_fn(|i| std::array::from_fn(|j| gram[(i, j)]));
        Ok(TetShape { comb, angles, d, c, internal, boundary, g: g_theta(&angles), gram })
    }
}

/// `D` value of vertex `v` for the given radii.
#[allow(non_snake_case)]
pub fn D_value(shape: &TetShape, v: usize, radii: &HoroRadii) -> Result<f64, ShapeError> {
    let a = &shape.angles;
    if shape.comb.ideal[v] {
        let r = radii.0[v].ok_or(ShapeError::MissingRadius(v))?;
        let o = others(v);
        let mut num = 0.0;
        let mut den = 1.0;
        for i in 0..3 {
            let j = o[i];
            let [k, l] = complement(v, j);
            num += a.at(v, j).sin() * a.at(k, l).cos();
            den *= a.at(v, j).sin();
        }
        Ok(num / (den * 2.0 * r))
    } else {
        Ok((shape.g / shape.d[v]).sqrt())
    }
}

/// Tilts of the lifted tetrahedron relative to its four faces.
pub fn tilts(shape: &TetShape, radii: &HoroRadii) -> Result<[f64; 4], ShapeError> {
    let mut inv_d = [0.0; 4];
    for v in 0..4 {
        inv_d[v] = 1.0 / D_value(shape, v, radii)?;
    }
    Ok(std::array::from_fn(|i| (0..4).map(|j| shape.gram[i][j] * inv_d[j]).sum()))
}

/// Face-normal Gram matrix: ones on the diagonal, `-cos` of the angle at the
/// edge shared by the two faces elsewhere.
pub fn gram_matrix(angles: &TetAngles) -> Matrix4<f64> {
    let mut g = Matrix4::identity();
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                let [k, l] = complement(i, j);
                g[(i, j)] = -angles.at(k, l).cos();
            }
        }
    }
    g
}

/// Explicit lift of a tetrahedron to Minkowski space.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Outward unit normals of the faces; `normals[i]` is opposite vertex `i`.
    pub normals: [MVec; 4],
    /// Vertex vectors with `<u_i, m_j> = -delta_ij`.
    pub verts: [MVec; 4],
    pub gram_inverse: Matrix4<f64>,
}

impl Frame {
    /// Vertex vector normalised to the truncation plane dual (non-ideal) or
    /// scaled to the horosphere with circumradius `r` (ideal).
    pub fn lifted_vertex(&self, comb: &TetCombinatorics, v: usize, radii: &HoroRadii) -> Result<MVec, ShapeError> {
        let u = self.verts[v];
        if comb.ideal[v] {
            let r = radii.0[v].ok_or(ShapeError::MissingRadius(v))?;
            let r0 = horo_circumradius(self, comb, v)?;
            Ok((r0 / r) * u)
        } else {
            let n = u.norm2();
            if n <= 0.0 {
                return Err(ShapeError::DegenerateLift);
            }
            Ok((1.0 / n.sqrt()) * u)
        }
    }
}

/// Builds the frame of a tetrahedron from its angles. The result is future
/// pointing and `det[u0 u1 u2 u3]` has the sign of `orientation`.
pub fn frame(comb: &TetCombinatorics, angles: &TetAngles, orientation: i8) -> Result<Frame, ShapeError> {
    let g = gram_matrix(angles);
    let det = g.determinant();
    if det.abs() < 1e-12 * g.norm().powi(4) {
        return Err(ShapeError::SingularGram(det));
    }
    let gi = g.lu().try_inverse().ok_or(ShapeError::SingularGram(det))?;
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    if !(eig.eigenvalues[order[0]] < 0.0 && eig.eigenvalues[order[1]] > 0.0) {
        return Err(ShapeError::InvalidAngles("Gram matrix does not have signature (1,3)".into()));
    }
    // Rows of `m` are coordinates, columns are the face normals.
    let mut m = Matrix4::zeros();
    for (row, &k) in order.iter().enumerate() {
        let s = eig.eigenvalues[k].abs().sqrt();
        for j in 0..4 {
            m[(row, j)] = s * eig.eigenvectors[(j, k)];
        }
    }
    // the eigenvectors are only good to ~1e-9 when eigenvalues cluster;
    // polish so that m^T J m reproduces g to rounding
    let j = crate::lorentz::metric();
    for _ in 0..3 {
        let a = m.transpose() * j * m;
        let Some(ai) = a.try_inverse() else { break };
        m += m * (0.5 * ai * (g - a));
    }
    let mut u = -(m * gi);
    // time orientation from a non-zero edge, whose two ends span a timelike plane
    let e = (0..6).find(|&k| !comb.zero[k]).ok_or(ShapeError::DegenerateLift)?;
    let [a, b] = EDGES[e];
    let unit = |i: usize| {
        let col: Vector4<f64> = u.column(i).into();
        let n = gi[(i, i)];
        if n > EPS_GEOM {
            col / n.sqrt()
        } else {
            col / col.norm()
        }
    };
    let probe = unit(a) + unit(b);
    if probe[0] < 0.0 {
        m = -m;
        u = -u;
    }
    let sign = u.determinant().signum() as i8;
    if sign != orientation.signum() {
        for j in 0..4 {
            m[(3, j)] = -m[(3, j)];
            u[(3, j)] = -u[(3, j)];
        }
    }
    let col = |x: &Matrix4<f64>, i: usize| MVec::raw([x[(0, i)], x[(1, i)], x[(2, i)], x[(3, i)]]);
    Ok(Frame { normals: std::array::from_fn(|i| col(&m, i)), verts: std::array::from_fn(|i| col(&u, i)), gram_inverse: gi })
}

fn horo_circumradius(f: &Frame, comb: &TetCombinatorics, v: usize) -> Result<f64, ShapeError> {
    horosphere_circumradius(&f.verts, comb, v)
}

/// Circumradius of the triangle cut on the horosphere `<x, x_v> = -1` by the
/// other three faces; `x` are vertex vectors of any admissible scale.
pub fn horosphere_circumradius(x: &[MVec; 4], comb: &TetCombinatorics, v: usize) -> Result<f64, ShapeError> {
    let u = x[v];
    let pts: Vec<MVec> = others(v)
        .iter()
        .map(|&w| {
            let uw = x[w];
            let nw = if comb.ideal[w] { 0.0 } else { uw.norm2() };
            let b = -1.0 / lorentz_dot(u, uw);
            let a = (1.0 + b * b * nw) / 2.0;
            a * u + b * uw
        })
        .collect();
    let side = |p: MVec, q: MVec| (-2.0 * (1.0 + lorentz_dot(p, q))).max(0.0).sqrt();
    let (x, y, z) = (side(pts[0], pts[1]), side(pts[1], pts[2]), side(pts[0], pts[2]));
    let s = (x + y + z) / 2.0;
    let area2 = s * (s - x) * (s - y) * (s - z);
    if !(area2 > 0.0) {
        return Err(ShapeError::DegenerateLift);
    }
    Ok(x * y * z / (4.0 * area2.sqrt()))
}

/// Result of rebuilding a tetrahedron from its Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramReconstruction {
    pub gram: Matrix4<f64>,
    pub vertex_norms: [f64; 4],
    pub ideal: [bool; 4],
    /// cosh of the internal edge lengths (`None` when an end is ideal).
    pub internal_cosh: [Option<f64>; 6],
    /// cosh of boundary lengths keyed by `(vertex, x, y)`; `None` when infinite
    /// or when the vertex is ideal.
    pub boundary_cosh: Vec<((usize, usize, usize), Option<f64>)>,
    pub max_internal_delta: f64,
    pub max_boundary_delta: f64,
}

/// Rebuilds the tetrahedron from its face-normal Gram matrix and recomputes
/// all lengths from Lorentzian products, independently of the closed forms.
pub fn gram_oracle(comb: &TetCombinatorics, angles: &TetAngles) -> Result<GramReconstruction, ShapeError> {
    let f = frame(comb, angles, 1)?;
    let gi = f.gram_inverse;
    let vertex_norms: [f64; 4] = std::array::from_fn(|i| f.verts[i].norm2());
    let scale = gi.abs().max().max(1.0);
    let ideal = vertex_norms.map(|n| n.abs() <= EPS_GEOM * scale);
    let unit: [MVec; 4] = std::array::from_fn(|i| if ideal[i] { f.verts[i] } else { (1.0 / vertex_norms[i].abs().sqrt()) * f.verts[i] });

    let mut int_cosh = [None; 6];
    let mut max_internal_delta: f64 = 0.0;
    for e in 0..6 {
        let [i, j] = EDGES[e];
        if ideal[i] || ideal[j] {
            continue;
        }
        let ch = -lorentz_dot(unit[i], unit[j]);
        int_cosh[e] = Some(ch);
        if !comb.ideal[i] && !comb.ideal[j] {
            let closed = internal_cosh(angles, e);
            max_internal_delta = max_internal_delta.max(rel(ch, closed));
        }
    }

    let mut bnd_cosh = Vec::with_capacity(12);
    let mut max_boundary_delta: f64 = 0.0;
    for v in 0..4 {
        let o = others(v);
        for (x, y) in [(o[0], o[1]), (o[0], o[2]), (o[1], o[2])] {
            let val = if ideal[v] {
                None
            } else {
                // corner of the truncation triangle on edge vw
                let corner = |w: usize| unit[w] - lorentz_dot(unit[v], unit[w]) * unit[v];
                let (p, q) = (corner(x), corner(y));
                let (np, nq) = (p.norm2(), q.norm2());
                if np >= -EPS_GEOM || nq >= -EPS_GEOM {
                    None
                } else {
                    Some(lorentz_dot(p, q).abs() / (np * nq).sqrt())
                }
            };
            if let (Some(ch), false) = (val, comb.ideal[v]) {
                if !comb.zero[edge_slot(v, x)] && !comb.zero[edge_slot(v, y)] {
                    let closed = boundary_cosh(angles, edge_slot(v, x), edge_slot(v, y))?;
                    max_boundary_delta = max_boundary_delta.max(rel(ch, closed));
                }
            }
            bnd_cosh.push(((v, x, y), val));
        }
    }
    Ok(GramReconstruction {
        gram: gram_matrix(angles),
        vertex_norms,
        ideal,
        internal_cosh: int_cosh,
        boundary_cosh: bnd_cosh,
        max_internal_delta,
        max_boundary_delta,
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Tilts computed from the explicit Minkowski lift: `<m_i, p>` where `p`
/// pairs to `-1` with every lifted vertex.
pub fn tilt_oracle(comb: &TetCombinatorics, angles: &TetAngles, radii: &HoroRadii) -> Result<[f64; 4], ShapeError> {
    let f = frame(comb, angles, 1)?;
    let mut lifted = [MVec::raw([0.0; 4]); 4];
    for v in 0..4 {
        lifted[v] = f.lifted_vertex(comb, v, radii)?;
    }
    let p = support_vector(&lifted)?;
    // unit normals from scratch: orthogonal to the three other vertices
    let mut out = [0.0; 4];
    for i in 0..4 {
        let m = face_normal(&lifted, i)?;
        out[i] = lorentz_dot(m, p);
    }
    Ok(out)
}

/// The vector `p` with `<p, x_k> = -1` for the four given vectors.
pub fn support_vector(x: &[MVec; 4]) -> Result<MVec, ShapeError> {
    // rows are the covectors J x_k
    let mut a = Matrix4::zeros();
    for k in 0..4 {
        a[(k, 0)] = -x[k].x[0];
        for c in 1..4 {
            a[(k, c)] = x[k].x[c];
        }
    }
    let sol = a.lu().solve(&Vector4::repeat(-1.0)).ok_or(ShapeError::DegenerateLift)?;
    let p = MVec::from_vector(&sol);
    if !p.is_finite() {
        return Err(ShapeError::DegenerateLift);
    }
    Ok(p)
}

/// Unit normal of the face opposite `i`, pointing away from vertex `i`.
pub fn face_normal(x: &[MVec; 4], i: usize) -> Result<MVec, ShapeError> {
    let o = others(i);
    // Solve <m, x_j> = 0 for the three other vertices and <m, x_i> = -1.
    let mut a = Matrix4::zeros();
    let mut rhs = Vector4::zeros();
    for (row, &k) in o.iter().chain(std::iter::once(&i)).enumerate() {
        a[(row, 0)] = -x[k].x[0];
        for c in 1..4 {
            a[(row, c)] = x[k].x[c];
        }
        if k == i {
            rhs[row] = -1.0;
        }
    }
    let sol = a.lu().solve(&rhs).ok_or(ShapeError::DegenerateLift)?;
    let m = MVec::from_vector(&sol);
    let n = m.norm2();
    if !(n > 0.0) || !m.is_finite() {
        return Err(ShapeError::DegenerateLift);
    }
    Ok((1.0 / n.sqrt()) * m)
}

/// Dihedral angles of the tetrahedron spanned by four lifted vertices.
pub fn angles_from_vertices(x: &[MVec; 4], comb: &TetCombinatorics) -> Result<TetAngles, ShapeError> {
    let normals: Vec<MVec> = (0..4).map(|i| face_normal(x, i)).collect::<Result<_, _>>()?;
    let mut out = [0.0; 6];
    for k in 0..6 {
        if comb.zero[k] {
            continue;
        }
        let [i, j] = EDGES[k];
        let [a, b] = complement(i, j);
        let c = (-lorentz_dot(normals[a], normals[b])).clamp(-1.0, 1.0);
        out[k] = c.acos();
    }
    Ok(TetAngles(out))
}

/// Sign of `det[x0 x1 x2 x3]`.
pub fn lift_orientation(x: &[MVec; 4]) -> i8 {
    let m = Matrix4::from_columns(&[x[0].to_vector(), x[1].to_vector(), x[2].to_vector(), x[3].to_vector()]);
    if m.determinant() >= 0.0 {
        1
    } else {
        -1
    }
}

/// Sampling of valid moduli, used by property tests and the benchmarks.
pub mod sample {
    use super::*;
    use rand::Rng;
    use std::f64::consts::PI;

    /// Minimal gap kept from the boundary of the moduli space.
    pub const MARGIN: f64 = 0.02;

    /// Random valid angles for the given combinatorics, by projecting a
    /// uniform sample onto the ideal-vertex constraints and rejecting
    /// configurations within `MARGIN` of the boundary.
    pub fn random_angles<R: Rng>(rng: &mut R, comb: &TetCombinatorics) -> TetAngles {
        loop {
            if let Some(a) = try_once(rng, comb) {
                return a;
            }
        }
    }

    fn try_once<R: Rng>(rng: &mut R, comb: &TetCombinatorics) -> Option<TetAngles> {
        let free: Vec<usize> = (0..6).filter(|&k| !comb.zero[k]).collect();
        let mut x = [0.0; 6];
        for &k in &free {
            x[k] = rng.gen_range(0.0..PI);
        }
        let ideal: Vec<usize> = (0..4).filter(|&v| comb.ideal[v]).collect();
        if !ideal.is_empty() {
            // orthogonal projection onto { sum at v = pi for ideal v }
            let n = ideal.len();
            let rows: Vec<[f64; 6]> = ideal
                .iter()
                .map(|&v| {
                    let mut r = [0.0; 6];
                    for k in vertex_edges(v) {
                        r[k] = 1.0;
                    }
                    r
                })
                .collect();
            let mut gram = nalgebra::DMatrix::zeros(n, n);
            let mut res = nalgebra::DVector::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    gram[(i, j)] = (0..6).map(|k| rows[i][k] * rows[j][k]).sum();
                }
                res[i] = PI - (0..6).map(|k| rows[i][k] * x[k]).sum::<f64>();
            }
            let lam = gram.lu().solve(&res)?;
            for i in 0..n {
                for k in 0..6 {
                    x[k] += lam[i] * rows[i][k];
                }
            }
        }
        let a = TetAngles(x);
        for &k in &free {
            if !(MARGIN..PI - MARGIN).contains(&x[k]) {
                return None;
            }
        }
        for v in 0..4 {
            if !comb.ideal[v] && a.vertex_sum(v) > PI - MARGIN {
                return None;
            }
        }
        validate_angles(comb, &a).is_valid().then_some(a)
    }

    /// Random combinatorics with at most the given number of ideal vertices
    /// and zero edges allowed only between non-ideal vertices.
    pub fn random_combinatorics<R: Rng>(rng: &mut R, allow_zero: bool) -> TetCombinatorics {
        let ideal: [bool; 4] = std::array::from_fn(|_| rng.gen_bool(0.4));
        let mut zero = [false; 6];
        if allow_zero {
            for k in 0..6 {
                let [a, b] = EDGES[k];
                if !ideal[a] && !ideal[b] && !zero[opposite_edge(k)] && rng.gen_bool(0.15) {
                    zero[k] = true;
                }
            }
        }
        TetCombinatorics { ideal, zero }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};

    const S3: f64 = 1.7320508075688772;

    #[test]
    fn validity_examples() {
        assert!(validate_angles(&TetCombinatorics::all_ideal(), &TetAngles::uniform(FRAC_PI_3)).is_valid());
        assert!(validate_angles(&TetCombinatorics::compact(), &TetAngles::uniform(FRAC_PI_6)).is_valid());
        let mut a = TetAngles::uniform(FRAC_PI_6);
        a.0[0] = 0.0;
        let r = validate_angles(&TetCombinatorics::compact(), &a);
        assert!(!r.is_valid() && !r.zero_edges_ok);
        assert!(TetCombinatorics::new([true, false, false, false], [true, false, false, false, false, false]).is_err());
    }

    #[test]
    fn d_theta_examples() {
        assert!(d_theta(&TetAngles::uniform(FRAC_PI_3), 0).abs() < 1e-15);
        assert!((d_theta(&TetAngles::uniform(FRAC_PI_6), 2) - (3.0 * S3 / 4.0 + 1.25)).abs() < 1e-14);
        let a = TetAngles([0.0, FRAC_PI_4, FRAC_PI_4, 1.0, 1.0, 1.0]);
        assert!((d_theta(&a, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn c_theta_examples() {
        assert!((c_theta(&TetAngles::uniform(FRAC_PI_6), 0) - (7.0 * S3 / 8.0 + 1.5)).abs() < 1e-14);
        assert!((c_theta(&TetAngles::uniform(FRAC_PI_3), 3) - 1.125).abs() < 1e-14);
        // swapping vertices 0 <-> 1 and 2 <-> 3 fixes edge 01
        let a = TetAngles([0.3, 0.5, 0.7, 0.4, 0.6, 0.8]);
        let b = a.permuted(crate::Perm4([1, 0, 3, 2]));
        assert!((c_theta(&a, 0) - c_theta(&b, 0)).abs() < 1e-15);
    }

    #[test]
    fn boundary_length_examples() {
        let ideal = TetCombinatorics::all_ideal();
        assert_eq!(boundary_edge_length(&ideal, &TetAngles::uniform(FRAC_PI_3), 0, 1).unwrap(), Length::Zero);
        assert!((boundary_cosh(&TetAngles::uniform(FRAC_PI_3), 0, 1).unwrap() - 1.0).abs() < 1e-15);
        let l = boundary_edge_length(&TetCombinatorics::compact(), &TetAngles::uniform(FRAC_PI_6), 0, 1).unwrap();
        match l {
            Length::Finite(x) => assert!((x.cosh() - (3.0 + 2.0 * S3)).abs() < 1e-12 && (x - 2.553374).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
        let mut comb = TetCombinatorics::compact();
        comb.zero[0] = true;
        assert_eq!(boundary_edge_tag(&comb, 0, 1).unwrap(), LengthTag::HalfLine);
        comb.zero[1] = true;
        assert_eq!(boundary_edge_tag(&comb, 0, 1).unwrap(), LengthTag::Line);
        assert_eq!(boundary_edge_tag(&comb, 0, 0), Err(ShapeError::SameEdge));
        assert_eq!(boundary_edge_tag(&comb, 0, 3), Err(ShapeError::OppositeEdges));
    }

    #[test]
    fn internal_length_examples() {
        let a = TetAngles::uniform(FRAC_PI_6);
        let l = internal_edge_length(&TetCombinatorics::compact(), &a, 0).unwrap();
        let expect = ((7.0 * S3 / 8.0 + 1.5) / (3.0 * S3 / 4.0 + 1.25)).acosh();
        match l {
            Length::Finite(x) => assert!((x - expect).abs() < 1e-14 && (x - 0.596134).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
        let oracle = gram_oracle(&TetCombinatorics::compact(), &a).unwrap();
        assert!((oracle.internal_cosh[0].unwrap() - expect.cosh()).abs() < 1e-9);
        let mut comb = TetCombinatorics::compact();
        comb.ideal[0] = true;
        assert_eq!(internal_edge_length(&comb, &a, 0).unwrap(), Length::HalfLine);
    }

    #[test]
    fn zero_edge_has_zero_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut comb = TetCombinatorics::compact();
        comb.zero[5] = true;
        for _ in 0..50 {
            let a = sample::random_angles(&mut rng, &comb);
            assert_eq!(internal_edge_length(&comb, &a, 5).unwrap(), Length::Zero);
            let o = gram_oracle(&comb, &a).unwrap();
            assert!((o.internal_cosh[5].unwrap() - 1.0).abs() < 1e-9);
        }
    }

    fn exceptional_comb() -> TetCombinatorics {
        // face opposite 3: ideal vertex 0, zero edge {1, 2}
        TetCombinatorics::new([true, false, false, false], [false, false, false, false, false, true]).unwrap()
    }

    #[test]
    fn sigma_examples() {
        let comb = exceptional_comb();
        // slots: 01=t1, 02=t2, 03=t3, 23=t4, 13=t5, 12=t6=0
        let a = TetAngles([1.0, 1.0, PI - 2.0, 0.4, 0.4, 0.0]);
        assert!(sigma(&comb, &a, 3, 1).unwrap().abs() < 1e-15);
        let a = TetAngles([FRAC_PI_3, FRAC_PI_4, PI - FRAC_PI_3 - FRAC_PI_4, FRAC_PI_4, FRAC_PI_6, 0.0]);
        let s = sigma(&comb, &a, 3, 1).unwrap();
        let expect = (0.5f64).ln() - (S3 / (1.0 + S3)).ln();
        assert!((s.abs() - expect.abs()).abs() < 1e-14);
        assert!((s.abs() - 0.237401).abs() < 1e-6);
        assert_eq!(sigma(&comb, &a, 3, -1).unwrap(), -s);
        assert_eq!(sigma(&comb, &a, 0, 1), Err(ShapeError::NotExceptional(0)));
    }

    #[test]
    fn cusp_modulus_examples() {
        let ideal = TetCombinatorics::all_ideal();
        let z = cusp_modulus_z(&ideal, &TetAngles::uniform(FRAC_PI_3), 0, 0, 1).unwrap();
        assert!((z - Complex64::from_polar(1.0, FRAC_PI_3)).norm() < 1e-15);
        let a = TetAngles([FRAC_PI_2, FRAC_PI_4, FRAC_PI_4, FRAC_PI_2, FRAC_PI_4, FRAC_PI_4]);
        let z = cusp_modulus_z(&ideal, &a, 0, 0, 1).unwrap();
        assert!((z - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert_eq!(cusp_modulus_z(&TetCombinatorics::compact(), &a, 0, 0, 1), Err(ShapeError::VertexNotIdeal(0)));
    }

    #[test]
    fn cusp_modulus_cycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let comb = TetCombinatorics::new([true, false, false, false], [false; 6]).unwrap();
        for _ in 0..200 {
            let a = sample::random_angles(&mut rng, &comb);
            for orient in [1, -1] {
                let zs: Vec<Complex64> = [1, 2, 3].iter().map(|&w| cusp_modulus_z(&comb, &a, edge_slot(0, w), 0, orient).unwrap()).collect();
                assert!(zs.iter().all(|z| z.im > 0.0));
                assert!((zs[0] * zs[1] * zs[2] + 1.0).norm() < 1e-10);
                // around the positive order the moduli chain by z' = 1/(1-z)
                let (a1, b1, c1) = if positive_at_vertex(0, 1, 2, 3, orient) { (0, 1, 2) } else { (0, 2, 1) };
                let z = zs[a1];
                assert!((zs[b1] - 1.0 / (1.0 - z)).norm() < 1e-10);
                assert!((zs[c1] - (1.0 - 1.0 / z)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn g_theta_examples() {
        let t = FRAC_PI_6;
        let c = t.cos();
        let closed = -1.0 + 6.0 * c * c + 8.0 * c.powi(3) + 3.0 * c.powi(4);
        assert!((g_theta(&TetAngles::uniform(t)) - closed).abs() < 1e-13);
        assert!((closed - 10.3836).abs() < 1e-4);
        assert!((g_theta(&TetAngles::uniform(FRAC_PI_2)) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn g_theta_is_minus_gram_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let comb = sample::random_combinatorics(&mut rng, true);
            let a = sample::random_angles(&mut rng, &comb);
            let g = g_theta(&a);
            assert!(g > 0.0);
            assert!((g + gram_matrix(&a).determinant()).abs() < 1e-12);
        }
    }

    #[test]
    fn d_value_examples() {
        let shape = TetShape::new(TetCombinatorics::all_ideal(), TetAngles::uniform(FRAC_PI_3)).unwrap();
        let r1 = HoroRadii::uniform(&shape.comb, 1.0);
        assert!((D_value(&shape, 0, &r1).unwrap() - 1.0).abs() < 1e-14);
        let r2 = HoroRadii::uniform(&shape.comb, 2.0);
        assert_eq!(D_value(&shape, 0, &r2).unwrap(), D_value(&shape, 0, &r1).unwrap() / 2.0);
        assert_eq!(D_value(&shape, 0, &HoroRadii::default()), Err(ShapeError::MissingRadius(0)));
        let compact = TetShape::new(TetCombinatorics::compact(), TetAngles::uniform(FRAC_PI_6)).unwrap();
        assert!((D_value(&compact, 1, &HoroRadii::default()).unwrap() - 2.0183).abs() < 1e-4);
    }

    #[test]
    fn tilt_examples() {
        let shape = TetShape::new(TetCombinatorics::all_ideal(), TetAngles::uniform(FRAC_PI_3)).unwrap();
        let r = HoroRadii::uniform(&shape.comb, 1.0);
        let t = tilts(&shape, &r).unwrap();
        assert!(t.iter().all(|x| (x + 0.5).abs() < 1e-14));
        let o = tilt_oracle(&shape.comb, &shape.angles, &r).unwrap();
        assert!(o.iter().all(|x| (x + 0.5).abs() < 1e-12), "{o:?}");
        let t3 = tilts(&shape, &HoroRadii::uniform(&shape.comb, 3.0)).unwrap();
        assert!(t3.iter().all(|x| (x + 1.5).abs() < 1e-13));

        let compact = TetShape::new(TetCombinatorics::compact(), TetAngles::uniform(FRAC_PI_6)).unwrap();
        let t = tilts(&compact, &HoroRadii::default()).unwrap();
        let d = (compact.g / compact.d[0]).sqrt();
        assert!(t.iter().all(|x| (x - (1.0 - 1.5 * S3) / d).abs() < 1e-13));
        assert!((t[0] + 0.7917).abs() < 1e-4);
        let o = tilt_oracle(&compact.comb, &compact.angles, &HoroRadii::default()).unwrap();
        for i in 0..4 {
            assert!((o[i] - t[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn tilts_follow_even_relabellings() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let comb = TetCombinatorics::compact();
        let a = sample::random_angles(&mut rng, &comb);
        let t = tilts(&TetShape::new(comb, a).unwrap(), &HoroRadii::default()).unwrap();
        for p in crate::Perm4::all().into_iter().filter(|p| p.sign() == 1) {
            let b = a.permuted(p);
            let tp = tilts(&TetShape::new(comb, b).unwrap(), &HoroRadii::default()).unwrap();
            for i in 0..4 {
                assert!((tp[p.apply(i)] - t[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn oracle_ideal_classification() {
        let o = gram_oracle(&TetCombinatorics::all_ideal(), &TetAngles::uniform(FRAC_PI_3)).unwrap();
        assert!(o.ideal.iter().all(|&b| b));
        assert!(o.vertex_norms.iter().all(|n| n.abs() < 1e-9));
        let o = gram_oracle(&TetCombinatorics::compact(), &TetAngles::uniform(FRAC_PI_6)).unwrap();
        assert!(o.vertex_norms.iter().all(|&n| n > 0.0));
    }

    #[test]
    fn frame_orientation_and_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let comb = sample::random_combinatorics(&mut rng, false);
            let a = sample::random_angles(&mut rng, &comb);
            for o in [1i8, -1] {
                let f = frame(&comb, &a, o).unwrap();
                assert_eq!(lift_orientation(&f.verts), o);
                for v in 0..4 {
                    if comb.ideal[v] {
                        assert!(f.verts[v].x[0] > 0.0);
                    }
                }
                let b = angles_from_vertices(&f.verts, &comb).unwrap();
                for k in 0..6 {
                    assert!((a.0[k] - b.0[k]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn singular_gram_is_rejected() {
        // the regular Euclidean tetrahedron: det G = 0
        let a = TetAngles::uniform((1.0f64 / 3.0).acos());
        assert!(matches!(gram_oracle(&TetCombinatorics::compact(), &a), Err(ShapeError::SingularGram(_))));
    }
}
