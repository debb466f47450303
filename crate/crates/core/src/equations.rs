//! The consistency and completeness equations as a residual system in the
//! free dihedral angles.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::tetshape::{
    boundary_cosh, boundary_edge_tag, cusp_modulus_z, edge_slot, internal_cosh, internal_edge_tag, others, sigma, vertex_edges, LengthTag,
    ShapeError, TetAngles,
};
use crate::triangulation::{Classes, CuspLink, DualStep, Triangulation, TriangulationError, VertexKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquationError {
    #[error(transparent)]
    Triangulation(#[from] TriangulationError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("length tags {0:?} and {1:?} are glued together")]
    TagMismatch(LengthTag, LengthTag),
    #[error("residual {0} is not finite")]
    NonFinite(usize),
    #[error("angle vector has {0} entries, expected {1}")]
    WrongLength(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ConditionClass {
    InternalLength,
    BoundaryLength,
    Sigma,
    AngleSum,
    ZReal,
    ZImag,
    CompletenessRe,
    CompletenessIm,
    IdealVertexSum,
}

impl ConditionClass {
    pub const ALL: [ConditionClass; 9] = [
        ConditionClass::InternalLength,
        ConditionClass::BoundaryLength,
        ConditionClass::Sigma,
        ConditionClass::AngleSum,
        ConditionClass::ZReal,
        ConditionClass::ZImag,
        ConditionClass::CompletenessRe,
        ConditionClass::CompletenessIm,
        ConditionClass::IdealVertexSum,
    ];

    fn is_linear(self) -> bool {
        matches!(self, ConditionClass::AngleSum | ConditionClass::IdealVertexSum)
    }
}

/// What a residual measures. Slots are `(tet, edge slot)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Term {
    EdgeSum {
        edge_class: usize,
        slots: Vec<(usize, usize)>,
    },
    VertexSum {
        tet: usize,
        vertex: usize,
    },
    Internal {
        a: (usize, usize),
        b: (usize, usize),
    },
    /// `(tet, e_i, e_j)` on both sides.
    Boundary {
        a: (usize, usize, usize),
        b: (usize, usize, usize),
    },
    Sigma {
        a: (usize, usize),
        b: (usize, usize),
    },
    /// Corners `(tet, slot, vertex)` around one end of an edge class.
    Z {
        edge_class: usize,
        corners: Vec<(usize, usize, usize)>,
    },
    Holonomy {
        cusp: usize,
        steps: Vec<DualStep>,
        closing_flip: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub class: ConditionClass,
    pub term: Term,
}

/// Which condition classes to include.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// Drop the classes implied by the others.
    Reduced,
    /// Every condition, both ends for the `Z` condition.
    Full,
}

/// Free angles in a fixed order; zero edges are pinned to 0 and carry no unknown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleLayout {
    pub slots: Vec<(usize, usize)>,
    pub index: Vec<[Option<usize>; 6]>,
}

impl AngleLayout {
    pub fn new(tri: &Triangulation) -> Self {
        let mut slots = Vec::new();
        let mut index = vec![[None; 6]; tri.len()];
        for (t, tet) in tri.tets.iter().enumerate() {
            for k in 0..6 {
                if !tet.comb.zero[k] {
                    index[t][k] = Some(slots.len());
                    slots.push((t, k));
                }
            }
        }
        AngleLayout { slots, index }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn unpack(&self, x: &[f64]) -> Vec<TetAngles> {
        self.index.iter().map(|ix| TetAngles(std::array::from_fn(|k| ix[k].map_or(0.0, |i| x[i])))).collect()
    }

    pub fn pack(&self, angles: &[TetAngles]) -> AngleVector {
        AngleVector(self.slots.iter().map(|&(t, k)| angles[t].0[k]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleVector(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSystem {
    pub layout: AngleLayout,
    pub residuals: Vec<Residual>,
    #[serde(skip)]
    tri: Triangulation,
}

fn has_class(sys: &[Residual], c: ConditionClass) -> bool {
    sys.iter().any(|r| r.class == c)
}

pub fn assemble(tri: &Triangulation) -> Result<ResidualSystem, EquationError> {
    assemble_with(tri, Reduction::Reduced)
}

pub fn assemble_with(tri: &Triangulation, reduction: Reduction) -> Result<ResidualSystem, EquationError> {
    let classes = tri.classes()?;
    let toric = classes.vertices.iter().any(|v| v.kind == VertexKind::Ideal);
    let annular = classes.edges.iter().any(|e| e.zero);
    let reduced = reduction == Reduction::Reduced;
    let keep_internal = !reduced || annular;
    let keep_boundary = !reduced || toric;
    let keep_sigma = !reduced || (toric && annular);
    let keep_z = !reduced || toric;

    let mut out = Vec::new();
    for (i, ec) in classes.edges.iter().enumerate() {
        if !ec.zero {
            let slots = ec.members.iter().map(|m| (m.tet, m.slot)).collect();
            out.push(Residual { class: ConditionClass::AngleSum, term: Term::EdgeSum { edge_class: i, slots } });
        }
    }
    face_residuals(tri, &mut out, keep_internal, keep_boundary, keep_sigma)?;
    if keep_z {
        z_residuals(tri, &classes, reduction, &mut out);
    }
    for (vc, class) in classes.vertices.iter().enumerate() {
        if class.kind != VertexKind::Ideal {
            continue;
        }
        let link = CuspLink::build(tri, &classes, vc);
        for (steps, &flip) in link.generators.iter().zip(&link.closing_flip) {
            for class in [ConditionClass::CompletenessRe, ConditionClass::CompletenessIm] {
                out.push(Residual { class, term: Term::Holonomy { cusp: vc, steps: steps.clone(), closing_flip: flip } });
            }
        }
    }
    for (t, tet) in tri.tets.iter().enumerate() {
        for v in 0..4 {
            if tet.comb.ideal[v] {
                out.push(Residual { class: ConditionClass::IdealVertexSum, term: Term::VertexSum { tet: t, vertex: v } });
            }
        }
    }
    Ok(ResidualSystem { layout: AngleLayout::new(tri), residuals: out, tri: tri.clone() })
}

fn face_residuals(tri: &Triangulation, out: &mut Vec<Residual>, internal: bool, boundary: bool, sigma: bool) -> Result<(), EquationError> {
    for (t, tet) in tri.tets.iter().enumerate() {
        for f in 0..4 {
            let g = tet.glued(f);
            let f2 = g.perm.apply(f);
            // each gluing once
            if (g.tet, f2) < (t, f) {
                continue;
            }
            let other = &tri.tets[g.tet];
            let o = others(f);
            if internal {
                for (x, y) in [(o[0], o[1]), (o[0], o[2]), (o[1], o[2])] {
                    let k = edge_slot(x, y);
                    let k2 = edge_slot(g.perm.apply(x), g.perm.apply(y));
                    let (ta, tb) = (internal_edge_tag(&tet.comb, k), internal_edge_tag(&other.comb, k2));
                    if ta != tb {
                        return Err(EquationError::TagMismatch(ta, tb));
                    }
                    if ta == LengthTag::Finite {
                        out.push(Residual { class: ConditionClass::InternalLength, term: Term::Internal { a: (t, k), b: (g.tet, k2) } });
                    }
                }
            }
            if boundary {
                for v in o {
                    let [x, y] = {
                        let mut r = o.iter().copied().filter(|&w| w != v);
                        [r.next().unwrap(), r.next().unwrap()]
                    };
                    let (ei, ej) = (edge_slot(v, x), edge_slot(v, y));
                    let (v2, x2, y2) = (g.perm.apply(v), g.perm.apply(x), g.perm.apply(y));
                    let (ei2, ej2) = (edge_slot(v2, x2), edge_slot(v2, y2));
                    let ta = boundary_edge_tag(&tet.comb, ei, ej)?;
                    let tb = boundary_edge_tag(&other.comb, ei2, ej2)?;
                    if ta != tb {
                        return Err(EquationError::TagMismatch(ta, tb));
                    }
                    if ta == LengthTag::Finite {
                        out.push(Residual { class: ConditionClass::BoundaryLength, term: Term::Boundary { a: (t, ei, ej), b: (g.tet, ei2, ej2) } });
                    }
                }
            }
            if sigma {
                match (tet.comb.exceptional(f).is_some(), other.comb.exceptional(f2).is_some()) {
                    (true, true) => out.push(Residual { class: ConditionClass::Sigma, term: Term::Sigma { a: (t, f), b: (g.tet, f2) } }),
                    (false, false) => {}
                    _ => return Err(EquationError::TagMismatch(LengthTag::Zero, LengthTag::Finite)),
                }
            }
        }
    }
    Ok(())
}

fn z_residuals(tri: &Triangulation, classes: &Classes, reduction: Reduction, out: &mut Vec<Residual>) {
    for (i, ec) in classes.edges.iter().enumerate() {
        let ideal = |end: usize| classes.vertices[ec.ends[end]].kind == VertexKind::Ideal;
        if !(ideal(0) && ideal(1)) {
            continue;
        }
        let ends: &[usize] = match reduction {
            Reduction::Reduced => {
                if ec.ends[1] < ec.ends[0] {
                    &[1]
                } else {
                    &[0]
                }
            }
            Reduction::Full => &[0, 1],
        };
        for &end in ends {
            let corners: Vec<_> = ec.members.iter().map(|m| (m.tet, m.slot, m.vertex_at(end))).collect();
            debug_assert!(corners.iter().all(|&(t, _, v)| tri.tets[t].comb.ideal[v]));
            for class in [ConditionClass::ZReal, ConditionClass::ZImag] {
                out.push(Residual { class, term: Term::Z { edge_class: i, corners: corners.clone() } });
            }
        }
    }
}

fn wrap(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

impl ResidualSystem {
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn unknowns(&self) -> usize {
        self.layout.len()
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    pub fn count(&self, c: ConditionClass) -> usize {
        self.residuals.iter().filter(|r| r.class == c).count()
    }

    pub fn has(&self, c: ConditionClass) -> bool {
        has_class(&self.residuals, c)
    }

    fn one(&self, r: &Residual, a: &[TetAngles]) -> Result<f64, EquationError> {
        let o = |t: usize| self.tri.tets[t].orientation;
        let comb = |t: usize| &self.tri.tets[t].comb;
        Ok(match &r.term {
            Term::EdgeSum { slots, .. } => slots.iter().map(|&(t, k)| a[t].0[k]).sum::<f64>() - 2.0 * PI,
            Term::VertexSum { tet, vertex } => a[*tet].vertex_sum(*vertex) - PI,
            Term::Internal { a: (t, k), b: (t2, k2) } => internal_cosh(&a[*t], *k) - internal_cosh(&a[*t2], *k2),
            Term::Boundary { a: (t, i, j), b: (t2, i2, j2) } => boundary_cosh(&a[*t], *i, *j)? - boundary_cosh(&a[*t2], *i2, *j2)?,
            Term::Sigma { a: (t, f), b: (t2, f2) } => sigma(comb(*t), &a[*t], *f, o(*t))? + sigma(comb(*t2), &a[*t2], *f2, o(*t2))?,
            Term::Z { corners, .. } => {
                let mut z = Complex64::new(1.0, 0.0);
                for &(t, k, v) in corners {
                    z *= cusp_modulus_z(comb(t), &a[t], k, v, o(t))?;
                }
                if r.class == ConditionClass::ZReal {
                    z.re - 1.0
                } else {
                    z.im
                }
            }
            Term::Holonomy { steps, closing_flip, .. } => {
                let h = holonomy_log(&self.tri, a, steps, *closing_flip)?;
                if r.class == ConditionClass::CompletenessRe {
                    h.re
                } else {
                    h.im
                }
            }
        })
    }

    fn unpack_checked(&self, x: &[f64]) -> Result<Vec<TetAngles>, EquationError> {
        if x.len() != self.layout.len() {
            return Err(EquationError::WrongLength(x.len(), self.layout.len()));
        }
        Ok(self.layout.unpack(x))
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, EquationError> {
        let a = self.unpack_checked(x)?;
        self.residuals
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let v = self.one(r, &a)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(EquationError::NonFinite(i))
                }
            })
            .collect()
    }

    /// Analytic rows for the linear classes, central differences elsewhere.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, EquationError> {
        let n = self.layout.len();
        let m = self.residuals.len();
        let mut jac = DMatrix::zeros(m, n);
        let nonlinear: Vec<usize> = (0..m).filter(|&i| !self.residuals[i].class.is_linear()).collect();
        for (i, r) in self.residuals.iter().enumerate() {
            match &r.term {
                Term::EdgeSum { slots, .. } => {
                    for &(t, k) in slots {
                        let j = self.layout.index[t][k].expect("free slot");
                        jac[(i, j)] += 1.0;
                    }
                }
                Term::VertexSum { tet, vertex } => {
                    for k in vertex_edges(*vertex) {
                        if let Some(j) = self.layout.index[*tet][k] {
                            jac[(i, j)] += 1.0;
                        }
                    }
                }
                _ => {}
            }
        }
        if nonlinear.is_empty() {
            return Ok(jac);
        }
        let mut xp = x.to_vec();
        for j in 0..n {
            let h = 1e-6 * x[j].abs().max(1.0);
            // only residuals touching this tetrahedron can change
            let (tj, _) = self.layout.slots[j];
            xp[j] = x[j] + h;
            let ap = self.unpack_checked(&xp)?;
            xp[j] = x[j] - h;
            let am = self.unpack_checked(&xp)?;
            xp[j] = x[j];
            for &i in &nonlinear {
                let r = &self.residuals[i];
                if !touches(r, tj) {
                    continue;
                }
                let d = (self.one(r, &ap)? - self.one(r, &am)?) / (2.0 * h);
                if !d.is_finite() {
                    return Err(EquationError::NonFinite(i));
                }
                jac[(i, j)] = d;
            }
        }
        Ok(jac)
    }

    /// Largest absolute residual per class present.
    pub fn class_maxima(&self, res: &[f64]) -> Vec<(ConditionClass, f64)> {
        ConditionClass::ALL
            .iter()
            .filter(|&&c| self.has(c))
            .map(|&c| {
                let m = self.residuals.iter().zip(res).filter(|(r, _)| r.class == c).map(|(_, v)| v.abs()).fold(0.0, f64::max);
                (c, m)
            })
            .collect()
    }
}

fn touches(r: &Residual, t: usize) -> bool {
    match &r.term {
        Term::EdgeSum { slots, .. } => slots.iter().any(|s| s.0 == t),
        Term::VertexSum { tet, .. } => *tet == t,
        Term::Internal { a, b } | Term::Sigma { a, b } => a.0 == t || b.0 == t,
        Term::Boundary { a, b } => a.0 == t || b.0 == t,
        Term::Z { corners, .. } => corners.iter().any(|c| c.0 == t),
        Term::Holonomy { steps, .. } => steps.iter().any(|s| s.tet == t),
    }
}

/// Logarithm of the similarity holonomy along a dual loop, imaginary part
/// reduced to `(-pi, pi]`.
pub fn holonomy_log(tri: &Triangulation, a: &[TetAngles], steps: &[DualStep], closing_flip: bool) -> Result<Complex64, EquationError> {
    let mut h = Complex64::new(0.0, 0.0);
    let mut flips = closing_flip as u32;
    for s in steps {
        let tet = &tri.tets[s.tet];
        let z = cusp_modulus_z(&tet.comb, &a[s.tet], edge_slot(s.vertex, s.corner), s.vertex, tet.orientation)?;
        h += z.ln() * s.sign as f64;
        flips += s.flip as u32;
    }
    h.im = wrap(h.im + PI * flips as f64);
    Ok(h)
}
