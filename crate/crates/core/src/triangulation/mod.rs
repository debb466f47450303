//! Combinatorial layer: gluing data, edge and vertex classes, boundary
//! bookkeeping and validation.

mod arc;
mod isosig;
mod link;
mod moves;

pub use arc::{from_arc_view, to_arc_view, ArcView};
pub use isosig::{canonical_relabel, isosig};
pub use link::{CuspLink, DualStep, LinkSide};
pub use moves::{move_three_two, move_two_three, ThreeTwoRecord, TwoThreeRecord};

use serde::Serialize;
use thiserror::Error;

use crate::perm::Perm4;
use crate::tetshape::{complement, edge_slot, others, TetCombinatorics, EDGES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TriangulationError {
    #[error("triangulation has no tetrahedra")]
    Empty,
    #[error("face {1} of tetrahedron {0} is not glued")]
    FreeFace(usize, usize),
    #[error("inconsistent gluing: {0}")]
    InconsistentGluing(String),
    #[error("gluing of tetrahedron {0} face {1} does not reverse orientations")]
    OrientationNotReversed(usize, usize),
    #[error("flags do not match across the gluing of tetrahedron {0} face {1}")]
    FlagMismatch(usize, usize),
    #[error("tetrahedron {0}: zero edge with an ideal endpoint")]
    BadCombinatorics(usize),
    #[error("triangulation is not connected")]
    Disconnected,
    #[error("link of ideal vertex class {0} is not a torus (euler characteristic {1})")]
    IdealLinkNotTorus(usize, i64),
    #[error("boundary component at vertex class {0} has euler characteristic {1} >= 0")]
    BoundaryEuler(usize, i64),
    #[error("face {1} of tetrahedron {0} is glued to its own tetrahedron")]
    SelfAdjacentFace(usize, usize),
    #[error("edge class {0} has valence {1}, expected 3")]
    WrongValence(usize, usize),
    #[error("edge class {0} has length zero")]
    ZeroLengthEdge(usize),
    #[error("edge class {0} meets a tetrahedron more than once")]
    RepeatedTetrahedra(usize),
}

/// Face `face` of a tetrahedron is glued to face `perm[face]` of `tet`, the
/// vertex `v` going to `perm[v]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Gluing {
    pub tet: usize,
    #[serde(serialize_with = "ser_perm")]
    pub perm: Perm4,
}

fn ser_perm<S: serde::Serializer>(p: &Perm4, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Tetrahedron {
    pub comb: TetCombinatorics,
    pub gluing: [Option<Gluing>; 4],
    /// `+1` or `-1`.
    pub orientation: i8,
}

impl Tetrahedron {
    pub fn glued(&self, f: usize) -> Gluing {
        self.gluing[f].expect("validated triangulation has no free faces")
    }
}

/// One occurrence of an edge class in a tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EdgeMember {
    pub tet: usize,
    pub slot: usize,
    /// Whether `EDGES[slot][0]` corresponds to end 1 of the class.
    pub flipped: bool,
}

impl EdgeMember {
    /// Local vertex at end `end` of the class.
    pub fn vertex_at(&self, end: usize) -> usize {
        EDGES[self.slot][end ^ self.flipped as usize]
    }

    /// Which class end the local vertex `v` is.
    pub fn end_of(&self, v: usize) -> usize {
        if EDGES[self.slot][0] == v {
            self.flipped as usize
        } else {
            1 - self.flipped as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeClass {
    /// Members in cyclic order around the edge.
    pub members: Vec<EdgeMember>,
    pub zero: bool,
    /// Vertex classes of the two ends.
    pub ends: [usize; 2],
}

impl EdgeClass {
    pub fn valence(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VertexKind {
    Ideal,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexClass {
    pub members: Vec<(usize, usize)>,
    pub kind: VertexKind,
}

/// Derived classes and lookup tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classes {
    pub edges: Vec<EdgeClass>,
    pub vertices: Vec<VertexClass>,
    /// `edge_of[t][slot]` is the edge class of the slot.
    pub edge_of: Vec<[usize; 6]>,
    pub vertex_of: Vec<[usize; 4]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Triangulation {
    pub tets: Vec<Tetrahedron>,
}

impl Triangulation {
    /// Builds and fully validates a triangulation.
    pub fn new(tets: Vec<Tetrahedron>) -> Result<Self, TriangulationError> {
        let t = Triangulation { tets };
        t.validate()?;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.tets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tets.is_empty()
    }

    pub fn has_ideal(&self) -> bool {
        self.tets.iter().any(|t| t.comb.ideal.iter().any(|&b| b))
    }

    pub fn has_truncated(&self) -> bool {
        self.tets.iter().any(|t| t.comb.ideal.iter().any(|&b| !b))
    }

    pub fn has_zero_edges(&self) -> bool {
        self.tets.iter().any(|t| t.comb.zero.iter().any(|&b| b))
    }

    /// Structural checks on the gluing data: pairing involution, orientation
    /// reversal, flag matching and connectedness.
    pub fn validate_gluings(&self) -> Result<(), TriangulationError> {
        if self.tets.is_empty() {
            return Err(TriangulationError::Empty);
        }
        let n = self.tets.len();
        for (t, tet) in self.tets.iter().enumerate() {
            TetCombinatorics::new(tet.comb.ideal, tet.comb.zero).map_err(|_| TriangulationError::BadCombinatorics(t))?;
            if tet.orientation.abs() != 1 {
                return Err(TriangulationError::InconsistentGluing(format!("tetrahedron {t} has orientation {}", tet.orientation)));
            }
            for f in 0..4 {
                let g = tet.gluing[f].ok_or(TriangulationError::FreeFace(t, f))?;
                if g.tet >= n {
                    return Err(TriangulationError::InconsistentGluing(format!("tetrahedron {t} face {f} points to missing tetrahedron {}", g.tet)));
                }
                let f2 = g.perm.apply(f);
                if g.tet == t && f2 == f {
                    return Err(TriangulationError::InconsistentGluing(format!("tetrahedron {t} face {f} glued to itself")));
                }
                let back = self.tets[g.tet].gluing[f2].ok_or(TriangulationError::FreeFace(g.tet, f2))?;
                if back.tet != t || back.perm != g.perm.inverse() {
                    return Err(TriangulationError::InconsistentGluing(format!("tetrahedron {t} face {f} is not paired back")));
                }
                let other = &self.tets[g.tet];
                if tet.orientation * other.orientation * g.perm.sign() != -1 {
                    return Err(TriangulationError::OrientationNotReversed(t, f));
                }
                for v in others(f) {
                    if tet.comb.ideal[v] != other.comb.ideal[g.perm.apply(v)] {
                        return Err(TriangulationError::FlagMismatch(t, f));
                    }
                }
                for k in 0..6 {
                    let [a, b] = EDGES[k];
                    if a != f && b != f && tet.comb.zero[k] != other.comb.zero[edge_slot(g.perm.apply(a), g.perm.apply(b))] {
                        return Err(TriangulationError::FlagMismatch(t, f));
                    }
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(t) = stack.pop() {
            for f in 0..4 {
                let u = self.tets[t].glued(f).tet;
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(TriangulationError::Disconnected);
        }
        Ok(())
    }

    /// Full validation: gluings, classes, cusp links and boundary surfaces.
    pub fn validate(&self) -> Result<(), TriangulationError> {
        self.validate_gluings()?;
        let classes = build_classes(self)?;
        for (i, vc) in classes.vertices.iter().enumerate() {
            let chi = link_euler(self, &classes, i, false);
            if vc.kind == VertexKind::Ideal && chi != 0 {
                return Err(TriangulationError::IdealLinkNotTorus(i, chi));
            }
        }
        for c in boundary_euler_check(self, &classes) {
            if c.euler >= 0 {
                return Err(TriangulationError::BoundaryEuler(c.vertex_class, c.euler));
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> Result<Classes, TriangulationError> {
        build_classes(self)
    }
}

/// Orbits of edge slots and vertex slots under the gluings.
pub fn build_classes(tri: &Triangulation) -> Result<Classes, TriangulationError> {
    let n = tri.tets.len();
    let mut vertex_of = vec![[usize::MAX; 4]; n];
    let mut vertices = Vec::new();
    for t0 in 0..n {
        for v0 in 0..4 {
            if vertex_of[t0][v0] != usize::MAX {
                continue;
            }
            let id = vertices.len();
            let mut members = vec![(t0, v0)];
            vertex_of[t0][v0] = id;
            let mut i = 0;
            while i < members.len() {
                let (t, v) = members[i];
                i += 1;
                for f in 0..4 {
                    if f == v {
                        continue;
                    }
                    let g = tri.tets[t].glued(f);
                    let w = g.perm.apply(v);
                    if vertex_of[g.tet][w] == usize::MAX {
                        vertex_of[g.tet][w] = id;
                        members.push((g.tet, w));
                    }
                }
            }
            let ideal = tri.tets[t0].comb.ideal[v0];
            if members.iter().any(|&(t, v)| tri.tets[t].comb.ideal[v] != ideal) {
                return Err(TriangulationError::InconsistentGluing(format!("vertex class {id} mixes ideal and truncated vertices")));
            }
            members.sort_unstable();
            let kind = if ideal { VertexKind::Ideal } else { VertexKind::Truncated };
            vertices.push(VertexClass { members, kind });
        }
    }

    let mut edge_of = vec![[usize::MAX; 6]; n];
    let mut edges = Vec::new();
    for t0 in 0..n {
        for k0 in 0..6 {
            if edge_of[t0][k0] != usize::MAX {
                continue;
            }
            let id = edges.len();
            let [a0, b0] = EDGES[k0];
            let mut members = Vec::new();
            // walk around the edge, entering each tetrahedron through one face
            // and leaving through the other face containing the edge
            let (mut t, mut a, mut b) = (t0, a0, b0);
            let mut exit = complement(a0, b0)[0];
            loop {
                let slot = edge_slot(a, b);
                if edge_of[t][slot] != usize::MAX {
                    if (t, a, b) == (t0, a0, b0) {
                        break;
                    }
                    return Err(TriangulationError::InconsistentGluing(format!("edge class {id} is identified with itself reversed")));
                }
                edge_of[t][slot] = id;
                members.push(EdgeMember { tet: t, slot, flipped: EDGES[slot][0] != a });
                let g = tri.tets[t].glued(exit);
                let (na, nb) = (g.perm.apply(a), g.perm.apply(b));
                let entry = g.perm.apply(exit);
                // we entered through the face opposite `entry`; leave through
                // the other face containing the edge
                let [c, d] = complement(na, nb);
                exit = if c == entry { d } else { c };
                t = g.tet;
                a = na;
                b = nb;
            }
            let zero = tri.tets[t0].comb.zero[k0];
            if members.iter().any(|m| tri.tets[m.tet].comb.zero[m.slot] != zero) {
                return Err(TriangulationError::InconsistentGluing(format!("edge class {id} mixes zero and non-zero edges")));
            }
            let ends = [vertex_of[t0][a0], vertex_of[t0][b0]];
            edges.push(EdgeClass { members, zero, ends });
        }
    }
    Ok(Classes { edges, vertices, edge_of, vertex_of })
}

/// Euler characteristic of the link of a vertex class. With `genuine_only`
/// the ends of zero edges are left out, which gives the boundary surface of
/// the manifold rather than the closed link.
pub(crate) fn link_euler(tri: &Triangulation, classes: &Classes, vc: usize, genuine_only: bool) -> i64 {
    let _ = tri;
    let f = classes.vertices[vc].members.len() as i64;
    let e = 3 * f / 2;
    let mut v = 0i64;
    for ec in &classes.edges {
        if genuine_only && ec.zero {
            continue;
        }
        v += ec.ends.iter().filter(|&&x| x == vc).count() as i64;
    }
    v - e + f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundaryComponent {
    pub vertex_class: usize,
    pub euler: i64,
    /// Number of arc ends (zero-edge ends) on the component.
    pub punctures: usize,
}

/// Euler characteristic of each boundary component, one per truncated
/// vertex class, with the ends of zero edges removed.
pub fn boundary_euler_check(tri: &Triangulation, classes: &Classes) -> Vec<BoundaryComponent> {
    classes
        .vertices
        .iter()
        .enumerate()
        .filter(|(_, vc)| vc.kind == VertexKind::Truncated)
        .map(|(i, _)| {
            let punctures = classes.edges.iter().filter(|e| e.zero).map(|e| e.ends.iter().filter(|&&x| x == i).count()).sum();
            BoundaryComponent { vertex_class: i, euler: link_euler(tri, classes, i, true), punctures }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Warning {
    /// Angle sum `2 pi` is impossible with fewer than three slots below `pi`.
    LowValence { edge_class: usize, valence: usize },
    /// Both ends on the same boundary component and the edge is encircled by
    /// a single tetrahedron pair: the local picture of a boundary-parallel edge.
    BoundaryParallelCandidate { edge_class: usize },
}

/// Advisory checks for edges that prevent a geometric structure.
pub fn detect_boundary_parallel_flags(tri: &Triangulation, classes: &Classes) -> Vec<Warning> {
    let mut out = Vec::new();
    for (i, e) in classes.edges.iter().enumerate() {
        if e.zero {
            continue;
        }
        if e.valence() < 3 {
            out.push(Warning::LowValence { edge_class: i, valence: e.valence() });
        }
        let truncated = |vc: usize| classes.vertices[vc].kind == VertexKind::Truncated;
        if e.ends[0] == e.ends[1] && truncated(e.ends[0]) {
            let mut tets: Vec<usize> = e.members.iter().map(|m| m.tet).collect();
            tets.sort_unstable();
            tets.dedup();
            if tets.len() <= 2 && e.valence() <= 4 {
                out.push(Warning::BoundaryParallelCandidate { edge_class: i });
            }
        }
    }
    let _ = tri;
    out
}

/// Assigns orientations so that every gluing reverses them, if possible.
pub fn orient(tri: &mut Triangulation) -> bool {
    let n = tri.tets.len();
    let mut o = vec![0i8; n];
    if n == 0 {
        return true;
    }
    o[0] = 1;
    let mut stack = vec![0];
    while let Some(t) = stack.pop() {
        for f in 0..4 {
            let Some(g) = tri.tets[t].gluing[f] else { continue };
            let want = -o[t] * g.perm.sign();
            if o[g.tet] == 0 {
                o[g.tet] = want;
                stack.push(g.tet);
            } else if o[g.tet] != want {
                return false;
            }
        }
    }
    for (t, s) in o.into_iter().enumerate() {
        tri.tets[t].orientation = if s == 0 { 1 } else { s };
    }
    true
}

/// Builds a triangulation from gluing tables in the common census layout:
/// `neighbours[t][f]` and `perms[t][f]` giving the images of vertices 0..3.
pub fn from_tables(neighbours: &[[usize; 4]], perms: &[[[u8; 4]; 4]], combs: &[TetCombinatorics]) -> Result<Triangulation, TriangulationError> {
    let mut tets = Vec::with_capacity(neighbours.len());
    for t in 0..neighbours.len() {
        let mut gluing = [None; 4];
        for f in 0..4 {
            let perm = Perm4::new(perms[t][f])
                .ok_or_else(|| TriangulationError::InconsistentGluing(format!("tetrahedron {t} face {f}: bad permutation")))?;
            gluing[f] = Some(Gluing { tet: neighbours[t][f], perm });
        }
        tets.push(Tetrahedron { comb: combs[t], gluing, orientation: 1 });
    }
    let mut tri = Triangulation { tets };
    // pairing errors first, otherwise they surface as orientation failures
    for (t, tet) in tri.tets.iter().enumerate() {
        for (f, g) in tet.gluing.iter().enumerate() {
            let g = g.expect("all faces set above");
            let back = tri.tets.get(g.tet).and_then(|o| o.gluing[g.perm.apply(f)]);
            if back.is_none_or(|b| b.tet != t || b.perm != g.perm.inverse()) {
                return Err(TriangulationError::InconsistentGluing(format!("tetrahedron {t} face {f} is not paired back")));
            }
        }
    }
    if !orient(&mut tri) {
        return Err(TriangulationError::InconsistentGluing("triangulation is not orientable".into()));
    }
    tri.validate()?;
    Ok(tri)
}

/// Standard examples used by tests, documentation and the acceptance suite.
pub mod examples {
    use super::*;

    /// The two-tetrahedron triangulation of the figure-eight knot complement.
    pub fn figure_eight() -> Triangulation {
        let n = [[1, 1, 1, 1], [0, 0, 0, 0]];
        let p = [[[0, 1, 3, 2], [1, 2, 3, 0], [2, 3, 1, 0], [2, 1, 0, 3]], [[0, 1, 3, 2], [3, 2, 0, 1], [3, 0, 1, 2], [2, 1, 0, 3]]];
        from_tables(&n, &p, &[TetCombinatorics::all_ideal(); 2]).expect("figure-eight table")
    }

    /// A four-tetrahedron triangulation of the Whitehead link complement,
    /// subdividing a regular ideal octahedron.
    pub fn whitehead() -> Triangulation {
        let n = [[1, 2, 3, 1], [0, 0, 3, 2], [1, 0, 3, 3], [2, 2, 1, 0]];
        let p = [
            [[0, 1, 3, 2], [0, 1, 3, 2], [0, 1, 3, 2], [3, 2, 0, 1]],
            [[0, 1, 3, 2], [2, 3, 1, 0], [3, 1, 2, 0], [3, 1, 2, 0]],
            [[3, 1, 2, 0], [0, 1, 3, 2], [0, 2, 1, 3], [3, 1, 2, 0]],
            [[3, 1, 2, 0], [0, 2, 1, 3], [3, 1, 2, 0], [0, 1, 3, 2]],
        ];
        from_tables(&n, &p, &[TetCombinatorics::all_ideal(); 4]).expect("whitehead table")
    }

    /// Two compact tetrahedra around a single edge of valence 12; the
    /// boundary is a closed surface of genus two and every angle is pi/6.
    pub fn compact_pair() -> Triangulation {
        let n = [[0, 0, 1, 1], [0, 0, 1, 1]];
        let p = [[[1, 2, 3, 0], [3, 0, 1, 2], [0, 2, 1, 3], [1, 2, 3, 0]], [[3, 0, 1, 2], [0, 2, 1, 3], [1, 2, 3, 0], [3, 0, 1, 2]]];
        from_tables(&n, &p, &[TetCombinatorics::compact(); 2]).expect("compact table")
    }

    /// Two tetrahedra with one toric cusp and a boundary component that is
    /// a four-punctured sphere; the face opposite the cusp has length-zero
    /// edges only.
    pub fn mixed_pair() -> Triangulation {
        let n = [[1, 1, 1, 1], [0, 0, 0, 0]];
        let row = [[0, 1, 3, 2], [0, 1, 3, 2], [0, 3, 2, 1], [0, 2, 1, 3]];
        let comb = TetCombinatorics { ideal: [true, false, false, false], zero: [false, false, false, true, true, true] };
        from_tables(&n, &[row, row], &[comb; 2]).expect("mixed table")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_eight_classes() {
        let tri = examples::figure_eight();
        let c = tri.classes().unwrap();
        assert_eq!(c.edges.len(), 2);
        assert!(c.edges.iter().all(|e| e.valence() == 6));
        assert_eq!(c.vertices.len(), 1);
        assert_eq!(c.vertices[0].kind, VertexKind::Ideal);
        assert_eq!(link_euler(&tri, &c, 0, false), 0);
        assert!(boundary_euler_check(&tri, &c).is_empty());
        assert!(detect_boundary_parallel_flags(&tri, &c).is_empty());
    }

    #[test]
    fn whitehead_classes() {
        let tri = examples::whitehead();
        let c = tri.classes().unwrap();
        assert_eq!(c.vertices.len(), 2);
        assert_eq!(c.edges.len(), 4);
        let total: usize = c.edges.iter().map(|e| e.valence()).sum();
        assert_eq!(total, 24);
    }

    #[test]
    fn classes_partition_slots() {
        for tri in [examples::figure_eight(), examples::whitehead()] {
            let c = tri.classes().unwrap();
            let mut count = 0;
            for (i, e) in c.edges.iter().enumerate() {
                for m in &e.members {
                    assert_eq!(c.edge_of[m.tet][m.slot], i);
                    count += 1;
                }
            }
            assert_eq!(count, 6 * tri.len());
            let vcount: usize = c.vertices.iter().map(|v| v.members.len()).sum();
            assert_eq!(vcount, 4 * tri.len());
        }
    }

    #[test]
    fn mismatched_zero_flag_is_rejected() {
        let mut tri = examples::figure_eight();
        for t in &mut tri.tets {
            t.comb = TetCombinatorics::compact();
        }
        tri.tets[0].comb.zero[0] = true;
        assert!(matches!(tri.validate(), Err(TriangulationError::FlagMismatch(..)) | Err(TriangulationError::InconsistentGluing(_))));
    }

    #[test]
    fn non_involutive_gluing_is_rejected() {
        let mut tri = examples::figure_eight();
        tri.tets[0].gluing[0] = Some(Gluing { tet: 1, perm: Perm4([1, 0, 3, 2]) });
        assert!(matches!(tri.validate(), Err(TriangulationError::InconsistentGluing(_))));
    }

    #[test]
    fn orientation_preserving_gluing_is_rejected() {
        let mut tri = examples::figure_eight();
        tri.tets[1].orientation = -tri.tets[1].orientation;
        assert!(matches!(tri.validate(), Err(TriangulationError::OrientationNotReversed(..))));
    }

    #[test]
    fn sphere_boundary_is_rejected() {
        // one truncated tetrahedron folded onto itself: the boundary is a sphere
        let mut tri = Triangulation {
            tets: vec![Tetrahedron {
                comb: TetCombinatorics::compact(),
                gluing: [
                    Some(Gluing { tet: 0, perm: Perm4([1, 0, 2, 3]) }),
                    Some(Gluing { tet: 0, perm: Perm4([1, 0, 2, 3]) }),
                    Some(Gluing { tet: 0, perm: Perm4([0, 1, 3, 2]) }),
                    Some(Gluing { tet: 0, perm: Perm4([0, 1, 3, 2]) }),
                ],
                orientation: 1,
            }],
        };
        assert!(orient(&mut tri));
        let c = tri.classes().unwrap();
        let b = boundary_euler_check(&tri, &c);
        assert!(b.iter().any(|x| x.euler >= 0));
        assert!(tri.validate().is_err());
    }
}
