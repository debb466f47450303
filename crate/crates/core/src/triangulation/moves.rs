//! Topological 2-3 and 3-2 moves.

use serde::Serialize;

use super::{build_classes, Gluing, Tetrahedron, Triangulation, TriangulationError};
use crate::perm::{parity, Perm4};
use crate::tetshape::{complement, edge_slot, others, TetCombinatorics};

/// Where the five points of a 2-3 move came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoThreeRecord {
    /// The two destroyed tetrahedra `(A, B)` in the old numbering.
    pub removed: [usize; 2],
    /// Local vertices `(a0, a1, a2, a3)` of `A`; `a0` is opposite the face.
    pub a_vertices: [usize; 4],
    /// Local vertex of `B` opposite the face.
    pub b4: usize,
    /// Gluing permutation from `A` to `B` across the face.
    #[serde(skip)]
    pub sigma: Perm4,
    /// New tetrahedra `N1, N2, N3`; `Nk` omits `Pk` and has local vertices
    /// `(P0, Pi, Pj, P4)` with `i < j`.
    pub created: [usize; 3],
    /// Old index to new index for the untouched tetrahedra.
    pub kept: Vec<Option<usize>>,
}

/// Where the points of a 3-2 move came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreeTwoRecord {
    /// The three destroyed tetrahedra in cyclic order around the edge.
    pub removed: [usize; 3],
    /// Sources of the points `P0, Q1, Q2, Q3, P4` as `(old tet, local vertex)`.
    pub points: [(usize, usize); 5],
    /// New tetrahedra `(P0, Q1, Q2, Q3)` and `(P4, Q1, Q2, Q3)`.
    pub created: [usize; 2],
    pub kept: Vec<Option<usize>>,
}

/// Image of an old face in the new triangulation: new tet, new face, and the
/// map from old local vertices to new local vertices.
type FaceImage = (usize, usize, Perm4);

/// Rebuilds all gluings after a move. `image` gives, for every old face that
/// survives, its place in the new triangulation; `fresh` lists the new
/// tetrahedra with their internal gluings already set.
fn rewire(
    tri: &Triangulation,
    removed: &[usize],
    mut fresh: Vec<Tetrahedron>,
    image: &dyn Fn(usize, usize) -> Option<FaceImage>,
    sources: &[(usize, usize, usize, usize, Perm4)],
) -> (Triangulation, Vec<Option<usize>>) {
    let mut kept = vec![None; tri.len()];
    let mut tets = Vec::new();
    for (t, tet) in tri.tets.iter().enumerate() {
        if !removed.contains(&t) {
            kept[t] = Some(tets.len());
            tets.push(tet.clone());
        }
    }
    let base = tets.len();
    // kept tets pointing into removed ones
    for t in 0..tri.len() {
        let Some(nt) = kept[t] else { continue };
        for f in 0..4 {
            let g = tri.tets[t].glued(f);
            tets[nt].gluing[f] = Some(if let Some(k) = kept[g.tet] {
                Gluing { tet: k, perm: g.perm }
            } else {
                let (it, _, psi) = image(g.tet, g.perm.apply(f)).expect("outer face");
                Gluing { tet: it, perm: g.perm.then(psi) }
            });
        }
    }
    // outer faces of the new tets, `sources` = (new idx, new face, old tet, old face, phi)
    for &(nt, nf, ot, of, phi) in sources {
        let g = tri.tets[ot].glued(of);
        let target = if let Some(k) = kept[g.tet] {
            Gluing { tet: k, perm: phi.inverse().then(g.perm) }
        } else {
            let (it, _, psi) = image(g.tet, g.perm.apply(of)).expect("outer face");
            Gluing { tet: it, perm: phi.inverse().then(g.perm).then(psi) }
        };
        fresh[nt - base].gluing[nf] = Some(target);
    }
    tets.extend(fresh);
    (Triangulation { tets }, kept)
}

/// Replaces the two tetrahedra sharing face `(tet, face)` by three around a
/// new edge joining their opposite vertices.
pub fn move_two_three(tri: &Triangulation, tet: usize, face: usize) -> Result<(Triangulation, TwoThreeRecord), TriangulationError> {
    let a = tet;
    let g = tri.tets[a].gluing[face].ok_or(TriangulationError::FreeFace(a, face))?;
    let b = g.tet;
    if a == b {
        return Err(TriangulationError::SelfAdjacentFace(a, face));
    }
    let sigma = g.perm;
    let a0 = face;
    let [a1, a2, a3] = others(a0);
    let av = [a0, a1, a2, a3];
    let b4 = sigma.apply(a0);
    let (ta, tb) = (&tri.tets[a], &tri.tets[b]);
    let eps = ta.orientation * parity(av);

    // global points: P0 = a0, Pk = ak (k = 1..3), P4 = b4
    let ideal_of = |p: usize| if p < 4 { ta.comb.ideal[av[p]] } else { tb.comb.ideal[b4] };
    // local vertex of point p in A and in B (P0 is not in B, P4 not in A)
    let in_a = |p: usize| av[p];
    let in_b = |p: usize| if p == 4 { b4 } else { sigma.apply(av[p]) };
    let zero_of = |p: usize, q: usize| -> bool {
        if p == 0 && q == 4 {
            false
        } else if p != 4 && q != 4 {
            ta.comb.zero[edge_slot(in_a(p), in_a(q))]
        } else {
            tb.comb.zero[edge_slot(in_b(p), in_b(q))]
        }
    };

    let base = tri.len() - 2;
    let pts = |k: usize| -> [usize; 4] {
        let ij: Vec<usize> = (1..4).filter(|&x| x != k).collect();
        [0, ij[0], ij[1], 4]
    };
    let mut fresh = Vec::new();
    for k in 1..4 {
        let p = pts(k);
        let mut zero = [false; 6];
        for (s, z) in zero.iter_mut().enumerate() {
            let [x, y] = crate::tetshape::EDGES[s];
            *z = zero_of(p[x].min(p[y]), p[x].max(p[y]));
        }
        let comb = TetCombinatorics { ideal: p.map(ideal_of), zero };
        let orientation = if k == 2 { -eps } else { eps };
        fresh.push(Tetrahedron { comb, gluing: [None; 4], orientation });
    }
    // internal faces: Nk's face opposite Pi is glued to Ni's face opposite Pk
    for k in 1..4 {
        let pk = pts(k);
        for i in 1..4 {
            if i == k {
                continue;
            }
            let pi = pts(i);
            let lk = pk.iter().position(|&x| x == i).unwrap();
            let mut m = [0u8; 4];
            for (l, &p) in pk.iter().enumerate() {
                let q = if p == i { k } else { p };
                m[l] = pi.iter().position(|&x| x == q).unwrap() as u8;
            }
            fresh[k - 1].gluing[lk] = Some(Gluing { tet: base + i - 1, perm: Perm4(m) });
        }
    }
    // outer faces
    let mut sources = Vec::new();
    for k in 1..4 {
        let p = pts(k);
        // face opposite P4 comes from A's face opposite ak
        let phi_a = perm_from(|x| p.iter().position(|&q| q != 4 && in_a(q) == x).unwrap_or(3), &av);
        sources.push((base + k - 1, 3, a, av[k], phi_a));
        let bv: [usize; 4] = std::array::from_fn(|q| in_b(if q == 0 { k } else { p[q] }));
        let phi_b = perm_from(|x| p.iter().position(|&q| q != 0 && in_b(q) == x).unwrap_or(0), &bv);
        sources.push((base + k - 1, 0, b, in_b(k), phi_b));
    }
    let image = |t: usize, f: usize| -> Option<FaceImage> { sources.iter().find(|s| s.2 == t && s.3 == f).map(|s| (s.0, s.1, s.4)) };
    let (new_tri, kept) = rewire(tri, &[a, b], fresh, &image, &sources);
    let record = TwoThreeRecord { removed: [a, b], a_vertices: av, b4, sigma, created: [base, base + 1, base + 2], kept };
    Ok((new_tri, record))
}

/// Permutation sending each old local vertex `x` (all four appear in `olds`)
/// to `f(x)`.
fn perm_from(f: impl Fn(usize) -> usize, olds: &[usize; 4]) -> Perm4 {
    let mut m = [0u8; 4];
    for &x in olds {
        m[x] = f(x) as u8;
    }
    Perm4::new(m).expect("bijective face map")
}

/// Replaces the three tetrahedra around a valence-3 edge class by two.
pub fn move_three_two(tri: &Triangulation, edge_class: usize) -> Result<(Triangulation, ThreeTwoRecord), TriangulationError> {
    let classes = build_classes(tri)?;
    let ec = classes.edges.get(edge_class).ok_or_else(|| TriangulationError::InconsistentGluing(format!("no edge class {edge_class}")))?;
    if ec.zero {
        return Err(TriangulationError::ZeroLengthEdge(edge_class));
    }
    if ec.valence() != 3 {
        return Err(TriangulationError::WrongValence(edge_class, ec.valence()));
    }
    let ts: Vec<usize> = ec.members.iter().map(|m| m.tet).collect();
    if ts[0] == ts[1] || ts[1] == ts[2] || ts[0] == ts[2] {
        return Err(TriangulationError::RepeatedTetrahedra(edge_class));
    }
    // walk around the edge from member 0 as in the class construction
    let m0 = ec.members[0];
    let (a0, b0) = (m0.vertex_at(0), m0.vertex_at(1));
    let [c0, d0] = complement(a0, b0);
    // in each tet: local (a, b, x, y) with x shared with the previous tet, y with the next
    let mut local = [[0usize; 4]; 3];
    local[0] = [a0, b0, c0, d0];
    let mut t = ts[0];
    let (mut a, mut b, mut exit) = (a0, b0, c0);
    for step in 1..3 {
        let g = tri.tets[t].glued(exit);
        let (na, nb) = (g.perm.apply(a), g.perm.apply(b));
        let x = g.perm.apply(local[step - 1][3]);
        let y = complement(na, nb).into_iter().find(|&v| v != x).unwrap();
        t = g.tet;
        debug_assert_eq!(t, ts[step]);
        local[step] = [na, nb, x, y];
        a = na;
        b = nb;
        exit = x;
    }
    // points: P0, QA (shared 0/1), QB (shared 1/2), QC (shared 2/0), P4
    let points = [(ts[0], a0), (ts[0], d0), (ts[1], local[1][3]), (ts[0], c0), (ts[0], b0)];
    let eps = tri.tets[ts[0]].orientation * parity([a0, b0, c0, d0]);

    // local vertex of each global point (0=P0, 1=QA, 2=QB, 3=QC, 4=P4) in tet m
    let glob = |m: usize, p: usize| -> Option<usize> {
        let l = local[m];
        match (m, p) {
            (_, 0) => Some(l[0]),
            (_, 4) => Some(l[1]),
            (0, 3) => Some(l[2]),
            (0, 1) => Some(l[3]),
            (1, 1) => Some(l[2]),
            (1, 2) => Some(l[3]),
            (2, 2) => Some(l[2]),
            (2, 3) => Some(l[3]),
            _ => None,
        }
    };
    let tm = |m: usize| &tri.tets[ts[m]];
    let ideal_of = |p: usize| (0..3).find_map(|m| glob(m, p).map(|v| tm(m).comb.ideal[v])).unwrap();
    let zero_of = |p: usize, q: usize| -> bool {
        (0..3)
            .find_map(|m| match (glob(m, p), glob(m, q)) {
                (Some(x), Some(y)) => Some(tm(m).comb.zero[edge_slot(x, y)]),
                _ => None,
            })
            .unwrap()
    };
    let base = tri.len() - 3;
    let new_pts = [[0usize, 1, 2, 3], [4, 1, 2, 3]];
    let mut fresh = Vec::new();
    for (n, p) in new_pts.iter().enumerate() {
        let mut zero = [false; 6];
        for (s, z) in zero.iter_mut().enumerate() {
            let [x, y] = crate::tetshape::EDGES[s];
            *z = zero_of(p[x], p[y]);
        }
        let comb = TetCombinatorics { ideal: p.map(ideal_of), zero };
        let orientation = if n == 0 { eps } else { -eps };
        fresh.push(Tetrahedron { comb, gluing: [None; 4], orientation });
    }
    fresh[0].gluing[0] = Some(Gluing { tet: base + 1, perm: Perm4::IDENTITY });
    fresh[1].gluing[0] = Some(Gluing { tet: base, perm: Perm4::IDENTITY });

    let mut sources = Vec::new();
    for m in 0..3 {
        let missing = (1..4).find(|&q| glob(m, q).is_none()).unwrap();
        for (n, p) in new_pts.iter().enumerate() {
            // the face of tet m opposite the apex of the other new tet
            let drop = if n == 0 { 4 } else { 0 };
            let old_face = glob(m, drop).unwrap();
            let mut mp = [0u8; 4];
            for (slot, &q) in p.iter().enumerate() {
                let src = if q == missing { drop } else { q };
                mp[glob(m, src).unwrap()] = slot as u8;
            }
            let local_face = p.iter().position(|&q| q == missing).unwrap();
            sources.push((base + n, local_face, ts[m], old_face, Perm4(mp)));
        }
    }
    let image = |t: usize, f: usize| -> Option<FaceImage> { sources.iter().find(|s| s.2 == t && s.3 == f).map(|s| (s.0, s.1, s.4)) };
    let (new_tri, kept) = rewire(tri, &ts, fresh, &image, &sources);
    let record = ThreeTwoRecord { removed: [ts[0], ts[1], ts[2]], points, created: [base, base + 1], kept };
    Ok((new_tri, record))
}

#[cfg(test)]
mod tests {
    use super::super::{examples, isosig, Triangulation};
    use super::*;

    fn valence3_class(tri: &Triangulation) -> usize {
        let c = tri.classes().unwrap();
        c.edges.iter().position(|e| e.valence() == 3).unwrap()
    }

    #[test]
    fn two_three_then_three_two() {
        for tri in [examples::figure_eight(), examples::whitehead()] {
            for t in 0..tri.len() {
                for f in 0..4 {
                    if tri.tets[t].glued(f).tet == t {
                        continue;
                    }
                    let (t2, rec) = move_two_three(&tri, t, f).unwrap();
                    t2.validate().unwrap();
                    assert_eq!(t2.len(), tri.len() + 1);
                    let c = t2.classes().unwrap();
                    let new_edge = c.edge_of[rec.created[0]][crate::tetshape::edge_slot(0, 3)];
                    assert_eq!(c.edges[new_edge].valence(), 3);
                    let (t3, _) = move_three_two(&t2, new_edge).unwrap();
                    t3.validate().unwrap();
                    assert_eq!(isosig(&t3), isosig(&tri));
                }
            }
        }
    }

    #[test]
    fn move_errors() {
        let tri = examples::figure_eight();
        let (t2, _) = move_two_three(&tri, 0, 0).unwrap();
        let c = t2.classes().unwrap();
        let big = c.edges.iter().position(|e| e.valence() != 3).unwrap();
        assert!(matches!(move_three_two(&t2, big), Err(TriangulationError::WrongValence(..))));
        let e = valence3_class(&t2);
        assert!(move_three_two(&t2, e).is_ok());
    }
}
