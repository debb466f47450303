//! Canonical relabelling and isomorphism signatures.

use super::{Gluing, Tetrahedron, Triangulation};
use crate::perm::Perm4;
use crate::tetshape::{edge_slot, TetCombinatorics, EDGES};

/// Relabelling found by the breadth-first search: for each new index, the
/// old tetrahedron and the map from old local vertices to new ones.
fn bfs_labelling(tri: &Triangulation, start: usize, p: Perm4) -> (Vec<u32>, Vec<(usize, Perm4)>) {
    let n = tri.len();
    let mut order: Vec<(usize, Perm4)> = vec![(start, p)];
    let mut new_index = vec![usize::MAX; n];
    new_index[start] = 0;
    let mut code = Vec::with_capacity(n * 14);
    let mut i = 0;
    while i < order.len() {
        let (t, map) = order[i];
        let inv = map.inverse();
        let tet = &tri.tets[t];
        let mut ideal = 0u32;
        let mut zero = 0u32;
        for v in 0..4 {
            if tet.comb.ideal[inv.apply(v)] {
                ideal |= 1 << v;
            }
        }
        for k in 0..6 {
            let [a, b] = EDGES[k];
            if tet.comb.zero[edge_slot(inv.apply(a), inv.apply(b))] {
                zero |= 1 << k;
            }
        }
        code.push(ideal);
        code.push(zero);
        for f in 0..4 {
            let g = tet.glued(inv.apply(f));
            if new_index[g.tet] == usize::MAX {
                new_index[g.tet] = order.len();
                // choose the neighbour's labelling so that the gluing reads as
                // the identity-on-face composed with the current map
                let nmap = g.perm.inverse().then(map);
                order.push((g.tet, nmap));
            }
            let (_, tmap) = order[new_index[g.tet]];
            // gluing in new labels: new local of t -> new local of target
            let np = inv.then(g.perm).then(tmap);
            code.push(new_index[g.tet] as u32);
            code.push(perm_code(np));
        }
        i += 1;
    }
    (code, order)
}

fn perm_code(p: Perm4) -> u32 {
    p.0.iter().fold(0, |acc, &x| acc * 4 + x as u32)
}

/// An encoding and the relabelling `(old tet, vertex map)` that produced it.
type Labelled = (Vec<u32>, Vec<(usize, Perm4)>);

/// The lexicographically smallest breadth-first encoding over all starting
/// tetrahedra and vertex labellings, together with the relabelling.
fn best(tri: &Triangulation) -> Labelled {
    let mut best: Option<Labelled> = None;
    for start in 0..tri.len() {
        for p in Perm4::all() {
            let (code, order) = bfs_labelling(tri, start, p);
            if best.as_ref().is_none_or(|(b, _)| code < *b) {
                best = Some((code, order));
            }
        }
    }
    best.expect("non-empty triangulation")
}

/// Canonical string: equal for isomorphic triangulations, flags included,
/// orientation ignored.
pub fn isosig(tri: &Triangulation) -> String {
    let (code, _) = best(tri);
    let mut s = format!("{}", tri.len());
    for (i, chunk) in code.chunks(10).enumerate() {
        s.push_string(i, chunk);
    }
    s
}

trait PushChunk {
    fn push_string(&mut self, i: usize, chunk: &[u32]);
}

impl PushChunk for String {
    fn push_string(&mut self, _i: usize, chunk: &[u32]) {
        use std::fmt::Write;
        let _ = write!(self, ":{:x}.{:x}", chunk[0], chunk[1]);
        for f in 0..4 {
            let _ = write!(self, ",{}", chunk[2 + 2 * f]);
            let p = chunk[3 + 2 * f];
            let _ = write!(self, "{}{}{}{}", p >> 6 & 3, p >> 4 & 3, p >> 2 & 3, p & 3);
        }
    }
}

/// The triangulation relabelled into its canonical form.
pub fn canonical_relabel(tri: &Triangulation) -> Triangulation {
    let (_, order) = best(tri);
    let mut index = vec![0; tri.len()];
    for (i, &(t, _)) in order.iter().enumerate() {
        index[t] = i;
    }
    let tets = order
        .iter()
        .map(|&(t, map)| {
            let inv = map.inverse();
            let old = &tri.tets[t];
            let mut comb = TetCombinatorics::default();
            for v in 0..4 {
                comb.ideal[v] = old.comb.ideal[inv.apply(v)];
            }
            for k in 0..6 {
                let [a, b] = EDGES[k];
                comb.zero[k] = old.comb.zero[edge_slot(inv.apply(a), inv.apply(b))];
            }
            let gluing = std::array::from_fn(|f| {
                let g = old.glued(inv.apply(f));
                let tmap = order[index[g.tet]].1;
                Some(Gluing { tet: index[g.tet], perm: inv.then(g.perm).then(tmap) })
            });
            Tetrahedron { comb, gluing, orientation: old.orientation * map.sign() }
        })
        .collect();
    Triangulation { tets }
}
