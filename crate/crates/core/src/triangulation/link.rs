//! Triangulated links of ideal vertex classes and the dual loops used for
//! the completeness equations.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use super::{Classes, Triangulation, VertexKind};
use crate::tetshape::{edge_slot, others, positive_at_vertex};

/// Side of the link triangle `(tet, vertex)` lying in the face opposite `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LinkSide {
    pub tri: usize,
    pub w: usize,
}

/// One passage of a dual loop through a link triangle: the holonomy picks
/// up `z^sign` of the corner `corner`, after a sign flip if `flip`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DualStep {
    pub tet: usize,
    pub vertex: usize,
    pub corner: usize,
    pub sign: i8,
    pub flip: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CuspLink {
    pub vertex_class: usize,
    /// Link triangles as `(tet, vertex)`.
    pub triangles: Vec<(usize, usize)>,
    /// Dual loops generating the first homology of the link.
    pub generators: Vec<Vec<DualStep>>,
    /// Extra sign flip to apply when closing each loop.
    pub closing_flip: Vec<bool>,
}

impl CuspLink {
    pub fn build(tri: &Triangulation, classes: &Classes, vc: usize) -> CuspLink {
        debug_assert_eq!(classes.vertices[vc].kind, VertexKind::Ideal);
        let triangles = classes.vertices[vc].members.clone();
        let index: HashMap<(usize, usize), usize> = triangles.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let across = |s: LinkSide| -> (LinkSide, usize) {
            // partner side and the image of ... returned with the glued corner map
            let (t, v) = triangles[s.tri];
            let g = tri.tets[t].glued(s.w);
            let nt = index[&(g.tet, g.perm.apply(v))];
            (LinkSide { tri: nt, w: g.perm.apply(s.w) }, g.tet)
        };
        // link vertex of a corner: (edge class, end)
        let corner_id = |i: usize, x: usize| -> (usize, usize) {
            let (t, v) = triangles[i];
            let slot = edge_slot(v, x);
            let ec = classes.edge_of[t][slot];
            let m = classes.edges[ec].members.iter().find(|m| m.tet == t && m.slot == slot).expect("member");
            (ec, m.end_of(v))
        };

        // link edges, each listed once
        let mut link_edges: Vec<(LinkSide, LinkSide)> = Vec::new();
        for i in 0..triangles.len() {
            let v = triangles[i].1;
            for w in others(v) {
                let s = LinkSide { tri: i, w };
                let (o, _) = across(s);
                if (s.tri, s.w) < (o.tri, o.w) || s == o {
                    link_edges.push((s, o));
                }
            }
        }

        // primal spanning tree on link vertices
        let mut vid: HashMap<(usize, usize), usize> = HashMap::new();
        for i in 0..triangles.len() {
            for x in others(triangles[i].1) {
                let key = corner_id(i, x);
                let n = vid.len();
                vid.entry(key).or_insert(n);
            }
        }
        let mut uf_v = UnionFind::new(vid.len());
        let mut in_tree = vec![false; link_edges.len()];
        for (k, (s, _)) in link_edges.iter().enumerate() {
            let v = triangles[s.tri].1;
            let ends: Vec<usize> = others(v).into_iter().filter(|&x| x != s.w).collect();
            let a = vid[&corner_id(s.tri, ends[0])];
            let b = vid[&corner_id(s.tri, ends[1])];
            if uf_v.union(a, b) {
                in_tree[k] = true;
            }
        }
        // dual spanning tree on triangles using the remaining edges
        let mut uf_t = UnionFind::new(triangles.len());
        let mut in_cotree = vec![false; link_edges.len()];
        let mut adj: Vec<Vec<(usize, LinkSide, LinkSide)>> = vec![Vec::new(); triangles.len()];
        for (k, &(s, o)) in link_edges.iter().enumerate() {
            if !in_tree[k] && uf_t.union(s.tri, o.tri) {
                in_cotree[k] = true;
                adj[s.tri].push((o.tri, s, o));
                adj[o.tri].push((s.tri, o, s));
            }
        }

        let mut generators = Vec::new();
        let mut closing_flip = Vec::new();
        for (k, &(s, o)) in link_edges.iter().enumerate() {
            if in_tree[k] || in_cotree[k] {
                continue;
            }
            // crossings: s -> o, then the cotree path from o.tri back to s.tri
            let mut crossings = vec![(s, o)];
            crossings.extend(cotree_path(&adj, o.tri, s.tri));
            let (steps, flip) = trace(tri, &triangles, &crossings);
            generators.push(steps);
            closing_flip.push(flip);
        }
        CuspLink { vertex_class: vc, triangles, generators, closing_flip }
    }
}

/// Crossings along the unique cotree path from `from` to `to`.
fn cotree_path(adj: &[Vec<(usize, LinkSide, LinkSide)>], from: usize, to: usize) -> Vec<(LinkSide, LinkSide)> {
    let mut prev: Vec<Option<(usize, LinkSide, LinkSide)>> = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    let mut q = VecDeque::from([from]);
    seen[from] = true;
    while let Some(x) = q.pop_front() {
        if x == to {
            break;
        }
        for &(y, a, b) in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                prev[y] = Some((x, a, b));
                q.push_back(y);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = to;
    while cur != from {
        let (p, a, b) = prev[cur].expect("cotree is connected");
        path.push((a, b));
        cur = p;
    }
    path.reverse();
    path
}

/// Turns a closed sequence of crossings into holonomy steps. The first
/// crossing enters the starting triangle; the loop closes when the last
/// crossing's exit side is the first crossing's source side.
fn trace(tri: &Triangulation, triangles: &[(usize, usize)], crossings: &[(LinkSide, LinkSide)]) -> (Vec<DualStep>, bool) {
    let n = crossings.len();
    let (_, first_in) = crossings[0];
    let (t0, v0) = triangles[first_in.tri];
    let _ = t0;
    let start_base = others(v0).into_iter().find(|&x| x != first_in.w).unwrap();
    let mut base = start_base;
    let mut steps = Vec::with_capacity(n);
    for i in 0..n {
        let (_, entry) = crossings[i];
        let (exit, _) = crossings[(i + 1) % n];
        debug_assert_eq!(entry.tri, exit.tri);
        let (t, v) = triangles[entry.tri];
        let p = (0..4).find(|&x| x != v && x != entry.w && x != exit.w).unwrap();
        let flip = base != p;
        // Q is the far end of the entry side, R the far end of the exit side
        let q = exit.w;
        let r = entry.w;
        let sign = if positive_at_vertex(v, p, q, r, tri.tets[t].orientation) { 1 } else { -1 };
        steps.push(DualStep { tet: t, vertex: v, corner: p, sign, flip });
        let g = tri.tets[t].glued(exit.w);
        base = g.perm.apply(p);
    }
    (steps, base != start_base)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let n = self.parent[c];
            self.parent[c] = r;
            c = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}
