//! The same tetrahedra re-read as ideal ones, with the zero-length edges
//! remembered as a set of arcs.

use serde::Serialize;

use super::{build_classes, link_euler, Gluing, Tetrahedron, Triangulation, TriangulationError};
use crate::tetshape::{edge_slot, TetCombinatorics};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArcView {
    pub gluings: Vec<[Gluing; 4]>,
    pub orientations: Vec<i8>,
    /// `arcs[t][slot]`: the edge slot belongs to an arc.
    pub arcs: Vec<[bool; 6]>,
}

impl ArcView {
    fn bare(&self) -> Triangulation {
        let tets = self
            .gluings
            .iter()
            .zip(&self.orientations)
            .zip(&self.arcs)
            .map(|((g, &orientation), &zero)| Tetrahedron { comb: TetCombinatorics { ideal: [false; 4], zero }, gluing: g.map(Some), orientation })
            .collect();
        Triangulation { tets }
    }

    pub fn arc_count(&self) -> usize {
        match build_classes(&self.bare()) {
            Ok(c) => c.edges.iter().filter(|e| e.zero).count(),
            Err(_) => 0,
        }
    }
}

pub fn to_arc_view(tri: &Triangulation) -> ArcView {
    ArcView {
        gluings: tri.tets.iter().map(|t| std::array::from_fn(|f| t.glued(f))).collect(),
        orientations: tri.tets.iter().map(|t| t.orientation).collect(),
        arcs: tri.tets.iter().map(|t| t.comb.zero).collect(),
    }
}

/// Arcs become zero-length edges; vertex classes whose link is a torus and
/// that meet no arc end become ideal, every other one truncated.
pub fn from_arc_view(av: &ArcView) -> Result<Triangulation, TriangulationError> {
    let mut tri = av.bare();
    let classes = build_classes(&tri)?;
    let ideal: Vec<bool> = (0..classes.vertices.len())
        .map(|vc| {
            let touched = classes.edges.iter().any(|e| e.zero && e.ends.contains(&vc));
            !touched && link_euler(&tri, &classes, vc, false) == 0
        })
        .collect();
    for (t, tet) in tri.tets.iter_mut().enumerate() {
        for v in 0..4 {
            tet.comb.ideal[v] = ideal[classes.vertex_of[t][v]];
        }
        debug_assert!((0..4).all(|v| (0..4).all(|w| v == w || !(tet.comb.ideal[v] && tet.comb.zero[edge_slot(v, w)]))));
    }
    tri.validate()?;
    Ok(tri)
}

#[cfg(test)]
mod tests {
    use super::super::examples;
    use super::*;

    #[test]
    fn round_trip() {
        for tri in [examples::figure_eight(), examples::whitehead()] {
            let av = to_arc_view(&tri);
            assert_eq!(av.arc_count(), 0);
            assert_eq!(from_arc_view(&av).unwrap(), tri);
        }
    }
}
