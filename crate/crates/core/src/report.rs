//! Structured run reports, rendered as JSON or as plain text.

use std::fmt::Write as _;

use serde::Serialize;

use crate::canonical::{canonize, heights_from_radii, CanonStatus, CanonicalCells, CanonizeConfig, CanonizeOutcome, CuspHeight, MoveLog, TiltReport};
use crate::equations::assemble;
use crate::format::TriangulationFile;
use crate::solver::{certify, solve_system, Certificate, SolveOutcome, SolveStatus, SolverConfig};
use crate::tetshape::TetAngles;
use crate::triangulation::{boundary_euler_check, detect_boundary_parallel_flags, isosig, BoundaryComponent, Triangulation, VertexKind, Warning};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub ok: bool,
    pub error: Option<String>,
    pub edge_classes: usize,
    pub cusps: usize,
    pub boundary: Vec<BoundaryComponent>,
    pub warnings: Vec<Warning>,
}

impl ValidationSummary {
    pub fn failed(error: String) -> Self {
        ValidationSummary { ok: false, error: Some(error), edge_classes: 0, cusps: 0, boundary: vec![], warnings: vec![] }
    }
}

pub fn validation_summary(tri: &Triangulation) -> ValidationSummary {
    if let Err(e) = tri.validate() {
        return ValidationSummary::failed(e.to_string());
    }
    let classes = tri.classes().expect("validated");
    ValidationSummary {
        ok: true,
        error: None,
        edge_classes: classes.edges.len(),
        cusps: classes.vertices.iter().filter(|v| v.kind == VertexKind::Ideal).count(),
        boundary: boundary_euler_check(tri, &classes),
        warnings: detect_boundary_parallel_flags(tri, &classes),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub status: SolveStatus,
    pub iterations: usize,
    pub residual: f64,
    pub seed: Option<u64>,
    pub angles: Vec<[f64; 6]>,
}

impl SolveSummary {
    pub fn new(out: &SolveOutcome, angles: &[TetAngles]) -> Self {
        SolveSummary {
            status: out.status,
            iterations: out.iterations,
            residual: out.residual,
            seed: out.seed,
            angles: angles.iter().map(|a| a.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalSummary {
    pub status: CanonStatus,
    pub cap_hit: bool,
    pub moves: Vec<MoveLog>,
    pub tetrahedra: usize,
    pub cells: CanonicalCells,
    pub self_adjacent_violations: usize,
    pub creation_violations: usize,
    pub isosig: String,
}

impl CanonicalSummary {
    pub fn new(out: &CanonizeOutcome) -> Self {
        CanonicalSummary {
            status: out.status,
            cap_hit: out.cap_hit,
            moves: out.moves.clone(),
            tetrahedra: out.state.tri.len(),
            cells: out.cells.clone(),
            self_adjacent_violations: out.self_adjacent_violations,
            creation_violations: out.creation_violations,
            isosig: isosig(&out.state.tri),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub tetrahedra: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    /// Safe heights computed from the developments.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cusp_heights: Option<Vec<CuspHeight>>,
    /// Heights actually used for the tilts, by vertex class.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heights_used: Option<Vec<(usize, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilts: Option<TiltReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub canonical: Option<CanonicalSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isosig: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<Vec<(String, f64)>>,
}

impl RunReport {
    pub fn new(command: &str, file: &TriangulationFile) -> Self {
        RunReport {
            command: command.to_string(),
            name: file.name.clone(),
            tetrahedra: file.tri.len(),
            validation: None,
            solve: None,
            certificate: None,
            cusp_heights: None,
            heights_used: None,
            tilts: None,
            canonical: None,
            isosig: None,
            timing_ms: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serialisable") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command);
        if let Some(n) = &self.name {
            let _ = writeln!(s, "name: {n}");
        }
        let _ = writeln!(s, "tetrahedra: {}", self.tetrahedra);
        if let Some(v) = &self.validation {
            if v.ok {
                let _ = writeln!(s, "validation: ok ({} edge classes, {} cusps, {} boundary components)", v.edge_classes, v.cusps, v.boundary.len());
                for b in &v.boundary {
                    let _ = writeln!(s, "  boundary at vertex class {}: euler characteristic {}, {} punctures", b.vertex_class, b.euler, b.punctures);
                }
                for w in &v.warnings {
                    let _ = writeln!(s, "  warning: {w:?}");
                }
            } else {
                let _ = writeln!(s, "validation: FAILED: {}", v.error.as_deref().unwrap_or("unknown"));
            }
        }
        if let Some(o) = &self.solve {
            let seed = o.seed.map_or("default start".to_string(), |x| format!("seed {x}"));
            let _ = writeln!(s, "solve: {:?} after {} iterations ({seed}), residual {:.3e}", o.status, o.iterations, o.residual);
            for (t, a) in o.angles.iter().enumerate() {
                let row: Vec<String> = a.iter().map(|x| format!("{x:.11}")).collect();
                let _ = writeln!(s, "  {t}: {}", row.join(" "));
            }
        }
        if let Some(c) = &self.certificate {
            let verdict = if c.validity_failures.is_empty() { "valid" } else { "INVALID" };
            let _ = writeln!(s, "certificate: {verdict}, max residual {:.3e}", c.max_residual);
            for (class, m) in &c.classes {
                let _ = writeln!(s, "  {class:?}: {m:.3e}");
            }
            for f in &c.validity_failures {
                let _ = writeln!(s, "  {f}");
            }
        }
        if let Some(hs) = &self.cusp_heights {
            let _ = writeln!(s, "safe heights:");
            for h in hs {
                let _ = writeln!(
                    s,
                    "  cusp {}: h = {:.9e} (k = {:.9e}, r1 = {:.9e}, r2 = {:.9e}, d = {:.9e}, {} copies)",
                    h.vertex_class, h.height, h.k, h.r1, h.r2, h.d, h.copies
                );
            }
        }
        if let Some(hs) = &self.heights_used {
            let _ = writeln!(s, "heights used:");
            for (vc, h) in hs {
                let _ = writeln!(s, "  cusp {vc}: {h:.12e}");
            }
        }
        if let Some(t) = &self.tilts {
            let _ = writeln!(s, "tilts (scale {:.6e}):", t.scale);
            let _ = writeln!(s, "  {:>4} {:>2}  {:>4} {:>2}  {:>16} {:>16} {:>16}  class", "tet", "f", "tet", "f", "t", "t'", "t+t'");
            for f in &t.faces {
                let _ = writeln!(
                    s,
                    "  {:>4} {:>2}  {:>4} {:>2}  {:>16.9e} {:>16.9e} {:>16.9e}  {:?}",
                    f.tet, f.face, f.other_tet, f.other_face, f.t, f.t_other, f.sum, f.class
                );
            }
        }
        if let Some(c) = &self.canonical {
            let cap = if c.cap_hit { " (move cap reached)" } else { "" };
            let _ = writeln!(s, "canonical: {:?} after {} moves{cap}, {} tetrahedra", c.status, c.moves.len(), c.tetrahedra);
            for m in &c.moves {
                let _ = writeln!(s, "  {:?} at tet {} face {} (normalised sum {:.6e})", m.kind, m.tet, m.face, m.normalized);
            }
            let _ = writeln!(s, "  cells: {}", c.cells.cells.len());
            for (i, cell) in c.cells.cells.iter().enumerate() {
                let _ = writeln!(s, "    cell {i}: tetrahedra {cell:?}");
            }
            let faces: Vec<String> = c.cells.transparent.iter().map(|(t, f)| format!("{t}.{f}")).collect();
            let _ = writeln!(s, "  transparent faces: [{}]", faces.join(", "));
            let _ = writeln!(s, "  self-adjacent violations: {}, creation violations: {}", c.self_adjacent_violations, c.creation_violations);
            let _ = writeln!(s, "  isosig: {}", c.isosig);
        }
        if let Some(i) = &self.isosig {
            let _ = writeln!(s, "isosig: {i}");
        }
        if let Some(t) = &self.timing_ms {
            let _ = writeln!(s, "timing:");
            for (k, v) in t {
                let _ = writeln!(s, "  {k}: {v:.3} ms");
            }
        }
        s
    }
}

/// Validation, solve, certificate, heights, tilts and the flip algorithm in
/// one report.
pub fn full_pipeline(file: &TriangulationFile, solver: &SolverConfig, canon: &CanonizeConfig) -> RunReport {
    let mut report = RunReport::new("pipeline", file);
    let v = validation_summary(&file.tri);
    let ok = v.ok;
    report.validation = Some(v);
    if !ok {
        return report;
    }
    let sys = assemble(&file.tri).expect("validated");
    let out = solve_system(&sys, solver);
    let angles = out.tet_angles(&sys);
    report.solve = Some(SolveSummary::new(&out, &angles));
    if out.status != SolveStatus::Solved {
        return report;
    }
    report.certificate = certify(&file.tri, &angles).ok();
    if let Ok(c) = canonize(&file.tri, &angles, canon) {
        report.cusp_heights = c.cross_section.as_ref().map(|cs| cs.cusps.clone());
        report.heights_used = heights_from_radii(&c.state.tri, &c.state.angles, &c.state.radii).ok();
        report.tilts = Some(c.tilts.clone());
        report.canonical = Some(CanonicalSummary::new(&c));
    }
    report.isosig = Some(isosig(&file.tri));
    report
}
