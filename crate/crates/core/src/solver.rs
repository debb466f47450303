//! Levenberg–Marquardt on the residual system, kept inside the box of valid
//! angles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::equations::{assemble, assemble_with, AngleVector, ConditionClass, EquationError, Reduction, ResidualSystem};
use crate::tetshape::{validate_angles, TetAngles};
use crate::tol::EPS_ANGLE;
use crate::triangulation::Triangulation;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub residual_tol: f64,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Step halvings tried before giving up on a direction.
    pub max_halvings: usize,
    pub seeds: usize,
    /// Relative size of the random start perturbation for retries.
    pub perturbation: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 200,
            residual_tol: 1e-10,
            lambda0: 1e-3,
            lambda_up: 4.0,
            lambda_down: 1.0 / 3.0,
            max_halvings: 30,
            seeds: 16,
            perturbation: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Solved,
    NoConvergence,
    LeftDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub angles: AngleVector,
    /// Max-norm of the final residual.
    pub residual: f64,
    /// Max-norm after each accepted step, starting point first.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// `None` for the default start, otherwise the retry seed.
    pub seed: Option<u64>,
}

impl SolveOutcome {
    pub fn tet_angles(&self, sys: &ResidualSystem) -> Vec<TetAngles> {
        sys.layout.unpack(&self.angles.0)
    }
}

/// Starting value of every free angle.
pub const THETA0: f64 = 0.3 * PI;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Inside the box and every truncated vertex strictly hyperbolic.
fn in_domain(sys: &ResidualSystem, x: &[f64]) -> bool {
    if x.iter().any(|&t| !(EPS_ANGLE..=PI - EPS_ANGLE).contains(&t)) {
        return false;
    }
    let tri = sys.triangulation();
    let a = sys.layout.unpack(x);
    tri.tets.iter().zip(&a).all(|(tet, ang)| (0..4).all(|v| tet.comb.ideal[v] || ang.vertex_sum(v) < PI - EPS_ANGLE))
}

/// Ideal vertex sums are residuals, so the strict check is done here with
/// the solver tolerance rather than by `validate_angles` alone.
fn strictly_valid(sys: &ResidualSystem, x: &[f64], tol: f64) -> bool {
    let tri = sys.triangulation();
    in_domain(sys, x)
        && tri.tets.iter().zip(sys.layout.unpack(x)).all(|(tet, ang)| {
            let r = validate_angles(&tet.comb, &ang);
            r.range_ok && r.zero_edges_ok && (0..4).all(|v| !tet.comb.ideal[v] || (ang.vertex_sum(v) - PI).abs() <= tol.max(1e-12) * 10.0)
        })
}

fn project(x: &mut [f64]) {
    for t in x.iter_mut() {
        *t = t.clamp(EPS_ANGLE, PI - EPS_ANGLE);
    }
}

/// One LM run from `x0`.
pub fn run_from(sys: &ResidualSystem, x0: Vec<f64>, cfg: &SolverConfig) -> SolveOutcome {
    let mut x = x0;
    project(&mut x);
    let done =
        |status, x: Vec<f64>, residual, trace, iterations| SolveOutcome { status, angles: AngleVector(x), residual, trace, iterations, seed: None };
    if !in_domain(sys, &x) {
        return done(SolveStatus::LeftDomain, x, f64::INFINITY, vec![], 0);
    }
    let Ok(mut r) = sys.evaluate(&x) else {
        return done(SolveStatus::LeftDomain, x, f64::INFINITY, vec![], 0);
    };
    let mut cost = r.iter().map(|v| v * v).sum::<f64>();
    let mut trace = vec![inf_norm(&r)];
    let mut lambda = cfg.lambda0;
    let n = x.len();
    for it in 0..cfg.max_iters {
        if inf_norm(&r) < cfg.residual_tol {
            let status = if strictly_valid(sys, &x, cfg.residual_tol) { SolveStatus::Solved } else { SolveStatus::LeftDomain };
            return done(status, x, inf_norm(&r), trace, it);
        }
        let Ok(jac) = sys.jacobian(&x) else {
            return done(SolveStatus::LeftDomain, x, inf_norm(&r), trace, it);
        };
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let mut accepted = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-9);
            }
            let Some(step) = solve_spd(a, &g) else {
                lambda *= cfg.lambda_up;
                continue;
            };
            // halve until the trial stays in the valid region
            let mut s = 1.0;
            let mut trial = None;
            for _ in 0..cfg.max_halvings {
                let mut xt: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a - s * d).collect();
                project(&mut xt);
                if in_domain(sys, &xt) {
                    if let Ok(rt) = sys.evaluate(&xt) {
                        trial = Some((xt, rt));
                        break;
                    }
                }
                s *= 0.5;
            }
            if let Some((xt, rt)) = trial {
                let ct = rt.iter().map(|v| v * v).sum::<f64>();
                if ct < cost {
                    x = xt;
                    r = rt;
                    cost = ct;
                    lambda = (lambda * cfg.lambda_down).max(1e-15);
                    accepted = true;
                    break;
                }
            }
            lambda *= cfg.lambda_up;
        }
        trace.push(inf_norm(&r));
        if !accepted {
            let status = if inf_norm(&r) < cfg.residual_tol { SolveStatus::Solved } else { SolveStatus::NoConvergence };
            return done(status, x, inf_norm(&r), trace, it + 1);
        }
    }
    let res = inf_norm(&r);
    let status = if res < cfg.residual_tol && strictly_valid(sys, &x, cfg.residual_tol) { SolveStatus::Solved } else { SolveStatus::NoConvergence };
    done(status, x, res, trace, cfg.max_iters)
}

fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.lu().solve(b)
}

pub fn default_start(sys: &ResidualSystem) -> Vec<f64> {
    vec![THETA0; sys.unknowns()]
}

/// Default start, then seeded perturbed starts; the first solved run in seed
/// order wins.
pub fn solve(tri: &Triangulation, cfg: &SolverConfig) -> Result<SolveOutcome, EquationError> {
    let sys = assemble(tri)?;
    Ok(solve_system(&sys, cfg))
}

pub fn solve_system(sys: &ResidualSystem, cfg: &SolverConfig) -> SolveOutcome {
    let first = run_from(sys, default_start(sys), cfg);
    if first.status == SolveStatus::Solved || cfg.seeds == 0 {
        return first;
    }
    let retries: Vec<SolveOutcome> = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x0 = (0..sys.unknowns()).map(|_| THETA0 * (1.0 + rng.gen_range(-cfg.perturbation..=cfg.perturbation))).collect();
            let mut out = run_from(sys, x0, cfg);
            out.seed = Some(seed);
            out
        })
        .collect();
    retries.into_iter().find(|o| o.status == SolveStatus::Solved).unwrap_or(first)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    /// Largest residual per condition class, every class included.
    pub classes: Vec<(ConditionClass, f64)>,
    pub validity_failures: Vec<String>,
    pub max_residual: f64,
}

impl Certificate {
    pub fn passes(&self, tol: f64) -> bool {
        self.validity_failures.is_empty() && self.max_residual < tol
    }

    pub fn class_max(&self, c: ConditionClass) -> Option<f64> {
        self.classes.iter().find(|(k, _)| *k == c).map(|&(_, v)| v)
    }
}

/// Re-evaluates every condition, including the ones the reduced system
/// leaves out, and the per-tetrahedron validity constraints.
pub fn certify(tri: &Triangulation, angles: &[TetAngles]) -> Result<Certificate, EquationError> {
    let sys = assemble_with(tri, Reduction::Full)?;
    let x = sys.layout.pack(angles).0;
    let res = sys.evaluate(&x)?;
    let classes = sys.class_maxima(&res);
    let mut validity_failures = Vec::new();
    for (t, (tet, a)) in tri.tets.iter().zip(angles).enumerate() {
        for f in validate_angles(&tet.comb, a).failures {
            validity_failures.push(format!("tetrahedron {t}: {f}"));
        }
    }
    Ok(Certificate { max_residual: inf_norm(&res), classes, validity_failures })
}
