use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use trunckit::canonical::{
    canonize, geometric_two_three, heights_from_radii, radii_from_heights, section_radii, tilt_report, CanonStatus, CanonizeConfig, Geometric,
    DEVELOPMENT_CAP,
};
use trunckit::equations::assemble;
use trunckit::format::{self, FormatError, TriangulationFile};
use trunckit::report::{validation_summary, CanonicalSummary, RunReport, SolveSummary, ValidationSummary};
use trunckit::solver::{certify, solve_system, SolveStatus, SolverConfig};
use trunckit::triangulation::isosig;
use trunckit::{HoroRadii, TetAngles};

mod exit {
    pub const OK: u8 = 0;
    pub const INTERNAL: u8 = 1;
    pub const INVALID: u8 = 2;
    pub const NO_CONVERGENCE: u8 = 3;
    pub const STUCK: u8 = 4;
    pub const INPUT: u8 = 5;
    pub const SUBDIVISION: u8 = 6;
    pub const USAGE: u8 = 64;
}

#[derive(Parser)]
#[command(name = "trunckit", version, about = "Angle structures and canonical decompositions of truncated triangulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check gluings, vertex links and boundary Euler characteristics.
    Validate(Common),
    /// Solve the consistency and completeness equations.
    Solve(SolveArgs),
    /// Run the flip algorithm towards the canonical decomposition.
    Canonize(CanonizeArgs),
    /// Print the tilt of every face.
    Tilts(TiltArgs),
    /// Print the isomorphism signature.
    Isosig(Common),
}

#[derive(Args)]
struct Common {
    file: PathBuf,
    /// Emit the report as JSON.
    #[arg(long)]
    json: bool,
    /// Append wall-clock timings to the report.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SolverFlags {
    /// Residual tolerance.
    #[arg(long, default_value_t = SolverConfig::default().residual_tol)]
    tol: f64,
    /// Iteration cap per start.
    #[arg(long, default_value_t = SolverConfig::default().max_iters)]
    max_iters: usize,
    /// Number of perturbed restarts after the default start fails.
    #[arg(long, default_value_t = SolverConfig::default().seeds)]
    seeds: usize,
}

impl SolverFlags {
    fn config(&self) -> SolverConfig {
        SolverConfig { residual_tol: self.tol, max_iters: self.max_iters, seeds: self.seeds, ..SolverConfig::default() }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    solver: SolverFlags,
    /// Only certify the angles already in the file.
    #[arg(long)]
    verify_only: bool,
    /// Write the solved triangulation here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CanonizeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    solver: SolverFlags,
    /// Cap on flips; defaults to 10 n^3 for n tetrahedra.
    #[arg(long)]
    max_moves: Option<usize>,
    /// Faces with |t + t'| below this, relative to the largest tilt, are flat.
    #[arg(long, default_value_t = CanonizeConfig::default().tilt_eps)]
    tilt_eps: f64,
    /// Apply a 2-3 move across face F of tetrahedron T (written T.F) first.
    #[arg(long, value_parser = parse_face)]
    perturb_move: Option<(usize, usize)>,
    /// Write the final triangulation here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TiltArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    solver: SolverFlags,
    /// Faces with |t + t'| below this, relative to the largest tilt, are flat.
    #[arg(long, default_value_t = CanonizeConfig::default().tilt_eps)]
    tilt_eps: f64,
}

fn parse_face(s: &str) -> Result<(usize, usize), String> {
    let (t, f) = s.split_once('.').ok_or_else(|| format!("expected T.F, got {s:?}"))?;
    let t = t.parse().map_err(|_| format!("bad tetrahedron index {t:?}"))?;
    let f: usize = f.parse().map_err(|_| format!("bad face index {f:?}"))?;
    if f > 3 {
        return Err(format!("face index {f} out of range"));
    }
    Ok((t, f))
}

/// Early exit carrying a code and, when available, a partial report.
struct Stop {
    code: u8,
    report: Option<Box<RunReport>>,
    message: Option<String>,
}

impl Stop {
    fn msg(code: u8, message: impl Into<String>) -> Self {
        Stop { code, report: None, message: Some(message.into()) }
    }
    fn report(code: u8, report: RunReport) -> Self {
        Stop { code, report: Some(Box::new(report)), message: None }
    }
}

struct Clock {
    on: bool,
    last: Instant,
    marks: Vec<(String, f64)>,
}

impl Clock {
    fn new(on: bool) -> Self {
        Clock { on, last: Instant::now(), marks: vec![] }
    }
    fn mark(&mut self, what: &str) {
        let now = Instant::now();
        self.marks.push((what.to_string(), (now - self.last).as_secs_f64() * 1e3));
        self.last = now;
    }
    fn attach(self, report: &mut RunReport) {
        if self.on {
            report.timing_ms = Some(self.marks);
        }
    }
}

fn load(command: &str, path: &Path) -> Result<TriangulationFile, Stop> {
    let text = std::fs::read_to_string(path).map_err(|e| Stop::msg(exit::INPUT, format!("{}: {e}", path.display())))?;
    match format::parse(&text) {
        Ok(f) => Ok(f),
        Err(FormatError::Parse(e)) => Err(Stop::msg(exit::INPUT, format!("{}:{e}", path.display()))),
        Err(FormatError::Invalid(e)) => {
            // the tables parsed, so the header is usable for the report
            let (name, raw, _, _) = format::parse_raw(&text).map_err(|e| Stop::msg(exit::INPUT, e.to_string()))?;
            let mut r = RunReport::new(command, &TriangulationFile::new(trunckit::Triangulation { tets: vec![] }));
            r.name = name;
            r.tetrahedra = raw.neighbours.len();
            r.validation = Some(ValidationSummary::failed(e.to_string()));
            Err(Stop::report(exit::INVALID, r))
        }
    }
}

fn validated(command: &str, file: &TriangulationFile) -> Result<RunReport, Stop> {
    let mut r = RunReport::new(command, file);
    let v = validation_summary(&file.tri);
    let ok = v.ok;
    r.validation = Some(v);
    if ok {
        Ok(r)
    } else {
        Err(Stop::report(exit::INVALID, r))
    }
}

/// Angles from the file, or from a fresh solve recorded in the report.
fn angles_for(file: &TriangulationFile, cfg: &SolverConfig, report: &mut RunReport) -> Result<Vec<TetAngles>, Stop> {
    if let Some(a) = &file.angles {
        return Ok(a.clone());
    }
    let sys = assemble(&file.tri).map_err(|e| Stop::msg(exit::INTERNAL, e.to_string()))?;
    let out = solve_system(&sys, cfg);
    let angles = out.tet_angles(&sys);
    report.solve = Some(SolveSummary::new(&out, &angles));
    if out.status != SolveStatus::Solved {
        return Err(Stop::report(exit::NO_CONVERGENCE, report.clone()));
    }
    Ok(angles)
}

/// Horosphere radii from the file's heights, or the safe cross-section.
fn radii_for(file: &TriangulationFile, angles: &[TetAngles], report: &mut RunReport) -> Result<Vec<HoroRadii>, Stop> {
    let internal = |e: trunckit::canonical::CanonicalError| Stop::msg(exit::INTERNAL, e.to_string());
    let radii = match &file.heights {
        Some(h) => radii_from_heights(&file.tri, angles, h).map_err(internal)?,
        None => {
            let (radii, cs) = section_radii(&file.tri, angles, DEVELOPMENT_CAP).map_err(internal)?;
            report.cusp_heights = cs.map(|c| c.cusps);
            radii
        }
    };
    if file.tri.has_ideal() {
        report.heights_used = Some(heights_from_radii(&file.tri, angles, &radii).map_err(internal)?);
    }
    Ok(radii)
}

fn write_out(path: &Path, file: &TriangulationFile) -> Result<(), Stop> {
    std::fs::write(path, format::write(file)).map_err(|e| Stop::msg(exit::INPUT, format!("{}: {e}", path.display())))
}

fn cmd_validate(a: &Common) -> Result<(RunReport, u8), Stop> {
    let mut clock = Clock::new(a.timing);
    let file = load("validate", &a.file)?;
    clock.mark("parse");
    let mut r = validated("validate", &file)?;
    clock.mark("validate");
    clock.attach(&mut r);
    Ok((r, exit::OK))
}

fn cmd_solve(a: &SolveArgs) -> Result<(RunReport, u8), Stop> {
    let mut clock = Clock::new(a.common.timing);
    let file = load("solve", &a.common.file)?;
    clock.mark("parse");
    let mut r = validated("solve", &file)?;
    clock.mark("validate");
    let cfg = a.solver.config();
    let angles = if a.verify_only {
        file.angles.clone().ok_or_else(|| Stop::msg(exit::INPUT, "--verify-only needs an angles block"))?
    } else {
        let sys = assemble(&file.tri).map_err(|e| Stop::msg(exit::INTERNAL, e.to_string()))?;
        let out = solve_system(&sys, &cfg);
        let angles = out.tet_angles(&sys);
        r.solve = Some(SolveSummary::new(&out, &angles));
        clock.mark("solve");
        if out.status != SolveStatus::Solved {
            clock.attach(&mut r);
            return Err(Stop::report(exit::NO_CONVERGENCE, r));
        }
        angles
    };
    let cert = certify(&file.tri, &angles).map_err(|e| Stop::msg(exit::INTERNAL, e.to_string()))?;
    clock.mark("certify");
    let passes = cert.passes(cfg.residual_tol);
    r.certificate = Some(cert);
    clock.attach(&mut r);
    if !passes {
        return Err(Stop::report(exit::NO_CONVERGENCE, r));
    }
    if let (Some(path), false) = (&a.out, a.verify_only) {
        let solved = TriangulationFile { name: file.name.clone(), tri: file.tri.clone(), angles: Some(angles), heights: None };
        write_out(path, &solved)?;
    }
    Ok((r, exit::OK))
}

fn cmd_canonize(a: &CanonizeArgs) -> Result<(RunReport, u8), Stop> {
    let mut clock = Clock::new(a.common.timing);
    let file = load("canonize", &a.common.file)?;
    clock.mark("parse");
    let mut r = validated("canonize", &file)?;
    let angles = angles_for(&file, &a.solver.config(), &mut r)?;
    clock.mark("solve");
    let radii = radii_for(&file, &angles, &mut r)?;
    clock.mark("heights");
    let (tri, angles, radii) = match a.perturb_move {
        None => (file.tri.clone(), angles, radii),
        Some((t, f)) => {
            if t >= file.tri.len() {
                return Err(Stop::msg(exit::USAGE, format!("no tetrahedron {t}")));
            }
            let g = Geometric::new(file.tri.clone(), angles, radii).map_err(|e| Stop::msg(exit::INTERNAL, e.to_string()))?;
            let (g, _) = geometric_two_three(&g, t, f).map_err(|e| Stop::msg(exit::INTERNAL, format!("2-3 move at {t}.{f}: {e}")))?;
            (g.tri, g.angles, g.radii)
        }
    };
    let cfg = CanonizeConfig { max_moves: a.max_moves, tilt_eps: a.tilt_eps, radii: Some(radii), ..CanonizeConfig::default() };
    let out = canonize(&tri, &angles, &cfg).map_err(|e| Stop::msg(exit::INTERNAL, e.to_string()))?;
    clock.mark("canonize");
    r.tilts = Some(out.tilts.clone());
    r.canonical = Some(CanonicalSummary::new(&out));
    clock.attach(&mut r);
    if let Some(path) = &a.out {
        let heights = if out.state.tri.has_ideal() { heights_from_radii(&out.state.tri, &out.state.angles, &out.state.radii).ok() } else { None };
        let f = TriangulationFile { name: file.name.clone(), tri: out.state.tri.clone(), angles: Some(out.state.angles.clone()), heights };
        write_out(path, &f)?;
    }
    let code = match out.status {
        CanonStatus::Canonical => exit::OK,
        CanonStatus::Subdivision => exit::SUBDIVISION,
        CanonStatus::Stuck => exit::STUCK,
    };
    Ok((r, code))
}

fn cmd_tilts(a: &TiltArgs) -> Result<(RunReport, u8), Stop> {
    let mut clock = Clock::new(a.common.timing);
    let file = load("tilts", &a.common.file)?;
    clock.mark("parse");
    let mut r = validated("tilts", &file)?;
    let angles = angles_for(&file, &a.solver.config(), &mut r)?;
    clock.mark("solve");
    let radii = radii_for(&file, &angles, &mut r)?;
    clock.mark("heights");
    r.tilts = Some(tilt_report(&file.tri, &angles, &radii, a.tilt_eps).map_err(|e| Stop::msg(exit::INTERNAL, e.to_string()))?);
    clock.mark("tilts");
    clock.attach(&mut r);
    Ok((r, exit::OK))
}

fn cmd_isosig(a: &Common) -> Result<(RunReport, u8), Stop> {
    let mut clock = Clock::new(a.timing);
    let file = load("isosig", &a.file)?;
    let mut r = RunReport::new("isosig", &file);
    r.isosig = Some(isosig(&file.tri));
    clock.mark("isosig");
    clock.attach(&mut r);
    Ok((r, exit::OK))
}

fn configure_threads() {
    if let Some(n) = std::env::var("TRUNCKIT_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    configure_threads();
    let (json, bare_isosig) = match &cli.command {
        Command::Validate(c) => (c.json, false),
        Command::Solve(s) => (s.common.json, false),
        Command::Canonize(c) => (c.common.json, false),
        Command::Tilts(t) => (t.common.json, false),
        Command::Isosig(c) => (c.json, !c.timing),
    };
    let result = match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Canonize(a) => cmd_canonize(a),
        Command::Tilts(a) => cmd_tilts(a),
        Command::Isosig(a) => cmd_isosig(a),
    };
    let (report, code) = match result {
        Ok((r, c)) => (Some(r), c),
        Err(Stop { code, report, message }) => {
            if let Some(m) = message {
                eprintln!("error: {m}");
            }
            (report.map(|r| *r), code)
        }
    };
    if let Some(r) = report {
        if json {
            print!("{}", r.to_json());
        } else if bare_isosig && r.isosig.is_some() {
            println!("{}", r.isosig.as_deref().unwrap_or_default());
        } else {
            print!("{}", r.to_text());
        }
    }
    ExitCode::from(code)
}
