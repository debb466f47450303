//! The `TRUNCKIT 1` text format.
//!
//! ```text
//! TRUNCKIT 1
//! name figure-eight
//! tetrahedra 2
//! tet 0: 1.0.132 1.2.130 1.1.230 1.3.210 ideal=1111 zero=000000
//! tet 1: 0.0.132 0.2.301 0.1.302 0.3.210 ideal=1111 zero=000000
//! angles
//! 0: 1.0471975511965976e0 ...
//! heights
//! 0: 1.0000000000000000e0
//! ```
//!
//! A gluing record `t.g.abc` on face `f` says the face is glued to face `g`
//! of tetrahedron `t`, the vertices of `f` in increasing order going to
//! `a`, `b`, `c`. The full grammar is in the README.

use std::fmt::Write as _;

use thiserror::Error;

use crate::perm::Perm4;
use crate::tetshape::{others, TetAngles, TetCombinatorics};
use crate::triangulation::{from_tables, Triangulation, TriangulationError};

pub const HEADER: &str = "TRUNCKIT 1";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Invalid(#[from] TriangulationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangulationFile {
    pub name: Option<String>,
    pub tri: Triangulation,
    pub angles: Option<Vec<TetAngles>>,
    /// `(vertex class, height)` for the cusps.
    pub heights: Option<Vec<(usize, f64)>>,
}

impl TriangulationFile {
    pub fn new(tri: Triangulation) -> Self {
        TriangulationFile { name: None, tri, angles: None, heights: None }
    }
}

/// Gluing tables as written, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTables {
    pub neighbours: Vec<[usize; 4]>,
    pub perms: Vec<[[u8; 4]; 4]>,
    pub combs: Vec<TetCombinatorics>,
}

struct Cursor<'a> {
    line: usize,
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { line: self.line, column: self.pos + 1, message: message.into() })
    }

    fn skip_spaces(&mut self) {
        while self.text[self.pos..].starts_with([' ', '\t']) {
            self.pos += 1;
        }
    }

    fn word(&mut self) -> Result<(&'a str, usize), ParseError> {
        self.skip_spaces();
        let start = self.pos;
        let rest = &self.text[start..];
        let len = rest.find([' ', '\t']).unwrap_or(rest.len());
        if len == 0 {
            return self.err("unexpected end of line");
        }
        self.pos += len;
        Ok((&rest[..len], start))
    }

    fn expect(&mut self, w: &str) -> Result<(), ParseError> {
        let (got, at) = self.word()?;
        if got != w {
            self.pos = at;
            return self.err(format!("expected `{w}`, found `{got}`"));
        }
        Ok(())
    }

    fn uint(&mut self) -> Result<usize, ParseError> {
        let (w, at) = self.word()?;
        w.parse().or_else(|_| {
            self.pos = at;
            self.err(format!("expected a non-negative integer, found `{w}`"))
        })
    }

    fn float(&mut self) -> Result<f64, ParseError> {
        let (w, at) = self.word()?;
        match w.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => {
                self.pos = at;
                self.err(format!("expected a finite number, found `{w}`"))
            }
        }
    }

    fn end(&mut self) -> Result<(), ParseError> {
        self.skip_spaces();
        if self.pos < self.text.len() {
            return self.err("trailing characters");
        }
        Ok(())
    }

    /// `n:` index label.
    fn label(&mut self, want: usize) -> Result<(), ParseError> {
        let (w, at) = self.word()?;
        let ok = w.strip_suffix(':').and_then(|n| n.parse::<usize>().ok()) == Some(want);
        if !ok {
            self.pos = at;
            return self.err(format!("expected `{want}:`"));
        }
        Ok(())
    }
}

/// Content lines with comments and blank lines removed.
fn lines(text: &str) -> Vec<Cursor<'_>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let l = l.split('#').next().unwrap().trim_end();
            (!l.trim().is_empty()).then_some(Cursor { line: i + 1, text: l, pos: 0 })
        })
        .collect()
}

fn bits<const N: usize>(c: &mut Cursor, key: &str) -> Result<[bool; N], ParseError> {
    let (w, at) = c.word()?;
    let Some(b) = w.strip_prefix(key).and_then(|r| r.strip_prefix('=')) else {
        c.pos = at;
        return c.err(format!("expected `{key}=`"));
    };
    if b.len() != N || !b.bytes().all(|x| x == b'0' || x == b'1') {
        c.pos = at + key.len() + 1;
        return c.err(format!("expected {N} binary digits"));
    }
    Ok(std::array::from_fn(|i| b.as_bytes()[i] == b'1'))
}

fn gluing(c: &mut Cursor, f: usize, n: usize) -> Result<(usize, [u8; 4]), ParseError> {
    let (w, at) = c.word()?;
    let fail = |c: &mut Cursor, msg: &str| {
        c.pos = at;
        c.err::<(usize, [u8; 4])>(format!("bad gluing record `{w}`: {msg}"))
    };
    let parts: Vec<&str> = w.split('.').collect();
    if parts.len() != 3 {
        return fail(c, "expected `tet.face.abc`");
    }
    let Ok(t) = parts[0].parse::<usize>() else { return fail(c, "bad tetrahedron index") };
    if t >= n {
        return fail(c, "tetrahedron index out of range");
    }
    let Ok(g) = parts[1].parse::<u8>() else { return fail(c, "bad face index") };
    let img: Vec<u8> = parts[2].bytes().map(|b| b.wrapping_sub(b'0')).collect();
    if g > 3 || img.len() != 3 || img.iter().any(|&x| x > 3) {
        return fail(c, "indices must be 0..3");
    }
    let mut p = [0u8; 4];
    p[f] = g;
    for (k, &v) in others(f).iter().enumerate() {
        p[v] = img[k];
    }
    if Perm4::new(p).is_none() {
        return fail(c, "not a permutation");
    }
    Ok((t, p))
}

/// Name, gluing tables, angles and heights as read from a file.
pub type RawFile = (Option<String>, RawTables, Option<Vec<TetAngles>>, Option<Vec<(usize, f64)>>);

/// Reads the file structure without checking the gluings.
pub fn parse_raw(text: &str) -> Result<RawFile, ParseError> {
    let mut ls = lines(text).into_iter();
    let eof = |line: usize| ParseError { line, column: 1, message: "unexpected end of file".into() };
    let mut c = ls.next().ok_or_else(|| eof(1))?;
    c.expect("TRUNCKIT")?;
    let (v, at) = c.word()?;
    if v != "1" {
        c.pos = at;
        return c.err(format!("unsupported format version `{v}`"));
    }
    c.end()?;
    let mut last = c.line;
    let mut c = ls.next().ok_or_else(|| eof(last + 1))?;
    let mut name = None;
    if c.text.starts_with("name") {
        c.expect("name")?;
        c.skip_spaces();
        name = Some(c.text[c.pos..].to_string());
        last = c.line;
        c = ls.next().ok_or_else(|| eof(last + 1))?;
    }
    c.expect("tetrahedra")?;
    let n = c.uint()?;
    c.end()?;
    if n == 0 {
        return c.err("at least one tetrahedron is required");
    }
    last = c.line;
    let mut raw = RawTables { neighbours: Vec::with_capacity(n), perms: Vec::with_capacity(n), combs: Vec::with_capacity(n) };
    for t in 0..n {
        let mut c = ls.next().ok_or_else(|| eof(last + 1))?;
        c.expect("tet")?;
        c.label(t)?;
        let mut nb = [0; 4];
        let mut ps = [[0u8; 4]; 4];
        for f in 0..4 {
            (nb[f], ps[f]) = gluing(&mut c, f, n)?;
        }
        let ideal = bits::<4>(&mut c, "ideal")?;
        let zero = bits::<6>(&mut c, "zero")?;
        c.end()?;
        raw.neighbours.push(nb);
        raw.perms.push(ps);
        raw.combs.push(TetCombinatorics { ideal, zero });
        last = c.line;
    }
    let mut angles = None;
    let mut heights = None;
    let mut rest = ls.peekable();
    while let Some(mut c) = rest.next() {
        let (w, at) = c.word()?;
        c.end()?;
        match w {
            "angles" if angles.is_none() => {
                let mut a = Vec::with_capacity(n);
                for t in 0..n {
                    let mut c = rest.next().ok_or_else(|| eof(c.line + 1))?;
                    c.label(t)?;
                    let mut row = [0.0; 6];
                    for x in row.iter_mut() {
                        *x = c.float()?;
                    }
                    c.end()?;
                    a.push(TetAngles(row));
                }
                angles = Some(a);
            }
            "heights" if heights.is_none() => {
                let mut h = Vec::new();
                while let Some(next) = rest.peek() {
                    if !next.text.trim_start().starts_with(|ch: char| ch.is_ascii_digit()) {
                        break;
                    }
                    let mut c = rest.next().unwrap();
                    let (lw, lat) = c.word()?;
                    let Some(vc) = lw.strip_suffix(':').and_then(|x| x.parse::<usize>().ok()) else {
                        c.pos = lat;
                        return c.err("expected `class:`");
                    };
                    let x = c.float()?;
                    if x <= 0.0 {
                        return c.err("heights must be positive");
                    }
                    c.end()?;
                    h.push((vc, x));
                }
                heights = Some(h);
            }
            _ => {
                c.pos = at;
                return c.err(format!("unexpected block `{w}`"));
            }
        }
    }
    Ok((name, raw, angles, heights))
}

/// Parses and validates a file.
pub fn parse(text: &str) -> Result<TriangulationFile, FormatError> {
    let (name, raw, angles, heights) = parse_raw(text)?;
    let tri = from_tables(&raw.neighbours, &raw.perms, &raw.combs)?;
    Ok(TriangulationFile { name, tri, angles, heights })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write(file: &TriangulationFile) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    if let Some(n) = &file.name {
        let _ = writeln!(s, "name {n}");
    }
    let _ = writeln!(s, "tetrahedra {}", file.tri.len());
    for (t, tet) in file.tri.tets.iter().enumerate() {
        let _ = write!(s, "tet {t}:");
        for f in 0..4 {
            let g = tet.glued(f);
            let img: String = others(f).iter().map(|&v| char::from(b'0' + g.perm.apply(v) as u8)).collect();
            let _ = write!(s, " {}.{}.{}", g.tet, g.perm.apply(f), img);
        }
        let b = |x: &[bool]| x.iter().map(|&y| if y { '1' } else { '0' }).collect::<String>();
        let _ = writeln!(s, " ideal={} zero={}", b(&tet.comb.ideal), b(&tet.comb.zero));
    }
    if let Some(a) = &file.angles {
        let _ = writeln!(s, "angles");
        for (t, row) in a.iter().enumerate() {
            let _ = write!(s, "{t}:");
            for x in row.0 {
                let _ = write!(s, " {}", num(x));
            }
            let _ = writeln!(s);
        }
    }
    if let Some(h) = &file.heights {
        let _ = writeln!(s, "heights");
        for (vc, x) in h {
            let _ = writeln!(s, "{vc}: {}", num(*x));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triangulation::examples;
    use std::f64::consts::PI;

    #[test]
    fn round_trip_is_exact() {
        for tri in [examples::figure_eight(), examples::whitehead(), examples::compact_pair(), examples::mixed_pair()] {
            let angles: Vec<TetAngles> = (0..tri.len()).map(|t| TetAngles([PI / 3.0 + t as f64 * 1e-3, 0.1, 0.7, 1.0 / 3.0, 2.0, 0.5])).collect();
            let file = TriangulationFile { name: Some("x y".into()), tri, angles: Some(angles), heights: Some(vec![(0, 0.1 + 0.2)]) };
            let text = write(&file);
            let back = parse(&text).unwrap();
            assert_eq!(back, file);
            assert_eq!(write(&back), text);
        }
    }

    #[test]
    fn error_positions() {
        let text = write(&TriangulationFile::new(examples::figure_eight()));
        let bad = text.replace("tet 1: 0.0.132", "tet 1: 0.0.13x");
        match parse(&bad) {
            Err(FormatError::Parse(e)) => assert_eq!((e.line, e.column), (4, 8)),
            other => panic!("{other:?}"),
        }
        let bad = text.replace("TRUNCKIT 1", "TRUNCKIT 2");
        match parse(&bad) {
            Err(FormatError::Parse(e)) => assert_eq!((e.line, e.column), (1, 10)),
            other => panic!("{other:?}"),
        }
        let bad = text.replace("ideal=1111 zero=000000\ntet 1", "ideal=1111 zero=00000\ntet 1");
        assert!(matches!(parse(&bad), Err(FormatError::Parse(ParseError { line: 3, .. }))));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = write(&TriangulationFile::new(examples::figure_eight()));
        let noisy = format!("# hello\n\n{}", text.replace("tetrahedra 2", "tetrahedra 2   # two"));
        assert_eq!(parse(&noisy).unwrap().tri, examples::figure_eight());
    }

    #[test]
    fn inconsistent_gluing_is_reported() {
        let text = write(&TriangulationFile::new(examples::figure_eight()));
        let line = text.lines().nth(2).unwrap();
        let bad = text.replacen(line, &line.replacen("1.0.132", "1.0.123", 1), 1);
        assert!(matches!(parse(&bad), Err(FormatError::Invalid(_))), "{:?}", parse(&bad));
    }
}
