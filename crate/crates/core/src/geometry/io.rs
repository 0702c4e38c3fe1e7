//! Line-oriented text format for multi-patch geometries.
//!
//! ```text
//! IGABEM-GEOMETRY 1
//! patches <n>
//! patch <idx> deg <p1> <p2> knots1 <len> <values…> knots2 <len> <values…>
//! cp <j1> <j2> <x> <y> <z> <w>        (k1·k2 lines, j2 fastest)
//! ```

use super::{GeometryError, NurbsPatch, SurfaceGeometry, Vec3};
use crate::spline::KnotVector;
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &str = "IGABEM-GEOMETRY";
const VERSION: &str = "1";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Canonical textual form of a set of patches.
pub fn write_patches(patches: &[NurbsPatch]) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC} {VERSION}").unwrap();
    writeln!(out, "patches {}", patches.len()).unwrap();
    for (idx, patch) in patches.iter().enumerate() {
        let (p1, p2) = patch.degrees();
        let k1 = patch.knots1().knots();
        let k2 = patch.knots2().knots();
        write!(out, "patch {idx} deg {p1} {p2} knots1 {}", k1.len()).unwrap();
        for &k in k1 {
            write!(out, " {}", fmt_f64(k)).unwrap();
        }
        write!(out, " knots2 {}", k2.len()).unwrap();
        for &k in k2 {
            write!(out, " {}", fmt_f64(k)).unwrap();
        }
        out.push('\n');
        let n2 = patch.knots2().num_basis();
        for (i, (c, w)) in patch.control().iter().zip(patch.weights()).enumerate() {
            writeln!(
                out,
                "cp {} {} {} {} {} {}",
                i / n2,
                i % n2,
                fmt_f64(c.x),
                fmt_f64(c.y),
                fmt_f64(c.z),
                fmt_f64(*w)
            )
            .unwrap();
        }
    }
    out
}

pub fn write_geometry(geometry: &SurfaceGeometry) -> String {
    write_patches(geometry.patches())
}

pub fn save_geometry(geometry: &SurfaceGeometry, path: impl AsRef<Path>) -> Result<(), GeometryError> {
    std::fs::write(path, write_geometry(geometry))?;
    Ok(())
}

pub fn load_geometry(path: impl AsRef<Path>) -> Result<SurfaceGeometry, GeometryError> {
    parse_geometry(&std::fs::read_to_string(path)?)
}

/// Parses and validates a geometry; the conformity table is rebuilt.
pub fn parse_geometry(text: &str) -> Result<SurfaceGeometry, GeometryError> {
    SurfaceGeometry::new(parse_patches(text)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if !tokens.is_empty() {
                return Some((i + 1, tokens));
            }
        }
        None
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        line,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&&str>, what: &str) -> Result<T, GeometryError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))
}

fn keyword(line: usize, tok: Option<&&str>, expected: &str) -> Result<(), GeometryError> {
    match tok {
        Some(t) if *t == expected => Ok(()),
        other => Err(parse_err(
            line,
            format!("expected '{expected}', found '{}'", other.copied().unwrap_or("")),
        )),
    }
}

/// Parses patches without the surface-level validation.
pub fn parse_patches(text: &str) -> Result<Vec<NurbsPatch>, GeometryError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, header) = lines
        .next()
        .ok_or_else(|| GeometryError::MalformedHeader("empty file".into()))?;
    if header.len() != 2 || header[0] != MAGIC || header[1] != VERSION {
        return Err(GeometryError::MalformedHeader(header.join(" ")));
    }
    let (ln, count) = lines
        .next()
        .ok_or_else(|| GeometryError::MalformedHeader("missing patch count".into()))?;
    if count.len() != 2 || count[0] != "patches" {
        return Err(GeometryError::MalformedHeader(count.join(" ")));
    }
    let n: usize = num(ln, count.get(1), "patch count")?;
    let mut patches = Vec::with_capacity(n);
    for expected_idx in 0..n {
        let (ln, toks) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("missing patch {expected_idx}")))?;
        let mut it = toks.iter();
        keyword(ln, it.next(), "patch")?;
        let idx: usize = num(ln, it.next(), "patch index")?;
        if idx != expected_idx {
            return Err(parse_err(ln, format!("expected patch {expected_idx}, found {idx}")));
        }
        keyword(ln, it.next(), "deg")?;
        let p1: usize = num(ln, it.next(), "degree")?;
        let p2: usize = num(ln, it.next(), "degree")?;
        let mut read_knots = |name: &str| -> Result<Vec<f64>, GeometryError> {
            keyword(ln, it.next(), name)?;
            let len: usize = num(ln, it.next(), "knot count")?;
            (0..len).map(|_| num(ln, it.next(), "knot")).collect()
        };
        let knots1 = KnotVector::new(read_knots("knots1")?, p1)?;
        let knots2 = KnotVector::new(read_knots("knots2")?, p2)?;
        if it.next().is_some() {
            return Err(parse_err(ln, "trailing tokens after knot vectors"));
        }
        let (k1, k2) = (knots1.num_basis(), knots2.num_basis());
        let mut control = Vec::with_capacity(k1 * k2);
        let mut weights = Vec::with_capacity(k1 * k2);
        for i in 0..k1 * k2 {
            let (ln, toks) = match lines.next() {
                Some((ln, toks)) if toks[0] == "cp" => (ln, toks),
                _ => {
                    return Err(GeometryError::ControlNetMismatch {
                        patch: idx,
                        expected: k1 * k2,
                        got: i,
                    })
                }
            };
            if toks.len() != 7 {
                return Err(parse_err(ln, "control point line needs 6 values"));
            }
            let j1: usize = num(ln, toks.get(1), "index")?;
            let j2: usize = num(ln, toks.get(2), "index")?;
            if (j1, j2) != (i / k2, i % k2) {
                return Err(GeometryError::ControlNetMismatch {
                    patch: idx,
                    expected: k1 * k2,
                    got: i,
                });
            }
            let v: Vec<f64> = (3..7)
                .map(|k| num(ln, toks.get(k), "coordinate"))
                .collect::<Result<_, _>>()?;
            control.push(Vec3::new(v[0], v[1], v[2]));
            weights.push(v[3]);
        }
        patches.push(NurbsPatch::new_labeled(idx, knots1, knots2, control, weights)?);
    }
    if let Some((ln, toks)) = lines.next() {
        if toks[0] == "cp" {
            return Err(GeometryError::ControlNetMismatch {
                patch: n.saturating_sub(1),
                expected: patches.last().map_or(0, |p| p.control().len()),
                got: patches.last().map_or(0, |p| p.control().len()) + 1,
            });
        }
        return Err(parse_err(ln, "unexpected content after last patch"));
    }
    Ok(patches)
}
