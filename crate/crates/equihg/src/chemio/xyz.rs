//! XYZ reading: count line, comment line, then `symbol x y z` rows.
//!
//! XYZ carries no connectivity, so the result has zero bonds; callers that
//! need a graph must perceive or supply bonds separately.

use super::{Atom, Element, Molecule};
use crate::error::{Error, Result};
use std::path::Path;

/// Parses a single XYZ block. `name` becomes the molecule name (the comment
/// line is ignored; dataset joins key on the filename stem instead).
pub fn parse_xyz(text: &str, name: &str, src: &Path) -> Result<Molecule> {
    let err = |line: usize, msg: String| Error::parse(src, line, msg);
    let mut lines = text.lines();
    let count_line = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let n: usize = count_line
        .trim()
        .parse()
        .map_err(|_| err(1, format!("bad atom count {:?}", count_line.trim())))?;
    lines.next(); // comment, may be absent when n == 0 and file is one line

    let mut atoms = Vec::with_capacity(n);
    let mut coords = Vec::with_capacity(n);
    for k in 0..n {
        let li = k + 3;
        let line = lines
            .next()
            .ok_or_else(|| err(li, format!("expected {n} atom rows, found {k}")))?;
        let mut tok = line.split_whitespace();
        let sym = tok
            .next()
            .ok_or_else(|| err(li, format!("expected {n} atom rows, found {k}")))?;
        let element = Element::from_symbol(sym)
            .ok_or_else(|| err(li, format!("unsupported element {sym:?}")))?;
        let mut coord = [0.0f64; 3];
        for c in coord.iter_mut() {
            let t = tok
                .next()
                .ok_or_else(|| err(li, format!("missing coordinate in {line:?}")))?;
            *c = t
                .parse()
                .map_err(|_| err(li, format!("unparseable float {t:?}")))?;
        }
        atoms.push(Atom::new(element));
        coords.push(coord);
    }
    // Extra non-blank rows mean the count line lied in the other direction.
    if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
        return Err(err(n + 3, format!("more atom rows than the declared {n}: {extra:?}")));
    }

    Ok(Molecule {
        name: name.to_string(),
        atoms,
        bonds: Vec::new(),
        coords: Some(coords),
    })
}
