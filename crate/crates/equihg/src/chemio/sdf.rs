//! MDL SDF / molfile V2000 reading and writing.
//!
//! Fixed-width fields per the ctfile layout: counts in columns 1-6, atom
//! coords in 1-30 with the symbol in 32-34, bond endpoints and order in 1-9.
//! `M  CHG` property lines supersede any charge information; records end at
//! `M  END` and are separated by `$$$$`.

use super::{Atom, Bond, BondOrder, Element, Molecule};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

pub fn read_sdf_file(path: &Path) -> Result<Vec<Molecule>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sdf(&text, path)
}

/// Parses every record in `text`; `src` only labels error messages.
pub fn parse_sdf(text: &str, src: &Path) -> Result<Vec<Molecule>> {
    let lines: Vec<&str> = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        // Skip blank space between records; done when nothing is left.
        while i < lines.len() && lines[i].trim().is_empty() {
            i += 1;
        }
        if i >= lines.len() {
            return Ok(out);
        }
        let (mol, next) = parse_record(&lines, i, src)?;
        out.push(mol);
        i = next;
    }
}

/// One record starting at `start`; returns the molecule and the index of the
/// first line after its `$$$$` terminator (or EOF for the last record).
fn parse_record(lines: &[&str], start: usize, src: &Path) -> Result<(Molecule, usize)> {
    let err = |line: usize, msg: String| Error::parse(src, line + 1, msg);
    let counts_idx = start + 3;
    if counts_idx >= lines.len() {
        return Err(err(
            lines.len().saturating_sub(1),
            "file ended before the counts line".into(),
        ));
    }
    let name = lines[start].trim().to_string();
    let counts = lines[counts_idx];
    let natoms = fixed_usize(counts, 0, 3)
        .ok_or_else(|| err(counts_idx, format!("malformed counts line {counts:?}")))?;
    let nbonds = fixed_usize(counts, 3, 6)
        .ok_or_else(|| err(counts_idx, format!("malformed counts line {counts:?}")))?;

    let mut atoms = Vec::with_capacity(natoms);
    let mut coords = Vec::with_capacity(natoms);
    for k in 0..natoms {
        let li = counts_idx + 1 + k;
        let line = *lines
            .get(li)
            .ok_or_else(|| err(lines.len() - 1, format!("file ended inside atom block (expected {natoms} atoms)")))?;
        let x = fixed_f64(line, 0, 10).ok_or_else(|| err(li, format!("bad x coordinate in {line:?}")))?;
        let y = fixed_f64(line, 10, 20).ok_or_else(|| err(li, format!("bad y coordinate in {line:?}")))?;
        let z = fixed_f64(line, 20, 30).ok_or_else(|| err(li, format!("bad z coordinate in {line:?}")))?;
        let sym = slice_cols(line, 31, 34).trim();
        let element = Element::from_symbol(sym)
            .ok_or_else(|| err(li, format!("unsupported element {sym:?}")))?;
        atoms.push(Atom::new(element));
        coords.push([x, y, z]);
    }

    let mut bonds = Vec::with_capacity(nbonds);
    for k in 0..nbonds {
        let li = counts_idx + 1 + natoms + k;
        let line = *lines
            .get(li)
            .ok_or_else(|| err(lines.len() - 1, format!("file ended inside bond block (expected {nbonds} bonds)")))?;
        let a = fixed_usize(line, 0, 3).ok_or_else(|| err(li, format!("bad bond atom field in {line:?}")))?;
        let b = fixed_usize(line, 3, 6).ok_or_else(|| err(li, format!("bad bond atom field in {line:?}")))?;
        let code = fixed_usize(line, 6, 9).ok_or_else(|| err(li, format!("bad bond order field in {line:?}")))?;
        if a == 0 || b == 0 || a > natoms || b > natoms {
            return Err(err(li, format!("bond references atom out of range: {a}-{b}")));
        }
        if a == b {
            return Err(err(li, format!("bond {a}-{b} is a self-loop")));
        }
        let order = BondOrder::from_sdf_code(code as u32)
            .ok_or_else(|| err(li, format!("unsupported bond order code {code}")))?;
        bonds.push(Bond::new(a - 1, b - 1, order));
    }

    // Property block up to M  END; only charges are interpreted. The first
    // M  CHG line supersedes all previous charge state (ctfile rule).
    let mut i = counts_idx + 1 + natoms + nbonds;
    let mut saw_chg = false;
    let mut ended = false;
    while i < lines.len() {
        let line = lines[i];
        i += 1;
        if line.starts_with("M  END") {
            ended = true;
            break;
        }
        if let Some(rest) = line.strip_prefix("M  CHG") {
            let fields: Vec<isize> = rest
                .split_whitespace()
                .map(|t| t.parse::<isize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(i - 1, format!("malformed charge line {line:?}")))?;
            if fields.is_empty() || fields.len() != 1 + 2 * fields[0].max(0) as usize {
                return Err(err(i - 1, format!("malformed charge line {line:?}")));
            }
            if !saw_chg {
                atoms.iter_mut().for_each(|a| a.charge = 0);
                saw_chg = true;
            }
            for pair in fields[1..].chunks(2) {
                let (idx, chg) = (pair[0], pair[1]);
                if idx < 1 || idx as usize > natoms {
                    return Err(err(i - 1, format!("charge on nonexistent atom {idx}")));
                }
                atoms[idx as usize - 1].charge = chg as i8;
            }
        }
    }
    if !ended {
        return Err(err(lines.len() - 1, "file ended before M  END".into()));
    }

    // Data items until the $$$$ separator (absent for a bare molfile tail).
    while i < lines.len() {
        let line = lines[i];
        i += 1;
        if line.trim_end() == "$$$$" {
            break;
        }
    }

    let mut mol = Molecule {
        name,
        atoms,
        bonds,
        coords: Some(coords),
    };
    mark_aromatic_atoms(&mut mol);
    Ok((mol, i))
}

/// Atoms touching an aromatic bond are aromatic; SDF has no atom flag.
fn mark_aromatic_atoms(mol: &mut Molecule) {
    for k in 0..mol.bonds.len() {
        if mol.bonds[k].order == BondOrder::Aromatic {
            mol.atoms[mol.bonds[k].a].aromatic = true;
            mol.atoms[mol.bonds[k].b].aromatic = true;
        }
    }
}

fn slice_cols(line: &str, from: usize, to: usize) -> &str {
    let end = to.min(line.len());
    if from >= end {
        ""
    } else {
        &line[from..end]
    }
}

fn fixed_usize(line: &str, from: usize, to: usize) -> Option<usize> {
    slice_cols(line, from, to).trim().parse().ok()
}

fn fixed_f64(line: &str, from: usize, to: usize) -> Option<f64> {
    slice_cols(line, from, to).trim().parse().ok()
}

/// Serializes one molecule as a V2000 record ending in `$$$$`. Coordinates
/// are written with four decimals; molecules without geometry get zeros.
pub fn write_sdf(mol: &Molecule) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", mol.name);
    s.push_str("  equihg\n\n");
    let _ = writeln!(
        s,
        "{:3}{:3}  0  0  0  0  0  0  0  0999 V2000",
        mol.atoms.len(),
        mol.bonds.len()
    );
    for (i, atom) in mol.atoms.iter().enumerate() {
        let [x, y, z] = mol.coords.as_ref().map_or([0.0; 3], |c| c[i]);
        let _ = writeln!(
            s,
            "{x:10.4}{y:10.4}{z:10.4} {:<3} 0  0  0  0  0  0  0  0  0  0  0  0",
            atom.element.symbol()
        );
    }
    for b in &mol.bonds {
        let _ = writeln!(s, "{:3}{:3}{:3}  0", b.a + 1, b.b + 1, b.order.sdf_code());
    }
    let charged: Vec<(usize, i8)> = mol
        .atoms
        .iter()
        .enumerate()
        .filter(|(_, a)| a.charge != 0)
        .map(|(i, a)| (i, a.charge))
        .collect();
    for chunk in charged.chunks(8) {
        let _ = write!(s, "M  CHG{:3}", chunk.len());
        for (i, c) in chunk {
            let _ = write!(s, "{:4}{:4}", i + 1, c);
        }
        s.push('\n');
    }
    s.push_str("M  END\n$$$$\n");
    s
}

/// All records concatenated, ready to be written as a .sdf file.
pub fn write_sdf_records(mols: &[Molecule]) -> String {
    mols.iter().map(write_sdf).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const WATER: &str = "\
water
  test

  3  2  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 O   0  0  0  0  0  0  0  0  0  0  0  0
    0.7572    0.5865    0.0000 H   0  0  0  0  0  0  0  0  0  0  0  0
   -0.7572    0.5865    0.0000 H   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0
  1  3  1  0
M  END
$$$$
";

    fn src() -> &'static Path {
        Path::new("test.sdf")
    }

    #[test]
    fn water_parses() {
        let mols = parse_sdf(WATER, src()).unwrap();
        assert_eq!(mols.len(), 1);
        let m = &mols[0];
        assert_eq!(m.name, "water");
        assert_eq!(m.atoms.len(), 3);
        assert_eq!(m.atoms[0].element, Element::O);
        assert_eq!(m.bonds.len(), 2);
        assert_eq!(m.bonds[0], Bond::new(0, 1, BondOrder::Single));
        let c = m.coords.as_ref().unwrap();
        assert_eq!(c[1], [0.7572, 0.5865, 0.0]);
    }

    #[test]
    fn empty_input_gives_empty_list() {
        assert!(parse_sdf("", src()).unwrap().is_empty());
        assert!(parse_sdf("\n\n  \n", src()).unwrap().is_empty());
    }

    #[test]
    fn short_atom_block_reports_line_number() {
        // Counts promise 3 atoms but the record ends after 1.
        let text = "broken\n\n\n  3  0  0  0  0  0  0  0  0  0999 V2000\n    0.0000    0.0000    0.0000 C   0  0\n";
        let err = parse_sdf(text, src()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("test.sdf:"), "{msg}");
        assert!(msg.contains("inside atom block"), "{msg}");
    }

    #[test]
    fn malformed_counts_line_is_an_error() {
        let text = "x\n\n\n  ?  2\n";
        let err = parse_sdf(text, src()).unwrap_err();
        assert!(err.to_string().contains("malformed counts line"));
    }

    #[test]
    fn unsupported_element_is_an_error() {
        let text = "x\n\n\n  1  0  0  0  0  0  0  0  0  0999 V2000\n    0.0000    0.0000    0.0000 Xe  0  0\nM  END\n$$$$\n";
        let err = parse_sdf(text, src()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":5:"), "line number missing: {msg}");
        assert!(msg.contains("unsupported element"), "{msg}");
    }

    #[test]
    fn charge_lines_override() {
        let text = "ion\n\n\n  2  1  0  0  0  0  0  0  0  0999 V2000\n    0.0000    0.0000    0.0000 N   0  0  0  0  0  0  0  0  0  0  0  0\n    1.0000    0.0000    0.0000 O   0  0  0  0  0  0  0  0  0  0  0  0\n  1  2  1  0\nM  CHG  2   1   1   2  -1\nM  END\n$$$$\n";
        let m = &parse_sdf(text, src()).unwrap()[0];
        assert_eq!(m.atoms[0].charge, 1);
        assert_eq!(m.atoms[1].charge, -1);
    }

    #[test]
    fn aromatic_bonds_flag_their_atoms() {
        let text = "arom\n\n\n  2  1  0  0  0  0  0  0  0  0999 V2000\n    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0\n    1.3900    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0\n  1  2  4  0\nM  END\n$$$$\n";
        let m = &parse_sdf(text, src()).unwrap()[0];
        assert!(m.atoms.iter().all(|a| a.aromatic));
        assert!(m.validate().is_ok());
    }

    #[test]
    fn multi_record_files_split_on_dollars() {
        let text = format!("{WATER}{WATER}");
        let mols = parse_sdf(&text, src()).unwrap();
        assert_eq!(mols.len(), 2);
        assert_eq!(mols[0].name, "water");
        assert_eq!(mols[1].name, "water");
    }

    #[test]
    fn roundtrip_is_exact_at_four_decimals() {
        let mols = parse_sdf(WATER, src()).unwrap();
        let text = write_sdf(&mols[0]);
        let back = parse_sdf(&text, src()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].atoms, mols[0].atoms);
        assert_eq!(back[0].bonds, mols[0].bonds);
        assert_eq!(back[0].coords, mols[0].coords);
        // Stable under a second pass: writing again reproduces the bytes.
        assert_eq!(write_sdf(&back[0]), text);
    }

    #[test]
    fn roundtrip_keeps_charges_and_aromatic_orders() {
        let mut mol = Molecule {
            name: "probe".into(),
            atoms: vec![
                Atom {
                    element: Element::C,
                    charge: 0,
                    aromatic: true,
                },
                Atom {
                    element: Element::C,
                    charge: 0,
                    aromatic: true,
                },
                Atom {
                    element: Element::O,
                    charge: -1,
                    aromatic: false,
                },
            ],
            bonds: vec![
                Bond::new(0, 1, BondOrder::Aromatic),
                Bond::new(1, 2, BondOrder::Single),
            ],
            coords: Some(vec![
                [0.0, 0.0, 0.0],
                [1.39, 0.0, 0.0],
                [2.1, 1.2, -0.5],
            ]),
        };
        mol.atoms[2].charge = -1;
        let back = &parse_sdf(&write_sdf(&mol), src()).unwrap()[0];
        assert_eq!(back.atoms, mol.atoms);
        assert_eq!(back.bonds, mol.bonds);
    }
}
