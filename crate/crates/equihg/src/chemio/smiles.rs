//! SMILES reading for the organic subset plus bracket atoms with charge.
//!
//! Supported: B C N O P S F Cl Br I, aromatic b c n o p s, bond symbols
//! `- = # :`, branches, ring closures `1`..`9` and `%nn`, bracket atoms with
//! an explicit H count and charge. No stereochemistry, no isotopes.
//!
//! Implicit hydrogens are materialized as explicit atoms so downstream code
//! never sees implicit counts. For a plain atom the H count fills up to the
//! smallest standard valence that covers the written bonds; aromatic atoms
//! reserve one unit for the ring pi system (benzene carbons get one H,
//! pyridine nitrogen none, furan oxygen none).

use super::{Atom, Bond, BondOrder, Element, Molecule};
use crate::error::{Error, Result};
use std::collections::HashMap;

pub fn parse_smiles(text: &str) -> Result<Molecule> {
    Parser::new(text).run()
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Explicit bracket H count; None means compute implicit hydrogens.
    bracket_h: Vec<Option<u8>>,
    /// Byte offset of each atom, for valence error reporting.
    atom_pos: Vec<usize>,
    prev: Option<usize>,
    pending: Option<BondOrder>,
    branch: Vec<usize>,
    /// Ring number -> (atom, bond symbol written at the opening side).
    open_rings: HashMap<u32, (usize, Option<BondOrder>)>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            bracket_h: Vec::new(),
            atom_pos: Vec::new(),
            prev: None,
            pending: None,
            branch: Vec::new(),
            open_rings: HashMap::new(),
        }
    }

    fn err(&self, pos: usize, msg: impl Into<String>) -> Error {
        Error::Smiles {
            smiles: self.text.to_string(),
            pos,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn run(mut self) -> Result<Molecule> {
        while let Some(c) = self.peek() {
            let at = self.pos;
            match c {
                b'-' | b'=' | b'#' | b':' => {
                    if self.pending.is_some() {
                        return Err(self.err(at, "two bond symbols in a row"));
                    }
                    if self.prev.is_none() {
                        return Err(self.err(at, "bond symbol before any atom"));
                    }
                    self.pending = Some(match c {
                        b'-' => BondOrder::Single,
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        _ => BondOrder::Aromatic,
                    });
                    self.pos += 1;
                }
                b'(' => {
                    let base = self
                        .prev
                        .ok_or_else(|| self.err(at, "branch before any atom"))?;
                    if self.pending.is_some() {
                        return Err(self.err(at, "bond symbol before a branch"));
                    }
                    self.branch.push(base);
                    self.pos += 1;
                }
                b')' => {
                    if self.pending.is_some() {
                        return Err(self.err(at, "dangling bond symbol before ')'"));
                    }
                    let base = self
                        .branch
                        .pop()
                        .ok_or_else(|| self.err(at, "unmatched ')'"))?;
                    self.prev = Some(base);
                    self.pos += 1;
                }
                b'1'..=b'9' => {
                    self.pos += 1;
                    self.ring(at, (c - b'0') as u32)?;
                }
                b'%' => {
                    let d1 = self.bytes.get(at + 1).copied().filter(u8::is_ascii_digit);
                    let d2 = self.bytes.get(at + 2).copied().filter(u8::is_ascii_digit);
                    match (d1, d2) {
                        (Some(a), Some(b)) => {
                            self.pos += 3;
                            self.ring(at, ((a - b'0') * 10 + (b - b'0')) as u32)?;
                        }
                        _ => return Err(self.err(at, "'%' must be followed by two digits")),
                    }
                }
                b'[' => {
                    self.pos += 1;
                    let idx = self.bracket_atom(at)?;
                    self.attach(idx)?;
                }
                _ => {
                    if let Some((element, aromatic, len)) = self.organic_symbol() {
                        self.pos += len;
                        let idx = self.push_atom(at, element, aromatic, 0, None);
                        self.attach(idx)?;
                    } else {
                        return Err(self.err(at, format!("unsupported token {:?}", c as char)));
                    }
                }
            }
        }
        if self.pending.is_some() {
            return Err(self.err(self.text.len(), "dangling bond symbol at end of input"));
        }
        if !self.branch.is_empty() {
            return Err(self.err(self.text.len(), "unmatched '('"));
        }
        if let Some(&n) = self.open_rings.keys().min() {
            return Err(self.err(self.text.len(), format!("unclosed ring closure {n}")));
        }
        if self.atoms.is_empty() {
            return Err(self.err(0, "no atoms"));
        }
        self.materialize_hydrogens()?;
        Ok(Molecule {
            name: self.text.to_string(),
            atoms: self.atoms,
            bonds: self.bonds,
            coords: None,
        })
    }

    /// Two-letter organic-subset symbols take priority over one-letter.
    fn organic_symbol(&self) -> Option<(Element, bool, usize)> {
        let rest = &self.text[self.pos..];
        for (tok, el) in [("Cl", Element::Cl), ("Br", Element::Br)] {
            if rest.starts_with(tok) {
                return Some((el, false, 2));
            }
        }
        let c = rest.chars().next()?;
        let el = match c.to_ascii_uppercase() {
            'B' => Element::B,
            'C' => Element::C,
            'N' => Element::N,
            'O' => Element::O,
            'P' => Element::P,
            'S' => Element::S,
            'F' => Element::F,
            'I' => Element::I,
            _ => return None,
        };
        let aromatic = c.is_ascii_lowercase();
        // Lowercase f/i and any other lowercase letter are not aromatic atoms.
        if aromatic && !matches!(c, 'b' | 'c' | 'n' | 'o' | 'p' | 's') {
            return None;
        }
        Some((el, aromatic, 1))
    }

    /// Parses the inside of `[...]`; `self.pos` sits just past the '['.
    fn bracket_atom(&mut self, open: usize) -> Result<usize> {
        let rest = &self.text[self.pos..];
        let (element, aromatic, len) = ["Cl", "Br", "Si"]
            .iter()
            .find(|t| rest.starts_with(**t))
            .map(|t| (Element::from_symbol(t).unwrap(), false, 2))
            .or_else(|| {
                let c = rest.chars().next()?;
                let el = Element::from_symbol(&c.to_ascii_uppercase().to_string())?;
                let lower = c.is_ascii_lowercase();
                if lower && !matches!(c, 'b' | 'c' | 'n' | 'o' | 'p' | 's') {
                    return None;
                }
                Some((el, lower, 1))
            })
            .ok_or_else(|| self.err(self.pos, "unsupported element in bracket atom"))?;
        self.pos += len;

        let mut hcount = 0u8;
        if self.peek() == Some(b'H') && element != Element::H {
            self.pos += 1;
            hcount = 1;
            if let Some(c @ b'0'..=b'9') = self.peek() {
                hcount = c - b'0';
                self.pos += 1;
            }
        } else if element == Element::H {
            // [H] / [H+]; an H count on hydrogen itself is not meaningful.
            if self.peek() == Some(b'H') {
                return Err(self.err(self.pos, "H count on a hydrogen atom"));
            }
        }

        let mut charge = 0i32;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit: i32 = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            charge = unit;
            if let Some(c @ b'0'..=b'9') = self.peek() {
                charge = unit * (c - b'0') as i32;
                self.pos += 1;
            } else {
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
        }

        if self.peek() != Some(b']') {
            let pos = self.pos.min(self.text.len());
            return Err(self.err(pos, "expected ']' (stereo and isotopes are unsupported)"));
        }
        self.pos += 1;
        if !(-9..=9).contains(&charge) {
            return Err(self.err(open, "charge out of range"));
        }
        Ok(self.push_atom(open, element, aromatic, charge as i8, Some(hcount)))
    }

    fn push_atom(
        &mut self,
        at: usize,
        element: Element,
        aromatic: bool,
        charge: i8,
        bracket_h: Option<u8>,
    ) -> usize {
        self.atoms.push(Atom {
            element,
            charge,
            aromatic,
        });
        self.bracket_h.push(bracket_h);
        self.atom_pos.push(at);
        self.atoms.len() - 1
    }

    /// Bonds the freshly parsed atom to `prev` and makes it the new chain head.
    fn attach(&mut self, idx: usize) -> Result<()> {
        if let Some(p) = self.prev {
            let order = self.pending.take().unwrap_or_else(|| self.default_order(p, idx));
            self.add_bond(self.atom_pos[idx], p, idx, order)?;
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_bond(&mut self, at: usize, a: usize, b: usize, order: BondOrder) -> Result<()> {
        if a == b {
            return Err(self.err(at, "ring closure bonds an atom to itself"));
        }
        if self.bonds.iter().any(|x| (x.a, x.b) == (a.min(b), a.max(b))) {
            return Err(self.err(at, "duplicate bond between the same atoms"));
        }
        // A written aromatic bond marks its endpoints aromatic, mirroring the
        // treatment of aromatic bond codes in SDF input.
        if order == BondOrder::Aromatic {
            self.atoms[a].aromatic = true;
            self.atoms[b].aromatic = true;
        }
        self.bonds.push(Bond::new(a, b, order));
        Ok(())
    }

    fn ring(&mut self, at: usize, num: u32) -> Result<()> {
        let here = self
            .prev
            .ok_or_else(|| self.err(at, "ring closure before any atom"))?;
        let symbol = self.pending.take();
        match self.open_rings.remove(&num) {
            None => {
                self.open_rings.insert(num, (here, symbol));
                Ok(())
            }
            Some((there, opened)) => {
                let order = match (opened, symbol) {
                    (Some(x), Some(y)) if x != y => {
                        return Err(self.err(at, format!("ring closure {num} bond symbols disagree")))
                    }
                    (Some(x), _) | (_, Some(x)) => x,
                    (None, None) => self.default_order(there, here),
                };
                self.add_bond(at, there, here, order)
            }
        }
    }

    /// Appends explicit H atoms. Plain atoms fill to the smallest standard
    /// valence covering their written bonds (aromatic atoms keep one unit in
    /// reserve for the pi system); bracket atoms use their stated count.
    fn materialize_hydrogens(&mut self) -> Result<()> {
        let heavy = self.atoms.len();
        let mut units = vec![0u32; heavy];
        for b in &self.bonds {
            units[b.a] += b.order.valence_units();
            units[b.b] += b.order.valence_units();
        }
        for i in 0..heavy {
            let h = match self.bracket_h[i] {
                Some(n) => n as u32,
                None => {
                    let valences = self.atoms[i].element.valences();
                    let max = *valences.last().unwrap() as u32;
                    if units[i] > max {
                        return Err(self.err(
                            self.atom_pos[i],
                            format!(
                                "valence overflow on {}: {} bond units exceed {max}",
                                self.atoms[i].element.symbol(),
                                units[i]
                            ),
                        ));
                    }
                    let v = valences
                        .iter()
                        .map(|&v| v as u32)
                        .find(|&v| v >= units[i])
                        .unwrap();
                    if self.atoms[i].aromatic {
                        (v - units[i]).saturating_sub(1)
                    } else {
                        v - units[i]
                    }
                }
            };
            for _ in 0..h {
                self.atoms.push(Atom::new(Element::H));
                self.bracket_h.push(Some(0));
                self.bonds.push(Bond::new(i, self.atoms.len() - 1, BondOrder::Single));
            }
        }
        Ok(())
    }
}
