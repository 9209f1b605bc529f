//! Molecule representation and file I/O (SDF V2000, XYZ, a SMILES subset,
//! targets CSV).
//!
//! Hydrogens are always explicit: SMILES parsing materializes implicit H as
//! real atoms, so every downstream consumer sees one consistent graph.

mod dataset;
mod sdf;
mod smiles;
mod xyz;

pub use dataset::{load_dataset, load_molecules, split_dataset, DatasetRecord, LoadedDataset};
pub use sdf::{parse_sdf, read_sdf_file, write_sdf, write_sdf_records};
pub use smiles::parse_smiles;
pub use xyz::parse_xyz;

/// The supported elements, in one-hot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Element {
    H,
    B,
    C,
    N,
    O,
    F,
    Si,
    P,
    S,
    Cl,
    Br,
    I,
}

pub const ELEMENT_COUNT: usize = 12;

impl Element {
    pub fn from_symbol(sym: &str) -> Option<Element> {
        Some(match sym {
            "H" => Element::H,
            "B" => Element::B,
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "F" => Element::F,
            "Si" => Element::Si,
            "P" => Element::P,
            "S" => Element::S,
            "Cl" => Element::Cl,
            "Br" => Element::Br,
            "I" => Element::I,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::Si => "Si",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    /// Position in the one-hot feature block.
    pub fn index(self) -> usize {
        match self {
            Element::H => 0,
            Element::B => 1,
            Element::C => 2,
            Element::N => 3,
            Element::O => 4,
            Element::F => 5,
            Element::Si => 6,
            Element::P => 7,
            Element::S => 8,
            Element::Cl => 9,
            Element::Br => 10,
            Element::I => 11,
        }
    }

    /// Standard valences for implicit-hydrogen filling, smallest first.
    pub fn valences(self) -> &'static [u32] {
        match self {
            Element::H => &[1],
            Element::B => &[3],
            Element::C => &[4],
            Element::N => &[3, 5],
            Element::O => &[2],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
            Element::Si => &[4],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Double, triple, and aromatic bonds carry pi electrons.
    pub fn is_multiple(self) -> bool {
        !matches!(self, BondOrder::Single)
    }

    /// Integer contribution to an atom's valence (aromatic counts 1; an
    /// aromatic atom reserves one extra slot for the delocalized system).
    pub fn valence_units(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn sdf_code(self) -> u32 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    pub fn from_sdf_code(code: u32) -> Option<BondOrder> {
        Some(match code {
            1 => BondOrder::Single,
            2 => BondOrder::Double,
            3 => BondOrder::Triple,
            4 => BondOrder::Aromatic,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    pub aromatic: bool,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom {
            element,
            charge: 0,
            aromatic: false,
        }
    }
}

/// Undirected bond between atom indices `a < b` is not enforced; endpoints
/// are stored as parsed. `conjugated` is false until perception runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub conjugated: bool,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Bond {
        Bond {
            a,
            b,
            order,
            conjugated: false,
        }
    }

    pub fn other(&self, atom: usize) -> usize {
        if atom == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Molecule {
    pub name: String,
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// Angstrom positions, one row per atom, when the source had geometry.
    pub coords: Option<Vec<[f64; 3]>>,
}

impl Molecule {
    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Number of bonds touching atom `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.bonds.iter().filter(|b| b.a == i || b.b == i).count()
    }

    /// Indices of bonds touching each atom, in bond order.
    pub fn incident_bonds(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.atoms.len()];
        for (k, b) in self.bonds.iter().enumerate() {
            out[b.a].push(k);
            out[b.b].push(k);
        }
        out
    }

    /// Relabels atoms: old atom `i` becomes new atom `perm[i]`. Bond list
    /// order is preserved; only endpoints are rewritten.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length mismatch");
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in perm {
            assert!(p < n && !seen[p], "not a permutation: {perm:?}");
            seen[p] = true;
        }
        let mut atoms = vec![Atom::new(Element::H); n];
        for (i, a) in self.atoms.iter().enumerate() {
            atoms[perm[i]] = *a;
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
                conjugated: b.conjugated,
            })
            .collect();
        let coords = self.coords.as_ref().map(|c| {
            let mut out = vec![[0.0; 3]; n];
            for (i, row) in c.iter().enumerate() {
                out[perm[i]] = *row;
            }
            out
        });
        Molecule {
            name: self.name.clone(),
            atoms,
            bonds,
            coords,
        }
    }

    /// Structural sanity: bond endpoints in range and distinct, coords row
    /// count matching, aromatic bonds between aromatic atoms.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.atoms.len();
        for (k, b) in self.bonds.iter().enumerate() {
            if b.a >= n || b.b >= n {
                return Err(format!("bond {k} endpoint out of range ({}-{})", b.a, b.b));
            }
            if b.a == b.b {
                return Err(format!("bond {k} is a self-loop on atom {}", b.a));
            }
            if b.order == BondOrder::Aromatic
                && !(self.atoms[b.a].aromatic && self.atoms[b.b].aromatic)
            {
                return Err(format!(
                    "bond {k} is aromatic but atoms {}-{} are not flagged aromatic",
                    b.a, b.b
                ));
            }
        }
        if let Some(c) = &self.coords {
            if c.len() != n {
                return Err(format!("{} coord rows for {} atoms", c.len(), n));
            }
        }
        Ok(())
    }
}
