#!/usr/bin/env python3
"""Generates the frozen conjugation corpus at data/conjugation_corpus.json.

Independent reference implementation: a small SMILES reader plus the
conjugation rule (a bond is conjugated iff it is aromatic or both endpoints
carry at least one pi bond, counting the bond itself) and connected-component
hyperedge extraction. Kept deliberately separate from the Rust code so the
two implementations check each other.

Run from the repository root:  python3 tools/gen_conjugation_corpus.py
"""

import json
import re
import sys
from pathlib import Path

VALENCES = {
    "B": [3], "C": [4], "N": [3, 5], "O": [2], "F": [1],
    "Si": [4], "P": [3, 5], "S": [2, 4, 6], "Cl": [1], "Br": [1], "I": [1],
    "H": [1],
}
AROMATIC_OK = {"b", "c", "n", "o", "p", "s"}
BOND_UNITS = {1: 1, 2: 2, 3: 3, "ar": 1}


class Atom:
    def __init__(self, symbol, aromatic, charge=0, bracket_h=None):
        self.symbol = symbol          # canonical capitalization, e.g. "Cl"
        self.aromatic = aromatic
        self.charge = charge
        self.bracket_h = bracket_h    # explicit H count, None for organic subset


def parse_smiles(text):
    atoms, bonds = [], []            # bonds: [a, b, order]
    prev = None
    pending = None                   # explicitly written bond order
    stack = []
    rings = {}                       # ring number -> (atom index, order or None)
    i = 0

    def add_bond(a, b, order):
        if order is None:
            order = "ar" if atoms[a].aromatic and atoms[b].aromatic else 1
        if order == "ar":
            atoms[a].aromatic = True
            atoms[b].aromatic = True
        bonds.append([a, b, order])

    def new_atom(atom):
        nonlocal prev, pending
        atoms.append(atom)
        idx = len(atoms) - 1
        if prev is not None:
            add_bond(prev, idx, pending)
        pending = None
        prev = idx
        return idx

    while i < len(text):
        ch = text[i]
        if ch in "-=#:":
            pending = {"-": 1, "=": 2, "#": 3, ":": "ar"}[ch]
            i += 1
        elif ch == "(":
            stack.append(prev)
            i += 1
        elif ch == ")":
            prev = stack.pop()
            i += 1
        elif ch == "[":
            m = re.match(
                r"\[(Cl|Br|Si|[BCNOPSFI]|[bcnops])(H(\d)?)?(\+\+|--|[+-]\d?)?\]",
                text[i:],
            )
            if not m:
                raise ValueError(f"bad bracket atom at {i} in {text!r}")
            sym, aromatic = m.group(1), m.group(1).islower()
            h = 0
            if m.group(2):
                h = int(m.group(3)) if m.group(3) else 1
            charge = 0
            if m.group(4):
                c = m.group(4)
                if c in ("++", "--"):
                    charge = 2 if c == "++" else -2
                else:
                    sign = 1 if c[0] == "+" else -1
                    charge = sign * (int(c[1]) if len(c) > 1 else 1)
            new_atom(Atom(sym.capitalize(), aromatic, charge, h))
            i += m.end()
        elif text[i : i + 2] in ("Cl", "Br"):
            new_atom(Atom(text[i : i + 2], False))
            i += 2
        elif ch in "BCNOPSFI":
            new_atom(Atom(ch, False))
            i += 1
        elif ch in AROMATIC_OK:
            new_atom(Atom(ch.upper(), True))
            i += 1
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                num = int(text[i + 1 : i + 3])
                i += 3
            else:
                num = int(ch)
                i += 1
            if num in rings:
                other, other_order = rings.pop(num)
                order = pending if pending is not None else other_order
                if other_order is not None and pending is not None and other_order != pending:
                    raise ValueError("ring bond order mismatch")
                add_bond(other, prev, order)
            else:
                rings[num] = (prev, pending)
            pending = None
        else:
            raise ValueError(f"unsupported token {ch!r} at {i} in {text!r}")
    if rings:
        raise ValueError("unclosed ring")
    if pending is not None:
        raise ValueError("dangling bond")

    # Implicit hydrogens: smallest standard valence that fits the bond units;
    # aromatic atoms reserve one slot for the delocalized system.
    n_heavy = len(atoms)
    units = [0] * n_heavy
    for a, b, order in bonds:
        units[a] += BOND_UNITS[order]
        units[b] += BOND_UNITS[order]
    for idx in range(n_heavy):
        atom = atoms[idx]
        if atom.bracket_h is not None:
            h = atom.bracket_h
        else:
            v = next((v for v in VALENCES[atom.symbol] if v >= units[idx]), None)
            if v is None:
                raise ValueError(f"valence overflow on {atom.symbol}")
            h = v - units[idx]
            if atom.aromatic:
                h = max(0, h - 1)
        for _ in range(h):
            atoms.append(Atom("H", False))
            bonds.append([idx, len(atoms) - 1, 1])
    return atoms, bonds


def conjugated_flags(atoms, bonds):
    has_pi = [False] * len(atoms)
    for a, b, order in bonds:
        if order in (2, 3, "ar"):
            has_pi[a] = True
            has_pi[b] = True
    return [has_pi[a] and has_pi[b] for a, b, _ in bonds]


def hyperedges(atoms, bonds, flags):
    adj = {}
    for (a, b, _), conj in zip(bonds, flags):
        if conj:
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
    seen, edges = set(), []
    for start in sorted(adj):
        if start in seen:
            continue
        comp, queue = set(), [start]
        while queue:
            v = queue.pop()
            if v in comp:
                continue
            comp.add(v)
            queue.extend(adj[v] - comp)
        seen |= comp
        edges.append(sorted(comp))
    edges.sort()
    return edges


SMILES = [
    # alkanes and saturated rings
    "C", "CC", "CCC", "CC(C)C", "CC(C)(C)C", "C1CCCCC1", "C1CC1",
    # alkenes, dienes, alkynes, cumulenes
    "C=C", "CC=C", "C=CC=C", "C=CCC=C", "CC=CC=CC", "C=C(C)C=C",
    "C#C", "CC#CC", "CC#N", "C=C=C", "C1=CC=CC1", "C1=CCC=C1",
    # aromatics, heteroaromatics, fused and linked rings
    "c1ccccc1", "Cc1ccccc1", "c1ccncc1", "c1ccoc1", "c1ccsc1",
    "c1cc[nH]c1", "c1ccc2ccccc2c1", "c1ccccc1c1ccccc1",
    "c1ccccc1Cc1ccccc1", "C1=CC=CC=C1", "C%12=CC=CC=C%12",
    "c1ccccc1C=C", "Clc1ccccc1", "Cc1ccc(C)cc1",
    # carbonyls, acids, esters, amides
    "C=O", "CC=O", "CC(=O)C", "CC(=O)O", "CC(=O)OC", "NC=O",
    "O=C=O", "C=CC=O", "C=CC(=O)O", "O=C1C=CC(=O)C=C1",
    # charged and heteroatom-rich
    "[NH4+]", "[O-]C(=O)C", "[N+](=O)([O-])c1ccccc1", "CS(=O)(=O)C",
    "C[N+](C)(C)C", "OCC", "COC",
]


def main():
    root = Path(__file__).resolve().parent.parent
    out = root / "data" / "conjugation_corpus.json"
    entries = []
    for smiles in SMILES:
        atoms, bonds = parse_smiles(smiles)
        flags = conjugated_flags(atoms, bonds)
        entry = {
            "smiles": smiles,
            "num_atoms_with_h": len(atoms),
            "bonds": [
                [min(a, b), max(a, b), bool(conj)]
                for (a, b, _), conj in zip(bonds, flags)
            ],
            "hyperedges": hyperedges(atoms, bonds, flags),
        }
        entries.append(entry)
    assert len(entries) == 50, f"corpus has {len(entries)} entries, want 50"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(entries, indent=1) + "\n")
    print(f"wrote {len(entries)} entries to {out}")


if __name__ == "__main__":
    sys.exit(main())
