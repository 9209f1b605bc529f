#!/usr/bin/env python3
"""Builds the bundled sample dataset: data/molecules.sdf + data/targets.csv.

1000 random small organics (4-9 heavy atoms, explicit hydrogens, <= 29 atoms
total) with spring-embedded 3D coordinates and a smooth gap-like target that
depends on both composition and geometry. Deterministic for a fixed seed.

Run from the repository root:  python3 tools/make_dataset.py
"""

import numpy as np
from pathlib import Path

MAX_VALENCE = {"C": 4, "N": 3, "O": 2, "S": 2}
ELEMENTS = ["C", "N", "O", "S"]
ELEMENT_P = [0.72, 0.08, 0.15, 0.05]
BOND_LEN = {1: 1.52, 2: 1.33, 3: 1.20}
N_MOLECULES = 1000
SEED = 2024


def random_molecule(rng):
    """Random connected graph: tree + optional ring, some multiple bonds,
    explicit hydrogens filling each atom to its full valence."""
    n_heavy = int(rng.integers(4, 10))
    symbols = list(rng.choice(ELEMENTS, size=n_heavy, p=ELEMENT_P))
    used = [0] * n_heavy
    bonds = {}  # (a, b) -> order

    # spanning tree over atoms with free valence
    for k in range(1, n_heavy):
        open_atoms = [j for j in range(k) if used[j] < MAX_VALENCE[symbols[j]]]
        if not open_atoms:
            symbols[k - 1] = "C"  # widen a jammed site and retry the pick
            open_atoms = [j for j in range(k) if used[j] < MAX_VALENCE[symbols[j]]]
        parent = int(rng.choice(open_atoms))
        bonds[(parent, k)] = 1
        used[parent] += 1
        used[k] += 1

    # one ring closure between distant atoms, sometimes
    if rng.random() < 0.35:
        candidates = [
            (a, b)
            for a in range(n_heavy)
            for b in range(a + 2, n_heavy)
            if (a, b) not in bonds
            and used[a] < MAX_VALENCE[symbols[a]]
            and used[b] < MAX_VALENCE[symbols[b]]
        ]
        if candidates:
            a, b = candidates[int(rng.integers(len(candidates)))]
            bonds[(a, b)] = 1
            used[a] += 1
            used[b] += 1

    # upgrade some bonds; adjacent upgrades produce conjugated systems
    for (a, b) in list(bonds):
        spare_a = MAX_VALENCE[symbols[a]] - used[a]
        spare_b = MAX_VALENCE[symbols[b]] - used[b]
        r = rng.random()
        if r < 0.06 and spare_a >= 2 and spare_b >= 2:
            bonds[(a, b)] = 3
            used[a] += 2
            used[b] += 2
        elif r < 0.40 and spare_a >= 1 and spare_b >= 1:
            bonds[(a, b)] = 2
            used[a] += 1
            used[b] += 1

    # explicit hydrogens
    atoms = list(symbols)
    bond_list = [(a, b, o) for (a, b), o in bonds.items()]
    for j in range(n_heavy):
        for _ in range(MAX_VALENCE[symbols[j]] - used[j]):
            atoms.append("H")
            bond_list.append((j, len(atoms) - 1, 1))
    return atoms, bond_list


def embed(atoms, bonds, rng):
    """Spring embedding: bonded pairs pull toward their rest length, all
    pairs repel at short range. Crude but gives sane, well-separated 3D."""
    n = len(atoms)
    pos = rng.normal(scale=2.0, size=(n, 3))
    rest = np.zeros((n, n))
    for a, b, order in bonds:
        rest[a, b] = rest[b, a] = BOND_LEN[order] + (0.12 if "H" in (atoms[a], atoms[b]) else 0.0)
    bonded = rest > 0
    for it in range(300):
        delta = pos[:, None, :] - pos[None, :, :]
        dist = np.linalg.norm(delta, axis=-1)
        np.fill_diagonal(dist, 1.0)
        unit = delta / dist[..., None]
        force = np.zeros_like(pos)
        # springs
        stretch = np.where(bonded, dist - rest, 0.0)
        force -= (stretch[..., None] * unit).sum(axis=1)
        # short-range repulsion between non-bonded pairs
        rep = np.where(~bonded & (dist < 2.2), (2.2 - dist) * 0.35, 0.0)
        np.fill_diagonal(rep, 0.0)
        force += (rep[..., None] * unit).sum(axis=1)
        step = 0.25 if it < 150 else 0.08
        pos += step * force
    return pos - pos.mean(axis=0)


def conjugated_count(atoms, bonds):
    has_pi = [False] * len(atoms)
    for a, b, order in bonds:
        if order >= 2:
            has_pi[a] = True
            has_pi[b] = True
    return sum(1 for a, b, _ in bonds if has_pi[a] and has_pi[b])


def gap_target(atoms, bonds, pos):
    """Smooth, noiseless function of composition and shape (gap-like)."""
    n = len(atoms)
    counts = {s: atoms.count(s) for s in set(atoms)}
    rg = float(np.sqrt((pos ** 2).sum(axis=1).mean()))
    n_conj = conjugated_count(atoms, bonds)
    gap = (
        4.1
        - 0.38 * n_conj
        + 0.21 * counts.get("O", 0)
        + 0.12 * counts.get("N", 0)
        - 0.30 * counts.get("S", 0)
        - 0.035 * n
        + 0.9 * np.exp(-rg / 2.0)
        + 0.45 * np.cos(0.8 * rg)
    )
    return float(gap)


def sdf_record(name, atoms, bonds, pos):
    lines = [name, "  equihg", ""]
    lines.append(f"{len(atoms):3d}{len(bonds):3d}  0  0  0  0  0  0  0  0999 V2000")
    for sym, (x, y, z) in zip(atoms, pos):
        lines.append(f"{x:10.4f}{y:10.4f}{z:10.4f} {sym:<3} 0  0  0  0  0  0  0  0  0  0  0  0")
    for a, b, order in bonds:
        lines.append(f"{a + 1:3d}{b + 1:3d}{order:3d}  0")
    lines.append("M  END")
    lines.append("$$$$")
    return "\n".join(lines) + "\n"


def main():
    rng = np.random.default_rng(SEED)
    root = Path(__file__).resolve().parent.parent
    data = root / "data"
    data.mkdir(exist_ok=True)

    records = []
    rows = ["name,gap"]
    for i in range(N_MOLECULES):
        name = f"mol{i:06d}"
        atoms, bonds = random_molecule(rng)
        assert len(atoms) <= 29, f"{name} has {len(atoms)} atoms"
        pos = embed(atoms, bonds, rng)
        assert np.isfinite(pos).all(), f"{name} embedding diverged"
        gap = gap_target(atoms, bonds, pos)
        records.append(sdf_record(name, atoms, bonds, pos))
        rows.append(f"{name},{gap:.10f}")

    (data / "molecules.sdf").write_text("".join(records))
    (data / "targets.csv").write_text("\n".join(rows) + "\n")
    sizes = [r.count("\n") for r in records]
    print(f"wrote {N_MOLECULES} molecules ({min(sizes)}-{max(sizes)} SDF lines) to {data}")


if __name__ == "__main__":
    main()
