#!/usr/bin/env python3
"""Regenerate the FCIDUMP fixtures used by the Rust test suites.

Requires PySCF. Writes one FCIDUMP plus a JSON sidecar per molecule:

    python3 fixtures/generate_fixtures.py --out fixtures/
"""

import argparse
import json
import os

import numpy
import pyscf
from pyscf import ao2mo, fci, gto, scf
from pyscf.tools import fcidump

MOLECULES = [
    {
        "name": "lih_sto3g",
        "geometry": [["Li", 0.0, 0.0, 0.0], ["H", 0.0, 0.0, 1.595]],
        "basis": "sto-3g",
        "active": 6,
        "charge": 0,
        "multiplicity": 1,
    },
    {
        "name": "h2_ccpvdz_6orb",
        "geometry": [["H", 0.0, 0.0, 0.0], ["H", 0.0, 0.0, 0.741]],
        "basis": "cc-pvdz",
        "active": 6,
        "charge": 0,
        "multiplicity": 1,
    },
    {
        "name": "h3p_ccpvdz_6orb",
        # equilateral triangle, side 0.874 Angstrom
        "geometry": [
            ["H", 0.0, 0.0, 0.0],
            ["H", 0.874, 0.0, 0.0],
            ["H", 0.437, 0.874 * numpy.sqrt(3.0) / 2.0, 0.0],
        ],
        "basis": "cc-pvdz",
        "active": 6,
        "charge": 1,
        "multiplicity": 1,
    },
]


def generate_fixture(mol, out_dir):
    mol = gto.M(
        atom=[(a, (x, y, z)) for a, x, y, z in mol["geometry"]],
        basis=mol["basis"],
        charge=mol["charge"],
        spin=mol["multiplicity"] - 1,
        unit="Angstrom",
        symmetry=False,
        verbose=0,
    )
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    if not mf.converged:
        raise RuntimeError(f"SCF did not converge for {mol['name']}")

    nact = mol["active"]
    if nact > mf.mo_coeff.shape[1]:
        raise ValueError("active orbital count exceeds basis size")
    # keep the lowest `nact` canonical orbitals
    coeff = mf.mo_coeff[:, :nact]
    h1 = coeff.T @ mf.get_hcore() @ coeff
    eri = ao2mo.restore(1, ao2mo.full(mol, coeff), nact)
    nuc = mol.energy_nuc()
    nelec = mol.nelectron

    path = os.path.join(out_dir, mol["name"] + ".fcidump")
    fcidump.from_integrals(path, h1, eri, nact, nelec, nuc, 0, [1] * nact)

    nocc = nelec // 2
    e_hf = (
        nuc
        + 2.0 * numpy.einsum("ii", h1[:nocc, :nocc])
        + 2.0 * numpy.einsum("iijj", eri[:nocc, :nocc, :nocc, :nocc])
        - numpy.einsum("ijji", eri[:nocc, :nocc, :nocc, :nocc])
    )
    solver = fci.direct_spin1.FCI()
    solver.conv_tol = 1e-13
    energies, _ = solver.kernel(h1, eri, nact, (nocc, nocc), ecore=nuc, nroots=2)

    record = {
        "name": mol["name"],
        "hf_energy": float(e_hf),
        "scf_energy": float(mf.e_tot),
        "fci_energy": float(energies[0]),
        "fci_energies": [float(e) for e in energies],
        "geometry": mol["geometry"],
        "basis": mol["basis"],
        "active_orbitals": nact,
        "charge": mol["charge"],
        "package_version": pyscf.__version__,
    }
    with open(os.path.join(out_dir, mol["name"] + ".json"), "w") as fh:
        json.dump(record, fh, indent=2)
        fh.write("\n")
    return record


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="fixtures")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    for mol in MOLECULES:
        rec = generate_fixture(mol, args.out)
        print(f"{rec['name']}: E_HF={rec['hf_energy']:.10f} E_FCI={rec['fci_energy']:.10f}")


if __name__ == "__main__":
    main()
