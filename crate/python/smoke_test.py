"""Smoke test for the squish Python extension.

Build and install the module first, e.g.

    pip install maturin
    maturin develop --manifest-path crates/python/Cargo.toml
    python3 python/smoke_test.py
"""

import json
import os
import sys

import squish

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIXTURES = os.path.join(ROOT, "fixtures")


def main():
    name = "lih_sto3g"
    table = squish.IntegralTable.read(os.path.join(FIXTURES, name + ".fcidump"))
    with open(os.path.join(FIXTURES, name + ".json")) as fh:
        ref = json.load(fh)
    print(table)

    assert abs(table.hf_energy() - ref["hf_energy"]) < 1e-8
    e_fci = table.fci_energies(1)[0]
    assert abs(e_fci - ref["fci_energy"]) < 1e-8

    trace = squish.run_squish(
        table, "squish_v", convergence="exact", delta=squish.CHEMICAL_ACCURACY,
        m0=2, growth=3.0, grow_every=1,
    )
    print(trace)
    assert trace.termination == "converged"
    last = trace.records[-1]
    assert last["err_exact"] < squish.CHEMICAL_ACCURACY
    assert last["e_v"] >= e_fci - 1e-9
    assert trace.to_csv().startswith("k,included_tuples,vvvv_tuples")

    assert squish.count_terms(6, 5) == (36, 1296, 671, 625)
    assert abs(squish.measurement_budget(2, 12, 0.01) - 130000 / 11) < 1e-9

    asci = squish.run_asci(table, [10, 50, 225])
    assert abs(asci[-1][2] - e_fci) < 1e-8

    points = squish.run_one_shot(table, [1, 5, 1000])
    assert abs(points[-1][2] - e_fci) < 1e-9

    try:
        squish.run_squish(table, "not_a_mode")
    except ValueError:
        pass
    else:
        raise AssertionError("bad mode accepted")

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
