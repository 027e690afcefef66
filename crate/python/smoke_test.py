"""Smoke test for the Python bindings.

Build the extension first, e.g. `maturin develop -m crates/py/Cargo.toml`, or
copy `target/release/libdefect_tower_py.so` to `defect_tower_py.so` on the path.
"""

import json
from fractions import Fraction

import defect_tower_py as dt


def main():
    x = dt.Series(2, {(1, 0): 1}, 8)
    y = dt.Series(2, {(0, 1): 1}, 8)
    s = x * y + y
    assert s.terms() == {(1, 1): 1, (0, 1): 1}
    assert s.partial("x").terms() == {(0, 1): 1}
    unit = dt.Series(3, {(0, 0): 1, (1, 0): 1}, 6)
    one = dt.Series(3, {(0, 0): 1}, 6)
    assert unit * unit.invert_unit() == one

    for p in (2, 3, 5):
        for e in (1, 2, 3):
            assert dt.bootstrap(p, e, 64).jac_exp == (p - 1) * e

    assert dt.predict("a", 2, 2, 3, 5) == (1, 1)
    assert dt.predict("a", 2, 1, 2, 3)[0] == 0
    assert dt.run_step("a", 2, 2, 3, 5).jac_exp == 1

    assert dt.is_independent_cut(0, 1, 2)
    assert not dt.is_independent_cut(-3, 7, 2)

    t = dt.Tower(p=2, steps=6)
    omega = [Fraction(a) for a in t.ledger("omega")]
    assert omega[12] == Fraction(63, 131072)
    assert t.distance_verdicts(5) == (True, True)
    cert = json.loads(t.certificate_json())
    assert cert["claim"].startswith("certified"), cert["claim"]
    assert all(c["holds"] for c in cert["checks"])
    print("smoke test passed:", len(cert["checks"]), "checks,", len(cert["sweep"]["entries"]), "swept rings")


if __name__ == "__main__":
    main()
