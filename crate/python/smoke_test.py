"""Smoke test for the qbsde extension module.

Build and run from the repository root:

    cargo build --release -p qbsde-py --features extension-module
    cp target/release/libqbsde.so python/qbsde.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np

import qbsde


def cole_hopf(h, gamma=1.0, nodes=80):
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    mean = np.sum(w * np.exp(gamma * np.vectorize(h)(x))) / math.sqrt(2.0 * math.pi)
    return math.log(mean) / gamma


def main():
    f = qbsde.Driver("quadratic:gamma=1")
    tanh = qbsde.Terminal("tanh")
    assert f(0.0, [0.0], [2.0]) == [2.0]
    assert f.validate(budget=200)["pass"]

    grid = qbsde.solve(f, tanh, steps=100, half_width=6.0, dx=0.05)
    oracle = cole_hopf(math.tanh)
    assert abs(grid.y0 - oracle) < 2e-2, (grid.y0, oracle)
    assert len(grid.u(0)) == grid.nodes

    run = qbsde.kobylanski(f, tanh, steps=100, half_width=6.0, dx=0.05, paths=4000, schedule=[1.0, 4.0])
    report = run.report()
    assert all(level["sup_pass"] for level in report["levels"])
    check = run.martingale_test(f, points=5)
    assert check["pass"], check["flagged"]

    phi = qbsde.construct_subharmonic(f, 0.5, [0.1], [0.2], [0.7], sign=-1.0, eps=0.5)
    phi_y, phi_xy = phi.gradients(0.5, [0.1], [0.2])
    assert phi_y == [-1.0]
    assert phi.lf(f, 0.5, [0.1], [0.2], [0.7]) <= 0.5 * (1 + 1e-12)
    assert phi.is_subharmonic(f, seed=7)["verdict"] == "pass"
    assert phi.record()["sign"] == -1.0

    m = qbsde.majorize(0.3, 1.0, 2.0, 0.25)
    assert m["q"]["e0"] > 0.0

    unit = qbsde.Driver("zlinear:c=-1")
    solution = qbsde.unit_drift_test(unit, "unit_drift", steps=100, paths=20000, seed=5)
    impostor = qbsde.unit_drift_test(unit, "sign_flip", steps=100, paths=20000, seed=5)
    assert solution["pass"] and not impostor["pass"]

    rows = qbsde.coupling_sweep(f, tanh, rs=[0.0, 0.9, 1.0], steps=50, half_width=6.0, dx=0.05, paths=4000)
    assert rows[-1]["lhs"] == 0.0
    assert rows[0]["lhs"] > rows[1]["lhs"]

    try:
        qbsde.Driver("no-such-driver")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown driver accepted")

    print(f"smoke test passed: Y0 = {grid.y0:.6f} (Cole-Hopf {oracle:.6f})")


if __name__ == "__main__":
    main()
