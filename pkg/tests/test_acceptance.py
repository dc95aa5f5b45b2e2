"""Acceptance suite: every stated property and benchmark table at its
contractual tolerance, one printed pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s``.  The convergence
sweeps dominate the runtime (a few minutes: the finest resolution takes
640,000 explicit steps on ~800 interior nodes).
"""
import time

import numpy as np
import pytest

from qnldiff.cli import main
from qnldiff.dynamics import TimeStepper, manufactured_problem, run
from qnldiff.energy import (energy_delta, energy_gr, energy_qnl,
                            first_variation_oracle, quadratic_form)
from qnldiff.experiments import (_smooth_test_functions, build_case_operator,
                                 observed_orders, run_manufactured_case,
                                 singular_comparison)
from qnldiff.grid import GridField, build_grid, sample
from qnldiff.kernels import get_kernel
from qnldiff.operators import (apply, assemble_nonlocal, assemble_qnl,
                               smallest_eigenvalue, symmetry_defect)

RESOLUTIONS = (50, 100, 200, 400)

TABLE_LINF = {
    "A": [6.132e-2, 3.018e-2, 1.506e-2, 7.556e-3],
    "B": [2.506e-2, 1.259e-2, 6.340e-3, 3.192e-3],
    "C": [3.720e-2, 1.856e-2, 9.320e-3, 4.687e-3],
}
TABLE_ENERGY = {
    "A": [2.820e-1, 2.065e-1, 1.486e-1, 1.060e-1],
    "B2": [2.679e-1, 1.983e-1, 1.434e-1, 1.025e-1],
}
TABLE_INTERIOR = {
    "A": [2.920e-2, 1.383e-2, 6.716e-3, 3.063e-3],
    "B2": [1.779e-2, 8.629e-3, 4.247e-3, 2.106e-3],
}
CASE_HORIZONS = {"A": (6, 2), "B": (3, 1), "C": (4, 2), "B2": (4, 2)}

EXPERIMENT_GRIDS = [(n, r1, r2) for (r1, r2) in ((6, 2), (3, 1), (4, 2))
                    for n in RESOLUTIONS] + [(200, 5, 1)]


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="session")
def sweeps():
    """Error norms for every case and resolution (shared by criteria 1-3)."""
    out = {}
    for case, kinds in (("A", ("linf", "energy", "interior")),
                        ("B", ("linf",)), ("C", ("linf",)),
                        ("B2", ("energy", "interior"))):
        r1, r2 = CASE_HORIZONS[case]
        out[case] = {n: run_manufactured_case(n, r1, r2, kinds=kinds)
                     for n in RESOLUTIONS}
    return out


def _orders(case_errs, kind):
    errs = [case_errs[n][kind] for n in RESOLUTIONS]
    hs = [1.0 / n for n in RESOLUTIONS]
    return errs, observed_orders(hs, errs)[1:]


def test_criterion_01_linf_tables(sweeps):
    t0 = time.time()
    ok = True
    details = []
    for case in ("A", "B", "C"):
        errs, orders = _orders(sweeps[case], "linf")
        for e, ref in zip(errs, TABLE_LINF[case]):
            ok &= abs(e - ref) <= 0.25 * ref
        ok &= all(abs(o - 1.0) <= 0.1 for o in orders)
        details.append(f"{case}: " + " ".join(f"{e:.3e}" for e in errs))
    _report(1, ok, f"sup-norm tables {'; '.join(details)} "
                   f"(sweep reused, wall {time.time() - t0:.0f}s)")


def test_criterion_02_energy_tables(sweeps):
    ok = True
    details = []
    for case in ("A", "B2"):
        errs, orders = _orders(sweeps[case], "energy")
        for e, ref in zip(errs, TABLE_ENERGY[case]):
            ok &= abs(e - ref) <= 0.25 * ref
        ok &= all(0.43 <= o <= 0.52 for o in orders)
        details.append(f"{case}: orders " + "/".join(f"{o:.2f}" for o in orders))
    _report(2, ok, "energy-norm tables within 25%, " + "; ".join(details))


def test_criterion_03_interior_energy_tables(sweeps):
    ok = True
    details = []
    for case in ("A", "B2"):
        errs, orders = _orders(sweeps[case], "interior")
        for e, ref in zip(errs, TABLE_INTERIOR[case]):
            ok &= abs(e - ref) <= 0.25 * ref
        ok &= all(abs(o - 1.0) <= 0.15 for o in orders)
        details.append(f"{case}: orders " + "/".join(f"{o:.2f}" for o in orders))
    _report(3, ok, "interior energy tables within 25%, " + "; ".join(details))


def test_criterion_04_patch_test():
    t0 = time.time()
    rng = np.random.default_rng(2)
    worst = 0.0
    for case in ("A", "B", "C"):
        r1, r2 = CASE_HORIZONS[case]
        g, op = build_case_operator(50, r1, r2, "2-over-s")
        for _ in range(20):
            F, u0 = rng.normal(size=2)
            aff = GridField(g, F * g.coords() + u0)
            resid = np.abs(apply(op, aff).values).max()
            worst = max(worst, resid * g.h**2 / (abs(F) + abs(u0)))
    elapsed = time.time() - t0
    _report(4, worst <= 1e-12 and elapsed < 1.0,
            f"affine residual {worst:.2e} <= 1e-12 (x (|F|+|u0|)/h^2), "
            f"{elapsed:.2f}s")


def test_criterion_05_symmetry_all_grids():
    worst = 0.0
    base = get_kernel("2-over-s")
    for (n, r1, r2) in EXPERIMENT_GRIDS:
        g = build_grid(n, r1, r2)
        op = assemble_qnl(g, base.scaled(g.delta1), base.scaled(g.delta2))
        worst = max(worst, symmetry_defect(op))
    _report(5, worst == 0.0, f"max |A - A^T| = {worst} over "
                             f"{len(EXPERIMENT_GRIDS)} grids (bit exact)")


def test_criterion_06_stability_dominance():
    rng = np.random.default_rng(31)
    base = get_kernel("2-over-s")
    worst = np.inf
    for case in ("A", "B", "C"):
        r1, r2 = CASE_HORIZONS[case]
        g, op = build_case_operator(50, r1, r2, "2-over-s")
        wide = assemble_nonlocal(g, r1, base.scaled(g.delta1))
        for _ in range(100):
            v = rng.standard_normal(g.n_nodes)
            v[g.constrained_mask()] = 0.0
            gap = quadratic_form(v, op) - quadratic_form(v, wide)
            worst = min(worst, gap)
    ok_disc = worst >= -1e-10
    ok_cont = True
    worst_margin = np.inf
    for i in range(20):
        a, b, c = rng.uniform(0.5, 2), rng.uniform(1, 6), rng.uniform(0, np.pi)

        def u(x, a=a, b=b, c=c):
            return np.where(np.abs(x) < 1,
                            a * (1 - x**2) ** 3 * np.sin(b * x + c), 0.0)

        eq = energy_qnl(u, 0.12, 3, cells=128)
        e1 = energy_delta(u, 0.12, cells=128)
        slack = 3 * (eq.error_estimate + e1.error_estimate) + 1e-12
        margin = eq.value - e1.value + slack
        worst_margin = min(worst_margin, margin)
        ok_cont &= margin >= 0.0
    _report(6, ok_disc and ok_cont,
            f"discrete form gap >= {worst:.2e} (tol -1e-10); continuous "
            f"margin >= {worst_margin:.2e} over 20 smooth fields")


def test_criterion_07_l2_stability_eigenvalues():
    base = get_kernel("2-over-s")
    lam_min = np.inf
    for (n, r1, r2) in EXPERIMENT_GRIDS:
        g = build_grid(n, r1, r2)
        op = assemble_qnl(g, base.scaled(g.delta1), base.scaled(g.delta2))
        lam, resid = smallest_eigenvalue(op, tol=1e-8)
        lam_min = min(lam_min, lam)
        if not (lam > 0.0 and resid <= 1e-8 * max(1.0, lam)):
            _report(7, False, f"grid (n={n}, r1={r1}, r2={r2}): lam={lam:.3e}")
    _report(7, lam_min > 0.0,
            f"smallest eigenvalue of -A_qnl >= {lam_min:.4e} over all grids")


def test_criterion_08_reconstruction_equivalence():
    worst_gap, worst_tol = 0.0, 1.0
    for M in (2, 3, 5):
        delta1 = 0.1 * M
        for u in _smooth_test_functions():
            gr = energy_gr(u, delta1, M, cells=256)
            d2 = energy_delta(u, delta1 / M, cells=256)
            gap = abs(gr.value - d2.value)
            tol = max(1e-8, 3 * (gr.error_estimate + d2.error_estimate))
            if gap / tol > worst_gap / worst_tol:
                worst_gap, worst_tol = gap, tol
    _report(8, worst_gap <= worst_tol,
            f"reconstruction vs short-horizon energy: worst gap "
            f"{worst_gap:.2e} <= tol {worst_tol:.2e} (5 functions, M in 2,3,5)")


def test_criterion_09_first_variation_duality():
    g, op = build_case_operator(50, 6, 2, "2-over-s")
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(3):
        u = GridField(g, np.sin(2.3 * g.coords())
                      + 0.3 * rng.standard_normal(g.n_nodes)).constrained()
        oracle = first_variation_oracle(u, op, eps=1e-5).values[g.interior]
        direct = apply(op, u).values[g.interior]
        worst = max(worst, np.abs(oracle - direct).max()
                    / (np.abs(direct).max() + 1e-8))
    _report(9, worst <= 1e-6,
            f"energy first variation vs operator: rel error {worst:.2e} <= 1e-6")


def test_criterion_10_maximum_principle():
    ok = True
    details = []
    for case in ("A", "B", "C"):
        r1, r2 = CASE_HORIZONS[case]
        g, op = build_case_operator(50, r1, r2, "2-over-s")
        u0 = sample(lambda x: x * x * (1 - x * x), g).constrained()
        rec = run(u0, TimeStepper(op=op, t_final=1.0, kappa_cfl=0.25))
        up = rec.running_max - rec.initial_max
        dn = min(0.0, rec.initial_min) - rec.running_min
        ok &= up <= 1e-12 and dn <= 1e-12
        details.append(f"{case}: overshoot {max(up, dn):.1e}")
    _report(10, ok, "source-free extrema bounded; " + "; ".join(details))


def test_criterion_11_m1_reduction():
    g = build_grid(50, 4, 4)
    k = get_kernel("2-over-s").scaled(g.delta1)
    q = assemble_qnl(g, k, k)
    nl = assemble_nonlocal(g, 4, k)
    scale = np.abs(nl.dense()).max()
    gap = float(np.abs(q.dense() - nl.dense()).max()) / scale
    _report(11, gap <= 1e-14,
            f"M=1 coupling equals single-horizon operator: rel gap {gap:.2e}")


def test_criterion_12_singular_comparison():
    t0 = time.time()
    cmp = singular_comparison(n_half=200)
    elapsed = time.time() - t0
    ok = cmp.gap_qnl_nonlocal < cmp.gap_local_nonlocal and elapsed < 60.0
    _report(12, ok,
            f"|qnl - nonlocal| = {cmp.gap_qnl_nonlocal:.3e} < "
            f"|local - nonlocal| = {cmp.gap_local_nonlocal:.3e} "
            f"({elapsed:.0f}s)")


def test_criterion_13_deterministic_reports(tmp_path):
    args = ["converge", "--case", "A", "--resolutions", "50,100",
            "--errors", "linf,energy,interior"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    same = a.read_bytes() == b.read_bytes()
    _report(13, same, "repeated converge runs byte-identical: "
                      f"{a.stat().st_size} bytes")
