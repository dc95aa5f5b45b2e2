"""Convergence studies, error norms, the singular-datum comparison, and
the property-check suite behind the ``check`` CLI subcommand.

Error conventions (chosen to reproduce the published benchmark tables):

* ``linf`` -- running sup over all time steps of the interior sup-norm
  difference against the local limiting solution.  The sup is attained
  during the early boundary-layer transient, which makes the values
  robust to the interface treatment.
* ``energy`` -- max over sampled times of the square root of the
  operator's own quadratic form applied to the constrained error
  (both fields honouring the volumetric constraint, as membership in
  the coupled energy space requires).
* ``interior`` -- the same form with the row window restricted to
  [-1/2, 1/2], which removes the boundary layers and restores first
  order.

Energy norms are sampled every max(1, steps // 200) steps plus the
initial and final states.
"""
from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dynamics import TimeStepper, manufactured_problem, run
from .energy import (discrete_energy, energy_delta, energy_gr, energy_qnl,
                     first_variation_oracle, quadratic_form)
from .exceptions import ConfigurationError
from .grid import Grid1D, GridField, build_grid, sample
from .kernels import get_kernel
from .operators import (apply, assemble_local, assemble_nonlocal,
                        assemble_qnl, smallest_eigenvalue, symmetry_defect)

CASES = {"A": (6, 2), "B": (3, 1), "C": (4, 2), "B2": (4, 2)}
ERROR_KINDS = ("linf", "energy", "interior")
SNAPSHOT_DIVISOR = 200


@dataclass(frozen=True)
class StudyConfig:
    case: str
    resolutions: tuple[int, ...] = (50, 100, 200, 400)
    t_final: float = 1.0
    kappa_cfl: float = 0.25
    error_kinds: tuple[str, ...] = ERROR_KINDS
    kernel: str = "2-over-s"

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigurationError(
                f"unknown case {self.case!r}; choose from {sorted(CASES)}")
        res = self.resolutions
        if any(b <= a for a, b in zip(res, res[1:])):
            raise ConfigurationError("resolutions must be strictly increasing")
        if any(b % a for a, b in zip(res, res[1:])):
            raise ConfigurationError(
                "resolutions must be nested (each dividing the next)")
        bad = set(self.error_kinds) - set(ERROR_KINDS)
        if bad:
            raise ConfigurationError(f"unknown error kinds {sorted(bad)}")

    @property
    def horizons(self) -> tuple[int, int]:
        return CASES[self.case]

    def config_hash(self) -> str:
        blob = json.dumps(
            {"case": self.case, "resolutions": self.resolutions,
             "t_final": self.t_final, "kappa": self.kappa_cfl,
             "errors": self.error_kinds, "kernel": self.kernel},
            sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class ErrorReport:
    case: str
    rows: list[dict]
    metadata: dict


def build_case_operator(n_half: int, r1: int, r2: int, kernel_name: str):
    grid = build_grid(n_half, r1, r2)
    base = get_kernel(kernel_name)
    k1 = base.scaled(grid.delta1)
    k2 = base.scaled(grid.delta2)
    return grid, assemble_qnl(grid, k1, k2)


def error_linf(u: GridField, exact: Callable, t: float) -> float:
    """Sup over interior nodes of |u_i - exact(x_i, t)|."""
    g = u.grid
    return float(np.abs(u.values[g.interior]
                        - exact(g.interior_coords(), t)).max())


def energy_error_norm(u: GridField, exact: Callable, t: float, op,
                      window: tuple[float, float] | None = None) -> float:
    """sqrt(b(e, e)) for the constrained error e = u - exact(., t), with
    both fields zero on the volume-constraint region and the form's
    x-window optionally restricted (e.g. (-0.5, 0.5))."""
    g = u.grid
    coords = g.coords()
    e = u.values - np.where(g.constrained_mask(), 0.0, exact(coords, t))
    mask = None
    if window is not None:
        mask = (coords >= window[0] - 1e-12) & (coords <= window[1] + 1e-12)
    return float(np.sqrt(quadratic_form(e, op, mask=mask)))


def _error_tracker(grid: Grid1D, op, exact: Callable, kinds: Sequence[str],
                   n_steps: int):
    """Observer accumulating the requested error norms along a run."""
    cadence = max(1, n_steps // SNAPSHOT_DIVISOR)
    sup = {k: 0.0 for k in kinds}

    def observe(u: GridField, t: float, k: int):
        if "linf" in sup:
            sup["linf"] = max(sup["linf"], error_linf(u, exact, t))
        if ("energy" in sup or "interior" in sup) and (
                k % cadence == 0 or k == n_steps):
            if "energy" in sup:
                sup["energy"] = max(sup["energy"],
                                    energy_error_norm(u, exact, t, op))
            if "interior" in sup:
                sup["interior"] = max(
                    sup["interior"],
                    energy_error_norm(u, exact, t, op, window=(-0.5, 0.5)))

    return observe, sup


def run_manufactured_case(n_half: int, r1: int, r2: int,
                          kinds: Sequence[str] = ERROR_KINDS,
                          t_final: float = 1.0, kappa: float = 0.25,
                          kernel: str = "2-over-s") -> dict[str, float]:
    """One resolution of the benchmark: returns the requested error norms."""
    grid, op = build_case_operator(n_half, r1, r2, kernel)
    u0, source, exact = manufactured_problem(grid)
    stepper = TimeStepper(op=op, t_final=t_final, kappa_cfl=kappa, source=source)
    observe, sup = _error_tracker(grid, op, exact, kinds, stepper.n_steps())
    run(u0, stepper, observer=observe)
    return dict(sup)


def observed_orders(hs: Sequence[float], errors: Sequence[float]) -> list:
    """Per-refinement convergence orders; the first entry is None."""
    orders: list = [None]
    for k in range(1, len(errors)):
        if errors[k] <= 0.0 or errors[k - 1] <= 0.0:
            orders.append(None)
        else:
            orders.append(float(np.log(errors[k - 1] / errors[k])
                                / np.log(hs[k - 1] / hs[k])))
    return orders


def convergence_study(cfg: StudyConfig) -> ErrorReport:
    r1, r2 = cfg.horizons
    rows = []
    for n in cfg.resolutions:
        errs = run_manufactured_case(n, r1, r2, cfg.error_kinds,
                                     cfg.t_final, cfg.kappa_cfl, cfg.kernel)
        rows.append({"n_half": n, "h": 1.0 / n, "errors": errs})
    for kind in cfg.error_kinds:
        orders = observed_orders([r["h"] for r in rows],
                                 [r["errors"][kind] for r in rows])
        for row, order in zip(rows, orders):
            row.setdefault("orders", {})[kind] = order
    meta = {
        "case": cfg.case, "r1": r1, "r2": r2, "operator": "qnl",
        "kernel": cfg.kernel, "kappa_cfl": cfg.kappa_cfl,
        "t_final": cfg.t_final, "snapshot_divisor": SNAPSHOT_DIVISOR,
        "build_id": cfg.config_hash(),
    }
    return ErrorReport(case=cfg.case, rows=rows, metadata=meta)


def report_to_csv(report: ErrorReport) -> str:
    buf = io.StringIO()
    for key in sorted(report.metadata):
        buf.write(f"# {key}={report.metadata[key]}\n")
    buf.write("case,n_half,h,error_kind,error,order\n")
    kinds = [k for k in ERROR_KINDS if k in report.rows[0]["errors"]]
    for kind in kinds:
        for row in report.rows:
            order = row["orders"][kind]
            otxt = "" if order is None else f"{order:.3f}"
            buf.write(f"{report.case},{row['n_half']},{row['h']:.5e},"
                      f"{kind},{row['errors'][kind]:.5e},{otxt}\n")
    return buf.getvalue()


@dataclass
class SingularComparison:
    grid: Grid1D
    u_qnl: np.ndarray
    u_nonlocal: np.ndarray
    u_local: np.ndarray
    gap_qnl_nonlocal: float
    gap_local_nonlocal: float


def singular_comparison(n_half: int = 200, kernel: str = "2-over-s"
                        ) -> SingularComparison:
    """Evolve a datum with an off-grid singularity under the coupled, the
    wide-horizon, and the local operators (delta1 = 5h, delta2 = h,
    T = 1/4, f = 0) and compare final profiles."""
    r1, r2 = 5, 1
    grid = build_grid(n_half, r1, r2)
    h = grid.h
    xstar = -0.45 + h / 2.0
    base = get_kernel(kernel)

    def datum(x):
        return np.sin(np.pi * x) / (x - xstar)

    ops = {
        "qnl": assemble_qnl(grid, base.scaled(grid.delta1), base.scaled(grid.delta2)),
        "nonlocal": assemble_nonlocal(grid, r1, base.scaled(grid.delta1)),
        "local": assemble_local(grid),
    }
    finals = {}
    for name, op in ops.items():
        u0 = sample(datum, grid).constrained()
        rec = run(u0, TimeStepper(op=op, t_final=0.25))
        finals[name] = rec.final_field.values[grid.interior]
    gq = float(np.abs(finals["qnl"] - finals["nonlocal"]).max())
    gl = float(np.abs(finals["local"] - finals["nonlocal"]).max())
    return SingularComparison(grid=grid, u_qnl=finals["qnl"],
                              u_nonlocal=finals["nonlocal"],
                              u_local=finals["local"],
                              gap_qnl_nonlocal=gq, gap_local_nonlocal=gl)


def singular_to_csv(cmp: SingularComparison) -> str:
    buf = io.StringIO()
    buf.write("x,u_qnl,u_nonlocal,u_local\n")
    xs = cmp.grid.interior_coords()
    for i in range(xs.size):
        buf.write(f"{xs[i]:.5e},{cmp.u_qnl[i]:.5e},"
                  f"{cmp.u_nonlocal[i]:.5e},{cmp.u_local[i]:.5e}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# property-check suite (the `check` subcommand)

@dataclass
class PropertyResult:
    group: str
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


def _smooth_test_functions():
    return [
        lambda x: np.where(np.abs(x) < 1, (1 - x**2) ** 3, 0.0),
        lambda x: np.where(np.abs(x) < 1, (1 - x**2) ** 3 * np.sin(3 * x), 0.0),
        lambda x: np.where(np.abs(x) < 1, x * (1 - x**2) ** 3, 0.0),
        lambda x: np.where(np.abs(x) < 1, (1 - x**2) ** 3 * np.exp(x) / 2, 0.0),
        lambda x: np.where(np.abs(x) < 1, (1 - x**2) ** 3 * np.cos(5 * x), 0.0),
    ]


def check_kernels() -> list[PropertyResult]:
    out = []
    base = get_kernel("2-over-s")
    rng = np.random.default_rng(2024)
    deltas = rng.uniform(1e-3, 1.0, size=10)
    ref = base.scaled(1.0).second_moment()
    worst = max(abs(base.scaled(d).second_moment() - ref) for d in deltas)
    out.append(PropertyResult("kernels", "second-moment scale invariance",
                              worst <= 1e-10, worst, 1e-10))
    worst = 0.0
    for (r1, r2) in set(CASES.values()) | {(5, 1)}:
        for n, r in ((50, r1), (50, r2)):
            k = base.scaled(r / n)
            w = k.annulus_weights(1.0 / n, r)
            worst = max(worst, abs(w.sum() - k.second_moment()))
    out.append(PropertyResult("kernels", "annulus weights sum to second moment",
                              worst <= 1e-10, worst, 1e-10))
    # analytic fast path against adaptive quadrature
    import dataclasses
    quad_only = dataclasses.replace(base, moment_primitive=None)
    k_a = base.scaled(0.12)
    k_q = quad_only.scaled(0.12)
    w_a = k_a.annulus_weights(0.02, 6)
    w_q = k_q.annulus_weights(0.02, 6)
    worst = float(np.abs(w_a - w_q).max() / np.abs(w_a).max())
    out.append(PropertyResult("kernels", "analytic vs quadrature weights",
                              worst <= 1e-12, worst, 1e-12))
    return out


def check_assembly(n_half: int = 50) -> list[PropertyResult]:
    out = []
    base = get_kernel("2-over-s")
    rng = np.random.default_rng(7)
    for case in ("A", "B", "C"):
        r1, r2 = CASES[case]
        grid, op = build_case_operator(n_half, r1, r2, "2-over-s")
        A = op.dense()
        sym = symmetry_defect(op)
        out.append(PropertyResult("assembly", f"case {case}: bit-exact symmetry",
                                  sym == 0.0, sym, 0.0))
        worst = 0.0
        for _ in range(20):
            F, u0 = rng.normal(size=2)
            aff = GridField(grid, F * grid.coords() + u0)
            resid = np.abs(apply(op, aff).values[grid.interior]).max()
            worst = max(worst, resid / ((abs(F) + abs(u0)) / grid.h**2))
        out.append(PropertyResult("assembly", f"case {case}: affine patch test",
                                  worst <= 1e-12, worst, 1e-12,
                                  "scaled by (|F|+|u0|)/h^2"))
        wide = assemble_nonlocal(grid, r1, base.scaled(grid.delta1)).dense()
        gap = None
        for _ in range(100):
            v = rng.standard_normal(grid.n_interior)
            d = float(v @ (-A) @ v - v @ (-wide) @ v)
            gap = d if gap is None else min(gap, d)
        out.append(PropertyResult(
            "assembly", f"case {case}: quadratic-form dominance over delta1",
            gap >= -1e-10, gap, -1e-10, "min over 100 random fields"))
        lam, resid = smallest_eigenvalue(op)
        out.append(PropertyResult(
            "assembly", f"case {case}: smallest eigenvalue of -A positive",
            lam > 0.0 and resid <= 1e-8 * max(1.0, lam), lam, 0.0,
            f"inverse-power residual {resid:.1e}"))
    # M = 1 entrywise reduction
    grid = build_grid(n_half, 4, 4)
    k = base.scaled(grid.delta1)
    q = assemble_qnl(grid, k, k)
    nl = assemble_nonlocal(grid, 4, k)
    scale = np.abs(nl.dense()).max()
    red = float(np.abs(q.dense() - nl.dense()).max() / scale)
    out.append(PropertyResult("assembly", "M=1 reduction to single horizon",
                              red <= 1e-14, red, 1e-14, "relative, entrywise"))
    return out


def check_energies() -> list[PropertyResult]:
    out = []
    funcs = _smooth_test_functions()
    # reconstruction equivalence with the short-horizon energy, one row per
    # (functional, test function) pair
    for M in (2, 3, 5):
        delta1 = 0.1 * M
        for fid, u in enumerate(funcs, start=1):
            gr = energy_gr(u, delta1, M, cells=256)
            d2 = energy_delta(u, delta1 / M, cells=256)
            gap = abs(gr.value - d2.value)
            tol = max(1e-8, 3 * (gr.error_estimate + d2.error_estimate))
            out.append(PropertyResult(
                "energy", f"{gr.functional} = {d2.functional} [u{fid}]",
                gap <= tol, gap, tol,
                f"value={gr.value:.6e} counterpart={d2.value:.6e}"))
    # coupled energy dominates the wide-horizon energy
    rng = np.random.default_rng(11)
    worst = 0.0
    ok = True
    for i in range(20):
        a, b, c = rng.uniform(0.5, 2.0), rng.uniform(1.0, 6.0), rng.uniform(0, np.pi)

        def u(x, a=a, b=b, c=c):
            return np.where(np.abs(x) < 1, a * (1 - x**2) ** 3 * np.sin(b * x + c), 0.0)

        eq = energy_qnl(u, 0.12, 3, cells=192)
        e1 = energy_delta(u, 0.12, cells=192)
        slack = 3 * (eq.error_estimate + e1.error_estimate) + 1e-12
        margin = eq.value - e1.value
        worst = min(worst, margin + slack)
        ok = ok and (margin >= -slack)
    out.append(PropertyResult("energy", "coupled energy >= wide-horizon energy",
                              ok, worst, 0.0, "20 smooth fields, quadrature slack"))
    # first-variation duality
    grid, op = build_case_operator(50, 6, 2, "2-over-s")
    rng = np.random.default_rng(3)
    u = GridField(grid, np.sin(1.7 * grid.coords())
                  + 0.3 * rng.standard_normal(grid.n_nodes)).constrained()
    lhs = first_variation_oracle(u, op).values[grid.interior]
    rhs = apply(op, u).values[grid.interior]
    err = float(np.abs(lhs - rhs).max())
    tol = 1e-6 * float(np.abs(rhs).max()) + 1e-8
    out.append(PropertyResult("energy", "first variation matches operator",
                              err <= tol, err, tol))
    # discrete dominance
    wide = assemble_nonlocal(grid, 6, get_kernel("2-over-s").scaled(grid.delta1))
    gap = None
    for _ in range(100):
        v = rng.standard_normal(grid.n_nodes)
        v[grid.constrained_mask()] = 0.0
        d = 0.25 * (quadratic_form(v, op) - quadratic_form(v, wide))
        gap = d if gap is None else min(gap, d)
    out.append(PropertyResult("energy", "discrete coupled form dominates delta1 form",
                              gap >= -1e-10, gap, -1e-10,
                              "min over 100 random constrained fields"))
    return out


def check_dynamics(n_half: int = 50) -> list[PropertyResult]:
    out = []
    for case in ("A", "B", "C"):
        r1, r2 = CASES[case]
        grid, op = build_case_operator(n_half, r1, r2, "2-over-s")
        u0 = sample(lambda x: x * x * (1 - x * x), grid).constrained()
        rec = run(u0, TimeStepper(op=op, t_final=1.0))
        up = rec.running_max - rec.initial_max
        dn = min(0.0, rec.initial_min) - rec.running_min
        worst = max(up, dn)
        out.append(PropertyResult("dynamics", f"case {case}: maximum principle (f=0)",
                                  worst <= 1e-12, worst, 1e-12))
    # energy decay along an f=0 run
    grid, op = build_case_operator(n_half, 6, 2, "2-over-s")
    u0 = sample(lambda x: np.sin(np.pi * x) * (1 - x * x), grid).constrained()
    energies = []
    stepper = TimeStepper(op=op, t_final=0.05)

    def observe(u, t, k):
        energies.append(discrete_energy(u, op))

    run(u0, stepper, observer=observe)
    rises = max(b - a for a, b in zip(energies, energies[1:]))
    out.append(PropertyResult("dynamics", "discrete energy non-increasing (f=0)",
                              rises <= 0.0, rises, 0.0))
    # determinism
    r_a = run(u0, TimeStepper(op=op, t_final=0.02))
    r_b = run(u0, TimeStepper(op=op, t_final=0.02))
    same = bool(np.array_equal(r_a.final_field.values, r_b.final_field.values))
    out.append(PropertyResult("dynamics", "bit-identical repeated runs",
                              same, 0.0 if same else 1.0, 0.0))
    return out


def run_property_checks(which: str = "all") -> list[PropertyResult]:
    groups = {
        "kernels": check_kernels,
        "assembly": check_assembly,
        "energies": check_energies,
        "dynamics": check_dynamics,
    }
    if which == "all":
        results = []
        for fn in groups.values():
            results.extend(fn())
        return results
    if which not in groups:
        raise ConfigurationError(
            f"unknown check group {which!r}; choose from {['all'] + sorted(groups)}")
    return groups[which]()
