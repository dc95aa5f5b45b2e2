"""Nonlocal energies: continuous functionals by quadrature, and the
discrete quadratic form tied to the assembled operators.

Continuous functionals act on analytic test functions (vectorized
callables vanishing outside the computational domain), so the
continuous-level statements -- reconstruction equivalence, dominance of
the coupled form over the wide-horizon form -- are tested independently
of the mesh scheme.  The double integrals use the substitution y = x + s
and midpoint panels; the integrand gamma_delta(s) (u(x+s)-u(x))^2 is
bounded for kernels with integrable s^2-moment, so no special handling
of the kernel singularity is needed beyond never sampling s = 0.

The discrete energy is built from the identical pair weights used by the
assembly, which makes the first-variation oracle match the operator to
round-off rather than to discretization accuracy.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grid import GridField
from .kernels import TWO_OVER_S_KERNEL, ScaledKernel
from .operators import DiffusionOperator


@dataclass(frozen=True)
class EnergyValue:
    """Quadrature value of one of the continuous functionals.

    ``error_estimate`` is a Richardson estimate from comparing the
    requested resolution against half resolution.
    """

    value: float
    functional: str
    quad_cells: int
    error_estimate: float


def _check_cells(cells: int) -> None:
    if cells < 64:
        raise ValueError(f"need cells >= 64 for the double quadrature, got {cells}")


def _midpoints(lo: float, hi: float, n: int) -> tuple[np.ndarray, float]:
    w = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * w, w


def _x_segments(xlo: float, xhi: float, n_total: int):
    """Midpoint panels on [xlo, 0] and [0, xhi]; splitting at the interface
    keeps the panels aligned across the plain, reconstructed and coupled
    functionals (and away from the coupled integrand's kink)."""
    n_left = min(max(int(round(n_total * (0.0 - xlo) / (xhi - xlo))), 1),
                 n_total - 1)
    XL, wl = _midpoints(xlo, 0.0, n_left)
    XR, wr = _midpoints(0.0, xhi, n_total - n_left)
    return (XL, wl), (XR, wr)


def _pair_energy(u: Callable, kernel: ScaledKernel, cells: int,
                 support: tuple[float, float]) -> float:
    """(1/2) int_0^delta int_x gamma_delta(s) (u(x+s) - u(x))^2 dx ds."""
    delta = kernel.delta
    xlo, xhi = support[0] - delta, support[1]
    S, ws = _midpoints(0.0, delta, cells)
    gam = np.array([kernel(s) for s in S])
    tot = 0.0
    for X, wx in _x_segments(xlo, xhi, 4 * cells):
        diff2 = (u(X[None, :] + S[:, None]) - u(X[None, :])) ** 2
        tot += wx * float((gam[:, None] * diff2).sum())
    return 0.5 * ws * tot


def _recon_sq(u: Callable, X: np.ndarray, S: np.ndarray, M: int) -> np.ndarray:
    """M * sum_k (u(x + (k+1)s/M) - u(x + k s/M))^2 on a meshgrid."""
    out = np.zeros(np.broadcast_shapes(X.shape, S.shape))
    for k in range(M):
        out += (u(X + (k + 1) / M * S) - u(X + k / M * S)) ** 2
    return M * out


def energy_delta(u: Callable, delta: float, cells: int,
                 support: tuple[float, float] = (-1.25, 1.25),
                 scaleless=None) -> EnergyValue:
    """Total nonlocal energy (1/4) iint gamma_delta(|y-x|)(u(y)-u(x))^2."""
    _check_cells(cells)
    base = scaleless if scaleless is not None else TWO_OVER_S_KERNEL
    kernel = base.scaled(delta)

    def run(c):
        return _pair_energy(u, kernel, c, support)

    coarse, fine = run(max(cells // 2, 8)), run(cells)
    return EnergyValue(fine, f"E_delta({delta:g})", cells, abs(fine - coarse) / 3)


def energy_gr(u: Callable, delta1: float, M: int, cells: int,
              support: tuple[float, float] = (-1.25, 1.25),
              scaleless=None) -> EnergyValue:
    """Energy with geometric reconstruction applied on the whole line:
    every difference u(y)-u(x) is rebuilt from M sub-differences of span
    |y-x|/M.  Equivalent to the plain energy at horizon delta1/M."""
    _check_cells(cells)
    base = scaleless if scaleless is not None else TWO_OVER_S_KERNEL
    kernel = base.scaled(delta1)

    def run(c):
        xlo, xhi = support[0] - delta1, support[1]
        S, ws = _midpoints(0.0, delta1, c)
        gam = np.array([kernel(s) for s in S])
        tot = 0.0
        for X, wx in _x_segments(xlo, xhi, 4 * c):
            vals = _recon_sq(u, X[None, :], S[:, None], M)
            tot += wx * float((gam[:, None] * vals).sum())
        return 0.5 * ws * tot

    coarse, fine = run(max(cells // 2, 8)), run(cells)
    return EnergyValue(fine, f"E_gr({delta1:g},M={M})", cells,
                       abs(fine - coarse) / 3)


def energy_qnl(u: Callable, delta1: float, M: int, cells: int,
               support: tuple[float, float] = (-1.25, 1.25),
               scaleless=None) -> EnergyValue:
    """Total energy of the quasinonlocal coupling: plain gamma_delta1
    pairs when the pair's left point is at or left of 0, reconstructed
    pairs when both points are right of 0."""
    _check_cells(cells)
    base = scaleless if scaleless is not None else TWO_OVER_S_KERNEL
    kernel = base.scaled(delta1)

    def run(c):
        # for y = x + s, s > 0 the region split is exactly {x <= 0} vs
        # {x > 0}: plain pairs on the left segment, reconstructed on the
        # right, on the same panels as the single-kernel functionals
        S, ws = _midpoints(0.0, delta1, c)
        gam = np.array([kernel(s) for s in S])
        xlo, xhi = support[0] - delta1, support[1]
        (XL, wl), (XR, wr) = _x_segments(xlo, xhi, 4 * c)
        left = (u(XL[None, :] + S[:, None]) - u(XL[None, :])) ** 2
        tot = wl * float((gam[:, None] * left).sum())
        right = _recon_sq(u, XR[None, :], S[:, None], M)
        tot += wr * float((gam[:, None] * right).sum())
        return 0.5 * ws * tot

    coarse, fine = run(max(cells // 2, 8)), run(cells)
    return EnergyValue(fine, f"E_qnl({delta1:g},M={M})", cells,
                       abs(fine - coarse) / 3)


def quadratic_form(values: np.ndarray, op: DiffusionOperator,
                   mask: Optional[np.ndarray] = None) -> float:
    """h * sum_{i in mask} sum_{d != 0} C_{i,i+d} (v_{i+d} - v_i)^2 over
    ordered pairs, i.e. the discrete counterpart of the double-integral
    bilinear form of the operator's energy.  ``mask`` selects the
    x-window over padded nodes (None = whole padded domain)."""
    g = op.grid
    w = op.width
    nn = g.n_nodes
    if mask is None:
        mask = np.ones(nn, dtype=bool)
    tot = 0.0
    for d in range(-w, w + 1):
        if d == 0:
            continue
        lo, hi = max(0, -d), min(nn, nn - d)
        diff2 = (values[lo + d: hi + d] - values[lo: hi]) ** 2
        tot += float((op.pair_band[w + d, lo:hi] * diff2 * mask[lo:hi]).sum())
    return g.h * tot


def discrete_energy(u: GridField, op: DiffusionOperator) -> float:
    """Discrete total energy; equals (h/2) sum over unordered pairs of
    C (u_b - u_a)^2, so its first variation reproduces the operator."""
    return 0.25 * quadratic_form(u.values, op)


def first_variation_oracle(u: GridField, op: DiffusionOperator,
                           eps: float = 1e-5) -> GridField:
    """Central difference of the discrete energy in each interior nodal
    direction, density-normalized: g_i = -(E(u+eps e_i) - E(u-eps e_i))
    / (2 eps h).  For the quadratic energy this matches apply(op, u) up
    to round-off."""
    if not 1e-7 <= eps <= 1e-4:
        raise ValueError(f"eps={eps} outside the supported range [1e-7, 1e-4]")
    g = op.grid
    out = GridField.zeros(g)
    vals = u.values
    for i_arr in range(g.interior.start, g.interior.stop):
        up = vals.copy()
        up[i_arr] += eps
        dn = vals.copy()
        dn[i_arr] -= eps
        ep = 0.25 * quadratic_form(up, op)
        em = 0.25 * quadratic_form(dn, op)
        out.values[i_arr] = -(ep - em) / (2.0 * eps * g.h)
    return out
