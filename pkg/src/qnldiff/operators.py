"""Assembly of the discrete diffusion operators.

Three operators share one representation (a symmetric pairwise-coupling
band):

* ``assemble_nonlocal`` -- the single-horizon Riemann-sum scheme: every
  row applies lag-j second differences weighted by the annulus integrals
  of s^2 gamma_delta.
* ``assemble_local`` -- the 3-point Laplacian reference.
* ``assemble_qnl`` -- the quasinonlocal coupling of two horizons
  delta1 = M*delta2 with the interface at x = 0.

The QNL matrix is assembled from pair interactions so that symmetry is
structural (each unordered node pair carries one weight, written to both
row entries).  Pairs whose left node lies at or left of the interface
interact through gamma_delta1; pairs deep inside the right region through
gamma_delta2.  Pairs inside the interface ring (left node offset p with
p + lag <= r1) get weights solved from per-row moment-balance equations,
so the assembled operator annihilates affine fields to round-off on
every row.  The balance system is the discrete form of the statement
that the kernel's (scale-invariant) second moment flows through every
mesh cut; its solution is the non-negative profile closest to the
truncated-kernel weights of the coupled energy.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import ConfigurationError
from .grid import Grid1D, GridField
from .kernels import ScaledKernel


def interface_pair_weights(grid: Grid1D, kernel1: ScaledKernel,
                           kernel2: ScaledKernel) -> np.ndarray:
    """Pair weights P[p-1, j-1] for right-region pairs whose left node sits
    p nodes right of the interface (p = 1..r1-1), at lag j = 1..r1.

    Rows of the induced operator balance exactly: for every mesh cut the
    pair weights carry the same first-moment flux as the bulk schemes on
    either side.  Weights are non-negative and reduce to the delta1
    annulus weights when M = 1.
    """
    r1, r2, M = grid.r1, grid.r2, grid.M
    h = grid.h
    w1 = kernel1.annulus_weights(h, r1)
    pi = np.zeros(r1)
    pi[:r2] = kernel2.annulus_weights(h, r2)
    if M == 1:
        return np.tile(w1, (max(r1 - 1, 0), 1))
    m2 = w1.sum()
    if abs(m2 - pi.sum()) > 1e-9 * m2:
        raise ConfigurationError(
            "second moments of the two scaled kernels disagree; the QNL "
            "coupling requires one scaleless kernel at two horizons")

    # unknown deviations from the bulk delta2 profile live on pairs fully
    # inside the interface ring (p >= 1, p + j <= r1)
    sup = [(p, j) for p in range(1, r1) for j in range(1, r1 - p + 1)]
    col = {pj: i for i, pj in enumerate(sup)}
    nuk = len(sup)

    A = np.zeros((r1 - 1, nuk))
    b = np.zeros(r1 - 1)
    for t in range(1, r1):
        for (p, j) in sup:
            if p <= t < p + j:
                A[t - 1, col[(p, j)]] = 1.0 / j
        flux_pi = sum(pi[j - 1] * min(j, t) / j for j in range(1, r2 + 1))
        flux_needed = m2 - sum(w1[j - 1] * (j - t) / j for j in range(t + 1, r1 + 1))
        b[t - 1] = flux_needed - flux_pi

    # target: annulus weights of the coupled energy's truncated kernel,
    # (1/M) sum_k int over the annulus of s^2 gamma_delta2(s) 1{k*s < p*h}
    dhat = np.zeros(nuk)
    for (p, j) in sup:
        if j <= r2:
            tau = 0.0
            for k in range(M):
                hi = j * h if k == 0 else min(j * h, p * h / k)
                tau += kernel2.moment_integral((j - 1) * h, hi)
            dhat[col[(p, j)]] = tau / M - pi[j - 1]

    lower = np.array([-pi[j - 1] for (p, j) in sup])  # keeps P >= 0
    D = _equality_qp(A, b, dhat, lower)

    P = np.tile(pi, (r1 - 1, 1))
    for (p, j) in sup:
        P[p - 1, j - 1] += D[col[(p, j)]]
    P[np.abs(P) < 1e-13] = 0.0

    resid = np.abs(A @ D - b).max()
    if resid > 1e-10 or P.min() < 0.0:
        raise RuntimeError(
            f"interface weight solve failed (balance residual {resid:.2e}, "
            f"min weight {P.min():.2e})")
    return P


def _equality_qp(A: np.ndarray, b: np.ndarray, target: np.ndarray,
                 lower: np.ndarray) -> np.ndarray:
    """min ||x - target||^2 subject to A x = b and x >= lower, by an
    active-set loop around the KKT system.  Problem sizes here are tiny
    (tens of unknowns)."""
    neq, nuk = A.shape
    active: set[int] = set()
    for _ in range(4 * nuk + 8):
        act = sorted(active)
        na = len(act)
        K = np.zeros((nuk + neq + na, nuk + neq + na))
        K[:nuk, :nuk] = np.eye(nuk)
        K[:nuk, nuk:nuk + neq] = A.T
        K[nuk:nuk + neq, :nuk] = A
        for i, ai in enumerate(act):
            K[ai, nuk + neq + i] = 1.0
            K[nuk + neq + i, ai] = 1.0
        rhs = np.concatenate([target, b, lower[act]])
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        x = sol[:nuk]
        violated = [i for i in range(nuk)
                    if x[i] < lower[i] - 1e-12 and i not in active]
        if violated:
            active.update(violated)
            continue
        # stationarity here reads x - target + A^T lam + E^T mu = 0, so a
        # properly active lower bound carries mu <= 0; positive mu means
        # the bound should be released
        mults = sol[nuk + neq:]
        drop = [act[i] for i in range(na) if mults[i] > 1e-12]
        if not drop:
            return x
        active.difference_update(drop)
    raise RuntimeError("active-set iteration for interface weights did not converge")


@dataclass
class DiffusionOperator:
    """Symmetric pairwise-coupling operator over the padded grid.

    ``pair_band[d + width, i]`` holds the coupling coefficient
    C = weight/(j*h)^2 of the unordered pair (node i, node i+d), j = |d|,
    stored from both endpoints so the matrix is symmetric bit for bit.
    Rows are realised lazily: row i applies sum_d C * (u_{i+d} - u_i),
    with couplings into the constrained region folded against the data.
    """

    grid: Grid1D
    kind: str
    width: int
    pair_band: np.ndarray  # (2*width+1, n_nodes)

    def __post_init__(self):
        w = self.width
        nn = self.grid.n_nodes
        band = np.zeros((2 * w + 1, nn))
        for d in range(-w, w + 1):
            if d == 0:
                continue
            lo, hi = max(0, -d), min(nn, nn - d)
            band[w + d, lo:hi] = self.pair_band[w + d, lo:hi]
        self._row_band = band.copy()
        self._row_band[w] = -band.sum(axis=0)

    @classmethod
    def from_pair_weight(cls, grid: Grid1D, kind: str, width: int, pair_weight):
        """Build from ``pair_weight(a, b)`` giving the annulus mass of the
        unordered node pair (a < b, grid indices)."""
        nn = grid.n_nodes
        h = grid.h
        band = np.zeros((2 * width + 1, nn))
        lo_idx = -grid.pad
        for i_arr in range(nn):
            node = i_arr + lo_idx
            for d in range(1, width + 1):
                partner = i_arr + d
                if partner >= nn:
                    continue
                wgt = pair_weight(node, node + d)
                if wgt == 0.0:
                    continue
                c = wgt / (d * h) ** 2
                band[width + d, i_arr] = c
                band[width - d, partner] = c
        return cls(grid=grid, kind=kind, width=width, pair_band=band)

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        """Action on a padded value array; returns interior node values.

        Computed in difference form sum_d C_d (u_{i+d} - u_i), which keeps
        the action on constant fields exactly zero."""
        w = self.width
        sl = self.grid.interior
        center = values[sl]
        out = np.zeros(self.grid.n_interior)
        for d in range(-w, w + 1):
            if d == 0:
                continue
            out += self._row_band[w + d, sl] * (
                values[sl.start + d: sl.stop + d] - center)
        return out

    def dense(self) -> np.ndarray:
        """Square matrix over interior nodes 1..2N-1 (constrained couplings
        appear only through the diagonal)."""
        n = self.grid.n_interior
        w = self.width
        A = np.zeros((n, n))
        sl = self.grid.interior
        for d in range(-w, w + 1):
            coefs = self._row_band[w + d, sl]
            for i in range(n):
                j = i + d
                if 0 <= j < n:
                    A[i, j] += coefs[i]
        return A

    def diagonal(self) -> np.ndarray:
        return self._row_band[self.width, self.grid.interior]


def apply(op: DiffusionOperator, u: GridField) -> GridField:
    """L u as a grid field: interior rows act on u (constrained values of
    u folded in), constrained entries of the result are zero."""
    if u.grid != op.grid:
        raise ValueError("operator and field grids differ")
    out = GridField.zeros(op.grid)
    out.values[op.grid.interior] = op.apply_values(u.values)
    return out


def assemble_nonlocal(grid: Grid1D, r: int, kernel: ScaledKernel) -> DiffusionOperator:
    """Single-horizon operator: every row is the lag-1..r second-difference
    stencil with annulus weights of ``kernel`` (horizon r*h)."""
    if r > grid.pad:
        raise ConfigurationError(f"horizon r={r} exceeds grid padding {grid.pad}")
    w = kernel.annulus_weights(grid.h, r)

    def pw(a, b):
        j = b - a
        return w[j - 1] if j <= r else 0.0

    return DiffusionOperator.from_pair_weight(
        grid, kind=f"nonlocal(r={r})", width=r, pair_weight=pw)


def assemble_local(grid: Grid1D) -> DiffusionOperator:
    """3-point Laplacian rows (u_{i+1} - 2 u_i + u_{i-1}) / h^2."""
    return DiffusionOperator.from_pair_weight(
        grid, kind="local", width=1, pair_weight=lambda a, b: 1.0)


def assemble_qnl(grid: Grid1D, kernel1: ScaledKernel,
                 kernel2: ScaledKernel) -> DiffusionOperator:
    """Quasinonlocal coupling: gamma_delta1 rows left of the interface,
    gamma_delta2 rows deep in the right region, balanced pair weights in
    the interface ring."""
    h, m = grid.h, grid.interface_index
    r1, r2 = grid.r1, grid.r2
    if kernel1.base is not kernel2.base and kernel1.base.name != kernel2.base.name:
        raise ConfigurationError(
            "QNL coupling requires the same scaleless kernel at both horizons")
    w1 = kernel1.annulus_weights(h, r1)
    pi = np.zeros(r1)
    pi[:r2] = kernel2.annulus_weights(h, r2)
    P = interface_pair_weights(grid, kernel1, kernel2)

    def pw(a, b):
        j = b - a
        if j > r1:
            return 0.0
        if a <= m:
            return w1[j - 1]
        p = a - m
        if p <= r1 - 1:
            return P[p - 1, j - 1]
        return pi[j - 1]

    return DiffusionOperator.from_pair_weight(
        grid, kind="qnl", width=r1, pair_weight=pw)


def symmetry_defect(op: DiffusionOperator) -> float:
    A = op.dense()
    return float(np.abs(A - A.T).max())


def smallest_eigenvalue(op: DiffusionOperator, tol: float = 1e-8,
                        max_iter: int = 1000) -> tuple[float, float]:
    """Smallest-magnitude eigenvalue of -A by inverse power iteration
    (LU-backed).  Returns (eigenvalue, final residual)."""
    B = -op.dense()
    n = B.shape[0]
    lu = linalg.lu_factor(B)
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = float(v @ B @ v)
    for _ in range(max_iter):
        w = linalg.lu_solve(lu, v)
        w /= np.linalg.norm(w)
        lam = float(w @ B @ w)
        resid = float(np.linalg.norm(B @ w - lam * w))
        v = w
        if resid <= tol * max(1.0, abs(lam)):
            return lam, resid
    return lam, resid


def dump_operator(op: DiffusionOperator, path: str) -> None:
    """Dense row-major CSV of the interior matrix, for offline inspection."""
    A = op.dense()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in A:
            writer.writerow([f"{v:.17g}" for v in row])
