"""Nonlocal diffusion kernels and their horizon scaling.

A scaleless kernel ``gamma`` is a non-negative density on (0, 1] with a
finite, positive second moment.  Its scaled family for horizon ``delta``
(in one space dimension) is

    gamma_delta(s) = delta**-3 * gamma(s / delta),   0 < s <= delta,

and zero beyond the horizon.  The 1/delta**3 scaling makes the second
moment ``int_0^delta s^2 gamma_delta(s) ds`` independent of delta; that
moment normalises the diffusion operator so its local limit is u_xx.

Operator assembly never samples gamma_delta pointwise near the origin:
all weights are integrals of the bounded function s^2 * gamma_delta(s)
over mesh annuli [(j-1)h, jh].
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .exceptions import (ConfigurationError, KernelEvaluationError,
                         QuadratureError)

QUAD_TOL = 1e-12


@dataclass(frozen=True)
class ScalelessKernel:
    """Dimensionless kernel density on (0, 1].

    ``moment_primitive(a, b)``, when given, must return the closed form of
    ``int_a^b sigma^2 gamma(sigma) d sigma`` for 0 <= a <= b <= 1 and is
    used as a fast path in place of adaptive quadrature.
    """

    name: str
    density: Callable[[float], float]
    moment_primitive: Optional[Callable[[float, float], float]] = None
    singular_at_origin: bool = False

    def scaled(self, delta: float) -> "ScaledKernel":
        return ScaledKernel(self, float(delta))


@dataclass(frozen=True)
class ScaledKernel:
    """Kernel ``gamma_delta`` for a concrete horizon ``delta > 0``."""

    base: ScalelessKernel
    delta: float

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ConfigurationError(f"horizon must be positive, got {self.delta}")

    def __call__(self, s: float) -> float:
        """Evaluate gamma_delta(s); zero outside the horizon.

        Raises for s = 0 on kernels singular at the origin: callers must
        integrate s^2 * gamma_delta rather than sample near zero.
        """
        if s < 0.0:
            raise ValueError(f"kernel argument must be non-negative, got {s}")
        if s > self.delta:
            return 0.0
        if s == 0.0 and self.base.singular_at_origin:
            raise KernelEvaluationError(
                f"kernel {self.base.name!r} is singular at s = 0")
        return self.base.density(s / self.delta) / self.delta**3

    def moment_integral(self, a: float, b: float) -> float:
        """``int_a^b s^2 gamma_delta(s) ds`` with the range clipped to the
        support [0, delta]."""
        a = max(0.0, a)
        b = min(b, self.delta)
        if b <= a:
            return 0.0
        if self.base.moment_primitive is not None:
            # substitute s = delta * sigma: the delta factors cancel
            return self.base.moment_primitive(a / self.delta, b / self.delta)
        val, err = integrate.quad(
            lambda s: s * s * self.base.density(s / self.delta) / self.delta**3,
            a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
        if err > 100 * QUAD_TOL + 1e-10 * abs(val):
            raise QuadratureError(
                f"second-moment quadrature on [{a}, {b}] did not converge "
                f"(estimate {err:.2e})")
        return val

    def second_moment(self) -> float:
        """Scale-invariant second moment ``int_0^delta s^2 gamma_delta ds``."""
        m2 = self.moment_integral(0.0, self.delta)
        if not m2 > 0.0:
            raise ConfigurationError(
                f"kernel {self.base.name!r} has non-positive second moment")
        return m2

    def annulus_weights(self, h: float, r: int) -> np.ndarray:
        """Weights ``w_j = int_{(j-1)h}^{jh} s^2 gamma_delta(s) ds`` for
        j = 1..r; these multiply the lag-j second differences of the
        Riemann-sum scheme.  Requires delta = r*h exactly."""
        if r < 1:
            raise ConfigurationError(f"horizon must span >= 1 mesh cell, got r={r}")
        if abs(self.delta - r * h) > 4 * np.finfo(float).eps * self.delta:
            raise ConfigurationError(
                f"horizon {self.delta} is not r*h = {r}*{h} = {r * h}")
        return np.array([self.moment_integral((j - 1) * h, j * h)
                         for j in range(1, r + 1)])


def _two_over_s_primitive(a: float, b: float) -> float:
    # int_a^b sigma^2 * (2/sigma) d sigma = b^2 - a^2
    return b * b - a * a


TWO_OVER_S_KERNEL = ScalelessKernel(
    name="2-over-s",
    density=lambda s: 2.0 / s,
    moment_primitive=_two_over_s_primitive,
    singular_at_origin=True,
)

CONSTANT_KERNEL = ScalelessKernel(
    name="constant-3",
    density=lambda s: 3.0,
    moment_primitive=lambda a, b: b**3 - a**3,
)

_REGISTRY = {
    "2-over-s": TWO_OVER_S_KERNEL,
    "paper-2-over-s": TWO_OVER_S_KERNEL,  # config-file alias
    "constant-3": CONSTANT_KERNEL,
}


def get_kernel(name: str) -> ScalelessKernel:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown kernel {name!r}; available: {sorted(_REGISTRY)}") from None


def register_kernel(kernel: ScalelessKernel) -> None:
    _REGISTRY[kernel.name] = kernel
