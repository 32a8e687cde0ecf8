"""Smoothed characteristic function used by the adhesion term.

The bump is the biweight kernel ``beta(s) = 15/16 (1 - s^2)^2`` on ``[-1, 1]``.
It is C^1, nonnegative, bounded by one, has unit mass and a polynomial
primitive, so ``B(0) = 1/2`` holds by symmetry.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad


def bump(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1.0, (15.0 / 16.0) * (1.0 - s * s) ** 2, 0.0)


def bump_primitive(s):
    """``B(s) = int_{-1}^{s} beta``."""
    s = np.clip(np.asarray(s, dtype=float), -1.0, 1.0)
    return 0.5 + (15.0 / 16.0) * (s - 2.0 * s**3 / 3.0 + s**5 / 5.0)


def bump_derivative(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1.0, -(15.0 / 4.0) * s * (1.0 - s * s), 0.0)


@dataclass(frozen=True)
class AdhesionProfile:
    """Scaled mollifier ``beta_eps`` and its primitive ``B_eps`` for width ``eps``.

    The kernel properties are verified by quadrature at construction.
    """

    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"adhesion eps must be positive, got {self.eps}")
        self._check_kernel()

    @staticmethod
    def _check_kernel(tol: float = 1e-10) -> None:
        mass, _ = quad(lambda s: float(bump(s)), -1.0, 1.0, epsabs=1e-14)
        if abs(mass - 1.0) > tol:
            raise ValueError(f"bump mass {mass} != 1")
        half, _ = quad(lambda s: float(bump(s)), -1.0, 0.0, epsabs=1e-14)
        if abs(half - 0.5) > tol or abs(float(bump_primitive(0.0)) - 0.5) > tol:
            raise ValueError("B(0) != 1/2")
        grid = np.linspace(-1.5, 1.5, 3001)
        vals = bump(grid)
        if vals.min() < 0 or vals.max() > 1.0:
            raise ValueError("bump must take values in [0, 1]")
        if np.any(vals[np.abs(grid) >= 1.0] != 0.0):
            raise ValueError("bump must vanish outside [-1, 1]")

    def beta(self, u):
        return bump(np.asarray(u) / self.eps) / self.eps

    def B(self, u):
        """``int_{-1}^{u} beta_eps``; differs from ``B(u/eps)`` only when eps > 1."""
        return bump_primitive(np.asarray(u) / self.eps) - bump_primitive(-1.0 / self.eps)

    def dbeta(self, u):
        return bump_derivative(np.asarray(u) / self.eps) / self.eps**2
