"""Discrete energies, the contact set and the free-boundary residual.

Two normalizations are kept side by side:

``total_ek``
    ``|(u_k - u_{k-1})/h|^2 + 1/2 (|grad u_k|^2 + |grad u_{k-1}|^2)``, the
    two-level quantity that the CN scheme conserves exactly.
``total_numeric``
    ``1/2 |(u - u_{n-1})/h|^2 + 1/2 |grad u|^2``, the usual mechanical energy.
"""
from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from .mesh import Mesh, element_gradients


@dataclass(frozen=True)
class EnergyRecord:
    m: int
    t: float
    kinetic_ek: float
    potential_ek: float
    total_ek: float
    total_numeric: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> tuple:
        return astuple(self)


def energy_parts(u_k, u_km1, h: float, M, K) -> tuple[float, float]:
    d = u_k - u_km1
    kinetic = float(d @ (M @ d)) / (h * h)
    potential = 0.5 * (float(u_k @ (K @ u_k)) + float(u_km1 @ (K @ u_km1)))
    return kinetic, potential


def energy_ek(u_k, u_km1, h: float, M, K) -> float:
    kinetic, potential = energy_parts(u_k, u_km1, h, M, K)
    return kinetic + potential


def energy_numeric(u_n, u_nm1, h: float, M, K) -> float:
    d = u_n - u_nm1
    return 0.5 * float(d @ (M @ d)) / (h * h) + 0.5 * float(u_n @ (K @ u_n))


def bound_energy(u_k, u_km1, h: float, M, K) -> float:
    """Left side of the energy estimate: ``|(u_k-u_{k-1})/h|^2 + 1/2 |grad u_k|^2``."""
    d = u_k - u_km1
    return float(d @ (M @ d)) / (h * h) + 0.5 * float(u_k @ (K @ u_k))


def energy_estimate_rhs(u0, u1, v0, M, K) -> float:
    """``|v_0|^2 + 1/2 |grad u_0|^2 + 1/2 |grad u_1|^2``."""
    return float(v0 @ (M @ v0)) + 0.5 * (float(u0 @ (K @ u0)) + float(u1 @ (K @ u1)))


def energy_record(m: int, t: float, u_k, u_km1, h: float, M, K) -> EnergyRecord:
    kinetic, potential = energy_parts(u_k, u_km1, h, M, K)
    return EnergyRecord(
        m, t, kinetic, potential, kinetic + potential, energy_numeric(u_k, u_km1, h, M, K)
    )


def free_boundary_set(u, eps: float) -> np.ndarray:
    """Sorted indices of nodes where ``u < eps``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return np.nonzero(np.asarray(u) < eps)[0]


def default_fb_eps(u0) -> float:
    """Contact threshold relative to the initial amplitude.

    Clamped contact nodes are exactly zero, so the threshold only needs to
    sit below the numerical residue left behind a peeling string.
    """
    scale = float(np.max(np.abs(u0), initial=0.0))
    return 1e-8 * scale if scale > 0 else 1e-12


def is_contiguous(indices) -> bool:
    indices = np.asarray(indices)
    return len(indices) == 0 or int(indices[-1] - indices[0]) + 1 == len(indices)


def nodal_gradient_sq(mesh: Mesh, u) -> np.ndarray:
    """Measure-weighted average of ``|grad u|^2`` over the elements around each node."""
    g2 = np.sum(element_gradients(mesh, u) ** 2, axis=1) * mesh.measures
    num = np.zeros(mesh.n_nodes)
    den = np.zeros(mesh.n_nodes)
    k = mesh.cells.shape[1]
    np.add.at(num, mesh.cells.ravel(), np.repeat(g2, k))
    np.add.at(den, mesh.cells.ravel(), np.repeat(mesh.measures, k))
    return num / den


def front_nodes(mesh: Mesh, contact: np.ndarray) -> np.ndarray:
    """Nodes outside ``contact`` that share an element with a contact node."""
    in_contact = np.zeros(mesh.n_nodes, dtype=bool)
    in_contact[contact] = True
    touching = in_contact[mesh.cells].any(axis=1)
    near = np.zeros(mesh.n_nodes, dtype=bool)
    near[mesh.cells[touching].ravel()] = True
    return np.nonzero(near & ~in_contact)[0]


def fb_residual(snapshots, h: float, mesh: Mesh, eps: float, everywhere: bool = False):
    """Residual ``|grad u|^2 - u_t^2`` of the free boundary condition.

    ``snapshots`` holds three consecutive levels ``(u_{n-1}, u_n, u_{n+1})``;
    the gradient is taken at the middle level and ``u_t`` is the central
    difference.  Values are reported at the nodes bordering the contact set
    ``{u_n < eps}`` (or at every node when ``everywhere``) and are NaN
    elsewhere.
    """
    u_prev, u_mid, u_next = (np.asarray(s, dtype=float) for s in snapshots)
    ut = (u_next - u_prev) / (2.0 * h)
    r = nodal_gradient_sq(mesh, u_mid) - ut**2
    if everywhere:
        return r
    out = np.full(mesh.n_nodes, np.nan)
    nodes = front_nodes(mesh, free_boundary_set(u_mid, eps))
    out[nodes] = r[nodes]
    return out
