"""Volume and nonnegativity constraints for droplets.

A droplet is advanced by minimizing the CN functional of its own history
over ``{u >= 0, int u = V}``.  The feasible set is handled by projected
descent; the projection is the shift-and-clamp map ``max(u + lam, 0)``,
which is the exact projection onto that set in the lumped-mass metric.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descent import descent_minimize
from .mesh import Mesh, integrate
from .scheme import Operators, SchemeConfig, StepState, evaluate_I, gradient_I


class ProjectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConstraintSpec:
    nonneg: bool = True
    target_volume: float = 0.0
    proj_tol: float = 1e-12

    def __post_init__(self):
        if self.target_volume < 0:
            raise ValueError(f"target_volume must be nonnegative, got {self.target_volume}")


@dataclass(frozen=True)
class Droplet:
    id: int
    u_prev: np.ndarray
    u_prev2: np.ndarray
    volume: float
    converged: bool = True


def project_volume_nonneg(
    u,
    mesh: Mesh,
    V: float,
    proj_tol: float = 1e-12,
    fixed: np.ndarray | None = None,
    max_bisections: int = 200,
) -> np.ndarray:
    """Return ``max(u + lam, 0)`` with ``lam`` chosen so the integral equals ``V``.

    Nodes in ``fixed`` keep their given values and are not shifted.  The scalar
    ``lam`` is bracketed and bisected until the set of positive nodes settles,
    then solved for in closed form on that set.
    """
    if V < 0:
        raise ValueError(f"target volume must be nonnegative, got {V}")
    u = np.asarray(u, dtype=float)
    w = mesh.nodal_weights
    free = np.ones(mesh.n_nodes, dtype=bool)
    if fixed is not None and len(fixed):
        free[fixed] = False
    out = u.copy()
    uf, wf = u[free], w[free]
    V_free = V - float(w[~free] @ u[~free])
    if V_free < -proj_tol:
        raise ProjectionError("fixed nodes alone exceed the target volume")
    if V_free <= 0:
        out[free] = 0.0
        return out

    def vol(lam):
        return float(wf @ np.maximum(uf + lam, 0.0))

    clamped = np.maximum(uf, 0.0)
    if abs(float(wf @ clamped) - V_free) <= 0.5 * proj_tol:
        out[free] = clamped
        return out

    lo = -float(uf.max())
    hi = -float(uf.min()) + V_free / float(wf.sum())
    if not (vol(lo) <= V_free <= vol(hi)):
        raise ProjectionError("could not bracket the volume multiplier")
    lam = 0.5 * (lo + hi)
    for _ in range(max_bisections):
        lam = 0.5 * (lo + hi)
        active = uf + lam > 0
        if active.any():
            exact = (V_free - float(wf[active] @ uf[active])) / float(wf[active].sum())
            if np.array_equal(uf + exact > 0, active):
                lam = exact
                break
        if vol(lam) < V_free:
            lo = lam
        else:
            hi = lam
    res = np.maximum(uf + lam, 0.0) + 0.0
    if abs(float(wf @ res) - V_free) > proj_tol * max(1.0, V):
        raise ProjectionError(
            f"volume error {abs(float(wf @ res) - V_free):.3e} exceeds proj_tol"
        )
    out[free] = res
    return out


def constrained_advance(
    d: Droplet, ops: Operators, config: SchemeConfig, spec: ConstraintSpec | None = None
) -> Droplet:
    """One constrained CN step for a single droplet.

    The target volume defaults to the droplet's current volume.  The
    adhesion term of ``config`` (if any) is included in the objective.
    """
    V = d.volume if spec is None else spec.target_volume
    tol = 1e-12 if spec is None else spec.proj_tol
    state = StepState(d.u_prev, d.u_prev2, 1, config.h)
    fixed = config.dirichlet_nodes

    def project(v):
        return project_volume_nonneg(v, ops.mesh, V, tol, fixed=fixed)

    res = descent_minimize(
        lambda v: evaluate_I(v, state, ops, config),
        lambda v: gradient_I(v, state, ops, config),
        2.0 * d.u_prev - d.u_prev2,
        config,
        metric=ops.weights / config.h**2,
        project=project,
    )
    return Droplet(d.id, res.u, d.u_prev, V, res.converged)


def detect_merge(droplets: list[Droplet], mesh: Mesh, support_tol: float = 0.0) -> list[Droplet]:
    """Merge droplets whose supports ``{u > support_tol}`` share a node.

    Contact is closed transitively (union-find over the touching pairs).
    Merged droplets sum their histories and volumes and keep the lowest id.
    """
    n = len(droplets)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    supports = [np.asarray(d.u_prev) > support_tol for d in droplets]
    for i in range(n):
        for j in range(i + 1, n):
            if np.any(supports[i] & supports[j]):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[Droplet]] = {}
    for i, d in enumerate(droplets):
        groups.setdefault(find(i), []).append(d)
    merged = []
    for members in groups.values():
        if len(members) == 1:
            merged.append(members[0])
            continue
        members.sort(key=lambda d: d.id)
        merged.append(
            Droplet(
                members[0].id,
                np.sum([d.u_prev for d in members], axis=0),
                np.sum([d.u_prev2 for d in members], axis=0),
                float(sum(d.volume for d in members)),
                all(d.converged for d in members),
            )
        )
    return sorted(merged, key=lambda d: d.id)


def droplet_from_fields(id: int, u0, u1, mesh: Mesh) -> Droplet:
    return Droplet(id, np.asarray(u1, float), np.asarray(u0, float), integrate(mesh, u1))


__all__ = [
    "ConstraintSpec",
    "Droplet",
    "ProjectionError",
    "constrained_advance",
    "detect_merge",
    "droplet_from_fields",
    "project_volume_nonneg",
]
