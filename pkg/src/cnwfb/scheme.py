"""Two-level variational time stepping.

Each step minimizes a functional built from the two previous time levels
``u_{m-1}`` and ``u_{m-2}``:

* ``CN``  -- Crank-Nicolson type: kinetic term plus the averaged gradient
  term ``1/4 |grad(u + u_{m-2})|^2``,
* ``DMF`` -- the classical discrete Morse flow with ``1/2 |grad u|^2``.

Without adhesion both functionals are quadratic, so a step is one symmetric
positive definite linear solve (conjugate gradients).  With adhesion the
smoothed term ``Q^2/2 int B_eps(u)`` is added and the step is computed by
preconditioned steepest descent.  The nonnegativity obstacle is enforced by
the nodal cutoff ``max(u, 0)`` after the minimization.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .adhesion import AdhesionProfile
from .descent import DescentResult, descent_minimize
from .mesh import Mesh, assemble_mass, assemble_stiffness

log = logging.getLogger(__name__)


class SchemeVariant(str, enum.Enum):
    CN = "cn"
    DMF = "dmf"


class ConvergenceError(RuntimeError):
    """A linear solve failed to reach the requested residual."""


@dataclass
class SchemeConfig:
    """Parameters of one time-stepping run.

    ``dirichlet_nodes``/``dirichlet_values`` pin the trace; ``boundary_hook``,
    if given, maps a time ``t`` to the trace values at that time instead.
    """

    variant: SchemeVariant = SchemeVariant.CN
    h: float = 1e-3
    cutoff: bool = False
    adhesion_Q: float = 0.0
    adhesion_eps: float = 0.05
    dirichlet_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dirichlet_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    boundary_hook: Callable[[float], np.ndarray] | None = None
    linear_tol: float = 1e-12
    descent_tol: float = 1e-10
    max_iters: int = 10000

    def __post_init__(self):
        self.variant = SchemeVariant(self.variant)
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.adhesion_Q < 0:
            raise ValueError(f"adhesion_Q must be nonnegative, got {self.adhesion_Q}")
        if self.adhesion_Q > 0 and not self.adhesion_eps > 0:
            raise ValueError("adhesion_eps must be positive when adhesion_Q > 0")
        self.dirichlet_nodes = np.asarray(self.dirichlet_nodes, dtype=np.int64)
        self.dirichlet_values = np.asarray(self.dirichlet_values, dtype=float)
        if self.dirichlet_values.shape != self.dirichlet_nodes.shape:
            raise ValueError("dirichlet_values must match dirichlet_nodes")

    @classmethod
    def for_mesh(cls, mesh: Mesh, u0: np.ndarray, **kwargs) -> "SchemeConfig":
        """Config whose Dirichlet trace is frozen at ``u0`` on the mesh boundary."""
        nodes = np.asarray(mesh.boundary, dtype=np.int64)
        return cls(dirichlet_nodes=nodes, dirichlet_values=np.asarray(u0)[nodes], **kwargs)

    @cached_property
    def adhesion(self) -> AdhesionProfile | None:
        if self.adhesion_Q > 0:
            return AdhesionProfile(self.adhesion_eps)
        return None

    def boundary_values(self, t: float) -> np.ndarray:
        if self.boundary_hook is not None:
            return np.asarray(self.boundary_hook(t), dtype=float)
        return self.dirichlet_values


@dataclass(frozen=True)
class StepState:
    """History ``u_prev = u_m``, ``u_prev2 = u_{m-1}`` at step index ``m``."""

    u_prev: np.ndarray
    u_prev2: np.ndarray
    m: int
    h: float

    @property
    def t(self) -> float:
        return self.m * self.h


class Operators:
    """Mass and stiffness matrices of a mesh plus cached reduced systems."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.M = assemble_mass(mesh)
        self.K = assemble_stiffness(mesh)
        self.weights = mesh.nodal_weights
        self._systems: dict = {}

    @property
    def n(self) -> int:
        return self.mesh.n_nodes

    def reduced(self, variant: SchemeVariant, h: float, fixed: np.ndarray):
        key = (SchemeVariant(variant), float(h), fixed.tobytes())
        if key not in self._systems:
            stiff = 0.5 if key[0] is SchemeVariant.CN else 1.0
            A = (self.M / h**2 + stiff * self.K).tocsr()
            free = np.setdiff1d(np.arange(self.n), fixed)
            self._systems[key] = (A[free][:, free].tocsr(), A[free][:, fixed].tocsr(), free)
        return self._systems[key]


def initialize(u0, v0, h: float, cutoff: bool = False) -> StepState:
    """First two levels: ``u_0`` and the forward difference ``u_1 = u_0 + h v_0``."""
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if u0.shape != v0.shape:
        raise ValueError(f"u0 has shape {u0.shape} but v0 has shape {v0.shape}")
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    u1 = u0 + h * v0
    if cutoff:
        if u0.min(initial=0.0) < 0:
            raise ValueError("u0 must be nonnegative when the cutoff is active")
        if u1.min(initial=0.0) < 0:
            raise ValueError("u0 + h*v0 must be nonnegative when the cutoff is active")
    return StepState(u1, u0.copy(), 1, float(h))


def _adhesion_energy(u, ops: Operators, config: SchemeConfig | None) -> float:
    if config is None or config.adhesion is None:
        return 0.0
    return 0.5 * config.adhesion_Q**2 * float(ops.weights @ config.adhesion.B(u))


def _adhesion_force(u, ops: Operators, config: SchemeConfig | None):
    if config is None or config.adhesion is None:
        return 0.0
    return 0.5 * config.adhesion_Q**2 * ops.weights * config.adhesion.beta(u)


def evaluate_I(u, state: StepState, ops: Operators, config: SchemeConfig | None = None) -> float:
    """Crank-Nicolson type functional, plus the lumped adhesion term when ``Q > 0``."""
    h = state.h
    d = u - 2.0 * state.u_prev + state.u_prev2
    s = u + state.u_prev2
    return (
        float(d @ (ops.M @ d)) / (2.0 * h * h)
        + 0.25 * float(s @ (ops.K @ s))
        + _adhesion_energy(u, ops, config)
    )


def positive_elements(mesh: Mesh, *fields) -> np.ndarray:
    """Elements with at least one vertex strictly positive in any of ``fields``."""
    flag = np.zeros(mesh.n_nodes, dtype=bool)
    for f in fields:
        flag |= np.asarray(f) > 0
    return flag[mesh.cells].any(axis=1)


def evaluate_J_restricted(
    u, state: StepState, ops: Operators, config: SchemeConfig | None = None
) -> float:
    """Like :func:`evaluate_I` with the kinetic term restricted to the positivity union.

    The union of ``{u>0}``, ``{u_{m-1}>0}`` and ``{u_{m-2}>0}`` is realized by
    element flags from :func:`positive_elements`.  Used for evaluation only;
    it is never minimized.
    """
    h = state.h
    mask = positive_elements(ops.mesh, u, state.u_prev, state.u_prev2)
    Ms = assemble_mass(ops.mesh, element_mask=mask)
    d = u - 2.0 * state.u_prev + state.u_prev2
    s = u + state.u_prev2
    return (
        float(d @ (Ms @ d)) / (2.0 * h * h)
        + 0.25 * float(s @ (ops.K @ s))
        + _adhesion_energy(u, ops, config)
    )


def evaluate_DMF(u, state: StepState, ops: Operators, config: SchemeConfig | None = None) -> float:
    h = state.h
    d = u - 2.0 * state.u_prev + state.u_prev2
    return (
        float(d @ (ops.M @ d)) / (2.0 * h * h)
        + 0.5 * float(u @ (ops.K @ u))
        + _adhesion_energy(u, ops, config)
    )


def _zero_fixed(g: np.ndarray, config: SchemeConfig | None) -> np.ndarray:
    if config is not None:
        g[config.dirichlet_nodes] = 0.0
    return g


def gradient_I(u, state: StepState, ops: Operators, config: SchemeConfig | None = None):
    """Gradient of :func:`evaluate_I` with respect to nodal values; Dirichlet rows zeroed."""
    h = state.h
    g = ops.M @ (u - 2.0 * state.u_prev + state.u_prev2) / (h * h)
    g = g + 0.5 * (ops.K @ (u + state.u_prev2)) + _adhesion_force(u, ops, config)
    return _zero_fixed(g, config)


def gradient_DMF(u, state: StepState, ops: Operators, config: SchemeConfig | None = None):
    h = state.h
    g = ops.M @ (u - 2.0 * state.u_prev + state.u_prev2) / (h * h)
    g = g + ops.K @ u + _adhesion_force(u, ops, config)
    return _zero_fixed(g, config)


def _cg_solve(A: sp.csr_matrix, b: np.ndarray, x0: np.ndarray, config: SchemeConfig) -> np.ndarray:
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    x = x0
    rel = np.inf
    # the recursive CG residual can drift from the true one; allow one restart
    for _ in range(2):
        x, info = cg(A, b, x0=x, rtol=config.linear_tol, atol=0.0, maxiter=config.max_iters)
        rel = float(np.linalg.norm(b - A @ x)) / bnorm
        if info == 0 and rel <= config.linear_tol:
            return x
    raise ConvergenceError(
        f"conjugate gradients did not converge: relative residual {rel:.3e} "
        f"> linear_tol {config.linear_tol:.1e} within {config.max_iters} iterations"
    )


def _linear_step(state: StepState, ops: Operators, config: SchemeConfig, variant) -> np.ndarray:
    if config.adhesion is not None:
        raise ValueError("linear steps require adhesion_Q = 0")
    h = state.h
    fixed = config.dirichlet_nodes
    A_ff, A_fd, free = ops.reduced(variant, h, fixed)
    pred = 2.0 * state.u_prev - state.u_prev2
    rhs = ops.M @ pred / (h * h)
    if variant is SchemeVariant.CN:
        rhs = rhs - 0.5 * (ops.K @ state.u_prev2)
    u = np.empty(ops.n)
    u_d = config.boundary_values((state.m + 1) * h)
    u[fixed] = u_d
    b = rhs[free] - A_fd @ u_d
    u[free] = _cg_solve(A_ff, b, pred[free], config)
    return u


def cn_step_linear(state: StepState, ops: Operators, config: SchemeConfig) -> np.ndarray:
    """Minimizer of the unrestricted CN functional (its Euler-Lagrange system)."""
    return _linear_step(state, ops, config, SchemeVariant.CN)


def dmf_step_linear(state: StepState, ops: Operators, config: SchemeConfig) -> np.ndarray:
    """Minimizer of the unrestricted discrete Morse flow functional."""
    return _linear_step(state, ops, config, SchemeVariant.DMF)


def cutoff(u) -> np.ndarray:
    # + 0.0 maps -0.0 to 0.0
    return np.maximum(np.asarray(u, dtype=float), 0.0) + 0.0


def adhesion_step(state: StepState, ops: Operators, config: SchemeConfig) -> DescentResult:
    """One step with the adhesion term, by descent from the adhesion-free minimizer."""
    plain = SchemeConfig(
        variant=config.variant,
        h=config.h,
        dirichlet_nodes=config.dirichlet_nodes,
        dirichlet_values=config.dirichlet_values,
        boundary_hook=config.boundary_hook,
        linear_tol=config.linear_tol,
        max_iters=config.max_iters,
    )
    u_init = _linear_step(state, ops, plain, config.variant)
    if config.variant is SchemeVariant.CN:
        f, g = evaluate_I, gradient_I
    else:
        f, g = evaluate_DMF, gradient_DMF
    return descent_minimize(
        lambda u: f(u, state, ops, config),
        lambda u: g(u, state, ops, config),
        u_init,
        config,
        metric=ops.weights / state.h**2,
    )


def advance(state: StepState, ops: Operators, config: SchemeConfig):
    """Compute the next level and the shifted history.

    Returns ``(u_next, new_state)`` where ``new_state.m == state.m + 1``.
    """
    if state.m < 1:
        raise ValueError("state must hold at least u_0 and u_1")
    if config.adhesion is None:
        u = _linear_step(state, ops, config, config.variant)
    else:
        res = adhesion_step(state, ops, config)
        if not res.converged:
            log.warning(
                "adhesion step %d did not converge (residual %.3e)", state.m + 1, res.stationarity
            )
        u = res.u
    if config.cutoff:
        u = cutoff(u)
    return u, StepState(u, state.u_prev, state.m + 1, state.h)
