"""Initial data, analytic oracles and the scenario registry."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import Mesh1D, Mesh2D


def _require_unit_interval(mesh: Mesh1D) -> None:
    if mesh.dim != 1 or not (
        np.isclose(mesh.nodes[0], 0.0, atol=1e-14) and np.isclose(mesh.nodes[-1], 1.0, atol=1e-14)
    ):
        raise ValueError("scenario requires a mesh of the interval (0, 1)")


def _require_unit_square(mesh: Mesh2D) -> None:
    if mesh.dim != 2:
        raise ValueError("scenario requires a 2D mesh")
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    if not (np.allclose(lo, 0.0, atol=1e-14) and np.allclose(hi, 1.0, atol=1e-14)):
        raise ValueError("scenario requires a mesh of the unit square")


def string_profile(x):
    x = np.asarray(x, dtype=float)
    return np.where(x < 0.25, 4.0 * x + 0.2, -(4.0 / 3.0) * (x - 1.0) + 0.2)


def string_obstacle_ic(mesh: Mesh1D):
    """Plucked string with both ends held at 0.2, released from rest."""
    _require_unit_interval(mesh)
    u0 = string_profile(mesh.nodes)
    return u0, np.zeros_like(u0)


def analytic_standing_wave(x, t, n: int = 1):
    return np.sin(2 * n * np.pi * np.asarray(x)) * np.cos(2 * n * np.pi * t)


def analytic_standing_wave_2d(x, y, t):
    return np.sin(np.pi * np.asarray(x)) * np.sin(np.pi * np.asarray(y)) * np.cos(
        np.sqrt(2.0) * np.pi * t
    )


def standing_wave_ic(mesh: Mesh1D, n: int = 1):
    _require_unit_interval(mesh)
    if int(n) != n or n < 1:
        raise ValueError(f"frequency n must be a positive integer, got {n}")
    u0 = analytic_standing_wave(mesh.nodes, 0.0, int(n))
    u0[mesh.boundary_nodes] = 0.0
    return u0, np.zeros_like(u0)


def standing_wave_2d_ic(mesh: Mesh2D):
    _require_unit_square(mesh)
    x, y = mesh.vertices.T
    u0 = analytic_standing_wave_2d(x, y, 0.0)
    u0[mesh.boundary_vertices] = 0.0
    return u0, np.zeros_like(u0)


def cap_profile(r, radius: float, height: float, shape: str = "paraboloid"):
    r = np.asarray(r, dtype=float)
    inside = r < radius
    if shape == "paraboloid":
        val = height * (1.0 - (r / radius) ** 2)
    elif shape == "spherical":
        rho = (radius**2 + height**2) / (2.0 * height)
        val = np.sqrt(np.maximum(rho**2 - r**2, 0.0)) - (rho - height)
    else:
        raise ValueError(f"unknown cap shape {shape!r}")
    return np.where(inside, np.maximum(val, 0.0), 0.0)


def cap_volume(radius: float, height: float, shape: str = "paraboloid") -> float:
    if shape == "paraboloid":
        return 0.5 * np.pi * radius**2 * height
    return np.pi * height * (3.0 * radius**2 + height**2) / 6.0


def spherical_cap_ic(mesh: Mesh2D, center, radius: float, height: float, shape: str = "paraboloid"):
    """Nodal cap of base ``radius`` and apex ``height`` centred at ``center``.

    The default shape is the paraboloid ``height * (1 - (r/radius)^2)``;
    ``shape="spherical"`` gives a true spherical segment with the same base
    and apex.
    """
    cx, cy = center
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    if cx - radius < lo[0] or cx + radius > hi[0] or cy - radius < lo[1] or cy + radius > hi[1]:
        raise ValueError("cap does not fit inside the domain")
    if radius <= 0 or height <= 0:
        raise ValueError("cap radius and height must be positive")
    r = np.hypot(mesh.vertices[:, 0] - cx, mesh.vertices[:, 1] - cy)
    return cap_profile(r, radius, height, shape)


@dataclass(frozen=True)
class CapSpec:
    center: tuple[float, float]
    radius: float
    height: float
    velocity: tuple[float, float] = (0.0, 0.0)
    shape: str = "paraboloid"


@dataclass(frozen=True)
class Scenario:
    """Registry entry: mesh kind, initial data and default run parameters.

    ``initial_data(mesh, params)`` returns ``(u0, v0)``; for droplet
    scenarios it returns a list of per-droplet ``(u0, v0)`` pairs instead.
    """

    name: str
    dim: int
    initial_data: Callable
    defaults: dict = field(default_factory=dict)
    droplets: bool = False


def _droplet_data(mesh: Mesh2D, params: dict):
    """Per-cap ``(u0, v0)`` with ``u0 + h*v0`` the cap translated by ``h*velocity``."""
    _require_unit_square(mesh)
    h = params["h"]
    out = []
    for cap in params.get("caps", DEFAULT_CAPS):
        u0 = spherical_cap_ic(mesh, cap.center, cap.radius, cap.height, cap.shape)
        moved = (cap.center[0] + h * cap.velocity[0], cap.center[1] + h * cap.velocity[1])
        u1 = spherical_cap_ic(mesh, moved, cap.radius, cap.height, cap.shape)
        out.append((u0, (u1 - u0) / h))
    return out


DEFAULT_CAPS = (
    CapSpec(center=(0.28, 0.5), radius=0.15, height=0.12, velocity=(0.3, 0.0)),
    CapSpec(center=(0.72, 0.5), radius=0.15, height=0.12, velocity=(-0.3, 0.0)),
)

SCENARIOS: dict[str, Scenario] = {}


def register(scenario: Scenario) -> Scenario:
    SCENARIOS[scenario.name] = scenario
    return scenario


register(
    Scenario(
        "string-obstacle",
        1,
        lambda mesh, p: string_obstacle_ic(mesh),
        dict(h=1e-4, T=1.0, cutoff=True, scheme="cn"),
    )
)
register(
    Scenario(
        "standing-wave-1d",
        1,
        lambda mesh, p: standing_wave_ic(mesh, p.get("n", 1)),
        dict(h=1e-3, T=1.0, cutoff=False, scheme="cn", n=1),
    )
)
register(
    Scenario(
        "standing-wave-2d",
        2,
        lambda mesh, p: standing_wave_2d_ic(mesh),
        dict(h=5e-4, T=0.5, cutoff=False, scheme="cn", nx=53, ny=53),
    )
)
register(
    Scenario(
        "droplets",
        2,
        _droplet_data,
        dict(h=5e-3, T=0.5, cutoff=False, scheme="cn", nx=32, ny=32),
        droplets=True,
    )
)
