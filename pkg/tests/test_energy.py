import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnwfb.energy import (
    EnergyRecord,
    bound_energy,
    default_fb_eps,
    energy_ek,
    energy_estimate_rhs,
    energy_numeric,
    energy_record,
    fb_residual,
    free_boundary_set,
    front_nodes,
    is_contiguous,
    nodal_gradient_sq,
)
from cnwfb.mesh import assemble_mass, assemble_stiffness, build_uniform_interval, build_uniform_triangulation
from cnwfb.scenarios import standing_wave_ic

import oracles

MESH = build_uniform_interval(0, 1, 16)
M = assemble_mass(MESH)
K = assemble_stiffness(MESH)
Md = oracles.mass_1d(MESH.nodes)
Kd = oracles.stiffness_1d(MESH.nodes)


def test_energy_trivial_values():
    z = np.zeros(17)
    c = np.full(17, 3.0)
    assert energy_ek(z, z, 0.1, M, K) == 0.0
    assert energy_ek(c, c, 0.1, M, K) == pytest.approx(0.0, abs=1e-12)
    assert energy_numeric(z, z, 0.1, M, K) == 0.0


def test_standing_wave_initial_energy():
    mesh = build_uniform_interval(0, 1, 1000)
    u0, _ = standing_wave_ic(mesh, 1)
    E = energy_ek(u0, u0, 1e-3, assemble_mass(mesh), assemble_stiffness(mesh))
    assert E == pytest.approx((2 * np.pi) ** 2 / 2, rel=1e-5)


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1.0))
@settings(max_examples=40, deadline=None)
def test_energies_match_dense_oracle(seed, h):
    r = np.random.default_rng(seed)
    uk, ukm1 = r.normal(size=(2, 17))
    ref = oracles.dense_E(uk, ukm1, h, Md, Kd)
    assert energy_ek(uk, ukm1, h, M, K) == pytest.approx(ref, rel=1e-12)
    d = uk - ukm1
    ref_num = 0.5 * d @ Md @ d / h**2 + 0.5 * uk @ Kd @ uk
    assert energy_numeric(uk, ukm1, h, M, K) == pytest.approx(ref_num, rel=1e-12)
    assert energy_ek(uk, ukm1, h, M, K) >= 0 and energy_numeric(uk, ukm1, h, M, K) >= 0
    rec = energy_record(3, 3 * h, uk, ukm1, h, M, K)
    assert rec.total_ek == pytest.approx(rec.kinetic_ek + rec.potential_ek, rel=1e-12)
    assert rec.total_numeric == pytest.approx(ref_num, rel=1e-12)


@given(st.lists(st.floats(-10, 10), min_size=17, max_size=17))
@settings(max_examples=40, deadline=None)
def test_numeric_energy_of_static_field(vals):
    u = np.array(vals)
    assert energy_numeric(u, u, 0.3, M, K) == 0.5 * float(u @ (K @ u))


def test_bound_energy_and_rhs():
    r = np.random.default_rng(1)
    u0, u1, v0 = r.normal(size=(3, 17))
    assert bound_energy(u1, u0, 0.1, M, K) == pytest.approx(
        (u1 - u0) @ Md @ (u1 - u0) / 0.01 + 0.5 * u1 @ Kd @ u1, rel=1e-12
    )
    assert energy_estimate_rhs(u0, u1, v0, M, K) == pytest.approx(
        v0 @ Md @ v0 + 0.5 * (u0 @ Kd @ u0 + u1 @ Kd @ u1), rel=1e-12
    )


def test_record_layout():
    assert EnergyRecord.header() == ["m", "t", "kinetic_ek", "potential_ek", "total_ek", "total_numeric"]
    rec = EnergyRecord(1, 0.5, 1.0, 2.0, 3.0, 2.5)
    assert rec.row() == (1, 0.5, 1.0, 2.0, 3.0, 2.5)


def test_free_boundary_set_cases():
    assert len(free_boundary_set(np.full(5, 1.0), 0.5)) == 0
    assert free_boundary_set(np.zeros(5), 1e-9).tolist() == [0, 1, 2, 3, 4]
    assert free_boundary_set(np.array([1.0, 0.0, -1.0, 2.0]), 0.1).tolist() == [1, 2]
    with pytest.raises(ValueError):
        free_boundary_set(np.zeros(3), 0.0)


def test_free_boundary_band_matches_sign_scan():
    x = MESH.nodes
    u = np.maximum(np.abs(x - 0.4) - 0.1, 0.0)
    fb = free_boundary_set(u, 1e-12)
    scan = [i for i in range(17) if not u[i] > 0]
    assert fb.tolist() == scan
    assert is_contiguous(fb)
    assert not is_contiguous(np.array([1, 2, 5]))
    assert is_contiguous(np.array([], dtype=int))


def test_default_fb_eps_scales():
    assert default_fb_eps(np.array([0.0, -2.0, 1.0])) == pytest.approx(2e-8)
    assert default_fb_eps(np.zeros(3)) > 0


def test_residual_static_linear_field():
    u = 0.5 + 2.0 * MESH.nodes
    r = fb_residual((u, u, u), 0.1, MESH, 1.0, everywhere=True)
    assert np.allclose(r, 4.0)


def test_residual_traveling_wave():
    mesh = build_uniform_interval(0, 1, 400)
    h = 1e-3
    f = lambda s: np.sin(2 * np.pi * s)  # noqa: E731
    x = mesh.nodes
    snaps = [f(x - t) for t in (0.1 - h, 0.1, 0.1 + h)]
    r = fb_residual(snaps, h, mesh, 1.0, everywhere=True)
    interior = slice(5, -5)
    assert np.max(np.abs(r[interior])) <= 0.05 * (2 * np.pi) ** 2


def test_residual_only_at_front():
    u = np.maximum(MESH.nodes - 0.5, 0.0)
    r = fb_residual((u, u, u), 0.1, MESH, 1e-12)
    front = front_nodes(MESH, free_boundary_set(u, 1e-12))
    assert front.tolist() == [9]
    assert np.isfinite(r[9]) and np.isnan(r[np.arange(17) != 9]).all()


def test_nodal_gradient_sq_2d():
    mesh = build_uniform_triangulation(4, 4)
    u = 3.0 * mesh.vertices[:, 0] - 1.0 * mesh.vertices[:, 1]
    assert np.allclose(nodal_gradient_sq(mesh, u), 10.0)
