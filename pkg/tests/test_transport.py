import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kinetic_imex.kinetic import SpatialGrid, VelocityGrid
from kinetic_imex.transport import (
    METHODS,
    TransportConfig,
    TransportError,
    advection_derivative,
    flux_derivative,
    transport_moments,
)

VG = VelocityGrid(1, 6, 3.0)
finite = st.floats(-10, 10, allow_nan=False, width=64)


def field(nx):
    return arrays(np.float64, (nx,) + VG.shape, elements=finite)


def _err(method, nx):
    xg = SpatialGrid(nx)
    x = xg.x[:, None]
    f = np.exp(np.sin(2 * np.pi * x)) + 0 * VG.nodes[None]
    exact = VG.nodes[None] * 2 * np.pi * np.cos(2 * np.pi * x) * np.exp(np.sin(2 * np.pi * x))
    return np.max(np.abs(advection_derivative(f, TransportConfig(method, xg), VG) - exact))


@pytest.mark.parametrize("method,order", [("upwind1", 1), ("central2", 2), ("weno5", 5)])
def test_convergence_order(method, order):
    ns = [64, 128, 256]
    e = np.array([_err(method, n) for n in ns])
    slopes = np.log2(e[:-1] / e[1:])
    assert slopes[-1] > order - 0.3, slopes


@pytest.mark.parametrize("method", METHODS)
@settings(max_examples=30, deadline=None)
@given(f=field(12))
def test_conservative_form(method, f):
    cfg = TransportConfig(method, SpatialGrid(12))
    d = advection_derivative(f, cfg, VG)
    assert np.all(np.abs(d.sum(axis=0)) <= 1e-9 * (1 + np.abs(f).sum(axis=0) * np.abs(VG.nodes)))
    assert np.max(np.abs(advection_derivative(np.ones_like(f) * 3.7, cfg, VG))) < 1e-12


@pytest.mark.parametrize("method", METHODS)
@settings(max_examples=30, deadline=None)
@given(f=field(10), k=st.integers(1, 9))
def test_shift_equivariance(method, f, k):
    cfg = TransportConfig(method, SpatialGrid(10))
    d = advection_derivative(f, cfg, VG)
    assert np.allclose(advection_derivative(np.roll(f, k, axis=0), cfg, VG), np.roll(d, k, axis=0),
                       rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("method", METHODS)
@settings(max_examples=30, deadline=None)
@given(f=field(10))
def test_reflection_symmetry(method, f):
    # x -> -x together with v -> -v leaves v d/dx invariant
    cfg = TransportConfig(method, SpatialGrid(10))
    refl = lambda g: np.roll(g[::-1], 1, axis=0)[:, ::-1]  # noqa: E731  cell i -> -i, node j -> -j
    d = advection_derivative(f, cfg, VG)
    assert np.allclose(advection_derivative(refl(f), cfg, VG), refl(d), rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("method", ["upwind1", "central2"])
@settings(max_examples=30, deadline=None)
@given(f=field(8), g=field(8), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_linear_schemes_are_linear(method, f, g, a, b):
    cfg = TransportConfig(method, SpatialGrid(8))
    L = lambda h: advection_derivative(h, cfg, VG)  # noqa: E731
    assert np.allclose(L(a * f + b * g), a * L(f) + b * L(g), rtol=1e-10, atol=1e-8)


def test_weno_is_upwind_on_a_step():
    xg = SpatialGrid(20)
    f = np.where(np.arange(20) < 10, 1.0, 0.0)[:, None] * np.ones(VG.n)
    d = advection_derivative(f, TransportConfig("weno5", xg), VG)
    pos = VG.nodes > 0
    # information only travels downwind: far upstream of the jump at i=10 nothing moves
    assert np.allclose(d[3:7][:, pos], 0, atol=1e-10)
    assert np.allclose(d[13:17][:, ~pos], 0, atol=1e-10)


def test_flux_derivative_matches_advection_for_linear_flux():
    xg = SpatialGrid(32)
    cfg = TransportConfig("weno5", xg)
    f = 1 + 0.5 * np.sin(2 * np.pi * xg.x)
    vg = VelocityGrid(1, 2, 2.0)  # nodes -1, +1
    full = advection_derivative(np.stack([f, f], axis=1), cfg, vg)
    assert np.allclose(full[:, 1], flux_derivative(f, cfg, +1))
    assert np.allclose(full[:, 0], -flux_derivative(f, cfg, -1))


def test_transport_moments_and_homogeneous():
    xg = SpatialGrid(16)
    f = np.random.default_rng(0).uniform(0.5, 1, (16,) + VG.shape)
    m = transport_moments(f, TransportConfig("weno5", xg), VG)
    assert m.shape == (16, 3) and np.allclose(m.sum(axis=0), 0, atol=1e-12)
    one = SpatialGrid(1)
    with pytest.raises(TransportError):
        TransportConfig("weno5", one)
    with pytest.raises(TransportError):
        TransportConfig("spectral", xg)
    with pytest.raises(TransportError):
        advection_derivative(f[:3], TransportConfig("weno5", xg), VG)
