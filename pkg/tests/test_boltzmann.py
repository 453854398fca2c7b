import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinetic_imex.boltzmann import (
    SpectralError,
    bkw_profile,
    bkw_solution,
    build_spectral_kernel,
    dvm_collision,
    gain_loss_split,
    q_bilinear,
    q_boltzmann,
    radial_integral,
    radial_integral_gl,
)
from kinetic_imex.kinetic import KineticError, VelocityGrid, maxwellian_from_primitive, moment_array


@pytest.fixture(scope="module")
def k24():
    return build_spectral_kernel(VelocityGrid(2, 24, 8.0))


@pytest.fixture(scope="module")
def k32():
    return build_spectral_kernel(VelocityGrid(2, 32, 8.0))


def bimax(g, shift=1.0):
    vx, vy = g.v
    return 0.5 / (2 * np.pi) * (np.exp(-((vx - shift) ** 2 + (vy - 1) ** 2) / 2)
                                + np.exp(-((vx + shift) ** 2 + (vy + 0.5) ** 2) / 2))


@settings(max_examples=40)
@given(st.floats(0, 6), st.floats(0, 6), st.floats(0.5, 8))
def test_radial_integral_closed_form_matches_quadrature(a, b, R):
    assert radial_integral(a, b, R) == pytest.approx(radial_integral_gl(a, b, R), abs=1e-10)


def test_radial_integral_limits():
    R = 3.0
    assert radial_integral(0.0, 0.0, R) == pytest.approx(R * R / 2)
    # a -> b continuity of the two branches
    assert radial_integral(1.3, 1.3 + 1e-9, R) == pytest.approx(radial_integral(1.3, 1.3, R), rel=1e-6)


def test_bkw_is_a_density_with_unit_moments():
    g = VelocityGrid(2, 64, 12.0)
    for t in (0.0, 1.0, 10.0):
        m = moment_array(bkw_solution(t, g)[None], g)[0]
        assert np.allclose(m, [1, 0, 0, 1], atol=1e-10)
        assert bkw_solution(t, g).min() >= 0
    with pytest.raises(KineticError):
        bkw_profile(np.zeros(1), -1.0)


def test_operator_matches_bkw_time_derivative(k32):
    g = k32.grid
    t, h = 1.0, 1e-4
    dfdt = (bkw_solution(t + h, g) - bkw_solution(t - h, g)) / (2 * h)
    Q = q_boltzmann(bkw_solution(t, g), k32)
    assert np.abs(Q - dfdt).sum() / np.abs(dfdt).sum() < 1e-3


def test_maxwellian_annihilation(k32):
    g = k32.grid
    M = maxwellian_from_primitive([1.0], [[0.3, -0.2]], [1.0], g)[0]
    assert np.abs(q_boltzmann(M, k32)).sum() < 1e-7 * np.abs(M).sum()


def test_conservation(k32):
    g = k32.grid
    f = bimax(g)
    m = moment_array(q_boltzmann(f, k32)[None], g)[0]
    m0 = moment_array(f[None], g)[0]
    assert abs(m[0]) < 1e-13
    # momentum and energy are conserved only up to the spectral truncation
    assert np.all(np.abs(m[1:3]) < 1e-7 * np.abs(m0).max())
    assert abs(m[3]) < 1e-5 * m0[3]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.floats(-2, 2), st.floats(-2, 2))
def test_bilinear_symmetry(k24, seed, a, b):
    g = k24.grid
    rng = np.random.default_rng(seed)
    M1 = maxwellian_from_primitive([1.0], [rng.uniform(-1, 1, 2)], [rng.uniform(0.6, 1.2)], g)[0]
    M2 = maxwellian_from_primitive([0.7], [rng.uniform(-1, 1, 2)], [rng.uniform(0.6, 1.2)], g)[0]
    assert np.allclose(q_bilinear(M1, M2, k24), q_bilinear(M2, M1, k24), atol=1e-14)
    lhs = q_bilinear(a * M1 + b * M2, M1, k24)
    rhs = a * q_boltzmann(M1, k24) + b * q_bilinear(M2, M1, k24)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_rotation_and_reflection_equivariance(k24):
    f = bimax(k24.grid)
    Q = q_boltzmann(f, k24)
    # grid is symmetric under v -> -v (index reversal) and under swapping axes
    assert np.allclose(q_boltzmann(f[::-1, ::-1].copy(), k24), Q[::-1, ::-1], atol=1e-13)
    assert np.allclose(q_boltzmann(f.T.copy(), k24), Q.T, atol=1e-13)


def test_gain_loss_split(k24):
    g = k24.grid
    f = np.stack([bimax(g), bimax(g, 0.5)])
    gain, loss = gain_loss_split(f, k24)
    rho = moment_array(f, g)[:, 0]
    assert np.allclose(loss, rho)
    assert np.allclose(gain - loss[:, None, None] * f, q_boltzmann(f, k24))


def test_dvm_oracle_annihilates_maxwellian():
    M = lambda x, y: np.exp(-(x * x + y * y) / 2) / (2 * np.pi)  # noqa: E731
    pts = np.array([[0.0, 0.0], [1.0, 0.5], [-2.0, 1.0]])
    q = dvm_collision(M, pts, 8.0, 48, 48)
    assert np.max(np.abs(q)) < 1e-6


def test_spectral_agrees_with_dvm_oracle(k24):
    g = k24.grid
    pts = np.array([[0.25, 0.5], [-1.0, 1.2], [2.0, -0.7]])
    fa = lambda x, y: 0.5 / (2 * np.pi) * (np.exp(-((x - 1) ** 2 + (y - 1) ** 2) / 2)  # noqa: E731
                                           + np.exp(-((x + 1) ** 2 + (y + 0.5) ** 2) / 2))
    Q = q_boltzmann(fa(*g.v), k24)
    ix = [np.argmin(np.abs(g.nodes - p)) for p in pts.ravel()]
    on_grid = np.array([[g.nodes[ix[0]], g.nodes[ix[1]]], [g.nodes[ix[2]], g.nodes[ix[3]]],
                        [g.nodes[ix[4]], g.nodes[ix[5]]]])
    qd = dvm_collision(fa, on_grid, 8.0, 64, 64, R=k24.R)
    qs = np.array([Q[ix[0], ix[1]], Q[ix[2], ix[3]], Q[ix[4], ix[5]]])
    assert np.allclose(qs, qd, atol=2e-3 * np.abs(Q).max())


def test_kernel_cache_round_trip(tmp_path):
    g = VelocityGrid(2, 8, 4.0)
    k1 = build_spectral_kernel(g, cache_dir=tmp_path)
    assert list(tmp_path.iterdir())
    k2 = build_spectral_kernel(g, cache_dir=tmp_path)
    assert np.array_equal(k1.weights, k2.weights) and np.array_equal(k1.gather, k2.gather)


def test_kernel_errors():
    with pytest.raises(SpectralError):
        build_spectral_kernel(VelocityGrid(1, 8, 4.0))
    with pytest.raises(SpectralError):
        build_spectral_kernel(VelocityGrid(2, 9, 4.0))
    with pytest.raises(SpectralError):
        build_spectral_kernel(VelocityGrid(2, 8, 4.0), B0=0)
    with pytest.raises(SpectralError, match="GiB"):
        build_spectral_kernel(VelocityGrid(2, 256, 4.0))
    k = build_spectral_kernel(VelocityGrid(2, 8, 4.0))
    with pytest.raises(SpectralError):
        q_boltzmann(np.ones((6, 6)), k)
    with pytest.raises(SpectralError):
        q_bilinear(np.ones((8, 8)), np.ones((2, 8, 8)), k)
