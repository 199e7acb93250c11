import numpy as np
import pytest

from mhrnet.grid import (
    Grid,
    InvalidFieldError,
    energy_functional,
    laplacian_neumann,
    norm_l2,
    norm_l4,
    quasi_norm,
    seminorm_h1,
    smooth_field,
)
from mhrnet.model import NetworkState, NeuronState


def unit_grid(n=64, dim=1):
    return Grid((n,) * dim, (1.0,) * dim)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid((1,), (1.0,))
    with pytest.raises(ValueError):
        Grid((8, 8, 8), (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        Grid((8,), (-1.0,))
    with pytest.raises(ValueError):
        Grid((8, 8), (1.0,))


def test_grid_geometry():
    g = Grid((10, 20), (2.0, 1.0))
    assert g.dim == 2
    assert g.spacing == (0.2, 0.05)
    assert g.measure == pytest.approx(2.0)
    assert g.cell_volume == pytest.approx(0.01)


def test_laplacian_constant_is_zero():
    g = unit_grid()
    out = laplacian_neumann(np.full(g.shape, 3.7), g)
    assert np.all(out == 0.0)


def test_laplacian_sum_telescopes_to_zero():
    g = unit_grid(48)
    rng = np.random.default_rng(0)
    f = rng.normal(size=g.shape)
    total = np.sum(laplacian_neumann(f, g))
    # interior fluxes cancel pairwise, boundary fluxes are zero
    assert abs(total) < 1e-9 * np.max(np.abs(f)) / min(g.spacing) ** 2


@pytest.mark.parametrize("dim", [1, 2])
def test_laplacian_cosine_eigenfunction(dim):
    errs = []
    for n in (32, 64):
        g = unit_grid(n, dim)
        x = g.coordinates()[0]
        f = np.cos(np.pi * x) * np.ones(g.shape)
        err = np.max(np.abs(laplacian_neumann(f, g) + np.pi ** 2 * f))
        errs.append(err)
    assert errs[0] < 0.01
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_laplacian_linearity():
    g = unit_grid(32)
    rng = np.random.default_rng(1)
    f, h = rng.normal(size=g.shape), rng.normal(size=g.shape)
    lhs = laplacian_neumann(2.5 * f - 1.5 * h, g)
    rhs = 2.5 * laplacian_neumann(f, g) - 1.5 * laplacian_neumann(h, g)
    assert np.allclose(lhs, rhs, atol=1e-9 / min(g.spacing) ** 2)


def test_laplacian_shape_mismatch():
    g = unit_grid(32)
    with pytest.raises(InvalidFieldError):
        laplacian_neumann(np.zeros(33), g)


def test_norms_on_unit_constant():
    g = unit_grid()
    ones = np.ones(g.shape)
    assert norm_l2(ones, g) == pytest.approx(1.0)
    assert norm_l4(ones, g) == pytest.approx(1.0)
    assert seminorm_h1(ones, g) == 0.0
    zeros = np.zeros(g.shape)
    assert norm_l2(zeros, g) == 0.0
    assert norm_l4(zeros, g) == 0.0


def test_norm_l2_linear_field():
    # integral of x^2 on [0, 1] is 1/3
    g = unit_grid(256)
    x = g.coordinates()[0]
    assert abs(norm_l2(x, g) - 1.0 / np.sqrt(3.0)) < 1e-4


def test_norm_homogeneity_and_positivity():
    g = unit_grid(32)
    rng = np.random.default_rng(2)
    f = rng.normal(size=g.shape)
    s = 3.7
    assert norm_l2(s * f, g) == pytest.approx(s * norm_l2(f, g))
    assert norm_l4(s * f, g) == pytest.approx(s * norm_l4(f, g))
    assert seminorm_h1(s * f, g) == pytest.approx(s * seminorm_h1(f, g))
    assert norm_l2(f, g) > 0


def test_quadrature_second_order_convergence():
    exact = np.sqrt(0.5 - np.sin(2.0) / 4.0)  # L2 norm of sin(x) on [0, 1]
    errs = []
    for n in (64, 128):
        g = unit_grid(n)
        x = g.coordinates()[0]
        errs.append(abs(norm_l2(np.sin(x), g) - exact))
    assert 3.0 < errs[0] / errs[1] < 5.0


def make_net(g, m, value=1.0):
    s = NeuronState(*(np.full(g.shape, value) for _ in range(4)))
    return NetworkState([s.copy() for _ in range(m)], 0.0)


def test_quasi_norm_examples():
    g = unit_grid()
    assert quasi_norm(make_net(g, 2, 0.0), g) == 0.0
    assert quasi_norm(make_net(g, 2, 1.0), g) == pytest.approx(8.0)


def test_quasi_norm_rho_quartic_scaling():
    g = unit_grid()
    base = make_net(g, 1, 0.0)
    base.neurons[0].rho[:] = 1.0
    scaled = base.copy()
    scaled.neurons[0].rho *= 3.0
    assert quasi_norm(scaled, g) == pytest.approx(81.0 * quasi_norm(base, g))


def test_energy_functional():
    g = unit_grid()
    net = make_net(g, 2, 0.7)
    assert energy_functional(net, g, 1.0) == pytest.approx(quasi_norm(net, g))
    assert energy_functional(make_net(g, 2, 0.0), g, 5.0) == 0.0
    net1 = make_net(g, 1, 0.0)
    net1.neurons[0].u[:] = 1.0
    assert energy_functional(net1, g, 5.0) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        energy_functional(net, g, 0.0)


def test_smoothing_reduces_h1_monotonically():
    g = unit_grid(64)
    rng = np.random.default_rng(3)
    f = rng.uniform(-1, 1, size=g.shape)
    norms = [seminorm_h1(f, g)]
    for _ in range(4):
        f = smooth_field(f, g, 1)
        norms.append(seminorm_h1(f, g))
    assert all(b < a for a, b in zip(norms, norms[1:]))
