"""Cell-centered rectangular grids, the Neumann Laplacian, and norms.

Fields are plain numpy arrays whose shape equals ``grid.cells`` (row-major
cell-center samples).  All quadrature is the midpoint rule.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "InvalidFieldError",
    "laplacian_neumann",
    "norm_l2",
    "norm_l4",
    "seminorm_h1",
    "quasi_norm",
    "energy_functional",
    "smooth_field",
]


class InvalidFieldError(ValueError):
    """A field does not match its grid or contains non-finite values."""


@dataclass(frozen=True)
class Grid:
    """Rectangular domain [0, L1] x ... with cell-centered samples.

    cells: number of cells per axis (1 or 2 axes, each >= 2).
    extents: physical length per axis.
    """

    cells: tuple
    extents: tuple

    def __post_init__(self):
        cells = tuple(int(n) for n in np.atleast_1d(self.cells))
        extents = tuple(float(L) for L in np.atleast_1d(self.extents))
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "extents", extents)
        if len(cells) not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2, got %d" % len(cells))
        if len(extents) != len(cells):
            raise ValueError("cells and extents must have matching length")
        if any(n < 2 for n in cells):
            raise ValueError("need at least 2 cells per axis")
        if any(not np.isfinite(L) or L <= 0.0 for L in extents):
            raise ValueError("extents must be positive and finite")

    @property
    def dim(self):
        return len(self.cells)

    @property
    def shape(self):
        return self.cells

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.extents, self.cells))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def measure(self):
        """|Omega|, the domain measure."""
        return float(np.prod(self.extents))

    def coordinates(self):
        """Cell-center coordinate arrays, one per axis (open meshgrid)."""
        axes = [
            (np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.spacing)
        ]
        return np.meshgrid(*axes, indexing="ij", sparse=True)

    def zeros(self):
        return np.zeros(self.cells)


def _check_field(f, g):
    f = np.asarray(f, dtype=float)
    if f.shape != g.shape:
        raise InvalidFieldError(
            "field shape %s does not match grid %s" % (f.shape, g.shape)
        )
    return f


def laplacian_neumann(f, g):
    """Second-order Laplacian with homogeneous Neumann (no-flux) boundaries.

    Boundary cells use ghost-cell reflection (ghost value = adjacent interior
    value), so the sum of the output over all cells telescopes to zero.
    """
    f = _check_field(f, g)
    out = np.zeros_like(f)
    for axis, h in enumerate(g.spacing):
        pad = [(1, 1) if a == axis else (0, 0) for a in range(f.ndim)]
        p = np.pad(f, pad, mode="edge")
        lo = [slice(None)] * f.ndim
        lo[axis] = slice(0, -2)
        hi = [slice(None)] * f.ndim
        hi[axis] = slice(2, None)
        out += (p[tuple(lo)] - 2.0 * f + p[tuple(hi)]) / (h * h)
    return out


def norm_l2(f, g):
    """Midpoint-rule L2 norm."""
    f = _check_field(f, g)
    return float(np.sqrt(np.sum(f * f) * g.cell_volume))


def norm_l4(f, g):
    """Midpoint-rule L4 norm."""
    f = _check_field(f, g)
    return float(np.sum(f ** 4) * g.cell_volume) ** 0.25


def seminorm_h1(f, g):
    """L2 norm of the central-difference gradient (one-sided at boundaries)."""
    f = _check_field(f, g)
    acc = np.zeros_like(f)
    for axis, h in enumerate(g.spacing):
        d = np.gradient(f, h, axis=axis, edge_order=1)
        acc += d * d
    return float(np.sqrt(np.sum(acc) * g.cell_volume))


def quasi_norm(net, g):
    """Mixed-power functional sum_i (||u||^2 + ||v||^2 + ||w||^2 + ||rho||_L4^4)."""
    total = 0.0
    for s in net.neurons:
        total += (
            norm_l2(s.u, g) ** 2
            + norm_l2(s.v, g) ** 2
            + norm_l2(s.w, g) ** 2
            + norm_l4(s.rho, g) ** 4
        )
    return total


def energy_functional(net, g, c1):
    """Weighted variant sum_i (c1 ||u||^2 + ||v||^2 + ||w||^2 + ||rho||_L4^4)."""
    if c1 <= 0:
        raise ValueError("c1 must be positive")
    total = 0.0
    for s in net.neurons:
        total += (
            c1 * norm_l2(s.u, g) ** 2
            + norm_l2(s.v, g) ** 2
            + norm_l2(s.w, g) ** 2
            + norm_l4(s.rho, g) ** 4
        )
    return total


def smooth_field(f, g, passes):
    """Apply `passes` explicit diffusion steps at the stable step h_min^2/8.

    Used to generate smooth initial data and smooth random sample fields.
    Each pass strictly reduces the H1 seminorm of a non-constant field.
    """
    f = _check_field(f, g).copy()
    h_min = min(g.spacing)
    dt = h_min * h_min / 8.0
    for _ in range(int(passes)):
        f += dt * laplacian_neumann(f, g)
    return f
