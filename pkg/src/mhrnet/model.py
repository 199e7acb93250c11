"""Model parameters, network state, and the continuous-time right-hand side.

The network couples m neuron cells all-to-all.  Each neuron carries four
fields on one shared grid: membrane potential u, spiking variable v,
bursting variable w, and memductance rho.  Only u and rho diffuse and only
u and rho receive network coupling.
"""

from dataclasses import dataclass, fields

import numpy as np

from .grid import InvalidFieldError, laplacian_neumann

__all__ = [
    "Parameters",
    "NeuronState",
    "NetworkState",
    "memductance",
    "reaction_rhs",
    "coupling_rhs",
    "full_rhs",
]

_POSITIVE = (
    "a", "b", "eta1", "eta2", "alpha", "beta",
    "q", "r", "delta", "k1", "k2", "Je",
)


@dataclass(frozen=True)
class Parameters:
    """All model scalars plus the neuron count m.

    The strictly positive group can be any positive constants; c, gamma and
    ue may be any reals; the coupling strengths P and Q may be zero to run
    uncoupled contrast experiments.
    """

    a: float = 1.0
    b: float = 1.0
    eta1: float = 1.0
    eta2: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    q: float = 1.0
    r: float = 1.0
    delta: float = 1.0
    k1: float = 1.0
    k2: float = 1.0
    Je: float = 1.0
    c: float = 1.0
    gamma: float = 1.0
    ue: float = 1.0
    P: float = 1.0
    Q: float = 1.0
    m: int = 2

    def __post_init__(self):
        for name in _POSITIVE:
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0.0:
                raise ValueError("parameter %r must be positive, got %r" % (name, val))
        for name in ("c", "gamma", "ue"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError("parameter %r must be finite" % name)
        for name in ("P", "Q"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0.0:
                raise ValueError("parameter %r must be nonnegative, got %r" % (name, val))
        if int(self.m) != self.m or self.m < 2:
            raise ValueError("parameter 'm' must be an integer >= 2, got %r" % (self.m,))
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def field_names(cls):
        return tuple(f.name for f in fields(cls))


@dataclass
class NeuronState:
    """The quadruple (u, v, w, rho) of fields on one shared grid."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        shape = self.u.shape
        for name in ("v", "w", "rho"):
            if getattr(self, name).shape != shape:
                raise ValueError("component %r has shape mismatch" % name)

    @property
    def components(self):
        return (("u", self.u), ("v", self.v), ("w", self.w), ("rho", self.rho))

    def copy(self):
        return NeuronState(self.u.copy(), self.v.copy(), self.w.copy(), self.rho.copy())


@dataclass
class NetworkState:
    """States of all m neurons plus the current time."""

    neurons: list
    t: float = 0.0

    def __post_init__(self):
        self.neurons = list(self.neurons)
        if not self.neurons:
            raise ValueError("network must contain at least one neuron")
        shape = self.neurons[0].u.shape
        for s in self.neurons:
            if s.u.shape != shape:
                raise ValueError("all neurons must share one grid")
        if self.t < 0.0:
            raise ValueError("time must be nonnegative")

    @property
    def m(self):
        return len(self.neurons)

    def copy(self):
        return NetworkState([s.copy() for s in self.neurons], self.t)

    def first_nonfinite(self):
        """(neuron index, component name) of the first non-finite entry, or None."""
        for i, s in enumerate(self.neurons):
            for name, arr in s.components:
                if not np.isfinite(arr).all():
                    return i, name
        return None


def memductance(rho, p):
    """Memristive flux coefficient phi(rho) = c + gamma*rho + delta*rho^2."""
    rho = np.asarray(rho, dtype=float)
    if not np.isfinite(rho).all():
        raise InvalidFieldError("memductance input contains non-finite values")
    return p.c + p.gamma * rho + p.delta * rho * rho


def reaction_rhs(s, p):
    """Pointwise reaction tendencies of (u, v, w, rho).

    Excludes diffusion and network coupling; non-finite values propagate.
    """
    u, v, w, rho = s.u, s.v, s.w, s.rho
    phi = p.c + p.gamma * rho + p.delta * rho * rho
    du = p.a * u * u - p.b * u ** 3 + v - w + p.Je - p.k1 * phi * u
    dv = p.alpha - p.beta * u * u - v
    dw = p.q * (u - p.ue) - p.r * w
    drho = u - p.k2 * rho
    return du, dv, dw, drho


def coupling_rhs(net, i, p):
    """All-to-all linear coupling terms for neuron i: (u-coupling, rho-coupling).

    The sums run over every j in a fixed index order (the j == i term is
    identically zero), which makes cross-neuron reductions bitwise
    reproducible and the synchronization manifold exactly invariant.
    """
    if not 0 <= i < net.m:
        raise IndexError("neuron index %d out of range for m=%d" % (i, net.m))
    ui = net.neurons[i].u
    ri = net.neurons[i].rho
    cu = np.zeros_like(ui)
    cr = np.zeros_like(ri)
    for s in net.neurons:
        cu += s.u - ui
        cr += s.rho - ri
    return p.P * cu, p.Q * cr


def full_rhs(net, p, g):
    """Complete tendency: reaction + coupling + diffusion, per neuron."""
    out = []
    for i, s in enumerate(net.neurons):
        du, dv, dw, drho = reaction_rhs(s, p)
        cu, cr = coupling_rhs(net, i, p)
        du = du + cu + p.eta1 * laplacian_neumann(s.u, g)
        drho = drho + cr + p.eta2 * laplacian_neumann(s.rho, g)
        out.append(NeuronState(du, dv, dw, drho))
    return NetworkState(out, net.t)
