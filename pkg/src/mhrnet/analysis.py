"""Derived constants, coupling thresholds, gap measurement, and rate fitting.

Everything here is a pure function of its arguments.  The constants follow
the dissipativity and synchronization estimates: the quasi-norm obeys a
Gronwall envelope with rate ``lam`` and asymptote ``M |Omega| / (lam *
min(C1, 1))``, and pairwise gaps decay exponentially at rate ``kappa`` once
the coupling strengths exceed (Pmin, Qmin).
"""

import math
from dataclasses import dataclass

import numpy as np

from .grid import norm_l2, norm_l4, seminorm_h1, smooth_field

__all__ = [
    "DerivedConstants",
    "FitResult",
    "EnvelopeCheck",
    "FitWindowError",
    "compute_constants",
    "pairwise_gap",
    "fit_decay_rate",
    "estimate_async_degree",
    "check_absorbing_envelope",
    "estimate_gn_constant",
]

# interpolation index theta(n) = n/4 for the L4-H1-L2 interpolation
THETA_BY_DIM = {1: 0.25, 2: 0.5, 3: 0.75}


class FitWindowError(ValueError):
    """Too few usable samples remain after transient and floor trimming."""


@dataclass(frozen=True)
class DerivedConstants:
    """All constants computed from Parameters, |Omega| and C*."""

    C1: float
    C2: float
    lam: float
    M: float
    K: float
    Cmult: float
    Pmin: float
    Qmin: float
    xi: float
    kappa: float
    cstar: float
    omega_measure: float

    @property
    def envelope_asymptote(self):
        return self.M * self.omega_measure / (self.lam * min(self.C1, 1.0))

    @property
    def envelope_prefactor(self):
        return max(self.C1, 1.0) / min(self.C1, 1.0)

    def as_dict(self):
        d = {k: getattr(self, k) for k in (
            "C1", "C2", "lam", "M", "K", "Cmult", "Pmin", "Qmin",
            "xi", "kappa", "cstar", "omega_measure",
        )}
        d["envelope_asymptote"] = self.envelope_asymptote
        return d


def compute_constants(p, omega_measure, cstar=1.0):
    """Evaluate every derived constant and both coupling thresholds.

    cstar is the interpolation-inequality constant of the domain; it has no
    closed form, so it is an input (see estimate_gn_constant for an
    empirical lower bound).
    """
    if not omega_measure > 0:
        raise ValueError("omega_measure must be positive")
    if not cstar > 0:
        raise ValueError("cstar must be positive")
    b, r, k2, beta, delta = p.b, p.r, p.k2, p.beta, p.delta
    gam, k1, m = p.gamma, p.k1, p.m

    C1 = (beta ** 2 / 2.0 + 1.0 / (2.0 * k2 ** 3) + 4.0) / b
    lam = 0.5 * min(1.0, r, k2)
    C2 = 0.25 * (C1 * k1 * (abs(p.c) + gam ** 2 / delta) + 0.25) ** 2
    M = m * (
        C2
        + (C1 * p.a) ** 4
        + C1 * p.Je ** 2
        + (C1 ** 2 * (2.0 + 1.0 / r) + C1) ** 2
        + 2.0 * p.alpha ** 2
        + p.q ** 2 * p.ue ** 2 / r
        + p.q ** 4 / r ** 2
    )
    base = M / (lam * min(C1, 1.0))
    K = (base + math.sqrt(base)) * omega_measure + 1.0

    Cmult = 8.0 * beta ** 2 / b
    Pmin = (
        4.0 * p.a ** 2 / b
        + Cmult * (1.0 + 1.0 / r)
        + (1.0 / (2.0 * Cmult)) * (1.0 + p.q ** 2 / r)
        + k1 * (abs(p.c) + gam ** 2 / (4.0 * delta))
    ) / m
    Qmin = (
        (1.0 + 32.0 * beta ** 2 * k1 ** 2 * gam ** 2 / b ** 2)
        + (K ** 2 / (8.0 * p.eta2 ** 3))
        * (64.0 * beta ** 2 * cstar * k1 ** 2 * delta ** 2 / b ** 2) ** 4
    ) / (2.0 * m)
    xi = 2.0 * (m * p.P - m * Pmin)
    kappa = min(xi, 1.0, r / 2.0, 2.0 * k2)
    return DerivedConstants(
        C1=C1, C2=C2, lam=lam, M=M, K=K, Cmult=Cmult,
        Pmin=Pmin, Qmin=Qmin, xi=xi, kappa=kappa,
        cstar=cstar, omega_measure=omega_measure,
    )


def pairwise_gap(net, g, i, j):
    """Squared E-norm gap ||u_i-u_j||^2 + ||v_i-v_j||^2 + ||w_i-w_j||^2 + ||rho_i-rho_j||^2."""
    if i == j:
        raise ValueError("pairwise gap needs two distinct neurons")
    if not (0 <= i < net.m and 0 <= j < net.m):
        raise IndexError("neuron index out of range")
    si, sj = net.neurons[i], net.neurons[j]
    return (
        norm_l2(si.u - sj.u, g) ** 2
        + norm_l2(si.v - sj.v, g) ** 2
        + norm_l2(si.w - sj.w, g) ** 2
        + norm_l2(si.rho - sj.rho, g) ** 2
    )


@dataclass(frozen=True)
class FitResult:
    rate: float
    window: tuple        # (t_start, t_end) actually used by the fit
    n_samples: int
    residual: float      # rms residual of log(gap) about the fitted line
    decayed: bool        # False when the fitted slope was nonnegative


def fit_decay_rate(times, gaps, floor=1e-20, transient_fraction=0.3):
    """Least-squares exponential rate of a positive gap time series.

    Discards the leading transient_fraction of samples (a stand-in for the
    finite settling time of the estimates) and everything from the first
    sample below `floor` on (squared norms bottom out near round-off).  A
    nondecaying series is reported as rate 0 with decayed=False rather than
    as an error.
    """
    times = np.asarray(times, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    if times.shape != gaps.shape or times.ndim != 1:
        raise ValueError("times and gaps must be equal-length 1-d arrays")
    if times.size < 40:
        raise FitWindowError("need at least 40 samples, got %d" % times.size)
    if np.any(gaps <= 0):
        raise ValueError("gaps must be positive; filter zeros before fitting")
    start = int(math.floor(transient_fraction * times.size))
    below = np.nonzero(gaps[start:] < floor)[0]
    end = start + below[0] if below.size else times.size
    t = times[start:end]
    y = np.log(gaps[start:end])
    if t.size < 20:
        raise FitWindowError(
            "only %d usable samples between transient and floor" % t.size
        )
    slope, intercept = np.polyfit(t, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * t + intercept)) ** 2)))
    if slope >= 0:
        return FitResult(0.0, (float(t[0]), float(t[-1])), t.size, resid, False)
    return FitResult(float(-slope), (float(t[0]), float(t[-1])), t.size, resid, True)


def estimate_async_degree(gap_trajectories, tail_window=0.1):
    """Finite-horizon estimate of the asynchronous degree.

    Sums, over pairs, the maximum gap within the trailing `tail_window`
    fraction of samples.  This is a surrogate for the limsup over infinite
    time and the sup over all initial data, so it is an estimate, not the
    mathematical quantity itself.
    """
    if not gap_trajectories:
        raise ValueError("need at least one gap trajectory")
    total = 0.0
    for gaps in gap_trajectories.values():
        gaps = np.asarray(gaps, dtype=float)
        if gaps.size == 0:
            raise ValueError("empty gap trajectory")
        n_tail = max(1, int(math.ceil(tail_window * gaps.size)))
        total += float(np.max(gaps[-n_tail:]))
    return total


@dataclass(frozen=True)
class EnvelopeCheck:
    passed: bool
    max_margin: float    # worst ratio of the sample to the envelope


def check_absorbing_envelope(times, energies, dc):
    """Verify the Gronwall envelope on quasi-norm samples y(t).

    The envelope is prefactor * exp(-lam*(t - t0)) * y(t0) + asymptote with
    the constants from `dc`.  Failure is a result, not an error.
    """
    times = np.asarray(times, dtype=float)
    y = np.asarray(energies, dtype=float)
    if times.shape != y.shape or times.size == 0:
        raise ValueError("times and energies must be equal-length nonempty arrays")
    envelope = (
        dc.envelope_prefactor * np.exp(-dc.lam * (times - times[0])) * y[0]
        + dc.envelope_asymptote
    )
    ratios = y / envelope
    max_margin = float(np.max(ratios)) if np.any(y != 0) else 0.0
    return EnvelopeCheck(passed=bool(np.all(y <= envelope)), max_margin=max_margin)


def estimate_gn_constant(g, n_samples=64, seed=0, smoothing_time=2e-3):
    """Empirical lower bound for the interpolation constant C* of the grid.

    Draws seeded random fields, smooths each one over a fixed physical
    diffusion time (so the estimate is stable under grid refinement), and
    maximizes ||R||_L4^2 / (|R|_H1^(2*theta) * ||R||_L2^(2*(1-theta))) with
    theta = dim/4.  The ratio is invariant under rescaling of R.  Fields
    with (numerically) zero gradient are skipped.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    theta = THETA_BY_DIM[g.dim]
    h_min = min(g.spacing)
    passes = max(1, int(round(smoothing_time / (h_min * h_min / 8.0))))
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_samples):
        f = rng.uniform(-1.0, 1.0, size=g.shape)
        f = smooth_field(f, g, passes)
        grad = seminorm_h1(f, g)
        l2 = norm_l2(f, g)
        if grad <= 1e-14 * max(l2, 1.0):
            continue
        ratio = norm_l4(f, g) ** 2 / (grad ** (2 * theta) * l2 ** (2 * (1 - theta)))
        if best is None or ratio > best:
            best = ratio
    if best is None:
        raise ValueError("all sample fields were degenerate (zero gradient)")
    return float(best)
