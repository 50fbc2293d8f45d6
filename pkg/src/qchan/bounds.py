"""Rate statements relating communication cost to estimation precision.

A family whose parameters can be estimated with mean squared error
``~ n^-beta`` needs at least ``(1 - eps) * v * beta / 2`` qubits per
``log2 n`` to be communicated (or simulated) with error threshold ``eps``.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class RateStatement:
    v: int
    beta: float
    eps_threshold: float
    rate: float
    kind: str = "simulation"

    def to_json(self):
        return asdict(self)


def _rate(v, beta, eps, kind):
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if v < 1:
        raise ValueError(f"v must be >= 1, got {v}")
    return RateStatement(int(v), float(beta), float(eps), (1.0 - eps) * v * beta / 2.0, kind)


def theorem1_rate(v, beta, eps=0.0):
    """Lower bound on the regularized simulation cost (qubits per log2 n)."""
    return _rate(v, beta, eps, "simulation")


def corollary1_rate(v, beta, eps=0.0):
    """Lower bound on the regularized communication cost; same formula."""
    return _rate(v, beta, eps, "communication")


@dataclass(frozen=True)
class CostFit:
    rate: float
    intercept: float
    residual: float
    n_used: tuple


def regularized_cost_estimate(samples):
    """Slope of cost (bits) against ``log2 n`` over the top decade of ``n``.

    The limsup in the definition of the regularized cost is replaced by the
    least-squares slope over samples with ``n >= n_max / 10``; when fewer
    than two samples fall in that decade the last two samples are used.
    ``residual`` is the RMS deviation of the fit.
    """
    pts = sorted((float(n), float(b)) for n, b in samples)
    ns = np.array([p[0] for p in pts])
    bits = np.array([p[1] for p in pts])
    if len(ns) < 3 or np.any(np.diff(ns) <= 0):
        raise ValueError("need at least 3 samples with strictly increasing n")
    if ns[-1] / ns[0] < 100:
        raise ValueError("samples must span at least two decades of n")
    top = ns >= ns[-1] / 10
    if top.sum() < 2:
        top = np.zeros_like(top)
        top[-2:] = True
    x = np.log2(ns[top])
    slope, icept = np.polyfit(x, bits[top], 1)
    resid = float(np.sqrt(np.mean((bits[top] - (slope * x + icept)) ** 2)))
    return CostFit(float(slope), float(icept), resid, tuple(ns[top].tolist()))


def fitted_cost_rate(samples):
    """Least-squares slope of bits against ``log2 n`` over all samples."""
    ns = np.array([float(n) for n, _ in samples])
    bits = np.array([float(b) for _, b in samples])
    return float(np.polyfit(np.log2(ns), bits, 1)[0])


def binary_entropy(p):
    """``h(p)`` in bits with ``h(0) = h(1) = 0``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    # minority mass; 1 - x is exact for x >= 0.5, so p and fl(1 - p) share m
    m = 1.0 - p if p >= 0.5 else 1.0 - (1.0 - p)
    if m == 0.0:
        return 0.0
    return -(m * math.log2(m) + (1.0 - m) * math.log2(1.0 - m))


def classify_beta(family):
    """``1`` for constant-support families, ``2`` for unitary ones, else ``"unknown"``.

    Never estimated from data: this records which class the family belongs to.
    """
    from .families import check_condition_support_constant

    if check_condition_support_constant(family):
        return 1
    if "unitary" in family.tags:
        return 2
    return "unknown"
