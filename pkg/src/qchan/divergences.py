"""2-Renyi divergences of states and channels, in bits.

For channels with Choi operators ``A``, ``B`` (support of ``B`` containing
that of ``A``)::

    D2(A || B) = log2 || Tr_out[A B^+ A] ||_inf

The variational estimator maximizes the state divergence of
``(A (x) I)(psi)`` against ``(B (x) I)(psi)`` over pure inputs and never
touches the closed form.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .channels import tensor_channel
from .errors import DimensionError, InfiniteDivergenceError

LOG2E = math.log2(math.e)


@dataclass
class DivergenceReport:
    value_bits: float
    method: str
    witness: np.ndarray = None
    restarts_used: int = 0
    marginal: bool = False

    def to_json(self):
        out = {
            "value_bits": self.value_bits,
            "method": self.method,
            "restarts_used": self.restarts_used,
            "marginal": self.marginal,
        }
        if self.witness is not None:
            w = np.asarray(self.witness)
            out["witness"] = {"re": w.real.tolist(), "im": w.imag.tolist()}
        return out


@dataclass
class ErrorBound:
    """Upper bound on a diamond distance; ``trivial`` marks the fallback value 2."""

    value: float
    trivial: bool = False


def _check_pair(a, b):
    if (a.d_in, a.d_out) != (b.d_in, b.d_out):
        raise DimensionError("channels act on different spaces")


def _support_check(big, small, what):
    pb = linalg.support_projector(big)
    pa = linalg.support_projector(small)
    if not linalg.support_contains(pb, pa):
        raise InfiniteDivergenceError(f"support of {what} not contained: divergence is infinite")
    return pb


def _marginal(m):
    w = np.linalg.eigvalsh(m)
    scale = np.abs(w).max()
    cut = linalg.SUPPORT_REL_TOL * scale
    return bool(np.any((np.abs(w) > cut / 100) & (np.abs(w) < cut * 100)))


def d2_states(rho, sigma):
    """``log2 Tr[rho^2 sigma^+]`` for density matrices."""
    rho = linalg.hermitian(rho, 1e-10)
    sigma = linalg.hermitian(sigma, 1e-10)
    if rho.shape != sigma.shape:
        raise DimensionError("states have different dimensions")
    _support_check(sigma, rho, "rho in sigma")
    val = np.trace(rho @ rho @ linalg.pinv_on_support(sigma)).real
    return max(0.0, math.log2(val))


def rld_operator(a, b):
    """``Tr_out[A B^+ A]`` on ``H_in``; raises when ``supp A`` is not in ``supp B``."""
    _check_pair(a, b)
    _support_check(b.choi, a.choi, "Choi(A) in Choi(B)")
    m = a.choi @ linalg.pinv_on_support(b.choi) @ a.choi
    return linalg.hermitian(linalg.partial_trace(m, a.dims, keep="in"), 1e-8)


def excess_operator(a, b):
    """``Tr_out[(A-B) B^+ (A-B)]``, equal to ``Tr_out[A B^+ A] - I`` when supports nest."""
    _check_pair(a, b)
    _support_check(b.choi, a.choi, "Choi(A) in Choi(B)")
    diff = a.choi - b.choi
    m = diff @ linalg.pinv_on_support(b.choi) @ diff
    return linalg.hermitian(linalg.partial_trace(m, a.dims, keep="in"), 1e-8)


def d2_channels(a, b):
    """Closed-form channel divergence in bits (float).

    Evaluated as ``log2(1 + ||Tr_out[(A-B) B^+ (A-B)]||)`` so that tiny
    divergences keep their relative precision.
    """
    lam = float(np.linalg.eigvalsh(excess_operator(a, b))[-1])
    return max(0.0, math.log1p(max(lam, 0.0)) / math.log(2))


def d2_channels_closed(a, b):
    val = d2_channels(a, b)
    return DivergenceReport(val, "closed_form", marginal=_marginal(b.choi))


# ---------------------------------------------------------------------------
# variational estimate


def _induced_states(choi, ys, d_out):
    """``(I_out (x) Y) C (I_out (x) Y)^dagger`` for a stack of matrices ``Y``."""
    d = ys.shape[-1]
    k = np.einsum("ab,nij->naibj", np.eye(d_out), ys).reshape(len(ys), d_out * d, d_out * d)
    return k @ choi @ linalg.dagger(k)


def _batched_d2(rho, sigma, cond_cap=1e7):
    """State D2 (bits) for stacks; ill-conditioned candidates get ``-inf``."""
    w, u = np.linalg.eigh((sigma + linalg.dagger(sigma)) / 2)
    lam_max = w[:, -1:]
    keep = w > linalg.PINV_REL_TOL * lam_max
    inv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    pinv = (u * inv[:, None, :]) @ linalg.dagger(u)
    tr = np.einsum("nij,nji->n", rho @ rho, pinv).real
    vals = np.log2(np.maximum(tr, 1e-300))
    kept_min = np.where(keep, w, np.inf).min(axis=1)
    # support leak: rho weight outside the kept eigenspace of sigma
    proj_out = np.eye(rho.shape[-1]) - (u * keep[:, None, :]) @ linalg.dagger(u)
    leak = np.abs(np.einsum("nij,njk->nik", proj_out, rho)).max(axis=(1, 2))
    bad = (lam_max[:, 0] / kept_min > cond_cap) | (leak > 1e-8)
    vals[bad] = -np.inf
    return vals


def _to_y(x, d):
    y = (x[..., : d * d] + 1j * x[..., d * d:]).reshape(x.shape[:-1] + (d, d))
    return y / np.linalg.norm(x, axis=-1)[..., None, None]


def sphere_ascent(objective, x0, max_iter=200, step=0.1, grad_h=1e-6, tol=1e-13):
    """Projected gradient ascent on the unit sphere with step halving.

    ``objective`` maps a stack ``(m, k)`` of points to ``m`` values. Gradients
    are central differences evaluated in one batched call.
    """
    x = x0 / np.linalg.norm(x0)
    k = x.size
    fx = objective(x[None])[0]
    eye = np.eye(k)
    for _ in range(max_iter):
        stencil = np.concatenate([x + grad_h * eye, x - grad_h * eye])
        f = objective(stencil)
        if not np.all(np.isfinite(f)):
            break
        g = (f[:k] - f[k:]) / (2 * grad_h)
        g -= x * (g @ x)
        gn = np.linalg.norm(g)
        if gn < 1e-12:
            break
        improved = False
        while step > 1e-12:
            y = x + step * g / gn
            y /= np.linalg.norm(y)
            fy = objective(y[None])[0]
            if fy > fx:
                improved = fy - fx > tol
                x, fx = y, fy
                step *= 2.0
                break
            step /= 2.0
        if not improved:
            break
    return x, fx


def d2_channels_variational(a, b, restarts=64, seed=0x5EED, max_iter=200):
    """Multistart lower estimate of the channel divergence (bits)."""
    _check_pair(a, b)
    _support_check(b.choi, a.choi, "Choi(A) in Choi(B)")
    d, d_out = a.d_in, a.d_out

    def objective(xs):
        ys = _to_y(xs, d)
        return _batched_d2(_induced_states(a.choi, ys, d_out), _induced_states(b.choi, ys, d_out))

    best_x, best = None, -np.inf
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        x0 = rng.normal(size=2 * d * d)
        x, fx = sphere_ascent(objective, x0, max_iter=max_iter)
        if fx > best:
            best_x, best = x, fx
    value = max(0.0, float(best))
    witness = _to_y(best_x, d).reshape(-1) if best_x is not None else None
    closed = d2_channels(a, b)
    if value > closed + 1e-7:
        raise AssertionError(
            f"variational divergence {value} exceeds closed form {closed}; numerical failure"
        )
    return DivergenceReport(value, "variational", witness, restarts)


# ---------------------------------------------------------------------------
# identities and bounds


def check_posi(a, b):
    """Smallest eigenvalue of ``Tr_out[A B^+ A]`` (at least 1 for valid channels)."""
    w, _ = linalg.eig_hermitian(rld_operator(a, b))
    return float(w[0])


def check_rld2_identity(a, b):
    """``|(||Tr_out[A B^+ A]|| - 1) - ||Tr_out[(A-B) B^+ (A-B)]||_inf|``."""
    lhs = linalg.op_norm_inf(rld_operator(a, b)) - 1.0
    return abs(lhs - linalg.op_norm_inf(excess_operator(a, b)))


def check_additivity(a1, a2, b1, b2):
    """``|D2(a1 (x) b1 || a2 (x) b2) - D2(a1 || a2) - D2(b1 || b2)|``."""
    joint = d2_channels(tensor_channel(a1, b1), tensor_channel(a2, b2))
    return abs(joint - d2_channels(a1, a2) - d2_channels(b1, b2))


def pinsker_from_d2(d2_bits, n=1):
    """``min(2, sqrt(2 n D2 / log2 e))``."""
    return min(2.0, math.sqrt(max(0.0, 2.0 * n * d2_bits / LOG2E)))


def pinsker_error_upper_bound(a, b, n=1):
    """Upper bound on ``||A^(x)n - B^(x)n||_diamond`` from the divergence chain."""
    try:
        d2 = d2_channels(a, b)
    except InfiniteDivergenceError:
        return ErrorBound(2.0, trivial=True)
    return ErrorBound(pinsker_from_d2(d2, n))
