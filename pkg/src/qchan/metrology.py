"""Estimation simulators and the inaccuracy / mutual-information apparatus.

Estimates are summarized by an :class:`EstimatorDistribution`, conditioned
on the true parameter ``t``. The inaccuracy at confidence ``p`` is the
smallest radius ``delta`` with ``Pr[|T_hat - t| <= delta] >= p``.
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln
from scipy.stats import multinomial

from . import linalg
from .bounds import binary_entropy
from .channels import apply_channel, tensor_power
from .errors import DimensionError, PovmError

CUM_TOL = 1e-12
POVM_TOL = 1e-8
#: product strategies enumerate outcome types exactly up to this many classes
MAX_EXACT_TYPES = 200_000


@dataclass
class EstimatorDistribution:
    """Law of an estimate ``T_hat`` given the true value ``t``.

    ``kind == "discrete"``: ``points`` with ``probs``.
    ``kind == "sampled"``: ``points`` are i.i.d. draws, ``probs`` is None.
    """

    kind: str
    points: np.ndarray
    t: np.ndarray
    probs: np.ndarray = None
    seed: int = None

    def __post_init__(self):
        self.t = np.atleast_1d(np.asarray(self.t, dtype=float))
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[1] != self.t.size:
            raise DimensionError(f"estimates have dimension {pts.shape[1]}, t has {self.t.size}")
        self.points = pts
        if self.kind == "discrete":
            probs = np.asarray(self.probs, dtype=float)
            if probs.shape != (len(pts),):
                raise DimensionError("probs must have one entry per point")
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > CUM_TOL * max(1, len(probs)):
                raise ValueError("probabilities must be nonnegative and sum to 1")
            self.probs = probs
        elif self.kind == "sampled":
            if len(pts) == 0:
                raise ValueError("sampled distribution needs at least one sample")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")

    @property
    def weights(self):
        if self.kind == "discrete":
            return self.probs
        return np.full(len(self.points), 1.0 / len(self.points))

    @property
    def sample_count(self):
        return len(self.points) if self.kind == "sampled" else None

    def distances(self):
        return np.linalg.norm(self.points - self.t, axis=1)

    def mse(self):
        return float(self.weights @ self.distances() ** 2)

    def mse_matrix(self):
        dev = self.points - self.t
        return MseRecord.from_matrix((dev * self.weights[:, None]).T @ dev)


@dataclass
class MseRecord:
    matrix: np.ndarray
    trace: float

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        m = (m + m.T) / 2
        w = np.linalg.eigvalsh(m) if m.size else np.zeros(0)
        if w.size and w[0] < -1e-10 * max(1.0, abs(w[-1])):
            raise ValueError("MSE matrix is not PSD")
        return cls(m, float(np.trace(m)))

    def to_json(self):
        return {"matrix": self.matrix.tolist(), "trace": self.trace}


# ---------------------------------------------------------------------------
# exact Born-rule MSE


def _check_povm(effects, dim):
    total = np.zeros((dim, dim), dtype=complex)
    for m in effects:
        m = linalg.as_matrix(m)
        if m.shape != (dim, dim):
            raise DimensionError(f"effect of shape {m.shape}, expected {(dim, dim)}")
        if not linalg.is_psd(m, tol=1e-10):
            raise PovmError("effect is not positive semidefinite")
        total += m
    resid = np.abs(total - np.eye(dim)).max()
    if resid > POVM_TOL:
        raise PovmError(f"effects sum to identity only up to {resid:.3e}")


def _as_density(probe):
    a = np.asarray(probe, dtype=complex)
    if a.ndim == 1 or 1 in a.shape:
        psi = a.reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return np.outer(psi, psi.conj())
    return linalg.hermitian(a, 1e-10)


def born_distribution(probe, family, t, povm, n=1):
    """Estimate distribution of ``povm`` on ``(C_t^(x)n (x) I)(probe)``.

    ``povm`` is a list of ``(effect, estimate)`` pairs.
    """
    rho = _as_density(probe)
    chan = tensor_power(family(t), n)
    ref = rho.shape[0] // chan.d_in
    if ref * chan.d_in != rho.shape[0]:
        raise DimensionError(f"probe dimension {rho.shape[0]} is not a multiple of {chan.d_in}")
    out = apply_channel(chan, rho, ref_dim=ref)
    effects = [e for e, _ in povm]
    _check_povm(effects, out.shape[0])
    probs = np.array([np.trace(linalg.as_matrix(e) @ out).real for e in effects])
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    pts = np.array([np.atleast_1d(np.asarray(x, dtype=float)) for _, x in povm])
    return EstimatorDistribution("discrete", pts, family.check_point(t), probs)


def mse_matrix(probe, family, t, povm, n=1):
    """``V_ij = sum_k (t - t_k)_i (t - t_k)_j Tr[M_k (C_t^(x)n (x) I)(psi)]``."""
    return born_distribution(probe, family, t, povm, n).mse_matrix()


# ---------------------------------------------------------------------------
# inaccuracy and its inequalities


def inaccuracy(p, dist):
    """Smallest ``delta`` with ``Pr[|T_hat - t| <= delta] >= p``.

    For sampled distributions this is the upper empirical quantile: the
    ``ceil(p m)``-th smallest of ``m`` sample distances.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {p}")
    d = dist.distances()
    order = np.argsort(d, kind="stable")
    d = d[order]
    if dist.kind == "sampled":
        k = max(1, math.ceil(p * len(d) - CUM_TOL))
        return float(d[k - 1])
    cum = np.cumsum(dist.probs[order])
    idx = int(np.searchsorted(cum, p - CUM_TOL, side="left"))
    return float(d[min(idx, len(d) - 1)])


def chebyshev_bound_check(dist, p):
    """``(delta(p), sqrt(MSE / (1 - p)), ok)``."""
    lhs = inaccuracy(p, dist)
    rhs = math.sqrt(dist.mse() / (1.0 - p))
    return lhs, rhs, lhs <= rhs + 1e-12


@dataclass
class ContinuityResult:
    ok: bool
    skipped: bool
    lower: float = float("nan")
    middle: float = float("nan")
    upper: float = float("nan")


def continuity_check(dist_a, dist_b, eps, p):
    """``delta_a(p - eps) <= delta_b(p) <= delta_a(p + eps)``.

    ``eps`` bounds the trace-norm distance of the underlying states. When
    ``p - eps`` or ``p + eps`` leaves ``(0, 1)`` the check is skipped.
    """
    if not (0.0 < p - eps and p + eps < 1.0):
        return ContinuityResult(ok=True, skipped=True)
    lo = inaccuracy(p - eps, dist_a)
    mid = inaccuracy(p, dist_b)
    hi = inaccuracy(p + eps, dist_a)
    ok = lo <= mid + 1e-12 and mid <= hi + 1e-12
    return ContinuityResult(ok, False, lo, mid, hi)


def ball_volume(v, delta):
    if v < 1 or delta < 0:
        raise ValueError("need v >= 1 and delta >= 0")
    return (math.sqrt(math.pi) * delta) ** v / math.gamma(v / 2 + 1)


@dataclass
class MiBounds:
    bound1: float
    bound2: float
    condition_ok: bool
    ball: float


def mutual_info_lower_bounds(H_T, p, delta_p, v, box_volume):
    """Lower bounds (bits) on ``I(T_hat : T)`` for a prior on a box.

    ``H_T`` is the differential entropy of the prior in bits, ``delta_p``
    the worst-case inaccuracy. ``bound1`` is nan when the ball volume
    reaches ``2^v |T|``.
    """
    if not 0.0 < p < 1.0 or delta_p <= 0 or box_volume <= 0:
        raise ValueError("need p in (0, 1), delta_p > 0, box_volume > 0")
    b = ball_volume(v, delta_p)
    outer = 2.0 ** v * box_volume
    rest = outer - b
    cond = rest > 0 and math.log2((1 - p) / p) <= math.log2(rest / b)
    if rest > 0:
        bound1 = H_T - p * math.log2(b / p) - (1 - p) * math.log2(rest / (1 - p))
    else:
        bound1 = float("nan")
    bound2 = (
        H_T
        - p * v * math.log2(math.sqrt(math.pi) * delta_p)
        + p * gammaln(v / 2 + 1) / math.log(2)
        - (1 - p) * math.log2(outer)
        - binary_entropy(p)
    )
    return MiBounds(float(bound1), float(bound2), bool(cond), b)


# ---------------------------------------------------------------------------
# product strategies


@dataclass
class ProductStrategy:
    """Same probe and POVM on each of ``n`` channel uses; estimate from counts.

    ``probe`` lives on ``H_in (x) R``; ``effects`` act on ``H_out (x) R``;
    ``estimator`` maps an ``(m, k)`` array of outcome counts (and ``n``) to
    ``(m, v)`` estimates.
    """

    probe: np.ndarray
    effects: list
    estimator: object
    name: str = "product"

    def outcome_probs(self, family, t):
        rho = _as_density(self.probe)
        chan = family(t)
        ref = rho.shape[0] // chan.d_in
        out = apply_channel(chan, rho, ref_dim=ref)
        _check_povm(self.effects, out.shape[0])
        q = np.array([np.trace(linalg.as_matrix(e) @ out).real for e in self.effects])
        q = np.clip(q, 0.0, None)
        return q / q.sum()

    def estimate(self, counts, n):
        est = np.asarray(self.estimator(np.atleast_2d(counts), n), dtype=float)
        return est.reshape(len(np.atleast_2d(counts)), -1)

    def exact_distribution(self, family, t, n):
        """Enumerate outcome types; None when there are too many of them."""
        q = self.outcome_probs(family, t)
        k = len(q)
        if math.comb(n + k - 1, k - 1) > MAX_EXACT_TYPES:
            return None
        counts = np.array(list(_compositions(n, k)))
        probs = multinomial.pmf(counts, n, q)
        probs = probs / probs.sum()
        return EstimatorDistribution("discrete", self.estimate(counts, n), family.check_point(t), probs)

    def sample(self, family, t, n, trials, seed):
        """``trials`` estimates; trial ``i`` draws from ``default_rng([seed, i])``."""
        q = self.outcome_probs(family, t)
        counts = np.empty((trials, len(q)), dtype=np.int64)
        for i in range(trials):
            counts[i] = np.random.default_rng([seed, i]).multinomial(n, q)
        return self.estimate(counts, n)

    def sample_block(self, family, t, n, trials, rng):
        return self.estimate(rng.multinomial(n, self.outcome_probs(family, t), size=trials), n)


def _compositions(n, k):
    if k == 1:
        yield (n,)
        return
    for i in range(n + 1):
        for rest in _compositions(n - i, k - 1):
            yield (i,) + rest


def bitflip_mle_strategy():
    """Probe ``|0>``, measure Z on every output, estimate ``#flips / n``."""
    return ProductStrategy(
        probe=np.array([1.0, 0.0]),
        effects=[np.diag([1.0, 0.0]), np.diag([0.0, 1.0])],
        estimator=lambda c, n: c[:, 1:2] / n,
        name="bitflip-mle",
    )


def affine_inversion_strategy(family, probe, effects, outcome=1):
    """Invert ``P(outcome | t)`` assuming it is affine in ``t`` (v = 1).

    Exact for affine Pauli families. The estimate is not clipped to the box.
    """
    if family.v != 1:
        raise DimensionError("affine inversion needs a one-parameter family")
    base = ProductStrategy(probe, effects, None)
    lo, hi = family.lower[0], family.upper[0]
    q_lo = base.outcome_probs(family, [lo])[outcome]
    q_hi = base.outcome_probs(family, [hi])[outcome]
    if abs(q_hi - q_lo) < 1e-12:
        raise ValueError("outcome probability does not depend on t")
    slope = (hi - lo) / (q_hi - q_lo)

    def est(c, n):
        return lo + (c[:, outcome:outcome + 1] / n - q_lo) * slope

    return ProductStrategy(probe, effects, est, name=f"affine-inversion[{outcome}]")


# ---------------------------------------------------------------------------
# Monte-Carlo experiment


@dataclass
class ExperimentResult:
    n: int
    trials: int
    confidence: float
    mse_empirical: float
    mse_stderr: float
    inaccuracy_p: float
    mi_empirical: float
    mi_trials: int
    delta_p: float
    bound1: float
    bound2: float
    condition_ok: bool
    extra: dict = field(default_factory=dict)

    CSV_COLUMNS = (
        "n", "trials", "mse_empirical", "mse_stderr", "inaccuracy_p",
        "mi_empirical", "bound1", "bound2", "condition_ok",
    )

    def row(self):
        return [getattr(self, c) for c in self.CSV_COLUMNS]

    def to_json(self):
        return asdict(self)


def prior_grid(family, points=64):
    """Regular grid with about ``points`` nodes spanning the box."""
    per_axis = max(2, round(points ** (1.0 / family.v)))
    axes = [np.linspace(a, b, per_axis) for a, b in family.box]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, family.v)


def _entropy_mm(labels):
    """Plug-in entropy (bits) with the Miller-Madow correction."""
    _, counts = np.unique(labels, axis=0, return_counts=True)
    total = counts.sum()
    f = counts / total
    return float(-(f * np.log2(f)).sum() + (len(counts) - 1) / (2 * total * math.log(2)))


def empirical_mutual_information(strategy, family, n, grid, trials_per_point, seed):
    """``I(T_hat : T)`` for ``T`` uniform on ``grid``, plus the worst-case sample set.

    Point ``j`` draws its block from ``default_rng([seed, 1, j])``.
    """
    labels, ests = [], []
    blocks = []
    for j, t in enumerate(grid):
        rng = np.random.default_rng([seed, 1, j])
        est = strategy.sample_block(family, t, n, trials_per_point, rng)
        blocks.append(est)
        ests.append(np.round(est, 12))
        labels.append(np.full(len(est), j))
    ests = np.concatenate(ests)
    labels = np.concatenate(labels)
    joint = np.column_stack([labels, ests])
    mi = _entropy_mm(labels[:, None]) + _entropy_mm(ests) - _entropy_mm(joint)
    return mi, blocks


def estimation_experiment(family, strategy, t, n, trials, seed=0x5EED, confidence=0.9,
                          prior_points=64, mi_trials_per_point=None):
    """Monte-Carlo MSE, inaccuracy and mutual information for one ``(t, n)``.

    The lemma bounds use the uniform prior on the box (differential entropy
    ``log2 |T|``) and the empirical worst-case inaccuracy over the prior grid.
    """
    t = family.check_point(t)
    ests = strategy.sample(family, t, n, trials, seed)
    sq = ((ests - t) ** 2).sum(axis=1)
    mse = float(sq.mean())
    stderr = float(sq.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
    dist = EstimatorDistribution("sampled", ests, t, seed=seed)
    delta = inaccuracy(confidence, dist)

    grid = prior_grid(family, prior_points)
    per_point = mi_trials_per_point or max(256, trials // len(grid))
    mi, blocks = empirical_mutual_information(strategy, family, n, grid, per_point, seed)
    delta_p = max(
        inaccuracy(confidence, EstimatorDistribution("sampled", b, g)) for b, g in zip(blocks, grid)
    )
    bounds = mutual_info_lower_bounds(
        math.log2(family.volume), confidence, max(delta_p, 1e-300), family.v, family.volume
    )
    return ExperimentResult(
        n=int(n), trials=int(trials), confidence=float(confidence),
        mse_empirical=mse, mse_stderr=stderr, inaccuracy_p=delta,
        mi_empirical=mi, mi_trials=per_point * len(grid), delta_p=delta_p,
        bound1=bounds.bound1, bound2=bounds.bound2, condition_ok=bounds.condition_ok,
        extra={"strategy": strategy.name, "prior_points": len(grid), "seed": int(seed)},
    )
