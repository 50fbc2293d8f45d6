"""Discretize-and-send protocol for ``n`` parallel uses of ``C_t``.

The client snaps ``t`` to the lattice ``(spacing * Z^v) ∩ T`` with
``spacing = n^(-alpha-1/2) / sqrt(v * J_max)`` and sends the lattice index;
the server applies ``C_{t_n}`` to each input. Program states are orthogonal,
so the measure-and-operate decoder is exactly a classical lookup and no
program-space matrix is ever built.
"""
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import binom, multinomial

from . import bounds, linalg
from .channels import apply_channel
from .divergences import (
    ErrorBound,
    _induced_states,
    _to_y,
    d2_channels,
    pinsker_from_d2,
    sphere_ascent,
)
from .errors import (
    BoundaryError,
    ConditionError,
    DimensionError,
    InfiniteDivergenceError,
    InvariantViolation,
)
from .fisher import jr_max

#: cap on the number of type classes enumerated by :func:`exact_error_pauli`
MAX_TYPE_CLASSES = 5_000_000
MAX_MATERIALIZED_POINTS = 10_000_000


@dataclass(frozen=True)
class DiscretizationGrid:
    spacing: float
    lo: tuple
    hi: tuple
    n: int
    alpha: float
    j_r_max: float
    box: tuple

    @property
    def v(self):
        return len(self.lo)

    @property
    def counts(self):
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def num_points(self):
        return math.prod(self.counts)

    def __len__(self):
        return self.num_points

    @property
    def cost_bits(self):
        return math.ceil(math.log2(self.num_points)) if self.num_points > 1 else 0

    @property
    def radius(self):
        """Right-hand side of the encoding guarantee, ``n^(-alpha-1/2)/sqrt(J_max)``."""
        return self.n ** (-self.alpha - 0.5) / math.sqrt(self.j_r_max)

    def axis(self, i):
        return np.arange(self.lo[i], self.hi[i] + 1) * self.spacing

    @property
    def points(self):
        """All lattice points, lexicographically ordered (guarded against huge grids)."""
        if self.num_points > MAX_MATERIALIZED_POINTS:
            raise MemoryError(f"grid has {self.num_points} points; enumerate axes instead")
        axes = [self.axis(i) for i in range(self.v)]
        return np.array(list(itertools.product(*axes))).reshape(-1, self.v)

    def index_of(self, point):
        return tuple(int(round(x / self.spacing)) for x in np.atleast_1d(point))


def _axis_range(a, b, spacing):
    tol = 1e-12 * max(1.0, abs(a), abs(b))
    lo = math.ceil(a / spacing)
    while (lo - 1) * spacing >= a - tol:
        lo -= 1
    while lo * spacing < a - tol:
        lo += 1
    hi = math.floor(b / spacing)
    while (hi + 1) * spacing <= b + tol:
        hi += 1
    while hi * spacing > b + tol:
        hi -= 1
    return lo, hi


def build_grid(family, n, alpha, j_r_max=None):
    """Lattice discretization of the family's box for ``n`` uses."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if j_r_max is None:
        j_r_max = jr_max(family)[0]
    if not (j_r_max > 0 and math.isfinite(j_r_max)):
        raise ConditionError(f"J_max = {j_r_max} must be finite and positive")
    v = family.v
    spacing = n ** (-alpha - 0.5) / math.sqrt(v * j_r_max)
    lo, hi = zip(*(_axis_range(a, b, spacing) for a, b in family.box))
    if any(h < l for l, h in zip(lo, hi)):
        raise ConditionError(
            f"lattice spacing {spacing:.3e} leaves no lattice point inside the box; increase n"
        )
    return DiscretizationGrid(spacing, lo, hi, int(n), float(alpha), float(j_r_max), family.box)


def encode(t, grid):
    """Nearest lattice point (ties go to the lexicographically smallest)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.shape != (grid.v,):
        raise DimensionError(f"point has {t.size} coordinates, grid has v={grid.v}")
    for x, (a, b) in zip(t, grid.box):
        tol = 1e-12 * max(1.0, abs(a), abs(b))
        if x < a - tol or x > b + tol:
            raise BoundaryError(f"point {t.tolist()} outside the box {list(grid.box)}")
    # the box and the lattice are products, so the nearest point is found per axis
    z = np.ceil(t / grid.spacing - 0.5)
    z = np.clip(z, grid.lo, grid.hi)
    t_n = z * grid.spacing
    dist = float(np.linalg.norm(t_n - t))
    if not dist < grid.radius:
        raise InvariantViolation(
            f"encoded point {t_n.tolist()} at distance {dist:.3e} >= {grid.radius:.3e}"
        )
    return t_n


def decode_apply(t_n, family, inputs):
    """Apply ``C_{t_n}`` to each of the ``n`` input states."""
    if len(inputs) == 0:
        return []
    channel = family(t_n)
    return [apply_channel(channel, rho) for rho in inputs]


def error_upper(family, t, t_n, n):
    """``min(2, sqrt((2n / log2 e) * D2(C_{t_n} || C_t)))``."""
    try:
        d2 = d2_channels(family(t_n), family(t))
    except InfiniteDivergenceError:
        return ErrorBound(2.0, trivial=True)
    return ErrorBound(pinsker_from_d2(d2, n))


def cell_error_upper(family, grid, probes_per_axis=None):
    """Worst-case divergence bound over interior lattice cells.

    For each probe location the enclosing cell centre is used as the true
    parameter (its nearest lattice points are the ``2^v`` cell corners, the
    farthest any interior ``t`` can be from the lattice) and the bound is
    maximized over those corners. Probes cover the box on a regular grid and
    always include the first and last cell along every axis.
    """
    v = grid.v
    if any(c < 2 for c in grid.counts):
        return math.nan
    probes_per_axis = probes_per_axis or {1: 65, 2: 9}.get(v, 5)
    idx_axes = []
    for i in range(v):
        lo, hi = grid.lo[i], grid.hi[i] - 1
        cells = np.unique(np.round(np.linspace(lo, hi, min(probes_per_axis, hi - lo + 1))))
        idx_axes.append(cells.astype(int))
    corners = list(itertools.product((0, 1), repeat=v))
    worst = 0.0
    for cell in itertools.product(*idx_axes):
        k = np.array(cell)
        centre = (k + 0.5) * grid.spacing
        base = family(centre)
        for c in corners:
            corner = (k + np.array(c)) * grid.spacing
            try:
                d2 = d2_channels(family(corner), base)
            except InfiniteDivergenceError:
                return 2.0
            worst = max(worst, pinsker_from_d2(d2, grid.n))
    return worst


# ---------------------------------------------------------------------------
# exact and variational diamond distances


def _merge_by_ratio(p, q):
    """Merge outcomes with equal likelihood ratio; drops outcomes where both vanish."""
    groups = {}
    for pi, qi in zip(p, q):
        if pi == 0.0 and qi == 0.0:
            continue
        key = math.inf if qi == 0.0 else round(pi / qi, 15)
        gp, gq = groups.get(key, (0.0, 0.0))
        groups[key] = (gp + pi, gq + qi)
    keys = sorted(groups)
    return np.array([groups[k][0] for k in keys]), np.array([groups[k][1] for k in keys])


def exact_error_pauli(p_vec_a, p_vec_b, n=1):
    """Diamond distance between ``n``-fold tensor powers of two Pauli channels.

    Equals the l1 distance between the product Pauli distributions. Outcomes
    with equal likelihood ratio are merged, then type classes are enumerated
    (a binomial sum when two classes remain).
    """
    p = np.asarray(p_vec_a, dtype=float)
    q = np.asarray(p_vec_b, dtype=float)
    if p.shape != (4,) or q.shape != (4,):
        raise DimensionError("Pauli probability vectors need 4 entries")
    for x in (p, q):
        if x.min() < -1e-12 or abs(x.sum() - 1) > 1e-12:
            raise ValueError(f"invalid probability vector {x.tolist()}")
    if n < 1:
        raise ValueError("n must be >= 1")
    p, q = _merge_by_ratio(np.clip(p, 0, None), np.clip(q, 0, None))
    k = len(p)
    if k <= 1:
        return 0.0
    if k == 2:
        j = np.arange(n + 1)
        diff = np.abs(binom.pmf(j, n, p[0]) - binom.pmf(j, n, q[0])).sum()
        return float(min(2.0, diff))
    classes = math.comb(n + k - 1, k - 1)
    if classes > MAX_TYPE_CLASSES:
        raise ValueError(f"{classes} type classes exceed the enumeration cap")
    total = 0.0
    for counts in _compositions(n, k):
        total += abs(multinomial.pmf(counts, n, p) - multinomial.pmf(counts, n, q))
    return float(min(2.0, total))


def _compositions(n, k):
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def diamond_lower(a, b, restarts=16, seed=0x5EED, max_iter=200):
    """Certified lower bound on ``||A - B||_diamond`` by ascent over pure inputs.

    The maximally entangled input and computational-basis product inputs are
    always tried in addition to ``restarts`` random starts.
    """
    if (a.d_in, a.d_out) != (b.d_in, b.d_out):
        raise DimensionError("channels act on different spaces")
    d, d_out = a.d_in, a.d_out
    diff = a.choi - b.choi

    def objective(xs):
        ys = _to_y(xs, d)
        m = _induced_states(diff, ys, d_out)
        return np.abs(np.linalg.eigvalsh((m + linalg.dagger(m)) / 2)).sum(axis=1)

    starts = [np.concatenate([np.eye(d).reshape(-1), np.zeros(d * d)])]
    for i in range(d):
        y = np.zeros((d, d))
        y[i, i] = 1.0
        starts.append(np.concatenate([y.reshape(-1), np.zeros(d * d)]))
    best = float(objective(np.array(starts)).max())
    jitter = np.random.default_rng([seed, restarts]).normal(size=(len(starts), 2 * d * d))
    starts = [x + 1e-3 * j for x, j in zip(starts, jitter)]
    for r in range(restarts):
        starts.append(np.random.default_rng([seed, r]).normal(size=2 * d * d))
    for x0 in starts:
        _, fx = sphere_ascent(objective, x0, max_iter=max_iter)
        best = max(best, float(fx))
    return min(best, 2.0)


# ---------------------------------------------------------------------------
# runs and sweeps


@dataclass
class ProtocolRun:
    n: int
    alpha: float
    v: int
    t: tuple
    t_n: tuple
    spacing: float
    num_points: int
    cost_bits: int
    err_upper: float
    err_upper_cell: float
    err_exact: float = None
    err_lower: float = None
    thm1_rate: float = None
    trivial_bound: bool = False

    CSV_COLUMNS = (
        "n", "alpha", "v", "spacing", "num_points", "cost_bits",
        "err_upper", "err_exact", "err_lower", "thm1_rate", "err_upper_cell",
    )

    def row(self):
        return [getattr(self, c) for c in self.CSV_COLUMNS]

    def to_json(self):
        return asdict(self)


def run_protocol(family, alpha, t, n, beta=None, lower_restarts=16, seed=0x5EED):
    """One execution: grid, encoding, bounds, and sandwich checks."""
    t = family.check_point(t)
    grid = build_grid(family, n, alpha)
    t_n = encode(t, grid)
    up = error_upper(family, t, t_n, n)
    run = ProtocolRun(
        n=int(n), alpha=float(alpha), v=family.v,
        t=tuple(t.tolist()), t_n=tuple(t_n.tolist()),
        spacing=grid.spacing, num_points=grid.num_points, cost_bits=grid.cost_bits,
        err_upper=up.value, err_upper_cell=cell_error_upper(family, grid),
        trivial_bound=up.trivial,
    )
    if family.pauli_map is not None:
        run.err_exact = exact_error_pauli(family.pauli_map(t_n), family.pauli_map(t), n)
    if n == 1:
        run.err_lower = diamond_lower(family(t_n), family(t), restarts=lower_restarts, seed=seed)
    if beta is None:
        beta = bounds.classify_beta(family)
    if beta != "unknown":
        run.thm1_rate = bounds.theorem1_rate(family.v, float(beta), 0.0).rate
    _check_run(run)
    return run


def _check_run(run):
    slack = 1e-4
    vals = [x for x in (run.err_lower, run.err_exact, run.err_upper) if x is not None]
    for lo_, hi_ in zip(vals, vals[1:]):
        if lo_ > hi_ + slack:
            raise InvariantViolation(
                f"error sandwich violated at n={run.n}: lower/exact/upper = "
                f"{run.err_lower}/{run.err_exact}/{run.err_upper}"
            )


def worker_count():
    try:
        cap = int(os.environ.get("QCHAN_THREADS", "0"))
    except ValueError:
        cap = 0
    return max(1, cap) if cap else 1


def protocol_sweep(family, alpha, t, n_list, seed=0x5EED, beta=None):
    """One :class:`ProtocolRun` per ``n`` (results in input order)."""
    jr_max(family)

    def one(n):
        return run_protocol(family, alpha, t, int(n), beta=beta, seed=seed)

    workers = worker_count()
    if workers == 1:
        return [one(n) for n in n_list]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, n_list))
