"""Quantum Fisher information: RLD and SLD for state families, and the
maximum RLD Fisher information norm of channel families.

Fisher quantities use natural units (no base-2 factor). Only
:func:`taylor_check_d2` mixes them with divergences in bits, and converts
explicitly there.
"""
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import linalg
from .divergences import LOG2E, d2_channels, sphere_ascent
from .errors import ConditionError, InfiniteFisherError
from .families import choi_derivative, derivative_support_ok

#: ``J^R_max`` estimates above this are treated as divergent
JR_DIVERGENCE_CAP = 1e12


@dataclass
class FisherReport:
    value: float
    direction: np.ndarray
    method: str
    resolution: int = 0
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "value": self.value,
            "direction": np.asarray(self.direction, dtype=float).tolist(),
            "method": self.method,
            "resolution": self.resolution,
            **self.extra,
        }


# ---------------------------------------------------------------------------
# state families


def _state_derivatives(family, t, h, derivative):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    rho = linalg.hermitian(np.asarray(family(t)), 1e-10)
    if derivative is not None:
        ders = [np.asarray(derivative(t, i)) for i in range(len(t))]
    else:
        ders = []
        for i in range(len(t)):
            e = np.zeros(len(t))
            e[i] = h
            ders.append((np.asarray(family(t + e)) - np.asarray(family(t - e))) / (2 * h))
    ders = [(d + d.conj().T) / 2 for d in ders]
    return rho, ders


def rld_fisher_states(family, t, h=1e-5, derivative=None):
    """RLD Fisher matrix ``Re Tr[d_i rho rho^+ d_j rho]`` of ``t -> rho_t``.

    ``family`` maps a parameter vector to a density matrix. Derivatives are
    central differences with step ``h`` unless ``derivative(t, i)`` is given.
    Raises :class:`InfiniteFisherError` when a derivative leaves the support.
    """
    rho, ders = _state_derivatives(family, t, h, derivative)
    return _rld_matrix(rho, ders)


def _rld_matrix(rho, ders, rel_tol=1e-6):
    for d in ders:
        if not derivative_support_ok(rho, d, rel_tol):
            raise InfiniteFisherError("derivative leaves the support of rho: RLD Fisher is infinite")
    inv = linalg.pinv_on_support(rho)
    v = len(ders)
    j = np.empty((v, v))
    for a in range(v):
        for b in range(v):
            j[a, b] = np.trace(ders[a] @ inv @ ders[b]).real
    return (j + j.T) / 2


def sld_fisher_states(family, t, h=1e-5, derivative=None, tol=1e-10):
    """SLD Fisher matrix, solving ``d rho = (L rho + rho L)/2`` in the eigenbasis of rho."""
    rho, ders = _state_derivatives(family, t, h, derivative)
    w, u = linalg.eig_hermitian(rho)
    s = w[:, None] + w[None, :]
    ok = s > tol
    logs = []
    for d in ders:
        db = linalg.dagger(u) @ d @ u
        if np.abs(db[~ok]).max(initial=0.0) > 1e-6 * max(np.abs(db).max(), 1e-300):
            raise InfiniteFisherError("derivative has weight where rho vanishes: SLD undefined")
        lb = np.where(ok, 2 * db / np.where(ok, s, 1.0), 0.0)
        logs.append(lb)
    v = len(ders)
    j = np.empty((v, v))
    wdiag = np.diag(w)
    for a in range(v):
        for b in range(v):
            anti = logs[a] @ logs[b] + logs[b] @ logs[a]
            j[a, b] = np.trace(wdiag @ anti).real / 2
    return (j + j.T) / 2


def qfi_pure_phase(probe, generator):
    """``4 (<H^2> - <H>^2)`` for a pure probe and Hermitian generator."""
    psi = np.asarray(probe, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    hpsi = linalg.hermitian(generator) @ psi
    mean = np.vdot(psi, hpsi).real
    second = np.vdot(hpsi, hpsi).real
    return 4.0 * (second - mean ** 2)


# ---------------------------------------------------------------------------
# channel families


@dataclass
class QuadraticFormTensor:
    """Blocks ``M_ij = Tr_out[d_i C  C^+  d_j C]`` of shape ``(v, v, d_in, d_in)``."""

    blocks: np.ndarray

    @property
    def v(self):
        return self.blocks.shape[0]

    def evaluate(self, s):
        s = np.asarray(s, dtype=float)
        return np.einsum("i,j,ijab->ab", s, s, self.blocks)

    def top_eigenvalues(self, dirs):
        """``lambda_max(sum_ij s_i s_j M_ij)`` for each row ``s`` of ``dirs``."""
        q = np.einsum("ni,nj,ijab->nab", dirs, dirs, self.blocks)
        q = (q + linalg.dagger(q)) / 2
        return np.linalg.eigvalsh(q)[:, -1]


def _derivatives(family, t):
    return [choi_derivative(family, t, np.eye(family.v)[i]) for i in range(family.v)]


def quadratic_form_tensor(family, t):
    t = family.check_point(t)
    choi = family.choi(t)
    ders = [(d + d.conj().T) / 2 for d in _derivatives(family, t)]
    for d in ders:
        if not derivative_support_ok(choi, d):
            raise InfiniteFisherError(
                "Choi derivative leaves the support of C_t: RLD Fisher norm is infinite"
            )
    inv = linalg.pinv_on_support(choi)
    v = family.v
    dims = (family.d_out, family.d_in)
    blocks = np.empty((v, v, family.d_in, family.d_in), dtype=complex)
    for i in range(v):
        for j in range(v):
            blocks[i, j] = linalg.partial_trace(ders[i] @ inv @ ders[j], dims, keep="in")
    sym = (blocks + np.conj(np.transpose(blocks, (1, 0, 3, 2)))) / 2
    return QuadraticFormTensor(sym)


def sphere_directions(v, count):
    """Roughly uniform unit vectors: angles for ``v=2``, a Fibonacci lattice for ``v=3``."""
    if v == 1:
        return np.array([[1.0], [-1.0]])
    if v == 2:
        ang = np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if v == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        r = np.sqrt(1 - z * z)
        phi = np.pi * (1 + 5 ** 0.5) * k
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    raise ValueError("grid directions only for v <= 3")


def _maximize_over_sphere(tensor, n_dirs, refine=10, seed=0):
    v = tensor.v
    if v == 1:
        val = float(tensor.top_eigenvalues(np.array([[1.0]]))[0])
        return max(val, 0.0), np.array([1.0])

    def obj(xs):
        return tensor.top_eigenvalues(xs / np.linalg.norm(xs, axis=1, keepdims=True))

    if v <= 3:
        dirs = sphere_directions(v, n_dirs)
        vals = tensor.top_eigenvalues(dirs)
        starts = dirs[np.argsort(vals)[::-1][:refine]]
    else:
        rng = np.random.default_rng(seed)
        starts = rng.normal(size=(max(refine, 20), v))
    best_val, best_dir = -np.inf, None
    for s in starts:
        x, fx = sphere_ascent(obj, s, max_iter=50, step=0.05, grad_h=1e-7)
        if fx > best_val:
            best_val, best_dir = fx, x
    if best_dir[np.argmax(np.abs(best_dir))] < 0:
        best_dir = -best_dir
    return max(float(best_val), 0.0), best_dir


def rld_norm_channel(family, t, n_directions=10_000):
    """Maximum RLD Fisher information norm of a channel family at ``t``.

    ``max_{|s|=1} || sum_ij s_i s_j M_ij ||_inf`` over the quadratic form
    tensor; exact for ``v=1``, grid plus local ascent for ``v >= 2``.
    """
    tensor = quadratic_form_tensor(family, t)
    val, direction = _maximize_over_sphere(tensor, n_directions)
    return FisherReport(val, direction, "choi_closed", n_directions if family.v > 1 else 1)


def rld_fisher_of_probe(family, t, probe, tensor_derivs=None):
    """RLD Fisher matrix of the output family ``(C_t (x) I)(psi)`` for a pure probe.

    ``probe`` is a vector on ``H_in (x) H_ref`` with ``dim H_ref = d_in``.
    """
    t = family.check_point(t)
    d = family.d_in
    y = np.asarray(probe, dtype=complex).reshape(d, d).T
    y = y / np.linalg.norm(y)
    k = np.kron(np.eye(family.d_out), y)
    rho = k @ family.choi(t) @ linalg.dagger(k)
    ders = tensor_derivs if tensor_derivs is not None else _derivatives(family, t)
    ders = [k @ ((dd + dd.conj().T) / 2) @ linalg.dagger(k) for dd in ders]
    return _rld_matrix(rho, ders)


def rld_norm_channel_variational(family, t, restarts=16, seed=0x5EED, probes=None):
    """Lower estimate of the RLD norm by ascent over pure probes.

    Candidates whose output family has moving support are skipped. Explicit
    ``probes`` (vectors on ``H_in (x) H_ref``) are evaluated as extra starts.
    """
    t = family.check_point(t)
    d = family.d_in
    ders = _derivatives(family, t)

    def value(x):
        y = (x[: d * d] + 1j * x[d * d:]).reshape(d, d)
        probe = y.T.reshape(-1)
        try:
            j = rld_fisher_of_probe(family, t, probe, ders)
        except InfiniteFisherError:
            return -np.inf
        return float(np.linalg.eigvalsh(j)[-1])

    def obj(xs):
        return np.array([value(x) for x in xs])

    starts = []
    for p in probes or []:
        y = np.asarray(p, dtype=complex).reshape(d, d).T.reshape(-1)
        starts.append(np.concatenate([y.real, y.imag]))
    for r in range(restarts):
        starts.append(np.random.default_rng([seed, r]).normal(size=2 * d * d))
    best_val, best_x = -np.inf, None
    for x0 in starts:
        if not np.isfinite(obj(x0[None])[0]):
            continue
        x, fx = sphere_ascent(obj, x0, max_iter=100)
        if fx > best_val:
            best_val, best_x = fx, x
    if best_x is None:
        raise InfiniteFisherError("every probe produced an output family with moving support")
    y = (best_x[: d * d] + 1j * best_x[d * d:]).reshape(d, d)
    j = rld_fisher_of_probe(family, t, y.T.reshape(-1), ders)
    w, u = np.linalg.eigh(j)
    direction = u[:, -1]
    if direction[np.argmax(np.abs(direction))] < 0:
        direction = -direction
    return FisherReport(
        max(float(w[-1]), 0.0), direction, "variational", restarts,
        extra={"probe": {"re": y.T.reshape(-1).real.tolist(), "im": y.T.reshape(-1).imag.tolist()}},
    )


def max_entangled_probe(d):
    return linalg.max_entangled(d) / math.sqrt(d)


# ---------------------------------------------------------------------------
# sup over the box


def _grid_size(v):
    return {1: 1000, 2: 100}.get(v, 11)


def _scan_value(family, t, n_dirs):
    try:
        tensor = quadratic_form_tensor(family, t)
    except InfiniteFisherError:
        return math.inf
    if family.v == 1:
        return float(tensor.top_eigenvalues(np.array([[1.0]]))[0])
    return float(tensor.top_eigenvalues(sphere_directions(family.v, n_dirs)).max())


@functools.lru_cache(maxsize=64)
def jr_max(family):
    """``sup_T J^R`` by a grid scan plus local refinement (cached per family).

    Raises :class:`ConditionError` when the sup vanishes (no dependence on
    ``t``) or diverges.
    """
    v = family.v
    per_axis = _grid_size(v)
    axes = [np.linspace(a, b, per_axis) for a, b in family.box]
    n_dirs = 400 if v > 1 else 1
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, v)
    vals = np.array([_scan_value(family, t, n_dirs) for t in mesh])
    if not np.all(np.isfinite(vals)) or vals.max() > JR_DIVERGENCE_CAP:
        raise ConditionError(
            f"RLD Fisher norm of family {family.name!r} diverges on the box: "
            "family not Condition-2/3 compatible"
        )
    k = int(np.argmax(vals))
    best_t = mesh[k]
    lo, hi = family.lower, family.upper
    step = (hi - lo) / max(per_axis - 1, 1)
    a, b = np.maximum(best_t - step, lo), np.minimum(best_t + step, hi)
    if v == 1:
        res = minimize_scalar(
            lambda x: -rld_norm_channel(family, [x]).value, bounds=(a[0], b[0]), method="bounded",
            options={"xatol": 1e-10 * max(1.0, family.widths[0])},
        )
        cand_t, cand = np.array([res.x]), -res.fun
    else:
        res = minimize(
            lambda x: -rld_norm_channel(family, x, 2000).value, best_t,
            method="Nelder-Mead", bounds=list(zip(a, b)),
            options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 400},
        )
        cand_t, cand = res.x, -res.fun
    exact_here = rld_norm_channel(family, best_t).value
    if exact_here >= cand:
        cand_t, cand = best_t, exact_here
    if cand <= 0.0:
        raise ConditionError(
            f"RLD Fisher norm vanishes on the whole box for family {family.name!r}: "
            "Condition 2 violated"
        )
    if cand > JR_DIVERGENCE_CAP:
        raise ConditionError(f"RLD Fisher norm of family {family.name!r} diverges")
    return float(cand), tuple(np.asarray(cand_t, dtype=float).tolist())


def check_condition_rld_nonzero(family):
    """Condition: ``sup_T J^R > 0``. Divergent families count as satisfying it."""
    try:
        return jr_max(family)[0] > 0.0
    except ConditionError as exc:
        return "diverges" in str(exc)


# ---------------------------------------------------------------------------
# Taylor expansion of D2 around t


@dataclass
class TaylorCheck:
    eps: np.ndarray
    d2_bits: np.ndarray
    slope: float
    coefficient: float
    bound: float

    @property
    def identically_zero(self):
        return bool(np.all(self.d2_bits == 0.0))

    @property
    def ok(self):
        if self.identically_zero:
            return True
        return (1.9 <= self.slope <= 2.1) and self.coefficient <= 1.05 * self.bound


def taylor_check_d2(family, t, direction, eps_list):
    """Fit ``D2(C_{t+eps s} || C_t)`` against ``eps`` on a log-log scale.

    ``coefficient`` is ``D2 / eps^2`` at the smallest eps (bits); ``bound`` is
    ``lambda_max(sum s_i s_j M_ij) * log2(e)``, the same quadratic form
    converted from natural units to bits.
    """
    t = family.check_point(t)
    s = np.asarray(direction, dtype=float)
    s = s / np.linalg.norm(s)
    eps = np.sort(np.asarray(eps_list, dtype=float))
    base = family(t)
    vals = np.array([d2_channels(family(t + e * s), base) for e in eps])
    bound = float(np.linalg.eigvalsh(quadratic_form_tensor(family, t).evaluate(s))[-1]) * LOG2E
    if np.all(vals <= 0.0):
        return TaylorCheck(eps, np.zeros_like(vals), math.nan, 0.0, bound)
    slope = float(np.polyfit(np.log(eps), np.log(vals), 1)[0])
    return TaylorCheck(eps, vals, slope, float(vals[0] / eps[0] ** 2), bound)
