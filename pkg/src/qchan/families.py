"""Parametric channel families ``t -> C_t`` over a box ``T = prod_i [a_i, b_i]``.

Built-in families:

* ``bitflip``        -- ``(1-t) rho + t X rho X``                    (v=1)
* ``pauli``          -- affine map ``t -> p_t`` into Pauli probabilities
* ``depolarizing``   -- ``(1-t) rho + t I/2``                         (v=1)
* ``rotation``       -- ``U_t = exp(-i t Z / 2)``, a unitary family    (v=1)
* ``constant_pure``  -- ``rho -> Tr[rho] psi_t``, ``psi_t = cos t|0> + sin t|1>``
"""
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import channels, linalg
from .errors import BoundaryError, ChannelError, DimensionError, SpecError

BOX_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ChannelFamily:
    """A box of parameters and a map from points of the box to channels.

    ``derivative(t, i)`` (optional) returns ``d Choi(C_t) / d t_i``.
    ``pauli_map`` is set for Pauli families and returns ``(p_0, p_x, p_y, p_z)``.
    """

    name: str
    box: tuple
    eval: object
    d_in: int = 2
    d_out: int = 2
    derivative: object = None
    pauli_map: object = None
    tags: frozenset = frozenset()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        box = tuple((float(a), float(b)) for a, b in self.box)
        if not box:
            raise ValueError("box must have at least one axis")
        for a, b in box:
            if not a <= b:
                raise ValueError(f"empty interval [{a}, {b}] in box")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "tags", frozenset(self.tags))

    @property
    def v(self):
        return len(self.box)

    @property
    def lower(self):
        return np.array([a for a, _ in self.box])

    @property
    def upper(self):
        return np.array([b for _, b in self.box])

    @property
    def widths(self):
        return self.upper - self.lower

    @property
    def volume(self):
        return float(np.prod(self.widths))

    def point(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if t.shape != (self.v,):
            raise DimensionError(f"parameter point has shape {t.shape}, family has v={self.v}")
        return t

    def contains(self, t, tol=BOX_TOL):
        t = self.point(t)
        scale = np.maximum(1.0, np.abs(self.lower) + np.abs(self.upper))
        return bool(np.all(t >= self.lower - tol * scale) and np.all(t <= self.upper + tol * scale))

    def check_point(self, t):
        t = self.point(t)
        if not self.contains(t):
            raise BoundaryError(f"point {t.tolist()} lies outside the box {list(self.box)}")
        return t

    def __call__(self, t):
        return self.eval(self.check_point(t))

    def choi(self, t):
        return self(t).choi

    def to_json(self):
        return {"family": self.name, "box": [list(x) for x in self.box], **self.params}


# ---------------------------------------------------------------------------
# built-in families


def pauli_family(prob_map, box, name="pauli", jacobian=None, params=None, tags=()):
    """Family ``t -> sum_k p_k(t) sigma_k . sigma_k`` for a probability map.

    Without ``jacobian`` the derivative is obtained by central differences on
    the 4-vector ``p(t)`` (exact for affine maps); the Choi derivative is the
    same linear combination of Pauli projectors.
    """
    tmp = ChannelFamily(name, box, eval=None)
    for t in sample_points(tmp):
        p = np.asarray(prob_map(t), dtype=float)
        if p.shape != (4,) or p.min() < -1e-12 or abs(p.sum() - 1.0) > 1e-12:
            raise ChannelError(
                f"probability map leaves the simplex at t={np.round(t, 12).tolist()}: {p.tolist()}"
            )

    def evaluate(t):
        return channels.pauli_channel(np.clip(prob_map(t), 0.0, None))

    widths = tmp.widths

    def grad_p(t, i):
        if jacobian is not None:
            return np.asarray(jacobian(t), dtype=float)[:, i]
        h = 1e-6 * max(widths[i], 1e-3)
        e = np.zeros(len(t))
        e[i] = h
        return (np.asarray(prob_map(t + e)) - np.asarray(prob_map(t - e))) / (2 * h)

    def derivative(t, i):
        return channels.pauli_choi(grad_p(t, i))

    return ChannelFamily(
        name, box, evaluate, derivative=derivative, pauli_map=prob_map,
        tags=frozenset(tags) | {"pauli"}, params=dict(params or {}),
    )


def affine_pauli_family(offset, matrix, box, name="pauli"):
    """Pauli family with ``p(t) = offset + matrix @ t``."""
    offset = np.asarray(offset, dtype=float)
    matrix = np.asarray(matrix, dtype=float)
    if offset.shape != (4,):
        raise ValueError("offset must have 4 entries")
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    if matrix.shape != (4, len(box)):
        raise ValueError(f"matrix must be 4 x v = 4 x {len(box)}, got {matrix.shape}")
    return pauli_family(
        lambda t: offset + matrix @ t, box, name=name, jacobian=lambda t: matrix,
        params={"offset": offset.tolist(), "matrix": matrix.tolist()},
    )


def bitflip_family(box=((0.2, 0.8),)):
    return affine_pauli_family([1, 0, 0, 0], [[-1], [1], [0], [0]], box, name="bitflip")


def pauli3_family(box=((0.1, 0.2),) * 3):
    """``t -> (1 - t1 - t2 - t3, t1, t2, t3)``."""
    m = [[-1, -1, -1], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    return affine_pauli_family([1, 0, 0, 0], m, box, name="pauli")


def depolarizing_family(box=((0.1, 0.9),)):
    """``(1 - t) rho + t I/2``, i.e. Pauli weights ``(1 - 3t/4, t/4, t/4, t/4)``."""
    return affine_pauli_family(
        [1, 0, 0, 0], [[-0.75], [0.25], [0.25], [0.25]], box, name="depolarizing"
    )


def _rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rotation_family(box=((-1.0, 1.0),)):
    """Unitary family ``U_t = exp(-i t Z/2)``; rank-one Choi with moving support."""

    def evaluate(t):
        return channels.unitary_channel(_rz(t[0]))

    def derivative(t, i):
        u = _rz(t[0])
        du = -0.5j * channels.PAULI["Z"] @ u
        a, b = du.reshape(-1), u.reshape(-1)
        d = np.outer(a, b.conj())
        return d + d.conj().T

    return ChannelFamily("rotation", box, evaluate, derivative=derivative, tags={"unitary"})


def constant_pure_family(box=((0.0, 1.0),)):
    """Replacement channels ``rho -> Tr[rho] psi_t``; Choi support moves with t."""

    def psi(t):
        return np.array([math.cos(t), math.sin(t)], dtype=complex)

    def evaluate(t):
        s = psi(t[0])
        return channels.replacement_channel(np.outer(s, s.conj()))

    def derivative(t, i):
        s = psi(t[0])
        ds = np.array([-math.sin(t[0]), math.cos(t[0])], dtype=complex)
        d = np.outer(ds, s.conj())
        return np.kron(d + d.conj().T, np.eye(2))

    return ChannelFamily("constant_pure", box, evaluate, derivative=derivative)


def constant_family(channel, box=((0.0, 1.0),)):
    """Family whose channel does not depend on ``t``."""
    zero = np.zeros_like(channel.choi)

    return ChannelFamily(
        "constant", box, lambda t: channel, d_in=channel.d_in, d_out=channel.d_out,
        derivative=lambda t, i: zero,
    )


def product_family(first, second, name=None):
    """``(s, u) -> C_s (x) D_u`` with parameters concatenated."""
    v1 = first.v

    def evaluate(t):
        return channels.tensor_channel(first(t[:v1]), second(t[v1:]))

    def derivative(t, i):
        a, b = first.choi(t[:v1]), second.choi(t[v1:])
        if i < v1:
            a = choi_derivative(first, t[:v1], _unit(first.v, i))
        else:
            b = choi_derivative(second, t[v1:], _unit(second.v, i - v1))
        big = np.kron(a, b)
        dims = [first.d_out, first.d_in, second.d_out, second.d_in]
        return linalg.permute_subsystems(big, dims, [0, 2, 1, 3])

    tags = first.tags & second.tags
    return ChannelFamily(
        name or f"{first.name}*{second.name}", first.box + second.box, evaluate,
        d_in=first.d_in * second.d_in, d_out=first.d_out * second.d_out,
        derivative=derivative, tags=tags,
    )


BUILTIN = {
    "bitflip": bitflip_family,
    "depolarizing": depolarizing_family,
    "rotation": rotation_family,
    "constant_pure": constant_pure_family,
    "pauli3": pauli3_family,
}


# ---------------------------------------------------------------------------
# derivatives


def _unit(v, i):
    e = np.zeros(v)
    e[i] = 1.0
    return e


def default_step(family, direction):
    nz = np.abs(direction) > 0
    if not nz.any():
        return 1e-4
    width = float(np.min(family.widths[nz] / np.abs(direction[nz])))
    return 1e-4 * width if width > 0 else 1e-4


def choi_derivative(family, t, direction, h=None):
    """Directional derivative of ``Choi(C_t)`` along ``direction``.

    Uses the family's analytic derivative when available, otherwise the
    central difference ``(C(t + h d) - C(t - h d)) / 2h``.
    """
    t = family.check_point(t)
    direction = np.asarray(direction, dtype=float).reshape(-1)
    if direction.shape != (family.v,):
        raise DimensionError(f"direction has {direction.size} entries, family has v={family.v}")
    if family.derivative is not None:
        out = np.zeros((family.d_in * family.d_out,) * 2, dtype=complex)
        for i, s in enumerate(direction):
            if s != 0.0:
                out = out + s * np.asarray(family.derivative(t, i))
        return out
    d, _ = finite_difference(family, t, direction, h)
    return d


def finite_difference(family, t, direction, h=None):
    """Central difference and a Richardson error estimate (one halving)."""
    t = family.point(t)
    direction = np.asarray(direction, dtype=float)
    h = default_step(family, direction) if h is None else float(h)
    for s in (1.0, -1.0):
        if not family.contains(t + s * h * direction):
            raise BoundaryError(
                f"finite-difference stencil t {'+' if s > 0 else '-'} h*dir leaves the box"
            )

    def central(step):
        return (family.choi(t + step * direction) - family.choi(t - step * direction)) / (2 * step)

    full = central(h)
    half = central(h / 2)
    err = float(np.abs(full - half).max()) * 4 / 3
    return half + (half - full) / 3, err


# ---------------------------------------------------------------------------
# sampling and structural conditions


def sample_points(family, per_axis=10, cap=1000, extra=None):
    """Fixed sample of the box: a regular grid (``per_axis`` points per axis)
    while it has at most ``cap`` points, an unscrambled Halton sequence
    otherwise, plus any ``extra`` points."""
    lo, hi = family.lower, family.upper
    if per_axis ** family.v <= cap:
        axes = [np.linspace(a, b, per_axis) for a, b in family.box]
        pts = [np.array(p) for p in itertools.product(*axes)]
    else:
        unit = qmc.Halton(d=family.v, scramble=False).random(cap)
        pts = list(lo + unit * (hi - lo))
    if extra is not None:
        pts.extend(family.point(p) for p in extra)
    return pts


def check_condition_support_constant(family, sample_points_=None):
    """Condition: the support of ``Choi(C_t)`` does not depend on ``t``.

    Checked on the fixed sample (plus ``sample_points_``). Support equality is
    an equivalence relation, so comparing every sample to the first one is the
    same as comparing all pairs.
    """
    pts = sample_points(family, extra=sample_points_)
    if len(pts) < 2:
        return True
    ref = linalg.support_projector(family.choi(pts[0]))
    for t in pts[1:]:
        p = linalg.support_projector(family.choi(t))
        if p.rank != ref.rank:
            return False
        if not (linalg.support_contains(ref, p) and linalg.support_contains(p, ref)):
            return False
    return True


def derivative_support_ok(choi, deriv, rel_tol=1e-6):
    """Support of a Hermitian derivative contained in the support of ``choi``.

    The derivative's support uses a looser cutoff than the Choi operator so
    that finite-difference noise is not mistaken for support.
    """
    scale = float(np.abs(deriv).max())
    if scale == 0.0:
        return True
    dsup = linalg.support_projector(deriv, abs_tol=rel_tol * linalg.op_norm_inf(deriv))
    return linalg.support_contains(linalg.support_projector(choi), dsup)


def check_condition_derivative_support(family, t, directions=None):
    """Condition: ``supp dC_{t+xs}/dx |_{x=0}`` lies in ``supp C_t`` for all ``s``.

    The derivative is linear in ``s``, so the coordinate axes are a complete
    test set; they are always included and ``directions`` are added on top.
    """
    t = family.check_point(t)
    dirs = [_unit(family.v, i) for i in range(family.v)]
    if directions is not None:
        dirs += [np.asarray(d, dtype=float) for d in directions]
    choi = family.choi(t)
    return all(derivative_support_ok(choi, choi_derivative(family, t, d)) for d in dirs)


# ---------------------------------------------------------------------------
# spec files


_SPEC_KEYS = {
    "bitflip": set(),
    "depolarizing": set(),
    "rotation": set(),
    "constant_pure": set(),
    "pauli": {"offset", "matrix"},
}


def parse_family_spec(text, path=None):
    """Parse a ``key = value`` family description.

    Values are JSON (``box = [[0.2, 0.8]]``) or bare words
    (``family = bitflip``). ``#`` starts a comment.
    """
    entries = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise SpecError("missing key", lineno, path)
        if key in entries:
            raise SpecError(f"duplicate key {key!r}", lineno, path)
        try:
            entries[key] = json.loads(value)
        except json.JSONDecodeError:
            if not value.replace("_", "").isalnum():
                raise SpecError(f"cannot parse value {value!r}", lineno, path) from None
            entries[key] = value
        lines[key] = lineno

    def fail(msg, key=None):
        raise SpecError(msg, lines.get(key), path)

    kind = entries.get("family")
    if kind is None:
        fail("missing required key 'family'")
    if kind not in _SPEC_KEYS:
        fail(f"unknown family {kind!r} (expected one of {sorted(_SPEC_KEYS)})", "family")
    if "box" not in entries:
        fail("missing required key 'box'")
    box = entries["box"]
    if (
        not isinstance(box, list) or not box
        or not all(isinstance(x, list) and len(x) == 2 for x in box)
        or not all(isinstance(y, (int, float)) for x in box for y in x)
    ):
        fail("box must be a non-empty list of [low, high] pairs", "box")
    if any(a > b for a, b in box):
        fail("box interval with low > high", "box")
    allowed = {"family", "box", "name"} | _SPEC_KEYS[kind]
    for key in entries:
        if key not in allowed:
            fail(f"unknown key {key!r} for family {kind!r}", key)
    box = tuple(tuple(x) for x in box)
    try:
        if kind == "pauli":
            for key in ("offset", "matrix"):
                if key not in entries:
                    fail(f"pauli family needs {key!r}")
            fam = affine_pauli_family(entries["offset"], entries["matrix"], box)
        else:
            if len(box) != 1:
                fail(f"family {kind!r} has one parameter; box must have one interval", "box")
            fam = BUILTIN[kind](box)
    except SpecError:
        raise
    except (ValueError, ChannelError) as exc:
        fail(str(exc), "box")
    if "name" in entries:
        object.__setattr__(fam, "name", str(entries["name"]))
    return fam


def load_family(path):
    with open(path) as fh:
        return parse_family_spec(fh.read(), path=str(path))
