"""Quantum channels in Choi form.

Convention: ``Choi(C) = (C (x) I)(|I>><<I|)`` with the unnormalized
``|I>> = sum_k |k>|k>`` and factor order ``out (x) in``. Hence
``Tr_out Choi(C) = I_in`` and ``Tr Choi(C) = d_in``.
"""
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ChannelError, DimensionError

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI_ORDER = ("I", "X", "Y", "Z")


@dataclass(frozen=True, eq=False)
class Channel:
    """A CPTP map ``L(H_in) -> L(H_out)`` stored as its Choi operator."""

    d_in: int
    d_out: int
    choi: np.ndarray

    def __post_init__(self):
        choi = linalg.as_matrix(self.choi)
        dim = self.d_in * self.d_out
        if choi.shape != (dim, dim):
            raise DimensionError(
                f"Choi operator of shape {choi.shape} does not match d_out*d_in = {dim}"
            )
        choi = linalg.hermitian(choi, rel_tol=1e-9)
        w, _ = np.linalg.eigh(choi)
        scale = max(1.0, float(np.abs(w).max()))
        if w.min() < -1e-9 * scale:
            raise ChannelError(f"Choi operator is not PSD (min eigenvalue {w.min():.3e})")
        marg = linalg.partial_trace(choi, (self.d_out, self.d_in), keep="in")
        resid = np.abs(marg - np.eye(self.d_in)).max()
        if resid > 1e-8:
            raise ChannelError(f"Tr_out Choi != I_in (residual {resid:.3e})")
        choi.setflags(write=False)
        object.__setattr__(self, "choi", choi)

    @property
    def dims(self):
        return (self.d_out, self.d_in)

    def kraus(self, rel_tol=1e-12):
        """Kraus operators from the spectral decomposition of the Choi operator."""
        w, u = np.linalg.eigh(self.choi)
        cut = rel_tol * max(float(w.max()), 0.0)
        ops = []
        for lam, vecs in zip(w[::-1], u[:, ::-1].T):
            if lam <= cut:
                break
            ops.append(np.sqrt(lam) * vecs.reshape(self.d_out, self.d_in))
        return ops

    def __call__(self, rho):
        return apply_channel(self, rho)

    def to_json(self):
        from .serialize import channel_to_json

        return channel_to_json(self)


def choi_from_kraus(kraus, d_in=None, d_out=None, tol=1e-9):
    """Build a :class:`Channel` from Kraus operators ``K_k : H_in -> H_out``."""
    ops = [linalg.as_matrix(k) for k in kraus]
    if not ops:
        raise ChannelError("empty Kraus set")
    d_out = ops[0].shape[0] if d_out is None else int(d_out)
    d_in = ops[0].shape[1] if d_in is None else int(d_in)
    for k in ops:
        if k.shape != (d_out, d_in):
            raise DimensionError(f"Kraus operator of shape {k.shape}, expected {(d_out, d_in)}")
    tp = sum(linalg.dagger(k) @ k for k in ops)
    resid = np.abs(tp - np.eye(d_in)).max()
    if resid > tol:
        raise ChannelError(f"Kraus set is not trace preserving (residual {resid:.3e})")
    vecs = np.array([k.reshape(-1) for k in ops])
    choi = vecs.T @ vecs.conj()
    return Channel(d_in, d_out, choi)


def apply_channel(channel, rho, ref_dim=1):
    """Apply ``C (x) I_ref`` to an operator on ``H_in (x) H_ref``."""
    rho = linalg.as_matrix(rho)
    d_in, d_out = channel.d_in, channel.d_out
    if rho.shape != (d_in * ref_dim, d_in * ref_dim):
        raise DimensionError(
            f"state of shape {rho.shape} does not match d_in*ref_dim = {d_in * ref_dim}"
        )
    # C(X) = Tr_in[Choi (I_out (x) X^T)], extended blockwise over the reference.
    c = channel.choi.reshape(d_out, d_in, d_out, d_in)
    r = rho.reshape(d_in, ref_dim, d_in, ref_dim)
    out = np.einsum("aibj,irjs->arbs", c, r)
    return out.reshape(d_out * ref_dim, d_out * ref_dim)


def tensor_channel(a, b):
    """``A (x) B`` with Choi factors reordered to ``(out_A, out_B, in_A, in_B)``."""
    big = np.kron(a.choi, b.choi)
    dims = [a.d_out, a.d_in, b.d_out, b.d_in]
    choi = linalg.permute_subsystems(big, dims, [0, 2, 1, 3])
    return Channel(a.d_in * b.d_in, a.d_out * b.d_out, choi)


def tensor_power(channel, n):
    if n < 1:
        raise ValueError("n must be >= 1")
    out = channel
    for _ in range(n - 1):
        out = tensor_channel(out, channel)
    return out


def identity_channel(d=2):
    return choi_from_kraus([np.eye(d)])


def unitary_channel(u):
    return choi_from_kraus([u])


def pauli_channel(probs):
    """``sum_k p_k sigma_k rho sigma_k`` with ``probs = (p_0, p_x, p_y, p_z)``."""
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (4,):
        raise DimensionError("Pauli channel needs 4 probabilities")
    if probs.min() < -1e-12 or abs(probs.sum() - 1.0) > 1e-12:
        raise ChannelError(f"invalid Pauli probability vector {probs}")
    return Channel(2, 2, pauli_choi(probs))


def pauli_choi(probs):
    """Choi operator ``sum_k p_k |sigma_k>><<sigma_k|`` (linear in ``probs``)."""
    return sum(p * _PAULI_PROJ[k] for k, p in enumerate(np.asarray(probs, dtype=float)))


_PAULI_PROJ = [
    np.outer(PAULI[name].reshape(-1), PAULI[name].reshape(-1).conj()) for name in PAULI_ORDER
]


def bitflip_channel(p):
    return pauli_channel([1 - p, p, 0.0, 0.0])


def depolarizing_channel(lam, d=2):
    """``(1 - lam) rho + lam Tr[rho] I/d``."""
    ident = np.eye(d * d, dtype=complex)
    choi = (1 - lam) * np.outer(linalg.max_entangled(d), linalg.max_entangled(d)) + lam * ident / d
    return Channel(d, d, choi)


def replacement_channel(state, d_in=2):
    """``rho -> Tr[rho] * state``; Choi operator ``state (x) I_in``."""
    state = linalg.as_matrix(state)
    return Channel(d_in, state.shape[0], np.kron(state, np.eye(d_in)))


def random_channel(d_in, d_out, rng, rank=None):
    """Channel with a random (full rank by default) Choi operator."""
    dim = d_in * d_out
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    w = g @ g.conj().T
    s = linalg.partial_trace(w, (d_out, d_in), keep="in")
    sw, su = np.linalg.eigh(s)
    s_inv_half = (su / np.sqrt(sw)) @ su.conj().T
    norm = np.kron(np.eye(d_out), s_inv_half)
    choi = norm @ w @ norm.conj().T
    return Channel(d_in, d_out, (choi + choi.conj().T) / 2)


def random_pauli_probs(rng, floor=0.0):
    """Random point of the probability simplex with every entry ``>= floor``."""
    x = rng.dirichlet(np.ones(4))
    return floor + (1 - 4 * floor) * x


def random_density(d, rng, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
