import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import X, Z, ptrace_loop
from qchan import linalg
from qchan.channels import bitflip_channel, identity_channel
from qchan.errors import DimensionError, NotHermitianError


def rand_psd(rng, d, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    return g @ g.conj().T


def test_kron_examples():
    assert np.allclose(linalg.kron(np.eye(2), np.eye(2)), np.eye(4))
    assert np.allclose(linalg.kron(np.diag([1, 2]), np.diag([3, 4])), np.diag([3, 4, 6, 8]))
    vec_i = linalg.max_entangled(2)
    assert np.allclose(linalg.kron(X, X) @ vec_i, vec_i)


def test_partial_trace_examples():
    psi = linalg.max_entangled(2) / np.sqrt(2)
    proj = np.outer(psi, psi.conj())
    assert np.allclose(linalg.partial_trace(proj, (2, 2), keep="in"), np.eye(2) / 2)
    assert np.allclose(linalg.partial_trace(identity_channel().choi, (2, 2), keep="in"), np.eye(2))
    a = np.array([[1, 2], [3, 4]], dtype=complex)
    b = np.array([[5, 1], [0, 7]], dtype=complex)
    assert np.allclose(linalg.partial_trace(np.kron(a, b), (2, 2), keep="first"), 12 * a)


def test_partial_trace_matches_loop(rng):
    for d_out, d_in in [(2, 3), (3, 2), (2, 2)]:
        m = rand_psd(rng, d_out * d_in)
        assert np.allclose(linalg.partial_trace(m, (d_out, d_in), keep="in"),
                           ptrace_loop(m, d_out, d_in, "in"))
        assert np.allclose(linalg.partial_trace(m, (d_out, d_in), keep="out"),
                           ptrace_loop(m, d_out, d_in, "out"))


def test_partial_trace_dimension_error():
    with pytest.raises(DimensionError):
        linalg.partial_trace(np.eye(5), (2, 2))


def test_eig_hermitian_examples(oracle):
    w, _ = linalg.eig_hermitian(Z)
    assert np.allclose(w, [-1, 1])
    w, _ = linalg.eig_hermitian(bitflip_channel(0.3).choi)
    assert np.allclose(np.sort(w), oracle["bitflip_choi_eigs_p03"], atol=1e-12)
    w, _ = linalg.eig_hermitian(np.zeros((3, 3)))
    assert np.allclose(w, 0)
    with pytest.raises(NotHermitianError):
        linalg.eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_eig_reconstruction(rng):
    m = rand_psd(rng, 6) - 2 * np.eye(6)
    w, u = linalg.eig_hermitian(m)
    assert np.linalg.norm(m - (u * w) @ u.conj().T, 2) <= 1e-9 * np.linalg.norm(m, 2)


def test_pinv_examples():
    assert np.allclose(linalg.pinv_on_support(np.diag([2.0, 0.0])), np.diag([0.5, 0]))
    assert np.allclose(linalg.pinv_on_support(np.eye(3)), np.eye(3))
    c = bitflip_channel(0.5).choi
    proj = linalg.support_projector(c).projector
    assert np.allclose(linalg.pinv_on_support(c), proj)
    assert np.allclose(linalg.pinv_on_support(np.zeros((2, 2))), 0)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 16), rank=st.integers(1, 16), seed=st.integers(0, 2**32 - 1))
def test_pinv_moore_penrose(d, rank, seed):
    m = rand_psd(np.random.default_rng(seed), d, min(rank, d))
    p = linalg.pinv_on_support(m)
    scale = np.abs(m).max()
    assert np.abs(m @ p @ m - m).max() <= 1e-8 * scale
    assert np.abs(p @ m @ p - p).max() <= 1e-8 * np.abs(p).max()
    assert np.abs((m @ p) - (m @ p).conj().T).max() <= 1e-8
    assert np.abs((p @ m) - (p @ m).conj().T).max() <= 1e-8


def test_norm_examples():
    assert linalg.op_norm_inf(X) == pytest.approx(1)
    assert linalg.trace_norm(X) == pytest.approx(2)
    assert linalg.trace_norm(np.diag([1, 0]) - np.diag([0.5, 0.5])) == pytest.approx(1)
    assert linalg.op_norm_inf(-3j * np.eye(4)) == pytest.approx(3)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 8))
def test_op_norm_is_max_abs_eigenvalue(seed, d):
    r = np.random.default_rng(seed)
    m = rand_psd(r, d) - rand_psd(r, d)
    assert linalg.op_norm_inf(m) == pytest.approx(np.abs(np.linalg.eigvalsh(m)).max(), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d0=st.integers(1, 4), d1=st.integers(1, 4))
def test_partial_trace_preserves_trace(seed, d0, d1):
    m = rand_psd(np.random.default_rng(seed), d0 * d1)
    for keep in ("in", "out"):
        assert np.trace(linalg.partial_trace(m, (d0, d1), keep=keep)) == pytest.approx(
            np.trace(m), abs=1e-12 * max(1, abs(np.trace(m))))


def test_support_examples(rng):
    full = linalg.support_projector(np.eye(3))
    assert linalg.support_contains(full, linalg.support_projector(rand_psd(rng, 3, 1)))
    p0 = linalg.support_projector(np.diag([1.0, 0.0]))
    p1 = linalg.support_projector(np.diag([0.0, 1.0]))
    assert not linalg.support_contains(p0, p1)
    a = linalg.support_projector(bitflip_channel(0.3).choi)
    b = linalg.support_projector(bitflip_channel(0.6).choi)
    assert a.rank == b.rank == 2
    assert linalg.support_contains(a, b) and linalg.support_contains(b, a)


def test_support_projector_idempotent(rng):
    sp = linalg.support_projector(rand_psd(rng, 6, 3))
    p = sp.projector
    assert np.abs(p @ p - p).max() <= 1e-10
    w = np.linalg.eigvalsh(p)
    assert np.all(np.minimum(np.abs(w), np.abs(w - 1)) <= 1e-10)


def test_support_reflexive_transitive(rng):
    base = rand_psd(rng, 5, 2)
    u = np.linalg.qr(rng.normal(size=(5, 5)))[0]
    small = linalg.support_projector(base)
    mid = linalg.support_projector(base + rand_psd(rng, 5, 1))
    big = linalg.support_projector(np.eye(5) + 0 * u)
    for sp in (small, mid, big):
        assert linalg.support_contains(sp, sp)
    assert linalg.support_contains(mid, small) and linalg.support_contains(big, mid)
    assert linalg.support_contains(big, small)


def test_hermitian_rejects_asymmetric():
    with pytest.raises(NotHermitianError):
        linalg.hermitian(np.array([[1, 1], [0, 1]]))


def test_vec_roundtrip(rng):
    m = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
    assert np.allclose(linalg.unvec(linalg.vec(m), m.shape), m)
