import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lattice_points, nearest_by_scan, pauli_tv_bruteforce
from qchan import channels, families, protocol
from qchan.errors import BoundaryError, ConditionError


@pytest.fixture(scope="module")
def bitflip():
    return families.bitflip_family()


def test_grid_examples(oracle, bitflip):
    for n in (100, 10_000):
        g = protocol.build_grid(bitflip, n, 0.5)
        ref = oracle["grids"][f"n{n}"]
        assert g.spacing == pytest.approx(ref["spacing"], rel=1e-12)
        assert g.num_points == ref["points"] and g.cost_bits == ref["bits"]


def test_grid_matches_enumeration(bitflip):
    g = protocol.build_grid(bitflip, 100, 0.5)
    pts = lattice_points(0.2, 0.8, g.spacing)
    assert np.allclose(g.points.ravel(), pts, atol=1e-12)
    assert np.allclose(np.diff(g.axis(0)), g.spacing, atol=1e-12)


def test_grid_pauli3(oracle):
    g = protocol.build_grid(families.pauli3_family(), 10, 0.5)
    ref = oracle["grids"]["pauli3_n10"]
    assert g.j_r_max == pytest.approx(ref["jmax"], rel=1e-6)
    assert g.spacing == pytest.approx(ref["spacing"], rel=1e-6)
    assert g.num_points == ref["points"]
    assert np.all((g.points >= 0.1 - 1e-12) & (g.points <= 0.2 + 1e-12))


def test_grid_cost_bound(bitflip):
    for n in (10, 100, 1000, 10**6):
        g = protocol.build_grid(bitflip, n, 0.5)
        cap = sum(math.log2(w / g.spacing + 1) for w in bitflip.widths) + bitflip.v
        assert math.log2(g.num_points) <= cap


def test_cost_constant_up_to_1e6(bitflip):
    def excess(n):
        return protocol.build_grid(bitflip, n, 0.5).cost_bits - math.log2(n)

    c = excess(100)
    for n in (10**3, 10**4, 10**5, 10**6):
        assert excess(n) <= c + 1


def test_constant_family_rejected():
    with pytest.raises(ConditionError, match="Condition 2"):
        protocol.build_grid(families.constant_family(channels.bitflip_channel(0.3)), 100, 0.5)


def test_encode_examples(oracle, bitflip):
    g = protocol.build_grid(bitflip, 100, 0.5)
    t_n = protocol.encode([0.4142], g)
    assert t_n[0] == pytest.approx(oracle["grids"]["n100"]["nearest_04142"], abs=1e-12)
    assert abs(t_n[0] - 0.4142) < g.radius
    assert protocol.encode([0.412], g)[0] == pytest.approx(0.412, abs=1e-15)
    assert protocol.encode([0.414], g)[0] == pytest.approx(0.412, abs=1e-15)
    with pytest.raises(BoundaryError):
        protocol.encode([0.81], g)


@settings(max_examples=100, deadline=None)
@given(t=st.floats(0.2, 0.8), n=st.sampled_from([10, 100, 1000]), alpha=st.sampled_from([0.25, 0.5, 1.0]))
def test_encode_is_nearest_and_within_radius(t, n, alpha):
    g = protocol.build_grid(families.bitflip_family(), n, alpha)
    t_n = protocol.encode([t], g)[0]
    best = nearest_by_scan(list(g.axis(0)), t)
    assert abs(t_n - t) <= abs(best - t) + 1e-15
    assert abs(t_n - t) < g.radius


def test_encode_v3_within_radius(rng):
    f = families.pauli3_family()
    g = protocol.build_grid(f, 50, 0.5)
    for _ in range(50):
        t = rng.uniform(0.1, 0.2, size=3)
        t_n = protocol.encode(t, g)
        assert np.linalg.norm(t_n - t) < g.radius
        assert f.contains(t_n)


def test_decode_examples(bitflip):
    out = protocol.decode_apply([0.412], bitflip, [np.diag([1.0, 0.0])])
    assert np.allclose(out[0], np.diag([0.588, 0.412]))
    assert protocol.decode_apply([0.412], bitflip, []) == []
    rho = np.array([[0.6, 0.2j], [-0.2j, 0.4]])
    direct = channels.apply_channel(bitflip([0.5]), rho)
    assert np.allclose(protocol.decode_apply([0.5], bitflip, [rho])[0], direct)


def test_error_upper_examples(oracle, bitflip):
    assert protocol.error_upper(bitflip, [0.4], [0.4], 100).value == 0
    up = protocol.error_upper(bitflip, [0.4142], [0.412], 100)
    assert up.value == pytest.approx(oracle["error_upper_04142_0412_n100"]["upper"], rel=1e-9)


def test_error_upper_sqrt_n_envelope(bitflip):
    vals = [protocol.run_protocol(bitflip, 0.5, [0.4142], n).err_upper_cell for n in (100, 1000, 10_000)]
    c = vals[0] * 10
    for n, v in zip((100, 1000, 10_000), vals):
        assert v <= c * n ** -0.5 * 1.05


def test_exact_error_examples(oracle):
    p = [0.7, 0.3, 0, 0]
    assert protocol.exact_error_pauli(p, p, 5) == 0
    assert protocol.exact_error_pauli(p, [0.5, 0.5, 0, 0], 1) == pytest.approx(
        oracle["pauli_tv_bitflip_03_05_n1"], abs=1e-12)
    prev = 0.0
    for n in (1, 10, 100, 1000):
        val = protocol.exact_error_pauli([0.51, 0.49, 0, 0], [0.49, 0.51, 0, 0], n)
        assert val == pytest.approx(oracle["two_outcome_tv_049_051"][f"n{n}"], abs=1e-10)
        assert val >= prev
        prev = val
    assert protocol.exact_error_pauli([0.51, 0.49, 0, 0], [0.49, 0.51, 0, 0], 10**5) == pytest.approx(2, abs=1e-6)


def test_exact_error_general_pauli(oracle):
    p, q = [0.6, 0.1, 0.2, 0.1], [0.4, 0.3, 0.1, 0.2]
    for n in (1, 2, 3, 5):
        assert protocol.exact_error_pauli(p, q, n) == pytest.approx(oracle["pauli_tv"][f"n{n}"], abs=1e-12)


def test_exact_error_merges_equal_ratios():
    p, q = [0.4, 0.2, 0.2, 0.2], [0.1, 0.3, 0.3, 0.3]
    for n in (1, 4):
        assert protocol.exact_error_pauli(p, q, n) == pytest.approx(pauli_tv_bruteforce(p, q, n), abs=1e-12)


def test_diamond_lower_examples(rng):
    a, b = channels.bitflip_channel(0.3), channels.bitflip_channel(0.5)
    assert protocol.diamond_lower(a, a) == pytest.approx(0, abs=1e-12)
    assert protocol.diamond_lower(a, b) == pytest.approx(0.4, abs=1e-4)
    for _ in range(5):
        x, y = channels.random_channel(2, 2, rng), channels.random_channel(2, 2, rng)
        from qchan.divergences import pinsker_error_upper_bound

        assert protocol.diamond_lower(x, y, restarts=4) <= pinsker_error_upper_bound(x, y).value + 1e-10


def test_diamond_lower_n2_matches_exact(rng):
    p, q = channels.random_pauli_probs(rng, 0.05), channels.random_pauli_probs(rng, 0.05)
    a = channels.tensor_power(channels.pauli_channel(p), 2)
    b = channels.tensor_power(channels.pauli_channel(q), 2)
    exact = protocol.exact_error_pauli(p, q, 2)
    lower = protocol.diamond_lower(a, b, restarts=4)
    assert lower <= exact + 1e-6
    assert lower == pytest.approx(exact, abs=1e-4)


def test_sweep_scaling(bitflip):
    runs = protocol.protocol_sweep(bitflip, 0.5, [0.4142], [100, 1000, 10_000, 100_000])
    ns = [r.n for r in runs]
    slope_bits = np.polyfit(np.log2(ns), [r.cost_bits for r in runs], 1)[0]
    assert slope_bits == pytest.approx(1.0, abs=0.1)
    slope_err = np.polyfit(np.log(ns), np.log([r.err_upper_cell for r in runs]), 1)[0]
    assert slope_err == pytest.approx(-0.5, abs=0.05)
    for r in runs:
        assert r.err_exact <= r.err_upper + 1e-12
        assert r.thm1_rate == 0.5


def test_sweep_order_and_threads(bitflip, monkeypatch):
    ns = [1000, 10, 100]
    serial = protocol.protocol_sweep(bitflip, 0.5, [0.3], ns)
    monkeypatch.setenv("QCHAN_THREADS", "3")
    pooled = protocol.protocol_sweep(bitflip, 0.5, [0.3], ns)
    assert [r.n for r in pooled] == ns
    assert [r.row() for r in pooled] == [r.row() for r in serial]


def test_run_n1_has_lower_bound(bitflip):
    run = protocol.run_protocol(bitflip, 0.5, [0.33], 1)
    assert run.err_lower is not None
    assert run.err_lower <= run.err_exact + 1e-4 <= run.err_upper + 2e-4


def test_csv_columns():
    assert protocol.ProtocolRun.CSV_COLUMNS[:10] == (
        "n", "alpha", "v", "spacing", "num_points", "cost_bits",
        "err_upper", "err_exact", "err_lower", "thm1_rate")
