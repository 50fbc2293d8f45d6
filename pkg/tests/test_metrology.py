import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import inaccuracy_scan, lemma_bound1, lemma_bound2
from qchan import channels, families, linalg, metrology as me, protocol
from qchan.acceptance import _random_povm, random_discrete_distribution
from qchan.errors import PovmError


@pytest.fixture(scope="module")
def bitflip():
    return families.bitflip_family()


def point_mass(t):
    return me.EstimatorDistribution("discrete", [t], t, [1.0])


def test_distribution_validation():
    with pytest.raises(ValueError):
        me.EstimatorDistribution("discrete", [[0.1], [0.2]], [0], [0.5, 0.6])
    with pytest.raises(ValueError):
        me.EstimatorDistribution("discrete", [[0.1], [0.2]], [0], [1.2, -0.2])
    with pytest.raises(ValueError):
        me.EstimatorDistribution("other", [[0.1]], [0])


def test_mse_examples(bitflip):
    wide = families.bitflip_family(((0.0, 1.0),))
    povm = [(np.diag([1.0, 0.0]), 0.3), (np.diag([0.0, 1.0]), 0.7)]
    rec = me.mse_matrix([1, 0], wide, [0.3], povm, 1)
    assert rec.trace == pytest.approx(0.048, abs=1e-15)
    const = [(np.diag([1.0, 0.0]), 0.4), (np.diag([0.0, 1.0]), 0.4)]
    assert me.mse_matrix([1, 0], bitflip, [0.4], const, 1).trace == pytest.approx(0, abs=1e-15)
    off = [(np.eye(2), 0.5)]
    assert me.mse_matrix([1, 0], bitflip, [0.3], off, 1).trace == pytest.approx(0.04, abs=1e-15)


def product_z_povm(n):
    povm = []
    for idx in range(2 ** n):
        bits = [(idx >> (n - 1 - i)) & 1 for i in range(n)]
        e = np.array([[1.0]])
        for b in bits:
            e = np.kron(e, np.diag([1 - b, b]))
        povm.append((e, sum(bits) / n))
    return povm


def test_mse_born_rule_binomial(oracle, bitflip):
    for n in (1, 4):
        psi = np.zeros(2 ** n)
        psi[0] = 1
        got = me.mse_matrix(psi, bitflip, [0.3], product_z_povm(n), n).trace
        assert got == pytest.approx(oracle["bitflip_mle_mse"][f"n{n}"], abs=1e-14)


def test_exact_strategy_binomial(oracle, bitflip):
    s = me.bitflip_mle_strategy()
    for n in (1, 4, 9, 16):
        d = s.exact_distribution(bitflip, [0.3], n)
        assert d.mse() == pytest.approx(oracle["bitflip_mle_mse"][f"n{n}"], abs=1e-14)
        assert d.mse() == pytest.approx(0.21 / n, rel=1e-12)


def test_povm_validation(bitflip):
    with pytest.raises(PovmError):
        me.mse_matrix([1, 0], bitflip, [0.3], [(np.diag([1.0, 0.0]), 0.1)], 1)
    with pytest.raises(PovmError):
        me.mse_matrix([1, 0], bitflip, [0.3], [(np.diag([2.0, -1.0]), 0.1), (np.diag([-1.0, 2.0]), 0)], 1)


def test_mse_record_psd_and_trace(rng):
    d = random_discrete_distribution(rng)
    rec = d.mse_matrix()
    assert np.allclose(rec.matrix, rec.matrix.T)
    assert np.linalg.eigvalsh(rec.matrix)[0] >= -1e-10
    assert rec.trace == pytest.approx(np.trace(rec.matrix)) == pytest.approx(d.mse())


def test_inaccuracy_examples(oracle):
    assert me.inaccuracy(0.3, point_mass([0.2])) == 0
    d = me.EstimatorDistribution("discrete", [[0.1], [0.5]], [0.0], [0.6, 0.4])
    assert me.inaccuracy(0.5, d) == oracle["inaccuracy_two_point"]["p05"]
    assert me.inaccuracy(0.9, d) == oracle["inaccuracy_two_point"]["p09"]
    with pytest.raises(ValueError):
        me.inaccuracy(1.0, d)


def test_inaccuracy_uniform_segment():
    delta = 0.2
    m = 200_001
    pts = np.linspace(-delta, delta, m)
    d = me.EstimatorDistribution("discrete", pts, [0.0], np.full(m, 1 / m))
    for p in (0.1, 0.5, 0.9):
        assert me.inaccuracy(p, d) == pytest.approx(p * delta, abs=2 * delta / m * 2)


def test_inaccuracy_sampled_upper_quantile():
    d = me.EstimatorDistribution("sampled", [[1.0], [2.0], [3.0], [4.0]], [0.0])
    assert me.inaccuracy(0.5, d) == 2.0
    assert me.inaccuracy(0.51, d) == 3.0
    assert d.sample_count == 4


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.floats(0.01, 0.99))
def test_inaccuracy_matches_scan(seed, p):
    d = random_discrete_distribution(np.random.default_rng(seed))
    assert me.inaccuracy(p, d) == inaccuracy_scan(p, d.distances().tolist(), d.probs.tolist())


def test_chebyshev_examples(bitflip):
    assert me.chebyshev_bound_check(point_mass([0.3]), 0.5) == (0.0, 0.0, True)
    d = me.bitflip_mle_strategy().exact_distribution(bitflip, [0.3], 100)
    lhs, rhs, ok = me.chebyshev_bound_check(d, 0.9)
    assert ok and lhs <= rhs


@settings(max_examples=300, deadline=None)
@given(a=st.floats(0, 5), b=st.floats(0, 5), w=st.floats(0.001, 0.999), p=st.floats(0.01, 0.99))
def test_chebyshev_adversarial_two_point(a, b, w, p):
    d = me.EstimatorDistribution("discrete", [[a], [-b]], [0.0], [w, 1 - w])
    assert me.chebyshev_bound_check(d, p)[2]


def test_continuity_examples(bitflip):
    d = me.bitflip_mle_strategy().exact_distribution(bitflip, [0.3], 20)
    same = me.continuity_check(d, d, 0.0, 0.6)
    assert same.ok and same.lower == same.middle == same.upper
    s = me.bitflip_mle_strategy()
    n = 20
    rho_a = channels.tensor_power(bitflip([0.30]), 1)
    out_a = channels.apply_channel(rho_a, np.diag([1.0, 0.0]))
    out_b = channels.apply_channel(bitflip([0.31]), np.diag([1.0, 0.0]))
    eps_one = linalg.trace_norm(out_a - out_b)
    eps = min(2.0, n * eps_one)  # trace distance of n-fold products is subadditive
    da = s.exact_distribution(bitflip, [0.30], n)
    db = s.exact_distribution(bitflip, [0.31], n)
    db.t = da.t
    res = me.continuity_check(da, db, eps, 0.8)
    assert res.skipped or res.ok
    res1 = me.continuity_check(s.exact_distribution(bitflip, [0.30], 1),
                               _with_t(s.exact_distribution(bitflip, [0.31], 1), [0.30]), eps_one, 0.8)
    assert not res1.skipped and res1.ok
    assert me.continuity_check(da, db, 0.5, 0.7).skipped


def _with_t(dist, t):
    dist.t = np.asarray(t, dtype=float)
    return dist


def test_continuity_random_povms(rng):
    done = 0
    while done < 100:
        rho, sig = channels.random_density(2, rng), channels.random_density(2, rng)
        rho2 = 0.85 * rho + 0.15 * sig
        eps = linalg.trace_norm(rho - rho2)
        effects = _random_povm(rng, 2, 4)
        pts = rng.normal(size=(4, 1))
        dists = []
        for st_ in (rho, rho2):
            pr = np.clip([np.trace(e @ st_).real for e in effects], 0, None)
            dists.append(me.EstimatorDistribution("discrete", pts, [0.0], pr / pr.sum()))
        res = me.continuity_check(dists[0], dists[1], eps, float(rng.uniform(0.2, 0.8)))
        if res.skipped:
            continue
        done += 1
        assert res.ok


def test_ball_volume(oracle):
    assert me.ball_volume(1, 0.01) == pytest.approx(0.02, rel=1e-14)
    assert me.ball_volume(2, 1) == pytest.approx(math.pi)
    assert me.ball_volume(3, 1) == pytest.approx(4 * math.pi / 3)
    for v in (1, 2, 3):
        assert me.ball_volume(v, 1.0) == pytest.approx(oracle["ball_volume_mc"][f"v{v}"], rel=0.01)


def test_mutual_info_examples(oracle):
    b = me.mutual_info_lower_bounds(0.0, 0.9, 0.01, 1, 1.0)
    assert b.condition_ok
    assert b.bound1 == pytest.approx(oracle["lemma_spot"]["bound1"], abs=1e-12)
    assert b.bound2 == pytest.approx(oracle["lemma_spot"]["bound2"], abs=1e-12)
    assert b.bound1 == pytest.approx(4.51, abs=1e-2)
    bad = me.mutual_info_lower_bounds(0.0, 0.9, 5.0, 1, 1.0)
    assert not bad.condition_ok and math.isnan(bad.bound1)


@settings(max_examples=300, deadline=None)
@given(H=st.floats(-5, 5), p=st.floats(0.01, 0.99), delta=st.floats(1e-4, 1.0),
       v=st.integers(1, 3), vol=st.floats(0.05, 4))
def test_bound_order_and_oracle(H, p, delta, v, vol):
    b = me.mutual_info_lower_bounds(H, p, delta, v, vol)
    assert b.bound2 == pytest.approx(lemma_bound2(H, p, delta, v, vol), abs=1e-9)
    if b.condition_ok:
        assert b.bound1 == pytest.approx(lemma_bound1(H, p, delta, v, vol), abs=1e-9)
        assert b.bound2 <= b.bound1 + 1e-12


def test_bound1_below_grid_cardinality(bitflip):
    for n in (100, 1000):
        g = protocol.build_grid(bitflip, n, 0.5)
        for p in (0.9, 0.99):
            b = me.mutual_info_lower_bounds(math.log2(bitflip.volume), p, g.spacing / 2, 1, bitflip.volume)
            assert b.bound1 <= math.log2(g.num_points)


def test_experiment_sql(bitflip):
    s = me.bitflip_mle_strategy()
    r = me.estimation_experiment(bitflip, s, [0.3], 1000, 10_000)
    assert r.mse_empirical == pytest.approx(0.21 / 1000, rel=0.15)
    assert r.mse_stderr > 0
    assert r.mi_empirical >= r.bound2 - 3 * 0.05
    mses = [me.estimation_experiment(bitflip, s, [0.3], n, 4000).mse_empirical for n in (100, 1000, 10_000)]
    slope = np.polyfit(np.log([100, 1000, 10_000]), np.log(mses), 1)[0]
    assert slope == pytest.approx(-1, abs=0.1)


def test_experiment_deterministic(bitflip):
    s = me.bitflip_mle_strategy()
    a = me.estimation_experiment(bitflip, s, [0.4], 50, 500, seed=3)
    b = me.estimation_experiment(bitflip, s, [0.4], 50, 500, seed=3)
    assert a.row() == b.row()
    c = me.estimation_experiment(bitflip, s, [0.4], 50, 500, seed=4)
    assert c.mse_empirical != a.mse_empirical


def test_trial_seeds_independent_of_count(bitflip):
    s = me.bitflip_mle_strategy()
    short = s.sample(bitflip, [0.3], 40, 10, seed=9)
    long = s.sample(bitflip, [0.3], 40, 30, seed=9)
    assert np.array_equal(short, long[:10])


def test_constant_estimator_mse(bitflip):
    s = me.ProductStrategy(np.array([1.0, 0]), [np.diag([1.0, 0]), np.diag([0, 1.0])],
                           lambda c, n: np.full((len(c), 1), 0.5), name="const")
    r = me.estimation_experiment(bitflip, s, [0.3], 10, 100)
    assert r.mse_empirical == pytest.approx(0.04, abs=1e-15)


def test_affine_inversion_matches_mle(bitflip):
    s = me.affine_inversion_strategy(bitflip, np.array([1.0, 0]), [np.diag([1.0, 0]), np.diag([0, 1.0])])
    d = s.exact_distribution(bitflip, [0.3], 10)
    assert d.mse() == pytest.approx(0.021, rel=1e-9)
    depol = families.depolarizing_family()
    s2 = me.affine_inversion_strategy(depol, np.array([1.0, 0]), [np.diag([1.0, 0]), np.diag([0, 1.0])])
    d2 = s2.exact_distribution(depol, [0.4], 10)
    assert np.dot(d2.probs, d2.points[:, 0]) == pytest.approx(0.4, abs=1e-12)


def test_exact_distribution_cap(bitflip):
    s = me.ProductStrategy(np.array([1.0, 0]), [np.diag([1.0, 0]) / 2] * 2 + [np.diag([0, 1.0]) / 2] * 2,
                           lambda c, n: c[:, :1] / n)
    assert s.exact_distribution(bitflip, [0.3], 2000) is None
