import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import edge_features_oracle, log_sigmoid, mlp_logit_oracle
from uavtopo.diffusion import (
    IN_DIM,
    DiffusionSchedule,
    PolicyParams,
    denoise_predict,
    edge_model,
    forward_noise,
    grad_log_prob,
    grad_log_prob_step,
    init_params,
    load_params,
    log_prob_clean_given_noisy,
    log_prob_step,
    n_params,
    sample_trajectory,
    save_params,
    zero_params,
)
from uavtopo.env import TopologyGraph, coverage_matrix
from uavtopo.errors import ArtifactIOError, ConfigError
from uavtopo.scenario import generate_scenario

SC4 = generate_scenario(3, n_uavs=4, n_gus=6)
SCH = DiffusionSchedule.linear(32)


def _random_case(seed, sc=SC4, T=32, scale=1.0):
    rng = np.random.default_rng(seed)
    p = init_params(rng, T, out_scale=scale)
    p = p.replace_theta(p.theta + rng.normal(0, 0.3, p.theta.shape))
    e = sc.n_uavs * (sc.n_uavs - 1) // 2
    s0 = TopologyGraph.from_edge_bits(sc.n_uavs, rng.random(e) < 0.5)
    st_ = TopologyGraph.from_edge_bits(sc.n_uavs, rng.random(e) < 0.5)
    t = int(rng.integers(1, T + 1))
    return p, s0, st_, t


def _fd_grad(f, theta, h=1e-6):
    g = np.empty_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


# -- schedule and forward process -----------------------------------------------


def test_schedule_shape_and_mixing():
    assert SCH.n_steps == 32
    assert SCH.beta(1) == pytest.approx(0.01) and SCH.beta(32) == pytest.approx(0.2)
    q = [SCH.cumulative_flip(t) for t in range(33)]
    assert q[0] == 0.0
    assert all(b > a for a, b in zip(q, q[1:]))
    assert 0.5 - q[-1] < 1e-3
    with pytest.raises(ConfigError):
        DiffusionSchedule((0.1, 0.5))
    with pytest.raises(ConfigError):
        DiffusionSchedule(())


@given(st.lists(st.floats(1e-4, 0.49), min_size=1, max_size=40))
def test_cumulative_flip_composes_step_kernels(betas):
    sch = DiffusionSchedule(tuple(betas))
    q = 0.0
    for b in betas:
        q = q * (1 - b) + (1 - q) * b
    assert sch.cumulative_flip(len(betas)) == pytest.approx(q, abs=1e-12)


def test_forward_noise_without_flips_keeps_graph():
    sch = DiffusionSchedule((1e-17,) * 4)
    g0 = TopologyGraph.from_edges(5, [(0, 1), (2, 4)])
    rng = np.random.default_rng(0)
    assert all(forward_noise(g0, 4, sch, rng) == g0 for _ in range(100))
    with pytest.raises(ConfigError):
        forward_noise(g0, 5, sch, rng)


def test_forward_noise_fully_mixed_is_fair_coin():
    sch = DiffusionSchedule((0.5 - 1e-12,))
    g0 = TopologyGraph.complete(3)
    rng = np.random.default_rng(1)
    bits = np.array([forward_noise(g0, 1, sch, rng).edge_bits() for _ in range(10_000)])
    assert np.all(np.abs(bits.mean(axis=0) - 0.5) <= 0.02)


def test_forward_noise_expected_hamming():
    g0 = TopologyGraph.from_edges(9, [(0, 1), (1, 2), (3, 7)])
    rng = np.random.default_rng(2)
    for t in (1, 8, 32):
        q = SCH.cumulative_flip(t)
        n = 36
        d = np.array([(forward_noise(g0, t, SCH, rng).edge_bits() ^ g0.edge_bits()).sum() for _ in range(4000)])
        sigma = math.sqrt(n * q * (1 - q) / len(d))
        assert abs(d.mean() - n * q) <= 3 * sigma


# -- denoiser --------------------------------------------------------------------


def test_param_layout():
    assert n_params() == 32 * IN_DIM + 2 * 32 + 1 == 289
    with pytest.raises(ConfigError):
        PolicyParams(np.zeros(10))
    with pytest.raises(ConfigError):
        PolicyParams(np.full(289, np.nan))


def test_zero_theta_predicts_half():
    p = zero_params(32)
    probs = denoise_predict(p, TopologyGraph.from_edges(4, [(0, 1)]), 7, SC4)
    off = ~np.eye(4, dtype=bool)
    assert np.all(probs[off] == 0.5)
    assert np.all(np.diag(probs) == 0.0)


def test_prediction_dimension_mismatch():
    with pytest.raises(ConfigError):
        denoise_predict(zero_params(32), TopologyGraph.empty(5), 1, SC4)
    with pytest.raises(ConfigError):
        denoise_predict(zero_params(32), TopologyGraph.empty(4), 33, SC4)


@pytest.mark.parametrize("seed", range(5))
def test_features_and_logits_match_oracle(seed):
    p, _, st_, t = _random_case(seed)
    cov = coverage_matrix(SC4, SC4.equilibrium().powers_w).mean(axis=1)
    rows = edge_features_oracle(SC4, st_.adjacency.tolist(), t, 32, cov.tolist())
    model = edge_model(SC4)
    logit, x, _ = model.logits(p, st_.edge_bits(), t)
    assert np.allclose(x, rows, atol=1e-15)
    expect = [mlp_logit_oracle(p.theta.tolist(), p.hidden, r) for r in rows]
    assert np.allclose(logit, expect, rtol=1e-12, atol=1e-12)
    probs = denoise_predict(p, st_, t, SC4)
    assert np.allclose(probs, probs.T)
    assert np.all((probs[model.iu, model.iv] > 0) & (probs[model.iu, model.iv] < 1))


@pytest.mark.parametrize("swap", [(0, 1), (1, 3), (0, 3)])
def test_prediction_equivariant_under_swapping_two_uavs(swap):
    p, _, st_, t = _random_case(11)
    perm = list(range(4))
    perm[swap[0]], perm[swap[1]] = perm[swap[1]], perm[swap[0]]
    base = denoise_predict(p, st_, t, SC4)
    swapped = denoise_predict(p, st_.permuted(perm), t, SC4.permuted(perm))
    assert np.allclose(swapped, base[np.ix_(perm, perm)], rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_logit_finite_differences(seed):
    p, _, st_, t = _random_case(seed)
    model = edge_model(SC4)
    x = model.features(st_.edge_bits(), t, 32)
    rng = np.random.default_rng(seed)
    for i in rng.choice(len(p.theta), 20, replace=False):
        coeff = np.zeros(model.n_pairs)
        e = int(rng.integers(model.n_pairs))
        coeff[e] = 1.0
        _, hid = model.forward(p, x)
        an = model.backward(p, x, hid, coeff)[i]

        def f(theta):
            return model.forward(p.replace_theta(theta), x)[0][e]

        h = 1e-6
        d = np.zeros_like(p.theta)
        d[i] = h
        fd = (f(p.theta + d) - f(p.theta - d)) / (2 * h)
        assert abs(fd - an) <= 1e-5 * max(abs(an), 1e-3)


# -- clean-graph likelihood and its gradient ----------------------------------------


def test_log_prob_zero_theta():
    p = zero_params(32)
    s0 = TopologyGraph.from_edges(4, [(0, 2)])
    assert log_prob_clean_given_noisy(p, s0, TopologyGraph.empty(4), 3, SC4) == pytest.approx(6 * math.log(0.5))


def test_log_prob_saturated_toward_target():
    p = zero_params(32)
    for b2 in (5.0, 15.0, 30.0):
        theta = p.theta.copy()
        theta[-1] = b2
        lp = log_prob_clean_given_noisy(p.replace_theta(theta), TopologyGraph.complete(4), TopologyGraph.empty(4), 1, SC4)
        assert -6 * math.exp(-b2) * 1.01 < lp < 0


@pytest.mark.parametrize("seed", range(5))
def test_log_prob_matches_per_edge_oracle(seed):
    p, s0, st_, t = _random_case(seed)
    cov = coverage_matrix(SC4, SC4.equilibrium().powers_w).mean(axis=1)
    rows = edge_features_oracle(SC4, st_.adjacency.tolist(), t, 32, cov.tolist())
    total = 0.0
    for bit, row in zip(s0.edge_bits(), rows):
        z = mlp_logit_oracle(p.theta.tolist(), p.hidden, row)
        total += log_sigmoid(z) if bit else log_sigmoid(-z)
    assert log_prob_clean_given_noisy(p, s0, st_, t, SC4) == pytest.approx(total, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_grad_log_prob_finite_differences(seed):
    p, s0, st_, t = _random_case(seed)
    an = grad_log_prob(p, s0, st_, t, SC4)
    fd = _fd_grad(lambda th: log_prob_clean_given_noisy(p.replace_theta(th), s0, st_, t, SC4), p.theta)
    assert an.shape == p.theta.shape
    assert np.linalg.norm(an - fd) <= 1e-5 * np.linalg.norm(fd)


def test_grad_zero_when_prediction_exact():
    theta = np.zeros(289)
    theta[-1] = 800.0  # sigmoid rounds to exactly 1
    p = PolicyParams(theta)
    g = grad_log_prob(p, TopologyGraph.complete(4), TopologyGraph.empty(4), 5, SC4)
    assert np.all(g == 0.0)


def test_grad_is_sum_of_per_edge_grads():
    p, s0, st_, t = _random_case(3)
    model = edge_model(SC4)
    logit, x, hid = model.logits(p, st_.edge_bits(), t)
    resid = s0.edge_bits() - 1 / (1 + np.exp(-logit))
    per_edge = [model.backward(p, x, hid, np.eye(model.n_pairs)[e] * resid[e]) for e in range(model.n_pairs)]
    assert np.allclose(np.sum(per_edge, axis=0), grad_log_prob(p, s0, st_, t, SC4), rtol=1e-12, atol=1e-14)


@given(st.integers(0, 6))
def test_log_prob_decreases_with_distance_from_mode(k):
    theta = np.zeros(289)
    theta[-1] = 3.0  # mode: every edge present
    p = PolicyParams(theta)
    full = TopologyGraph.complete(4).edge_bits()
    fewer = full.copy()
    fewer[:k] = False
    more_off = full.copy()
    more_off[: min(k + 1, 6)] = False
    a = log_prob_clean_given_noisy(p, TopologyGraph.from_edge_bits(4, fewer), TopologyGraph.empty(4), 2, SC4)
    b = log_prob_clean_given_noisy(p, TopologyGraph.from_edge_bits(4, more_off), TopologyGraph.empty(4), 2, SC4)
    assert b <= a
    if k < 6:
        assert b < a


# -- reverse process ---------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_step_gradient_finite_differences(seed):
    p, s_prev, st_, t = _random_case(seed)
    an = grad_log_prob_step(p, s_prev, st_, t, SC4, SCH)
    fd = _fd_grad(lambda th: log_prob_step(p.replace_theta(th), s_prev, st_, t, SC4, SCH), p.theta)
    assert np.linalg.norm(an - fd) <= 1e-5 * np.linalg.norm(fd)


def test_step_probabilities_sum_to_one():
    p, _, st_, t = _random_case(4)
    total = 0.0
    for k in range(64):
        bits = np.array([(k >> e) & 1 for e in range(6)], dtype=bool)
        total += math.exp(log_prob_step(p, TopologyGraph.from_edge_bits(4, bits), st_, t, SC4, SCH))
    assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("target", ["complete", "empty", "near_pairs"])
def test_saturated_policy_recovers_target(target):
    sch = DiffusionSchedule.linear(8, 0.001, 0.01)
    model = edge_model(SC4)
    theta = np.zeros(289)
    d = model.static[:, 0]
    if target == "near_pairs":
        # one hidden unit thresholds the pair distance, the output saturates on it
        cut = float(np.median(d))
        theta[2] = -1e4
        theta[32 * IN_DIM] = 1e4 * cut
        theta[32 * IN_DIM + 32] = 40.0
        want = d < cut
    else:
        theta[-1] = 40.0 if target == "complete" else -40.0
        want = np.full(model.n_pairs, target == "complete")
    p = PolicyParams(theta, n_steps=8)
    rng = np.random.default_rng(3)
    hits = sum(np.array_equal(sample_trajectory(p, SC4, sch, rng).bits_at(0), want) for _ in range(2000))
    assert hits / 2000 >= 0.99


def test_zero_theta_final_edges_are_fair_coins():
    sc = generate_scenario(0, n_uavs=3, n_gus=4)
    sch = DiffusionSchedule.linear(4)
    p = zero_params(4)
    rng = np.random.default_rng(7)
    finals = np.array([sample_trajectory(p, sc, sch, rng).bits_at(0) for _ in range(10_000)])
    assert np.all(np.abs(finals.mean(axis=0) - 0.5) <= 0.02)


def test_trajectory_structure_and_determinism():
    p, *_ = _random_case(1)
    a = sample_trajectory(p, SC4, SCH, np.random.default_rng(42), subset_size=4)
    b = sample_trajectory(p, SC4, SCH, np.random.default_rng(42), subset_size=4)
    assert np.array_equal(a.edge_bits, b.edge_bits)
    assert np.array_equal(a.sampled_steps, b.sampled_steps)
    assert len(a.states) == 33
    for g in a.states:
        assert np.array_equal(g.adjacency, g.adjacency.T) and not g.adjacency.diagonal().any()
    assert len(set(a.sampled_steps.tolist())) == 4
    assert set(a.sampled_steps.tolist()) <= set(range(1, 33))
    assert a.final == a.states[-1]
    with pytest.raises(ConfigError):
        sample_trajectory(p, SC4, DiffusionSchedule.linear(8), np.random.default_rng(0))


def test_checkpoint_round_trip(tmp_path):
    p, *_ = _random_case(2)
    path = tmp_path / "policy.txt"
    save_params(p, path)
    q = load_params(path)
    assert np.array_equal(p.theta, q.theta)
    assert (q.hidden, q.n_steps, q.in_dim) == (p.hidden, p.n_steps, p.in_dim)
    lines = path.read_text().splitlines()
    assert lines[:5] == ["uavtopo-policy 1", "in_dim 7", "hidden 32", "n_steps 32", "n_params 289"]


def test_checkpoint_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("something else 1\n")
    with pytest.raises(ConfigError):
        load_params(bad)
    bad.write_text("uavtopo-policy 1\nin_dim 7\nhidden 32\nn_steps 32\nn_params 289\n0.0\n")
    with pytest.raises(ConfigError, match="truncated"):
        load_params(bad)
    with pytest.raises(ArtifactIOError):
        load_params(tmp_path / "missing.txt")
