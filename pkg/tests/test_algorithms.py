"""Tests for the four decentralized iterations and the schedule/constant
calculators."""

import contextlib
import warnings

import numpy as np
import pytest

from decbilevel.algorithms import (
    ALGORITHMS,
    DivergenceError,
    Schedule,
    Theorem1Constants,
    diamond_step,
    dsgd_step,
    gtsgd_step,
    init_network,
    msgd_step,
    run,
    schedule_values,
    theorem1_constants,
)
from decbilevel.hypergrad import (
    EstimatorConfig,
    LipschitzBundle,
    apply_estimate,
    draw_estimate_sample,
)
from decbilevel.numerics import RngStream
from decbilevel.problems import quadratic_from_data, quadratic_problem
from decbilevel.problems.base import ProblemConstants
from decbilevel.topology import (
    Graph,
    graph_from_edges,
    metropolis_matrix,
)


def single_node_matrix():
    return metropolis_matrix(Graph(m=1, edges=frozenset()))


def ring_matrix(m):
    edges = {tuple(sorted((i, (i + 1) % m))) for i in range(m)}
    return metropolis_matrix(graph_from_edges(m, sorted(edges)))


def noisy_problem(m=3, d_up=2, d_low=2, sigma=0.3, seed=0):
    return quadratic_problem(m, d_up, d_low, 2.0, sigma, sigma,
                             RngStream(seed, ("prob",)))


def make_cfg(oracle, K=2, derandomize=False):
    return EstimatorConfig.from_constants(oracle.constants, K=K,
                                          derandomize=derandomize)


def run_trajectory(algorithm, oracle, cm, cfg, sched, T, seed=0,
                   x0=None, y0=None):
    x0 = np.full(oracle.d_up, 0.5) if x0 is None else x0
    y0 = np.zeros(oracle.d_low) if y0 is None else y0
    net = init_network(oracle.m, x0, y0)
    run(algorithm, net, cm, oracle, cfg, sched, T, RngStream(seed, ("run",)))
    return net


def test_schedule_hand_values():
    s = Schedule(c_alpha=1.0, omega=2.0, c_beta=2.0, c_eta=0.5, c_gamma=0.25)
    alpha, beta, eta, gamma = schedule_values(s, 6)
    assert alpha == pytest.approx(0.5)      # (2 + 6)^(-1/3)
    assert beta == pytest.approx(1.0)
    assert eta == pytest.approx(0.125)
    assert gamma == pytest.approx(0.0625)
    a0 = schedule_values(s, 0)[0]
    assert a0 == pytest.approx(2.0 ** (-1.0 / 3.0))


def test_schedule_momentum_clamped_to_one():
    s = Schedule(c_alpha=10.0, omega=2.0, c_beta=1.0, c_eta=5.0, c_gamma=5.0)
    _, _, eta, gamma = schedule_values(s, 0)
    assert eta == 1.0 and gamma == 1.0


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(c_alpha=0.0)
    with pytest.raises(ValueError):
        Schedule(omega=1.5)
    with pytest.raises(ValueError):
        Schedule(c_eta=-0.1)
    with pytest.raises(ValueError):
        schedule_values(Schedule(), -1)


def test_single_agent_tracking_is_identity():
    # With one agent the tracker telescopes to u_t = p_t, so the tracked
    # method and the untracked momentum method coincide exactly.
    o = noisy_problem(m=1)
    cm = single_node_matrix()
    cfg = make_cfg(o)
    sched = Schedule(c_alpha=0.1)
    a = run_trajectory("diamond", o, cm, cfg, sched, 15, seed=4)
    b = run_trajectory("msgd", o, cm, cfg, sched, 15, seed=4)
    # The telescoping is an algebraic identity, not a bitwise one: the
    # tracker forms (u + p_new) - p, which rounds differently from p_new.
    assert np.allclose(a.x, b.x, rtol=1e-10, atol=1e-12)
    assert np.allclose(a.y, b.y, rtol=1e-10, atol=1e-12)
    assert np.allclose(a.u, a.p, rtol=1e-10, atol=1e-12)


def test_unit_momentum_reduces_to_plain_sgd():
    # c_eta, c_gamma huge => both momentum coefficients clamp to 1 at every
    # step, which makes the momentum recursions collapse to the raw
    # estimates; with shared per-step sample lanes the trajectories agree
    # bitwise with the untracked baseline.
    o = noisy_problem(m=4)
    cm = ring_matrix(4)
    cfg = make_cfg(o)
    sched = Schedule(c_alpha=0.05, c_beta=1.0, c_eta=1e8, c_gamma=1e8)
    a = run_trajectory("msgd", o, cm, cfg, sched, 12, seed=9)
    b = run_trajectory("dsgd", o, cm, cfg, sched, 12, seed=9)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.y, b.y)


def test_tracker_mean_equals_estimate_mean():
    o = noisy_problem(m=5)
    cm = ring_matrix(5)
    cfg = make_cfg(o)
    sched = Schedule(c_alpha=0.1)
    for algo in ("diamond", "gtsgd"):
        net = run_trajectory(algo, o, cm, cfg, sched, 25, seed=2)
        assert np.allclose(net.u.mean(axis=0), net.p.mean(axis=0), atol=1e-12)


def test_consensus_step_preserves_average_shift():
    # Mean over agents moves by exactly -alpha_t * mean tracker direction.
    o = noisy_problem(m=4)
    cm = ring_matrix(4)
    cfg = make_cfg(o)
    sched = Schedule(c_alpha=0.2)
    net = run_trajectory("diamond", o, cm, cfg, sched, 7, seed=3)
    before = net.x.mean(axis=0)
    alpha = schedule_values(sched, net.t)[0]
    diamond_step(net, cm, o, cfg, sched, RngStream(3, ("extra",)))
    after = net.x.mean(axis=0)
    assert np.allclose(after, before - alpha * net.u.mean(axis=0), atol=1e-12)


def test_counter_closed_forms():
    o = noisy_problem(m=3)
    cm = ring_matrix(3)
    K, T = 3, 10
    cfg = make_cfg(o, K=K)
    sched = Schedule(c_alpha=0.05)
    expected_upper = {
        "diamond": (K + 2) + 2 * (K + 2) * (T - 1),
        "msgd": (K + 2) + 2 * (K + 2) * (T - 1),
        "dsgd": T * (K + 2),
        "gtsgd": T * (K + 2),
    }
    expected_lower = {"diamond": 2 * T - 1, "msgd": 2 * T - 1,
                      "dsgd": T, "gtsgd": T}
    assert expected_upper["dsgd"] == 50
    for algo in ALGORITHMS:
        net = run_trajectory(algo, o, cm, cfg, sched, T, seed=1)
        c = net.counters
        assert c.iterations == T and c.comm_rounds == T
        assert c.upper_ifo_per_agent == expected_upper[algo], algo
        assert c.lower_ifo_per_agent == expected_lower[algo], algo


def test_identical_agents_stay_in_consensus():
    # Same data on every agent, zero noise, derandomized estimates (a
    # realized truncation index would differ across agents), common init:
    # every agent performs the same arithmetic, so rows never split.
    a = np.array([[2.0, 0.0], [0.0, 3.0]])
    b = np.eye(2)
    o = quadratic_from_data([a] * 3, [b] * 3, [np.zeros(2)] * 3,
                            [np.ones(2)] * 3, [np.zeros(2)] * 3, rho=0.5)
    cm = ring_matrix(3)
    cfg = make_cfg(o, K=3, derandomize=True)
    sched = Schedule(c_alpha=0.3, c_beta=1.0)
    for algo in ALGORITHMS:
        net = run_trajectory(algo, o, cm, cfg, sched, 30, seed=0,
                             x0=np.array([1.0, -1.0]), y0=np.zeros(2))
        # Not exactly zero: the mixing matmul sums each row in a different
        # order, so rows can drift apart by an ulp per step.
        assert np.ptp(net.x, axis=0).max() <= 1e-12
        assert np.ptp(net.y, axis=0).max() <= 1e-12


def test_first_step_hand_wiring():
    o = noisy_problem(m=1, sigma=0.4, seed=6)
    cm = single_node_matrix()
    cfg = make_cfg(o, K=2)
    sched = Schedule(c_alpha=0.7, c_beta=0.5)
    x0, y0 = np.array([0.3, -0.2]), np.array([0.1, 0.4])
    net = init_network(1, x0, y0)
    s = RngStream(11, ("hand",))
    # Independent replay of the step's sample lanes.
    sample = draw_estimate_sample(o, 0, cfg, s.lane_stream(0, 0, "up"))
    est = apply_estimate(o, 0, x0, y0, cfg, sample)
    zeta = o.draw_lower_sample(0, s.lane_stream(0, 0, "low"))
    gy = o.grad_gy(0, x0, y0, zeta)
    alpha, beta, _, _ = schedule_values(sched, 0)
    diamond_step(net, cm, o, cfg, sched, s)
    assert np.array_equal(net.p[0], est)
    assert np.array_equal(net.u[0], est)
    assert np.array_equal(net.x[0], x0 - alpha * est)
    assert np.array_equal(net.y[0], y0 - beta * gy)
    assert np.array_equal(net.prev_x[0], x0)


def test_run_validation_and_cadence():
    o = noisy_problem(m=2)
    cm = ring_matrix(2)
    cfg = make_cfg(o)
    sched = Schedule(c_alpha=0.05)
    net = init_network(2, np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        run("nope", net, cm, o, cfg, sched, 5, RngStream(0))
    with pytest.raises(ValueError):
        run("diamond", net, cm, o, cfg, sched, 0, RngStream(0))
    with pytest.raises(ValueError):
        run("diamond", net, cm, o, cfg, sched, 5, RngStream(0), cadence=0)
    rows = run("diamond", init_network(2, np.zeros(2), np.zeros(2)), cm, o,
               cfg, sched, 100, RngStream(0), metric_hook=lambda n: n.t,
               cadence=10)
    assert rows == [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100]


def test_run_is_deterministic_given_seed():
    o = noisy_problem(m=3)
    cm = ring_matrix(3)
    cfg = make_cfg(o)
    sched = Schedule(c_alpha=0.1)
    grab = lambda n: n.x.copy()
    a = run("diamond", init_network(3, np.ones(2), np.ones(2)), cm, o, cfg,
            sched, 30, RngStream(7, ("r",)), metric_hook=grab, cadence=5)
    b = run("diamond", init_network(3, np.ones(2), np.ones(2)), cm, o, cfg,
            sched, 30, RngStream(7, ("r",)), metric_hook=grab, cadence=5)
    for ra, rb in zip(a, b):
        assert np.array_equal(ra, rb)


def test_divergence_raises_with_partial_records():
    o = noisy_problem(m=2, sigma=0.0)
    cm = ring_matrix(2)
    cfg = make_cfg(o)
    sched = Schedule(c_alpha=1e8)
    net = init_network(2, np.ones(2), np.ones(2))
    with pytest.raises(DivergenceError) as exc, \
            np.errstate(over="ignore", invalid="ignore"):
        run("diamond", net, cm, o, cfg, sched, 50, RngStream(0),
            metric_hook=lambda n: n.t, cadence=1)
    assert 1 <= exc.value.t <= 50
    assert exc.value.records == list(range(exc.value.t))
    assert "iteration" in str(exc.value)


def test_network_copy_is_independent():
    net = init_network(2, np.zeros(2), np.zeros(2))
    dup = net.copy()
    net.x[0, 0] = 5.0
    net.counters.comm_rounds = 99
    assert dup.x[0, 0] == 0.0 and dup.counters.comm_rounds == 0


def constants_for_theory():
    pc = ProblemConstants(mu_g=1.0, L_g=2.0, L_fx=1.0, L_fy=1.0, C_fy=1.0,
                          C_gxy=1.0, L_gxy=1.0, L_gyy=1.0)
    lb = LipschitzBundle(L_f=2.0, L_l=4.0, L_y=1.0, L_K=8.0)
    return pc, lb


def test_theory_constants_hand_values():
    pc, lb = constants_for_theory()
    with pytest.warns(RuntimeWarning):
        tc = theorem1_constants(pc, lb, m=1, lam=0.5)
    assert isinstance(tc, Theorem1Constants)
    # cbar_y = min(sqrt(2/2), sqrt(2/10)) with L_f=2, L_y=1, m=1.
    assert tc.cbar_y == pytest.approx(np.sqrt(0.2))
    assert tc.beta_bound == pytest.approx(1.0 / 3.0)
    assert tc.L_mug == pytest.approx(2.0 / 3.0)
    assert tc.alpha_bound <= 0.5  # never exceeds 1 - lambda


def test_theory_momentum_constant_is_unbounded():
    # cbar_u = 1/(3*cbar_eta) always binds, so the c_eta denominator
    # vanishes for every input; the calculator reports inf and warns.
    pc, lb = constants_for_theory()
    with pytest.warns(RuntimeWarning, match="unbounded"):
        tc = theorem1_constants(pc, lb, m=5, lam=0.3)
    assert np.isinf(tc.c_eta)
    assert tc.cbar_u == pytest.approx(1.0 / (3.0 * tc.cbar_eta))


@contextlib.contextmanager
def warnings_catcher():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def test_theory_alpha_bound_vanishes_with_connectivity():
    pc, lb = constants_for_theory()
    with warnings_catcher():
        loose = theorem1_constants(pc, lb, m=2, lam=0.1).alpha_bound
        tight = theorem1_constants(pc, lb, m=2, lam=0.9999).alpha_bound
    assert tight < loose
    assert tight <= 1e-4 * loose or tight <= 2e-4


def test_theory_cbar_x_at_explicit_alpha():
    pc, lb = constants_for_theory()
    with warnings_catcher():
        tc = theorem1_constants(pc, lb, m=1, lam=0.5, alpha=2.0)
    assert tc.cbar_x == pytest.approx(6.0)


def test_theory_validation():
    pc, lb = constants_for_theory()
    with pytest.raises(ValueError):
        theorem1_constants(pc, lb, m=1, lam=1.0)
    with pytest.raises(ValueError):
        theorem1_constants(pc, lb, m=0, lam=0.5)
    bare = LipschitzBundle(L_f=2.0, L_l=4.0, L_y=1.0)
    with pytest.raises(ValueError):
        theorem1_constants(pc, bare, m=1, lam=0.5)
