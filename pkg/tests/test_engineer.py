import numpy as np
import pytest

from lossyqfi.engineer import (
    RESTRICTED_GENERATORS,
    ControlSequence,
    EngineeringConfig,
    gradient,
    infidelity_cost,
    optimize_controls,
    propagate,
)
from lossyqfi.fock import (
    PureState,
    coherent_state,
    collective_operator,
    dicke_state,
    evolve,
    ghz_state,
    random_state,
)
from lossyqfi.mpinv import mp_lift

from oracles import expm_evolve


def _random_controls(rng, m, dt=0.1, scale=1.0):
    return ControlSequence(dt, rng.uniform(-scale, scale, size=(m, 4)))


def test_control_sequence_validation():
    c = ControlSequence.zeros(3, 0.2)
    assert c.segment_count == 3 and c.total_time == pytest.approx(0.6)
    assert c.max_abs_coefficient == 0
    with pytest.raises(ValueError):
        ControlSequence(0.1, np.zeros((0, 4)))
    with pytest.raises(ValueError):
        ControlSequence(0.0, np.zeros((1, 4)))
    with pytest.raises(ValueError):
        ControlSequence(0.1, [[np.nan, 0, 0, 0]])
    with pytest.raises(ValueError):
        ControlSequence(0.1, np.zeros((2, 3)))


# ---------------------------------------------------------------- propagate

def test_zero_controls_are_identity(rng):
    s = random_state(8, rng)
    np.testing.assert_allclose(propagate(ControlSequence.zeros(5, 0.3), s).amplitudes, s.amplitudes, atol=1e-14)


def test_single_sx_segment_matches_evolve(rng):
    s = random_state(10, rng)
    c = ControlSequence(0.25, [[1.7, 0, 0, 0]])
    ref = evolve(s, collective_operator("Sx", 10), 1.7 * 0.25)
    np.testing.assert_allclose(propagate(c, s).amplitudes, ref.amplitudes, atol=1e-12)


def test_segment_order_matches_expm_product(rng):
    N = 6
    s = random_state(N, rng)
    c = _random_controls(rng, 3, dt=0.4)
    gens = [collective_operator(g, N).matrix for g in c.generators]
    v = s.amplitudes
    for row in c.coefficients:  # segment 1 acts first
        v = expm_evolve(v, sum(a * G for a, G in zip(row, gens)), c.dt)
    np.testing.assert_allclose(propagate(c, s).amplitudes, v, atol=1e-11)


def test_segment_splitting(rng):
    s = random_state(9, rng)
    row = rng.uniform(-2, 2, size=4)
    one = ControlSequence(0.3, [row])
    two = ControlSequence(0.15, [row, row])
    np.testing.assert_allclose(propagate(one, s).amplitudes, propagate(two, s).amplitudes, atol=1e-12)


def test_propagate_unitary_for_large_coefficients(rng):
    for scale in (1.0, 1e2, 1e4):
        for _ in range(20):
            c = _random_controls(rng, 4, scale=scale)
            out = propagate(c, random_state(12, rng))
            assert abs(np.vdot(out.amplitudes, out.amplitudes).real - 1) < 1e-12


# ---------------------------------------------------------------- cost

def test_cost_examples(rng):
    s = random_state(7, rng)
    zero = ControlSequence.zeros(2, 0.1)
    assert infidelity_cost(zero, s, s) == pytest.approx(0, abs=1e-14)
    assert infidelity_cost(zero, dicke_state(7, 0), dicke_state(7, 7)) == pytest.approx(1, abs=1e-14)
    with pytest.raises(ValueError):
        infidelity_cost(zero, s, coherent_state(6))


def test_cost_phase_invariant_and_bounded(rng):
    s, t = random_state(8, rng), random_state(8, rng)
    c = _random_controls(rng, 3)
    ref = infidelity_cost(c, t, s)
    assert 0 <= ref <= 1
    shifted = PureState(8, np.exp(0.77j) * t.amplitudes)
    assert infidelity_cost(c, shifted, s) == pytest.approx(ref, abs=1e-14)


def test_appending_zero_segment_keeps_cost(rng):
    s, t = coherent_state(9), random_state(9, rng)
    c = _random_controls(rng, 3)
    padded = ControlSequence(c.dt, np.vstack([c.coefficients, np.zeros((1, 4))]))
    assert infidelity_cost(padded, t, s) == pytest.approx(infidelity_cost(c, t, s), abs=1e-13)


# ---------------------------------------------------------------- gradient

def test_exact_gradient_matches_finite_differences(rng):
    worst = 0.0
    for _ in range(50):
        c = _random_controls(rng, 4)
        s, t = coherent_state(10), random_state(10, rng)
        fd = gradient(c, t, s, "fd")
        ex = gradient(c, t, s, "exact")
        worst = max(worst, np.abs(fd - ex).max() / np.abs(fd).max())
    assert worst < 1e-5


def test_gradient_at_target_equals_directional_fd(rng):
    s = coherent_state(6)
    zero = ControlSequence.zeros(2, 0.1)
    g = gradient(zero, s, s, "exact")
    d = rng.normal(size=g.size)
    h = 1e-6
    up = infidelity_cost(ControlSequence(0.1, (h * d).reshape(2, 4)), s, s)
    dn = infidelity_cost(ControlSequence(0.1, (-h * d).reshape(2, 4)), s, s)
    assert g @ d == pytest.approx((up - dn) / (2 * h), abs=1e-6)


def test_gradient_rejects_unknown_mode(rng):
    s = random_state(3, rng)
    with pytest.raises(ValueError):
        gradient(ControlSequence.zeros(1, 0.1), s, s, "adjoint")


# ---------------------------------------------------------------- optimizer

def test_coherent_target_reached_with_one_segment():
    N = 8
    res = optimize_controls(N, coherent_state(N), EngineeringConfig(m=1, restarts=2, seed=3))
    assert res.fidelity == pytest.approx(1, abs=1e-8)
    assert res.fidelity == pytest.approx(1 - infidelity_cost(res.controls, coherent_state(N), coherent_state(N)),
                                         abs=1e-12)


def test_optimizer_result_bookkeeping():
    N = 6
    target = mp_lift(ghz_state(5), 1)
    cfg = EngineeringConfig(m=6, restarts=3, seed=11)
    res = optimize_controls(N, target, cfg)
    assert res.restarts_used == 3 and res.seed == 11
    assert len(res.restart_costs) == 3
    assert res.cost == pytest.approx(min(res.restart_costs), abs=1e-12)
    costs = [c for _, c in res.cost_trace]
    assert all(b <= a + 1e-14 for a, b in zip(costs, costs[1:]))
    if res.converged:
        assert res.gradient_norm < 1e-6 or res.cost < cfg.tol
    # first-order condition checked independently by finite differences
    fd = gradient(res.controls, target, coherent_state(N), "fd")
    assert np.linalg.norm(fd) < 1e-5


def test_optimizer_deterministic():
    target = random_state(5, np.random.default_rng(1))
    cfg = EngineeringConfig(m=3, restarts=2, seed=42, max_iter=200)
    a, b = optimize_controls(5, target, cfg), optimize_controls(5, target, cfg)
    assert np.array_equal(a.controls.coefficients, b.controls.coefficients)
    assert a.fidelity == b.fidelity


def test_more_restarts_never_worse():
    target = random_state(7, np.random.default_rng(5))
    costs = [
        optimize_controls(7, target, EngineeringConfig(m=3, restarts=r, seed=9, max_iter=300)).cost
        for r in (1, 2, 4)
    ]
    assert costs[0] >= costs[1] >= costs[2]


def test_target_sector_checked():
    with pytest.raises(ValueError):
        optimize_controls(5, coherent_state(4))


@pytest.mark.slow
def test_restricted_generator_set_reaches_mp_ghz():
    N = 12
    target = mp_lift(ghz_state(11), 1)
    cfg = EngineeringConfig(m=16, dt=1 / 16, generators=RESTRICTED_GENERATORS, seed=0)
    res = optimize_controls(N, target, cfg)
    assert res.controls.generators == RESTRICTED_GENERATORS
    assert res.fidelity >= 0.95
