import numpy as np
import pytest
from hypothesis import given, strategies as st

from lossyqfi.fock import PureState, coherent_state, collective_operator, fidelity
from lossyqfi.qfi import LossModel, f2_single, qfi_pure
from lossyqfi.twisting import TwistingParams, _grid_qfi, optimize_twisting, twisted_state

from oracles import expm_evolve, pure_qfi_matrix, sz_matrix


def _oracle_twisted(N, kind, chi, theta):
    gen = "Sz2" if kind == "OAT" else "TactGen"
    v = expm_evolve(coherent_state(N).amplitudes, collective_operator(gen, N).matrix, chi)
    return expm_evolve(v, collective_operator("Sx", N).matrix, theta)


def test_zero_angles_give_coherent():
    for kind in ("OAT", "TACT"):
        s = twisted_state(12, TwistingParams(kind, 0.0, 0.0))
        assert fidelity(s, coherent_state(12)) == pytest.approx(1, abs=1e-12)


def test_twisted_state_matches_expm():
    for kind in ("OAT", "TACT"):
        s = twisted_state(9, TwistingParams(kind, 0.31, 1.7))
        np.testing.assert_allclose(s.amplitudes, _oracle_twisted(9, kind, 0.31, 1.7), atol=1e-11)


@pytest.mark.parametrize("theta", [0.0, 0.4, 1.3, 2.9])
def test_oat_without_twist_stays_below_sql(theta):
    N = 16
    s = twisted_state(N, TwistingParams("OAT", 0.0, theta))
    direct = pure_qfi_matrix(_oracle_twisted(N, "OAT", 0.0, theta), sz_matrix(N))
    assert qfi_pure(s) == pytest.approx(direct, abs=1e-10)
    assert qfi_pure(s) <= N + 1e-10


def test_params_validation():
    with pytest.raises(ValueError):
        TwistingParams("XYZ", 0.1, 0.1)
    with pytest.raises(ValueError):
        TwistingParams("OAT", np.inf, 0.1)
    with pytest.raises(ValueError):
        twisted_state(1, TwistingParams("OAT", 0.1, 0.1))
    with pytest.raises(ValueError):
        optimize_twisting(1, "TACT")


def test_grid_evaluator_matches_direct_qfi():
    chis = np.linspace(0, np.pi / 2, 5)
    thetas = np.linspace(0, np.pi, 6, endpoint=False)
    for kind in ("OAT", "TACT"):
        grid = _grid_qfi(8, kind, chis, thetas)
        direct = np.array([[pure_qfi_matrix(_oracle_twisted(8, kind, c, t), sz_matrix(8)) for t in thetas]
                           for c in chis])
        np.testing.assert_allclose(grid, direct, atol=1e-9)


def test_optimized_tact_n20():
    params = optimize_twisting(20, "TACT")
    assert params.kind == "TACT" and params.grid_resolution == 64
    value = qfi_pure(twisted_state(20, params))
    assert value == pytest.approx(params.objective, rel=1e-10)
    assert value >= 40


@pytest.mark.parametrize("kind", ["OAT", "TACT"])
def test_optimum_never_worse_than_coherent(kind):
    for N in (2, 5, 13):
        assert optimize_twisting(N, kind, grid=16).objective >= N - 1e-9


def test_refinement_not_worse_than_grid():
    params = optimize_twisting(10, "OAT")
    chis = np.linspace(0, np.pi / 2, 64)
    thetas = np.linspace(0, np.pi, 64, endpoint=False)
    grid_best = _grid_qfi(10, "OAT", chis, thetas).max()
    assert params.objective >= grid_best - 1e-12


def test_tact_beats_oat_at_n40():
    tact = optimize_twisting(40, "TACT")
    oat = optimize_twisting(40, "OAT")
    assert qfi_pure(twisted_state(40, tact)) > qfi_pure(twisted_state(40, oat))


def test_deterministic():
    a = optimize_twisting(14, "TACT", grid=24)
    b = optimize_twisting(14, "TACT", grid=24)
    assert a == b


def test_f2_objective():
    model = LossModel(p_a=0.1)
    p = optimize_twisting(12, "TACT", model, grid=12)
    value = f2_single(twisted_state(12, p), "a", model)
    assert value == pytest.approx(p.objective, rel=1e-10)
    # the qfi-optimal state cannot beat the f2-optimal one on the f2 objective by more than grid slack
    q = optimize_twisting(12, "TACT", grid=12)
    assert value >= f2_single(twisted_state(12, q), "a", model) - 1e-6 * value


def test_norm_over_many_draws(rng):
    for _ in range(500):
        N = int(rng.integers(2, 25))
        kind = ("OAT", "TACT")[rng.integers(2)]
        s = twisted_state(N, TwistingParams(kind, rng.uniform(-5, 5), rng.uniform(-5, 5)))
        assert abs(np.linalg.norm(s.amplitudes) - 1) < 1e-12


@given(
    st.sampled_from(["OAT", "TACT"]),
    st.integers(2, 20),
    st.floats(-3, 3),
    st.floats(-3, 3),
    st.floats(0, 2 * np.pi),
)
def test_qfi_invariances(kind, N, chi, theta, phase):
    s = twisted_state(N, TwistingParams(kind, chi, theta))
    ref = qfi_pure(s)
    shifted = PureState(N, np.exp(1j * phase) * s.amplitudes)
    assert qfi_pure(shifted) == pytest.approx(ref, abs=1e-9 * max(1, ref))
    wrapped = twisted_state(N, TwistingParams(kind, chi, theta + 2 * np.pi))
    assert qfi_pure(wrapped) == pytest.approx(ref, abs=1e-9 * max(1, ref))
