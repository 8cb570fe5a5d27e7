"""Time-to-go solves, drift metrics, and the two reliability checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irplan.domain import N_STATES, TERMINAL_INDEX
from irplan.errors import DomainError, SolvabilityError
from irplan.response_model import (
    SyntheticConfig,
    TransitionKernel,
    build_synthetic,
    identity_kernel,
)
from irplan.value_analysis import (
    LEMMA_SLACK,
    ValueVector,
    bellman_residual,
    check_filter_condition,
    compute_delta,
    compute_eta,
    induced_chain,
    lemma1_check,
    model_value_pair,
    neumann_tail_norm,
    solve_time_to_go,
    tv_distance,
)


def kernel(*rows) -> TransitionKernel:
    return TransitionKernel(np.array(rows, dtype=np.float64))


def random_chain(rng: np.random.Generator, n: int) -> TransitionKernel:
    """Dense random chain with guaranteed terminal reachability."""
    m = rng.random((n, n)) + 0.05
    m[:, -1] += 0.5
    m /= m.sum(axis=1, keepdims=True)
    m[-1] = 0.0
    m[-1, -1] = 1.0
    return TransitionKernel(m)


def value_iteration(chain: TransitionKernel, tol: float = 1e-13) -> np.ndarray:
    f = chain.matrix[:-1, :-1]
    j = np.zeros(f.shape[0])
    for _ in range(200_000):
        nxt = 1.0 + f @ j
        if np.max(np.abs(nxt - j)) < tol:
            return nxt
        j = nxt
    raise AssertionError("value iteration did not converge")


@st.composite
def distribution(draw, n: int):
    xs = draw(
        st.lists(
            st.floats(0.01, 1.0, allow_nan=False), min_size=n, max_size=n
        )
    )
    a = np.asarray(xs)
    return a / a.sum()


# --- ValueVector invariants ---------------------------------------------------

def test_value_vector_basics():
    v = ValueVector(np.array([2.0, 1.0, 0.0]))
    assert v.inf_norm == 2.0
    assert v[0] == 2.0 and v[2] == 0.0
    with pytest.raises(ValueError):
        v.values[0] = 5.0


def test_value_vector_rejects_nonzero_terminal():
    with pytest.raises(DomainError, match="terminal"):
        ValueVector(np.array([2.0, 1.0, 0.5]))


def test_value_vector_rejects_sub_unit_non_terminal():
    with pytest.raises(DomainError, match=">= 1"):
        ValueVector(np.array([0.5, 0.0]))
    with pytest.raises(DomainError):
        ValueVector(np.array([-1.0, 0.0]))
    # float noise just below 1 is tolerated
    ValueVector(np.array([1.0 - 5e-10, 0.0]))


def test_value_vector_rejects_non_finite_and_bad_shape():
    with pytest.raises(DomainError):
        ValueVector(np.array([np.inf, 0.0]))
    with pytest.raises(DomainError):
        ValueVector(np.zeros((2, 2)))
    with pytest.raises(DomainError):
        ValueVector(np.array([0.0]))


# --- induced_chain ------------------------------------------------------------

def test_induced_chain_single_action_is_identity_mix():
    k = kernel([0.3, 0.7, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0])
    chain = induced_chain([k], np.ones((3, 1)))
    assert np.array_equal(chain.matrix, k.matrix)


def test_induced_chain_half_half_mixture():
    a = kernel([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0])
    b = kernel([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0])
    chain = induced_chain([a, b], np.full((3, 2), 0.5))
    expected = 0.5 * a.matrix + 0.5 * b.matrix
    assert np.allclose(chain.matrix, expected, atol=1e-15)


def test_induced_chain_uniform_over_identities_is_identity():
    kernels = [identity_kernel(4) for _ in range(3)]
    chain = induced_chain(kernels, np.full((4, 3), 1.0 / 3.0))
    assert np.allclose(chain.matrix, np.eye(4), atol=1e-15)


def test_induced_chain_validates_inputs():
    k = identity_kernel(3)
    with pytest.raises(DomainError, match="at least one"):
        induced_chain([], np.ones((3, 1)))
    with pytest.raises(DomainError, match="does not match"):
        induced_chain([k], np.ones((2, 1)))
    with pytest.raises(DomainError, match="does not match"):
        induced_chain([k], np.ones((3, 2)))


# --- solve_time_to_go ---------------------------------------------------------

def test_solve_deterministic_two_step_chain():
    chain = kernel([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0])
    j = solve_time_to_go(chain)
    assert j[0] == pytest.approx(2.0, abs=1e-12)
    assert j[1] == pytest.approx(1.0, abs=1e-12)
    assert j[2] == 0.0


def test_solve_half_self_loop():
    # geometric with success probability 0.5: expected 2 steps
    chain = kernel([0.5, 0.5], [0.0, 1.0])
    j = solve_time_to_go(chain)
    assert j[0] == pytest.approx(2.0, abs=1e-12)


def test_solve_matches_value_iteration_on_random_chains():
    rng = np.random.default_rng(1234)
    for n in (3, 5, 9, 17):
        for _ in range(5):
            chain = random_chain(rng, n)
            j = solve_time_to_go(chain)
            oracle = value_iteration(chain)
            assert np.max(np.abs(j.values[:-1] - oracle)) <= 1e-7


def test_solve_residual_within_tolerance(default_model):
    rng = np.random.default_rng(99)
    chains = [random_chain(rng, n) for n in (4, 8, 16)]
    chains.append(induced_chain(default_model.true_kernels, default_model.proposal))
    for chain in chains:
        j = solve_time_to_go(chain)
        assert bellman_residual(chain, j) <= 1e-9


def test_solve_rejects_absorbing_non_terminal():
    chain = kernel([1.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0])
    with pytest.raises(SolvabilityError):
        solve_time_to_go(chain)


def test_solve_rejects_closed_cycle():
    chain = kernel([0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
    with pytest.raises(SolvabilityError):
        solve_time_to_go(chain)


# --- neumann_tail_norm --------------------------------------------------------

def test_neumann_tail_vanishes_when_solvable():
    rng = np.random.default_rng(7)
    chain = random_chain(rng, 6)
    assert neumann_tail_norm(chain, 1024) < 1e-12
    assert neumann_tail_norm(chain, 1024) < neumann_tail_norm(chain, 2)


def test_neumann_tail_sticks_at_one_when_unsolvable():
    chain = kernel([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0])
    assert neumann_tail_norm(chain, 1024) == 1.0


def test_neumann_exponent_must_be_power_of_two():
    chain = identity_kernel(3)
    for bad in (0, 3, 12, 1000, -4):
        with pytest.raises(DomainError, match="power of two"):
            neumann_tail_norm(chain, bad)
    # 2**0 is allowed and returns the plain row-sum norm
    assert neumann_tail_norm(chain, 1) == 1.0


# --- tv_distance ----------------------------------------------------------------

def test_tv_fixtures():
    assert tv_distance(np.array([0.2, 0.8]), np.array([0.2, 0.8])) == 0.0
    assert tv_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 2.0
    p = np.array([0.5, 0.5, 0.0])
    q = np.array([0.25, 0.25, 0.5])
    assert tv_distance(p, q) == pytest.approx(1.0, abs=1e-15)


def test_tv_validates_shapes():
    with pytest.raises(DomainError):
        tv_distance(np.array([0.5, 0.5]), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(DomainError):
        tv_distance(np.eye(2), np.eye(2))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_tv_symmetric_bounded_triangle(data):
    n = data.draw(st.integers(2, 8))
    p = data.draw(distribution(n))
    q = data.draw(distribution(n))
    r = data.draw(distribution(n))
    d_pq = tv_distance(p, q)
    assert d_pq == tv_distance(q, p)
    assert 0.0 <= d_pq <= 2.0
    assert d_pq <= tv_distance(p, r) + tv_distance(r, q) + 1e-12


# --- compute_eta ----------------------------------------------------------------

def test_eta_zero_for_identical_kernels(default_model):
    kernels = default_model.true_kernels
    assert compute_eta(kernels, kernels) == 0.0


def test_eta_single_perturbed_row():
    true = kernel([0.7, 0.3, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0])
    model = kernel([0.55, 0.45, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0])
    assert compute_eta([true], [model]) == pytest.approx(0.3, abs=1e-12)


def test_eta_requires_matching_lengths():
    k = identity_kernel(3)
    with pytest.raises(DomainError, match="equal length"):
        compute_eta([k, k], [k])


def test_eta_matches_mixing_rate_times_worst_tv():
    # model kernels are (1 - lam) * truth + lam * uniform row-wise, so the
    # drift of every row is exactly lam * TV(true_row, uniform_row)
    lam = 0.2
    model = build_synthetic(SyntheticConfig(seed=7, kernel_mixing_lambda=lam))
    uniform_row = np.zeros(N_STATES)
    uniform_row[:TERMINAL_INDEX] = 1.0 / (N_STATES - 1)
    worst_tv = max(
        tv_distance(k.matrix[s], uniform_row)
        for k in model.true_kernels
        for s in range(TERMINAL_INDEX)
    )
    eta = compute_eta(model.true_kernels, model.model_kernels)
    assert eta == pytest.approx(lam * worst_tv, rel=1e-12)
    assert eta <= 2.0 * lam + 1e-12


# --- compute_delta --------------------------------------------------------------

def test_delta_is_one_for_single_chain_action():
    # scoring the chain against its own time-to-go gives exactly the
    # one-step cost back: J - F J = 1
    k = kernel([0.0, 0.8, 0.2], [0.0, 0.1, 0.9], [0.0, 0.0, 1.0])
    j = solve_time_to_go(k)
    assert compute_delta([k], [False], j) == pytest.approx(1.0, abs=1e-9)


def test_delta_hand_fixture_quarter_step():
    # action advances cleanly from s0 but only nudges s1, where the gain is
    # 1 - 0.75 * J(s1) = 0.25; the hallucinated identity action is ignored
    j = ValueVector(np.array([2.0, 1.0, 0.0]))
    act = kernel([0.0, 1.0, 0.0], [0.0, 0.75, 0.25], [0.0, 0.0, 1.0])
    noop = identity_kernel(3)
    assert compute_delta([act, noop], [False, True], j) == pytest.approx(
        0.25, abs=1e-12
    )
    # counting the no-op as useful drags the worst case to zero
    assert compute_delta([act, noop], [False, False], j) == 0.0


def test_delta_positive_on_built_models():
    for seed in range(4):
        model = build_synthetic(SyntheticConfig(seed=seed))
        j_true, _ = model_value_pair(model)
        delta = compute_delta(model.true_kernels, model.hallucinated, j_true)
        assert delta > 0.0


def test_delta_validates_inputs():
    j = ValueVector(np.array([2.0, 1.0, 0.0]))
    k = identity_kernel(3)
    with pytest.raises(DomainError, match="equal length"):
        compute_delta([k], [True, False], j)
    with pytest.raises(DomainError, match="non-hallucinated"):
        compute_delta([k, k], [True, True], j)


# --- lemma1_check ---------------------------------------------------------------

def test_lemma1_exact_model_has_zero_gap():
    model = build_synthetic(SyntheticConfig(seed=3, kernel_mixing_lambda=0.0))
    report = lemma1_check(model)
    assert report.eta == 0.0
    assert report.lhs == pytest.approx(0.0, abs=1e-9)
    assert report.rhs == 0.0
    assert report.holds


def test_lemma1_holds_across_mixing_rates():
    for lam in (0.05, 0.15, 0.3):
        for seed in range(10):
            model = build_synthetic(
                SyntheticConfig(seed=seed, kernel_mixing_lambda=lam)
            )
            report = lemma1_check(model)
            assert report.holds, (lam, seed, report)
            assert report.holds == (report.lhs <= report.rhs + LEMMA_SLACK)


def test_lemma1_report_fields_consistent(default_model):
    report = lemma1_check(default_model)
    j_true, j_model = model_value_pair(default_model)
    assert report.j_inf_norm == j_true.inf_norm
    assert report.j_tilde_inf_norm == j_model.inf_norm
    assert report.rhs == pytest.approx(
        report.eta * report.j_tilde_inf_norm * report.j_inf_norm, rel=1e-12
    )
    keys = set(report.to_json_dict())
    assert keys == {"lhs", "rhs", "holds", "eta", "j_inf_norm", "j_tilde_inf_norm"}


# --- check_filter_condition -----------------------------------------------------

def test_filter_condition_exact_model_reduces_to_delta_positive():
    model = build_synthetic(SyntheticConfig(seed=5, kernel_mixing_lambda=0.0))
    report = check_filter_condition(model)
    assert report.eta == 0.0
    assert report.rhs == 0.0
    assert report.delta > 0.0
    assert report.holds


def test_filter_condition_fails_under_heavy_drift():
    model = build_synthetic(SyntheticConfig(seed=0, kernel_mixing_lambda=0.3))
    report = check_filter_condition(model)
    assert not report.holds
    assert report.delta <= report.rhs


def test_filter_condition_formula_consistency(default_model):
    report = check_filter_condition(default_model)
    expected_rhs = (
        2.0 * report.eta * report.j_inf_norm * (report.j_tilde_inf_norm + 1.0)
    )
    assert report.rhs == pytest.approx(expected_rhs, rel=1e-12)
    assert report.holds == (report.delta > report.rhs)
    keys = set(report.to_json_dict())
    assert keys == {"delta", "eta", "j_inf_norm", "j_tilde_inf_norm", "rhs", "holds"}


def test_model_value_pair_identical_without_drift():
    model = build_synthetic(SyntheticConfig(seed=11, kernel_mixing_lambda=0.0))
    j_true, j_model = model_value_pair(model)
    assert np.array_equal(j_true.values, j_model.values)
