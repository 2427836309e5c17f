import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cyberbudget import ValidationError, scoring
from cyberbudget.scoring import (
    ScoringParams,
    check_budget,
    classify_and_vulnerability,
    fractional_budget,
    improve_efficacy,
    p_table,
    rounded_budget,
    sequence_log_success,
    technique_log_success,
    technique_log_success_budgeted,
    technique_success_product,
)


def test_fractional_budget_example():
    f = fractional_budget([[1, 1, 0], [0, 0, 1]], [0.6, 0.4, 0.0])
    assert f == pytest.approx([0.5, 0.0], abs=1e-15)


def test_fractional_budget_full_membership():
    f = fractional_budget(np.ones((2, 4)), [0.1, 0.2, 0.3, 0.4])
    assert f == pytest.approx([0.25, 0.25])


def test_fractional_budget_unit_mass():
    C = np.array([[1, 1, 0], [0, 1, 0], [1, 0, 1]])
    f = fractional_budget(C, [0.0, 1.0, 0.0])
    assert f == pytest.approx([0.5, 1.0, 0.0])


def test_fractional_budget_rejects_empty_row():
    with pytest.raises(ValidationError):
        fractional_budget([[0, 0]], [0.5, 0.5])


def test_efficacy_examples():
    assert improve_efficacy(0.5, 0.1, 1.0) == pytest.approx(0.547581, abs=1e-6)
    assert improve_efficacy(0.0, 0.1, 1.0) == pytest.approx(0.095163, abs=1e-6)


@pytest.mark.parametrize("eta0", [0.0, 0.1, 0.37, 0.5, 0.99])
@pytest.mark.parametrize("lam", [0.0, 0.1, 4.0])
def test_zero_allocation_keeps_initial_efficacy_exactly(eta0, lam):
    assert improve_efficacy(eta0, lam, 0.0) == eta0


def test_log_success_examples():
    M = np.array([[1, 0, 0], [1, 1, 0]])
    assert np.all(technique_log_success(M, [0, 0], [0.5, 0.4]) == 0.0)
    assert technique_log_success(M[:1], [1], [0.5]) == pytest.approx([math.log(0.5), 0, 0])
    log_r = technique_log_success(M, [1, 1], [0.5, 0.4])
    assert log_r[0] == pytest.approx(math.log(0.30))


def test_budgeted_examples():
    M = np.array([[1, 0]])
    P = p_table(M, [0.0])
    assert technique_log_success_budgeted(M, P, [1], [0.5], 2.0)[0] == pytest.approx(-1.0)
    assert np.all(technique_log_success_budgeted(M, P, [0], [0.5], 2.0) == 0.0)
    eta0 = np.array([0.3])
    P = p_table(M, eta0)
    assert technique_log_success_budgeted(M, P, [1], [0.0], 2.0) == pytest.approx(technique_log_success(M, [1], eta0))


def test_sequence_log_success_examples():
    S = np.array([[1, 1]])
    assert sequence_log_success(S, np.log([0.5, 0.5]))[0] == pytest.approx(-1.386294, abs=1e-6)
    assert sequence_log_success(S, [0.0, 0.0])[0] == 0.0
    assert sequence_log_success(np.array([[1, 0]]), [0.0, -3.0])[0] == 0.0


def test_classification_example():
    flags, vul = classify_and_vulnerability(np.log([0.25, 0.05, 1.0]), 0.1)
    assert flags.tolist() == [True, False, True]
    assert vul == pytest.approx(2 / 3)


def test_delta_one_boundary():
    flags, _ = classify_and_vulnerability(np.array([math.log(0.999), 0.0]), 1.0)
    assert flags.tolist() == [False, True]


def test_threshold_is_inclusive():
    flags, _ = classify_and_vulnerability(np.array([math.log(0.1)]), 0.1)
    assert flags.tolist() == [True]


def test_no_sequences_gives_zero_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        flags, vul = classify_and_vulnerability(np.zeros(0), 0.1)
    assert vul == 0.0 and flags.size == 0
    assert "no attack sequences" in caplog.text


def test_nothing_selected_means_full_vulnerability():
    C = np.array([[1, 0], [0, 1]])
    M = np.array([[1, 1], [0, 1]])
    S = np.array([[1, 1], [0, 1]])
    br = scoring.score(C, M, S, [0, 0], [0.5, 0.5], ScoringParams(3.0, 0.5, np.array([0.5, 0.5])))
    assert br.vulnerability == 1.0 and np.all(br.log_r == 0)


def test_params_validation():
    with pytest.raises(ValidationError):
        ScoringParams(-1.0, 0.1, np.zeros(1))
    with pytest.raises(ValidationError):
        ScoringParams(1.0, 0.0, np.zeros(1))


def test_check_budget():
    check_budget([0.25, 0.75], 2)
    with pytest.raises(ValidationError):
        check_budget([0.5, 0.6])
    with pytest.raises(ValidationError):
        check_budget([1.5, -0.5])
    with pytest.raises(ValidationError):
        check_budget([1.0], 2)


def test_rounded_budget_stays_on_simplex():
    rng = np.random.default_rng(3)
    for _ in range(200):
        b = rng.dirichlet(np.ones(7))
        r = rounded_budget(b)
        assert abs(r.sum() - 1.0) <= 1e-9
        assert np.all(np.abs(r - b) <= 2e-9)
        assert np.array_equal(rounded_budget(r), r)


# -- properties --------------------------------------------------------------

unit = st.floats(0.0, 0.99, allow_nan=False)


@st.composite
def relation(draw, max_m=6, max_t=6):
    m = draw(st.integers(1, max_m))
    t = draw(st.integers(1, max_t))
    M = draw(hnp.arrays(np.int8, (m, t), elements=st.integers(0, 1)))
    x = draw(hnp.arrays(np.int8, m, elements=st.integers(0, 1)))
    eta = draw(hnp.arrays(float, m, elements=unit))
    return M, x, eta


@settings(max_examples=200, deadline=None)
@given(relation())
def test_log_form_matches_product(case):
    M, x, eta = case
    prod = technique_success_product(M, x, eta)
    assert np.allclose(np.exp(technique_log_success(M, x, eta)), prod, rtol=1e-9, atol=0)


@settings(max_examples=200, deadline=None)
@given(relation(), st.floats(0, 5), st.data())
def test_fused_form_matches_two_step(case, lam, data):
    M, x, eta0 = case
    f = data.draw(hnp.arrays(float, len(x), elements=st.floats(0, 1)))
    two_step = technique_log_success(M, x, improve_efficacy(eta0, lam, f))
    fused = technique_log_success_budgeted(M, p_table(M, eta0), x, f, lam)
    assert np.allclose(fused, two_step, rtol=1e-9, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(relation(), st.floats(0, 3), st.data())
def test_monotone_in_selection_budget_and_skill(case, lam, data):
    M, x, eta0 = case
    f = data.draw(hnp.arrays(float, len(x), elements=st.floats(0, 0.5)))
    P = p_table(M, eta0)
    base = technique_log_success_budgeted(M, P, x, f, lam)
    i = data.draw(st.integers(0, len(x) - 1))
    more_x = x.copy()
    more_x[i] = 1
    assert np.all(technique_log_success_budgeted(M, P, more_x, f, lam) <= base + 1e-12)
    assert np.all(technique_log_success_budgeted(M, P, x, f + 0.5, lam) <= base + 1e-12)
    assert np.all(technique_log_success_budgeted(M, P, x, f, lam + 1.0) <= base + 1e-12)
    assert np.all(base <= 0.0)


def test_duplicating_sequences_keeps_vulnerability():
    rng = np.random.default_rng(0)
    log_v = np.log(rng.uniform(0.01, 1, size=9))
    _, v1 = classify_and_vulnerability(log_v, 0.2)
    _, v2 = classify_and_vulnerability(np.concatenate([log_v, log_v]), 0.2)
    assert v1 == v2
