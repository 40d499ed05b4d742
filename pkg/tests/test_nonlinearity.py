import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

import oracles
from freefront.nonlinearity import (
    DomainError,
    Nonlinearity,
    classify_nonlinearity,
    eval_F,
    eval_f,
    lipschitz_bound,
    load_tabulated_csv,
    nonlinearity_from_config,
)


def test_logistic_values():
    nl = Nonlinearity.logistic()
    assert eval_f(nl, 0.5) == 0.25
    assert eval_F(nl, 1.0) == pytest.approx(1.0 / 6.0, abs=1e-15)


def test_bistable_area():
    nl = Nonlinearity.cubic_bistable(0.25)
    assert eval_F(nl, 1.0) == pytest.approx((1 - 2 * 0.25) / 12, abs=1e-15)


def test_out_of_domain_raises():
    with pytest.raises(DomainError):
        eval_f(Nonlinearity.logistic(), 10.0)
    with pytest.raises(DomainError):
        Nonlinearity.logistic().F(np.array([-0.1, 0.5]))


def test_tabulated_must_start_at_origin():
    with pytest.raises(ValueError):
        Nonlinearity.tabulated([0.0, 1.0], [0.1, 0.0], [1.0, -1.0])


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.0, 2.0), b=st.floats(0.0, 2.0), theta=st.floats(0.05, 0.45))
def test_F_is_antiderivative(a, b, theta):
    for nl in (Nonlinearity.logistic(), Nonlinearity.cubic_bistable(theta)):
        ref = integrate.quad(lambda s: float(nl.f(s)), a, b, epsabs=1e-14)[0]
        assert float(nl.F(b) - nl.F(a)) == pytest.approx(ref, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.0, 0.99), w=st.floats(1e-12, 0.5))
def test_mean_f_matches_antiderivative(a, w):
    nl = Nonlinearity.logistic()
    b = a + w
    ref = (a + b) / 2 - (a * a + a * b + b * b) / 3  # exact mean of u - u^2
    assert float(nl.mean_f(a, b)) == pytest.approx(ref, rel=1e-12, abs=1e-15)


def test_tabulated_reproduces_closed_form():
    u = np.linspace(0.0, 2.0, 201)
    tab = Nonlinearity.tabulated(u, oracles.logistic_f(u), 1 - 2 * u)
    grid = np.linspace(0.0, 2.0, 997)
    # cubic Hermite reproduces the quadratic exactly
    assert np.max(np.abs(tab.f(grid) - oracles.logistic_f(grid))) < 1e-13
    assert np.max(np.abs(tab.F(grid) - oracles.logistic_F(grid))) < 1e-13


def test_classification():
    assert classify_nonlinearity(Nonlinearity.logistic()).kind == "monostable"
    c = classify_nonlinearity(Nonlinearity.cubic_bistable(0.3))
    assert c.kind == "bistable" and c.theta == pytest.approx(0.3)
    assert classify_nonlinearity(Nonlinearity.zero()).kind == "other"
    # bistable with non-positive area is not of bistable type
    assert classify_nonlinearity(Nonlinearity.cubic_bistable(0.6)).kind == "other"


def test_lipschitz_bound_against_sampling():
    for nl in (Nonlinearity.logistic(), Nonlinearity.cubic_bistable(0.25)):
        grid = np.linspace(0, 1.5, 100001)
        assert lipschitz_bound(nl, 1.5) >= np.max(np.abs(nl.df(grid))) - 1e-12
        assert lipschitz_bound(nl, 1.5) <= np.max(np.abs(nl.df(grid))) + 1e-6
    u = np.linspace(0, 3, 61)
    tab = Nonlinearity.tabulated(u, oracles.logistic_f(u), 1 - 2 * u)
    assert lipschitz_bound(tab, 3.0) == pytest.approx(5.0, rel=1e-9)


def test_config_round_trip(tmp_path):
    for nl in (Nonlinearity.logistic(2.0), Nonlinearity.cubic_bistable(0.2), Nonlinearity.zero()):
        assert nonlinearity_from_config(nl.to_config()) == nl
    path = tmp_path / "f.csv"
    u = np.linspace(0, 2, 11)
    rows = "u,f,df\n" + "\n".join(f"{a},{a*(1-a)},{1-2*a}" for a in u)
    path.write_text(rows)
    assert load_tabulated_csv(path).shape == (11, 3)
    tab = nonlinearity_from_config({"kind": "tabulated", "csv": "f.csv"}, tmp_path)
    assert tab.domain_cap == 2.0
    with pytest.raises(ValueError):
        nonlinearity_from_config({"kind": "cosine"})


def test_stable_zero():
    assert Nonlinearity.logistic().positive_stable_zero() == 1.0
    assert Nonlinearity.cubic_bistable(0.25).positive_stable_zero() == 1.0
    assert math.isclose(Nonlinearity.logistic(3.0).zeros()[0], 1.0)
