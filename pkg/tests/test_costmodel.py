import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from procure.costmodel import (
    SellerType,
    SimpleCostModel,
    TypeSpace,
    WindConventionalCostModel,
    PluginCostModel,
    dominates,
    find_worst_type,
    make_model,
    power_curve,
)
from procure.errors import ConfigurationError, ParameterDomainError
from procure.weather import WeatherModel, weibull_model


def wc_type(tid="a", c0=4.0, theta_w=0.2, theta_c=1.2, v_ci=3.0, v_r=13.0,
            v_co=20.0, gamma=1.0, prior=1.0):
    return SellerType(
        tid,
        {"c0": c0, "theta_w": theta_w, "theta_c": theta_c, "v_ci": v_ci,
         "v_r": v_r, "v_co": v_co, "gamma": gamma},
        prior,
    )


def simple_type(tid="s", c0=4.0, theta_c=1.2, gamma=1.0, prior=1.0):
    return SellerType(tid, {"c0": c0, "theta_c": theta_c, "gamma": gamma}, prior)


@pytest.fixture(scope="module")
def weather():
    return weibull_model(3.0, 5.0, 200)


def test_power_curve_branches():
    x = wc_type()
    assert power_curve(x, 0.0) == 0.0
    assert power_curve(x, 10.0) == 1000.0
    assert power_curve(x, 15.0) == 13.0**3  # 2197, flat between rated and cut-out
    assert power_curve(x, 25.0) == 0.0
    with pytest.raises(ParameterDomainError):
        power_curve(x, -1.0)


def test_realized_cost_wind_conventional():
    model = WindConventionalCostModel()
    x = wc_type()
    # g(10 m/s) = 1000 MWh
    assert model.realized_cost(x, 1500.0, 10.0) == pytest.approx(804.0, abs=1e-12)
    assert model.realized_cost(x, 500.0, 10.0) == pytest.approx(104.0, abs=1e-12)
    with pytest.raises(ParameterDomainError):
        model.realized_cost(x, -1.0, 10.0)


def test_startup_cost_is_weather_free(weather):
    for model, x in (
        (SimpleCostModel(), simple_type()),
        (WindConventionalCostModel(), wc_type()),
    ):
        for w in weather.speeds[::40]:
            assert model.realized_cost(x, 0.0, w) == x.param("c0")


def test_expected_cost_point_mass():
    model = SimpleCostModel()
    x = simple_type(gamma=2.0)
    point = WeatherModel(states=((4.0, 1.0),))
    q = 200.0
    assert model.expected_cost(x, q, point) == model.realized_cost(x, q, 4.0)


def test_expected_cost_matches_high_resolution_quadrature():
    x = simple_type(c0=4.0, theta_c=1.2, gamma=1.0)
    model = SimpleCostModel()
    coarse = weibull_model(3.0, 5.0, 200)
    fine = weibull_model(3.0, 5.0, 20000)
    for q in (10.0, 60.0, 150.0, 400.0):
        a = model.expected_cost(x, q, coarse)
        b = model.expected_cost(x, q, fine)
        assert a == pytest.approx(b, rel=2e-3)


def test_expected_cost_grid_matches_scalar(weather):
    qs = np.linspace(0.0, 300.0, 31)
    for model, x in (
        (SimpleCostModel(), simple_type(gamma=2.0)),
        (WindConventionalCostModel(), wc_type(gamma=2.0)),
    ):
        grid_vals = model.expected_cost_grid(x, qs, weather)
        scalar = [model.expected_cost(x, float(q), weather) for q in qs]
        assert np.allclose(grid_vals, scalar, rtol=0, atol=1e-9)


def test_marginal_cost_simple_at_zero(weather):
    model = SimpleCostModel()
    # no atom at w=0, so the first marginal unit is free
    assert model.expected_marginal_cost(simple_type(), 0.0, weather) == 0.0


def test_marginal_cost_wind_conventional_saturates(weather):
    model = WindConventionalCostModel()
    x = wc_type()
    q = x.param("gamma") * x.param("v_r") ** 3 + 1.0
    assert model.expected_marginal_cost(x, q, weather) == pytest.approx(
        x.param("theta_c"), abs=1e-12
    )


def test_marginal_cost_simple_matches_cdf_formula(weather):
    model = SimpleCostModel()
    x = simple_type(theta_c=1.2, gamma=2.0)
    for q in np.linspace(1.0, 600.0, 20):
        want = 1.2 * weather.cdf((q / 2.0) ** (1.0 / 3.0))
        got = model.expected_marginal_cost(x, float(q), weather)
        assert got == pytest.approx(want, rel=1e-6, abs=1e-12)


def test_marginal_cost_matches_finite_difference_off_kinks(weather):
    # expected cost is piecewise linear with kinks at gamma*w^3; probe
    # midpoints between adjacent kinks where the slope is exact
    model = SimpleCostModel()
    x = simple_type(theta_c=1.2, gamma=2.0)
    kinks = sorted(2.0 * w**3 for w in weather.speeds)
    mids = [(a + b) / 2.0 for a, b in zip(kinks[:40], kinks[1:41])]
    for q in mids[::2]:
        h = min(1e-6 * max(q, 1.0), 0.1)
        fd = (
            model.expected_cost(x, q + h, weather)
            - model.expected_cost(x, q - h, weather)
        ) / (2.0 * h)
        got = model.expected_marginal_cost(x, q, weather)
        assert got == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_marginal_cost_nondecreasing(weather):
    qs = np.linspace(0.0, 2000.0, 200)
    for model, x in (
        (SimpleCostModel(), simple_type(gamma=2.0)),
        (WindConventionalCostModel(), wc_type(gamma=2.0)),
    ):
        vals = [model.expected_marginal_cost(x, float(q), weather) for q in qs]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_dominates_examples(weather):
    model = SimpleCostModel()
    qs = np.linspace(0.0, 500.0, 101)
    x1 = simple_type("g1", gamma=1.0)
    x2 = simple_type("g2", gamma=2.0)
    assert dominates(x1, x1, model, weather, qs) == "equal"
    assert dominates(x2, x1, model, weather, qs) == "better"
    assert dominates(x1, x2, model, weather, qs) == "worse"


def test_dominates_incomparable_pair(weather):
    model = WindConventionalCostModel()
    qs = np.linspace(0.0, 500.0, 101)
    b = wc_type("b", c0=4.0, theta_w=0.2, theta_c=1.2, gamma=2.0)
    c = wc_type("c", c0=5.0, theta_w=0.1, theta_c=1.2, gamma=1.0)
    assert dominates(b, c, model, weather, qs) == "incomparable"


def test_find_worst_type(weather):
    model = SimpleCostModel()
    qs = np.linspace(0.0, 500.0, 101)
    single = TypeSpace((simple_type("only"),))
    assert find_worst_type(single, model, weather, qs).id == "only"
    pair = TypeSpace(
        (simple_type("g1", gamma=1.0, prior=0.5), simple_type("g2", gamma=2.0, prior=0.5))
    )
    assert find_worst_type(pair, model, weather, qs).id == "g1"


def test_no_worst_type_in_crossing_pair(weather):
    model = SimpleCostModel()
    qs = np.linspace(0.0, 500.0, 101)
    crossing = TypeSpace(
        (
            simple_type("cheap_start", c0=1.0, theta_c=1.4, gamma=1.0, prior=0.5),
            simple_type("cheap_margin", c0=5.0, theta_c=0.5, gamma=1.0, prior=0.5),
        )
    )
    assert find_worst_type(crossing, model, weather, qs) is None


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_dominates_is_a_partial_order(data):
    weather = weibull_model(3.0, 5.0, 40)
    model = SimpleCostModel()
    qs = np.linspace(0.0, 300.0, 25)
    types = []
    for i in range(3):
        types.append(
            simple_type(
                f"t{i}",
                c0=data.draw(st.floats(0.5, 5.0), label=f"c0_{i}"),
                theta_c=data.draw(st.floats(0.3, 1.5), label=f"th_{i}"),
                gamma=data.draw(st.floats(0.5, 3.0), label=f"gm_{i}"),
            )
        )
    rel = {
        (a.id, b.id): dominates(a, b, model, weather, qs)
        for a, b in itertools.permutations(types, 2)
    }
    for a, b in itertools.permutations(types, 2):
        # antisymmetry
        flipped = {"better": "worse", "worse": "better"}.get(
            rel[(a.id, b.id)], rel[(a.id, b.id)]
        )
        assert rel[(b.id, a.id)] == flipped
    for a, b, c in itertools.permutations(types, 3):
        # transitivity
        if rel[(a.id, b.id)] == "better" and rel[(b.id, c.id)] == "better":
            assert rel[(a.id, c.id)] in ("better", "equal")


def test_type_space_validation():
    with pytest.raises(ConfigurationError):
        TypeSpace(())
    with pytest.raises(ConfigurationError):
        TypeSpace((simple_type("x", prior=0.5), simple_type("x", prior=0.5)))
    with pytest.raises(ConfigurationError):
        TypeSpace((simple_type("x", prior=0.4), simple_type("y", prior=0.4)))


def test_subset_keeps_unnormalized_priors():
    space = TypeSpace(
        (simple_type("x", prior=0.25), simple_type("y", prior=0.75))
    )
    sub = space.subset(["y"])
    assert [t.id for t in sub] == ["y"]
    assert sub.by_id("y").prior_weight == 0.75
    with pytest.raises(ConfigurationError):
        space.subset(["nope"])
    with pytest.raises(ConfigurationError):
        space.subset([])


def test_make_model():
    assert make_model("simple").kind == "simple"
    assert make_model("wind_conventional").kind == "wind_conventional"
    with pytest.raises(ConfigurationError):
        make_model("unknown")


def test_check_assumptions_rejects_bad_plugin(weather):
    # realized cost that depends on the weather at q=0 violates the
    # weather-free startup requirement
    bad = PluginCostModel(
        realized=lambda x, q, w: x.param("c0") + 0.1 * w + q,
        param_names=("c0",),
        raising_params=("c0",),
        lowering_params=(),
    )
    space = TypeSpace((SellerType("p", {"c0": 1.0}, 1.0),))
    with pytest.raises(ConfigurationError):
        bad.check_assumptions(space, weather, np.linspace(0.0, 10.0, 5))


def test_check_assumptions_rejects_concave_plugin(weather):
    concave = PluginCostModel(
        realized=lambda x, q, w: x.param("c0") + math.sqrt(q),
        param_names=("c0",),
        raising_params=("c0",),
        lowering_params=(),
    )
    space = TypeSpace((SellerType("p", {"c0": 1.0}, 1.0),))
    with pytest.raises(ConfigurationError):
        concave.check_assumptions(space, weather, np.linspace(0.0, 10.0, 11))


def test_plugin_marginal_cost_finite_difference(weather):
    model = PluginCostModel(
        realized=lambda x, q, w: x.param("c0") + 0.5 * q,
        param_names=("c0",),
        raising_params=("c0",),
        lowering_params=(),
    )
    x = SellerType("p", {"c0": 1.0}, 1.0)
    assert model.expected_marginal_cost(x, 5.0, weather) == pytest.approx(0.5, abs=1e-9)


def test_wind_conventional_rejects_bad_speeds(weather):
    model = WindConventionalCostModel()
    x = wc_type(v_ci=13.0, v_r=3.0)
    with pytest.raises(ParameterDomainError):
        model.validate_type(x)
