"""Seller types, generation-cost models, and the dominance partial order.

Cost conventions: money is in k$, energy in MWh, so marginal quantities are
k$/MWh (numerically equal to $/kWh). Expected marginal cost is the right
derivative of the weather-expected cost, so a marginal unit at quantity q
counts as wind-covered only while available wind generation strictly
exceeds q.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ParameterDomainError
from .weather import WeatherModel

EQUAL_COST_TOL = 1e-12


@dataclass(frozen=True)
class SellerType:
    """One point of the seller's type set: an id, named cost parameters,
    and its prior weight."""

    id: str
    params: Mapping[str, float]
    prior_weight: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.prior_weight <= 1.0):
            raise ConfigurationError(
                f"type {self.id!r}: prior_weight {self.prior_weight} outside [0, 1]"
            )

    def param(self, name: str) -> float:
        try:
            return float(self.params[name])
        except KeyError:
            raise ConfigurationError(f"type {self.id!r}: missing parameter {name!r}") from None


@dataclass(frozen=True)
class TypeSpace:
    """Non-empty finite type set with normalized priors.

    dominance_split records which parameters raise vs lower the expected
    marginal cost; by default it is taken from the cost model.
    """

    types: tuple[SellerType, ...]
    dominance_split: Optional[tuple[tuple[str, ...], tuple[str, ...]]] = None

    def __post_init__(self) -> None:
        if not self.types:
            raise ConfigurationError("type space must be non-empty")
        ids = [t.id for t in self.types]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate type ids in {ids}")
        total = math.fsum(t.prior_weight for t in self.types)
        if abs(total - 1.0) > 1e-12:
            raise ConfigurationError(f"prior weights sum to {total!r}, not 1")

    def __iter__(self):
        return iter(self.types)

    def __len__(self) -> int:
        return len(self.types)

    def by_id(self, type_id: str) -> SellerType:
        for t in self.types:
            if t.id == type_id:
                return t
        raise ConfigurationError(f"unknown type id {type_id!r}")

    def subset(self, ids: Sequence[str]) -> "TypeSpace":
        """Admissible subset, keeping the original (unnormalized) priors.

        Excluded types decline the contract and contribute zero to the
        buyer's expectation, so the kept weights are not renormalized.
        """
        kept = tuple(t for t in self.types if t.id in set(ids))
        if not kept:
            raise ConfigurationError("admissible subset is empty")
        if len(kept) != len(set(ids)):
            missing = set(ids) - {t.id for t in kept}
            raise ConfigurationError(f"unknown type ids in admissible set: {sorted(missing)}")
        space = object.__new__(TypeSpace)
        object.__setattr__(space, "types", kept)
        object.__setattr__(space, "dominance_split", self.dominance_split)
        return space


def power_curve(x: SellerType, w: float) -> float:
    """Wind-turbine output (MWh) at speed w: zero below cut-in and above
    cut-out, gamma*w^3 up to rated speed, flat at gamma*v_r^3 after."""
    if w < 0.0:
        raise ParameterDomainError(f"negative wind speed {w}")
    v_ci, v_r, v_co = x.param("v_ci"), x.param("v_r"), x.param("v_co")
    gamma = x.param("gamma")
    if w < v_ci or w > v_co:
        return 0.0
    if w <= v_r:
        return gamma * w**3
    return gamma * v_r**3


class CostModel:
    """Maps (quantity, weather, type) to realized cost.

    Subclasses provide the realized-cost formula and, where available,
    analytic expected marginal costs. Realized cost must be convex and
    nondecreasing in q for fixed (w, x), and its value at q=0 must be the
    weather-independent startup cost c0 (checked by check_assumptions).
    """

    kind: str = "plugin"
    param_names: tuple[str, ...] = ()
    # A5 split: parameters that raise vs lower expected marginal cost.
    raising_params: tuple[str, ...] = ()
    lowering_params: tuple[str, ...] = ()

    def validate_type(self, x: SellerType) -> None:
        for name in self.param_names:
            v = x.param(name)
            if v < 0.0 or not math.isfinite(v):
                raise ParameterDomainError(f"type {x.id!r}: parameter {name}={v} invalid")

    def generation(self, x: SellerType, w: float) -> float:
        """Available wind generation (MWh) at speed w."""
        return 0.0

    def realized_cost(self, x: SellerType, q: float, w: float) -> float:
        raise NotImplementedError

    def expected_cost(self, x: SellerType, q: float, weather: WeatherModel) -> float:
        if q < 0.0:
            raise ParameterDomainError(f"negative quantity {q}")
        return math.fsum(p * self.realized_cost(x, q, w) for w, p in weather.states)

    def expected_cost_grid(
        self, x: SellerType, qs: np.ndarray, weather: WeatherModel
    ) -> np.ndarray:
        """Vectorized expected cost at an array of quantities."""
        return np.array([self.expected_cost(x, float(q), weather) for q in qs])

    def expected_marginal_cost(
        self, x: SellerType, q: float, weather: WeatherModel
    ) -> float:
        raise NotImplementedError

    def check_assumptions(
        self, space: TypeSpace, weather: WeatherModel, qs: np.ndarray
    ) -> None:
        """Hard checks of convexity and weather-free startup cost on a grid."""
        w_lo, w_hi = weather.speeds[0], weather.speeds[-1]
        for x in space:
            self.validate_type(x)
            c0 = x.param("c0")
            for w in (w_lo, w_hi):
                v = self.realized_cost(x, 0.0, w)
                if abs(v - c0) > 1e-9 * max(1.0, abs(c0)):
                    raise ConfigurationError(
                        f"type {x.id!r}: startup cost {v} at w={w} differs from c0={c0}"
                    )
            ec = self.expected_cost_grid(x, qs, weather)
            d = np.diff(ec)
            if np.any(d < -1e-9 * max(1.0, float(np.max(np.abs(ec))))):
                raise ConfigurationError(f"type {x.id!r}: expected cost decreasing in q")
            if np.any(np.diff(d) < -1e-9 * max(1.0, float(np.max(np.abs(d))))):
                raise ConfigurationError(f"type {x.id!r}: expected cost not convex in q")


class SimpleCostModel(CostModel):
    """Free wind generation gamma*w^3 plus a conventional plant with
    constant marginal cost: C(q,w,x) = c0 + theta_c * max(q - gamma*w^3, 0)."""

    kind = "simple"
    param_names = ("c0", "theta_c", "gamma")
    raising_params = ("c0", "theta_c")
    lowering_params = ("gamma",)

    def validate_type(self, x: SellerType) -> None:
        super().validate_type(x)
        if x.param("gamma") <= 0.0:
            raise ParameterDomainError(f"type {x.id!r}: gamma must be positive")

    def generation(self, x: SellerType, w: float) -> float:
        return x.param("gamma") * w**3

    def realized_cost(self, x: SellerType, q: float, w: float) -> float:
        if q < 0.0:
            raise ParameterDomainError(f"negative quantity {q}")
        return x.param("c0") + x.param("theta_c") * max(q - self.generation(x, w), 0.0)

    def expected_cost_grid(
        self, x: SellerType, qs: np.ndarray, weather: WeatherModel
    ) -> np.ndarray:
        qs = np.asarray(qs, dtype=float)
        if np.any(qs < 0.0):
            raise ParameterDomainError("negative quantity in grid")
        g = x.param("gamma") * np.array(weather.speeds) ** 3
        probs = np.array(weather.probs)
        short = np.maximum(qs[None, :] - g[:, None], 0.0)
        return x.param("c0") + x.param("theta_c") * probs @ short

    def expected_marginal_cost(
        self, x: SellerType, q: float, weather: WeatherModel
    ) -> float:
        if q < 0.0:
            raise ParameterDomainError(f"negative quantity {q}")
        theta_c = x.param("theta_c")
        gamma = x.param("gamma")
        return theta_c * math.fsum(p for w, p in weather.states if gamma * w**3 <= q)


class WindConventionalCostModel(CostModel):
    """Wind turbine with the cut-in/rated/cut-out power curve plus a
    conventional plant: C(q,w,x) = c0 + theta_w*min(q,g(w)) + theta_c*max(q-g(w),0)."""

    kind = "wind_conventional"
    param_names = ("c0", "theta_w", "theta_c", "v_ci", "v_r", "v_co", "gamma")
    raising_params = ("c0", "theta_w", "theta_c", "v_ci")
    lowering_params = ("v_r", "v_co", "gamma")

    def validate_type(self, x: SellerType) -> None:
        super().validate_type(x)
        if not (x.param("v_ci") < x.param("v_r") < x.param("v_co")):
            raise ParameterDomainError(f"type {x.id!r}: need v_ci < v_r < v_co")
        if x.param("gamma") <= 0.0:
            raise ParameterDomainError(f"type {x.id!r}: gamma must be positive")

    def generation(self, x: SellerType, w: float) -> float:
        return power_curve(x, w)

    def realized_cost(self, x: SellerType, q: float, w: float) -> float:
        if q < 0.0:
            raise ParameterDomainError(f"negative quantity {q}")
        g = power_curve(x, w)
        return (
            x.param("c0")
            + x.param("theta_w") * min(q, g)
            + x.param("theta_c") * max(q - g, 0.0)
        )

    def _gen_array(self, x: SellerType, weather: WeatherModel) -> np.ndarray:
        return np.array([power_curve(x, w) for w in weather.speeds])

    def expected_cost_grid(
        self, x: SellerType, qs: np.ndarray, weather: WeatherModel
    ) -> np.ndarray:
        qs = np.asarray(qs, dtype=float)
        if np.any(qs < 0.0):
            raise ParameterDomainError("negative quantity in grid")
        g = self._gen_array(x, weather)
        probs = np.array(weather.probs)
        wind = np.minimum(qs[None, :], g[:, None])
        short = np.maximum(qs[None, :] - g[:, None], 0.0)
        return x.param("c0") + probs @ (x.param("theta_w") * wind + x.param("theta_c") * short)

    def expected_marginal_cost(
        self, x: SellerType, q: float, weather: WeatherModel
    ) -> float:
        if q < 0.0:
            raise ParameterDomainError(f"negative quantity {q}")
        g = self._gen_array(x, weather)
        probs = np.array(weather.probs)
        p_short = float(probs[g <= q].sum())
        return x.param("theta_w") * (1.0 - p_short) + x.param("theta_c") * p_short


class PluginCostModel(CostModel):
    """User-supplied realized-cost function with a declared A5 split.

    The declared monotone directions and the A2 convexity/startup
    invariants are verified numerically at load time via check_assumptions;
    violations are hard errors.
    """

    kind = "plugin"

    def __init__(
        self,
        realized: Callable[[SellerType, float, float], float],
        param_names: Sequence[str],
        raising_params: Sequence[str],
        lowering_params: Sequence[str],
        generation: Optional[Callable[[SellerType, float], float]] = None,
        fd_step: float = 1e-3,
    ) -> None:
        declared = set(raising_params) | set(lowering_params)
        if declared - set(param_names):
            raise ConfigurationError("A5 split names parameters not in param_names")
        self._realized = realized
        self._generation = generation
        self.param_names = tuple(param_names)
        self.raising_params = tuple(raising_params)
        self.lowering_params = tuple(lowering_params)
        self.fd_step = float(fd_step)

    def generation(self, x: SellerType, w: float) -> float:
        if self._generation is None:
            return 0.0
        return self._generation(x, w)

    def realized_cost(self, x: SellerType, q: float, w: float) -> float:
        if q < 0.0:
            raise ParameterDomainError(f"negative quantity {q}")
        return self._realized(x, q, w)

    def expected_marginal_cost(
        self, x: SellerType, q: float, weather: WeatherModel
    ) -> float:
        # Central finite difference; one-sided at the q=0 boundary.
        h = self.fd_step
        lo = max(q - h, 0.0)
        hi = q + h
        return (self.expected_cost(x, hi, weather) - self.expected_cost(x, lo, weather)) / (
            hi - lo
        )


BUILTIN_MODELS = {
    "simple": SimpleCostModel,
    "wind_conventional": WindConventionalCostModel,
}


def make_model(kind: str) -> CostModel:
    try:
        return BUILTIN_MODELS[kind]()
    except KeyError:
        raise ConfigurationError(f"unknown cost model kind {kind!r}") from None


def dominates(
    x: SellerType,
    y: SellerType,
    model: CostModel,
    weather: WeatherModel,
    qs: np.ndarray,
) -> str:
    """Compare expected cost curves on a grid.

    Returns "better" when x's expected cost is everywhere <= y's with a
    strict gap somewhere, "worse" for the reverse, "equal" when the curves
    coincide within tolerance, else "incomparable".
    """
    ex = model.expected_cost_grid(x, qs, weather)
    ey = model.expected_cost_grid(y, qs, weather)
    tol = EQUAL_COST_TOL * max(1.0, float(np.max(np.abs(ex))), float(np.max(np.abs(ey))))
    d = ex - ey
    if np.all(np.abs(d) <= tol):
        return "equal"
    if np.all(d <= tol):
        return "better"
    if np.all(d >= -tol):
        return "worse"
    return "incomparable"


def find_worst_type(
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
    qs: np.ndarray,
) -> Optional[SellerType]:
    """The type every other type dominates (or equals), if one exists."""
    for cand in space:
        if all(
            dominates(other, cand, model, weather, qs) in ("better", "equal")
            for other in space
            if other.id != cand.id
        ):
            return cand
    return None
