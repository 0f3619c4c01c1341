"""Optimal nonlinear-pricing contracts for energy procurement from a seller
with private renewable and conventional generation costs."""

__version__ = "0.1.0"

from .costmodel import (
    CostModel,
    PluginCostModel,
    SellerType,
    SimpleCostModel,
    TypeSpace,
    WindConventionalCostModel,
    dominates,
    find_worst_type,
    power_curve,
)
from .errors import (
    ConfigurationError,
    ParameterDomainError,
    ProcureError,
    UnsupportedConfigurationError,
)
from .mechanism import (
    BuyerUtility,
    ContractOutcome,
    PriceSchedule,
    QuantityGrid,
    best_response,
    build_price_schedule,
    anchor_payment,
    exclusion_search,
    optimal_marginal_price,
    solve,
    survival_probability,
)
from .settlement import expost_payment, risk_payment, settlement_table
from .weather import WeatherModel, empirical_model, expect, weibull_model

__all__ = [
    "BuyerUtility",
    "ConfigurationError",
    "ContractOutcome",
    "CostModel",
    "ParameterDomainError",
    "PluginCostModel",
    "PriceSchedule",
    "ProcureError",
    "QuantityGrid",
    "SellerType",
    "SimpleCostModel",
    "TypeSpace",
    "UnsupportedConfigurationError",
    "WeatherModel",
    "WindConventionalCostModel",
    "anchor_payment",
    "best_response",
    "build_price_schedule",
    "dominates",
    "empirical_model",
    "exclusion_search",
    "expect",
    "expost_payment",
    "find_worst_type",
    "optimal_marginal_price",
    "power_curve",
    "risk_payment",
    "settlement_table",
    "solve",
    "survival_probability",
    "weibull_model",
]
