"""Consumption-tax microsimulation on household expenditure microdata.

The package applies a multi-tier tax schedule to per-household spending,
solves the revenue-neutral reference rate under cashback feedback, and
builds distributional incidence tables by expenditure quintile.
"""

from .rates import Rate, RateBasis, apply_fraction, compose_selective, to_inside, to_outside
from .schedule import (
    CashbackClass,
    Category,
    Schedule,
    ScheduleError,
    TaxTreatment,
    TreatmentKind,
    bundled_schedule_path,
    default_removal_selectors,
    effective_inside_rate,
    load_schedule,
    parse_schedule,
    resolve_selector,
    save_schedule,
    with_removal,
)
from .microdata import (
    Household,
    MicrodataError,
    Population,
    Provenance,
    generate_synthetic,
    load_population,
    write_population,
)
from .engine import (
    AggregateIncidence,
    HouseholdIncidence,
    IncidenceCalculator,
    aggregate,
    baseline_tax,
    denominator_expenditure,
    household_cashback,
    household_tax,
    universal_transfer_amount,
)
from .solver import (
    NonConvergenceError,
    RateImpactRow,
    SolveResult,
    SolverError,
    TraceRow,
    UnreachableTargetError,
    marginal_rate_impact,
    solve_given_cashback,
    solve_with_cashback,
)
from .analysis import (
    BudgetShareRow,
    QuintileAssignment,
    ScenarioName,
    ScenarioResult,
    ScenarioSpec,
    assign_quintiles,
    budget_share_table,
    build_scenario_table,
    compute_scenarios,
    run_scenario,
    scenario_quintile_stats,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateIncidence",
    "BudgetShareRow",
    "CashbackClass",
    "Category",
    "Household",
    "HouseholdIncidence",
    "IncidenceCalculator",
    "MicrodataError",
    "NonConvergenceError",
    "Population",
    "Provenance",
    "QuintileAssignment",
    "Rate",
    "RateBasis",
    "RateImpactRow",
    "ScenarioName",
    "ScenarioResult",
    "ScenarioSpec",
    "Schedule",
    "ScheduleError",
    "SolveResult",
    "SolverError",
    "TaxTreatment",
    "TraceRow",
    "TreatmentKind",
    "UnreachableTargetError",
    "aggregate",
    "apply_fraction",
    "assign_quintiles",
    "baseline_tax",
    "budget_share_table",
    "build_scenario_table",
    "bundled_schedule_path",
    "compose_selective",
    "compute_scenarios",
    "default_removal_selectors",
    "denominator_expenditure",
    "effective_inside_rate",
    "generate_synthetic",
    "household_cashback",
    "household_tax",
    "load_population",
    "load_schedule",
    "marginal_rate_impact",
    "parse_schedule",
    "resolve_selector",
    "run_scenario",
    "save_schedule",
    "scenario_quintile_stats",
    "solve_given_cashback",
    "solve_with_cashback",
    "to_inside",
    "to_outside",
    "universal_transfer_amount",
    "with_removal",
    "write_population",
]
