"""Per-household tax, cashback, and transfer computation; weighted aggregation.

Expenditures are treated as tax-inclusive and fixed across scenarios (no
behavioral response or price re-equilibration), so every tax is expenditure
times an inside rate.  The rent-regime base reducer applies per household per
month against the rent category only; unused reducer is not refundable
against other spending.  Cashback eligibility is a hard threshold on income
per capita with no phase-out.

Aggregation walks households in ascending id order and uses compensated
summation (math.fsum), which makes totals exact for the given addends and
therefore independent of input permutation or any internal parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .microdata import Household, Population
from .rates import Rate
from .schedule import CashbackClass, Schedule, TreatmentKind, effective_inside_rate


@dataclass(frozen=True)
class HouseholdIncidence:
    """Monthly tax position of one household under one policy state."""

    household_id: int
    gross_tax: float
    cashback: float
    transfer: float
    per_category_tax: Mapping[str, float]

    @property
    def net_tax(self) -> float:
        return self.gross_tax - self.cashback - self.transfer


@dataclass(frozen=True)
class AggregateIncidence:
    """Weight-expanded totals over a population."""

    total_gross: float
    total_cashback: float
    total_transfer: float
    total_net: float
    denominator_expenditure: float

    @property
    def net_burden(self) -> float:
        return self.total_net / self.denominator_expenditure


def taxable_base(household: Household, schedule: Schedule) -> dict[str, float]:
    """Per-category base: expenditure, less the rent regime's reducer."""
    out: dict[str, float] = {}
    for c in schedule.categories:
        spend = household.expenditures[c.id]
        if c.treatment.kind is TreatmentKind.RENT_REGIME:
            spend = max(0.0, spend - c.treatment.reducer)
        out[c.id] = spend
    return out


def household_tax(household: Household, schedule: Schedule, t_ref: Rate) -> HouseholdIncidence:
    """Gross reform tax by category at reference rate ``t_ref`` (outside)."""
    base = taxable_base(household, schedule)
    per_cat = {
        c.id: base[c.id] * effective_inside_rate(c, t_ref).value for c in schedule.categories
    }
    return HouseholdIncidence(
        household_id=household.id,
        gross_tax=math.fsum(per_cat.values()),
        cashback=0.0,
        transfer=0.0,
        per_category_tax=MappingProxyType(per_cat),
    )


def household_cashback(
    household: Household, incidence: HouseholdIncidence, schedule: Schedule
) -> float:
    """Refund owed to the household given its per-category taxes."""
    if household.income_per_capita > schedule.eligibility_threshold:
        return 0.0
    return math.fsum(
        schedule.refund_share(c.cashback) * incidence.per_category_tax[c.id]
        for c in schedule.categories
    )


def with_cashback(
    household: Household, incidence: HouseholdIncidence, schedule: Schedule
) -> HouseholdIncidence:
    return replace(incidence, cashback=household_cashback(household, incidence, schedule))


def with_transfer(incidence: HouseholdIncidence, amount: float) -> HouseholdIncidence:
    return replace(incidence, transfer=amount)


def baseline_tax(household: Household, schedule: Schedule) -> HouseholdIncidence:
    """Pre-reform tax: expenditure times the configured effective inside rate."""
    per_cat = {
        c.id: household.expenditures[c.id] * c.baseline_effective.value
        for c in schedule.categories
    }
    return HouseholdIncidence(
        household_id=household.id,
        gross_tax=math.fsum(per_cat.values()),
        cashback=0.0,
        transfer=0.0,
        per_category_tax=MappingProxyType(per_cat),
    )


def denominator_expenditure(population: Population, schedule: Schedule) -> float:
    """Weighted monetary consumption over the in-denominator categories."""
    in_denom = [c.id for c in schedule.categories if c.in_denominator]
    return math.fsum(
        h.weight * math.fsum(h.expenditures[cid] for cid in in_denom)
        for h in sorted(population.households, key=lambda h: h.id)
    )


def aggregate(
    population: Population,
    incidences: Iterable[HouseholdIncidence],
    schedule: Schedule,
) -> AggregateIncidence:
    """Weight-expand per-household incidences into population totals."""
    by_id = {inc.household_id: inc for inc in incidences}
    expected = {h.id for h in population.households}
    if set(by_id) != expected:
        raise ValueError("need exactly one incidence per household")
    ordered = sorted(population.households, key=lambda h: h.id)
    weights = [h.weight for h in ordered]
    incs = [by_id[h.id] for h in ordered]
    total_gross = math.fsum(w * i.gross_tax for w, i in zip(weights, incs))
    total_cashback = math.fsum(w * i.cashback for w, i in zip(weights, incs))
    total_transfer = math.fsum(w * i.transfer for w, i in zip(weights, incs))
    total_net = math.fsum(w * i.net_tax for w, i in zip(weights, incs))
    return AggregateIncidence(
        total_gross=total_gross,
        total_cashback=total_cashback,
        total_transfer=total_transfer,
        total_net=total_net,
        denominator_expenditure=denominator_expenditure(population, schedule),
    )


def universal_transfer_amount(extra_revenue: float, population: Population) -> float:
    """Flat per-person amount that exhausts ``extra_revenue``."""
    if extra_revenue < 0:
        raise ValueError(f"extra revenue must be >= 0, got {extra_revenue}")
    persons = math.fsum(
        h.weight * h.residents for h in sorted(population.households, key=lambda h: h.id)
    )
    if persons <= 0:
        raise ValueError("population has no weighted persons")
    return extra_revenue / persons


class IncidenceCalculator:
    """Vectorized burden evaluation for repeated solves.

    Precomputes the taxable-base matrix once; each evaluation at a candidate
    rate is a matrix-vector product.  Kept numerically in lockstep with the
    per-household functions above (the test suite pins both paths together);
    the scalar functions remain the reference semantics.
    """

    def __init__(self, population: Population, schedule: Schedule) -> None:
        population.validate_against(schedule)
        self.population = population
        self.schedule = schedule
        self.households = sorted(population.households, key=lambda h: h.id)
        n = len(self.households)
        cats = schedule.categories
        self.weights = np.array([h.weight for h in self.households])
        self.eligible = np.array(
            [h.income_per_capita <= schedule.eligibility_threshold for h in self.households]
        )
        self.base = np.empty((n, len(cats)))
        for j, c in enumerate(cats):
            col = np.array([h.expenditures[c.id] for h in self.households])
            if c.treatment.kind is TreatmentKind.RENT_REGIME:
                col = np.maximum(0.0, col - c.treatment.reducer)
            self.base[:, j] = col
        self.refund_shares = np.array([schedule.refund_share(c.cashback) for c in cats])
        self.denominator = denominator_expenditure(population, schedule)

    def rate_vector(self, t_ref_outside: float) -> np.ndarray:
        t = Rate.outside(t_ref_outside)
        return np.array(
            [effective_inside_rate(c, t).value for c in self.schedule.categories]
        )

    def gross_per_household(self, t_ref_outside: float) -> np.ndarray:
        return self.base @ self.rate_vector(t_ref_outside)

    def cashback_per_household(self, t_ref_outside: float) -> np.ndarray:
        refund = self.base @ (self.rate_vector(t_ref_outside) * self.refund_shares)
        return np.where(self.eligible, refund, 0.0)

    def gross_total(self, t_ref_outside: float) -> float:
        return math.fsum(self.weights * self.gross_per_household(t_ref_outside))

    def cashback_total(self, t_ref_outside: float) -> float:
        return math.fsum(self.weights * self.cashback_per_household(t_ref_outside))

    def burden_with_fixed_cashback(self, t_ref_outside: float, fixed_cashback: float) -> float:
        return (self.gross_total(t_ref_outside) - fixed_cashback) / self.denominator

    def burden_simultaneous(self, t_ref_outside: float) -> float:
        """Net burden with cashback evaluated at the same rate."""
        return (
            self.gross_total(t_ref_outside) - self.cashback_total(t_ref_outside)
        ) / self.denominator
