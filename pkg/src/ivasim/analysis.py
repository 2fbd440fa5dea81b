"""Quintile construction, counterfactual scenarios, and distributional tables.

Quintiles are household-weight quintiles: households are ranked by per-capita
total (monetary plus non-monetary) expenditure, ties broken by id, and the
cumulative expansion weight is cut at the 20% marks.  Ranking deliberately
includes non-monetary consumption while the tax base is monetary only, so
both expenditure figures are reported side by side.

Scenarios share one neutrality constraint: the population's net tax (after
cashback or transfers) must reproduce the measured pre-reform burden.  The
reform scenario solves its reference rate for that burden; the uniform-VAT
variant retaxes the whole denominator base at a single rate with no cashback;
the transfer-swap variant keeps the reform's solved rate, retaxes the
food-basket group, and recycles the extra revenue as a flat per-person
transfer (re-solving the rate instead is available behind a switch).

Outputs are plain data plus deterministic CSV/text renderings: one decimal
for percentages, whole currency units for monthly amounts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .engine import (
    AggregateIncidence,
    HouseholdIncidence,
    aggregate,
    baseline_tax,
    household_tax,
    universal_transfer_amount,
    with_cashback,
    with_transfer,
)
from .microdata import Household, Population
from .rates import Rate
from .schedule import Schedule, TaxTreatment, TreatmentKind, with_removal
from .solver import SolveResult, solve_given_cashback, solve_with_cashback


# -- quintiles ---------------------------------------------------------------


@dataclass(frozen=True)
class QuintileAssignment:
    quintile_of: Mapping[int, int]  # household id -> 1..5
    boundaries: tuple[float, ...]  # per-capita totals opening quintiles 2..5

    def members(self, population: Population, quintile: int) -> tuple[Household, ...]:
        return tuple(
            h for h in population.households if self.quintile_of[h.id] == quintile
        )


def assign_quintiles(population: Population) -> QuintileAssignment:
    """Partition cumulative household weight into fifths by per-capita total."""
    ordered = sorted(population.households, key=lambda h: (h.per_capita_total(), h.id))
    total_weight = population.total_weight()
    quintile_of: dict[int, int] = {}
    boundaries: list[float] = []
    cum = 0.0
    previous = 0
    for h in ordered:
        q = min(5, int(5.0 * cum / total_weight) + 1)
        quintile_of[h.id] = q
        if q != previous:
            if q > 1:
                boundaries.append(h.per_capita_total())
            previous = q
        cum += h.weight
    return QuintileAssignment(quintile_of, tuple(boundaries))


def _weighted_mean(pairs: Iterable[tuple[float, float]]) -> float:
    ws, xs = [], []
    for w, x in pairs:
        ws.append(w)
        xs.append(w * x)
    denom = math.fsum(ws)
    return math.fsum(xs) / denom if denom > 0 else 0.0


# -- budget shares (treatment group x quintile) --------------------------------


@dataclass(frozen=True)
class BudgetShareRow:
    group: str
    cells: tuple[float, ...]  # q1..q5 then total, in percent


def budget_share_table(
    population: Population, schedule: Schedule, quintiles: QuintileAssignment
) -> tuple[BudgetShareRow, ...]:
    """Mean share of each treatment group in the monetary budget, by quintile.

    A household's share vector is its group spending over its monetary total,
    so the groups of one column always add up to 100.  Households with no
    monetary spending carry no shares and are left out of the means.
    """
    groups = schedule.groups()
    members: dict[str, tuple[str, ...]] = {
        g: tuple(c.id for c in schedule.categories if c.group == g) for g in groups
    }
    ordered = sorted(population.households, key=lambda h: h.id)
    columns: list[Sequence[Household]] = [
        [h for h in ordered if quintiles.quintile_of[h.id] == q] for q in range(1, 6)
    ]
    columns.append(ordered)  # total column
    rows = []
    for g in groups:
        cells = []
        for column in columns:
            cells.append(
                100.0
                * _weighted_mean(
                    (
                        h.weight,
                        math.fsum(h.expenditures[cid] for cid in members[g])
                        / h.monetary_total(),
                    )
                    for h in column
                    if h.monetary_total() > 0
                )
            )
        rows.append(BudgetShareRow(g, tuple(cells)))
    totals = tuple(math.fsum(r.cells[i] for r in rows) for i in range(6))
    rows.append(BudgetShareRow("total", totals))
    return tuple(rows)


# -- scenarios -----------------------------------------------------------------


class ScenarioName(enum.Enum):
    BASELINE = "baseline"
    UNIFORM_VAT = "uniform_vat"
    PLP68 = "plp68"
    PLP68_TRANSFER_SWAP = "plp68_transfer_swap"


SCENARIO_LABELS = {
    ScenarioName.BASELINE: "Sistema vigente",
    ScenarioName.UNIFORM_VAT: "IVA uniforme",
    ScenarioName.PLP68: "PLP 68/2024",
    ScenarioName.PLP68_TRANSFER_SWAP: "PLP 68 sem isenção da cesta, com transferência universal",
}


@dataclass(frozen=True)
class ScenarioSpec:
    name: ScenarioName
    swap_selector: str = "cesta_basica"  # transfer swap: group to retax
    resolve_rate: bool = False  # transfer swap: re-solve instead of holding the rate


@dataclass(frozen=True)
class ScenarioResult:
    spec: ScenarioSpec
    label: str
    t_ref: Rate | None  # None for the pre-reform baseline
    transfer_per_person: float
    incidences: tuple[HouseholdIncidence, ...]  # ascending household id
    totals: AggregateIncidence


def _uniform_vat_schedule(schedule: Schedule) -> Schedule:
    """Every in-denominator category at the reference rate, nothing else taxed."""
    categories = tuple(
        replace(
            c,
            treatment=TaxTreatment.reference_rate()
            if c.in_denominator
            else TaxTreatment.untaxed(),
        )
        for c in schedule.categories
    )
    return replace(
        schedule,
        categories=categories,
        utility_refund_share=0.0,
        standard_refund_share=0.0,
    )


def _run_baseline(population: Population, schedule: Schedule, spec: ScenarioSpec) -> ScenarioResult:
    ordered = sorted(population.households, key=lambda h: h.id)
    incidences = tuple(baseline_tax(h, schedule) for h in ordered)
    return ScenarioResult(
        spec=spec,
        label=SCENARIO_LABELS[ScenarioName.BASELINE],
        t_ref=None,
        transfer_per_person=0.0,
        incidences=incidences,
        totals=aggregate(population, incidences, schedule),
    )


def run_scenario(
    population: Population,
    schedule: Schedule,
    spec: ScenarioSpec,
    baseline: ScenarioResult | None = None,
    plp68: ScenarioResult | None = None,
) -> ScenarioResult:
    """Evaluate one scenario; reform scenarios are solved to the baseline burden."""
    if spec.name is ScenarioName.BASELINE:
        return _run_baseline(population, schedule, spec)
    if baseline is None:
        baseline = _run_baseline(population, schedule, ScenarioSpec(ScenarioName.BASELINE))
    target = baseline.totals.net_burden
    ordered = sorted(population.households, key=lambda h: h.id)

    if spec.name is ScenarioName.UNIFORM_VAT:
        uni = _uniform_vat_schedule(schedule)
        rate = solve_given_cashback(population, uni, 0.0, target)
        incidences = tuple(household_tax(h, uni, rate) for h in ordered)
        return ScenarioResult(
            spec, SCENARIO_LABELS[spec.name], rate, 0.0, incidences,
            aggregate(population, incidences, uni),
        )

    if spec.name is ScenarioName.PLP68:
        solved = solve_with_cashback(population, schedule, target)
        incidences = tuple(
            with_cashback(h, household_tax(h, schedule, solved.t_ref), schedule)
            for h in ordered
        )
        return ScenarioResult(
            spec, SCENARIO_LABELS[spec.name], solved.t_ref, 0.0, incidences,
            aggregate(population, incidences, schedule),
        )

    if spec.name is ScenarioName.PLP68_TRANSFER_SWAP:
        swapped = with_removal(schedule, spec.swap_selector)
        if spec.resolve_rate:
            rate = solve_with_cashback(population, swapped, target).t_ref
        elif plp68 is not None:
            rate = plp68.t_ref
        else:
            rate = solve_with_cashback(population, schedule, target).t_ref
        pre_transfer = tuple(
            with_cashback(h, household_tax(h, swapped, rate), swapped) for h in ordered
        )
        extra = aggregate(population, pre_transfer, swapped).total_net - baseline.totals.total_net
        if extra < 0:
            if extra < -1e-6 * abs(baseline.totals.total_net):
                raise ValueError(
                    f"retaxing {spec.swap_selector!r} does not raise revenue; "
                    f"no revenue-neutral transfer exists"
                )
            extra = 0.0
        amount = universal_transfer_amount(extra, population)
        incidences = tuple(
            with_transfer(inc, amount * h.residents)
            for h, inc in zip(ordered, pre_transfer)
        )
        return ScenarioResult(
            spec, SCENARIO_LABELS[spec.name], rate, amount, incidences,
            aggregate(population, incidences, swapped),
        )

    raise AssertionError(f"unhandled scenario {spec.name}")


def compute_scenarios(
    population: Population, schedule: Schedule, specs: Sequence[ScenarioSpec]
) -> tuple[ScenarioResult, ...]:
    """Run the requested scenarios; the baseline is always computed first.

    Returns the baseline followed by the requested reform scenarios in the
    order given.  The reform's solved state is reused by the transfer swap
    when both are requested.
    """
    if not specs:
        raise ValueError("empty scenario list")
    baseline = _run_baseline(
        population, schedule, ScenarioSpec(ScenarioName.BASELINE)
    )
    results = [baseline]
    plp68_result: ScenarioResult | None = None
    for spec in specs:
        if spec.name is ScenarioName.BASELINE:
            continue
        if spec.name is ScenarioName.PLP68_TRANSFER_SWAP and plp68_result is None:
            plp68_result = run_scenario(
                population, schedule, ScenarioSpec(ScenarioName.PLP68), baseline
            )
        result = run_scenario(population, schedule, spec, baseline, plp68_result)
        if spec.name is ScenarioName.PLP68:
            plp68_result = result
        results.append(result)
    return tuple(results)


# -- scenario quintile statistics ---------------------------------------------


@dataclass(frozen=True)
class ScenarioQuintileRow:
    quintile: int  # 1..5, or 0 for the whole population
    mean_net_tax: float
    mean_monetary_expenditure: float
    mean_total_expenditure: float  # including non-monetary
    delta_vs_baseline: float
    delta_share_pct: float  # 100 * delta / mean monetary expenditure


def scenario_quintile_stats(
    population: Population,
    quintiles: QuintileAssignment,
    scenario: ScenarioResult,
    baseline: ScenarioResult,
) -> tuple[ScenarioQuintileRow, ...]:
    ordered = sorted(population.households, key=lambda h: h.id)
    net = {inc.household_id: inc.net_tax for inc in scenario.incidences}
    base_net = {inc.household_id: inc.net_tax for inc in baseline.incidences}
    rows = []
    for q in (1, 2, 3, 4, 5, 0):
        column = [h for h in ordered if q == 0 or quintiles.quintile_of[h.id] == q]
        mean_net = _weighted_mean((h.weight, net[h.id]) for h in column)
        mean_mon = _weighted_mean((h.weight, h.monetary_total()) for h in column)
        mean_tot = _weighted_mean((h.weight, h.total_expenditure()) for h in column)
        delta = _weighted_mean((h.weight, net[h.id] - base_net[h.id]) for h in column)
        rows.append(
            ScenarioQuintileRow(
                quintile=q,
                mean_net_tax=mean_net,
                mean_monetary_expenditure=mean_mon,
                mean_total_expenditure=mean_tot,
                delta_vs_baseline=delta,
                delta_share_pct=100.0 * delta / mean_mon if mean_mon else 0.0,
            )
        )
    return tuple(rows)


def build_scenario_table(
    population: Population,
    quintiles: QuintileAssignment,
    results: Sequence[ScenarioResult],
) -> tuple[tuple[ScenarioResult, tuple[ScenarioQuintileRow, ...]], ...]:
    if not results:
        raise ValueError("empty scenario list")
    baseline = next(
        (r for r in results if r.spec.name is ScenarioName.BASELINE), None
    )
    if baseline is None:
        raise ValueError("scenario results must include the baseline")
    return tuple(
        (r, scenario_quintile_stats(population, quintiles, r, baseline)) for r in results
    )


# -- rendering ------------------------------------------------------------------

_QUINTILE_HEADERS = ("q1", "q2", "q3", "q4", "q5", "total")


def _fmt(value: float, decimals: int) -> str:
    s = f"{value:.{decimals}f}"
    # avoid "-0" / "-0.0" cells when a tiny negative rounds to zero
    if s.lstrip("-").strip("0").strip(".") == "" and s.startswith("-"):
        return s[1:]
    return s


def render_budget_shares_csv(rows: Sequence[BudgetShareRow]) -> str:
    lines = ["group," + ",".join(_QUINTILE_HEADERS)]
    for r in rows:
        lines.append(r.group + "," + ",".join(_fmt(x, 1) for x in r.cells))
    return "\n".join(lines) + "\n"


def render_budget_shares_text(rows: Sequence[BudgetShareRow]) -> str:
    width = max(len(r.group) for r in rows)
    lines = [
        "Participação no orçamento por tipo de tratamento tributário (%)",
        "",
        " " * width + "".join(f"{h:>9}" for h in _QUINTILE_HEADERS),
    ]
    for r in rows:
        lines.append(r.group.ljust(width) + "".join(f"{_fmt(x, 1):>9}" for x in r.cells))
    return "\n".join(lines) + "\n"


def render_rate_impacts_csv(rows) -> str:
    lines = ["label,selector,rate_outside_pct,delta_pp"]
    for r in rows:
        delta = "" if r.delta_pp is None else _fmt(r.delta_pp, 1)
        lines.append(f"{r.label},{r.selector},{_fmt(r.rate_outside * 100, 1)},{delta}")
    return "\n".join(lines) + "\n"


def render_rate_impacts_text(rows) -> str:
    width = max(len(r.label) for r in rows)
    lines = ["Impacto sobre a alíquota de referência (%, por fora)", ""]
    for r in rows:
        delta = "" if r.delta_pp is None else f"{r.delta_pp:+8.1f}"
        lines.append(f"{r.label.ljust(width)}  {r.rate_outside * 100:6.1f}{delta}")
    return "\n".join(lines) + "\n"


def render_scenarios_csv(
    table: Sequence[tuple[ScenarioResult, Sequence[ScenarioQuintileRow]]],
) -> str:
    if not table:
        raise ValueError("empty scenario list")
    lines = [
        "scenario,quintile,mean_net_tax,mean_monetary_expenditure,"
        "mean_total_expenditure,delta_vs_baseline,delta_share_pct"
    ]
    for result, rows in table:
        for r in rows:
            q = "total" if r.quintile == 0 else str(r.quintile)
            lines.append(
                f"{result.spec.name.value},{q},{_fmt(r.mean_net_tax, 0)},"
                f"{_fmt(r.mean_monetary_expenditure, 0)},{_fmt(r.mean_total_expenditure, 0)},"
                f"{_fmt(r.delta_vs_baseline, 0)},{_fmt(r.delta_share_pct, 1)}"
            )
    return "\n".join(lines) + "\n"


def render_scenarios_text(
    table: Sequence[tuple[ScenarioResult, Sequence[ScenarioQuintileRow]]],
) -> str:
    if not table:
        raise ValueError("empty scenario list")
    lines = [
        "Impacto redistributivo por quinto de despesa total per capita",
        "",
        " " * 34 + "".join(f"{h:>9}" for h in _QUINTILE_HEADERS),
    ]

    def row(label: str, values, decimals: int) -> str:
        return label.ljust(34) + "".join(f"{_fmt(v, decimals):>9}" for v in values)

    for result, rows in table:
        label = result.label
        if result.t_ref is not None:
            label += f" (alíquota {result.t_ref.value * 100:.1f}%)"
        lines.append(label)
        lines.append(row("  Tributação (R$/mês)", (r.mean_net_tax for r in rows), 0))
        lines.append(
            row(
                "  Despesa monetária (R$/mês)",
                (r.mean_monetary_expenditure for r in rows),
                0,
            )
        )
        if result.spec.name is not ScenarioName.BASELINE:
            lines.append(
                row("  Variação (R$/mês)", (r.delta_vs_baseline for r in rows), 0)
            )
            lines.append(
                row("  Variação / despesa (%)", (r.delta_share_pct for r in rows), 1)
            )
        lines.append("")
    return "\n".join(lines)
