"""Schedule loading, validation, effective rates and removal counterfactuals."""

import json

import pytest

from ivasim.rates import Rate, RateBasis
from ivasim.schedule import (
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

T_REF = Rate.outside(0.379)


@pytest.fixture(scope="module")
def plp68():
    return load_schedule(bundled_schedule_path("plp68"))


def minimal_raw(**overrides):
    """A small valid schedule dict for mutation tests."""
    raw = {
        "categories": [
            {
                "id": "alimentos",
                "label": "Alimentos",
                "treatment": {"kind": "zero_rate"},
                "cashback_class": "standard",
                "in_denominator": True,
                "baseline_effective": 0.08,
            },
            {
                "id": "geral",
                "label": "Geral",
                "treatment": {"kind": "reference_rate"},
                "cashback_class": "standard",
                "in_denominator": True,
                "baseline_effective": 0.22,
            },
        ],
        "eligibility_threshold": 477.0,
    }
    raw.update(overrides)
    return raw


# -- fixture shape -----------------------------------------------------------


def test_bundled_fixture_loads(plp68):
    assert len(plp68.categories) == 20
    assert plp68.eligibility_threshold == 477.0
    assert plp68.target_net_burden == 0.201
    assert plp68.utility_refund_share == 0.466
    assert plp68.standard_refund_share == 0.20


def test_fixture_has_eight_taxed_groups(plp68):
    # the taxed treatment groups mirror the eight rows of the budget-share
    # table; the untaxed group only pads the shares to 100
    taxed = [
        g
        for g in plp68.groups()
        if any(
            c.group == g and c.treatment.kind is not TreatmentKind.UNTAXED
            for c in plp68.categories
        )
    ]
    assert len(taxed) == 8
    assert "nao_tributado" in plp68.groups()


def test_selective_categories_are_cashback_excluded(plp68):
    for c in plp68.categories:
        if c.treatment.kind is TreatmentKind.SELECTIVE:
            assert c.cashback is CashbackClass.EXCLUDED


def test_untaxed_category_stays_in_denominator(plp68):
    dom = plp68.by_id("servicos_domesticos")
    assert dom.treatment.kind is TreatmentKind.UNTAXED
    assert dom.in_denominator is True


def test_outside_basis_baseline_normalized(plp68):
    # config gives 51% outside; stored inside: 0.51/1.51
    util = plp68.by_id("utilidades_residenciais")
    assert util.baseline_effective.basis is RateBasis.INSIDE
    assert util.baseline_effective.value == pytest.approx(0.33774834437086093, abs=1e-15)


# -- effective rates ---------------------------------------------------------


def test_effective_rate_reference(plp68):
    r = effective_inside_rate(plp68.by_id("referencia_geral"), T_REF)
    assert r.basis is RateBasis.INSIDE
    # 0.379/1.379 = 0.27483683828861494; matches the 27.5% <-> 37.9% pair
    # to the 0.1 p.p. precision those quotes are reported at
    assert r.value == pytest.approx(0.27483683828861494, abs=1e-15)
    assert abs(r.value - 0.275) < 1e-3


def test_effective_rate_zero_and_untaxed(plp68):
    assert effective_inside_rate(plp68.by_id("cesta_basica"), T_REF).value == 0.0
    assert effective_inside_rate(plp68.by_id("servicos_domesticos"), T_REF).value == 0.0
    assert effective_inside_rate(plp68.by_id("cesta_basica"), Rate.outside(2.0)).value == 0.0


def test_effective_rate_reduced_fraction(plp68):
    # 0.4 * 0.379 = 0.1516 outside -> 0.1516/1.1516 inside
    r = effective_inside_rate(plp68.by_id("reduzida_40"), T_REF)
    assert r.value == pytest.approx(0.13164293157346302, abs=1e-15)


def test_effective_rate_specific_regime_ignores_t_ref(plp68):
    c = plp68.by_id("bares_restaurantes")
    assert effective_inside_rate(c, T_REF).value == 0.14
    assert effective_inside_rate(c, Rate.outside(1.0)).value == 0.14


def test_effective_rate_selective(plp68):
    # (1.19)(1.379) - 1 = 0.64101 outside -> 0.64101/1.64101 inside
    r = effective_inside_rate(plp68.by_id("bebidas_alcoolicas"), T_REF)
    assert r.value == pytest.approx(0.39061919183917215, abs=1e-15)


def test_effective_rate_rent_rate_part(plp68):
    # rate part matches the 40% reduced fraction; the base reducer is
    # applied elsewhere
    r = effective_inside_rate(plp68.by_id("aluguel_imovel"), T_REF)
    assert r.value == pytest.approx(0.13164293157346302, abs=1e-15)


def test_effective_rate_monotone_in_t_ref(plp68):
    rates = [Rate.outside(x / 100.0) for x in range(0, 101, 5)]
    for c in plp68.categories:
        values = [effective_inside_rate(c, t).value for t in rates]
        assert all(b >= a - 1e-15 for a, b in zip(values, values[1:])), c.id


def test_effective_rate_requires_outside_t_ref(plp68):
    with pytest.raises(ValueError, match="outside"):
        effective_inside_rate(plp68.by_id("referencia_geral"), Rate.inside(0.275))


def test_selective_vat_fraction_scales_vat_component():
    t = TaxTreatment.selective(Rate.outside(0.19), vat_fraction=0.5)
    c = Category(
        id="teste",
        label="Teste",
        treatment=t,
        cashback=CashbackClass.EXCLUDED,
        in_denominator=True,
        baseline_effective=Rate.inside(0.3),
    )
    # (1.19)(1 + 0.5*0.379) - 1 = 0.4154505 outside
    got = effective_inside_rate(c, T_REF)
    expected_outside = 1.19 * (1.0 + 0.5 * 0.379) - 1.0
    assert got.value == pytest.approx(expected_outside / (1.0 + expected_outside), abs=1e-15)


# -- removal counterfactuals -------------------------------------------------


def test_removal_by_group(plp68):
    out = with_removal(plp68, "cesta_basica")
    assert out.by_id("cesta_basica").treatment.kind is TreatmentKind.REFERENCE_RATE
    # everything else untouched
    assert out.by_id("reduzida_40") == plp68.by_id("reduzida_40")
    assert out.category_ids() == plp68.category_ids()


def test_removal_strips_selective_component(plp68):
    out = with_removal(plp68, "imposto_seletivo")
    for cid in ("bebidas_alcoolicas", "produtos_fumigenos", "veiculos_embarcacoes"):
        c = out.by_id(cid)
        assert c.treatment.kind is TreatmentKind.REFERENCE_RATE
        # cashback class and denominator flag preserved
        assert c.cashback is CashbackClass.EXCLUDED
        assert c.in_denominator is True


def test_removal_by_kind_token(plp68):
    by_kind = with_removal(plp68, "selective")
    by_group = with_removal(plp68, "imposto_seletivo")
    assert by_kind == by_group


def test_removal_by_category_ids_comma_list(plp68):
    out = with_removal(plp68, "gasolina, refino_etanol")
    assert out.by_id("gasolina").treatment.kind is TreatmentKind.REFERENCE_RATE
    assert out.by_id("refino_etanol").treatment.kind is TreatmentKind.REFERENCE_RATE
    assert out.by_id("servicos_financeiros").treatment.kind is TreatmentKind.SPECIFIC_REGIME


def test_removal_unknown_selector_lists_valid_ones(plp68):
    with pytest.raises(ScheduleError, match="valid selectors"):
        with_removal(plp68, "no_such_group")


def test_removal_empty_selector_errors(plp68):
    with pytest.raises(ScheduleError, match="empty removal selector"):
        with_removal(plp68, "")
    with pytest.raises(ScheduleError, match="empty"):
        with_removal(plp68, "cesta_basica,,aluguel")


def test_resolve_selector_deduplicates(plp68):
    ids = resolve_selector(plp68, "gasolina,regime_especifico")
    assert ids.count("gasolina") == 1
    assert set(ids) == {c.id for c in plp68.categories if c.group == "regime_especifico"}


def test_default_removal_selectors(plp68):
    assert default_removal_selectors(plp68) == (
        "cesta_basica",
        "aliquota_zero",
        "reduzida_40",
        "reduzida_70",
        "aluguel",
        "regime_especifico",
        "imposto_seletivo",
    )


# -- serialization and fingerprint ------------------------------------------


def test_round_trip(plp68, tmp_path):
    path = tmp_path / "copy.json"
    save_schedule(plp68, path)
    again = load_schedule(path)
    assert again == plp68
    assert again.fingerprint() == plp68.fingerprint()


def test_parse_to_dict_round_trip(plp68):
    assert parse_schedule(plp68.to_dict()) == plp68


def test_fingerprint_tracks_content(plp68):
    changed = with_removal(plp68, "cesta_basica")
    assert changed.fingerprint() != plp68.fingerprint()
    assert plp68.fingerprint() == load_schedule(bundled_schedule_path("plp68")).fingerprint()


# -- validation errors -------------------------------------------------------


def test_missing_file_errors():
    with pytest.raises(ScheduleError, match="not found"):
        load_schedule("/no/such/schedule.json")


def test_parse_error_reports_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "categories": [\n    {"id": }\n  ]\n}\n')
    with pytest.raises(ScheduleError, match=r"line 3"):
        load_schedule(p)


def test_duplicate_category_id():
    raw = minimal_raw()
    raw["categories"].append(dict(raw["categories"][0]))
    with pytest.raises(ScheduleError, match="duplicate category id"):
        parse_schedule(raw)


def test_selective_with_standard_cashback_rejected():
    raw = minimal_raw()
    raw["categories"].append(
        {
            "id": "fumo",
            "label": "Fumo",
            "treatment": {"kind": "selective", "is_rate": {"value": 0.19, "basis": "outside"}},
            "cashback_class": "standard",
            "in_denominator": True,
            "baseline_effective": 0.39,
        }
    )
    with pytest.raises(ScheduleError, match="excluded"):
        parse_schedule(raw)


def test_schedule_without_reference_anchor_rejected():
    raw = minimal_raw()
    raw["categories"] = [raw["categories"][0]]  # zero_rate only
    with pytest.raises(ScheduleError, match="unidentified"):
        parse_schedule(raw)


def test_unknown_top_level_key_rejected():
    with pytest.raises(ScheduleError, match="unknown key"):
        parse_schedule(minimal_raw(extra_knob=1))


def test_unknown_category_key_rejected():
    raw = minimal_raw()
    raw["categories"][0]["colour"] = "blue"
    with pytest.raises(ScheduleError, match="colour"):
        parse_schedule(raw)


def test_unknown_treatment_kind_and_params_rejected():
    raw = minimal_raw()
    raw["categories"][1]["treatment"] = {"kind": "flat_tax"}
    with pytest.raises(ScheduleError, match="flat_tax"):
        parse_schedule(raw)
    raw = minimal_raw()
    raw["categories"][1]["treatment"] = {"kind": "reference_rate", "fraction": 0.4}
    with pytest.raises(ScheduleError, match="fraction"):
        parse_schedule(raw)


def test_missing_required_category_key():
    raw = minimal_raw()
    del raw["categories"][0]["baseline_effective"]
    with pytest.raises(ScheduleError, match="baseline_effective"):
        parse_schedule(raw)


def test_bad_cashback_class_token():
    raw = minimal_raw()
    raw["categories"][0]["cashback_class"] = "enhanced"
    with pytest.raises(ScheduleError, match="cashback_class"):
        parse_schedule(raw)


def test_reduced_fraction_bounds():
    raw = minimal_raw()
    raw["categories"][0]["treatment"] = {"kind": "reduced_fraction", "fraction": 1.0}
    with pytest.raises(ScheduleError, match=r"\(0, 1\)"):
        parse_schedule(raw)


def test_rent_regime_parameter_bounds():
    raw = minimal_raw()
    raw["categories"][0]["treatment"] = {"kind": "rent_regime", "fraction": 0.4, "reducer": -5}
    with pytest.raises(ScheduleError, match="reducer"):
        parse_schedule(raw)


def test_refund_share_bounds():
    with pytest.raises(ScheduleError, match="utility_refund_share"):
        parse_schedule(minimal_raw(cashback={"utility_refund_share": 1.2}))


def test_negative_threshold_rejected():
    with pytest.raises(ScheduleError, match="eligibility_threshold"):
        parse_schedule(minimal_raw(eligibility_threshold=-1))


def test_target_burden_bounds():
    with pytest.raises(ScheduleError, match="target_net_burden"):
        parse_schedule(minimal_raw(target_net_burden=0.0))


def test_bad_category_id_token():
    raw = minimal_raw()
    raw["categories"][0]["id"] = "Cesta Básica"
    with pytest.raises(ScheduleError, match="token"):
        parse_schedule(raw)


def test_baseline_effective_accepts_number_or_object():
    raw = minimal_raw()
    raw["categories"][0]["baseline_effective"] = {"value": 0.51, "basis": "outside"}
    s = parse_schedule(raw)
    assert s.by_id("alimentos").baseline_effective.value == pytest.approx(
        0.33774834437086093, abs=1e-15
    )


def test_default_group_derived_from_kind():
    raw = minimal_raw()
    s = parse_schedule(raw)
    assert s.by_id("alimentos").group == "aliquota_zero"
    assert s.by_id("geral").group == "referencia"


def test_bundled_path_unknown_name():
    with pytest.raises(ScheduleError, match="bundled"):
        bundled_schedule_path("missing")


def test_fixture_json_is_strict_subset():
    # the shipped file exercises every treatment kind
    raw = json.loads(bundled_schedule_path("plp68").read_text())
    kinds = {c["treatment"]["kind"] for c in raw["categories"]}
    assert kinds == {
        "zero_rate",
        "reference_rate",
        "reduced_fraction",
        "specific_regime",
        "selective",
        "rent_regime",
        "untaxed",
    }
