import json

import pytest

from depoaspect import ontology


def test_catalog_has_twelve_entries_in_fixed_order():
    catalog = ontology.aspect_catalog()
    assert len(catalog) == 12
    assert catalog[0].code == "B"
    assert catalog[11].code == "O"
    assert catalog[1].code == "EB"
    assert catalog[1].name == "Event Background"


def test_catalog_codes_pairwise_distinct():
    codes = [a.code for a in ontology.aspect_catalog()]
    assert len(set(codes)) == 12
    assert tuple(codes) == ontology.VALID_CODES


def test_catalog_names_and_definitions_non_empty():
    for aspect in ontology.aspect_catalog():
        assert aspect.name
        assert aspect.definition


@pytest.mark.parametrize(
    "role,expected",
    [
        ("Plaintiff", {"B", "EB", "ED", "EC", "PPC", "TR", "IP"}),
        ("Defendant", {"B", "EB", "ED"}),
        ("ExpertWitness", {"B", "PPC", "TR", "EE", "IP"}),
        ("FactWitness", {"B", "EB", "ED", "EC", "PRD"}),
        ("RelatedOrganizationWitness", {"B", "ED", "IP", "OPS", "PRD"}),
    ],
)
def test_aspects_for_role(role, expected):
    assert ontology.aspects_for_role(role) == expected


def test_role_tokens_tolerate_case_and_spaces():
    assert ontology.parse_role("expert witness").role == "ExpertWitness"
    assert ontology.parse_role("PLAINTIFF").role == "Plaintiff"


def test_unknown_role_error_names_token():
    with pytest.raises(ontology.UnknownRoleError, match="Bystander"):
        ontology.aspects_for_role("Bystander")


def test_every_role_includes_biographical():
    for role in ontology.role_catalog():
        assert "B" in role.related_aspects


def test_dp_and_o_in_no_role_set():
    union = set()
    for role in ontology.role_catalog():
        union |= role.related_aspects
    assert union <= set(ontology.VALID_CODES)
    assert "DP" not in union
    assert "O" not in union


@pytest.mark.parametrize(
    "text,expected",
    [("eb", "EB"), ("Event Background", "EB"), ("o", "O"), ("treatments received", "TR")],
)
def test_parse_label(text, expected):
    assert ontology.parse_label(text) == expected


def test_parse_label_rejects_unknown_with_valid_codes_listed():
    with pytest.raises(ontology.UnknownLabelError, match="XYZ"):
        ontology.parse_label("XYZ")
    try:
        ontology.parse_label("XYZ")
    except ontology.UnknownLabelError as exc:
        for code in ontology.VALID_CODES:
            assert code in str(exc)


def test_label_round_trip_all_codes():
    for code in ontology.VALID_CODES:
        assert ontology.parse_label(code) == code
        assert ontology.parse_label(code.lower()) == code


def test_index_codec_stable_and_bijective():
    for i, code in enumerate(ontology.VALID_CODES):
        assert ontology.code_index(code) == i
        assert ontology.index_code(i) == code
    with pytest.raises(ontology.UnknownLabelError):
        ontology.index_code(12)


def test_catalog_json_export():
    entries = json.loads(ontology.catalog_json())
    assert len(entries) == 12
    assert set(entries[0]) == {"code", "name", "definition", "roles"}
    by_code = {e["code"]: e for e in entries}
    assert "Plaintiff" in by_code["TR"]["roles"]
    assert by_code["O"]["roles"] == []
