"""Aspect ontology for accident/injury deposition testimony.

Twelve topical aspect classes plus the five deponent roles and the
mapping from each role to the aspects typically covered in its
deposition.  The catalog is fixed data; label indices follow catalog
order and are stable across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

CODEC_VERSION = "aspects-v1"

VALID_CODES = ("B", "EB", "ED", "EC", "PPC", "TR", "EE", "IP", "DP", "OPS", "PRD", "O")


class UnknownLabelError(ValueError):
    """Raised when a label string matches no aspect code or name."""


class UnknownRoleError(ValueError):
    """Raised when a role token matches no deponent role."""


@dataclass(frozen=True)
class AspectClass:
    code: str
    name: str
    definition: str


@dataclass(frozen=True)
class DeponentRole:
    role: str
    definition: str
    related_aspects: frozenset[str]


_CATALOG = (
    AspectClass(
        "B",
        "Biographical",
        "Covers the background of the witness, family and work history, "
        "along with educational background, training, etc.",
    ),
    AspectClass(
        "EB",
        "Event Background",
        "Covers events that happened or conditions that existed just before "
        "the actual event (accident) that resulted in the legal claim.",
    ),
    AspectClass(
        "ED",
        "Event Details",
        "Covers all details about the accident event that resulted in the "
        "legal claim.",
    ),
    AspectClass(
        "EC",
        "Event Consequences",
        "Covers the results or effects of the event that resulted in the "
        "legal claim, including injuries, pain, medical treatment, lost "
        "income, and impact of the injury/accident on the person's life.",
    ),
    AspectClass(
        "PPC",
        "Prior Physical Condition",
        "Covers what the injured person could do before this injury happened.",
    ),
    AspectClass(
        "TR",
        "Treatments Received",
        "Covers all medical treatment received by the plaintiff for the "
        "injury, including EMT services, diagnostic testing, hospitalization, "
        "medications, surgeries, medical appliances, therapy, and counseling.",
    ),
    AspectClass(
        "EE",
        "Expert Elaboration",
        "Covers any detailed explanation by an expert witness. It usually "
        "involves the use of precise medical, engineering, vocational or "
        "economic terminology, and may include detailed elaboration on the "
        "definition of the term.",
    ),
    AspectClass(
        "IP",
        "Impact on Plaintiff",
        "Covers any description of the physical, mental, emotional, or "
        "financial impact of the injury on the plaintiff, including physical "
        "limitations, recovery progress, and any planned or potential future "
        "treatment.",
    ),
    AspectClass(
        "DP",
        "Deposition Procedures",
        "Covers the instructions that are often provided to deponents.",
    ),
    AspectClass(
        "OPS",
        "Operational Procedures / Inspections / Maintenance / Repairs",
        "Most injury claims involve movable (cars, boats, etc.) or immovable "
        "property (buildings, equipment, etc.). Covers the condition, "
        "operational procedures, inspection, maintenance, or repairs of the "
        "property involved in the accident/event.",
    ),
    AspectClass(
        "PRD",
        "Plaintiff-related Details",
        "For fact witnesses other than the plaintiff, covers information "
        "gathered from them about the plaintiff.",
    ),
    AspectClass(
        "O",
        "Other",
        "Used for any topic that the annotator believes is not covered by "
        "the other aspects.",
    ),
)

_ROLES = (
    DeponentRole(
        "Plaintiff",
        "The person who files the case against the defendant requesting "
        "damages for injury caused by the defendant in an event.",
        frozenset({"B", "EB", "ED", "EC", "PPC", "TR", "IP"}),
    ),
    DeponentRole(
        "FactWitness",
        "A witness to the event, or someone who knows facts about when, "
        "where, or how the accident/injury occurred.",
        frozenset({"B", "EB", "ED", "EC", "PRD"}),
    ),
    DeponentRole(
        "ExpertWitness",
        "A witness brought in for domain expertise pertaining to a case, "
        "typically medical, engineering, or other domain experts.",
        frozenset({"B", "PPC", "TR", "EE", "IP"}),
    ),
    DeponentRole(
        "RelatedOrganizationWitness",
        "A witness from an organization that is also involved in the case, "
        "ranging from the defendant parties to organizations involved in "
        "the claim.",
        frozenset({"B", "ED", "IP", "OPS", "PRD"}),
    ),
    DeponentRole(
        "Defendant",
        "The party being sued: a person, or a representative of the "
        "organization being sued, with background related to the event.",
        frozenset({"B", "EB", "ED"}),
    ),
)

_CODE_TO_INDEX = {a.code: i for i, a in enumerate(_CATALOG)}
_NAME_TO_CODE = {a.name.lower(): a.code for a in _CATALOG}
_ROLE_BY_TOKEN = {r.role.lower(): r for r in _ROLES}
# Accept the spaced spellings that appear in annotation files.
_ROLE_ALIASES = {
    "fact witness": "factwitness",
    "expert witness": "expertwitness",
    "related organization witness": "relatedorganizationwitness",
}


def aspect_catalog() -> tuple[AspectClass, ...]:
    """Return the 12 aspect classes in fixed catalog order (B first, O last)."""
    return _CATALOG


def role_catalog() -> tuple[DeponentRole, ...]:
    """Return the five deponent roles."""
    return _ROLES


def code_index(code: str) -> int:
    """Stable index of an aspect code in [0, 12)."""
    try:
        return _CODE_TO_INDEX[code]
    except KeyError:
        raise UnknownLabelError(
            f"unknown aspect code {code!r}; valid codes: {', '.join(VALID_CODES)}"
        ) from None


def index_code(index: int) -> str:
    """Aspect code at a catalog index."""
    if not 0 <= index < len(_CATALOG):
        raise UnknownLabelError(f"aspect index {index} out of range [0, {len(_CATALOG)})")
    return _CATALOG[index].code


def parse_label(text: str) -> str:
    """Resolve a label string to its aspect code.

    Matching is case-insensitive on either the short code or the full
    aspect name.
    """
    key = text.strip()
    upper = key.upper()
    if upper in _CODE_TO_INDEX:
        return upper
    code = _NAME_TO_CODE.get(key.lower())
    if code is not None:
        return code
    raise UnknownLabelError(
        f"unknown aspect label {text!r}; valid codes: {', '.join(VALID_CODES)}"
    )


def parse_role(token: str) -> DeponentRole:
    """Resolve a role token (case-insensitive, spaces tolerated) to its DeponentRole."""
    key = token.strip().lower()
    key = _ROLE_ALIASES.get(key, key).replace(" ", "")
    role = _ROLE_BY_TOKEN.get(key)
    if role is None:
        valid = ", ".join(r.role for r in _ROLES)
        raise UnknownRoleError(f"unknown deponent role {token!r}; valid roles: {valid}")
    return role


def aspects_for_role(role: str | DeponentRole) -> frozenset[str]:
    """Aspect codes relevant to a deponent role."""
    if isinstance(role, DeponentRole):
        return role.related_aspects
    return parse_role(role).related_aspects


def catalog_json() -> str:
    """Export the catalog as a JSON document for documentation.

    One object per aspect: {code, name, definition, roles} where roles
    lists the deponent roles whose depositions cover that aspect.
    """
    entries = []
    for aspect in _CATALOG:
        roles = [r.role for r in _ROLES if aspect.code in r.related_aspects]
        entries.append(
            {
                "code": aspect.code,
                "name": aspect.name,
                "definition": aspect.definition,
                "roles": roles,
            }
        )
    return json.dumps(entries, indent=2)
