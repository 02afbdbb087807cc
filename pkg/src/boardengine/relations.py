"""Closed catalog of relation types used for typed hints and expansions.

ConceptNet-derived; the overly generic "Related to" is deliberately absent
and must never appear anywhere in the system.
"""

from __future__ import annotations

RELATION_TYPES: tuple[str, ...] = (
    "Is a",
    "Part of",
    "Used for",
    "Capable of",
    "At location",
    "Has a",
    "Desires",
    "Causes",
    "Has property",
    "Synonym",
    "Antonym",
    "Derived from",
    "Instance of",
)

RELATION_TYPE_SET = frozenset(RELATION_TYPES)

# Excluded on purpose: it invites predictions too vague to discuss.
EXCLUDED_RELATION_TYPE = "Related to"

RELATION_DESCRIPTIONS: dict[str, str] = {
    "Is a": "Indicates that one concept is a type or category of another.",
    "Part of": "Indicates that one concept is a part of another.",
    "Used for": "Describes what something is used for.",
    "Capable of": "Describes an action or activity that a concept is capable of doing.",
    "At location": "Indicates where something is typically found or where an event occurs.",
    "Has a": "Indicates that one concept possesses another.",
    "Desires": "Indicates a desire or need associated with a concept.",
    "Causes": "Describes an event or action that leads to a particular result.",
    "Has property": "Indicates a characteristic or property of a concept.",
    "Synonym": "Indicates that two concepts have the same or very similar meanings.",
    "Antonym": "Indicates that two concepts have opposite meanings.",
    "Derived from": "Indicates that one concept is derived from another, often used for words that have a common root or origin.",
    "Instance of": "Similar to IsA, but typically used for instances of a class or category.",
}


def is_valid_relation_type(value: str) -> bool:
    return value in RELATION_TYPE_SET
