"""Brute-force oracles for the randomized comparisons.

Deliberately independent of the package under test: raw-JSON field reads and
textbook two-pass statistics only.
"""

from __future__ import annotations

from datetime import datetime, timezone


def oracle_parse_date(value: str | None) -> datetime:
    """Independent date normalization (strptime-based, UTC, partials floored)."""
    if not value:
        return datetime.min.replace(tzinfo=timezone.utc)
    for fmt, pad in (
        ("%Y-%m-%dT%H:%M:%SZ", None),
        ("%Y-%m-%dT%H:%M:%S%z", None),
        ("%Y-%m-%d", None),
        ("%Y-%m", None),
        ("%Y", None),
    ):
        try:
            parsed = datetime.strptime(value, fmt)
            if parsed.tzinfo is None:
                parsed = parsed.replace(tzinfo=timezone.utc)
            return parsed.astimezone(timezone.utc)
        except ValueError:
            continue
    return datetime.min.replace(tzinfo=timezone.utc)


def oracle_medication_keep(raw: dict, statuses: set, categories: set) -> bool:
    """The filtering predicate evaluated straight off the raw JSON."""
    if raw.get("status") not in statuses:
        return False
    codes = [
        coding.get("code")
        for concept in raw.get("category", [])
        for coding in concept.get("coding", [])
    ]
    return any(code in categories for code in codes)


def oracle_latest_selection(raws: list[dict]) -> set[str]:
    """Sort-group-max over raw observation JSON; returns the kept ids."""
    groups: dict[str, list[tuple[int, dict]]] = {}
    for position, raw in enumerate(raws):
        code = raw["code"]["coding"][0]["code"]
        groups.setdefault(code, []).append((position, raw))
    kept = set()
    for members in groups.values():
        # Latest date wins; ties go to the later document position.
        winner = max(members, key=lambda pair: (oracle_parse_date(pair[1].get("effectiveDateTime")), pair[0]))
        kept.add(winner[1]["id"])
    return kept


def two_pass_mean_std(values: list[int | float], population: bool = True) -> tuple[float, float]:
    """Textbook two-pass mean and standard deviation."""
    n = len(values)
    mean = sum(values) / n
    divisor = n if population else max(n - 1, 1)
    variance = sum((v - mean) ** 2 for v in values) / divisor
    return mean, variance**0.5
