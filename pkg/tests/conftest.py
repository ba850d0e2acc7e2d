"""Shared fixtures: paths, reference date, and randomized bundle generation."""

from __future__ import annotations

import json
import random
from datetime import date
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES_DIR = REPO_ROOT / "fixtures"

# All fixture ages are pinned against this date.
REFERENCE_DATE = date(2024, 1, 15)

TABLE_FIXTURES = {
    "beatris270": FIXTURES_DIR / "beatris270_bogan287.json",
    "milton509": FIXTURES_DIR / "milton509_ortiz186.json",
    "edythe31": FIXTURES_DIR / "edythe31_mcdermott739.json",
    "gonzalo160": FIXTURES_DIR / "gonzalo160_duenas839.json",
    "jacklyn830": FIXTURES_DIR / "jacklyn830_veum823.json",
    "allen332": FIXTURES_DIR / "allen332_ferry570.json",
}

EXTRA_FIXTURES = {
    "dudley365": FIXTURES_DIR / "dudley365_blick895.json",
    "carolina247": FIXTURES_DIR / "carolina247_kovacek682.json",
}

ALL_FIXTURES = {**TABLE_FIXTURES, **EXTRA_FIXTURES}


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR


def load_fixture_bytes(name: str) -> bytes:
    return ALL_FIXTURES[name].read_bytes()


def load_fixture_json(name: str) -> dict:
    return json.loads(load_fixture_bytes(name))


# ---------------------------------------------------------------------------
# Randomized Synthea-style bundle generation for oracle comparisons
# ---------------------------------------------------------------------------

MED_NAMES = [
    "Simvastatin 20 MG Oral Tablet",
    "Lisinopril 10 MG Oral Tablet",
    "Metformin 500 MG Oral Tablet",
    "Warfarin Sodium 5 MG Oral Tablet",
    "Ibuprofen 200 MG Oral Tablet",
    "Amoxicillin 250 MG Oral Capsule",
    "Digoxin 0.125 MG Oral Tablet",
]
MED_STATUSES = ["active", "stopped", "completed", "on-hold"]
MED_CATEGORIES = ["outpatient", "inpatient", "community", "discharge"]
OBS_CODES = ["4548-4", "2339-0", "718-7", "8480-6", "2093-3", "38483-4", "33914-3"]
COND_CODES = ["59621000", "44054006", "195662009", "10509002", "40055000", "271737000"]


def random_date(rng: random.Random) -> str:
    year = rng.randint(2005, 2023)
    month = rng.randint(1, 12)
    day = rng.randint(1, 28)
    if rng.random() < 0.2:
        return f"{year:04d}-{month:02d}-{day:02d}"
    hour, minute = rng.randint(0, 23), rng.randint(0, 59)
    return f"{year:04d}-{month:02d}-{day:02d}T{hour:02d}:{minute:02d}:00Z"


def random_medication(rng: random.Random, index: int) -> dict:
    categories = rng.sample(MED_CATEGORIES, k=rng.randint(0, 2))
    resource = {
        "resourceType": "MedicationRequest",
        "id": f"med-{index}",
        "status": rng.choice(MED_STATUSES),
        "intent": "order",
        "medicationCodeableConcept": {"text": rng.choice(MED_NAMES)},
        "authoredOn": random_date(rng),
    }
    if categories:
        resource["category"] = [
            {
                "coding": [
                    {
                        "system": "http://terminology.hl7.org/CodeSystem/medicationrequest-category",
                        "code": category,
                    }
                ]
            }
            for category in categories
        ]
    return resource


def random_observation(rng: random.Random, index: int) -> dict:
    code = rng.choice(OBS_CODES)
    resource = {
        "resourceType": "Observation",
        "id": f"obs-{index}",
        "status": "final",
        "code": {"coding": [{"system": "http://loinc.org", "code": code, "display": f"Lab {code}"}]},
        "valueQuantity": {"value": round(rng.uniform(1, 200), 1), "unit": "u"},
    }
    if rng.random() < 0.9:
        resource["effectiveDateTime"] = random_date(rng)
    return resource


def random_condition(rng: random.Random, index: int) -> dict:
    code = rng.choice(COND_CODES)
    resource = {
        "resourceType": "Condition",
        "id": f"cond-{index}",
        "clinicalStatus": {"coding": [{"code": "active"}]},
        "code": {
            "coding": [{"system": "http://snomed.info/sct", "code": code, "display": f"Condition {code}"}],
            "text": f"Condition {code}",
        },
    }
    if rng.random() < 0.8:
        resource["onsetDateTime"] = random_date(rng)
    return resource


def random_bundle_dict(rng: random.Random, max_each: int = 12) -> dict:
    resources = [
        {
            "resourceType": "Patient",
            "id": "patient-0",
            "name": [{"use": "official", "family": "Tester", "given": ["Rand"]}],
            "gender": rng.choice(["female", "male"]),
            "birthDate": f"{rng.randint(1935, 2015)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}",
        }
    ]
    resources += [random_medication(rng, i) for i in range(rng.randint(0, max_each))]
    resources += [random_observation(rng, i) for i in range(rng.randint(0, max_each))]
    resources += [random_condition(rng, i) for i in range(rng.randint(0, max_each))]
    rng.shuffle(resources)
    return {
        "resourceType": "Bundle",
        "type": "transaction",
        "entry": [{"fullUrl": f"urn:uuid:{r['id']}", "resource": r} for r in resources],
    }
