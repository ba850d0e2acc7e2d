#!/usr/bin/env python3
"""Regenerate the shipped synthetic patient bundles in fixtures/.

Eight Synthea-layout FHIR R4 bundles: six modeled on the published cohort of
synthetic cardiovascular patients (names, demographics, conditions,
allergies, and medication lists match that cohort summary; dates and codes
are fixture-chosen) plus two extras that exercise deceased-patient handling,
unknown resource types, and partial-precision dates.

Ages are pinned against the test reference date 2024-01-15.
"""

from __future__ import annotations

import json
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parent.parent / "fixtures"

SNOMED = "http://snomed.info/sct"
RXNORM = "http://www.nlm.nih.gov/research/umls/rxnorm"
LOINC = "http://loinc.org"
MED_CATEGORY = "http://terminology.hl7.org/CodeSystem/medicationrequest-category"
CONDITION_CLINICAL = "http://terminology.hl7.org/CodeSystem/condition-clinical"
ALLERGY_CLINICAL = "http://terminology.hl7.org/CodeSystem/allergyintolerance-clinical"
OBS_CATEGORY = "http://terminology.hl7.org/CodeSystem/observation-category"


def _concept(system: str, code: str, display: str) -> dict:
    return {"coding": [{"system": system, "code": code, "display": display}], "text": display}


def patient(pid: str, family: str, given: list[str], gender: str, birth: str, deceased: str | None = None) -> dict:
    resource = {
        "resourceType": "Patient",
        "id": pid,
        "name": [{"use": "official", "family": family, "given": given}],
        "gender": gender,
        "birthDate": birth,
    }
    if deceased:
        resource["deceasedDateTime"] = deceased
    return resource


def medication(pid: str, mid: str, name: str, code: str, authored: str, status: str = "active", category: str = "outpatient") -> dict:
    return {
        "resourceType": "MedicationRequest",
        "id": mid,
        "status": status,
        "intent": "order",
        "category": [_concept(MED_CATEGORY, category, category.capitalize())],
        "medicationCodeableConcept": _concept(RXNORM, code, name),
        "subject": {"reference": f"Patient/{pid}"},
        "authoredOn": authored,
    }


def condition(pid: str, cid: str, name: str, code: str, onset: str) -> dict:
    return {
        "resourceType": "Condition",
        "id": cid,
        "clinicalStatus": {"coding": [{"system": CONDITION_CLINICAL, "code": "active"}]},
        "verificationStatus": {
            "coding": [
                {
                    "system": "http://terminology.hl7.org/CodeSystem/condition-ver-status",
                    "code": "confirmed",
                }
            ]
        },
        "code": _concept(SNOMED, code, name),
        "subject": {"reference": f"Patient/{pid}"},
        "onsetDateTime": onset,
    }


def allergy(pid: str, aid: str, name: str, code: str, recorded: str, system: str = SNOMED, category: str = "environment") -> dict:
    return {
        "resourceType": "AllergyIntolerance",
        "id": aid,
        "clinicalStatus": {"coding": [{"system": ALLERGY_CLINICAL, "code": "active"}]},
        "type": "allergy",
        "category": [category],
        "criticality": "low",
        "code": _concept(system, code, name),
        "patient": {"reference": f"Patient/{pid}"},
        "recordedDate": recorded,
    }


def observation(pid: str, oid: str, name: str, code: str, effective: str, value: float, unit: str, category: str = "laboratory") -> dict:
    return {
        "resourceType": "Observation",
        "id": oid,
        "status": "final",
        "category": [{"coding": [{"system": OBS_CATEGORY, "code": category, "display": category}]}],
        "code": _concept(LOINC, code, name),
        "subject": {"reference": f"Patient/{pid}"},
        "effectiveDateTime": effective,
        "valueQuantity": {"value": value, "unit": unit},
    }


def procedure(pid: str, prid: str, name: str, code: str, start: str, end: str) -> dict:
    return {
        "resourceType": "Procedure",
        "id": prid,
        "status": "completed",
        "code": _concept(SNOMED, code, name),
        "subject": {"reference": f"Patient/{pid}"},
        "performedPeriod": {"start": start, "end": end},
    }


def immunization(pid: str, iid: str, name: str, code: str, occurred: str) -> dict:
    return {
        "resourceType": "Immunization",
        "id": iid,
        "status": "completed",
        "vaccineCode": _concept("http://hl7.org/fhir/sid/cvx", code, name),
        "patient": {"reference": f"Patient/{pid}"},
        "occurrenceDateTime": occurred,
    }


def diagnostic_report(pid: str, did: str, name: str, code: str, effective: str) -> dict:
    return {
        "resourceType": "DiagnosticReport",
        "id": did,
        "status": "final",
        "code": _concept(LOINC, code, name),
        "subject": {"reference": f"Patient/{pid}"},
        "effectiveDateTime": effective,
    }


def encounter(pid: str, eid: str, name: str, code: str, start: str, end: str) -> dict:
    return {
        "resourceType": "Encounter",
        "id": eid,
        "status": "finished",
        "class": {"system": "http://terminology.hl7.org/CodeSystem/v3-ActCode", "code": "AMB"},
        "type": [_concept(SNOMED, code, name)],
        "subject": {"reference": f"Patient/{pid}"},
        "period": {"start": start, "end": end},
    }


def claim(pid: str, clid: str, created: str) -> dict:
    # Billing noise Synthea emits; an unknown kind for the parser.
    return {
        "resourceType": "Claim",
        "id": clid,
        "status": "active",
        "use": "claim",
        "patient": {"reference": f"Patient/{pid}"},
        "created": created,
    }


def care_plan(pid: str, cpid: str, name: str, code: str, start: str) -> dict:
    return {
        "resourceType": "CarePlan",
        "id": cpid,
        "status": "active",
        "intent": "plan",
        "category": [_concept(SNOMED, code, name)],
        "subject": {"reference": f"Patient/{pid}"},
        "period": {"start": start},
    }


def bundle(resources: list[dict]) -> dict:
    return {
        "resourceType": "Bundle",
        "type": "transaction",
        "entry": [
            {
                "fullUrl": f"urn:uuid:{resource['id']}",
                "resource": resource,
                "request": {"method": "POST", "url": resource["resourceType"]},
            }
            for resource in resources
        ],
    }


def beatris() -> list[dict]:
    pid = "beatris270"
    allergens = [
        ("Latex (substance)", "111088007", "environment"),
        ("Bee venom (substance)", "288328004", "environment"),
        ("Mold (organism)", "84489001", "environment"),
        ("House dust mite (organism)", "260147004", "environment"),
        ("Animal dander (substance)", "264287008", "environment"),
        ("Grass pollen (substance)", "256277009", "environment"),
        ("Tree pollen (substance)", "256259004", "environment"),
        ("Aspirin", "1191", "medication"),
    ]
    return [
        patient(pid, "Bogan287", ["Beatris270"], "female", "2015-06-10"),
        condition(pid, f"{pid}-cond-1", "Aortic valve stenosis (disorder)", "60573004", "2016-02-18"),
        condition(pid, f"{pid}-cond-2", "Perennial allergic rhinitis", "446096008", "2018-04-02"),
        condition(pid, f"{pid}-cond-3", "Atopic dermatitis", "24079001", "2017-08-21"),
        *[
            allergy(
                pid,
                f"{pid}-allergy-{index + 1}",
                name,
                code,
                f"2019-0{(index % 8) + 1}-15",
                system=RXNORM if name == "Aspirin" else SNOMED,
                category=category,
            )
            for index, (name, code, category) in enumerate(allergens)
        ],
        medication(pid, f"{pid}-med-1", "Fexofenadine hydrochloride 30 MG Oral Tablet", "997484", "2022-03-10"),
        medication(pid, f"{pid}-med-2", "Epinephrine 1 MG/ML Auto-Injector 0.3 ML", "1870230", "2021-11-05"),
        observation(pid, f"{pid}-obs-1", "Body Height", "8302-2", "2023-05-12T09:30:00Z", 128.4, "cm", "vital-signs"),
        observation(pid, f"{pid}-obs-2", "Body Weight", "29463-7", "2023-05-12T09:30:00Z", 26.1, "kg", "vital-signs"),
        immunization(pid, f"{pid}-imm-1", "Influenza, seasonal, injectable", "140", "2023-10-01"),
        encounter(pid, f"{pid}-enc-1", "Well child visit (procedure)", "410620009", "2023-05-12T09:00:00Z", "2023-05-12T09:45:00Z"),
    ]


def milton() -> list[dict]:
    pid = "milton509"
    return [
        patient(pid, "Ortiz186", ["Milton509"], "male", "1997-09-01"),
        condition(pid, f"{pid}-cond-1", "Hypertension", "59621000", "2019-07-19"),
        condition(pid, f"{pid}-cond-2", "Hypoxemia (disorder)", "389087006", "2021-02-11"),
        condition(pid, f"{pid}-cond-3", "Stress (finding)", "73595000", "2020-06-30"),
        medication(pid, f"{pid}-med-1", "amLODIPine 2.5 MG Oral Tablet", "308135", "2021-03-14"),
        observation(pid, f"{pid}-obs-1", "Systolic Blood Pressure", "8480-6", "2023-01-20T14:00:00Z", 138.0, "mm[Hg]", "vital-signs"),
        observation(pid, f"{pid}-obs-2", "Diastolic Blood Pressure", "8462-4", "2023-01-20T14:00:00Z", 88.0, "mm[Hg]", "vital-signs"),
        encounter(pid, f"{pid}-enc-1", "Encounter for check up (procedure)", "185349003", "2023-01-20T13:30:00Z", "2023-01-20T14:15:00Z"),
    ]


def edythe() -> list[dict]:
    pid = "edythe31"
    return [
        patient(pid, "McDermott739", ["Edythe31"], "female", "1974-05-20"),
        condition(pid, f"{pid}-cond-1", "Body mass index 30+ - obesity (finding)", "162864005", "2008-09-14"),
        condition(pid, f"{pid}-cond-2", "Received higher education (finding)", "224299000", "1996-06-01"),
        condition(pid, f"{pid}-cond-3", "Prediabetes", "15777000", "2012-04-23"),
        condition(pid, f"{pid}-cond-4", "Anemia (disorder)", "271737000", "2015-10-08"),
        condition(pid, f"{pid}-cond-5", "Victim of intimate partner abuse (finding)", "706893006", "2003-02-17"),
        condition(pid, f"{pid}-cond-6", "Cardiac Arrest", "410429000", "2015-01-19"),
        condition(pid, f"{pid}-cond-7", "History of cardiac arrest (situation)", "429007001", "2015-01-19"),
        medication(pid, f"{pid}-med-1", "Jolivette 28 Day Pack", "748856", "2020-08-11"),
        procedure(pid, f"{pid}-proc-1", "Cardiopulmonary resuscitation (procedure)", "89666000", "2015-01-19T03:12:00Z", "2015-01-19T03:40:00Z"),
        observation(pid, f"{pid}-obs-1", "Body mass index (BMI) [Ratio]", "39156-5", "2022-06-02T10:00:00Z", 31.8, "kg/m2", "vital-signs"),
        observation(pid, f"{pid}-obs-2", "Hemoglobin [Mass/volume] in Blood", "718-7", "2018-03-15T08:00:00Z", 10.9, "g/dL"),
        observation(pid, f"{pid}-obs-3", "Hemoglobin [Mass/volume] in Blood", "718-7", "2022-06-02T10:00:00Z", 11.4, "g/dL"),
    ]


def gonzalo() -> list[dict]:
    pid = "gonzalo160"
    conditions = [
        ("Body mass index 30+ - obesity (finding)", "162864005", "2001-05-30"),
        ("Gout", "90560007", "2015-06-10"),
        ("Essential hypertension (disorder)", "59621000", "1998-03-12"),
        ("Disorder of kidney due to diabetes mellitus (disorder)", "127013003", "2009-11-25"),
        ("Microalbuminuria due to type 2 diabetes mellitus (disorder)", "157141000119108", "2010-07-07"),
        ("Proteinuria due to type 2 diabetes mellitus (disorder)", "90781000119102", "2012-02-14"),
        ("Metabolic syndrome X (disorder)", "237602007", "2005-01-03"),
        ("Prediabetes", "15777000", "2004-06-22"),
        ("Anemia (disorder)", "271737000", "2011-09-18"),
        ("Ischemic heart disease (disorder)", "414545008", "2013-12-05"),
        ("Abnormal findings diagnostic imaging heart+coronary circulat (finding)", "274531002", "2013-11-20"),
        ("History of renal transplant (situation)", "161665007", "2010-03-02"),
        ("Medication review due (situation)", "314529007", "2023-01-04"),
    ]
    medications = [
        ("Simvastatin 20 MG Oral Tablet", "312961", "2020-03-01"),
        ("Vitamin B12 5 MG/ML Injectable Solution", "1659260", "2019-05-16"),
        ("Clopidogrel 75 MG Oral Tablet", "309362", "2018-09-27"),
        ("Hydrochlorothiazide 25 MG Oral Tablet", "310798", "2017-02-08"),
        ("amLODIPine 2.5 MG Oral Tablet", "308135", "2017-02-08"),
        ("Metoprolol succinate 100 MG 24 HR Extended Release Oral Tablet", "866436", "2016-08-19"),
        (
            "Insulin isophane, human 70 UNT/ML / insulin, regular, human 30 UNT/ML Injectable Suspension [Humulin]",
            "106892",
            "2015-04-11",
        ),
        ("Nitroglycerin 0.4 MG/ACTUAT Mucosal Spray", "705129", "2014-10-23"),
        ("Tacrolimus 1 MG 24 HR Extended Release Oral Tablet", "1117531", "2010-03-15"),
    ]
    return [
        patient(pid, "Dueñas839", ["Gonzalo160"], "male", "1958-11-02"),
        *[condition(pid, f"{pid}-cond-{i + 1}", n, c, d) for i, (n, c, d) in enumerate(conditions)],
        *[medication(pid, f"{pid}-med-{i + 1}", n, c, d) for i, (n, c, d) in enumerate(medications)],
        # Non-qualifying requests the filter must drop:
        medication(pid, f"{pid}-med-10", "Ibuprofen 200 MG Oral Tablet", "310965", "2013-05-05", status="stopped"),
        medication(pid, f"{pid}-med-11", "Heparin sodium, porcine 100 UNT/ML Injectable Solution", "1361048", "2010-03-02", category="inpatient"),
        observation(pid, f"{pid}-obs-1", "Hemoglobin A1c/Hemoglobin.total in Blood", "4548-4", "2019-01-01T09:00:00Z", 6.4, "%"),
        observation(pid, f"{pid}-obs-2", "Hemoglobin A1c/Hemoglobin.total in Blood", "4548-4", "2021-01-01T09:00:00Z", 6.8, "%"),
        observation(pid, f"{pid}-obs-3", "Glucose [Mass/volume] in Blood", "2339-0", "2021-01-01T09:00:00Z", 118.0, "mg/dL"),
        observation(pid, f"{pid}-obs-4", "Creatinine [Mass/volume] in Blood", "38483-4", "2021-01-01T09:00:00Z", 1.7, "mg/dL"),
        diagnostic_report(pid, f"{pid}-diag-1", "Lipid panel with direct LDL", "57698-3", "2020-05-01T08:30:00Z"),
        diagnostic_report(pid, f"{pid}-diag-2", "Complete blood count (hemogram) panel", "58410-2", "2019-03-03T08:30:00Z"),
        diagnostic_report(pid, f"{pid}-diag-3", "Complete blood count (hemogram) panel", "58410-2", "2021-03-03T08:30:00Z"),
        procedure(pid, f"{pid}-proc-1", "Transplant of kidney (procedure)", "70536003", "2010-03-02T07:00:00Z", "2010-03-02T12:30:00Z"),
        encounter(pid, f"{pid}-enc-1", "Encounter for problem (procedure)", "185347001", "2021-01-01T08:30:00Z", "2021-01-01T09:30:00Z"),
        claim(pid, f"{pid}-claim-1", "2021-01-01"),
    ]


def jacklyn() -> list[dict]:
    pid = "jacklyn830"
    conditions = [
        ("Essential hypertension (disorder)", "59621000", "1989-04-25"),
        ("Miscarriage in first trimester", "19169002", "1980-08-13"),
        ("Ischemic heart disease (disorder)", "414545008", "2008-02-29"),
        ("Chronic kidney disease stage 3 (disorder)", "433144002", "2016-05-24"),
        ("Proteinuria due to type 2 diabetes mellitus (disorder)", "90781000119102", "2014-10-19"),
        ("Social isolation (finding)", "422650009", "2019-03-08"),
        ("Sprain (morphologic abnormality)", "44465007", "2021-07-02"),
    ]
    medications = [
        ("Nitroglycerin 0.4 MG/ACTUAT Mucosal Spray", "705129", "2016-01-21"),
        ("Simvastatin 20MG Oral Tablet", "312961", "2015-03-09"),
        ("Clopidogrel 75 MG Oral Tablet", "309362", "2014-06-30"),
        ("24 HR metoprolol succinate 100 MG Extended Release Oral Tablet", "866436", "2013-09-17"),
        ("Acetaminophen 325 MG Oral Tablet", "313782", "2021-07-02"),
        ("Hydrochlorothiazide 25 MG Oral Tablet", "310798", "2012-12-04"),
    ]
    return [
        patient(pid, "Veum823", ["Jacklyn830"], "female", "1951-04-08"),
        *[condition(pid, f"{pid}-cond-{i + 1}", n, c, d) for i, (n, c, d) in enumerate(conditions)],
        *[medication(pid, f"{pid}-med-{i + 1}", n, c, d) for i, (n, c, d) in enumerate(medications)],
        medication(pid, f"{pid}-med-7", "Naproxen sodium 220 MG Oral Tablet", "849574", "2010-02-14", status="stopped"),
        medication(pid, f"{pid}-med-8", "Lisinopril 10 MG Oral Tablet", "314076", "2009-05-27", status="stopped"),
        observation(pid, f"{pid}-obs-1", "Creatinine [Mass/volume] in Blood", "38483-4", "2022-09-14T11:00:00Z", 1.4, "mg/dL"),
        observation(pid, f"{pid}-obs-2", "Glomerular filtration rate/1.73 sq M.predicted", "33914-3", "2022-09-14T11:00:00Z", 46.0, "mL/min/{1.73_m2}"),
        procedure(pid, f"{pid}-proc-1", "Percutaneous coronary intervention (procedure)", "415070008", "2008-03-10T06:45:00Z", "2008-03-10T09:00:00Z"),
        care_plan(pid, f"{pid}-plan-1", "Chronic kidney disease clinical management plan", "736377003", "2016-05-24"),
    ]


def allen() -> list[dict]:
    pid = "allen332"
    conditions = [
        ("Chronic sinusitis (disorder)", "40055000", "1985-02-06"),
        ("Hypertension", "59621000", "1979-10-15"),
        ("Served in armed forces (finding)", "224110006", "1961-01-20"),
        ("Received higher education (finding)", "224299000", "1965-06-12"),
        ("Body mass index 30+ - obesity (finding)", "162864005", "1990-08-27"),
        ("Prediabetes", "15777000", "1999-12-01"),
        ("Anemia (disorder)", "271737000", "2006-04-18"),
        ("Opioid abuse (disorder)", "5602001", "1996-09-10"),
        ("Atrial Fibrillation", "49436004", "2010-05-22"),
        ("Neoplasm of prostate", "126906006", "2014-07-31"),
        ("Carcinoma in situ of prostate (disorder)", "92691004", "2014-08-15"),
        ("Chronic intractable migraine without aura", "124171000119105", "2001-03-25"),
        ("Victim of intimate partner abuse (finding)", "706893006", "1993-11-09"),
        ("Stress (finding)", "73595000", "2015-01-07"),
        ("Alzheimer's disease (disorder)", "26929004", "2019-10-02"),
    ]
    medications = [
        ("Galantamine 4 MG Oral Tablet", "860695", "2019-10-16"),
        ("Warfarin Sodium 5 MG Oral Tablet", "855332", "2010-06-03"),
        ("doxycycline hyclate 100 MG", "1649988", "2018-02-12"),
        ("1 ML DOCEtaxel 20 MG/ML Injection", "1093280", "2014-09-04"),
        ("0.25 ML Leuprolide Acetate 30 MG/ML Prefilled Syringe", "727762", "2014-09-04"),
        ("lisinopril 10 MG Oral Tablet", "314076", "2005-04-21"),
        ("Verapamil Hydrochloride 40 MG", "897718", "2010-06-03"),
        ("Digoxin 0.125 MG Oral Tablet", "197604", "2010-06-03"),
    ]
    allergens = [
        ("Animal dander (substance)", "264287008", SNOMED, "environment"),
        ("Penicillin V", "7984", RXNORM, "medication"),
        ("Peanut (substance)", "256349002", SNOMED, "food"),
    ]
    return [
        patient(pid, "Ferry570", ["Allen332"], "male", "1941-07-22"),
        *[condition(pid, f"{pid}-cond-{i + 1}", n, c, d) for i, (n, c, d) in enumerate(conditions)],
        *[
            allergy(pid, f"{pid}-allergy-{i + 1}", n, c, "2000-01-10", system=s, category=cat)
            for i, (n, c, s, cat) in enumerate(allergens)
        ],
        *[medication(pid, f"{pid}-med-{i + 1}", n, c, d) for i, (n, c, d) in enumerate(medications)],
        observation(pid, f"{pid}-obs-1", "Prostate specific Ag [Mass/volume] in Serum or Plasma", "2857-1", "2022-11-29T10:15:00Z", 6.1, "ng/mL"),
        observation(pid, f"{pid}-obs-2", "Hemoglobin [Mass/volume] in Blood", "718-7", "2022-11-29T10:15:00Z", 12.2, "g/dL"),
        immunization(pid, f"{pid}-imm-1", "Td (adult), adsorbed", "113", "2021-08-14"),
        encounter(pid, f"{pid}-enc-1", "Encounter for check up (procedure)", "185349003", "2022-11-29T10:00:00Z", "2022-11-29T10:45:00Z"),
    ]


def dudley() -> list[dict]:
    # Deceased: cohort selection must exclude him despite the allergy.
    pid = "dudley365"
    return [
        patient(pid, "Blick895", ["Dudley365"], "male", "1969-03-11", deceased="2020-07-04T16:20:00Z"),
        condition(pid, f"{pid}-cond-1", "Essential hypertension (disorder)", "59621000", "2001-09-05"),
        condition(pid, f"{pid}-cond-2", "Stroke", "230690007", "2020-06-28"),
        allergy(pid, f"{pid}-allergy-1", "Penicillin V", "7984", "1988-04-12", system=RXNORM, category="medication"),
        medication(pid, f"{pid}-med-1", "Lisinopril 10 MG Oral Tablet", "314076", "2001-09-05"),
        observation(pid, f"{pid}-obs-1", "Systolic Blood Pressure", "8480-6", "2020-06-01T09:00:00Z", 162.0, "mm[Hg]", "vital-signs"),
        claim(pid, f"{pid}-claim-1", "2020-06-28"),
    ]


def carolina() -> list[dict]:
    # Alive extra with partial-precision dates and billing noise.
    pid = "carolina247"
    return [
        patient(pid, "Kovacek682", ["Carolina247"], "female", "1990-12-01"),
        condition(pid, f"{pid}-cond-1", "Essential hypertension (disorder)", "59621000", "2019"),
        allergy(pid, f"{pid}-allergy-1", "Shellfish (substance)", "227037002", "2010-06-15", category="food"),
        medication(pid, f"{pid}-med-1", "Hydrochlorothiazide 25 MG Oral Tablet", "310798", "2021-04-19"),
        observation(pid, f"{pid}-obs-1", "Cholesterol [Mass/volume] in Serum or Plasma", "2093-3", "2020-03", 212.0, "mg/dL"),
        observation(pid, f"{pid}-obs-2", "Cholesterol [Mass/volume] in Serum or Plasma", "2093-3", "2022-08-09T08:00:00Z", 198.0, "mg/dL"),
        claim(pid, f"{pid}-claim-1", "2022-08-09"),
    ]


FIXTURES = {
    "beatris270_bogan287.json": beatris,
    "milton509_ortiz186.json": milton,
    "edythe31_mcdermott739.json": edythe,
    "gonzalo160_duenas839.json": gonzalo,
    "jacklyn830_veum823.json": jacklyn,
    "allen332_ferry570.json": allen,
    "dudley365_blick895.json": dudley,
    "carolina247_kovacek682.json": carolina,
}


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for filename, builder in FIXTURES.items():
        path = OUT_DIR / filename
        path.write_text(
            json.dumps(bundle(builder()), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
