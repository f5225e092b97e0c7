"""Bundled Berkeley admissions table and converters for the raw UCI files.

The UCI corpora are not redistributed; ``adult_csv`` and ``german_csv``
turn locally downloaded ``adult.data``/``adult.test``/``german.data`` files
into header-bearing CSVs matching the bundled schemas.
"""

from __future__ import annotations

import csv
import io
from importlib import resources

from .dataset import Schema

# (department, sex) -> (admitted, denied)
BERKELEY_COUNTS = {
    ("A", "Male"): (512, 313), ("A", "Female"): (89, 19),
    ("B", "Male"): (313, 207), ("B", "Female"): (17, 8),
    ("C", "Male"): (120, 205), ("C", "Female"): (202, 391),
    ("D", "Male"): (138, 279), ("D", "Female"): (131, 244),
    ("E", "Male"): (53, 138), ("E", "Female"): (94, 299),
    ("F", "Male"): (22, 351), ("F", "Female"): (24, 317),
}

BUILTIN = ("berkeley", "adult", "german")


def berkeley_rows():
    """Expand the count table to one (sex, Dep, Admission) row per applicant."""
    rows = []
    for (dept, sex), (admitted, denied) in BERKELEY_COUNTS.items():
        rows.extend([(sex, dept, "Yes")] * admitted)
        rows.extend([(sex, dept, "No")] * denied)
    return rows


def berkeley_csv() -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sex", "Dep", "Admission"])
    w.writerows(berkeley_rows())
    return buf.getvalue().encode("utf-8")


def schema_text(name: str) -> str:
    if name not in BUILTIN:
        raise KeyError(f"no builtin schema {name!r}; choose from {BUILTIN}")
    return resources.files("sbcnkit.data").joinpath(f"{name}.schema.yaml").read_text("utf-8")


def builtin_schema(name: str) -> Schema:
    return Schema.from_yaml(schema_text(name))


ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num", "marital_status",
    "occupation", "relationship", "race", "sex", "capital_gain", "capital_loss",
    "hours_per_week", "native_country", "income",
]
ADULT_KEEP = ["age", "race", "sex", "native_country", "education", "marital_status",
              "relationship", "occupation", "workclass", "income"]


def _adult_age(cell: str) -> str:
    age = int(cell)
    if age <= 30:
        return "Young"
    return "Adult" if age <= 50 else "Old"


def _clean(value: str) -> str:
    return value.strip().replace("-", "_").replace("&", "and").replace(" ", "_")


def adult_csv(*paths) -> bytes:
    """Convert raw ``adult.data``/``adult.test`` files into the bundled layout."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(ADULT_KEEP)
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("|"):
                    continue
                cells = [c.strip() for c in line.split(",")]
                if len(cells) != len(ADULT_COLUMNS):
                    continue
                rec = dict(zip(ADULT_COLUMNS, cells))
                rec["age"] = _adult_age(rec["age"])
                rec["income"] = "gt_50K" if rec["income"].rstrip(".") == ">50K" else "le_50K"
                w.writerow(["?" if rec[k] == "?" else _clean(rec[k]) for k in ADULT_KEEP])
    return out.getvalue().encode("utf-8")


GERMAN_COLUMNS = [
    "checking_status", "duration", "credit_history", "purpose", "credit_amount",
    "savings_status", "employment", "installment_commitment", "personal_status",
    "other_parties", "residence_since", "property_magnitude", "age", "other_payment_plans",
    "housing", "existing_credits", "job", "num_dependents", "telephone", "foreign_worker",
    "class",
]

GERMAN_CODES = {
    "A11": "lt_0", "A12": "0_to_200", "A13": "ge_200", "A14": "no_checking",
    "A30": "no_credits", "A31": "all_paid_here", "A32": "existing_paid",
    "A33": "delayed_previously", "A34": "critical_account",
    "A40": "new_car", "A41": "used_car", "A42": "furniture", "A43": "radio_tv",
    "A44": "domestic_appliance", "A45": "repairs", "A46": "education", "A47": "vacation",
    "A48": "retraining", "A49": "business", "A410": "other",
    "A61": "lt_100", "A62": "100_to_500", "A63": "500_to_1000", "A64": "ge_1000",
    "A65": "no_savings",
    "A71": "unemployed", "A72": "lt_1", "A73": "1_to_4", "A74": "4_to_7", "A75": "ge_7",
    "A91": "male_div_or_sep", "A92": "female_div_or_sep_or_mar", "A93": "male_single",
    "A94": "male_mar_or_wid", "A95": "female_single",
    "A101": "none", "A102": "co_applicant", "A103": "guarantor",
    "A121": "real_estate", "A122": "life_insurance", "A123": "car", "A124": "no_known_property",
    "A141": "bank", "A142": "stores", "A143": "none",
    "A151": "rent", "A152": "own", "A153": "for_free",
    "A171": "unemp_or_unskilled_non_resident", "A172": "unskilled_resident",
    "A173": "skilled", "A174": "highly_skilled",
    "A191": "none", "A192": "yes",
    "A201": "yes", "A202": "no",
}


def german_csv(path) -> bytes:
    """Convert the raw space-separated ``german.data`` into the bundled layout."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(GERMAN_COLUMNS)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            cells = line.split()
            if len(cells) != len(GERMAN_COLUMNS):
                continue
            row = [GERMAN_CODES.get(c, c) for c in cells[:-1]]
            row.append("good" if cells[-1] == "1" else "bad")
            w.writerow(row)
    return out.getvalue().encode("utf-8")
