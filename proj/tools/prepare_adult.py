#!/usr/bin/env python3
"""Build the 3000-row Adult Income sample used by the case-study checks.

Reads the raw UCI Adult table (adult.data or any CSV with the standard
header), drops rows with missing values, collapses the high-cardinality
nominal columns and writes a seeded random sample plus its schema file.
"""
import argparse
import csv
import json
import random

WORKCLASS = {
    "Private": "Private",
    "Self-emp-not-inc": "Self-employed",
    "Self-emp-inc": "Self-employed",
    "Federal-gov": "Government",
    "Local-gov": "Government",
    "State-gov": "Government",
}
MARRIED = {"Married-civ-spouse", "Married-AF-spouse"}
RACE = {"White": "White", "Black": "Black"}

COLUMNS = ["Age", "Work class", "Education", "Marital status", "Race",
           "Gender", "Capital gain", "Hours per week", "Income"]


def convert(row):
    if any(v.strip() in ("", "?") for v in row.values()):
        return None
    work = WORKCLASS.get(row["workclass"].strip())
    if work is None:
        return None
    income = row["income-per-year"].strip().rstrip(".")
    return {
        "Age": row["age"].strip(),
        "Work class": work,
        "Education": row["education-num"].strip(),
        "Marital status": "Married" if row["marital-status"].strip() in MARRIED else "Single",
        "Race": RACE.get(row["race"].strip(), "Other"),
        "Gender": row["sex"].strip(),
        "Capital gain": row["capital-gain"].strip(),
        "Hours per week": row["hours-per-week"].strip(),
        "Income": income,
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("raw")
    ap.add_argument("--out", default="data/adult_3000.csv")
    ap.add_argument("--schema", default="data/adult_3000.schema.json")
    ap.add_argument("--n", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    with open(args.raw, newline="") as f:
        rows = [r for r in (convert(r) for r in csv.DictReader(f, skipinitialspace=True)) if r]
    rng = random.Random(args.seed)
    sample = rng.sample(rows, args.n)

    with open(args.out, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(sample)

    schema = {c: "numeric" for c in ("Age", "Education", "Capital gain", "Hours per week")}
    schema.update({c: "nominal" for c in ("Work class", "Marital status", "Race", "Gender", "Income")})
    schema["label"] = "Income"
    schema["favorable"] = ">50K"
    with open(args.schema, "w") as f:
        json.dump(schema, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
