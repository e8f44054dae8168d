"""Reference field selection, written without looking at the Rust code paths.

Usage: python3 select_fields.py reference_distributions.json > reference_scheme.json
"""
import json
import sys

# Standard division and group names.
NAMES = {
    "MD": "Multidisciplinary",
    "02": "Physical Sciences",
    "03": "Chemical Sciences",
    "06": "Biological Sciences",
    "07": "Agricultural and Veterinary Sciences",
    "09": "Engineering",
    "11": "Medical and Health Sciences",
    "17": "Psychology and Cognitive Sciences",
    "0601": "Biochemistry and Cell Biology",
    "0605": "Microbiology",
    "1102": "Cardiorespiratory Medicine and Haematology",
    "1103": "Clinical Sciences",
    "1109": "Neurosciences",
    "1112": "Oncology and Carcinogenesis",
    "1114": "Paediatrics and Reproductive Medicine",
    "1115": "Pharmacology and Pharmaceutical Sciences",
    "1117": "Public Health and Health Services",
}

T2, T4 = 0.03, 0.02
PARENTS = ["11", "06"]


def main(path):
    with open(path) as f:
        dist = json.load(f)
    fields = []
    for code in sorted(dist["two_digit"]):
        share = dist["two_digit"][code]
        if code in PARENTS or share <= T2:
            continue
        kind = "multidisciplinary" if code == "MD" else "direct_2digit"
        fields.append({"label": NAMES[code], "kind": kind, "source_codes": [code], "share": share})
    for parent in sorted(PARENTS):
        rest, total = [parent], 0.0
        sub = dist["four_digit"][parent]
        for code in sorted(sub):
            if sub[code] > T4 and not code.endswith("99"):
                fields.append({"label": NAMES[code], "kind": "direct_4digit", "source_codes": [code], "share": sub[code]})
            else:
                rest.append(code)
                total += sub[code]
        fields.append({"label": "Other " + NAMES[parent], "kind": "other_bucket", "source_codes": rest, "share": total})
    fields.sort(key=lambda f: (-f["share"], f["kind"] == "other_bucket", f["source_codes"][0]))
    doc = {
        "threshold_2digit": T2,
        "threshold_4digit": T4,
        "drill_down_parents": sorted(PARENTS),
        "fields": fields,
    }
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main(sys.argv[1])
