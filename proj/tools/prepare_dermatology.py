#!/usr/bin/env python3
"""Convert the UCI dermatology.data file into a CSV with a header row.

Rows with a missing age ('?') are dropped, leaving 358 of 366 instances.

    python3 tools/prepare_dermatology.py dermatology.data data/dermatology.csv
"""

import csv
import sys

FEATURES = [
    "erythema", "scaling", "definite_borders", "itching", "koebner_phenomenon",
    "polygonal_papules", "follicular_papules", "oral_mucosal_involvement",
    "knee_and_elbow_involvement", "scalp_involvement", "family_history",
    "melanin_incontinence", "eosinophils_in_infiltrate", "pnl_infiltrate",
    "fibrosis_papillary_dermis", "exocytosis", "acanthosis", "hyperkeratosis",
    "parakeratosis", "clubbing_rete_ridges", "elongation_rete_ridges",
    "thinning_suprapapillary_epidermis", "spongiform_pustule", "munro_microabcess",
    "focal_hypergranulosis", "disappearance_granular_layer",
    "vacuolisation_damage_basal_layer", "spongiosis", "saw_tooth_appearance_retes",
    "follicular_horn_plug", "perifollicular_parakeratosis",
    "inflammatory_mononuclear_infiltrate", "band_like_infiltrate", "age",
]


def main(argv):
    if len(argv) != 3:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    kept = dropped = 0
    with open(argv[1], newline="") as src, open(argv[2], "w", newline="") as dst:
        out = csv.writer(dst)
        out.writerow(FEATURES + ["class"])
        for row in csv.reader(src):
            if not row:
                continue
            if len(row) != len(FEATURES) + 1:
                print(f"unexpected field count {len(row)}: {row}", file=sys.stderr)
                return 1
            if any(cell.strip() == "?" for cell in row):
                dropped += 1
                continue
            out.writerow([cell.strip() for cell in row])
            kept += 1
    print(f"wrote {kept} rows, dropped {dropped} with missing values", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
