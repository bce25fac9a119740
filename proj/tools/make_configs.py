#!/usr/bin/env python3
"""Writes the example configurations in configs/."""

import argparse
import json
import pathlib

TOOTH = 0.215
GROOVE = 0.215

# High-contrast slab: substrate / core / air cover, grooves etched through the core.
N_SUBSTRATE = 1.45
N_CORE = 2.0
N_COVER = 1.0
CORE_LO, CORE_HI = -0.2, 0.2
ETCH_LO = -0.2


def layers(D, etch_lo=None):
    out = [{"x_lo": -D, "x_hi": CORE_LO, "n": N_SUBSTRATE}]
    if etch_lo is None:
        out.append({"x_lo": CORE_LO, "x_hi": CORE_HI, "n": N_CORE})
    else:
        if etch_lo > CORE_LO:
            out.append({"x_lo": CORE_LO, "x_hi": etch_lo, "n": N_CORE})
        out.append({"x_lo": etch_lo, "x_hi": CORE_HI, "n": N_COVER})
    out.append({"x_lo": CORE_HI, "x_hi": D, "n": N_COVER})
    return out


def grating(D, N, pml, teeth, q, wavelength, source_at_center=False, incident=False):
    segs = []
    for t in range(teeth):
        segs.append({"profile": "tooth", "length": TOOTH, "q": q})
        if t + 1 < teeth:
            segs.append({"profile": "groove", "length": GROOVE, "q": q})
    doc = {
        "domain": {"half_width": D, "N": N},
        "wavelength": wavelength,
        "profiles": [
            {"id": "tooth", "intervals": layers(D)},
            {"id": "groove", "intervals": layers(D, ETCH_LO)},
        ],
        "segments": segs,
        "leads": {"left_profile": "tooth", "right_profile": "tooth"},
    }
    if pml:
        doc["domain"]["pml"] = pml
    if source_at_center:
        segs[len(segs) // 2]["source"] = "center"
        doc["sources"] = [{"id": "center", "kind": "cos_sin",
                           "params": {"amplitude": 1.0, "period": TOOTH}}]
    if incident:
        doc["incident"] = {"mode": 0, "amplitude": 1.0}
    return doc


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "configs"))
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    D, N = 2.0, 120
    pml = {"thickness": 0.6, "sigma_max": 6.0, "order": 2}
    small_pml = {"thickness": 0.3, "sigma_max": 5.0, "order": 2}

    configs = {
        "bragg_source.json": grating(D, N, pml, 21, 8, 1.3, source_at_center=True),
        "bragg_incident.json": grating(D, N, pml, 21, 8, 1.3, incident=True),
        "bragg_closed.json": grating(D, N, None, 21, 8, 1.3, incident=True),
        "grating_small.json": grating(1.0, 30, small_pml, 3, 6, 1.3, source_at_center=True),
        "grating_small_incident.json": grating(1.0, 30, small_pml, 3, 6, 1.3, incident=True),
        "uniform.json": {
            "domain": {"half_width": 1.0, "N": 30},
            "wavelength": 1.3,
            "profiles": [{"id": "tooth", "intervals": layers(1.0)}],
            "segments": [{"profile": "tooth", "length": 0.5, "q": 64} for _ in range(3)],
            "leads": {"left_profile": "tooth", "right_profile": "tooth"},
            "incident": {"mode": 0, "amplitude": 1.0},
        },
        "zero.json": grating(1.0, 30, small_pml, 3, 6, 1.3),
    }
    for name, doc in configs.items():
        (out / name).write_text(json.dumps(doc, indent=2) + "\n")
        print(out / name)


if __name__ == "__main__":
    main()
