"""Writes data/systems/ieee39_reduced.json.

A machine-only network for the New England 10-generator system. Load buses
are assumed eliminated (Kron reduction), leaving couplings between generator
buses. Inertias use the usual H constants (s, 100 MVA base) with
m = 2H / omega_s; dampings are proportional to inertia. The reduced
couplings and steady angles are representative values, and the mechanical
powers are computed from the angles so the file is an exact equilibrium.

Bus index k corresponds to generator bus 30 + k; bus 31 (index 1) is the
swing bus.
"""

import json
import math
import pathlib

OMEGA_S = 2.0 * math.pi * 60.0

# Generator bus -> inertia constant H (s).
H = {30: 42.0, 31: 30.3, 32: 35.8, 33: 28.6, 34: 26.0,
     35: 34.8, 36: 26.4, 37: 24.3, 38: 34.5, 39: 500.0}

DAMPING_PER_INERTIA = 1.5  # d_i / m_i (1/s)

# Reduced network: (bus a, bus b, susceptance B_ab); coupling is 1/B_ab.
BRANCHES = [
    (30, 37, 0.25), (30, 39, 0.20), (30, 31, 0.40),
    (31, 32, 0.15), (31, 39, 0.30),
    (32, 33, 0.35), (32, 39, 0.45),
    (33, 34, 0.20), (33, 35, 0.25), (34, 35, 0.30),
    (35, 36, 0.20), (33, 36, 0.40),
    (36, 38, 0.30), (37, 38, 0.25), (38, 39, 0.50),
]

# Steady-state angles (rad) relative to the swing bus.
ANGLES = {30: 0.12, 31: 0.0, 32: 0.08, 33: 0.18, 34: 0.22,
          35: 0.24, 36: 0.28, 37: 0.15, 38: 0.21, 39: -0.05}

SWING = 31


def main() -> None:
    buses = sorted(H)
    index = {b: k for k, b in enumerate(buses)}
    power = {b: 0.0 for b in buses}
    for a, b, sus in BRANCHES:
        flow = math.sin(ANGLES[a] - ANGLES[b]) / sus
        power[a] += flow
        power[b] -= flow

    machines = []
    for b in buses:
        m = 2.0 * H[b] / OMEGA_S
        machines.append({"inertia": m, "damping": DAMPING_PER_INERTIA * m, "power": power[b]})

    doc = {
        "description": "New England 10-generator system, machine-only reduced network; "
                       "bus k is generator bus 30+k, swing bus is generator bus 31. "
                       "Generated by scripts/make_ieee39_reduced.py.",
        "angle_unit": "rad",
        "machines": machines,
        "branches": [{"from": index[a], "to": index[b], "susceptance": s} for a, b, s in BRANCHES],
        "steady_angles": [ANGLES[b] for b in buses],
        "swing_bus": index[SWING],
    }
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "systems" / "ieee39_reduced.json"
    out.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
