"""Regenerate the case files shipped in src/microdispatch/data/.

    python scripts/build_fixtures.py

The 69-bus feeder is the Baran & Wu (1989) PG&E 69-bus system: 12.66 kV,
impedances in ohm, spot loads in kW/kVAr at the receiving bus. Buses are
renumbered from 0 (published bus k -> id k-1). Branch lengths are not part of
the public data; they are synthesised from |z| at 0.4 ohm/km so the
reliability term has something to scale with.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "microdispatch" / "data"

# from, to, R ohm, X ohm, P kW, Q kVAr   (published 1-based bus numbers)
IEEE69 = [
    (1, 2, 0.0005, 0.0012, 0.0, 0.0),
    (2, 3, 0.0005, 0.0012, 0.0, 0.0),
    (3, 4, 0.0015, 0.0036, 0.0, 0.0),
    (4, 5, 0.0251, 0.0294, 0.0, 0.0),
    (5, 6, 0.3660, 0.1864, 2.6, 2.2),
    (6, 7, 0.3811, 0.1941, 40.4, 30.0),
    (7, 8, 0.0922, 0.0470, 75.0, 54.0),
    (8, 9, 0.0493, 0.0251, 30.0, 22.0),
    (9, 10, 0.8190, 0.2707, 28.0, 19.0),
    (10, 11, 0.1872, 0.0619, 145.0, 104.0),
    (11, 12, 0.7114, 0.2351, 145.0, 104.0),
    (12, 13, 1.0300, 0.3400, 8.0, 5.5),
    (13, 14, 1.0440, 0.3450, 8.0, 5.5),
    (14, 15, 1.0580, 0.3496, 0.0, 0.0),
    (15, 16, 0.1966, 0.0650, 45.5, 30.0),
    (16, 17, 0.3744, 0.1238, 60.0, 35.0),
    (17, 18, 0.0047, 0.0016, 60.0, 35.0),
    (18, 19, 0.3276, 0.1083, 0.0, 0.0),
    (19, 20, 0.2106, 0.0690, 1.0, 0.6),
    (20, 21, 0.3416, 0.1129, 114.0, 81.0),
    (21, 22, 0.0140, 0.0046, 5.0, 3.5),
    (22, 23, 0.1591, 0.0526, 0.0, 0.0),
    (23, 24, 0.3463, 0.1145, 28.0, 20.0),
    (24, 25, 0.7488, 0.2475, 0.0, 0.0),
    (25, 26, 0.3089, 0.1021, 14.0, 10.0),
    (26, 27, 0.1732, 0.0572, 14.0, 10.0),
    (3, 28, 0.0044, 0.0108, 26.0, 18.6),
    (28, 29, 0.0640, 0.1565, 26.0, 18.6),
    (29, 30, 0.3978, 0.1315, 0.0, 0.0),
    (30, 31, 0.0702, 0.0232, 0.0, 0.0),
    (31, 32, 0.3510, 0.1160, 0.0, 0.0),
    (32, 33, 0.8390, 0.2816, 14.0, 10.0),
    (33, 34, 1.7080, 0.5646, 19.5, 14.0),
    (34, 35, 1.4740, 0.4873, 6.0, 4.0),
    (3, 36, 0.0044, 0.0108, 26.0, 18.55),
    (36, 37, 0.0640, 0.1565, 26.0, 18.55),
    (37, 38, 0.1053, 0.1230, 0.0, 0.0),
    (38, 39, 0.0304, 0.0355, 24.0, 17.0),
    (39, 40, 0.0018, 0.0021, 24.0, 17.0),
    (40, 41, 0.7283, 0.8509, 1.2, 1.0),
    (41, 42, 0.3100, 0.3623, 0.0, 0.0),
    (42, 43, 0.0410, 0.0478, 6.0, 4.3),
    (43, 44, 0.0092, 0.0116, 0.0, 0.0),
    (44, 45, 0.1089, 0.1373, 39.22, 26.3),
    (45, 46, 0.0009, 0.0012, 39.22, 26.3),
    (4, 47, 0.0034, 0.0084, 0.0, 0.0),
    (47, 48, 0.0851, 0.2083, 79.0, 56.4),
    (48, 49, 0.2898, 0.7091, 384.7, 274.5),
    (49, 50, 0.0822, 0.2011, 384.7, 274.5),
    (8, 51, 0.0928, 0.0473, 40.5, 28.3),
    (51, 52, 0.3319, 0.1114, 3.6, 2.7),
    (9, 53, 0.1740, 0.0886, 4.35, 3.5),
    (53, 54, 0.2030, 0.1034, 26.4, 19.0),
    (54, 55, 0.2842, 0.1447, 24.0, 17.2),
    (55, 56, 0.2813, 0.1433, 0.0, 0.0),
    (56, 57, 1.5900, 0.5337, 0.0, 0.0),
    (57, 58, 0.7837, 0.2630, 0.0, 0.0),
    (58, 59, 0.3042, 0.1006, 100.0, 72.0),
    (59, 60, 0.3861, 0.1172, 0.0, 0.0),
    (60, 61, 0.5075, 0.2585, 1244.0, 888.0),
    (61, 62, 0.0974, 0.0496, 32.0, 23.0),
    (62, 63, 0.1450, 0.0738, 0.0, 0.0),
    (63, 64, 0.7105, 0.3619, 227.0, 162.0),
    (64, 65, 1.0410, 0.5302, 59.0, 42.0),
    (11, 66, 0.2012, 0.0611, 18.0, 13.0),
    (66, 67, 0.0047, 0.0014, 18.0, 13.0),
    (12, 68, 0.7394, 0.2444, 28.0, 20.0),
    (68, 69, 0.0047, 0.0016, 28.0, 20.0),
]

# normalised daily load shape (1.0 at the evening peak)
LOAD_SHAPE = [
    0.55, 0.50, 0.47, 0.45, 0.46, 0.50, 0.60, 0.70, 0.76, 0.80, 0.82, 0.84,
    0.83, 0.80, 0.78, 0.78, 0.82, 0.90, 0.97, 1.00, 0.98, 0.90, 0.76, 0.64,
]
# hourly wind-speed forecast, m/s
WIND = [
    7.5, 7.8, 8.0, 8.2, 8.0, 7.6, 7.0, 6.4, 6.0, 5.8, 5.6, 5.6,
    5.8, 6.0, 6.3, 6.6, 7.0, 7.4, 7.8, 8.2, 8.4, 8.2, 8.0, 7.8,
]
# clear-sky irradiance, W/m^2
CLEAR_SKY = [
    0, 0, 0, 0, 0, 20, 120, 280, 450, 610, 740, 820,
    850, 820, 740, 610, 450, 280, 120, 20, 0, 0, 0, 0,
]
TEMPERATURE = [
    16, 15, 15, 14, 14, 15, 17, 19, 22, 24, 26, 28,
    29, 30, 30, 29, 28, 26, 24, 22, 20, 19, 18, 17,
]
GRID_PRICE = [0.08] * 8 + [0.12] * 10 + [0.20] * 6

WT_TABLE_I = {"p_rate": 250.0, "v_ci": 2.0, "v_r": 14.0, "v_co": 25.0}


def write(name: str, doc: dict) -> None:
    (DATA / name).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print("wrote", DATA / name)


def two_bus() -> dict:
    return {
        "name": "two-bus",
        "description": "Smallest valid radial network: one load behind one line.",
        "base": {"s_base_kva": 1000.0, "v_base_kv": 12.66},
        "horizon": {"steps": 24, "dt": 1.0},
        "buses": [{"id": 0}, {"id": 1, "load_p_peak": 100.0, "load_q_peak": 20.0}],
        "branches": [
            {"id": 1, "from_bus": 0, "to_bus": 1, "r": 0.5, "x": 0.3, "length": 1.0,
             "failure_rate": 0.1}
        ],
        "ders": [],
        "prices": {"grid_energy_price": GRID_PRICE, "loss_price": 0.1, "interruption_price": 5.0},
        "profiles": {"load": LOAD_SHAPE},
        "weights": {"h1": 1.0, "h2": 1.0, "h_c": 1.0},
    }


def ieee69() -> dict:
    buses = [{"id": 0, "load_p_peak": 0.0, "load_q_peak": 0.0}]
    branches = []
    for k, (f, t, r, x, p, q) in enumerate(IEEE69, start=1):
        buses.append({"id": t - 1, "load_p_peak": p, "load_q_peak": q})
        length = max(round(math.hypot(r, x) / 0.4, 4), 0.01)
        branches.append({
            "id": k, "from_bus": f - 1, "to_bus": t - 1, "r": r, "x": x,
            "length": length, "failure_rate": 0.1, "has_sectionalizer": True,
        })
    buses.sort(key=lambda b: b["id"])
    return {
        "name": "pge-69",
        "description": "Baran & Wu 69-bus radial feeder with an illustrative DER fleet.",
        "base": {"s_base_kva": 10000.0, "v_base_kv": 12.66, "slack_voltage_pu": 1.0},
        "horizon": {"steps": 24, "dt": 1.0},
        "buses": buses,
        "branches": branches,
        "ders": [
            {"name": "wt1", "kind": "WT", "bus": 60, "om_rate": 0.03, "params": WT_TABLE_I},
            {"name": "pv1", "kind": "PV", "bus": 26, "om_rate": 0.04,
             "params": {"p_stc": 250.0, "g_stc": 1000.0, "k": 0.001, "t_ref": 25.0}},
            {"name": "chp1", "kind": "CHP", "bus": 49, "p_min": 0.0, "p_max": 500.0,
             "om_rate": 0.01,
             "emission": {"alpha": 0.0, "beta": 0.5, "gamma": 0.0, "zeta": 0.0, "lam": 0.0},
             "params": {"theta": 0.0001, "rho": 0.25, "gamma": 2.0, "efficiency": 0.35,
                        "heat_to_electric": 1.2}},
            {"name": "ess1", "kind": "ESS", "bus": 64, "om_rate": 0.005,
             "params": {"capacity": 800.0, "soc_min": 160.0, "soc_max": 760.0,
                        "soc_init": 400.0, "p_ch_max": 200.0, "p_dis_max": 200.0,
                        "eta_ch": 0.95, "eta_dis": 0.95}},
        ],
        "prices": {"grid_energy_price": GRID_PRICE, "gas_price": 0.04, "heat_credit": 0.0,
                   "loss_price": 0.1, "interruption_price": 2.0, "emission_price": 0.02},
        "profiles": {"load": LOAD_SHAPE, "wind_speed": WIND, "irradiance": CLEAR_SKY,
                     "temperature": TEMPERATURE},
        "weights": {"h1": 1.0, "h2": 1.0, "h_c": 1.0},
        "reliability": {"t_res": 1.0, "t_rep": 4.0},
    }


def lv_microgrid(certain: bool = False) -> dict:
    """Ten-bus 0.4 kV community microgrid behind a tie transformer at bus 0."""
    # (id, from, to, r ohm, x ohm, length km)
    lines = [
        (1, 0, 1, 0.0030, 0.0020, 0.03),
        (2, 1, 2, 0.0040, 0.0025, 0.04),
        (3, 2, 3, 0.0050, 0.0030, 0.05),
        (4, 3, 4, 0.0040, 0.0025, 0.04),
        (5, 4, 5, 0.0060, 0.0035, 0.06),
        (6, 2, 6, 0.0070, 0.0040, 0.07),
        (7, 6, 7, 0.0060, 0.0035, 0.06),
        (8, 4, 8, 0.0080, 0.0045, 0.08),
        (9, 8, 9, 0.0050, 0.0030, 0.05),
    ]
    loads = {0: (0, 0), 1: (20, 8), 2: (15, 6), 3: (30, 12), 4: (10, 4), 5: (35, 14),
             6: (25, 10), 7: (30, 12), 8: (15, 6), 9: (20, 8)}
    uncertainty = {"load_sigma": 0.05, "wind_model": "rayleigh", "weibull_shape": 4.0,
                   "clearness_mean": 0.7, "clearness_sigma": 0.1, "price_sigma": 0.0}
    if certain:
        uncertainty.update(load_sigma=0.0, wind_model="fixed", clearness_sigma=0.0)
    return {
        "name": "lv-microgrid-certain" if certain else "lv-microgrid",
        "description": "Community LV microgrid: WT, PV, CHP and a battery on a 10-bus feeder.",
        "base": {"s_base_kva": 100.0, "v_base_kv": 0.4, "slack_voltage_pu": 1.0},
        "horizon": {"steps": 24, "dt": 1.0},
        "buses": [{"id": b, "load_p_peak": p, "load_q_peak": q} for b, (p, q) in loads.items()],
        "branches": [
            {"id": i, "from_bus": f, "to_bus": t, "r": r, "x": x, "length": ln,
             "failure_rate": 0.2, "has_sectionalizer": True}
            for i, f, t, r, x, ln in lines
        ],
        "ders": [
            {"name": "wt1", "kind": "WT", "bus": 7, "om_rate": 0.03,
             "params": {"p_rate": 60.0, "v_ci": 2.0, "v_r": 14.0, "v_co": 25.0}},
            {"name": "pv1", "kind": "PV", "bus": 5, "om_rate": 0.04,
             "params": {"p_stc": 50.0, "g_stc": 1000.0, "k": 0.001, "t_ref": 25.0}},
            {"name": "chp1", "kind": "CHP", "bus": 3, "p_min": 0.0, "p_max": 120.0,
             "om_rate": 0.01,
             "emission": {"alpha": 0.0, "beta": 0.5, "gamma": 0.0005, "zeta": 0.0, "lam": 0.0},
             "params": {"theta": 0.0002, "rho": 0.25, "gamma": 1.0, "efficiency": 0.35,
                        "heat_to_electric": 1.2}},
            {"name": "ess1", "kind": "ESS", "bus": 9, "om_rate": 0.005,
             "params": {"capacity": 150.0, "soc_min": 30.0, "soc_max": 142.5, "soc_init": 75.0,
                        "p_ch_max": 40.0, "p_dis_max": 40.0, "eta_ch": 0.95, "eta_dis": 0.95}},
        ],
        "prices": {"grid_energy_price": GRID_PRICE, "gas_price": 0.04, "heat_credit": 0.0,
                   "loss_price": 0.1, "interruption_price": 2.0, "emission_price": 0.02},
        "profiles": {"load": "lv_load.csv", "wind_speed": WIND, "irradiance": CLEAR_SKY,
                     "temperature": TEMPERATURE},
        "weights": {"h1": 1.0, "h2": 1.0, "h_c": 1.0},
        "reliability": {"t_res": 1.0, "t_rep": 4.0},
        "tie": {"limit_kw": 110.0},
        "uncertainty": uncertainty,
    }


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    write("two_bus.json", two_bus())
    write("ieee69.json", ieee69())
    write("lv_microgrid.json", lv_microgrid())
    write("lv_microgrid_certain.json", lv_microgrid(certain=True))
    with open(DATA / "lv_load.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("hour,value\n")
        for h, v in enumerate(LOAD_SHAPE):
            fh.write(f"{h},{v}\n")
    print("wrote", DATA / "lv_load.csv")


if __name__ == "__main__":
    main()
