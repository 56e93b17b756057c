"""Regenerate the bundled case files in src/sdnr/data/.

Run from the repository root: ``python3 tools/build_cases.py``.
"""

from __future__ import annotations

from pathlib import Path

from sdnr.casefile import CaseDocument, write_case
from sdnr.network import SUBSTATION, Branch, Bus, Network, SwitchConfiguration
from sdnr.scenarios import LoadProfile, RenewableProfile, ScenarioSet

DATA = Path(__file__).resolve().parents[1] / "src" / "sdnr" / "data"


def _sub(bus_id: int, cap: float) -> Bus:
    return Bus(bus_id, SUBSTATION, p_min=-cap, p_max=cap, q_min=-cap, q_max=cap, v_set=1.0)


def case2() -> CaseDocument:
    net = Network((_sub(1, 1.0), Bus(2)), (Branch(1, 1, 2, 0.01, 0.01),),
                  base_mva=1.0, base_kv=12.66, name="case2")
    inj = ScenarioSet.single(net.bus_ids, {2: -0.1}, {})
    return CaseDocument(net, SwitchConfiguration.all_closed(net), {2: LoadProfile(0.1)}, inj,
                        notes="Two buses, one line; closed-form check case.")


# Baran-Wu 33-bus feeder: (from, to, r ohm, x ohm); loads in kW, kvar.
_B33 = [
    (1, 2, 0.0922, 0.0470), (2, 3, 0.4930, 0.2511), (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941), (5, 6, 0.8190, 0.7070), (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351), (8, 9, 1.0300, 0.7400), (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650), (11, 12, 0.3744, 0.1238), (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129), (14, 15, 0.5910, 0.5260), (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210), (17, 18, 0.7320, 0.5740), (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554), (20, 21, 0.4095, 0.4784), (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083), (23, 24, 0.8980, 0.7091), (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034), (26, 27, 0.2842, 0.1447), (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006), (29, 30, 0.5075, 0.2585), (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619), (32, 33, 0.3410, 0.5302),
]
_TIES33 = [(8, 21, 2.0, 2.0), (9, 15, 2.0, 2.0), (12, 22, 2.0, 2.0),
           (18, 33, 0.5, 0.5), (2, 29, 0.5, 0.5)]
_LOAD33 = {
    2: 100, 3: 90, 4: 120, 5: 60, 6: 60, 7: 200, 8: 200, 9: 60, 10: 60, 11: 45,
    12: 60, 13: 60, 14: 120, 15: 60, 16: 60, 17: 60, 18: 90, 19: 90, 20: 90,
    21: 90, 22: 90, 23: 90, 24: 420, 25: 420, 26: 60, 27: 60, 28: 60, 29: 120,
    30: 200, 31: 150, 32: 210, 33: 60,
}
_RENEW33 = (7, 12, 16, 21, 25, 29, 32)


def case33() -> CaseDocument:
    base_mva, base_kv = 10.0, 12.66
    zb = base_kv ** 2 / base_mva
    buses = [_sub(1, 2.0)] + [Bus(b) for b in range(2, 34)]
    rows = _B33 + _TIES33
    branches = [Branch(k, f, t, round(r / zb, 10), round(x / zb, 10))
                for k, (f, t, r, x) in enumerate(rows, start=1)]
    net = Network(tuple(buses), tuple(branches), base_mva, base_kv, name="case33")
    ties = range(len(_B33) + 1, len(rows) + 1)
    profiles = {}
    for b, kw in _LOAD33.items():
        if b in _RENEW33:
            profiles[b] = RenewableProfile(wind=0.015, solar=0.02)
        else:
            profiles[b] = LoadProfile(kw / 1000 / base_mva)
    return CaseDocument(
        net, SwitchConfiguration.with_open(net, ties), profiles,
        notes=("Baran-Wu 33-bus feeder, 10 MVA / 12.66 kV base. Ties (8,21), (9,15), "
               "(12,22), (18,33), (2,29) start open. Buses 7, 12, 16, 21, 25, 29, 32 carry "
               "150 kW wind plus 200 kW solar instead of their load."),
    )


# IEEE 123-bus line segments: (from, to, length ft, configuration).
_L123 = [
    (1, 2, 175, 10), (1, 3, 250, 11), (1, 7, 300, 1), (3, 4, 200, 11), (3, 5, 325, 11),
    (5, 6, 250, 11), (7, 8, 200, 1), (8, 12, 225, 10), (8, 9, 225, 9), (8, 13, 300, 1),
    (9, 14, 425, 9), (13, 34, 150, 11), (13, 18, 825, 2), (14, 11, 250, 9),
    (14, 10, 250, 9), (15, 16, 375, 11), (15, 17, 350, 11), (18, 19, 250, 9),
    (18, 21, 300, 2), (19, 20, 325, 9), (21, 22, 525, 10), (21, 23, 250, 2),
    (23, 24, 550, 11), (23, 25, 275, 2), (25, 26, 350, 7), (25, 28, 200, 2),
    (26, 27, 275, 7), (26, 31, 225, 11), (27, 33, 500, 9), (28, 29, 300, 2),
    (29, 30, 350, 2), (30, 250, 200, 2), (31, 32, 300, 11), (34, 15, 100, 11),
    (35, 36, 650, 8), (35, 40, 250, 1), (36, 37, 300, 9), (36, 38, 250, 10),
    (38, 39, 325, 10), (40, 41, 325, 11), (40, 42, 250, 1), (42, 43, 500, 10),
    (42, 44, 200, 1), (44, 45, 200, 9), (44, 47, 250, 1), (45, 46, 300, 9),
    (47, 48, 150, 4), (47, 49, 250, 4), (49, 50, 250, 4), (50, 51, 250, 4),
    (52, 53, 200, 1), (53, 54, 125, 1), (54, 55, 275, 1), (54, 57, 350, 3),
    (55, 56, 275, 1), (57, 58, 250, 10), (57, 60, 750, 3), (58, 59, 250, 10),
    (60, 61, 550, 5), (60, 62, 250, 12), (62, 63, 175, 12), (63, 64, 350, 12),
    (64, 65, 425, 12), (65, 66, 325, 12), (67, 68, 200, 9), (67, 72, 275, 3),
    (67, 97, 250, 3), (68, 69, 275, 9), (69, 70, 325, 9), (70, 71, 275, 9),
    (72, 73, 275, 11), (72, 76, 200, 3), (73, 74, 350, 11), (74, 75, 400, 11),
    (76, 77, 400, 6), (76, 86, 700, 3), (77, 78, 100, 6), (78, 79, 225, 6),
    (78, 80, 475, 6), (80, 81, 475, 6), (81, 82, 250, 6), (81, 84, 675, 11),
    (82, 83, 250, 6), (84, 85, 475, 11), (86, 87, 450, 6), (87, 88, 175, 9),
    (87, 89, 275, 6), (89, 90, 225, 10), (89, 91, 225, 6), (91, 92, 300, 11),
    (91, 93, 225, 6), (93, 94, 275, 9), (93, 95, 300, 6), (95, 96, 200, 10),
    (97, 98, 275, 3), (98, 99, 550, 3), (99, 100, 300, 3), (100, 450, 800, 3),
    (101, 102, 225, 11), (101, 105, 275, 3), (102, 103, 325, 11), (103, 104, 700, 11),
    (105, 106, 225, 10), (105, 108, 325, 3), (106, 107, 575, 10), (108, 109, 450, 9),
    (108, 300, 1000, 3), (109, 110, 300, 9), (110, 111, 575, 9), (110, 112, 125, 9),
    (112, 113, 525, 9), (113, 114, 325, 9), (135, 35, 375, 4), (149, 1, 400, 1),
    (152, 52, 400, 1), (160, 67, 350, 6), (197, 101, 250, 3),
]
# closed switches and the substation regulator, modeled as short lines
_SW123 = [(150, 149), (13, 152), (18, 135), (60, 160), (97, 197)]
_TIES123 = [(54, 94), (51, 300), (114, 450), (39, 250), (66, 83)]
# approximate positive-sequence ohm/mile by line configuration
_Z123 = {
    **{c: (0.306, 0.627) for c in (1, 2, 3, 4, 5, 6)},
    7: (0.450, 0.700), 8: (0.450, 0.700),
    9: (1.330, 1.350), 10: (1.330, 1.350), 11: (1.330, 1.350),
    12: (0.460, 0.250),
}
_LOAD123 = {
    1: 40, 2: 20, 4: 40, 5: 20, 6: 40, 7: 20, 9: 40, 10: 20, 11: 40, 12: 20, 16: 40,
    17: 20, 19: 40, 20: 40, 22: 40, 24: 40, 28: 40, 29: 40, 30: 40, 31: 20, 32: 20,
    33: 40, 34: 40, 35: 40, 37: 40, 38: 20, 39: 20, 41: 20, 42: 20, 43: 40, 45: 20,
    46: 20, 47: 105, 48: 210, 49: 140, 50: 40, 51: 20, 52: 40, 53: 40, 55: 20, 56: 20,
    58: 20, 59: 20, 60: 20, 62: 40, 63: 40, 64: 75, 65: 140, 66: 75, 68: 20, 69: 40,
    70: 20, 71: 40, 73: 40, 74: 40, 75: 40, 76: 245, 77: 40, 79: 40, 80: 40, 82: 40,
    83: 20, 84: 20, 85: 40, 86: 20, 87: 40, 88: 40, 90: 40, 92: 40, 94: 40, 95: 20,
    96: 20, 98: 40, 99: 40, 100: 40, 102: 20, 103: 40, 104: 40, 106: 40, 107: 40,
    109: 40, 111: 20, 112: 20, 113: 40, 114: 20,
}
_RENEW123 = (8, 18, 25, 36, 44, 54, 57, 67, 72, 81, 89, 97, 101, 108)


def case123() -> CaseDocument:
    base_mva, base_kv = 10.0, 4.16
    zb = base_kv ** 2 / base_mva
    ids = sorted({b for row in _L123 + _SW123 for b in row[:2]})
    assert len(ids) == 123, len(ids)
    buses = [_sub(150, 2.0) if b == 150 else Bus(b) for b in ids]
    branches = []
    for f, t, ft, cfg in _L123:
        r, x = _Z123[cfg]
        mi = ft / 5280
        branches.append((f, t, r * mi / zb, x * mi / zb))
    for f, t in _SW123:
        branches.append((f, t, 0.001 / zb, 0.001 / zb))
    n_closed = len(branches)
    for f, t in _TIES123:
        # 500 ft of three-phase overhead line
        branches.append((f, t, 0.306 * 500 / 5280 / zb, 0.627 * 500 / 5280 / zb))
    brs = tuple(Branch(k, f, t, round(r, 10), round(x, 10))
                for k, (f, t, r, x) in enumerate(branches, start=1))
    net = Network(tuple(buses), brs, base_mva, base_kv, name="case123")
    ties = range(n_closed + 1, len(branches) + 1)
    profiles = {}
    for b in ids:
        if b == 150:
            continue
        if b in _RENEW123:
            profiles[b] = RenewableProfile(wind=0.006, solar=0.008)
        else:
            profiles[b] = LoadProfile(_LOAD123.get(b, 0) / 1000 / base_mva)
    return CaseDocument(
        net, SwitchConfiguration.with_open(net, ties), profiles,
        notes=("Balanced positive-sequence approximation of the IEEE 123-bus feeder, "
               "10 MVA / 4.16 kV base. Substation 150. Impedances from segment lengths "
               "and approximate per-configuration ohm/mile values. Closed switches and "
               "the substation regulator are short lines. Ties (54,94), (51,300), "
               "(114,450), (39,250), (66,83) start open. Fourteen junction buses carry "
               "60 kW wind plus 80 kW solar."),
    )


_E10 = [(0, 1), (1, 2), (2, 3), (2, 5), (3, 4), (3, 7), (5, 6), (4, 9), (7, 8), (6, 8), (7, 9)]
_RX10 = [(0.01, 0.01), (0.012, 0.013), (0.014, 0.016), (0.016, 0.019), (0.018, 0.022),
         (0.02, 0.025), (0.022, 0.028), (0.024, 0.011), (0.026, 0.014), (0.028, 0.017),
         (0.01, 0.02)]
_P10 = {1: -0.035, 2: -0.122, 3: -0.165, 4: 0.537, 5: -0.018, 6: 0.027, 7: -0.339,
        8: 0.341, 9: -0.118}


def fig2_10bus() -> CaseDocument:
    buses = (_sub(0, 10.0),) + tuple(Bus(b) for b in range(1, 10))
    branches = tuple(Branch(k, f, t, r, x)
                     for k, ((f, t), (r, x)) in enumerate(zip(_E10, _RX10), start=1))
    net = Network(buses, branches, 1.0, 12.66, name="fig2_10bus")
    q = {b: round(0.3 * p, 4) for b, p in _P10.items() if p < 0}
    inj = ScenarioSet.single(net.bus_ids, _P10, q)
    profiles = {b: (LoadProfile(-p) if p < 0 else RenewableProfile(wind=p, solar=0.0))
                for b, p in _P10.items()}
    return CaseDocument(
        net, SwitchConfiguration.all_closed(net), profiles, inj,
        notes=("Ten-bus two-loop walkthrough network, substation 0. Generation at buses "
               "4, 6 and 8. Two-stage reconfiguration opens (3,7) and (6,8) in stage 1 "
               "and divides the stage-2 loops into 1 and 3 sub-paths."),
    )


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    for build in (case2, case33, case123, fig2_10bus):
        case = build()
        write_case(case, DATA / f"{build.__name__}.json")
        print(f"{build.__name__}: {len(case.network.buses)} buses, "
              f"{len(case.network.branches)} branches, ties {case.tie_ends()}")


if __name__ == "__main__":
    main()
