"""Independent check: bus-injection AC power flow with complex voltages.

Solved by fixed-point iteration on the reduced admittance matrix; no
DistFlow quantity is used.
"""

from __future__ import annotations

import numpy as np


def ac_power_flow(net, closed_ids, p, q, v0=1.0, tol=1e-13, max_iter=500):
    """Return (V complex per bus, {branch id: (P_send, Q_send, |I|^2)})."""
    ids = net.bus_ids
    idx = net.bus_index
    n = len(ids)
    y = np.zeros((n, n), dtype=complex)
    for bid in closed_ids:
        br = net.branch(bid)
        a, b = idx[br.from_bus], idx[br.to_bus]
        yb = 1.0 / complex(br.r, br.x)
        y[a, a] += yb
        y[b, b] += yb
        y[a, b] -= yb
        y[b, a] -= yb
    root = idx[net.substation]
    others = [k for k in range(n) if k != root]
    s = np.asarray(p, dtype=float) + 1j * np.asarray(q, dtype=float)
    z = np.linalg.inv(y[np.ix_(others, others)])
    coupling = y[np.ix_(others, [root])][:, 0] * v0
    v = np.full(n, v0, dtype=complex)
    for _ in range(max_iter):
        cur = np.conj(s[others] / v[others])
        new = z @ (cur - coupling)
        if np.max(np.abs(new - v[others])) < tol:
            v[others] = new
            break
        v[others] = new
    else:
        raise RuntimeError("AC power flow did not converge")
    flows = {}
    for bid in closed_ids:
        br = net.branch(bid)
        a, b = idx[br.from_bus], idx[br.to_bus]
        i_ab = (v[a] - v[b]) / complex(br.r, br.x)
        sf = v[a] * np.conj(i_ab)
        flows[bid] = (sf.real, sf.imag, abs(i_ab) ** 2)
    return v, flows
