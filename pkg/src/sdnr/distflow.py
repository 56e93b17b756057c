"""DistFlow branch-flow model: per-scenario and stochastic power-flow solves.

Non-substation injections are fixed, so for a given switch configuration the
relaxed OPF has no free dispatch and its optimum is the physical power-flow
solution. Radial configurations use a backward/forward sweep; meshed ones use
damped Newton on the DistFlow equations plus one angle-closure equation per
loop (without it the branch-flow equations are short one equation per loop).
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    ConfigurationMismatchError,
    DivergenceError,
    InfeasibleError,
    ScenarioSolveError,
    TopologyError,
)
from .loops import Loop, find_loops
from .network import Network, SwitchConfiguration, bfs_tree
from .scenarios import Scenario, ScenarioSet

CHECK_ONLY = "check-only"
REJECT = "reject"


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_iter: int = 100
    big_m: float = 10.0
    limit_mode: str = CHECK_ONLY

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.limit_mode not in (CHECK_ONLY, REJECT):
            raise ValueError(f"unknown limit mode {self.limit_mode!r}")

    def check_big_m(self, net: Network) -> None:
        need = max(b.v_max ** 2 - b.v_min ** 2 for b in net.buses)
        if self.big_m < need:
            raise ValueError(f"big_m={self.big_m} is below v_max^2 - v_min^2 = {need}")


@dataclass(frozen=True, eq=False)
class PowerFlowSolution:
    """One scenario's DistFlow state; arrays follow the network's id order.

    ``p``/``q`` are sending-end flows in each branch's reference direction;
    open branches carry zeros. ``p_inj``/``q_inj`` are bus injections, with
    the substation entry equal to ``p_s``/``q_s``.
    """

    v: np.ndarray
    l: np.ndarray
    p: np.ndarray
    q: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray
    p_s: float
    q_s: float
    closed: np.ndarray
    from_idx: np.ndarray
    residual: float
    iterations: int
    method: str
    violations: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.p_s

    @property
    def loss(self) -> float:
        """Total active loss (substation supply minus net demand)."""
        return float(np.sum(self.p_inj))

    def soc_residuals(self) -> np.ndarray:
        res = np.abs(self.l * self.v[self.from_idx] - self.p ** 2 - self.q ** 2)
        return np.where(self.closed, res, 0.0)


@dataclass(frozen=True, eq=False)
class StochasticSolution:
    solutions: tuple[PowerFlowSolution, ...]
    probabilities: np.ndarray
    expected_objective: float
    expected_flows: np.ndarray
    expected_abs_flows: np.ndarray
    expected_loss: float

    @property
    def opf_solves(self) -> int:
        return len(self.solutions)


# --------------------------------------------------------------------------
# topology preprocessing, cached per (network, configuration)


@dataclass(frozen=True, eq=False)
class _Topology:
    n_bus: int
    n_br: int
    root: int
    closed: np.ndarray  # bool mask over all branches
    cidx: np.ndarray  # indices of closed branches
    fidx: np.ndarray  # from-bus index per branch (all branches)
    tidx: np.ndarray
    r: np.ndarray
    x: np.ndarray
    radial: bool
    # radial sweep data (tree branches in BFS order of their child bus)
    tb: np.ndarray | None = None
    child: np.ndarray | None = None
    parent: np.ndarray | None = None
    forward: np.ndarray | None = None  # +1 when reference direction is parent->child
    subtree: np.ndarray | None = None  # [k, bus] = bus lies below tree branch k
    # meshed data
    loop_rows: np.ndarray | None = None  # [loop, closed-branch position] = orientation sign


@lru_cache(maxsize=512)
def _topology(net: Network, cfg: SwitchConfiguration) -> _Topology:
    cfg.check(net)
    bidx = net.bus_index
    closed_ids = [b for b in net.branch_ids if cfg.is_closed(b)]
    order, via = bfs_tree(net, closed_ids)
    if len(order) != len(net.buses):
        islanded = sorted(set(net.bus_ids) - set(order))
        raise TopologyError(f"bus(es) {islanded} are not connected to the substation")
    n_bus, n_br = len(net.buses), len(net.branches)
    closed = np.array([cfg.is_closed(b) for b in net.branch_ids])
    fidx = np.array([bidx[br.from_bus] for br in net.branches], dtype=int)
    tidx = np.array([bidx[br.to_bus] for br in net.branches], dtype=int)
    r = np.array([br.r for br in net.branches])
    x = np.array([br.x for br in net.branches])
    common = dict(
        n_bus=n_bus, n_br=n_br, root=bidx[net.substation], closed=closed,
        cidx=np.flatnonzero(closed), fidx=fidx, tidx=tidx, r=r, x=x,
    )
    if len(closed_ids) == n_bus - 1:
        brx = net.branch_index
        kids = order[1:]
        tb = np.array([brx[via[c]] for c in kids], dtype=int)
        child = np.array([bidx[c] for c in kids], dtype=int)
        parent = np.array([bidx[net.branch(via[c]).other(c)] for c in kids], dtype=int)
        forward = np.where(fidx[tb] == parent, 1.0, -1.0)
        pos = {int(c): k for k, c in enumerate(child)}
        subtree = np.zeros((len(kids), n_bus))
        # walk each bus up to the root, marking every tree branch on the way
        for b in range(n_bus):
            cur = b
            while cur in pos:
                k = pos[cur]
                subtree[k, b] = 1.0
                cur = int(parent[k])
        return _Topology(radial=True, tb=tb, child=child, parent=parent,
                         forward=forward, subtree=subtree, **common)
    loops = find_loops(net, closed_ids)
    cpos = {int(k): j for j, k in enumerate(common["cidx"])}
    rows = np.zeros((len(loops), len(closed_ids)))
    brx = net.branch_index
    for li, lp in enumerate(loops):
        for bid, s in zip(lp.branches, lp.signs):
            rows[li, cpos[brx[bid]]] = s
    return _Topology(radial=False, loop_rows=rows, **common)


# --------------------------------------------------------------------------
# residuals


def _residuals(top: _Topology, v, p, q, l, pinj, qinj):
    """Balance, voltage-drop and quadratic residuals over closed branches."""
    c, f, t = top.cidx, top.fidx[top.cidx], top.tidx[top.cidx]
    r, x = top.r[c], top.x[c]
    pc, qc, lc = p[c], q[c], l[c]
    bal_p = pinj.copy()
    bal_q = qinj.copy()
    np.add.at(bal_p, t, pc - r * lc)
    np.add.at(bal_p, f, -pc)
    np.add.at(bal_q, t, qc - x * lc)
    np.add.at(bal_q, f, -qc)
    vd = v[f] - v[t] - 2 * (r * pc + x * qc) + (r * r + x * x) * lc
    quad = lc * v[f] - pc ** 2 - qc ** 2
    return bal_p, bal_q, vd, quad


def _angles(top: _Topology, v, p, q):
    c, f = top.cidx, top.fidx[top.cidx]
    r, x = top.r[c], top.x[c]
    return np.arctan2(x * p[c] - r * q[c], v[f] - r * p[c] - x * q[c])


# --------------------------------------------------------------------------
# solvers


def _sweep(top: _Topology, v0: float, pinj, qinj, conf: SolverConfig):
    n_br = top.n_br
    tb, child, parent, fwd, S = top.tb, top.child, top.parent, top.forward, top.subtree
    r, x = top.r[tb], top.x[tb]
    z2 = r * r + x * x
    dp = -pinj.copy()
    dq = -qinj.copy()
    dp[top.root] = 0.0
    dq[top.root] = 0.0
    lt = np.zeros(len(tb))
    for it in range(1, conf.max_iter + 1):
        wp = dp.copy()
        wq = dq.copy()
        wp[child] += r * lt
        wq[child] += x * lt
        P = S @ wp  # power entering each tree branch at its parent end
        Q = S @ wq
        drop = 2 * (r * P + x * Q) - z2 * lt
        v = v0 - S.T @ drop
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise DivergenceError(f"voltage collapse in sweep at iteration {it}")
        vpar = v[parent]
        quad = lt * vpar - P ** 2 - Q ** 2
        # a tenth of the tolerance leaves margin for the reported residuals
        if np.max(np.abs(quad), initial=0.0) <= 0.1 * conf.tolerance:
            break
        lt = (P ** 2 + Q ** 2) / vpar
    else:
        raise DivergenceError(f"sweep did not converge in {conf.max_iter} iterations")
    p = np.zeros(n_br)
    q = np.zeros(n_br)
    l = np.zeros(n_br)
    l[tb] = lt
    # reverse-oriented branches: sending end sits at the child
    p[tb] = np.where(fwd > 0, P, -P + r * lt)
    q[tb] = np.where(fwd > 0, Q, -Q + x * lt)
    ps = float(P[parent == top.root].sum())
    qs = float(Q[parent == top.root].sum())
    return v, p, q, l, ps, qs, it


def _newton(top: _Topology, v0: float, pinj, qinj, conf: SolverConfig):
    n_bus = top.n_bus
    c = top.cidx
    m = len(c)
    f, t = top.fidx[c], top.tidx[c]
    r, x = top.r[c], top.x[c]
    z2 = r * r + x * x
    root = top.root
    nonroot = np.array([b for b in range(n_bus) if b != root], dtype=int)
    nv = len(nonroot)
    C = top.loop_rows
    n_loop = C.shape[0]
    Af = np.zeros((n_bus, m))
    At = np.zeros((n_bus, m))
    Af[f, np.arange(m)] = 1.0
    At[t, np.arange(m)] = 1.0
    inc = At - Af
    vsel = np.zeros((n_bus, nv))
    vsel[nonroot, np.arange(nv)] = 1.0
    dvf = Af.T @ vsel  # d v[f] / d v_nonroot
    dvt = At.T @ vsel
    n_var = 3 * m + nv + 2
    ip, iq, il, iv, ips, iqs = 0, m, 2 * m, 3 * m, 3 * m + nv, 3 * m + nv + 1

    def unpack(z):
        v = np.empty(n_bus)
        v[root] = v0
        v[nonroot] = z[iv:iv + nv]
        return z[ip:ip + m], z[iq:iq + m], z[il:il + m], v, z[ips], z[iqs]

    pin0 = pinj.copy()
    qin0 = qinj.copy()

    def resid(z):
        p, q, l, v, ps, qs = unpack(z)
        pin = pin0.copy()
        qin = qin0.copy()
        pin[root] = ps
        qin[root] = qs
        bal_p = pin + At @ (p - r * l) - Af @ p
        bal_q = qin + At @ (q - x * l) - Af @ q
        vd = v[f] - v[t] - 2 * (r * p + x * q) + z2 * l
        quad = l * v[f] - p ** 2 - q ** 2
        ang = C @ np.arctan2(x * p - r * q, v[f] - r * p - x * q)
        return np.concatenate([bal_p, bal_q, vd, quad, ang])

    def jac(z):
        p, q, l, v, _, _ = unpack(z)
        J = np.zeros((2 * n_bus + 2 * m + n_loop, n_var))
        row = 0
        J[row:row + n_bus, ip:ip + m] = inc
        J[row:row + n_bus, il:il + m] = -At * r
        J[row + root, ips] = 1.0
        row += n_bus
        J[row:row + n_bus, iq:iq + m] = inc
        J[row:row + n_bus, il:il + m] = -At * x
        J[row + root, iqs] = 1.0
        row += n_bus
        ar = np.arange(m)
        J[row + ar, ip + ar] = -2 * r
        J[row + ar, iq + ar] = -2 * x
        J[row + ar, il + ar] = z2
        J[row:row + m, iv:iv + nv] = dvf - dvt
        row += m
        J[row + ar, ip + ar] = -2 * p
        J[row + ar, iq + ar] = -2 * q
        J[row + ar, il + ar] = v[f]
        J[row:row + m, iv:iv + nv] = dvf * l[:, None]
        row += m
        if n_loop:
            y = x * p - r * q
            u = v[f] - r * p - x * q
            den = u * u + y * y
            J[row:, ip:ip + m] = C * ((u * x + y * r) / den)
            J[row:, iq:iq + m] = C * ((y * x - u * r) / den)
            J[row:, iv:iv + nv] = (C * (-y / den)) @ dvf
        return J

    z = np.zeros(n_var)
    z[iv:iv + nv] = 1.0  # flat start
    F = resid(z)
    norm = float(np.linalg.norm(F))
    for it in range(1, conf.max_iter + 1):
        try:
            step = np.linalg.solve(jac(z), -F)
        except np.linalg.LinAlgError as exc:
            raise DivergenceError(f"singular Jacobian at iteration {it}") from exc
        alpha = 1.0
        while True:
            z_new = z + alpha * step
            F_new = resid(z_new)
            n_new = float(np.linalg.norm(F_new))
            if n_new <= norm or alpha < 1e-3:
                break
            alpha *= 0.5
        z, F, norm = z_new, F_new, n_new
        if not np.all(np.isfinite(F)):
            raise DivergenceError(f"non-finite residual at iteration {it}")
        if np.max(np.abs(F)) <= conf.tolerance:
            break
    else:
        raise DivergenceError(f"Newton did not converge in {conf.max_iter} iterations")
    p, q, l, v, ps, qs = unpack(z)
    if np.any(v <= 0):
        raise DivergenceError("Newton converged to non-positive squared voltage")
    pf = np.zeros(top.n_br)
    qf = np.zeros(top.n_br)
    lf = np.zeros(top.n_br)
    pf[c], qf[c], lf[c] = p, q, l
    return v, pf, qf, lf, float(ps), float(qs), it


def _check_limits(net: Network, top: _Topology, v, p, q, l, ps, qs) -> dict:
    c = top.cidx
    vmin = np.array([b.v_min for b in net.buses]) ** 2
    vmax = np.array([b.v_max for b in net.buses]) ** 2
    sub = net.bus(net.substation)
    br = [net.branches[k] for k in c]
    s_max = np.array([b.s_max for b in br])
    p_max = np.array([b.p_max for b in br])
    q_max = np.array([b.q_max for b in br])
    i_max = np.array([b.i_max for b in br])
    pc, qc, lc = p[c], q[c], l[c]
    with np.errstate(invalid="ignore"):
        out = {
            "voltage": max(float(np.max(vmin - v)), float(np.max(v - vmax))),
            "substation_p": max(sub.p_min - ps, ps - sub.p_max),
            "substation_q": max(sub.q_min - qs, qs - sub.q_max),
            "apparent_flow": float(np.max(np.hypot(pc, qc) - s_max, initial=-np.inf)),
            "active_flow": float(np.max(np.abs(pc) - p_max, initial=-np.inf)),
            "reactive_flow": float(np.max(np.abs(qc) - q_max, initial=-np.inf)),
            "current": float(np.max(lc - i_max ** 2, initial=-np.inf)),
        }
    return {k: max(0.0, val) for k, val in out.items()}


def _injections(net: Network, scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    if scenario.bus_ids and tuple(scenario.bus_ids) != net.bus_ids:
        raise ConfigurationMismatchError("scenario bus order differs from the network")
    p = np.array(scenario.p, dtype=float)
    q = np.array(scenario.q, dtype=float)
    if p.shape != (len(net.buses),):
        raise ConfigurationMismatchError("scenario has the wrong number of buses")
    return p, q


def solve_opf_r(net: Network, cfg: SwitchConfiguration, scenario: Scenario,
                conf: SolverConfig | None = None) -> PowerFlowSolution:
    """Solve one scenario on one configuration; objective is substation supply."""
    conf = conf or SolverConfig()
    top = _topology(net, cfg)
    pinj, qinj = _injections(net, scenario)
    v0 = net.bus(net.substation).voltage_setpoint ** 2
    if top.radial:
        v, p, q, l, ps, qs, it = _sweep(top, v0, pinj, qinj, conf)
        method = "sweep"
    else:
        v, p, q, l, ps, qs, it = _newton(top, v0, pinj, qinj, conf)
        method = "newton"
    pinj = pinj.copy()
    qinj = qinj.copy()
    pinj[top.root] = ps
    qinj[top.root] = qs
    bal_p, bal_q, vd, quad = _residuals(top, v, p, q, l, pinj, qinj)
    parts = [np.abs(bal_p), np.abs(bal_q), np.abs(vd), np.abs(quad)]
    if not top.radial:
        parts.append(np.abs(top.loop_rows @ _angles(top, v, p, q)))
    residual = float(max(np.max(a, initial=0.0) for a in parts))
    violations = _check_limits(net, top, v, p, q, l, ps, qs)
    if conf.limit_mode == REJECT:
        name, worst = max(violations.items(), key=lambda kv: kv[1])
        if worst > conf.tolerance:
            raise InfeasibleError(f"{name} limit violated by {worst:.3g}", name, worst)
    for arr in (v, l, p, q, pinj, qinj):
        arr.setflags(write=False)
    return PowerFlowSolution(
        v=v, l=l, p=p, q=q, p_inj=pinj, q_inj=qinj, p_s=ps, q_s=qs,
        closed=top.closed, from_idx=top.fidx, residual=residual, iterations=it,
        method=method, violations=violations,
    )


def solve_sopf_r(net: Network, cfg: SwitchConfiguration, scenarios: ScenarioSet,
                 conf: SolverConfig | None = None,
                 executor: Executor | None = None) -> StochasticSolution:
    """Solve every scenario independently and aggregate by probability.

    With an ``executor`` the scenario solves run concurrently; aggregation is
    always in scenario order, so the result does not depend on scheduling.
    """
    conf = conf or SolverConfig()
    if tuple(scenarios.bus_ids) != net.bus_ids:
        raise ConfigurationMismatchError("scenario bus order differs from the network")
    _topology(net, cfg)  # raise topology problems once, not per scenario
    items = list(scenarios)
    if executor is None:
        outcomes = []
        for sc in items:
            try:
                outcomes.append(solve_opf_r(net, cfg, sc, conf))
            except (DivergenceError, InfeasibleError) as exc:
                outcomes.append(exc)
    else:
        futures = [executor.submit(solve_opf_r, net, cfg, sc, conf) for sc in items]
        outcomes = []
        for fut in futures:
            try:
                outcomes.append(fut.result())
            except (DivergenceError, InfeasibleError) as exc:
                outcomes.append(exc)
    failures = {w: o for w, o in enumerate(outcomes) if isinstance(o, Exception)}
    if failures:
        raise ScenarioSolveError(failures)
    probs = scenarios.probabilities
    obj = 0.0
    loss = 0.0
    flows = np.zeros(len(net.branches))
    absf = np.zeros(len(net.branches))
    for pi, sol in zip(probs, outcomes):
        obj += pi * sol.objective
        loss += pi * sol.loss
        flows += pi * sol.p
        absf += pi * np.abs(sol.p)
    flows.setflags(write=False)
    absf.setflags(write=False)
    return StochasticSolution(tuple(outcomes), probs, float(obj), flows, absf, float(loss))


def loop_injections(net: Network, sol: StochasticSolution, loop: Loop) -> dict[int, float]:
    """Expected active power each loop bus pushes into the loop.

    Off-loop branches entering the bus contribute their receiving-end flow
    (sending flow minus r*l), off-loop branches leaving it count negatively,
    and the bus's own injection is added. The values sum to the expected
    active loss on the loop's branches.
    """
    try:
        loop_idx = [net.branch_index[b] for b in loop.branches]
    except KeyError:
        raise ValueError(f"loop {loop.branches} is not part of network {net.name!r}") from None
    first = sol.solutions[0]
    if not all(first.closed[k] for k in loop_idx):
        raise ValueError("loop contains a branch that is open in this solution")
    on_loop = loop.bus_set
    lbr = loop.branch_set
    bidx = net.bus_index
    out = {}
    for bus in loop.buses[:-1]:
        contrib = []
        for bid in net.incident[bus]:
            if bid in lbr:
                continue
            br = net.branch(bid)
            if br.other(bus) in on_loop:
                continue
            k = net.branch_index[bid]
            if br.to_bus == bus:
                contrib.append((k, 1))
            else:
                contrib.append((k, -1))
        total = 0.0
        for pi, s in zip(sol.probabilities, sol.solutions):
            val = s.p_inj[bidx[bus]]
            for k, sign in contrib:
                if not s.closed[k]:
                    continue
                if sign > 0:
                    val += s.p[k] - net.branches[k].r * s.l[k]
                else:
                    val -= s.p[k]
            total += pi * val
        out[bus] = float(total)
    return out


def soc_exactness_residual(sol: PowerFlowSolution) -> float:
    """max over closed branches of |l*v_from - p^2 - q^2| (per-unit squared)."""
    return float(np.max(sol.soc_residuals(), initial=0.0))


def power_balance_residual(sol: PowerFlowSolution, net: Network) -> float:
    """Network-wide check: supply + generation - demand - losses."""
    r = np.array([b.r for b in net.branches])
    losses = float(np.sum(r * sol.l))
    return abs(float(np.sum(sol.p_inj)) - losses)
