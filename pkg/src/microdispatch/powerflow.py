"""Backward/forward sweep load flow for radial feeders (branch-flow form).

Works on squared voltage magnitudes. Per branch b feeding bus j:

    backward:  P_b = sum of net loads below b + losses of branches below b
               loss_b = r_b * (P_b^2 + Q_b^2) / V_j^2        (receiving end)
    forward:   V_j^2 = V_i^2 - 2 (r P_s + x Q_s) + (r^2 + x^2)(P_s^2 + Q_s^2) / V_i^2

where P_s = P_b + loss_b is the sending-end flow. Both sweeps are written as
products with the branch/bus descendant matrix so that many independent
snapshots (scenarios x hours x candidate schedules) are solved in one go.
Losses use the previous iterate's voltages. The start is flat and the first
sweep is lossless.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NotConverged, VoltageCollapse
from .grid import NetworkCase, subtree_of

COLLAPSE_V2 = 0.25  # (0.5 pu)^2


@dataclass(frozen=True)
class InjectionVector:
    """Net injections (generation minus load) per bus for one snapshot."""

    p_kw: np.ndarray
    q_kvar: np.ndarray


@dataclass(frozen=True)
class FlowSolution:
    """Load-flow result. Arrays may carry leading batch dimensions.

    Branch flows are receiving-end values in pu; ``p_send`` adds the
    branch's own loss.
    """

    v: np.ndarray  # (..., n_bus) pu
    p_flow: np.ndarray  # (..., n_branch) pu
    q_flow: np.ndarray
    p_send: np.ndarray
    loss_kw: np.ndarray  # (..., n_branch)
    total_loss_kw: np.ndarray  # (...)
    slack_p_kw: np.ndarray  # (...) power drawn from the grid at the root
    slack_q_kvar: np.ndarray
    converged: np.ndarray  # (...) bool
    collapsed: np.ndarray  # (...) bool
    iterations: int


@dataclass(frozen=True)
class _Feeder:
    r: np.ndarray
    x: np.ndarray
    z2: np.ndarray
    from_idx: np.ndarray
    to_idx: np.ndarray
    root_idx: int
    root_branches: np.ndarray
    below_bus: np.ndarray  # (n_branch, n_bus): bus j lies under branch k
    below_branch: np.ndarray  # (n_branch, n_branch): branch m lies strictly under branch k
    s_base_kva: float
    v0: float


@lru_cache(maxsize=32)
def _feeder(case: NetworkCase) -> _Feeder:
    bidx = case.bus_index
    nb = len(case.buses)
    nl = len(case.branches)
    below = np.zeros((nl, nb))
    for k, br in enumerate(case.branches):
        for bus in subtree_of(case, br.id):
            below[k, bidx[bus]] = 1.0
    to_idx = np.array([bidx[br.to_bus] for br in case.branches], dtype=int)
    from_idx = np.array([bidx[br.from_bus] for br in case.branches], dtype=int)
    # branch m is strictly below k iff its receiving bus is below k and m != k
    below_branch = below[:, to_idx].copy()
    np.fill_diagonal(below_branch, 0.0)
    r = np.array([case.base.z_pu(br.r) for br in case.branches])
    x = np.array([case.base.z_pu(br.x) for br in case.branches])
    root = bidx[case.topology.root]
    return _Feeder(
        r=r,
        x=x,
        z2=r * r + x * x,
        from_idx=from_idx,
        to_idx=to_idx,
        root_idx=root,
        root_branches=np.flatnonzero(from_idx == root),
        below_bus=below,
        below_branch=below_branch,
        s_base_kva=case.base.s_base_kva,
        v0=case.base.slack_voltage_pu,
    )


def solve_batch(
    case: NetworkCase,
    p_inj_kw,
    q_inj_kvar,
    tol: float = 1e-8,
    max_iter: int = 50,
) -> FlowSolution:
    """Solve independent snapshots given as arrays of shape (..., n_bus).

    Non-convergence and collapse are reported per snapshot, never raised.
    """
    f = _feeder(case)
    p_inj = np.asarray(p_inj_kw, dtype=float)
    q_inj = np.asarray(q_inj_kvar, dtype=float)
    lead = p_inj.shape[:-1]
    nb = p_inj.shape[-1]
    if nb != len(case.buses) or q_inj.shape != p_inj.shape:
        raise ValueError("injection arrays must have shape (..., n_bus)")
    rows = int(np.prod(lead, dtype=int))
    # consumption positive, in pu; the slack bus absorbs whatever sits at the root
    pl = -p_inj.reshape(rows, nb) / f.s_base_kva
    ql = -q_inj.reshape(rows, nb) / f.s_base_kva
    pl[:, f.root_idx] = 0.0
    ql[:, f.root_idx] = 0.0

    v02 = f.v0 * f.v0
    down_p = pl @ f.below_bus.T
    down_q = ql @ f.below_bus.T
    nl = f.r.size
    v2 = np.full((rows, nb), v02)
    v = np.full((rows, nb), f.v0)
    loss_p = np.zeros((rows, nl))
    loss_q = np.zeros((rows, nl))
    collapsed = np.zeros(rows, dtype=bool)
    dv = np.full(rows, np.inf)
    it = 0
    with np.errstate(all="ignore"):
        for it in range(1, max_iter + 1):
            pr = down_p + loss_p @ f.below_branch.T
            qr = down_q + loss_q @ f.below_branch.T
            if it == 1:
                # lossless first sweep; starting from flat voltages with losses
                # can land heavily overloaded feeders on the non-physical root
                ps, qs = pr, qr
                drop = 2.0 * (f.r * ps + f.x * qs)
            else:
                s2 = (pr * pr + qr * qr) / v2[:, f.to_idx]
                loss_p = f.r * s2
                loss_q = f.x * s2
                ps = pr + loss_p
                qs = qr + loss_q
                drop = 2.0 * (f.r * ps + f.x * qs) - f.z2 * (ps * ps + qs * qs) / v2[:, f.from_idx]
            v2_new = v02 - drop @ f.below_bus
            collapsed |= ~(v2_new.min(axis=1) >= COLLAPSE_V2)
            if collapsed.any():
                v2_new[collapsed] = np.maximum(np.nan_to_num(v2_new[collapsed], nan=COLLAPSE_V2), COLLAPSE_V2)
            v_new = np.sqrt(v2_new)
            dv = np.max(np.abs(v_new - v), axis=1)
            v2, v = v2_new, v_new
            if np.all((dv < tol) | collapsed):
                break
        # refresh flows and losses against the final voltages
        for _ in range(2):
            pr = down_p + loss_p @ f.below_branch.T
            qr = down_q + loss_q @ f.below_branch.T
            s2 = (pr * pr + qr * qr) / v2[:, f.to_idx]
            loss_p = f.r * s2
            loss_q = f.x * s2
    ps = pr + loss_p
    qs = qr + loss_q
    converged = (dv < tol) & ~collapsed & np.isfinite(loss_p).all(axis=1)
    slack_p = ps[:, f.root_branches].sum(axis=1)
    slack_q = qs[:, f.root_branches].sum(axis=1)
    # net consumption sitting on the root bus is served straight from the grid
    slack_p = slack_p - p_inj.reshape(rows, nb)[:, f.root_idx] / f.s_base_kva
    slack_q = slack_q - q_inj.reshape(rows, nb)[:, f.root_idx] / f.s_base_kva
    loss_kw = loss_p * f.s_base_kva

    def shape(a, tail=()):
        return a.reshape(lead + tail)

    return FlowSolution(
        v=shape(v, (nb,)),
        p_flow=shape(pr, (nl,)),
        q_flow=shape(qr, (nl,)),
        p_send=shape(ps, (nl,)),
        loss_kw=shape(loss_kw, (nl,)),
        total_loss_kw=shape(loss_kw.sum(axis=1)),
        slack_p_kw=shape(slack_p * f.s_base_kva),
        slack_q_kvar=shape(slack_q * f.s_base_kva),
        converged=shape(converged),
        collapsed=shape(collapsed),
        iterations=it,
    )


def solve_radial(
    case: NetworkCase, inj: InjectionVector, tol: float = 1e-8, max_iter: int = 50
) -> FlowSolution:
    """Solve one snapshot.

    Raises VoltageCollapse if any voltage drops below 0.5 pu during the
    sweep. Plain non-convergence comes back with ``converged=False``.
    """
    sol = solve_batch(case, inj.p_kw, inj.q_kvar, tol=tol, max_iter=max_iter)
    if bool(sol.collapsed):
        raise VoltageCollapse("voltage fell below 0.5 pu during the sweep")
    return sol


def total_losses(sol: FlowSolution) -> float:
    """Network loss in kW (sum of r (P^2 + Q^2) / V^2 over branches)."""
    if not np.all(sol.converged):
        raise NotConverged("load flow did not converge")
    return float(np.sum(sol.loss_kw))
