"""Device models: wind turbine, PV array, CHP fuel use and storage state of charge.

Every function here is pure. Parameter blocks are frozen dataclasses that
check their own invariants on construction and raise ``ValueError``; the case
loader rewraps those as :class:`~microdispatch.errors.ValidationError` with a
field path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfRange, RateLimit, SimultaneousChargeDischarge

# Absolute slack used for limit checks on floating-point setpoints.
_EPS = 1e-9


@dataclass(frozen=True)
class WtParams:
    p_rate: float
    v_ci: float
    v_r: float
    v_co: float

    def __post_init__(self):
        if not self.p_rate > 0:
            raise ValueError("p_rate must be > 0")
        if not 0 < self.v_ci < self.v_r < self.v_co:
            raise ValueError("need 0 < v_ci < v_r < v_co")

    @property
    def quadratic(self) -> tuple[float, float, float]:
        """(A, B, C) with P(v) = (A v^2 + B v + C) * p_rate on [v_ci, v_r].

        Fixed by P(v_ci) = 0, P(v_r) = p_rate and dP/dv(v_r) = 0, i.e.
        P = p_rate * (1 - ((v_r - v) / (v_r - v_ci))**2).
        """
        d2 = (self.v_r - self.v_ci) ** 2
        a = -1.0 / d2
        b = 2.0 * self.v_r / d2
        c = 1.0 - self.v_r**2 / d2
        return a, b, c


@dataclass(frozen=True)
class PvParams:
    p_stc: float
    g_stc: float = 1000.0
    k: float = 0.001
    t_ref: float = 25.0

    def __post_init__(self):
        if not self.p_stc > 0:
            raise ValueError("p_stc must be > 0")
        if not self.g_stc > 0:
            raise ValueError("g_stc must be > 0")


@dataclass(frozen=True)
class ChpParams:
    theta: float
    rho: float
    gamma: float
    efficiency: float
    heat_to_electric: float = 0.0
    p_min: float = 0.0
    p_max: float = math.inf
    ramp_limit: float | None = None

    def __post_init__(self):
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")
        if self.p_min > self.p_max:
            raise ValueError("p_min > p_max")
        if math.isfinite(self.p_max):
            # a quadratic attains its minimum over an interval at an endpoint or the vertex
            pts = [self.p_min, self.p_max]
            if self.theta > 0:
                vertex = -self.rho / (2 * self.theta)
                if self.p_min < vertex < self.p_max:
                    pts.append(vertex)
            if min(self.theta * p * p + self.rho * p + self.gamma for p in pts) < -_EPS:
                raise ValueError("fuel rate negative inside [p_min, p_max]")


@dataclass(frozen=True)
class EssParams:
    capacity: float
    soc_min: float
    soc_max: float
    soc_init: float
    p_ch_max: float
    p_dis_max: float
    eta_ch: float = 0.95
    eta_dis: float = 0.95

    def __post_init__(self):
        if not 0 <= self.soc_min <= self.soc_init <= self.soc_max <= self.capacity:
            raise ValueError("need 0 <= soc_min <= soc_init <= soc_max <= capacity")
        if self.p_ch_max < 0 or self.p_dis_max < 0:
            raise ValueError("charge/discharge limits must be >= 0")
        if not (0 < self.eta_ch <= 1 and 0 < self.eta_dis <= 1):
            raise ValueError("efficiencies must lie in (0, 1]")


def wt_power(v, p: WtParams):
    """Wind turbine output in kW for wind speed ``v`` (scalar or array)."""
    v = np.asarray(v, dtype=float)
    frac = (p.v_r - v) / (p.v_r - p.v_ci)
    rising = p.p_rate * (1.0 - frac * frac)
    out = np.where(
        (v < p.v_ci) | (v > p.v_co),
        0.0,
        np.where(v >= p.v_r, p.p_rate, rising),
    )
    return out if out.ndim else float(out)


def pv_power(g, t_cell, p: PvParams):
    """PV output in kW from irradiance (W/m^2) and cell temperature (deg C)."""
    g = np.asarray(g, dtype=float)
    t_cell = np.asarray(t_cell, dtype=float)
    out = p.p_stc * (g / p.g_stc) * (1.0 + p.k * (t_cell - p.t_ref))
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


def chp_fuel_rate(p_chp: float, c: ChpParams) -> float:
    if not c.p_min - _EPS <= p_chp <= c.p_max + _EPS:
        raise OutOfRange(f"CHP setpoint {p_chp} outside [{c.p_min}, {c.p_max}]")
    return c.theta * p_chp**2 + c.rho * p_chp + c.gamma


def ess_step(soc_prev: float, p_ch: float, p_dis: float, dt: float, e: EssParams) -> float:
    """Advance storage energy by one interval.

    Bounds on the resulting SOC are not enforced here; the evaluator
    penalises them.
    """
    if p_ch < 0 or p_dis < 0:
        raise ValueError("p_ch and p_dis are magnitudes and must be >= 0")
    if p_ch > 0 and p_dis > 0:
        raise SimultaneousChargeDischarge("cannot charge and discharge in the same step")
    if p_ch > e.p_ch_max + _EPS or p_dis > e.p_dis_max + _EPS:
        raise RateLimit(f"charge {p_ch} / discharge {p_dis} exceeds unit rating")
    return soc_prev + e.eta_ch * p_ch * dt - p_dis * dt / e.eta_dis


def soc_trajectory(p_signed, dt: float, e: EssParams) -> np.ndarray:
    """SOC after each step for a signed power sequence (positive = discharge).

    Unlike :func:`ess_step` this does not check rate limits, so the
    optimizer can hand in any point of its box; the evaluator penalises
    violations instead. Accepts shape ``(..., steps)``.
    """
    p = np.asarray(p_signed, dtype=float)
    ch = np.maximum(-p, 0.0)
    dis = np.maximum(p, 0.0)
    delta = e.eta_ch * ch * dt - dis * dt / e.eta_dis
    return e.soc_init + np.cumsum(delta, axis=-1)
