"""Uncertainty models, Monte Carlo scenario generation and backward reduction.

Scenarios are stored column-wise: one ``(n, steps)`` array per uncertain
quantity plus a probability vector. Every scenario draws from its own child
of ``SeedSequence(seed)``, so a scenario's content depends only on
``(seed, index)`` and not on how many scenarios are drawn or in which order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import ndtr

from .errors import (
    BadLevelCount,
    BadTarget,
    HorizonMismatch,
    InfeasibleMoments,
    MissingProfile,
    OutOfSupport,
    ParseError,
)
from .grid import NetworkCase, UncertaintyConfig

QUANTITIES = ("load_mult", "wind_ms", "irradiance_wm2", "price_mult")
CSV_HEADER = ("scenario_id", "probability", "hour") + QUANTITIES


@dataclass(frozen=True)
class Pdf:
    """A univariate density.

    kinds and parameters:
      ``normal``   (mu, sigma)
      ``beta``     (alpha, beta)  on [0, 1]
      ``rayleigh`` (c,)           f(v) = 2v/c^2 exp(-(v/c)^2)
      ``weibull``  (shape, scale)
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        p = self.params
        ok = {
            "normal": lambda: len(p) == 2 and p[1] > 0,
            "beta": lambda: len(p) == 2 and p[0] > 0 and p[1] > 0,
            "rayleigh": lambda: len(p) == 1 and p[0] > 0,
            "weibull": lambda: len(p) == 2 and p[0] > 0 and p[1] > 0,
        }.get(self.kind)
        if ok is None:
            raise ValueError(f"unknown pdf kind {self.kind!r}")
        if not ok():
            raise ValueError(f"invalid parameters {p} for {self.kind}")

    @classmethod
    def normal(cls, mu: float, sigma: float) -> "Pdf":
        return cls("normal", (mu, sigma))

    @classmethod
    def beta(cls, alpha: float, beta: float) -> "Pdf":
        return cls("beta", (alpha, beta))

    @classmethod
    def rayleigh(cls, c: float) -> "Pdf":
        return cls("rayleigh", (c,))

    @classmethod
    def weibull(cls, shape: float, scale: float) -> "Pdf":
        return cls("weibull", (shape, scale))

    def cdf(self, x: float) -> float:
        if self.kind == "normal":
            mu, sigma = self.params
            return float(ndtr((x - mu) / sigma))
        if x <= 0:
            return 0.0
        if self.kind == "rayleigh":
            (c,) = self.params
            return 1.0 - math.exp(-((x / c) ** 2))
        if self.kind == "weibull":
            k, lam = self.params
            return 1.0 - math.exp(-((x / lam) ** k))
        from scipy.special import betainc

        return float(betainc(*self.params, min(x, 1.0)))


def pdf_eval(pdf: Pdf, x: float) -> float:
    """Density of ``pdf`` at ``x``."""
    if pdf.kind == "normal":
        mu, sigma = pdf.params
        return math.exp(-((x - mu) ** 2) / (2 * sigma**2)) / (math.sqrt(2 * math.pi) * sigma)
    if pdf.kind == "beta":
        a, b = pdf.params
        if not 0.0 <= x <= 1.0:
            raise OutOfSupport(f"Beta density is defined on [0, 1], got {x}")
        if (x == 0.0 and a < 1) or (x == 1.0 and b < 1):
            return math.inf
        log_norm = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        # 0**0 == 1 covers the a == 1 / b == 1 edges
        return math.exp(log_norm) * x ** (a - 1) * (1 - x) ** (b - 1)
    if x < 0:
        return 0.0
    if pdf.kind == "rayleigh":
        (c,) = pdf.params
        return 2 * x / c**2 * math.exp(-((x / c) ** 2))
    k, lam = pdf.params
    return k / lam * (x / lam) ** (k - 1) * math.exp(-((x / lam) ** k))


def beta_params_from_moments(mu: float, sigma: float) -> tuple[float, float]:
    """Method-of-moments (alpha, beta) for a Beta with mean mu and std sigma."""
    if not 0.0 < mu < 1.0:
        raise InfeasibleMoments(f"mean must lie in (0, 1), got {mu}")
    var = sigma * sigma
    if not 0.0 < var < mu * (1.0 - mu):
        raise InfeasibleMoments(f"need 0 < sigma^2 < mu(1-mu) = {mu * (1 - mu)}, got {var}")
    beta = (1.0 - mu) * (mu * (1.0 - mu) / var - 1.0)
    alpha = mu * beta / (1.0 - mu)
    return alpha, beta


def discretize_normal(mu: float, sigma: float, n_levels: int) -> list[tuple[float, float]]:
    """Split N(mu, sigma) into ``n_levels`` bands one sigma wide.

    Level j sits at mu + j*sigma; its probability is the normal mass of
    [level - sigma/2, level + sigma/2], with the outermost bands extended
    to +/- infinity.
    """
    if not isinstance(n_levels, (int, np.integer)) or n_levels < 3 or n_levels % 2 == 0:
        raise BadLevelCount(f"n_levels must be an odd integer >= 3, got {n_levels}")
    half = n_levels // 2
    js = np.arange(-half, half + 1)
    edges = np.concatenate(([-np.inf], js[:-1] + 0.5, [np.inf]))
    mass = np.diff(ndtr(edges))
    return [(mu + j * sigma, float(m)) for j, m in zip(js.tolist(), mass)]


@dataclass(frozen=True)
class Scenario:
    id: int
    probability: float
    load_mult: np.ndarray
    wind_ms: np.ndarray
    irradiance_wm2: np.ndarray
    price_mult: np.ndarray


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    ids: np.ndarray  # (n,) int
    probability: np.ndarray  # (n,)
    load_mult: np.ndarray  # (n, steps)
    wind_ms: np.ndarray
    irradiance_wm2: np.ndarray
    price_mult: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        n = self.ids.shape[0]
        for q in QUANTITIES:
            arr = getattr(self, q)
            if arr.ndim != 2 or arr.shape[0] != n:
                raise ValueError(f"{q} must have shape (n, steps)")
        if self.probability.shape != (n,):
            raise ValueError("probability must have shape (n,)")
        if np.any(self.probability <= 0):
            raise ValueError("scenario probabilities must be > 0")

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    @property
    def steps(self) -> int:
        return int(self.load_mult.shape[1])

    @property
    def scenarios(self) -> list[Scenario]:
        return [
            Scenario(int(self.ids[i]), float(self.probability[i]),
                     *(getattr(self, q)[i] for q in QUANTITIES))
            for i in range(len(self))
        ]

    def subset(self, idx, probability=None) -> "ScenarioSet":
        idx = np.asarray(idx, dtype=int)
        return ScenarioSet(
            ids=self.ids[idx],
            probability=self.probability[idx] if probability is None else np.asarray(probability),
            seed=self.seed,
            **{q: getattr(self, q)[idx] for q in QUANTITIES},
        )

    def expected(self, quantity: str) -> np.ndarray:
        return self.probability @ getattr(self, quantity)


def _truncated_normal(rng: np.random.Generator, mu: float, sigma: float, size: int) -> np.ndarray:
    out = rng.normal(mu, sigma, size)
    bad = out < 0
    while bad.any():
        out[bad] = rng.normal(mu, sigma, int(bad.sum()))
        bad = out < 0
    return out


def _per_hour(value, steps: int) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (steps,))
    return arr.copy()


def wind_pdf(forecast_ms: float, cfg: UncertaintyConfig) -> Pdf | None:
    """Wind-speed density whose mean equals the hourly forecast."""
    if cfg.wind_model == "fixed" or forecast_ms <= 0:
        return None
    if cfg.wind_model == "rayleigh":
        return Pdf.rayleigh(2.0 * forecast_ms / math.sqrt(math.pi))
    k = cfg.weibull_shape
    return Pdf.weibull(k, forecast_ms / math.gamma(1.0 + 1.0 / k))


def forecast_scenario(case: NetworkCase) -> ScenarioSet:
    """The single expected-value scenario used by the deterministic mode."""
    steps = case.horizon.steps
    cfg = case.uncertainty
    wind = case.profile("wind_speed") if "wind_speed" in case.profiles else np.zeros(steps)
    clear = case.profile("irradiance") if "irradiance" in case.profiles else np.zeros(steps)
    irr = _per_hour(cfg.clearness_mean, steps) * clear
    return ScenarioSet(
        ids=np.array([0]),
        probability=np.array([1.0]),
        load_mult=np.ones((1, steps)),
        wind_ms=wind[None, :].copy(),
        irradiance_wm2=irr[None, :],
        price_mult=np.ones((1, steps)),
        seed=None,
    )


def generate_scenarios(
    case: NetworkCase,
    n: int,
    seed: int,
    config: UncertaintyConfig | None = None,
) -> ScenarioSet:
    """Draw ``n`` equiprobable 24-h scenarios around the case forecasts.

    Load: one multiplicative Normal(1, sigma) factor per hour shared by all
    buses, truncated at zero (or sampled from the discretised normal when
    ``load_levels`` is set). Wind: Rayleigh or Weibull with mean equal to the
    hourly forecast. Irradiance: Beta clearness fraction times the clear-sky
    profile; hours with zero clear-sky irradiance stay at zero. Price: Normal
    multiplier when ``price_sigma > 0``, otherwise 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cfg = config or case.uncertainty
    steps = case.horizon.steps
    needs_wind = any(d.kind == "WT" for d in case.ders)
    needs_sun = any(d.kind == "PV" for d in case.ders)
    for name, needed in (("wind_speed", needs_wind), ("irradiance", needs_sun)):
        if needed and name not in case.profiles:
            raise MissingProfile(f"profile {name!r} is required")
    wind_fc = case.profile("wind_speed") if "wind_speed" in case.profiles else np.zeros(steps)
    clear = case.profile("irradiance") if "irradiance" in case.profiles else np.zeros(steps)
    s_mu = _per_hour(cfg.clearness_mean, steps)
    s_sigma = _per_hour(cfg.clearness_sigma, steps)

    wind_pdfs = [wind_pdf(v, cfg) for v in wind_fc]
    beta_ab = [
        beta_params_from_moments(m, s) if c > 0 and s > 0 else None
        for m, s, c in zip(s_mu, s_sigma, clear)
    ]
    levels = None
    if cfg.load_levels is not None and cfg.load_sigma > 0:
        levels = discretize_normal(1.0, cfg.load_sigma, cfg.load_levels)
        level_vals = np.maximum([v for v, _ in levels], 0.0)
        level_probs = np.array([p for _, p in levels])

    load = np.empty((n, steps))
    wind = np.empty((n, steps))
    irr = np.empty((n, steps))
    price = np.ones((n, steps))
    children = np.random.SeedSequence(seed).spawn(n)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        if cfg.load_sigma == 0:
            load[i] = 1.0
        elif levels is not None:
            load[i] = level_vals[rng.choice(len(level_vals), size=steps, p=level_probs)]
        else:
            load[i] = _truncated_normal(rng, 1.0, cfg.load_sigma, steps)
        u = rng.random(steps)
        for t, pdf in enumerate(wind_pdfs):
            if pdf is None:
                wind[i, t] = wind_fc[t]
            else:
                k, scale = (2.0, pdf.params[0]) if pdf.kind == "rayleigh" else pdf.params
                # inverse-CDF draw keeps one uniform per hour regardless of the model
                wind[i, t] = scale * (-math.log1p(-u[t])) ** (1.0 / k)
        for t in range(steps):
            if clear[t] <= 0:
                irr[i, t] = 0.0
            elif beta_ab[t] is None:
                irr[i, t] = s_mu[t] * clear[t]
            else:
                irr[i, t] = rng.beta(*beta_ab[t]) * clear[t]
        if cfg.price_sigma > 0:
            price[i] = _truncated_normal(rng, 1.0, cfg.price_sigma, steps)
    return ScenarioSet(
        ids=np.arange(n),
        probability=np.full(n, 1.0 / n),
        load_mult=load,
        wind_ms=wind,
        irradiance_wm2=irr,
        price_mult=price,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# backward reduction


def _features(s: ScenarioSet) -> np.ndarray:
    cols = []
    for q in QUANTITIES:
        arr = getattr(s, q)
        sd = float(np.std(arr))
        if sd > 0:
            cols.append(arr / sd)
    if not cols:
        return np.zeros((len(s), 1))
    return np.concatenate(cols, axis=1)


def scenario_distances(s: ScenarioSet) -> np.ndarray:
    """Euclidean distances between scenarios after z-scoring each quantity."""
    return cdist(_features(s), _features(s))


def _lowest_id(mask: np.ndarray, ids: np.ndarray) -> int:
    cand = np.flatnonzero(mask)
    return int(cand[np.argmin(ids[cand])])


def _near(values: np.ndarray, best: float) -> np.ndarray:
    # values equal to the minimum up to rounding count as ties
    return values <= best + 1e-12 * abs(best)


def _nearest(row: np.ndarray, ids: np.ndarray) -> tuple[int, float]:
    best = float(row.min())
    return _lowest_id(_near(row, best), ids), best


def reduce_scenarios(s: ScenarioSet, target: int, trace: list | None = None) -> ScenarioSet:
    """Greedy backward reduction down to ``target`` scenarios.

    Each step deletes the survivor with the smallest probability times
    distance to its nearest other survivor and hands its probability to that
    neighbour. Ties go to the lowest scenario id. When ``trace`` is a list,
    each deletion is appended as ``(deleted_index, receiver_index, cost)``.
    """
    n = len(s)
    if not isinstance(target, (int, np.integer)) or not 1 <= target <= n:
        raise BadTarget(f"target must lie in [1, {n}], got {target}")
    if target == n:
        return s
    ids = s.ids
    prob = s.probability.astype(float).copy()
    dist = scenario_distances(s)
    np.fill_diagonal(dist, np.inf)
    alive = np.ones(n, dtype=bool)
    nn_idx = np.empty(n, dtype=int)
    nn_dist = np.empty(n)
    for i in range(n):
        nn_idx[i], nn_dist[i] = _nearest(dist[i], ids)
    for _ in range(n - target):
        cost = np.where(alive, prob * nn_dist, np.inf)
        best = float(cost.min())
        k = _lowest_id(alive & _near(cost, best), ids)
        j = int(nn_idx[k])
        prob[j] += prob[k]
        alive[k] = False
        dist[:, k] = np.inf
        if trace is not None:
            trace.append((k, j, best))
        for i in np.flatnonzero(alive & (nn_idx == k)):
            nn_idx[i], nn_dist[i] = _nearest(dist[i], ids)
    keep = np.flatnonzero(alive)
    p = prob[keep]
    return s.subset(keep, probability=p / p.sum())


@dataclass(frozen=True)
class FidelityReport:
    """How well a reduced set reproduces the hourly expected values.

    All dicts are keyed by quantity name. ``cv`` is the largest hourly
    coefficient of variation of the Monte Carlo mean estimator of the
    original set, sigma / (|mean| sqrt(N)).
    """

    max_abs_error: dict[str, float] = field(default_factory=dict)
    mean_abs_error: dict[str, float] = field(default_factory=dict)
    max_rel_error: dict[str, float] = field(default_factory=dict)
    cv: dict[str, float] = field(default_factory=dict)


def reduction_fidelity(original: ScenarioSet, reduced: ScenarioSet) -> FidelityReport:
    if original.steps != reduced.steps:
        raise HorizonMismatch(f"{original.steps} vs {reduced.steps} steps")
    rep = FidelityReport()
    n = len(original)
    for q in QUANTITIES:
        mu = original.expected(q)
        err = np.abs(reduced.expected(q) - mu)
        rep.max_abs_error[q] = float(err.max())
        rep.mean_abs_error[q] = float(err.mean())
        nz = np.abs(mu) > 1e-12
        rep.max_rel_error[q] = float((err[nz] / np.abs(mu[nz])).max()) if nz.any() else 0.0
        var = original.probability @ (getattr(original, q) - mu) ** 2
        cv = np.sqrt(var[nz]) / (np.abs(mu[nz]) * math.sqrt(n))
        rep.cv[q] = float(cv.max()) if nz.any() else 0.0
    return rep


# ---------------------------------------------------------------------------
# CSV exchange


def scenarios_to_csv(s: ScenarioSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for i in range(len(s)):
        sid, p = int(s.ids[i]), repr(float(s.probability[i]))
        for t in range(s.steps):
            w.writerow([sid, p, t] + [repr(float(getattr(s, q)[i, t])) for q in QUANTITIES])
    return buf.getvalue()


def write_scenarios_csv(s: ScenarioSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(scenarios_to_csv(s))


def read_scenarios_csv(path: str | Path) -> ScenarioSet:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ParseError(f"{path}: header must be {','.join(CSV_HEADER)}")
    order: list[int] = []
    data: dict[int, dict] = {}
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            sid, p, hour = int(row[0]), float(row[1]), int(row[2])
            vals = [float(v) for v in row[3:3 + len(QUANTITIES)]]
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{path}:{line}: {exc}") from exc
        if len(vals) != len(QUANTITIES):
            raise ParseError(f"{path}:{line}: expected {len(CSV_HEADER)} columns")
        if sid not in data:
            order.append(sid)
            data[sid] = {"p": p, "hours": {}}
        data[sid]["hours"][hour] = vals
    if not order:
        raise ParseError(f"{path}: no scenarios")
    steps = len(data[order[0]]["hours"])
    arrays = {q: np.empty((len(order), steps)) for q in QUANTITIES}
    for i, sid in enumerate(order):
        hours = data[sid]["hours"]
        if sorted(hours) != list(range(steps)):
            raise ParseError(f"{path}: scenario {sid} does not cover hours 0..{steps - 1}")
        for t in range(steps):
            for q, v in zip(QUANTITIES, hours[t]):
                arrays[q][i, t] = v
    return ScenarioSet(
        ids=np.array(order),
        probability=np.array([data[sid]["p"] for sid in order]),
        seed=None,
        **arrays,
    )
