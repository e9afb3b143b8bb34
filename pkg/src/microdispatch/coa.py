"""Cuckoo Optimization Algorithm over a bounded real box.

One generation:

1. every habitat draws an egg count in [min_eggs, max_eggs];
2. eggs are laid uniformly inside the egg laying radius (ELR) around their
   parent and clamped to the box;
3. the worst ``kill_fraction`` of the new eggs is discarded, the rest join
   the population, which is truncated to ``max_population`` by fitness;
4. habitats are grouped by k-means, the group with the best mean fitness
   defines a goal point and every habitat migrates towards it;
5. the best habitat seen so far replaces the worst one (elitism).

All randomness comes from generators keyed on (seed, generation, individual,
phase), so results do not depend on evaluation order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegeneratePopulation

BAD_FITNESS = 1e12

# phase tags for the RNG key
_INIT, _EGG_COUNT, _EGGS, _KMEANS, _MIGRATE = range(5)


@dataclass(frozen=True)
class CoaParams:
    """Optimizer settings.

    ``elr_scope`` picks the per-dimension range the egg laying radius is a
    fraction of: ``"box"`` uses the full bounds, ``"population"`` the current
    extent of the population. With ``random_flight`` each habitat covers a
    fraction ``lambda_mig * U(0, 1)`` of the way to the goal, otherwise exactly
    ``lambda_mig``. ``perturbation`` > 0 adds Cauchy noise of that scale
    (relative to the box width) to every migration step.
    """

    n_initial: int = 20
    min_eggs: int = 2
    max_eggs: int = 4
    max_population: int = 50
    alpha_elr: float = 1.0
    lambda_mig: float = 0.9
    phi: float = math.pi / 6
    n_clusters: int = 3
    max_iterations: int = 100
    convergence_window: int = 10
    tol: float = 1e-9
    seed: int = 0
    kill_fraction: float = 0.1
    max_evaluations: int | None = None
    perturbation: float = 0.0
    elr_scope: str = "box"
    random_flight: bool = True

    def __post_init__(self):
        for name in ("n_initial", "min_eggs", "max_eggs", "max_population", "n_clusters", "convergence_window"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.max_eggs < self.min_eggs:
            raise ValueError("max_eggs must be >= min_eggs")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if not 0 < self.lambda_mig <= 1:
            raise ValueError("lambda_mig must lie in (0, 1]")
        if not 0 <= self.phi < math.pi / 2:
            raise ValueError("phi must lie in [0, pi/2)")
        if not 0 <= self.kill_fraction < 1:
            raise ValueError("kill_fraction must lie in [0, 1)")
        if self.alpha_elr < 0 or self.perturbation < 0 or self.tol < 0:
            raise ValueError("alpha_elr, perturbation and tol must be >= 0")
        if self.max_evaluations is not None and self.max_evaluations < 1:
            raise ValueError("max_evaluations must be >= 1")
        if self.elr_scope not in ("population", "box"):
            raise ValueError("elr_scope must be 'population' or 'box'")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Habitat:
    position: np.ndarray
    fitness: float
    n_eggs: int = 0


@dataclass
class OptResult:
    best_position: np.ndarray
    best_fitness: float
    history: list[dict] = field(default_factory=list)
    evaluations: int = 0
    converged: bool = False
    iterations: int = 0

    @property
    def best_history(self) -> np.ndarray:
        return np.array([h["best_fitness"] for h in self.history])

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "best_fitness", "mean_fitness", "evaluations"])
            for h in self.history:
                w.writerow([h["iteration"], repr(h["best_fitness"]), repr(h["mean_fitness"]), h["evaluations"]])


def _rng(seed: int, gen: int, ind: int, phase: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), gen, ind, phase])


def _sanitize(f) -> np.ndarray:
    f = np.asarray(f, dtype=float).reshape(-1)
    return np.where(np.isfinite(f), f, BAD_FITNESS)


def elr(n_eggs: int, total_eggs: int, lo, hi, alpha_elr: float = 1.0) -> np.ndarray:
    """Per-dimension egg laying radius alpha * (n_eggs / total_eggs) * (hi - lo)."""
    if total_eggs <= 0:
        raise ValueError("total_eggs must be positive")
    span = np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float)
    r = alpha_elr * (n_eggs / total_eggs) * span
    return np.clip(r, 0.0, span)


def lay_eggs(habitat: Habitat, radius, lo, hi, rng: np.random.Generator) -> np.ndarray:
    """``habitat.n_eggs`` points uniform in [pos - radius, pos + radius], clamped."""
    pos = np.asarray(habitat.position, dtype=float)
    radius = np.broadcast_to(np.asarray(radius, dtype=float), pos.shape)
    u = rng.uniform(-1.0, 1.0, size=(habitat.n_eggs, pos.size))
    return np.clip(pos + u * radius, lo, hi)


def survival_selection(
    positions: np.ndarray,
    fitness: np.ndarray,
    n_parents: int,
    max_population: int,
    kill_fraction: float = 0.1,
) -> tuple[np.ndarray, np.ndarray]:
    """Cull the worst eggs, then keep the best ``max_population`` overall.

    Rows ``[:n_parents]`` are the current habitats, the rest are new eggs.
    Ties keep insertion order, so the best individual always survives.
    """
    fitness = np.asarray(fitness, dtype=float)
    n_eggs = len(fitness) - n_parents
    n_kill = int(math.floor(kill_fraction * n_eggs))
    keep = np.ones(len(fitness), dtype=bool)
    if n_kill:
        egg_order = np.argsort(fitness[n_parents:], kind="stable")
        keep[n_parents + egg_order[n_eggs - n_kill :]] = False
    idx = np.flatnonzero(keep)
    idx = idx[np.argsort(fitness[idx], kind="stable")][:max_population]
    return positions[idx], fitness[idx]


def kmeans(x: np.ndarray, k: int, rng: np.random.Generator, iterations: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Plain Lloyd iterations from k distinct random rows; returns (labels, centroids)."""
    n = len(x)
    k = min(k, n)
    centroids = x[rng.choice(n, size=k, replace=False)].copy()
    labels = np.zeros(n, dtype=int)
    for _ in range(iterations):
        d = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d, axis=1)
        for j in range(k):
            members = labels == j
            if members.any():
                centroids[j] = x[members].mean(axis=0)
    return labels, centroids


def goal_point(x: np.ndarray, fitness: np.ndarray, n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    labels, centroids = kmeans(x, n_clusters, rng)
    best, best_mean = 0, math.inf
    for j in range(len(centroids)):
        members = labels == j
        if members.any():
            m = float(fitness[members].mean())
            if m < best_mean:
                best, best_mean = j, m
    return centroids[best]


def cluster_and_migrate(
    positions: np.ndarray,
    fitness: np.ndarray,
    lo,
    hi,
    n_clusters: int,
    lambda_mig: float,
    phi: float,
    seed: int = 0,
    generation: int = 0,
    perturbation: float = 0.0,
    random_flight: bool = False,
) -> np.ndarray:
    """Move every habitat towards the centroid of the best-scoring cluster.

    The step is ``lambda_mig * (goal - x)`` stretched per dimension by
    ``1 + tan(u)`` with ``u ~ U(-phi, phi)``. With ``random_flight`` the
    step is further scaled by one U(0, 1) draw per habitat.
    """
    positions = np.asarray(positions, dtype=float)
    if len(positions) < n_clusters:
        raise ValueError("population smaller than n_clusters")
    if np.all(positions == positions[0]):
        raise DegeneratePopulation("all habitats identical")
    goal = goal_point(positions, np.asarray(fitness, dtype=float), n_clusters, _rng(seed, generation, 0, _KMEANS))
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    moved = np.empty_like(positions)
    for i, x in enumerate(positions):
        rng = _rng(seed, generation, i, _MIGRATE)
        frac = lambda_mig * rng.uniform() if random_flight else lambda_mig
        dev = np.tan(rng.uniform(-phi, phi, size=x.size)) if phi > 0 else 0.0
        step = frac * (goal - x) * (1.0 + dev)
        if perturbation > 0:
            step = step + perturbation * (hi - lo) * rng.standard_cauchy(size=x.size)
        moved[i] = x + step
    return np.clip(moved, lo, hi)


class _Budget:
    def __init__(self, objective, vectorized: bool, limit: int | None):
        self.objective = objective
        self.vectorized = vectorized
        self.limit = limit
        self.used = 0

    @property
    def left(self) -> float:
        return math.inf if self.limit is None else self.limit - self.used

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if len(x) == 0:
            return np.zeros(0)
        if self.vectorized:
            f = self.objective(x)
        else:
            f = [self.objective(row) for row in x]
        self.used += len(x)
        f = _sanitize(f)
        if f.size != len(x):
            raise ValueError("objective returned the wrong number of values")
        return f


def optimize(
    objective: Callable,
    bounds: tuple[Sequence[float], Sequence[float]],
    params: CoaParams | None = None,
    vectorized: bool = False,
    callback: Callable[[dict], None] | None = None,
) -> OptResult:
    """Minimize ``objective`` over the box ``bounds = (lo, hi)``.

    With ``vectorized=True`` the objective receives a (K, d) array and must
    return K values. Stops after ``max_iterations`` generations, when the
    evaluation budget runs out, or when the best fitness improved by less
    than ``tol`` (relative) over the last ``convergence_window`` generations.
    """
    p = params or CoaParams()
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    if lo.shape != hi.shape or lo.ndim != 1:
        raise ValueError("bounds must be two vectors of equal length")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo <= hi)):
        raise ValueError("bounds must be finite with lo <= hi")
    d = lo.size
    ev = _Budget(objective, vectorized, p.max_evaluations)

    n0 = int(min(p.n_initial, ev.left))
    x = np.vstack([_rng(p.seed, 0, i, _INIT).uniform(lo, hi) for i in range(n0)]).reshape(n0, d)
    f = ev(x)
    b = int(np.argmin(f))
    best_x, best_f = x[b].copy(), float(f[b])
    history: list[dict] = []

    def record(it):
        h = {"iteration": it, "best_fitness": best_f, "mean_fitness": float(np.mean(f)), "evaluations": ev.used}
        history.append(h)
        if callback is not None:
            callback(h)

    record(0)
    converged = False
    for it in range(1, p.max_iterations + 1):
        if ev.left <= 0:
            break
        # egg laying
        counts = np.array(
            [_rng(p.seed, it, i, _EGG_COUNT).integers(p.min_eggs, p.max_eggs + 1) for i in range(len(x))]
        )
        total = int(counts.sum())
        if p.elr_scope == "population":
            span_lo, span_hi = x.min(axis=0), x.max(axis=0)
        else:
            span_lo, span_hi = lo, hi
        eggs = [
            lay_eggs(Habitat(x[i], f[i], int(counts[i])), elr(counts[i], total, span_lo, span_hi, p.alpha_elr), lo, hi,
                     _rng(p.seed, it, i, _EGGS))
            for i in range(len(x))
        ]
        eggs = np.vstack(eggs)
        if ev.left < len(eggs):
            eggs = eggs[: int(ev.left)]
        fe = ev(eggs)
        x, f = survival_selection(np.vstack([x, eggs]), np.concatenate([f, fe]), len(x), p.max_population,
                                  p.kill_fraction)
        if f[0] < best_f:
            best_x, best_f = x[0].copy(), float(f[0])

        # migration
        if len(x) >= p.n_clusters and ev.left > 0:
            try:
                moved = cluster_and_migrate(x, f, lo, hi, p.n_clusters, p.lambda_mig, p.phi, p.seed, it,
                                            p.perturbation, p.random_flight)
            except DegeneratePopulation:
                moved = None
            if moved is not None:
                m = int(min(len(moved), ev.left))
                fm = ev(moved[:m])
                x = np.vstack([moved[:m], x[m:]])
                f = np.concatenate([fm, f[m:]])
                b = int(np.argmin(f))
                if f[b] < best_f:
                    best_x, best_f = x[b].copy(), float(f[b])

        # elitism: the best habitat seen so far always stays in the population
        if not np.any(f <= best_f):
            w = int(np.argmax(f))
            x[w], f[w] = best_x, best_f
        record(it)

        w = p.convergence_window
        if len(history) > w:
            old = history[-1 - w]["best_fitness"]
            if old - best_f <= p.tol * abs(old):
                converged = True
                break

    return OptResult(best_x, best_f, history, ev.used, converged, len(history) - 1)
