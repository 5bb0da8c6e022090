"""One-dimensional hyper-parameter search over the temperature.

The Tree-structured Parzen Estimator splits the trial history at the gamma
quantile of the objective, fits a Parzen density ``l`` to the good trials and
``g`` to the rest, and proposes the candidate drawn from ``l`` with the
largest ``l(x) / g(x)``. Maximizing that ratio maximizes expected improvement,
which is proportional to ``1 / (gamma + (g/l) (1 - gamma))``.

Grid, random and genetic search are provided as comparators. Every optimizer
minimizes ``objective(tau, seed)``, where ``seed = base_seed + trial_index``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from . import seeding

log = logging.getLogger(__name__)

Objective = Callable[[float, int], float]


@dataclass(frozen=True)
class Trial:
    iter: int
    tau: float
    objective: float
    elapsed: float = 0.0
    seed: int = 0
    failed: bool = False

    @property
    def auc(self) -> float:
        return -self.objective


@dataclass
class TrialHistory:
    trials: list[Trial] = field(default_factory=list)

    def append(self, trial: Trial):
        self.trials.append(trial)

    def __len__(self):
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    def __getitem__(self, i):
        return self.trials[i]

    @property
    def taus(self) -> np.ndarray:
        return np.array([t.tau for t in self.trials], dtype=np.float64)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([t.objective for t in self.trials], dtype=np.float64)

    def best(self) -> Trial:
        # first minimum wins, so ties resolve by evaluation order
        return self.trials[int(np.argmin(self.objectives))]


@dataclass(frozen=True)
class TpeConfig:
    bounds: tuple[float, float] = (0.01, 1.0)
    gamma: float = 0.25
    n_startup: int = 10
    n_candidates: int = 24
    log_scale: bool = False

    def __post_init__(self):
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError(f"bounds must satisfy lo < hi, got {self.bounds}")
        if self.log_scale and lo <= 0:
            raise ValueError("log-scale search needs a positive lower bound")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")


# --------------------------------------------------------------------------
# search-space transforms


def _to_space(x, bounds, log_scale):
    return np.log(x) if log_scale else np.asarray(x, dtype=np.float64)


def _from_space(u, bounds, log_scale):
    lo, hi = bounds
    x = np.exp(u) if log_scale else u
    return float(np.clip(x, lo, hi))


def _space_bounds(bounds, log_scale):
    lo, hi = bounds
    return (math.log(lo), math.log(hi)) if log_scale else (float(lo), float(hi))


# --------------------------------------------------------------------------
# Parzen estimator


def split_history(history, gamma: float):
    """Split observed taus into the best ``max(1, ceil(gamma t))`` and the rest.

    ``history`` is a :class:`TrialHistory` or a sequence of ``(tau, objective)``.
    Returns ``(below, above)`` as arrays of tau values in evaluation order.
    """
    if isinstance(history, TrialHistory):
        taus, objs = history.taus, history.objectives
    else:
        pairs = list(history)
        taus = np.array([p[0] for p in pairs], dtype=np.float64)
        objs = np.array([p[1] for p in pairs], dtype=np.float64)
    t = taus.size
    if t == 0:
        raise ValueError("cannot split an empty history")
    n_below = max(1, math.ceil(gamma * t - 1e-12))
    order = np.argsort(objs, kind="stable")
    is_below = np.zeros(t, dtype=bool)
    is_below[order[:n_below]] = True
    return taus[is_below], taus[~is_below]


@dataclass(frozen=True)
class ParzenEstimator:
    """Equal-weight mixture of bounds-truncated Gaussians plus a uniform prior.

    Each observation's bandwidth is the larger of the gaps to its sorted
    neighbours (the bounds act as neighbours of the extreme points), clamped
    to ``[0.01, 1] * (hi - lo)``.
    """

    mus: np.ndarray
    sigmas: np.ndarray
    bounds: tuple[float, float]

    @classmethod
    def fit(cls, observations, bounds) -> "ParzenEstimator":
        lo, hi = bounds
        obs = np.asarray(observations, dtype=np.float64).reshape(-1)
        width = hi - lo
        if obs.size == 0:
            return cls(obs, obs.copy(), (lo, hi))
        order = np.argsort(obs, kind="stable")
        srt = obs[order]
        padded = np.concatenate([[lo], srt, [hi]])
        gaps = np.maximum(srt - padded[:-2], padded[2:] - srt)
        sig_sorted = np.clip(gaps, 0.01 * width, width)
        sigmas = np.empty_like(sig_sorted)
        sigmas[order] = sig_sorted
        return cls(obs, sigmas, (lo, hi))

    @property
    def n_components(self) -> int:
        return self.mus.size + 1

    def _mass(self):
        lo, hi = self.bounds
        return ndtr((hi - self.mus) / self.sigmas) - ndtr((lo - self.mus) / self.sigmas)

    def pdf(self, x) -> np.ndarray:
        lo, hi = self.bounds
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        inside = (x >= lo) & (x <= hi)
        total = np.full(x.shape, 1.0 / (hi - lo))
        if self.mus.size:
            z = (x[:, None] - self.mus[None, :]) / self.sigmas[None, :]
            comp = np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * self.sigmas[None, :])
            total = total + (comp / self._mass()[None, :]).sum(axis=1)
        return np.where(inside, total / self.n_components, 0.0)

    def log_pdf(self, x) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        lo, hi = self.bounds
        k = rng.integers(0, self.n_components, size=n)
        u = rng.uniform(0.0, 1.0, size=n)
        out = lo + u * (hi - lo)  # prior component (index n_components - 1)
        gauss = k < self.mus.size
        if np.any(gauss):
            mu, sd = self.mus[k[gauss]], self.sigmas[k[gauss]]
            a, b = ndtr((lo - mu) / sd), ndtr((hi - mu) / sd)
            out[gauss] = mu + sd * ndtri(a + u[gauss] * (b - a))
        return np.clip(out, lo, hi)


def parzen_density(observations, bounds, x):
    """Density at ``x`` of the Parzen mixture built from ``observations``."""
    p = ParzenEstimator.fit(observations, bounds).pdf(x)
    return float(p[0]) if np.ndim(x) == 0 else p


# --------------------------------------------------------------------------
# TPE


def _as_pairs(history):
    if isinstance(history, TrialHistory):
        return [(t.tau, t.objective) for t in history]
    return [(float(a), float(b)) for a, b in history]


def tpe_candidates(history, cfg: TpeConfig, rng: np.random.Generator):
    """Candidates drawn from ``l`` and their scores ``log l - log g``."""
    space = _space_bounds(cfg.bounds, cfg.log_scale)
    pairs = [(float(_to_space(t, cfg.bounds, cfg.log_scale)), y) for t, y in _as_pairs(history)]
    below, above = split_history(pairs, cfg.gamma)
    l_est = ParzenEstimator.fit(below, space)
    g_est = ParzenEstimator.fit(above, space)
    cand = l_est.sample(cfg.n_candidates, rng)
    return cand, l_est.log_pdf(cand) - g_est.log_pdf(cand)


def tpe_suggest(history, cfg: TpeConfig, rng: np.random.Generator) -> float:
    """Next tau: uniform during start-up, else the candidate maximizing l/g."""
    pairs = _as_pairs(history)
    if len(pairs) < max(cfg.n_startup, 1):
        lo, hi = _space_bounds(cfg.bounds, cfg.log_scale)
        return _from_space(rng.uniform(lo, hi), cfg.bounds, cfg.log_scale)
    cand, score = tpe_candidates(pairs, cfg, rng)
    return _from_space(cand[int(np.argmax(score))], cfg.bounds, cfg.log_scale)


def _evaluate(objective: Objective, tau, i, base_seed, history):
    seed = base_seed + i
    t0 = time.perf_counter()
    value = float(objective(tau, seed))
    failed = not math.isfinite(value)
    if failed:
        log.warning("trial %d (tau=%.4f) returned %r; scoring it 0", i, tau, value)
        value = 0.0
    trial = Trial(i, float(tau), value, time.perf_counter() - t0, seed, failed)
    history.append(trial)
    log.info("trial %3d  tau=%.4f  objective=%.5f", i, tau, value)
    return trial


def tpe_optimize(objective: Objective, cfg: TpeConfig, T: int, seed: int = 0):
    """Run ``T`` suggest/evaluate rounds; return ``(best_trial, history)``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = seeding.stream(seed, "hpo")
    history = TrialHistory()
    for i in range(T):
        tau = tpe_suggest(history, cfg, rng)
        _evaluate(objective, tau, i, seed, history)
    return history.best(), history


# --------------------------------------------------------------------------
# comparators


def fixed_search(objective: Objective, tau: float, seed: int = 0):
    """A single evaluation at ``tau``: the no-search reference."""
    history = TrialHistory()
    _evaluate(objective, float(tau), 0, seed, history)
    return history.best(), history


def grid_points(bounds, step) -> np.ndarray:
    lo, hi = bounds
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 12)


def grid_search(objective: Objective, bounds=(0.02, 1.0), step=0.02, seed: int = 0):
    history = TrialHistory()
    for i, tau in enumerate(grid_points(bounds, step)):
        _evaluate(objective, float(tau), i, seed, history)
    return history.best(), history


def random_search(objective: Objective, bounds=(0.01, 1.0), T: int = 75, seed: int = 0, log_scale=False):
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = seeding.stream(seed, "hpo")
    space = _space_bounds(bounds, log_scale)
    history = TrialHistory()
    for i in range(T):
        tau = _from_space(rng.uniform(*space), bounds, log_scale)
        _evaluate(objective, tau, i, seed, history)
    return history.best(), history


def ga_search(
    objective: Objective,
    bounds=(0.01, 1.0),
    population: int = 15,
    generations: int = 5,
    seed: int = 0,
    *,
    tournament: int = 2,
    alpha: float = 0.5,
    mutation_sigma: float = 0.1,
    mutation_rate: float = 0.2,
    elitism: int = 1,
    initial=None,
):
    """Real-coded GA evaluating ``population * generations`` trials.

    Each new generation holds the ``elitism`` best individuals of the previous
    one (re-evaluated under fresh trial seeds) plus children made by
    tournament selection, blend crossover and Gaussian mutation. The mutation
    step is ``mutation_sigma * (hi - lo)``.
    """
    lo, hi = bounds
    if population < 2 or generations < 1:
        raise ValueError("need population >= 2 and generations >= 1")
    rng = seeding.stream(seed, "hpo")
    if initial is None:
        pop = rng.uniform(lo, hi, size=population)
    else:
        pop = np.clip(np.asarray(initial, dtype=np.float64), lo, hi)
        if pop.size != population:
            raise ValueError(f"initial population has {pop.size} members, expected {population}")
    history = TrialHistory()
    fit = np.array([_evaluate(objective, float(x), len(history), seed, history).objective for x in pop])
    for _ in range(generations - 1):
        order = np.argsort(fit, kind="stable")
        children = list(pop[order[:elitism]])
        while len(children) < population:
            pa = _tournament(fit, tournament, rng)
            pb = _tournament(fit, tournament, rng)
            a, b = pop[pa], pop[pb]
            d = abs(a - b)
            child = rng.uniform(min(a, b) - alpha * d, max(a, b) + alpha * d)
            if rng.uniform() < mutation_rate:
                child += rng.normal(0.0, mutation_sigma * (hi - lo))
            children.append(float(np.clip(child, lo, hi)))
        pop = np.array(children)
        fit = np.array(
            [_evaluate(objective, float(x), len(history), seed, history).objective for x in pop]
        )
    return history.best(), history


def _tournament(fit, size, rng):
    contenders = rng.integers(0, fit.size, size=size)
    return int(contenders[np.argmin(fit[contenders])])


# --------------------------------------------------------------------------
# persistence


HISTORY_COLUMNS = ["iter", "tau", "objective", "auc", "elapsed_s", "seed"]


def write_history_csv(history: TrialHistory, path, include_elapsed=True):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_COLUMNS)
        for t in history:
            elapsed = repr(t.elapsed) if include_elapsed else "0.0"
            w.writerow([t.iter, repr(t.tau), repr(t.objective), repr(t.auc), elapsed, t.seed])


def read_history_csv(path) -> TrialHistory:
    history = TrialHistory()
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            history.append(Trial(int(row["iter"]), float(row["tau"]), float(row["objective"]),
                                 float(row["elapsed_s"]), int(row["seed"])))
    return history


def best_summary(history: TrialHistory, wall_s: float) -> dict:
    best = history.best()
    return {"tau": best.tau, "auc": best.auc, "iterations": len(history), "wall_s": wall_s}


def write_best_json(history: TrialHistory, path, wall_s: float, **extra):
    with open(path, "w") as fh:
        json.dump({**best_summary(history, wall_s), **extra}, fh, indent=2)
