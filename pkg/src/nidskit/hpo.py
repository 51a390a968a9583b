"""Hyperparameter optimization with a tree-structured Parzen estimator.

After a random startup phase, trials are split into a good set G (top
gamma-quantile by score, higher is better) and a bad set B. Each dimension
gets a Parzen density from each set: numeric dimensions use a mixture of
truncated Gaussians centered at the observed values (Silverman-style
bandwidth with a floor) plus one flat prior component; categorical
dimensions use add-one smoothed frequencies. Candidates are drawn from the
good density l and the one maximizing sum(log l - log g) is suggested.

Failed objectives score -inf and the search continues, so divergent
configurations (e.g. a CNN with a hot learning rate) do not abort a run.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .seeding import derive_seed

__all__ = [
    "Dimension",
    "uniform",
    "log_uniform",
    "integer_range",
    "categorical",
    "SearchSpace",
    "TpeConfig",
    "Trial",
    "TrialHistory",
    "sample_uniform",
    "suggest",
    "optimize",
]

_NUMERIC_KINDS = ("uniform", "log_uniform", "integer_range")


@dataclass(frozen=True)
class Dimension:
    name: str
    kind: str
    lo: float = 0.0
    hi: float = 0.0
    choices: tuple = ()

    def __post_init__(self):
        if self.kind in _NUMERIC_KINDS:
            # a one-value integer range is a legal degenerate dimension
            if self.kind == "integer_range":
                if self.lo > self.hi:
                    raise ValueError(f"{self.name}: lo must be <= hi")
            elif not self.lo < self.hi:
                raise ValueError(f"{self.name}: lo must be < hi")
            if self.kind == "log_uniform" and self.lo <= 0:
                raise ValueError(f"{self.name}: log_uniform needs lo > 0")
        elif self.kind == "categorical":
            if not self.choices:
                raise ValueError(f"{self.name}: categorical needs choices")
        else:
            raise ValueError(f"{self.name}: unknown dimension kind {self.kind!r}")

    def _to_internal(self, value: float) -> float:
        return math.log(value) if self.kind == "log_uniform" else float(value)

    def _from_internal(self, value: float):
        if self.kind == "log_uniform":
            return math.exp(value)
        if self.kind == "integer_range":
            return int(min(max(round(value), self.lo), self.hi))
        return float(value)

    @property
    def _bounds(self) -> tuple[float, float]:
        if self.kind == "log_uniform":
            return math.log(self.lo), math.log(self.hi)
        return float(self.lo), float(self.hi)


def uniform(name: str, lo: float, hi: float) -> Dimension:
    return Dimension(name, "uniform", lo, hi)


def log_uniform(name: str, lo: float, hi: float) -> Dimension:
    return Dimension(name, "log_uniform", lo, hi)


def integer_range(name: str, lo: int, hi: int) -> Dimension:
    return Dimension(name, "integer_range", lo, hi)


def categorical(name: str, choices) -> Dimension:
    return Dimension(name, "categorical", choices=tuple(choices))


@dataclass(frozen=True)
class SearchSpace:
    dimensions: tuple[Dimension, ...]

    def __post_init__(self):
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")
        if not self.dimensions:
            raise ValueError("search space is empty")

    @classmethod
    def from_dicts(cls, entries) -> "SearchSpace":
        dims = []
        for e in entries:
            kind = e["type"]
            if kind == "categorical":
                dims.append(categorical(e["name"], e["choices"]))
            else:
                dims.append(Dimension(e["name"], kind, e["lo"], e["hi"]))
        return cls(tuple(dims))


@dataclass(frozen=True)
class TpeConfig:
    gamma: float = 0.25
    n_startup: int = 10
    n_candidates: int = 24
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0,1)")
        if self.n_startup < 0 or self.n_candidates < 1:
            raise ValueError("n_startup must be >= 0 and n_candidates >= 1")


@dataclass
class Trial:
    config: dict
    score: float
    trial_index: int
    seconds: float = 0.0


@dataclass
class TrialHistory:
    trials: list[Trial] = field(default_factory=list)

    def append(self, trial: Trial) -> None:
        self.trials.append(trial)

    def best(self) -> Trial:
        if not self.trials:
            raise ValueError("history is empty")
        return max(self.trials, key=lambda t: t.score)

    def to_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for t in self.trials:
                fh.write(
                    json.dumps(
                        {
                            "index": t.trial_index,
                            "config": t.config,
                            "score": t.score,
                            "seconds": t.seconds,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    @classmethod
    def from_jsonl(cls, path: str) -> "TrialHistory":
        trials = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                d = json.loads(line)
                trials.append(Trial(d["config"], d["score"], d["index"], d.get("seconds", 0.0)))
        return cls(trials)


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> dict:
    """Independent uniform draw per dimension (startup phase)."""
    config = {}
    for dim in space.dimensions:
        if dim.kind == "categorical":
            config[dim.name] = dim.choices[int(rng.integers(0, len(dim.choices)))]
        elif dim.kind == "integer_range":
            config[dim.name] = int(rng.integers(int(dim.lo), int(dim.hi) + 1))
        else:
            lo, hi = dim._bounds
            config[dim.name] = dim._from_internal(float(rng.uniform(lo, hi)))
    return config


def _component_bandwidths(obs: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Adaptive per-component widths for the Parzen mixture.

    Each observation's bandwidth is its larger neighbor gap (Silverman-scaled
    for set size), so dense clusters sharpen while stragglers stay wide.
    Bandwidths are clipped to [span/(n+1), span] (never below span*1e-3):
    without the floor a run of identical observations collapses the density
    to a spike and the search stalls in pure exploitation.
    """
    span = hi - lo
    n = obs.size
    scale = 1.06 * n ** (-0.2)
    if n == 1:
        sigma = np.array([span])
    else:
        order = np.argsort(obs, kind="stable")
        sorted_obs = obs[order]
        gaps = np.diff(sorted_obs)
        widths = np.empty(n)
        widths[0] = gaps[0]
        widths[-1] = gaps[-1]
        if n > 2:
            widths[1:-1] = np.maximum(gaps[:-1], gaps[1:])
        sigma = np.empty(n)
        sigma[order] = widths * scale
    floor = max(span / min(100.0, n + 1.0), span * 1e-3)
    return np.clip(sigma, floor, span)


def _parzen_logpdf(x: float, obs: np.ndarray, sigmas: np.ndarray, lo: float, hi: float) -> float:
    """Log density of the Parzen mixture (truncated Gaussians + one flat
    component, all weighted equally)."""
    span = hi - lo
    flat = 1.0 / span
    if obs.size == 0:
        return math.log(flat)
    a = ndtr((lo - obs) / sigmas)
    b = ndtr((hi - obs) / sigmas)
    z = np.maximum(b - a, 1e-300)
    u = (x - obs) / sigmas
    pdfs = np.exp(-0.5 * u * u) / (math.sqrt(2.0 * math.pi) * sigmas) / z
    density = (pdfs.sum() + flat) / (obs.size + 1)
    return math.log(max(density, 1e-300))


def _parzen_sample(obs: np.ndarray, sigmas: np.ndarray, lo: float, hi: float, rng) -> float:
    component = int(rng.integers(0, obs.size + 1))
    if component == obs.size:
        return float(rng.uniform(lo, hi))
    mu = float(obs[component])
    bw = float(sigmas[component])
    a = ndtr((lo - mu) / bw)
    b = ndtr((hi - mu) / bw)
    u = a + rng.random() * (b - a)
    return mu + bw * float(ndtri(min(max(u, 1e-12), 1.0 - 1e-12)))


def _categorical_logprob(choice_idx: int, obs_idx: np.ndarray, n_choices: int) -> float:
    count = int((obs_idx == choice_idx).sum())
    return math.log((count + 1.0) / (obs_idx.size + n_choices))


def suggest(
    history: TrialHistory,
    space: SearchSpace,
    cfg: TpeConfig,
    rng: np.random.Generator | None = None,
) -> dict:
    """Propose the next configuration.

    During startup (fewer than n_startup trials) the draw is uniform. The
    optional rng lets optimize() thread one generator through a whole run;
    standalone calls derive a deterministic generator from the config seed
    and the history length.
    """
    if rng is None:
        rng = np.random.default_rng(derive_seed(cfg.seed, "suggest", len(history.trials)))
    n = len(history.trials)
    if n < cfg.n_startup or n < 2:
        return sample_uniform(space, rng)

    ranked = sorted(history.trials, key=lambda t: (-t.score, t.trial_index))
    n_good = max(1, math.ceil(cfg.gamma * n))
    good, bad = ranked[:n_good], ranked[n_good:]

    per_dim: dict[str, dict] = {}
    for dim in space.dimensions:
        if dim.kind == "categorical":
            index = {c: i for i, c in enumerate(dim.choices)}
            per_dim[dim.name] = {
                "good": np.array([index[t.config[dim.name]] for t in good], dtype=np.int64),
                "bad": np.array([index[t.config[dim.name]] for t in bad], dtype=np.int64),
            }
        else:
            lo, hi = dim._bounds
            if lo == hi:
                per_dim[dim.name] = {}
                continue
            g_obs = np.array([dim._to_internal(t.config[dim.name]) for t in good])
            b_obs = np.array([dim._to_internal(t.config[dim.name]) for t in bad])
            per_dim[dim.name] = {
                "good": g_obs,
                "bad": b_obs,
                "good_bw": _component_bandwidths(g_obs, lo, hi) if g_obs.size else None,
                "bad_bw": _component_bandwidths(b_obs, lo, hi) if b_obs.size else None,
            }

    best_config = None
    best_acquisition = -math.inf
    for _ in range(cfg.n_candidates):
        config = {}
        acquisition = 0.0
        for dim in space.dimensions:
            obs = per_dim[dim.name]
            if dim.kind == "categorical":
                n_choices = len(dim.choices)
                probs = np.array(
                    [
                        math.exp(_categorical_logprob(i, obs["good"], n_choices))
                        for i in range(n_choices)
                    ]
                )
                probs /= probs.sum()
                idx = int(rng.choice(n_choices, p=probs))
                config[dim.name] = dim.choices[idx]
                acquisition += _categorical_logprob(idx, obs["good"], n_choices)
                acquisition -= _categorical_logprob(idx, obs["bad"], n_choices)
            else:
                lo, hi = dim._bounds
                if lo == hi:  # degenerate integer range
                    config[dim.name] = dim._from_internal(lo)
                    continue
                x = _parzen_sample(obs["good"], obs["good_bw"], lo, hi, rng)
                value = dim._from_internal(x)
                x_eval = dim._to_internal(value)
                acquisition += _parzen_logpdf(x_eval, obs["good"], obs["good_bw"], lo, hi)
                acquisition -= _parzen_logpdf(x_eval, obs["bad"], obs["bad_bw"], lo, hi)
                config[dim.name] = value
        if acquisition > best_acquisition:
            best_acquisition = acquisition
            best_config = config
    return best_config


def optimize(
    objective,
    space: SearchSpace,
    budget: int,
    cfg: TpeConfig,
) -> tuple[dict, float, TrialHistory]:
    """Run ``budget`` suggest-evaluate-record trials and return the best.

    A raised exception or non-finite objective value records -inf for that
    trial; the search keeps going. Deterministic for a deterministic
    objective and fixed cfg.seed.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    history = TrialHistory()
    for i in range(budget):
        config = suggest(history, space, cfg, rng)
        start = time.perf_counter()
        try:
            score = float(objective(config))
            if math.isnan(score):
                score = -math.inf
        except Exception:
            score = -math.inf
        history.append(Trial(config, score, i, time.perf_counter() - start))
    best = history.best()
    return best.config, best.score, history
