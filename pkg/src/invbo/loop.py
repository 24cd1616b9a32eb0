"""Pool-based active learning loop for hitting a target output.

A :class:`Learner` holds everything a session needs: the candidate pool,
the observations so far, the fitted surrogate and the incumbent.  It moves
through ``propose`` (score unqueried candidates, pick the best) and
``tell`` (add the observation, refit, update the incumbent).  :func:`run`
drives a learner against an oracle; the command-line ask/tell commands
drive the same object one step per process, so both paths produce the same
query sequence under the same seed and observations.

Every random choice is drawn from a generator seeded by
``(seed, iteration, stream)``, so the only randomness state a session
carries is its iteration counter.
"""
from __future__ import annotations

import enum
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import acquisition as acq
from .errors import DataError, InvalidArgumentError, NumericalError
from .mogp import (
    Dataset,
    FitOptions,
    FittedModel,
    Hyperparams,
    Posterior,
    fit,
    log_marginal_likelihood,
    predict_batch,
)
from .oracles import DEFAULT_NOISE_VAR, DEFAULT_RANGE, SyntheticOracle, generate_pool, observe

logger = logging.getLogger(__name__)

LOG_EPS = 1e-12
TRACE_VERSION = 1

# generator streams
_STREAM_SELECT = 1
_STREAM_FIT = 2
_STREAM_NOISE = 3
_STREAM_TRIAL = 4


def derive_seed(*keys) -> int:
    """A 63-bit seed determined by a tuple of non-negative integers."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 31 ^ int(state[1])


def _rng(*keys) -> np.random.Generator:
    return np.random.default_rng([int(k) for k in keys])


class Strategy(enum.Enum):
    EI = "ei"
    PI = "pi"
    MEAN_MSE = "mean-mse"
    RANDOM = "random"


@dataclass(frozen=True, eq=False)
class LoopConfig:
    """Settings for one run over a fixed candidate pool.

    ``normalize_inputs`` rescales inputs to [0, 1] using the pool's range
    before they reach the surrogate.
    """

    strategy: Strategy
    budget: int
    pool: np.ndarray
    initial_indices: tuple
    seed: int = 0
    refit_every: int = 1
    include_noise: bool = True
    rank: int = 1
    normalize_inputs: bool = False
    ei_method: str = "contour"
    fit_options: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        pool = np.array(self.pool, dtype=float)
        if pool.ndim == 1:
            pool = pool[:, None]
        if pool.ndim != 2 or pool.shape[0] < 1:
            raise InvalidArgumentError(f"pool must be (P, d) with P >= 1, got {pool.shape}")
        if not np.all(np.isfinite(pool)):
            raise InvalidArgumentError("pool has non-finite entries")
        pool.setflags(write=False)
        object.__setattr__(self, "pool", pool)
        idx = tuple(int(i) for i in self.initial_indices)
        if len(idx) < 1:
            raise InvalidArgumentError("at least one initial index is required")
        if len(set(idx)) != len(idx):
            raise InvalidArgumentError("initial indices must be distinct")
        if min(idx) < 0 or max(idx) >= pool.shape[0]:
            raise InvalidArgumentError("initial index outside the pool")
        object.__setattr__(self, "initial_indices", idx)
        if int(self.budget) != self.budget or self.budget < 1:
            raise InvalidArgumentError(f"budget must be a positive integer, got {self.budget}")
        if int(self.refit_every) != self.refit_every or self.refit_every < 1:
            raise InvalidArgumentError("refit_every must be a positive integer")
        if self.rank < 1:
            raise InvalidArgumentError("rank must be >= 1")
        if self.ei_method not in ("contour", "simpson"):
            raise InvalidArgumentError(f"unknown EI method {self.ei_method!r}")

    def replace(self, **kw) -> "LoopConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        fo = self.fit_options
        return {
            "strategy": self.strategy.value,
            "budget": int(self.budget),
            "pool": self.pool.tolist(),
            "initial_indices": list(self.initial_indices),
            "seed": int(self.seed),
            "refit_every": int(self.refit_every),
            "include_noise": bool(self.include_noise),
            "rank": int(self.rank),
            "normalize_inputs": bool(self.normalize_inputs),
            "ei_method": self.ei_method,
            "fit_options": {
                "n_starts": fo.n_starts,
                "log10_bounds": list(fo.log10_bounds),
                "maxiter": fo.maxiter,
                "fixed_noise": fo.fixed_noise,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LoopConfig":
        fo = d.get("fit_options", {})
        return cls(
            strategy=Strategy(d["strategy"]),
            budget=int(d["budget"]),
            pool=np.asarray(d["pool"], dtype=float),
            initial_indices=tuple(d["initial_indices"]),
            seed=int(d.get("seed", 0)),
            refit_every=int(d.get("refit_every", 1)),
            include_noise=bool(d.get("include_noise", True)),
            rank=int(d.get("rank", 1)),
            normalize_inputs=bool(d.get("normalize_inputs", False)),
            ei_method=d.get("ei_method", "contour"),
            fit_options=FitOptions(
                n_starts=int(fo.get("n_starts", 5)),
                log10_bounds=tuple(fo.get("log10_bounds", (-6.0, 6.0))),
                maxiter=int(fo.get("maxiter", 200)),
                fixed_noise=bool(fo.get("fixed_noise", False)),
            ),
        )


@dataclass(frozen=True, eq=False)
class TraceRecord:
    """One loop iteration.

    ``acquisition`` is None for the random strategy.  ``lml_before`` is the
    log marginal likelihood of the previous hyperparameters on the enlarged
    data and ``lml_after`` that of the refitted ones (equal when no refit
    happened).
    """

    iteration: int
    index: int
    x: tuple
    y: tuple
    objective: float
    incumbent_value: float
    incumbent_index: int
    acquisition: float | None
    lml_before: float | None = None
    lml_after: float | None = None
    refit: bool = False
    wall_time: float = 0.0

    def to_dict(self, include_timing=False) -> dict:
        d = {
            "iteration": self.iteration,
            "index": self.index,
            "x": list(self.x),
            "y": list(self.y),
            "objective": self.objective,
            "incumbent_value": self.incumbent_value,
            "incumbent_index": self.incumbent_index,
            "acquisition": self.acquisition,
            "lml_before": self.lml_before,
            "lml_after": self.lml_after,
            "refit": self.refit,
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TraceRecord":
        return cls(
            iteration=int(d["iteration"]),
            index=int(d["index"]),
            x=tuple(float(v) for v in d["x"]),
            y=tuple(float(v) for v in d["y"]),
            objective=float(d["objective"]),
            incumbent_value=float(d["incumbent_value"]),
            incumbent_index=int(d["incumbent_index"]),
            acquisition=None if d.get("acquisition") is None else float(d["acquisition"]),
            lml_before=None if d.get("lml_before") is None else float(d["lml_before"]),
            lml_after=None if d.get("lml_after") is None else float(d["lml_after"]),
            refit=bool(d.get("refit", False)),
            wall_time=float(d.get("wall_time", 0.0)),
        )


@dataclass(eq=False)
class Trace:
    """History of a run: the initial design followed by one record per query."""

    strategy: Strategy
    initial_indices: tuple
    initial_objectives: tuple
    initial_incumbent: float
    initial_incumbent_index: int
    records: list = field(default_factory=list)
    exhausted: bool = False

    @property
    def final_incumbent_value(self) -> float:
        return self.records[-1].incumbent_value if self.records else self.initial_incumbent

    @property
    def final_incumbent_index(self) -> int:
        return self.records[-1].incumbent_index if self.records else self.initial_incumbent_index

    def queried_indices(self) -> list:
        return list(self.initial_indices) + [r.index for r in self.records]

    def header(self) -> dict:
        return {
            "kind": "header",
            "version": TRACE_VERSION,
            "strategy": self.strategy.value,
            "initial_indices": list(self.initial_indices),
            "initial_objectives": list(self.initial_objectives),
            "initial_incumbent": self.initial_incumbent,
            "initial_incumbent_index": self.initial_incumbent_index,
        }

    def to_jsonl(self, include_timing=False) -> str:
        """One JSON object per line: a header, the records, and an end marker."""
        lines = [dumps(self.header())]
        for r in self.records:
            lines.append(dumps({"kind": "record", **r.to_dict(include_timing)}))
        lines.append(dumps({"kind": "end", "n_records": len(self.records),
                            "pool_exhausted": self.exhausted}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        trace = None
        ended = False
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid JSON: {exc.msg}", line=lineno) from None
            kind = obj.get("kind")
            try:
                if kind == "header":
                    if obj.get("version") != TRACE_VERSION:
                        raise DataError(f"unsupported trace version {obj.get('version')}", line=lineno)
                    trace = cls(
                        Strategy(obj["strategy"]),
                        tuple(obj["initial_indices"]),
                        tuple(float(v) for v in obj["initial_objectives"]),
                        float(obj["initial_incumbent"]),
                        int(obj["initial_incumbent_index"]),
                    )
                elif kind == "record":
                    if trace is None:
                        raise DataError("record before header", line=lineno)
                    trace.records.append(TraceRecord.from_dict(obj))
                elif kind == "end":
                    if trace is None:
                        raise DataError("end marker before header", line=lineno)
                    trace.exhausted = bool(obj.get("pool_exhausted", False))
                    ended = True
                else:
                    raise DataError(f"unknown record kind {kind!r}", line=lineno)
            except (KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, DataError):
                    raise
                raise DataError(f"malformed {kind} record: {exc}", line=lineno) from None
        if trace is None:
            raise DataError("trace has no header", line=0)
        if not ended:
            raise DataError("trace is truncated (no end marker)", line=len(text.splitlines()))
        return trace


def dumps(obj) -> str:
    """Compact JSON with sorted keys; floats use the shortest round-trip repr."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


class LoopAborted(RuntimeError):
    """A run stopped early; ``trace`` holds everything completed so far."""

    def __init__(self, message, trace, cause=None):
        super().__init__(message)
        self.trace = trace
        self.cause = cause


class PendingProposalError(RuntimeError):
    """``propose`` was called while a proposal is still waiting for its observation."""


class NoPendingProposalError(RuntimeError):
    """``tell`` was called without an outstanding proposal."""


@dataclass(frozen=True)
class Proposal:
    index: int
    x: tuple
    acquisition: float | None


class Learner:
    """Session state machine: ``propose`` then ``tell``, repeated until the budget is spent.

    Parameters
    ----------
    config : LoopConfig
    target : Target or array
    initial_observations : (len(initial_indices), M) array
        Observed outputs at the initial pool points, in the order of
        ``config.initial_indices``.
    """

    def __init__(self, config: LoopConfig, target, initial_observations, *, _restore=None):
        self.config = config
        self.target = target if isinstance(target, acq.Target) else acq.Target(target)
        Y0 = np.atleast_2d(np.asarray(initial_observations, dtype=float))
        if Y0.shape != (len(config.initial_indices), self.target.dim):
            raise InvalidArgumentError(
                f"initial observations must be ({len(config.initial_indices)}, "
                f"{self.target.dim}), got {Y0.shape}"
            )
        if not np.all(np.isfinite(Y0)):
            raise InvalidArgumentError("initial observations have non-finite entries")
        self._lo = config.pool.min(axis=0)
        span = config.pool.max(axis=0) - self._lo
        self._span = np.where(span > 0, span, 1.0)
        self.queried = list(config.initial_indices)
        self.dataset = Dataset(self._model_inputs(config.pool[self.queried]), Y0)
        objectives = [acq.squared_error(y, self.target) for y in Y0]
        best = int(np.argmin(objectives))
        self.trace = Trace(
            config.strategy,
            tuple(config.initial_indices),
            tuple(objectives),
            objectives[best],
            config.initial_indices[best],
        )
        self.iteration = 0
        self.pending: Proposal | None = None
        if _restore is None:
            self.model = self._fit(Hyperparams.default(self.dataset, config.rank), 0)
        else:
            self.model = FittedModel.condition(self.dataset, _restore)

    # -- helpers ----------------------------------------------------------

    def _model_inputs(self, X):
        X = np.asarray(X, dtype=float)
        if self.config.normalize_inputs:
            return (X - self._lo) / self._span
        return X

    def _fit(self, init: Hyperparams, iteration: int) -> FittedModel:
        opts = self.config.fit_options.replace(
            seed=derive_seed(self.config.seed, iteration, _STREAM_FIT)
        )
        try:
            return fit(self.dataset, init, opts)
        except NumericalError as exc:
            # fall back to the previous hyperparameters before giving up
            logger.warning("refit failed at iteration %d: %s", iteration, exc)
            return FittedModel.condition(self.dataset, init)

    @property
    def incumbent_value(self) -> float:
        return self.trace.final_incumbent_value

    @property
    def incumbent_index(self) -> int:
        return self.trace.final_incumbent_index

    @property
    def incumbent(self) -> acq.Incumbent:
        i = self.incumbent_index
        return acq.Incumbent(self.incumbent_value, self.config.pool[i].copy())

    @property
    def hyperparams(self) -> Hyperparams:
        return self.model.hyperparams

    def candidates(self) -> np.ndarray:
        """Unqueried pool indices, ascending."""
        mask = np.ones(self.config.pool.shape[0], bool)
        mask[self.queried] = False
        return np.flatnonzero(mask)

    @property
    def done(self) -> bool:
        return self.iteration >= self.config.budget or self.candidates().size == 0

    # -- scoring ----------------------------------------------------------

    def score(self, indices) -> np.ndarray:
        """Acquisition values at the given pool indices (larger is better)."""
        indices = np.asarray(indices, dtype=int)
        strategy = self.config.strategy
        if strategy is Strategy.RANDOM:
            raise InvalidArgumentError("the random strategy has no acquisition values")
        mean, cov = predict_batch(
            self.model, self._model_inputs(self.config.pool[indices]),
            include_noise=self.config.include_noise,
        )
        L = self.incumbent_value
        out = np.empty(indices.size)
        for k in range(indices.size):
            post = Posterior(mean[k], cov[k], self.config.include_noise)
            if strategy is Strategy.MEAN_MSE:
                out[k] = acq.mean_mse_score(post, self.target)
            elif strategy is Strategy.PI:
                out[k] = acq.pi_score(post, self.target, L)
            else:
                out[k] = acq.ei_score(post, self.target, L, method=self.config.ei_method)
        return out

    # -- state machine ----------------------------------------------------

    def propose(self) -> Proposal:
        if self.pending is not None:
            raise PendingProposalError(
                f"pool index {self.pending.index} is still waiting for its observation"
            )
        if self.done:
            raise InvalidArgumentError("budget spent or pool exhausted; nothing to propose")
        cand = self.candidates()
        if self.config.strategy is Strategy.RANDOM:
            rng = _rng(self.config.seed, self.iteration + 1, _STREAM_SELECT)
            index, value = int(cand[rng.integers(cand.size)]), None
        else:
            scores = self.score(cand)
            k = acq.argmax_first(scores)
            index, value = int(cand[k]), float(scores[k])
        self.pending = Proposal(index, tuple(float(v) for v in self.config.pool[index]), value)
        return self.pending

    def tell(self, y, wall_time=0.0) -> TraceRecord:
        if self.pending is None:
            raise NoPendingProposalError("no pending proposal; ask first")
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.shape != (self.target.dim,):
            raise InvalidArgumentError(
                f"observation must have length {self.target.dim}, got {y.size}"
            )
        if not np.all(np.isfinite(y)):
            raise InvalidArgumentError("observation has non-finite entries")
        p = self.pending
        t = self.iteration + 1
        self.dataset = self.dataset.append(self._model_inputs(np.asarray(p.x)), y)
        self.queried.append(p.index)
        prev = self.model.hyperparams
        refit = t % self.config.refit_every == 0
        if refit:
            self.model = self._fit(prev, t)
            lml_before = self.model.fit_info.get("init_log_likelihood")
            lml_after = self.model.fit_info.get("log_likelihood")
            if lml_before is None:  # fell back to the previous hyperparameters
                lml_before = lml_after = log_marginal_likelihood(self.model)
        else:
            self.model = FittedModel.condition(self.dataset, prev)
            lml_before = lml_after = log_marginal_likelihood(self.model)
        obj = acq.squared_error(y, self.target)
        if obj < self.incumbent_value:
            inc_value, inc_index = obj, p.index
        else:
            inc_value, inc_index = self.incumbent_value, self.incumbent_index
        rec = TraceRecord(
            iteration=t,
            index=p.index,
            x=p.x,
            y=tuple(float(v) for v in y),
            objective=obj,
            incumbent_value=inc_value,
            incumbent_index=inc_index,
            acquisition=p.acquisition,
            lml_before=_finite_or_none(lml_before),
            lml_after=_finite_or_none(lml_after),
            refit=refit,
            wall_time=float(wall_time),
        )
        self.trace.records.append(rec)
        self.iteration = t
        self.pending = None
        if self.candidates().size == 0 and t < self.config.budget:
            self.trace.exhausted = True
        return rec

    # -- persistence ------------------------------------------------------

    def state_dict(self) -> dict:
        """Everything needed to continue this session bit for bit."""
        Y = self.dataset.Y
        n0 = len(self.config.initial_indices)
        return {
            "config": self.config.to_dict(),
            "target": self.target.values.tolist(),
            "initial_observations": Y[:n0].tolist(),
            "records": [r.to_dict(include_timing=False) for r in self.trace.records],
            "hyperparams": self.model.hyperparams.to_dict(),
            "pending": None if self.pending is None else {
                "index": self.pending.index,
                "x": list(self.pending.x),
                "acquisition": self.pending.acquisition,
            },
            "iteration": self.iteration,
            "incumbent": {"value": self.incumbent_value, "index": self.incumbent_index},
        }

    @classmethod
    def from_state_dict(cls, d: dict) -> "Learner":
        config = LoopConfig.from_dict(d["config"])
        hp = Hyperparams.from_dict(d["hyperparams"])
        self = cls(config, d["target"], d["initial_observations"], _restore=hp)
        # replay the stored records without refitting; the final model uses the stored hyperparameters
        records = [TraceRecord.from_dict(r) for r in d["records"]]
        X = [self.dataset.X]
        Y = [self.dataset.Y]
        for r in records:
            if r.index in self.queried:
                raise DataError(f"pool index {r.index} queried twice in session state")
            self.queried.append(r.index)
            X.append(self._model_inputs(np.asarray(r.x))[None, :])
            Y.append(np.asarray(r.y)[None, :])
        self.dataset = Dataset(np.vstack(X), np.vstack(Y))
        self.trace.records.extend(records)
        self.iteration = int(d["iteration"])
        if self.iteration != len(records):
            raise DataError("iteration counter disagrees with the number of records")
        if self.candidates().size == 0 and self.iteration < config.budget:
            self.trace.exhausted = True
        self.model = FittedModel.condition(self.dataset, hp)
        p = d.get("pending")
        if p is not None:
            self.pending = Proposal(int(p["index"]), tuple(float(v) for v in p["x"]),
                                    None if p["acquisition"] is None else float(p["acquisition"]))
        return self


def _finite_or_none(v):
    return float(v) if v is not None and math.isfinite(v) else None


# ---------------------------------------------------------------------------
# running and benchmarking


def noise_rng(seed, iteration) -> np.random.Generator:
    """Generator for the oracle noise at a given iteration (0 is the initial design)."""
    return _rng(seed, iteration, _STREAM_NOISE)


def run(config: LoopConfig, oracle, target, initial_observations=None) -> Trace:
    """Run the loop until the budget is spent or the pool is exhausted.

    ``oracle`` is either a :class:`SyntheticOracle` (observed with noise drawn
    from ``noise_rng(seed, iteration)``) or a callable ``x -> y``.  Initial
    observations are taken from the oracle unless given.

    Raises
    ------
    LoopAborted
        The oracle or the surrogate failed; the partial trace is attached.
    """
    if isinstance(oracle, SyntheticOracle):
        def observe_at(x, t):
            return observe(oracle, x[0] if x.size == 1 else x, noise_rng(config.seed, t))
    else:
        def observe_at(x, t):
            return np.asarray(oracle(x), dtype=float)

    if initial_observations is None:
        Y0 = np.array([observe_at(config.pool[i], 0) for i in config.initial_indices])
    else:
        Y0 = initial_observations
    learner = Learner(config, target, Y0)
    while not learner.done:
        t0 = time.perf_counter()
        try:
            p = learner.propose()
            y = observe_at(np.asarray(p.x), learner.iteration + 1)
            learner.tell(y, wall_time=time.perf_counter() - t0)
        except Exception as exc:  # noqa: BLE001
            raise LoopAborted(
                f"run stopped at iteration {learner.iteration + 1}: {exc}", learner.trace, exc
            ) from exc
    return learner.trace


def simple_regret(trace: Trace) -> np.ndarray:
    """Incumbent squared error after each iteration."""
    if not trace.records:
        raise InvalidArgumentError("trace has no iterations")
    return np.array([r.incumbent_value for r in trace.records])


def regret_curve(trace: Trace, budget: int) -> np.ndarray:
    """Incumbent after iterations 0..budget, held flat once the pool runs out."""
    vals = [trace.initial_incumbent] + [r.incumbent_value for r in trace.records]
    vals += [vals[-1]] * (budget + 1 - len(vals))
    return np.array(vals[: budget + 1])


@dataclass(frozen=True)
class TrialSetup:
    """Shared inputs of one benchmark trial (same for every strategy)."""

    pool: np.ndarray
    initial_indices: tuple
    target: acq.Target
    oracle: SyntheticOracle
    seed: int
    target_index: int | None = None


def synthetic_trial(kind, trial_seed, pool_size=100, init_size=2,
                    input_range=DEFAULT_RANGE, noise_var=DEFAULT_NOISE_VAR) -> TrialSetup:
    """Pool, initial design and target for one synthetic trial.

    The target is the noise-free output at a pool point that is not part of
    the initial design, so zero regret is reachable.
    """
    if pool_size < init_size + 1:
        raise InvalidArgumentError("pool must hold the initial design plus the target point")
    if init_size < 1:
        raise InvalidArgumentError("init_size must be >= 1")
    oracle = SyntheticOracle.with_noise(kind, noise_var)
    pool = generate_pool(oracle.kind, pool_size, input_range, seed=derive_seed(trial_seed, 0))
    rng = _rng(trial_seed, 0, _STREAM_TRIAL)
    perm = rng.permutation(pool_size)
    target_index = int(perm[0])
    initial = tuple(sorted(int(i) for i in perm[1: 1 + init_size]))
    target = acq.Target(oracle.evaluate(pool[target_index, 0]))
    return TrialSetup(pool, initial, target, oracle, int(trial_seed), target_index)


@dataclass
class BenchmarkResult:
    """Per-strategy traces and log10-regret summaries.

    ``mean[s]`` and ``std[s]`` have one entry per iteration ``0..budget``
    (iteration 0 is the initial design); ``std`` is the population standard
    deviation across trials.
    """

    strategies: list
    budget: int
    traces: dict
    mean: dict
    std: dict

    def rows(self):
        """(strategy, iteration, mean_log10_regret, std_log10_regret) rows."""
        for s in self.strategies:
            for t in range(self.budget + 1):
                yield s.value, t, float(self.mean[s][t]), float(self.std[s][t])


def log_regret(curve) -> np.ndarray:
    return np.log10(np.asarray(curve) + LOG_EPS)


def benchmark(strategies: Sequence, setup_factory: Callable[[int], TrialSetup], n_trials: int,
              budget: int, base_seed: int = 0, config_overrides: dict | None = None,
              progress: Callable | None = None) -> BenchmarkResult:
    """Run every strategy on ``n_trials`` paired trials.

    ``setup_factory(trial_seed)`` builds the pool, initial design, target and
    oracle for a trial; all strategies see the same setup within a trial.
    """
    if n_trials < 1:
        raise InvalidArgumentError("n_trials must be >= 1")
    strategies = [Strategy(s) for s in strategies]
    overrides = dict(config_overrides or {})
    traces = {s: [] for s in strategies}
    for k in range(n_trials):
        trial_seed = derive_seed(base_seed, k)
        setup = setup_factory(trial_seed)
        for s in strategies:
            cfg = LoopConfig(
                strategy=s, budget=budget, pool=setup.pool,
                initial_indices=setup.initial_indices, seed=trial_seed, **overrides,
            )
            trace = run(cfg, setup.oracle, setup.target)
            traces[s].append(trace)
            if progress is not None:
                progress(k, s, trace)
    mean, std = {}, {}
    for s in strategies:
        curves = np.array([log_regret(regret_curve(t, budget)) for t in traces[s]])
        mean[s] = curves.mean(axis=0)
        std[s] = curves.std(axis=0)
    return BenchmarkResult(strategies, budget, traces, mean, std)


def iterations_to_threshold(trace: Trace, fraction=1e-2):
    """First iteration whose incumbent is <= ``fraction`` times the initial one (inf if never)."""
    thr = fraction * trace.initial_incumbent
    if trace.initial_incumbent <= thr:
        return 0
    for r in trace.records:
        if r.incumbent_value <= thr:
            return r.iteration
    return math.inf
