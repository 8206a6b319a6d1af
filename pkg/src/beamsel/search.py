"""Beam selection search: genetic algorithm plus exhaustive and random baselines.

Populations are int64 arrays of shape (members, N) holding 0-based codebook
column indices; the public BeamSelection type stays 1-based. Every search in
this module scores candidates through SelectionEvaluator so the genetic
algorithm, the baselines, and the reported statistics share one code path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .codebook import build_dft_codebook
from .core import BeamSelection, ComplexMatrix, DimensionError, SystemConfig, require_valid
from .metrics import (
    Objective,
    ObjectiveKind,
    min_rate_for_threshold,
    pa_output_power,
    rates,
    sinr_from_components,
)


class SearchSpaceError(ValueError):
    """The exhaustive search space is too large to enumerate."""


@dataclass(frozen=True)
class GaParams:
    """Genetic algorithm knobs, split out from SystemConfig for direct use."""

    L: int = 10                # population size
    S: int = 5                 # mutants of the Queen per generation
    N_it: int = 500            # generations
    mutation_fraction: float = 0.10

    def __post_init__(self) -> None:
        if self.L < 2:
            raise ValueError(f"population needs at least 2 members, got L={self.L}")
        if self.S < 0:
            raise ValueError(f"mutant count cannot be negative, got S={self.S}")
        if not self.S + 1 < self.L:
            raise ValueError(f"need S + 1 < L so each generation has a fresh member (S={self.S}, L={self.L})")
        if self.N_it < 1:
            raise ValueError(f"need at least one iteration, got N_it={self.N_it}")
        if not 0.0 < self.mutation_fraction <= 1.0:
            raise ValueError(f"mutation_fraction must be in (0, 1], got {self.mutation_fraction}")

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "GaParams":
        return cls(L=cfg.L, S=cfg.S, N_it=cfg.N_it, mutation_fraction=cfg.mutation_fraction)

    def n_replaced(self, n: int) -> int:
        """How many beam slots one mutation replaces: ceil(fraction * n), at least 1.

        The small bias term keeps products like 0.1 * 20 from ceiling up to 3
        due to binary representation.
        """
        return max(1, math.ceil(self.mutation_fraction * n - 1e-9))


@dataclass(frozen=True)
class EvalBatch:
    """Scores for a batch of candidate selections under one objective."""

    kind: ObjectiveKind
    user_rates: np.ndarray     # (B, N)
    raw: np.ndarray            # (B,) undiscounted objective scalar
    weighted_base: np.ndarray  # (B,) the sum that (1 - alpha*K) multiplies
    served: np.ndarray | None  # (B,) served user counts, outage objectives only
    total_sum: np.ndarray      # (B,) plain sum rate, used as the count tie-break

    def best_index(self) -> int:
        """Index of the best member; ties resolve to the lowest index."""
        if self.kind is ObjectiveKind.OUTAGE_COUNT:
            top = self.served.max()
            among = np.flatnonzero(self.served == top)
            return int(among[np.argmax(self.total_sum[among])])
        return int(np.argmax(self.raw))

    def comparable(self, i: int):
        """Orderable score of member i: float, or (served, sum rate) for the count objective."""
        if self.kind is ObjectiveKind.OUTAGE_COUNT:
            return int(self.served[i]), float(self.total_sum[i])
        return float(self.raw[i])


class SelectionEvaluator:
    """Scores beam selections against one channel realization.

    Precomputes the per-user gain of every codebook column once (|H W|^2),
    after which any selection's gain matrix is a pure row gather. The
    amplifier model is applied to the power budget here, so every search
    sees the post-amplifier SNR.
    """

    def __init__(self, cfg: SystemConfig, h: ComplexMatrix, objective: Objective):
        if h.shape != (cfg.N, cfg.M):
            raise DimensionError(f"channel shape {h.shape} does not match (N, M) = ({cfg.N}, {cfg.M})")
        cb = build_dft_codebook(cfg.M, cfg.N_vec)
        t = h.data @ cb.w.data
        # Row u holds every user's power gain from codebook column u.
        self._column_gains = np.ascontiguousarray((t.real**2 + t.imag**2).T)
        self._p_over_m = pa_output_power(cfg.P_linear, cfg.pa) / cfg.M
        self._min_rate = min_rate_for_threshold(objective.theta_dB)
        self.objective = objective
        self.n = cfg.N
        self.n_vec = cfg.N_vec

    def evaluate(self, selections: np.ndarray) -> EvalBatch:
        """Score a (B, N) array of 0-based selections."""
        sels = np.asarray(selections, dtype=np.int64)
        if sels.ndim == 1:
            sels = sels[None, :]
        # gains[b, j, i] = power user i receives from member b's j-th beam.
        gains = self._column_gains[sels]
        signal = np.einsum("bii->bi", gains)
        interference = gains.sum(axis=1) - signal
        snr = sinr_from_components(signal, interference, self._p_over_m)
        user_rates = rates(snr)
        total_sum = user_rates.sum(axis=1)
        kind = self.objective.kind
        served = None
        if kind is ObjectiveKind.THROUGHPUT:
            raw = total_sum
            base = total_sum
        else:
            served_mask = user_rates >= self._min_rate
            served = served_mask.sum(axis=1)
            base = np.where(served_mask, user_rates, 0.0).sum(axis=1)
            raw = base if kind is ObjectiveKind.OUTAGE_THROUGHPUT else served.astype(np.float64)
        return EvalBatch(kind=kind, user_rates=user_rates, raw=raw,
                         weighted_base=base, served=served, total_sum=total_sum)

    def rates_for(self, selection: np.ndarray) -> np.ndarray:
        """Per-user rates of one 0-based selection."""
        return self.evaluate(np.asarray(selection, dtype=np.int64)[None, :]).user_rates[0]


def _draw_selection(n: int, n_vec: int, rng: np.random.Generator) -> np.ndarray:
    """One uniform ordered selection of n distinct columns out of n_vec (0-based)."""
    return rng.choice(n_vec, size=n, replace=False).astype(np.int64)


def init_population(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Uniform random starting population, one selection per row (0-based)."""
    pop = np.empty((cfg.L, cfg.N), dtype=np.int64)
    for i in range(cfg.L):
        pop[i] = _draw_selection(cfg.N, cfg.N_vec, rng)
    return pop


def mutate(parent: np.ndarray, cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Mutate a 0-based selection by replacing ceil(mutation_fraction * N) slots.

    Replacement columns are drawn uniformly from the columns the chromosome is
    not currently using, so the child always stays a valid selection. When the
    codebook has no spare columns (N == N_vec) the fallback swaps two slots.
    """
    parent = np.asarray(parent, dtype=np.int64)
    n = parent.size
    child = parent.copy()
    if cfg.N_vec == n:
        i, j = rng.choice(n, size=2, replace=False)
        child[i], child[j] = child[j], child[i]
        return child
    n_rep = GaParams.from_config(cfg).n_replaced(n)
    positions = rng.choice(n, size=n_rep, replace=False)
    in_use = set(child.tolist())
    for p in positions:
        while True:
            candidate = int(rng.integers(cfg.N_vec))
            if candidate not in in_use:
                break
        in_use.discard(int(child[p]))
        in_use.add(candidate)
        child[p] = candidate
    return child


@dataclass(frozen=True)
class GaTrajectory:
    """Per-iteration record of a genetic algorithm run.

    queens holds the best selection of each iteration (1-based columns).
    raw_scores is the undiscounted objective scalar of that queen: sum rate,
    served-user rate sum, or served-user count depending on the objective.
    weighted_bases is the rate sum that the delay factor (1 - alpha*K)
    multiplies; for the count objective this is the served-rate sum, recorded
    for reporting even though the search ranks by count.
    """

    queens: np.ndarray         # (N_it, N) int64, 1-based
    raw_scores: np.ndarray     # (N_it,)
    weighted_bases: np.ndarray # (N_it,)
    alpha: float
    L: int

    @property
    def n_it(self) -> int:
        return self.raw_scores.size

    def evaluations_used(self, k_it: int) -> int:
        """Objective evaluations consumed after k_it iterations: L per iteration."""
        if not 1 <= k_it <= self.n_it:
            raise ValueError(f"iteration index must be in [1, {self.n_it}], got {k_it}")
        return self.L * k_it

    def weighted_scores(self, alpha: float | None = None) -> np.ndarray:
        """Delay-weighted score per iteration, optionally under a different alpha."""
        a = self.alpha if alpha is None else alpha
        k = np.arange(1, self.n_it + 1, dtype=np.float64)
        return (1.0 - a * k) * self.weighted_bases

    def queen(self, k_it: int) -> BeamSelection:
        """The best selection found by iteration k_it (1-based)."""
        if not 1 <= k_it <= self.n_it:
            raise ValueError(f"iteration index must be in [1, {self.n_it}], got {k_it}")
        return BeamSelection(tuple(int(u) for u in self.queens[k_it - 1]))

    @property
    def final_raw(self) -> float:
        return float(self.raw_scores[-1])


def ga_run(cfg: SystemConfig, h: ComplexMatrix, objective: Objective,
           rng: np.random.Generator) -> GaTrajectory:
    """Run the elitist genetic search on one channel realization.

    Each generation scores all L members, crowns the best as Queen (ties go to
    the lowest population index), then builds the next generation from the
    Queen, S of her mutants, and fresh uniform selections. Elitism makes the
    raw score non-decreasing across iterations.
    """
    require_valid(cfg)
    params = GaParams.from_config(cfg)
    ev = SelectionEvaluator(cfg, h, objective)
    pop = init_population(cfg, rng)
    queens = np.empty((params.N_it, cfg.N), dtype=np.int64)
    raw = np.empty(params.N_it, dtype=np.float64)
    base = np.empty(params.N_it, dtype=np.float64)
    for it in range(params.N_it):
        batch = ev.evaluate(pop)
        b = batch.best_index()
        queens[it] = pop[b]
        raw[it] = batch.raw[b]
        base[it] = batch.weighted_base[b]
        if it + 1 == params.N_it:
            break
        nxt = np.empty_like(pop)
        nxt[0] = pop[b]
        for s in range(params.S):
            nxt[1 + s] = mutate(pop[b], cfg, rng)
        for i in range(params.S + 1, params.L):
            nxt[i] = _draw_selection(cfg.N, cfg.N_vec, rng)
        pop = nxt
    return GaTrajectory(queens=queens + 1, raw_scores=raw, weighted_bases=base,
                        alpha=objective.alpha, L=params.L)


def search_space_size(cfg: SystemConfig) -> int:
    """Number of ordered selections of N distinct columns from N_vec."""
    return math.perm(cfg.N_vec, cfg.N)


def exhaustive_search(cfg: SystemConfig, h: ComplexMatrix, objective: Objective,
                      cap: int = 1_000_000):
    """Enumerate every ordered selection and return (best, score).

    The score is the undiscounted objective: a float for the rate objectives,
    a (served, sum rate) tuple for the count objective. Ties resolve to the
    first optimum in lexicographic enumeration order. Refuses to run when the
    space exceeds cap.
    """
    require_valid(cfg)
    size = search_space_size(cfg)
    if size > cap:
        raise SearchSpaceError(
            f"{size} ordered selections exceed the exhaustive cap of {cap}; "
            f"shrink N_vec/N or raise cap explicitly"
        )
    ev = SelectionEvaluator(cfg, h, objective)
    best_sel: np.ndarray | None = None
    best_cmp = None
    perms = itertools.permutations(range(cfg.N_vec), cfg.N)
    while True:
        chunk = list(itertools.islice(perms, 4096))
        if not chunk:
            break
        arr = np.asarray(chunk, dtype=np.int64)
        batch = ev.evaluate(arr)
        i = batch.best_index()
        cmp = batch.comparable(i)
        if best_cmp is None or cmp > best_cmp:
            best_cmp = cmp
            best_sel = arr[i]
    return BeamSelection.from_array(best_sel), best_cmp


def random_search(cfg: SystemConfig, h: ComplexMatrix, objective: Objective,
                  budget: int, rng: np.random.Generator):
    """Score `budget` uniform selections and return (best, score).

    The matched-budget baseline for the genetic search is budget = L * N_it.
    Ties resolve to the earliest draw.
    """
    require_valid(cfg)
    if budget < 1:
        raise ValueError(f"budget must be at least 1, got {budget}")
    ev = SelectionEvaluator(cfg, h, objective)
    best_sel: np.ndarray | None = None
    best_cmp = None
    remaining = budget
    while remaining > 0:
        b = min(remaining, 4096)
        arr = np.empty((b, cfg.N), dtype=np.int64)
        for i in range(b):
            arr[i] = _draw_selection(cfg.N, cfg.N_vec, rng)
        batch = ev.evaluate(arr)
        i = batch.best_index()
        cmp = batch.comparable(i)
        if best_cmp is None or cmp > best_cmp:
            best_cmp = cmp
            best_sel = arr[i]
        remaining -= b
    return BeamSelection.from_array(best_sel), best_cmp
