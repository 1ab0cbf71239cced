"""Policy and structure search.

Per-variable threshold selection is exact: every score term touched by one
variable's policy decomposes into a per-interval cost plus a term depending
only on the interval count, so the best threshold subset of each size falls
out of a segmentation dynamic program over the candidate cut points.
Coordinate ascent sweeps variables with that optimizer until a sweep stops
paying, and greedy edge edits interleave re-discretization with structure
moves.  Ties always resolve toward fewer intervals, then lexicographically
smaller threshold sets.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .dataset import (
    Dataset,
    DiscretizationPolicy,
    InternalError,
    NetworkPolicy,
    ValidationError,
    apply_policy,
    discretize_all,
    trivial_network_policy,
    validate_network_policy,
)
from .graph import (
    DagStructure,
    add_edge,
    ancestors,
    d_separated,
    empty_structure,
    has_path,
    remove_edge,
    reverse_edge,
)
from .scoring import (
    BDEU,
    MULTINOMIAL_DENSITY,
    PriorSpec,
    discrete_family_score,
    family_counts,
    interval_count_log_prior,
    local_score,
    network_score,
)

EQFREQ = "eqfreq"
EQWIDTH = "eqwidth"
GIVEN = "given"

EXHAUSTIVE_CANDIDATE_LIMIT = 20

# Distinct threshold sets can score identically in exact arithmetic, for
# example when the emission depends only on interval sizes; float rounding
# then orders them arbitrarily.  Scores this close count as tied so that
# the fewer-intervals-then-lexicographic preference decides instead.
TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class InitSpec:
    """Starting discretization: equal-frequency or equal-width with ``r0``
    intervals, or a caller-supplied policy."""

    kind: str = EQFREQ
    r0: int = 3
    policy: NetworkPolicy | None = None

    def __post_init__(self) -> None:
        if self.kind not in (EQFREQ, EQWIDTH, GIVEN):
            raise ValidationError(
                f"init kind must be {EQFREQ!r}, {EQWIDTH!r} or {GIVEN!r}, "
                f"got {self.kind!r}"
            )
        if self.kind == GIVEN:
            if self.policy is None:
                raise ValidationError("init kind 'given' needs a policy")
        elif self.r0 < 2:
            raise ValidationError(f"initial interval count must be >= 2, got {self.r0}")


@dataclass(frozen=True)
class SearchConfig:
    """Knobs shared by the policy and structure search drivers.

    ``r_max`` of ``None`` resolves to ``min(12, n_cases - 1)``.  ``epsilon``
    is the minimum total-score gain that keeps either loop going.  ``seed``
    only breaks ties among equally scored structure edits; it never affects
    scores.  ``threads`` caps worker parallelism (the current implementation
    evaluates sequentially, which always respects the cap).
    """

    r_max: int | None = None
    epsilon: float = 1e-6
    max_sweeps: int = 50
    init: InitSpec = InitSpec()
    structure_search: bool = True
    max_parents: int = 3
    interleave_period: int = 1
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.r_max is not None and self.r_max < 1:
            raise ValidationError(f"r_max must be >= 1, got {self.r_max}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_sweeps < 1:
            raise ValidationError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.max_parents < 1:
            raise ValidationError(f"max_parents must be >= 1, got {self.max_parents}")
        if self.interleave_period < 1:
            raise ValidationError(
                f"interleave_period must be >= 1, got {self.interleave_period}"
            )
        if self.threads < 1:
            raise ValidationError(f"threads must be >= 1, got {self.threads}")

    def resolved_r_max(self, n_cases: int) -> int:
        if self.r_max is not None:
            return self.r_max
        return max(1, min(12, n_cases - 1))


class SearchTrace:
    """Accepted-update log; totals are nondecreasing by construction."""

    def __init__(self) -> None:
        self.records: list[dict] = []
        self.termination: str = ""
        self.final_total: float = float("nan")

    def add(self, kind: str, **fields) -> None:
        self.records.append({"kind": kind, **fields})

    def extend(self, other: "SearchTrace") -> None:
        self.records.extend(other.records)

    def totals(self) -> list[float]:
        return [r["total"] for r in self.records if "total" in r]

    def to_jsonl(self) -> str:
        lines = [json.dumps(r, sort_keys=True) for r in self.records]
        lines.append(
            json.dumps(
                {"kind": "termination", "reason": self.termination},
                sort_keys=True,
            )
        )
        return "\n".join(lines) + "\n"


def _nearest_index(values: np.ndarray, target: float) -> int:
    # First minimizer wins, so ties snap toward the smaller candidate.
    return int(np.argmin(np.abs(values - target)))


def initial_policy(dataset: Dataset, config: SearchConfig) -> NetworkPolicy:
    """Starting policies per the config; thresholds snap to candidates."""
    init = config.init
    if init.kind == GIVEN:
        assert init.policy is not None
        validate_network_policy(init.policy, dataset)
        return init.policy
    policies = list(trivial_network_policy(dataset).policies)
    for i in dataset.continuous_indices():
        cands = dataset.candidate_thresholds(i)
        if len(cands) == 0:
            continue
        lo, hi = dataset.policy_bounds(i)
        n = dataset.n_cases
        picked: set[int] = set()
        if init.kind == EQFREQ:
            sorted_vals = dataset.column(i)[dataset.sort_index(i)]
            cut_pos = np.searchsorted(sorted_vals, cands, side="left")
            for k in range(1, init.r0):
                target = min(max(round(k * n / init.r0), 1), n - 1)
                picked.add(_nearest_index(cut_pos.astype(np.float64), target))
        else:
            for k in range(1, init.r0):
                target = lo + k * (hi - lo) / init.r0
                picked.add(_nearest_index(cands, target))
        thresholds = tuple(cands[sorted(picked)])
        policies[i] = DiscretizationPolicy(thresholds, lo, hi)
    return NetworkPolicy(tuple(policies))


class _CutProblem:
    """Interval-decomposed local score of one continuous variable.

    With cut points ``0..M+1`` (outer bounds plus the M candidates), every
    policy is a chain of cuts and its local score splits into a sum of
    per-interval costs, a per-row penalty depending only on the interval
    count, and the interval-count prior.  Interval costs live in a matrix
    ``G[u, v]``; under per-cell pseudo-counts the matrix is shared by every
    interval count, under shared sample size it is rebuilt per count.
    """

    def __init__(
        self,
        i: int,
        policy: NetworkPolicy,
        structure: DagStructure,
        dataset: Dataset,
        prior: PriorSpec,
    ) -> None:
        self.prior = prior
        self.n_cases = dataset.n_cases
        column = dataset.column(i)
        order = dataset.sort_index(i)
        sorted_vals = column[order]
        cands = dataset.candidate_thresholds(i)
        lo, hi = dataset.policy_bounds(i)
        self.m = len(cands)
        self.cands = cands
        self.lower, self.upper = lo, hi

        cut_pos = np.searchsorted(sorted_vals, cands, side="left")
        self.positions = np.concatenate(([0], cut_pos, [self.n_cases]))
        self.values = np.concatenate(([lo], cands, [hi]))
        fine_seg = np.searchsorted(cut_pos, np.arange(self.n_cases), side="right")

        def prefix(states: np.ndarray, n_states: int) -> np.ndarray:
            flat = states * (self.m + 1) + fine_seg
            fine = np.bincount(flat, minlength=n_states * (self.m + 1))
            fine = fine.reshape(n_states, self.m + 1)
            out = np.zeros((n_states, self.m + 2), dtype=np.int64)
            np.cumsum(fine, axis=1, out=out[:, 1:])
            return out

        codes_cache: dict[int, np.ndarray] = {}

        def sorted_codes(v: int) -> np.ndarray:
            if v not in codes_cache:
                codes_cache[v] = apply_policy(dataset.column(v), policy[v])[order]
            return codes_cache[v]

        def config_states(members: Sequence[int]) -> tuple[np.ndarray, int]:
            if not members:
                return np.zeros(self.n_cases, dtype=np.int64), 1
            dims = [policy[p].arity for p in members]
            states = np.ravel_multi_index([sorted_codes(p) for p in members], dims)
            return states.astype(np.int64), int(np.prod(dims))

        own_states, self.q_own = config_states(sorted(structure.parents[i]))
        self.own_prefix = prefix(own_states, self.q_own)
        self.own_totals = self.own_prefix[:, -1]

        self.child_tables: list[tuple[int, int, np.ndarray, np.ndarray]] = []
        for child in sorted(structure.children[i]):
            r_child = policy[child].arity
            others = sorted(structure.parents[child] - {i})
            other_states, q_other = config_states(others)
            joint = other_states * r_child + sorted_codes(child)
            cell_prefix = prefix(joint, q_other * r_child)
            margin_prefix = cell_prefix.reshape(q_other, r_child, -1).sum(axis=1)
            self.child_tables.append((r_child, q_other, cell_prefix, margin_prefix))

        self.distinct, occ = np.unique(sorted_vals, return_counts=True)
        row_distinct = np.searchsorted(self.distinct, sorted_vals)
        d_pos = np.empty(self.m + 2, dtype=np.int64)
        for m, p in enumerate(self.positions):
            d_pos[m] = row_distinct[p] if p < self.n_cases else len(self.distinct)
        self.d_pos = d_pos
        self.occ = occ

        size = self.m + 2
        cols = np.arange(size)
        self.valid = cols[None, :] > cols[:, None]
        self.counts = np.maximum(
            self.positions[None, :] - self.positions[:, None], 0
        )
        self._g_cache: dict[int | None, np.ndarray] = {}

    def _lut(self, a: float) -> np.ndarray:
        return gammaln(a + np.arange(self.n_cases + 1))

    def _slice_terms(self, prefix: np.ndarray, a: float, sign: int) -> np.ndarray:
        """Sum over non-empty states of ``sign * (lnG(a + n) - lnG(a))``."""
        lut = self._lut(a)
        out = np.zeros_like(self.counts, dtype=np.float64)
        for row in prefix:
            if row[-1] == 0:
                continue
            n = np.maximum(row[None, :] - row[:, None], 0)
            out += lut[n]
            out -= lut[0]
        return sign * out

    def _density_matrix(self) -> np.ndarray:
        """Per-interval emission cost for every cut pair."""
        if self.prior.density_model != MULTINOMIAL_DENSITY:
            widths = self.values[None, :] - self.values[:, None]
            safe = np.where(widths > 0, widths, 1.0)
            return -self.counts * np.log(safe)
        k = np.maximum(self.d_pos[None, :] - self.d_pos[:, None], 0)
        if self.prior.dirichlet_mode == BDEU:
            return self._bdeu_multinomial_matrix(k)
        a = self.prior.alpha
        cum = np.concatenate(([0.0], np.cumsum(gammaln(a + self.occ) - gammaln(a))))
        cells = cum[self.d_pos][None, :] - cum[self.d_pos][:, None]
        group_a = a * np.maximum(k, 1)
        margins = gammaln(group_a) - gammaln(group_a + self.counts)
        return np.where(k > 0, margins + cells, 0.0)

    def _bdeu_multinomial_matrix(self, k: np.ndarray) -> np.ndarray:
        # Group pseudo-counts depend on the interval's member count, so no
        # prefix trick applies; quadratic loop, intended for small problems.
        out = np.zeros_like(self.counts, dtype=np.float64)
        size = self.m + 2
        for u in range(size):
            for v in range(u + 1, size):
                members = self.occ[self.d_pos[u]: self.d_pos[v]]
                if len(members) == 0:
                    continue
                a = self.prior.ess / len(members)
                group_a = a * len(members)
                out[u, v] = float(
                    gammaln(group_a)
                    - gammaln(group_a + members.sum())
                    + np.sum(gammaln(a + members) - gammaln(a))
                )
        return out

    def interval_matrix(self, r: int | None) -> np.ndarray:
        """Cost matrix ``G``; ``r`` is needed only for shared sample size."""
        key = r if self.prior.dirichlet_mode == BDEU else None
        cached = self._g_cache.get(key)
        if cached is not None:
            return cached
        r_for_cells = 1 if key is None else key
        g = self._density_matrix()
        a_own = (
            self.prior.alpha
            if key is None
            else self.prior.cell_weight(r_for_cells, self.q_own)
        )
        g += self._slice_terms(self.own_prefix, a_own, 1)
        for r_child, q_other, cell_prefix, margin_prefix in self.child_tables:
            a_cell = (
                self.prior.alpha
                if key is None
                else self.prior.cell_weight(r_child, r_for_cells * q_other)
            )
            g += self._slice_terms(cell_prefix, a_cell, 1)
            g += self._slice_terms(margin_prefix, a_cell * r_child, -1)
        g = np.where(self.valid, g, -np.inf)
        self._g_cache[key] = g
        return g

    def count_penalty(self, r: int) -> float:
        """Own-family row terms; they depend only on the interval count."""
        a_row = self.prior.cell_weight(r, self.q_own) * r
        return float(
            np.sum(gammaln(a_row) - gammaln(a_row + self.own_totals))
        )

    def count_prior(self, r: int) -> float:
        return interval_count_log_prior(r, self.m, self.prior, self.n_cases)

    def _dp_layers(self, g: np.ndarray, k_max: int) -> list[np.ndarray]:
        size = self.m + 2
        end = size - 1
        layers: list[np.ndarray] = [np.full(size, -np.inf)]
        layers.append(g[:, end].copy())
        if k_max >= 2:
            interior = np.arange(1, self.m + 1)
            rows = np.arange(size)[:, None]
            mask = interior[None, :] > rows
            for _ in range(2, k_max + 1):
                scores = g[:, 1: self.m + 1] + layers[-1][1: self.m + 1][None, :]
                scores = np.where(mask, scores, -np.inf)
                layers.append(scores.max(axis=1, initial=-np.inf))
        return layers

    def _reconstruct(
        self, g: np.ndarray, layers: list[np.ndarray], r: int
    ) -> tuple[float, ...]:
        cuts: list[int] = []
        u = 0
        for k in range(r, 1, -1):
            scores = g[u, 1: self.m + 1] + layers[k - 1][1: self.m + 1]
            scores = np.where(np.arange(1, self.m + 1) > u, scores, -np.inf)
            top = scores.max(initial=-np.inf)
            if not np.isfinite(top):
                raise InternalError("segmentation backtrack hit an infeasible cut")
            # Earliest near-maximal cut keeps the thresholds lex-smallest
            # whenever several suffix solutions tie in exact arithmetic.
            v = int(np.argmax(scores >= top - TIE_TOLERANCE)) + 1
            cuts.append(v)
            u = v
        return tuple(float(self.cands[c - 1]) for c in cuts)

    def solve(self, r_cap: int) -> DiscretizationPolicy:
        per_r = self.prior.dirichlet_mode == BDEU
        totals: list[float] = []
        shared: tuple[np.ndarray, list[np.ndarray]] | None = None
        if not per_r:
            g = self.interval_matrix(None)
            shared = (g, self._dp_layers(g, r_cap))
        for r in range(1, r_cap + 1):
            if per_r:
                g = self.interval_matrix(r)
                layers = self._dp_layers(g, r)
            else:
                g, layers = shared
            totals.append(
                layers[r][0] + self.count_penalty(r) + self.count_prior(r)
            )
        best_total = max(totals)
        if not np.isfinite(best_total):
            return DiscretizationPolicy((), self.lower, self.upper)
        r = 1 + next(
            k for k, t in enumerate(totals) if t >= best_total - TIE_TOLERANCE
        )
        if per_r:
            g = self.interval_matrix(r)
            layers = self._dp_layers(g, r)
        else:
            g, layers = shared
        thresholds = self._reconstruct(g, layers, r)
        return DiscretizationPolicy(thresholds, self.lower, self.upper)


def optimize_variable(
    i: int,
    policy: NetworkPolicy,
    structure: DagStructure,
    dataset: Dataset,
    prior: PriorSpec,
    config: SearchConfig,
) -> DiscretizationPolicy:
    """Best threshold policy for variable ``i`` with everything else fixed.

    Exact over all candidate-threshold subsets with at most
    ``r_max - 1`` thresholds.  Scores within ``TIE_TOLERANCE`` count as
    tied; ties prefer fewer intervals, then the lexicographically
    smallest threshold sequence.
    """
    if not dataset.is_continuous(i):
        raise ValidationError(
            f"variable {dataset.names[i]!r} is discrete; nothing to optimize"
        )
    lo, hi = dataset.policy_bounds(i)
    m = len(dataset.candidate_thresholds(i))
    r_cap = min(config.resolved_r_max(dataset.n_cases), m + 1)
    if m == 0 or r_cap <= 1:
        return DiscretizationPolicy((), lo, hi)
    problem = _CutProblem(i, policy, structure, dataset, prior)
    return problem.solve(r_cap)


def exhaustive_policy_search(
    i: int,
    policy: NetworkPolicy,
    structure: DagStructure,
    dataset: Dataset,
    prior: PriorSpec,
    r_max: int,
) -> tuple[DiscretizationPolicy, float]:
    """Score every admissible threshold subset of variable ``i`` directly.

    Independent reference for :func:`optimize_variable`; subsets are visited
    by size then lexicographic order, and the first one scoring within
    ``TIE_TOLERANCE`` of the maximum wins, so ties break identically.
    """
    if not dataset.is_continuous(i):
        raise ValidationError(
            f"variable {dataset.names[i]!r} is discrete; nothing to optimize"
        )
    cands = dataset.candidate_thresholds(i)
    m = len(cands)
    if m > EXHAUSTIVE_CANDIDATE_LIMIT:
        raise ValidationError(
            f"refusing exhaustive search over {m} candidates "
            f"(limit {EXHAUSTIVE_CANDIDATE_LIMIT})"
        )
    lo, hi = dataset.policy_bounds(i)

    def subsets() -> Iterable[tuple[int, ...]]:
        for size in range(0, min(r_max - 1, m) + 1):
            yield from itertools.combinations(range(m), size)

    def scored(combo: tuple[int, ...]) -> tuple[DiscretizationPolicy, float]:
        cand = DiscretizationPolicy(
            tuple(float(cands[c]) for c in combo), lo, hi
        )
        return cand, local_score(
            i, policy.with_policy(i, cand), structure, dataset, prior
        )

    scores = [scored(combo)[1] for combo in subsets()]
    best_score = max(scores)
    winner = next(
        combo
        for combo, score in zip(subsets(), scores)
        if score >= best_score - TIE_TOLERANCE
    )
    best_policy, score = scored(winner)
    return best_policy, score


def affected_set(
    structure: DagStructure, i: int, discrete_vars: Iterable[int]
) -> set[int]:
    """Continuous variables whose optimal policy can shift with variable ``i``.

    A variable is unaffected when it is d-separated from ``i`` by the empty
    set or by discrete variables alone; checking the discrete variables that
    are ancestors of either endpoint decides the latter.  Used only to order
    re-optimization; correctness never depends on it.
    """
    d = set(discrete_vars)
    anc_i = ancestors(structure, i)
    out: set[int] = set()
    for j in range(structure.n):
        if j == i or j in d:
            continue
        if d_separated(structure, i, j, ()):
            continue
        z = (d - {i, j}) & (anc_i | ancestors(structure, j))
        if z and d_separated(structure, i, j, z):
            continue
        out.add(j)
    return out


def coordinate_ascent(
    policy: NetworkPolicy,
    structure: DagStructure,
    dataset: Dataset,
    prior: PriorSpec,
    config: SearchConfig,
    subset: Iterable[int] | None = None,
    total0: float | None = None,
) -> tuple[NetworkPolicy, SearchTrace]:
    """Sweep continuous variables, re-optimizing each policy in turn.

    Variables are visited in topological order; each accepted change
    re-queues the variables it can affect within the same sweep.  Stops when
    a full sweep gains less than ``epsilon`` or after ``max_sweeps``.
    """
    validate_network_policy(policy, dataset)
    discrete_vars = set(dataset.discrete_indices())
    universe = [
        v
        for v in structure.topo_order
        if v not in discrete_vars and (subset is None or v in set(subset))
    ]
    trace = SearchTrace()
    total = (
        network_score(policy, structure, dataset, prior).total
        if total0 is None
        else total0
    )
    trace.termination = "max_sweeps"
    universe_set = set(universe)
    for sweep in range(1, config.max_sweeps + 1):
        sweep_start = total
        queue = deque(universe)
        queued = set(universe)
        while queue:
            v = queue.popleft()
            queued.discard(v)
            candidate = optimize_variable(v, policy, structure, dataset, prior, config)
            if candidate.thresholds == policy[v].thresholds:
                continue
            old_local = local_score(v, policy, structure, dataset, prior)
            updated = policy.with_policy(v, candidate)
            new_local = local_score(v, updated, structure, dataset, prior)
            delta = new_local - old_local
            if delta <= 0:
                continue
            old_r = policy[v].arity
            policy = updated
            total += delta
            trace.add(
                "policy",
                variable=v,
                old_r=old_r,
                new_r=candidate.arity,
                delta=delta,
                total=total,
            )
            for j in sorted(affected_set(structure, v, discrete_vars)):
                if j in universe_set and j not in queued:
                    queue.append(j)
                    queued.add(j)
        trace.add("sweep", sweep=sweep, total=total)
        if total - sweep_start < config.epsilon:
            trace.termination = "converged"
            break
    trace.final_total = total
    return policy, trace


def _edit_candidates(
    structure: DagStructure, max_parents: int
) -> list[tuple[str, int, int]]:
    out: list[tuple[str, int, int]] = []
    n = structure.n
    for u in range(n):
        for v in range(n):
            if u == v or u in structure.parents[v]:
                continue
            if len(structure.parents[v]) >= max_parents:
                continue
            if has_path(structure, v, u):
                continue
            out.append(("add", u, v))
    for u, v in structure.edges():
        out.append(("delete", u, v))
    for u, v in structure.edges():
        if len(structure.parents[u]) >= max_parents:
            continue
        if has_path(remove_edge(structure, u, v), u, v):
            continue
        out.append(("reverse", u, v))
    return out


def _apply_edit(
    structure: DagStructure, edit: tuple[str, int, int]
) -> DagStructure:
    op, u, v = edit
    if op == "add":
        return add_edge(structure, u, v)
    if op == "delete":
        return remove_edge(structure, u, v)
    return reverse_edge(structure, u, v)


def hill_climb_structure(
    dataset: Dataset,
    prior: PriorSpec,
    config: SearchConfig,
) -> tuple[DagStructure, NetworkPolicy, SearchTrace]:
    """Greedy edge edits from the empty graph, interleaved with ascent.

    Each round scores every legal single-edge addition, deletion, and
    reversal under the current discretization, applies the best one when it
    gains more than ``epsilon``, and re-optimizes the policies the touched
    endpoints can affect (every ``interleave_period`` accepted edits).
    Edits are scanned from the initial coarse discretization rather than a
    pre-optimized one: optimizing policies under the empty graph first can
    collapse dependent variables to single intervals and hide every edge.
    The loop ends at a joint fixed point where no edit helps and a full
    policy sweep accepts nothing.
    """
    n = dataset.n_variables
    structure = empty_structure(n)
    policy = initial_policy(dataset, config)
    trace = SearchTrace()
    total = network_score(policy, structure, dataset, prior).total
    rng = np.random.default_rng(config.seed)
    discrete_vars = set(dataset.discrete_indices())
    pending = 0

    def family_term(codes, arities, child, parent_set) -> float:
        return discrete_family_score(
            family_counts(codes, arities, child, sorted(parent_set)), prior
        )

    while True:
        codes = discretize_all(dataset, policy)
        arities = policy.arities()
        current = [
            family_term(codes, arities, v, structure.parents[v]) for v in range(n)
        ]
        candidates = _edit_candidates(structure, config.max_parents)
        order = rng.permutation(len(candidates))
        best_edit: tuple[str, int, int] | None = None
        best_delta = -np.inf
        for idx in order:
            op, u, v = candidates[idx]
            if op == "add":
                delta = (
                    family_term(codes, arities, v, structure.parents[v] | {u})
                    - current[v]
                )
            elif op == "delete":
                delta = (
                    family_term(codes, arities, v, structure.parents[v] - {u})
                    - current[v]
                )
            else:
                delta = (
                    family_term(codes, arities, v, structure.parents[v] - {u})
                    - current[v]
                    + family_term(codes, arities, u, structure.parents[u] | {v})
                    - current[u]
                )
            if delta > best_delta:
                best_delta = delta
                best_edit = (op, u, v)
        if best_edit is None or best_delta <= config.epsilon:
            # No edit helps under the current policies; re-optimize them all
            # and rescan, since better thresholds can expose new edits.
            policy, sub_trace = coordinate_ascent(
                policy, structure, dataset, prior, config, total0=total
            )
            trace.extend(sub_trace)
            total = sub_trace.final_total
            pending = 0
            moved = any(r["kind"] == "policy" for r in sub_trace.records)
            if moved:
                continue
            break
        structure = _apply_edit(structure, best_edit)
        total += best_delta
        op, u, v = best_edit
        trace.add("edge", op=op, parent=u, child=v, delta=float(best_delta), total=total)
        pending += 1
        if pending >= config.interleave_period:
            touched = (
                affected_set(structure, u, discrete_vars)
                | affected_set(structure, v, discrete_vars)
                | ({u, v} - discrete_vars)
            )
            policy, sub_trace = coordinate_ascent(
                policy,
                structure,
                dataset,
                prior,
                config,
                subset=touched,
                total0=total,
            )
            trace.extend(sub_trace)
            total = sub_trace.final_total
            pending = 0
    trace.termination = "no_improving_edit"
    trace.final_total = total
    return structure, policy, trace
