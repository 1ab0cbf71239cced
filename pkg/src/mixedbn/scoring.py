"""Bayesian scores for discretized networks over mixed data.

Every score is a natural logarithm.  The discrete part of a family score is
the Dirichlet-multinomial marginal likelihood of the child codes given each
parent configuration.  The continuous part of a variable's score is the
within-interval emission term: by default the log-density of a uniform draw
over each interval, alternatively a within-interval multinomial marginal over
the distinct observed values.  Uniform emission drops the constant
differential element shared by every policy of a column, so continuous
components are log-densities; rankings are unaffected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .dataset import (
    Dataset,
    DiscretizationPolicy,
    NetworkPolicy,
    ValidationError,
    apply_policy,
    candidate_thresholds,
    discretize_all,
)
from .graph import DagStructure

K2 = "k2"
BDEU = "bdeu"
UNIFORM_PRIOR = "uniform"
POISSON_PRIOR = "poisson"
UNIFORM_DENSITY = "uniform"
MULTINOMIAL_DENSITY = "multinomial"


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    if x <= 0:
        raise ValidationError(f"log_gamma needs a positive argument, got {x}")
    return float(gammaln(x))


@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters shared by every family score.

    ``dirichlet_mode`` selects how pseudo-counts scale: ``k2`` assigns
    ``alpha`` to every cell, ``bdeu`` divides ``ess`` evenly so that every
    family sees the same equivalent sample size.  ``policy_prior`` weights
    threshold policies: ``uniform`` is flat, ``poisson`` puts a truncated
    Poisson on the interval count combined with a uniform choice of threshold
    subset.  ``density_model`` selects the within-interval emission term.
    """

    dirichlet_mode: str = K2
    alpha: float = 1.0
    ess: float = 1.0
    policy_prior: str = UNIFORM_PRIOR
    poisson_rate: float = 2.0
    density_model: str = UNIFORM_DENSITY

    def __post_init__(self) -> None:
        if self.dirichlet_mode not in (K2, BDEU):
            raise ValidationError(
                f"dirichlet_mode must be {K2!r} or {BDEU!r}, got {self.dirichlet_mode!r}"
            )
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValidationError(f"alpha must be positive, got {self.alpha}")
        if not (self.ess > 0 and math.isfinite(self.ess)):
            raise ValidationError(f"ess must be positive, got {self.ess}")
        if self.policy_prior not in (UNIFORM_PRIOR, POISSON_PRIOR):
            raise ValidationError(
                f"policy_prior must be {UNIFORM_PRIOR!r} or {POISSON_PRIOR!r}, "
                f"got {self.policy_prior!r}"
            )
        if self.policy_prior == POISSON_PRIOR and not self.poisson_rate >= 2:
            raise ValidationError(
                f"poisson_rate must be at least 2, got {self.poisson_rate}"
            )
        if self.density_model not in (UNIFORM_DENSITY, MULTINOMIAL_DENSITY):
            raise ValidationError(
                f"density_model must be {UNIFORM_DENSITY!r} or "
                f"{MULTINOMIAL_DENSITY!r}, got {self.density_model!r}"
            )

    def cell_weight(self, r: int, q: int) -> float:
        """Dirichlet pseudo-count per cell of an ``r`` by ``q`` family."""
        if self.dirichlet_mode == K2:
            return self.alpha
        return self.ess / (r * q)


@dataclass(frozen=True)
class FamilyCounts:
    """Contingency table of one child against its parent configurations.

    ``table[j, k]`` counts cases with parent configuration ``j`` and child
    code ``k``; ``margins[j]`` is the row sum.
    """

    r: int
    q: int
    table: np.ndarray
    margins: np.ndarray

    @property
    def n_cases(self) -> int:
        return int(self.margins.sum())


def family_counts(
    codes: np.ndarray,
    arities: Sequence[int],
    child: int,
    parents: Sequence[int],
) -> FamilyCounts:
    """Tally child codes against joint parent configurations.

    Parent configurations are mixed-radix numbers over the given parent list
    with the first parent most significant.
    """
    n_cases = codes.shape[0]
    r = int(arities[child])
    if parents:
        dims = [int(arities[p]) for p in parents]
        cfg = np.ravel_multi_index([codes[:, p] for p in parents], dims)
        q = int(np.prod(dims))
    else:
        cfg = np.zeros(n_cases, dtype=np.int64)
        q = 1
    flat = cfg * r + codes[:, child]
    table = np.bincount(flat, minlength=q * r).reshape(q, r)
    margins = table.sum(axis=1)
    table.setflags(write=False)
    margins.setflags(write=False)
    return FamilyCounts(r, q, table, margins)


def discrete_family_score(counts: FamilyCounts, prior: PriorSpec) -> float:
    """Log marginal likelihood of the child codes given parent configurations.

    Each parent configuration contributes the log ratio of Dirichlet
    normalizers before and after observing its row of counts.  A child with a
    single code contributes exactly zero for any sample size.
    """
    a_cell = prior.cell_weight(counts.r, counts.q)
    a_row = a_cell * counts.r
    row_part = np.sum(gammaln(a_row) - gammaln(a_row + counts.margins))
    cell_part = np.sum(gammaln(a_cell + counts.table) - gammaln(a_cell))
    return float(row_part + cell_part)


def continuous_component(
    column: np.ndarray, policy: DiscretizationPolicy
) -> float:
    """Log-density of the column under per-interval uniform emission.

    Each case contributes the log reciprocal width of its interval.  The
    degenerate single-point policy of a constant column contributes zero.
    """
    if policy.trivial:
        return 0.0
    if policy.lower == policy.upper:
        return 0.0
    codes = apply_policy(column, policy)
    counts = np.bincount(codes, minlength=policy.arity)
    widths = np.diff(policy.interval_edges())
    return float(-np.sum(counts * np.log(widths)))


def _grouped_marginal(
    value_counts: np.ndarray, groups: np.ndarray, prior: PriorSpec
) -> float:
    """Sum of within-group Dirichlet-multinomial marginals.

    ``value_counts[v]`` is the number of cases taking value ``v`` and
    ``groups[v]`` the group that value belongs to.  Every group is scored as
    its own family over its member values.
    """
    n_groups = int(groups.max()) + 1 if len(groups) else 0
    sizes = np.bincount(groups, minlength=n_groups)
    if (sizes == 0).any():
        empty = int(np.flatnonzero(sizes == 0)[0])
        raise ValidationError(f"grouping leaves group {empty} empty")
    totals = np.bincount(groups, weights=value_counts, minlength=n_groups)
    score = 0.0
    for g in range(n_groups):
        members = value_counts[groups == g]
        a_cell = prior.cell_weight(int(sizes[g]), 1)
        a_group = a_cell * sizes[g]
        score += gammaln(a_group) - gammaln(a_group + totals[g])
        score += float(np.sum(gammaln(a_cell + members) - gammaln(a_cell)))
    return float(score)


def abstraction_component(
    column: np.ndarray, grouping: Sequence[int], prior: PriorSpec
) -> float:
    """Within-group marginal of a discrete column under a value grouping.

    ``grouping[v]`` names the group of original value ``v``; groups must be
    numbered ``0..G-1`` with no empty group.  The identity grouping scores
    exactly zero.
    """
    groups = np.asarray(grouping, dtype=np.int64)
    if groups.ndim != 1 or len(groups) == 0:
        raise ValidationError("grouping must be a non-empty 1-d sequence")
    if groups.min() < 0:
        raise ValidationError("group ids must be non-negative")
    codes = np.asarray(column, dtype=np.int64)
    if codes.min() < 0 or codes.max() >= len(groups):
        raise ValidationError(
            f"column contains values outside 0..{len(groups) - 1}"
        )
    value_counts = np.bincount(codes, minlength=len(groups))
    return _grouped_marginal(value_counts, groups, prior)


def multinomial_component(
    column: np.ndarray, policy: DiscretizationPolicy, prior: PriorSpec
) -> float:
    """Within-interval multinomial marginal over distinct observed values.

    Replaces the uniform emission term when the prior selects the
    multinomial density model: each interval is scored as a
    Dirichlet-multinomial family over the distinct values it contains.
    """
    if policy.trivial:
        return 0.0
    values = np.asarray(column, dtype=np.float64)
    distinct, counts = np.unique(values, return_counts=True)
    groups = apply_policy(distinct, policy)
    # Intervals holding no data are legal here; compact group ids first.
    present = np.unique(groups)
    remap = np.searchsorted(present, groups)
    return _grouped_marginal(counts, remap, prior)


def emission_component(
    column: np.ndarray, policy: DiscretizationPolicy, prior: PriorSpec
) -> float:
    """Continuous component under the prior's density model."""
    if prior.density_model == MULTINOMIAL_DENSITY:
        return multinomial_component(column, policy, prior)
    return continuous_component(column, policy)


def _log_comb(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def interval_count_log_prior(
    r: int, n_candidates: int, prior: PriorSpec, n_cases: int
) -> float:
    """Log prior mass of any ``r``-interval policy over a given column.

    Zero in the uniform mode.  The Poisson mode puts a Poisson law with the
    configured rate, truncated to interval counts ``2..n_cases - 1``, on the
    interval count, and spreads each count's mass uniformly over the
    threshold subsets of that size; single-interval policies get no mass
    under it.
    """
    if r - 1 > n_candidates:
        raise ValidationError(
            f"policy uses {r - 1} thresholds but only {n_candidates} candidates exist"
        )
    if prior.policy_prior == UNIFORM_PRIOR:
        return 0.0
    top = n_cases - 1
    if prior.poisson_rate > max(top, 2):
        raise ValidationError(
            f"poisson_rate {prior.poisson_rate} exceeds the truncation "
            f"bound {top}"
        )
    if r < 2 or r > top:
        return float("-inf")
    support = np.arange(2, top + 1)
    log_weights = support * math.log(prior.poisson_rate) - gammaln(support + 1)
    log_pmf = r * math.log(prior.poisson_rate) - float(gammaln(r + 1))
    return log_pmf - float(logsumexp(log_weights)) - _log_comb(n_candidates, r - 1)


def policy_log_prior(
    policy: DiscretizationPolicy,
    n_candidates: int,
    prior: PriorSpec,
    n_cases: int,
) -> float:
    """Log prior mass of one policy; identity policies cost nothing."""
    if policy.trivial:
        return 0.0
    return interval_count_log_prior(policy.arity, n_candidates, prior, n_cases)


def univariate_score(
    column: np.ndarray, policy: DiscretizationPolicy, prior: PriorSpec
) -> float:
    """Parent-free score of one continuous column under a policy.

    The sum of the code marginal likelihood, the within-interval emission
    term, and the policy's log prior.
    """
    values = np.asarray(column, dtype=np.float64)
    codes = apply_policy(values, policy)
    table = np.bincount(codes, minlength=policy.arity).reshape(1, -1)
    counts = FamilyCounts(policy.arity, 1, table, table.sum(axis=1))
    discrete = discrete_family_score(counts, prior)
    emission = emission_component(values, policy, prior)
    log_prior = policy_log_prior(
        policy, len(candidate_thresholds(values)), prior, len(values)
    )
    return emission + discrete + log_prior


@dataclass(frozen=True)
class ScoreBreakdown:
    """Per-variable score components; discrete variables have zero emission
    and zero policy prior."""

    emission: np.ndarray
    discrete: np.ndarray
    log_prior: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.emission + self.discrete + self.log_prior))

    def to_obj(self, names: Sequence[str]) -> dict:
        variables = [
            {
                "name": name,
                "emission": float(self.emission[i]),
                "discrete": float(self.discrete[i]),
                "log_prior": float(self.log_prior[i]),
            }
            for i, name in enumerate(names)
        ]
        return {"schema_version": 1, "total": self.total, "variables": variables}


def _family_score_from_codes(
    codes: np.ndarray,
    arities: Sequence[int],
    child: int,
    parent_set: frozenset[int],
    prior: PriorSpec,
) -> float:
    return discrete_family_score(
        family_counts(codes, arities, child, sorted(parent_set)), prior
    )


def network_score(
    policy: NetworkPolicy,
    structure: DagStructure,
    dataset: Dataset,
    prior: PriorSpec,
) -> ScoreBreakdown:
    """Total network score, reported per variable.

    Each variable contributes the marginal likelihood of its codes given its
    parents' codes, plus, when continuous, its emission term and policy log
    prior.  Variables outside a family are never touched, so edits to one
    policy leave every other variable's entries bit-identical.
    """
    if structure.n != dataset.n_variables:
        raise ValidationError(
            f"structure has {structure.n} nodes, dataset {dataset.n_variables} variables"
        )
    codes = discretize_all(dataset, policy)
    arities = policy.arities()
    n = dataset.n_variables
    emission = np.zeros(n)
    discrete = np.zeros(n)
    log_prior = np.zeros(n)
    for i in range(n):
        discrete[i] = _family_score_from_codes(
            codes, arities, i, structure.parents[i], prior
        )
        if dataset.is_continuous(i):
            column = dataset.column(i)
            emission[i] = emission_component(column, policy[i], prior)
            log_prior[i] = policy_log_prior(
                policy[i], len(dataset.candidate_thresholds(i)), prior, dataset.n_cases
            )
    return ScoreBreakdown(emission, discrete, log_prior)


def local_score(
    i: int,
    policy: NetworkPolicy,
    structure: DagStructure,
    dataset: Dataset,
    prior: PriorSpec,
) -> float:
    """Every score term that depends on the policy of variable ``i``.

    Covers the variable's own family, its emission term and policy prior,
    and the families of its children, where its codes act as a parent.
    Maximizing this over policies of ``i`` maximizes the network score.
    """
    needed: set[int] = {i} | set(structure.parents[i])
    for child in structure.children[i]:
        needed.add(child)
        needed |= set(structure.parents[child])
    columns: dict[int, np.ndarray] = {
        v: apply_policy(dataset.column(v), policy[v]) for v in needed
    }
    n_cases = dataset.n_cases
    arities = policy.arities()

    def codes_view(child: int, parent_set: frozenset[int]) -> float:
        members = [child, *sorted(parent_set)]
        block = np.column_stack([columns[v] for v in members])
        local_arities = [arities[v] for v in members]
        return discrete_family_score(
            family_counts(block, local_arities, 0, range(1, len(members))), prior
        )

    score = codes_view(i, structure.parents[i])
    for child in sorted(structure.children[i]):
        score += codes_view(child, structure.parents[child])
    if dataset.is_continuous(i):
        score += emission_component(dataset.column(i), policy[i], prior)
        score += policy_log_prior(
            policy[i], len(dataset.candidate_thresholds(i)), prior, n_cases
        )
    return float(score)
