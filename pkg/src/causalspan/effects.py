"""Possible total causal effects of covariates on a response.

When only an equivalence class of DAGs is known, the total effect of a
covariate on the response is identified only up to a multiset: one value
per class member.  Two routes compute it:

* the global route enumerates every DAG in the class and regresses the
  response on the covariate adjusted for that DAG's parents;
* the local route never enumerates: it tries each subset of the
  covariate's undirected neighbours that could act as extra parents and
  adjusts for parents plus that subset.

The two routes agree on the set of distinct values (and distinct
adjustment sets); only multiplicities can differ.  The local route is the
one that scales.

Two optional modifications refine the interpretation: `zero_path` forces
the effect to zero whenever a DAG admits no directed path from covariate
to response, and `prune_y` drops parents/siblings that have no skeleton
path to the response before adjusting.  Both default to off.
"""

from __future__ import annotations

import itertools
import math
import statistics
from dataclasses import dataclass

import numpy as np

from .errors import CausalSpanError, ResourceCapError
from .gauss import CITestConfig, CovMatrix, Dataset, beta_given_s
from .graphs import (
    PDGraph,
    allows_directed_path,
    enumerate_dags,
    has_directed_path,
    is_locally_valid,
    reachable_toward,
    skeleton_component,
)

MOD_ZERO_PATH = "zero_path"
MOD_PRUNE_Y = "prune_y"
_KNOWN_MODS = frozenset({MOD_ZERO_PATH, MOD_PRUNE_Y})

DEFAULT_MAX_SIBLINGS = 25
DEFAULT_MAX_COMPONENT_EDGES = 12
DEFAULT_MAX_DAGS = 25000


def _check_mods(mods) -> frozenset[str]:
    mods = frozenset(mods)
    unknown = mods - _KNOWN_MODS
    if unknown:
        raise ValueError(f"unknown modification flags: {sorted(unknown)}")
    return mods


@dataclass(frozen=True)
class EffectEntry:
    """One effect value, the adjustment set that produced it, and how many
    class members it stands for.  adjustment=None marks a value forced to
    zero because no directed path can reach the response."""

    value: float
    adjustment: tuple[int, ...] | None
    multiplicity: int = 1


@dataclass(frozen=True)
class EffectMultiset:
    """The multiset of possible total effects of one covariate."""

    covariate: int
    response: int
    entries: tuple[EffectEntry, ...]
    method: str
    mods: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.method not in ("global", "local", "oracle"):
            raise ValueError(f"unknown method tag: {self.method}")
        if not self.entries:
            raise ValueError("an effect multiset cannot be empty")

    def values(self) -> list[float]:
        """Every value, repeated by multiplicity."""
        out: list[float] = []
        for e in self.entries:
            out.extend([e.value] * e.multiplicity)
        return out

    def size(self) -> int:
        return sum(e.multiplicity for e in self.entries)

    def distinct_adjustments(self) -> frozenset[frozenset[int] | None]:
        return frozenset(
            frozenset(e.adjustment) if e.adjustment is not None else None
            for e in self.entries
        )

    def min_abs(self) -> float:
        return min(abs(v) for v in self.values())

    def mean_abs(self) -> float:
        vals = self.values()
        return sum(abs(v) for v in vals) / len(vals)

    def value_range(self) -> float:
        vals = self.values()
        return max(vals) - min(vals)

    def ambiguity(self, tol: float | None = None) -> int:
        """Number of distinct entries.  By default entries are distinct
        when their adjustment sets differ; pass a tolerance to count
        distinct values numerically instead."""
        if tol is None:
            return len(self.distinct_adjustments())
        vals = sorted(self.values())
        count = 1
        for a, b in zip(vals, vals[1:]):
            if b - a > tol:
                count += 1
        return count

    def to_json_dict(self, names: list[str] | None = None) -> dict:
        def name(i: int) -> str | int:
            return names[i] if names is not None else i

        return {
            "covariate": name(self.covariate),
            "method": self.method,
            "effects": [
                {
                    "value": e.value,
                    "adjustment": (
                        None
                        if e.adjustment is None
                        else [name(a) for a in e.adjustment]
                    ),
                    "multiplicity": e.multiplicity,
                }
                for e in self.entries
            ],
            "min_abs": self.min_abs(),
            "range": self.value_range(),
            "ambiguity": self.ambiguity(),
        }


def summarize(e: EffectMultiset, stat: str) -> float:
    """One-number summaries: min_abs | range | mean_abs | min | max."""
    if stat == "min_abs":
        return e.min_abs()
    if stat == "range":
        return e.value_range()
    if stat == "mean_abs":
        return e.mean_abs()
    if stat == "min":
        return min(e.values())
    if stat == "max":
        return max(e.values())
    raise ValueError(f"unknown summary statistic: {stat}")


@dataclass(frozen=True)
class ThetaMatrix:
    """Per-covariate, per-class-member effect values from the global route.

    Row order follows `covariates`; column j belongs to `dags[j]`.
    """

    covariates: tuple[int, ...]
    response: int
    matrix: np.ndarray
    adjustments: tuple[tuple[tuple[int, ...] | None, ...], ...]
    dags: tuple[PDGraph, ...]
    mods: frozenset[str] = frozenset()

    def row_multiset(self, i: int) -> EffectMultiset:
        """The covariate's effect multiset: values grouped by adjustment
        set, multiplicities counting class members."""
        r = self.covariates.index(i)
        groups: dict[tuple[int, ...] | None, list[float]] = {}
        order: list[tuple[int, ...] | None] = []
        for j in range(self.matrix.shape[1]):
            adj = self.adjustments[r][j]
            if adj not in groups:
                groups[adj] = []
                order.append(adj)
            groups[adj].append(float(self.matrix[r, j]))
        entries = tuple(
            EffectEntry(vals[0], adj, len(vals))
            for adj, vals in ((a, groups[a]) for a in order)
        )
        return EffectMultiset(i, self.response, entries, "global", self.mods)


def global_effects(
    source: Dataset | CovMatrix,
    g: PDGraph,
    y: int,
    mods: frozenset[str] | tuple[str, ...] = (),
    max_component_edges: int = DEFAULT_MAX_COMPONENT_EDGES,
    max_dags: int = DEFAULT_MAX_DAGS,
) -> ThetaMatrix:
    """Enumerate the equivalence class of g and compute, for every
    covariate i and every member DAG, the regression coefficient of i
    adjusted for the member's parents of i.

    Requires a graph that validates as a CPDAG (repair first if needed).
    """
    mods = _check_mods(mods)
    try:
        dags = enumerate_dags(g, max_component_edges, max_dags)
    except ResourceCapError as e:
        raise ResourceCapError(
            f"{e}; the local route avoids enumeration and scales further"
        ) from None
    covariates = tuple(i for i in range(g.n) if i != y)
    connected = skeleton_component(g, y)
    matrix = np.zeros((len(covariates), len(dags)))
    adjustments: list[tuple[tuple[int, ...] | None, ...]] = []
    for r, i in enumerate(covariates):
        row_adjs: list[tuple[int, ...] | None] = []
        for j, d in enumerate(dags):
            if MOD_ZERO_PATH in mods and not has_directed_path(d, i, y):
                matrix[r, j] = 0.0
                row_adjs.append(None)
                continue
            pa = d.parents(i)
            if MOD_PRUNE_Y in mods:
                pa = frozenset(p for p in pa if p in connected)
            s = tuple(sorted(pa))
            matrix[r, j] = beta_given_s(source, i, s, y)
            row_adjs.append(s)
        adjustments.append(tuple(row_adjs))
    return ThetaMatrix(covariates, y, matrix, tuple(adjustments), tuple(dags), mods)


def local_effects(
    source: Dataset | CovMatrix,
    g: PDGraph,
    i: int,
    y: int,
    mods: frozenset[str] | tuple[str, ...] = (),
    max_siblings: int = DEFAULT_MAX_SIBLINGS,
    max_component_edges: int = DEFAULT_MAX_COMPONENT_EDGES,
    max_dags: int = DEFAULT_MAX_DAGS,
) -> EffectMultiset:
    """Effect multiset of covariate i without enumerating the class.

    Every subset of i's siblings whose members are pairwise adjacent (and
    adjacent to i's parents) can be the extra parents of i in some class
    member, so each such subset contributes the coefficient of i adjusted
    for parents plus subset.  Distinct values match the global route;
    multiplicities may not.
    """
    mods = _check_mods(mods)
    if i == y:
        raise ValueError("covariate and response must differ")
    if MOD_ZERO_PATH in mods and not allows_directed_path(
        g, i, y, max_component_edges, max_dags
    ):
        entry = EffectEntry(0.0, None, 1)
        return EffectMultiset(i, y, (entry,), "local", mods)
    if MOD_PRUNE_Y in mods:
        pa = reachable_toward(g, i, y, "parents")
        sibs = sorted(reachable_toward(g, i, y, "siblings"))
    else:
        pa = g.parents(i)
        sibs = sorted(g.siblings(i))
    if len(sibs) > max_siblings:
        raise ResourceCapError(
            f"covariate {i} has {len(sibs)} undirected neighbours "
            f"(cap {max_siblings})"
        )
    entries: list[EffectEntry] = []
    for mask in range(2 ** len(sibs)):
        s = [sibs[b] for b in range(len(sibs)) if (mask >> b) & 1]
        if not is_locally_valid(g, i, s):
            continue
        adj = tuple(sorted(pa | set(s)))
        entries.append(EffectEntry(beta_given_s(source, i, adj, y), adj, 1))
    return EffectMultiset(i, y, tuple(entries), "local", mods)


def oracle_multiplicities(
    g: PDGraph,
    i: int,
    max_siblings: int = DEFAULT_MAX_SIBLINGS,
    max_component_edges: int = DEFAULT_MAX_COMPONENT_EDGES,
    max_dags: int = DEFAULT_MAX_DAGS,
) -> dict[tuple[int, ...], int]:
    """For every sibling subset s of i, how many class members have
    parent set parents(i) union s.  Zero counts are included, so the keys
    always run over all sibling subsets."""
    dags = enumerate_dags(g, max_component_edges, max_dags)
    sibs = sorted(g.siblings(i))
    if len(sibs) > max_siblings:
        raise ResourceCapError(
            f"covariate {i} has {len(sibs)} undirected neighbours "
            f"(cap {max_siblings})"
        )
    base = g.parents(i)
    counts: dict[tuple[int, ...], int] = {}
    for r in range(len(sibs) + 1):
        for s in itertools.combinations(sibs, r):
            counts[s] = 0
    for d in dags:
        extra = d.parents(i) - base
        key = tuple(sorted(extra))
        if key not in counts:
            raise CausalSpanError(
                f"class member has parents outside siblings of {i}; "
                "input is not a valid CPDAG"
            )
        counts[key] += 1
    return counts


def multiset_distance(a, b) -> float:
    """Distance between two multisets of reals: infinity when sizes
    differ, otherwise the largest gap between sorted order statistics."""
    va = sorted(a.values() if isinstance(a, EffectMultiset) else a)
    vb = sorted(b.values() if isinstance(b, EffectMultiset) else b)
    if len(va) != len(vb):
        return math.inf
    if not va:
        return 0.0
    return max(abs(x - y) for x, y in zip(va, vb))


@dataclass(frozen=True)
class CovariateScore:
    """Bootstrap summary for one covariate."""

    covariate: int
    score: float
    full_data_ambiguity: int | None
    replicate_ambiguities: tuple[int, ...]
    failures: int


@dataclass(frozen=True)
class BootstrapScores:
    """Causal scores for all covariates from resampled reruns."""

    response: int
    n_replicates: int
    scores: tuple[CovariateScore, ...]

    def ranked(self) -> list[CovariateScore]:
        """Highest score first, unscored covariates last; ties broken by
        covariate index."""

        def key(s: CovariateScore) -> tuple[bool, float, int]:
            unscored = s.score is None or math.isnan(s.score)
            return (unscored, -(s.score if not unscored else 0.0), s.covariate)

        return sorted(self.scores, key=key)


def bootstrap_scores(
    d: Dataset,
    cfg: CITestConfig = CITestConfig(),
    b: int = 10,
    seed: int = 0,
    mods: frozenset[str] | tuple[str, ...] = (),
    max_siblings: int = DEFAULT_MAX_SIBLINGS,
    max_level: int | None = None,
) -> BootstrapScores:
    """Score each covariate by the median, over b row resamples, of the
    smallest absolute value in its local effect multiset.

    A large score means every DAG compatible with the resampled data
    implies a strong effect.  Per-covariate failures inside a replicate
    (for example a sibling cap hit) are counted and excluded from the
    median; the full-data ambiguity is reported alongside.
    """
    from .pc import pc_cpdag  # local import to avoid a module cycle

    if b < 1:
        raise ValueError("need at least one bootstrap replicate")
    mods = _check_mods(mods)
    y = d.response
    covariates = d.covariates

    def run(ds: Dataset):
        res = pc_cpdag(ds, cfg, max_level)
        out: dict[int, EffectMultiset | None] = {}
        for i in covariates:
            try:
                out[i] = local_effects(
                    ds, res.graph, i, y, mods, max_siblings
                )
            except CausalSpanError:
                out[i] = None
        return out

    full = run(d)
    mins: dict[int, list[float]] = {i: [] for i in covariates}
    ambigs: dict[int, list[int]] = {i: [] for i in covariates}
    failures: dict[int, int] = {i: 0 for i in covariates}
    children = np.random.SeedSequence(seed).spawn(b)
    for child in children:
        rng = np.random.default_rng(child)
        idx = rng.integers(0, d.n, size=d.n)
        rep = run(d.resample_rows(idx))
        for i in covariates:
            ms = rep[i]
            if ms is None:
                failures[i] += 1
            else:
                mins[i].append(ms.min_abs())
                ambigs[i].append(ms.ambiguity())
    scores = []
    for i in covariates:
        score = statistics.median(mins[i]) if mins[i] else math.nan
        full_amb = full[i].ambiguity() if full[i] is not None else None
        scores.append(
            CovariateScore(
                i, float(score), full_amb, tuple(ambigs[i]), failures[i]
            )
        )
    return BootstrapScores(y, b, tuple(scores))
