"""Estimation of the completed partially directed graph from data.

The skeleton search tests conditional independence level by level with
adjacency sets snapshotted at the start of each level, so results do not
depend on incidental edge-removal order within a level.  Collider
orientation walks candidate triples in lexicographic order and lets later
triples overwrite earlier arrowheads; every overwrite is recorded, because
on finite samples the oriented graph can fail to admit a consistent
extension.  `repair_cpdag` restores validity in three escalating stages.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import InsufficientSampleError
from .gauss import (
    CITestConfig,
    CovMatrix,
    Dataset,
    correlation_matrix,
    fisher_z_dependent,
    partial_correlation,
)
from .graphs import (
    CpdagValidation,
    PDGraph,
    cpdag_from_dag,
    extend_to_dag,
    meek_closure,
    validate_cpdag,
)
from . import gauss

# Partial correlations at or below this magnitude count as zero when
# testing against a population covariance.
POPULATION_RHO_TOL = 1e-9

SepsetTable = dict[tuple[int, int], tuple[int, ...]]


@dataclass
class PcDiagnostics:
    """Counters and event logs from a PC run."""

    tests_per_level: dict[int, int] = field(default_factory=dict)
    skipped_insufficient_n: int = 0
    overwrites: list[dict] = field(default_factory=list)
    candidate_triples: list[tuple[int, int, int]] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "tests_per_level": {str(k): v for k, v in sorted(self.tests_per_level.items())},
            "skipped_insufficient_n": self.skipped_insufficient_n,
            "collider_overwrites": self.overwrites,
            "candidate_colliders": [list(t) for t in self.candidate_triples],
        }


@dataclass
class PcResult:
    """Estimated graph plus everything needed to audit or repair it."""

    graph: PDGraph
    sepsets: SepsetTable
    diagnostics: PcDiagnostics
    validation: CpdagValidation


def _make_ci_test(source: Dataset | CovMatrix, cfg: CITestConfig, diag: PcDiagnostics):
    """Build an independence oracle over column indices.

    Data or a finite-n covariance uses the z-transform test at cfg.alpha; a
    population covariance (n=None) declares independence exactly when the
    partial correlation vanishes.  Tests whose sample size is too small are
    skipped conservatively: the edge stays.
    """
    if isinstance(source, Dataset):
        corr = correlation_matrix(source)
    elif isinstance(source, CovMatrix):
        corr = source.correlation()
    else:
        raise TypeError("source must be a Dataset or CovMatrix")
    n = corr.n

    def independent(i: int, j: int, s: tuple[int, ...], level: int) -> bool:
        if n is not None and n - len(s) - 3 < 1:
            diag.skipped_insufficient_n += 1
            return False
        rho = partial_correlation(corr, i, j, s)
        diag.tests_per_level[level] = diag.tests_per_level.get(level, 0) + 1
        if n is None:
            return abs(rho) <= POPULATION_RHO_TOL
        return not fisher_z_dependent(rho, n, len(s), cfg.alpha)

    return independent, corr.n_columns


def estimate_skeleton(
    source: Dataset | CovMatrix,
    cfg: CITestConfig = CITestConfig(),
    max_level: int | None = None,
) -> tuple[PDGraph, SepsetTable, PcDiagnostics]:
    """Level-wise conditional-independence search for the skeleton.

    Starts from the complete undirected graph.  At level l, every ordered
    adjacent pair (i, j) is tested against each size-l subset of the
    adjacency set of i (snapshotted at the start of the level, j excluded)
    in lexicographic order; on an independence verdict the edge goes and
    the separating set is recorded.  Stops when no adjacency set is large
    enough, or past max_level.
    """
    diag = PcDiagnostics()
    independent, p1 = _make_ci_test(source, cfg, diag)
    adj: list[set[int]] = [set(range(p1)) - {i} for i in range(p1)]
    sepsets: SepsetTable = {}
    level = 0
    while True:
        if max_level is not None and level > max_level:
            break
        snapshot = [frozenset(a) for a in adj]
        if not any(
            len(snapshot[i] - {j}) >= level
            for i in range(p1)
            for j in snapshot[i]
        ):
            break
        for i in range(p1):
            for j in sorted(snapshot[i]):
                if j not in adj[i]:
                    continue
                candidates = sorted(snapshot[i] - {j})
                if len(candidates) < level:
                    continue
                for s in itertools.combinations(candidates, level):
                    try:
                        verdict = independent(i, j, s, level)
                    except InsufficientSampleError:
                        diag.skipped_insufficient_n += 1
                        continue
                    if verdict:
                        adj[i].discard(j)
                        adj[j].discard(i)
                        sepsets[(min(i, j), max(i, j))] = s
                        break
        level += 1
    edges = [(i, j) for i in range(p1) for j in adj[i] if i < j]
    return PDGraph(p1, undirected=edges), sepsets, diag


def orient_v_structures(
    skeleton: PDGraph,
    sepsets: SepsetTable,
    diag: PcDiagnostics | None = None,
    forced: dict[tuple[int, int], tuple[int, int]] | None = None,
    dropped_triples: Iterable[tuple[int, int, int]] = (),
) -> PDGraph:
    """Orient collider triples on a skeleton.

    A triple (i, j, k) with i - j - k, i and k nonadjacent, and j outside
    the recorded separating set of (i, k) gets both arrowheads pointed at
    j.  Triples apply in lexicographic order and later triples overwrite
    earlier orientations; each overwrite is logged on `diag`.

    `forced` pins specific edge directions: a triple that would contradict
    a pinned direction is skipped entirely.  `dropped_triples` are skipped
    outright.  Both hooks exist for the repair search.
    """
    amat = skeleton.amat_copy()
    if not skeleton.is_fully_undirected():
        raise ValueError("orient_v_structures expects an undirected skeleton")
    triples = []
    for j in range(skeleton.n):
        nbrs = sorted(skeleton.adjacent(j))
        for i, k in itertools.combinations(nbrs, 2):
            if skeleton.has_edge(i, k):
                continue
            if j not in sepsets.get((min(i, k), max(i, k)), ()):
                triples.append((i, j, k))
    triples.sort()
    if diag is not None:
        diag.candidate_triples = list(triples)
    dropped = set(dropped_triples)
    forced = forced or {}

    def pinned(a: int, b: int) -> tuple[int, int] | None:
        return forced.get((min(a, b), max(a, b)))

    for i, j, k in triples:
        if (i, j, k) in dropped:
            continue
        want = [(i, j), (k, j)]
        if any(pinned(a, b) not in (None, (a, b)) for a, b in want):
            continue
        for a, b in want:
            if amat[b, a] and not amat[a, b]:
                # edge currently b -> a; this triple flips it
                if diag is not None:
                    diag.overwrites.append(
                        {"edge": [b, a], "new": [a, b], "triple": [i, j, k]}
                    )
                amat[a, b] = True
                amat[b, a] = False
            else:
                amat[b, a] = False
    return PDGraph._from_amat(amat)


def pc_cpdag(
    source: Dataset | CovMatrix,
    cfg: CITestConfig = CITestConfig(),
    max_level: int | None = None,
) -> PcResult:
    """Full pipeline: skeleton, collider orientation, Meek closure.

    Never fails on an incoherent sample graph; the attached validation
    report says whether the estimate can be used as a CPDAG directly or
    needs repair_cpdag first.
    """
    skeleton, sepsets, diag = estimate_skeleton(source, cfg, max_level)
    oriented = orient_v_structures(skeleton, sepsets, diag)
    closed = meek_closure(oriented)
    return PcResult(closed, sepsets, diag, validate_cpdag(closed))


@dataclass(frozen=True)
class RepairResult:
    """Outcome of repair_cpdag: the usable graph and the stage that made it."""

    graph: PDGraph
    stage: int
    detail: str


def _rebuild(skeleton, sepsets, forced=None, dropped=()):
    g = orient_v_structures(skeleton, sepsets, forced=forced, dropped_triples=dropped)
    return meek_closure(g)


def repair_cpdag(
    result: PcResult,
    seed: int = 0,
    search_cap: int = 4096,
) -> RepairResult:
    """Make a PC estimate usable as a CPDAG.

    Stage 0 returns the graph unchanged when it already validates.  Stage 1
    revisits the recorded collider conflicts: every way of deciding which
    side of each conflicted edge wins is retried (up to search_cap
    combinations).  Stage 2 drops collider triples, fewest first, with an
    exact subset search up to search_cap candidates and a greedy pass
    beyond that.  Stage 3 orients the skeleton along a seeded random
    vertex order and returns that DAG's CPDAG, which always validates.
    """
    if result.validation.is_valid:
        return RepairResult(result.graph, 0, "estimate already valid")
    skeleton = result.graph.skeleton()
    sepsets = result.sepsets

    # stage 1: re-decide conflicted edges
    conflicted = []
    seen = set()
    for ev in result.diagnostics.overwrites:
        a, b = ev["new"]
        key = (min(a, b), max(a, b))
        if key not in seen:
            seen.add(key)
            conflicted.append(key)
    if conflicted and 2 ** len(conflicted) <= search_cap:
        for mask in range(2 ** len(conflicted)):
            forced = {}
            for bit, (u, v) in enumerate(conflicted):
                forced[(u, v)] = (u, v) if (mask >> bit) & 1 == 0 else (v, u)
            g = _rebuild(skeleton, sepsets, forced=forced)
            val = validate_cpdag(g)
            if val.is_valid:
                return RepairResult(
                    g, 1, f"re-decided {len(conflicted)} conflicted edges"
                )

    # stage 2: drop collider triples, fewest first
    triples = list(result.diagnostics.candidate_triples)
    if not triples:
        base = _rebuild(skeleton, sepsets)
        val = validate_cpdag(base)
        if val.is_valid:
            return RepairResult(base, 2, "no collider triples to drop")
    examined = 0
    for k in range(1, len(triples) + 1):
        if examined >= search_cap:
            break
        stop = False
        for subset in itertools.combinations(range(len(triples)), k):
            examined += 1
            dropped = [triples[t] for t in subset]
            g = _rebuild(skeleton, sepsets, dropped=dropped)
            if validate_cpdag(g).is_valid:
                return RepairResult(g, 2, f"dropped {k} collider triples")
            if examined >= search_cap:
                stop = True
                break
        if stop:
            break
    if examined >= search_cap:
        # greedy: peel off triples one at a time
        dropped: list[tuple[int, int, int]] = []
        remaining = list(triples)
        while remaining:
            dropped.append(remaining.pop(0))
            g = _rebuild(skeleton, sepsets, dropped=dropped)
            if validate_cpdag(g).is_valid:
                return RepairResult(
                    g, 2, f"greedily dropped {len(dropped)} collider triples"
                )

    # stage 3: random consistent orientation of the skeleton
    rng = np.random.default_rng(seed)
    order = rng.permutation(result.graph.n)
    rank = np.empty(result.graph.n, dtype=int)
    rank[order] = np.arange(result.graph.n)
    edges = []
    for u, v in sorted(skeleton.undirected_edges()):
        edges.append((u, v) if rank[u] < rank[v] else (v, u))
    dag = PDGraph(result.graph.n, directed=edges)
    return RepairResult(cpdag_from_dag(dag), 3, "random orientation of skeleton")


def bic_select_alpha(
    d: Dataset,
    alphas: Iterable[float],
    seed: int = 0,
    max_level: int | None = None,
) -> tuple[float, dict[float, float]]:
    """Pick the test level by BIC.

    Each alpha runs the full pipeline (repairing when needed), extends the
    graph to a DAG, fits it, and scores it; the alpha with the lowest BIC
    wins, ties going to the smaller alpha.  Alphas that fail to produce a
    scoreable DAG get an infinite score.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("need at least one alpha")
    scores: dict[float, float] = {}
    for a in alphas:
        try:
            res = pc_cpdag(d, CITestConfig(a), max_level)
            g = res.graph
            if not res.validation.is_valid:
                g = repair_cpdag(res, seed=seed).graph
            dag = extend_to_dag(g)
            if dag is None:
                scores[a] = float("inf")
                continue
            scores[a] = gauss.bic_score(d, dag)
        except CausalSpanError:
            scores[a] = float("inf")
    best = min(sorted(alphas), key=lambda a: (scores[a], a))
    return best, scores
