"""Population-based skeleton growth.

Path priors are Dijkstra shortest paths on the directed line graph:
states are directed dense edges, transition cost is the confidence-length
term of the entered edge plus the unlabeled turn penalty. A population of
candidate skeletons grows one edge-label pair per iteration, with
rank-product weighted resampling.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .config import SearchConfig
from .edge_scoring import ConfidenceMap
from .errors import SearchStalledError, NoTipsError
from .geometry import edge_score, grow_angle
from .labels import Label, STRUCTURAL_LABELS
from .seeds import SeedSet
from .skeleton import LabeledSkeleton
from .superpoints import SuperpointGraph

DirEdge = tuple[int, int]  # directed (tail, head): traversal tail -> head


def edge_cost(e_s, e_p, length: float, conf: float,
              cfg: SearchConfig) -> float:
    """Transition cost for entering edge e_s after e_p (None at path start):
    Len * (1 - Conf) plus the unlabeled turn penalty."""
    cost = length * (1.0 - conf)
    if e_p is not None:
        ang = _turn_angle_vecs(e_s, e_p)
        if ang > cfg.theta_turn_min:
            cost += cfg.c_turn * (ang - cfg.theta_turn_min) ** cfg.p_turn
    return cost


def _turn_angle_vecs(a, b) -> float:
    na = math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
    nb = math.sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2])
    dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb)
    if dot > 1.0:
        dot = 1.0
    elif dot < -1.0:
        dot = -1.0
    return math.acos(dot)


class SearchContext:
    """Precomputed per-directed-edge quantities shared by priors and the
    growth loop."""

    def __init__(self, graph: SuperpointGraph, conf: ConfidenceMap,
                 cfg: SearchConfig):
        self.graph = graph
        self.conf = conf
        self.cfg = cfg
        self.adj = [graph.neighbors(i) for i in range(graph.num_nodes)]
        pos = graph.positions
        self.vec: dict[DirEdge, tuple] = {}
        self.escore: dict[DirEdge, float] = {}
        self.len_noconf: dict[DirEdge, float] = {}
        self.grow_pen: dict[DirEdge, tuple] = {}  # (support, leader)
        for k, (i, j) in enumerate(graph.edges):
            i, j = int(i), int(j)
            length = float(graph.lengths[k])
            c = conf[k]
            es = edge_score(length, c, cfg.alpha_conf)
            lnc = length * (1.0 - c)
            for u, v in ((i, j), (j, i)):
                d = pos[v] - pos[u]
                self.vec[(u, v)] = (float(d[0]), float(d[1]), float(d[2]))
                self.escore[(u, v)] = es
                self.len_noconf[(u, v)] = lnc
                ga = grow_angle(d)
                sup = ga - cfg.theta_grow_min
                lead = (math.pi / 2 - ga) - cfg.theta_grow_min
                self.grow_pen[(u, v)] = (
                    cfg.c_grow * sup ** cfg.p_grow if sup > 0 else 0.0,
                    cfg.c_grow * lead ** cfg.p_grow if lead > 0 else 0.0,
                )
        self._angle_cache: dict[tuple, float] = {}
        self._pen_cache: dict[tuple, float] = {}

    def turn_angle(self, a: int, b: int, c: int) -> float:
        """Angle of the turn a->b then b->c."""
        key = (a, b, c)
        ang = self._angle_cache.get(key)
        if ang is None:
            ang = _turn_angle_vecs(self.vec[(b, c)], self.vec[(a, b)])
            self._angle_cache[key] = ang
            self._angle_cache[(c, b, a)] = ang
        return ang

    def turn_pen_none(self, a: int, b: int, c: int) -> float:
        key = (a, b, c)
        pen = self._pen_cache.get(key)
        if pen is None:
            ang = self.turn_angle(a, b, c)
            cfg = self.cfg
            pen = (cfg.c_turn * (ang - cfg.theta_turn_min) ** cfg.p_turn
                   if ang > cfg.theta_turn_min else 0.0)
            self._pen_cache[key] = pen
            self._pen_cache[(c, b, a)] = pen
        return pen

    def same_label_turn_pen(self, a: int, b: int, c: int) -> float:
        return self.turn_pen_none(a, b, c)

    def reward(self, state: DirEdge, label: Label,
               pred_tail: int | None, pred_label: Label | None) -> float:
        r = self.escore[state]
        if pred_tail is not None and pred_label is label:
            r -= self.turn_pen_none(pred_tail, state[0], state[1])
        if label is Label.SUPPORT:
            r -= self.grow_pen[state][0]
        elif label is Label.LEADER:
            r -= self.grow_pen[state][1]
        return r


class PathPrior:
    """Per-tip minimum-cost edge paths for every directed dense edge.

    For each reachable state the prior caches the path cost, successor
    state, edge-score sum over the path (including the state itself), and
    the turn-penalty sum with its two largest terms (for the label-based
    drop rule of the growth potential).
    """

    def __init__(self, ctx: SearchContext, tip: int):
        self.tip = tip
        self.ctx = ctx
        self.cost: dict[DirEdge, float] = {}
        self.succ: dict[DirEdge, DirEdge | None] = {}
        self.esum: dict[DirEdge, float] = {}
        # pen_minus[state] = (sum, sum - top1, sum - top1 - top2)
        self.pen_minus: dict[DirEdge, tuple] = {}
        self._top2: dict[DirEdge, tuple] = {}
        self._nodes: dict[DirEdge, frozenset] = {}
        self._run(ctx, tip)

    def _run(self, ctx: SearchContext, tip: int):
        dist: dict[DirEdge, float] = {}
        heap = []
        for nbr, _eid in ctx.adj[tip]:
            state = (nbr, tip)
            d = ctx.len_noconf[state]
            dist[state] = d
            heapq.heappush(heap, (d, state, None))
        final = self.cost
        while heap:
            d, state, via = heapq.heappop(heap)
            if state in final:
                continue
            final[state] = d
            self.succ[state] = via
            if via is None:
                self.esum[state] = ctx.escore[state]
                self._top2[state] = (0.0, 0.0)
                self.pen_minus[state] = (0.0, 0.0, 0.0)
            else:
                pen = ctx.turn_pen_none(state[0], state[1], via[1])
                self.esum[state] = ctx.escore[state] + self.esum[via]
                t1, t2 = self._top2[via]
                if pen >= t1:
                    t1, t2 = pen, t1
                elif pen > t2:
                    t2 = pen
                self._top2[state] = (t1, t2)
                total = self.pen_minus[via][0] + pen
                self.pen_minus[state] = (total, total - t1, total - t1 - t2)
            u, v = state
            base = ctx.len_noconf
            for w, _eid in ctx.adj[u]:
                prev = (w, u)
                if prev in final:
                    continue
                nd = d + base[prev] + ctx.turn_pen_none(w, u, v)
                old = dist.get(prev)
                if old is None or nd < old - 1e-15:
                    dist[prev] = nd
                    heapq.heappush(heap, (nd, prev, state))

    def reachable(self, state: DirEdge) -> bool:
        return state in self.cost

    def path_edges(self, state: DirEdge) -> list[DirEdge]:
        out = []
        cur: DirEdge | None = state
        while cur is not None:
            out.append(cur)
            cur = self.succ[cur]
        return out

    def path_nodes(self, state: DirEdge) -> frozenset:
        """Nodes on the path excluding the state's tail node."""
        cached = self._nodes.get(state)
        if cached is not None:
            return cached
        chain = []
        cur: DirEdge | None = state
        while cur is not None and cur not in self._nodes:
            chain.append(cur)
            cur = self.succ[cur]
        acc = set() if cur is None else set(self._nodes[cur])
        for st in reversed(chain):
            acc.add(st[1])
            self._nodes[st] = frozenset(acc)
        return self._nodes[state]

    def dropped_pen(self, state: DirEdge, label: Label) -> float:
        """Turn-penalty sum after dropping the 2 - Order(label) largest."""
        sums = self.pen_minus[state]
        drop = 2 - label.order
        if drop <= 0:
            return sums[0]
        return max(sums[min(drop, 2)], 0.0)


def compute_path_priors(graph: SuperpointGraph, conf: ConfidenceMap,
                        tip: int, cfg: SearchConfig,
                        ctx: SearchContext | None = None) -> PathPrior:
    if ctx is None:
        ctx = SearchContext(graph, conf, cfg)
    return PathPrior(ctx, tip)


@dataclass(frozen=True)
class Candidate:
    """One population member: a skeleton plus cached growth state."""

    skeleton: LabeledSkeleton
    score: float
    nodes: frozenset
    frontier: frozenset  # directed edges (in-skeleton -> outside)
    reached: frozenset
    abandoned: frozenset
    key: tuple  # (edge count, order-independent 64-bit content hash)


def _edge_label_hash(state: DirEdge, label: Label) -> int:
    # Stable 64-bit mix (independent of PYTHONHASHSEED) so candidate
    # content keys, and therefore run output, are identical across runs.
    x = (state[0] * 0x9E3779B97F4A7C15
         + state[1] * 0xC2B2AE3D27D4EB4F
         + label.order * 0x165667B19E3779F9) & 0xFFFFFFFFFFFFFFFF
    x ^= x >> 29
    x = (x * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x ^= x >> 32
    return x


def make_root_candidate(base: int, ctx: SearchContext,
                        tips: frozenset) -> Candidate:
    skel = LabeledSkeleton(base)
    frontier = frozenset((base, w) for w, _ in ctx.adj[base])
    return Candidate(
        skeleton=skel, score=0.0, nodes=frozenset((base,)),
        frontier=frontier, reached=frozenset({base} & tips),
        abandoned=frozenset(), key=(0, 0))


def grow_candidate(cand: Candidate, state: DirEdge, label: Label,
                   new_score: float, ctx: SearchContext,
                   tips: frozenset) -> Candidate:
    u, v = state
    skel = cand.skeleton.attach((u, v), label)
    nodes = cand.nodes | {v}
    frontier = set(cand.frontier)
    for w, _eid in ctx.adj[v]:
        frontier.discard((w, v))
        if w not in nodes:
            frontier.add((v, w))
    reached = cand.reached | ({v} & tips)
    return Candidate(
        skeleton=skel, score=new_score, nodes=frozenset(nodes),
        frontier=frozenset(frontier), reached=reached,
        abandoned=cand.abandoned,
        key=(cand.key[0] + 1, cand.key[1] ^ _edge_label_hash(state, label)))


def eligible_pairs(cand: Candidate, prior: PathPrior,
                   ctx: SearchContext) -> list[tuple[DirEdge, Label]]:
    """All (directed edge, label) pairs that may extend the candidate
    toward the prior's tip without topology or label violations."""
    skel = cand.skeleton
    first_edge = skel.num_edges == 0
    pairs = []
    pred_cache: dict[int, tuple] = {}
    for state in sorted(cand.frontier):
        if state not in prior.cost:
            continue
        if not prior.path_nodes(state).isdisjoint(cand.nodes):
            continue
        u = state[0]
        cached = pred_cache.get(u)
        if cached is None:
            pred = skel.parent_edge(u)
            pred_label = None if pred is None else skel.label_of(pred)
            succ_labels = tuple(lab for _, lab in skel.children_of(u))
            cached = (pred_label, succ_labels)
            pred_cache[u] = cached
        pred_label, succ_labels = cached
        if first_edge:
            labels = (Label.TRUNK,)
        else:
            labels = STRUCTURAL_LABELS
        for lab in labels:
            if pred_label is not None:
                if pred_label.order > lab.order:
                    continue
                if pred_label is lab and lab in succ_labels:
                    continue
                if pred_label is Label.TRUNK:
                    combined = succ_labels + (lab,)
                    trunkish = [s is Label.TRUNK for s in combined]
                    if any(trunkish) and not all(trunkish):
                        continue
                    if sum(s is Label.SUPPORT for s in combined) > 2:
                        continue
            pairs.append((state, lab))
    return pairs


def potential(cand: Candidate, prior: PathPrior, pair, ctx: SearchContext,
              new_score: float | None = None) -> float:
    """Score of the grown skeleton plus the path prior's edge scores minus
    its turn penalties after the label-dependent drop."""
    state, label = pair
    if state not in prior.cost:
        raise ValueError(f"edge {state} unreachable from tip {prior.tip}")
    if new_score is None:
        pred = cand.skeleton.parent_edge(state[0])
        pred_label = None if pred is None else cand.skeleton.label_of(pred)
        pred_tail = None if pred is None else pred[0]
        new_score = cand.score + ctx.reward(state, label, pred_tail,
                                            pred_label)
    return new_score + prior.esum[state] - prior.dropped_pen(state, label)


def rank(values) -> np.ndarray:
    """Ascending 1-indexed ranks divided by n, ties averaged."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("rank of empty list")
    return rankdata(arr, method="average") / arr.size


def weight(skeleton_rank: float, pair_rank: float) -> float:
    return skeleton_rank * pair_rank


def resample(weights, K: int, k_max_rep: int, rng) -> list[int]:
    """K weighted draws with replacement, each index capped at k_max_rep
    copies. A capped index's weight is zeroed and the rest renormalized;
    if all weights hit zero, remaining slots cycle the distinct indices in
    descending original-weight order."""
    w = np.asarray(weights, dtype=np.float64).copy()
    if w.size == 0:
        raise SearchStalledError("no next-generation candidates to resample")
    orig = w.copy()
    counts = np.zeros(w.size, dtype=np.int64)
    chosen: list[int] = []
    for _ in range(K):
        total = w.sum()
        if total <= 0:
            break
        idx = int(rng.choice(w.size, p=w / total))
        chosen.append(idx)
        counts[idx] += 1
        if counts[idx] >= k_max_rep:
            w[idx] = 0.0
    if len(chosen) < K:
        # Stable descending weight order; ties by index.
        order = np.lexsort((np.arange(orig.size), -orig))
        k = 0
        while len(chosen) < K:
            chosen.append(int(order[k % orig.size]))
            k += 1
    return chosen


@dataclass
class _PoolEntry:
    weight: float
    cand: Candidate
    proposal: tuple | None  # (state, label, new_score) or None for carried


def run_search(graph: SuperpointGraph, conf: ConfidenceMap, seeds: SeedSet,
               cfg: SearchConfig, manifest: dict | None = None,
               ctx: SearchContext | None = None):
    """Grow the population until every candidate has reached or abandoned
    every tip; returns (best skeleton, manifest dict)."""
    if not seeds.tips:
        raise NoTipsError("no tip candidates; nothing to grow toward")
    if ctx is None:
        ctx = SearchContext(graph, conf, cfg)
    tips = tuple(sorted(seeds.tips))
    tipset = frozenset(tips)
    t0 = time.perf_counter()
    priors = {t: PathPrior(ctx, t) for t in tips}
    prior_time = time.perf_counter() - t0

    root = make_root_candidate(seeds.base, ctx, tipset)
    population: list[Candidate] = [root] * cfg.K
    best = root
    max_iter = cfg.resolve_max_iterations(graph.num_nodes)
    history = []
    iteration = 0

    while iteration < max_iter:
        for cand in population:
            if cand.score > best.score:
                best = cand
        history.append(best.score)
        unfinished = [
            ci for ci, cand in enumerate(population)
            if any(t not in cand.reached and t not in cand.abandoned
                   for t in tips)
        ]
        if not unfinished:
            break

        score_ranks = rank([c.score for c in population])

        # Group identical (skeleton, tip) pairs so eligibility and
        # potential are computed once per group.
        groups: dict[tuple, list[int]] = {}
        tip_choice: dict[int, int] = {}
        for ci in unfinished:
            cand = population[ci]
            open_tips = [t for t in tips
                         if t not in cand.reached and t not in cand.abandoned]
            rng = np.random.default_rng((cfg.seed, iteration, ci))
            t = open_tips[int(rng.integers(len(open_tips)))]
            tip_choice[ci] = t
            groups.setdefault((cand.key, t), []).append(ci)

        pool: dict[tuple, _PoolEntry] = {}

        def add_carried(cand: Candidate, w: float):
            entry = pool.get(cand.key)
            if entry is None:
                pool[cand.key] = _PoolEntry(w, cand, None)
            else:
                entry.weight += w

        for ci, cand in enumerate(population):
            if ci not in tip_choice:
                add_carried(cand, float(score_ranks[ci]))

        for gkey in sorted(groups):
            members = groups[gkey]
            cand = population[members[0]]
            tip = gkey[1]
            prior = priors[tip]
            pairs = eligible_pairs(cand, prior, ctx)
            if not pairs:
                for ci in members:
                    stuck = population[ci]
                    add_carried(
                        Candidate(
                            skeleton=stuck.skeleton, score=stuck.score,
                            nodes=stuck.nodes, frontier=stuck.frontier,
                            reached=stuck.reached,
                            abandoned=stuck.abandoned | {tip},
                            key=stuck.key),
                        float(score_ranks[ci]))
                continue
            new_scores = []
            pots = []
            for state, lab in pairs:
                pred = cand.skeleton.parent_edge(state[0])
                pred_label = None if pred is None else \
                    cand.skeleton.label_of(pred)
                pred_tail = None if pred is None else pred[0]
                ns = cand.score + ctx.reward(state, lab, pred_tail,
                                             pred_label)
                new_scores.append(ns)
                pots.append(ns + prior.esum[state]
                            - prior.dropped_pen(state, lab))
            pot_ranks = rank(pots)
            group_score_rank = sum(float(score_ranks[ci]) for ci in members)
            for p, (state, lab) in enumerate(pairs):
                pkey = (cand.key[0] + 1,
                        cand.key[1] ^ _edge_label_hash(state, lab))
                w = group_score_rank * float(pot_ranks[p])
                entry = pool.get(pkey)
                if entry is None:
                    pool[pkey] = _PoolEntry(
                        w, cand, (state, lab, new_scores[p]))
                else:
                    entry.weight += w

        if not pool:
            break
        entries = [pool[k] for k in sorted(pool)]
        rng_rs = np.random.default_rng((cfg.seed, iteration, 1 << 30))
        chosen = resample([e.weight for e in entries], cfg.K,
                          cfg.k_max_rep, rng_rs)
        realized: dict[int, Candidate] = {}
        new_pop = []
        for idx in chosen:
            cand = realized.get(idx)
            if cand is None:
                entry = entries[idx]
                if entry.proposal is None:
                    cand = entry.cand
                else:
                    state, lab, ns = entry.proposal
                    cand = grow_candidate(entry.cand, state, lab, ns, ctx,
                                          tipset)
                realized[idx] = cand
            new_pop.append(cand)
        population = new_pop
        iteration += 1

    for cand in population:
        if cand.score > best.score:
            best = cand

    if best.skeleton.num_edges == 0:
        raise SearchStalledError(
            "no eligible first edge from the base; nothing was grown")

    info = manifest if manifest is not None else {}
    info.update({
        "tips": list(tips),
        "base": seeds.base,
        "iterations": iteration,
        "best_score_history": history,
        "best_score": best.score,
        "reached_tips": sorted(best.reached & tipset),
        "abandoned_tips": sorted(best.abandoned),
        "prior_seconds": prior_time,
    })
    return best.skeleton, info
