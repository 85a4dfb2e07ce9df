"""Minimal-lie reporting under a quota, truthfulness checkers, and the
witness pipeline that certifies how much of a report merely permutes truths.

The quota forces an agent whose type vector has the wrong frequencies to
lie in some slots.  The minimum number of lies equals K times the total
variation distance between the vector's marginal and the quota
distribution; this module constructs the minimizers, checks reports against
three increasingly permissive standards, and produces an explicit
slot-subset-plus-bijection witness via a balanced-multigraph cycle
decomposition.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Union

from .core import (
    EnumerationCapError,
    Marginal,
    Message,
    PreferenceVector,
    Problem,
    Quota,
    ValidationError,
    Weights,
    marginal,
    tv_distance,
)

VectorLike = Union[Message, PreferenceVector]


def _entries(v: VectorLike) -> tuple[str, ...]:
    return v.entries if isinstance(v, Message) else v.entries


def _vector(v: VectorLike) -> PreferenceVector:
    return v.vector if isinstance(v, Message) else v


def compute_quota(prior: Union[Problem, Weights], K: int) -> Quota:
    """Round a prior onto the 1/K grid by largest remainders.

    The returned counts sum to K and minimize the total variation distance
    to the prior among all integer count vectors summing to K.  Leftover
    units after flooring go to the types with the largest fractional
    remainders, ties broken by canonical label order.
    """
    if isinstance(prior, Problem):
        prior = prior.prior
    if not isinstance(K, int) or isinstance(K, bool) or K < 1:
        raise ValidationError(f"K must be a positive integer, got {K!r}")
    types = tuple(sorted(prior))
    scaled = {t: K * Fraction(prior[t]) for t in types}
    counts = {t: math.floor(scaled[t]) for t in types}
    leftover = K - sum(counts.values())
    by_remainder = sorted(types, key=lambda t: (-(scaled[t] - counts[t]), t))
    for t in by_remainder[:leftover]:
        counts[t] += 1
    return Quota(types, tuple(counts[t] for t in types))


def lie_count(u: PreferenceVector, m: VectorLike) -> int:
    """Number of slots where the report differs from the truth."""
    me = _entries(m)
    if len(me) != u.K:
        raise ValidationError(f"report length {len(me)} != truth length {u.K}")
    return sum(a != b for a, b in zip(u.entries, me))


def min_lie_count(u: PreferenceVector, q: Quota) -> int:
    """Minimum number of lies over all quota-feasible messages.

    Equals K * tv_distance(marginal(u), quota distribution): with 0/1 slot
    costs, the cheapest way to meet the quota keeps min(count, budget)
    truthful slots per type and rewrites the rest.
    """
    if u.types != q.types:
        raise ValidationError(f"type sets differ: {u.types} vs {q.types}")
    if u.K != q.K:
        raise ValidationError(f"vector length {u.K} != quota total {q.K}")
    d = tv_distance(marginal(u), q)
    lies = u.K * d
    assert lies.denominator == 1
    return int(lies)


def star_lie_bound(u: PreferenceVector, q: Quota) -> int:
    """The relaxed lie budget: (#types - 1) times the minimum lie count."""
    return (len(u.types) - 1) * min_lie_count(u, q)


def iter_multiset_arrangements(counts: Mapping[str, int]) -> Iterator[tuple[str, ...]]:
    """All distinct orderings of a multiset of labels, lexicographically."""
    labels = sorted(t for t, c in counts.items() if c > 0)
    remaining = {t: counts[t] for t in labels}
    total = sum(remaining.values())
    if total == 0:
        yield ()
        return
    prefix: list[str] = []

    def rec():
        if len(prefix) == total:
            yield tuple(prefix)
            return
        for t in labels:
            if remaining[t] > 0:
                remaining[t] -= 1
                prefix.append(t)
                yield from rec()
                prefix.pop()
                remaining[t] += 1

    yield from rec()


def count_minimal_lie_messages(u: PreferenceVector, q: Quota) -> int:
    """Size of the minimal-lie message set, without enumerating it."""
    counts = u.counts()
    total = 1
    deficit_slots = 0
    deficit_fact = 1
    for t in q.types:
        have = counts.get(t, 0)
        budget = q.count(t)
        total *= math.comb(have, min(have, budget))
        if budget > have:
            deficit_slots += budget - have
            deficit_fact *= math.factorial(budget - have)
    total *= math.factorial(deficit_slots) // deficit_fact
    return total


def minimal_lie_messages(u: PreferenceVector, q: Quota, cap: int = 10**6) -> set[Message]:
    """All quota-feasible messages at the minimum Hamming distance from u.

    Every returned message keeps exactly min(count, budget) truthful slots
    per type; the remaining slots carry the deficit types.  Refuses when the
    set would exceed ``cap`` elements; use ``canonical_minimal_message`` or
    ``sample_minimal_message`` in that regime, neither of which enumerates.
    """
    target = min_lie_count(u, q)  # validates shapes
    n = count_minimal_lie_messages(u, q)
    if n > cap:
        raise EnumerationCapError(
            f"{n} minimal-lie messages exceed cap {cap}; "
            "use canonical_minimal_message or sample_minimal_message instead"
        )
    counts = u.counts()
    positions = defaultdict(list)
    for k, t in enumerate(u.entries):
        positions[t].append(k)
    surplus_types = [t for t in q.types if counts.get(t, 0) > q.count(t)]
    deficit = {t: q.count(t) - counts.get(t, 0) for t in q.types if q.count(t) > counts.get(t, 0)}

    import itertools

    keep_choices = [
        list(itertools.combinations(positions[t], q.count(t))) for t in surplus_types
    ]
    out: set[Message] = set()
    for keeps in itertools.product(*keep_choices):
        base = list(u.entries)
        free: list[int] = []
        for t, kept in zip(surplus_types, keeps):
            kept_set = set(kept)
            free.extend(p for p in positions[t] if p not in kept_set)
        free.sort()
        for arrangement in iter_multiset_arrangements(deficit):
            entries = base.copy()
            for slot, label in zip(free, arrangement):
                entries[slot] = label
            out.add(Message(PreferenceVector(tuple(entries), u.types), q))
    assert len(out) == n and all(lie_count(u, m) == target for m in out)
    return out


def canonical_minimal_message(u: PreferenceVector, q: Quota) -> Message:
    """First minimal-lie message in canonical (lexicographic) order.

    Greedy over slots: pick the smallest label that still allows the suffix
    to finish at the global minimum lie count.  No enumeration involved.
    """
    target = min_lie_count(u, q)
    remaining_truth = Counter(u.entries)
    remaining_quota = dict(zip(q.types, q.counts))
    types = q.types
    lies = 0
    out: list[str] = []
    for tru in u.entries:
        remaining_truth[tru] -= 1
        for r in types:
            if remaining_quota[r] == 0:
                continue
            remaining_quota[r] -= 1
            new_lies = lies + (r != tru)
            suffix_min = sum(
                c - remaining_quota[t]
                for t, c in remaining_truth.items()
                if c > remaining_quota[t]
            )
            if new_lies + suffix_min == target:
                out.append(r)
                lies = new_lies
                break
            remaining_quota[r] += 1
        else:  # pragma: no cover - minimum is always attainable
            raise RuntimeError("internal: no feasible label for slot")
    return Message(PreferenceVector(tuple(out), u.types), q)


def sample_minimal_message(u: PreferenceVector, q: Quota, rng) -> Message:
    """Draw uniformly from the minimal-lie message set without enumerating it.

    Independently keeps a uniform budget-sized subset of each over-supplied
    type's slots and scatters the deficit multiset uniformly over the freed
    slots.  ``rng`` is a ``numpy.random.Generator``; a fixed generator state
    yields a fixed message.
    """
    min_lie_count(u, q)  # validates shapes
    counts = u.counts()
    entries = list(u.entries)
    free: list[int] = []
    for t in q.types:
        pos = [k for k, x in enumerate(u.entries) if x == t]
        budget = q.count(t)
        if counts.get(t, 0) > budget:
            picked = rng.choice(len(pos), size=budget, replace=False)
            kept = {pos[int(i)] for i in picked}
            free.extend(p for p in pos if p not in kept)
    deficit: list[str] = []
    for t in q.types:
        deficit.extend([t] * max(q.count(t) - counts.get(t, 0), 0))
    free.sort()
    if deficit:
        order = rng.permutation(len(deficit))
        for slot, j in zip(free, order):
            entries[slot] = deficit[int(j)]
    return Message(PreferenceVector(tuple(entries), u.types), q)


def is_approx_truthful(u: PreferenceVector, m: Message) -> bool:
    """True when the report lies in exactly the minimum feasible number of slots."""
    return lie_count(u, m) == min_lie_count(u, m.quota)


def is_approx_truthful_star(u: PreferenceVector, m: Message) -> bool:
    """True when the lies stay within (#types - 1) times the minimum."""
    return lie_count(u, m) <= star_lie_bound(u, m.quota)


def is_permutation_truthful_naive(u: PreferenceVector, m: VectorLike, max_k: int = 12) -> bool:
    """Subset-scan reference checker, exponential in K.

    A report fails when some nonempty slot subset carries the same multiset
    of labels in truth and report without being slotwise equal (i.e. the
    report shuffles true types around).  Only for K <= ``max_k``.
    """
    me = _entries(m)
    k = u.K
    if len(me) != k:
        raise ValidationError(f"report length {len(me)} != truth length {k}")
    if k > max_k:
        raise ValidationError(f"naive subset scan refused for K={k} > {max_k}")
    ue = u.entries
    for mask in range(1, 1 << k):
        idx = [i for i in range(k) if mask >> i & 1]
        if sorted(ue[i] for i in idx) == sorted(me[i] for i in idx):
            if any(ue[i] != me[i] for i in idx):
                return False
    return True


def is_permutation_truthful(u: PreferenceVector, m: VectorLike) -> bool:
    """Fast checker: the lying slots must not close a directed cycle.

    Draw an arc truth -> report for every lying slot; the report shuffles
    truths on some subset exactly when these arcs contain a directed cycle.
    Agrees with ``is_permutation_truthful_naive`` wherever both run (enforced
    by the test suite, not assumed).
    """
    me = _entries(m)
    if len(me) != u.K:
        raise ValidationError(f"report length {len(me)} != truth length {u.K}")
    succ: dict[str, set[str]] = defaultdict(set)
    indeg: Counter = Counter()
    nodes: set[str] = set()
    for a, b in zip(u.entries, me):
        if a == b:
            continue
        nodes.update((a, b))
        if b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1
    queue = [v for v in nodes if indeg[v] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    return seen == len(nodes)


# --- balanced-multigraph witness pipeline ---


@dataclass(frozen=True)
class GraphEdge:
    label: int
    tail: str
    head: str
    is_new: bool = False


@dataclass(frozen=True)
class LinkGraph:
    """Directed multigraph pairing truth slots with report slots.

    Edge k (labels 1..K) runs from the true type in slot k to the reported
    type in slot k; balancing edges, when present, carry labels above K and
    ``is_new``.
    """

    nodes: tuple[str, ...]
    edges: tuple[GraphEdge, ...]
    original_count: int

    def out_degree(self, v: str) -> int:
        return sum(e.tail == v for e in self.edges)

    def in_degree(self, v: str) -> int:
        return sum(e.head == v for e in self.edges)

    def is_balanced(self) -> bool:
        return all(self.out_degree(v) == self.in_degree(v) for v in self.nodes)

    @property
    def new_edge_count(self) -> int:
        return sum(e.is_new for e in self.edges)

    def to_json_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "original_count": self.original_count,
            "edges": [
                {"label": e.label, "tail": e.tail, "head": e.head, "is_new": e.is_new}
                for e in self.edges
            ],
        }


@dataclass(frozen=True)
class CyclePartition:
    """Edge-disjoint cycles covering every edge, as lists of edge labels."""

    cycles: tuple[tuple[int, ...], ...]

    def to_json_dict(self) -> dict:
        return {"cycles": [list(c) for c in self.cycles]}


@dataclass(frozen=True)
class PermutationWitness:
    """A slot subset S and bijection on it along which the report permutes truths.

    ``pairs`` lists (k, pi(k)) for every k in S; report slot k equals truth
    slot pi(k).  The pairing is explicit so bijectivity is directly checkable.
    """

    slots: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]

    def mapping(self) -> dict[int, int]:
        return dict(self.pairs)

    def to_json_dict(self) -> dict:
        return {"S": list(self.slots), "pi": [list(p) for p in self.pairs]}


def build_link_graph(u: PreferenceVector, reported: VectorLike) -> LinkGraph:
    """One labeled edge per slot, truth type -> reported type."""
    re = _entries(reported)
    if len(re) != u.K:
        raise ValidationError(f"report length {len(re)} != truth length {u.K}")
    rv = _vector(reported)
    if rv.types != u.types:
        raise ValidationError(f"type sets differ: {u.types} vs {rv.types}")
    edges = tuple(
        GraphEdge(label=k + 1, tail=a, head=b) for k, (a, b) in enumerate(zip(u.entries, re))
    )
    return LinkGraph(nodes=u.types, edges=edges, original_count=u.K)


def balance_graph(g: LinkGraph) -> LinkGraph:
    """Add edges until every node has equal in- and out-degree.

    Each added edge leaves a node that currently receives more than it
    sends and enters a node that sends more than it receives; surpluses are
    matched in canonical node order.  The number of added edges equals
    K * tv_distance between the tail marginal and the head marginal.
    """
    if any(e.is_new for e in g.edges):
        raise ValidationError("balance_graph expects a freshly built graph")
    net = {v: g.out_degree(v) - g.in_degree(v) for v in g.nodes}
    senders = [v for v in g.nodes for _ in range(-net[v]) if net[v] < 0]
    receivers = [v for v in g.nodes for _ in range(net[v]) if net[v] > 0]
    assert len(senders) == len(receivers)
    label = g.original_count
    new_edges = []
    for tail, head in zip(senders, receivers):
        label += 1
        new_edges.append(GraphEdge(label=label, tail=tail, head=head, is_new=True))
    return LinkGraph(nodes=g.nodes, edges=g.edges + tuple(new_edges), original_count=g.original_count)


def cycle_partition(g: LinkGraph) -> CyclePartition:
    """Peel a balanced graph into edge-disjoint cycles covering every edge.

    Walks always consume the lowest available edge label, so the partition
    is deterministic; each walk is cut at the first repeated node, which
    also keeps every cycle's nodes distinct.
    """
    if not g.is_balanced():
        raise ValidationError("cycle_partition requires a balanced graph")
    by_label = {e.label: e for e in g.edges}
    outgoing: dict[str, list[int]] = defaultdict(list)
    for e in sorted(g.edges, key=lambda e: e.label):
        outgoing[e.tail].append(e.label)
    alive = set(by_label)
    cycles: list[tuple[int, ...]] = []

    def next_edge(node: str, in_path: set[int]) -> int:
        for lab in outgoing[node]:
            if lab in alive and lab not in in_path:
                return lab
        raise RuntimeError("internal: balanced graph ran out of outgoing edges")

    while alive:
        start = min(alive)
        e = by_label[start]
        path = [e]
        in_path = {start}
        node_pos = {e.tail: 0}
        cur = e.head
        while cur not in node_pos:
            node_pos[cur] = len(path)
            lab = next_edge(cur, in_path)
            e = by_label[lab]
            path.append(e)
            in_path.add(lab)
            cur = e.head
        cycle = [edge.label for edge in path[node_pos[cur]:]]
        pivot = cycle.index(min(cycle))
        cycles.append(tuple(cycle[pivot:] + cycle[:pivot]))
        alive.difference_update(cycle)
    return CyclePartition(tuple(cycles))


def permutation_witness(u: PreferenceVector, reported: VectorLike) -> PermutationWitness:
    """Certify the largest slot subset on which the report permutes truths.

    Builds the slot graph, balances it, peels cycles, and drops every cycle
    touching a balancing edge.  The surviving slot labels form S with the
    in-cycle successor map as the bijection; S covers at least
    K - (#types - 1) * K * tv(marginal(u), marginal(report)) slots.  Both
    guarantees are re-checked before returning.
    """
    g = balance_graph(build_link_graph(u, reported))
    part = cycle_partition(g)
    K = u.K
    slots: list[int] = []
    pairs: list[tuple[int, int]] = []
    for cycle in part.cycles:
        if any(lab > K for lab in cycle):
            continue
        slots.extend(cycle)
        for i, lab in enumerate(cycle):
            pairs.append((lab, cycle[(i + 1) % len(cycle)]))
    slots.sort()
    pairs.sort()
    witness = PermutationWitness(tuple(slots), tuple(pairs))

    re = _entries(reported)
    pi = witness.mapping()
    if sorted(pi) != slots or sorted(pi.values()) != slots:
        raise RuntimeError("internal: witness mapping is not a bijection on S")
    for k, pk in pi.items():
        if re[k - 1] != u.entries[pk - 1]:
            raise RuntimeError("internal: witness pairing does not map reports to truths")
    floor = K - (len(u.types) - 1) * K * tv_distance(marginal(u), marginal(_vector(reported)))
    if len(slots) < floor:
        raise RuntimeError("internal: witness covers fewer slots than guaranteed")
    return witness
