"""Bushy-tree combinatorics over finitely branching string spaces.

Strings are tuples of naturals; a node tau is valid for an order function g
when tau[i] < g(i) for every position i.  For a set B of strings and a stem
sigma, B is n-big above sigma (within a depth horizon) when sigma is in B,
or at least n immediate children of sigma have B n-big above them; n-small
means not n-big.  Members of B certify only nodes they weakly extend: a
strict prefix of sigma in B never makes B big above sigma.

The workhorse is `bushiness_numbers`, a single bottom-up pass computing for
every node tau of the region the largest n such that B is n-big above tau
(BIG_CAP for members).  Bigness queries, closures, and greedy witness
extraction all read off that table.  `brute_force_is_n_big` is the
deliberately naive mirror: a top-down existential search over n-subsets of
children, kept free of the production shortcuts so the two can be played
against each other in tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterable, Iterator, Optional

Node = tuple[int, ...]

BIG_CAP = 2**30  # bushiness number assigned to members of B


class MalformedTree(ValueError):
    """A node set that does not form a tree of the claimed shape."""


@dataclass(frozen=True)
class OrderFunction:
    """Branching widths by level: an explicit table, then a slow linear tail.

    value(n) = table[n] for n < len(table); past the table the value is
    max(table[-1], tail_base + (n - len(table)) // tail_period), or stays at
    table[-1] forever when tail_period == 0.  Values are >= 2 and
    nondecreasing, so deeper levels never get narrower.
    """

    table: tuple[int, ...]
    tail_base: int = 0
    tail_period: int = 0

    def __post_init__(self) -> None:
        if not self.table:
            raise ValueError("order function needs at least one table entry")
        if any(v < 2 for v in self.table):
            raise ValueError("branching widths must be >= 2")
        if any(a > b for a, b in zip(self.table, self.table[1:])):
            raise ValueError("branching widths must be nondecreasing")
        if self.tail_period < 0 or self.tail_base < 0:
            raise ValueError("tail parameters are naturals")

    @classmethod
    def constant(cls, width: int) -> "OrderFunction":
        return cls((width,))

    @classmethod
    def from_spec(cls, spec: str) -> "OrderFunction":
        """Parse "v0,v1,...[;tail=base,period]" (a bare "v" is constant v)."""
        spec = spec.strip()
        if ";" in spec:
            head, _, tail = spec.partition(";")
            tail = tail.strip()
            if not tail.startswith("tail="):
                raise ValueError(f"bad order function spec {spec!r}")
            parts = tail[len("tail="):].split(",")
            if len(parts) != 2:
                raise ValueError(f"bad tail in order function spec {spec!r}")
            base, period = (int(p) for p in parts)
        else:
            head, base, period = spec, 0, 0
        table = tuple(int(v) for v in head.split(","))
        return cls(table, base, period)

    def to_spec(self) -> str:
        head = ",".join(str(v) for v in self.table)
        if self.tail_period == 0:
            return head
        return f"{head};tail={self.tail_base},{self.tail_period}"

    def value(self, n: int) -> int:
        if n < 0:
            raise ValueError("levels are naturals")
        if n < len(self.table):
            return self.table[n]
        if self.tail_period == 0:
            return self.table[-1]
        return max(self.table[-1], self.tail_base + (n - len(self.table)) // self.tail_period)

    __call__ = value

    def validate_node(self, node: Node) -> bool:
        return all(0 <= v < self.value(i) for i, v in enumerate(node))

    def first_level_with(self, width: int, search_limit: int = 10**6) -> Optional[int]:
        """Least level n with value(n) >= width, or None if there is none."""
        for n, v in enumerate(self.table):
            if v >= width:
                return n
        if self.tail_period == 0:
            return None
        n = len(self.table)
        while self.value(n) < width:
            n += 1
            if n > search_limit:
                return None
        return n


def level_nodes(g: OrderFunction, depth: int, stem: Node = ()) -> Iterator[Node]:
    """All valid nodes of length exactly depth weakly extending stem."""
    if depth < len(stem):
        return
    widths = [range(g.value(i)) for i in range(len(stem), depth)]
    for suffix in product(*widths):
        yield stem + suffix


def region_nodes(g: OrderFunction, depth: int, stem: Node = ()) -> Iterator[Node]:
    """All valid nodes of length in [len(stem), depth] weakly extending stem."""
    for d in range(len(stem), depth + 1):
        yield from level_nodes(g, d, stem)


def validate_string_set(B: Iterable[Node], g: OrderFunction, depth: int) -> frozenset[Node]:
    B = frozenset(tuple(node) for node in B)
    for node in B:
        if len(node) > depth:
            raise ValueError(f"member {node} exceeds depth horizon {depth}")
        if not g.validate_node(node):
            raise ValueError(f"member {node} is not a valid string for g")
    return B


def bushiness_numbers(B: Iterable[Node], g: OrderFunction, depth: int,
                      stem: Node = ()) -> dict[Node, int]:
    """beta(tau) for every tau in the region above stem.

    beta(tau) is the largest n such that B is n-big above tau within the
    horizon (BIG_CAP when tau is a member).  Computed in one bottom-up pass:
    for a non-member with children betas sorted descending, beta(tau) is the
    largest n with at least n children of beta >= n.
    """
    B = validate_string_set(B, g, depth)
    beta: dict[Node, int] = {}
    for d in range(depth, len(stem) - 1, -1):
        for tau in level_nodes(g, d, stem):
            if tau in B:
                beta[tau] = BIG_CAP
            elif d == depth:
                beta[tau] = 0
            else:
                kids = sorted(
                    (beta[tau + (c,)] for c in range(g.value(d))), reverse=True)
                best = 0
                for i, v in enumerate(kids):
                    n = i + 1
                    if v >= n:
                        best = n
                    else:
                        break
                beta[tau] = best
    return beta


def is_n_big(B: Iterable[Node], n: int, g: OrderFunction, stem: Node = (),
             depth: int = 0) -> bool:
    """Whether B is n-big above stem within the depth horizon (n >= 1)."""
    if n < 1:
        raise ValueError("bigness is defined for n >= 1")
    beta = bushiness_numbers(B, g, depth, stem)
    return beta[stem] >= n


def is_n_small(B: Iterable[Node], n: int, g: OrderFunction, stem: Node = (),
               depth: int = 0) -> bool:
    return not is_n_big(B, n, g, stem, depth)


def closure(B: Iterable[Node], n: int, g: OrderFunction, depth: int) -> frozenset[Node]:
    """All tau in the full region with B n-big above tau.

    The result B* contains B, and every node outside B* has at most n - 1
    children inside B* (the pruning property `closure_check` verifies).
    """
    if n < 1:
        raise ValueError("bigness is defined for n >= 1")
    beta = bushiness_numbers(B, g, depth, ())
    return frozenset(tau for tau, v in beta.items() if v >= n)


@dataclass(frozen=True)
class TreeWitness:
    """A finite tree of strings above a stem, presented as its node set."""

    stem: Node
    nodes: frozenset[Node]

    def leaves(self) -> frozenset[Node]:
        parents = {node[:-1] for node in self.nodes if len(node) > len(self.stem)}
        return frozenset(node for node in self.nodes if node not in parents)

    def children_of(self, tau: Node) -> list[Node]:
        return sorted(n for n in self.nodes if len(n) == len(tau) + 1 and n[:-1] == tau)


def verify_tree_shape(witness: TreeWitness, g: OrderFunction) -> None:
    """Check the node set is a tree above its stem: raise MalformedTree if not."""
    if witness.stem not in witness.nodes:
        raise MalformedTree("stem missing from node set")
    for node in witness.nodes:
        if node[:len(witness.stem)] != witness.stem:
            raise MalformedTree(f"node {node} does not extend the stem")
        if not g.validate_node(node):
            raise MalformedTree(f"node {node} is not a valid string for g")
        if len(node) > len(witness.stem) and node[:-1] not in witness.nodes:
            raise MalformedTree(f"node {node} has no parent in the tree")


def verify_bushy(witness: TreeWitness, n: int, g: OrderFunction,
                 exactly: bool = False,
                 leaves_in: Optional[frozenset[Node]] = None) -> None:
    """Check the witness is n-bushy above its stem; raise MalformedTree if not.

    Every node with children must have at least n of them (exactly n when
    `exactly`).  When `leaves_in` is given, every leaf must belong to it.
    """
    verify_tree_shape(witness, g)
    child_count: dict[Node, int] = {}
    for node in witness.nodes:
        if len(node) > len(witness.stem):
            parent = node[:-1]
            child_count[parent] = child_count.get(parent, 0) + 1
    for node in witness.nodes:
        k = child_count.get(node, 0)
        if k == 0:
            continue  # a leaf
        if k < n or (exactly and k != n):
            raise MalformedTree(
                f"internal node {node} has {k} children, wanted {'exactly' if exactly else 'at least'} {n}")
    if leaves_in is not None:
        stray = frozenset(witness.nodes) - child_count.keys() - leaves_in
        if stray:
            raise MalformedTree(f"leaves outside the target set: {sorted(stray)[:3]}")


def witness_tree(B: Iterable[Node], n: int, g: OrderFunction, stem: Node,
                 depth: int, exactly: bool = True) -> TreeWitness:
    """Greedy lex-least n-bushy tree above stem with all leaves in B.

    Requires B to be n-big above stem; raises ValueError otherwise.  Members
    of B become leaves (descent stops), so the tree is as shallow as the
    marking allows.  With `exactly`, internal nodes keep exactly n children.
    """
    B = validate_string_set(B, g, depth)
    beta = bushiness_numbers(B, g, depth, stem)
    if beta[stem] < n:
        raise ValueError(f"set is not {n}-big above {stem} within depth {depth}")
    nodes = {stem}
    frontier = [stem]
    while frontier:
        tau = frontier.pop()
        if tau in B:
            continue
        picked = [c for c in range(g.value(len(tau))) if beta[tau + (c,)] >= n]
        if exactly:
            picked = picked[:n]
        for c in picked:
            child = tau + (c,)
            nodes.add(child)
            frontier.append(child)
    witness = TreeWitness(stem, frozenset(nodes))
    verify_bushy(witness, n, g, exactly=exactly, leaves_in=B)
    return witness


def brute_force_is_n_big(B: Iterable[Node], n: int, g: OrderFunction,
                         stem: Node, depth: int) -> bool:
    """Naive mirror of is_n_big: existential search over n-subsets of children."""
    B = frozenset(tuple(node) for node in B)

    def big(tau: Node) -> bool:
        if tau in B:
            return True
        if len(tau) >= depth:
            return False
        children = [tau + (c,) for c in range(g.value(len(tau)))]
        if n > len(children):
            return False
        return any(all(big(c) for c in combo) for combo in combinations(children, n))

    return big(tuple(stem))


# ---------------------------------------------------------------------------
# Lemma checkers.  Each returns a small verdict object rather than a bool so
# sweeps can count and serialize what they saw.

@dataclass(frozen=True)
class PreconditionViolated:
    reason: str


@dataclass(frozen=True)
class LemmaHolds:
    detail: str = ""


@dataclass(frozen=True)
class CounterexampleWitness:
    detail: str
    witness: Optional[TreeWitness] = None


LemmaVerdict = PreconditionViolated | LemmaHolds | CounterexampleWitness


def union_smallness_check(B1: Iterable[Node], m: int, B2: Iterable[Node], n: int,
                          g: OrderFunction, stem: Node, depth: int) -> LemmaVerdict:
    """Check: B1 m-small and B2 n-small above stem => union (m+n-1)-small.

    A CounterexampleWitness carries an (m+n-1)-bushy tree through the union,
    which would refute the lemma; sweeps count those (always zero).
    """
    B1 = validate_string_set(B1, g, depth)
    B2 = validate_string_set(B2, g, depth)
    stem = tuple(stem)
    if is_n_big(B1, m, g, stem, depth):
        return PreconditionViolated(f"first set is {m}-big above {stem}")
    if is_n_big(B2, n, g, stem, depth):
        return PreconditionViolated(f"second set is {n}-big above {stem}")
    union = B1 | B2
    if is_n_big(union, m + n - 1, g, stem, depth):
        tree = witness_tree(union, m + n - 1, g, stem, depth)
        return CounterexampleWitness(f"union is {m + n - 1}-big above {stem}", tree)
    return LemmaHolds(f"union is {m + n - 1}-small above {stem}")


def closure_check(B: Iterable[Node], n: int, g: OrderFunction, depth: int) -> LemmaVerdict:
    """Verify the pruning properties of B* = closure(B, n).

    Checks: B is contained in B*; every node outside B* has at most n - 1
    children inside B*; every node of B* outside B has at least n children
    inside B*.  The last two are what makes B* prunable: big sets can be
    thinned to bushy trees avoiding the complement of B*.
    """
    B = validate_string_set(B, g, depth)
    beta = bushiness_numbers(B, g, depth, ())
    missing = [tau for tau in B if beta[tau] < n]
    if missing:
        return CounterexampleWitness(f"members escaped the closure: {sorted(missing)[:3]}")
    for tau, v in beta.items():
        if len(tau) == depth:
            continue
        inside = sum(1 for c in range(g.value(len(tau))) if beta[tau + (c,)] >= n)
        if v < n and inside > n - 1:
            return CounterexampleWitness(
                f"node {tau} outside the closure has {inside} children inside")
        if v >= n and tau not in B and inside < n:
            return CounterexampleWitness(
                f"closure node {tau} not in the base has only {inside} children inside")
    size = sum(1 for v in beta.values() if v >= n)
    return LemmaHolds(f"closure of size {size} verified over {len(beta)} nodes")


def subtree_nodes(witness: TreeWitness, keep: frozenset[Node]) -> TreeWitness:
    """Restrict a tree to the kept nodes (stem always kept)."""
    nodes = {n for n in witness.nodes if n in keep} | {witness.stem}
    # drop orphans: a node survives only with its whole ancestor chain kept
    good = set()
    for node in sorted(nodes, key=len):
        if node == witness.stem or node[:-1] in good:
            good.add(node)
    return TreeWitness(witness.stem, frozenset(good))


def intersection_bushiness_check(ambient: TreeWitness, F: Iterable[Node],
                                 C: Iterable[Node], k: int,
                                 g: OrderFunction) -> LemmaVerdict:
    """Inside an exactly-6k-bushy ambient tree, two 4k-bushy subtrees meet 2k-bushily.

    F and C are node sets of subtrees of the ambient tree, each required to
    be 4k-bushy above the common stem with leaves among the ambient leaves.
    The verdict confirms F intersect C is 2k-bushy (witness included), or
    reports the node where the count argument fails.
    """
    F = frozenset(tuple(n) for n in F)
    C = frozenset(tuple(n) for n in C)
    try:
        verify_bushy(ambient, 6 * k, g, exactly=True)
    except MalformedTree as exc:
        return PreconditionViolated(f"ambient tree is not exactly {6 * k}-bushy: {exc}")
    leaves = ambient.leaves()
    for name, sub in (("first", F), ("second", C)):
        if not sub <= ambient.nodes:
            return PreconditionViolated(f"{name} subtree leaves the ambient tree")
        try:
            verify_bushy(TreeWitness(ambient.stem, sub), 4 * k, g, leaves_in=leaves)
        except MalformedTree as exc:
            return PreconditionViolated(f"{name} subtree is not {4 * k}-bushy: {exc}")
    inter = F & C
    tree = TreeWitness(ambient.stem, inter)
    try:
        verify_bushy(tree, 2 * k, g)
    except MalformedTree as exc:
        return CounterexampleWitness(f"intersection fails to be {2 * k}-bushy: {exc}", tree)
    return LemmaHolds(f"intersection of {len(inter)} nodes is {2 * k}-bushy")


def union_smallness_sweep(g: OrderFunction, depth: int,
                          pairs: Iterable[tuple[int, int]],
                          stems: Iterable[Node] = ((),),
                          region_cap: int = 20) -> dict:
    """Exhaustive counterexample search for additivity of smallness.

    For every stem, every subset U of its region, and every (n, m) pair:
    whenever U is (n + m - 1)-big, each two-coloring of U must leave the
    first class m-big or the second n-big.  Disjoint colorings suffice,
    since parts only shrink under disjointification and bigness is
    monotone.  Returns the count of checked big unions and the (expected
    empty) list of counterexample certificates.
    """
    from .errors import CombinatorialBlowup

    pair_list = sorted({(int(n), int(m)) for n, m in pairs})
    if any(n < 1 or m < 1 for n, m in pair_list):
        raise ValueError("bigness parameters must be >= 1")
    instances = 0
    counterexamples: list[dict] = []
    for stem in stems:
        stem = tuple(stem)
        region = sorted(region_nodes(g, depth, stem))
        if len(region) > region_cap:
            raise CombinatorialBlowup(
                f"region above {stem} has {len(region)} nodes",
                upper_bound=1 << len(region))
        # beta of every subset once; split checks are then table lookups
        beta = [0] * (1 << len(region))
        for mask in range(1, 1 << len(region)):
            members = [region[i] for i in range(len(region)) if mask >> i & 1]
            beta[mask] = bushiness_numbers(members, g, depth, stem)[stem]
        for n, m in pair_list:
            target = n + m - 1
            for mask in range(1 << len(region)):
                if beta[mask] < target:
                    continue
                instances += 1
                sub = mask
                while True:
                    if beta[sub] < m and beta[mask ^ sub] < n:
                        counterexamples.append({
                            "kind": "union_counterexample",
                            "g": g.to_spec(),
                            "depth": depth,
                            "stem": list(stem),
                            "n": n,
                            "m": m,
                            "union": [list(region[i]) for i in range(len(region))
                                      if mask >> i & 1],
                            "part_small_m": [list(region[i]) for i in range(len(region))
                                             if sub >> i & 1],
                            "part_small_n": [list(region[i]) for i in range(len(region))
                                             if (mask ^ sub) >> i & 1],
                        })
                    if sub == 0:
                        break
                    sub = (sub - 1) & mask
    return {"instances": instances, "counterexamples": counterexamples}
