"""Forcing with bushy trees against finite functional tables.

A condition is a pair (stem, badset) over an order function g, with the
badset g(|stem|)-small above the stem.  Functionals are finite monotone
tables from strings to output bit strings whose domains are initial
segments of the naturals, so a node that decides output position m also
decides every earlier position.

The module builds the finite combinatorial objects of the density argument:

* C_m, the set of nodes deciding output position m, and its 7k/6k staging
  into exactly-6k-bushy totality trees avoiding the k-closure of the badset;
* Delta sets (nodes deciding position m with a given bit) and the fusion of
  many (position, bit) constraints onto one 2k-bushy tree;
* the k-bushy zero-forcing tree of the no-fusion case;
* density_search, which turns a functional, a toy program index q, and a
  condition into a verdict: a non-totality extension, a diagonalizing
  extension with a replayable certificate built through the recursion
  theorem, or an honest budget report with the partial trace;
* the budgeted bad-string set for diagonally nonrecursive behavior and
  generic_prefix, which runs a list of requirements from the empty stem.

Searches are deterministic: ties break lexicographically, traces are plain
data, and every certificate embeds what a replay needs.

One point deserves a note because the staging is delicate: when fusing many
constraints, each stage's tree searches are restricted to nodes whose
outputs agree with all previously fused (position, bit) pairs wherever
decided.  Since domains are initial segments, any node deciding a later
position has decided all fused earlier ones, so leaves of every stage tree
honor the whole fused list, not just the newest pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .asm import assemble_index
from .bushy import (
    BIG_CAP,
    Node,
    OrderFunction,
    TreeWitness,
    bushiness_numbers,
    closure,
    is_n_big,
    level_nodes,
    region_nodes,
    validate_string_set,
    verify_bushy,
)
from .machine import (
    Halted,
    ProgramIndex,
    eval_program,
    fixed_point,
    smn_fill,
)
from .oracle import BitOracle


class BignessUnavailable(Exception):
    """A bigness hypothesis failed during a staged construction.

    `what` is "totality" when C_m failed to be 7k-big above `node` (the
    non-totality extension is then available there), and "zero_delta" when a
    zero-side Delta set failed its 2k-bigness check in the no-fusion case.
    """

    def __init__(self, position: int, node: Node, what: str = "totality") -> None:
        super().__init__(f"bigness unavailable at position {position} above {node} ({what})")
        self.position = position
        self.node = node
        self.what = what


class PigeonholeExhausted(Exception):
    """The table's finite depth cannot sustain the requested fusion count."""

    def __init__(self, achieved: int, requested: int) -> None:
        super().__init__(f"fused {achieved} of the requested {requested} inputs")
        self.achieved = achieved
        self.requested = requested


class BudgetExceededError(Exception):
    """Raised by generic_prefix when a density search could not close."""

    def __init__(self, trace: list) -> None:
        super().__init__("budget exceeded during generic prefix construction")
        self.trace = trace


@dataclass(frozen=True)
class SearchLimits:
    """Budgets for the machine-facing parts of the searches."""

    eval_budget: int = 100_000
    fixpoint_budget: int = 10_000
    bad_string_len: int = 4

    def replace(self, **kw) -> "SearchLimits":
        data = {"eval_budget": self.eval_budget, "fixpoint_budget": self.fixpoint_budget,
                "bad_string_len": self.bad_string_len}
        data.update(kw)
        return SearchLimits(**data)

    def to_jsonable(self) -> dict:
        return {"eval_budget": self.eval_budget, "fixpoint_budget": self.fixpoint_budget,
                "bad_string_len": self.bad_string_len}


# ---------------------------------------------------------------------------
# Finite functionals.

@dataclass(frozen=True)
class FiniteFunctional:
    """A finite monotone table from strings to 0/1 output strings.

    The output at a node is the table value of its longest tabled prefix
    (empty if none), so outputs are automatically monotone along extensions
    once the tabled entries are pairwise coherent, which construction
    verifies.  Output positions form an initial segment: the value at a node
    is a plain bit tuple.
    """

    depth: int
    table: tuple[tuple[Node, tuple[int, ...]], ...]

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ValueError("depth is a natural")
        seen: dict[Node, tuple[int, ...]] = {}
        for node, out in self.table:
            if len(node) > self.depth:
                raise ValueError(f"table key {node} exceeds depth {self.depth}")
            if any(b not in (0, 1) for b in out):
                raise ValueError(f"output bits must be 0/1 at {node}")
            if node in seen:
                raise ValueError(f"duplicate table key {node}")
            seen[node] = out
        for node, out in seen.items():
            for cut in range(len(node) - 1, -1, -1):
                prefix = node[:cut]
                if prefix in seen:
                    if seen[prefix] != out[:len(seen[prefix])]:
                        raise ValueError(
                            f"monotonicity violation: table({prefix}) is not a prefix of table({node})")
                    break
        object.__setattr__(self, "table", tuple(sorted(seen.items())))

    @classmethod
    def from_entries(cls, depth: int, entries: Mapping[Node, Sequence[int]] |
                     Iterable[tuple[Node, Sequence[int]]]) -> "FiniteFunctional":
        if isinstance(entries, Mapping):
            entries = entries.items()
        return cls(depth, tuple((tuple(n), tuple(o)) for n, o in entries))

    @classmethod
    def constant(cls, depth: int, bits: Sequence[int]) -> "FiniteFunctional":
        """The functional outputting `bits` on every node, the root included."""
        return cls(depth, (((), tuple(bits)),))

    def _lookup(self) -> dict[Node, tuple[int, ...]]:
        return dict(self.table)

    def output(self, node: Node) -> tuple[int, ...]:
        """Output bits at `node`: the value of its longest tabled prefix."""
        node = tuple(node)
        if len(node) > self.depth:
            raise ValueError(f"node {node} exceeds functional depth {self.depth}")
        lookup = self._lookup()
        for cut in range(len(node), -1, -1):
            prefix = node[:cut]
            if prefix in lookup:
                return lookup[prefix]
        return ()

    def decided_length(self, node: Node) -> int:
        return len(self.output(node))

    def max_output_length(self) -> int:
        return max((len(out) for _, out in self.table), default=0)

    def to_jsonable(self) -> dict:
        return {"depth": self.depth,
                "entries": [[list(node), list(out)] for node, out in self.table]}

    @classmethod
    def from_jsonable(cls, data: Mapping) -> "FiniteFunctional":
        return cls.from_entries(int(data["depth"]),
                                [(tuple(n), tuple(o)) for n, o in data["entries"]])


# ---------------------------------------------------------------------------
# Conditions.

def _badset_horizon(stem: Node, badset: frozenset[Node]) -> int:
    return max([len(stem)] + [len(b) for b in badset])


@dataclass(frozen=True)
class ForcingCondition:
    """A stem with a badset that is g(|stem|)-small above it."""

    stem: Node
    badset: frozenset[Node]
    g: OrderFunction

    def __post_init__(self) -> None:
        object.__setattr__(self, "stem", tuple(self.stem))
        object.__setattr__(self, "badset", frozenset(tuple(b) for b in self.badset))
        if not self.g.validate_node(self.stem):
            raise ValueError(f"stem {self.stem} is not a valid string for g")
        horizon = _badset_horizon(self.stem, self.badset)
        validate_string_set(self.badset, self.g, horizon)
        bound = self.g(len(self.stem))
        if is_n_big(self.badset, bound, self.g, self.stem, horizon):
            raise ValueError(
                f"badset is {bound}-big above the stem, condition invalid")

    def smallness_degree(self) -> int:
        """Least k with the badset k-small above the stem."""
        horizon = _badset_horizon(self.stem, self.badset)
        beta = bushiness_numbers(self.badset, self.g, horizon, self.stem)
        return beta[self.stem] + 1


def condition_extends(c1: ForcingCondition, c2: ForcingCondition) -> bool:
    """Whether c1 extends c2: longer stem, larger badset, same order function."""
    return (c1.g == c2.g
            and c1.stem[:len(c2.stem)] == c2.stem
            and c2.badset <= c1.badset)


# ---------------------------------------------------------------------------
# Delta sets and C_m.

@dataclass(frozen=True)
class DeltaSet:
    strings: frozenset[Node]
    m: int
    i: int


def delta_set(gamma_table: FiniteFunctional, tree: TreeWitness, m: int, i: int) -> DeltaSet:
    """Nodes of the tree whose output decides position m with bit i."""
    if i not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    if m >= gamma_table.max_output_length():
        raise ValueError(f"position {m} is beyond every tabled output")
    members = frozenset(
        node for node in tree.nodes
        if len(out := gamma_table.output(node)) > m and out[m] == i)
    return DeltaSet(members, m, i)


def c_m_set(gamma_table: FiniteFunctional, g: OrderFunction, stem: Node,
            m: int) -> frozenset[Node]:
    """All nodes above stem (within the table depth) deciding position m."""
    return frozenset(
        node for node in region_nodes(g, gamma_table.depth, tuple(stem))
        if gamma_table.decided_length(node) > m)


def _c_m_minimal(gamma_table: FiniteFunctional, g: OrderFunction, stem: Node,
                 m: int) -> frozenset[Node]:
    """Minimal nodes above stem deciding position m (their extensions all do)."""
    out = []
    for node in region_nodes(g, gamma_table.depth, stem):
        if gamma_table.decided_length(node) <= m:
            continue
        if len(node) > len(stem) and gamma_table.decided_length(node[:-1]) > m:
            continue
        out.append(node)
    return frozenset(out)


# ---------------------------------------------------------------------------
# Avoid-aware marking: bigness with a pruned node set.

def _avoid_beta(target: frozenset[Node], avoid: frozenset[Node], g: OrderFunction,
                stem: Node, depth: int) -> dict[Node, int]:
    """Bushiness numbers where nodes in `avoid` are forbidden outright."""
    beta: dict[Node, int] = {}
    for d in range(depth, len(stem) - 1, -1):
        for tau in level_nodes(g, d, stem):
            if tau in avoid:
                beta[tau] = 0
            elif tau in target:
                beta[tau] = BIG_CAP
            elif d == depth:
                beta[tau] = 0
            else:
                kids = sorted((beta[tau + (c,)] for c in range(g.value(d))), reverse=True)
                best = 0
                for idx, v in enumerate(kids):
                    if v >= idx + 1:
                        best = idx + 1
                    else:
                        break
                beta[tau] = best
    return beta


def _beta_witness(beta: Mapping[Node, int], target: frozenset[Node], n: int,
                  g: OrderFunction, stem: Node, exactly: bool = True) -> TreeWitness:
    """Greedy lex-least n-bushy tree read off a beta table, leaves in target."""
    if beta[stem] < n:
        raise ValueError(f"marking is only {beta[stem]}-big above {stem}, wanted {n}")
    nodes = {stem}
    frontier = [stem]
    while frontier:
        tau = frontier.pop()
        if tau in target:
            continue
        picked = [c for c in range(g.value(len(tau))) if beta[tau + (c,)] >= n]
        if exactly:
            picked = picked[:n]
        for c in picked:
            child = tau + (c,)
            nodes.add(child)
            frontier.append(child)
    return TreeWitness(stem, frozenset(nodes))


def big_avoiding(target: Iterable[Node], n: int, g: OrderFunction, stem: Node,
                 depth: int, avoid: Iterable[Node] = ()) -> bool:
    """Whether target is n-big above stem by trees avoiding `avoid` entirely."""
    target = frozenset(tuple(t) for t in target)
    avoid = frozenset(tuple(a) for a in avoid)
    return _avoid_beta(target - avoid, avoid, g, stem, depth)[tuple(stem)] >= n


def witness_avoiding(target: Iterable[Node], n: int, g: OrderFunction, stem: Node,
                     depth: int, avoid: Iterable[Node] = (),
                     exactly: bool = True) -> TreeWitness:
    target = frozenset(tuple(t) for t in target)
    avoid = frozenset(tuple(a) for a in avoid)
    stem = tuple(stem)
    beta = _avoid_beta(target - avoid, avoid, g, stem, depth)
    return _beta_witness(beta, target - avoid, n, g, stem, exactly=exactly)


# ---------------------------------------------------------------------------
# Totality trees.

def _badset_closure(badset: frozenset[Node], k: int, g: OrderFunction, depth: int) -> frozenset[Node]:
    if not badset:
        return frozenset()
    horizon = max(depth, max(len(b) for b in badset))
    closed = closure(badset, k, g, horizon)
    return frozenset(node for node in closed if len(node) <= depth) | badset


def build_totality_tree(gamma_table: FiniteFunctional, tau: Node, k: int,
                        target_len: int, badset: Iterable[Node],
                        g: OrderFunction) -> TreeWitness:
    """Exactly-6k-bushy tree above tau whose leaves decide positions < target_len.

    Stages m = 0, 1, ... extend every leaf not yet deciding position m by an
    exactly-6k graft with leaves in C_m, all nodes avoiding the k-closure of
    the badset.  Raises BignessUnavailable(m, rho) when C_m fails to be
    7k-big above a leaf rho, which is exactly when the non-totality
    extension (rho, badset plus C_m) is available.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    tau = tuple(tau)
    badset = frozenset(tuple(b) for b in badset)
    depth = gamma_table.depth
    avoid = _badset_closure(badset, k, g, depth)
    if tau in avoid:
        raise ValueError(f"stem {tau} lies in the badset closure")
    nodes: set[Node] = {tau}
    leaves = [tau]
    for m in range(target_len):
        new_leaves: list[Node] = []
        for rho in sorted(leaves):
            if gamma_table.decided_length(rho) > m:
                new_leaves.append(rho)
                continue
            cm = c_m_set(gamma_table, g, rho, m)
            if not is_n_big(cm, 7 * k, g, rho, depth):
                raise BignessUnavailable(m, rho, "totality")
            beta = _avoid_beta(cm - avoid, avoid, g, rho, depth)
            # 7k-big minus a k-small closure leaves 6k; failure here is a bug
            assert beta[rho] >= 6 * k, "pruning lemma violated"
            graft = _beta_witness(beta, cm - avoid, 6 * k, g, rho, exactly=True)
            nodes.update(graft.nodes)
            new_leaves.extend(graft.leaves())
        leaves = new_leaves
    tree = TreeWitness(tau, frozenset(nodes))
    verify_bushy(tree, 6 * k, g, exactly=True)
    return tree


# ---------------------------------------------------------------------------
# Fusion.

def _constraint_set(gamma_table: FiniteFunctional, source: Iterable[Node],
                    constraints: Sequence[tuple[int, int]]) -> frozenset[Node]:
    """Nodes among `source` deciding every constrained position with its bit."""
    out = []
    for node in source:
        bits = gamma_table.output(node)
        if all(m < len(bits) and bits[m] == i for m, i in constraints):
            out.append(node)
    return frozenset(out)


def fusion_step(gamma_table: FiniteFunctional, tau: Node, k: int,
                big_inputs: Sequence[tuple[int, int]], g: OrderFunction,
                badset: Iterable[Node] = (), within: Optional[TreeWitness] = None,
                require_count: int = 1) -> tuple[TreeWitness, list[tuple[int, int]]]:
    """Fuse (position, bit) constraints onto one 2k-bushy tree above tau.

    Each listed (m, i) must come with Delta_{tau,m,i} 4k-big above tau
    (checked).  Constraints are accepted greedily in the given order as long
    as the nodes satisfying all accepted constraints stay 2k-big above tau
    by trees avoiding the k-closure of the badset; the returned tree's
    leaves decide every accepted position with its fused bit.  Raises
    PigeonholeExhausted when fewer than require_count constraints survive.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    tau = tuple(tau)
    badset = frozenset(tuple(b) for b in badset)
    depth = gamma_table.depth
    source = tuple(sorted(within.nodes)) if within is not None \
        else tuple(region_nodes(g, depth, tau))
    for m, i in big_inputs:
        delta = _constraint_set(gamma_table, source, [(m, i)])
        if not is_n_big(delta, 4 * k, g, tau, depth):
            raise ValueError(
                f"precondition failed: Delta at ({m}, {i}) is not {4 * k}-big above {tau}")
    avoid = _badset_closure(badset, k, g, depth)
    if tau in avoid:
        raise ValueError(f"stem {tau} lies in the badset closure")
    fused: list[tuple[int, int]] = []
    kept = _constraint_set(gamma_table, source, [])
    for m, i in big_inputs:
        candidate = fused + [(m, i)]
        cand_set = _constraint_set(gamma_table, source, candidate)
        if big_avoiding(cand_set, 2 * k, g, tau, depth, avoid):
            fused = candidate
            kept = cand_set
    if len(fused) < require_count:
        raise PigeonholeExhausted(len(fused), require_count)
    tree = witness_avoiding(kept, 2 * k, g, tau, depth, avoid, exactly=True)
    for m, i in fused:
        for leaf in tree.leaves():
            bits = gamma_table.output(leaf)
            assert m < len(bits) and bits[m] == i, "fused constancy lost"
    return tree, fused


# ---------------------------------------------------------------------------
# Case 2: zero forcing.

def case2_zero_tree(gamma_table: FiniteFunctional, sigma: Node, k: int, count: int,
                    badset: Iterable[Node], m_map: Mapping[Node, int],
                    g: OrderFunction) -> tuple[TreeWitness, list[int]]:
    """k-bushy tree above sigma forcing `count` output positions to 0.

    Stage j picks the least admissible position n_j (at least one past the
    previous, and at least m_map's bound for every current leaf), builds an
    exactly-6k totality tree above each leaf (BignessUnavailable with
    what="totality" propagates when C at the position fails its 7k-bigness
    there), checks the tree's zero-side Delta set is 2k-big above the leaf
    (what="zero_delta" when no admissible position sustains it), and grafts
    k-bushy trees with leaves in the zero side avoiding the badset closure.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    sigma = tuple(sigma)
    badset = frozenset(tuple(b) for b in badset)
    depth = gamma_table.depth
    avoid = _badset_closure(badset, k, g, depth)
    if sigma in avoid:
        raise ValueError(f"stem {sigma} lies in the badset closure")
    capacity = gamma_table.max_output_length()
    nodes: set[Node] = {sigma}
    leaves: list[Node] = [sigma]
    zeros: list[int] = []
    for _ in range(count):
        floor = max([zeros[-1] + 1 if zeros else 0]
                    + [m_map.get(rho, 0) for rho in leaves])
        chosen = None
        last_failure: Optional[tuple[int, Node]] = None
        for position in range(floor, capacity):
            ok = True
            grafts: dict[Node, TreeWitness] = {}
            for rho in sorted(leaves):
                # totality must persist above every leaf before zeros are forced
                tree_rho = build_totality_tree(
                    gamma_table, rho, k, position + 1, badset, g)
                zero_delta = delta_set(gamma_table, tree_rho, position, 0).strings
                if not is_n_big(zero_delta, 2 * k, g, rho, depth):
                    ok = False
                    last_failure = (position, rho)
                    break
                beta = _avoid_beta(zero_delta - avoid, avoid, g, rho, depth)
                # 2k-big minus a k-small closure leaves k; failure is a bug
                assert beta[rho] >= k, "pruning lemma violated"
                grafts[rho] = _beta_witness(beta, zero_delta - avoid, k, g, rho,
                                            exactly=True)
            if ok:
                chosen = position
                break
        if chosen is None:
            if last_failure is not None:
                raise BignessUnavailable(last_failure[0], last_failure[1], "zero_delta")
            raise BignessUnavailable(floor, min(leaves), "zero_delta")
        new_leaves: list[Node] = []
        for rho in sorted(leaves):
            graft = grafts[rho]
            nodes.update(graft.nodes)
            new_leaves.extend(graft.leaves())
        zeros.append(chosen)
        leaves = new_leaves
    tree = TreeWitness(sigma, frozenset(nodes))
    verify_bushy(tree, k, g)
    for leaf in tree.leaves():
        bits = gamma_table.output(leaf)
        assert all(n < len(bits) and bits[n] == 0 for n in zeros), "zero forcing lost"
        assert leaf not in badset
    return tree, zeros


# ---------------------------------------------------------------------------
# Bad strings for diagonally nonrecursive behavior.

def dnr_bad_strings(g: OrderFunction, oracle: Optional[BitOracle], max_len: int,
                    budget: int) -> frozenset[Node]:
    """Strings sigma with sigma(e) = phi_e(e) for some e < |sigma| at this budget.

    The budget-s approximation of the set of strings that cannot head a
    diagonally nonrecursive function relative to the oracle; nondecreasing
    in the budget.
    """
    diag: dict[int, int] = {}
    for e in range(max_len):
        out = eval_program(e, e, budget, oracle)
        if isinstance(out, Halted):
            diag[e] = out.value
    bad = []
    for node in region_nodes(g, max_len):
        if any(diag.get(e) == v for e, v in enumerate(node)):
            bad.append(node)
    return frozenset(bad)


# ---------------------------------------------------------------------------
# Density search.

@dataclass(frozen=True)
class NonTotalExt:
    """Extension forcing the functional to stay partial past position m."""

    condition: ForcingCondition
    m: int
    certificate: dict
    trace: tuple = ()


@dataclass(frozen=True)
class DiagonalExt:
    """Extension with a diagonalizing r.e.-set certificate."""

    condition: ForcingCondition
    certificate: dict
    trace: tuple = ()


@dataclass(frozen=True)
class BudgetExceeded:
    """The search could not close either case at this scale."""

    reason: str
    trace: tuple = ()


DensityVerdict = NonTotalExt | DiagonalExt | BudgetExceeded


def _tree_jsonable(tree: TreeWitness) -> dict:
    return {"stem": list(tree.stem), "nodes": sorted(list(n) for n in tree.nodes)}


def _lengthen_stem(stem: Node, target_length: int, avoid: frozenset[Node],
                   g: OrderFunction) -> Node:
    tau = tuple(stem)
    while len(tau) < target_length:
        for c in range(g.value(len(tau))):
            if tau + (c,) not in avoid:
                tau = tau + (c,)
                break
        else:
            raise AssertionError("closure property violated: no child escapes")
    return tau


def _master_driver_index(q: ProgramIndex, a0: int, a1: int, big_k: int, cap: int) -> ProgramIndex:
    """Assemble the self-referential enumerator behind the diagonal indices.

    Input pair(u, pair(i, n)): derive e_0, e_1 from u by s-m-n, run q on
    both, set c = min(2 max + 1, cap), select the c-th packed mask of A_i
    (base K digits), and halt exactly when bit n of that mask is set.
    """
    kk = big_k
    return assemble_index(f"""
        # input pair(u, pair(i, n)); r6 stays 0 and serves as constant zero
        left r1, r0            # u
        right r2, r0           # pair(i, n)
        left r3, r2            # i
        right r4, r2           # n
        smn r5, r1, r6         # e_0
        load r7, 1
        smn r8, r1, r7         # e_1
        load r9, {q}
        univ r10, r9, r5       # q(e_0)
        univ r11, r9, r8       # q(e_1)
        sub r12, r10, r11
        add r13, r11, r12      # m = max(q(e_0), q(e_1))
        add r13, r13, r13
        load r12, 1
        add r13, r13, r12      # 2m + 1
        load r12, {cap}
        sub r14, r13, r12
        jz r14, capped
        mov r13, r12           # c = min(2m + 1, cap)
    capped:
        load r12, {a0}
        jz r3, selected
        load r12, {a1}
    selected:
        load r15, {kk}
    unpack:
        jz r13, extract        # mask = (A_i div K^c) mod K
        div r12, r12, r15
        load r14, 1
        sub r13, r13, r14
        jmp unpack
    extract:
        mod r12, r12, r15
        load r15, 2
    probe:
        jz r4, test            # bit n of the mask
        div r12, r12, r15
        load r14, 1
        sub r4, r4, r14
        jmp probe
    test:
        mod r12, r12, r15
        jz r12, stuck
        halt r6
    stuck:
    """)


def _diagonal_pair(q: ProgramIndex, a0: int, a1: int, big_k: int, cap: int,
                   limits: SearchLimits) -> tuple[ProgramIndex, ProgramIndex, ProgramIndex]:
    driver = _master_driver_index(q, a0, a1, big_k, cap)
    transform = assemble_index(f"""
        load r1, {driver}
        smn r2, r1, r0
        halt r2
    """)
    e_star = fixed_point(transform, limits.fixpoint_budget)
    return smn_fill(e_star, 0), smn_fill(e_star, 1), e_star


def _packed_masks(fused: Sequence[tuple[int, int]], horizon: int) -> tuple[int, int, int]:
    """A_0, A_1 packing per-count masks of the fused prefix, and the base K."""
    big_k = 1 << horizon
    a = [0, 0]
    for c in range(len(fused) + 1):
        for side in (0, 1):
            mask = 0
            for m, i in fused[:c]:
                if i == side:
                    mask |= 1 << m
            a[side] += mask * big_k ** c
    return a[0], a[1], big_k


def _audit_membership(e: ProgramIndex, members: frozenset[int], horizon: int,
                      budget: int) -> bool:
    for n in range(horizon):
        out = eval_program(e, n, budget)
        if (n in members) != isinstance(out, Halted):
            return False
    return True


def density_search(gamma_table: FiniteFunctional, q: ProgramIndex,
                   cond: ForcingCondition,
                   limits: SearchLimits = SearchLimits()) -> DensityVerdict:
    """Find an extension of cond deciding the (gamma_table, q) requirement.

    Returns NonTotalExt when some C_m is 7k-small above a reachable node (the
    extension forces the functional partial), DiagonalExt when a fused or
    zero-forced tree plus a recursion-theorem index pair diagonalizes against
    q (certificate included), and BudgetExceeded with the partial trace when
    the finite table sustains neither.
    """
    g = cond.g
    trace: list = []
    k = cond.smallness_degree()
    trace.append({"step": "close_badset", "k": k})
    depth = gamma_table.depth
    level = g.first_level_with(8 * k)
    if level is None:
        trace.append({"step": "fail", "reason": f"order function never reaches {8 * k}"})
        return BudgetExceeded(f"order function never reaches {8 * k}", tuple(trace))
    target_length = max(level, len(cond.stem))
    if target_length > depth:
        trace.append({"step": "fail",
                      "reason": f"needed stem length {target_length} exceeds table depth {depth}"})
        return BudgetExceeded("table too shallow for the required stem length", tuple(trace))
    avoid = _badset_closure(cond.badset, k, g, max(depth, _badset_horizon(cond.stem, cond.badset)))
    tau0 = _lengthen_stem(cond.stem, target_length, avoid, g)
    trace.append({"step": "lengthen_stem", "stem": list(tau0), "width_bound": 8 * k})
    target_len = max(gamma_table.max_output_length(), 1)

    def non_total(position: int, node: Node) -> NonTotalExt:
        cm_min = _c_m_minimal(gamma_table, g, node, position)
        assert not is_n_big(c_m_set(gamma_table, g, node, position), 7 * k, g, node, depth)
        new_cond = ForcingCondition(node, cond.badset | cm_min, g)
        cert = {
            "kind": "non_total_extension",
            "g": g.to_spec(),
            "functional": gamma_table.to_jsonable(),
            "k": k,
            "stem": list(node),
            "m": position,
            "smallness_bound": 7 * k,
            "c_m_minimal": sorted(list(n) for n in cm_min),
            "badset_before": sorted(list(b) for b in cond.badset),
        }
        trace.append({"step": "non_total_extension", "m": position, "stem": list(node)})
        return NonTotalExt(new_cond, position, cert, tuple(trace))

    try:
        totality = build_totality_tree(gamma_table, tau0, k, target_len, cond.badset, g)
        trace.append({"step": "totality_tree", "target_len": target_len,
                      "size": len(totality.nodes)})
    except BignessUnavailable as exc:
        return non_total(exc.position, exc.node)

    # Delta sets are judged within the constructed tree: the case split is
    # whether the deciding level carries a >= 4k majority for one bit
    big_inputs: list[tuple[int, int]] = []
    for m in range(target_len):
        for i in (0, 1):
            delta = delta_set(gamma_table, totality, m, i)
            if is_n_big(delta.strings, 4 * k, g, tau0, depth):
                big_inputs.append((m, i))
                break
    trace.append({"step": "big_inputs", "pairs": [list(p) for p in big_inputs]})

    def finish(tree: TreeWitness, bushiness: int, fused: Sequence[tuple[int, int]],
               e0: int, e1: int, v0: int, v1: int, cap: int, label: str) -> DensityVerdict:
        m_val = max(v0, v1)
        c = min(2 * m_val + 1, cap)
        w0 = frozenset(m for m, i in fused[:c] if i == 0)
        w1 = frozenset(m for m, i in fused[:c] if i == 1)
        winner = 0 if len(w0) > m_val else 1
        w_win = (w0, w1)[winner]
        if len(w_win) <= m_val:
            trace.append({"step": "fail", "reason": "pigeonhole shortfall after q evaluation"})
            return BudgetExceeded("diagonal sets too small after q evaluation", tuple(trace))
        e_win = (e0, e1)[winner]
        if not _audit_membership(e_win, w_win, target_len, limits.eval_budget):
            trace.append({"step": "fail", "reason": "enumeration audit failed at this budget"})
            return BudgetExceeded("enumeration audit failed at this budget", tuple(trace))
        leaf = min(tree.leaves())
        new_cond = ForcingCondition(leaf, cond.badset, g)
        cert = {
            "kind": "diagonal_extension",
            "case": label,
            "g": g.to_spec(),
            "functional": gamma_table.to_jsonable(),
            "k": k,
            "tau": list(tau0),
            "tree": _tree_jsonable(tree),
            "tree_bushiness": bushiness,
            "fused": [list(p) for p in fused[:c]],
            "e0": e0,
            "e1": e1,
            "q": q,
            "q_values": [v0, v1],
            "m": m_val,
            "c": c,
            "cap": cap,
            "winner": winner,
            "w_winner": sorted(w_win),
            "position_horizon": target_len,
            "eval_budget": limits.eval_budget,
            "fixpoint_budget": limits.fixpoint_budget,
            "badset": sorted(list(b) for b in cond.badset),
            "new_stem": list(leaf),
        }
        trace.append({"step": "diagonal_extension", "case": label, "c": c,
                      "winner": winner, "stem": list(leaf)})
        return DiagonalExt(new_cond, cert, tuple(trace))

    if big_inputs:
        fusion_tree, fused = fusion_step(
            gamma_table, tau0, k, big_inputs, g,
            badset=cond.badset, within=totality, require_count=1)
        cap = len(fused)
        trace.append({"step": "fusion", "achieved": cap,
                      "fused": [list(p) for p in fused]})
        a0, a1, big_k = _packed_masks(fused, target_len)
        e0, e1, _ = _diagonal_pair(q, a0, a1, big_k, cap, limits)
        out0 = eval_program(q, e0, limits.eval_budget)
        out1 = eval_program(q, e1, limits.eval_budget)
        if not (isinstance(out0, Halted) and isinstance(out1, Halted)):
            trace.append({"step": "fail", "reason": "q not total on the diagonal indices"})
            return BudgetExceeded("q not total on the diagonal indices", tuple(trace))
        m_val = max(out0.value, out1.value)
        if 2 * m_val + 1 <= cap:
            c = 2 * m_val + 1
            if c == cap:
                tree_c, fused_c = fusion_tree, fused
            else:
                tree_c, fused_c = fusion_step(
                    gamma_table, tau0, k, fused[:c], g,
                    badset=cond.badset, within=totality, require_count=c)
            label = "case2" if all(i == 0 for _, i in fused_c) and \
                sum(1 for _, i in fused_c if i == 0) > m_val else "case1"
            return finish(tree_c, 2 * k, fused_c, e0, e1, out0.value, out1.value, cap, label)
        trace.append({"step": "fusion_short", "achieved": cap, "needed": 2 * m_val + 1})

    # Case 2: force zeros with a k-bushy tree
    zeros_tree = None
    zeros: list[int] = []
    for count in range(target_len, 0, -1):
        try:
            zeros_tree, zeros = case2_zero_tree(
                gamma_table, tau0, k, count, cond.badset, {}, g)
            break
        except BignessUnavailable as exc:
            if exc.what == "totality":
                return non_total(exc.position, exc.node)
            continue
    if zeros_tree is None:
        trace.append({"step": "fail", "reason": "no zero-forcing tree at any count"})
        return BudgetExceeded("no zero-forcing tree at any count", tuple(trace))
    trace.append({"step": "zero_tree", "zeros": zeros})
    fused = [(n, 0) for n in zeros]
    cap = len(fused)
    a0, a1, big_k = _packed_masks(fused, target_len)
    e0, e1, _ = _diagonal_pair(q, a0, a1, big_k, cap, limits)
    out0 = eval_program(q, e0, limits.eval_budget)
    out1 = eval_program(q, e1, limits.eval_budget)
    if not (isinstance(out0, Halted) and isinstance(out1, Halted)):
        trace.append({"step": "fail", "reason": "q not total on the diagonal indices"})
        return BudgetExceeded("q not total on the diagonal indices", tuple(trace))
    m_val = max(out0.value, out1.value)
    if cap < m_val + 1:
        trace.append({"step": "fail", "reason": "zero capacity below the q bound",
                      "capacity": cap, "needed": m_val + 1})
        return BudgetExceeded("zero capacity below the q bound", tuple(trace))
    c = min(2 * m_val + 1, cap)
    if c < len(zeros):
        zeros_tree, zeros = case2_zero_tree(
            gamma_table, tau0, k, c, cond.badset, {}, g)
        fused = [(n, 0) for n in zeros]
    return finish(zeros_tree, k, fused, e0, e1, out0.value, out1.value, cap, "case2")


# ---------------------------------------------------------------------------
# Generic prefix.

def generic_prefix(g: OrderFunction, oracle: Optional[BitOracle],
                   requirements: Sequence[tuple[FiniteFunctional, ProgramIndex]],
                   limits: SearchLimits = SearchLimits()) -> tuple[Node, list]:
    """Run the requirements from the empty stem over the budgeted bad set.

    Returns the final stem and the full trace (one certificate per density
    search plus bookkeeping).  Raises BudgetExceededError with the partial
    trace when a density search reports BudgetExceeded.
    """
    bad = dnr_bad_strings(g, oracle, limits.bad_string_len, limits.eval_budget)
    cond = ForcingCondition((), bad, g)
    trace: list = [{"step": "bad_strings", "count": len(bad),
                    "max_len": limits.bad_string_len, "budget": limits.eval_budget}]
    for gamma_table, q in requirements:
        verdict = density_search(gamma_table, q, cond, limits)
        if isinstance(verdict, BudgetExceeded):
            trace.extend(verdict.trace)
            raise BudgetExceededError(trace)
        trace.append({"step": "requirement_met",
                      "verdict": type(verdict).__name__,
                      "certificate": verdict.certificate})
        cond = verdict.condition
    # one final good step so even an empty run commits to a nonempty stem
    stem = cond.stem
    horizon = max(_badset_horizon(stem, cond.badset), len(stem) + 1)
    blocked = closure(cond.badset, g(len(stem)), g, horizon) if cond.badset else frozenset()
    for c in range(g(len(stem))):
        child = stem + (c,)
        if child not in blocked:
            stem = child
            break
    else:
        raise AssertionError("no good child below a valid condition")
    trace.append({"step": "good_step", "stem": list(stem)})
    assert all(v < g(i) for i, v in enumerate(stem))
    assert not any(stem[:len(b)] == b for b in cond.badset)
    return stem, trace
