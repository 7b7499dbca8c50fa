"""Reductions between bi-immunity, DNR values, and blocking prefixes.

The central object is an index transform h: given any n, h(n) is an index
whose r.e. set is exactly gamma(phi_n(n)), the finite set coded by the
diagonal value.  h is total and never runs n: it is a pure s-m-n splice.
On top of it sit the value extractors: an oracle X and a claimed immunity
bound f yield a candidate DNR value for each n by reading off the first
f+1 members of X (and of its complement) and coding them back to naturals.
If the candidate ever collides with a halting diagonal, the collision is
itself a finite certificate that X or its complement contains a small
fully-enumerated r.e. set, i.e. that the claimed immunity bound fails.

Everything here is budgeted and certificate-producing; replay semantics
for the emitted certificates live in the certs module.
"""

from __future__ import annotations

from .asm import assemble_index
from .errors import PreconditionViolated, WitnessBudgetExceeded
from .machine import (
    Halted,
    ProgramIndex,
    domain_window,
    eval_program,
    fixed_point,
    gamma,
    gamma_inverse,
    re_enumeration_order,
    smn_fill,
)
from .oracle import BitOracle, PatchedOracle, first_members, oracle_to_spec


# phi(pair(n, x)): run phi_n(n), then halt iff bit x of the value is set.
# Divergence of the inner call is inherited, so the filled index enumerates
# gamma(phi_n(n)) and enumerates nothing when the diagonal diverges.
_SET_DRIVER_INDEX = assemble_index("""
    left r1, r0
    right r2, r0
    univ r3, r1, r1
    load r4, 2
shift:
    jz r2, probe
    div r3, r3, r4
    load r5, 1
    sub r2, r2, r5
    jmp shift
probe:
    mod r5, r3, r4
    jz r5, stuck
    halt r2
stuck:
""")


def diagonal_set_index(n: ProgramIndex) -> ProgramIndex:
    """Total transform h with W_{h(n)} = gamma(phi_n(n)).

    Built without evaluating n; the diagonal runs only when the returned
    index is itself evaluated.
    """
    return smn_fill(_SET_DRIVER_INDEX, n)


def _claimed_bound(f: ProgramIndex, n: ProgramIndex, budget: int) -> int:
    """f at the transformed index, or WitnessBudgetExceeded."""
    target = diagonal_set_index(n)
    out = eval_program(f, target, budget)
    if not isinstance(out, Halted):
        raise WitnessBudgetExceeded(
            f"f = {f} did not converge on the transformed index within {budget} steps")
    return out.value


def _side_codes(oracle: BitOracle, k: int) -> tuple[int | None, int | None]:
    """Codes of the first k members of the oracle and of its complement.

    A side with fewer than k members below its structural scan bound yields
    None.  At least one side is always full: the two sides partition the
    naturals, so one of them has k members among the first 2k positions.
    """
    codes = []
    for value in (1, 0):
        side = first_members(oracle, k, value=value)
        codes.append(gamma_inverse(side) if len(side) == k else None)
    assert codes[0] is not None or codes[1] is not None
    return codes[0], codes[1]


def dnr_candidate(X: BitOracle, f: ProgramIndex, n: ProgramIndex, budget: int) -> int:
    """min of the two side codes at width f(h(n)) + 1.

    Whenever the result equals a halting phi_n(n), one side's first slice
    is exactly gamma(phi_n(n)): a fully enumerated r.e. subset of that side
    exceeding the claimed bound.  So on an oracle whose sides genuinely
    avoid such slices, this value is diagonally nonrecursive.
    """
    k = _claimed_bound(f, n, budget) + 1
    code, co_code = _side_codes(X, k)
    return min(c for c in (code, co_code) if c is not None)


def dnr_candidate_bound(f: ProgramIndex, n: ProgramIndex, budget: int) -> int:
    """Pointwise bound: one side has its first f+1 members within [0, 2f+1],
    so the candidate is at most the full code of that interval."""
    fv = _claimed_bound(f, n, budget)
    return (1 << (2 * fv + 2)) - 1


def dnr_reduction_audit(X: BitOracle, f: ProgramIndex, e_max: int, budget: int) -> list[dict]:
    """Classify every diagonal e <= e_max against the oracle's slices.

    For each e with phi_e(e) = v within budget, exactly one certificate is
    emitted: an immunity violation if some side's first f+1 members are
    exactly gamma(v) (that side then provably contains the fully enumerated
    W at index diagonal_set_index(e), of size f+1 > f), else a DNR-value
    certificate recording that every candidate avoids v.  Diverging
    diagonals and non-converging f probes are recorded, not errors.
    """
    oracle_spec = oracle_to_spec(X)
    certs: list[dict] = []
    for e in range(e_max + 1):
        out = eval_program(e, e, budget)
        if not isinstance(out, Halted):
            certs.append({"kind": "diagonal_diverges", "e": e, "budget": budget})
            continue
        v = out.value
        h_e = diagonal_set_index(e)
        f_out = eval_program(f, h_e, budget)
        if not isinstance(f_out, Halted):
            certs.append({"kind": "f_unconverged", "e": e, "h_e": h_e, "f": f,
                          "budget": budget})
            continue
        k = f_out.value + 1
        code, co_code = _side_codes(X, k)
        witness = sorted(gamma(v))
        base = {
            "e": e,
            "value": v,
            "h_e": h_e,
            "f": f,
            "f_value": f_out.value,
            "budget": budget,
            "oracle": oracle_spec,
        }
        if code == v or co_code == v:
            certs.append({
                "kind": "ebi_violation",
                **base,
                "side": "oracle" if code == v else "complement",
                "members": witness,
                "horizon": (max(witness) + 2) if witness else 2,
            })
        else:
            certs.append({
                "kind": "dnr_value",
                **base,
                "side_code": code,
                "complement_code": co_code,
                "candidate": min(c for c in (code, co_code) if c is not None),
            })
    return certs


def patch_oracle_dnr_only(f: ProgramIndex, e_max: int, budget: int,
                          start: BitOracle, max_rounds: int = 64) -> tuple[BitOracle, list[dict]]:
    """Greedily patch an oracle until its audit emits no immunity violations.

    Each round flips the least member of the first violating slice, which
    removes that slice from the offending side.  Returns the patched oracle
    and its clean audit; RuntimeError if the rounds run out.
    """
    oracle = start
    for _ in range(max_rounds):
        certs = dnr_reduction_audit(oracle, f, e_max, budget)
        violations = [c for c in certs if c["kind"] == "ebi_violation"]
        if not violations:
            return oracle, certs
        worst = violations[0]
        pos = worst["members"][0]
        flipped = 1 - oracle.bit(pos)
        if isinstance(oracle, PatchedOracle):
            oracle = oracle.with_patch(pos, flipped)
        else:
            oracle = PatchedOracle(oracle, ((pos, flipped),))
    raise RuntimeError(f"no violation-free patch within {max_rounds} rounds")


# ---------------------------------------------------------------------------
# Blocking prefixes: forcing a finite r.e. set into the ones of a string.

# phi(pair(u, x)) where u is the index's own acting self: compute
# k = f(u) + 1, then dovetail the source program's domain in canonical
# order (by (max(steps, y), y), matching re_enumeration_order) and halt
# iff x shows up among the first k emissions.  The braces are filled per
# (source, f) pair before assembly.
_FIRST_SLICE_DRIVER = """
    left r1, r0
    right r2, r0
    load r3, {f}
    univ r4, r3, r1
    load r5, 1
    add r4, r4, r5
    load r6, {source}
    load r7, 1
outer:
    load r8, 0
inner:
    budv r9, r6, r8, r7
    jz r9, next_y
    sub r10, r7, r5
    budv r11, r6, r8, r10
    jz r11, fresh
    sub r12, r7, r8
    sub r13, r8, r7
    add r12, r12, r13
    jz r12, fresh
    jmp next_y
fresh:
    sub r12, r2, r8
    sub r13, r8, r2
    add r12, r12, r13
    jz r12, hit
    sub r4, r4, r5
    jz r4, stuck
next_y:
    sub r12, r7, r8
    jz r12, next_m
    add r8, r8, r5
    jmp inner
next_m:
    add r7, r7, r5
    jmp outer
hit:
    halt r8
stuck:
"""


def first_slice_index(source: ProgramIndex, f: ProgramIndex,
                      fixpoint_budget: int = 10_000) -> ProgramIndex:
    """An index e' enumerating the first f(e') + 1 elements of W_source.

    Self-referential: the returned index computes its own claimed bound by
    running f on itself, then releases exactly that many elements of the
    source's domain in canonical enumeration order.
    """
    driver = assemble_index(_FIRST_SLICE_DRIVER.format(f=f, source=source))
    transform = assemble_index(f"load r1, {driver}\nsmn r2, r1, r0\nhalt r2")
    return fixed_point(transform, fixpoint_budget)


def blocking_prefix(A_prefix: tuple[int, ...], e: ProgramIndex, f: ProgramIndex,
                    budget: int) -> tuple[tuple[int, ...], dict]:
    """A bit string sigma whose every extension contains a bad r.e. set.

    Finite case: the budgeted W_e already exceeds f(e) and sits inside the
    prefix's ones, so sigma is the prefix itself and the certificate records
    the enumerated set.  Infinite case (W_e still growing at the budget
    checkpoint): a self-referential slice index e' pins down f(e') + 1
    elements of W_e; sigma extends the prefix with ones exactly at those
    positions.  Either way the certificate is finite and replayable.
    """
    A_prefix = tuple(A_prefix)
    if any(b not in (0, 1) for b in A_prefix):
        raise ValueError("prefix bits must be 0 or 1")
    f_out = eval_program(f, e, budget)
    if not isinstance(f_out, Halted):
        raise WitnessBudgetExceeded(f"f = {f} did not converge on {e} within {budget} steps")
    bound = f_out.value
    full = re_enumeration_order(e, budget)
    half = re_enumeration_order(e, budget // 2)
    appears_infinite = len(full) > len(half)

    if not appears_infinite:
        members = sorted(full)
        if len(members) <= bound:
            raise PreconditionViolated(
                f"W_e has only {len(members)} members at this budget, bound is {bound}")
        outside = [w for w in members if w >= len(A_prefix) or A_prefix[w] != 1]
        if outside:
            raise PreconditionViolated(
                f"enumerated members {outside} are not ones of the prefix")
        cert = {
            "kind": "blocking_finite",
            "e": e,
            "f": f,
            "f_value": bound,
            "members": members,
            "budget": budget,
            "sigma": list(A_prefix),
        }
        return A_prefix, cert

    slice_idx = first_slice_index(e, f)
    f_slice = eval_program(f, slice_idx, budget)
    if not isinstance(f_slice, Halted):
        raise WitnessBudgetExceeded(
            f"f = {f} did not converge on the slice index within {budget} steps")
    k = f_slice.value + 1
    if len(full) < k:
        raise WitnessBudgetExceeded(
            f"only {len(full)} elements enumerated, slice needs {k}")
    slice_members = sorted(full[:k])
    sigma = list(A_prefix)
    for w in slice_members:
        if w < len(A_prefix):
            if A_prefix[w] != 1:
                raise PreconditionViolated(
                    f"slice member {w} lands on a zero of the prefix")
        else:
            while len(sigma) <= w:
                sigma.append(0)
            sigma[w] = 1
    horizon = max(slice_members) + 2
    cert = {
        "kind": "blocking_infinite",
        "e": e,
        "f": f,
        "e_prime": slice_idx,
        "f_value": f_slice.value,
        "members": slice_members,
        "order_prefix": list(full[:k]),
        "horizon": horizon,
        "budget": budget,
        "sigma": sigma,
    }
    return tuple(sigma), cert


def slice_window_ok(cert: dict, budget: int | None = None) -> bool:
    """Replay helper: the slice index's domain window matches its members."""
    b = cert["budget"] if budget is None else budget
    window = domain_window(cert["e_prime"], cert["horizon"], b)
    return window == frozenset(cert["members"])
