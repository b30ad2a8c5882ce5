"""Stopping policies on atom trees and their equilibrium analysis.

A stopping policy assigns a stop/continue bit to every atom.  Each time-t
observer compares the immediate payoff against the conditional value of
letting the policy run strictly after t, where that value is an expectation
*conditioned on stopping while still inside the domain of relevance*:

    value(A) = E[payoff at the stop | A, stop occurs in-domain]
             = E[payoff * 1{stop in-domain} | A] / P(stop in-domain | A)

The best-response map rewrites every bit simultaneously: stop when the
immediate payoff strictly beats that value, continue when it strictly loses,
and keep the current bit on ties.  Equilibria are the admissible fixed points.
Because each observer controls a single date, the precommitted optimum (one
stopping time chosen up front for the whole tree) can strictly exceed every
equilibrium value; `precommitted` computes it by exhaustive enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Optional, Union

from .model import Atom, AtomTree
from .numeric import Scalar

DEFAULT_POLICY_GUARD = 2**20
DEFAULT_STOPPING_TIME_GUARD = 10**7


class PolicyError(ValueError):
    """A policy fails a structural precondition of the requested operation."""


class InadmissiblePolicyError(PolicyError):
    """Raised when an operation requires an admissible policy."""

    def __init__(self, result: "AdmissibilityResult"):
        self.result = result
        super().__init__(f"inadmissible policy: {result.reason} at atom {result.atom!r}")


class SizeGuardError(RuntimeError):
    """An enumeration would exceed the configured size guard."""

    def __init__(self, required: int, guard: int):
        self.required = required
        self.guard = guard
        super().__init__(
            f"enumeration needs {required} candidates, above the guard of {guard}; "
            "raise the guard (CONDSTOP_SIZE_GUARD) to proceed"
        )


@dataclass(frozen=True)
class StoppingPolicy:
    """A stop (1) / continue (0) bit for every atom of a tree."""

    decisions: Mapping[str, int]

    def bit(self, atom_id: str) -> int:
        return self.decisions[atom_id]

    def stops(self, atom_id: str) -> bool:
        return bool(self.decisions[atom_id])

    def normalized(self, tree: AtomTree) -> "StoppingPolicy":
        """Force the bit to 1 at every atom at or past the effective horizon.

        Bits there never influence any value, so policies are compared in this
        normal form.
        """
        flags = tree.effective_flags()
        bits = {aid: (1 if flags[aid] else int(self.decisions[aid])) for aid in self.decisions}
        return StoppingPolicy(bits)

    @staticmethod
    def stop_everywhere(tree: AtomTree) -> "StoppingPolicy":
        return StoppingPolicy({aid: 1 for aid in tree.atom_ids()})

    @staticmethod
    def from_stop_atoms(tree: AtomTree, stop_atoms: Iterable[str]) -> "StoppingPolicy":
        stops = set(stop_atoms)
        return StoppingPolicy({aid: (1 if aid in stops else 0) for aid in tree.atom_ids()})


@dataclass(frozen=True)
class StoppingPreference:
    """The bit an indifferent observer keeps, one choice per atom."""

    prefer_stop: Mapping[str, int]

    @staticmethod
    def early(tree: AtomTree) -> "StoppingPreference":
        return StoppingPreference({aid: 1 for aid in tree.atom_ids()})

    @staticmethod
    def late(tree: AtomTree) -> "StoppingPreference":
        return StoppingPreference({aid: 0 for aid in tree.atom_ids()})


PreferenceLike = Union[StoppingPreference, Literal["early", "late", "all"]]


@dataclass(frozen=True)
class AdmissibilityResult:
    admissible: bool
    atom: Optional[str] = None
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.admissible


@dataclass(frozen=True)
class EquilibriumResult:
    equilibrium: bool
    deviations: tuple[str, ...] = ()
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.equilibrium


@dataclass(frozen=True)
class InducedStop:
    """Where the policy first stops strictly below a source atom.

    `stop_probs` gives, conditional on the source, the probability of the
    first stop landing on each stop atom.  `survive_prob` collects the mass
    stopping at in-domain atoms, `dead_prob` the mass that leaves the domain
    before any stop (including stops on out-of-domain atoms), and
    `never_prob` the mass that reaches the final level still continuing.
    Nonzero `never_prob` can only occur when the tree is a truncation of a
    longer model and the policy was not forced to stop at the horizon.
    """

    source: str
    stop_probs: Mapping[str, Scalar]
    survive_prob: Scalar
    dead_prob: Scalar
    never_prob: Scalar


def _check_coverage(tree: AtomTree, policy: StoppingPolicy) -> None:
    decided = set(policy.decisions)
    atoms = set(tree.atom_ids())
    missing = atoms - decided
    if missing:
        raise PolicyError(f"policy missing decisions for atoms {sorted(missing)[:5]}")
    extra = decided - atoms
    if extra:
        raise PolicyError(f"policy has decisions for unknown atoms {sorted(extra)[:5]}")
    for aid, bit in policy.decisions.items():
        if bit not in (0, 1):
            raise PolicyError(f"decision at {aid!r} must be 0 or 1, got {bit!r}")


def _continuation_tables(
    tree: AtomTree, policy: StoppingPolicy
) -> tuple[dict[str, Scalar], dict[str, Scalar]]:
    """Bottom-up numerator and survival tables for continuation values.

    For every non-terminal atom A:
      den[A] = P(first stop after A lands in-domain | A)
      num[A] = E[payoff at that stop * 1{in-domain} | A]
    A child that stops contributes its payoff when in-domain and nothing
    otherwise; a continuing child contributes its own tables; a continuing
    child at the final level contributes nothing (mass that never stops).
    """
    zero = tree.mode.zero
    num: dict[str, Scalar] = {}
    den: dict[str, Scalar] = {}
    horizon = tree.horizon
    for level in reversed(tree.levels[:-1]):
        for atom in level:
            total_num = zero
            total_den = zero
            for child in tree.children(atom.id):
                if policy.stops(child.id):
                    if child.in_domain:
                        total_num += child.branch_prob * child.payoff
                        total_den += child.branch_prob
                elif child.level < horizon:
                    total_num += child.branch_prob * num[child.id]
                    total_den += child.branch_prob * den[child.id]
            num[atom.id] = total_num
            den[atom.id] = total_den
    return num, den


def admissible(tree: AtomTree, policy: StoppingPolicy) -> AdmissibilityResult:
    """Check that every observer can use the policy.

    Two requirements, scanned level by level from the root so that the
    shallowest offending atom is reported: strictly before the effective
    horizon the continuation must stop in-domain with positive probability
    (otherwise the observer's conditional value is undefined), and at or past
    the effective horizon the policy must stop.
    """
    _check_coverage(tree, policy)
    flags = tree.effective_flags()
    num, den = _continuation_tables(tree, policy)
    for level in tree.levels:
        for atom in level:
            if not flags[atom.id]:
                if not den[atom.id] > 0:
                    return AdmissibilityResult(
                        False, atom.id, "continuation never stops in-domain"
                    )
            elif not policy.stops(atom.id):
                return AdmissibilityResult(
                    False, atom.id, "must stop at or past the effective horizon"
                )
    return AdmissibilityResult(True)


def induced_stop(tree: AtomTree, policy: StoppingPolicy, atom_id: str) -> InducedStop:
    """Describe the first stop strictly below `atom_id` under the policy."""
    _check_coverage(tree, policy)
    mode = tree.mode
    horizon = tree.horizon
    stop_probs: dict[str, Scalar] = {}
    survive = mode.zero
    dead = mode.zero
    never = mode.zero

    stack = [(child, child.branch_prob) for child in tree.children(atom_id)]
    while stack:
        atom, mass = stack.pop()
        if policy.stops(atom.id):
            stop_probs[atom.id] = stop_probs.get(atom.id, mode.zero) + mass
            if atom.in_domain:
                survive += mass
            else:
                dead += mass
        elif atom.level == horizon:
            if atom.in_domain:
                never += mass
            else:
                dead += mass
        else:
            for child in tree.children(atom.id):
                stack.append((child, mass * child.branch_prob))
    return InducedStop(atom_id, stop_probs, survive, dead, never)


def continuation_value(tree: AtomTree, policy: StoppingPolicy, atom_id: str) -> Scalar:
    """The observer's conditional value of running the policy after this atom."""
    result = admissible(tree, policy)
    if not result:
        raise InadmissiblePolicyError(result)
    flags = tree.effective_flags()
    if flags[atom_id]:
        raise PolicyError(
            f"atom {atom_id!r} is at or past the effective horizon; no continuation exists"
        )
    num, den = _continuation_tables(tree, policy)
    return num[atom_id] / den[atom_id]


def phi(tree: AtomTree, policy: StoppingPolicy) -> StoppingPolicy:
    """Simultaneous best response of every observer to the given policy.

    Strictly before the effective horizon the new bit is 1 when the immediate
    payoff strictly beats the continuation value, 0 when it strictly loses,
    and the old bit on a tie.  At or past the effective horizon the bit is 1.
    """
    result = admissible(tree, policy)
    if not result:
        raise InadmissiblePolicyError(result)
    flags = tree.effective_flags()
    num, den = _continuation_tables(tree, policy)
    mode = tree.mode
    bits: dict[str, int] = {}
    for atom in tree.atoms():
        if flags[atom.id]:
            bits[atom.id] = 1
            continue
        sign = mode.compare(atom.payoff, num[atom.id] / den[atom.id])
        if sign > 0:
            bits[atom.id] = 1
        elif sign < 0:
            bits[atom.id] = 0
        else:
            bits[atom.id] = policy.bit(atom.id)
    return StoppingPolicy(bits)


def is_equilibrium(tree: AtomTree, policy: StoppingPolicy) -> EquilibriumResult:
    """Check that the policy is admissible and a fixed point of `phi`."""
    try:
        result = admissible(tree, policy)
    except PolicyError as exc:
        return EquilibriumResult(False, reason=str(exc))
    if not result:
        return EquilibriumResult(
            False, reason=f"inadmissible: {result.reason} at {result.atom!r}"
        )
    updated = phi(tree, policy)
    deviations = tuple(
        aid for aid in tree.atom_ids() if updated.bit(aid) != policy.bit(aid)
    )
    if deviations:
        return EquilibriumResult(False, deviations, "not a fixed point of the best response")
    return EquilibriumResult(True)


@dataclass(frozen=True)
class PrecommitResult:
    value: Scalar
    stop_atoms: tuple[str, ...]
    candidates: int


def count_stopping_times(tree: AtomTree) -> int:
    """Number of stopping times on the tree (stop-now or defer per subtree)."""
    counts: dict[str, int] = {}
    for level in reversed(tree.levels):
        for atom in level:
            kids = tree.children(atom.id)
            if not kids:
                counts[atom.id] = 1
            else:
                product = 1
                for child in kids:
                    product *= counts[child.id]
                counts[atom.id] = 1 + product
    return counts[tree.root.id]


def _stopping_time_options(tree: AtomTree, atom: Atom) -> list[tuple]:
    """All stopping times of the subtree at `atom`.

    Each option is (numerator, denominator, key): the unconditional-within-
    subtree contribution E[payoff * 1{in-domain}] and P(stop in-domain), and a
    sorted tuple of (level, sibling index, atom id) stop locations used for
    the earliest-stopping tie-break.
    """
    zero = tree.mode.zero
    own_key = ((atom.level, tree.index_in_level(atom.id), atom.id),)
    if atom.in_domain:
        own = (atom.payoff, tree.mode.one, own_key)
    else:
        own = (zero, zero, own_key)
    options = [own]
    kids = tree.children(atom.id)
    if kids:
        child_options = [_stopping_time_options(tree, child) for child in kids]
        for combo in itertools.product(*child_options):
            num = zero
            den = zero
            keys = []
            for child, (c_num, c_den, c_key) in zip(kids, combo):
                num += child.branch_prob * c_num
                den += child.branch_prob * c_den
                keys.extend(c_key)
            options.append((num, den, tuple(sorted(keys))))
    return options


def precommitted(tree: AtomTree, size_guard: Optional[int] = None) -> PrecommitResult:
    """Best single stopping time chosen up front, by exhaustive enumeration.

    Maximizes E[payoff * 1{stop in-domain}] / P(stop in-domain) over all
    stopping times with positive conditioning probability.  The objective does
    not decompose into a backward recursion, which is why enumeration is the
    honest method here; a size guard protects against oversized trees.  Ties
    are broken toward earliest stopping (lexicographically smallest sorted
    stop-atom keys, level first).
    """
    guard = DEFAULT_STOPPING_TIME_GUARD if size_guard is None else size_guard
    total = count_stopping_times(tree)
    if total > guard:
        raise SizeGuardError(total, guard)

    root = tree.root
    best_value = None
    best_key = None
    examined = 0
    zero = tree.mode.zero

    own_key = ((0, 0, root.id),)
    candidates = itertools.chain(
        [(root.payoff, tree.mode.one, own_key)],
        (
            (
                sum((c.branch_prob * opt[0] for c, opt in zip(tree.children(root.id), combo)), zero),
                sum((c.branch_prob * opt[1] for c, opt in zip(tree.children(root.id), combo)), zero),
                tuple(sorted(k for opt in combo for k in opt[2])),
            )
            for combo in itertools.product(
                *[_stopping_time_options(tree, child) for child in tree.children(root.id)]
            )
        ),
    )
    for num, den, key in candidates:
        examined += 1
        if not den > 0:
            continue
        value = num / den
        if (
            best_value is None
            or value > best_value
            or (value == best_value and key < best_key)
        ):
            best_value = value
            best_key = key
    if best_value is None:
        raise PolicyError("no stopping time stops in-domain with positive probability")
    stop_atoms = tuple(entry[2] for entry in best_key)
    return PrecommitResult(best_value, stop_atoms, examined)


def _resolve_preference(
    tree: AtomTree, preference: PreferenceLike
) -> Optional[StoppingPreference]:
    if preference == "all":
        return None
    if preference == "early":
        return StoppingPreference.early(tree)
    if preference == "late":
        return StoppingPreference.late(tree)
    if isinstance(preference, StoppingPreference):
        return preference
    raise PolicyError(f"unknown preference {preference!r}")


def enumerate_equilibria(
    tree: AtomTree,
    preference: PreferenceLike = "all",
    size_guard: Optional[int] = None,
) -> list[StoppingPolicy]:
    """All equilibrium policies, optionally filtered by an indifference rule.

    Bits at or past the effective horizon are pinned to 1, so candidates vary
    only on the strictly-earlier atoms.  With a preference, observers who are
    exactly indifferent must hold the preferred bit, which selects a single
    equilibrium per preference; with "all", every fixed point is returned.
    """
    guard = DEFAULT_POLICY_GUARD if size_guard is None else size_guard
    flags = tree.effective_flags()
    free = [atom for atom in tree.atoms() if not flags[atom.id]]
    if 2 ** len(free) > guard:
        raise SizeGuardError(2 ** len(free), guard)
    pref = _resolve_preference(tree, preference)
    mode = tree.mode

    base = {aid: 1 for aid, flag in flags.items() if flag}
    found: list[StoppingPolicy] = []
    for mask in range(2 ** len(free)):
        bits = dict(base)
        for i, atom in enumerate(free):
            bits[atom.id] = (mask >> i) & 1
        policy = StoppingPolicy(bits)
        num, den = _continuation_tables(tree, policy)
        ok = True
        for atom in free:
            sign = mode.compare(atom.payoff, num[atom.id] / den[atom.id])
            bit = bits[atom.id]
            if sign > 0 and bit != 1:
                ok = False
                break
            if sign < 0 and bit != 0:
                ok = False
                break
            if sign == 0 and pref is not None and bit != pref.prefer_stop[atom.id]:
                ok = False
                break
        if ok:
            found.append(policy)
    return found
