"""Backward recursion for the unique early-stopping equilibrium.

The recursion carries a pair of adapted processes: a value `V` defined on
in-domain atoms and a survival probability `S` defined everywhere.  `S` is the
probability that the induced continuation stops while still in the domain; it
replaces the constant-1 weighting of the classical theory and is what makes
conditional stopping tractable by dynamic programming:

    at or past the effective horizon:  V = payoff, S = 1 on in-domain atoms
    strictly before it:                j = E[S' V' | A] / E[S' | A]
        payoff >= j:  V = payoff, S = 1          (the observer stops)
        payoff <  j:  V = j,      S = E[S' | A]  (the observer continues)

where primes denote the next level and the numerator skips children with
S' = 0, honoring the convention that zero mass times an absent payoff is 0.
The induced policy "stop when payoff >= V" is the unique equilibrium whose
indifferent observers stop; when the domain covers everything, S is
identically 1 and V reduces to the classical Snell envelope.

`verify_snell_pair` checks a candidate pair against the full list of
structural conditions that characterize such pairs, without assuming how the
pair was produced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .model import AtomTree
from .numeric import Scalar
from .policy import (
    InadmissiblePolicyError,
    PolicyError,
    StoppingPolicy,
    _continuation_tables,
    admissible,
    is_equilibrium,
)


class PairError(ValueError):
    """A value/survival pair fails a precondition of the requested operation."""


@dataclass(frozen=True)
class SnellPair:
    """A value process on in-domain atoms and a survival process on all atoms."""

    values: Mapping[str, Scalar]
    survival: Mapping[str, Scalar]


@dataclass(frozen=True)
class ConditionReport:
    name: str
    passed: bool
    failures: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class VerificationReport:
    conditions: tuple[ConditionReport, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def condition(self, name: str) -> ConditionReport:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


def backward_solve(tree: AtomTree) -> tuple[SnellPair, StoppingPolicy]:
    """Solve the tree by backward recursion; also return the induced policy."""
    flags = tree.effective_flags()
    mode = tree.mode
    values: dict[str, Scalar] = {}
    survival: dict[str, Scalar] = {}
    bits: dict[str, int] = {}
    for level in reversed(tree.levels):
        for atom in level:
            if flags[atom.id]:
                if atom.in_domain:
                    values[atom.id] = atom.payoff
                    survival[atom.id] = mode.one
                else:
                    survival[atom.id] = mode.zero
                bits[atom.id] = 1
                continue
            den = mode.zero
            num = mode.zero
            for child in tree.children(atom.id):
                s = survival[child.id]
                den += child.branch_prob * s
                if child.id in values:
                    num += child.branch_prob * s * values[child.id]
            cont = num / den
            if mode.ge(atom.payoff, cont):
                values[atom.id] = atom.payoff
                survival[atom.id] = mode.one
                bits[atom.id] = 1
            else:
                values[atom.id] = cont
                survival[atom.id] = den
                bits[atom.id] = 0
    return SnellPair(values, survival), StoppingPolicy(bits)


def classical_snell(tree: AtomTree, process: Mapping[str, Scalar]) -> dict[str, Scalar]:
    """Smallest supermartingale dominating a process defined on every atom."""
    envelope: dict[str, Scalar] = {}
    for level in reversed(tree.levels):
        for atom in level:
            kids = tree.children(atom.id)
            own = process[atom.id]
            if not kids:
                envelope[atom.id] = own
            else:
                cont = sum(child.branch_prob * envelope[child.id] for child in kids)
                envelope[atom.id] = own if own >= cont else cont
    return envelope


def pair_from_policy(tree: AtomTree, policy: StoppingPolicy) -> SnellPair:
    """Build the value/survival pair induced by an early-stopping equilibrium.

    Rejects policies that are not equilibria, and equilibria whose indifferent
    observers continue (those induce a different pair shape).
    """
    check = is_equilibrium(tree, policy)
    if not check:
        raise PairError(f"policy is not an equilibrium: {check.reason}")
    flags = tree.effective_flags()
    mode = tree.mode
    num, den = _continuation_tables(tree, policy)
    values: dict[str, Scalar] = {}
    survival: dict[str, Scalar] = {}
    for atom in tree.atoms():
        if not atom.in_domain:
            survival[atom.id] = mode.zero
            continue
        if flags[atom.id]:
            values[atom.id] = atom.payoff
            survival[atom.id] = mode.one
            continue
        cont = num[atom.id] / den[atom.id]
        if mode.eq(atom.payoff, cont) and not policy.stops(atom.id):
            raise PairError(
                f"indifferent observer at {atom.id!r} continues; "
                "expected the early-stopping equilibrium"
            )
        if policy.stops(atom.id):
            values[atom.id] = atom.payoff
            survival[atom.id] = mode.one
        else:
            values[atom.id] = cont
            survival[atom.id] = den[atom.id]
    return SnellPair(values, survival)


def policy_from_pair(tree: AtomTree, pair: SnellPair) -> StoppingPolicy:
    """Read the stopping policy off a verified pair: stop when payoff >= V."""
    report = verify_snell_pair(tree, pair)
    if not report.passed:
        failed = [c.name for c in report.conditions if not c.passed]
        raise PairError(f"pair fails verification: {failed}")
    mode = tree.mode
    bits: dict[str, int] = {}
    for atom in tree.atoms():
        if not atom.in_domain:
            bits[atom.id] = 1
        else:
            bits[atom.id] = 1 if mode.ge(atom.payoff, pair.values[atom.id]) else 0
    return StoppingPolicy(bits)


def verify_snell_pair(tree: AtomTree, pair: SnellPair) -> VerificationReport:
    """Check the structural conditions characterizing value/survival pairs.

    bounds: S in (0, 1] on in-domain atoms, 0 outside; V defined on in-domain
        atoms and equal to the payoff at or past the effective horizon.
    envelope_of_weighted_gain: on the domain, V is the Snell envelope of the
        payoff under the survival-twisted branch weights: strictly before the
        effective horizon, V = max(payoff, E[S'V']/E[S']).  Multiplying
        through by E[S'] and unrolling shows this is the same as "S*V frozen
        at the horizon is the classical envelope of the frozen S*payoff"
        whenever payoffs are nonnegative; the normalized form is the one that
        survives sign changes (a stop atom with a negative payoff can have
        S*V below the expected next S*V without any deviation profiting,
        because the comparison the observer actually makes is against the
        continuation value, not the unnormalized product).
    survival_minimality: S is itself the classical envelope of the indicator
        of {V = payoff, in-domain}.
    perturbed_supermartingale: replacing the survival weight of a single
        observer by the conditional expectation of the next S must not raise
        the weighted value: E[S'V' | A] <= E[S' | A] * V(A) at every
        in-domain atom strictly before the effective horizon.  This is the
        one-step form of the perturbation family -- the inequality at the
        perturbed time itself, which says the deviation "continue for one
        step, then conform" does not profit.  For nonnegative payoffs the
        one-step inequalities chain into a full supermartingale statement;
        with signed payoffs only the deviation step is constrained.
    martingale_off_stop: where the observer strictly prefers continuing, S and
        S*V both satisfy exact one-step martingale identities.
    """
    mode = tree.mode
    flags = tree.effective_flags()
    horizon = tree.horizon
    scale = mode.one
    if not mode.exact:
        gains = [abs(float(a.payoff)) for a in tree.atoms() if a.in_domain]
        scale = max([1.0] + gains)

    conditions: list[ConditionReport] = []

    failures: list[tuple[str, str]] = []
    for atom in tree.atoms():
        s = pair.survival.get(atom.id)
        if s is None:
            failures.append((atom.id, "survival value missing"))
            continue
        if atom.in_domain:
            if not (mode.gt(s, 0) and mode.le(s, 1)):
                failures.append((atom.id, f"survival {s} outside (0, 1]"))
            v = pair.values.get(atom.id)
            if v is None:
                failures.append((atom.id, "value missing on an in-domain atom"))
            elif flags[atom.id] and not mode.eq(v, atom.payoff, scale):
                failures.append(
                    (atom.id, "value differs from payoff at or past the effective horizon")
                )
        elif not mode.eq(s, 0):
            failures.append((atom.id, f"survival {s} nonzero outside the domain"))
    conditions.append(ConditionReport("bounds", not failures, tuple(failures)))
    if failures:
        # The remaining conditions need a structurally complete pair.
        for name in (
            "envelope_of_weighted_gain",
            "survival_minimality",
            "perturbed_supermartingale",
            "martingale_off_stop",
        ):
            conditions.append(ConditionReport(name, False, ((tree.root.id, "skipped: bounds failed"),)))
        return VerificationReport(tuple(conditions))

    failures = []
    for atom in tree.atoms():
        if not atom.in_domain or flags[atom.id]:
            continue
        kids = tree.children(atom.id)
        den = sum((c.branch_prob * pair.survival[c.id] for c in kids), mode.zero)
        num = sum(
            (c.branch_prob * pair.survival[c.id] * pair.values[c.id]
             for c in kids if c.in_domain),
            mode.zero,
        )
        cont = num / den
        target = atom.payoff if mode.ge(atom.payoff, cont) else cont
        if not mode.eq(pair.values[atom.id], target, scale):
            failures.append(
                (atom.id,
                 f"value {pair.values[atom.id]} != max(payoff {atom.payoff}, "
                 f"twisted continuation {cont})")
            )
    conditions.append(
        ConditionReport("envelope_of_weighted_gain", not failures, tuple(failures))
    )

    indicator = {}
    for atom in tree.atoms():
        on = atom.in_domain and mode.eq(pair.values[atom.id], atom.payoff, scale)
        indicator[atom.id] = mode.one if on else mode.zero
    ind_envelope = classical_snell(tree, indicator)
    failures = [
        (aid, f"survival {pair.survival[aid]} != stop-indicator envelope {ind_envelope[aid]}")
        for aid in tree.atom_ids()
        if not mode.eq(pair.survival[aid], ind_envelope[aid])
    ]
    conditions.append(ConditionReport("survival_minimality", not failures, tuple(failures)))

    failures = []
    # One deviation inequality per observer: perturbing the time-t0 survival
    # weight to E[S'] turns the product at A into E[S' | A] * V(A), and the
    # next value of the frozen product is S'V' itself (children of an
    # unflagged atom are never rewritten by the freeze).  Steps at other
    # times repeat the martingale/stop comparisons checked elsewhere, and
    # the step *into* t0 is not an obligation: a deviation taken at t0
    # cannot be seen from t0 - 1.
    for t0 in range(horizon):
        for atom in tree.levels[t0]:
            if not atom.in_domain or flags[atom.id]:
                continue
            kids = tree.children(atom.id)
            exp_s = sum((c.branch_prob * pair.survival[c.id] for c in kids), mode.zero)
            exp_sv = sum(
                (c.branch_prob * pair.survival[c.id] * pair.values[c.id]
                 for c in kids if c.in_domain),
                mode.zero,
            )
            if mode.gt(exp_sv, exp_s * pair.values[atom.id], scale):
                failures.append(
                    (atom.id, f"supermartingale broken when level {t0} is perturbed")
                )
    conditions.append(
        ConditionReport("perturbed_supermartingale", not failures, tuple(failures))
    )

    failures = []
    for atom in tree.atoms():
        if flags[atom.id] or not atom.in_domain:
            continue
        if not mode.gt(pair.values[atom.id], atom.payoff, scale):
            continue
        kids = tree.children(atom.id)
        exp_s = sum((c.branch_prob * pair.survival[c.id] for c in kids), mode.zero)
        exp_sv = sum(
            (c.branch_prob * pair.survival[c.id] * pair.values[c.id]
             for c in kids if c.in_domain),
            mode.zero,
        )
        if not mode.eq(pair.survival[atom.id], exp_s):
            failures.append((atom.id, "survival is not a one-step martingale off the stop set"))
        if not mode.eq(pair.survival[atom.id] * pair.values[atom.id], exp_sv, scale):
            failures.append((atom.id, "S*V is not a one-step martingale off the stop set"))
    conditions.append(ConditionReport("martingale_off_stop", not failures, tuple(failures)))

    return VerificationReport(tuple(conditions))


def survival_identities(
    tree: AtomTree, policy: StoppingPolicy, pair: SnellPair
) -> VerificationReport:
    """Check the probabilistic meaning of a pair against its policy.

    admissibility: the policy itself must be usable.
    continuation_consistency: the recursion's ratio E[S'V']/E[S'] equals the
        path-computed continuation value at every atom strictly before the
        effective horizon.
    survival_expectation: E[S' | A] equals the probability that the
        continuation stops in-domain.
    survival_three_case: S is that probability on continuing in-domain atoms,
        1 on stopping in-domain atoms, and 0 outside the domain.
    """
    mode = tree.mode
    flags = tree.effective_flags()
    conditions: list[ConditionReport] = []

    adm = admissible(tree, policy)
    conditions.append(
        ConditionReport(
            "admissibility",
            bool(adm),
            () if adm else ((adm.atom, adm.reason),),
        )
    )
    if not adm:
        for name in ("continuation_consistency", "survival_expectation", "survival_three_case"):
            conditions.append(
                ConditionReport(name, False, ((tree.root.id, "skipped: inadmissible policy"),))
            )
        return VerificationReport(tuple(conditions))

    num, den = _continuation_tables(tree, policy)
    scale = mode.one
    if not mode.exact:
        gains = [abs(float(a.payoff)) for a in tree.atoms() if a.in_domain]
        scale = max([1.0] + gains)

    failures = []
    for atom in tree.atoms():
        if flags[atom.id]:
            continue
        exp_s = mode.zero
        exp_sv = mode.zero
        for child in tree.children(atom.id):
            s = pair.survival[child.id]
            exp_s += child.branch_prob * s
            if child.in_domain:
                exp_sv += child.branch_prob * s * pair.values[child.id]
        recursion_value = exp_sv / exp_s
        path_value = num[atom.id] / den[atom.id]
        if not mode.eq(recursion_value, path_value, scale):
            failures.append(
                (atom.id, f"recursion ratio {recursion_value} != path value {path_value}")
            )
    conditions.append(
        ConditionReport("continuation_consistency", not failures, tuple(failures))
    )

    failures = []
    for atom in tree.atoms():
        if flags[atom.id]:
            continue
        exp_s = sum(
            (c.branch_prob * pair.survival[c.id] for c in tree.children(atom.id)),
            mode.zero,
        )
        if not mode.eq(exp_s, den[atom.id]):
            failures.append(
                (atom.id, f"E[S'] = {exp_s} != continuation survival {den[atom.id]}")
            )
    conditions.append(ConditionReport("survival_expectation", not failures, tuple(failures)))

    failures = []
    for atom in tree.atoms():
        s = pair.survival[atom.id]
        if not atom.in_domain:
            if not mode.eq(s, 0):
                failures.append((atom.id, "survival must vanish outside the domain"))
        elif policy.stops(atom.id):
            if not mode.eq(s, 1):
                failures.append((atom.id, "survival must be 1 on stopping in-domain atoms"))
        else:
            if not mode.eq(s, den[atom.id]):
                failures.append(
                    (atom.id, "survival must equal the continuation stop-in-domain probability")
                )
    conditions.append(ConditionReport("survival_three_case", not failures, tuple(failures)))

    return VerificationReport(tuple(conditions))
