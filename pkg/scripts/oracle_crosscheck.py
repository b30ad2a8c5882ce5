"""Cross-check solver outputs against independently computed values.

Each section recomputes a quantity by a route that shares no code with the
solvers — exhaustive plan enumeration on the binomial tree, geometric-series
closed forms for the two-state chain, the region-cycle structure for the
five-state chain — and prints a table of closed form vs. solver output.

Usage:
    python scripts/oracle_crosscheck.py
"""

import sys
from fractions import Fraction as F

from condstop import (
    PeriodicMarkovPolicy,
    backward_solve,
    binomial_tree,
    check_minnie_donald_conditions,
    enumerate_periodic_equilibria,
    evaluate,
    minnie_donald_cycle_regions,
    minnie_donald_model,
    phi_markov,
    minnie_donald_homogeneous_policy,
    precommitted,
    two_state_equilibrium_regions,
    two_state_model,
)

ROWS = []


def row(section, quantity, oracle, solver):
    ok = oracle == solver
    ROWS.append((section, quantity, oracle, solver, ok))
    return ok


def all_plans(tree, atom_id):
    """Every stopping plan on the subtree rooted at `atom_id`.

    A plan maps each atom it visits to a bit; continuing at an atom means
    every child is visited in turn.  Pure path enumeration — no recursion
    from the solvers.
    """
    kids = tree.children(atom_id)
    yield {atom_id: 1}
    if not kids:
        return
    subplans = [list(all_plans(tree, c.id)) for c in kids]

    def product(parts):
        if not parts:
            yield {}
            return
        for head in parts[0]:
            for rest in product(parts[1:]):
                merged = dict(head)
                merged.update(rest)
                yield merged

    for merged in product(subplans):
        plan = {atom_id: 0}
        plan.update(merged)
        yield plan


def plan_value(tree, plan):
    """Conditional expected payoff of a plan: E[G at stop | stop in-domain]."""
    num = den = F(0)
    stack = [(tree.root, F(1))]
    while stack:
        atom, prob = stack.pop()
        if plan[atom.id]:
            if atom.in_domain:
                num += prob * atom.payoff
                den += prob
            continue
        for child in tree.children(atom.id):
            stack.append((child, prob * child.branch_prob))
    return num / den if den else None


def binomial_section():
    tree = binomial_tree()
    best = None
    for plan in all_plans(tree, tree.root.id):
        value = plan_value(tree, plan)
        if value is not None and (best is None or value > best):
            best = value
    solved = precommitted(tree)
    row("binomial", "precommitted value", best, solved.value)
    ok_atoms = {"u", "du", "dd"} == set(solved.stop_atoms)
    ROWS.append(("binomial", "precommitted plan", "{u, du, dd}",
                 "{" + ", ".join(sorted(solved.stop_atoms)) + "}", ok_atoms))


def two_state_section():
    delta, a = F(9, 10), F(6, 5)
    model = two_state_model(delta, a)
    both, rich_only = two_state_equilibrium_regions()

    # Stop everywhere: the continuation stops at the very next step, paying
    # 1 or `a` with equal conditional odds, so J = delta * (1 + a) / 2.
    closed_both = delta * (1 + a) / 2
    j_both = evaluate(model, PeriodicMarkovPolicy(1, (both,))).J
    row("two-state", "J, stop everywhere", closed_both, j_both[(0, 1)])

    # Stop only at the rich state: h = a*delta/3 + delta*h/3 and p = 1/2
    # give J = 2*a*delta / (3 - delta).
    closed_rich = 2 * a * delta / (3 - delta)
    j_rich = evaluate(model, PeriodicMarkovPolicy(1, (rich_only,))).J
    row("two-state", "J, stop at rich state", closed_rich, j_rich[(0, 1)])

    # The window (3-delta)/(2*delta) < a < (2-delta)/delta admits exactly
    # these two time-homogeneous equilibria.
    window = (3 - delta) / (2 * delta) < a < (2 - delta) / delta
    found = enumerate_periodic_equilibria(model, 1)
    regions = {eq.policy.regions[0] for eq in found}
    row("two-state", "parameter window", True, window)
    row("two-state", "time-homogeneous census", {both, rich_only}, regions)


def minnie_donald_section():
    model = minnie_donald_model()
    report = check_minnie_donald_conditions(
        model.discount, model.payoff[1], model.payoff[4]
    )
    for check in report.checks():
        margin = check.lhs - check.rhs
        ROWS.append(("minnie-donald", check.description,
                     f"margin {margin} ({float(margin):+.6f})", "", check.holds))

    row("minnie-donald", "time-homogeneous census",
        0, len(enumerate_periodic_equilibria(model, 1)))
    row("minnie-donald", "period-4 census",
        2, len(enumerate_periodic_equilibria(model, 4)))

    # The best-response map applied twice shifts each homogeneous region two
    # places along the four-cycle.
    cycle = minnie_donald_cycle_regions()
    shifts = []
    for n in range(1, 5):
        stepped = phi_markov(model, phi_markov(
            model, minnie_donald_homogeneous_policy(n)))
        shifts.append(stepped.regions[0] == cycle[(n + 1) % 4])
    row("minnie-donald", "two-step region cycle", [True] * 4, shifts)


def fmt(value):
    if isinstance(value, F):
        return f"{value} ({float(value):.6f})"
    return str(value)


def main():
    binomial_section()
    two_state_section()
    minnie_donald_section()

    width = max(len(q) for _, q, *_ in ROWS)
    failures = 0
    section = None
    for sec, quantity, oracle, solver, ok in ROWS:
        if sec != section:
            print(f"\n[{sec}]")
            section = sec
        mark = "ok " if ok else "FAIL"
        detail = fmt(oracle) if fmt(solver) in ("", fmt(oracle)) else (
            f"{fmt(oracle)} vs solver {fmt(solver)}")
        print(f"  {mark} {quantity:<{width}}  {detail}")
        failures += not ok
    print(f"\n{len(ROWS)} checks, {failures} failures")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
