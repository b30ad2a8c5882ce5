"""The eight acceptance criteria, one test each.

Every test prints a single `ACCEPTANCE n (<name>): PASS|FAIL` line on the
real stdout (capture is lifted around the print, so the line shows even
under pytest's default fd-level capture) and then asserts the criterion
in full.
"""

from contextlib import contextmanager
from fractions import Fraction as F

import pytest

from condstop import (
    PeriodicMarkovPolicy,
    backward_solve,
    binomial_tree,
    check_minnie_donald_conditions,
    classical_snell,
    enumerate_equilibria,
    enumerate_periodic_equilibria,
    evaluate,
    is_equilibrium,
    is_periodic_equilibrium,
    minnie_donald_cycle_regions,
    minnie_donald_homogeneous_policy,
    minnie_donald_model,
    minnie_donald_periodic_policy,
    pair_from_policy,
    phi_markov,
    policy_from_pair,
    precommitted,
    reachable_pairs,
    survival_identities,
    truncation_limit,
    two_state_equilibrium_regions,
    two_state_model,
    unroll,
    verify_snell_pair,
)


@pytest.fixture
def criterion(capfd):
    @contextmanager
    def _criterion(number: int, name: str):
        try:
            yield
        except BaseException:
            with capfd.disabled():
                print(f"ACCEPTANCE {number} ({name}): FAIL", flush=True)
            raise
        with capfd.disabled():
            print(f"ACCEPTANCE {number} ({name}): PASS", flush=True)

    return _criterion


def test_1_binomial_example(criterion):
    with criterion(1, "binomial-example"):
        tree = binomial_tree()
        best = precommitted(tree)
        assert best.value == F(22, 3)
        # Stop at t = 1 on the up branch, at t = 2 otherwise.
        assert set(best.stop_atoms) == {"u", "du", "dd"}

        pair, policy = backward_solve(tree)
        assert pair.values["root"] == F(13, 2)
        assert pair.survival["root"] == 1
        assert policy.bit("root") == 0
        assert is_equilibrium(tree, policy)

        found = enumerate_equilibria(tree)
        assert len(found) == 1
        assert found[0].decisions == dict(policy.decisions)


def test_2_two_state_census(criterion):
    with criterion(2, "two-state-census"):
        model = two_state_model()  # delta = 9/10, a = 6/5
        everywhere, rich_only = two_state_equilibrium_regions()

        ev_all = evaluate(model, PeriodicMarkovPolicy(1, (everywhere,)))
        assert ev_all.J[(0, 1)] == F(99, 100)
        ev_rich = evaluate(model, PeriodicMarkovPolicy(1, (rich_only,)))
        assert ev_rich.J[(0, 1)] == F(36, 35)
        # Both classifications are strict: 36/35 > 1 > 99/100.
        assert F(36, 35) > 1 > F(99, 100)

        found = enumerate_periodic_equilibria(model, 1)
        assert len(found) == 2
        assert {eq.policy.regions[0] for eq in found} == {everywhere, rich_only}
        assert {eq.evaluation.J[(0, 1)] for eq in found} == {F(99, 100), F(36, 35)}

        report = truncation_limit(model, 10, 3)
        assert report.stable
        assert report.candidate is not None
        assert report.candidate.period == 1
        assert report.candidate.regions[0] == everywhere
        assert is_periodic_equilibrium(model, report.candidate)


def test_3_minnie_donald_cycle(criterion):
    with criterion(3, "minnie-donald-cycle"):
        model = minnie_donald_model()  # delta = 999/1000, a = 24/25, b = 4257/1000
        assert check_minnie_donald_conditions(F(999, 1000), F(24, 25), F(4257, 1000)).all_hold

        assert enumerate_periodic_equilibria(model, 1) == []

        found = enumerate_periodic_equilibria(model, 4)
        assert len(found) == 2
        reachable = reachable_pairs(model, 4)
        profiles = {
            frozenset(p for p in reachable if eq.policy.stops(*p)) for eq in found
        }
        expected = {
            frozenset(p for p in reachable if minnie_donald_periodic_policy(k).stops(*p))
            for k in (1, 2)
        }
        assert profiles == expected

        # The double best response advances the homogeneous-region cycle by
        # two: regions list index i corresponds to R_{i+1}.
        regions = minnie_donald_cycle_regions()
        for n in range(1, 5):
            twice = phi_markov(model, phi_markov(model, minnie_donald_homogeneous_policy(n)))
            assert twice.regions[0] == regions[(n + 1) % 4]


def test_4_early_equilibrium_uniqueness(criterion, tree_corpus):
    with criterion(4, "early-equilibrium-uniqueness"):
        assert len(tree_corpus) >= 100
        for tree in tree_corpus:
            _, reference = backward_solve(tree)
            found = enumerate_equilibria(tree, preference="early")
            assert len(found) == 1
            assert found[0].decisions == dict(reference.decisions)


def test_5_snell_pair_suite(criterion, tree_corpus):
    with criterion(5, "snell-pair-suite"):
        for tree in tree_corpus:
            pair, policy = backward_solve(tree)
            assert verify_snell_pair(tree, pair).passed
            assert survival_identities(tree, policy, pair).passed
            rebuilt = pair_from_policy(tree, policy)
            assert rebuilt.values == pair.values and rebuilt.survival == pair.survival
            assert policy_from_pair(tree, rebuilt).decisions == dict(policy.decisions)


def test_6_classical_reduction(criterion, domain_corpus):
    with criterion(6, "classical-reduction"):
        assert len(domain_corpus) >= 50
        for tree in domain_corpus:
            pair, _ = backward_solve(tree)
            assert all(pair.survival[a] == 1 for a in tree.atom_ids())
            envelope = classical_snell(tree, {a.id: a.payoff for a in tree.atoms()})
            assert pair.values == envelope
            assert pair.values[tree.root.id] == envelope[tree.root.id]


def test_7_precommitment_dominance(criterion, tree_corpus, domain_corpus):
    with criterion(7, "precommitment-dominance"):
        for tree in list(tree_corpus) + list(domain_corpus) + [binomial_tree()]:
            pair, _ = backward_solve(tree)
            assert precommitted(tree).value >= pair.values[tree.root.id]
        binomial = binomial_tree()
        equilibrium_value = backward_solve(binomial)[0].values["root"]
        assert precommitted(binomial).value == F(22, 3) > F(13, 2) == equilibrium_value


def test_8_markovian_structure(criterion, markov_corpus):
    with criterion(8, "markovian-structure"):
        assert len(markov_corpus) >= 20
        for model in markov_corpus:
            tree = unroll(model)
            pair, policy = backward_solve(tree)
            groups: dict = {}
            for atom in tree.atoms():
                key = (atom.level, atom.state, atom.in_domain)
                triple = (
                    policy.bit(atom.id),
                    pair.values.get(atom.id),
                    pair.survival[atom.id],
                )
                groups.setdefault(key, triple)
                assert groups[key] == triple
