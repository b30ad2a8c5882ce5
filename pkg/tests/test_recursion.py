from fractions import Fraction

import pytest

from condstop.catalog import binomial_tree
from condstop.model import Atom, AtomTree
from condstop.policy import StoppingPolicy
from condstop.recursion import (
    PairError,
    SnellPair,
    backward_solve,
    classical_snell,
    pair_from_policy,
    policy_from_pair,
    survival_identities,
    verify_snell_pair,
)

F = Fraction


@pytest.fixture
def solved_binomial():
    tree = binomial_tree()
    pair, policy = backward_solve(tree)
    return tree, pair, policy


class TestBackwardSolve:
    def test_binomial_tables(self, solved_binomial):
        tree, pair, policy = solved_binomial
        assert dict(pair.values) == {
            "root": F(13, 2),
            "u": F(10),
            "d": F(3),
            "uu": F(4),
            "ud": F(2),
            "du": F(2),
        }
        assert dict(pair.survival) == {
            "root": F(1),
            "u": F(1),
            "d": F(1),
            "uu": F(1),
            "ud": F(1),
            "du": F(1),
            "dd": F(0),
        }
        assert policy.decisions == {
            "root": 0,
            "u": 1,
            "d": 1,
            "uu": 1,
            "ud": 1,
            "du": 1,
            "dd": 1,
        }

    def test_survival_drops_on_continue(self):
        # A tree where continuing is optimal while part of the subtree dies:
        # survival at the continuing atom is the in-domain stop mass, not 1.
        atoms = [
            Atom("r", 0, None, F(1), True, F(1)),
            Atom("a", 1, "r", F(1, 2), True, F(8)),
            Atom("b", 1, "r", F(1, 2), False, None),
        ]
        tree = AtomTree(atoms)
        pair, policy = backward_solve(tree)
        # J(r) = (1/2 * 8) / (1/2) = 8 > 1, so r continues with survival 1/2.
        assert pair.values["r"] == F(8)
        assert pair.survival["r"] == F(1, 2)
        assert policy.bit("r") == 0


class TestClassicalSnell:
    def test_hand_envelope(self):
        atoms = [
            Atom("r", 0, None, F(1), True, F(1)),
            Atom("a", 1, "r", F(1, 2), True, F(5)),
            Atom("b", 1, "r", F(1, 2), True, F(0)),
        ]
        tree = AtomTree(atoms)
        env = classical_snell(tree, {a.id: a.payoff for a in tree.atoms()})
        assert env == {"r": F(5, 2), "a": F(5), "b": F(0)}

    def test_envelope_dominates_process(self, domain_corpus):
        for tree in domain_corpus[:10]:
            process = {a.id: a.payoff for a in tree.atoms()}
            env = classical_snell(tree, process)
            for atom in tree.atoms():
                assert env[atom.id] >= process[atom.id]
                kids = tree.children(atom.id)
                if kids:
                    step = sum(k.branch_prob * env[k.id] for k in kids)
                    assert env[atom.id] >= step
                    assert env[atom.id] in (process[atom.id], step)


class TestVerifySnellPair:
    def test_backward_pair_passes(self, solved_binomial):
        tree, pair, _ = solved_binomial
        report = verify_snell_pair(tree, pair)
        assert report.passed
        assert {c.name for c in report.conditions} == {
            "bounds",
            "envelope_of_weighted_gain",
            "survival_minimality",
            "perturbed_supermartingale",
            "martingale_off_stop",
        }

    def test_tampered_value_is_caught(self, solved_binomial):
        tree, pair, _ = solved_binomial
        values = dict(pair.values)
        values["root"] = F(7)
        report = verify_snell_pair(tree, SnellPair(values, pair.survival))
        assert not report.passed
        assert report.condition("bounds").passed
        assert not report.condition("envelope_of_weighted_gain").passed
        assert not report.condition("martingale_off_stop").passed

    def test_out_of_range_survival_short_circuits(self, solved_binomial):
        tree, pair, _ = solved_binomial
        survival = dict(pair.survival)
        survival["u"] = F(2)
        report = verify_snell_pair(tree, SnellPair(pair.values, survival))
        bounds = report.condition("bounds")
        assert not bounds.passed
        assert any("outside (0, 1]" in why for _, why in bounds.failures)
        skipped = report.condition("perturbed_supermartingale")
        assert not skipped.passed
        assert "skipped" in skipped.failures[0][1]

    def test_missing_atom_is_caught(self, solved_binomial):
        tree, pair, _ = solved_binomial
        survival = dict(pair.survival)
        del survival["dd"]
        report = verify_snell_pair(tree, SnellPair(pair.values, survival))
        assert not report.condition("bounds").passed

    def test_negative_stop_payoffs_pass(self):
        # Stopping at r with G = -9/2 beats the continuation value -5, and
        # the child's own stop loses half its survival mass one step later,
        # so E[S'V'] at r (-5/2) exceeds S*V at both r and c.  The unweighted
        # product S*V is not a supermartingale here and no condition should
        # demand it: the twisted-continuation comparisons all hold.
        atoms = [
            Atom("r", 0, None, F(1), True, F(-9, 2)),
            Atom("c", 1, "r", F(1), True, F(-5)),
            Atom("d1", 2, "c", F(1, 2), False, None),
            Atom("d2", 2, "c", F(1, 2), True, F(-5)),
        ]
        tree = AtomTree(atoms)
        pair, policy = backward_solve(tree)
        assert policy.bit("r") == 1 and pair.values["r"] == F(-9, 2)
        assert verify_snell_pair(tree, pair).passed
        assert survival_identities(tree, policy, pair).passed

    def test_perturbation_rejects_greedy_stop(self):
        # A pair claiming "stop at r" with G = 1 while the continuation is
        # worth 2: minimality and the off-stop martingale identities hold
        # (vacuously -- V = payoff everywhere), but the envelope equality and
        # the time-0 deviation inequality both expose the profitable switch
        # to continuing.
        atoms = [
            Atom("r", 0, None, F(1), True, F(1)),
            Atom("c1", 1, "r", F(1, 2), True, F(2)),
            Atom("c2", 1, "r", F(1, 2), False, None),
        ]
        tree = AtomTree(atoms)
        bogus = SnellPair(
            values={"r": F(1), "c1": F(2)},
            survival={"r": F(1), "c1": F(1), "c2": F(0)},
        )
        report = verify_snell_pair(tree, bogus)
        assert report.condition("bounds").passed
        assert report.condition("survival_minimality").passed
        assert report.condition("martingale_off_stop").passed
        assert not report.condition("envelope_of_weighted_gain").passed
        broken = report.condition("perturbed_supermartingale")
        assert not broken.passed
        assert broken.failures[0][0] == "r"


class TestPairPolicyRoundTrip:
    def test_round_trip(self, solved_binomial):
        tree, pair, policy = solved_binomial
        rebuilt = pair_from_policy(tree, policy)
        assert dict(rebuilt.values) == dict(pair.values)
        assert dict(rebuilt.survival) == dict(pair.survival)
        assert policy_from_pair(tree, pair).decisions == policy.decisions

    def test_non_equilibrium_is_rejected(self, solved_binomial):
        tree, _, _ = solved_binomial
        with pytest.raises(PairError):
            pair_from_policy(tree, StoppingPolicy.stop_everywhere(tree))

    def test_indifferent_continuer_is_rejected(self):
        tree = AtomTree(
            [
                Atom("r", 0, None, F(1), True, F(1)),
                Atom("c", 1, "r", F(1), True, F(1)),
            ]
        )
        waiting = StoppingPolicy({"r": 0, "c": 1})
        with pytest.raises(PairError):
            pair_from_policy(tree, waiting)

    def test_bad_pair_is_rejected(self, solved_binomial):
        tree, pair, _ = solved_binomial
        values = dict(pair.values)
        values["root"] = F(7)
        with pytest.raises(PairError):
            policy_from_pair(tree, SnellPair(values, pair.survival))


class TestSurvivalIdentities:
    def test_backward_pair_passes(self, solved_binomial):
        tree, pair, policy = solved_binomial
        report = survival_identities(tree, policy, pair)
        assert report.passed
        assert {c.name for c in report.conditions} == {
            "admissibility",
            "continuation_consistency",
            "survival_expectation",
            "survival_three_case",
        }

    def test_wrong_survival_breaks_the_three_case_shape(self, solved_binomial):
        tree, pair, policy = solved_binomial
        survival = dict(pair.survival)
        survival["root"] = F(1, 2)
        report = survival_identities(tree, policy, SnellPair(pair.values, survival))
        assert not report.condition("survival_three_case").passed

    def test_inadmissible_policy_is_reported(self, solved_binomial):
        tree, pair, _ = solved_binomial
        lazy = StoppingPolicy({a: 0 for a in tree.atom_ids()})
        report = survival_identities(tree, lazy, pair)
        assert not report.condition("admissibility").passed
