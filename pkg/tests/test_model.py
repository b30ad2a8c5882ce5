from fractions import Fraction

import pytest

from condstop.catalog import binomial_tree, minnie_donald_model, two_state_model
from condstop.model import (
    EXIT_SEGMENT,
    Atom,
    AtomTree,
    MarkovModel,
    ModelError,
    effective_horizon,
    unroll,
)

F = Fraction


def chain(*specs):
    """A single-path tree from (id, in_domain, payoff) triples."""
    atoms = []
    parent = None
    for level, (atom_id, dom, pay) in enumerate(specs):
        atoms.append(Atom(atom_id, level, parent, F(1), dom, pay))
        parent = atom_id
    return AtomTree(atoms)


class TestAtomTree:
    def test_binomial_shape(self):
        tree = binomial_tree()
        assert tree.horizon == 2
        assert [len(level) for level in tree.levels] == [1, 2, 4]
        assert tree.root.id == "root"
        assert [a.id for a in tree.children("d")] == ["du", "dd"]
        assert tree.prob("du") == F(1, 4)
        assert [a.id for a in tree.ancestors("uu")] == ["u", "root"]
        assert "uu" in tree and "xx" not in tree

    def test_effective_flags(self):
        tree = binomial_tree()
        flags = tree.effective_flags()
        # Horizon atoms are always flagged; earlier atoms only when they
        # have no in-domain children.
        assert all(flags[a.id] for a in tree.levels[2])
        assert not flags["root"] and not flags["u"] and not flags["d"]
        assert effective_horizon(tree) == flags

    def test_no_in_domain_children_flags_propagate(self):
        atoms = [
            Atom("r", 0, None, F(1), True, F(1)),
            Atom("m", 1, "r", F(1), False, None),
            Atom("l", 2, "m", F(1), False, None),
        ]
        flags = AtomTree(atoms).effective_flags()
        # r's only child leaves the domain, so r is effectively terminal.
        assert flags == {"r": True, "m": True, "l": True}

    @pytest.mark.parametrize(
        "atoms",
        [
            # duplicate id
            [Atom("r", 0, None, F(1), True, F(1)), Atom("r", 0, None, F(1), True, F(1))],
            # two roots
            [Atom("r", 0, None, F(1), True, F(1)), Atom("s", 0, None, F(1), True, F(1))],
            # child on a non-adjacent level
            [Atom("r", 0, None, F(1), True, F(1)), Atom("c", 2, "r", F(1), True, F(1))],
            # branch probabilities do not sum to one
            [
                Atom("r", 0, None, F(1), True, F(1)),
                Atom("a", 1, "r", F(1, 3), True, F(1)),
                Atom("b", 1, "r", F(1, 3), True, F(1)),
            ],
            # re-enters the domain below an out-of-domain parent
            [
                Atom("r", 0, None, F(1), True, F(1)),
                Atom("a", 1, "r", F(1), False, None),
                Atom("b", 2, "a", F(1), True, F(1)),
            ],
            # out-of-domain root
            [Atom("r", 0, None, F(1), False, None)],
            # interior atom with no children
            [
                Atom("r", 0, None, F(1), True, F(1)),
                Atom("a", 1, "r", F(1, 2), True, F(1)),
                Atom("b", 1, "r", F(1, 2), True, F(1)),
                Atom("aa", 2, "a", F(1), True, F(1)),
            ],
        ],
    )
    def test_invalid_trees(self, atoms):
        with pytest.raises(ModelError):
            AtomTree(atoms)

    def test_empty(self):
        with pytest.raises(ModelError):
            AtomTree([])


class TestMarkovModel:
    def test_two_state_accessors(self):
        model = two_state_model()
        assert model.exit_states == frozenset({0})
        assert model.gain(0, 2) == F(6, 5)
        assert model.gain(2, 1) == F(81, 100)
        assert model.domain_successor_mass(1) == F(2, 3)
        assert model.reachable_domain_states() == frozenset({1, 2})

    def test_minnie_donald_reachability(self):
        model = minnie_donald_model()
        assert model.exit_states == frozenset({0})
        assert model.forced_stop == frozenset({3, 4})
        assert model.reachable_domain_states() == frozenset({1, 2, 3, 4})

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"initial": 0},  # initial state outside the domain
            {"domain": frozenset({1, 2, 9})},
            {"payoff": {1: F(1)}},  # payoff missing a domain state
            {"discount": F(0)},
            {"discount": F(11, 10)},
            {"horizon": 0},
            {"forced_stop": frozenset({0})},
            {"transitions": {0: {0: F(1)}, 1: {1: F(1, 2)}, 2: {2: F(1)}}},
        ],
    )
    def test_invalid_models(self, kwargs):
        base = dict(
            states=(0, 1, 2),
            initial=1,
            transitions={
                0: {0: F(1)},
                1: {0: F(1, 3), 1: F(1, 3), 2: F(1, 3)},
                2: {0: F(1, 3), 1: F(1, 3), 2: F(1, 3)},
            },
            domain=frozenset({1, 2}),
            payoff={1: F(1), 2: F(6, 5)},
            discount=F(9, 10),
        )
        base.update(kwargs)
        with pytest.raises(ModelError):
            MarkovModel(**base)


class TestUnroll:
    def test_two_state_structure(self):
        model = two_state_model()
        tree = unroll(model, 2)
        assert tree.horizon == 2
        assert tree.root.id == "1" and tree.root.state == 1
        kids = {a.id: a for a in tree.children("1")}
        # Exit mass (the transition to state 0) merges into one "!" atom.
        assert set(kids) == {"1/1", "1/2", f"1/{EXIT_SEGMENT}"}
        assert kids["1/1"].branch_prob == F(1, 3)
        assert kids["1/1"].in_domain and kids["1/1"].state == 1
        exit_atom = kids[f"1/{EXIT_SEGMENT}"]
        assert not exit_atom.in_domain and exit_atom.state is None
        assert exit_atom.branch_prob == F(1, 3)
        # Exit chains continue with probability one to the horizon.
        (tail,) = tree.children(exit_atom.id)
        assert tail.branch_prob == F(1) and not tail.in_domain

    def test_payoffs_are_discounted_gains(self):
        model = two_state_model()
        tree = unroll(model, 3)
        assert tree.atom("1").payoff == F(1)
        assert tree.atom("1/2").payoff == F(9, 10) * F(6, 5)
        assert tree.atom("1/2/2").payoff == F(81, 100) * F(6, 5)

    def test_horizon_resolution(self):
        model = two_state_model()
        with pytest.raises(ModelError):
            unroll(model)  # infinite model needs an explicit horizon
        with pytest.raises(ModelError):
            unroll(model, 0)
        assert unroll(model, 1).horizon == 1

    def test_atom_counts_follow_the_chain(self, markov_corpus):
        for model in markov_corpus[:6]:
            tree = unroll(model)
            # Levels partition the atoms and the level probabilities sum to 1.
            total = sum(len(level) for level in tree.levels)
            assert total == len(list(tree.atoms()))
            for level in tree.levels:
                assert sum(tree.prob(a.id) for a in level) == 1

    def test_flag_monotonicity(self, tree_corpus):
        for tree in tree_corpus[:40]:
            flags = tree.effective_flags()
            for atom in tree.atoms():
                if atom.parent is not None and flags[atom.parent]:
                    assert flags[atom.id]
                if not atom.in_domain:
                    assert flags[atom.id]
