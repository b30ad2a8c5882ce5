"""Wire-format round trips and malformed-input rejection."""

import json
from fractions import Fraction as F

import pytest

from condstop import (
    AtomTree,
    ModelError,
    ParseError,
    PeriodicMarkovPolicy,
    PolicyError,
    SnellPair,
    StoppingPolicy,
    TimedRegions,
    backward_solve,
    binomial_tree,
    dump_model,
    dump_pair,
    dump_policy,
    float_mode,
    load_model,
    load_pair,
    load_policy,
    minnie_donald_model,
    model_digest,
    read_json,
    two_state_model,
    unroll,
)


def reload(document):
    """Push a document through a JSON encode/decode cycle first, as the CLI does."""
    return json.loads(json.dumps(document))


class TestModelRoundTrip:
    def test_tree(self):
        tree = binomial_tree()
        doc = dump_model(tree)
        again = dump_model(load_model(reload(doc)))
        assert again == doc

    def test_markov(self):
        model = two_state_model()
        doc = dump_model(model)
        rebuilt = load_model(reload(doc))
        assert dump_model(rebuilt) == doc
        assert rebuilt.discount == F(9, 10)
        assert rebuilt.domain == frozenset({1, 2})

    def test_markov_with_forced_stops(self):
        model = minnie_donald_model()
        doc = dump_model(model)
        assert doc["forced_stop"] == [3, 4]
        rebuilt = load_model(reload(doc))
        assert rebuilt.forced_stop == frozenset({3, 4})
        assert dump_model(rebuilt) == doc

    def test_float_mode_round_trip_is_lossless(self):
        mode = float_mode()
        model = two_state_model(mode=mode)
        doc = dump_model(model)
        rebuilt = load_model(reload(doc), mode=mode)
        assert rebuilt.transitions == model.transitions
        assert rebuilt.payoff == model.payoff


class TestModelDigest:
    def test_stable_across_round_trips(self):
        model = two_state_model()
        digest = model_digest(model)
        assert digest == model_digest(load_model(reload(dump_model(model))))
        assert len(digest) == 64 and int(digest, 16) >= 0

    def test_insensitive_to_document_key_order(self):
        doc = dump_model(two_state_model())
        shuffled = {key: doc[key] for key in sorted(doc, reverse=True)}
        assert model_digest(load_model(shuffled)) == model_digest(load_model(doc))

    def test_sensitive_to_content(self):
        base = model_digest(two_state_model())
        assert model_digest(two_state_model(a=F(13, 10))) != base
        assert model_digest(binomial_tree()) != base


BAD_TREE_DOCS = [
    # duplicate node ids
    {
        "type": "tree",
        "nodes": [
            {"id": "r", "prob": "1", "in_domain": True, "payoff": "1"},
            {"id": "r", "prob": "1", "in_domain": True, "payoff": "1"},
        ],
    },
    # unknown parent
    {
        "type": "tree",
        "nodes": [
            {"id": "r", "prob": "1", "in_domain": True, "payoff": "1"},
            {"id": "a", "parent": "ghost", "prob": "1", "in_domain": True, "payoff": "1"},
        ],
    },
    # parent chain forms a cycle
    {
        "type": "tree",
        "nodes": [
            {"id": "a", "parent": "b", "prob": "1", "in_domain": True, "payoff": "1"},
            {"id": "b", "parent": "a", "prob": "1", "in_domain": True, "payoff": "1"},
        ],
    },
    # missing 'prob'
    {"type": "tree", "nodes": [{"id": "r", "in_domain": True, "payoff": "1"}]},
    # in_domain must be a bool
    {"type": "tree", "nodes": [{"id": "r", "prob": "1", "in_domain": "yes", "payoff": "1"}]},
    # empty node list
    {"type": "tree", "nodes": []},
    # blank id
    {"type": "tree", "nodes": [{"id": "", "prob": "1", "in_domain": True, "payoff": "1"}]},
]


class TestMalformedModels:
    @pytest.mark.parametrize("doc", BAD_TREE_DOCS)
    def test_bad_tree_documents(self, doc):
        with pytest.raises(ParseError):
            load_model(doc)

    def test_unknown_type(self):
        with pytest.raises(ParseError):
            load_model({"type": "galton-watson"})
        with pytest.raises(ParseError):
            load_model(["not", "an", "object"])

    def test_float_scalars_are_rejected(self):
        doc = dump_model(binomial_tree())
        doc["nodes"][0]["payoff"] = 2.0
        with pytest.raises(ParseError):
            load_model(doc)

    def test_declared_horizon_must_match(self):
        doc = dump_model(binomial_tree())
        doc["horizon"] = 5
        with pytest.raises(ParseError):
            load_model(doc)

    def test_markov_missing_keys(self):
        doc = dump_model(two_state_model())
        for key in ("states", "initial", "transitions", "payoff", "domain", "discount"):
            broken = {k: v for k, v in doc.items() if k != key}
            with pytest.raises(ParseError):
                load_model(broken)

    def test_markov_unknown_state_in_row(self):
        doc = dump_model(two_state_model())
        doc["transitions"]["1"]["7"] = "1/10"
        with pytest.raises(ParseError):
            load_model(doc)

    def test_markov_bad_horizon_literal(self):
        doc = dump_model(two_state_model())
        doc["horizon"] = "soon"
        with pytest.raises(ParseError):
            load_model(doc)
        doc["horizon"] = True
        with pytest.raises(ParseError):
            load_model(doc)

    def test_colliding_state_names(self):
        doc = dump_model(two_state_model())
        doc["states"] = [0, 1, "1"]
        with pytest.raises(ParseError):
            load_model(doc)

    def test_valid_document_with_invariant_violation_is_a_model_error(self):
        # Parsing succeeds; the model layer rejects the content.
        doc = dump_model(two_state_model())
        doc["transitions"]["1"]["1"] = "2/3"  # row no longer sums to one
        with pytest.raises(ModelError):
            load_model(doc)


class TestPolicyDocuments:
    def test_decisions_round_trip(self):
        tree = binomial_tree()
        _, policy = backward_solve(tree)
        doc = dump_policy(policy)
        rebuilt = load_policy(reload(doc))
        assert isinstance(rebuilt, StoppingPolicy)
        assert rebuilt.decisions == dict(policy.decisions)
        assert dump_policy(rebuilt) == doc

    def test_decisions_reject_non_bits(self):
        with pytest.raises(ParseError):
            load_policy({"decisions": {"root": 2}})
        with pytest.raises(ParseError):
            load_policy({"decisions": {"root": True}})
        with pytest.raises(ParseError):
            load_policy({"decisions": {}})

    def test_neither_form(self):
        with pytest.raises(ParseError):
            load_policy({"stop": "sometimes"})
        with pytest.raises(ParseError):
            load_policy("just stop")

    def test_regions_need_the_chain(self):
        doc = {"regions": {"0": [1, 2]}}
        with pytest.raises(ParseError):
            load_policy(doc)
        with pytest.raises(ParseError):
            load_policy(doc, model=binomial_tree())

    def test_timed_regions(self):
        model = two_state_model()
        doc = {"regions": {"0": [1], "1": [1, 2], "2": [0, 1, 2]}}
        rule = load_policy(doc, model=model)
        assert isinstance(rule, TimedRegions)
        assert rule.stops(1, 2) and not rule.stops(0, 2)
        with pytest.raises(PolicyError):
            rule.stops(3, 1)
        assert dump_policy(rule) == {"regions": {"0": [1], "1": [1, 2], "2": [0, 1, 2]}}

    def test_timed_regions_on_tree(self):
        model = two_state_model()
        tree = unroll(model, 2)
        rule = load_policy({"regions": {"0": [], "1": [2], "2": [1, 2]}}, model=model)
        bits = rule.on_tree(tree)
        assert bits.bit("1") == 0
        assert bits.bit("1/2") == 1 and bits.bit("1/1") == 0
        assert bits.bit("1/!") == 1  # out of the domain, pinned

    def test_on_tree_needs_every_level(self):
        model = two_state_model()
        tree = unroll(model, 2)
        rule = load_policy({"regions": {"0": [], "1": [2]}}, model=model)
        with pytest.raises(PolicyError):
            rule.on_tree(tree)

    def test_periodic_round_trip(self):
        model = two_state_model()
        doc = {"period": 2, "regions": {"0": [0, 1, 2], "1": [0, 2]}}
        policy = load_policy(reload(doc), model=model)
        assert isinstance(policy, PeriodicMarkovPolicy)
        assert policy.period == 2
        assert policy.regions[1] == frozenset({0, 2})
        assert dump_policy(policy) == doc

    def test_periodic_phase_coverage(self):
        model = two_state_model()
        with pytest.raises(ParseError):
            load_policy({"period": 2, "regions": {"0": [0, 1, 2]}}, model=model)
        with pytest.raises(ParseError):
            load_policy({"period": 0, "regions": {}}, model=model)

    def test_region_keys_must_be_integers(self):
        with pytest.raises(ParseError):
            load_policy({"regions": {"soon": [1]}}, model=two_state_model())

    def test_unknown_region_state(self):
        with pytest.raises(ParseError):
            load_policy({"regions": {"0": [9]}}, model=two_state_model())

    def test_dump_rejects_non_policies(self):
        with pytest.raises(TypeError):
            dump_policy({"root": 1})


class TestPairDocuments:
    def test_round_trip(self):
        tree = binomial_tree()
        pair, _ = backward_solve(tree)
        doc = dump_pair(pair)
        rebuilt = load_pair(reload(doc))
        assert rebuilt.values == dict(pair.values)
        assert rebuilt.survival == dict(pair.survival)
        assert dump_pair(rebuilt) == doc

    def test_rational_strings_on_the_wire(self):
        pair, _ = backward_solve(binomial_tree())
        doc = dump_pair(pair)
        assert doc["V"]["root"] == "13/2"
        assert all(isinstance(v, str) for v in doc["V"].values())

    def test_missing_half(self):
        with pytest.raises(ParseError):
            load_pair({"V": {"root": "1"}})
        with pytest.raises(ParseError):
            load_pair({"V": "nope", "S": {}})

    def test_float_values_rejected(self):
        with pytest.raises(ParseError):
            load_pair({"V": {"root": 6.5}, "S": {"root": "1"}})


class TestReadJson:
    def test_reads_documents(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps(dump_model(binomial_tree())))
        model = load_model(read_json(str(path)))
        assert isinstance(model, AtomTree)
        assert model.horizon == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            read_json(str(tmp_path / "absent.json"))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            read_json(str(path))
