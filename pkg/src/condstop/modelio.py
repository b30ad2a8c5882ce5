"""JSON wire formats for models, policies, and value/survival pairs.

All numbers travel as rational strings ("22/3", "0.5", "3"); floats in files
are rejected so that exact runs stay exact.  States may be JSON integers or
strings; wherever JSON forces a string key (transition rows, payoff tables,
region maps), the key is matched against str(state).

Malformed input raises ParseError; input that parses but violates a model
invariant raises the model layer's own errors.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Union

from .infinite import PeriodicMarkovPolicy
from .model import Atom, AtomTree, MarkovModel, ModelError, State
from .numeric import EXACT, NumericError, NumericMode, Scalar, format_scalar, parse_rational
from .policy import PolicyError, StoppingPolicy
from .recursion import SnellPair

Model = Union[AtomTree, MarkovModel]


class ParseError(ValueError):
    """The input file or document is not a valid wire-format object."""


@dataclass(frozen=True)
class TimedRegions:
    """A time-dependent Markov stopping rule: stop at time t iff the state
    lies in the region for t.  The finite-horizon cousin of a periodic policy."""

    regions: Mapping[int, frozenset]

    def stops(self, time: int, state: State) -> bool:
        if time not in self.regions:
            raise PolicyError(f"no stop region declared for time {time}")
        return state in self.regions[time]

    def on_tree(self, tree: AtomTree) -> StoppingPolicy:
        bits: dict[str, int] = {}
        for atom in tree.atoms():
            if not atom.in_domain:
                bits[atom.id] = 1
            elif atom.state is None:
                raise PolicyError(
                    f"atom {atom.id!r} carries no state; the tree was not unrolled from a chain"
                )
            else:
                bits[atom.id] = int(self.stops(atom.level, atom.state))
        return StoppingPolicy(bits)


PolicyDocument = Union[StoppingPolicy, TimedRegions, PeriodicMarkovPolicy]


def _require(mapping: Mapping[str, Any], key: str, context: str) -> Any:
    if key not in mapping:
        raise ParseError(f"{context}: missing required key {key!r}")
    return mapping[key]


def _scalar(value: Any, mode: NumericMode, context: str) -> Scalar:
    try:
        return mode.coerce(parse_rational(value))
    except (NumericError, TypeError) as exc:
        raise ParseError(f"{context}: {exc}") from exc


def _state_token(value: Any, context: str) -> State:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise ParseError(f"{context}: states must be integers or strings, got {value!r}")
    return value


def _state_lookup(states: tuple) -> dict[str, State]:
    lookup: dict[str, State] = {}
    for state in states:
        key = str(state)
        if key in lookup:
            raise ParseError(f"states {lookup[key]!r} and {state!r} collide as {key!r}")
        lookup[key] = state
    return lookup


def _resolve(token: Any, lookup: Mapping[str, State], context: str) -> State:
    if isinstance(token, bool):
        raise ParseError(f"{context}: {token!r} is not a state")
    if not isinstance(token, (int, str)):
        raise ParseError(f"{context}: {token!r} is not a state")
    key = str(token)
    if key not in lookup:
        raise ParseError(f"{context}: unknown state {token!r}")
    return lookup[key]


def load_model(document: Mapping[str, Any], mode: NumericMode = EXACT) -> Model:
    """Build a tree or chain model from its wire-format dictionary."""
    if not isinstance(document, Mapping):
        raise ParseError("model document must be a JSON object")
    kind = _require(document, "type", "model")
    if kind == "tree":
        return _load_tree(document, mode)
    if kind == "markov":
        return _load_markov(document, mode)
    raise ParseError(f"model: unknown type {kind!r}")


def _load_tree(document: Mapping[str, Any], mode: NumericMode) -> AtomTree:
    nodes = _require(document, "nodes", "tree model")
    if not isinstance(nodes, list) or not nodes:
        raise ParseError("tree model: 'nodes' must be a non-empty list")
    raw: dict[str, Mapping[str, Any]] = {}
    for i, node in enumerate(nodes):
        if not isinstance(node, Mapping):
            raise ParseError(f"tree model: node {i} must be an object")
        node_id = _require(node, "id", f"node {i}")
        if not isinstance(node_id, str) or not node_id:
            raise ParseError(f"node {i}: 'id' must be a non-empty string")
        if node_id in raw:
            raise ParseError(f"node {i}: duplicate id {node_id!r}")
        raw[node_id] = node

    levels: dict[str, int] = {}

    def level_of(node_id: str, trail: tuple[str, ...] = ()) -> int:
        if node_id in levels:
            return levels[node_id]
        if node_id in trail:
            raise ParseError(f"node {node_id!r}: parent chain forms a cycle")
        parent = raw[node_id].get("parent")
        if parent is None:
            levels[node_id] = 0
        else:
            if not isinstance(parent, str) or parent not in raw:
                raise ParseError(f"node {node_id!r}: unknown parent {parent!r}")
            levels[node_id] = level_of(parent, trail + (node_id,)) + 1
        return levels[node_id]

    atoms = []
    for node_id, node in raw.items():
        level = level_of(node_id)
        in_domain = node.get("in_domain")
        if not isinstance(in_domain, bool):
            raise ParseError(f"node {node_id!r}: 'in_domain' must be true or false")
        payoff = node.get("payoff")
        if payoff is not None:
            payoff = _scalar(payoff, mode, f"node {node_id!r} payoff")
        atoms.append(
            Atom(
                id=node_id,
                level=level,
                parent=node.get("parent"),
                branch_prob=_scalar(_require(node, "prob", f"node {node_id!r}"), mode,
                                    f"node {node_id!r} prob"),
                in_domain=in_domain,
                payoff=payoff,
            )
        )
    tree = AtomTree(atoms, mode=mode)
    horizon = document.get("horizon")
    if horizon is not None and horizon != tree.horizon:
        raise ParseError(
            f"tree model: declared horizon {horizon!r} but nodes reach level {tree.horizon}"
        )
    return tree


def _load_markov(document: Mapping[str, Any], mode: NumericMode) -> MarkovModel:
    states = _require(document, "states", "markov model")
    if not isinstance(states, list) or not states:
        raise ParseError("markov model: 'states' must be a non-empty list")
    states = tuple(_state_token(s, "markov model states") for s in states)
    lookup = _state_lookup(states)

    transitions_doc = _require(document, "transitions", "markov model")
    if not isinstance(transitions_doc, Mapping):
        raise ParseError("markov model: 'transitions' must be an object")
    transitions: dict[State, dict[State, Scalar]] = {}
    for key, row in transitions_doc.items():
        state = _resolve(key, lookup, "transitions")
        if not isinstance(row, Mapping):
            raise ParseError(f"transitions[{key!r}] must be an object")
        transitions[state] = {
            _resolve(y, lookup, f"transitions[{key!r}]"): _scalar(
                p, mode, f"transitions[{key!r}][{y!r}]"
            )
            for y, p in row.items()
        }

    payoff_doc = _require(document, "payoff", "markov model")
    if not isinstance(payoff_doc, Mapping):
        raise ParseError("markov model: 'payoff' must be an object")
    payoff = {
        _resolve(key, lookup, "payoff"): _scalar(value, mode, f"payoff[{key!r}]")
        for key, value in payoff_doc.items()
    }

    domain = _require(document, "domain", "markov model")
    if not isinstance(domain, list):
        raise ParseError("markov model: 'domain' must be a list")
    horizon = document.get("horizon", "infinite")
    if horizon == "infinite":
        horizon = None
    elif isinstance(horizon, bool) or not isinstance(horizon, int):
        raise ParseError(f"markov model: horizon must be an integer or \"infinite\", got {horizon!r}")
    forced = document.get("forced_stop", [])
    if not isinstance(forced, list):
        raise ParseError("markov model: 'forced_stop' must be a list")

    return MarkovModel(
        states=states,
        initial=_resolve(_require(document, "initial", "markov model"), lookup, "initial"),
        transitions=transitions,
        domain=frozenset(_resolve(s, lookup, "domain") for s in domain),
        payoff=payoff,
        discount=_scalar(_require(document, "discount", "markov model"), mode, "discount"),
        horizon=horizon,
        forced_stop=frozenset(_resolve(s, lookup, "forced_stop") for s in forced),
        mode=mode,
    )


def dump_model(model: Model) -> dict:
    """Wire-format dictionary for a model, inverse of `load_model`."""
    if isinstance(model, AtomTree):
        nodes = []
        for atom in model.atoms():
            nodes.append(
                {
                    "id": atom.id,
                    "parent": atom.parent,
                    "prob": format_scalar(atom.branch_prob),
                    "in_domain": atom.in_domain,
                    "payoff": None if atom.payoff is None else format_scalar(atom.payoff),
                }
            )
        return {"type": "tree", "nodes": nodes, "horizon": model.horizon}
    document = {
        "type": "markov",
        "states": list(model.states),
        "initial": model.initial,
        "transitions": {
            str(x): {str(y): format_scalar(p) for y, p in sorted(
                model.transitions[x].items(), key=lambda item: str(item[0])
            )}
            for x in model.states
        },
        "domain": sorted((s for s in model.domain), key=str),
        "payoff": {str(s): format_scalar(g) for s, g in sorted(
            model.payoff.items(), key=lambda item: str(item[0])
        )},
        "discount": format_scalar(model.discount),
        "horizon": "infinite" if model.horizon is None else model.horizon,
    }
    if model.forced_stop:
        document["forced_stop"] = sorted(model.forced_stop, key=str)
    return document


def model_digest(model: Model) -> str:
    """Stable content hash of a model's canonical wire form."""
    canonical = json.dumps(dump_model(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_policy(
    document: Mapping[str, Any], model: Optional[MarkovModel] = None
) -> PolicyDocument:
    """Build a policy from its wire form.

    Tree policies ({"decisions": ...}) stand alone.  Region-based policies
    name states, so the chain model they belong to must be supplied.
    """
    if not isinstance(document, Mapping):
        raise ParseError("policy document must be a JSON object")
    if "decisions" in document:
        decisions = document["decisions"]
        if not isinstance(decisions, Mapping) or not decisions:
            raise ParseError("policy: 'decisions' must be a non-empty object")
        bits: dict[str, int] = {}
        for atom_id, bit in decisions.items():
            if isinstance(bit, bool) or bit not in (0, 1):
                raise ParseError(f"policy: decision at {atom_id!r} must be 0 or 1")
            bits[atom_id] = bit
        return StoppingPolicy(bits)
    if "regions" not in document:
        raise ParseError("policy: expected 'decisions' or 'regions'")
    if model is None or isinstance(model, AtomTree):
        raise ParseError("policy: region form names chain states; supply the chain model")
    lookup = _state_lookup(model.states)
    regions_doc = document["regions"]
    if not isinstance(regions_doc, Mapping):
        raise ParseError("policy: 'regions' must be an object")
    rows: dict[int, frozenset] = {}
    for key, members in regions_doc.items():
        try:
            time = int(key)
        except (TypeError, ValueError):
            raise ParseError(f"policy: region key {key!r} is not an integer") from None
        if not isinstance(members, list):
            raise ParseError(f"policy: region {key!r} must be a list of states")
        rows[time] = frozenset(_resolve(s, lookup, f"region {key!r}") for s in members)
    if "period" in document:
        period = document["period"]
        if isinstance(period, bool) or not isinstance(period, int) or period < 1:
            raise ParseError(f"policy: period must be a positive integer, got {period!r}")
        if set(rows) != set(range(period)):
            raise ParseError(
                f"policy: regions must cover phases 0..{period - 1}, got {sorted(rows)}"
            )
        return PeriodicMarkovPolicy(period, tuple(rows[phase] for phase in range(period)))
    return TimedRegions(rows)


def dump_policy(policy: PolicyDocument) -> dict:
    if isinstance(policy, StoppingPolicy):
        return {"decisions": {aid: policy.decisions[aid] for aid in sorted(policy.decisions)}}
    if isinstance(policy, PeriodicMarkovPolicy):
        return {
            "period": policy.period,
            "regions": {
                str(phase): sorted(region, key=str)
                for phase, region in enumerate(policy.regions)
            },
        }
    if isinstance(policy, TimedRegions):
        return {
            "regions": {
                str(time): sorted(policy.regions[time], key=str)
                for time in sorted(policy.regions)
            }
        }
    raise TypeError(f"not a policy: {policy!r}")


def load_pair(document: Mapping[str, Any], mode: NumericMode = EXACT) -> SnellPair:
    if not isinstance(document, Mapping):
        raise ParseError("pair document must be a JSON object")
    values_doc = _require(document, "V", "pair")
    survival_doc = _require(document, "S", "pair")
    if not isinstance(values_doc, Mapping) or not isinstance(survival_doc, Mapping):
        raise ParseError("pair: 'V' and 'S' must be objects keyed by atom id")
    values = {aid: _scalar(v, mode, f"V[{aid!r}]") for aid, v in values_doc.items()}
    survival = {aid: _scalar(s, mode, f"S[{aid!r}]") for aid, s in survival_doc.items()}
    return SnellPair(values, survival)


def dump_pair(pair: SnellPair) -> dict:
    return {
        "V": {aid: format_scalar(pair.values[aid]) for aid in sorted(pair.values)},
        "S": {aid: format_scalar(pair.survival[aid]) for aid in sorted(pair.survival)},
    }


def read_json(path: str) -> Any:
    """Read a JSON document from disk, mapping failures to ParseError."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
