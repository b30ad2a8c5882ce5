"""Finite filtrations as atom trees, and finite-state Markov chain models.

An `AtomTree` describes a finite probability space with a filtration: level t
holds the atoms of the time-t partition, each carrying a branch probability, a
flag saying whether the path is still inside the domain of relevance, and a
payoff that exists exactly on in-domain atoms.  Outside the domain the payoff
is *absent*, not zero; code that aggregates payoffs must skip those atoms.

`MarkovModel` is the chain view: a row-stochastic transition matrix, a domain
of states in which the gain is defined, a per-state gain discounted
geometrically, and an initial state inside the domain.  `unroll` turns a chain
into an `AtomTree`; on the first step that leaves the domain the continuation
is collapsed into a single absorbing out-of-domain chain, since nothing that
happens after the exit can affect any conditional value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Iterator, Mapping, Optional, Union

from .numeric import EXACT, NumericMode, Scalar

State = Hashable

EXIT_SEGMENT = "!"


class ModelError(ValueError):
    """A tree or chain violates one of its structural invariants."""


@dataclass(frozen=True)
class Atom:
    """One atom of a level partition.

    `payoff` must be present exactly when `in_domain` is true.  `state` is set
    for atoms produced by unrolling a Markov chain and is None on the collapsed
    out-of-domain chain.
    """

    id: str
    level: int
    parent: Optional[str]
    branch_prob: Scalar
    in_domain: bool
    payoff: Optional[Scalar] = None
    state: Optional[State] = None


class AtomTree:
    """A finite filtration tree with per-atom domain flags and payoffs."""

    def __init__(self, atoms: Iterable[Atom], mode: NumericMode = EXACT):
        self.mode = mode
        by_level: dict[int, list[Atom]] = {}
        by_id: dict[str, Atom] = {}
        for atom in atoms:
            if atom.id in by_id:
                raise ModelError(f"duplicate atom id {atom.id!r}")
            by_id[atom.id] = atom
            by_level.setdefault(atom.level, []).append(atom)
        if not by_id:
            raise ModelError("tree has no atoms")
        levels = sorted(by_level)
        horizon = levels[-1]
        if levels != list(range(horizon + 1)):
            raise ModelError(f"levels must be contiguous from 0, got {levels}")
        if horizon < 1:
            raise ModelError("horizon must be a positive integer")
        if len(by_level[0]) != 1:
            raise ModelError("level 0 must hold exactly one atom")
        root = by_level[0][0]
        if root.parent is not None or root.branch_prob != mode.one or not root.in_domain:
            raise ModelError("root must have no parent, probability 1 and be in-domain")

        children: dict[str, list[Atom]] = {a.id: [] for a in by_id.values()}
        for atom in by_id.values():
            if atom.level == 0:
                continue
            parent = by_id.get(atom.parent) if atom.parent is not None else None
            if parent is None or parent.level != atom.level - 1:
                raise ModelError(f"atom {atom.id!r} has no parent on the previous level")
            if atom.in_domain and not parent.in_domain:
                raise ModelError(f"atom {atom.id!r} re-enters the domain below {parent.id!r}")
            children[parent.id].append(atom)

        for atom in by_id.values():
            if (atom.payoff is not None) != atom.in_domain:
                raise ModelError(
                    f"atom {atom.id!r}: payoff must be present exactly on in-domain atoms"
                )
            if not (atom.branch_prob > 0):
                raise ModelError(f"atom {atom.id!r}: branch probability must be positive")
            kids = children[atom.id]
            if atom.level < horizon:
                if not kids:
                    raise ModelError(f"atom {atom.id!r} at level {atom.level} has no children")
                total = sum(k.branch_prob for k in kids)
                if not mode.eq(total, mode.one):
                    raise ModelError(
                        f"children of {atom.id!r} have probabilities summing to {total}, not 1"
                    )
            elif kids:
                raise ModelError(f"atom {atom.id!r} at the horizon has children")

        self._levels: tuple[tuple[Atom, ...], ...] = tuple(
            tuple(by_level[t]) for t in range(horizon + 1)
        )
        self._by_id = by_id
        self._children = {aid: tuple(kids) for aid, kids in children.items()}
        self._level_index = {
            a.id: i for level in self._levels for i, a in enumerate(level)
        }
        probs: dict[str, Scalar] = {root.id: mode.one}
        for level in self._levels[1:]:
            for atom in level:
                probs[atom.id] = probs[atom.parent] * atom.branch_prob
        self._prob = probs
        self._effective_flags: Optional[dict[str, bool]] = None

    @property
    def horizon(self) -> int:
        return len(self._levels) - 1

    @property
    def levels(self) -> tuple[tuple[Atom, ...], ...]:
        return self._levels

    @property
    def root(self) -> Atom:
        return self._levels[0][0]

    def atom(self, atom_id: str) -> Atom:
        return self._by_id[atom_id]

    def __contains__(self, atom_id: str) -> bool:
        return atom_id in self._by_id

    def atoms(self) -> Iterator[Atom]:
        for level in self._levels:
            yield from level

    def atom_ids(self) -> Iterator[str]:
        for atom in self.atoms():
            yield atom.id

    def children(self, atom_id: str) -> tuple[Atom, ...]:
        return self._children[atom_id]

    def prob(self, atom_id: str) -> Scalar:
        """Unconditional probability of the atom."""
        return self._prob[atom_id]

    def index_in_level(self, atom_id: str) -> int:
        return self._level_index[atom_id]

    def ancestors(self, atom_id: str) -> Iterator[Atom]:
        """The chain of strict ancestors, nearest first."""
        atom = self._by_id[atom_id]
        while atom.parent is not None:
            atom = self._by_id[atom.parent]
            yield atom

    def effective_flags(self) -> dict[str, bool]:
        if self._effective_flags is None:
            self._effective_flags = effective_horizon(self)
        return self._effective_flags


def effective_horizon(tree: AtomTree) -> dict[str, bool]:
    """Per-atom flags marking atoms at or past the effective horizon.

    An atom at level t is flagged when continuing past it is impossible or
    pointless: t is the final level, the atom has no in-domain children (the
    conditional probability of remaining in the domain one more step is zero,
    which covers out-of-domain atoms), or an ancestor was already flagged.
    Flags are monotone along every path.
    """
    horizon = tree.horizon
    flags: dict[str, bool] = {}
    for level in tree.levels:
        for atom in level:
            if atom.parent is not None and flags[atom.parent]:
                flags[atom.id] = True
            elif atom.level == horizon:
                flags[atom.id] = True
            else:
                flags[atom.id] = not any(
                    child.in_domain for child in tree.children(atom.id)
                )
    return flags


PayoffFn = Callable[[int, State], Scalar]


@dataclass(frozen=True)
class MarkovModel:
    """A finite-state chain with a payoff domain and geometric discounting.

    `payoff` maps exactly the domain states to their gain; the realized gain
    at time t in state x is discount**t * payoff[x].  A time-dependent gain
    can be supplied through `time_payoff(t, state)`, which then replaces the
    per-state table inside the discount factor.  `forced_stop` lists domain
    states at which every stopping policy under study is pinned to stop.
    `horizon` is a positive integer or None for an infinite-horizon model.
    """

    states: tuple[State, ...]
    initial: State
    transitions: Mapping[State, Mapping[State, Scalar]]
    domain: frozenset[State]
    payoff: Mapping[State, Scalar]
    discount: Scalar
    horizon: Optional[int] = None
    forced_stop: frozenset[State] = frozenset()
    time_payoff: Optional[PayoffFn] = field(default=None, compare=False)
    mode: NumericMode = EXACT

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "domain", frozenset(self.domain))
        object.__setattr__(self, "forced_stop", frozenset(self.forced_stop))
        if len(set(self.states)) != len(self.states) or not self.states:
            raise ModelError("states must be a nonempty sequence without duplicates")
        state_set = set(self.states)
        if not self.domain <= state_set:
            raise ModelError("domain must be a subset of the states")
        if self.initial not in self.domain:
            raise ModelError("initial state must lie in the domain")
        if set(self.payoff) != set(self.domain):
            raise ModelError("payoff must be defined exactly on the domain states")
        if not self.forced_stop <= self.domain:
            raise ModelError("forced-stop states must lie in the domain")
        if not (0 < self.discount <= 1):
            raise ModelError("discount must lie in (0, 1]")
        if self.horizon is not None and (not isinstance(self.horizon, int) or self.horizon <= 0):
            raise ModelError("horizon must be a positive integer or None")
        mode = self.mode
        for state in self.states:
            row = self.transitions.get(state)
            if row is None:
                raise ModelError(f"state {state!r} has no transition row")
            if not set(row) <= state_set:
                raise ModelError(f"row of {state!r} references unknown states")
            if any(p < 0 for p in row.values()):
                raise ModelError(f"row of {state!r} has a negative probability")
            if not mode.eq(sum(row.values(), mode.zero), mode.one):
                raise ModelError(f"row of {state!r} does not sum to 1")

    @property
    def exit_states(self) -> frozenset[State]:
        return frozenset(s for s in self.states if s not in self.domain)

    def gain(self, t: int, state: State) -> Scalar:
        """Realized payoff at time t in an in-domain state."""
        base = self.time_payoff(t, state) if self.time_payoff is not None else self.payoff[state]
        return self.discount**t * base

    def row(self, state: State) -> Mapping[State, Scalar]:
        return self.transitions[state]

    def domain_successor_mass(self, state: State) -> Scalar:
        """One-step probability of remaining in the domain from `state`."""
        return sum(
            (p for y, p in self.transitions[state].items() if y in self.domain),
            self.mode.zero,
        )

    def reachable_domain_states(self) -> frozenset[State]:
        """Domain states reachable from the initial state along domain paths."""
        seen = {self.initial}
        frontier = [self.initial]
        while frontier:
            x = frontier.pop()
            for y, p in self.transitions[x].items():
                if p > 0 and y in self.domain and y not in seen:
                    seen.add(y)
                    frontier.append(y)
        return frozenset(seen)


def unroll(model: MarkovModel, horizon: Optional[int] = None) -> AtomTree:
    """Expand a chain into an atom tree of the given depth.

    Each in-domain atom branches according to the positive-probability
    transitions of its state; all mass leaving the domain is merged into one
    out-of-domain child, which then continues as a single absorbing chain down
    to the horizon.  Zero-probability transitions produce no atoms.
    """
    if horizon is None:
        horizon = model.horizon
    if horizon is None:
        raise ModelError("an explicit horizon is required for an infinite-horizon model")
    if not isinstance(horizon, int) or horizon <= 0:
        raise ModelError("horizon must be a positive integer")
    mode = model.mode
    root = Atom(
        id=str(model.initial),
        level=0,
        parent=None,
        branch_prob=mode.one,
        in_domain=True,
        payoff=model.gain(0, model.initial),
        state=model.initial,
    )
    atoms = [root]
    frontier = [root]
    for t in range(1, horizon + 1):
        next_frontier = []
        for atom in frontier:
            if atom.state is None:
                child = Atom(
                    id=f"{atom.id}/{EXIT_SEGMENT}",
                    level=t,
                    parent=atom.id,
                    branch_prob=mode.one,
                    in_domain=False,
                )
                atoms.append(child)
                next_frontier.append(child)
                continue
            row = model.transitions[atom.state]
            exit_mass = mode.zero
            for y in model.states:
                p = row.get(y, mode.zero)
                if not p > 0:
                    continue
                if y not in model.domain:
                    exit_mass += p
                    continue
                child = Atom(
                    id=f"{atom.id}/{y}",
                    level=t,
                    parent=atom.id,
                    branch_prob=p,
                    in_domain=True,
                    payoff=model.gain(t, y),
                    state=y,
                )
                atoms.append(child)
                next_frontier.append(child)
            if exit_mass > 0:
                child = Atom(
                    id=f"{atom.id}/{EXIT_SEGMENT}",
                    level=t,
                    parent=atom.id,
                    branch_prob=exit_mass,
                    in_domain=False,
                )
                atoms.append(child)
                next_frontier.append(child)
        frontier = next_frontier
    return AtomTree(atoms, mode=mode)
