"""Guards: variables, finite-domain valuations, boolean expressions and their
translation and satisfaction.

The guard language is a small fixed fragment: integer atoms (variables and
constants) compared with ``< <= == != >= >`` and combined with ``and``,
``or`` and ``not``.  Integer expressions with ``+ - *`` share the same AST
and are used by action programs.
"""
from __future__ import annotations

import itertools
import operator
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from typing import Union

from ._util import FrozenMap, env_cap
from .errors import CapacityError, WellFormednessError

# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - *
    left: "IntExpr"
    right: "IntExpr"

    def __str__(self) -> str:
        return f"{_int_operand(self.left, self.op, False)} {self.op} {_int_operand(self.right, self.op, True)}"


IntExpr = Union[Var, Const, BinOp]

_PREC = {"+": 1, "-": 1, "*": 2}


def _int_operand(e: IntExpr, parent: str, right: bool) -> str:
    # parsing is left-associative, so a right operand of equal precedence
    # keeps its parentheses
    if isinstance(e, BinOp):
        p, q = _PREC[e.op], _PREC[parent]
        if p < q or (right and p == q):
            return f"({e})"
    return str(e)


@dataclass(frozen=True)
class BoolConst:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Compare:
    op: str
    left: IntExpr
    right: IntExpr

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class And:
    left: "GuardExpr"
    right: "GuardExpr"

    def __str__(self) -> str:
        return f"{_paren_if(self.left, Or)} and {_paren_if(self.right, (Or, And))}"


@dataclass(frozen=True)
class Or:
    left: "GuardExpr"
    right: "GuardExpr"

    def __str__(self) -> str:
        return f"{self.left} or {_paren_if(self.right, Or)}"


@dataclass(frozen=True)
class Not:
    operand: "GuardExpr"

    def __str__(self) -> str:
        return f"not {_paren_if(self.operand, (And, Or))}"


GuardExpr = Union[BoolConst, Compare, And, Or, Not]

TRUE = BoolConst(True)
FALSE = BoolConst(False)


def _paren_if(g: GuardExpr, kinds) -> str:
    return f"({g})" if isinstance(g, kinds) else str(g)


_CMP = {
    "<": operator.lt,
    "<=": operator.le,
    "==": operator.eq,
    "!=": operator.ne,
    ">=": operator.ge,
    ">": operator.gt,
}
_ARITH = {"+": operator.add, "-": operator.sub, "*": operator.mul}


def free_vars(e) -> frozenset[str]:
    """Variables mentioned in a guard or integer expression."""
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, (Const, BoolConst)):
        return frozenset()
    if isinstance(e, (BinOp, Compare, And, Or)):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, Not):
        return free_vars(e.operand)
    raise TypeError(f"not an expression: {e!r}")


def eval_int(e: IntExpr, env: Mapping[str, int]) -> int:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise WellFormednessError(f"unbound variable {e.name!r}") from None
    if isinstance(e, BinOp):
        return _ARITH[e.op](eval_int(e.left, env), eval_int(e.right, env))
    raise TypeError(f"not an integer expression: {e!r}")


def eval_guard(g: GuardExpr, omega: Mapping[str, int]) -> bool:
    """Satisfaction ``omega |= g``.

    Raises WellFormednessError if ``g`` mentions a variable that ``omega``
    does not bind.
    """
    if isinstance(g, BoolConst):
        return g.value
    if isinstance(g, Compare):
        return _CMP[g.op](eval_int(g.left, omega), eval_int(g.right, omega))
    if isinstance(g, And):
        # evaluate both sides so unbound variables are always reported
        left = eval_guard(g.left, omega)
        right = eval_guard(g.right, omega)
        return left and right
    if isinstance(g, Or):
        left = eval_guard(g.left, omega)
        right = eval_guard(g.right, omega)
        return left or right
    if isinstance(g, Not):
        return not eval_guard(g.operand, omega)
    raise TypeError(f"not a guard: {g!r}")


def substitute(e, mapping: Mapping[str, str]):
    """Rename variables in ``e``; names missing from ``mapping`` are kept."""
    if isinstance(e, Var):
        return Var(mapping.get(e.name, e.name))
    if isinstance(e, (Const, BoolConst)):
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Compare):
        return Compare(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, And):
        return And(substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Or):
        return Or(substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Not):
        return Not(substitute(e.operand, mapping))
    raise TypeError(f"not an expression: {e!r}")


def parse_guard(text: str) -> GuardExpr:
    """Parse the guard surface syntax, e.g. ``trialsNum < 3 and not x == y``."""
    from ._syntax import SyntaxErr, TokenStream, parse_guard_expr, tokenize

    ts = TokenStream(tokenize(text))
    g = parse_guard_expr(ts)
    if ts.peek.kind != "eof":
        raise SyntaxErr(f"unexpected {ts.peek.value!r} after guard", ts.peek.span)
    return g


def parse_int(text: str) -> IntExpr:
    from ._syntax import SyntaxErr, TokenStream, parse_int_expr, tokenize

    ts = TokenStream(tokenize(text))
    e = parse_int_expr(ts)
    if ts.peek.kind != "eof":
        raise SyntaxErr(f"unexpected {ts.peek.value!r} after expression", ts.peek.span)
    return e


# ------------------------------------------------------------ models (values)


class Valuation(Mapping[str, int]):
    """A total assignment of integers to a finite set of variables.

    Hashable and ordered canonically by variable name, so it can be used
    inside sets of transitions.
    """

    __slots__ = ("_items", "_map", "_hash")

    def __init__(self, assignment: Mapping[str, int] | Iterable[tuple[str, int]] = ()):
        items = dict(assignment)
        self._items = tuple(sorted(items.items()))
        self._map = dict(self._items)
        self._hash = hash(self._items)

    def __getitem__(self, name: str) -> int:
        return self._map[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Valuation):
            return self._items == other._items
        if isinstance(other, Mapping):
            return self._map == dict(other.items())
        return NotImplemented

    def __lt__(self, other: "Valuation") -> bool:
        return self._items < other._items

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}: {v}" for k, v in self._items)
        return "{" + inner + "}"

    @property
    def items_tuple(self) -> tuple[tuple[str, int], ...]:
        return self._items

    def restrict(self, names: Iterable[str]) -> "Valuation":
        names = set(names)
        return Valuation((k, v) for k, v in self._items if k in names)

    def update(self, changes: Mapping[str, int]) -> "Valuation":
        merged = dict(self._map)
        merged.update(changes)
        return Valuation(merged)

    def to_json(self) -> dict[str, int]:
        return dict(self._items)


EMPTY_VALUATION = Valuation()


@dataclass(frozen=True)
class GuardSignature:
    """A finite set of variable names."""

    vars: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "vars", frozenset(self.vars))
        for v in self.vars:
            if not isinstance(v, str) or not v:
                raise WellFormednessError(f"invalid variable name {v!r}")

    def __contains__(self, name: object) -> bool:
        return name in self.vars

    def __iter__(self):
        return iter(sorted(self.vars))

    def __len__(self) -> int:
        return len(self.vars)


@dataclass(frozen=True)
class ValueDomain:
    """Inclusive integer range ``(lo, hi)`` for each variable."""

    ranges: FrozenMap[str, tuple[int, int]]

    def __post_init__(self):
        ranges = FrozenMap({k: (int(lo), int(hi)) for k, (lo, hi) in dict(self.ranges).items()})
        for name, (lo, hi) in ranges.items():
            if not name:
                raise WellFormednessError("empty variable name")
            if lo > hi:
                raise WellFormednessError(f"empty range for {name}: {lo}..{hi}")
        object.__setattr__(self, "ranges", ranges)

    @classmethod
    def of(cls, **ranges: tuple[int, int]) -> "ValueDomain":
        return cls(FrozenMap(ranges))

    @property
    def signature(self) -> GuardSignature:
        return GuardSignature(frozenset(self.ranges))

    @property
    def vars(self) -> frozenset[str]:
        return frozenset(self.ranges)

    def size(self) -> int:
        total = 1
        for lo, hi in self.ranges.values():
            total *= hi - lo + 1
        return total

    def contains(self, omega: Mapping[str, int]) -> bool:
        if set(omega) != set(self.ranges):
            return False
        return all(lo <= omega[k] <= hi for k, (lo, hi) in self.ranges.items())

    def in_range(self, name: str, value: int) -> bool:
        lo, hi = self.ranges[name]
        return lo <= value <= hi

    def valuations(self, cap: int | None = None) -> list[Valuation]:
        """All valuations in canonical (lexicographic) order."""
        cap = env_cap() if cap is None else cap
        if self.size() > cap:
            raise CapacityError(f"domain has {self.size()} valuations, cap is {cap}")
        names = sorted(self.ranges)
        axes = [range(self.ranges[n][0], self.ranges[n][1] + 1) for n in names]
        return [Valuation(zip(names, combo)) for combo in itertools.product(*axes)]

    def restrict(self, names: Iterable[str]) -> "ValueDomain":
        names = set(names)
        return ValueDomain(FrozenMap({k: r for k, r in self.ranges.items() if k in names}))

    def union(self, other: "ValueDomain") -> "ValueDomain":
        merged = dict(self.ranges)
        for k, r in other.ranges.items():
            if k in merged and merged[k] != r:
                raise WellFormednessError(f"variable {k} has ranges {merged[k]} and {r}")
            merged[k] = r
        return ValueDomain(FrozenMap(merged))

    def to_json(self):
        return {k: list(v) for k, v in sorted(self.ranges.items())}


EMPTY_DOMAIN = ValueDomain(FrozenMap())


@dataclass(frozen=True)
class GuardMorphism:
    """A total function between variable sets."""

    source: GuardSignature
    target: GuardSignature
    mapping: FrozenMap[str, str]

    def __post_init__(self):
        object.__setattr__(self, "mapping", FrozenMap(self.mapping))
        missing = self.source.vars - set(self.mapping)
        if missing:
            raise WellFormednessError(f"morphism undefined on {sorted(missing)}")
        extra = set(self.mapping) - self.source.vars
        if extra:
            raise WellFormednessError(f"morphism maps unknown variables {sorted(extra)}")
        outside = {v for v in self.mapping.values() if v not in self.target.vars}
        if outside:
            raise WellFormednessError(f"morphism targets unknown variables {sorted(outside)}")

    @classmethod
    def identity(cls, sig: GuardSignature) -> "GuardMorphism":
        return cls(sig, sig, FrozenMap({v: v for v in sig.vars}))

    def __call__(self, name: str) -> str:
        return self.mapping[name]

    def then(self, other: "GuardMorphism") -> "GuardMorphism":
        """Composition ``other ∘ self``."""
        return GuardMorphism(self.source, other.target,
                             FrozenMap({x: other(self(x)) for x in self.source.vars}))


def check_guard(g: GuardExpr, sig: GuardSignature | Iterable[str]) -> None:
    names = sig.vars if isinstance(sig, GuardSignature) else set(sig)
    unknown = free_vars(g) - set(names)
    if unknown:
        raise WellFormednessError(f"guard {g} mentions undeclared {sorted(unknown)}")


def translate_guard(v: GuardMorphism, g: GuardExpr) -> GuardExpr:
    check_guard(g, v.source)
    return substitute(g, v.mapping)


def guard_reduct(v: GuardMorphism, omega: Mapping[str, int]) -> Valuation:
    """The reduct ``omega ∘ v``."""
    return Valuation({x: omega[v(x)] for x in v.source.vars})


def guards_disjoint(g1: GuardExpr, g2: GuardExpr, dom: ValueDomain, cap: int | None = None) -> bool:
    """True iff no valuation of ``dom`` satisfies both guards."""
    return disjointness_witness(g1, g2, dom, cap) is None


def disjointness_witness(g1: GuardExpr, g2: GuardExpr, dom: ValueDomain,
                         cap: int | None = None) -> Valuation | None:
    for omega in dom.valuations(cap):
        if eval_guard(g1, omega) and eval_guard(g2, omega):
            return omega
    return None
