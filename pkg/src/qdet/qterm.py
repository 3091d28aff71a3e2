"""Q-terms, Q-determinants and the determinant file format."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping

from .expr import (BOOL, NUM, Expr, ExprError, ParseError as ExprParseError,
                   evaluate, free_vars, occurrence_counts, parse_expr, serialize_expr)

UNCONDITIONAL = 'unconditional'
CONDITIONAL = 'conditional'
INFINITE = 'infinite'


class DeterminantParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f'line {line}: {reason}')
        self.line = line
        self.reason = reason


class DeterminantTooLarge(ValueError):
    '''The file would spell out more expression nodes than allowed.'''

    def __init__(self, nodes: int, limit: int):
        super().__init__(f'writing this determinant needs {nodes} expression nodes '
                         f'(limit {limit}); the file format has no sharing')
        self.nodes = nodes
        self.limit = limit


class Undetermined:
    """The value of an output when no guard holds.

    `causes` lists the evaluation errors met on the way, if any.
    All Undetermined values compare equal.
    """

    __slots__ = ('causes',)

    def __init__(self, causes=()):
        self.causes = tuple(causes)

    def __eq__(self, other):
        return isinstance(other, Undetermined)

    def __hash__(self):
        return hash(Undetermined)

    def __repr__(self):
        if self.causes:
            return f'Undetermined({"; ".join(self.causes)})'
        return 'Undetermined'


@dataclass(frozen=True)
class GuardedPair:
    guard: Expr
    value: Expr

    def __post_init__(self):
        if self.guard.result_kind != BOOL:
            raise TypeError('guard must be a boolean expression')
        if self.value.result_kind != NUM:
            raise TypeError('value must be an arithmetic expression')


@dataclass(frozen=True)
class QTerm:
    kind: str
    expr: Expr | None = None
    pairs: tuple[GuardedPair, ...] = ()
    truncated_at: int = 0

    def __post_init__(self):
        if self.kind == UNCONDITIONAL:
            if self.expr is None or self.pairs:
                raise ValueError('unconditional term takes one expression')
            if self.expr.result_kind != NUM:
                raise TypeError('value must be an arithmetic expression')
        elif self.kind in (CONDITIONAL, INFINITE):
            if not self.pairs:
                raise ValueError('conditional term needs at least one pair')
            if self.kind == INFINITE and self.truncated_at < 1:
                raise ValueError('truncated term needs a positive bound')
        else:
            raise ValueError(f'unknown term kind {self.kind!r}')

    @classmethod
    def unconditional(cls, w: Expr) -> 'QTerm':
        return cls(UNCONDITIONAL, expr=w)

    @classmethod
    def conditional(cls, pairs) -> 'QTerm':
        return cls(CONDITIONAL, pairs=tuple(_pair(p) for p in pairs))

    @classmethod
    def truncated(cls, pairs, bound: int) -> 'QTerm':
        return cls(INFINITE, pairs=tuple(_pair(p) for p in pairs), truncated_at=bound)

    def expressions(self) -> list[Expr]:
        if self.kind == UNCONDITIONAL:
            return [self.expr]
        out = []
        for p in self.pairs:
            out.extend((p.guard, p.value))
        return out

    def __len__(self):
        return 1 if self.kind == UNCONDITIONAL else len(self.pairs)


def _pair(p) -> GuardedPair:
    return p if isinstance(p, GuardedPair) else GuardedPair(*p)


@dataclass(frozen=True)
class Partition:
    U: tuple[str, ...]
    C: tuple[str, ...]
    I: tuple[str, ...]


@dataclass
class QDeterminant:
    outputs: dict[str, QTerm]
    params: dict[str, int] = field(default_factory=dict)
    iterations: int = 0

    def __post_init__(self):
        for name in self.outputs:
            if not isinstance(name, str):
                raise TypeError('output names are strings')
        ins = self.input_vars()
        clash = ins & set(self.outputs)
        if clash:
            raise ValueError(f'outputs also used as inputs: {sorted(clash)}')

    def input_vars(self) -> set[str]:
        names: set[str] = set()
        for e in expression_set(self):
            names |= free_vars(e)
        return names

    @property
    def key(self) -> tuple:
        return (tuple(sorted(self.params.items())), self.iterations)


def classify(q: QDeterminant) -> Partition:
    groups = {UNCONDITIONAL: [], CONDITIONAL: [], INFINITE: []}
    for name, term in q.outputs.items():
        groups[term.kind].append(name)
    return Partition(tuple(groups[UNCONDITIONAL]), tuple(groups[CONDITIONAL]),
                     tuple(groups[INFINITE]))


def expression_list(q: QDeterminant) -> list[Expr]:
    """All expressions in output order, pairs in order, guard first."""
    out = []
    for term in q.outputs.values():
        out.extend(term.expressions())
    return out


def expression_set(q: QDeterminant) -> list[Expr]:
    seen = set()
    out = []
    for e in expression_list(q):
        if e.id not in seen:
            seen.add(e.id)
            out.append(e)
    return out


def term_value(term: QTerm, interp: Mapping[str, float]):
    if term.kind == UNCONDITIONAL:
        return evaluate(term.expr, interp)
    causes = []
    for j, pair in enumerate(term.pairs):
        try:
            ok = evaluate(pair.guard, interp)
        except ExprError as exc:
            causes.append(f'guard {j + 1}: {exc}')
            continue
        if ok:
            return evaluate(pair.value, interp)
    return Undetermined(causes)


def qdet_value(q: QDeterminant, interp: Mapping[str, float]) -> dict:
    """Per-output value: the first pair whose guard holds wins."""
    return {name: term_value(term, interp) for name, term in q.outputs.items()}


# --- file format -----------------------------------------------------------

_PARAM_RE = re.compile(r'#param\s+([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(-?\d+)\s*\Z')
_ITER_RE = re.compile(r'#iterations\s+(\d+)\s*\Z')


MAX_WRITTEN_NODES = 5_000_000


def written_size(q: QDeterminant) -> int:
    """Expression nodes the file form spells out, shared subtrees repeated."""
    return sum(occurrence_counts(expression_list(q)).values())


def serialize_qdet(q: QDeterminant, max_nodes: int | None = MAX_WRITTEN_NODES) -> str:
    if max_nodes is not None:
        size = written_size(q)
        if size > max_nodes:
            raise DeterminantTooLarge(size, max_nodes)
    lines = [f'#param {k}={v}' for k, v in q.params.items()]
    lines.append(f'#iterations {q.iterations}')
    for name, term in q.outputs.items():
        if term.kind == UNCONDITIONAL:
            lines.append(f'{name} =   ; {serialize_expr(term.expr)}')
            continue
        for p in term.pairs:
            lines.append(f'{name} = {serialize_expr(p.guard)} ; {serialize_expr(p.value)}')
    return '\n'.join(lines) + '\n'


def parse_qdet(text: str) -> QDeterminant:
    """Read a determinant file.

    Guarded terms in a file whose iteration bound is positive are read
    back as truncated infinite terms, all others as conditional ones.
    """
    params: dict[str, int] = {}
    iterations = 0
    plain: dict[str, Expr] = {}
    guarded: dict[str, list[GuardedPair]] = {}
    order: list[str] = []
    for lineno, raw in enumerate(text.split('\n'), 1):
        line = raw.rstrip('\r')
        if not line.strip():
            continue
        if line.startswith('#'):
            m = _PARAM_RE.match(line)
            if m:
                params[m.group(1)] = int(m.group(2))
                continue
            m = _ITER_RE.match(line)
            if m:
                iterations = int(m.group(1))
                continue
            raise DeterminantParseError(lineno, f'unknown header {line!r}')
        name, sep, rest = line.partition(' = ')
        if not sep:
            raise DeterminantParseError(lineno, 'missing " = "')
        name = name.strip()
        guard_text, sep, value_text = rest.partition(';')
        if not sep:
            raise DeterminantParseError(lineno, 'missing ";"')
        try:
            value = parse_expr(value_text)
            guard = parse_expr(guard_text) if guard_text.strip() else None
        except ExprParseError as exc:
            raise DeterminantParseError(lineno, str(exc)) from None
        if name not in plain and name not in guarded:
            order.append(name)
        if guard is None:
            if name in plain or name in guarded:
                raise DeterminantParseError(lineno, f'{name} has more than one term')
            plain[name] = value
        else:
            if name in plain:
                raise DeterminantParseError(lineno, f'{name} mixes term kinds')
            try:
                guarded.setdefault(name, []).append(GuardedPair(guard, value))
            except TypeError as exc:
                raise DeterminantParseError(lineno, str(exc)) from None
    outputs = {}
    for name in order:
        if name in plain:
            outputs[name] = QTerm.unconditional(plain[name])
        elif iterations > 0:
            outputs[name] = QTerm.truncated(guarded[name], iterations)
        else:
            outputs[name] = QTerm.conditional(guarded[name])
    try:
        return QDeterminant(outputs, params, iterations)
    except ValueError as exc:
        raise DeterminantParseError(0, str(exc)) from None


def single_pair(q: QDeterminant, index: int) -> QDeterminant:
    '''Restrict every guarded term of q to its pair number `index`.'''
    outs = {}
    for name, term in q.outputs.items():
        if term.kind == UNCONDITIONAL:
            outs[name] = term
        else:
            outs[name] = QTerm.conditional([term.pairs[index]])
    return QDeterminant(outs, dict(q.params), q.iterations)


def outputs_agree(a: Mapping, b: Mapping, rel: float = 1e-9) -> bool:
    '''Compare two output maps with a relative tolerance on numbers.'''
    if set(a) != set(b):
        return False
    for k in a:
        x, y = a[k], b[k]
        if isinstance(x, Undetermined) or isinstance(y, Undetermined):
            if not (isinstance(x, Undetermined) and isinstance(y, Undetermined)):
                return False
        elif isinstance(x, bool) or isinstance(y, bool):
            if x != y:
                return False
        elif not math.isclose(x, y, rel_tol=rel, abs_tol=1e-12):
            return False
    return True
