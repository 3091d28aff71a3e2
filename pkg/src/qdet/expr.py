"""Expression nodes over the fixed operation set, with hash-consing.

Every node is interned: building a structurally equal node twice returns
the same object, so node identity doubles as structural equality.  The
intern table holds weak references, so nodes vanish once nothing refers
to them.
"""

from __future__ import annotations

import itertools
import math
import re
from collections import defaultdict
from decimal import Decimal, InvalidOperation
from typing import Iterable, Mapping, Sequence
from weakref import WeakValueDictionary

NUM = 'num'
BOOL = 'bool'


class ExprError(Exception):
    pass


class UnboundVariable(ExprError):
    def __init__(self, name: str):
        super().__init__(f'unbound variable {name}')
        self.name = name


class DivisionByZero(ExprError):
    def __init__(self):
        super().__init__('division by zero')


class KindMismatch(ExprError, TypeError):
    pass


class NotBinary(ExprError, TypeError):
    pass


class ParseError(ExprError, ValueError):
    def __init__(self, position: int, reason: str):
        super().__init__(f'at {position}: {reason}')
        self.position = position
        self.reason = reason


class Operator:
    __slots__ = ('name', 'symbol', 'arity', 'ac', 'operand_kind', 'result_kind')

    def __init__(self, name, symbol, arity, ac, operand_kind, result_kind):
        self.name = name
        self.symbol = symbol
        self.arity = arity
        self.ac = ac
        self.operand_kind = operand_kind
        self.result_kind = result_kind

    def __repr__(self):
        return f'Operator({self.name})'


def _ops():
    table = [
        ('add', '+', 2, True, NUM, NUM),
        ('sub', '-', 2, False, NUM, NUM),
        ('mul', '*', 2, True, NUM, NUM),
        ('div', '/', 2, False, NUM, NUM),
        ('neg', '-', 1, False, NUM, NUM),
        ('abs', 'abs', 1, False, NUM, NUM),
        ('and', '&&', 2, True, BOOL, BOOL),
        ('or', '||', 2, True, BOOL, BOOL),
        ('not', '!', 1, False, BOOL, BOOL),
        ('eq', '==', 2, False, NUM, BOOL),
        ('ne', '!=', 2, False, NUM, BOOL),
        ('lt', '<', 2, False, NUM, BOOL),
        ('le', '<=', 2, False, NUM, BOOL),
        ('gt', '>', 2, False, NUM, BOOL),
        ('ge', '>=', 2, False, NUM, BOOL),
    ]
    return {row[0]: Operator(*row) for row in table}


OPERATORS: dict[str, Operator] = _ops()

# Symbol spellings accepted on input in addition to the names.
_ALIASES = {
    '+': 'add', '*': 'mul', '/': 'div', '&&': 'and', '||': 'or', '!': 'not',
    '==': 'eq', '=': 'eq', '!=': 'ne', '<': 'lt', '<=': 'le', '>': 'gt',
    '>=': 'ge', '·': 'mul', '∧': 'and', '∨': 'or', '¬': 'not', '≠': 'ne',
    '≤': 'le', '≥': 'ge',
}

# Logical complement of each comparison, valid for non-NaN operands.
COMPLEMENT = {'eq': 'ne', 'ne': 'eq', 'lt': 'ge', 'ge': 'lt', 'le': 'gt', 'gt': 'le'}


def operator(name: str, arity: int | None = None) -> Operator:
    """Look up an operator by name or symbol.

    A bare '-' is ambiguous, so `arity` decides between sub and neg.
    """
    if name == '-':
        if arity is None:
            raise KeyError('operator "-" needs an arity')
        return OPERATORS['neg' if arity == 1 else 'sub']
    op = OPERATORS.get(name) or OPERATORS.get(_ALIASES.get(name, ''))
    if op is None:
        raise KeyError(f'unknown operator {name!r}')
    return op


_NAME_RE = re.compile(r'[A-Za-z_][A-Za-z0-9_]*\Z')
_VAR_RE = re.compile(
    r'\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\(\s*(-?\d+(?:\s*,\s*-?\d+)*)\s*\))?\s*\Z')


def canonical_number(value) -> str:
    """Decimal text for a constant: integral values print without a point."""
    if isinstance(value, bool):
        raise KindMismatch('boolean used as a numeric constant')
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f'non-finite constant {value}')
        if value.is_integer():
            return str(int(value))
        return repr(value)
    try:
        d = Decimal(str(value).strip())
    except InvalidOperation:
        raise ValueError(f'not a number: {value!r}') from None
    if not d.is_finite():
        raise ValueError(f'non-finite constant {value}')
    if d == d.to_integral_value():
        return str(int(d))
    return format(d.normalize(), 'f')


def var_text(name: str, index: Sequence[int] = ()) -> str:
    if not index:
        return name
    return f'{name}({",".join(str(i) for i in index)})'


def split_var_text(text: str) -> tuple[str, tuple[int, ...]]:
    m = _VAR_RE.match(text)
    if m is None:
        raise ValueError(f'bad variable name {text!r}')
    index = tuple(int(s) for s in m.group(2).split(',')) if m.group(2) else ()
    return m.group(1), index


class Expr:
    '''An interned expression node.

    kind is one of 'const', 'var', 'unary', 'binary'.  For constants
    `value` is the canonical decimal text, for variables it is the
    (name, index) pair.  Use the module level constructors rather than
    calling this class directly.
    '''

    __slots__ = ('id', 'kind', 'op', 'args', 'value', 'level', 'result_kind',
                 '_text', '__weakref__')

    _interned: WeakValueDictionary = WeakValueDictionary()
    _ids = itertools.count()

    def __new__(cls, kind, op, args, value):
        key = (kind, op.name if op else None, tuple(a.id for a in args), value)
        node = cls._interned.get(key)
        if node is not None:
            return node
        node = super().__new__(cls)
        node.id = next(cls._ids)
        node.kind = kind
        node.op = op
        node.args = tuple(args)
        node.value = value
        node.level = max((a.level for a in args), default=-1) + 1
        node.result_kind = op.result_kind if op else NUM
        node._text = None
        cls._interned[key] = node
        return node

    # Identity is structural identity, so the default eq/hash are right.

    @property
    def is_leaf(self) -> bool:
        return self.kind in ('const', 'var')

    @property
    def is_op(self) -> bool:
        return self.op is not None

    @property
    def name(self) -> str:
        '''Text form of a variable leaf, e.g. "A(1,2)".'''
        if self.kind != 'var':
            raise TypeError('not a variable')
        if self._text is None:
            self._text = var_text(*self.value)
        return self._text

    def __repr__(self):
        return f'Expr#{self.id}<{to_infix(self, limit=80)}>'

    # Operator sugar for building expressions in code and tests.
    def __add__(self, other): return binary('add', self, other)
    def __radd__(self, other): return binary('add', other, self)
    def __sub__(self, other): return binary('sub', self, other)
    def __rsub__(self, other): return binary('sub', other, self)
    def __mul__(self, other): return binary('mul', self, other)
    def __rmul__(self, other): return binary('mul', other, self)
    def __truediv__(self, other): return binary('div', self, other)
    def __rtruediv__(self, other): return binary('div', other, self)
    def __neg__(self): return unary('neg', self)
    def __abs__(self): return unary('abs', self)
    def __and__(self, other): return binary('and', self, other)
    def __or__(self, other): return binary('or', self, other)
    def __invert__(self): return unary('not', self)


def const(value) -> Expr:
    return Expr('const', None, (), canonical_number(value))


def var(name: str, *index: int) -> Expr:
    if _NAME_RE.match(name) is None:
        raise ValueError(f'bad identifier {name!r}')
    return Expr('var', None, (), (name, tuple(int(i) for i in index)))


def var_from_text(text: str) -> Expr:
    name, index = split_var_text(text)
    return var(name, *index)


def lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return var_from_text(x)
    return const(x)


def unary(op, child) -> Expr:
    if not isinstance(op, Operator):
        op = operator(op, 1)
    if op.arity != 1:
        raise KindMismatch(f'{op.name} is not unary')
    child = lift(child)
    if child.result_kind != op.operand_kind:
        raise KindMismatch(f'{op.name} expects a {op.operand_kind} operand')
    return Expr('unary', op, (child,), None)


def binary(op, left, right) -> Expr:
    if not isinstance(op, Operator):
        op = operator(op, 2)
    if op.arity != 2:
        raise KindMismatch(f'{op.name} is not binary')
    left, right = lift(left), lift(right)
    if left.result_kind != op.operand_kind or right.result_kind != op.operand_kind:
        raise KindMismatch(f'{op.name} expects {op.operand_kind} operands')
    return Expr('binary', op, (left, right), None)


def negate_condition(e: Expr) -> Expr:
    """Logical negation; comparisons flip to their complement operator."""
    if e.op is not None and e.op.name in COMPLEMENT:
        return binary(COMPLEMENT[e.op.name], *e.args)
    return unary('not', e)


def conjunction(conds: Sequence[Expr]) -> Expr:
    '''Left-nested chain c1 ∧ c2 ∧ ... (raw form, before rebalancing).'''
    if not conds:
        raise ValueError('empty conjunction')
    acc = conds[0]
    for c in conds[1:]:
        acc = binary('and', acc, c)
    return acc


def chain(op, operands: Sequence) -> Expr:
    '''Left-nested chain of one binary operator over `operands`.'''
    operands = [lift(x) for x in operands]
    if not operands:
        raise ValueError('empty chain')
    acc = operands[0]
    for x in operands[1:]:
        acc = binary(op, acc, x)
    return acc


def nesting_level(e: Expr) -> int:
    return e.level


def postorder(roots: Iterable[Expr]) -> list[Expr]:
    """Distinct nodes reachable from roots, children before parents."""
    seen = set()
    order = []
    for root in roots:
        if root.id in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node.id in seen:
                continue
            seen.add(node.id)
            stack.append((node, True))
            for child in reversed(node.args):
                if child.id not in seen:
                    stack.append((child, False))
    return order


def free_vars(e: Expr) -> set[str]:
    return {n.name for n in postorder([e]) if n.kind == 'var'}


def _apply(op: Operator, vals):
    name = op.name
    if name == 'add':
        return vals[0] + vals[1]
    if name == 'sub':
        return vals[0] - vals[1]
    if name == 'mul':
        return vals[0] * vals[1]
    if name == 'div':
        if vals[1] == 0:
            raise DivisionByZero()
        return vals[0] / vals[1]
    if name == 'neg':
        return -vals[0]
    if name == 'abs':
        return abs(vals[0])
    if name == 'and':
        return vals[0] and vals[1]
    if name == 'or':
        return vals[0] or vals[1]
    if name == 'not':
        return not vals[0]
    if name == 'eq':
        return vals[0] == vals[1]
    if name == 'ne':
        return vals[0] != vals[1]
    if name == 'lt':
        return vals[0] < vals[1]
    if name == 'le':
        return vals[0] <= vals[1]
    if name == 'gt':
        return vals[0] > vals[1]
    if name == 'ge':
        return vals[0] >= vals[1]
    raise AssertionError(name)


def apply_operator(op: Operator, vals):
    """Apply `op` to already computed operand values."""
    return _apply(op, vals)


def evaluate_many(roots: Sequence[Expr], interp: Mapping[str, float]) -> list:
    memo: dict[int, object] = {}
    for node in postorder(roots):
        if node.kind == 'const':
            memo[node.id] = float(node.value)
        elif node.kind == 'var':
            try:
                memo[node.id] = float(interp[node.name])
            except KeyError:
                raise UnboundVariable(node.name) from None
        else:
            memo[node.id] = _apply(node.op, [memo[a.id] for a in node.args])
    return [memo[r.id] for r in roots]


def evaluate(e: Expr, interp: Mapping[str, float]):
    """Value of `e` under an interpretation keyed by variable text."""
    return evaluate_many([e], interp)[0]


def flatten_chain(e: Expr) -> tuple[Operator, list[Expr]]:
    if e.kind != 'binary':
        raise NotBinary(f'{e!r} is not a binary node')
    if not e.op.ac:
        return e.op, list(e.args)
    out = []
    stack = [e]
    while stack:
        node = stack.pop()
        if node.op is e.op:
            stack.append(node.args[1])
            stack.append(node.args[0])
        else:
            out.append(node)
    return e.op, out


def _asap_pair(op: Operator, operands: list[Expr]) -> Expr:
    # Items are (ready time, sequence, node); ready time is the node's level.
    seq = itertools.count()
    pending = sorted(((x.level, next(seq), x) for x in operands),
                     key=lambda it: (it[0], it[1]))
    pending.reverse()  # pop() from the end yields the earliest item
    ready = []
    t = pending[-1][0]
    while True:
        while pending and pending[-1][0] <= t:
            ready.append(pending.pop())
        if not pending and len(ready) == 1:
            return ready[0][2]
        if len(ready) < 2:
            t = pending[-1][0]
            continue
        ready.sort(key=lambda it: (it[0], it[1]))
        made = []
        for i in range(0, len(ready) - 1, 2):
            node = binary(op, ready[i][2], ready[i + 1][2])
            made.append((node.level, next(seq), node))
        ready = ready[-1:] if len(ready) % 2 else []
        ready.extend(made)
        t += 1


def rebalance_doubling(e: Expr) -> Expr:
    """Replace every maximal associative chain by an ASAP pairing tree."""
    return rebalance_many([e])[0]


def rebalance_many(roots: Sequence[Expr], memo: dict | None = None) -> list[Expr]:
    memo = {} if memo is None else memo
    # Keep the source nodes alive while the memo refers to their ids.
    keep = []

    def parts(node):
        if node.kind == 'binary' and node.op.ac:
            return flatten_chain(node)[1]
        return list(node.args)

    for root in roots:
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if node.id in memo:
                continue
            if node.is_leaf:
                memo[node.id] = node
                continue
            kids = parts(node)
            if not expanded:
                stack.append((node, True))
                stack.extend((k, False) for k in kids if k.id not in memo)
                continue
            new = [memo[k.id] for k in kids]
            keep.append(node)
            if node.kind == 'unary':
                memo[node.id] = unary(node.op, new[0])
            elif node.op.ac:
                memo[node.id] = _asap_pair(node.op, new)
            else:
                memo[node.id] = binary(node.op, new[0], new[1])
    return [memo[r.id] for r in roots]


def occurrence_counts(roots: Sequence[Expr]) -> dict[int, int]:
    '''Number of occurrences of every node in the trees spelled by roots.

    Each root contributes independently; shared subtrees are multiplied
    out without materializing the trees.
    '''
    order = postorder(roots)
    occ: dict[int, int] = defaultdict(int)
    for r in roots:
        occ[r.id] += 1
    for node in reversed(order):
        n = occ[node.id]
        if n:
            for child in node.args:
                occ[child.id] += n
    return occ


def count_ops_per_level(es: Sequence[Expr], sharing: str = 'dag') -> list[int]:
    """Operation count O_r for r = 1..max level (index r-1)."""
    es = list(es)
    order = postorder(es)
    depth = max((n.level for n in order), default=0)
    counts = [0] * depth
    if sharing == 'dag':
        for n in order:
            if n.is_op:
                counts[n.level - 1] += 1
    elif sharing == 'tree':
        occ = occurrence_counts(es)
        for n in order:
            if n.is_op:
                counts[n.level - 1] += occ[n.id]
    else:
        raise ValueError(f'unknown sharing mode {sharing!r}')
    return counts


# --- text form -------------------------------------------------------------

def _leaf_json(node: Expr) -> str:
    if node.kind == 'var':
        return '"' + node.name + '"'
    return node.value


def serialize_expr(e: Expr) -> str:
    """Compact JSON text; written iteratively so deep chains are fine."""
    out = []
    stack: list = [e]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
        elif item.is_leaf:
            out.append(_leaf_json(item))
        elif item.kind == 'unary':
            out.append('{"op":"%s","od":' % item.op.name)
            stack.extend(['}', item.args[0]])
        else:
            out.append('{"op":"%s","fO":' % item.op.name)
            stack.extend(['}', item.args[1], ',"sO":', item.args[0]])
    return ''.join(out)


_NUMBER_RE = re.compile(r'-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][+-]?\d+)?')
_WS = ' \t\r\n'


class _Reader:
    """A small JSON reader for the expression subset.

    The stdlib decoder recurses once per nesting level, which is not
    enough for long left-nested chains, so this one keeps its own stack.
    """

    def __init__(self, text: str, offset: int = 0):
        self.text = text
        self.offset = offset
        self.pos = 0

    def fail(self, reason):
        raise ParseError(self.pos + self.offset, reason)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos] in _WS:
            self.pos += 1

    def peek(self):
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ''

    def expect(self, ch):
        if self.peek() != ch:
            self.fail(f'expected {ch!r}')
        self.pos += 1

    def string(self):
        self.expect('"')
        end = self.text.find('"', self.pos)
        if end < 0:
            self.fail('unterminated string')
        s = self.text[self.pos:end]
        if '\\' in s:
            self.fail('escapes are not supported')
        self.pos = end + 1
        return s

    def number(self):
        self.skip()
        m = _NUMBER_RE.match(self.text, self.pos)
        if m is None:
            self.fail('expected a value')
        self.pos = m.end()
        return m.group(0)

    def leaf(self):
        ch = self.peek()
        if ch == '"':
            start = self.pos
            text = self.string()
            try:
                return var_from_text(text)
            except ValueError as exc:
                self.pos = start
                self.fail(str(exc))
        return const(self.number())

    def expr(self) -> Expr:
        frames: list[dict] = []
        while True:
            if self.peek() == '{':
                self.pos += 1
                frames.append({})
                value = self._field(frames)
                if value is None:
                    continue
            else:
                value = self.leaf()
            # hand the finished value to enclosing objects, closing them
            while True:
                if not frames:
                    return value
                frame = frames[-1]
                frame[frame.pop('__key')] = value
                if self.peek() == ',':
                    self.pos += 1
                    value = self._field(frames)
                    if value is None:
                        break
                    continue
                self.expect('}')
                frames.pop()
                value = self._build(frame)

    def _field(self, frames):
        """Read `"key":` entries; stop before an operand value."""
        frame = frames[-1]
        while True:
            key = self.string()
            self.expect(':')
            if key == 'op':
                if 'op' in frame:
                    self.fail('duplicate key "op"')
                frame['op'] = self.string()
                if self.peek() == ',':
                    self.pos += 1
                    continue
                self.expect('}')
                frames.pop()
                return self._build(frame)
            if key not in ('fO', 'sO', 'od'):
                self.fail(f'unexpected key {key!r}')
            if key in frame:
                self.fail(f'duplicate key {key!r}')
            frame['__key'] = key
            return None

    def _build(self, frame) -> Expr:
        name = frame.get('op')
        if name is None:
            self.fail('missing "op"')
        try:
            if 'od' in frame:
                if 'fO' in frame or 'sO' in frame:
                    self.fail('mixed unary and binary operand keys')
                return unary(operator(name, 1), frame['od'])
            if 'fO' not in frame or 'sO' not in frame:
                self.fail(f'operation {name!r} is missing operands')
            return binary(operator(name, 2), frame['fO'], frame['sO'])
        except KeyError as exc:
            self.fail(str(exc.args[0]))
        except KindMismatch as exc:
            self.fail(str(exc))


def parse_expr(text: str, offset: int = 0) -> Expr:
    reader = _Reader(text, offset)
    e = reader.expr()
    if reader.peek():
        reader.fail('trailing characters')
    return e


_INFIX_PREC = {'or': 1, 'and': 2, 'eq': 3, 'ne': 3, 'lt': 3, 'le': 3, 'gt': 3,
               'ge': 3, 'add': 4, 'sub': 4, 'mul': 5, 'div': 5}


def to_infix(e: Expr, limit: int | None = None) -> str:
    """Human readable rendering, for messages and debugging."""
    parts: dict[int, tuple[str, int]] = {}
    for node in postorder([e]):
        if node.kind == 'const':
            parts[node.id] = (node.value, 9)
        elif node.kind == 'var':
            parts[node.id] = (node.name, 9)
        elif node.kind == 'unary':
            inner = parts[node.args[0].id][0]
            if node.op.name == 'abs':
                parts[node.id] = (f'|{inner}|', 9)
            else:
                sym = '-' if node.op.name == 'neg' else '!'
                parts[node.id] = (f'{sym}({inner})', 9)
        else:
            p = _INFIX_PREC[node.op.name]
            (ls, lp), (rs, rp) = parts[node.args[0].id], parts[node.args[1].id]
            if lp < p:
                ls = f'({ls})'
            if rp <= p:
                rs = f'({rs})'
            parts[node.id] = (f'{ls} {node.op.symbol} {rs}', p)
        if limit is not None and len(parts[node.id][0]) > 4 * limit:
            parts[node.id] = ('…', 9)
    text = parts[e.id][0]
    if limit is not None and len(text) > limit:
        text = text[:limit - 1] + '…'
    return text
