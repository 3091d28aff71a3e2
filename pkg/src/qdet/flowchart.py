"""Flowcharts in block/edge form, their statements and structural checks.

Block types: 0 Start, 1 End, 2 process, 3 decision, 4 input data,
5 output data.  Edge types: 0 false exit, 1 true exit, 2 plain.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field

START, END, PROCESS, DECISION, INPUT, OUTPUT = range(6)
FALSE, TRUE, NORMAL = range(3)

BLOCK_NAMES = {START: 'Start', END: 'End', PROCESS: 'process',
               DECISION: 'decision', INPUT: 'input', OUTPUT: 'output'}


class FlowchartError(ValueError):
    pass


class ParseError(FlowchartError):
    pass


class UnknownBlockType(FlowchartError):
    pass


class DanglingEdge(FlowchartError):
    pass


class StatementSyntaxError(FlowchartError):
    def __init__(self, text: str, position: int, reason: str):
        super().__init__(f'{reason} at {position} in {text!r}')
        self.text = text
        self.position = position
        self.reason = reason


# --- statement syntax ------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: int | float


@dataclass(frozen=True)
class Ref:
    name: str
    index: tuple = ()


@dataclass(frozen=True)
class Op:
    op: str          # operator name as in expr.OPERATORS
    args: tuple


@dataclass(frozen=True)
class Assignment:
    target: Ref
    rhs: object


@dataclass(frozen=True)
class Condition:
    op: str
    lhs: object
    rhs: object


@dataclass(frozen=True)
class Declaration:
    params: tuple[str, ...]
    vars: tuple[Ref, ...]     # index positions hold dimension expressions


_TOKEN_RE = re.compile(r'''
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|<>|&&|\|\||[-+*/<>=!(),\[\]])
''', re.VERBOSE)

_CMP = {'<': 'lt', '<=': 'le', '>': 'gt', '>=': 'ge', '==': 'eq', '=': 'eq',
        '!=': 'ne', '<>': 'ne'}


def _tokens(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise StatementSyntaxError(text, pos, f'unexpected character {text[pos]!r}')
        if m.lastgroup != 'ws':
            out.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    out.append(('end', '', len(text)))
    return out


class _Parser:
    def __init__(self, text, cond_equals=False):
        self.text = text
        self.toks = _tokens(text)
        self.i = 0
        # In a condition a single '=' means equality.
        self.cond_equals = cond_equals

    def fail(self, reason):
        raise StatementSyntaxError(self.text, self.toks[self.i][2], reason)

    def peek(self):
        return self.toks[self.i][1] if self.toks[self.i][0] != 'end' else ''

    def take(self, value=None):
        kind, text, _ = self.toks[self.i]
        if value is not None and text != value:
            self.fail(f'expected {value!r}')
        if kind == 'end':
            self.fail('unexpected end of statement')
        self.i += 1
        return kind, text

    def at_end(self):
        return self.toks[self.i][0] == 'end'

    def expr(self):
        return self.or_()

    def or_(self):
        node = self.and_()
        while self.peek() == '||':
            self.take()
            node = Op('or', (node, self.and_()))
        return node

    def and_(self):
        node = self.cmp()
        while self.peek() == '&&':
            self.take()
            node = Op('and', (node, self.cmp()))
        return node

    def cmp(self):
        node = self.sum()
        tok = self.peek()
        if tok in _CMP and (tok != '=' or self.cond_equals):
            self.take()
            node = Op(_CMP[tok], (node, self.sum()))
        return node

    def sum(self):
        node = self.product()
        while self.peek() in ('+', '-'):
            _, t = self.take()
            node = Op('add' if t == '+' else 'sub', (node, self.product()))
        return node

    def product(self):
        node = self.unary()
        while self.peek() in ('*', '/'):
            _, t = self.take()
            node = Op('mul' if t == '*' else 'div', (node, self.unary()))
        return node

    def unary(self):
        tok = self.peek()
        if tok == '-':
            self.take()
            inner = self.unary()
            if isinstance(inner, Num):
                return Num(-inner.value)
            return Op('neg', (inner,))
        if tok == '+':
            self.take()
            return self.unary()
        if tok == '!':
            self.take()
            return Op('not', (self.unary(),))
        return self.primary()

    def primary(self):
        kind, text, _ = self.toks[self.i]
        if kind == 'num':
            self.take()
            value = float(text)
            return Num(int(value) if value.is_integer() and re.fullmatch(r'\d+', text) else value)
        if text == '(':
            self.take()
            node = self.expr()
            self.take(')')
            return node
        if kind == 'name':
            self.take()
            if text == 'abs' and self.peek() == '(':
                self.take('(')
                inner = self.expr()
                self.take(')')
                return Op('abs', (inner,))
            return Ref(text, self.index())
        self.fail('expected an operand')

    def index(self):
        if self.peek() != '(':
            return ()
        self.take('(')
        items = [self.sum()]
        while self.peek() == ',':
            self.take()
            items.append(self.sum())
        self.take(')')
        return tuple(items)


def parse_assignment(text: str) -> Assignment:
    p = _Parser(text)
    kind, name = p.take()
    if kind != 'name':
        p.i -= 1
        p.fail('assignment must start with a variable')
    target = Ref(name, p.index())
    p.take('=')
    rhs = p.expr()
    if not p.at_end():
        p.fail('unexpected trailing text')
    return Assignment(target, rhs)


def parse_condition(text: str) -> Condition:
    p = _Parser(text, cond_equals=True)
    node = p.expr()
    if not p.at_end():
        p.fail('unexpected trailing text')
    if not isinstance(node, Op) or node.op not in _CMP.values():
        raise StatementSyntaxError(text, 0, 'condition must be a comparison')
    return Condition(node.op, node.args[0], node.args[1])


def parse_declaration(text: str) -> Declaration:
    '''Parse "[n, m], A(n, m+1), e" style declarations.

    Square brackets hold dimension parameters; other items are variables
    whose parenthesized parts give the extent of each index (from 1).
    '''
    p = _Parser(text)
    params = []
    items = []
    if p.at_end():
        return Declaration((), ())
    while True:
        if p.peek() == '[':
            p.take()
            while True:
                kind, name = p.take()
                if kind != 'name':
                    p.i -= 1
                    p.fail('expected a parameter name')
                params.append(name)
                if p.peek() == ',':
                    p.take()
                    continue
                break
            p.take(']')
        else:
            kind, name = p.take()
            if kind != 'name':
                p.i -= 1
                p.fail('expected a variable name')
            items.append(Ref(name, p.index()))
        if p.at_end():
            break
        p.take(',')
    return Declaration(tuple(params), tuple(items))


def count_ops(node) -> int:
    """Operations in a statement tree, not counting index arithmetic."""
    if isinstance(node, Op):
        return 1 + sum(count_ops(a) for a in node.args)
    return 0


def is_atom(node) -> bool:
    return isinstance(node, (Num, Ref))


def refs(node):
    '''Every variable reference in a tree, index expressions included.'''
    if isinstance(node, Ref):
        yield node
        for i in node.index:
            yield from refs(i)
    elif isinstance(node, Op):
        for a in node.args:
            yield from refs(a)


# --- the chart -------------------------------------------------------------

@dataclass
class Block:
    id: int
    type: int
    content: str
    stmt: object = None


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    type: int


@dataclass
class Flowchart:
    blocks: dict[int, Block]
    edges: list[Edge]
    succ: dict[int, list[Edge]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.succ = {b: [] for b in self.blocks}
        for e in self.edges:
            self.succ[e.src].append(e)

    def of_type(self, t: int) -> list[Block]:
        return [b for b in self.blocks.values() if b.type == t]

    def start(self) -> Block:
        starts = self.of_type(START)
        if len(starts) != 1:
            raise FlowchartError('chart needs exactly one Start block')
        return starts[0]

    def next(self, block_id: int, edge_type: int = NORMAL) -> int:
        for e in self.succ[block_id]:
            if e.type == edge_type:
                return e.dst
        raise FlowchartError(f'block {block_id} has no exit of type {edge_type}')

    def declarations(self):
        '''(params, inputs, outputs) collected over all data blocks.'''
        params, inputs, outputs = [], [], []
        for b in sorted(self.blocks.values(), key=lambda b: b.id):
            if b.type == INPUT:
                params.extend(b.stmt.params)
                inputs.extend(b.stmt.vars)
            elif b.type == OUTPUT:
                params.extend(b.stmt.params)
                outputs.extend(b.stmt.vars)
        return list(dict.fromkeys(params)), inputs, outputs

    @property
    def has_iterations(self) -> bool:
        return any(r.name == 'iterations' and not r.index for r in self.declarations()[1])


def _parse_statement(block_type, text):
    if block_type == PROCESS:
        return parse_assignment(text)
    if block_type == DECISION:
        return parse_condition(text)
    if block_type in (INPUT, OUTPUT):
        return parse_declaration(text)
    return None


def _int_field(obj, key, where):
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, str) and re.fullmatch(r'-?\d+', value.strip()):
            return int(value)
        raise ParseError(f'{where}: "{key}" must be an integer')
    return value


def parse_flowchart(text: str) -> Flowchart:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f'invalid JSON: {exc}') from None
    if not isinstance(doc, dict) or not isinstance(doc.get('Vertices'), list) \
            or not isinstance(doc.get('Edges'), list):
        raise ParseError('expected an object with "Vertices" and "Edges" arrays')
    blocks = {}
    for v in doc['Vertices']:
        if not isinstance(v, dict):
            raise ParseError('vertex entries must be objects')
        bid = _int_field(v, 'Id', 'vertex')
        btype = _int_field(v, 'Type', f'vertex {bid}')
        if btype not in BLOCK_NAMES:
            raise UnknownBlockType(f'vertex {bid}: unknown block type {btype}')
        if bid in blocks:
            raise ParseError(f'duplicate vertex id {bid}')
        content = v.get('Content', '')
        if not isinstance(content, str):
            raise ParseError(f'vertex {bid}: "Content" must be a string')
        blocks[bid] = Block(bid, btype, content, _parse_statement(btype, content))
    edges = []
    for e in doc['Edges']:
        if not isinstance(e, dict):
            raise ParseError('edge entries must be objects')
        src = _int_field(e, 'From', 'edge')
        dst = _int_field(e, 'To', 'edge')
        etype = _int_field(e, 'Type', 'edge')
        if etype not in (FALSE, TRUE, NORMAL):
            raise ParseError(f'edge {src}->{dst}: unknown edge type {etype}')
        if src not in blocks or dst not in blocks:
            raise DanglingEdge(f'edge {src}->{dst} refers to a missing block')
        edges.append(Edge(src, dst, etype))
    return Flowchart(blocks, edges)


def flowchart_to_json(fc: Flowchart) -> dict:
    return {
        'Vertices': [{'Id': b.id, 'Type': b.type, 'Content': b.content}
                     for b in fc.blocks.values()],
        'Edges': [{'From': e.src, 'To': e.dst, 'Type': e.type} for e in fc.edges],
    }


def serialize_flowchart(fc: Flowchart) -> str:
    return json.dumps(flowchart_to_json(fc), indent=1, ensure_ascii=False) + '\n'


def validate(fc: Flowchart) -> list[str]:
    """Structural violations of the chart; empty when it is well formed."""
    out = []
    starts, ends = fc.of_type(START), fc.of_type(END)
    if len(starts) != 1:
        out.append(f'expected one Start block, found {len(starts)}')
    if len(ends) != 1:
        out.append(f'expected one End block, found {len(ends)}')
    indeg = {b: 0 for b in fc.blocks}
    for e in fc.edges:
        indeg[e.dst] += 1
    for b in sorted(fc.blocks.values(), key=lambda b: b.id):
        exits = [e.type for e in fc.succ[b.id]]
        where = f'block {b.id}'
        if b.type == START:
            if len(exits) != 1:
                out.append(f'{where}: Start must have one outgoing edge')
            if indeg[b.id]:
                out.append(f'{where}: Start must have no incoming edges')
        elif b.type == END:
            if exits:
                out.append(f'{where}: End must have no outgoing edges')
            if not indeg[b.id]:
                out.append(f'{where}: End must have an incoming edge')
        elif b.type == DECISION:
            if sorted(exits) != [FALSE, TRUE]:
                out.append(f'{where}: decision branch arity (needs one false and one true exit)')
            cond = b.stmt
            if count_ops(cond.lhs) or count_ops(cond.rhs):
                out.append(f'{where}: decision operands must not contain operations')
        else:
            if exits != [NORMAL]:
                out.append(f'{where}: needs exactly one normal outgoing edge')
            if b.type == PROCESS:
                rhs = b.stmt.rhs
                if count_ops(rhs) > 1:
                    out.append(f'{where}: more than one operation in {b.content!r}')
                elif isinstance(rhs, Op) and not all(is_atom(a) for a in rhs.args):
                    out.append(f'{where}: operands must be numbers or variables')
    if len(starts) == 1:
        seen = {starts[0].id}
        queue = deque(seen)
        while queue:
            for e in fc.succ[queue.popleft()]:
                if e.dst not in seen:
                    seen.add(e.dst)
                    queue.append(e.dst)
        for bid in sorted(set(fc.blocks) - seen):
            out.append(f'block {bid}: unreachable from Start')
    return out
