"""Level schedules, height and width of a Q-determinant, realizability."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

from . import expr as X
from .qterm import INFINITE, QDeterminant, classify, expression_set

DAG = 'dag'
TREE = 'tree'
EXACT = 'exact'
FLOOR = 'floor'

REALIZABLE = 'Realizable'
BY_TRUNCATION = 'RealizableByTruncation'
UNKNOWN = 'Unknown'

# Refuse to spell out tree-mode occurrences beyond this many instances.
MAX_TREE_INSTANCES = 2_000_000


@dataclass
class Schedule:
    '''Operation instances per nesting level; levels[r-1] holds level r.

    In dag mode an instance is a node id, in tree mode it is a pair
    (expression index, path), the path being the child positions taken
    from the root.
    '''
    levels: list[list]
    sharing: str = DAG
    nodes: dict = field(default_factory=dict, repr=False)

    @property
    def height(self) -> int:
        return len(self.levels)

    @property
    def width(self) -> int:
        return max((len(lv) for lv in self.levels), default=0)

    def sizes(self) -> list[int]:
        return [len(lv) for lv in self.levels]


@dataclass(frozen=True)
class Characteristics:
    D: int
    P: int
    params: tuple = ()
    iterations: int = 0
    sharing: str = DAG
    doubling: bool = True
    chain_count: str = EXACT

    @property
    def key(self):
        return (self.params, self.iterations)

    @property
    def flags(self):
        return (self.sharing, self.doubling, self.chain_count)

    def to_json(self) -> dict:
        return {'D': self.D, 'P': self.P, 'params': dict(self.params),
                'iterations': self.iterations, 'sharing': self.sharing,
                'doubling': self.doubling, 'chain_count': self.chain_count}

    @classmethod
    def from_json(cls, d: dict) -> 'Characteristics':
        return cls(int(d['D']), int(d['P']), tuple(sorted(d.get('params', {}).items())),
                   int(d.get('iterations', 0)), d.get('sharing', DAG),
                   bool(d.get('doubling', True)), d.get('chain_count', EXACT))


def prepare(W: Sequence[X.Expr], doubling: bool) -> list[X.Expr]:
    """The expression set as analysed: rebalanced when doubling is on."""
    W = list(W)
    if not doubling:
        return W
    out = []
    seen = set()
    for e in X.rebalance_many(W):
        if e.id not in seen:
            seen.add(e.id)
            out.append(e)
    return out


def make_schedule(W: Sequence[X.Expr], sharing: str = DAG) -> Schedule:
    W = list(W)
    if sharing == DAG:
        levels = defaultdict(list)
        nodes = {}
        for node in X.postorder(W):
            if node.is_op:
                levels[node.level].append(node.id)
                nodes[node.id] = node
        depth = max(levels, default=0)
        return Schedule([sorted(levels[r]) for r in range(1, depth + 1)], DAG, nodes)
    if sharing != TREE:
        raise ValueError(f'unknown sharing mode {sharing!r}')
    total = sum(X.count_ops_per_level(W, TREE))
    if total > MAX_TREE_INSTANCES:
        raise ValueError(f'tree schedule would hold {total} instances')
    levels = defaultdict(list)
    for k, root in enumerate(W):
        stack = [(root, ())]
        while stack:
            node, path = stack.pop()
            if not node.is_op:
                continue
            levels[node.level].append((k, path))
            for pos, child in enumerate(node.args):
                stack.append((child, path + (pos,)))
    depth = max(levels, default=0)
    return Schedule([sorted(levels[r]) for r in range(1, depth + 1)], TREE,
                    {k: e for k, e in enumerate(W)})


def height(W: Sequence[X.Expr]) -> int:
    return max((e.level for e in W), default=0)


def _chains(W):
    '''Maximal same-operator chains, found from their roots.

    Returns (root, operands, interior nodes) for every chain of length
    at least 3.  A node is a chain root when some expression or some
    parent with a different operator uses it.
    '''
    order = X.postorder(W)
    rooted = {e.id for e in W}
    for node in order:
        for child in node.args:
            if child.is_op and child.op is not node.op:
                rooted.add(child.id)
    found = []
    for node in order:
        if node.id not in rooted or node.kind != 'binary' or not node.op.ac:
            continue
        op, operands = X.flatten_chain(node)
        if len(operands) < 3:
            continue
        interior = []
        stack = list(node.args)
        while stack:
            n = stack.pop()
            if n.op is op:
                interior.append(n)
                stack.extend(n.args)
        found.append((node, operands, interior))
    return found


def level_counts(W: Sequence[X.Expr], sharing: str = DAG,
                 chain_count: str = EXACT) -> list[int]:
    W = list(W)
    counts = X.count_ops_per_level(W, sharing)
    if chain_count == EXACT:
        return counts
    if chain_count != FLOOR:
        raise ValueError(f'unknown chain count model {chain_count!r}')
    # Chains over operands of one common level are counted as
    # floor(m / 2^j) operations at relative depth j instead of the real tree.
    occ = X.occurrence_counts(W) if sharing == TREE else None
    removed = set()
    for root, operands, interior in _chains(W):
        base = operands[0].level
        if any(o.level != base for o in operands):
            continue
        mult = occ[root.id] if occ is not None else 1
        for n in [root] + interior:
            if sharing == TREE:
                counts[n.level - 1] -= mult
            elif n.id not in removed:
                removed.add(n.id)
                counts[n.level - 1] -= 1
        m, j = len(operands), 1
        while m >> j:
            counts[base + j - 1] += (m >> j) * mult
            j += 1
    return counts


def width(W: Sequence[X.Expr], sharing: str = DAG, chain_count: str = EXACT) -> int:
    return max(level_counts(W, sharing, chain_count), default=0)


def analyze(q: QDeterminant, sharing: str = DAG, doubling: bool = True,
            chain_count: str = EXACT) -> Characteristics:
    W = prepare(expression_set(q), doubling)
    return Characteristics(
        D=height(W), P=width(W, sharing, chain_count),
        params=tuple(sorted(q.params.items())), iterations=q.iterations,
        sharing=sharing, doubling=doubling, chain_count=chain_count)


@dataclass(frozen=True)
class Descriptor:
    """Structural facts about an algorithm whose terms are not materialized."""
    infinite_terms: bool
    truncated: bool


def realizability(q) -> str:
    if isinstance(q, Descriptor):
        if not q.infinite_terms:
            return REALIZABLE
        return BY_TRUNCATION if q.truncated else UNKNOWN
    part = classify(q)
    if not part.I:
        return REALIZABLE
    assert all(q.outputs[i].kind == INFINITE for i in part.I)
    return BY_TRUNCATION


# --- export ----------------------------------------------------------------

def _ref(node: X.Expr):
    if node.kind == 'var':
        return node.name
    if node.kind == 'const':
        f = float(node.value)
        return int(f) if f.is_integer() else f
    return f'#{node.id}'


def schedule_to_json(s: Schedule) -> dict:
    levels = []
    for lv in s.levels:
        items = []
        for inst in lv:
            if s.sharing == DAG:
                node = s.nodes[inst]
                items.append({'id': f'#{node.id}', 'op': node.op.name,
                              'operands': [_ref(a) for a in node.args]})
            else:
                k, path = inst
                node = s.nodes[k]
                for pos in path:
                    node = node.args[pos]
                here = f'{k}:' + ''.join(map(str, path))
                refs = []
                for pos, a in enumerate(node.args):
                    refs.append(f'{here}{pos}' if a.is_op else _ref(a))
                items.append({'id': here, 'op': node.op.name, 'operands': refs})
        levels.append(items)
    return {'sharing': s.sharing, 'height': s.height, 'width': s.width, 'levels': levels}


def export_schedule(s: Schedule, sink=None) -> str:
    text = json.dumps(schedule_to_json(s), separators=(',', ':')) + '\n'
    if sink is None:
        return text
    if hasattr(sink, 'write'):
        sink.write(text)
    else:
        with open(sink, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
    return text


def parse_schedule(text: str) -> dict:
    doc = json.loads(text)
    if not isinstance(doc, dict) or not isinstance(doc.get('levels'), list):
        raise ValueError('schedule document needs a "levels" array')
    return doc
