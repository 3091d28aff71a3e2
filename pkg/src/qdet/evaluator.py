"""Concrete execution: the sequential chart interpreter and the level-synchronous executor."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from . import expr as X
from .builder import DEFAULT_MAX_STEPS, LimitExceeded, Machine
from .flowchart import Flowchart
from .qterm import UNCONDITIONAL, QDeterminant, Undetermined, expression_list


class StepLimit(LimitExceeded):
    def __init__(self, limit: int):
        super().__init__('steps', limit)


def run_flowchart(fc: Flowchart, params: Mapping[str, int], inputs: Mapping[str, float],
                  iterations: int | None = None,
                  max_steps: int = DEFAULT_MAX_STEPS) -> dict:
    '''Run the chart once with concrete inputs.

    `inputs` is keyed by variable text such as "A(1,2)".  A run that ends
    with empout = 0 leaves every output Undetermined.
    '''
    def value(name, idx):
        text = X.var_text(name, idx)
        try:
            return float(inputs[text])
        except KeyError:
            raise X.UnboundVariable(text) from None

    m = Machine(fc, params, iterations, value, max_steps)

    def decide(block_id, cond):
        raise AssertionError('symbolic decision in a concrete run')
    try:
        emit, store = m.run_pass(decide)
    except LimitExceeded as exc:
        if exc.kind == 'steps':
            raise StepLimit(max_steps) from None
        raise
    outs = m.output_values(store)
    if not emit:
        return {k: Undetermined(['empout = 0']) for k in outs}
    return {k: float(v) for k, v in outs.items()}


@dataclass(frozen=True)
class Termination:
    output: str
    pair: int          # 0-based pair index
    level: int         # level after which the pair stopped
    reason: str        # 'guard-false', 'sibling-selected' or 'error'


@dataclass
class RunResult:
    outputs: dict
    executed_ops_per_level: list[int] = field(default_factory=list)
    schedule_sizes: list[int] = field(default_factory=list)
    terminated: list[Termination] = field(default_factory=list)


class _Failed:
    __slots__ = ('cause',)

    def __init__(self, cause):
        self.cause = cause


PENDING, FALSE, DEAD, TRUE, CANCELLED = range(5)


def run_q_effective(q: QDeterminant, inputs: Mapping[str, float],
                    doubling: bool = True) -> RunResult:
    """Execute every expression of q level by level, operations as soon as ready.

    A pair whose guard comes out false stops its value.  A pair whose
    guard is true and whose value is done stops the later pairs of the
    same output; the output is taken once all earlier pairs are known to
    be false or dead.  An evaluation error kills the pairs that depend on
    it.  Nodes shared between pairs run once, and only while some pair
    still needs them.
    """
    names = list(q.outputs)
    roots = expression_list(q)
    if doubling:
        roots = X.rebalance_many(roots)
    # components: (output, pair index, role) with role 'g' or 'v'
    comps = []
    it = iter(roots)
    for name in names:
        term = q.outputs[name]
        if term.kind == UNCONDITIONAL:
            comps.append((name, 0, 'v', next(it)))
        else:
            for j in range(len(term.pairs)):
                comps.append((name, j, 'g', next(it)))
                comps.append((name, j, 'v', next(it)))

    owners: dict[int, list[int]] = {}
    for c, (_, _, _, root) in enumerate(comps):
        for node in X.postorder([root]):
            if node.is_op:
                owners.setdefault(node.id, []).append(c)
    nodes = {n.id: n for n in X.postorder([c[3] for c in comps])}
    by_level: dict[int, list[X.Expr]] = {}
    for n in nodes.values():
        if n.is_op:
            by_level.setdefault(n.level, []).append(n)
    depth = max(by_level, default=0)
    sizes = [len(by_level.get(r, ())) for r in range(1, depth + 1)]

    vals: dict[int, object] = {}
    for n in nodes.values():
        if n.kind == 'const':
            vals[n.id] = float(n.value)
        elif n.kind == 'var':
            try:
                vals[n.id] = float(inputs[n.name])
            except KeyError:
                raise X.UnboundVariable(n.name) from None

    npairs = {name: (1 if q.outputs[name].kind == UNCONDITIONAL else len(q.outputs[name].pairs))
              for name in names}
    state = {name: [PENDING] * npairs[name] for name in names}
    causes = {name: [] for name in names}
    result: dict = {}
    log: list[Termination] = []
    comp_index = {(name, j, role): c for c, (name, j, role, _) in enumerate(comps)}

    def live(c):
        name, j, role, _ = comps[c]
        return name not in result and state[name][j] == PENDING

    def stop(name, j, status, level, reason):
        state[name][j] = status
        log.append(Termination(name, j, level, reason))

    def settle(level):
        for name in names:
            if name in result:
                continue
            unconditional = q.outputs[name].kind == UNCONDITIONAL
            st = state[name]
            for j in range(npairs[name]):
                if st[j] != PENDING:
                    continue
                g = None if unconditional else vals.get(comps[comp_index[(name, j, 'g')]][3].id)
                v = vals.get(comps[comp_index[(name, j, 'v')]][3].id)
                if isinstance(g, _Failed) or isinstance(v, _Failed):
                    bad = g if isinstance(g, _Failed) else v
                    causes[name].append(f'pair {j + 1}: {bad.cause}')
                    stop(name, j, DEAD, level, 'error')
                elif g is False:
                    stop(name, j, FALSE, level, 'guard-false')
            for j in range(npairs[name]):
                if st[j] != PENDING:
                    continue
                g = None if unconditional else vals.get(comps[comp_index[(name, j, 'g')]][3].id)
                v = vals.get(comps[comp_index[(name, j, 'v')]][3].id)
                if (unconditional or g is True) and v is not None:
                    st[j] = TRUE
                    for k in range(j + 1, npairs[name]):
                        if st[k] == PENDING:
                            stop(name, k, CANCELLED, level, 'sibling-selected')
            for j in range(npairs[name]):
                if st[j] == TRUE:
                    result[name] = vals[comps[comp_index[(name, j, 'v')]][3].id]
                    break
                if st[j] == PENDING:
                    break
            else:
                result[name] = Undetermined(causes[name])

    settle(0)
    executed = []
    for r in range(1, depth + 1):
        count = 0
        for n in sorted(by_level.get(r, ()), key=lambda e: e.id):
            if not any(live(c) for c in owners[n.id]):
                continue
            args = [vals.get(a.id) for a in n.args]
            if any(a is None for a in args):
                # an operand was skipped because nobody needed it then
                continue
            failed = next((a for a in args if isinstance(a, _Failed)), None)
            if failed is not None:
                vals[n.id] = failed
                continue
            count += 1
            try:
                vals[n.id] = X.apply_operator(n.op, args)
            except X.ExprError as exc:
                vals[n.id] = _Failed(str(exc))
        executed.append(count)
        settle(r)
        if len(result) == len(names):
            break
    for name in names:
        if name not in result:
            result[name] = Undetermined(causes[name])
    return RunResult({name: result[name] for name in names}, executed, sizes, log)
