"""Symbolic interpretation of flowcharts into Q-determinants.

The chart is walked from Start to End once per branch.  Anything that
depends on input data is kept as an expression; decisions on such data
are branch points, and every combination of their exits is explored by
the trace rewriting in `next_branch`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Mapping

from . import expr as X
from .flowchart import (DECISION, END, INPUT, OUTPUT, PROCESS, Flowchart, Num,
                        Op, Ref, validate)
from .qterm import QDeterminant, QTerm

log = logging.getLogger(__name__)

FULL = 'full'
LAST = 'last'

DEFAULT_MAX_STEPS = 10 ** 6
DEFAULT_MAX_BRANCHES = 10 ** 5


class BuildError(Exception):
    pass


class LimitExceeded(BuildError):
    def __init__(self, kind: str, limit: int):
        super().__init__(f'{kind} limit of {limit} exceeded')
        self.kind = kind
        self.limit = limit


class NonConcreteIndex(BuildError):
    pass


class NonConcreteLoopControl(BuildError):
    pass


class MissingIterations(BuildError):
    pass


class InvalidChart(BuildError):
    def __init__(self, violations):
        super().__init__('; '.join(violations))
        self.violations = list(violations)


@dataclass
class BuildConfig:
    params: dict[str, int] = field(default_factory=dict)
    iterations: int | None = None
    guard_mode: str | None = None       # None picks LAST iff the chart has `iterations`
    max_branches: int = DEFAULT_MAX_BRANCHES
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        if self.max_branches < 1 or self.max_steps < 1:
            raise ValueError('limits must be positive')
        if self.guard_mode not in (None, FULL, LAST):
            raise ValueError(f'unknown guard mode {self.guard_mode!r}')


def next_branch(trace):
    """The trace of the next pass, or None once every branch is done."""
    t = list(trace)
    if t and t[-1][1] == 1:
        t[-1] = (t[-1][0], 0)
        return t
    while t and t[-1][1] == 0:
        t.pop()
    if not t:
        return None
    t[-1] = (t[-1][0], 0)
    return t


def _is_sym(v) -> bool:
    return isinstance(v, X.Expr)


def _as_expr(v) -> X.Expr:
    if isinstance(v, X.Expr):
        return v
    if isinstance(v, bool):
        raise X.KindMismatch('a concrete truth value cannot enter an expression')
    return X.const(v)


def _as_index(v, where) -> int:
    if _is_sym(v):
        raise NonConcreteIndex(f'index in {where} depends on input data')
    if isinstance(v, bool) or float(v) != int(v):
        raise BuildError(f'index in {where} is not an integer: {v!r}')
    return int(v)


class Machine:
    '''Executes one pass of a chart.

    Input variables are resolved through `input_value`, which returns
    either a symbolic leaf or a number; everything else is shared between
    symbolic construction and plain concrete execution.
    '''

    def __init__(self, fc: Flowchart, params: Mapping[str, int],
                 iterations: int | None,
                 input_value: Callable[[str, tuple], object],
                 max_steps: int = DEFAULT_MAX_STEPS):
        self.fc = fc
        self.max_steps = max_steps
        self.input_value = input_value
        pnames, inputs, outputs = fc.declarations()
        missing = [p for p in pnames if p not in params]
        if missing:
            raise BuildError(f'missing dimension parameters: {", ".join(missing)}')
        self.params = {p: int(params[p]) for p in pnames}
        self.has_iterations = any(r.name == 'iterations' and not r.index for r in inputs)
        if self.has_iterations and iterations is None:
            raise MissingIterations('the chart declares iterations; a bound is required')
        self.iterations = int(iterations) if self.has_iterations else None
        self.inputs = {r.name: self._extent(r) for r in inputs}
        self.outputs = {r.name: self._extent(r) for r in outputs}
        clash = set(self.inputs) & set(self.outputs) | set(self.params) & (
            set(self.inputs) | set(self.outputs))
        if clash:
            raise BuildError(f'variables declared in two categories: {sorted(clash)}')
        self.output_keys = [(name, idx) for name, ext in self.outputs.items()
                            for idx in product(*(range(1, n + 1) for n in ext))]
        self.store: dict = {}
        self.internal: dict = {}
        self.formed: dict[int, int] = {}

    def _extent(self, ref: Ref) -> tuple[int, ...]:
        dims = []
        for d in ref.index:
            v = self.eval_concrete(d)
            dims.append(_as_index(v, f'declaration of {ref.name}'))
        return tuple(dims)

    def eval_concrete(self, node):
        v = self._eval(node, params_only=True)
        return v

    def input_names(self) -> list[str]:
        out = []
        for name, ext in self.inputs.items():
            if name == 'iterations' and not ext:
                continue
            for idx in product(*(range(1, n + 1) for n in ext)):
                out.append(X.var_text(name, idx))
        return out

    # -- evaluation --

    def _index(self, ref: Ref, params_only=False) -> tuple:
        return tuple(_as_index(self._eval(i, params_only), ref.name) for i in ref.index)

    def _check_bounds(self, name, idx, extent):
        if len(idx) != len(extent) or any(not 1 <= i <= n for i, n in zip(idx, extent)):
            raise BuildError(f'index {X.var_text(name, idx)} outside the declared extent')

    def _eval(self, node, params_only=False):
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Ref):
            name = node.name
            if name in self.params and not node.index:
                return self.params[name]
            if params_only:
                raise BuildError(f'{name} is not a dimension parameter')
            idx = self._index(node)
            if name in self.inputs:
                if name == 'iterations' and not idx and self.has_iterations:
                    return self.iterations
                self._check_bounds(name, idx, self.inputs[name])
                return self.input_value(name, idx)
            if name in self.outputs:
                self._check_bounds(name, idx, self.outputs[name])
                return self.store.get((name, idx), 0)
            try:
                return self.internal[(name, idx)]
            except KeyError:
                raise BuildError(f'{X.var_text(name, idx)} is used before assignment') from None
        if isinstance(node, Op):
            vals = [self._eval(a, params_only) for a in node.args]
            op = X.OPERATORS[node.op]
            if any(_is_sym(v) for v in vals):
                args = [_as_expr(v) for v in vals]
                made = X.unary(op, *args) if op.arity == 1 else X.binary(op, *args)
                self.formed[made.id] = made.level
                return made
            return X.apply_operator(op, vals)
        raise TypeError(node)

    def assign(self, target: Ref, value):
        name = target.name
        if name in self.params or name in self.inputs:
            raise BuildError(f'cannot assign to {name}')
        idx = self._index(target)
        if name in self.outputs:
            self._check_bounds(name, idx, self.outputs[name])
            self.store[(name, idx)] = value
        else:
            self.internal[(name, idx)] = value

    def concrete_state(self):
        return frozenset((k, v) for k, v in self.internal.items() if not _is_sym(v))

    def run_pass(self, decide):
        '''One walk from Start to End.

        `decide(block_id, condition)` is called for decisions whose
        condition is symbolic and returns the exit to take (0 or 1).
        Returns (emit flag, output store).
        '''
        self.store = {}
        self.internal = {('empout', ()): 1}
        self.formed = {}
        fc = self.fc
        cur = fc.next(fc.start().id)
        steps = 0
        while True:
            steps += 1
            if steps > self.max_steps:
                raise LimitExceeded('steps', self.max_steps)
            block = fc.blocks[cur]
            if block.type == END:
                break
            if block.type == PROCESS:
                stmt = block.stmt
                self.assign(stmt.target, self._eval(stmt.rhs))
                cur = fc.next(cur)
            elif block.type == DECISION:
                c = block.stmt
                lhs, rhs = self._eval(c.lhs), self._eval(c.rhs)
                if _is_sym(lhs) or _is_sym(rhs):
                    cond = X.binary(c.op, _as_expr(lhs), _as_expr(rhs))
                    self.formed[cond.id] = cond.level
                    exit_ = decide(cur, cond)
                else:
                    exit_ = 1 if X.apply_operator(X.OPERATORS[c.op], [lhs, rhs]) else 0
                cur = fc.next(cur, exit_)
            elif block.type in (INPUT, OUTPUT):
                cur = fc.next(cur)
            else:
                cur = fc.next(cur)
        empout = self.internal.get(('empout', ()), 1)
        if _is_sym(empout):
            raise BuildError('empout must not depend on input data')
        return empout != 0, dict(self.store)

    def output_values(self, store):
        return {X.var_text(name, idx): store.get((name, idx), 0)
                for name, idx in self.output_keys}


@dataclass
class BuildStats:
    passes: int = 0
    emitted: int = 0
    max_depth: int = 0
    # per emitted pass: distinct operation nodes it formed, by level
    pass_work: list = field(default_factory=list)


class Builder:
    def __init__(self, fc: Flowchart, cfg: BuildConfig, check: bool = True):
        if check:
            problems = validate(fc)
            if problems:
                raise InvalidChart(problems)
        self.fc = fc
        self.cfg = cfg
        self.stats = BuildStats()
        self.machine = Machine(fc, cfg.params, cfg.iterations, self._input_leaf,
                               cfg.max_steps)
        mode = cfg.guard_mode
        if mode is None:
            mode = LAST if self.machine.has_iterations else FULL
        self.mode = mode

    @staticmethod
    def _input_leaf(name, idx):
        return X.var(name, *idx)

    def run(self) -> QDeterminant:
        m = self.machine
        trace: list | None = []
        pairs: dict[str, list] = {X.var_text(*k): [] for k in m.output_keys}
        seen: dict[str, set] = {k: set() for k in pairs}
        uncond = None
        while trace is not None:
            if self.stats.passes >= self.cfg.max_branches:
                raise LimitExceeded('branches', self.cfg.max_branches)
            self.stats.passes += 1
            literals: list = []     # (block id, exit, literal)
            visited: set = set()
            counter = [0]

            def decide(block_id, cond, trace=trace, literals=literals,
                       visited=visited, counter=counter):
                key = (block_id, m.concrete_state())
                if key in visited:
                    raise NonConcreteLoopControl(
                        f'decision block {block_id} repeats with the same concrete state; '
                        'its loop is controlled by input data')
                visited.add(key)
                counter[0] += 1
                k = counter[0]
                if k <= len(trace):
                    exit_ = trace[k - 1][1]
                else:
                    exit_ = 1
                    trace.append((k, 1))
                literals.append((block_id, exit_, cond if exit_ else X.negate_condition(cond)))
                return exit_

            emit, store = m.run_pass(decide)
            self.stats.max_depth = max(self.stats.max_depth, len(trace))
            values = m.output_values(store)
            if emit:
                self.stats.emitted += 1
                if not literals and not trace:
                    uncond = {k: _as_expr(v) for k, v in values.items()}
                else:
                    guard = self._guard(literals)
                    for name, v in values.items():
                        pair = (guard, _as_expr(v))
                        key = (pair[0].id, pair[1].id)
                        if key not in seen[name]:
                            seen[name].add(key)
                            pairs[name].append(pair)
                    self.stats.pass_work.append(self._work())
            log.debug('pass %d: trace %s emit=%s', self.stats.passes, trace, emit)
            trace = next_branch(trace)
        log.info('%d passes, %d emitted', self.stats.passes, self.stats.emitted)
        outputs = {}
        L = self.cfg.iterations if m.has_iterations else 0
        for name in pairs:
            if uncond is not None:
                outputs[name] = QTerm.unconditional(uncond[name])
            elif not pairs[name]:
                continue
            elif m.has_iterations:
                outputs[name] = QTerm.truncated(pairs[name], L)
            else:
                outputs[name] = QTerm.conditional(pairs[name])
        return QDeterminant(outputs, dict(m.params), L)

    def _guard(self, literals):
        if not literals:
            return X.binary('eq', X.const(0), X.const(0))
        if self.mode == FULL:
            return X.conjunction([lit for _, _, lit in literals])
        # Trailing run of decisions that left by the same exit as the last one.
        last = literals[-1][1]
        run = []
        for _, exit_, lit in reversed(literals):
            if exit_ != last:
                break
            run.append(lit)
        return X.conjunction(run[::-1])

    def _work(self):
        levels = self.machine.formed.values()
        hist = [0] * max(levels, default=0)
        for lv in levels:
            hist[lv - 1] += 1
        return hist


def build_qdet(fc: Flowchart, cfg: BuildConfig) -> QDeterminant:
    return Builder(fc, cfg).run()


def emit_representation(q: QDeterminant, sink) -> None:
    from .qterm import serialize_qdet
    text = serialize_qdet(q)
    if hasattr(sink, 'write'):
        sink.write(text)
    else:
        with open(sink, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
