"""Reference algorithms: flowcharts for the builder, or determinants built directly."""

from __future__ import annotations

from . import expr as X
from .flowchart import (DECISION, END, FALSE, INPUT, NORMAL, OUTPUT, PROCESS,
                        START, TRUE, Flowchart, parse_flowchart, flowchart_to_json)
from .qterm import QDeterminant, QTerm

import json


class _Chart:
    """Structured assembly of a block/edge chart.

    `pending` holds the exits (block id, edge type) that the next block
    will be attached to.
    """

    def __init__(self, inputs: str, outputs: str):
        self.vertices = []
        self.edges = []
        self.to_end = []
        start = self._block(START, 'Start')
        self.pending = [(start, NORMAL)]
        self.stmt_block(INPUT, inputs)
        self.stmt_block(OUTPUT, outputs)

    def _block(self, btype, content):
        bid = len(self.vertices) + 1
        self.vertices.append({'Id': bid, 'Type': btype, 'Content': content})
        return bid

    def _attach(self, bid):
        for src, etype in self.pending:
            self.edges.append({'From': src, 'To': bid, 'Type': etype})

    def stmt_block(self, btype, content):
        bid = self._block(btype, content)
        self._attach(bid)
        self.pending = [(bid, NORMAL)]
        return bid

    def do(self, *statements):
        for s in statements:
            self.stmt_block(PROCESS, s)

    def if_(self, cond, then, orelse=None):
        d = self._block(DECISION, cond)
        self._attach(d)
        self.pending = [(d, TRUE)]
        then()
        joined = self.pending
        self.pending = [(d, FALSE)]
        if orelse:
            orelse()
        self.pending = joined + self.pending

    def while_(self, cond, body):
        d = self._block(DECISION, cond)
        self._attach(d)
        self.pending = [(d, TRUE)]
        body()
        self._attach(d)
        self.pending = [(d, FALSE)]

    def for_(self, var, lo, hi, body):
        '''for var = lo .. hi (inclusive); `hi` must be a name or a number.'''
        self.do(f'{var} = {lo}')

        def step():
            body()
            self.do(f'{var} = {var} + 1')
        self.while_(f'{var} <= {hi}', step)

    def stop(self):
        """Jump straight to End from the current point."""
        self.to_end.extend(self.pending)
        self.pending = []

    def finish(self) -> Flowchart:
        end = self._block(END, 'End')
        self.pending += self.to_end
        self._attach(end)
        return parse_flowchart(json.dumps({'Vertices': self.vertices, 'Edges': self.edges}))


def _check(cond, message):
    if not cond:
        raise ValueError(message)


def gen_scalar_product(n: int = 1, doubling: bool = False) -> Flowchart:
    """Scalar product of A1(n) and A2(n) into S.

    The chart is generic in n; the argument only checks the range.  With
    `doubling` the products are summed pairwise with a doubling stride.
    """
    _check(n >= 1, 'n must be at least 1')
    c = _Chart('[n], A1(n), A2(n)', 'S')
    if not doubling:
        c.do('S = A1(1) * A2(1)', 'i = 2')
        c.while_('i <= n', lambda: c.do('t = A1(i) * A2(i)', 'S = S + t', 'i = i + 1'))
        return c.finish()

    c.for_('i', 1, 'n', lambda: c.do('p(i) = A1(i) * A2(i)'))
    c.do('h = 1')

    def sweep():
        c.do('h2 = h * 2', 'i = 1')

        def pair():
            c.do('k = i + h')
            c.if_('k <= n', lambda: c.do('p(i) = p(i) + p(k)'))
            c.do('i = i + h2')
        c.while_('i <= n', pair)
        c.do('h = h2')
    c.while_('h < n', sweep)
    c.do('S = p(1)')
    return c.finish()


def gen_gauss_jordan(n: int = 2) -> Flowchart:
    '''Gauss-Jordan elimination on the augmented matrix A(n, n+1).

    Row k takes as pivot the first column, left to right, among those not
    yet used, whose entry is nonzero.  A row with no such entry cancels
    the pass.
    '''
    _check(2 <= n <= 5, 'n must be between 2 and 5')
    c = _Chart('[n], A(n,n+1)', 'X(n)')
    c.do('n1 = n + 1')
    c.for_('i', 1, 'n', lambda: c.for_('j', 1, 'n1', lambda: c.do('M(i,j) = A(i,j)')))
    c.for_('j', 1, 'n', lambda: c.do('used(j) = 0'))

    def row():
        c.do('j = 1', 'found = 0')

        def probe():
            def test():
                c.if_('M(k,j) != 0', lambda: c.do('jk = j', 'found = 1', 'j = n1'),
                      lambda: c.do('j = j + 1'))
            c.if_('used(j) == 1', lambda: c.do('j = j + 1'), test)
        c.while_('j <= n', probe)

        def singular():
            c.do('empout = 0')
            c.stop()
        c.if_('found == 0', singular)
        c.do('used(jk) = 1', 'piv(k) = jk', 'p = M(k,jk)')
        c.for_('j', 1, 'n1', lambda: c.do('M(k,j) = M(k,j) / p'))

        def eliminate():
            def update():
                c.do('f = M(i,jk)')
                c.for_('j', 1, 'n1', lambda: c.do('t = M(k,j) * f', 'M(i,j) = M(i,j) - t'))
            c.if_('i != k', update)
        c.for_('i', 1, 'n', eliminate)
    c.for_('k', 1, 'n', row)
    c.for_('k', 1, 'n', lambda: c.do('q = piv(k)', 'X(q) = M(k,n1)'))
    return c.finish()


def _iterative(n: int, L: int, seidel: bool) -> Flowchart:
    _check(n >= 2, 'n must be at least 2')
    _check(L >= 1, 'L must be at least 1')
    c = _Chart('[n], A(n,n), B(n), X0(n), e, iterations', 'X(n)')
    c.do('n1 = n + 1')
    c.for_('i', 1, 'n', lambda: c.do('X(i) = X0(i)'))
    c.do('it = 0', 'go = 1')

    def sweep_row():
        c.do('s = B(i)')
        src = 'X(j)'
        c.for_('j', 1, 'n', lambda: c.if_('j != i', lambda: c.do(
            f't = A(i,j) * {src}', 's = s - t')))
        c.do('Y(i) = s / A(i,i)')
        if seidel:
            c.do('d = Y(i) - X(i)', 'D(i) = abs(d)', 'X(i) = Y(i)')

    def iteration():
        c.do('it = it + 1')
        c.for_('i', 1, 'n', sweep_row)
        if not seidel:
            c.for_('i', 1, 'n', lambda: c.do('d = Y(i) - X(i)', 'D(i) = abs(d)'))
            c.for_('i', 1, 'n', lambda: c.do('X(i) = Y(i)'))
        # componentwise stopping test, leaving at the first failure
        c.do('i = 1', 'conv = 1')
        c.while_('i <= n', lambda: c.if_(
            'D(i) < e', lambda: c.do('i = i + 1'), lambda: c.do('conv = 0', 'i = n1')))

        def more():
            c.if_('it >= iterations', lambda: c.do('empout = 0', 'go = 0'))
        c.if_('conv == 1', lambda: c.do('go = 0'), more)
    c.while_('go == 1', iteration)
    return c.finish()


def gen_jacobi_linear(n: int = 2, L: int = 1) -> Flowchart:
    """Jacobi iteration for A x = B from X0, stopping when every |Δx_i| < e."""
    return _iterative(n, L, seidel=False)


def gen_gauss_seidel(n: int = 2, L: int = 1) -> Flowchart:
    """Gauss-Seidel iteration, same inputs and stopping test as Jacobi."""
    return _iterative(n, L, seidel=True)


def gen_matmul(n: int, k: int, m: int, doubling: bool = False) -> QDeterminant:
    '''C = A·B with A n×k and B k×m; sums are rebalanced when doubling.'''
    _check(min(n, k, m) >= 1, 'dimensions must be positive')
    outputs = {}
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            terms = [X.var('A', i, s) * X.var('B', s, j) for s in range(1, k + 1)]
            w = X.chain('add', terms)
            if doubling:
                w = X.rebalance_doubling(w)
            outputs[X.var_text('C', (i, j))] = QTerm.unconditional(w)
    return QDeterminant(outputs, {'n': n, 'k': k, 'm': m}, 0)


GRID_BOUNDARIES = ('zero', 'periodic')


def gen_grid_jacobi(K: int, J: int, L: int, boundary: str = 'zero') -> QDeterminant:
    """Jacobi sweeps for the five-point grid equations on a K×J grid.

    u(k,j) at step t is (f + a·west + b·south + c·east + d·north) / e over
    the previous step.  With the 'zero' boundary, neighbours outside the
    grid are the constant 0.  With 'periodic' the indices wrap around, so
    every point reads four values of the previous step.
    The stopping test v^t is the conjunction of |u^t - u^(t-1)| < eps.
    """
    _check(min(K, J, L) >= 1, 'K, J and L must be positive')
    _check(boundary in GRID_BOUNDARIES, f'boundary must be one of {GRID_BOUNDARIES}')
    zero = X.const(0)
    eps = X.var('eps')
    prev = {(k, j): X.var('u0', k, j) for k in range(1, K + 1) for j in range(1, J + 1)}
    pairs = {key: [] for key in prev}

    def at(grid, k, j):
        if boundary == 'periodic':
            return grid[((k - 1) % K + 1, (j - 1) % J + 1)]
        return grid.get((k, j), zero)

    for _ in range(L):
        cur = {}
        for (k, j) in prev:
            num = X.chain('add', [
                X.var('f', k, j),
                X.var('a', k, j) * at(prev, k - 1, j),
                X.var('b', k, j) * at(prev, k, j - 1),
                X.var('c', k, j) * at(prev, k + 1, j),
                X.var('d', k, j) * at(prev, k, j + 1),
            ])
            cur[(k, j)] = num / X.var('e', k, j)
        v = X.conjunction([X.binary('lt', abs(cur[p] - prev[p]), eps) for p in prev])
        for p in prev:
            pairs[p].append((v, cur[p]))
        prev = cur
    outputs = {X.var_text('u', p): QTerm.truncated(pairs[p], L) for p in pairs}
    return QDeterminant(outputs, {'K': K, 'J': J}, L)


FLOWCHART_GENERATORS = {
    'scalar-product': gen_scalar_product,
    'gauss-jordan': gen_gauss_jordan,
    'jacobi-linear': gen_jacobi_linear,
    'gauss-seidel': gen_gauss_seidel,
}
DETERMINANT_GENERATORS = {
    'matmul': gen_matmul,
    'grid-jacobi': gen_grid_jacobi,
}


def chart_json(fc: Flowchart) -> dict:
    return flowchart_to_json(fc)
