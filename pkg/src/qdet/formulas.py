"""Closed-form height and width of the reference algorithms.

Everything here is exact integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial


def ceil_log2(n: int) -> int:
    if n < 1:
        raise ValueError('n must be positive')
    return (n - 1).bit_length()


def _positive(name, v, low=1):
    if not isinstance(v, int) or v < low:
        raise ValueError(f'{name} must be an integer >= {low}')


def scalar_characteristics(n: int) -> tuple[int, int]:
    _positive('n', n)
    return ceil_log2(n) + 1, n


def gauss_jordan_height(n: int) -> int:
    _positive('n', n, 2)
    return 3 * n


def gauss_jordan_width_lower_bound(n: int) -> int:
    _positive('n', n, 2)
    return 3 * factorial(n + 1) // 2


def grid_jacobi_height(KJ: int, n0: int) -> int:
    _positive('KJ', KJ)
    _positive('n0', n0)
    return 5 * n0 + 3 + ceil_log2(KJ)


@dataclass(frozen=True)
class WidthDecomposition:
    '''KJ = a + 8*b[0] + 8*32*b[1] + ... + 8*32^(p-3)*b[p-3].'''
    KJ: int
    p: int
    a: int
    b: tuple[int, ...]
    c: tuple[int, ...]

    @property
    def extra(self) -> int:
        return sum(self.c)


def width_decomposition(KJ: int) -> WidthDecomposition:
    _positive('KJ', KJ, 256)
    a, rest = KJ % 8, KJ // 8
    b = []
    while rest:
        b.append(rest % 32)
        rest //= 32
    p = len(b) + 2
    c = [0] * len(b)
    c[-1] = b[-1]
    for i in range(len(b) - 1, 0, -1):
        c[i - 1] = b[i - 1] + 32 * c[i]
    return WidthDecomposition(KJ, p, a, tuple(b), tuple(c))


def grid_jacobi_width(KJ: int) -> int:
    _positive('KJ', KJ)
    if KJ <= 7:
        return 5 * KJ
    if KJ <= 255:
        return 5 * KJ + KJ // 8
    return 5 * KJ + width_decomposition(KJ).extra


def grid_jacobi_width_pow2(s: int) -> int:
    _positive('s', s, 3)
    r = (s + 2) % 5 - 2
    return 5 * 2 ** s + 2 ** (2 + r) * (2 ** (s - r) - 1) // 31


def grid_jacobi_width_increment(KJ: int) -> int:
    """P(KJ+1) - P(KJ) read off the digits of KJ."""
    d = width_decomposition(KJ)
    if d.a < 7:
        return 5
    if d.b[0] < 31:
        return 6
    for l, digit in enumerate(d.b):
        if digit < 31:
            return l + 6
    return d.p + 4


FORMULAS = {
    'scalar': scalar_characteristics,
    'gauss-jordan-height': gauss_jordan_height,
    'gauss-jordan-width': gauss_jordan_width_lower_bound,
    'grid-jacobi-height': grid_jacobi_height,
    'grid-jacobi-width': grid_jacobi_width,
    'grid-jacobi-width-pow2': grid_jacobi_width_pow2,
    'grid-jacobi-width-increment': grid_jacobi_width_increment,
}
