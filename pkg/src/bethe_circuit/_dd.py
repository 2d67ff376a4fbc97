"""Vectorised complex double-double arithmetic.

Each value carries roughly 32 significant digits as an unevaluated sum
``hi + lo`` of two doubles, separately for the real and imaginary part.  The
error-free transformations (Knuth two-sum, Dekker split/product) are applied
elementwise with numpy, so every operation works on whole arrays at once.

Only what the extended-precision fallbacks need is implemented.
"""

from __future__ import annotations

import numpy as np

_SPLIT = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLIT * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    t, f = _two_sum(al, bl)
    s, e = _quick_two_sum(s, e + t)
    return _quick_two_sum(s, e + f)


def _mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    return _quick_two_sum(p, e + (ah * bl + al * bh))


def _neg(h, l):
    return -h, -l


def _div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = _mul(bh, bl, q1, 0.0)
    rh, rl = _add(ah, al, -ph, -pl)
    q2 = rh / bh
    ph, pl = _mul(bh, bl, q2, 0.0)
    rh, rl = _add(rh, rl, -ph, -pl)
    q3 = rh / bh
    q1, q2 = _quick_two_sum(q1, q2)
    return _add(q1, q2, q3, 0.0)


def _sqrt(h, l):
    h = np.asarray(h, dtype=np.float64)
    x = np.sqrt(h)
    safe = np.where(x > 0, x, 1.0)
    sh, sl = _two_prod(x, x)
    dh, dl = _add(h, l, -sh, -sl)
    corr = np.where(x > 0, dh / (2.0 * safe), 0.0)
    return _two_sum(x, corr)


class CDD:
    """Complex double-double array (``re_hi, re_lo, im_hi, im_lo``)."""

    __slots__ = ("rh", "rl", "ih", "il")

    def __init__(self, rh, rl, ih, il):
        self.rh, self.rl, self.ih, self.il = rh, rl, ih, il

    @classmethod
    def from_complex(cls, z) -> CDD:
        z = np.asarray(z, dtype=np.complex128)
        zero = np.zeros(z.shape)
        return cls(z.real.copy(), zero, z.imag.copy(), zero.copy())

    @classmethod
    def zeros(cls, shape) -> CDD:
        return cls(*(np.zeros(shape) for _ in range(4)))

    @classmethod
    def ones(cls, shape) -> CDD:
        return cls(np.ones(shape), np.zeros(shape), np.zeros(shape), np.zeros(shape))

    @property
    def shape(self):
        return np.shape(self.rh)

    def to_complex(self) -> np.ndarray:
        return (self.rh + self.rl) + 1j * (self.ih + self.il)

    def copy(self) -> CDD:
        return CDD(*(np.array(p, dtype=np.float64, copy=True) for p in (self.rh, self.rl, self.ih, self.il)))

    def __getitem__(self, idx) -> CDD:
        return CDD(self.rh[idx], self.rl[idx], self.ih[idx], self.il[idx])

    def __setitem__(self, idx, val: CDD) -> None:
        self.rh[idx], self.rl[idx], self.ih[idx], self.il[idx] = val.rh, val.rl, val.ih, val.il

    def map(self, fn) -> CDD:
        return CDD(fn(self.rh), fn(self.rl), fn(self.ih), fn(self.il))

    def __add__(self, o: CDD) -> CDD:
        rh, rl = _add(self.rh, self.rl, o.rh, o.rl)
        ih, il = _add(self.ih, self.il, o.ih, o.il)
        return CDD(rh, rl, ih, il)

    def __sub__(self, o: CDD) -> CDD:
        rh, rl = _add(self.rh, self.rl, -o.rh, -o.rl)
        ih, il = _add(self.ih, self.il, -o.ih, -o.il)
        return CDD(rh, rl, ih, il)

    def __neg__(self) -> CDD:
        return CDD(-self.rh, -self.rl, -self.ih, -self.il)

    def __mul__(self, o: CDD) -> CDD:
        a = _mul(self.rh, self.rl, o.rh, o.rl)
        b = _mul(self.ih, self.il, o.ih, o.il)
        c = _mul(self.rh, self.rl, o.ih, o.il)
        d = _mul(self.ih, self.il, o.rh, o.rl)
        rh, rl = _add(a[0], a[1], -b[0], -b[1])
        ih, il = _add(c[0], c[1], d[0], d[1])
        return CDD(rh, rl, ih, il)

    def conj(self) -> CDD:
        return CDD(self.rh, self.rl, -self.ih, -self.il)

    def abs2(self):
        """``|z|^2`` as a real double-double pair ``(hi, lo)``."""
        a = _mul(self.rh, self.rl, self.rh, self.rl)
        b = _mul(self.ih, self.il, self.ih, self.il)
        return _add(a[0], a[1], b[0], b[1])

    def scale(self, h, l) -> CDD:
        """Multiply by a real double-double."""
        rh, rl = _mul(self.rh, self.rl, h, l)
        ih, il = _mul(self.ih, self.il, h, l)
        return CDD(rh, rl, ih, il)

    def divide_real(self, h, l) -> CDD:
        rh, rl = _div(self.rh, self.rl, h, l)
        ih, il = _div(self.ih, self.il, h, l)
        return CDD(rh, rl, ih, il)

    def sum(self, axis: int = 0) -> CDD:
        """Pairwise (tree) sum along ``axis``."""
        parts = [np.moveaxis(np.asarray(p), axis, 0) for p in (self.rh, self.rl, self.ih, self.il)]
        cur = CDD(*parts)
        n = cur.shape[0]
        if n == 0:
            return CDD.zeros(cur.shape[1:])
        while n > 1:
            half = n // 2
            head = cur[: 2 * half : 2] + cur[1 : 2 * half : 2]
            if n % 2:
                head = CDD(*(np.concatenate([h, t[None]]) for h, t in zip(_parts(head), _parts(cur[n - 1]))))
            cur = head
            n = cur.shape[0]
        return cur[0]


def _parts(z: CDD):
    return z.rh, z.rl, z.ih, z.il


def real_sum(h, l, axis: int = 0):
    """Pairwise sum of a real double-double array along ``axis``."""
    h = np.moveaxis(np.asarray(h), axis, 0)
    l = np.moveaxis(np.asarray(l), axis, 0)
    n = h.shape[0]
    if n == 0:
        return np.zeros(h.shape[1:]), np.zeros(h.shape[1:])
    while n > 1:
        half = n // 2
        sh, sl = _add(h[: 2 * half : 2], l[: 2 * half : 2], h[1 : 2 * half : 2], l[1 : 2 * half : 2])
        if n % 2:
            sh = np.concatenate([sh, h[n - 1][None]])
            sl = np.concatenate([sl, l[n - 1][None]])
        h, l = sh, sl
        n = h.shape[0]
    return h[0], l[0]


def matmul(a: CDD, b: CDD) -> CDD:
    """``a @ b`` for 2-D operands, accumulated in double-double."""
    prod = a.map(lambda p: p[:, :, None]) * b.map(lambda p: p[None, :, :])
    return prod.sum(axis=1)


def gram_schmidt(W: CDD):
    """``W = Q R`` with orthonormal ``Q`` (``m x min(m,n)``) and upper ``R`` with positive real diagonal.

    Classical Gram-Schmidt with one reorthogonalisation pass.  Returns ``Q``,
    ``R`` and the diagonal of ``R`` as doubles.
    """
    m, n = W.shape
    kk = min(m, n)
    Q = CDD.zeros((m, kk))
    R = CDD.zeros((kk, n))
    diag = np.zeros(kk)
    for j in range(kk):
        v = W[:, j]
        coeff = CDD.zeros((j,))
        for _ in range(2):
            if j == 0:
                break
            Qj = Q[:, :j]
            c = (Qj.conj() * v.map(lambda p: p[:, None])).sum(axis=0)
            v = v - (Qj * c.map(lambda p: p[None, :])).sum(axis=1)
            coeff = coeff + c
        if j:
            R[:j, j] = coeff
        nh, nl = _sqrt(*real_sum(*v.abs2(), axis=0))
        diag[j] = nh
        if nh == 0 or not np.isfinite(nh):
            R[j, j] = CDD.zeros(())
            Q[:, j] = CDD.zeros((m,))
            continue
        R[j, j] = CDD(np.float64(nh), np.float64(nl), np.float64(0.0), np.float64(0.0))
        Q[:, j] = v.divide_real(nh, nl)
    if n > kk:
        R[:, kk:] = matmul(Q.map(lambda p: p.T.copy()).conj(), W[:, kk:])
    return Q, R, diag
