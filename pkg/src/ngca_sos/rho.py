"""Matrix representation of the simple spider algebra.

The rational form ``pre`` lives on blocks B(a, b) of size (a+1) x (b+1).  The
orthonormal form is the conjugate sqrt(C)^-1 pre sqrt(C) with C = diag(r!) for
the position r inside each block; it is only materialized in floating point.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, factorial, sqrt

import numpy as np
from scipy.linalg import solve_triangular

from .spider import SpiderElement, SpiderError, all_keys


class NotInImage(ValueError):
    pass


def offsets(D: int) -> list[int]:
    out, pos = [], 0
    for a in range(D + 1):
        out.append(pos)
        pos += a + 1
    return out


def size(D: int) -> int:
    return (D + 1) * (D + 2) // 2


def _zeros(n: int, m: int | None = None) -> np.ndarray:
    out = np.empty((n, n if m is None else m), dtype=object)
    out.fill(Fraction(0))
    return out


def _eye(n: int) -> np.ndarray:
    out = _zeros(n)
    for i in range(n):
        out[i, i] = Fraction(1)
    return out


class BlockMatrix:
    """Exact block matrix in the rational (pre-conjugation) form."""

    __slots__ = ("D", "pre")

    def __init__(self, D: int, pre: np.ndarray):
        self.D = D
        self.pre = pre

    @classmethod
    def zero(cls, D: int) -> BlockMatrix:
        return cls(D, _zeros(size(D)))

    def block(self, a: int, b: int) -> np.ndarray:
        off = offsets(self.D)
        return self.pre[off[a]: off[a] + a + 1, off[b]: off[b] + b + 1]

    def __matmul__(self, other: BlockMatrix) -> BlockMatrix:
        return BlockMatrix(self.D, self.pre.dot(other.pre))

    def __add__(self, other: BlockMatrix) -> BlockMatrix:
        return BlockMatrix(self.D, self.pre + other.pre)

    def __sub__(self, other: BlockMatrix) -> BlockMatrix:
        return BlockMatrix(self.D, self.pre - other.pre)

    def __eq__(self, other) -> bool:
        return isinstance(other, BlockMatrix) and self.D == other.D and bool(np.all(self.pre == other.pre))

    def positions(self) -> np.ndarray:
        """Position of each row/column inside its block."""
        return np.concatenate([np.arange(a + 1) for a in range(self.D + 1)])

    def rescaling(self) -> np.ndarray:
        """The diagonal of C (exact factorials)."""
        return np.array([Fraction(factorial(int(r))) for r in self.positions()], dtype=object)

    def numeric(self) -> np.ndarray:
        """The orthonormal form sqrt(C)^-1 pre sqrt(C) in floating point."""
        s = np.sqrt([float(factorial(int(r))) for r in self.positions()])
        return (self.pre.astype(float) / s[:, None]) * s[None, :]

    def transpose_conjugated(self) -> BlockMatrix:
        """C pre^T C^-1, the rational form of the transposed orthonormal matrix."""
        c = self.rescaling()
        return BlockMatrix(self.D, (self.pre.T * c[:, None]) / c[None, :])

    def is_lower(self) -> bool:
        return not any(self.pre[i, j] != 0 for i in range(self.pre.shape[0]) for j in range(i + 1, self.pre.shape[1]))

    def is_upper(self) -> bool:
        return not any(self.pre[i, j] != 0 for i in range(self.pre.shape[0]) for j in range(i))

    def in_image(self) -> bool:
        off = offsets(self.D)
        for a in range(self.D + 1):
            for b in range(self.D + 1):
                blk = self.pre[off[a]: off[a] + a + 1, off[b]: off[b] + b + 1]
                for r in range(a + 1):
                    for c in range(b + 1):
                        if blk[r, c] != 0 and c - r != b - a:
                            return False
        return True


def rho_basis_entry(i: int, j: int, u: int, r: int) -> Fraction:
    """Rational entry at row r of the block B(i+u, j+u) for S(i, j; u)."""
    if r < i:
        return Fraction(0)
    return Fraction(comb(r, i), factorial(j))


def rho(a: SpiderElement) -> BlockMatrix:
    """Exact representation (rational form) of a spider element."""
    D = a.D
    out = BlockMatrix.zero(D)
    off = offsets(D)
    for (i, j, u), coef in a.coeffs.items():
        k1, k2 = i + u, j + u
        for r in range(i, k1 + 1):
            c = r + k2 - k1
            out.pre[off[k1] + r, off[k2] + c] += coef * rho_basis_entry(i, j, u, r)
    return out


def rho_numeric(a: SpiderElement) -> np.ndarray:
    return rho(a).numeric()


def rho_entry_formula(i: int, j: int, u: int, r: int, c: int) -> float:
    """Orthonormal-form entry sqrt(r! c!)/((k1-u)! (k2-u)! (u-(k1-r))!)."""
    if r < i:
        return 0.0
    return sqrt(factorial(r) * factorial(c)) / (factorial(i) * factorial(j) * factorial(r - i))


def rho_inverse(M: BlockMatrix) -> SpiderElement:
    """Recover the spider element with the given representation."""
    D = M.D
    if not M.in_image():
        raise NotInImage("not in the image of rho")
    off = offsets(D)
    coeffs = {}
    for k1 in range(D + 1):
        for k2 in range(D + 1):
            top = min(k1, k2)
            solved: dict[int, Fraction] = {}
            # row r0 + s only involves spiders with u >= top - s
            r0 = k1 - top
            for step in range(top + 1):
                r = r0 + step
                u = top - step
                target = M.pre[off[k1] + r, off[k2] + r + k2 - k1]
                acc = sum((solved[v] * rho_basis_entry(k1 - v, k2 - v, v, r) for v in solved), Fraction(0))
                solved[u] = (target - acc) / rho_basis_entry(k1 - u, k2 - u, u, r)
            for u, val in solved.items():
                if val != 0:
                    coeffs[(k1 - u, k2 - u, u)] = val
    return SpiderElement(D, coeffs)


def components(M: BlockMatrix) -> list[np.ndarray]:
    """The diagonal components: rho_i(a, b) is entry (a, b) of block (a+i, b+i)."""
    D = M.D
    out = []
    for i in range(D + 1):
        comp = _zeros(D - i + 1)
        for a in range(D - i + 1):
            for b in range(D - i + 1):
                comp[a, b] = M.block(a + i, b + i)[a, b]
        out.append(comp)
    return out


def from_components(comps: list[np.ndarray]) -> BlockMatrix:
    D = len(comps) - 1
    out = BlockMatrix.zero(D)
    off = offsets(D)
    for i, comp in enumerate(comps):
        for a in range(D - i + 1):
            for b in range(D - i + 1):
                out.pre[off[a + i] + a, off[b + i] + b] = comp[a, b]
    return out


def component_numeric(comp: np.ndarray) -> np.ndarray:
    """Orthonormal form of one component (same sqrt(b!/a!) rescaling as the blocks)."""
    n = comp.shape[0]
    s = np.sqrt([float(factorial(r)) for r in range(n)])
    return (comp.astype(float) / s[:, None]) * s[None, :]


def is_lpc(M: BlockMatrix) -> bool:
    """Each component is the leading principal submatrix of the previous one."""
    comps = components(M)
    return all(np.all(comps[i + 1] == comps[i][: comps[i + 1].shape[0], : comps[i + 1].shape[0]]) for i in range(len(comps) - 1))


def exact_inverse(m: np.ndarray) -> np.ndarray:
    """Gauss-Jordan inverse of an exact square object matrix."""
    n = m.shape[0]
    work = np.concatenate([m.copy(), _eye(n)], axis=1)
    for c in range(n):
        p = next((r for r in range(c, n) if work[r, c] != 0), None)
        if p is None:
            raise SpiderError("not invertible in SA_D")
        if p != c:
            work[[c, p]] = work[[p, c]]
        work[c] = work[c] / work[c, c]
        for r in range(n):
            if r != c and work[r, c] != 0:
                work[r] = work[r] - work[r, c] * work[c]
    return work[:, n:]


def inverse(a: SpiderElement) -> SpiderElement:
    """Star inverse through the component decomposition."""
    comps = components(rho(a))
    return rho_inverse(from_components([exact_inverse(c) for c in comps]))


def forward_substitution_inverse(m: np.ndarray) -> np.ndarray:
    """Inverse of an exact lower-triangular matrix with nonzero diagonal."""
    n = m.shape[0]
    out = _zeros(n)
    for col in range(n):
        for r in range(col, n):
            acc = Fraction(1) if r == col else Fraction(0)
            acc -= sum((m[r, s] * out[s, col] for s in range(col, r)), Fraction(0))
            if m[r, r] == 0:
                raise SpiderError("not invertible in SA_D")
            out[r, col] = acc / m[r, r]
    return out


def h_transform(t: int, D: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower-triangular H_t(i, j) = sqrt(i!(i+t)!)/((i-j)! j! (j+t)!) and its inverse."""
    if not 0 <= t <= D:
        raise ValueError(f"need 0 <= t <= D, got t={t}, D={D}")
    n = D - t + 1
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            H[i, j] = sqrt(factorial(i) * factorial(i + t)) / (factorial(i - j) * factorial(j) * factorial(j + t))
    return H, solve_triangular(H, np.eye(n), lower=True)


def span_dimension(D: int) -> int:
    """Rank of the representations of all basis spiders."""
    rows = [rho(SpiderElement.basis(D, *key)).pre.astype(float).ravel() for key in all_keys(D)]
    return int(np.linalg.matrix_rank(np.array(rows)))


def format_matrix(m: np.ndarray) -> str:
    cells = [[str(v) for v in row] for row in m]
    width = max((len(c) for row in cells for c in row), default=1)
    return "\n".join(" ".join(c.rjust(width) for c in row) for row in cells)
