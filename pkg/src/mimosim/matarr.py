"""Contiguous storage and page-wise linear algebra for arrays of complex matrices.

A :class:`ComplexMatrixArray` holds ``pages`` equally sized ``rows x cols``
complex matrices in one flat, contiguous buffer.  The layout is page-major
with column-major entries inside each page::

    flat index of element (r, c, p)  =  p * rows * cols  +  c * rows  +  r

All operations are pure: they never mutate their inputs and return new
arrays, so instances can be shared read-only across threads.

Only the kernels the MIMO receiver chain needs are provided (page-wise
multiply, conjugate transpose, Cholesky, triangular inverse, Hermitian
positive-definite inverse).  There is deliberately no broadcasting: a
1-page array does not auto-expand against an N-page array.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ComplexMatrixArray",
    "MatrixArrayError",
    "DecompositionError",
]

# Pivots closer to zero than this (or negative) fail the Cholesky.
_PIVOT_TOL = 1e-14


class MatrixArrayError(ValueError):
    """Raised on dimension or layout violations."""


class DecompositionError(ArithmeticError):
    """Raised when a page is not decomposable (non-PD, singular diagonal).

    Carries the index of the first offending page in ``page``.
    """

    def __init__(self, message: str, page: int):
        super().__init__(f"{message} (page {page})")
        self.page = page


class ComplexMatrixArray:
    """3D array of ``pages`` complex ``rows x cols`` matrices, stored flat."""

    __slots__ = ("rows", "cols", "pages", "data")

    def __init__(self, rows: int, cols: int, pages: int, values=None):
        if rows < 1 or cols < 1 or pages < 1:
            raise MatrixArrayError(
                f"dimensions must be positive, got ({rows}, {cols}, {pages})"
            )
        self.rows = int(rows)
        self.cols = int(cols)
        self.pages = int(pages)
        n = self.rows * self.cols * self.pages
        if values is None:
            self.data = np.zeros(n, dtype=np.complex128)
        else:
            data = np.asarray(values, dtype=np.complex128).ravel()
            if data.size != n:
                raise MatrixArrayError(
                    f"expected {n} values for ({rows}, {cols}, {pages}), got {data.size}"
                )
            self.data = data.copy()

    # ------------------------------------------------------------------
    # Construction / views
    # ------------------------------------------------------------------

    @classmethod
    def from_paged(cls, paged) -> "ComplexMatrixArray":
        """Build from an array-like of shape (pages, rows, cols)."""
        a = np.asarray(paged, dtype=np.complex128)
        if a.ndim != 3:
            raise MatrixArrayError(f"expected a (pages, rows, cols) array, got shape {a.shape}")
        pages, rows, cols = a.shape
        out = cls(rows, cols, pages)
        # (p, c, r) raveled in C order lands on the column-major page layout.
        out.data = np.ascontiguousarray(a.transpose(0, 2, 1)).reshape(-1)
        return out

    @property
    def paged(self) -> np.ndarray:
        """Zero-copy view of shape (pages, rows, cols)."""
        return self.data.reshape(self.pages, self.cols, self.rows).transpose(0, 2, 1)

    def page(self, p: int) -> np.ndarray:
        """View of page ``p`` as a (rows, cols) matrix."""
        if not 0 <= p < self.pages:
            raise MatrixArrayError(f"page {p} out of range [0, {self.pages})")
        return self.paged[p]

    def copy(self) -> "ComplexMatrixArray":
        return ComplexMatrixArray(self.rows, self.cols, self.pages, self.data)

    def __repr__(self) -> str:
        return f"ComplexMatrixArray(rows={self.rows}, cols={self.cols}, pages={self.pages})"

    # ------------------------------------------------------------------
    # Page-wise operations
    # ------------------------------------------------------------------

    def page_multiply(self, other: "ComplexMatrixArray") -> "ComplexMatrixArray":
        """Per-page matrix product ``self.page(p) @ other.page(p)``."""
        if self.cols != other.rows:
            raise MatrixArrayError(
                f"inner dimensions differ: ({self.rows}x{self.cols}) @ ({other.rows}x{other.cols})"
            )
        if self.pages != other.pages:
            raise MatrixArrayError(f"page counts differ: {self.pages} vs {other.pages}")
        return ComplexMatrixArray.from_paged(np.matmul(self.paged, other.paged))

    def hermitian(self) -> "ComplexMatrixArray":
        """Per-page conjugate transpose."""
        return ComplexMatrixArray.from_paged(self.paged.conj().transpose(0, 2, 1))

    def cholesky_llt(self) -> "ComplexMatrixArray":
        """Per-page lower-triangular L with L @ L^H == page.

        Pages must be Hermitian positive definite; a pivot within
        ``1e-14`` of zero or negative raises :class:`DecompositionError`
        naming the page.
        """
        if self.rows != self.cols:
            raise MatrixArrayError(f"pages are not square: {self.rows}x{self.cols}")
        return ComplexMatrixArray.from_paged(_cholesky_paged(self.paged))

    def invert_lower_triangular(self) -> "ComplexMatrixArray":
        """Per-page inverse of a lower-triangular page."""
        if self.rows != self.cols:
            raise MatrixArrayError(f"pages are not square: {self.rows}x{self.cols}")
        return ComplexMatrixArray.from_paged(_invert_lower_paged(self.paged))

    def invert_hermitian_pd(self) -> "ComplexMatrixArray":
        """Per-page inverse of a Hermitian positive-definite page via Cholesky."""
        l = _cholesky_paged(self.paged) if self.rows == self.cols else None
        if l is None:
            raise MatrixArrayError(f"pages are not square: {self.rows}x{self.cols}")
        li = _invert_lower_paged(l)
        # A^-1 = (L L^H)^-1 = L^-H L^-1
        return ComplexMatrixArray.from_paged(np.matmul(li.conj().transpose(0, 2, 1), li))

    # ------------------------------------------------------------------
    # Debug dump
    # ------------------------------------------------------------------

    def dump(self) -> str:
        """Debug format: one page per block (blank-line separated), one row
        per line, entries as ``a+bi`` with 17 significant digits."""
        blocks = []
        for p in range(self.pages):
            page = self.paged[p]
            lines = [
                " ".join(f"{v.real:.17g}{v.imag:+.17g}i" for v in page[r])
                for r in range(self.rows)
            ]
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"


def _cholesky_paged(a: np.ndarray) -> np.ndarray:
    """Cholesky of a stack (pages, n, n); loops over the matrix index only."""
    pages, n, _ = a.shape
    l = np.zeros_like(a)
    for j in range(n):
        pivot = a[:, j, j].real - np.einsum("pk,pk->p", l[:, j, :j], l[:, j, :j].conj()).real
        bad = pivot <= _PIVOT_TOL
        if bad.any():
            raise DecompositionError("page is not positive definite", page=int(np.argmax(bad)))
        d = np.sqrt(pivot)
        l[:, j, j] = d
        if j + 1 < n:
            below = a[:, j + 1 :, j] - np.einsum(
                "pik,pk->pi", l[:, j + 1 :, :j], l[:, j, :j].conj()
            )
            l[:, j + 1 :, j] = below / d[:, None]
    return l


def _invert_lower_paged(l: np.ndarray) -> np.ndarray:
    """Inverse of a stack of lower-triangular pages by forward substitution."""
    pages, n, _ = l.shape
    diag = np.stack([l[:, i, i] for i in range(n)], axis=1)
    zero = diag == 0
    if zero.any():
        raise DecompositionError(
            "zero diagonal entry in triangular page", page=int(np.argmax(zero.any(axis=1)))
        )
    x = np.zeros_like(l)
    for j in range(n):
        x[:, j, j] = 1.0 / l[:, j, j]
        for i in range(j + 1, n):
            acc = np.einsum("pk,pk->p", l[:, i, j:i], x[:, j:i, j])
            x[:, i, j] = -acc / l[:, i, i]
    return x
