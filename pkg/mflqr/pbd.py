"""
Pseudo-block diagonal matrices.

A pseudo-block diagonal matrix with replication count ``k`` is built from two
blocks of the same shape, the inner block ``M`` and the mean block ``M̄``:

    φ_k(M, M̄) = I_k ⊗ M + E_k ⊗ (M̄ − M),     E_k = (1/k) 1_k 1_kᵀ

It is block diagonal plus a matrix whose blocks are all equal. The family is
closed under transposition, scaling, addition, multiplication and inversion,
and every one of those operations acts on ``(M, M̄)`` independently, so the
(rk)×(ck) matrix never has to be formed. :func:`to_dense` builds it anyway and
is meant as an oracle for tests and small instances.

Basic usage:

>>> X = phi(2, [[1.0]], [[3.0]])
>>> to_dense(X)
array([[2., 1.],
       [1., 2.]])
>>> apply_stacked(X, [1.0, 3.0])
array([5., 7.])

Stacked vectors hold ``k`` blocks back to back: block ``i`` of a stacked
vector of block size ``n`` is ``xs[i*n:(i+1)*n]``. Functions that take stacked
vectors also accept the equivalent ``(k, n)`` array and then answer in the same
layout.
"""

from dataclasses import dataclass
from numbers import Real

import numpy as np
import scipy.linalg

from mflqr.conf import settings
from mflqr.exceptions import (
    LinAlgErrorMsg,
    ShapeException,
    SingularMatrixException,
)
from mflqr.utils.linalg import as_matrix, as_vector


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class PseudoBlockMatrix:
    """
    Factored representation of ``I_k ⊗ inner + E_k ⊗ (mean − inner)``.

    Instances are immutable, the stored blocks are read-only arrays.

    :ivar k: Replication count.
    :ivar inner: Inner block ``M`` (r×c).
    :ivar mean: Mean block ``M̄`` (r×c).
    """

    k: int
    inner: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        if isinstance(self.k, bool) or not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ShapeException(ShapeException.ERRORS.REPLICATION_COUNT, f"Got k={self.k!r}.")
        inner = as_matrix(self.inner, "inner")
        mean = as_matrix(self.mean, "mean")
        if inner.shape != mean.shape:
            raise ShapeException(
                ShapeException.ERRORS.DIMENSION_MISMATCH,
                f"Inner block {inner.shape} and mean block {mean.shape} differ.",
            )
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "inner", _frozen(inner))
        object.__setattr__(self, "mean", _frozen(mean))

    @property
    def block_shape(self) -> tuple[int, int]:
        return self.inner.shape

    @property
    def shape(self) -> tuple[int, int]:
        """Shape of the dense form."""
        rows, cols = self.inner.shape
        return rows * self.k, cols * self.k

    @property
    def T(self) -> "PseudoBlockMatrix":
        return transpose(self)

    def block(self, i: int, j: int) -> np.ndarray:
        """Dense block ``(i, j)`` of the expanded matrix."""
        if not (0 <= i < self.k and 0 <= j < self.k):
            raise ShapeException(ShapeException.ERRORS.BLOCK_COUNT, f"Block ({i}, {j}) outside k={self.k}.")
        offset = (self.mean - self.inner) / self.k
        return self.inner + offset if i == j else offset

    def to_dense(self) -> np.ndarray:
        return to_dense(self)

    def __add__(self, other):
        if isinstance(other, PseudoBlockMatrix):
            return add(self, other)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, PseudoBlockMatrix):
            return add(self, scale(-1.0, other))
        return NotImplemented

    def __neg__(self):
        return scale(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, Real):
            return scale(float(other), self)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, PseudoBlockMatrix):
            return matmul(self, other)
        if isinstance(other, (np.ndarray, list, tuple)):
            return apply_stacked(self, other)
        return NotImplemented

    def __eq__(self, other):
        if not isinstance(other, PseudoBlockMatrix):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.inner, other.inner) and np.array_equal(self.mean, other.mean)

    __hash__ = None

    def __repr__(self):
        return f"PseudoBlockMatrix(k={self.k}, inner={self.inner.tolist()}, mean={self.mean.tolist()})"


def phi(k: int, inner, mean) -> PseudoBlockMatrix:
    """
    Build ``φ_k(M, M̄)`` without densifying it.

    :param k: Replication count, ``k >= 1``.
    :param inner: Inner block ``M``; a scalar is read as a 1×1 matrix.
    :param mean: Mean block ``M̄`` with the same shape as ``inner``.
    :raises ShapeException: If the blocks differ in shape or ``k`` is not positive.
    """
    return PseudoBlockMatrix(k, inner, mean)


def identity(k: int, n: int) -> PseudoBlockMatrix:
    """``φ_k(I_n, I_n)``, the (kn)×(kn) identity."""
    eye = np.eye(n)
    return PseudoBlockMatrix(k, eye, eye)


def e_matrix(k: int) -> np.ndarray:
    """Dense averaging matrix ``E_k = (1/k) 1_k 1_kᵀ``."""
    if k < 1:
        raise ShapeException(ShapeException.ERRORS.REPLICATION_COUNT, f"Got k={k!r}.")
    return np.full((k, k), 1.0 / k)


def to_dense(X: PseudoBlockMatrix) -> np.ndarray:
    """
    Expand ``X`` into its (rk)×(ck) dense form.

    Quadratic in ``k``; meant for tests and small checks only. For ``k = 1``
    the result is the mean block itself.
    """
    if X.k == 1:
        return np.array(X.mean)
    return np.kron(np.eye(X.k), X.inner) + np.kron(e_matrix(X.k), X.mean - X.inner)


def is_block_diagonal(X: PseudoBlockMatrix) -> bool:
    """True when the off-diagonal blocks vanish, i.e. ``M == M̄`` or ``k == 1``."""
    return X.k == 1 or np.array_equal(X.inner, X.mean)


def transpose(X: PseudoBlockMatrix) -> PseudoBlockMatrix:
    return PseudoBlockMatrix(X.k, X.inner.T, X.mean.T)


def scale(factor: float, X: PseudoBlockMatrix) -> PseudoBlockMatrix:
    return PseudoBlockMatrix(X.k, factor * X.inner, factor * X.mean)


def _check_same_k(X: PseudoBlockMatrix, Y: PseudoBlockMatrix):
    if X.k != Y.k:
        raise ShapeException(ShapeException.ERRORS.REPLICATION_MISMATCH, f"k={X.k} and k={Y.k}.")


def add(X: PseudoBlockMatrix, Y: PseudoBlockMatrix) -> PseudoBlockMatrix:
    """``φ_k(M + N, M̄ + N̄)``."""
    _check_same_k(X, Y)
    if X.block_shape != Y.block_shape:
        raise ShapeException(
            ShapeException.ERRORS.DIMENSION_MISMATCH, f"Blocks {X.block_shape} and {Y.block_shape} differ."
        )
    return PseudoBlockMatrix(X.k, X.inner + Y.inner, X.mean + Y.mean)


def matmul(X: PseudoBlockMatrix, Y: PseudoBlockMatrix) -> PseudoBlockMatrix:
    """``φ_k(M, M̄) φ_k(C, C̄) = φ_k(MC, M̄C̄)``."""
    _check_same_k(X, Y)
    if X.block_shape[1] != Y.block_shape[0]:
        raise ShapeException(
            ShapeException.ERRORS.DIMENSION_MISMATCH,
            f"Cannot multiply blocks {X.block_shape} and {Y.block_shape}.",
        )
    return PseudoBlockMatrix(X.k, X.inner @ Y.inner, X.mean @ Y.mean)


def _invert_factor(block: np.ndarray, error: LinAlgErrorMsg) -> np.ndarray:
    if block.shape[0] != block.shape[1]:
        raise ShapeException(ShapeException.ERRORS.NOT_SQUARE, f"Block has shape {block.shape}.")
    with np.errstate(divide="ignore", invalid="ignore"):
        condition = np.linalg.cond(block)
    if not np.isfinite(condition) or condition > settings.SINGULAR_CONDITION:
        raise SingularMatrixException(error, f"Condition number estimate {condition:.3g}.")
    try:
        return scipy.linalg.inv(block, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SingularMatrixException(error, str(e)) from e


def inverse(X: PseudoBlockMatrix) -> PseudoBlockMatrix:
    """
    ``φ_k(M, M̄)⁻¹ = φ_k(M⁻¹, M̄⁻¹)``.

    :raises SingularMatrixException: If either factor is singular or has a
        condition number above ``settings.SINGULAR_CONDITION``; the message
        names the factor. The mean block is checked first.
    """
    mean_inv = _invert_factor(X.mean, LinAlgErrorMsg.SINGULAR_MEAN)
    inner_inv = _invert_factor(X.inner, LinAlgErrorMsg.SINGULAR_INNER)
    return PseudoBlockMatrix(X.k, inner_inv, mean_inv)


def apply_replicated(X: PseudoBlockMatrix, v) -> np.ndarray:
    """
    Common block of ``φ_k(M, M̄)(1_k ⊗ v) = 1_k ⊗ M̄v``.

    :return: ``M̄v``; the caller reads the full result as ``1_k ⊗ M̄v``.
    """
    v = as_vector(v, "v")
    if v.shape[0] != X.block_shape[1]:
        raise ShapeException(
            ShapeException.ERRORS.DIMENSION_MISMATCH, f"Vector of length {v.shape[0]} for blocks {X.block_shape}."
        )
    return X.mean @ v


def _as_blocks(xs, k: int, size: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(xs, dtype=np.float64)
    if arr.ndim == 2:
        if arr.shape != (k, size):
            raise ShapeException(ShapeException.ERRORS.BLOCK_COUNT, f"Expected ({k}, {size}), got {arr.shape}.")
        return arr, True
    if arr.ndim != 1 or arr.shape[0] != k * size:
        raise ShapeException(
            ShapeException.ERRORS.BLOCK_COUNT, f"Expected {k} blocks of size {size}, got shape {arr.shape}."
        )
    return arr.reshape(k, size), False


def apply_stacked(X: PseudoBlockMatrix, xs) -> np.ndarray:
    """
    Multiply ``X`` by a stacked vector in O(k) block products.

    Block ``i`` of the result is ``M xⁱ + (M̄ − M) x̄`` where ``x̄`` is the mean
    of the input blocks. Equals ``to_dense(X) @ xs``.
    """
    blocks, two_dimensional = _as_blocks(xs, X.k, X.block_shape[1])
    xbar = blocks.mean(axis=0)
    out = blocks @ X.inner.T + (X.mean - X.inner) @ xbar
    return out if two_dimensional else out.reshape(-1)


def mean_field(xs, k: int | None = None) -> np.ndarray:
    """
    Arithmetic mean of the blocks of a stacked vector.

    :param xs: A sequence of equal size blocks, a ``(k, n)`` array, or a flat
        stacked vector together with ``k``.
    :param k: Block count, required only for flat input.
    :raises ShapeException: On empty input or blocks that do not split evenly.
    """
    arr = np.asarray(xs, dtype=np.float64)
    if arr.size == 0:
        raise ShapeException(ShapeException.ERRORS.EMPTY_STACK)
    if arr.ndim == 1:
        if k is None:
            arr = arr.reshape(-1, 1)
        else:
            if k < 1 or arr.shape[0] % k:
                raise ShapeException(ShapeException.ERRORS.BLOCK_COUNT, f"{arr.shape[0]} entries, k={k}.")
            arr = arr.reshape(k, -1)
    elif arr.ndim != 2:
        raise ShapeException(ShapeException.ERRORS.BLOCK_COUNT, f"Got shape {arr.shape}.")
    return arr.mean(axis=0)
