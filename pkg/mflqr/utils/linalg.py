"""
Small numerical helpers shared by the model, solver and verification code.
"""

import numpy as np
from scipy.linalg import eigvalsh

from mflqr.exceptions import ModelException, ShapeException


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """
    Convert ``value`` into a 2-D float64 array.

    A scalar is accepted as shorthand for a 1×1 matrix and a flat list as a single row.

    :param value: Scalar, nested sequence or array.
    :param name: Name used in error messages.
    :return: The matrix.
    :rtype: np.ndarray
    """
    arr = np.array(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeException(ShapeException.ERRORS.NOT_MATRIX, f"'{name}' has {arr.ndim} dimensions.")
    return arr


def as_vector(value, name: str = "vector") -> np.ndarray:
    """
    Convert ``value`` into a 1-D float64 array. Scalars become length one vectors.
    """
    arr = np.array(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ShapeException(ShapeException.ERRORS.DIMENSION_MISMATCH, f"'{name}' must be a vector.")
    return arr


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def min_eigenvalue(matrix: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part of ``matrix``."""
    return float(eigvalsh(symmetrize(matrix))[0])


def check_symmetric(matrix: np.ndarray, name: str, atol: float):
    if matrix.shape[0] != matrix.shape[1]:
        raise ShapeException(ShapeException.ERRORS.NOT_SQUARE, f"'{name}' has shape {matrix.shape}.")
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=atol):
        raise ModelException(ModelException.ERRORS.NOT_SYMMETRIC, f"'{name}' is not symmetric.")


def check_psd(matrix: np.ndarray, name: str, atol: float):
    check_symmetric(matrix, name, atol)
    if min_eigenvalue(matrix) < -atol:
        raise ModelException(ModelException.ERRORS.NOT_PSD, f"'{name}' has a negative eigenvalue.")


def check_pd(matrix: np.ndarray, name: str, atol: float):
    check_symmetric(matrix, name, atol)
    if min_eigenvalue(matrix) <= 0.0:
        raise ModelException(ModelException.ERRORS.NOT_PD, f"'{name}' is not positive definite.")


def relative_deviation(actual: np.ndarray, expected: np.ndarray) -> float:
    """
    Max entrywise deviation of ``actual`` from ``expected``, relative to the largest entry of ``expected``.

    The denominator is floored at 1 so that tiny reference values are compared absolutely.
    """
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if actual.shape != expected.shape:
        raise ShapeException(
            ShapeException.ERRORS.DIMENSION_MISMATCH, f"Shapes {actual.shape} and {expected.shape} differ."
        )
    if actual.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(expected))))
    return float(np.max(np.abs(actual - expected))) / scale
