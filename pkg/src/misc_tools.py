"""Small numerical and bookkeeping helpers shared by the rate modules."""

import hashlib
import json

import numpy as np
import scipy.linalg

from errors import ContractViolation, SingularityError


def hermitian_defect(A):
    """Relative distance of `A` from its conjugate transpose.

    >>> hermitian_defect(np.array([[1.0, 2.0], [2.0, 3.0]]))
    0.0
    >>> round(hermitian_defect(np.array([[0.0, 1.0], [0.0, 0.0]])), 6)
    1.414214
    """
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A - A.conj().T) / max(1.0, np.linalg.norm(A)))


def require_hermitian(A, name="argument", tol=1e-8):
    """Raise `ContractViolation` unless `A` is square and Hermitian within `tol`."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolation(f"{name} must be a square matrix, got shape {A.shape}")
    defect = hermitian_defect(A)
    if defect > tol:
        raise ContractViolation(f"{name} is not Hermitian (relative asymmetry {defect:.3e})")
    return A


def unitary_defect(A):
    """Frobenius norm of A A^H - I.

    >>> unitary_defect(np.eye(3))
    0.0
    """
    A = np.asarray(A)
    return float(np.linalg.norm(A @ A.conj().T - np.eye(A.shape[0])))


def random_unitary(n, rng):
    """Haar-distributed n x n unitary from the QR factorization of a Ginibre matrix."""
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    Q, R = np.linalg.qr(Z)
    diag = np.diag(R)
    phases = np.where(np.abs(diag) > 0, diag / np.abs(diag), 1.0)
    return Q * phases


def complex_normal(shape, variance, rng):
    """Circularly-symmetric complex Gaussian entries with the given variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def nearly_square_factors(n):
    """Split `n` array elements into a (rows, cols) planar grid as square as possible.

    >>> nearly_square_factors(16)
    (4, 4)
    >>> nearly_square_factors(10)
    (2, 5)
    >>> nearly_square_factors(7)
    (1, 7)
    """
    rows = int(np.floor(np.sqrt(n)))
    while rows > 1 and n % rows:
        rows -= 1
    return rows, n // rows


def lu_inverse(M, labels=None, pivot_tol=1e-13):
    """Invert `M` through an LU factorization.

    Returns ``(inverse, logdet)`` where `logdet` is the complex log-determinant
    taken as the sum of logs of the LU pivots plus the permutation sign.

    Parameters
    ----------
    M : ndarray
        Square complex matrix.
    labels : sequence of str, optional
        One label per row of `M`, used to name the block holding the smallest
        pivot when the matrix is singular.
    pivot_tol : float
        Relative pivot threshold below which `M` is declared singular.
    """
    n = M.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex), 0.0 + 0.0j
    lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    pivots = np.diag(lu)
    magnitude = np.abs(pivots)
    scale = max(float(magnitude.max()), np.finfo(float).tiny)
    worst = int(np.argmin(magnitude))
    if magnitude[worst] <= pivot_tol * scale:
        block = labels[worst] if labels is not None else None
        raise SingularityError(
            f"singular resolvent: pivot ratio {magnitude[worst] / scale:.3e} in block {block}",
            block=block,
        )
    inverse = scipy.linalg.lu_solve((lu, piv), np.eye(n, dtype=lu.dtype))
    swaps = int(np.count_nonzero(piv != np.arange(n)))
    logdet = np.sum(np.log(pivots.astype(complex))) + (1j * np.pi if swaps % 2 else 0.0)
    return inverse, complex(logdet)


def to_unit(value_nats, unit):
    """Convert a rate (or rate gradient) from nats to `unit`.

    >>> to_unit(np.log(2.0), "bits")
    1.0
    """
    if unit == "nats":
        return value_nats
    if unit == "bits":
        return value_nats / np.log(2.0)
    raise ValueError(f"unknown rate unit {unit!r}")


def config_hash(payload):
    """Stable sha256 of a JSON-serializable payload (keys sorted).

    >>> config_hash({"b": 1, "a": 2}) == config_hash({"a": 2, "b": 1})
    True
    """
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def standard_error(samples):
    """Standard error of the mean; zero for fewer than two samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        return 0.0
    return float(np.std(samples, ddof=1) / np.sqrt(samples.size))
