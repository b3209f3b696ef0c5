"""Time-domain machinery: sample matrix, SCM, correlation, whitening.

Matrices are plain complex128 ndarrays. The column-major arrangement turns a
received vector into a p x q matrix whose rows are decimated sample streams;
p stays small (<= 16 in every scenario), so dense LAPACK routines are the
right tool throughout.
"""

import numpy as np

from . import backend
from .exceptions import CalibrationError, DegenerateInput, InvalidArgument

HERMITIAN_TOL = 1e-12
EIG_CLAMP_REL = 1e-9
PD_REL_FLOOR = 1e-12


def _samples(y):
    arr = y.samples if hasattr(y, "samples") else y
    return np.ascontiguousarray(arr, dtype=np.complex128)


def arrange_matrix(y, p):
    """Fill a p x q matrix column by column from y; q = floor(len(y)/p).

    Column j holds samples y[j*p : (j+1)*p]; trailing samples are discarded.
    """
    if p < 1:
        raise InvalidArgument("p must be >= 1")
    samples = _samples(y)
    if samples.size < p:
        raise InvalidArgument(f"need at least p={p} samples, got {samples.size}")
    q = samples.size // p
    return np.ascontiguousarray(samples[: p * q].reshape(q, p).T)


def scm(matrix):
    """Sample covariance matrix Y Y^H / q, Hermitian PSD by construction."""
    matrix = np.asarray(matrix, dtype=np.complex128)
    if matrix.ndim != 2 or matrix.shape[1] < 1:
        raise InvalidArgument("sample matrix must be 2-d with q >= 1 columns")
    q = matrix.shape[1]
    s = matrix @ matrix.conj().T / q
    return 0.5 * (s + s.conj().T)


def sample_correlation(s):
    """Normalize a covariance to unit diagonal: D^{-1/2} S D^{-1/2}."""
    s = np.asarray(s, dtype=np.complex128)
    d = np.diag(s).real
    if np.any(d <= 0.0):
        raise DegenerateInput("covariance diagonal must be strictly positive")
    inv_sqrt = 1.0 / np.sqrt(d)
    r = s * np.outer(inv_sqrt, inv_sqrt)
    np.fill_diagonal(r, 1.0)
    return r


def check_hermitian(h, tol=HERMITIAN_TOL):
    """Raise unless h is conjugate-symmetric within tol (relative to scale)."""
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidArgument("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(h))))
    if float(np.max(np.abs(h - h.conj().T))) > tol * scale:
        raise InvalidArgument("matrix is not Hermitian within tolerance")
    return h


def eigvals_hermitian(h):
    """Real eigenvalues of a Hermitian matrix, sorted descending."""
    h = check_hermitian(h)
    values = backend.eigvalsh_descending(
        np.ascontiguousarray(0.5 * (h + h.conj().T))
    )
    return values


def clamp_spectrum(values):
    """Zero out tiny negative eigenvalues from a PSD estimate.

    Values in [-1e-9 * lambda_max, 0) are numerical noise and become 0; more
    negative values mean the input was not PSD at all.
    """
    values = np.asarray(values, dtype=np.float64)
    top = values[0] if values.size else 0.0
    floor = -EIG_CLAMP_REL * max(top, 0.0)
    if np.any(values < floor):
        raise InvalidArgument("spectrum is negative beyond the numerical floor")
    return np.where(values < 0.0, 0.0, values)


def whitening_matrix(s0):
    """B with B S0 B^H = I: inverse of the lower Cholesky factor of S0.

    Any matrix satisfying the identity would do; fixing the inverse-Cholesky
    choice keeps calibration deterministic. Whitened eigenvalue statistics
    are invariant to the choice (they only see eig(S0^{-1} S)).
    """
    s0 = check_hermitian(s0)
    evals = np.linalg.eigvalsh(s0)
    if evals[0] <= 0.0 or evals[0] < PD_REL_FLOOR * evals[-1]:
        raise CalibrationError(
            "covariance is not positive definite; calibrate with more samples"
        )
    lower = np.linalg.cholesky(0.5 * (s0 + s0.conj().T))
    return np.linalg.inv(lower)
