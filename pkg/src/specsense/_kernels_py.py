"""Pure-numpy implementations of the hot statistic kernels.

This module mirrors the compiled extension ``specsense._kernels`` one to one;
``specsense.backend`` picks whichever is importable. Callers are responsible
for validation — kernels assume finite, correctly-shaped float64/complex128
arrays and do no checking of their own.
"""

import numpy as np

BACKEND_NAME = "python"


def vec_sum(x):
    return float(np.sum(x))


def vec_dot(x, y):
    return float(np.dot(x, y))


def l2_norm(x):
    return float(np.linalg.norm(x))


def masked_sums(x, mask):
    """Sums of ``x`` inside and outside a boolean mask, as a pair."""
    inside = float(np.sum(x, where=mask.astype(bool)))
    return inside, float(np.sum(x)) - inside


def mean_log(x):
    """Mean of elementwise natural logs (geometric mean in log space)."""
    return float(np.mean(np.log(x)))


def max_window_sum(x, width):
    """Maximum sum over all circular windows of ``width`` consecutive bins."""
    ext = np.concatenate([x, x[: width - 1]]) if width > 1 else x
    sums = np.convolve(ext, np.ones(width), mode="valid")
    return float(np.max(sums))


def kl_divergence(p, w):
    """KL divergence between p and w after normalizing both to unit sum.

    Zero p-bins contribute zero; callers guarantee w > 0 and both sums > 0.
    """
    pn = p / np.sum(p)
    wn = w / np.sum(w)
    nz = pn > 0.0
    return float(np.sum(pn[nz] * np.log(pn[nz] / wn[nz])))


def abs_sum_complex(a):
    return float(np.sum(np.abs(a)))


def shift_dots(y, max_shift):
    """Inner products of circular shifts against the original vector.

    Entry i-1 is ``roll(y, i)^H y`` for i = 1..max_shift.
    """
    out = np.empty(max_shift, dtype=np.complex128)
    for i in range(1, max_shift + 1):
        out[i - 1] = np.vdot(np.roll(y, i), y)
    return out


def eigvalsh_descending(h):
    """Real eigenvalues of a Hermitian matrix, sorted descending."""
    return np.linalg.eigvalsh(h)[::-1].copy()
