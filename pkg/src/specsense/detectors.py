"""Test statistics for oversampled spectrum sensing.

Every detector is a pure function from estimated quantities (periodogram,
eigenvalues, covariance, raw samples) to a real number; thresholding and ROC
construction live in :mod:`specsense.roc`. Statistics are written exactly as
defined, i.e. some of them *decrease* when a signal is present; the registry
records an orientation flip per detector so the harness can use the uniform
convention "large value => decide signal present".

Geometric means are computed in log space so n_fft = 512 periodograms cannot
overflow the direct product.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import backend
from .covariance import (
    clamp_spectrum,
    eigvals_hermitian,
    sample_correlation,
)
from .exceptions import DegenerateInput, InvalidArgument

EIGEN_KINDS = ("sph", "mme", "met", "lbi", "ind", "fro", "max")
WHITENED_EIGEN_KINDS = ("w_sph", "w_lbi", "w_ind", "w_max")


def _bins(p):
    arr = p.bins if hasattr(p, "bins") else p
    return np.ascontiguousarray(arr, dtype=np.float64)


# ---------------------------------------------------------------------------
# frequency-domain statistics
# ---------------------------------------------------------------------------

def t_ed_all(p):
    """Total periodogram energy (full-band energy detector)."""
    return backend.vec_sum(_bins(p))


def t_ed(p, band):
    """In-band periodogram energy."""
    if band.in_band.size == 0:
        raise InvalidArgument("band has no in-band bins")
    inside, _ = backend.masked_sums(_bins(p), band.in_mask)
    return inside


def t_enp_ed(p, band):
    """In-band over out-of-band energy ratio (noise power estimated in-place)."""
    if band.in_band.size == 0 or band.out_band.size == 0:
        raise InvalidArgument("band must have both in-band and out-of-band bins")
    inside, outside = backend.masked_sums(_bins(p), band.in_mask)
    if outside <= 0.0:
        raise DegenerateInput("out-of-band energy is zero")
    return inside / outside


def t_f_agm(p):
    """Arithmetic over geometric mean of the periodogram bins (>= 1)."""
    bins = _bins(p)
    if np.any(bins <= 0.0):
        raise DegenerateInput("AGM needs strictly positive bins")
    am = backend.vec_sum(bins) / bins.size
    return am / np.exp(backend.mean_log(bins))


def t_sf(p):
    """Spectral flatness: l1 over sqrt(n)*l2 norm ratio, in (0, 1]."""
    bins = _bins(p)
    l2 = backend.l2_norm(bins)
    if l2 <= 0.0:
        raise DegenerateInput("all-zero periodogram")
    return backend.vec_sum(bins) / (np.sqrt(bins.size) * l2)


def t_search_b(p, window_bins):
    """Largest fraction of total energy inside any circular window.

    The window width is the signal bandwidth expressed in bins; the sweep is
    circular with step one bin so bands wrapping DC are covered.
    """
    bins = _bins(p)
    if not 1 <= window_bins < bins.size:
        raise InvalidArgument("window_bins must be in [1, n_fft)")
    total = backend.vec_sum(bins)
    if total <= 0.0:
        raise DegenerateInput("all-zero periodogram")
    return backend.max_window_sum(bins, int(window_bins)) / total


def t_w_enp_ed(q, band):
    """Energy-ratio detector on the whitened periodogram q = p/w."""
    return t_enp_ed(q, band)


def t_wf_agm(q):
    """AGM flatness on the whitened periodogram."""
    return t_f_agm(q)


def t_fc(p, w):
    """Correlation coefficient between the periodogram and the noise PSD."""
    pb, wb = _bins(p), _bins(w)
    if pb.size != wb.size:
        raise InvalidArgument("periodogram and noise PSD lengths differ")
    denom = backend.l2_norm(pb) * backend.l2_norm(wb)
    if denom <= 0.0:
        raise DegenerateInput("zero vector in spectrum correlation")
    return backend.vec_dot(pb, wb) / denom


def t_fkl(p, w):
    """KL divergence between the unit-sum periodogram and noise PSD."""
    pb, wb = _bins(p), _bins(w)
    if pb.size != wb.size:
        raise InvalidArgument("periodogram and noise PSD lengths differ")
    if np.any(wb <= 0.0):
        raise InvalidArgument("noise PSD must be strictly positive")
    if np.any(pb < 0.0):
        raise InvalidArgument("periodogram bins must be >= 0")
    if backend.vec_sum(pb) <= 0.0 or backend.vec_sum(wb) <= 0.0:
        raise DegenerateInput("zero-sum spectrum")
    return backend.kl_divergence(pb, wb)


# ---------------------------------------------------------------------------
# eigenvalue statistics
# ---------------------------------------------------------------------------

def eigen_statistic(kind, values):
    """One of the eigenvalue tests on a descending spectrum.

    sph, mme, met, lbi act on SCM eigenvalues; ind, fro, max act on sample
    correlation eigenvalues. Clamped-to-zero values make sph/ind/mme
    degenerate rather than returning inf/nan.
    """
    values = clamp_spectrum(np.asarray(values, dtype=np.float64))
    if values.size < 2:
        raise InvalidArgument("eigen tests need p >= 2")
    total = float(values.sum())
    if kind == "sph":
        if np.any(values <= 0.0):
            raise DegenerateInput("sphericity needs strictly positive eigenvalues")
        return float(np.exp(np.mean(np.log(values))) / (total / values.size))
    if kind == "mme":
        if values[-1] <= 0.0:
            raise DegenerateInput("smallest eigenvalue is zero")
        return float(values[0] / values[-1])
    if kind == "met":
        if total <= 0.0:
            raise DegenerateInput("zero trace")
        return float(values[0] / total)
    if kind == "lbi":
        if total <= 0.0:
            raise DegenerateInput("zero trace")
        return float(np.sum(values**2) / total**2)
    if kind == "ind":
        if np.any(values <= 0.0):
            raise DegenerateInput("independence test needs positive eigenvalues")
        return float(np.exp(np.sum(np.log(values))))
    if kind == "fro":
        return float(np.sum(values**2))
    if kind == "max":
        return float(values[0])
    raise InvalidArgument(f"unknown eigen statistic {kind!r}")


def whitened_eigen_statistic(kind, s, profile):
    """Eigen test after time-domain whitening with a calibration profile.

    Covariance-based kinds (w_sph, w_lbi) whiten the SCM with B; correlation
    kinds (w_ind, w_max) whiten the sample correlation of s with K.
    """
    if kind not in WHITENED_EIGEN_KINDS:
        raise InvalidArgument(f"unknown whitened eigen statistic {kind!r}")
    s = np.asarray(s, dtype=np.complex128)
    base = kind[2:]
    if base in ("sph", "lbi"):
        b = profile.b_whiten
        if b.shape != s.shape:
            raise InvalidArgument("profile dimension does not match the SCM")
        m = b @ s @ b.conj().T
    else:
        k = profile.k_whiten
        if k.shape != s.shape:
            raise InvalidArgument("profile dimension does not match the SCM")
        r = sample_correlation(s)
        m = k @ r @ k.conj().T
    return eigen_statistic(base, eigvals_hermitian(0.5 * (m + m.conj().T)))


# ---------------------------------------------------------------------------
# covariance / autocorrelation statistics
# ---------------------------------------------------------------------------

def t_cov(s):
    """Sum of absolute covariance entries over the trace."""
    s = np.asarray(s, dtype=np.complex128)
    trace = float(np.trace(s).real)
    if trace <= 0.0:
        raise DegenerateInput("zero trace")
    return backend.abs_sum_complex(s.ravel()) / trace


def ac_compensation(n, osf, snr_ref, sigma_s_sq):
    """Additive compensation terms v_i for the autocorrelation detectors.

    v_i = N a_i s_s^2 / (2 r + N r^2 (a_i^2 + 2 i^2 / (osf N))) with
    a_i = (osf - i) / osf and r the reference SNR, for i = 1..osf-1.
    """
    i = np.arange(1, osf)
    alpha = (osf - i) / osf
    denom = 2.0 * snr_ref + n * snr_ref**2 * (alpha**2 + 2.0 * i**2 / (osf * n))
    return n * alpha * sigma_s_sq / denom


def _ac_terms(y, osf, snr_ref, sigma_s_sq):
    samples = y.samples if hasattr(y, "samples") else np.asarray(y, dtype=np.complex128)
    if osf < 1:
        raise InvalidArgument("osf must be >= 1")
    if snr_ref <= 0.0:
        raise InvalidArgument("snr_ref must be > 0")
    if samples.size < osf:
        raise InvalidArgument("need at least osf samples")
    if osf == 1:
        return np.empty(0)
    v = ac_compensation(samples.size, osf, snr_ref, sigma_s_sq)
    dots = backend.shift_dots(np.ascontiguousarray(samples), osf - 1)
    return np.abs(dots + v) ** 2


def t_ac(y, osf, snr_ref, sigma_s_sq):
    """Sum of compensated shifted-autocorrelation magnitudes over all lags.

    With osf = 1 the sum is empty; the statistic is uninformative and 0 is
    returned with a warning.
    """
    terms = _ac_terms(y, osf, snr_ref, sigma_s_sq)
    if terms.size == 0:
        warnings.warn("t_ac with osf=1 is an empty sum; statistic is uninformative")
        return 0.0
    return float(terms.sum())


def t_ac1(y, osf, snr_ref, sigma_s_sq):
    """Single-lag variant of t_ac (the i = 1 term alone)."""
    terms = _ac_terms(y, osf, snr_ref, sigma_s_sq)
    if terms.size == 0:
        warnings.warn("t_ac1 with osf=1 is an empty sum; statistic is uninformative")
        return 0.0
    return float(terms[0])


# ---------------------------------------------------------------------------
# detector registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TagInfo:
    """Static properties of one detector family."""

    domain: str            # psd | psd_match | scm | corr | samples | whitened-*
    flip: bool             # oriented statistic is 1 - raw (raw drops under h1)
    scale_invariant: bool  # unchanged when the input power is scaled
    needs_band: bool
    needs_profile: bool


REGISTRY = {
    "ed_all":   TagInfo("psd", False, False, False, False),
    "ed":       TagInfo("psd", False, False, True, False),
    "enp_ed":   TagInfo("psd", False, True, True, False),
    "f_agm":    TagInfo("psd", False, True, False, False),
    "sf":       TagInfo("psd", True, True, False, False),
    "search_b": TagInfo("psd", False, True, True, False),
    "w_enp_ed": TagInfo("whitened_psd", False, True, True, True),
    "wf_agm":   TagInfo("whitened_psd", False, True, False, True),
    "fc":       TagInfo("psd_match", True, True, False, True),
    "fkl":      TagInfo("psd_match", False, True, False, True),
    "sph":      TagInfo("scm", True, True, False, False),
    "mme":      TagInfo("scm", False, True, False, False),
    "met":      TagInfo("scm", False, True, False, False),
    "lbi":      TagInfo("scm", False, True, False, False),
    "ind":      TagInfo("corr", True, True, False, False),
    "fro":      TagInfo("corr", False, True, False, False),
    "max":      TagInfo("corr", False, True, False, False),
    "cov":      TagInfo("scm", False, True, False, False),
    "ac":       TagInfo("samples", False, False, False, False),
    "ac1":      TagInfo("samples", False, False, False, False),
    "w_sph":    TagInfo("whitened_scm", True, True, False, True),
    "w_lbi":    TagInfo("whitened_scm", False, True, False, True),
    "w_ind":    TagInfo("whitened_corr", True, True, False, True),
    "w_max":    TagInfo("whitened_corr", False, True, False, True),
}


@dataclass(frozen=True)
class DetectorKind:
    """A detector tag plus the parameters that pin it down.

    Frequency-domain tags use (n_fft, n_avg) and, where a band is involved,
    the band from the scenario; time-domain tags use p; the autocorrelation
    tags use snr_ref_db and optional sigma_s_sq (defaulting to snr_ref times
    the nominal noise power).
    """

    tag: str
    n_fft: int = None
    n_avg: int = None
    p: int = None
    window_bins: int = None
    snr_ref_db: float = None
    sigma_s_sq: float = None

    def __post_init__(self):
        if self.tag not in REGISTRY:
            raise InvalidArgument(f"unknown detector tag {self.tag!r}")
        info = REGISTRY[self.tag]
        if info.domain in ("psd", "whitened_psd", "psd_match"):
            if self.n_fft is None or self.n_avg is None:
                raise InvalidArgument(f"{self.tag} needs n_fft and n_avg")
            if self.n_fft < 2 or self.n_avg < 1:
                raise InvalidArgument("n_fft must be >= 2 and n_avg >= 1")
        if info.domain in ("scm", "corr", "whitened_scm", "whitened_corr"):
            if self.p is None or self.p < 2:
                raise InvalidArgument(f"{self.tag} needs p >= 2")
        if info.domain == "samples":
            if self.snr_ref_db is None:
                raise InvalidArgument(f"{self.tag} needs snr_ref_db")

    @property
    def info(self):
        return REGISTRY[self.tag]

    def label(self):
        """Stable, filename-safe identifier for outputs."""
        parts = [self.tag]
        if self.n_fft is not None:
            parts.append(f"nfft{self.n_fft}")
        if self.n_avg is not None:
            parts.append(f"navg{self.n_avg}")
        if self.p is not None:
            parts.append(f"p{self.p}")
        if self.window_bins is not None:
            parts.append(f"win{self.window_bins}")
        if self.snr_ref_db is not None:
            parts.append(f"ref{self.snr_ref_db:g}dB".replace("-", "m"))
        return "_".join(parts)


def orient(kind, value):
    """Map a raw statistic to the "large means signal present" convention."""
    return 1.0 - value if REGISTRY[kind.tag].flip else value
