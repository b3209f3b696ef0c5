"""Univariate Gaussianity tests for validating noise samples.

Complex captures are validated by testing the real and imaginary parts
separately. Both tests are location-scale invariant, so they apply to noise
of any (unknown) power.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .exceptions import DegenerateInput, InvalidArgument

# Upper-tail critical values of the Anderson-Darling statistic when both the
# mean and the variance are estimated from the sample, to be compared against
# A^2 * (1 + 0.75/n + 2.25/n^2). Stephens' normal-case table as tabulated in
# scipy.stats.anderson.
AD_CRITICAL = {0.15: 0.576, 0.10: 0.656, 0.05: 0.787, 0.025: 0.918, 0.01: 1.092}

MIN_SAMPLES = 20


@dataclass(frozen=True)
class GofReport:
    """Outcome of one goodness-of-fit test."""

    statistic: float
    significance: float
    rejected: bool
    n: int


def _clean(x, significance):
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < MIN_SAMPLES:
        raise InvalidArgument(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    if not 0.0 < significance < 1.0:
        raise InvalidArgument("significance must be in (0, 1)")
    if np.var(x) <= 0.0:
        raise DegenerateInput("sample variance is zero")
    return x


def jarque_bera(x, significance=0.05):
    """Skewness/kurtosis test of normality.

    JB = n/6 * (skew^2 + (kurt - 3)^2 / 4) with population moment
    estimators; the null distribution is chi-square with 2 dof.
    """
    x = _clean(x, significance)
    n = x.size
    centered = x - x.mean()
    m2 = np.mean(centered**2)
    skew = np.mean(centered**3) / m2**1.5
    kurt = np.mean(centered**4) / m2**2
    jb = n / 6.0 * (skew**2 + 0.25 * (kurt - 3.0) ** 2)
    critical = float(sps.chi2.isf(significance, df=2))
    return GofReport(float(jb), significance, bool(jb > critical), n)


def anderson_darling(x, significance=0.05):
    """Anderson-Darling normality test with estimated mean and variance.

    The statistic is corrected by (1 + 0.75/n + 2.25/n^2) and compared to
    the both-parameters-estimated critical value; only the tabulated
    significance levels are supported.
    """
    x = _clean(x, significance)
    if significance not in AD_CRITICAL:
        raise InvalidArgument(
            f"significance must be one of {sorted(AD_CRITICAL)} for this test"
        )
    n = x.size
    y = np.sort(x)
    z = sps.norm.cdf((y - y.mean()) / y.std(ddof=1))
    eps = np.finfo(float).tiny
    z = np.clip(z, eps, 1.0 - 1e-16)
    i = np.arange(1, n + 1)
    a2 = -n - np.mean((2 * i - 1) * (np.log(z) + np.log(1.0 - z[::-1])))
    a2_corrected = a2 * (1.0 + 0.75 / n + 2.25 / n**2)
    critical = AD_CRITICAL[significance]
    return GofReport(float(a2_corrected), significance, bool(a2_corrected > critical), n)


def validate_iq(buf, significance=0.05):
    """Run both tests on the real and imaginary parts of a complex capture.

    Returns a dict keyed by (part, test name).
    """
    samples = buf.samples if hasattr(buf, "samples") else np.asarray(buf)
    out = {}
    for part, values in (("real", samples.real), ("imag", samples.imag)):
        out[(part, "jarque_bera")] = jarque_bera(values, significance)
        out[(part, "anderson_darling")] = anderson_darling(values, significance)
    return out
