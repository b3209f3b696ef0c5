"""Monte Carlo trial engine, empirical ROC curves, threshold selection.

Each trial draws an h0 and an h1 buffer from streams derived from
(master seed, trial index), evaluates every requested detector on the same
buffers (paired comparison), and records oriented statistics. Degenerate
statistics are excluded trials: they are counted and reported, and the
pfa/pd denominators always use the total trial count.

Trials are independent work units keyed by index, so results are identical
for any worker count and chunking; ``SPECSENSE_WORKERS`` (or the ``workers``
argument) enables a process pool.
"""

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationProfile
from .covariance import arrange_matrix, eigvals_hermitian, sample_correlation, scm
from .detectors import (
    DetectorKind,
    eigen_statistic,
    orient,
    t_ac,
    t_ac1,
    t_cov,
    t_ed,
    t_ed_all,
    t_enp_ed,
    t_f_agm,
    t_fc,
    t_fkl,
    t_search_b,
    t_sf,
)
from .exceptions import ConfigError, DegenerateInput, InvalidArgument
from .spectral import band_bins, bartlett_periodogram, whiten_periodogram
from .waveforms import make_trial, trial_rng


@dataclass(frozen=True, eq=False)
class TrialBatch:
    """Per-detector statistic samples from one Monte Carlo run."""

    detector: DetectorKind
    h0_stats: np.ndarray
    h1_stats: np.ndarray
    excluded_h0: int
    excluded_h1: int
    config: object
    seed: int

    @property
    def n_trials(self):
        return self.h0_stats.size + self.excluded_h0


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Ordered (threshold, pfa, pd) triples from a TrialBatch."""

    thresholds: np.ndarray
    pfa: np.ndarray
    pd: np.ndarray
    excluded_h0: int
    excluded_h1: int

    def points(self):
        return list(zip(self.thresholds, self.pfa, self.pd))


# ---------------------------------------------------------------------------
# detector resolution (validated before any trial runs)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _Resolved:
    kind: DetectorKind
    band: object = None
    profile: object = None
    window_bins: int = None
    snr_ref: float = None
    sigma_s_sq: float = None


def _find_profile(profiles, *, n_fft=None, p=None):
    for prof in profiles:
        if n_fft is not None and prof.noise_psd.n_fft == n_fft:
            return prof
        if p is not None and prof.p == p:
            return prof
    return None


def resolve_detectors(config, detectors, profiles=()):
    """Bind detector kinds to band sets, profiles and derived parameters.

    Raises before any trial runs when a parameterization cannot be served:
    too few samples for (n_fft, n_avg) or p, a degenerate band, or a missing
    calibration profile for whitened / PSD-matching detectors.
    """
    if isinstance(profiles, CalibrationProfile):
        profiles = (profiles,)
    resolved = []
    for kind in detectors:
        info = kind.info
        band = None
        profile = None
        window = None
        snr_ref = None
        sigma = None
        if kind.n_fft is not None:
            if kind.n_fft * kind.n_avg > config.n_samples:
                raise InvalidArgument(
                    f"{kind.label()}: n_fft*n_avg exceeds n_samples={config.n_samples}"
                )
        if kind.p is not None and kind.p > config.n_samples:
            raise InvalidArgument(f"{kind.label()}: p exceeds n_samples")
        if info.domain in ("psd", "whitened_psd", "psd_match"):
            band = band_bins(config.band[0], config.band[1], kind.n_fft)
            if info.needs_band and kind.tag in ("ed", "enp_ed", "w_enp_ed"):
                need_out = kind.tag != "ed"
                if band.in_band.size == 0 or (need_out and band.out_band.size == 0):
                    raise InvalidArgument(
                        f"{kind.label()}: band maps to a degenerate bin partition"
                    )
            if kind.tag == "search_b":
                width = config.band[1] - config.band[0]
                window = kind.window_bins or int(round(width * kind.n_fft))
                if not 1 <= window < kind.n_fft:
                    raise InvalidArgument(
                        f"{kind.label()}: window of {window} bins is out of range"
                    )
        if info.needs_profile:
            if info.domain in ("whitened_psd", "psd_match"):
                profile = _find_profile(profiles, n_fft=kind.n_fft)
                if profile is None:
                    raise ConfigError(
                        f"{kind.label()}: no calibration profile with "
                        f"n_fft={kind.n_fft}"
                    )
            else:
                profile = _find_profile(profiles, p=kind.p)
                if profile is None:
                    raise ConfigError(
                        f"{kind.label()}: no calibration profile with p={kind.p}"
                    )
        if info.domain == "samples":
            snr_ref = 10.0 ** (kind.snr_ref_db / 10.0)
            sigma = kind.sigma_s_sq if kind.sigma_s_sq is not None else snr_ref * 1.0
        resolved.append(
            _Resolved(kind, band=band, profile=profile, window_bins=window,
                      snr_ref=snr_ref, sigma_s_sq=sigma)
        )
    return resolved


# ---------------------------------------------------------------------------
# per-trial evaluation with shared derived quantities
# ---------------------------------------------------------------------------

class _TrialContext:
    """Caches periodograms / eigen decompositions for one buffer."""

    def __init__(self, buf, osf):
        self.buf = buf
        self.osf = osf
        self._cache = {}

    def periodogram(self, n_fft, n_avg):
        key = ("psd", n_fft, n_avg)
        if key not in self._cache:
            self._cache[key] = bartlett_periodogram(self.buf, n_fft, n_avg)
        return self._cache[key]

    def whitened(self, n_fft, n_avg, profile):
        key = ("q", n_fft, n_avg, id(profile))
        if key not in self._cache:
            self._cache[key] = whiten_periodogram(
                self.periodogram(n_fft, n_avg), profile.noise_psd
            )
        return self._cache[key]

    def scm(self, p):
        key = ("scm", p)
        if key not in self._cache:
            self._cache[key] = scm(arrange_matrix(self.buf, p))
        return self._cache[key]

    def eig_scm(self, p):
        key = ("eig_scm", p)
        if key not in self._cache:
            self._cache[key] = eigvals_hermitian(self.scm(p))
        return self._cache[key]

    def eig_corr(self, p):
        key = ("eig_corr", p)
        if key not in self._cache:
            self._cache[key] = eigvals_hermitian(sample_correlation(self.scm(p)))
        return self._cache[key]

    def eig_whitened_scm(self, p, profile):
        key = ("eig_wscm", p, id(profile))
        if key not in self._cache:
            b = profile.b_whiten
            m = b @ self.scm(p) @ b.conj().T
            self._cache[key] = eigvals_hermitian(0.5 * (m + m.conj().T))
        return self._cache[key]

    def eig_whitened_corr(self, p, profile):
        key = ("eig_wcorr", p, id(profile))
        if key not in self._cache:
            k = profile.k_whiten
            m = k @ sample_correlation(self.scm(p)) @ k.conj().T
            self._cache[key] = eigvals_hermitian(0.5 * (m + m.conj().T))
        return self._cache[key]


def _evaluate_raw(res, ctx):
    kind = res.kind
    tag = kind.tag
    domain = kind.info.domain
    if domain == "psd":
        pg = ctx.periodogram(kind.n_fft, kind.n_avg)
        if tag == "ed_all":
            return t_ed_all(pg)
        if tag == "ed":
            return t_ed(pg, res.band)
        if tag == "enp_ed":
            return t_enp_ed(pg, res.band)
        if tag == "f_agm":
            return t_f_agm(pg)
        if tag == "sf":
            return t_sf(pg)
        if tag == "search_b":
            return t_search_b(pg, res.window_bins)
    elif domain == "whitened_psd":
        q = ctx.whitened(kind.n_fft, kind.n_avg, res.profile)
        if tag == "w_enp_ed":
            return t_enp_ed(q, res.band)
        if tag == "wf_agm":
            return t_f_agm(q)
    elif domain == "psd_match":
        pg = ctx.periodogram(kind.n_fft, kind.n_avg)
        if tag == "fc":
            return t_fc(pg, res.profile.noise_psd)
        if tag == "fkl":
            return t_fkl(pg, res.profile.noise_psd)
    elif domain == "scm":
        if tag == "cov":
            return t_cov(ctx.scm(kind.p))
        return eigen_statistic(tag, ctx.eig_scm(kind.p))
    elif domain == "corr":
        return eigen_statistic(tag, ctx.eig_corr(kind.p))
    elif domain == "whitened_scm":
        return eigen_statistic(tag[2:], ctx.eig_whitened_scm(kind.p, res.profile))
    elif domain == "whitened_corr":
        return eigen_statistic(tag[2:], ctx.eig_whitened_corr(kind.p, res.profile))
    elif domain == "samples":
        fn = t_ac if tag == "ac" else t_ac1
        return fn(ctx.buf, ctx.osf, res.snr_ref, res.sigma_s_sq)
    raise InvalidArgument(f"unhandled detector {tag!r}")


def evaluate_detector(res, ctx):
    """Oriented statistic of one resolved detector, NaN when degenerate."""
    try:
        return orient(res.kind, _evaluate_raw(res, ctx))
    except DegenerateInput:
        return np.nan


def _trial_chunk(config, plan, master_seed, shared, start, stop):
    n_det = len(plan)
    h0 = np.empty((stop - start, n_det))
    h1 = np.empty((stop - start, n_det))
    for row, t in enumerate(range(start, stop)):
        if shared:
            ctx0 = _TrialContext(make_trial(config, "h0", trial_rng(master_seed, t, 0)),
                                 config.osf)
            ctx1 = _TrialContext(make_trial(config, "h1", trial_rng(master_seed, t, 1)),
                                 config.osf)
            for d, res in enumerate(plan):
                h0[row, d] = evaluate_detector(res, ctx0)
                h1[row, d] = evaluate_detector(res, ctx1)
        else:
            for d, res in enumerate(plan):
                rng0 = np.random.default_rng(
                    np.random.SeedSequence(master_seed, spawn_key=(d, t, 0)))
                rng1 = np.random.default_rng(
                    np.random.SeedSequence(master_seed, spawn_key=(d, t, 1)))
                ctx0 = _TrialContext(make_trial(config, "h0", rng0), config.osf)
                ctx1 = _TrialContext(make_trial(config, "h1", rng1), config.osf)
                h0[row, d] = evaluate_detector(res, ctx0)
                h1[row, d] = evaluate_detector(res, ctx1)
    return h0, h1


def _worker_count(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("SPECSENSE_WORKERS", "")
    return max(1, int(env)) if env.isdigit() and env else 1


def run_trials(config, detectors, n_trials, master_seed=None, profiles=(),
               shared=True, workers=None):
    """Evaluate a detector bank over n_trials paired h0/h1 observations.

    Returns an ordered dict mapping each DetectorKind to its TrialBatch of
    oriented statistics. ``shared=False`` gives every detector its own
    random streams instead of the default paired evaluation.
    """
    detectors = tuple(detectors)
    if n_trials < 1:
        raise InvalidArgument("n_trials must be >= 1")
    if not detectors:
        raise InvalidArgument("no detectors requested")
    if master_seed is None:
        master_seed = config.seed
    plan = resolve_detectors(config, detectors, profiles)

    for res in plan:
        if res.profile is not None and config.n_samples * 10 > res.profile.n_samples_used:
            warnings.warn(
                "calibration used fewer than 10x the detection samples "
                f"({res.profile.n_samples_used} vs n_samples={config.n_samples}); "
                "estimates may dominate the detector variance"
            )
            break

    n_workers = _worker_count(workers)
    if n_workers == 1 or n_trials < 4 * n_workers:
        h0, h1 = _trial_chunk(config, plan, master_seed, shared, 0, n_trials)
    else:
        bounds = np.linspace(0, n_trials, n_workers * 4 + 1, dtype=int)
        spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(
                _trial_chunk,
                *zip(*[(config, plan, master_seed, shared, a, b) for a, b in spans]),
            ))
        h0 = np.concatenate([p[0] for p in parts], axis=0)
        h1 = np.concatenate([p[1] for p in parts], axis=0)

    out = {}
    for d, kind in enumerate(detectors):
        col0, col1 = h0[:, d], h1[:, d]
        keep0, keep1 = ~np.isnan(col0), ~np.isnan(col1)
        stats0, stats1 = col0[keep0], col1[keep1]
        if stats0.size == 0 or stats1.size == 0:
            raise DegenerateInput(
                f"{kind.label()}: every trial was degenerate under one hypothesis"
            )
        out[kind] = TrialBatch(
            detector=kind,
            h0_stats=stats0,
            h1_stats=stats1,
            excluded_h0=int(np.sum(~keep0)),
            excluded_h1=int(np.sum(~keep1)),
            config=config,
            seed=int(master_seed),
        )
    return out


# ---------------------------------------------------------------------------
# ROC construction and threshold selection
# ---------------------------------------------------------------------------

def _exceed_fraction(sorted_stats, thresholds, denom):
    counts = sorted_stats.size - np.searchsorted(sorted_stats, thresholds, side="right")
    return counts / denom


def empirical_roc(batch):
    """Threshold sweep over the observed h0 statistics.

    pfa(xi) and pd(xi) are fractions of trials with statistic > xi, with the
    total trial count (degenerate trials included) in the denominator. A
    leading threshold below every observed statistic anchors the curve at
    (pfa, pd) = (1, 1).
    """
    h0 = np.sort(batch.h0_stats)
    h1 = np.sort(batch.h1_stats)
    lead = min(h0[0], h1[0]) - 1.0
    thresholds = np.concatenate([[lead], np.unique(h0)])
    n0 = batch.h0_stats.size + batch.excluded_h0
    n1 = batch.h1_stats.size + batch.excluded_h1
    return RocCurve(
        thresholds=thresholds,
        pfa=_exceed_fraction(h0, thresholds, n0),
        pd=_exceed_fraction(h1, thresholds, n1),
        excluded_h0=batch.excluded_h0,
        excluded_h1=batch.excluded_h1,
    )


def threshold_for_pfa(h0_stats, target_pfa):
    """Empirical quantile threshold with realized pfa <= target on the sample.

    Picks the highest sample value on ties so the strict-exceed count stays
    at or below floor(target * n).
    """
    stats = np.asarray(h0_stats, dtype=np.float64)
    if stats.size == 0:
        raise InvalidArgument("empty h0 statistic vector")
    if not 0.0 < target_pfa < 1.0:
        raise InvalidArgument("target_pfa must be in (0, 1)")
    if stats.size < 1.0 / target_pfa:
        warnings.warn(
            f"only {stats.size} h0 samples for target pfa {target_pfa}; "
            "threshold estimate will be coarse"
        )
    allowed = int(np.floor(target_pfa * stats.size))
    ordered = np.sort(stats)
    return float(ordered[stats.size - allowed - 1])


def empirical_rates(batch, threshold):
    """(pfa, pd) at one threshold, total-trial denominators."""
    n0 = batch.h0_stats.size + batch.excluded_h0
    n1 = batch.h1_stats.size + batch.excluded_h1
    pfa = float(np.sum(batch.h0_stats > threshold)) / n0
    pd = float(np.sum(batch.h1_stats > threshold)) / n1
    return pfa, pd


def pd_at_pfa(batch, target_pfa):
    """Detection probability at the threshold meeting a target pfa."""
    xi = threshold_for_pfa(batch.h0_stats, target_pfa)
    return empirical_rates(batch, xi)[1]


def mc_stderr(prob, n_trials):
    """Binomial standard error of an estimated probability."""
    prob = min(max(prob, 0.0), 1.0)
    return float(np.sqrt(prob * (1.0 - prob) / n_trials))
