"""Bartlett averaged periodogram, band-to-bin mapping, frequency whitening.

The periodogram is the plain Bartlett estimate: consecutive non-overlapping
blocks, no window, no zero padding. Bins are in natural DFT order (negative
frequencies in the upper half) and band edges are inclusive at both ends.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgument


@dataclass(frozen=True, eq=False)
class Periodogram:
    """Non-negative power per DFT bin, averaged over n_avg blocks."""

    bins: np.ndarray
    n_fft: int
    n_avg: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.bins, dtype=np.float64)
        if arr.ndim != 1 or arr.size != self.n_fft:
            raise InvalidArgument("bins length must equal n_fft")
        if self.n_fft < 1 or self.n_avg < 1:
            raise InvalidArgument("n_fft and n_avg must be >= 1")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
            raise InvalidArgument("periodogram bins must be finite and >= 0")
        object.__setattr__(self, "bins", arr)


@dataclass(frozen=True, eq=False)
class BandIndexSet:
    """Partition of DFT bin indices into in-band and out-of-band sets.

    Either side may be empty (flagged via is_partial); operations that need
    both sides reject such sets themselves.
    """

    in_band: np.ndarray
    out_band: np.ndarray
    n_fft: int

    def __post_init__(self):
        inb = np.ascontiguousarray(self.in_band, dtype=np.intp)
        outb = np.ascontiguousarray(self.out_band, dtype=np.intp)
        union = np.sort(np.concatenate([inb, outb]))
        if union.size != self.n_fft or not np.array_equal(
            union, np.arange(self.n_fft)
        ):
            raise InvalidArgument("in_band/out_band must partition 0..n_fft-1")
        object.__setattr__(self, "in_band", inb)
        object.__setattr__(self, "out_band", outb)

    @property
    def is_partial(self):
        """True when both sides are non-empty."""
        return self.in_band.size > 0 and self.out_band.size > 0

    @property
    def in_mask(self):
        mask = np.zeros(self.n_fft, dtype=bool)
        mask[self.in_band] = True
        return mask


def _samples(y):
    arr = y.samples if hasattr(y, "samples") else y
    return np.ascontiguousarray(arr, dtype=np.complex128)


def bartlett_periodogram(y, n_fft, n_avg):
    """Averaged periodogram over n_avg consecutive blocks of n_fft samples.

    bin i = (1 / (n_fft n_avg)) sum_k |DFT_i(block k)|^2; samples beyond
    n_fft * n_avg are ignored.
    """
    if n_fft < 2:
        raise InvalidArgument("n_fft must be >= 2")
    if n_avg < 1:
        raise InvalidArgument("n_avg must be >= 1")
    samples = _samples(y)
    needed = n_fft * n_avg
    if samples.size < needed:
        raise InvalidArgument(
            f"need {needed} samples for n_fft={n_fft}, n_avg={n_avg}; "
            f"got {samples.size}"
        )
    blocks = samples[:needed].reshape(n_avg, n_fft)
    spectra = np.fft.fft(blocks, axis=1)
    bins = (spectra.real**2 + spectra.imag**2).sum(axis=0) / float(needed)
    return Periodogram(bins, n_fft, n_avg)


def bin_frequencies(n_fft):
    """Center frequency of each natural-order bin as a fraction of fs.

    i/n_fft for the lower half, (i - n_fft)/n_fft for the upper half, so the
    values live in [-0.5, 0.5).
    """
    freqs = np.arange(n_fft) / n_fft
    freqs[freqs >= 0.5] -= 1.0
    return freqs


def band_bins(f_low, f_high, n_fft):
    """Bin indices whose center frequency lies in [f_low, f_high] (inclusive)."""
    if not (-0.5 <= f_low < f_high <= 0.5):
        raise InvalidArgument(f"invalid band ({f_low}, {f_high})")
    freqs = bin_frequencies(n_fft)
    inside = (freqs >= f_low) & (freqs <= f_high)
    idx = np.arange(n_fft)
    return BandIndexSet(idx[inside], idx[~inside], n_fft)


def whiten_periodogram(p, w):
    """Elementwise ratio p/w against a calibrated noise PSD."""
    if p.n_fft != w.n_fft:
        raise InvalidArgument(
            f"periodogram n_fft {p.n_fft} != noise PSD n_fft {w.n_fft}"
        )
    if np.any(w.bins <= 0.0):
        raise InvalidArgument("noise PSD has non-positive bins (degenerate calibration)")
    return Periodogram(p.bins / w.bins, p.n_fft, p.n_avg)
