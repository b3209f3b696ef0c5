"""Offline noise-only calibration and profile persistence.

A single calibration pass over a noise capture produces everything both
detector families need: the noise PSD for frequency-domain whitening and PSD
matching, plus the noise covariance/correlation with their whitening
matrices for time-domain whitening. The profile is immutable and safe to
share across concurrent trial workers.

Profile file format (version 1): line-oriented text, '#' comments ignored,
one header `specsense-profile 1`, integer fields, then one section per array
(`noise_psd <n>` with n float lines; `s0 <p>` etc. with p lines of 2p floats,
real/imag interleaved, row-major). Floats are rendered with 17 significant
digits so a save/load round trip is bit exact.
"""

from dataclasses import dataclass

import numpy as np

from .covariance import (
    arrange_matrix,
    sample_correlation,
    scm,
    whitening_matrix,
)
from .exceptions import CalibrationError, FormatError, InvalidArgument
from .spectral import Periodogram, bartlett_periodogram

PROFILE_MAGIC = "specsense-profile"
PROFILE_VERSION = 1
WHITEN_IDENTITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CalibrationProfile:
    """Noise PSD and covariance estimates with their whitening matrices."""

    noise_psd: Periodogram
    s0: np.ndarray
    r0: np.ndarray
    b_whiten: np.ndarray
    k_whiten: np.ndarray
    n_samples_used: int

    def __post_init__(self):
        if np.any(self.noise_psd.bins <= 0.0):
            raise CalibrationError("noise PSD has empty bins; use more averages")
        self.validate()

    @property
    def p(self):
        return self.s0.shape[0]

    def validate(self):
        """Check the whitening identities B S0 B^H = I and K R0 K^H = I."""
        for name, w, m in (
            ("b_whiten/s0", self.b_whiten, self.s0),
            ("k_whiten/r0", self.k_whiten, self.r0),
        ):
            ident = w @ m @ w.conj().T
            err = float(np.max(np.abs(ident - np.eye(m.shape[0]))))
            if err > WHITEN_IDENTITY_TOL:
                raise CalibrationError(
                    f"whitening identity violated for {name} (max error {err:.3e})"
                )


def calibrate(noise, n_fft, n_avg, p):
    """Build a profile from a noise-only capture.

    Needs at least max(n_fft * n_avg, 10 * p^2) samples so the covariance
    estimate is comfortably positive definite. No PD repair is attempted: a
    degenerate estimate raises and the calibration must be re-run longer.
    """
    samples = noise.samples if hasattr(noise, "samples") else np.asarray(
        noise, dtype=np.complex128)
    required = max(n_fft * n_avg, 10 * p * p)
    if samples.size < required:
        raise InvalidArgument(
            f"calibration needs >= {required} samples, got {samples.size}"
        )
    noise_psd = bartlett_periodogram(samples, n_fft, n_avg)
    if np.any(noise_psd.bins <= 0.0):
        raise CalibrationError("estimated noise PSD has a zero bin")
    s0 = scm(arrange_matrix(samples, p))
    r0 = sample_correlation(s0)
    b = whitening_matrix(s0)
    k = whitening_matrix(r0)
    return CalibrationProfile(noise_psd, s0, r0, b, k, int(samples.size))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def _complex_rows(m):
    for row in np.asarray(m):
        yield " ".join(f"{_fmt(v.real)} {_fmt(v.imag)}" for v in row)


def save_profile(profile, path):
    """Write a profile as the documented version-1 text format."""
    psd = profile.noise_psd
    lines = [
        f"{PROFILE_MAGIC} {PROFILE_VERSION}",
        f"n_fft {psd.n_fft}",
        f"n_avg {psd.n_avg}",
        f"p {profile.p}",
        f"n_samples_used {profile.n_samples_used}",
        f"noise_psd {psd.n_fft}",
    ]
    lines.extend(_fmt(v) for v in psd.bins)
    for name, mat in (
        ("s0", profile.s0),
        ("r0", profile.r0),
        ("b_whiten", profile.b_whiten),
        ("k_whiten", profile.k_whiten),
    ):
        lines.append(f"{name} {mat.shape[0]}")
        lines.extend(_complex_rows(mat))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


class _LineReader:
    def __init__(self, path):
        with open(path, "r", encoding="ascii") as fh:
            raw = fh.read().splitlines()
        self.lines = [ln.strip() for ln in raw if ln.strip() and not ln.startswith("#")]
        self.pos = 0
        self.path = path

    def next(self, what):
        if self.pos >= len(self.lines):
            raise FormatError(f"{self.path}: truncated file while reading {what}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def int_field(self, name):
        line = self.next(name)
        parts = line.split()
        if len(parts) != 2 or parts[0] != name:
            raise FormatError(f"{self.path}: expected '{name} <int>', got {line!r}")
        try:
            return int(parts[1])
        except ValueError as exc:
            raise FormatError(f"{self.path}: bad integer in {line!r}") from exc

    def floats(self, what, count):
        out = []
        while len(out) < count:
            for tok in self.next(what).split():
                try:
                    out.append(float(tok))
                except ValueError as exc:
                    raise FormatError(f"{self.path}: bad float {tok!r} in {what}") from exc
        if len(out) != count:
            raise FormatError(f"{self.path}: wrong value count in {what}")
        return np.array(out)

    def section(self, name):
        line = self.next(name)
        parts = line.split()
        if len(parts) != 2 or parts[0] != name:
            raise FormatError(f"{self.path}: expected section '{name}', got {line!r}")
        try:
            return int(parts[1])
        except ValueError as exc:
            raise FormatError(f"{self.path}: bad section size in {line!r}") from exc


def load_profile(path):
    """Read a saved profile, validating format and all invariants."""
    rd = _LineReader(path)
    header = rd.next("header").split()
    if len(header) != 2 or header[0] != PROFILE_MAGIC:
        raise FormatError(f"{path}: not a specsense profile")
    if header[1] != str(PROFILE_VERSION):
        raise FormatError(f"{path}: unsupported profile version {header[1]}")
    n_fft = rd.int_field("n_fft")
    n_avg = rd.int_field("n_avg")
    p = rd.int_field("p")
    n_used = rd.int_field("n_samples_used")

    count = rd.section("noise_psd")
    if count != n_fft:
        raise FormatError(f"{path}: noise_psd size {count} != n_fft {n_fft}")
    psd_bins = rd.floats("noise_psd", n_fft)

    mats = {}
    for name in ("s0", "r0", "b_whiten", "k_whiten"):
        dim = rd.section(name)
        if dim != p:
            raise FormatError(f"{path}: {name} dimension {dim} != p {p}")
        flat = rd.floats(name, 2 * p * p)
        mats[name] = (flat[0::2] + 1j * flat[1::2]).reshape(p, p)
    if rd.pos != len(rd.lines):
        raise FormatError(f"{path}: trailing data after profile")

    try:
        psd = Periodogram(psd_bins, n_fft, n_avg)
        return CalibrationProfile(
            psd, mats["s0"], mats["r0"], mats["b_whiten"], mats["k_whiten"], n_used
        )
    except (InvalidArgument, CalibrationError) as exc:
        raise type(exc)(f"{path}: {exc}") from exc
