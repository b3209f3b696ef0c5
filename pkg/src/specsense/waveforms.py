"""Scenario waveform generation.

Everything a Monte Carlo trial needs on the signal side: an OFDM waveform to
detect, white and colored circularly-symmetric complex Gaussian noise, SNR
scaling, and the per-trial noise-power fluctuation. All generators are pure
given an explicit ``numpy.random.Generator``, so trials can run in parallel
when each one owns a stream derived from (master seed, trial index).
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidArgument

OFDM_SUBCARRIERS = 64
OFDM_CP_FRACTION = 4  # cyclic prefix = 1/4 of the symbol body


@dataclass(frozen=True, eq=False)
class IqBuffer:
    """Complex baseband samples with sample-rate metadata.

    samples are dimensionless amplitudes; sample_rate is informational and
    defaults to 1.0 so frequencies elsewhere are fractions of it.
    """

    samples: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.samples, dtype=np.complex128)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidArgument("IqBuffer needs a non-empty 1-d sample vector")
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise InvalidArgument("IqBuffer samples must be finite")
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True, eq=False)
class NoisePsdShape:
    """Relative noise PSD at natural-order DFT bin frequencies.

    Strictly positive, unit mean (so the shape carries no power of its own);
    use :meth:`from_profile` to normalize an arbitrary positive profile.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 1:
            raise InvalidArgument("PSD shape must be a non-empty 1-d vector")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            raise InvalidArgument("PSD shape values must be finite and > 0")
        mean = vals.mean()
        if abs(mean - 1.0) > 1e-9:
            raise InvalidArgument(
                f"PSD shape must have unit mean (got {mean!r}); "
                "use NoisePsdShape.from_profile to normalize"
            )
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_profile(cls, values):
        vals = np.asarray(values, dtype=np.float64)
        if vals.size == 0 or np.any(vals <= 0.0) or not np.all(np.isfinite(vals)):
            raise InvalidArgument("profile values must be finite and > 0")
        return cls(vals / vals.mean())

    def __len__(self):
        return self.values.size


def default_lowpass_shape(n_fft=128):
    """Decimation-filter-like lowpass PSD shape.

    Flat over the central 60% of the band, raised-cosine roll-off (in dB)
    down to -20 dB at the band edges |f| = 0.5.
    """
    freqs = np.fft.fftfreq(n_fft)
    gain_db = np.zeros(n_fft)
    t = (np.abs(freqs) - 0.3) / 0.2
    roll = t > 0.0
    gain_db[roll] = -10.0 * (1.0 - np.cos(np.pi * t[roll]))
    return NoisePsdShape.from_profile(10.0 ** (gain_db / 10.0))


@dataclass(frozen=True)
class ScenarioConfig:
    """One detection scenario: sample count, oversampling, SNR, noise model.

    band is (f_low, f_high) as fractions of the sample rate; None means the
    centered band of width 1/osf that the OFDM generator occupies.
    """

    n_samples: int
    osf: int
    snr_db: float
    band: tuple = None
    noise_model: str = "white"
    psd_shape: NoisePsdShape = field(default=None, hash=False, compare=False)
    uncertainty_db: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidArgument("n_samples must be >= 1")
        if self.osf < 1:
            raise InvalidArgument("osf must be a positive integer")
        if self.uncertainty_db < 0.0:
            raise InvalidArgument("uncertainty_db must be >= 0")
        if self.noise_model not in ("white", "colored"):
            raise InvalidArgument(f"unknown noise model {self.noise_model!r}")
        f_low, f_high = self.band if self.band is not None else self.default_band()
        if not (-0.5 <= f_low < f_high <= 0.5):
            raise InvalidArgument(f"invalid band ({f_low}, {f_high})")
        object.__setattr__(self, "band", (float(f_low), float(f_high)))

    def default_band(self):
        half = 0.5 / self.osf
        return (-half, half)

    def shape_or_default(self):
        if self.psd_shape is not None:
            return self.psd_shape
        return default_lowpass_shape()


def gen_white_noise(n, variance, rng):
    """n circularly-symmetric complex Gaussian samples, E|x|^2 = variance."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    if variance <= 0.0:
        raise InvalidArgument("variance must be > 0")
    scale = np.sqrt(variance / 2.0)
    samples = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return IqBuffer(samples)


def gen_colored_noise(n, shape, variance, rng):
    """Correlated Gaussian noise whose block PSD follows ``shape``.

    White blocks of length len(shape) are shaped in the frequency domain by
    sqrt(shape) and concatenated; ceil(n / len(shape)) blocks are generated
    and the tail truncated. Unit-mean shape keeps E|x|^2 = variance; the
    Bartlett periodogram of the output converges to variance * shape.
    """
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    if variance <= 0.0:
        raise InvalidArgument("variance must be > 0")
    if not isinstance(shape, NoisePsdShape):
        shape = NoisePsdShape(np.asarray(shape, dtype=np.float64))
    block = len(shape)
    n_blocks = -(-n // block)
    white = gen_white_noise(n_blocks * block, variance, rng).samples
    spectra = np.fft.fft(white.reshape(n_blocks, block), axis=1)
    spectra *= np.sqrt(shape.values)
    shaped = np.fft.ifft(spectra, axis=1).ravel()
    return IqBuffer(shaped[:n])


def gen_ofdm(n, osf, rng):
    """Unit-average-power OFDM baseband waveform oversampled by ``osf``.

    64 subcarriers carrying independent uniform QPSK symbols occupy the
    central 1/osf of the Nyquist band (grid indices -32..31 of the length
    64*osf IFFT); cyclic prefix is a quarter symbol. Symbols are generated
    until n samples are available, then truncated.
    """
    if osf < 1:
        raise InvalidArgument("osf must be >= 1")
    if n < osf:
        raise InvalidArgument("n must be >= osf")
    n_sc = OFDM_SUBCARRIERS
    ifft_len = n_sc * osf
    cp = ifft_len // OFDM_CP_FRACTION
    sym_len = ifft_len + cp
    n_syms = -(-n // sym_len)

    # QPSK symbols on the centered carriers, unit magnitude
    bits = rng.integers(0, 4, size=(n_syms, n_sc))
    const = np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * bits))

    grid = np.zeros((n_syms, ifft_len), dtype=np.complex128)
    carriers = (np.arange(-n_sc // 2, n_sc // 2)) % ifft_len
    grid[:, carriers] = const

    body = np.fft.ifft(grid, axis=1) * (ifft_len / np.sqrt(n_sc))
    symbols = np.concatenate([body[:, -cp:], body], axis=1)
    return IqBuffer(symbols.ravel()[:n])


def draw_noise_power(nominal, uncertainty_db, rng):
    """One noise-power draw: nominal * 10^(u/10), u ~ U[-U, +U] dB."""
    if uncertainty_db < 0.0:
        raise InvalidArgument("uncertainty_db must be >= 0")
    u = rng.uniform(-uncertainty_db, uncertainty_db)
    return float(nominal * 10.0 ** (u / 10.0))


def make_trial(config, hypothesis, rng):
    """One observation buffer under "h0" (noise only) or "h1" (signal+noise).

    The noise power for the trial is drawn once around a nominal of 1.0;
    under h1 the signal is scaled so its average power is 10^(snr_db/10)
    relative to that nominal (not the drawn value), then shifted to the
    configured band center.
    """
    if hypothesis not in ("h0", "h1"):
        raise InvalidArgument(f"hypothesis must be 'h0' or 'h1', got {hypothesis!r}")
    noise_power = draw_noise_power(1.0, config.uncertainty_db, rng)

    signal = None
    if hypothesis == "h1":
        sig = gen_ofdm(config.n_samples, config.osf, rng).samples
        sig = sig * np.sqrt(10.0 ** (config.snr_db / 10.0))
        f_center = 0.5 * (config.band[0] + config.band[1])
        if f_center != 0.0:
            sig = sig * np.exp(2j * np.pi * f_center * np.arange(config.n_samples))
        signal = sig

    if config.noise_model == "white":
        noise = gen_white_noise(config.n_samples, noise_power, rng).samples
    else:
        noise = gen_colored_noise(
            config.n_samples, config.shape_or_default(), noise_power, rng
        ).samples

    return IqBuffer(noise if signal is None else signal + noise)


def trial_rng(master_seed, trial_index, stream):
    """Independent per-trial generator derived from (master seed, indices).

    stream 0 is the h0 buffer, stream 1 the h1 buffer; extra stream ids are
    free for callers that need more draws tied to the same trial.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=(trial_index, stream))
    return np.random.default_rng(ss)


def measured_power(buf):
    """Sample mean of |x|^2."""
    samples = getattr(buf, "samples", buf)
    return float(np.mean(np.abs(samples) ** 2))
