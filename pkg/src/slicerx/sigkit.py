"""Waveform primitives: bits, RRC shaping, frequency-domain filtering, resampling.

Every function here is pure. Waveforms are immutable once built.
"""

import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import fft as sfft
from scipy import signal

from ._validation import InvalidArgumentError, check_count, check_finite, check_positive

__all__ = [
    "Waveform",
    "BitSequence",
    "FirFilter",
    "generate_bits",
    "rrc_taps",
    "shape_symbols",
    "freq_filter",
    "resample",
    "write_cwav",
    "read_cwav",
]

CWAV_MAGIC = b"CWAV"
CWAV_VERSION = 1
_CWAV_HEADER = struct.Struct("<4sId")
MAX_RESAMPLE_DENOMINATOR = 10**6


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled signal.

    Optical fields are complex; detected electrical signals are real. Both
    share this container so the filtering kernels work on either.

    Parameters
    ----------
    samples : array_like
        Signal values. Must be finite and non-empty.
    sample_rate : float
        Sampling rate in Hz.
    """

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        check_positive(self.sample_rate, "sample_rate")
        samples = np.array(self.samples, copy=True)
        if samples.dtype.kind not in "fc":
            samples = samples.astype(float)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidArgumentError("waveform must be a non-empty 1-D sequence")
        check_finite(samples, "samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def is_real(self):
        return self.samples.dtype.kind == "f"

    @property
    def energy(self):
        return float(np.sum(np.abs(self.samples) ** 2))

    @property
    def power(self):
        return float(np.mean(np.abs(self.samples) ** 2))

    def freqs(self):
        return sfft.fftfreq(len(self), d=1.0 / self.sample_rate)

    def replace(self, samples):
        return Waveform(samples, self.sample_rate)


@dataclass(frozen=True)
class BitSequence:
    bits: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or not np.isin(bits, (0, 1)).all():
            raise InvalidArgumentError("bits must be a 1-D sequence of 0/1 values")
        bits = bits.astype(np.uint8)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def __len__(self):
        return self.bits.size

    def symbols(self):
        """OOK amplitude mapping: bit 0 -> 0.0 (light off), bit 1 -> 1.0."""
        return self.bits.astype(float)


@dataclass(frozen=True)
class FirFilter:
    taps: np.ndarray
    group_delay: float = field(default=None)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        check_finite(taps, "taps")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        if self.group_delay is None:
            object.__setattr__(self, "group_delay", (taps.size - 1) / 2)

    def __len__(self):
        return self.taps.size


def generate_bits(n, seed):
    """Draw ``n`` i.i.d. uniform bits from a PCG64 stream seeded with ``seed``."""
    n = check_count(n, "n")
    rng = np.random.default_rng(seed)
    return BitSequence(rng.integers(0, 2, size=n, dtype=np.uint8), seed=seed)


def rrc_taps(rolloff, sps, span=32):
    """Unit-energy root-raised-cosine FIR filter.

    Parameters
    ----------
    rolloff : float
        Excess bandwidth factor in [0, 1].
    sps : int
        Samples per symbol.
    span : int
        Filter length in symbols; the filter has ``span * sps + 1`` taps.

    Returns
    -------
    FirFilter
    """
    if not 0.0 <= rolloff <= 1.0:
        raise InvalidArgumentError(f"rolloff must lie in [0, 1], got {rolloff}")
    sps = check_count(sps, "sps")
    span = check_count(span, "span", minimum=2)

    n_taps = span * sps + 1
    t = (np.arange(n_taps) - (n_taps - 1) / 2) / sps  # in symbol periods
    beta = rolloff
    h = np.empty(n_taps)
    for i, ti in enumerate(t):
        if ti == 0.0:
            h[i] = 1.0 - beta + 4.0 * beta / np.pi
        elif beta > 0 and np.isclose(abs(ti), 1.0 / (4.0 * beta)):
            h[i] = (beta / np.sqrt(2.0)) * (
                (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
                + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
            )
        else:
            num = np.sin(np.pi * ti * (1.0 - beta)) + 4.0 * beta * ti * np.cos(np.pi * ti * (1.0 + beta))
            den = np.pi * ti * (1.0 - (4.0 * beta * ti) ** 2)
            h[i] = num / den
    h /= np.sqrt(np.sum(h**2))
    return FirFilter(h)


def shape_symbols(symbols, filt, sps, sample_rate=1.0):
    """Zero-stuff ``symbols`` by ``sps`` and convolve with ``filt``.

    The filter's group delay is removed, so symbol ``k`` peaks at sample
    ``k * sps`` and the output holds exactly ``len(symbols) * sps`` samples.
    """
    symbols = np.asarray(symbols)
    if symbols.size == 0:
        raise InvalidArgumentError("cannot shape an empty symbol sequence")
    sps = check_count(sps, "sps")
    up = np.zeros(symbols.size * sps, dtype=np.result_type(symbols, float))
    up[::sps] = symbols
    full = signal.fftconvolve(up, filt.taps) if up.size > 256 else np.convolve(up, filt.taps)
    delay = int(round(filt.group_delay))
    return Waveform(full[delay : delay + up.size], sample_rate)


def freq_filter(w, response):
    """Circularly filter ``w`` by multiplication in the frequency domain.

    ``response`` is either a callable mapping a frequency grid in Hz (in
    ``fftfreq`` order, covering [-Fs/2, Fs/2)) to complex gains, or an
    array already sampled on that grid. Real inputs return real outputs;
    the response is then expected to be Hermitian.
    """
    f = w.freqs()
    H = response(f) if callable(response) else np.asarray(response)
    if H.shape != f.shape:
        raise InvalidArgumentError(f"response has shape {H.shape}, expected {f.shape}")
    y = sfft.ifft(sfft.fft(w.samples) * H)
    if w.is_real:
        y = y.real
    return Waveform(y, w.sample_rate)


def _rate_ratio(source_rate, target_rate):
    ratio = Fraction(target_rate / source_rate).limit_denominator(MAX_RESAMPLE_DENOMINATOR)
    if abs(float(ratio) - target_rate / source_rate) > 1e-14 * target_rate / source_rate:
        raise InvalidArgumentError(
            f"rate ratio {target_rate}/{source_rate} needs a denominator above {MAX_RESAMPLE_DENOMINATOR}"
        )
    return ratio.numerator, ratio.denominator


def resample(w, target_rate):
    """Resample ``w`` to ``target_rate`` by a rational factor up/down.

    When the output length ``len(w) * up / down`` is an integer the signal is
    treated as periodic and resampled spectrally: the spectrum is truncated
    (anti-alias) or zero-padded (anti-image) at the lower Nyquist frequency.
    Otherwise a Kaiser-windowed polyphase filter is used.
    """
    check_positive(target_rate, "target_rate")
    up, down = _rate_ratio(w.sample_rate, target_rate)
    if up == down:
        return w
    n_in = len(w)
    x = w.samples
    if (n_in * up) % down == 0:
        n_out = n_in * up // down
        y = signal.resample(x, n_out)
    else:
        y = signal.resample_poly(x, up, down, window=("kaiser", 10.0))
    if w.is_real:
        y = np.real(y)
    return Waveform(y, w.sample_rate * up / down)


def write_cwav(path, w):
    """Dump a waveform as little-endian CWAV: header then interleaved (re, im) f64."""
    data = np.empty(2 * len(w), dtype="<f8")
    data[0::2] = np.real(w.samples)
    data[1::2] = np.imag(w.samples)
    with open(path, "wb") as fh:
        fh.write(_CWAV_HEADER.pack(CWAV_MAGIC, CWAV_VERSION, w.sample_rate))
        fh.write(data.tobytes())


def read_cwav(path):
    with open(path, "rb") as fh:
        header = fh.read(_CWAV_HEADER.size)
        if len(header) != _CWAV_HEADER.size:
            raise InvalidArgumentError(f"{path}: truncated CWAV header")
        magic, version, rate = _CWAV_HEADER.unpack(header)
        if magic != CWAV_MAGIC:
            raise InvalidArgumentError(f"{path}: bad magic {magic!r}")
        if version != CWAV_VERSION:
            raise InvalidArgumentError(f"{path}: unsupported CWAV version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size % 2:
        raise InvalidArgumentError(f"{path}: odd number of f64 values")
    return Waveform(data[0::2] + 1j * data[1::2], rate)
