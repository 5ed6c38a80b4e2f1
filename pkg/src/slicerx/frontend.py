"""Receiver front end: WSS slicing, photodiodes, scope and coarse alignment."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from ._validation import InvalidArgumentError, check_count, check_positive
from .sigkit import Waveform, freq_filter, resample

__all__ = [
    "SliceSpec",
    "SliceBank",
    "DetectedChannels",
    "SyncError",
    "default_bank",
    "contiguous_bank",
    "broadband_bank",
    "wss_apply",
    "photodetect",
    "adc",
    "synchronize",
    "deskew",
]


class SyncError(RuntimeError):
    """Cross-correlation peak too weak to trust the recovered lag."""


@dataclass(frozen=True)
class SliceSpec:
    """Super-Gaussian optical bandpass; offsets and widths in GHz.

    ``order=math.inf`` gives a brick-wall passband.
    """

    center_ghz: float
    bandwidth_ghz: float
    order: float = 4.0

    def __post_init__(self):
        check_positive(self.bandwidth_ghz, "bandwidth_ghz")
        if not self.order >= 1:
            raise InvalidArgumentError(f"shape order must be >= 1, got {self.order}")

    def response(self, freqs):
        x = (np.asarray(freqs) - self.center_ghz * 1e9) / (self.bandwidth_ghz * 1e9 / 2)
        if math.isinf(self.order):
            return (np.abs(x) <= 1.0).astype(float)
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(-0.5 * np.abs(x) ** (2 * self.order))

    def to_dict(self):
        return {"center_ghz": self.center_ghz, "bw_ghz": self.bandwidth_ghz, "order": self.order}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["center_ghz"]), float(d["bw_ghz"]), float(d.get("order", 4.0)))


@dataclass(frozen=True)
class SliceBank:
    """One to four slices, numbered from 1 in ascending frequency."""

    slices: tuple

    def __post_init__(self):
        slices = tuple(self.slices)
        if not 1 <= len(slices) <= 4:
            raise InvalidArgumentError(f"a bank holds 1..4 slices, got {len(slices)}")
        centers = [s.center_ghz for s in slices]
        if any(b <= a for a, b in zip(centers, centers[1:])):
            raise InvalidArgumentError("slice centers must be distinct and ascending")
        object.__setattr__(self, "slices", slices)

    def __len__(self):
        return len(self.slices)

    def subset(self, indices):
        """Sub-bank from 1-based slice indices."""
        try:
            return SliceBank(tuple(self.slices[i - 1] for i in sorted(indices)))
        except IndexError:
            raise InvalidArgumentError(f"slice subset {indices} out of range for {len(self)} slices") from None


def default_bank():
    """Four Gaussian slices: 6 GHz wide at +/-3 GHz, 12 GHz wide at +/-12 GHz.

    The inner slices straddle the carrier closely, so each one holds a share
    of it and detects its sub-band as a linear, fading-free beat against the
    carrier. The smooth Gaussian skirts leak carrier into the outer slices
    for the same reason.
    """
    return SliceBank(
        (SliceSpec(-12.0, 12.0, 1.0), SliceSpec(-3.0, 6.0, 1.0), SliceSpec(3.0, 6.0, 1.0), SliceSpec(12.0, 12.0, 1.0))
    )


def contiguous_bank(half_band_ghz=17.6, order=4.0):
    """Four equal, contiguous super-Gaussian slices tiling +/-``half_band_ghz``."""
    bw = half_band_ghz / 2
    return SliceBank(tuple(SliceSpec(c * bw / 2, bw, order) for c in (-3, -1, 1, 3)))


def broadband_bank(bandwidth_ghz=50.0):
    """Single wide slice for the one-photodiode receiver (out-of-band noise removal)."""
    return SliceBank((SliceSpec(0.0, bandwidth_ghz, 4.0),))


@dataclass(frozen=True)
class DetectedChannels:
    """Per-photodiode electrical signals, shape (n_channels, n_samples)."""

    channels: np.ndarray
    sample_rate: float

    def __post_init__(self):
        ch = np.array(self.channels, dtype=float, copy=True)
        if ch.ndim == 1:
            ch = ch[None, :]
        if ch.ndim != 2 or ch.shape[1] == 0:
            raise InvalidArgumentError("channels must be a non-empty (n_channels, n_samples) array")
        if not np.all(np.isfinite(ch)):
            raise InvalidArgumentError("channels contain NaN or Inf")
        check_positive(self.sample_rate, "sample_rate")
        ch.setflags(write=False)
        object.__setattr__(self, "channels", ch)

    @property
    def n_channels(self):
        return self.channels.shape[0]

    @property
    def n_samples(self):
        return self.channels.shape[1]

    @classmethod
    def from_waveforms(cls, waveforms):
        rates = {w.sample_rate for w in waveforms}
        if len(rates) != 1:
            raise InvalidArgumentError("channels must share one sample rate")
        return cls(np.vstack([np.real(w.samples) for w in waveforms]), rates.pop())

    def select(self, indices):
        """Keep the given 0-based channels."""
        return DetectedChannels(self.channels[list(indices)], self.sample_rate)

    def map(self, fn):
        return DetectedChannels.from_waveforms(
            [fn(Waveform(c, self.sample_rate)) for c in self.channels]
        )


def wss_apply(w, bank):
    """Filter ``w`` through every slice of ``bank``; returns one field per slice."""
    nyquist_ghz = w.sample_rate / 2e9
    out = []
    for s in bank.slices:
        if abs(s.center_ghz) >= nyquist_ghz:
            raise InvalidArgumentError(
                f"slice centered at {s.center_ghz} GHz lies outside the +/-{nyquist_ghz} GHz simulated band"
            )
        out.append(freq_filter(w, s.response))
    return out


def _analog_response(b, a):
    def response(freqs):
        _, h = signal.freqs(b, a, worN=2 * np.pi * np.asarray(freqs))
        return h

    return response


def photodetect(field, pd_bandwidth_ghz=40.0, responsivity=1.0):
    """Square-law detection followed by a 4th-order Bessel lowpass (3 dB at ``pd_bandwidth_ghz``)."""
    check_positive(pd_bandwidth_ghz, "pd_bandwidth_ghz")
    current = Waveform(responsivity * np.abs(field.samples) ** 2, field.sample_rate)
    b, a = signal.bessel(4, 2 * np.pi * pd_bandwidth_ghz * 1e9, btype="low", analog=True, norm="mag")
    return freq_filter(current, _analog_response(b, a))


def adc(ch, analog_bandwidth_ghz=33.0, out_rate=None, dsp_rate=None):
    """Scope model: 4th-order Butterworth front end, sampling at ``out_rate``,
    then offline resampling to ``dsp_rate``.

    A bandwidth at or beyond the input Nyquist frequency bypasses the front-end
    filter. ``out_rate``/``dsp_rate`` default to the input rate (no rate change).
    """
    out_rate = out_rate or ch.sample_rate
    dsp_rate = dsp_rate or ch.sample_rate
    if out_rate > ch.sample_rate * (1 + 1e-12):
        raise InvalidArgumentError("scope rate cannot exceed the simulation rate")
    y = ch
    if analog_bandwidth_ghz * 1e9 < ch.sample_rate / 2:
        b, a = signal.butter(4, 2 * np.pi * analog_bandwidth_ghz * 1e9, btype="low", analog=True)
        y = freq_filter(y, _analog_response(b, a))
    y = resample(y, out_rate)
    return resample(y, dsp_rate)


def _tx_reference(tx_symbols, sps, n):
    # NRZ pattern centred on each symbol's sample k*sps
    ref = np.roll(np.repeat(np.asarray(tx_symbols, dtype=float), sps), -(sps // 2))
    ref = np.resize(ref, n)
    return ref - ref.mean()


def _correlate(x, ref):
    x = x - x.mean()
    return np.fft.irfft(np.fft.rfft(x) * np.conj(np.fft.rfft(ref)), n=x.size)


def synchronize(rx, tx_symbols, sps, min_peak_ratio=3.0):
    """Coarse integer-sample alignment of ``rx`` to the transmitted symbols.

    Each channel is circularly cross-correlated with the NRZ intensity
    pattern of ``tx_symbols``; the channel whose peak stands highest above
    its sidelobes sets the lag, and every channel is advanced by it.

    Returns
    -------
    (DetectedChannels, int)
        Aligned channels and the lag in samples.

    Raises
    ------
    SyncError
        If the best peak is below ``min_peak_ratio`` times the RMS sidelobe.
    """
    sps = check_count(sps, "sps")
    tx_symbols = np.asarray(tx_symbols)
    if rx.n_samples < tx_symbols.size * sps:
        raise InvalidArgumentError("received block shorter than the transmitted sequence")
    ref = _tx_reference(tx_symbols, sps, rx.n_samples)

    best_ratio, best_lag = -np.inf, 0
    all_lags = np.arange(rx.n_samples)
    for ch in rx.channels:
        lag, ratio = _peak(_correlate(ch, ref), all_lags, 4 * sps)
        if ratio > best_ratio:
            best_ratio, best_lag = ratio, lag
    if best_ratio < min_peak_ratio:
        raise SyncError(f"correlation peak only {best_ratio:.2f}x the RMS sidelobe")
    aligned = np.roll(rx.channels, -best_lag, axis=1)
    return DetectedChannels(aligned, rx.sample_rate), best_lag


def _peak(corr, lags, guard):
    lag = int(lags[np.argmax(corr[lags % corr.size])])
    mask = np.ones(corr.size, dtype=bool)
    mask[np.arange(lag - guard, lag + guard + 1) % corr.size] = False
    sidelobe = np.sqrt(np.mean(corr[mask] ** 2))
    return lag, (corr[lag % corr.size] / sidelobe if sidelobe > 0 else np.inf)


def deskew(rx, tx_symbols, sps, max_skew_symbols=8, min_peak_ratio=10.0):
    """Align each channel on its own after :func:`synchronize`.

    Dispersion delays the sub-bands of a sliced receiver by different
    amounts. Each channel whose correlation peak within
    ``+/-max_skew_symbols`` clears ``min_peak_ratio`` is advanced by its own
    residual lag; weaker channels (slices holding little carrier, whose
    intensity barely tracks the data) keep the common alignment.

    Returns
    -------
    (DetectedChannels, numpy.ndarray)
        Deskewed channels and the per-channel residual lags in samples.
    """
    sps = check_count(sps, "sps")
    ref = _tx_reference(tx_symbols, sps, rx.n_samples)
    window = np.arange(-max_skew_symbols * sps, max_skew_symbols * sps + 1)
    lags = np.zeros(rx.n_channels, dtype=int)
    out = np.array(rx.channels)
    for k, ch in enumerate(rx.channels):
        lag, ratio = _peak(_correlate(ch, ref), window, 4 * sps)
        if ratio >= min_peak_ratio:
            lags[k] = lag
            out[k] = np.roll(ch, -lag)
    return DetectedChannels(out, rx.sample_rate), lags
