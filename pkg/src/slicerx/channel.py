"""Transmitter MZM, linear fiber propagation and ASE loading at a target OSNR."""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants

from ._validation import InvalidArgumentError
from .sigkit import Waveform, freq_filter, rrc_taps, shape_symbols

__all__ = [
    "ook_drive",
    "FiberParams",
    "MzmParams",
    "mzm_modulate",
    "propagate",
    "amplify_to_osnr",
    "carrier_to_signal_ratio",
    "calibrate_mod_index",
    "fading_notch_ghz",
    "OSNR_REF_BANDWIDTH",
]

OSNR_REF_BANDWIDTH = 12.5e9  # Hz, i.e. 0.1 nm at 1550 nm


def ook_drive(symbols, sps, sample_rate, rolloff=0.1, span=32, crest_factor=1.6):
    """RRC-shaped electrical drive for 0/1 symbols, scaled into [-1, 1].

    Symbol 1 maps to drive -1, the high-transmission end of the transfer
    function in :func:`mzm_modulate`, so the detected intensity follows the
    bits. The shaped drive is scaled so that ``crest_factor`` standard
    deviations reach full scale; the rare overshoots beyond that are clipped.
    """
    symbols = np.asarray(symbols, dtype=float)
    d = shape_symbols(1.0 - 2.0 * symbols, rrc_taps(rolloff, sps, span), sps, sample_rate).samples
    std = d.std()
    if std > 0:
        d = d / (crest_factor * std)
    return Waveform(np.clip(d, -1.0, 1.0), sample_rate)


@dataclass(frozen=True)
class FiberParams:
    """Standard single-mode fiber; defaults are typical SMF-28 values."""

    length_km: float = 0.0
    dispersion_ps_nm_km: float = 17.0
    loss_db_per_km: float = 0.2
    ref_wavelength_nm: float = 1550.0

    def __post_init__(self):
        if self.length_km < 0:
            raise InvalidArgumentError("fiber length must be >= 0")
        if self.loss_db_per_km < 0:
            raise InvalidArgumentError("fiber loss must be >= 0")

    @property
    def beta2(self):
        """Group-velocity dispersion in s^2/m."""
        D = self.dispersion_ps_nm_km * 1e-6  # ps/(nm km) -> s/m^2
        lam = self.ref_wavelength_nm * 1e-9
        return -D * lam**2 / (2 * np.pi * constants.c)


@dataclass(frozen=True)
class MzmParams:
    """Push-pull MZM biased at quadrature.

    ``mod_index`` scales the drive swing; 1 maps drive +/-1 onto full
    extinction and full transmission.
    """

    mod_index: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.mod_index <= 1.0:
            raise InvalidArgumentError(f"mod_index must lie in (0, 1], got {self.mod_index}")


def mzm_modulate(drive, p):
    """Map a real drive in [-1, 1] onto the optical field envelope.

    E(t) = cos(pi/4 + (pi/4) * mod_index * drive(t)). Drive values outside
    [-1, 1] are clipped with a warning.
    """
    d = np.real(drive.samples)
    if np.max(np.abs(d)) > 1.0:
        warnings.warn("MZM drive exceeds [-1, 1]; clipping", RuntimeWarning, stacklevel=2)
        d = np.clip(d, -1.0, 1.0)
    field = np.cos(np.pi / 4 + (np.pi / 4) * p.mod_index * d)
    return Waveform(field.astype(complex), drive.sample_rate)


def propagate(w, f):
    """Linear fiber: chromatic dispersion followed by span loss.

    The dispersion all-pass is H(f) = exp(+j * 2 pi^2 * beta2 * L * f^2), with
    f the baseband offset from the carrier in Hz, applied with the numpy FFT
    sign convention (forward transform uses exp(-j 2 pi f t)).
    """
    if f.length_km == 0:
        return w
    L = f.length_km * 1e3
    phase_coeff = 2 * np.pi**2 * f.beta2 * L
    out = freq_filter(w, lambda fr: np.exp(1j * phase_coeff * fr**2))
    gain = 10 ** (-f.loss_db_per_km * f.length_km / 20)
    return out.replace(out.samples * gain)


def amplify_to_osnr(w, osnr_db, seed, ref_bandwidth=OSNR_REF_BANDWIDTH):
    """Normalize ``w`` to unit power and add white ASE at ``osnr_db``.

    Noise is circular complex Gaussian, flat over the simulated band, with
    power ``1 / 10**(osnr_db/10)`` inside ``ref_bandwidth``. ``osnr_db=inf``
    disables the noise.
    """
    power = w.power
    if power <= 0:
        raise InvalidArgumentError("cannot set OSNR on a zero-power signal")
    x = w.samples / np.sqrt(power)
    if math.isinf(osnr_db) and osnr_db > 0:
        return w.replace(x)
    noise_psd = 10 ** (-osnr_db / 10) / ref_bandwidth  # per Hz, relative to unit signal power
    sigma2 = noise_psd * w.sample_rate
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)
    return w.replace(x + np.sqrt(sigma2 / 2) * noise)


def carrier_to_signal_ratio(w, carrier_halfwidth=150e6):
    """Carrier-to-signal power ratio in dB, from the periodogram.

    The carrier is everything within ``carrier_halfwidth`` of 0 Hz.
    """
    spec = np.abs(np.fft.fft(w.samples)) ** 2
    in_carrier = np.abs(w.freqs()) <= carrier_halfwidth
    carrier = spec[in_carrier].sum()
    sidebands = spec[~in_carrier].sum()
    return 10 * np.log10(carrier / sidebands)


def calibrate_mod_index(drive, target_cspr_db=6.0, carrier_halfwidth=150e6, tol=1e-4):
    """Bisect the MZM modulation index until the output CSPR hits the target."""

    def cspr(m):
        return carrier_to_signal_ratio(mzm_modulate(drive, MzmParams(m)), carrier_halfwidth)

    lo, hi = 1e-4, 1.0
    if cspr(hi) > target_cspr_db:
        raise InvalidArgumentError(f"CSPR {target_cspr_db} dB is below what full swing reaches")
    # CSPR falls monotonically with modulation depth
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cspr(mid) > target_cspr_db:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fading_notch_ghz(fiber, order=1):
    """Analytic frequency of the k-th power-fading notch for a DSB IM-DD link."""
    D = fiber.dispersion_ps_nm_km * 1e-6
    lam = fiber.ref_wavelength_nm * 1e-9
    L = fiber.length_km * 1e3
    return math.sqrt((2 * order - 1) * constants.c / (2 * lam**2 * D * L)) / 1e9
