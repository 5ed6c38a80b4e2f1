"""Hard decisions, bit-error counting and FEC-threshold classification."""

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from ._validation import InvalidArgumentError

__all__ = ["KP4_THRESHOLD", "BerResult", "hard_decide", "count_ber", "wilson_interval", "q_function"]

KP4_THRESHOLD = 2.24e-4


@dataclass(frozen=True)
class BerResult:
    errors: int
    bits: int
    ber: float
    ci95_low: float
    ci95_high: float
    below_kp4: bool

    def to_dict(self):
        return asdict(self)


def q_function(x):
    """Gaussian tail probability P(Z > x)."""
    return 0.5 * special.erfc(np.asarray(x) / math.sqrt(2))


def wilson_interval(errors, n, z=1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = errors / n
    denom = 1 + z**2 / n
    center = (p + z**2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    # at k = 0 or k = n one bound is exact; cancellation would leave it off by an ulp
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == n else min(1.0, center + half)
    return lo, hi


def hard_decide(soft, training_soft, training_bits):
    """Slice soft values at the midpoint of the class-conditional training means.

    Parameters
    ----------
    soft : array_like
        Equalizer outputs to decide on.
    training_soft, training_bits : array_like
        Equalizer outputs over the training prefix and the bits that were sent.

    Returns
    -------
    numpy.ndarray of uint8
    """
    training_soft = np.asarray(training_soft, dtype=float)
    training_bits = np.asarray(training_bits)
    if training_soft.size == 0 or training_soft.shape != training_bits.shape:
        raise InvalidArgumentError("training soft values and bits must be non-empty and equal length")
    ones = training_soft[training_bits == 1]
    zeros = training_soft[training_bits == 0]
    if ones.size == 0 or zeros.size == 0:
        raise InvalidArgumentError("training data must contain both bit values")
    m1, m0 = ones.mean(), zeros.mean()
    threshold = 0.5 * (m1 + m0)
    soft = np.asarray(soft, dtype=float)
    # an equalizer may legitimately learn an inverted mapping
    decisions = soft > threshold if m1 > m0 else soft < threshold
    return decisions.astype(np.uint8)


def count_ber(decisions, truth, skip=0):
    """Exact bit-error count after discarding the first ``skip`` bits."""
    decisions = np.asarray(getattr(decisions, "bits", decisions))
    truth = np.asarray(getattr(truth, "bits", truth))
    if decisions.shape != truth.shape:
        raise InvalidArgumentError(f"length mismatch: {decisions.shape} vs {truth.shape}")
    d, t = decisions[skip:], truth[skip:]
    n = int(d.size)
    if n == 0:
        raise InvalidArgumentError("no bits left after skip")
    errors = int(np.count_nonzero(d != t))
    lo, hi = wilson_interval(errors, n)
    ber = errors / n
    return BerResult(errors, n, ber, lo, hi, ber < KP4_THRESHOLD)
