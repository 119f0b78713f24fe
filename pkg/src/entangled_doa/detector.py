"""Gap-threshold detection of distorted sensors from ``|gamma_hat|``."""

from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, check_vector


@dataclass
class DetectionReport:
    num_distorted: int
    distorted_indices: np.ndarray
    sorted_magnitudes: np.ndarray
    gap_threshold: float

    @property
    def mask(self):
        m = np.zeros(self.sorted_magnitudes.size, dtype=bool)
        m[self.distorted_indices] = True
        return m


def detect(gamma_hat, h_factor=10.0):
    """Flag the sensors above the first large jump in sorted ``|gamma_hat|``.

    Magnitudes are sorted ascending; the reference gap is the difference of
    the two smallest and the threshold is ``h = h_factor * d``.  Scanning the
    consecutive gaps from the third entry upward, the first gap ``>= h`` marks
    where the distorted sensors begin.  ``h`` is floored at
    ``1e-12 * max(1, largest magnitude)`` so an all-zero estimate reports no
    distortion.  At most ``M - 2`` sensors can be flagged.

    Returns
    -------
    DetectionReport
        ``distorted_indices`` are 0-based and sorted.
    """
    gamma_hat = check_vector(gamma_hat, name="gamma_hat")
    M = gamma_hat.size
    if M < 3:
        raise DomainError(f"detection needs at least 3 sensors, got {M}")
    if not h_factor > 0:
        raise DomainError("h_factor must be positive")
    mags = np.abs(gamma_hat)
    order = np.argsort(mags, kind="stable")
    s = mags[order]
    h = max(h_factor * (s[1] - s[0]), 1e-12 * max(1.0, s[-1]))

    i_fail = M  # 0-based position of the first flagged entry; M means none
    gaps = np.diff(s)[1:]  # gaps s[i] - s[i-1] for i = 2..M-1 (0-based)
    hits = np.flatnonzero(gaps >= h)
    if hits.size:
        i_fail = int(hits[0]) + 2
    n_fail = M - i_fail
    return DetectionReport(
        num_distorted=n_fail,
        distorted_indices=np.sort(order[i_fail:]),
        sorted_magnitudes=s,
        gap_threshold=float(h),
    )
