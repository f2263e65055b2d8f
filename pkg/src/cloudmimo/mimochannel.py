"""Line-of-sight MIMO channel, capacity, and sub-channel correlation.

The channel between broadside uniform linear arrays is purely geometric:
every entry is a unit (or inverse-distance) gain at a phase set by the exact
antenna-pair distance, plus any cloud-induced excess phase.  Capacity is the
log-determinant of the usual equal-power allocation, and sub-channel
correlation is the normalized column coherence that cloud phase noise is
expected to erode.
"""
from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from .errors import ConfigurationError, NumericError
from .phasephysics import SPEED_OF_LIGHT, PathPhase


@dataclasses.dataclass(frozen=True)
class MimoScenario:
    """Array layout and link budget of one LoS MIMO link."""

    num_tx: int = 2
    num_rx: int = 2
    tx_spacing: float = 1.0        # transmit element spacing [m]
    rx_spacing: float = 6.0827     # receive element spacing [m]
    carrier_frequency: float = 73.5e9   # [Hz]
    snr_db: float = 20.0           # per-receive-antenna SNR [dB]
    link_distance: float = 40000.0  # distance between array centres [m]
    compensated: bool = False      # True: unit gains; False: 1/d gains

    def __post_init__(self) -> None:
        problems = []
        if self.num_tx < 1 or self.num_rx < 1:
            problems.append(
                f"array sizes must be >= 1, got {self.num_tx}x{self.num_rx}")
        if self.tx_spacing < 0.0 or self.rx_spacing < 0.0:
            problems.append("antenna spacings must be >= 0")
        if self.carrier_frequency <= 0.0:
            problems.append(
                f"carrier_frequency must be > 0, got {self.carrier_frequency}")
        if self.link_distance <= 0.0:
            problems.append(
                f"link_distance must be > 0, got {self.link_distance}")
        if problems:
            raise ConfigurationError("; ".join(problems))

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency


@dataclasses.dataclass(frozen=True)
class ChannelMatrix:
    """Complex channel entries plus the antenna-pair distances behind them."""

    entries: np.ndarray     # (Nr, Nt) complex gains
    distances: np.ndarray   # (Nr, Nt) antenna-pair distances [m]
    compensated: bool = True   # True: unit gains, no capacity normalization


def pair_distances(scenario: MimoScenario) -> np.ndarray:
    """Exact Euclidean antenna-pair distances for broadside arrays.

    Both arrays are perpendicular to the link axis and centred on it, so a
    pair's distance depends only on the link distance and the difference of
    the element offsets along the shared perpendicular.
    """
    tx_off = (np.arange(scenario.num_tx)
              - (scenario.num_tx - 1) / 2.0) * scenario.tx_spacing
    rx_off = (np.arange(scenario.num_rx)
              - (scenario.num_rx - 1) / 2.0) * scenario.rx_spacing
    delta = rx_off[:, None] - tx_off[None, :]
    return np.sqrt(scenario.link_distance ** 2 + delta ** 2)


def los_channel(scenario: MimoScenario,
                cloud_phases: PathPhase | None = None) -> ChannelMatrix:
    """Channel matrix with optional per-ray cloud phases.

    Entry (i, j) couples transmit antenna j to receive antenna i and sees
    the total phase ``2 pi d_ij / lambda + phi_cloud(i, j)``; cloud phases
    are indexed row-major to match the ray ordering of the geometry module.
    In compensated mode all gains are unity, otherwise they fall off as the
    inverse distance.
    """
    d = pair_distances(scenario)
    phase = 2.0 * np.pi * d / scenario.wavelength
    if cloud_phases is not None:
        extra = np.asarray(cloud_phases.per_ray_phase, dtype=float)
        if extra.size != d.size:
            raise ConfigurationError(
                f"cloud phases carry {extra.size} rays but the scenario has "
                f"{d.size} antenna pairs")
        phase = phase + extra.reshape(d.shape)
    gain = np.ones_like(d) if scenario.compensated else 1.0 / d
    return ChannelMatrix(entries=gain * np.exp(-1j * phase), distances=d,
                         compensated=scenario.compensated)


def capacity_bits(channel, snr_db: float) -> float:
    """Equal-power capacity in bit/s/Hz.

    Accepts a :class:`ChannelMatrix` or a bare complex matrix.  A channel
    matrix from an uncompensated scenario is first normalized to unit mean
    squared entry magnitude, so inverse-distance gains do not fold the
    free-space path loss into the capacity and the SNR keeps its average
    meaning at every distance.  Compensated channels and bare matrices are
    used as-is.
    """
    normalize = isinstance(channel, ChannelMatrix) and not channel.compensated
    h = channel.entries if isinstance(channel, ChannelMatrix) else np.asarray(channel)
    h = np.atleast_2d(h).astype(complex)
    num_rx, num_tx = h.shape
    if normalize:
        power = float(np.sum(np.abs(h) ** 2))
        if power > 0.0:
            h = h * np.sqrt(num_rx * num_tx / power)
    rho = 10.0 ** (snr_db / 10.0)
    gram = np.eye(num_rx) + (rho / num_tx) * (h @ h.conj().T)
    sign, logdet = np.linalg.slogdet(gram)
    capacity = float(np.real(sign) * logdet / np.log(2.0))
    if not np.isfinite(capacity):
        raise NumericError(f"capacity is not finite (logdet={logdet})")
    return capacity


def rayleigh_distance(scenario: MimoScenario) -> float:
    """Far-field boundary ``2 L^2 / lambda`` of the larger array aperture."""
    aperture = max((scenario.num_tx - 1) * scenario.tx_spacing,
                   (scenario.num_rx - 1) * scenario.rx_spacing)
    return 2.0 * aperture ** 2 / scenario.wavelength


def subchannel_correlation(samples) -> float:
    """Mean normalized coherence of the first two transmit columns.

    For each channel matrix the coherence is ``|<c1, c2>| / (|c1| |c2|)``;
    the ensemble mean is returned.  Matrices with a zero-norm column are
    skipped with a warning.  An ensemble of identical matrices returns the
    common value exactly.
    """
    values = []
    for sample in samples:
        h = sample.entries if isinstance(sample, ChannelMatrix) else np.asarray(sample)
        if h.shape[1] < 2:
            raise ConfigurationError(
                "sub-channel correlation needs at least two transmit columns")
        c1, c2 = h[:, 0], h[:, 1]
        n1, n2 = np.linalg.norm(c1), np.linalg.norm(c2)
        if n1 == 0.0 or n2 == 0.0:
            warnings.warn("skipping channel sample with a zero-norm column",
                          UserWarning)
            continue
        values.append(float(np.abs(np.vdot(c1, c2)) / (n1 * n2)))
    if not values:
        raise ConfigurationError(
            "no usable channel samples for sub-channel correlation")
    arr = np.array(values)
    if np.all(arr == arr[0]):
        return float(arr[0])
    return float(arr.mean())
