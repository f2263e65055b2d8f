"""Excess propagation phase accumulated along chords through cloudlets.

Each cloudlet is treated as a dilute suspension of small ice spheres in air.
A Rayleigh mixing rule turns the local ice water content into an excess
relative permittivity; the excess permittivity shortens the local wavelength
and therefore advances the carrier phase in proportion to the chord length
travelled inside the cloudlet.  Per-ray phases are the unwrapped sum of the
per-chord contributions.

Units: metres, g/m^3, radians.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .cloudfield import CloudField
from .errors import ConfigurationError, DomainError
from .raygeometry import Segment2D, chord_lengths

SPEED_OF_LIGHT = 299_792_458.0   # [m/s]

# Volume of one ice sphere of 0.1 mm radius [m^3].
DEFAULT_ICE_SPHERE_VOLUME = 4.0 / 3.0 * np.pi * (1e-4) ** 3

# Reference ice water content of a fully dense suspension [g/m^3]; the
# mixing rule scales the sphere volume fraction by iwc relative to this.
_REFERENCE_IWC = 0.6


# ============================================================
# Physical parameters
# ============================================================

@dataclasses.dataclass(frozen=True)
class PhysicsParams:
    """Carrier and ice-suspension constants.

    ``wavelength_lambda0`` may be omitted, in which case it is derived from
    the carrier frequency; if both are given they must agree.
    """

    sphere_density_n: float = 30000.0        # ice spheres per m^3
    sphere_volume_vice: float = DEFAULT_ICE_SPHERE_VOLUME   # [m^3]
    ice_permittivity_real: float = 3.15      # real part of ice permittivity
    carrier_frequency: float = 73.5e9        # [Hz]
    wavelength_lambda0: float | None = None  # free-space wavelength [m]

    def __post_init__(self) -> None:
        problems = []
        if self.sphere_density_n < 0.0:
            problems.append(
                f"sphere_density_n must be >= 0, got {self.sphere_density_n}")
        if self.sphere_volume_vice <= 0.0:
            problems.append(
                f"sphere_volume_vice must be > 0, got {self.sphere_volume_vice}")
        if self.ice_permittivity_real <= 1.0:
            problems.append(
                f"ice_permittivity_real must exceed 1, got "
                f"{self.ice_permittivity_real}")
        if self.carrier_frequency <= 0.0:
            problems.append(
                f"carrier_frequency must be > 0, got {self.carrier_frequency}")
        if problems:
            raise ConfigurationError("; ".join(problems))
        derived = SPEED_OF_LIGHT / self.carrier_frequency
        if self.wavelength_lambda0 is None:
            object.__setattr__(self, "wavelength_lambda0", derived)
        elif abs(self.wavelength_lambda0 - derived) > 1e-9 * derived:
            raise ConfigurationError(
                f"wavelength_lambda0 ({self.wavelength_lambda0}) is "
                f"inconsistent with carrier_frequency (expected {derived})")


def mixture_coefficient(params: PhysicsParams) -> float:
    """Excess permittivity per unit ice water content [m^3/g].

    Rayleigh mixing for a dilute suspension of identical spheres: the excess
    is linear in the sphere volume fraction, which itself is linear in the
    ice water content.
    """
    eps = params.ice_permittivity_real
    return (3.0 * params.sphere_density_n * params.sphere_volume_vice
            * (1.0 / _REFERENCE_IWC) * (eps - 1.0) / (eps + 1.0))


def mixture_permittivity(params: PhysicsParams, iwc) -> float | np.ndarray:
    """Excess relative permittivity of a cloudlet with the given content.

    Parameters
    ----------
    params : PhysicsParams
    iwc : float or ndarray
        Ice water content [g/m^3]; must be non-negative.
    """
    iwc = np.asarray(iwc, dtype=float)
    if np.any(iwc < 0.0):
        raise DomainError("ice water content must be non-negative")
    out = mixture_coefficient(params) * iwc
    return float(out) if out.ndim == 0 else out


def wavelength_in_medium(lambda0: float, excess_permittivity: float) -> float:
    """Wavelength inside a medium with the given excess permittivity."""
    if excess_permittivity <= -1.0:
        raise DomainError(
            f"excess permittivity must exceed -1, got {excess_permittivity}")
    return lambda0 / (1.0 + excess_permittivity)


def phase_through_chord(lambda0: float, excess_permittivity: float,
                        chord: float) -> float:
    """Excess phase accumulated over one chord [rad].

    The phase advance relative to free space over a chord of length ``l``
    is ``2 pi l / lambda0`` times the excess permittivity.
    """
    return 2.0 * np.pi * chord / lambda0 * excess_permittivity


# ============================================================
# Per-ray phase accumulation
# ============================================================

@dataclasses.dataclass(frozen=True)
class PathPhase:
    """Cloud-induced excess phase of every ray of a bundle."""

    per_ray_phase: np.ndarray           # (num_rays,) unwrapped phase [rad]
    per_ray_cloudlet_count: np.ndarray  # (num_rays,) pierced cloudlets


def path_phase(field: CloudField, segments: list[Segment2D],
               params: PhysicsParams) -> PathPhase:
    """Accumulate cloud phases for a bundle of in-layer segments.

    For each segment the chord through every cloudlet is computed exactly;
    each chord contributes ``2 pi l / lambda0`` times the cloudlet's excess
    permittivity.  Contributions add without wrapping, and overlapping
    cloudlets contribute independently, which matches the additive overlap
    rule of the field model.
    """
    k0 = 2.0 * np.pi / params.wavelength_lambda0
    eps = mixture_coefficient(params) * field.iwc
    phases = np.zeros(len(segments))
    counts = np.zeros(len(segments), dtype=int)
    for idx, seg in enumerate(segments):
        if field.count == 0:
            continue
        chords = chord_lengths(seg, field.positions, field.radius)
        hit = chords > 0.0
        counts[idx] = int(np.count_nonzero(hit))
        phases[idx] = float(np.sum(k0 * chords[hit] * eps[hit]))
    return PathPhase(per_ray_phase=phases, per_ray_cloudlet_count=counts)
