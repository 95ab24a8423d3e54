"""Fabry-Perot resonator and Purcell arithmetic.

Conventions: quality factor Q = frequency / linewidth; Gaussian
standing-wave mode volume V = (pi/4) w0^2 L_eff with the emitter assumed
at a field antinode; ideal Purcell P = (3 / 4 pi^2) (lambda/n)^3 Q / V;
lifetime-ratio Purcell P = T1_bulk / T1 (this reproduces the measured
0.14 ms / 43 us -> 3.3 arithmetic exactly, with no -1 subtraction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .constants import SILICON_REFRACTIVE_INDEX, SPEED_OF_LIGHT


@dataclass(frozen=True)
class CavityParams:
    resonance_frequency_hz: float
    linewidth_hz: float
    waist_um: float
    effective_length_um: float
    refractive_index: float = SILICON_REFRACTIVE_INDEX

    def __post_init__(self):
        for name in ("resonance_frequency_hz", "linewidth_hz", "waist_um", "effective_length_um", "refractive_index"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def wavelength_um(self) -> float:
        return SPEED_OF_LIGHT / self.resonance_frequency_hz * 1e6

    @property
    def q(self) -> float:
        return q_from_linewidth(self.resonance_frequency_hz, self.linewidth_hz)


@dataclass(frozen=True)
class EmitterPhotonics:
    branching_ratio: float = 0.23
    orientation_factor: float = 1.0 / 3.0
    bulk_lifetime_s: float = 1.4e-4

    def __post_init__(self):
        if not 0.0 < self.branching_ratio <= 1.0:
            raise ValueError("branching_ratio must lie in (0, 1]")
        if not 0.0 < self.orientation_factor <= 1.0:
            raise ValueError("orientation_factor must lie in (0, 1]")
        if self.bulk_lifetime_s <= 0:
            raise ValueError("bulk_lifetime_s must be positive")


def q_from_linewidth(frequency_hz: float, linewidth_hz: float) -> float:
    """Quality factor Q = f / delta_f."""
    if frequency_hz <= 0 or linewidth_hz <= 0:
        raise ValueError("frequency and linewidth must be positive")
    return frequency_hz / linewidth_hz


def mode_volume(waist_um: float, effective_length_um: float) -> float:
    """Standing-wave Gaussian mode volume V = (pi/4) w0^2 L_eff, um^3."""
    if waist_um <= 0 or effective_length_um <= 0:
        raise ValueError("waist and effective length must be positive")
    return (math.pi / 4.0) * waist_um**2 * effective_length_um


def ideal_purcell(q: float, mode_volume_um3: float, wavelength_um: float, refractive_index: float) -> float:
    """Two-level linear dipole at the field maximum: P = (3/4pi^2)(lambda/n)^3 Q/V."""
    if min(q, mode_volume_um3, wavelength_um, refractive_index) <= 0:
        raise ValueError("all inputs must be positive")
    return (3.0 / (4.0 * math.pi**2)) * (wavelength_um / refractive_index) ** 3 * q / mode_volume_um3


def corrected_purcell(p_ideal: float, photonics: EmitterPhotonics) -> float:
    """Branching-ratio and dipole-orientation corrected Purcell factor."""
    return p_ideal * photonics.branching_ratio * photonics.orientation_factor


def purcell_from_lifetime(t1_s: float, bulk_lifetime_s: float) -> float:
    """Lifetime-ratio Purcell factor P = T1_bulk / T1."""
    if t1_s <= 0 or bulk_lifetime_s <= 0:
        raise ValueError("lifetimes must be positive")
    return bulk_lifetime_s / t1_s


def efficiency_budget(p_detect_per_shot: float, losses: Sequence[float]) -> float:
    """Source efficiency implied by the detection probability and path losses.

    efficiency = p / prod(losses); every loss factor must lie in (0, 1].
    """
    if not 0.0 < p_detect_per_shot <= 1.0:
        raise ValueError("p_detect_per_shot must lie in (0, 1]")
    prod = 1.0
    for eta in losses:
        if not 0.0 < eta <= 1.0:
            raise ValueError("loss factors must lie in (0, 1]")
        prod *= eta
    return p_detect_per_shot / prod


def design_report(cavity: CavityParams, photonics: EmitterPhotonics,
                  p_detect_per_shot: float | None = None,
                  losses: Sequence[float] | None = None) -> dict:
    """Resonator summary: Q, V, ideal and corrected Purcell, expected lifetime."""
    q = cavity.q
    v = mode_volume(cavity.waist_um, cavity.effective_length_um)
    p_ideal = ideal_purcell(q, v, cavity.wavelength_um, cavity.refractive_index)
    p_theo = corrected_purcell(p_ideal, photonics)
    report = {
        "q": q,
        "mode_volume_um3": v,
        "wavelength_um": cavity.wavelength_um,
        "p_ideal": p_ideal,
        "p_theo": p_theo,
        "expected_lifetime_s": photonics.bulk_lifetime_s / p_theo,
        "bulk_lifetime_s": photonics.bulk_lifetime_s,
    }
    if p_detect_per_shot is not None and losses is not None:
        report["source_efficiency"] = efficiency_budget(p_detect_per_shot, losses)
    return report
