"""Classical dipolar fields at the emitter and anisotropic Zeeman shifts.

Model: every bath spin is a classical point dipole; the vector sum of
their fields plus the external bias field tilts and stretches the Zeeman
ladders of the emitter's ground and excited Kramers doublets, and the
optical transition shifts by the difference of the two effective Zeeman
energies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constants import MU_0, MU_B, MU_B_OVER_H, NM_TO_M, SI29_MOMENT
from .lattice import SpinConfig

_BRANCH_SIGNS = {"lower_lower": 1.0, "upper_upper": -1.0, "average": 0.0}


@dataclass(frozen=True)
class GTensor:
    """3x3 dimensionless g-tensor in the crystal frame (C2 along z)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("g-tensor must be a 3x3 matrix")
        if not np.all(np.isfinite(m)):
            raise ValueError("g-tensor entries must be finite")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def diagonal(cls, gx: float, gy: float, gz: float) -> "GTensor":
        return cls(np.diag([float(gx), float(gy), float(gz)]))

    @classmethod
    def isotropic(cls, g: float) -> "GTensor":
        return cls.diagonal(g, g, g)

    def g_eff(self, direction) -> float:
        """Effective g along a unit direction, |G @ u| >= 0."""
        return float(np.linalg.norm(self.matrix @ np.asarray(direction, dtype=float)))


@dataclass(frozen=True)
class EmitterModel:
    g_ground: GTensor
    g_excited: GTensor
    c2_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    branch_selection: str = "lower_lower"

    def __post_init__(self):
        axis = np.asarray(self.c2_axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError("c2_axis must have unit norm")
        if self.branch_selection not in _BRANCH_SIGNS:
            raise ValueError(f"unknown branch_selection: {self.branch_selection!r}")

    @property
    def branch_sign(self) -> float:
        return _BRANCH_SIGNS[self.branch_selection]


def dipole_field(moment, displacement) -> np.ndarray:
    """Point-dipole field B = (mu0/4pi) [3(m.r^)r^ - m] / r^3, SI units.

    ``moment`` in J/T, ``displacement`` in meters (from dipole to the
    field point). Antisymmetric under m -> -m.
    """
    m = np.asarray(moment, dtype=float)
    r = np.asarray(displacement, dtype=float)
    r2 = float(r @ r)
    if r2 == 0.0:
        raise ValueError("dipole field is singular at zero displacement")
    rnorm = math.sqrt(r2)
    rhat = r / rnorm
    return (MU_0 / (4.0 * np.pi)) * (3.0 * (m @ rhat) * rhat - m) / rnorm**3


def dipole_tensors(displacements_m: np.ndarray) -> np.ndarray:
    """Per-spin linear maps T with B = T @ m, shape (n, 3, 3).

    T(r) = (mu0/4pi) (3 r^ r^T - I) / r^3; symmetric and even in r, so a
    spin at -r produces the same tensor.
    """
    r = np.asarray(displacements_m, dtype=float)
    d2 = np.einsum("ij,ij->i", r, r)
    if r.shape[0] and np.min(d2) == 0.0:
        raise ValueError("dipole field is singular at zero displacement")
    d = np.sqrt(d2)
    rhat = r / d[:, None]
    outer = rhat[:, :, None] * rhat[:, None, :]
    pref = (MU_0 / (4.0 * np.pi)) / d**3
    return pref[:, None, None] * (3.0 * outer - np.eye(3)[None, :, :])


def nuclear_moment(state: str, quantization_axis=None, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """29Si nuclear moment vector for one spin, J/T.

    ``projected_up``/``projected_down`` point along +-quantization_axis;
    ``isotropic_random_unit_vector`` draws a uniform direction from rng.
    """
    if state == "isotropic_random_unit_vector":
        if rng is None:
            raise ValueError("isotropic moment state requires an rng")
        v = rng.standard_normal(3)
        return SI29_MOMENT * v / np.linalg.norm(v)
    if quantization_axis is None:
        raise ValueError("projected moment state requires a quantization axis")
    axis = np.asarray(quantization_axis, dtype=float)
    if state == "projected_up":
        return SI29_MOMENT * axis
    if state == "projected_down":
        return -SI29_MOMENT * axis
    raise ValueError(f"unknown moment state: {state!r}")


def er_moment(g: GTensor, orientation) -> np.ndarray:
    """Effective spin-1/2 Er moment m = (mu_B / 2) G @ u, J/T."""
    u = np.asarray(orientation, dtype=float)
    return 0.5 * MU_B * (g.matrix @ u)


def compensated_vector_sum(terms: np.ndarray) -> np.ndarray:
    """Exactly rounded component-wise sum of (n, 3) field contributions.

    math.fsum is used per component: the result is independent of term
    order, which makes field totals reproducible under any partitioning
    of the bath across workers.
    """
    t = np.asarray(terms, dtype=float)
    if t.shape[0] == 0:
        return np.zeros(3)
    return np.array([math.fsum(t[:, 0].tolist()), math.fsum(t[:, 1].tolist()), math.fsum(t[:, 2].tolist())])


def bath_moments(spins: SpinConfig, emitter: EmitterModel, quantization_axis=None) -> np.ndarray:
    """Resolve the moment vectors (n, 3) of a spin configuration, J/T.

    Bath Er dopants reuse the emitter's ground-state g-tensor (assumed
    representative of the dominant incorporation site).
    """
    n = len(spins)
    if spins.orientation_model == "projected":
        if quantization_axis is None:
            raise ValueError("projected moments require a quantization axis")
        axis = np.asarray(quantization_axis, dtype=float)
        signs = np.asarray(spins.projections, dtype=float)
        if spins.kind == "nuclear_si29":
            return signs[:, None] * (SI29_MOMENT * axis)[None, :]
        base = 0.5 * MU_B * (emitter.g_ground.matrix @ axis)
        return signs[:, None] * base[None, :]
    u = np.asarray(spins.orientations, dtype=float).reshape(n, 3)
    if spins.kind == "nuclear_si29":
        return SI29_MOMENT * u
    return 0.5 * MU_B * (u @ emitter.g_ground.matrix.T)


def total_field(spins: SpinConfig, emitter: EmitterModel, b_ext, quantization_axis=None) -> np.ndarray:
    """External field plus the compensated sum of all bath dipole fields, T."""
    b_ext = np.asarray(b_ext, dtype=float)
    if len(spins) == 0:
        return b_ext.copy()
    if quantization_axis is None:
        norm = np.linalg.norm(b_ext)
        quantization_axis = b_ext / norm if norm > 0 else np.asarray(emitter.c2_axis, float)
    tensors = dipole_tensors(spins.positions_nm * NM_TO_M)
    moments = bath_moments(spins, emitter, quantization_axis)
    contributions = np.einsum("nij,nj->ni", tensors, moments)
    return b_ext + compensated_vector_sum(contributions)


def optical_shift_batch(b_totals: np.ndarray, emitter: EmitterModel) -> np.ndarray:
    """Optical transition shift (Hz) for a batch of total fields (n, 3).

    shift = s * (mu_B / 2h) * (|G_e B^| - |G_g B^|) * |B|, with branch
    sign s; exactly zero where |B| = 0.
    """
    b = np.atleast_2d(np.asarray(b_totals, dtype=float))
    norm = np.sqrt(np.einsum("ij,ij->i", b, b))
    out = np.zeros(b.shape[0])
    nz = norm > 0.0
    if np.any(nz):
        unit = b[nz] / norm[nz, None]
        ge = np.sqrt(np.einsum("ij,ij->i", unit @ emitter.g_excited.matrix.T, unit @ emitter.g_excited.matrix.T))
        gg = np.sqrt(np.einsum("ij,ij->i", unit @ emitter.g_ground.matrix.T, unit @ emitter.g_ground.matrix.T))
        out[nz] = emitter.branch_sign * 0.5 * MU_B_OVER_H * (ge - gg) * norm[nz]
    return out


def optical_shift(b_total, emitter: EmitterModel) -> float:
    """Scalar convenience wrapper around :func:`optical_shift_batch`."""
    return float(optical_shift_batch(np.asarray(b_total, dtype=float)[None, :], emitter)[0])


def shift_gradient(emitter: EmitterModel, b_ext, step: float = 1e-9) -> np.ndarray:
    """Numerical gradient of the shift at B_ext, Hz/T, shape (3,).

    Central differences with a step small against |B_ext|; used for
    linearized sensitivity estimates (strong-spin classification).
    """
    b = np.asarray(b_ext, dtype=float)
    h = step * max(np.linalg.norm(b), 1e-6)
    grad = np.empty(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        grad[k] = (optical_shift(b + e, emitter) - optical_shift(b - e, emitter)) / (2.0 * h)
    return grad
