"""Diamond-cubic silicon lattice generation and stochastic bath population.

The emitter defines the origin. Its assumed site is displaced by 0.25
unit cells from a conventional-cell center along the C2 axis, so the
emitter never coincides with an atomic site and every bath spin sits at a
strictly positive distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import seeds
from .constants import (
    CM3_TO_NM3,
    SI29_NATURAL_ABUNDANCE,
    SILICON_LATTICE_CONSTANT_NM,
)

# Conventional diamond-cubic cell: FCC lattice plus two-atom basis,
# eight atoms per cell, in units of the lattice constant.
DIAMOND_BASIS = np.array(
    [
        [0.00, 0.00, 0.00],
        [0.50, 0.50, 0.00],
        [0.50, 0.00, 0.50],
        [0.00, 0.50, 0.50],
        [0.25, 0.25, 0.25],
        [0.75, 0.75, 0.25],
        [0.75, 0.25, 0.75],
        [0.25, 0.75, 0.75],
    ]
)

ATOMS_PER_CELL = 8


def site_density_per_nm3(lattice_constant_nm: float = SILICON_LATTICE_CONSTANT_NM) -> float:
    """Atomic number density of the diamond-cubic lattice, nm^-3."""
    return ATOMS_PER_CELL / lattice_constant_nm**3


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("axis vector must be nonzero")
    return v / n


@dataclass(frozen=True)
class LatticeRegion:
    """Spherical lattice region centered on the emitter.

    ``emitter_position_nm`` is metadata locating the region in an absolute
    frame; generated site positions are always relative to the emitter.
    """

    region_radius_nm: float
    lattice_constant_nm: float = SILICON_LATTICE_CONSTANT_NM
    emitter_position_nm: tuple[float, float, float] = (0.0, 0.0, 0.0)
    c2_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    # Displacement of the emitter from the conventional-cell center along
    # the C2 axis, in cell units. The 0.25 default is an assumption about
    # the site geometry and deliberately configurable.
    cell_displacement: float = 0.25

    def __post_init__(self):
        if self.lattice_constant_nm <= 0:
            raise ValueError("lattice_constant_nm must be positive")
        if self.region_radius_nm < 0:
            raise ValueError("region_radius_nm must be non-negative")
        axis = np.asarray(self.c2_axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError("c2_axis must have unit norm (within 1e-12)")

    @property
    def emitter_cell_offset(self) -> np.ndarray:
        """Emitter position inside its conventional cell, in cell units."""
        return np.array([0.5, 0.5, 0.5]) + self.cell_displacement * np.asarray(self.c2_axis, float)


@dataclass(frozen=True)
class BathConfig:
    """Stochastic bath description: what occupies the lattice and how."""

    region_radius_nm: float
    abundance: float = SI29_NATURAL_ABUNDANCE
    er_concentration_per_cm3: float = 0.0
    orientation_model: str = "isotropic"  # or "projected"
    seed: int = 0
    er_placement: str = "poisson"  # or "lattice" (cross-validation mode)

    def __post_init__(self):
        if not 0.0 <= self.abundance <= 1.0:
            raise ValueError("abundance must lie in [0, 1]")
        if self.er_concentration_per_cm3 < 0:
            raise ValueError("er_concentration_per_cm3 must be non-negative")
        if self.region_radius_nm <= 0:
            raise ValueError("region_radius_nm must be positive")
        if self.orientation_model not in ("isotropic", "projected"):
            raise ValueError(f"unknown orientation_model: {self.orientation_model!r}")
        if self.er_placement not in ("poisson", "lattice"):
            raise ValueError(f"unknown er_placement: {self.er_placement!r}")


@dataclass(frozen=True)
class SpinConfig:
    """One stochastic realization of bath spin positions and moment states.

    ``orientations`` holds isotropic unit vectors when the orientation
    model is "isotropic"; ``projections`` holds +-1 signs (moment along
    +-quantization axis) when it is "projected". Arrays are read-only.
    """

    positions_nm: np.ndarray
    kind: str  # "nuclear_si29" | "erbium_bath"
    orientation_model: str
    orientations: Optional[np.ndarray] = None
    projections: Optional[np.ndarray] = None
    site_indices: Optional[np.ndarray] = None  # indices into the generating site list

    def __post_init__(self):
        pos = np.asarray(self.positions_nm, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("positions_nm must have shape (n, 3)")
        if pos.shape[0] and np.min(np.einsum("ij,ij->i", pos, pos)) == 0.0:
            raise ValueError("a bath spin must not coincide with the emitter")
        for arr in (pos, self.orientations, self.projections, self.site_indices):
            if arr is not None:
                np.asarray(arr).flags.writeable = False
        object.__setattr__(self, "positions_nm", pos)

    def __len__(self) -> int:
        return self.positions_nm.shape[0]


def build_lattice(region: LatticeRegion) -> np.ndarray:
    """All diamond-cubic atomic positions within the region, shape (n, 3), nm.

    Positions are relative to the emitter and generated in a deterministic
    cell-major order; no randomness is involved.
    """
    a = region.lattice_constant_nm
    r = region.region_radius_nm
    if r == 0.0:
        return np.empty((0, 3))
    offset = region.emitter_cell_offset  # cell units
    # Cell index bounds: any basis atom of cell n lies in n + [0, 1)^3.
    lo = np.floor(offset - r / a - 1.0).astype(int)
    hi = np.ceil(offset + r / a + 1.0).astype(int)
    axes = [np.arange(lo[i], hi[i] + 1) for i in range(3)]
    cells = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    # (n_cells, 8, 3) -> relative positions in nm
    pos = (cells[:, None, :] + DIAMOND_BASIS[None, :, :] - offset) * a
    pos = pos.reshape(-1, 3)
    dist2 = np.einsum("ij,ij->i", pos, pos)
    return pos[dist2 <= r * r]


def sample_nuclear_bath(sites: np.ndarray, config: BathConfig) -> SpinConfig:
    """Populate candidate sites with 29Si spins at the configured abundance.

    Each site independently carries a spin with probability ``abundance``
    (realized as a binomial count plus a uniform subset, which has the
    identical joint law). Bit-exact for identical (seed, config).
    """
    sites = np.asarray(sites, dtype=float)
    rng = seeds.substream(config.seed, seeds.TAG_NUCLEAR_BATH)
    n_sites = sites.shape[0]
    if config.abundance == 0.0 or n_sites == 0:
        idx = np.empty(0, dtype=np.int64)
    elif config.abundance == 1.0:
        idx = np.arange(n_sites, dtype=np.int64)
    else:
        k = int(rng.binomial(n_sites, config.abundance))
        idx = np.sort(rng.choice(n_sites, size=k, replace=False)).astype(np.int64)
    positions = sites[idx]
    orientations, projections = _draw_moment_states(rng, len(idx), config.orientation_model)
    return SpinConfig(
        positions_nm=positions,
        kind="nuclear_si29",
        orientation_model=config.orientation_model,
        orientations=orientations,
        projections=projections,
        site_indices=idx,
    )


def sample_er_bath(config: BathConfig) -> SpinConfig:
    """Sample bath Er dopants in the spherical region.

    Default mode is a homogeneous Poisson point process (site-substitution
    probabilities at realistic concentrations are ~1e-8, so lattice
    discreteness is irrelevant); ``er_placement="lattice"`` places dopants
    on conventional-cell centers for cross-validation.
    """
    if config.er_placement == "lattice":
        return _sample_er_bath_lattice(config)
    rng = seeds.substream(config.seed, seeds.TAG_ER_BATH)
    radius = config.region_radius_nm
    density_nm3 = config.er_concentration_per_cm3 * CM3_TO_NM3
    mean_count = density_nm3 * (4.0 / 3.0) * np.pi * radius**3
    count = int(rng.poisson(mean_count))
    # Uniform in the ball: radius via inverse-CDF, direction isotropic.
    u = rng.random(count)
    while np.any(u == 0.0):  # keep |position| > 0
        bad = u == 0.0
        u[bad] = rng.random(int(bad.sum()))
    radii = radius * np.cbrt(u)
    directions = seeds.random_unit_vectors(rng, count)
    positions = radii[:, None] * directions
    orientations, projections = _draw_moment_states(rng, count, config.orientation_model)
    return SpinConfig(
        positions_nm=positions,
        kind="erbium_bath",
        orientation_model=config.orientation_model,
        orientations=orientations,
        projections=projections,
    )


def _sample_er_bath_lattice(config: BathConfig) -> SpinConfig:
    """Cross-validation mode: substitute Er on conventional-cell centers."""
    a = SILICON_LATTICE_CONSTANT_NM
    region = LatticeRegion(region_radius_nm=config.region_radius_nm)
    offset = region.emitter_cell_offset
    r = config.region_radius_nm
    lo = np.floor(offset - r / a - 1.0).astype(int)
    hi = np.ceil(offset + r / a + 1.0).astype(int)
    axes = [np.arange(lo[i], hi[i] + 1) for i in range(3)]
    cells = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    centers = (cells + 0.5 - offset) * a
    centers = centers[np.einsum("ij,ij->i", centers, centers) <= r * r]
    p_cell = config.er_concentration_per_cm3 * CM3_TO_NM3 * a**3
    if p_cell > 1.0:
        raise ValueError("er concentration exceeds one dopant per cell; use poisson placement")
    rng = seeds.substream(config.seed, seeds.TAG_ER_BATH)
    n_cells = centers.shape[0]
    k = int(rng.binomial(n_cells, p_cell)) if p_cell > 0 else 0
    idx = np.sort(rng.choice(n_cells, size=k, replace=False)).astype(np.int64)
    orientations, projections = _draw_moment_states(rng, k, config.orientation_model)
    return SpinConfig(
        positions_nm=centers[idx],
        kind="erbium_bath",
        orientation_model=config.orientation_model,
        orientations=orientations,
        projections=projections,
    )


def _draw_moment_states(rng: np.random.Generator, n: int, orientation_model: str):
    if orientation_model == "isotropic":
        return seeds.random_unit_vectors(rng, n), None
    signs = (rng.integers(0, 2, size=n) * 2 - 1).astype(np.int8)
    return None, signs
