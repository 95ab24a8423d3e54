"""Monte-Carlo drivers for spectral-diffusion observables.

Each realization draws an independent bath (positions and/or moment
orientations) from a counter-derived stream, computes the total dipolar
field at the emitter, and records the optical shift relative to the
bath-free transition. Ensembles, angular maps, field sweeps,
single-emitter spectra and Er-Er linewidths are different samplings of
the same kernel.

Determinism contract: results depend only on the master seed and the
configuration, never on chunking or the number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import multiprocessing

import numpy as np

from . import bathfield, lattice, lineshape, seeds
from .bathfield import EmitterModel
from .constants import CM3_TO_NM3, MU_B, NM_TO_M, SI29_MOMENT
from .lattice import BathConfig, LatticeRegion, SpinConfig

_CHUNK = 512


@dataclass(frozen=True)
class EnsembleParams:
    bath: BathConfig
    emitter: EmitterModel
    b_ext_magnitude: float  # tesla
    b_ext_direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    realizations: int = 30_000
    histogram_bins: Optional[int] = None
    fwhm_method: str = "interpolated_histogram"
    workers: int = 1
    # Strong-coupling threshold for single-emitter reports, in units of
    # the far-bath FWHM.
    strong_threshold: float = 1.0

    def __post_init__(self):
        if self.realizations < 100:
            raise ValueError("realizations must be at least 100")
        if self.b_ext_magnitude < 0:
            raise ValueError("b_ext_magnitude must be non-negative")
        d = np.asarray(self.b_ext_direction, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("b_ext_direction must be a unit vector")

    @property
    def b_ext_vector(self) -> np.ndarray:
        return self.b_ext_magnitude * np.asarray(self.b_ext_direction, dtype=float)

    @property
    def quantization_axis(self) -> np.ndarray:
        if self.b_ext_magnitude > 0:
            return np.asarray(self.b_ext_direction, dtype=float)
        return np.asarray(self.emitter.c2_axis, dtype=float)


@dataclass(frozen=True)
class SDResult:
    shift_samples: np.ndarray  # Hz, relative to the bath-free transition
    bin_centers: np.ndarray
    counts: np.ndarray
    fwhm: float
    fwhm_error: float
    fwhm_method: str
    degenerate: bool
    truncation_error_estimate: float


@dataclass(frozen=True)
class SweepPoint:
    direction: np.ndarray
    magnitude: float
    fwhm: float
    fwhm_error: float
    degenerate: bool = False
    failed: bool = False
    message: str = ""
    label: str = ""


@dataclass(frozen=True)
class StrongSpin:
    position_nm: np.ndarray
    shift_hz: float


@dataclass(frozen=True)
class SingleEmitterResult:
    shift_samples: np.ndarray
    bin_centers: np.ndarray
    counts: np.ndarray
    line_centers_hz: np.ndarray
    far_bath_fwhm: float
    fwhm: float
    strong_spins: list[StrongSpin]
    degenerate: bool


# ---------------------------------------------------------------------------
# Bath-field kernel


class _BathKernel:
    """Precomputed geometry for drawing per-realization bath fields."""

    def __init__(self, bath: BathConfig, emitter: EmitterModel, kind: str):
        self.bath = bath
        self.emitter = emitter
        self.kind = kind
        if kind == "nuclear_si29":
            region = LatticeRegion(region_radius_nm=bath.region_radius_nm, c2_axis=emitter.c2_axis)
            self.sites_nm = lattice.build_lattice(region)
            self.tensors = bathfield.dipole_tensors(self.sites_nm * NM_TO_M)
            self.n_sites = self.sites_nm.shape[0]
        else:
            density_nm3 = bath.er_concentration_per_cm3 * CM3_TO_NM3
            self.poisson_mean = density_nm3 * (4.0 / 3.0) * math.pi * bath.region_radius_nm**3
        # Projected moments need a quantization axis fixed by the sweep point.
        self.g_ground = emitter.g_ground.matrix

    def delta_b(self, rng: np.random.Generator, quantization_axis: np.ndarray) -> np.ndarray:
        """One realization of the total bath field at the emitter, tesla."""
        if self.kind == "nuclear_si29":
            contributions = self._nuclear_contributions(rng, quantization_axis)
        else:
            contributions = self._er_contributions(rng, quantization_axis)
        return bathfield.compensated_vector_sum(contributions)

    def _nuclear_contributions(self, rng, quantization_axis):
        p = self.bath.abundance
        if p == 0.0 or self.n_sites == 0:
            return np.empty((0, 3))
        if p == 1.0:
            idx = np.arange(self.n_sites)
        else:
            k = int(rng.binomial(self.n_sites, p))
            idx = np.sort(rng.choice(self.n_sites, size=k, replace=False))
        tensors = self.tensors[idx]
        if self.bath.orientation_model == "isotropic":
            u = seeds.random_unit_vectors(rng, idx.size)
            moments = SI29_MOMENT * u
        else:
            signs = rng.integers(0, 2, size=idx.size) * 2.0 - 1.0
            moments = signs[:, None] * (SI29_MOMENT * quantization_axis)[None, :]
        return np.einsum("nij,nj->ni", tensors, moments)

    def _er_contributions(self, rng, quantization_axis):
        count = int(rng.poisson(self.poisson_mean))
        if count == 0:
            return np.empty((0, 3))
        u = rng.random(count)
        while np.any(u == 0.0):
            bad = u == 0.0
            u[bad] = rng.random(int(bad.sum()))
        radii = self.bath.region_radius_nm * np.cbrt(u)
        directions = seeds.random_unit_vectors(rng, count)
        positions = radii[:, None] * directions
        tensors = bathfield.dipole_tensors(positions * NM_TO_M)
        if self.bath.orientation_model == "isotropic":
            ori = seeds.random_unit_vectors(rng, count)
            moments = 0.5 * MU_B * (ori @ self.g_ground.T)
        else:
            signs = rng.integers(0, 2, size=count) * 2.0 - 1.0
            base = 0.5 * MU_B * (self.g_ground @ quantization_axis)
            moments = signs[:, None] * base[None, :]
        return np.einsum("nij,nj->ni", tensors, moments)


# Worker-side state for process pools (populated on fork).
_KERNEL: Optional[_BathKernel] = None
_KERNEL_AXIS: Optional[np.ndarray] = None
_KERNEL_SEED: int = 0


def _delta_b_chunk(args) -> np.ndarray:
    start, stop = args
    out = np.empty((stop - start, 3))
    for i in range(start, stop):
        rng = seeds.substream(_KERNEL_SEED, seeds.TAG_REALIZATION, i)
        out[i - start] = _KERNEL.delta_b(rng, _KERNEL_AXIS)
    return out


def _compute_delta_b(kernel: _BathKernel, master_seed: int, axis: np.ndarray, n: int, workers: int) -> np.ndarray:
    """All realizations' bath fields, shape (n, 3), worker-count independent."""
    global _KERNEL, _KERNEL_AXIS, _KERNEL_SEED
    _KERNEL, _KERNEL_AXIS, _KERNEL_SEED = kernel, axis, master_seed
    ranges = [(s, min(s + _CHUNK, n)) for s in range(0, n, _CHUNK)]
    try:
        if workers > 1 and len(ranges) > 1:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                blocks = list(pool.map(_delta_b_chunk, ranges))
        else:
            blocks = [_delta_b_chunk(r) for r in ranges]
    finally:
        _KERNEL, _KERNEL_AXIS = None, None
    return np.concatenate(blocks, axis=0) if blocks else np.empty((0, 3))


def _shift_samples(delta_b: np.ndarray, b_ext: np.ndarray, emitter: EmitterModel) -> np.ndarray:
    """Shift of each realization relative to the bath-free transition, Hz."""
    baseline = bathfield.optical_shift(b_ext, emitter)
    return bathfield.optical_shift_batch(delta_b + b_ext[None, :], emitter) - baseline


def _truncation_estimate(kernel: _BathKernel, emitter: EmitterModel, b_ext: np.ndarray, fwhm: float) -> float:
    """Relative FWHM contribution expected from spins beyond the region.

    The shell variance of per-spin shifts scales as r^-4 d r; the measured
    variance in the outer shell [0.8 R, R] is extrapolated to [R, inf) and
    folded into the FWHM in quadrature. Only meaningful for the nuclear
    lattice kernel; the continuum bath uses the same r^-3 coupling so the
    analogous estimate is applied via the density integral.
    """
    if fwhm <= 0:
        return 0.0
    grad = bathfield.shift_gradient(emitter, b_ext) if np.linalg.norm(b_ext) > 0 else np.zeros(3)
    if np.linalg.norm(grad) == 0.0:
        return 0.0
    radius = kernel.bath.region_radius_nm
    if kernel.kind == "nuclear_si29":
        r2 = np.einsum("ij,ij->i", kernel.sites_nm, kernel.sites_nm)
        shell = r2 > (0.8 * radius) ** 2
        rows = np.einsum("i,nij->nj", grad, kernel.tensors[shell])
        per_spin_var = (SI29_MOMENT**2 / 3.0) * np.einsum("nj,nj->n", rows, rows)
        shell_var = kernel.bath.abundance * float(np.sum(per_spin_var))
        tail_var = shell_var / (0.8**-3 - 1.0)
    else:
        # Continuum: Var_tail = n * Int_R^inf <s^2> 4 pi r^2 dr; the
        # integrand falls off as r^-4 so the integral is var(R) * R / 3
        # per unit density. The angular average over both the source
        # direction and the moment orientation is taken on a fixed
        # Fibonacci direction set.
        density_nm3 = kernel.bath.er_concentration_per_cm3 * CM3_TO_NM3
        acc = 0.0
        for rhat in _FIBONACCI_DIRS:
            t = bathfield.dipole_tensors((radius * NM_TO_M) * rhat[None, :])[0]
            row = grad @ t
            acc += float(row @ row)
        mean_g2 = acc / len(_FIBONACCI_DIRS)
        g_norm = float(np.linalg.norm(kernel.g_ground, ord="fro")) / math.sqrt(3.0)
        moment_scale = 0.5 * MU_B * g_norm
        var_at_r = (moment_scale**2 / 3.0) * mean_g2
        tail_var = density_nm3 * 4.0 * math.pi * radius**3 * var_at_r / 3.0
    fwhm_var = (2.3548**2) * tail_var
    return float(fwhm_var / (2.0 * fwhm**2))


def _fib_sphere(n: int = 64) -> np.ndarray:
    i = np.arange(n) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / n)
    theta = np.pi * (1.0 + math.sqrt(5.0)) * i
    return np.stack([np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)], axis=1)


_FIBONACCI_DIRS = _fib_sphere()


def _make_sd_result(samples: np.ndarray, p: EnsembleParams, kernel: _BathKernel) -> SDResult:
    if samples.size == 0 or float(samples.max() - samples.min()) == 0.0:
        return SDResult(
            shift_samples=samples,
            bin_centers=np.array([0.0]),
            counts=np.array([samples.size]),
            fwhm=0.0,
            fwhm_error=0.0,
            fwhm_method=p.fwhm_method,
            degenerate=True,
            truncation_error_estimate=0.0,
        )
    est = lineshape.fwhm_from_samples(samples, method=p.fwhm_method, bins=p.histogram_bins)
    boot_rng = seeds.substream(p.bath.seed, seeds.TAG_BOOTSTRAP)
    err = lineshape.bootstrap_fwhm_error(samples, boot_rng, method=p.fwhm_method, bins=p.histogram_bins)
    trunc = _truncation_estimate(kernel, p.emitter, p.b_ext_vector, est.value)
    return SDResult(
        shift_samples=samples,
        bin_centers=est.bin_centers,
        counts=est.counts,
        fwhm=est.value,
        fwhm_error=err,
        fwhm_method=p.fwhm_method,
        degenerate=est.degenerate,
        truncation_error_estimate=trunc,
    )


def _kernel_for(p: EnsembleParams) -> _BathKernel:
    kind = "erbium_bath" if p.bath.er_concentration_per_cm3 > 0 else "nuclear_si29"
    return _BathKernel(p.bath, p.emitter, kind)


# ---------------------------------------------------------------------------
# Public drivers


def ensemble_linewidth(p: EnsembleParams) -> SDResult:
    """Ensemble spectral-diffusion linewidth: positions and orientations
    are both resampled every realization."""
    kernel = _kernel_for(p)
    delta_b = _compute_delta_b(kernel, p.bath.seed, p.quantization_axis, p.realizations, p.workers)
    samples = _shift_samples(delta_b, p.b_ext_vector, p.emitter)
    return _make_sd_result(samples, p, kernel)


def erer_linewidth(p: EnsembleParams) -> SDResult:
    """Er-Er dipolar linewidth; requires a positive bath concentration."""
    if p.bath.er_concentration_per_cm3 <= 0:
        raise ValueError("erer_linewidth requires er_concentration_per_cm3 > 0")
    return ensemble_linewidth(p)


def angle_sweep(p: EnsembleParams, grid: Sequence[np.ndarray]) -> list[SweepPoint]:
    """FWHM for each bias-field direction, sharing the master seed schedule.

    In the isotropic orientation model the bath fields are independent of
    the bias direction, so one set of realizations serves every grid
    point; the projected model falls back to one ensemble per point.
    """
    grid = [np.asarray(d, dtype=float) for d in grid]
    if not grid:
        raise ValueError("direction grid must be non-empty")
    for d in grid:
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("grid entries must be unit vectors")
    out: list[SweepPoint] = []
    if p.bath.orientation_model == "isotropic":
        kernel = _kernel_for(p)
        delta_b = _compute_delta_b(kernel, p.bath.seed, p.quantization_axis, p.realizations, p.workers)
        for d in grid:
            try:
                b_ext = p.b_ext_magnitude * d
                samples = _shift_samples(delta_b, b_ext, p.emitter)
                res = _make_sd_result(samples, replace(p, b_ext_direction=tuple(d)), kernel)
                out.append(SweepPoint(d, p.b_ext_magnitude, res.fwhm, res.fwhm_error, res.degenerate))
            except Exception as exc:  # keep sweeping; flag the point
                out.append(SweepPoint(d, p.b_ext_magnitude, math.nan, math.nan, failed=True, message=str(exc)))
        return out
    for d in grid:
        try:
            res = ensemble_linewidth(replace(p, b_ext_direction=tuple(d)))
            out.append(SweepPoint(d, p.b_ext_magnitude, res.fwhm, res.fwhm_error, res.degenerate))
        except Exception as exc:
            out.append(SweepPoint(d, p.b_ext_magnitude, math.nan, math.nan, failed=True, message=str(exc)))
    return out


def field_sweep(p: EnsembleParams, magnitudes: Sequence[float], directions: Optional[dict] = None) -> list[SweepPoint]:
    """FWHM versus bias magnitude for the standard direction pair.

    ``directions`` maps labels to unit vectors; default is the C2 axis
    and the in-plane [110] axis. Magnitudes must be ascending and
    non-negative. Paired seeds across all points.
    """
    mags = [float(m) for m in magnitudes]
    if any(m < 0 for m in mags) or any(b < a for a, b in zip(mags, mags[1:])):
        raise ValueError("magnitudes must be ascending and non-negative")
    if directions is None:
        directions = {
            "parallel_c2": np.asarray(p.emitter.c2_axis, dtype=float),
            "perp_110": np.array([1.0, 1.0, 0.0]) / math.sqrt(2.0),
        }
    out: list[SweepPoint] = []
    if p.bath.orientation_model == "isotropic":
        kernel = _kernel_for(p)
        delta_b = _compute_delta_b(kernel, p.bath.seed, p.quantization_axis, p.realizations, p.workers)
        for label, d in directions.items():
            d = np.asarray(d, dtype=float)
            for m in mags:
                try:
                    samples = _shift_samples(delta_b, m * d, p.emitter)
                    res = _make_sd_result(samples, replace(p, b_ext_direction=tuple(d), b_ext_magnitude=m), kernel)
                    pt = SweepPoint(d, m, res.fwhm, res.fwhm_error, res.degenerate, label=label)
                except Exception as exc:
                    pt = SweepPoint(d, m, math.nan, math.nan, failed=True, message=str(exc), label=label)
                out.append(pt)
        return out
    for label, d in directions.items():
        for m in mags:
            try:
                res = ensemble_linewidth(replace(p, b_ext_direction=tuple(np.asarray(d, float)), b_ext_magnitude=m))
                pt = SweepPoint(np.asarray(d, float), m, res.fwhm, res.fwhm_error, res.degenerate, label=label)
            except Exception as exc:
                pt = SweepPoint(np.asarray(d, float), m, math.nan, math.nan, failed=True, message=str(exc), label=label)
            out.append(pt)
    return out


def default_angle_grid(n_theta: int = 17, n_phi: int = 33, arc_points: int = 181) -> list[np.ndarray]:
    """Sphere grid plus a fine arc in the plane spanned by [001] and [110]."""
    dirs = []
    thetas = np.linspace(0.0, np.pi, n_theta)
    phis = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    for t in thetas:
        for ph in phis:
            dirs.append(np.array([math.sin(t) * math.cos(ph), math.sin(t) * math.sin(ph), math.cos(t)]))
    e110 = np.array([1.0, 1.0, 0.0]) / math.sqrt(2.0)
    for a in np.linspace(0.0, np.pi, arc_points):
        dirs.append(math.cos(a) * np.array([0.0, 0.0, 1.0]) + math.sin(a) * e110)
    return [d / np.linalg.norm(d) for d in dirs]


# ---------------------------------------------------------------------------
# Single-emitter mode


def single_emitter_spectrum(
    bath_seed: int,
    p: EnsembleParams,
    spins: Optional[SpinConfig] = None,
) -> SingleEmitterResult:
    """Spectrum of one emitter with a frozen nuclear configuration.

    Positions are fixed by ``bath_seed`` (or by an explicit ``spins``
    override); only moment orientations fluctuate across realizations.
    Spins whose individual line displacement exceeds the far-bath FWHM
    (times the configured threshold) are reported as strongly coupled.
    """
    if p.realizations == 0:
        raise ValueError("realizations must be positive")
    axis = p.quantization_axis
    if spins is None:
        region = LatticeRegion(region_radius_nm=p.bath.region_radius_nm, c2_axis=p.emitter.c2_axis)
        sites = lattice.build_lattice(region)
        cfg = replace(p.bath, seed=bath_seed)
        spins = lattice.sample_nuclear_bath(sites, cfg)
    positions = np.asarray(spins.positions_nm, dtype=float)
    n_spins = positions.shape[0]
    tensors = bathfield.dipole_tensors(positions * NM_TO_M) if n_spins else np.empty((0, 3, 3))
    b_ext = p.b_ext_vector

    # Linearized per-spin sensitivities for the strong-coupling report.
    grad = bathfield.shift_gradient(p.emitter, b_ext) if p.b_ext_magnitude > 0 else np.zeros(3)
    moment = SI29_MOMENT if spins.kind == "nuclear_si29" else 0.5 * MU_B * float(np.linalg.norm(p.emitter.g_ground.matrix @ axis))
    rows = np.einsum("i,nij->nj", grad, tensors) if n_spins else np.empty((0, 3))
    shift_projected = np.abs(rows @ axis) * moment  # line displacement for +-axis states
    var_isotropic = (moment**2 / 3.0) * np.einsum("nj,nj->n", rows, rows)

    strong = np.zeros(n_spins, dtype=bool)
    while True:
        if p.bath.orientation_model == "projected":
            far_var = float(np.sum(shift_projected[~strong] ** 2))
        else:
            far_var = float(np.sum(var_isotropic[~strong]))
        far_fwhm = lineshape.GAUSSIAN_FWHM_FACTOR * math.sqrt(far_var)
        candidates = (~strong) & (shift_projected > p.strong_threshold * far_fwhm)
        if not np.any(candidates) or far_fwhm == 0.0:
            break
        # Promote only the strongest candidate, then re-evaluate.
        j = int(np.argmax(np.where(candidates, shift_projected, -np.inf)))
        strong[j] = True

    samples = _single_emitter_samples(p, spins, tensors, axis, b_ext)
    if float(samples.max() - samples.min()) == 0.0:
        return SingleEmitterResult(
            shift_samples=samples,
            bin_centers=np.array([0.0]),
            counts=np.array([samples.size]),
            line_centers_hz=np.array([0.0]),
            far_bath_fwhm=far_fwhm,
            fwhm=0.0,
            strong_spins=[],
            degenerate=True,
        )
    est = lineshape.fwhm_from_samples(samples, method=p.fwhm_method, bins=p.histogram_bins)
    lines = _resolved_lines(est.bin_centers, est.counts)
    report = [StrongSpin(position_nm=positions[j].copy(), shift_hz=float(shift_projected[j])) for j in np.flatnonzero(strong)]
    return SingleEmitterResult(
        shift_samples=samples,
        bin_centers=est.bin_centers,
        counts=est.counts,
        line_centers_hz=lines,
        far_bath_fwhm=far_fwhm,
        fwhm=est.value,
        strong_spins=report,
        degenerate=est.degenerate,
    )


def _single_emitter_samples(p, spins, tensors, axis, b_ext) -> np.ndarray:
    n_spins = tensors.shape[0]
    samples = np.empty(p.realizations)
    baseline = bathfield.optical_shift(b_ext, p.emitter)
    if p.bath.orientation_model == "projected":
        base_moment = SI29_MOMENT * axis if spins.kind == "nuclear_si29" else 0.5 * MU_B * (p.emitter.g_ground.matrix @ axis)
        per_spin_field = np.einsum("nij,j->ni", tensors, base_moment) if n_spins else np.empty((0, 3))
        for i in range(p.realizations):
            rng = seeds.substream(p.bath.seed, seeds.TAG_ORIENTATION, i)
            signs = rng.integers(0, 2, size=n_spins) * 2.0 - 1.0
            delta = bathfield.compensated_vector_sum(signs[:, None] * per_spin_field)
            samples[i] = bathfield.optical_shift(b_ext + delta, p.emitter) - baseline
        return samples
    moment = SI29_MOMENT if spins.kind == "nuclear_si29" else None
    for i in range(p.realizations):
        rng = seeds.substream(p.bath.seed, seeds.TAG_ORIENTATION, i)
        u = seeds.random_unit_vectors(rng, n_spins)
        if moment is not None:
            moments = moment * u
        else:
            moments = 0.5 * MU_B * (u @ p.emitter.g_ground.matrix.T)
        delta = bathfield.compensated_vector_sum(np.einsum("nij,nj->ni", tensors, moments))
        samples[i] = bathfield.optical_shift(b_ext + delta, p.emitter) - baseline
    return samples


def _resolved_lines(centers: np.ndarray, counts: np.ndarray, prominence_fraction: float = 0.05) -> np.ndarray:
    """Centers of resolved spectral lines in a histogram."""
    from scipy.signal import find_peaks

    if counts.size < 3:
        return centers[np.argmax(counts)][None] if counts.size else np.empty(0)
    peaks, _ = find_peaks(counts, prominence=prominence_fraction * float(counts.max()))
    if peaks.size == 0:
        peaks = np.array([int(np.argmax(counts))])
    return centers[peaks]


# ---------------------------------------------------------------------------
# Convergence in the region radius


@dataclass(frozen=True)
class ConvergencePoint:
    radius_nm: float
    fwhm: float
    fwhm_error: float


@dataclass(frozen=True)
class ConvergenceReport:
    points: list[ConvergencePoint]
    converged_radius_nm: Optional[float]


def convergence_check(p: EnsembleParams, radii: Sequence[float]) -> ConvergenceReport:
    """FWHM versus region radius with shared inner-region samples.

    Every realization draws its bath once at the largest radius; smaller
    radii reuse the inner spins, so successive FWHM differences isolate
    the truncation effect. Reports the first radius at which the change
    from the previous radius is below 1 percent.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 2:
        raise ValueError("need at least two radii")
    if any(b < a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be ascending")
    r_max = radii[-1]
    big = replace(p, bath=replace(p.bath, region_radius_nm=r_max))
    kernel = _kernel_for(big)
    axis = big.quantization_axis
    b_ext = big.b_ext_vector
    baseline = bathfield.optical_shift(b_ext, p.emitter)
    per_radius_samples = [np.empty(p.realizations) for _ in radii]
    for i in range(p.realizations):
        rng = seeds.substream(p.bath.seed, seeds.TAG_REALIZATION, i)
        if kernel.kind == "nuclear_si29":
            positions, contributions = _drawn_nuclear(kernel, rng, axis)
        else:
            positions, contributions = _drawn_er(kernel, rng, axis)
        d2 = np.einsum("ij,ij->i", positions, positions)
        for k, r in enumerate(radii):
            inner = contributions[d2 <= r * r]
            delta = bathfield.compensated_vector_sum(inner)
            per_radius_samples[k][i] = bathfield.optical_shift(b_ext + delta, p.emitter) - baseline
    points = []
    boot_rng = seeds.substream(p.bath.seed, seeds.TAG_BOOTSTRAP)
    for r, samples in zip(radii, per_radius_samples):
        if float(samples.max() - samples.min()) == 0.0:
            points.append(ConvergencePoint(r, 0.0, 0.0))
            continue
        est = lineshape.fwhm_from_samples(samples, method=p.fwhm_method, bins=p.histogram_bins)
        err = lineshape.bootstrap_fwhm_error(samples, boot_rng, method=p.fwhm_method, bins=p.histogram_bins)
        points.append(ConvergencePoint(r, est.value, err))
    converged = None
    for prev, cur in zip(points, points[1:]):
        if prev.fwhm == cur.fwhm == 0.0 or (prev.fwhm > 0 and abs(cur.fwhm - prev.fwhm) / prev.fwhm < 0.01):
            converged = cur.radius_nm
            break
    return ConvergenceReport(points=points, converged_radius_nm=converged)


def _drawn_nuclear(kernel: _BathKernel, rng, axis):
    p = kernel.bath.abundance
    if p == 0.0 or kernel.n_sites == 0:
        return np.empty((0, 3)), np.empty((0, 3))
    if p == 1.0:
        idx = np.arange(kernel.n_sites)
    else:
        k = int(rng.binomial(kernel.n_sites, p))
        idx = np.sort(rng.choice(kernel.n_sites, size=k, replace=False))
    tensors = kernel.tensors[idx]
    if kernel.bath.orientation_model == "isotropic":
        u = seeds.random_unit_vectors(rng, idx.size)
        moments = SI29_MOMENT * u
    else:
        signs = rng.integers(0, 2, size=idx.size) * 2.0 - 1.0
        moments = signs[:, None] * (SI29_MOMENT * axis)[None, :]
    return kernel.sites_nm[idx], np.einsum("nij,nj->ni", tensors, moments)


def _drawn_er(kernel: _BathKernel, rng, axis):
    count = int(rng.poisson(kernel.poisson_mean))
    if count == 0:
        return np.empty((0, 3)), np.empty((0, 3))
    u = rng.random(count)
    while np.any(u == 0.0):
        bad = u == 0.0
        u[bad] = rng.random(int(bad.sum()))
    radii = kernel.bath.region_radius_nm * np.cbrt(u)
    directions = seeds.random_unit_vectors(rng, count)
    positions = radii[:, None] * directions
    tensors = bathfield.dipole_tensors(positions * NM_TO_M)
    if kernel.bath.orientation_model == "isotropic":
        ori = seeds.random_unit_vectors(rng, count)
        moments = 0.5 * MU_B * (ori @ kernel.g_ground.T)
    else:
        signs = rng.integers(0, 2, size=count) * 2.0 - 1.0
        base = 0.5 * MU_B * (kernel.g_ground @ axis)
        moments = signs[:, None] * base[None, :]
    return positions, np.einsum("nij,nj->ni", tensors, moments)
