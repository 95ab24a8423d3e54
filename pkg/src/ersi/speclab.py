"""Spectroscopy analysis pipelines with matching synthetic-data generators.

Every analysis (peak detection, spectral-diffusion linewidths, photon-echo
coherence, laser-induced dephasing scaling, pulsed autocorrelation,
lifetime fits) has a generator drawing from the exact parametric model
with realistic noise, so the full pipeline is testable without recorded
data.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import median_filter

from . import fitkit, seeds
from .fitkit import FitResult


@dataclass(frozen=True)
class Spectrum:
    """One pulsed-fluorescence spectral scan."""

    detuning_hz: np.ndarray
    counts: np.ndarray
    repetitions: int = 10_000
    pulse_duration_s: float = 1e-7
    integration_window_s: float = 1e-4

    def __post_init__(self):
        d = np.asarray(self.detuning_hz, dtype=float)
        c = np.asarray(self.counts, dtype=float)
        if d.shape != c.shape or d.ndim != 1:
            raise ValueError("detuning and counts must be equal-length 1d arrays")
        if np.any(np.diff(d) <= 0):
            raise ValueError("detunings must be strictly increasing")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        d.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "detuning_hz", d)
        object.__setattr__(self, "counts", c)


@dataclass(frozen=True)
class EchoDataset:
    """Photon-echo amplitudes versus inter-pulse delay."""

    delays_s: np.ndarray
    echo_amplitude: np.ndarray
    tau_pi_s: float
    pulse_shape: str = "gaussian"

    def __post_init__(self):
        d = np.asarray(self.delays_s, dtype=float)
        a = np.asarray(self.echo_amplitude, dtype=float)
        if d.shape != a.shape or d.ndim != 1:
            raise ValueError("delays and amplitudes must be equal-length 1d arrays")
        if np.any(np.diff(d) <= 0):
            raise ValueError("delays must be strictly ascending")
        if self.tau_pi_s <= 0:
            raise ValueError("tau_pi_s must be positive")
        d.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "delays_s", d)
        object.__setattr__(self, "echo_amplitude", a)


@dataclass(frozen=True)
class PhotonRecord:
    """Per-trial detection counts indexed by pulse number, plus dark-count metadata."""

    counts: np.ndarray  # (trials, pulses) non-negative integers
    dark_count_rate_hz: float
    window_s: float

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2:
            raise ValueError("counts must have shape (trials, pulses)")
        if np.any(c < 0) or not np.issubdtype(c.dtype, np.integer):
            raise ValueError("counts must be non-negative integers")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)


# ---------------------------------------------------------------------------
# Peak detection


@dataclass(frozen=True)
class PeakCandidate:
    detuning_hz: float
    height: float
    excess: float  # height above the local baseline


def detect_peaks(s: Spectrum, prominence_threshold: Optional[float] = None, baseline_window: int = 50) -> list[PeakCandidate]:
    """Candidate emitter lines: local maxima above the local baseline.

    The default threshold is 5x the median absolute deviation of the
    baseline-subtracted counts in a rolling window.
    """
    from scipy.signal import find_peaks

    counts = np.asarray(s.counts, dtype=float)
    if counts.size < 16:
        raise ValueError("need at least 16 points")
    window = baseline_window + 1 - baseline_window % 2  # odd size
    baseline = median_filter(counts, size=window, mode="nearest")
    resid = counts - baseline
    mad = median_filter(np.abs(resid), size=window, mode="nearest")
    if prominence_threshold is None:
        threshold = 5.0 * mad
    else:
        threshold = np.full_like(counts, float(prominence_threshold))
    peaks, _ = find_peaks(counts)
    out = []
    for idx in peaks:
        if resid[idx] > threshold[idx]:
            out.append(PeakCandidate(float(s.detuning_hz[idx]), float(counts[idx]), float(resid[idx])))
    return sorted(out, key=lambda c: c.detuning_hz)


# ---------------------------------------------------------------------------
# Spectral-diffusion linewidth


@dataclass(frozen=True)
class SDLinewidthResult:
    fit: FitResult  # Lorentzian fit of the time-averaged spectrum
    per_epoch_centers_hz: np.ndarray
    per_epoch_fwhm_hz: np.ndarray
    max_center_excursion_hz: float
    epoch_mean_fwhm_hz: float  # average of per-epoch fits, reported alongside


def sd_linewidth(spectra: Sequence[Spectrum]) -> SDLinewidthResult:
    """Lorentzian SD linewidth of one emitter from repeated spectra.

    The headline number fits the time-averaged spectrum; the drift report
    carries per-epoch fitted centers and widths plus the maximum center
    excursion.
    """
    if len(spectra) == 0:
        raise ValueError("need at least one spectrum")
    ref = spectra[0].detuning_hz
    for s in spectra[1:]:
        if s.detuning_hz.shape != ref.shape or not np.array_equal(s.detuning_hz, ref):
            raise ValueError("all epochs must share the same detuning grid")
    mean_counts = np.mean([s.counts for s in spectra], axis=0)
    fit = fitkit.fit_lorentzian_peak(ref, mean_counts)
    centers, widths = [], []
    if len(spectra) > 1:
        for s in spectra:
            epoch_fit = fitkit.fit_lorentzian_peak(ref, s.counts)
            centers.append(epoch_fit.params["center"])
            widths.append(abs(epoch_fit.params["fwhm"]))
    centers = np.asarray(centers)
    widths = np.asarray(widths)
    excursion = float(centers.max() - centers.min()) if centers.size else 0.0
    return SDLinewidthResult(
        fit=fit,
        per_epoch_centers_hz=centers,
        per_epoch_fwhm_hz=widths,
        max_center_excursion_hz=excursion,
        epoch_mean_fwhm_hz=float(widths.mean()) if widths.size else abs(fit.params["fwhm"]),
    )


# ---------------------------------------------------------------------------
# Photon echo and dephasing


def echo_t2(d: EchoDataset, delay_convention: str = "inter_pulse") -> FitResult:
    """Optical coherence time from the echo decay.

    Default convention: amplitude ~ exp(-2 tau / T2) with tau the
    inter-pulse delay (total free evolution 2 tau). Set
    ``delay_convention="total_evolution"`` if the delay axis already is
    the full evolution time.
    """
    if d.delays_s.size < 5:
        raise ValueError("need at least 5 delays")
    if delay_convention == "inter_pulse":
        factor = 2.0
    elif delay_convention == "total_evolution":
        factor = 1.0
    else:
        raise ValueError(f"unknown delay convention: {delay_convention!r}")
    fit = fitkit.fit_exponential_decay(d.delays_s, d.echo_amplitude)
    params = dict(fit.params)
    sigma = dict(fit.sigma)
    params["t2"] = factor * params.pop("tau")
    sigma["t2"] = factor * sigma.pop("tau")
    return FitResult(params, sigma, fit.residual_norm, fit.dof, fit.converged, fit.message)


@dataclass(frozen=True)
class DephasingResult:
    xi: dict[str, tuple[float, float]]  # device -> (value, sigma)
    ratio: Optional[tuple[float, float]]
    saturation: dict[str, FitResult]
    t2_points: dict[str, tuple[np.ndarray, np.ndarray]]  # device -> (tau_pi, t2)


def dephasing_scaling(
    device_datasets: dict[str, Sequence[EchoDataset]],
    t1_s: Optional[dict[str, float]] = None,
) -> DephasingResult:
    """Laser-induced dephasing: T2 = xi * tau_pi per device.

    Extracts T2 for every pulse length, fits the line through the origin,
    and reports the ratio of the first two devices' xi values with
    propagated uncertainty. Devices with a known lifetime also get the
    saturation fit 1/T2 = 1/(xi tau) + 1/(2 T1).
    """
    xi: dict[str, tuple[float, float]] = {}
    saturation: dict[str, FitResult] = {}
    points: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for name, datasets in device_datasets.items():
        if len(datasets) < 2:
            raise ValueError(f"device {name!r} needs at least two pulse lengths")
        tau_pi = np.array([ds.tau_pi_s for ds in datasets])
        t2 = np.array([echo_t2(ds).params["t2"] for ds in datasets])
        fit = fitkit.fit_linear_origin(tau_pi, t2)
        xi[name] = (fit.params["xi"], fit.sigma["xi"])
        points[name] = (tau_pi, t2)
        if t1_s and name in t1_s:
            saturation[name] = fitkit.fit_saturation(tau_pi, t2, t1_s[name])
    ratio = None
    names = list(device_datasets)
    if len(names) >= 2:
        (va, sa), (vb, sb) = xi[names[0]], xi[names[1]]
        r = va / vb
        sr = abs(r) * math.sqrt((sa / va) ** 2 + (sb / vb) ** 2) if va != 0 and vb != 0 else 0.0
        ratio = (r, sr)
    return DephasingResult(xi=xi, ratio=ratio, saturation=saturation, t2_points=points)


def homogeneous_linewidth(t2_s: float) -> float:
    """Homogeneous linewidth Gamma_h = 1 / (pi T2), Hz."""
    if t2_s <= 0:
        raise ValueError("t2 must be positive")
    return 1.0 / (math.pi * t2_s)


# ---------------------------------------------------------------------------
# Pulsed autocorrelation


@dataclass(frozen=True)
class G2Result:
    lags: np.ndarray
    g2: np.ndarray  # dark-corrected, plateau-normalized, lag >= 1
    g2_zero_raw: float
    g2_zero_corrected: float
    mean_counts_per_pulse: float
    mean_signal_per_pulse: float
    dark_mean_per_pulse: float


def g2_pulsed(record: PhotonRecord, max_lag: int = 50, plateau_start: Optional[int] = None) -> G2Result:
    """Pulse-lag autocorrelation with dark-count correction.

    Accidental coincidences implied by the independently measured dark
    rate (mean d per window) are subtracted from every coincidence
    numerator: <n_i n_j> - 2 d <n> + d^2 (Poissonian darks), and the
    result is normalized by the large-lag plateau.
    """
    counts = record.counts.astype(float)
    trials, pulses = counts.shape
    if trials * pulses < 10_000:
        raise ValueError("need at least 1e4 pulse slots for meaningful statistics")
    if max_lag >= pulses:
        raise ValueError("max_lag must be smaller than the pulse count per trial")
    n_mean = float(counts.mean())
    d_mean = record.dark_count_rate_hz * record.window_s
    s_mean = n_mean - d_mean
    if n_mean == 0.0:
        raise ValueError("zero-signal stream: autocorrelation normalization undefined")
    raw0 = float(np.mean(counts * (counts - 1.0)))
    lags = np.arange(1, max_lag + 1)
    raw = np.array([float(np.mean(counts[:, :-lag] * counts[:, lag:])) for lag in lags])
    accidental = 2.0 * d_mean * n_mean - d_mean * d_mean
    corr = raw - accidental
    corr0 = raw0 - accidental
    if plateau_start is None:
        plateau_start = max_lag // 2
    plateau = float(np.mean(corr[lags >= plateau_start]))
    if plateau <= 0.0:
        raise ValueError("zero-signal stream: autocorrelation normalization undefined")
    plateau_raw = float(np.mean(raw[lags >= plateau_start]))
    return G2Result(
        lags=lags,
        g2=corr / plateau,
        g2_zero_raw=raw0 / plateau_raw,
        g2_zero_corrected=corr0 / plateau,
        mean_counts_per_pulse=n_mean,
        mean_signal_per_pulse=s_mean,
        dark_mean_per_pulse=d_mean,
    )


def fit_bunching(result: G2Result, pulse_period_s: float, n_bins: int = 12) -> FitResult:
    """Timescale of the bunching excess: exponential fit on log-binned lags."""
    lags = result.lags.astype(float)
    g2 = result.g2
    edges = np.unique(np.geomspace(1.0, lags.max(), n_bins + 1).round())
    times, values = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (lags >= lo) & (lags < hi)
        if np.any(mask):
            times.append(float(np.mean(lags[mask])) * pulse_period_s)
            values.append(float(np.mean(g2[mask])))
    return fitkit.fit_exponential_decay(np.asarray(times), np.asarray(values))


# ---------------------------------------------------------------------------
# Synthetic datasets (test oracles)


def _synth_rng(seed: int, kind: str) -> np.random.Generator:
    return seeds.substream(seed, seeds.TAG_SYNTH, zlib.crc32(kind.encode("ascii")))


def synth_spectrum(
    seed: int,
    center_hz: float = 0.0,
    fwhm_hz: float = 5.2e6,
    peak_counts: float = 1000.0,
    offset_counts: float = 10.0,
    span_hz: float = 1e8,
    step_hz: float = 2e6,
    noise: str = "poisson",
) -> tuple[Spectrum, dict]:
    """Single-Lorentzian pulsed-fluorescence scan."""
    rng = _synth_rng(seed, "spectrum")
    detuning = np.arange(-span_hz / 2.0, span_hz / 2.0 + step_hz / 2.0, step_hz) + center_hz * 0.0
    model = offset_counts + peak_counts / (1.0 + (2.0 * (detuning - center_hz) / fwhm_hz) ** 2)
    counts = rng.poisson(model).astype(float) if noise == "poisson" else model.copy()
    truth = {"center_hz": center_hz, "fwhm_hz": fwhm_hz, "peak_counts": peak_counts, "offset_counts": offset_counts, "noise": noise}
    return Spectrum(detuning_hz=detuning, counts=counts), truth


def synth_sd_series(
    seed: int,
    epochs: int = 10,
    drift_hz_per_epoch: float = 0.0,
    fwhm_hz: float = 5.2e6,
    peak_counts: float = 1000.0,
    offset_counts: float = 10.0,
    span_hz: float = 1e8,
    step_hz: float = 2e6,
    noise: str = "poisson",
) -> tuple[list[Spectrum], dict]:
    """Repeated scans of one emitter, optionally with a linear center drift."""
    rng = _synth_rng(seed, "sd_series")
    detuning = np.arange(-span_hz / 2.0, span_hz / 2.0 + step_hz / 2.0, step_hz)
    spectra = []
    for e in range(epochs):
        center = drift_hz_per_epoch * (e - (epochs - 1) / 2.0)
        model = offset_counts + peak_counts / (1.0 + (2.0 * (detuning - center) / fwhm_hz) ** 2)
        counts = rng.poisson(model).astype(float) if noise == "poisson" else model.copy()
        spectra.append(Spectrum(detuning_hz=detuning, counts=counts))
    truth = {"fwhm_hz": fwhm_hz, "drift_hz_per_epoch": drift_hz_per_epoch, "epochs": epochs, "noise": noise}
    return spectra, truth


def synth_echo(
    seed: int,
    t2_s: float = 20e-6,
    tau_pi_s: float = 1e-6,
    amplitude: float = 1.0,
    offset: float = 0.0,
    noise_sigma: float = 0.0,
    n_delays: int = 24,
    max_delay_factor: float = 1.5,
) -> tuple[EchoDataset, dict]:
    """Echo amplitude ~ exp(-2 tau / T2) over inter-pulse delays."""
    rng = _synth_rng(seed, "echo")
    delays = np.linspace(0.05, max_delay_factor, n_delays) * t2_s
    signal = offset + amplitude * np.exp(-2.0 * delays / t2_s)
    if noise_sigma > 0:
        signal = signal + noise_sigma * rng.standard_normal(delays.size)
    truth = {"t2_s": t2_s, "amplitude": amplitude, "offset": offset, "noise_sigma": noise_sigma}
    return EchoDataset(delays_s=delays, echo_amplitude=signal, tau_pi_s=tau_pi_s), truth


def synth_dephasing(
    seed: int,
    xi: dict[str, float],
    tau_pi_s: Sequence[float] = (0.2e-6, 0.5e-6, 1e-6, 2e-6, 5e-6),
    t1_s: Optional[dict[str, float]] = None,
    noise_sigma: float = 0.0,
) -> tuple[dict[str, list[EchoDataset]], dict]:
    """Per-device echo datasets following T2 = xi tau_pi (with optional
    lifetime saturation)."""
    datasets: dict[str, list[EchoDataset]] = {}
    for k, (name, x) in enumerate(xi.items()):
        per_device = []
        for j, tp in enumerate(tau_pi_s):
            t2 = x * tp
            if t1_s and name in t1_s:
                t2 = 1.0 / (1.0 / (x * tp) + 1.0 / (2.0 * t1_s[name]))
            ds, _ = synth_echo(seed + 1000 * k + j, t2_s=t2, tau_pi_s=tp, noise_sigma=noise_sigma)
            per_device.append(ds)
        datasets[name] = per_device
    truth = {"xi": dict(xi), "t1_s": dict(t1_s) if t1_s else None, "noise_sigma": noise_sigma}
    return datasets, truth


def synth_g2(
    seed: int,
    p_photon: float = 0.009,
    dark_rate_hz: float = 50.0,
    window_s: float = 1e-4,
    trials: int = 400,
    pulses: int = 200,
    source: str = "single_emitter",
    blink_on_prob: float = 1.0,
    blink_flip_prob: float = 0.0,
) -> tuple[PhotonRecord, dict]:
    """Pulsed photon stream: single emitter (<=1 photon per pulse) or
    Poissonian source, plus Poissonian detector dark counts.

    Optional two-state blinking modulates the emission probability and
    produces bunching on the blink timescale.
    """
    rng = _synth_rng(seed, "g2")
    if source == "single_emitter":
        if blink_flip_prob > 0.0 and blink_on_prob < 1.0:
            on = np.empty((trials, pulses), dtype=bool)
            on[:, 0] = rng.random(trials) < blink_on_prob
            for j in range(1, pulses):
                flip = rng.random(trials) < blink_flip_prob
                on[:, j] = np.where(flip, ~on[:, j - 1], on[:, j - 1])
            signal = (rng.random((trials, pulses)) < p_photon) & on
        else:
            signal = rng.random((trials, pulses)) < p_photon
        signal = signal.astype(np.int64)
    elif source == "poisson":
        signal = rng.poisson(p_photon, size=(trials, pulses))
    else:
        raise ValueError(f"unknown source kind: {source!r}")
    dark = rng.poisson(dark_rate_hz * window_s, size=(trials, pulses))
    truth = {
        "p_photon": p_photon,
        "dark_rate_hz": dark_rate_hz,
        "window_s": window_s,
        "source": source,
        "blink_on_prob": blink_on_prob,
        "blink_flip_prob": blink_flip_prob,
    }
    return PhotonRecord(counts=signal + dark, dark_count_rate_hz=dark_rate_hz, window_s=window_s), truth


def synth_lifetime(
    seed: int,
    tau_s: float = 43e-6,
    amplitude: float = 2000.0,
    dark_floor: float = 5.0,
    t_max_s: float = 5e-4,
    n_bins: int = 100,
    noise: str = "poisson",
) -> tuple[tuple[np.ndarray, np.ndarray], dict]:
    """Fluorescence-decay histogram with a dark-count floor."""
    rng = _synth_rng(seed, "lifetime")
    t = np.linspace(0.0, t_max_s, n_bins)
    model = dark_floor + amplitude * np.exp(-t / tau_s)
    y = rng.poisson(model).astype(float) if noise == "poisson" else model.copy()
    truth = {"tau_s": tau_s, "amplitude": amplitude, "dark_floor": dark_floor, "noise": noise}
    return (t, y), truth


# ---------------------------------------------------------------------------
# Emitter summary table


def format_value_uncertainty(value: float, uncertainty: float) -> str:
    """Concise value(uncertainty) notation, e.g. 2.4(4) or 7.6(23).

    The uncertainty keeps one significant digit, or two when its leading
    digit is 1 or 2; the value is rounded to the same decimal place.
    """
    if not math.isfinite(value):
        return str(value)
    if not math.isfinite(uncertainty) or uncertainty <= 0:
        return f"{value:g}"
    exp = math.floor(math.log10(uncertainty))
    first = int(uncertainty / 10**exp)
    digits = 2 if first in (1, 2) else 1
    place = exp - (digits - 1)
    decimals = max(0, -place)
    value_r = round(value, -place)
    u_int = int(round(uncertainty / 10**place))
    if decimals == 0:
        return f"{value_r:.0f}({u_int * 10**place:g})"
    return f"{value_r:.{decimals}f}({u_int})"


@dataclass(frozen=True)
class EmitterRow:
    emitter_id: str
    sample: str
    purcell: float
    purcell_sigma: float
    sd_lw_mhz: float
    sd_lw_sigma_mhz: float
    detuning_ghz: float
    repetitions_millions: float


@dataclass(frozen=True)
class EmitterTable:
    rows: list[EmitterRow]
    mean_purcell: float
    std_purcell: float
    mean_sd_lw_mhz: float
    std_sd_lw_mhz: float

    @property
    def formatted_means(self) -> dict[str, str]:
        return {
            "P": format_value_uncertainty(self.mean_purcell, self.std_purcell),
            "sd_lw_MHz": format_value_uncertainty(self.mean_sd_lw_mhz, self.std_sd_lw_mhz),
        }


def emitter_table(rows: Sequence[EmitterRow]) -> EmitterTable:
    """Summary table: per-emitter rows plus mean and standard deviation."""
    rows = list(rows)
    if not rows:
        return EmitterTable(rows=[], mean_purcell=math.nan, std_purcell=math.nan, mean_sd_lw_mhz=math.nan, std_sd_lw_mhz=math.nan)
    p = np.array([r.purcell for r in rows])
    lw = np.array([r.sd_lw_mhz for r in rows])
    std_p = float(np.std(p, ddof=1)) if len(rows) > 1 else 0.0
    std_lw = float(np.std(lw, ddof=1)) if len(rows) > 1 else 0.0
    return EmitterTable(
        rows=rows,
        mean_purcell=float(p.mean()),
        std_purcell=std_p,
        mean_sd_lw_mhz=float(lw.mean()),
        std_sd_lw_mhz=std_lw,
    )
