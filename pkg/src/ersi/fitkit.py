"""Nonlinear least squares and the parametric models used by the analysis.

The solver is a damped Gauss-Newton (Levenberg-Marquardt) iteration with
a numerical Jacobian. All reductions over data points use exactly rounded
summation (math.fsum), so results are bit-identical under any reordering
of the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class FitError(RuntimeError):
    pass


class SingularJacobianError(FitError):
    pass


@dataclass(frozen=True)
class FitResult:
    params: dict[str, float]
    sigma: dict[str, float]
    residual_norm: float
    dof: int
    converged: bool
    message: str = ""

    def __getitem__(self, name: str) -> float:
        return self.params[name]


def _fsum(values: np.ndarray) -> float:
    return math.fsum(values.tolist())


def _normal_matrices(jac: np.ndarray, resid: np.ndarray, w: np.ndarray):
    """J^T W J and J^T W r with order-independent (exact) point sums."""
    p = jac.shape[1]
    jtj = np.empty((p, p))
    jtr = np.empty(p)
    wj = jac * w[:, None]
    for a in range(p):
        jtr[a] = _fsum(wj[:, a] * resid)
        for b in range(a, p):
            jtj[a, b] = jtj[b, a] = _fsum(wj[:, a] * jac[:, b])
    return jtj, jtr


def nlls_solve(
    model: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    init: Sequence[float],
    param_names: Sequence[str],
    weights: Optional[np.ndarray] = None,
    max_iter: int = 200,
    step_tol: float = 1e-10,
    cost_tol: float = 1e-12,
) -> FitResult:
    """Fit model(x, theta) to (x, y) by damped Gauss-Newton.

    Converged when the relative step drops below ``step_tol`` or the
    relative residual change below ``cost_tol``; otherwise returns the
    best parameters with ``converged=False``. Raises
    SingularJacobianError when no descent direction exists at the start.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = np.asarray(init, dtype=float).copy()
    n, p = y.size, theta.size
    if len(param_names) != p:
        raise ValueError("param_names must match the parameter count")
    if n < p + 1:
        raise FitError(f"need at least {p + 1} points to fit {p} parameters")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FitError("data must be finite")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)

    def cost_of(t: np.ndarray):
        r = y - model(x, t)
        return _fsum(w * r * r), r

    cost, resid = cost_of(theta)
    lam = 1e-3
    converged = cost == 0.0  # exact data at the initial guess: nothing to do
    message = "exact fit at initial parameters" if converged else ""
    iterations = 0
    while not converged and iterations < max_iter:
        iterations += 1
        jac = _numerical_jacobian(model, x, theta)
        if not np.all(np.isfinite(jac)):
            return _result(param_names, theta, None, cost, n, p, False, "non-finite jacobian")
        jtj, jtr = _normal_matrices(jac, resid, w)
        diag = np.diag(jtj).copy()
        if np.all(diag == 0.0):
            raise SingularJacobianError("jacobian vanishes: model is insensitive to all parameters")
        if iterations == 1 and np.linalg.matrix_rank(jtj) < p:
            raise SingularJacobianError("singular jacobian: parameters are not identifiable from the data")
        diag[diag == 0.0] = 1.0
        accepted = False
        for _ in range(40):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), jtr)
            except np.linalg.LinAlgError:
                if iterations == 1 and lam <= 1e-3:
                    raise SingularJacobianError("singular jacobian at initial parameters")
                lam *= 10.0
                continue
            new_theta = theta + step
            new_cost, new_resid = cost_of(new_theta)
            if np.isfinite(new_cost) and new_cost <= cost:
                rel_step = np.linalg.norm(step) / max(np.linalg.norm(theta), 1e-300)
                rel_drop = (cost - new_cost) / max(cost, 1e-300)
                theta, cost, resid = new_theta, new_cost, new_resid
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                if rel_step < step_tol or rel_drop < cost_tol or cost == 0.0:
                    converged = True
                break
            lam *= 10.0
        if not accepted:
            message = "no acceptable step found"
            break
    if not converged and not message:
        message = "maximum iterations reached"
    jac = _numerical_jacobian(model, x, theta)
    return _result(param_names, theta, (jac, w), cost, n, p, converged, message)


def _numerical_jacobian(model, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    base = np.sqrt(np.finfo(float).eps)
    jac = np.empty((x.size, theta.size))
    for j in range(theta.size):
        h = base * max(abs(theta[j]), 1.0)
        tp, tm = theta.copy(), theta.copy()
        tp[j] += h
        tm[j] -= h
        jac[:, j] = (model(x, tp) - model(x, tm)) / (2.0 * h)
    return jac


def _result(names, theta, jac_w, cost, n, p, converged, message) -> FitResult:
    dof = n - p
    sigma = {name: 0.0 for name in names}
    if jac_w is not None and dof > 0:
        jac, w = jac_w
        jtj, _ = _normal_matrices(jac, np.zeros(n), w)
        try:
            cov = np.linalg.inv(jtj) * (cost / dof)
            sigma = {name: float(math.sqrt(max(cov[i, i], 0.0))) for i, name in enumerate(names)}
        except np.linalg.LinAlgError:
            pass
    params = {name: float(theta[i]) for i, name in enumerate(names)}
    return FitResult(
        params=params,
        sigma=sigma,
        residual_norm=float(math.sqrt(cost)),
        dof=dof,
        converged=converged,
        message=message,
    )


# ---------------------------------------------------------------------------
# Specific models


def lorentzian_model(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    center, fwhm, amplitude, offset = theta
    return offset + amplitude / (1.0 + (2.0 * (x - center) / fwhm) ** 2)


def fit_lorentzian_peak(x, y, weights: str = "poisson") -> FitResult:
    """Lorentzian peak fit: params (center, fwhm, amplitude, offset).

    ``weights="poisson"`` applies 1/max(y,1) weights appropriate for
    photon-count spectra; ``"uniform"`` disables weighting.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 8:
        raise FitError("need at least 8 points spanning the peak")
    offset0 = float(np.min(y))
    amp0 = float(np.max(y) - offset0)
    center0 = float(x[np.argmax(y)])
    above = x[y > offset0 + amp0 / 2.0]
    fwhm0 = float(above.max() - above.min()) if above.size >= 2 else float((x[-1] - x[0]) / 4.0)
    if fwhm0 <= 0:
        fwhm0 = float((x[-1] - x[0]) / 4.0)
    w = None
    if weights == "poisson":
        w = 1.0 / np.clip(y, 1.0, None)
    result = nlls_solve(
        lorentzian_model,
        x,
        y,
        init=[center0, fwhm0, amp0, offset0],
        param_names=["center", "fwhm", "amplitude", "offset"],
        weights=w,
    )
    if result.converged and not (x.min() <= result.params["center"] <= x.max()):
        return FitResult(result.params, result.sigma, result.residual_norm, result.dof, False, "center outside data range")
    return result


def gaussian_model(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    center, sigma, amplitude, offset = theta
    return offset + amplitude * np.exp(-0.5 * ((x - center) / sigma) ** 2)


def fit_gaussian_peak(x, y) -> FitResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    offset0 = float(np.min(y))
    amp0 = float(np.max(y) - offset0)
    center0 = float(x[np.argmax(y)])
    above = x[y > offset0 + amp0 / 2.0]
    span = float(above.max() - above.min()) if above.size >= 2 else float((x[-1] - x[0]) / 4.0)
    sigma0 = max(span, float(x[1] - x[0])) / 2.3548
    return nlls_solve(
        gaussian_model,
        x,
        y,
        init=[center0, sigma0, amp0, offset0],
        param_names=["center", "sigma", "amplitude", "offset"],
    )


def exponential_model(t: np.ndarray, theta: np.ndarray) -> np.ndarray:
    amplitude, tau, offset = theta
    return offset + amplitude * np.exp(-t / tau)


def fit_exponential_decay(t, y, fix_offset: Optional[float] = None) -> FitResult:
    """Exponential decay fit: params (amplitude, tau, offset).

    tau is initialized from a log-linear regression of the
    baseline-subtracted data; non-decaying input is flagged rather than
    fitted.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 5:
        raise FitError("need at least 5 points")
    if np.any(np.diff(t) <= 0):
        raise FitError("time axis must be strictly ascending")
    offset0 = float(np.min(y)) if fix_offset is None else float(fix_offset)
    amp0 = float(y[0] - offset0)
    shifted = y - offset0
    positive = shifted > 0
    tau0 = None
    if positive.sum() >= 3 and amp0 > 0:
        slope = np.polyfit(t[positive], np.log(shifted[positive]), 1)[0]
        if slope < 0:
            tau0 = -1.0 / slope
    if tau0 is None or not np.isfinite(tau0):
        return FitResult(
            params={"amplitude": amp0, "tau": 0.0, "offset": offset0},
            sigma={"amplitude": 0.0, "tau": 0.0, "offset": 0.0},
            residual_norm=float(np.linalg.norm(y - np.mean(y))),
            dof=t.size - 3,
            converged=False,
            message="data do not decay",
        )
    if fix_offset is not None:
        result = nlls_solve(
            lambda tt, th: fix_offset + th[0] * np.exp(-tt / th[1]),
            t,
            y,
            init=[amp0, tau0],
            param_names=["amplitude", "tau"],
        )
        params = dict(result.params, offset=float(fix_offset))
        sigma = dict(result.sigma, offset=0.0)
        return FitResult(params, sigma, result.residual_norm, result.dof, result.converged, result.message)
    result = nlls_solve(
        exponential_model,
        t,
        y,
        init=[amp0, tau0, offset0],
        param_names=["amplitude", "tau", "offset"],
    )
    if result.converged and result.params["tau"] <= 0:
        return FitResult(result.params, result.sigma, result.residual_norm, result.dof, False, "non-positive tau")
    return result


def rabi_model(a: np.ndarray, theta: np.ndarray) -> np.ndarray:
    pi_amplitude, visibility, offset = theta
    return offset + 0.5 * visibility * (1.0 - np.cos(np.pi * a / pi_amplitude))


def fit_sine_rabi(amplitude_axis, signal) -> FitResult:
    """Rabi oscillation fit: params (pi_amplitude, visibility, offset).

    pi_amplitude is the drive amplitude of the first signal maximum. The
    fit is flagged non-converged when the data cover less than one
    oscillation period.
    """
    a = np.asarray(amplitude_axis, dtype=float)
    y = np.asarray(signal, dtype=float)
    span = float(a.max() - a.min())
    # Dominant period from the discrete spectrum of the detrended signal.
    detrended = y - np.mean(y)
    spectrum = np.abs(np.fft.rfft(detrended))
    freqs = np.fft.rfftfreq(a.size, d=span / max(a.size - 1, 1))
    k = int(np.argmax(spectrum[1:]) + 1)
    period0 = 1.0 / freqs[k] if freqs[k] > 0 else 2.0 * span
    pi0 = period0 / 2.0
    vis0 = float(y.max() - y.min())
    off0 = float(y.min())
    result = nlls_solve(
        rabi_model,
        a,
        y,
        init=[pi0, vis0, off0],
        param_names=["pi_amplitude", "visibility", "offset"],
    )
    if abs(result.params["pi_amplitude"]) > span:
        return FitResult(result.params, result.sigma, result.residual_norm, result.dof, False, "less than one full oscillation covered")
    return result


def fit_linear_origin(tau_pi, t2) -> FitResult:
    """Closed-form fit of T2 = xi * tau_pi (line through the origin)."""
    tau = np.asarray(tau_pi, dtype=float)
    y = np.asarray(t2, dtype=float)
    if tau.size == 0:
        raise FitError("no data")
    sxx = _fsum(tau * tau)
    if sxx == 0.0:
        raise FitError("all tau_pi are zero")
    xi = _fsum(tau * y) / sxx
    resid = y - xi * tau
    rss = _fsum(resid * resid)
    dof = tau.size - 1
    sigma = math.sqrt(rss / dof / sxx) if dof > 0 else 0.0
    return FitResult(
        params={"xi": float(xi)},
        sigma={"xi": float(sigma)},
        residual_norm=float(math.sqrt(rss)),
        dof=dof,
        converged=True,
    )


def saturation_model(tau: np.ndarray, xi: float, t1: float) -> np.ndarray:
    """T2(tau) = 1 / (1/(xi tau) + 1/(2 T1)); approaches 2 T1 as tau -> inf."""
    return 1.0 / (1.0 / (xi * tau) + 1.0 / (2.0 * t1))


def fit_saturation(tau_pi, t2, t1: float) -> FitResult:
    """One-parameter saturation fit with the lifetime T1 held fixed."""
    if t1 <= 0:
        raise FitError("t1 must be positive")
    tau = np.asarray(tau_pi, dtype=float)
    y = np.asarray(t2, dtype=float)
    if np.any(tau <= 0) or np.any(y <= 0):
        raise FitError("data must be positive")
    # Invert the model per point for a robust initial xi.
    with np.errstate(divide="ignore"):
        inv = 1.0 / y - 1.0 / (2.0 * t1)
    valid = inv > 0
    xi0 = float(np.median(1.0 / (inv[valid] * tau[valid]))) if np.any(valid) else 1.0
    return nlls_solve(
        lambda tt, th: saturation_model(tt, th[0], t1),
        tau,
        y,
        init=[xi0],
        param_names=["xi"],
    )
