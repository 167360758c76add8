"""Shared nonlinear fitting engine (weighted least squares and Poisson MLE)
plus the excitation-power saturation fit I(P) = A(1 - exp(-P/P_sat)) + B*P."""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from . import errors

MAX_ITER = 500
COV_CONDITION_LIMIT = 1e10
COV_DEGENERATE_LIMIT = 1e15


@dataclass
class FitProblem:
    model: Callable            # model(params, x) -> predicted y
    x: np.ndarray
    y: np.ndarray
    p0: np.ndarray
    sigma: Optional[np.ndarray] = None     # least_squares weights
    bounds: Optional[tuple] = None         # (lo, hi) arrays
    objective: str = "least_squares"       # or "poisson_mle"

    def validate(self):
        x, y = np.asarray(self.x), np.asarray(self.y)
        if len(x) != len(y):
            raise errors.InvalidParams("x and y lengths differ")
        if len(x) < len(np.asarray(self.p0)):
            raise errors.InvalidParams("fewer data points than parameters")
        if self.objective not in ("least_squares", "poisson_mle"):
            raise errors.InvalidParams(f"unknown objective {self.objective!r}")
        if self.bounds is not None:
            lo, hi = self.bounds
            p0 = np.asarray(self.p0, dtype=float)
            if np.any(p0 < lo) or np.any(p0 > hi):
                raise errors.InvalidParams("initial values outside bounds")


@dataclass
class FitResult:
    params: np.ndarray
    covariance: np.ndarray
    objective_value: float
    converged: bool
    n_iter: int = 0
    stderr: np.ndarray = field(default=None)
    covariance_unreliable: bool = False
    message: str = ""


def _fd_gradient(f, p, scale=None):
    """Central-difference gradient with per-parameter adaptive step."""
    p = np.asarray(p, dtype=float)
    g = np.zeros_like(p)
    for i in range(len(p)):
        h = math.sqrt(np.finfo(float).eps) * max(abs(p[i]), 1e-8 if scale is None else scale[i])
        e = np.zeros_like(p)
        e[i] = h
        g[i] = (f(p + e) - f(p - e)) / (2 * h)
    return g


def _fd_hessian(f, p):
    p = np.asarray(p, dtype=float)
    n = len(p)
    h = np.maximum(np.abs(p), 1e-8) * (np.finfo(float).eps ** 0.25)
    hess = np.zeros((n, n))
    f0 = f(p)
    for i in range(n):
        ei = np.zeros(n); ei[i] = h[i]
        for j in range(i, n):
            ej = np.zeros(n); ej[j] = h[j]
            if i == j:
                hess[i, i] = (f(p + ei) - 2 * f0 + f(p - ei)) / h[i] ** 2
            else:
                hess[i, j] = hess[j, i] = (
                    f(p + ei + ej) - f(p + ei - ej)
                    - f(p - ei + ej) + f(p - ei - ej)
                ) / (4 * h[i] * h[j])
    return hess


def _covariance(curvature):
    """Inverse curvature with a conditioning flag; raises on degeneracy.

    Conditioning is judged on the scale-normalized curvature so that
    benign parameter-scale disparities do not mask (or mimic) genuine
    redundancy between parameters.
    """
    if not np.all(np.isfinite(curvature)):
        raise errors.SingularCurvature(
            "non-finite curvature at optimum; parameters not identifiable")
    diag = np.diag(curvature)
    if np.any(diag <= 0):
        raise errors.SingularCurvature(
            "flat curvature direction; parameter has no effect on the model")
    d = np.sqrt(diag)
    normalized = curvature / np.outer(d, d)
    try:
        cond = np.linalg.cond(normalized)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > COV_DEGENERATE_LIMIT:
        raise errors.SingularCurvature(
            "singular curvature at optimum; check for redundant parameters")
    cov = np.linalg.pinv(curvature)
    return cov, cond > COV_CONDITION_LIMIT


def fit_nonlinear(problem: FitProblem) -> FitResult:
    """Bound-constrained descent on the configured objective.

    Least squares uses a trust-region reflective solver; Poisson MLE uses
    L-BFGS-B with central-difference gradients. MaxIterations returns the
    best point found with converged=False rather than raising.
    """
    problem.validate()
    x = np.asarray(problem.x, dtype=float)
    y = np.asarray(problem.y, dtype=float)
    p0 = np.asarray(problem.p0, dtype=float)
    if problem.bounds is None:
        lo = np.full(len(p0), -np.inf)
        hi = np.full(len(p0), np.inf)
    else:
        lo = np.asarray(problem.bounds[0], dtype=float)
        hi = np.asarray(problem.bounds[1], dtype=float)

    if problem.objective == "least_squares":
        sigma = np.ones(len(y)) if problem.sigma is None \
            else np.asarray(problem.sigma, dtype=float)

        def resid(p):
            return (problem.model(p, x) - y) / sigma

        res = optimize.least_squares(
            resid, p0, bounds=(lo, hi), method="trf",
            ftol=1e-12, xtol=1e-14, gtol=1e-12, max_nfev=MAX_ITER * len(p0))
        chi2 = 2.0 * res.cost
        curvature = res.jac.T @ res.jac
        cov, unreliable = _covariance(curvature)
        return FitResult(
            params=res.x, covariance=cov, objective_value=chi2,
            converged=bool(res.status > 0), n_iter=res.nfev,
            stderr=np.sqrt(np.maximum(np.diag(cov), 0.0)),
            covariance_unreliable=unreliable, message=res.message)

    # Poisson MLE: nll = sum(mu - k*log(mu)) up to a model-free constant
    tiny = 1e-300

    def nll(p):
        mu = np.maximum(problem.model(p, x), tiny)
        return float(np.sum(mu - y * np.log(mu)))

    scale = np.maximum(np.abs(p0), 1e-8)
    res = optimize.minimize(
        nll, p0, jac=lambda p: _fd_gradient(nll, p, scale),
        method="L-BFGS-B", bounds=list(zip(lo, hi)),
        options={"maxiter": MAX_ITER, "ftol": 1e-13, "gtol": 1e-10})
    hess = _fd_hessian(nll, res.x)
    cov, unreliable = _covariance(hess)
    return FitResult(
        params=res.x, covariance=cov, objective_value=float(res.fun),
        converged=bool(res.success), n_iter=int(res.nit),
        stderr=np.sqrt(np.maximum(np.diag(cov), 0.0)),
        covariance_unreliable=unreliable,
        message=str(res.message))


# --- saturation model --------------------------------------------------------

@dataclass(frozen=True)
class SaturationPoint:
    fluence: float      # uJ/cm^2 per pulse
    intensity: float    # detected counts/s
    sigma: float        # uncertainty on intensity


@dataclass
class SaturationFit:
    A: float            # single-exciton amplitude, counts/s
    B: float            # linear (bi-exciton) term, counts/s per uJ/cm^2
    P_sat: float        # saturation fluence, uJ/cm^2
    covariance: np.ndarray
    stderr: np.ndarray
    converged: bool


def saturation_model(params, fluence):
    A, B, P_sat = params
    return A * -np.expm1(-np.asarray(fluence, dtype=float) / P_sat) + B * fluence


def fit_saturation(points) -> SaturationFit:
    """Weighted least-squares fit of the saturation curve."""
    points = sorted(points, key=lambda p: p.fluence)
    P = np.array([p.fluence for p in points], dtype=float)
    I = np.array([p.intensity for p in points], dtype=float)
    S = np.array([p.sigma for p in points], dtype=float)
    if np.any(P < 0):
        raise errors.NegativeFluence("fluences must be >= 0")
    pos = P[P > 0]
    if len(points) < 4 or len(pos) < 2 or pos.max() / pos.min() < 3.0:
        raise errors.InsufficientSpan(
            "need >= 4 points spanning at least a factor 3 in fluence")
    if np.any(S <= 0):
        raise errors.InvalidParams("sigmas must be > 0")

    # fit in normalized units so the result is exactly equivariant under
    # rescaling of the fluence or intensity axis
    p_ref = float(P.max())
    i_ref = float(I.max())
    Pn, In, Sn = P / p_ref, I / i_ref, S / i_ref

    b0 = max((In[-1] - In[-2]) / (Pn[-1] - Pn[-2]), 0.0)
    p0 = np.array([In.max(), b0, float(np.median(Pn))])
    problem = FitProblem(
        model=saturation_model, x=Pn, y=In, sigma=Sn, p0=p0,
        bounds=(np.array([0.0, 0.0, 1e-12]), np.array([np.inf] * 3)),
        objective="least_squares")
    res = fit_nonlinear(problem)
    A, B, P_sat = res.params
    scale = np.array([i_ref, i_ref / p_ref, p_ref])
    cov = res.covariance * np.outer(scale, scale)
    return SaturationFit(A=float(A * i_ref), B=float(B * i_ref / p_ref),
                         P_sat=float(P_sat * p_ref),
                         covariance=cov, stderr=res.stderr * scale,
                         converged=res.converged)
