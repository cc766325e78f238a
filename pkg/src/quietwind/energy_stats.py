"""Wind-resource statistics and expected energy.

A Weibull density describes how often each wind speed occurs; a Gaussian
process fitted to observed (wind speed, Cp) pairs describes how a controller
actually converts it. Their product, integrated over the operating range,
gives the expected energy yield and the expected spread of Cp.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg, optimize
from scipy.special import gamma as gamma_fn

from .turbine_model import BETZ_LIMIT

SECONDS_PER_YEAR = 365.0 * 24.0 * 3600.0


class DomainError(ValueError):
    pass


class SingularCovariance(np.linalg.LinAlgError):
    pass


class QuadratureFailure(RuntimeError):
    pass


# --- Weibull ----------------------------------------------------------------------

@dataclass(frozen=True)
class WeibullParams:
    k: float
    c: float

    def __post_init__(self):
        if not (self.k > 0 and self.c > 0):
            raise DomainError("Weibull shape and scale must be positive")

    @property
    def mean(self) -> float:
        return self.c * gamma_fn(1.0 + 1.0 / self.k)

    @property
    def std(self) -> float:
        g1 = gamma_fn(1.0 + 1.0 / self.k)
        return self.c * math.sqrt(gamma_fn(1.0 + 2.0 / self.k) - g1 * g1)

    def raw_moment(self, n: float) -> float:
        return self.c**n * gamma_fn(1.0 + n / self.k)


def fit_weibull(mean: float, std: float) -> WeibullParams:
    """Moment-based fit: k = (std/mean)^-1.086, c = mean / Gamma(1 + 1/k)."""
    if not (mean > 0 and std > 0):
        raise DomainError("mean and standard deviation must be positive")
    k = (std / mean) ** -1.086
    return WeibullParams(k, mean / gamma_fn(1.0 + 1.0 / k))


def weibull_pdf(u, p: WeibullParams):
    u = np.asarray(u, dtype=float)
    x = np.maximum(u, 0.0) / p.c
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (p.k / p.c) * x ** (p.k - 1.0) * np.exp(-(x**p.k))
    out = np.where(u < 0, 0.0, out)
    return out if out.ndim else float(out)


def weibull_cdf(u, p: WeibullParams):
    u = np.asarray(u, dtype=float)
    out = np.where(u <= 0, 0.0, -np.expm1(-((np.maximum(u, 0.0) / p.c) ** p.k)))
    return out if out.ndim else float(out)


# --- Gaussian process -----------------------------------------------------------------

@dataclass(frozen=True)
class GpHyper:
    signal_var: float
    length_scale: float
    noise_var: float


def _sqexp(a, b, signal_var, length):
    d = np.subtract.outer(a, b)
    return signal_var * np.exp(-0.5 * (d / length) ** 2)


def _factor(K):
    """Cholesky with jitter escalation; returns (cho_factor, jitter used)."""
    scale = max(float(np.mean(np.diag(K))), 1e-300)
    jitter = 0.0
    for attempt in range(7):
        try:
            return linalg.cho_factor(K + jitter * np.eye(len(K)), lower=True), jitter
        except np.linalg.LinAlgError:
            jitter = scale * 10.0 ** (attempt - 10)  # 1e-10 ... 1e-4 relative
    raise SingularCovariance("training covariance not positive definite even with 1e-4 relative jitter")


@dataclass
class GpModel:
    """Exact GP regression with a constant mean and squared-exponential kernel."""

    x: np.ndarray
    y: np.ndarray
    hyper: GpHyper
    offset: float
    chol: tuple
    alpha: np.ndarray
    jitter: float = 0.0

    def _kstar(self, u):
        return _sqexp(np.atleast_1d(np.asarray(u, dtype=float)), self.x,
                      self.hyper.signal_var, self.hyper.length_scale)

    def mean(self, u):
        """Predictive mean of Cp; not clamped (see ``clamped_mean``)."""
        scalar = np.ndim(u) == 0
        m = self.offset + self._kstar(u) @ self.alpha
        return float(m[0]) if scalar else m

    def clamped_mean(self, u):
        out = np.clip(self.mean(u), 0.0, BETZ_LIMIT)
        return float(out) if np.ndim(out) == 0 else out

    def std(self, u, include_noise: bool = True):
        """Predictive standard deviation; with the noise term it is the spread of observed Cp."""
        scalar = np.ndim(u) == 0
        ks = self._kstar(u)
        v = linalg.cho_solve(self.chol, ks.T)
        var = self.hyper.signal_var - np.sum(ks * v.T, axis=1)
        if include_noise:
            var = var + self.hyper.noise_var
        s = np.sqrt(np.maximum(var, 0.0))
        return float(s[0]) if scalar else s

    def log_marginal_likelihood(self) -> float:
        return _lml(self.x, self.y - self.offset, self.hyper)


def _lml(x, yc, h: GpHyper) -> float:
    K = _sqexp(x, x, h.signal_var, h.length_scale) + h.noise_var * np.eye(len(x))
    try:
        c, low = linalg.cho_factor(K, lower=True)
    except np.linalg.LinAlgError:
        return -np.inf
    a = linalg.cho_solve((c, low), yc)
    return float(-0.5 * yc @ a - np.sum(np.log(np.diag(c))) - 0.5 * len(x) * math.log(2 * math.pi))


def _select_hyper(x, yc) -> GpHyper:
    var = max(float(np.var(yc)), 1e-12)
    lengths = np.geomspace(0.25, 4.0, 9)
    signals = var * np.logspace(-2, 1, 7)
    noises = var * np.logspace(-4, 0, 9)
    best, best_h = -np.inf, None
    for ell in lengths:
        for sv in signals:
            for nv in noises:
                h = GpHyper(sv, ell, nv)
                v = _lml(x, yc, h)
                if v > best:
                    best, best_h = v, h
    # one coordinate-descent pass in log space, each within a decade of the grid optimum
    logs = np.log([best_h.signal_var, best_h.length_scale, best_h.noise_var])
    for i in range(3):
        def neg(t, i=i):
            z = logs.copy()
            z[i] = t
            return -_lml(x, yc, GpHyper(*np.exp(z)))
        res = optimize.minimize_scalar(neg, bounds=(logs[i] - 2.3, logs[i] + 2.3), method="bounded",
                                       options={"xatol": 1e-3})
        if res.success and -res.fun > best:
            best = -res.fun
            logs[i] = res.x
    return GpHyper(*np.exp(logs))


def fit_gp(wind_speeds, cps, *, hyper: GpHyper | None = None, max_points: int = 300,
           seed: int = 0) -> GpModel:
    """Fit mu_Cp(u), sigma_Cp(u) to observed pairs.

    Hyperparameters come from a log-marginal-likelihood grid search plus one
    coordinate-descent pass unless given. Datasets larger than ``max_points``
    are subsampled without replacement (seeded) to keep the fit cubic-cost
    bounded.
    """
    x = np.asarray(wind_speeds, dtype=float)
    y = np.asarray(cps, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("wind speeds and Cp values must be 1-D and equal length")
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if np.unique(x).size < 2:
        raise ValueError("need at least two distinct wind speeds")
    if x.size > max_points:
        idx = np.sort(np.random.default_rng(seed).choice(x.size, max_points, replace=False))
        x, y = x[idx], y[idx]
    offset = float(np.mean(y))
    yc = y - offset
    if hyper is None:
        hyper = _select_hyper(x, yc)
    K = _sqexp(x, x, hyper.signal_var, hyper.length_scale) + hyper.noise_var * np.eye(x.size)
    chol, jitter = _factor(K)
    alpha = linalg.cho_solve(chol, yc)
    return GpModel(x, y, hyper, offset, chol, alpha, jitter)


# --- expectations -------------------------------------------------------------------

def _quad(f, lo, hi, points=None):
    """Adaptive Gauss-Kronrod; falls back to 200-panel Gauss-Legendre if quad complains."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, lo, hi, epsrel=1e-9, epsabs=0.0, limit=400, points=points)
            return val
        except integrate.IntegrationWarning:
            pass
    edges = np.linspace(lo, hi, 201)
    nodes, weights = np.polynomial.legendre.leggauss(10)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        xs = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        total += 0.5 * (b - a) * float(np.sum(weights * np.array([f(t) for t in xs])))
    if not math.isfinite(total):
        raise QuadratureFailure("integrand not finite on the integration range")
    return total


def _mean_fn(mu):
    if isinstance(mu, GpModel):
        return mu.clamped_mean
    if callable(mu):
        return mu
    c = float(mu)
    return lambda u: c


def expected_annual_energy(mu, weibull: WeibullParams, *, duration_s: float = SECONDS_PER_YEAR,
                           rho: float = 1.225, area: float, u_range=(4.0, 16.0),
                           rated_power: float | None = None) -> float:
    """Expected energy in Wh: (duration * 1/2 rho A) * integral of mu_Cp(u) u^3 f_U(u) du.

    ``mu`` is a GpModel (clamped mean used), a callable, or a constant. With
    ``rated_power`` the instantaneous power is capped at that value.
    """
    f = _mean_fn(mu)
    lo, hi = u_range
    half_rho_a = 0.5 * rho * area

    def integrand(u):
        p = half_rho_a * f(u) * u**3
        if rated_power is not None:
            p = min(p, rated_power)
        return p * weibull_pdf(u, weibull)

    points = None
    if rated_power is not None:
        grid = np.linspace(lo, hi, 241)
        over = [half_rho_a * f(u) * u**3 >= rated_power for u in grid]
        points = [float(grid[i]) for i in range(1, grid.size) if over[i] != over[i - 1]] or None
    joules = duration_s * _quad(integrand, lo, hi, points)
    return joules / 3600.0


def expected_sigma(sigma, weibull: WeibullParams, u_range=(4.0, 16.0)) -> float:
    """Integral of sigma_Cp(u) f_U(u) over the operating range."""
    if isinstance(sigma, GpModel):
        s = sigma.std
    elif callable(sigma):
        s = sigma
    else:
        c = float(sigma)
        s = lambda u: c  # noqa: E731
    lo, hi = u_range
    return _quad(lambda u: s(u) * weibull_pdf(u, weibull), lo, hi)


# --- effective power curve ----------------------------------------------------------

@dataclass
class EpcTable:
    edges: np.ndarray
    counts: np.ndarray
    mean: dict
    std: dict

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def empty(self) -> np.ndarray:
        return self.counts == 0

    def rows(self):
        """(center, count, {quantity: (mean, std)}) per bin."""
        for i, c in enumerate(self.centers):
            yield c, int(self.counts[i]), {k: (self.mean[k][i], self.std[k][i]) for k in self.mean}


EPC_QUANTITIES = ("cp", "rotor_speed", "pitch", "oaspl", "power")


def build_epc_arrays(wind_speed, quantities: dict, bin_width: float = 0.5,
                     u_range=(4.0, 16.0)) -> EpcTable:
    """Per-bin mean and population standard deviation; NaN samples are skipped."""
    u = np.asarray(wind_speed, dtype=float)
    if u.size == 0:
        raise ValueError("empty trajectory")
    lo, hi = u_range
    n_bins = int(round((hi - lo) / bin_width))
    edges = lo + bin_width * np.arange(n_bins + 1)
    idx = np.clip(np.floor((u - lo) / bin_width).astype(int), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    mean, std = {}, {}
    for name, vals in quantities.items():
        v = np.asarray(vals, dtype=float)
        m = np.full(n_bins, np.nan)
        s = np.full(n_bins, np.nan)
        for b in range(n_bins):
            sel = v[(idx == b) & np.isfinite(v)]
            if sel.size:
                m[b] = sel.mean()
                s[b] = sel.std()
        mean[name], std[name] = m, s
    return EpcTable(edges, counts, mean, std)


def build_epc(trajectory, bin_width: float = 0.5, u_range=(4.0, 16.0)) -> EpcTable:
    """EPC from StepOutcome records, binned on the wind speed of each scored state."""
    traj = list(trajectory)
    if not traj:
        raise ValueError("empty trajectory")
    u = [o.next_state.wind_speed for o in traj]
    q = {"cp": [o.cp for o in traj],
         "rotor_speed": [o.next_state.rotor_speed for o in traj],
         "pitch": [o.next_state.pitch for o in traj],
         "oaspl": [o.oaspl for o in traj],
         "power": [o.power for o in traj]}
    return build_epc_arrays(u, q, bin_width, u_range)
