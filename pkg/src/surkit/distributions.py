"""Parametric distribution models on the JPEG quality-factor axis.

The central model is the generalized extreme value (GEV) family fitted to
per-image QF annotations by maximum likelihood.  The remaining families form
the candidate pool for data-driven model selection.  Parameterizations match
the common fitting-toolbox conventions (location/scale pairs, log-axis
parameters for the log families, a zero threshold for the generalized
Pareto), and supports are enforced through +inf likelihood penalties rather
than parameter transforms, which keeps the simplex search unconstrained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateFitError, DomainError, InsufficientDataError
from .optim import nelder_mead_batch

# Shape magnitudes below this are evaluated on the Gumbel branch to avoid
# catastrophic cancellation in (z**(-1/xi) - 1) terms.
GUMBEL_XI_TOL = 1e-6

_EULER_GAMMA = 0.5772156649015329


# ---------------------------------------------------------------------------
# GEV parameter triple

@dataclass(frozen=True)
class GevParams:
    """Shape/location/scale triple of the QF-axis GEV model.

    The density support is the set of x with 1 + xi*(x - mu)/sigma > 0.
    """

    xi: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.xi) and math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise DomainError(f"GEV parameters must be finite, got {self!r}")
        if self.sigma <= 0:
            raise DomainError(f"GEV scale must be positive, got sigma={self.sigma}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.xi, self.mu, self.sigma)


def _as_x_array(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("evaluation points must be finite")
    return arr


def _gev_logpdf_arr(x, xi, mu, sigma):
    """Elementwise GEV log density with broadcasting; -inf outside support.

    The Gumbel branch is materialized only when some shape actually falls
    below the tolerance; MLE search batches almost never do, and skipping it
    halves the kernel cost on large sample arrays.
    """
    t = (x - mu) / sigma
    small = np.abs(xi) < GUMBEL_XI_TOL
    with np.errstate(all="ignore"):
        z = 1.0 + xi * t
        lz = np.log(np.where(z > 0, z, 1.0))
        safe_xi = np.where(small, 1.0, xi)
        general = -np.log(sigma) - np.exp(-lz / safe_xi) + (-1.0 - 1.0 / safe_xi) * lz
        out = np.where(z > 0, general, -np.inf)
        if np.any(small):
            g = -np.log(sigma) - t - np.exp(-t)
            out = np.where(small, g, out)
    return np.where(np.isnan(out), -np.inf, out)


def _gev_cdf_arr(x, xi, mu, sigma):
    t = (x - mu) / sigma
    with np.errstate(all="ignore"):
        g = np.exp(-np.exp(-t))
        z = 1.0 + xi * t
        lz = np.log(np.where(z > 0, z, 1.0))
        safe_xi = np.where(np.abs(xi) < GUMBEL_XI_TOL, 1.0, xi)
        general = np.exp(-np.exp(-lz / safe_xi))
        # below a xi>0 lower support bound the CDF is 0; above a xi<0 upper bound it is 1
        general = np.where(z > 0, general, np.where(xi > 0, 0.0, 1.0))
        out = np.where(np.abs(xi) < GUMBEL_XI_TOL, g, general)
    return np.where(np.isnan(out), 0.0, out)


def gev_pdf(x, p: GevParams):
    """GEV density at x (per QF unit); 0 outside the support."""
    arr = _as_x_array(x)
    out = np.exp(_gev_logpdf_arr(arr, p.xi, p.mu, p.sigma))
    return out if arr.ndim else float(out)


def gev_logpdf(x, p: GevParams):
    arr = _as_x_array(x)
    out = _gev_logpdf_arr(arr, p.xi, p.mu, p.sigma)
    return out if arr.ndim else float(out)


def gev_cdf(x, p: GevParams):
    """GEV distribution function; monotone nondecreasing, saturating at the support ends."""
    arr = _as_x_array(x)
    out = _gev_cdf_arr(arr, p.xi, p.mu, p.sigma)
    return out if arr.ndim else float(out)


def gev_quantile(q, p: GevParams):
    """Inverse CDF for q in (0, 1)."""
    arr = np.asarray(q, dtype=float)
    if np.any((arr <= 0) | (arr >= 1)):
        raise DomainError("quantile argument must lie strictly inside (0, 1)")
    if abs(p.xi) < GUMBEL_XI_TOL:
        out = p.mu - p.sigma * np.log(-np.log(arr))
    else:
        out = p.mu + p.sigma * ((-np.log(arr)) ** (-p.xi) - 1.0) / p.xi
    return out if arr.ndim else float(out)


def gev_median(p: GevParams) -> float:
    """Closed form of CDF^{-1}(0.5)."""
    if abs(p.xi) < GUMBEL_XI_TOL:
        return p.mu - p.sigma * math.log(math.log(2.0))
    return p.mu + p.sigma * ((math.log(2.0)) ** (-p.xi) - 1.0) / p.xi


def gev_sample(p: GevParams, n: int, rng: np.random.Generator) -> np.ndarray:
    return gev_quantile(rng.uniform(size=n), p)


# ---------------------------------------------------------------------------
# Candidate family registry
#
# Each family provides broadcast-friendly log-density / CDF kernels taking
# parameter columns, a validity predicate, a moment-based starting point, a
# sampler, and (where one exists) the closed-form maximum likelihood
# estimate.  Kernels assume parameters already satisfy ``valid``; fitting
# code routes invalid points to +inf before calling them.


class Family:
    name: str
    param_names: tuple[str, ...]
    positive_support = False   # fitting requires all samples > 0
    discrete = False

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def logpdf_arr(self, x, *theta):
        raise NotImplementedError

    def cdf_arr(self, x, *theta):
        raise NotImplementedError

    def valid_arr(self, *theta):
        raise NotImplementedError

    def init(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def closed_mle(self, x: np.ndarray):
        return None

    def sample(self, theta, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


class _Gev(Family):
    name = "gev"
    param_names = ("xi", "mu", "sigma")

    def logpdf_arr(self, x, xi, mu, sigma):
        return _gev_logpdf_arr(x, xi, mu, sigma)

    def cdf_arr(self, x, xi, mu, sigma):
        return _gev_cdf_arr(x, xi, mu, sigma)

    def valid_arr(self, xi, mu, sigma):
        return np.isfinite(xi) & np.isfinite(mu) & (sigma > 0) & np.isfinite(sigma)

    def init(self, x):
        s = max(float(np.std(x)), 1e-8)
        sigma0 = s * math.sqrt(6.0) / math.pi
        mu0 = float(np.mean(x)) - _EULER_GAMMA * sigma0
        return np.array([0.1, mu0, sigma0])

    def sample(self, theta, n, rng):
        return gev_sample(GevParams(*map(float, theta)), n, rng)


class _Normal(Family):
    name = "normal"
    param_names = ("mu", "sigma")

    def logpdf_arr(self, x, mu, sigma):
        t = (x - mu) / sigma
        return -0.5 * t * t - np.log(sigma) - 0.5 * math.log(2.0 * math.pi)

    def cdf_arr(self, x, mu, sigma):
        return 0.5 * (1.0 + special.erf((x - mu) / (sigma * math.sqrt(2.0))))

    def valid_arr(self, mu, sigma):
        return np.isfinite(mu) & (sigma > 0) & np.isfinite(sigma)

    def init(self, x):
        return np.array([float(np.mean(x)), max(float(np.std(x)), 1e-8)])

    def closed_mle(self, x):
        return np.array([float(np.mean(x)), float(np.std(x))])

    def sample(self, theta, n, rng):
        return rng.normal(theta[0], theta[1], size=n)


class _LogNormal(Family):
    name = "lognormal"
    param_names = ("mu_log", "sigma_log")
    positive_support = True

    def logpdf_arr(self, x, mu, sigma):
        with np.errstate(all="ignore"):
            lx = np.log(np.where(x > 0, x, 1.0))
            t = (lx - mu) / sigma
            out = -0.5 * t * t - np.log(sigma) - 0.5 * math.log(2.0 * math.pi) - lx
        return np.where(x > 0, out, -np.inf)

    def cdf_arr(self, x, mu, sigma):
        with np.errstate(all="ignore"):
            lx = np.log(np.where(x > 0, x, 1.0))
            out = 0.5 * (1.0 + special.erf((lx - mu) / (sigma * math.sqrt(2.0))))
        return np.where(x > 0, out, 0.0)

    def valid_arr(self, mu, sigma):
        return np.isfinite(mu) & (sigma > 0) & np.isfinite(sigma)

    def init(self, x):
        lx = np.log(x)
        return np.array([float(np.mean(lx)), max(float(np.std(lx)), 1e-8)])

    def closed_mle(self, x):
        lx = np.log(x)
        return np.array([float(np.mean(lx)), float(np.std(lx))])

    def sample(self, theta, n, rng):
        return np.exp(rng.normal(theta[0], theta[1], size=n))


class _Exponential(Family):
    # parameterized by the mean, as the usual fitting toolboxes do
    name = "exponential"
    param_names = ("mean",)
    positive_support = True

    def logpdf_arr(self, x, mean):
        out = -np.log(mean) - x / mean
        return np.where(x >= 0, out, -np.inf)

    def cdf_arr(self, x, mean):
        return np.where(x >= 0, -np.expm1(-x / mean), 0.0)

    def valid_arr(self, mean):
        return (mean > 0) & np.isfinite(mean)

    def init(self, x):
        return np.array([float(np.mean(x))])

    def closed_mle(self, x):
        return np.array([float(np.mean(x))])

    def sample(self, theta, n, rng):
        return rng.exponential(theta[0], size=n)


class _Rayleigh(Family):
    name = "rayleigh"
    param_names = ("scale",)
    positive_support = True

    def logpdf_arr(self, x, b):
        with np.errstate(all="ignore"):
            out = np.log(np.where(x > 0, x, 1.0)) - 2.0 * np.log(b) - x * x / (2.0 * b * b)
        return np.where(x > 0, out, -np.inf)

    def cdf_arr(self, x, b):
        return np.where(x > 0, -np.expm1(-x * x / (2.0 * b * b)), 0.0)

    def valid_arr(self, b):
        return (b > 0) & np.isfinite(b)

    def init(self, x):
        return np.array([math.sqrt(float(np.mean(x * x)) / 2.0)])

    def closed_mle(self, x):
        return np.array([math.sqrt(float(np.mean(x * x)) / 2.0)])

    def sample(self, theta, n, rng):
        return rng.rayleigh(theta[0], size=n)


class _HalfNormal(Family):
    # location pinned at zero
    name = "halfnormal"
    param_names = ("sigma",)
    positive_support = True

    def logpdf_arr(self, x, sigma):
        out = 0.5 * math.log(2.0 / math.pi) - np.log(sigma) - x * x / (2.0 * sigma * sigma)
        return np.where(x >= 0, out, -np.inf)

    def cdf_arr(self, x, sigma):
        return np.where(x >= 0, special.erf(x / (sigma * math.sqrt(2.0))), 0.0)

    def valid_arr(self, sigma):
        return (sigma > 0) & np.isfinite(sigma)

    def init(self, x):
        return np.array([math.sqrt(float(np.mean(x * x)))])

    def closed_mle(self, x):
        return np.array([math.sqrt(float(np.mean(x * x)))])

    def sample(self, theta, n, rng):
        return np.abs(rng.normal(0.0, theta[0], size=n))


class _Gamma(Family):
    name = "gamma"
    param_names = ("shape", "scale")
    positive_support = True

    def logpdf_arr(self, x, a, b):
        with np.errstate(all="ignore"):
            lx = np.log(np.where(x > 0, x, 1.0))
            out = (a - 1.0) * lx - x / b - special.gammaln(a) - a * np.log(b)
        return np.where(x > 0, out, -np.inf)

    def cdf_arr(self, x, a, b):
        return np.where(x > 0, special.gammainc(a, np.where(x > 0, x, 0.0) / b), 0.0)

    def valid_arr(self, a, b):
        return (a > 0) & (b > 0) & np.isfinite(a) & np.isfinite(b)

    def init(self, x):
        m = float(np.mean(x))
        s = max(float(np.std(x)), 1e-8)
        return np.array([(m / s) ** 2, s * s / m])

    def sample(self, theta, n, rng):
        return rng.gamma(theta[0], theta[1], size=n)


class _Weibull(Family):
    name = "weibull"
    param_names = ("shape", "scale")
    positive_support = True

    def logpdf_arr(self, x, k, lam):
        with np.errstate(all="ignore"):
            lx = np.log(np.where(x > 0, x, 1.0))
            llam = np.log(lam)
            out = np.log(k) - llam + (k - 1.0) * (lx - llam) - np.exp(k * (lx - llam))
        return np.where(x > 0, np.where(np.isnan(out), -np.inf, out), -np.inf)

    def cdf_arr(self, x, k, lam):
        with np.errstate(all="ignore"):
            out = -np.expm1(-((np.where(x > 0, x, 0.0) / lam) ** k))
        return np.where(x > 0, out, 0.0)

    def valid_arr(self, k, lam):
        return (k > 0) & (lam > 0) & np.isfinite(k) & np.isfinite(lam)

    def init(self, x):
        s_log = max(float(np.std(np.log(x))), 1e-8)
        return np.array([1.2 / s_log, float(np.mean(x))])

    def sample(self, theta, n, rng):
        return theta[1] * rng.weibull(theta[0], size=n)


class _Logistic(Family):
    name = "logistic"
    param_names = ("mu", "scale")

    def logpdf_arr(self, x, mu, s):
        t = np.abs((x - mu) / s)
        return -t - np.log(s) - 2.0 * np.log1p(np.exp(-t))

    def cdf_arr(self, x, mu, s):
        return special.expit((x - mu) / s)

    def valid_arr(self, mu, s):
        return np.isfinite(mu) & (s > 0) & np.isfinite(s)

    def init(self, x):
        return np.array([float(np.mean(x)), max(float(np.std(x)) * math.sqrt(3.0) / math.pi, 1e-8)])

    def sample(self, theta, n, rng):
        return rng.logistic(theta[0], theta[1], size=n)


class _LogLogistic(Family):
    # logistic on the log axis, matching the common toolbox parameterization
    name = "loglogistic"
    param_names = ("mu_log", "scale_log")
    positive_support = True

    def logpdf_arr(self, x, mu, s):
        with np.errstate(all="ignore"):
            lx = np.log(np.where(x > 0, x, 1.0))
            t = np.abs((lx - mu) / s)
            out = -t - np.log(s) - 2.0 * np.log1p(np.exp(-t)) - lx
        return np.where(x > 0, out, -np.inf)

    def cdf_arr(self, x, mu, s):
        with np.errstate(all="ignore"):
            lx = np.log(np.where(x > 0, x, 1.0))
            out = special.expit((lx - mu) / s)
        return np.where(x > 0, out, 0.0)

    def valid_arr(self, mu, s):
        return np.isfinite(mu) & (s > 0) & np.isfinite(s)

    def init(self, x):
        lx = np.log(x)
        return np.array([float(np.mean(lx)), max(float(np.std(lx)) * math.sqrt(3.0) / math.pi, 1e-8)])

    def sample(self, theta, n, rng):
        return np.exp(rng.logistic(theta[0], theta[1], size=n))


class _GumbelMin(Family):
    # extreme value distribution for minima
    name = "gumbel_min"
    param_names = ("mu", "sigma")

    def logpdf_arr(self, x, mu, sigma):
        t = (x - mu) / sigma
        with np.errstate(over="ignore"):
            out = t - np.exp(t) - np.log(sigma)
        return out

    def cdf_arr(self, x, mu, sigma):
        with np.errstate(over="ignore"):
            return -np.expm1(-np.exp((x - mu) / sigma))

    def valid_arr(self, mu, sigma):
        return np.isfinite(mu) & (sigma > 0) & np.isfinite(sigma)

    def init(self, x):
        s = max(float(np.std(x)), 1e-8)
        sigma0 = s * math.sqrt(6.0) / math.pi
        return np.array([float(np.mean(x)) + _EULER_GAMMA * sigma0, sigma0])

    def sample(self, theta, n, rng):
        u = rng.uniform(size=n)
        return theta[0] + theta[1] * np.log(-np.log(u))


class _GenPareto(Family):
    # threshold fixed at zero: support [0, inf) for k >= 0, [0, -sigma/k] for k < 0
    name = "genpareto"
    param_names = ("k", "sigma")
    positive_support = True

    def logpdf_arr(self, x, k, sigma):
        with np.errstate(all="ignore"):
            small = np.abs(k) < GUMBEL_XI_TOL
            z = 1.0 + k * x / sigma
            lz = np.log(np.where(z > 0, z, 1.0))
            safe_k = np.where(small, 1.0, k)
            general = -np.log(sigma) - (1.0 + 1.0 / safe_k) * lz
            general = np.where(z > 0, general, -np.inf)
            expo = -np.log(sigma) - x / sigma
            out = np.where(small, expo, general)
        return np.where(x >= 0, np.where(np.isnan(out), -np.inf, out), -np.inf)

    def cdf_arr(self, x, k, sigma):
        with np.errstate(all="ignore"):
            small = np.abs(k) < GUMBEL_XI_TOL
            z = 1.0 + k * np.where(x >= 0, x, 0.0) / sigma
            lz = np.log(np.where(z > 0, z, 1.0))
            safe_k = np.where(small, 1.0, k)
            general = -np.expm1(-lz / safe_k)
            general = np.where(z > 0, general, 1.0)
            out = np.where(small, -np.expm1(-np.where(x >= 0, x, 0.0) / sigma), general)
        return np.where(x >= 0, out, 0.0)

    def valid_arr(self, k, sigma):
        return np.isfinite(k) & (sigma > 0) & np.isfinite(sigma)

    def init(self, x):
        m = float(np.mean(x))
        s = max(float(np.std(x)), 1e-8)
        r = (m / s) ** 2
        return np.array([0.5 * (r - 1.0), 0.5 * m * (r + 1.0)])

    def sample(self, theta, n, rng):
        k, sigma = theta
        u = rng.uniform(size=n)
        if abs(k) < GUMBEL_XI_TOL:
            return -sigma * np.log(u)
        return sigma * (u ** (-k) - 1.0) / k


class _Poisson(Family):
    name = "poisson"
    param_names = ("lam",)
    positive_support = True
    discrete = True

    def logpdf_arr(self, x, lam):
        integral = np.equal(np.mod(x, 1.0), 0.0) & (x >= 0)
        xs = np.where(integral, x, 0.0)
        out = xs * np.log(lam) - lam - special.gammaln(xs + 1.0)
        return np.where(integral, out, -np.inf)

    def cdf_arr(self, x, lam):
        k = np.floor(np.where(x >= 0, x, 0.0))
        return np.where(x >= 0, special.gammaincc(k + 1.0, np.broadcast_to(lam, k.shape)), 0.0)

    def valid_arr(self, lam):
        return (lam > 0) & np.isfinite(lam)

    def init(self, x):
        return np.array([float(np.mean(x))])

    def closed_mle(self, x):
        return np.array([float(np.mean(x))])

    def sample(self, theta, n, rng):
        return rng.poisson(theta[0], size=n).astype(float)


FAMILIES: dict[str, Family] = {
    f.name: f
    for f in (
        _Gev(), _Normal(), _LogNormal(), _Exponential(), _Rayleigh(), _HalfNormal(),
        _Gamma(), _Weibull(), _Logistic(), _LogLogistic(), _GumbelMin(), _GenPareto(),
        _Poisson(),
    )
}


def get_family(kind) -> Family:
    if isinstance(kind, Family):
        return kind
    try:
        return FAMILIES[str(kind)]
    except KeyError:
        raise DomainError(f"unknown distribution family {kind!r}") from None


# ---------------------------------------------------------------------------
# Likelihood and fitting


@dataclass(frozen=True)
class FitResult:
    """Outcome of a maximum-likelihood fit."""

    family: str
    params: tuple[float, ...]
    nll: float
    converged: bool
    iterations: int

    def as_gev(self) -> GevParams:
        if self.family != "gev":
            raise DomainError(f"fit is for family {self.family!r}, not gev")
        return GevParams(*self.params)


def _check_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size and not np.all(np.isfinite(x)):
        raise DomainError("samples must be finite")
    return x


def negative_log_likelihood(samples, kind, params) -> float:
    """-sum(log pdf); +inf if any sample falls outside the support."""
    fam = get_family(kind)
    theta = np.asarray(params, dtype=float)
    if theta.shape != (fam.n_params,):
        raise DomainError(f"{fam.name} expects {fam.n_params} parameters, got {theta.shape}")
    if not bool(np.all(fam.valid_arr(*theta))):
        raise DomainError(f"invalid parameters {tuple(theta)} for family {fam.name}")
    x = _check_samples(samples)
    lp = fam.logpdf_arr(x, *theta)
    if np.any(np.isneginf(lp)):
        return math.inf
    return float(-np.sum(lp))


def _nll_batch(fam: Family, data: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """(B, k) negative log-likelihoods for points thetas (B, k, p) on data (B, n)."""
    cols = [thetas[..., j][..., None] for j in range(fam.n_params)]
    valid = fam.valid_arr(*[c[..., 0] for c in cols])
    safe_cols = []
    for j, c in enumerate(cols):
        fallback = 1.0 if fam.param_names[j] != "xi" else 0.5
        safe_cols.append(np.where(valid[..., None], c, fallback))
    lp = fam.logpdf_arr(data[:, None, :], *safe_cols)
    with np.errstate(invalid="ignore"):
        out = -np.sum(lp, axis=-1)
    out = np.where(np.isnan(out), np.inf, out)
    return np.where(valid, out, np.inf)


def _perturbed_starts(theta0: np.ndarray, restarts: int, rng: np.random.Generator) -> np.ndarray:
    starts = [theta0]
    ref = np.maximum(np.abs(theta0), 0.1)
    for _ in range(restarts - 1):
        u = rng.uniform(-1.0, 1.0, size=theta0.shape)
        v = rng.uniform(-1.0, 1.0, size=theta0.shape)
        starts.append(theta0 * (1.0 + 0.25 * u) + 0.25 * v * ref)
    return np.asarray(starts)


def fit_mle(samples, kind, *, seed: int = 0, restarts: int = 5,
            xatol: float = 1e-9, max_iter: int = 10_000) -> FitResult:
    """Fit a family by maximum likelihood.

    Families with a closed-form estimate use it directly; the rest run a
    multi-start Nelder-Mead search on the negative log-likelihood.  The
    search is deterministic given ``seed``: restarts are fixed perturbations
    of a moment-based starting point, and infeasible parameter vectors
    (support violations, non-positive scales) receive a +inf objective.
    """
    fam = get_family(kind)
    x = _check_samples(samples)
    if x.size < 3:
        raise InsufficientDataError(f"need at least 3 samples, got {x.size}")
    if fam.positive_support and np.min(x) <= 0:
        raise DomainError(f"family {fam.name} requires strictly positive samples")
    if float(np.ptp(x)) == 0.0:
        raise DegenerateFitError("constant samples admit no scale (sigma -> 0)")

    closed = fam.closed_mle(x)
    if closed is not None:
        theta = np.asarray(closed, dtype=float)
        nll = negative_log_likelihood(x, fam, theta)
        return FitResult(fam.name, tuple(map(float, theta)), nll, math.isfinite(nll), 0)

    theta0 = fam.init(x)
    rng = np.random.default_rng(seed)
    starts = _perturbed_starts(theta0, restarts, rng)
    data = np.broadcast_to(x, (starts.shape[0], x.size))

    def objective(points):
        return _nll_batch(fam, data, points)

    res = nelder_mead_batch(objective, starts, xatol=xatol, max_iter=max_iter)
    k = int(np.argmin(res.fun))
    best, fbest = res.x[k], float(res.fun[k])
    converged = bool(res.converged[k]) and math.isfinite(fbest)
    return FitResult(fam.name, tuple(map(float, best)), fbest, converged, res.iterations)


def fit_mle_batch(samples: np.ndarray, kind, *, theta0: np.ndarray | None = None,
                  restarts: int = 1, seed: int = 0,
                  xatol: float = 1e-7, max_iter: int = 500):
    """Maximum-likelihood fits of many same-size sample sets at once.

    ``samples`` is (B, n).  This is the batched path used by bootstrap
    refits: each problem starts from its own moment-based initialization (or
    a supplied ``theta0`` of shape (B, p)); with ``restarts`` > 1 every
    problem additionally gets the same deterministic perturbed restarts that
    ``fit_mle`` uses, so the estimator applied to resamples is the same map
    that produced the observed fit (required for bootstrap exchangeability).
    Returns (thetas (B, p), nll (B,), converged (B,)).
    """
    fam = get_family(kind)
    data = np.asarray(samples, dtype=float)
    b = data.shape[0]

    closed = fam.closed_mle(data[0]) if b else None
    if closed is not None:
        thetas = np.stack([fam.closed_mle(data[i]) for i in range(b)])
        cols = [thetas[:, None, j][..., None] for j in range(fam.n_params)]
        lp = fam.logpdf_arr(data[:, None, :], *cols)
        nll = -np.sum(lp, axis=-1)[:, 0]
        return thetas, nll, np.isfinite(nll)

    if theta0 is None:
        theta0 = np.stack([fam.init(data[i]) for i in range(b)])

    if restarts > 1:
        rng = np.random.default_rng(seed)
        starts = np.stack([_perturbed_starts(theta0[i], restarts, rng) for i in range(b)])
        flat_starts = starts.reshape(b * restarts, fam.n_params)
        flat_data = np.repeat(data, restarts, axis=0)

        def objective(points):
            return _nll_batch(fam, flat_data, points)

        res = nelder_mead_batch(objective, flat_starts, xatol=xatol, max_iter=max_iter)
        funs = res.fun.reshape(b, restarts)
        pick = np.argmin(funs, axis=1)
        thetas = res.x.reshape(b, restarts, fam.n_params)[np.arange(b), pick]
        nll = funs[np.arange(b), pick]
        return thetas, nll, np.isfinite(nll)

    def objective(points):
        return _nll_batch(fam, data, points)

    res = nelder_mead_batch(objective, theta0, xatol=xatol, max_iter=max_iter)
    good = np.isfinite(res.fun)
    return res.x, res.fun, good


# ---------------------------------------------------------------------------
# JSON serialization of parameter sets


def fit_to_json(fit: FitResult) -> dict:
    out = {"family": fit.family}
    out.update({name: val for name, val in zip(get_family(fit.family).param_names, fit.params)})
    out["nll"] = fit.nll if math.isfinite(fit.nll) else None
    out["converged"] = fit.converged
    return out


def gev_to_json(p: GevParams, nll: float | None = None, converged: bool = True) -> dict:
    return {"family": "gev", "xi": p.xi, "mu": p.mu, "sigma": p.sigma,
            "nll": nll, "converged": converged}


def fit_from_json(obj: dict) -> FitResult:
    fam = get_family(obj.get("family", "gev"))
    try:
        params = tuple(float(obj[name]) for name in fam.param_names)
    except KeyError as e:
        raise DomainError(f"parameter set missing field {e}") from None
    nll = obj.get("nll")
    return FitResult(fam.name, params,
                     float(nll) if nll is not None else math.nan,
                     bool(obj.get("converged", True)), 0)
