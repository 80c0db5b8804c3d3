"""Empirical validation tooling: recursive stationarity detection, lagged
correlations, the same-time covariance identity checked by double Monte
Carlo, normality summaries, and acceptance-rate reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import InvalidArgumentError, UndefinedBinError
from .model import KernelParams
from .sampler import MoveStats


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov distance and the recursive detectors
# ---------------------------------------------------------------------------

def ks_distance(sample_a: np.ndarray, sample_b: np.ndarray) -> float:
    """Sup-norm distance between the two empirical CDFs."""
    a = np.sort(np.asarray(sample_a, dtype=float).ravel())
    b = np.sort(np.asarray(sample_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise InvalidArgumentError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def threshold_sequence(c0: float, count: int, decay: float = 0.1, floor: float = 1e-6) -> np.ndarray:
    """Slowly decreasing thresholds c_j = max(c0 * j**(-decay), floor)."""
    j = np.arange(1, count + 1, dtype=float)
    return np.maximum(c0 * j ** (-decay), floor)


@dataclass
class StationarityResult:
    posterior_mean: np.ndarray   # trajectory over regions
    posterior_var: np.ndarray
    thresholds: np.ndarray
    distances: np.ndarray
    verdict: str                 # stationary | nonstationary | inconclusive

    @property
    def terminal_mean(self) -> float:
        return float(self.posterior_mean[-1])


def _beta_recursion(indicators: np.ndarray, a0: float, b0: float):
    hits = np.cumsum(indicators)
    j = np.arange(1, indicators.size + 1)
    a = a0 + hits
    b = b0 + j - hits
    mean = a / (a + b)
    var = a * b / ((a + b) ** 2 * (a + b + 1.0))
    return mean, var


def _verdict(terminal: float) -> str:
    if terminal < 0.05:
        return "nonstationary"
    if terminal > 0.95:
        return "stationary"
    return "inconclusive"


def recursive_stationarity_test(regions: list[np.ndarray], c0: float,
                                prior_a: float = 1.0, prior_b: float = 1.0,
                                decay: float = 0.1, floor: float = 1e-6) -> StationarityResult:
    """Recursive Bernoulli-probability posterior over threshold indicators.

    Each region's sample is compared to the pooled global sample by the
    Kolmogorov-Smirnov distance; the indicator of falling below the slowly
    decreasing threshold feeds a conjugate Beta recursion.
    """
    if len(regions) < 2:
        raise InvalidArgumentError("at least two regions required")
    pooled = np.concatenate([np.asarray(r, dtype=float).ravel() for r in regions])
    thresholds = threshold_sequence(c0, len(regions), decay, floor)
    distances = np.array([ks_distance(r, pooled) for r in regions])
    indicators = (distances < thresholds).astype(float)
    mean, var = _beta_recursion(indicators, prior_a, prior_b)
    return StationarityResult(mean, var, thresholds, distances, _verdict(float(mean[-1])))


def _region_lag_cov(series: np.ndarray, times: np.ndarray, lag_lo: float, lag_hi: float,
                    center: float) -> tuple[float, int]:
    """Centered product moment over pairs whose |time lag| falls in the bin.

    Self-pairs enter when the bin includes lag zero, making the statistic the
    plain variance there.
    """
    x = series - center
    lag = np.abs(times[:, None] - times[None, :])
    mask = (lag >= lag_lo) & (lag < lag_hi)
    iu = np.triu_indices(series.size, k=0)
    sel = mask[iu]
    count = int(sel.sum())
    if count == 0:
        return math.nan, 0
    prods = (x[iu[0]] * x[iu[1]])[sel]
    return float(prods.mean()), count


def recursive_cov_stationarity_test(regions: list[np.ndarray], times: np.ndarray,
                                    lag_bin: tuple[float, float], c0: float,
                                    prior_a: float = 1.0, prior_b: float = 1.0,
                                    decay: float = 0.1, floor: float = 1e-6) -> StationarityResult:
    """Same recursion with |local - global| lag-bin covariances as distances."""
    if len(regions) < 2:
        raise InvalidArgumentError("at least two regions required")
    lo, hi = lag_bin
    times = np.asarray(times, dtype=float)
    local = []
    counts = []
    for r in regions:
        r = np.asarray(r, dtype=float).ravel()
        cov, cnt = _region_lag_cov(r, times, lo, hi, float(r.mean()))
        local.append(cov)
        counts.append(cnt)
    if min(counts) < 2:
        raise UndefinedBinError(f"lag bin [{lo}, {hi}) has fewer than 2 pairs in some region")
    pooled_mean = float(np.mean(np.concatenate([np.asarray(r).ravel() for r in regions])))
    global_parts = [_region_lag_cov(np.asarray(r, dtype=float).ravel(), times, lo, hi, pooled_mean)
                    for r in regions]
    total_pairs = sum(c for _, c in global_parts)
    global_cov = sum(v * c for v, c in global_parts) / total_pairs
    distances = np.abs(np.array(local) - global_cov)
    thresholds = threshold_sequence(c0, len(regions), decay, floor)
    indicators = (distances < thresholds).astype(float)
    mean, var = _beta_recursion(indicators, prior_a, prior_b)
    return StationarityResult(mean, var, thresholds, distances, _verdict(float(mean[-1])))


# ---------------------------------------------------------------------------
# lagged spatio-temporal correlations
# ---------------------------------------------------------------------------

@dataclass
class LagBins:
    edges: np.ndarray            # (B+1,)
    counts: np.ndarray           # (B,)
    correlation: np.ndarray      # (B,), NaN where undefined

    def defined(self) -> np.ndarray:
        return ~np.isnan(self.correlation)


def lagged_correlation(locations: np.ndarray, times: np.ndarray, y: np.ndarray,
                       edges: np.ndarray, chunk: int = 512) -> LagBins:
    """Pearson correlation of observation pairs binned by joint lag.

    The lag of cells (i, k) and (i', k') is sqrt(||s_i - s_i'||^2 +
    (t_k - t_k')^2).  Both pair orientations enter, which makes the
    estimator symmetric; bins with fewer than two pairs or zero variance
    report NaN.  Pairs are accumulated in row chunks, so memory stays
    O(chunk * cells).
    """
    edges = np.asarray(edges, dtype=float)
    if edges.size < 2 or np.any(np.diff(edges) <= 0.0):
        raise InvalidArgumentError("bin edges must be increasing and at least two")
    if y.size == 0:
        raise InvalidArgumentError("empty data")
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    times = np.asarray(times, dtype=float)
    n, m = y.shape
    flat = y.ravel()
    loc_idx, time_idx = np.divmod(np.arange(n * m), m)
    coords = np.column_stack([locations[loc_idx], times[time_idx]])
    total = n * m

    B = edges.size - 1
    counts = np.zeros(B, dtype=np.int64)
    s1 = np.zeros(B)   # sum of (x_a + x_b) over pairs
    s2 = np.zeros(B)   # sum of (x_a^2 + x_b^2)
    sp = np.zeros(B)   # sum of x_a * x_b
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        diff = coords[start:stop, None, :] - coords[None, :, :]
        lag = np.sqrt(np.sum(diff * diff, axis=2))
        which = np.digitize(lag, edges) - 1
        # keep strictly-upper pairs (global column index > global row index)
        rows = np.arange(start, stop)[:, None]
        upper = np.arange(total)[None, :] > rows
        valid = upper & (which >= 0) & (which < B)
        wb = which[valid]
        xa = np.broadcast_to(flat[start:stop, None], (stop - start, total))[valid]
        xb = np.broadcast_to(flat[None, :], (stop - start, total))[valid]
        counts += np.bincount(wb, minlength=B)
        s1 += np.bincount(wb, weights=xa + xb, minlength=B)
        s2 += np.bincount(wb, weights=xa * xa + xb * xb, minlength=B)
        sp += np.bincount(wb, weights=xa * xb, minlength=B)

    corr = np.full(B, np.nan)
    for b in range(B):
        if counts[b] < 2:
            continue
        two_n = 2.0 * counts[b]
        mean = s1[b] / two_n
        var = s2[b] / two_n - mean * mean
        if var <= 0.0:
            continue
        cov = sp[b] / counts[b] - mean * mean
        corr[b] = cov / var
    return LagBins(edges=edges, counts=counts, correlation=corr)


# ---------------------------------------------------------------------------
# covariance identity oracle
# ---------------------------------------------------------------------------

@dataclass
class CovOracleResult:
    mc_cov: float
    analytic: float
    se: float          # combined standard error of the two estimates

    @property
    def z(self) -> float:
        return abs(self.mc_cov - self.analytic) / self.se


def covariance_oracle_check(lam: float, kp: KernelParams, sigma_sq_mu: np.ndarray,
                            sigma_sq_beta: float, m1: np.ndarray, m2: np.ndarray,
                            t: float, n_mc: int, rng: np.random.Generator) -> CovOracleResult:
    """Monte Carlo same-time covariance of the field against the conditional
    identity lam * E[K(m1 - mu) K(m2 - mu) beta^2].

    The field side draws Poisson counts and fresh atoms per replicate; the
    analytic side is an independent Monte Carlo of the expectation with ten
    times the sample size.
    """
    if n_mc < 10_000:
        raise InvalidArgumentError("n_mc must be at least 1e4")
    rng_field, rng_exp = rng.spawn(2)
    m1 = np.atleast_1d(np.asarray(m1, dtype=float))
    m2 = np.atleast_1d(np.asarray(m2, dtype=float))
    p = m1.size
    sd_mu = np.sqrt(np.asarray(sigma_sq_mu, dtype=float))
    sd_beta = math.sqrt(sigma_sq_beta)
    time_factor = math.exp(-kp.xi * abs(t - kp.tau))

    def kernel_cols(mu):
        d1 = m1[None, :] - mu
        d2 = m2[None, :] - mu
        k1 = np.exp(-0.5 * (d1 * d1) @ kp.tilde_sigma_sq) * time_factor
        k2 = np.exp(-0.5 * (d2 * d2) @ kp.tilde_sigma_sq) * time_factor
        return k1, k2

    # field replicates
    counts = rng_field.poisson(lam, size=n_mc)
    total = int(counts.sum())
    mu_all = rng_field.standard_normal((total, p)) * sd_mu
    beta_all = rng_field.standard_normal(total) * sd_beta
    k1_all, k2_all = kernel_cols(mu_all)
    bounds = np.concatenate([[0], np.cumsum(counts)])
    w1 = k1_all * beta_all
    w2 = k2_all * beta_all
    c1 = np.add.reduceat(np.concatenate([w1, [0.0]]), bounds[:-1])
    c2 = np.add.reduceat(np.concatenate([w2, [0.0]]), bounds[:-1])
    c1[counts == 0] = 0.0
    c2[counts == 0] = 0.0
    f1 = c1
    f2 = c2
    prod = (f1 - f1.mean()) * (f2 - f2.mean())
    mc_cov = float(prod.mean())
    se_mc = float(prod.std(ddof=1) / math.sqrt(n_mc))

    # independent estimate of the expectation term
    n_an = 10 * n_mc
    mu_e = rng_exp.standard_normal((n_an, p)) * sd_mu
    beta_e = rng_exp.standard_normal(n_an) * sd_beta
    k1_e, k2_e = kernel_cols(mu_e)
    vals = lam * k1_e * k2_e * beta_e**2
    analytic = float(vals.mean())
    se_an = float(vals.std(ddof=1) / math.sqrt(n_an))

    return CovOracleResult(mc_cov=mc_cov, analytic=analytic,
                           se=math.sqrt(se_mc**2 + se_an**2))


# ---------------------------------------------------------------------------
# normality summary and acceptance reporting
# ---------------------------------------------------------------------------

@dataclass
class NormalitySummary:
    probs: np.ndarray
    sample_q: np.ndarray
    normal_q: np.ndarray
    max_abs_deviation: float
    degenerate: bool = False


def normality_summary(sample: np.ndarray, n_probs: int = 19) -> NormalitySummary:
    """Quantile table against a moment-fitted normal plus the max deviation."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 20:
        raise InvalidArgumentError("normality summary needs at least 20 points")
    probs = np.linspace(0.05, 0.95, n_probs)
    sq = np.quantile(x, probs)
    sd = x.std(ddof=1)
    if sd <= 0.0:
        return NormalitySummary(probs, sq, np.full_like(sq, x.mean()), 0.0, degenerate=True)
    nq = norm.ppf(probs, loc=x.mean(), scale=sd)
    dev = float(np.max(np.abs(sq - nq)))
    return NormalitySummary(probs, sq, nq, dev)


def acceptance_report(stats: MoveStats) -> dict[str, float | None]:
    """Per-move acceptance rates plus the pooled transdimensional rate."""
    report: dict[str, float | None] = {m: stats.rate(m) for m in stats.proposals}
    report["overall_ttmcmc"] = stats.overall_ttmcmc_rate()
    return report
