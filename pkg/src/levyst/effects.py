"""Spatio-temporal random effects: nearest-neighbor baselines and Gibbs draws.

Each effect phi(s_i, t_k) is anchored at a baseline phi0: in training, the
response of the nearest other location at the same time (ties averaged); for
prediction, the response of the nearest training datum in joint space-time
distance ||s~ - s_i||^2 + (t~ - t_k)^2.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError


def _argmin_set(dist_sq: np.ndarray) -> np.ndarray:
    best = dist_sq.min()
    return np.flatnonzero(dist_sq == best)


def phi0_training_matrix(locations: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Baselines for every training cell: nearest other location's response."""
    n = locations.shape[0]
    if n < 2:
        raise InvalidStateError("training baselines need at least two locations")
    phi0 = np.empty_like(y)
    for i in range(n):
        d = np.sum((locations - locations[i]) ** 2, axis=1)
        d[i] = np.inf
        idx = _argmin_set(d)
        phi0[i] = y[idx].mean(axis=0)
    return phi0


def phi0_predict(locations: np.ndarray, times: np.ndarray, y: np.ndarray,
                 s_new: np.ndarray, t_new: float) -> float:
    """Baseline at a prediction point: joint space-time nearest neighbor."""
    if y.size == 0:
        raise InvalidStateError("empty candidate set for baseline search")
    d_sp = np.sum((locations - np.asarray(s_new, dtype=float)) ** 2, axis=1)   # (n,)
    d = d_sp[:, None] + (times[None, :] - t_new) ** 2                          # (n, m)
    idx = _argmin_set(d.ravel())
    return float(y.ravel()[idx].mean())


def compute_phi0(locations: np.ndarray, times: np.ndarray, y: np.ndarray,
                 s_target: np.ndarray, t_target: float,
                 training_index: int | None = None) -> float:
    """Baseline at one target point.

    With `training_index` set, the target is the training cell (i, k) with
    that location index; the search runs over other locations at the same
    time.  Otherwise the joint space-time rule applies.
    """
    if training_index is not None:
        k = int(np.flatnonzero(times == t_target)[0])
        d = np.sum((locations - locations[training_index]) ** 2, axis=1)
        d[training_index] = np.inf
        if not np.isfinite(d.min()):
            raise InvalidStateError("no candidate neighbors")
        return float(y[_argmin_set(d), k].mean())
    return phi0_predict(locations, times, y, s_target, t_target)


def gibbs_update_phi(y: float, f: float, alpha: float, sigma_sq_phi: float,
                     sigma_sq_eps: float, phi0: float, rng: np.random.Generator) -> float:
    """Exact draw from the effect's normal full conditional."""
    if sigma_sq_phi <= 0.0 or sigma_sq_eps <= 0.0:
        raise InvalidStateError("phi updates require positive variances (explicit mode)")
    post_var = 1.0 / (1.0 / sigma_sq_phi + 1.0 / sigma_sq_eps)
    post_mean = post_var * (phi0 / sigma_sq_phi + (y - alpha - f) / sigma_sq_eps)
    return post_mean + math.sqrt(post_var) * rng.standard_normal()


def gibbs_update_phi_column(y_col: np.ndarray, f_col: np.ndarray, alpha: float,
                            sigma_sq_phi: float, sigma_sq_eps: float,
                            phi0_col: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized conditional draws for one time column of effects."""
    if sigma_sq_phi <= 0.0 or sigma_sq_eps <= 0.0:
        raise InvalidStateError("phi updates require positive variances (explicit mode)")
    post_var = 1.0 / (1.0 / sigma_sq_phi + 1.0 / sigma_sq_eps)
    post_mean = post_var * (phi0_col / sigma_sq_phi + (y_col - alpha - f_col) / sigma_sq_eps)
    return post_mean + math.sqrt(post_var) * rng.standard_normal(y_col.size)


def gibbs_update_alpha(resid_sum: float, n_obs: int, sigma_sq_eps: float,
                       sigma_sq_alpha: float, mu_alpha: float,
                       rng: np.random.Generator) -> float:
    """Normal conditional for the overall effect.

    `resid_sum` is sum of (y - phi - f) over all cells; the conjugate mean
    uses the unsquared residual sum.
    """
    post_var = 1.0 / (1.0 / sigma_sq_alpha + n_obs / sigma_sq_eps)
    post_mean = post_var * (mu_alpha / sigma_sq_alpha + resid_sum / sigma_sq_eps)
    return post_mean + math.sqrt(post_var) * rng.standard_normal()


def gibbs_update_sigma_sq_alpha(alpha: float, mu_alpha: float, a: float, b: float,
                                rng: np.random.Generator) -> float:
    shape = a + 0.5
    rate = b + 0.5 * (alpha - mu_alpha) ** 2
    return rate / rng.gamma(shape)


def gibbs_update_sigma_sq_phi(sq_dev_sum: float, n_effects: int, a: float, b: float,
                              rng: np.random.Generator) -> float:
    """Inverse-gamma conditional with shape a + nm/2 (one half per effect)."""
    if sq_dev_sum < 0.0:
        raise InvalidStateError("negative sum of squared deviations")
    shape = a + 0.5 * n_effects
    rate = b + 0.5 * sq_dev_sum
    return rate / rng.gamma(shape)
