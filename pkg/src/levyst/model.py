"""Process definition: kernel, monotone coordinate maps, field evaluation,
observation density, priors, and the joint log posterior.

The latent field at time t is a finite sum of bounded kernel evaluations,

    f(s, t) = sum_j K(M(s) - mu_j, t - tau) * beta_j,

with K(d, dt) = exp(-0.5 * sum_l ksq_l * d_l^2 - xi * |dt|) and M an
almost-surely increasing coordinate-wise map built from grid increments
C_l * X_l * (delta s)^r.

Sampling-scale conventions for the fixed-dimension block theta:
nonnegative parameters are carried as logs truncated to [-20, 5], the
autoregression coefficients as (scaled) logits truncated to [-10, 10],
and the map slopes X_l raw on [0, 10].  Priors on transformed
coordinates include the change-of-variable Jacobian; truncation is
enforced by a -inf sentinel without renormalizing (constants cancel in
all Metropolis ratios).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .ar import ArMode, ArSpec, ar_initial_log_density, ar_transition_log_density, rho_from_transformed
from .errors import InvalidArgumentError, InvalidStateError

_LOG_2PI = math.log(2.0 * math.pi)

# Truncation bounds (fixed by the model, not configurable).
LOG_LO, LOG_HI = -20.0, 5.0     # log-scale nonnegative parameters
LOGIT_BOUND = 10.0              # transformed autoregression coefficients
COORD_BOUND = 10.0              # atom coordinates mu
X_LO, X_HI = 0.0, 10.0          # map slope variables X_l


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpaceTimePoint:
    s: np.ndarray
    t: float

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.s, dtype=float))
        if s.ndim != 1 or s.size < 1 or not np.all(np.isfinite(s)) or not np.isfinite(self.t):
            raise InvalidArgumentError("space-time point must have finite coordinates, p >= 1")
        object.__setattr__(self, "s", s)


@dataclass(frozen=True)
class KernelParams:
    """Diagonal-precision spatial decay plus exponential temporal decay."""

    tilde_sigma_sq: np.ndarray  # length p, > 0
    tau: float
    xi: float

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.tilde_sigma_sq, dtype=float))
        object.__setattr__(self, "tilde_sigma_sq", v)
        if np.any(v <= 0.0) or not np.all(np.isfinite(v)):
            raise InvalidArgumentError("tilde_sigma_sq entries must be positive and finite")
        if self.tau <= 0.0 or self.xi <= 0.0:
            raise InvalidArgumentError("tau and xi must be positive")

    @property
    def p(self) -> int:
        return self.tilde_sigma_sq.size


@dataclass(frozen=True)
class MonotoneMapParams:
    """Per-dimension increments C_l * X_l * (delta s)^r plus anchor C~_l."""

    C: np.ndarray
    C_tilde: np.ndarray
    X: np.ndarray
    nu: np.ndarray
    omega_sq: np.ndarray
    r: int = 2

    def __post_init__(self):
        for name in ("C", "C_tilde", "X", "nu", "omega_sq"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if np.any(self.C <= 0.0) or np.any(self.C_tilde <= 0.0) or np.any(self.omega_sq <= 0.0):
            raise InvalidArgumentError("C, C_tilde, omega_sq must be positive")
        if np.any(self.X < 0.0):
            raise InvalidArgumentError("X entries are |Z| and must be nonnegative")
        if self.r < 1:
            raise InvalidArgumentError("exponent r must be >= 1")

    @property
    def p(self) -> int:
        return self.C.size


@dataclass(frozen=True)
class MonotoneMapFit:
    """Map values at the sorted unique training coordinates, per dimension."""

    knots: tuple[np.ndarray, ...]   # sorted unique coordinates
    values: tuple[np.ndarray, ...]  # fitted M_l at the knots


@dataclass
class LatentAtoms:
    """Variable-dimension block for one time index: J (mu, beta) pairs."""

    mu: np.ndarray    # (J, p)
    beta: np.ndarray  # (J,)

    def __post_init__(self):
        self.mu = np.atleast_2d(np.asarray(self.mu, dtype=float))
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if self.mu.shape[0] != self.beta.shape[0]:
            raise InvalidArgumentError("mu and beta must agree on the atom count")

    @property
    def count(self) -> int:
        return self.beta.size

    def copy(self) -> "LatentAtoms":
        return LatentAtoms(self.mu.copy(), self.beta.copy())


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters of the independent priors.

    `ig_a`/`ig_b` cover every generic inverse-gamma component; the tight
    pair covers the observation and random-effect variances.
    """

    ig_a: float = 2.01
    ig_b: float = 1.01
    ig_a_tight: float = 1.0e4
    ig_b_tight: float = 1.0
    lambda_a: float = 0.01
    lambda_b: float = 0.001
    nu_var: float = 100.0
    rho_var: float = 100.0
    mu_alpha: float = 0.0

    def __post_init__(self):
        for name in ("ig_a", "ig_b", "ig_a_tight", "ig_b_tight", "lambda_a", "lambda_b", "nu_var", "rho_var"):
            if getattr(self, name) <= 0.0:
                raise InvalidArgumentError(f"prior parameter {name} must be positive")


@dataclass
class ScalarHypers:
    """Scalars updated by Gibbs steps (the zeta block, minus nu/omega_sq)."""

    lam: float
    sigma_sq_eps: float
    alpha: float = 0.0
    sigma_sq_alpha: float = 1.0
    sigma_sq_phi: float = 0.0

    def validate(self, marginalized: bool) -> None:
        if self.lam <= 0.0 or self.sigma_sq_eps <= 0.0 or self.sigma_sq_alpha <= 0.0:
            raise InvalidArgumentError("lambda and variances must be positive")
        if self.sigma_sq_phi < 0.0 or (self.sigma_sq_phi == 0.0 and not marginalized):
            raise InvalidArgumentError("sigma_sq_phi must be positive in explicit mode")


# ---------------------------------------------------------------------------
# kernel / map / field
# ---------------------------------------------------------------------------

def kernel_eval(delta_s: np.ndarray, delta_t: float, kp: KernelParams) -> float:
    """Bounded kernel exp(-0.5 * sum ksq_l ds_l^2 - xi |dt|), in (0, 1]."""
    ds = np.atleast_1d(np.asarray(delta_s, dtype=float))
    if ds.size != kp.p or not np.all(np.isfinite(ds)) or not np.isfinite(delta_t):
        raise InvalidArgumentError("delta_s/delta_t must be finite and match p")
    return float(np.exp(-0.5 * np.dot(kp.tilde_sigma_sq, ds * ds) - kp.xi * abs(delta_t)))


def monotone_map_fit(coords_per_dim, mp: MonotoneMapParams) -> MonotoneMapFit:
    """Evaluate the increment recursion at sorted coordinates, per dimension.

    M_l(s_(1)) = C~_l - C_l X_l |s_(1)|^r and
    M_l(s_(i)) = M_l(s_(i-1)) + C_l X_l (s_(i) - s_(i-1))^r.
    """
    if len(coords_per_dim) != mp.p:
        raise InvalidArgumentError("one coordinate vector per dimension required")
    knots, values = [], []
    for ell, coords in enumerate(coords_per_dim):
        c = np.asarray(coords, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise InvalidArgumentError("each dimension needs a nonempty coordinate vector")
        if c.size > 1 and np.any(np.diff(c) < 0.0):
            raise InvalidArgumentError(f"coordinates for dimension {ell} are not sorted")
        slope = mp.C[ell] * mp.X[ell]
        m = np.empty_like(c)
        m[0] = mp.C_tilde[ell] - slope * abs(c[0]) ** mp.r
        if c.size > 1:
            m[1:] = m[0] + np.cumsum(slope * np.diff(c) ** mp.r)
        knots.append(c)
        values.append(m)
    return MonotoneMapFit(tuple(knots), tuple(values))


def monotone_map_extend(s_new: float, dim: int, fit: MonotoneMapFit, mp: MonotoneMapParams) -> float:
    """Map value at an unseen coordinate via the nearest-lower-knot increment.

    Exact at training knots, monotone between consecutive knots; below the
    smallest knot the same increment is subtracted.
    """
    if not np.isfinite(s_new):
        raise InvalidArgumentError("s_new must be finite")
    knots, values = fit.knots[dim], fit.values[dim]
    slope = mp.C[dim] * mp.X[dim]
    if s_new < knots[0]:
        return float(values[0] - slope * (knots[0] - s_new) ** mp.r)
    i = int(np.searchsorted(knots, s_new, side="right")) - 1
    return float(values[i] + slope * (s_new - knots[i]) ** mp.r)


def f_eval(mapped_s: np.ndarray, t: float, atoms: LatentAtoms, kp: KernelParams) -> float:
    """Field value at one mapped location: sum_j K(M(s)-mu_j, t-tau) beta_j."""
    ms = np.atleast_1d(np.asarray(mapped_s, dtype=float))
    if atoms.count == 0:
        return 0.0
    if atoms.mu.shape[1] != ms.size or ms.size != kp.p:
        raise InvalidArgumentError("dimension mismatch between mapped_s, atoms and kernel")
    d = ms[None, :] - atoms.mu
    logk = -0.5 * (d * d) @ kp.tilde_sigma_sq - kp.xi * abs(t - kp.tau)
    return float(np.exp(logk) @ atoms.beta)


def field_values(mapped: np.ndarray, t: float, atoms: LatentAtoms, kp: KernelParams) -> np.ndarray:
    """Vectorized f over the rows of an (n, p) mapped-location matrix."""
    if atoms.count == 0:
        return np.zeros(mapped.shape[0])
    d = mapped[:, None, :] - atoms.mu[None, :, :]       # (n, J, p)
    logk = -0.5 * np.einsum("njp,p->nj", d * d, kp.tilde_sigma_sq) - kp.xi * abs(t - kp.tau)
    return np.exp(logk) @ atoms.beta


def log_observation_density(y, alpha: float, phi, f, sigma_sq_eff: float):
    """Gaussian log density of y around alpha + phi + f."""
    if sigma_sq_eff <= 0.0:
        raise InvalidArgumentError("effective variance must be positive")
    resid = np.asarray(y, dtype=float) - (alpha + np.asarray(phi, dtype=float) + np.asarray(f, dtype=float))
    return -0.5 * (_LOG_2PI + math.log(sigma_sq_eff)) - 0.5 * resid * resid / sigma_sq_eff


# ---------------------------------------------------------------------------
# theta block: packing, transforms, bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaLayout:
    """Index map of the 6p+4 fixed-dimension block in sampling scale.

    Order: X (raw), log C~, log C, log ksq, log tau, log xi,
    logit rho (per dim), log sigma_sq (per dim), logit rho_beta,
    log sigma_sq_beta.
    """

    p: int

    @property
    def dim(self) -> int:
        return 6 * self.p + 4

    @property
    def sl_x(self):
        return slice(0, self.p)

    @property
    def sl_log_c_tilde(self):
        return slice(self.p, 2 * self.p)

    @property
    def sl_log_c(self):
        return slice(2 * self.p, 3 * self.p)

    @property
    def sl_log_ksq(self):
        return slice(3 * self.p, 4 * self.p)

    @property
    def i_log_tau(self):
        return 4 * self.p

    @property
    def i_log_xi(self):
        return 4 * self.p + 1

    @property
    def sl_logit_rho(self):
        return slice(4 * self.p + 2, 5 * self.p + 2)

    @property
    def sl_log_ssq(self):
        return slice(5 * self.p + 2, 6 * self.p + 2)

    @property
    def i_logit_rho_beta(self):
        return 6 * self.p + 2

    @property
    def i_log_ssq_beta(self):
        return 6 * self.p + 3

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        lo[self.sl_x], hi[self.sl_x] = X_LO, X_HI
        for sl in (self.sl_log_c_tilde, self.sl_log_c, self.sl_log_ksq, self.sl_log_ssq):
            lo[sl], hi[sl] = LOG_LO, LOG_HI
        lo[self.i_log_tau] = lo[self.i_log_xi] = lo[self.i_log_ssq_beta] = LOG_LO
        hi[self.i_log_tau] = hi[self.i_log_xi] = hi[self.i_log_ssq_beta] = LOG_HI
        lo[self.sl_logit_rho], hi[self.sl_logit_rho] = -LOGIT_BOUND, LOGIT_BOUND
        lo[self.i_logit_rho_beta], hi[self.i_logit_rho_beta] = -LOGIT_BOUND, LOGIT_BOUND
        return lo, hi


def theta_in_bounds(theta: np.ndarray, layout: ThetaLayout) -> bool:
    lo, hi = layout.bounds()
    return bool(np.all(theta >= lo) and np.all(theta <= hi))


def unpack_theta(theta: np.ndarray, layout: ThetaLayout, mode: ArMode, nu=None, omega_sq=None):
    """Split the sampling-scale vector into natural-scale parameter groups.

    Returns (KernelParams, MonotoneMapParams, beta ArSpec, list of mu ArSpecs).
    nu/omega_sq default to zeros/ones placeholders when only the map values
    are needed.
    """
    p = layout.p
    kp = KernelParams(
        tilde_sigma_sq=np.exp(theta[layout.sl_log_ksq]),
        tau=float(np.exp(theta[layout.i_log_tau])),
        xi=float(np.exp(theta[layout.i_log_xi])),
    )
    mp = MonotoneMapParams(
        C=np.exp(theta[layout.sl_log_c]),
        C_tilde=np.exp(theta[layout.sl_log_c_tilde]),
        X=np.asarray(theta[layout.sl_x], dtype=float).copy(),
        nu=np.zeros(p) if nu is None else np.asarray(nu, dtype=float),
        omega_sq=np.ones(p) if omega_sq is None else np.asarray(omega_sq, dtype=float),
    )
    beta_spec = ArSpec(
        rho=rho_from_transformed(float(theta[layout.i_logit_rho_beta]), mode),
        sigma_sq=float(np.exp(theta[layout.i_log_ssq_beta])),
        mode=mode,
    )
    mu_specs = [
        ArSpec(
            rho=rho_from_transformed(float(theta[layout.sl_logit_rho][ell]), mode),
            sigma_sq=float(np.exp(theta[layout.sl_log_ssq][ell])),
            mode=mode,
        )
        for ell in range(p)
    ]
    return kp, mp, beta_spec, mu_specs


# ---------------------------------------------------------------------------
# priors
# ---------------------------------------------------------------------------

def log_ig(x: float, a: float, b: float) -> float:
    """Inverse-gamma log density, shape a, scale b."""
    if x <= 0.0:
        return -np.inf
    return a * math.log(b) - gammaln(a) - (a + 1.0) * math.log(x) - b / x


def log_gamma_pdf(x: float, a: float, b: float) -> float:
    """Gamma log density, shape a, rate b."""
    if x <= 0.0:
        return -np.inf
    return a * math.log(b) - gammaln(a) + (a - 1.0) * math.log(x) - b * x


def log_ig_transformed(phi: float, a: float, b: float) -> float:
    """Inverse-gamma density of exp(phi) with the log-scale Jacobian."""
    return a * math.log(b) - gammaln(a) - (a + 1.0) * phi - b * math.exp(-phi) + phi


def _gauss_logpdf_scalar(x: float, mean: float, var: float) -> float:
    return -0.5 * (_LOG_2PI + math.log(var) + (x - mean) ** 2 / var)


def log_prior_theta(theta: np.ndarray, layout: ThetaLayout, nu: np.ndarray,
                    omega_sq: np.ndarray, prior: PriorConfig) -> float:
    """Prior of the fixed-dimension block in sampling coordinates.

    Returns -inf outside the truncation box.  Autoregression coefficients
    carry their prior on the transformed scale directly (no Jacobian); the
    slope variables X_l use the conjugate Gaussian factor N(X | nu, omega_sq)
    restricted to the bound interval, matching the closed-form nu/omega_sq
    updates.
    """
    if not theta_in_bounds(theta, layout):
        return -np.inf
    total = 0.0
    for ell in range(layout.p):
        total += _gauss_logpdf_scalar(float(theta[layout.sl_x][ell]), float(nu[ell]), float(omega_sq[ell]))
        total += log_ig_transformed(float(theta[layout.sl_log_c_tilde][ell]), prior.ig_a, prior.ig_b)
        total += log_ig_transformed(float(theta[layout.sl_log_c][ell]), prior.ig_a, prior.ig_b)
        total += log_ig_transformed(float(theta[layout.sl_log_ksq][ell]), prior.ig_a, prior.ig_b)
        total += _gauss_logpdf_scalar(float(theta[layout.sl_logit_rho][ell]), 0.0, prior.rho_var)
        total += log_ig_transformed(float(theta[layout.sl_log_ssq][ell]), prior.ig_a, prior.ig_b)
    total += log_ig_transformed(float(theta[layout.i_log_tau]), prior.ig_a, prior.ig_b)
    total += log_ig_transformed(float(theta[layout.i_log_xi]), prior.ig_a, prior.ig_b)
    total += _gauss_logpdf_scalar(float(theta[layout.i_logit_rho_beta]), 0.0, prior.rho_var)
    total += log_ig_transformed(float(theta[layout.i_log_ssq_beta]), prior.ig_a, prior.ig_b)
    return total


def log_prior_zeta(hypers: ScalarHypers, nu: np.ndarray, omega_sq: np.ndarray,
                   prior: PriorConfig, marginalized: bool, alpha_pinned: bool) -> float:
    """Prior of the Gibbs-updated scalars."""
    total = log_gamma_pdf(hypers.lam, prior.lambda_a, prior.lambda_b)
    total += log_ig(hypers.sigma_sq_eps, prior.ig_a_tight, prior.ig_b_tight)
    for ell in range(nu.size):
        total += _gauss_logpdf_scalar(float(nu[ell]), 0.0, prior.nu_var)
        total += log_ig(float(omega_sq[ell]), prior.ig_a, prior.ig_b)
    if not alpha_pinned:
        total += _gauss_logpdf_scalar(hypers.alpha, prior.mu_alpha, hypers.sigma_sq_alpha)
        total += log_ig(hypers.sigma_sq_alpha, prior.ig_a_tight, prior.ig_b_tight)
    if not marginalized:
        total += log_ig(hypers.sigma_sq_phi, prior.ig_a_tight, prior.ig_b_tight)
    return total


def log_prior(theta: np.ndarray, layout: ThetaLayout, hypers: ScalarHypers,
              nu: np.ndarray, omega_sq: np.ndarray, prior: PriorConfig,
              marginalized: bool = True, alpha_pinned: bool = True) -> float:
    """Joint prior of theta and the scalar hyperparameters."""
    lp = log_prior_theta(theta, layout, nu, omega_sq, prior)
    if not np.isfinite(lp):
        return -np.inf
    return lp + log_prior_zeta(hypers, nu, omega_sq, prior, marginalized, alpha_pinned)


# ---------------------------------------------------------------------------
# atom-process density and joint posterior
# ---------------------------------------------------------------------------

def atoms_in_bounds(atoms: LatentAtoms) -> bool:
    return bool(np.all(np.abs(atoms.mu) <= COORD_BOUND))


def chain_factor(values_curr: np.ndarray, values_prev, j_prev: int, gap, spec: ArSpec):
    """Log density of one coordinate column at time k given its predecessor.

    Atom chains are index-matched across time; chains without a predecessor
    (index beyond the previous count) start from the initial law.
    """
    J = values_curr.size
    shared = min(J, j_prev)
    total = 0.0
    if shared > 0:
        total += float(np.sum(ar_transition_log_density(values_curr[:shared], values_prev[:shared], gap, spec)))
    if J > shared:
        total += float(np.sum(ar_initial_log_density(values_curr[shared:], spec)))
    return total


def atom_block_log_density(atoms_k: LatentAtoms, atoms_prev: LatentAtoms | None,
                           gap, beta_spec: ArSpec, mu_specs) -> float:
    """All incoming process factors of one time block (bounds included)."""
    if not atoms_in_bounds(atoms_k):
        return -np.inf
    if atoms_prev is None:
        total = float(np.sum(ar_initial_log_density(atoms_k.beta, beta_spec)))
        for ell, spec in enumerate(mu_specs):
            total += float(np.sum(ar_initial_log_density(atoms_k.mu[:, ell], spec)))
        return total
    total = chain_factor(atoms_k.beta, atoms_prev.beta, atoms_prev.count, gap, beta_spec)
    for ell, spec in enumerate(mu_specs):
        total += chain_factor(atoms_k.mu[:, ell], atoms_prev.mu[:, ell], atoms_prev.count, gap, spec)
    return total


def atom_process_log_density(atoms: list[LatentAtoms], times: np.ndarray,
                             beta_spec: ArSpec, mu_specs) -> float:
    """Process factors over all time blocks (initial laws plus transitions)."""
    total = atom_block_log_density(atoms[0], None, None, beta_spec, mu_specs)
    for k in range(1, len(atoms)):
        if not np.isfinite(total):
            return -np.inf
        total += atom_block_log_density(atoms[k], atoms[k - 1], times[k] - times[k - 1], beta_spec, mu_specs)
    return total


def count_log_factor(J: int, lam: float) -> float:
    """Unnormalized Poisson count factor J log(lam) - log(J!).

    The exp(-lam) normalization is constant across J moves and enters the
    lambda update through its conjugate rate instead.
    """
    return J * math.log(lam) - float(gammaln(J + 1))


def log_joint_parts(atoms: list[LatentAtoms], theta: np.ndarray, hypers: ScalarHypers,
                    nu: np.ndarray, omega_sq: np.ndarray, phi: np.ndarray | None,
                    y: np.ndarray, mapped: np.ndarray, times: np.ndarray, phi0: np.ndarray,
                    prior: PriorConfig, mode: ArMode, marginalized: bool,
                    alpha_pinned: bool = True) -> dict[str, float]:
    """Named factors of the joint log posterior (up to an additive constant).

    phi is ignored in marginalized mode, where the observation mean uses
    phi0 and the noise variance sigma_sq_eps + sigma_sq_phi.
    """
    layout = ThetaLayout(p=mapped.shape[1])
    if len(atoms) != times.size:
        raise InvalidStateError("one atom block per time index required")
    kp, _, beta_spec, mu_specs = unpack_theta(theta, layout, mode, nu, omega_sq)
    parts: dict[str, float] = {}

    if marginalized:
        phi_eff = phi0
        var_eff = hypers.sigma_sq_eps + hypers.sigma_sq_phi
    else:
        if phi is None:
            raise InvalidStateError("explicit mode requires a phi field")
        phi_eff = phi
        var_eff = hypers.sigma_sq_eps
    loglik = 0.0
    for k in range(times.size):
        f = field_values(mapped, times[k], atoms[k], kp)
        loglik += float(np.sum(log_observation_density(y[:, k], hypers.alpha, phi_eff[:, k], f, var_eff)))
    parts["likelihood"] = loglik
    parts["counts"] = sum(count_log_factor(a.count, hypers.lam) for a in atoms)
    parts["atom_process"] = atom_process_log_density(atoms, times, beta_spec, mu_specs)
    parts["theta_prior"] = log_prior_theta(theta, layout, nu, omega_sq, prior)
    parts["zeta_prior"] = log_prior_zeta(hypers, nu, omega_sq, prior, marginalized, alpha_pinned)
    if not marginalized:
        parts["random_effects"] = float(
            np.sum(-0.5 * (_LOG_2PI + math.log(hypers.sigma_sq_phi))
                   - 0.5 * (phi - phi0) ** 2 / hypers.sigma_sq_phi)
        )
    return parts


def log_joint_posterior(*args, **kwargs) -> float:
    """Sum of `log_joint_parts` (up to the constant of proportionality)."""
    parts = log_joint_parts(*args, **kwargs)
    values = np.array(list(parts.values()))
    if np.any(~np.isfinite(values)):
        return -np.inf
    return float(values.sum())
