"""Transdimensional MCMC engine: birth/death/no-change moves per time block,
block updates of the fixed-dimension parameters via shared-draw proposals, a
mixing-enhancement pass, and exact Gibbs draws for the remaining scalars.

Per iteration: odd time blocks (parallel) -> even time blocks (parallel) ->
fixed-dimension block -> enhancement -> broadcast -> random effects
(explicit mode, parallel) -> scalar Gibbs -> broadcast.  Every block owns a
dedicated random stream keyed by (seed, stream id, iteration, index), so the
stored chain is bit-identical for any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import invgamma, norm

from . import effects
from .ar import ArMode, ArSpec, mode_for_times
from .data import SpaceTimeDataset
from .errors import ConfigError, InvalidArgumentError, InvalidStateError, UnsupportedPredictionError
from .model import (
    COORD_BOUND,
    LatentAtoms,
    PriorConfig,
    ScalarHypers,
    ThetaLayout,
    atom_block_log_density,
    atom_process_log_density,
    count_log_factor,
    field_values,
    log_observation_density,
    log_prior_theta,
    monotone_map_extend,
    monotone_map_fit,
    theta_in_bounds,
    unpack_theta,
)
from .runtime import WorkerPool, reduce_sum, schedule_parity

# Random stream identifiers.
_S_INIT, _S_BLOCK, _S_THETA, _S_PHI, _S_ZETA, _S_PREDICT = range(6)

MOVE_NAMES = ("birth", "death", "no_change", "tmcmc", "enhance")


def stream(seed: int, *key: int) -> np.random.Generator:
    """Dedicated generator for one (stream id, iteration, index) slot."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


# ---------------------------------------------------------------------------
# configuration and bookkeeping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 110_000
    burn_in: int = 10_000
    thin: int = 10
    j_max: int = 50
    scale: float = 0.05        # additive scaling constant a
    shrink: float = 0.01       # factor c applied for joint/no-change proposals
    p_add: float = 0.5         # mixture weight of the additive branch
    q_add: float = 0.5         # additive weight in the enhancement step
    eps_floor: float = 0.01    # |eps| floor for multiplicative draws
    base_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    workers: int = 1
    seed: int = 0
    # Include the auxiliary-draw densities in the birth/death acceptance so
    # the dimension moves are exactly reversible (see decisions ledger); the
    # printed-form factors remain available for fidelity comparisons.
    exact_acceptance: bool = True

    def __post_init__(self):
        if self.iterations < 0 or not 0 <= self.burn_in <= self.iterations:
            raise ConfigError("need 0 <= burn_in <= iterations")
        if self.thin < 1 or (self.iterations > 0 and self.thin > self.iterations):
            raise ConfigError("thinning stride must be in [1, iterations]")
        if self.j_max < 1:
            raise ConfigError("j_max must be >= 1")
        if self.scale <= 0.0 or not 0.0 < self.shrink < 1.0:
            raise ConfigError("scale must be > 0 and shrink in (0, 1)")
        if not 0.0 < self.eps_floor < 1.0:
            raise ConfigError("eps_floor must be in (0, 1)")
        if not (0.0 <= self.p_add <= 1.0 and 0.0 <= self.q_add <= 1.0):
            raise ConfigError("mixture weights must be in [0, 1]")
        wb, wd, wnc = self.base_weights
        if min(wb, wd, wnc) < 0.0 or not math.isclose(wb + wd + wnc, 1.0, rel_tol=1e-9):
            raise ConfigError("base move weights must be nonnegative and sum to one")
        if self.workers < 1:
            raise ConfigError("worker count must be >= 1")


def move_weights(J: int, cfg: SamplerConfig) -> tuple[float, float, float]:
    """(birth, death, no-change) probabilities at the current count."""
    wb, wd, wnc = cfg.base_weights
    if J <= 1:
        wd = 0.0
    if J >= cfg.j_max:
        wb = 0.0
    total = wb + wd + wnc
    return wb / total, wd / total, wnc / total


@dataclass
class MoveStats:
    proposals: dict[str, int] = field(default_factory=lambda: {m: 0 for m in MOVE_NAMES})
    accepts: dict[str, int] = field(default_factory=lambda: {m: 0 for m in MOVE_NAMES})

    def record(self, move: str, accepted: bool) -> None:
        self.proposals[move] += 1
        if accepted:
            self.accepts[move] += 1

    def rate(self, move: str) -> float | None:
        n = self.proposals[move]
        return None if n == 0 else self.accepts[move] / n

    def overall_ttmcmc_rate(self) -> float | None:
        props = sum(self.proposals[m] for m in ("birth", "death", "no_change"))
        accs = sum(self.accepts[m] for m in ("birth", "death", "no_change"))
        return None if props == 0 else accs / props


@dataclass
class SamplerState:
    atoms: list[LatentAtoms]
    theta: np.ndarray
    hypers: ScalarHypers
    nu: np.ndarray
    omega_sq: np.ndarray
    phi: np.ndarray | None = None

    def snapshot_atoms(self) -> tuple[LatentAtoms, ...]:
        return tuple(self.atoms)


@dataclass
class ChainSample:
    iteration: int
    atoms: list[LatentAtoms]
    theta: np.ndarray
    lam: float
    sigma_sq_eps: float
    alpha: float
    sigma_sq_alpha: float
    sigma_sq_phi: float
    nu: np.ndarray
    omega_sq: np.ndarray
    phi: np.ndarray | None = None


@dataclass
class ChainResult:
    samples: list[ChainSample]
    stats: MoveStats
    meta: dict


# ---------------------------------------------------------------------------
# model context and per-theta cache
# ---------------------------------------------------------------------------

@dataclass
class ModelContext:
    """Dataset-derived constants shared by every update."""

    y: np.ndarray
    locations: np.ndarray
    times: np.ndarray
    phi0: np.ndarray
    prior: PriorConfig
    marginalized: bool
    alpha_pinned: bool
    ar_mode: ArMode
    knots: tuple[np.ndarray, ...]
    knot_inverse: tuple[np.ndarray, ...]

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def m(self) -> int:
        return self.y.shape[1]

    @property
    def p(self) -> int:
        return self.locations.shape[1]

    @property
    def layout(self) -> ThetaLayout:
        return ThetaLayout(p=self.p)

    def phi_effective(self, phi: np.ndarray | None) -> np.ndarray:
        return self.phi0 if self.marginalized else phi

    def var_effective(self, hypers: ScalarHypers) -> float:
        if self.marginalized:
            return hypers.sigma_sq_eps + hypers.sigma_sq_phi
        return hypers.sigma_sq_eps


def build_context(data: SpaceTimeDataset, prior: PriorConfig, marginalized: bool = True,
                  alpha_pinned: bool | None = None, phi0_override: np.ndarray | None = None) -> ModelContext:
    if alpha_pinned is None:
        alpha_pinned = data.standardized
    if phi0_override is not None:
        phi0 = np.asarray(phi0_override, dtype=float)
        if phi0.shape != data.y.shape:
            raise InvalidArgumentError("phi0 override must match the response shape")
    else:
        phi0 = effects.phi0_training_matrix(data.locations, data.y)
    knots, inverse = [], []
    for ell in range(data.p):
        uniq, inv = np.unique(data.locations[:, ell], return_inverse=True)
        knots.append(uniq)
        inverse.append(inv)
    return ModelContext(
        y=data.y, locations=data.locations, times=data.times, phi0=phi0,
        prior=prior, marginalized=marginalized, alpha_pinned=alpha_pinned,
        ar_mode=mode_for_times(data.times), knots=tuple(knots), knot_inverse=tuple(inverse),
    )


@dataclass
class ThetaCache:
    """Natural-scale parameters and mapped locations for one theta value."""

    kp: object
    mp: object
    beta_spec: ArSpec
    mu_specs: list[ArSpec]
    mapped: np.ndarray
    fit: object

    @classmethod
    def build(cls, theta: np.ndarray, ctx: ModelContext, nu: np.ndarray, omega_sq: np.ndarray) -> "ThetaCache":
        kp, mp, beta_spec, mu_specs = unpack_theta(theta, ctx.layout, ctx.ar_mode, nu, omega_sq)
        fit = monotone_map_fit(list(ctx.knots), mp)
        mapped = np.empty((ctx.n, ctx.p))
        for ell in range(ctx.p):
            mapped[:, ell] = fit.values[ell][ctx.knot_inverse[ell]]
        return cls(kp=kp, mp=mp, beta_spec=beta_spec, mu_specs=mu_specs, mapped=mapped, fit=fit)


# ---------------------------------------------------------------------------
# block conditional
# ---------------------------------------------------------------------------

def loglik_slice(k: int, atoms_k: LatentAtoms, cache: ThetaCache, ctx: ModelContext,
                 hypers: ScalarHypers, phi: np.ndarray | None) -> float:
    f = field_values(cache.mapped, ctx.times[k], atoms_k, cache.kp)
    phi_col = ctx.phi_effective(phi)[:, k]
    return float(np.sum(log_observation_density(
        ctx.y[:, k], hypers.alpha, phi_col, f, ctx.var_effective(hypers))))


def block_logpost(k: int, atoms_k: LatentAtoms, neighbors: tuple, cache: ThetaCache,
                  ctx: ModelContext, hypers: ScalarHypers, phi: np.ndarray | None,
                  j_max: int) -> float:
    """Log full conditional of time block k (boundary blocks one-sided).

    Contains the count factor, the incoming process factors of block k, the
    outgoing factors of block k+1 (whose transition-vs-initial split depends
    on this block's count), and the time-k likelihood slice.
    """
    atoms_prev, atoms_next = neighbors
    if not 1 <= atoms_k.count <= j_max:
        return -np.inf
    lp = count_log_factor(atoms_k.count, hypers.lam)
    gap_in = None if k == 0 else ctx.times[k] - ctx.times[k - 1]
    lp += atom_block_log_density(atoms_k, atoms_prev, gap_in, cache.beta_spec, cache.mu_specs)
    if not np.isfinite(lp):
        return -np.inf
    if atoms_next is not None:
        lp += atom_block_log_density(atoms_next, atoms_k, ctx.times[k + 1] - ctx.times[k],
                                     cache.beta_spec, cache.mu_specs)
    if not np.isfinite(lp):
        return -np.inf
    return lp + loglik_slice(k, atoms_k, cache, ctx, hypers, phi)


def _draw_mult_eps(rng: np.random.Generator, floor: float) -> float:
    while True:
        eps = rng.uniform(-1.0, 1.0)
        if abs(eps) > floor:
            return eps


_LOG_HALF_NORMAL_CONST = 0.5 * math.log(2.0 / math.pi)


def _log_half_normal(u: np.ndarray) -> np.ndarray:
    """Log density of |N(0, 1)| at u >= 0."""
    u = np.asarray(u, dtype=float)
    return _LOG_HALF_NORMAL_CONST - 0.5 * u * u


# ---------------------------------------------------------------------------
# transdimensional moves
# ---------------------------------------------------------------------------

def ttmcmc_birth(k, atoms_k, neighbors, cache, ctx, hypers, cfg, rng, phi=None):
    """Split one atom into two; dimension J -> J + 1.

    Additive branch: the selected atom splits into (x + a|e|, x - a|e|) per
    coordinate with independent standard-normal draws; multiplicative branch
    into (x e, x / e) with uniform draws above the floor.  With exact
    acceptance the additive split signs are symmetrized, the second child is
    appended at the end (no index shifts, so cross-time chain pairings of
    untouched atoms are preserved), and the acceptance carries the auxiliary
    densities, making the move pair exactly reversible.
    """
    J = atoms_k.count
    if J >= cfg.j_max:
        raise InvalidStateError("birth proposed at the count ceiling")
    additive = rng.random() <= cfg.p_add
    j = int(rng.integers(J))
    p = ctx.p
    child_pos = J if cfg.exact_acceptance else j + 1
    info = {"branch": "additive" if additive else "multiplicative", "j": j,
            "child_pos": child_pos}

    mu, beta = atoms_k.mu, atoms_k.beta
    if additive:
        eps1 = rng.standard_normal()
        eps_mu = rng.standard_normal(p)
        steps = cfg.scale * np.abs(np.concatenate([[eps1], eps_mu]))
        if cfg.exact_acceptance:
            signs = rng.integers(0, 2, size=p + 1) * 2.0 - 1.0
        else:
            signs = np.ones(p + 1)
        beta_new = np.insert(beta, child_pos, beta[j] - signs[0] * steps[0])
        beta_new[j] = beta[j] + signs[0] * steps[0]
        mu_new = np.insert(mu, child_pos, mu[j] - signs[1:] * steps[1:], axis=0)
        mu_new[j] = mu[j] + signs[1:] * steps[1:]
        if cfg.exact_acceptance:
            u = np.abs(np.concatenate([[eps1], eps_mu]))
            log_struct = float(np.sum(math.log(4.0 * cfg.scale) - _log_half_normal(u)))
        else:
            log_struct = (p + 1) * (math.log(2.0) + math.log(cfg.scale))
        info.update(eps1=eps1, eps_mu=eps_mu, signs=signs)
    else:
        eps1 = _draw_mult_eps(rng, cfg.eps_floor)
        eps_mu = np.array([_draw_mult_eps(rng, cfg.eps_floor) for _ in range(p)])
        beta_new = np.insert(beta, child_pos, beta[j] / eps1)
        beta_new[j] = beta[j] * eps1
        mu_new = np.insert(mu, child_pos, mu[j] / eps_mu, axis=0)
        mu_new[j] = mu[j] * eps_mu
        with np.errstate(divide="ignore"):
            log_struct = float(np.log(abs(beta[j])) - np.log(abs(eps1))
                               + np.sum(np.log(np.abs(mu[j])) - np.log(np.abs(eps_mu))))
        if cfg.exact_acceptance:
            # pair Jacobian 2|x|/|eps| per coordinate times the draw densities
            log_struct += (p + 1) * (math.log(2.0) + math.log(1.0 - cfg.eps_floor))
        info.update(eps1=eps1, eps_mu=eps_mu)

    proposal = LatentAtoms(mu_new, beta_new)
    wb, _, _ = move_weights(J, cfg)
    _, wd_new, _ = move_weights(J + 1, cfg)
    log_struct += math.log(wd_new) - math.log(wb)
    if not cfg.exact_acceptance:
        # printed selection factor: child pair chosen among all J+1 atoms
        log_struct -= math.log(J + 1)
    lp_cur = block_logpost(k, atoms_k, neighbors, cache, ctx, hypers, phi, cfg.j_max)
    lp_prop = block_logpost(k, proposal, neighbors, cache, ctx, hypers, phi, cfg.j_max)
    log_alpha = lp_prop - lp_cur + log_struct
    info.update(log_struct=log_struct, log_alpha=log_alpha, lp_cur=lp_cur, lp_prop=lp_prop)
    accepted = _mh_accept(log_alpha, rng)
    return (proposal if accepted else atoms_k), accepted, info


def ttmcmc_death(k, atoms_k, neighbors, cache, ctx, hypers, cfg, rng, phi=None):
    """Merge two atoms into one; dimension J -> J - 1.

    Additive branch merges the selected pair to its midpoint; the
    multiplicative branch to +-sqrt(|x_j x_j'|) with independent signs.  With
    exact acceptance the partner is always the last atom (the only pairing
    reachable by the append-at-end birth) and the factors mirror the matching
    birth, including the implied auxiliary densities; multiplicative merges
    of pairs no multiplicative birth can produce are rejected outright.
    """
    J = atoms_k.count
    if J < 2:
        raise InvalidStateError("death proposed with a single atom")
    additive = rng.random() <= cfg.p_add
    if cfg.exact_acceptance:
        lo = int(rng.integers(J - 1))
        hi = J - 1
    else:
        j = int(rng.integers(J))
        j2 = int(rng.integers(J - 1))
        if j2 >= j:
            j2 += 1
        lo, hi = min(j, j2), max(j, j2)
    p = ctx.p
    info = {"branch": "additive" if additive else "multiplicative", "lo": lo, "hi": hi}

    mu, beta = atoms_k.mu, atoms_k.beta
    pair_lo = np.concatenate([[beta[lo]], mu[lo]])
    pair_hi = np.concatenate([[beta[hi]], mu[hi]])
    unreachable = False
    if additive:
        merged_beta = 0.5 * (beta[lo] + beta[hi])
        merged_mu = 0.5 * (mu[lo] + mu[hi])
        if cfg.exact_acceptance:
            u = np.abs(pair_lo - pair_hi) / (2.0 * cfg.scale)
            log_struct = float(np.sum(_log_half_normal(u) - math.log(4.0 * cfg.scale)))
        else:
            log_struct = -(p + 1) * (math.log(2.0) + math.log(cfg.scale))
    else:
        sign_beta = 1.0 if rng.random() < 0.5 else -1.0
        signs_mu = np.where(rng.random(p) < 0.5, 1.0, -1.0)
        merged_beta = sign_beta * math.sqrt(abs(beta[lo] * beta[hi]))
        merged_mu = signs_mu * np.sqrt(np.abs(mu[lo] * mu[hi]))
        with np.errstate(divide="ignore"):
            log_struct = float(-np.log(abs(beta[hi])) - np.sum(np.log(np.abs(mu[hi]))))
        if cfg.exact_acceptance:
            log_struct -= (p + 1) * (math.log(2.0) + math.log(1.0 - cfg.eps_floor))
            same_sign = pair_lo * pair_hi > 0.0
            ratio_ok = np.abs(pair_lo) < np.abs(pair_hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                implied = np.sqrt(np.abs(pair_lo) / np.abs(pair_hi))
            unreachable = not (np.all(same_sign) and np.all(ratio_ok)
                               and np.all(implied > cfg.eps_floor))
        info.update(sign_beta=sign_beta, signs_mu=signs_mu)

    beta_new = np.delete(beta, hi)
    beta_new[lo] = merged_beta
    mu_new = np.delete(mu, hi, axis=0)
    mu_new[lo] = merged_mu
    proposal = LatentAtoms(mu_new, beta_new)

    _, wd, _ = move_weights(J, cfg)
    wb_new, _, _ = move_weights(J - 1, cfg)
    log_struct += math.log(wb_new) - math.log(wd)
    if not cfg.exact_acceptance:
        log_struct += math.log(J)
    lp_cur = block_logpost(k, atoms_k, neighbors, cache, ctx, hypers, phi, cfg.j_max)
    lp_prop = block_logpost(k, proposal, neighbors, cache, ctx, hypers, phi, cfg.j_max)
    log_alpha = -np.inf if unreachable else lp_prop - lp_cur + log_struct
    info.update(log_struct=log_struct, log_alpha=log_alpha, lp_cur=lp_cur,
                lp_prop=lp_prop, unreachable=unreachable)
    accepted = _mh_accept(log_alpha, rng)
    return (proposal if accepted else atoms_k), accepted, info


def ttmcmc_no_change(k, atoms_k, neighbors, cache, ctx, hypers, cfg, rng, phi=None):
    """Jointly perturb all (p+1)J atom coordinates; dimension unchanged."""
    J, p = atoms_k.count, ctx.p
    d = (p + 1) * J
    additive = rng.random() <= cfg.p_add
    v = np.concatenate([atoms_k.beta, atoms_k.mu.ravel()])
    info = {"branch": "additive" if additive else "multiplicative"}

    if additive:
        eps = rng.standard_normal()
        b = rng.integers(0, 2, size=d) * 2 - 1
        v_new = v + b * (cfg.shrink * cfg.scale) * abs(eps)
        log_jac = 0.0
        info.update(eps=eps, b=b)
    else:
        eps = _draw_mult_eps(rng, cfg.eps_floor)
        b = rng.integers(-1, 2, size=d)
        v_new = v.copy()
        v_new[b == 1] *= eps
        v_new[b == -1] /= eps
        log_jac = float(b.sum()) * math.log(abs(eps))
        info.update(eps=eps, b=b)

    proposal = LatentAtoms(v_new[J:].reshape(J, p), v_new[:J])
    lp_cur = block_logpost(k, atoms_k, neighbors, cache, ctx, hypers, phi, cfg.j_max)
    lp_prop = block_logpost(k, proposal, neighbors, cache, ctx, hypers, phi, cfg.j_max)
    log_alpha = lp_prop - lp_cur + log_jac
    info.update(log_jac=log_jac, log_alpha=log_alpha, lp_cur=lp_cur, lp_prop=lp_prop)
    accepted = _mh_accept(log_alpha, rng)
    return (proposal if accepted else atoms_k), accepted, info


def _mh_accept(log_alpha: float, rng: np.random.Generator) -> bool:
    if math.isnan(log_alpha):
        return False
    if log_alpha >= 0.0:
        # Still consume one uniform so the draw sequence does not depend on
        # the acceptance outcome.
        rng.random()
        return True
    return math.log(rng.random()) < log_alpha


def update_time_block(k, atoms_snapshot, cache, ctx, hypers, cfg, rng, phi=None):
    """One multinomial move-type draw and the corresponding move at index k."""
    atoms_k = atoms_snapshot[k]
    neighbors = (
        atoms_snapshot[k - 1] if k > 0 else None,
        atoms_snapshot[k + 1] if k < len(atoms_snapshot) - 1 else None,
    )
    wb, wd, _ = move_weights(atoms_k.count, cfg)
    u = rng.random()
    if u < wb:
        move = "birth"
        new_atoms, accepted, _ = ttmcmc_birth(k, atoms_k, neighbors, cache, ctx, hypers, cfg, rng, phi)
    elif u < wb + wd:
        move = "death"
        new_atoms, accepted, _ = ttmcmc_death(k, atoms_k, neighbors, cache, ctx, hypers, cfg, rng, phi)
    else:
        move = "no_change"
        new_atoms, accepted, _ = ttmcmc_no_change(k, atoms_k, neighbors, cache, ctx, hypers, cfg, rng, phi)
    return new_atoms, move, accepted


# ---------------------------------------------------------------------------
# fixed-dimension block update
# ---------------------------------------------------------------------------

def theta_logpost(theta, state, ctx, pool, cache=None):
    """Log conditional of the fixed-dimension block given everything else."""
    layout = ctx.layout
    if not theta_in_bounds(theta, layout):
        return -np.inf, None
    if cache is None:
        cache = ThetaCache.build(theta, ctx, state.nu, state.omega_sq)
    lp = log_prior_theta(theta, layout, state.nu, state.omega_sq, ctx.prior)
    lp += atom_process_log_density(state.atoms, ctx.times, cache.beta_spec, cache.mu_specs)
    if not np.isfinite(lp):
        return -np.inf, cache
    partials = pool.map_indices(
        range(ctx.m), lambda k: loglik_slice(k, state.atoms[k], cache, ctx, state.hypers, state.phi))
    return lp + reduce_sum(partials), cache


def tmcmc_update_theta(state, ctx, cfg, pool, rng, cur_lp, cur_cache):
    """Whole-block proposal driven by one scalar draw with per-coordinate
    signs (additive) or factors (multiplicative)."""
    d = ctx.layout.dim
    theta = state.theta
    info = {}
    if rng.random() <= cfg.p_add:
        eps = rng.standard_normal()
        b = rng.integers(0, 2, size=d) * 2 - 1
        proposal = theta + b * cfg.scale * abs(eps)
        log_jac = 0.0
        info.update(branch="additive", eps=eps, b=b)
    else:
        eps = _draw_mult_eps(rng, cfg.eps_floor)
        b = rng.integers(-1, 2, size=d)
        proposal = theta.copy()
        proposal[b == 1] *= eps
        proposal[b == -1] /= eps
        log_jac = float(b.sum()) * math.log(abs(eps))
        info.update(branch="multiplicative", eps=eps, b=b)
    lp_prop, cache_prop = theta_logpost(proposal, state, ctx, pool)
    log_alpha = lp_prop - cur_lp + log_jac
    info.update(proposal=proposal, log_jac=log_jac, log_alpha=log_alpha,
                lp_prop=lp_prop, lp_cur=cur_lp)
    if _mh_accept(log_alpha, rng):
        return proposal, lp_prop, cache_prop, True, info
    return theta, cur_lp, cur_cache, False, info


def mixing_enhancement(state, ctx, cfg, pool, rng, cur_lp, cur_cache):
    """Second pass over the block with common-direction proposals."""
    d = ctx.layout.dim
    theta = state.theta
    info = {}
    if rng.random() <= cfg.q_add:
        u_dir = rng.random()
        eps = rng.standard_normal()
        step = (cfg.shrink * cfg.scale) * abs(eps)
        proposal = theta + step if u_dir < 0.5 else theta - step
        log_jac = 0.0
        info.update(branch="additive", eps=eps, up=u_dir < 0.5)
    else:
        eps = _draw_mult_eps(rng, cfg.eps_floor)
        u_dir = rng.random()
        if u_dir < 0.5:
            proposal = theta * eps
            log_jac = d * math.log(abs(eps))
        else:
            proposal = theta / eps
            log_jac = -d * math.log(abs(eps))
        info.update(branch="multiplicative", eps=eps, up=u_dir < 0.5)
    lp_prop, cache_prop = theta_logpost(proposal, state, ctx, pool)
    log_alpha = lp_prop - cur_lp + log_jac
    info.update(proposal=proposal, log_jac=log_jac, log_alpha=log_alpha,
                lp_prop=lp_prop, lp_cur=cur_lp)
    if _mh_accept(log_alpha, rng):
        return proposal, lp_prop, cache_prop, True, info
    return theta, cur_lp, cur_cache, False, info


# ---------------------------------------------------------------------------
# Gibbs updates for the scalar block
# ---------------------------------------------------------------------------

def gibbs_update_zeta(state: SamplerState, ctx: ModelContext, rng: np.random.Generator,
                      reduced: dict) -> None:
    """Exact draws from the printed full conditionals, in a fixed scan order.

    `reduced` carries the parallel-reduced sums: total atom count, squared
    residuals, unsquared residuals, and squared effect deviations.
    """
    prior = ctx.prior
    hyp = state.hypers
    if reduced["resid_sq"] < 0.0 or reduced.get("phi_dev_sq", 0.0) < 0.0:
        raise InvalidStateError("negative reduced variance term")

    hyp.lam = rng.gamma(prior.lambda_a + reduced["j_total"]) / (prior.lambda_b + ctx.m)

    n_obs = ctx.n * ctx.m
    shape = prior.ig_a_tight + 0.5 * n_obs
    rate = prior.ig_b_tight + 0.5 * reduced["resid_sq"]
    hyp.sigma_sq_eps = rate / rng.gamma(shape)

    if not ctx.alpha_pinned:
        hyp.alpha = effects.gibbs_update_alpha(
            reduced["resid_alpha"], n_obs, ctx.var_effective(hyp), hyp.sigma_sq_alpha,
            prior.mu_alpha, rng)
        hyp.sigma_sq_alpha = effects.gibbs_update_sigma_sq_alpha(
            hyp.alpha, prior.mu_alpha, prior.ig_a_tight, prior.ig_b_tight, rng)

    if not ctx.marginalized:
        hyp.sigma_sq_phi = effects.gibbs_update_sigma_sq_phi(
            reduced["phi_dev_sq"], n_obs, prior.ig_a_tight, prior.ig_b_tight, rng)

    # Closed forms for the map-slope hyperparameters, one dimension at a time.
    x = state.theta[ctx.layout.sl_x]
    for ell in range(ctx.p):
        post_var = 1.0 / (1.0 / state.omega_sq[ell] + 1.0 / prior.nu_var)
        post_mean = post_var * x[ell] / state.omega_sq[ell]
        state.nu[ell] = post_mean + math.sqrt(post_var) * rng.standard_normal()
        shape = prior.ig_a + 0.5
        rate = prior.ig_b + 0.5 * (x[ell] - state.nu[ell]) ** 2
        state.omega_sq[ell] = rate / rng.gamma(shape)


# ---------------------------------------------------------------------------
# sampler driver
# ---------------------------------------------------------------------------

class Sampler:
    """Owns the iteration schedule, worker pool and random streams."""

    def __init__(self, data: SpaceTimeDataset, cfg: SamplerConfig, prior: PriorConfig,
                 marginalized: bool = True, alpha_pinned: bool | None = None,
                 phi0_override: np.ndarray | None = None, pool: WorkerPool | None = None):
        self.cfg = cfg
        self.ctx = build_context(data, prior, marginalized, alpha_pinned, phi0_override)
        self.pool = pool if pool is not None else WorkerPool(cfg.workers)
        self._owns_pool = pool is None

    def close(self):
        if self._owns_pool:
            self.pool.close()

    # -- initialization ----------------------------------------------------

    def initial_state(self) -> SamplerState:
        """Prior medians for the block parameters, prior means for the
        scalars, and atoms from their initial laws."""
        ctx, prior, cfg = self.ctx, self.ctx.prior, self.cfg
        layout = ctx.layout
        ig_med = float(invgamma.median(prior.ig_a, scale=prior.ig_b))
        omega0 = prior.ig_b / (prior.ig_a - 1.0) if prior.ig_a > 1.0 else ig_med
        x0 = math.sqrt(omega0) * float(norm.ppf(0.75))

        theta = np.empty(layout.dim)
        theta[layout.sl_x] = min(max(x0, 0.0), 10.0)
        log_med = math.log(ig_med)
        for sl in (layout.sl_log_c_tilde, layout.sl_log_c, layout.sl_log_ksq, layout.sl_log_ssq):
            theta[sl] = log_med
        theta[layout.i_log_tau] = log_med
        theta[layout.i_log_xi] = log_med
        theta[layout.sl_logit_rho] = 0.0
        theta[layout.i_logit_rho_beta] = 0.0
        theta[layout.i_log_ssq_beta] = log_med
        lo, hi = layout.bounds()
        theta = np.clip(theta, lo, hi)

        lam0 = prior.lambda_a / prior.lambda_b
        ig_tight_mean = prior.ig_b_tight / (prior.ig_a_tight - 1.0)
        hypers = ScalarHypers(
            lam=lam0, sigma_sq_eps=ig_tight_mean, alpha=0.0,
            sigma_sq_alpha=ig_tight_mean,
            sigma_sq_phi=0.0 if ctx.marginalized else ig_tight_mean,
        )
        nu = np.zeros(ctx.p)
        omega_sq = np.full(ctx.p, omega0)

        rng = stream(cfg.seed, _S_INIT)
        _, _, beta_spec, mu_specs = unpack_theta(theta, layout, ctx.ar_mode, nu, omega_sq)
        j0 = max(1, min(cfg.j_max, round(lam0)))
        atoms = []
        for _ in range(ctx.m):
            beta = math.sqrt(beta_spec.initial_variance) * rng.standard_normal(j0)
            mu = np.column_stack([
                np.clip(math.sqrt(spec.initial_variance) * rng.standard_normal(j0),
                        -COORD_BOUND, COORD_BOUND)
                for spec in mu_specs])
            atoms.append(LatentAtoms(mu, beta))
        phi = ctx.phi0.copy() if not ctx.marginalized else None
        return SamplerState(atoms=atoms, theta=theta, hypers=hypers, nu=nu,
                            omega_sq=omega_sq, phi=phi)

    # -- one full iteration --------------------------------------------------

    def field_matrix(self, state: SamplerState, cache: ThetaCache | None = None) -> np.ndarray:
        if cache is None:
            cache = ThetaCache.build(state.theta, self.ctx, state.nu, state.omega_sq)
        cols = self.pool.map_indices(
            range(self.ctx.m),
            lambda k: field_values(cache.mapped, self.ctx.times[k], state.atoms[k], cache.kp))
        return np.column_stack(cols)

    def iterate(self, state: SamplerState, r: int, stats: MoveStats) -> SamplerState:
        ctx, cfg = self.ctx, self.cfg
        cache = ThetaCache.build(state.theta, ctx, state.nu, state.omega_sq)

        # transdimensional phases: odd (1-based) indices first, then even
        for parity in ("odd", "even"):
            plan = schedule_parity(ctx.m, parity, cfg.workers)
            snapshot = state.snapshot_atoms()
            hypers, phi = state.hypers, state.phi

            def work(k):
                rng = stream(cfg.seed, _S_BLOCK, r, k)
                return update_time_block(k, snapshot, cache, ctx, hypers, cfg, rng, phi)

            results = self.pool.run_phase(plan, work)
            for k in plan.indices:
                new_atoms, move, accepted = results[k]
                state.atoms[k] = new_atoms
                stats.record(move, accepted)

        # fixed-dimension block plus enhancement at the coordinator
        rng_t = stream(cfg.seed, _S_THETA, r)
        cur_lp, cache = theta_logpost(state.theta, state, ctx, self.pool, cache=None)
        state.theta, cur_lp, cache, acc, _ = tmcmc_update_theta(
            state, ctx, cfg, self.pool, rng_t, cur_lp, cache)
        stats.record("tmcmc", acc)
        state.theta, cur_lp, cache, acc, _ = mixing_enhancement(
            state, ctx, cfg, self.pool, rng_t, cur_lp, cache)
        stats.record("enhance", acc)

        # random-effect draws (explicit mode), then the scalar Gibbs block
        fmat = self.field_matrix(state, cache)
        if not ctx.marginalized:
            hypers = state.hypers

            def phi_work(k):
                rng = stream(cfg.seed, _S_PHI, r, k)
                return effects.gibbs_update_phi_column(
                    ctx.y[:, k], fmat[:, k], hypers.alpha, hypers.sigma_sq_phi,
                    hypers.sigma_sq_eps, ctx.phi0[:, k], rng)

            cols = self.pool.map_indices(range(ctx.m), phi_work)
            state.phi = np.column_stack(cols)

        reduced = self._reduced_sums(state, fmat)
        gibbs_update_zeta(state, ctx, stream(cfg.seed, _S_ZETA, r), reduced)
        return state

    def _reduced_sums(self, state: SamplerState, fmat: np.ndarray) -> dict:
        ctx = self.ctx
        phi_eff = ctx.phi_effective(state.phi)
        hyp = state.hypers

        def col_sums(k):
            resid = ctx.y[:, k] - hyp.alpha - phi_eff[:, k] - fmat[:, k]
            out = [float(resid @ resid), float(resid.sum()) + ctx.n * hyp.alpha]
            if not ctx.marginalized:
                dev = state.phi[:, k] - ctx.phi0[:, k]
                out.append(float(dev @ dev))
            return out

        parts = self.pool.map_indices(range(ctx.m), col_sums)
        reduced = {
            "j_total": sum(a.count for a in state.atoms),
            "resid_sq": reduce_sum(p[0] for p in parts),
            "resid_alpha": reduce_sum(p[1] for p in parts),
        }
        if not ctx.marginalized:
            reduced["phi_dev_sq"] = reduce_sum(p[2] for p in parts)
        return reduced

    # -- full run ------------------------------------------------------------

    def run(self) -> ChainResult:
        cfg, ctx = self.cfg, self.ctx
        state = self.initial_state()
        stats = MoveStats()
        samples: list[ChainSample] = []
        for r in range(cfg.iterations):
            state = self.iterate(state, r, stats)
            if r >= cfg.burn_in and (r - cfg.burn_in) % cfg.thin == cfg.thin - 1:
                samples.append(self._record(state, r))
        meta = {
            "p": ctx.p, "n": ctx.n, "m": ctx.m,
            "mode": "marginalized" if ctx.marginalized else "explicit",
            "ar_mode": ctx.ar_mode.value,
            "seed": cfg.seed, "iterations": cfg.iterations,
            "burn_in": cfg.burn_in, "thin": cfg.thin, "j_max": cfg.j_max,
            "workers": cfg.workers,
        }
        return ChainResult(samples=samples, stats=stats, meta=meta)

    def _record(self, state: SamplerState, r: int) -> ChainSample:
        hyp = state.hypers
        return ChainSample(
            iteration=r,
            atoms=[a.copy() for a in state.atoms],
            theta=state.theta.copy(),
            lam=hyp.lam, sigma_sq_eps=hyp.sigma_sq_eps, alpha=hyp.alpha,
            sigma_sq_alpha=hyp.sigma_sq_alpha, sigma_sq_phi=hyp.sigma_sq_phi,
            nu=state.nu.copy(), omega_sq=state.omega_sq.copy(),
            phi=None if state.phi is None else state.phi.copy(),
        )


def run_chain(data: SpaceTimeDataset, cfg: SamplerConfig, prior: PriorConfig,
              marginalized: bool = True, alpha_pinned: bool | None = None) -> ChainResult:
    """Run the full schedule and return the thinned post-burn-in chain."""
    sampler = Sampler(data, cfg, prior, marginalized=marginalized, alpha_pinned=alpha_pinned)
    try:
        return sampler.run()
    finally:
        sampler.close()


# ---------------------------------------------------------------------------
# posterior prediction
# ---------------------------------------------------------------------------

@dataclass
class PredictionBands:
    locations: np.ndarray          # (q, p)
    times: np.ndarray              # (mt,)
    quantiles: dict[float, np.ndarray]  # each (q, mt), original scale
    draws: np.ndarray | None = None     # (S, q, mt), original scale


def _grid_index(t: float, times: np.ndarray) -> int:
    hits = np.flatnonzero(times == t)
    if hits.size == 0:
        hits = np.flatnonzero(np.isclose(times, t, rtol=0.0, atol=1e-12))
    if hits.size == 0:
        raise UnsupportedPredictionError(f"time {t} is not on the training grid")
    return int(hits[0])


def posterior_predict(samples: list[ChainSample], new_locations: np.ndarray,
                      new_times: np.ndarray, data: SpaceTimeDataset,
                      marginalized: bool = True, seed: int = 0,
                      probs: tuple[float, ...] = (1 / 16, 0.5, 15 / 16),
                      keep_draws: bool = False) -> PredictionBands:
    """Per-sample predictive draws and pointwise quantile bands.

    Predictions run in the (standardized) model scale and are transformed
    back to the original units when the dataset carries statistics.
    """
    if not samples:
        raise InvalidArgumentError("empty chain")
    new_locations = np.atleast_2d(np.asarray(new_locations, dtype=float))
    new_times = np.atleast_1d(np.asarray(new_times, dtype=float))
    ctx = build_context(data, PriorConfig(), marginalized=marginalized)
    layout = ctx.layout
    time_idx = [_grid_index(t, data.times) for t in new_times]
    q, mt = new_locations.shape[0], new_times.size

    phi0_new = np.empty((q, mt))
    for a in range(q):
        for b, t in enumerate(new_times):
            phi0_new[a, b] = effects.phi0_predict(
                data.locations, data.times, data.y, new_locations[a], float(t))

    rng = stream(seed, _S_PREDICT)
    draws = np.empty((len(samples), q, mt))
    for s_i, smp in enumerate(samples):
        kp, mp, _, _ = unpack_theta(smp.theta, layout, ctx.ar_mode, smp.nu, smp.omega_sq)
        fit = monotone_map_fit(list(ctx.knots), mp)
        mapped_new = np.empty((q, ctx.p))
        for ell in range(ctx.p):
            mapped_new[:, ell] = [monotone_map_extend(s, ell, fit, mp) for s in new_locations[:, ell]]
        for b, k in enumerate(time_idx):
            f = field_values(mapped_new, data.times[k], smp.atoms[k], kp)
            mean = smp.alpha + phi0_new[:, b] + f
            if marginalized:
                noise_sd = math.sqrt(smp.sigma_sq_eps + smp.sigma_sq_phi)
                draws[s_i, :, b] = mean + noise_sd * rng.standard_normal(q)
            else:
                phi_draw = math.sqrt(smp.sigma_sq_phi) * rng.standard_normal(q)
                draws[s_i, :, b] = mean + phi_draw + math.sqrt(smp.sigma_sq_eps) * rng.standard_normal(q)

    if data.standardized:
        draws = draws * data.sd + data.mean
    bands = {float(pr): np.quantile(draws, pr, axis=0) for pr in probs}
    return PredictionBands(locations=new_locations, times=new_times, quantiles=bands,
                           draws=draws if keep_draws else None)
