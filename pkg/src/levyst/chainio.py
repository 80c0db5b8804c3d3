"""Chain persistence: a self-describing columnar text format.

Line 1 holds `# key=value` metadata, line 2 the header naming every scalar
column, then one row per stored sample.  Atom blocks follow the scalars as
per-time variable-length groups, each led by its explicit count J:

    J mu[1,1] .. mu[1,p] .. mu[J,p] beta[1] .. beta[J]

Floats are written with 17 significant digits, so a write/read round trip is
bit-exact.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError
from .model import LatentAtoms, ThetaLayout
from .sampler import ChainSample, MoveStats

_FMT = "%.17g"


def _theta_names(p: int) -> list[str]:
    names = [f"x{l + 1}" for l in range(p)]
    names += [f"log_c_tilde{l + 1}" for l in range(p)]
    names += [f"log_c{l + 1}" for l in range(p)]
    names += [f"log_ksq{l + 1}" for l in range(p)]
    names += ["log_tau", "log_xi"]
    names += [f"logit_rho{l + 1}" for l in range(p)]
    names += [f"log_ssq{l + 1}" for l in range(p)]
    names += ["logit_rho_beta", "log_ssq_beta"]
    return names


def scalar_header(p: int) -> list[str]:
    names = ["iter", "lambda", "sigma_sq_eps", "alpha", "sigma_sq_alpha", "sigma_sq_phi"]
    names += [f"nu{l + 1}" for l in range(p)]
    names += [f"omega_sq{l + 1}" for l in range(p)]
    names += _theta_names(p)
    return names


def write_chain(path, samples: list[ChainSample], meta: dict) -> None:
    p, m = int(meta["p"]), int(meta["m"])
    store_phi = any(s.phi is not None for s in samples)
    meta = dict(meta)
    meta["phi_stored"] = int(store_phi)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in sorted(meta.items())) + "\n")
        fh.write(" ".join(scalar_header(p) + ["atoms..."]) + "\n")
        for s in samples:
            cells = [str(s.iteration)]
            scalars = [s.lam, s.sigma_sq_eps, s.alpha, s.sigma_sq_alpha, s.sigma_sq_phi]
            scalars += list(s.nu) + list(s.omega_sq) + list(s.theta)
            cells += [_FMT % v for v in scalars]
            for a in s.atoms:
                cells.append(str(a.count))
                cells += [_FMT % v for v in a.mu.ravel()]
                cells += [_FMT % v for v in a.beta]
            if store_phi:
                cells += [_FMT % v for v in s.phi.ravel()]
            fh.write(" ".join(cells) + "\n")


def read_chain(path) -> tuple[list[ChainSample], dict]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or not lines[0].startswith("# "):
        raise ParseError("missing chain metadata line")
    meta: dict = {}
    for token in lines[0][2:].split():
        key, _, value = token.partition("=")
        try:
            meta[key] = int(value)
        except ValueError:
            meta[key] = value
    p, m = int(meta["p"]), int(meta["m"])
    n = int(meta.get("n", 0))
    store_phi = bool(meta.get("phi_stored", 0))
    n_scalars = len(scalar_header(p))

    samples: list[ChainSample] = []
    for row_no, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        cells = line.split()
        try:
            it = int(cells[0])
            vals = [float(c) for c in cells[1:]]
        except ValueError:
            raise ParseError(f"row {row_no}: non-numeric cell") from None
        pos = n_scalars - 1
        lam, ssq_eps, alpha, ssq_alpha, ssq_phi = vals[0:5]
        nu = np.array(vals[5:5 + p])
        omega_sq = np.array(vals[5 + p:5 + 2 * p])
        theta = np.array(vals[5 + 2 * p:pos])
        atoms = []
        for _ in range(m):
            if pos >= len(vals):
                raise ParseError(f"row {row_no}: truncated atom groups")
            J = int(vals[pos])
            pos += 1
            need = J * p + J
            if pos + need > len(vals):
                raise ParseError(f"row {row_no}: truncated atom group (J={J})")
            mu = np.array(vals[pos:pos + J * p]).reshape(J, p)
            beta = np.array(vals[pos + J * p:pos + need])
            atoms.append(LatentAtoms(mu, beta))
            pos += need
        phi = None
        if store_phi:
            if pos + n * m > len(vals):
                raise ParseError(f"row {row_no}: truncated phi field")
            phi = np.array(vals[pos:pos + n * m]).reshape(n, m)
            pos += n * m
        if pos != len(vals):
            raise ParseError(f"row {row_no}: {len(vals) - pos} trailing cells")
        samples.append(ChainSample(
            iteration=it, atoms=atoms, theta=theta, lam=lam, sigma_sq_eps=ssq_eps,
            alpha=alpha, sigma_sq_alpha=ssq_alpha, sigma_sq_phi=ssq_phi,
            nu=nu, omega_sq=omega_sq, phi=phi))
    if samples and samples[0].theta.size != ThetaLayout(p=p).dim:
        raise ParseError("theta length disagrees with the declared dimension")
    return samples, meta


def write_move_stats(path, stats: MoveStats) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("move,proposals,accepts,rate\n")
        for move in stats.proposals:
            rate = stats.rate(move)
            fh.write(f"{move},{stats.proposals[move]},{stats.accepts[move]},"
                     f"{'' if rate is None else '%.6f' % rate}\n")
        overall = stats.overall_ttmcmc_rate()
        props = sum(stats.proposals[m] for m in ("birth", "death", "no_change"))
        accs = sum(stats.accepts[m] for m in ("birth", "death", "no_change"))
        fh.write(f"overall_ttmcmc,{props},{accs},{'' if overall is None else '%.6f' % overall}\n")
