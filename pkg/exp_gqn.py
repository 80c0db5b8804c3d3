"""Scaled synthetic-data replica: fit, predict, coverage, mode agreement."""
import time

import numpy as np

from levyst.data import GqnConfig, gqn_simulate, standardize
from levyst.model import PriorConfig
from levyst.sampler import SamplerConfig, posterior_predict, run_chain

t0 = time.time()
gqn = gqn_simulate(GqnConfig(n_train=30, n_test=10, m=20, seed=7))
train, _ = standardize(gqn.train)
print(f"simulated in {time.time()-t0:.1f}s; clamped={gqn.n_clamped}; "
      f"y sd={gqn.train.y.std():.3f} max|y|={np.abs(gqn.train.y).max():.1f}")

cfg = SamplerConfig(iterations=20_000, burn_in=2_000, thin=10, j_max=50,
                    workers=4, seed=42)
t0 = time.time()
res = run_chain(train, cfg, PriorConfig(), marginalized=True)
t_marg = time.time() - t0
overall = res.stats.overall_ttmcmc_rate()
print(f"marginalized fit: {t_marg:.0f}s, samples={len(res.samples)}, "
      f"overall TTMCMC={overall:.3f}")
print("  rates:", {m: round(res.stats.rate(m), 3) for m in res.stats.proposals})
print("  J range in chain:", min(a.count for s in res.samples for a in s.atoms),
      max(a.count for s in res.samples for a in s.atoms))
print("  lam mean:", np.mean([s.lam for s in res.samples]).round(2),
      " ssq_eps mean:", np.mean([s.sigma_sq_eps for s in res.samples]).round(5))

t0 = time.time()
bands = posterior_predict(res.samples, gqn.test.locations, gqn.test.times, train,
                          marginalized=True, seed=9)
print(f"predict in {time.time()-t0:.1f}s")
lo, med, hi = bands.quantiles[1 / 16], bands.quantiles[0.5], bands.quantiles[15 / 16]
truth = gqn.test.y
cover = np.mean((truth >= lo) & (truth <= hi))
print(f"coverage of 0.875 band at held-out points: {cover:.3f}")
width = np.median(hi - lo)
print(f"median band width (orig units): {width:.3f}; truth sd {truth.std():.3f}")

t0 = time.time()
res_e = run_chain(train, cfg, PriorConfig(), marginalized=False)
t_expl = time.time() - t0
bands_e = posterior_predict(res_e.samples, gqn.test.locations, gqn.test.times, train,
                            marginalized=False, seed=9)
med_e = bands_e.quantiles[0.5]
# standardized-units difference of medians
dmed = np.mean(np.abs(med - med_e)) / train.sd
print(f"explicit fit: {t_expl:.0f}s, overall={res_e.stats.overall_ttmcmc_rate():.3f}; "
      f"mean|dmedian| (std units) = {dmed:.4f}")
cover_e = np.mean((truth >= bands_e.quantiles[1 / 16]) & (truth <= bands_e.quantiles[15 / 16]))
print(f"explicit coverage: {cover_e:.3f}")
