"""
One-shot design instead of adaptation
=====================================

The steady state of the adaptation rule can be written down directly: scale
each neuron's inhibitory in-links by a factor that puts its mean-field
potential at ``inverse_sigmoid(rho_i)``.  No simulation is needed, and the
result performs like the adapted network.
"""

import warnings

import numpy as np

import eireservoir as er

N = 200
data = er.generate("MemoryCapacity", 6000, seed=0)
split = er.SplitSpec(500, 4000, 1500)
targets = er.sample_targets("Homogeneous", N, rho_T=0.5)

base = er.build_reservoir(er.NetworkConfig(n_neurons=N, beta=-1.0, input_spread=0.016, seed=11))

adapted = base.copy()
er.adapt(adapted, targets, er.AdaptationConfig(n_steps=20_000, seed=12))

with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    designed, report = er.design_one_step(base, targets, data.mean_input)
print(f"design: {len(report.clamped)} clamped, {len(report.unreachable)} unreachable, "
      f"{len(caught)} warning(s)")

for name, res in (("static", base), ("adapted", adapted), ("designed", designed)):
    mc = er.evaluate(res, data, split).metric_value
    print(f"{name:>9}: beta {res.global_balance():+.3f}, MC {mc:.2f}")

# %%
# Per-neuron agreement between the two routes to the same target.
u = np.random.default_rng(13).uniform(size=3000)
adapted.reset()
ra = adapted.run(u)[500:].mean(axis=0)
rd = designed.run(u)[500:].mean(axis=0)
print(f"max |rate difference| adapted vs designed: {np.abs(ra - rd).max():.3f}")
