"""
Dynamical regimes of a balanced E-I reservoir
=============================================

Sweep the global balance ``beta`` of a 200-neuron reservoir and watch it go
from synchronized oscillation (strong inhibition) through an asynchronous
active state to saturation (excess excitation).  Memory capacity peaks in
the slightly inhibited range.
"""

import numpy as np

import eireservoir as er

# memory task: i.i.d. uniform input, recall targets for delays 1..70
data = er.generate("MemoryCapacity", 6000, seed=0)
split = er.SplitSpec(washout=500, train_len=4000, test_len=1500)

print(f"{'beta':>6} {'regime':>13} {'rate':>6} {'corr':>6} {'MC':>6}")
for beta in (-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0):
    cfg = er.NetworkConfig(n_neurons=200, beta=beta, input_spread=0.016, seed=1)
    res = er.build_reservoir(cfg)
    ev = er.evaluate(res, data, split)
    dyn = er.dynamics_summary(ev.states)
    print(f"{beta:6.1f} {dyn['regime']:>13} {dyn['mean_rate']:6.3f} {dyn['mean_corr']:6.3f} {ev.metric_value:6.2f}")

# %%
# The realized balance matches the requested one on average; individual
# neurons scatter around it because in-degrees are binomial.
res = er.build_reservoir(er.NetworkConfig(n_neurons=200, beta=-1.0, seed=1))
beta_i = res.local_balance()
print(f"\nglobal beta {res.global_balance():.3f}, local beta spread {beta_i.std():.3f}")
