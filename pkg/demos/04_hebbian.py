# %% [markdown]
# # Hebbian training with a synaptic-correlation penalty
#
# Each layer is trained online with dW = eta (post pre^T - grad Phi), where
# Phi penalises column pair sums away from sqrt(N) r, and rows are then
# rescaled back to norm g.  Dimension is measured on a held-out batch
# before and after training.  One realization takes a few seconds.

# %%
from corrsyn import RandomSource
from corrsyn.hebbian import HebbianConfig, run_hebbian

cfg = HebbianConfig(N=100, depth=4, realizations=2)
res = run_hebbian(cfg, RandomSource(0))
print("input D~:", res.input_summaries[0].D_tilde)
print("init    D~ per layer:", res.mean("D_tilde", "baseline").round(4))
print("trained D~ per layer:", res.mean("D_tilde").round(4))
print("trained N Sigma     :", res.mean("N_sigma").round(4))
