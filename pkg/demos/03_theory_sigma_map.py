# %% [markdown]
# # Order-parameter recursion and the N Sigma map
#
# The reduced theory follows (K1, K2, Q, N Sigma) layer by layer.  The
# off-diagonal part obeys an affine map whose slope does not depend on r
# and whose intercept grows with r; its fixed point sets how much
# correlation deep layers settle at.

# %%
from corrsyn import InputEnsembleSpec, RandomSource
from corrsyn.ensemble import sample_patterns
from corrsyn.theory import TheoryConfig, k_coefficients, operating_point, run_theory, sigma_map, state_from_covariance

_, lam = sample_patterns(InputEnsembleSpec.from_alpha(200, 2.0), RandomSource(0))
s0 = state_from_covariance(lam)
print(f"input: K1={s0.K1:.4f}  K2={s0.K2:.4f}  N Sigma={s0.N_sigma:.4f}  D~={s0.D_tilde:.4f}")

# %%
for r in (0.0, 0.5, 1.0, 2.0):
    cfg = TheoryConfig(N=200, g=0.9, sigma_b=0.1, r=r)
    traj = run_theory(cfg, s0, 4)
    print(f"r={r}: D~ " + " ".join(f"{s.D_tilde:.4f}" for s in traj[1:]),
          "| gamma1 " + " ".join(f"{s.gamma1:.4f}" for s in traj[1:]))

# %%
for r in (0.0, 0.5, 1.0, 2.0):
    cfg = TheoryConfig(N=200, g=0.9, sigma_b=0.1, r=r)
    kappa = k_coefficients(s0, cfg)[2]
    slope, icpt = sigma_map(s0, cfg, kappa)
    print(f"r={r}: slope {slope:.4f}  intercept {icpt:.5f}  fixed point {operating_point(s0, cfg, kappa):.5f}")
