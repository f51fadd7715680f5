# %% [markdown]
# # Input ensemble and its eigenvalue spectrum
#
# Inputs are Gaussian with covariance Lambda = sigma^2/N * xi xi^T built
# from P = alpha N random patterns.  For large N the eigenvalues follow the
# Marchenko-Pastur law, and the normalized participation ratio approaches
# alpha / (alpha + 1).

# %%
import numpy as np

from corrsyn import InputEnsembleSpec, RandomSource, participation_ratio
from corrsyn.ensemble import sample_patterns
from corrsyn.stats import mp_edges, mp_normalized_dim, spectrum_report

spec = InputEnsembleSpec.from_alpha(1000, 2.0, 0.5)
xi, lam = sample_patterns(spec, RandomSource(0))
print("N, P:", spec.N, spec.P)
print("trace / N:", np.trace(lam) / spec.N, "(alpha sigma^2 = 0.5)")

# %%
rep = spectrum_report(lam, spec.alpha, spec.sigma, bins=25)
lo, hi = mp_edges(spec.alpha, spec.sigma)
print(f"support [{lo:.4f}, {hi:.4f}], observed [{rep.eigenvalues.min():.4f}, {rep.eigenvalues.max():.4f}]")
print("L1 distance to the limit density:", round(rep.distance, 4))
for c, d, t in zip(rep.centers[::3], rep.density[::3], rep.theory[::3]):
    print(f"  {c:6.3f}  {'#' * int(40 * d / rep.density.max()):40s}  theory {t:.3f}")

# %%
D, Dt = participation_ratio(lam)
print("D~ sampled:", Dt, " large-N:", mp_normalized_dim(spec.alpha))
