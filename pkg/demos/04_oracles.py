# %% [markdown]
# # Independent checks on two streams
#
# Three references that share no code with the closed forms: a generic
# interior-point solver, alternating optimisation of the per-hop SNRs and
# an exhaustive grid over the exact, nonconvex objective.

# %%
import numpy as np

from relayqos import (QosVector, alternating_ab, convex_solve, decompose,
                      generate_channel, grid_search, lower_bound_linear, solve_hyperbola,
                      stream_profile)
from relayqos.linear import exact_objective, linear_constraints, total_power

eigen = decompose(generate_channel(2, 2, 1.0, seed=11, trial=11), 2)
prof = stream_profile(eigen.lam_h1, eigen.lam_h2, 1.0)

# %% [markdown]
# ## Loose targets: the exact optimum switches a stream off

# %%
qos = QosVector([0.32, 0.9])
lam = solve_hyperbola(prof.w, qos)
grid = grid_search("linear", eigen, qos, 1.0)
alt = alternating_ab(eigen, qos, 1.0)
_, lb = lower_bound_linear(prof, qos)
print("hyperbola   ", lam, total_power(lam, prof))
print("alternating ", alt.lam, alt.total_power, f"({len(alt.history)} accepted steps)")
print("grid        ", grid.minimizer, grid.value, "+/-", grid.resolution_bound)
print("lower bound ", lb)

# %% [markdown]
# ## Tight targets: everything agrees
#
# With a target sum below 8/9 the exact problem is itself convex, so the
# generic solver finds the global optimum.

# %%
qos = QosVector([0.1, 0.3])
ex = convex_solve(exact_objective(prof), linear_constraints(qos))
lam = solve_hyperbola(prof.w, qos)
print("exact convex", ex.minimizer, ex.value, "residual", ex.kkt_residual)
print("hyperbola   ", lam, total_power(lam, prof))
print("grid        ", grid_search("linear", eigen, qos, 1.0).value)
print("lower bound ", lower_bound_linear(prof, qos)[1])
print("same optimum:", np.isclose(ex.value, lower_bound_linear(prof, qos)[1], rtol=1e-6))
