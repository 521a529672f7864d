# %% [markdown]
# # One channel, two receivers
#
# Draw a 3x3 two-hop channel, ask for MSE 0.1 on every stream and compare
# the power each receiver needs.  The closed-form allocations are checked
# against the tangent lower bounds and, finally, against the actual
# transceiver matrices.

# %%
import numpy as np

from relayqos import (QosVector, build_dfe, build_linear, decompose, generate_channel,
                      rotation_equal_qos, solve_dfe, solve_linear, total_power_matrices)

ch = generate_channel(3, 3, rho=1.0, seed=7)
eigen = decompose(ch, 3)
qos = QosVector([0.1, 0.1, 0.1])
print("hop 1 gains", eigen.lam_h1)
print("hop 2 gains", eigen.lam_h2)

# %% [markdown]
# ## Allocations and their bounds

# %%
lin = solve_linear(eigen, qos, 1.0)
dfe = solve_dfe(eigen, qos, 1.0)
for rep in (lin, dfe):
    print(f"{rep.mode:6s} lambda* = {np.round(rep.allocation.lam, 4)}  "
          f"power {rep.approx_power:8.3f}  bound {rep.lower_bound:8.3f}  "
          f"gap {100 * rep.gap:.2f}%")

# %% [markdown]
# ## Matrices
#
# With the DFT rotation every stream of the linear design sees exactly the
# target MSE; the trace formula for the power agrees with the allocation.

# %%
tx = build_linear(lin.allocation, eigen, 1.0, rotation_equal_qos(3), channel=ch)
print("diag(E), linear:", np.round(np.diag(tx.mse).real, 12))
print("power from traces:", total_power_matrices(tx.u, tx.f, ch.h1, 1.0))

dx = build_dfe(dfe.allocation, eigen, 1.0, channel=ch)
print("diag(E), DFE (identity rotation):", np.round(np.diag(dx.mse).real, 6))
print("product of the DFE MSEs:", np.prod(np.diag(dx.mse).real), "<=", 0.1 ** 3)
