# %% [markdown]
# # Monte Carlo reproduction of the published power table
#
# Mean total power over random 3x3 channels with rho = 1 for five equal
# targets, both receivers.  Pass a trial count on the command line; the
# published numbers used 1000.

# %%
import sys

from relayqos.sweep import emit_csv, preset, run_sweep
from relayqos.verify import TABLE1_ETAS, TABLE1_PUBLISHED, check_table1

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 200
rows = run_sweep(preset("table1", trials=trials, seed=0,
                        methods=("L-HA", "L-LB", "NL-EA", "NL-LB")))

# %%
by = {(r.method, float(r.eta_descriptor)): r for r in rows}
print("eta    " + "  ".join(f"{m:>16s}" for m in TABLE1_PUBLISHED))
for i, eta in enumerate(TABLE1_ETAS):
    cells = [f"{by[m, eta].mean_power_db:7.3f} ({TABLE1_PUBLISHED[m][i]:6.3f})"
             for m in TABLE1_PUBLISHED]
    print(f"{eta:<5} " + "  ".join(cells))
print("(dB, published value in brackets)")

# %%
print(check_table1(rows=rows).line())
emit_csv(rows, sys.stdout)
