# %% [markdown]
# # Trig-vortex training, end to end
#
# 3000 data points and 3000 collocation points from the analytic field at
# s = 5600. Pretraining fits each variable to data, then the main phase adds
# the PDE and boundary terms with lambda weights set once at entry.
# Set NB_SCALE below 1 for a quick look.

# %%
import os
from pathlib import Path

import numpy as np

from ranspinn.data import make_mms_case
from ranspinn.network import FieldNetworkSet, NetworkConfig
from ranspinn.report import error_map, export_grid, field_grid
from ranspinn.trainer import TrainConfig, Trainer

scale = float(os.environ.get("NB_SCALE", "1"))
out = Path(os.environ.get("NB_OUT", "nb_out"))
out.mkdir(exist_ok=True)

# %%
case, ds = make_mms_case("trig-vortex", 5600.0, n_data=3000, n_colloc=3000, seed=0)
nets = FieldNetworkSet.init(NetworkConfig(widths=[32, 32, 32], n_freq=6, bounds=case.bounds, seed=0))
cfg = TrainConfig(pretrain_steps=int(1000 * scale), main_steps=int(4000 * scale), batch_data=256,
                  batch_colloc=256, batch_boundary=128, log_every=100, seed=0)
tr = Trainer(nets, ds, cfg)
rep = tr.run()
print("lambdas:", rep.lambdas)
print("validation:", rep.validation)
print(f"wall clock {rep.wall_clock:.1f}s, stop: {rep.stop_reason}")

# %%
for row in rep.curve("main")[:: max(1, len(rep.curve("main")) // 8)]:
    print(f"step {row['step']:6d}  total {row['total']:.3e}  mom {row['l_mom']:.3e}  lr {row['lr']:.2e}")

# %% [markdown]
# Field and log-error grids, with a matplotlib script written next to each CSV.

# %%
export_grid(field_grid(nets, "speed", case.bounds, 128, 128), out / "vortex_speed.csv", plot_script=True)
cloud = ds.validation
em = error_map(nets, cloud, "speed", bounds=case.bounds, nx=32, ny=32)
export_grid(em, out / "vortex_error_speed.csv", plot_script=True)
print("masked error cells:", int(em.mask.sum()), "of", em.values.size)
