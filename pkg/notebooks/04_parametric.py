# %% [markdown]
# # One network over a range of Reynolds numbers
#
# Six trig-vortex cases between s = 2800 and 5600 train a single network
# that takes Re as a third input. s = 3140 sits between training cases and
# s = 5700 lies just outside the range.

# %%
import os

import numpy as np

from ranspinn.data import make_mms_case, mms_validation_cloud
from ranspinn.network import FieldNetworkSet, NetworkConfig
from ranspinn.report import validation_errors
from ranspinn.trainer import TrainConfig, Trainer

scale = float(os.environ.get("NB_SCALE", "1"))
svals = [2800.0, 3360.0, 3920.0, 4480.0, 5040.0, 5600.0]

# %%
cases = [make_mms_case("trig-vortex", s, n_data=500, n_colloc=500, n_cloud=2500, n_boundary=20, seed=0)[1]
         for s in svals]
nets = FieldNetworkSet.init(NetworkConfig(widths=[32, 32, 32], n_freq=6, bounds=[[0.0, 1.0], [0.0, 1.0]],
                                          mode="parametric-Re", re_range=[2800.0, 5600.0], seed=0))
cfg = TrainConfig(mode="parametric-Re", pretrain_steps=int(1000 * scale), main_steps=int(4000 * scale),
                  batch_data=256, batch_colloc=256, batch_boundary=128, log_every=100, seed=0)
rep = Trainer(nets, cases, cfg).run()
for key, m in rep.validation.items():
    print(f"{key:12s} rel_err_u {m['rel_err_u']:.4f}  rel_err_v {m['rel_err_v']:.4f}")

# %%
for s in (3140.0, 5700.0, 7000.0):
    m = validation_errors(nets, mms_validation_cloud("trig-vortex", s, 3000, seed=11), s)
    print(f"s={s:6.0f}  rel_err_u {m.rel_err_u:.4f}")
