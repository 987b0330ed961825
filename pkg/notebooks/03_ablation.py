# %% [markdown]
# # Loss ablation: full, no log-eps, data only
#
# Same seeds, data and step budget for each variant; the score is rel. L2
# error of u on held-out points. Two data regimes are compared: the dense
# 3000-point budget and a sparse 200-point budget. With dense exact data
# the data-only fit is already very good and the PDE terms mostly compete
# for optimizer progress; with sparse data they carry the field between
# samples.

# %%
import os

import numpy as np

from ranspinn.data import make_mms_case
from ranspinn.network import FieldNetworkSet, NetworkConfig
from ranspinn.trainer import ABLATIONS, TrainConfig, Trainer

scale = float(os.environ.get("NB_SCALE", "1"))
seeds = (0, 1, 2) if scale >= 1 else (0,)


def run(ablation, seed, n_data):
    case, ds = make_mms_case("trig-vortex", 5600.0, n_data=n_data, n_colloc=3000, seed=seed)
    nets = FieldNetworkSet.init(NetworkConfig(widths=[32, 32, 32], n_freq=6, bounds=case.bounds, seed=seed))
    cfg = TrainConfig(pretrain_steps=int(1000 * scale), main_steps=int(4000 * scale), batch_data=min(256, n_data),
                      batch_colloc=256, batch_boundary=128, conv_tol=0.0, log_every=100, seed=seed,
                      ablation=ablation)
    rep = Trainer(nets, ds, cfg).run()
    return next(iter(rep.validation.values()))["rel_err_u"]


# %%
table = {}
for n_data in (3000, 200):
    for ablation in ABLATIONS:
        errs = [run(ablation, s, n_data) for s in seeds]
        table[n_data, ablation] = float(np.median(errs))
        print(f"n_data={n_data:5d}  {ablation:11s}  median rel_err_u {table[n_data, ablation]:.4f}  {errs}")
