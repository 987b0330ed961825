import dataclasses

import numpy as np
import pytest

from ranspinn import loss as L
from ranspinn.autodiff import Tape
from ranspinn.data import make_mms_case
from ranspinn.physics import RefScales
from ranspinn.trainer import (PhaseError, TrainConfig, Trainer, TrainingDiverged, build_pool, pretrain,
                              train_full, train_parametric)

from conftest import small_nets


def _cfg(**kw):
    base = dict(pretrain_steps=5, main_steps=5, batch_data=32, batch_colloc=32, batch_boundary=16,
                conv_tol=0.0)
    base.update(kw)
    return TrainConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr0=0.0)
    with pytest.raises(ValueError):
        TrainConfig(decay=0.0)
    with pytest.raises(ValueError):
        TrainConfig(main_steps=-1)
    with pytest.raises(ValueError):
        TrainConfig(ablation="pde-only")


def test_zero_pretrain_steps_is_noop(vortex):
    nets = small_nets()
    before = nets.get_flat()
    pretrain(nets, vortex[1], _cfg(pretrain_steps=0))
    np.testing.assert_array_equal(nets.get_flat(), before)


def test_pretrain_gradient_is_data_only(vortex):
    """No PDE or boundary term reaches any parameter during pretraining."""
    nets = small_nets()
    tr = Trainer(nets, vortex[1], _cfg())
    d = np.arange(32)
    br, grad = tr.loss_and_grad("pretrain", d, np.arange(32), np.arange(16))
    assert br.l_bc == 0.0 and all(getattr(br, t) == 0.0 for t in L.PDE_TERMS)
    t = Tape()
    leaves = [t.var(p) for p in nets.params()]
    pred = nets.forward(tr.pool.data_x[d], leaves)
    terms = L.data_loss(pred, tr.pool.data.subset(d))
    ref = np.concatenate([g.ravel() for g in t.gradient(sum(terms.values()), leaves)])
    np.testing.assert_array_equal(grad, ref)


def test_main_phase_gradient_includes_pde(vortex):
    nets = small_nets()
    tr = Trainer(nets, vortex[1], _cfg())
    tr.pretrain()
    tr.start_main()
    _, g_main = tr.loss_and_grad("main", np.arange(32), np.arange(32), np.arange(16))
    _, g_pre = tr.loss_and_grad("pretrain", np.arange(32))
    assert not np.array_equal(g_main, g_pre)


def test_train_full_requires_pretraining(vortex):
    with pytest.raises(PhaseError):
        train_full(small_nets(), vortex[1], _cfg())
    rep = train_full(small_nets(), vortex[1], _cfg(pretrain_steps=0))
    assert len(rep.curve("main")) == 5


def test_lambdas_frozen_during_main(vortex):
    tr = Trainer(small_nets(), vortex[1], _cfg(main_steps=8))
    rep = tr.run()
    rows = rep.curve("main")
    lam = [(r["lambda_mom"], r["lambda_cont"], r["lambda_k"], r["lambda_eps"]) for r in rows]
    assert len(set(lam)) == 1 and len(rep.lambdas) == 1
    assert max(lam[0]) == 1.0


def test_lambdas_balance_at_entry(vortex):
    tr = Trainer(small_nets(), vortex[1], _cfg())
    tr.pretrain()
    tr.start_main()
    from ranspinn.trainer import calibration_means
    means = calibration_means(tr.nets, tr.pool, tr.consts)
    weighted = [tr.weights.for_term(t) * means[t] for t in L.PDE_TERMS]
    assert max(weighted) / min(weighted) <= 2.0


def test_periodic_renormalization(vortex):
    tr = Trainer(small_nets(), vortex[1], _cfg(main_steps=9, renormalize_every=3))
    rep = tr.run()
    assert [r["step"] for r in rep.lambdas] == [0, 3, 6]


def test_log_length_and_lr(vortex):
    rep = Trainer(small_nets(), vortex[1], _cfg(pretrain_steps=3, main_steps=4)).run()
    assert len(rep.log) == 7
    assert [r["lr"] for r in rep.curve("main")] == [0.001] * 4


def test_determinism(vortex, tmp_path):
    a = Trainer(small_nets(), vortex[1], _cfg()).run()
    b = Trainer(small_nets(), vortex[1], _cfg()).run()
    pa, pb = a.write_curve(tmp_path / "a.csv"), b.write_curve(tmp_path / "b.csv")
    assert pa.read_bytes() == pb.read_bytes()


def test_checkpoint_resume_is_bitwise(vortex, tmp_path):
    cfg = _cfg(pretrain_steps=3, main_steps=6)
    ref = Trainer(small_nets(), vortex[1], cfg)
    ref.pretrain()
    ref.start_main()
    ref._run_steps(4)

    tr = Trainer(small_nets(), vortex[1], cfg)
    tr.pretrain()
    tr.start_main()
    tr._run_steps(3)
    path = tr.save(tmp_path / "ck.npz")
    back = Trainer.resume(path, vortex[1])
    back._run_steps(1)
    np.testing.assert_array_equal(back.nets.get_flat(), ref.nets.get_flat())
    np.testing.assert_array_equal(back.adam.m, ref.adam.m)
    assert back.report.log[-1] == ref.report.log[-1]


def test_nan_aborts_and_restores(vortex):
    case, ds = vortex
    bad = dataclasses.replace(ds, forcing={k: v.copy() for k, v in ds.forcing.items()})
    bad.forcing["r_k"][:] = np.nan
    nets = small_nets()
    tr = Trainer(nets, bad, _cfg())
    tr.pretrain()
    good = nets.get_flat()
    with pytest.raises(TrainingDiverged) as err:
        tr.train_full()
    np.testing.assert_array_equal(nets.get_flat(), good)
    assert err.value.report.stop_reason == "diverged"


def test_convergence_stop(vortex):
    rep = Trainer(small_nets(), vortex[1], _cfg(main_steps=50, conv_window=5, conv_tol=10.0)).run()
    assert rep.converged and len(rep.curve("main")) == 10


def test_data_only_ablation(vortex):
    rep = Trainer(small_nets(), vortex[1], _cfg(ablation="data-only")).run()
    rows = rep.curve("main")
    assert all(r["l_mom"] == 0.0 and r["l_bc"] == 0.0 for r in rows)
    assert rep.lambdas == []


def test_workers_match_single_worker(vortex):
    nets = small_nets()
    one = Trainer(nets, vortex[1], _cfg(workers=1))
    two = Trainer(nets, vortex[1], _cfg(workers=3))
    idx = (np.arange(40), np.arange(64), np.arange(20))
    b1, g1 = one.loss_and_grad("main", *idx)
    b3, g3 = two.loss_and_grad("main", *idx)
    two.close()
    np.testing.assert_allclose(g3, g1, rtol=1e-10, atol=1e-14)
    assert b3.total == pytest.approx(b1.total, rel=1e-12)


def _param_cases(svals, n=60):
    return [make_mms_case("trig-vortex", s, n_data=n, n_colloc=n, n_cloud=200, n_boundary=5, seed=0)[1]
            for s in svals]


def test_parametric_pool_mixing():
    svals = [2800.0, 3360.0, 3920.0, 4480.0, 5040.0, 5600.0]
    cases = _param_cases(svals)
    nets = small_nets(mode="parametric-Re", re_range=[2800, 5600])
    tr = Trainer(nets, cases, _cfg(mode="parametric-Re", batch_data=120))
    counts = np.zeros(6)
    for _ in range(50):
        d, _, _ = tr._draw_batch("pretrain")
        re = tr.pool.data_x[d, 2]
        counts += [np.sum(re == s) for s in svals]
    share = counts / counts.sum()
    np.testing.assert_allclose(share, 1 / 6, atol=0.02)
    np.testing.assert_allclose(tr.pool.colloc_mu[:60], 1 / 2800.0)


def test_parametric_runs_and_validates():
    cases = _param_cases([2800.0, 5600.0])
    nets = small_nets(mode="parametric-Re", re_range=[2800, 5600])
    rep = train_parametric(nets, cases, _cfg(mode="parametric-Re"))
    assert set(rep.validation) == {"re=2800.0", "re=5600.0"}


def test_parametric_errors():
    cases = _param_cases([2800.0, 5600.0])
    nets = small_nets(mode="parametric-Re", re_range=[2800, 5600])
    with pytest.raises(ValueError):
        train_parametric(nets, cases[:1], _cfg(mode="parametric-Re"))
    odd = dataclasses.replace(cases[1], scales=RefScales(length=2.0))
    with pytest.raises(ValueError, match="scales"):
        build_pool([cases[0], odd])
    with pytest.raises(ValueError):
        Trainer(small_nets(), cases, _cfg())


def test_single_case_parametric_equals_constant_input():
    ds = _param_cases([4200.0])[0]
    nets = small_nets(mode="parametric-Re", re_range=[4100, 4300])
    tr = Trainer(nets, [ds], _cfg(mode="parametric-Re"))
    assert np.all(tr.pool.data_x[:, 2] == 4200.0)
    tr.run()


def test_pretrain_regression_baseline():
    """Seeded baseline: 2000 pretraining steps bring the u data loss below 1e-3."""
    case, ds = make_mms_case("trig-vortex", 5600.0, seed=0)
    nets = small_nets(widths=(32, 32, 32), n_freq=6)
    tr = Trainer(nets, ds, TrainConfig(pretrain_steps=2000, main_steps=0, batch_data=512, log_every=100))
    tr.pretrain()
    last = tr.report.curve("pretrain")[-1]
    assert last["l_data_u"] < 1e-3


def test_nan_mid_training_keeps_last_good(vortex):
    case, ds = vortex
    ds = dataclasses.replace(ds, forcing={k: v.copy() for k, v in ds.forcing.items()})
    tr = Trainer(small_nets(), ds, _cfg(main_steps=10))
    tr.pretrain()
    tr.start_main()
    tr._run_steps(2)
    good = tr.nets.get_flat()
    tr.pool.forcing["r_mom_x"][:] = np.inf
    with pytest.raises(TrainingDiverged):
        tr._run_steps(3)
    np.testing.assert_array_equal(tr.nets.get_flat(), good)
    assert len(tr.report.curve("main")) == 2
