import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ranspinn import loss as L
from ranspinn.autodiff import seed_inputs
from ranspinn.data import FieldSamples
from ranspinn.physics import ResidualBundle


def _samples(n=4):
    x = np.linspace(0.1, 0.9, n)
    return FieldSamples(x, x, x, -x, 2 * x, 0.1 + x, 0.2 + x, np.full(n, "interior"))


def _pred(s):
    return {"u": s.u, "v": s.v, "p": s.p, "k": s.k, "eps": s.eps, "log_eps": np.log(s.eps)}


def test_data_loss_zero_at_truth():
    s = _samples()
    terms = L.data_loss(_pred(s), s)
    assert all(abs(float(v)) < 1e-30 for v in terms.values())


def test_data_loss_log_eps_compares_logs():
    s = _samples()
    p = _pred(s)
    p["eps"] = s.eps * np.e
    p["log_eps"] = np.log(s.eps) + 1.0
    assert float(L.data_loss(p, s)["l_data_eps"]) == pytest.approx(1.0)
    assert float(L.data_loss(p, s, log_eps=False)["l_data_eps"]) == pytest.approx(np.mean((s.eps * (np.e - 1)) ** 2))


def test_data_loss_empty_batch():
    with pytest.raises(ValueError):
        L.data_loss({}, FieldSamples.empty())


def test_bc_loss_per_tag():
    x = np.array([0.0, 0.0, 1.0, 0.5])
    y = np.array([0.2, 0.4, 0.5, 1.0])
    nan = np.nan
    b = FieldSamples(x, y, [1.0, 1.0, nan, nan], [0.0, 0.0, nan, 0.0], [nan, nan, 0.0, nan],
                     [nan] * 4, [nan] * 4, ["inlet", "inlet", "outlet", "symmetry"])
    X, Y = seed_inputs([x, y], [0, 1])
    jets = {"u": X * 0.0 + 0.5 + Y * 2.0, "v": X * 0.0, "p": X * 0.0 + 3.0}
    got = float(L.bc_loss(jets, b))
    inlet = np.mean((0.5 + 2 * y[:2] - 1.0) ** 2)
    outlet = 9.0
    sym = 0.0 + 2.0 ** 2
    assert got == pytest.approx(inlet + outlet + sym)


def test_bc_loss_unknown_tag():
    b = FieldSamples([0.0], [0.0], [0.0], [0.0], [0.0], [0.0], [0.0], ["interior"])
    X, Y = seed_inputs([b.x, b.y], [0, 1])
    with pytest.raises(ValueError):
        L.bc_loss({"u": X, "v": X, "p": X}, b)


def _bundle(c, mx, my, k, e):
    return ResidualBundle(*(np.asarray(a, dtype=float) for a in (c, mx, my, k, e)))


def test_pde_terms_and_log_loss():
    b = _bundle([1.0, 0.0], [1.0, 1.0], [0.0, 2.0], [3.0, 3.0], [1.0, 0.0])
    t = L.pde_terms(b)
    assert float(t["l_mom"]) == pytest.approx(3.0)
    assert float(t["l_cont"]) == pytest.approx(0.5)
    assert float(t["l_k"]) == pytest.approx(9.0)
    assert float(t["l_eps"]) == pytest.approx(0.5 * np.log(2.0))
    assert float(L.pde_terms(b, log_eps=False)["l_eps"]) == pytest.approx(0.5)


def test_pde_loss_weighted_total():
    b = _bundle([1.0], [1.0], [0.0], [2.0], [0.0])
    w = L.LossWeights(0.5, 2.0, 0.25, 1.0)
    _, total = L.pde_loss(b, w)
    assert float(total) == pytest.approx(0.5 * 1 + 2.0 * 1 + 0.25 * 4)


def test_normalize_lambdas_example():
    w = L.normalize_lambdas([10.0, 1.0, 0.1, 1.0])
    assert w.lambda_k == 1.0
    assert w.lambda_mom == pytest.approx((1 / (10 + 1e-8)) / (1 / (0.1 + 1e-8)))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1e-6, 1e6), min_size=4, max_size=4))
def test_normalized_weighted_terms_balanced(means):
    w = L.normalize_lambdas(means)
    weighted = [w.for_term(t) * m for t, m in zip(L.PDE_TERMS, means)]
    assert max(weighted) / min(weighted) <= 2.0
    assert max(w.as_dict().values()) == 1.0


def test_normalize_lambdas_zero_mean():
    w = L.normalize_lambdas([0.0, 1.0, 1.0, 1.0])
    assert w.lambda_mom == 1.0 and w.lambda_cont == pytest.approx(1e-8, rel=1e-6)


def test_normalize_lambdas_rejects_bad_input():
    with pytest.raises(ValueError):
        L.normalize_lambdas([1.0, np.nan, 1.0, 1.0])
    with pytest.raises(ValueError):
        L.normalize_lambdas([1.0, 1.0])
    with pytest.raises(ValueError):
        L.LossWeights(lambda_mom=0.0)


def test_breakdown_sum_and_csv(tmp_path):
    br = L.LossBreakdown(l_data_u=1.0, l_bc=0.5, l_mom=2.0, weights=L.LossWeights(lambda_mom=0.25))
    assert br.weighted_sum() == pytest.approx(2.0)
    rows = [{"step": 0, "phase": "main", "lr": 1e-3, **br.row()}]
    path = L.write_curve_csv(tmp_path / "c.csv", rows)
    back = L.read_curve_csv(path)
    assert back[0]["l_mom"] == 2.0 and back[0]["lambda_mom"] == 0.25 and back[0]["step"] == 0
