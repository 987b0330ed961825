import numpy as np
import pytest

from ranspinn.autodiff import seed_inputs
from ranspinn.mms import FAMILIES, MmsCase, velocity_scale
from ranspinn.physics import (RESIDUALS, FluidProps, RefScales, TurbConstants, continuity_residual,
                              denormalize, eddy_viscosity, nondimensionalize, residuals, reynolds)


def test_eddy_viscosity_values():
    mu_t, mu_eff = eddy_viscosity(np.array(0.1), np.array(0.01), mu=1e-3)
    assert mu_t == pytest.approx(0.09)
    assert mu_eff == pytest.approx(0.091)


def test_eddy_viscosity_floor():
    mu_t, _ = eddy_viscosity(np.array(0.1), np.array(0.0))
    assert np.isfinite(mu_t) and mu_t == pytest.approx(0.09 * 0.01 / 1e-10)


def test_reynolds_number():
    assert reynolds(1.0, 1.0, 1.0, 1.0 / 5600) == pytest.approx(5600)
    with pytest.raises(ValueError):
        reynolds(1.0, 1.0, 0.0, 1.0)


def test_props_and_constants_validation():
    with pytest.raises(ValueError):
        FluidProps(rho=-1.0)
    with pytest.raises(ValueError):
        TurbConstants(c_mu=0.0)
    with pytest.raises(ValueError):
        TurbConstants(eps_destruction_sign="other")
    assert FluidProps.from_reynolds(100.0).mu == pytest.approx(0.01)
    FluidProps(mu=np.array([1e-3, 2e-3]))


def test_nondimensional_roundtrip():
    sc = RefScales(length=2.0, velocity=3.0, rho=1.2)
    raw = {"x": np.array([1.0]), "u": np.array([6.0]), "p": np.array([10.8]), "k": np.array([9.0]),
           "eps": np.array([13.5]), "tag": "x"}
    nd = nondimensionalize(raw, sc)
    assert nd["x"][0] == pytest.approx(0.5) and nd["u"][0] == pytest.approx(2.0)
    assert nd["p"][0] == pytest.approx(10.8 / (1.2 * 9.0))
    back = denormalize(nd, sc)
    for k in ("x", "u", "p", "k", "eps"):
        np.testing.assert_allclose(back[k], raw[k], rtol=1e-15)


def test_uniform_flow_has_zero_residuals():
    x, y = seed_inputs([np.array([0.2, 0.7]), np.array([0.4, 0.1])], [0, 1])
    jets = {"u": x * 0.0 + 1.0, "v": x * 0.0, "p": x * 0.0, "k": x * 0.0 + 0.1, "eps": x * 0.0 + 0.09}
    b = residuals(jets, FluidProps(mu=1e-3)).numpy()
    for name in ("r_cont", "r_mom_x", "r_mom_y"):
        np.testing.assert_allclose(getattr(b, name), 0.0, atol=1e-15)
    # homogeneous decay: r_k = eps, r_eps = -(c1*0 - c2 eps) eps / k = c2 eps^2 / k (standard sign)
    np.testing.assert_allclose(b.r_k, 0.09)
    np.testing.assert_allclose(b.r_eps, 1.92 * 0.09 ** 2 / 0.1)


def test_destruction_sign_flag():
    x, y = seed_inputs([np.array([0.3]), np.array([0.3])], [0, 1])
    jets = {"u": x * 0.0, "v": x * 0.0, "p": x * 0.0, "k": x * 0.0 + 0.2, "eps": x * 0.0 + 0.1}
    std = residuals(jets, FluidProps(), TurbConstants()).numpy().r_eps
    pap = residuals(jets, FluidProps(), TurbConstants(eps_destruction_sign="paper")).numpy().r_eps
    np.testing.assert_allclose(std, -pap)


def test_continuity_of_divergence_free_field():
    x, y = seed_inputs([np.array([0.1, 0.5]), np.array([0.9, 0.3])], [0, 1])
    import ranspinn.autodiff.jet as J
    u = J.sin(x) * J.cos(y)
    v = -(J.cos(x) * J.sin(y))
    np.testing.assert_allclose(continuity_residual({"u": u, "v": v}), 0.0, atol=1e-15)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("sign", ["standard", "paper"])
@pytest.mark.parametrize("s", [1.0, 2800.0, 1e6])
def test_mms_residuals_equal_forcing(family, sign, s):
    case = MmsCase(family, s, TurbConstants(eps_destruction_sign=sign))
    rng = np.random.default_rng(0)
    (x0, x1), (y0, y1) = case.bounds
    x, y = rng.uniform(x0, x1, 200), rng.uniform(y0, y1, 200)
    b = residuals(case.jets(x, y), FluidProps.from_reynolds(s), case.consts).numpy()
    f = case.forcing(x, y)
    for name in RESIDUALS:
        np.testing.assert_allclose(getattr(b, name), f[name], atol=1e-9, rtol=1e-11)


def test_mms_jets_match_closed_form_fields():
    case = MmsCase("trig-vortex", 4200.0)
    x, y = np.array([0.1, 0.6]), np.array([0.2, 0.8])
    jets, vals = case.jets(x, y), case.fields(x, y)
    for name in ("u", "v", "p", "k", "eps"):
        np.testing.assert_allclose(jets[name].value, vals[name], rtol=1e-14, atol=1e-15)
    assert float(velocity_scale(4200.0)) == 1.0


def test_mms_parameter_range():
    with pytest.raises(ValueError):
        MmsCase("trig-vortex", 0.5)
    with pytest.raises(ValueError):
        MmsCase("nope", 10.0)


# -- frozen forcing value ------------------------------------------------------------
#
# Oracle: momentum-x residual of the trig-vortex fields evaluated with central
# differences on plain numpy closures, Richardson-extrapolated over h and h/2.
# Shares no code with the symbolic derivation or the jets.

def _vortex_fields(s):
    g = np.sqrt(s / 4200.0)
    pi = np.pi
    return {
        "u": lambda x, y: np.sin(pi * x) * np.cos(pi * y) * g,
        "v": lambda x, y: -np.cos(pi * x) * np.sin(pi * y) * g,
        "p": lambda x, y: 0.25 * (np.cos(2 * pi * x) + np.cos(2 * pi * y)),
        "k": lambda x, y: 0.1 + 0.05 * np.sin(pi * x) * np.sin(pi * y),
        "eps": lambda x, y: np.exp(0.5 + 0.3 * np.cos(pi * x)),
    }


def _fd_momx(x, y, s, h):
    f = _vortex_fields(s)
    u, v, p, k, e = f["u"], f["v"], f["p"], f["k"], f["eps"]
    ux = (u(x + h, y) - u(x - h, y)) / (2 * h)
    uy = (u(x, y + h) - u(x, y - h)) / (2 * h)
    px = (p(x + h, y) - p(x - h, y)) / (2 * h)
    lap = (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4 * u(x, y)) / h ** 2
    mu_eff = 1.0 / s + 0.09 * k(x, y) ** 2 / e(x, y)
    return u(x, y) * ux + v(x, y) * uy + px - mu_eff * lap


def _richardson(fn, h):
    return (4.0 * fn(h / 2) - fn(h)) / 3.0


F_MOMX_FROZEN = -1.41802596  # trig-vortex, (x, y) = (0.25, 0.25), s = 1


def test_frozen_momentum_forcing_against_fd_oracle():
    oracle = _richardson(lambda h: _fd_momx(0.25, 0.25, 1.0, h), 1e-3)
    assert oracle == pytest.approx(F_MOMX_FROZEN, abs=1e-8)
    f = MmsCase("trig-vortex", 1.0).forcing(np.array([0.25]), np.array([0.25]))
    assert f["r_mom_x"][0] == pytest.approx(F_MOMX_FROZEN, abs=1e-8)


@pytest.mark.parametrize("pt", [(0.1, 0.7), (0.8, 0.35)])
def test_momentum_forcing_against_fd_oracle_other_points(pt):
    s = 5600.0
    oracle = _richardson(lambda h: _fd_momx(*pt, s, h), 1e-3)
    f = MmsCase("trig-vortex", s).forcing(np.array([pt[0]]), np.array([pt[1]]))
    assert f["r_mom_x"][0] == pytest.approx(oracle, abs=1e-8)
