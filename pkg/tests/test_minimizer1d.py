import math

import numpy as np
import pytest

from cahnlayer.errors import AdmissibilityError, DomainError
from cahnlayer.minimizer1d import (DiscreteFunctional, WeightFn, calibrate_tau0, check_hitting_bounds,
                                   check_monotonicity, energy_report, g1_limit_minimizer, graded_mesh,
                                   minimize_G)
from cahnlayer.profile import recovery_profile


@pytest.fixture(scope="module")
def result(spec):
    return minimize_G(spec, WeightFn.linear(1.0), 2.0**-7, -1.0, 1.0, grid_size=64)


def _functional(spec):
    t = np.sort(np.concatenate([[0.0, 1.0], np.random.default_rng(3).uniform(0, 1, 18)]))
    return DiscreteFunctional(spec, lambda x: 1.0 + 0.5 * x, 0.1, t), t


def test_gradient_matches_finite_differences(spec):
    F, t = _functional(spec)
    v = np.tanh(8 * (t - 0.4))
    g = F.gradient(v)
    h = 1e-6
    fd = np.array([(F.energy(v + h * e) - F.energy(v - h * e)) / (2 * h) for e in np.eye(t.size)])
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-9)


def test_hessian_matches_finite_differences(spec):
    F, t = _functional(spec)
    v = np.tanh(8 * (t - 0.4))
    diag, off = F.hessian(v)
    H = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    h = 1e-6
    fd = np.column_stack([(F.gradient(v + h * e) - F.gradient(v - h * e)) / (2 * h) for e in np.eye(t.size)])
    assert np.allclose(H, fd, rtol=1e-6, atol=1e-8)


def test_mesh_rejects_bad_nodes(spec):
    with pytest.raises(DomainError):
        DiscreteFunctional(spec, lambda x: 1.0 + 0 * x, 0.1, [0.0, 0.5, 0.5, 1.0])


def test_graded_mesh_nests():
    eps = 2.0**-8
    t = graded_mesh(eps, 1.0, 10 * eps, nodes_per_eps=32)
    assert t[0] == 0.0 and t[-1] == 1.0
    assert np.all(np.diff(t) > 0)
    assert np.diff(t)[0] == pytest.approx(eps / 32)
    assert t.size % 2 == 1
    assert np.array_equal(t[::2][[0, -1]], [0.0, 1.0])


def test_weight_must_be_positive():
    with pytest.raises(DomainError):
        WeightFn.linear(-2.0)
    w = WeightFn.linear(0.5, T=2.0)
    assert w.strictly_increasing and not w.strictly_decreasing
    assert w.holder_norm() == pytest.approx(0.0)


def test_minimiser_converges(result, spec):
    assert result.converged
    assert result.interior
    assert result.el_residual_max < 1e-8
    assert result.profile.is_monotone()
    assert result.property_flags["energy_below_recovery"]
    assert result.energies.G1 <= result.recovery_G1


def test_energy_split_is_affine(result):
    e = result.energies
    assert e.G2_log_scale * e.scale + e.subtraction == pytest.approx(e.G1, rel=1e-13)
    assert e.A + e.B + e.C + e.D == pytest.approx(e.G2, rel=1e-10, abs=1e-12)


def test_refinement_lowers_energy(result):
    # the coarse mesh is a nested subspace
    assert result.G1_coarse is not None
    assert result.G1_coarse >= result.energies.G1 * (1 - 1e-10)
    assert abs(result.G1_extrapolated - result.energies.G1) < 1e-4 * result.energies.G1


def test_minimiser_monotonicity_windows(result, spec):
    eps = result.energies.epsilon
    tau0 = calibrate_tau0(result.profile, spec, eps)
    assert check_monotonicity(result.profile, spec, eps, tau0).ok
    rep = check_hitting_bounds(result.profile, spec, eps, 0.1, tau0=tau0)
    assert rep.T_ratio > 0 and rep.slope_bound > 0


def test_report_rejects_mismatched_data(spec):
    prof = recovery_profile(spec, 2.0**-6, -1.0, 1.0, 1.0)
    with pytest.raises(AdmissibilityError):
        energy_report(spec, WeightFn.linear(1.0, T=2.0), 2.0**-6, prof)


def test_first_order_limit_prefers_constant_on_ties(spec, table):
    res = g1_limit_minimizer(spec, WeightFn.linear(1.0), -1.0, 1.0, table)
    assert res.minimizer == "b"
    assert res.value == pytest.approx(8.0 / 3.0)
    assert res.candidates["jump_ab"] == pytest.approx(8.0 / 3.0)


def test_first_order_limit_cases(spec, table):
    dec = WeightFn(lambda t: 2.0 - np.asarray(t), lambda t: -np.ones_like(np.asarray(t, float)))
    res = g1_limit_minimizer(spec, dec, -1.0, -1.0, table)
    assert res.minimizer == "a" and res.value == 0.0
    # a jump ending at t = T ties with the constant a, which wins
    assert g1_limit_minimizer(spec, dec, -1.0, 1.0, table).minimizer == "a"
    dip = WeightFn(lambda t: 1.0 + (np.asarray(t) - 0.5) ** 2, lambda t: 2.0 * (np.asarray(t) - 0.5))
    res = g1_limit_minimizer(spec, dip, -1.0, 1.0, table)
    assert res.minimizer == "jump_ab"
    assert res.t0 == pytest.approx(0.5)
    assert res.value == pytest.approx(8.0 / 3.0)
