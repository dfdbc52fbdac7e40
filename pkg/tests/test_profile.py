import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cahnlayer.errors import ConfigurationError, DomainError
from cahnlayer.profile import (heteroclinic, hitting_times, inverse_consistency, invert_psi, layer_moment,
                               ode_residual, psi_epsilon, recovery_energy, recovery_profile)

mp.mp.dps = 30


def _mp_psi(eps, alpha, r):
    f = lambda s: 1 / mp.sqrt(eps + (1 - s * s) ** 2)
    return float(eps * mp.quad(f, [alpha, (alpha + r) / 2, r]))


@pytest.mark.parametrize("eps,alpha,r", [(1e-2, -1.0, 0.0), (1e-4, -1.0, 0.9), (1e-3, -0.5, 0.999)])
def test_psi_against_mpmath(spec, eps, alpha, r):
    assert psi_epsilon(spec, eps, alpha, r) == pytest.approx(_mp_psi(eps, alpha, r), rel=1e-10)


def test_psi_rejects_reversed_interval(spec):
    with pytest.raises(DomainError):
        psi_epsilon(spec, 1e-3, 0.5, 0.0)
    with pytest.raises(DomainError):
        psi_epsilon(spec, 0.0, -1.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.95))
def test_invert_psi_round_trip(spec, frac):
    eps = 1e-3
    T_eps = psi_epsilon(spec, eps, -1.0, 1.0)
    r = invert_psi(spec, eps, -1.0, 1.0, frac * T_eps)
    assert psi_epsilon(spec, eps, -1.0, r) == pytest.approx(frac * T_eps, rel=1e-9)


@pytest.mark.parametrize("eps", [2.0**-6, 2.0**-10])
def test_recovery_profile_structure(spec, eps):
    prof = recovery_profile(spec, eps, -1.0, 1.0, 1.0)
    assert prof.is_monotone()
    assert prof.v[0] == -1.0 and prof.v[-1] == 1.0
    assert prof.T_eps == pytest.approx(psi_epsilon(spec, eps, -1.0, 1.0), rel=1e-9)
    assert ode_residual(prof, spec) < 1e-6
    assert inverse_consistency(prof, spec) < 1e-8
    assert prof.L_eps == pytest.approx(psi_epsilon(spec, eps, -1.0, 0.0), rel=1e-12)


def test_recovery_profile_needs_room(spec):
    with pytest.raises(ConfigurationError):
        recovery_profile(spec, 0.1, -1.0, 1.0, 0.3)
    with pytest.raises(DomainError):
        recovery_profile(spec, 0.1, 0.5, -0.5, 1.0)


def test_constant_profile(spec):
    prof = recovery_profile(spec, 1e-2, 1.0, 1.0, 1.0)
    assert prof.T_eps == 0.0
    assert np.all(prof.v == 1.0)


@pytest.mark.parametrize("eps", [1e-2, 1e-3])
def test_recovery_energy_against_mpmath(spec, eps):
    # with omega = 1 the energy is int (2W + delta) / sqrt(delta + W) dv over [a, b]
    prof = recovery_profile(spec, eps, -1.0, 1.0, 1.0)
    W = lambda s: (1 - s * s) ** 2
    oracle = float(mp.quad(lambda s: (2 * W(s) + eps) / mp.sqrt(eps + W(s)), [-1, 0, 1]))
    assert recovery_energy(prof, spec, lambda t: np.ones_like(t)) == pytest.approx(oracle, rel=1e-9)


def test_recovery_energy_linear_weight_exceeds_first_order(spec):
    eps = 1e-3
    prof = recovery_profile(spec, eps, -1.0, 1.0, 1.0)
    E = recovery_energy(prof, spec, lambda t: 1.0 + t)
    assert E > 8.0 / 3.0
    assert E - 8.0 / 3.0 < 20 * eps * abs(math.log(eps))


def test_heteroclinic_is_tanh(spec):
    alpha = 0.3
    het = heteroclinic(spec, alpha, 8.0, n=401)
    exact = np.tanh(het.s + math.atanh(alpha))
    assert np.max(np.abs(het.z - exact)) < 1e-10
    assert heteroclinic(spec, 1.0, 5.0).degenerate


def test_layer_moment_at_saddle(spec):
    # z = tanh s: the moment is 2 int_0^inf s sech^4 s ds
    oracle = float(mp.quad(lambda s: 2 * s * mp.sech(s) ** 4, [0, 5, mp.inf]))
    lm = layer_moment(spec, 0.0)
    assert lm.value == pytest.approx(oracle, rel=1e-9)
    assert lm.value == pytest.approx(4 * math.log(2) / 3 - 1.0 / 3.0, rel=1e-9)
    assert 0 <= lm.tail_bound < 1e-20


def test_hitting_times_interpolate(spec):
    prof = recovery_profile(spec, 1e-2, -1.0, 1.0, 1.0)
    hits = hitting_times(prof, [0.0, 2.0])
    assert 2.0 not in hits
    assert hits[0.0] == pytest.approx(prof.L_eps, rel=1e-4)


def test_profile_csv(tmp_path, spec):
    prof = recovery_profile(spec, 1e-2, -1.0, 1.0, 1.0)
    path = tmp_path / "p.csv"
    prof.to_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], prof.t)
    assert np.array_equal(data[:, 1], prof.v)
