import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prepctl import model
from prepctl.errors import (
    DegeneratePopulationError,
    InvalidConfigurationError,
    NoEndemicEquilibriumError,
)
from prepctl.model import ModelParams
from prepctl.presets import preset

from conftest import ngm_r0, random_params

# Frozen from the next-generation-matrix oracle in conftest.ngm_r0.
R0_SICAE_BASELINE = 0.8810136138395829
R0_REDUCED_BASELINE_THETA0 = 0.8309330310732812


def test_params_reject_bad_values(cv015):
    with pytest.raises(InvalidConfigurationError):
        cv015.replace(mu=0.0)
    with pytest.raises(InvalidConfigurationError):
        cv015.replace(beta=-0.1)
    with pytest.raises(InvalidConfigurationError):
        cv015.replace(eta_C=1.5)
    with pytest.raises(InvalidConfigurationError):
        cv015.replace(eta_A=0.5)
    with pytest.raises(InvalidConfigurationError):
        cv015.replace(phi=math.nan)


def test_params_dict_round_trip(cv015):
    assert ModelParams.from_dict(cv015.to_dict()) == cv015
    with pytest.raises(InvalidConfigurationError):
        ModelParams.from_dict({**cv015.to_dict(), "gamma": 1.0})


def test_r0_reported_values(cv015, cv040):
    assert model.r0(cv015) == pytest.approx(4.0983, abs=1e-3)
    assert model.r0(cv040) == pytest.approx(4.5304, abs=1e-3)


def test_r0_matches_next_generation_oracle(rng):
    for _ in range(50):
        p = random_params(rng)
        assert model.r0(p) == pytest.approx(ngm_r0(p), rel=1e-8)


def test_r0_without_progression_or_treatment(cv015):
    p = cv015.replace(rho=0.0, phi=0.0)
    a = model.aux_rates(p)
    assert a.calN == pytest.approx(p.beta * a.xi1 * a.xi2)
    assert a.calD == pytest.approx(p.mu * a.xi1 * a.xi2)
    assert model.r0(p) == pytest.approx(p.beta / p.mu)


def test_r0_zero_beta(cv015):
    assert model.r0(cv015.replace(beta=0.0)) == 0.0


def test_r0_sicae_frozen_and_oracle():
    p = preset("sicae-baseline").params
    s_frac = (p.theta + p.mu) / (p.theta + p.psi + p.mu)
    assert model.r0_sicae(p) == pytest.approx(R0_SICAE_BASELINE, rel=1e-12)
    assert model.r0_sicae(p) == pytest.approx(ngm_r0(p, s_frac), rel=1e-10)
    assert model.r0_sicae(p.replace(psi=0.0)) == pytest.approx(model.r0(p))


def test_r0_reduced_frozen_and_limits():
    p = preset("sicae-baseline").params.replace(theta=0.0)
    assert model.r0_reduced(p) == pytest.approx(R0_REDUCED_BASELINE_THETA0, rel=1e-12)
    assert model.r0_reduced(p.replace(psi=0.0)) == pytest.approx(model.r0(p))
    values = [model.r0_reduced(p.replace(psi=s)) for s in (0.0, 0.01, 0.1, 1.0, 10.0, 1e3)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-3


def test_force_of_infection_examples(cv015):
    p = cv015.replace(beta=0.5)
    assert model.force_of_infection(np.array([900.0, 100, 0, 0]), p) == pytest.approx(0.05)
    x = np.array([800.0, 100, 50, 50])
    direct = 0.752 * (100 + 0.015 * 50 + 1.3 * 50) / 1000
    assert model.force_of_infection(x, cv015) == pytest.approx(direct, rel=1e-14)
    assert model.force_of_infection(np.array([1.0, 0, 0, 0]), cv015) == 0.0


def test_force_of_infection_zero_population(cv015):
    with pytest.raises(DegeneratePopulationError):
        model.force_of_infection(np.zeros(4), cv015)


def test_dfe_values(cv015):
    eq = model.dfe_sica(cv015)
    assert eq.state[0] == pytest.approx(13045 * 69.54)
    assert list(eq.state[1:]) == [0, 0, 0]
    assert np.allclose(model.rhs_sica(eq.state, cv015), 0.0)
    with pytest.raises(ValueError):
        eq.state[0] = 1.0


def test_dfe_sicae(cv015):
    p = cv015.replace(psi=0.1, theta=0.001)
    eq = model.dfe_sicae(p)
    assert eq.state[0] + eq.state[4] == pytest.approx(p.Lambda / p.mu)
    assert model.equilibrium_residual(eq, model.rhs_sicae, p) <= 1e-10 * p.Lambda
    assert np.allclose(model.dfe_sicae(cv015).state, [p.Lambda / p.mu, 0, 0, 0, 0])


def test_endemic_sica_cape_verde(cv015):
    eq = model.endemic_sica(cv015)
    assert np.all(eq.state > 0)
    assert model.equilibrium_residual(eq, model.rhs_sica, cv015) <= 1e-8 * cv015.Lambda


def test_endemic_force_of_infection_d0(cv015):
    p = cv015.replace(d=0.0)
    eq = model.endemic_sica(p)
    lam = model.force_of_infection(eq.state, p)
    assert lam == pytest.approx(p.mu * (model.r0(p) - 1.0), rel=1e-10)


def test_endemic_requires_r0_above_one(cv015):
    with pytest.raises(NoEndemicEquilibriumError):
        model.endemic_sica(cv015.replace(beta=0.1))


def test_endemic_threshold_matches_r0(cv015):
    lo, hi = 0.01, 1.0

    def exists(beta):
        try:
            model.endemic_sica(cv015.replace(beta=beta))
            return True
        except NoEndemicEquilibriumError:
            return False

    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if exists(mid) else (mid, hi)
    beta_star = cv015.beta / model.r0(cv015)
    assert abs(0.5 * (lo + hi) - beta_star) < 1e-9


def test_endemic_sicae_identities(cv015):
    p = cv015.replace(psi=0.005, theta=0.001)
    eq = model.endemic_sicae(p)
    S, I, C, A, E = eq.state
    assert E / S == pytest.approx(p.psi / (p.theta + p.mu))
    assert model.equilibrium_residual(eq, model.rhs_sicae, p) <= 1e-8 * p.Lambda
    plain = model.endemic_sica(cv015)
    reduced = model.endemic_sicae(cv015)
    assert np.allclose(reduced.state[:4], plain.state, rtol=1e-12)
    assert reduced.state[4] == 0.0


def test_endemic_reduced_identities(cv015):
    p = cv015.replace(d=0.0, psi=0.01)
    eq = model.endemic_reduced(p)
    S, I, C, A, E = eq.state
    a = model.aux_rates(p)
    assert E / S == pytest.approx(p.psi / p.mu)
    assert C / I == pytest.approx(p.phi / a.xi2)
    assert A / I == pytest.approx(p.rho / a.xi1_d0)
    assert model.equilibrium_residual(eq, model.rhs_sicae_mass_action, p) <= 1e-8 * p.Lambda


def test_endemic_reduced_psi0_solves_sica_mass_action(cv015):
    p = cv015.replace(d=0.0)
    eq = model.endemic_reduced(p)
    assert np.linalg.norm(model.rhs_sica_mass_action(eq.state[:4], p)) <= 1e-8 * p.Lambda


def test_mass_action_requirements(cv015):
    with pytest.raises(InvalidConfigurationError):
        model.rhs_sica_mass_action(np.ones(4), cv015)
    with pytest.raises(InvalidConfigurationError):
        model.rhs_sicae_mass_action(np.ones(5), cv015.replace(d=0.0, theta=0.1))


def test_mass_action_coincides_at_carrying_population(cv015, rng):
    p = cv015.replace(d=0.0)
    x = rng.dirichlet(np.ones(4)) * p.Lambda / p.mu
    assert np.allclose(model.rhs_sica_mass_action(x, p), model.rhs_sica(x, p), rtol=1e-12)


def test_reduced_disease_free_steady_state(cv015):
    p = cv015.replace(d=0.0, psi=0.05)
    S = p.Lambda / (p.mu + p.psi)
    x = np.array([S, 0, 0, 0, p.psi * p.Lambda / (p.mu * (p.mu + p.psi))])
    assert np.linalg.norm(model.rhs_sicae_mass_action(x, p)) <= 1e-10 * p.Lambda


def test_rhs_batched_matches_columns(cv015, rng):
    X = rng.uniform(1, 1e5, size=(4, 7))
    batch = model.rhs_sica(X, cv015)
    for j in range(7):
        assert np.allclose(batch[:, j], model.rhs_sica(X[:, j], cv015))


positive = st.floats(min_value=1e-3, max_value=1e6, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.tuples(positive, positive, positive, positive, positive), st.integers(0, 2**32 - 1))
def test_conservation_identities(x, seed):
    p = random_params(np.random.default_rng(seed), psi=0.07, theta=0.02)
    x = np.array(x)
    n = x[:4].sum()
    total = model.rhs_sica(x[:4], p).sum()
    assert total == pytest.approx(p.Lambda - p.mu * n - p.d * x[3], rel=1e-12, abs=1e-9 * p.Lambda)
    total_e = model.rhs_sicae(x, p).sum()
    assert total_e == pytest.approx(p.Lambda - p.mu * x.sum() - p.d * x[3],
                                    rel=1e-12, abs=1e-9 * p.Lambda)
    q = p.replace(d=0.0, theta=0.0)
    assert model.rhs_sicae_mass_action(x, q).sum() == pytest.approx(
        q.Lambda - q.mu * x.sum(), rel=1e-12, abs=1e-9 * q.Lambda)


@settings(max_examples=100, deadline=None)
@given(st.tuples(positive, positive, positive, positive), st.integers(0, 2**32 - 1))
def test_sicae_reduces_to_sica(x, seed):
    p = random_params(np.random.default_rng(seed))
    x5 = np.array(list(x) + [0.0])
    assert np.allclose(model.rhs_sicae(x5, p)[:4], model.rhs_sica(np.array(x), p),
                       rtol=1e-12, atol=1e-12 * p.Lambda)
