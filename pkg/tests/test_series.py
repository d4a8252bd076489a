import numpy as np
import pytest

from env_settings import ENV_SETTINGS
from utils.dynamics import exact_steady_state
from utils.errors import AssumptionError, ConfigError
from utils.models.presets import ThreeQubitParams
from utils.perturbation import resolvent_steady_state, series_steady_state, steady_state_series
from utils.presets import build_three_qubit
from utils.verification import coupled_random_models, series_slopes


def test_series_coefficients_are_traceless_after_the_first(three_qubit):
    series = steady_state_series(three_qubit, order=3, with_map=False)
    assert len(series.coefficients) == 4
    assert series.branch == "h_bar_tau"
    np.testing.assert_allclose(np.trace(series.coefficients[0]), 1.0, atol=1e-12)
    for rho_j in series.coefficients[1:]:
        assert abs(np.trace(rho_j)) <= 1e-10
        np.testing.assert_allclose(rho_j, rho_j.conj().T, atol=1e-12)


def test_hierarchy_residuals_are_small(rng):
    model = coupled_random_models(rng, 1, dims=(2, 3, 2))[0]
    series = steady_state_series(model, order=3, with_map=False)
    assert max(series.hierarchy_residuals) <= 1e-8


def test_negative_order_is_rejected(three_qubit):
    with pytest.raises(ConfigError):
        steady_state_series(three_qubit, order=-1)


def test_series_needs_coup():
    model = build_three_qubit(ThreeQubitParams(j_alpha=0.0, j_beta=0.0))
    with pytest.raises(AssumptionError, match="Coup"):
        steady_state_series(model, order=1)


def test_resolvent_matches_null_space_inside_radius(three_qubit):
    series = steady_state_series(three_qubit, order=0)
    g = 0.05 if series.g0 is None else series.g0 / 2
    steady = resolvent_steady_state(three_qubit, g)
    assert steady.method == "resolvent"
    assert steady.residual <= ENV_SETTINGS.residual_tol
    np.testing.assert_allclose(steady.rho, exact_steady_state(three_qubit, g), atol=1e-8)


def test_truncated_series_residual_shrinks_with_g(three_qubit):
    series = steady_state_series(three_qubit, order=2, with_map=False)
    coarse = series_steady_state(series, three_qubit, 0.1).residual
    fine = series_steady_state(series, three_qubit, 0.01).residual
    assert fine < coarse / 100


@pytest.mark.slow
def test_series_error_scales_as_next_order(three_qubit):
    slopes = series_slopes(three_qubit)
    for k, slope in enumerate(slopes):
        assert slope == pytest.approx(k + 1, abs=0.2)


@pytest.mark.slow
def test_series_error_scales_as_next_order_with_h_c(rng):
    model = coupled_random_models(rng, 1, with_h_c=True)[0]
    assert steady_state_series(model, order=0, with_map=False).branch == "h_c"
    for k, slope in enumerate(series_slopes(model)):
        assert slope == pytest.approx(k + 1, abs=0.2)
