import numpy as np
import pytest

from pathid import entmetrics as em
from pathid import expdsl
from pathid import tomography as tomo
from pathid.noisemc import CountRecord

from conftest import fig1c_text

PHI = np.outer(em.PHI_PLUS, em.PHI_PLUS.conj())


def _trace_distance(a, b):
    return 0.5 * np.abs(np.linalg.eigvalsh(np.asarray(a) - np.asarray(b))).sum()


def test_measure_layout():
    records = tomo.tomo_measure(PHI, tomo.TomoSettings(1000, 0, seed=2))
    assert [r.setting for r in records] == ["HVxHV", "HVxDA", "HVxRL", "DAxHV", "DAxDA",
                                            "DAxRL", "RLxHV", "RLxDA", "RLxRL"]
    hv = records[0].counts
    assert hv["HV"] == 0 and hv["VH"] == 0
    assert records[4].counts["DA"] == 0
    assert [r.stream for r in records] == list(range(9))


def test_setting_probabilities():
    p = tomo.setting_probabilities(PHI, ("DA", "DA"))
    assert p == pytest.approx({"DD": 0.5, "DA": 0.0, "AD": 0.0, "AA": 0.5}, abs=1e-15)


def test_mle_exact_phi_plus():
    fit = tomo.mle_fit(tomo.expected_records(PHI, 1e5))
    assert em.fidelity_phi_plus(fit.rho) >= 1 - 1e-6
    assert all(b >= a for a, b in zip(fit.history, fit.history[1:]))


def test_mle_maximally_mixed():
    fit = tomo.mle_fit(tomo.expected_records(np.eye(4) / 4, 1e4))
    assert np.abs(fit.rho - np.eye(4) / 4).max() <= 1e-6


def test_mle_dephased_state():
    rho = em.dephased_phi_plus(0.74)
    fit = tomo.mle_fit(tomo.tomo_measure(rho, tomo.TomoSettings(1e5, 0, seed=3)))
    assert em.fidelity_phi_plus(fit.rho) == pytest.approx(0.87, abs=0.01)


def test_mle_beats_truth_on_its_own_data():
    rng = np.random.default_rng(0)
    for _ in range(5):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        truth = g @ g.conj().T
        truth /= np.trace(truth).real
        records = tomo.expected_records(truth, 1e4)
        fit = tomo.mle_fit(records)
        assert fit.log_likelihood >= tomo.log_likelihood(records, truth) - 1e-8
        assert np.all(np.linalg.eigvalsh(fit.rho) >= -1e-12)
        assert np.trace(fit.rho).real == pytest.approx(1.0, abs=1e-12)


def test_error_shrinks_with_shots():
    rho = em.dephased_phi_plus(0.74)
    medians = []
    for shots in (1e2, 1e3, 1e4, 1e5):
        d = [_trace_distance(tomo.mle_fit(tomo.tomo_measure(rho, tomo.TomoSettings(shots, 0, seed=s))).rho, rho)
             for s in range(20)]
        medians.append(np.median(d))
    assert all(a > b for a, b in zip(medians, medians[1:]))


def test_linear_inversion_exact():
    rho = em.dephased_phi_plus(0.5)
    est = tomo.linear_inversion(tomo.expected_records(rho, 1.0))
    assert np.abs(est - np.asarray(rho)).max() <= 1e-12


def test_convergence_error_carries_best():
    with pytest.raises(tomo.ConvergenceError) as err:
        tomo.mle_fit(tomo.expected_records(PHI, 1e5), max_iter=3)
    assert err.value.best.iterations == 3
    assert not err.value.best.converged


def test_incomplete_records_rejected():
    records = tomo.expected_records(PHI, 10)[:8]
    with pytest.raises(ValueError):
        tomo.mle_fit(records)
    with pytest.raises(ValueError):
        tomo.mle_fit(records + [CountRecord("HVxXY", {})])


def test_mc_errorbars_threefold():
    rho = expdsl.parse(fig1c_text(gamma=0.27)).postselected()
    res = tomo.mc_errorbars(rho.entries, tomo.TomoSettings(1e5, 12, seed=1))
    assert 0 < res.concurrence.sigma < 0.01
    assert res.concurrence.value == pytest.approx(em.concurrence(rho), abs=4 * res.concurrence.sigma)
    assert res.fidelity.value == pytest.approx(0.614, abs=0.01)
    assert res.to_dict()["point_estimate"]["fidelity"] == res.point["fidelity"]


def test_identical_trial_seeds_give_zero_spread():
    settings = tomo.TomoSettings(1e4, 4, seed=9)
    res = tomo.mc_errorbars(PHI, settings, trial_seeds=[5, 5, 5, 5])
    assert res.fidelity.sigma == 0


def test_no_mc_gives_point_estimate_only():
    res = tomo.mc_errorbars(PHI, tomo.TomoSettings(1e4, 0, seed=9))
    assert res.fidelity.sigma is None
    assert res.trials == []


def test_parallel_matches_serial():
    settings = tomo.TomoSettings(1e4, 6, seed=21)
    serial = tomo.mc_errorbars(em.dephased_phi_plus(0.74), settings, workers=1)
    parallel = tomo.mc_errorbars(em.dephased_phi_plus(0.74), settings, workers=2)
    assert serial.trials == parallel.trials
    assert serial.fidelity == parallel.fidelity
