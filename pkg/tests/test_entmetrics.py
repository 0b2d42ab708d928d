import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathid import entmetrics as em

from conftest import random_rho

PHI = np.outer(em.PHI_PLUS, em.PHI_PLUS.conj())
seeds = st.integers(0, 2**32 - 1)


def test_phi_plus_examples():
    assert em.fidelity_phi_plus(PHI) == pytest.approx(1.0)
    assert em.witness_value(PHI) == pytest.approx(-0.5)
    assert em.chsh(PHI).s_value == pytest.approx(2 * math.sqrt(2))
    p = em.joint_probabilities(PHI, "DA")
    assert p == pytest.approx({"DD": 0.5, "DA": 0.0, "AD": 0.0, "AA": 0.5}, abs=1e-15)
    # phi+ is correlated in R/L as R -> L
    p = em.joint_probabilities(PHI, "RL")
    assert p["RL"] == pytest.approx(0.5) and p["RR"] == pytest.approx(0.0, abs=1e-15)


def test_maximally_mixed():
    rho = np.eye(4) / 4
    assert em.concurrence(rho) == 0
    assert em.fidelity_phi_plus(rho) == pytest.approx(0.25)
    assert em.chsh(rho).s_value == pytest.approx(0.0, abs=1e-15)


def test_custom_chsh_angles():
    settings_ = em.chsh_settings_from_angles(0, 45, 22.5, 67.5)
    assert settings_ == em.CHSH_SETTINGS
    # aligned settings give no violation
    assert em.chsh(PHI, em.chsh_settings_from_angles(0, 0, 0, 0)).s_value == pytest.approx(2.0)


def test_correlation_law_for_phi_plus():
    for a, b in [(0, 0), (10, 40), (45, 22.5), (90, 0)]:
        assert em.correlation(PHI, em.AnalyzerSetting(a, b)) == pytest.approx(
            math.cos(2 * math.radians(a - b)), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4))
def test_random_state_invariants(seed, rank):
    rho = random_rho(np.random.default_rng(seed), rank)
    c = em.concurrence(rho)
    s = em.chsh(rho).s_value
    assert -1e-12 <= c <= 1 + 1e-12
    assert s <= 2 * math.sqrt(2) + 1e-9
    assert em.witness_value(rho) == pytest.approx(0.5 - em.fidelity_phi_plus(rho), abs=1e-12)
    # a witness-detected state is entangled
    if em.witness_value(rho) < -1e-9:
        assert c > 0


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_local_unitaries_preserve_concurrence(seed):
    rng = np.random.default_rng(seed)
    rho = random_rho(rng, 2)

    def haar2():
        q, r = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        return q * (np.diag(r) / abs(np.diag(r)))

    u = np.kron(haar2(), haar2())
    assert em.concurrence(u @ rho @ u.conj().T) == pytest.approx(em.concurrence(rho), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_pure_state_concurrence(seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    expected = 2 * abs(psi[0] * psi[3] - psi[1] * psi[2])
    assert em.concurrence(np.outer(psi, psi.conj())) == pytest.approx(expected, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1), st.floats(-math.pi, math.pi))
def test_dephasing_family(gamma, delta):
    rho = em.dephased_phi_plus(gamma, delta)
    assert em.concurrence(rho) == pytest.approx(gamma, abs=1e-12)
    assert em.concurrence_x_state(rho) == pytest.approx(gamma, abs=1e-12)
    if delta == 0:
        assert em.concurrence(rho) == pytest.approx(2 * em.fidelity_phi_plus(rho) - 1, abs=1e-12)
        assert em.chsh(rho).s_value == pytest.approx(math.sqrt(2) * (1 + gamma), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_complementary_outcomes_sum_to_one(seed):
    rho = random_rho(np.random.default_rng(seed))
    for a in ("HV", "DA", "RL"):
        for b in ("HV", "DA", "RL"):
            assert sum(em.joint_probabilities(rho, a, b).values()) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_marginals_match_partial_trace(seed):
    rho = random_rho(np.random.default_rng(seed))
    red_a = em.partial_trace(rho, "A")
    red_b = em.partial_trace(rho, "B")
    p = em.joint_probabilities(rho, "HV", "DA")
    assert p["HD"] + p["HA"] == pytest.approx(red_a[0, 0].real, abs=1e-12)
    d = np.array([1, 1]) / math.sqrt(2)
    assert p["HD"] + p["VD"] == pytest.approx((d @ red_b @ d).real, abs=1e-12)


def test_sweep_csv():
    text = em.correlation_sweep_csv(PHI, np.linspace(0, 180, 37))
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["theta_b_deg", "E_thetaA0", "E_thetaA45"]
    assert len(rows) == 38
    assert float(rows[1][1]) == pytest.approx(1.0)
    assert float(rows[10][1]) == pytest.approx(0.0, abs=1e-12)  # theta_b = 45 deg
    assert float(rows[19][1]) == pytest.approx(-1.0)  # theta_b = 90 deg


def test_bad_basis():
    with pytest.raises(ValueError):
        em.joint_probabilities(PHI, "XY")
