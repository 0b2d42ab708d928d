"""Entanglement figures of merit for a two-qubit polarization state."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .postselect import TwoQubitDensityMatrix

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
SIGMA_Y = np.array([[0, -1j], [1j, 0]])
YY = np.kron(SIGMA_Y, SIGMA_Y)

# analyzer basis vectors: (+ outcome, - outcome)
_BASES = {
    "HV": (np.array([1, 0], complex), np.array([0, 1], complex)),
    "DA": (np.array([1, 1], complex) / np.sqrt(2), np.array([1, -1], complex) / np.sqrt(2)),
    "RL": (np.array([1, 1j], complex) / np.sqrt(2), np.array([1, -1j], complex) / np.sqrt(2)),
}


class NumericalError(ArithmeticError):
    pass


class AnalyzerSetting(NamedTuple):
    theta_a: float
    theta_b: float

    def __str__(self) -> str:
        return f"({self.theta_a:g},{self.theta_b:g})"


CHSH_SETTINGS = (
    AnalyzerSetting(0.0, 22.5),
    AnalyzerSetting(0.0, 67.5),
    AnalyzerSetting(45.0, 22.5),
    AnalyzerSetting(45.0, 67.5),
)
CHSH_SIGNS = (1, -1, 1, 1)


@dataclass(frozen=True)
class ChshReport:
    e_values: tuple[float, float, float, float]
    s_value: float
    settings: tuple[AnalyzerSetting, ...] = CHSH_SETTINGS

    def to_dict(self) -> dict:
        return {
            "settings": [list(s) for s in self.settings],
            "E": list(self.e_values),
            "S": self.s_value,
        }


def _matrix(rho) -> np.ndarray:
    return np.asarray(rho, dtype=complex)


def analyzer_vector(theta_deg: float) -> np.ndarray:
    t = np.deg2rad(theta_deg)
    return np.array([np.cos(t), np.sin(t)], dtype=complex)


def outcome_probabilities(rho, vecs_a: Sequence[np.ndarray],
                          vecs_b: Sequence[np.ndarray]) -> np.ndarray:
    """``p[i, j] = <a_i b_j| rho |a_i b_j>`` for the given analyzer vectors."""
    m = _matrix(rho)
    p = np.empty((len(vecs_a), len(vecs_b)))
    for i, a in enumerate(vecs_a):
        for j, b in enumerate(vecs_b):
            v = np.kron(a, b)
            p[i, j] = np.real(v.conj() @ m @ v)
    return p


def setting_probabilities(rho, setting: AnalyzerSetting) -> np.ndarray:
    """2x2 table over (+, -) x (+, -) for linear analyzers at the given angles."""
    a = [analyzer_vector(setting.theta_a), analyzer_vector(setting.theta_a + 90)]
    b = [analyzer_vector(setting.theta_b), analyzer_vector(setting.theta_b + 90)]
    return outcome_probabilities(rho, a, b)


def correlation(rho, setting: AnalyzerSetting) -> float:
    p = setting_probabilities(rho, setting)
    total = p.sum()
    return float((p[0, 0] - p[0, 1] - p[1, 0] + p[1, 1]) / total)


def chsh(rho, settings: Sequence[AnalyzerSetting] = CHSH_SETTINGS) -> ChshReport:
    settings = tuple(AnalyzerSetting(*s) for s in settings)
    if len(settings) != 4:
        raise ValueError("CHSH needs exactly four settings")
    e = tuple(correlation(rho, s) for s in settings)
    s_value = abs(sum(sign * v for sign, v in zip(CHSH_SIGNS, e)))
    return ChshReport(e, s_value, settings)


def chsh_settings_from_angles(a: float, a2: float, b: float, b2: float):
    """Settings (a,b), (a,b'), (a',b), (a',b') in the order the S sum expects."""
    return (AnalyzerSetting(a, b), AnalyzerSetting(a, b2),
            AnalyzerSetting(a2, b), AnalyzerSetting(a2, b2))


def fidelity_phi_plus(rho) -> float:
    return float(np.real(PHI_PLUS.conj() @ _matrix(rho) @ PHI_PLUS))


def witness_value(rho) -> float:
    """Tr(W rho) with W = I/2 - |phi+><phi+|; negative certifies entanglement."""
    return 0.5 - fidelity_phi_plus(rho)


def concurrence(rho) -> float:
    """Wootters concurrence.

    With ``rho = Psi Psi^dag`` from the eigendecomposition, the Wootters
    lambdas are the singular values of ``Psi^T (Y x Y) Psi``. This avoids
    square roots of the eigenvalues of ``rho rho~``, which turn roundoff-level
    zeros (~1e-17) into errors of ~1e-9. Eigenvalues below the solver's
    backward error are treated as exact zeros.
    """
    m = _matrix(rho)
    m = (m + m.conj().T) / 2
    try:
        w, v = np.linalg.eigh(m)
        floor = 16 * np.finfo(float).eps * max(abs(w).max(), 1e-300)
        w = np.where(w > floor, w, 0.0)
        psi = v * np.sqrt(w)
        lam = np.linalg.svd(psi.T @ YY @ psi, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue solve failed: {exc}") from exc
    lam = np.sort(lam)[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence_x_state(rho) -> float:
    """Closed form for X-shaped matrices (diagonal plus anti-diagonal only)."""
    m = _matrix(rho)
    c1 = abs(m[0, 3]) - np.sqrt(max(m[1, 1].real, 0) * max(m[2, 2].real, 0))
    c2 = abs(m[1, 2]) - np.sqrt(max(m[0, 0].real, 0) * max(m[3, 3].real, 0))
    return float(2 * max(0.0, c1, c2))


def joint_probabilities(rho, basis_a: str, basis_b: str | None = None) -> dict[str, float]:
    """Outcome table for Alice in ``basis_a`` and Bob in ``basis_b``.

    Keys are two-letter outcome labels such as ``"DA"`` (Alice D, Bob A).
    """
    basis_b = basis_a if basis_b is None else basis_b
    try:
        va, vb = _BASES[basis_a], _BASES[basis_b]
    except KeyError as exc:
        raise ValueError(f"basis must be one of {sorted(_BASES)}") from exc
    p = outcome_probabilities(rho, va, vb)
    return {
        basis_a[i] + basis_b[j]: float(p[i, j])
        for i in range(2) for j in range(2)
    }


def partial_trace(rho, keep: str) -> np.ndarray:
    m = _matrix(rho).reshape(2, 2, 2, 2)
    if keep == "A":
        return np.einsum("ijkj->ik", m)
    if keep == "B":
        return np.einsum("ijil->jl", m)
    raise ValueError("keep must be 'A' or 'B'")


def dephased_phi_plus(gamma: float, delta: float = 0.0) -> TwoQubitDensityMatrix:
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[3, 3] = 0.5
    m[3, 0] = 0.5 * gamma * np.exp(1j * delta)
    m[0, 3] = np.conj(m[3, 0])
    return TwoQubitDensityMatrix(m)


def contaminated_state(p: float, gamma: float) -> TwoQubitDensityMatrix:
    """``p`` dephased phi+ mixed with ``1 - p`` of |HV>."""
    m = p * dephased_phi_plus(gamma).entries
    m = np.array(m)
    m[1, 1] += 1 - p
    return TwoQubitDensityMatrix(m)


def correlation_sweep_csv(rho, theta_b: Iterable[float],
                          theta_a: Sequence[float] = (0.0, 45.0)) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["theta_b_deg"] + [f"E_thetaA{a:g}" for a in theta_a])
    for tb in theta_b:
        row = [correlation(rho, AnalyzerSetting(ta, tb)) for ta in theta_a]
        writer.writerow([f"{tb:.17g}"] + [f"{v:.17g}" for v in row])
    return buf.getvalue()
