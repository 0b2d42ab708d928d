"""Post-selection of a multi-path ket onto a detector pattern.

The two paths carrying an unconstrained single photon (``one``) are the
retained qubits: Alice is the lower path index, Bob the higher. Everything
else about a term (heralds, bucket content, undetected paths) is its
environment; terms sharing an environment add coherently, distinct
environments are orthogonal and add as a mixture.
"""

from __future__ import annotations

import enum
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .fockcore import FockBasisState, KetExpansion, Pol

BASIS_LABELS = ("HH", "HV", "VH", "VV")


class EmptyPostSelection(RuntimeError):
    """No term of the ket is compatible with the detection pattern."""


class Kind(enum.Enum):
    ONE_ANY = "one"
    ONE = "one:"
    BUCKET = "bucket:"
    ANY = "any"


@dataclass(frozen=True)
class Constraint:
    kind: Kind
    pol: Pol | None = None

    def __post_init__(self):
        needs_pol = self.kind in (Kind.ONE, Kind.BUCKET)
        if needs_pol != (self.pol is not None):
            raise ValueError(f"constraint {self.kind.name} polarization mismatch")

    @classmethod
    def parse(cls, token: str) -> "Constraint":
        token = token.strip()
        if token == "one":
            return cls(Kind.ONE_ANY)
        if token == "any":
            return cls(Kind.ANY)
        head, sep, pol = token.partition(":")
        if sep and head in ("one", "bucket") and pol in ("H", "V"):
            return cls(Kind.ONE if head == "one" else Kind.BUCKET, Pol[pol])
        raise ValueError(f"unknown detector constraint {token!r}")

    def __str__(self) -> str:
        if self.pol is None:
            return self.kind.value
        return f"{self.kind.value}{self.pol.name}"

    @property
    def requires_photon(self) -> bool:
        return self.kind is not Kind.ANY

    def violation(self, path: int, nh: int, nv: int) -> str | None:
        """Why ``(nh, nv)`` on ``path`` fails this constraint, or None."""
        total = nh + nv
        if self.kind is Kind.ANY:
            return None
        if self.kind is Kind.ONE_ANY:
            if total == 0:
                return f"path {path} empty"
            if total > 1:
                return f"path {path} has {total} photons"
            return None
        want = nv if self.pol is Pol.V else nh
        other = nh if self.pol is Pol.V else nv
        if self.kind is Kind.ONE:
            if total == 0:
                return f"path {path} empty"
            if other:
                return f"path {path} has a {self.pol.flipped().name} photon"
            if want > 1:
                return f"path {path} has {want} photons"
            return None
        # bucket behind a polarizer: the blocked polarization is never seen
        if want == 0:
            return f"path {path} empty" if total == 0 else f"path {path} has no {self.pol.name} photon"
        return None


@dataclass(frozen=True)
class DetectionPattern:
    constraints: Mapping[int, Constraint] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "constraints", dict(sorted(self.constraints.items())))
        if len(self.retained_paths) != 2:
            raise ValueError(
                "detection pattern needs exactly two 'one' clauses (the retained qubits), "
                f"got paths {list(self.retained_paths)}"
            )

    @classmethod
    def parse(cls, clauses: Mapping[int, str]) -> "DetectionPattern":
        return cls({int(p): Constraint.parse(c) for p, c in clauses.items()})

    @property
    def retained_paths(self) -> tuple[int, ...]:
        return tuple(p for p, c in self.constraints.items() if c.kind is Kind.ONE_ANY)

    @property
    def alice(self) -> int:
        return self.retained_paths[0]

    @property
    def bob(self) -> int:
        return self.retained_paths[1]

    @property
    def min_photons(self) -> int:
        return sum(c.requires_photon for c in self.constraints.values())

    def constraint(self, path: int) -> Constraint:
        return self.constraints.get(path, Constraint(Kind.ANY))

    def with_constraint(self, path: int, c: Constraint) -> "DetectionPattern":
        return DetectionPattern({**self.constraints, path: c})

    def violations(self, basis: FockBasisState) -> list[str]:
        out = []
        for path, c in self.constraints.items():
            why = c.violation(path, *basis.on_path(path))
            if why:
                out.append(why)
        return out

    def __str__(self) -> str:
        return " ".join(f"{p}={c}" for p, c in self.constraints.items())


@dataclass(frozen=True)
class TwoQubitDensityMatrix:
    """Polarization state of (Alice, Bob) in the basis HH, HV, VH, VV."""

    entries: np.ndarray
    success_weight: float = 1.0

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @classmethod
    def from_ket(cls, vec, success_weight: float = 1.0) -> "TwoQubitDensityMatrix":
        v = np.asarray(vec, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), success_weight)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def check(self, herm_tol: float = 1e-12, psd_tol: float = 1e-10,
              trace_tol: float = 1e-12) -> None:
        m = self.entries
        if np.abs(m - m.conj().T).max() > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -psd_tol:
            raise ValueError("density matrix is not positive semidefinite")
        if abs(self.trace - 1) > trace_tol:
            raise ValueError(f"density matrix trace {self.trace} != 1")

    def dephased(self, gamma: float) -> "TwoQubitDensityMatrix":
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        m = np.array(self.entries)
        m[0, 3] *= gamma
        m[3, 0] *= gamma
        return TwoQubitDensityMatrix(m, self.success_weight)

    @property
    def relative_phase(self) -> float:
        """Phase delta of the VV branch relative to HH, in [0, 2pi)."""
        return float(np.angle(self.entries[3, 0]) % (2 * np.pi))

    def to_dict(self) -> dict:
        return {
            "basis": list(BASIS_LABELS),
            "re": self.entries.real.tolist(),
            "im": self.entries.imag.tolist(),
            "weight": float(self.success_weight),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TwoQubitDensityMatrix":
        if list(data.get("basis", BASIS_LABELS)) != list(BASIS_LABELS):
            raise ValueError("unsupported basis ordering")
        m = np.array(data["re"], dtype=float) + 1j * np.array(data["im"], dtype=float)
        return cls(m, float(data.get("weight", 1.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _qubit_index(basis: FockBasisState, alice: int, bob: int) -> int:
    a = 0 if basis.on_path(alice)[0] else 1
    b = 0 if basis.on_path(bob)[0] else 1
    return 2 * a + b


def _environment(basis: FockBasisState, alice: int, bob: int) -> FockBasisState:
    return FockBasisState(tuple((m, n) for m, n in basis.occupations
                                if m.path not in (alice, bob)))


def postselect_state(state: KetExpansion, pattern: DetectionPattern,
                     gamma: float = 1.0) -> TwoQubitDensityMatrix:
    """Conditional Alice/Bob state given that ``pattern`` fired.

    ``gamma`` scales the HH/VV coherence after post-selection to model
    residual distinguishability of the photon origins; 1 is ideal.
    """
    alice, bob = pattern.alice, pattern.bob
    branches: dict[FockBasisState, np.ndarray] = defaultdict(lambda: np.zeros(4, complex))
    for basis, amp in state.amplitudes().items():
        if pattern.violations(basis):
            continue
        branches[_environment(basis, alice, bob)][_qubit_index(basis, alice, bob)] += amp
    rho = np.zeros((4, 4), dtype=complex)
    for vec in branches.values():
        rho += np.outer(vec, vec.conj())
    weight = float(np.trace(rho).real)
    if weight <= 0.0:
        raise EmptyPostSelection(f"no term survives detection pattern {pattern}")
    out = TwoQubitDensityMatrix(rho / weight, weight)
    return out.dephased(gamma) if gamma != 1.0 else out


class TermVerdict(NamedTuple):
    basis: FockBasisState
    amplitude: complex
    order: int
    kept: bool
    reason: str


def term_report(state: KetExpansion, pattern: DetectionPattern) -> list[TermVerdict]:
    report = []
    for term in state:
        why = pattern.violations(term.basis)
        report.append(TermVerdict(term.basis, term.amplitude, term.order, not why,
                                  "; ".join(why) if why else "kept"))
    return report
