"""Optical elements acting on :class:`~pathid.fockcore.KetExpansion`.

Sources are linearized two-mode squeezers ``I + eps a_s^+ a_i^+ - eps* a_s a_i``;
each application raises the perturbative order of the new terms by one.
"""

from __future__ import annotations

import cmath
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Union

import numpy as np

from .fockcore import (
    MAX_PHOTONS_PER_MODE,
    FockBasisState,
    KetExpansion,
    ModeLabel,
    Pol,
)

PERTURBATIVE_LIMIT = 0.5


class PerturbativeOverflow(RuntimeError):
    """A squeezer would push a mode past the supported photon number."""


@dataclass(frozen=True)
class SourceSpec:
    """Pair source: ``epsilon = eps * exp(1j * pump_phase)``.

    A complex ``eps`` is accepted and split into magnitude and phase.
    """

    name: str
    signal: ModeLabel
    idler: ModeLabel
    eps: float
    pump_phase: float = 0.0

    def __post_init__(self):
        if isinstance(self.eps, complex):
            object.__setattr__(self, "pump_phase", self.pump_phase + cmath.phase(self.eps))
            object.__setattr__(self, "eps", abs(self.eps))
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "pump_phase", float(self.pump_phase))
        if self.signal == self.idler:
            raise ValueError(f"source {self.name}: signal and idler must differ")
        if abs(self.eps) >= PERTURBATIVE_LIMIT:
            raise ValueError(
                f"source {self.name}: |eps| = {abs(self.eps):g} outside the "
                f"perturbative regime (< {PERTURBATIVE_LIMIT})"
            )

    @property
    def epsilon(self) -> complex:
        if self.pump_phase == 0.0:
            return complex(self.eps)
        return self.eps * cmath.exp(1j * self.pump_phase)


@dataclass(frozen=True)
class RotatorSpec:
    path: int


@dataclass(frozen=True)
class PhaseSpec:
    mode: ModeLabel
    phi: float

    @property
    def phi_reported(self) -> float:
        return self.phi % (2 * math.pi)


Element = Union[SourceSpec, RotatorSpec, PhaseSpec]


def apply_squeezer(state: KetExpansion, src: SourceSpec, max_order: int | None = None,
                   photon_cap: int = MAX_PHOTONS_PER_MODE) -> KetExpansion:
    if max_order is None:
        max_order = state.max_order
    s, i = src.signal, src.idler
    eps = complex(src.epsilon)
    acc: dict = defaultdict(complex)
    for (basis, order), amp in state.terms.items():
        if order > max_order:
            continue
        acc[(basis, order)] += amp
        if order + 1 > max_order:
            continue
        ns, ni = basis.count(s), basis.count(i)
        # pair creation
        up = basis.with_count(s, ns + 1).with_count(i, ni + 1)
        acc[(up, order + 1)] += eps * math.sqrt((ns + 1) * (ni + 1)) * amp
        # pair annihilation
        if ns and ni:
            down = basis.with_count(s, ns - 1).with_count(i, ni - 1)
            acc[(down, order + 1)] -= eps.conjugate() * math.sqrt(ns * ni) * amp
    out = KetExpansion(dict(acc), max_order, state.prune)
    for basis, _ in out.terms:
        for mode, n in basis.occupations:
            if n > photon_cap:
                raise PerturbativeOverflow(
                    f"source {src.name}: mode {mode} reaches {n} photons (cap {photon_cap})"
                )
    return out


def _rotate_basis(basis: FockBasisState, path: int) -> FockBasisState:
    return FockBasisState.from_mapping(
        [(ModeLabel(m.path, m.pol.flipped()) if m.path == path else m, n)
         for m, n in basis.occupations]
    )


def apply_rotator(state: KetExpansion, rot: RotatorSpec) -> KetExpansion:
    """Swap H and V on one path (a_H^+ <-> a_V^+)."""
    return state._rebuild({(_rotate_basis(b, rot.path), o): a
                           for (b, o), a in state.terms.items()})


def apply_phase(state: KetExpansion, ph: PhaseSpec) -> KetExpansion:
    return state._rebuild({
        (b, o): a * cmath.exp(1j * b.count(ph.mode) * ph.phi)
        for (b, o), a in state.terms.items()
    })


def apply_element(state: KetExpansion, element: Element,
                  max_order: int | None = None) -> KetExpansion:
    if isinstance(element, SourceSpec):
        return apply_squeezer(state, element, max_order)
    if isinstance(element, RotatorSpec):
        return apply_rotator(state, element)
    if isinstance(element, PhaseSpec):
        return apply_phase(state, element)
    raise TypeError(f"unknown element {element!r}")


def run_pipeline(elements, max_order: int = 2, initial: KetExpansion | None = None,
                 prune: float | None = None) -> KetExpansion:
    """Apply ``elements`` in order, starting from vacuum unless ``initial`` is given."""
    if initial is None:
        kwargs = {} if prune is None else {"prune": prune}
        initial = KetExpansion.vacuum(max_order, **kwargs)
    state = initial
    for el in elements:
        state = apply_element(state, el, max_order)
    return state


# ---------------------------------------------------------------------------
# Dense oracle (tests only)
# ---------------------------------------------------------------------------

def _ladder(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1)


def brute_force_squeezer_oracle(src: SourceSpec, cutoff: int = MAX_PHOTONS_PER_MODE,
                                tol: float = 1e-18, max_terms: int = 200) -> np.ndarray:
    """Dense ``exp(eps a_s^+ a_i^+ - eps* a_s a_i)`` on ``(cutoff+1)**2`` levels.

    Row/column index is ``n_signal * (cutoff + 1) + n_idler``. Summed as a
    Taylor series until the added term falls below ``tol``; deliberately
    independent of :func:`scipy.linalg.expm`.
    """
    if cutoff > MAX_PHOTONS_PER_MODE:
        raise ValueError(f"cutoff must be <= {MAX_PHOTONS_PER_MODE}")
    a = _ladder(cutoff)
    eye = np.eye(cutoff + 1)
    a_s, a_i = np.kron(a, eye), np.kron(eye, a)
    eps = complex(src.epsilon)
    gen = eps * (a_s.T @ a_i.T) - eps.conjugate() * (a_s @ a_i)
    dim = gen.shape[0]
    total = np.eye(dim, dtype=complex)
    term = np.eye(dim, dtype=complex)
    for k in range(1, max_terms):
        term = term @ gen / k
        total += term
        if np.abs(term).max() < tol:
            break
    return total


def apply_dense_two_mode(state: KetExpansion, op: np.ndarray, mode_a: ModeLabel,
                         mode_b: ModeLabel, cutoff: int) -> KetExpansion:
    """Apply a dense operator on ``(mode_a, mode_b)`` to a sparse ket.

    Order bookkeeping is dropped (everything lands at order 0); the result is
    meant for amplitude comparisons only.
    """
    levels = cutoff + 1
    groups: dict[FockBasisState, np.ndarray] = {}
    for basis, amp in state.amplitudes().items():
        na, nb = basis.count(mode_a), basis.count(mode_b)
        if na > cutoff or nb > cutoff:
            raise PerturbativeOverflow(f"{basis} exceeds oracle cutoff {cutoff}")
        rest = basis.with_count(mode_a, 0).with_count(mode_b, 0)
        vec = groups.setdefault(rest, np.zeros(levels * levels, dtype=complex))
        vec[na * levels + nb] += amp
    out = {}
    for rest, vec in groups.items():
        new = op @ vec
        for idx in np.flatnonzero(np.abs(new) > 0):
            na, nb = divmod(int(idx), levels)
            basis = rest.with_count(mode_a, na).with_count(mode_b, nb)
            out[(basis, 0)] = out.get((basis, 0), 0j) + new[idx]
    return KetExpansion(out, max_order=max(state.max_order, 0), prune=0.0)


def oracle_pipeline(elements, cutoff: int = MAX_PHOTONS_PER_MODE) -> KetExpansion:
    """Exact (to the photon cutoff) counterpart of :func:`run_pipeline`."""
    state = KetExpansion.vacuum(max_order=0, prune=0.0)
    for el in elements:
        if isinstance(el, SourceSpec):
            op = brute_force_squeezer_oracle(el, cutoff)
            state = apply_dense_two_mode(state, op, el.signal, el.idler, cutoff)
        else:
            state = apply_element(state, el)
    return state


__all__ = [
    "PerturbativeOverflow",
    "SourceSpec",
    "RotatorSpec",
    "PhaseSpec",
    "Element",
    "apply_squeezer",
    "apply_rotator",
    "apply_phase",
    "apply_element",
    "run_pipeline",
    "brute_force_squeezer_oracle",
    "apply_dense_two_mode",
    "oracle_pipeline",
    "Pol",
]
