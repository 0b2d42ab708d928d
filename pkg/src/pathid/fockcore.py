"""Sparse bosonic Fock-state algebra.

A ket is stored as a map from ``(basis, order)`` to a complex amplitude, where
``order`` is the total power of source efficiencies that produced the term.
Keying on the order as well as the basis lets :func:`truncate` drop
multi-pair contributions exactly even when a basis state is reachable at
several orders.
"""

from __future__ import annotations

import cmath
import enum
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple

DEFAULT_PRUNE = 1e-14
MAX_PHOTONS_PER_MODE = 4


class Pol(enum.IntEnum):
    H = 0
    V = 1

    @classmethod
    def parse(cls, text: str) -> "Pol":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"polarization must be H or V, got {text!r}") from None

    def flipped(self) -> "Pol":
        return Pol.V if self is Pol.H else Pol.H


class ModeLabel(NamedTuple):
    """One optical mode. Tuple ordering gives path first, then H < V."""

    path: int
    pol: Pol

    @classmethod
    def of(cls, path: int, pol: str | Pol) -> "ModeLabel":
        if isinstance(pol, str):
            pol = Pol.parse(pol)
        if int(path) < 1:
            raise ValueError(f"path index must be >= 1, got {path}")
        return cls(int(path), Pol(pol))

    def __str__(self) -> str:
        return f"{self.path}{self.pol.name}"


@dataclass(frozen=True)
class FockBasisState:
    """Occupation-number basis ket in canonical (sorted, zero-free) form."""

    occupations: tuple[tuple[ModeLabel, int], ...] = ()

    @classmethod
    def from_mapping(cls, occ: Mapping[ModeLabel, int] | Iterable[tuple[ModeLabel, int]]):
        items = occ.items() if isinstance(occ, Mapping) else occ
        merged: dict[ModeLabel, int] = defaultdict(int)
        for mode, n in items:
            if n < 0:
                raise ValueError(f"negative occupation for mode {mode}")
            merged[ModeLabel(int(mode[0]), Pol(mode[1]))] += int(n)
        return cls(tuple(sorted((m, n) for m, n in merged.items() if n)))

    @classmethod
    def vacuum(cls) -> "FockBasisState":
        return cls(())

    def count(self, mode: ModeLabel) -> int:
        for m, n in self.occupations:
            if m == mode:
                return n
        return 0

    def with_count(self, mode: ModeLabel, n: int) -> "FockBasisState":
        occ = {m: k for m, k in self.occupations}
        if n:
            occ[mode] = n
        else:
            occ.pop(mode, None)
        return FockBasisState(tuple(sorted(occ.items())))

    def on_path(self, path: int) -> tuple[int, int]:
        """(n_H, n_V) on ``path``."""
        nh = nv = 0
        for m, n in self.occupations:
            if m.path == path:
                if m.pol is Pol.H:
                    nh = n
                else:
                    nv = n
        return nh, nv

    @property
    def total(self) -> int:
        return sum(n for _, n in self.occupations)

    def __str__(self) -> str:
        if not self.occupations:
            return "|vac>"
        return "|" + ",".join(f"{n}_{m}" for m, n in self.occupations) + ">"


class PerturbativeTerm(NamedTuple):
    basis: FockBasisState
    amplitude: complex
    order: int


@dataclass(frozen=True)
class KetExpansion:
    """Immutable sparse ket truncated at perturbative order ``max_order``."""

    terms: Mapping[tuple[FockBasisState, int], complex] = field(default_factory=dict)
    max_order: int = 2
    prune: float = DEFAULT_PRUNE

    def __post_init__(self):
        if self.max_order < 0:
            raise ValueError("max_order must be >= 0")
        cleaned = {
            key: complex(amp)
            for key, amp in self.terms.items()
            if key[1] <= self.max_order and abs(amp) >= self.prune and amp != 0
        }
        object.__setattr__(self, "terms", dict(sorted(cleaned.items(), key=_term_sort_key)))

    @classmethod
    def vacuum(cls, max_order: int = 2, prune: float = DEFAULT_PRUNE) -> "KetExpansion":
        return cls({(FockBasisState.vacuum(), 0): 1.0}, max_order, prune)

    @classmethod
    def from_terms(cls, terms: Iterable[PerturbativeTerm | tuple], max_order: int = 2,
                   prune: float = DEFAULT_PRUNE) -> "KetExpansion":
        acc: dict[tuple[FockBasisState, int], complex] = defaultdict(complex)
        for basis, amp, order in terms:
            acc[(basis, int(order))] += amp
        return cls(dict(acc), max_order, prune)

    def _rebuild(self, acc: Mapping[tuple[FockBasisState, int], complex]) -> "KetExpansion":
        return KetExpansion(dict(acc), self.max_order, self.prune)

    def __iter__(self) -> Iterator[PerturbativeTerm]:
        for (basis, order), amp in self.terms.items():
            yield PerturbativeTerm(basis, amp, order)

    def __len__(self) -> int:
        return len(self.terms)

    def amplitude(self, basis: FockBasisState) -> complex:
        """Total amplitude on ``basis`` summed over all orders."""
        return sum((a for (b, _), a in self.terms.items() if b == basis), 0j)

    def amplitudes(self) -> dict[FockBasisState, complex]:
        out: dict[FockBasisState, complex] = defaultdict(complex)
        for (b, _), a in self.terms.items():
            out[b] += a
        return dict(out)

    def norm(self) -> float:
        return math.sqrt(inner_product(self, self).real)

    def normalized(self) -> "KetExpansion":
        nrm = self.norm()
        if nrm == 0:
            raise ZeroDivisionError("cannot normalize the zero ket")
        return self._rebuild({k: a / nrm for k, a in self.terms.items()})

    def scaled(self, factor: complex) -> "KetExpansion":
        return self._rebuild({k: a * factor for k, a in self.terms.items()})

    def __add__(self, other: "KetExpansion") -> "KetExpansion":
        acc: dict = defaultdict(complex, self.terms)
        for k, a in other.terms.items():
            acc[k] += a
        return KetExpansion(dict(acc), max(self.max_order, other.max_order),
                            min(self.prune, other.prune))

    def to_json(self) -> str:
        return json.dumps(ket_to_records(self), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str, max_order: int | None = None,
                  prune: float = DEFAULT_PRUNE) -> "KetExpansion":
        return ket_from_records(json.loads(text), max_order=max_order, prune=prune)


def _term_sort_key(item):
    (basis, order), _ = item
    return (order, basis.total, basis.occupations)


def create(state: KetExpansion, mode: ModeLabel) -> KetExpansion:
    acc: dict = defaultdict(complex)
    for (basis, order), amp in state.terms.items():
        n = basis.count(mode)
        acc[(basis.with_count(mode, n + 1), order)] += amp * math.sqrt(n + 1)
    return state._rebuild(acc)


def annihilate(state: KetExpansion, mode: ModeLabel) -> KetExpansion:
    acc: dict = defaultdict(complex)
    for (basis, order), amp in state.terms.items():
        n = basis.count(mode)
        if n:
            acc[(basis.with_count(mode, n - 1), order)] += amp * math.sqrt(n)
    return state._rebuild(acc)


def inner_product(a: KetExpansion, b: KetExpansion) -> complex:
    """<a|b>, antilinear in ``a``."""
    amps_b = b.amplitudes()
    return sum((amp.conjugate() * amps_b.get(basis, 0j)
                for basis, amp in a.amplitudes().items()), 0j)


def truncate(state: KetExpansion, max_order: int) -> KetExpansion:
    return KetExpansion(
        {k: a for k, a in state.terms.items() if k[1] <= max_order},
        max_order, state.prune,
    )


def expectation_number(state: KetExpansion, mode: ModeLabel) -> float:
    """<n_mode> on ``state`` (not renormalized)."""
    return inner_product(state, create(annihilate(state, mode), mode)).real


def ket_to_records(state: KetExpansion) -> list[dict]:
    return [
        {
            "modes": [[m.path, m.pol.name, n] for m, n in t.basis.occupations],
            "re": t.amplitude.real,
            "im": t.amplitude.imag,
            "order": t.order,
        }
        for t in state
    ]


def ket_from_records(records: list[dict], max_order: int | None = None,
                     prune: float = DEFAULT_PRUNE) -> KetExpansion:
    terms = []
    for rec in records:
        basis = FockBasisState.from_mapping(
            [(ModeLabel.of(p, pol), n) for p, pol, n in rec["modes"]]
        )
        terms.append((basis, complex(rec["re"], rec["im"]), int(rec["order"])))
    if max_order is None:
        max_order = max((t[2] for t in terms), default=0)
    return KetExpansion.from_terms(terms, max_order, prune)


def ket(*modes: tuple[int, str, int] | tuple[int, str], amplitude: complex = 1.0,
        order: int = 0, max_order: int = 2, prune: float = DEFAULT_PRUNE) -> KetExpansion:
    """Single-term ket, e.g. ``ket((3, "V", 2))`` for two V photons on path 3."""
    occ = []
    for spec in modes:
        path, pol, *rest = spec
        occ.append((ModeLabel.of(path, pol), rest[0] if rest else 1))
    basis = FockBasisState.from_mapping(occ)
    return KetExpansion({(basis, order): amplitude}, max_order, prune)


def phase_factor(n: int, phi: float) -> complex:
    return cmath.exp(1j * n * phi)
