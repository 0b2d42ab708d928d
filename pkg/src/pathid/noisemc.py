"""Poisson counting, correlation estimates, phase scans and rate calibration.

Randomness comes from numpy's Philox counter-based generator keyed by
``(seed, stream)``. Parallel trials use ``seed ^ trial`` as their base seed, so
results never depend on scheduling.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .entmetrics import AnalyzerSetting, joint_probabilities, setting_probabilities

SEED_MASK = (1 << 64) - 1
CORRELATION_OUTCOMES = ("++", "+-", "-+", "--")
_SIGNS = {"++": 1, "+-": -1, "-+": -1, "--": 1}


class EmptyRecord(ValueError):
    pass


class FitError(ValueError):
    pass


def derive_seed(base_seed: int, index: int) -> int:
    return (int(base_seed) ^ int(index)) & SEED_MASK


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    entropy = [int(seed) & SEED_MASK, int(stream) & SEED_MASK]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class CountRecord:
    setting: str
    counts: Mapping[str, float]
    duration_s: float = 1.0
    seed: int = 0
    stream: int = 0

    @property
    def total(self) -> float:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        return {"setting": self.setting, "counts": dict(self.counts),
                "duration_s": self.duration_s, "seed": self.seed, "stream": self.stream}


def simulate_counts(source, setting, mean_total: float, seed: int, stream: int = 0,
                    duration_s: float = 1.0) -> CountRecord:
    """Draw Poisson counts for one measurement setting.

    ``source`` is either a mapping ``outcome -> probability`` (``setting`` is
    then just a label) or a density matrix measured with linear analyzers at
    ``setting`` (an :class:`AnalyzerSetting`), giving outcomes ``++ +- -+ --``.
    """
    if isinstance(source, Mapping):
        probs = {str(k): float(v) for k, v in source.items()}
        label = str(setting)
    else:
        setting = AnalyzerSetting(*setting)
        p = setting_probabilities(source, setting)
        probs = dict(zip(CORRELATION_OUTCOMES, p.ravel().tolist()))
        label = str(setting)
    if mean_total < 0:
        raise ValueError("mean_total must be >= 0")
    values = np.clip(np.array(list(probs.values()), dtype=float), 0.0, None)
    if values.size and abs(values.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {values.sum():.12g}, expected 1")
    rng = make_rng(seed, stream)
    draws = rng.poisson(values * mean_total)
    return CountRecord(label, dict(zip(probs, (int(n) for n in draws))), duration_s, seed, stream)


class CorrelationEstimate(NamedTuple):
    value: float
    sigma: float
    degenerate: bool


def estimate_correlation(record: CountRecord) -> CorrelationEstimate:
    """E = (N++ - N+- - N-+ + N--) / N with first-order Poisson propagation.

    dE/dN_k = (s_k - E) / N, so var(E) = sum_k (s_k - E)^2 N_k / N^2. Zero-count
    cells contribute nothing and set ``degenerate``.
    """
    try:
        n = {k: float(record.counts[k]) for k in CORRELATION_OUTCOMES}
    except KeyError as exc:
        raise ValueError(f"record lacks outcome {exc}") from None
    total = sum(n.values())
    if total <= 0:
        raise EmptyRecord(f"no counts in record {record.setting}")
    e = sum(_SIGNS[k] * v for k, v in n.items()) / total
    var = sum((_SIGNS[k] - e) ** 2 * v for k, v in n.items()) / total**2
    return CorrelationEstimate(e, math.sqrt(var), any(v == 0 for v in n.values()))


@dataclass(frozen=True)
class RateCalibration:
    pair_rates_hz: tuple[float, float, float, float]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.pair_rates_hz)
        if len(rates) != 4:
            raise ValueError("need four coincidence rates")
        if any(not r > 0 for r in rates):
            raise ValueError("coincidence rates must be positive")
        object.__setattr__(self, "pair_rates_hz", rates)


def efficiency_ratio(cal: RateCalibration | Sequence[float]) -> float:
    """eps'/eps = (CC2 * CC3 / (CC1 * CC4)) ** (1/4)."""
    if not isinstance(cal, RateCalibration):
        cal = RateCalibration(tuple(cal))
    cc1, cc2, cc3, cc4 = cal.pair_rates_hz
    return ((cc2 * cc3) / (cc1 * cc4)) ** 0.25


class VisibilityFit(NamedTuple):
    visibility: float
    delta0: float
    offset: float
    amplitude: float
    residual_rms: float


def fit_visibility(phi: Sequence[float], values: Sequence[float]) -> VisibilityFit:
    """Least-squares fit of ``a + b cos(phi - phi0)``; V = |b| / a.

    Solved linearly in ``(a, b cos phi0, b sin phi0)``. ``delta0`` is wrapped
    to (-pi, pi].
    """
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(values, dtype=float)
    if phi.shape != y.shape or phi.ndim != 1:
        raise FitError("phi and values must be 1-d and equally long")
    if phi.size < 5:
        raise FitError("need at least 5 phase points")
    if np.ptp(phi) < math.pi - 1e-12:
        raise FitError("phase points must span at least half a period")
    design = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    normal = design.T @ design
    if np.linalg.cond(normal) > 1e12:
        raise FitError("normal equations are singular")
    a, c, s = np.linalg.solve(normal, design.T @ y)
    b = math.hypot(c, s)
    scale = max(abs(a), np.abs(y).max(initial=0.0))
    if scale == 0 or b <= 1e-12 * scale:
        raise FitError("no fringe in data; phase offset undefined")
    if a <= 0:
        raise FitError("fitted offset is not positive")
    resid = y - design @ np.array([a, c, s])
    delta0 = math.atan2(s, c)
    if delta0 <= -math.pi:
        delta0 += 2 * math.pi
    return VisibilityFit(b / a, delta0, float(a), b, float(np.sqrt(np.mean(resid**2))))


DA_OUTCOMES = ("DD", "DA", "AD", "AA")


@dataclass
class PhaseScan:
    phi: np.ndarray
    probabilities: np.ndarray
    counts: np.ndarray | None = None
    outcomes: tuple[str, ...] = DA_OUTCOMES
    meta: dict = field(default_factory=dict)

    def column(self, outcome: str, noisy: bool = False) -> np.ndarray:
        k = self.outcomes.index(outcome)
        if noisy:
            if self.counts is None:
                raise ValueError("scan has no simulated counts")
            return self.counts[:, k]
        return self.probabilities[:, k]

    def fits(self, noisy: bool = False) -> dict[str, VisibilityFit]:
        return {o: fit_visibility(self.phi, self.column(o, noisy)) for o in self.outcomes}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["phi_rad"] + [f"p_{o.lower()}" for o in self.outcomes]
        if self.counts is not None:
            header += [f"n_{o.lower()}" for o in self.outcomes]
        w.writerow(header)
        for i, phi in enumerate(self.phi):
            row = [f"{phi:.17g}"] + [f"{p:.17g}" for p in self.probabilities[i]]
            if self.counts is not None:
                row += [str(int(n)) for n in self.counts[i]]
            w.writerow(row)
        return buf.getvalue()


def phase_scan(spec, phi_grid: Sequence[float], bases: tuple[str, str] = ("DA", "DA"),
               mean_total: float | None = None, seed: int = 0,
               phase_index: int = 0) -> PhaseScan:
    """Post-selected outcome probabilities while sweeping a phase element.

    ``spec`` is an :class:`~pathid.expdsl.ExperimentSpec`; its
    ``phase_index``-th phase element is set to each grid value in turn. When
    ``mean_total`` is given, Poisson counts with that expected total are drawn
    per point, stream = point index.
    """
    phi = np.asarray(list(phi_grid), dtype=float)
    rows, counts, deltas = [], [], []
    outcomes: tuple[str, ...] | None = None
    for k, value in enumerate(phi):
        rho = spec.with_phase(value, phase_index).postselected()
        table = joint_probabilities(rho, *bases)
        outcomes = tuple(table)
        rows.append([table[o] for o in outcomes])
        deltas.append(rho.relative_phase)
        if mean_total is not None:
            rec = simulate_counts(table, f"phi={value:.17g}", mean_total, seed, stream=k)
            counts.append([rec.counts[o] for o in outcomes])
    return PhaseScan(
        phi=phi,
        probabilities=np.array(rows),
        counts=np.array(counts, dtype=np.int64) if mean_total is not None else None,
        outcomes=outcomes or DA_OUTCOMES,
        meta={"delta": deltas, "bases": list(bases), "seed": seed, "mean_total": mean_total},
    )
