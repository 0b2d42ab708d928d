"""Nine-setting two-qubit tomography with maximum-likelihood reconstruction.

Alice and Bob each measure in H/V, D/A or R/L; the nine basis pairs give 36
outcome probabilities. Reconstruction is the diluted R-rho-R iteration
(``rho <- (I + tR) rho (I + tR) / tr``) with a step search that only accepts
steps which do not lower the log-likelihood.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import entmetrics
from .entmetrics import _BASES
from .noisemc import CountRecord, derive_seed, simulate_counts
from .postselect import TwoQubitDensityMatrix

log = logging.getLogger(__name__)

BASIS_NAMES = ("HV", "DA", "RL")
ALL_BASIS_PAIRS = tuple(itertools.product(BASIS_NAMES, BASIS_NAMES))


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best: "MleFit"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class TomoSettings:
    shots_per_setting: float = 1e5
    mc_trials: int = 100
    seed: int = 0
    bases: tuple[tuple[str, str], ...] = ALL_BASIS_PAIRS

    def __post_init__(self):
        bases = tuple(tuple(b) for b in self.bases)
        if sorted(bases) != sorted(ALL_BASIS_PAIRS):
            raise ValueError("tomography needs each of the 9 basis pairs exactly once")
        if not self.shots_per_setting > 0:
            raise ValueError("shots_per_setting must be > 0")
        if self.mc_trials < 0:
            raise ValueError("mc_trials must be >= 0")
        object.__setattr__(self, "bases", bases)

    def to_dict(self) -> dict:
        return {"shots_per_setting": self.shots_per_setting, "mc_trials": self.mc_trials,
                "seed": self.seed, "bases": ["x".join(b) for b in self.bases]}


def setting_label(pair: tuple[str, str]) -> str:
    return "x".join(pair)


def outcome_labels(pair: tuple[str, str]) -> list[str]:
    a, b = pair
    return [a[i] + b[j] for i in range(2) for j in range(2)]


def projectors(pair: tuple[str, str]) -> np.ndarray:
    va, vb = _BASES[pair[0]], _BASES[pair[1]]
    out = []
    for i in range(2):
        for j in range(2):
            v = np.kron(va[i], vb[j])
            out.append(np.outer(v, v.conj()))
    return np.array(out)


def setting_probabilities(rho, pair: tuple[str, str]) -> dict[str, float]:
    m = np.asarray(rho, dtype=complex)
    p = np.einsum("kij,ji->k", projectors(pair), m).real
    return dict(zip(outcome_labels(pair), np.clip(p, 0.0, None).tolist()))


def tomo_measure(rho, settings: TomoSettings, seed: int | None = None) -> list[CountRecord]:
    """Poisson counts for all nine basis pairs; stream = basis-pair index."""
    seed = settings.seed if seed is None else seed
    records = []
    for k, pair in enumerate(settings.bases):
        probs = setting_probabilities(rho, pair)
        total = sum(probs.values())
        probs = {o: p / total for o, p in probs.items()}
        records.append(simulate_counts(probs, setting_label(pair), settings.shots_per_setting,
                                       seed, stream=k))
    return records


def expected_records(rho, shots: float = 1.0,
                     bases: Sequence[tuple[str, str]] = ALL_BASIS_PAIRS) -> list[CountRecord]:
    """Noise-free records holding expected (non-integer) counts."""
    return [CountRecord(setting_label(pair),
                        {o: shots * p for o, p in setting_probabilities(rho, pair).items()})
            for pair in bases]


def _design(records: Sequence[CountRecord]) -> tuple[np.ndarray, np.ndarray]:
    ops, counts = [], []
    seen = set()
    for rec in records:
        pair = tuple(rec.setting.split("x"))
        if pair not in ALL_BASIS_PAIRS:
            raise ValueError(f"unknown tomography setting {rec.setting!r}")
        seen.add(pair)
        for label, proj in zip(outcome_labels(pair), projectors(pair)):
            ops.append(proj)
            counts.append(float(rec.counts.get(label, 0.0)))
    if seen != set(ALL_BASIS_PAIRS):
        raise ValueError("records must cover all 9 basis pairs")
    n = np.array(counts)
    if n.sum() <= 0:
        raise ValueError("records hold no counts")
    return np.array(ops), n


def _probs(ops: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return np.einsum("kij,ji->k", ops, rho).real


def _loglik(n: np.ndarray, p: np.ndarray) -> float:
    mask = n > 0
    if np.any(p[mask] <= 0):
        return -np.inf
    return float(np.sum(n[mask] * np.log(p[mask])))


@dataclass
class MleFit:
    rho: np.ndarray
    log_likelihood: float
    iterations: int
    history: list[float] = field(default_factory=list)
    converged: bool = True


def mle_fit(records: Sequence[CountRecord], max_iter: int = 10_000, tol: float = 1e-10,
            max_step: float = 1e6) -> MleFit:
    """Maximum-likelihood density matrix for the given tomography counts.

    Raises :class:`ConvergenceError` (holding the best iterate) when
    ``max_iter`` is reached before a step gains less than ``tol``.
    """
    ops, n = _design(records)
    total = n.sum()
    mask = n > 0
    rho = np.eye(4, dtype=complex) / 4
    p = _probs(ops, rho)
    ll = _loglik(n, p)
    history = [ll]
    step = max_step
    eye = np.eye(4)
    for it in range(1, max_iter + 1):
        weights = np.zeros_like(n)
        weights[mask] = n[mask] / p[mask]
        r = np.einsum("k,kij->ij", weights, ops) / total
        while True:
            a = eye + step * r
            cand = a @ rho @ a.conj().T
            cand = (cand + cand.conj().T) / 2
            cand /= np.trace(cand).real
            p_new = _probs(ops, cand)
            ll_new = _loglik(n, p_new)
            if ll_new >= ll:
                break
            step /= 2
            if step < 1e-14:
                # no ascent direction left at floating-point resolution
                return MleFit(rho, ll, it, history)
        gain = ll_new - ll
        rho, p, ll = cand, p_new, ll_new
        history.append(ll)
        step = min(step * 4, max_step)
        if gain < tol:
            return MleFit(rho, ll, it, history)
    best = MleFit(rho, ll, max_iter, history, converged=False)
    raise ConvergenceError(f"MLE did not converge in {max_iter} iterations", best)


def reconstruct_mle(records: Sequence[CountRecord], **kwargs) -> TwoQubitDensityMatrix:
    return TwoQubitDensityMatrix(mle_fit(records, **kwargs).rho)


def log_likelihood(records: Sequence[CountRecord], rho) -> float:
    ops, n = _design(records)
    return _loglik(n, _probs(ops, np.asarray(rho, dtype=complex)))


def linear_inversion(records: Sequence[CountRecord], clamp: bool = False) -> np.ndarray:
    """Least-squares inversion of per-setting frequencies (diagnostic only).

    The result is Hermitian with unit trace but in general not PSD; with
    ``clamp`` negative eigenvalues are zeroed and the trace restored.
    """
    ops, n = _design(records)
    freqs = n.reshape(9, 4)
    freqs = (freqs / freqs.sum(axis=1, keepdims=True)).ravel()
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]),
              np.array([[1, 0], [0, -1]])]
    basis = [np.kron(a, b) / 4 for a in paulis for b in paulis]
    design = np.array([[np.trace(op @ b).real for b in basis] for op in ops])
    coef, *_ = np.linalg.lstsq(design, freqs, rcond=None)
    rho = sum(c * b for c, b in zip(coef, basis))
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.trace(rho).real
    if clamp:
        w, v = np.linalg.eigh(rho)
        w = np.clip(w, 0.0, None)
        rho = (v * w) @ v.conj().T
        rho /= np.trace(rho).real
    return rho


def metrics(rho) -> dict[str, float]:
    return {
        "fidelity": entmetrics.fidelity_phi_plus(rho),
        "concurrence": entmetrics.concurrence(rho),
        "witness": entmetrics.witness_value(rho),
    }


@dataclass
class Estimate:
    value: float
    sigma: float | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "sigma": self.sigma}


@dataclass
class TomoResult:
    rho_hat: TwoQubitDensityMatrix
    fidelity: Estimate
    concurrence: Estimate
    witness: Estimate
    log_likelihood: float
    settings: TomoSettings
    trials: list[dict] = field(default_factory=list)
    failures: int = 0
    point: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rho_hat": self.rho_hat.to_dict(),
            "metrics": {
                "fidelity": self.fidelity.to_dict(),
                "concurrence": self.concurrence.to_dict(),
                "witness": self.witness.to_dict(),
                "log_likelihood": self.log_likelihood,
            },
            "point_estimate": self.point,
            "trials": self.trials,
            "failures": self.failures,
            "settings": self.settings.to_dict(),
        }


def _trial(args) -> dict:
    rho_true, settings, seed, index = args
    records = tomo_measure(rho_true, settings, seed=seed)
    try:
        fit = mle_fit(records)
    except ConvergenceError as exc:
        return {"trial": index, "seed": seed, "failed": True, "error": str(exc),
                **metrics(exc.best.rho)}
    return {"trial": index, "seed": seed, "failed": False, "iterations": fit.iterations,
            **metrics(fit.rho)}


def mc_errorbars(rho_true, settings: TomoSettings, workers: int = 1,
                 trial_seeds: Sequence[int] | None = None) -> TomoResult:
    """Point estimate plus Monte Carlo spread of the tomography metrics.

    The point estimate uses ``settings.seed``; trial ``i`` (1-based) resimulates
    with seed ``settings.seed ^ i`` unless ``trial_seeds`` overrides them.
    Statistics are the mean and sample standard deviation over trials that
    converged.
    """
    rho_true = np.asarray(rho_true, dtype=complex)
    point = mle_fit(tomo_measure(rho_true, settings))
    rho_hat = TwoQubitDensityMatrix(point.rho)
    base = metrics(point.rho)

    if trial_seeds is None:
        trial_seeds = [derive_seed(settings.seed, i) for i in range(1, settings.mc_trials + 1)]
    elif len(trial_seeds) != settings.mc_trials:
        raise ValueError("trial_seeds must have mc_trials entries")
    jobs = [(rho_true, settings, s, i) for i, s in enumerate(trial_seeds, start=1)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        trials = [_trial(job) for job in jobs]

    ok = [t for t in trials if not t["failed"]]
    failures = len(trials) - len(ok)
    if failures:
        log.warning("%d of %d MC trials did not converge", failures, len(trials))
    if settings.mc_trials and len(ok) < 2:
        raise ValueError("need at least 2 converged MC trials for error bars")

    def summarize(key: str) -> Estimate:
        if not settings.mc_trials:
            return Estimate(base[key])
        vals = np.array([t[key] for t in ok])
        return Estimate(float(vals.mean()), float(vals.std(ddof=1)))

    return TomoResult(
        rho_hat=rho_hat,
        fidelity=summarize("fidelity"),
        concurrence=summarize("concurrence"),
        witness=summarize("witness"),
        log_likelihood=point.log_likelihood,
        settings=settings,
        trials=trials,
        failures=failures,
        point=base,
    )
