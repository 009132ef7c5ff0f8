"""Deviation-minimizing selection over the observer bank.

Each candidate subset J gets a deviation score: the largest distance
between its estimate and the estimates of the cross-check subsets
contained in it.  Under the sparse-attack assumption at least one J is
attack-free and scores low, while every badly corrupted J is betrayed
by one of its clean cross-checks, so selecting the argmin yields an
estimate whose error is bounded by attack-free observer errors alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .combinatorics import BankIndex, SubsetIndex
from .errors import EstimatorStarvedError, InternalConsistencyError

__all__ = [
    "EstimatorFrame",
    "EstimatorRun",
    "compute_pi",
    "compute_all_pi",
    "select_sigma",
    "estimator_step",
    "run_estimator",
    "frames_to_csv",
]


def _deviation(a: np.ndarray, b: np.ndarray) -> float:
    # diverged observers produce huge or NaN entries; the overflow of
    # their norm is expected and collapses to +inf
    with np.errstate(over="ignore", invalid="ignore"):
        d = float(np.linalg.norm(a - b))
    return d if np.isfinite(d) else float("inf")


def compute_pi(
    J: SubsetIndex,
    estimates: dict[SubsetIndex, np.ndarray],
    containment: dict[SubsetIndex, tuple[SubsetIndex, ...]],
) -> float:
    """Deviation score of one J-class subset at one step.

    The largest Euclidean distance between J's estimate and the
    estimates of its contained cross-check subsets.  Nonnegative; any
    non-finite estimate turns into +inf so a diverged observer loses
    every argmin without special-casing.
    """
    try:
        x_J = estimates[J]
        return max(_deviation(x_J, estimates[S]) for S in containment[J])
    except KeyError as missing:
        raise InternalConsistencyError(
            f"bank estimates incomplete while scoring {J.label}: missing {missing.args[0]}"
        ) from None


def compute_all_pi(
    estimates: dict[SubsetIndex, np.ndarray], bank: BankIndex
) -> dict[SubsetIndex, float]:
    """Deviation scores of every J-class subset, in canonical order."""
    return {J: compute_pi(J, estimates, bank.contained) for J in bank.j_subsets}


def select_sigma(pi: dict[SubsetIndex, float], k: int | None = None) -> SubsetIndex:
    """Argmin of the deviation scores, ties to canonical subset order."""
    best = None
    best_val = float("inf")
    for J in sorted(pi):
        if pi[J] < best_val:
            best, best_val = J, pi[J]
    if best is None:
        raise EstimatorStarvedError(-1 if k is None else k)
    return best


@dataclass
class EstimatorFrame:
    """Everything the selection stage produced at one step."""

    k: int
    sigma: SubsetIndex
    x_hat: np.ndarray
    pi: dict[SubsetIndex, float]
    estimates: dict[SubsetIndex, np.ndarray] = field(repr=False)
    e: np.ndarray | None = None

    @property
    def e_norm(self) -> float | None:
        return None if self.e is None else float(np.linalg.norm(self.e))


def estimator_step(
    estimates: dict[SubsetIndex, np.ndarray],
    bank: BankIndex,
    k: int = 0,
    truth: np.ndarray | None = None,
) -> EstimatorFrame:
    """Score, select, and package one step of bank output."""
    pi = compute_all_pi(estimates, bank)
    sigma = select_sigma(pi, k)
    x_hat = np.asarray(estimates[sigma], dtype=float).copy()
    e = None if truth is None else x_hat - np.asarray(truth, dtype=float)
    return EstimatorFrame(k=k, sigma=sigma, x_hat=x_hat, pi=pi, estimates=estimates, e=e)


@dataclass
class EstimatorRun:
    """Whole-run estimator output in dense array form.

    ``est`` is (n_subsets, T+1, n) ordered like ``subsets`` (J class
    first, then S class, each canonical); ``pi`` is (T+1, n_J) in the
    J order; ``sigma_idx[k]`` indexes into the J class.
    """

    bank: BankIndex
    subsets: tuple[SubsetIndex, ...]
    est: np.ndarray
    pi: np.ndarray
    sigma_idx: np.ndarray
    x_hat: np.ndarray
    truth: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.x_hat.shape[0] - 1

    @property
    def e_norm(self) -> np.ndarray | None:
        if self.truth is None:
            return None
        with np.errstate(over="ignore", invalid="ignore"):
            return np.linalg.norm(self.x_hat - self.truth, axis=1)

    def sigma(self, k: int) -> SubsetIndex:
        return self.bank.j_subsets[int(self.sigma_idx[k])]

    def frame(self, k: int) -> EstimatorFrame:
        lookup = {sub: self.est[j, k] for j, sub in enumerate(self.subsets)}
        pi = {J: float(self.pi[k, j]) for j, J in enumerate(self.bank.j_subsets)}
        e = None if self.truth is None else self.x_hat[k] - self.truth[k]
        return EstimatorFrame(
            k=k, sigma=self.sigma(k), x_hat=self.x_hat[k].copy(), pi=pi,
            estimates=lookup, e=e,
        )

    def frames(self):
        for k in range(self.x_hat.shape[0]):
            yield self.frame(k)


def run_estimator(
    bank: BankIndex,
    subsets: tuple[SubsetIndex, ...],
    est: np.ndarray,
    truth: np.ndarray | None = None,
) -> EstimatorRun:
    """Vectorized selection over a full run of bank estimates.

    ``est[j]`` must be the (T+1, n) estimate track of ``subsets[j]``.
    Equivalent to calling :func:`estimator_step` at every k, including
    tie-breaking: argmin takes the first (canonical) column.
    """
    pos = {sub: j for j, sub in enumerate(subsets)}
    T1 = est.shape[1]
    n_j = len(bank.j_subsets)
    pi = np.zeros((T1, n_j))
    # norms of diverged tracks overflow by design and collapse to +inf
    with np.errstate(over="ignore", invalid="ignore"):
        for j, J in enumerate(bank.j_subsets):
            x_J = est[pos[J]]
            devs = np.stack(
                [np.linalg.norm(x_J - est[pos[S]], axis=1) for S in bank.contained[J]]
            )
            col = np.max(devs, axis=0)
            pi[:, j] = np.where(np.isfinite(col), col, np.inf)
    starved = ~np.isfinite(pi).any(axis=1)
    if starved.any():
        raise EstimatorStarvedError(int(np.argmax(starved)))
    sigma_idx = np.argmin(pi, axis=1)
    j_pos = np.array([pos[J] for J in bank.j_subsets], dtype=int)
    x_hat = est[j_pos[sigma_idx], np.arange(T1)]
    return EstimatorRun(
        bank=bank, subsets=tuple(subsets), est=est, pi=pi,
        sigma_idx=sigma_idx, x_hat=x_hat, truth=truth,
    )


def frames_to_csv(run: EstimatorRun, fh) -> None:
    """One row per step: selection, fused estimate, error, all pi scores."""
    n = run.x_hat.shape[1]
    header = (
        ["k", "sigma"]
        + [f"xhat{i}" for i in range(1, n + 1)]
        + ["e_norm"]
        + [f"pi_{J.label}" for J in run.bank.j_subsets]
    )
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    e_norm = run.e_norm
    for k in range(run.x_hat.shape[0]):
        row = [k, run.sigma(k).label]
        row.extend(repr(float(v)) for v in run.x_hat[k])
        row.append("" if e_norm is None else repr(float(e_norm[k])))
        row.extend(repr(float(v)) for v in run.pi[k])
        writer.writerow(row)
