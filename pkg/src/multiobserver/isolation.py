"""Attack isolation from deviation scores.

A subset J whose deviation score stays under a calibrated threshold
behaved like an attack-free bank member; the union of all such J at a
step is a set of sensors exonerated at that step.  Counting, over a
window, how often each sufficiently large union occurs and taking the
majority vote yields a per-window guess of the attack-free set — its
complement is the isolated (suspected) sensor set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

from .combinatorics import BankIndex, SubsetIndex
from .errors import ConfigurationError
from .estimator import EstimatorFrame, EstimatorRun
from .observers import ISSGainModel

__all__ = [
    "ThresholdTable",
    "compute_thresholds",
    "attack_free_union",
    "windowed_isolation",
    "IsolationWindow",
    "IsolationReport",
    "windows_to_csv",
    "steps_to_csv",
]


@dataclass(frozen=True)
class ThresholdTable:
    """Per-J deviation thresholds plus the shared transient horizon.

    ``k_bar_star`` is the step from which every observer's transient
    term has settled (the max of the declared settling steps); scores
    before it are not meaningful for isolation.
    """

    pi_bar: dict[SubsetIndex, float]
    eps: float
    k_bar_star: int

    def __post_init__(self):
        problems = [f"negative threshold for {J.label}" for J, v in self.pi_bar.items() if v < 0]
        if self.k_bar_star < 0:
            problems.append(f"settling step must be >= 0, got {self.k_bar_star}")
        if problems:
            raise ConfigurationError(problems)


def compute_thresholds(
    gains: dict[SubsetIndex, ISSGainModel],
    bank: BankIndex,
    m_bar: float,
    d_bar: float,
    eps: float,
    k_star_override: int | None = None,
) -> ThresholdTable:
    """Thresholds from the declared convergence models.

    The score of an attack-free J is at most the sum of its own error
    and the worst contained cross-check error, each bounded after the
    transient by eps + gamma1*m_bar + gamma2*d_bar + nu.  Taking each
    gain's max over {J} and its cross-checks and doubling gives the
    threshold 2*(eps + g1'*m_bar + g2'*d_bar + nu').  The settling step
    is the max declared k_star over the whole bank, unless overridden
    (e.g. to 0 when observers start at the true state).
    """
    missing = []
    problems = []
    for sub in bank.all_subsets:
        model = gains.get(sub)
        if model is None:
            missing.append(sub.label)
        else:
            problems += [f"{sub.label}: {msg}" for msg in model.validate()]
    if missing:
        problems.append("missing convergence models for " + ", ".join(missing))
    if eps < 0:
        problems.append(f"transient allowance must be nonnegative, got eps={eps}")
    if problems:
        raise ConfigurationError(problems)
    pi_bar = {}
    for J in bank.j_subsets:
        family = (J,) + bank.contained[J]
        g1 = max(gains[t].gamma1 for t in family)
        g2 = max(gains[t].gamma2 for t in family)
        nu = max(gains[t].nu for t in family)
        pi_bar[J] = 2.0 * (eps + g1 * m_bar + g2 * d_bar + nu)
    if k_star_override is not None:
        k_bar_star = int(k_star_override)
    else:
        k_bar_star = max(gains[sub].k_star for sub in bank.all_subsets)
    return ThresholdTable(pi_bar=pi_bar, eps=eps, k_bar_star=k_bar_star)


def attack_free_union(
    pi: dict[SubsetIndex, float], thresholds: ThresholdTable
) -> frozenset[int]:
    """Sensors exonerated at one step: union of all J scoring under threshold."""
    members: set[int] = set()
    for J, score in pi.items():
        if score <= thresholds.pi_bar[J]:
            members.update(J.members)
    return frozenset(members)


@dataclass(frozen=True)
class IsolationWindow:
    """Vote tally and verdict for one isolation window."""

    index: int
    k_start: int
    k_end: int
    counts: dict[tuple[int, ...], int]
    winner: tuple[int, ...] | None
    isolated: tuple[int, ...]
    no_quorum: bool


@dataclass(frozen=True)
class IsolationReport:
    """Per-step unions plus the per-window verdicts."""

    p: int
    window: int
    k_bar_star: int
    step_unions: dict[int, tuple[int, ...]]
    windows: tuple[IsolationWindow, ...]

    def isolated_sets(self) -> list[tuple[int, ...]]:
        return [w.isolated for w in self.windows]


def _pi_stream(frames, bank: BankIndex):
    """Yield (k, pi dict) from an EstimatorRun or a frame iterable."""
    if isinstance(frames, EstimatorRun):
        for k in range(frames.horizon + 1):
            yield k, {J: float(frames.pi[k, j]) for j, J in enumerate(bank.j_subsets)}
    else:
        for frame in frames:
            yield frame.k, frame.pi


def windowed_isolation(
    frames: EstimatorRun | Iterable[EstimatorFrame],
    thresholds: ThresholdTable,
    window: int,
    bank: BankIndex | None = None,
) -> IsolationReport:
    """Vote over consecutive windows of attack-free unions.

    Windows of fixed length start at the table's settling step; a
    partial window at the end of the run is dropped.  Within a window,
    each step whose union has at least p - q members casts a vote for
    that exact member set (the full sensor set included); the most
    frequent set wins, ties to lexicographic order, and its complement
    is reported as isolated.  A window with no votes has no quorum and
    isolates nothing.

    An empty frame stream produces an empty report.
    """
    if window < 1:
        raise ConfigurationError(f"window length must be >= 1, got {window}")
    if isinstance(frames, EstimatorRun):
        bank = frames.bank
    elif bank is None:
        raise ConfigurationError("a bank index is required when passing raw frames")
    for J in bank.j_subsets:
        if J not in thresholds.pi_bar:
            raise ConfigurationError(f"no threshold for subset {J.label}")
    k_bar = thresholds.k_bar_star
    quorum = bank.p - bank.q

    step_unions: dict[int, tuple[int, ...]] = {}
    for k, pi_k in _pi_stream(frames, bank):
        if k >= k_bar:
            step_unions[k] = tuple(sorted(attack_free_union(pi_k, thresholds)))

    all_sensors = tuple(range(1, bank.p + 1))
    last_k = max(step_unions) if step_unions else k_bar - 1
    windows = []
    i = 1
    while k_bar + i * window - 1 <= last_k:
        k_start = k_bar + (i - 1) * window
        k_end = k_bar + i * window - 1
        counts: dict[tuple[int, ...], int] = {}
        for k in range(k_start, k_end + 1):
            union = step_unions.get(k)
            if union is not None and len(union) >= quorum:
                counts[union] = counts.get(union, 0) + 1
        if counts:
            top = max(counts.values())
            winner = min(s for s, c in counts.items() if c == top)
            isolated = tuple(s for s in all_sensors if s not in winner)
            windows.append(
                IsolationWindow(i, k_start, k_end, counts, winner, isolated, False)
            )
        else:
            windows.append(IsolationWindow(i, k_start, k_end, counts, None, (), True))
        i += 1
    return IsolationReport(
        p=bank.p, window=window, k_bar_star=k_bar,
        step_unions=step_unions, windows=tuple(windows),
    )


def _member_str(members) -> str:
    return ",".join(str(i) for i in members)


def windows_to_csv(report: IsolationReport, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["window_i", "k_start", "k_end", "winner_J", "isolated_set", "no_quorum"])
    for w in report.windows:
        writer.writerow([
            w.index, w.k_start, w.k_end,
            "" if w.winner is None else _member_str(w.winner),
            _member_str(w.isolated), int(w.no_quorum),
        ])


def steps_to_csv(report: IsolationReport, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["k", "Wbar"])
    for k in sorted(report.step_unions):
        writer.writerow([k, _member_str(report.step_unions[k])])
