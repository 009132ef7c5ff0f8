"""Observer families, their certificates, and the bank container.

Every observer estimates the full plant state from one sensor subset.
All families share a one-step schedule: after y(k+1) is measured, the
bank produces x_hat(k+1) for every subset.  ``step`` therefore receives
both y_J(k) and y_J(k+1); families that only need one of them ignore
the other, which keeps estimates from different families aligned on
the same time index.

A diverged observer (non-finite internal state) is never fatal: it
keeps returning a NaN estimate and the selection stage discounts it.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .combinatorics import SubsetIndex
from .errors import ConfigurationError
from .model import CircleStructure, PlantModel, ReducedStructure

__all__ = [
    "ISSGainModel",
    "Observer",
    "LuenbergerObserver",
    "ReducedOrderObserver",
    "CircleCriterionObserver",
    "ObserverBank",
    "observer_step",
    "build_reduced_observer",
    "certify_linear_gain",
    "check_slope_condition",
    "CertificateResult",
    "SlopeCheckResult",
]


@dataclass(frozen=True)
class ISSGainModel:
    """Declared convergence behaviour of one observer.

    The error obeys |e(k)| <= c * lam**k * |e(0)| + gamma1 * m_bar +
    gamma2 * d_bar + nu on the operating region, with ``k_star`` the
    declared settling step of the transient term.  ``nu`` > 0 marks a
    practical (biased) observer; the gamma terms are kept linear in the
    bounds, which is all the examples need.
    """

    c: float
    lam: float
    gamma1: float = 0.0
    gamma2: float = 0.0
    nu: float = 0.0
    k_star: int = 0

    def validate(self) -> list[str]:
        problems = []
        if not self.c >= 1.0:
            problems.append(f"overshoot constant must be >= 1, got c={self.c}")
        if not 0.0 < self.lam < 1.0:
            problems.append(f"decay rate must lie in (0, 1), got lam={self.lam}")
        for name in ("gamma1", "gamma2", "nu"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.k_star < 0:
            problems.append(f"k_star must be nonnegative, got {self.k_star}")
        return problems

    def steady_bound(self, m_bar: float, d_bar: float) -> float:
        """Post-transient error bound gamma1*m_bar + gamma2*d_bar + nu."""
        return self.gamma1 * m_bar + self.gamma2 * d_bar + self.nu

    def transient_bound(self, e0: float, k: int) -> float:
        return self.c * self.lam**k * e0


class Observer(ABC):
    """Interface every observer family implements.

    ``reset`` installs the initial estimate (given a prior guess of
    x(0) plus the first measurement) and returns x_hat(0); ``step``
    advances one step and returns x_hat(k+1).
    """

    subset: SubsetIndex
    n: int
    iss: ISSGainModel | None

    def __init__(self, subset: SubsetIndex, n: int, iss: ISSGainModel | None = None):
        self.subset = subset
        self.n = n
        self.iss = iss
        self.diverged = False

    @abstractmethod
    def reset(self, x0_est: np.ndarray, y0_J: np.ndarray, u0: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def step(self, y_J: np.ndarray, y_next_J: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    def _finalize(self, estimate: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(estimate)):
            self.diverged = True
        return estimate

    def _nan(self) -> np.ndarray:
        return np.full(self.n, np.nan)


def observer_step(
    obs: Observer, y_J: np.ndarray, y_next_J: np.ndarray, u: np.ndarray
) -> tuple[Observer, np.ndarray]:
    """Functional wrapper over :meth:`Observer.step`."""
    return obs, obs.step(y_J, y_next_J, u)


class LuenbergerObserver(Observer):
    """Full-order copy of the plant with output-injection gain K.

    x_hat(k+1) = f(x_hat(k), u(k)) + K (y_J(k) - h_J(x_hat(k), u(k))).
    Convergence is a local property around the plant's operating
    region; the gain is certified against the linearization.
    """

    def __init__(
        self,
        subset: SubsetIndex,
        f: Callable[[np.ndarray, np.ndarray, np.ndarray, int], np.ndarray],
        h: Callable[[np.ndarray, np.ndarray], np.ndarray],
        K: np.ndarray,
        n: int,
        n_d: int = 0,
        iss: ISSGainModel | None = None,
    ):
        super().__init__(subset, n, iss)
        self.f = f
        self.h = h
        self.K = np.asarray(K, dtype=float)
        if self.K.shape != (n, len(subset)):
            raise ConfigurationError(
                f"gain for {subset} has shape {self.K.shape}, expected ({n}, {len(subset)})"
            )
        self._idx = np.asarray(subset.members, dtype=int) - 1
        self._d0 = np.zeros(n_d)
        self._x_hat = np.zeros(n)
        self._k = 0

    @property
    def estimate(self) -> np.ndarray:
        return self._x_hat.copy()

    def reset(self, x0_est, y0_J, u0):
        self._x_hat = np.asarray(x0_est, dtype=float).copy()
        self._k = 0
        self.diverged = False
        return self._finalize(self._x_hat.copy())

    def step(self, y_J, y_next_J, u):
        if self.diverged:
            return self._nan()
        with np.errstate(over="ignore", invalid="ignore"):
            h_hat = np.asarray(self.h(self._x_hat, u), dtype=float)[self._idx]
            x_next = self.f(self._x_hat, u, self._d0, self._k) + self.K @ (y_J - h_hat)
        self._k += 1
        self._x_hat = np.asarray(x_next, dtype=float)
        return self._finalize(self._x_hat.copy())


class ReducedOrderObserver(Observer):
    """Observer in partial coordinates z = L x for plants x+ = A x + g(x, u).

    With T = [L; C_J] invertible and (N, M) the blocks of T^-1, the
    update integrates the z-dynamics and rebuilds the estimate from the
    newest measurement:

        z(k+1)      = (A_L - K C_eq) z(k) + (B_L + K ...) terms via the
                      innovation y_J(k+1) - C_J x_pred(k+1),
        x_hat(k+1)  = N z(k+1) + M y_J(k+1),

    where x_pred(k+1) = A x_hat(k) + g(x_hat(k), u(k)) is the one-step
    prediction through the plant map and A_L = L A N, B_L = L A M.
    Correcting z against the predicted output keeps K meaningful: the
    reconstruction itself already matches y_J(k+1) exactly.
    """

    def __init__(
        self,
        subset: SubsetIndex,
        structure: ReducedStructure,
        L: np.ndarray,
        K: np.ndarray | None = None,
        iss: ISSGainModel | None = None,
    ):
        n = structure.A.shape[0]
        super().__init__(subset, n, iss)
        self.structure = structure
        self.L = np.asarray(L, dtype=float)
        card = len(subset)
        self.nz = n - card
        if self.L.shape != (self.nz, n):
            raise ConfigurationError(
                f"coordinate map for {subset} has shape {self.L.shape}, "
                f"expected ({self.nz}, {n})"
            )
        self._idx = np.asarray(subset.members, dtype=int) - 1
        self.C_J = structure.C[self._idx]
        T = np.vstack([self.L, self.C_J])
        try:
            T_inv = np.linalg.inv(T)
        except np.linalg.LinAlgError:
            raise ConfigurationError(
                f"[L; C_J] is singular for {subset}; pick rows completing C_J to a basis"
            ) from None
        self.N = T_inv[:, : self.nz]
        self.M = T_inv[:, self.nz :]
        self.A_L = self.L @ structure.A @ self.N
        self.B_L = self.L @ structure.A @ self.M
        self.K = (
            np.zeros((self.nz, card)) if K is None else np.asarray(K, dtype=float)
        )
        if self.K.shape != (self.nz, card):
            raise ConfigurationError(
                f"innovation gain for {subset} has shape {self.K.shape}, "
                f"expected ({self.nz}, {card})"
            )
        self._z = np.zeros(self.nz)
        self._x_hat = np.zeros(n)

    @property
    def z(self) -> np.ndarray:
        return self._z.copy()

    @property
    def estimate(self) -> np.ndarray:
        return self._x_hat.copy()

    def reset(self, x0_est, y0_J, u0):
        self._z = self.L @ np.asarray(x0_est, dtype=float)
        self._x_hat = self.N @ self._z + self.M @ y0_J
        self.diverged = False
        return self._finalize(self._x_hat.copy())

    def step(self, y_J, y_next_J, u):
        if self.diverged:
            return self._nan()
        st = self.structure
        with np.errstate(over="ignore", invalid="ignore"):
            x_hat = self._x_hat
            g_val = st.g(x_hat, u)
            z_pred = self.A_L @ self._z + self.B_L @ y_J + self.L @ g_val
            x_pred = st.A @ x_hat + g_val
            self._z = z_pred + self.K @ (y_next_J - self.C_J @ x_pred)
            self._x_hat = self.N @ self._z + self.M @ y_next_J
        return self._finalize(self._x_hat.copy())


def build_reduced_observer(
    structure: ReducedStructure,
    subset: SubsetIndex,
    L: np.ndarray,
    K: np.ndarray | None = None,
    iss: ISSGainModel | None = None,
    rng: np.random.Generator | None = None,
    tol: float = 1e-8,
) -> ReducedOrderObserver:
    """Construct a reduced-order observer and check its coordinate change.

    After inverting [L; C_J] the reconstruction N (L v) + M (C_J v) = v
    is verified on n random vectors to ``tol``; failure means the
    inverse is too ill-conditioned to trust.
    """
    obs = ReducedOrderObserver(subset, structure, L, K, iss)
    rng = rng or np.random.default_rng(0)
    n = structure.A.shape[0]
    for _ in range(n):
        v = rng.standard_normal(n)
        rebuilt = obs.N @ (obs.L @ v) + obs.M @ (obs.C_J @ v)
        err = float(np.max(np.abs(rebuilt - v)))
        if err > tol:
            raise ConfigurationError(
                f"coordinate reconstruction for {subset} off by {err:.2e} (tol {tol:.0e}); "
                f"[L; C_J] is numerically singular"
            )
    return obs


class CircleCriterionObserver(Observer):
    """Observer for x+ = A x + G f(H x) + rho with slope-restricted f.

    x_hat(k+1) = A x_hat + G f(H x_hat + K (C_J x_hat - y_J(k)))
                 + L (C_J x_hat - y_J(k)) + rho(u, y_J).
    Feeding the innovation into the nonlinearity (via K) is what lets a
    nondecreasing f help rather than hurt convergence.
    """

    def __init__(
        self,
        subset: SubsetIndex,
        structure: CircleStructure,
        K: np.ndarray,
        L: np.ndarray,
        iss: ISSGainModel | None = None,
    ):
        n = structure.A.shape[0]
        super().__init__(subset, n, iss)
        self.structure = structure
        card = len(subset)
        r = structure.H.shape[0]
        self.K = np.asarray(K, dtype=float)
        self.L = np.asarray(L, dtype=float)
        if self.K.shape != (r, card):
            raise ConfigurationError(
                f"nonlinearity gain for {subset} has shape {self.K.shape}, expected ({r}, {card})"
            )
        if self.L.shape != (n, card):
            raise ConfigurationError(
                f"output gain for {subset} has shape {self.L.shape}, expected ({n}, {card})"
            )
        self._idx = np.asarray(subset.members, dtype=int) - 1
        self.C_J = structure.C[self._idx]
        self._x_hat = np.zeros(n)

    @property
    def estimate(self) -> np.ndarray:
        return self._x_hat.copy()

    def reset(self, x0_est, y0_J, u0):
        self._x_hat = np.asarray(x0_est, dtype=float).copy()
        self.diverged = False
        return self._finalize(self._x_hat.copy())

    def step(self, y_J, y_next_J, u):
        if self.diverged:
            return self._nan()
        st = self.structure
        with np.errstate(over="ignore", invalid="ignore"):
            innov = self.C_J @ self._x_hat - y_J
            arg = st.H @ self._x_hat + self.K @ innov
            x_next = st.A @ self._x_hat + st.G @ st.channels(arg) + self.L @ innov
            if st.rho is not None:
                x_next = x_next + st.rho(u, y_J)
        self._x_hat = np.asarray(x_next, dtype=float)
        return self._finalize(self._x_hat.copy())


@dataclass(frozen=True)
class CertificateResult:
    spectral_radius: float
    passed: bool
    margin: float


def certify_linear_gain(
    A: np.ndarray, C_J: np.ndarray, gain: np.ndarray, kind: str, margin: float = 1e-3
) -> CertificateResult:
    """Spectral-radius certificate for the linear part of the error loop.

    kind ``"luenberger"``/``"reduced"`` checks rho(A - gain C_J) — for
    the reduced family pass the partial-coordinate matrices.  kind
    ``"circle"`` checks rho(A + gain C_J), matching that family's
    correction sign.  Passing means the radius clears 1 by ``margin``.
    """
    A = np.asarray(A, dtype=float)
    C_J = np.asarray(C_J, dtype=float)
    gain = np.asarray(gain, dtype=float)
    if kind in ("luenberger", "reduced"):
        closed = A - gain @ C_J
    elif kind == "circle":
        closed = A + gain @ C_J
    else:
        raise ConfigurationError(f"unknown certificate kind {kind!r}")
    rho = float(np.max(np.abs(np.linalg.eigvals(closed))))
    return CertificateResult(rho, rho < 1.0 - margin, margin)


@dataclass(frozen=True)
class SlopeCheckResult:
    passed: bool
    worst_quotient: float
    witness: tuple[float, float] | None


def check_slope_condition(
    channel: Callable[[np.ndarray], np.ndarray],
    box: tuple[float, float],
    samples: int = 100_000,
    seed: int = 0,
    tol: float = -1e-12,
) -> SlopeCheckResult:
    """Monte-Carlo check that a scalar channel is nondecreasing on a box.

    Samples pairs (v, w) from the box and requires every difference
    quotient (f(v) - f(w)) / (v - w) to clear ``tol``; a violating pair
    is returned as the witness.
    """
    lo, hi = box
    if not lo < hi:
        raise ConfigurationError(f"slope-check box must have lo < hi, got ({lo}, {hi})")
    rng = np.random.default_rng(seed)
    v = rng.uniform(lo, hi, size=samples)
    w = rng.uniform(lo, hi, size=samples)
    keep = v != w
    v, w = v[keep], w[keep]
    quotients = (np.asarray(channel(v)) - np.asarray(channel(w))) / (v - w)
    worst = int(np.argmin(quotients))
    worst_q = float(quotients[worst])
    if worst_q < tol:
        return SlopeCheckResult(False, worst_q, (float(v[worst]), float(w[worst])))
    return SlopeCheckResult(True, worst_q, None)


class ObserverBank:
    """All observers of a run, keyed by subset, stepped in lockstep."""

    def __init__(self, observers: dict[SubsetIndex, Observer]):
        if not observers:
            raise ConfigurationError("observer bank is empty")
        self.observers = dict(observers)
        dims = {obs.n for obs in observers.values()}
        if len(dims) != 1:
            raise ConfigurationError(f"observers disagree on state dimension: {sorted(dims)}")
        self.n = dims.pop()
        self.subsets = tuple(observers.keys())

    def __len__(self) -> int:
        return len(self.observers)

    def __getitem__(self, subset: SubsetIndex) -> Observer:
        return self.observers[subset]

    def items(self) -> Iterator[tuple[SubsetIndex, Observer]]:
        return iter(self.observers.items())

    def run(self, y: np.ndarray, u: np.ndarray, x0_est: np.ndarray) -> np.ndarray:
        """Estimates for the whole run: array of shape (len(bank), T+1, n).

        Homogeneous circle-criterion banks take a vectorized path; the
        result is identical to stepping each observer individually.
        """
        if self._vectorizable():
            return self._run_circle_vectorized(y, u, x0_est)
        T = y.shape[0] - 1
        est = np.full((len(self.observers), T + 1, self.n), np.nan)
        for j, (subset, obs) in enumerate(self.observers.items()):
            idx = np.asarray(subset.members, dtype=int) - 1
            est[j, 0] = obs.reset(x0_est, y[0, idx], u[0])
            for k in range(T):
                est[j, k + 1] = obs.step(y[k, idx], y[k + 1, idx], u[k])
        return est

    def _vectorizable(self) -> bool:
        obs = list(self.observers.values())
        return all(isinstance(o, CircleCriterionObserver) for o in obs) and all(
            o.structure is obs[0].structure and o.structure.rho is None for o in obs
        )

    def _run_circle_vectorized(self, y, u, x0_est):
        first = next(iter(self.observers.values()))
        st = first.structure
        n, r, p = self.n, st.H.shape[0], st.C.shape[0]
        nobs = len(self.observers)
        AQ = np.empty((nobs, n, n))
        HP = np.empty((nobs, r, n))
        Lt = np.zeros((nobs, n, p))
        Kt = np.zeros((nobs, r, p))
        for j, (subset, obs) in enumerate(self.observers.items()):
            idx = np.asarray(subset.members, dtype=int) - 1
            AQ[j] = st.A + obs.L @ obs.C_J
            HP[j] = st.H + obs.K @ obs.C_J
            Lt[j][:, idx] = obs.L
            Kt[j][:, idx] = obs.K
        T = y.shape[0] - 1
        est = np.empty((nobs, T + 1, n))
        X = np.broadcast_to(np.asarray(x0_est, dtype=float), (nobs, n)).copy()
        est[:, 0] = X
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(T):
                arg = np.einsum("jrn,jn->jr", HP, X) - Kt @ y[k]
                X = np.einsum("jmn,jn->jm", AQ, X) + st.channels(arg) @ st.G.T - Lt @ y[k]
                est[:, k + 1] = X
        # Keep the per-observer divergence flags in sync with the loop path.
        for j, obs in enumerate(self.observers.values()):
            obs._x_hat = est[j, -1].copy()
            obs.diverged = not np.all(np.isfinite(est[j]))
        return est


def subset_output_slice(model: PlantModel, subset: SubsetIndex):
    """Closure returning the subset's rows of the plant output map."""
    idx = np.asarray(subset.members, dtype=int) - 1

    def h_J(x, u):
        return np.asarray(model.h(x, u), dtype=float)[idx]

    return h_J
