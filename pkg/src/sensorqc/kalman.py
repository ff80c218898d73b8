"""Kalman filtering for :class:`~sensorqc.model.StateSpaceModel`.

The single-step functions :func:`predict` and :func:`update` are written for
clarity. Long streams go through :func:`filter_observations`, which runs the
same recursion in a compiled loop; :func:`run_filter` wraps it to return the
per-step ``(Prediction, FilterState)`` pairs.

Missing observations are handled by dropping the corresponding rows of
``B``, ``sigma_v`` and the observation vector before the update. A step with
nothing observed reduces to pure propagation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .model import StateSpaceModel

_SQRT2 = math.sqrt(2.0)
_SINGULAR_RTOL = 1e-12


class FilterError(RuntimeError):
    """Raised when an update cannot be computed; ``step`` is the failing index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimension(s), got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FilterState:
    """Filtered posterior ``N(f, F)`` of the latent state at timestep ``t``."""

    f: np.ndarray
    F: np.ndarray
    t: int = 0

    def __post_init__(self):
        f = _frozen(self.f, 1, "f")
        F = _frozen(self.F, 2, "F")
        if F.shape != (f.size, f.size):
            raise ValueError(f"F must be {f.size}x{f.size}, got {F.shape}")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "t", int(self.t))

    def __eq__(self, other):
        if not isinstance(other, FilterState):
            return NotImplemented
        return (
            self.t == other.t
            and np.array_equal(self.f, other.f)
            and np.array_equal(self.F, other.F)
        )


@dataclass(frozen=True, eq=False)
class Prediction:
    """One-step-ahead predictive moments, latent and observed.

    ``mu_obs``/``var_obs`` are the primary stream's predictive Gaussian.
    """

    mu_obs: float
    var_obs: float
    mu_latent: np.ndarray
    cov_latent: np.ndarray
    mu_v: np.ndarray
    cov_v: np.ndarray

    @property
    def std_obs(self) -> float:
        return math.sqrt(self.var_obs)


@dataclass(frozen=True)
class ObservationVector:
    """Readings at one timestep; ``None`` marks a missing entry."""

    primary: float | None = None
    secondary: float | None = None

    def as_array(self, V: int) -> np.ndarray:
        if V == 1 and self.secondary is not None:
            raise ValueError("secondary reading given for a single-stream model")
        vals = [self.primary, self.secondary][:V]
        return np.array([np.nan if v is None else float(v) for v in vals])


def predict(state: FilterState, model: StateSpaceModel) -> Prediction:
    A, B = model.A, model.B
    mu_h = A @ state.f
    cov_hh = A @ state.F @ A.T + model.sigma_h
    cov_hh = 0.5 * (cov_hh + cov_hh.T)
    mu_v = B @ mu_h
    cov_vv = B @ cov_hh @ B.T + model.sigma_v
    C = model.C
    return Prediction(
        mu_obs=float(C @ mu_h),
        var_obs=float(C @ cov_hh @ C + model.sigma_v[0, 0]),
        mu_latent=mu_h,
        cov_latent=cov_hh,
        mu_v=mu_v,
        cov_v=cov_vv,
    )


def update(
    state: FilterState,
    model: StateSpaceModel,
    obs: ObservationVector | np.ndarray,
    prediction: Prediction,
    joseph: bool = False,
) -> FilterState:
    v = obs.as_array(model.V) if isinstance(obs, ObservationVector) else np.asarray(obs, float)
    avail = np.flatnonzero(np.isfinite(v))
    step = state.t + 1
    mu_h, cov_hh = prediction.mu_latent, prediction.cov_latent
    if avail.size == 0:
        return FilterState(mu_h, cov_hh, step)

    B = model.B[avail]
    R = model.sigma_v[np.ix_(avail, avail)]
    S = prediction.cov_v[np.ix_(avail, avail)]
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise FilterError("innovation covariance is not positive definite", step) from None
    if np.min(np.diag(chol)) ** 2 <= _SINGULAR_RTOL * np.max(np.diag(S)):
        raise FilterError("innovation covariance is numerically singular", step)

    PBt = cov_hh @ B.T
    # K = PBt S^-1, via two triangular solves on S = L L^T
    K = np.linalg.solve(chol.T, np.linalg.solve(chol, PBt.T)).T
    f = mu_h + K @ (v[avail] - prediction.mu_v[avail])
    if joseph:
        IKB = np.eye(model.H) - K @ B
        F = IKB @ cov_hh @ IKB.T + K @ R @ K.T
    else:
        F = cov_hh - K @ PBt.T
    return FilterState(f, 0.5 * (F + F.T), step)


@njit(cache=True)
def _cholesky(S):
    """Lower Cholesky factor of a small SPD matrix; ``ok`` is False if singular."""
    m = S.shape[0]
    L = np.zeros((m, m))
    smax = 0.0
    for a in range(m):
        smax = max(smax, S[a, a])
    for a in range(m):
        for b in range(a + 1):
            acc = S[a, b]
            for c in range(b):
                acc -= L[a, c] * L[b, c]
            if a == b:
                if acc <= _SINGULAR_RTOL * smax:
                    return L, False
                L[a, a] = math.sqrt(acc)
            else:
                L[a, b] = acc / L[b, b]
    return L, True


@njit(cache=True)
def _cho_solve(L, Y):
    """Solve ``L L^T X = Y`` for ``Y`` of shape (m, k)."""
    m = L.shape[0]
    X = Y.copy()
    for a in range(m):
        for c in range(a):
            X[a] -= L[a, c] * X[c]
        X[a] /= L[a, a]
    for a in range(m - 1, -1, -1):
        for c in range(a + 1, m):
            X[a] -= L[c, a] * X[c]
        X[a] /= L[a, a]
    return X


@njit(cache=True)
def _kalman_kernel(
    A, B, Sh, Sv, f0, F0, obs, gate, gate_threshold, joseph, keep, condition,
    mu_obs, var_obs, mu_test, var_test, used,
    f_hist, F_hist, mh_hist, Shh_hist, mv_hist, Svv_hist,
):
    n = obs.shape[0]
    H = A.shape[0]
    V = B.shape[0]
    f = f0.copy()
    F = F0.copy()
    eye = np.eye(H)
    At = np.ascontiguousarray(A.T)
    Bt = np.ascontiguousarray(B.T)
    idx = np.empty(V, dtype=np.int64)
    oth = np.empty(V, dtype=np.int64)
    for t in range(n):
        mh = A @ f
        Shh = A @ F @ At + Sh
        Shh = 0.5 * (Shh + Shh.T)
        mv = B @ mh
        Svv = B @ Shh @ Bt + Sv
        mu_obs[t] = mv[0]
        var_obs[t] = Svv[0, 0]
        if keep:
            mh_hist[t] = mh
            Shh_hist[t] = Shh
            mv_hist[t] = mv
            Svv_hist[t] = Svv

        # primary predictive given the other streams' readings at this step
        k = 0
        for j in range(1, V if condition else 1):
            if not np.isnan(obs[t, j]):
                oth[k] = j
                k += 1
        mu_test[t] = mv[0]
        var_test[t] = Svv[0, 0]
        if k > 0:
            So = np.empty((k, k))
            cross = np.empty((k, 1))
            resid = np.empty(k)
            for a in range(k):
                cross[a, 0] = Svv[oth[a], 0]
                resid[a] = obs[t, oth[a]] - mv[oth[a]]
                for b in range(k):
                    So[a, b] = Svv[oth[a], oth[b]]
            Lo, ok = _cholesky(So)
            if not ok:
                return t
            w = _cho_solve(Lo, cross)
            for a in range(k):
                mu_test[t] += w[a, 0] * resid[a]
                var_test[t] -= w[a, 0] * cross[a, 0]

        m = 0
        for j in range(V):
            if np.isnan(obs[t, j]):
                continue
            if j == 0 and gate[t]:
                z = (obs[t, 0] - mu_test[t]) / math.sqrt(var_test[t])
                if math.erfc(abs(z) / _SQRT2) < gate_threshold:
                    continue
            idx[m] = j
            m += 1
        for j in range(m):
            used[t, idx[j]] = True

        if m == 0:
            f = mh
            F = Shh.copy()
        else:
            Br = np.empty((m, H))
            S = np.empty((m, m))
            R = np.empty((m, m))
            innov = np.empty(m)
            for a in range(m):
                Br[a] = B[idx[a]]
                innov[a] = obs[t, idx[a]] - mv[idx[a]]
                for b in range(m):
                    S[a, b] = Svv[idx[a], idx[b]]
                    R[a, b] = Sv[idx[a], idx[b]]
            L, ok = _cholesky(S)
            if not ok:
                return t
            PBt = Shh @ np.ascontiguousarray(Br.T)
            Kt = _cho_solve(L, np.ascontiguousarray(PBt.T))
            K = np.ascontiguousarray(Kt.T)
            f = mh + K @ innov
            if joseph:
                IKB = eye - K @ Br
                F = IKB @ Shh @ np.ascontiguousarray(IKB.T) + K @ R @ Kt
            else:
                F = Shh - K @ np.ascontiguousarray(PBt.T)
            F = 0.5 * (F + F.T)
        if keep:
            f_hist[t] = f
            F_hist[t] = F
    if n > 0 and not keep:
        f_hist[0] = f
        F_hist[0] = F
    return -1


@dataclass(frozen=True, eq=False)
class FilterRun:
    """Output of :func:`filter_observations`.

    ``mu_obs``/``var_obs`` are the one-step predictive moments of the primary
    stream. ``mu_test``/``var_test`` additionally condition on the other
    streams' readings at the same step (identical when there are none);
    the primary reading itself never enters them. ``assimilated`` is an ``(n, V)`` mask of the readings that entered the
    update (gaps and gated suspects are False). The ``*_history`` arrays are
    only populated when requested.
    """

    mu_obs: np.ndarray
    var_obs: np.ndarray
    mu_test: np.ndarray
    var_test: np.ndarray
    assimilated: np.ndarray
    final_state: FilterState
    filtered_means: np.ndarray | None = None
    filtered_covs: np.ndarray | None = None
    latent_means: np.ndarray | None = None
    latent_covs: np.ndarray | None = None
    obs_means: np.ndarray | None = None
    obs_covs: np.ndarray | None = None

    @property
    def std_obs(self) -> np.ndarray:
        return np.sqrt(self.var_obs)

    def prediction(self, i: int) -> Prediction:
        if self.latent_means is None:
            raise ValueError("run was made without keep_history")
        return Prediction(
            mu_obs=float(self.mu_obs[i]),
            var_obs=float(self.var_obs[i]),
            mu_latent=self.latent_means[i],
            cov_latent=self.latent_covs[i],
            mu_v=self.obs_means[i],
            cov_v=self.obs_covs[i],
        )


def as_observation_array(stream, V: int) -> np.ndarray:
    """Convert ObservationVectors or an array-like to an ``(n, V)`` float array."""
    if isinstance(stream, np.ndarray) and stream.dtype != object:
        arr = np.asarray(stream, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] != V:
            raise ValueError(f"observation array must have shape (n, {V}), got {arr.shape}")
        return arr
    rows = [o.as_array(V) if isinstance(o, ObservationVector) else np.asarray(o, float) for o in stream]
    if not rows:
        return np.empty((0, V))
    return np.vstack(rows).reshape(len(rows), V)


def filter_observations(
    initial: FilterState,
    model: StateSpaceModel,
    observations,
    *,
    gate_mask=None,
    gate_threshold: float | None = None,
    joseph: bool = False,
    keep_history: bool = False,
    condition_on_secondary: bool = True,
) -> FilterRun:
    """Filter a block of observations starting from ``initial``.

    Row ``i`` of ``observations`` (NaN for a gap) is assimilated at timestep
    ``initial.t + i + 1``. With ``condition_on_secondary=False`` the test
    moments equal the plain one-step prediction. When ``gate_threshold`` is given, primary readings
    at ``gate_mask`` positions whose two-sided p-value against the test
    moments is below the threshold are left out of the update.
    """
    obs = np.ascontiguousarray(as_observation_array(observations, model.V))
    n, H, V = obs.shape[0], model.H, model.V
    if initial.f.size != H:
        raise ValueError(f"state dimension {initial.f.size} does not match model H={H}")
    if gate_threshold is None:
        gate = np.zeros(n, dtype=np.bool_)
        threshold = 0.0
    else:
        gate = np.ones(n, dtype=np.bool_) if gate_mask is None else np.asarray(gate_mask, dtype=np.bool_)
        if gate.shape != (n,):
            raise ValueError("gate_mask must have one entry per timestep")
        threshold = float(gate_threshold)

    mu_obs = np.empty(n)
    var_obs = np.empty(n)
    mu_test = np.empty(n)
    var_test = np.empty(n)
    used = np.zeros((n, V), dtype=np.bool_)
    k = n if keep_history else 0
    f_hist = np.empty((max(k, 1), H))
    F_hist = np.empty((max(k, 1), H, H))
    mh_hist = np.empty((k, H))
    Shh_hist = np.empty((k, H, H))
    mv_hist = np.empty((k, V))
    Svv_hist = np.empty((k, V, V))

    status = _kalman_kernel(
        np.ascontiguousarray(model.A), np.ascontiguousarray(model.B),
        np.ascontiguousarray(model.sigma_h), np.ascontiguousarray(model.sigma_v),
        np.array(initial.f), np.array(initial.F), obs, gate, threshold,
        bool(joseph), bool(keep_history), bool(condition_on_secondary),
        mu_obs, var_obs, mu_test, var_test, used, f_hist, F_hist, mh_hist, Shh_hist, mv_hist, Svv_hist,
    )
    if status >= 0:
        raise FilterError("innovation covariance is numerically singular", initial.t + status + 1)

    if n == 0:
        final = initial
    else:
        last = n - 1 if keep_history else 0
        final = FilterState(f_hist[last], F_hist[last], initial.t + n)
    if not keep_history:
        return FilterRun(mu_obs, var_obs, mu_test, var_test, used, final)
    return FilterRun(
        mu_obs, var_obs, mu_test, var_test, used, final,
        filtered_means=f_hist, filtered_covs=F_hist,
        latent_means=mh_hist, latent_covs=Shh_hist,
        obs_means=mv_hist, obs_covs=Svv_hist,
    )


def run_filter(
    initial: FilterState,
    model: StateSpaceModel,
    stream: Sequence[ObservationVector] | np.ndarray,
    *,
    joseph: bool = False,
) -> list[tuple[Prediction, FilterState]]:
    """Per-step pre-update predictions and post-update states."""
    out = filter_observations(initial, model, stream, joseph=joseph, keep_history=True)
    return [
        (out.prediction(i), FilterState(out.filtered_means[i], out.filtered_covs[i], initial.t + i + 1))
        for i in range(out.mu_obs.size)
    ]
