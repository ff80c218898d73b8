"""Dynamic linear model with a local level and a free-form diurnal seasonal.

The latent state is ``h = [level, s_t, s_{t-1}, ..., s_{t-tau+2}]``: one level
and ``tau - 1`` seasonal effects, newest first. Every observed stream (station
sensor and, optionally, a forecast feed) measures ``level + s_t``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace

import numpy as np

SELECTOR_MODES = ("all", "daily_min", "daily_max", "fixed_hours")
NOISE_STRUCTURES = ("components", "isotropic")


@dataclass(frozen=True)
class ModelConfig:
    """Model and run configuration.

    Defaults: a 24 h period, process noise at 0.8 of the smallest
    observation variance, a prior covariance five times the process noise
    and a 0.1 two-sided p-value threshold.

    ``process_noise_structure`` selects where that process noise enters.
    ``"components"`` disturbs only the level and the newest seasonal effect
    (the shifted copies are exact delays). ``"isotropic"`` adds it to every
    state; the seasonal sum then accumulates the delayed copies' noise and
    the predictive spread grows to roughly seven times the observation noise.

    With ``condition_on_secondary`` a primary reading is tested against its
    prediction given everything before it plus the forecast reading at the
    same hour; otherwise against the plain one-step prediction.
    """

    period_tau: int = 24
    stream_count: int = 1
    process_noise_scale: float = 0.8
    process_noise_structure: str = "components"
    prior_cov_scale: float = 5.0
    p_threshold: float = 0.1
    tpws_noise_floor: float = 0.7
    nwp_noise_multiplier: float = 1.5
    seasonal_demean: bool = True
    reject_suspects_from_update: bool = False
    condition_on_secondary: bool = True
    joseph_form: bool = False
    calibration_days: int = 28
    utc_offset_hours: float = 0.0
    test_selector: str = "all"
    test_hours: tuple[int, ...] = (9, 15)

    def __post_init__(self):
        if int(self.period_tau) != self.period_tau or self.period_tau < 2:
            raise ValueError(f"period_tau must be an integer >= 2, got {self.period_tau}")
        if self.stream_count not in (1, 2):
            raise ValueError(f"stream_count must be 1 or 2, got {self.stream_count}")
        if not 0.0 < self.p_threshold < 1.0:
            raise ValueError(f"p_threshold must lie in (0, 1), got {self.p_threshold}")
        if self.process_noise_scale <= 0 or self.prior_cov_scale <= 0:
            raise ValueError("process_noise_scale and prior_cov_scale must be positive")
        if self.process_noise_structure not in NOISE_STRUCTURES:
            raise ValueError(
                f"process_noise_structure must be one of {NOISE_STRUCTURES}, "
                f"got {self.process_noise_structure!r}"
            )
        if self.tpws_noise_floor <= 0 or self.nwp_noise_multiplier <= 0:
            raise ValueError("noise floors must be positive")
        if self.calibration_days < 2:
            raise ValueError("calibration_days must be >= 2")
        if self.test_selector not in SELECTOR_MODES:
            raise ValueError(
                f"test_selector must be one of {SELECTOR_MODES}, got {self.test_selector!r}"
            )
        if any(not 0 <= h < 24 for h in self.test_hours):
            raise ValueError(f"test_hours must be hours of day, got {self.test_hours}")

    @property
    def calibration_length(self) -> int:
        """Calibration window length T in hourly samples."""
        return self.calibration_days * 24

    def with_overrides(self, **overrides) -> "ModelConfig":
        """Return a copy with the non-None entries of ``overrides`` applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class NoiseEstimate:
    """Per-stream observation noise standard deviations after flooring.

    ``raw_x``/``raw_y`` keep the unfloored filter output so callers can tell
    whether a floor fired.
    """

    epsilon_x: float
    epsilon_y: float | None = None
    raw_x: float | None = None
    raw_y: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.epsilon_x) or self.epsilon_x <= 0:
            raise ValueError(f"epsilon_x must be positive, got {self.epsilon_x}")
        if self.epsilon_y is not None and (
            not np.isfinite(self.epsilon_y) or self.epsilon_y <= 0
        ):
            raise ValueError(f"epsilon_y must be positive, got {self.epsilon_y}")

    @property
    def stream_count(self) -> int:
        return 1 if self.epsilon_y is None else 2

    @property
    def floor_x_active(self) -> bool:
        return self.raw_x is not None and self.raw_x < self.epsilon_x

    @property
    def floor_y_active(self) -> bool:
        return self.raw_y is not None and self.epsilon_y is not None and self.raw_y < self.epsilon_y

    def check_floors(self, config: ModelConfig) -> None:
        """Raise if the estimate violates the floors configured in ``config``."""
        if self.epsilon_x < config.tpws_noise_floor:
            raise ValueError(
                f"epsilon_x={self.epsilon_x} below floor {config.tpws_noise_floor}"
            )
        if self.epsilon_y is not None and self.epsilon_y < config.nwp_noise_multiplier * self.epsilon_x:
            raise ValueError(
                f"epsilon_y={self.epsilon_y} below {config.nwp_noise_multiplier} x epsilon_x"
            )

    def variances(self) -> np.ndarray:
        eps = [self.epsilon_x] if self.epsilon_y is None else [self.epsilon_x, self.epsilon_y]
        return np.square(np.asarray(eps, dtype=float))


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Dense linear-Gaussian state-space model ``h' = A h + w``, ``v = B h + e``.

    ``C`` (the observation-space row used for reporting) is the first row of
    ``B``. Arrays are copied and made read-only on construction.
    """

    A: np.ndarray
    B: np.ndarray
    sigma_h: np.ndarray
    sigma_v: np.ndarray
    period_tau: int | None = None
    _hash: str = field(init=False, repr=False)

    def __post_init__(self):
        mats = {}
        for name in ("A", "B", "sigma_h", "sigma_v"):
            m = np.array(getattr(self, name), dtype=float, copy=True)
            if m.ndim != 2:
                raise ValueError(f"{name} must be a 2-D matrix, got shape {m.shape}")
            m.setflags(write=False)
            mats[name] = m
            object.__setattr__(self, name, m)
        H = mats["A"].shape[0]
        V = mats["B"].shape[0]
        if mats["A"].shape != (H, H):
            raise ValueError(f"A must be square, got {mats['A'].shape}")
        if mats["B"].shape != (V, H):
            raise ValueError(f"B must be V x {H}, got {mats['B'].shape}")
        if mats["sigma_h"].shape != (H, H) or mats["sigma_v"].shape != (V, V):
            raise ValueError("noise covariance shapes do not match A and B")
        for name in ("sigma_h", "sigma_v"):
            m = mats[name]
            if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
                raise ValueError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(mats["sigma_v"]).min() <= 0:
            raise ValueError("sigma_v must be positive definite")
        # eigenvalues of a rank-deficient product come out at -1e-17 or so
        if np.linalg.eigvalsh(mats["sigma_h"]).min() < -1e-12 * max(1.0, np.abs(mats["sigma_h"]).max()):
            raise ValueError("sigma_h must be positive semi-definite")
        digest = hashlib.sha256()
        for name in ("A", "B", "sigma_h", "sigma_v"):
            m = np.ascontiguousarray(mats[name])
            digest.update(name.encode())
            digest.update(np.asarray(m.shape, dtype=np.int64).tobytes())
            digest.update(m.astype("<f8").tobytes())
        object.__setattr__(self, "_hash", digest.hexdigest())

    @property
    def H(self) -> int:
        return self.A.shape[0]

    @property
    def V(self) -> int:
        return self.B.shape[0]

    @property
    def C(self) -> np.ndarray:
        return self.B[0]

    @property
    def model_hash(self) -> str:
        """SHA-256 over the model matrices; used to validate state snapshots."""
        return self._hash


def build_transition_matrix(period_tau: int) -> np.ndarray:
    """Local-level plus free-form seasonal transition matrix of size tau x tau.

    >>> build_transition_matrix(3)
    array([[ 1.,  0.,  0.],
           [ 0., -1., -1.],
           [ 0.,  1.,  0.]])
    """
    if int(period_tau) != period_tau or period_tau < 2:
        raise ValueError(f"period_tau must be an integer >= 2, got {period_tau}")
    H = int(period_tau)
    A = np.zeros((H, H))
    A[0, 0] = 1.0
    A[1, 1:] = -1.0
    for i in range(2, H):
        A[i, i - 1] = 1.0
    return A


def build_measurement_matrix(stream_count: int, H: int) -> np.ndarray:
    """Every stream observes level plus the current seasonal effect."""
    if stream_count not in (1, 2):
        raise ValueError(f"stream_count must be 1 or 2, got {stream_count}")
    if H < 2:
        raise ValueError(f"H must be >= 2, got {H}")
    B = np.zeros((stream_count, H))
    B[:, :2] = 1.0
    return B


def assemble_model(config: ModelConfig, noise: NoiseEstimate) -> StateSpaceModel:
    if noise.stream_count != config.stream_count:
        raise ValueError(
            f"config expects {config.stream_count} stream(s) but the noise estimate "
            f"has {noise.stream_count}"
        )
    noise.check_floors(config)
    H = config.period_tau
    variances = noise.variances()
    sigma_v = np.diag(variances)
    q = config.process_noise_scale * variances.min()
    if config.process_noise_structure == "isotropic":
        sigma_h = q * np.eye(H)
    else:
        sigma_h = np.zeros((H, H))
        sigma_h[0, 0] = sigma_h[1, 1] = q
    return StateSpaceModel(
        A=build_transition_matrix(H),
        B=build_measurement_matrix(config.stream_count, H),
        sigma_h=sigma_h,
        sigma_v=sigma_v,
        period_tau=H,
    )
