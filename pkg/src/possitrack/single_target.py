"""Single-system detection and tracking with possibility functions.

The state space is extended with one extra point meaning "no system present".
A filtering state is therefore a scalar possibility mass for absence plus a
max-mixture over the usual state space; at least one of the two reaches 1
after every update (something must be fully possible).

The recursion never needs the false-positive rate: with the "no knowledge"
clutter model every observation set is fully possible, and false positives
are absorbed by branch bookkeeping instead of an explicit clutter density.
Appearance can be described either by an explicit mixture or as
observation-driven, in which case a flat term over the state space is carried
and turned into a Gaussian component the first time an observation meets it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .mixtures import (
    GaussianPossibility,
    MaxMixture,
    NumericalError,
    _as_matrix,
    _require_psd,
    batch_kalman_update,
    dominance_reduce,
    merge,
    predict_gaussian,
    prune,
    stack_components,
)

__all__ = [
    "ClutterModel",
    "ObservationDrivenBirth",
    "ExplicitBirth",
    "SingleTargetParams",
    "ExtendedPossibility",
    "canonicalize_observations",
    "clutter_possibility",
    "materialize_birth",
    "predict",
    "update",
    "estimate",
    "step",
]


@dataclass(frozen=True)
class ClutterModel:
    """Possibility description of the false-positive set.

    ``card`` maps a count to the possibility of that many false positives;
    ``spatial`` maps one observation to the possibility of its location.
    Both default to None, meaning total ignorance: any finite observation set
    has possibility 1.
    """

    card: Callable[[int], float] | None = None
    spatial: Callable[[np.ndarray], float] | None = None

    @staticmethod
    def no_knowledge() -> "ClutterModel":
        return ClutterModel()


@dataclass(frozen=True)
class ObservationDrivenBirth:
    """Appearance anywhere on the state space, located only once observed.

    Unobserved coordinates (e.g. velocity) get an independent Gaussian
    possibility prior with standard deviation ``velocity_std``.
    """

    velocity_std: float = 1.0

    def __post_init__(self):
        if not self.velocity_std > 0.0:
            raise ValueError("velocity_std must be > 0")


@dataclass(frozen=True)
class ExplicitBirth:
    """Appearance described by a fixed Gaussian max-mixture."""

    components: tuple[GaussianPossibility, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("explicit birth needs at least one component")
        object.__setattr__(self, "components", comps)


BirthModel = ObservationDrivenBirth | ExplicitBirth


@dataclass(frozen=True)
class SingleTargetParams:
    """Model matrices and possibility parameters of the single-system filter.

    survival / disappearance are the possibilities of the system staying on
    the state space vs. leaving it; their max must be 1.  remain_absent is
    the possibility of staying absent, missed_detection the possibility of a
    detection failure while present.
    """

    trans: np.ndarray
    trans_noise: np.ndarray
    obs: np.ndarray
    obs_noise: np.ndarray
    survival: float = 1.0
    disappearance: float = 0.01
    remain_absent: float = 0.5
    missed_detection: float = 0.2
    birth: BirthModel = ObservationDrivenBirth()
    clutter: ClutterModel = ClutterModel()
    prune_threshold: float = 1e-4
    merge_threshold: float = 3.22

    def __post_init__(self):
        trans = _as_matrix(self.trans, "trans")
        noise = _require_psd(self.trans_noise, "trans_noise")
        obs = _as_matrix(self.obs, "obs")
        obs_noise = _require_psd(self.obs_noise, "obs_noise")
        d = trans.shape[0]
        if trans.shape != (d, d) or noise.shape != (d, d):
            raise ValueError("trans and trans_noise must be square with equal size")
        if obs.shape[1] != d or obs_noise.shape != (obs.shape[0], obs.shape[0]):
            raise ValueError("obs/obs_noise shapes inconsistent with state dim")
        for name in ("survival", "disappearance", "remain_absent", "missed_detection"):
            v = float(getattr(self, name))
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must be in (0, 1], got {v!r}")
            object.__setattr__(self, name, v)
        if abs(max(self.survival, self.disappearance) - 1.0) > 1e-12:
            raise ValueError("max(survival, disappearance) must equal 1")
        if not (0.0 <= self.prune_threshold < 1.0):
            raise ValueError("prune_threshold must be in [0, 1)")
        if self.merge_threshold < 0.0:
            raise ValueError("merge_threshold must be >= 0")
        for arr, name in ((trans, "trans"), (noise, "trans_noise"), (obs, "obs"), (obs_noise, "obs_noise")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def state_dim(self) -> int:
        return self.trans.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.obs.shape[0]


@dataclass(frozen=True)
class ExtendedPossibility:
    """Filter state: absence mass plus a max-mixture on the state space."""

    psi_mass: float
    on_s: MaxMixture
    time_index: int = 0

    def __post_init__(self):
        p = float(self.psi_mass)
        if not (0.0 <= p <= 1.0) or not math.isfinite(p):
            raise ValueError(f"psi_mass must be in [0, 1], got {p!r}")
        object.__setattr__(self, "psi_mass", p)

    @staticmethod
    def absent(time_index: int = 0) -> "ExtendedPossibility":
        """Initial state: absence fully possible, nothing on the state space."""
        return ExtendedPossibility(1.0, MaxMixture(), time_index)


def canonicalize_observations(observations, obs_dim: int) -> np.ndarray:
    """Sort an observation set lexicographically and drop exact duplicates.

    Returns an (n, obs_dim) array.  Observations form a set: order carries no
    information and exact duplicates are one observation.
    """
    rows = [np.atleast_1d(np.asarray(y, dtype=float)) for y in observations]
    if not rows:
        return np.empty((0, obs_dim))
    arr = np.stack(rows)
    if arr.ndim != 2 or arr.shape[1] != obs_dim:
        raise ValueError(f"observations must have dimension {obs_dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("observations must be finite")
    return np.unique(arr, axis=0)


def clutter_possibility(model: ClutterModel, observations) -> float:
    """Possibility of a finite set of false positives under the model."""
    ys = np.atleast_2d(np.asarray(observations, dtype=float)) if len(observations) else np.empty((0, 1))
    n = ys.shape[0]
    val = 1.0
    if model.card is not None:
        val = float(model.card(n))
        if not (0.0 <= val <= 1.0):
            raise ValueError(f"cardinality possibility must be in [0, 1], got {val!r}")
    if model.spatial is not None:
        for y in ys:
            s = float(model.spatial(y))
            if not (0.0 <= s <= 1.0):
                raise ValueError(f"spatial possibility must be in [0, 1], got {s!r}")
            val *= s
    return val


def _selection_indices(obs: np.ndarray) -> np.ndarray:
    """Indices of observed state coordinates for a 0/1 selection matrix."""
    idx = []
    for row in obs:
        nz = np.nonzero(row)[0]
        if nz.size != 1 or row[nz[0]] != 1.0:
            raise ValueError(
                "observation-driven birth needs a 0/1 selection observation matrix"
            )
        idx.append(nz[0])
    return np.asarray(idx, dtype=int)


def materialize_birth(
    y: np.ndarray, obs: np.ndarray, obs_noise: np.ndarray, velocity_std: float
) -> tuple[np.ndarray, np.ndarray]:
    """Moments of a component born from one observation meeting the flat term.

    Observed coordinates take the observation value with the observation
    noise covariance; unobserved coordinates get mean 0 and the velocity
    prior variance.  For a selection observation matrix the product of the
    flat term, the observation likelihood and the velocity prior is exactly
    this Gaussian possibility.
    """
    d = obs.shape[1]
    idx = _selection_indices(obs)
    mean = np.zeros(d)
    mean[idx] = y
    cov = np.eye(d) * velocity_std**2
    cov[np.ix_(idx, idx)] = obs_noise
    return mean, cov


def predict(state: ExtendedPossibility, params: SingleTargetParams) -> ExtendedPossibility:
    """One prediction of the extended state.

    Components propagate through the linear model scaled by survival; the
    absence mass becomes max(remain_absent * psi, disappearance * sup on S).
    Appearance adds either explicit components scaled by psi or, in
    observation-driven mode, raises the flat term to psi.
    """
    mix = state.on_s
    sup_prev = mix.sup()
    comps = [
        predict_gaussian(c, params.trans, params.trans_noise, params.survival)
        for c in mix.components
    ]
    flat_new = mix.flat_weight * params.survival
    psi = state.psi_mass
    if isinstance(params.birth, ObservationDrivenBirth):
        flat_new = max(flat_new, psi)
    else:
        if psi > 0.0:
            for b in params.birth.components:
                comps.append(GaussianPossibility(psi * b.weight, b.mean, b.cov))
    psi_new = max(params.remain_absent * psi, params.disappearance * sup_prev)
    return ExtendedPossibility(psi_new, MaxMixture(tuple(comps), flat_new), state.time_index + 1)


def update(state: ExtendedPossibility, params: SingleTargetParams, observations) -> ExtendedPossibility:
    """One update of the extended state with a finite observation set.

    Every component splits into a detection-failure branch (weight scaled by
    missed_detection and the clutter possibility of the whole set) and one
    detection branch per observation (Kalman moments, weight scaled by the
    leave-one-out clutter possibility and the observation likelihood).  The
    flat term follows the same pattern, spawning one located component per
    observation.  Everything is renormalized by the global max so the
    posterior is a valid possibility function.
    """
    ys = canonicalize_observations(observations, params.obs_dim)
    n_obs = ys.shape[0]
    f_all = clutter_possibility(params.clutter, ys)
    f_loo = np.array(
        [clutter_possibility(params.clutter, np.delete(ys, j, axis=0)) for j in range(n_obs)]
    )
    mix = state.on_s
    a_df = params.missed_detection

    new_w: list[float] = []
    new_m: list[np.ndarray] = []
    new_v: list[np.ndarray] = []

    if mix.components:
        ws, ms, vs = stack_components(mix.components)
        mis_w = ws * (a_df * f_all)
        new_w.extend(mis_w.tolist())
        new_m.extend(ms)
        new_v.extend(vs)
        if n_obs:
            liks, m_post, v_post = batch_kalman_update(ms, vs, ys, params.obs, params.obs_noise)
            det_w = ws[:, None] * liks * f_loo[None, :]
            for j in range(n_obs):
                new_w.extend(det_w[:, j].tolist())
                new_m.extend(m_post[:, j, :])
                new_v.extend(v_post)

    flat = mix.flat_weight
    flat_mis = flat * a_df * f_all
    if flat > 0.0 and n_obs:
        vel_std = (
            params.birth.velocity_std
            if isinstance(params.birth, ObservationDrivenBirth)
            else 1.0
        )
        for j in range(n_obs):
            w = flat * f_loo[j]
            if w > 0.0:
                mean, cov = materialize_birth(ys[j], params.obs, params.obs_noise, vel_std)
                new_w.append(w)
                new_m.append(mean)
                new_v.append(cov)

    psi_un = state.psi_mass * f_all
    c_t = max([psi_un, flat_mis] + new_w)
    if not (c_t > 0.0) or not math.isfinite(c_t):
        raise NumericalError(f"posterior has no positive possibility (C_t = {c_t!r})")

    comps = tuple(
        GaussianPossibility(w / c_t, m, v)
        for w, m, v in zip(new_w, new_m, new_v)
        if w > 0.0
    )
    return ExtendedPossibility(
        psi_un / c_t, MaxMixture(comps, flat_mis / c_t), state.time_index
    )


def estimate(state: ExtendedPossibility, tau_c: float) -> np.ndarray | None:
    """Declared state estimate, or None when no system is confirmed.

    The top component mean is returned iff its weight beats the absence mass
    and beats the runner-up weight by more than tau_c.  With fewer than two
    components the flat term plays runner-up.  Weight ties are broken toward
    the smaller covariance trace; a tie with the absence mass stays absent.
    """
    comps = state.on_s.components
    if not comps:
        return None
    ranked = sorted(comps, key=lambda c: (-c.weight, float(np.trace(c.cov))))
    w1 = ranked[0].weight
    w2 = ranked[1].weight if len(ranked) > 1 else state.on_s.flat_weight
    if w1 > state.psi_mass and (w1 - w2) > tau_c:
        return ranked[0].mean.copy()
    return None


def step(state: ExtendedPossibility, params: SingleTargetParams, observations) -> ExtendedPossibility:
    """predict -> update -> prune -> dominance reduction -> merge."""
    post = update(predict(state, params), params, observations)
    mix = prune(post.on_s, params.prune_threshold)
    mix = dominance_reduce(mix)
    mix = merge(mix, params.merge_threshold)
    return replace(post, on_s=mix)
