"""Multi-system filtering with possibilistic intensity functions.

The number of systems and their states are described by an uncertain
counting measure whose intensity function F maps each state to [0, 1].
The count possibility is n -> sup(F)^n and the spatial possibility is
F / sup(F), so F factors into a max-mixture-shaped object: a constant floor
(newborn systems not yet located) plus weighted Gaussian components.

The recursion mirrors the single-system filter branch for branch, except
that normalization is per observation: each observation y contributes
components scaled by 1 / D_y with

    D_y = max(sup_x F(x) h(y | x), clutter_intensity(y)),

which keeps the updated intensity bounded by 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mixtures import (
    GaussianPossibility,
    MaxMixture,
    _as_matrix,
    _require_psd,
    batch_kalman_update,
    dominance_reduce,
    predict_gaussian,
    stack_components,
)
from .single_target import canonicalize_observations, materialize_birth

__all__ = [
    "IntensityMixture",
    "MultiTargetParams",
    "sum_intensities",
    "propagate_intensity",
    "update_intensity",
    "recover_cardinality_spatial",
    "extract_targets",
]


@dataclass(frozen=True, eq=False)
class IntensityMixture:
    """Intensity function: max of a constant floor and Gaussian components."""

    floor: float = 0.0
    components: tuple[GaussianPossibility, ...] = ()

    def __post_init__(self):
        f = float(self.floor)
        if not (0.0 <= f <= 1.0) or not math.isfinite(f):
            raise ValueError(f"floor must be in [0, 1], got {f!r}")
        comps = tuple(self.components)
        if len({c.dim for c in comps}) > 1:
            raise ValueError("components must share one state dimension")
        object.__setattr__(self, "floor", f)
        object.__setattr__(self, "components", comps)

    def __call__(self, x) -> float:
        return _as_max_mixture(self)(x)

    def eval_many(self, xs: np.ndarray) -> np.ndarray:
        return _as_max_mixture(self).eval_many(xs)

    def sup(self) -> float:
        return _as_max_mixture(self).sup()


def _as_max_mixture(fm: IntensityMixture) -> MaxMixture:
    return MaxMixture(fm.components, fm.floor)


def _from_max_mixture(mix: MaxMixture) -> IntensityMixture:
    return IntensityMixture(mix.flat_weight, mix.components)


@dataclass(frozen=True)
class MultiTargetParams:
    """Model matrices and intensity parameters of the multi-system filter.

    ``birth`` is the appearance intensity on the state space (typically just
    a floor); ``clutter`` is the false-positive intensity on the observation
    space.  ``birth_velocity_std`` locates floor-born components on the
    unobserved coordinates.
    """

    trans: np.ndarray
    trans_noise: np.ndarray
    obs: np.ndarray
    obs_noise: np.ndarray
    survival: float = 1.0
    missed_detection: float = 0.2
    birth: IntensityMixture = IntensityMixture(floor=0.5)
    clutter: IntensityMixture = IntensityMixture(floor=0.5)
    birth_velocity_std: float = 1.0
    max_components: int = 200

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
        for name in ("survival", "missed_detection"):
            v = float(getattr(self, name))
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must be in (0, 1], got {v!r}")
            object.__setattr__(self, name, v)
        if not self.birth_velocity_std > 0.0:
            raise ValueError("birth_velocity_std must be > 0")
        if self.max_components < 1:
            raise ValueError("max_components must be >= 1")
        for arr, name in ((trans, "trans"), (noise, "trans_noise"), (obs, "obs"), (obs_noise, "obs_noise")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def state_dim(self) -> int:
        return self.trans.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.obs.shape[0]


def sum_intensities(a: IntensityMixture, b: IntensityMixture) -> IntensityMixture:
    """Pointwise max of two intensities (union of independent populations)."""
    mix = MaxMixture(a.components + b.components, max(a.floor, b.floor))
    return _from_max_mixture(dominance_reduce(mix))


def propagate_intensity(fm: IntensityMixture, params: MultiTargetParams) -> IntensityMixture:
    """Survival-scaled linear propagation followed by the birth intensity."""
    comps = tuple(
        predict_gaussian(c, params.trans, params.trans_noise, params.survival)
        for c in fm.components
    )
    moved = IntensityMixture(fm.floor * params.survival, comps)
    return sum_intensities(moved, params.birth)


def update_intensity(fm: IntensityMixture, params: MultiTargetParams, observations) -> IntensityMixture:
    """One observation update of the intensity function.

    The detection-failure branch scales everything by missed_detection.  Each
    observation y adds Kalman-updated components and, when the floor is
    positive, one newborn component located at y; all of them are divided by
    D_y = max(floor, best component likelihood, clutter intensity at y), so
    no weight exceeds 1.  Exact duplicate observations are a single
    observation.  The result is dominance-reduced and capped.
    """
    ys = canonicalize_observations(observations, params.obs_dim)
    n_obs = ys.shape[0]
    a_df = params.missed_detection

    new_w: list[float] = []
    new_m: list[np.ndarray] = []
    new_v: list[np.ndarray] = []

    floor_t = fm.floor * a_df
    if fm.components:
        ws, ms, vs = stack_components(fm.components)
        new_w.extend((ws * a_df).tolist())
        new_m.extend(ms)
        new_v.extend(vs)
    if n_obs:
        if fm.components:
            liks, m_post, v_post = batch_kalman_update(ms, vs, ys, params.obs, params.obs_noise)
        for j in range(n_obs):
            best_comp = float((ws * liks[:, j]).max()) if fm.components else 0.0
            d_y = max(fm.floor, best_comp, fm_clutter_at(params, ys[j]))
            if d_y <= 0.0:
                continue
            if fm.components:
                det_w = ws * liks[:, j] / d_y
                new_w.extend(det_w.tolist())
                new_m.extend(m_post[:, j, :])
                new_v.extend(v_post)
            if fm.floor > 0.0:
                mean, cov = materialize_birth(
                    ys[j], params.obs, params.obs_noise, params.birth_velocity_std
                )
                new_w.append(fm.floor / d_y)
                new_m.append(mean)
                new_v.append(cov)

    comps = tuple(
        GaussianPossibility(w, m, v) for w, m, v in zip(new_w, new_m, new_v) if w > 0.0
    )
    reduced = dominance_reduce(MaxMixture(comps, floor_t))
    out_comps = reduced.components
    if len(out_comps) > params.max_components:
        out_comps = tuple(
            sorted(out_comps, key=lambda c: -c.weight)[: params.max_components]
        )
    return IntensityMixture(floor_t, out_comps)


def fm_clutter_at(params: MultiTargetParams, y: np.ndarray) -> float:
    """False-positive intensity at one observation."""
    return params.clutter(y)


def recover_cardinality_spatial(fm: IntensityMixture):
    """Split an intensity into its count possibility and spatial possibility.

    Returns ``(card, spatial)`` with ``card(n) = sup(F) ** n`` and spatial the
    sup-normalized intensity.  A zero intensity carries no spatial
    information, so its spatial part is the constant 1.
    """
    s = fm.sup()

    def card(n: int) -> float:
        if n < 0:
            raise ValueError("count must be >= 0")
        return float(s**n)

    if s <= 0.0:
        return card, IntensityMixture(floor=1.0)
    comps = tuple(
        GaussianPossibility(c.weight / s, c.mean, c.cov) for c in fm.components
    )
    return card, IntensityMixture(fm.floor / s, comps)


def extract_targets(
    fm: IntensityMixture, tau_x: float = 0.9, merge_radius: float = 3.22
) -> list[np.ndarray]:
    """Means of components confirming a system: weight above tau_x and the floor.

    At most one extraction per spatial cluster: a candidate within
    merge_radius (Mahalanobis, in an accepted component's covariance) of an
    already accepted component is skipped.
    """
    reduced = dominance_reduce(_as_max_mixture(fm))
    gate = merge_radius * merge_radius
    cands = sorted(
        (c for c in reduced.components if c.weight > tau_x and c.weight > fm.floor),
        key=lambda c: (-c.weight, float(np.trace(c.cov))),
    )
    accepted: list[GaussianPossibility] = []
    for c in cands:
        close = False
        for a in accepted:
            d = c.mean - a.mean
            if float(d @ np.linalg.solve(a.cov, d)) <= gate:
                close = True
                break
        if not close:
            accepted.append(c)
    return [a.mean.copy() for a in accepted]
