"""Recover the heat distribution from characteristic-function samples.

The support of P(Q) is the gap set of H_R, so inversion is a linear
least-squares problem for the atom weights followed by a Euclidean projection
onto the probability simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IllPosedGridError, ValidationError
from .heat import DEFAULT_GAP_TOL, HeatDistribution, cluster_values, energy_levels, scaled_tol
from .operators import HermitianOperator

DEFAULT_OVERSAMPLING = math.pi / 2  # spacing <= this / q_max
DEFAULT_RESOLUTION = 2 * math.pi  # span >= this / min gap separation
MAX_GRID_POINTS = 200_000


@dataclass(frozen=True, eq=False)
class GapSet:
    gaps: np.ndarray
    cluster_tol: float = DEFAULT_GAP_TOL

    def __post_init__(self):
        gaps = np.sort(np.asarray(self.gaps, dtype=float).ravel())
        tol = scaled_tol(gaps, self.cluster_tol)
        if gaps.size == 0 or np.min(np.abs(gaps)) > tol:
            raise ValidationError("a gap set must contain 0")
        if np.max(np.abs(gaps + gaps[::-1])) > tol:
            raise ValidationError("a gap set must be symmetric under q -> -q")
        if gaps.size > 1 and np.min(np.diff(gaps)) <= tol:
            raise ValidationError("gaps must be separated by more than cluster_tol")
        gaps.setflags(write=False)
        object.__setattr__(self, "gaps", gaps)

    def __len__(self) -> int:
        return self.gaps.size

    @property
    def q_max(self) -> float:
        return float(np.max(np.abs(self.gaps)))

    @property
    def min_separation(self) -> float:
        return float(np.min(np.diff(self.gaps))) if self.gaps.size > 1 else math.inf


def gap_set(h: HermitianOperator, cluster_tol: float = DEFAULT_GAP_TOL) -> GapSet:
    """All differences ``E_n - E_m`` of the distinct levels of ``h``, merged
    within ``cluster_tol``."""
    if cluster_tol <= 0:
        raise ValidationError("cluster_tol must be positive")
    e = energy_levels(h, cluster_tol).energies
    diffs = (e[None, :] - e[:, None]).ravel()
    merged = np.array([diffs[idx].mean() for idx in cluster_values(diffs, scaled_tol(diffs, cluster_tol))])
    # mirrored clusters have mirrored means; pin the central one to exactly 0
    merged[np.argmin(np.abs(merged))] = 0.0
    merged = 0.5 * (merged - merged[::-1])
    return GapSet(merged, cluster_tol)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    times: np.ndarray
    spacing: float
    span: float
    sampling_limit: float  # largest admissible spacing
    resolution_limit: float  # smallest admissible span

    @property
    def sampling_ok(self) -> bool:
        return self.spacing <= self.sampling_limit * (1 + 1e-12)

    @property
    def resolution_ok(self) -> bool:
        return self.span >= self.resolution_limit * (1 - 1e-12)

    def __len__(self) -> int:
        return self.times.size


def time_grid(
    gaps: GapSet,
    points: int | None = None,
    *,
    oversampling: float = DEFAULT_OVERSAMPLING,
    resolution: float = DEFAULT_RESOLUTION,
    max_points: int = MAX_GRID_POINTS,
) -> TimeGrid:
    """Uniform grid ``t_j = j * dt`` starting at 0.

    ``dt = oversampling / q_max`` and the number of points is raised above
    ``points`` (default ``2 * len(gaps)``) until the span reaches
    ``resolution / min_separation``.
    """
    if len(gaps) == 1:
        return TimeGrid(np.array([0.0, 1.0]), 1.0, 1.0, math.inf, 0.0)
    requested = 2 * len(gaps) if points is None else int(points)
    if requested < 2 * len(gaps):
        raise ValidationError(f"need at least {2 * len(gaps)} grid points for {len(gaps)} gaps")
    dt = oversampling / gaps.q_max
    span_needed = resolution / gaps.min_separation
    n = max(requested, math.ceil(span_needed / dt * (1 + 1e-12)) + 1)
    if n > max_points:
        raise IllPosedGridError(
            f"resolving a gap separation of {gaps.min_separation:.3g} needs {n} points "
            f"(limit {max_points}); merge nearby gaps or raise max_points"
        )
    times = dt * np.arange(n)
    return TimeGrid(times, dt, float(times[-1]), dt, span_needed)


@dataclass(frozen=True, eq=False)
class CharacteristicSamples:
    t: np.ndarray
    theta: np.ndarray
    stderr_re: np.ndarray | None = None
    stderr_im: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).ravel()
        theta = np.asarray(self.theta, dtype=complex).ravel()
        if t.shape != theta.shape:
            raise ValidationError("sample times and values differ in length")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "theta", theta)
        for name in ("stderr_re", "stderr_im"):
            val = getattr(self, name)
            arr = np.zeros(t.shape) if val is None else np.asarray(val, dtype=float).ravel()
            object.__setattr__(self, name, arr)

    @classmethod
    def from_estimates(cls, estimates: Sequence) -> "CharacteristicSamples":
        return cls(
            [e.t for e in estimates],
            [e.theta for e in estimates],
            [e.std_error_re for e in estimates],
            [e.std_error_im for e in estimates],
        )

    def __len__(self) -> int:
        return self.t.size


def design_matrix(t: np.ndarray, gaps: GapSet) -> np.ndarray:
    """``A[j, k] = exp(i q_k t_j)``."""
    return np.exp(1j * np.multiply.outer(np.asarray(t, dtype=float), gaps.gaps))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{p >= 0, sum p = 1}`` (sort-and-threshold)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    shift = css[rho] / (rho + 1)
    return np.maximum(v - shift, 0.0)


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    distribution: HeatDistribution
    residual_rms: float  # before projection
    condition_estimate: float
    unconstrained: np.ndarray
    projected_residual_rms: float
    projection_distance: float


def reconstruct(samples: CharacteristicSamples, gaps: GapSet, rcond: float = 1e-10) -> ReconstructionResult:
    if len(samples) < len(gaps):
        raise IllPosedGridError(f"{len(samples)} samples cannot determine {len(gaps)} atoms")
    a = design_matrix(samples.t, gaps)
    a_real = np.vstack([a.real, a.imag])
    b_real = np.concatenate([samples.theta.real, samples.theta.imag])
    sv = np.linalg.svd(a_real, compute_uv=False)
    if sv[-1] <= rcond * sv[0]:
        raise IllPosedGridError(
            f"design matrix is rank deficient (sigma_min/sigma_max = {sv[-1] / sv[0]:.2e}); "
            "use a longer time span"
        )
    p_ls, *_ = np.linalg.lstsq(a_real, b_real, rcond=None)
    n = len(samples)
    resid = float(np.linalg.norm(a_real @ p_ls - b_real) / math.sqrt(n))
    p = project_simplex(p_ls)
    resid_proj = float(np.linalg.norm(a_real @ p - b_real) / math.sqrt(n))
    dist = HeatDistribution(gaps.gaps, p, gaps.cluster_tol)
    return ReconstructionResult(
        distribution=dist,
        residual_rms=resid,
        condition_estimate=float(sv[0] / sv[-1]),
        unconstrained=p_ls,
        projected_residual_rms=resid_proj,
        projection_distance=float(np.linalg.norm(p - p_ls)),
    )


__all__ = [
    "GapSet", "gap_set", "TimeGrid", "time_grid", "CharacteristicSamples", "design_matrix",
    "project_simplex", "ReconstructionResult", "reconstruct",
]
