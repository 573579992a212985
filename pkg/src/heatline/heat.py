"""Reference heat statistics of a reservoir-system protocol.

Heat is the change of reservoir energy, ``Q = E_final - E_initial``, under a
global unitary ``U`` on reservoir (x) system with the reservoir starting in a
Gibbs state. The characteristic function uses the convention

    Theta(t) = sum_Q P(Q) exp(i t Q)
             = tr[ U (rho_R v_t (x) rho_S) U^dag (v_t^dag (x) I) ],   v_t = exp(-i H_R t),

so the first moment is ``Im dTheta/dt`` at ``t = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, ValidationError
from .operators import (
    DensityOperator,
    HermitianOperator,
    HilbertSpace,
    Operator,
    UnitaryOperator,
    evolution,
    partial_trace,
    random_density,
    random_hermitian,
    random_unitary,
    tensor,
)
from .thermal import GibbsState, gibbs_state

DEFAULT_GAP_TOL = 1e-9
NEGATIVE_PROB_TOL = 1e-12
NORMALIZATION_TOL = 1e-10


def scaled_tol(values: np.ndarray, tol: float) -> float:
    """Absolute clustering tolerance. ``tol`` is taken relative to
    ``max(1, max|values|)`` so the same default works for energies in rad/s."""
    values = np.asarray(values, dtype=float)
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    return tol * max(1.0, scale)


def cluster_values(values: Sequence[float], tol: float) -> list[np.ndarray]:
    """Group indices of ``values`` into chains whose neighbours differ by at most
    ``tol`` (single linkage on the sorted values). Groups come out ascending."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    breaks = np.nonzero(np.diff(sorted_vals) > tol)[0] + 1
    return np.split(order, breaks)


def merge_atoms(q: Sequence[float], p: Sequence[float], tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge atoms closer than ``tol``; merged locations are probability-weighted means."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    out_q, out_p = [], []
    for idx in cluster_values(q, tol):
        weight = p[idx].sum()
        if weight > 0:
            out_q.append(float(np.dot(q[idx], p[idx]) / weight))
        else:
            out_q.append(float(q[idx].mean()))
        out_p.append(float(weight))
    return np.array(out_q), np.array(out_p)


@dataclass(frozen=True, eq=False)
class HeatDistribution:
    """Discrete probability mass on heat values ``q`` (ascending)."""

    q: np.ndarray
    p: np.ndarray
    gap_cluster_tol: float = DEFAULT_GAP_TOL

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).ravel()
        p = np.asarray(self.p, dtype=float).ravel()
        if q.shape != p.shape:
            raise ValidationError("heat values and probabilities differ in length")
        if np.any(p < -NEGATIVE_PROB_TOL):
            raise ValidationError(f"negative probability {p.min():.3e} in heat distribution")
        p = np.clip(p, 0.0, None)
        if abs(p.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValidationError(f"heat distribution sums to {p.sum()!r}")
        order = np.argsort(q, kind="stable")
        q, p = q[order], p[order]
        tol = scaled_tol(q, self.gap_cluster_tol)
        if q.size > 1 and np.min(np.diff(q)) <= tol:
            raise ValidationError("heat values are not separated by more than gap_cluster_tol")
        q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, float]], gap_cluster_tol: float = DEFAULT_GAP_TOL
                   ) -> "HeatDistribution":
        atoms = list(atoms)
        q = np.array([a[0] for a in atoms], dtype=float)
        p = np.array([a[1] for a in atoms], dtype=float)
        q, p = merge_atoms(q, p, scaled_tol(q, gap_cluster_tol))
        return cls(q, p, gap_cluster_tol)

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.q, self.p)]

    def probability_at(self, value: float) -> float:
        """Probability mass at ``value`` (zero when no atom lies within tolerance)."""
        tol = scaled_tol(np.append(self.q, value), self.gap_cluster_tol)
        hits = np.abs(self.q - value) <= tol
        return float(self.p[hits].sum())

    def support(self, threshold: float = 0.0) -> "HeatDistribution":
        """Drop atoms with probability ``<= threshold`` and renormalize."""
        keep = self.p > threshold
        return HeatDistribution(self.q[keep], self.p[keep] / self.p[keep].sum(), self.gap_cluster_tol)

    def __len__(self) -> int:
        return self.q.size


# ----------------------------------------------------------------------------
# Protocol instances
# ----------------------------------------------------------------------------


def _relabel(op: Operator, labels: Sequence[str], dims: Sequence[int]) -> Operator:
    if tuple(op.space.dims) == tuple(dims) and tuple(op.space.labels) == tuple(labels):
        return op
    if op.dim != int(np.prod(dims)):
        raise ConfigurationError(
            f"operator of dimension {op.dim} does not fit subsystems {dict(zip(labels, dims))}"
        )
    return type(op)(op.matrix, HilbertSpace(tuple(zip(labels, dims))), check=False)


@dataclass(frozen=True, eq=False)
class EnergyLevels:
    """Distinct energies of a Hamiltonian with completed eigenprojectors."""

    energies: np.ndarray
    projectors: tuple[np.ndarray, ...]
    multiplicities: np.ndarray


def energy_levels(h: HermitianOperator, tol: float = DEFAULT_GAP_TOL) -> EnergyLevels:
    spec = h.spectrum
    vals, vecs = spec.eigenvalues, spec.eigenvectors
    groups = cluster_values(vals, scaled_tol(vals, tol))
    energies, projs, mult = [], [], []
    for idx in groups:
        block = vecs[:, idx]
        energies.append(float(vals[idx].mean()))
        projs.append(block @ block.conj().T)
        mult.append(len(idx))
    return EnergyLevels(np.array(energies), tuple(projs), np.array(mult))


@dataclass(frozen=True, eq=False)
class ProtocolInstance:
    """Protocol unitary on R (x) S, reservoir Hamiltonian, inverse temperature and
    initial system state. Subsystems are relabeled ``"R"`` and ``"S"``."""

    protocol: UnitaryOperator
    reservoir_h: HermitianOperator
    beta: float
    system_state: DensityOperator
    gap_cluster_tol: float = DEFAULT_GAP_TOL

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ValidationError(f"beta must be finite and nonnegative, got {self.beta!r}")
        d_r, d_s = self.reservoir_h.dim, self.system_state.dim
        if self.protocol.dim != d_r * d_s:
            raise ConfigurationError(
                f"protocol dimension {self.protocol.dim} != dim(R) * dim(S) = {d_r} * {d_s}"
            )
        object.__setattr__(self, "reservoir_h", _relabel(self.reservoir_h, ["R"], [d_r]))
        object.__setattr__(self, "system_state", _relabel(self.system_state, ["S"], [d_s]))
        object.__setattr__(self, "protocol", _relabel(self.protocol, ["R", "S"], [d_r, d_s]))

    @property
    def dim_r(self) -> int:
        return self.reservoir_h.dim

    @property
    def dim_s(self) -> int:
        return self.system_state.dim

    @cached_property
    def reservoir(self) -> GibbsState:
        return gibbs_state(self.reservoir_h, self.beta)

    @property
    def reservoir_state(self) -> DensityOperator:
        return self.reservoir.state

    @cached_property
    def initial_state(self) -> DensityOperator:
        return tensor(self.reservoir_state, self.system_state)

    @cached_property
    def final_state(self) -> DensityOperator:
        return self.initial_state.evolve(self.protocol)

    @cached_property
    def final_reservoir(self) -> DensityOperator:
        return partial_trace(self.final_state, ["R"])

    @cached_property
    def final_system(self) -> DensityOperator:
        return partial_trace(self.final_state, ["S"])

    @cached_property
    def levels(self) -> EnergyLevels:
        return energy_levels(self.reservoir_h, self.gap_cluster_tol)


def swap_unitary(dim: int) -> UnitaryOperator:
    """SWAP on two ``dim``-level factors labeled R and S."""
    mat = np.zeros((dim * dim, dim * dim))
    for i in range(dim):
        for j in range(dim):
            mat[j * dim + i, i * dim + j] = 1.0
    return UnitaryOperator(mat, HilbertSpace.of(("R", dim), ("S", dim)), check=False)


def random_instance(
    rng: np.random.Generator,
    dim_r: int,
    dim_s: int,
    beta: float | None = None,
    beta_max: float = 5.0,
) -> ProtocolInstance:
    """Haar-random protocol, GUE reservoir Hamiltonian, random mixed system state."""
    h = random_hermitian(dim_r, rng, HilbertSpace.single(dim_r, "R"), scale=2.0)
    u = random_unitary(dim_r * dim_s, rng, HilbertSpace.of(("R", dim_r), ("S", dim_s)))
    rho_s = random_density(dim_s, rng, HilbertSpace.single(dim_s, "S"))
    if beta is None:
        beta = float(rng.uniform(0.0, beta_max))
    return ProtocolInstance(u, h, beta, rho_s)


# ----------------------------------------------------------------------------
# Two-point measurement statistics
# ----------------------------------------------------------------------------


def tpm_joint(inst: ProtocolInstance) -> np.ndarray:
    """Joint probabilities ``P[m, n]`` of initial level ``m`` and final level ``n``.

    ``P[m, n] = tr[U (Pi_m rho_R Pi_m (x) rho_S) U^dag (Pi_n (x) I)]``; for a
    Gibbs reservoir this is ``p_m p_{n|m}`` with completed projectors.
    """
    levels = inst.levels
    rho_r = inst.reservoir_state.matrix
    u = inst.protocol.matrix
    d_r, d_s = inst.dim_r, inst.dim_s
    k = len(levels.energies)
    joint = np.empty((k, k))
    for m, pi_m in enumerate(levels.projectors):
        prepared = np.kron(pi_m @ rho_r @ pi_m, inst.system_state.matrix)
        out = u @ prepared @ u.conj().T
        out_r = np.einsum("isjs->ij", out.reshape(d_r, d_s, d_r, d_s))
        for n, pi_n in enumerate(levels.projectors):
            joint[m, n] = np.real(np.trace(pi_n @ out_r))
    return joint


def tpm_distribution(inst: ProtocolInstance) -> HeatDistribution:
    levels = inst.levels
    joint = tpm_joint(inst)
    e = levels.energies
    q = (e[None, :] - e[:, None]).ravel()  # final minus initial
    p = joint.ravel()
    q, p = merge_atoms(q, p, scaled_tol(q, inst.gap_cluster_tol))
    # atoms at round-off level (e.g. forbidden transitions) are dropped
    keep = np.abs(p) > NEGATIVE_PROB_TOL
    return HeatDistribution(q[keep], p[keep], inst.gap_cluster_tol)


def average_heat(inst: ProtocolInstance) -> float:
    h = inst.reservoir_h.matrix
    before = np.trace(h @ inst.reservoir_state.matrix).real
    after = np.trace(h @ inst.final_reservoir.matrix).real
    return float(after - before)


def characteristic_direct(inst: ProtocolInstance, t):
    """Trace form of the characteristic function; ``t`` may be a scalar or array."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    u = inst.protocol.matrix
    rho_r = inst.reservoir_state.matrix
    rho_s = inst.system_state.matrix
    d_r, d_s = inst.dim_r, inst.dim_s
    out = np.empty(ts.shape, dtype=complex)
    for i, ti in enumerate(ts):
        v = evolution(inst.reservoir_h, ti).matrix
        x = u @ np.kron(rho_r @ v, rho_s) @ u.conj().T
        x_r = np.einsum("isjs->ij", x.reshape(d_r, d_s, d_r, d_s))
        out[i] = np.trace(x_r @ v.conj().T)
    return complex(out[0]) if np.ndim(t) == 0 else out


def characteristic_from_distribution(dist: HeatDistribution, t):
    ts = np.asarray(t, dtype=float)
    vals = np.exp(1j * np.multiply.outer(ts, dist.q)) @ dist.p
    return complex(vals) if np.ndim(t) == 0 else vals


def moment(dist: HeatDistribution, k: int) -> float:
    if k < 1:
        raise ValidationError("moment order must be a positive integer")
    return float(np.dot(dist.p, dist.q ** k))


# ----------------------------------------------------------------------------
# Entropies and the Landauer balance
# ----------------------------------------------------------------------------


def _xlogx(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(np.sum(p * np.log(p)))


def von_neumann_entropy(rho: Operator) -> float:
    """Entropy in nats; eigenvalues below zero from round-off are dropped."""
    vals = np.linalg.eigvalsh(0.5 * (rho.matrix + rho.matrix.conj().T))
    return -_xlogx(np.clip(vals, 0.0, None))


def relative_entropy(rho: Operator, sigma: Operator, support_tol: float = 1e-12) -> float:
    """``D(rho || sigma) = tr rho (log rho - log sigma)`` in nats (``inf`` when the
    support of rho is not contained in that of sigma)."""
    s_vals, s_vecs = np.linalg.eigh(0.5 * (sigma.matrix + sigma.matrix.conj().T))
    overlap = np.real(np.einsum("ij,ik,kj->j", s_vecs.conj(), rho.matrix, s_vecs))
    outside = s_vals <= support_tol
    if np.any(overlap[outside] > support_tol):
        return math.inf
    log_sigma_term = float(np.dot(overlap[~outside], np.log(s_vals[~outside])))
    return -von_neumann_entropy(rho) - log_sigma_term


def mutual_information(rho: DensityOperator, a: Sequence[str], b: Sequence[str]) -> float:
    rho_a = partial_trace(rho, a)
    rho_b = partial_trace(rho, b)
    rho_ab = partial_trace(rho, list(a) + list(b)) if len(rho.space) > len(a) + len(b) else rho
    return von_neumann_entropy(rho_a) + von_neumann_entropy(rho_b) - von_neumann_entropy(rho_ab)


@dataclass(frozen=True)
class LandauerReport:
    """Terms of the balance ``beta <Q> - [S(rho_S) - S(rho_S')] = I(S':R') + D(rho_R' || rho_R)``.

    ``infinite_temperature`` flags ``beta = 0``: every term is still computed
    (the relative entropy is then taken to ``I/d``), but ``beta_q`` is zero and
    the inequality carries no thermodynamic content.
    """

    average_heat: float
    beta_q: float
    entropy_decrease: float
    slack: float
    mutual_information: float
    relative_entropy: float
    infinite_temperature: bool = False

    @property
    def decomposition_residual(self) -> float:
        return self.slack - (self.mutual_information + self.relative_entropy)

    def holds(self, tol: float = 1e-9) -> bool:
        return self.slack >= -tol

    def as_dict(self) -> dict:
        return {
            "average_heat": self.average_heat,
            "beta_q": self.beta_q,
            "entropy_decrease": self.entropy_decrease,
            "slack": self.slack,
            "mutual_information": self.mutual_information,
            "relative_entropy": self.relative_entropy,
            "decomposition_residual": self.decomposition_residual,
            "infinite_temperature": self.infinite_temperature,
        }


def landauer_report(inst: ProtocolInstance) -> LandauerReport:
    q = average_heat(inst)
    s_before = von_neumann_entropy(inst.system_state)
    s_after = von_neumann_entropy(inst.final_system)
    info = mutual_information(inst.final_state, ["S"], ["R"])
    # log rho_R = -beta H_R - log Z exactly, which avoids taking logs of
    # vanishing Gibbs weights at low temperature
    rho_r_final = inst.final_reservoir
    mean_energy = np.trace(inst.reservoir_h.matrix @ rho_r_final.matrix).real
    d_rel = -von_neumann_entropy(rho_r_final) + inst.beta * mean_energy + inst.reservoir.log_partition_function
    beta_q = inst.beta * q
    decrease = s_before - s_after
    return LandauerReport(
        average_heat=q,
        beta_q=beta_q,
        entropy_decrease=decrease,
        slack=beta_q - decrease,
        mutual_information=info,
        relative_entropy=float(d_rel),
        infinite_temperature=inst.beta == 0,
    )


__all__ = [
    "HeatDistribution", "ProtocolInstance", "EnergyLevels", "LandauerReport",
    "energy_levels", "cluster_values", "merge_atoms", "scaled_tol", "swap_unitary",
    "random_instance", "tpm_joint", "tpm_distribution", "average_heat",
    "characteristic_direct", "characteristic_from_distribution", "moment",
    "von_neumann_entropy", "relative_entropy", "mutual_information", "landauer_report",
]
