"""Gibbs states, truncated thermal oscillator states and passivity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .constants import HBAR, K_B
from .errors import CutoffError, ValidationError
from .operators import DensityOperator, HermitianOperator, HilbertSpace, Operator

COMMUTATOR_ATOL = 1e-10
DEFAULT_TAIL_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class GibbsState:
    """Gibbs state of ``hamiltonian`` at inverse temperature ``beta``.

    ``log_partition_function`` is kept alongside ``partition_function`` since
    the latter under- or overflows for large ``beta * E``.
    """

    state: DensityOperator
    hamiltonian: HermitianOperator
    beta: float
    populations: np.ndarray
    log_partition_function: float

    @property
    def partition_function(self) -> float:
        return math.exp(self.log_partition_function)

    def __iter__(self):
        # allows ``rho, z = gibbs_state(h, beta)``
        yield self.state
        yield self.partition_function


def boltzmann_weights(energies: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    """Normalized weights ``exp(-beta E) / Z`` and ``log Z``, computed stably."""
    energies = np.asarray(energies, dtype=float)
    if beta == 0:
        return np.full(energies.shape, 1.0 / energies.size), math.log(energies.size)
    shift = energies.min()
    w = np.exp(-beta * (energies - shift))
    total = w.sum()
    return w / total, float(math.log(total) - beta * shift)


def gibbs_state(h: HermitianOperator, beta: float) -> GibbsState:
    if not np.isfinite(beta) or beta < 0:
        raise ValidationError(f"beta must be finite and nonnegative, got {beta!r}")
    spec = h.spectrum
    pops, log_z = boltzmann_weights(spec.eigenvalues, beta)
    rho = spec.apply(lambda _: pops)
    rho = 0.5 * (rho + rho.conj().T)
    state = DensityOperator(rho, h.space)
    return GibbsState(state, h, float(beta), pops, log_z)


def bose_occupation(mode_frequency: float, temperature: float) -> float:
    x = HBAR * mode_frequency / (K_B * temperature)
    # 1/(e^x - 1) = e^{-x}/(1 - e^{-x}); stays finite (down to 0) for large x
    r = math.exp(-x)
    return r / -math.expm1(-x)


@dataclass(frozen=True)
class OscillatorThermalSpec:
    """Harmonic mode at ``mode_frequency`` (rad/s) and ``temperature`` (K),
    truncated to Fock states ``0..fock_cutoff``."""

    mode_frequency: float
    temperature: float
    fock_cutoff: int
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE

    def __post_init__(self):
        if self.mode_frequency <= 0:
            raise ValidationError("mode_frequency must be positive")
        if self.temperature <= 0:
            raise ValidationError("temperature must be positive")
        if self.fock_cutoff < 1:
            raise ValidationError("fock_cutoff must be at least 1")

    @property
    def ratio(self) -> float:
        """Boltzmann ratio ``p_{n+1}/p_n = exp(-hbar omega / k_B T)``."""
        return math.exp(-HBAR * self.mode_frequency / (K_B * self.temperature))

    @cached_property
    def mean_phonon_number(self) -> float:
        return bose_occupation(self.mode_frequency, self.temperature)

    @cached_property
    def tail_mass(self) -> float:
        """Population above the cutoff in the untruncated thermal state."""
        return self.ratio ** (self.fock_cutoff + 1)

    def minimal_cutoff(self) -> int:
        r = self.ratio
        if r <= 0.0:
            return 1
        return max(1, math.ceil(math.log(self.tail_tolerance) / math.log(r)) - 1)


def thermal_oscillator(spec: OscillatorThermalSpec) -> DensityOperator:
    """Renormalized truncated geometric distribution on ``fock_cutoff + 1`` levels.

    Raises :class:`CutoffError` when the discarded tail exceeds
    ``spec.tail_tolerance``.
    """
    dim = spec.fock_cutoff + 1
    space = HilbertSpace.single(dim, "R")
    if spec.mean_phonon_number < 1e-12:
        pops = np.zeros(dim)
        pops[0] = 1.0
    else:
        if spec.tail_mass > spec.tail_tolerance:
            n_min = spec.minimal_cutoff()
            raise CutoffError(
                f"Fock cutoff {spec.fock_cutoff} leaves tail mass {spec.tail_mass:.3e} "
                f"> {spec.tail_tolerance:g} (mean phonon number {spec.mean_phonon_number:.4g}); "
                f"use fock_cutoff >= {n_min}",
                minimal_cutoff=n_min,
            )
        pops = spec.ratio ** np.arange(dim)
        pops /= pops.sum()
    return DensityOperator(np.diag(pops), space, check=False)


@dataclass(frozen=True)
class PassivityResult:
    passive: bool
    witness: tuple[float, float] | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.passive


def is_passive(
    rho: DensityOperator,
    h: HermitianOperator,
    atol: float = COMMUTATOR_ATOL,
    degeneracy_tol: float = 1e-9,
) -> PassivityResult:
    """Check ``[rho, H] = 0`` and populations non-increasing in energy.

    The commutator tolerance scales with ``max(1, max|H|)``.
    Levels closer than ``degeneracy_tol`` count as one energy, so any
    occupation pattern inside a degenerate multiplet is accepted. The witness
    is the first pair ``(E_lower, E_higher)`` whose occupations increase.
    """
    if rho.space.dims != h.space.dims:
        raise ValidationError("state and Hamiltonian act on different spaces")
    comm = rho.matrix @ h.matrix - h.matrix @ rho.matrix
    defect = float(np.max(np.abs(comm)))
    if defect > atol * max(1.0, float(np.max(np.abs(h.matrix)))):
        return PassivityResult(False, None, f"state does not commute with H (|[rho,H]| = {defect:.2e})")
    spec = h.spectrum
    energies, vecs = spec.eigenvalues, spec.eigenvectors
    # eigh returns ascending energies; inside a degenerate multiplet it may pick
    # a basis that does not diagonalize rho, so use block eigenvalues instead
    groups: list[tuple[float, float, float]] = []  # (energy, min occ, max occ)
    start = 0
    for stop in range(1, len(energies) + 1):
        if stop < len(energies) and energies[stop] - energies[start] <= degeneracy_tol * max(1.0, abs(energies[start])):
            continue
        block = vecs[:, start:stop]
        occ = np.linalg.eigvalsh(block.conj().T @ rho.matrix @ block)
        groups.append((float(energies[start]), float(occ.min()), float(occ.max())))
        start = stop
    for (e_lo, lo_min, _), (e_hi, _, hi_max) in zip(groups, groups[1:]):
        if hi_max > lo_min + atol:
            return PassivityResult(False, (e_lo, e_hi), "occupation increases with energy")
    return PassivityResult(True)


__all__ = [
    "GibbsState", "boltzmann_weights", "gibbs_state", "bose_occupation",
    "OscillatorThermalSpec", "thermal_oscillator", "PassivityResult", "is_passive",
]
