"""Trapped-ion realization: two 40Ca+ ions sharing one motional mode.

The mode is the reservoir (H_R = omega N, zero-point energy dropped), the
system qubit couples to it on the blue sideband, and the ancilla picks up a
phonon-number dependent phase from an off-resonant red sideband to an
auxiliary level |a>.

Units: SI at the boundary (kg, m, K, s); angular frequencies in rad/s play the
role of energies (hbar = 1), so inverse temperatures are in s/rad.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .constants import CA40_MASS, HBAR, TWO_PI, beta_from_temperature
from .errors import CutoffError, ValidationError
from .heat import ProtocolInstance
from .operators import (
    DensityOperator,
    HermitianOperator,
    HilbertSpace,
    UnitaryOperator,
    controlled,
    evolution,
    hermitian_eig,
    permute,
)
from .thermal import OscillatorThermalSpec, thermal_oscillator, DEFAULT_TAIL_TOLERANCE

ADIABATICITY_WARNING = 5.0
OCCUPATION_THRESHOLD = 1e-3
BOUNDARY_TOLERANCE = 1e-6
MAX_SWEEP_SAMPLES = 200_000
SAMPLES_PER_PERIOD = 6

# three-level ancilla ordering
LEVEL_0, LEVEL_1, LEVEL_AUX = 0, 1, 2


@dataclass(frozen=True)
class IonParameters:
    """Trap and laser parameters.

    ``eta`` overrides the Lamb-Dicke parameter computed from mass, wavelength,
    beam angle and mode frequency (useful to reproduce a quoted value).
    """

    mode_frequency: float  # rad/s
    rabi_S: float  # rad/s
    rabi_ac: float  # rad/s
    detuning_ac: float  # rad/s, signed
    temperature: float  # K
    fock_cutoff: int
    ion_mass: float = CA40_MASS  # kg
    wavelength: float = 729e-9  # m
    beam_angle: float = 0.0  # rad
    eta: float | None = None

    def __post_init__(self):
        for name in ("mode_frequency", "rabi_S", "ion_mass", "wavelength", "temperature"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.rabi_ac < 0:
            raise ValidationError("rabi_ac must be nonnegative")
        if self.detuning_ac == 0 or not math.isfinite(self.detuning_ac):
            raise ValidationError("detuning_ac must be finite and nonzero")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 1:
            raise ValidationError("fock_cutoff must be an integer >= 1")
        if self.eta is not None and self.eta < 0:
            raise ValidationError("eta must be nonnegative")

    @classmethod
    def working_point(cls, **overrides) -> "IonParameters":
        """Working point with eta = 0.07, delta_ac = 2pi 100 kHz, Omega_ac = 2pi 300 kHz.

        Mode frequency, system Rabi frequency, temperature and cutoff are not
        fixed by those numbers; the defaults here are representative choices.
        """
        values = dict(
            mode_frequency=TWO_PI * 2e6,
            rabi_S=TWO_PI * 100e3,
            rabi_ac=TWO_PI * 300e3,
            detuning_ac=TWO_PI * 100e3,
            temperature=50e-6,
            fock_cutoff=20,
            eta=0.07,
        )
        values.update(overrides)
        return cls(**values)

    @property
    def lamb_dicke(self) -> float:
        return self.eta if self.eta is not None else lamb_dicke(self)

    @property
    def adiabaticity_ratio(self) -> float:
        coupling = self.lamb_dicke * self.rabi_ac
        return math.inf if coupling == 0 else abs(self.detuning_ac) / coupling

    @property
    def fock_dim(self) -> int:
        return int(self.fock_cutoff) + 1

    def replace(self, **changes) -> "IonParameters":
        return dataclasses.replace(self, **changes)

    def reversed_detuning(self) -> "IonParameters":
        return self.replace(detuning_ac=-self.detuning_ac)


def lamb_dicke(p: IonParameters) -> float:
    """``2 pi cos(theta) sqrt(hbar / (2 m omega)) / lambda`` from the physical fields."""
    return TWO_PI * math.cos(p.beam_angle) * math.sqrt(HBAR / (2 * p.ion_mass * p.mode_frequency)) / p.wavelength


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def number_operator(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def _ket_bra(dim: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((dim, dim), dtype=complex)
    m[i, j] = 1.0
    return m


def h_rs(coupling_g: float, fock_cutoff: int) -> HermitianOperator:
    """Blue sideband ``(g/2)(|0><1| b^dag + |1><0| b)`` on qubit S (x) Fock R."""
    if fock_cutoff < 1:
        raise ValidationError("fock_cutoff must be at least 1")
    b = annihilation(fock_cutoff + 1)
    mat = 0.5 * coupling_g * (np.kron(_ket_bra(2, 0, 1), b.conj().T) + np.kron(_ket_bra(2, 1, 0), b))
    return HermitianOperator(mat, HilbertSpace.of(("S", 2), ("R", fock_cutoff + 1)))


def h_ar_full(p: IonParameters) -> HermitianOperator:
    """Ancilla (levels 0, 1, a) coupled to the mode by an off-resonant red sideband.

    ``(eta Omega_ac / 2)(|a><1| b + |1><a| b^dag) + (delta_ac / 2)(|1><1| - |a><a|)``.
    The detuning term is ordered so that eliminating |a> shifts |1, n> by
    ``+n eta^2 Omega_ac^2 / (4 delta_ac)``, the sign of :func:`conditional_shift`.
    """
    dim = p.fock_dim
    b = annihilation(dim)
    g = 0.5 * p.lamb_dicke * p.rabi_ac
    coupling = g * (np.kron(_ket_bra(3, LEVEL_AUX, LEVEL_1), b) + np.kron(_ket_bra(3, LEVEL_1, LEVEL_AUX), b.conj().T))
    detuning = 0.5 * p.detuning_ac * np.kron(_ket_bra(3, LEVEL_1, LEVEL_1) - _ket_bra(3, LEVEL_AUX, LEVEL_AUX), np.eye(dim))
    return HermitianOperator(coupling + detuning, HilbertSpace.of(("A", 3), ("R", dim)))


def conditional_shift(p: IonParameters) -> float:
    """Phase rate per phonon, ``eta^2 Omega_ac^2 / (4 delta_ac)``, in rad/s."""
    if p.detuning_ac == 0:
        raise ValidationError("detuning_ac must be nonzero")
    return p.lamb_dicke ** 2 * p.rabi_ac ** 2 / (4.0 * p.detuning_ac)


def effective_hamiltonian(p: IonParameters) -> HermitianOperator:
    """``conditional_shift * |1><1| (x) N`` on ancilla qubit (x) Fock."""
    mat = conditional_shift(p) * np.kron(_ket_bra(2, 1, 1), number_operator(p.fock_dim))
    return HermitianOperator(mat, HilbertSpace.of(("A", 2), ("R", p.fock_dim)))


def nu_effective(p: IonParameters, t: float) -> UnitaryOperator:
    """Controlled phase ``|0><0| (x) I + |1><1| (x) exp(-i chi N t)``.

    The adjoint is ``nu_effective(p.reversed_detuning(), t)``.
    """
    chi = conditional_shift(p)
    phases = np.exp(-1j * chi * np.arange(p.fock_dim) * t)
    v = UnitaryOperator(np.diag(phases), HilbertSpace.single(p.fock_dim, "R"), check=False)
    return controlled(v)


def leakage_bound(n: int) -> float:
    """Quoted bound on the population cycled through |a>: 3% + sqrt(n) * 5%."""
    if n < 0:
        raise ValidationError("phonon number must be nonnegative")
    return 0.03 + math.sqrt(n) * 0.05


def characteristic_time(p: IonParameters, drive_time: float) -> float:
    """Characteristic-function argument reached by a conditional-phase drive of
    ``drive_time``: ``chi * drive_time / omega`` (heat is measured in omega N)."""
    return conditional_shift(p) * drive_time / p.mode_frequency


def drive_time_for(p: IonParameters, t: float) -> float:
    return t * p.mode_frequency / conditional_shift(p)


def ion_controlled_phases(p: IonParameters, drive_time: float, gate_order: str = "caption"
                          ) -> tuple[UnitaryOperator, UnitaryOperator]:
    """Hardware versions of the two controlled gates; the inverse is realized by
    reversing the sign of the detuning."""
    forward = nu_effective(p, drive_time)
    backward = nu_effective(p.reversed_detuning(), drive_time)
    return (backward, forward) if gate_order == "caption" else (forward, backward)


@dataclass(frozen=True)
class EliminationReport:
    """Full three-level dynamics versus the effective controlled phase.

    ``max_state_error`` compares the qubit-subspace block of the full evolution
    of ``|1><1| (x) rho_R`` with the effective evolution (trace distance, max
    over the sampled times). ``max_coherence_error`` does the same for
    ``|+><+| (x) rho_R`` in the frame rotating with the n-independent light
    shift ``(delta_ac/2)|1><1|``, so it is sensitive to the phonon-number phases.
    """

    max_state_error: float
    max_coherence_error: float
    max_leakage: float
    leakage_bound: float
    n_max: int
    drive_time: float
    adiabaticity_ratio: float
    adiabatic_warning: bool

    @property
    def leakage_ok(self) -> bool:
        return self.max_leakage <= self.leakage_bound

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["leakage_ok"] = self.leakage_ok
        return d


def elimination_report(
    p: IonParameters,
    t: float,
    initial_reservoir: DensityOperator,
    *,
    samples: int = 2001,
    occupation_threshold: float = OCCUPATION_THRESHOLD,
) -> EliminationReport:
    dim = p.fock_dim
    if initial_reservoir.dim != dim:
        raise ValidationError(
            f"reservoir state has dimension {initial_reservoir.dim}, expected fock_cutoff + 1 = {dim}"
        )
    rho_r = initial_reservoir.matrix
    pops = np.real(np.diag(rho_r))
    occupied = np.nonzero(pops >= occupation_threshold)[0]
    n_max = int(occupied.max()) if occupied.size else 0

    spec = hermitian_eig(h_ar_full(p))
    chi = conditional_shift(p)
    # the fastest population oscillation has angular frequency equal to the
    # spectral width; sample it at least SAMPLES_PER_PERIOD times per period
    width = float(spec.eigenvalues[-1] - spec.eigenvalues[0])
    samples = max(samples, min(MAX_SWEEP_SAMPLES, math.ceil(SAMPLES_PER_PERIOD * abs(t) * width / TWO_PI) + 1))
    times = np.linspace(0.0, t, samples)
    qubit = np.arange(2 * dim)  # levels 0 and 1 come first
    aux = np.arange(dim) + LEVEL_AUX * dim
    n = np.arange(dim)

    def embed(ancilla: np.ndarray) -> np.ndarray:
        full = np.zeros((3, 3), dtype=complex)
        full[:2, :2] = ancilla
        return np.kron(full, rho_r)

    excited = np.array([[0, 0], [0, 1]], dtype=complex)
    plus = np.full((2, 2), 0.5, dtype=complex)
    cases = [(embed(excited), np.kron(excited, rho_r), False), (embed(plus), np.kron(plus, rho_r), True)]

    vecs, vals = spec.eigenvectors, spec.eigenvalues
    max_err = max_coh = max_leak = 0.0
    for chunk in np.array_split(times, max(1, math.ceil(samples / 256))):
        u = (vecs[None] * np.exp(-1j * np.outer(chunk, vals))[:, None, :]) @ vecs.conj().T
        nu = np.concatenate([np.ones((chunk.size, dim)), np.exp(-1j * chi * np.outer(chunk, n))], axis=1)
        frame = np.concatenate(
            [np.ones((chunk.size, dim)), np.repeat(np.exp(0.5j * p.detuning_ac * chunk)[:, None], dim, axis=1)],
            axis=1,
        )
        for init, target, rotate in cases:
            out = u @ init @ u.conj().transpose(0, 2, 1)
            if not rotate:
                leak = np.real(np.einsum("tii->t", out[:, aux][:, :, aux]))
                max_leak = max(max_leak, float(leak.max()))
            block = out[:, qubit][:, :, qubit]
            if rotate:
                block = block * (frame[:, :, None] * frame.conj()[:, None, :])
            eff = target[None] * (nu[:, :, None] * nu.conj()[:, None, :])
            diff = block - eff
            dist = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().transpose(0, 2, 1)))), axis=1)
            if rotate:
                max_coh = max(max_coh, float(dist.max()))
            else:
                max_err = max(max_err, float(dist.max()))

    ratio = p.adiabaticity_ratio
    return EliminationReport(
        max_state_error=max_err,
        max_coherence_error=max_coh,
        max_leakage=max_leak,
        leakage_bound=leakage_bound(n_max),
        n_max=n_max,
        drive_time=float(t),
        adiabaticity_ratio=ratio,
        adiabatic_warning=ratio < ADIABATICITY_WARNING,
    )


def reservoir_hamiltonian(p: IonParameters) -> HermitianOperator:
    return HermitianOperator(p.mode_frequency * number_operator(p.fock_dim),
                             HilbertSpace.single(p.fock_dim, "R"), check=False)


def thermal_reservoir(p: IonParameters, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> DensityOperator:
    return thermal_oscillator(OscillatorThermalSpec(p.mode_frequency, p.temperature, p.fock_cutoff, tail_tolerance))


def pi_pulse_time(p: IonParameters) -> float:
    """Drive time for a full |1, 0> -> |0, 1> transfer, ``pi / (eta Omega_S)``."""
    return math.pi / (p.lamb_dicke * p.rabi_S)


def build_protocol(
    p: IonParameters,
    drive_time: float,
    system_state: DensityOperator,
    *,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
    boundary_tolerance: float = BOUNDARY_TOLERANCE,
    gap_cluster_tol: float | None = None,
) -> ProtocolInstance:
    """Blue-sideband protocol ``exp(-i H_RS drive_time)`` with coupling
    ``eta * Omega_S``, packaged on R (x) S with a thermal mode reservoir."""
    if system_state.dim != 2:
        raise ValidationError("the system is a qubit")
    # validates the truncation of the initial thermal state
    thermal_reservoir(p, tail_tolerance)
    h = h_rs(p.lamb_dicke * p.rabi_S, p.fock_cutoff)
    u = permute(evolution(h, drive_time), ["R", "S"])
    kwargs = {} if gap_cluster_tol is None else {"gap_cluster_tol": gap_cluster_tol}
    inst = ProtocolInstance(u, reservoir_hamiltonian(p), beta_from_temperature(p.temperature), system_state, **kwargs)
    # the accepted thermal tail already sits on the top level; flag what the drive adds
    top = float(np.real(inst.final_reservoir.matrix[-1, -1] - inst.reservoir_state.matrix[-1, -1]))
    if top > boundary_tolerance:
        raise CutoffError(
            f"the drive moves population {top:.3e} onto the top Fock level {p.fock_cutoff}; "
            "increase fock_cutoff",
            minimal_cutoff=p.fock_cutoff + 1,
        )
    return inst


def rabi_transfer_probability(p: IonParameters, drive_time: float, populations: np.ndarray) -> float:
    """Closed-form probability of one phonon being added when S starts in |1>:
    ``sum_n p_n sin^2(eta Omega_S sqrt(n + 1) drive_time / 2)`` over blocks below the cutoff."""
    g = p.lamb_dicke * p.rabi_S
    n = np.arange(len(populations) - 1)
    return float(np.dot(populations[:-1], np.sin(0.5 * g * np.sqrt(n + 1) * drive_time) ** 2))


__all__ = [
    "IonParameters", "lamb_dicke", "h_rs", "h_ar_full", "conditional_shift", "effective_hamiltonian",
    "nu_effective", "leakage_bound", "characteristic_time", "drive_time_for", "ion_controlled_phases",
    "EliminationReport", "elimination_report", "reservoir_hamiltonian", "thermal_reservoir",
    "pi_pulse_time", "build_protocol", "rabi_transfer_probability", "annihilation", "number_operator",
]
