"""Ancilla interferometer: controlled reservoir phases around the protocol.

The ancilla starts in |+>, a reservoir phase gate is applied conditioned on
ancilla |1>, then the protocol on R (x) S, then the inverse conditional gate.
The ancilla coherence then reads ``Theta(t) = tr[(X - iY) rho_A] = 2 rho_A[0, 1]``.

With ``v_t = exp(-i H_R t)`` the default ``gate_order="caption"`` applies
controlled ``v_t^dag`` first and controlled ``v_t`` second, which gives
``sum_Q P(Q) exp(+i t Q)``. ``gate_order="body"`` swaps the two gates and
yields the complex conjugate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ValidationError
from .heat import ProtocolInstance
from .operators import (
    DensityOperator,
    HilbertSpace,
    UnitaryOperator,
    controlled,
    evolution,
    partial_trace,
    pure_state,
    tensor,
)

GATE_ORDERS = ("caption", "body")
PLUS = pure_state([1.0, 1.0], HilbertSpace.single(2, "A"))


class Stage(enum.Enum):
    PREPARED = 0
    FIRST_CONTROLLED = 1
    PROTOCOL = 2
    SECOND_CONTROLLED = 3


@dataclass(frozen=True, eq=False)
class CircuitStageState:
    stage: Stage
    state: DensityOperator


def prepare_initial(rho_r: DensityOperator, rho_s: DensityOperator) -> CircuitStageState:
    """``|+><+| (x) rho_R (x) rho_S`` on A (x) R (x) S."""
    r = DensityOperator(rho_r.matrix, HilbertSpace.single(rho_r.dim, "R"), check=False)
    s = DensityOperator(rho_s.matrix, HilbertSpace.single(rho_s.dim, "S"), check=False)
    return CircuitStageState(Stage.PREPARED, tensor(PLUS, r, s))


def controlled_phases(
    inst: ProtocolInstance, t: float, gate_order: str = "caption"
) -> tuple[UnitaryOperator, UnitaryOperator]:
    """The two controlled reservoir gates on A (x) R, in application order."""
    if gate_order not in GATE_ORDERS:
        raise ConfigurationError(f"gate_order must be one of {GATE_ORDERS}, got {gate_order!r}")
    v = evolution(inst.reservoir_h, t)
    cv, cv_dag = controlled(v), controlled(v.dag())
    return (cv_dag, cv) if gate_order == "caption" else (cv, cv_dag)


def _on_ars(gate: UnitaryOperator, dim_r: int, dim_s: int) -> np.ndarray:
    if gate.dim != 2 * dim_r:
        raise ConfigurationError(
            f"controlled gate has dimension {gate.dim}, expected 2 * dim(R) = {2 * dim_r}"
        )
    return np.kron(gate.matrix, np.eye(dim_s))


def run_circuit(
    inst: ProtocolInstance,
    t: float,
    *,
    gate_order: str = "caption",
    gates: tuple[UnitaryOperator, UnitaryOperator] | None = None,
    return_stages: bool = False,
):
    """Propagate the four circuit stages and return the ancilla state.

    ``gates`` overrides the two controlled operations (each on A (x) R), e.g.
    with hardware-level gates from :mod:`heatline.ion`. With
    ``return_stages=True`` the result is ``(rho_A, [CircuitStageState, ...])``.
    """
    d_r, d_s = inst.dim_r, inst.dim_s
    first, second = gates if gates is not None else controlled_phases(inst, t, gate_order)
    stage0 = prepare_initial(inst.reservoir_state, inst.system_state)
    space = stage0.state.space
    ops = [
        (Stage.FIRST_CONTROLLED, _on_ars(first, d_r, d_s)),
        (Stage.PROTOCOL, np.kron(np.eye(2), inst.protocol.matrix)),
        (Stage.SECOND_CONTROLLED, _on_ars(second, d_r, d_s)),
    ]
    stages = [stage0]
    rho = stage0.state.matrix
    for stage, u in ops:
        rho = u @ rho @ u.conj().T
        if return_stages:
            stages.append(CircuitStageState(stage, DensityOperator(rho, space)))
    final = DensityOperator(rho, space, check=False)
    rho_a = partial_trace(final, ["A"])
    return (rho_a, stages) if return_stages else rho_a


def readout_theta(rho_a: DensityOperator) -> complex:
    """``tr[(X - iY) rho_A]``, i.e. twice the upper-right entry."""
    if rho_a.dim != 2:
        raise ConfigurationError("readout needs a single-qubit ancilla state")
    return complex(2.0 * rho_a.matrix[0, 1])


def measurement_probability(theta: complex, phase: float) -> float:
    """Probability of ancilla outcome |0> after the final pi/2 pulse with phase ``phase``.

    ``phase = 0`` gives ``(1 + Im Theta)/2`` and ``phase = pi/2`` gives
    ``(1 + Re Theta)/2``.
    """
    if abs(theta) > 1 + 1e-9:
        raise ValidationError(f"|Theta| = {abs(theta):.12g} exceeds 1")
    p = 0.5 * (1.0 + (np.exp(1j * phase) * theta).imag)
    return float(min(1.0, max(0.0, p)))


@dataclass(frozen=True)
class ShotPlan:
    shots: int
    phase: float
    seed: int

    def __post_init__(self):
        if self.shots < 1:
            raise ValidationError("a shot plan needs at least one shot")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed))


def shot_plans(shots: int, seed: int, point: int = 0) -> tuple[ShotPlan, ShotPlan]:
    """Plans for ``phase = 0`` and ``phase = pi/2`` with independent Philox
    streams derived from ``(seed, point)``."""
    children = np.random.SeedSequence(entropy=seed, spawn_key=(point,)).spawn(2)
    s0, s1 = (int(c.generate_state(1, np.uint64)[0]) for c in children)
    return ShotPlan(shots, 0.0, s0), ShotPlan(shots, math.pi / 2, s1)


@dataclass(frozen=True)
class ThetaEstimate:
    t: float
    theta: complex
    std_error_re: float
    std_error_im: float
    shots_per_phase: int


def sample_shots(
    inst: ProtocolInstance | None,
    t: float,
    plans: tuple[ShotPlan, ShotPlan],
    *,
    theta: complex | None = None,
    gate_order: str = "caption",
    gates: tuple[UnitaryOperator, UnitaryOperator] | None = None,
) -> ThetaEstimate:
    """Finite-shot estimate of Theta(t) from the two readout phases.

    The exact coherence comes from :func:`run_circuit` unless ``theta`` is given.
    """
    by_phase = {}
    for plan in plans:
        if math.isclose(plan.phase, 0.0, abs_tol=1e-12):
            by_phase["im"] = plan
        elif math.isclose(plan.phase, math.pi / 2, abs_tol=1e-12):
            by_phase["re"] = plan
    if set(by_phase) != {"re", "im"}:
        raise ConfigurationError("sample_shots needs one plan at phase 0 and one at phase pi/2")
    if by_phase["re"].shots != by_phase["im"].shots:
        raise ConfigurationError("both readout phases must use the same number of shots")
    if theta is None:
        if inst is None:
            raise ConfigurationError("either a protocol instance or theta is required")
        theta = readout_theta(run_circuit(inst, t, gate_order=gate_order, gates=gates))
    m = by_phase["re"].shots
    est = {}
    err = {}
    for part, plan in by_phase.items():
        p = measurement_probability(theta, plan.phase)
        p_hat = plan.generator().binomial(m, p) / m
        est[part] = 2.0 * p_hat - 1.0
        err[part] = 2.0 * math.sqrt(p_hat * (1.0 - p_hat) / m)
    return ThetaEstimate(float(t), complex(est["re"], est["im"]), err["re"], err["im"], m)


__all__ = [
    "Stage", "CircuitStageState", "prepare_initial", "controlled_phases", "run_circuit",
    "readout_theta", "measurement_probability", "ShotPlan", "shot_plans", "ThetaEstimate",
    "sample_shots", "GATE_ORDERS",
]
