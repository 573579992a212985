"""Declarative scenarios: parse a JSON document, run a pipeline, write tables.

Three modes share one pipeline:

``exact``
    Theta(t) from the trace formula.
``shots``
    Theta(t) estimated from finite ancilla readouts at phases 0 and pi/2.
``ion``
    Trapped-ion protocol (blue-sideband drive of ``drive_time``) read out by
    the adiabatically eliminated conditional-phase gates. ``t`` is the
    characteristic-function argument; the matching conditional-phase drive
    time is ``t * omega / chi`` and is reported in ``summary.json``.

The schema lives in ``scenario.schema.json`` next to this module.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import __version__
from .constants import HBAR, K_B, TWO_PI
from .errors import ConfigurationError, HeatlineError
from .heat import (
    DEFAULT_GAP_TOL,
    HeatDistribution,
    LandauerReport,
    ProtocolInstance,
    average_heat,
    characteristic_direct,
    landauer_report,
    moment,
    swap_unitary,
    tpm_distribution,
)
from .interferometer import readout_theta, run_circuit, sample_shots, shot_plans
from .ion import (
    EliminationReport,
    IonParameters,
    build_protocol,
    conditional_shift,
    drive_time_for,
    elimination_report,
    ion_controlled_phases,
    pi_pulse_time,
)
from .operators import (
    DensityOperator,
    HermitianOperator,
    HilbertSpace,
    UnitaryOperator,
    basis_state,
    identity,
    maximally_mixed,
    pure_state,
)
from .spectroscopy import (
    CharacteristicSamples,
    GapSet,
    ReconstructionResult,
    TimeGrid,
    gap_set,
    reconstruct,
    time_grid,
)
from .thermal import DEFAULT_TAIL_TOLERANCE, OscillatorThermalSpec, thermal_oscillator

SCHEMA_VERSION = 1
ALL_OUTPUTS = ("theta_samples", "distribution", "moments", "landauer", "elimination")
THETA_HEADER = ["t", "re_theta", "im_theta", "stderr_re", "stderr_im"]
DISTRIBUTION_HEADER = ["q", "p", "p_reconstructed"]


def load_schema() -> dict:
    return json.loads(resources.files("heatline").joinpath("scenario.schema.json").read_text())


# ----------------------------------------------------------------------------
# Parsing
# ----------------------------------------------------------------------------


def _locate(text: str, path: Sequence[Any]) -> int | None:
    """Best-effort line number of the value at ``path`` inside ``text``."""
    if not text:
        return None
    pos = 0
    found = False
    for key in path:
        if isinstance(key, int):
            continue
        hit = text.find(json.dumps(key), pos)
        if hit < 0:
            break
        pos, found = hit, True
    return text.count("\n", 0, pos) + 1 if found else None


class _Context:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source

    def error(self, path: Sequence[Any], message: str) -> ConfigurationError:
        dotted = ".".join(str(p) for p in path) or "<root>"
        line = _locate(self.text, path)
        where = f"{self.source}:{line}" if line else self.source
        return ConfigurationError(f"{where}: {dotted}: {message}")


def _matrix(value: Any, path: list, ctx: _Context) -> np.ndarray:
    if isinstance(value, dict):
        re = np.asarray(value["re"], dtype=float)
        im = np.asarray(value.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape:
            raise ctx.error(path, f"real part {re.shape} and imaginary part {im.shape} differ in shape")
        mat = re + 1j * im
    else:
        try:
            mat = np.asarray(value, dtype=float).astype(complex)
        except ValueError:
            raise ctx.error(path, "rows have different lengths") from None
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ctx.error(path, f"matrix must be square, got shape {mat.shape}")
    return mat


def _preset_state(name: str, dim: int) -> DensityOperator:
    space = HilbertSpace.single(dim, "S")
    if name == "zero":
        return basis_state(space, 0)
    if name == "one":
        return basis_state(space, 1 if dim > 1 else 0)
    if name == "plus":
        return pure_state(np.ones(dim), space)
    return maximally_mixed(space)


def _set_path(doc: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = doc
    for key in keys[:-1]:
        if isinstance(node, list):
            node = node[int(key)]
        else:
            node = node.setdefault(key, {})
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def apply_overrides(doc: dict, overrides: dict[str, Any] | None) -> dict:
    doc = copy.deepcopy(doc)
    for dotted, value in (overrides or {}).items():
        _set_path(doc, dotted, value)
    return doc


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Validated scenario with defaults filled in."""

    mode: str
    document: dict
    system_state: DensityOperator
    reservoir_h: HermitianOperator | None = None
    beta: float | None = None
    oscillator: OscillatorThermalSpec | None = None
    protocol: UnitaryOperator | None = None
    ion: IonParameters | None = None
    drive_time: float | None = None
    time_grid: Any = "auto"  # "auto", int (auto with N points) or list of floats
    shots: int | None = None
    seed: int | None = None
    outputs: tuple[str, ...] = ()
    gap_cluster_tol: float = DEFAULT_GAP_TOL
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    gate_order: str = "caption"
    reconstruct: bool = True
    elimination_samples: int = 2001
    source: str = "<scenario>"

    @property
    def adiabaticity_ratio(self) -> float | None:
        return None if self.ion is None else self.ion.adiabaticity_ratio

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def parse_scenario(path: str | os.PathLike, overrides: dict[str, Any] | None = None) -> ScenarioConfig:
    """Read, schema-check and validate a scenario file.

    ``overrides`` maps dotted field paths (``"reservoir.beta"``) to values and
    is applied before validation.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read scenario ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}: malformed JSON: {exc.msg}") from None
    return config_from_document(doc, overrides=overrides, text=text, source=str(path))


def config_from_document(
    doc: dict, overrides: dict[str, Any] | None = None, text: str = "", source: str = "<scenario>"
) -> ScenarioConfig:
    doc = apply_overrides(doc, overrides)
    ctx = _Context(text, source)
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ctx.error(list(err.absolute_path), err.message)

    mode = doc["mode"]
    opts = doc.get("options", {})
    tol = float(opts.get("gap_cluster_tol", DEFAULT_GAP_TOL))
    kwargs: dict[str, Any] = dict(
        mode=mode,
        document=doc,
        gap_cluster_tol=tol,
        tail_tolerance=float(opts.get("tail_tolerance", DEFAULT_TAIL_TOLERANCE)),
        gate_order=opts.get("gate_order", "caption"),
        reconstruct=bool(opts.get("reconstruct", True)),
        elimination_samples=int(opts.get("elimination_samples", 2001)),
        source=source,
    )

    # reservoir --------------------------------------------------------------
    d_r = None
    reservoir = doc.get("reservoir")
    if mode == "ion":
        if reservoir is not None:
            raise ctx.error(["reservoir"], "ion mode takes the reservoir from the 'ion' block; remove 'reservoir'")
        if "ion" not in doc:
            raise ctx.error(["ion"], "ion mode requires an 'ion' block")
        ion_doc = dict(doc["ion"])
        preset = ion_doc.pop("preset", None)
        try:
            ion = IonParameters.working_point(**ion_doc) if preset == "working_point" else IonParameters(**ion_doc)
        except TypeError as exc:
            raise ctx.error(["ion"], f"missing ion parameters ({exc})") from None
        except HeatlineError as exc:
            raise ctx.error(["ion"], str(exc)) from None
        kwargs["ion"] = ion
        d_r = ion.fock_dim
    else:
        if "ion" in doc:
            raise ctx.error(["ion"], "the 'ion' block is only allowed in ion mode")
        if reservoir is None:
            raise ctx.error(["reservoir"], "missing field")
        explicit = "hamiltonian" in reservoir or "beta" in reservoir
        if explicit and "oscillator" in reservoir:
            raise ctx.error(["reservoir"], "give either hamiltonian+beta or oscillator, not both")
        if explicit:
            for key in ("hamiltonian", "beta"):
                if key not in reservoir:
                    raise ctx.error(["reservoir", key], "missing field")
            mat = _matrix(reservoir["hamiltonian"], ["reservoir", "hamiltonian"], ctx)
            try:
                kwargs["reservoir_h"] = HermitianOperator(mat, HilbertSpace.single(mat.shape[0], "R"))
            except HeatlineError as exc:
                raise ctx.error(["reservoir", "hamiltonian"], str(exc)) from None
            kwargs["beta"] = float(reservoir["beta"])
        elif "oscillator" in reservoir:
            osc = reservoir["oscillator"]
            spec = OscillatorThermalSpec(
                float(osc["mode_frequency"]), float(osc["temperature"]), int(osc["fock_cutoff"]),
                kwargs["tail_tolerance"],
            )
            kwargs["oscillator"] = spec
            n = np.arange(spec.fock_cutoff + 1, dtype=float)
            kwargs["reservoir_h"] = HermitianOperator(
                np.diag(spec.mode_frequency * n), HilbertSpace.single(n.size, "R"), check=False
            )
            kwargs["beta"] = HBAR / (K_B * spec.temperature)
        else:
            raise ctx.error(["reservoir"], "needs hamiltonian+beta or oscillator")
        d_r = kwargs["reservoir_h"].dim

    # protocol ---------------------------------------------------------------
    protocol = doc.get("protocol")
    if protocol is None:
        raise ctx.error(["protocol"], "missing field")
    protocol_matrix = None
    preset_protocol = protocol if isinstance(protocol, str) else None
    if isinstance(protocol, dict):
        if ("matrix" in protocol) == ("ion_drive" in protocol):
            raise ctx.error(["protocol"], "give exactly one of 'matrix' or 'ion_drive'")
        if "ion_drive" in protocol:
            if mode != "ion":
                raise ctx.error(["protocol", "ion_drive"], "ion_drive protocols need ion mode")
            dt = protocol["ion_drive"]["drive_time"]
            kwargs["drive_time"] = pi_pulse_time(kwargs["ion"]) if dt == "pi_pulse" else float(dt)
        else:
            protocol_matrix = _matrix(protocol["matrix"], ["protocol", "matrix"], ctx)
    if mode == "ion" and kwargs.get("drive_time") is None:
        raise ctx.error(["protocol"], "ion mode requires protocol.ion_drive")

    # system state -----------------------------------------------------------
    state = doc.get("system_state", "zero")
    if isinstance(state, dict) and "matrix" in state:
        mat = _matrix(state["matrix"], ["system_state", "matrix"], ctx)
        try:
            rho_s = DensityOperator(mat, HilbertSpace.single(mat.shape[0], "S"))
        except HeatlineError as exc:
            raise ctx.error(["system_state", "matrix"], str(exc)) from None
    else:
        name = state if isinstance(state, str) else state.get("preset", "zero")
        if isinstance(state, dict) and "dim" in state:
            d_s = int(state["dim"])
        elif protocol_matrix is not None:
            if protocol_matrix.shape[0] % d_r:
                raise ctx.error(["protocol", "matrix"], f"dimension {protocol_matrix.shape[0]} is not a multiple of dim(R) = {d_r}")
            d_s = protocol_matrix.shape[0] // d_r
        elif preset_protocol == "swap":
            d_s = d_r
        else:
            d_s = 2
        rho_s = _preset_state(name, d_s)
    kwargs["system_state"] = rho_s
    d_s = rho_s.dim
    if mode == "ion" and d_s != 2:
        raise ctx.error(["system_state"], "the ion system is a qubit")

    if mode != "ion":
        if preset_protocol == "identity":
            kwargs["protocol"] = identity(HilbertSpace.of(("R", d_r), ("S", d_s)))
        elif preset_protocol == "swap":
            if d_s != d_r:
                raise ctx.error(["protocol"], f"swap needs dim(S) = dim(R), got {d_s} and {d_r}")
            kwargs["protocol"] = swap_unitary(d_r)
        else:
            if protocol_matrix.shape[0] != d_r * d_s:
                raise ctx.error(
                    ["protocol", "matrix"],
                    f"dimension {protocol_matrix.shape[0]} != dim(R) * dim(S) = {d_r} * {d_s}",
                )
            try:
                kwargs["protocol"] = UnitaryOperator(protocol_matrix, HilbertSpace.of(("R", d_r), ("S", d_s)))
            except HeatlineError as exc:
                raise ctx.error(["protocol", "matrix"], str(exc)) from None

    # sampling ---------------------------------------------------------------
    grid = doc.get("time_grid", "auto")
    if isinstance(grid, dict):
        grid = int(grid["auto"]["points"]) if "points" in grid["auto"] else "auto"
    kwargs["time_grid"] = grid
    kwargs["shots"] = doc.get("shots")
    kwargs["seed"] = doc.get("seed")
    if mode == "shots" or kwargs["shots"] is not None:
        for key in ("shots", "seed"):
            if kwargs[key] is None:
                raise ctx.error([key], "missing field (required when sampling shots)")

    outputs = doc.get("outputs")
    if outputs is None:
        outputs = [o for o in ALL_OUTPUTS if o != "elimination" or mode == "ion"]
    if "elimination" in outputs and mode != "ion":
        raise ctx.error(["outputs"], "'elimination' is only available in ion mode")
    kwargs["outputs"] = tuple(outputs)
    return ScenarioConfig(**kwargs)


# ----------------------------------------------------------------------------
# Running
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ResultBundle:
    config: ScenarioConfig
    instance: ProtocolInstance
    distribution: HeatDistribution
    gaps: GapSet
    theta_samples: CharacteristicSamples | None = None
    grid: TimeGrid | None = None
    reconstruction: ReconstructionResult | None = None
    moments: dict = field(default_factory=dict)
    landauer: LandauerReport | None = None
    elimination: EliminationReport | None = None
    provenance: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


def build_instance(config: ScenarioConfig) -> ProtocolInstance:
    if config.mode == "ion":
        return build_protocol(
            config.ion, config.drive_time, config.system_state,
            tail_tolerance=config.tail_tolerance, gap_cluster_tol=config.gap_cluster_tol,
        )
    if config.oscillator is not None:
        thermal_oscillator(config.oscillator)  # raises if the truncation is too small
    return ProtocolInstance(
        config.protocol, config.reservoir_h, config.beta, config.system_state, config.gap_cluster_tol
    )


def _theta_samples(config: ScenarioConfig, inst: ProtocolInstance, times: np.ndarray, extras: dict
                   ) -> CharacteristicSamples:
    if config.mode == "exact":
        return CharacteristicSamples(times, characteristic_direct(inst, times))
    if config.mode == "shots":
        estimates = [
            sample_shots(inst, t, shot_plans(config.shots, config.seed, j), gate_order=config.gate_order)
            for j, t in enumerate(times)
        ]
        return CharacteristicSamples.from_estimates(estimates)
    p = config.ion
    drive_times = [drive_time_for(p, t) for t in times]
    extras["conditional_phase_drive_times"] = drive_times
    exact = [
        readout_theta(run_circuit(inst, t, gates=ion_controlled_phases(p, dt, config.gate_order)))
        for t, dt in zip(times, drive_times)
    ]
    if config.shots is None:
        return CharacteristicSamples(times, exact)
    estimates = [
        sample_shots(None, t, shot_plans(config.shots, config.seed, j), theta=theta)
        for j, (t, theta) in enumerate(zip(times, exact))
    ]
    return CharacteristicSamples.from_estimates(estimates)


def run_scenario(config: ScenarioConfig) -> ResultBundle:
    """Deterministic given the config (including its seed).

    Module errors are re-raised with the scenario source prefixed.
    """
    try:
        return _run(config)
    except HeatlineError as exc:
        exc.args = (f"{config.source}: {exc}",) + exc.args[1:]
        raise


def _run(config: ScenarioConfig) -> ResultBundle:
    inst = build_instance(config)
    dist = tpm_distribution(inst)
    gaps = gap_set(inst.reservoir_h, config.gap_cluster_tol)
    extras: dict[str, Any] = {"average_heat": average_heat(inst)}

    grid = None
    if isinstance(config.time_grid, list):
        times = np.asarray(config.time_grid, dtype=float)
    else:
        points = None if config.time_grid == "auto" else config.time_grid
        grid = time_grid(gaps, points)
        times = grid.times

    samples = _theta_samples(config, inst, times, extras)
    recon = reconstruct(samples, gaps) if config.reconstruct else None

    moments = {"oracle": [moment(dist, k) for k in range(1, 5)]}
    if recon is not None:
        moments["reconstructed"] = [moment(recon.distribution, k) for k in range(1, 5)]

    elim = None
    if config.mode == "ion":
        p = config.ion
        chi = conditional_shift(p)
        extras["ion"] = {
            "lamb_dicke": p.lamb_dicke,
            "conditional_shift": chi,
            "adiabaticity_ratio": p.adiabaticity_ratio,
            "protocol_drive_time": config.drive_time,
        }
        if "elimination" in config.outputs:
            period = TWO_PI / abs(chi) if chi else 0.0
            elim = elimination_report(p, period, inst.reservoir_state, samples=config.elimination_samples)

    provenance = {
        "config_sha256": config.config_hash,
        "seed": config.seed,
        "version": __version__,
        "mode": config.mode,
    }
    return ResultBundle(
        config=config,
        instance=inst,
        distribution=dist,
        gaps=gaps,
        theta_samples=samples,
        grid=grid,
        reconstruction=recon,
        moments=moments,
        landauer=landauer_report(inst),
        elimination=elim,
        provenance=provenance,
        extras=extras,
    )


# ----------------------------------------------------------------------------
# Emission
# ----------------------------------------------------------------------------


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _json_value(obj: Any, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_json_value(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{inner}{_json_value(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json(obj: Any) -> str:
    """JSON text with every float written to 17 significant digits (non-finite -> null)."""
    return _json_value(obj, 0) + "\n"


def _provenance_line(provenance: dict) -> str:
    return "# provenance: " + " ".join(f"{k}={provenance[k]}" for k in provenance)


def theta_csv(bundle: ResultBundle) -> str:
    s = bundle.theta_samples
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(THETA_HEADER)
    for row in zip(s.t, s.theta.real, s.theta.imag, s.stderr_re, s.stderr_im):
        writer.writerow([fmt(v) for v in row])
    buf.write(_provenance_line(bundle.provenance) + "\n")
    return buf.getvalue()


def distribution_rows(bundle: ResultBundle) -> list[tuple[float, float, float | None]]:
    """One row per gap: oracle probability and (if available) reconstructed one."""
    gaps = bundle.gaps.gaps
    oracle = np.zeros(gaps.size)
    for q, p in bundle.distribution.atoms:
        oracle[np.argmin(np.abs(gaps - q))] += p
    recon = bundle.reconstruction.distribution.p if bundle.reconstruction is not None else None
    return [(float(g), float(oracle[i]), None if recon is None else float(recon[i])) for i, g in enumerate(gaps)]


def distribution_csv(bundle: ResultBundle) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DISTRIBUTION_HEADER)
    for q, p, pr in distribution_rows(bundle):
        writer.writerow([fmt(q), fmt(p), "" if pr is None else fmt(pr)])
    buf.write(_provenance_line(bundle.provenance) + "\n")
    return buf.getvalue()


def summary(bundle: ResultBundle) -> dict:
    out: dict[str, Any] = {"provenance": bundle.provenance, "average_heat": bundle.extras["average_heat"]}
    outputs = bundle.config.outputs
    if "moments" in outputs:
        out["moments"] = bundle.moments
    if "landauer" in outputs and bundle.landauer is not None:
        out["landauer"] = bundle.landauer.as_dict()
    if "elimination" in outputs and bundle.elimination is not None:
        out["elimination"] = bundle.elimination.as_dict()
    if bundle.reconstruction is not None:
        r = bundle.reconstruction
        out["reconstruction"] = {
            "residual_rms": r.residual_rms,
            "projected_residual_rms": r.projected_residual_rms,
            "condition_estimate": r.condition_estimate,
            "projection_distance": r.projection_distance,
        }
    if bundle.grid is not None:
        g = bundle.grid
        out["time_grid"] = {
            "points": len(g), "spacing": g.spacing, "span": g.span,
            "sampling_limit": g.sampling_limit, "resolution_limit": g.resolution_limit,
            "sampling_ok": g.sampling_ok, "resolution_ok": g.resolution_ok,
        }
    if "ion" in bundle.extras:
        out["ion"] = dict(bundle.extras["ion"])
        if "conditional_phase_drive_times" in bundle.extras:
            out["ion"]["conditional_phase_drive_times"] = bundle.extras["conditional_phase_drive_times"]
    return out


def emit(bundle: ResultBundle, out_dir: str | os.PathLike) -> list[Path]:
    """Write ``theta.csv``, ``distribution.csv`` and ``summary.json`` as requested."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    files: list[tuple[str, str]] = []
    if "theta_samples" in bundle.config.outputs:
        files.append(("theta.csv", theta_csv(bundle)))
    if "distribution" in bundle.config.outputs:
        files.append(("distribution.csv", distribution_csv(bundle)))
    files.append(("summary.json", to_json(summary(bundle))))
    written = []
    for name, content in files:
        target = out / name
        try:
            target.write_text(content)
        except OSError as exc:
            raise OSError(f"cannot write {target}: {exc.strerror}") from exc
        written.append(target)
    return written


__all__ = [
    "ScenarioConfig", "ResultBundle", "parse_scenario", "config_from_document", "apply_overrides",
    "run_scenario", "build_instance", "emit", "to_json", "theta_csv", "distribution_csv", "summary",
    "load_schema", "THETA_HEADER", "DISTRIBUTION_HEADER",
]
