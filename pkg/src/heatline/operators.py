"""Dense operator algebra on labeled tensor-product spaces.

Conventions
-----------
* Subsystems are ordered as listed in a :class:`HilbertSpace`; the circuit
  code always uses ancilla (``"A"``) x reservoir (``"R"``) x system (``"S"``).
* Energies are in units with hbar = 1, so ``evolution(h, t) = exp(-i h t)``.
* Every unitary in this package is generated by a Hermitian operator, so
  exponentials go through :func:`hermitian_eig` rather than a general expm.
"""

from __future__ import annotations

import string
from dataclasses import InitVar, dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, ValidationError

HERMITIAN_RTOL = 1e-12
UNITARY_ATOL = 1e-10
TRACE_ATOL = 1e-10
EIGEN_ATOL = 1e-10


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered list of ``(label, dim)`` pairs."""

    subsystems: tuple[tuple[str, int], ...]

    def __post_init__(self):
        subs = tuple((str(label), int(dim)) for label, dim in self.subsystems)
        if not subs:
            raise ConfigurationError("a Hilbert space needs at least one subsystem")
        labels = [label for label, _ in subs]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"duplicate subsystem labels in {labels}")
        for label, dim in subs:
            if dim < 1:
                raise ConfigurationError(f"subsystem {label!r} has dimension {dim} < 1")
        object.__setattr__(self, "subsystems", subs)

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "HilbertSpace":
        return cls(tuple(pairs))

    @classmethod
    def single(cls, dim: int, label: str = "H") -> "HilbertSpace":
        return cls(((label, dim),))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ConfigurationError(
                f"unknown subsystem label {label!r}; space has {list(self.labels)}"
            ) from None

    def __add__(self, other: "HilbertSpace") -> "HilbertSpace":
        return HilbertSpace(self.subsystems + other.subsystems)

    def __len__(self) -> int:
        return len(self.subsystems)

    def restrict(self, labels: Iterable[str]) -> "HilbertSpace":
        wanted = set(labels)
        for label in wanted:
            self.index(label)
        return HilbertSpace(tuple(s for s in self.subsystems if s[0] in wanted))


def _as_space(space: HilbertSpace | int | None, dim: int) -> HilbertSpace:
    if space is None:
        return HilbertSpace.single(dim)
    if isinstance(space, int):
        return HilbertSpace.single(space)
    return space


@dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix acting on ``space``.

    The stored array is a read-only copy; subclasses validate their
    invariants on construction unless ``check=False`` is passed.
    """

    matrix: np.ndarray
    space: HilbertSpace = None  # type: ignore[assignment]
    check: InitVar[bool] = True

    def __post_init__(self, check: bool):
        mat = np.array(self.matrix, dtype=complex, copy=True)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ConfigurationError(f"operator matrix must be square, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ValidationError("operator matrix contains NaN or Inf")
        space = _as_space(self.space, mat.shape[0])
        if space.total_dim != mat.shape[0]:
            raise ConfigurationError(
                f"matrix dimension {mat.shape[0]} does not match space {space.subsystems}"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "space", space)
        if check:
            self._validate()

    def _validate(self) -> None:
        pass

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> "Operator":
        return type(self)(self.matrix.conj().T, self.space, check=False)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(space={self.space.subsystems})"


def hermiticity_defect(mat: np.ndarray) -> float:
    """``max|mat - mat^dagger| / max|mat|`` (zero for the zero matrix)."""
    scale = np.max(np.abs(mat)) if mat.size else 0.0
    defect = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
    return float(defect / scale) if scale > 0 else 0.0


class HermitianOperator(Operator):
    def _validate(self) -> None:
        defect = hermiticity_defect(self.matrix)
        if defect > HERMITIAN_RTOL:
            raise ValidationError(f"operator is not Hermitian (relative defect {defect:.3e})")

    @cached_property
    def spectrum(self) -> "SpectralDecomposition":
        return hermitian_eig(self)

    @property
    def energies(self) -> np.ndarray:
        return self.spectrum.eigenvalues


class UnitaryOperator(Operator):
    def _validate(self) -> None:
        eye = np.eye(self.dim)
        defect = float(np.max(np.abs(self.matrix.conj().T @ self.matrix - eye)))
        if defect > UNITARY_ATOL:
            raise ValidationError(f"operator is not unitary (max |U^dag U - I| = {defect:.3e})")

    def __matmul__(self, other: "UnitaryOperator") -> "UnitaryOperator":
        if other.space != self.space:
            raise ConfigurationError("cannot multiply unitaries on different spaces")
        return UnitaryOperator(self.matrix @ other.matrix, self.space, check=False)


class DensityOperator(Operator):
    def _validate(self) -> None:
        defect = hermiticity_defect(self.matrix)
        if defect > HERMITIAN_RTOL:
            raise ValidationError(f"density matrix is not Hermitian (relative defect {defect:.3e})")
        tr = np.trace(self.matrix).real
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValidationError(f"density matrix trace is {tr!r}, expected 1")
        lowest = self.eigenvalues[0]
        if lowest < -EIGEN_ATOL:
            raise ValidationError(f"density matrix has negative eigenvalue {lowest:.3e}")

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def evolve(self, u: UnitaryOperator) -> "DensityOperator":
        if u.space.dims != self.space.dims:
            raise ConfigurationError("unitary and state live on different spaces")
        return DensityOperator(u.matrix @ self.matrix @ u.matrix.conj().T, self.space, check=False)

    def expectation(self, op: Operator | np.ndarray) -> complex:
        mat = op.matrix if isinstance(op, Operator) else np.asarray(op)
        return complex(np.trace(mat @ self.matrix))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def apply(self, func) -> np.ndarray:
        """Matrix function ``V f(Lambda) V^dagger``."""
        v = self.eigenvectors
        return (v * func(self.eigenvalues)) @ v.conj().T


# ----------------------------------------------------------------------------
# Operations
# ----------------------------------------------------------------------------


def tensor(*ops: Operator) -> Operator:
    """Kronecker product, first factor major. The result keeps the common
    subclass when all factors share one (Hermitian, unitary and density
    properties are preserved by the product)."""
    if not ops:
        raise ConfigurationError("tensor needs at least one operand")
    mat = ops[0].matrix
    space = ops[0].space
    for op in ops[1:]:
        mat = np.kron(mat, op.matrix)
        space = space + op.space
    kinds = {type(op) for op in ops}
    kind = kinds.pop() if len(kinds) == 1 else Operator
    return kind(mat, space, check=False)


def _letters(n: int) -> str:
    pool = string.ascii_letters
    if n > len(pool):
        raise ConfigurationError("too many subsystems for einsum-based partial trace")
    return pool[:n]


def partial_trace(rho: Operator, keep: Iterable[str]) -> Operator:
    """Trace out every subsystem whose label is not in ``keep``.

    Kept subsystems stay in their original order.
    """
    keep = set(keep)
    if not keep:
        raise ConfigurationError("partial_trace needs at least one subsystem to keep")
    space = rho.space
    for label in keep:
        space.index(label)
    dims = space.dims
    n = len(dims)
    letters = _letters(2 * n)
    rows, cols = list(letters[:n]), list(letters[n:])
    out_rows, out_cols = [], []
    for i, label in enumerate(space.labels):
        if label in keep:
            out_rows.append(rows[i])
            out_cols.append(cols[i])
        else:
            cols[i] = rows[i]
    spec = "".join(rows) + "".join(cols) + "->" + "".join(out_rows) + "".join(out_cols)
    reduced_space = space.restrict(keep)
    d = reduced_space.total_dim
    mat = np.einsum(spec, rho.matrix.reshape(dims + dims)).reshape(d, d)
    kind = type(rho) if isinstance(rho, (DensityOperator, HermitianOperator)) else Operator
    return kind(mat, reduced_space, check=False)


def permute(op: Operator, order: Sequence[str]) -> Operator:
    """Reorder the tensor factors of ``op`` to follow ``order``."""
    space = op.space
    if sorted(order) != sorted(space.labels):
        raise ConfigurationError(f"order {list(order)} is not a permutation of {list(space.labels)}")
    perm = [space.index(label) for label in order]
    n = len(perm)
    dims = space.dims
    mat = op.matrix.reshape(dims + dims).transpose(perm + [p + n for p in perm])
    new_space = HilbertSpace(tuple(space.subsystems[p] for p in perm))
    return type(op)(mat.reshape(op.dim, op.dim), new_space, check=False)


def hermitian_eig(h: Operator) -> SpectralDecomposition:
    if not isinstance(h, HermitianOperator):
        defect = hermiticity_defect(h.matrix)
        if defect > HERMITIAN_RTOL:
            raise ValidationError(f"operator is not Hermitian (relative defect {defect:.3e})")
    mat = 0.5 * (h.matrix + h.matrix.conj().T)
    vals, vecs = np.linalg.eigh(mat)
    return SpectralDecomposition(vals, vecs)


def evolution(h: HermitianOperator, t: float) -> UnitaryOperator:
    """``exp(-i h t)`` through the eigendecomposition of ``h``."""
    spec = h.spectrum if isinstance(h, HermitianOperator) else hermitian_eig(h)
    mat = spec.apply(lambda e: np.exp(-1j * e * t))
    return UnitaryOperator(mat, h.space, check=False)


def controlled(
    u: Operator, ancilla_dim: int = 2, control_level: int = 1, label: str = "A"
) -> UnitaryOperator:
    """``|c><c| (x) u + (I - |c><c|) (x) I`` on ancilla (x) target."""
    if not 0 <= control_level < ancilla_dim:
        raise ConfigurationError("control_level outside the ancilla dimension")
    d = u.dim
    mat = np.kron(np.eye(ancilla_dim), np.eye(d)).astype(complex)
    sl = slice(control_level * d, (control_level + 1) * d)
    mat[sl, sl] = u.matrix
    space = HilbertSpace.of((label, ancilla_dim)) + u.space
    return UnitaryOperator(mat, space, check=False)


def identity(space: HilbertSpace | int) -> UnitaryOperator:
    space = _as_space(space, 0) if isinstance(space, int) else space
    return UnitaryOperator(np.eye(space.total_dim), space, check=False)


def basis_state(space: HilbertSpace | int, index: int) -> DensityOperator:
    space = _as_space(space, 0) if isinstance(space, int) else space
    mat = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    mat[index, index] = 1.0
    return DensityOperator(mat, space, check=False)


def pure_state(vector: Sequence[complex], space: HilbertSpace | int | None = None) -> DensityOperator:
    vec = np.asarray(vector, dtype=complex).ravel()
    vec = vec / np.linalg.norm(vec)
    return DensityOperator(np.outer(vec, vec.conj()), _as_space(space, vec.size))


def maximally_mixed(space: HilbertSpace | int) -> DensityOperator:
    space = _as_space(space, 0) if isinstance(space, int) else space
    d = space.total_dim
    return DensityOperator(np.eye(d) / d, space, check=False)


def trace_distance(a: Operator | np.ndarray, b: Operator | np.ndarray) -> float:
    """Half the trace norm of ``a - b`` (both Hermitian)."""
    ma = a.matrix if isinstance(a, Operator) else np.asarray(a)
    mb = b.matrix if isinstance(b, Operator) else np.asarray(b)
    diff = ma - mb
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


# ----------------------------------------------------------------------------
# Random ensembles
# ----------------------------------------------------------------------------


def random_unitary(dim: int, rng: np.random.Generator, space: HilbertSpace | None = None) -> UnitaryOperator:
    """Haar-distributed unitary (QR of a Ginibre matrix with phase correction)."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return UnitaryOperator(q * phases, _as_space(space, dim))


def random_hermitian(dim: int, rng: np.random.Generator, space: HilbertSpace | None = None,
                     scale: float = 1.0) -> HermitianOperator:
    """GUE sample normalized so the spectrum is O(scale)."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (z + z.conj().T) / (2 * np.sqrt(2 * dim)) * scale
    return HermitianOperator(0.5 * (h + h.conj().T), _as_space(space, dim))


def random_density(dim: int, rng: np.random.Generator, space: HilbertSpace | None = None,
                   rank: int | None = None) -> DensityOperator:
    """Random mixed state ``G G^dag / tr`` with ``G`` a ``dim x rank`` Ginibre matrix."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityOperator(rho / np.trace(rho).real, _as_space(space, dim))


__all__ = [
    "HilbertSpace", "Operator", "HermitianOperator", "UnitaryOperator", "DensityOperator",
    "SpectralDecomposition", "tensor", "partial_trace", "permute", "hermitian_eig",
    "evolution", "controlled", "identity", "basis_state", "pure_state", "maximally_mixed",
    "trace_distance", "random_unitary", "random_hermitian", "random_density",
    "PAULI_X", "PAULI_Y", "PAULI_Z",
]
