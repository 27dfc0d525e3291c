"""LTI system triples, their JSON format, parallel connection and random generators."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionError, DomainError, FormatError, GenerationError
from .numerics import DEFAULT_TOL, ToleranceConfig, rank_of

KINDS = ("generic", "rank_deficient_C", "forced_output_controllable", "jordan")

GENERATION_RETRIES = 64


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """The triple (A, B, C) of ``x' = A x + B u``, ``y = C x``.

    Matrices are stored as read-only ``complex128`` arrays. Construction runs
    :func:`validate`.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        for key in ("A", "B", "C"):
            arr = np.array(getattr(self, key), dtype=np.complex128)
            if arr.ndim == 0:
                arr = arr.reshape(1, 1)
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)
        validate(self)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.n, self.m, self.p

    def __eq__(self, other):
        if not isinstance(other, LtiSystem):
            return NotImplemented
        return all(
            getattr(self, k).shape == getattr(other, k).shape and np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("A", "B", "C")
        )

    __hash__ = None

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<LtiSystem{label} n={self.n} m={self.m} p={self.p}>"


def validate(sys: LtiSystem) -> None:
    """Check shapes and finiteness, raising :class:`DimensionError` on the first violation."""
    A, B, C = sys.A, sys.B, sys.C
    for key, arr in (("A", A), ("B", B), ("C", C)):
        if arr.ndim != 2:
            raise DimensionError(f"{key} must be 2-D", field=key, expected="2-D", actual=f"{arr.ndim}-D")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(
            f"A not square: got {A.shape[0]}x{A.shape[1]}", field="A", expected="n x n", actual=A.shape
        )
    n = A.shape[0]
    if n < 1:
        raise DimensionError("state dimension n must be >= 1", field="A", expected="n >= 1", actual=A.shape)
    if B.shape[0] != n:
        raise DimensionError(
            f"B row count {B.shape[0]} != n = {n}", field="B", expected=f"{n} x m", actual=B.shape
        )
    if B.shape[1] < 1:
        raise DimensionError("input dimension m must be >= 1", field="B", expected="m >= 1", actual=B.shape)
    if C.shape[1] != n:
        raise DimensionError(
            f"C column count {C.shape[1]} != n = {n}", field="C", expected=f"p x {n}", actual=C.shape
        )
    if C.shape[0] < 1:
        raise DimensionError("output dimension p must be >= 1", field="C", expected="p >= 1", actual=C.shape)
    for key, arr in (("A", A), ("B", B), ("C", C)):
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"{key} contains non-finite entries")


def parallel_connect(systems: Sequence[LtiSystem]) -> LtiSystem:
    """Parallel connection: block-diagonal A and C, vertically stacked B.

    All members must share the input width m.
    """
    systems = list(systems)
    if not systems:
        raise DimensionError("parallel connection needs at least one system", field="systems")
    if len(systems) == 1:
        return systems[0]
    widths = {s.m for s in systems}
    if len(widths) != 1:
        raise DimensionError(
            "parallel connection requires common input width",
            field="B",
            expected="equal m",
            actual=[s.m for s in systems],
        )
    A = scipy.linalg.block_diag(*[s.A for s in systems])
    B = np.vstack([s.B for s in systems])
    C = scipy.linalg.block_diag(*[s.C for s in systems])
    return LtiSystem(A, B, C)


# --- JSON format -------------------------------------------------------------


def _encode_entry(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _decode_entry(x, where: str) -> complex:
    if isinstance(x, bool):
        raise FormatError(f"{where}: booleans are not matrix entries")
    if isinstance(x, (int, float)):
        return complex(float(x), 0.0)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(float(x[0]), float(x[1]))
    raise FormatError(f"{where}: entry must be a number or a [re, im] pair, got {x!r}")


def encode_matrix(M: np.ndarray) -> list:
    return [[_encode_entry(z) for z in row] for row in np.asarray(M, dtype=np.complex128)]


def decode_matrix(rows, key: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise FormatError(f"{key}: expected a non-empty 2-D array")
    width = len(rows[0])
    if width == 0 or any(len(r) != width for r in rows):
        raise FormatError(f"{key}: rows must be non-empty and of equal length")
    return np.array(
        [[_decode_entry(x, f"{key}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(rows)],
        dtype=np.complex128,
    )


def decode_vector(values, key: str) -> np.ndarray:
    if not isinstance(values, list):
        raise FormatError(f"{key}: expected a 1-D array")
    return np.array([_decode_entry(x, f"{key}[{i}]") for i, x in enumerate(values)], dtype=np.complex128)


def to_dict(sys: LtiSystem) -> dict:
    out = {"A": encode_matrix(sys.A), "B": encode_matrix(sys.B), "C": encode_matrix(sys.C)}
    if sys.name is not None:
        out["name"] = sys.name
    return out


def from_dict(doc) -> LtiSystem:
    if not isinstance(doc, dict):
        raise FormatError("system document must be a JSON object")
    missing = [k for k in ("A", "B", "C") if k not in doc]
    if missing:
        raise FormatError(f"missing key(s): {', '.join(missing)}")
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise FormatError("name must be a string")
    return LtiSystem(decode_matrix(doc["A"], "A"), decode_matrix(doc["B"], "B"), decode_matrix(doc["C"], "C"), name)


def serialize(sys: LtiSystem) -> str:
    return json.dumps(to_dict(sys))


def deserialize(text: str) -> LtiSystem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    return from_dict(doc)


def load_system(path) -> LtiSystem:
    return deserialize(Path(path).read_text())


def save_system(sys: LtiSystem, path) -> None:
    Path(path).write_text(json.dumps(to_dict(sys), indent=1) + "\n")


# --- random generators -------------------------------------------------------


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex Gaussian entries (unit variance)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    Q, R = np.linalg.qr(complex_gaussian(rng, (n, n)))
    d = np.diag(R)
    return Q * (d / np.abs(d))


def _well_conditioned(rng, n, cond=10.0):
    s = np.exp(rng.uniform(0.0, np.log(cond), n))
    return random_unitary(rng, n) @ np.diag(s) @ random_unitary(rng, n)


def _jordan_matrix(rng, n):
    # Repeated eigenvalues are planted either as one Jordan block
    # (nonderogatory) or as a repeated diagonal entry (semisimple); mixing
    # the two on one eigenvalue makes the computed spectrum too inaccurate
    # for an eps-level rank test.
    n_distinct = int(rng.integers(1, n + 1))
    cuts = np.sort(rng.choice(np.arange(1, n), size=n_distinct - 1, replace=False)) if n_distinct > 1 else []
    sizes = np.diff(np.concatenate(([0], cuts, [n]))).astype(int)
    J = np.zeros((n, n), dtype=np.complex128)
    pos = 0
    for size in sizes:
        lam = complex_gaussian(rng, ())
        J[pos : pos + size, pos : pos + size] += lam * np.eye(size)
        if size > 1 and rng.random() < 0.5:
            J[pos : pos + size - 1, pos + 1 : pos + size] += np.eye(size - 1)
        pos += size
    T = _well_conditioned(rng, n)
    return T @ J @ np.linalg.inv(T)


def random_system(
    n: int,
    m: int,
    p: int,
    seed,
    kind: str = "generic",
    tol: ToleranceConfig = DEFAULT_TOL,
) -> LtiSystem:
    """Deterministic random triple for a given seed.

    kinds:
        generic: independent standard complex Gaussian entries.
        rank_deficient_C: C has rank ``min(p - 1, n)`` (C = 0 when p = 1).
        forced_output_controllable: C of full row rank and, when m >= p,
            B = C^H R with R of full rank; resampled until the Kalman output
            rank equals p.
        jordan: A similar (through a matrix of condition number <= 10) to a
            Jordan-structured matrix with repeated eigenvalues.
    """
    if min(n, m, p) < 1:
        raise DimensionError("n, m, p must all be >= 1", expected=">= 1", actual=(n, m, p))
    if kind not in KINDS:
        raise DomainError(f"unknown kind {kind!r}; expected one of {KINDS}")
    rng = np.random.default_rng(seed)

    if kind == "generic":
        return LtiSystem(complex_gaussian(rng, (n, n)), complex_gaussian(rng, (n, m)), complex_gaussian(rng, (p, n)))

    if kind == "rank_deficient_C":
        r = min(p - 1, n)
        A = complex_gaussian(rng, (n, n))
        B = complex_gaussian(rng, (n, m))
        C = complex_gaussian(rng, (p, r)) @ complex_gaussian(rng, (r, n))
        return LtiSystem(A, B, C)

    if kind == "jordan":
        return LtiSystem(_jordan_matrix(rng, n), complex_gaussian(rng, (n, m)), complex_gaussian(rng, (p, n)))

    from .controllability import kalman_output_matrix

    for _ in range(GENERATION_RETRIES):
        A = complex_gaussian(rng, (n, n))
        C = complex_gaussian(rng, (p, n))
        if m >= p:
            B = C.conj().T @ complex_gaussian(rng, (p, m))
        else:
            B = complex_gaussian(rng, (n, m))
        if rank_of(C, tol).rank < p:
            continue
        candidate = LtiSystem(A, B, C)
        if rank_of(kalman_output_matrix(candidate), tol).rank == p:
            return candidate
    raise GenerationError(
        f"no output controllable system of shape n={n}, m={m}, p={p} after {GENERATION_RETRIES} draws"
    )


def shifted(sys: LtiSystem, shift: complex) -> LtiSystem:
    """Same system with ``A + shift * I``; output controllability is unchanged."""
    return LtiSystem(sys.A + shift * np.eye(sys.n), sys.B, sys.C, sys.name)


@dataclass(frozen=True)
class Sample:
    index: int
    kind: str
    seed: int
    system: LtiSystem


def sample_systems(
    seed: int,
    count: int,
    max_dims: tuple[int, int, int] = (6, 4, 4),
    kinds: Sequence[str] = ("generic", "rank_deficient_C", "jordan"),
    norm_bound: float | None = None,
) -> Iterable[Sample]:
    """Reproducible stream of random systems.

    Each sample draws its kind uniformly from ``kinds`` and n, m, p uniformly
    from ``1..max_dims``; the per-sample seed is drawn from the master seed so
    any instance can be regenerated with :func:`random_system`. With
    ``norm_bound``, A is scaled down to that spectral norm when it exceeds it.
    """
    for k in kinds:
        if k not in KINDS:
            raise DomainError(f"unknown kind {k!r}; expected one of {KINDS}")
    rng = np.random.default_rng(seed)
    nmax, mmax, pmax = max_dims
    for index in range(count):
        kind = kinds[int(rng.integers(len(kinds)))]
        n = int(rng.integers(1, nmax + 1))
        m = int(rng.integers(1, mmax + 1))
        p = int(rng.integers(1, pmax + 1))
        sub = int(rng.integers(2**32))
        sys = random_system(n, m, p, sub, kind)
        if norm_bound is not None:
            sys = clip_norm(sys, norm_bound)
        yield Sample(index, kind, sub, sys)


def clip_norm(sys: LtiSystem, bound: float) -> LtiSystem:
    """Scale A down so that ``||A||_2 <= bound`` (unchanged when already inside)."""
    nrm = np.linalg.norm(sys.A, 2)
    if nrm <= bound:
        return sys
    return LtiSystem(sys.A * (bound / nrm), sys.B, sys.C, sys.name)
