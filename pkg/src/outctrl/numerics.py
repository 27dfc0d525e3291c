"""Dense complex linear-algebra kernel.

Everything here works on ``complex128`` arrays. Real input is embedded with
zero imaginary part. The functions are pure; nothing is cached between calls.

Rank decisions follow the usual pseudo-rank convention::

    rank = #{ s_i : s_i > rank_rtol * max(rows, cols) * s_max }

Eigenvalues come from the complex Schur form (unitary Hessenberg reduction
followed by shifted QR), and are grouped into clusters so that numerically
coincident eigenvalues are treated as a single spectral point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DimensionError, DomainError, NumericFailure, TargetUnreachable

EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical thresholds used by every rank and definiteness decision.

    Attributes:
        rank_rtol: relative singular-value cut, multiplied by ``max(rows, cols)``
            and the largest singular value.
        eig_cluster_atol: clustering radius for eigenvalues, applied as
            ``eig_cluster_atol * (1 + ||A||_2)``.
        psd_atol: positivity floor for Hermitian eigenvalues, applied as
            ``psd_atol * (1 + ||W||_2)``.
    """

    rank_rtol: float = EPS
    eig_cluster_atol: float = 1e-8
    psd_atol: float = 1e-12

    def __post_init__(self):
        for name in ("rank_rtol", "eig_cluster_atol", "psd_atol"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise DomainError(f"{name} must lie in (0, 1), got {value!r}")

    def cluster_radius(self, A) -> float:
        return self.eig_cluster_atol * (1.0 + norm2(A))

    def psd_floor(self, W) -> float:
        return self.psd_atol * (1.0 + norm2(W))

    def to_dict(self) -> dict:
        return {
            "rank_rtol": self.rank_rtol,
            "eig_cluster_atol": self.eig_cluster_atol,
            "psd_atol": self.psd_atol,
        }


DEFAULT_TOL = ToleranceConfig()


class RankResult(NamedTuple):
    rank: int
    singular_values: np.ndarray
    threshold: float


class ImageComparison(NamedTuple):
    equal: bool
    max_principal_angle: float
    rank1: int
    rank2: int


class HermitianSolve(NamedTuple):
    solution: np.ndarray
    residual: float


@dataclass(frozen=True)
class Spectrum:
    """Clustered eigenvalues of a square matrix.

    ``eigenvalues[k]`` is the mean of the k-th cluster and ``multiplicities[k]``
    its algebraic multiplicity. Clusters are sorted lexicographically by
    (real, imag). ``raw`` keeps the unclustered Schur diagonal.
    """

    eigenvalues: np.ndarray
    multiplicities: tuple[int, ...]
    backward_error: float
    raw: np.ndarray
    cluster_radius: float

    @property
    def n(self) -> int:
        return int(sum(self.multiplicities))

    def as_dict(self) -> dict[complex, int]:
        return {complex(z): k for z, k in zip(self.eigenvalues, self.multiplicities)}

    def __len__(self):
        return len(self.multiplicities)


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce ``M`` to a finite 2-D complex array."""
    arr = np.asarray(M, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionError(
            f"{name} must be 2-D, got {arr.ndim}-D", field=name, expected="2-D", actual=f"{arr.ndim}-D"
        )
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def as_vector(v, size: int | None = None, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.complex128).reshape(-1)
    if size is not None and arr.shape[0] != size:
        raise DimensionError(
            f"{name} has length {arr.shape[0]}, expected {size}", field=name, expected=size, actual=arr.shape[0]
        )
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def _square(A, name="A") -> np.ndarray:
    A = as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(
            f"{name} not square: {A.shape[0]}x{A.shape[1]}",
            field=name,
            expected="square",
            actual=f"{A.shape[0]}x{A.shape[1]}",
        )
    return A


def norm2(M) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def hermitize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


def singular_values(M) -> np.ndarray:
    M = as_matrix(M)
    if M.size == 0:
        return np.zeros(0)
    try:
        return np.linalg.svd(M, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"SVD did not converge: {exc}") from exc


def rank_threshold(shape: tuple[int, int], sigma_max: float, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    return tol.rank_rtol * max(shape) * sigma_max


def rank_of(M, tol: ToleranceConfig = DEFAULT_TOL) -> RankResult:
    """Numerical rank of ``M`` together with its singular values.

    Empty and all-zero matrices have rank 0 (threshold 0).
    """
    M = as_matrix(M)
    s = singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return RankResult(0, s, 0.0)
    thresh = rank_threshold(M.shape, float(s[0]), tol)
    return RankResult(int(np.count_nonzero(s > thresh)), s, thresh)


def _cluster(values: np.ndarray, radius: float) -> list[list[int]]:
    # single linkage on the raw eigenvalues
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= radius:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def spectrum_of(A, tol: ToleranceConfig = DEFAULT_TOL) -> Spectrum:
    """Eigenvalues of ``A`` with algebraic multiplicities.

    Raw eigenvalues are linked when closer than the cluster radius; each
    cluster is represented by its mean. Merging repeats until no two
    representatives lie within the radius of each other.
    """
    A = _square(A)
    n = A.shape[0]
    try:
        T, Z = scipy.linalg.schur(A, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericFailure(f"Schur iteration did not converge: {exc}") from exc
    if not np.all(np.isfinite(T)):
        raise NumericFailure("Schur form contains non-finite entries")
    raw = np.diag(T).copy()
    scale = max(np.linalg.norm(A, "fro"), np.finfo(float).tiny)
    backward_error = float(np.linalg.norm(A - Z @ T @ Z.conj().T, "fro") / scale)

    radius = tol.cluster_radius(A)
    groups = [[i] for i in range(n)]
    while True:
        reps = np.array([raw[g].mean() for g in groups])
        merged = _cluster(reps, radius)
        if len(merged) == len(groups):
            break
        groups = [sum((groups[k] for k in m), []) for m in merged]

    reps = np.array([raw[g].mean() for g in groups])
    mults = [len(g) for g in groups]
    order = sorted(range(len(groups)), key=lambda k: (reps[k].real, reps[k].imag))
    return Spectrum(
        eigenvalues=reps[order],
        multiplicities=tuple(mults[k] for k in order),
        backward_error=backward_error,
        raw=raw,
        cluster_radius=radius,
    )


# Pade(13,13) numerator coefficients and the 1-norm bound below which the
# approximant is accurate to unit roundoff without scaling.
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def expm(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a [13/13] Pade approximant.

    The scaling power ``s`` is the smallest integer with
    ``||A / 2**s||_1 <= theta_13``.
    """
    A = _square(A)
    n = A.shape[0]
    ident = np.eye(n, dtype=np.complex128)
    norm1 = float(np.linalg.norm(A, 1))
    if norm1 == 0.0:
        return ident
    s = max(0, int(np.ceil(np.log2(norm1 / _THETA13))))
    X = A / (2.0**s)

    b = _PADE13
    X2 = X @ X
    X4 = X2 @ X2
    X6 = X4 @ X2
    U = X @ (X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2) + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * ident)
    V = X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2) + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * ident
    try:
        R = np.linalg.solve(V - U, V + U)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"Pade denominator is singular: {exc}") from exc
    for _ in range(s):
        R = R @ R
    if not np.all(np.isfinite(R)):
        raise NumericFailure("matrix exponential overflowed")
    return R


def state_gramian(A, B, t: float) -> np.ndarray:
    """Finite-horizon controllability Gramian ``int_0^t e^{sA} B B^H e^{sA^H} ds``.

    Computed from one exponential of the block matrix
    ``[[-A, B B^H], [0, A^H]] * t`` = ``[[F1, G1], [0, F2]]`` as ``F2^H G1``.
    """
    A = _square(A)
    B = as_matrix(B, "B")
    if B.shape[0] != A.shape[0]:
        raise DimensionError(
            f"B has {B.shape[0]} rows, expected {A.shape[0]}", field="B", expected=A.shape[0], actual=B.shape[0]
        )
    t = float(t)
    if not t > 0.0:
        raise DomainError(f"horizon must be positive, got {t}")
    n = A.shape[0]
    H = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    H[:n, :n] = -A
    H[:n, n:] = B @ B.conj().T
    H[n:, n:] = A.conj().T
    E = expm(H * t)
    G1 = E[:n, n:]
    F2 = E[n:, n:]
    return hermitize(F2.conj().T @ G1)


def _orth(M: np.ndarray, tol: ToleranceConfig) -> np.ndarray:
    r = rank_of(M, tol)
    if r.rank == 0:
        return np.zeros((M.shape[0], 0), dtype=np.complex128)
    U, _, _ = np.linalg.svd(M, full_matrices=False)
    return U[:, : r.rank]


def image_equal(M1, M2, tol: ToleranceConfig = DEFAULT_TOL, angle_tol: float | None = None) -> ImageComparison:
    """Compare the column spaces of two matrices with the same row count.

    The largest principal angle is read off from the sines, i.e. the
    singular values of ``(I - Q1 Q1^H) Q2``, which stay accurate for tiny
    angles. Spans are equal when the numerical ranks agree and the largest
    angle does not exceed ``angle_tol`` (default ``sqrt(rank_rtol)``).
    """
    M1 = as_matrix(M1, "M1")
    M2 = as_matrix(M2, "M2")
    if M1.shape[0] != M2.shape[0]:
        raise DimensionError(
            f"row counts differ: {M1.shape[0]} vs {M2.shape[0]}",
            field="M2",
            expected=M1.shape[0],
            actual=M2.shape[0],
        )
    if angle_tol is None:
        angle_tol = float(np.sqrt(tol.rank_rtol))
    Q1 = _orth(M1, tol)
    Q2 = _orth(M2, tol)
    r1, r2 = Q1.shape[1], Q2.shape[1]
    if r1 == 0 and r2 == 0:
        return ImageComparison(True, 0.0, 0, 0)
    if r1 == 0 or r2 == 0:
        return ImageComparison(False, float(np.pi / 2), r1, r2)
    # project the smaller basis onto the complement of the larger one
    if r1 < r2:
        Q1, Q2 = Q2, Q1
    resid = Q2 - Q1 @ (Q1.conj().T @ Q2)
    sines = singular_values(resid)
    angle = float(np.arcsin(min(1.0, float(sines[0])))) if sines.size else 0.0
    if r1 != r2:
        angle = float(np.pi / 2)
    return ImageComparison(r1 == r2 and angle <= angle_tol, angle, r1, r2)


def solve_hermitian(W, rhs, tol: ToleranceConfig = DEFAULT_TOL, rtol: float = 1e-8) -> HermitianSolve:
    """Minimum-norm solution of ``W x = rhs`` for Hermitian PSD ``W``.

    Eigenvalues below ``psd_atol * (1 + ||W||)`` are dropped from the
    pseudo-inverse. Raises :class:`TargetUnreachable` when the residual exceeds
    ``rtol * (||rhs|| + ||W|| ||x||)``.
    """
    W = _square(W, "W")
    rhs = as_vector(rhs, W.shape[0], "rhs")
    if norm2(W - W.conj().T) > 1e-10 * (1.0 + norm2(W)):
        raise DomainError("W is not Hermitian")
    try:
        lam, V = np.linalg.eigh(hermitize(W))
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"Hermitian eigensolver did not converge: {exc}") from exc
    floor = tol.psd_floor(W)
    keep = lam > floor
    coeffs = V.conj().T @ rhs
    x = V[:, keep] @ (coeffs[keep] / lam[keep])
    residual = float(np.linalg.norm(W @ x - rhs))
    bound = rtol * (np.linalg.norm(rhs) + norm2(W) * np.linalg.norm(x))
    if residual > bound:
        raise TargetUnreachable(f"right-hand side is outside the image (residual {residual:.3e})", residual)
    return HermitianSolve(x, residual)
