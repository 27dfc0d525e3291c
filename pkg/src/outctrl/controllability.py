"""Output controllability decision procedures.

Three equivalent output criteria are provided and can be run side by side:

* Kalman:  rank [CB, CAB, ..., CA^{n-1}B] == p
* Hautus:  rank [C(zI - A), CB] == p for every eigenvalue z of A
* Gramian: C P(t) C^H is positive definite for a horizon t > 0

plus the classical state Hautus test and a checker for parallel connections
of systems whose spectra are pairwise disjoint.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericFailure
from .lti_model import LtiSystem, parallel_connect
from .numerics import (
    DEFAULT_TOL,
    Spectrum,
    ToleranceConfig,
    as_matrix,
    hermitize,
    norm2,
    rank_of,
    spectrum_of,
    state_gramian,
)

DEFAULT_HORIZON = 1.0


class Criterion(str, enum.Enum):
    KALMAN = "kalman"
    HAUTUS_OUTPUT = "hautus_output"
    GRAMIAN = "gramian"
    HAUTUS_STATE = "hautus_state"


@dataclass(frozen=True)
class Verdict:
    """Outcome of one criterion.

    ``rank``/``required_rank`` are the rank found and the rank needed (for
    Hautus tests, the smallest rank over all spectral points; for the Gramian
    test, the number of eigenvalues above the floor). ``singular_values`` and
    ``threshold`` are the evidence at the decisive point: the Kalman matrix,
    the Hautus matrix at the tightest eigenvalue, or the Gramian eigenvalues
    (ascending) with the positivity floor.

    ``margin`` is the decisive value divided by the threshold: values above 1
    pass, values below 1 fail, values near 1 are numerically ambiguous.
    """

    criterion: Criterion
    positive: bool
    rank: int
    required_rank: int
    singular_values: np.ndarray
    threshold: float
    margin: float
    witness: complex | None = None
    eigenvalue_ranks: tuple[tuple[complex, int], ...] = ()

    def __post_init__(self):
        hautus = self.criterion in (Criterion.HAUTUS_OUTPUT, Criterion.HAUTUS_STATE)
        if (self.witness is not None) != (hautus and not self.positive):
            raise ValueError("witness must be present exactly for failing Hautus verdicts")

    @property
    def decision(self) -> str:
        if self.criterion is Criterion.HAUTUS_STATE:
            return "controllable" if self.positive else "not_controllable"
        return "output_controllable" if self.positive else "not_output_controllable"

    def near_boundary(self, factor: float = 10.0) -> bool:
        """True when the decisive value is within ``factor`` of the threshold."""
        return 1.0 / factor <= self.margin <= factor

    def to_dict(self) -> dict:
        out = {
            "criterion": self.criterion.value,
            "decision": self.decision,
            "rank": self.rank,
            "required_rank": self.required_rank,
            "threshold": self.threshold,
            "margin": self.margin,
            "singular_values": [float(s) for s in np.real(self.singular_values)],
        }
        if self.witness is not None:
            out["witness"] = [self.witness.real, self.witness.imag]
        if self.eigenvalue_ranks:
            out["eigenvalue_ranks"] = [[[z.real, z.imag], r] for z, r in self.eigenvalue_ranks]
        return out


@dataclass(frozen=True)
class Gramian:
    """Output Gramian W(t) with its Hermitian eigendecomposition (ascending)."""

    matrix: np.ndarray
    horizon: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])


@dataclass(frozen=True)
class CrossCheckReport:
    verdicts: dict[Criterion, Verdict]
    agree: bool
    tolerance_used: ToleranceConfig
    gramian: Gramian | None = None

    @property
    def positive(self) -> bool | None:
        """Common decision, or None when the criteria disagree."""
        if not self.agree:
            return None
        return next(iter(self.verdicts.values())).positive

    def near_boundary(self, factor: float = 10.0) -> bool:
        return any(v.near_boundary(factor) for v in self.verdicts.values())

    def to_dict(self) -> dict:
        out = {
            "agree": self.agree,
            "decision": None if self.positive is None else ("output_controllable" if self.positive else "not_output_controllable"),
            "verdicts": {c.value: v.to_dict() for c, v in self.verdicts.items()},
            "tolerance": self.tolerance_used.to_dict(),
        }
        if self.gramian is not None:
            out["gramian_horizon"] = self.gramian.horizon
            out["gramian_min_eigenvalue"] = self.gramian.min_eigenvalue
        return out


@dataclass(frozen=True)
class ParallelReport:
    applicable: bool
    connected_verdict: Verdict
    member_verdicts: list[Verdict]
    disjoint: bool
    min_gap: float
    connected: LtiSystem = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "disjoint": self.disjoint,
            "min_spectral_gap": None if np.isinf(self.min_gap) else self.min_gap,
            "members": [v.to_dict() for v in self.member_verdicts],
            "connected": self.connected_verdict.to_dict(),
        }


def _margin(value: float, threshold: float) -> float:
    if value <= 0.0:
        return 0.0
    if threshold <= 0.0:
        return float("inf")
    return value / threshold


def _rank_evidence(M, required, tol):
    r = rank_of(M, tol)
    decisive = float(r.singular_values[required - 1]) if r.singular_values.size >= required else 0.0
    return r, _margin(decisive, r.threshold)


def _rank_verdict(criterion, M, required, tol) -> Verdict:
    r, margin = _rank_evidence(M, required, tol)
    return Verdict(
        criterion=criterion,
        positive=r.rank == required,
        rank=r.rank,
        required_rank=required,
        singular_values=r.singular_values,
        threshold=r.threshold,
        margin=margin,
    )


def kalman_output_matrix(sys: LtiSystem) -> np.ndarray:
    """The p x (n m) block row [CB, CAB, ..., CA^{n-1}B].

    Built left to right as (C A^k) B with C A^{k+1} = (C A^k) A.
    """
    n = sys.n
    blocks = []
    CA = sys.C.copy()
    for _ in range(n):
        blocks.append(CA @ sys.B)
        CA = CA @ sys.A
    return np.hstack(blocks)


def kalman_output_test(sys: LtiSystem, tol: ToleranceConfig = DEFAULT_TOL) -> Verdict:
    return _rank_verdict(Criterion.KALMAN, kalman_output_matrix(sys), sys.p, tol)


def _hautus(criterion, spectrum: Spectrum, build, required, tol) -> Verdict:
    per_point = []
    tightest = None
    failing = None
    for z in spectrum.eigenvalues:
        r, margin = _rank_evidence(build(z), required, tol)
        per_point.append((complex(z), r.rank))
        if tightest is None or margin < tightest[2]:
            tightest = (complex(z), r, margin)
        if r.rank < required and (failing is None or margin < failing[2]):
            failing = (complex(z), r, margin)
    z, r, margin = failing if failing is not None else tightest
    return Verdict(
        criterion=criterion,
        positive=failing is None,
        rank=min(k for _, k in per_point),
        required_rank=required,
        singular_values=r.singular_values,
        threshold=r.threshold,
        margin=margin,
        witness=z if failing is not None else None,
        eigenvalue_ranks=tuple(per_point),
    )


def hautus_state_test(A, B, tol: ToleranceConfig = DEFAULT_TOL) -> Verdict:
    """rank [zI - A, B] == n at every clustered eigenvalue z of A."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    LtiSystem(A, B, np.eye(A.shape[0]))  # shape check
    n = A.shape[0]
    ident = np.eye(n)
    spectrum = spectrum_of(A, tol)
    return _hautus(Criterion.HAUTUS_STATE, spectrum, lambda z: np.hstack([z * ident - A, B]), n, tol)


def hautus_output_test(sys: LtiSystem, tol: ToleranceConfig = DEFAULT_TOL) -> Verdict:
    """rank [C(zI - A), CB] == p at every clustered eigenvalue z of A."""
    A, B, C = sys.A, sys.B, sys.C
    ident = np.eye(sys.n)
    CB = C @ B
    spectrum = spectrum_of(A, tol)
    return _hautus(Criterion.HAUTUS_OUTPUT, spectrum, lambda z: np.hstack([C @ (z * ident - A), CB]), sys.p, tol)


def output_gramian(sys: LtiSystem, t: float = DEFAULT_HORIZON) -> np.ndarray:
    """W(t) = C P(t) C^H, Hermitized."""
    P = state_gramian(sys.A, sys.B, t)
    return hermitize(sys.C @ P @ sys.C.conj().T)


def gramian_output_test(
    sys: LtiSystem, t: float = DEFAULT_HORIZON, tol: ToleranceConfig = DEFAULT_TOL
) -> tuple[Verdict, Gramian]:
    """Positive iff the smallest eigenvalue of W(t) exceeds ``psd_atol * (1 + ||W||)``."""
    if not float(t) > 0.0:
        raise DomainError(f"horizon must be positive, got {t}")
    W = output_gramian(sys, t)
    try:
        lam, V = np.linalg.eigh(W)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"Hermitian eigensolver did not converge: {exc}") from exc
    floor = tol.psd_floor(W)
    count = int(np.count_nonzero(lam > floor))
    verdict = Verdict(
        criterion=Criterion.GRAMIAN,
        positive=count == sys.p,
        rank=count,
        required_rank=sys.p,
        singular_values=lam,
        threshold=floor,
        margin=_margin(float(lam[0]), floor),
    )
    return verdict, Gramian(W, float(t), lam, V)


def cross_check(sys: LtiSystem, t: float = DEFAULT_HORIZON, tol: ToleranceConfig = DEFAULT_TOL) -> CrossCheckReport:
    """Run the Kalman, Hautus and Gramian output tests and compare decisions."""
    kalman = kalman_output_test(sys, tol)
    hautus = hautus_output_test(sys, tol)
    gram_verdict, gram = gramian_output_test(sys, t, tol)
    verdicts = {Criterion.KALMAN: kalman, Criterion.HAUTUS_OUTPUT: hautus, Criterion.GRAMIAN: gram_verdict}
    agree = len({v.positive for v in verdicts.values()}) == 1
    return CrossCheckReport(verdicts, agree, tol, gram)


def spectral_gap(A1, A2, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Smallest distance between an eigenvalue of A1 and one of A2."""
    s1 = spectrum_of(A1, tol).eigenvalues
    s2 = spectrum_of(A2, tol).eigenvalues
    return float(np.min(np.abs(s1[:, None] - s2[None, :])))


def parallel_sufficiency_check(systems: Sequence[LtiSystem], tol: ToleranceConfig = DEFAULT_TOL) -> ParallelReport:
    """Check whether spectral disjointness guarantees output controllability.

    Members are reported with the Hautus output test. Because that test is
    necessary but not sufficient, a member only counts as output controllable
    when the Kalman test agrees. The guarantee applies when every member is
    output controllable and no two member spectra share a point (closer than
    the cluster radius). If it applies and the connected Hautus test still
    fails, the rank decision has broken down numerically and
    :class:`NumericFailure` is raised.
    """
    systems = list(systems)
    connected = parallel_connect(systems)
    members = [hautus_output_test(s, tol) for s in systems]
    members_ok = all(v.positive and kalman_output_test(s, tol).positive for v, s in zip(members, systems))
    min_gap = float("inf")
    disjoint = True
    for i in range(len(systems)):
        for j in range(i + 1, len(systems)):
            gap = spectral_gap(systems[i].A, systems[j].A, tol)
            radius = tol.eig_cluster_atol * (1.0 + max(norm2(systems[i].A), norm2(systems[j].A)))
            min_gap = min(min_gap, gap)
            if gap <= radius:
                disjoint = False
    applicable = disjoint and members_ok
    connected_verdict = hautus_output_test(connected, tol)
    if applicable and not connected_verdict.positive:
        raise NumericFailure(
            "members are output controllable with disjoint spectra, yet the connected "
            f"Hautus test failed at z={connected_verdict.witness} (margin {connected_verdict.margin:.3g})"
        )
    return ParallelReport(applicable, connected_verdict, members, disjoint, min_gap, connected)
