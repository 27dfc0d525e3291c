"""Open-loop steering of the output to a prescribed target.

Inputs are represented by samples on a composite 5-point Gauss-Lobatto grid:
``[0, T]`` is cut into equal panels and each panel carries the nodes
``0, (1 - sqrt(3/7))/2, 1/2, (1 + sqrt(3/7))/2, 1`` (shared endpoints), so a
grid has ``4 * panels + 1`` nodes. The rule integrates polynomials of degree 7
exactly on every panel.

The steering control is the minimum-energy one,

    u(s) = B^H exp((T - s) A^H) C^H eta,   W(T) eta = y_target - C exp(T A) x0,

with W(T) the output Gramian.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .controllability import hautus_output_test, output_gramian
from .errors import DimensionError, DomainError, FormatError, NotOutputControllable
from .lti_model import LtiSystem, decode_vector, _encode_entry
from .numerics import DEFAULT_TOL, ToleranceConfig, as_vector, expm, solve_hermitian

RULE = "gauss-lobatto-5"
DEFAULT_GRID = 257
DEFAULT_T = 1.0

_R = np.sqrt(3.0 / 7.0)
PANEL_NODES = np.array([0.0, (1.0 - _R) / 2.0, 0.5, (1.0 + _R) / 2.0, 1.0])
PANEL_WEIGHTS = np.array([1.0 / 20.0, 49.0 / 180.0, 16.0 / 45.0, 49.0 / 180.0, 1.0 / 20.0])


@lru_cache(maxsize=None)
def _partial_weights() -> np.ndarray:
    # W[i, j] = integral over [0, tau_i] of the j-th Lagrange basis polynomial
    V = np.vander(PANEL_NODES, increasing=True)
    coeffs = np.linalg.inv(V)  # row k of coeffs.T gives basis j in monomials
    powers = np.arange(1, 6)
    integ = PANEL_NODES[:, None] ** powers[None, :] / powers[None, :]
    out = integ @ coeffs
    out[-1] = PANEL_WEIGHTS
    out[0] = 0.0
    out.setflags(write=False)
    return out


def _barycentric_weights() -> np.ndarray:
    x = PANEL_NODES
    return np.array([1.0 / np.prod([x[j] - x[k] for k in range(5) if k != j]) for j in range(5)])


def grid_nodes(T: float, count: int) -> np.ndarray:
    """Nodes of the composite Gauss-Lobatto grid with ``count = 4 k + 1`` points."""
    panels = _panel_count(count)
    H = T / panels
    starts = np.arange(panels) * H
    inner = (starts[:, None] + H * PANEL_NODES[None, :4]).reshape(-1)
    return np.concatenate([inner, [T]])


def grid_weights(T: float, count: int) -> np.ndarray:
    panels = _panel_count(count)
    H = T / panels
    w = np.zeros(count)
    for k in range(panels):
        w[4 * k : 4 * k + 5] += H * PANEL_WEIGHTS
    return w


def _panel_count(count: int) -> int:
    if count < 5 or (count - 1) % 4:
        raise DomainError(f"grid node count must be 4k+1 with k >= 1, got {count}")
    return (count - 1) // 4


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Input samples ``u(t_k)`` (shape ``(nodes, m)``) on a composite grid over ``[0, T]``."""

    T: float
    nodes: np.ndarray
    samples: np.ndarray
    rule: str = RULE

    def __post_init__(self):
        T = float(self.T)
        nodes = np.asarray(self.nodes, dtype=float).reshape(-1)
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim == 1:
            samples = samples[:, None]
        if not T > 0.0:
            raise DomainError(f"horizon must be positive, got {T}")
        if self.rule != RULE:
            raise FormatError(f"unsupported quadrature rule {self.rule!r}")
        _panel_count(len(nodes))
        if nodes[0] != 0.0 or nodes[-1] != T or np.any(np.diff(nodes) <= 0):
            raise DomainError("nodes must increase strictly from 0 to T")
        if samples.shape[0] != len(nodes):
            raise DimensionError(
                f"{samples.shape[0]} samples for {len(nodes)} nodes",
                field="samples",
                expected=len(nodes),
                actual=samples.shape[0],
            )
        if not np.all(np.isfinite(samples)):
            raise DomainError("control samples contain non-finite values")
        for key, val in (("T", T), ("nodes", nodes), ("samples", samples)):
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(self, key, val)

    @property
    def grid(self) -> int:
        return len(self.nodes)

    @property
    def m(self) -> int:
        return self.samples.shape[1]

    def scaled(self, factor: complex) -> "ControlSignal":
        return ControlSignal(self.T, self.nodes, self.samples * factor, self.rule)

    def energy(self) -> float:
        """Quadrature estimate of the integral of ``||u(s)||^2``."""
        w = grid_weights(self.T, self.grid)
        return float(np.sum(w * np.sum(np.abs(self.samples) ** 2, axis=1)))

    def __call__(self, t) -> np.ndarray:
        """Evaluate the panel-wise degree-4 interpolant at times ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        panels = _panel_count(self.grid)
        H = self.T / panels
        k = np.clip(np.floor(t / H).astype(int), 0, panels - 1)
        tau = t / H - k
        bw = _barycentric_weights()
        out = np.empty((len(t), self.m), dtype=np.complex128)
        for idx, (kk, x) in enumerate(zip(k, tau)):
            vals = self.samples[4 * kk : 4 * kk + 5]
            diff = x - PANEL_NODES
            hit = np.flatnonzero(diff == 0.0)
            if hit.size:
                out[idx] = vals[hit[0]]
                continue
            c = bw / diff
            out[idx] = c @ vals / c.sum()
        return out

    def resampled(self, count: int) -> "ControlSignal":
        nodes = grid_nodes(self.T, count)
        return ControlSignal(self.T, nodes, self(nodes), self.rule)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "rule": self.rule,
            "nodes": [float(t) for t in self.nodes],
            "samples": [[_encode_entry(z) for z in row] for row in self.samples],
        }

    @classmethod
    def from_dict(cls, doc) -> "ControlSignal":
        if not isinstance(doc, dict) or not {"T", "nodes", "samples"} <= doc.keys():
            raise FormatError("control document needs keys T, nodes, samples")
        samples = np.array([decode_vector(row, f"samples[{i}]") for i, row in enumerate(doc["samples"])])
        return cls(float(doc["T"]), np.asarray(doc["nodes"], dtype=float), samples, doc.get("rule", RULE))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ControlSignal":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc}") from exc


def zero_control(T: float, m: int, grid: int = DEFAULT_GRID) -> ControlSignal:
    nodes = grid_nodes(T, grid)
    return ControlSignal(T, nodes, np.zeros((len(nodes), m), dtype=np.complex128))


def constant_control(T: float, value, grid: int = DEFAULT_GRID) -> ControlSignal:
    value = np.atleast_1d(np.asarray(value, dtype=np.complex128))
    nodes = grid_nodes(T, grid)
    return ControlSignal(T, nodes, np.tile(value, (len(nodes), 1)))


@dataclass(frozen=True)
class SteeringProblem:
    sys: LtiSystem
    x0: np.ndarray
    y_target: np.ndarray
    T: float = DEFAULT_T

    def __post_init__(self):
        object.__setattr__(self, "x0", as_vector(self.x0, self.sys.n, "x0"))
        object.__setattr__(self, "y_target", as_vector(self.y_target, self.sys.p, "y_target"))
        if not float(self.T) > 0.0:
            raise DomainError(f"horizon must be positive, got {self.T}")
        object.__setattr__(self, "T", float(self.T))

    def free_output(self) -> np.ndarray:
        """Output reached at time T with zero input."""
        return self.sys.C @ (expm(self.T * self.sys.A) @ self.x0)


@dataclass(frozen=True)
class SteeringResult:
    control: ControlSignal
    predicted_output: np.ndarray
    residual: float
    energy: float
    multiplier: np.ndarray

    def to_dict(self) -> dict:
        return {
            "predicted_output": [_encode_entry(z) for z in self.predicted_output],
            "residual": self.residual,
            "energy": self.energy,
            "grid": self.control.grid,
            "T": self.control.T,
        }


def simulate(sys: LtiSystem, u: ControlSignal, x0) -> tuple[np.ndarray, np.ndarray]:
    """State and output trajectories at the grid nodes of ``u``.

    Panel by panel, ``x(a + H tau_i) = exp(H tau_i A) x(a) + H sum_j w_ij
    exp(H (tau_i - tau_j) A) B u_j`` where ``w_ij`` integrates the j-th
    Lagrange basis polynomial over ``[0, tau_i]``. At panel ends this is the
    Gauss-Lobatto rule; inside a panel it is interpolatory of degree 4.

    Returns arrays of shape ``(nodes, n)`` and ``(nodes, p)``.
    """
    x0 = as_vector(x0, sys.n, "x0")
    if u.m != sys.m:
        raise DimensionError(f"control has width {u.m}, system expects {sys.m}", field="u", expected=sys.m, actual=u.m)
    panels = _panel_count(u.grid)
    H = u.T / panels
    n = sys.n
    offsets = PANEL_NODES[:, None] - PANEL_NODES[None, :]
    cache: dict[float, np.ndarray] = {}
    E = np.empty((5, 5, n, n), dtype=np.complex128)
    for i in range(5):
        for j in range(5):
            c = float(offsets[i, j])
            if c not in cache:
                cache[c] = expm(H * c * sys.A)
            E[i, j] = cache[c]
    W = _partial_weights()

    BU = (u.samples @ sys.B.T)  # (nodes, n)
    idx = 4 * np.arange(panels)[:, None] + np.arange(5)[None, :]
    BU_panels = BU[idx]  # (panels, 5, n)
    incr = H * np.einsum("ij,ijab,pjb->pia", W, E, BU_panels)

    X = np.empty((u.grid, n), dtype=np.complex128)
    x = x0.copy()
    for k in range(panels):
        for i in range(4):
            X[4 * k + i] = E[i, 0] @ x + incr[k, i]
        x = E[4, 0] @ x + incr[k, 4]
    X[-1] = x
    return X, X @ sys.C.T


def _control_from_multiplier(sys: LtiSystem, T: float, eta: np.ndarray, grid: int) -> ControlSignal:
    nodes = grid_nodes(T, grid)
    panels = _panel_count(grid)
    H = T / panels
    AH = sys.A.conj().T
    v = sys.C.conj().T @ eta
    # exp((T - s) A^H) v for s on panel k at offset tau: exp(H (1 - tau) A^H) exp((panels-1-k) H A^H) v
    local = [expm(H * (1.0 - tau) * AH) for tau in PANEL_NODES[:4]]
    step = expm(H * AH)
    samples = np.empty((grid, sys.m), dtype=np.complex128)
    BH = sys.B.conj().T
    w = v.copy()
    for k in range(panels - 1, -1, -1):
        for i in range(4):
            samples[4 * k + i] = BH @ (local[i] @ w)
        w = step @ w
    samples[-1] = BH @ v
    return ControlSignal(T, nodes, samples)


def min_norm_control(
    prob: SteeringProblem, grid: int = DEFAULT_GRID, tol: ToleranceConfig = DEFAULT_TOL
) -> SteeringResult:
    """Minimum-energy input steering ``C x(T)`` from ``x0`` to ``y_target``.

    Refuses (:class:`NotOutputControllable`) when the Hautus output test fails
    and raises :class:`TargetUnreachable` when the Gramian solve leaves a
    residual, which happens for numerically singular Gramians.
    """
    _panel_count(grid)
    verdict = hautus_output_test(prob.sys, tol)
    if not verdict.positive:
        raise NotOutputControllable(
            f"system is not output controllable (Hautus rank drops at z={verdict.witness:.6g})", verdict
        )
    W = output_gramian(prob.sys, prob.T)
    eta = solve_hermitian(W, prob.y_target - prob.free_output(), tol).solution
    control = _control_from_multiplier(prob.sys, prob.T, eta, grid)
    _, Y = simulate(prob.sys, control, prob.x0)
    y_T = Y[-1]
    return SteeringResult(
        control=control,
        predicted_output=y_T,
        residual=float(np.linalg.norm(y_T - prob.y_target)),
        energy=control.energy(),
        multiplier=eta,
    )


def verify_steering(prob: SteeringProblem, result: SteeringResult | ControlSignal, rtol: float = 1e-6) -> bool:
    """Re-simulate on a grid twice as fine and compare the final output to the target."""
    control = result.control if isinstance(result, SteeringResult) else result
    if abs(control.T - prob.T) > 1e-12 * prob.T or control.m != prob.sys.m:
        return False
    fine = control.resampled(2 * control.grid - 1)
    _, Y = simulate(prob.sys, fine, prob.x0)
    err = np.linalg.norm(Y[-1] - prob.y_target)
    return bool(err <= rtol * (1.0 + np.linalg.norm(prob.y_target)))
