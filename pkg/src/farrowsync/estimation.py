"""Joint estimation of sampling-frequency and sampling-time offsets.

Both estimators minimize the batch cost

    F(delta, epsilon) = 1/2 * sum_n (y(n, d(n)) - x0(n))**2,
    y(n, d) = sum_k d**k * u_k(n),   d(n) = n*delta + epsilon,

over a window of N samples, starting always from (0, 0):

* Newton iterations use the exact gradient and Hessian of F.  The per-sample
  pieces are three Horner evaluations sharing the branch outputs: the
  residual P0 = y - x0, the first delay derivative P1 = sum k*u_k*d**(k-1)
  and the second P2 = sum k*(k-1)*u_k*d**(k-2), giving
  F'_n = P0*P1 and F''_n = P1**2 + P0*P2.
* Iterative least squares (ILS) linearizes y around the current delay using
  only the first-degree branch, solving the normal equations with the fixed
  matrix Q built from u_1 once per batch and the projected residual c
  refreshed each iteration.
* The simplified estimator is the common closed form both methods reduce to
  for a first-degree bank: one least-squares solve from rest.  Because the
  Farrow output at zero delay is exactly u_0 for any degree, its estimate
  coincides bit for bit with the first ILS iteration.

Index-weighted sums ``sum n^p * v(n)`` are never formed with explicit
products; each is obtained from plain running-sum cascades (one addition per
sample) combined with a handful of fixed multiplications at the end of the
batch:

    A1 = sum v,  A2 = sum (N-n)*v,  A3 = sum (N-n)(N-n+1)/2 * v
    sum n*v   = N*A1 - A2
    sum n^2*v = N^2*A1 - (2N+1)*A2 + 2*A3

Operation counters account for a fixed-point reference datapath, not for the
numpy arithmetic executed here: multiplies by compile-time constants count as
fixed multiplications, and work shared with the compensator (the branch
convolutions and the Farrow output y itself) is excluded.  Per batch of N
samples and one iteration the totals are, for Newton with degree L >= 2,
``max(L+1,4)*N+8`` general multiplications, ``(2L-2)*N+5`` fixed,
``(2L+5)*N+4`` additions and one division; for degree 1 and for ILS,
``2N+8`` general, five fixed, ``7N+4`` additions and one division.  ILS
iterations after the first reuse Q and are cheaper; see
:func:`count_operations`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .farrow import CoefficientBank, SubfilterOutputs, compute_subfilter_outputs, delay_out_of_range, delay_sequence, farrow_output

_METHODS = ("newton", "ils", "simplified")


class SingularSystemError(RuntimeError):
    """Raised when the 2x2 normal or Hessian system cannot be solved."""


@dataclass(frozen=True)
class OffsetParams:
    """Current (delta, epsilon) point; delta is relative, epsilon in samples."""

    delta: float = 0.0
    epsilon: float = 0.0

    @property
    def delta_ppm(self) -> float:
        return self.delta * 1e6

    def as_array(self) -> np.ndarray:
        return np.array([self.delta, self.epsilon])


@dataclass(frozen=True)
class OpCounts:
    """Reference-datapath operation tallies for one or more iterations."""

    fixed_mults: int = 0
    general_mults: int = 0
    additions: int = 0
    divisions: int = 0

    def __add__(self, other: "OpCounts") -> "OpCounts":
        return OpCounts(
            self.fixed_mults + other.fixed_mults,
            self.general_mults + other.general_mults,
            self.additions + other.additions,
            self.divisions + other.divisions,
        )


@dataclass(frozen=True)
class AccumulatorTriple:
    """Final values of the three cascaded running sums of one input block."""

    a1: float
    a2: float
    a3: float


def cascaded_accumulate(v: np.ndarray) -> AccumulatorTriple:
    """Run the three-accumulator cascade over ``v`` (one addition per stage and sample).

    Stage 1 sums ``v``; each later stage sums the running output of the one
    before, so the final values weight ``v[n]`` by 1, ``N-n`` and
    ``(N-n)(N-n+1)/2`` respectively, without any multiplications.
    """
    c1 = np.cumsum(v)
    c2 = np.cumsum(c1)
    c3 = np.cumsum(c2)
    return AccumulatorTriple(float(c1[-1]), float(c2[-1]), float(c3[-1]))


def weighted_sums(acc: AccumulatorTriple, n_samples: int) -> tuple[float, float, float]:
    """Recover ``(sum v, sum n*v, sum n^2*v)`` from the cascade outputs."""
    n = float(n_samples)
    s0 = acc.a1
    s1 = n * acc.a1 - acc.a2
    s2 = n * n * acc.a1 - (2.0 * n + 1.0) * acc.a2 + 2.0 * acc.a3
    return s0, s1, s2


def per_sample_derivatives(u: SubfilterOutputs, x0: np.ndarray, params: OffsetParams, n0: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample first and second derivatives of the cost w.r.t. the delay.

    Returns ``(F'_n, F''_n)`` evaluated at ``params`` over the window.  For a
    first-degree bank the second derivative collapses to ``u_1**2``.
    """
    degree = u.degree
    d = delay_sequence(params, u.n_samples, n0)
    branches = u.u
    p0 = branches[degree].copy()
    for k in range(degree - 1, -1, -1):
        p0 = p0 * d + branches[k]
    p0 -= x0
    p1 = degree * branches[degree].copy()
    for k in range(degree - 1, 0, -1):
        p1 = p1 * d + k * branches[k]
    if degree >= 2:
        p2 = degree * (degree - 1) * branches[degree].copy()
        for k in range(degree - 1, 1, -1):
            p2 = p2 * d + k * (k - 1) * branches[k]
        f2 = p1 * p1 + p0 * p2
    else:
        f2 = p1 * p1
    return p0 * p1, f2


def batch_cost(u: SubfilterOutputs, x0: np.ndarray, params: OffsetParams, n0: int = 0) -> float:
    """Value of the batch cost F at ``params`` (diagnostic; not op-counted)."""
    r = farrow_output(u, params, n0) - x0
    return 0.5 * float(r @ r)


def _index_weighted(v: np.ndarray, n0: int) -> tuple[float, float, float]:
    """(sum v, sum n*v, sum n^2*v) with n starting at ``n0``, via the cascade."""
    s0, s1, s2 = weighted_sums(cascaded_accumulate(v), v.size)
    if n0:
        s2 = s2 + 2.0 * n0 * s1 + n0 * n0 * s0
        s1 = s1 + n0 * s0
    return s0, s1, s2


def assemble_gradient_hessian(
    u: SubfilterOutputs, x0: np.ndarray, params: OffsetParams, n0: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradient and Hessian of F w.r.t. ``(delta, epsilon)`` at ``params``."""
    f1, f2 = per_sample_derivatives(u, x0, params, n0)
    g0, g1, _ = _index_weighted(f1, n0)
    h0, h1, h2 = _index_weighted(f2, n0)
    gradient = np.array([g1, g0])
    hessian = np.array([[h2, h1], [h1, h0]])
    return gradient, hessian


def solve_sym2x2(h_a: float, h_b: float, h_c: float, g_a: float, g_b: float) -> tuple[float, float]:
    """Solve ``[[h_a, h_b], [h_b, h_c]] @ x = [g_a, g_b]`` in closed form.

    Eight general multiplications, three additions, one division.  Raises
    :class:`SingularSystemError` when the determinant is at noise level
    relative to the squared Frobenius norm of the matrix.
    """
    det = h_a * h_c - h_b * h_b
    frob2 = h_a * h_a + 2.0 * h_b * h_b + h_c * h_c
    if abs(det) <= 1e3 * np.finfo(np.float64).eps * frob2:
        raise SingularSystemError(f"2x2 system is singular to working precision (det={det:.3e})")
    inv_det = 1.0 / det
    return (h_c * g_a - h_b * g_b) * inv_det, (h_a * g_b - h_b * g_a) * inv_det


@dataclass(frozen=True)
class NewtonState:
    """Outcome of one Newton step: the new point plus the data that produced it."""

    params: OffsetParams
    step: np.ndarray  # subtracted update (delta, epsilon components)
    gradient: np.ndarray  # evaluated at the pre-step point
    hessian: np.ndarray  # evaluated at the pre-step point
    iteration: int = 1


def newton_step(u: SubfilterOutputs, x0: np.ndarray, params: OffsetParams, n0: int = 0, iteration: int = 1) -> NewtonState:
    """One exact Newton update ``w <- w - H^{-1} g`` from ``params``."""
    gradient, hessian = assemble_gradient_hessian(u, x0, params, n0)
    sd, se = solve_sym2x2(hessian[0, 0], hessian[0, 1], hessian[1, 1], gradient[0], gradient[1])
    new = OffsetParams(params.delta - sd, params.epsilon - se)
    return NewtonState(params=new, step=np.array([sd, se]), gradient=gradient, hessian=hessian, iteration=iteration)


def ils_normal_matrix(u: SubfilterOutputs, n0: int = 0) -> np.ndarray:
    """Index-weighted normal matrix Q built from the first-degree branch.

    Q is fixed for the whole batch; it is invertible exactly when u_1 is
    nonzero at two or more window positions (then det Q > 0 by
    Cauchy-Schwarz, with equality impossible for distinct indices).
    """
    q0, q1, q2 = _index_weighted(u.u[1] * u.u[1], n0)
    return np.array([[q2, q1], [q1, q0]])


def ils_step(
    u: SubfilterOutputs, x0: np.ndarray, params: OffsetParams, normal_matrix: np.ndarray, n0: int = 0
) -> tuple[OffsetParams, np.ndarray, np.ndarray]:
    """One ILS update from ``params`` given the precomputed Q.

    Returns ``(new_params, step, c)`` where ``c`` is the projected residual
    vector of the linearized problem.
    """
    r = farrow_output(u, params, n0) - x0
    c0, c1, _ = _index_weighted(u.u[1] * r, n0)
    c = np.array([c1, c0])
    sd, se = solve_sym2x2(normal_matrix[0, 0], normal_matrix[0, 1], normal_matrix[1, 1], c[0], c[1])
    new = OffsetParams(params.delta - sd, params.epsilon - se)
    return new, np.array([sd, se]), c


def simplified_solve(u: SubfilterOutputs, x0: np.ndarray, n0: int = 0) -> tuple[OffsetParams, np.ndarray]:
    """Single closed-form least-squares estimate from rest (first-degree update).

    Identical to the first ILS iteration, and to Newton's first iteration
    when the bank degree is 1.  Returns ``(params, c)``.
    """
    params, _, c = ils_step(u, x0, OffsetParams(), ils_normal_matrix(u, n0), n0)
    return params, c


# ── Batch driver ──────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class EstimatorConfig:
    """Options of :func:`estimate`.

    ``n_samples`` defaults to everything the inputs support.  ``tolerance``
    enables early stopping on the max-norm of the applied update.
    ``sfo_only`` freezes epsilon at zero and updates delta alone (scalar
    variants of both methods); it exists to quantify the cost of ignoring
    the time offset and has no operation-count model.
    """

    method: str = "newton"
    max_iterations: int = 2
    tolerance: float | None = None
    n_samples: int | None = None
    compute_cost: bool = False
    sfo_only: bool = False

    def __post_init__(self) -> None:
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.tolerance is not None and self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.sfo_only and self.method == "simplified":
            raise ValueError("the simplified estimator is inherently joint")


@dataclass(frozen=True)
class IterationRecord:
    """State after one iteration, as written to trace files."""

    iteration: int
    params: OffsetParams
    step: np.ndarray
    residual_norm: float  # 2-norm of the solved right-hand side (g or c)
    cost: float  # batch cost at params, nan unless compute_cost
    delay_exceeded: bool  # any |d(n)| > 0.5 over the window at params
    ops: OpCounts


@dataclass(frozen=True)
class EstimationResult:
    params: OffsetParams
    records: tuple[IterationRecord, ...]
    method: str
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def total_ops(self) -> OpCounts:
        total = OpCounts()
        for rec in self.records:
            total = total + rec.ops
        return total


TRACE_HEADER = ("iter", "delta_ppm", "epsilon", "grad_norm", "cost", "flag_d_exceeded")


def trace_rows(result: EstimationResult) -> list[tuple]:
    """Trace table rows matching :data:`TRACE_HEADER`."""
    return [
        (rec.iteration, rec.params.delta_ppm, rec.params.epsilon, rec.residual_norm, rec.cost, int(rec.delay_exceeded))
        for rec in result.records
    ]


def _newton_iteration_ops(degree: int, n: int) -> OpCounts:
    """Stage-by-stage Newton tally; sums to the closed forms in the module docstring."""
    if degree >= 2:
        ops = OpCounts(general_mults=max(degree - 3, 0) * n, additions=n)  # d and its powers
        ops = ops + OpCounts(general_mults=4 * n, fixed_mults=(2 * degree - 2) * n, additions=(2 * degree - 1) * n)
    else:
        ops = OpCounts(general_mults=2 * n, additions=2 * n)  # delay law plus derivative products
    ops = ops + OpCounts(additions=5 * (n - 1))  # five cascaded accumulators
    ops = ops + OpCounts(fixed_mults=5, additions=4)  # index-weighted combines
    ops = ops + OpCounts(general_mults=8, additions=3, divisions=1)  # 2x2 solve
    ops = ops + OpCounts(additions=2)  # parameter update
    return ops


def _ils_iteration_ops(n: int, first: bool) -> OpCounts:
    """Stage-by-stage ILS tally; the normal matrix is only built on iteration 1."""
    ops = OpCounts(additions=2 * n)  # delay sequence and residual y - x0
    if first:
        ops = ops + OpCounts(general_mults=2 * n)  # u1*r and u1*u1
        ops = ops + OpCounts(additions=5 * (n - 1))  # Q and c accumulators
        ops = ops + OpCounts(fixed_mults=5, additions=4)  # combines for Q and c
    else:
        ops = ops + OpCounts(general_mults=n)  # u1*r only
        ops = ops + OpCounts(additions=2 * (n - 1))  # c accumulators
        ops = ops + OpCounts(fixed_mults=1, additions=1)  # combine for c
    ops = ops + OpCounts(general_mults=8, additions=3, divisions=1)
    ops = ops + OpCounts(additions=2)
    return ops


def _simplified_ops(n: int) -> OpCounts:
    """Like a first ILS iteration but at rest: no delay sequence is needed."""
    ops = OpCounts(additions=n)  # residual u0 - x0
    ops = ops + OpCounts(general_mults=2 * n, additions=5 * (n - 1))
    ops = ops + OpCounts(fixed_mults=5, additions=4)
    ops = ops + OpCounts(general_mults=8, additions=3, divisions=1)
    ops = ops + OpCounts(additions=2)
    return ops


def count_operations(method: str, degree: int, n_samples: int, iterations: int = 1) -> OpCounts:
    """Closed-form operation counts of a full estimation run.

    Per iteration these match the module-docstring formulas; for ILS the
    first iteration includes assembling Q and later ones reuse it.
    """
    if method not in _METHODS:
        raise ValueError(f"method must be one of {_METHODS}")
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    n = n_samples
    if method == "newton":
        total = OpCounts()
        for _ in range(iterations):
            total = total + _newton_iteration_ops(degree, n)
        return total
    if method == "ils":
        total = _ils_iteration_ops(n, first=True)
        for _ in range(iterations - 1):
            total = total + _ils_iteration_ops(n, first=False)
        return total
    return _simplified_ops(n)


def max_window_length(delta: float, epsilon: float, limit: float = 0.5) -> int:
    """Largest N keeping ``|n*delta + epsilon| <= limit`` over ``n = 0..N-1``."""
    if delta == 0.0:
        return np.iinfo(np.int64).max if abs(epsilon) <= limit else 0
    bound = (limit - np.sign(delta) * epsilon) / abs(delta)
    return int(np.floor(bound)) + 1 if bound >= 0 else 0


def estimate(x0: np.ndarray, x1: np.ndarray, bank: CoefficientBank, config: EstimatorConfig) -> EstimationResult:
    """Estimate the offsets of ``x1`` relative to ``x0`` from a standing start.

    ``x1`` must cover the estimation window plus ``N_G`` run-up samples;
    ``x0`` supplies the reference shifted by the bulk delay ``N_G/2``, so
    window sample ``n`` compares ``y(n)`` against ``x0[n + N_G/2]``.  Inputs
    must be real (use one component of a complex signal).
    """
    x0 = np.asarray(x0)
    x1 = np.asarray(x1)
    if np.iscomplexobj(x0) or np.iscomplexobj(x1):
        raise TypeError("estimation operates on one real component")
    order = bank.order
    gd = bank.group_delay
    n = config.n_samples if config.n_samples is not None else min(x1.size - order, x0.size - gd)
    if n <= 2:
        raise ValueError(f"need more than 2 window samples, got {n}")
    if x1.size < n + order or x0.size < n + gd:
        raise ValueError(f"inputs too short for a window of {n} samples (order {order})")
    u = compute_subfilter_outputs(x1[: n + order], bank)
    ref = np.asarray(x0[gd : gd + n], dtype=np.float64)

    params = OffsetParams()
    records: list[IterationRecord] = []
    converged = False
    normal_matrix: np.ndarray | None = None

    if config.method == "simplified":
        new_params, c = simplified_solve(u, ref)
        step = np.array([new_params.delta, new_params.epsilon])
        records.append(
            IterationRecord(
                iteration=1,
                params=new_params,
                step=step,
                residual_norm=float(np.linalg.norm(c)),
                cost=batch_cost(u, ref, new_params) if config.compute_cost else float("nan"),
                delay_exceeded=delay_out_of_range(new_params, n),
                ops=_simplified_ops(n),
            )
        )
        return EstimationResult(params=new_params, records=tuple(records), method=config.method, converged=True)

    for m in range(1, config.max_iterations + 1):
        if config.sfo_only:
            params, step, rhs_norm = _sfo_only_update(u, ref, params, config.method)
            ops = OpCounts()
        elif config.method == "newton":
            state = newton_step(u, ref, params, iteration=m)
            params, step = state.params, state.step
            rhs_norm = float(np.linalg.norm(state.gradient))
            ops = _newton_iteration_ops(u.degree, n)
        else:
            first = normal_matrix is None
            if first:
                normal_matrix = ils_normal_matrix(u)
            params, step, c = ils_step(u, ref, params, normal_matrix)
            rhs_norm = float(np.linalg.norm(c))
            ops = _ils_iteration_ops(n, first)
        records.append(
            IterationRecord(
                iteration=m,
                params=params,
                step=step,
                residual_norm=rhs_norm,
                cost=batch_cost(u, ref, params) if config.compute_cost else float("nan"),
                delay_exceeded=delay_out_of_range(params, n),
                ops=ops,
            )
        )
        if config.tolerance is not None and float(np.max(np.abs(step))) < config.tolerance:
            converged = True
            break

    return EstimationResult(params=params, records=tuple(records), method=config.method, converged=converged)


def _sfo_only_update(
    u: SubfilterOutputs, x0: np.ndarray, params: OffsetParams, method: str
) -> tuple[OffsetParams, np.ndarray, float]:
    """Scalar update of delta with epsilon pinned at zero."""
    if method == "newton":
        f1, f2 = per_sample_derivatives(u, x0, params)
        _, num, _ = _index_weighted(f1, 0)
        _, _, den = _index_weighted(f2, 0)
    else:
        r = farrow_output(u, params) - x0
        u1 = u.u[1]
        _, num, _ = _index_weighted(u1 * r, 0)
        _, _, den = _index_weighted(u1 * u1, 0)
    if den == 0.0:
        raise SingularSystemError("scalar system is singular: zero curvature")
    step = num / den
    new = OffsetParams(params.delta - step, params.epsilon)
    return new, np.array([step, 0.0]), abs(num)
