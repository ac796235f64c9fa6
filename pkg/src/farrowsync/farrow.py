"""Variable fractional-delay resampler with polynomial (Farrow) structure.

The compensator delays the measured stream ``x1`` by a slowly varying amount
``d(n) = n*delta + epsilon`` expressed in samples.  It runs ``x1`` through a
fixed bank of ``L+1`` FIR branch filters ``g_0..g_L`` once, then combines the
branch outputs per sample with a degree-``L`` polynomial in ``d(n)``:

    u_k[n] = sum_i g_k[i] * x1[n + N_G - i]        (steady state only)
    y[n]   = sum_k d(n)**k * u_k[n]                 (Horner evaluation)

Branch 0 is a pure delay of ``N_G/2`` samples, so ``u_0[n] = x1[n + N_G/2]``
and ``y == u_0`` exactly when ``d == 0``.  All branch filters share the even
order ``N_G``; the bank is designed for ``|d| <= 0.5`` and callers flag, but
do not reject, delays outside that range.

Output sample ``n`` of the window corresponds to input sample ``n + N_G/2``
of ``x1``, i.e. the caller hands in a stream whose first ``N_G/2`` samples
are run-up history.  Complex streams are compensated component-wise by two
identical real resamplers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: Largest per-sample delay magnitude the banks are designed for.
DESIGN_DELAY_LIMIT = 0.5


@dataclass(frozen=True, eq=False)
class CoefficientBank:
    """Branch filter taps, shape ``(L+1, N_G+1)``; row ``k`` holds ``g_k``."""

    taps: np.ndarray

    def __post_init__(self) -> None:
        taps = np.array(self.taps, dtype=np.float64)
        if taps.ndim != 2 or taps.shape[0] < 2 or taps.shape[1] < 3:
            raise ValueError("taps must be 2-D with at least 2 rows and 3 columns")
        order = taps.shape[1] - 1
        if order % 2 != 0:
            raise ValueError(f"filter order must be even, got {order}")
        expected = np.zeros(order + 1)
        expected[order // 2] = 1.0
        if not np.array_equal(taps[0], expected):
            raise ValueError("row 0 must be the unit pulse at index N_G/2 (pure delay)")
        if not np.all(np.isfinite(taps)):
            raise ValueError("taps must be finite")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def degree(self) -> int:
        """Polynomial degree L (number of branch filters minus one)."""
        return self.taps.shape[0] - 1

    @property
    def order(self) -> int:
        """Branch filter order N_G (number of taps minus one)."""
        return self.taps.shape[1] - 1

    @property
    def group_delay(self) -> int:
        """Integer bulk delay N_G/2 shared by every branch."""
        return self.taps.shape[1] // 2

    def truncated(self, degree: int) -> "CoefficientBank":
        """Bank formed by the first ``degree + 1`` rows of this one."""
        if not 1 <= degree <= self.degree:
            raise ValueError(f"degree must be in [1, {self.degree}]")
        return CoefficientBank(self.taps[: degree + 1])


@dataclass(frozen=True, eq=False)
class SubfilterOutputs:
    """Steady-state branch filter outputs, shape ``(L+1, N)``."""

    u: np.ndarray

    @property
    def degree(self) -> int:
        return self.u.shape[0] - 1

    @property
    def n_samples(self) -> int:
        return self.u.shape[1]


def compute_subfilter_outputs(x1: np.ndarray, bank: CoefficientBank) -> SubfilterOutputs:
    """Run the measured stream through every branch filter (steady state only).

    ``u[k][n] = sum_i g_k[i] * x1[n + N_G - i]`` for ``n = 0..len(x1)-N_G-1``,
    so the output window is ``N_G`` samples shorter than the input.
    """
    x1 = np.asarray(x1)
    if np.iscomplexobj(x1):
        raise TypeError("branch filters operate on real streams; compensate components separately")
    x1 = x1.astype(np.float64, copy=False)
    order = bank.order
    if x1.ndim != 1 or x1.size <= order:
        raise ValueError(f"need more than N_G = {order} input samples, got {x1.size}")
    n_out = x1.size - order
    u = np.empty((bank.degree + 1, n_out), dtype=np.float64)
    for k in range(bank.degree + 1):
        u[k] = np.convolve(x1, bank.taps[k])[order : order + n_out]
    return SubfilterOutputs(u)


def delay_sequence(params, n_samples: int, n0: int = 0) -> np.ndarray:
    """Per-sample delay ``d(n) = n*delta + epsilon`` for ``n = n0..n0+n_samples-1``."""
    n = np.arange(n0, n0 + n_samples, dtype=np.float64)
    return n * params.delta + params.epsilon


def delay_out_of_range(params, n_samples: int, n0: int = 0, limit: float = DESIGN_DELAY_LIMIT) -> bool:
    """True when any ``|d(n)|`` over the window exceeds the design range."""
    if n_samples <= 0:
        return False
    ends = np.array([n0, n0 + n_samples - 1], dtype=np.float64)
    return bool(np.max(np.abs(ends * params.delta + params.epsilon)) > limit)


def farrow_output(u: SubfilterOutputs, params, n0: int = 0) -> np.ndarray:
    """Combine branch outputs into the compensated stream via Horner's rule."""
    d = delay_sequence(params, u.n_samples, n0)
    y = u.u[u.degree].copy()
    for k in range(u.degree - 1, -1, -1):
        y = y * d + u.u[k]
    return y


def compensate_complex(x1: np.ndarray, bank: CoefficientBank, params, n0: int = 0) -> np.ndarray:
    """Compensate a complex stream with two real resamplers (one per component)."""
    x1 = np.asarray(x1)
    if not np.iscomplexobj(x1):
        x1 = x1.astype(np.complex128)
    y_re = farrow_output(compute_subfilter_outputs(x1.real, bank), params, n0)
    y_im = farrow_output(compute_subfilter_outputs(np.ascontiguousarray(x1.imag), bank), params, n0)
    return y_re + 1j * y_im


# ── Serialization ─────────────────────────────────────────────────────────────


def bank_to_text(bank: CoefficientBank) -> str:
    """Render a bank in the interchange format: ``L N_G`` header, one row per line."""
    lines = [f"{bank.degree} {bank.order}"]
    for row in bank.taps:
        lines.append(" ".join(format(v, ".17g") for v in row))
    return "\n".join(lines) + "\n"


def bank_from_text(text: str) -> CoefficientBank:
    """Parse the interchange format produced by :func:`bank_to_text`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty coefficient bank file")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError("header must contain exactly two integers: degree and order")
    degree, order = int(header[0]), int(header[1])
    if len(lines) != degree + 2:
        raise ValueError(f"expected {degree + 1} coefficient rows, found {len(lines) - 1}")
    taps = np.empty((degree + 1, order + 1), dtype=np.float64)
    for k, line in enumerate(lines[1:]):
        values = [float(tok) for tok in line.split()]
        if len(values) != order + 1:
            raise ValueError(f"row {k} has {len(values)} taps, expected {order + 1}")
        taps[k] = values
    return CoefficientBank(taps)


def save_bank(bank: CoefficientBank, path: str | Path) -> None:
    Path(path).write_text(bank_to_text(bank))


def load_bank(path: str | Path) -> CoefficientBank:
    return bank_from_text(Path(path).read_text())
