"""Least-squares design of the polynomial branch filter bank.

The design target is the variable fractional delay ``e^{-j*omega*d}``
(normalized by the bulk delay ``N_G/2``) over the region
``omega in [0, omega_c]``, ``d in [-d_max, d_max]``.  Branch 0 is pinned to a
pure delay.  Structural symmetry does the real/imaginary split: rows with odd
polynomial index are antisymmetric about the center tap (purely imaginary
normalized response, a sine series), rows with even index are symmetric
(purely real, a cosine series).  That decouples the fit into two real
least-squares problems on a rectangular grid:

    sum_{k odd}      d^k * 2*sum_m c_{k,m} sin(m*omega)  ~  -sin(omega*d)
    sum_{k even>=2}  d^k * A_k(omega)                    ~  cos(omega*d) - 1

with ``A_k(omega) = g_k(M) + 2*sum_m g_k(M-m) cos(m*omega)`` and ``M = N_G/2``.
Only half the taps of each row are free; the other half follows from the
symmetry.  For degree 1 the even system is empty and the residual
``1 - cos(omega*d)`` is irreducible: no antisymmetric correction filter can
touch the real part.

A plain unweighted fit minimizes the mean-square grid residual and leaves the
worst-case error concentrated at the band-edge/half-delay corner, several dB
above the minimax optimum.  ``design_bank`` therefore applies a few Lawson
reweighting passes by default: after each solve the grid weights are
multiplied by the combined complex residual magnitude and renormalized, which
pushes the solution toward the minimax one while staying a (weighted) linear
least-squares problem on the same grid.  ``reweight_passes=0`` recovers the
plain fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .farrow import CoefficientBank

#: (target error dB, degree L, order N_G) pairs tracing the minimal-complexity
#: frontier at omega_c = 0.9*pi, |d| <= 0.5.  Orders are kept even; the -40 dB
#: entry is rounded up from an odd order accordingly.
ERROR_FRONTIER: tuple[tuple[int, int, int], ...] = (
    (-20, 3, 12),
    (-25, 3, 14),
    (-30, 3, 18),
    (-35, 4, 22),
    (-40, 4, 24),
    (-45, 4, 30),
    (-50, 4, 36),
    (-55, 5, 34),
    (-60, 5, 38),
    (-65, 5, 42),
    (-70, 6, 44),
    (-75, 6, 48),
    (-80, 6, 52),
    (-85, 6, 58),
    (-90, 7, 58),
    (-95, 7, 62),
)


class DesignError(RuntimeError):
    """Raised when the least-squares design problem is rank deficient."""


@dataclass(frozen=True)
class DesignSpec:
    """Design-time parameters of a coefficient bank."""

    degree: int
    order: int
    omega_c: float = 0.9 * np.pi
    d_max: float = 0.5
    n_freq: int | None = None  # default 16 * order
    n_delay: int = 33
    reweight_passes: int = 4

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise ValueError("degree must be at least 1")
        if self.order < 2 or self.order % 2 != 0:
            raise ValueError("order must be even and at least 2")
        if not 0.0 < self.omega_c < np.pi:
            raise ValueError("omega_c must be in (0, pi)")
        if not 0.0 < self.d_max <= 0.5:
            raise ValueError("d_max must be in (0, 0.5]")
        if self.freq_points < 8 * self.order:
            raise ValueError(f"frequency grid too coarse: need at least {8 * self.order} points")
        if self.n_delay < 16:
            raise ValueError("delay grid too coarse: need at least 16 points")
        if self.reweight_passes < 0:
            raise ValueError("reweight_passes must be non-negative")

    @property
    def freq_points(self) -> int:
        return 16 * self.order if self.n_freq is None else self.n_freq


@dataclass(frozen=True)
class ErrorReport:
    """Worst-case complex approximation error of a bank over a dense grid."""

    max_error: float
    error_db: float
    worst_omega: float
    worst_delay: float
    omega_c: float
    d_max: float
    n_freq: int
    n_delay: int


def design_bank(spec: DesignSpec) -> CoefficientBank:
    """Solve the two decoupled least-squares problems and assemble the bank.

    With ``spec.reweight_passes > 0`` the solve is repeated with Lawson
    weights (grid weight times combined residual magnitude, renormalized)
    to pull the worst-case error down toward the minimax level.
    """
    half = spec.order // 2
    omega = np.linspace(0.0, spec.omega_c, spec.freq_points)
    delay = np.linspace(-spec.d_max, spec.d_max, spec.n_delay)
    wg, dg = np.meshgrid(omega, delay, indexing="ij")
    wg = wg.reshape(-1)
    dg = dg.reshape(-1)

    odd_rows = [k for k in range(1, spec.degree + 1) if k % 2 == 1]
    even_rows = [k for k in range(2, spec.degree + 1) if k % 2 == 0]

    m_idx = np.arange(1, half + 1)
    sine = 2.0 * np.sin(np.outer(wg, m_idx))  # (grid, M)
    a_odd = np.concatenate([dg[:, None] ** k * sine for k in odd_rows], axis=1)
    b_odd = -np.sin(wg * dg)
    b_even = np.cos(wg * dg) - 1.0
    if even_rows:
        cosine = np.concatenate([np.ones((wg.size, 1)), 2.0 * np.cos(np.outer(wg, m_idx))], axis=1)
        a_even = np.concatenate([dg[:, None] ** k * cosine for k in even_rows], axis=1)

    weights = np.ones(wg.size)
    for _ in range(spec.reweight_passes + 1):
        root = np.sqrt(weights)
        c_odd = _solve(a_odd * root[:, None], b_odd * root, "antisymmetric")
        resid_even = -b_even  # degree 1 leaves the real part uncorrected
        if even_rows:
            c_even = _solve(a_even * root[:, None], b_even * root, "symmetric")
            resid_even = a_even @ c_even - b_even
        resid = np.hypot(a_odd @ c_odd - b_odd, resid_even)
        weights = weights * resid
        total = weights.sum()
        if total <= 0.0:  # exact fit everywhere; nothing left to reweight
            break
        weights *= weights.size / total

    taps = np.zeros((spec.degree + 1, spec.order + 1))
    taps[0, half] = 1.0
    for j, k in enumerate(odd_rows):
        c = c_odd[j * half : (j + 1) * half]
        taps[k, half - m_idx] = c
        taps[k, half + m_idx] = -c
    width = half + 1
    for j, k in enumerate(even_rows):
        a = c_even[j * width : (j + 1) * width]
        taps[k, half] = a[0]
        taps[k, half - m_idx] = a[1:]
        taps[k, half + m_idx] = a[1:]

    return CoefficientBank(taps)


def _solve(matrix: np.ndarray, rhs: np.ndarray, label: str) -> np.ndarray:
    solution, _, rank, _ = np.linalg.lstsq(matrix, rhs, rcond=None)
    if rank < matrix.shape[1]:
        raise DesignError(
            f"{label} system is rank deficient: rank {rank} < {matrix.shape[1]} unknowns; "
            "refine the design grid or reduce the filter order"
        )
    return solution


def _normalized_responses(bank: CoefficientBank, omega: np.ndarray) -> np.ndarray:
    """Branch responses with the bulk delay removed, shape ``(L+1, len(omega))``."""
    offsets = np.arange(bank.order + 1) - bank.group_delay
    return bank.taps @ np.exp(-1j * np.outer(offsets, omega))


def measure_error(
    bank: CoefficientBank,
    omega_c: float = 0.9 * np.pi,
    d_max: float = 0.5,
    n_freq: int | None = None,
    n_delay: int = 129,
) -> ErrorReport:
    """Worst-case ``|sum_k d^k G_k(omega) - e^{-j*omega*d}|`` on a measurement grid.

    Defaults to a grid four times denser than the design default
    (``64*N_G`` frequencies by 129 delays) so the report is an honest check
    rather than a readback of the fit residual.
    """
    if n_freq is None:
        n_freq = 64 * bank.order
    if n_freq < 2 or n_delay < 2:
        raise ValueError("measurement grid needs at least 2 points per axis")
    omega = np.linspace(0.0, omega_c, n_freq)
    delay = np.linspace(-d_max, d_max, n_delay)
    responses = _normalized_responses(bank, omega)
    powers = delay[:, None] ** np.arange(bank.degree + 1)  # (n_delay, L+1)
    achieved = powers @ responses  # (n_delay, n_freq)
    target = np.exp(-1j * np.outer(delay, omega))
    error = np.abs(achieved - target)
    flat = int(np.argmax(error))
    di, wi = np.unravel_index(flat, error.shape)
    max_error = float(error[di, wi])
    return ErrorReport(
        max_error=max_error,
        error_db=20.0 * np.log10(max_error) if max_error > 0 else -np.inf,
        worst_omega=float(omega[wi]),
        worst_delay=float(delay[di]),
        omega_c=omega_c,
        d_max=d_max,
        n_freq=n_freq,
        n_delay=n_delay,
    )


def first_degree_error_surface(
    order: int,
    bandwidths: np.ndarray,
    d_maxes: np.ndarray,
    n_delay: int = 33,
) -> np.ndarray:
    """Best-achievable error (dB) of degree-1 banks over bandwidth/delay ranges.

    Entry ``[i, j]`` is the measured worst-case error of a degree-1 bank of
    the given order designed and evaluated for ``omega_c = bandwidths[i]*pi``
    and ``|d| <= d_maxes[j]``.  The irreducible real-part residual makes the
    surface climb steeply with both axes.
    """
    errors = np.empty((len(bandwidths), len(d_maxes)))
    for i, bw in enumerate(bandwidths):
        for j, dm in enumerate(d_maxes):
            spec = DesignSpec(degree=1, order=order, omega_c=float(bw) * np.pi, d_max=float(dm), n_delay=n_delay)
            bank = design_bank(spec)
            report = measure_error(bank, omega_c=spec.omega_c, d_max=spec.d_max)
            errors[i, j] = report.error_db
    return errors


def frontier_bank(target_db: int) -> tuple[DesignSpec, CoefficientBank]:
    """Design the frontier bank listed for ``target_db`` (canonical grids)."""
    for tgt, degree, order in ERROR_FRONTIER:
        if tgt == target_db:
            spec = DesignSpec(degree=degree, order=order)
            return spec, design_bank(spec)
    raise KeyError(f"no frontier entry for target {target_db} dB")
