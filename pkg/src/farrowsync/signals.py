"""Exact harmonic test signals and sampling impairments.

Everything downstream of this module assumes the analog waveform is a finite
sum of complex exponentials, so resampling it at arbitrary (fractional) time
instants is exact: there is no interpolation error in the generated data, and
any residual after compensation is attributable to the compensator itself.

A model evaluated on an affine time grid ``t_j = t0 + j*step`` with a uniform
frequency grid reduces to a chirp-z transform; that fast path is numerically
equivalent to direct evaluation (checked in the tests to ~1e-12 relative) and
is used automatically for large products of tone count and sample count.

Conventions fixed here and relied on elsewhere:

* Frequencies are in radians per sample of the reference grid; models must
  stay inside ``|omega| <= 0.9*pi``.
* A real model with amplitudes ``a_k`` and phases ``phi_k`` is
  ``sum_k a_k*cos(omega_k*t + phi_k)``; its mean power is ``sum(a^2)/2``.
  A complex model is ``sum_k a_k*exp(1j*(omega_k*t + phi_k))`` with mean
  power ``sum(a^2)``.
* The impaired pair is ``x0[j] = x(start+j)`` and
  ``x1[j] = x((start+j)*(1+delta) + epsilon)``, optionally rotated by a
  carrier-offset phase ``exp(1j*(omega_cfo*(start+j) + phase_offset))`` and
  then corrupted by white Gaussian noise on *both* channels.  The SNR is
  defined per channel against that channel's own clean power, and the noise
  for x0 is drawn before the noise for x1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import czt

MAX_OMEGA = 0.9 * np.pi

# Above this many tone-sample products, evaluate_affine switches to the CZT.
_FAST_PATH_THRESHOLD = 1 << 18

_DIRECT_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class HarmonicSignalModel:
    """Finite line spectrum with exact evaluation at arbitrary times."""

    amplitudes: np.ndarray
    omegas: np.ndarray
    phases: np.ndarray
    is_complex: bool = False

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=np.float64)
        omegas = np.asarray(self.omegas, dtype=np.float64)
        phases = np.asarray(self.phases, dtype=np.float64)
        if not (amps.shape == omegas.shape == phases.shape) or amps.ndim != 1:
            raise ValueError("amplitudes, omegas and phases must be 1-D arrays of equal length")
        if amps.size == 0:
            raise ValueError("model must contain at least one tone")
        if not np.all(np.isfinite(amps)) or not np.all(np.isfinite(omegas)) or not np.all(np.isfinite(phases)):
            raise ValueError("model parameters must be finite")
        if np.max(np.abs(omegas)) > MAX_OMEGA + 1e-12:
            raise ValueError(f"tone frequencies must satisfy |omega| <= 0.9*pi, got {np.max(np.abs(omegas)):.6f}")
        if np.any(np.diff(omegas) <= 0):
            raise ValueError("omegas must be strictly increasing")
        for name, arr in (("amplitudes", amps), ("omegas", omegas), ("phases", phases)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_tones(self) -> int:
        return self.omegas.size

    @property
    def analytic_power(self) -> float:
        """Mean power of the waveform (time average over an infinite window)."""
        p = float(np.sum(self.amplitudes**2))
        return p if self.is_complex else p / 2.0

    @property
    def has_uniform_grid(self) -> bool:
        """True when the tone frequencies form an exact arithmetic progression."""
        if self.n_tones < 3:
            return True
        steps = np.diff(self.omegas)
        return bool(np.all(np.abs(steps - steps[0]) <= 1e-12))

    def _coefficients(self) -> np.ndarray:
        return self.amplitudes * np.exp(1j * self.phases)

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """Evaluate the waveform at arbitrary times by direct summation."""
        t = np.asarray(t, dtype=np.float64)
        flat = t.reshape(-1)
        coeffs = self._coefficients()
        out = np.empty(flat.size, dtype=np.complex128)
        for lo in range(0, flat.size, _DIRECT_CHUNK):
            chunk = flat[lo : lo + _DIRECT_CHUNK]
            out[lo : lo + chunk.size] = np.exp(1j * np.outer(chunk, self.omegas)) @ coeffs
        result = out.reshape(t.shape)
        return result if self.is_complex else result.real

    def evaluate_affine(self, t0: float, step: float, count: int, fast: bool | None = None) -> np.ndarray:
        """Evaluate on the grid ``t0 + step*arange(count)``.

        ``fast=None`` picks the chirp-z path automatically for large jobs;
        ``fast=True`` forces it (requires a uniform frequency grid) and
        ``fast=False`` forces direct summation.
        """
        if count < 0:
            raise ValueError("count must be nonnegative")
        if fast is None:
            fast = self.has_uniform_grid and self.n_tones * count > _FAST_PATH_THRESHOLD
        if not fast:
            return self.evaluate(t0 + step * np.arange(count))
        if not self.has_uniform_grid:
            raise ValueError("fast evaluation requires a uniform frequency grid")
        if count == 0:
            dtype = np.complex128 if self.is_complex else np.float64
            return np.zeros(0, dtype=dtype)
        w0 = float(self.omegas[0])
        dw = float(self.omegas[1] - self.omegas[0]) if self.n_tones > 1 else 0.0
        # sum_m c_m e^{j omega_m t_j} = e^{j w0 t_j} * sum_m (c_m e^{j dw m t0}) e^{j dw s j m}
        x = self._coefficients() * np.exp(1j * dw * float(t0) * np.arange(self.n_tones))
        spectrum = czt(x, m=count, w=np.exp(1j * dw * float(step)), a=1.0 + 0.0j)
        result = spectrum * np.exp(1j * w0 * (float(t0) + float(step) * np.arange(count)))
        return result if self.is_complex else result.real


# ── Generators ────────────────────────────────────────────────────────────────


def make_multisine(
    n_tones: int = 64,
    qam_order: int = 16,
    bandwidth: float = 0.9,
    seed: int = 0,
    complex_signal: bool = False,
) -> HarmonicSignalModel:
    """Multisine with QAM-modulated tone amplitudes and phases.

    Tones sit on the uniform grid ``omega_i = bandwidth*pi*i/n_tones`` for
    ``i = 1..n_tones`` (no DC).  Amplitude and phase of tone ``i`` are the
    magnitude and angle of a random QAM symbol, left unnormalized, so the
    expected mean power of the real signal is ``n_tones * E|s|^2 / 2``.
    """
    from . import qam

    if not 0 < bandwidth <= 0.9:
        raise ValueError("bandwidth must be in (0, 0.9]")
    if n_tones < 1:
        raise ValueError("n_tones must be positive")
    rng = np.random.default_rng(seed)
    symbols = qam.random_symbols(qam_order, n_tones, rng)
    omegas = bandwidth * np.pi * np.arange(1, n_tones + 1) / n_tones
    return HarmonicSignalModel(
        amplitudes=np.abs(symbols),
        omegas=omegas,
        phases=np.angle(symbols),
        is_complex=complex_signal,
    )


def make_bandpass_noise(
    n_lines: int = 512,
    band: tuple[float, float] = (0.1, 0.8),
    seed: int = 0,
    complex_signal: bool = False,
) -> HarmonicSignalModel:
    """Dense equal-amplitude random-phase line spectrum over ``band`` (in units of pi).

    With unit amplitudes the real signal has mean power ``n_lines/2``.
    """
    lo, hi = band
    if not 0 <= lo < hi <= 0.9:
        raise ValueError("band must satisfy 0 <= low < high <= 0.9 (units of pi)")
    if n_lines < 2:
        raise ValueError("n_lines must be at least 2")
    rng = np.random.default_rng(seed)
    omegas = np.pi * np.linspace(lo, hi, n_lines)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_lines)
    return HarmonicSignalModel(
        amplitudes=np.ones(n_lines),
        omegas=omegas,
        phases=phases,
        is_complex=complex_signal,
    )


@dataclass(frozen=True)
class OfdmSpec:
    """Parameters of a single OFDM symbol used as the test waveform.

    The harmonic model is periodic with period ``n_fft``, so the cyclic
    prefix is implicit in the waveform; ``cp_length`` is carried along as
    frame metadata only.
    """

    n_fft: int = 2048
    active_subcarriers: int = 1536
    qam_order: int = 64
    cp_length: int = 144
    seed: int = 0

    def __post_init__(self) -> None:
        if self.qam_order not in (16, 64):
            raise ValueError("qam_order must be 16 or 64")
        if self.active_subcarriers % 2 != 0 or self.active_subcarriers <= 0:
            raise ValueError("active_subcarriers must be positive and even")
        if self.active_subcarriers >= self.n_fft:
            raise ValueError("active_subcarriers must be smaller than n_fft")
        if self.active_subcarriers / self.n_fft > 0.9:
            raise ValueError("occupied bandwidth exceeds 0.9*pi")


@dataclass(frozen=True, eq=False)
class OfdmPayload:
    """Transmitted subcarrier symbols, for error scoring after demodulation."""

    bins: np.ndarray  # signed subcarrier indices, ascending
    symbols: np.ndarray  # complex QAM symbols, aligned with bins
    qam_order: int
    n_fft: int


def make_ofdm(spec: OfdmSpec) -> tuple[HarmonicSignalModel, OfdmPayload]:
    """Build the complex baseband OFDM waveform and its payload.

    Subcarriers ``k = -A/2..A/2`` excluding DC carry random QAM symbols; the
    DC bin is kept in the model with zero amplitude so the frequency grid
    stays uniform for the fast evaluation path.
    """
    from . import qam

    rng = np.random.default_rng(spec.seed)
    half = spec.active_subcarriers // 2
    bins = np.concatenate([np.arange(-half, 0), np.arange(1, half + 1)])
    symbols = qam.random_symbols(spec.qam_order, bins.size, rng)
    grid = np.arange(-half, half + 1)
    coeffs = np.zeros(grid.size, dtype=np.complex128)
    coeffs[grid != 0] = symbols
    model = HarmonicSignalModel(
        amplitudes=np.abs(coeffs),
        omegas=2.0 * np.pi * grid / spec.n_fft,
        phases=np.angle(coeffs),
        is_complex=True,
    )
    payload = OfdmPayload(bins=bins, symbols=symbols, qam_order=spec.qam_order, n_fft=spec.n_fft)
    return model, payload


def ofdm_demodulate(samples: np.ndarray, payload: OfdmPayload, start_time: float) -> np.ndarray:
    """Recover subcarrier symbols from one period of the (compensated) waveform.

    ``samples`` must hold ``n_fft`` consecutive samples whose first element
    corresponds to absolute time ``start_time`` on the reference grid.
    """
    m = payload.n_fft
    if samples.size != m:
        raise ValueError(f"expected {m} samples, got {samples.size}")
    spectrum = np.fft.fft(np.asarray(samples, dtype=np.complex128)) / m
    rotation = np.exp(-2j * np.pi * payload.bins * start_time / m)
    return spectrum[np.mod(payload.bins, m)] * rotation


# ── Impairments ───────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ImpairmentSpec:
    """Sampling and front-end impairments applied to the sampled pair.

    ``delta`` is the relative sampling-frequency offset, ``epsilon`` the
    sampling-time offset in units of the reference period.  ``cfo_fraction``
    is a residual carrier offset as a fraction of the subcarrier spacing
    ``2*pi/n_fft`` and needs ``n_fft`` to be set; it only applies to complex
    models.  The carrier rotation models a common downconversion error, so
    it multiplies the continuous-time signal ahead of both sampling chains:
    each chain picks up the rotation evaluated at its own sampling instants.
    ``snr_db=None`` means noiseless.
    """

    delta: float = 0.0
    epsilon: float = 0.0
    snr_db: float | None = None
    cfo_fraction: float = 0.0
    phase_offset: float = 0.0
    n_fft: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.cfo_fraction != 0.0 and self.n_fft is None:
            raise ValueError("cfo_fraction requires n_fft to define the subcarrier spacing")


def add_awgn(x: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise at ``snr_db`` relative to the measured power of ``x``.

    Complex inputs get circular noise with the variance split evenly between
    the real and imaginary parts.
    """
    power = float(np.mean(np.abs(x) ** 2))
    variance = power / 10.0 ** (snr_db / 10.0)
    if np.iscomplexobj(x):
        scale = np.sqrt(variance / 2.0)
        noise = rng.normal(0.0, scale, x.size) + 1j * rng.normal(0.0, scale, x.size)
    else:
        noise = rng.normal(0.0, np.sqrt(variance), x.size)
    return x + noise


def sample_pair(
    model: HarmonicSignalModel,
    impairment: ImpairmentSpec,
    n_total: int,
    start: int = 0,
    fast: bool | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample the reference and the impaired channel over a common index window.

    Element ``j`` of both outputs corresponds to sample index ``n = start + j``:
    ``x0[j] = x(n)`` and ``x1[j] = x(n*(1+delta) + epsilon)``.  A carrier
    offset rotates the underlying continuous signal, so both chains see it
    at their respective sampling times; per-channel noise is independent.
    """
    if n_total <= 0:
        raise ValueError("n_total must be positive")
    n = np.arange(n_total, dtype=np.float64) + float(start)
    x0 = model.evaluate_affine(float(start), 1.0, n_total, fast=fast)
    t1_start = float(start) * (1.0 + impairment.delta) + impairment.epsilon
    x1 = model.evaluate_affine(t1_start, 1.0 + impairment.delta, n_total, fast=fast)
    if impairment.cfo_fraction != 0.0 or impairment.phase_offset != 0.0:
        if not model.is_complex:
            raise ValueError("carrier impairments require a complex model")
        omega_cfo = 2.0 * np.pi * impairment.cfo_fraction / impairment.n_fft if impairment.cfo_fraction else 0.0
        t1 = n * (1.0 + impairment.delta) + impairment.epsilon
        x0 = x0 * np.exp(1j * (omega_cfo * n + impairment.phase_offset))
        x1 = x1 * np.exp(1j * (omega_cfo * t1 + impairment.phase_offset))
    if impairment.snr_db is not None:
        rng = np.random.default_rng(impairment.seed)
        x0 = add_awgn(x0, impairment.snr_db, rng)
        x1 = add_awgn(x1, impairment.snr_db, rng)
    return x0, x1
