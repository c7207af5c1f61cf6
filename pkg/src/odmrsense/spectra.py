"""Lineshapes, spectrum synthesis, peak fitting and slope estimators.

A resonance line is an asymmetric pseudo-Voigt: independent left/right
half-widths at half maximum and a shape_mix that blends Lorentzian
(mix=1) with Gaussian (mix=0) profiles.  Because both pure profiles fall
to 1/2 at one half-width, the widths remain exact HWHMs for any mix.

Spectra are plain (frequency, signal) arrays; signals are typically
fractional contrast, so lines can point up or down.  Fitting is bounded
trust-region least squares over all line parameters jointly, with
1-sigma center uncertainties taken from the Gauss-Newton covariance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares, minimize_scalar
from scipy.signal import find_peaks, peak_widths
from scipy.stats import median_abs_deviation

from .errors import (
    DataFormatError,
    FitConvergenceError,
    InvalidParameterError,
    NoEdgeError,
)

_LN2 = np.log(2.0)

# Peak |d/du| of the unit-height profiles; the Lorentzian value is exact
# (3 sqrt(3) / 8), the Gaussian one is sqrt(2 ln 2) exp(-1/2).
_LORENTZ_PEAK_SLOPE = 3.0 * np.sqrt(3.0) / 8.0
_GAUSS_PEAK_SLOPE = np.sqrt(2.0 * _LN2) * np.exp(-0.5)


@dataclass(frozen=True)
class LineModel:
    """One asymmetric pseudo-Voigt line.

    center in MHz, width_left/width_right are the per-side HWHMs in MHz,
    amplitude is the signed peak height, shape_mix in [0, 1] blends
    Lorentzian (1) into Gaussian (0).
    """

    center: float
    width_left: float
    width_right: float
    amplitude: float
    shape_mix: float = 1.0

    def __post_init__(self):
        vals = (self.center, self.width_left, self.width_right, self.amplitude, self.shape_mix)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidParameterError("line parameters must be finite")
        if self.width_left <= 0 or self.width_right <= 0:
            raise InvalidParameterError("widths must be positive")
        if not 0.0 <= self.shape_mix <= 1.0:
            raise InvalidParameterError("shape_mix must lie in [0, 1]")

    @classmethod
    def symmetric(cls, center: float, fwhm: float, amplitude: float,
                  shape_mix: float = 1.0) -> "LineModel":
        """Symmetric line specified by its full width at half maximum."""
        if fwhm <= 0:
            raise InvalidParameterError("fwhm must be positive")
        return cls(center, fwhm / 2.0, fwhm / 2.0, amplitude, shape_mix)

    @property
    def fwhm(self) -> float:
        return self.width_left + self.width_right

    def evaluate(self, freqs_mhz) -> np.ndarray:
        f = np.asarray(freqs_mhz, dtype=float)
        width = np.where(f < self.center, self.width_left, self.width_right)
        u2 = ((f - self.center) / width) ** 2
        profile = (self.shape_mix / (1.0 + u2)
                   + (1.0 - self.shape_mix) * np.exp(-_LN2 * u2))
        return self.amplitude * profile

    def max_abs_slope(self) -> float:
        """Largest |dS/df| in signal units per MHz.

        The steeper side is the narrower one since the peak profile slope
        scales as 1/width.
        """
        peak = _profile_peak_slope(self.shape_mix)
        return abs(self.amplitude) * peak / min(self.width_left, self.width_right)


def _profile_peak_slope(mix: float) -> float:
    if mix == 1.0:
        return _LORENTZ_PEAK_SLOPE
    if mix == 0.0:
        return _GAUSS_PEAK_SLOPE

    def neg_slope(u):
        lor = 2.0 * u / (1.0 + u * u) ** 2
        gau = 2.0 * _LN2 * u * np.exp(-_LN2 * u * u)
        return -(mix * lor + (1.0 - mix) * gau)

    res = minimize_scalar(neg_slope, bounds=(1e-6, 3.0), method="bounded",
                          options={"xatol": 1e-12})
    return float(-res.fun)


def evaluate_lines(lines, freqs_mhz) -> np.ndarray:
    """Sum of line profiles on a frequency grid."""
    f = np.asarray(freqs_mhz, dtype=float)
    total = np.zeros_like(f)
    for line in lines:
        total += line.evaluate(f)
    return total


@dataclass(frozen=True)
class SpectrumMeta:
    """Provenance sidecar: noise level, RNG seed, control-parameter tag."""

    noise_sigma: float | None = None
    seed: int | None = None
    control_value: float | None = None
    control_unit: str | None = None

    def to_dict(self) -> dict:
        return {
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "control_value": self.control_value,
            "control_unit": self.control_unit,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpectrumMeta":
        known = {k: data.get(k) for k in
                 ("noise_sigma", "seed", "control_value", "control_unit")}
        return cls(**known)


@dataclass(frozen=True)
class Spectrum:
    """Signal sampled on a strictly increasing frequency grid (MHz)."""

    freqs_mhz: np.ndarray
    signal: np.ndarray
    meta: SpectrumMeta | None = None

    def __init__(self, freqs_mhz, signal, meta: SpectrumMeta | None = None):
        f = np.asarray(freqs_mhz, dtype=float)
        s = np.asarray(signal, dtype=float)
        if f.ndim != 1 or f.shape != s.shape:
            raise InvalidParameterError("freqs and signal must be equal-length 1-D arrays")
        if f.size < 8:
            raise InvalidParameterError("spectrum needs at least 8 samples")
        if not np.all(np.isfinite(f)) or not np.all(np.isfinite(s)):
            raise InvalidParameterError("spectrum contains non-finite values")
        if np.any(np.diff(f) <= 0):
            raise InvalidParameterError("frequency grid must be strictly increasing")
        object.__setattr__(self, "freqs_mhz", f)
        object.__setattr__(self, "signal", s)
        object.__setattr__(self, "meta", meta)

    def __len__(self) -> int:
        return self.freqs_mhz.size


def synthesize(
    lines,
    freqs_mhz,
    noise_sigma: float = 0.0,
    seed: int | None = None,
    control_value: float | None = None,
    control_unit: str | None = None,
) -> Spectrum:
    """Evaluate lines on a grid and add white Gaussian noise.

    The same (lines, grid, noise_sigma, seed) always produces identical
    samples; noise_sigma = 0 is noiseless regardless of seed.
    """
    if noise_sigma < 0 or not np.isfinite(noise_sigma):
        raise InvalidParameterError("noise_sigma must be finite and >= 0")
    signal = evaluate_lines(lines, freqs_mhz)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        signal = signal + rng.normal(0.0, noise_sigma, size=signal.shape)
    meta = SpectrumMeta(noise_sigma=noise_sigma, seed=seed,
                        control_value=control_value, control_unit=control_unit)
    return Spectrum(freqs_mhz, signal, meta)


def robust_noise_sigma(spectrum: Spectrum) -> float:
    """Noise level from the MAD of second differences.

    Double differencing annihilates anything locally linear, so smooth
    spectral structure contributes only through its curvature; white
    noise of std sigma gives second differences of std sqrt(6) sigma.
    """
    return float(median_abs_deviation(np.diff(spectrum.signal, n=2), scale="normal")
                 / np.sqrt(6.0))


def auto_guesses(spectrum: Spectrum) -> list[LineModel]:
    """Detect candidate lines of either polarity.

    Peaks must rise at least 3x the robust noise estimate above their
    surroundings and above the median baseline; the baseline condition
    keeps the valley between two positive lines from registering as a
    wide negative line (its prominence alone is the full line depth).
    Width guesses come from the half-prominence width; amplitudes are
    signed heights above the median baseline.
    """
    sigma = robust_noise_sigma(spectrum)
    # sigma-clipped median: the plain median sits well above the
    # between-line floor once fat-tailed lines cover much of the span
    baseline = float(np.median(spectrum.signal))
    for _ in range(3):
        kept = spectrum.signal[np.abs(spectrum.signal - baseline) < 4.0 * sigma]
        if kept.size < 8:
            break
        baseline = float(np.median(kept))
    step = float(np.median(np.diff(spectrum.freqs_mhz)))
    prominence = max(3.0 * sigma, 1e-300)
    n = len(spectrum)
    smooth_width = min(max(n // 200, 3), 25) | 1
    kernel = np.full(smooth_width, 1.0 / smooth_width)
    guesses: list[tuple[float, LineModel]] = []
    for sign in (1.0, -1.0):
        trace = sign * (spectrum.signal - baseline)
        # detect on a smoothed copy: genuine lines span many samples and
        # keep their prominence, noise wiggles drop well below the
        # 3-sigma bar once averaged
        smooth = np.convolve(trace, kernel, mode="same")
        idx, _ = find_peaks(smooth, prominence=prominence, height=prominence)
        if idx.size == 0:
            continue
        widths_samples = peak_widths(smooth, idx, rel_height=0.5)[0]
        for peak, wsamp in zip(idx, widths_samples):
            center = float(spectrum.freqs_mhz[peak])
            hwhm = max(wsamp * step / 2.0, step / 2.0)
            amplitude = sign * float(trace[peak])
            guesses.append((center, LineModel(center, hwhm, hwhm, amplitude, 0.5)))
    guesses.sort(key=lambda pair: pair[0])
    return [line for _, line in guesses]


@dataclass(frozen=True)
class PeakFit:
    """Fitted line summary.

    width is the full width at half maximum (sum of the two half-widths);
    center_sigma is the 1-sigma center uncertainty from the Gauss-Newton
    covariance.  The complete fitted LineModel rides along in line.
    """

    center: float
    center_sigma: float
    width: float
    amplitude: float
    residual_rms: float
    converged: bool
    line: LineModel = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "center": self.center,
            "center_sigma": self.center_sigma,
            "width": self.width,
            "amplitude": self.amplitude,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "line": {
                "center": self.line.center,
                "width_left": self.line.width_left,
                "width_right": self.line.width_right,
                "amplitude": self.line.amplitude,
                "shape_mix": self.line.shape_mix,
            },
        }


def _pack(lines) -> np.ndarray:
    return np.concatenate([
        [ln.center, ln.width_left, ln.width_right, ln.amplitude, ln.shape_mix]
        for ln in lines
    ])


def _unpack(vec: np.ndarray) -> list[LineModel]:
    out = []
    for k in range(0, vec.size, 5):
        c, wl, wr, a, m = vec[k:k + 5]
        out.append(LineModel(float(c), max(float(wl), 1e-300), max(float(wr), 1e-300),
                             float(a), float(np.clip(m, 0.0, 1.0))))
    return out


def fit_peaks(
    spectrum: Spectrum,
    guesses=None,
    max_iter: int = 200,
) -> list[PeakFit]:
    """Fit a sum of asymmetric pseudo-Voigt lines to a spectrum.

    guesses is a sequence of LineModel starting points; None triggers
    auto_guesses.  All lines are refined jointly.  Non-convergence is
    reported through the converged flag of every returned PeakFit, not as
    an exception, so partial results stay inspectable.
    """
    if guesses is None:
        guesses = auto_guesses(spectrum)
        if not guesses:
            raise FitConvergenceError("no peaks detected above the noise floor")
    guesses = list(guesses)
    f = spectrum.freqs_mhz
    s = spectrum.signal
    fmin, fmax = float(f[0]), float(f[-1])
    span = fmax - fmin
    step = float(np.median(np.diff(f)))
    amp_bound = 10.0 * max(float(np.max(np.abs(s))), 1e-30)

    lower, upper = [], []
    for ln in guesses:
        if not fmin <= ln.center <= fmax:
            raise InvalidParameterError(
                f"guess center {ln.center} lies outside the sampled range")
        # keep each line near its own guess so neighbours cannot swap
        box = max(4.0 * ln.fwhm, 20.0 * step)
        lower += [max(fmin, ln.center - box), step / 10.0, step / 10.0, -amp_bound, 0.0]
        upper += [min(fmax, ln.center + box), span, span, amp_bound, 1.0]
    lower = np.asarray(lower)
    upper = np.asarray(upper)
    x0 = np.clip(_pack(guesses), lower, upper)

    def residuals(vec):
        return evaluate_lines(_unpack(vec), f) - s

    result = least_squares(
        residuals, x0, bounds=(lower, upper), method="trf",
        xtol=1e-8, ftol=1e-8, gtol=1e-8,
        max_nfev=max_iter * (x0.size + 1),
    )
    converged = bool(result.success)
    rms = float(np.sqrt(np.mean(result.fun ** 2)))

    dof = max(f.size - x0.size, 1)
    jac = result.jac
    try:
        cov = np.linalg.pinv(jac.T @ jac) * (2.0 * result.cost / dof)
        sigmas = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        sigmas = np.full(x0.size, np.inf)
        converged = False

    fitted = _unpack(result.x)
    fits = []
    for k, ln in enumerate(fitted):
        fits.append(PeakFit(
            center=ln.center,
            center_sigma=float(sigmas[5 * k]),
            width=ln.fwhm,
            amplitude=ln.amplitude,
            residual_rms=rms,
            converged=converged,
            line=ln,
        ))
    return fits


def steep_edge_center(spectrum: Spectrum, window: tuple[float, float]) -> float:
    """Frequency of the steepest signal slope inside a window.

    The discrete derivative is scanned for its largest magnitude and the
    extremum is refined with a three-point parabola, giving sub-sample
    resolution.  If no slope clears three times the noise-induced
    derivative floor the window is considered edge-free and NoEdgeError
    is raised.
    """
    lo, hi = window
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise InvalidParameterError("window must be a finite (low, high) pair")
    mask = (spectrum.freqs_mhz >= lo) & (spectrum.freqs_mhz <= hi)
    if mask.sum() < 5:
        raise InvalidParameterError("window must contain at least 5 samples")
    f = spectrum.freqs_mhz[mask]
    s = spectrum.signal[mask]

    grad = np.gradient(s, f)
    mag = np.abs(grad)
    step = float(np.median(np.diff(f)))
    sigma = float(median_abs_deviation(np.diff(s, n=2), scale="normal") / np.sqrt(6.0))
    # noise slope floor: std of a differenced-noise slope, sigma sqrt(2)/step;
    # the eps term absorbs np.gradient roundoff leakage on constant signals
    floor = max(3.0 * sigma * np.sqrt(2.0) / step,
                64.0 * np.finfo(float).eps * max(np.abs(s).max(), 1e-300) / step)
    k = int(np.argmax(mag))
    if mag[k] <= floor:
        raise NoEdgeError("no slope above the noise floor in the window")
    if k == 0 or k == mag.size - 1:
        return float(f[k])
    # vertex of the parabola through the three points around the extremum
    coeff = np.polyfit(f[k - 1:k + 2], mag[k - 1:k + 2], 2)
    if coeff[0] >= 0:
        return float(f[k])
    vertex = -coeff[1] / (2.0 * coeff[0])
    return float(np.clip(vertex, f[k - 1], f[k + 1]))


def max_signal_slope(obj) -> float:
    """Largest |dS/df| of a LineModel (analytic) or Spectrum (discrete)."""
    if isinstance(obj, LineModel):
        return obj.max_abs_slope()
    if isinstance(obj, Spectrum):
        return float(np.max(np.abs(np.gradient(obj.signal, obj.freqs_mhz))))
    raise InvalidParameterError("expected a LineModel or Spectrum")


def _meta_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def write_spectrum(spectrum: Spectrum, path) -> Path:
    """Write frequency_mhz,signal CSV plus a .meta.json sidecar."""
    path = Path(path)
    lines = ["frequency_mhz,signal"]
    for fr, sg in zip(spectrum.freqs_mhz, spectrum.signal):
        lines.append(f"{float(fr)!r},{float(sg)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if spectrum.meta is not None:
        _meta_path(path).write_text(
            json.dumps(spectrum.meta.to_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8")
    return path


def read_spectrum(path) -> Spectrum:
    """Read a spectrum CSV; picks up the .meta.json sidecar when present."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    rows = raw.splitlines()
    if not rows or rows[0].strip() != "frequency_mhz,signal":
        raise DataFormatError(f"{path}:1: expected header 'frequency_mhz,signal'")
    freqs, signal = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row.strip():
            continue
        parts = row.split(",")
        if len(parts) != 2:
            raise DataFormatError(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
        try:
            freqs.append(float(parts[0]))
            signal.append(float(parts[1]))
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    meta = None
    sidecar = _meta_path(path)
    if sidecar.exists():
        try:
            meta = SpectrumMeta.from_dict(json.loads(sidecar.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, TypeError) as exc:
            raise DataFormatError(f"invalid sidecar {sidecar}: {exc}") from exc
    try:
        return Spectrum(freqs, signal, meta)
    except InvalidParameterError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
