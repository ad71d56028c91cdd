"""Dissipation estimators: ring-down fitting, PSD linewidth, energy autocorrelation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import fft as sp_fft
from scipy import optimize, signal, stats

from .constants import TWO_PI
from .lockin import lockin_demodulate
from .physics import Environment, mean_gas_speed
from .timeseries import TimeSeries

MIN_BINS = 5


class EstimationError(RuntimeError):
    pass


@dataclass
class EnvelopeSeries:
    bin_centers: np.ndarray
    X2_mean: np.ndarray
    X2_stderr: np.ndarray
    bin_width: float

    def __post_init__(self):
        self.bin_centers = np.asarray(self.bin_centers, dtype=float)
        self.X2_mean = np.asarray(self.X2_mean, dtype=float)
        self.X2_stderr = np.asarray(self.X2_stderr, dtype=float)
        n = self.bin_centers.size
        if self.X2_mean.size != n or self.X2_stderr.size != n:
            raise ValueError("envelope arrays must have equal length")
        if np.any(self.X2_stderr < 0):
            raise ValueError("stderr must be >= 0")
        if n > 1 and np.any(np.diff(self.bin_centers) < self.bin_width * (1 - 1e-9)):
            raise ValueError("bins must be time-ordered and non-overlapping")

    def __len__(self):
        return self.bin_centers.size


@dataclass
class DecayFit:
    """Result of fitting ``X^2(t) = X0^2 exp(-gamma t)`` (+ known background).

    ``gamma_ci95`` is the half-width of the 95 % confidence interval.
    """

    gamma_hat: float
    gamma_ci95: float
    X0_sq: float
    reduced_chi2: float
    n_bins: int
    dof: float
    residuals: np.ndarray
    t: np.ndarray
    background_sq: float = 0.0
    gamma_loglin: float = math.nan

    @property
    def gamma_over_2pi(self) -> float:
        return self.gamma_hat / TWO_PI

    def covers(self, gamma: float) -> bool:
        return abs(self.gamma_hat - gamma) <= self.gamma_ci95

    def model(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.X0_sq * np.exp(-self.gamma_hat * t) + self.background_sq


def envelope(ts: TimeSeries, f0: float, bandwidth: float, bin_width: float) -> EnvelopeSeries:
    """Lock-in amplitude squared, averaged in consecutive ``bin_width`` bins.

    The per-bin standard error is the scatter about a within-bin linear trend
    divided by the square root of the number of independent samples the
    lock-in bandwidth allows in one bin (``2 * bandwidth * bin_width``).
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    if ts.duration < 10 * bin_width:
        raise ValueError(f"series of {ts.duration:.6g} s is shorter than 10 bins of {bin_width:.6g} s")
    if bandwidth >= f0 / 2:
        raise ValueError("bandwidth must be well below f0 (< f0/2)")
    q = lockin_demodulate(ts, f0, bandwidth)
    x2 = q.X**2
    rel = q.t - ts.t0
    n_bins = int(math.floor(ts.duration / bin_width + 1e-9))
    idx = np.floor(rel / bin_width + 1e-9).astype(np.int64)
    keep = idx < n_bins
    idx, tt, y = idx[keep], rel[keep], x2[keep]
    centers = (np.arange(n_bins) + 0.5) * bin_width
    tt = tt - centers[idx]
    n = np.bincount(idx, minlength=n_bins).astype(float)
    st = np.bincount(idx, tt, n_bins)
    stt = np.bincount(idx, tt * tt, n_bins)
    sy = np.bincount(idx, y, n_bins)
    sty = np.bincount(idx, tt * y, n_bins)
    syy = np.bincount(idx, y * y, n_bins)
    mean = sy / n
    sxx = stt - st**2 / n
    sxy = sty - st * sy / n
    syy_c = syy - sy**2 / n
    with np.errstate(invalid="ignore", divide="ignore"):
        ss_res = np.where(sxx > 0, syy_c - sxy**2 / sxx, syy_c)
    ss_res = np.maximum(ss_res, 0.0)
    resid_var = ss_res / np.maximum(n - 2, 1)
    n_eff = np.clip(2.0 * bandwidth * bin_width, 1.0, n)
    stderr = np.sqrt(resid_var / n_eff)
    return EnvelopeSeries(ts.t0 + centers, mean, stderr, bin_width)


def thermal_ringdown_cov(t: np.ndarray, amp_sq: float, gamma: float, background_sq: float) -> np.ndarray:
    """Covariance of ``X^2`` at times ``t`` during a thermally driven ring-down.

    With the slow complex amplitude ``a(t) = exp(-gamma t/2) (a0 + M(t))``,
    ``M`` a complex Gaussian martingale with ``E|M(t)|^2 = B (exp(gamma t) - 1)``
    (``B`` the mean background ``X^2``), the covariance of ``|a|^2`` between
    times ``ti <= tj`` is

        exp(-gamma (ti + tj)) * (2 B |a0|^2 u + B^2 u^2),   u = exp(gamma ti) - 1.
    """
    tm = np.minimum.outer(t, t)
    u = np.expm1(gamma * tm)
    decay = np.exp(-gamma * np.add.outer(t, t))
    return decay * (2.0 * background_sq * amp_sq * u + background_sq**2 * u**2)


def fit_decay(env: EnvelopeSeries, background_sq: float = 0.0, n_iter: int = 4) -> DecayFit:
    """Fit the energy ring-down ``X^2(t) = X0^2 exp(-gamma t)``.

    Without a background the fit is a weighted log-linear regression on the
    bin means, refined by one nonlinear least-squares pass on the exponential;
    weights come from the bin standard errors.

    ``background_sq`` is the known mean ``X^2`` of the thermal background
    motion, ``2 k_B T / (m w0^2)``.  When given, the model becomes
    ``X0^2 exp(-gamma t) + background_sq`` and the thermal force acting during
    the decay is accounted for: its contribution to each bin is correlated
    across bins (see :func:`thermal_ringdown_cov`), so the nonlinear pass is a
    generalised least-squares fit with that covariance added to the bin
    errors, re-evaluated at the current estimate for ``n_iter`` rounds.  The
    tail is cut where the fitted excess falls below three background standard
    deviations (the background energy is exponentially distributed, so its
    standard deviation equals its mean).

    ``gamma_ci95`` is Student-t(dof = n - 2) times the parameter standard
    error, inflated by the reduced chi-square when that exceeds one.
    """
    t = np.asarray(env.bin_centers, dtype=float)
    y = np.asarray(env.X2_mean, dtype=float) - background_sq
    s = np.asarray(env.X2_stderr, dtype=float)
    if background_sq < 0:
        raise ValueError("background_sq must be >= 0")
    if background_sq > 0:
        low = np.nonzero(y <= 3.0 * background_sq)[0]
        if low.size:
            t, y, s = t[: low[0]], y[: low[0]], s[: low[0]]
    pos = y > 0
    if not np.all(pos):
        warnings.warn(f"fit_decay: excluded {int((~pos).sum())} non-positive bins", RuntimeWarning, stacklevel=2)
        t, y, s = t[pos], y[pos], s[pos]
    if t.size < MIN_BINS:
        raise EstimationError(f"need at least {MIN_BINS} usable bins for a decay fit, got {t.size}")
    if np.ptp(y) == 0:
        raise EstimationError("all bins are equal: decay rate is not identifiable")

    # relative floor keeps noiseless input finite
    s = np.maximum(s, 1e-12 * np.abs(y))
    ly = np.log(y)
    w = (y / s) ** 2
    A = np.column_stack([np.ones_like(t), t]) * np.sqrt(w)[:, None]
    (ln_a0, slope), *_ = np.linalg.lstsq(A, ly * np.sqrt(w), rcond=None)
    gamma_ll = float(-slope)
    p = np.array([math.exp(ln_a0), gamma_ll])

    def model(pp, tt):
        return pp[0] * np.exp(-pp[1] * tt)

    def jac(pp, tt):
        e = np.exp(-pp[1] * tt)
        return np.column_stack([e, -pp[0] * tt * e])

    t_all, y_all, s_all = t, y, s
    rounds = n_iter if background_sq > 0 else 1
    for _ in range(rounds):
        if background_sq > 0:
            # cut at the model time where the excess reaches 3 background std
            if p[1] > 0 and p[0] > 3 * background_sq:
                t_cut = math.log(p[0] / (3 * background_sq)) / p[1]
                keep = t_all <= t_cut
                if keep.sum() >= MIN_BINS:
                    t, y, s = t_all[keep], y_all[keep], s_all[keep]
            C = thermal_ringdown_cov(t, p[0] + background_sq, max(p[1], 0.0), background_sq)
            C[np.diag_indices_from(C)] += s**2
        else:
            C = np.diag(s**2)
        try:
            L = np.linalg.cholesky(C)
        except np.linalg.LinAlgError as exc:
            raise EstimationError(f"bin covariance is not positive definite: {exc}") from exc

        def whitened(pp, tt=t, yy=y, LL=L):
            return np.linalg.solve(LL, yy - model(pp, tt)) if LL.ndim == 2 else (yy - model(pp, tt))

        sol = optimize.least_squares(whitened, p, x_scale=np.abs(p) + 1e-300, method="lm", max_nfev=2000)
        if not sol.success or not np.all(np.isfinite(sol.x)):
            raise EstimationError(f"nonlinear decay fit failed: {sol.message}")
        p = sol.x

    Jw = np.linalg.solve(L, jac(p, t))
    r = whitened(p)
    n = t.size
    dof = n - 2
    chi2_red = float(np.dot(r, r) / dof) if dof > 0 else math.nan
    try:
        cov = np.linalg.inv(Jw.T @ Jw)
    except np.linalg.LinAlgError as exc:
        raise EstimationError("decay fit covariance is singular") from exc
    var_g = cov[1, 1] * max(chi2_red, 1.0)
    ci = float(stats.t.ppf(0.975, dof) * math.sqrt(var_g))
    return DecayFit(
        gamma_hat=float(p[1]),
        gamma_ci95=ci,
        X0_sq=float(p[0]),
        reduced_chi2=chi2_red,
        n_bins=n,
        dof=float(dof),
        residuals=(y - model(p, t)) / s,
        t=t,
        background_sq=background_sq,
        gamma_loglin=gamma_ll,
    )


class LinewidthFit(NamedTuple):
    fwhm_angular: float
    gamma_implied: float
    f_peak: float
    variance: float
    floor: float
    freqs: np.ndarray
    psd: np.ndarray
    model: np.ndarray
    n_averages: int


MIN_AVERAGES = 20
MIN_DURATION_GAMMA = 50.0  # stationary records must span this many 1/gamma


_KERNEL_BINS = 32
_KERNEL_OVERSAMPLE = 16


def _hann_kernel(df):
    """Unit-area spectral window |W(u)|^2 of a Hann taper with bin spacing ``df``.

    Returns the frequency offsets and kernel weights (already multiplied by
    the grid step) for a +-32 bin support, where sidelobes are below 1e-9.
    """
    j = np.arange(-_KERNEL_BINS * _KERNEL_OVERSAMPLE, _KERNEL_BINS * _KERNEL_OVERSAMPLE + 1)
    x = j / _KERNEL_OVERSAMPLE
    w = 0.5 * np.sinc(x) + 0.25 * np.sinc(x - 1) + 0.25 * np.sinc(x + 1)
    k = w**2
    return x * df, k / k.sum()


def _lorentzian_psd(f, variance, gamma, f_d):
    """One-sided PSD of the autocovariance variance * exp(-gamma|tau|/2) cos(2 pi f_d tau)."""
    half = 0.5 * gamma
    return variance * half * (
        1.0 / (half**2 + (TWO_PI * (f - f_d)) ** 2) + 1.0 / (half**2 + (TWO_PI * (f + f_d)) ** 2)
    ) * 2.0


def _expected_welch(freqs, offsets, kernel, variance, gamma, f_d, floor):
    """Lorentzian line seen through the taper: sum over kernel offsets."""
    grid = freqs[:, None] - offsets[None, :]
    return _lorentzian_psd(grid, variance, gamma, f_d) @ kernel + floor


def psd_linewidth(ts: TimeSeries, f0: float, n_averages: int = MIN_AVERAGES, band_halfwidth: float | None = None) -> LinewidthFit:
    """Linewidth of the displacement PSD around ``f0``.

    Welch estimate with a Hann taper and 50 % overlap, ``n_averages``
    segments.  The line is fitted with a Lorentzian of angular FWHM ``gamma``
    convolved with the taper's spectral window, so the result stays unbiased
    when the line spans only a few frequency bins.  For a linear oscillator
    the angular FWHM equals ``gamma``.
    """
    if n_averages < MIN_AVERAGES:
        raise ValueError(f"need at least {MIN_AVERAGES} averages")
    if not 0 < f0 < ts.fs / 2:
        raise ValueError("f0 must lie between 0 and Nyquist")
    x = ts.samples - ts.samples.mean()
    nperseg = int(2 * x.size // (n_averages + 1))
    nperseg -= nperseg % 2  # even length so 50 % overlap yields >= n_averages segments
    if nperseg < 16:
        raise EstimationError("series too short for the requested number of averages")
    freqs, pxx = signal.welch(x, ts.fs, window="hann", nperseg=nperseg, noverlap=nperseg // 2, detrend="constant")
    n_seg = (x.size - nperseg) // (nperseg - nperseg // 2) + 1
    df = freqs[1] - freqs[0]
    offsets, kernel = _hann_kernel(df)

    # coarse look over +-5 % of f0 to find the line, then narrow the fit band
    half = band_halfwidth if band_halfwidth is not None else 0.05 * f0
    band = (freqs > max(f0 - half, 0)) & (freqs < min(f0 + half, ts.fs / 2))
    fb, pb = freqs[band], pxx[band]
    if fb.size < 10:
        raise EstimationError("too few frequency bins around f0; use a longer record")
    k = int(np.argmax(pb))
    med = float(np.median(pb))
    if pb[k] < 10.0 * med:
        raise EstimationError(
            f"no resonance found near {f0} Hz: peak/median PSD = {pb[k] / max(med, 1e-300):.3g} < 10"
        )
    above = pb > 0.5 * (pb[k] + med)
    gamma0 = TWO_PI * df * max(above.sum(), 1)
    if band_halfwidth is None:
        half = min(half, max(60 * df, 40 * gamma0 / TWO_PI))
        f_c = fb[k]
        band = (freqs > max(f_c - half, 0)) & (freqs < min(f_c + half, ts.fs / 2))
        fb, pb = freqs[band], pxx[band]
        k = int(np.argmax(pb))
    edge = max(fb.size // 8, 1)
    floor0 = float(np.median(np.concatenate([pb[:edge], pb[-edge:]])))
    var0 = max(float(np.sum(pb - floor0) * df), float(pb[k] * df))
    p0 = np.array([math.log(var0), math.log(gamma0), fb[k], math.log(max(floor0, 1e-300))])

    def unpack(p):
        return math.exp(p[0]), math.exp(p[1]), p[2], math.exp(p[3])

    def resid(p):
        return np.log(pb) - np.log(_expected_welch(fb, offsets, kernel, *unpack(p)))

    with np.errstate(over="ignore", invalid="ignore"):
        sol = optimize.least_squares(resid, p0, x_scale=[1.0, 1.0, df, 1.0], method="lm", max_nfev=4000)
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise EstimationError(f"Lorentzian fit failed: {sol.message}")
    var, gam, f_d, floor = unpack(sol.x)
    if gam > TWO_PI * half:
        raise EstimationError("fitted linewidth exceeds the analysis band: no resolvable resonance")
    needed = MIN_DURATION_GAMMA / gam
    if ts.duration < needed:
        raise EstimationError(
            f"record of {ts.duration:.6g} s is too short: linewidth fit needs >= {needed:.6g} s (50/gamma)"
        )
    model = _expected_welch(fb, offsets, kernel, var, gam, f_d, floor)
    return LinewidthFit(gam, gam, f_d, var, floor, fb, pb, model, n_seg)


class EnergyAutocorrelation(NamedTuple):
    lags: np.ndarray
    rho: np.ndarray
    gamma: float
    amplitude: float
    fit_range: tuple


def energy_autocorrelation(ts: TimeSeries, f0: float, bandwidth: float = 0.1, max_lag: float | None = None) -> EnergyAutocorrelation:
    """Normalised autocorrelation of the lock-in energy ``X(t)^2``.

    For thermally driven motion the energy correlation decays as
    ``exp(-gamma tau)`` regardless of amplitude-dependent frequency shifts.
    ``gamma`` is obtained from an exponential fit over lags between
    ``2/bandwidth`` (clear of the lock-in filter) and the 1/e lag.
    """
    q = lockin_demodulate(ts, f0, bandwidth)
    step = max(1, int(ts.fs / (20.0 * bandwidth)))
    e = q.X[::step] ** 2
    dt = ts.dt * step
    e = e - e.mean()
    n = e.size
    nfft = sp_fft.next_fast_len(2 * n)
    spec = np.fft.rfft(e, nfft)
    acov = np.fft.irfft(spec * np.conj(spec), nfft)[:n]
    if acov[0] <= 0:
        raise EstimationError("energy series has zero variance")
    n_lag = n // 2 if max_lag is None else min(n // 2, int(max_lag / dt) + 1)
    rho = acov[:n_lag] / acov[0]
    lags = np.arange(n_lag) * dt
    below = np.nonzero(rho < math.exp(-1.0))[0]
    if below.size == 0:
        raise EstimationError("energy correlation does not decay within the record; use a longer series")
    tau_e = lags[below[0]]
    t_min = 2.0 / bandwidth
    if tau_e < 2.5 * t_min:
        raise EstimationError(
            "energy correlation decays within the lock-in response time: no resolvable ring-down"
        )
    sel = (lags >= t_min) & (lags <= tau_e)
    lt, rt = lags[sel], rho[sel]

    def resid(p):
        return p[0] * np.exp(-p[1] * lt) - rt

    sol = optimize.least_squares(resid, [1.0, 1.0 / tau_e], x_scale=[1.0, 1.0 / tau_e], method="lm")
    if not sol.success:
        raise EstimationError(f"exponential lag fit failed: {sol.message}")
    amp, gam = sol.x
    needed = MIN_DURATION_GAMMA / gam
    if ts.duration < needed:
        raise EstimationError(
            f"record of {ts.duration:.6g} s is too short: energy autocorrelation needs >= {needed:.6g} s (50/gamma)"
        )
    return EnergyAutocorrelation(lags, rho, float(gam), float(amp), (float(lt[0]), float(lt[-1])))


def diameter_from_damping(gamma_He: float, env: Environment, density: float) -> float:
    """Sphere diameter from a gas-damping rate measured at known pressure.

    Inverts ``gamma = (16/pi) P / (v R rho)``: ``d = 2 (16/pi) P / (gamma v rho)``.
    """
    if not gamma_He > 0:
        raise ValueError("gamma_He must be > 0")
    if not env.gas_pressure > 0:
        raise ValueError("gas pressure must be > 0")
    if not density > 0:
        raise ValueError("density must be > 0")
    v = mean_gas_speed(env)
    return 2.0 * (16.0 / math.pi) * env.gas_pressure / (gamma_He * v * density)


# d ln(diameter) / d ln(input)
DIAMETER_LOG_SENSITIVITY = {
    "gas_pressure": 1.0,
    "gamma_He": -1.0,
    "density": -1.0,
    "temperature": -0.5,
    "gas_molecular_mass": 0.5,
}


def diameter_relative_error(rel_errors: dict) -> dict:
    """First-order propagation of relative input errors to the diameter.

    Returns per-input contributions and their quadrature sum under ``"total"``.
    """
    out = {}
    for key, err in rel_errors.items():
        if key not in DIAMETER_LOG_SENSITIVITY:
            raise KeyError(f"no sensitivity for {key!r}; known: {sorted(DIAMETER_LOG_SENSITIVITY)}")
        out[key] = abs(DIAMETER_LOG_SENSITIVITY[key]) * abs(err)
    out["total"] = math.sqrt(sum(v * v for v in out.values()))
    return out
