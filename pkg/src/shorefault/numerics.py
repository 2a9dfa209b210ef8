"""Numerical kernels: fixed-step integration, Park transforms, windowed
statistics, phasor extraction and damped-oscillation curve fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

TWO_PI_3 = 2.0 * math.pi / 3.0


class IntegrationError(RuntimeError):
    """Raised when a derivative evaluation produces a non-finite value."""

    def __init__(self, index: int, t: float):
        super().__init__(f"non-finite derivative for state index {index} at t={t:.6g} s")
        self.index = index
        self.t = t


class ParameterError(ValueError):
    pass


# --------------------------------------------------------------------------
# data records
# --------------------------------------------------------------------------


@dataclass
class TimeSeries:
    """Uniformly sampled multi-channel record."""

    t0: float
    dt: float
    channels: dict[str, np.ndarray] = field(default_factory=dict)
    units: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        self.channels = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}
        lengths = {len(v) for v in self.channels.values()}
        if len(lengths) > 1:
            raise ParameterError(f"channels have unequal lengths {sorted(lengths)}")
        if lengths and lengths.pop() < 1:
            raise ParameterError("a time series needs at least one sample")

    def __len__(self) -> int:
        if not self.channels:
            return 0
        return len(next(iter(self.channels.values())))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    @property
    def time(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (len(self) - 1)

    def select(self, names: Sequence[str]) -> "TimeSeries":
        return TimeSeries(self.t0, self.dt, {n: self.channels[n] for n in names},
                          {n: self.units.get(n, "") for n in names})

    def window(self, start: float, stop: float) -> "TimeSeries":
        """Samples with start <= t <= stop (inclusive, to half a sample)."""
        i0 = max(0, int(math.ceil((start - self.t0) / self.dt - 1e-9)))
        i1 = min(len(self), int(math.floor((stop - self.t0) / self.dt + 1e-9)) + 1)
        if i1 <= i0:
            raise ParameterError(f"empty window [{start}, {stop}]")
        return TimeSeries(self.t0 + i0 * self.dt, self.dt,
                          {k: v[i0:i1] for k, v in self.channels.items()}, dict(self.units))


@dataclass(frozen=True)
class Phasor:
    magnitude: float  # rms
    angle: float  # rad, in (-pi, pi]
    frequency: float

    def __post_init__(self):
        if self.magnitude < 0:
            raise ParameterError("phasor magnitude must be non-negative")

    @property
    def complex(self) -> complex:
        return self.magnitude * complex(math.cos(self.angle), math.sin(self.angle))

    @classmethod
    def from_complex(cls, value: complex, frequency: float) -> "Phasor":
        return cls(abs(value), _wrap_angle(math.atan2(value.imag, value.real)), frequency)


@dataclass
class FitResult:
    model: str
    coefficients: dict[str, float]
    residual_norm: float
    converged: bool
    iterations: int
    t_origin: float = 0.0

    def __post_init__(self):
        if self.coefficients.get("b", 0.0) < 0:
            raise ParameterError("fitted decay rate must be non-negative")
        if self.residual_norm < 0:
            raise ParameterError("residual norm must be non-negative")

    def __getitem__(self, key: str) -> float:
        return self.coefficients[key]

    def evaluate(self, t: np.ndarray, filtered: bool = False) -> np.ndarray:
        """Model curve at absolute times ``t``; ``filtered`` keeps the
        moving-average window the ``sine`` fit was made through."""
        model = MODELS[self.model]
        p = np.array([self.coefficients[k] for k in model.names])
        fixed = model.fixed(self.coefficients)
        if not filtered:
            fixed["window"] = 0.0
        return model.value(np.asarray(t, dtype=float) - self.t_origin, p, fixed)


def _wrap_angle(a: float) -> float:
    a = math.remainder(a, 2.0 * math.pi)
    return math.pi if a == -math.pi else a


# --------------------------------------------------------------------------
# integration
# --------------------------------------------------------------------------


def _check_finite(vec: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(vec)):
        raise IntegrationError(int(np.flatnonzero(~np.isfinite(vec))[0]), t)


def integrate_step(state: np.ndarray, derivative: Callable[[float, np.ndarray], np.ndarray],
                   t: float, dt: float, corrector_passes: int = 1) -> np.ndarray:
    """Advance ``state`` from ``t`` to ``t + dt`` with the trapezoidal rule.

    An explicit Euler predictor is followed by ``corrector_passes`` fixed-point
    sweeps of the implicit trapezoidal equation; one pass gives Heun's
    second-order scheme.
    """
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    x0 = np.asarray(state, dtype=float)
    f0 = np.asarray(derivative(t, x0), dtype=float)
    _check_finite(f0, t)
    x1 = x0 + dt * f0
    for _ in range(max(1, corrector_passes)):
        f1 = np.asarray(derivative(t + dt, x1), dtype=float)
        _check_finite(f1, t + dt)
        x1 = x0 + 0.5 * dt * (f0 + f1)
    return x1


# --------------------------------------------------------------------------
# reference frames
# --------------------------------------------------------------------------


def abc_to_dq0(a, b, c, theta):
    """Amplitude-invariant Park transform, d axis at ``theta`` from phase a,
    q axis lagging d by 90 degrees.

    A balanced set ``X cos(theta + phi)`` maps to ``d = X cos(phi)``,
    ``q = -X sin(phi)``; the phasor is therefore ``d - jq``.
    """
    ca, cb, cc = np.cos(theta), np.cos(theta - TWO_PI_3), np.cos(theta + TWO_PI_3)
    sa, sb, sc = np.sin(theta), np.sin(theta - TWO_PI_3), np.sin(theta + TWO_PI_3)
    d = (2.0 / 3.0) * (a * ca + b * cb + c * cc)
    q = (2.0 / 3.0) * (a * sa + b * sb + c * sc)
    z = (a + b + c) / 3.0
    return d, q, z


def dq0_to_abc(d, q, z, theta):
    a = d * np.cos(theta) + q * np.sin(theta) + z
    b = d * np.cos(theta - TWO_PI_3) + q * np.sin(theta - TWO_PI_3) + z
    c = d * np.cos(theta + TWO_PI_3) + q * np.sin(theta + TWO_PI_3) + z
    return a, b, c


def phasor_to_abc(value: complex, theta):
    """Instantaneous phase values of a positive-sequence set whose phase-a
    peak phasor is ``value`` at rotating angle ``theta``."""
    return dq0_to_abc(value.real, -value.imag, 0.0, theta)


# --------------------------------------------------------------------------
# windowed statistics
# --------------------------------------------------------------------------


def _window_samples(window: float, dt: float) -> int:
    if window < dt * (1.0 - 1e-9):
        raise ParameterError(f"window {window} s is shorter than the sample interval {dt} s")
    return max(1, int(round(window / dt)))


def _box_weights(width: float) -> np.ndarray:
    """Weights of a centred box of ``width`` samples applied to the linear
    interpolant of the samples (odd length, sum equal to ``width``)."""

    def cum(u):  # integral of the linear-interpolation hat function up to u
        u = np.clip(u, -1.0, 1.0)
        return np.where(u < 0, 0.5 * (u + 1.0) ** 2, 1.0 - 0.5 * (1.0 - u) ** 2)

    half = 0.5 * width
    r = int(math.ceil(half - 1e-9))
    j = np.arange(-r, r + 1, dtype=float)
    return cum(half - j) - cum(-half - j)


def moving_average(series: TimeSeries, window: float, channels: Sequence[str] | None = None) -> TimeSeries:
    """Centred sliding mean over exactly ``window`` seconds.

    The mean is taken over the piecewise-linear interpolant of the samples,
    so the window need not hold a whole number of samples and a sinusoid
    whose period equals the window averages to zero. The output is shorter by
    the kernel length minus one; its first sample sits at the centre of the
    first full window.
    """
    _window_samples(window, series.dt)
    width = window / series.dt
    kernel = _box_weights(width) / width
    names = list(channels) if channels is not None else list(series.channels)
    if len(series) < len(kernel):
        raise ParameterError(f"series of {len(series)} samples is shorter than the {len(kernel)}-sample window")
    out = {k: np.convolve(series.channels[k], kernel, mode="valid") for k in names}
    r = (len(kernel) - 1) // 2
    return TimeSeries(series.t0 + r * series.dt, series.dt, out,
                      {k: series.units.get(k, "") for k in names})


def rms(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.mean(x * x)))


def cycle_rms(series: TimeSeries, channel: str, frequency: float, window_end: float,
              cycles: int = 1) -> float:
    """RMS over the last ``cycles`` full periods ending at ``window_end``."""
    n = _window_samples(cycles / frequency, series.dt)
    end = int(math.floor((window_end - series.t0) / series.dt + 1e-9)) + 1
    if end - n < 0:
        raise ParameterError("window starts before the series")
    return rms(series.channels[channel][end - n:end])


def extract_phasor(series: TimeSeries, frequency: float, window_end: float,
                   channel: str | None = None) -> Phasor:
    """Single-frequency projection over the last full cycle before ``window_end``.

    Least squares on {cos, sin, 1} so that a non-integer number of samples per
    cycle and a dc offset do not bias the result. The angle is referred to
    ``cos(2 pi f t)`` on the absolute time axis.
    """
    if channel is None:
        if len(series.channels) != 1:
            raise ParameterError("channel name required for multi-channel series")
        channel = next(iter(series.channels))
    period = 1.0 / frequency
    n = _window_samples(period, series.dt)
    if period / series.dt < 16 * (1.0 - 1e-9):
        raise ParameterError("fewer than 16 samples per cycle")
    end = int(math.floor((window_end - series.t0) / series.dt + 1e-9)) + 1
    end = min(end, len(series))
    if end - n < 0:
        raise ParameterError("window shorter than one cycle")
    y = series.channels[channel][end - n:end]
    t = series.t0 + series.dt * np.arange(end - n, end)
    w = 2.0 * math.pi * frequency * t
    basis = np.column_stack([np.cos(w), np.sin(w), np.ones_like(w)])
    (ac, as_, _), *_ = np.linalg.lstsq(basis, y, rcond=None)
    # y = ac cos + as sin = Re{(ac - j as) e^{jw}}
    return Phasor.from_complex(complex(ac, -as_) / math.sqrt(2.0), frequency)


# --------------------------------------------------------------------------
# damped oscillation fitting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Model:
    names: tuple[str, ...]
    value: Callable
    jacobian: Callable
    fixed: Callable[[Mapping[str, float]], dict]


def _window_gain(z: np.ndarray | complex, width: float):
    """Mean of exp(z s) over [-width/2, width/2] and its derivative in z."""
    u = z * width / 2.0
    small = np.abs(u) < 1e-6
    u_safe = np.where(small, 1.0, u)
    k = np.where(small, 1.0 + u * u / 6.0, np.sinh(u_safe) / u_safe)
    dk = np.where(small, width / 2.0 * (u / 3.0),
                  width / 2.0 * (np.cosh(u_safe) / u_safe - np.sinh(u_safe) / (u_safe * u_safe)))
    return k, dk


def _sine_value(t, p, fixed):
    a, b, f = p
    z = complex(-b, 2.0 * math.pi * f)
    width = fixed.get("window", 0.0)
    k = _window_gain(z, width)[0] if width > 0 else 1.0
    return a * np.imag(k * np.exp(z * t))


def _sine_jac(t, p, fixed):
    a, b, f = p
    z = complex(-b, 2.0 * math.pi * f)
    width = fixed.get("window", 0.0)
    if width > 0:
        k, dk = _window_gain(z, width)
    else:
        k, dk = 1.0, 0.0
    e = np.exp(z * t)
    dz = (t * k + dk) * e
    return np.column_stack([np.imag(k * e), a * np.imag(-dz), a * np.imag(2j * math.pi * dz)])


def _ripple_value(t, p, fixed):
    a, b, c, f = p
    return a * np.exp(-b * t) * (1.0 + c * np.sin(2.0 * math.pi * f * t)) + fixed.get("offset", 0.0)


def _ripple_jac(t, p, fixed):
    a, b, c, f = p
    e = np.exp(-b * t)
    s = np.sin(2.0 * math.pi * f * t)
    g = 1.0 + c * s
    return np.column_stack([
        e * g,
        -t * a * e * g,
        a * e * s,
        a * e * c * 2.0 * math.pi * t * np.cos(2.0 * math.pi * f * t),
    ])


MODELS: dict[str, _Model] = {
    # a exp(-b t) sin(2 pi f t), optionally seen through a centered moving average
    "sine": _Model(("a", "b", "f"), _sine_value, _sine_jac,
                  lambda c: {"window": c.get("window", 0.0)}),
    # a exp(-b t) (1 + c sin(2 pi f t)) + offset
    "ripple": _Model(("a", "b", "c", "f"), _ripple_value, _ripple_jac,
                  lambda c: {"offset": c.get("offset", 0.0)}),
}


def _zero_crossing_frequency(t: np.ndarray, y: np.ndarray) -> float:
    s = np.signbit(y)
    idx = np.flatnonzero(s[1:] != s[:-1])
    if len(idx) < 2:
        return 1.0 / max(t[-1] - t[0], 1e-12)
    # linear interpolation of crossing instants
    tc = t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])
    return (len(tc) - 1) / (2.0 * (tc[-1] - tc[0]))


def _envelope_decay(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Log-envelope regression on the local maxima of |y|; returns (amplitude, rate)."""
    ay = np.abs(y)
    if len(ay) < 3 or not np.any(ay > 0):
        return 0.0, 1.0
    peaks = np.flatnonzero((ay[1:-1] >= ay[:-2]) & (ay[1:-1] > ay[2:])) + 1
    peaks = peaks[ay[peaks] > 1e-3 * ay.max()]
    if len(peaks) < 2:
        k = int(np.argmax(ay))
        return float(ay[k]), 1.0 / max(t[-1] - t[0], 1e-12)
    slope, icpt = np.polyfit(t[peaks], np.log(ay[peaks]), 1)
    return float(math.exp(icpt)), float(max(-slope, 1e-3))


def initial_guess(t: np.ndarray, y: np.ndarray, model: str, offset: float = 0.0) -> np.ndarray:
    """Heuristic start point: decay from the log-envelope slope, frequency from
    zero crossings, amplitude from the first extremum."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if model == "sine":
        amp, rate = _envelope_decay(t, y)
        freq = _zero_crossing_frequency(t, y)
        k = int(np.argmax(np.abs(y[: max(3, len(y) // 4)])))
        # rescale the first extremum back to t = 0 and to the sign of sin at that point
        s = math.sin(2.0 * math.pi * freq * t[k])
        a0 = y[k] * math.exp(rate * t[k]) / s if abs(s) > 0.3 else math.copysign(amp, y[k])
        return np.array([a0, rate, freq])
    if model == "ripple":
        r = y - offset
        # non-oscillating part: linear regression of log|r| when it keeps one sign
        trend = np.convolve(r, np.ones(5) / 5, mode="same")
        sign = 1.0 if np.mean(r) >= 0 else -1.0
        good = sign * trend > 1e-9 * max(1.0, np.max(np.abs(r)))
        if good.sum() >= 3:
            slope, icpt = np.polyfit(t[good], np.log(sign * trend[good]), 1)
            a0, b0 = sign * math.exp(icpt), max(-slope, 1e-3)
        else:
            a0, b0 = r[0] if r[0] != 0 else 1.0, 1.0
        base = a0 * np.exp(-b0 * t)
        osc = r - base
        freq = _zero_crossing_frequency(t, osc)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(np.abs(base) > 0, osc / base, 0.0)
        c0 = float(np.sqrt(2.0) * np.std(ratio[np.isfinite(ratio)]))
        return np.array([a0, b0, c0, freq])
    raise ParameterError(f"unknown model {model!r}")


def fit_decaying_oscillation(t: np.ndarray, y: np.ndarray, model: str = "sine",
                             guess: Sequence[float] | None = None, *, offset: float = 0.0,
                             window: float = 0.0, t_origin: float = 0.0,
                             max_iter: int = 200, xtol: float = 1e-8) -> FitResult:
    """Levenberg-Marquardt fit of ``sine`` (a e^{-bt} sin 2 pi f t) or ``ripple``
    (a e^{-bt}(1 + c sin 2 pi f t) + offset) to samples ``y`` at times ``t``.

    ``t_origin`` is subtracted from ``t`` before evaluating the model. With
    ``window > 0`` the ``sine`` model is compared after the same centered
    moving average that produced ``y``, so the returned coefficients describe
    the unfiltered signal. ``offset`` is held fixed for ``ripple``.
    """
    model_def = MODELS[model]
    t = np.asarray(t, dtype=float) - t_origin
    y = np.asarray(y, dtype=float)
    n_par = len(model_def.names)
    if len(y) < 5 * n_par:
        raise ParameterError(f"need at least {5 * n_par} samples, got {len(y)}")
    fixed = {"offset": offset, "window": window}

    if model == "ripple" and not np.any(y - offset):
        return FitResult(model, {"a": 0.0, "b": 0.0, "c": 0.0, "f": 0.0, "offset": offset},
                         0.0, True, 0, t_origin)
    if model == "sine" and not np.any(y):
        return FitResult(model, {"a": 0.0, "b": 0.0, "f": 0.0, "window": window}, 0.0, True, 0, t_origin)

    p = np.array(guess if guess is not None else initial_guess(t, y, model, offset), dtype=float)
    if p[1] <= 0:
        raise ParameterError("initial decay guess must be positive")

    def residual(q):
        return model_def.value(t, q, fixed) - y

    r = residual(p)
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = model_def.jacobian(t, p, fixed)
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag[diag <= 0] = 1.0
        improved = False
        while lam < 1e16:
            try:
                step = -np.linalg.solve(A + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            trial[1] = max(trial[1], 0.0)
            rt = residual(trial)
            ct = float(rt @ rt)
            if np.isfinite(ct) and ct <= cost:
                lam = max(lam / 10.0, 1e-12)
                improved = True
                break
            lam *= 10.0
        if not improved:
            converged = True  # no descent direction left: stationary point
            break
        small = np.all(np.abs(trial - p) <= xtol * (np.abs(trial) + xtol))
        p, r, cost = trial, rt, ct
        if small:
            converged = True
            break
    coeffs = dict(zip(model_def.names, map(float, p)))
    if model == "ripple":
        coeffs["offset"] = offset
    else:
        coeffs["window"] = window
    return FitResult(model, coeffs, float(math.sqrt(cost / len(y))), converged, it, t_origin)
