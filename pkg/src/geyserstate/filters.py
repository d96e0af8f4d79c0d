"""Two-stage denoising: Butterworth high-pass, then AR prediction-error filtering.

Stage 1 removes slow environmental trends with a causal high-pass built from
the analog Butterworth prototype: prototype poles are mapped low-pass to
high-pass, pre-warped, and discretized with the bilinear transform into
second-order sections.  Stage 2 fits an AR(p) model by ordinary least squares
on a quiet segment of the stage-1 output and subtracts its one-step
predictions from the whole series; whatever the model cannot predict
(transients) survives, while stationary ambient noise collapses toward the
innovation floor.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigError, DataError, NumericError
from .timeseries import TimeSeries

SUPPORTED_ORDERS = (2, 4, 6, 8)

# Matches the advertised least-squares contract: the normal-equation residual
# of the OLS solve must be at most this, relative to the right-hand side.
OLS_RESIDUAL_TOL = 1e-8

_POLE_MARGIN = 1e-9


@dataclass(frozen=True)
class FilterCascade:
    """High-pass filter as a cascade of second-order sections.

    Each section is (b0, b1, b2, a1, a2) with the denominator normalized to
    a0 = 1.  Construction verifies stability (all poles strictly inside the
    unit circle) and the high-pass DC null.
    """

    sections: tuple[tuple[float, float, float, float, float], ...]
    order: int
    corner_hz: float
    fs_hz: float

    def __post_init__(self) -> None:
        if len(self.sections) != self.order // 2:
            raise ConfigError(
                f"order {self.order} needs {self.order // 2} sections, got {len(self.sections)}"
            )
        for b0, b1, b2, a1, a2 in self.sections:
            poles = np.roots([1.0, a1, a2])
            if np.max(np.abs(poles)) >= 1.0 - _POLE_MARGIN:
                raise NumericError(f"unstable section: pole magnitude {np.max(np.abs(poles))}")
        if abs(self.gain_at(0.0)) >= 1e-8:
            raise NumericError("high-pass cascade must have a DC null")

    def response_at(self, f_hz: float) -> complex:
        """Complex gain at f_hz, evaluated section by section."""
        zinv = cmath.exp(-2j * math.pi * f_hz / self.fs_hz)
        h = complex(1.0)
        for b0, b1, b2, a1, a2 in self.sections:
            h *= (b0 + (b1 + b2 * zinv) * zinv) / (1.0 + (a1 + a2 * zinv) * zinv)
        return h

    def gain_at(self, f_hz: float) -> float:
        return abs(self.response_at(f_hz))


@dataclass(frozen=True)
class ArModel:
    """AR(p) model x_t = c + sum_i alpha_i x_{t-i} + e_t with Var(e) = sigma2."""

    order_p: int
    intercept_c: float
    coeffs_alpha: np.ndarray
    sigma2: float
    n_train: int = 0
    aic: float | None = None

    def __post_init__(self) -> None:
        alpha = np.asarray(self.coeffs_alpha, dtype=np.float64)
        object.__setattr__(self, "coeffs_alpha", alpha)
        if self.order_p < 1 or alpha.size != self.order_p:
            raise ConfigError(f"need order_p >= 1 matching {alpha.size} coefficients")
        if not (np.all(np.isfinite(alpha)) and math.isfinite(self.intercept_c)):
            raise NumericError("non-finite AR coefficients")
        if not (math.isfinite(self.sigma2) and self.sigma2 >= 0):
            raise NumericError(f"sigma2 must be finite and >= 0, got {self.sigma2}")


def design_butterworth_highpass(order: int, corner_hz: float, fs_hz: float) -> FilterCascade:
    """Discrete Butterworth high-pass via bilinear transform with pre-warping.

    The -3 dB point lands exactly on corner_hz because the analog corner is
    pre-warped before discretization.
    """
    if order not in SUPPORTED_ORDERS:
        raise ConfigError(f"unsupported order {order}; choose one of {SUPPORTED_ORDERS}")
    if not 0 < corner_hz < fs_hz / 2:
        raise ConfigError(
            f"corner {corner_hz} Hz must lie strictly between 0 and Nyquist {fs_hz / 2} Hz"
        )
    warped = 2.0 * fs_hz * math.tan(math.pi * corner_hz / fs_hz)
    k = 2.0 * fs_hz
    sections = []
    for i in range(order // 2):
        # Analog prototype pole (upper half-plane member of the conjugate pair).
        theta = math.pi * (2 * i + order + 1) / (2 * order)
        p_lp = complex(math.cos(theta), math.sin(theta))
        p_hp = warped / p_lp
        # Analog section s^2 / (s^2 + c1 s + c0), then bilinear s -> k (z-1)/(z+1).
        c1 = -2.0 * p_hp.real
        c0 = abs(p_hp) ** 2
        d0 = k * k + c1 * k + c0
        b0 = k * k / d0
        b1 = -2.0 * b0  # exact doubling keeps the DC null exact
        a1 = (2.0 * c0 - 2.0 * k * k) / d0
        a2 = (k * k - c1 * k + c0) / d0
        sections.append((b0, b1, b0, a1, a2))
    return FilterCascade(tuple(sections), order, corner_hz, fs_hz)


def apply_filter(cascade: FilterCascade, ts: TimeSeries) -> TimeSeries:
    """Causal filtering through each section in sequence, zero initial state."""
    if abs(ts.fs_hz - cascade.fs_hz) > 1e-9:
        raise DataError(
            f"series sampled at {ts.fs_hz} Hz but filter designed for {cascade.fs_hz} Hz"
        )
    values = ts.values.tolist()
    for b0, b1, b2, a1, a2 in cascade.sections:
        out = [0.0] * len(values)
        s1 = 0.0
        s2 = 0.0
        for i, x in enumerate(values):
            y = b0 * x + s1
            s1 = b1 * x - a1 * y + s2
            s2 = b2 * x - a2 * y
            out[i] = y
        values = out
    return ts.with_values(np.asarray(values))


def fit_ar(ts: TimeSeries, max_order: int = 64, criterion: str = "aic") -> ArModel:
    """OLS fit of an AR(p) model, order chosen by AIC over 1..max_order.

    Each candidate p regresses x_t on [1, x_{t-1}, ..., x_{t-p}] over
    t = p+1..n via QR factorization and scores
    AIC(p) = (n-p) * ln(RSS / (n-p)) + 2 (p+1).
    criterion="fixed" skips the search and fits exactly p = max_order.
    """
    if criterion not in ("aic", "fixed"):
        raise ConfigError(f"criterion must be 'aic' or 'fixed', got {criterion!r}")
    if max_order < 1:
        raise ConfigError(f"max_order must be >= 1, got {max_order}")
    n = len(ts)
    if n <= max_order + 10:
        raise DataError(f"series of {n} samples too short for max_order {max_order}")
    x = ts.values
    candidates = range(1, max_order + 1) if criterion == "aic" else (max_order,)
    best: tuple[float, int, np.ndarray, float] | None = None
    for p in candidates:
        beta, rss = _ols_ar(x, p)
        n_eff = n - p
        aic = n_eff * math.log(max(rss / n_eff, 1e-300)) + 2.0 * (p + 1)
        if best is None or aic < best[0]:
            best = (aic, p, beta, rss)
    aic, p, beta, rss = best
    return ArModel(
        order_p=p,
        intercept_c=float(beta[0]),
        coeffs_alpha=beta[1:],
        sigma2=float(rss / (n - p)),
        n_train=n,
        aic=float(aic),
    )


def _ols_ar(x: np.ndarray, p: int) -> tuple[np.ndarray, float]:
    """Least squares for one AR order; returns (beta with intercept first, RSS)."""
    n = x.size
    y = x[p:]
    a = np.empty((n - p, p + 1))
    a[:, 0] = 1.0
    for i in range(1, p + 1):
        a[:, i] = x[p - i : n - i]
    q, r = np.linalg.qr(a)
    diag = np.abs(np.diag(r))
    if diag.min() <= max(n, p + 1) * np.finfo(np.float64).eps * max(diag.max(), 1.0):
        raise NumericError("degenerate signal: AR design matrix is rank deficient")
    beta = solve_triangular(r, q.T @ y)
    resid = y - a @ beta
    check = np.linalg.norm(a.T @ resid)
    scale = max(np.linalg.norm(a.T @ y), 1e-300)
    if check / scale > OLS_RESIDUAL_TOL:
        raise NumericError(
            f"least-squares solve failed: relative normal-equation residual {check / scale:.3e}"
        )
    return beta, float(resid @ resid)


def ar_predict_one_step(model: ArModel, ts: TimeSeries) -> TimeSeries:
    """One-step predictions from observed lags; the first p outputs just copy
    the input (no history exists for them yet)."""
    p = model.order_p
    n = len(ts)
    if n <= p:
        raise DataError(f"series of {n} samples shorter than AR order {p}")
    x = ts.values
    pred = np.empty(n)
    pred[:p] = x[:p]
    acc = np.full(n - p, model.intercept_c)
    for i in range(1, p + 1):
        acc += model.coeffs_alpha[i - 1] * x[p - i : n - i]
    pred[p:] = acc
    return ts.with_values(pred)


def pef(x_h: TimeSeries, model: ArModel) -> TimeSeries:
    """Prediction-error filter: input minus its one-step prediction.

    The first p samples are emitted as exact zeros so every series in the
    pipeline stays index-aligned.
    """
    pred = ar_predict_one_step(model, x_h)
    out = x_h.values - pred.values
    out[: model.order_p] = 0.0
    return x_h.with_values(out)


def r2_score(actual: TimeSeries, predicted: TimeSeries) -> float:
    """Coefficient of determination 1 - RSS/TSS of predicted against actual."""
    if len(actual) != len(predicted):
        raise DataError(f"length mismatch: {len(actual)} vs {len(predicted)}")
    if len(actual) < 2:
        raise DataError("need at least 2 samples")
    a = actual.values
    p = predicted.values
    tss = float(np.sum((a - a.mean()) ** 2))
    if tss <= 0.0:
        raise NumericError("actual series has zero variance")
    return 1.0 - float(np.sum((a - p) ** 2)) / tss


def save_ar_model(model: ArModel, path: str, header_comments: list[str] | None = None) -> None:
    """Persist as key=value text; floats carry 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        for comment in header_comments or []:
            fh.write(f"# {comment}\n")
        fh.write(f"p={model.order_p}\n")
        fh.write(f"c={model.intercept_c:.17g}\n")
        fh.write("alpha=" + ",".join(f"{v:.17g}" for v in model.coeffs_alpha) + "\n")
        fh.write(f"sigma2={model.sigma2:.17g}\n")


def load_ar_model(path: str) -> ArModel:
    fields: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    try:
        return ArModel(
            order_p=int(fields["p"]),
            intercept_c=float(fields["c"]),
            coeffs_alpha=np.array([float(v) for v in fields["alpha"].split(",")]),
            sigma2=float(fields["sigma2"]),
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"malformed AR model file {path}: {exc}") from None


def save_cascade(cascade: FilterCascade, path: str) -> None:
    """One section per line, six coefficients (a0 = 1); design metadata in comments."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# order={cascade.order} corner_hz={cascade.corner_hz!r} fs_hz={cascade.fs_hz!r}\n")
        for b0, b1, b2, a1, a2 in cascade.sections:
            fh.write(f"{b0:.17g} {b1:.17g} {b2:.17g} 1 {a1:.17g} {a2:.17g}\n")


def load_cascade(path: str) -> FilterCascade:
    sections = []
    meta: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    if value:
                        meta[key] = float(value)
                continue
            parts = [float(v) for v in line.split()]
            if len(parts) != 6 or parts[3] != 1.0:
                raise DataError(f"malformed section line in {path}: {line!r}")
            b0, b1, b2, _, a1, a2 = parts
            sections.append((b0, b1, b2, a1, a2))
    if not sections or "order" not in meta or "corner_hz" not in meta or "fs_hz" not in meta:
        raise DataError(f"malformed cascade file {path}")
    return FilterCascade(tuple(sections), int(meta["order"]), meta["corner_hz"], meta["fs_hz"])
