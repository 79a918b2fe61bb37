"""Window samples and the discrete window transform.

The transform convention matches the estimator kernel::

    W(f) = (T/N) * sum_n w_n * exp(2j*pi*f*t_n),   t_n = n*T/N

so that the amplitude extracted at ``fv`` from a component at ``f`` is
weighted by ``W(fv - f)``.  The rectangular transform is evaluated with the
closed-form geometric sum (Dirichlet kernel), which is the same finite sum
written without the loop; the periodic Hann window is a three-term cosine
sum and reduces to three shifted rectangular transforms.
"""

from __future__ import annotations

import enum

import numpy as np

__all__ = [
    "WindowKind",
    "window_samples",
    "window_spectrum",
    "coherent_gain",
    "leakage_factor",
    "sinpi",
]


class WindowKind(str, enum.Enum):
    RECTANGULAR = "rect"
    HANN = "hann"

    @classmethod
    def parse(cls, value: "WindowKind | str") -> "WindowKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"rect": cls.RECTANGULAR, "rectangular": cls.RECTANGULAR,
                   "hann": cls.HANN, "hanning": cls.HANN}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown window kind {value!r}") from None


def window_samples(kind: WindowKind | str, n: int) -> np.ndarray:
    """Return the length-``n`` window.

    Hann uses the periodic (DFT-even) form ``0.5*(1 - cos(2*pi*k/n))`` so
    that its transform vanishes exactly at integer bin offsets ``|k| >= 2``.
    """
    kind = WindowKind.parse(kind)
    n = int(n)
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    if kind is WindowKind.RECTANGULAR:
        return np.ones(n)
    k = np.arange(n)
    k = np.abs(np.where(2 * k > n, k - n, k))  # w_k == w_{n-k} bit-for-bit
    # cos(pi*y) as sin(pi*(1/2 - y)) keeps quarter-period points exact
    return 0.5 * (1.0 - sinpi(0.5 - 2.0 * k / n))


def coherent_gain(kind: WindowKind | str, n: int) -> float:
    """Mean window value, ``sum(w)/n``."""
    kind = WindowKind.parse(kind)
    if kind is WindowKind.RECTANGULAR:
        return 1.0
    return float(np.sum(window_samples(kind, n))) / n


def sinpi(x):
    """``sin(pi*x)`` with exact argument reduction, so integers give 0."""
    x = np.asarray(x, dtype=float)
    r = x - 2.0 * np.round(0.5 * x)  # [-1, 1]
    r = np.where(r > 0.5, 1.0 - r, np.where(r < -0.5, -1.0 - r, r))
    return np.sin(np.pi * r)


def _rect_spectrum(fT: np.ndarray, n: int, T: float) -> np.ndarray:
    num = sinpi(fT)
    den = sinpi(fT / n)
    phase = np.exp(1j * np.pi * fT * (n - 1) / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (T / n) * (num / den) * phase
    # aliases of DC (fT/n integer): every term of the sum is 1
    return np.where(den == 0.0, complex(T), out)


def window_spectrum(kind: WindowKind | str, T: float, n: int, f) -> np.ndarray | complex:
    """Discrete-time transform of the window at frequency ``f`` (Hz).

    Parameters
    ----------
    kind : WindowKind
    T : float
        Record length in seconds; the sample interval is ``T/n``.
    n : int
        Number of samples.
    f : float or array_like
        Frequency in Hz.

    Returns
    -------
    complex or ndarray of complex
    """
    kind = WindowKind.parse(kind)
    if T <= 0:
        raise ValueError("T must be positive")
    if n < 2:
        raise ValueError("n must be >= 2")
    scalar = np.isscalar(f)
    fT = np.asarray(f, dtype=float) * T
    if kind is WindowKind.RECTANGULAR:
        out = _rect_spectrum(fT, n, T)
    else:
        out = (0.5 * _rect_spectrum(fT, n, T)
               - 0.25 * _rect_spectrum(fT - 1.0, n, T)
               - 0.25 * _rect_spectrum(fT + 1.0, n, T))
    return complex(out) if scalar else out


def leakage_factor(kind: WindowKind | str, filt, fv: float, f, T: float, n: int):
    """Leakage weight ``|W(fv - f) F(f)| / W(0)``.

    ``W(0) = T * coherent_gain``, which equals ``T`` for the rectangular
    window and restores unit gain at ``f = fv`` for any other window.
    ``filt`` is ``None`` or anything exposing ``response(f)``; the filter
    gain is taken relative to its gain at ``fv``.
    """
    if fv <= 0:
        raise ValueError("fv must be positive")
    f_arr = np.asarray(f, dtype=float)
    w = np.abs(window_spectrum(kind, T, n, float(fv) - f_arr))
    w = w / (T * coherent_gain(kind, n))
    if filt is not None:
        w = w * np.abs(filt.response(np.abs(f_arr))) / abs(filt.response(float(fv)))
    return float(w) if np.ndim(w) == 0 else w
