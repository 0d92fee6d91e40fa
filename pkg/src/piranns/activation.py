"""The localized activation tanh(x + 0.5) - tanh(x - 0.5) and its derivatives."""

from dataclasses import dataclass

import numpy as np

SHIFT = 0.5
MAX_ORDER = 3


def _tanh_derivative(t, order):
    # d^k/dy^k tanh(y) written in terms of t = tanh(y)
    if order == 0:
        return t
    s = 1.0 - t * t
    if order == 1:
        return s
    if order == 2:
        return -2.0 * t * s
    return s * (6.0 * t * t - 2.0)


def sigma(x, order=0, shift=SHIFT):
    """Evaluate the ``order``-th derivative of ``tanh(x + shift) - tanh(x - shift)``.

    Closed forms in terms of ``tanh`` are used for every order, so the result is
    exact up to rounding. ``x`` may be a scalar or an array.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError(f"derivative order must be in 0..{MAX_ORDER}, got {order!r}")
    x = np.asarray(x, dtype=float)
    tp = np.tanh(x + shift)
    tm = np.tanh(x - shift)
    return _tanh_derivative(tp, order) - _tanh_derivative(tm, order)


def sigma_stack(x, max_order=2, shift=SHIFT):
    """Return ``[sigma(x, 0), ..., sigma(x, max_order)]`` sharing the two tanh evaluations."""
    if not 0 <= max_order <= MAX_ORDER:
        raise ValueError(f"max_order must be in 0..{MAX_ORDER}, got {max_order!r}")
    x = np.asarray(x, dtype=float)
    tp = np.tanh(x + shift)
    tm = np.tanh(x - shift)
    return [_tanh_derivative(tp, k) - _tanh_derivative(tm, k) for k in range(max_order + 1)]


@dataclass(frozen=True)
class Activation:
    kind: str = "tanh-difference"
    shift: float = SHIFT

    def __post_init__(self):
        if self.kind != "tanh-difference":
            raise ValueError(f"unsupported activation kind {self.kind!r}")

    def eval(self, x, order=0):
        return sigma(x, order, self.shift)

    def stack(self, x, max_order=2):
        return sigma_stack(x, max_order, self.shift)


TANH_DIFF = Activation()
