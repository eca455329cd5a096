"""Discrete estimators of stochastic integrals and brackets on a uniform grid.

Given series sampled at grid times ``t_0 < ... < t_M``, this module estimates

* the Ito integral (left-point Riemann sum),
* the forward and backward integrals and the covariation bracket, defined as
  epsilon-averaged limits with ``epsilon = c*h`` and the integrand series
  extended constantly beyond the grid ends,
* the Stratonovich integral (midpoint sum), and
* the Tanaka residuals that estimate local time at zero.

At the canonical ``c = 1`` the epsilon-averaged forms collapse to classical
Riemann sums with exact algebraic relationships::

    forward  == ito                      (left-point sum)
    backward - forward == covariation    (summation by parts)
    stratonovich == ito + covariation/2  (midpoint identity)
    backward(Y, X) over [0,T] == -forward(reversed Y, reversed X)

These identities hold to round-off and are asserted where cheap; larger
``c`` is supported only for studying the epsilon-limits empirically.

All functions accept arrays with time along the last axis and broadcast over
any leading axes (e.g. ``(paths, M+1)``), returning running series of the
same length that start at 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError

__all__ = [
    "IntegralResult",
    "sgn_series",
    "ito_integral",
    "forward_integral",
    "backward_integral",
    "covariation",
    "stratonovich_integral",
    "local_time_residual",
]

# Relative round-off budget for the midpoint identity self-check.
_IDENTITY_RTOL = 1e-10


@dataclass(frozen=True)
class IntegralResult:
    """Running value series of a discrete integral estimator.

    ``values`` has the same length as the input series (time last axis) and
    starts at 0. ``scheme`` tags the estimator; ``eps_steps`` is the window
    width ``c`` in grid steps, so the averaging scale is ``eps = c * h``.
    """

    values: np.ndarray
    scheme: str
    eps_steps: int = 1

    @property
    def endpoint(self) -> np.ndarray:
        return self.values[..., -1]


def _check_pair(Y: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Y = np.asarray(Y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if Y.shape != X.shape:
        raise ValidationError(f"series shapes differ: {Y.shape} vs {X.shape}")
    if X.shape[-1] < 2:
        raise ValidationError("series must have at least two grid points")
    return Y, X


def _running(terms: np.ndarray) -> np.ndarray:
    """Prefix sums with a leading zero so value[0] = 0."""
    out = np.empty(terms.shape[:-1] + (terms.shape[-1] + 1,), dtype=np.float64)
    out[..., 0] = 0.0
    np.cumsum(terms, axis=-1, out=out[..., 1:])
    return out


def sgn_series(x: np.ndarray) -> np.ndarray:
    """Sign with the convention sgn(x) = +1 for x > 0 and -1 for x <= 0."""
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValidationError("sgn_series input must be finite")
    return np.where(x > 0.0, 1.0, -1.0)


def ito_integral(Y: np.ndarray, X: np.ndarray) -> IntegralResult:
    """Left-point Riemann sum: value[m] = sum_{j<m} Y[j] * (X[j+1] - X[j])."""
    Y, X = _check_pair(Y, X)
    terms = Y[..., :-1] * np.diff(X, axis=-1)
    return IntegralResult(values=_running(terms), scheme="ito")


def _extend_forward(X: np.ndarray, c: int) -> np.ndarray:
    """X shifted forward by c steps with constant extension past t_M."""
    tail = np.repeat(X[..., -1:], c, axis=-1)
    return np.concatenate([X[..., c:], tail], axis=-1)


def _extend_backward(X: np.ndarray, c: int) -> np.ndarray:
    """X shifted backward by c steps with constant extension before t_0."""
    head = np.repeat(X[..., :1], c, axis=-1)
    return np.concatenate([head, X[..., :-c]], axis=-1)


def _check_window(c: int) -> int:
    if int(c) != c or c < 1:
        raise ValidationError(f"window width must be an integer >= 1, got {c}")
    return int(c)


def forward_integral(Y: np.ndarray, X: np.ndarray, eps_steps: int = 1) -> IntegralResult:
    """Forward integral estimate at averaging scale ``eps = eps_steps * h``.

    Discretizes (1/eps) * integral of Y(s) * (X(s+eps) - X(s)) ds by the
    left-point rule in s; at ``eps_steps = 1`` it reduces exactly to the Ito
    sum. The per-step scale ``h`` cancels against the 1/eps prefactor, so
    values depend on the window width in steps only.
    """
    c = _check_window(eps_steps)
    Y, X = _check_pair(Y, X)
    fwd = _extend_forward(X, c) - X
    terms = Y[..., :-1] * fwd[..., :-1] / c
    return IntegralResult(values=_running(terms), scheme="forward", eps_steps=c)


def backward_integral(Y: np.ndarray, X: np.ndarray, eps_steps: int = 1) -> IntegralResult:
    """Backward integral estimate, the mirror of :func:`forward_integral`.

    Discretizes (1/eps) * integral of Y(s) * (X(s) - X(s-eps)) ds by the
    right-point rule in s, consistent with the constant extension of X before
    t_0. At ``eps_steps = 1``: value[m] = sum_{j<m} Y[j+1] * (X[j+1] - X[j]).
    """
    c = _check_window(eps_steps)
    Y, X = _check_pair(Y, X)
    bwd = X - _extend_backward(X, c)
    terms = Y[..., 1:] * bwd[..., 1:] / c
    return IntegralResult(values=_running(terms), scheme="backward", eps_steps=c)


def covariation(X: np.ndarray, Y: np.ndarray, eps_steps: int = 1) -> IntegralResult:
    """Covariation bracket estimate [X, Y] at scale ``eps = eps_steps * h``.

    Discretizes (1/eps) * integral of (X(s+eps) - X(s)) * (Y(s+eps) - Y(s)) ds;
    at ``eps_steps = 1`` this is the realized covariation sum of increment
    products. The self-bracket [X, X] is non-decreasing by construction.
    """
    c = _check_window(eps_steps)
    X, Y = _check_pair(X, Y)
    fx = _extend_forward(X, c) - X
    fy = _extend_forward(Y, c) - Y
    terms = fx[..., :-1] * fy[..., :-1] / c
    return IntegralResult(values=_running(terms), scheme="covariation", eps_steps=c)


def stratonovich_integral(Y: np.ndarray, X: np.ndarray) -> IntegralResult:
    """Midpoint sum: value[m] = sum_{j<m} (Y[j] + Y[j+1])/2 * (X[j+1] - X[j]).

    Algebraically identical to ito + covariation/2 at the grid scale; the two
    forms are computed and checked against each other to a round-off budget,
    since every exactness claim downstream leans on this identity.
    """
    Y, X = _check_pair(Y, X)
    dX = np.diff(X, axis=-1)
    terms = 0.5 * (Y[..., :-1] + Y[..., 1:]) * dX
    values = _running(terms)

    alt = _running(Y[..., :-1] * dX + 0.5 * np.diff(Y, axis=-1) * dX)
    scale = max(1.0, float(np.max(np.abs(values))))
    err = float(np.max(np.abs(values - alt)))
    if err > _IDENTITY_RTOL * scale:
        raise NumericalError(
            f"midpoint sum deviates from ito + covariation/2 by {err:.3e} "
            f"(budget {_IDENTITY_RTOL * scale:.3e})"
        )
    return IntegralResult(values=values, scheme="stratonovich")


def local_time_residual(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tanaka residuals of a series, in both sign conventions.

    Returns ``(lam, l_std)`` where, with I(t) the Ito sum of sgn(X) against X,

    * ``lam[m] = (I[m] - |X[m]| + |X[0]|) / 2`` solves
      ``I = |X(t)| - |X(0)| + 2*lam``, and
    * ``l_std[m] = |X[m]| - |X[0]| - I[m] = -2 * lam[m]`` is the usual
      non-negative local-time estimate at zero.

    On Brownian paths ``l_std`` is the one that converges to the (positive)
    local time; ``lam`` then comes out non-positive. Both are returned so the
    sign convention is an observable, not a guess.
    """
    X = np.asarray(X, dtype=np.float64)
    ito = ito_integral(sgn_series(X), X).values
    abs_change = np.abs(X) - np.abs(X[..., :1])
    lam = 0.5 * (ito - abs_change)
    l_std = abs_change - ito
    return lam, l_std
