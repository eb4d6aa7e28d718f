"""Generalized sine functions and volume-distortion coefficients.

This module implements the one-dimensional comparison machinery:

* generalized sine ``sin_kappa``: the unique solution of ``u'' + kappa u = 0``
  with ``u(0) = 0``, ``u'(0) = 1`` for a continuous coefficient
  ``kappa: [0, L] -> R``, together with its first positive zero ``pi_kappa``;
* the sigma distortion coefficient ``sigma^{(t)}(theta)``
  (``= sin_kappa(t theta) / sin_kappa(theta)`` inside the conjugate radius);
* the tau coefficient ``tau^{(t)} = t^{1/N} sigma^{(t)}(theta)^{1-1/N}`` with
  the curvature profile rescaled by ``1/(N-1)``;
* the explicit constants and right-hand side of the quantitative defect
  estimate comparing ``tau`` under a variable profile against the constant
  lower bound ``K``.

Numerical contract (fixed, deterministic):
  - classical RK4 with fixed step ``L / 4096`` for the sine ODE,
  - cubic Hermite interpolation between solver nodes (the solver stores u'),
  - sign-change scan + bisection to 1e-10 for first zeros,
  - composite Simpson on 512 panels for the defect-bound quadratures.

Infinities are explicit sentinels with the conventions of
:mod:`lorentz_synth.extreal` (0 * inf = 0, inf ** alpha = inf for alpha > 0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .extreal import INF, xmul, xpow

ODE_STEPS = 4096
SIMPSON_PANELS = 512
BISECT_TOL = 1e-10
# theta this close (relatively) to the computed first zero counts as conjugate
FIRST_ZERO_GUARD = 1e-9


# ---------------------------------------------------------------------------
# curvature profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KappaProfile:
    """Piecewise-linear curvature profile ``kappa: [0, L] -> R``.

    ``params`` are strictly increasing sample parameters with first value 0
    and last value ``length``; ``values`` are the corresponding curvatures
    (units 1/time^2). Evaluation interpolates linearly between samples.
    """

    length: float
    params: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        params = np.asarray(self.params, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "values", values)
        if not (self.length > 0.0 and math.isfinite(self.length)):
            raise InvalidInputError("profile length must be finite and positive")
        if params.ndim != 1 or params.shape != values.shape or len(params) < 2:
            raise InvalidInputError("profile needs matching 1-d params/values, >= 2 samples")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("non-finite curvature sample")
        if not np.all(np.diff(params) > 0.0):
            raise InvalidInputError("sample parameters must be strictly increasing")
        if abs(params[0]) > 1e-12 or abs(params[-1] - self.length) > 1e-12:
            raise InvalidInputError("samples must span exactly [0, length]")

    # profiles are value-objects: identity for caching is the sample data
    def _key(self) -> tuple:
        return (float(self.length), self.params.tobytes(), self.values.tobytes())

    def __hash__(self):
        return hash(self._key())

    def __eq__(self, other):
        return isinstance(other, KappaProfile) and self._key() == other._key()

    def __call__(self, theta):
        """Piecewise-linear evaluation; clamps to the end samples."""
        return np.interp(theta, self.params, self.values)

    @classmethod
    def constant(cls, kappa: float, length: float) -> "KappaProfile":
        return cls(length, np.array([0.0, length]), np.array([kappa, kappa], dtype=float))

    @classmethod
    def from_samples(cls, samples: Sequence[Sequence[float]], length: float | None = None) -> "KappaProfile":
        arr = np.asarray(samples, dtype=float)
        if length is None:
            length = float(arr[-1, 0])
        return cls(length, arr[:, 0].copy(), arr[:, 1].copy())

    def scaled(self, factor: float) -> "KappaProfile":
        """Profile with all curvature values multiplied by ``factor``."""
        return KappaProfile(self.length, self.params.copy(), self.values * factor)

    def reversed(self) -> "KappaProfile":
        """The time-reversed profile ``theta -> kappa(L - theta)``."""
        return KappaProfile(self.length, (self.length - self.params)[::-1].copy(),
                            self.values[::-1].copy())

    def restricted(self, x0: float, x1: float) -> "KappaProfile":
        """Restriction to ``[x0, x1]`` reparametrized to start at 0."""
        if not (0.0 - 1e-12 <= x0 < x1 <= self.length + 1e-12):
            raise InvalidInputError("restriction endpoints out of range")
        inside = self.params[(self.params > x0) & (self.params < x1)]
        xs = np.concatenate(([x0], inside, [x1]))
        return KappaProfile(x1 - x0, xs - x0, self(xs))

    def to_json(self) -> str:
        return json.dumps({"L": self.length,
                           "samples": [[float(p), float(v)] for p, v in zip(self.params, self.values)]})

    @classmethod
    def from_json(cls, text: str) -> "KappaProfile":
        data = json.loads(text)
        return cls.from_samples(data["samples"], length=float(data["L"]))


# ---------------------------------------------------------------------------
# generalized sine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneralizedSine:
    """Sampled solution of ``u'' + kappa u = 0``, ``u(0)=0``, ``u'(0)=1``.

    ``first_zero`` is the first positive zero of u on (0, L], or the +inf
    sentinel if u stays positive on the whole domain.
    """

    profile: KappaProfile
    thetas: np.ndarray
    values: np.ndarray
    derivative_values: np.ndarray
    first_zero: float

    def __call__(self, theta):
        """Cubic Hermite evaluation between solver nodes (O(h^4) accurate)."""
        return _hermite_eval(self.thetas, self.values, self.derivative_values, theta)


def _hermite_eval(xs: np.ndarray, ys: np.ndarray, dys: np.ndarray, x):
    x = np.asarray(x, dtype=float)
    h = xs[1] - xs[0]
    idx = np.clip(((x - xs[0]) / h).astype(int), 0, len(xs) - 2)
    s = (x - xs[idx]) / h
    y0, y1 = ys[idx], ys[idx + 1]
    d0, d1 = dys[idx] * h, dys[idx + 1] * h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    out = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
    return out if out.shape else float(out)


def _rk4_step(c0, ch, c1, h, u, d):
    """One classical RK4 step for u'' = -c u from state (u, u'); elementwise."""
    k1u = d
    k1d = -c0 * u
    k2u = d + 0.5 * h * k1d
    k2d = -ch * (u + 0.5 * h * k1u)
    k3u = d + 0.5 * h * k2d
    k3d = -ch * (u + 0.5 * h * k2u)
    k4u = d + h * k3d
    k4d = -c1 * (u + h * k3u)
    return (u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u),
            d + (h / 6.0) * (k1d + 2 * k2d + 2 * k3d + k4d))


def _rk4_scan_matrices(kappa_half: np.ndarray, h: float, n_steps: int):
    """Prefix products of the per-step RK4 transition matrices.

    The step map is linear in (u, u'), so its matrix columns are the step
    applied to the basis states; those are computed vectorized over all steps
    and composed with a doubling scan instead of a Python-level time loop.
    Returns the four entry arrays of P_k = M_k ... M_0 (length n_steps).
    """
    c0 = kappa_half[0:-1:2]
    ch = kappa_half[1::2]
    c1 = kappa_half[2::2]
    p00, p10 = _rk4_step(c0, ch, c1, h, 1.0, 0.0)
    p01, p11 = _rk4_step(c0, ch, c1, h, 0.0, 1.0)
    s = 1
    while s < n_steps:
        q00 = p00[s:] * p00[:-s] + p01[s:] * p10[:-s]
        q01 = p00[s:] * p01[:-s] + p01[s:] * p11[:-s]
        q10 = p10[s:] * p00[:-s] + p11[s:] * p10[:-s]
        q11 = p10[s:] * p01[:-s] + p11[s:] * p11[:-s]
        p00[s:], p01[s:], p10[s:], p11[s:] = q00, q01, q10, q11
        s *= 2
    return p00, p01, p10, p11


def _rk4_sine_scan(kappa_half: np.ndarray, h: float, n_steps: int):
    p00, p01, p10, p11 = _rk4_scan_matrices(kappa_half, h, n_steps)
    u = np.concatenate(([0.0], p01))
    du = np.concatenate(([1.0], p11))
    return u, du


def _rk4_sine(kappa_half: np.ndarray, h, n_steps: int):
    """RK4 for u'' + c(x) u = 0 given c sampled on the half-step grid.

    ``kappa_half`` has shape (..., 2*n_steps + 1): values at x_0, x_{1/2},
    x_1, ...; batched over the leading axes (``h`` may then be an array over
    those axes). Returns (u, du) of shape (..., n_steps + 1) with u(0) = 0,
    u'(0) = 1.
    """
    if kappa_half.ndim == 1:
        return _rk4_sine_scan(kappa_half, float(h), n_steps)
    lead = kappa_half.shape[:-1]
    h = np.broadcast_to(np.asarray(h, dtype=float), lead)
    u = np.zeros(lead + (n_steps + 1,))
    du = np.zeros(lead + (n_steps + 1,))
    du[..., 0] = 1.0
    uk = np.zeros(lead)
    dk = np.ones(lead)
    for i in range(n_steps):
        uk, dk = _rk4_step(kappa_half[..., 2 * i], kappa_half[..., 2 * i + 1],
                           kappa_half[..., 2 * i + 2], h, uk, dk)
        u[..., i + 1] = uk
        du[..., i + 1] = dk
    return u, du


@dataclass(frozen=True)
class FundamentalSystem:
    """Both fundamental solutions of u'' + kappa u = 0 on [0, L], sampled:
    u with (u, u')(0) = (0, 1) and w with (w, w')(0) = (1, 0). Their Wronskian
    is identically 1, which lets segment-restricted sines be recombined as
    w(x0) u(x) - u(x0) w(x) without re-solving per segment."""

    profile: KappaProfile
    thetas: np.ndarray
    u: np.ndarray
    du: np.ndarray
    w: np.ndarray
    dw: np.ndarray

    def eval_u(self, x):
        return _hermite_eval(self.thetas, self.u, self.du, x)

    def eval_w(self, x):
        return _hermite_eval(self.thetas, self.w, self.dw, x)


@lru_cache(maxsize=256)
def _fundamental_cached(profile: KappaProfile) -> FundamentalSystem:
    n = ODE_STEPS
    h = profile.length / n
    half_grid = np.linspace(0.0, profile.length, 2 * n + 1)
    p00, p01, p10, p11 = _rk4_scan_matrices(profile(half_grid), h, n)
    return FundamentalSystem(
        profile, half_grid[::2],
        np.concatenate(([0.0], p01)), np.concatenate(([1.0], p11)),
        np.concatenate(([1.0], p00)), np.concatenate(([0.0], p10)))


def sine_fundamental(profile: KappaProfile) -> FundamentalSystem:
    """Fundamental system for the sine ODE of ``profile`` (cached)."""
    return _fundamental_cached(profile)


@lru_cache(maxsize=512)
def _generalized_sine_cached(profile: KappaProfile) -> GeneralizedSine:
    n = ODE_STEPS
    h = profile.length / n
    half_grid = np.linspace(0.0, profile.length, 2 * n + 1)
    kap = profile(half_grid)
    u, du = _rk4_sine(kap, h, n)
    thetas = half_grid[::2]
    fz = _first_zero_from_samples(thetas, u, du)
    return GeneralizedSine(profile, thetas, u, du, fz)


def _first_zero_from_samples(thetas, u, du) -> float:
    sign_change = np.nonzero(u[1:-1] * u[2:] <= 0.0)[0]
    if len(sign_change) == 0:
        return INF
    i = sign_change[0] + 1
    if u[i + 1] == 0.0 and u[i] > 0.0:
        return float(thetas[i + 1])
    lo, hi = thetas[i], thetas[i + 1]
    flo = u[i]

    def f(x):
        return _hermite_eval(thetas, u, du, x)

    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if f(mid) * flo > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generalized_sine(profile: KappaProfile) -> GeneralizedSine:
    """Solve the generalized sine ODE for ``profile`` (cached, deterministic)."""
    return _generalized_sine_cached(profile)


def first_zero(profile: KappaProfile) -> float:
    """First positive zero of the generalized sine (+inf sentinel if none)."""
    return generalized_sine(profile).first_zero


# closed forms for constant curvature; used by model densities and the defect
# constants, and independently re-derived in the test oracles
def const_sine(kappa: float, theta):
    """Closed-form generalized sine for constant curvature."""
    theta = np.asarray(theta, dtype=float)
    if kappa > 0.0:
        rt = math.sqrt(kappa)
        out = np.sin(rt * theta) / rt
    elif kappa == 0.0:
        out = theta.copy()
    else:
        rt = math.sqrt(-kappa)
        out = np.sinh(rt * theta) / rt
    return out if out.shape else float(out)


def const_first_zero(kappa: float) -> float:
    """pi / sqrt(kappa) for positive constant curvature, +inf otherwise."""
    if kappa > 0.0:
        return math.pi / math.sqrt(kappa)
    return INF


# ---------------------------------------------------------------------------
# distortion coefficients
# ---------------------------------------------------------------------------


def sigma_coeff(profile: KappaProfile, t: float, theta: float) -> float:
    """sigma^{(t)}(theta): t at theta = 0, the sine ratio inside the conjugate
    radius, +inf sentinel at or past it."""
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError(f"t = {t} outside [0, 1]")
    if not 0.0 <= theta <= profile.length + 1e-12:
        raise InvalidInputError(f"theta = {theta} outside [0, {profile.length}]")
    if theta == 0.0:
        return float(t)
    sine = generalized_sine(profile)
    if theta >= sine.first_zero * (1.0 - FIRST_ZERO_GUARD):
        return INF
    return float(sine(t * theta) / sine(theta))


def tau_coeff(profile: KappaProfile, n_param: float, t: float, theta: float) -> float:
    """tau^{(t)}(theta) = t^{1/N} sigma^{(t)}(theta)^{1 - 1/N} with the profile
    rescaled by 1/(N-1); follows the 0 * inf = 0 convention."""
    if n_param <= 1.0:
        raise InvalidInputError("dimension parameter must exceed 1")
    sig = sigma_coeff(profile.scaled(1.0 / (n_param - 1.0)), t, theta)
    return xmul(math.pow(t, 1.0 / n_param), xpow(sig, 1.0 - 1.0 / n_param))


def ttilde_coeff(K: float, n_param: float, theta: float) -> float:
    """Model coefficient for the wave-operator comparison: the t-derivative at
    t = 1 of the constant-curvature tau coefficient.

    Closed form: 1/N + (theta/N) sqrt(K(N-1)) cot(theta sqrt(K/(N-1))) for
    K > 0, the coth analogue for K < 0, and 1 for K = 0; the removable
    singularity at theta = 0 is patched with its limit 1.
    """
    if n_param <= 1.0:
        raise InvalidInputError("dimension parameter must exceed 1")
    if theta == 0.0:
        return 1.0
    N = n_param
    if K > 0.0:
        z = theta * math.sqrt(K / (N - 1.0))
        if z >= math.pi:
            raise InvalidInputError("theta at or past the conjugate radius")
        return 1.0 / N + (theta / N) * math.sqrt(K * (N - 1.0)) / math.tan(z)
    if K == 0.0:
        return 1.0
    z = theta * math.sqrt(-K / (N - 1.0))
    return 1.0 / N + (theta / N) * math.sqrt(-K * (N - 1.0)) / math.tanh(z)


# ---------------------------------------------------------------------------
# defect estimate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DefectConstants:
    """The four explicit constants entering the defect estimate."""

    c_np: float
    d_const: float
    omega: float
    lam: float
    params: tuple = field(default=())

    def __post_init__(self):
        if self.params and self.params[0] <= 0.0 and self.lam != 1.0:
            raise InvalidInputError("lambda must be 1 for nonpositive K")


def defect_constants(K: float, n_param: float, p: float, eta: float) -> DefectConstants:
    """Evaluate the defect-estimate constants for parameters (K, N, p, eta).

    Preconditions: N >= 2, p > N/2, and for K > 0 the shift eta must lie in
    (0, pi_{K/(N-1)} / 2); for K <= 0 the eta constraint is vacuous (the
    conjugate radius is infinite) but eta must still be positive.
    """
    N = n_param
    if N < 2.0:
        raise InvalidInputError("need N >= 2")
    if p <= N / 2.0:
        raise InvalidInputError("need p > N/2")
    if eta <= 0.0:
        raise InvalidInputError("need eta > 0")
    c_np = math.pow(2.0 * p - 1.0, p) * math.pow((N - 1.0) / (2.0 * p - N), p - 1.0)
    if K > 0.0:
        kt = K / (N - 1.0)
        pi_b = math.pi / math.sqrt(kt)
        if eta >= pi_b / 2.0:
            raise InvalidInputError("eta must be below half the conjugate radius")
        # maximize sin^{1-N} over [pi_b/2, pi_b - eta] on a fine grid
        rr = np.linspace(pi_b / 2.0, pi_b - eta, 4097)
        svals = np.sin(math.sqrt(kt) * rr) / math.sqrt(kt)
        d_const = 1.0 + float(np.max(svals ** (1.0 - N)))
        s_eta = math.sin(math.sqrt(kt) * eta) / math.sqrt(kt)
        omega = max(c_np, math.pow(s_eta, N + 1.0 - 4.0 * p))
        lam = d_const
    else:
        d_const = 1.0
        omega = c_np
        lam = 1.0
    return DefectConstants(c_np, d_const, omega, lam, params=(K, N, p, eta))


def simpson_uniform(y: np.ndarray, a: float, b: float) -> float:
    """Composite Simpson on a uniform grid with an even panel count."""
    n = len(y) - 1
    if n % 2 != 0:
        raise InvalidInputError("Simpson needs an even number of panels")
    h = (b - a) / n
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * np.sum(y[1:-1:2]) + 2.0 * np.sum(y[2:-1:2])))


def _sigma_profile_values(profile: KappaProfile, theta: float, r_nodes: np.ndarray):
    """sigma^{(r)}(theta) for all r in r_nodes from one sine solve on [0, theta].

    Returns None when theta reaches the profile's conjugate radius (the
    coefficient is the +inf sentinel there).
    """
    sub = profile.restricted(0.0, theta) if theta < profile.length else profile
    sine = generalized_sine(sub)
    if theta >= sine.first_zero * (1.0 - FIRST_ZERO_GUARD):
        return None
    denom = sine(theta)
    if denom <= 0.0:
        return None
    return sine(r_nodes * theta) / denom


def defect_bound(K: float, n_param: float, p: float, eta: float,
                 profile: KappaProfile, t: float, theta: float) -> float:
    """Right-hand side of the defect estimate for tau coefficients.

    Bounds tau_{K}^{(t)}(theta) - tau_{profile}^{(t)}(theta) by the product of
    the constant factor (Lambda Omega^{1/(2p-1)})^{1/N}, an L^N mean of tau
    over [t, 1], and a weighted integral of the negative part (kappa - K)_-.
    Both integrals use composite Simpson on 512 panels. Returns +inf when the
    variable profile reaches a conjugate point at theta (legal: the estimate
    is void there). The result is nonnegative.
    """
    N = n_param
    consts = defect_constants(K, N, p, eta)
    pi_b = const_first_zero(K / (N - 1.0))
    if not 0.0 < t < 1.0:
        raise InvalidInputError("t must lie strictly inside (0, 1)")
    theta_max = min(profile.length, pi_b - eta)
    if not 0.0 < theta < theta_max:
        raise InvalidInputError(f"theta must lie strictly inside (0, {theta_max})")

    scaled = profile.scaled(1.0 / (N - 1.0))
    r_full = np.linspace(0.0, 1.0, 2 * SIMPSON_PANELS + 1)
    sig = _sigma_profile_values(scaled, theta, r_full)
    if sig is None:
        return INF

    # \int_t^1 tau^{(r)}(theta)^N dr  with  tau^N = r sigma^{N-1}
    r_tail = np.linspace(t, 1.0, SIMPSON_PANELS + 1)
    sig_tail = _sigma_profile_values(scaled, theta, r_tail)
    tau_pow_n = r_tail * sig_tail ** (N - 1.0)
    int_tau = simpson_uniform(tau_pow_n, t, 1.0)

    # \int_0^1 (kappa(r theta) - K)_-  sigma^{(r)}(theta)^{N-1} dr
    neg_part = np.maximum(K - profile(r_full * theta), 0.0)
    int_neg = simpson_uniform(neg_part * sig ** (N - 1.0), 0.0, 1.0)

    lead = math.pow(consts.lam * math.pow(consts.omega, 1.0 / (2.0 * p - 1.0)), 1.0 / N)
    mid = math.pow(int_tau, 2.0 * (p - 1.0) / (N * (2.0 * p - 1.0)))
    tail = math.pow(t * theta ** (2.0 * p) * int_neg, 1.0 / (N * (2.0 * p - 1.0)))
    return lead * mid * tail
