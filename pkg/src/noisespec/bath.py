"""Bosonic-bath spectral densities, correlation functions and decompositions.

Units: hbar = 1 and all frequencies/energies are dimensionless multiples of
the TLS transition frequency omega0 = 1.

Two spectral-density families are supported:

* :class:`OhmicFamily`  J(w) = eta * wc**(1-s) * w**s * exp(-w/wc)
* :class:`LorentzDrude` J(w) = 2*gamma*wc*w / (w**2 + wc**2)

The bath autocorrelation function is the one-sided transform

    C(t) = int_0^inf J(w) [cos(w t) coth(w/(2 kT)) - i sin(w t)] dw,

evaluated here by adaptive Gauss-Kronrod quadrature.  The Lorentz-Drude
correlation also has an exact exponential decomposition (one pole term plus
thermal Matsubara terms); :func:`matsubara_decompose` returns it in the
reduced convention in which the transform above carries a 1/pi weight, the
normalization used by the hierarchy propagator in :mod:`noisespec.heom`.
Multiply a reconstruction by pi to compare against :func:`correlation`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
import scipy.integrate
import scipy.special

QUAD_ABS_TOL = 1e-10
QUAD_REL_TOL = 1e-8

# resonance guard for matsubara_decompose: rates within RESONANCE_TOL
# (relative) of omega_c are shifted by RESONANCE_SHIFT (relative) with a
# warning, keeping every coefficient finite.
RESONANCE_TOL = 1e-8
RESONANCE_SHIFT = 1e-6


class QuadratureError(RuntimeError):
    """Quadrature failed to reach the requested tolerance.

    Attributes
    ----------
    achieved : float
        Error estimate actually achieved.
    """

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved tolerance {achieved:.3e})")
        self.achieved = achieved


class UVDivergenceError(ValueError):
    """Real part of the correlation is UV-divergent at the requested time."""


@dataclass(frozen=True)
class OhmicFamily:
    """Power-law spectral density with exponential cutoff.

    Parameters: dimensionless coupling ``eta >= 0``, Ohmicity exponent
    ``s > 0`` (s<1 sub-Ohmic, s=1 Ohmic, s>1 super-Ohmic) and cutoff
    frequency ``omega_c > 0``.
    """

    eta: float
    s: float
    omega_c: float

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.s <= 0:
            raise ValueError(f"s must be > 0, got {self.s}")
        if self.omega_c <= 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")

    def evaluate(self, omega):
        """J(w) = eta * wc**(1-s) * w**s * exp(-w/wc) for w >= 0."""
        w = _check_omega(omega)
        with np.errstate(divide="ignore"):
            # w**s underflows harmlessly to 0 at w=0 for s>0
            val = self.eta * self.omega_c ** (1.0 - self.s) * w ** self.s \
                * np.exp(-w / self.omega_c)
        return val if isinstance(omega, np.ndarray) else float(val)


@dataclass(frozen=True)
class LorentzDrude:
    """Lorentz-Drude spectral density with coupling energy ``gamma >= 0``
    and bandwidth ``omega_c > 0``.  Peaks at w = omega_c with value gamma;
    decays as 1/w."""

    gamma: float
    omega_c: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.omega_c <= 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")

    @property
    def reorganization_energy(self) -> float:
        """E_r = 2*gamma."""
        return 2.0 * self.gamma

    def evaluate(self, omega):
        """J(w) = 2*gamma*wc*w / (w**2 + wc**2) for w >= 0."""
        w = _check_omega(omega)
        val = 2.0 * self.gamma * self.omega_c * w / (w * w + self.omega_c ** 2)
        return val if isinstance(omega, np.ndarray) else float(val)


SpectralDensity = Union[OhmicFamily, LorentzDrude]


@dataclass(frozen=True)
class BathSpec:
    """A spectral density together with the bath thermal energy k_B*T.

    ``temperature_kT = 0`` selects the analytic coth -> 1 limit wherever the
    implementation integrates over frequency; it is rejected by operations
    (like :func:`matsubara_decompose`) that require finite temperature.
    """

    sd: SpectralDensity
    temperature_kT: float

    def __post_init__(self):
        if self.temperature_kT < 0:
            raise ValueError(f"temperature_kT must be >= 0, got {self.temperature_kT}")


@dataclass(frozen=True)
class ExponentialDecomposition:
    """Exponential expansion sum_k c_k exp(-nu_k t) of a bath correlation.

    ``ck[0]``/``vk[0]`` is the bandwidth pole (nu_0 = omega_c); the remaining
    ``n_matsubara`` terms carry the strictly increasing thermal rates
    nu_k = 2*pi*k*kT.  Coefficients follow the reduced 1/pi correlation
    convention (see module docstring).
    """

    ck: np.ndarray
    vk: np.ndarray
    n_matsubara: int

    def __post_init__(self):
        ck = np.asarray(self.ck, dtype=complex)
        vk = np.asarray(self.vk, dtype=float)
        if ck.shape != vk.shape or ck.ndim != 1:
            raise ValueError("ck and vk must be 1-D arrays of equal length")
        if ck.size != self.n_matsubara + 1:
            raise ValueError("expected n_matsubara + 1 terms")
        if np.any(vk <= 0):
            raise ValueError("decay rates must be > 0")
        if np.any(np.diff(vk[1:]) <= 0):
            raise ValueError("Matsubara rates must be strictly increasing")
        object.__setattr__(self, "ck", ck)
        object.__setattr__(self, "vk", vk)

    @property
    def terms(self):
        """List of (c_k, nu_k) pairs."""
        return list(zip(self.ck, self.vk))

    def reconstruct(self, t):
        """sum_k c_k exp(-nu_k t); approximates correlation(bath, t)/pi."""
        t = np.asarray(t, dtype=float)
        val = np.sum(self.ck * np.exp(-np.multiply.outer(t, self.vk)), axis=-1)
        return complex(val[()]) if t.ndim == 0 else val


def _check_omega(omega):
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("omega must be >= 0")
    return w


def evaluate_sd(sd: SpectralDensity, omega):
    """Spectral weight J(omega) of either spectral-density variant."""
    return sd.evaluate(omega)


def _coth_half_beta(w, kT):
    """coth(w / (2 kT)), elementwise; kT = 0 means the zero-T limit 1."""
    if kT == 0.0:
        return np.ones_like(np.asarray(w, dtype=float))
    x = np.asarray(w, dtype=float) / kT  # = 2 * (w / (2 kT))
    out = np.ones_like(x)
    small = (x > 0.0) & (x < 40.0)
    out[small] = 1.0 + 2.0 / np.expm1(x[small])
    out[x == 0.0] = np.inf
    return out


def _quad_checked(func, a, b, what, **kwargs):
    with warnings.catch_warnings():
        # the explicit abserr check below supersedes scipy's warning
        warnings.simplefilter("ignore", scipy.integrate.IntegrationWarning)
        val, abserr = scipy.integrate.quad(
            func, a, b, epsabs=QUAD_ABS_TOL, epsrel=QUAD_REL_TOL, **kwargs)
    if abserr > 50.0 * max(QUAD_ABS_TOL, abs(val) * QUAD_REL_TOL):
        raise QuadratureError(f"quadrature of {what} did not converge", abserr)
    return val


def _lorentz_tail(sd: LorentzDrude, t: float, w_lo: float) -> complex:
    """int_{w_lo}^inf J_L(w) exp(i w t) dw, exactly via exp1.

    Partial fractions: w/(w^2+wc^2) = [1/(w-i wc) + 1/(w+i wc)]/2 and
    int_W^inf exp(i w t)/(w-z) dw = exp(i z t) E1(-i t (W - z)).
    """
    wc = sd.omega_c
    total = 0.0 + 0.0j
    for z in (1j * wc, -1j * wc):
        total += np.exp(1j * z * t) * scipy.special.exp1(-1j * t * (w_lo - z))
    return sd.gamma * wc * total


def correlation(bath: BathSpec, t: float, t_floor: float = 1e-3) -> complex:
    """Bath autocorrelation C(t) by adaptive quadrature.

    The imaginary part is -int J(w) sin(w t) dw at any temperature; the real
    part carries the coth(w/(2 kT)) thermal weight.  For the Lorentz-Drude
    density the real part diverges logarithmically as t -> 0, so times below
    ``t_floor`` are rejected instead of returning a quadrature-dependent
    number.

    Raises
    ------
    UVDivergenceError
        Lorentz-Drude bath with ``t < t_floor``.
    QuadratureError
        Requested tolerance could not be reached.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    sd = bath.sd
    kT = bath.temperature_kT

    if isinstance(sd, LorentzDrude):
        if t < t_floor:
            raise UVDivergenceError(
                f"UV-divergent real part: Lorentz-Drude correlation needs "
                f"t >= t_floor = {t_floor}, got t = {t}")
        w_split = max(10.0 * sd.omega_c, 40.0 * kT)
        # J(w)*coth(w/(2 kT)) -> 4*gamma*kT/omega_c as w -> 0
        f_re_0 = 4.0 * sd.gamma * kT / sd.omega_c

        def f_re(w):
            if w == 0.0:
                return f_re_0
            return sd.evaluate(w) * float(_coth_half_beta(np.array([w]), kT)[0])

        re = _quad_checked(f_re, 0.0, w_split, "Re C(t)",
                           weight="cos", wvar=t, limit=400)
        im = -_quad_checked(sd.evaluate, 0.0, w_split, "Im C(t)",
                            weight="sin", wvar=t, limit=400)
        # beyond w_split the coth weight is 1 to machine precision
        tail = _lorentz_tail(sd, t, w_split)
        return complex(re + tail.real, im - tail.imag)

    # Ohmic family: exponential cutoff, integrate to 50 wc; split at wc so
    # the (possibly) singular w=0 endpoint is handled by the extrapolating
    # plain quadrature and the oscillatory remainder by the weighted one.
    wc = sd.omega_c
    w_max = 50.0 * wc

    def f_re(w):
        return sd.evaluate(w) * float(_coth_half_beta(np.array([w]), kT)[0])

    re = _quad_checked(lambda w: f_re(w) * math.cos(w * t), 0.0, wc,
                       "Re C(t)", limit=200)
    re += _quad_checked(f_re, wc, w_max, "Re C(t)",
                        weight="cos", wvar=t, limit=400)
    im = -_quad_checked(lambda w: sd.evaluate(w) * math.sin(w * t), 0.0, wc,
                        "Im C(t)", limit=200)
    im -= _quad_checked(sd.evaluate, wc, w_max, "Im C(t)",
                        weight="sin", wvar=t, limit=400)
    return complex(re, im)


def matsubara_decompose(bath: BathSpec, n_matsubara: int) -> ExponentialDecomposition:
    """Exponential decomposition of the Lorentz-Drude correlation.

    Returns nu_0 = omega_c with c_0 = gamma*omega_c*(cot(omega_c/(2 kT)) - i)
    and Matsubara terms nu_k = 2*pi*k*kT with
    c_k = 4*gamma*omega_c*nu_k*kT / (nu_k**2 - omega_c**2), the reduced-
    convention residues (see module docstring).  If some nu_k collides with
    omega_c the rate is shifted by a relative ``RESONANCE_SHIFT`` and a
    warning is emitted.
    """
    sd = bath.sd
    if not isinstance(sd, LorentzDrude):
        raise TypeError("matsubara_decompose requires a LorentzDrude bath")
    kT = bath.temperature_kT
    if kT <= 0:
        raise ValueError("matsubara_decompose requires temperature_kT > 0")
    if n_matsubara < 0:
        raise ValueError("n_matsubara must be >= 0")

    gamma, wc = sd.gamma, sd.omega_c
    ck = [gamma * wc * (1.0 / math.tan(0.5 * wc / kT) - 1j)]
    vk = [wc]
    for k in range(1, n_matsubara + 1):
        nu = 2.0 * math.pi * k * kT
        if abs(nu - wc) < RESONANCE_TOL * wc:
            warnings.warn(
                f"Matsubara rate nu_{k} = {nu} resonant with omega_c = {wc}; "
                f"shifting by a relative {RESONANCE_SHIFT}",
                RuntimeWarning, stacklevel=2)
            nu = nu * (1.0 + RESONANCE_SHIFT)
        ck.append(4.0 * gamma * wc * nu * kT / (nu * nu - wc * wc) + 0.0j)
        vk.append(nu)
    return ExponentialDecomposition(np.array(ck), np.array(vk), n_matsubara)


def matsubara_tail_weight(bath: BathSpec, n_matsubara: int) -> float:
    """sum_{k > K} c_k / nu_k in closed form (reduced convention).

    This is the zero-frequency weight of the truncated Matsubara tail, used
    by the hierarchy propagator as a Markovian closure rate.  Uses
    sum_{k>=1} c_k/nu_k = 2*gamma*kT*(1 - x*cot(x))/omega_c with
    x = omega_c/(2 kT).
    """
    sd = bath.sd
    if not isinstance(sd, LorentzDrude):
        raise TypeError("matsubara_tail_weight requires a LorentzDrude bath")
    kT = bath.temperature_kT
    if kT <= 0:
        raise ValueError("matsubara_tail_weight requires temperature_kT > 0")
    x = 0.5 * sd.omega_c / kT
    total = 2.0 * sd.gamma * kT * (1.0 - x / math.tan(x)) / sd.omega_c
    dec = matsubara_decompose(bath, n_matsubara)
    partial = float(np.sum(dec.ck[1:].real / dec.vk[1:]))
    return total - partial


def decoherence_gamma(sd: OhmicFamily, temperature_kT: float, t) -> float:
    """Pure-dephasing decoherence exponent

        Gamma(t) = 4 * int_0^inf J(w) coth(w/(2 kT)) (1 - cos(w t)) / w^2 dw

    by adaptive Gauss-Kronrod quadrature on [0, 50*omega_c].  At
    ``temperature_kT = 0`` the coth factor is replaced by its analytic
    zero-temperature limit 1.  Gamma(0) = 0 and Gamma is non-decreasing at
    T = 0 (the integrand is non-negative).

    ``t`` may be a scalar or an array; the array form shares one adaptive
    subdivision across all requested times.
    """
    if not isinstance(sd, OhmicFamily):
        raise TypeError("decoherence_gamma requires an OhmicFamily density")
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise ValueError("t must be >= 0")
    out = _gamma_grid(sd.s, sd.omega_c, temperature_kT, tuple(ts.tolist()))
    return float(sd.eta * out[0]) if scalar else sd.eta * out


@lru_cache(maxsize=256)
def _gamma_grid(s, omega_c, kT, ts):
    """Gamma(t)/eta on the time tuple ``ts`` (eta enters linearly)."""
    ts = np.asarray(ts, dtype=float)
    unit = OhmicFamily(1.0, s, omega_c)

    def integrand(w):
        if w == 0.0:
            return np.zeros_like(ts)
        therm = float(_coth_half_beta(np.array([w]), kT)[0])
        return 4.0 * unit.evaluate(w) * therm * (1.0 - np.cos(w * ts)) / (w * w)

    res, err = scipy.integrate.quad_vec(
        integrand, 0.0, 50.0 * omega_c, epsabs=QUAD_ABS_TOL,
        epsrel=QUAD_REL_TOL, norm="max", quadrature="gk21", limit=4000)
    if err > 50.0 * max(QUAD_ABS_TOL, float(np.max(np.abs(res))) * QUAD_REL_TOL):
        raise QuadratureError("decoherence quadrature did not converge", err)
    return res
