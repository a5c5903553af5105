"""Non-linear energy harvesting and worst-case robust constraint forms.

Covariance uncertainty is a spectral-norm ball ``||dE||_2 <= eps`` around each
nominal covariance.  Because ``max_{||B||_2 <= eps} tr(A B) = eps ||A||_*`` and
the matrices paired with the error are PSD, the adversary is ``-eps I`` on a
user's own channel and ``+eps I`` on interferers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NegativeInput, OutOfDomain, ZeroReceiver
from .numkit import herm_eig, hermitize

#: x >= xi * (1 - INVERSE_MARGIN) is outside the inverse domain
INVERSE_MARGIN = 1e-12


def db_to_linear(db: float) -> float:
    return float(10.0 ** (db / 10.0))


def dbm_to_watts(dbm: float) -> float:
    return float(10.0 ** ((dbm - 30.0) / 10.0))


def linear_to_db(x: float) -> float:
    return float(10.0 * np.log10(x))


@dataclass(frozen=True)
class EhParams:
    """Sigmoid harvester with saturation ``xi`` (W), steepness ``a`` (1/W)
    and turning point ``b`` (W)."""

    xi: float = 0.024
    a: float = 150.0
    b: float = 0.024
    big_x: float = field(init=False)
    big_y: float = field(init=False)

    def __post_init__(self):
        if not (self.xi > 0 and self.a > 0 and self.b >= 0):
            raise OutOfDomain("EH parameters need xi > 0, a > 0, b >= 0")
        ab = self.a * self.b
        # X = e^{ab} / (1 + e^{ab}) written to avoid overflow
        object.__setattr__(self, "big_x", float(1.0 / (1.0 + np.exp(-ab))))
        object.__setattr__(self, "big_y", float(self.xi * np.exp(-ab)))


def eh_forward(p_received, eh: EhParams):
    """Harvested power ``xi / (X (1 + exp(-a (p - b)))) - Y``.

    Zero input maps to exactly zero.
    """
    p = np.asarray(p_received, dtype=float)
    if np.any(p < 0) or np.any(np.isnan(p)):
        raise NegativeInput("received power must be non-negative")
    out = eh.xi / (eh.big_x * (1.0 + np.exp(-eh.a * (p - eh.b)))) - eh.big_y
    out = np.where(p == 0.0, 0.0, np.maximum(out, 0.0))
    return float(out) if out.ndim == 0 else out


def eh_inverse(e_required, eh: EhParams):
    """Received power needed to harvest ``e_required``."""
    x = np.asarray(e_required, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise OutOfDomain("harvested power must be non-negative")
    if np.any(x >= eh.xi * (1.0 - INVERSE_MARGIN)):
        raise OutOfDomain(f"harvested power {np.max(x):.6g} W is at or above saturation {eh.xi:.6g} W")
    out = eh.b - np.log(eh.xi / ((x + eh.big_y) * eh.big_x) - 1.0) / eh.a
    out = np.where(x == 0.0, 0.0, np.maximum(out, 0.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class UncertaintyRadii:
    dl: np.ndarray
    ul: np.ndarray

    def __post_init__(self):
        dl = np.asarray(self.dl, dtype=float).ravel()
        ul = np.asarray(self.ul, dtype=float).ravel()
        if np.any(dl < 0) or np.any(ul < 0):
            raise NegativeInput("uncertainty radii must be non-negative")
        object.__setattr__(self, "dl", dl)
        object.__setattr__(self, "ul", ul)

    @classmethod
    def zeros(cls, users: int) -> "UncertaintyRadii":
        return cls(np.zeros(users), np.zeros(users))


def worst_case_dl_power(s: np.ndarray, phi: np.ndarray, eps_dl: float) -> float:
    """Worst-case received power ``tr((phi - eps I) S)``."""
    s = hermitize(s)
    phi = hermitize(phi)
    return float(np.real(np.sum(phi * s.T))) - float(eps_dl) * float(np.real(np.trace(s)))


def worst_case_sinr(p, w: list, psi: list, radii: UncertaintyRadii, noise: float) -> np.ndarray:
    """Worst-case SINR of every user.

    ``gamma_k = p_k tr((psi_k - eps_k I) W_k) /
    (sum_{i != k} p_i tr((psi_i + eps_i I) W_k) + noise tr W_k)``
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise NegativeInput("powers must be non-negative")
    eps = radii.ul
    k_users = len(w)
    out = np.empty(k_users)
    for k in range(k_users):
        wk = hermitize(w[k])
        trw = float(np.real(np.trace(wk)))
        if trw <= 0:
            raise ZeroReceiver(f"receive matrix of user {k} has zero trace")
        gains = np.array([float(np.real(np.sum(psi[i] * wk.T))) for i in range(k_users)])
        sig = p[k] * (gains[k] - eps[k] * trw)
        interf = sum(p[i] * (gains[i] + eps[i] * trw) for i in range(k_users) if i != k)
        out[k] = sig / (interf + noise * trw)
    return out


def spectral_ball_maximizer(a: np.ndarray, eps: float) -> np.ndarray:
    """``argmax_{||B||_2 <= eps} tr(A B) = eps sum_i sign(l_i) u_i u_i^H``."""
    w, u = herm_eig(a)
    return eps * (u * np.sign(w)) @ u.conj().T


def ul_adversary(psi: list, radii: UncertaintyRadii, user: int) -> list:
    """Perturbed uplink covariances seen by receiver ``user``: own channel
    shrunk by ``eps I``, every interferer grown by ``eps I``."""
    out = []
    for i, m in enumerate(psi):
        sgn = -1.0 if i == user else 1.0
        out.append(m + sgn * radii.ul[i] * np.eye(m.shape[0]))
    return out


def dl_adversary(phi: list, radii: UncertaintyRadii) -> list:
    return [m - radii.dl[k] * np.eye(m.shape[0]) for k, m in enumerate(phi)]
