"""Constants pipeline from the field-to-coupling ratio J/eps to correlation-length bounds.

All quantities are exact mpmath numbers: the upper bound on the decay
length is a double exponential and leaves float range almost at once.
Every constant the chain needs but does not determine defaults to 1
(the crossing-length threshold kappa to 1/2) and is marked conventional.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp

MP_DPS = 50
EPS_H2_MAX = mp.mpf(1) / 10

# name -> (default, meaning)
CONSTANTS = {
    "c": (1.0, "prefactor of the crossing tail, rho = 1 - c exp(-C (J/eps)^2)"),
    "C": (1.0, "rate of the crossing tail"),
    "kappa": (1.0, "prefactor of the tortuosity exponent alpha"),
    "K": (1.0, "tortuosity tail exponent numerator"),
    "C_zeta": (1.0, "universal constant of the decay-length upper bound"),
    "C_ell": (1.0, "rate in ell_1 = exp(exp(C_ell (J/eps)^2))"),
    "c_delta": (1.0, "rate of the threshold-length lower bound"),
    "kappa_threshold": (0.5, "crossing-probability threshold defining ell_0"),
}


class BoundDomainError(ValueError):
    """The tortuosity bound needs 0 < eps_H2 < 1/10."""


def zeta2_lower_bound(jeps: float, c_delta: float = 1.0) -> mp.mpf:
    """exp(c_delta (J/eps)^(2/3))."""
    if jeps < 1:
        raise ValueError("J/eps must be >= 1")
    if c_delta <= 0:
        raise ValueError("c_delta must be positive")
    with mp.workdps(MP_DPS):
        return +mp.exp(mp.mpf(c_delta) * mp.mpf(jeps) ** (mp.mpf(2) / 3))


@dataclass(frozen=True)
class BoundChain:
    jeps: float
    constants: dict
    overridden: tuple  # names of constants set by the caller
    rho: mp.mpf
    eps_h2: mp.mpf
    alpha: mp.mpf
    tail_exponent: mp.mpf  # K / log(1/eps_H2)
    log_ell1: mp.mpf  # exp(C_ell (J/eps)^2)
    ell1: mp.mpf
    log_zeta1_bound: mp.mpf
    zeta1_bound: mp.mpf
    zeta2_bound: mp.mpf
    ell: int | None = None
    N_ell: int | None = None
    c_ell: mp.mpf | None = None

    @property
    def conventional(self) -> tuple:
        """Constants still at their default, which no derivation fixes."""
        return tuple(k for k in CONSTANTS if k not in self.overridden)

    def as_dict(self) -> dict:
        """JSON-ready view; huge values are given as strings and via their logs."""
        def num(x):
            if x is None:
                return None
            f = float(x) if mp.isfinite(x) and abs(x) < mp.mpf("1e300") else None
            return f if f is not None else mp.nstr(x, 17)
        out = {
            "jeps": self.jeps,
            "constants": dict(self.constants),
            "conventional": list(self.conventional),
            "note": "constants listed as conventional are defaults, not derived values",
        }
        for name in ("rho", "eps_h2", "alpha", "tail_exponent", "log_ell1", "ell1",
                     "log_zeta1_bound", "zeta1_bound", "zeta2_bound", "c_ell"):
            out[name] = num(getattr(self, name))
        out["ell"] = self.ell
        out["N_ell"] = self.N_ell
        return out


def _resolve(constants: dict | None) -> tuple[dict, tuple]:
    constants = dict(constants or {})
    unknown = set(constants) - set(CONSTANTS)
    if unknown:
        raise ValueError(f"unknown constants: {sorted(unknown)}")
    out = {k: float(constants.get(k, v[0])) for k, v in CONSTANTS.items()}
    for k, v in out.items():
        if not v > 0 or not math.isfinite(v):
            raise ValueError(f"constant {k} must be positive and finite, got {v}")
    if out["kappa_threshold"] >= 1:
        raise ValueError("kappa_threshold must be < 1")
    return out, tuple(sorted(constants))


def evaluate_bound_chain(jeps: float, constants: dict | None = None, ell: int | None = None) -> BoundChain:
    """Evaluate the chain at J/eps = ``jeps``.

    rho = 1 - c exp(-C x^2) with x = J/eps, eps_H2 = 1 - rho,
    alpha = kappa eps_H2^2 / log(1/eps_H2)^3, ell_1 = exp(exp(C_ell x^2)),
    zeta_1 <= C_zeta max(2, x, 1/alpha, ell_1)^(C_zeta / alpha^2) and
    zeta_2 >= exp(c_delta x^(2/3)). With ``ell`` also N_ell = floor(log2 ell)
    and the corridor level c_ell = x ell / (8 N_ell).

    Raises BoundDomainError when eps_H2 >= 1/10.
    """
    jeps = float(jeps)
    if not jeps >= 1 or not math.isfinite(jeps):
        raise ValueError("J/eps must be a finite number >= 1")
    k, overridden = _resolve(constants)
    with mp.workdps(MP_DPS):
        x = mp.mpf(jeps)
        eps_h2 = mp.mpf(k["c"]) * mp.exp(-mp.mpf(k["C"]) * x ** 2)
        if eps_h2 >= EPS_H2_MAX:
            raise BoundDomainError(f"eps_H2 = {mp.nstr(eps_h2, 6)} is not below 1/10")
        rho = 1 - eps_h2
        L = mp.log(1 / eps_h2)
        alpha = mp.mpf(k["kappa"]) * eps_h2 ** 2 / L ** 3
        tail = mp.mpf(k["K"]) / L
        log_ell1 = mp.exp(mp.mpf(k["C_ell"]) * x ** 2)
        ell1 = mp.exp(log_ell1)
        Cz = mp.mpf(k["C_zeta"])
        base = mp.log(2), mp.log(x), mp.log(1 / alpha), log_ell1
        log_zeta1 = mp.log(Cz) + Cz / alpha ** 2 * max(base)
        zeta1 = mp.exp(log_zeta1)
        zeta2 = zeta2_lower_bound(jeps, k["c_delta"])
        N = c_ell = None
        if ell is not None:
            if ell < 2:
                raise ValueError("ell must be >= 2")
            N = int(ell).bit_length() - 1
            c_ell = x * ell / (8 * N)
        return BoundChain(jeps, k, overridden, +rho, +eps_h2, +alpha, +tail, +log_ell1, +ell1,
                          +log_zeta1, +zeta1, +zeta2, ell, N, c_ell)
