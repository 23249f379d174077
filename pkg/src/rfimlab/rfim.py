"""Zero-temperature random-field Ising model on Lambda(L).

Hamiltonian (``convention="aligned"``)::

    H(s) = -J sum_{u~v} s_u s_v - sum_v (eta + eps h_v) s_v

with the box boundary spins fixed to +1 or -1. ``convention="opposed"``
flips the sign of the random-field term (``+eps h_v s_v``), which is the
form used by the coarse-graining experiments (run those with ``eta=0``).

Ground states are exact: the energy is a cut function on the grid graph
and is minimised by a single max-flow.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import _backend
from .lattice import Box, VertexSet, constant_sign_components, mask_perimeter
from .parallel import map_replicates

DISTRIBUTIONS = ("gaussian", "rademacher", "uniform")
CONVENTIONS = ("aligned", "opposed")

# psi with E exp(X^2 / psi^2) <= 2; the gaussian entry is the conventional 1
_PSI = {
    "gaussian": 1.0,
    "rademacher": 1.0 / np.sqrt(np.log(2.0)),
    "uniform": np.sqrt(3.0) / np.sqrt(np.log(2.0)),
}

Z95 = 1.959963984540054

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    J: float = 1.0
    eps: float = 1.0
    eta: float = 0.0
    convention: str = "aligned"

    def __post_init__(self):
        if not self.J > 0:
            raise ModelError(f"J must be > 0, got {self.J}")
        if not self.eps >= 0:
            raise ModelError(f"eps must be >= 0, got {self.eps}")
        if self.convention not in CONVENTIONS:
            raise ModelError(f"unknown convention {self.convention!r}")

    @property
    def field_sign(self) -> float:
        return 1.0 if self.convention == "aligned" else -1.0


@dataclass(frozen=True)
class RandomField:
    L: int
    values: np.ndarray = field(repr=False)
    distribution: str = "gaussian"
    psi: float = 1.0
    seed: int = 0
    replicate: int = 0

    @property
    def box(self) -> Box:
        return Box(self.L)

    def at(self, x: int, y: int) -> float:
        return float(self.values[x + self.L, y + self.L])


@dataclass(frozen=True)
class SpinConfiguration:
    L: int
    spins: np.ndarray = field(repr=False)
    boundary: str = "plus"

    def __post_init__(self):
        if self.boundary not in ("plus", "minus"):
            raise ModelError(f"boundary must be 'plus' or 'minus', got {self.boundary!r}")
        if self.spins.shape != Box(self.L).shape:
            raise ModelError("spin array does not cover the box")
        if not np.all(np.abs(self.spins) == 1):
            raise ModelError("spins must be +-1")

    @property
    def box(self) -> Box:
        return Box(self.L)

    @property
    def boundary_value(self) -> int:
        return 1 if self.boundary == "plus" else -1

    def origin_spin(self) -> int:
        return int(self.spins[self.L, self.L])

    def flipped(self, gamma: VertexSet) -> "SpinConfiguration":
        m = gamma.box_mask(self.box)
        s = self.spins.copy()
        s[m] *= -1
        return SpinConfiguration(self.L, s, self.boundary)


@dataclass(frozen=True)
class OrderParameterEstimate:
    L: int
    m_hat: float
    n: int
    half_width: float
    seed: int

    @property
    def ci(self) -> tuple[float, float]:
        return (max(0.0, self.m_hat - self.half_width), min(1.0, self.m_hat + self.half_width))


@dataclass(frozen=True)
class CorrelationLengthEstimate:
    threshold: float
    zeta2: int | None
    schedule: tuple[int, ...]
    estimates: tuple[OrderParameterEstimate, ...]
    decay_slope: float
    zeta1_proxy: float

    @property
    def reached(self) -> bool:
        return self.zeta2 is not None


# -- random fields ----------------------------------------------------------

def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser (wrapping uint64 arithmetic)."""
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def vertex_uniforms(seed: int, replicate: int, xs: np.ndarray, ys: np.ndarray, draw: int = 0) -> np.ndarray:
    """Uniforms in (0, 1) keyed by ``(seed, replicate, x, y, draw)``.

    Stateless counter hash, so the value at a vertex does not depend on the
    box it is sampled in or on evaluation order.
    """
    with np.errstate(over="ignore"):
        key = _mix64(np.uint64(seed & _MASK64) ^ _mix64(np.uint64((replicate + 1) & _MASK64) * _GOLDEN))
        cx = (np.asarray(xs, dtype=np.int64) + (1 << 31)).astype(np.uint64)
        cy = (np.asarray(ys, dtype=np.int64) + (1 << 31)).astype(np.uint64)
        counter = (cx << np.uint64(32)) | cy
        z = _mix64(key ^ _mix64(counter + np.uint64(draw) * _GOLDEN))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / (1 << 53))


def sample_field(L: int, distribution: str = "gaussian", seed: int = 0, replicate: int = 0) -> RandomField:
    if L < 0:
        raise ModelError("L must be >= 0")
    if distribution not in DISTRIBUTIONS:
        raise ModelError(f"unknown distribution {distribution!r}; choose from {DISTRIBUTIONS}")
    r = np.arange(-L, L + 1)
    xs, ys = np.meshgrid(r, r, indexing="ij")
    u = vertex_uniforms(seed, replicate, xs, ys)
    values = _draws(u, distribution)
    return RandomField(L, values, distribution, _PSI[distribution], seed, replicate)


def constant_field(L: int, value: float = 0.0) -> RandomField:
    return RandomField(L, np.full(Box(L).shape, float(value)), "gaussian", 1.0, 0, 0)


def planted_field(L: int, values: np.ndarray) -> RandomField:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != Box(L).shape:
        raise ModelError("planted values do not cover the box")
    return RandomField(L, values.copy(), "gaussian", 1.0, 0, 0)


# -- energy ------------------------------------------------------------------

def effective_field(h: RandomField, p: ModelParams) -> np.ndarray:
    return p.eta + p.field_sign * p.eps * h.values


def _outside_neighbours(box: Box) -> np.ndarray:
    n = np.zeros(box.shape, dtype=np.int64)
    n[0, :] += 1
    n[-1, :] += 1
    n[:, 0] += 1
    n[:, -1] += 1
    return n


def energy(sigma: SpinConfiguration, h: RandomField, p: ModelParams) -> float:
    if sigma.L != h.L:
        raise ModelError(f"box mismatch: spins on L={sigma.L}, field on L={h.L}")
    s = sigma.spins.astype(np.float64)
    bonds = (s[1:, :] * s[:-1, :]).sum() + (s[:, 1:] * s[:, :-1]).sum()
    rim = (_outside_neighbours(sigma.box) * s).sum() * sigma.boundary_value
    return float(-p.J * (bonds + rim) - (effective_field(h, p) * s).sum())


def flip_energy(sigma: SpinConfiguration, gamma: VertexSet, h: RandomField, p: ModelParams) -> float:
    """H(sigma with gamma flipped) - H(sigma), from the boundary of gamma and the field on it."""
    if sigma.L != h.L:
        raise ModelError(f"box mismatch: spins on L={sigma.L}, field on L={h.L}")
    box = sigma.box
    g = gamma.box_mask(box)
    if int(g.sum()) != gamma.area:
        raise ModelError("flip region is not contained in the box")
    s = sigma.spins.astype(np.float64)
    delta = 2.0 * (effective_field(h, p)[g] * s[g]).sum()
    # internal edges with exactly one end in gamma
    for axis in (0, 1):
        a = [slice(None), slice(None)]
        b = [slice(None), slice(None)]
        a[axis] = slice(1, None)
        b[axis] = slice(None, -1)
        cut = g[tuple(a)] != g[tuple(b)]
        delta += 2.0 * p.J * (s[tuple(a)] * s[tuple(b)])[cut].sum()
    rim = _outside_neighbours(box)
    delta += 2.0 * p.J * sigma.boundary_value * (rim[g] * s[g]).sum()
    return float(delta)


# -- ground states -------------------------------------------------------------

def ground_state(h: RandomField, p: ModelParams, boundary: str = "plus") -> SpinConfiguration:
    """Exact minimiser of the energy; among ties, the pointwise-maximal one."""
    if boundary not in ("plus", "minus"):
        raise ModelError(f"boundary must be 'plus' or 'minus', got {boundary!r}")
    b = 1.0 if boundary == "plus" else -1.0
    box = h.box
    # cost of s_v = -1 relative to s_v = +1, ignoring couplings inside the box
    terminal = 2.0 * effective_field(h, p) + 2.0 * p.J * b * _outside_neighbours(box)
    side, _ = _backend.grid_min_cut(np.ascontiguousarray(terminal, dtype=np.float64), 2.0 * p.J)
    spins = np.where(side.astype(bool), 1, -1).astype(np.int8)
    return SpinConfiguration(h.L, spins, boundary)


def ground_state_pair(h: RandomField, p: ModelParams) -> tuple[SpinConfiguration, SpinConfiguration]:
    return ground_state(h, p, "plus"), ground_state(h, p, "minus")


def brute_force_ground_energy(h: RandomField, p: ModelParams, boundary: str = "plus") -> tuple[float, list[np.ndarray]]:
    """Exhaustive minimum over all 2^n configurations (small boxes only).

    Returns the minimum energy and every minimising configuration.
    """
    box = h.box
    n = box.n_vertices
    if n > 16:
        raise ModelError("brute force limited to 16 spins")
    codes = np.arange(1 << n, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(n)) & 1).astype(np.int8)
    confs = (2 * bits - 1).reshape(-1, *box.shape)
    bval = 1.0 if boundary == "plus" else -1.0
    sf = confs.astype(np.float64)
    bonds = (sf[:, 1:, :] * sf[:, :-1, :]).sum(axis=(1, 2)) + (sf[:, :, 1:] * sf[:, :, :-1]).sum(axis=(1, 2))
    rim = (sf * _outside_neighbours(box)).sum(axis=(1, 2)) * bval
    energies = -p.J * (bonds + rim) - (sf * effective_field(h, p)).sum(axis=(1, 2))
    emin = energies.min()
    tol = 1e-9 * max(1.0, abs(emin))
    return float(emin), [confs[i] for i in np.flatnonzero(energies <= emin + tol)]


# -- order parameter and correlation length ------------------------------------

def _origin_gap(args):
    L, p, distribution, seed, r = args
    h = sample_field(L, distribution, seed, r)
    plus, minus = ground_state_pair(h, p)
    return 0.5 * (plus.origin_spin() - minus.origin_spin())


def binomial_half_width(m_hat: float, n: int) -> float:
    return Z95 * float(np.sqrt(max(m_hat * (1.0 - m_hat), 0.0) / n))


def estimate_order_parameter(L: int, p: ModelParams, n: int, seed: int,
                             distribution: str = "gaussian", threads: int = 1,
                             return_samples: bool = False):
    """Monte Carlo estimate of m(L) = E[(s0+ - s0-)/2] over ``n`` fields."""
    if n < 1:
        raise ModelError("n must be >= 1")
    args = [(L, p, distribution, seed, r) for r in range(n)]
    samples = np.asarray(map_replicates(_origin_gap, args, threads), dtype=np.float64)
    m_hat = float(samples.sum() / n)
    est = OrderParameterEstimate(L, m_hat, n, binomial_half_width(m_hat, n), seed)
    return (est, samples) if return_samples else est


def decay_slope(Ls, m_hats) -> float:
    """Least-squares slope of log m vs L over the points with m > 0 (nan if < 2)."""
    Ls = np.asarray(Ls, dtype=np.float64)
    m = np.asarray(m_hats, dtype=np.float64)
    keep = m > 0
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(Ls[keep], np.log(m[keep]), 1)
    return float(slope)


def zeta2_from_estimates(estimates, threshold: float) -> int | None:
    for e in estimates:
        if e.m_hat < threshold:
            return e.L
    return None


def estimate_zeta2(p: ModelParams, m_threshold: float, L_schedule, n: int, seed: int,
                   distribution: str = "gaussian", threads: int = 1) -> CorrelationLengthEstimate:
    """Least scheduled L with m_hat(L) < threshold, plus the log-linear decay slope."""
    if not 0.0 < m_threshold < 1.0:
        raise ModelError("threshold must lie in (0, 1)")
    schedule = tuple(int(L) for L in L_schedule)
    if not schedule:
        raise ModelError("empty L schedule")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ModelError("L schedule must be strictly increasing")
    ests = tuple(estimate_order_parameter(L, p, n, seed, distribution, threads) for L in schedule)
    slope = decay_slope(schedule, [e.m_hat for e in ests])
    proxy = -1.0 / slope if slope < 0 else float("inf")
    return CorrelationLengthEstimate(m_threshold, zeta2_from_estimates(ests, m_threshold),
                                     schedule, ests, slope, proxy)


# -- certificates and tails ----------------------------------------------------

@dataclass(frozen=True)
class ComponentCertificate:
    component: VertexSet
    sign: int
    field_sum: float
    perimeter: int
    threshold: float

    @property
    def holds(self) -> bool:
        return abs(self.field_sum) >= self.threshold


def fully_disagreeing_components(sigma: SpinConfiguration):
    """Constant-sign components every one of whose Z^2 boundary edges joins
    opposite spins (edges leaving the box see the fixed boundary spin)."""
    out = []
    bval = sigma.boundary_value
    for comp, sign in constant_sign_components(sigma.spins, sigma.box):
        x0, x1, y0, y1 = comp.bounds()
        touches_rim = x0 == -sigma.L or y0 == -sigma.L or x1 == sigma.L or y1 == sigma.L
        if touches_rim and sign == bval:
            continue
        out.append((comp, sign))
    return out


def component_certificates(sigma: SpinConfiguration, h: RandomField, p: ModelParams) -> list[ComponentCertificate]:
    """|sum_{Gamma} h| against (J / 2 eps) |dGamma| for every fully disagreeing component."""
    if p.eps <= 0 or p.eta != 0:
        raise ModelError("certificates need eps > 0 and eta = 0")
    out = []
    for comp, sign in fully_disagreeing_components(sigma):
        m = comp.box_mask(sigma.box)
        per = mask_perimeter(comp.mask)
        out.append(ComponentCertificate(comp, sign, float(h.values[m].sum()), per,
                                        p.J / (2.0 * p.eps) * per))
    return out


def _draws(u: np.ndarray, distribution: str) -> np.ndarray:
    if distribution == "gaussian":
        return special.ndtri(u)
    if distribution == "rademacher":
        return np.where(u < 0.5, -1.0, 1.0)
    return np.sqrt(3.0) * (2.0 * u - 1.0)


def sum_tail_frequencies(ks, ts, n_samples: int, seed: int, distribution: str = "gaussian") -> np.ndarray:
    """Empirical P(|h_1 + ... + h_k| > t) on a (k, t) grid, ``n_samples`` sums per k.

    ``ts`` is either one list shared by every k or one list per k.
    """
    if distribution not in DISTRIBUTIONS:
        raise ModelError(f"unknown distribution {distribution!r}")
    ks = [int(k) for k in ks]
    tgrid = [list(ts)] * len(ks) if np.ndim(ts) == 1 else [list(t) for t in ts]
    out = []
    for k, row in zip(ks, tgrid):
        idx = np.arange(n_samples * k)
        x = _draws(vertex_uniforms(seed, k, idx, np.zeros_like(idx)), distribution)
        sums = np.sort(np.abs(x.reshape(n_samples, k).sum(axis=1)))
        out.append([1.0 - np.searchsorted(sums, t, side="right") / n_samples for t in row])
    return np.asarray(out)


def tail_bound(t, k, psi: float, c: float):
    """exp(-c t / (k psi^2)), the exceedance bound for a sum of k centred terms."""
    return np.exp(-c * np.asarray(t, dtype=np.float64) / (k * psi * psi))


def calibrate_tail_constant(ks, ratios, safety: float = 0.5) -> float:
    """Largest c with 2*Phi_bar(t/sqrt k) <= exp(-c t / k) on the grid t = r sqrt(k), times ``safety``.

    Calibrated on the exact gaussian tail with psi = 1.
    """
    best = np.inf
    for k in ks:
        for r in ratios:
            t = r * np.sqrt(k)
            tail = 2.0 * special.ndtr(-r)
            best = min(best, -k * np.log(tail) / t)
    return float(safety * best)


def psi_of(distribution: str) -> float:
    return _PSI[distribution]
