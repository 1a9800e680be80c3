"""Bohr sets, the Bohr-cut split f = g + h, the exponent threshold q(M, delta),
and the two truncations (physical L^2 cut-off and smooth spectral cut-off).
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .group_fourier import (
    GridDensity,
    Spectrum,
    centered_frequencies,
    dual_transform,
    frequency_grid,
    lambda3,
    lq_norm,
)

C2_TABLE_SEED = 20240601
C2_TABLE_PRIME = 257


@dataclass(frozen=True)
class BohrSet:
    """Points x with |e^{2 pi i xi.x/N} - 1| <= eta for every xi in ``freqs``."""

    N: int
    d: int
    freqs: np.ndarray
    eta: float
    mask: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    @property
    def members(self) -> np.ndarray:
        """Member coordinates, shape (|B|, d), in row-major order."""
        return np.argwhere(self.mask)

    def __contains__(self, x) -> bool:
        idx = tuple(int(v) % self.N for v in np.atleast_1d(x))
        return bool(self.mask[idx])


def _chord(k: np.ndarray, N: int) -> np.ndarray:
    """|e^{2 pi i k/N} - 1| computed from the reduced residue, so it is exactly even in k."""
    m = np.minimum(k % N, (-k) % N)
    return 2.0 * np.sin(np.pi * m / N)


def bohr_set(freqs, eta: float, N: int, d: int = 1) -> BohrSet:
    if not eta > 0:
        raise ValueError(f"Bohr radius must be positive, got {eta}")
    F = np.asarray(freqs, dtype=np.int64).reshape(-1, d)
    mask = np.ones((N,) * d, dtype=bool)
    if eta < 2 and len(F):
        coords = np.meshgrid(*([np.arange(N, dtype=np.int64)] * d), indexing="ij")
        for xi in F:
            k = sum(int(xi[a]) * coords[a] for a in range(d))
            mask &= _chord(k, N) <= eta
            if mask.sum() == 1:
                break
    mask.setflags(write=False)
    F.setflags(write=False)
    return BohrSet(N=N, d=d, freqs=F, eta=float(eta), mask=mask)


def interpolation_exponent(eps: float, M: float, T: float, C: float = 4.0) -> float:
    """q = 2 + min(3(1 - 1/T), 2 ln C / (y ln y)) with y = (M/eps)^T, capped at 3.

    For very large y the second branch underflows and q rounds to 2.0.
    """
    if not (0 < eps < M):
        raise ValueError(f"need 0 < eps < M, got eps={eps}, M={M}")
    if not T > 1:
        raise ValueError(f"T must exceed 1, got {T}")
    ln_y = T * math.log(M / eps)
    second = 2.0 * math.log(C) / (math.exp(min(ln_y, 700.0)) * ln_y)
    return min(3.0, 2.0 + min(3.0 * (1.0 - 1.0 / T), second))


@dataclass(frozen=True)
class BohrCutDiagnostics:
    g_hat_l2: float
    h_hat_l3: float
    n_large: int
    bohr_size: int
    phi_hat_lp: float
    phi_defect: float
    degenerate: bool

    def as_row(self) -> dict:
        return {
            "g_hat_l2": self.g_hat_l2,
            "h_hat_l3": self.h_hat_l3,
            "n_large": self.n_large,
            "bohr_size": self.bohr_size,
            "phi_hat_lp": self.phi_hat_lp,
            "phi_defect": self.phi_defect,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class BohrCutResult:
    g: GridDensity
    h: GridDensity
    lam: float
    eta: float
    q: float
    M_bound: float
    diagnostics: BohrCutDiagnostics

    def fitted_constants(self) -> tuple[float, float]:
        """Ratios ||g_hat||_2 / (eta^{-(q-2)/2} M) and ||h_hat||_3 / (eta^{(3-q)/3} M)."""
        M, eta, q = self.M_bound, self.eta, self.q
        cg = self.diagnostics.g_hat_l2 / (eta ** (-(q - 2) / 2) * M)
        ch = self.diagnostics.h_hat_l3 / (eta ** ((3 - q) / 3) * M)
        return cg, ch


def bohr_cut(f: GridDensity, M_bound: float, eps: float, T: float, C: float = 4.0) -> BohrCutResult:
    """Mollify f by the normalized indicator of the Bohr set of its large spectrum.

    eta = (eps/M)^T, lambda = M eta, E = {xi : |f_hat(xi)| >= lambda},
    B = B(E, eta), g = (1_B/|B|) * f and h = f - g.  A Bohr set collapsing to
    {0} is reported through ``diagnostics.degenerate`` rather than raised.
    """
    if not f.is_nonnegative:
        raise ValueError("bohr_cut needs a nonnegative density")
    q = interpolation_exponent(eps, M_bound, T, C)
    eta = (eps / M_bound) ** T
    lam = M_bound * eta
    F = dual_transform(f).coeffs
    large = np.argwhere(np.abs(F) >= lam)
    k = centered_frequencies(f.N)
    freqs = k[large]
    B = bohr_set(freqs, min(eta, 2.0), f.N, f.d)

    phi_hat = np.fft.fftn(B.mask.astype(np.float64)).real / B.size
    g_vals = np.fft.ifftn(phi_hat * np.fft.fftn(f.values)).real
    # the FFT route can leave -1e-17 where the exact convolution is 0
    g_vals = np.maximum(g_vals, 0.0)
    g = GridDensity(g_vals)
    h = GridDensity(f.values - g.values)

    # q - 2 can underflow to 0 for huge (M/eps)^T; then p = inf and the l^p norm is the max
    p = 2.0 / (q - 2.0) if q > 2.0 else math.inf
    G, H = dual_transform(g), dual_transform(h)
    in_e = tuple(large.T)
    defect = float(np.max(np.abs(1.0 - phi_hat[in_e]))) if len(large) else 0.0
    diag = BohrCutDiagnostics(
        g_hat_l2=lq_norm(G, 2.0),
        h_hat_l3=lq_norm(H, 3.0),
        n_large=len(large),
        bohr_size=B.size,
        phi_hat_lp=float(np.max(np.abs(phi_hat))) if math.isinf(p) else float(np.sum(np.abs(phi_hat) ** p) ** (1.0 / p)),
        phi_defect=defect,
        degenerate=B.size == 1,
    )
    return BohrCutResult(g=g, h=h, lam=lam, eta=eta, q=q, M_bound=M_bound, diagnostics=diag)


def write_bohr_diagnostics(path, results: list[BohrCutResult]) -> None:
    """One CSV row per bohr_cut invocation."""
    with open(path, "w", newline="") as fh:
        w = None
        for r in results:
            row = {"lambda": r.lam, "eta": r.eta, "q": r.q, "M_bound": r.M_bound, **r.diagnostics.as_row()}
            if w is None:
                w = csv.DictWriter(fh, fieldnames=list(row))
                w.writeheader()
            w.writerow(row)


# ------------------------------------------------------------------- q(M, delta)


@dataclass(frozen=True)
class C2Table:
    """Nondecreasing step function t -> lower envelope of Lambda_3 over the corpus."""

    t: np.ndarray
    c2: np.ndarray
    seed: int
    corpus_size: int

    def __call__(self, t: float) -> float:
        if t <= 0:
            raise ValueError(f"c2 argument must be positive, got {t}")
        if t >= self.t[-1]:
            return float(self.c2[-1])
        if t < self.t[0]:
            # below the corpus range: vanish linearly, as c2(t) <= t/2 from intervals
            return float(self.c2[0] * t / self.t[0])
        # left step: the value at the largest grid point <= t is a valid lower bound
        i = int(np.searchsorted(self.t, t, side="right")) - 1
        return float(self.c2[max(i, 0)])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# corpus_seed={self.seed} corpus_size={self.corpus_size} prime={C2_TABLE_PRIME}\n")
            w = csv.writer(fh)
            w.writerow(["t", "c2_lower_bound"])
            for t, c in zip(self.t, self.c2):
                w.writerow([f"{t:.4f}", repr(float(c))])

    @classmethod
    def read_csv(cls, path_or_text) -> "C2Table":
        text = path_or_text if "\n" in str(path_or_text) else Path(path_or_text).read_text()
        lines = text.splitlines()
        meta = dict(kv.split("=") for kv in lines[0].lstrip("# ").split())
        rows = list(csv.reader(lines[2:]))
        t = np.array([float(r[0]) for r in rows])
        c = np.array([float(r[1]) for r in rows])
        return cls(t=t, c2=c, seed=int(meta["corpus_seed"]), corpus_size=int(meta["corpus_size"]))


def c2_corpus(p: int = C2_TABLE_PRIME, seed: int = C2_TABLE_SEED) -> list[GridDensity]:
    """Seeded corpus of nonnegative densities on Z_p, each rescaled to ||f||_2 = 1."""
    from .constructions import behrend_set, random_set

    rng = np.random.default_rng(seed)
    n_half = (p - 1) // 2
    raw = [np.ones(p)]
    for delta in np.linspace(0.02, 0.95, 32):
        for _ in range(4):
            s = random_set(p, float(delta), int(rng.integers(2**31)))
            if len(s.elements):
                raw.append(_indicator(p, s.elements))
    for n in range(8, n_half + 1, 8):
        raw.append(_indicator(p, behrend_set(n).elements))
        raw.append(_indicator(p, np.arange(n)))
    x = np.arange(p)
    for width in np.geomspace(1.0, p / 4, 24):
        dist = np.minimum(x, p - x)
        raw.append(np.exp(-0.5 * (dist / width) ** 2))
    for _ in range(64):
        k = int(rng.integers(1, n_half))
        a = float(rng.uniform(0.1, 1.0))
        raw.append(1.0 + a * np.cos(2 * np.pi * k * x / p) + 0.2 * rng.random(p))
    out = []
    for v in raw:
        l2 = math.sqrt(float(np.mean(v * v)))
        out.append(GridDensity(v / l2))
    return out


def _indicator(p: int, elements) -> np.ndarray:
    v = np.zeros(p)
    v[np.asarray(elements, dtype=np.int64)] = 1.0
    return v


def build_c2_table(p: int = C2_TABLE_PRIME, seed: int = C2_TABLE_SEED, grid=None) -> C2Table:
    """Empirical lower envelope min {Lambda_3(f) : ||f||_1 >= t} over :func:`c2_corpus`."""
    corpus = c2_corpus(p, seed)
    mass = np.array([f.l1_mass() for f in corpus])
    lam = np.array([lambda3(f) for f in corpus])
    t = np.round(np.arange(0.02, 1.0001, 0.02), 4) if grid is None else np.asarray(grid)
    c2 = np.array([lam[mass >= ti - 1e-12].min() if np.any(mass >= ti - 1e-12) else 1.0 for ti in t])
    c2 = np.maximum.accumulate(c2)
    return C2Table(t=t, c2=c2, seed=seed, corpus_size=len(corpus))


@functools.lru_cache(maxsize=1)
def default_c2_table() -> C2Table:
    """Shipped table (regenerate with :func:`build_c2_table`)."""
    text = resources.files("aplab").joinpath("data/c2_table.csv").read_text()
    return C2Table.read_csv(text)


def q_threshold(
    M: float,
    delta: float,
    c2_table: Callable[[float], float] | None = None,
    C1: float = 1.0,
    C2: float = 1.0,
    T_max: float = 64.0,
) -> float:
    """Exponent threshold q(M, delta) in (2, 3].

    Returns min(3, 2 + max over T in (1, T_max] of min(3(1 - 1/T), b(T))) with
    b(T) = C1 / (y ln y), y = (C2 c)^{-T} and c = c2_table(delta / M); b is
    infinite when C2 c >= 1.  The first branch increases and b decreases in
    T, so the maximum sits at their crossing, which a geometric grid
    brackets and a root solve pins down.
    """
    if not (M >= delta > 0):
        raise ValueError(f"need M >= delta > 0, got M={M}, delta={delta}")
    table = default_c2_table() if c2_table is None else c2_table
    c = table(delta / M)
    if not c > 0:
        raise ValueError(f"c2_table returned a nonpositive value {c}")
    log_base = -math.log(C2 * c)

    def first(T):
        return 3.0 * (1.0 - 1.0 / T)

    def second(T):
        ln_y = T * log_base
        if ln_y <= 0:
            return math.inf
        return C1 / (math.exp(min(ln_y, 700.0)) * ln_y)

    grid = 1.0 + np.geomspace(2.0**-10, T_max - 1.0, 200)
    gap = np.array([first(T) - second(T) for T in grid])
    if gap[-1] < 0:
        best = first(T_max)
    elif gap[0] >= 0:
        best = second(grid[0])
    else:
        j = int(np.argmax(gap >= 0))
        T_star = brentq(lambda T: first(T) - second(T), grid[j - 1], grid[j], xtol=1e-12, rtol=1e-14)
        best = first(T_star)
    return min(3.0, 2.0 + best)


# ----------------------------------------------------------------- truncations


@dataclass(frozen=True)
class TruncationResult:
    f_le: GridDensity
    f_gt: GridDensity
    K: float
    tail_l2: float
    tail_bound: float

    @property
    def tail_bound_holds(self) -> bool:
        """Whether ||f_gt||_2 <= eps/sqrt(3); not implied by ||f||_2 <= 1 alone."""
        return self.tail_l2 <= self.tail_bound

    @property
    def chebyshev_mass(self) -> float:
        """Normalized measure of {f > K}; always at most ||f||_2^2 / K^2."""
        return float(np.mean(self.f_gt.values > 0))

    def __iter__(self):
        yield self.f_le
        yield self.f_gt


def truncate_l2(f: GridDensity, eps: float) -> TruncationResult:
    """Split f = min(f, K) + (f - K)_+ with K = 3/eps, for ||f||_2 <= 1."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if f.lp_norm(2) > 1.0 + 1e-12:
        raise ValueError(f"need ||f||_2 <= 1, got {f.lp_norm(2)}; rescale first")
    K = 3.0 / eps
    le = np.minimum(f.values, K)
    gt = f.values - le
    f_gt = GridDensity(gt)
    return TruncationResult(GridDensity(le), f_gt, K, f_gt.lp_norm(2), eps / math.sqrt(3.0))


def _smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def spectral_taper(N: int, d: int, n: int) -> np.ndarray:
    """Radial multiplier: 1 on |xi| <= 2^{n-1}, 0 on |xi| >= 2^n, smooth between."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    r = np.sqrt(sum(k.astype(np.float64) ** 2 for k in frequency_grid(N, d)))
    inner = 2.0 ** (n - 1)
    return 1.0 - _smooth_step((r - inner) / inner)


def spectral_truncate(f: GridDensity, n: int) -> GridDensity:
    """f_n with f_n_hat = f_hat * taper; the identity once 2^n >= N."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    if 2**n >= f.N:
        return f
    w = spectral_taper(f.N, f.d, n)
    return GridDensity(np.fft.ifftn(np.fft.fftn(f.values) * w).real)


def tail_l2(F: Spectrum, radius: float) -> float:
    """l^2 norm of the coefficients with |xi| > radius."""
    r = np.sqrt(sum(k.astype(np.float64) ** 2 for k in frequency_grid(F.N, F.d)))
    return float(np.sqrt(np.sum(np.abs(F.coeffs[r > radius]) ** 2)))


def lambda3_perturbation_bound(f: GridDensity, f_n: GridDensity) -> float:
    """Hoelder bound on |Lambda_3(f) - Lambda_3(f_n)| when |f_n_hat| <= |f_hat|.

    Trilinearity splits the difference into three terms with one factor
    e = f - f_n each; xi -> -2 xi is at most 2^d-to-1, whence the 2^{d/3}.
    """
    F, E = dual_transform(f), dual_transform(GridDensity(f.values - f_n.values))
    fold = 1.0 if f.N % 2 else 2.0 ** (f.d / 3.0)
    return 3.0 * fold * lq_norm(F, 3.0) ** 2 * lq_norm(E, 3.0)
