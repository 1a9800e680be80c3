"""Energies, Fourier decay constants, mollified measures, the 3AP step-length
measure and its polar (spherical-average) representation, and the S + L
split of the radial Bessel transform.

Measures enter through objects exposing ``d`` and ``fourier(xi)``, where
``xi`` is an array whose last axis has length d (a plain array for d = 1).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct, dst
from scipy.integrate import trapezoid

from .bessel import bessel_order, radial_limit, sqrt_weighted_j, sqrt_weighted_k
from .constructions import SelfSimilarMeasure
from .group_fourier import GridDensity, Spectrum, dual_transform, frequency_grid, lambda3_direct

# 2 pi 2^{d/2+1}: surface transform of S^{d-1} at radius 2 rho, with dxi = 2^d rho^{d-1} drho dtheta
POLAR_CONSTANT = {d: 2.0 ** (2 + d / 2) * math.pi for d in (1, 2, 3)}
RICHARDSON_RTOL = 0.01
TAIL_BLOCK_SHARE = 0.10


class QuadratureError(ArithmeticError):
    """Quadrature failed its refinement check; carries both estimates."""

    def __init__(self, message, coarse=None, fine=None):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine


class ResolutionError(ValueError):
    """The grid or table cannot resolve the requested scale."""


# ------------------------------------------------------------------ test measures


@dataclass(frozen=True)
class GaussianMixture:
    """Sum of isotropic Gaussians on R^d; kept well inside [0, 1/2)^d by construction."""

    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        w = np.asarray(self.widths, dtype=np.float64).ravel()
        p = np.asarray(self.weights, dtype=np.float64).ravel()
        if not (len(c) == len(w) == len(p)):
            raise ValueError("centers, widths and weights must have equal length")
        p = p / p.sum()
        for name, a in (("centers", c), ("widths", w), ("weights", p)):
            object.__setattr__(self, name, a)

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    def fourier(self, xi) -> np.ndarray:
        x = np.asarray(xi, dtype=np.float64)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        sq = np.sum(x * x, axis=-1)
        out = np.zeros(x.shape[:-1], dtype=np.complex128)
        for c, s, p in zip(self.centers, self.widths, self.weights):
            out += p * np.exp(-2j * np.pi * (x @ c) - 2 * np.pi**2 * s * s * sq)
        return out

    def sample(self, N: int) -> GridDensity:
        """Point values at x = j/N (the torus periodization is negligible by design)."""
        axes = np.meshgrid(*([np.arange(N) / N] * self.d), indexing="ij")
        vals = np.zeros((N,) * self.d)
        for c, s, p in zip(self.centers, self.widths, self.weights):
            sq = sum((axes[a] - c[a]) ** 2 for a in range(self.d))
            vals += p * np.exp(-sq / (2 * s * s)) / (2 * np.pi * s * s) ** (self.d / 2)
        return GridDensity(vals)


@dataclass(frozen=True)
class PowerLawSpectrum:
    """Probability measure on R with mu_hat(xi) = (1+|xi|)^{-beta/2} max(0, 1 - |xi|/R).

    The transform is even, convex and decreasing on [0, inf), so by Polya's
    criterion it is the characteristic function of a probability density.
    """

    beta: float
    band: float
    d: int = 1

    def fourier(self, xi) -> np.ndarray:
        a = np.abs(np.asarray(xi, dtype=np.float64))
        return ((1.0 + a) ** (-self.beta / 2) * np.maximum(0.0, 1.0 - a / self.band)).astype(np.complex128)


@dataclass(frozen=True)
class MollifiedMeasure:
    """phi_n * mu as a spectral handle: Fejer taper of radius 2^n / sqrt(d) times mu_hat."""

    base: object
    n: int

    @property
    def d(self) -> int:
        return self.base.d

    def fourier(self, xi) -> np.ndarray:
        x = np.asarray(xi, dtype=np.float64)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        taper = fejer_multiplier(x, self.n, self.d)
        out = np.zeros(taper.shape, dtype=np.complex128)
        live = taper > 0
        if live.any():
            out[live] = np.asarray(self.base.fourier(x[live] if self.d > 1 else x[live][:, 0])) * taper[live]
        return out


# ---------------------------------------------------------------------- mollify


def fejer_multiplier(xi, n: int, d: int) -> np.ndarray:
    """prod_i max(0, 1 - |xi_i|/R) with R = 2^n/sqrt(d); supported in B(0, 2^n)."""
    x = np.asarray(xi, dtype=np.float64)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    R = 2.0**n / math.sqrt(d)
    return np.prod(np.maximum(0.0, 1.0 - np.abs(x) / R), axis=-1)


def mollify(source, n: int, N: int | None = None) -> GridDensity:
    """phi_n * mu on the grid Z_N^d with a nonnegative Fejer-type kernel.

    ``source`` is a GridDensity or Spectrum (already on a grid) or a measure
    with a ``fourier`` method (then N is required).  Grid inputs are
    returned unchanged once 2^n reaches the Nyquist bound N/2; continuous
    measures raise :class:`ResolutionError` in that case.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if isinstance(source, (GridDensity, Spectrum)):
        F = dual_transform(source) if isinstance(source, GridDensity) else source
        if 2**n >= F.N / 2:
            return source if isinstance(source, GridDensity) else _to_density(F.coeffs)
        k = np.stack(frequency_grid(F.N, F.d), axis=-1)
        return _to_density(F.coeffs * fejer_multiplier(k, n, F.d))
    if N is None:
        raise ValueError("N is required for a continuous measure")
    if 2**n > N / 2:
        raise ResolutionError(f"grid N={N} has Nyquist {N // 2} < 2^n = {2**n}")
    d = source.d
    k = np.stack(frequency_grid(N, d), axis=-1).astype(np.float64)
    w = fejer_multiplier(k, n, d)
    coeffs = np.zeros(w.shape, dtype=np.complex128)
    live = w > 0
    coeffs[live] = np.asarray(source.fourier(k[live] if d > 1 else k[live][:, 0])) * w[live]
    return _to_density(coeffs)


def _to_density(coeffs: np.ndarray) -> GridDensity:
    vals = np.fft.ifftn(coeffs).real * coeffs.size
    return GridDensity(vals)


# ------------------------------------------------------------------ energy/decay


def _lattice_norms(d: int, cutoff: float):
    """Integer frequencies with |xi| <= cutoff and their norms."""
    Xi = int(math.floor(cutoff))
    if d == 1:
        pts = np.arange(-Xi, Xi + 1, dtype=np.float64)[:, None]
    else:
        ax = np.arange(-Xi, Xi + 1, dtype=np.float64)
        g = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
        pts = g[np.sum(g * g, axis=1) <= cutoff * cutoff + 1e-9]
    return pts, np.sqrt(np.sum(pts * pts, axis=1))


def _abs_spectrum(mu, pts: np.ndarray) -> np.ndarray:
    """|mu_hat| at lattice points; product measures are evaluated axis by axis."""
    if isinstance(mu, SelfSimilarMeasure) and mu.d > 1:
        one = SelfSimilarMeasure(mu.base, mu.digits, mu.weights, 1, mu.depth)
        ax = np.unique(pts)
        vals = dict(zip(ax, np.abs(one.fourier(ax))))
        return np.prod(np.vectorize(vals.get)(pts), axis=1)
    arg = pts[:, 0] if mu.d == 1 else pts
    return np.abs(np.asarray(mu.fourier(arg)))


@dataclass(frozen=True)
class EnergyReport:
    alpha: float
    value: float
    cutoff: float
    growth_exponent: float
    block_slope: float
    block_sums: np.ndarray = field(repr=False)


def energy(mu, alpha: float, cutoff: float) -> EnergyReport:
    """sum over |xi| <= cutoff of |mu_hat(xi)|^2 |xi|_+^{-(d-alpha)}, |xi|_+ = max(|xi|, 1).

    The growth exponent is the (nonnegative part of the) least-squares slope
    of log2 of the dyadic block sums over the upper half of the blocks.
    """
    d = mu.d
    if not (0 < alpha < d):
        raise ValueError(f"alpha must lie in (0, {d}), got {alpha}")
    pts, norm = _lattice_norms(d, cutoff)
    terms = _abs_spectrum(mu, pts) ** 2 * np.maximum(norm, 1.0) ** (-(d - alpha))
    J = int(math.floor(math.log2(max(cutoff, 2.0))))
    blocks = np.array([terms[(norm > 2 ** (j - 1)) & (norm <= 2**j)].sum() for j in range(1, J + 1)])
    j = np.arange(1, J + 1)
    upper = j > J // 2
    good = upper & (blocks > 0)
    slope = float(np.polyfit(j[good], np.log2(blocks[good]), 1)[0]) if good.sum() >= 2 else -math.inf
    return EnergyReport(alpha, float(terms.sum()), float(cutoff), max(0.0, slope), slope, blocks)


def energy_transition(mu, cutoff: float, alphas) -> float:
    """alpha at which the block-sum slope crosses zero (linear interpolation)."""
    a = np.asarray(alphas, dtype=np.float64)
    s = np.array([energy(mu, float(x), cutoff).block_slope for x in a])
    sign = np.flatnonzero((s[:-1] < 0) & (s[1:] >= 0))
    if len(sign) == 0:
        raise ValueError("no sign change of the energy growth slope over the alpha grid")
    i = sign[0]
    return float(a[i] - s[i] * (a[i + 1] - a[i]) / (s[i + 1] - s[i]))


@dataclass(frozen=True)
class DecayReport:
    beta: float
    value: float
    value_doubled: float
    admissible: bool


def decay_constant(mu, beta: float, cutoff: float) -> float:
    """sup over integer |xi| <= cutoff of |mu_hat(xi)| (1 + |xi|)^{beta/2}."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    pts, norm = _lattice_norms(mu.d, cutoff)
    return float(np.max(_abs_spectrum(mu, pts) * (1.0 + norm) ** (beta / 2)))


def decay_report(mu, beta: float, cutoff: float, growth_tol: float = 0.05, doublings: int = 3) -> DecayReport:
    """Cutoff-doubling admissibility: C_F may grow by at most growth_tol over ``doublings`` doublings.

    Several doublings are needed for lacunary spectra (middle-thirds peaks
    sit at powers of 3, so a single doubling can miss every new peak).
    """
    v = decay_constant(mu, beta, cutoff)
    v2 = decay_constant(mu, beta, cutoff * 2**doublings)
    return DecayReport(beta, v, v2, v2 <= (1 + growth_tol) * v)


def measured_beta(mu, cutoff: float, betas=None) -> float:
    """Largest beta on the grid (default 0, 0.05, ..., 3) passing the doubling test."""
    grid = np.round(np.arange(0.0, 3.0001, 0.05), 10) if betas is None else np.asarray(betas)
    best = 0.0
    for b in grid:
        if b == 0 or decay_report(mu, float(b), cutoff).admissible:
            best = float(b)
        else:
            break
    return best


# ------------------------------------------------------------ 3AP step lengths


def ap_step_profile(f: GridDensity) -> np.ndarray:
    """P[u] = N^-2d sum_x f(x) f(x-u) f(x-2u); sum(P) = Lambda_3(f)."""
    d, N = f.d, f.N
    a = f.values
    k = np.arange(N)
    i1 = (k[None, :] - k[:, None]) % N
    i2 = (k[None, :] - 2 * k[:, None]) % N
    lead = tuple(range(d - 1))
    out = np.zeros((N,) * d)
    for rr in np.ndindex((N,) * (d - 1)):
        p = np.roll(a, rr, axis=lead) if lead else a
        q = np.roll(a, tuple(2 * r for r in rr), axis=lead) if lead else a
        terms = a[..., None, :] * np.take(p, i1, axis=-1) * np.take(q, i2, axis=-1)
        # terms[..., r_last, x_last]: sum over all x for each last-axis step
        out[rr] = terms.sum(axis=tuple(range(d - 1)) + (d,)) if d > 1 else terms.sum(axis=1)
    return out / float(N) ** (2 * d)


def torus_radius(N: int, d: int) -> np.ndarray:
    """|u|_T for every grid step u = j/N."""
    m = np.minimum(np.arange(N), N - np.arange(N)) / N
    g = np.meshgrid(*([m] * d), indexing="ij")
    return np.sqrt(sum(x * x for x in g))


@dataclass(frozen=True)
class APLengthMeasure:
    bin_edges: np.ndarray
    masses: np.ndarray
    total_mass: float
    level: int | None = None

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def density(self) -> np.ndarray:
        return self.masses / self.widths

    def write_csv(self, path, meta: str = "") -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# ap_length_measure level={self.level} total_mass={self.total_mass!r} {meta}\n")
            w = csv.writer(fh)
            w.writerow(["left", "right", "mass"])
            for a, b, m in zip(self.bin_edges[:-1], self.bin_edges[1:], self.masses):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(m))])


def ap_length_measure(f: GridDensity, bins, level: int | None = None, profile: np.ndarray | None = None) -> APLengthMeasure:
    """Histogram of 3AP step lengths |u|_T weighted by f(x) f(x-u) f(x-2u) / N^2d."""
    if not f.is_nonnegative:
        raise ValueError("ap_length_measure needs a nonnegative density")
    edges = np.asarray(bins, dtype=np.float64)
    diam = math.sqrt(f.d) / 2
    if edges[0] > 0 or edges[-1] <= diam or np.any(np.diff(edges) <= 0):
        raise ValueError(f"bins must increase and cover [0, {diam:.6g}]")
    P = ap_step_profile(f) if profile is None else profile
    r = torus_radius(f.N, f.d).ravel()
    idx = np.searchsorted(edges, r, side="right") - 1
    masses = np.zeros(len(edges) - 1)
    np.add.at(masses, idx, P.ravel())
    return APLengthMeasure(edges, masses, math.fsum(P.ravel()), level)


# --------------------------------------------------------- spherical averages


@dataclass(frozen=True)
class SphericalAverageTable:
    """sigma(rho) and Sigma(rho) on a grid, or lattice atoms for torus densities.

    In lattice mode ``rho_grid`` holds |k|/2 for the frequencies k kept and
    ``sigma_values`` the atom weights 2^-d A_hat(k), A the step profile.
    """

    d: int
    rho_grid: np.ndarray
    sigma_values: np.ndarray
    sigma_abs_values: np.ndarray
    angular_nodes: int
    freq_cutoff: float
    step: float
    mode: str = "continuum"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(
                f"# spherical_average d={self.d} mode={self.mode} angular_nodes={self.angular_nodes} "
                f"freq_cutoff={self.freq_cutoff!r} step={self.step!r}\n"
            )
            w = csv.writer(fh)
            w.writerow(["rho", "sigma_re", "sigma_im", "sigma_abs"])
            for r, s, a in zip(self.rho_grid, self.sigma_values, self.sigma_abs_values):
                w.writerow([repr(float(r)), repr(float(s.real)), repr(float(s.imag)), repr(float(a))])


def _eta_grid(d: int, cutoff: float, step: float) -> np.ndarray:
    n = int(math.ceil(cutoff / step))
    ax = np.arange(-n, n + 1) * step
    if d == 1:
        return ax[:, None]
    g = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return g[np.sum(g * g, axis=1) <= cutoff * cutoff]


def _sphere_nodes(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Half-sphere nodes with doubled weights (the integrand is even in theta)."""
    if d == 1:
        return np.array([[1.0]]), np.array([2.0])
    if d != 2:
        raise ValueError("spherical averages are implemented for d in {1, 2}")
    t = np.pi * np.arange(n // 2) / (n // 2)
    return np.stack([np.cos(t), np.sin(t)], axis=1), np.full(n // 2, 2 * (2 * np.pi / n))


def _call(mu, x: np.ndarray) -> np.ndarray:
    return np.asarray(mu.fourier(x[..., 0] if mu.d == 1 else x))


def _sigma_raw(mu, rhos, angular_nodes: int, cutoff: float, step: float):
    d = mu.d
    eta = _eta_grid(d, cutoff, step)
    w_eta = step**d
    F2 = _call(mu, 2 * eta)
    theta, w_theta = _sphere_nodes(d, angular_nodes)
    sig = np.zeros(len(rhos), dtype=np.complex128)
    sab = np.zeros(len(rhos))
    for i, rho in enumerate(rhos):
        for th, wt in zip(theta, w_theta):
            shift = rho * th
            prod = F2 * np.conj(_call(mu, eta - shift)) * np.conj(_call(mu, eta + shift))
            sig[i] += wt * w_eta * prod.sum()
            sab[i] += wt * w_eta * np.abs(prod).sum()
    return sig, sab


def spherical_average_table(mu, rho_grid, freq_cutoff: float, step: float, angular_nodes: int | None = None) -> SphericalAverageTable:
    """sigma(rho) = int_S int mu_hat(2 eta) conj mu_hat(eta - rho theta) conj mu_hat(eta + rho theta).

    Trapezoid in eta over |eta| <= freq_cutoff.  The table is recomputed with
    half the step and must agree to 1% of its peak magnitude; in d = 2 the
    angular node count doubles from 16 until the table moves by <= 1%.
    """
    d = mu.d
    rhos = np.asarray(rho_grid, dtype=np.float64)
    if d == 2 and angular_nodes is None:
        n = 16
        prev = _sigma_raw(mu, rhos, n, freq_cutoff, step)
        while True:
            cur = _sigma_raw(mu, rhos, 2 * n, freq_cutoff, step)
            scale = max(np.max(cur[1]), 1e-300)
            if np.max(np.abs(cur[0] - prev[0])) <= RICHARDSON_RTOL * scale or n >= 1024:
                n *= 2
                break
            n, prev = 2 * n, cur
        angular_nodes = n
    nodes = 2 if d == 1 else int(angular_nodes)
    coarse = _sigma_raw(mu, rhos, nodes, freq_cutoff, step)
    fine = _sigma_raw(mu, rhos, nodes, freq_cutoff, step / 2)
    scale = max(np.max(fine[1]), 1e-300)
    gap = float(np.max(np.abs(coarse[0] - fine[0])))
    if gap > RICHARDSON_RTOL * scale:
        raise QuadratureError(f"halving the step moved sigma by {gap:.3g} (peak {scale:.3g})", coarse[0], fine[0])
    return SphericalAverageTable(d, rhos, fine[0], fine[1], nodes, float(freq_cutoff), step / 2)


def sigma_spherical(mu, rho: float, angular_nodes: int = 64, freq_cutoff: float = 16.0, step: float = 0.25) -> complex:
    t = spherical_average_table(mu, [rho], freq_cutoff, step, angular_nodes if mu.d == 2 else None)
    return complex(t.sigma_values[0])


def sigma_abs(mu, rho: float, angular_nodes: int = 64, freq_cutoff: float = 16.0, step: float = 0.25) -> float:
    t = spherical_average_table(mu, [rho], freq_cutoff, step, angular_nodes if mu.d == 2 else None)
    return float(t.sigma_abs_values[0])


def sigma_abs_1d(mu, rhos, freq_cutoff: float, step: float) -> np.ndarray:
    """Sigma(rho) in d = 1 on a uniform eta grid, for long rho ranges.

    Same quadrature as :func:`spherical_average_table` but with mu_hat sampled
    once on the grid; rho values are rounded to multiples of ``step``.
    """
    n = int(math.ceil(freq_cutoff / step))
    shifts = np.rint(np.asarray(rhos) / step).astype(np.int64)
    big = n + int(shifts.max())
    grid = np.arange(-2 * big, 2 * big + 1) * step
    F = np.abs(_call(mu, grid[:, None]))
    centre = 2 * big
    eta = np.arange(-n, n + 1)
    F2 = F[centre + 2 * eta]
    out = np.empty(len(shifts))
    for i, s in enumerate(shifts):
        out[i] = 2 * step * np.sum(F2 * F[centre + eta - s] * F[centre + eta + s])
    return out


def lattice_sigma_table(f: GridDensity, k_max: float | None = None, profile: np.ndarray | None = None) -> SphericalAverageTable:
    """Atoms rho_k = |k|/2 with weights 2^-d A_hat(k) for a torus density.

    A_hat(k) = sum_t f_hat(t) f_hat(k + t) f_hat(-k - 2t) is the Fourier
    transform of the step profile; it is obtained from the profile by one DFT.
    """
    P = ap_step_profile(f) if profile is None else profile
    A_hat = np.fft.fftn(P)  # sum_u P(u) e(-k.u/N) = N^-d sum_u A(u) e(...)
    k = np.stack(frequency_grid(f.N, f.d), axis=-1).reshape(-1, f.d).astype(np.float64)
    norm = np.sqrt(np.sum(k * k, axis=1))
    vals = A_hat.ravel()
    keep = norm <= (k_max if k_max is not None else f.N / 2 - 1)
    order = np.argsort(norm[keep], kind="stable")
    w = vals[keep][order] / 2.0**f.d
    return SphericalAverageTable(f.d, norm[keep][order] / 2, w, np.abs(w), 0, float(k_max or f.N / 2 - 1), 1.0, mode="lattice")


def polar_ap_density(table: SphericalAverageTable, r, C_d: float | None = None) -> np.ndarray:
    """delta(r) = C_d r^{d/2} int rho^{d/2} J(4 pi r rho) sigma(rho) d rho.

    Continuum tables use the trapezoid rule and must sample the Bessel
    oscillation at >= 8 points per period; lattice tables sum over atoms.
    """
    d = table.d
    C = POLAR_CONSTANT[d] if C_d is None else C_d
    rr = np.atleast_1d(np.asarray(r, dtype=np.float64))
    rho = table.rho_grid
    sig = table.sigma_values
    if table.mode == "lattice":
        m = bessel_order(d)
        out = np.empty(len(rr))
        for i, x in enumerate(rr):
            z = 4 * np.pi * x * rho
            with np.errstate(divide="ignore", invalid="ignore"):
                # rho^{-m} J_m(z) = rho^{-m} z^{-1/2} (sqrt(z) J(z))
                ker = np.where(rho > 0, rho ** (-m) * sqrt_weighted_j(d, z) / np.sqrt(np.maximum(z, 1e-300)), radial_limit(d, x))
            out[i] = C * x ** (d / 2) * float(np.real(np.sum(sig * ker)))
        return out
    if len(rho) > 1:
        dr = float(np.max(np.diff(rho)))
        if dr * 4 * np.pi * rr.max() > np.pi / 4:
            raise ResolutionError(f"rho step {dr:.3g} under-resolves J(4 pi r rho) at r={rr.max():.3g}")
    out = np.empty(len(rr))
    for i, x in enumerate(rr):
        z = 4 * np.pi * x * rho
        # rho^{d/2} J(z) = rho^{(d-1)/2} (4 pi x)^{-1/2} sqrt(z) J(z)
        ker = rho ** ((d - 1) / 2) * sqrt_weighted_j(d, z) / math.sqrt(4 * np.pi * x)
        out[i] = C * x ** (d / 2) * float(np.real(trapezoid(ker * sig, rho)))
    return out


def polar_bin_masses(table: SphericalAverageTable, edges, C_d: float | None = None, nodes: int = 8) -> np.ndarray:
    """Integral of the polar density over each bin (Gauss-Legendre per bin)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    e = np.asarray(edges, dtype=np.float64)
    out = np.empty(len(e) - 1)
    for i, (a, b) in enumerate(zip(e[:-1], e[1:])):
        pts = 0.5 * (b - a) * x + 0.5 * (b + a)
        out[i] = 0.5 * (b - a) * np.dot(w, polar_ap_density(table, pts, C_d))
    return out


def relative_l1_gap(direct: np.ndarray, polar: np.ndarray) -> float:
    return float(np.sum(np.abs(direct - polar)) / np.sum(np.abs(direct)))


def calibrate_polar_constant(d: int, N: int | None = None, width: float = 0.06) -> float:
    """Least-squares C_d matching the polar route to the direct histogram of a Gaussian.

    The Gaussian sits at the centre of [0, 1/2)^d so its torus step profile
    equals the Euclidean one on r <= 0.45.
    """
    N = N or (512 if d == 1 else 128)
    g = GaussianMixture([[0.25] * d], [width], [1.0])
    edges, lo, hi = comparison_bins(N, d)
    direct = ap_length_measure(g.sample(N), edges).masses[lo:hi]
    table = spherical_average_table(g, np.arange(0.0, 12.0, 0.05), 8.0, 0.5, None)
    unit = polar_bin_masses(table, edges[lo : hi + 1], 1.0)
    return float(np.dot(direct, unit) / np.dot(unit, unit))


def comparison_bins(N: int, d: int, r_min: float = 0.05, r_max: float = 0.45):
    """Bin edges covering [0, diam] and the index range lying inside [r_min, r_max].

    d = 1 bins are aligned to the lattice (edges at (8k + 1/2)/N) so that every
    step length falls strictly inside a bin; d = 2 uses width 0.05.
    """
    diam = math.sqrt(d) / 2
    if d == 1:
        m = max(1, N // 64)
        inner = (np.arange(0, N) * m + 0.5) / N
        inner = inner[inner < diam]
        edges = np.concatenate([[0.0], inner, [diam + 1.0 / N]])
    else:
        edges = np.concatenate([np.arange(0.0, diam, 0.05), [diam + 1e-9]])
    lo = int(np.searchsorted(edges, r_min - 1e-12))
    hi = int(np.searchsorted(edges, r_max + 1e-12, side="right")) - 1
    return edges, lo, hi


# --------------------------------------------------------------- S + L split


@dataclass(frozen=True)
class SLDecomposition:
    d: int
    s_grid: np.ndarray
    r_grid: np.ndarray
    frak_s: np.ndarray
    frak_S: np.ndarray
    frak_d: np.ndarray
    frak_D: np.ndarray
    S_part: np.ndarray
    L_part: np.ndarray
    S_direct: np.ndarray
    K_kernel: np.ndarray
    norm_S: float
    norm_frak_S: float
    norm_L: float
    energy: float
    identity_gap: float


def _trap_weights(x: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def sl_decompose(frak_s, s_grid, d: int, s_exponent: float) -> SLDecomposition:
    """Split D(r) = sqrt(r) int sqrt(s) J(rs) S(s) ds into S + L.

    S(r) = sqrt(2/pi) int cos(rs - phi) S(s) ds with phi = pi m/2 + pi/4 is
    evaluated through DCT-I/DST-I on the dual grid r_k = pi k / s_max (the
    trapezoid rule in s) and cross-checked by direct quadrature; L uses the
    remainder kernel sqrt(z) K(z).  Here S(s) = s^{(d-1)/2} frak_s(s).
    """
    s = np.asarray(s_grid, dtype=np.float64)
    fs = np.asarray(frak_s, dtype=np.float64)
    if np.any(fs < 0):
        raise ValueError("frak_s must be nonnegative")
    if s[0] != 0 or np.any(np.abs(np.diff(s) - (s[1] - s[0])) > 1e-9 * s[-1]):
        raise ValueError("s_grid must be uniform and start at 0")
    n = len(s)
    h = s[1] - s[0]
    r = np.pi * np.arange(n) / ((n - 1) * h)
    FS = s ** ((d - 1) / 2) * fs
    m = bessel_order(d)
    phi = m * np.pi / 2 + np.pi / 4

    cos_t = 0.5 * h * dct(FS, type=1)
    sin_t = np.zeros(n)
    sin_t[1:-1] = 0.5 * h * dst(FS[1:-1], type=1)
    S_part = math.sqrt(2 / np.pi) * (math.cos(phi) * cos_t + math.sin(phi) * sin_t)

    w = _trap_weights(s)
    z = np.outer(r, s)
    S_direct = math.sqrt(2 / np.pi) * (np.cos(z - phi) @ (w * FS))
    Kz = sqrt_weighted_k(d, z)
    L_part = Kz @ (w * FS)
    D = sqrt_weighted_j(d, z) @ (w * FS)
    frak_d = r ** ((d - 1) / 2) * D

    wr = _trap_weights(r)
    scale = max(float(np.max(np.abs(D))), 1e-300)
    gap = float(np.max(np.abs(D - S_part - L_part))) / scale
    return SLDecomposition(
        d=d,
        s_grid=s,
        r_grid=r,
        frak_s=fs,
        frak_S=FS,
        frak_d=frak_d,
        frak_D=D,
        S_part=S_part,
        L_part=L_part,
        S_direct=S_direct,
        K_kernel=Kz,
        norm_S=float(np.sqrt(np.dot(wr, S_part**2))),
        norm_frak_S=float(np.sqrt(np.dot(w, FS**2))),
        norm_L=float(np.sqrt(np.dot(wr, L_part**2))),
        energy=frak_energy(fs, s, s_exponent),
        identity_gap=gap,
    )


def frak_energy(frak_s, s_grid, exponent: float) -> float:
    """int frak_s(r) r^{exponent - 1} dr by the trapezoid rule (r = 0 skipped if singular)."""
    s = np.asarray(s_grid, dtype=np.float64)
    f = np.asarray(frak_s, dtype=np.float64)
    with np.errstate(divide="ignore"):
        weight = np.where(s > 0, s ** (exponent - 1), 0.0 if exponent < 1 else float(exponent == 1))
    return float(np.dot(_trap_weights(s), f * weight))


# ------------------------------------------------------------- weighted integral


def weighted_sigma_integral(rho_grid, Sigma_values, rho_exponent: float, d: int) -> float:
    """int r^{d-1-rho} Sigma(r) dr over the table, with dyadic tail monitoring.

    Raises :class:`QuadratureError` if the last dyadic block [R/2, R]
    carries more than 10% of the total.
    """
    if not (0 < rho_exponent < d):
        raise ValueError(f"rho_exponent must lie in (0, {d})")
    r = np.asarray(rho_grid, dtype=np.float64)
    S = np.asarray(Sigma_values, dtype=np.float64)
    with np.errstate(divide="ignore"):
        integrand = np.where(r > 0, r ** (d - 1 - rho_exponent), 0.0) * S
    w = _trap_weights(r)
    total = float(np.dot(w, integrand))
    if total == 0.0:
        return 0.0
    R = r[-1]
    last = r >= R / 2
    share = float(np.dot(w[last], integrand[last])) / total
    if share > TAIL_BLOCK_SHARE:
        raise QuadratureError(f"last dyadic block carries {share:.1%} of the integral", total, share)
    return total


# ------------------------------------------------------------------- fits


def loglog_slope(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    good = (x > 0) & (y > 0)
    if good.sum() < 2:
        raise ValueError("need at least two positive points for a log-log fit")
    return float(np.polyfit(np.log(x[good]), np.log(y[good]), 1)[0])


def lq_norm_continuous(mu, q: float, cutoff: float, step: float = 0.25) -> float:
    """(int_{|xi| <= cutoff} |mu_hat|^q)^{1/q} by the trapezoid rule, d = 1."""
    x = np.arange(-cutoff, cutoff + step / 2, step)
    return float(trapezoid(np.abs(_call(mu, x[:, None])) ** q, x) ** (1 / q))


def mass_sequence(mu, n_values, N: int) -> np.ndarray:
    """Lambda_3(phi_n * mu) for each n, with phi_n * mu realized on Z_N^d."""
    from .group_fourier import lambda3

    src = mu
    return np.array([lambda3(mollify(src, int(n), N if not isinstance(src, (GridDensity, Spectrum)) else None)) for n in n_values])


__all__ = [
    "APLengthMeasure",
    "DecayReport",
    "EnergyReport",
    "GaussianMixture",
    "MollifiedMeasure",
    "POLAR_CONSTANT",
    "PowerLawSpectrum",
    "QuadratureError",
    "ResolutionError",
    "SLDecomposition",
    "SphericalAverageTable",
    "ap_length_measure",
    "ap_step_profile",
    "calibrate_polar_constant",
    "comparison_bins",
    "decay_constant",
    "decay_report",
    "energy",
    "energy_transition",
    "fejer_multiplier",
    "lambda3_direct",
    "lattice_sigma_table",
    "loglog_slope",
    "mass_sequence",
    "measured_beta",
    "mollify",
    "polar_ap_density",
    "polar_bin_masses",
    "relative_l1_gap",
    "sigma_abs",
    "sigma_abs_1d",
    "sigma_spherical",
    "sl_decompose",
    "spherical_average_table",
    "torus_radius",
    "weighted_sigma_integral",
]
