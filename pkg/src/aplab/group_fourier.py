"""Densities on Z_N^d, their Fourier transforms, and 3AP counting functionals.

Conventions
-----------
Every average uses the normalized counting measure on Z_N^d, so

    f_hat(xi) = N^-d * sum_x f(x) exp(-2 pi i xi.x / N)
    Lambda_3(f0, f1, f2) = N^-2d * sum_{x, r} f0(x) f1(x - r) f2(x - 2r)

and the L^1 mass of a density equals ``f_hat(0)``.  Spectra are stored in the
usual FFT index order; :func:`centered_frequencies` maps an index to its
centered representative in {-floor(N/2), ..., ceil(N/2) - 1}.
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_DIM = 3
APSL_MAGIC = b"APSL"
APSL_VERSION = 1
_KIND_DENSITY = 1
_KIND_SPECTRUM = 2


class ShapeMismatchError(ValueError):
    """Raised when operands do not share (d, N) or are not square grids."""


def _check_grid(values: np.ndarray) -> tuple[int, int]:
    if values.ndim < 1 or values.ndim > MAX_DIM:
        raise ShapeMismatchError(f"grid dimension must be 1..{MAX_DIM}, got {values.ndim}")
    N = values.shape[0]
    if any(n != N for n in values.shape):
        raise ShapeMismatchError(f"grid must have equal side lengths, got shape {values.shape}")
    if N < 1:
        raise ShapeMismatchError("grid side length must be positive")
    return values.ndim, N


@dataclass(frozen=True)
class GridDensity:
    """Real function on Z_N^d, stored as an array of shape ``(N,) * d``."""

    values: np.ndarray
    normalization: str = field(default="counting")

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        _check_grid(arr)
        if not np.all(np.isfinite(arr)):
            raise ValueError("density values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def is_nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0))

    def l1_mass(self) -> float:
        return float(np.sum(self.values) / self.values.size)

    def lp_norm(self, p: float) -> float:
        """Normalized-counting L^p norm."""
        a = np.abs(self.values)
        if np.isinf(p):
            return float(a.max())
        return float((np.sum(a**p) / a.size) ** (1.0 / p))

    @classmethod
    def constant(cls, N: int, d: int = 1, value: float = 1.0) -> "GridDensity":
        return cls(np.full((N,) * d, float(value)))

    @classmethod
    def point_mass(cls, N: int, d: int = 1, at=None) -> "GridDensity":
        """``N^d * 1_{at}``: unit L^1 mass concentrated on a single grid point."""
        v = np.zeros((N,) * d)
        idx = (0,) * d if at is None else tuple(np.atleast_1d(at))
        v[idx] = float(N**d)
        return cls(v)

    @classmethod
    def indicator(cls, N: int, points, d: int = 1) -> "GridDensity":
        v = np.zeros((N,) * d)
        pts = np.asarray(points, dtype=np.int64)
        if d == 1:
            v[pts % N] = 1.0
        else:
            pts = pts.reshape(-1, d) % N
            v[tuple(pts.T)] = 1.0
        return cls(v)


@dataclass(frozen=True)
class Spectrum:
    """Complex coefficients over the dual grid, in FFT index order."""

    coeffs: np.ndarray
    provenance: str = "synthetic"

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=np.complex128, copy=True)
        _check_grid(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def d(self) -> int:
        return self.coeffs.ndim

    @property
    def N(self) -> int:
        return self.coeffs.shape[0]

    def at(self, xi) -> complex:
        """Coefficient at an integer frequency (any representative mod N)."""
        idx = tuple(int(k) % self.N for k in np.atleast_1d(xi))
        return complex(self.coeffs[idx])


@dataclass(frozen=True)
class ConfigurationMatrices:
    """Pair of integer d x d matrices defining the pattern (x, x - M1 u, x - M2 u)."""

    M1: np.ndarray
    M2: np.ndarray

    def __post_init__(self):
        m1 = np.atleast_2d(np.array(self.M1, dtype=np.int64))
        m2 = np.atleast_2d(np.array(self.M2, dtype=np.int64))
        if m1.shape != m2.shape or m1.shape[0] != m1.shape[1]:
            raise ValueError(f"M1, M2 must be square of equal size, got {m1.shape}, {m2.shape}")
        for name, m in (("M1", m1), ("M2", m2), ("M2 - M1", m2 - m1)):
            if _int_det(m) == 0:
                raise ValueError(f"{name} is singular (det = 0)")
        m1.setflags(write=False)
        m2.setflags(write=False)
        object.__setattr__(self, "M1", m1)
        object.__setattr__(self, "M2", m2)

    @property
    def d(self) -> int:
        return self.M1.shape[0]

    @classmethod
    def three_ap(cls, d: int = 1) -> "ConfigurationMatrices":
        eye = np.eye(d, dtype=np.int64)
        return cls(eye, 2 * eye)


def _int_det(m: np.ndarray) -> int:
    """Exact integer determinant by fraction-free elimination (Bareiss)."""
    a = [[int(v) for v in row] for row in m]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _adjugate(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    if n == 1:
        return np.array([[1]], dtype=np.int64)
    adj = np.zeros_like(m)
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(m, i, axis=0), j, axis=1)
            adj[j, i] = (-1) ** (i + j) * _int_det(minor)
    return adj


def inverse_mod(m: np.ndarray, N: int, name: str = "matrix") -> np.ndarray:
    """Inverse of an integer matrix over Z/NZ; raises naming ``name`` if singular mod N."""
    det = _int_det(m)
    if math.gcd(det, N) != 1:
        raise ValueError(f"{name} is not invertible mod {N} (det = {det})")
    return (pow(det % N, -1, N) * _adjugate(m)) % N


def _same_shape(*objs) -> tuple[int, int]:
    shapes = {(o.d, o.N) for o in objs}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"operands disagree on (d, N): {sorted(shapes)}")
    return shapes.pop()


def centered_frequencies(N: int) -> np.ndarray:
    """Centered representative of each FFT index: 0, 1, ..., -2, -1."""
    return np.fft.fftfreq(N, d=1.0 / N).round().astype(np.int64)


def frequency_grid(N: int, d: int) -> tuple[np.ndarray, ...]:
    k = centered_frequencies(N)
    return tuple(np.meshgrid(*([k] * d), indexing="ij"))


def dual_transform(f: GridDensity) -> Spectrum:
    """f_hat(xi) = N^-d sum_x f(x) e^{-2 pi i xi.x/N}."""
    coeffs = np.fft.fftn(f.values) / f.values.size
    return Spectrum(coeffs, provenance="dual_transform")


def inverse_transform(F: Spectrum, imag_tol: float = 1e-9) -> GridDensity:
    """Inverse of :func:`dual_transform`; the result must be real."""
    vals = np.fft.ifftn(F.coeffs) * F.coeffs.size
    scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
    if np.abs(vals.imag).max(initial=0.0) > imag_tol * scale:
        raise ValueError("spectrum is not conjugate-symmetric; inverse is not a real density")
    return GridDensity(vals.real)


def _flat_coords(N: int, d: int) -> np.ndarray:
    grids = np.meshgrid(*([np.arange(N)] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _ravel(coords: np.ndarray, N: int) -> np.ndarray:
    """Row-major flat index of integer coordinates (last axis), reduced mod N."""
    c = coords % N
    flat = np.zeros(c.shape[:-1], dtype=np.int64)
    for axis in range(c.shape[-1]):
        flat = flat * N + c[..., axis]
    return flat


def _block_size(n_points: int) -> int:
    return max(1, min(n_points, (1 << 20) // max(n_points, 1)))


def lambda3_direct(f0: GridDensity, f1: GridDensity, f2: GridDensity) -> float:
    """O(N^2d) reference: N^-2d sum_{x,r} f0(x) f1(x-r) f2(x-2r), wraparound mod N.

    Kept as the ground-truth oracle for every spectral shortcut in the package.
    The leading d-1 components of r are looped over; the last one is vectorized.
    """
    d, N = _same_shape(f0, f1, f2)
    a0, a1, a2 = f0.values, f1.values, f2.values
    k = np.arange(N)
    i1 = (k[None, :] - k[:, None]) % N
    i2 = (k[None, :] - 2 * k[:, None]) % N
    lead = tuple(range(d - 1))
    partial = []
    for rr in np.ndindex((N,) * (d - 1)):
        p = np.roll(a1, rr, axis=lead) if lead else a1
        q = np.roll(a2, tuple(2 * r for r in rr), axis=lead) if lead else a2
        terms = a0[..., None, :] * np.take(p, i1, axis=-1) * np.take(q, i2, axis=-1)
        partial.append(float(np.sum(terms)))
    return math.fsum(partial) / float(N) ** (2 * d)


def _neg2_index(N: int, d: int) -> tuple[np.ndarray, ...]:
    k = np.arange(N)
    idx = (-2 * k) % N
    return tuple(np.meshgrid(*([idx] * d), indexing="ij"))


def lambda3_spectral(f0: GridDensity, f1: GridDensity, f2: GridDensity) -> float:
    """sum_xi f0_hat(xi) f1_hat(-2 xi) f2_hat(xi), indices mod N."""
    d, N = _same_shape(f0, f1, f2)
    F0, F1, F2 = (dual_transform(f).coeffs for f in (f0, f1, f2))
    total = np.sum(F0 * F1[_neg2_index(N, d)] * F2)
    return float(total.real)


def lambda3(f: GridDensity) -> float:
    return lambda3_spectral(f, f, f)


def lq_norm(F: Spectrum, q: float, exclude_zero: bool = False) -> float:
    """(sum_xi |F(xi)|^q)^(1/q), optionally dropping xi = 0."""
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    a = np.abs(F.coeffs).ravel()
    if exclude_zero:
        a = a[1:]
    if np.isinf(q):
        return float(a.max(initial=0.0))
    return float(np.sum(a**q) ** (1.0 / q))


def u2_norm(f: GridDensity) -> float:
    """Fourth root of the sum of fourth powers of the Fourier coefficients."""
    return lq_norm(dual_transform(f), 4.0)


def trivial_ap_contribution(set_size: int, N: int) -> float:
    """Lambda_3 share of the r = 0 progressions of mu = 1_E / delta: delta^-2 N^-1."""
    if set_size <= 0 or set_size > N:
        raise ValueError(f"need 0 < set_size <= N, got set_size={set_size}, N={N}")
    delta = set_size / N
    return 1.0 / (delta * delta * N)


def configuration_count_spatial(f0, f1, f2, mats: ConfigurationMatrices, weight: GridDensity) -> complex:
    """N^-2d sum_{x,u} g(u) f0(x) f1(x - M1 u) f2(x - M2 u)."""
    d, N = _same_shape(f0, f1, f2, weight)
    if mats.d != d:
        raise ShapeMismatchError(f"matrices are {mats.d}x{mats.d}, grid dimension is {d}")
    a0, a1, a2, g = (o.values.ravel() for o in (f0, f1, f2, weight))
    X = _flat_coords(N, d)
    B = _block_size(len(X))
    partial = []
    for start in range(0, len(X), B):
        u = X[start : start + B]
        i1 = _ravel(X[None, :, :] - (u @ mats.M1.T)[:, None, :], N)
        i2 = _ravel(X[None, :, :] - (u @ mats.M2.T)[:, None, :], N)
        rows = np.sum(a0[None, :] * a1[i1] * a2[i2], axis=1)
        partial.append(float(np.dot(g[start : start + B], rows)))
    return complex(math.fsum(partial) / float(N) ** (2 * d))


def configuration_count_dual(f0, f1, f2, mats: ConfigurationMatrices, weight: GridDensity) -> complex:
    """Dual-side evaluation of :func:`configuration_count_spatial`.

    When M1 and M2 are invertible mod N this uses the parametrization
    xi1 = -M1^-T xi, xi2 = M2^-T (xi + eta):

        sum_eta g_hat(eta) sum_xi f0_hat((M1^-T - M2^-T) xi - M2^-T eta)
                                  f1_hat(-M1^-T xi) conj(f2_hat(-M2^-T (xi + eta)))

    The changes of variables are bijections of Z_N^d, so the Jacobian factors
    |det M^T|^-1 of the continuous identity are all 1 here.  Otherwise the
    unparametrized sum over (xi1, xi2) with eta = M1^T xi1 + M2^T xi2 is used.
    """
    d, N = _same_shape(f0, f1, f2, weight)
    F0, F1, F2, G = (dual_transform(o).coeffs.ravel() for o in (f0, f1, f2, weight))
    K = _flat_coords(N, d)
    try:
        A1 = inverse_mod(mats.M1.T, N, "M1")
        A2 = inverse_mod(mats.M2.T, N, "M2")
    except ValueError:
        return _configuration_dual_general(F0, F1, F2, G, mats, K, N)
    B = _block_size(len(K))
    xi_a1 = K @ A1.T
    xi_a2 = K @ A2.T
    partial = []
    for start in range(0, len(K), B):
        eta = K[start : start + B]
        eta_a2 = eta @ A2.T
        arg0 = xi_a1[None, :, :] - xi_a2[None, :, :] - eta_a2[:, None, :]
        arg1 = -xi_a1
        arg2 = -(xi_a2[None, :, :] + eta_a2[:, None, :])
        inner = np.sum(F0[_ravel(arg0, N)] * F1[_ravel(arg1, N)][None, :] * np.conj(F2[_ravel(arg2, N)]), axis=1)
        partial.append(np.dot(G[start : start + B], inner))
    return complex(np.sum(partial))


def _configuration_dual_general(F0, F1, F2, G, mats, K, N) -> complex:
    B = _block_size(len(K))
    k_m1 = K @ mats.M1
    k_m2 = K @ mats.M2
    partial = []
    for start in range(0, len(K), B):
        xi1 = K[start : start + B]
        eta = (xi1 @ mats.M1)[:, None, :] + k_m2[None, :, :]
        arg0 = -(xi1[:, None, :] + K[None, :, :])
        terms = G[_ravel(eta, N)] * F0[_ravel(arg0, N)] * F2[None, :]
        partial.append(np.dot(F1[_ravel(xi1, N)], np.sum(terms, axis=1)))
    del k_m1
    return complex(np.sum(partial))


def configuration_count(f0, f1, f2, mats: ConfigurationMatrices, weight: GridDensity | None = None, rtol: float = 1e-8) -> complex:
    """Weighted count of configurations (x, x - M1 u, x - M2 u), by both routes.

    Returns the spatial value after checking the dual-side value agrees to
    ``rtol`` relative (absolute floor 1e-12).
    """
    if weight is None:
        weight = GridDensity.constant(f0.N, f0.d)
    spatial = configuration_count_spatial(f0, f1, f2, mats, weight)
    dual = configuration_count_dual(f0, f1, f2, mats, weight)
    if abs(spatial - dual) > rtol * max(abs(spatial), 1e-12 / rtol):
        raise ArithmeticError(f"spatial {spatial} and dual {dual} evaluations disagree")
    return spatial


# ---------------------------------------------------------------- serialization


def write_apsl(path, obj: GridDensity | Spectrum) -> None:
    """Little-endian container: magic, version u32, kind u32, d u32, N u32, payload."""
    if isinstance(obj, GridDensity):
        kind, payload = _KIND_DENSITY, obj.values.astype("<f8").tobytes(order="C")
    elif isinstance(obj, Spectrum):
        kind, payload = _KIND_SPECTRUM, obj.coeffs.astype("<c16").tobytes(order="C")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    header = APSL_MAGIC + struct.pack("<4I", APSL_VERSION, kind, obj.d, obj.N)
    Path(path).write_bytes(header + payload)


def read_apsl(path) -> GridDensity | Spectrum:
    raw = Path(path).read_bytes()
    if raw[:4] != APSL_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}")
    version, kind, d, N = struct.unpack("<4I", raw[4:20])
    if version != APSL_VERSION:
        raise ValueError(f"{path}: unsupported APSL version {version}")
    body = raw[20:]
    shape = (N,) * d
    if kind == _KIND_DENSITY:
        arr = np.frombuffer(body, dtype="<f8")
        if arr.size != N**d:
            raise ValueError(f"{path}: payload holds {arr.size} values, expected {N**d}")
        return GridDensity(arr.reshape(shape))
    if kind == _KIND_SPECTRUM:
        arr = np.frombuffer(body, dtype="<c16")
        if arr.size != N**d:
            raise ValueError(f"{path}: payload holds {arr.size} values, expected {N**d}")
        return Spectrum(arr.reshape(shape), provenance=f"apsl:{Path(path).name}")
    raise ValueError(f"{path}: unknown payload kind {kind}")


def write_csv(path, obj: GridDensity | Spectrum) -> None:
    """Index columns i0..i{d-1}, then ``value`` (density) or ``re,im`` (spectrum)."""
    is_spec = isinstance(obj, Spectrum)
    arr = obj.coeffs if is_spec else obj.values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{k}" for k in range(arr.ndim)] + (["re", "im"] if is_spec else ["value"]))
        for idx in np.ndindex(arr.shape):
            v = arr[idx]
            w.writerow(list(idx) + ([repr(float(v.real)), repr(float(v.imag))] if is_spec else [repr(float(v))]))


def read_csv(path) -> GridDensity | Spectrum:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = sum(1 for h in header if h[:1] == "i" and h[1:].isdigit())
    N = round(len(body) ** (1.0 / d))
    if N**d != len(body):
        raise ValueError(f"{path}: {len(body)} rows is not a full {d}-dimensional grid")
    is_spec = header[d:] == ["re", "im"]
    arr = np.zeros((N,) * d, dtype=np.complex128 if is_spec else np.float64)
    for row in body:
        idx = tuple(int(v) for v in row[:d])
        arr[idx] = complex(float(row[d]), float(row[d + 1])) if is_spec else float(row[d])
    return Spectrum(arr, provenance=f"csv:{Path(path).name}") if is_spec else GridDensity(arr)
