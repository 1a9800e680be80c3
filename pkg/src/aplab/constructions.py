"""Test objects: Behrend sets, an exact r_3 oracle, seeded random sets, and
self-similar Cantor-type measures with product-formula Fourier transforms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .group_fourier import GridDensity

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

ORACLE_MAX_N = 32


@dataclass(frozen=True)
class IntegerSet:
    """Sorted distinct integers in [0, N)."""

    N: int
    elements: np.ndarray

    def __post_init__(self):
        e = np.unique(np.asarray(self.elements, dtype=np.int64))
        if len(e) and (e[0] < 0 or e[-1] >= self.N):
            raise ValueError(f"elements must lie in [0, {self.N})")
        e.setflags(write=False)
        object.__setattr__(self, "elements", e)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def density(self) -> float:
        return len(self.elements) / self.N

    def to_text(self) -> str:
        return "".join(f"{int(v)}\n" for v in self.elements)

    @classmethod
    def from_text(cls, text: str, N: int) -> "IntegerSet":
        return cls(N, [int(line) for line in text.split()])

    def indicator(self, modulus: int | None = None) -> GridDensity:
        """0/1 density on Z_modulus (default N); pass a prime >= 2N+1 to avoid wraparound."""
        m = self.N if modulus is None else modulus
        if m < self.N:
            raise ValueError(f"modulus {m} is smaller than N = {self.N}")
        return GridDensity.indicator(m, self.elements)


def embedding_prime(N: int) -> int:
    """Smallest prime >= 2N + 1, so that a + c = 2b in Z_p forces it in Z for a, b, c in [N]."""
    p = 2 * N + 1
    while not _is_prime(p):
        p += 1
    return p


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % k for k in range(3, math.isqrt(n) + 1, 2))


def count_nontrivial_3aps(elements) -> int:
    """Number of triples a < b < c in the set with a + c = 2b (exact integer count)."""
    e = np.unique(np.asarray(elements, dtype=np.int64))
    if len(e) < 3:
        return 0
    lo, hi = int(e[0]), int(e[-1])
    member = np.zeros(2 * (hi - lo) + 1, dtype=bool)
    member[e - lo] = True
    x = e - lo
    total = 0
    for j in range(1, len(x)):
        c = 2 * x[j] - x[:j]
        c = c[c <= hi - lo]
        total += int(np.count_nonzero(member[c]))
    return total


def is_ap_free(elements) -> bool:
    return count_nontrivial_3aps(elements) == 0


def _sphere_candidates(N: int, m: int, n: int, centered: bool) -> np.ndarray | None:
    """Most populated sphere among x = sum_i a_i m^i < N with n digits.

    The n-1 low digits lie in [0, (m-1)/2] so that x + z = 2y has no carries
    there; the top digit carries nothing further and may take any value.  The
    digit vector then satisfies a + c = 2b in Z^n, and a sphere (centered at
    the origin, or at the center of the digit box) contains no such triple
    unless a = b = c.
    """
    k = (m - 1) // 2 + 1
    top = (N - 1) // m ** (n - 1)
    ranges = [k] * (n - 1) + [top + 1]
    if math.prod(ranges) > 4_000_000:
        return None
    vals = np.zeros(1, dtype=np.int64)
    sq = np.zeros(1, dtype=np.int64)
    for i, r in enumerate(ranges):
        digits = np.arange(r, dtype=np.int64)
        coord = 2 * digits - (r - 1) if centered else digits
        vals = (vals[:, None] + digits[None, :] * m**i).ravel()
        sq = (sq[:, None] + coord[None, :] ** 2).ravel()
    keep = vals < N
    vals, sq = vals[keep], sq[keep]
    _, shell, counts = np.unique(sq, return_inverse=True, return_counts=True)
    return np.sort(vals[shell.ravel() == int(np.argmax(counts))])


def behrend_set(N: int, max_base: int = 200) -> IntegerSet:
    """Largest digit-sphere set found over a grid of bases, digit counts and centers."""
    if N < 3:
        raise ValueError(f"need N >= 3, got {N}")
    best = np.arange(2, dtype=np.int64)
    for m in range(3, max_base + 1):
        for n in range(1, 64):
            if n > 1 and m ** (n - 1) >= N:
                break
            for centered in (False, True):
                cand = _sphere_candidates(N, m, n, centered)
                if cand is not None and len(cand) > len(best):
                    best = cand
    out = IntegerSet(N, best)
    if not is_ap_free(out.elements):  # certified, never assumed
        raise AssertionError("Behrend construction produced a 3AP")
    return out


def behrend_trend(N: int) -> float:
    """The reference size N^{1 - 1/sqrt(log N)}."""
    return N ** (1.0 - 1.0 / math.sqrt(math.log(N)))


_R3_CACHE = {0: 0}


def max_ap_free_oracle(N: int) -> int:
    """Exact r_3(N) by branch and bound over subsets of [N], N <= 32.

    Elements are added in increasing order; the forbidden mask holds every
    2b - a for chosen a < b.  A branch starting at position i is cut when
    its size plus r_3 of the remaining interval cannot beat the incumbent.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    if N > ORACLE_MAX_N:
        raise ValueError(f"exhaustive search is limited to N <= {ORACLE_MAX_N}; use behrend_set for larger N")
    for n in range(1, N + 1):
        if n not in _R3_CACHE:
            _R3_CACHE[n] = _r3_search(n)
    return _R3_CACHE[N]


def _r3_search(N: int) -> int:
    # translation invariance: some optimum contains 0 and r_3(N) >= r_3(N-1)
    best = _R3_CACHE[N - 1]
    full = (1 << N) - 1

    def extend(chosen: list[int], forbidden: int, start: int, size: int):
        nonlocal best
        if size > best:
            best = size
        for x in range(start, N):
            if size + _R3_CACHE[N - x] <= best:
                return
            if forbidden >> x & 1:
                continue
            new_forbid = forbidden
            for a in chosen:
                c = 2 * x - a
                if c < N:
                    new_forbid |= 1 << c
            chosen.append(x)
            extend(chosen, new_forbid & full, x + 1, size + 1)
            chosen.pop()

    extend([0], 0, 1, 1)
    return best


def random_set(N: int, delta: float, seed: int) -> IntegerSet:
    """Each element of [N] kept independently with probability delta."""
    if not (0 < delta <= 1):
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    rng = np.random.default_rng(seed)
    return IntegerSet(N, np.flatnonzero(rng.random(N) < delta))


# ---------------------------------------------------------- self-similar measures


@dataclass(frozen=True)
class SelfSimilarMeasure:
    """Product over d axes of the invariant measure of x -> (x + a)/b, a in ``digits``."""

    base: int
    digits: tuple
    weights: tuple
    d: int = 1
    depth: int | None = None

    def __post_init__(self):
        digits = tuple(int(a) for a in self.digits)
        weights = tuple(float(w) for w in self.weights)
        if self.base < 2:
            raise ValueError("base must be at least 2")
        if len(digits) != len(weights) or not digits:
            raise ValueError("digits and weights must be nonempty and of equal length")
        if len(set(digits)) != len(digits) or min(digits) < 0 or max(digits) >= self.base:
            raise ValueError(f"digits must be distinct in [0, {self.base})")
        if min(weights) <= 0 or abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if self.d not in (1, 2):
            raise ValueError("only d = 1 and d = 2 product measures are supported")
        object.__setattr__(self, "digits", digits)
        object.__setattr__(self, "weights", weights)

    @property
    def axis_dimension(self) -> float:
        return math.log(len(self.digits)) / math.log(self.base)

    @property
    def similarity_dimension(self) -> float:
        return self.d * self.axis_dimension

    @classmethod
    def middle_thirds(cls, d: int = 1) -> "SelfSimilarMeasure":
        return cls(3, (0, 2), (0.5, 0.5), d=d)

    @classmethod
    def lebesgue(cls, base: int = 2, d: int = 1) -> "SelfSimilarMeasure":
        return cls(base, tuple(range(base)), (1.0 / base,) * base, d=d)

    def fourier(self, xi):
        """Vectorized transform; see :func:`self_similar_fourier`."""
        return self_similar_fourier(self, xi, self.depth)

    def to_toml(self) -> str:
        lines = [
            f"base = {self.base}",
            f"digits = [{', '.join(str(a) for a in self.digits)}]",
            f"weights = [{', '.join(repr(w) for w in self.weights)}]",
            f"d = {self.d}",
        ]
        if self.depth is not None:
            lines.append(f"depth = {self.depth}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_toml(cls, text_or_path) -> "SelfSimilarMeasure":
        p = Path(str(text_or_path))
        text = p.read_text() if "\n" not in str(text_or_path) and p.exists() else str(text_or_path)
        cfg = tomllib.loads(text)
        return cls(int(cfg["base"]), tuple(cfg["digits"]), tuple(cfg["weights"]), int(cfg.get("d", 1)), cfg.get("depth"))


def default_depth(base: int, xi_max: float) -> int:
    """ceil(log_b |xi| + 40 / log2 b): the neglected tail is then below ~1e-10."""
    return max(1, math.ceil(math.log(max(abs(xi_max), 1.0), base) + 40.0 / math.log2(base)))


def _axis_product(mu: SelfSimilarMeasure, xi: np.ndarray, K: int) -> np.ndarray:
    a = np.asarray(mu.digits, dtype=np.float64)
    w = np.asarray(mu.weights, dtype=np.float64)
    out = np.ones(xi.shape, dtype=np.complex128)
    for k in range(1, K + 1):
        phase = np.multiply.outer(xi, a) * float(mu.base) ** (-k)
        out *= np.exp(-2j * np.pi * phase) @ w
    return out


def self_similar_fourier(mu: SelfSimilarMeasure, xi, depth: int | None = None):
    """mu_hat(xi) = prod_axes prod_{k=1..K} sum_a w_a exp(-2 pi i xi a b^-k).

    ``xi`` is a scalar (d = 1) or an array whose last axis has length d.
    The depth-(K+1) value is computed alongside and must differ from the
    depth-K value by at most 2 pi |xi|_1 b^-K.
    """
    x = np.asarray(xi, dtype=np.float64)
    if mu.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != mu.d:
        raise ValueError(f"frequency vectors must have {mu.d} components")
    K = depth if depth is not None else (mu.depth or default_depth(mu.base, float(np.abs(x).max(initial=0.0))))
    if K < 1:
        raise ValueError("depth must be at least 1")
    val = np.ones(x.shape[:-1], dtype=np.complex128)
    nxt = np.ones(x.shape[:-1], dtype=np.complex128)
    for axis in range(mu.d):
        v = _axis_product(mu, x[..., axis], K)
        val *= v
        nxt *= v * _one_level(mu, x[..., axis], K + 1)
    bound = 2 * np.pi * np.abs(x).sum(axis=-1) * float(mu.base) ** (-K)
    if np.any(np.abs(nxt - val) > bound + 1e-13):
        raise ArithmeticError("product tail exceeds its Lipschitz bound")
    return complex(val) if val.ndim == 0 else val


def _one_level(mu, xi, k):
    a = np.asarray(mu.digits, dtype=np.float64)
    w = np.asarray(mu.weights, dtype=np.float64)
    return np.exp(-2j * np.pi * np.multiply.outer(xi, a) * float(mu.base) ** (-k)) @ w


def _level_cells(mu: SelfSimilarMeasure, level: int) -> tuple[np.ndarray, np.ndarray]:
    """Left endpoints (times b^level, as integers) and masses of the level cells on one axis."""
    pos = np.zeros(1, dtype=np.int64)
    mass = np.ones(1)
    a = np.asarray(mu.digits, dtype=np.int64)
    w = np.asarray(mu.weights)
    for _ in range(level):
        pos = (pos[:, None] * mu.base + a[None, :]).ravel()
        mass = (mass[:, None] * w[None, :]).ravel()
    return pos, mass


def discretize(mu: SelfSimilarMeasure, N: int, level: int) -> GridDensity:
    """Deposit each level cell's mass at the grid point nearest its left endpoint.

    Values are scaled by N^d so the normalized-counting mass is 1.  When
    b^level divides N the dual transform equals the depth-``level`` product
    exactly, hence matches the full transform to 2 pi |xi| b^-level.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if mu.base**level > N:
        raise ValueError(f"grid N={N} cannot resolve level {level} cells (need b^level <= N)")
    pos, mass = _level_cells(mu, level)
    idx = np.rint(pos * (N / mu.base**level)).astype(np.int64) % N
    axis = np.bincount(idx, weights=mass, minlength=N)
    vals = axis
    for _ in range(mu.d - 1):
        vals = np.multiply.outer(vals, axis)
    vals = vals * float(N) ** mu.d
    return GridDensity(vals)


def discretize_tolerance_band(mu: SelfSimilarMeasure, N: int, level: int, tol: float = 0.02) -> float:
    """Largest |xi| at which the grid transform is guaranteed within ``tol`` of mu_hat."""
    return tol * mu.base**level / (2 * np.pi * mu.d)
