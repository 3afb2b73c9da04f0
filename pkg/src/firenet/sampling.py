"""Dyadic frequency bands, multilevel subsampling and the measurement operator.

Frequencies live on the grid ``(2**r,)*d`` in storage order: along each axis,
index ``i`` is frequency ``i - K/2 + 1`` for Fourier and ``i`` for Walsh. A
frequency is addressed by its flat row-major index.

In one dimension the bands are

* Fourier: ``B_1 = {0, 1}`` and ``B_k = {-2**(k-1)+1, ..., -2**(k-2)} U {2**(k-2)+1, ..., 2**(k-1)}``,
* Walsh: ``B_1 = {0, 1}`` and ``B_k = {2**(k-1), ..., 2**k - 1}``,

and in ``d`` dimensions ``B_k = B_{k_1} x ... x B_{k_d}``. Band multi-indices
are enumerated row-major, which fixes the order of the rows of the
measurement operator.

The operator is ``A = P_I D V Psi*`` with ``V`` the unitary Fourier or Walsh
transform, ``Psi*`` Haar synthesis (omitted in the image domain), ``P_I`` the
row selection (repeats kept) and ``D_ii = sqrt(|B_k| / m_k)``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import NormEstimate, make_rng, operator_norm
from .sparsity import LevelModel, xi_zeta_kappa
from .transforms import (
    dft_forward,
    dft_inverse,
    fourier_frequencies,
    haar_dwt,
    haar_idwt,
    haar_level_bounds,
    walsh_frequencies,
    wht_forward,
)

__all__ = [
    "KINDS",
    "BandStructure",
    "SamplingScheme",
    "MeasurementOperator",
    "band_of_frequency",
    "build_bands",
    "band_counts_MF",
    "band_counts_MW",
    "sample_allocation",
    "draw_scheme",
    "scheme_for_fraction",
    "DEFAULT_SCALE",
    "RECOVERY_SCALE",
    "unitary_matrix",
    "local_coherence",
    "coherence_table",
]

KINDS = ("fourier", "walsh")

# Implied constant of the sample-count estimate. Calibrated so that the
# reference level model at 256 x 256 with Fourier sampling and
# eps_P = 0.01 gives about 15% of the grid (see scheme_for_fraction).
DEFAULT_SCALE = 4.869e-7

# Implied constant at which restarted FIRENET recovers exactly sparse 1-D
# vectors (N = 4096, 2% local sparsity, unit-free weights) in about half of
# the random draws. The estimate fixes the rate only up to this constant;
# it is larger than DEFAULT_SCALE because image calibration rewards
# compressibility rather than exact recovery.
RECOVERY_SCALE = 16 * DEFAULT_SCALE


def _check_kind(kind: str) -> str:
    kind = str(kind).lower()
    if kind not in KINDS:
        raise ValueError(f"unknown transform kind {kind!r}; expected one of {KINDS}")
    return kind


def band_of_frequency(kind: str, omega: int) -> int:
    """One-dimensional band index (1-based) of a frequency."""
    kind = _check_kind(kind)
    if kind == "walsh":
        if omega < 0:
            raise ValueError("Walsh frequencies are non-negative")
        return 1 if omega <= 1 else int(omega).bit_length()
    if omega in (0, 1):
        return 1
    a = abs(int(omega))
    if omega > 0:
        return (a - 1).bit_length() + 1
    return a.bit_length() + 1


@dataclass(frozen=True)
class BandStructure:
    """Partition of the frequency grid into dyadic bands.

    Attributes
    ----------
    kind : str
        ``"fourier"`` or ``"walsh"``.
    r, d : int
        Grid side ``2**r`` and dimension.
    bands : dict
        Multi-index ``k`` (tuple of ints in ``1..r``) to the sorted array of
        flat frequency indices in that band.
    """

    kind: str
    r: int
    d: int
    bands: dict = field(repr=False)

    @property
    def K(self) -> int:
        return 2**self.r

    @property
    def N(self) -> int:
        return 2 ** (self.r * self.d)

    @property
    def keys(self) -> list:
        return list(self.bands.keys())

    def size(self, k) -> int:
        return int(self.bands[tuple(k)].size)

    def frequencies(self) -> np.ndarray:
        """Frequency values along one axis in storage order."""
        return fourier_frequencies(self.K) if self.kind == "fourier" else walsh_frequencies(self.K)


def build_bands(kind: str, r: int, d: int = 1) -> BandStructure:
    """Construct the dyadic band partition of the ``(2**r,)*d`` frequency grid."""
    kind = _check_kind(kind)
    if r < 1:
        raise ValueError("r must be at least 1")
    if d not in (1, 2):
        raise ValueError("only d = 1 and d = 2 are supported")
    K = 2**r
    freqs = fourier_frequencies(K) if kind == "fourier" else walsh_frequencies(K)
    band1d = np.array([band_of_frequency(kind, int(w)) for w in freqs])
    grids = np.meshgrid(*([band1d] * d), indexing="ij")
    flat_bands = [g.ravel() for g in grids]
    bands = {}
    for k in itertools.product(range(1, r + 1), repeat=d):
        mask = np.ones(K**d, dtype=bool)
        for ax in range(d):
            mask &= flat_bands[ax] == k[ax]
        bands[k] = np.flatnonzero(mask)
    return BandStructure(kind, r, d, bands)


def _band_key_str(k) -> str:
    return ",".join(str(int(v)) for v in k)


def _parse_band_key(s: str) -> tuple:
    return tuple(int(v) for v in str(s).split(","))


@dataclass(frozen=True)
class SamplingScheme:
    """A drawn multiset of frequencies with density compensation.

    Attributes
    ----------
    band : BandStructure
    m_per_band : dict
        Multi-index to sample count ``m_k``.
    indices : numpy.ndarray of int
        Flat frequency indices, grouped by band in band order, repeats kept.
    scaling : numpy.ndarray of float
        ``D_ii`` for each entry of ``indices``.
    seed : int or None
    replacement : bool
        Whether partial bands were drawn with replacement.
    compensate : bool
        If False, ``D`` is the identity.
    """

    band: BandStructure
    m_per_band: dict
    indices: np.ndarray
    scaling: np.ndarray
    seed: Optional[int] = None
    replacement: bool = True
    compensate: bool = True

    @property
    def m(self) -> int:
        return int(self.indices.size)

    @property
    def fraction(self) -> float:
        return self.m / self.band.N

    def multiplicity(self) -> np.ndarray:
        """Number of times each frequency was drawn, shaped like the grid."""
        counts = np.bincount(self.indices, minlength=self.band.N)
        return counts.reshape((self.band.K,) * self.band.d)

    def to_dict(self) -> dict:
        return {
            "kind": self.band.kind,
            "r": self.band.r,
            "d": self.band.d,
            "seed": self.seed,
            "m_per_band": {_band_key_str(k): int(v) for k, v in self.m_per_band.items()},
            "indices": [int(i) for i in self.indices],
            "replacement": self.replacement,
            "compensate": self.compensate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "SamplingScheme":
        band = build_bands(data["kind"], int(data["r"]), int(data["d"]))
        m_per_band = {_parse_band_key(k): int(v) for k, v in data["m_per_band"].items()}
        indices = np.asarray(data["indices"], dtype=np.int64)
        return _assemble(
            band,
            m_per_band,
            indices,
            data.get("seed"),
            bool(data.get("replacement", True)),
            bool(data.get("compensate", True)),
        )

    @classmethod
    def from_json(cls, text: str) -> "SamplingScheme":
        return cls.from_dict(json.loads(text))


def _assemble(
    band: BandStructure, m_per_band: dict, indices: np.ndarray, seed, replacement=True, compensate=True
) -> SamplingScheme:
    lookup = np.empty(band.N, dtype=np.int64)
    keys = band.keys
    for n, k in enumerate(keys):
        lookup[band.bands[k]] = n
    if indices.size and (indices.min() < 0 or indices.max() >= band.N):
        raise ValueError("sample index out of range")
    owner = lookup[indices]
    if compensate:
        scale_per_band = np.array(
            [math.sqrt(band.size(k) / m_per_band[k]) if m_per_band.get(k, 0) > 0 else 0.0 for k in keys]
        )
    else:
        scale_per_band = np.ones(len(keys))
    counts = np.bincount(owner, minlength=len(keys))
    for n, k in enumerate(keys):
        if counts[n] != m_per_band.get(k, 0):
            raise ValueError(f"band {k} holds {counts[n]} samples but m_k = {m_per_band.get(k, 0)}")
    if not replacement and np.unique(indices).size != indices.size:
        raise ValueError("repeated indices in a scheme drawn without replacement")
    return SamplingScheme(band, dict(m_per_band), indices, scale_per_band[owner], seed, replacement, compensate)


def draw_scheme(
    band: BandStructure,
    m_per_band: dict,
    seed: Optional[int] = None,
    replacement: bool = True,
    compensate: bool = True,
) -> SamplingScheme:
    """Draw a multilevel subsampling scheme.

    Bands with ``m_k == |B_k|`` are taken whole. Other bands receive ``m_k``
    indices drawn uniformly with replacement. Bands are processed in band
    order from a single PCG64 stream seeded with ``seed``.

    With ``replacement=False`` the partial bands hold ``m_k`` distinct
    indices, and with ``compensate=False`` the density compensation is
    dropped. Both together give an operator with norm one when applied to
    orthonormal wavelet coefficients.

    Raises
    ------
    ValueError
        If some ``m_k`` is outside ``[1, |B_k|]`` or a band is missing.
    """
    rng = make_rng(seed)
    m_per_band = {tuple(k): int(v) for k, v in m_per_band.items()}
    chunks = []
    for k in band.keys:
        if k not in m_per_band:
            raise ValueError(f"no sample count for band {k}")
        mk = m_per_band[k]
        members = band.bands[k]
        if not 1 <= mk <= members.size:
            raise ValueError(f"m_k = {mk} for band {k} must lie in [1, {members.size}]")
        if mk == members.size:
            chunks.append(members.copy())
        elif replacement:
            chunks.append(members[rng.integers(0, members.size, size=mk)])
        else:
            chunks.append(members[np.sort(rng.choice(members.size, size=mk, replace=False))])
    indices = np.concatenate(chunks).astype(np.int64)
    return _assemble(band, m_per_band, indices, seed, replacement, compensate)


def band_counts_MF(s, k) -> float:
    """Fourier sample-count weight ``M_F(s, k)`` for a band multi-index ``k``."""
    s = list(s)
    kinf = max(k)
    total = 0.0
    for j in range(1, len(s) + 1):
        prod = math.prod(2.0 ** (-abs(ki - j)) for ki in k)
        if j > kinf:
            prod *= 2.0 ** (-2 * (j - kinf))
        total += s[j - 1] * prod
    return total


def band_counts_MW(s, k) -> float:
    """Walsh sample-count weight ``M_W(s, k) = s_{|k|} prod 2**-|k_i - |k||`` with ``|k| = max k``."""
    kinf = max(k)
    return s[kinf - 1] * math.prod(2.0 ** (-abs(ki - kinf)) for ki in k)


def _check_levels(lm: LevelModel, d: int) -> int:
    r = lm.r
    if tuple(lm.M) != haar_level_bounds(r, d):
        raise ValueError(
            f"level boundaries {lm.M} are not the Haar levels {haar_level_bounds(r, d)} for r={r}, d={d}"
        )
    return r


def sample_allocation(
    lm: LevelModel,
    kind: str,
    d: int = 1,
    eps_p: float = 0.01,
    scale: float = DEFAULT_SCALE,
    full_levels: int = 0,
) -> dict:
    """Per-band sample counts from the sufficient condition for recovery.

    ``m_k = min(|B_k|, ceil(scale * kappa * M(s, k) * L))`` with
    ``L = d r**2 log(2 m) log(s kappa)**2 + log(1 / eps_p)``. The ``log(2m)``
    term is evaluated at ``m = N`` and then once more at the resulting total.

    Parameters
    ----------
    lm : LevelModel
        Level model on the Haar levels of the ``(2**r,)*d`` grid.
    kind : {"fourier", "walsh"}
    d : int
    eps_p : float
        Failure probability in ``(0, 1)``.
    scale : float
        Implied constant of the estimate.
    full_levels : int
        Bands with ``max(k) <= full_levels`` are sampled completely. At small
        grid sizes the estimate alone does not saturate the low bands, and
        an unsampled zero frequency leaves the constant image in the kernel.
    """
    kind = _check_kind(kind)
    if lm is None or lm.r == 0:
        raise ValueError("empty level model")
    if not 0 < eps_p < 1:
        raise ValueError("eps_p must lie in (0, 1)")
    if not scale > 0:
        raise ValueError("scale must be positive")
    r = _check_levels(lm, d)
    band = build_bands(kind, r, d)
    _, _, kappa = xi_zeta_kappa(lm)
    s_total = lm.total_sparsity
    weight = band_counts_MF if kind == "fourier" else band_counts_MW

    def alloc(m_total: float) -> dict:
        L = d * r * r * math.log(2 * m_total) * math.log(s_total * kappa) ** 2 + math.log(1 / eps_p)
        out = {}
        for k in band.keys:
            need = math.ceil(scale * kappa * weight(lm.s, k) * L)
            out[k] = int(min(band.size(k), max(1, need)))
            if max(k) <= full_levels:
                out[k] = band.size(k)
        return out

    first = alloc(band.N)
    return alloc(sum(first.values()))


def scheme_for_fraction(
    lm: LevelModel,
    kind: str,
    d: int,
    fraction: float,
    seed: Optional[int] = None,
    eps_p: float = 0.01,
    full_levels: int = 0,
    replacement: bool = True,
    compensate: bool = True,
) -> tuple:
    """Find the scale whose allocation uses about ``fraction * N`` samples and draw it.

    Returns
    -------
    (SamplingScheme, float)
        The scheme and the scale found by bisection on ``log(scale)``.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    band = build_bands(kind, lm.r, d)
    target = fraction * band.N
    lo, hi = 1e-8, 1e8
    if fraction >= 1:
        alloc = {k: band.size(k) for k in band.keys}
        return draw_scheme(band, alloc, seed, replacement, compensate), math.inf
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        tot = sum(sample_allocation(lm, kind, d, eps_p, mid, full_levels).values())
        if tot < target:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-10:
            break
    a_lo = sample_allocation(lm, kind, d, eps_p, lo, full_levels)
    a_hi = sample_allocation(lm, kind, d, eps_p, hi, full_levels)
    best_scale, best = min(
        ((lo, a_lo), (hi, a_hi)), key=lambda t: abs(sum(t[1].values()) - target)
    )
    return draw_scheme(band, best, seed, replacement, compensate), best_scale


class MeasurementOperator:
    """``A = P_I D V Psi*`` acting on Haar coefficients or on images.

    Parameters
    ----------
    scheme : SamplingScheme
    domain : {"coeffs", "image"}
        ``"coeffs"`` takes a flat vector of ``N`` Haar coefficients;
        ``"image"`` takes a ``(2**r,)*d`` tensor and skips ``Psi*``.
    """

    def __init__(self, scheme: SamplingScheme, domain: str = "coeffs"):
        if domain not in ("coeffs", "image"):
            raise ValueError("domain must be 'coeffs' or 'image'")
        self.scheme = scheme
        self.domain = domain
        self.kind = scheme.band.kind
        self.r = scheme.band.r
        self.d = scheme.band.d
        self._norm: Optional[NormEstimate] = None

    @property
    def grid_shape(self) -> tuple:
        return (self.scheme.band.K,) * self.d

    @property
    def domain_shape(self) -> tuple:
        return (self.scheme.band.N,) if self.domain == "coeffs" else self.grid_shape

    @property
    def range_shape(self) -> tuple:
        return (self.scheme.m,)

    def _V(self, img):
        return dft_forward(img) if self.kind == "fourier" else wht_forward(img)

    def _Vh(self, spec):
        return dft_inverse(spec) if self.kind == "fourier" else wht_forward(spec)

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        if x.shape != self.domain_shape:
            raise ValueError(f"input shape {x.shape} does not match operator domain {self.domain_shape}")
        img = haar_idwt(x, self.r, self.d) if self.domain == "coeffs" else x
        return self.scheme.scaling * self._V(img).ravel()[self.scheme.indices]

    def adjoint(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.complex128)
        if y.shape != self.range_shape:
            raise ValueError(f"input shape {y.shape} does not match operator range {self.range_shape}")
        full = np.zeros(self.scheme.band.N, dtype=np.complex128)
        np.add.at(full, self.scheme.indices, self.scheme.scaling * y)
        img = self._Vh(full.reshape(self.grid_shape))
        return haar_dwt(img, self.r) if self.domain == "coeffs" else img

    def normal(self, x) -> np.ndarray:
        return self.adjoint(self.forward(x))

    def norm(self) -> NormEstimate:
        """Cached power-iteration estimate of ``||A||``."""
        if self._norm is None:
            self._norm = operator_norm(self.forward, self.adjoint, self.domain_shape, self.range_shape, tol=1e-8, max_iters=500)
        return self._norm

    def dense(self) -> np.ndarray:
        """Explicit matrix (small sizes only)."""
        n = self.scheme.band.N
        cols = []
        for i in range(n):
            e = np.zeros(n, dtype=np.complex128)
            e[i] = 1
            cols.append(self.forward(e.reshape(self.domain_shape)))
        return np.column_stack(cols)


def unitary_matrix(kind: str, r: int, d: int = 1) -> np.ndarray:
    """Dense ``U = V Psi*`` with rows in flat frequency order and columns in level order."""
    kind = _check_kind(kind)
    if r * d > 12:
        raise ValueError("explicit U is limited to r * d <= 12")
    N = 2 ** (r * d)
    K = 2**r
    V = dft_forward if kind == "fourier" else wht_forward
    U = np.empty((N, N), dtype=np.complex128)
    for c in range(N):
        e = np.zeros(N, dtype=np.complex128)
        e[c] = 1
        U[:, c] = V(haar_idwt(e, r, d)).ravel()
    return U


def coherence_table(kind: str, r: int, d: int = 1) -> dict:
    """All local coherences ``mu(U^{k,j}) = |B_k| max |U^{k,j}|**2``.

    Returns
    -------
    dict
        ``(k, j) -> mu`` with ``k`` a band multi-index and ``j`` a level in ``1..r``.
    """
    U = unitary_matrix(kind, r, d)
    band = build_bands(kind, r, d)
    bounds = (0,) + haar_level_bounds(r, d)
    mags = np.abs(U) ** 2
    out = {}
    for k in band.keys:
        rows = mags[band.bands[k]]
        for j in range(1, r + 1):
            out[(k, j)] = float(band.size(k) * rows[:, bounds[j - 1] : bounds[j]].max())
    return out


def local_coherence(kind: str, r: int, d: int, k, j: int) -> float:
    """Local coherence of the block of ``U = V Psi*`` with rows in band ``k`` and columns in level ``j``."""
    k = (k,) if np.isscalar(k) else tuple(k)
    if len(k) != d or not all(1 <= v <= r for v in k):
        raise ValueError(f"band index {k} invalid for r={r}, d={d}")
    if not 1 <= j <= r:
        raise ValueError(f"level {j} outside 1..{r}")
    return coherence_table(kind, r, d)[(k, j)]
