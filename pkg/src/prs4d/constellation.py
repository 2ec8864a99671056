"""Labeled multidimensional constellations and their structural analysis.

The central value type is :class:`LabeledConstellation`: M points in N real
dimensions (N=4 for everything built in) together with a bijective m-bit
binary labeling, m = log2(M).  Bit 1 of a label is the most significant bit.

All functions here are pure and all types are immutable, so values can be
shared freely across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DegenerateInputError, ValidationError

# Relative tolerance used to merge nearly-equal squared distances into one
# spectrum bucket.  Scaled by the mean symbol energy so it is unit-free.
DISTANCE_MERGE_RTOL = 1e-9

# Bit position (0 = MSB) carrying the sign of each of the four dimensions in
# the built-in orthant labeling: dim 0 -> b2, dim 1 -> b1, dim 2 -> b5,
# dim 3 -> b4.  A set bit means a negative coordinate.
DEFAULT_ORTHANT_BIT_MAP = (1, 0, 4, 3)


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class LabeledConstellation:
    """An M-point constellation in R^N with a bijective m-bit labeling.

    Attributes
    ----------
    points : (M, N) float array, one constellation point per row.
    labels : (M,) int array, a permutation of {0, ..., M-1}; bit 1 of a
        label (the most significant of the m bits) is b1.
    m : bits per symbol, M = 2**m.
    metadata : free-form mapping (name, target energy, provenance...).
    """

    points: np.ndarray
    labels: np.ndarray
    m: int
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        lab = np.asarray(self.labels, dtype=np.int64)
        if pts.ndim != 2 or pts.shape[1] < 2:
            raise ValidationError(f"points must be an M x N matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points contain non-finite values")
        M = pts.shape[0]
        if self.m < 1 or M != 2 ** self.m:
            raise ValidationError(f"expected 2**m = {2 ** self.m} points, got {M}")
        if lab.shape != (M,):
            raise ValidationError(f"labels must have length {M}, got shape {lab.shape}")
        if not np.array_equal(np.sort(lab), np.arange(M)):
            raise ValidationError("labels must be a permutation of 0..M-1")
        if np.unique(pts, axis=0).shape[0] != M:
            raise ValidationError("constellation has duplicate points")
        object.__setattr__(self, "points", _as_readonly(pts))
        object.__setattr__(self, "labels", _as_readonly(lab))

    @property
    def M(self) -> int:
        return self.points.shape[0]

    @property
    def ndim(self) -> int:
        return self.points.shape[1]

    @property
    def energies(self) -> np.ndarray:
        """Per-point energies ||s_i||^2."""
        return np.sum(self.points ** 2, axis=1)

    @property
    def mean_energy(self) -> float:
        """Mean symbol energy E_s = (1/M) sum ||s_i||^2."""
        return float(np.mean(self.energies))

    def bit_matrix(self) -> np.ndarray:
        """(M, m) matrix of label bits, column 0 = b1 (MSB)."""
        shifts = np.arange(self.m - 1, -1, -1)
        return ((self.labels[:, None] >> shifts[None, :]) & 1).astype(np.int8)

    def with_points(self, points: np.ndarray) -> "LabeledConstellation":
        return LabeledConstellation(points, self.labels, self.m, dict(self.metadata))

    def with_labels(self, labels: np.ndarray) -> "LabeledConstellation":
        return LabeledConstellation(self.points, labels, self.m, dict(self.metadata))

    def name(self) -> str:
        return str(self.metadata.get("name", f"{self.M}pt"))


@dataclass(frozen=True)
class SpectrumEntry:
    d2: float
    count: int
    hd1_count: int


@dataclass(frozen=True)
class DistanceSpectrum:
    """Histogram of squared Euclidean distances over all unordered point pairs.

    Each bucket also records how many of its pairs have labels at Hamming
    distance exactly one.
    """

    entries: tuple[SpectrumEntry, ...]
    es: float

    @property
    def msed(self) -> float:
        return self.entries[0].d2

    @property
    def msed_count(self) -> int:
        return self.entries[0].count

    @property
    def total_pairs(self) -> int:
        return sum(e.count for e in self.entries)

    def hd1_entries(self) -> list[SpectrumEntry]:
        return [e for e in self.entries if e.hd1_count > 0]


@dataclass(frozen=True)
class MomentSet:
    """Fourth and sixth standardized moments of the per-polarization modulus."""

    mu4: float
    mu6: float
    convention: str = "per-polarization-complex-modulus"


def normalize(c: LabeledConstellation, es: float) -> LabeledConstellation:
    """Uniformly rescale the constellation to mean symbol energy ``es``.

    Labels are untouched; the output satisfies (1/M) sum ||s_i||^2 = es to
    machine precision.
    """
    if not es > 0:
        raise ValidationError(f"target energy must be positive, got {es}")
    e = c.mean_energy
    if e <= 0.0:
        raise DegenerateInputError("cannot normalize an all-zero constellation")
    scale = np.sqrt(es / e)
    out = c.with_points(c.points * scale)
    object.__setattr__(out, "metadata", {**dict(c.metadata), "es": es})
    return out


def is_constant_modulus(c: LabeledConstellation, tol: float = 1e-9) -> bool:
    """True iff every point's energy equals the mean energy within ``tol``."""
    e = c.energies
    return bool(np.max(np.abs(e - np.mean(e))) <= tol)


def polarization_moduli(c: LabeledConstellation) -> np.ndarray:
    """Pooled per-polarization complex projections of the centered points.

    The empirical mean point is subtracted first (zero for every built-in
    format), then the complex values (x1 + j x2) and (x3 + j x4) of each
    point are concatenated.
    """
    pts = c.points
    if pts.shape[1] % 2 != 0:
        raise ValidationError("per-polarization moments require an even dimension count")
    pts = pts - pts.mean(axis=0)
    return np.concatenate([pts[:, 2 * k] + 1j * pts[:, 2 * k + 1]
                           for k in range(pts.shape[1] // 2)])


def standardized_moment(c: LabeledConstellation, p: int) -> float:
    """p-th standardized moment E|x|^p / (E|x|^2)^(p/2) of the pooled
    per-polarization complex modulus, centered by the empirical mean.

    Equals 1 for any constellation whose per-polarization moduli are all
    equal; a circularly symmetric complex Gaussian gives 2 (p=4) and 6 (p=6).
    """
    if p < 2 or p % 2 != 0:
        raise ValidationError(f"moment order must be an even integer >= 2, got {p}")
    z = polarization_moduli(c)
    mod2 = np.abs(z) ** 2
    s2 = float(np.mean(mod2))
    if s2 <= 0.0:
        raise DegenerateInputError("zero second moment: degenerate constellation")
    return float(np.mean(mod2 ** (p // 2)) / s2 ** (p // 2))


def moment_set(c: LabeledConstellation) -> MomentSet:
    return MomentSet(mu4=standardized_moment(c, 4), mu6=standardized_moment(c, 6))


def _pair_hamming(labels: np.ndarray) -> np.ndarray:
    """Hamming distances of all unordered label pairs, pdist ordering."""
    i, j = np.triu_indices(labels.shape[0], k=1)
    return np.bitwise_count(np.bitwise_xor(labels[i], labels[j]))


def distance_spectrum(c: LabeledConstellation) -> DistanceSpectrum:
    """Exact all-pairs squared-distance histogram with Hamming-1 classification.

    Buckets are merged when consecutive sorted distances differ by at most
    DISTANCE_MERGE_RTOL * E_s, which absorbs float noise from finite-precision
    coordinates without collapsing genuinely distinct distances.
    """
    es = c.mean_energy
    d2 = pdist(c.points, "sqeuclidean")
    hd = _pair_hamming(c.labels)
    order = np.argsort(d2, kind="stable")
    d2s, hds = d2[order], hd[order]
    tol = DISTANCE_MERGE_RTOL * es
    breaks = np.flatnonzero(np.diff(d2s) > tol)
    starts = np.concatenate(([0], breaks + 1))
    stops = np.concatenate((breaks + 1, [d2s.size]))
    entries = []
    for a, b in zip(starts, stops):
        entries.append(SpectrumEntry(
            d2=float(np.mean(d2s[a:b])),
            count=int(b - a),
            hd1_count=int(np.count_nonzero(hds[a:b] == 1)),
        ))
    return DistanceSpectrum(entries=tuple(entries), es=es)


def gray_check(c: LabeledConstellation) -> bool:
    """True iff every pair of points at minimum squared distance differs in
    exactly one label bit."""
    d2 = pdist(c.points, "sqeuclidean")
    hd = _pair_hamming(c.labels)
    tol = DISTANCE_MERGE_RTOL * c.mean_energy
    at_min = d2 <= d2.min() + tol
    return bool(np.all(hd[at_min] == 1))


def orthant_expand(
    generators: np.ndarray,
    generator_labels: Sequence[int],
    orthant_bit_map: Sequence[int] | None = None,
    metadata: Mapping[str, object] | None = None,
) -> LabeledConstellation:
    """Expand K positive-orthant generator points into all 16 sign copies.

    Every generator must lie strictly inside the positive orthant.  Four label
    bits carry the signs (bit value 0 for a positive coordinate), with
    ``orthant_bit_map[d]`` giving the bit position (0 = MSB) for dimension d.
    The remaining log2(K) bit positions, MSB first, carry ``generator_labels``
    which must be a permutation of 0..K-1.

    The default map is the reference assignment for four generators
    (``DEFAULT_ORTHANT_BIT_MAP``); for other generator counts the sign bits
    default to the four leading positions.
    """
    gens = np.asarray(generators, dtype=np.float64)
    if gens.ndim != 2 or gens.shape[1] != 4:
        raise ValidationError(f"generators must be K x 4, got shape {gens.shape}")
    K = gens.shape[0]
    if K < 1 or (K & (K - 1)) != 0:
        raise ValidationError(f"generator count must be a power of two, got {K}")
    if np.any(gens <= 0.0):
        raise ValidationError("generators must lie strictly in the positive orthant "
                              "(a zero or negative coordinate collides under sign expansion)")
    if np.unique(gens, axis=0).shape[0] != K:
        raise ValidationError("generators contain duplicate rows")
    glab = np.asarray(generator_labels, dtype=np.int64)
    if not np.array_equal(np.sort(glab), np.arange(K)):
        raise ValidationError("generator_labels must be a permutation of 0..K-1")

    k_intra = K.bit_length() - 1
    m = 4 + k_intra
    if orthant_bit_map is None:
        orthant_bit_map = DEFAULT_ORTHANT_BIT_MAP if m == 6 else (0, 1, 2, 3)
    bitmap = tuple(int(b) for b in orthant_bit_map)
    if len(bitmap) != 4 or len(set(bitmap)) != 4 or not all(0 <= b < m for b in bitmap):
        raise ValidationError(f"orthant_bit_map must be 4 distinct bit positions in [0, {m})")
    intra_positions = [p for p in range(m) if p not in bitmap]

    signs = np.array([[1 - 2 * ((s >> (3 - d)) & 1) for d in range(4)]
                      for s in range(16)], dtype=np.float64)
    points = (signs[:, None, :] * gens[None, :, :]).reshape(16 * K, 4)

    labels = np.zeros(16 * K, dtype=np.int64)
    row = 0
    for s in range(16):
        orthant_part = 0
        for d in range(4):
            if signs[s, d] < 0:
                orthant_part |= 1 << (m - 1 - bitmap[d])
        for g in range(K):
            lab = orthant_part
            for t, pos in enumerate(intra_positions):
                if (glab[g] >> (k_intra - 1 - t)) & 1:
                    lab |= 1 << (m - 1 - pos)
            labels[row] = lab
            row += 1

    meta = dict(metadata) if metadata else {}
    return LabeledConstellation(points, labels, m, meta)


def project_2d(c: LabeledConstellation, polarization: int) -> tuple[np.ndarray, np.ndarray]:
    """Distinct 2D projections of one polarization and their multiplicities.

    ``polarization`` is 1 (dimensions 1-2) or 2 (dimensions 3-4).  Returns
    (coords, counts) with coords of shape (K, 2).  Points closer than
    1e-9 * sqrt(E_s) per coordinate are considered identical.
    """
    if polarization not in (1, 2):
        raise ValidationError(f"polarization must be 1 or 2, got {polarization}")
    cols = (0, 1) if polarization == 1 else (2, 3)
    xy = c.points[:, cols]
    scale = np.sqrt(max(c.mean_energy, np.finfo(float).tiny))
    snapped = np.round(xy / (1e-9 * scale)) * (1e-9 * scale)
    uniq, inv, counts = np.unique(snapped, axis=0, return_inverse=True, return_counts=True)
    # report representative coordinates from the original data, not the grid
    reps = np.empty_like(uniq)
    reps[inv] = xy
    return reps, counts


def extract_generators(c: LabeledConstellation) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Recover (generators, generator_labels, orthant_bit_map) from an
    orthant-symmetric constellation.

    Raises ValidationError if the constellation is not a sign-pattern
    expansion of its strictly-positive points under a consistent bit map.
    """
    if c.M % 16 != 0:
        raise ValidationError("orthant symmetry requires M divisible by 16")
    K = c.M // 16
    pos_mask = np.all(c.points > 0, axis=1)
    if int(pos_mask.sum()) != K:
        raise ValidationError(f"expected {K} strictly positive points, found {int(pos_mask.sum())}")
    gens = c.points[pos_mask]
    gen_full_labels = c.labels[pos_mask]

    # The bit carrying the sign of dimension d is the one that flips between a
    # positive point and its single-sign-flip partner.
    label_of = {tuple(np.round(p, 12)): int(l) for p, l in zip(c.points, c.labels)}
    bitmap = [-1] * 4
    base = gens[0]
    base_label = int(gen_full_labels[0])
    for d in range(4):
        flipped = base.copy()
        flipped[d] = -flipped[d]
        partner = label_of.get(tuple(np.round(flipped, 12)))
        if partner is None:
            raise ValidationError("constellation is not closed under sign flips")
        diff = partner ^ base_label
        if diff == 0 or (diff & (diff - 1)) != 0:
            raise ValidationError("sign flip does not toggle exactly one label bit")
        bitmap[d] = c.m - 1 - diff.bit_length() + 1
    if len(set(bitmap)) != 4:
        raise ValidationError("sign bits are not distinct")
    intra_positions = [p for p in range(c.m) if p not in bitmap]
    k_intra = K.bit_length() - 1
    if len(intra_positions) != k_intra:
        raise ValidationError("inconsistent intra-orthant bit count")
    # positive-orthant labels must have all orthant bits clear
    glab = np.zeros(K, dtype=np.int64)
    for g in range(K):
        lab = int(gen_full_labels[g])
        for d in range(4):
            if (lab >> (c.m - 1 - bitmap[d])) & 1:
                raise ValidationError("positive-orthant point carries a set sign bit")
        val = 0
        for t, pos in enumerate(intra_positions):
            if (lab >> (c.m - 1 - pos)) & 1:
                val |= 1 << (k_intra - 1 - t)
        glab[g] = val
    rebuilt = orthant_expand(gens, glab, tuple(bitmap))
    got = {(tuple(np.round(p, 12)), int(l)) for p, l in zip(rebuilt.points, rebuilt.labels)}
    want = {(tuple(np.round(p, 12)), int(l)) for p, l in zip(c.points, c.labels)}
    if got != want:
        raise ValidationError("constellation is not an orthant expansion of its positive points")
    return gens, glab, tuple(bitmap)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def _fmt17(x: float) -> str:
    return f"{float(x):.17g}"


def dumps_constellation(c: LabeledConstellation) -> str:
    """Serialize to the on-disk JSON schema with 17-significant-digit points."""
    rows = ",\n    ".join(
        "[" + ", ".join(_fmt17(v) for v in row) + "]" for row in c.points
    )
    meta = json.dumps(dict(c.metadata), sort_keys=True)
    labels = json.dumps([int(v) for v in c.labels])
    return (
        "{\n"
        f'  "m": {c.m},\n'
        f'  "points": [\n    {rows}\n  ],\n'
        f'  "labels": {labels},\n'
        f'  "metadata": {meta}\n'
        "}\n"
    )


def write_constellation(c: LabeledConstellation, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_constellation(c))


def loads_constellation(text: str) -> LabeledConstellation:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed constellation file: {exc}") from exc
    try:
        m = int(obj["m"])
        points = np.asarray(obj["points"], dtype=np.float64)
        labels = np.asarray(obj["labels"], dtype=np.int64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"constellation file missing or invalid field: {exc}") from exc
    metadata = obj.get("metadata", {})
    if not isinstance(metadata, dict):
        raise ValidationError("metadata must be a JSON object")
    if points.ndim != 2 or points.shape[0] != 2 ** m:
        raise ValidationError(
            f"inconsistent file: m={m} implies {2 ** m} points, got {points.shape}")
    return LabeledConstellation(points, labels, m, metadata)


def read_constellation(path) -> LabeledConstellation:
    with open(path) as fh:
        return loads_constellation(fh.read())
