"""Instance generation and ingestion: synthetic matrices, rating files,
train/test splits, and binary PGM images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import philox_rng, spawn_seeds
from .sparse_obs import SparseObservations, sample_mask

__all__ = [
    "SyntheticInstance",
    "RatingSet",
    "GrayImage",
    "Corruption",
    "DataFormatError",
    "FORMATS",
    "gen_synthetic",
    "parse_movielens",
    "split_train_test",
    "read_pgm",
    "write_pgm",
    "corrupt_image",
]

FORMATS = ("double-colon", "tab", "csv")
_SEPARATORS = {"double-colon": "::", "tab": "\t", "csv": ","}


class DataFormatError(ValueError):
    """Malformed input data; carries the offending 1-based line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


@dataclass(frozen=True)
class SyntheticInstance:
    """Ground truth Z = U V^T plus a noisy, subsampled observation set."""

    ground_truth: np.ndarray
    observations: SparseObservations
    noise_factor: float
    sampling_ratio: float
    true_rank: int
    seed: int


def gen_synthetic(m: int, n: int, r: int, nf: float, sr: float, seed: int) -> SyntheticInstance:
    """Rank-r ground truth from i.i.d. standard normal factors, observed on a
    uniform mask with additive noise nf * E on the observed entries.
    """
    if not (1 <= r <= min(m, n)):
        raise ValueError(f"rank must be in [1, min(m, n)], got {r}")
    if not (0.0 < sr <= 1.0):
        raise ValueError(f"sampling ratio must be in (0, 1], got {sr}")
    if nf < 0:
        raise ValueError(f"noise factor must be >= 0, got {nf}")
    factor_seed, mask_seed, noise_seed = spawn_seeds(seed, 3)
    rng = philox_rng(factor_seed)
    u = rng.standard_normal((m, r))
    v = rng.standard_normal((n, r))
    z = u @ v.T
    rows, cols = sample_mask(m, n, sr, mask_seed)
    vals = z[rows, cols]
    if nf > 0:
        vals = vals + nf * philox_rng(noise_seed).standard_normal(rows.size)
    obs = SparseObservations(m, n, rows, cols, vals)
    return SyntheticInstance(z, obs, nf, sr, r, seed)


@dataclass(frozen=True)
class RatingSet:
    """Ratings with user/item ids remapped to dense zero-based indices.

    ``user_ids``/``item_ids`` map dense index -> original id.  When the
    ratings were mean-centered per user, ``user_offsets`` holds the
    subtracted means (dense user index order); otherwise it is None.
    """

    m: int
    n: int
    users: np.ndarray
    items: np.ndarray
    values: np.ndarray
    user_ids: np.ndarray
    item_ids: np.ndarray
    duplicate_count: int
    value_min: float
    value_max: float
    user_offsets: np.ndarray | None = None

    @property
    def size(self) -> int:
        return int(self.values.size)


def parse_movielens(
    stream, fmt: str = "double-colon", center_user_means: bool = False
) -> RatingSet:
    """Parse "user<sep>item<sep>rating[<sep>timestamp]" lines.

    Formats: "double-colon" ("::"-separated .dat), "tab", and "csv" (a
    non-numeric header line is skipped).  Duplicate (user, item) pairs keep
    the last value and are counted.  ``center_user_means`` subtracts each
    user's mean rating (off by default; values are otherwise kept as-is).
    """
    if fmt not in _SEPARATORS:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")
    sep = _SEPARATORS[fmt]
    users, items, vals = [], [], []
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8", errors="replace")
        line = raw.strip()
        if not line:
            continue
        parts = line.split(sep)
        if len(parts) < 3:
            raise DataFormatError(
                f"expected at least 3 {fmt!r} fields, got {len(parts)}", lineno
            )
        try:
            uid = int(parts[0])
            iid = int(parts[1])
            val = float(parts[2])
        except ValueError:
            if fmt == "csv" and lineno == 1 and not users:
                continue  # header row
            raise DataFormatError(f"cannot parse fields {parts[:3]}", lineno) from None
        if not math.isfinite(val):
            raise DataFormatError(f"non-finite rating {parts[2]!r}", lineno)
        users.append(uid)
        items.append(iid)
        vals.append(val)
    if not users:
        raise DataFormatError("no ratings found in input")
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    user_ids, u_dense = np.unique(users, return_inverse=True)
    item_ids, i_dense = np.unique(items, return_inverse=True)
    m, n = user_ids.size, item_ids.size
    key = u_dense * n + i_dense
    order = np.argsort(key, kind="stable")
    sorted_key = key[order]
    last_of_run = np.ones(order.size, dtype=bool)
    last_of_run[:-1] = sorted_key[1:] != sorted_key[:-1]
    keep = order[last_of_run]
    duplicates = int(order.size - keep.size)
    kept_users = u_dense[keep]
    kept_vals = vals[keep]
    offsets = None
    if center_user_means:
        sums = np.bincount(kept_users, weights=kept_vals, minlength=m)
        counts = np.bincount(kept_users, minlength=m)
        offsets = sums / np.maximum(counts, 1)
        kept_vals = kept_vals - offsets[kept_users]
    return RatingSet(
        m=m,
        n=n,
        users=kept_users,
        items=i_dense[keep],
        values=kept_vals,
        user_ids=user_ids,
        item_ids=item_ids,
        duplicate_count=duplicates,
        value_min=float(kept_vals.min()),
        value_max=float(kept_vals.max()),
        user_offsets=offsets,
    )


def split_train_test(rs: RatingSet, train_fraction: float, seed: int):
    """Seeded uniform split by rating record -> (train observations, test set)."""
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train fraction must be in (0, 1), got {train_fraction}")
    size = rs.size
    k = int(math.floor(train_fraction * size + 1e-9))
    perm = philox_rng(seed).permutation(size)
    train_idx = np.sort(perm[:k])
    test_idx = np.sort(perm[k:])
    train = SparseObservations.from_entries(
        rs.m, rs.n, rs.users[train_idx], rs.items[train_idx], rs.values[train_idx]
    )
    test_vals = rs.values[test_idx]
    test = RatingSet(
        m=rs.m,
        n=rs.n,
        users=rs.users[test_idx],
        items=rs.items[test_idx],
        values=test_vals,
        user_ids=rs.user_ids,
        item_ids=rs.item_ids,
        duplicate_count=0,
        value_min=float(test_vals.min()) if test_vals.size else math.nan,
        value_max=float(test_vals.max()) if test_vals.size else math.nan,
        user_offsets=rs.user_offsets,
    )
    return train, test


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale image; pixels shape (height, width), values 0..255."""

    pixels: np.ndarray
    max_value: int = 255

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"pixels must be 2-D, got shape {px.shape}")
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise ValueError("pixel values outside [0, 255]")
            px = px.astype(np.uint8)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def _pgm_tokens(data: bytes):
    """Yield whitespace-separated header tokens, skipping '#' comments."""
    pos = 0
    while True:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= len(data):
            return
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        yield data[start:pos].decode("ascii", errors="replace"), pos


def read_pgm(stream) -> GrayImage:
    """Read a binary (P5) PGM with maxval 255."""
    data = stream.read()
    tokens = _pgm_tokens(data)
    try:
        magic, _ = next(tokens)
    except StopIteration:
        raise DataFormatError("empty PGM stream") from None
    if magic != "P5":
        raise DataFormatError(f"unsupported PGM magic {magic!r}, expected 'P5'")
    try:
        (w_tok, _), (h_tok, _), (max_tok, end) = next(tokens), next(tokens), next(tokens)
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except (StopIteration, ValueError):
        raise DataFormatError("malformed PGM header") from None
    if maxval != 255:
        raise DataFormatError(f"unsupported maxval {maxval}, expected 255")
    if width < 1 or height < 1:
        raise DataFormatError(f"bad dimensions {width} x {height}")
    payload = data[end + 1 :]  # single whitespace byte after maxval
    need = width * height
    if len(payload) < need:
        raise DataFormatError(f"truncated payload: {len(payload)} < {need} bytes")
    px = np.frombuffer(payload[:need], dtype=np.uint8).reshape(height, width)
    return GrayImage(px.copy())


def write_pgm(img: GrayImage, stream) -> None:
    stream.write(b"P5\n%d %d\n255\n" % (img.width, img.height))
    stream.write(img.pixels.tobytes())


@dataclass(frozen=True)
class Corruption:
    """Corrupted-pixel mask plus the degraded image with noise in place."""

    mask: np.ndarray  # bool (height, width); True where corrupted
    degraded: GrayImage


def corrupt_image(img: GrayImage, fraction: float, noise_sigma: float, seed: int):
    """Replace a uniform fraction of pixels by Gaussian noise.

    Corrupted positions are treated as missing: the returned observation
    set holds only the kept pixels.  The degraded image (noise written over
    the corrupted positions, centered mid-range) is returned for reporting.
    """
    if not (0.0 <= fraction < 1.0):
        raise ValueError(f"corruption fraction must be in [0, 1), got {fraction}")
    h, w = img.height, img.width
    mask_seed, noise_seed = spawn_seeds(seed, 2)
    mask = np.zeros((h, w), dtype=bool)
    if fraction > 0.0:
        rows, cols = sample_mask(h, w, fraction, mask_seed)
        mask[rows, cols] = True
    keep_r, keep_c = np.nonzero(~mask)
    obs = SparseObservations(
        h, w, keep_r, keep_c, img.pixels[keep_r, keep_c].astype(np.float64)
    )
    degraded = img.pixels.astype(np.float64).copy()
    n_bad = int(mask.sum())
    if n_bad:
        noise = philox_rng(noise_seed).normal(127.5, noise_sigma, size=n_bad)
        degraded[mask] = noise
    degraded = np.clip(np.rint(degraded), 0, 255).astype(np.uint8)
    return obs, Corruption(mask=mask, degraded=GrayImage(degraded))
