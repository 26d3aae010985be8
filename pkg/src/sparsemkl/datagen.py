"""Synthetic instances and dataset file I/O.

Three generators are provided:

``orthogonal_ranges``
    Feature columns come in disjoint pairs ``(cos(2 pi k t / N), sin(2 pi k t / N))``
    for distinct integer frequencies ``k``, after a random sign flip and
    permutation of the rows. Each pair carries a linear kernel. Every row of a
    pair has the same norm, so cosine normalization is a global rescaling and
    the kernel ranges stay mutually orthogonal.

    The planted target is a two-valued sequence of period ``4 s`` that flips
    sign every half period. Such a sequence only has energy at the ``s`` odd
    harmonics of its base frequency, so it is an exact combination of ``s``
    kernels and, with ``noise_std = 0``, its labels lie in their span.

``random_rbf_bank``
    Gaussian features and RBF kernels on random feature subsets and
    bandwidths; the target is a random combination of planted kernels.

``duplicate_counterexample``
    A strongly aligned kernel ``kappa1`` repeated ``m - 1`` times plus a weakly
    aligned ``kappa2``.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .kernels import KernelBank, KernelSpec
from .objective import check_labels

STRUCTURES = ("orthogonal_ranges", "random_rbf_bank", "duplicate_counterexample")

# candidate budget when searching for the planted two-valued sequence
_SEARCH_LIMIT = 1 << 15


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray

    @property
    def n(self):
        return self.X.shape[0]


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int
    n_kernels: int
    true_support_size: int
    noise_std: float = 0.0
    structure: str = "orthogonal_ranges"
    seed: int = 0
    signal: float = 0.15

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValidationError(f"unknown structure {self.structure!r}")
        for name in ("n_samples", "n_kernels", "true_support_size"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v}")
        if self.true_support_size > self.n_kernels:
            raise ValidationError("true_support_size exceeds n_kernels")
        if not self.noise_std >= 0:
            raise ValidationError("noise_std must be >= 0")
        if not self.signal > 0:
            raise ValidationError("signal must be > 0")


@dataclass
class GroundTruth:
    support: list
    target: np.ndarray
    clean_loss: float
    extra: dict = field(default_factory=dict)


def _signs(v):
    return np.where(v >= 0, 1.0, -1.0)


def planted_sequence(s):
    """Period-``4s`` sequence with ``x[t + 2s] = -x[t]`` and the flattest
    spectrum over its ``s`` odd harmonics (ties: first found).

    The search is exhaustive for small ``s`` and a fixed-seed random sample
    otherwise, so the result depends on ``s`` only.
    """
    half = 2 * s
    total = 1 << (half - 1)
    if total <= _SEARCH_LIMIT:
        codes = np.arange(total)
    else:
        codes = np.random.default_rng(0).integers(0, total, _SEARCH_LIMIT)
    bits = (codes[:, None] >> np.arange(half - 1)) & 1
    heads = np.hstack([np.ones((codes.size, 1)), 1.0 - 2.0 * bits])
    seqs = np.hstack([heads, -heads])
    energy = np.abs(np.fft.fft(seqs, axis=1)[:, 1:half:2]) ** 2
    lo = energy.min(axis=1)
    spread = np.where(lo > 1e-9, energy.max(axis=1) / np.maximum(lo, 1e-300), np.inf)
    best = int(np.argmin(spread))
    if not np.isfinite(spread[best]):
        raise ValidationError(f"no planted sequence found for support size {s}")
    return seqs[best]


def _orthogonal_ranges(spec, rng):
    n, m, s = spec.n_samples, spec.n_kernels, spec.true_support_size
    capacity = (n - 1) // 2
    if m > capacity:
        raise ValidationError(f"orthogonal_ranges holds at most {capacity} kernels for N={n}, got m={m}")
    period = 4 * s
    if n % period:
        raise ValidationError(f"orthogonal_ranges needs N divisible by 4*true_support_size={period}")
    k0 = n // period
    planted = [k0 * (2 * i + 1) for i in range(s)]
    rest = rng.permutation([k for k in range(1, capacity + 1) if k not in planted])[: m - s]
    freqs = np.array(planted + [int(k) for k in rest])
    freqs = freqs[rng.permutation(m)]
    t = np.arange(n)
    phase = 2 * np.pi * np.outer(t, freqs) / n
    X = np.empty((n, 2 * m))
    X[:, 0::2] = np.cos(phase)
    X[:, 1::2] = np.sin(phase)
    clean = np.roll(np.tile(planted_sequence(s), n // period), int(rng.integers(period)))
    flip = _signs(rng.standard_normal(n))
    perm = rng.permutation(n)
    X = (X * flip[:, None])[perm]
    target = spec.signal * (clean * flip)[perm]
    specs = [KernelSpec("linear", f"orth{j}", columns=(2 * j, 2 * j + 1)) for j in range(m)]
    support = [f"orth{j}" for j in range(m) if freqs[j] in planted]
    return X, specs, support, target, {"frequencies": freqs.tolist()}


def _random_rbf(spec, rng):
    n, m, s = spec.n_samples, spec.n_kernels, spec.true_support_size
    p = max(2, min(10, m))
    X = rng.standard_normal((n, p))
    specs = []
    for j in range(m):
        width = int(rng.integers(1, min(3, p) + 1))
        cols = tuple(sorted(int(c) for c in rng.choice(p, width, replace=False)))
        bw = float(np.exp(rng.uniform(np.log(0.3), np.log(3.0))))
        specs.append(KernelSpec("rbf", f"rbf{j}", bandwidth=bw, columns=cols))
    bank = KernelBank.from_specs(specs, X)
    chosen = sorted(int(j) for j in rng.choice(m, s, replace=False))
    target = sum(bank.matrices[j] @ rng.standard_normal(n) for j in chosen)
    target = spec.signal * target / max(float(np.sqrt(np.mean(target ** 2))), 1e-300)
    return X, specs, [specs[j].id for j in chosen], target, {}, bank


def counterexample_features(n, rng, spread=1.0):
    """Two feature columns: the first tracks a random label pattern, the second is noise."""
    base = _signs(rng.standard_normal(n))
    x1 = base + spread * rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    return np.column_stack([x1, x2]), base


def _duplicate_counterexample(spec, rng):
    n, m = spec.n_samples, spec.n_kernels
    if m < 2:
        raise ValidationError("duplicate_counterexample needs at least 2 kernels")
    X, base = counterexample_features(n, rng)
    specs = [KernelSpec("rbf", f"kappa1_copy{r}", bandwidth=1.0, columns=(0,)) for r in range(m - 1)]
    specs.append(KernelSpec("rbf", "kappa2", bandwidth=1.0, columns=(1,)))
    support = [s.id for s in specs[: spec.true_support_size]]
    return X, specs, support, spec.signal * base, {}


def generate(spec):
    """Build ``(Dataset, KernelBank, GroundTruth)`` reproducibly from ``spec.seed``.

    Labels are ``sign(target + noise_std * z)`` with standard normal ``z``.
    """
    rng = np.random.default_rng(spec.seed)
    bank = None
    if spec.structure == "orthogonal_ranges":
        X, specs, support, target, extra = _orthogonal_ranges(spec, rng)
    elif spec.structure == "random_rbf_bank":
        X, specs, support, target, extra, bank = _random_rbf(spec, rng)
    else:
        X, specs, support, target, extra = _duplicate_counterexample(spec, rng)
    noise = spec.noise_std * rng.standard_normal(spec.n_samples)
    y = _signs(target + noise)
    if bank is None:
        bank = KernelBank.from_specs(specs, X)
    clean_loss = float(np.sum((target - y) ** 2)) / (2 * spec.n_samples)
    return Dataset(X, y), bank, GroundTruth(support, target, clean_loss, extra)


def _parse_float(tok, path, lineno):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: cannot parse {tok!r} as a number") from None


def _load_csv(path):
    rows, header, width = [], None, None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        toks = [t.strip() for t in line.split(",")]
        if header is None and not rows:
            try:
                [float(t) for t in toks]
            except ValueError:
                header = toks
                width = len(toks)
                continue
        if width is None:
            width = len(toks)
        if len(toks) != width:
            raise ParseError(f"{path}:{lineno}: expected {width} fields, got {len(toks)}")
        rows.append([_parse_float(t, path, lineno) for t in toks])
    if not rows:
        raise ParseError(f"{path}: no data rows")
    A = np.array(rows)
    label_col = A.shape[1] - 1
    if header is not None and "y" in header:
        label_col = header.index("y")
    y = A[:, label_col]
    X = np.delete(A, label_col, axis=1)
    return X, y


def _load_sparse(path):
    labels, entries, p = [], [], 0
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        toks = line.split()
        if not toks:
            continue
        labels.append(_parse_float(toks[0], path, lineno))
        row = {}
        for tok in toks[1:]:
            idx, colon, val = tok.partition(":")
            if not colon or not idx.isdigit() or int(idx) < 1:
                raise ParseError(f"{path}:{lineno}: bad feature {tok!r} (want index:value, 1-based)")
            row[int(idx) - 1] = _parse_float(val, path, lineno)
            p = max(p, int(idx))
        entries.append(row)
    if not labels:
        raise ParseError(f"{path}: no data rows")
    X = np.zeros((len(labels), p))
    for i, row in enumerate(entries):
        for j, v in row.items():
            X[i, j] = v
    return X, np.array(labels)


def load_dataset(path, format="csv"):
    """Read a labeled dataset. Labels must be -1 or +1."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    if format == "csv":
        X, y = _load_csv(path)
    elif format == "sparse_labeled":
        X, y = _load_sparse(path)
    else:
        raise ValidationError(f"unknown dataset format {format!r}")
    bad = np.flatnonzero((y != 1) & (y != -1))
    if bad.size:
        raise ValidationError(f"{path}: label {y[bad[0]]:g} on row {bad[0] + 1} is not -1 or +1")
    return Dataset(X, check_labels(y))


def save_dataset(data, path, format="csv"):
    """Write a dataset so that ``load_dataset`` reads it back bit-exactly.

    Values are printed with 17 significant digits. The sparse format cannot
    record trailing all-zero feature columns; CSV keeps the full shape.
    """
    lines = []
    if format == "csv":
        for row, label in zip(data.X, data.y):
            lines.append(",".join(f"{v:.17g}" for v in row) + f",{int(label)}")
    elif format == "sparse_labeled":
        for row, label in zip(data.X, data.y):
            feats = " ".join(f"{j + 1}:{v:.17g}" for j, v in enumerate(row) if v != 0)
            lines.append(f"{int(label)} {feats}".rstrip())
    else:
        raise ValidationError(f"unknown dataset format {format!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def holdout_split(n, fraction, seed=0):
    """Seeded row split; returns sorted ``(train_idx, test_idx)`` with
    ``round(fraction * n)`` test rows."""
    if not 0 <= fraction < 1:
        raise ValidationError("holdout fraction must be in [0, 1)")
    idx = np.random.default_rng(seed).permutation(n)
    k = int(round(fraction * n))
    return np.sort(idx[k:]), np.sort(idx[:k])
