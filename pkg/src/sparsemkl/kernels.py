"""Kernel specifications, Gram matrix construction and the kernel bank."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateKernelError, ParseError, ValidationError
from .numlin import check_symmetric, spectral_cache

FAMILIES = ("linear", "polynomial", "rbf", "precomputed")
PSD_TOL = 1e-8
DIAG_TOL = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family with its parameters.

    ``columns`` optionally restricts the kernel to a subset of feature
    columns, which is how block-structured banks are described.
    """

    family: str
    id: str
    degree: int = 2
    offset: float = 0.0
    bandwidth: float = 1.0
    path: str | None = None
    columns: tuple | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}")
        if self.family == "rbf" and not self.bandwidth > 0:
            raise ValidationError(f"rbf bandwidth must be > 0, got {self.bandwidth}")
        if self.family == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValidationError(f"polynomial degree must be a positive integer, got {self.degree}")
            if not self.offset >= 0:
                raise ValidationError(f"polynomial offset must be >= 0, got {self.offset}")
        if self.family == "precomputed" and not self.path:
            raise ValidationError("precomputed kernel needs a path")
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))

    def to_dict(self):
        d = {"family": self.family, "id": self.id}
        if self.family == "polynomial":
            d.update(degree=self.degree, offset=self.offset)
        elif self.family == "rbf":
            d["bandwidth"] = self.bandwidth
        elif self.family == "precomputed":
            d["path"] = self.path
        if self.columns is not None:
            d["columns"] = list(self.columns)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "columns" in d and d["columns"] is not None:
            d["columns"] = tuple(d["columns"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ParseError(f"bad kernel spec {d}: {exc}") from None


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    id: str


def _features(spec, X):
    if spec.columns is None:
        return X
    cols = list(spec.columns)
    if cols and (min(cols) < 0 or max(cols) >= X.shape[1]):
        raise ValidationError(f"kernel {spec.id!r}: column index out of range for {X.shape[1]} features")
    return X[:, cols]


def load_precomputed(path, n=None):
    """Read a dense N x N matrix; rows are whitespace- or comma-separated."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"precomputed kernel file not found: {path}")
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([float(tok) for tok in line.replace(",", " ").split()])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric entry") from None
    if not rows or any(len(r) != len(rows) for r in rows):
        raise OSError(f"{path}: precomputed kernel is not a square matrix")
    K = np.array(rows)
    if n is not None and K.shape[0] != n:
        raise OSError(f"{path}: kernel is {K.shape[0]}x{K.shape[0]} but the dataset has {n} rows")
    return K


def gram(spec, X):
    """Evaluate the kernel on all pairs of rows of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValidationError("feature matrix must be 2-D with at least one row")
    if not np.all(np.isfinite(X)):
        raise ValidationError("feature matrix has non-finite values")
    if spec.family == "precomputed":
        K = load_precomputed(spec.path, X.shape[0])
        check_symmetric(K)
        return GramMatrix(K, spec.id)
    Z = _features(spec, X)
    G = Z @ Z.T
    if spec.family == "linear":
        K = G
    elif spec.family == "polynomial":
        K = (G + spec.offset) ** int(spec.degree)
    else:
        sq = np.einsum("ij,ij->i", Z, Z)
        D = np.maximum(sq[:, None] + sq[None, :] - 2.0 * G, 0.0)
        np.fill_diagonal(D, 0.0)
        K = np.exp(-D / (2.0 * spec.bandwidth ** 2))
    K = 0.5 * (K + K.T)
    return GramMatrix(K, spec.id)


def normalize(K):
    """Cosine normalization ``K_ab / sqrt(K_aa K_bb)``.

    Rows whose diagonal is zero must be entirely zero; they stay zero.
    """
    entries = K.entries if isinstance(K, GramMatrix) else np.asarray(K, dtype=float)
    diag = np.diag(entries).copy()
    if np.any(diag < 0):
        raise DegenerateKernelError("negative diagonal entry")
    zero = diag <= 0
    if np.any(zero):
        if np.any(entries[zero] != 0) or np.any(entries[:, zero] != 0):
            raise DegenerateKernelError("zero diagonal entry with a nonzero row")
    scale = np.zeros_like(diag)
    scale[~zero] = 1.0 / np.sqrt(diag[~zero])
    out = entries * scale[:, None] * scale[None, :]
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, np.where(zero, 0.0, 1.0))
    if isinstance(K, GramMatrix):
        return GramMatrix(out, K.id)
    return out


def check_gram(K, normalized=True):
    """Validate the Gram invariants: symmetry, PSD, and diagonal <= 1."""
    entries = K.entries if isinstance(K, GramMatrix) else K
    check_symmetric(entries)
    w = np.linalg.eigvalsh(entries)
    top = max(float(w[-1]), 0.0) if w.size else 0.0
    if w.size and w[0] < -PSD_TOL * top:
        raise DegenerateKernelError(f"matrix is not PSD (min eigenvalue {w[0]:.3g})")
    if normalized and np.any(np.diag(entries) > 1 + DIAG_TOL):
        raise ValidationError("diagonal exceeds 1 after normalization")


@dataclass
class KernelBank:
    """An ordered collection of N x N Gram matrices with their spectral caches.

    Exact duplicate matrices are detected once at construction; ``canonical[j]``
    is the first index holding the same matrix, so scores computed for
    duplicates are bit-identical.
    """

    ids: list
    matrices: list
    caches: list = field(default_factory=list)
    specs: list | None = None
    canonical: list = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("kernel ids must be unique within a bank")
        if len(self.ids) != len(self.matrices):
            raise ValidationError("ids and matrices differ in length")
        sizes = {K.shape for K in self.matrices}
        if len(sizes) > 1:
            raise ValidationError(f"Gram matrices of different shapes: {sizes}")
        self.matrices = [np.ascontiguousarray(K, dtype=float) for K in self.matrices]
        for K in self.matrices:
            K.setflags(write=False)
        if not self.caches:
            self.caches = [spectral_cache(K, kernel_id=i) for i, K in zip(self.ids, self.matrices)]
        seen = {}
        self.canonical = []
        for j, K in enumerate(self.matrices):
            key = K.tobytes()
            self.canonical.append(seen.setdefault(key, j))
        self._index = {k: j for j, k in enumerate(self.ids)}

    @classmethod
    def from_specs(cls, specs, X, normalized=True):
        ids = [s.id for s in specs]
        if len(set(ids)) != len(ids):
            raise ValidationError("kernel ids must be unique within a bank")
        mats = []
        for s in specs:
            G = gram(s, X)
            if normalized:
                G = normalize(G)
            check_gram(G, normalized=normalized)
            mats.append(G.entries)
        return cls(ids, mats, specs=list(specs))

    @classmethod
    def from_matrices(cls, matrices, ids=None, normalized=False):
        if ids is None:
            ids = [f"k{j}" for j in range(len(matrices))]
        mats = [normalize(np.asarray(K, dtype=float)) if normalized else np.asarray(K, dtype=float)
                for K in matrices]
        return cls(list(ids), mats)

    def __len__(self):
        return len(self.ids)

    @property
    def n(self):
        return self.matrices[0].shape[0]

    def index(self, kernel_id):
        try:
            return self._index[kernel_id]
        except KeyError:
            raise ValidationError(f"unknown kernel id {kernel_id!r}") from None

    def matrix(self, kernel_id):
        return self.matrices[self.index(kernel_id)]

    def cache(self, kernel_id):
        return self.caches[self.index(kernel_id)]

    def subset(self, ids):
        idx = [self.index(i) for i in ids]
        specs = [self.specs[j] for j in idx] if self.specs else None
        return KernelBank([self.ids[j] for j in idx], [self.matrices[j] for j in idx],
                          [self.caches[j] for j in idx], specs)

    def with_duplicates(self, kernel_id, copies, suffix="_copy"):
        """Replace ``kernel_id`` by ``copies`` identical kernels, kept in place."""
        ids, mats, caches = [], [], []
        for i, K, c in zip(self.ids, self.matrices, self.caches):
            if i == kernel_id:
                for r in range(copies):
                    ids.append(f"{i}{suffix}{r}")
                    mats.append(K)
                    caches.append(c)
            else:
                ids.append(i)
                mats.append(K)
                caches.append(c)
        return KernelBank(ids, mats, caches)

    def append(self, kernel_id, K, cache=None):
        caches = self.caches + [cache or spectral_cache(K, kernel_id=kernel_id)]
        return KernelBank(self.ids + [kernel_id], self.matrices + [K], caches)


def parse_inline_specs(text):
    """Parse ``"linear;rbf:bandwidth=0.5;polynomial:degree=3,offset=1"``.

    Keys: ``id``, ``degree``, ``offset``, ``bandwidth``, ``path`` and
    ``cols`` (``lo..hi`` half-open range or ``a|b|c`` list).
    """
    specs = []
    for n, item in enumerate(t.strip() for t in text.split(";")):
        if not item:
            continue
        family, _, params = item.partition(":")
        kw = {"family": family.strip(), "id": None}
        for pair in filter(None, (p.strip() for p in params.split(","))):
            key, eq, val = pair.partition("=")
            if not eq:
                raise ParseError(f"bad kernel parameter {pair!r} in {item!r}")
            key, val = key.strip(), val.strip()
            if key == "degree":
                kw[key] = int(val)
            elif key in ("offset", "bandwidth"):
                kw[key] = float(val)
            elif key in ("id", "path"):
                kw[key] = val
            elif key in ("cols", "columns"):
                if ".." in val:
                    lo, hi = val.split("..")
                    kw["columns"] = tuple(range(int(lo), int(hi)))
                else:
                    kw["columns"] = tuple(int(c) for c in val.split("|"))
            else:
                raise ParseError(f"unknown kernel parameter {key!r}")
        if kw["id"] is None:
            kw["id"] = f"{kw['family']}{n}"
        specs.append(KernelSpec(**kw))
    if not specs:
        raise ParseError("empty kernel list")
    return specs


def load_specs(path):
    """Kernel spec file: a JSON list of objects (see ``KernelSpec.to_dict``)."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(data, list):
        raise ParseError(f"{path}: expected a JSON list of kernel specs")
    base = Path(path).parent
    specs = []
    for d in data:
        s = KernelSpec.from_dict(d)
        if s.path and not Path(s.path).is_absolute():
            s = KernelSpec.from_dict({**s.to_dict(), "path": str(base / s.path)})
        specs.append(s)
    return specs


def save_specs(specs, path):
    Path(path).write_text(json.dumps([s.to_dict() for s in specs], indent=2) + "\n")
