"""Finitely supported probability measures on C with exact rational weights."""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .ifs import TAU_EQ, as_fraction

INT_SAFE = 2**62
MAX_LEVEL = 60


class EmptyComponentError(ValueError):
    pass


def weight_array(values) -> np.ndarray:
    """int64 when every entry is safely representable, object (python ints) otherwise."""
    vals = [int(v) for v in values]
    if all(-INT_SAFE < v < INT_SAFE for v in vals):
        return np.array(vals, dtype=np.int64)
    arr = np.empty(len(vals), dtype=object)
    arr[:] = vals
    return arr


def _as_weights(numer) -> np.ndarray:
    numer = np.asarray(numer)
    if numer.dtype == object:
        return weight_array(numer.tolist())
    if not np.issubdtype(numer.dtype, np.integer):
        raise TypeError("weights must be integers over a common denominator")
    return numer.astype(np.int64, copy=False)


def outer_weights(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Flattened outer product of two numerator arrays without int64 overflow."""
    if a.dtype != object and b.dtype != object and a.size and b.size:
        if int(np.max(np.abs(a))) * int(np.max(np.abs(b))) < INT_SAFE:
            return np.multiply.outer(a, b).ravel()
    ao = a.astype(object)
    bo = b.astype(object)
    return np.multiply.outer(ao, bo).ravel()


def _sum_weights(numer: np.ndarray) -> int:
    if numer.dtype == object:
        return sum(numer.tolist())
    if numer.size and int(np.max(numer)) * numer.size < INT_SAFE:
        return int(numer.sum())
    return sum(int(v) for v in numer.tolist())


def group_sums(numer: np.ndarray, starts: np.ndarray) -> np.ndarray:
    """Exact segment sums of a (sorted) numerator array; starts are segment offsets."""
    if numer.size == 0:
        return numer[:0]
    if numer.dtype != object and int(np.max(numer)) * numer.size < INT_SAFE:
        return np.add.reduceat(numer, starts)
    obj = numer.astype(object)
    return weight_array(np.add.reduceat(obj, starts).tolist())


def _pack_columns(cols: Sequence[np.ndarray]) -> np.ndarray | None:
    """Map integer label columns to one int64 key preserving lexicographic order."""
    key = np.zeros(cols[0].shape[0], dtype=np.int64)
    span_total = 1
    for c in cols:
        lo = int(c.min()) if c.size else 0
        hi = int(c.max()) if c.size else 0
        span = hi - lo + 1
        span_total *= span
        if span_total >= INT_SAFE:
            return None
        key = key * span + (c - lo)
    return key


def sort_groups(cols: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Return (order, starts) grouping rows with identical label tuples."""
    n = cols[0].shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    key = _pack_columns(cols)
    if key is not None:
        order = np.argsort(key, kind="stable")
        sk = key[order]
        change = sk[1:] != sk[:-1]
    else:
        order = np.lexsort(tuple(reversed(cols)))
        change = np.zeros(n - 1, dtype=bool)
        for c in cols:
            sc = c[order]
            change |= sc[1:] != sc[:-1]
    starts = np.concatenate([[0], np.flatnonzero(change) + 1])
    return order, starts


def _candidate_pairs_grid(atoms: np.ndarray, tol: float):
    """Atom pairs possibly within tol, found by hashing tol-sized grid cells."""
    x = atoms.real / tol
    y = atoms.imag / tol
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite atom")
    if max(np.max(np.abs(x)), np.max(np.abs(y))) > 2.0**52:
        return None
    qx = np.floor(x).astype(np.int64)
    qy = np.floor(y).astype(np.int64)
    xlo, ylo = int(qx.min()) - 1, int(qy.min()) - 1
    yspan = int(qy.max()) - ylo + 2
    xspan = int(qx.max()) - xlo + 2
    if xspan * yspan >= INT_SAFE:
        return None
    key = (qx - xlo) * yspan + (qy - ylo)
    order = np.argsort(key, kind="stable")
    sk = key[order]
    first = np.concatenate([[True], sk[1:] != sk[:-1]])
    starts = np.flatnonzero(first)
    cells = sk[starts]
    counts = np.diff(np.concatenate([starts, [sk.size]]))
    pa, pb = [], []
    same = np.flatnonzero(counts > 1)
    if same.size:
        pa.append(same)
        pb.append(same)
    for dx, dy in ((0, 1), (1, -1), (1, 0), (1, 1)):
        target = cells + dx * yspan + dy
        pos = np.searchsorted(cells, target)
        pos_c = np.minimum(pos, cells.size - 1)
        hit = (pos < cells.size) & (cells[pos_c] == target)
        if np.any(hit):
            pa.append(np.flatnonzero(hit))
            pb.append(pos_c[hit])
    if not pa:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    ca = np.concatenate(pa)
    cb = np.concatenate(pb)
    sizes = counts[ca] * counts[cb]
    total = int(sizes.sum())
    if total > 5 * 10**7:
        return None
    idx = np.repeat(np.arange(ca.size), sizes)
    offs = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    local = np.arange(total) - np.repeat(offs, sizes)
    nb = counts[cb][idx]
    ia = starts[ca][idx] + local // nb
    ib = starts[cb][idx] + local % nb
    keep = (ca[idx] != cb[idx]) | (ia < ib)
    return order[ia[keep]], order[ib[keep]]


def cluster_labels(atoms: np.ndarray, tol: float) -> np.ndarray | None:
    """Union-find labels over tol-balls; None when no two atoms are within tol."""
    n = atoms.size
    if n < 2 or tol <= 0:
        return None
    pairs = _candidate_pairs_grid(atoms, tol)
    if pairs is None:
        xy = np.column_stack([atoms.real, atoms.imag])
        arr = cKDTree(xy).query_pairs(tol, output_type="ndarray")
        ia, ib = arr[:, 0], arr[:, 1]
    else:
        ia, ib = pairs
        if ia.size:
            d = np.abs(atoms[ia] - atoms[ib])
            close = d <= tol
            ia, ib = ia[close], ib[close]
    if ia.size == 0:
        return None
    graph = coo_matrix((np.ones(ia.size, dtype=np.int8), (ia, ib)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def merge_atoms(atoms: np.ndarray, numer: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge tol-clusters (weights added exactly) and sort atoms by (re, im)."""
    labels = cluster_labels(atoms, tol)
    if labels is not None:
        # representative: lexicographically smallest member of each cluster
        order = np.lexsort((atoms.imag, atoms.real, labels))
        sl = labels[order]
        starts = np.concatenate([[0], np.flatnonzero(sl[1:] != sl[:-1]) + 1])
        atoms = atoms[order][starts]
        numer = group_sums(numer[order], starts)
    order = np.lexsort((atoms.imag, atoms.real))
    return atoms[order], numer[order]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """sum_i (numerators[i]/denominator) delta_{atoms[i]}.

    Construction merges atoms closer than tol, reduces the fraction and sorts the
    atoms by (re, im), so two equal measures have identical arrays.
    """

    atoms: np.ndarray
    numerators: np.ndarray
    denominator: int
    tol: float = TAU_EQ

    def __post_init__(self):
        atoms = np.atleast_1d(np.asarray(self.atoms, dtype=complex)).ravel()
        numer = _as_weights(np.atleast_1d(self.numerators).ravel())
        denom = int(self.denominator)
        if atoms.size == 0:
            raise ValueError("a probability measure needs at least one atom")
        if atoms.size != numer.size:
            raise ValueError("atoms and weights differ in length")
        if denom <= 0:
            raise ValueError("denominator must be positive")
        if numer.dtype == object:
            if any(v <= 0 for v in numer.tolist()):
                raise ValueError("weights must be positive")
        elif np.any(numer <= 0):
            raise ValueError("weights must be positive")
        total = _sum_weights(numer)
        if total != denom:
            raise ValueError(f"weights sum to {Fraction(total, denom)}, not exactly 1")
        atoms, numer = merge_atoms(atoms, numer, self.tol)
        if numer.dtype == object:
            g = math.gcd(denom, *numer.tolist())
            if g > 1:
                numer = weight_array([v // g for v in numer.tolist()])
                denom //= g
            else:
                numer = weight_array(numer.tolist())
        else:
            g = math.gcd(denom, int(np.gcd.reduce(numer)))
            if g > 1:
                numer = numer // g
                denom //= g
        object.__setattr__(self, "atoms", _readonly(atoms))
        object.__setattr__(self, "numerators", _readonly(numer))
        object.__setattr__(self, "denominator", denom)

    # construction helpers
    @classmethod
    def from_weights(cls, atoms, weights, tol: float = TAU_EQ) -> "DiscreteMeasure":
        fr = [as_fraction(w) for w in weights]
        d = math.lcm(*(f.denominator for f in fr)) if fr else 1
        return cls(np.asarray(atoms, dtype=complex), weight_array([f.numerator * (d // f.denominator) for f in fr]), d, tol)

    @classmethod
    def dirac(cls, z: complex = 0j) -> "DiscreteMeasure":
        return cls(np.array([z], dtype=complex), np.array([1]), 1)

    @classmethod
    def uniform(cls, atoms, tol: float = TAU_EQ) -> "DiscreteMeasure":
        atoms = np.asarray(atoms, dtype=complex).ravel()
        return cls(atoms, np.ones(atoms.size, dtype=np.int64), atoms.size, tol)

    # views
    def __len__(self) -> int:
        return int(self.atoms.size)

    @property
    def weights(self) -> list[Fraction]:
        d = self.denominator
        return [Fraction(int(v), d) for v in self.numerators.tolist()]

    @property
    def probabilities(self) -> np.ndarray:
        if self.numerators.dtype == object or self.denominator >= 2**53:
            d = self.denominator
            return np.array([int(v) / d for v in self.numerators.tolist()])
        return self.numerators.astype(float) / float(self.denominator)

    def mass(self, mask: np.ndarray) -> Fraction:
        return Fraction(_sum_weights(self.numerators[np.asarray(mask, dtype=bool)]), self.denominator)

    def support_radius(self) -> float:
        return float(np.max(np.abs(self.atoms)))

    def entropy_of_atoms(self) -> float:
        p = self.probabilities
        return float(-np.sum(p * np.log2(p)))

    # maps
    def map_atoms(self, lam: complex = 1.0, t: complex = 0j) -> "DiscreteMeasure":
        """Push-forward under z -> lam*z + t."""
        return DiscreteMeasure(lam * self.atoms + t, self.numerators, self.denominator, self.tol)

    def mixture(self, other: "DiscreteMeasure", weight: Fraction) -> "DiscreteMeasure":
        return mixture([(Fraction(weight), self), (1 - Fraction(weight), other)], self.tol)

    # serialization
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("re,im,weight\n")
        d = self.denominator
        for z, w in zip(self.atoms.tolist(), self.numerators.tolist()):
            f = Fraction(int(w), d)
            buf.write(f"{z.real!r},{z.imag!r},{f.numerator}/{f.denominator}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, tol: float = TAU_EQ) -> "DiscreteMeasure":
        text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if lines and lines[0].startswith("re"):
            lines = lines[1:]
        atoms, weights = [], []
        for ln in lines:
            re_s, im_s, w_s = ln.split(",")
            atoms.append(complex(float(re_s), float(im_s)))
            weights.append(Fraction(w_s))
        return cls.from_weights(atoms, weights, tol)

    def to_bytes(self) -> bytes:
        """b"SSMD", u64 count, then (f64 re, f64 im) pairs, then (u64 num, u64 den) pairs; little-endian."""
        fr = self.weights
        if any(f.denominator >= 2**64 for f in fr):
            raise OverflowError("weight denominators exceed the u64 binary format")
        head = b"SSMD" + struct.pack("<Q", len(self))
        xy = np.column_stack([self.atoms.real, self.atoms.imag]).astype("<f8").tobytes()
        nd = np.array([[f.numerator, f.denominator] for f in fr], dtype="<u8").tobytes()
        return head + xy + nd

    @classmethod
    def from_bytes(cls, data: bytes, tol: float = TAU_EQ) -> "DiscreteMeasure":
        if data[:4] != b"SSMD":
            raise ValueError("not a measure file")
        (n,) = struct.unpack("<Q", data[4:12])
        xy = np.frombuffer(data, dtype="<f8", count=2 * n, offset=12).reshape(n, 2)
        nd = np.frombuffer(data, dtype="<u8", count=2 * n, offset=12 + 16 * n).reshape(n, 2)
        atoms = xy[:, 0] + 1j * xy[:, 1]
        weights = [Fraction(int(a), int(b)) for a, b in nd]
        return cls.from_weights(atoms, weights, tol)


def mixture(parts: Iterable[tuple[Fraction, DiscreteMeasure]], tol: float = TAU_EQ) -> DiscreteMeasure:
    """sum_i c_i mu_i for exact coefficients c_i summing to 1."""
    parts = [(as_fraction(c), m) for c, m in parts]
    d = 1
    for c, m in parts:
        d = math.lcm(d, c.denominator * m.denominator)
    atoms, numer = [], []
    for c, m in parts:
        scale = c.numerator * (d // (c.denominator * m.denominator))
        atoms.append(m.atoms)
        numer.extend(int(v) * scale for v in m.numerators.tolist())
    return DiscreteMeasure(np.concatenate(atoms), weight_array(numer), d, tol)


@dataclass
class MultisetDiff:
    """Outcome of comparing two measures as weighted multisets."""

    equal: bool
    max_atom_mismatch: float
    weight_residue: Fraction
    first_mismatch: str | None = None

    def __bool__(self) -> bool:
        return self.equal

    def as_dict(self) -> dict:
        return {
            "equal": self.equal,
            "max_atom_mismatch": self.max_atom_mismatch,
            "weight_residue": str(self.weight_residue),
            "first_mismatch": self.first_mismatch,
        }


def compare_measures(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float = TAU_EQ) -> MultisetDiff:
    """Exact weights, atoms matched within tol."""
    xy_nu = np.column_stack([nu.atoms.real, nu.atoms.imag])
    xy_mu = np.column_stack([mu.atoms.real, mu.atoms.imag])
    dist, idx = cKDTree(xy_nu).query(xy_mu, k=1)
    matched = dist <= tol
    first = None
    residue = Fraction(0)
    dm, dn = mu.denominator, nu.denominator
    a = mu.numerators.astype(object)
    b = nu.numerators.astype(object)
    used = np.zeros(len(nu), dtype=bool)
    max_mis = float(np.max(dist[matched])) if np.any(matched) else 0.0
    num_res = 0
    for i in np.flatnonzero(matched):
        j = idx[i]
        if used[j]:
            matched[i] = False
            continue
        used[j] = True
        diff = a[i] * dn - b[j] * dm
        if diff != 0:
            num_res += abs(diff)
            if first is None:
                first = f"atom {mu.atoms[i]!r}: weight {Fraction(a[i], dm)} vs {Fraction(b[j], dn)}"
    residue = Fraction(num_res, dm * dn)
    for i in np.flatnonzero(~matched):
        residue += Fraction(a[i], dm)
        if first is None:
            first = f"atom {mu.atoms[i]!r} has no partner within {tol} (nearest {dist[i]:.3e})"
    for j in np.flatnonzero(~used):
        residue += Fraction(b[j], dn)
        if first is None:
            first = f"atom {nu.atoms[j]!r} of the second measure has no partner"
    equal = residue == 0 and first is None
    return MultisetDiff(equal, max_mis, residue, first)
