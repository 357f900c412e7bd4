"""Fourier transforms of atomic measures, decay fits and the infinite-product bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from .ifs import min_pairwise_distance
from .measure import DiscreteMeasure
from .model import Model

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
CHUNK = 1 << 22


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyGrid:
    """Frequencies xi together with the dyadic band index floor(log2 |xi|) of each."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.samples, dtype=complex))
        if np.any(np.abs(s) == 0):
            raise ValueError("frequencies must be nonzero")
        object.__setattr__(self, "samples", s)

    @property
    def bands(self) -> np.ndarray:
        return np.floor(np.log2(np.abs(self.samples))).astype(int)

    @classmethod
    def banded(cls, j0: int, j1: int, per_band: int = 256, directions: Sequence[float] = (0.0,)) -> "FrequencyGrid":
        """per_band moduli in each [2^j, 2^(j+1)), j0 <= j <= j1, on a golden Weyl sequence, per direction."""
        frac = (np.arange(1, per_band + 1) * GOLDEN) % 1.0
        out = []
        for j in range(j0, j1 + 1):
            mods = 2.0**j * 2.0**frac
            for a in directions:
                out.append(mods * complex(math.cos(a), math.sin(a)))
        return cls(np.concatenate(out))


def fourier(mu: DiscreteMeasure, xi) -> np.ndarray:
    """mu^(xi) = sum_a w_a exp(2 pi i Re(a conj(xi))) for each xi."""
    xi = xi.samples if isinstance(xi, FrequencyGrid) else np.atleast_1d(np.asarray(xi, dtype=complex))
    p = mu.probabilities
    ar, ai = mu.atoms.real, mu.atoms.imag
    out = np.empty(xi.size, dtype=complex)
    step = max(1, CHUNK // max(1, len(mu)))
    for s in range(0, xi.size, step):
        x = xi[s : s + step]
        phase = np.outer(x.real, ar) + np.outer(x.imag, ai)
        out[s : s + step] = np.exp(2j * np.pi * phase) @ p
    return out


@dataclass
class DecayFit:
    sigma: float
    bands: list
    envelope: list
    used: list
    fitted: list
    residuals: list
    nyquist: float
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "bands": self.bands,
            "envelope": self.envelope,
            "used": self.used,
            "residuals": self.residuals,
            "nyquist": self.nyquist,
            "flags": self.flags,
        }

    def to_csv(self) -> str:
        rows = ["band,envelope,fitted,used"]
        for j, e, f, u in zip(self.bands, self.envelope, self.fitted, self.used):
            rows.append(f"{j},{e!r},{f!r},{int(u)}")
        return "\n".join(rows) + "\n"


def decay_exponent(mu: DiscreteMeasure, band_range: tuple[int, int], per_band: int = 256,
                   directions: Sequence[float] = (0.0,)) -> DecayFit:
    """sigma = -slope of log(max_band |mu^|) against log(band centre 2^(j+1/2)).

    Bands beyond the atom-resolution frequency 1/(2 min spacing) only see the
    discreteness of the truncation; they are excluded and flagged.
    """
    j0, j1 = band_range
    if j1 - j0 + 1 < 4:
        raise ValueError("decay fit needs at least 4 dyadic bands")
    d = min_pairwise_distance(mu.atoms)
    nyq = math.inf if not math.isfinite(d) or d == 0 else 1.0 / (2.0 * d)
    grid = FrequencyGrid.banded(j0, j1, per_band, directions)
    vals = np.abs(fourier(mu, grid))
    bands = list(range(j0, j1 + 1))
    env, used, flags = [], [], []
    for j in bands:
        e = float(np.max(vals[grid.bands == j]))
        env.append(e)
        ok = 2.0 ** (j + 1) <= nyq and e > 0
        used.append(ok)
        if not ok:
            flags.append(f"band {j} above atom-resolution floor")
    xs = np.array([(j + 0.5) * math.log(2) for j, u in zip(bands, used) if u])
    ys = np.array([math.log(e) for e, u in zip(env, used) if u])
    if xs.size < 2:
        raise ValueError("fewer than two bands below the resolution floor")
    slope, icpt = np.polyfit(xs, ys, 1)
    fitted = [float(math.exp(icpt + slope * (j + 0.5) * math.log(2))) for j in bands]
    res = [float(y - (icpt + slope * x)) for x, y in zip(xs, ys)]
    return DecayFit(float(-slope), bands, env, used, fitted, res, nyq, flags)


# product bounds ---------------------------------------------------------------

def dist_to_int(x):
    """||x||: distance to the nearest integer."""
    return abs(x - np.round(x)) if not isinstance(x, mpmath.mpf) else abs(x - mpmath.nint(x))


def c1_constant(p1, p2) -> float:
    """|p1 + p2 e^(2 pi i x)| <= (p1+p2) - c1 ||x||^2 holds with c1 = 8 p1 p2 / (p1+p2)."""
    p1, p2 = float(p1), float(p2)
    return 8.0 * p1 * p2 / (p1 + p2)


def c1_uniform(p_min: float) -> float:
    """A value of c1 valid for every pair p1, p2 in [p_min, p_max]."""
    return 4.0 * float(p_min)


def _special(model: Model, special) -> tuple:
    label = model.labels[0] if special is None else special
    ifs = model.systems[label]
    t = ifs.translations
    if ifs.k < 2 or abs(t[0]) > 1e-12 or abs(t[1] - 1) > 1e-12:
        raise ConfigError(f"system {label!r} must have k >= 2, t1 = 0 and t2 = 1")
    return label, c1_constant(ifs.probs[0], ifs.probs[1])


@dataclass
class ProductBound:
    value: float
    c1: float
    args: list

    def __float__(self) -> float:
        return self.value


def product_bound(model: Model, omega: Sequence, xi: complex, special=None) -> ProductBound:
    """prod over n with omega_n = special of (1 - c1 ||Re(lambda_{omega_1..omega_(n-1)} conj(xi))||^2)."""
    label, c1 = _special(model, special)
    prod = 1 + 0j
    xb = complex(xi).conjugate()
    args, val = [], 1.0
    for s in omega:
        if s == label:
            x = (prod * xb).real
            args.append(x)
            val *= 1.0 - c1 * dist_to_int(x) ** 2
        prod *= model.lam(s)
    return ProductBound(val, c1, args)


def split_blocks(omega: Sequence, one, two) -> tuple[list[tuple], tuple]:
    """omega = W_1 W_2 ... with W_i = W'_i 1^5 2; returns the complete blocks and the leftover tail."""
    omega = tuple(omega)
    pat = (one,) * 5 + (two,)
    blocks, start, i = [], 0, 0
    while i + 6 <= len(omega):
        if omega[i : i + 6] == pat:
            blocks.append(omega[start : i + 6])
            start = i = i + 6
        else:
            i += 1
    return blocks, omega[start:]


def _prec_for(*vals) -> int:
    mags = [abs(complex(v)) for v in vals if v != 0]
    top = max((math.log2(m) for m in mags if m > 0), default=0.0)
    return int(max(0.0, top)) + 128


def block_product_bound(model: Model, blocks: Sequence[Sequence], xi: complex, special=None, dps: int | None = None) -> ProductBound:
    """prod_{n<=M} prod_{j=0..4} (1 - c1 ||Re(lambda_{W_1..W_(n-1) W'_n} theta^-j conj(xi))||^2), theta = 1/lambda_special."""
    label, c1 = _special(model, special)
    total = sum(len(b) for b in blocks)
    prec = _prec_for(complex(xi) / max(1e-300, min(model.r(s) for s in model.labels)) ** total) if dps is None else int(dps * 3.33)
    with mpmath.workprec(prec):
        lam = {s: mpmath.mpc(model.lam(s)) for s in model.labels}
        xb = mpmath.conj(mpmath.mpc(xi))
        prod = mpmath.mpc(1)
        args, val = [], mpmath.mpf(1)
        for b in blocks:
            for s in b[:-6]:
                prod *= lam[s]
            q = prod
            for j in range(5):
                x = (q * xb).real
                args.append(x)
                val *= 1 - c1 * dist_to_int(x) ** 2
                q *= lam[label]
            for s in b[-6:]:
                prod *= lam[s]
        return ProductBound(float(val), c1, [float(a) for a in args])


def trace_product_bound(model: Model, blocks: Sequence[Sequence], xi: complex, special=None, dps: int | None = None) -> ProductBound:
    """prod_{n<M} prod_{j=1..5} (1 - c1 ||Re(Theta_n theta_2 theta^j tau)||^2) with tau = conj(xi)/Theta^(M).

    Here Theta^(M) = 1/lambda_{W_1..W_M}, Theta_n = theta_{W_M..W_(M-n+1)} and theta_2
    inverts the contraction of the symbol closing every block.
    """
    label, c1 = _special(model, special)
    M = len(blocks)
    two = blocks[0][-1] if M else None
    total = sum(len(b) for b in blocks)
    prec = _prec_for(complex(xi) / max(1e-300, min(model.r(s) for s in model.labels)) ** total) if dps is None else int(dps * 3.33)
    with mpmath.workprec(prec):
        theta_of = {s: 1 / mpmath.mpc(model.lam(s)) for s in model.labels}

        def theta_word(w):
            out = mpmath.mpc(1)
            for s in w:
                out *= theta_of[s]
            return out

        big = mpmath.mpc(1)
        for b in blocks:
            big *= theta_word(b)
        tau = mpmath.conj(mpmath.mpc(xi)) / big
        th, th2 = theta_of[label], theta_of[two] if M else mpmath.mpc(1)
        args, val = [], mpmath.mpf(1)
        big_n = mpmath.mpc(1)
        for n in range(M):
            if n:
                big_n *= theta_word(blocks[M - n])
            z = big_n * th2 * tau
            for j in range(1, 6):
                z *= th
                x = z.real
                args.append(x)
                val *= 1 - c1 * dist_to_int(x) ** 2
        return ProductBound(float(val), c1, [float(a) for a in args])
