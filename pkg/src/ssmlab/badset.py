"""Bad-set scans: which theta keep Re(Theta_n theta_2 theta^j tau) near integers at most scales.

The inner loop runs in double-double arithmetic (about 104 bits). Every remainder
carries an error bound; decisions that the bound cannot settle are recomputed
exactly (Gaussian dyadic integers for integer exponents, mpmath otherwise).
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import mpmath
import numba
import numpy as np

from .ek import Annulus, GaussDyadic, block_beta, is_integer_beta

U = 2.0**-100
AMB_CAP = 1 << 20


# double-double primitives ----------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@numba.njit(cache=True, inline="always")
def _split(a):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


@numba.njit(cache=True, inline="always")
def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@numba.njit(cache=True, inline="always")
def _qts(a, b):
    s = a + b
    return s, b - (s - a)


@numba.njit(cache=True, inline="always")
def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    return _qts(s, e + al + bl)


@numba.njit(cache=True, inline="always")
def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    return _qts(p, e + ah * bl + al * bh)


@numba.njit(cache=True)
def _cmul(a, b):
    """Complex double-double product; a, b are (re_hi, re_lo, im_hi, im_lo)."""
    rr = _dd_mul(a[0], a[1], b[0], b[1])
    ii = _dd_mul(a[2], a[3], b[2], b[3])
    ri = _dd_mul(a[0], a[1], b[2], b[3])
    ir = _dd_mul(a[2], a[3], b[0], b[1])
    re = _dd_add(rr[0], rr[1], -ii[0], -ii[1])
    im = _dd_add(ri[0], ri[1], ir[0], ir[1])
    return (re[0], re[1], im[0], im[1])


@numba.njit(cache=True)
def _cpow(a, n):
    out = (1.0, 0.0, 0.0, 0.0)
    base = a
    ops = 0
    while n > 0:
        if n & 1:
            out = _cmul(out, base)
            ops += 1
        n >>= 1
        if n:
            base = _cmul(base, base)
            ops += 1
    return out, ops


@numba.njit(cache=True)
def integer_multipliers(tr, ti, block_betas, b2):
    """Q[n, j-1] = Theta_n theta_2 theta^j as double-doubles plus a relative error bound per row."""
    M = block_betas.size - 1
    Q = np.empty((M, 5, 4))
    err = np.empty(M)
    th = (tr, 0.0, ti, 0.0)
    cur, ops = _cpow(th, b2)
    for n in range(M):
        if n > 0:
            p, k = _cpow(th, block_betas[M - n])
            cur = _cmul(cur, p)
            ops += k + 1
        z = cur
        for j in range(5):
            z = _cmul(z, th)
            for c in range(4):
                Q[n, j, c] = z[c]
        err[n] = (ops + 8) * 4.0 * 2.0**-100
    return Q, err


@numba.njit(cache=True)
def _remainder_status(qh_r, ql_r, qh_i, ql_i, rel, t_r, t_i, rho):
    """1 if ||Re(Q tau)|| >= rho for sure, 0 if < rho for sure, -1 if undecided."""
    a = _two_prod(qh_r, t_r)
    a = _qts(a[0], a[1] + ql_r * t_r)
    b = _two_prod(qh_i, t_i)
    b = _qts(b[0], b[1] + ql_i * t_i)
    x = _dd_add(a[0], a[1], -b[0], -b[1])
    mag = (abs(qh_r) + abs(qh_i)) * (abs(t_r) + abs(t_i))
    if not mag < 1e290:
        return -1
    e = rel * mag + abs(x[0]) * 2.0**-100 + 1e-300
    if e > 1e-3:
        return -1
    k1 = np.rint(x[0])
    r = (x[0] - k1) + x[1]
    d = abs(r - np.rint(r))
    if d >= rho + e:
        return 1
    if d < rho - e:
        return 0
    return -1


@numba.njit(cache=True, nogil=True)
def scan_kernel(Q, err, tops, n_mod, n_ang, rho, needed, use_min, amb_t, amb_tau):
    """Per theta: status (0 good, 1 bad, 2 undecided) and the smallest exceed count over tau (capped).

    use_min: theta is bad when SOME tau has fewer than `needed` exceeding scales;
    otherwise when EVERY tau does. Undecided (theta, tau) pairs go to amb_t / amb_tau.
    """
    nt, M = Q.shape[0], Q.shape[1]
    status = np.zeros(nt, np.int8)
    mincount = np.full(nt, needed, np.int64)
    namb = 0
    overflow = False
    for t in range(nt):
        lt = math.log(tops[t])
        decided = False
        undecided = False
        for im in range(n_mod):
            r = math.exp(lt * im / (n_mod - 1)) if n_mod > 1 else 1.0
            for ia in range(n_ang):
                ang = 2.0 * math.pi * ia / n_ang
                t_r = r * math.cos(ang)
                t_i = r * math.sin(ang)
                sure = 0
                unk = 0
                for n in range(M):
                    st = 0
                    for j in range(5):
                        if rho <= 0.0:
                            s = 1
                        elif rho > 0.5:
                            s = 0
                        else:
                            s = _remainder_status(Q[t, n, j, 0], Q[t, n, j, 1], Q[t, n, j, 2], Q[t, n, j, 3],
                                                  err[n], t_r, t_i, rho)
                        if s == 1:
                            st = 1
                            break
                        if s == -1:
                            st = -1
                    if st == 1:
                        sure += 1
                    elif st == -1:
                        unk += 1
                    if sure >= needed:
                        break
                if sure >= needed:
                    if not use_min:
                        decided = True
                elif sure + unk < needed:
                    if sure < mincount[t]:
                        mincount[t] = sure
                    if use_min:
                        decided = True
                else:
                    undecided = True
                    if namb < amb_t.size:
                        amb_t[namb] = t
                        amb_tau[namb, 0] = t_r
                        amb_tau[namb, 1] = t_i
                        namb += 1
                    else:
                        overflow = True
                if decided:
                    break
            if decided:
                break
        if decided:
            status[t] = 1 if use_min else 0
        elif undecided:
            status[t] = 2
        else:
            status[t] = 0 if use_min else 1
    return status, mincount, namb, overflow


# exact fallback -------------------------------------------------------------------------

def exact_exceed_count(theta: complex, betas: Mapping, blocks: Sequence[Sequence], tau: complex, rho: float,
                       stop: int | None = None, one=1, two=2) -> int:
    """#{n < M : max_j ||Re(Theta_n theta_2 theta^j tau)|| >= rho}, computed exactly or at ample precision."""
    M = len(blocks) - 1
    stop = M if stop is None else stop
    count = 0
    if all(is_integer_beta(b) for b in betas.values()):
        rq = Fraction(rho)
        ra, rb = rq.numerator, rq.denominator.bit_length() - 1
        th = GaussDyadic.of(theta)
        cur = th ** int(complex(betas[two]).real) * GaussDyadic.of(tau)
        for n in range(M):
            if n:
                cur = cur * th ** int(block_beta(blocks[M - n], betas).real)
            z = cur
            hit = False
            for _ in range(5):
                z = z * th
                # ||re / 2^e|| >= ra / 2^rb, in integers
                m = z.re & ((1 << z.e) - 1)
                if min(m, (1 << z.e) - m) << rb >= ra << z.e:
                    hit = True
                    break
            count += hit
            if count >= stop:
                break
        return count
    grow = sum(abs(block_beta(b, betas)) for b in blocks) * (abs(math.log2(abs(theta))) + 5) + 16
    with mpmath.workprec(int(grow) + 256):
        th = mpmath.mpc(theta)
        lg = mpmath.log(th)
        cur = mpmath.exp(mpmath.mpc(betas[two]) * lg) * mpmath.mpc(tau)
        for n in range(M):
            if n:
                cur *= mpmath.exp(mpmath.mpc(block_beta(blocks[M - n], betas)) * lg)
            z = cur
            hit = False
            for _ in range(5):
                z *= th
                x = z.real
                if abs(x - mpmath.nint(x)) >= rho:
                    hit = True
                    break
            count += hit
            if count >= stop:
                break
    return count


def mp_multipliers(theta: complex, betas: Mapping, blocks: Sequence[Sequence], two=2) -> tuple[np.ndarray, np.ndarray]:
    """Q as double-doubles for non-integer exponents, via mpmath."""
    M = len(blocks) - 1
    grow = sum(abs(block_beta(b, betas)) for b in blocks) * (abs(math.log2(abs(theta))) + 5) + 16
    Q = np.empty((M, 5, 4))
    with mpmath.workprec(int(grow) + 160):
        th = mpmath.mpc(theta)
        lg = mpmath.log(th)
        cur = mpmath.exp(mpmath.mpc(betas[two]) * lg)
        for n in range(M):
            if n:
                cur *= mpmath.exp(mpmath.mpc(block_beta(blocks[M - n], betas)) * lg)
            z = cur
            for j in range(5):
                z *= th
                for c, part in ((0, z.real), (2, z.imag)):
                    hi = float(part)
                    Q[n, j, c] = hi
                    Q[n, j, c + 1] = float(part - hi)
    return Q, np.full(M, 8 * 2.0**-100)


# scan ------------------------------------------------------------------------------------

def theta_grid(annulus: Annulus, size: int = 200) -> np.ndarray:
    """Cell centres of a size x size grid on [-b, b] x [eta, b], flattened row-major."""
    xs = -annulus.b + (np.arange(size) + 0.5) * (2 * annulus.b / size)
    ys = annulus.eta + (np.arange(size) + 0.5) * ((annulus.b - annulus.eta) / size)
    X, Y = np.meshgrid(xs, ys)
    return (X + 1j * Y).ravel()


@dataclass
class ScanReport:
    M: int
    rho: float
    delta: float
    needed: int
    quantifier: str
    grid_size: int
    thetas: np.ndarray = field(repr=False)
    inside: np.ndarray = field(repr=False)
    bad: np.ndarray = field(repr=False)
    exceed: np.ndarray = field(repr=False)
    fallback_pairs: int = 0
    cover_side: float = 0.0
    cover_count: int = 0

    @property
    def cells(self) -> int:
        return int(self.inside.sum())

    @property
    def bad_count(self) -> int:
        return int(self.bad[self.inside].sum())

    @property
    def bad_fraction(self) -> float:
        return self.bad_count / max(1, self.cells)

    def cover_exponent(self, a: float) -> float:
        """log(cover count) / (M log a): compare with alpha in a^(alpha M)."""
        return math.log(self.cover_count) / (self.M * math.log(a)) if self.cover_count else 0.0

    def summary(self) -> dict:
        return {
            "M": self.M,
            "rho": self.rho,
            "delta": self.delta,
            "needed": self.needed,
            "quantifier": self.quantifier,
            "cells": self.cells,
            "bad_count": self.bad_count,
            "bad_fraction": self.bad_fraction,
            "cover_side": self.cover_side,
            "cover_count": self.cover_count,
            "fallback_pairs": self.fallback_pairs,
        }

    def to_csv(self) -> str:
        rows = ["theta_re,theta_im,bad_flag,exceed_count"]
        for z, b, e in zip(self.thetas[self.inside], self.bad[self.inside], self.exceed[self.inside]):
            rows.append(f"{z.real!r},{z.imag!r},{int(b)},{int(e)}")
        return "\n".join(rows) + "\n"


def thread_count() -> int:
    v = os.environ.get("SSM_LAB_THREADS")
    return max(1, int(v)) if v else 1


def _run_kernel(Q, err, tops, n_mod, n_ang, rho, needed, use_min, chunk: int = 512):
    """scan_kernel over chunks of theta; a chunk whose undecided pairs overflow is redone theta by theta."""
    nt = Q.shape[0]
    status = np.empty(nt, np.int8)
    mincount = np.empty(nt, np.int64)
    pairs: list[tuple[int, complex]] = []
    amb_t = np.empty(AMB_CAP, np.int64)
    amb_tau = np.empty((AMB_CAP, 2))
    for s in range(0, nt, chunk):
        sl = slice(s, min(nt, s + chunk))
        st, mc, na, ov = scan_kernel(Q[sl], err, tops[sl], n_mod, n_ang, rho, needed, use_min, amb_t, amb_tau)
        if ov:
            one_t = np.empty(n_mod * n_ang, np.int64)
            one_tau = np.empty((n_mod * n_ang, 2))
            for k in range(sl.start, sl.stop):
                st1, mc1, na1, _ = scan_kernel(Q[k : k + 1], err, tops[k : k + 1], n_mod, n_ang, rho, needed,
                                               use_min, one_t, one_tau)
                status[k], mincount[k] = st1[0], mc1[0]
                pairs += [(k, complex(one_tau[i, 0], one_tau[i, 1])) for i in range(na1)]
            continue
        status[sl], mincount[sl] = st, mc
        pairs += [(s + int(amb_t[i]), complex(amb_tau[i, 0], amb_tau[i, 1])) for i in range(na)]
    return status, mincount, pairs


def bad_set_scan(blocks: Sequence[Sequence], betas: Mapping, rho: float, delta: float, annulus: Annulus,
                 grid_size: int = 200, tau_moduli: int = 64, tau_angles: int = 32, quantifier: str = "min",
                 one=1, two=2) -> ScanReport:
    """Mark grid thetas of E_(omega,M)(rho, delta) from M+1 blocks W_1..W_(M+1).

    quantifier 'min': theta is bad if some sampled tau has fewer than delta M
    exceeding scales; 'max': if every sampled tau does.
    """
    if quantifier not in ("min", "max"):
        raise ValueError("quantifier must be 'min' or 'max'")
    M = len(blocks) - 1
    needed = max(0, math.ceil(delta * M - 1e-9))
    thetas = theta_grid(annulus, grid_size)
    inside = np.array([annulus.contains(z) for z in thetas])
    idx = np.flatnonzero(inside)
    integer = all(is_integer_beta(b) for b in betas.values())
    Q = np.empty((idx.size, M, 5, 4))
    err = np.empty(M)
    if integer:
        bb = np.array([int(block_beta(b, betas).real) for b in blocks], dtype=np.int64)
        b2 = int(complex(betas[two]).real)
        for k, i in enumerate(idx):
            q, e = integer_multipliers(thetas[i].real, thetas[i].imag, bb, b2)
            Q[k] = q
            err = np.maximum(err, e) if k else e
        tops = np.abs(thetas[idx]) ** float(bb[M])
    else:
        for k, i in enumerate(idx):
            Q[k], e = mp_multipliers(complex(thetas[i]), betas, blocks, two)
            err = e
        top_beta = block_beta(blocks[M], betas)
        tops = np.array([abs(complex(mpmath.exp(mpmath.mpc(top_beta) * mpmath.log(mpmath.mpc(thetas[i]))))) for i in idx])
    status, mincount, pairs = _run_kernel(Q, err, tops, tau_moduli, tau_angles, float(rho), needed, quantifier == "min")
    pending: dict[int, list] = {}
    for k, tau in pairs:
        pending.setdefault(k, []).append(tau)
    for k, taus in pending.items():
        if status[k] != 2:
            continue
        th = complex(thetas[idx[k]])
        verdict = quantifier != "min"
        for tau in taus:
            c = exact_exceed_count(th, betas, blocks, tau, rho, stop=needed, one=one, two=two)
            mincount[k] = min(mincount[k], c)
            if quantifier == "min" and c < needed:
                verdict = True
                break
            if quantifier == "max" and c >= needed:
                verdict = False
                break
        status[k] = 1 if verdict else 0
    bad = np.zeros(thetas.size, dtype=bool)
    exceed = np.zeros(thetas.size, dtype=np.int64)
    bad[idx] = status == 1
    exceed[idx] = mincount
    side = annulus.a ** (-M)
    pts = thetas[bad]
    boxes = {(math.floor(z.real / side), math.floor(z.imag / side)) for z in pts}
    return ScanReport(M, float(rho), float(delta), needed, quantifier, grid_size, thetas, inside, bad, exceed,
                      len(pairs), side, len(boxes))
