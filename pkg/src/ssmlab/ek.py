"""Erdos-Kahane bookkeeping: integer/remainder traces, theta recovery and the approximation and successor checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import mpmath
import numpy as np

from .fourier import split_blocks


class DomainError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Annulus:
    """A_{a,b,eta} = {theta : a <= |theta| <= b, Im theta > eta}."""

    a: float
    b: float
    eta: float

    def __post_init__(self):
        if not 1 < self.a < self.b or self.eta <= 0:
            raise ValueError("annulus needs 1 < a < b and eta > 0")

    def contains(self, theta: complex) -> bool:
        r = abs(theta)
        return self.a <= r <= self.b and theta.imag > self.eta

    def enlarged(self) -> "Annulus":
        return Annulus((1 + self.a) / 2, self.b + 1, self.eta / 2)

    def beta_range(self) -> tuple[float, float]:
        lo = math.log(self.a) / (math.log(self.b) + math.pi)
        return lo, 1.0 / lo

    def sample(self, rng: np.random.Generator) -> complex:
        while True:
            z = complex(rng.uniform(-self.b, self.b), rng.uniform(self.eta, self.b))
            if self.contains(z):
                return z


def is_integer_beta(beta) -> bool:
    b = complex(beta)
    return b.imag == 0 and b.real == int(b.real) and b.real >= 1


def theta_power(theta: complex, beta) -> complex:
    """theta^beta = exp(beta log theta), principal branch."""
    if is_integer_beta(beta):
        return complex(theta) ** int(complex(beta).real)
    return complex(mpmath.exp(mpmath.mpc(beta) * mpmath.log(mpmath.mpc(theta))))


def check_parameters(annulus: Annulus, theta: complex, betas: Mapping) -> None:
    if not annulus.contains(theta):
        raise DomainError(f"theta = {theta} is outside A_({annulus.a},{annulus.b},{annulus.eta})")
    lo, hi = annulus.beta_range()
    for s, b in betas.items():
        if not lo <= abs(complex(b)) <= hi:
            raise DomainError(f"|beta_{s}| = {abs(complex(b))} outside [{lo}, {hi}]")
        r = abs(theta_power(theta, b))
        if not annulus.a * (1 - 1e-12) <= r <= annulus.b * (1 + 1e-12):
            raise DomainError(f"|theta^beta_{s}| = {r} outside [a, b]")


def block_beta(block: Sequence, betas: Mapping) -> complex:
    return sum((complex(betas[s]) for s in block), 0j)


# exact Gaussian dyadic arithmetic ------------------------------------------------

@dataclass(frozen=True)
class GaussDyadic:
    """(re + i im) / 2^e with integer re, im, e."""

    re: int
    im: int
    e: int = 0

    @classmethod
    def of(cls, z: complex) -> "GaussDyadic":
        fr, fi = Fraction(z.real), Fraction(complex(z).imag)
        er = fr.denominator.bit_length() - 1
        ei = fi.denominator.bit_length() - 1
        e = max(er, ei)
        return cls(fr.numerator << (e - er), fi.numerator << (e - ei), e)

    def __mul__(self, o: "GaussDyadic") -> "GaussDyadic":
        return GaussDyadic(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re, self.e + o.e)

    def __pow__(self, n: int) -> "GaussDyadic":
        out, base = GaussDyadic(1, 0, 0), self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    @property
    def real(self) -> Fraction:
        return Fraction(self.re, 1 << self.e)

    @property
    def imag(self) -> Fraction:
        return Fraction(self.im, 1 << self.e)

    def bits(self) -> int:
        return max(abs(self.re).bit_length(), abs(self.im).bit_length()) - self.e

    def to_mpc(self) -> mpmath.mpc:
        return mpmath.mpc(mpmath.mpf((self.re, -self.e)), mpmath.mpf((self.im, -self.e)))


def round_half_even(x: Fraction) -> int:
    return round(x)


def _mpf(x) -> mpmath.mpf:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


# traces ---------------------------------------------------------------------------

@dataclass
class EKTrace:
    """Re(Theta_n theta_2 theta^j tau) = K[n][j-1] + eps[n][j-1], n < M, j = 1..5."""

    theta: complex
    betas: dict
    blocks: tuple
    tau: complex
    M: int
    K: list
    eps: list
    Theta: list
    exact: bool
    prec: int
    one: object = 1
    two: object = 2
    z: list = field(default_factory=list, repr=False)

    def block_len(self, n: int) -> int:
        """|W_(M-n)|, the block multiplying Theta_n into Theta_(n+1)."""
        return len(self.blocks[self.M - n - 1])

    def step_beta(self, n: int) -> complex:
        return block_beta(self.blocks[self.M - n - 1], self.betas)

    def max_eps(self, n: int) -> float:
        return max(abs(e) for e in self.eps[n])

    def log_abs_theta_tau(self, n: int) -> float:
        with mpmath.workprec(self.prec):
            return float(mpmath.log(abs(self.Theta[n] * mpmath.mpc(self.tau))))

    def as_dict(self) -> dict:
        return {
            "theta": [self.theta.real, self.theta.imag],
            "tau": [self.tau.real, self.tau.imag],
            "M": self.M,
            "block_lengths": [len(b) for b in self.blocks],
            "exact": self.exact,
            "max_abs_eps": max(max(abs(e) for e in row) for row in self.eps),
        }


def ek_trace(theta: complex, betas: Mapping, blocks: Sequence[Sequence], tau: complex, one=1, two=2,
             annulus: Annulus | None = None) -> EKTrace:
    """Fill K, eps by nearest-integer rounding (ties to even) from M+1 blocks W_1..W_(M+1)."""
    theta, tau = complex(theta), complex(tau)
    betas = {s: complex(b) for s, b in betas.items()}
    blocks = tuple(tuple(b) for b in blocks)
    if len(blocks) < 2:
        raise ValueError("need blocks W_1..W_(M+1) with M >= 1")
    pat = (one,) * 5 + (two,)
    for b in blocks:
        if tuple(b[-6:]) != pat:
            raise ValueError("every block must end in 1^5 2")
    if annulus is not None:
        check_parameters(annulus, theta, betas)
    M = len(blocks) - 1
    top = abs(theta_power(theta, block_beta(blocks[M], betas)))
    if not 1.0 <= abs(tau) <= top:
        raise DomainError(f"|tau| = {abs(tau)} outside [1, {top}]")
    exact = all(is_integer_beta(b) for b in betas.values())
    if exact:
        return _exact_trace(theta, betas, blocks, tau, M, one, two)
    return _mp_trace(theta, betas, blocks, tau, M, one, two)


def _exact_trace(theta, betas, blocks, tau, M, one, two) -> EKTrace:
    th = GaussDyadic.of(theta)
    bint = {s: int(b.real) for s, b in betas.items()}
    start = th ** bint[two] * GaussDyadic.of(tau)
    Theta_x = [GaussDyadic(1, 0, 0)]
    for n in range(M):
        Theta_x.append(Theta_x[-1] * th ** sum(bint[s] for s in blocks[M - n - 1]))
    zs, K, eps = [], [], []
    for n in range(M):
        z = Theta_x[n] * start
        row_z, row_k, row_e = [], [], []
        for j in range(5):
            z = z * th
            x = z.real
            k = round_half_even(x)
            row_z.append(z)
            row_k.append(k)
            row_e.append(float(x - k))
        zs.append(row_z)
        K.append(row_k)
        eps.append(row_e)
    bits = max(zs[-1][-1].bits(), Theta_x[-1].bits(), 1)
    prec = bits + 256
    with mpmath.workprec(prec):
        z_mp = [[v.to_mpc() for v in row] for row in zs]
        Theta = [v.to_mpc() for v in Theta_x]
    return EKTrace(theta, betas, blocks, tau, M, K, eps, Theta, True, prec, one, two, z_mp)


def _mp_trace(theta, betas, blocks, tau, M, one, two) -> EKTrace:
    # estimate the size of the largest entry to set the working precision
    logs = abs(theta) and math.log2(abs(theta))
    growth = sum(abs(block_beta(b, betas)) for b in blocks) * (logs + math.pi / math.log(2)) + 16
    prec = int(growth + math.log2(max(2.0, abs(tau)))) + 256
    with mpmath.workprec(prec):
        th = mpmath.mpc(theta)
        lg = mpmath.log(th)
        pw = lambda b: mpmath.exp(mpmath.mpc(b) * lg)
        Theta = [mpmath.mpc(1)]
        for n in range(M):
            Theta.append(Theta[-1] * pw(block_beta(blocks[M - n - 1], betas)))
        start = pw(betas[two]) * mpmath.mpc(tau)
        zs, K, eps = [], [], []
        for n in range(M):
            z = Theta[n] * start
            row_z, row_k, row_e = [], [], []
            for j in range(5):
                z = z * th
                k = int(mpmath.nint(z.real))
                row_z.append(z)
                row_k.append(k)
                row_e.append(float(z.real - k))
            zs.append(row_z)
            K.append(row_k)
            eps.append(row_e)
    return EKTrace(theta, betas, blocks, tau, M, K, eps, Theta, False, prec, one, two, zs)


# recovering theta from four real parts ----------------------------------------------

def closed_form(x0, x1, x2, x3):
    """(theta, y3) solving x_j = Re(theta^(j-3)(x3 + i y3)) via the recurrence x_(j+2) = p x_(j+1) - q x_j."""
    det = x0 * x2 - x1 * x1
    p = (x0 * x3 - x1 * x2) / det
    q = (x1 * x3 - x2 * x2) / det
    disc = q - p * p / 4
    s = np.sqrt(disc)
    return p / 2 + 1j * s, (x2 * q - p * x3 / 2) / s


def _frac_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    n, d = x.numerator, x.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    return Fraction(rn, rd) if rn * rn == n and rd * rd == d else None


@dataclass
class ExactSolution:
    """theta and y3 as exact rationals when the discriminant is a rational square, else mpmath values."""

    re: object
    im: object
    y3: object
    exact: bool

    def theta_mp(self) -> mpmath.mpc:
        return mpmath.mpc(_mpf(self.re), _mpf(self.im))

    def y3_mp(self) -> mpmath.mpf:
        return _mpf(self.y3)


def solve_exact(x: Sequence[int]) -> ExactSolution:
    """Closed form on integer (or rational) data; square roots in mpmath at the current precision."""
    x0, x1, x2, x3 = (Fraction(v) for v in x)
    det = x0 * x2 - x1 * x1
    if det == 0:
        raise SolverError("degenerate data: x0 x2 = x1^2")
    p = (x0 * x3 - x1 * x2) / det
    q = (x1 * x3 - x2 * x2) / det
    disc = q - p * p / 4
    if disc <= 0:
        raise SolverError("no solution with Im theta > 0")
    s = _frac_sqrt(disc)
    if s is not None:
        return ExactSolution(p / 2, s, (x2 * q - p * x3 / 2) / s, True)
    sm = mpmath.sqrt(_mpf(disc))
    return ExactSolution(p / 2, sm, (_mpf(x2 * q - p * x3 / 2)) / sm, False)


def G(x) -> float:
    """y3 as a function of (x0, x1, x2, x3)."""
    return float(closed_form(*(float(v) for v in x))[1].real)


def F(x) -> complex:
    """theta as a function of (x0, x1, x2, x3)."""
    return complex(closed_form(*(float(v) for v in x))[0])


def _residuals(u, x):
    th = complex(u[0], u[1])
    w = complex(x[3], u[2])
    return np.array([(th ** (j - 3) * w).real - x[j] for j in range(3)])


def _jacobian(u, x):
    th = complex(u[0], u[1])
    w = complex(x[3], u[2])
    J = np.empty((3, 3))
    for j in range(3):
        d = (j - 3) * th ** (j - 4) * w
        J[j] = [d.real, (1j * d).real, (1j * th ** (j - 3)).real]
    return J


@dataclass
class Recovery:
    theta: complex
    y3: float
    residual: float
    start: int


def recover_theta(x: Sequence[float], starts: int = 8, tol: float = 1e-9, max_iter: int = 100) -> Recovery:
    """Damped Newton over (Re theta, Im theta, y3) from several starts; keeps Im theta > 0."""
    x = np.asarray(x, dtype=float)
    scale = max(1.0, float(np.max(np.abs(x))))
    guesses = []
    with np.errstate(all="ignore"):
        th0, y0 = closed_form(*x)
    if np.isfinite(th0) and th0.imag > 0:
        guesses.append((th0.real, th0.imag, float(np.real(y0))))
    for k in range(starts):
        ang = math.pi * (k + 0.5) / starts
        for mod in (1.5, 3.0):
            th = mod * complex(math.cos(ang), math.sin(ang))
            y = float((th**3 * complex(x[0], 0)).imag)
            guesses.append((th.real, th.imag, y))
    best = None
    for i, g in enumerate(guesses):
        u = np.array(g, dtype=float)
        r = _residuals(u, x)
        nr = np.max(np.abs(r)) / scale
        for _ in range(max_iter):
            if nr < 1e-15:
                break
            try:
                step = np.linalg.solve(_jacobian(u, x), -r)
            except np.linalg.LinAlgError:
                break
            t = 1.0
            while t > 1e-6:
                v = u + t * step
                if v[1] > 0:
                    rv = _residuals(v, x)
                    nv = np.max(np.abs(rv)) / scale
                    if np.isfinite(nv) and nv < nr:
                        u, r, nr = v, rv, nv
                        break
                t /= 2
            else:
                break
        if u[1] > 0 and (best is None or nr < best.residual):
            best = Recovery(complex(u[0], u[1]), float(u[2]), float(nr), i)
        if best is not None and best.residual < 1e-14:
            break
    if best is None or best.residual >= tol:
        raise SolverError(f"no convergent start; best residual {None if best is None else best.residual}")
    return best


# constants ---------------------------------------------------------------------------

@dataclass
class EKConstants:
    a: float
    b: float
    eta: float
    beta_max: float
    C3: float
    D: float
    R0: float
    n1: int
    n2: int
    n3: int
    C4: float
    C5: float
    C6: float
    C7: float
    C8: float

    def B(self, block_len: int) -> mpmath.mpf:
        return mpmath.mpf(self.C7) * mpmath.mpf(self.C8) ** block_len

    def rho(self, block_len: int) -> mpmath.mpf:
        return 1 / (2 * self.B(block_len))

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _gradients(theta: np.ndarray, y3: np.ndarray, x3: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """|dG/dx_k| and |dF/dx_k| from the implicit function theorem at solutions (theta, y3) of the system."""
    w = x3 + 1j * y3
    J = np.empty(theta.shape + (3, 3))
    Jx3 = np.empty(theta.shape + (3,))
    for j in range(3):
        d = (j - 3) * theta ** (j - 4) * w
        J[..., j, 0] = d.real
        J[..., j, 1] = (1j * d).real
        J[..., j, 2] = (1j * theta ** (j - 3)).real
        Jx3[..., j] = (theta ** (j - 3)).real
    rhs = np.zeros(theta.shape + (3, 4))
    for k in range(3):
        rhs[..., k, k] = 1.0
    rhs[..., :, 3] = -Jx3
    du = np.linalg.solve(J, rhs)
    dG = np.abs(du[..., 2, :])
    dF = np.hypot(du[..., 0, :], du[..., 1, :])
    return dG, dF


def compute_constants(annulus: Annulus, betas: Mapping, grid: int = 24, phases: int = 64) -> EKConstants:
    """Effective C3..C8, R0, n1..n3 for the annulus.

    C3 and D are 1.25 times the largest derivatives of G and of theta = F (times
    |z0|), computed by the implicit function theorem over a grid on the enlarged
    annulus and 64 phases of z0. Both are scale free, and every point within
    l-infinity distance 1 of V_R0 is itself a solution with theta in the enlarged
    annulus, so the grid supremum covers the whole neighbourhood.
    """
    a, b, eta = annulus.a, annulus.b, annulus.eta
    big = annulus.enlarged()
    thetas = []
    for mod in np.linspace(big.a, big.b, grid):
        lo = math.asin(min(1.0, big.eta / mod)) + 1e-9
        for ang in np.linspace(lo, math.pi - lo, 2 * grid):
            thetas.append(mod * complex(math.cos(ang), math.sin(ang)))
    thetas = np.array(thetas)
    phi = np.exp(2j * np.pi * np.arange(phases) / phases)
    th = np.repeat(thetas, phases)
    z0 = np.tile(phi, thetas.size)
    dG, dF = _gradients(th, (th**3 * z0).imag, (th**3 * z0).real)
    c3 = float(dG.max())
    d = float(dF.max())
    C3 = 1.25 * c3
    D = 1.25 * d
    R0 = 4 * D / min((a - 1) / 2, eta / 2)
    C4 = (1 + 3 * b) * (1 + 8 * C3)
    beta_max = max(abs(complex(v)) for v in betas.values())
    base = math.exp(math.pi + 1) * (b + 1)
    C5 = 2 / (1 + a) * base**5
    C6 = base**beta_max
    C7 = 4 * C3 + 2 + 2 * b**6 * C4 * C5
    C8 = max(b, C6)
    la = 5 * math.log(a)
    n1 = max(1, math.ceil(math.log(R0) / la))
    n2 = max(n1, math.floor(math.log(1 + 4 * C3) / la) + 1)
    n3 = max(n2, math.floor(math.log(C4 / (2 * min((a - 1) / 2, 1.0, eta / 2))) / la) + 1)
    return EKConstants(a, b, eta, beta_max, C3, D, R0, n1, n2, n3, C4, C5, C6, C7, C8)


# approximation and successor checks --------------------------------------------------------------------------

def _psi(Krow: Sequence[int]):
    """Psi(K_1..K_5) = (K_5 + i G(K_2..K_5)) / (K_4 + i G(K_1..K_4)); exact when possible."""
    s4 = solve_exact(Krow[0:4])
    s5 = solve_exact(Krow[1:5])
    if s4.exact and s5.exact:
        num = (Fraction(Krow[4]), s5.y3)
        den = (Fraction(Krow[3]), s4.y3)
        nrm = den[0] ** 2 + den[1] ** 2
        re = (num[0] * den[0] + num[1] * den[1]) / nrm
        im = (num[1] * den[0] - num[0] * den[1]) / nrm
        return (re, im), (num[0], num[1])
    num = mpmath.mpc(Krow[4], s5.y3_mp())
    den = mpmath.mpc(Krow[3], s4.y3_mp())
    return num / den, num


def _cpow_exact(z: tuple, n: int) -> tuple:
    re, im = Fraction(1), Fraction(0)
    br, bi = z
    while n:
        if n & 1:
            re, im = re * br - im * bi, re * bi + im * br
        br, bi = br * br - bi * bi, 2 * br * bi
        n >>= 1
    return re, im


def _theta_exact(theta: complex) -> tuple:
    return Fraction(theta.real), Fraction(theta.imag)


@dataclass
class ApproxCheck:
    n: int
    lhs: float
    rhs: float
    holds: bool


def theta_approximation_error(trace: EKTrace, n: int, const: EKConstants) -> ApproxCheck:
    """|theta - Psi(K_n)| against C4 |Theta_n tau|^-1 max_j |eps_(n,j)|."""
    if not const.n2 <= n < trace.M:
        raise ValueError(f"n = {n} outside [n2 = {const.n2}, M = {trace.M})")
    with mpmath.workprec(trace.prec):
        psi, _ = _psi(trace.K[n])
        if isinstance(psi, tuple):
            tr, ti = _theta_exact(trace.theta)
            if (tr, ti) == psi:
                lhs = mpmath.mpf(0)
            else:
                lhs = abs(mpmath.mpc(trace.theta) - mpmath.mpc(_mpf(psi[0]), _mpf(psi[1])))
        else:
            lhs = abs(mpmath.mpc(trace.theta) - psi)
        rhs = const.C4 * trace.max_eps(n) / abs(trace.Theta[n] * mpmath.mpc(trace.tau))
        return ApproxCheck(n, float(lhs), float(rhs), bool(lhs <= rhs))


@dataclass
class StepCheck:
    n: int
    block_len: int
    B: float
    rho: float
    E: float
    count: int
    count_ok: bool
    bound_ok: bool
    unique_required: bool
    unique_ok: bool
    predicted: list

    @property
    def holds(self) -> bool:
        return self.count_ok and self.bound_ok and (self.unique_ok or not self.unique_required)


def ek_step_uniqueness(trace: EKTrace, n: int, const: EKConstants) -> StepCheck:
    """Predict K_(n+1,j) = Re[Psi^s (K_(n,5) + i Y~_(n,5))], s = beta(W_(M-n)) + j - 5.

    Candidates are the integers within B_n E of the prediction; with the a-priori
    E = 1/2 their number is at most B_n + 1 <= 2 B_n + 1. When the true E is below
    rho_n the only candidate must be K_(n+1,j).
    """
    if not const.n3 <= n < trace.M - 1:
        raise ValueError(f"n = {n} outside [n3 = {const.n3}, M - 1 = {trace.M - 1})")
    L = trace.block_len(n)
    sb = trace.step_beta(n)
    E = max(trace.max_eps(n), trace.max_eps(n + 1))
    with mpmath.workprec(trace.prec):
        B = const.B(L)
        rho = 1 / (2 * B)
        psi, w = _psi(trace.K[n])
        preds = []
        for j in range(1, 6):
            s = sb + j - 5
            if isinstance(psi, tuple) and s.imag == 0 and s.real == int(s.real) and s.real >= 0:
                pr, pi = _cpow_exact(psi, int(s.real))
                preds.append(pr * w[0] - pi * w[1])
            else:
                # Psi^beta(W) times an integer power, the same split the trace uses for theta
                ps = mpmath.mpc(_mpf(psi[0]), _mpf(psi[1])) if isinstance(psi, tuple) else psi
                ww = mpmath.mpc(_mpf(w[0]), _mpf(w[1])) if isinstance(w, tuple) else w
                preds.append((mpmath.power(ps, mpmath.mpc(sb)) * ps ** (j - 5) * ww).real)
        half = B / 2
        count = 0
        bound_ok = True
        unique_ok = True
        for j, A in enumerate(preds):
            Am = _mpf(A)
            c = int(mpmath.floor(Am + half)) - int(mpmath.ceil(Am - half)) + 1
            count = max(count, c)
            k_next = trace.K[n + 1][j]
            if abs(k_next - Am) > B * E * (1 + mpmath.mpf(2) ** (-64)) and not (isinstance(A, Fraction) and A == k_next):
                bound_ok = False
            if E < rho:
                r = round(A) if isinstance(A, Fraction) else int(mpmath.nint(Am))
                unique_ok &= r == k_next
        count_ok = count <= 2 * B + 1
        return StepCheck(n, L, float(B), float(rho), E, count, bool(count_ok), bound_ok, bool(E < rho), unique_ok,
                         [float(_mpf(A)) for A in preds])


# random traces ------------------------------------------------------------------------

def random_blocks(rng: np.random.Generator, count: int, q1: float = 5 / 6, one=1, two=2, chunk: int = 256) -> list[tuple]:
    """The first `count` blocks W_i = W'_i 1^5 2 of a Bernoulli(q1, 1 - q1) sequence over {one, two}."""
    seq: list = []
    blocks: list = []
    while len(blocks) < count:
        draw = rng.random(chunk) < q1
        seq.extend(one if d else two for d in draw)
        blocks, _ = split_blocks(seq, one, two)
    return blocks[:count]


def _random_tau(rng, top: float, gaussian: bool) -> complex:
    while True:
        r = math.exp(rng.uniform(0, math.log(top)))
        a = rng.uniform(0, 2 * math.pi)
        t = r * complex(math.cos(a), math.sin(a))
        if gaussian:
            t = complex(round(t.real), round(t.imag))
        if 1 <= abs(t) <= top:
            return t


EXACT_THETAS = (2j, 1 + 1j, -1 + 1j)


def random_trace(rng: np.random.Generator, annulus: Annulus, M: int, kind: str = "float", q1: float = 5 / 6) -> EKTrace:
    """kind: 'float' (random theta, beta = 1), 'complex' (random theta and complex beta_2) or 'exact'."""
    blocks = random_blocks(rng, M + 1, q1)
    if kind == "exact":
        cands = [t for t in EXACT_THETAS if annulus.contains(t)]
        theta = cands[int(rng.integers(len(cands)))]
        betas = {1: 1, 2: 1}
    elif kind == "float":
        theta = annulus.sample(rng)
        betas = {1: 1, 2: 1}
    elif kind == "complex":
        lo, hi = annulus.beta_range()
        while True:
            theta = annulus.sample(rng)
            b2 = complex(rng.uniform(0.5, 1.5), rng.uniform(-0.3, 0.3))
            if lo <= abs(b2) <= hi and annulus.a <= abs(theta_power(theta, b2)) <= annulus.b:
                break
        betas = {1: 1, 2: b2}
    else:
        raise ValueError(f"unknown trace kind {kind!r}")
    top = abs(theta_power(theta, block_beta(blocks[M], betas)))
    tau = _random_tau(rng, top, kind == "exact")
    return ek_trace(theta, betas, blocks, tau, annulus=annulus)


@dataclass
class SuiteReport:
    traces: int
    eps_ok: bool
    approx_checks: int
    approx_ok: bool
    step_checks: int
    unique_cases: int
    unique_ok: bool
    count_ok: bool
    bound_ok: bool
    max_ratio: float
    failures: list

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def trace_suite(count: int, seed: int, annulus: Annulus, const: EKConstants | None = None, M: int | None = None,
                exact_count: int = 10, complex_count: int = 0) -> SuiteReport:
    """Run the remainder/approximation/step checks on seeded random traces at every admissible n."""
    rng = np.random.default_rng([seed, 5])
    if const is None:
        const = compute_constants(annulus, {1: 1, 2: 1.6})
    M = const.n3 + 4 if M is None else M
    kinds = ["exact"] * exact_count + ["complex"] * complex_count
    kinds += ["float"] * (count - len(kinds))
    eps_ok = approx_ok = unique_ok = count_ok = bound_ok = True
    n_approx = n_step = n_unique = 0
    max_ratio = 0.0
    failures = []
    for i, kind in enumerate(kinds):
        tr = random_trace(rng, annulus, M, kind)
        if max(max(abs(e) for e in row) for row in tr.eps) > 0.5:
            eps_ok = False
            failures.append((i, "eps"))
        for n in range(const.n2, tr.M):
            c = theta_approximation_error(tr, n, const)
            n_approx += 1
            if c.rhs > 0:
                max_ratio = max(max_ratio, c.lhs / c.rhs)
            if not c.holds:
                approx_ok = False
                failures.append((i, "approx", n))
        for n in range(const.n3, tr.M - 1):
            s = ek_step_uniqueness(tr, n, const)
            n_step += 1
            n_unique += s.unique_required
            count_ok &= s.count_ok
            bound_ok &= s.bound_ok
            if s.unique_required and not s.unique_ok:
                unique_ok = False
                failures.append((i, "unique", n))
    return SuiteReport(len(kinds), eps_ok, n_approx, approx_ok, n_step, n_unique, unique_ok, count_ok, bound_ok,
                       max_ratio, failures)
