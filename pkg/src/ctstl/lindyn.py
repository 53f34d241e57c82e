"""Linear plants under zero-order hold, via a real Jordan decomposition.

With ``A = V J V^-1`` every matrix exponential and every input integral is a
finite sum of ``exp(lam t) t^j`` terms, so discretisation, dense propagation
and the expansion of affine functionals along the flow are all closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DEFAULT_JORDAN_TOL = 1e-8


class SpectrumError(ValueError):
    """A has eigenvalues the planner cannot handle (complex ones)."""


class ConditioningError(ValueError):
    """The numerical Jordan basis is too ill-conditioned to trust."""


@dataclass(frozen=True)
class LinearSystem:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("system matrices must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class JordanForm:
    """``A = V J V^-1`` with ``J`` upper-triangular Jordan blocks ``(lam, size)``."""

    V: np.ndarray
    blocks: tuple
    Vinv: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        blocks = tuple((float(lam), int(s)) for lam, s in self.blocks)
        if sum(s for _, s in blocks) != V.shape[0]:
            raise ValueError("block sizes must sum to the state dimension")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "blocks", blocks)
        if self.Vinv is None:
            object.__setattr__(self, "Vinv", np.linalg.inv(V))

    @property
    def kappa(self) -> int:
        return len(self.blocks)

    def J(self) -> np.ndarray:
        n = self.V.shape[0]
        J = np.zeros((n, n))
        k = 0
        for lam, s in self.blocks:
            for r in range(s):
                J[k + r, k + r] = lam
                if r + 1 < s:
                    J[k + r, k + r + 1] = 1.0
            k += s
        return J

    def components(self):
        """Yield ``(lam, j, E)`` with ``exp(A t) = sum E exp(lam t) t^j``."""
        k = 0
        for lam, s in self.blocks:
            Vi = self.V[:, k:k + s]
            Wi = self.Vinv[k:k + s, :]
            S = np.eye(s, k=1)
            Sj = np.eye(s)
            for j in range(s):
                yield lam, j, (Vi @ Sj @ Wi) / math.factorial(j)
                Sj = Sj @ S
            k += s


def _cluster(values: np.ndarray, gap: float) -> list:
    order = np.argsort(values)
    groups: list = []
    for idx in order:
        if groups and values[idx] - values[groups[-1][-1]] <= gap:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    return groups


def _nullity(M: np.ndarray, rtol: float) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s <= rtol * max(1.0, s[0])))


def _null_basis(M: np.ndarray, k: int) -> np.ndarray:
    """Orthonormal basis of the ``k`` smallest right singular directions."""
    if k == 0:
        return np.zeros((M.shape[1], 0))
    _, _, Vt = np.linalg.svd(M)
    return Vt[-k:, :].T


def _orth(M: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    if M.shape[1] == 0:
        return M
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > rtol * max(1.0, s[0] if s.size else 0.0)))
    return U[:, :r]


def _sign_normalise(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def _nilpotent_chains(N: np.ndarray, rtol: float) -> list:
    """Jordan chains of a nilpotent ``N``; each chain is [eigvec, ..., head]."""
    m = N.shape[0]
    scale = max(1.0, float(np.linalg.norm(N, 2)))
    if np.abs(np.linalg.matrix_power(N, m)).max() > rtol * scale ** m * 1e3:
        raise ConditioningError("eigenvalue cluster is not a single eigenvalue")
    kernels = [np.zeros((m, 0))]
    P = np.eye(m)
    while kernels[-1].shape[1] < m:
        P = P @ N
        p = len(kernels)
        k = _nullity(P, rtol * scale ** p)
        if k <= kernels[-1].shape[1] and p > m:
            raise ConditioningError("could not resolve the nilpotent structure")
        kernels.append(_null_basis(P, max(k, kernels[-1].shape[1])))
    q = len(kernels) - 1
    heads: list = []  # (level, vector)
    for p in range(q, 0, -1):
        existing = [np.linalg.matrix_power(N, h - p) @ v for h, v in heads if h > p]
        need = kernels[p].shape[1] - kernels[p - 1].shape[1] - len(existing)
        if need <= 0:
            continue
        span = np.column_stack([kernels[p - 1], *existing]) if existing else kernels[p - 1]
        Q = _orth(span)
        R = kernels[p] - Q @ (Q.T @ kernels[p])
        U, _, _ = np.linalg.svd(R, full_matrices=False)
        for c in range(need):
            heads.append((p, _sign_normalise(U[:, c])))
    chains = []
    for h, v in sorted(heads, key=lambda hv: -hv[0]):
        chain = [np.linalg.matrix_power(N, h - 1 - r) @ v for r in range(h)]
        chains.append(chain)
    if sum(len(c) for c in chains) != m:
        raise ConditioningError("inconsistent Jordan chain structure")
    return chains


def _build(A, clusters, vals, rtol):
    n = A.shape[0]
    cols = []
    blocks = []
    for group in clusters:
        lam = float(np.mean(vals[group]))
        if abs(lam) <= rtol * max(1.0, np.abs(A).max()):
            lam = 0.0
        mult = len(group)
        M = np.linalg.matrix_power(A - lam * np.eye(n), mult)
        G = _null_basis(M, mult)
        NG = G.T @ (A - lam * np.eye(n)) @ G
        for chain in _nilpotent_chains(NG, rtol):
            cols.extend(G @ c for c in chain)
            blocks.append((lam, len(chain)))
    return np.column_stack(cols), blocks


def jordan_decompose(sys: LinearSystem, tol: float = DEFAULT_JORDAN_TOL) -> JordanForm:
    """Real Jordan decomposition of ``sys.A``.

    Eigenvalues are clustered at progressively finer gaps, starting coarse
    because defective eigenvalues come back from ``eig`` split by roughly
    ``eps**(1/s)``.  A merged cluster that is not really one eigenvalue fails
    the nilpotency rank tests, so the first clustering whose reconstruction
    residual is within ``tol`` and whose basis condition number is below
    ``1/tol`` wins.
    """
    A = sys.A
    n = A.shape[0]
    scale = max(1.0, float(np.abs(A).sum(axis=1).max()))
    ev = np.linalg.eigvals(A)
    if np.any(np.abs(ev.imag) > 1e-4 * scale):
        raise SpectrumError("complex eigenvalues are not supported; supply a real spectrum")
    vals = ev.real
    last_err = None
    for gap in (tol ** 0.25, tol ** (1 / 3), tol ** 0.5, tol):
        clusters = _cluster(vals, gap * scale)
        try:
            V, blocks = _build(A, clusters, vals, 1e-9)
        except (ConditioningError, np.linalg.LinAlgError, ValueError) as exc:
            last_err = exc
            continue
        if V.shape[1] != n:
            continue
        cond = np.linalg.cond(V)
        if not np.isfinite(cond) or cond > 1.0 / tol:
            last_err = ConditioningError(f"Jordan basis condition number {cond:.3g}")
            continue
        jf = JordanForm(V, tuple(blocks))
        resid = np.abs(jf.V @ jf.J() @ jf.Vinv - A).max()
        if resid <= tol * scale:
            return jf
        last_err = ConditioningError(f"Jordan reconstruction residual {resid:.3g}")
    raise ConditioningError(
        f"numerical Jordan decomposition failed ({last_err}); "
        "supply V and blocks explicitly in the problem file"
    )


def check_jordan(sys: LinearSystem, jf: JordanForm, tol: float = DEFAULT_JORDAN_TOL) -> None:
    scale = max(1.0, float(np.abs(sys.A).sum(axis=1).max()))
    resid = np.abs(jf.V @ jf.J() @ jf.Vinv - sys.A).max()
    if resid > tol * scale:
        raise ConditioningError(f"supplied Jordan form does not reproduce A (residual {resid:.3g})")


# ------------------------------------------------------------------ primitives

def _exp_poly(lam: float, j: int, t):
    t = np.asarray(t, dtype=float)
    return np.exp(lam * t) * t ** j


def exp_poly_integral(lam: float, j: int, t):
    """``int_0^t exp(lam s) s^j ds`` evaluated stably for any ``lam``."""
    t = np.asarray(t, dtype=float)
    x = lam * t
    out = np.empty_like(t)
    small = np.abs(x) < 1.0
    if np.any(small):
        ts = t[small]
        xs = x[small]
        acc = np.zeros_like(ts)
        term = np.ones_like(ts)
        for k in range(40):
            acc += term / (k + j + 1)
            term = term * xs / (k + 1)
        out[small] = acc * ts ** (j + 1)
    big = ~small
    if np.any(big):
        tb = t[big]
        acc = np.zeros_like(tb)
        for coef, p in _integral_coeffs(lam, j):
            acc += coef * tb ** p * np.exp(lam * tb)
        out[big] = acc + _integral_const(lam, j)
    return out


def _integral_coeffs(lam: float, j: int):
    """Coefficients ``(c, p)`` so the integral is ``sum c e^{lam t} t^p + const``."""
    if lam == 0.0:
        return [(1.0 / (j + 1), j + 1)]
    fj = math.factorial(j)
    return [((-1) ** l * fj / (math.factorial(j - l) * lam ** (l + 1)), j - l) for l in range(j + 1)]


def _integral_const(lam: float, j: int) -> float:
    if lam == 0.0:
        return 0.0
    return -((-1) ** j) * math.factorial(j) / lam ** (j + 1)


@dataclass(frozen=True)
class ZohStep:
    A_k: np.ndarray
    B_k: np.ndarray
    tau: float


def zoh_discretize(sys: LinearSystem, jf: JordanForm, tau: float) -> ZohStep:
    if not tau > 0:
        raise ValueError("tau must be positive")
    Ak, Gk = _flow_matrices(sys, jf, np.array([tau]))
    return ZohStep(Ak[0], Gk[0], float(tau))


def _flow_matrices(sys: LinearSystem, jf: JordanForm, s: np.ndarray):
    """``exp(A s)`` and ``int_0^s exp(A r) dr B`` for a vector of times."""
    s = np.asarray(s, dtype=float)
    n, m = sys.n, sys.m
    Phi = np.zeros((s.size, n, n))
    Gam = np.zeros((s.size, n, m))
    for lam, j, E in jf.components():
        Phi += _exp_poly(lam, j, s)[:, None, None] * E
        Gam += exp_poly_integral(lam, j, s)[:, None, None] * (E @ sys.B)
    return Phi, Gam


# -------------------------------------------------------------- flow expansion

@dataclass(frozen=True)
class FlowTerm:
    lam: float
    j: int
    cx: np.ndarray
    cu: np.ndarray


@dataclass(frozen=True)
class FlowExpansion:
    """``sigma + sum (cx.x_k + cu.u_k) exp(lam t) t^j`` for ``t`` in one hold interval."""

    sigma: float
    terms: tuple

    def evaluate(self, x, u, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        out = np.full(t.shape, float(self.sigma))
        for term in self.terms:
            out = out + (term.cx @ x + term.cu @ u) * _exp_poly(term.lam, term.j, t)
        return out

    def linear_at(self, t: float):
        """Coefficients ``(wx, wu, const)`` of the value at a fixed time."""
        n = self.terms[0].cx.size if self.terms else 0
        m = self.terms[0].cu.size if self.terms else 0
        wx = np.zeros(n)
        wu = np.zeros(m)
        for term in self.terms:
            g = float(_exp_poly(term.lam, term.j, t))
            wx = wx + g * term.cx
            wu = wu + g * term.cu
        return wx, wu, float(self.sigma)


def expand_along_flow(
    sys: LinearSystem,
    jf: JordanForm,
    w,
    w0: float = 0.0,
    u_coeff=None,
    u0: float = 0.0,
    drop_tol: float = 1e-14,
) -> FlowExpansion:
    """Expand ``w.x(t) + u_coeff.u_k + w0 + u0`` along the hold flow from ``(x_k, u_k)``.

    Time is measured from the start of the hold interval.
    """
    w = np.asarray(w, dtype=float)
    n, m = sys.n, sys.m
    if w.shape != (n,):
        raise ValueError(f"w must have length {n}")
    acc: dict = {}

    def slot(lam, j):
        key = (lam, j)
        if key not in acc:
            acc[key] = [np.zeros(n), np.zeros(m)]
        return acc[key]

    for lam, j, E in jf.components():
        wE = w @ E
        slot(lam, j)[0] += wE
        wEB = wE @ sys.B
        for coef, p in _integral_coeffs(lam, j):
            slot(lam, p)[1] += coef * wEB
        const = _integral_const(lam, j)
        if const != 0.0:
            slot(0.0, 0)[1] += const * wEB
    if u_coeff is not None:
        u_coeff = np.asarray(u_coeff, dtype=float)
        if u_coeff.shape != (m,):
            raise ValueError(f"u_coeff must have length {m}")
        slot(0.0, 0)[1] += u_coeff
    scale = max(1.0, float(np.abs(w).max()))
    terms = []
    for (lam, j), (cx, cu) in sorted(acc.items()):
        cx = np.where(np.abs(cx) <= drop_tol * scale, 0.0, cx)
        cu = np.where(np.abs(cu) <= drop_tol * scale, 0.0, cu)
        if np.any(cx) or np.any(cu):
            terms.append(FlowTerm(lam, j, cx, cu))
    return FlowExpansion(float(w0) + float(u0), tuple(terms))


# ---------------------------------------------------------------- propagation

@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray  # control held at each sample (last sample repeats)


def propagate_dense(
    sys: LinearSystem,
    jf: JordanForm,
    x0,
    instants: Sequence[float],
    controls,
    grid_dt: float,
    extra_times: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Exact ZOH trajectory sampled every ``grid_dt`` plus every breakpoint.

    ``controls[k]`` is held on ``[instants[k], instants[k+1])``.
    """
    if not grid_dt > 0:
        raise ValueError("grid_dt must be positive")
    inst = np.asarray(instants, dtype=float)
    U = np.asarray(controls, dtype=float).reshape(len(inst) - 1, sys.m)
    if np.any(np.diff(inst) <= 0):
        raise ValueError("instants must be strictly increasing")
    t0, tf = inst[0], inst[-1]
    n_grid = int(math.floor((tf - t0) / grid_dt + 1e-9))
    grid = t0 + grid_dt * np.arange(n_grid + 1)
    pts = [grid, inst]
    if extra_times is not None:
        ex = np.asarray(extra_times, dtype=float)
        pts.append(ex[(ex >= t0) & (ex <= tf)])
    times = np.unique(np.concatenate(pts))
    # merge points closer than 1e-12 to a breakpoint
    keep = np.concatenate([[True], np.diff(times) > 1e-12])
    times = times[keep]
    states = np.empty((times.size, sys.n))
    ctrl = np.empty((times.size, sys.m))
    x = np.asarray(x0, dtype=float).copy()
    for k in range(len(inst) - 1):
        lo, hi = inst[k], inst[k + 1]
        last = k == len(inst) - 2
        sel = (times >= lo - 1e-12) & ((times < hi - 1e-12) | (last & (times <= hi + 1e-12)))
        s = np.clip(times[sel] - lo, 0.0, None)
        Phi, Gam = _flow_matrices(sys, jf, s)
        states[sel] = Phi @ x + Gam @ U[k]
        ctrl[sel] = U[k]
        step = zoh_discretize(sys, jf, hi - lo)
        x = step.A_k @ x + step.B_k @ U[k]
    return Trajectory(times, states, ctrl)
