"""Random instance generators shared by tests and the acceptance suite."""

import numpy as np

from ctstl.lindyn import FlowExpansion, FlowTerm, LinearSystem


def random_orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    return Q * np.sign(np.diag(R))


def random_real_spectrum_system(rng, n=None, m=None, lam_range=(-2.0, 1.0)):
    """``A = V J V^-1`` with a real Jordan form and a well-conditioned ``V``."""
    n = int(rng.integers(1, 5)) if n is None else n
    m = int(rng.integers(1, 3)) if m is None else m
    sizes = []
    left = n
    while left:
        s = int(rng.integers(1, left + 1))
        sizes.append(s)
        left -= s
    J = np.zeros((n, n))
    k = 0
    for s in sizes:
        lam = float(np.round(rng.uniform(*lam_range), 3))
        for r in range(s):
            J[k + r, k + r] = lam
            if r + 1 < s:
                J[k + r, k + r + 1] = 1.0
        k += s
    V = random_orthogonal(rng, n) @ np.diag(rng.uniform(0.5, 2.0, n)) @ random_orthogonal(rng, n)
    A = V @ J @ np.linalg.inv(V)
    B = rng.normal(size=(n, m))
    return LinearSystem(A, B)


def random_expansion(rng, kappa_max=3, s_max=2, n=None, m=None, sigma_scale=2.0):
    """A random flow expansion with ``kappa <= kappa_max`` blocks of size ``<= s_max``."""
    n = int(rng.integers(1, 4)) if n is None else n
    m = int(rng.integers(1, 3)) if m is None else m
    kappa = int(rng.integers(1, kappa_max + 1))
    lams = rng.choice([-2.0, -1.0, -0.5, 0.0, 0.5, 1.0], size=kappa, replace=False)
    terms = []
    for lam in sorted(lams):
        s = int(rng.integers(1, s_max + 1))
        for j in range(s):
            cx = rng.normal(size=n) * (rng.random(n) < 0.7)
            cu = rng.normal(size=m) * (rng.random(m) < 0.5)
            if np.any(cx) or np.any(cu):
                terms.append(FlowTerm(float(lam), j, cx, cu))
    if not terms:
        terms.append(FlowTerm(0.0, 0, np.ones(n), np.zeros(m)))
    return FlowExpansion(float(rng.normal() * sigma_scale), tuple(terms))


# ------------------------------------------------------------------ MILP oracles

def random_milp(rng, nb_max=12, nc_max=2):
    """A random binary MILP with boxed continuous variables (dense arrays)."""
    from ctstl.milp.model import MilpModel

    nb = int(rng.integers(1, nb_max + 1))
    nc = int(rng.integers(0, nc_max + 1))
    m = int(rng.integers(1, 7))
    model = MilpModel(name="rand")
    for j in range(nb):
        model.add_binary(f"z{j}")
    for j in range(nc):
        model.add_var(f"y{j}", -5.0, 5.0)
    nv = nb + nc
    for i in range(m):
        coefs = {j: float(np.round(rng.normal() * 3, 2)) for j in range(nv) if rng.random() < 0.7}
        if not coefs:
            coefs = {0: 1.0}
        sense = str(rng.choice(["<=", ">=", "="], p=[0.45, 0.45, 0.1]))
        if sense == "=" and not any(j >= nb for j in coefs):
            sense = "<="
        rhs = float(np.round(rng.normal() * 3, 2))
        model.add_constraint(coefs, sense, rhs)
    model.set_objective({j: float(np.round(rng.normal() * 2, 2)) for j in range(nv)})
    return model


def enumerate_milp(model, tol=1e-9):
    """Exhaustive optimum over all binary assignments (vertex enumeration for <= 2 continuous).

    Returns ``(objective, x)`` or ``(inf, None)`` when infeasible.
    """
    import itertools

    c, A, senses, b, lb, ub, is_bin = model.to_arrays()
    bins = np.flatnonzero(is_bin)
    cont = np.flatnonzero(~is_bin)
    nb, nc = bins.size, cont.size
    Z = np.array(list(itertools.product([0.0, 1.0], repeat=nb)))  # (2^nb, nb)
    # rows G y <= H(z)
    G, Hz, Hc = [], [], []
    for i, s in enumerate(senses):
        for sign in ((1.0,) if s == "<=" else (-1.0,) if s == ">=" else (1.0, -1.0)):
            G.append(sign * A[i, cont])
            Hz.append(-sign * A[i, bins])
            Hc.append(sign * b[i])
    for k, j in enumerate(cont):
        e = np.zeros(nc)
        e[k] = 1.0
        G += [e, -e]
        Hz += [np.zeros(nb), np.zeros(nb)]
        Hc += [ub[j], -lb[j]]
    rows_n = len(Hc)
    G, Hz, Hc = np.array(G).reshape(rows_n, nc), np.array(Hz).reshape(rows_n, nb), np.array(Hc)
    H = Z @ Hz.T + Hc  # (2^nb, rows)
    best, best_x = np.inf, None
    cands = []
    if nc == 0:
        cands.append(np.zeros((Z.shape[0], 0)))
    else:
        for rows in itertools.combinations(range(G.shape[0]), nc):
            M = G[list(rows)]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            cands.append(np.linalg.solve(M, H[:, list(rows)].T).T)
    for Y in cands:
        feas = np.all(Y @ G.T <= H + tol * (1 + np.abs(H)), axis=1)
        if not np.any(feas):
            continue
        obj = Z @ c[bins] + Y @ c[cont]
        obj = np.where(feas, obj, np.inf)
        k = int(np.argmin(obj))
        if obj[k] < best:
            best = float(obj[k])
            x = np.zeros(c.size)
            x[bins], x[cont] = Z[k], Y[k]
            best_x = x
    return best, best_x
