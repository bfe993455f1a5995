"""Independent QP oracles shared by the unit and acceptance suites.

Two routes: exhaustive bound-activity enumeration for small problems and an
augmented-Lagrangian projected-gradient method for larger ones. Both are
deliberately different algorithms from the production operator-splitting
solver.
"""

import itertools

import numpy as np


def random_problem(rng, n, m):
    from pandasim.mmc import QPProblem
    A_half = rng.standard_normal((n, n))
    Q = A_half @ A_half.T + (0.1 + rng.uniform(0, 1)) * np.eye(n)
    c = rng.standard_normal(n) * 2.0
    lb = rng.uniform(-2.0, -0.1, n)
    ub = rng.uniform(0.1, 2.0, n)
    if m:
        A = rng.standard_normal((m, n))
        x_feas = rng.uniform(lb, ub)
        b = A @ x_feas
    else:
        A = np.zeros((0, n))
        b = np.zeros(0)
    return QPProblem(Q=Q, c=c, A_eq=A, b_eq=b, lb=lb, ub=ub)


def oracle_enumerate(p):
    """Global optimum via all lower/upper/free activity patterns (n <= 6).

    Every feasible stationary candidate bounds the optimum from above and
    the optimum appears under its own pattern, so the feasible minimum over
    patterns is exact.
    """
    n, m = p.n, p.m
    best = None
    for pattern in itertools.product((0, 1, 2), repeat=n):
        free = [i for i, s in enumerate(pattern) if s == 0]
        k = n - len(free)
        size = n + m + k
        K = np.zeros((size, size))
        rhs = np.zeros(size)
        K[:n, :n] = p.Q
        rhs[:n] = -p.c
        if m:
            K[:n, n:n + m] = p.A_eq.T
            K[n:n + m, :n] = p.A_eq
            rhs[n:n + m] = p.b_eq
        row = n + m
        for i, s in enumerate(pattern):
            if s == 0:
                continue
            K[i, row] = 1.0
            K[row, i] = 1.0
            rhs[row] = p.lb[i] if s == 1 else p.ub[i]
            row += 1
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            continue
        x = sol[:n]
        if np.any(x < p.lb - 1e-9) or np.any(x > p.ub + 1e-9):
            continue
        if m and np.max(np.abs(p.A_eq @ x - p.b_eq)) > 1e-8:
            continue
        obj = 0.5 * x @ p.Q @ x + p.c @ x
        if best is None or obj < best[0]:
            best = (obj, x)
    return best


def oracle_al_pgd(p, outer=200, inner=600, tol=1e-9, mu_max=3e5):
    """Augmented-Lagrangian outer loop, accelerated projected gradient inner.

    The penalty stays bounded; the multiplier updates carry convergence, so
    the inner subproblems remain well conditioned.
    """
    n, m = p.n, p.m
    x = np.clip(np.zeros(n), p.lb, p.ub)
    lam = np.zeros(m)
    mu = 10.0
    for _ in range(outer):
        H = p.Q + mu * p.A_eq.T @ p.A_eq if m else p.Q
        L = float(np.linalg.norm(H, 2))
        g0 = p.c + (p.A_eq.T @ (lam - mu * p.b_eq) if m else 0.0)
        z = x.copy()
        t = 1.0
        for _ in range(inner):
            grad = H @ z + g0
            x_new = np.clip(z - grad / L, p.lb, p.ub)
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = x_new + (t - 1.0) / t_new * (x_new - x)
            step = np.max(np.abs(x_new - x))
            x, t = x_new, t_new
            # Inner stationarity: projected-gradient residual of the subproblem.
            if step < 1e-13 or np.max(np.abs(
                    x - np.clip(x - (H @ x + g0), p.lb, p.ub))) < tol * max(1.0, L):
                pg = np.max(np.abs(x - np.clip(x - (H @ x + g0) / L, p.lb, p.ub)))
                if pg < 1e-12 * max(1.0, np.max(np.abs(g0))):
                    break
        if m:
            r = p.A_eq @ x - p.b_eq
            lam = lam + mu * r
            if np.max(np.abs(r)) < tol:
                # Stationarity of the true problem at the current multipliers.
                grad_true = p.Q @ x + p.c + p.A_eq.T @ lam
                proj = np.max(np.abs(x - np.clip(x - grad_true, p.lb, p.ub)))
                if proj < 1e-8:
                    break
            mu = min(mu * 2.5, mu_max)
        else:
            break
    return 0.5 * x @ p.Q @ x + p.c @ x, x
