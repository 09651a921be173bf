"""Independent reference implementations used only by the tests."""

import math

import numpy as np
from scipy.integrate import solve_ivp


def natural_spline(xs, ys, x):
    """Natural cubic spline via the tridiagonal system for the knot second derivatives."""
    xs = [float(v) for v in xs]
    ys = [float(v) for v in ys]
    n = len(xs) - 1
    h = [xs[i + 1] - xs[i] for i in range(n)]
    # Thomas algorithm on the interior second derivatives
    sub, diag, sup, rhs = [0.0] * (n + 1), [1.0] * (n + 1), [0.0] * (n + 1), [0.0] * (n + 1)
    for i in range(1, n):
        sub[i] = h[i - 1]
        diag[i] = 2.0 * (h[i - 1] + h[i])
        sup[i] = h[i]
        rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1])
    for i in range(1, n + 1):
        w = sub[i] / diag[i - 1]
        diag[i] -= w * sup[i - 1]
        rhs[i] -= w * rhs[i - 1]
    m = [0.0] * (n + 1)
    m[n] = rhs[n] / diag[n]
    for i in range(n - 1, -1, -1):
        m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i]
    i = min(max(0, next((k for k in range(n) if x <= xs[k + 1]), n - 1)), n - 1)
    a, b = xs[i + 1] - x, x - xs[i]
    return (m[i] * a**3 + m[i + 1] * b**3) / (6 * h[i]) + (ys[i] / h[i] - m[i] * h[i] / 6) * a \
        + (ys[i + 1] / h[i] - m[i + 1] * h[i] / 6) * b


def bisect(f, lo, hi, tol=1e-13, max_iter=400):
    flo = f(lo)
    if flo == 0:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0 or (hi - lo) < tol * max(1.0, abs(mid)):
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quadratic_roots_by_bisection(a, b, c):
    """Positive roots of a x^2 + b x + c (a > 0) bracketed around the vertex."""
    f = lambda x: (a * x + b) * x + c
    vertex = -b / (2 * a)
    if f(vertex) > 0:
        return []
    big = vertex + 2.0 * math.sqrt(abs(b * b - 4 * a * c)) / a + 1.0
    roots = []
    if vertex > 0 and f(0.0) > 0:
        roots.append(bisect(f, 0.0, vertex))
    roots.append(bisect(f, vertex, big))
    return roots


def reference_sit(ep, mu_A2, y0, days, eps=0.0, beta=1.0, u_S=0.0):
    """Tight-tolerance adaptive solution of the constant-coefficient SIT system."""
    def f(_, y):
        A, M, F, S = y
        den = M + beta * S
        frac = (M + eps * beta * S) / den if den > 0 else 1.0
        return [ep.phi * F - (ep.gamma + ep.mu_A1 + mu_A2 * A) * A, (1 - ep.r) * ep.gamma * A - ep.mu_M * M,
                ep.r * ep.gamma * frac * A - ep.mu_F * F, u_S - ep.mu_S * S]
    sol = solve_ivp(f, (0, days), list(y0), method="DOP853", rtol=1e-11, atol=1e-9,
                    t_eval=np.arange(days + 1.0))
    return sol.y.T
