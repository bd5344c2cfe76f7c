"""Independent numerical oracles.

Each oracle computes the same quantity as a library operation by a
different algorithm (interpolation instead of Schur/Sylvester, truncated
series instead of Pade, closed forms instead of decompositions).  Tests
freeze expected values from these, never from the code path under test.
"""

import math

import numpy as np


def hermite_projection(a, cluster_values, all_values):
    """Generalized eigenprojection via Lagrange-Hermite interpolation.

    ``all_values`` lists (eigenvalue, algebraic multiplicity) for the whole
    spectrum (complex, conjugates listed separately); ``cluster_values`` is
    the subset the projection should select.  The projection is p(A) for the
    polynomial p of degree < n with p == 1 at the cluster (flat to order m)
    and p == 0 elsewhere.
    """
    a = np.asarray(a, dtype=float)
    deg = sum(m for _, m in all_values)
    rows, rhs = [], []
    cluster = [complex(v) for v in cluster_values]
    for lam, mult in all_values:
        lam = complex(lam)
        want = 1.0 if any(abs(lam - c) < 1e-9 for c in cluster) else 0.0
        for j in range(mult):
            row = np.zeros(deg, dtype=complex)
            for k in range(j, deg):
                row[k] = math.factorial(k) / math.factorial(k - j) * lam ** (k - j)
            rows.append(row)
            rhs.append(want if j == 0 else 0.0)
    coeffs = np.linalg.solve(np.array(rows), np.array(rhs))
    out = np.zeros(a.shape, dtype=complex)
    eye = np.eye(a.shape[0])
    for c in reversed(coeffs):
        out = out @ a + c * eye
    assert np.max(np.abs(out.imag)) < 1e-8
    return out.real


def exp_series(a, terms=60):
    """Truncated exponential series with 16-fold argument scaling."""
    a = np.asarray(a, dtype=float) / 16.0
    n = a.shape[0]
    out = np.eye(n)
    term = np.eye(n)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    for _ in range(4):
        out = out @ out
    return out


def rotation_scale_exp(a, b, t):
    """Closed form exp(t * X4(a, b)): scaled plane rotation + expansion."""
    c, s = math.cos(b * t), math.sin(b * t)
    out = np.zeros((3, 3))
    out[:2, :2] = math.exp(-a * t) * np.array([[c, -s], [s, c]])
    out[2, 2] = math.exp(2 * a * t)
    return out


def companion(coeffs):
    """Companion matrix of a monic polynomial x^n + c[n-1] x^(n-1) + ... + c[0]."""
    n = len(coeffs)
    m = np.zeros((n, n))
    m[1:, :-1] = np.eye(n - 1)
    m[:, -1] = [-c for c in coeffs]
    return m


def contingency_tables_bruteforce(row_sums, col_sums):
    """All nonneg integer matrices with given margins, by raw product scan."""
    import itertools

    rows = len(row_sums)
    cols = len(col_sums)
    out = []
    ranges = [range(min(row_sums[i], col_sums[j]) + 1) for i in range(rows) for j in range(cols)]
    for flat in itertools.product(*ranges):
        t = [flat[i * cols : (i + 1) * cols] for i in range(rows)]
        if all(sum(t[i]) == row_sums[i] for i in range(rows)) and all(
            sum(t[i][j] for i in range(rows)) == col_sums[j] for j in range(cols)
        ):
            out.append(tuple(tuple(r) for r in t))
    return out
