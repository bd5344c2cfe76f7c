"""Dense real linear-algebra primitives with an explicit tolerance policy.

Everything downstream (Jordan decompositions, Morse components, Floquet
generators) is built on the clustered spectral data computed here.  Eigenvalue
clustering is *relative*: two eigenvalues merge when their distance is below
``cluster_tol * max(1, |lambda|)``.  The cluster tolerance is a user-visible
knob because all constructions in this library are discontinuous at
eigenvalue coincidence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    BranchObstruction,
    IllConditioned,
    InputError,
    NonConvergence,
    NotNilpotent,
    Overflow,
    Singular,
)

__all__ = [
    "TolerancePolicy",
    "SpectralCluster",
    "SpectralData",
    "complex_spectrum",
    "matrix_exp",
    "principal_log",
    "unipotent_log",
    "spectral_radius",
    "nilpotency_index",
    "opnorm",
    "as_square_matrix",
]

#: Largest matrix dimension accepted by the spectral entry points.  Wedge
#: representations grow like C(n, p); desk scale is all we support.
MAX_DIM = 12

#: exp() budget: beyond this 2-norm the scaled-and-squared exponential is at
#: the edge of double range, so we refuse instead of returning inf.
EXP_NORM_BUDGET = 700.0


@dataclass(frozen=True)
class TolerancePolicy:
    """The three tolerances that parameterize every numerical decision.

    cluster_tol   relative eigenvalue-grouping gap
    residual_tol  matrix-identity residuals (projection idempotency, etc.)
    sim_tol       simulation convergence / prediction matching
    """

    cluster_tol: float = 1e-8
    residual_tol: float = 1e-9
    sim_tol: float = 1e-6

    def __post_init__(self):
        eps = np.finfo(float).eps
        if not (self.cluster_tol > 0 and self.residual_tol > 0 and self.sim_tol > 0):
            raise InputError("all tolerances must be strictly positive")
        if self.cluster_tol < 100 * eps:
            raise InputError("cluster_tol below 100*machine-epsilon is not resolvable")


DEFAULT_POLICY = TolerancePolicy()


def opnorm(a):
    """Spectral (2-) norm."""
    return float(np.linalg.norm(np.asarray(a, dtype=float), 2))


def as_square_matrix(a, name="matrix", max_dim=None):
    """Validate and copy a square real matrix with finite entries."""
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} has non-finite entries")
    if max_dim is not None and not (2 <= m.shape[0] <= max_dim):
        raise InputError(
            f"{name} has dimension {m.shape[0]}; supported range is 2..{max_dim}"
        )
    return m


@dataclass(frozen=True)
class SpectralCluster:
    """One eigenvalue cluster of a real matrix.

    ``eigenvalue`` is the cluster representative (mean of the members; for a
    conjugate pair the member with nonnegative imaginary part).
    ``multiplicity`` counts conjugate pairs with both members, so the
    multiplicities of all clusters sum to n.  ``projection`` is the real
    generalized eigenprojection onto the cluster's invariant subspace,
    factored as ``projection = basis @ left`` with ``basis`` orthonormal
    (n x m) and ``left @ basis = I``.  ``block`` is the restriction of the
    source matrix to the invariant subspace in the ``basis`` frame.
    """

    eigenvalue: complex
    multiplicity: int
    projection: np.ndarray
    is_pair: bool
    members: tuple
    basis: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    block: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SpectralData:
    """Clustered spectrum of a real matrix with generalized eigenprojections."""

    matrix: np.ndarray
    clusters: tuple
    cluster_tol: float

    @property
    def n(self):
        return self.matrix.shape[0]

    def eigenvalues(self):
        """All eigenvalues, conjugate pairs included, as a flat array."""
        return np.concatenate([np.asarray(c.members) for c in self.clusters])

    def residuals(self):
        """Invariant residuals: resolution of identity, idempotency,
        disjointness, commutation with the source matrix."""
        a = self.matrix
        n = self.n
        projs = [c.projection for c in self.clusters]
        res = {
            "sum": opnorm(sum(projs) - np.eye(n)),
            "idempotent": max(opnorm(p @ p - p) for p in projs),
            "commute": max(opnorm(a @ p - p @ a) for p in projs),
        }
        disjoint = 0.0
        for i in range(len(projs)):
            for j in range(i + 1, len(projs)):
                disjoint = max(disjoint, opnorm(projs[i] @ projs[j]))
        res["disjoint"] = disjoint
        return res


def _cluster_eigenvalues(w, cluster_tol):
    """Group eigenvalues by relative distance, conjugate-closed.

    Union-find over the eigenvalue list; two eigenvalues merge when either
    one (or the conjugate of one) is within cluster_tol * max(1, |.|) of the
    other.  Folding the conjugate into the merge rule guarantees every
    cluster of a real matrix is closed under conjugation.
    """
    n = len(w)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj

    for i in range(n):
        for j in range(i + 1, n):
            gap = cluster_tol * max(1.0, abs(w[i]), abs(w[j]))
            if abs(w[i] - w[j]) < gap or abs(np.conj(w[i]) - w[j]) < gap:
                union(i, j)

    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def complex_spectrum(a, pol=None):
    """Clustered complex spectrum of a real matrix with real eigenprojections.

    Projections are computed cluster by cluster on the real Schur form: the
    selected Schur ordering puts the cluster's invariant subspace first, a
    Sylvester solve block-diagonalizes, and the projector follows without any
    contour integration.

    Raises NonConvergence if the QR iteration fails and IllConditioned if the
    computed projections violate their invariants at residual_tol scale
    (two clusters too entangled to separate).
    """
    pol = pol or DEFAULT_POLICY
    a = as_square_matrix(a, "A", max_dim=MAX_DIM)
    n = a.shape[0]
    scale = max(1.0, opnorm(a))

    try:
        w = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"eigenvalue iteration failed: {exc}") from exc

    groups = _cluster_eigenvalues(w, pol.cluster_tol)

    # Canonical representative: mean of (Re, |Im|) over the members; a cluster
    # is a conjugate pair when the representative keeps a genuine imaginary
    # part at clustering scale.
    reps = []
    for idx in groups:
        members = w[idx]
        re = float(np.mean(members.real))
        im = float(np.mean(np.abs(members.imag)))
        is_pair = im > pol.cluster_tol * max(1.0, abs(complex(re, im)))
        reps.append((complex(re, im if is_pair else 0.0), is_pair, members))
    # deterministic order: decreasing real part, then increasing |Im|
    order = sorted(range(len(reps)), key=lambda k: (-reps[k][0].real, reps[k][0].imag))

    flat = w.copy()

    def cluster_of(z):
        return int(np.argmin(np.abs(flat - z)))

    idx_to_group = {}
    for gi, idx in enumerate(groups):
        for i in idx:
            idx_to_group[i] = gi

    clusters = []
    for gi in order:
        lam, is_pair, members = reps[gi]
        m = len(groups[gi])

        def select(x, y, _gi=gi):
            return idx_to_group[cluster_of(complex(x, y))] == _gi

        try:
            t, z, sdim = sla.schur(a, output="real", sort=select)
        except Exception as exc:  # pragma: no cover - LAPACK failure path
            raise NonConvergence(f"ordered Schur factorization failed: {exc}") from exc
        if sdim != m:
            raise IllConditioned(
                f"Schur reordering selected {sdim} eigenvalues for a cluster "
                f"of multiplicity {m} near {lam}; clusters are not separable "
                f"at cluster_tol={pol.cluster_tol}",
                margins={"selected": sdim, "expected": m},
            )
        if m == n:
            basis = z
            left = z.T
            proj = np.eye(n)
            block = t
        else:
            t11 = t[:m, :m]
            t12 = t[:m, m:]
            t22 = t[m:, m:]
            # block-diagonalize: T11 Y - Y T22 = -T12
            y = sla.solve_sylvester(t11, -t22, -t12)
            basis = z[:, :m]
            left = basis.T - y @ z[:, m:].T
            proj = basis @ left
            block = t11
        clusters.append(
            SpectralCluster(
                eigenvalue=lam,
                multiplicity=m,
                projection=proj,
                is_pair=is_pair,
                members=tuple(members.tolist()),
                basis=basis,
                left=left,
                block=block,
            )
        )

    data = SpectralData(matrix=a, clusters=tuple(clusters), cluster_tol=pol.cluster_tol)

    res = data.residuals()
    worst = max(res.values())
    if worst > pol.residual_tol * scale * n * 10:
        raise IllConditioned(
            "spectral projections violate their invariants "
            f"(worst residual {worst:.3e}); eigenvalue clusters separated by "
            "roughly cluster_tol cannot be resolved — widen cluster_tol",
            margins=res,
        )
    # nearly-parallel invariant subspaces make every downstream residual_tol
    # certificate unattainable; report instead of guessing
    pnorm = max(opnorm(c.projection) for c in clusters)
    if pnorm > 0.1 / pol.residual_tol:
        raise IllConditioned(
            f"spectral projection norm {pnorm:.3e} exceeds "
            f"0.1/residual_tol; clusters too entangled to separate at "
            f"cluster_tol={pol.cluster_tol} — widen cluster_tol",
            margins={"projection_norm": pnorm, **res},
        )
    return data


def matrix_exp(a):
    """Matrix exponential (scaling-and-squaring Pade, via scipy).

    Refuses inputs beyond the double-precision exponential budget instead of
    silently returning inf.  Large-norm matrices are admitted as long as
    their spectrum keeps the result finite (nilpotent directions only grow
    polynomially).
    """
    a = as_square_matrix(a, "A")
    if opnorm(a) > EXP_NORM_BUDGET:
        w = np.linalg.eigvals(a)
        if np.max(w.real) > EXP_NORM_BUDGET:
            raise Overflow(
                f"spectral abscissa {np.max(w.real):.3e} exceeds the exp "
                f"budget {EXP_NORM_BUDGET}"
            )
    out = sla.expm(a)
    if not np.all(np.isfinite(out)):
        raise Overflow("exponential overflowed double precision")
    return out


def unipotent_log(u, pol=None):
    """Terminating log series for a unipotent matrix: log(I+T) = T - T^2/2 + ...

    Exact up to rounding; raises NotNilpotent when u - I is not nilpotent.
    """
    pol = pol or DEFAULT_POLICY
    u = as_square_matrix(u, "u")
    n = u.shape[0]
    t = u - np.eye(n)
    k = nilpotency_index(t, pol)  # raises NotNilpotent
    out = np.zeros_like(t)
    power = np.eye(n)
    for j in range(1, k + 1):
        power = power @ t
        out += ((-1) ** (j + 1)) * power / j
    return out


def principal_log(a, pol=None):
    """Real principal matrix logarithm.

    Defined when no eigenvalue lies on the closed negative real axis, or when
    the matrix is unipotent (the log series terminates).  Raises
    BranchObstruction when an eigenvalue sits on R_{<=0}: the Floquet layer
    reacts by doubling its monodromy power m.
    """
    pol = pol or DEFAULT_POLICY
    a = as_square_matrix(a, "A")
    n = a.shape[0]
    scale = max(1.0, opnorm(a))

    try:
        return unipotent_log(a, pol)
    except NotNilpotent:
        pass

    w = np.linalg.eigvals(a)
    for lam in w:
        if abs(lam) <= pol.residual_tol * scale:
            raise Singular(f"eigenvalue {lam} at zero; no logarithm")
        on_axis = abs(lam.imag) <= pol.cluster_tol * max(1.0, abs(lam))
        if on_axis and lam.real < 0:
            raise BranchObstruction(
                f"eigenvalue {lam} on the negative real axis; "
                "no principal real logarithm"
            )

    out = sla.logm(a)
    if np.iscomplexobj(out):
        if np.max(np.abs(out.imag)) > pol.residual_tol * scale * 100:
            raise BranchObstruction(
                "matrix logarithm came out complex; spectrum too close to the "
                "negative real axis"
            )
        out = out.real
    # contract check: exp(log A) = A
    riff = opnorm(matrix_exp(out) - a)
    if riff > pol.residual_tol * scale * n * 100:
        raise IllConditioned(
            f"log/exp round trip residual {riff:.3e} exceeds tolerance",
            margins={"roundtrip": riff},
        )
    return out


def spectral_radius(a, pol=None):
    """max |lambda| over the clustered spectrum."""
    data = a if isinstance(a, SpectralData) else complex_spectrum(a, pol)
    return float(max(abs(lam) for c in data.clusters for lam in c.members))


def nilpotency_index(a, pol=None):
    """Smallest k <= n-1 with A^(k+1) ~ 0, at residual_tol scale.

    The threshold for "zero" at power k+1 is residual_tol * max(1, |A|)^(k+1)
    so that large-norm nilpotents are still recognized.
    """
    pol = pol or DEFAULT_POLICY
    a = as_square_matrix(a, "A")
    n = a.shape[0]
    base = max(1.0, opnorm(a))
    power = a.copy()
    for k in range(n):
        if opnorm(power) <= pol.residual_tol * base ** (k + 1):
            return k
        power = power @ a
    raise NotNilpotent(
        f"A^{n} has norm {opnorm(power):.3e}; not nilpotent at tolerance "
        f"{pol.residual_tol}"
    )
