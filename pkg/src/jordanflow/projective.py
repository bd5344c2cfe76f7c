"""Dynamics of linear flows on real projective space.

The hyperbolic Jordan factor sorts the space into finitely many projective
eigenspaces; those are the finest Morse decomposition.  This module computes
the components, classifies points into stable/unstable sets, evaluates
unipotent limits, decides recurrence and chain recurrence, simulates
trajectories with mandatory renormalization, and runs a brute-force
(eps, T)-chain oracle on a grid for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import GridTooLarge, InputError, NotNilpotent
from .jordan import AdditiveJordan, MultiplicativeJordan
from .matrixcore import (
    DEFAULT_POLICY,
    as_square_matrix,
    matrix_exp,
    nilpotency_index,
    opnorm,
)

__all__ = [
    "ProjectivePoint",
    "projective_distance",
    "RateComponent",
    "ProjectiveMorseDecomposition",
    "morse_components_projective",
    "stable_set_index",
    "unstable_set_index",
    "unipotent_limit",
    "recurrent_membership",
    "chain_recurrent_membership",
    "simulate_projective",
    "ChainGraph",
    "chain_oracle",
]

#: coordinates below this magnitude count as zero for sign canonicalization
_SIGN_EPS = 1e-12

MAX_GRID = 20000


class ProjectivePoint:
    """A line in R^n: unit representative with the first nonzero coordinate
    positive, so equal points have identical reps (hashable, grid-dedupable).
    """

    __slots__ = ("rep",)

    def __init__(self, vector):
        v = np.asarray(vector, dtype=float).reshape(-1)
        if v.size < 2 or not np.all(np.isfinite(v)):
            raise InputError("projective point needs a finite vector, n >= 2")
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise InputError("zero vector does not define a projective point")
        v = v / norm
        for x in v:
            if abs(x) > _SIGN_EPS:
                if x < 0:
                    v = -v
                break
        rep = v.copy()
        rep.setflags(write=False)
        object.__setattr__(self, "rep", rep)

    @property
    def n(self):
        return self.rep.size

    def __setattr__(self, *a):
        raise AttributeError("ProjectivePoint is immutable")

    def __eq__(self, other):
        return isinstance(other, ProjectivePoint) and np.array_equal(
            self.rep, other.rep
        )

    def __hash__(self):
        return hash(self.rep.tobytes())

    def __repr__(self):
        return f"ProjectivePoint({np.array2string(self.rep, precision=6)})"


def projective_distance(p, q, metric=None):
    """Chordal metric d([x],[y]) = min(|x-y|, |x+y|) on unit representatives.

    With an InvariantMetric the same formula is evaluated in the M-norm on
    M-normalized representatives, so an elliptic factor acts by isometries.
    """
    x, y = p.rep, q.rep
    if metric is None:
        return float(min(np.linalg.norm(x - y), np.linalg.norm(x + y)))
    m = metric.gram
    x = x / math.sqrt(x @ m @ x)
    y = y / math.sqrt(y @ m @ y)
    d1 = x - y
    d2 = x + y
    return float(min(math.sqrt(d1 @ m @ d1), math.sqrt(d2 @ m @ d2)))


# ---------------------------------------------------------------------------
# Morse components from the hyperbolic part
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateComponent:
    """One projective Morse component: the eigenspace of the hyperbolic part
    for one exponential rate.

    ``value`` is the eigenvalue of h (discrete time: modulus) or H
    (continuous time: real part); ``rate`` is the common exponential rate
    (log value for discrete time, the value itself for continuous).
    ``projection`` is the spectral (generally oblique) projector onto the
    eigenspace; ``basis`` an orthonormal basis of it.
    """

    value: float
    rate: float
    multiplicity: int
    basis: np.ndarray
    projection: np.ndarray


@dataclass(frozen=True)
class ProjectiveMorseDecomposition:
    """Ordered (decreasing rate) projective eigenspaces of the hyperbolic part."""

    components: tuple
    continuous: bool
    cluster_tol: float

    @property
    def attractor_index(self):
        return 0

    @property
    def repeller_index(self):
        return len(self.components) - 1

    def distance_to_component(self, p, i):
        """Chordal distance from a point to the i-th projective eigenspace."""
        b = self.components[i].basis
        inside = np.linalg.norm(b.T @ p.rep)
        return math.sqrt(max(0.0, 2.0 - 2.0 * inside))

    def component_coordinates(self, p):
        """Norms of the oblique eigenspace components of the representative."""
        return np.array(
            [np.linalg.norm(c.projection @ p.rep) for c in self.components]
        )


def _group_by_rate(dec, pol):
    """Group spectral clusters by exponential rate, decreasing.

    Rates merge under the same relative rule as eigenvalues do; coincident
    moduli of distinct eigenvalue clusters (e.g. 2 and -2) land in one group.
    """
    cont = isinstance(dec, AdditiveJordan)
    items = []
    for c in dec.spectral.clusters:
        rate = c.eigenvalue.real if cont else math.log(abs(c.eigenvalue))
        items.append((rate, c))
    items.sort(key=lambda rc: -rc[0])
    groups = []
    for rate, c in items:
        if groups and abs(groups[-1][0][-1] - rate) < pol.cluster_tol * max(
            1.0, abs(rate), abs(groups[-1][0][-1])
        ):
            groups[-1][0].append(rate)
            groups[-1][1].append(c)
        else:
            groups.append(([rate], [c]))
    return [(float(np.mean(rates)), cs) for rates, cs in groups]


def _as_decomposition(dec):
    if isinstance(dec, (AdditiveJordan, MultiplicativeJordan)):
        return dec
    raise InputError(f"need an AdditiveJordan or MultiplicativeJordan, got {type(dec)!r}")


def morse_components_projective(dec, pol=None):
    """The finest Morse decomposition of the induced flow on P(R^n).

    Components are the projective eigenspaces of the hyperbolic Jordan factor
    ordered by decreasing rate; the first is the attractor, the last the
    repeller, and their union is the chain recurrent set.
    """
    pol = pol or DEFAULT_POLICY
    dec = _as_decomposition(dec)
    cont = isinstance(dec, AdditiveJordan)
    comps = []
    for rate, clusters in _group_by_rate(dec, pol):
        proj = np.sum([c.projection for c in clusters], axis=0)
        stacked = np.hstack([c.basis for c in clusters])
        mult = sum(c.multiplicity for c in clusters)
        # orthonormal basis of the (possibly oblique) sum of cluster ranges
        u, s, _ = np.linalg.svd(stacked, full_matrices=False)
        basis = u[:, :mult]
        comps.append(
            RateComponent(
                value=rate if cont else math.exp(rate),
                rate=rate,
                multiplicity=mult,
                basis=basis,
                projection=proj,
            )
        )
    md = ProjectiveMorseDecomposition(
        components=tuple(comps), continuous=cont, cluster_tol=pol.cluster_tol
    )
    assert sum(c.multiplicity for c in md.components) == dec.spectral.n
    return md


def _as_md(dec_or_md, pol):
    if isinstance(dec_or_md, ProjectiveMorseDecomposition):
        return dec_or_md
    return morse_components_projective(dec_or_md, pol)


def stable_set_index(p, dec, pol=None):
    """Index of the component whose stable set contains [p].

    The omega-limit of [v] lies in the projective eigenspace of the first
    (largest-rate) nonzero oblique component of v.
    """
    pol = pol or DEFAULT_POLICY
    md = _as_md(dec, pol)
    coords = md.component_coordinates(p)
    for i, c in enumerate(coords):
        if c > pol.residual_tol:
            return i
    return len(coords) - 1  # unreachable for unit vectors


def unstable_set_index(p, dec, pol=None):
    """Dual of stable_set_index: last nonzero component (alpha-limit)."""
    pol = pol or DEFAULT_POLICY
    md = _as_md(dec, pol)
    coords = md.component_coordinates(p)
    for i in range(len(coords) - 1, -1, -1):
        if coords[i] > pol.residual_tol:
            return i
    return 0


def unipotent_limit(p, n_mat, pol=None):
    """Two-sided limit of exp(tN)[x]: the class [N^k x] for the last k with
    N^k x != 0.  The returned point is fixed by the unipotent flow."""
    pol = pol or DEFAULT_POLICY
    n_mat = as_square_matrix(n_mat, "N")
    nilpotency_index(n_mat, pol)  # NotNilpotent if it is not
    x = p.rep
    scale = max(1.0, opnorm(n_mat))
    best = x
    power = x
    for k in range(1, n_mat.shape[0] + 1):
        power = n_mat @ power
        if np.linalg.norm(power) <= pol.residual_tol * np.linalg.norm(x) * scale**k:
            break
        best = power
    return ProjectivePoint(best)


def _parallel_residual(m, v):
    """Distance of m @ v from the line through unit v."""
    w = m @ v
    return float(np.linalg.norm(w - (v @ w) * v))


def recurrent_membership(p, dec, pol=None, tol=None):
    """Is [p] recurrent?  Requires the representative to sit in a single
    eigenspace of the hyperbolic part and be fixed by the unipotent part."""
    pol = pol or DEFAULT_POLICY
    dec = _as_decomposition(dec)
    tol = pol.residual_tol if tol is None else tol
    v = p.rep
    if isinstance(dec, AdditiveJordan):
        hyper_ok = _parallel_residual(dec.H, v) <= tol * max(1.0, opnorm(dec.H))
        unip_ok = np.linalg.norm(dec.N @ v) <= tol * max(1.0, opnorm(dec.N))
    else:
        hyper_ok = _parallel_residual(dec.h, v) <= tol * max(1.0, opnorm(dec.h))
        unip_ok = _parallel_residual(dec.u, v) <= tol * max(1.0, opnorm(dec.u))
    return bool(hyper_ok and unip_ok)


def chain_recurrent_membership(p, dec, pol=None, tol=None):
    """Is [p] chain recurrent?  True iff it sits in a single eigenspace of
    the hyperbolic part (the unipotent factor is invisible to chains)."""
    pol = pol or DEFAULT_POLICY
    dec = _as_decomposition(dec)
    tol = pol.residual_tol if tol is None else tol
    v = p.rep
    if isinstance(dec, AdditiveJordan):
        return _parallel_residual(dec.H, v) <= tol * max(1.0, opnorm(dec.H))
    return _parallel_residual(dec.h, v) <= tol * max(1.0, opnorm(dec.h))


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def _normalized_power(m, k):
    """m^k rescaled to unit spectral-ish norm at every multiply.

    Projectively exact; avoids overflow for long discrete legs.
    """
    n = m.shape[0]
    if k < 0:
        m = np.linalg.inv(m)
        k = -k
    result = np.eye(n)
    base = m / max(np.abs(m).max(), 1e-300)
    while k:
        if k & 1:
            result = result @ base
            result /= max(np.abs(result).max(), 1e-300)
        base = base @ base
        base /= max(np.abs(base).max(), 1e-300)
        k >>= 1
    return result


def _step_matrix(dec, dt):
    """Flow increment over time dt (continuous: exp, discrete: power)."""
    if isinstance(dec, AdditiveJordan):
        return matrix_exp(dt * dec.X)
    if float(dt) != int(dt):
        raise InputError("discrete flow needs integer time steps")
    return _normalized_power(dec.g, int(dt))


def _rate_spread(dec):
    """Gap between the fastest and slowest exponential rates of the flow;
    this, not the matrix norm, is what exhausts floating-point range."""
    if isinstance(dec, AdditiveJordan):
        w = np.linalg.eigvals(dec.X)
        return float(np.max(w.real) - np.min(w.real))
    w = np.abs(np.linalg.eigvals(dec.g))
    w = w[w > 0]
    return float(np.log(np.max(w)) - np.log(np.min(w)))


def _substep_plan(dec, dt):
    """Split an increment so one application never spans more than ~e^15 of
    dynamic range; renormalizing between substeps is projectively exact and
    keeps subdominant directions above the floating-point floor."""
    spread = _rate_spread(dec)
    if isinstance(dec, AdditiveJordan):
        k = max(1, math.ceil(abs(dt) * spread / 15.0))
        return k, dt / k
    step = int(dt)
    if step == 0:
        return 1, 0
    per = max(1, int(15.0 / max(spread, 1e-9)))
    k = max(1, math.ceil(abs(step) / per))
    base = step // k
    return k, base  # remainder handled by caller


def _advance(dec, v_or_b, dt, cache, renorm):
    """Apply the flow over dt with substepping; renorm re-normalizes."""
    if dt == 0:
        return v_or_b
    k, sub = _substep_plan(dec, dt)
    if isinstance(dec, AdditiveJordan):
        pieces = [float(sub)] * k
    else:
        pieces = [int(sub)] * k
        rem = int(dt) - int(sub) * k
        if rem:
            pieces.append(rem)
    out = v_or_b
    for piece in pieces:
        if piece == 0:
            continue
        key = float(piece)
        if key not in cache:
            cache[key] = _step_matrix(dec, piece)
        out = renorm(cache[key] @ out)
    return out


def simulate_projective(dec, p0, t_grid):
    """Trajectory [g^t x0] over t_grid, renormalized at every step.

    Uses the exact flow map per increment (matrix exponential or powers),
    never an ODE stepper, so there is no integrator error to calibrate.
    """
    dec = _as_decomposition(dec)

    def renorm(v):
        nv = np.linalg.norm(v)
        if not np.isfinite(nv) or nv == 0.0:
            raise InputError("trajectory left representable range")
        return v / nv

    v = p0.rep.copy()
    out = []
    t_prev = 0.0
    cache = {}
    for t in t_grid:
        v = _advance(dec, v, t - t_prev, cache, renorm)
        out.append(ProjectivePoint(v))
        t_prev = t
    return out


# ---------------------------------------------------------------------------
# brute-force (eps, T)-chain oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainGraph:
    """Grid discretization of the chain relation.

    An edge x -> y is present when d(g^s x, y) < eps for some leg s in
    ``leg_times`` (all >= the minimum jump time, doubling up to the budget;
    chains need arbitrarily long legs, a single leg time provably misses
    unipotent recurrence).  ``marked`` flags grid points lying on a directed
    cycle, i.e. in a strongly connected component witnessing an
    (eps, T)-chain back to itself.
    """

    points: np.ndarray
    eps: float
    min_time: float
    leg_times: tuple
    edges: object
    marked: np.ndarray
    covering_radius: float

    def marked_points(self):
        return [ProjectivePoint(v) for v in self.points[self.marked]]


def projective_grid(n, resolution):
    """Deterministic grid on P^(n-1): uniform angles on the circle, a
    sign-quotiented Fibonacci sphere for n = 3."""
    if n == 2:
        theta = np.pi * np.arange(resolution) / resolution
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    elif n == 3:
        i = np.arange(resolution)
        z = 1.0 - (2.0 * i + 1.0) / resolution
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        golden = np.pi * (3.0 - np.sqrt(5.0))
        phi = golden * i
        pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    else:
        raise GridTooLarge(f"chain oracle supports n in (2, 3); got n={n}")
    # sign canonicalization, vectorized: flip rows whose first significant
    # coordinate is negative
    sign = np.ones(len(pts))
    undecided = np.ones(len(pts), dtype=bool)
    for j in range(pts.shape[1]):
        decide = undecided & (np.abs(pts[:, j]) > _SIGN_EPS)
        sign[decide & (pts[:, j] < 0)] = -1.0
        undecided &= ~decide
    return pts * sign[:, None]


def chain_oracle(dec, resolution, eps, min_time, pol=None, leg_doublings=11):
    """Mark grid points that admit an (eps, T)-chain back to themselves.

    Builds the chain graph over leg times T * 2^k (k = 0..leg_doublings) and
    marks strongly connected components containing a cycle.  As resolution
    grows and eps shrinks the marked set converges to the chain recurrent
    set fix(h^t) on the tested families.
    """
    pol = pol or DEFAULT_POLICY
    dec = _as_decomposition(dec)
    n = dec.spectral.n
    if n not in (2, 3):
        raise GridTooLarge(f"chain oracle supports n in (2, 3); got n={n}")
    if not 8 <= resolution <= MAX_GRID:
        raise GridTooLarge(f"resolution {resolution} outside 8..{MAX_GRID}")
    if eps <= 0 or min_time <= 0:
        raise InputError("eps and min_time must be positive")

    pts = projective_grid(n, resolution)
    g1 = _step_matrix(dec, min_time)

    cos_thresh = 1.0 - 0.5 * eps * eps
    adj = sp.csr_matrix((resolution, resolution), dtype=bool)
    leg_times = []
    step = g1.copy()
    t = float(min_time)
    for _ in range(leg_doublings + 1):
        leg_times.append(t)
        img = pts @ step.T
        img /= np.linalg.norm(img, axis=1)[:, None]
        cos = np.abs(img @ pts.T)
        adj = (adj + sp.csr_matrix(cos > cos_thresh)).tocsr()
        step = step @ step
        step /= max(np.abs(step).max(), 1e-300)
        t *= 2.0
    del cos, img

    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    size = np.bincount(labels, minlength=ncomp)
    selfloop = adj.diagonal()
    cyclic = np.zeros(ncomp, dtype=bool)
    cyclic[size >= 2] = True
    cyclic[labels[selfloop]] = True
    marked = cyclic[labels]

    # covering radius of the grid: max nearest-neighbor chordal distance
    cos_grid = np.abs(pts @ pts.T)
    np.fill_diagonal(cos_grid, -1.0)
    nn_cos = cos_grid.max(axis=1)
    covering = float(np.sqrt(max(0.0, 2.0 - 2.0 * nn_cos.min())))

    return ChainGraph(
        points=pts,
        eps=float(eps),
        min_time=float(min_time),
        leg_times=tuple(leg_times),
        edges=adj,
        marked=marked,
        covering_radius=covering,
    )
