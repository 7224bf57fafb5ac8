"""Analytic recovery of the two preparation states from triplet moments.

Two independent routes are provided:

* `decompose_moments` works directly on (s, C).  The dyad M = C - s s^T
  equals p0 p1 (a-b)(a-b)^T, so its leading eigenvector e carries the
  difference direction; with m the leading eigenvalue and g = s.e,

      s' = (a+b)/2 = s - g e,      (p0-p1)^2 = g^2 / (m + g^2),
      a, b = s' +- sqrt(m + g^2) e.

  These are the closed-form relations s' = (s - C.s)/(1 - s.s) and
  (p0-p1)^2 = (s-s')^2/(1-s'^2) rewritten through the eigenpair, which
  keeps full accuracy when p0 p1 is tiny (there 1 - s.s = p0 p1 |a-b|^2
  underflows the direct form) and absorbs the p0 = p1 case, where the
  construction reduces to the leading eigenvector with eigenvalue
  (1 - a.b)/2.

* the null-ket route: the triplet block of a rank-two pair ensemble has a
  null vector xi = c00|00> + c01(|01> + |10>) + c11|11>, and the preparation
  amplitudes (a0, a1) are read off the roots z = a0*/a1* of

      c00 z^2 + 2 c01 z + c11 = 0.

  `xi_from_triplet` extracts the null ket, `states_from_xi` solves the
  quadratic (with the numerically stable root pairing), and
  `probabilities_given_states` fits the weights by least squares.

Eigen-decompositions of 3x3 Hermitian matrices use cyclic Jacobi rotations
run to an off-diagonal norm of 1e-14; at this size the iteration is cheap
and avoids the accuracy loss of closed-form cubic roots near degeneracies.
"""

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .qstate import PureQubit, canonical_phase, pair_ket_triplet


class DegenerateInputError(ValueError):
    """Moments carry no resolvable two-state structure (e.g. |s| >= 1)."""


class NonPhysicalMomentsError(ValueError):
    """Moments lie outside the reachable set, beyond noise tolerance."""


class IllConditionedError(ValueError):
    """Requested operation is numerically meaningless for this input."""


class IllConditionedWarning(UserWarning):
    """Result is returned but poorly determined by the input."""


# --------------------------------------------------------------------------
# 3x3 Hermitian eigensolver

def jacobi_eigh3(a, tol=1e-14, max_sweeps=50):
    """Eigen-decomposition of a 3x3 Hermitian matrix by cyclic Jacobi.

    Returns (w, v) with eigenvalues w ascending and unit eigenvectors in the
    columns of v, each phase-fixed so its largest-magnitude component is
    real and positive.  Sweeps run until the off-diagonal Frobenius norm
    drops below tol relative to the matrix norm.  Fully deterministic.
    """
    a = np.array(a, dtype=complex)
    v = np.eye(3, dtype=complex)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(3), v
    for _ in range(max_sweeps):
        off = math.sqrt(abs(a[0, 1]) ** 2 + abs(a[0, 2]) ** 2 + abs(a[1, 2]) ** 2)
        if off <= tol * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[p, q]
            mag = abs(apq)
            if mag <= 1e-300:
                continue
            phase = apq / mag
            tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
            if tau >= 0.0:
                t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
            else:
                t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
            c = 1.0 / math.sqrt(1.0 + t * t)
            s = t * c
            # columns p,q of the rotation: [c, -s e^{-i phi}; s e^{i phi}, c]
            jp = np.zeros(3, dtype=complex)
            jq = np.zeros(3, dtype=complex)
            jp[p] = c
            jp[q] = -s * phase.conjugate()
            jq[p] = s * phase
            jq[q] = c
            ap = a @ jp
            aq = a @ jq
            cols = np.column_stack([ap, aq])
            rows = np.column_stack([jp, jq]).conj().T @ cols
            a[:, p] = ap
            a[:, q] = aq
            a[p, :] = ap.conj()
            a[q, :] = aq.conj()
            a[np.ix_((p, q), (p, q))] = 0.5 * (rows + rows.conj().T)
            vp = v @ jp
            vq = v @ jq
            v[:, p] = vp
            v[:, q] = vq
    w = a.diagonal().real.copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    for k in range(3):
        v[:, k] = canonical_phase(v[:, k])
    return w, v


# --------------------------------------------------------------------------
# Result containers

@dataclass(frozen=True)
class TripletKet:
    """Pure triplet-sector ket c00|00> + c01(|01>+|10>) + c11|11>.

    Stored normalized: |c00|^2 + 2|c01|^2 + |c11|^2 = 1.
    """

    c00: complex
    c01: complex
    c11: complex

    def __post_init__(self):
        norm = math.sqrt(abs(self.c00) ** 2 + 2 * abs(self.c01) ** 2 + abs(self.c11) ** 2)
        if norm < 1e-150:
            raise ValueError("null-ket components are all zero")
        object.__setattr__(self, "c00", complex(self.c00) / norm)
        object.__setattr__(self, "c01", complex(self.c01) / norm)
        object.__setattr__(self, "c11", complex(self.c11) / norm)

    def components(self):
        """Coordinates in the ordered triplet basis (|00>, |11>, chi)."""
        return np.array([self.c00, self.c11, math.sqrt(2.0) * self.c01])


@dataclass(frozen=True)
class Decomposition:
    """Recovered source: two pure states with probabilities p0 >= p1.

    clamped marks noisy inputs whose (p0-p1)^2 landed slightly above 1 and
    was truncated to the boundary.
    """

    state0: PureQubit
    state1: PureQubit
    p0: float
    p1: float
    degenerate: bool = False
    method: str = ""
    clamped: bool = False

    @classmethod
    def ordered(cls, sa, sb, pa, pb, degenerate=False, method="", clamped=False):
        """Apply the labeling convention: p0 >= p1, ties by ascending Bloch order."""
        if pa < pb or (pa == pb and tuple(sb.bloch) < tuple(sa.bloch)):
            sa, sb, pa, pb = sb, sa, pb, pa
        return cls(sa, sb, pa, pb, degenerate, method, clamped)


# --------------------------------------------------------------------------
# Moment route

def decompose_moments(state, tol=1e-8):
    """Recover states and probabilities from (s, C) moments.

    tol sets the scale below which the source is treated as degenerate
    (single state); use max(1e-8, 4/sqrt(N)) for moments estimated from N
    counts, matching the statistical noise floor of linear inversion.
    Noisy inputs whose (p0-p1)^2 lands in (1, 1+tol] are clamped to the
    boundary and marked; beyond that NonPhysicalMomentsError is raised.
    """
    s = np.asarray(state.s, dtype=float)
    s2 = float(s @ s)
    dyad = state.c - np.outer(s, s)
    if np.linalg.norm(dyad) <= tol:
        norm_s = math.sqrt(s2)
        if norm_s < 1e-12:
            raise DegenerateInputError("moments carry no state direction")
        psi = PureQubit.from_bloch(s / norm_s)
        return Decomposition(psi, psi, 1.0, 0.0, degenerate=True, method="moments")
    if s2 >= 1.0:
        raise DegenerateInputError(f"|s|^2 = {s2} >= 1 leaves no mixture to resolve")
    w, v = jacobi_eigh3(dyad.astype(complex))
    m_top = float(w[2])
    e = v[:, 2].real
    g = float(s @ e)
    if g < 0.0:
        g = -g
        e = -e
    denom = m_top + g * g
    if denom <= 0.0:
        raise NonPhysicalMomentsError("moment dyad has no positive direction")
    d2 = g * g / denom
    clamped = False
    if d2 > 1.0 + tol:
        raise NonPhysicalMomentsError(f"(p0-p1)^2 = {d2} exceeds 1 beyond tolerance")
    if d2 > 1.0:
        d2 = 1.0
        clamped = True
    delta = math.sqrt(d2)
    p0 = 0.5 * (1.0 + delta)
    p1 = 1.0 - p0
    sp = s - g * e
    half = math.sqrt(denom)
    a = sp + half * e
    b = sp - half * e
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise DegenerateInputError("recovered Bloch vector has no direction")
    return Decomposition.ordered(PureQubit.from_bloch(a / na),
                                 PureQubit.from_bloch(b / nb),
                                 p0, p1, method="moments", clamped=clamped)


# --------------------------------------------------------------------------
# Null-ket route

def xi_from_triplet(m, degeneracy_tol=1e-9):
    """Null ket of a triplet 3x3 matrix: eigenvector of smallest eigenvalue.

    Returns (TripletKet, eigenvalue).  If the two smallest eigenvalues agree
    within degeneracy_tol the ket is poorly determined and an
    IllConditionedWarning is issued; the returned vector is still
    deterministic.
    """
    m = np.asarray(m, dtype=complex)
    if m.shape != (3, 3) or np.max(np.abs(m - m.conj().T)) > 1e-12:
        raise ValueError("input must be a 3x3 Hermitian matrix")
    w, v = jacobi_eigh3(m)
    if w[1] - w[0] < degeneracy_tol:
        warnings.warn("smallest triplet eigenvalues nearly degenerate; "
                      "null ket is ill-determined", IllConditionedWarning,
                      stacklevel=2)
    u = v[:, 0]
    ket = TripletKet(u[0], u[2] / math.sqrt(2.0), u[1])
    return ket, float(w[0])


def _state_from_root(z):
    """Preparation state for a root z = a0*/a1* of the null-ket quadratic."""
    return PureQubit.from_amplitudes(z.conjugate(), 1.0)


def states_from_xi(xi, tol=1e-12):
    """Solve c00 z^2 + 2 c01 z + c11 = 0 for the two preparation states.

    Returns (state_a, state_b, degenerate).  A vanishing c00 moves one root
    to infinity, which corresponds to the state |0>; a double root yields
    two identical states and sets the degenerate flag.
    """
    c00 = xi.c00
    c01 = xi.c01
    c11 = xi.c11
    if abs(c00) <= tol:
        if abs(c01) <= tol:
            # only (a1*)^2 c11 = 0 remains: both states are |0>
            sa = sb = PureQubit(0.0, 0.0)
            return sa, sb, True
        sa = _state_from_root(-c11 / (2.0 * c01))
        sb = PureQubit(0.0, 0.0)
    else:
        sq = cmath.sqrt(c01 * c01 - c00 * c11)
        if (c01.conjugate() * sq).real < 0.0:
            sq = -sq
        q = -(c01 + sq)
        if abs(q) <= tol:
            # c01 ~ 0 and c00*c11 ~ 0 with c00 != 0: double root at z = 0
            sa = sb = _state_from_root(0j)
            return sa, sb, True
        sa = _state_from_root(q / c00)
        sb = _state_from_root(c11 / q)
    degenerate = sa.overlap(sb) >= 1.0 - 1e-12
    return sa, sb, degenerate


def probabilities_given_states(m, state0, state1):
    """Least-squares probabilities for known states given a triplet matrix.

    Fits m ~ p0 P0 + p1 P1 with p0 + p1 = 1, where Pj is the triplet
    projector of psi_j (x) psi_j; the optimum is a one-dimensional linear
    fit along P0 - P1.  Probabilities are clamped to [0, 1].
    """
    if state0.overlap(state1) > 1.0 - 1e-10:
        raise IllConditionedError("states nearly identical; weights undetermined")
    m = np.asarray(m, dtype=complex)
    w0 = pair_ket_triplet(state0)
    w1 = pair_ket_triplet(state1)
    p_mat0 = np.outer(w0, w0.conj())
    p_mat1 = np.outer(w1, w1.conj())
    d = p_mat0 - p_mat1
    num = float(np.real(np.sum(d.conj() * (m - p_mat1))))
    den = float(np.real(np.sum(d.conj() * d)))
    p0 = min(1.0, max(0.0, num / den))
    return p0, 1.0 - p0
