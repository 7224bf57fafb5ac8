"""States of a two-state qubit-pair source and their moment representation.

The source model: every emitted pair is prepared in psi0 (x) psi0 with
probability p0 or in psi1 (x) psi1 with probability p1 = 1 - p0, where
psi0 and psi1 are unknown pure qubit states.  Any mixture of this form is
supported on the symmetric (triplet) sector of the two-qubit space and is
completely described by its first and second moments,

    rho = (1/4) * (I4 + s . (sigma(1) + sigma(2)) + sigma(1) . C . sigma(2)),

with

    s = p0*a + p1*b,        C = p0*a a^T + p1*b b^T,

where a, b are the Bloch vectors of psi0, psi1.  C is symmetric and has
unit trace for states of this family.

Parameterization used throughout the package:

    psi = cos(theta)|0> + e^{i phi} sin(theta)|1>,   theta in [0, pi/2],
                                                     phi   in [0, 2 pi),
    p0 = cos(alpha)^2,  p1 = sin(alpha)^2,           alpha in [0, pi/2].

Restricting theta to [0, pi/2] makes (theta, phi) <-> Bloch vector a
bijection except at the poles, where phi is fixed to 0.

Triplet-sector matrices are written in the ordered basis

    |00>,  |11>,  (|01> + |10>)/sqrt(2),

and second-moment coefficients are packed into a length-10 feature vector

    (1, sx, sy, sz, Cxx, Cyy, Czz, Cxy, Cxz, Cyz)

so that all measurement probabilities become a single matrix product.
"""

import math
from dataclasses import dataclass, field

import numpy as np

HALF_PI = math.pi / 2
TWO_PI = 2 * math.pi

# Pauli matrices, used for embedding states in the full 4x4 picture.
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.array([SIGMA_X, SIGMA_Y, SIGMA_Z])

FEATURE_NAMES = ("1", "sx", "sy", "sz", "cxx", "cyy", "czz", "cxy", "cxz", "cyz")

_POLE_TOL = 1e-15


def _check_angle(name, value, upper):
    if not (0.0 <= value <= upper) or not math.isfinite(value):
        raise ValueError(f"{name} = {value!r} outside [0, {upper}]")


def canonical_phase(ket):
    """Fix the global phase of a complex vector deterministically.

    The component of largest magnitude (first such index on ties) is made
    real and non-negative.  Returns a new array.
    """
    ket = np.asarray(ket, dtype=complex)
    k = int(np.argmax(np.abs(ket)))
    pivot = ket[k]
    mag = abs(pivot)
    if mag == 0.0:
        return ket.copy()
    out = ket * (pivot.conjugate() / mag)
    out[k] = abs(out[k])
    return out


@dataclass(frozen=True)
class PureQubit:
    """A pure qubit state cos(theta)|0> + e^{i phi} sin(theta)|1>.

    The global phase is fixed by keeping the |0> amplitude real and >= 0.
    At the poles (theta = 0 or pi/2) phi is normalized to 0 so that equal
    states compare equal.
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "phi", float(self.phi))
        _check_angle("theta", self.theta, HALF_PI)
        if not (0.0 <= self.phi < TWO_PI) or not math.isfinite(self.phi):
            raise ValueError(f"phi = {self.phi!r} outside [0, 2*pi)")
        if math.sin(2 * self.theta) <= _POLE_TOL and self.phi != 0.0:
            object.__setattr__(self, "phi", 0.0)

    @classmethod
    def from_amplitudes(cls, a0, a1):
        """Canonical angles for any (not necessarily normalized) amplitudes."""
        a0 = complex(a0)
        a1 = complex(a1)
        r0 = abs(a0)
        r1 = abs(a1)
        if r0 == 0.0 and r1 == 0.0:
            raise ValueError("zero amplitude vector has no state")
        theta = math.atan2(r1, r0)
        if r0 <= _POLE_TOL * r1 or r1 <= _POLE_TOL * r0:
            phi = 0.0
        else:
            phi = (np.angle(a1) - np.angle(a0)) % TWO_PI
        return cls(theta, phi)

    @classmethod
    def from_bloch(cls, v):
        """State with the given unit Bloch vector."""
        x, y, z = (float(c) for c in v)
        z = min(1.0, max(-1.0, z))
        theta = 0.5 * math.acos(z)
        if math.hypot(x, y) <= _POLE_TOL:
            phi = 0.0
        else:
            phi = math.atan2(y, x) % TWO_PI
        return cls(theta, phi)

    @classmethod
    def from_any_angles(cls, theta, phi):
        """Canonicalize angles that may lie outside the standard ranges."""
        return cls.from_amplitudes(math.cos(theta),
                                   complex(math.cos(phi), math.sin(phi)) * math.sin(theta))

    @property
    def amplitudes(self):
        return np.array([math.cos(self.theta),
                         complex(math.cos(self.phi), math.sin(self.phi)) * math.sin(self.theta)])

    @property
    def bloch(self):
        return bloch_from_angles(self.theta, self.phi)

    def overlap(self, other):
        """|<self|other>|^2, computed from Bloch vectors."""
        return 0.5 * (1.0 + float(np.dot(self.bloch, other.bloch)))


def bloch_from_angles(theta, phi):
    """Unit Bloch vector (sin2t cos phi, sin2t sin phi, cos2t) of PureQubit angles."""
    _check_angle("theta", theta, HALF_PI)
    if not (0.0 <= phi < TWO_PI) or not math.isfinite(phi):
        raise ValueError(f"phi = {phi!r} outside [0, 2*pi)")
    s2 = math.sin(2 * theta)
    return np.array([s2 * math.cos(phi), s2 * math.sin(phi), math.cos(2 * theta)])


@dataclass(frozen=True)
class ParamVector:
    """Full source parameterization theta = (theta0, phi0, theta1, phi1, alpha)."""

    theta0: float
    phi0: float
    theta1: float
    phi1: float
    alpha: float

    def __post_init__(self):
        for name in ("theta0", "phi0", "theta1", "phi1", "alpha"):
            object.__setattr__(self, name, float(getattr(self, name)))
        _check_angle("theta0", self.theta0, HALF_PI)
        _check_angle("theta1", self.theta1, HALF_PI)
        _check_angle("alpha", self.alpha, HALF_PI)
        for name in ("phi0", "phi1"):
            v = getattr(self, name)
            if not (0.0 <= v < TWO_PI) or not math.isfinite(v):
                raise ValueError(f"{name} = {v!r} outside [0, 2*pi)")

    @classmethod
    def from_array(cls, arr):
        return cls(*(float(v) for v in arr))

    @classmethod
    def from_any_angles(cls, theta0, phi0, theta1, phi1, alpha):
        """Canonicalize angles that may lie outside the standard box.

        The states are rebuilt from their amplitudes and alpha is reduced
        through p0 = cos^2(alpha); the represented source is unchanged.
        """
        return cls.from_states(PureQubit.from_any_angles(theta0, phi0),
                               PureQubit.from_any_angles(theta1, phi1),
                               math.cos(alpha) ** 2)

    @classmethod
    def from_states(cls, state0, state1, p0):
        if not 0.0 <= p0 <= 1.0:
            raise ValueError(f"p0 = {p0!r} outside [0, 1]")
        alpha = math.acos(math.sqrt(p0))
        return cls(state0.theta, state0.phi, state1.theta, state1.phi, alpha)

    def to_array(self):
        return np.array([self.theta0, self.phi0, self.theta1, self.phi1, self.alpha])

    @property
    def p0(self):
        return math.cos(self.alpha) ** 2

    @property
    def p1(self):
        return math.sin(self.alpha) ** 2

    @property
    def state0(self):
        return PureQubit(self.theta0, self.phi0)

    @property
    def state1(self):
        return PureQubit(self.theta1, self.phi1)


@dataclass(frozen=True)
class SymmetricTwoQubitState:
    """Moment representation (s, C) of a swap-symmetric two-qubit state.

    C is stored exactly symmetric.  For pair-source ensembles trace(C) = 1
    and the singlet weight vanishes; linear-inversion estimates may violate
    positivity and the unit trace, which is what `is_physical` and
    `singlet_weight` report.
    """

    s: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        c = np.array(self.c, dtype=float)
        if s.shape != (3,) or c.shape != (3, 3):
            raise ValueError("s must be shape (3,), c must be shape (3, 3)")
        if np.max(np.abs(c - c.T)) > 1e-12:
            raise ValueError("correlation dyad must be symmetric")
        c = 0.5 * (c + c.T)
        s.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "c", c)

    @property
    def singlet_weight(self):
        """Weight on the antisymmetric (singlet) sector, (1 - tr C)/4."""
        return (1.0 - float(np.trace(self.c))) / 4.0

    def features(self):
        """Length-10 moment feature vector (see module docstring)."""
        c = self.c
        return np.concatenate(([1.0], self.s,
                               [c[0, 0], c[1, 1], c[2, 2], c[0, 1], c[0, 2], c[1, 2]]))

    def matrix4(self):
        """Full 4x4 density-matrix embedding."""
        rho = np.eye(4, dtype=complex)
        for k in range(3):
            pk = PAULIS[k]
            rho += self.s[k] * (np.kron(pk, np.eye(2)) + np.kron(np.eye(2), pk))
            for l in range(3):
                rho += self.c[k, l] * np.kron(pk, PAULIS[l])
        return rho / 4.0

    def is_physical(self, eig_tol=1e-10, trace_tol=1e-12):
        """True when this is a valid pair-ensemble state within tolerance.

        Checks both positivity of the 4x4 embedding (eigenvalues >= -eig_tol)
        and trace(C) = 1 (zero singlet weight).  Linear inversion on finite
        counts routinely fails this; the flag is informational, nothing is
        repaired.
        """
        if abs(float(np.trace(self.c)) - 1.0) > trace_tol:
            return False
        return bool(np.linalg.eigvalsh(self.matrix4())[0] >= -eig_tol)


def ensemble_state(params):
    """Moments (s, C) of the pair source described by a ParamVector."""
    a = bloch_from_angles(params.theta0, params.phi0)
    b = bloch_from_angles(params.theta1, params.phi1)
    p0 = params.p0
    p1 = params.p1
    s = p0 * a + p1 * b
    c = p0 * np.outer(a, a) + p1 * np.outer(b, b)
    return SymmetricTwoQubitState(s, 0.5 * (c + c.T))


def moment_features(thetas):
    """Vectorized moment features for an (..., 5) array of parameter vectors.

    Column order matches ParamVector.to_array(); output columns follow
    FEATURE_NAMES.  This is the hot path for likelihood evaluation, so it
    works on batches without constructing any state objects.
    """
    thetas = np.asarray(thetas, dtype=float)
    t0, f0, t1, f1, al = (thetas[..., i] for i in range(5))
    s2t0 = np.sin(2 * t0)
    s2t1 = np.sin(2 * t1)
    ax = s2t0 * np.cos(f0)
    ay = s2t0 * np.sin(f0)
    az = np.cos(2 * t0)
    bx = s2t1 * np.cos(f1)
    by = s2t1 * np.sin(f1)
    bz = np.cos(2 * t1)
    p0 = np.cos(al) ** 2
    p1 = 1.0 - p0
    out = np.empty(thetas.shape[:-1] + (10,))
    out[..., 0] = 1.0
    out[..., 1] = p0 * ax + p1 * bx
    out[..., 2] = p0 * ay + p1 * by
    out[..., 3] = p0 * az + p1 * bz
    out[..., 4] = p0 * ax * ax + p1 * bx * bx
    out[..., 5] = p0 * ay * ay + p1 * by * by
    out[..., 6] = p0 * az * az + p1 * bz * bz
    out[..., 7] = p0 * ax * ay + p1 * bx * by
    out[..., 8] = p0 * ax * az + p1 * bx * bz
    out[..., 9] = p0 * ay * az + p1 * by * bz
    return out


def random_param_array(rng, size):
    """(size, 5) parameter vectors drawn from the reference measure.

    Bloch vectors isotropic on the sphere (cos 2theta uniform on [-1, 1],
    phi uniform on [0, 2pi)) and alpha uniform on [0, pi/2].
    """
    u = rng.random((size, 5))
    out = np.empty((size, 5))
    out[:, 0] = 0.5 * np.arccos(1.0 - 2.0 * u[:, 0])
    out[:, 1] = TWO_PI * u[:, 1]
    out[:, 2] = 0.5 * np.arccos(1.0 - 2.0 * u[:, 2])
    out[:, 3] = TWO_PI * u[:, 3]
    out[:, 4] = HALF_PI * u[:, 4]
    return out


# --------------------------------------------------------------------------
# Triplet-sector 3x3 representation.
#
# Entry formulas in the ordered basis (|00>, |11>, (|01>+|10>)/sqrt(2)),
# written out once as a linear map on the moment features so that the same
# coefficients serve scalar use, batch use and the measurement models.

_SQRT2 = math.sqrt(2.0)


def _feature_triplet_tensor():
    """(10, 3, 3) tensor T with  m = sum_i feature_i * T[i]."""
    t = np.zeros((10, 3, 3), dtype=complex)
    one, sx, sy, sz, cxx, cyy, czz, cxy, cxz, cyz = range(10)
    # diagonal
    t[one, 0, 0] = 0.25
    t[sz, 0, 0] = 0.5
    t[czz, 0, 0] = 0.25
    t[one, 1, 1] = 0.25
    t[sz, 1, 1] = -0.5
    t[czz, 1, 1] = 0.25
    t[one, 2, 2] = 0.25
    t[czz, 2, 2] = -0.25
    t[cxx, 2, 2] = 0.25
    t[cyy, 2, 2] = 0.25
    # <00| rho |11>
    t[cxx, 0, 1] = 0.25
    t[cyy, 0, 1] = -0.25
    t[cxy, 0, 1] = -0.5j
    # <00| rho |chi>
    t[sx, 0, 2] = _SQRT2 / 4
    t[sy, 0, 2] = -1j * _SQRT2 / 4
    t[cxz, 0, 2] = _SQRT2 / 4
    t[cyz, 0, 2] = -1j * _SQRT2 / 4
    # <11| rho |chi>
    t[sx, 1, 2] = _SQRT2 / 4
    t[sy, 1, 2] = 1j * _SQRT2 / 4
    t[cxz, 1, 2] = -_SQRT2 / 4
    t[cyz, 1, 2] = -1j * _SQRT2 / 4
    # hermitian completion
    for i in range(10):
        t[i] = t[i] + np.triu(t[i], 1).conj().T
    t.setflags(write=False)
    return t

FEATURE_TRIPLETS = _feature_triplet_tensor()


def triplet_from_features(features):
    """Triplet 3x3 matrices from (..., 10) moment features."""
    return np.tensordot(np.asarray(features), FEATURE_TRIPLETS, axes=([-1], [0]))


def to_triplet_matrix(state):
    """3x3 triplet-sector block of the state.

    Any singlet weight (see `state.singlet_weight`) lives outside this block
    and is simply not represented; for pair-ensemble states it is zero and
    the result has unit trace.
    """
    return triplet_from_features(state.features())


def from_triplet_matrix(m):
    """Moments (s, C) from a triplet 3x3 Hermitian matrix.

    Exact inverse of `to_triplet_matrix`: the nine real degrees of freedom of
    the block determine s and C completely.
    """
    m = np.asarray(m, dtype=complex)
    if m.shape != (3, 3):
        raise ValueError("triplet matrix must be 3x3")
    if np.max(np.abs(m - m.conj().T)) > 1e-12:
        raise ValueError("triplet matrix must be Hermitian")
    m00 = m[0, 0].real
    m11 = m[1, 1].real
    m22 = m[2, 2].real
    sz = m00 - m11
    czz = 2.0 * (m00 + m11) - 1.0
    cxx_m_cyy = 4.0 * m[0, 1].real
    cxy = -2.0 * m[0, 1].imag
    cxx_p_cyy = 4.0 * m22 - 1.0 + czz
    cxx = 0.5 * (cxx_p_cyy + cxx_m_cyy)
    cyy = 0.5 * (cxx_p_cyy - cxx_m_cyy)
    sx = _SQRT2 * (m[0, 2].real + m[1, 2].real)
    cxz = _SQRT2 * (m[0, 2].real - m[1, 2].real)
    sy = _SQRT2 * (m[1, 2].imag - m[0, 2].imag)
    cyz = -_SQRT2 * (m[0, 2].imag + m[1, 2].imag)
    s = np.array([sx, sy, sz])
    c = np.array([[cxx, cxy, cxz], [cxy, cyy, cyz], [cxz, cyz, czz]])
    return SymmetricTwoQubitState(s, c)


def pair_ket_triplet(state):
    """Triplet-basis components of psi (x) psi for a PureQubit psi.

    Returns (a0^2, a1^2, sqrt(2) a0 a1); always a unit vector.
    """
    a0, a1 = state.amplitudes
    return np.array([a0 * a0, a1 * a1, _SQRT2 * a0 * a1])
