"""Joint measurement models for qubit pairs.

Two informationally complete measurements on the pair are implemented.

* A nine-outcome SIC measurement acting on the triplet sector, with
  elements Pi_j = |v_j><v_j| / 3.  The kets v_j, written in the ordered
  triplet basis (|00>, |11>, (|01>+|10>)/sqrt(2)), are the columns of

        1    [  0  -1   1   0  -w   1   0  -1   w ]
      ----   [  1   0  -1   1   0  -w   w   0  -1 ],    w = exp(2 pi i/3).
      sqrt2  [ -1   1   0  -w   1   0  -1   w   0 ]

  The elements sum to the triplet identity, satisfy
  tr(Pi_j Pi_k) = 1/36 + delta_jk/12, and admit the exact inversion
  rho = sum_j q_j (12 Pi_j - I).

* A ten-outcome model built from local tetrahedron measurements
  Pi_k = (I + t_k.sigma)/4 on each qubit, with outcomes grouped into the
  four same-exit events Pi_k (x) Pi_k and the six coincidence events
  Pi_j (x) Pi_k + Pi_k (x) Pi_j (j < k).  The dual reconstruction operators
  use R_k = (I + 3 t_k.sigma)/2.  In moment form,

      q_k^s  = (1 + 2 t_k.s + t_k.C.t_k) / 16,
      q_jk^c = (1 + (t_j + t_k).s + t_j.C.t_k) / 8,

  and linear inversion reads

      s = 3 sum_k f_k^s t_k + (3/2) sum_{j<k} f_jk^c (t_j + t_k),
      C = 9 sum_k f_k^s t_k t_k^T
          + (9/2) sum_{j<k} f_jk^c (t_j t_k^T + t_k t_j^T).

  The singlet weight of the inversion is (-2 sum n^s + sum n^c)/N.

All element sets and the feature-to-probability matrices are precomputed
at import time and frozen.
"""

import math

import numpy as np

from .qstate import FEATURE_TRIPLETS, PAULIS, SymmetricTwoQubitState


class EmptyDataError(ValueError):
    """A counts vector with zero total cannot be inverted."""


def _frozen(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


def _hermitian_triplet(m):
    m = np.asarray(m, dtype=complex)
    if m.shape != (3, 3):
        raise ValueError("triplet matrix must be 3x3")
    if np.max(np.abs(m - m.conj().T)) > 1e-12:
        raise ValueError("triplet matrix must be Hermitian")
    return m


def _counts_vector(counts, arity):
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (arity,):
        raise ValueError(f"expected {arity} outcome counts, got shape {counts.shape}")
    if np.any(counts < 0) or not np.all(np.isfinite(counts)):
        raise ValueError("counts must be finite and non-negative")
    total = float(counts.sum())
    if total <= 0.0:
        raise EmptyDataError("counts sum to zero")
    return counts, total


class SicPovm:
    """The nine-outcome triplet-sector SIC measurement."""

    name = "sic"
    n_outcomes = 9

    def __init__(self):
        w = np.exp(2j * math.pi / 3)
        kets = np.array([
            [0, -1, 1, 0, -w, 1, 0, -1, w],
            [1, 0, -1, 1, 0, -w, w, 0, -1],
            [-1, 1, 0, -w, 1, 0, -1, w, 0],
        ], dtype=complex) / math.sqrt(2.0)
        elements = np.einsum("aj,bj->jab", kets, kets.conj()) / 3.0
        recon = 12.0 * elements - np.eye(3)
        # q_j as a linear map on moment features, via the triplet block
        moment = np.real(np.einsum("jab,iba->ji", elements, FEATURE_TRIPLETS))
        self.kets = _frozen(kets)
        self.elements = _frozen(elements)
        self.recon_elements = _frozen(recon)
        self.moment_matrix = _frozen(moment)
        self.outcome_names = tuple(f"v{j}" for j in range(1, 10))

    def probabilities_from_features(self, features):
        """(..., 10) moment features -> (..., 9) outcome probabilities."""
        return np.asarray(features) @ self.moment_matrix.T

    def probabilities(self, m):
        """Outcome probabilities for a triplet 3x3 matrix."""
        m = _hermitian_triplet(m)
        return np.real(np.einsum("jab,ba->j", self.elements, m))

    def linear_inversion(self, counts):
        """Frame inversion rho_LI = sum_j (n_j/N)(12 Pi_j - I); may be non-positive."""
        counts, total = _counts_vector(counts, 9)
        return np.einsum("j,jab->ab", counts / total, self.recon_elements)

    def elements4(self):
        """4x4 embeddings of the elements (diagnostics and self tests)."""
        emb = np.zeros((9, 4, 4), dtype=complex)
        r = 1.0 / math.sqrt(2.0)
        lift = np.array([[1, 0, 0], [0, 0, r], [0, 0, r], [0, 1, 0]], dtype=complex)
        for j in range(9):
            emb[j] = lift @ self.elements[j] @ lift.conj().T
        return emb


class TetraPovm:
    """Local tetrahedron measurements with same-exit/coincidence grouping."""

    name = "tetra"
    n_outcomes = 10

    def __init__(self):
        t = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]],
                     dtype=float) / math.sqrt(3.0)
        pairs = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
        moment = np.zeros((10, 10))
        for k in range(4):
            row = moment[k]
            row[0] = 1.0 / 16.0
            row[1:4] = 2.0 * t[k] / 16.0
            self._add_dyad(row, np.outer(t[k], t[k]), 1.0 / 16.0)
        for i, (j, k) in enumerate(pairs):
            row = moment[4 + i]
            row[0] = 1.0 / 8.0
            row[1:4] = (t[j] + t[k]) / 8.0
            dyad = 0.5 * (np.outer(t[j], t[k]) + np.outer(t[k], t[j]))
            self._add_dyad(row, dyad, 1.0 / 8.0)
        self.directions = _frozen(t)
        self.pairs = pairs
        self.moment_matrix = _frozen(moment)
        self.outcome_names = tuple(f"s{k}" for k in range(1, 5)) + tuple(
            f"c{j + 1}{k + 1}" for j, k in pairs)

    @staticmethod
    def _add_dyad(row, dyad, scale):
        # symmetric dyad contribution in feature order (cxx..cyz)
        row[4] += scale * dyad[0, 0]
        row[5] += scale * dyad[1, 1]
        row[6] += scale * dyad[2, 2]
        row[7] += scale * 2.0 * dyad[0, 1]
        row[8] += scale * 2.0 * dyad[0, 2]
        row[9] += scale * 2.0 * dyad[1, 2]

    def probabilities_from_features(self, features):
        """(..., 10) moment features -> (..., 10) outcome probabilities."""
        return np.asarray(features) @ self.moment_matrix.T

    def probabilities(self, state):
        """Outcome probabilities, same-exit outcomes first."""
        return self.probabilities_from_features(state.features())

    def linear_inversion(self, counts):
        """Moments (s, C) from relative frequencies.

        C is symmetrized exactly by construction.  For finite counts the
        result generally carries a nonzero singlet weight and may be
        non-positive; see SymmetricTwoQubitState.is_physical.
        """
        counts, total = _counts_vector(counts, 10)
        f = counts / total
        t = self.directions
        s = 3.0 * f[:4] @ t
        c = 9.0 * np.einsum("k,ka,kb->ab", f[:4], t, t)
        for i, (j, k) in enumerate(self.pairs):
            s = s + 1.5 * f[4 + i] * (t[j] + t[k])
            c = c + 4.5 * f[4 + i] * (np.outer(t[j], t[k]) + np.outer(t[k], t[j]))
        return SymmetricTwoQubitState(s, 0.5 * (c + c.T))

    def singlet_weight(self, counts):
        """Singlet weight of the linear inversion: (-2 sum n^s + sum n^c)/N."""
        counts, total = _counts_vector(counts, 10)
        return float(-2.0 * counts[:4].sum() + counts[4:].sum()) / total

    def elements4(self):
        """4x4 POVM elements (diagnostics and self tests)."""
        local = np.array([(np.eye(2) + np.einsum("a,aij->ij", tk, PAULIS)) / 4.0
                          for tk in self.directions])
        out = np.zeros((10, 4, 4), dtype=complex)
        for k in range(4):
            out[k] = np.kron(local[k], local[k])
        for i, (j, k) in enumerate(self.pairs):
            out[4 + i] = np.kron(local[j], local[k]) + np.kron(local[k], local[j])
        return out


SIC = SicPovm()
TETRA = TetraPovm()
_POVMS = {"sic": SIC, "tetra": TETRA}


def get_povm(name):
    """Look up a measurement model by name ('sic' or 'tetra')."""
    if isinstance(name, (SicPovm, TetraPovm)):
        return name
    try:
        return _POVMS[name]
    except KeyError:
        raise ValueError(f"unknown povm {name!r}; expected 'sic' or 'tetra'") from None


def povm_for_arity(n):
    """Infer the measurement model from the number of outcomes."""
    if n == 9:
        return SIC
    if n == 10:
        return TETRA
    raise ValueError(f"no measurement model with {n} outcomes")


def sic_probabilities(m):
    """SIC outcome probabilities of a triplet 3x3 matrix."""
    return SIC.probabilities(m)


def sic_linear_inversion(counts):
    """Triplet matrix from SIC counts by frame inversion."""
    return SIC.linear_inversion(counts)


def tetra_probabilities(state):
    """Tetrahedron-pair outcome probabilities of a symmetric two-qubit state."""
    return TETRA.probabilities(state)


def tetra_linear_inversion(counts):
    """Moments (s, C) from tetrahedron-pair counts."""
    return TETRA.linear_inversion(counts)


def singlet_weight(counts):
    """Singlet weight of the tetrahedron linear inversion."""
    return TETRA.singlet_weight(counts)
