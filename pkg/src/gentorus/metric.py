"""Generalized metrics, the spinor Hodge star and the Born-Infeld pairing.

A generalized metric is an involution G of T + T* commuting with the
structure J, with positive definite form <G., .>.  Its +1 eigenbundle
carries an oriented orthonormal frame a_1..a_{2n}; the Hodge star is the
Clifford word a_1 . a_2 ... a_{2n} and the inner product of two spinors is

    (alpha, beta) = integral of alpha ^ rev(star(conj beta)),

with rev the reversal anti-automorphism of the exterior algebra.  The
frame orientation is the one making this pairing positive definite (the
sign alternates with n for the coordinate orientation, so positivity is the
deterministic tie-breaker).
"""

from __future__ import annotations

import math
from typing import Dict, List, Tuple

import numpy as np

from .fourier import TorusGeometry, TruncationBox
from .spinor import (
    CourantVector,
    Spinor,
    constant_clifford_matrix,
    monomial_list,
    spinor_from_mode_vectors,
    spinor_mode_vector,
)
from .structure import GCStructure, natural_pairing_matrix, _vector_from_values


class MetricError(ValueError):
    """A candidate generalized metric failed its defining checks."""


def _complement_sign(mono: Tuple[int, ...], dim: int) -> Tuple[Tuple[int, ...], int]:
    """Complementary monomial and the sign with mono ^ comp = volume."""
    comp = tuple(i for i in range(dim) if i not in mono)
    perm = list(mono) + list(comp)
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return comp, sign


class GeneralizedMetric:
    """Involution G with positive <G., .>, plus its spinor-level kit.

    Attributes
    ----------
    gmatrix : ndarray
        Real 4n x 4n matrix of G.
    cplus, cminus : list of CourantVector
        Orthonormal frames of the +1 / -1 eigenbundles.
    star_matrix : ndarray
        Constant matrix of the Hodge star on the monomial basis.
    volume_factor : float
        det(g + b) / det(g) when built from tensor data, else computed from
        the recovered graph data.
    """

    def __init__(
        self,
        geometry: TorusGeometry,
        box: TruncationBox,
        cplus_values: np.ndarray,
        cminus_values: np.ndarray,
        g: np.ndarray | None = None,
        b: np.ndarray | None = None,
        tol: float = 1e-10,
    ):
        self.geometry = geometry
        self.box = box
        dim = geometry.dim
        q = natural_pairing_matrix(dim)

        # orientation: positive determinant of the C+ tangent projections,
        # then flip to make the Born-Infeld pairing positive definite
        tangent = cplus_values[:dim, :]
        det = np.linalg.det(tangent.real)
        if det < 0:
            cplus_values = cplus_values.copy()
            cplus_values[:, [0, 1]] = cplus_values[:, [1, 0]]

        star = self._star_from(cplus_values, dim)
        gram = self._gram_from(star, dim)
        hmat = gram.T
        if np.abs(hmat - hmat.conj().T).max() > 1e-9:
            raise MetricError("Born-Infeld pairing is not Hermitian")
        sign_probe = hmat[0, 0].real
        if sign_probe < 0:
            cplus_values = cplus_values.copy()
            cplus_values[:, [0, 1]] = cplus_values[:, [1, 0]]
            star = -star
            gram = -gram
            hmat = -hmat
        eigs = np.linalg.eigvalsh(hmat)
        if eigs.min() <= 0:
            raise MetricError(
                f"Born-Infeld pairing is not positive definite (min eig {eigs.min():.3e})"
            )

        self._cplus_values = cplus_values
        self._cminus_values = cminus_values
        self.cplus = [_vector_from_values(geometry, box, cplus_values[:, i]) for i in range(dim)]
        self.cminus = [_vector_from_values(geometry, box, cminus_values[:, i]) for i in range(dim)]
        self.star_matrix = star
        self.bi_gram = gram
        self._hermitian_gram = hmat
        self.star_inverse = np.linalg.inv(star)

        basis = np.column_stack([cplus_values, cminus_values])
        signs = np.diag([1.0] * dim + [-1.0] * dim)
        gm = basis @ signs @ np.linalg.inv(basis)
        if np.abs(gm.imag).max() > 1e-9:
            raise MetricError("metric endomorphism is not real")
        self.gmatrix = gm.real

        res: Dict[str, float] = {}
        res["involution"] = float(np.abs(self.gmatrix @ self.gmatrix - np.eye(2 * dim)).max())
        res["symmetry"] = float(np.abs(q @ self.gmatrix - (q @ self.gmatrix).T).max())
        gramq = self.gmatrix.T @ q
        res["positivity"] = float(max(0.0, -np.linalg.eigvalsh((gramq + gramq.T) / 2).min()))
        ortho = cplus_values.T @ q @ cplus_values - np.eye(dim)
        res["cplus_orthonormal"] = float(np.abs(ortho).max())
        res["cminus_orthonormal"] = float(
            np.abs(cminus_values.T @ q @ cminus_values + np.eye(dim)).max()
        )
        res["eigenbundle_orthogonal"] = float(np.abs(cplus_values.T @ q @ cminus_values).max())
        res["star_real"] = float(np.abs(star.imag).max())
        self.validation = res
        bad = {k: v for k, v in res.items() if v > tol}
        if bad:
            raise MetricError(
                "metric failed validation: " + ", ".join(f"{k}={v:.3e}" for k, v in bad.items())
            )

        if g is None or b is None:
            g, b = self._recover_graph()
        self.g = np.asarray(g, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.volume_factor = float(
            np.linalg.det(self.g + self.b) / np.linalg.det(self.g)
        )

    # ------------------------------------------------------------------

    @staticmethod
    def _star_from(cplus_values: np.ndarray, dim: int) -> np.ndarray:
        mats = [constant_clifford_matrix(cplus_values[:, i], dim) for i in range(dim)]
        star = np.eye(2 ** dim, dtype=complex)
        for m in mats:
            star = star @ m  # a_1 ... a_{2n}: rightmost factor acts first
        return star

    @staticmethod
    def _gram_from(star: np.ndarray, dim: int) -> np.ndarray:
        """Gram[mu, nu] = top coefficient of mon_mu ^ rev(star mon_nu)."""
        monos = monomial_list(dim)
        size = len(monos)
        gram = np.zeros((size, size), dtype=complex)
        comp_data = [_complement_sign(m, dim) for m in monos]
        index = {m: i for i, m in enumerate(monos)}
        for nu in range(size):
            image = star[:, nu].copy()
            for i, m in enumerate(monos):
                p = len(m)
                if (p * (p - 1) // 2) % 2:
                    image[i] = -image[i]
            for mu, mono in enumerate(monos):
                comp, sign = comp_data[mu]
                gram[mu, nu] = sign * image[index[comp]]
        return gram

    def _recover_graph(self) -> Tuple[np.ndarray, np.ndarray]:
        dim = self.geometry.dim
        tangent = self._cplus_values[:dim, :].real
        cotangent = self._cplus_values[dim:, :].real
        graph = cotangent @ np.linalg.inv(tangent)
        g = (graph + graph.T) / 2
        b = (graph - graph.T) / 2
        return g, b

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------

    @classmethod
    def from_tensors(
        cls,
        geometry: TorusGeometry,
        box: TruncationBox,
        g: np.ndarray,
        b: np.ndarray | None = None,
        tol: float = 1e-10,
    ) -> "GeneralizedMetric":
        """Metric from a Riemannian g and 2-form b: C+ is the graph of b + g."""
        dim = geometry.dim
        g = np.asarray(g, dtype=float)
        if b is None:
            b = np.zeros((dim, dim))
        b = np.asarray(b, dtype=float)
        if g.shape != (dim, dim) or np.abs(g - g.T).max() > 0:
            raise MetricError("g must be a symmetric 2n x 2n matrix")
        if np.linalg.eigvalsh(g).min() <= 0:
            raise MetricError("g must be positive definite")
        if b.shape != (dim, dim) or np.abs(b + b.T).max() > 0:
            raise MetricError("b must be an antisymmetric 2n x 2n matrix")

        def graph_frame(form: np.ndarray) -> np.ndarray:
            cols = np.zeros((2 * dim, dim))
            for i in range(dim):
                cols[i, i] = 1.0
                cols[dim:, i] = form[i, :]
            return cols

        vplus = graph_frame(b + g)
        vminus = graph_frame(b - g)
        chol = np.linalg.cholesky(2 * g)
        inv = np.linalg.inv(chol)
        cplus = vplus @ inv.T
        cminus = vminus @ inv.T
        return cls(geometry, box, cplus, cminus, g=g, b=b, tol=tol)

    @classmethod
    def compatible_with(
        cls, structure: GCStructure, tol: float = 1e-10
    ) -> "GeneralizedMetric":
        """Canonical metric commuting with a given structure.

        Diagonalizes the Hermitian pairing h(x, y) = <x, conj y> on the +i
        eigenbundle; the positive part and its conjugate span C+.
        """
        geometry, box = structure.geometry, structure.box
        dim = geometry.dim
        q = natural_pairing_matrix(dim)
        fvals = np.column_stack([v.constant_values() for v in structure.frame])
        nmat = fvals.T @ q @ fvals.conj()
        vals, vecs = np.linalg.eigh(nmat)
        pos = [i for i, v in enumerate(vals) if v > 1e-12]
        neg = [i for i, v in enumerate(vals) if v < -1e-12]
        if len(pos) != dim // 2 or len(neg) != dim // 2:
            raise MetricError("pairing on the eigenbundle is not split (n, n)")

        def real_frame(indices: List[int]) -> np.ndarray:
            cols = []
            for i in indices:
                scale = math.sqrt(abs(vals[i]))
                p = (fvals @ vecs[:, i].conj()) / scale
                pivot = np.argmax(np.abs(p))
                p = p * (abs(p[pivot]) / p[pivot])
                cols.append((p + p.conj()) / math.sqrt(2))
                cols.append((1j * p + (1j * p).conj()) / math.sqrt(2))
            return np.column_stack(cols)

        cplus = real_frame(pos)
        cminus = real_frame(neg)
        metric = cls(geometry, box, cplus, cminus, tol=tol)
        if metric.compatibility(structure) > 1e-9:
            raise MetricError("constructed metric does not commute with the structure")
        return metric

    # ------------------------------------------------------------------
    # operations
    # ------------------------------------------------------------------

    def compatibility(self, structure: GCStructure) -> float:
        j = np.asarray(structure.jmatrix, dtype=float)
        return float(np.abs(self.gmatrix @ j - j @ self.gmatrix).max())

    def hodge_star(self, sigma: Spinor) -> Spinor:
        """Hodge star as the Clifford word of the oriented C+ frame."""
        vectors = {}
        for mode in sigma.modes():
            vectors[mode] = self.star_matrix @ spinor_mode_vector(sigma, mode)
        return spinor_from_mode_vectors(self.geometry, self.box, vectors)

    def bi_inner(self, alpha: Spinor, beta: Spinor) -> complex:
        """Born-Infeld inner product, linear in alpha, conjugate-linear in beta."""
        modes = set(alpha.modes()) & set(beta.modes())
        total = 0.0 + 0.0j
        for mode in modes:
            va = spinor_mode_vector(alpha, mode)
            vb = spinor_mode_vector(beta, mode)
            total += va @ self.bi_gram @ vb.conj()
        return total

    def bi_norm(self, alpha: Spinor) -> float:
        val = self.bi_inner(alpha, alpha)
        return math.sqrt(max(val.real, 0.0))

    def unit_normalize(self, alpha: Spinor) -> Spinor:
        """Scale to unit Born-Infeld norm (phase untouched)."""
        norm = self.bi_norm(alpha)
        if norm == 0:
            raise MetricError("cannot normalize the zero spinor")
        return alpha.scale(1.0 / norm)

    def constant_inner(self, va: np.ndarray, vb: np.ndarray) -> complex:
        return va @ self.bi_gram @ vb.conj()

    def orthonormalize_columns(self, columns: np.ndarray) -> np.ndarray:
        """Replace the columns by a Born-Infeld-orthonormal basis of their span."""
        k = columns.shape[1]
        gram = np.zeros((k, k), dtype=complex)
        for i in range(k):
            for j in range(k):
                gram[i, j] = self.constant_inner(columns[:, i], columns[:, j])
        chol = np.linalg.cholesky((gram + gram.conj().T) / 2)
        # with gram[i,j] = inner(c_i, c_j) = (A^T gram conj(A))_ab for new
        # columns C A, A = inv(chol)^T makes the new Gram the identity
        return columns @ np.linalg.inv(chol).T

    def __repr__(self) -> str:
        return f"GeneralizedMetric(n={self.geometry.n}, vol={self.volume_factor:.6g})"
