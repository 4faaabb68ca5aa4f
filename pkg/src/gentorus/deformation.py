"""Deformation machinery: transport of spinors, holomorphy criterion,
power-series extension of closed forms, and the Hodge-number scan.

A deformation is a degree-2 polynomial over the dual frame (or a doubly
indexed family of them).  Its dual arises by conjugation; the pair shears
the eigenframes, transports the level grading, and turns holomorphy on the
deformed structure into a residual computable entirely on the undeformed
one.
"""

from __future__ import annotations

import itertools
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .calculus import (
    del_op,
    delbar_op,
    lie_derivation_dL,
    schouten_bracket,
)
from .fourier import FourierScalar
from .hodge import HodgeContext, ObstructionError
from .metric import GeneralizedMetric
from .spinor import (
    CliffordPoly,
    CourantVector,
    Spinor,
    clifford_act_many,
    constant_spinor_vector,
    pairing,
    spinor_from_mode_vectors,
    spinor_mode_vector,
)
from .structure import GCStructure

OrderKey = Tuple[int, int]


class DeformationError(ValueError):
    """Precondition failure in the deformation machinery."""


# ---------------------------------------------------------------------------
# matrices with FourierScalar entries
# ---------------------------------------------------------------------------


def _fs_zero_matrix(geometry, box, shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        out[idx] = FourierScalar.zero(geometry, box)
    return out


def _fs_identity(geometry, box, size) -> np.ndarray:
    out = _fs_zero_matrix(geometry, box, (size, size))
    for i in range(size):
        out[i, i] = FourierScalar.constant(geometry, box, 1.0)
    return out


def _fs_mat_mul(a: np.ndarray, b: np.ndarray, policy=None) -> np.ndarray:
    rows, inner = a.shape
    inner2, cols = b.shape
    assert inner == inner2
    sample = a[0, 0]
    out = _fs_zero_matrix(sample.geometry, sample.box, (rows, cols))
    for i in range(rows):
        for j in range(cols):
            acc = out[i, j]
            for k in range(inner):
                if a[i, k].is_zero() or b[k, j].is_zero():
                    continue
                acc = acc.add(a[i, k].mul(b[k, j], policy=policy))
            out[i, j] = acc
    return out


def _fs_mat_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty(a.shape, dtype=object)
    for idx in np.ndindex(*a.shape):
        out[idx] = a[idx].add(b[idx])
    return out


def _fs_mat_scale(a: np.ndarray, c) -> np.ndarray:
    out = np.empty(a.shape, dtype=object)
    for idx in np.ndindex(*a.shape):
        out[idx] = a[idx].scale(c)
    return out


def _fs_mat_norm(a: np.ndarray) -> float:
    return math.sqrt(sum(a[idx].norm() ** 2 for idx in np.ndindex(*a.shape)))


def _fs_mat_is_constant(a: np.ndarray) -> bool:
    zero_mode = (0,) * a[0, 0].geometry.dim
    for idx in np.ndindex(*a.shape):
        for mode in a[idx].support():
            if mode != zero_mode:
                return False
    return True


def _fs_mat_constant_values(a: np.ndarray) -> np.ndarray:
    zero_mode = (0,) * a[0, 0].geometry.dim
    out = np.zeros(a.shape, dtype=complex)
    for idx in np.ndindex(*a.shape):
        out[idx] = a[idx].coefficient(zero_mode)
    return out


def _fs_mat_from_constant(geometry, box, values: np.ndarray) -> np.ndarray:
    out = np.empty(values.shape, dtype=object)
    for idx in np.ndindex(*values.shape):
        out[idx] = FourierScalar.constant(geometry, box, values[idx])
    return out


def _fs_mat_neumann_inverse(
    a: np.ndarray, policy=None, rel_tol: float = 1e-14, max_terms: int = 200
) -> np.ndarray:
    """(1 - a)^{-1} by Neumann series; exact inversion on constant matrices."""
    sample = a[0, 0]
    geometry, box = sample.geometry, sample.box
    size = a.shape[0]
    if _fs_mat_is_constant(a):
        values = _fs_mat_constant_values(a)
        inv = np.linalg.inv(np.eye(size) - values)
        return _fs_mat_from_constant(geometry, box, inv)
    total = _fs_identity(geometry, box, size)
    term = _fs_identity(geometry, box, size)
    for _ in range(max_terms):
        term = _fs_mat_mul(term, a, policy=policy)
        tnorm = _fs_mat_norm(term)
        total = _fs_mat_add(total, term)
        if tnorm <= rel_tol * max(1.0, _fs_mat_norm(total)):
            return total
    raise DeformationError(
        "Neumann series for the frame inverse did not converge; "
        "deformation too large for this expansion"
    )


# ---------------------------------------------------------------------------
# deformation polynomials
# ---------------------------------------------------------------------------


class FrameMaps:
    """Matrix forms of a deformation and its conjugate on the frames.

    ``eps_matrix`` M satisfies eps(l_p) = sum_i M[i, p] l^i and
    ``eps_star_matrix`` N satisfies eps*(l^p) = sum_i N[i, p] l_i; the
    composite eps eps* acts on the dual frame by E = M N.
    """

    def __init__(self, structure: GCStructure, eps: CliffordPoly,
                 eps_star: CliffordPoly | None = None, policy=None):
        if eps.degree != 2 or eps.frame != structure.dual_frame:
            raise DeformationError("deformation must be a 2-polynomial over the dual frame")
        self.structure = structure
        self.eps = eps
        self.eps_star = eps_star if eps_star is not None else structure.conjugate_poly(eps)
        self.policy = policy
        dim = structure.dim
        geometry, box = structure.geometry, structure.box
        self.eps_matrix = _fs_zero_matrix(geometry, box, (dim, dim))
        self.eps_star_matrix = _fs_zero_matrix(geometry, box, (dim, dim))
        for i in range(dim):
            for p in range(dim):
                self.eps_matrix[i, p] = eps.coefficient((i, p))
                self.eps_star_matrix[i, p] = self.eps_star.coefficient((i, p))
        self.eps_eps_star = _fs_mat_mul(self.eps_matrix, self.eps_star_matrix, policy=policy)

    def sup_norm(self, points_per_axis: int | None = None) -> float:
        """Grid estimate of the sup over the torus of the 2-norm of eps."""
        structure = self.structure
        K = structure.box.K
        npts = points_per_axis or (4 * K + 1)
        axes = [np.linspace(0.0, 1.0, npts, endpoint=False)] * structure.dim
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        dim = structure.dim
        vals = np.zeros((pts.shape[0], dim, dim), dtype=complex)
        for i in range(dim):
            for p in range(dim):
                f = self.eps_matrix[i, p]
                if not f.is_zero():
                    vals[:, i, p] = f.evaluate(pts)
        return float(np.linalg.norm(vals, ord=2, axis=(1, 2)).max()) if pts.size else 0.0

    def dual_image(self, matrix: np.ndarray, into_frame: bool) -> List[CourantVector]:
        """Images of the dual frame under a matrix (into L when into_frame)."""
        structure = self.structure
        targets = structure.frame if into_frame else structure.dual_frame
        out = []
        for p in range(structure.dim):
            acc = CourantVector.zero(structure.geometry, structure.box)
            for i in range(structure.dim):
                f = matrix[i, p]
                if not f.is_zero():
                    acc = acc.add(targets[i].scale_scalar(f, policy=self.policy))
            out.append(acc)
        return out


class Beltrami:
    """Doubly indexed family eps_{ij} of deformation 2-polynomials.

    eps(t) = sum over i + j >= 1 of t^i conj(t)^j eps_ij.
    """

    def __init__(self, structure: GCStructure, coefficients: Dict[OrderKey, CliffordPoly]):
        self.structure = structure
        self.coefficients: Dict[OrderKey, CliffordPoly] = {}
        for key, poly in coefficients.items():
            key = (int(key[0]), int(key[1]))
            if key[0] + key[1] < 1:
                raise DeformationError("deformation coefficients start at order 1")
            if poly.degree != 2 or poly.frame != structure.dual_frame:
                raise DeformationError(
                    "every coefficient must be a 2-polynomial over the dual frame"
                )
            if not poly.is_zero():
                self.coefficients[key] = poly
        self.order = max((i + j for i, j in self.coefficients), default=0)

    def eps_at(self, t: complex) -> CliffordPoly:
        t = complex(t)
        out = CliffordPoly.zero(self.structure.dual_frame, 2)
        for (i, j), poly in self.coefficients.items():
            out = out.add(poly.scale((t ** i) * (t.conjugate() ** j)))
        return out

    def is_constant(self) -> bool:
        zero_mode = (0,) * self.structure.dim
        for poly in self.coefficients.values():
            for _, f in poly.terms():
                for mode in f.support():
                    if mode != zero_mode:
                        return False
        return True

    def orders(self) -> List[OrderKey]:
        return sorted(self.coefficients)


# ---------------------------------------------------------------------------
# the algebroid Hodge package (for Maurer-Cartan expansion)
# ---------------------------------------------------------------------------


class AlgebroidHodge:
    """Hodge package for the Lie algebroid differential on frame polynomials.

    Polynomials are identified with spinors through the canonical generator
    (P maps to P . rho0), the inner product pulled back from Born-Infeld,
    and the differential assembled mode by mode from the Cartan formula.
    """

    def __init__(self, structure: GCStructure, metric: GeneralizedMetric):
        self.structure = structure
        self.metric = metric
        geometry, box = structure.geometry, structure.box
        dim = structure.dim
        from .spinor import monomial_list

        self.keys = monomial_list(dim)
        self.index = {k: i for i, k in enumerate(self.keys)}
        self.size = len(self.keys)

        # Gram via the spinor identification, orthonormalized per degree
        level_cols = structure._level_matrix
        # structure keys are ordered by (level, subset); ours by (degree, subset):
        # the orderings coincide because level = degree - n.
        cols = []
        self.degree_slices: Dict[int, slice] = {}
        start = 0
        for d in range(dim + 1):
            block = [level_cols[:, structure._level_keys.index((d - structure.n, key))]
                     for key in itertools.combinations(range(dim), d)]
            block = np.column_stack(block)
            cols.append(metric.orthonormalize_columns(block))
            count = block.shape[1]
            self.degree_slices[d] = slice(start, start + count)
            start += count
        spinor_basis = np.hstack(cols)
        # express the orthonormal spinor basis back in poly coordinates
        self.poly_basis = np.linalg.solve(level_cols, spinor_basis)
        self.poly_basis_inv = np.linalg.inv(self.poly_basis)

        self.modes = list(box.modes(geometry))
        self._eigs: Dict[Tuple, Tuple[np.ndarray, np.ndarray]] = {}
        self._dmats: Dict[Tuple, np.ndarray] = {}
        for mode in self.modes:
            dmat = np.zeros((self.size, self.size), dtype=complex)
            phase = FourierScalar.mode(geometry, box, mode)
            for j, key in enumerate(self.keys):
                poly = CliffordPoly(structure.dual_frame, len(key), {key: phase})
                image = lie_derivation_dL(poly, structure)
                col = np.zeros(self.size, dtype=complex)
                for ikey, f in image.terms():
                    col[self.index[ikey]] = f.coefficient(mode)
                dmat[:, j] = col
            dmat = self.poly_basis_inv @ dmat @ self.poly_basis
            self._dmats[mode] = dmat
            lap = dmat @ dmat.conj().T + dmat.conj().T @ dmat
            lap = (lap + lap.conj().T) / 2
            self._eigs[mode] = np.linalg.eigh(lap)
        radius = max(float(v.max()) if v.size else 0.0 for v, _ in self._eigs.values())
        self.cutoff = 1e-9 * radius if radius > 0 else 1e-12

    # poly <-> per-mode coordinate vectors ------------------------------

    def coords_of(self, poly: CliffordPoly) -> Dict[Tuple[int, ...], np.ndarray]:
        per_mode: Dict[Tuple[int, ...], np.ndarray] = {}
        for key, f in poly.terms():
            row = self.index[key]
            for mode, c in f.coeffs.items():
                per_mode.setdefault(mode, np.zeros(self.size, dtype=complex))[row] += c
        return {m: self.poly_basis_inv @ v for m, v in per_mode.items()}

    def poly_from_coords(self, vectors: Dict[Tuple[int, ...], np.ndarray],
                         degree: int) -> CliffordPoly:
        geometry, box = self.structure.geometry, self.structure.box
        per_key: Dict[Tuple[int, ...], Dict] = {}
        for mode, v in vectors.items():
            raw = self.poly_basis @ v
            for row, c in enumerate(raw):
                if c != 0 and len(self.keys[row]) == degree:
                    per_key.setdefault(self.keys[row], {})[mode] = (
                        per_key.get(self.keys[row], {}).get(mode, 0.0) + c
                    )
        coeffs = {k: FourierScalar(geometry, box, cs) for k, cs in per_key.items()}
        return CliffordPoly(self.structure.dual_frame, degree, coeffs)

    def _spectral(self, poly: CliffordPoly, degree_out: int, fn) -> CliffordPoly:
        vectors = {}
        for mode, coords in self.coords_of(poly).items():
            vals, vecs = self._eigs[mode]
            amps = vecs.conj().T @ coords
            vectors[mode] = vecs @ (fn(vals) * amps)
        return self.poly_from_coords(vectors, degree_out)

    def harmonic(self, poly: CliffordPoly) -> CliffordPoly:
        return self._spectral(poly, poly.degree, lambda v: (v <= self.cutoff).astype(float))

    def green(self, poly: CliffordPoly) -> CliffordPoly:
        return self._spectral(
            poly, poly.degree,
            lambda v: np.where(v > self.cutoff, 1.0 / np.where(v > self.cutoff, v, 1.0), 0.0),
        )

    def dL_adjoint(self, poly: CliffordPoly) -> CliffordPoly:
        vectors = {}
        for mode, coords in self.coords_of(poly).items():
            vectors[mode] = self._dmats[mode].conj().T @ coords
        return self.poly_from_coords(vectors, poly.degree - 1)


def maurer_cartan_verify(series: Beltrami, tol: float = 1e-9) -> Dict:
    """Order-by-order Maurer-Cartan residuals d_L eps = (1/2)[eps, eps]."""
    s = series.structure
    residuals: Dict[str, float] = {}
    worst = 0.0
    closed_defect = 0.0
    for (i, j), poly in sorted(series.coefficients.items()):
        lhs = lie_derivation_dL(poly, s)
        rhs = CliffordPoly.zero(s.dual_frame, 3)
        for (a, b), pa in series.coefficients.items():
            c, d = i - a, j - b
            if (c, d) in series.coefficients and c + d >= 1:
                rhs = rhs.add(schouten_bracket(pa, series.coefficients[(c, d)], s))
        resid = lhs.add(rhs.scale(-0.5)).norm()
        scale = max(1.0, poly.norm())
        residuals[f"{i},{j}"] = resid / scale
        worst = max(worst, resid / scale)
        if i + j == 1:
            closed_defect = max(closed_defect, lhs.norm() / scale)
    return {
        "residuals": residuals,
        "worst": worst,
        "first_order_closed": closed_defect,
        "integrable": worst <= tol,
    }


def maurer_cartan_expand(
    structure: GCStructure,
    metric: GeneralizedMetric,
    first_order: Dict[OrderKey, CliffordPoly],
    order: int,
    tol: float = 1e-9,
) -> Beltrami:
    """Complete first-order data to a Maurer-Cartan series by the standard
    recursion eps_m = (1/2) d_L^* G [eps, eps]_m.

    Raises ObstructionError when a bracket sum has a harmonic component
    (genuine deformation obstruction).
    """
    for key, poly in first_order.items():
        if key not in ((1, 0), (0, 1)):
            raise DeformationError("first-order data must sit at orders (1,0), (0,1)")
        defect = lie_derivation_dL(poly, structure).norm()
        if defect > tol * max(1.0, poly.norm()):
            raise ObstructionError(
                "first-order coefficient is not d_L-closed",
                {"residual": defect},
            )
    hodge = AlgebroidHodge(structure, metric)
    coeffs: Dict[OrderKey, CliffordPoly] = dict(first_order)
    for total in range(2, order + 1):
        for i in range(total + 1):
            j = total - i
            rhs = CliffordPoly.zero(structure.dual_frame, 3)
            for (a, b) in list(coeffs):
                c, d = i - a, j - b
                if (c, d) in coeffs and c + d >= 1 and a + b >= 1:
                    # recursion products must stay exact on the truncation
                    rhs = rhs.add(
                        schouten_bracket(
                            coeffs[(a, b)], coeffs[(c, d)], structure, policy="strict"
                        )
                    )
            rhs = rhs.scale(0.5)
            if rhs.is_zero(1e-16):
                continue
            harm = hodge.harmonic(rhs).norm()
            if harm > tol * max(1.0, rhs.norm()):
                raise ObstructionError(
                    f"Kuranishi obstruction at order ({i},{j})",
                    {"harmonic_norm": harm, "order": f"{i},{j}"},
                )
            sol = hodge.dL_adjoint(hodge.green(rhs))
            resid = lie_derivation_dL(sol, structure).add(rhs.scale(-1)).norm()
            if resid > tol * max(1.0, rhs.norm()):
                raise ObstructionError(
                    f"d_L solve failed at order ({i},{j})",
                    {"residual": resid, "order": f"{i},{j}"},
                )
            if not sol.is_zero(1e-16):
                coeffs[(i, j)] = sol
    return Beltrami(structure, coeffs)


# ---------------------------------------------------------------------------
# transport of spinors
# ---------------------------------------------------------------------------


class Transport:
    """The deformation transport: frame substitution plus exponential action.

    Forward: sigma = sum c_I l^{i_1}..l^{i_k} . rho0 maps to
    sum c_I (1+eps*)(l^{i_1}) .. (1+eps*)(l^{i_k}) . (exp(eps) . rho0).
    """

    def __init__(self, structure: GCStructure, eps: CliffordPoly, policy=None):
        self.structure = structure
        self.eps = eps
        self.maps = FrameMaps(structure, eps, policy=policy)
        self.policy = policy
        self.exp_rho0 = self.exp_act(structure.rho0)
        self._constant = _fs_mat_is_constant(self.maps.eps_matrix) and _fs_mat_is_constant(
            self.maps.eps_star_matrix
        )
        self._forward_matrix = None
        self._forward_inverse = None

    # -- exponential Clifford action ------------------------------------

    def exp_act(self, sigma: Spinor, sign: float = 1.0) -> Spinor:
        """exp(eps) . sigma; the sum is finite since each action raises the
        level by two."""
        out = sigma
        term = sigma
        for i in range(1, self.structure.dim + 2):
            term = self.eps.act(term, policy=self.policy).scale(sign / i)
            if term.is_zero(0.0):
                break
            out = out.add(term)
        return out

    # -- frame coefficient extraction ------------------------------------

    def frame_coefficients(self, sigma: Spinor) -> Dict[Tuple[int, ...], FourierScalar]:
        """FourierScalar coefficients of sigma in the dual-frame word basis."""
        coords = self.structure.frame_coordinates(sigma)
        geometry, box = self.structure.geometry, self.structure.box
        per_key: Dict[Tuple[int, ...], Dict] = {}
        for mode, vec in coords.items():
            for col, c in enumerate(vec):
                if c != 0:
                    _, key = self.structure._level_keys[col]
                    per_key.setdefault(key, {})[mode] = per_key.get(key, {}).get(mode, 0.0) + c
        return {k: FourierScalar(geometry, box, cs) for k, cs in per_key.items()}

    def substituted_word(
        self, key: Tuple[int, ...], images: Sequence[CourantVector], vacuum: Spinor
    ) -> Spinor:
        return clifford_act_many([images[i] for i in key], vacuum, policy=self.policy)

    # -- the transport and its inverse -----------------------------------

    def forward(self, sigma: Spinor) -> Spinor:
        one_plus = self._one_plus_eps_star_images()
        if self._constant:
            mat = self._forward_matrix_constant()
            vectors = {}
            for mode, coords in self.structure.frame_coordinates(sigma).items():
                vectors[mode] = mat @ coords
            return spinor_from_mode_vectors(self.structure.geometry, self.structure.box, vectors)
        out = Spinor.zero(self.structure.geometry, self.structure.box)
        for key, coeff in self.frame_coefficients(sigma).items():
            word = self.substituted_word(key, one_plus, self.exp_rho0)
            out = out.add(word.scale_scalar(coeff, policy=self.policy))
        return out

    def inverse(self, sigma: Spinor) -> Spinor:
        if not self._constant:
            raise DeformationError(
                "transport inverse requires a constant-coefficient deformation"
            )
        inv = self._forward_inverse_constant()
        vectors = {}
        for mode in sigma.modes():
            vec = spinor_mode_vector(sigma, mode)
            vectors[mode] = self.structure._level_matrix @ (inv @ vec)
        return spinor_from_mode_vectors(self.structure.geometry, self.structure.box, vectors)

    def _forward_matrix_constant(self) -> np.ndarray:
        if self._forward_matrix is None:
            one_plus = self._one_plus_eps_star_images()
            size = 2 ** self.structure.dim
            cols = np.zeros((size, size), dtype=complex)
            for col, (_, key) in enumerate(self.structure._level_keys):
                word = self.substituted_word(key, one_plus, self.exp_rho0)
                cols[:, col] = constant_spinor_vector(word)
            self._forward_matrix = cols
        return self._forward_matrix

    def _forward_inverse_constant(self) -> np.ndarray:
        if self._forward_inverse is None:
            self._forward_inverse = np.linalg.inv(self._forward_matrix_constant())
        return self._forward_inverse

    # -- frame endomorphism images ---------------------------------------

    def _one_plus_eps_star_images(self) -> List[CourantVector]:
        star_images = self.maps.dual_image(self.maps.eps_star_matrix, into_frame=True)
        return [
            self.structure.dual_frame[i].add(star_images[i])
            for i in range(self.structure.dim)
        ]

    def factorwise(
        self, images: Sequence[CourantVector], sigma: Spinor
    ) -> Spinor:
        """Apply a frame endomorphism to every Clifford factor, vacuum fixed."""
        out = Spinor.zero(self.structure.geometry, self.structure.box)
        for key, coeff in self.frame_coefficients(sigma).items():
            word = self.substituted_word(key, images, self.structure.rho0)
            out = out.add(word.scale_scalar(coeff, policy=self.policy))
        return out

    def images_one_minus_epseps(self) -> List[CourantVector]:
        dim = self.structure.dim
        ident = _fs_identity(self.structure.geometry, self.structure.box, dim)
        mat = _fs_mat_add(ident, _fs_mat_scale(self.maps.eps_eps_star, -1))
        return self.maps.dual_image(mat, into_frame=False)

    def images_inverse_one_minus_epseps(self) -> List[CourantVector]:
        inv = _fs_mat_neumann_inverse(self.maps.eps_eps_star, policy=self.policy)
        return self.maps.dual_image(inv, into_frame=False)

    def images_one_plus_star_minus_epseps(self) -> List[CourantVector]:
        plus = self._one_plus_eps_star_images()
        minus = self.maps.dual_image(self.maps.eps_eps_star, into_frame=False)
        return [plus[i].add(minus[i].scale(-1)) for i in range(self.structure.dim)]

    def images_inverse_combo(self) -> List[CourantVector]:
        """(-eps* (1 - eps eps*)^{-1} + (1 - eps eps*)^{-1}) on the dual frame."""
        inv = _fs_mat_neumann_inverse(self.maps.eps_eps_star, policy=self.policy)
        plain = self.maps.dual_image(inv, into_frame=False)
        starred = self.maps.dual_image(
            _fs_mat_mul(self.maps.eps_star_matrix, inv, policy=self.policy), into_frame=True
        )
        return [plain[i].add(starred[i].scale(-1)) for i in range(self.structure.dim)]

    def sup_norm(self) -> float:
        return self.maps.sup_norm()


# ---------------------------------------------------------------------------
# frame block matrices
# ---------------------------------------------------------------------------


def frame_block_matrices(
    structure: GCStructure, eps: CliffordPoly, policy=None
) -> Dict:
    """Pairing blocks of the deformed frames, their closed-form inverse, and
    residuals.

    Builds xi_i = (1+eps)(l_i), the normalized duals xi^i, assembles the
    4n x 4n pairing block matrix, inverts it by the triangular-factor closed
    form in [eps], [eps*], and reports the residual against the identity.
    """
    maps = FrameMaps(structure, eps, policy=policy)
    sup = maps.sup_norm()
    if sup >= 1.0:
        raise DeformationError(
            f"deformation sup-norm {sup:.3f} >= 1; frame expansion invalid"
        )
    dim = structure.dim
    geometry, box = structure.geometry, structure.box

    frame_images = maps.dual_image(maps.eps_matrix, into_frame=False)
    xi = [structure.frame[i].add(frame_images[i]) for i in range(dim)]
    star_images = maps.dual_image(maps.eps_star_matrix, into_frame=True)
    eta_raw = [structure.dual_frame[i].add(star_images[i]) for i in range(dim)]

    # normalize the dual frame: xi^i = sum_j N[i, j] eta_raw^j
    pmat = _fs_zero_matrix(geometry, box, (dim, dim))
    for i in range(dim):
        for j in range(dim):
            pmat[i, j] = pairing(eta_raw[i], xi[j], policy=policy)
    ident = _fs_identity(geometry, box, dim)
    defect = _fs_mat_add(pmat, _fs_mat_scale(ident, -1))
    nmat = _fs_mat_neumann_inverse(_fs_mat_scale(defect, -1), policy=policy)
    xi_dual = []
    for i in range(dim):
        acc = CourantVector.zero(geometry, box)
        for j in range(dim):
            if not nmat[i, j].is_zero():
                acc = acc.add(eta_raw[j].scale_scalar(nmat[i, j], policy=policy))
        xi_dual.append(acc)

    dual_residual = 0.0
    for i in range(dim):
        for j in range(dim):
            val = pairing(xi_dual[i], xi[j], policy=policy)
            want = 1.0 if i == j else 0.0
            dual_residual = max(dual_residual, val.add(
                FourierScalar.constant(geometry, box, -want)).norm())

    def pair_block(rows: Sequence[CourantVector], against_dual: bool) -> np.ndarray:
        block = _fs_zero_matrix(geometry, box, (dim, dim))
        basis = structure.dual_frame if against_dual else structure.frame
        for i in range(dim):
            for j in range(dim):
                block[i, j] = pairing(basis[j], rows[i], policy=policy)
        return block

    # forward block matrix in the arrangement [[L(Xi*), L*(Xi*)], [L(Xi), L*(Xi)]]
    top_left = pair_block(xi_dual, against_dual=False)
    top_right = pair_block(xi_dual, against_dual=True)
    bot_left = pair_block(xi, against_dual=False)
    bot_right = pair_block(xi, against_dual=True)

    def stack_blocks(tl, tr, bl, br):
        out = _fs_zero_matrix(geometry, box, (2 * dim, 2 * dim))
        out[:dim, :dim] = tl
        out[:dim, dim:] = tr
        out[dim:, :dim] = bl
        out[dim:, dim:] = br
        return out

    forward = stack_blocks(top_left, top_right, bot_left, bot_right)

    # [eps] and [eps*] recovered from the pairings (Formulas 2.4 / 2.5 shape)
    inv_bot_right = _fs_mat_neumann_inverse(
        _fs_mat_add(ident, _fs_mat_scale(bot_right, -1)), policy=policy
    ) if not _fs_mat_is_constant(bot_right) else None
    if inv_bot_right is None:
        inv_br = _fs_mat_from_constant(
            geometry, box, np.linalg.inv(_fs_mat_constant_values(bot_right))
        )
    else:
        inv_br = inv_bot_right
    eps_rec = _fs_mat_mul(inv_br, bot_left, policy=policy)
    if _fs_mat_is_constant(top_left):
        inv_tl = _fs_mat_from_constant(
            geometry, box, np.linalg.inv(_fs_mat_constant_values(top_left))
        )
    else:
        inv_tl = _fs_mat_neumann_inverse(
            _fs_mat_scale(_fs_mat_add(top_left, _fs_mat_scale(ident, -1)), -1),
            policy=policy,
        )
    eps_star_rec = _fs_mat_mul(inv_tl, top_right, policy=policy)

    # coefficient-matrix consistency: [eps]_{kj} = eps_{jk}
    conv_residual = 0.0
    for k in range(dim):
        for j in range(dim):
            conv_residual = max(
                conv_residual,
                eps_rec[k, j].add(eps.coefficient((j, k)).scale(-1)).norm(),
            )

    # closed-form inverse
    e_mat = eps_rec
    es_mat = eps_star_rec
    inv_one_minus_se = _fs_mat_neumann_inverse(
        _fs_mat_mul(es_mat, e_mat, policy=policy), policy=policy
    )
    inv_one_minus_es = _fs_mat_neumann_inverse(
        _fs_mat_mul(e_mat, es_mat, policy=policy), policy=policy
    )
    tl_inv = _fs_mat_mul(inv_one_minus_se, inv_tl, policy=policy)
    tr_inv = _fs_mat_scale(
        _fs_mat_mul(es_mat, _fs_mat_mul(inv_one_minus_es, inv_br, policy=policy),
                    policy=policy),
        -1,
    )
    bl_inv = _fs_mat_scale(
        _fs_mat_mul(inv_one_minus_es, _fs_mat_mul(e_mat, inv_tl, policy=policy),
                    policy=policy),
        -1,
    )
    br_inv = _fs_mat_mul(inv_one_minus_es, inv_br, policy=policy)
    closed_inverse = stack_blocks(tl_inv, tr_inv, bl_inv, br_inv)

    product = _fs_mat_mul(forward, closed_inverse, policy=policy)
    resid_mat = _fs_mat_add(product, _fs_mat_scale(_fs_identity(geometry, box, 2 * dim), -1))
    inverse_residual = _fs_mat_norm(resid_mat)

    # swap identity: (1 - [eps][eps*])^{-1} [eps] = [eps](1 - [eps*][eps])^{-1}
    lhs = _fs_mat_mul(inv_one_minus_es, e_mat, policy=policy)
    rhs = _fs_mat_mul(e_mat, inv_one_minus_se, policy=policy)
    swap_residual = _fs_mat_norm(_fs_mat_add(lhs, _fs_mat_scale(rhs, -1)))

    return {
        "frames": xi,
        "dual_frames": xi_dual,
        "forward": forward,
        "inverse": closed_inverse,
        "eps_matrix": eps_rec,
        "eps_star_matrix": eps_star_rec,
        "sup_norm": sup,
        "residuals": {
            "duality": dual_residual,
            "inverse": inverse_residual,
            "coefficient_convention": conv_residual,
            "swap_identity": swap_residual,
        },
    }


# ---------------------------------------------------------------------------
# deformed structures (constant deformations)
# ---------------------------------------------------------------------------


class DeformedStructure:
    """The generalized complex structure sheared by a constant deformation.

    Frames are (1+eps)(l_i) with pairing-normalized duals inside the
    conjugate span; the canonical generator is exp(eps) . rho0 up to
    normalization (cross-checked).  Carries its own compatible metric and
    Hodge context for the deformed side.
    """

    def __init__(self, structure: GCStructure, eps: CliffordPoly, tol: float = 1e-9):
        maps = FrameMaps(structure, eps)
        if not (_fs_mat_is_constant(maps.eps_matrix)
                and _fs_mat_is_constant(maps.eps_star_matrix)):
            raise DeformationError("deformed structures require constant deformations")
        self.base = structure
        self.eps = eps
        self.transport = Transport(structure, eps)
        sup = maps.sup_norm()
        if sup >= 1.0:
            raise DeformationError(f"deformation sup-norm {sup:.3f} >= 1")

        geometry, box = structure.geometry, structure.box
        dim = structure.dim
        frame_images = maps.dual_image(maps.eps_matrix, into_frame=False)
        xi_vals = np.column_stack(
            [
                structure.frame[i].add(frame_images[i]).constant_values()
                for i in range(dim)
            ]
        )
        from .structure import natural_pairing_matrix

        q = natural_pairing_matrix(dim)
        conj_vals = xi_vals.conj()
        p = conj_vals.T @ q @ xi_vals
        pinv = np.linalg.inv(p)
        dual_vals = conj_vals @ pinv.T

        frame = [
            CourantVector.constant(geometry, box, xi_vals[:dim, i], xi_vals[dim:, i])
            for i in range(dim)
        ]
        dual = [
            CourantVector.constant(geometry, box, dual_vals[:dim, i], dual_vals[dim:, i])
            for i in range(dim)
        ]
        self.structure = GCStructure(
            geometry, box, frame, dual, twist=structure.twist,
            label=f"{structure.label}+eps", tol=1e-9,
        )

        # the canonical generator must be proportional to exp(eps) . rho0
        target = constant_spinor_vector(self.transport.exp_rho0)
        got = constant_spinor_vector(self.structure.rho0)
        pivot = np.argmax(np.abs(target))
        ratio = target[pivot] / got[pivot]
        self.canonical_residual = float(np.abs(target - ratio * got).max())
        if self.canonical_residual > tol * max(1.0, np.abs(target).max()):
            raise DeformationError(
                f"deformed canonical generator mismatch ({self.canonical_residual:.3e})"
            )
        self.metric = GeneralizedMetric.compatible_with(self.structure)
        self._context: HodgeContext | None = None

    @property
    def context(self) -> HodgeContext:
        if self._context is None:
            self._context = HodgeContext(self.structure, self.metric)
        return self._context

    def delbar(self, sigma: Spinor) -> Spinor:
        """Level-raising component of d_H in the deformed grading."""
        return delbar_op(sigma, self.structure)

    def del_lower(self, sigma: Spinor) -> Spinor:
        return del_op(sigma, self.structure)


def deformed_delbar(
    structure: GCStructure, eps: CliffordPoly, sigma: Spinor
) -> Spinor:
    """Convenience: build the deformed structure and apply its raising part."""
    return DeformedStructure(structure, eps).delbar(sigma)


# ---------------------------------------------------------------------------
# the holomorphy criterion
# ---------------------------------------------------------------------------


def bracket_del_action(
    structure: GCStructure, eps: CliffordPoly, sigma: Spinor, policy=None
) -> Spinor:
    """[del, eps .] sigma = del(eps . sigma) - eps . (del sigma)."""
    return del_op(eps.act(sigma, policy=policy), structure, policy=policy).add(
        eps.act(del_op(sigma, structure, policy=policy), policy=policy).scale(-1)
    )


def criterion_rhs(
    structure: GCStructure, eps: CliffordPoly, sigma: Spinor, policy=None
) -> Spinor:
    """(delbar + [del, eps .]) (1 - eps eps*)(sigma)."""
    transport = Transport(structure, eps, policy=policy)
    dressed = transport.factorwise(transport.images_one_minus_epseps(), sigma)
    return delbar_op(dressed, structure, policy=policy).add(
        bracket_del_action(structure, eps, dressed, policy=policy)
    )


def holomorphy_residuals(
    structure: GCStructure,
    eps: CliffordPoly,
    sigma: Spinor,
    policy=None,
    deformed: DeformedStructure | None = None,
) -> Dict[str, float]:
    """Both sides of the holomorphy criterion plus the proof identity.

    rhs: the undeformed-side expression; lhs (constant deformations only):
    the raising part of d on the transported spinor, computed on the
    deformed structure; identity: their exact relation through the
    transport of the Neumann-dressed rhs.
    """
    transport = Transport(structure, eps, policy=policy)
    maps = transport.maps
    out: Dict[str, float] = {}
    rhs = criterion_rhs(structure, eps, sigma, policy=policy)
    out["rhs_residual"] = rhs.norm()

    constant = _fs_mat_is_constant(maps.eps_matrix) and _fs_mat_is_constant(
        maps.eps_star_matrix
    )
    if constant:
        ds = deformed if deformed is not None else DeformedStructure(structure, eps)
        transported = transport.forward(sigma)
        lhs = ds.delbar(transported)
        out["lhs_residual"] = lhs.norm()
        undone = transport.factorwise(transport.images_inverse_one_minus_epseps(), rhs)
        identity = lhs.add(transport.forward(undone).scale(-1))
        out["proof_identity_residual"] = identity.norm()
        out["scale"] = max(1.0, lhs.norm(), rhs.norm())
    else:
        out["scale"] = max(1.0, rhs.norm())
    return out


# ---------------------------------------------------------------------------
# power-series extension of dbar-closed forms
# ---------------------------------------------------------------------------


class ExtensionSeries:
    """Solution data of the order-by-order extension equations.

    ``coefficients`` are the dressed series terms; ``residuals`` record the
    two defining equations per order; ``majorant`` carries the comparison
    series diagnostic (beta, gamma, radius estimate).
    """

    def __init__(
        self,
        series: Beltrami,
        level: int,
        coefficients: Dict[OrderKey, Spinor],
        residuals: Dict[str, Dict[str, float]],
        variant: str,
        majorant: Dict,
        class_checks: Dict,
    ):
        self.series = series
        self.level = level
        self.coefficients = coefficients
        self.residuals = residuals
        self.variant = variant
        self.majorant = majorant
        self.class_checks = class_checks

    def dressed_at(self, t: complex) -> Spinor:
        """sum over orders of t^p conj(t)^q sigma~_pq."""
        t = complex(t)
        sample = next(iter(self.coefficients.values()))
        out = Spinor.zero(sample.geometry, sample.box)
        for (p, q), sig in self.coefficients.items():
            out = out.add(sig.scale((t ** p) * (t.conjugate() ** q)))
        return out

    def undressed_at(self, t: complex, policy=None) -> Spinor:
        """sigma_t = (1 - eps eps*)^{-1} (dressed), materialized at numeric t."""
        eps_t = self.series.eps_at(t)
        transport = Transport(self.series.structure, eps_t, policy=policy)
        return transport.factorwise(
            transport.images_inverse_one_minus_epseps(), self.dressed_at(t)
        )

    def criterion_residual_at(self, t: complex, policy=None) -> float:
        """Norm of (delbar + [del, eps(t) .]) applied to the dressed value."""
        eps_t = self.series.eps_at(t)
        structure = self.series.structure
        value = self.dressed_at(t)
        resid = delbar_op(value, structure, policy=policy).add(
            bracket_del_action(structure, eps_t, value, policy=policy)
        )
        return resid.norm()


def _majorant_diagnostic(
    coefficients: Dict[OrderKey, Spinor], series: Beltrami
) -> Dict:
    """Comparison-series constants measured from the computed norms.

    beta matches 16 (|sigma~_10| + |sigma~_01|); gamma = K beta with K the
    worst measured ratio of an order's output norm to its driving bilinear
    sum; the series converges for |t| < 1/gamma.
    """
    order_norms: Dict[int, float] = {}
    for (p, q), sig in coefficients.items():
        order_norms[p + q] = order_norms.get(p + q, 0.0) + sig.norm()
    eps_norms: Dict[int, float] = {}
    for (i, j), poly in series.coefficients.items():
        eps_norms[i + j] = eps_norms.get(i + j, 0.0) + poly.norm()
    beta = 16.0 * order_norms.get(1, 0.0)
    kmax = 0.0
    top = max(order_norms, default=0)
    for m in range(2, top + 1):
        driving = 0.0
        for a in range(1, m + 1):
            driving += eps_norms.get(a, 0.0) * order_norms.get(m - a, 0.0)
        if driving > 0 and m in order_norms:
            kmax = max(kmax, order_norms[m] / driving)
    gamma = kmax * beta
    coeff_check = True
    if gamma > 0:
        a_coeff = [0.0] + [
            beta / (16.0 * gamma) * gamma ** m / m ** 2 for m in range(1, top + 2)
        ]
        for m in range(1, min(top + 1, len(a_coeff))):
            square = sum(
                a_coeff[i] * a_coeff[m - i] for i in range(1, m)
            )
            if square > (beta / gamma) * a_coeff[m] + 1e-12:
                coeff_check = False
    return {
        "beta": beta,
        "gamma": gamma,
        "radius_estimate": math.inf if gamma == 0 else 1.0 / gamma,
        "square_domination": coeff_check,
    }


def extend_closed_form(
    context: HodgeContext,
    series: Beltrami,
    sigma00: Spinor,
    order: int,
    variant: str = "standard",
    tol: float = 1e-9,
) -> ExtensionSeries:
    """Extend a harmonic dbar-class order by order along the deformation.

    standard: solve del sigma~ = 0 and dbar sigma~_pq = -sum del(eps . sigma~)
    by the minimal dbar solve plus the double-operator correction;
    h_vanishing: solve the single equation with the extra eps . del sigma~
    terms (solvable when the raising cohomology above the level vanishes;
    the harmonic obstruction is checked per order either way).
    """
    if variant not in ("standard", "h_vanishing"):
        raise DeformationError(f"unknown variant {variant!r}")
    structure = context.structure
    if structure is not series.structure:
        raise DeformationError("series and context structures differ")
    level = structure.level_of(sigma00)
    pk = context.package("dbar")
    harm_defect = (pk.harmonic(sigma00) - sigma00).norm()
    if harm_defect > tol * max(1.0, sigma00.norm()):
        raise ObstructionError(
            "seed is not harmonic for the raising Laplacian",
            {"defect": harm_defect},
        )
    mc = maurer_cartan_verify(series, tol=tol)
    if not mc["integrable"]:
        raise ObstructionError(
            "deformation series fails the Maurer-Cartan equation",
            {"worst_residual": mc["worst"]},
        )

    class_checks: Dict[str, Dict] = {}
    if variant == "standard":
        class_checks["B_lower"] = context.class_check("B_k", level - 1) if level - 1 >= -structure.n else {"holds": True, "kind": "B_k", "level": level - 1, "dims": {}}
        class_checks["S_upper"] = context.class_check("S_k", level + 1) if level + 1 <= structure.n else {"holds": True, "kind": "S_k", "level": level + 1, "dims": {}}
        for name, check in class_checks.items():
            if not check["holds"]:
                raise ObstructionError(
                    f"class condition {name} fails at level {check['level']}",
                    {"check": name},
                )
    else:
        hdim = pk.kernel_dimension(level + 1) if level + 1 <= structure.n else 0
        class_checks["h_upper"] = {
            "kind": "h_vanishing",
            "level": level + 1,
            "dims": {"harmonic": hdim},
            "holds": hdim == 0,
        }
        # a nonzero harmonic space above the level is not fatal: the per-order
        # harmonic obstruction check below is the sharp condition

    coeffs: Dict[OrderKey, Spinor] = {}
    residuals: Dict[str, Dict[str, float]] = {}
    gamma0, _ = context.d_closed_representative(sigma00, tol=tol)
    coeffs[(0, 0)] = gamma0
    residuals["0,0"] = {
        "lowering": context.apply("del", gamma0).norm(),
        "equation": context.apply("dbar", gamma0).norm(),
        "scale": max(1.0, gamma0.norm()),
    }

    def driving_sum(p: int, q: int) -> Spinor:
        # solver products are exact on the truncation: escapes are errors,
        # never silently dropped content
        acc = Spinor.zero(structure.geometry, structure.box)
        for (i, k), epspoly in series.coefficients.items():
            j, l = p - i, q - k
            if (j, l) in coeffs:
                acc = acc.add(epspoly.act(coeffs[(j, l)], policy="strict"))
        return acc

    for total in range(1, order + 1):
        for p in range(total + 1):
            q = total - p
            y = driving_sum(p, q)
            if variant == "standard":
                rhs = context.apply("del", y).scale(-1)
                scale = max(1.0, rhs.norm(), gamma0.norm())
                harm = pk.harmonic(rhs).norm()
                if harm > tol * scale:
                    raise ObstructionError(
                        f"extension obstruction at order ({p},{q})",
                        {"harmonic_norm": harm, "order": f"{p},{q}", "scale": scale},
                    )
                if rhs.norm() <= 1e-15 * scale:
                    sig = Spinor.zero(structure.geometry, structure.box)
                else:
                    first = context.apply("dbar_adj", pk.green(rhs))
                    del_first = context.apply("del", first)
                    if del_first.norm() > 1e-15 * scale:
                        correction = context.apply(
                            "deldbar_adj", context.package("bc").green(del_first)
                        ).scale(-1)
                        sig = first.add(context.apply("dbar", correction))
                    else:
                        sig = first
                eq_res = (context.apply("dbar", sig) - rhs).norm()
                low_res = context.apply("del", sig).norm()
            else:
                tau = context.apply("del", y).scale(-1)
                for (i, k), epspoly in series.coefficients.items():
                    j, l = p - i, q - k
                    if (j, l) in coeffs:
                        tau = tau.add(
                            epspoly.act(context.apply("del", coeffs[(j, l)]), policy="strict")
                        )
                scale = max(1.0, tau.norm(), gamma0.norm())
                closed = context.apply("dbar", tau).norm()
                harm = pk.harmonic(tau).norm()
                if closed > tol * scale or harm > tol * scale:
                    raise ObstructionError(
                        f"extension obstruction at order ({p},{q})",
                        {
                            "harmonic_norm": harm,
                            "dbar_closed_residual": closed,
                            "order": f"{p},{q}",
                        },
                    )
                if tau.norm() <= 1e-15 * scale:
                    sig = Spinor.zero(structure.geometry, structure.box)
                else:
                    sig = context.apply("dbar_adj", pk.green(tau))
                eq_res = (context.apply("dbar", sig) - tau).norm()
                low_res = float("nan")
            if eq_res > tol * scale:
                raise ObstructionError(
                    f"order ({p},{q}) solve failed",
                    {"equation_residual": eq_res, "order": f"{p},{q}"},
                )
            if not sig.is_zero(0.0):
                coeffs[(p, q)] = sig
            residuals[f"{p},{q}"] = {
                "equation": eq_res,
                "lowering": low_res,
                "scale": scale,
            }

    majorant = _majorant_diagnostic(coeffs, series)
    return ExtensionSeries(series, level, coeffs, residuals, variant, majorant, class_checks)


# ---------------------------------------------------------------------------
# Hodge-number scan
# ---------------------------------------------------------------------------


def hodge_number_scan(
    context: HodgeContext,
    series: Beltrami,
    t_samples: Sequence[complex],
    levels: Sequence[int] | None = None,
    order: int = 2,
    tol: float = 1e-9,
    parallel: bool = False,
) -> Dict:
    """Kernel dimensions of the deformed raising Laplacian across samples,
    plus the rank of the harmonic transport map at each level.

    For each sample t the deformed structure is built at eps(t) (constant
    deformations only), its raising-kernel dimensions recorded, and the
    extended harmonic basis transported and projected onto the deformed
    harmonics; constancy verdicts compare every row to t = 0.  Samples are
    independent and may be processed in parallel; rows are assembled in the
    given sample order either way.
    """
    structure = context.structure
    if not series.is_constant():
        raise DeformationError("the scan needs deformed-side packages: constant deformations only")
    if levels is None:
        levels = list(structure.levels())
    base_dims = {k: context.package("dbar").kernel_dimension(k) for k in levels}

    extensions: Dict[int, List[ExtensionSeries]] = {}
    for k in levels:
        extensions[k] = [
            extend_closed_form(context, series, sig, order, variant="standard", tol=tol)
            for sig in context.package("dbar").harmonic_basis(k)
        ]

    def sample_row(t: complex) -> Dict:
        t = complex(t)
        eps_t = series.eps_at(t)
        if eps_t.is_zero():
            return {"t": t, "dims": dict(base_dims),
                    "injectivity_rank": {k: base_dims[k] for k in levels}}
        ds = DeformedStructure(structure, eps_t)
        ctx_t = ds.context
        pk_t = ctx_t.package("dbar")
        dims = {k: pk_t.kernel_dimension(k) for k in levels}
        ranks = {}
        transport = Transport(structure, eps_t)
        for k in levels:
            images = []
            harm_basis = pk_t.harmonic_basis(k)
            for ext in extensions[k]:
                sigma_t = ext.undressed_at(t)
                image = pk_t.harmonic(transport.forward(sigma_t))
                images.append([ctx_t.bi_inner(image, h) for h in harm_basis])
            if images and harm_basis:
                mat = np.asarray(images, dtype=complex)
                s = np.linalg.svd(mat, compute_uv=False)
                ranks[k] = int(np.sum(s > 1e-9 * s[0])) if s.size and s[0] > 0 else 0
            else:
                ranks[k] = 0
        return {"t": t, "dims": dims, "injectivity_rank": ranks}

    if parallel:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor() as pool:
            rows = list(pool.map(sample_row, t_samples))
    else:
        rows = [sample_row(t) for t in t_samples]

    constant = {
        k: all(row["dims"][k] == base_dims[k] for row in rows) for k in levels
    }
    return {
        "levels": list(levels),
        "base_dims": base_dims,
        "rows": rows,
        "constant": constant,
    }
