"""Constant generalized complex structures on flat tori.

A structure bundles the endomorphism J of T + T* with an explicit frame of
its +i eigenbundle L, the pairing-dual frame spanning the conjugate bundle,
the canonical line generator annihilated by L, an optional constant closed
3-form twist, and the change of basis realizing the spinor level grading

    level k in [-n, n]  <->  span of (k+n)-fold dual-frame Clifford words
    acting on the canonical generator.

Only constant-coefficient J, twist and frames are supported; all variation
enters later through deformation coefficients.
"""

from __future__ import annotations

import itertools
import math
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .fourier import FourierScalar, TorusGeometry, TruncationBox
from .spinor import (
    CliffordPoly,
    CourantVector,
    Spinor,
    constant_clifford_matrix,
    constant_spinor_vector,
    courant_bracket,
    pairing,
    spinor_from_constant_vector,
    spinor_from_mode_vectors,
    spinor_mode_vector,
    wedge,
)

DEFAULT_TOL = 1e-12


class StructureError(ValueError):
    """A candidate structure failed one of its defining residual checks."""

    def __init__(self, message: str, residuals: Dict[str, float] | None = None):
        super().__init__(message)
        self.residuals = residuals or {}


def natural_pairing_matrix(dim: int) -> np.ndarray:
    """Matrix Q with <u, v> = u^T Q v in (tangent, cotangent) block order."""
    q = np.zeros((2 * dim, 2 * dim))
    q[:dim, dim:] = np.eye(dim)
    q[dim:, :dim] = np.eye(dim)
    return q


def _vec(v: CourantVector) -> np.ndarray:
    return v.constant_values()


def _vector_from_values(
    geometry: TorusGeometry, box: TruncationBox, values: np.ndarray
) -> CourantVector:
    dim = geometry.dim
    return CourantVector.constant(geometry, box, values[:dim], values[dim:])


def wedge_exponential(b: Spinor) -> Spinor:
    """exp(b ^ .) applied to the constant function 1, for even-degree b."""
    geometry, box = b.geometry, b.box
    out = Spinor.scalar(FourierScalar.constant(geometry, box, 1.0))
    term = Spinor.scalar(FourierScalar.constant(geometry, box, 1.0))
    for i in range(1, geometry.dim // 2 + 1):
        term = wedge(b, term).scale(1.0 / i)
        if term.is_zero():
            break
        out = out.add(term)
    return out


def two_form_spinor(
    geometry: TorusGeometry, box: TruncationBox, matrix: np.ndarray
) -> Spinor:
    """Constant 2-form sum_{j<k} m_{jk} dx^j ^ dx^k from an antisymmetric matrix."""
    matrix = np.asarray(matrix)
    comps: Dict[Tuple[int, ...], FourierScalar] = {}
    for j in range(geometry.dim):
        for k in range(j + 1, geometry.dim):
            if matrix[j, k] != 0:
                comps[(j, k)] = FourierScalar.constant(geometry, box, matrix[j, k])
    return Spinor(geometry, box, comps)


class GCStructure:
    """A validated constant generalized complex structure.

    Attributes
    ----------
    frame : tuple of CourantVector
        Basis l_1..l_{2n} of the +i eigenbundle L.
    dual_frame : tuple of CourantVector
        Pairing-dual basis l^1..l^{2n} spanning the conjugate bundle,
        with <l^i, l_j> = delta^i_j.
    rho0 : Spinor
        Canonical line generator, L . rho0 = 0, deterministic phase.
    twist : Spinor
        Constant closed 3-form H (possibly zero).
    jmatrix : ndarray
        The real 4n x 4n endomorphism.
    """

    def __init__(
        self,
        geometry: TorusGeometry,
        box: TruncationBox,
        frame: Sequence[CourantVector],
        dual_frame: Sequence[CourantVector],
        twist: Spinor | None = None,
        label: str = "custom",
        tol: float = DEFAULT_TOL,
        validate: bool = True,
    ):
        self.geometry = geometry
        self.box = box
        self.n = geometry.n
        self.dim = geometry.dim
        self.frame = tuple(frame)
        self.dual_frame = tuple(dual_frame)
        self.label = label
        if twist is None:
            twist = Spinor.zero(geometry, box)
        self.twist = twist

        if len(self.frame) != self.dim or len(self.dual_frame) != self.dim:
            raise StructureError("frames must have 2n elements each")

        self._frame_vals = np.column_stack([_vec(v) for v in self.frame])
        self._dual_vals = np.column_stack([_vec(v) for v in self.dual_frame])
        self.jmatrix = self._build_jmatrix()
        self._frame_cliff = [
            constant_clifford_matrix(_vec(v), self.dim) for v in self.frame
        ]
        self._dual_cliff = [
            constant_clifford_matrix(_vec(v), self.dim) for v in self.dual_frame
        ]

        self.rho0 = self._canonical_spinor()
        self._rho0_vec = constant_spinor_vector(self.rho0)
        self._level_matrix, self._level_slices, self._level_keys = self._build_level_basis()
        self._level_inverse = np.linalg.inv(self._level_matrix)
        self.structure_constants = self._structure_constants()
        self.validation = self._residuals()
        if validate:
            bad = {k: v for k, v in self.validation.items() if v > tol}
            if bad:
                detail = ", ".join(f"{k}={v:.3e}" for k, v in bad.items())
                if "integrability" in bad and self._bracket_offframe_pair:
                    i, j = self._bracket_offframe_pair
                    detail += f" (worst bracket pair: frame {i}, frame {j})"
                raise StructureError(
                    f"structure '{label}' failed validation: " + detail,
                    self.validation,
                )

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------

    def _build_jmatrix(self) -> np.ndarray:
        q = natural_pairing_matrix(self.dim)
        j = np.zeros((2 * self.dim, 2 * self.dim), dtype=complex)
        for i in range(self.dim):
            li = self._frame_vals[:, i]
            ld = self._dual_vals[:, i]
            # coefficient of v along l_i is <l^i, v>, along l^i is <l_i, v>
            j += 1j * np.outer(li, q @ ld) - 1j * np.outer(ld, q @ li)
        return j.real if np.abs(j.imag).max() < 1e-9 else j

    def _canonical_spinor(self) -> Spinor:
        stacked = np.vstack(self._frame_cliff)
        _, svals, vh = np.linalg.svd(stacked)
        size = 2 ** self.dim
        scale = svals[0] if svals[0] > 0 else 1.0
        kernel_dim = int(np.sum(svals < 1e-10 * scale)) + (size - len(svals) if len(svals) < size else 0)
        if kernel_dim != 1:
            raise StructureError(
                f"joint kernel of the L action has dimension {kernel_dim}, expected 1"
            )
        vec = vh[-1].conj()
        # deterministic phase: first nonzero monomial coefficient real positive
        for c in vec:
            if abs(c) > 1e-10:
                vec = vec * (abs(c) / c)
                break
        vec = vec / np.linalg.norm(vec)
        return spinor_from_constant_vector(self.geometry, self.box, vec)

    def _build_level_basis(self):
        size = 2 ** self.dim
        columns = np.zeros((size, size), dtype=complex)
        slices: Dict[int, slice] = {}
        keys: List[Tuple[int, Tuple[int, ...]]] = []
        col = 0
        for k in range(-self.n, self.n + 1):
            start = col
            for subset in itertools.combinations(range(self.dim), k + self.n):
                vec = self._rho0_vec
                for i in reversed(subset):
                    vec = self._dual_cliff[i] @ vec
                columns[:, col] = vec
                keys.append((k, subset))
                col += 1
            slices[k] = slice(start, col)
        return columns, slices, keys

    def _structure_constants(self) -> np.ndarray:
        c = np.zeros((self.dim, self.dim, self.dim), dtype=complex)
        self._bracket_offframe = 0.0
        self._bracket_offframe_pair = None
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                br = courant_bracket(self.frame[i], self.frame[j], H=self.twist)
                for k in range(self.dim):
                    coeff = pairing(self.dual_frame[k], br).integrate()
                    c[i, j, k] = coeff
                    c[j, i, k] = -coeff
                    off = abs(pairing(self.frame[k], br).integrate())
                    if off > self._bracket_offframe:
                        self._bracket_offframe = off
                        self._bracket_offframe_pair = (i, j)
        return c

    def _residuals(self) -> Dict[str, float]:
        q = natural_pairing_matrix(self.dim)
        j = self.jmatrix
        res: Dict[str, float] = {}
        res["j_squared"] = float(np.abs(j @ j + np.eye(2 * self.dim)).max())
        res["j_real"] = float(np.abs(j.imag).max()) if np.iscomplexobj(j) else 0.0
        res["pairing_preserved"] = float(np.abs(j.T @ q @ j - q).max())
        iso = 0.0
        dual = 0.0
        for i in range(self.dim):
            for k in range(self.dim):
                iso = max(iso, abs(pairing(self.frame[i], self.frame[k]).integrate()))
                iso = max(
                    iso, abs(pairing(self.dual_frame[i], self.dual_frame[k]).integrate())
                )
                want = 1.0 if i == k else 0.0
                dual = max(
                    dual,
                    abs(pairing(self.dual_frame[i], self.frame[k]).integrate() - want),
                )
        res["isotropy"] = float(iso)
        res["duality"] = float(dual)
        res["integrability"] = float(self._bracket_offframe)
        eig = 0.0
        for i in range(self.dim):
            eig = max(
                eig,
                float(np.abs(self.jmatrix @ self._frame_vals[:, i] - 1j * self._frame_vals[:, i]).max()),
            )
            eig = max(
                eig,
                float(np.abs(self.jmatrix @ self._dual_vals[:, i] + 1j * self._dual_vals[:, i]).max()),
            )
        res["frame_eigen"] = eig
        kill = 0.0
        for i in range(self.dim):
            kill = max(kill, float(np.abs(self._frame_cliff[i] @ self._rho0_vec).max()))
        res["annihilator"] = kill
        res["twist_closed"] = 0.0 if self.twist.is_zero() else float(
            np.max([f.derive(a).norm() for f in self.twist.comps.values() for a in range(self.dim)] or [0.0])
        )
        res["twist_real"] = 0.0 if all(f.is_real() for f in self.twist.comps.values()) else 1.0
        res["level_basis_rank"] = 0.0 if np.linalg.matrix_rank(self._level_matrix) == 2 ** self.dim else 1.0
        return res

    # ------------------------------------------------------------------
    # named constructors
    # ------------------------------------------------------------------

    @classmethod
    def complex_structure(
        cls,
        n: int,
        box: TruncationBox,
        jcx: np.ndarray | None = None,
        twist: Spinor | None = None,
        tol: float = DEFAULT_TOL,
    ) -> "GCStructure":
        """Structure of complex type.

        With the default complex structure, z^j = x^j + i x^{n+j}; the
        eigenframe is {dz^j, d/dzbar^j} with dual {d/dz^j, dzbar^j} and
        canonical generator dz^1 ^ ... ^ dz^n.
        """
        geometry = TorusGeometry(n)
        dim = geometry.dim
        if jcx is None:
            frame: List[CourantVector] = []
            dual: List[CourantVector] = []
            for j in range(n):
                dz_cot = [0.0] * dim
                dz_cot[j] = 1.0
                dz_cot[n + j] = 1.0j
                frame.append(CourantVector.constant(geometry, box, [0.0] * dim, dz_cot))
            for j in range(n):
                dzb_tan = [0.0] * dim
                dzb_tan[j] = 0.5
                dzb_tan[n + j] = 0.5j
                frame.append(CourantVector.constant(geometry, box, dzb_tan, [0.0] * dim))
            for j in range(n):
                dz_tan = [0.0] * dim
                dz_tan[j] = 0.5
                dz_tan[n + j] = -0.5j
                dual.append(CourantVector.constant(geometry, box, dz_tan, [0.0] * dim))
            for j in range(n):
                dzb_cot = [0.0] * dim
                dzb_cot[j] = 1.0
                dzb_cot[n + j] = -1.0j
                dual.append(CourantVector.constant(geometry, box, [0.0] * dim, dzb_cot))
            return cls(geometry, box, frame, dual, twist, label=f"complex(T{dim})", tol=tol)

        jcx = np.asarray(jcx, dtype=float)
        if jcx.shape != (dim, dim):
            raise StructureError("complex structure matrix must be 2n x 2n")
        if np.abs(jcx @ jcx + np.eye(dim)).max() > tol * 10:
            raise StructureError("matrix does not square to -1")
        jgc = np.zeros((2 * dim, 2 * dim))
        jgc[:dim, :dim] = -jcx
        jgc[dim:, dim:] = jcx.T
        return cls.from_endomorphism(geometry, box, jgc, twist, label="complex(custom)", tol=tol)

    @classmethod
    def symplectic_structure(
        cls,
        omega: np.ndarray,
        box: TruncationBox,
        twist: Spinor | None = None,
        tol: float = DEFAULT_TOL,
    ) -> "GCStructure":
        """Structure of symplectic type; eigenframe {X - i omega(X)}."""
        omega = np.asarray(omega, dtype=float)
        dim = omega.shape[0]
        if dim % 2 or np.abs(omega + omega.T).max() > 0:
            raise StructureError("omega must be an antisymmetric 2n x 2n matrix")
        if abs(np.linalg.det(omega)) < 1e-12:
            raise StructureError("omega must be nondegenerate")
        geometry = TorusGeometry(dim // 2)
        frame = []
        for j in range(dim):
            tan = [0.0] * dim
            tan[j] = 1.0
            cot = [-1j * omega[j, k] for k in range(dim)]
            frame.append(CourantVector.constant(geometry, box, tan, cot))
        om_inv = np.linalg.inv(omega)
        dual = []
        for i in range(dim):
            tan = [0.0] * dim
            cot = [0.0] * dim
            values = np.zeros(2 * dim, dtype=complex)
            for a in range(dim):
                coeff = om_inv[i, a] / 2j
                values[a] += coeff
                for k in range(dim):
                    values[dim + k] += coeff * 1j * omega[a, k]
            dual.append(_vector_from_values(geometry, box, values))
        return cls(geometry, box, frame, dual, twist, label=f"symplectic(T{dim})", tol=tol)

    @classmethod
    def from_endomorphism(
        cls,
        geometry: TorusGeometry,
        box: TruncationBox,
        jgc: np.ndarray,
        twist: Spinor | None = None,
        label: str = "endomorphism",
        tol: float = DEFAULT_TOL,
    ) -> "GCStructure":
        """Build frames from a real endomorphism with J^2 = -1 preserving <,>."""
        jgc = np.asarray(jgc, dtype=float)
        dim = geometry.dim
        vals, vecs = np.linalg.eig(jgc)
        plus_cols = [i for i, v in enumerate(vals) if v.imag > 0.5]
        if len(plus_cols) != dim:
            raise StructureError("+i eigenspace does not have dimension 2n")
        frame_vals = vecs[:, plus_cols]
        # deterministic normalization: largest component real positive
        frame = []
        for i in range(dim):
            v = frame_vals[:, i]
            pivot = np.argmax(np.abs(v))
            v = v * (abs(v[pivot]) / v[pivot])
            frame.append(_vector_from_values(geometry, box, v))
        q = natural_pairing_matrix(dim)
        conj_vals = np.column_stack([_vec(v).conj() for v in frame])
        p = conj_vals.T @ q @ np.column_stack([_vec(v) for v in frame])
        pinv = np.linalg.inv(p)
        dual = []
        for i in range(dim):
            dual.append(_vector_from_values(geometry, box, conj_vals @ pinv[i, :]))
        return cls(geometry, box, frame, dual, twist, label=label, tol=tol)

    def b_transform(self, bmatrix: np.ndarray, tol: float = DEFAULT_TOL) -> "GCStructure":
        """Shear by a constant 2-form: X + xi -> X + xi + i_X B.

        The canonical generator transforms by the wedge exponential of -B,
        which is what intertwines the sheared Clifford action with the
        original one.
        """
        bmatrix = np.asarray(bmatrix, dtype=float)
        dim = self.dim
        if bmatrix.shape != (dim, dim) or np.abs(bmatrix + bmatrix.T).max() > 0:
            raise StructureError("B must be an antisymmetric 2n x 2n matrix")
        tmat = np.eye(2 * dim)
        tmat[dim:, :dim] = bmatrix.T  # (i_X B)_k = sum_j X^j B_{jk}
        frame = [
            _vector_from_values(self.geometry, self.box, tmat @ _vec(v))
            for v in self.frame
        ]
        dual = [
            _vector_from_values(self.geometry, self.box, tmat @ _vec(v))
            for v in self.dual_frame
        ]
        return GCStructure(
            self.geometry,
            self.box,
            frame,
            dual,
            twist=self.twist,
            label=f"{self.label}+b",
            tol=tol,
        )

    # ------------------------------------------------------------------
    # level grading
    # ------------------------------------------------------------------

    def level_dimension(self, k: int) -> int:
        return math.comb(self.dim, k + self.n)

    def levels(self) -> Iterable[int]:
        return range(-self.n, self.n + 1)

    def _check_level(self, k: int) -> None:
        if not -self.n <= k <= self.n:
            raise ValueError(f"level {k} out of range [-{self.n}, {self.n}]")

    def frame_coordinates(self, sigma: Spinor) -> Dict[Tuple[int, ...], np.ndarray]:
        """Per-mode coordinates of sigma in the dual-frame spinor basis."""
        out = {}
        for mode in sigma.modes():
            out[mode] = self._level_inverse @ spinor_mode_vector(sigma, mode)
        return out

    def project_level(self, sigma: Spinor, k: int) -> Spinor:
        self._check_level(k)
        sl = self._level_slices[k]
        vectors = {}
        for mode, coords in self.frame_coordinates(sigma).items():
            kept = np.zeros_like(coords)
            kept[sl] = coords[sl]
            vectors[mode] = self._level_matrix @ kept
        return spinor_from_mode_vectors(self.geometry, self.box, vectors)

    def level_components(self, sigma: Spinor) -> Dict[int, Spinor]:
        coords = self.frame_coordinates(sigma)
        out = {}
        for k in self.levels():
            sl = self._level_slices[k]
            vectors = {}
            for mode, c in coords.items():
                kept = np.zeros_like(c)
                kept[sl] = c[sl]
                if np.abs(kept).max() > 0:
                    vectors[mode] = self._level_matrix @ kept
            if vectors:
                out[k] = spinor_from_mode_vectors(self.geometry, self.box, vectors)
        return out

    def level_weights(self, sigma: Spinor) -> Dict[int, float]:
        coords = self.frame_coordinates(sigma)
        weights = {k: 0.0 for k in self.levels()}
        for c in coords.values():
            for k in self.levels():
                sl = self._level_slices[k]
                weights[k] += float(np.sum(np.abs(c[sl]) ** 2))
        return {k: math.sqrt(w) for k, w in weights.items()}

    def level_of(self, sigma: Spinor, tol: float = 1e-9) -> int:
        """The single level carrying sigma; raises if levels mix."""
        weights = self.level_weights(sigma)
        total = math.sqrt(sum(w ** 2 for w in weights.values()))
        if total == 0:
            raise ValueError("zero spinor has no level")
        live = [k for k, w in weights.items() if w > tol * total]
        if len(live) != 1:
            detail = {k: w / total for k, w in weights.items() if w > 0}
            raise ValueError(f"spinor mixes levels; relative weights {detail}")
        return live[0]

    def level_spinors(self, k: int) -> List[Spinor]:
        """Constant frame spinors spanning the level-k slice."""
        self._check_level(k)
        sl = self._level_slices[k]
        out = []
        for col in range(sl.start, sl.stop):
            out.append(
                spinor_from_constant_vector(
                    self.geometry, self.box, self._level_matrix[:, col]
                )
            )
        return out

    def rotation_generator(self) -> np.ndarray:
        """Spinorial action of J on the monomial basis.

        Normalized so the canonical generator has eigenvalue n*i; level k
        sits at eigenvalue -k*i.
        """
        size = 2 ** self.dim
        nhat = np.zeros((size, size), dtype=complex)
        for i in range(self.dim):
            nhat += self._dual_cliff[i] @ self._frame_cliff[i]
        return 1j * (self.n * np.eye(size) - nhat)

    # ------------------------------------------------------------------
    # frame polynomials
    # ------------------------------------------------------------------

    def dual_frame_poly(
        self, coeffs: Dict[Tuple[int, ...], FourierScalar], degree: int
    ) -> CliffordPoly:
        """Polynomial over the dual frame (sections of the conjugate bundle)."""
        return CliffordPoly(self.dual_frame, degree, coeffs)

    def frame_poly(
        self, coeffs: Dict[Tuple[int, ...], FourierScalar], degree: int
    ) -> CliffordPoly:
        return CliffordPoly(self.frame, degree, coeffs)

    def conjugate_poly(self, poly: CliffordPoly) -> CliffordPoly:
        """Complex conjugate, re-expanded over the opposite frame.

        A polynomial over the dual frame conjugates into one over the frame
        and vice versa; used to pair deformation coefficients with their
        duals.
        """
        if poly.frame == self.dual_frame:
            target, source_conj_coords = self.frame, self._dual_conj_in_frame()
        elif poly.frame == self.frame:
            target, source_conj_coords = self.dual_frame, self._frame_conj_in_dual()
        else:
            raise ValueError("polynomial frame does not belong to this structure")
        out = CliffordPoly.zero(target, poly.degree)
        for key, f in poly.terms():
            fconj = f.conj()
            # conj(frame_{i}) = sum_a coords[a, i] target_a
            expansions = [source_conj_coords[:, i] for i in key]
            for combo in itertools.product(range(self.dim), repeat=len(key)):
                coeff = 1.0 + 0.0j
                for pos, a in enumerate(combo):
                    coeff *= expansions[pos][a]
                if coeff == 0:
                    continue
                out = out.add(
                    CliffordPoly(
                        target, poly.degree, {tuple(combo): fconj.scale(coeff)}
                    )
                )
        return out

    def _dual_conj_in_frame(self) -> np.ndarray:
        q = natural_pairing_matrix(self.dim)
        conj_vals = self._dual_vals.conj()
        return self._dual_vals.T @ q @ conj_vals  # coords[a, i] = <l^a, conj(l^i)>

    def _frame_conj_in_dual(self) -> np.ndarray:
        q = natural_pairing_matrix(self.dim)
        conj_vals = self._frame_vals.conj()
        return self._frame_vals.T @ q @ conj_vals

    def rebox(self, box: TruncationBox) -> "GCStructure":
        """The same structure with its data re-homed in another box."""
        def move(v: CourantVector) -> CourantVector:
            return CourantVector(
                self.geometry,
                box,
                [f.embed(box) for f in v.tangent],
                [f.embed(box) for f in v.cotangent],
            )

        return GCStructure(
            self.geometry,
            box,
            [move(v) for v in self.frame],
            [move(v) for v in self.dual_frame],
            twist=self.twist.embed(box),
            label=self.label,
        )

    def clifford_frame(self, i: int) -> np.ndarray:
        return self._frame_cliff[i]

    def clifford_dual(self, i: int) -> np.ndarray:
        return self._dual_cliff[i]

    def __repr__(self) -> str:
        return f"GCStructure({self.label}, n={self.n}, K={self.box.K})"
