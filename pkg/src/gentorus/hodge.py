"""Finite-dimensional Hodge theory for the level-graded spinor complex.

Constant structures make every operator block-diagonal over Fourier modes,
so each package is assembled mode by mode on a Born-Infeld-orthonormal
constant basis.  Adjoints are conjugate transposes in that basis (exact on
the truncation); Laplacians are eigendecomposed per mode and level block,
the kernel split off by a relative cutoff, and the Green operator is the
pseudo-inverse on the kernel complement.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Tuple

import numpy as np

from .fourier import TruncationBox
from .metric import GeneralizedMetric
from .spinor import (
    Spinor,
    constant_clifford_matrix,
    monomial_list,
    spinor_from_constant_vector,
    spinor_from_mode_vectors,
    spinor_mode_vector,
    wedge,
)
from .structure import GCStructure

KINDS = ("d", "del", "dbar", "bc", "aeppli")

RANK_CUTOFF = 1e-9


class ObstructionError(ValueError):
    """A solvability condition failed; carries the offending norms."""

    def __init__(self, message: str, data: Dict[str, float] | None = None):
        super().__init__(message)
        self.data = data or {}


def _cut(s: np.ndarray, rel: float, floor: float) -> int:
    """Number of singular values above max(rel * s_max, floor).

    The absolute floor matters when a matrix is pure float noise: its own
    largest singular value is then a meaningless reference.
    """
    if s.size == 0:
        return 0
    return int(np.sum(s > max(rel * s[0], floor)))


def _rank(mat: np.ndarray, rel: float = RANK_CUTOFF, floor: float = 0.0) -> int:
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    return _cut(s, rel, floor)


def _range_basis(mat: np.ndarray, rel: float = RANK_CUTOFF, floor: float = 0.0) -> np.ndarray:
    if mat.size == 0:
        return np.zeros((mat.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(mat)
    r = _cut(s, rel, floor)
    return u[:, :r]


def _null_basis(mat: np.ndarray, rel: float = RANK_CUTOFF, floor: float = 0.0) -> np.ndarray:
    if mat.shape[0] == 0:
        return np.eye(mat.shape[1], dtype=complex)
    if mat.shape[1] == 0:
        return np.zeros((0, 0), dtype=complex)
    _, s, vh = np.linalg.svd(mat)
    r = _cut(s, rel, floor)
    return vh[r:].conj().T


def _contained(sub: np.ndarray, sup: np.ndarray, rel: float = RANK_CUTOFF,
               floor: float = 0.0) -> bool:
    """Column span of sub contained in column span of sup."""
    if sub.shape[1] == 0:
        return True
    return _rank(np.hstack([sup, sub]), rel, floor) == _rank(sup, rel, floor)


def _intersection_dim(a: np.ndarray, b: np.ndarray, rel: float = RANK_CUTOFF,
                      floor: float = 0.0) -> int:
    da, db = _rank(a, rel, floor), _rank(b, rel, floor)
    if da == 0 or db == 0:
        return 0
    return da + db - _rank(np.hstack([a, b]), rel, floor)


class HodgePackage:
    """Eigendecomposed Laplacian of one kind with projector and Green operator.

    Most Laplacians preserve the level grading and are eigendecomposed per
    level block; the full twisted-d Laplacian mixes levels by +-2 away from
    the generalized Kaehler case, so that kind decomposes whole per-mode
    matrices.
    """

    def __init__(self, context: "HodgeContext", kind: str):
        if kind not in KINDS:
            raise ValueError(f"unknown operator kind {kind!r}; expected one of {KINDS}")
        self.context = context
        self.kind = kind
        self.blockwise = kind != "d"
        self._eigs: Dict[Tuple, Tuple[np.ndarray, np.ndarray]] = {}
        self.block_leak = 0.0

        if self.blockwise:
            self._blocks = [
                (k, context.level_slices[k]) for k in context.structure.levels()
            ]
        else:
            self._blocks = [(None, slice(0, context.size))]

        radius = 0.0
        for mode in context.modes:
            lap = context.laplacian_matrix(kind, mode)
            for key, sl in self._blocks:
                block = lap[sl, sl]
                block = (block + block.conj().T) / 2
                vals, vecs = (
                    np.linalg.eigh(block) if block.size else (np.zeros(0), np.zeros((0, 0)))
                )
                self._eigs[(mode, key)] = (vals, vecs)
                if vals.size:
                    radius = max(radius, float(vals.max()))
            if self.blockwise:
                off = lap.copy()
                for _, sl in self._blocks:
                    off[sl, sl] = 0.0
                if off.size:
                    self.block_leak = max(self.block_leak, float(np.abs(off).max()))

        self.spectral_radius = radius
        self.cutoff = RANK_CUTOFF * radius if radius > 0 else 1e-12
        self.warnings: List[str] = []
        gap = 0
        for (mode, key), (vals, _) in self._eigs.items():
            gap += int(np.sum((vals > self.cutoff) & (vals <= 10 * self.cutoff)))
        if gap:
            self.warnings.append(
                f"spectral gap warning: {gap} eigenvalues within 10x of the kernel cutoff"
            )
        if self.block_leak > 1e-9 * max(1.0, radius):
            self.warnings.append(
                f"level-block leakage {self.block_leak:.3e} in the {kind} Laplacian"
            )

    # ------------------------------------------------------------------

    def kernel_dimension(self, level: int, mode: Tuple[int, ...] | None = None) -> int:
        modes = [mode] if mode is not None else self.context.modes
        if self.blockwise:
            return sum(
                int(np.sum(self._eigs[(m, level)][0] <= self.cutoff)) for m in modes
            )
        # level content of a level-mixing kernel: rank of the projected basis
        total = 0
        sl = self.context.level_slices[level]
        for m in modes:
            vals, vecs = self._eigs[(m, None)]
            kern = vecs[:, vals <= self.cutoff]
            if kern.shape[1] == 0:
                continue
            block = kern[sl, :]
            s = np.linalg.svd(block, compute_uv=False) if block.size else np.zeros(0)
            if s.size and s[0] > RANK_CUTOFF:
                total += int(np.sum(s > RANK_CUTOFF * s[0]))
        return total

    def kernel_dimensions(self) -> Dict[int, int]:
        return {k: self.kernel_dimension(k) for k in self.context.structure.levels()}

    def harmonic_basis(self, level: int | None = None) -> List[Spinor]:
        """Orthonormal kernel spinors (at one level for blockwise kinds)."""
        ctx = self.context
        out = []
        for mode in ctx.modes:
            for key, sl in self._blocks:
                if self.blockwise and level is not None and key != level:
                    continue
                vals, vecs = self._eigs[(mode, key)]
                for i in range(len(vals)):
                    if vals[i] <= self.cutoff:
                        coords = np.zeros(ctx.size, dtype=complex)
                        coords[sl] = vecs[:, i]
                        out.append(ctx.spinor_from_coords({mode: coords}))
        return out

    def _apply_spectral(self, sigma: Spinor, fn) -> Spinor:
        ctx = self.context
        vectors = {}
        for mode, coords in ctx.coords_of(sigma).items():
            out = np.zeros_like(coords)
            for key, sl in self._blocks:
                vals, vecs = self._eigs[(mode, key)]
                if vals.size == 0:
                    continue
                amps = vecs.conj().T @ coords[sl]
                out[sl] = vecs @ (fn(vals) * amps)
            vectors[mode] = out
        return ctx.spinor_from_mode_coords(vectors)

    def harmonic(self, sigma: Spinor) -> Spinor:
        """Projection onto the kernel."""
        return self._apply_spectral(sigma, lambda v: (v <= self.cutoff).astype(float))

    def green(self, sigma: Spinor) -> Spinor:
        """Pseudo-inverse on the kernel complement."""
        return self._apply_spectral(
            sigma, lambda v: np.where(v > self.cutoff, 1.0 / np.where(v > self.cutoff, v, 1.0), 0.0)
        )

    def laplacian(self, sigma: Spinor) -> Spinor:
        return self._apply_spectral(sigma, lambda v: v)

    def identity_residual(self) -> float:
        """Operator-norm residual of (harmonic + laplacian o green - 1)."""
        ctx = self.context
        worst = 0.0
        for mode in ctx.modes:
            lap = ctx.laplacian_matrix(self.kind, mode)
            resid = (
                self.harmonic_matrix(mode)
                + lap @ self.green_matrix(mode)
                - np.eye(ctx.size)
            )
            worst = max(worst, float(np.linalg.norm(resid, 2)))
        return worst

    def green_matrix(self, mode: Tuple[int, ...]) -> np.ndarray:
        ctx = self.context
        g = np.zeros((ctx.size, ctx.size), dtype=complex)
        for key, sl in self._blocks:
            vals, vecs = self._eigs[(mode, key)]
            if vals.size == 0:
                continue
            mask = vals <= self.cutoff
            inv = np.where(mask, 0.0, 1.0 / np.where(mask, 1.0, vals))
            g[sl, sl] = (vecs * inv) @ vecs.conj().T
        return g

    def harmonic_matrix(self, mode: Tuple[int, ...]) -> np.ndarray:
        ctx = self.context
        h = np.zeros((ctx.size, ctx.size), dtype=complex)
        for key, sl in self._blocks:
            vals, vecs = self._eigs[(mode, key)]
            if vals.size == 0:
                continue
            mask = vals <= self.cutoff
            h[sl, sl] = (vecs * mask) @ vecs.conj().T
        return h


class HodgeContext:
    """Per-mode operator matrices on a Born-Infeld-orthonormal level basis."""

    OPERATOR_NAMES = (
        "d", "del", "dbar", "d_adj", "del_adj", "dbar_adj",
        "deldbar", "deldbar_adj",
    )

    def __init__(
        self,
        structure: GCStructure,
        metric: GeneralizedMetric,
        box: TruncationBox | None = None,
        parallel: bool = False,
    ):
        if metric.compatibility(structure) > 1e-9:
            raise ValueError("metric does not commute with the structure")
        self.structure = structure
        self.metric = metric
        self.box = box or structure.box
        self.geometry = structure.geometry
        self.size = 2 ** structure.dim

        # orthonormal constant basis aligned with the level grading
        cols = []
        slices: Dict[int, slice] = {}
        start = 0
        for k in structure.levels():
            raw = structure._level_matrix[:, structure._level_slices[k]]
            ortho = metric.orthonormalize_columns(raw)
            cols.append(ortho)
            slices[k] = slice(start, start + ortho.shape[1])
            start += ortho.shape[1]
        self.basis = np.hstack(cols)
        self.level_slices = slices
        self.basis_inv = np.linalg.inv(self.basis)

        gram = np.zeros((self.size, self.size), dtype=complex)
        for i in range(self.size):
            for j in range(self.size):
                gram[i, j] = metric.constant_inner(self.basis[:, i], self.basis[:, j])
        self.orthonormality_residual = float(np.abs(gram - np.eye(self.size)).max())
        if self.orthonormality_residual > 1e-10:
            raise ValueError(
                f"level basis failed orthonormalization ({self.orthonormality_residual:.3e})"
            )

        # wedge matrices generating the twisted differential per mode
        dim = structure.dim
        self._wedge_axis = []
        for a in range(dim):
            values = np.zeros(2 * dim, dtype=complex)
            values[dim + a] = 1.0
            self._wedge_axis.append(constant_clifford_matrix(values, dim))
        self._wedge_twist = self._form_wedge_matrix(structure.twist)

        self.modes: List[Tuple[int, ...]] = list(self.box.modes(self.geometry))
        self._dmats: Dict[Tuple[int, ...], np.ndarray] = {}
        self._ops: Dict[Tuple[str, Tuple[int, ...]], np.ndarray] = {}
        self._packages: Dict[str, HodgePackage] = {}

        def build(mode):
            return mode, self._assemble_d(mode)

        if parallel:
            with ThreadPoolExecutor() as pool:
                for mode, mat in pool.map(build, self.modes):
                    self._dmats[mode] = mat
        else:
            for mode in self.modes:
                self._dmats[mode] = self._assemble_d(mode)

    # ------------------------------------------------------------------
    # matrix assembly
    # ------------------------------------------------------------------

    def _form_wedge_matrix(self, form: Spinor) -> np.ndarray:
        out = np.zeros((self.size, self.size), dtype=complex)
        if form.is_zero():
            return out
        monos = monomial_list(self.structure.dim)
        for j, mono in enumerate(monos):
            unit = spinor_from_constant_vector(self.geometry, self.box, np.eye(self.size)[:, j])
            image = wedge(form, unit)
            out[:, j] = spinor_mode_vector(image, (0,) * self.structure.dim)
        return out

    def _assemble_d(self, mode: Tuple[int, ...]) -> np.ndarray:
        dmono = -self._wedge_twist.astype(complex)
        tau = 2j * math.pi
        for a, ka in enumerate(mode):
            if ka != 0:
                dmono = dmono + tau * ka * self._wedge_axis[a]
        return self.basis_inv @ dmono @ self.basis

    def _level_mask(self, mat: np.ndarray, shift: int) -> np.ndarray:
        out = np.zeros_like(mat)
        for k in self.structure.levels():
            target = k + shift
            if not -self.structure.n <= target <= self.structure.n:
                continue
            out[self.level_slices[target], self.level_slices[k]] = mat[
                self.level_slices[target], self.level_slices[k]
            ]
        return out

    def operator_matrix(self, name: str, mode: Tuple[int, ...]) -> np.ndarray:
        key = (name, mode)
        if key in self._ops:
            return self._ops[key]
        if name == "d":
            mat = self._dmats[mode]
        elif name == "del":
            mat = self._level_mask(self._dmats[mode], -1)
        elif name == "dbar":
            mat = self._level_mask(self._dmats[mode], +1)
        elif name.endswith("_adj"):
            mat = self.operator_matrix(name[:-4], mode).conj().T
        elif name == "deldbar":
            mat = self.operator_matrix("del", mode) @ self.operator_matrix("dbar", mode)
        else:
            raise ValueError(f"unknown operator {name!r}")
        self._ops[key] = mat
        return mat

    def laplacian_matrix(self, kind: str, mode: Tuple[int, ...]) -> np.ndarray:
        if kind == "d":
            a = self.operator_matrix("d", mode)
            return a @ a.conj().T + a.conj().T @ a
        if kind == "del":
            a = self.operator_matrix("del", mode)
            return a @ a.conj().T + a.conj().T @ a
        if kind == "dbar":
            a = self.operator_matrix("dbar", mode)
            return a @ a.conj().T + a.conj().T @ a
        dl = self.operator_matrix("del", mode)
        db = self.operator_matrix("dbar", mode)
        dl_a, db_a = dl.conj().T, db.conj().T
        if kind == "bc":
            t = dl @ db
            s = db_a @ dl
            return (
                t @ t.conj().T + t.conj().T @ t
                + s @ s.conj().T + s.conj().T @ s
                + db_a @ db + dl_a @ dl
            )
        if kind == "aeppli":
            t = db @ dl
            r = dl @ db_a
            return (
                t @ t.conj().T + t.conj().T @ t
                + r @ r.conj().T + r.conj().T @ r
                + db @ db_a + dl @ dl_a
            )
        raise ValueError(f"unknown Laplacian kind {kind!r}")

    # ------------------------------------------------------------------
    # spinor transport
    # ------------------------------------------------------------------

    def coords_of(self, sigma: Spinor) -> Dict[Tuple[int, ...], np.ndarray]:
        out = {}
        for mode in sigma.modes():
            if not self.box.contains(mode):
                raise ValueError(f"spinor mode {mode} outside the context box")
            out[mode] = self.basis_inv @ spinor_mode_vector(sigma, mode)
        return out

    def spinor_from_mode_coords(self, vectors: Dict[Tuple[int, ...], np.ndarray]) -> Spinor:
        mono_vectors = {m: self.basis @ v for m, v in vectors.items()}
        return spinor_from_mode_vectors(self.geometry, self.box, mono_vectors, tol=0.0)

    def spinor_from_coords(self, vectors: Dict[Tuple[int, ...], np.ndarray]) -> Spinor:
        return self.spinor_from_mode_coords(vectors)

    def apply(self, name: str, sigma: Spinor) -> Spinor:
        vectors = {}
        for mode, coords in self.coords_of(sigma).items():
            vectors[mode] = self.operator_matrix(name, mode) @ coords
        return self.spinor_from_mode_coords(vectors)

    def package(self, kind: str) -> HodgePackage:
        if kind not in self._packages:
            self._packages[kind] = HodgePackage(self, kind)
        return self._packages[kind]

    def bi_inner(self, a: Spinor, b: Spinor) -> complex:
        return self.metric.bi_inner(a, b)

    def bi_norm(self, a: Spinor) -> float:
        return self.metric.bi_norm(a)

    # ------------------------------------------------------------------
    # solvers
    # ------------------------------------------------------------------

    def solve_ddbar_minimal(self, y: Spinor, tol: float = 1e-9) -> Spinor:
        """Minimum-norm solution of (del o dbar) x = y via the BC Green operator.

        Raises ObstructionError when y is not in the image (nonzero BC-harmonic
        projection or exactness residual).
        """
        bc = self.package("bc")
        scale = max(y.norm(), 1e-300)
        harm = bc.harmonic(y).norm()
        x = self.apply("deldbar_adj", bc.green(y))
        resid = (self.apply("deldbar", x) - y).norm()
        if harm > tol * scale or resid > tol * scale:
            raise ObstructionError(
                "right-hand side is not in the image of del dbar",
                {"harmonic_norm": harm, "residual": resid, "scale": scale},
            )
        return x

    def d_closed_representative(self, sigma: Spinor, tol: float = 1e-9) -> Tuple[Spinor, Spinor]:
        """gamma = sigma + dbar beta with d gamma = 0, same raising-cohomology class.

        beta = -(del dbar)^* G_bc (del sigma); requires dbar sigma = 0 and the
        exactness class condition for del sigma.
        """
        scale = max(sigma.norm(), 1e-300)
        closed = self.apply("dbar", sigma).norm()
        if closed > tol * scale:
            raise ObstructionError(
                "input is not dbar-closed", {"dbar_norm": closed, "scale": scale}
            )
        del_sigma = self.apply("del", sigma)
        bc = self.package("bc")
        beta = self.apply("deldbar_adj", bc.green(del_sigma)).scale(-1)
        gamma = sigma.add(self.apply("dbar", beta))
        d_res = self.apply("d", gamma).norm()
        if d_res > tol * scale:
            raise ObstructionError(
                "class condition failed: no d-closed representative on this truncation",
                {"d_residual": d_res, "scale": scale},
            )
        return gamma, beta

    def solve_dbar_minimal(self, tau: Spinor, tol: float = 1e-9) -> Spinor:
        """Minimum-norm solution of dbar x = tau via the dbar Green operator."""
        pk = self.package("dbar")
        scale = max(tau.norm(), 1e-300)
        harm = pk.harmonic(tau).norm()
        closed = self.apply("dbar", tau).norm()
        x = self.apply("dbar_adj", pk.green(tau))
        resid = (self.apply("dbar", x) - tau).norm()
        if harm > tol * scale or resid > tol * scale:
            raise ObstructionError(
                "right-hand side is not dbar-exact",
                {"harmonic_norm": harm, "residual": resid, "closed": closed, "scale": scale},
            )
        return x

    # ------------------------------------------------------------------
    # class checks
    # ------------------------------------------------------------------

    def _block(self, name: str, mode, row_level: int | None, col_level: int | None) -> np.ndarray:
        mat = self.operator_matrix(name, mode)
        rows = (
            self.level_slices[row_level]
            if row_level is not None and -self.structure.n <= row_level <= self.structure.n
            else slice(0, 0)
        )
        cols = (
            self.level_slices[col_level]
            if col_level is not None and -self.structure.n <= col_level <= self.structure.n
            else slice(0, 0)
        )
        return mat[rows, cols]

    def class_check(self, kind: str, k: int) -> Dict:
        """Rank verdicts for the ddbar-lemma and the solvability classes.

        Kinds: 'ddbar_lemma', 'B_k', 'S_k', 'Bcal_k', 'Scal_k'.  The two
        S/B families quantify over phi in the level above k with
        dbar(del phi) = 0 (plain) or dbar phi = 0 (calligraphic); the B
        variants additionally demand a del-exact solution.
        """
        holds = True
        dims = {"candidates": 0, "target": 0}
        for mode in self.modes:
            # absolute noise floor tied to the operator magnitude at this mode
            dmat = self.operator_matrix("d", mode)
            scale = max(1.0, float(np.abs(dmat).max()))
            floor = RANK_CUTOFF * scale
            if kind == "ddbar_lemma":
                del_in = self._block("del", mode, k, k + 1)
                dbar_out = self._block("dbar", mode, k + 1, k)
                del_out = self._block("del", mode, k - 1, k)
                dbar_in = self._block("dbar", mode, k, k - 1)
                deldbar = self._block("deldbar", mode, k, k)
                v1 = _range_basis(del_in, floor=floor)
                ker_dbar = _null_basis(dbar_out, floor=floor)
                v2 = _range_basis(dbar_in, floor=floor)
                ker_del = _null_basis(del_out, floor=floor)
                v3 = _range_basis(deldbar, floor=floor * scale)
                d1 = _intersection_dim(v1, ker_dbar, floor=RANK_CUTOFF)
                d2 = _intersection_dim(v2, ker_del, floor=RANK_CUTOFF)
                d3 = _rank(v3, floor=RANK_CUTOFF)
                dims["candidates"] += d1 + d2
                dims["target"] += 2 * d3
                if not (d1 == d2 == d3):
                    holds = False
                continue

            if kind in ("S_k", "B_k"):
                # phi in level k+1 with dbar(del phi) = 0
                del_down = self._block("del", mode, k, k + 1)
                dbar_after = self._block("dbar", mode, k + 1, k)
                if del_down.shape[1] == 0:
                    continue
                null = _null_basis(dbar_after @ del_down, floor=floor * scale)
                w = del_down @ null if null.shape[1] else np.zeros((del_down.shape[0], 0), dtype=complex)
            elif kind in ("Scal_k", "Bcal_k"):
                # phi in level k+1 with dbar phi = 0
                del_down = self._block("del", mode, k, k + 1)
                dbar_up = self._block("dbar", mode, k + 2, k + 1)
                if del_down.shape[1] == 0:
                    continue
                if dbar_up.shape[0] == 0:
                    null = np.eye(del_down.shape[1], dtype=complex)
                else:
                    null = _null_basis(dbar_up, floor=floor)
                w = del_down @ null if null.shape[1] else np.zeros((del_down.shape[0], 0), dtype=complex)
            else:
                raise ValueError(f"unknown class check {kind!r}")

            w = _range_basis(w, floor=floor)
            if kind in ("S_k", "Scal_k"):
                target = _range_basis(self._block("dbar", mode, k, k - 1), floor=floor)
            else:
                # del-exact solutions: dbar(del sigma1) with sigma1 at level k
                target = _range_basis(
                    self._block("dbar", mode, k, k - 1) @ self._block("del", mode, k - 1, k),
                    floor=floor * scale,
                )
            dims["candidates"] += _rank(w, floor=RANK_CUTOFF)
            dims["target"] += _rank(target, floor=RANK_CUTOFF)
            if not _contained(w, target, floor=RANK_CUTOFF):
                holds = False
        return {"kind": kind, "level": k, "holds": holds, "dims": dims}
