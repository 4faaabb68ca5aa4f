"""Twisted differential calculus on the spinor grading.

The twisted differential d sigma - H ^ sigma splits, on a structure with
involutive eigenbundle, into the level-lowering and level-raising pieces
(projections onto adjacent levels).  The module also carries the Lie
algebroid differential on frame polynomials and the Schouten bracket that
extends the twisted Courant bracket to them.
"""

from __future__ import annotations

import itertools
from typing import Dict, List, Tuple

from .fourier import FourierScalar
from .spinor import (
    CliffordPoly,
    CourantVector,
    Spinor,
    courant_bracket,
    exterior_derivative,
    pairing,
    wedge,
)
from .structure import GCStructure


def twisted_d(sigma: Spinor, structure: GCStructure, policy: str | None = None) -> Spinor:
    """d_H sigma = d sigma - H ^ sigma."""
    out = exterior_derivative(sigma)
    if not structure.twist.is_zero():
        out = out.add(wedge(structure.twist, sigma, policy=policy).scale(-1))
    return out


def _shifted_projection(
    sigma: Spinor, structure: GCStructure, shift: int, policy: str | None = None
) -> Spinor:
    out = Spinor.zero(sigma.geometry, sigma.box)
    for k, part in structure.level_components(sigma).items():
        target = k + shift
        if -structure.n <= target <= structure.n:
            out = out.add(
                structure.project_level(twisted_d(part, structure, policy=policy), target)
            )
    return out


def del_op(sigma: Spinor, structure: GCStructure, policy: str | None = None) -> Spinor:
    """Level-lowering component of the twisted differential."""
    return _shifted_projection(sigma, structure, -1, policy=policy)


def delbar_op(sigma: Spinor, structure: GCStructure, policy: str | None = None) -> Spinor:
    """Level-raising component of the twisted differential."""
    return _shifted_projection(sigma, structure, +1, policy=policy)


def dolbeault_split(
    sigma: Spinor, structure: GCStructure, tol: float = 1e-9
) -> Tuple[Spinor, Spinor]:
    """Split d_H sigma of a single-level sigma into its two components.

    Raises ValueError with the level weights when sigma mixes levels.
    """
    k = structure.level_of(sigma, tol=tol)
    d_sigma = twisted_d(sigma, structure)
    lower = (
        structure.project_level(d_sigma, k - 1)
        if k - 1 >= -structure.n
        else Spinor.zero(sigma.geometry, sigma.box)
    )
    upper = (
        structure.project_level(d_sigma, k + 1)
        if k + 1 <= structure.n
        else Spinor.zero(sigma.geometry, sigma.box)
    )
    return lower, upper


def anchor_derivative(
    v: CourantVector, f: FourierScalar
) -> FourierScalar:
    """Directional derivative of f along the tangent projection of v.

    Frames are constant, so only constant tangent components appear.
    """
    vals = v.constant_values()
    dim = v.geometry.dim
    out = FourierScalar.zero(f.geometry, f.box)
    for a in range(dim):
        c = vals[a]
        if c != 0:
            out = out.add(f.derive(a).scale(c))
    return out


def lie_derivation_dL(
    a: CliffordPoly, structure: GCStructure, policy: str | None = None
) -> CliffordPoly:
    """Lie algebroid differential on polynomials over the dual frame.

    (d_L a)(x_0, .., x_k) = sum_i (-1)^i p(x_i) a(.., x_i omitted, ..)
                          + sum_{i<j} (-1)^{i+j} a([x_i, x_j]_H, ..),
    evaluated on the structure frame, with the bracket reduced to the
    structure constants.
    """
    if a.frame != structure.dual_frame:
        raise ValueError("polynomial must live over the structure's dual frame")
    dim = structure.dim
    p = a.degree
    out: Dict[Tuple[int, ...], FourierScalar] = {}
    c = structure.structure_constants
    for args in itertools.combinations(range(dim), p + 1):
        val = FourierScalar.zero(structure.geometry, structure.box)
        for i, xi in enumerate(args):
            rest = args[:i] + args[i + 1 :]
            coeff = a.coefficient(rest)
            if not coeff.is_zero():
                term = anchor_derivative(structure.frame[xi], coeff)
                if i % 2:
                    term = term.scale(-1)
                val = val.add(term)
        for i in range(p + 1):
            for j in range(i + 1, p + 1):
                rest = tuple(x for t, x in enumerate(args) if t not in (i, j))
                sign = -1 if (i + j) % 2 else 1
                for k in range(dim):
                    ck = c[args[i], args[j], k]
                    if ck == 0:
                        continue
                    coeff = a.coefficient((k,) + rest)
                    if coeff.is_zero():
                        continue
                    val = val.add(coeff.scale(sign * ck))
        if not val.is_zero():
            out[args] = val
    return CliffordPoly(structure.dual_frame, p + 1, out)


def _expand_in_dual_frame(
    v: CourantVector, structure: GCStructure, policy: str | None = None
) -> Tuple[List[FourierScalar], float]:
    """Coefficients of a section along the dual frame, plus the off-span mass."""
    coeffs = []
    off = 0.0
    for k in range(structure.dim):
        coeffs.append(pairing(structure.frame[k], v, policy=policy))
        off = max(off, pairing(structure.dual_frame[k], v, policy=policy).norm())
    return coeffs, off


def schouten_bracket(
    a: CliffordPoly,
    b: CliffordPoly,
    structure: GCStructure,
    policy: str | None = None,
    span_tol: float = 1e-9,
) -> CliffordPoly:
    """Schouten extension of the twisted Courant bracket to frame polynomials.

    For decomposables the bracket is
        [s_1..s_p, t_1..t_q] =
            sum (-1)^{alpha+beta} [s_alpha, t_beta]_H ^ (remaining factors),
    and coefficient functions are folded into the first factor of each
    monomial, which keeps the sum exact for non-constant coefficients.
    """
    if a.frame != structure.dual_frame or b.frame != structure.dual_frame:
        raise ValueError("bracket arguments must live over the dual frame")
    p, q = a.degree, b.degree
    if p == 0 or q == 0:
        raise ValueError("bracket needs positive-degree arguments")
    out = CliffordPoly.zero(structure.dual_frame, p + q - 1)
    H = structure.twist
    for key_a, f in a.terms():
        secs_a = [structure.dual_frame[i] for i in key_a]
        secs_a[0] = secs_a[0].scale_scalar(f, policy=policy)
        for key_b, g in b.terms():
            secs_b = [structure.dual_frame[i] for i in key_b]
            secs_b[0] = secs_b[0].scale_scalar(g, policy=policy)
            for alpha in range(p):
                for beta in range(q):
                    br = courant_bracket(secs_a[alpha], secs_b[beta], H=H, policy=policy)
                    coeffs, off = _expand_in_dual_frame(br, structure, policy=policy)
                    scale = max(1.0, br.norm())
                    if off > span_tol * scale:
                        raise ValueError(
                            "bracket left the conjugate eigenbundle "
                            f"(off-span mass {off:.3e}); structure not involutive?"
                        )
                    sign = -1 if (alpha + beta) % 2 else 1
                    rest_a = tuple(x for t, x in enumerate(key_a) if t != alpha)
                    rest_b = tuple(x for t, x in enumerate(key_b) if t != beta)
                    carry = None
                    if alpha != 0:
                        carry = f
                    if beta != 0:
                        carry = g if carry is None else carry.mul(g, policy=policy)
                    for k, ck in enumerate(coeffs):
                        if ck.is_zero():
                            continue
                        val = ck if carry is None else ck.mul(carry, policy=policy)
                        out = out.add(
                            CliffordPoly(
                                structure.dual_frame,
                                p + q - 1,
                                {(k,) + rest_a + rest_b: val.scale(sign)},
                            )
                        )
    return out


def maurer_cartan_residual(
    eps: CliffordPoly, structure: GCStructure, policy: str | None = None
) -> CliffordPoly:
    """d_L eps - (1/2)[eps, eps], the integrability defect of a deformation."""
    dl = lie_derivation_dL(eps, structure, policy=policy)
    br = schouten_bracket(eps, eps, structure, policy=policy)
    return dl.add(br.scale(-0.5))
