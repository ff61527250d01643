"""Symbolic checks of the second supersymmetry built from a formal I.

The transformation tilde_delta X^M = etat I_N^M(X) D X^N is expanded on
formal N=1 superfields with a formal structure I_N^M(x) and its first and
second derivatives. The relations I^2 = -1 and vanishing Nijenhuis tensor
are imposed in an adapted frame: at a point I equals the flat matrix, its
derivatives anticommute with it, and second derivatives carry the
particular part fixed by differentiating I^2 = -1 twice. All checks are
covariant under linear changes of x, so working at a single point in such
a frame loses no generality.

Index convention: the symbol ``I^N,M`` stands for I_N^M and matrix products
read (AB)_N^M = A_N^L B_L^M.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, FrozenSet, Optional, Tuple

import numpy as np
import sympy
from tqdm import tqdm

from complex_charts.almost_complex import canonical_matrix
from complex_charts.errors import (
    InconsistentRelations,
    SquareRelationMissing,
)
from complex_charts.grassmann import (
    ETA,
    ETA_TILDE,
    ETA_TILDE1,
    ETA_TILDE2,
    THETA,
    FormalSymbol,
    GrassmannExpr,
    component_rules,
    covariant_n1,
    derivation,
    lowest,
    n1_rules,
    n1_superfield,
    psi_symbol,
    spatial_derivative,
    supercharge_n1,
    time_derivative,
)
from complex_charts.utils.defence import (
    _check_int_in_range,
    _check_item_in_iter,
    _type_defence,
)

I = sympy.I  # noqa: E741
RELATIONS = ("square", "integrability")


@dataclass(frozen=True)
class FormalStructure:
    """Formal structure I_N^M(x) on D real dimensions.

    Parameters
    ----------
    dim : int
        Even number of real dimensions D.
    relations : frozenset of str, optional
        Imposed relations, a subset of {"square", "integrability"}.
    constant : bool, optional
        Replace I by the constant flat matrix, by default False.
    progress : bool, optional
        Show progress bars over target indices, by default False.

    Raises
    ------
    SquareRelationMissing
        "integrability" requested without "square".

    """

    dim: int
    relations: FrozenSet[str] = field(default_factory=frozenset)
    constant: bool = False
    progress: bool = False

    def __post_init__(self):
        _check_int_in_range(self.dim, "dim", 2)
        if self.dim % 2:
            raise ValueError(f"`dim` expected an even value. Got {self.dim}")
        relations = frozenset(self.relations)
        for rel in relations:
            _check_item_in_iter(rel, RELATIONS, "relations")
        if "integrability" in relations and "square" not in relations:
            raise SquareRelationMissing(
                "the integrability relation is imposed in the frame built "
                "from the square relation."
            )
        object.__setattr__(self, "relations", relations)

    @classmethod
    def flat(cls, dim: int) -> "FormalStructure":
        """Constant flat structure."""
        return cls(dim, constant=True)

    @property
    def indices(self) -> range:
        """1-based index range."""
        return range(1, self.dim + 1)

    def symbol(self, N: int, M: int, partials: Tuple[int, ...] = ()):
        """FormalSymbol for d_partials I_N^M."""
        return FormalSymbol("I", (N, M), partials=partials, dim=self.dim)

    def entry(
        self, N: int, M: int, partials: Tuple[int, ...] = ()
    ) -> GrassmannExpr:
        """d_partials I_N^M as an expression."""
        if self.constant:
            if partials:
                return GrassmannExpr()
            return GrassmannExpr.scalar(flat_matrix(self.dim)[N - 1, M - 1])
        return GrassmannExpr.atom(self.symbol(N, M, partials))

    def reduce(self, e: GrassmannExpr) -> GrassmannExpr:
        """Apply the imposed relations to `e`."""
        _type_defence(e, "e", GrassmannExpr)
        if self.constant or "square" not in self.relations:
            return e
        rules = _frame_rules(self.dim, "integrability" in self.relations)
        return e.map_coefficients(lambda c: c.xreplace(rules))

    def _sweep(self, desc: str):
        return tqdm(self.indices, desc=desc, disable=not self.progress)


def flat_matrix(dim: int) -> sympy.Matrix:
    """Exact flat matrix F with F[N-1, M-1] = I_N^M, F^2 = -1.

    The transpose of the numeric canonical matrix, so that
    tilde_delta x^1 = -i etat psi^2.
    """
    A0 = canonical_matrix(dim // 2)
    return sympy.Matrix(dim, dim, lambda n, m: int(round(A0[m, n])))


def anticommuting_basis_exact(dim: int) -> Tuple[sympy.Matrix, ...]:
    """Integer basis of the matrices anticommuting with `flat_matrix`."""
    out = []
    for m in range(dim // 2):
        for n in range(dim // 2):
            p1 = sympy.zeros(dim, dim)
            p1[2 * m, 2 * n] = 1
            p1[2 * m + 1, 2 * n + 1] = -1
            p2 = sympy.zeros(dim, dim)
            p2[2 * m, 2 * n + 1] = 1
            p2[2 * m + 1, 2 * n] = 1
            out.extend([p1, p2])
    return tuple(out)


def _combination(syms, basis) -> sympy.Matrix:
    out = sympy.zeros(*basis[0].shape)
    for s, b in zip(syms, basis):
        out += s * b
    return out


def _nijenhuis_matrices(F, dI, dim) -> Dict[Tuple[int, int, int], sympy.Expr]:
    """N_MN^K from the value F and first derivatives dI[J] (0-based)."""
    out = {}
    for M in range(dim):
        for N in range(dim):
            for K in range(dim):
                val = dI[M][N, K] - dI[N][M, K]
                for P in range(dim):
                    for Q in range(dim):
                        val -= F[M, P] * F[N, Q] * (dI[P][Q, K] - dI[Q][P, K])
                out[M, N, K] = sympy.expand(val)
    return out


def _solve_linear(eqs, unknowns) -> dict:
    """Solve a linear system, leaving free unknowns out of the result.

    The unknowns are treated as complex whatever their sympy assumptions,
    so a relation such as b = -i a is kept instead of being split into
    real and imaginary parts.
    """
    eqs = [e for e in (sympy.expand(e) for e in eqs) if e != 0]
    if not eqs:
        return {}
    solutions = sympy.linsolve(eqs, list(unknowns))
    if solutions == sympy.S.EmptySet:
        raise InconsistentRelations("inconsistent jet relations.")
    values = next(iter(solutions))
    return {
        u: sympy.expand(v) for u, v in zip(unknowns, values) if v != u
    }


@lru_cache(maxsize=None)
def _frame_rules(dim: int, integrable: bool) -> Dict[sympy.Symbol, sympy.Expr]:
    """Adapted-frame values of I and its first two derivatives.

    The relations are imposed at a single point in a frame where I equals
    the flat matrix. First derivatives are combinations of the matrices
    anticommuting with it. Second derivatives are the particular solution
    of the twice differentiated I^2 = -1 plus a free anticommuting part.
    With `integrable` the vanishing Nijenhuis tensor and its first
    derivative are solved for the free coefficients. Every check built on
    these rules is covariant under linear changes of x, so the frame
    choice loses no generality.
    """
    F = flat_matrix(dim)
    basis = anticommuting_basis_exact(dim)
    a_syms = {
        J: [sympy.Symbol(f"a{J}_{k}", real=True) for k in range(len(basis))]
        for J in range(dim)
    }
    dI = {J: _combination(a_syms[J], basis) for J in range(dim)}
    pairs = [(J, K) for J in range(dim) for K in range(J, dim)]
    b_syms = {
        p: [
            sympy.Symbol(f"b{p[0]}{p[1]}_{k}", real=True)
            for k in range(len(basis))
        ]
        for p in pairs
    }

    if integrable:
        unknowns = [s for J in range(dim) for s in a_syms[J]]
        sol = _solve_linear(
            _nijenhuis_matrices(F, dI, dim).values(), unknowns
        )
        dI = {J: dI[J].subs(sol) for J in range(dim)}

    def _dd(J, K):
        p = (min(J, K), max(J, K))
        particular = (dI[J] * dI[K] + dI[K] * dI[J]) * F / 2
        return _combination(b_syms[p], basis) + particular

    ddI = {p: _dd(*p) for p in pairs}

    if integrable:
        eqs = []
        for J in range(dim):
            for M in range(dim):
                for N in range(dim):
                    for K in range(dim):
                        val = ddI[min(J, M), max(J, M)][N, K] - ddI[
                            min(J, N), max(J, N)
                        ][M, K]
                        for P in range(dim):
                            for Q in range(dim):
                                curl = dI[P][Q, K] - dI[Q][P, K]
                                d_curl = (
                                    ddI[min(J, P), max(J, P)][Q, K]
                                    - ddI[min(J, Q), max(J, Q)][P, K]
                                )
                                val -= (
                                    dI[J][M, P] * F[N, Q]
                                    + F[M, P] * dI[J][N, Q]
                                ) * curl + F[M, P] * F[N, Q] * d_curl
                        eqs.append(val)
        unknowns = [s for p in pairs for s in b_syms[p]]
        sol = _solve_linear(eqs, unknowns)
        ddI = {p: ddI[p].subs(sol) for p in pairs}

    rules = {}
    for N in range(1, dim + 1):
        for M in range(1, dim + 1):
            sym = FormalSymbol("I", (N, M), dim=dim)
            rules[sym.symbol] = F[N - 1, M - 1]
            for J in range(1, dim + 1):
                rules[sym.with_partial(J).symbol] = sympy.expand(
                    dI[J - 1][N - 1, M - 1]
                )
            for J, K in pairs:
                rules[sym.with_partial(J + 1).with_partial(K + 1).symbol] = (
                    sympy.expand(ddI[J, K][N - 1, M - 1])
                )
    return rules


def lift(e: GrassmannExpr, fs: FormalStructure, theta=THETA) -> GrassmannExpr:
    """f(X) = f(x) + i theta psi^K d_K f(x) for a function of x."""
    out = e
    for K in fs.indices:
        out = out + I * GrassmannExpr.atom(theta) * GrassmannExpr.atom(
            psi_symbol(K)
        ) * spatial_derivative(e, K)
    return out


def tilde_delta(
    M: int, eta_tilde, fs: FormalStructure, theta=THETA
) -> GrassmannExpr:
    """etat I_N^M(X) D X^N as a superfield expression.

    Parameters
    ----------
    M : int
        1-based index of the target superfield X^M.
    eta_tilde : OddGenerator
        Transformation parameter.
    fs : FormalStructure
        The formal structure.

    Returns
    -------
    GrassmannExpr
        The variation, before any relation is imposed.

    """
    _type_defence(fs, "fs", FormalStructure)
    _check_int_in_range(M, "M", 1, fs.dim)
    out = GrassmannExpr()
    for N in fs.indices:
        out = out + lift(fs.entry(N, M), fs, theta) * covariant_n1(
            n1_superfield(N, theta), theta
        )
    return GrassmannExpr.atom(eta_tilde) * out


def tilde_rules(eta_tilde, fs: FormalStructure):
    """Component rule of the second supersymmetry at `eta_tilde`."""
    return component_rules(
        lambda M: tilde_delta(M, eta_tilde, fs), fs.dim
    )


def _square(fs: FormalStructure, K: int, M: int) -> GrassmannExpr:
    out = GrassmannExpr()
    for L in fs.indices:
        out = out + fs.entry(K, L) * fs.entry(L, M)
    return out


def commutator_bracket(fs: FormalStructure, K: int, N: int, M: int):
    """I_K^L d_L I_N^M + d_N I_K^L I_L^M."""
    out = GrassmannExpr()
    for L in fs.indices:
        out = out + fs.entry(K, L) * fs.entry(N, M, (L,))
        out = out + fs.entry(K, L, (N,)) * fs.entry(L, M)
    return out


@dataclass(frozen=True)
class CommutatorReport:
    """Decomposition of the commutator of two tilde transformations.

    Every mapping is keyed by the 1-based target index M. All entries have
    the imposed relations applied.

    Attributes
    ----------
    full : dict
        tilde_delta_1 tilde_delta_2 X^M - (1 <-> 2).
    xdot_part : dict
        2i etat1 etat2 (I^2)_K^M Xdot^K.
    dxdx_part : dict
        2 etat1 etat2 [I_K^L d_L I_N^M + d_N I_K^L I_L^M] D X^K D X^N.
    residual : dict
        full - xdot_part - dxdx_part.
    obstruction : dict
        full - (-2i etat1 etat2 Xdot^M), zero iff the algebra closes.

    """

    dim: int
    relations: FrozenSet[str]
    full: Dict[int, GrassmannExpr]
    xdot_part: Dict[int, GrassmannExpr]
    dxdx_part: Dict[int, GrassmannExpr]
    residual: Dict[int, GrassmannExpr]
    obstruction: Dict[int, GrassmannExpr]

    @property
    def residual_is_zero(self) -> bool:
        """True when the decomposition is exact."""
        return all(e.is_zero() for e in self.residual.values())

    @property
    def closes(self) -> bool:
        """True when the commutator equals -2i etat1 etat2 Xdot."""
        return all(e.is_zero() for e in self.obstruction.values())

    def second_derivative_symbols(self) -> set:
        """d d I symbols in the lowest component of `full`."""
        found = set()
        for e in self.full.values():
            for sym in lowest(e, [THETA]).even_symbols():
                if sym.base == "I" and len(sym.partials) >= 2:
                    found.add(sym)
        return found

    def to_text(self) -> str:
        """Canonical printing of every part."""
        lines = [
            f"D = {self.dim}, relations = {sorted(self.relations)}",
        ]
        names = ("full", "xdot_part", "dxdx_part", "residual", "obstruction")
        for name in names:
            for M, e in sorted(getattr(self, name).items()):
                lines.append(f"{name}[{M}] = {e.to_text()}")
        return "\n".join(lines)


def commutator(fs: FormalStructure) -> CommutatorReport:
    """Commutator of two tilde transformations on X^1 ... X^D.

    The first transformation acts first:
    full^M = tilde_delta_2(tilde_delta_1 X^M)
             - tilde_delta_1(tilde_delta_2 X^M),
    with each variation acting as an even derivation on component fields.
    """
    _type_defence(fs, "fs", FormalStructure)
    rule1 = tilde_rules(ETA_TILDE1, fs)
    rule2 = tilde_rules(ETA_TILDE2, fs)
    etas = GrassmannExpr.atom(ETA_TILDE1) * GrassmannExpr.atom(ETA_TILDE2)
    D_X = {N: covariant_n1(n1_superfield(N)) for N in fs.indices}
    X_dot = {N: time_derivative(n1_superfield(N)) for N in fs.indices}

    keys = ("full", "xdot", "dxdx", "residual", "obstruction")
    parts = {k: {} for k in keys}
    DX_DX = {
        (K, N): D_X[K] * D_X[N] for K in fs.indices for N in fs.indices
    }
    for M in fs._sweep("commutator"):
        # relations are applied factor by factor, before multiplying
        full = derivation(
            tilde_delta(M, ETA_TILDE1, fs), rule2, fs.reduce
        ) - derivation(tilde_delta(M, ETA_TILDE2, fs), rule1, fs.reduce)
        xdot = GrassmannExpr()
        for K in fs.indices:
            xdot = xdot + fs.reduce(lift(_square(fs, K, M), fs)) * X_dot[K]
        xdot = 2 * I * etas * xdot
        dxdx = GrassmannExpr()
        for K in fs.indices:
            for N in fs.indices:
                bracket = fs.reduce(lift(commutator_bracket(fs, K, N, M), fs))
                dxdx = dxdx + bracket * DX_DX[K, N]
        dxdx = 2 * etas * dxdx

        parts["full"][M] = full
        parts["xdot"][M] = xdot
        parts["dxdx"][M] = dxdx
        parts["residual"][M] = full - xdot - dxdx
        parts["obstruction"][M] = full + 2 * I * etas * X_dot[M]

    return CommutatorReport(
        dim=fs.dim,
        relations=fs.relations,
        full=parts["full"],
        xdot_part=parts["xdot"],
        dxdx_part=parts["dxdx"],
        residual=parts["residual"],
        obstruction=parts["obstruction"],
    )


def nijenhuis_pattern(
    fs: FormalStructure,
) -> Dict[Tuple[int, int, int], GrassmannExpr]:
    """N_MN^K = d_M I_N^K - d_N I_M^K - I_M^P I_N^Q (d_P I_Q^K - d_Q I_P^K).

    Keys are 1-based (M, N, K). Relations of `fs` are applied.
    """
    _type_defence(fs, "fs", FormalStructure)
    out = {}
    for M in fs.indices:
        for N in fs.indices:
            for K in fs.indices:
                val = fs.entry(N, K, (M,)) - fs.entry(M, K, (N,))
                for P in fs.indices:
                    for Q in fs.indices:
                        val = val - fs.entry(M, P) * fs.entry(N, Q) * (
                            fs.entry(Q, K, (P,)) - fs.entry(P, K, (Q,))
                        )
                out[M, N, K] = fs.reduce(val)
    return out


def nijenhuis_evaluator(
    dim: int,
) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Numeric evaluator of `nijenhuis_pattern` for a generic structure.

    The returned function takes comps[N, K, *grid] = I_N^K and
    grad[P, N, K, *grid] = d_P I_N^K (0-based) and returns
    out[M, N, K, *grid].
    """
    fs = FormalStructure(dim)
    pattern = nijenhuis_pattern(fs)
    values = [fs.symbol(N, K).symbol for N in fs.indices for K in fs.indices]
    derivs = [
        fs.symbol(N, K, (P,)).symbol
        for P in fs.indices
        for N in fs.indices
        for K in fs.indices
    ]
    keys = sorted(pattern)
    funcs = sympy.lambdify(
        values + derivs,
        [pattern[k].coefficient() for k in keys],
        modules="numpy",
    )

    def evaluate(comps: np.ndarray, grad: np.ndarray) -> np.ndarray:
        comps = np.asarray(comps)
        grad = np.asarray(grad)
        grid = comps.shape[2:]
        args = [comps[n, k] for n in range(dim) for k in range(dim)] + [
            grad[p, n, k]
            for p in range(dim)
            for n in range(dim)
            for k in range(dim)
        ]
        out = np.zeros((dim,) * 3 + grid, dtype=np.result_type(comps, grad))
        for (M, N, K), val in zip(keys, funcs(*args)):
            out[M - 1, N - 1, K - 1] = np.broadcast_to(val, grid)
        return out

    return evaluate


def eq_intr_bracket(fs: FormalStructure):
    """d_L I_[N^M I_K]^L + d_[N I_K]^L I_L^M, keyed by 1-based (N, K, M).

    Antisymmetrization carries no 1/2.
    """
    out = {}
    for N in fs.indices:
        for K in fs.indices:
            for M in fs.indices:
                val = GrassmannExpr()
                for L in fs.indices:
                    val = val + fs.entry(N, M, (L,)) * fs.entry(K, L)
                    val = val - fs.entry(K, M, (L,)) * fs.entry(N, L)
                    val = val + (
                        fs.entry(K, L, (N,)) - fs.entry(N, L, (K,))
                    ) * fs.entry(L, M)
                out[N, K, M] = val
    return out


def eq_intr_remainder(fs: FormalStructure):
    """eq_intr_bracket + I_K^R N_NR^M without imposing any relation."""
    _type_defence(fs, "fs", FormalStructure)
    generic = FormalStructure(fs.dim, constant=fs.constant)
    bracket = eq_intr_bracket(generic)
    nij = nijenhuis_pattern(generic)
    out = {}
    for (N, K, M), val in bracket.items():
        for R in generic.indices:
            val = val + generic.entry(K, R) * nij[N, R, M]
        out[N, K, M] = val
    return out


def square_remainder(fs: FormalStructure):
    """Expected `eq_intr_remainder`, built from I^2 + 1 alone.

    d_N (I^2)_K^M - d_K (I^2)_N^M
    - I_N^P ((I^2)_K^Q + delta_K^Q)(d_P I_Q^M - d_Q I_P^M).
    """
    generic = FormalStructure(fs.dim, constant=fs.constant)
    out = {}
    for N in generic.indices:
        for K in generic.indices:
            for M in generic.indices:
                val = spatial_derivative(
                    _square(generic, K, M), N
                ) - spatial_derivative(_square(generic, N, M), K)
                for P in generic.indices:
                    for Q in generic.indices:
                        shifted = _square(generic, K, Q) + (1 if K == Q else 0)
                        curl = generic.entry(Q, M, (P,)) - generic.entry(
                            P, M, (Q,)
                        )
                        val = val - generic.entry(N, P) * shifted * curl
                out[N, K, M] = val
    return out


def eq_intr_to_nijenhuis(fs: FormalStructure):
    """eq_intr_bracket + I_K^R N_NR^M with the square relation applied.

    Zero for every index when I^2 = -1, which turns the integrability
    condition of the commutator into vanishing of the Nijenhuis tensor.

    Raises
    ------
    SquareRelationMissing
        The square relation is not imposed on `fs`.

    """
    _type_defence(fs, "fs", FormalStructure)
    if "square" not in fs.relations and not fs.constant:
        raise SquareRelationMissing(
            "rewriting the integrability condition needs I^2 = -1."
        )
    return {k: fs.reduce(v) for k, v in eq_intr_remainder(fs).items()}


def _z(fs: FormalStructure, *partials: int) -> GrassmannExpr:
    symbol = FormalSymbol("zn", partials=partials, dim=fs.dim)
    return GrassmannExpr.atom(symbol)


def _cal_d(fs: FormalStructure, M: int, e: GrassmannExpr) -> GrassmannExpr:
    out = spatial_derivative(e, M)
    for P in fs.indices:
        out = out - I * fs.entry(M, P) * spatial_derivative(e, P)
    return out


def _dz_rules(fs: FormalStructure) -> dict:
    """Solve D_Q z = 0 at the adapted point for the even-index derivatives."""
    F = flat_matrix(fs.dim)
    zs = [_z(fs, Q).coefficient() for Q in fs.indices]
    eqs = [
        zs[Q] - I * sum(F[Q, N] * zs[N] for N in range(fs.dim))
        for Q in range(fs.dim)
    ]
    return _solve_linear(eqs, zs[1::2])


def cal_d_commutator(
    fs: FormalStructure, dz_rule: Optional[bool] = None
) -> Dict[Tuple[int, int], GrassmannExpr]:
    """[D_M, D_N] z with D_M = d_M - i I_M^P d_P, keyed by (M, N).

    Parameters
    ----------
    fs : FormalStructure
        The formal structure.
    dz_rule : bool, optional
        Impose D_Q z = 0 at the point. Defaults to True when the square
        relation is imposed.

    Returns
    -------
    dict
        The commutator for M < N.

    Raises
    ------
    SquareRelationMissing
        `dz_rule` requested without the square relation.

    """
    _type_defence(fs, "fs", FormalStructure)
    square = "square" in fs.relations
    if dz_rule is None:
        dz_rule = square
    if dz_rule and not (square or fs.constant):
        raise SquareRelationMissing("D z = 0 is imposed at the adapted point.")
    rules = _dz_rules(fs) if dz_rule else {}
    z = _z(fs)
    out = {}
    for M in fs.indices:
        for N in fs.indices:
            if M >= N:
                continue
            comm = _cal_d(fs, M, _cal_d(fs, N, z)) - _cal_d(
                fs, N, _cal_d(fs, M, z)
            )
            comm = fs.reduce(comm)
            out[M, N] = comm.map_coefficients(lambda c: c.xreplace(rules))
    return out


def cal_d_nijenhuis_form(fs: FormalStructure):
    """-i N_MN^K d_K z, reduced as `cal_d_commutator` reduces."""
    nij = nijenhuis_pattern(fs)
    rules = _dz_rules(fs) if ("square" in fs.relations or fs.constant) else {}
    out = {}
    for M in fs.indices:
        for N in fs.indices:
            if M >= N:
                continue
            val = GrassmannExpr()
            for K in fs.indices:
                val = val - I * nij[M, N, K] * _z(fs, K)
            val = fs.reduce(val)
            out[M, N] = val.map_coefficients(lambda c: c.xreplace(rules))
    return out


def cal_d_intermediate(fs: FormalStructure):
    """[-i d_[M I_N]^K - i I_[M^P d_P I_N]^Q I_Q^K] d_K z
    - I_[M^P d_P I_N]^Q D_Q z, for a generic structure."""
    out = {}
    z = _z(fs)
    for M in fs.indices:
        for N in fs.indices:
            if M >= N:
                continue
            val = GrassmannExpr()
            for K in fs.indices:
                val = val - I * (
                    fs.entry(N, K, (M,)) - fs.entry(M, K, (N,))
                ) * _z(fs, K)
            for P in fs.indices:
                for Q in fs.indices:
                    twist = fs.entry(M, P) * fs.entry(N, Q, (P,)) - fs.entry(
                        N, P
                    ) * fs.entry(M, Q, (P,))
                    for K in fs.indices:
                        val = val - I * twist * fs.entry(Q, K) * _z(fs, K)
                    val = val - twist * _cal_d(fs, Q, z)
            out[M, N] = val
    return out


def delta_tilde_commute_check(fs: FormalStructure) -> Dict[int, GrassmannExpr]:
    """delta(tilde_delta X^M) - tilde_delta(delta X^M), keyed by M.

    delta is the first supersymmetry i eta Q X. Zero for any structure.
    """
    _type_defence(fs, "fs", FormalStructure)
    eta_rule = n1_rules(ETA, fs.dim)
    tilde_rule = tilde_rules(ETA_TILDE, fs)
    out = {}
    for M in fs._sweep("delta commute"):
        first = I * GrassmannExpr.atom(ETA) * supercharge_n1(n1_superfield(M))
        val = derivation(tilde_delta(M, ETA_TILDE, fs), eta_rule) - derivation(
            first, tilde_rule
        )
        out[M] = fs.reduce(val)
    return out
