"""Exact Grassmann algebra & superspace calculus.

An expression is a sum of terms ``coefficient * a_1 a_2 ... a_k`` where the
coefficient is a sympy expression in commuting (even) symbols and
``a_1 < a_2 < ... < a_k`` are distinct odd atoms in the canonical order:
superspace generators, then odd parameters, then odd field symbols by name,
index and time-derivative count.

Every even symbol is a real sympy Symbol. Complex fields are pairs of
symbols (z / zbar) related by `conjugate`.
"""
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple, Union

import sympy

from complex_charts.errors import NotChiral, UnknownGenerator
from complex_charts.utils.defence import _check_item_in_iter, _type_defence

SQRT2 = sympy.sqrt(2)
I = sympy.I  # noqa: E741


@dataclass(frozen=True)
class OddGenerator:
    """Superspace coordinate or odd transformation parameter.

    Attributes
    ----------
    name : str
        Printed name.
    rank : int
        Position in the canonical order within its group.
    superspace : bool
        True for theta-type coordinates, False for parameters.
    partner : str or None
        Name of the conjugate generator; None for real generators.

    """

    name: str
    rank: int
    superspace: bool = False
    partner: Optional[str] = None

    odd = True

    def sort_key(self) -> tuple:
        """Canonical ordering key."""
        return (0 if self.superspace else 1, self.rank, self.name)

    def conjugate(self) -> "OddGenerator":
        """Conjugate generator."""
        return GENERATORS[self.partner] if self.partner else self

    def __repr__(self) -> str:
        return self.name


THETA = OddGenerator("theta", 0, True, "thetabar")
THETABAR = OddGenerator("thetabar", 1, True, "theta")
THETA1 = OddGenerator("theta1", 2, True)
THETA2 = OddGenerator("theta2", 3, True)
ETA = OddGenerator("eta", 0)
ETA_TILDE = OddGenerator("etat", 1)
ETA_TILDE1 = OddGenerator("etat1", 2)
ETA_TILDE2 = OddGenerator("etat2", 3)
EPSILON = OddGenerator("epsilon", 4, False, "epsilonbar")
EPSILONBAR = OddGenerator("epsilonbar", 5, False, "epsilon")
ETA1 = OddGenerator("eta1", 6)
ETA2 = OddGenerator("eta2", 7)

GENERATORS = {
    g.name: g
    for g in (
        THETA,
        THETABAR,
        THETA1,
        THETA2,
        ETA,
        ETA_TILDE,
        ETA_TILDE1,
        ETA_TILDE2,
        EPSILON,
        EPSILONBAR,
        ETA1,
        ETA2,
    )
}

CONJUGATE_BASES = {
    "z": "zbar",
    "zbar": "z",
    "chi": "chibar",
    "chibar": "chi",
    "lambda": "lambdabar",
    "lambdabar": "lambda",
    "F": "Fbar",
    "Fbar": "F",
}

# sympy Symbol -> FormalSymbol
_REGISTRY: Dict[sympy.Symbol, "FormalSymbol"] = {}


@dataclass(frozen=True)
class FormalSymbol:
    """A component field or jet symbol.

    Attributes
    ----------
    base : str
        Field name, e.g. "x", "psi", "z", "I".
    index : tuple of int
        Field indices, e.g. (M,) for x^M or (N, M) for I_N^M.
    dots : int
        Number of time derivatives.
    partials : tuple of int
        Sorted spatial derivative indices d_K (for fields of x).
    odd : bool
        Parity.
    dim : int
        When positive the symbol is a function of x^1 ... x^dim, and time
        derivatives follow the chain rule through x.

    """

    base: str
    index: Tuple[int, ...] = ()
    dots: int = 0
    partials: Tuple[int, ...] = ()
    odd: bool = False
    dim: int = 0

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(self.index))
        object.__setattr__(self, "partials", tuple(sorted(self.partials)))
        if self.dim and self.dots:
            raise ValueError("functions of x carry no time-derivative dots.")

    @property
    def name(self) -> str:
        """Unique printed name."""
        out = self.base
        if self.index:
            out += "^" + ",".join(str(i) for i in self.index)
        if self.partials:
            out += "_d" + ",".join(str(k) for k in self.partials)
        return out + "'" * self.dots

    def sort_key(self) -> tuple:
        """Canonical ordering key (after all generators)."""
        return (2, self.base, self.index, self.dots, self.partials)

    @property
    def symbol(self) -> sympy.Symbol:
        """Real sympy symbol standing for an even FormalSymbol."""
        if self.odd:
            raise TypeError(f"odd symbol {self.name} has no sympy symbol.")
        sym = sympy.Symbol(self.name, real=True)
        _REGISTRY[sym] = self
        return sym

    def dotted(self, k: int = 1) -> "FormalSymbol":
        """k-th time derivative."""
        return replace(self, dots=self.dots + k)

    def undotted(self) -> "FormalSymbol":
        """The symbol without time derivatives."""
        return replace(self, dots=0)

    def with_partial(self, k: int) -> "FormalSymbol":
        """Spatial derivative d_k."""
        return replace(self, partials=self.partials + (k,))

    def conjugate(self) -> "FormalSymbol":
        """Conjugate partner; real symbols are their own partner."""
        return replace(self, base=CONJUGATE_BASES.get(self.base, self.base))

    def __repr__(self) -> str:
        return self.name


Atom = Union[OddGenerator, FormalSymbol]
Key = Tuple[Atom, ...]


def _canonical_key(atoms: Sequence[Atom]) -> Optional[Tuple[Key, int]]:
    """Sort odd atoms, returning the sorted key and the permutation sign."""
    if len(set(atoms)) != len(atoms):
        return None
    keys = [a.sort_key() for a in atoms]
    inversions = sum(
        1
        for i in range(len(keys))
        for j in range(i + 1, len(keys))
        if keys[i] > keys[j]
    )
    ordered = tuple(a for _, a in sorted(zip(keys, atoms), key=lambda p: p[0]))
    return ordered, -1 if inversions % 2 else 1


def _add_into(acc: Dict[Key, sympy.Expr], key: Key, coeff) -> None:
    acc[key] = acc.get(key, 0) + coeff


def _expand_product(coeff) -> sympy.Expr:
    return sympy.expand(coeff, power_base=False, power_exp=False, log=False)


class GrassmannExpr:
    """Element of a Grassmann algebra with sympy coefficients.

    Parameters
    ----------
    terms : dict, optional
        Mapping from tuples of odd atoms (any order) to coefficients. Keys
        are sorted with the matching sign, terms with a repeated atom are
        dropped and coefficients are expanded.

    Examples
    --------
    >>> (GrassmannExpr.atom(THETA) * GrassmannExpr.atom(THETA)).is_zero()
    True

    """

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[dict] = None):
        acc: Dict[Key, sympy.Expr] = {}
        for key, coeff in (terms or {}).items():
            canon = _canonical_key(tuple(key))
            if canon is None:
                continue
            ordered, sign = canon
            _add_into(acc, ordered, sign * sympy.sympify(coeff))
        self.terms = {}
        for key, coeff in acc.items():
            coeff = sympy.expand(coeff)
            if coeff != 0:
                self.terms[key] = coeff

    @classmethod
    def _from_canonical(cls, terms: dict) -> "GrassmannExpr":
        """Wrap canonically keyed, expanded coefficients, dropping zeros."""
        out = cls.__new__(cls)
        out.terms = {k: c for k, c in terms.items() if c != 0}
        return out

    @classmethod
    def scalar(cls, value) -> "GrassmannExpr":
        """Even constant or sympy expression."""
        return cls({(): value})

    @classmethod
    def atom(cls, atom: Atom) -> "GrassmannExpr":
        """Single generator or field symbol."""
        if atom.odd:
            return cls({(atom,): 1})
        return cls({(): atom.symbol})

    @staticmethod
    def _coerce(other) -> "GrassmannExpr":
        if isinstance(other, GrassmannExpr):
            return other
        if isinstance(other, (OddGenerator, FormalSymbol)):
            return GrassmannExpr.atom(other)
        return GrassmannExpr.scalar(other)

    def __add__(self, other) -> "GrassmannExpr":
        other = self._coerce(other)
        acc = dict(self.terms)
        for key, coeff in other.terms.items():
            _add_into(acc, key, coeff)
        # sums of expanded coefficients stay expanded
        return GrassmannExpr._from_canonical(acc)

    __radd__ = __add__

    def __neg__(self) -> "GrassmannExpr":
        return GrassmannExpr._from_canonical(
            {k: -c for k, c in self.terms.items()}
        )

    def __sub__(self, other) -> "GrassmannExpr":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "GrassmannExpr":
        return self._coerce(other) - self

    def __mul__(self, other) -> "GrassmannExpr":
        other = self._coerce(other)
        acc: Dict[Key, sympy.Expr] = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                if k1 and k2:
                    canon = _canonical_key(k1 + k2)
                    if canon is None:
                        continue
                    ordered, sign = canon
                else:
                    ordered, sign = k1 or k2, 1
                _add_into(acc, ordered, sign * c1 * c2)
        return GrassmannExpr._from_canonical(
            {k: _expand_product(c) for k, c in acc.items()}
        )

    def __rmul__(self, other) -> "GrassmannExpr":
        return self._coerce(other) * self

    def __truediv__(self, scalar) -> "GrassmannExpr":
        return GrassmannExpr(
            {k: c / sympy.sympify(scalar) for k, c in self.terms.items()}
        )

    def __pow__(self, power: int) -> "GrassmannExpr":
        out = GrassmannExpr.scalar(1)
        for _ in range(power):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        try:
            return (self - self._coerce(other)).is_zero()
        except (TypeError, sympy.SympifyError):
            return NotImplemented

    __hash__ = None

    def is_zero(self) -> bool:
        """True when every coefficient vanishes."""
        return not self.terms

    def parities(self) -> set:
        """Set of term parities (0 even, 1 odd)."""
        return {len(k) % 2 for k in self.terms}

    def odd_atoms(self) -> set:
        """All odd atoms appearing in any term."""
        return {a for k in self.terms for a in k}

    def even_symbols(self) -> set:
        """All FormalSymbols appearing in coefficients."""
        syms = set()
        for coeff in self.terms.values():
            syms.update(
                _REGISTRY[s] for s in coeff.free_symbols if s in _REGISTRY
            )
        return syms

    def generators(self) -> set:
        """Superspace generators present."""
        return {
            a
            for a in self.odd_atoms()
            if isinstance(a, OddGenerator) and a.superspace
        }

    def coefficient(self, *atoms: Atom) -> sympy.Expr:
        """Coefficient of the canonical monomial of `atoms`."""
        canon = _canonical_key(atoms)
        if canon is None:
            return sympy.Integer(0)
        ordered, sign = canon
        return sign * self.terms.get(ordered, sympy.Integer(0))

    def map_coefficients(self, func: Callable) -> "GrassmannExpr":
        """Apply `func` to every coefficient."""
        return GrassmannExpr({k: func(c) for k, c in self.terms.items()})

    def to_text(self) -> str:
        """Deterministic canonical printing."""
        if not self.terms:
            return "0"
        parts = []
        for key in sorted(self.terms, key=lambda k: [a.sort_key() for a in k]):
            mono = "*".join(a.name for a in key)
            coeff = sympy.sstr(self.terms[key], order="lex")
            parts.append(f"({coeff})" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"GrassmannExpr({self.to_text()})"


def normalize(e: GrassmannExpr) -> GrassmannExpr:
    """Canonical form of an expression; idempotent."""
    _type_defence(e, "e", GrassmannExpr)
    return GrassmannExpr(e.terms)


def lowest(
    e: GrassmannExpr, generators: Iterable[OddGenerator]
) -> GrassmannExpr:
    """Set the given generators to zero."""
    gens = set(generators)
    return GrassmannExpr._from_canonical(
        {k: c for k, c in e.terms.items() if not gens.intersection(k)}
    )


def left_derivative(e: GrassmannExpr, gen: OddGenerator) -> GrassmannExpr:
    """Left derivative d/d(gen): moves `gen` to the front, then strips it."""
    acc = {}
    for key, coeff in e.terms.items():
        if gen in key:
            pos = key.index(gen)
            sign = -1 if pos % 2 else 1
            acc[key[:pos] + key[pos + 1 :]] = sign * coeff
    return GrassmannExpr._from_canonical(acc)


def berezin(e: GrassmannExpr, gen: OddGenerator) -> GrassmannExpr:
    """Berezin integral over `gen`, equal to the left derivative."""
    _type_defence(e, "e", GrassmannExpr)
    _type_defence(gen, "gen", OddGenerator)
    return left_derivative(e, gen)


Rule = Callable[[FormalSymbol], Optional[GrassmannExpr]]


def derivation(
    e: GrassmannExpr,
    rule: Rule,
    reduce: Optional[Callable[[GrassmannExpr], GrassmannExpr]] = None,
) -> GrassmannExpr:
    """Extend a rule on field symbols to an even derivation.

    `rule` returns the image of a FormalSymbol, or None when the symbol is
    annihilated. Generators are left alone. Terms are grouped by the symbol
    they differentiate, so each image is multiplied once.

    `reduce`, when given, must be a ring homomorphism on coefficients (a
    substitution of values for even symbols). It is applied to every factor
    before multiplying, and the result equals reduce(derivation(e, rule)).
    """
    if reduce is None:

        def reduce(expr):
            return expr

    acc: Dict[Key, sympy.Expr] = {}

    def _collect(expr: GrassmannExpr):
        for key, coeff in expr.terms.items():
            _add_into(acc, key, coeff)

    # image(sym) * sum_key d(coeff)/d(sym) key
    by_field: Dict[FormalSymbol, Dict[Key, sympy.Expr]] = {}
    for key, coeff in e.terms.items():
        for sym in coeff.free_symbols:
            field = _REGISTRY.get(sym)
            if field is not None:
                by_field.setdefault(field, {})[key] = sympy.diff(coeff, sym)
        for pos, atom in enumerate(key):
            if isinstance(atom, OddGenerator):
                continue
            image = rule(atom)
            if image is None:
                continue
            left = GrassmannExpr._from_canonical({key[:pos]: coeff})
            right = GrassmannExpr._from_canonical(
                {key[pos + 1 :]: sympy.Integer(1)}
            )
            _collect(reduce(left) * reduce(image) * right)

    for field, partials in by_field.items():
        image = rule(field)
        if image is None:
            continue
        _collect(reduce(image) * reduce(GrassmannExpr(partials)))
    return GrassmannExpr._from_canonical(acc)


def x_symbol(M: int, dots: int = 0) -> FormalSymbol:
    """Bosonic coordinate x^M."""
    return FormalSymbol("x", (M,), dots=dots)


def psi_symbol(M: int, dots: int = 0) -> FormalSymbol:
    """Fermionic partner psi^M."""
    return FormalSymbol("psi", (M,), dots=dots, odd=True)


TIME = FormalSymbol("t")


@lru_cache(maxsize=None)
def _dt_rule(field: FormalSymbol) -> Optional[GrassmannExpr]:
    if field == TIME:
        return GrassmannExpr.scalar(1)
    if field.dim:
        out = GrassmannExpr()
        for L in range(1, field.dim + 1):
            xdot = GrassmannExpr.atom(x_symbol(L, 1))
            out = out + xdot * GrassmannExpr.atom(field.with_partial(L))
        return out
    return GrassmannExpr.atom(field.dotted())


def time_derivative(e: GrassmannExpr, order: int = 1) -> GrassmannExpr:
    """d/dt acting on the component fields."""
    for _ in range(order):
        e = derivation(e, _dt_rule)
    return e


def spatial_derivative(e: GrassmannExpr, k: int) -> GrassmannExpr:
    """d/dx^k acting on functions of x (symbols with dim > 0)."""
    return derivation(
        e,
        lambda f: GrassmannExpr.atom(f.with_partial(k)) if f.dim else None,
    )


def _replacement(atom: Atom, mapping: dict, dots: bool):
    if atom in mapping:
        return GrassmannExpr._coerce(mapping[atom])
    if (
        dots
        and isinstance(atom, FormalSymbol)
        and atom.dots
        and atom.undotted() in mapping
    ):
        base = GrassmannExpr._coerce(mapping[atom.undotted()])
        return time_derivative(base, atom.dots)
    return None


def substitute(
    e: GrassmannExpr, mapping: dict, dots: bool = True
) -> GrassmannExpr:
    """Replace generators or field symbols by expressions.

    Parameters
    ----------
    e : GrassmannExpr
        Expression to rewrite.
    mapping : dict
        Atom -> replacement (GrassmannExpr, atom or scalar). Replacements of
        odd atoms must be odd.
    dots : bool, optional
        Also replace time derivatives of a mapped field by the time
        derivatives of its replacement, by default True.

    Returns
    -------
    GrassmannExpr
        The rewritten expression.

    """
    _type_defence(e, "e", GrassmannExpr)
    _type_defence(mapping, "mapping", dict)
    out = GrassmannExpr()
    for key, coeff in e.terms.items():
        syms = []
        images = []
        for sym in coeff.free_symbols:
            field = _REGISTRY.get(sym)
            if field is None:
                continue
            image = _replacement(field, mapping, dots)
            if image is not None:
                syms.append(sym)
                images.append(image)
        if syms:
            poly = sympy.Poly(coeff, *syms)
            term = GrassmannExpr()
            for powers, c in poly.terms():
                piece = GrassmannExpr.scalar(c.as_expr())
                for image, power in zip(images, powers):
                    piece = piece * image**power
                term = term + piece
        else:
            term = GrassmannExpr.scalar(coeff)
        for atom in key:
            image = _replacement(atom, mapping, dots)
            term = term * (image if image is not None else atom)
        out = out + term
    return out


def conjugate(e: GrassmannExpr) -> GrassmannExpr:
    """Grassmann complex conjugation.

    Coefficients are conjugated, odd factors reversed and every generator
    and field replaced by its partner (theta <-> thetabar, chi <-> chibar,
    epsilon <-> epsilonbar, z <-> zbar).
    """
    _type_defence(e, "e", GrassmannExpr)
    out = GrassmannExpr()
    for key, coeff in e.terms.items():
        swap = {}
        for sym in coeff.free_symbols:
            field = _REGISTRY.get(sym)
            if field is not None:
                swap[sym] = field.conjugate().symbol
        term = GrassmannExpr.scalar(sympy.conjugate(coeff).xreplace(swap))
        for atom in reversed(key):
            term = term * atom.conjugate()
        out = out + term
    return out


@dataclass(frozen=True)
class SuperDifferentialOperator:
    """Named superspace operator; call it on an expression to apply it."""

    name: str

    def __call__(self, e: GrassmannExpr) -> GrassmannExpr:
        return apply(self, e)


Q_N1 = SuperDifferentialOperator("Q_N1")
D_N1 = SuperDifferentialOperator("D_N1")
HAMILTONIAN = SuperDifferentialOperator("H")
Q_N2 = SuperDifferentialOperator("Q_N2")
QBAR_N2 = SuperDifferentialOperator("Qbar_N2")
D_N2 = SuperDifferentialOperator("D_N2")
DBAR_N2 = SuperDifferentialOperator("Dbar_N2")
DT = SuperDifferentialOperator("dt")
D_THETA = SuperDifferentialOperator("dtheta")
D_THETABAR = SuperDifferentialOperator("dthetabar")

_N1_OPS = {"Q_N1", "D_N1"}
_N2_OPS = {"Q_N2", "Qbar_N2", "D_N2", "Dbar_N2"}
OPERATOR_NAMES = sorted(
    _N1_OPS | _N2_OPS | {"H", "dt", "dtheta", "dthetabar"}
)


def _theta_times(theta: OddGenerator, e: GrassmannExpr) -> GrassmannExpr:
    return GrassmannExpr.atom(theta) * e


def supercharge_n1(e: GrassmannExpr, theta: OddGenerator = THETA):
    """Q = -i (d/dtheta + i theta d/dt) in the variable `theta`."""
    return -I * left_derivative(e, theta) + _theta_times(
        theta, time_derivative(e)
    )


def covariant_n1(e: GrassmannExpr, theta: OddGenerator = THETA):
    """D = d/dtheta - i theta d/dt in the variable `theta`."""
    return left_derivative(e, theta) - I * _theta_times(
        theta, time_derivative(e)
    )


def apply(op: SuperDifferentialOperator, e: GrassmannExpr) -> GrassmannExpr:
    """Apply a superspace operator.

    Parameters
    ----------
    op : SuperDifferentialOperator
        One of Q_N1, D_N1, H, Q_N2, Qbar_N2, D_N2, Dbar_N2, dt, dtheta,
        dthetabar.
    e : GrassmannExpr
        Operand.

    Returns
    -------
    GrassmannExpr
        The result in canonical form.

    Raises
    ------
    UnknownGenerator
        `e` contains superspace generators the operator does not act on.

    """
    _type_defence(op, "op", SuperDifferentialOperator)
    _type_defence(e, "e", GrassmannExpr)
    _check_item_in_iter(op.name, OPERATOR_NAMES, "op")
    known = None
    if op.name in _N1_OPS:
        known = {THETA}
    elif op.name in _N2_OPS:
        known = {THETA, THETABAR}
    if known is not None:
        foreign = e.generators() - known
        if foreign:
            raise UnknownGenerator(
                f"{op.name} does not act on generators "
                f"{sorted(g.name for g in foreign)}"
            )

    if op.name == "Q_N1":
        return supercharge_n1(e)
    if op.name == "D_N1":
        return covariant_n1(e)
    if op.name == "H":
        return -I * time_derivative(e)
    if op.name == "dt":
        return time_derivative(e)
    if op.name == "dtheta":
        return left_derivative(e, THETA)
    if op.name == "dthetabar":
        return left_derivative(e, THETABAR)

    dt_e = time_derivative(e)
    if op.name == "Q_N2":
        return -I / SQRT2 * (
            left_derivative(e, THETA) + I * _theta_times(THETABAR, dt_e)
        )
    if op.name == "Qbar_N2":
        return -I / SQRT2 * (
            left_derivative(e, THETABAR) + I * _theta_times(THETA, dt_e)
        )
    if op.name == "D_N2":
        return left_derivative(e, THETA) - I * _theta_times(THETABAR, dt_e)
    # Dbar_N2
    return -left_derivative(e, THETABAR) + I * _theta_times(THETA, dt_e)


def susy_variation(
    X: GrassmannExpr,
    params: Union[OddGenerator, Tuple[OddGenerator, OddGenerator]],
) -> GrassmannExpr:
    """Supersymmetry variation of a superfield.

    With one parameter eta this is the N=1 shift i eta Q X. With a pair
    (epsilon, epsilonbar) it is the N=2 shift
    i sqrt(2) (epsilon Q + epsilonbar Qbar) X.
    """
    _type_defence(X, "X", GrassmannExpr)
    if isinstance(params, OddGenerator):
        return I * GrassmannExpr.atom(params) * apply(Q_N1, X)
    eps, epsbar = params
    return I * SQRT2 * (
        GrassmannExpr.atom(eps) * apply(Q_N2, X)
        + GrassmannExpr.atom(epsbar) * apply(QBAR_N2, X)
    )


def n1_superfield(M: int, theta: OddGenerator = THETA) -> GrassmannExpr:
    """X^M = x^M + i theta psi^M."""
    return GrassmannExpr.atom(x_symbol(M)) + I * GrassmannExpr.atom(
        theta
    ) * GrassmannExpr.atom(psi_symbol(M))


Z_FIELD = FormalSymbol("z")
CHI_FIELD = FormalSymbol("chi", odd=True)
LAMBDA_FIELD = FormalSymbol("lambda", odd=True)
F_FIELD = FormalSymbol("F")


def generic_n2_superfield() -> GrassmannExpr:
    """z + i theta chi + i thetabar lambda + theta thetabar F."""
    theta = GrassmannExpr.atom(THETA)
    thetabar = GrassmannExpr.atom(THETABAR)
    return (
        GrassmannExpr.atom(Z_FIELD)
        + I * theta * GrassmannExpr.atom(CHI_FIELD)
        + I * thetabar * GrassmannExpr.atom(LAMBDA_FIELD)
        + theta * thetabar * GrassmannExpr.atom(F_FIELD)
    )


def chiral_superfield() -> GrassmannExpr:
    """Left chiral Z = z(t_L) + i sqrt(2) theta chi(t_L).

    Here t_L = t - i theta thetabar.
    """
    theta = GrassmannExpr.atom(THETA)
    thetabar = GrassmannExpr.atom(THETABAR)
    return (
        GrassmannExpr.atom(Z_FIELD)
        + I * SQRT2 * theta * GrassmannExpr.atom(CHI_FIELD)
        - I * theta * thetabar * GrassmannExpr.atom(Z_FIELD.dotted())
    )


def chiral_time() -> GrassmannExpr:
    """Left chiral time t_L = t - i theta thetabar."""
    return GrassmannExpr.atom(TIME) - I * GrassmannExpr.atom(
        THETA
    ) * GrassmannExpr.atom(THETABAR)


def chirality_check(e: GrassmannExpr) -> GrassmannExpr:
    """Dbar applied to `e`; zero iff `e` is left chiral."""
    return apply(DBAR_N2, e)


def chiral_split(Z: GrassmannExpr) -> Tuple[GrassmannExpr, GrassmannExpr]:
    """Split a left chiral superfield into two real N=1 superfields.

    Substituting theta = (theta1 + i theta2)/sqrt(2),
    z = (x^1 + i x^2)/sqrt(2) and chi = (psi^1 + i psi^2)/sqrt(2) gives
    Z = (X1 + i X2 + i theta2 (D X1 + i D X2)) / sqrt(2) with D the N=1
    covariant derivative in theta1.

    Parameters
    ----------
    Z : GrassmannExpr
        Left chiral superfield in the fields z, chi. Complex parameters must
        already be written through real ones.

    Returns
    -------
    tuple of GrassmannExpr
        (X1, X2) in the variable theta1.

    Raises
    ------
    NotChiral
        Dbar Z is nonzero, or the theta2 part does not match.

    """
    _type_defence(Z, "Z", GrassmannExpr)
    residual = chirality_check(Z)
    if not residual.is_zero():
        raise NotChiral(f"Dbar Z = {residual.to_text()}")

    theta1 = GrassmannExpr.atom(THETA1)
    theta2 = GrassmannExpr.atom(THETA2)
    split = substitute(
        Z,
        {
            THETA: (theta1 + I * theta2) / SQRT2,
            THETABAR: (theta1 - I * theta2) / SQRT2,
            Z_FIELD: (
                GrassmannExpr.atom(x_symbol(1))
                + I * GrassmannExpr.atom(x_symbol(2))
            )
            / SQRT2,
            CHI_FIELD: (
                GrassmannExpr.atom(psi_symbol(1))
                + I * GrassmannExpr.atom(psi_symbol(2))
            )
            / SQRT2,
        },
    )
    W = SQRT2 * lowest(split, [THETA2])
    W_conj = conjugate(W)
    X1 = (W + W_conj) / 2
    X2 = (W - W_conj) / (2 * I)

    rebuilt = (
        X1
        + I * X2
        + I
        * theta2
        * (covariant_n1(X1, THETA1) + I * covariant_n1(X2, THETA1))
    ) / SQRT2
    mismatch = split - rebuilt
    if not mismatch.is_zero():
        raise NotChiral(f"theta2 part does not match: {mismatch.to_text()}")
    return X1, X2


def component_rules(
    superfield_variation: Callable[[int], GrassmannExpr],
    dim: int,
    theta: OddGenerator = THETA,
) -> Rule:
    """Component transformation rule from a superfield variation.

    With X^M = x^M + i theta psi^M, delta x^M is the lowest component of
    `superfield_variation(M)` and delta psi^M = -i d/dtheta of it at
    theta = 0. Time derivatives and functions of x follow.
    """
    cache = {}

    def _base(M: int):
        if M not in cache:
            var = superfield_variation(M)
            cache[M] = (
                lowest(var, [theta]),
                -I * lowest(left_derivative(var, theta), [theta]),
            )
        return cache[M]

    def _image(field: FormalSymbol) -> Optional[GrassmannExpr]:
        if field.dim:
            out = GrassmannExpr()
            for L in range(1, field.dim + 1):
                out = out + _base(L)[0] * GrassmannExpr.atom(
                    field.with_partial(L)
                )
            return out
        if field.base == "x" and field.index[0] <= dim:
            return time_derivative(_base(field.index[0])[0], field.dots)
        if field.base == "psi" and field.index[0] <= dim:
            return time_derivative(_base(field.index[0])[1], field.dots)
        return None

    images = {}

    def rule(field: FormalSymbol) -> Optional[GrassmannExpr]:
        if field not in images:
            images[field] = _image(field)
        return images[field]

    return rule


def n1_rules(eta: OddGenerator, dim: int) -> Rule:
    """Component rule of the first supersymmetry i eta Q X^M."""
    eta_atom = GrassmannExpr.atom(eta)
    return component_rules(
        lambda M: I * eta_atom * supercharge_n1(n1_superfield(M)), dim
    )


def engine_identities() -> Dict[str, GrassmannExpr]:
    """Residuals of the defining identities of the superspace calculus.

    Every value is zero when the engine is consistent.
    """
    X = n1_superfield(1)
    Phi = generic_n2_superfield()
    Z = chiral_superfield()
    eta = GrassmannExpr.atom(ETA)

    def anti(a, b, e):
        return a(b(e)) + b(a(e))

    checks = {
        "D_N1^2 = -i dt": D_N1(D_N1(X)) + I * time_derivative(X),
        "Q_N1^2 = H": Q_N1(Q_N1(X)) - HAMILTONIAN(X),
        "{Q_N1, D_N1} = 0": anti(Q_N1, D_N1, X),
        "Q_N2^2 = 0": Q_N2(Q_N2(Phi)),
        "Qbar_N2^2 = 0": QBAR_N2(QBAR_N2(Phi)),
        "{Q_N2, Qbar_N2} = H": anti(Q_N2, QBAR_N2, Phi) - HAMILTONIAN(Phi),
        "D_N2^2 = 0": D_N2(D_N2(Phi)),
        "Dbar_N2^2 = 0": DBAR_N2(DBAR_N2(Phi)),
        "{D_N2, Q_N2} = 0": anti(D_N2, Q_N2, Phi),
        "{D_N2, Qbar_N2} = 0": anti(D_N2, QBAR_N2, Phi),
        "{Dbar_N2, Q_N2} = 0": anti(DBAR_N2, Q_N2, Phi),
        "{Dbar_N2, Qbar_N2} = 0": anti(DBAR_N2, QBAR_N2, Phi),
        "Dbar Z = 0": chirality_check(Z),
        "D conj(Z) = 0": D_N2(conjugate(Z)),
        "berezin d/dtheta = 0": berezin(left_derivative(Phi, THETA), THETA),
        "berezin thetabar theta": berezin(
            berezin(
                GrassmannExpr.atom(THETA)
                * GrassmannExpr.atom(THETABAR)
                * GrassmannExpr.atom(F_FIELD),
                THETA,
            ),
            THETABAR,
        )
        - GrassmannExpr.atom(F_FIELD),
        "delta x = i eta psi": lowest(susy_variation(X, ETA), [THETA])
        - I * eta * GrassmannExpr.atom(psi_symbol(1)),
        "delta psi = -eta xdot": -I
        * lowest(left_derivative(susy_variation(X, ETA), THETA), [THETA])
        + eta * GrassmannExpr.atom(x_symbol(1, 1)),
        "delta z = i sqrt2 eps chi": lowest(
            susy_variation(Z, (EPSILON, EPSILONBAR)), [THETA, THETABAR]
        )
        - I * SQRT2 * GrassmannExpr.atom(EPSILON) * GrassmannExpr.atom(
            CHI_FIELD
        ),
        "delta chi = -sqrt2 epsbar zdot": (
            lowest(
                left_derivative(
                    susy_variation(Z, (EPSILON, EPSILONBAR)), THETA
                ),
                [THETA, THETABAR],
            )
            / (I * SQRT2)
        )
        + SQRT2
        * GrassmannExpr.atom(EPSILONBAR)
        * GrassmannExpr.atom(Z_FIELD.dotted()),
        "delta t_L = 2i epsbar theta": susy_variation(
            chiral_time(), (EPSILON, EPSILONBAR)
        )
        - 2 * I * GrassmannExpr.atom(EPSILONBAR) * GrassmannExpr.atom(THETA),
    }

    X1, X2 = chiral_split(Z)
    real = substitute(
        susy_variation(Z, (EPSILON, EPSILONBAR)),
        {EPSILON: eta / SQRT2, EPSILONBAR: eta / SQRT2},
    )
    dX1, dX2 = chiral_split(real)
    checks["real epsilon: delta X1 = i eta Q X1"] = dX1 - I * eta * (
        supercharge_n1(X1, THETA1)
    )
    checks["real epsilon: delta X2 = i eta Q X2"] = dX2 - I * eta * (
        supercharge_n1(X2, THETA1)
    )
    etat = GrassmannExpr.atom(ETA_TILDE)
    imaginary = substitute(
        susy_variation(Z, (EPSILON, EPSILONBAR)),
        {EPSILON: I * etat / SQRT2, EPSILONBAR: -I * etat / SQRT2},
    )
    tX1, tX2 = chiral_split(imaginary)
    checks["imaginary epsilon: delta X1 = -etat D X2"] = tX1 + etat * (
        covariant_n1(X2, THETA1)
    )
    checks["imaginary epsilon: delta X2 = etat D X1"] = tX2 - etat * (
        covariant_n1(X1, THETA1)
    )
    return checks
