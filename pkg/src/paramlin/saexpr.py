"""Continuous semialgebraic coefficient functions and problem files.

Expressions are small immutable trees built from rational constants,
coordinate selectors, ``+ - *``, ``abs``, ``sqrt`` (of a nonnegative
argument) and ``max``/``min``.  Every tree in this class is continuous and
semialgebraic, so nothing downstream has to check that property.

Evaluation is vectorised: a point is an array whose last axis holds the
coordinates, so ``evaluate(e, X)`` with ``X`` of shape ``(N, n)`` returns
``N`` values.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

TOL_EVAL = 1e-12


class ExprDomainError(ValueError):
    """A ``sqrt`` argument fell below ``-tol_eval``."""


class ProblemFormatError(ValueError):
    """Malformed problem document or expression string."""


class Expr:
    """Base class for expression nodes."""

    def evaluate(self, x, tol_eval: float = TOL_EVAL):
        raise NotImplementedError

    def max_coordinate(self) -> int:
        """Largest 1-based coordinate index used (0 if none)."""
        raise NotImplementedError

    def __add__(self, other):
        return Add(self, _wrap(other))

    def __radd__(self, other):
        return Add(_wrap(other), self)

    def __sub__(self, other):
        return Sub(self, _wrap(other))

    def __rsub__(self, other):
        return Sub(_wrap(other), self)

    def __mul__(self, other):
        return Mul(self, _wrap(other))

    def __rmul__(self, other):
        return Mul(_wrap(other), self)

    def __neg__(self):
        return Mul(Const(Fraction(-1)), self)


def _wrap(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(Fraction(value))


@dataclass(frozen=True, eq=True, repr=False)
class Const(Expr):
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))
        object.__setattr__(self, "_float", float(self.value))

    def evaluate(self, x, tol_eval=TOL_EVAL):
        x = np.asarray(x, dtype=float)
        if x.ndim <= 1:
            return self._float
        return np.full(x.shape[:-1], self._float)

    def max_coordinate(self):
        return 0

    def __repr__(self):
        return str(self.value)


@dataclass(frozen=True, eq=True, repr=False)
class Coord(Expr):
    index: int  # 1-based, as in the file format

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"coordinate index must be >= 1, got {self.index}")

    def evaluate(self, x, tol_eval=TOL_EVAL):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] < self.index:
            raise IndexError(f"x{self.index} used with a {x.shape[-1]}-dimensional point")
        v = x[..., self.index - 1]
        return float(v) if np.ndim(v) == 0 else v

    def max_coordinate(self):
        return self.index

    def __repr__(self):
        return f"x{self.index}"


@dataclass(frozen=True, eq=True, repr=False)
class _Binary(Expr):
    left: Expr
    right: Expr

    symbol = "?"

    def max_coordinate(self):
        return max(self.left.max_coordinate(), self.right.max_coordinate())

    def __repr__(self):
        return f"({self.left!r} {self.symbol} {self.right!r})"


class Add(_Binary):
    symbol = "+"

    def evaluate(self, x, tol_eval=TOL_EVAL):
        return self.left.evaluate(x, tol_eval) + self.right.evaluate(x, tol_eval)


class Sub(_Binary):
    symbol = "-"

    def evaluate(self, x, tol_eval=TOL_EVAL):
        return self.left.evaluate(x, tol_eval) - self.right.evaluate(x, tol_eval)


class Mul(_Binary):
    symbol = "*"

    def evaluate(self, x, tol_eval=TOL_EVAL):
        return self.left.evaluate(x, tol_eval) * self.right.evaluate(x, tol_eval)


class Max(_Binary):
    def evaluate(self, x, tol_eval=TOL_EVAL):
        return _scalar(np.maximum(self.left.evaluate(x, tol_eval), self.right.evaluate(x, tol_eval)))

    def __repr__(self):
        return f"max({self.left!r}, {self.right!r})"


class Min(_Binary):
    def evaluate(self, x, tol_eval=TOL_EVAL):
        return _scalar(np.minimum(self.left.evaluate(x, tol_eval), self.right.evaluate(x, tol_eval)))

    def __repr__(self):
        return f"min({self.left!r}, {self.right!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Abs(Expr):
    arg: Expr

    def evaluate(self, x, tol_eval=TOL_EVAL):
        return _scalar(np.abs(self.arg.evaluate(x, tol_eval)))

    def max_coordinate(self):
        return self.arg.max_coordinate()

    def __repr__(self):
        return f"abs({self.arg!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Sqrt(Expr):
    arg: Expr

    def evaluate(self, x, tol_eval=TOL_EVAL):
        a = np.asarray(self.arg.evaluate(x, tol_eval), dtype=float)
        if np.any(a < -tol_eval):
            worst = float(np.min(a))
            raise ExprDomainError(f"negative argument {worst:.3e} in {self!r}")
        return _scalar(np.sqrt(np.maximum(a, 0.0)))

    def max_coordinate(self):
        return self.arg.max_coordinate()

    def __repr__(self):
        return f"sqrt({self.arg!r})"


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def evaluate(e: Expr, x, tol_eval: float = TOL_EVAL):
    """Value of ``e`` at ``x`` (a point, or a stack of points on the last axis)."""
    return e.evaluate(x, tol_eval)


@dataclass(frozen=True)
class MatrixFunction:
    """``r x s`` grid of expressions, the coefficient matrix ``A(x)``."""

    entries: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.entries)
        if not rows or any(len(row) != len(rows[0]) for row in rows) or not rows[0]:
            raise ValueError("matrix entries must form a non-empty rectangular grid")
        object.__setattr__(self, "entries", rows)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]


@dataclass(frozen=True)
class VectorFunction:
    """Right-hand side ``gamma(x)``."""

    entries: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ValueError("vector must have at least one entry")

    @property
    def dim(self) -> int:
        return len(self.entries)


def eval_matrix(M: MatrixFunction, x, tol_eval: float = TOL_EVAL) -> np.ndarray:
    """Entrywise evaluation; ``x`` of shape ``(n,)`` gives ``(r, s)``, ``(N, n)`` gives ``(N, r, s)``."""
    x = np.asarray(x, dtype=float)
    lead = x.shape[:-1]
    out = np.empty(lead + M.shape)
    for i, row in enumerate(M.entries):
        for j, e in enumerate(row):
            try:
                out[..., i, j] = e.evaluate(x, tol_eval)
            except ExprDomainError as exc:
                raise ExprDomainError(f"A[{i + 1}][{j + 1}]: {exc}") from exc
    return out


def eval_vector(v: VectorFunction, x, tol_eval: float = TOL_EVAL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape[:-1] + (v.dim,))
    for i, e in enumerate(v.entries):
        try:
            out[..., i] = e.evaluate(x, tol_eval)
        except ExprDomainError as exc:
            raise ExprDomainError(f"gamma[{i + 1}]: {exc}") from exc
    return out


@dataclass(frozen=True)
class Domain:
    """Box ``[lo, hi]`` optionally cut down by ``constraint(x) >= 0``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    constraint: Expr | None = None

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("domain lo/hi must be non-empty and of equal length")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("domain lo must not exceed hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, X, tol: float = 1e-12) -> np.ndarray | bool:
        X = np.asarray(X, dtype=float)
        inside = np.all((X >= np.array(self.lo) - tol) & (X <= np.array(self.hi) + tol), axis=-1)
        if self.constraint is not None:
            inside = inside & (np.asarray(self.constraint.evaluate(X)) >= -tol)
        return inside


@dataclass(frozen=True)
class Problem:
    """The parametric system ``A(x) phi(x) = gamma(x)`` for ``x`` in ``Q``."""

    A: MatrixFunction
    gamma: VectorFunction
    domain: Domain

    def __post_init__(self):
        if self.A.rows != self.gamma.dim:
            raise ProblemFormatError(
                f"dimension mismatch: A has {self.A.rows} rows but gamma has {self.gamma.dim} entries"
            )
        used = max(
            [e.max_coordinate() for row in self.A.entries for e in row]
            + [e.max_coordinate() for e in self.gamma.entries]
            + [self.domain.constraint.max_coordinate() if self.domain.constraint else 0]
        )
        if used > self.n:
            raise ProblemFormatError(f"x{used} used but ambient dimension is {self.n}")

    @property
    def n(self) -> int:
        return len(self.domain.lo)

    @property
    def r(self) -> int:
        return self.A.rows

    @property
    def s(self) -> int:
        return self.A.cols

    def A_at(self, x, tol_eval: float = TOL_EVAL) -> np.ndarray:
        return eval_matrix(self.A, x, tol_eval)

    def gamma_at(self, x, tol_eval: float = TOL_EVAL) -> np.ndarray:
        return eval_vector(self.gamma, x, tol_eval)

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "r": self.r,
            "s": self.s,
            "A": [[format_expr(e) for e in row] for row in self.A.entries],
            "gamma": [format_expr(e) for e in self.gamma.entries],
            "domain": {"lo": list(self.domain.lo), "hi": list(self.domain.hi)},
        }
        if self.domain.constraint is not None:
            d["domain"]["constraint"] = format_expr(self.domain.constraint)
        return d


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)
_FUNCS = {"abs": 1, "sqrt": 1, "max": 2, "min": 2}


def _tokenize(text: str):
    pos = 0
    tokens = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ProblemFormatError(f"unexpected character {text[pos]!r} at column {pos + 1}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    # expr  := term (('+'|'-') term)*
    # term  := unary ('*' unary)*
    # unary := '-' unary | power
    # power := atom ('^' INT)?
    # atom  := NUM ['/' NUM] | xK | func '(' expr {',' expr} ')' | '(' expr ')'

    def __init__(self, text: str, n: int | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n

    def error(self, msg, tok=None):
        tok = tok or self.tokens[self.i]
        return ProblemFormatError(f"{msg} at column {tok[2] + 1} in {self.text!r}")

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            raise self.error(f"expected {value!r}, found {tok[1] or 'end of input'!r}")
        self.i += 1
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected {self.peek()[1]!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            if self.peek()[1] == "/":
                raise self.error("'/' is only allowed between numeric literals")
            self.take()
            e = Mul(e, self.unary())
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            inner = self.unary()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Mul(Const(Fraction(-1)), inner)
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] != "^":
            return base
        self.take()
        tok = self.take()
        if tok[0] != "num" or not tok[1].isdigit():
            raise self.error("exponent must be a non-negative integer literal", tok)
        k = int(tok[1])
        if k == 0:
            return Const(Fraction(1))
        out = base
        for _ in range(k - 1):
            out = Mul(out, base)
        return out

    def atom(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "num":
            self.take()
            num = Fraction(value)
            if self.peek()[1] == "/":
                self.take()
                den_tok = self.take()
                if den_tok[0] != "num":
                    raise self.error("'/' is only allowed between numeric literals", den_tok)
                den = Fraction(den_tok[1])
                if den == 0:
                    raise self.error("zero denominator", den_tok)
                num = num / den
            return Const(num)
        if kind == "name":
            self.take()
            m = re.fullmatch(r"x([1-9][0-9]*)", value)
            if m:
                idx = int(m.group(1))
                if self.n is not None and idx > self.n:
                    raise self.error(f"coordinate {value} exceeds n={self.n}", tok)
                return Coord(idx)
            if value not in _FUNCS:
                raise self.error(f"unknown identifier {value!r}", tok)
            self.take("(")
            args = [self.expr()]
            while self.peek()[1] == ",":
                self.take()
                args.append(self.expr())
            self.take(")")
            arity = _FUNCS[value]
            if arity == 1:
                if len(args) != 1:
                    raise self.error(f"{value} takes one argument", tok)
                return Abs(args[0]) if value == "abs" else Sqrt(args[0])
            if len(args) < 2:
                raise self.error(f"{value} takes at least two arguments", tok)
            node = Max if value == "max" else Min
            out = args[0]
            for a in args[1:]:
                out = node(out, a)
            return out
        if value == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        raise self.error(f"unexpected {value or 'end of input'!r}", tok)


def parse_expr(text: str, n: int | None = None) -> Expr:
    """Parse an infix expression string such as ``"sqrt(x1^2 + x2^2) - 1/2"``."""
    if not isinstance(text, str):
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            return Const(Fraction(text))
        raise ProblemFormatError(f"expression must be a string, got {type(text).__name__}")
    return _Parser(text, n).parse()


def format_expr(e: Expr) -> str:
    return repr(e)


def parse_problem(document) -> Problem:
    """Build a :class:`Problem` from a JSON string or an already-decoded mapping."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"malformed JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ProblemFormatError("problem document must be a JSON object")
    for key in ("n", "A", "gamma", "domain"):
        if key not in document:
            raise ProblemFormatError(f"missing field {key!r}")
    n = document["n"]
    if not isinstance(n, int) or n < 1:
        raise ProblemFormatError("field 'n' must be a positive integer")

    A_raw = document["A"]
    if not isinstance(A_raw, list) or not A_raw or not all(isinstance(row, list) for row in A_raw):
        raise ProblemFormatError("field 'A' must be a non-empty array of arrays")
    r = document.get("r", len(A_raw))
    s = document.get("s", len(A_raw[0]) if A_raw[0] else 0)
    if len(A_raw) != r:
        raise ProblemFormatError(f"dimension mismatch: 'A' has {len(A_raw)} rows, r={r}")
    rows = []
    for i, row in enumerate(A_raw):
        if len(row) != s:
            raise ProblemFormatError(f"dimension mismatch: A row {i + 1} has {len(row)} entries, s={s}")
        rows.append(tuple(_parse_at(cell, n, f"A[{i + 1}][{j + 1}]") for j, cell in enumerate(row)))

    g_raw = document["gamma"]
    if not isinstance(g_raw, list):
        raise ProblemFormatError("field 'gamma' must be an array")
    if len(g_raw) != r:
        raise ProblemFormatError(f"dimension mismatch: 'gamma' has {len(g_raw)} entries, r={r}")
    gamma = tuple(_parse_at(cell, n, f"gamma[{i + 1}]") for i, cell in enumerate(g_raw))

    dom = document["domain"]
    if not isinstance(dom, dict) or "lo" not in dom or "hi" not in dom:
        raise ProblemFormatError("field 'domain' must have 'lo' and 'hi'")
    lo = [_parse_number(v, "domain.lo") for v in dom["lo"]]
    hi = [_parse_number(v, "domain.hi") for v in dom["hi"]]
    if len(lo) != n or len(hi) != n:
        raise ProblemFormatError(f"dimension mismatch: domain bounds must have length n={n}")
    constraint = None
    if dom.get("constraint") is not None:
        constraint = _parse_at(dom["constraint"], n, "domain.constraint")
    try:
        domain = Domain(tuple(lo), tuple(hi), constraint)
        return Problem(MatrixFunction(tuple(rows)), VectorFunction(gamma), domain)
    except ProblemFormatError:
        raise
    except ValueError as exc:
        raise ProblemFormatError(str(exc)) from exc


def _parse_at(cell, n, where):
    try:
        return parse_expr(cell, n)
    except ProblemFormatError as exc:
        raise ProblemFormatError(f"{where}: {exc}") from exc


def _parse_number(v, where) -> float:
    if isinstance(v, str):
        try:
            return float(Fraction(v))
        except (ValueError, ZeroDivisionError) as exc:
            raise ProblemFormatError(f"{where}: bad number {v!r}") from exc
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise ProblemFormatError(f"{where}: bad number {v!r}")


def load_problem(path) -> Problem:
    return parse_problem(Path(path).read_text())
