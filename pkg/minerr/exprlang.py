"""A small arithmetic expression language for scenario signals.

Expressions are real-valued and may reference the time ``t``, the outputs
``y1..yp`` and the inputs ``u1..uq``. Operators are ``+ - * / ^`` with unary
minus, and the functions ``sin, cos, exp, abs, min, max``. Precedence from
loosest to tightest: ``+ -``, ``* /``, unary ``-``, ``^``. ``^`` is right
associative, so ``2^3^2`` is 512 and ``-2^2`` is -4.
"""

# external imports
import math
import re
from dataclasses import dataclass

import numpy as np


class ParseError(ValueError):
    """Raised on malformed expression source.

    Attributes
    ----------
    offset : int
        Byte offset into the source where the error was detected.
    """

    def __init__(self, message, offset):
        super().__init__("{} (at offset {})".format(message, offset))
        self.message = message
        self.offset = offset


class EvalError(ArithmeticError):
    """Raised when an expression evaluates to a non-finite value or divides
    by zero.

    Attributes
    ----------
    t : float or None
        The time of evaluation, when known.
    """

    def __init__(self, message, t=None):
        if t is not None:
            message = "{} (at t={:.6g})".format(message, t)
        super().__init__(message)
        self.t = t


# function name -> (minimum arity, maximum arity or None, implementation)
FUNCTIONS = {
    "sin": (1, 1, lambda a: math.sin(a[0])),
    "cos": (1, 1, lambda a: math.cos(a[0])),
    "exp": (1, 1, lambda a: math.exp(a[0])),
    "abs": (1, 1, lambda a: abs(a[0])),
    "min": (2, None, min),
    "max": (2, None, max),
}

# largest integer exponent evaluated by repeated multiplication.
_MAX_INTEGER_POWER = 64


@dataclass(frozen=True)
class EvalContext:
    """The point an expression is evaluated at.

    Attributes
    ----------
    t : float
        The time (seconds).
    y : tuple
        The plant outputs y1..yp.
    u : tuple
        The plant inputs u1..uq.
    """

    t: float = 0.0
    y: tuple = ()
    u: tuple = ()


class Expr:
    """Base class of the expression tree. Nodes are immutable."""

    def evaluate(self, t, y, u):
        raise NotImplementedError

    def variables(self):
        raise NotImplementedError

    def __call__(self, ctx):
        return evaluate(self, ctx)


@dataclass(frozen=True)
class Number(Expr):
    value: float

    def evaluate(self, t, y, u):
        return self.value

    def variables(self):
        return frozenset()

    def __str__(self):
        # repr of a float round-trips exactly; negative literals print as
        # (-x), which the parser folds back into one literal.
        if math.copysign(1.0, self.value) < 0:
            return "({})".format(repr(float(self.value)))
        return repr(float(self.value))


@dataclass(frozen=True)
class Variable(Expr):
    name: str

    def evaluate(self, t, y, u):
        if self.name == "t":
            return t
        index = int(self.name[1:]) - 1
        if self.name[0] == "y":
            return y[index]
        return u[index]

    def variables(self):
        return frozenset([self.name])

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Negate(Expr):
    operand: Expr

    def evaluate(self, t, y, u):
        return -self.operand.evaluate(t, y, u)

    def variables(self):
        return self.operand.variables()

    def __str__(self):
        if isinstance(self.operand, Number):
            return "(-({}))".format(self.operand)
        return "(-{})".format(self.operand)


@dataclass(frozen=True)
class BinaryOp(Expr):
    op: str
    left: Expr
    right: Expr

    def evaluate(self, t, y, u):
        a = self.left.evaluate(t, y, u)
        b = self.right.evaluate(t, y, u)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if b == 0:
                raise EvalError("division by zero")
            return a / b
        return _power(a, b)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return "({} {} {})".format(self.left, self.op, self.right)


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple

    def evaluate(self, t, y, u):
        values = [arg.evaluate(t, y, u) for arg in self.args]
        try:
            return FUNCTIONS[self.func][2](values)
        except OverflowError as err:
            raise EvalError("overflow in {}()".format(self.func)) from err
        except ValueError as err:
            raise EvalError("{}() of a non-finite argument".format(self.func)) from err

    def variables(self):
        return frozenset().union(*(arg.variables() for arg in self.args))

    def __str__(self):
        return "{}({})".format(self.func, ", ".join(str(arg) for arg in self.args))


def _power(base, exponent):
    if math.isfinite(exponent) and exponent == int(exponent):
        n = int(exponent)

        # integer fast path keeps e.g. y^3 a plain product.
        if abs(n) <= _MAX_INTEGER_POWER:
            result = 1.0
            for _ in range(abs(n)):
                result *= base
            if n < 0:
                if result == 0:
                    raise EvalError("division by zero in negative power")
                result = 1.0 / result
            return result

        try:
            magnitude = math.pow(abs(base), n)
        except OverflowError as err:
            raise EvalError("overflow in power") from err
        except ValueError as err:
            raise EvalError("division by zero in negative power") from err
        return -magnitude if base < 0 and n % 2 else magnitude

    if base > 0:
        try:
            return math.exp(exponent * math.log(base))
        except OverflowError as err:
            raise EvalError("overflow in power") from err
    if base == 0 and exponent > 0:
        return 0.0
    raise EvalError("power of non-positive base {} to non-integer exponent".format(base))


#############################################################################
# tokenizer
#############################################################################

_TOKEN_PATTERN = re.compile(
    r"""
    (?P<space>\s+)
    |(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?[\w.]*)
    |(?P<name>[A-Za-z_]\w*)
    |(?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)

_VALID_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z")
_VARIABLE = re.compile(r"(?:t|[yu][1-9]\d*)\Z")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(src):
    tokens = []
    position = 0
    while position < len(src):
        match = _TOKEN_PATTERN.match(src, position)
        if match is None:
            raise ParseError("unexpected character {!r}".format(src[position]), position)
        kind = match.lastgroup
        text = match.group()
        if kind == "number" and not _VALID_NUMBER.match(text):
            raise ParseError("malformed number {!r}".format(text), position)
        if kind != "space":
            tokens.append(_Token(kind, text, position))
        position = match.end()
    tokens.append(_Token("end", "", len(src)))
    return tokens


#############################################################################
# parser
#############################################################################

# binding powers.
_INFIX = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_UNARY_MINUS = 25


class _Parser:
    def __init__(self, src, p=None, q=None):
        self.tokens = _tokenize(src)
        self.position = 0
        self.p = p
        self.q = q

    @property
    def token(self):
        return self.tokens[self.position]

    def advance(self):
        token = self.token
        self.position += 1
        return token

    def expect(self, text):
        if self.token.text != text:
            found = self.token.text or "end of input"
            raise ParseError("expected {!r}, found {!r}".format(text, found), self.token.offset)
        return self.advance()

    def parse(self):
        expr = self.expression(0)
        if self.token.kind != "end":
            raise ParseError("unexpected {!r}".format(self.token.text), self.token.offset)
        return expr

    def expression(self, rbp):
        left = self.prefix()
        while self.token.kind == "op" and self.token.text in _INFIX and rbp < _INFIX[self.token.text]:
            op = self.advance().text
            lbp = _INFIX[op]
            # right associative power binds its right operand one level looser.
            right = self.expression(lbp - 1 if op == "^" else lbp)
            left = BinaryOp(op, left, right)
        return left

    def prefix(self):
        token = self.advance()

        if token.kind == "number":
            return Number(float(token.text))

        if token.kind == "name":
            if token.text in FUNCTIONS:
                return self.call(token)
            return self.variable(token)

        if token.text == "-":
            # a minus directly on a literal is a negative literal, unless the
            # literal is the base of a power (-2^2 is -4).
            if self.token.kind == "number" and self.tokens[self.position + 1].text != "^":
                return Number(-float(self.advance().text))
            return Negate(self.expression(_UNARY_MINUS))

        if token.text == "(":
            expr = self.expression(0)
            self.expect(")")
            return expr

        if token.kind == "end":
            raise ParseError("unexpected end of input", token.offset)
        raise ParseError("unexpected {!r}".format(token.text), token.offset)

    def call(self, token):
        self.expect("(")
        args = [self.expression(0)]
        while self.token.text == ",":
            self.advance()
            args.append(self.expression(0))
        self.expect(")")

        lo, hi, _ = FUNCTIONS[token.text]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ParseError(
                "{}() takes {} argument(s), got {}".format(
                    token.text, lo if hi == lo else "{} or more".format(lo), len(args)
                ),
                token.offset,
            )
        return Call(token.text, tuple(args))

    def variable(self, token):
        name = token.text
        if not _VARIABLE.match(name):
            raise ParseError("unknown identifier {!r}".format(name), token.offset)
        if name != "t":
            index = int(name[1:])
            bound = self.p if name[0] == "y" else self.q
            if bound is not None and index > bound:
                raise ParseError("unknown identifier {!r}".format(name), token.offset)
        return Variable(name)


def parse(src, p=None, q=None):
    """Parses expression source into an expression tree.

    Parameters
    ----------
    src : str
        The expression source, e.g. "2*cos(t)/(1+t)".
    p : int, optional
        Number of outputs. If given, references to y<j> with j > p are
        rejected. Default is None.
    q : int, optional
        Number of inputs. If given, references to u<j> with j > q are
        rejected. Default is None.

    Returns
    ----------
    minerr.exprlang.Expr
        The expression tree.
    """

    if not isinstance(src, str):
        raise TypeError("Expression source must be a string.")
    return _Parser(src, p, q).parse()


def evaluate(expr, ctx):
    """Evaluates an expression in double precision.

    Parameters
    ----------
    expr : minerr.exprlang.Expr
        The expression tree.
    ctx : minerr.exprlang.EvalContext
        The time, outputs and inputs.

    Returns
    ----------
    float
        The value. Never NaN or infinite; such results raise EvalError.
    """

    try:
        value = expr.evaluate(ctx.t, ctx.y, ctx.u)
    except IndexError as err:
        raise EvalError("variable outside the context dimensions", ctx.t) from err
    except EvalError as err:
        raise EvalError(str(err), ctx.t) from err

    if not math.isfinite(value):
        raise EvalError("non-finite result", ctx.t)
    return float(value)


class SignalVector:
    """A vector-valued signal made of one expression per component.

    Attributes
    ----------
    exprs : tuple
        The component expressions.
    sources : tuple
        The printed form of each component.

    Methods
    ----------
    __call__(t, y=(), u=())
        Evaluates every component and returns a numpy.ndarray.
    depends_only_on_time()
        Whether no component references y or u.
    """

    def __init__(self, exprs):
        """
        Parameters
        ----------
        exprs : list
            A list of minerr.exprlang.Expr instances.
        """
        self.exprs = tuple(exprs)
        if len(self.exprs) == 0:
            raise ValueError("A signal vector needs at least one component.")
        self.sources = tuple(str(e) for e in self.exprs)

    @classmethod
    def from_strings(cls, strings, p=None, q=None, time_only=False):
        """
        Parameters
        ----------
        strings : list
            Expression sources, one per component.
        p, q : int, optional
            Output and input dimensions used to check variable references.
        time_only : bool, optional
            Reject references to y and u. Default is False.

        Returns
        ----------
        minerr.exprlang.SignalVector
        """
        if time_only:
            p = q = 0
        return cls([parse(s, p, q) for s in strings])

    @classmethod
    def zeros(cls, dim):
        return cls([Number(0.0)] * dim)

    @property
    def dim(self):
        return len(self.exprs)

    def variables(self):
        return frozenset().union(*(e.variables() for e in self.exprs))

    def depends_only_on_time(self):
        return self.variables() <= {"t"}

    def __call__(self, t, y=(), u=()):
        ctx = EvalContext(float(t), tuple(y), tuple(u))
        return np.array([evaluate(e, ctx) for e in self.exprs])

    def __len__(self):
        return len(self.exprs)

    def __eq__(self, other):
        return isinstance(other, SignalVector) and other.exprs == self.exprs

    def __hash__(self):
        return hash(self.exprs)

    def __repr__(self):
        return "SignalVector({})".format(list(self.sources))
