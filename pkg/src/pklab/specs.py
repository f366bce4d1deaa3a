"""Parsers for the measure, test-function and theta-grid spec strings.

Measure grammar::

    gaussian(dim=N)
    product(FACTOR, FACTOR, ..., [dim=N])
    FACTOR := MARGINAL | MARGINAL x K | MARGINAL × K
    MARGINAL := standard_normal | hermite6(delta=D) | gaussian_var(s1, ..., sk)

``gaussian_var(s1, ..., sk)`` expands to k marginals with the given variances.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Tuple


from .errors import SpecError
from .measure import (
    DEFAULT_NODE_BUDGET,
    MarginalSpec,
    QuadratureMeasure,
    build_gauss_hermite,
    build_product,
    max_delta_h6,
)
from .polyfield import Polynomial
from .stein import ScalarField
from .zolotarev import CosineTest, default_theta_grid

_TOKEN = re.compile(r"\s*(?:(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[(),=×*]))")


def _tokenize(text):
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = text[pos:].strip().split()[0] if text[pos:].strip() else text[pos:]
            raise SpecError(f"unexpected token {bad!r} in {text!r}", bad)
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] is None:
            raise SpecError(f"unexpected end of spec {self.text!r}", "<end>")
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind
            raise SpecError(f"expected {want!r}, got token {tok[1]!r} in {self.text!r}", tok[1])
        self.i += 1
        return tok[1]

    def at(self, value):
        return self.peek()[1] == value

    def number(self):
        return float(self.take("num"))

    def integer(self):
        tok = self.take("num")
        try:
            return int(tok)
        except ValueError:
            raise SpecError(f"expected an integer, got token {tok!r}", tok) from None

    def done(self):
        tok = self.peek()
        if tok[0] is not None:
            raise SpecError(f"unexpected trailing token {tok[1]!r} in {self.text!r}", tok[1])


@dataclass(frozen=True)
class MeasureBuilder:
    """Deferred measure construction from a parsed spec."""

    kind: str
    dim: int
    marginals: Optional[Tuple[MarginalSpec, ...]] = None

    def build(self, m: int, node_budget: int = DEFAULT_NODE_BUDGET) -> QuadratureMeasure:
        if self.kind == "gaussian":
            return build_gauss_hermite(self.dim, m, node_budget)
        return build_product(self.marginals, m, node_budget)

    def to_spec(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian(dim={self.dim})"
        parts = []
        for s in self.marginals:
            if s.kind == "standard_normal":
                parts.append("standard_normal")
            elif s.kind == "hermite6":
                parts.append(f"hermite6(delta={s.param!r})")
            else:
                parts.append(f"gaussian_var({s.param!r})")
        return f"product({', '.join(parts)})"

    @classmethod
    def from_record(cls, record):
        """Rebuild from a measure JSON dump (see measure.measure_record)."""
        if record["kind"] == "gaussian":
            return cls("gaussian", record["dim"])
        margs = tuple(MarginalSpec.from_dict(d) for d in record["params"]["marginals"])
        return cls("product", len(margs), margs)


def _marginals(p: _Parser) -> List[MarginalSpec]:
    name = p.take("name")
    if name == "standard_normal":
        out = [MarginalSpec.standard_normal()]
    elif name == "hermite6":
        p.take(value="(")
        if p.peek()[0] == "name":
            key = p.take("name")
            if key != "delta":
                raise SpecError(f"unknown hermite6 parameter {key!r}", key)
            p.take(value="=")
        delta = p.number()
        p.take(value=")")
        bound = max_delta_h6()
        if abs(delta) >= bound:
            raise SpecError(
                f"hermite6 delta={delta} out of range: need |delta| < {bound:.6g} "
                "for a nonnegative density", str(delta))
        out = [MarginalSpec.hermite6(delta)]
    elif name == "gaussian_var":
        p.take(value="(")
        vals = [p.number()]
        while p.at(","):
            p.take(value=",")
            vals.append(p.number())
        p.take(value=")")
        for v in vals:
            if not v > 0:
                raise SpecError(f"gaussian_var variance {v} must be > 0", str(v))
        out = [MarginalSpec.gaussian_var(v) for v in vals]
    else:
        raise SpecError(f"unknown marginal kind {name!r}", name)
    if p.at("x") or p.at("×") or p.at("*"):
        p.take()
        k = p.integer()
        if k < 1:
            raise SpecError(f"repeat count {k} must be >= 1", str(k))
        out = out * k
    return out


def parse_measure_spec(text: str) -> MeasureBuilder:
    # "x" doubles as the repeat operator; split it off glued numbers like "x2".
    norm = re.sub(r"\)\s*x\s*(\d)", r") x \1", text)
    norm = re.sub(r"(standard_normal)\s*x\s*(\d)", r"\1 x \2", norm)
    p = _Parser(norm)
    head = p.take("name")
    if head == "gaussian":
        p.take(value="(")
        key = p.take("name")
        if key != "dim":
            raise SpecError(f"unknown gaussian parameter {key!r}", key)
        p.take(value="=")
        n = p.integer()
        p.take(value=")")
        p.done()
        if n < 2:
            raise SpecError(f"dim={n} must be >= 2", str(n))
        return MeasureBuilder("gaussian", n)
    if head != "product":
        raise SpecError(f"unknown measure kind {head!r}", head)
    p.take(value="(")
    margs: List[MarginalSpec] = []
    dim = None
    while True:
        if p.at("dim"):
            p.take()
            p.take(value="=")
            dim = p.integer()
        else:
            margs.extend(_marginals(p))
        if p.at(","):
            p.take()
            continue
        break
    p.take(value=")")
    p.done()
    if dim is not None and dim != len(margs):
        raise SpecError(f"dim={dim} does not match {len(margs)} marginals", str(dim))
    if len(margs) < 2:
        raise SpecError("a product needs at least 2 marginals", text)
    return MeasureBuilder("product", len(margs), tuple(margs))


def _parse_poly(expr: str, dim: Optional[int]) -> Polynomial:
    expr = expr.replace(" ", "").replace("**", "^")
    if not expr:
        raise SpecError("empty polynomial", expr)
    pieces = [p for p in re.split(r"(?<![eE])(?=[+-])", expr) if p]
    terms = []
    top = 0
    for piece in pieces:
        sign = -1.0 if piece.startswith("-") else 1.0
        body = piece.lstrip("+-")
        coef = sign
        exps = {}
        for factor in body.split("*"):
            m = re.fullmatch(r"x(\d+)(?:\^(\d+))?", factor)
            if m:
                k = int(m.group(1))
                if k < 1:
                    raise SpecError(f"variable index must start at 1: {factor!r}", factor)
                exps[k] = exps.get(k, 0) + int(m.group(2) or 1)
                top = max(top, k)
                continue
            try:
                coef *= float(factor)
            except ValueError:
                raise SpecError(f"cannot parse polynomial factor {factor!r}", factor) from None
        terms.append((coef, exps))
    n = dim or max(top, 2)
    if top > n:
        raise SpecError(f"variable x{top} exceeds dim={n}", f"x{top}")
    out = Polynomial.zero(n)
    for coef, exps in terms:
        e = [0] * n
        for k, v in exps.items():
            e[k - 1] = v
        out = out + Polynomial(n, {tuple(e): coef})
    return out


def parse_f_spec(text: str, dim: Optional[int] = None) -> ScalarField:
    """``cosine(t1, ..., tn)`` or ``poly(<expression in x1..xn>)``."""
    m = re.fullmatch(r"\s*(\w+)\((.*)\)\s*", text)
    if not m:
        raise SpecError(f"cannot parse test function {text!r}", text)
    kind, body = m.group(1), m.group(2)
    if kind == "cosine":
        try:
            theta = [float(v) for v in body.split(",")]
        except ValueError:
            raise SpecError(f"bad cosine frequency {body!r}", body) from None
        if dim is not None and len(theta) != dim:
            raise SpecError(f"cosine frequency has {len(theta)} entries, dim is {dim}", body)
        if not any(theta):
            raise SpecError("cosine frequency must be nonzero", body)
        return ScalarField.cosine(theta, label=text.strip())
    if kind == "poly":
        return ScalarField.from_polynomial(_parse_poly(body, dim), label=text.strip())
    raise SpecError(f"unknown test function kind {kind!r}", kind)


def parse_theta_grid(text: str, dim: int) -> List[CosineTest]:
    """``log(lo,hi,count)`` magnitudes along each axis and the diagonal."""
    m = re.fullmatch(r"\s*log\(\s*([^,]+),\s*([^,]+),\s*([^,)]+)\)\s*", text)
    if not m:
        raise SpecError(f"cannot parse theta grid {text!r}", text)
    try:
        lo, hi, count = float(m.group(1)), float(m.group(2)), int(m.group(3))
    except ValueError:
        raise SpecError(f"bad theta grid numbers in {text!r}", text) from None
    if not (0 < lo <= hi) or count < 1:
        raise SpecError(f"theta grid needs 0 < lo <= hi and count >= 1: {text!r}", text)
    return default_theta_grid(dim, count, lo, hi)


def parse_deltas(text: str) -> List[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        bad = next(v for v in text.split(",") if not _is_float(v))
        raise SpecError(f"bad delta {bad!r}", bad) from None
    if not vals:
        raise SpecError("no deltas given", text)
    return vals


def _is_float(v):
    try:
        float(v)
        return True
    except ValueError:
        return False
