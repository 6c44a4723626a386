"""System-specification DSL: types, parser, validator and canonical serializer.

A document is line oriented::

    system "S1"
    node C kind=covariate dist=bernoulli(p=0.5)
    node A kind=exposure given=(C) dist=table{C=0: bernoulli(p=0.3); C=1: bernoulli(p=0.7)}
    node Y kind=outcome given=(A,C) dist=bernoulli(logit=-1, b_A=0.5, b_C=1)

The header may carry ``regime=experimental(A)`` for a system obtained by
intervening on ``A``.  ``#`` starts a comment.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, Sequence

KINDS = ("covariate", "exposure", "outcome", "frailty", "process", "death")
VARIABLE_KINDS = ("covariate", "exposure", "outcome", "frailty")
FAMILIES = (
    "bernoulli",
    "categorical",
    "gaussian",
    "exponential-hazard",
    "gamma-frailty",
    "linear-gaussian-step",
)
TABLE = "table"
COEF_PREFIX = "b_"

# allowed non-coefficient keys per family
_KEYS = {
    "bernoulli": {"p", "logit"},
    "categorical": {"p", "values"},
    "gaussian": {"mean", "var"},
    "exponential-hazard": {"rate"},
    "gamma-frailty": {"var"},
    "linear-gaussian-step": {"init", "init_sd", "drift", "sd"},
}
_LIST_KEYS = {"p": "categorical", "values": "categorical"}
_COEF_FAMILIES = {"bernoulli", "gaussian", "exponential-hazard", "linear-gaussian-step"}

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
ROW_SUM_TOL = 1e-12


class SpecError(ValueError):
    """A document or spec that cannot be turned into a valid system."""

    def __init__(self, message: str, diagnostics: Sequence["Diagnostic"] = ()):
        super().__init__(message)
        self.diagnostics = tuple(diagnostics)


class SpecSyntaxError(SpecError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col
        self.reason = message


@dataclass(frozen=True)
class Diagnostic:
    node: str
    rule: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.severity}: node {self.node}: {self.rule}: {self.message}"


Value = float | tuple[float, ...]


@dataclass(frozen=True)
class DistSpec:
    """A conditional distribution.

    ``params`` is a sorted tuple of ``(key, value)`` pairs; keys ``b_<parent>``
    are linear coefficients on parent values.  For ``family == "table"`` the
    distribution is given per parent-value pattern in ``rows``.
    """

    family: str
    params: tuple[tuple[str, Value], ...] = ()
    rows: tuple[tuple[tuple[float, ...], "DistSpec"], ...] = ()

    @classmethod
    def make(cls, family: str, **params) -> "DistSpec":
        return cls(family, _freeze_params(params))

    @classmethod
    def table(cls, rows: Mapping[tuple, "DistSpec"] | Iterable) -> "DistSpec":
        items = rows.items() if isinstance(rows, Mapping) else rows
        frozen = tuple((tuple(float(v) for v in pat), d) for pat, d in items)
        return cls(TABLE, (), frozen)

    @property
    def param(self) -> dict:
        return dict(self.params)

    def get(self, key: str, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    @property
    def coefficients(self) -> dict[str, float]:
        return {k[len(COEF_PREFIX):]: v for k, v in self.params if k.startswith(COEF_PREFIX)}

    def row(self, pattern: Sequence[float]) -> "DistSpec":
        key = tuple(float(v) for v in pattern)
        for pat, d in self.rows:
            if pat == key:
                return d
        raise KeyError(f"no table row for pattern {key}")


def _freeze_params(params: Mapping[str, object]) -> tuple[tuple[str, Value], ...]:
    out = []
    for k, v in params.items():
        if isinstance(v, (list, tuple)):
            out.append((k, tuple(float(x) for x in v)))
        else:
            out.append((k, float(v)))
    return tuple(sorted(out))


@dataclass(frozen=True)
class NodeSpec:
    name: str
    kind: str
    parents: tuple[str, ...]
    dist: DistSpec


@dataclass(frozen=True)
class SystemSpec:
    name: str
    nodes: tuple[NodeSpec, ...] = ()
    regime: str = "observational"
    intervened: tuple[str, ...] = field(default=())

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)

    def node(self, name: str) -> NodeSpec:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(f"unknown node {name}")

    def index(self, name: str) -> int:
        return self.names.index(name)

    def children(self, name: str) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes if name in n.parents)

    def of_kind(self, *kinds: str) -> tuple[NodeSpec, ...]:
        return tuple(n for n in self.nodes if n.kind in kinds)

    def ancestors(self, name: str) -> tuple[str, ...]:
        """Ancestors of ``name`` in declaration order (variable edges only)."""
        seen: set[str] = set()
        stack = list(self.node(name).parents)
        while stack:
            p = stack.pop()
            if p not in seen:
                seen.add(p)
                stack.extend(self.node(p).parents)
        return tuple(n for n in self.names if n in seen)

    def replace_node(self, node: NodeSpec) -> "SystemSpec":
        nodes = tuple(node if n.name == node.name else n for n in self.nodes)
        return SystemSpec(self.name, nodes, self.regime, self.intervened)


def support(spec: SystemSpec, name: str) -> tuple[float, ...] | None:
    """Finite support of a node, or ``None`` when it is continuous."""
    return dist_support(spec.node(name).dist)


def dist_support(dist: DistSpec) -> tuple[float, ...] | None:
    if dist.family == "bernoulli":
        return (0.0, 1.0)
    if dist.family == "categorical":
        p = dist.get("p", ())
        vals = dist.get("values")
        return tuple(vals) if vals is not None else tuple(float(i) for i in range(len(p)))
    if dist.family == TABLE:
        vals: set[float] = set()
        for _, d in dist.rows:
            s = dist_support(d)
            if s is None:
                return None
            vals.update(s)
        return tuple(sorted(vals))
    return None


def is_discrete(spec: SystemSpec) -> bool:
    return all(support(spec, n) is not None for n in spec.names)


# ---------------------------------------------------------------- tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#.*)
  | (?P<string>"[^"\n]*")
  | (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<punct>[=(),{};:\[\]])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize(line: str, lineno: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if m is None:
            raise SpecSyntaxError(f"unexpected character {line[pos]!r}", lineno, pos + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), pos + 1))
        pos = m.end()
    return toks


class _Line:
    """Recursive-descent cursor over one line of tokens."""

    def __init__(self, toks: list[_Tok], lineno: int, width: int):
        self.toks = toks
        self.i = 0
        self.lineno = lineno
        self.width = width

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def error(self, message: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        col = tok.col if tok else self.width + 1
        raise SpecSyntaxError(message, self.lineno, col)

    def next(self, what: str) -> _Tok:
        tok = self.peek()
        if tok is None:
            self.error(f"expected {what}, found end of line")
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next(repr(text))
        if tok.text != text:
            self.error(f"expected {text!r}, found {tok.text!r}", tok)
        return tok

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text:
            self.i += 1
            return True
        return False

    def ident(self, what: str = "identifier") -> _Tok:
        tok = self.next(what)
        if tok.kind != "ident":
            self.error(f"expected {what}, found {tok.text!r}", tok)
        return tok

    def number(self) -> float:
        tok = self.next("number")
        if tok.kind != "number":
            self.error(f"expected number, found {tok.text!r}", tok)
        value = float(tok.text)
        if not math.isfinite(value):
            self.error(f"malformed parameter: non-finite number {tok.text}", tok)
        return value

    def done(self):
        tok = self.peek()
        if tok is not None:
            self.error(f"unexpected {tok.text!r}", tok)


def _parse_params(cur: _Line, family_tok: _Tok) -> DistSpec:
    family = family_tok.text
    if family not in FAMILIES:
        cur.error(f"unknown distribution family {family!r}", family_tok)
    cur.expect("(")
    params: dict[str, Value] = {}
    if not cur.accept(")"):
        while True:
            key = cur.ident("parameter name")
            cur.expect("=")
            if cur.accept("["):
                vals = [cur.number()]
                while cur.accept(","):
                    vals.append(cur.number())
                cur.expect("]")
                value: Value = tuple(vals)
            else:
                value = cur.number()
            _check_param(cur, family, key, value)
            if key.text in params:
                cur.error(f"malformed parameter: duplicate {key.text!r}", key)
            params[key.text] = value
            if cur.accept(")"):
                break
            cur.expect(",")
    return DistSpec(family, _freeze_params(params))


def _check_param(cur: _Line, family: str, key: _Tok, value: Value):
    name = key.text
    if name.startswith(COEF_PREFIX) and len(name) > len(COEF_PREFIX):
        if family not in _COEF_FAMILIES:
            cur.error(f"malformed parameter: {family} takes no coefficients", key)
        if isinstance(value, tuple):
            cur.error(f"malformed parameter: {name} must be a number", key)
        return
    if name not in _KEYS[family]:
        cur.error(f"malformed parameter: {family} has no parameter {name!r}", key)
    wants_list = family == "categorical" and name in _LIST_KEYS
    if wants_list != isinstance(value, tuple):
        kind = "a list" if wants_list else "a number"
        cur.error(f"malformed parameter: {name} must be {kind}", key)


def _parse_dist(cur: _Line) -> tuple[DistSpec, tuple[str, ...] | None]:
    fam = cur.ident("distribution family")
    if fam.text != TABLE:
        return _parse_params(cur, fam), None
    cur.expect("{")
    rows = []
    names: tuple[str, ...] | None = None
    while True:
        pattern: dict[str, float] = {}
        first = cur.peek()
        while True:
            key = cur.ident("parent name")
            cur.expect("=")
            if key.text in pattern:
                cur.error(f"duplicate parent {key.text!r} in pattern", key)
            pattern[key.text] = cur.number()
            if not cur.accept(","):
                break
        cur.expect(":")
        row_fam = cur.ident("distribution family")
        row = _parse_params(cur, row_fam)
        if names is None:
            names = tuple(pattern)
        elif set(pattern) != set(names):
            cur.error("table rows must name the same parents", first)
        rows.append((pattern, row))
        if cur.accept("}"):
            break
        cur.expect(";")
    # patterns are re-ordered to the node's parent order once parents are known
    packed = tuple((tuple(p[n] for n in names), d) for p, d in rows)
    return DistSpec(TABLE, (), packed), names


def _parse_header(cur: _Line) -> tuple[str, str, tuple[str, ...]]:
    kw = cur.ident("'system'")
    if kw.text != "system":
        cur.error("document must start with a 'system' header", kw)
    tok = cur.next("system name string")
    if tok.kind != "string":
        cur.error("system name must be a double-quoted string", tok)
    name = tok.text[1:-1]
    regime, intervened = "observational", ()
    if cur.peek() is not None:
        key = cur.ident("'regime'")
        if key.text != "regime":
            cur.error(f"unexpected {key.text!r}", key)
        cur.expect("=")
        val = cur.ident("regime")
        if val.text == "observational":
            pass
        elif val.text == "experimental":
            cur.expect("(")
            names = [cur.ident("node name").text]
            while cur.accept(","):
                names.append(cur.ident("node name").text)
            cur.expect(")")
            regime, intervened = "experimental", tuple(names)
        else:
            cur.error(f"unknown regime {val.text!r}", val)
    cur.done()
    return name, regime, intervened


def _parse_node(cur: _Line) -> tuple[NodeSpec, dict]:
    cur.ident()  # 'node'
    name_tok = cur.ident("node name")
    if not _NAME_RE.match(name_tok.text):
        cur.error(f"invalid node name {name_tok.text!r}", name_tok)
    kind = parents = dist = None
    table_names = None
    where = {"name": name_tok}
    while cur.peek() is not None:
        key = cur.ident("'kind', 'given' or 'dist'")
        if key.text in where:
            cur.error(f"duplicate {key.text!r}", key)
        where[key.text] = key
        cur.expect("=")
        if key.text == "kind":
            ktok = cur.ident("node kind")
            if ktok.text not in KINDS:
                cur.error(f"unknown kind {ktok.text!r}", ktok)
            kind = ktok.text
        elif key.text == "given":
            cur.expect("(")
            plist = []
            if not cur.accept(")"):
                while True:
                    ptok = cur.ident("parent name")
                    if ptok.text in plist:
                        cur.error(f"duplicate parent {ptok.text!r}", ptok)
                    plist.append(ptok.text)
                    where.setdefault("parent:" + ptok.text, ptok)
                    if cur.accept(")"):
                        break
                    cur.expect(",")
            parents = tuple(plist)
        elif key.text == "dist":
            dist, table_names = _parse_dist(cur)
        else:
            cur.error(f"unexpected {key.text!r}", key)
    if kind is None:
        cur.error("node statement requires kind=")
    if dist is None:
        cur.error("node statement requires dist=")
    parents = parents or ()
    if table_names is not None:
        if set(table_names) != set(parents):
            cur.error(
                f"table pattern names ({', '.join(table_names)}) must match given=({', '.join(parents)})",
                where["dist"],
            )
        order = [table_names.index(p) for p in parents]
        dist = DistSpec(TABLE, (), tuple((tuple(pat[i] for i in order), d) for pat, d in dist.rows))
    return NodeSpec(name_tok.text, kind, parents, dist), where


def parse_system(text: str) -> SystemSpec:
    """Parse a DSL document into a fully resolved, validated :class:`SystemSpec`.

    Raises
    ------
    SpecSyntaxError
        On any grammar violation, with line and column.
    SpecError
        On unknown or duplicate names and on invariant violations; the
        message names the offending line.
    """
    if not isinstance(text, str):
        raise SpecError("document must be text")
    header = None
    nodes: list[NodeSpec] = []
    lines: dict[str, int] = {}
    where: dict[str, dict] = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        toks = _tokenize(raw, lineno)
        if not toks:
            continue
        cur = _Line(toks, lineno, len(raw))
        if header is None:
            header = _parse_header(cur)
            continue
        if toks[0].text != "node":
            cur.error(f"expected 'node' statement, found {toks[0].text!r}", toks[0])
        node, w = _parse_node(cur)
        if node.name in lines:
            raise SpecSyntaxError(f"duplicate name {node.name}", lineno, w["name"].col)
        lines[node.name] = lineno
        where[node.name] = w
        nodes.append(node)
    if header is None:
        raise SpecSyntaxError("missing 'system' header", 1, 1)
    declared = set(lines)
    for node in nodes:
        for p in node.parents:
            if p not in declared:
                tok = where[node.name]["parent:" + p]
                raise SpecSyntaxError(f"unknown parent {p}", lines[node.name], tok.col)
    name, regime, intervened = header
    spec = SystemSpec(name, tuple(nodes), regime, intervened)
    diags = [d for d in validate(spec) if d.severity == "error"]
    if diags:
        first = diags[0]
        lineno = lines.get(first.node, 1)
        raise SpecError(f"line {lineno}: {first}", diags)
    return spec


def load_system(path) -> SystemSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_system(fh.read())


# ---------------------------------------------------------------- validation

def _dist_diagnostics(node: NodeSpec, dist: DistSpec, in_table: bool = False) -> list[Diagnostic]:
    out = []
    nm = node.name

    def bad(rule, msg):
        out.append(Diagnostic(nm, rule, msg))

    fam = dist.family
    if fam == TABLE:
        if in_table:
            bad("nested-table", "table rows cannot be tables")
            return out
        if not dist.rows:
            bad("empty-table", "table has no rows")
        seen = set()
        for pat, d in dist.rows:
            if len(pat) != len(node.parents):
                bad("table-pattern", f"pattern {pat} does not match parents {node.parents}")
            if pat in seen:
                bad("table-pattern", f"duplicate row {pat}")
            seen.add(pat)
            if d.coefficients:
                bad("table-pattern", "table rows cannot carry coefficients")
            out.extend(_dist_diagnostics(node, d, in_table=True))
        return out
    if fam not in FAMILIES:
        bad("unknown-family", f"unknown family {fam!r}")
        return out
    params = dist.param
    for key in params:
        if key.startswith(COEF_PREFIX) and len(key) > len(COEF_PREFIX):
            if fam not in _COEF_FAMILIES:
                bad("malformed-parameter", f"{fam} takes no coefficients")
            elif key[len(COEF_PREFIX):] not in node.parents:
                bad("unknown-coefficient", f"coefficient {key} names no parent")
        elif key not in _KEYS[fam]:
            bad("malformed-parameter", f"{fam} has no parameter {key!r}")
    for key, v in params.items():
        vals = v if isinstance(v, tuple) else (v,)
        if not all(math.isfinite(x) for x in vals):
            bad("parameter-domain", f"{key} must be finite")
    if fam == "bernoulli":
        if ("p" in params) == ("logit" in params):
            bad("malformed-parameter", "bernoulli needs exactly one of p or logit")
        p = params.get("p")
        if isinstance(p, float) and not 0.0 <= p <= 1.0:
            bad("parameter-domain", f"probability p={p} outside [0, 1]")
        if "p" in params and dist.coefficients:
            bad("malformed-parameter", "coefficients require the logit form")
    elif fam == "categorical":
        p = params.get("p")
        if not isinstance(p, tuple) or not p:
            bad("malformed-parameter", "categorical needs p=[...]")
        else:
            if any(not 0.0 <= x <= 1.0 for x in p):
                bad("parameter-domain", "probabilities outside [0, 1]")
            if abs(math.fsum(p) - 1.0) > ROW_SUM_TOL:
                bad("row-sum", f"row sum ≠ 1 (sum={math.fsum(p)!r})")
            vals = params.get("values")
            if vals is not None and (len(vals) != len(p) or len(set(vals)) != len(vals)):
                bad("malformed-parameter", "values must be distinct and match p in length")
    elif fam == "gaussian":
        if params.get("var", 1.0) < 0:
            bad("parameter-domain", "variance must be >= 0")
    elif fam == "exponential-hazard":
        if "rate" not in params:
            bad("malformed-parameter", "exponential-hazard needs rate")
        elif params["rate"] < 0:
            bad("parameter-domain", "rate must be >= 0")
    elif fam == "gamma-frailty":
        if params.get("var", 0.0) < 0:
            bad("parameter-domain", "frailty variance must be >= 0")
    elif fam == "linear-gaussian-step":
        if params.get("sd", 0.0) < 0 or params.get("init_sd", 0.0) < 0:
            bad("parameter-domain", "standard deviations must be >= 0")
    return out


def _kind_diagnostics(spec: SystemSpec, node: NodeSpec) -> list[Diagnostic]:
    out = []
    fam = node.dist.family
    fams = {d.family for _, d in node.dist.rows} if fam == TABLE else {fam}
    if node.kind == "process" and fams != {"linear-gaussian-step"}:
        out.append(Diagnostic(node.name, "kind-family", "process nodes use linear-gaussian-step"))
    if node.kind != "process" and "linear-gaussian-step" in fams:
        out.append(Diagnostic(node.name, "kind-family", "linear-gaussian-step is for process nodes"))
    if node.kind == "death" and fams != {"exponential-hazard"}:
        out.append(Diagnostic(node.name, "kind-family", "death nodes use exponential-hazard"))
    if node.kind == "frailty":
        if node.parents:
            out.append(Diagnostic(node.name, "frailty-parents", "frailty nodes have no parents"))
        if fams != {"gamma-frailty"}:
            out.append(Diagnostic(node.name, "kind-family", "frailty nodes use gamma-frailty"))
    if node.kind == "death":
        for child in spec.children(node.name):
            ck = _kind_of(spec, child)
            if ck in ("covariate", "exposure", "outcome"):
                out.append(Diagnostic(node.name, "death-child", f"death node has {ck} child {child}"))
    return out


def _kind_of(spec: SystemSpec, name: str) -> str | None:
    for n in spec.nodes:
        if n.name == name:
            return n.kind
    return None


def _variable_cycles(spec: SystemSpec) -> list[list[str]]:
    var = {n.name: n for n in spec.nodes if n.kind in VARIABLE_KINDS}
    color: dict[str, int] = {}
    cycles = []

    def visit(name, path):
        color[name] = 1
        path.append(name)
        for p in var[name].parents:
            if p not in var:
                continue
            if color.get(p) == 1:
                cycles.append(path[path.index(p):] + [p])
            elif color.get(p) is None:
                visit(p, path)
        path.pop()
        color[name] = 2

    for name in var:
        if name not in color:
            visit(name, [])
    return cycles


def validate(spec: SystemSpec) -> list[Diagnostic]:
    """Check every structural invariant; an empty list means the system is valid."""
    diags: list[Diagnostic] = []
    if '"' in spec.name or "\n" in spec.name:
        diags.append(Diagnostic("<system>", "system-name", "name cannot contain quotes or newlines"))
    seen: dict[str, int] = {}
    for i, node in enumerate(spec.nodes):
        if not _NAME_RE.match(node.name) or node.name in ("system", "node"):
            diags.append(Diagnostic(node.name, "node-name", "invalid identifier"))
        if node.name in seen:
            diags.append(Diagnostic(node.name, "duplicate-name", "node declared twice"))
        seen.setdefault(node.name, i)
        if node.kind not in KINDS:
            diags.append(Diagnostic(node.name, "unknown-kind", f"unknown kind {node.kind!r}"))
    order = {n.name: i for i, n in enumerate(spec.nodes)}
    for i, node in enumerate(spec.nodes):
        if len(set(node.parents)) != len(node.parents):
            diags.append(Diagnostic(node.name, "duplicate-parent", "parent listed twice"))
        for p in node.parents:
            if p not in order:
                diags.append(Diagnostic(node.name, "unknown-parent", f"unknown parent {p}"))
            elif p == node.name and node.kind != "process":
                diags.append(Diagnostic(node.name, "self-parent", "node is its own parent"))
            elif order[p] >= i:
                pk = spec.nodes[order[p]].kind
                if not (node.kind == "process" and pk == "process"):
                    diags.append(
                        Diagnostic(node.name, "forward-reference", f"parent {p} is declared later")
                    )
        diags.extend(_dist_diagnostics(node, node.dist))
        diags.extend(_kind_diagnostics(spec, node))
        if node.dist.family == TABLE and all(p in order for p in node.parents):
            supports = [support(spec, p) for p in node.parents]
            if all(s is not None for s in supports):
                have = {pat for pat, _ in node.dist.rows}
                for combo in product(*supports):
                    if tuple(float(v) for v in combo) not in have:
                        diags.append(
                            Diagnostic(node.name, "table-coverage", f"no row for parents={combo}")
                        )
    for cyc in _variable_cycles(spec):
        diags.append(
            Diagnostic(cyc[0], "cycle", "cycle among variable nodes: " + " <- ".join(cyc))
        )
    if spec.regime not in ("observational", "experimental"):
        diags.append(Diagnostic("<system>", "regime", f"unknown regime {spec.regime!r}"))
    if spec.regime == "experimental" and not spec.intervened:
        diags.append(Diagnostic("<system>", "regime", "experimental regime names no exposure"))
    for name in spec.intervened:
        kind = _kind_of(spec, name)
        if kind is None:
            diags.append(Diagnostic(name, "regime", "intervened node does not exist"))
        elif spec.node(name).parents:
            diags.append(Diagnostic(name, "regime", "intervened node still has parents"))
    return diags


# ---------------------------------------------------------------- serializer

def _num(x: float) -> str:
    return format(float(x), ".17g")


def _value(v: Value) -> str:
    if isinstance(v, tuple):
        return "[" + ", ".join(_num(x) for x in v) + "]"
    return _num(v)


def _dist_text(node: NodeSpec, dist: DistSpec) -> str:
    if dist.family == TABLE:
        rows = []
        for pat, d in dist.rows:
            p = ",".join(f"{n}={_num(v)}" for n, v in zip(node.parents, pat))
            rows.append(f"{p}: {_dist_text(node, d)}")
        return "table{" + "; ".join(rows) + "}"
    body = ", ".join(f"{k}={_value(v)}" for k, v in dist.params)
    return f"{dist.family}({body})"


def serialize(spec: SystemSpec) -> str:
    """Canonical document: declaration order, 17 significant digits, LF endings."""
    head = f'system "{spec.name}"'
    if spec.regime == "experimental":
        head += f" regime=experimental({','.join(spec.intervened)})"
    lines = [head]
    for node in spec.nodes:
        given = f" given=({','.join(node.parents)})" if node.parents else ""
        lines.append(f"node {node.name} kind={node.kind}{given} dist={_dist_text(node, node.dist)}")
    return "\n".join(lines) + "\n"


def spec_hash(spec: SystemSpec) -> str:
    import hashlib

    return hashlib.sha256(serialize(spec).encode("utf-8")).hexdigest()
