"""Static detection of eleven Python performance anti-patterns.

Each rule is a function over a parsed module that yields
:class:`PatternFinding` objects.  Rules are registered once in
:data:`RULES` and are independent of each other, so the findings for a set of
rules are the union of the findings for each rule alone.
"""

from __future__ import annotations

import ast
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Iterator

from .errors import SourceSyntaxError, UnknownRule

PY2, PY3 = "py2", "py3"

# documented built-in functions, per dialect
_BUILTINS_COMMON = frozenset(
    """abs all any bin bool bytearray callable chr classmethod compile complex
    delattr dict dir divmod enumerate eval filter float format frozenset
    getattr globals hasattr hash help hex id input int isinstance issubclass
    iter len list locals map max memoryview min next object oct open ord pow
    print property range repr reversed round set setattr slice sorted
    staticmethod str sum super tuple type vars zip __import__""".split()
)
BUILTIN_FUNCTIONS = {
    PY3: _BUILTINS_COMMON | {"ascii", "breakpoint", "bytes", "exec", "aiter", "anext"},
    PY2: _BUILTINS_COMMON
    | {"apply", "basestring", "buffer", "cmp", "coerce", "execfile", "file",
       "intern", "long", "raw_input", "reduce", "reload", "unichr", "unicode",
       "xrange"},
}

LOG_METHODS = frozenset(
    {"debug", "info", "warning", "warn", "error", "critical", "exception", "fatal", "log"}
)

_LOOPS = (ast.For, ast.AsyncFor, ast.While)
_SCOPES = (ast.FunctionDef, ast.AsyncFunctionDef, ast.Lambda, ast.ClassDef, ast.Module)


@dataclass(frozen=True)
class PatternRule:
    id: str
    name: str
    description: str
    severity: str = "warn"

    @property
    def number(self) -> int:
        return int(self.id[1:])


@dataclass(frozen=True, order=True)
class PatternFinding:
    rule_id: str
    file: str
    line_start: int
    line_end: int
    snippet: str = field(compare=False)
    message: str = field(compare=False)

    def sort_key(self):
        return (self.file, self.line_start, int(self.rule_id[1:]), self.line_end)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)

    def to_text(self) -> str:
        return f"{self.file}:{self.line_start}: [{self.rule_id}] {self.message}"


@dataclass
class SyntaxTree:
    """A parsed module together with the bookkeeping the rules need."""

    module: ast.Module
    source: str
    dialect: str = PY3
    filename: str = "<source>"
    parents: dict[int, ast.AST] = field(default_factory=dict, repr=False)

    @property
    def lines(self) -> list[str]:
        return self.source.splitlines()

    @property
    def statements(self) -> list[ast.stmt]:
        return self.module.body

    def parent(self, node: ast.AST) -> ast.AST | None:
        return self.parents.get(id(node))

    def ancestors(self, node: ast.AST) -> Iterator[tuple[ast.AST, ast.AST]]:
        """Yield ``(ancestor, child_on_path)`` pairs from the node upwards."""
        child = node
        parent = self.parent(child)
        while parent is not None:
            yield parent, child
            child, parent = parent, self.parent(parent)

    def snippet(self, line_start: int, line_end: int) -> str:
        return "\n".join(self.lines[line_start - 1 : line_end])


def parse_source(text: str, dialect: str = PY3, filename: str = "<source>") -> SyntaxTree:
    """Parse ``text`` into a :class:`SyntaxTree`.

    The dialect does not change parsing (Python 3 grammar is used for both);
    it only selects the version-sensitive checks of rule P7 and the built-in
    name table of P3.

    Raises SourceSyntaxError with the offending line on malformed input.
    """
    if dialect not in (PY2, PY3):
        raise ValueError(f"unknown dialect {dialect!r}")
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        module = ast.parse(text, filename=filename)
    except SyntaxError as exc:
        raise SourceSyntaxError(exc.lineno, exc.msg, filename) from exc
    except ValueError as exc:  # e.g. null bytes
        raise SourceSyntaxError(None, str(exc), filename) from exc
    parents: dict[int, ast.AST] = {}
    for node in ast.walk(module):
        for child in ast.iter_child_nodes(node):
            parents[id(child)] = node
    return SyntaxTree(module, text, dialect, filename, parents)


# -- helpers ---------------------------------------------------------------


def _span(node: ast.AST) -> tuple[int, int]:
    return node.lineno, getattr(node, "end_lineno", None) or node.lineno


def _call_name(node: ast.AST) -> str | None:
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        return node.func.id
    return None


def _is_str_literal(node: ast.AST) -> bool:
    return isinstance(node, ast.JoinedStr) or (
        isinstance(node, ast.Constant) and isinstance(node.value, str)
    )


def _dotted(node: ast.AST) -> str | None:
    """``a.b.c`` for a chain of attribute accesses on a name, else None."""
    parts = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if not isinstance(node, ast.Name):
        return None
    parts.append(node.id)
    return ".".join(reversed(parts))


def _enclosing_loop(tree: SyntaxTree, node: ast.AST) -> ast.AST | None:
    """Innermost for/while whose body contains ``node``, within the same scope."""
    for ancestor, child in tree.ancestors(node):
        if isinstance(ancestor, _SCOPES):
            return None
        if isinstance(ancestor, _LOOPS) and child in ancestor.body:
            return ancestor
    return None


def _in_loop(tree: SyntaxTree, node: ast.AST) -> bool:
    return _enclosing_loop(tree, node) is not None


def _enclosing_scope(tree: SyntaxTree, node: ast.AST) -> ast.AST:
    for ancestor, _ in tree.ancestors(node):
        if isinstance(ancestor, _SCOPES):
            return ancestor
    return tree.module


def _walk_scope(scope: ast.AST) -> Iterator[ast.AST]:
    """Walk a scope without descending into nested function/class scopes."""
    stack = list(ast.iter_child_nodes(scope))
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, _SCOPES):
            continue
        stack.extend(ast.iter_child_nodes(node))


def _bound_names(scope: ast.AST) -> set[str]:
    names: set[str] = set()
    if isinstance(scope, (ast.FunctionDef, ast.AsyncFunctionDef, ast.Lambda)):
        args = scope.args
        for a in args.posonlyargs + args.args + args.kwonlyargs:
            names.add(a.arg)
        for a in (args.vararg, args.kwarg):
            if a is not None:
                names.add(a.arg)
    for node in _walk_scope(scope):
        if isinstance(node, ast.Name) and isinstance(node.ctx, (ast.Store, ast.Del)):
            names.add(node.id)
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            names.add(node.name)
        elif isinstance(node, (ast.Import, ast.ImportFrom)):
            for alias in node.names:
                names.add((alias.asname or alias.name).split(".")[0])
    return names


def _assigned_targets(body: Iterable[ast.AST]) -> set[str]:
    """Dotted names stored anywhere in ``body``."""
    stored: set[str] = set()
    for stmt in body:
        for node in ast.walk(stmt):
            if isinstance(node, (ast.Name, ast.Attribute)) and isinstance(
                node.ctx, (ast.Store, ast.Del)
            ):
                name = _dotted(node)
                if name:
                    stored.add(name)
            elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
                stored.add(node.name)
    return stored


# -- rule registry ----------------------------------------------------------

Check = Callable[[SyntaxTree, PatternRule], Iterator[PatternFinding]]
RULES: dict[str, PatternRule] = {}
_CHECKS: dict[str, Check] = {}


def _rule(rule_id: str, name: str, description: str, severity: str = "warn"):
    def register(fn: Check) -> Check:
        if rule_id in RULES:
            raise RuntimeError(f"rule {rule_id} registered twice")
        RULES[rule_id] = PatternRule(rule_id, name, description, severity)
        _CHECKS[rule_id] = fn
        return fn

    return register


def _finding(tree: SyntaxTree, rule: PatternRule, first: ast.AST, last: ast.AST | None = None):
    start = _span(first)[0]
    end = _span(last or first)[1]
    return PatternFinding(
        rule.id, tree.filename, start, end, tree.snippet(start, end), rule.description
    )


@_rule(
    "P1",
    "string-concatenation",
    "string built by chained '+'; use str.format() or ''.join()",
)
def _check_string_concat(tree, rule):
    for node in ast.walk(tree.module):
        if not (isinstance(node, ast.BinOp) and isinstance(node.op, ast.Add)):
            continue
        parent = tree.parent(node)
        if isinstance(parent, ast.BinOp) and isinstance(parent.op, ast.Add):
            continue  # only the outermost node of a chain is reported
        operands, stack = [], [node]
        while stack:
            cur = stack.pop()
            if isinstance(cur, ast.BinOp) and isinstance(cur.op, ast.Add):
                stack.extend((cur.right, cur.left))
            else:
                operands.append(cur)
        if len(operands) >= 3 and any(_is_str_literal(op) for op in operands):
            yield _finding(tree, rule, node)


def _guarded_by_level_check(tree: SyntaxTree, node: ast.AST) -> bool:
    for ancestor, child in tree.ancestors(node):
        if isinstance(ancestor, _SCOPES):
            return False
        if isinstance(ancestor, ast.If) and child in ancestor.body:
            for sub in ast.walk(ancestor.test):
                if (
                    isinstance(sub, ast.Call)
                    and isinstance(sub.func, ast.Attribute)
                    and sub.func.attr == "isEnabledFor"
                ):
                    return True
    return False


@_rule(
    "P2",
    "unguarded-expensive-logging",
    "log call evaluates a function call even when the level is disabled; "
    "guard it with isEnabledFor()",
)
def _check_logging(tree, rule):
    for node in ast.walk(tree.module):
        if not (isinstance(node, ast.Call) and isinstance(node.func, ast.Attribute)):
            continue
        if node.func.attr not in LOG_METHODS or _dotted(node.func.value) is None:
            continue
        arguments = list(node.args) + [kw.value for kw in node.keywords]
        if not any(isinstance(sub, ast.Call) for arg in arguments for sub in ast.walk(arg)):
            continue
        if not _guarded_by_level_check(tree, node):
            yield _finding(tree, rule, node)


@_rule(
    "P3",
    "builtin-lookup-in-loop",
    "built-in function looked up on every iteration; bind it to a local name before the loop",
)
def _check_builtin_in_loop(tree, rule):
    builtins = BUILTIN_FUNCTIONS[tree.dialect]
    module_names = _bound_names(tree.module)
    scope_names: dict[int, set[str]] = {}
    for node in ast.walk(tree.module):
        name = _call_name(node)
        if name not in builtins or name in module_names or not _in_loop(tree, node):
            continue
        scope = _enclosing_scope(tree, node)
        if id(scope) not in scope_names:
            scope_names[id(scope)] = _bound_names(scope)
        if name not in scope_names[id(scope)]:
            yield _finding(tree, rule, node)


def _is_two(node: ast.AST) -> bool:
    return (
        isinstance(node, ast.Constant)
        and type(node.value) is int
        and node.value == 2
    )


@_rule("P4", "multiply-by-two", "multiplication by 2; use addition (x + x)")
def _check_times_two(tree, rule):
    for node in ast.walk(tree.module):
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
            if _is_two(node.left) or _is_two(node.right):
                yield _finding(tree, rule, node)


@_rule(
    "P5",
    "conditional-in-loop",
    "if statement evaluated on every loop iteration; hoist or remove it if possible",
    severity="info",
)
def _check_if_in_loop(tree, rule):
    for node in ast.walk(tree.module):
        if isinstance(node, ast.If) and _in_loop(tree, node):
            yield _finding(tree, rule, node, node)


def _is_cached_method(scope: ast.AST, name: str) -> bool:
    """True when ``name = <obj>.<attr>`` appears in the scope (a cached method)."""
    for node in _walk_scope(scope):
        if isinstance(node, ast.Assign) and isinstance(node.value, ast.Attribute):
            if any(isinstance(t, ast.Name) and t.id == name for t in node.targets):
                return True
    return False


@_rule(
    "P6",
    "loop-instead-of-map",
    "for loop over range() only calls a function with the loop variable; use map()",
)
def _check_loop_unrolling(tree, rule):
    for node in ast.walk(tree.module):
        if not isinstance(node, (ast.For, ast.AsyncFor)) or node.orelse:
            continue
        if _call_name(node.iter) not in ("range", "xrange"):
            continue
        if not isinstance(node.target, ast.Name) or len(node.body) != 1:
            continue
        stmt = node.body[0]
        if not (isinstance(stmt, ast.Expr) and isinstance(stmt.value, ast.Call)):
            continue
        call = stmt.value
        if call.keywords or len(call.args) != 1:
            continue
        arg = call.args[0]
        if not (isinstance(arg, ast.Name) and arg.id == node.target.id):
            continue
        # method calls are P9's business; an alias bound from an attribute is
        # the P9 remedy and is left alone
        if not isinstance(call.func, ast.Name):
            continue
        if _is_cached_method(_enclosing_scope(tree, node), call.func.id):
            continue
        yield _finding(tree, rule, node, node)


@_rule(
    "P7",
    "slow-builtin-variant",
    "type() comparison or Python 2 range(); use isinstance() / xrange()",
)
def _check_builtin_variants(tree, rule):
    for node in ast.walk(tree.module):
        if isinstance(node, ast.Compare):
            operands = [node.left, *node.comparators]
            if any(isinstance(op, (ast.Eq, ast.NotEq, ast.Is, ast.IsNot)) for op in node.ops):
                if any(_call_name(op) == "type" and len(op.args) == 1 for op in operands):
                    yield _finding(tree, rule, node)
        elif tree.dialect == PY2 and isinstance(node, (ast.For, ast.AsyncFor)):
            if _call_name(node.iter) == "range":
                yield _finding(tree, rule, node.iter)


@_rule(
    "P8",
    "iterate-dict-keys",
    "iterating over dict.keys(); iterate over the dict directly",
)
def _check_keys_iteration(tree, rule):
    for node in ast.walk(tree.module):
        if isinstance(node, (ast.For, ast.AsyncFor, ast.comprehension)):
            it = node.iter
            if (
                isinstance(it, ast.Call)
                and isinstance(it.func, ast.Attribute)
                and it.func.attr == "keys"
                and not it.args
                and not it.keywords
            ):
                yield _finding(tree, rule, it)


@_rule(
    "P9",
    "method-lookup-in-loop",
    "method looked up on every loop iteration; cache the bound method before the loop",
)
def _check_method_in_loop(tree, rule):
    stored_cache: dict[int, set[str]] = {}
    for node in ast.walk(tree.module):
        if not (isinstance(node, ast.Call) and isinstance(node.func, ast.Attribute)):
            continue
        receiver = _dotted(node.func.value)
        if receiver is None:
            continue
        loop = _enclosing_loop(tree, node)
        if loop is None:
            continue
        if id(loop) not in stored_cache:
            touched = list(loop.body)
            if isinstance(loop, (ast.For, ast.AsyncFor)):
                touched.append(loop.target)
            stored_cache[id(loop)] = _assigned_targets(touched)
        stored = stored_cache[id(loop)]
        method = f"{receiver}.{node.func.attr}"
        # a rebinding of any prefix of the receiver also invalidates the lookup
        parts = receiver.split(".")
        prefixes = {".".join(parts[: i + 1]) for i in range(len(parts))}
        if stored & (prefixes | {method}):
            continue
        yield _finding(tree, rule, node)


def _simple_assign(stmt: ast.stmt) -> tuple[str, str] | None:
    if isinstance(stmt, ast.Assign) and len(stmt.targets) == 1:
        target, value = _dotted(stmt.targets[0]), _dotted(stmt.value)
        if target and value:
            return target, value
    return None


@_rule("P10", "temp-variable-swap", "swap through a temporary; use x, y = y, x")
def _check_swap(tree, rule):
    for node in ast.walk(tree.module):
        for fieldname in ("body", "orelse", "finalbody"):
            block = getattr(node, fieldname, None)
            if not isinstance(block, list):
                continue
            for first, second, third in zip(block, block[1:], block[2:]):
                a, b, c = _simple_assign(first), _simple_assign(second), _simple_assign(third)
                if not (a and b and c):
                    continue
                temp, x = a
                if b[0] == x and c == (b[1], temp) and len({temp, x, b[1]}) == 3:
                    yield _finding(tree, rule, first, third)


@_rule(
    "P11",
    "sorted-copy-reassigned",
    "x = sorted(x) builds a new list; sort in place with x.sort()",
)
def _check_sorted_copy(tree, rule):
    for node in ast.walk(tree.module):
        if not (isinstance(node, ast.Assign) and len(node.targets) == 1):
            continue
        target = node.targets[0]
        value = node.value
        if (
            isinstance(target, ast.Name)
            and _call_name(value) == "sorted"
            and len(value.args) == 1
            and isinstance(value.args[0], ast.Name)
            and value.args[0].id == target.id
        ):
            yield _finding(tree, rule, node)


ALL_RULES = frozenset(RULES)


def resolve_rules(rules: Iterable[str] | None) -> frozenset[str]:
    """Normalize a rule selection; ``None`` selects every rule."""
    if rules is None:
        return ALL_RULES
    selected = frozenset(r.strip().upper() for r in rules if r.strip())
    for rule_id in sorted(selected):
        if rule_id not in RULES:
            raise UnknownRule(rule_id)
    if not selected:
        raise ValueError("empty rule selection")
    return selected


def detect(tree: SyntaxTree, rules: Iterable[str] | None = None) -> list[PatternFinding]:
    """Run the selected rules over ``tree``.

    Findings are ordered by (file, line_start, rule number) and are a pure
    function of the tree and the rule set.
    """
    selected = resolve_rules(rules)
    findings: list[PatternFinding] = []
    for rule_id in sorted(selected, key=lambda r: RULES[r].number):
        findings.extend(_CHECKS[rule_id](tree, RULES[rule_id]))
    findings.sort(key=PatternFinding.sort_key)
    return findings


def scan_source(
    text: str,
    rules: Iterable[str] | None = None,
    dialect: str = PY3,
    filename: str = "<source>",
) -> list[PatternFinding]:
    return detect(parse_source(text, dialect, filename), rules)


def count_by_rule(findings: Iterable[PatternFinding]) -> Counter:
    return Counter(f.rule_id for f in findings)
