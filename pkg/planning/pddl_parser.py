#!/usr/bin/env python3
"""
PDDL Reader and Printer

Reads the STRIPS + typing subset of PDDL used by the puzzle domains into
immutable DomainModel / ProblemSpec objects, and prints them back as
canonical text. Problems may carry a `(:candidates ...)` block holding the
candidate goal set of a recognition problem.

Tokenizing is done by a small pyparsing S-expression grammar; every token
keeps its character offset so errors can report line and column.
"""

import contextlib
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from pyparsing import Forward, Literal, ParseException, Regex, StringEnd, Suppress, ZeroOrMore, col, lineno, rest_of_line

logger = logging.getLogger(__name__)

OBJECT_TYPE = "object"
SUPPORTED_REQUIREMENTS = (":strips", ":typing")

SYNTAX_DOMAIN = "(define (domain NAME) [(:requirements ...)] [(:types ...)] [(:predicates ...)] (:action ...)*)"
SYNTAX_PROBLEM = "(define (problem NAME) (:domain NAME) [(:objects ...)] (:init ...) (:goal ...) [(:candidates ...)])"
SYNTAX_ACTION = "(:action NAME [:parameters (VARIABLES)] [:precondition PRECONDITION] :effect EFFECT)"
SYNTAX_ATOM = "(PREDICATE ARGUMENTS*)"
SYNTAX_CONJUNCTION = "() or (PREDICATE ARGUMENTS*) or (and (PREDICATE ARGUMENTS*)*)"


class PDDLError(ValueError):
    """Base class for every problem found while reading PDDL text."""


class PDDLSyntaxError(PDDLError):
    def __init__(self, message: str, line: int = 0, column: int = 0,
                 expected: Optional[str] = None, found: Optional[str] = None):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        detail = message
        if expected:
            detail += f"; expected {expected}"
        if found is not None:
            detail += f" but found '{found}'"
        super().__init__(f"line {line}, column {column}: {detail}")


class UnsupportedRequirementError(PDDLError):
    def __init__(self, requirement: str):
        self.requirement = requirement
        super().__init__(f"unsupported requirement {requirement} "
                         f"(supported: {' '.join(SUPPORTED_REQUIREMENTS)})")


class UndeclaredReferenceError(PDDLError):
    """A predicate, type, variable or domain name that was never declared."""


class PDDLTypeError(PDDLError):
    """Arity or argument type mismatch."""


class UnknownObjectError(PDDLError):
    def __init__(self, name: str, where: str):
        self.name = name
        super().__init__(f"unknown object '{name}' in {where}")


# === Model ===

@dataclass(frozen=True)
class TypedName:
    name: str
    type: str = OBJECT_TYPE


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: Tuple[str, ...] = ()

    def __str__(self) -> str:
        return "(" + " ".join((self.predicate,) + self.args) + ")"


@dataclass(frozen=True)
class Predicate:
    name: str
    params: Tuple[TypedName, ...] = ()


@dataclass(frozen=True)
class Operator:
    name: str
    params: Tuple[TypedName, ...] = ()
    pre: Tuple[Atom, ...] = ()
    eff_add: Tuple[Atom, ...] = ()
    eff_del: Tuple[Atom, ...] = ()


@dataclass(frozen=True)
class DomainModel:
    name: str
    requirements: Tuple[str, ...] = ()
    types: Tuple[TypedName, ...] = ()
    predicates: Tuple[Predicate, ...] = ()
    operators: Tuple[Operator, ...] = ()

    @property
    def type_parents(self) -> Dict[str, str]:
        return {t.name: t.type for t in self.types}

    def has_type(self, name: str) -> bool:
        return name == OBJECT_TYPE or name in self.type_parents

    def is_subtype(self, name: str, ancestor: str) -> bool:
        """True when `name` equals `ancestor` or lies below it in the type forest."""
        parents = self.type_parents
        seen = set()
        while name not in seen:
            if name == ancestor or ancestor == OBJECT_TYPE:
                return True
            seen.add(name)
            if name not in parents:
                return False
            name = parents[name]
        return False

    def predicate(self, name: str) -> Optional[Predicate]:
        for pred in self.predicates:
            if pred.name == name:
                return pred
        return None

    def static_predicates(self) -> frozenset:
        """Predicates that no operator adds or deletes."""
        touched = {atom.predicate for op in self.operators for atom in op.eff_add + op.eff_del}
        return frozenset(p.name for p in self.predicates if p.name not in touched)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain_name: str
    objects: Tuple[TypedName, ...] = ()
    init: Tuple[Atom, ...] = ()
    goal: Tuple[Atom, ...] = ()
    candidate_goals: Tuple[Tuple[Atom, ...], ...] = ()

    @property
    def object_types(self) -> Dict[str, str]:
        return {obj.name: obj.type for obj in self.objects}


# === S-expression layer ===

class Symbol(str):
    """A word token that remembers where it started in the source text."""

    def __new__(cls, text: str, loc: int = 0):
        obj = super().__new__(cls, text)
        obj.loc = loc
        return obj


@dataclass(frozen=True)
class SExpr:
    items: Tuple = field(default=())
    loc: int = 0

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, index):
        return self.items[index]


def lispify(item) -> str:
    if isinstance(item, SExpr):
        return "(" + " ".join(lispify(i) for i in item) + ")"
    return str(item)


def _sexpr_grammar():
    word = Regex(r"[^()\s;]+")
    word.set_parse_action(lambda s, loc, toks: Symbol(toks[0].lower(), loc))
    nested = Forward()
    nested <<= Literal("(") + ZeroOrMore(word | nested) + Suppress(")")
    nested.set_parse_action(lambda s, loc, toks: SExpr(tuple(toks[1:]), loc))
    document = nested + StringEnd()
    document.ignore(";" + rest_of_line)
    document.parse_with_tabs()
    return document


_GRAMMAR = _sexpr_grammar()


def read_sexpr(text: str) -> SExpr:
    try:
        return _GRAMMAR.parse_string(text, parse_all=True)[0]
    except ParseException as e:
        rest = e.line[e.col - 1:].strip()
        found = rest.split()[0] if rest else "end of input"
        raise PDDLSyntaxError("unbalanced or malformed expression", e.lineno, e.col,
                              expected="a single parenthesized document", found=found) from e


class _Reader:
    """Walks an S-expression tree, keeping a traceback of where it is."""

    def __init__(self, text: str):
        self.text = text
        self._traceback: List[str] = []

    @contextlib.contextmanager
    def layer(self, message: str):
        self._traceback.append(message)
        yield
        assert self._traceback.pop() == message

    def position(self, item) -> Tuple[int, int]:
        loc = getattr(item, "loc", None)
        if loc is None:
            return 0, 0
        return lineno(loc, self.text), col(loc, self.text)

    def syntax_error(self, message: str, item=None, expected: Optional[str] = None):
        line, column = self.position(item)
        where = " -> ".join(self._traceback)
        if where:
            message = f"{message} (in {where})"
        found = lispify(item) if item is not None else "end of block"
        raise PDDLSyntaxError(message, line, column, expected=expected, found=found)

    def word(self, item, description: str) -> str:
        if not isinstance(item, Symbol):
            self.syntax_error(f"{description} must be a word", item, expected=description)
        return str(item)

    def block(self, item, description: str, syntax: str) -> SExpr:
        if not isinstance(item, SExpr):
            self.syntax_error(f"{description} must be a parenthesized block", item, expected=syntax)
        return item

    def keyword_block(self, item, keyword: str, syntax: str) -> SExpr:
        block = self.block(item, keyword, syntax)
        if not block or block[0] != keyword:
            head = block[0] if block else block
            self.syntax_error(f"expected '{keyword}' block", head, expected=syntax)
        return block

    def typed_list(self, items: Iterable, variables: bool) -> List[TypedName]:
        """Parse `a b - t c` style lists; untyped names default to object."""
        result: List[TypedName] = []
        pending: List[str] = []
        items = list(items)
        i = 0
        while i < len(items):
            item = items[i]
            name = self.word(item, "name")
            if name == "-":
                if not pending or i + 1 >= len(items):
                    self.syntax_error("dangling type separator", item, expected="NAME* - TYPE")
                type_name = self.word(items[i + 1], "type name")
                result.extend(TypedName(p, type_name) for p in pending)
                pending = []
                i += 2
                continue
            if variables and not name.startswith("?"):
                self.syntax_error("parameter must be a variable", item, expected="?VARIABLE")
            pending.append(name)
            i += 1
        result.extend(TypedName(p) for p in pending)
        return result

    def atom(self, item) -> Atom:
        block = self.block(item, "atom", SYNTAX_ATOM)
        if not block:
            self.syntax_error("empty atom", block, expected=SYNTAX_ATOM)
        name = self.word(block[0], "predicate name")
        if name in ("not", "and", "or", "forall", "exists", "when", "imply"):
            self.syntax_error(f"'{name}' is not allowed here", block[0], expected=SYNTAX_ATOM)
        return Atom(name, tuple(self.word(arg, "argument") for arg in block[1:]))

    def conjunction(self, item, allow_negation: bool) -> Tuple[List[Atom], List[Atom]]:
        """Return (positive, negative) atoms of `()`, a literal, or `(and ...)`."""
        block = self.block(item, "condition", SYNTAX_CONJUNCTION)
        if not block:
            return [], []
        parts = list(block[1:]) if block[0] == "and" else [block]
        positive: List[Atom] = []
        negative: List[Atom] = []
        for part in parts:
            part_block = self.block(part, "literal", SYNTAX_ATOM)
            if part_block and part_block[0] == "not":
                if not allow_negation:
                    self.syntax_error("negative preconditions are not supported", part_block[0],
                                      expected=SYNTAX_ATOM)
                if len(part_block) != 2:
                    self.syntax_error("'not' takes exactly one atom", part_block, expected="(not ATOM)")
                negative.append(self.atom(part_block[1]))
            else:
                positive.append(self.atom(part_block))
        return positive, negative


def _dedup(atoms: Iterable[Atom]) -> Tuple[Atom, ...]:
    return tuple(dict.fromkeys(atoms))


def _with_implicit_parents(declared: List[TypedName]) -> Tuple[TypedName, ...]:
    names = {t.name for t in declared}
    extra: List[TypedName] = []
    for t in declared:
        if t.type != OBJECT_TYPE and t.type not in names:
            names.add(t.type)
            extra.append(TypedName(t.type, OBJECT_TYPE))
    return tuple(declared + extra)


# === Domain ===

def parse_domain(text: str) -> DomainModel:
    """
    Parse a domain document.

    Raises:
        PDDLSyntaxError: malformed text, with line/column of the offending token
        UnsupportedRequirementError: a requirement outside :strips/:typing
        UndeclaredReferenceError: unknown predicate, type or variable
        PDDLTypeError: arity or type mismatch inside an operator
    """
    reader = _Reader(text)
    root = read_sexpr(text)
    with reader.layer("domain"):
        if len(root) < 2 or root[0] != "define":
            reader.syntax_error("domain must start with 'define'", root[0] if len(root) else root,
                                expected=SYNTAX_DOMAIN)
        header = reader.keyword_block(root[1], "domain", "(domain NAME)")
        if len(header) != 2:
            reader.syntax_error("domain header takes one name", header, expected="(domain NAME)")
        name = reader.word(header[1], "domain name")

        requirements: List[str] = []
        types: List[TypedName] = []
        predicates: List[Predicate] = []
        operators: List[Operator] = []
        for section in root[2:]:
            block = reader.block(section, "domain section", SYNTAX_DOMAIN)
            if not block:
                reader.syntax_error("empty domain section", block, expected=SYNTAX_DOMAIN)
            key = reader.word(block[0], "section keyword")
            if key == ":requirements":
                for req in block[1:]:
                    req_name = reader.word(req, "requirement")
                    if req_name not in SUPPORTED_REQUIREMENTS:
                        raise UnsupportedRequirementError(req_name)
                    requirements.append(req_name)
            elif key == ":types":
                with reader.layer(":types"):
                    types = reader.typed_list(block[1:], variables=False)
            elif key == ":predicates":
                with reader.layer(":predicates"):
                    for entry in block[1:]:
                        pred_block = reader.block(entry, "predicate", "(NAME ?VARIABLE*)")
                        if not pred_block:
                            reader.syntax_error("empty predicate declaration", pred_block,
                                                expected="(NAME ?VARIABLE*)")
                        pred_name = reader.word(pred_block[0], "predicate name")
                        params = reader.typed_list(pred_block[1:], variables=True)
                        predicates.append(Predicate(pred_name, tuple(params)))
            elif key == ":action":
                operators.append(_read_action(reader, block))
            else:
                reader.syntax_error("unknown domain section", block[0],
                                    expected="':requirements', ':types', ':predicates' or ':action'")

    domain = DomainModel(
        name=name,
        requirements=tuple(requirements),
        types=_with_implicit_parents(types),
        predicates=tuple(predicates),
        operators=tuple(operators),
    )
    _check_domain(domain)
    logger.debug(f"Parsed domain {domain.name}: {len(domain.predicates)} predicates, "
                 f"{len(domain.operators)} operators")
    return domain


def _read_action(reader: _Reader, block: SExpr) -> Operator:
    if len(block) < 2:
        reader.syntax_error("action needs a name", block, expected=SYNTAX_ACTION)
    name = reader.word(block[1], "action name")
    with reader.layer(f"action {name}"):
        params: List[TypedName] = []
        pre: List[Atom] = []
        add: List[Atom] = []
        delete: List[Atom] = []
        seen_effect = False
        rest = list(block[2:])
        i = 0
        while i < len(rest):
            key = rest[i]
            if key not in (":parameters", ":precondition", ":effect"):
                reader.syntax_error("unexpected token in action", key,
                                    expected="':parameters', ':precondition' or ':effect'")
            if i + 1 >= len(rest):
                reader.syntax_error(f"missing value after {key}", key, expected=SYNTAX_ACTION)
            value = rest[i + 1]
            if key == ":parameters":
                param_block = reader.block(value, "parameter list", "(?VARIABLE [- TYPE]*)")
                params = reader.typed_list(param_block, variables=True)
            elif key == ":precondition":
                pre, _ = reader.conjunction(value, allow_negation=False)
            else:
                add, delete = reader.conjunction(value, allow_negation=True)
                seen_effect = True
            i += 2
        if not seen_effect:
            reader.syntax_error("action without :effect", block, expected=SYNTAX_ACTION)
    return Operator(name, tuple(params), _dedup(pre), _dedup(add), _dedup(delete))


def _check_domain(domain: DomainModel) -> None:
    for t in domain.types:
        if not domain.has_type(t.type):
            raise UndeclaredReferenceError(f"type '{t.name}' has undeclared parent '{t.type}'")

    seen_preds = set()
    for pred in domain.predicates:
        if pred.name in seen_preds:
            raise PDDLError(f"predicate '{pred.name}' declared twice")
        seen_preds.add(pred.name)
        for param in pred.params:
            if not domain.has_type(param.type):
                raise UndeclaredReferenceError(
                    f"predicate '{pred.name}' uses undeclared type '{param.type}'")

    seen_ops = set()
    for op in domain.operators:
        if op.name in seen_ops:
            raise PDDLError(f"operator '{op.name}' declared twice")
        seen_ops.add(op.name)
        variables = {}
        for param in op.params:
            if not domain.has_type(param.type):
                raise UndeclaredReferenceError(
                    f"operator '{op.name}' parameter {param.name} has undeclared type '{param.type}'")
            if param.name in variables:
                raise PDDLError(f"operator '{op.name}' repeats parameter {param.name}")
            variables[param.name] = param.type
        for atom in op.pre + op.eff_add + op.eff_del:
            pred = domain.predicate(atom.predicate)
            if pred is None:
                raise UndeclaredReferenceError(
                    f"operator '{op.name}' mentions undeclared predicate '{atom.predicate}'")
            if len(atom.args) != len(pred.params):
                raise PDDLTypeError(f"operator '{op.name}': {atom} has {len(atom.args)} arguments, "
                                    f"'{pred.name}' takes {len(pred.params)}")
            for arg, param in zip(atom.args, pred.params):
                if arg not in variables:
                    raise UndeclaredReferenceError(
                        f"operator '{op.name}': {atom} uses '{arg}', which is not a parameter")
                if not domain.is_subtype(variables[arg], param.type):
                    raise PDDLTypeError(f"operator '{op.name}': {arg} - {variables[arg]} "
                                        f"does not fit '{pred.name}' slot of type {param.type}")


# === Problem ===

def parse_problem(text: str, dom: DomainModel) -> ProblemSpec:
    """
    Parse a problem document against an already parsed domain.

    Raises:
        PDDLSyntaxError: malformed text
        UnknownObjectError: an atom mentions an object not in :objects
        PDDLTypeError: arity or type mismatch in init, goal or candidates
        UndeclaredReferenceError: unknown predicate, type or domain name
    """
    reader = _Reader(text)
    root = read_sexpr(text)
    with reader.layer("problem"):
        if len(root) < 2 or root[0] != "define":
            reader.syntax_error("problem must start with 'define'", root[0] if len(root) else root,
                                expected=SYNTAX_PROBLEM)
        header = reader.keyword_block(root[1], "problem", "(problem NAME)")
        if len(header) != 2:
            reader.syntax_error("problem header takes one name", header, expected="(problem NAME)")
        name = reader.word(header[1], "problem name")

        domain_name = None
        objects: List[TypedName] = []
        init: List[Atom] = []
        goal: Optional[List[Atom]] = None
        candidates: List[Tuple[Atom, ...]] = []
        for section in root[2:]:
            block = reader.block(section, "problem section", SYNTAX_PROBLEM)
            if not block:
                reader.syntax_error("empty problem section", block, expected=SYNTAX_PROBLEM)
            key = reader.word(block[0], "section keyword")
            if key == ":domain":
                if len(block) != 2:
                    reader.syntax_error("(:domain NAME) takes one name", block, expected="(:domain NAME)")
                domain_name = reader.word(block[1], "domain name")
            elif key == ":objects":
                with reader.layer(":objects"):
                    objects = reader.typed_list(block[1:], variables=False)
            elif key == ":init":
                with reader.layer(":init"):
                    init = [reader.atom(entry) for entry in block[1:]]
            elif key == ":goal":
                with reader.layer(":goal"):
                    if len(block) != 2:
                        reader.syntax_error("(:goal ...) takes one condition", block,
                                            expected=SYNTAX_CONJUNCTION)
                    goal, _ = reader.conjunction(block[1], allow_negation=False)
            elif key == ":candidates":
                with reader.layer(":candidates"):
                    for entry in block[1:]:
                        atoms, _ = reader.conjunction(entry, allow_negation=False)
                        candidates.append(_dedup(atoms))
            else:
                reader.syntax_error("unknown problem section", block[0],
                                    expected="':domain', ':objects', ':init', ':goal' or ':candidates'")
        if domain_name is None:
            reader.syntax_error("problem without (:domain NAME)", root, expected=SYNTAX_PROBLEM)
        if goal is None:
            reader.syntax_error("problem without (:goal ...)", root, expected=SYNTAX_PROBLEM)

    if domain_name != dom.name:
        raise UndeclaredReferenceError(f"problem '{name}' is for domain '{domain_name}', not '{dom.name}'")

    problem = ProblemSpec(
        name=name,
        domain_name=domain_name,
        objects=tuple(objects),
        init=_dedup(init),
        goal=_dedup(goal),
        candidate_goals=tuple(candidates),
    )
    _check_problem(problem, dom)
    return problem


def _check_problem(problem: ProblemSpec, dom: DomainModel) -> None:
    seen = set()
    for obj in problem.objects:
        if obj.name in seen:
            raise PDDLError(f"object '{obj.name}' declared twice")
        seen.add(obj.name)
        if not dom.has_type(obj.type):
            raise UndeclaredReferenceError(f"object '{obj.name}' has undeclared type '{obj.type}'")

    object_types = problem.object_types
    groups = [("init", problem.init), ("goal", problem.goal)]
    groups += [(f"candidate {i}", cand) for i, cand in enumerate(problem.candidate_goals)]
    for where, atoms in groups:
        for atom in atoms:
            check_ground_atom(atom, dom, object_types, where)


def check_ground_atom(atom: Atom, dom: DomainModel, object_types: Dict[str, str], where: str) -> None:
    pred = dom.predicate(atom.predicate)
    if pred is None:
        raise UndeclaredReferenceError(f"{where}: undeclared predicate '{atom.predicate}' in {atom}")
    if len(atom.args) != len(pred.params):
        raise PDDLTypeError(f"{where}: {atom} has {len(atom.args)} arguments, "
                            f"'{pred.name}' takes {len(pred.params)}")
    for arg, param in zip(atom.args, pred.params):
        if arg not in object_types:
            raise UnknownObjectError(arg, f"{where} atom {atom}")
        if not dom.is_subtype(object_types[arg], param.type):
            raise PDDLTypeError(f"{where}: {arg} - {object_types[arg]} does not fit "
                                f"'{pred.name}' slot of type {param.type}")


# === Printing ===

def _typed(names: Iterable[TypedName]) -> str:
    return " ".join(f"{t.name} - {t.type}" for t in names)


def _conjunction(atoms: Iterable[Atom], negated: Iterable[Atom] = ()) -> str:
    parts = [str(a) for a in atoms] + [f"(not {a})" for a in negated]
    if not parts:
        return "()"
    return "(and " + " ".join(parts) + ")"


def print_domain(domain: DomainModel) -> str:
    lines = [f"(define (domain {domain.name})"]
    if domain.requirements:
        lines.append(f"  (:requirements {' '.join(domain.requirements)})")
    if domain.types:
        lines.append(f"  (:types {_typed(domain.types)})")
    if domain.predicates:
        lines.append("  (:predicates")
        for pred in domain.predicates:
            params = _typed(pred.params)
            lines.append(f"    ({pred.name}{' ' + params if params else ''})")
        lines[-1] += ")"
    for op in domain.operators:
        lines.append(f"  (:action {op.name}")
        lines.append(f"    :parameters ({_typed(op.params)})")
        lines.append(f"    :precondition {_conjunction(op.pre)}")
        lines.append(f"    :effect {_conjunction(op.eff_add, op.eff_del)})")
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


def print_problem(problem: ProblemSpec) -> str:
    lines = [
        f"(define (problem {problem.name})",
        f"  (:domain {problem.domain_name})",
    ]
    if problem.objects:
        lines.append(f"  (:objects {_typed(problem.objects)})")
    lines.append("  (:init")
    for atom in problem.init:
        lines.append(f"    {atom}")
    lines[-1] += ")"
    lines.append(f"  (:goal {_conjunction(problem.goal)})")
    if problem.candidate_goals:
        lines.append("  (:candidates")
        for cand in problem.candidate_goals:
            lines.append(f"    {_conjunction(cand)}")
        lines[-1] += ")"
    lines[-1] += ")"
    return "\n".join(lines) + "\n"
