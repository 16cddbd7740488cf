"""Builders for SMT-LIB v2 statements. Every function returns the statement text."""
from typing import Iterable, Union

Term = Union[str, int]


def _apply(head: str, *args: Term) -> str:
    return "(" + " ".join([head, *(str(arg) for arg in args)]) + ")"


def var_name(prefix: str, *indexes: int) -> str:
    return "_".join([prefix, *(str(index) for index in indexes)])


def add_and(*terms: Term) -> str:
    if not terms:
        return "true"
    return terms[0] if len(terms) == 1 else _apply("and", *terms)


def add_or(*terms: Term) -> str:
    if not terms:
        return "false"
    return terms[0] if len(terms) == 1 else _apply("or", *terms)


def add_not(term: Term) -> str:
    return _apply("not", term)


def add_implies(premise: Term, conclusion: Term) -> str:
    return _apply("=>", premise, conclusion)


def add_eq(left: Term, right: Term) -> str:
    return _apply("=", left, right)


def add_leq(left: Term, right: Term) -> str:
    return _apply("<=", left, right)


def add_lt(left: Term, right: Term) -> str:
    return _apply("<", left, right)


def add_plus(*terms: Term) -> str:
    if not terms:
        return "0"
    return str(terms[0]) if len(terms) == 1 else _apply("+", *terms)


def add_minus(left: Term, right: Term) -> str:
    return _apply("-", left, right)


def as_int(term: Term) -> str:
    """0/1 integer view of a Bool term."""
    return _apply("ite", term, 1, 0)


def count_true(terms: Iterable[Term]) -> str:
    return add_plus(*(as_int(term) for term in terms))


def call(function: str, *args: Term) -> str:
    return _apply(function, *args)


def bool_literal(value: bool) -> str:
    return "true" if value else "false"


def declare_boolvar(name: str) -> str:
    return f"(declare-fun {name} () Bool)"


def declare_int_function(name: str, arity: int = 1) -> str:
    return f"(declare-fun {name} ({' '.join(['Int'] * arity)}) Int)"


def add_assert(statement: str) -> str:
    return f"(assert {statement})"


def add_assert_soft(statement: str, weight: int = 1, group: str = "flips") -> str:
    return f"(assert-soft {statement} :weight {weight} :id {group})"


def add_comment(text: str) -> str:
    return "; " + text.replace("\n", " ")


def set_logic(logic: str) -> str:
    return f"(set-logic {logic})"


def set_option(name: str, value: Term) -> str:
    return f"(set-option :{name} {value})"


def set_timeout(milliseconds: int) -> str:
    return set_option("timeout", milliseconds)


def check_sat() -> str:
    return "(check-sat)"


def get_objectives() -> str:
    return "(get-objectives)"


def get_model() -> str:
    return "(get-model)"


def declare_intvar(name: str) -> str:
    return f"(declare-fun {name} () Int)"
