"""Probabilistic abstract interpretation: abstractions, lifting, abstract tests."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DimensionError, PartitionError
from .semantics import StateSpace, eval_bexpr, is_prime


@dataclass(frozen=True, eq=False)
class Abstraction:
    """A partition of an enumerated set with its classification matrix.

    Where the partition comes from a predicate, the class satisfying it is
    listed first.
    """

    name: str
    source: linalg.Enumeration
    classes: tuple
    a: np.ndarray
    a_dagger: np.ndarray

    @classmethod
    def from_partition(cls, name, source, classes):
        source = source if isinstance(source, linalg.Enumeration) else linalg.Enumeration(source)
        classes = tuple(tuple(c) for c in classes)
        a = linalg.classification_matrix(classes, source)
        return cls(name, source, classes, a, linalg.pseudo_inverse(a))

    @property
    def size(self):
        return len(self.classes)

    def lift(self, f):
        return self.a_dagger @ f @ self.a


def identity(values, name="id"):
    values = list(values)
    return Abstraction.from_partition(name, values, [(v,) for v in values])


def forgetful(values, name="forgetful"):
    values = list(values)
    return Abstraction.from_partition(name, values, [values])


def by_predicate(values, pred, name):
    values = list(values)
    yes = [v for v in values if pred(v)]
    no = [v for v in values if not pred(v)]
    classes = [c for c in (yes, no) if c]
    return Abstraction.from_partition(name, values, classes)


def parity(values, name="parity"):
    """Even class first, odd class second."""
    return by_predicate(values, lambda v: v % 2 == 0, name)


def primality(values, name="prime"):
    """Prime class first, non-prime class second."""
    return by_predicate(values, is_prime, name)


def user_partition(values, classes, name="partition"):
    return Abstraction.from_partition(name, list(values), classes)


BUILTIN = {"id": identity, "forgetful": forgetful, "parity": parity, "prime": primality}


def compose(parts, name=None):
    """Kronecker composition of per-variable abstractions (first = most significant)."""
    parts = list(parts)
    source = linalg.Enumeration(itertools.product(*(p.source.elements for p in parts)))
    classes = tuple(
        tuple(itertools.product(*combo))
        for combo in itertools.product(*(p.classes for p in parts)))
    a = linalg.kron_all([p.a for p in parts])
    a_dagger = linalg.kron_all([p.a_dagger for p in parts])
    return Abstraction(name or "(x)".join(p.name for p in parts), source, classes, a, a_dagger)


def state_abstraction(space: StateSpace, per_var=None):
    """Abstraction of a whole state space from per-variable choices.

    ``per_var`` maps a variable name to a builtin kind (``"forgetful"``,
    ``"parity"``, ``"prime"``, ``"id"``) or to an :class:`Abstraction`;
    unmentioned variables are kept exactly.
    """
    per_var = dict(per_var or {})
    unknown = set(per_var) - set(space.names)
    if unknown:
        raise PartitionError(f"unknown variables in abstraction: {sorted(unknown)}")
    parts = []
    for d in space.decls:
        choice = per_var.get(d.name, "id")
        if isinstance(choice, str):
            if choice not in BUILTIN:
                raise PartitionError(f"unknown abstraction kind {choice!r}")
            choice = BUILTIN[choice](d.values, name=f"{choice}:{d.name}")
        elif list(choice.source.elements) != list(d.values):
            raise PartitionError(f"abstraction for {d.name!r} does not cover its range")
        parts.append(choice)
    return compose(parts)


def parse_abstraction(text: str, space: StateSpace):
    """Parse ``"forgetful:z,parity:i"`` style specs (``"id"`` = no abstraction)."""
    per_var = {}
    for item in filter(None, (t.strip() for t in text.split(","))):
        if item == "id":
            continue
        kind, sep, var = item.partition(":")
        if not sep or kind not in BUILTIN:
            raise PartitionError(f"bad abstraction spec {item!r}")
        per_var[var] = kind
    return state_abstraction(space, per_var)


def lift_distribution(rho, abstraction: Abstraction):
    """Mass of each class: ``rho A``."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape[-1] != abstraction.a.shape[0]:
        raise DimensionError(f"vector of length {rho.shape[-1]} vs abstraction {abstraction.a.shape}")
    return rho @ abstraction.a


def abstract_test(test, abstraction: Abstraction, space=None):
    """``A^+ P(b) A`` for a projection matrix, a predicate, or a test expression.

    A test expression needs the ``space`` it is evaluated over; predicates are
    called on the elements of ``abstraction.source``.
    """
    if isinstance(test, np.ndarray):
        if test.shape != (abstraction.a.shape[0],) * 2:
            raise DimensionError(f"projection {test.shape} vs abstraction {abstraction.a.shape}")
        return abstraction.a_dagger @ test @ abstraction.a
    if callable(test):
        diag = np.array([1.0 if test(x) else 0.0 for x in abstraction.source])
    else:
        if space is None:
            raise ValueError("a test expression needs the state space")
        diag = np.array([1.0 if eval_bexpr(test, s, space) else 0.0 for s in abstraction.source])
    # P(b) is diagonal: scale rows of A instead of forming it densely.
    return abstraction.a_dagger @ (diag[:, None] * abstraction.a)


def compatibility_residual(rho, test_matrix, abstraction: Abstraction) -> float:
    """``max |rho P(b) A - rho# P#(b)|``; zero when the partition refines ``b``."""
    p_sharp = abstract_test(test_matrix, abstraction)
    lhs = np.asarray(rho) @ test_matrix @ abstraction.a
    rhs = lift_distribution(rho, abstraction) @ p_sharp
    return float(np.max(np.abs(lhs - rhs)))


QUALITY_COLUMNS = ("Ae+ Pp Ae", "Ae+ Pp^ Ae", "Ap+ Pe Ap", "Ap+ Pe^ Ap")


def quality_table(n: int) -> dict:
    """Parity-vs-primality abstract tests over the values ``0..n-1``."""
    if n < 3:
        raise ValueError("quality_table needs n >= 3")
    values = range(n)
    a_e = parity(values)
    a_p = primality(values)
    is_even = lambda v: v % 2 == 0
    p_on_e = abstract_test(is_prime, a_e)
    e_on_p = abstract_test(is_even, a_p)
    return {
        QUALITY_COLUMNS[0]: p_on_e,
        QUALITY_COLUMNS[1]: linalg.complement(p_on_e),
        QUALITY_COLUMNS[2]: e_on_p,
        QUALITY_COLUMNS[3]: linalg.complement(e_on_p),
    }


def round_table(table: dict, digits=2) -> dict:
    # Printed tables use two decimal places (e.g. 0.0008 shows as 0.00).
    return {k: np.round(v, digits) + 0.0 for k, v in table.items()}


def format_quality_table(rows: dict) -> str:
    """Aligned text for ``{n: quality_table(n)}``."""
    lines = ["n".rjust(6) + "".join(c.center(16) for c in QUALITY_COLUMNS)]
    for n, table in rows.items():
        rounded = round_table(table)
        for r in range(2):
            head = str(n).rjust(6) if r == 0 else " " * 6
            cells = ["  ".join(f"{x:.2f}" for x in rounded[c][r]).center(16) for c in QUALITY_COLUMNS]
            lines.append(head + "".join(cells))
    return "\n".join(lines) + "\n"
