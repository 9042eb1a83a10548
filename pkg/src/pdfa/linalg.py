"""Dense linear algebra over enumerated finite sets.

Vectors are row vectors and linear maps act by post-multiplication,
``x -> x @ M``, so an ``|X| x |Y|`` matrix maps V(X) to V(Y).
"""

from __future__ import annotations

import json
from functools import reduce

import numpy as np

from .errors import DimensionError, PartitionError, PseudoInverseError, SizeError

MAX_ENTRIES = 2 ** 20
PENROSE_TOL = 1e-8


class Enumeration:
    """A fixed ordering of a finite set."""

    def __init__(self, elements):
        self.elements = tuple(elements)
        self._index = {x: i for i, x in enumerate(self.elements)}
        if len(self._index) != len(self.elements):
            raise ValueError("enumeration elements must be distinct")

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, x):
        return x in self._index

    def __eq__(self, other):
        return isinstance(other, Enumeration) and self.elements == other.elements

    def __hash__(self):
        return hash(self.elements)

    def __repr__(self):
        return f"Enumeration({list(self.elements)!r})"

    def index(self, x) -> int:
        return self._index[x]

    def element(self, i):
        return self.elements[i]


def check_size(n_entries, cap=None):
    cap = MAX_ENTRIES if cap is None else cap
    if n_entries > cap:
        raise SizeError(f"{n_entries} entries exceed the dense cap of {cap}")


def kron(a, b, cap=None):
    """Kronecker product of two vectors or two matrices."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != b.ndim:
        raise DimensionError("kron of a vector with a matrix")
    check_size(a.size * b.size, cap)
    return np.kron(a, b)


def kron_all(factors, cap=None):
    return reduce(lambda x, y: kron(x, y, cap), factors)


def one_norm(v) -> float:
    return float(np.abs(np.asarray(v, dtype=float)).sum())


def is_distribution(v, tol=1e-9) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(np.all(v >= -tol) and abs(v.sum() - 1.0) <= tol)


def lin_rep(f, ex: Enumeration, ey: Enumeration):
    """0/1 matrix of a total function: row ``i`` has its 1 at ``f(x_i)``."""
    check_size(len(ex) * len(ey))
    m = np.zeros((len(ex), len(ey)))
    for i, x in enumerate(ex):
        y = f(x)
        if y not in ey:
            raise ValueError(f"f({x!r}) = {y!r} is not in the target enumeration")
        m[i, ey.index(y)] = 1.0
    return m


def pred_rep(p, ex: Enumeration):
    """Diagonal projection selecting the elements satisfying ``p``."""
    check_size(len(ex) ** 2)
    return np.diag([1.0 if p(x) else 0.0 for x in ex])


def classification_matrix(partition, ex: Enumeration):
    """``|X| x k`` matrix mapping each element to its class (column)."""
    m = np.zeros((len(ex), len(partition)))
    seen = set()
    for j, cls in enumerate(partition):
        for x in cls:
            if x not in ex:
                raise PartitionError(f"{x!r} is not an element of the enumeration")
            if x in seen:
                raise PartitionError(f"{x!r} appears in more than one class")
            seen.add(x)
            m[ex.index(x), j] = 1.0
    if len(seen) != len(ex):
        missing = [x for x in ex if x not in seen]
        raise PartitionError(f"classes do not cover {missing[:5]!r}")
    return m


def is_classification(a) -> bool:
    a = np.asarray(a)
    return (a.ndim == 2 and bool(np.all((a == 0) | (a == 1)))
            and bool(np.all(a.sum(axis=1) == 1)))


def penrose_defects(a, g) -> dict:
    """Max-abs violation of each of the four Penrose identities."""
    ag = a @ g
    ga = g @ a
    return {
        "AGA=A": float(np.max(np.abs(ag @ a - a), initial=0.0)),
        "GAG=G": float(np.max(np.abs(ga @ g - g), initial=0.0)),
        "(AG)^T=AG": float(np.max(np.abs(ag.T - ag), initial=0.0)),
        "(GA)^T=GA": float(np.max(np.abs(ga.T - ga), initial=0.0)),
    }


def is_pseudo_inverse(a, g, tol=PENROSE_TOL) -> bool:
    return max(penrose_defects(a, g).values()) <= tol


def pseudo_inverse(a, tol=PENROSE_TOL, max_iter=500):
    """Moore-Penrose pseudo-inverse.

    Classification matrices use the exact closed form (transpose with each
    row divided by its class size); full column rank matrices use
    ``(A^T A)^-1 A^T``; anything else goes through Newton-Schulz iteration,
    accepted only once the Penrose identities hold within ``tol``.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionError("pseudo_inverse needs a matrix")
    if a.size == 0 or not np.any(a):
        return np.zeros(a.shape[::-1])
    if is_classification(a):
        sizes = a.sum(axis=0)
        g = a.T.copy()
        nonempty = sizes > 0
        g[nonempty] /= sizes[nonempty, None]
        return g

    rows, cols = a.shape
    if cols <= rows and np.linalg.matrix_rank(a) == cols:
        g = np.linalg.solve(a.T @ a, a.T)
        if is_pseudo_inverse(a, g, tol):
            return g

    # Newton-Schulz: G <- G (2I - A G), started inside the convergence region.
    g = a.T / (np.linalg.norm(a, 1) * np.linalg.norm(a, np.inf))
    for _ in range(max_iter):
        g_next = 2 * g - g @ a @ g
        if np.max(np.abs(g_next - g)) <= tol * 1e-3:
            g = g_next
            break
        g = g_next
    defects = penrose_defects(a, g)
    if max(defects.values()) > tol:
        raise PseudoInverseError(f"iteration did not converge: {defects}")
    return g


def lift_operator(f, a, a_dagger=None):
    """Abstract counterpart ``A^+ F A`` of a concrete operator ``F``."""
    f = np.asarray(f, dtype=float)
    a = np.asarray(a, dtype=float)
    if f.shape != (a.shape[0], a.shape[0]):
        raise DimensionError(f"operator {f.shape} does not match abstraction {a.shape}")
    g = pseudo_inverse(a) if a_dagger is None else a_dagger
    return g @ f @ a


def complement(p):
    """``I - P`` for a (possibly abstract) projection."""
    return np.eye(p.shape[0]) - p


# --------------------------------------------------------------------------
# JSON


def matrix_to_dict(m) -> dict:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]),
            "entries": [float(x) for x in m.ravel()]}


def matrix_from_dict(d):
    entries = np.asarray(d["entries"], dtype=float)
    if entries.size != d["rows"] * d["cols"]:
        raise DimensionError("entry count does not match rows * cols")
    if not np.all(np.isfinite(entries)):
        raise ValueError("matrix entries must be finite")
    return entries.reshape(d["rows"], d["cols"])


def matrix_to_json(m) -> str:
    return json.dumps(matrix_to_dict(m))


def matrix_from_json(text):
    return matrix_from_dict(json.loads(text))
