"""Convergence diagnostics for infinite tensor products of twisted representations.

The questions answered here all reduce to nonnegative-term series built from
unit vectors in twisted regular representations of Z^N:

* does an infinite product of unit-modulus scalars converge (with a certified
  bound on how far the tail product sits from 1),
* does the two-part box criterion hold at a group element x, splitting the
  distance |1 - <lambda_u(x) phi, phi>| into a translation defect and a twist
  deviation averaged over the box,
* can a subsequence be greedily selected so that sup distances fall under a
  summable threshold schedule,
* and the rank-one Dirichlet analogue on centered windows.

Verdicts are three-valued (`ProvedConvergent`, `ProvedDivergent`,
`Inconclusive`); a proved verdict always names the comparison it rests on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .cocycles import (
    Cocycle,
    CocycleSequence,
    ConstructionError,
    TWO_PI,
    canonicalize_phases,
    flatten_matrix_cocycle,
)
from .groups import (
    Element,
    FolnerBox,
    GroupMismatchError,
    SupNormExhaustion,
    l1_norm,
    sup_norm,
)
from .reps import TruncatedVector
from .series import (
    EXACT,
    GeometricModel,
    INCONCLUSIVE,
    InvalidInnerProductError,
    MAJORANT,
    MINORANT,
    PROVED_CONVERGENT,
    PROVED_DIVERGENT,
    PowerModel,
    SeriesVerdict,
    TailModel,
    diagnose_model_series,
    diagnose_terms,
    geometric_tail,
    neumaier_sum,
    poly_geometric_tail,
    power_tail,
)

DEFAULT_SCALAR_HORIZON = 10_000
DEFAULT_BOX_HORIZON = 25
DEFAULT_SCAN_HORIZON = 100_000
DEFAULT_GRID_CAP = 4_000_000

CERTIFIED = "Certified"
REFUTED = "Refuted"
UNDETERMINED = "Undetermined"

ScalarSource = Union[Sequence[complex], Callable[[int], complex]]


class SelectionError(RuntimeError):
    """Greedy subsequence selection ran out of candidates at some step."""

    def __init__(self, message: str, step: Optional[int] = None,
                 best_index: Optional[int] = None,
                 best_sup: Optional[float] = None) -> None:
        super().__init__(message)
        self.step = step
        self.best_index = best_index
        self.best_sup = best_sup


def _values(source: ScalarSource, n_max: int) -> list[complex]:
    if n_max < 1:
        raise ValueError("need at least one term")
    if callable(source):
        return [source(i) for i in range(1, n_max + 1)]
    items = list(source)
    return items[:n_max]


# ---------------------------------------------------------------------------
# scalar products and inner-product series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProductDiagnosis:
    """Verdict for prod z_i together with the partial product over the prefix.

    When the defect series sum |1 - z_i| is proved convergent with tail bound
    t, every tail product sits within ``product_tail = e^t - 1`` of 1, so the
    full infinite product exists and differs from the reported prefix product
    by at most that factor.
    """

    series: SeriesVerdict
    partial_product: complex
    product_tail: Optional[float]


def product_diagnose(values: ScalarSource, model: Optional[TailModel] = None,
                     n_max: int = DEFAULT_SCALAR_HORIZON,
                     tol: float = 1e-9) -> ProductDiagnosis:
    """Diagnose convergence of an infinite product of unit-modulus scalars."""
    zs = _values(values, n_max)
    terms = []
    prod = 1.0 + 0.0j
    for i, raw in enumerate(zs, start=1):
        z = complex(raw)
        if abs(abs(z) - 1.0) > tol:
            raise ConstructionError(
                f"factor {i} has modulus {abs(z)}, expected a unit scalar")
        terms.append(abs(1.0 - z))
        prod *= z
    verdict = diagnose_terms(terms, model)
    tail = None
    if verdict.verdict == PROVED_CONVERGENT and verdict.tail_bound is not None:
        tail = math.expm1(verdict.tail_bound)
    return ProductDiagnosis(verdict, prod, tail)


def inner_product_series(values: ScalarSource, model: Optional[TailModel] = None,
                         n_max: int = DEFAULT_SCALAR_HORIZON,
                         tol: float = 1e-9) -> SeriesVerdict:
    """Series sum |1 - a_i| for inner products a_i of unit vectors.

    Raises InvalidInnerProductError when some |a_i| exceeds 1 beyond ``tol``,
    since no pair of unit vectors produces such a value.
    """
    vals = _values(values, n_max)
    terms = []
    for i, raw in enumerate(vals, start=1):
        a = complex(raw)
        if abs(a) > 1.0 + tol:
            raise InvalidInnerProductError(
                f"inner product {i} has modulus {abs(a)} > 1")
        terms.append(abs(1.0 - a))
    return diagnose_terms(terms, model)


def modulus_deficit_series(values: ScalarSource, model: Optional[TailModel] = None,
                           n_max: int = DEFAULT_SCALAR_HORIZON,
                           tol: float = 1e-9) -> SeriesVerdict:
    """Series sum (1 - |a_i|), the phase-insensitive variant."""
    vals = _values(values, n_max)
    terms = []
    for i, raw in enumerate(vals, start=1):
        mod = abs(complex(raw))
        if mod > 1.0 + tol:
            raise InvalidInnerProductError(
                f"inner product {i} has modulus {mod} > 1")
        terms.append(max(0.0, 1.0 - mod))
    return diagnose_terms(terms, model)


# ---------------------------------------------------------------------------
# exact per-box quantities
# ---------------------------------------------------------------------------


def box_defect(box: FolnerBox, x: Element) -> float:
    """Translation defect 1 - #(F cap (x+F)) / #F, exact rational to float."""
    return float(1 - Fraction(box.overlap(x), box.cardinality()))


def box_defect_terms(sides: Sequence[int], x: Element) -> list[float]:
    rank = len(x)
    return [box_defect(FolnerBox(rank, int(m)), x) for m in sides]


def _phase_grid(coeffs: np.ndarray, box: FolnerBox) -> np.ndarray:
    """N-dimensional array of y . coeffs over y in the box, built by broadcasting."""
    total: Optional[np.ndarray] = None
    for j in range(box.rank):
        start = box.offset[j]
        axis = coeffs[j] * np.arange(start, start + box.side + 1, dtype=float)
        total = axis if total is None else total[..., None] + axis
    assert total is not None
    return total


def box_twist_mean(matrix, box: FolnerBox, x: Element,
                   grid_cap: int = DEFAULT_GRID_CAP) -> float:
    """(1/#F) sum_{y in F} |1 - e^{-i y.(A x)}|, evaluated on the full grid.

    The chord length |1 - e^{i t}| equals 2 |sin(t/2)|, so the mean is a dense
    sine evaluation; ``grid_cap`` bounds the grid size to keep memory sane.
    """
    A = np.asarray(matrix, dtype=float)
    n = box.rank
    if A.shape != (n, n):
        raise GroupMismatchError(
            f"matrix shape {A.shape} does not match box rank {n}")
    if len(x) != n:
        raise GroupMismatchError(
            f"element has {len(x)} coordinates, box rank is {n}")
    if box.cardinality() > grid_cap:
        raise ConstructionError(
            f"box holds {box.cardinality()} points, over the grid cap "
            f"{grid_cap}; lower the horizon or raise grid_cap")
    coeffs = A @ np.asarray(x, dtype=float)
    grid = _phase_grid(coeffs, box)
    return float(np.mean(2.0 * np.abs(np.sin(0.5 * grid))))


def box_sup_distance(u: Cocycle, box: FolnerBox, elements: Sequence[Element],
                     grid_cap: int = DEFAULT_GRID_CAP) -> float:
    """sup over x in elements, y in the box, of |1 - u(-y, x)|."""
    flat = flatten_matrix_cocycle(u)
    best = 0.0
    if flat is not None:
        if box.cardinality() > grid_cap:
            raise ConstructionError(
                f"box holds {box.cardinality()} points, over the grid cap {grid_cap}")
        for x in elements:
            coeffs = flat @ np.asarray(x, dtype=float)
            grid = _phase_grid(coeffs, box)
            best = max(best, float(np.max(2.0 * np.abs(np.sin(0.5 * grid)))))
        return best
    group = u.group
    if box.cardinality() * max(1, len(elements)) > grid_cap:
        raise ConstructionError("pointwise sup scan exceeds the grid cap")
    for x in elements:
        gx = group.element(x)
        for y in box.points():
            gy = group.element(y)
            best = max(best, abs(1.0 - u.value(group.neg(gy), gx)))
    return best


# ---------------------------------------------------------------------------
# declared growth families for box sides and matrix norms
# ---------------------------------------------------------------------------


def power_box_family(coeff: float, exponent: float) -> tuple[Callable[[int], int], PowerModel]:
    """Sides m_i = ceil(coeff * i**exponent), with the declared growth model."""
    if coeff <= 0:
        raise ValueError("coeff must be positive so every box is nonempty")

    def sides(i: int) -> int:
        return math.ceil(coeff * float(i) ** exponent)

    return sides, PowerModel(coeff, exponent)


def geometric_box_family(coeff: float, ratio: float) -> tuple[Callable[[int], int], GeometricModel]:
    """Sides m_i = ceil(coeff * ratio**i)."""
    if coeff <= 0:
        raise ValueError("coeff must be positive so every box is nonempty")
    if ratio <= 0:
        raise ValueError("ratio must be positive")

    def sides(i: int) -> int:
        return math.ceil(coeff * ratio ** i)

    return sides, GeometricModel(coeff, ratio)


def geometric_matrix_family(matrix, ratio: float) -> tuple[Callable[[int], np.ndarray], GeometricModel]:
    """Matrices A_i = ratio**i A with the exact sup-entry-norm model."""
    A = canonicalize_phases(matrix)
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1) so entries stay canonical")
    top = float(np.max(np.abs(A))) if A.size else 0.0

    def matrices(i: int) -> np.ndarray:
        return A * ratio ** i

    return matrices, GeometricModel(top, ratio)


def power_matrix_family(matrix, exponent: float) -> tuple[Callable[[int], np.ndarray], PowerModel]:
    """Matrices A_i = i**exponent A for nonincreasing scales (exponent <= 0)."""
    A = canonicalize_phases(matrix)
    if exponent > 0:
        raise ValueError("growing matrix scales would leave the canonical range")
    top = float(np.max(np.abs(A))) if A.size else 0.0

    def matrices(i: int) -> np.ndarray:
        return A * float(i) ** exponent

    return matrices, PowerModel(top, exponent)


def _side_floor_ok(relation: str) -> bool:
    return relation in (EXACT, MINORANT)


def _side_cap_ok(relation: str) -> bool:
    return relation in (EXACT, MAJORANT)


def _sides_match_model(sides: Sequence[int], model: TailModel) -> Optional[str]:
    """None when every side sits in the ceil window of its declared value."""
    relation = getattr(model, "relation", EXACT)
    for i, m in enumerate(sides, start=1):
        v = model.value(i)
        slack = 1e-9 * (1.0 + abs(v))
        if _side_floor_ok(relation) and m < v - slack:
            return f"side {i} = {m} falls below the declared value {v}"
        if _side_cap_ok(relation) and m > v + 1.0 + slack:
            return f"side {i} = {m} exceeds the declared ceiling {v} + 1"
    return None


# ---------------------------------------------------------------------------
# upper-envelope algebra: sums of C * i^q * r^i dominating declared sequences
# ---------------------------------------------------------------------------

_Envelope = tuple[float, float, float]  # (coeff, exponent, ratio)


def _model_envelopes(model: TailModel, plus: float = 0.0) -> Optional[list[_Envelope]]:
    if isinstance(model, PowerModel):
        envs = [(model.coeff, model.exponent, 1.0)]
    elif isinstance(model, GeometricModel):
        envs = [(model.coeff, 0.0, model.ratio)]
    else:
        return None
    if plus:
        envs.append((float(plus), 0.0, 1.0))
    return envs


def _cross_envelopes(left: list[_Envelope], right: list[_Envelope],
                     factor: float) -> list[_Envelope]:
    return [(factor * c1 * c2, q1 + q2, r1 * r2)
            for (c1, q1, r1) in left for (c2, q2, r2) in right]


def _envelope_tail(env: _Envelope, n: int) -> Optional[float]:
    coeff, exponent, ratio = env
    if coeff == 0.0:
        return 0.0
    if ratio < 1.0:
        if exponent > 0.0:
            return poly_geometric_tail(coeff, exponent, ratio, n)
        return geometric_tail(coeff, ratio, n)
    if ratio == 1.0 and exponent < -1.0:
        return power_tail(coeff, exponent, n)
    return None


def _envelopes_tail(envs: list[_Envelope], n: int) -> Optional[float]:
    total = 0.0
    for env in envs:
        part = _envelope_tail(env, n)
        if part is None:
            return None
        total += part
    return total


def _describe_model(model: TailModel) -> str:
    if isinstance(model, PowerModel):
        return f"{model.coeff:g} * i^{model.exponent:g}"
    if isinstance(model, GeometricModel):
        return f"{model.coeff:g} * {model.ratio:g}^i"
    return "explicit prefix"


# ---------------------------------------------------------------------------
# two-part box criterion on Z^N
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwistedRepSeries:
    """Split diagnosis of sum_i |1 - <lambda_{u_i}(x) phi_i, phi_i>|.

    ``translation`` tracks the box defect terms 1 - #(F cap (x+F))/#F and
    ``twist`` the box means of |1 - u_i(-y, x)|; the sum of the two term
    sequences dominates the distance series, so both parts convergent proves
    the criterion at x while a divergent translation part refutes it.
    """

    x: Element
    sides: tuple[int, ...]
    translation_terms: tuple[float, ...]
    twist_terms: tuple[float, ...]
    translation: SeriesVerdict
    twist: SeriesVerdict

    @property
    def conclusion(self) -> str:
        if (self.translation.verdict == PROVED_CONVERGENT
                and self.twist.verdict == PROVED_CONVERGENT):
            return PROVED_CONVERGENT
        if self.translation.verdict == PROVED_DIVERGENT:
            return PROVED_DIVERGENT
        return INCONCLUSIVE

    @property
    def tail_bound(self) -> Optional[float]:
        if (self.translation.tail_bound is not None
                and self.twist.tail_bound is not None):
            return self.translation.tail_bound + self.twist.tail_bound
        return None


def _translation_verdict(terms: Sequence[float], sides: Sequence[int],
                         model: Optional[TailModel], x: Element) -> SeriesVerdict:
    partial = neumaier_sum(terms)
    n = len(terms)
    if all(c == 0 for c in x):
        return SeriesVerdict(PROVED_CONVERGENT, partial, n, tail_bound=0.0,
                             tail_derivation="the identity never leaves the box")
    l1 = l1_norm(x)
    linf = sup_norm(x)
    for m, d in zip(sides, terms):
        hi = min(1.0, l1 / (m + 1))
        lo = min(1.0, linf / (m + 1))
        if d > hi + 1e-9 or d < lo - 1e-9:
            return SeriesVerdict(INCONCLUSIVE, partial, n,
                                 witness=f"defect at side {m} escaped its proved envelope")
    if model is None:
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="no growth model declared for the box sides")
    mismatch = _sides_match_model(sides, model)
    if mismatch is not None:
        return SeriesVerdict(INCONCLUSIVE, partial, n, witness=mismatch)
    relation = getattr(model, "relation", EXACT)
    if isinstance(model, PowerModel) and model.coeff > 0:
        c, p = model.coeff, model.exponent
        if p > 1 and _side_floor_ok(relation):
            return SeriesVerdict(
                PROVED_CONVERGENT, partial, n,
                tail_bound=power_tail(l1 / c, -p, max(n, 1)),
                tail_derivation=(
                    f"defect_i <= |x|_1/(m_i+1) <= {l1 / c:g} * i^-{p:g}"))
        if p <= 1 and _side_cap_ok(relation):
            p_eff = max(p, 0.0)
            return SeriesVerdict(
                PROVED_DIVERGENT, partial, n,
                witness=(f"defect_i >= min(1, |x|_inf/(m_i+1)) >= "
                         f"min(1, {linf / (c + 2):g} * i^-{p_eff:g}), not summable"))
    if isinstance(model, GeometricModel) and model.coeff > 0:
        c, r = model.coeff, model.ratio
        if r > 1 and _side_floor_ok(relation):
            return SeriesVerdict(
                PROVED_CONVERGENT, partial, n,
                tail_bound=geometric_tail(l1 / c, 1.0 / r, max(n, 1)),
                tail_derivation=(
                    f"defect_i <= |x|_1/(m_i+1) <= {l1 / c:g} * (1/{r:g})^i"))
        if r <= 1 and _side_cap_ok(relation):
            return SeriesVerdict(
                PROVED_DIVERGENT, partial, n,
                witness=(f"sides stay at or below {c + 1:g}, so every defect is "
                         f"at least min(1, {linf / (c + 2):g})"))
    return SeriesVerdict(INCONCLUSIVE, partial, n,
                         witness="declared side model certifies neither direction")


def _twist_verdict(terms: Sequence[float], sides: Sequence[int],
                   norms: Sequence[float], side_model: Optional[TailModel],
                   matrix_model: Optional[TailModel], x: Element) -> SeriesVerdict:
    partial = neumaier_sum(terms)
    n = len(terms)
    rank = len(x)
    l1 = l1_norm(x)
    if l1 == 0:
        return SeriesVerdict(PROVED_CONVERGENT, partial, n, tail_bound=0.0,
                             tail_derivation="x = 0 twists nothing")
    factor = 0.5 * rank * l1
    for i, (m, a, t) in enumerate(zip(sides, norms, terms), start=1):
        if t > min(2.0, factor * m * a) + 1e-9:
            return SeriesVerdict(INCONCLUSIVE, partial, n,
                                 witness=f"term {i} escaped its proved envelope")
    if side_model is None or matrix_model is None:
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="twist certification needs both declared models")
    mismatch = _sides_match_model(sides, side_model)
    if mismatch is not None:
        return SeriesVerdict(INCONCLUSIVE, partial, n, witness=mismatch)
    m_rel = getattr(matrix_model, "relation", EXACT)
    for i, a in enumerate(norms, start=1):
        v = matrix_model.value(i)
        slack = 1e-9 * (1.0 + abs(v))
        if m_rel in (EXACT, MAJORANT) and a > v + slack:
            return SeriesVerdict(INCONCLUSIVE, partial, n,
                                 witness=f"matrix norm {i} = {a} exceeds its declared value {v}")
        if m_rel in (EXACT, MINORANT) and a < v - slack:
            return SeriesVerdict(INCONCLUSIVE, partial, n,
                                 witness=f"matrix norm {i} = {a} falls below its declared value {v}")
    if not (_side_cap_ok(getattr(side_model, "relation", EXACT))
            and m_rel in (EXACT, MAJORANT)):
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="declared relations give no upper envelope")
    side_envs = _model_envelopes(side_model, plus=1.0)
    norm_envs = _model_envelopes(matrix_model)
    if side_envs is None or norm_envs is None:
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="explicit prefixes carry no tail claims")
    tail = _envelopes_tail(_cross_envelopes(side_envs, norm_envs, factor), max(n, 1))
    if tail is None:
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="declared models admit no summable envelope")
    return SeriesVerdict(
        PROVED_CONVERGENT, partial, n, tail_bound=tail,
        tail_derivation=(
            f"term_i <= (N |x|_1 / 2) m_i a_i with N={rank}, |x|_1={l1}, "
            f"m_i <= {_describe_model(side_model)} + 1, "
            f"a_i <= {_describe_model(matrix_model)}"))


def twisted_rep_series(matrices: Callable[[int], np.ndarray],
                       matrix_model: Optional[TailModel],
                       sides: Callable[[int], int],
                       side_model: Optional[TailModel],
                       x: Element,
                       n_max: int = DEFAULT_BOX_HORIZON,
                       grid_cap: int = DEFAULT_GRID_CAP) -> TwistedRepSeries:
    """Evaluate both parts of the box criterion at x over the first n_max indices.

    ``matrices(i)`` is the phase matrix of the i-th cocycle and ``sides(i)``
    the i-th box side; the declared models carry the growth claims that turn
    evaluated prefixes into certified tails.
    """
    if n_max < 1:
        raise ValueError("need at least one index")
    x = tuple(int(c) for c in x)
    rank = len(x)
    side_list = []
    norm_list = []
    trans_terms = []
    twist_terms = []
    for i in range(1, n_max + 1):
        m = int(sides(i))
        if m < 0:
            raise ConstructionError(f"side {i} is negative")
        box = FolnerBox(rank, m)
        A = canonicalize_phases(matrices(i))
        side_list.append(m)
        norm_list.append(float(np.max(np.abs(A))) if A.size else 0.0)
        trans_terms.append(box_defect(box, x))
        twist_terms.append(box_twist_mean(A, box, x, grid_cap=grid_cap))
    translation = _translation_verdict(trans_terms, side_list, side_model, x)
    twist = _twist_verdict(twist_terms, side_list, norm_list,
                           side_model, matrix_model, x)
    return TwistedRepSeries(x, tuple(side_list), tuple(trans_terms),
                            tuple(twist_terms), translation, twist)


def translation_series(sides: Sequence[int], side_model: Optional[TailModel],
                       x: Element) -> tuple[list[float], SeriesVerdict]:
    """Exact defect terms for zero-offset boxes together with their verdict.

    Convenience wrapper for callers that already hold a realized side list
    (the box criteria below consume models directly instead).
    """
    terms = box_defect_terms(sides, x)
    return terms, _translation_verdict(terms, list(sides), side_model, x)


# ---------------------------------------------------------------------------
# the four-clause decision for box sequences on Z^N
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClauseReport:
    name: str
    holds: str  # Certified | Refuted | Undetermined
    reason: str
    series: Optional[SeriesVerdict] = None


@dataclass(frozen=True)
class BoxCriteria:
    side_model: TailModel
    matrix_model: TailModel
    clauses: tuple[ClauseReport, ...]

    def clause(self, name: str) -> ClauseReport:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def tensor_exists(self) -> str:
        return self.clause("tensor_product_existence").holds


def _side_at(model: TailModel, i: int) -> float:
    v = model.value(i)
    if math.isinf(v):
        return v
    return float(math.ceil(v))


def _folner_clause(model: TailModel) -> ClauseReport:
    name = "folner_sequence"
    relation = getattr(model, "relation", EXACT)
    if isinstance(model, PowerModel):
        if model.coeff > 0 and model.exponent > 0 and _side_floor_ok(relation):
            return ClauseReport(name, CERTIFIED,
                                "box sides grow without bound, so translate overlaps fill up")
        if model.exponent <= 0 and _side_cap_ok(relation):
            return ClauseReport(name, REFUTED,
                                "box sides stay bounded, so some translate keeps a fixed defect")
    if isinstance(model, GeometricModel):
        if model.coeff > 0 and model.ratio > 1 and _side_floor_ok(relation):
            return ClauseReport(name, CERTIFIED,
                                "box sides grow geometrically")
        if model.ratio <= 1 and _side_cap_ok(relation):
            return ClauseReport(name, REFUTED, "box sides stay bounded")
    return ClauseReport(name, UNDETERMINED,
                        "declared side model does not settle the growth question")


def _reciprocal_side_verdict(model: TailModel, n_max: int) -> SeriesVerdict:
    sides = [_side_at(model, i) for i in range(1, n_max + 1)]
    terms = [1.0 / m if m >= 1 else math.inf for m in sides]
    partial = neumaier_sum(terms)
    n = len(terms)
    relation = getattr(model, "relation", EXACT)
    if isinstance(model, PowerModel) and model.coeff > 0:
        c, p = model.coeff, model.exponent
        if p > 1 and _side_floor_ok(relation):
            return SeriesVerdict(
                PROVED_CONVERGENT, partial, n,
                tail_bound=power_tail(1.0 / c, -p, max(n, 1)),
                tail_derivation=f"1/m_i <= {1.0 / c:g} * i^-{p:g}")
        if p <= 1 and _side_cap_ok(relation):
            p_eff = max(p, 0.0)
            return SeriesVerdict(
                PROVED_DIVERGENT, partial, n,
                witness=(f"1/m_i >= {1.0 / (c + 1):g} * i^-{p_eff:g}, not summable"))
    if isinstance(model, GeometricModel) and model.coeff > 0:
        c, r = model.coeff, model.ratio
        if r > 1 and _side_floor_ok(relation):
            return SeriesVerdict(
                PROVED_CONVERGENT, partial, n,
                tail_bound=geometric_tail(1.0 / c, 1.0 / r, max(n, 1)),
                tail_derivation=f"1/m_i <= {1.0 / c:g} * (1/{r:g})^i")
        if r <= 1 and _side_cap_ok(relation):
            return SeriesVerdict(
                PROVED_DIVERGENT, partial, n,
                witness=f"sides stay at or below {c + 1:g}, so 1/m_i is bounded away from 0")
    return SeriesVerdict(INCONCLUSIVE, partial, n,
                         witness="declared side model certifies neither direction")


def _weighted_norm_verdict(side_model: TailModel, matrix_model: TailModel,
                           n_max: int) -> SeriesVerdict:
    """Verdict for sum m_i a_i from the two declared models."""
    terms = []
    for i in range(1, n_max + 1):
        m = _side_at(side_model, i)
        a = matrix_model.value(i)
        terms.append(0.0 if a == 0.0 else m * a)
    partial = neumaier_sum(terms)
    n = len(terms)
    s_rel = getattr(side_model, "relation", EXACT)
    m_rel = getattr(matrix_model, "relation", EXACT)
    m_coeff = getattr(matrix_model, "coeff", None)

    if m_coeff == 0.0 and m_rel in (EXACT, MAJORANT):
        return SeriesVerdict(PROVED_CONVERGENT, partial, n, tail_bound=0.0,
                             tail_derivation="all matrix norms vanish")

    if _side_cap_ok(s_rel) and m_rel in (EXACT, MAJORANT):
        side_envs = _model_envelopes(side_model, plus=1.0)
        norm_envs = _model_envelopes(matrix_model)
        if side_envs is not None and norm_envs is not None:
            tail = _envelopes_tail(_cross_envelopes(side_envs, norm_envs, 1.0), max(n, 1))
            if tail is not None:
                return SeriesVerdict(
                    PROVED_CONVERGENT, partial, n, tail_bound=tail,
                    tail_derivation=(
                        f"m_i a_i <= ({_describe_model(side_model)} + 1) "
                        f"* ({_describe_model(matrix_model)})"))

    if _side_floor_ok(s_rel) and m_rel in (EXACT, MINORANT):
        witness = _weighted_divergence_witness(side_model, matrix_model)
        if witness is not None:
            return SeriesVerdict(PROVED_DIVERGENT, partial, n, witness=witness)

    return SeriesVerdict(INCONCLUSIVE, partial, n,
                         witness="declared models certify neither direction")


def _weighted_divergence_witness(side_model: TailModel,
                                 matrix_model: TailModel) -> Optional[str]:
    """A divergence reason for sum m_i a_i, using m_i >= max(1, declared value)."""
    if isinstance(matrix_model, GeometricModel):
        c_a, r_a = matrix_model.coeff, matrix_model.ratio
        if c_a > 0 and r_a >= 1:
            return (f"m_i a_i >= {c_a:g} * {r_a:g}^i with ratio >= 1, "
                    "so the terms never decay")
        return None
    if not isinstance(matrix_model, PowerModel):
        return None
    c_a, e = matrix_model.coeff, matrix_model.exponent
    if c_a <= 0:
        return None
    if e >= -1:
        return (f"m_i a_i >= {c_a:g} * i^{e:g} since every side is at least 1, "
                "and that power is not summable")
    if isinstance(side_model, PowerModel) and side_model.coeff > 0:
        p = side_model.exponent
        if p + e >= -1:
            return (f"m_i a_i >= {side_model.coeff * c_a:g} * i^{p + e:g}, "
                    "not summable")
    if isinstance(side_model, GeometricModel) and side_model.coeff > 0 \
            and side_model.ratio > 1:
        return (f"m_i a_i >= {side_model.coeff * c_a:g} * i^{e:g} "
                f"* {side_model.ratio:g}^i, which grows without bound")
    return None


def lattice_tensor_criteria(side_model: TailModel, matrix_model: TailModel,
                            n_max: int = DEFAULT_SCALAR_HORIZON) -> BoxCriteria:
    """The four-clause report for boxes K_{m_i} and phase matrices A_i on Z^N.

    Clause names: ``folner_sequence`` (sides grow), ``summable_folner``
    (sum 1/m_i), ``product_cocycle`` (sum a_i with a_i the sup entry norm),
    and ``tensor_product_existence`` (sum m_i a_i together with the previous
    summability clause; a sufficient condition, so it is never refuted).
    """
    coeff = getattr(side_model, "coeff", None)
    if coeff is not None and coeff <= 0:
        raise ConstructionError("side model must produce positive sides")

    folner = _folner_clause(side_model)

    sigma = _reciprocal_side_verdict(side_model, n_max)
    if sigma.verdict == PROVED_CONVERGENT:
        sigma_clause = ClauseReport(
            "summable_folner", CERTIFIED,
            "sum of reciprocal sides converges", sigma)
    elif sigma.verdict == PROVED_DIVERGENT:
        sigma_clause = ClauseReport(
            "summable_folner", REFUTED,
            "sum of reciprocal sides diverges", sigma)
    else:
        sigma_clause = ClauseReport(
            "summable_folner", UNDETERMINED,
            "reciprocal side series resists both certificates", sigma)

    norms = diagnose_model_series(matrix_model, n_max)
    if norms.verdict == PROVED_CONVERGENT:
        norm_clause = ClauseReport(
            "product_cocycle", CERTIFIED,
            "matrix norms are summable, so the pointwise product converges "
            "everywhere and the limit is again a phase-matrix cocycle", norms)
    elif norms.verdict == PROVED_DIVERGENT:
        norm_clause = ClauseReport(
            "product_cocycle", REFUTED,
            "matrix norms are not summable", norms)
    else:
        norm_clause = ClauseReport(
            "product_cocycle", UNDETERMINED,
            "matrix norm series resists both certificates", norms)

    weighted = _weighted_norm_verdict(side_model, matrix_model, n_max)
    if (weighted.verdict == PROVED_CONVERGENT
            and sigma.verdict == PROVED_CONVERGENT):
        tensor_clause = ClauseReport(
            "tensor_product_existence", CERTIFIED,
            "reciprocal sides and side-weighted norms are both summable, "
            "so the product state converges on every group element", weighted)
    elif weighted.verdict == PROVED_DIVERGENT or sigma.verdict == PROVED_DIVERGENT:
        tensor_clause = ClauseReport(
            "tensor_product_existence", UNDETERMINED,
            "the sufficient condition fails; existence is not settled "
            "one way or the other by this route", weighted)
    else:
        tensor_clause = ClauseReport(
            "tensor_product_existence", UNDETERMINED,
            "the sufficient condition resists certification", weighted)

    return BoxCriteria(side_model, matrix_model,
                       (folner, sigma_clause, norm_clause, tensor_clause))


# ---------------------------------------------------------------------------
# greedy subsequence selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SelectionStep:
    step: int
    index: int
    threshold: float
    sup: float


@dataclass(frozen=True)
class SelectionReport:
    steps: tuple[SelectionStep, ...]

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(s.index for s in self.steps)

    @property
    def threshold_sum(self) -> float:
        return neumaier_sum([s.threshold for s in self.steps])


def select_product_subsequence(seq: CocycleSequence,
                               boxes: Union[Callable[[int], FolnerBox], Sequence[FolnerBox]],
                               exhaustion: SupNormExhaustion,
                               count: int,
                               thresholds: Optional[Callable[[int], float]] = None,
                               scan_horizon: int = DEFAULT_SCAN_HORIZON,
                               grid_cap: int = DEFAULT_GRID_CAP) -> SelectionReport:
    """Greedily pick indices i_1 < i_2 < ... with small sup distances.

    At step k the candidate u_j must satisfy
    sup_{x in H_k, y in F_k} |1 - u_j(-y, x)| <= threshold(k), scanning at
    most ``scan_horizon`` indices past the previous pick; the default
    schedule 1/k^2 is summable, which is what downstream product arguments
    need.  Raises SelectionError when a step exhausts its scan, reporting the
    best near miss.
    """
    if count < 1:
        raise ValueError("need at least one selection step")
    if thresholds is None:
        thresholds = lambda k: 1.0 / k ** 2

    def box_at(k: int) -> FolnerBox:
        if callable(boxes):
            return boxes(k)
        return boxes[k - 1]

    steps: list[SelectionStep] = []
    prev = 0
    for step in range(1, count + 1):
        thr = float(thresholds(step))
        if thr <= 0:
            raise ValueError("thresholds must be positive")
        window = exhaustion.subset(step)
        box = box_at(step)
        best_sup = math.inf
        best_j: Optional[int] = None
        found = False
        for shift in range(1, scan_horizon + 1):
            j = prev + shift
            try:
                member = seq.member(j)
            except IndexError:
                raise SelectionError(
                    f"sequence ran out at index {j} during step {step}; "
                    f"best candidate so far was index {best_j} with sup {best_sup}",
                    step=step, best_index=best_j, best_sup=best_sup) from None
            sup = box_sup_distance(member, box, window, grid_cap=grid_cap)
            if sup <= thr:
                steps.append(SelectionStep(step, j, thr, sup))
                prev = j
                found = True
                break
            if sup < best_sup:
                best_sup, best_j = sup, j
        if not found:
            raise SelectionError(
                f"no candidate within {scan_horizon} indices met the "
                f"threshold {thr} at step {step}; best was index {best_j} "
                f"with sup {best_sup}",
                step=step, best_index=best_j, best_sup=best_sup)
    return SelectionReport(tuple(steps))


# ---------------------------------------------------------------------------
# rank-one Dirichlet windows
# ---------------------------------------------------------------------------


def dirichlet_value(window: int, theta: float) -> float:
    """Mean of e^{i t theta} over t in {-window, ..., window}.

    Equals sin((2w+1) theta/2) / ((2w+1) sin(theta/2)) away from multiples of
    2 pi, and 1 there; the argument is reduced with math.remainder first, so
    the sine quotient is evaluated only on [-pi, pi].
    """
    if window < 0:
        raise ValueError("window must be nonnegative")
    m = 2 * window + 1
    t = math.remainder(float(theta), TWO_PI)
    if t == 0.0:
        return 1.0
    return math.sin(0.5 * m * t) / (m * math.sin(0.5 * t))


@dataclass(frozen=True)
class DirichletReport:
    windows: tuple[int, ...]
    angles: tuple[float, ...]
    deviation_terms: tuple[float, ...]
    inverse_window: SeriesVerdict
    deviation: SeriesVerdict

    @property
    def conclusion(self) -> str:
        if (self.inverse_window.verdict == PROVED_CONVERGENT
                and self.deviation.verdict == PROVED_CONVERGENT):
            return PROVED_CONVERGENT
        if self.inverse_window.verdict == PROVED_DIVERGENT:
            return PROVED_DIVERGENT
        return INCONCLUSIVE


def dirichlet_condition(windows: Callable[[int], int],
                        window_model: Optional[TailModel],
                        angles: Callable[[int], float],
                        angle_model: Optional[TailModel],
                        n_max: int = DEFAULT_SCALAR_HORIZON) -> DirichletReport:
    """Diagnose sum 1/n_j and sum |1 - D(n_j, theta_j)| for centered windows.

    ``angle_model`` declares |theta_j|; the deviation majorant is the chord
    bound |1 - D(n, theta)| <= (n+1) |theta| / 2, so certified tails need an
    upper envelope on both the windows and the angle sizes.  Divergence of
    the deviation series is never claimed: the Dirichlet mean oscillates and
    admits no useful minorant.
    """
    if n_max < 1:
        raise ValueError("need at least one index")
    win_list = []
    ang_list = []
    dev_terms = []
    for j in range(1, n_max + 1):
        w = int(windows(j))
        if w < 1:
            raise ConstructionError(f"window {j} must be a positive integer")
        theta = float(angles(j))
        win_list.append(w)
        ang_list.append(theta)
        dev_terms.append(abs(1.0 - dirichlet_value(w, theta)))

    if window_model is not None and _sides_match_model(win_list, window_model) is None:
        inverse = _reciprocal_side_verdict(window_model, n_max)
    else:
        inverse = SeriesVerdict(
            INCONCLUSIVE, neumaier_sum([1.0 / w for w in win_list]), n_max,
            witness="window values lack a matching growth model")

    deviation = _deviation_verdict(dev_terms, win_list, ang_list,
                                   window_model, angle_model)
    return DirichletReport(tuple(win_list), tuple(ang_list), tuple(dev_terms),
                           inverse, deviation)


def _deviation_verdict(terms: Sequence[float], windows: Sequence[int],
                       angles: Sequence[float], window_model: Optional[TailModel],
                       angle_model: Optional[TailModel]) -> SeriesVerdict:
    partial = neumaier_sum(terms)
    n = len(terms)
    for j, (w, theta, t) in enumerate(zip(windows, angles, terms), start=1):
        if t > min(2.0, 0.5 * (w + 1) * abs(theta)) + 1e-9:
            return SeriesVerdict(INCONCLUSIVE, partial, n,
                                 witness=f"term {j} escaped the chord bound")
    if window_model is None or angle_model is None:
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="deviation certification needs both declared models")
    if _sides_match_model(windows, window_model) is not None:
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="window values do not match their declared model")
    a_rel = getattr(angle_model, "relation", EXACT)
    for j, theta in enumerate(angles, start=1):
        v = angle_model.value(j)
        slack = 1e-9 * (1.0 + abs(v))
        if a_rel in (EXACT, MAJORANT) and abs(theta) > v + slack:
            return SeriesVerdict(INCONCLUSIVE, partial, n,
                                 witness=f"angle {j} exceeds its declared size {v}")
    if not (_side_cap_ok(getattr(window_model, "relation", EXACT))
            and a_rel in (EXACT, MAJORANT)):
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="declared relations give no upper envelope")
    win_envs = _model_envelopes(window_model, plus=2.0)
    ang_envs = _model_envelopes(angle_model)
    if win_envs is None or ang_envs is None:
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="explicit prefixes carry no tail claims")
    tail = _envelopes_tail(_cross_envelopes(win_envs, ang_envs, 0.5), max(n, 1))
    if tail is None:
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="declared models admit no summable envelope")
    return SeriesVerdict(
        PROVED_CONVERGENT, partial, n, tail_bound=tail,
        tail_derivation=(
            f"|1 - D(n_j, theta_j)| <= (n_j + 1) |theta_j| / 2 with "
            f"n_j <= {_describe_model(window_model)} + 1 and "
            f"|theta_j| <= {_describe_model(angle_model)}"))


# ---------------------------------------------------------------------------
# gauge fixing
# ---------------------------------------------------------------------------


def gauge_fix(rho: Callable[[Element], complex], phi: TruncatedVector,
              group) -> TruncatedVector:
    """Reweight phi by the gauge psi(y) = rho(-y) phi(y).

    Multiplication by a unimodular function is unitary, and it intertwines
    the representation twisted by u with the one twisted by the coboundary
    perturbation of u up to the scalar rho(x): inner products transform as
    <lambda_{d rho . u}(x) psi, psi> = rho(x) <lambda_u(x) phi, phi>, so the
    distance-from-1 terms of the perturbed family are controlled by the
    original ones together with |1 - rho(x)|.
    """
    values = []
    for y, v in zip(phi.points, phi.values):
        weight = complex(rho(group.neg(group.element(y))))
        if abs(abs(weight) - 1.0) > 1e-9:
            raise ConstructionError(
                f"gauge value at {y} has modulus {abs(weight)}, expected 1")
        values.append(weight * v)
    return TruncatedVector(phi.points, tuple(values))
