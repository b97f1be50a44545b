"""Three-valued series verdicts driven by declared tail models.

A numeric partial sum never proves anything by itself.  ProvedConvergent
and ProvedDivergent are only issued when a declared closed-form model
(power, geometric, or an explicit finite prefix with no tail claims)
supplies an analytic majorant or minorant; everything else stays
Inconclusive with the partial sums reported.

Models carry a relation flag: "exact" means the terms are the stated
values, "majorant" means terms are bounded above by them, "minorant"
bounded below.  Convergence certificates need exact or majorant,
divergence certificates need exact or minorant; a model whose relation
cannot support the claim yields Inconclusive, never a wrong proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

PROVED_CONVERGENT = "ProvedConvergent"
PROVED_DIVERGENT = "ProvedDivergent"
INCONCLUSIVE = "Inconclusive"

EXACT = "exact"
MAJORANT = "majorant"
MINORANT = "minorant"

_RELATIONS = (EXACT, MAJORANT, MINORANT)


class InvalidInnerProductError(ValueError):
    """An alleged inner product has modulus beyond 1 + 1e-9."""


@dataclass(frozen=True)
class SeriesVerdict:
    verdict: str
    partial_sum: float
    terms_evaluated: int
    tail_bound: Optional[float] = None
    tail_derivation: Optional[str] = None
    witness: Optional[str] = None


@dataclass(frozen=True)
class PowerModel:
    """value(i) = coeff * i**exponent for i >= 1."""

    coeff: float
    exponent: float
    relation: str = EXACT

    def __post_init__(self) -> None:
        if self.coeff < 0:
            raise ValueError("coeff must be nonnegative for nonnegative-term series")
        if self.relation not in _RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")

    def value(self, i: int) -> float:
        try:
            return self.coeff * float(i) ** self.exponent
        except OverflowError:
            return math.inf


@dataclass(frozen=True)
class GeometricModel:
    """value(i) = coeff * ratio**i for i >= 1."""

    coeff: float
    ratio: float
    relation: str = EXACT

    def __post_init__(self) -> None:
        if self.coeff < 0 or self.ratio < 0:
            raise ValueError("coeff and ratio must be nonnegative")
        if self.relation not in _RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")

    def value(self, i: int) -> float:
        try:
            return self.coeff * self.ratio ** i
        except OverflowError:
            return math.inf


@dataclass(frozen=True)
class ExplicitModel:
    """A finite prefix of values; makes no claim about the tail."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def value(self, i: int) -> float:
        return self.values[i - 1]


TailModel = Union[PowerModel, GeometricModel, ExplicitModel]


def neumaier_sum(values: Sequence[float]) -> float:
    """Compensated summation; accumulation error stays near one ulp of the result."""
    total = 0.0
    comp = 0.0
    for v in values:
        t = total + v
        if math.isinf(t):
            return t
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
    return total + comp


def running_sums(values: Sequence[float]) -> list[float]:
    """Compensated running partial sums, ascending index order."""
    out = []
    total = 0.0
    comp = 0.0
    for v in values:
        t = total + v
        if math.isinf(t):
            out.append(t)
            total = t
            comp = 0.0
            continue
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
        out.append(total + comp)
    return out


def power_tail(coeff: float, exponent: float, n: int) -> float:
    """Upper bound for sum_{i>n} coeff * i**exponent when exponent < -1.

    Integral comparison: the summand is decreasing, so the tail is at most
    coeff * n**(exponent+1) / (-exponent - 1).
    """
    if exponent >= -1:
        raise ValueError("power tail needs exponent < -1")
    if n < 1:
        raise ValueError("tail starts after at least one term")
    return coeff * float(n) ** (exponent + 1.0) / (-exponent - 1.0)


def geometric_tail(coeff: float, ratio: float, n: int) -> float:
    """sum_{i>n} coeff * ratio**i = coeff * ratio**(n+1) / (1 - ratio) for ratio < 1."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError("geometric tail needs ratio in [0, 1)")
    return coeff * ratio ** (n + 1) / (1.0 - ratio)


def poly_geometric_tail(coeff: float, exponent: float, ratio: float, n: int) -> float:
    """Upper bound for sum_{i>n} coeff * i**exponent * ratio**i, exponent >= 0, ratio < 1.

    Successive term ratios (1 + 1/i)**exponent * ratio decrease in i; once
    they drop below 1 at some index n0 the tail telescopes geometrically,
    and the finitely many terms between n and n0 are added in closed form.
    """
    if exponent < 0:
        raise ValueError("use power_tail for decaying exponents")
    if not 0.0 <= ratio < 1.0:
        raise ValueError("ratio must lie in [0, 1)")
    if coeff == 0.0 or ratio == 0.0:
        return 0.0

    def term(i: int) -> float:
        return coeff * float(i) ** exponent * ratio ** i

    def step_ratio(i: int) -> float:
        return (1.0 + 1.0 / i) ** exponent * ratio

    n0 = max(n, 1)
    while step_ratio(n0) >= 1.0:
        n0 += 1
    head = sum(term(i) for i in range(n + 1, n0 + 1))
    r = step_ratio(n0)
    return head + term(n0 + 1) / (1.0 - r)


def model_values(model: TailModel, n: int) -> list[float]:
    """First n declared values (the full prefix for explicit models)."""
    if isinstance(model, ExplicitModel):
        return list(model.values[:n])
    return [model.value(i) for i in range(1, n + 1)]


def _consistency_witness(terms: Sequence[float], model: TailModel) -> Optional[str]:
    relation = getattr(model, "relation", EXACT)
    limit = len(terms)
    if isinstance(model, ExplicitModel):
        limit = min(limit, len(model.values))
    for i in range(1, limit + 1):
        claimed = model.value(i)
        slack = 1e-9 + 1e-9 * abs(claimed)
        t = terms[i - 1]
        if relation in (EXACT, MAJORANT) and t > claimed + slack:
            return f"term {i} = {t} exceeds declared bound {claimed}"
        if relation in (EXACT, MINORANT) and t < claimed - slack:
            return f"term {i} = {t} falls below declared bound {claimed}"
    return None


def diagnose_terms(terms: Sequence[float], model: Optional[TailModel]) -> SeriesVerdict:
    """Verdict for a nonnegative-term series from an evaluated prefix and a model."""
    terms = [float(t) for t in terms]
    for i, t in enumerate(terms, start=1):
        if t < -1e-12:
            raise ValueError(f"term {i} is negative: {t}")
    terms = [max(t, 0.0) for t in terms]
    partial = neumaier_sum(terms)
    n = len(terms)

    if model is None:
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="no tail model declared")

    mismatch = _consistency_witness(terms, model)
    if mismatch is not None:
        return SeriesVerdict(INCONCLUSIVE, partial, n, witness=mismatch)

    if isinstance(model, ExplicitModel):
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="explicit prefix carries no tail claims")

    relation = model.relation
    if isinstance(model, PowerModel):
        if model.coeff == 0.0 and relation in (EXACT, MAJORANT):
            return SeriesVerdict(PROVED_CONVERGENT, partial, n, tail_bound=0.0,
                                 tail_derivation="all terms vanish under the declared model")
        if model.exponent < -1 and relation in (EXACT, MAJORANT):
            return SeriesVerdict(
                PROVED_CONVERGENT, partial, n,
                tail_bound=power_tail(model.coeff, model.exponent, max(n, 1)),
                tail_derivation=(
                    f"integral comparison against {model.coeff}*i^{model.exponent}"))
        if model.exponent >= -1 and model.coeff > 0.0 and relation in (EXACT, MINORANT):
            return SeriesVerdict(
                PROVED_DIVERGENT, partial, n,
                witness=(f"terms at least {model.coeff}*i^{model.exponent}, "
                         "which is not summable"))
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="declared model cannot certify either direction")

    if isinstance(model, GeometricModel):
        if model.coeff == 0.0 and relation in (EXACT, MAJORANT):
            return SeriesVerdict(PROVED_CONVERGENT, partial, n, tail_bound=0.0,
                                 tail_derivation="all terms vanish under the declared model")
        if model.ratio < 1.0 and relation in (EXACT, MAJORANT):
            return SeriesVerdict(
                PROVED_CONVERGENT, partial, n,
                tail_bound=geometric_tail(model.coeff, model.ratio, max(n, 1)),
                tail_derivation=(
                    f"geometric tail of {model.coeff}*{model.ratio}^i"))
        if model.ratio >= 1.0 and model.coeff > 0.0 and relation in (EXACT, MINORANT):
            return SeriesVerdict(
                PROVED_DIVERGENT, partial, n,
                witness=(f"terms at least {model.coeff * model.ratio} from index 1 on"))
        return SeriesVerdict(INCONCLUSIVE, partial, n,
                             witness="declared model cannot certify either direction")

    raise TypeError(f"unknown tail model {type(model).__name__}")


def diagnose_model_series(model: TailModel, n_max: int) -> SeriesVerdict:
    """Verdict for the series whose terms are exactly the model values."""
    return diagnose_terms(model_values(model, n_max), model)


def series_table(terms: Sequence[float], model: Optional[TailModel]) -> list[tuple[int, float, float, Optional[float]]]:
    """Rows (index, term, partial_sum, declared bound or None) for reporting."""
    sums = running_sums([float(t) for t in terms])
    rows = []
    for i, (t, s) in enumerate(zip(terms, sums), start=1):
        bound: Optional[float] = None
        if model is not None:
            if not isinstance(model, ExplicitModel) or i <= len(model.values):
                bound = model.value(i)
        rows.append((i, float(t), s, bound))
    return rows
