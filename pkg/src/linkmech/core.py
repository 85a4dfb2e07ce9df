"""Domain types for quota-linked collective decision problems.

A problem bundles a finite decision set, a finite type set with a utility
table, and a rational prior over types.  Across K linked copies of the
problem an agent holds a length-K type vector; its empirical marginal lives
on the 1/K grid and is compared to other distributions in total variation.
Probabilities are exact ``fractions.Fraction`` values throughout so that
every distance and count downstream is bit-reproducible; utilities may be
ordinary finite-precision numbers.

Labels for types and decisions are opaque strings.  Wherever a tie must be
broken deterministically, the canonical order is lexicographic on the label.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union


class ValidationError(ValueError):
    """Untrusted input broke a domain invariant."""


class EnumerationCapError(RuntimeError):
    """An enumeration would exceed its configured size cap."""


Weights = Mapping[str, Fraction]


def as_fraction(value: Union[int, str, float, Fraction], field: str = "value") -> Fraction:
    """Parse an exact rational from an int, a "p/q" or decimal string, or a float.

    Floats are read through their shortest decimal representation, so 0.1
    means exactly 1/10 rather than the nearest binary double.
    """
    if isinstance(value, bool):
        raise ValidationError(f"{field}: expected a number, got a bool")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        value = repr(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"{field}: cannot parse rational from {value!r}") from exc
    raise ValidationError(f"{field}: cannot parse rational from {value!r}")


def _check_labels(labels: Sequence[str], field: str) -> tuple[str, ...]:
    if not labels:
        raise ValidationError(f"{field}: must be nonempty")
    out = []
    for lab in labels:
        if not isinstance(lab, str) or not lab:
            raise ValidationError(f"{field}: labels must be nonempty strings, got {lab!r}")
        out.append(lab)
    if len(set(out)) != len(out):
        dupes = sorted({x for x in out if out.count(x) > 1})
        raise ValidationError(f"{field}: duplicate labels {dupes}")
    return tuple(out)


@dataclass(frozen=True)
class Problem:
    """A single-agent decision problem: decisions, types, utilities, prior.

    ``utility[t][d]`` is the payoff of decision ``d`` to an agent of type
    ``t``.  ``prior[t]`` is the probability of type ``t``; weights are exact
    rationals summing to 1.  Instances are immutable by convention: the
    mappings are never mutated after construction.
    """

    decisions: tuple[str, ...]
    types: tuple[str, ...]
    utility: Mapping[str, Mapping[str, float]]
    prior: Weights

    @property
    def canonical_types(self) -> tuple[str, ...]:
        return tuple(sorted(self.types))

    def utility_of(self, decision: str, typ: str) -> float:
        return self.utility[typ][decision]

    def vector(self, entries: Iterable[str]) -> "PreferenceVector":
        """Build a type vector over this problem's type universe."""
        return PreferenceVector(tuple(entries), self.canonical_types)


def validate_problem(spec: Mapping) -> Problem:
    """Check an untrusted problem description and return a ``Problem``.

    Expected keys: ``decisions`` (list of labels), ``types`` (list of
    labels), ``prior`` (list of rationals aligned with ``types``, e.g.
    ``"1/3"``), ``utility`` (mapping type -> decision -> number).  Every
    violation is reported with the offending field.
    """
    if not isinstance(spec, Mapping):
        raise ValidationError("problem spec must be a mapping")
    for key in ("decisions", "types", "prior", "utility"):
        if key not in spec:
            raise ValidationError(f"{key}: missing")

    decisions = _check_labels(spec["decisions"], "decisions")
    types = _check_labels(spec["types"], "types")

    raw_prior = spec["prior"]
    if not isinstance(raw_prior, Sequence) or isinstance(raw_prior, (str, bytes)):
        raise ValidationError("prior: must be a list aligned with types")
    if len(raw_prior) != len(types):
        raise ValidationError(
            f"prior: has {len(raw_prior)} entries for {len(types)} types"
        )
    weights = {}
    for t, raw in zip(types, raw_prior):
        w = as_fraction(raw, field=f"prior[{t}]")
        if w < 0:
            raise ValidationError(f"prior[{t}]: negative weight {w}")
        weights[t] = w
    total = sum(weights.values())
    if total != 1:
        # Fixed-precision specs may miss 1 by rounding; renormalize exactly
        # when the drift is negligible, reject otherwise.
        if total > 0 and abs(total - 1) <= Fraction(1, 10**12):
            weights = {t: w / total for t, w in weights.items()}
        else:
            raise ValidationError(f"prior: sums to {total}, expected 1")

    raw_util = spec["utility"]
    if not isinstance(raw_util, Mapping):
        raise ValidationError("utility: must be a mapping type -> decision -> number")
    unknown = sorted(set(raw_util) - set(types))
    if unknown:
        raise ValidationError(f"utility: unknown types {unknown}")
    utility: dict[str, dict[str, float]] = {}
    for t in types:
        if t not in raw_util:
            raise ValidationError(f"utility[{t}]: missing")
        row = raw_util[t]
        if not isinstance(row, Mapping):
            raise ValidationError(f"utility[{t}]: must map decisions to numbers")
        extra = sorted(set(row) - set(decisions))
        if extra:
            raise ValidationError(f"utility[{t}]: unknown decisions {extra}")
        utility[t] = {}
        for d in decisions:
            if d not in row:
                raise ValidationError(f"utility[{t}][{d}]: missing")
            val = row[d]
            if isinstance(val, bool) or not isinstance(val, (int, float, Fraction)):
                raise ValidationError(f"utility[{t}][{d}]: not a number: {val!r}")
            utility[t][d] = val
    return Problem(decisions=decisions, types=types, utility=utility, prior=weights)


@dataclass(frozen=True)
class PreferenceVector:
    """A length-K sequence of type labels over a fixed type universe."""

    entries: tuple[str, ...]
    types: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "types", tuple(sorted(self.types)))
        if len(set(self.types)) != len(self.types):
            raise ValidationError("types: duplicate labels")
        if not self.entries:
            raise ValidationError("entries: K must be at least 1")
        universe = set(self.types)
        for k, t in enumerate(self.entries, start=1):
            if t not in universe:
                raise ValidationError(f"entries[{k}]: unknown type {t!r}")

    @property
    def K(self) -> int:
        return len(self.entries)

    def counts(self) -> Counter:
        return Counter(self.entries)

    def permuted(self, perm: Sequence[int]) -> "PreferenceVector":
        """Reorder slots: entry k of the result is entry perm[k] of self (0-based)."""
        if sorted(perm) != list(range(self.K)):
            raise ValidationError("perm: not a permutation of the slot indices")
        return PreferenceVector(tuple(self.entries[i] for i in perm), self.types)


@dataclass(frozen=True)
class Marginal:
    """Empirical distribution of a type vector: weights on the 1/K grid."""

    types: tuple[str, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "weights", tuple(Fraction(w) for w in self.weights))
        if len(self.types) != len(self.weights):
            raise ValidationError("marginal: types and weights must align")
        if any(w < 0 for w in self.weights):
            raise ValidationError("marginal: negative weight")
        if sum(self.weights) != 1:
            raise ValidationError(f"marginal: weights sum to {sum(self.weights)}, expected 1")

    def weight(self, typ: str) -> Fraction:
        return self.weights[self.types.index(typ)]

    def as_dict(self) -> dict[str, Fraction]:
        return dict(zip(self.types, self.weights))


def marginal(v: PreferenceVector) -> Marginal:
    """Empirical marginal of ``v``: weight of t is (count of t in v)/K."""
    counts = v.counts()
    k = v.K
    return Marginal(v.types, tuple(Fraction(counts.get(t, 0), k) for t in v.types))


@dataclass(frozen=True)
class Quota:
    """Integer report budget per type; counts sum to the number of copies K."""

    types: tuple[str, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "counts", tuple(self.counts))
        if list(self.types) != sorted(self.types) or len(set(self.types)) != len(self.types):
            raise ValidationError("quota: types must be distinct and in canonical order")
        if len(self.types) != len(self.counts):
            raise ValidationError("quota: types and counts must align")
        for t, c in zip(self.types, self.counts):
            if not isinstance(c, int) or isinstance(c, bool) or c < 0:
                raise ValidationError(f"quota[{t}]: count must be a nonnegative integer")
        if sum(self.counts) < 1:
            raise ValidationError("quota: counts must sum to K >= 1")

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "Quota":
        types = tuple(sorted(counts))
        return cls(types, tuple(counts[t] for t in types))

    @property
    def K(self) -> int:
        return sum(self.counts)

    def count(self, typ: str) -> int:
        return self.counts[self.types.index(typ)]

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.types, self.counts))

    def distribution(self) -> Marginal:
        k = self.K
        return Marginal(self.types, tuple(Fraction(c, k) for c in self.counts))


@dataclass(frozen=True)
class Message:
    """A preference vector whose per-type counts meet a quota exactly."""

    vector: PreferenceVector
    quota: Quota

    def __post_init__(self):
        if self.vector.types != self.quota.types:
            raise ValidationError(
                f"message: vector types {self.vector.types} != quota types {self.quota.types}"
            )
        if self.vector.K != self.quota.K:
            raise ValidationError(f"message: length {self.vector.K} != quota total {self.quota.K}")
        counts = self.vector.counts()
        over = sorted(t for t in self.quota.types if counts.get(t, 0) > self.quota.count(t))
        under = sorted(t for t in self.quota.types if counts.get(t, 0) < self.quota.count(t))
        if over or under:
            raise ValidationError(
                f"message violates quota: over-represented {over}, under-represented {under}"
            )

    @property
    def entries(self) -> tuple[str, ...]:
        return self.vector.entries

    @property
    def K(self) -> int:
        return self.vector.K


def _weights_of(dist: Union[Marginal, Quota, Weights], field: str) -> dict[str, Fraction]:
    if isinstance(dist, Marginal):
        return dist.as_dict()
    if isinstance(dist, Quota):
        return dist.distribution().as_dict()
    if isinstance(dist, Mapping):
        return {t: Fraction(w) for t, w in dist.items()}
    raise ValidationError(f"{field}: expected a distribution, got {type(dist).__name__}")


def tv_distance(q: Union[Marginal, Quota, Weights], q_prime: Union[Marginal, Quota, Weights]) -> Fraction:
    """Total variation distance: the sum over types of (q - q')_+.

    Symmetric whenever both arguments sum to 1; zero exactly on equality;
    never exceeds 1.
    """
    a = _weights_of(q, "q")
    b = _weights_of(q_prime, "q_prime")
    if set(a) != set(b):
        raise ValidationError(
            f"tv_distance: mismatched type sets {sorted(a)} vs {sorted(b)}"
        )
    return sum((a[t] - b[t] for t in a if a[t] > b[t]), start=Fraction(0))
