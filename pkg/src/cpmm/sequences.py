"""Integer sequences a_1, a_2, ... that parametrize the tent-perturbation and
Ruette matrix families.

A sequence is a finite prefix followed by a tail of one of three kinds:

* ``constant``: a_n = value
* ``power``:    a_n = value ** n
* ``b1``:       a_n = 1 on the set {1,2,3,4} U {3^k+1, 3^k+2 : k >= 2} minus
  ``removed``, and 3 elsewhere
* ``b2``:       like ``b1`` with the removed set produced by the greedy rule of
  :func:`b2_removed`
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

TAIL_KINDS = ("constant", "power", "b1", "b2")


def in_b1(n: int) -> bool:
    """Membership in {1,2,3,4} U {3^k+1, 3^k+2 : k >= 2}."""
    if 1 <= n <= 4:
        return True
    if n < 10:
        return False
    m = n - 1
    for _ in range(2):
        k = 0
        p = m
        while p % 3 == 0 and p > 1:
            p //= 3
            k += 1
        if p == 1 and k >= 2:
            return True
        m -= 1
    return False


B1_MARKS = tuple([1, 2, 3, 4] + [3 ** k + d for k in range(2, 60) for d in (1, 2)])


def b1_elements(upto: int) -> list[int]:
    out = [n for n in (1, 2, 3, 4) if n <= upto]
    k = 2
    while 3 ** k + 1 <= upto:
        for d in (1, 2):
            if 3 ** k + d <= upto:
                out.append(3 ** k + d)
        k += 1
    return out


@dataclass(frozen=True)
class ASequence:
    prefix: tuple[int, ...] = ()
    tail: str = "constant"
    value: int = 1
    removed: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.tail not in TAIL_KINDS:
            raise ValueError(f"unknown sequence tail kind {self.tail!r}")
        if any(int(x) < 0 for x in self.prefix) or self.value < 0:
            raise ValueError("sequence values must be nonnegative")
        object.__setattr__(self, "prefix", tuple(int(x) for x in self.prefix))
        object.__setattr__(self, "removed", tuple(sorted(set(int(x) for x in self.removed))))

    def __call__(self, n: int) -> int:
        if n < 1:
            raise ValueError(f"sequence index must be >= 1, got {n}")
        if n <= len(self.prefix):
            return self.prefix[n - 1]
        if self.tail == "constant":
            return self.value
        if self.tail == "power":
            return self.value ** n
        if not in_b1(n):
            return 3
        if self.tail == "b2":
            return 3 if n in b2_removed(n) else 1
        return 3 if n in self.removed else 1

    def removed_upto(self, n: int) -> tuple:
        """Indices <= n taken out of the b1 set (b1/b2 tails only)."""
        if self.tail == "b2":
            return tuple(x for x in b2_removed(n) if x <= n)
        return tuple(x for x in self.removed if x <= n)

    @property
    def regular_from(self) -> int:
        """First index from which the tail formula applies with no exceptions."""
        start = len(self.prefix) + 1
        if self.removed:
            start = max(start, self.removed[-1] + 1)
        return start

    def sup(self) -> int | None:
        """Supremum of the sequence, or None when it is unbounded."""
        head = max(self.prefix, default=0)
        if self.tail == "constant":
            return max(head, self.value)
        if self.tail == "power":
            if self.value <= 1:
                return max(head, self.value)
            return None
        return max(head, 3)


    def growth(self) -> float:
        """limsup a_n^(1/n)."""
        if self.tail == "power":
            return float(self.value)
        if self.tail == "constant" and self.value == 0:
            return 0.0
        return 1.0

    def all_odd(self) -> bool:
        """True when every term is odd (needed for window perturbation realizations)."""
        if any(x % 2 == 0 for x in self.prefix):
            return False
        if self.tail in ("b1", "b2"):
            return True
        return self.value % 2 == 1

    # -- sums used by the tent family: f(n) = a_1 ... a_{n-1}

    def prod(self, n: int) -> int:
        """a_1 a_2 ... a_n (empty product is 1)."""
        out = 1
        for m in range(1, n + 1):
            out *= self(m)
        return out

    def ones_count(self, n: int) -> int:
        """Number of m <= n with a_m = 1 (b1 tails only)."""
        return sum(1 for m in range(1, n + 1) if self(m) == 1)

    def product_tail_sum(self, start: int, lam: float, cap: int = 200000) -> float:
        """sum_{j >= start} prod_{m=start}^{j} a_m / lam.

        Returns inf when the sum diverges. Closed forms are used for constant and
        power tails; the b1 tail is summed block by block until the remainder is
        below machine precision.
        """
        head = 0.0
        run = 1.0
        j = start
        # walk the irregular part explicitly
        while j < self.regular_from:
            run *= self(j) / lam
            head += run
            j += 1
        if self.tail == "constant":
            q = self.value / lam
            if q >= 1:
                return math.inf if run > 0 and self.value > 0 else head
            return head + run * q / (1 - q)
        if self.tail == "power":
            if self.value == 0:
                return head
            if self.value == 1:
                q = 1 / lam
                return head + run * q / (1 - q) if q < 1 else math.inf
            return math.inf
        # b1 / b2: ratios are 1/lam or 3/lam
        if lam < 3:
            return math.inf
        if lam == 3:
            return head + _b1_block_remainder(self, j, run)
        total = head
        steps = 0
        while steps < cap:
            run *= self(j) / lam
            total += run
            j += 1
            steps += 1
            if run < 1e-18 * max(total, 1e-300):
                return total
        return total

    # -- closed-form tails of the first-return series of the tent family

    def tent_f(self, n: int) -> int:
        return self.prod(n - 1)


def _b1_block_remainder(a: ASequence, j: int, run: float) -> float:
    """Remainder of sum_{m >= j} run * 3^{-(#ones in [j, m])} for the b1 tail at lam=3.

    Between consecutive ones the weight is constant; blocks are summed exactly
    up to 3^60 and the rest is bounded by a geometric series with ratio 1/3.
    """
    total = 0.0
    w = run
    pos = j
    marks = B1_MARKS
    for e in marks:
        if e < pos:
            continue
        total += w * (e - pos)
        pos = e
        if a(e) == 1:
            w /= 3
    return total + 3 * w * 3 ** 60


def b1_series_at_third(removed) -> Fraction:
    """Exact sum_{n>=1} f(n) 3^{-n} for the b1 tail with a finite removed set.

    With c(k) the number of ones among a_1..a_k, f(n) 3^{-n} = 3^{-1-c(n-1)}.
    Gaps between consecutive ones are summed exactly; from the first regular
    block 3^k0 + 1 on, the blocks form geometric series with total
    3^{-c0} (1/4 + 3^{k0-1}).
    """
    removed = set(removed)
    top = max(removed, default=0)
    k0 = 2
    while 3 ** k0 + 1 <= top:
        k0 += 1
    p = 3 ** k0 + 1
    ones = [e for e in B1_MARKS if e < p and e not in removed]
    total = Fraction(0)
    prev, c = 0, 0
    for e in ones:
        total += Fraction(e - prev, 3 ** c)
        prev, c = e, c + 1
    total += Fraction(p - prev, 3 ** c)
    total += Fraction(1, 3 ** c) * (Fraction(1, 4) + 3 ** (k0 - 1))
    return total / 3


_B2_CACHE = {"scanned": 0, "removed": []}


def b2_removed(upto: int) -> tuple:
    """Greedy B(2) removals among the b1 ones up to ``upto``.

    Scans the ones of b1 in increasing order and drops an element whenever the
    full series sum_{n>=1} f(n) 3^{-n} stays below 1 after dropping it. Since
    a drop only raises the series, one increasing scan reproduces the rule
    "remove the least admissible index" at every stage.
    """
    cache = _B2_CACHE
    if upto > cache["scanned"]:
        for e in B1_MARKS:
            if e <= cache["scanned"]:
                continue
            if e > upto:
                break
            trial = cache["removed"] + [e]
            if b1_series_at_third(trial) < 1:
                cache["removed"] = trial
            cache["scanned"] = e
        cache["scanned"] = max(cache["scanned"], upto)
    return tuple(x for x in cache["removed"] if x <= upto)


def b2_partial_removed(horizon: int) -> tuple:
    """Variant greedy that only looks at partial sums up to ``horizon``."""
    removed: list = []
    for e in B1_MARKS:
        if e > horizon:
            break
        trial = removed + [e]
        if tent_partial_sum(b1(trial), Fraction(1, 3), horizon) < 1:
            removed = trial
    return tuple(removed)


def constant(c: int, prefix=()) -> ASequence:
    return ASequence(tuple(prefix), "constant", c)


def power(base: int, prefix=()) -> ASequence:
    return ASequence(tuple(prefix), "power", base)


def a_ell(ell: int) -> ASequence:
    """a_n = 1 for n <= ell and 3 afterwards."""
    return ASequence((1,) * ell, "constant", 3)


def b1(removed=()) -> ASequence:
    return ASequence((), "b1", 3, tuple(removed))


def b2() -> ASequence:
    return ASequence((), "b2", 3)


def to_json(a: ASequence) -> dict:
    return {"prefix": list(a.prefix), "tail": a.tail, "value": a.value, "removed": list(a.removed)}


def from_json(d: dict) -> ASequence:
    unknown = set(d) - {"prefix", "tail", "value", "removed"}
    if unknown:
        raise ValueError(f"unknown sequence fields {sorted(unknown)}")
    return ASequence(tuple(d.get("prefix", ())), d.get("tail", "constant"),
                     int(d.get("value", 1)), tuple(d.get("removed", ())))


def tent_partial_sum(a: ASequence, z: Fraction | float, N: int):
    """sum_{n=1}^{N} f(n) z^n with f(n) = a_1 ... a_{n-1}."""
    total = 0 * z
    f = 1
    zn = z
    for n in range(1, N + 1):
        total += f * zn
        f *= a(n)
        zn *= z
    return total
