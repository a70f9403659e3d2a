"""Singular-value profiles and symbolic operator-ideal membership.

A :class:`SeqProfile` is a non-increasing, non-negative sequence stored as an
explicit finite prefix followed by a symbolic tail (:class:`TailModel`).
Membership of a sequence in the characteristic set of an ideal is decided
from the tail alone, since a finite prefix never changes it.

Indices are 1-based throughout: ``profile.term(n)`` is the n-th term, and the
tail formula is evaluated at the global index ``n > len(prefix)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

MAX_PREFIX = 2 ** 16
_MONO_RTOL = 1e-12
_MEAN_WINDOW = 4096

TAIL_KINDS = ("zero", "power", "powerlog", "geometric")


@dataclass(frozen=True)
class TailModel:
    """Symbolic decay model for the terms beyond the prefix.

    ``power``     scale * n**-p
    ``powerlog``  scale * n**-p * log(n)**k
    ``geometric`` scale * r**n
    ``zero``      0
    """

    kind: str = "zero"
    p: float = 0.0
    k: float = 0
    r: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in TAIL_KINDS:
            raise ValueError(f"unknown tail kind {self.kind!r}")
        if self.kind != "zero" and not self.scale > 0:
            if self.scale == 0:
                _set(self, kind="zero", p=0.0, k=0, r=0.0, scale=1.0)
                return
            raise ValueError("tail scale must be positive")
        if self.kind in ("power", "powerlog") and not self.p > 0:
            raise ValueError("power exponent must be positive")
        if self.kind == "powerlog" and self.k < 0:
            raise ValueError("log exponent must be nonnegative")
        if self.kind == "powerlog" and self.k == 0:
            _set(self, kind="power", k=0)
        if self.kind == "geometric" and not 0 < self.r < 1:
            raise ValueError("geometric ratio must lie in (0, 1)")
        if self.kind == "zero":
            _set(self, p=0.0, k=0, r=0.0, scale=1.0)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def term(self, n):
        """Evaluate the tail formula at (array of) 1-based indices ``n``."""
        n = np.asarray(n, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(n)
        if self.kind == "power":
            return self.scale * n ** (-self.p)
        if self.kind == "powerlog":
            return self.scale * n ** (-self.p) * np.log(n) ** self.k
        return self.scale * np.exp(n * math.log(self.r))

    def scaled(self, c: float) -> "TailModel":
        if c == 0 or self.is_zero:
            return ZERO
        return _replace(self, scale=self.scale * c)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("power", "powerlog"):
            d["p"] = self.p
        if self.kind == "powerlog":
            d["k"] = self.k
        if self.kind == "geometric":
            d["r"] = self.r
        if self.kind != "zero":
            d["scale"] = self.scale
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TailModel":
        return cls(kind=d["kind"], p=float(d.get("p", 0.0)), k=d.get("k", 0),
                   r=float(d.get("r", 0.0)), scale=float(d.get("scale", 1.0)))


def _set(obj, **kw):
    for key, val in kw.items():
        object.__setattr__(obj, key, val)


def _replace(tail, **kw):
    d = dict(kind=tail.kind, p=tail.p, k=tail.k, r=tail.r, scale=tail.scale)
    d.update(kw)
    return TailModel(**d)


ZERO = TailModel()


def power(p: float, scale: float = 1.0) -> TailModel:
    return TailModel("power", p=p, scale=scale)


def power_log(p: float, k: float, scale: float = 1.0) -> TailModel:
    return TailModel("powerlog", p=p, k=k, scale=scale)


def geometric(r: float, scale: float = 1.0) -> TailModel:
    return TailModel("geometric", r=r, scale=scale)


@dataclass(frozen=True)
class SeqProfile:
    """Non-increasing sequence: sorted explicit prefix, then a tail formula."""

    prefix: tuple = ()
    tail: TailModel = field(default_factory=TailModel)

    def __post_init__(self):
        pre = np.asarray(self.prefix, dtype=float).ravel()
        if pre.size > MAX_PREFIX:
            raise ValueError(f"prefix longer than {MAX_PREFIX} terms")
        if pre.size and (not np.all(np.isfinite(pre)) or pre.min() < 0):
            raise ValueError("prefix entries must be finite and nonnegative")
        pre = np.sort(pre)[::-1]
        object.__setattr__(self, "prefix", tuple(float(x) for x in pre))
        if pre.size and not self.tail.is_zero:
            first = float(self.tail.term(pre.size + 1))
            if first > pre[-1] * (1 + _MONO_RTOL) + 1e-300:
                raise ValueError(
                    f"tail starts above the prefix ({first:.3g} > {pre[-1]:.3g})")

    @property
    def tail_start(self) -> int:
        return len(self.prefix) + 1

    def term(self, n: int) -> float:
        if n <= len(self.prefix):
            return self.prefix[n - 1]
        return float(self.tail.term(n))

    def terms(self, count: int) -> np.ndarray:
        """First ``count`` terms as an array."""
        out = np.empty(count)
        m = min(count, len(self.prefix))
        out[:m] = self.prefix[:m]
        if count > m:
            out[m:] = self.tail.term(np.arange(m + 1, count + 1))
        return out

    def scaled(self, c: float) -> "SeqProfile":
        if c < 0:
            raise ValueError("profiles scale by nonnegative factors only")
        return SeqProfile(tuple(c * x for x in self.prefix), self.tail.scaled(c))

    def powered(self, q: float) -> "SeqProfile":
        """Termwise power ``s_n ** q``."""
        t = self.tail
        if t.kind == "power":
            nt = power(t.p * q, t.scale ** q)
        elif t.kind == "powerlog":
            nt = power_log(t.p * q, t.k * q, t.scale ** q)
        elif t.kind == "geometric":
            nt = geometric(t.r ** q, t.scale ** q)
        else:
            nt = ZERO
        return SeqProfile(tuple(x ** q for x in self.prefix), nt)

    def power_sum(self, p: float = 1.0, start: int = 1) -> float:
        """``sum_{n >= start} s_n**p``; ``inf`` when the series diverges."""
        head = float(np.sum(np.asarray(self.prefix[start - 1:]) ** p))
        return head + _tail_power_sum(self.tail, p, max(start, self.tail_start))

    def to_dict(self) -> dict:
        return {"prefix": list(self.prefix), "tail": self.tail.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "SeqProfile":
        return cls(tuple(d.get("prefix", ())), TailModel.from_dict(d.get("tail", {"kind": "zero"})))


def finite_profile(values) -> SeqProfile:
    return SeqProfile(tuple(values), ZERO)


def _tail_power_sum(t: TailModel, p: float, start: int) -> float:
    if t.is_zero:
        return 0.0
    if t.kind == "geometric":
        rp = t.r ** p
        return t.scale ** p * rp ** start / (1 - rp)
    q = t.p * p
    if q <= 1 + 1e-12:
        return math.inf
    if t.kind == "power":
        return t.scale ** p * float(special.zeta(q, start))
    import mpmath

    kp = t.k * p
    val = mpmath.nsum(lambda n: n ** (-q) * mpmath.log(n) ** kp, [max(start, 2), mpmath.inf])
    return t.scale ** p * float(val)


# ---------------------------------------------------------------- ideals

@dataclass(frozen=True)
class IdealTag:
    """Symbolic identity of an operator ideal.

    ``kind`` is ``"finite"``, ``"schatten"`` or ``"compact"``. Schatten tags
    with ``p < 1`` only arise as squares of ``S_p`` with ``p < 2``; they are
    quasi-normed and not arithmetic-mean closed.
    """

    kind: str
    p: float = None

    def __post_init__(self):
        if self.kind not in ("finite", "schatten", "compact"):
            raise ValueError(f"unknown ideal {self.kind!r}")
        if self.kind == "schatten":
            if self.p is None or not self.p > 0:
                raise ValueError("schatten tag needs p > 0")
            object.__setattr__(self, "p", float(self.p))
        else:
            object.__setattr__(self, "p", None)

    @property
    def sub_schatten(self) -> bool:
        return self.kind == "schatten" and self.p < 1

    @property
    def is_am_closed(self) -> bool:
        if self.kind == "finite":
            return False
        return not self.sub_schatten

    def __str__(self):
        if self.kind == "schatten":
            return f"schatten:{self.p:g}"
        return "finite-rank" if self.kind == "finite" else "compact"

    @classmethod
    def parse(cls, text: str) -> "IdealTag":
        text = text.strip().lower()
        if text in ("finite-rank", "finite", "finiterank"):
            return FINITE_RANK
        if text == "compact":
            return COMPACT
        if text.startswith("schatten"):
            _, _, p = text.partition(":")
            return schatten(float(p))
        raise ValueError(f"cannot parse ideal {text!r}")

    def to_dict(self) -> dict:
        name = {"finite": "finite-rank", "schatten": "schatten", "compact": "compact"}[self.kind]
        d = {"ideal": name}
        if self.kind == "schatten":
            d["p"] = self.p
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IdealTag":
        name = d["ideal"]
        if name == "schatten":
            return schatten(float(d["p"]))
        return cls.parse(name)


FINITE_RANK = IdealTag("finite")
COMPACT = IdealTag("compact")


def schatten(p: float) -> IdealTag:
    return IdealTag("schatten", p)


# ------------------------------------------------------------ operations

def ampliate(s: SeqProfile, m: int) -> SeqProfile:
    """m-fold repetition ``(D_m s)_n = s_ceil(n/m)``.

    The prefix is exact. The tail formula is the asymptotic equivalent:
    ``s_ceil(n/m) ~ scale * (n/m)**-p``, i.e. the scale picks up ``m**p``.
    """
    if m < 1:
        raise ValueError("ampliation factor must be >= 1")
    if m == 1:
        return s
    pre = np.repeat(np.asarray(s.prefix), m)
    t = s.tail
    if t.kind in ("power", "powerlog"):
        nt = _replace(t, scale=t.scale * m ** t.p)
    elif t.kind == "geometric":
        nt = geometric(t.r ** (1.0 / m), t.scale)
    else:
        nt = ZERO
    return _clip_tail(pre, nt)


def _clip_tail(prefix, tail):
    """Build a profile, lowering a tail scale that overshoots the prefix end."""
    prefix = np.asarray(prefix, dtype=float)
    if prefix.size and not tail.is_zero:
        first = float(tail.term(prefix.size + 1))
        last = float(np.min(prefix))
        if first > last:
            tail = tail.scaled(last / first) if last > 0 else ZERO
    return SeqProfile(tuple(prefix), tail)


def arith_mean(s: SeqProfile) -> SeqProfile:
    """Profile of the running means ``(s_1 + ... + s_n) / n``.

    The means are computed exactly over a window of at least 4096 terms; the
    tail variant follows the symbolic rules below with its scale matched to
    the exact mean at the first tail index.

    ====================  ==========================
    input tail            mean tail
    ====================  ==========================
    zero, geometric       power(1)
    power(p), p > 1       power(1)
    power(1)              powerlog(1, 1)
    power(p), p < 1       power(p)
    powerlog(p, k)        same rule, k -> k + 1 at p = 1
    ====================  ==========================
    """
    window = min(max(len(s.prefix), _MEAN_WINDOW), MAX_PREFIX)
    vals = s.terms(window + 1)
    means = np.cumsum(vals) / np.arange(1, window + 2)
    # log factors vanish at n = 1; keep the smallest non-increasing majorant
    means = np.maximum.accumulate(means[::-1])[::-1]
    if means[-1] == 0:
        return SeqProfile(tuple(means[:window]), ZERO)
    t = s.tail
    if t.kind in ("power", "powerlog"):
        k = t.k if t.kind == "powerlog" else 0
        if math.isclose(t.p, 1.0, rel_tol=0, abs_tol=1e-12):
            shape = power_log(1.0, k + 1)
        elif t.p > 1:
            shape = power(1.0)
        else:
            shape = power_log(t.p, k) if k else power(t.p)
    else:
        shape = power(1.0)
    scale = means[-1] / float(shape.term(window + 1))
    return SeqProfile(tuple(means[:window]), shape.scaled(scale))


def _decay_key(t: TailModel):
    """Sortable key: larger key means slower decay."""
    if t.is_zero:
        return (0, 0.0, 0.0)
    if t.kind == "geometric":
        return (1, t.r, 0.0)
    k = t.k if t.kind == "powerlog" else 0
    return (2, -t.p, float(k))


def tail_dominated(a: TailModel, b: TailModel) -> bool:
    """Asymptotic ``a = O(b)`` between tail formulas."""
    ka, kb = _decay_key(a), _decay_key(b)
    if ka[0] != kb[0]:
        return ka[0] < kb[0]
    if ka[0] == 0:
        return True
    if ka[0] == 1:
        return a.r <= b.r + 1e-15
    if not math.isclose(a.p, b.p, rel_tol=0, abs_tol=1e-12):
        return a.p > b.p
    return ka[2] <= kb[2]


def dominance_constant(a: SeqProfile, b: SeqProfile):
    """Witness ``M`` with ``a_n <= M b_n`` for all n, or ``None``.

    Prefix indices are checked exactly; a zero in ``b`` where ``a`` is
    positive rules domination out. Beyond both prefixes the tails decide
    symbolically and the constant is estimated on a sample out to 1e6.
    """
    if not tail_dominated(a.tail, b.tail):
        return None
    n_explicit = max(len(a.prefix), len(b.prefix))
    idx = np.arange(1, n_explicit + 1)
    av, bv = a.terms(n_explicit), b.terms(n_explicit)
    skip = (idx == 1) & (b.tail.kind == "powerlog") & (len(b.prefix) == 0)
    bad = (bv == 0) & (av > 0) & ~skip
    if bad.any():
        return None
    ratios = [0.0]
    pos = bv > 0
    if pos.any():
        ratios.append(float(np.max(av[pos] / bv[pos])))
    if not a.tail.is_zero:
        start = n_explicit + 1
        sample = np.unique(np.geomspace(start, max(start, 1e6), 200).astype(int))
        num, den = a.tail.term(sample), b.tail.term(sample)
        keep = den > 0
        ratios.append(float(np.max(num[keep] / den[keep])))
    return max(ratios)


def big_o_dominates(a: SeqProfile, b: SeqProfile) -> bool:
    """True iff ``a = O(b)``."""
    return dominance_constant(a, b) is not None


def in_ideal(s: SeqProfile, j: IdealTag) -> bool:
    """Decide ``s`` in the characteristic set of ``j`` from the tail."""
    t = s.tail
    if j.kind == "compact" or t.is_zero:
        return True
    if j.kind == "finite":
        return False
    if t.kind == "geometric":
        return True
    # powerlog with k >= 0 sits in l^p exactly when power does
    return t.p * j.p > 1 + 1e-12


def am_closure_member(s: SeqProfile, j: IdealTag) -> bool:
    """Membership in the arithmetic-mean closure of ``j``.

    Finite rank closes to trace class, and so does every sub-Schatten tag;
    Schatten(p >= 1) and compact are already closed.
    """
    if j.kind == "finite" or j.sub_schatten:
        return in_ideal(s, schatten(1.0))
    return in_ideal(s, j)


def ideal_square(j: IdealTag) -> IdealTag:
    """Ideal spanned by products of two members."""
    if j.kind == "schatten":
        return schatten(j.p / 2)
    return j


def profile_add(a: SeqProfile, b: SeqProfile) -> SeqProfile:
    """Termwise sum; the tail is exact for like tails, else the dominant one."""
    n = max(len(a.prefix), len(b.prefix))
    pre = a.terms(n) + b.terms(n)
    ta, tb = a.tail, b.tail
    if ta.is_zero:
        t = tb
    elif tb.is_zero:
        t = ta
    elif _decay_key(ta) == _decay_key(tb):
        t = ta.scaled(1 + tb.scale / ta.scale)
    else:
        t = tb if tail_dominated(ta, tb) else ta
    return _clip_tail(pre, t)


def profile_mul(a: SeqProfile, b: SeqProfile) -> SeqProfile:
    """Termwise product; geometric times power is bounded by a geometric."""
    n = max(len(a.prefix), len(b.prefix))
    pre = a.terms(n) * b.terms(n)
    ta, tb = a.tail, b.tail
    if ta.is_zero or tb.is_zero:
        t = ZERO
    elif ta.kind == "geometric" and tb.kind == "geometric":
        t = geometric(ta.r * tb.r, ta.scale * tb.scale)
    elif ta.kind == "geometric" or tb.kind == "geometric":
        g, other = (ta, tb) if ta.kind == "geometric" else (tb, ta)
        bound = float(np.max(other.term(np.arange(n + 1, n + 64))))
        t = g.scaled(bound)
    else:
        k = (ta.k if ta.kind == "powerlog" else 0) + (tb.k if tb.kind == "powerlog" else 0)
        p = ta.p + tb.p
        s = ta.scale * tb.scale
        t = power_log(p, k, s) if k else power(p, s)
    return _clip_tail(pre, t)
