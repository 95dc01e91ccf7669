"""Tower models and diagonal embeddings from substitution subshifts.

A primitive substitution with a fixed point gives a minimal shift space.
First-return words to a cylinder [w] (read along the fixed point) carve the
spectrum into levels, one per distinct return time; sampled points are
finite words with an explicit horizon, so shifts and all generator
evaluations are exact and total within declared bounds. The inter-scale
gluing structure is carried by diagonal embedding maps obtained by
factoring inner return words over outer ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .dsh_model import (
    DiagonalMap,
    Element,
    FiniteDshModel,
    Level,
    ModelPoint,
    PointRef,
)
from .matrixkit import _frozen

DEFAULT_SCAN_LENGTH = 20_000


class ScanError(ValueError):
    """The scanned prefix cannot certify the requested combinatorial data."""


@dataclass(frozen=True)
class Substitution:
    """A primitive substitution with a designated fixed-point seed symbol."""

    alphabet: tuple[str, ...]
    rules: Mapping[str, str] = field(hash=False)
    seed: str = "0"

    def __post_init__(self):
        if set(self.rules) != set(self.alphabet):
            raise ValueError("rules must cover exactly the alphabet")
        for sym, word in self.rules.items():
            if not word or any(c not in self.alphabet for c in word):
                raise ValueError(f"rule for '{sym}' uses symbols outside the alphabet")
        if self.seed not in self.alphabet:
            raise ValueError(f"seed '{self.seed}' not in the alphabet")
        if self.rules[self.seed][0] != self.seed or len(self.rules[self.seed]) < 2:
            raise ValueError(
                f"seed '{self.seed}' does not generate a fixed point "
                f"(its rule must start with the seed and have length >= 2)"
            )
        if not self.is_primitive():
            raise ValueError("substitution is not primitive")

    def apply(self, word: str) -> str:
        return "".join(self.rules[c] for c in word)

    def incidence_matrix(self) -> np.ndarray:
        k = len(self.alphabet)
        idx = {c: i for i, c in enumerate(self.alphabet)}
        m = np.zeros((k, k), dtype=np.int64)
        for c in self.alphabet:
            for d in self.rules[c]:
                m[idx[d], idx[c]] += 1
        return m

    def is_primitive(self) -> bool:
        m = self.incidence_matrix()
        power = np.eye(len(self.alphabet), dtype=np.int64)
        # positivity appears within (k-1)^2 + 1 steps when it appears at all
        for _ in range((len(self.alphabet) - 1) ** 2 + 1):
            power = np.minimum(power @ m, 1)
            if np.all(power > 0):
                return True
        return False

    @staticmethod
    def fibonacci() -> "Substitution":
        return Substitution(("0", "1"), {"0": "01", "1": "0"}, "0")

    @staticmethod
    def thue_morse() -> "Substitution":
        return Substitution(("0", "1"), {"0": "01", "1": "10"}, "0")

    @staticmethod
    def from_json(obj: dict) -> "Substitution":
        return Substitution(tuple(obj["alphabet"]), dict(obj["rules"]), obj["seed"])

    def to_json(self) -> dict:
        return {"alphabet": list(self.alphabet), "rules": dict(self.rules), "seed": self.seed}


def fixed_point_prefix(s: Substitution, L: int) -> str:
    """The length-L prefix of the substitution fixed point."""
    if L < 1:
        raise ValueError("prefix length must be positive")
    w = s.seed
    while len(w) < L:
        w = s.apply(w)
    return w[:L]


def occurrences(text: str, pattern: str) -> list[int]:
    """All (possibly overlapping) start offsets of pattern in text."""
    out = []
    start = text.find(pattern)
    while start != -1:
        out.append(start)
        start = text.find(pattern, start + 1)
    return out


def _scan_return_words(prefix: str, w: str) -> set[str]:
    occs = occurrences(prefix, w)
    return {prefix[a:b] for a, b in zip(occs, occs[1:])}


def return_words(s: Substitution, w: str, L_scan: int = DEFAULT_SCAN_LENGTH) -> list[str]:
    """Distinct first-return words to the cylinder [w], scan-stabilized.

    Scans the fixed-point prefixes of lengths L_scan and 2*L_scan; for a
    linearly recurrent subshift the sets agree once the scan is long enough,
    which is the stabilization certificate. Sorted by (length, word).
    """
    if L_scan < 2 * len(w) + 2:
        raise ValueError(f"scan length {L_scan} is too short for |w| = {len(w)}")
    short = fixed_point_prefix(s, L_scan)
    if w not in short:
        raise ScanError(f"'{w}' does not occur in the scanned prefix")
    found = _scan_return_words(short, w)
    if not found:
        raise ScanError(f"'{w}' occurs fewer than twice in the scanned prefix")
    double = _scan_return_words(fixed_point_prefix(s, 2 * L_scan), w)
    if found != double:
        raise ScanError(
            f"return-word set for '{w}' did not stabilize at scan length {L_scan}; "
            f"rescan with a larger L_scan"
        )
    return sorted(found, key=lambda r: (len(r), r))


@dataclass(frozen=True)
class TowerModel:
    """A first-return tower over a base cylinder, as a finite model.

    Level i collects sampled words of length n_i + horizon whose prefix is a
    return word of length n_i (the i-th distinct return time). Point ids are
    the words themselves. Tower models have no glued points; the gluing
    structure between scales lives in the embedding maps.
    """

    substitution: Substitution
    base: str
    horizon: int
    return_time_words: tuple[tuple[int, tuple[str, ...]], ...]
    model: FiniteDshModel

    @property
    def return_times(self) -> tuple[int, ...]:
        return tuple(t for t, _ in self.return_time_words)

    @property
    def max_return_time(self) -> int:
        return self.return_times[-1]

    def level_of_time(self, n: int) -> int:
        for i, (t, _) in enumerate(self.return_time_words, start=1):
            if t == n:
                return i
        raise KeyError(f"no level with return time {n}")

    def point_word(self, ref: PointRef) -> str:
        return ref.point


def build_tower_model(s: Substitution, w: str, horizon: int,
                      max_points_per_level: int = 32,
                      L_scan: int = DEFAULT_SCAN_LENGTH) -> TowerModel:
    """Sample a first-return tower model for the cylinder [w].

    The horizon must be at least |w| so that return times are decidable from
    the sampled words alone. Points are the distinct words seen at return
    positions in the doubled scan prefix, capped per level.
    """
    if horizon < len(w):
        raise ValueError(f"horizon {horizon} shorter than the base word ({len(w)})")
    rws = return_words(s, w, L_scan)
    times = sorted({len(r) for r in rws})
    by_time = {t: tuple(sorted(r for r in rws if len(r) == t)) for t in times}

    prefix = fixed_point_prefix(s, 2 * L_scan)
    occs = occurrences(prefix, w)
    samples: dict[int, list[str]] = {t: [] for t in times}
    for a, b in zip(occs, occs[1:]):
        n = b - a
        word = prefix[a:a + n + horizon]
        if len(word) < n + horizon:
            continue
        bucket = samples[n]
        if word not in bucket and len(bucket) < max_points_per_level:
            bucket.append(word)
    levels = []
    for t in times:
        pts = tuple(ModelPoint(word) for word in sorted(samples[t]))
        if not pts:
            raise ScanError(f"no sampled points at return time {t}; increase L_scan")
        levels.append(Level(t, pts))
    return TowerModel(
        substitution=s,
        base=w,
        horizon=horizon,
        return_time_words=tuple((t, by_time[t]) for t in times),
        model=FiniteDshModel(tuple(levels)),
    )


@dataclass(frozen=True)
class FactorizationMap:
    """Each return word to [inner] factored over the return words to [outer]."""

    outer: str
    inner: str
    factors: Mapping[str, tuple[str, ...]] = field(hash=False)


def factorize_returns(s: Substitution, w: str, w_inner: str,
                      L_scan: int = DEFAULT_SCAN_LENGTH) -> FactorizationMap:
    """Factor every return word to [w_inner] at its occurrences of w.

    w must be a proper prefix of w_inner. The factor boundaries are exactly
    the occurrence positions of w inside the return word (continued by
    w_inner, which starts with w), so the factorization is unique; every
    factor must itself be a return word to [w].
    """
    if not w_inner.startswith(w) or w_inner == w:
        raise ValueError("the outer base must be a proper prefix of the inner base")
    outer_set = set(return_words(s, w, L_scan))
    inner = return_words(s, w_inner, L_scan)
    factors: dict[str, tuple[str, ...]] = {}
    for rw in inner:
        extended = rw + w_inner
        cuts = [p for p in occurrences(extended, w) if p < len(rw)]
        if cuts[0] != 0:
            raise ScanError(f"return word '{rw}' does not begin with '{w}'")
        cuts.append(len(rw))
        parts = tuple(rw[a:b] for a, b in zip(cuts, cuts[1:]))
        for part in parts:
            if part not in outer_set:
                raise ScanError(
                    f"factor '{part}' of '{rw}' is not a known return word to '{w}'; "
                    f"rescan with a larger L_scan"
                )
        factors[rw] = parts
    return FactorizationMap(w, w_inner, factors)


def embedding_map(fmap: FactorizationMap, source: TowerModel, target: TowerModel) -> DiagonalMap:
    """The diagonal embedding of the outer tower algebra into the inner one.

    A target point (a word z of level return time q) maps to the ordered
    list of source points representing z, shift^{S_1}(z), ...,
    shift^{S_{s-1}}(z), where the S_j are the partial sums of its return
    word's factor lengths.
    """
    if source.substitution != target.substitution:
        raise ValueError("towers come from different substitutions")
    if source.base != fmap.outer or target.base != fmap.inner:
        raise ValueError("factorization map does not match the towers' bases")
    if target.horizon < source.horizon + source.max_return_time:
        raise ValueError(
            f"target horizon {target.horizon} < source horizon {source.horizon} "
            f"+ max source return time {source.max_return_time}"
        )
    lists: dict[PointRef, tuple[PointRef, ...]] = {}
    for tref in target.model.free_refs():
        word = tref.point
        q = target.model.dim(tref.level)
        rw = word[:q]
        if rw not in fmap.factors:
            raise KeyError(f"return word '{rw}' missing from the factorization map")
        parts = fmap.factors[rw]
        entries: list[PointRef] = []
        offset = 0
        for part in parts:
            n = len(part)
            if word[offset:offset + n] != part:
                raise ScanError(f"factorization of '{rw}' does not match the sampled word")
            sub = word[offset:offset + n + source.horizon]
            sref = PointRef(source.level_of_time(n), sub)
            if not source.model.has_point(sref):
                raise KeyError(
                    f"shifted word '{sub}' has no source representative "
                    f"(horizon too small or sampling cap too low)"
                )
            entries.append(sref)
            offset += n
        lists[tref] = tuple(entries)
    return DiagonalMap(source.model, target.model, lists)


WordFunction = Callable[[str], complex]


def eval_generator_f(tower: TowerModel, ref: PointRef, f: WordFunction, arity: int) -> np.ndarray:
    """diag(f at shifts 1..n) of the point's word, windows of length arity."""
    word = tower.point_word(ref)
    n = tower.model.dim(ref.level)
    if len(word) < n + arity:
        raise ValueError(
            f"horizon deficit: point word has length {len(word)}, need {n + arity}"
        )
    vals = [complex(f(word[k:k + arity])) for k in range(1, n + 1)]
    return _frozen(np.diag(np.asarray(vals, dtype=np.complex128)))


def eval_generator_ug(tower: TowerModel, ref: PointRef, g: WordFunction, arity: int) -> np.ndarray:
    """The strictly-lower shift value: entry (k+1, k) = g at shift k.

    g must vanish on windows that start with the tower's base word. Shifts
    1..n-1 of a first-return word never revisit the base, so the decidable
    check is at shift 0 (which always starts with the base); every evaluated
    window is still guarded, and a violation reports its witness.
    """
    word = tower.point_word(ref)
    n = tower.model.dim(ref.level)
    if len(word) < n + arity:
        raise ValueError(
            f"horizon deficit: point word has length {len(word)}, need {n + arity}"
        )
    out = np.zeros((n, n), dtype=np.complex128)
    for k in range(n):
        window = word[k:k + arity]
        val = complex(g(window))
        if window.startswith(tower.base) and val != 0:
            raise ValueError(
                f"g does not vanish on the base cylinder: g({window!r}) = {val} "
                f"at shift {k} of {ref}"
            )
        if k > 0:
            out[k, k - 1] = val
    return _frozen(out)


def generator_element_f(tower: TowerModel, f: WordFunction, arity: int) -> Element:
    return Element(tower.model, {
        r: eval_generator_f(tower, r, f, arity) for r in tower.model.free_refs()
    })


def generator_element_ug(tower: TowerModel, g: WordFunction, arity: int) -> Element:
    return Element(tower.model, {
        r: eval_generator_ug(tower, r, g, arity) for r in tower.model.free_refs()
    })


@dataclass(frozen=True)
class CylinderChain:
    """Nested cylinder bases with their towers and embedding maps."""

    towers: tuple[TowerModel, ...]
    maps: tuple[DiagonalMap, ...]

    @property
    def depth(self) -> int:
        return len(self.towers)

    def model(self, i: int) -> FiniteDshModel:
        return self.towers[i - 1].model


def build_cylinder_chain(s: Substitution, bases: Sequence[str], base_horizon: int | None = None,
                         max_points_per_level: int = 32,
                         L_scan: int = DEFAULT_SCAN_LENGTH) -> CylinderChain:
    """Towers over nested bases, with horizons chosen so embeddings exist.

    Each base must be a proper prefix of the next. The first horizon
    defaults to |bases[0]|; later horizons are the previous horizon plus the
    previous tower's largest return time (and at least the base length).
    """
    for a, b in zip(bases, bases[1:]):
        if not b.startswith(a) or a == b:
            raise ValueError(f"bases must be strictly nested prefixes; '{a}' then '{b}'")
    towers: list[TowerModel] = []
    maps: list[DiagonalMap] = []
    h = max(base_horizon or 0, len(bases[0]))
    for idx, base in enumerate(bases):
        if idx > 0:
            h = max(h + towers[-1].max_return_time, len(base))
        tower = build_tower_model(s, base, h, max_points_per_level, L_scan)
        if idx > 0:
            fmap = factorize_returns(s, bases[idx - 1], base, L_scan)
            maps.append(embedding_map(fmap, towers[-1], tower))
        towers.append(tower)
    return CylinderChain(tuple(towers), tuple(maps))


def extend_cylinder_chain(s: Substitution, chain: CylinderChain, base: str,
                          max_points_per_level: int = 32,
                          L_scan: int = DEFAULT_SCAN_LENGTH) -> CylinderChain:
    """Append one deeper stage to an existing chain."""
    prev = chain.towers[-1]
    if not base.startswith(prev.base) or base == prev.base:
        raise ValueError(f"'{base}' does not extend the last base '{prev.base}'")
    h = max(prev.horizon + prev.max_return_time, len(base))
    tower = build_tower_model(s, base, h, max_points_per_level, L_scan)
    fmap = factorize_returns(s, prev.base, base, L_scan)
    emb = embedding_map(fmap, prev, tower)
    return CylinderChain(chain.towers + (tower,), chain.maps + (emb,))


def prefix_length_schedule(count: int) -> list[int]:
    """Fibonacci-spaced prefix lengths 1, 2, 3, 5, 8, ... for chain bases."""
    out = [1, 2]
    while len(out) < count:
        out.append(out[-1] + out[-2])
    return out[:count]


def fibonacci_prefix_bases(s: Substitution, count: int) -> list[str]:
    lengths = prefix_length_schedule(count)
    prefix = fixed_point_prefix(s, lengths[-1])
    return [prefix[:L] for L in lengths]
