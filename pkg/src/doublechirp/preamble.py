"""Double-chirp preamble symbols and collision-free chirp-pair assignment."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .css import ChirpTable
from .errors import CapacityError, ConfigurationError

DEFAULT_N_PREAMBLE = 8
POLICIES = ("sequential", "random", "seeded-random")


def delta_of(kappa1: int, kappa2: int, m: int) -> int:
    """Chirp distance ``mod(|kappa1 - kappa2|, M/2)``; must be unique and non-zero."""
    return abs(int(kappa1) - int(kappa2)) % (m // 2)


def cyclic_distance(kappa1: int, kappa2: int, m: int) -> int:
    """Distance between the two chirps on the circle of M cyclic shifts.

    Two pairs resemble each other under a time shift exactly when their
    cyclic distances agree.  For pairs with ``|kappa1 - kappa2| < M/2`` this
    equals :func:`delta_of`.
    """
    d = abs(int(kappa1) - int(kappa2)) % m
    return min(d, m - d)


def max_users(m: int) -> int:
    return m // 2 - 1


@dataclass(frozen=True)
class PreambleAssignment:
    ed_id: int
    kappa1: int
    kappa2: int
    m: int

    @property
    def delta(self) -> int:
        return delta_of(self.kappa1, self.kappa2, self.m)

    @property
    def bins(self):
        return self.kappa1, self.kappa2

    def check(self):
        for k in (self.kappa1, self.kappa2):
            if not 0 <= k < self.m:
                raise ConfigurationError(
                    f"ED {self.ed_id}: chirp index {k} outside 0..{self.m - 1}")
        if self.kappa1 == self.kappa2:
            raise ConfigurationError(
                f"ED {self.ed_id}: both preamble chirps are {self.kappa1}")


@dataclass
class AssignmentPlan:
    assignments: List[PreambleAssignment]
    m: int
    n_preamble: int = DEFAULT_N_PREAMBLE
    policy: str = field(default="custom", compare=False)

    def __len__(self):
        return len(self.assignments)

    def __iter__(self):
        return iter(self.assignments)

    @property
    def deltas(self):
        return [a.delta for a in self.assignments]

    @classmethod
    def from_pairs(cls, pairs: Sequence, m: int, n_preamble=DEFAULT_N_PREAMBLE,
                   ed_ids=None) -> "AssignmentPlan":
        """Plan from ``(kappa1, kappa2)`` pairs; EDs are numbered from 1 by default."""
        if ed_ids is None:
            ed_ids = range(1, len(pairs) + 1)
        items = [PreambleAssignment(int(u), int(k1), int(k2), m)
                 for u, (k1, k2) in zip(ed_ids, pairs)]
        return cls(items, m, n_preamble)

    def to_text(self) -> str:
        lines = [f"m = {self.m}", f"n_preamble = {self.n_preamble}",
                 "# ed_id, kappa1, kappa2"]
        lines += [f"{a.ed_id}, {a.kappa1}, {a.kappa2}" for a in self.assignments]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "AssignmentPlan":
        """Parse the format written by :meth:`to_text`."""
        m = None
        n_preamble = DEFAULT_N_PREAMBLE
        rows = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                if "=" in line:
                    key, value = (s.strip() for s in line.split("=", 1))
                    if key == "m":
                        m = int(value)
                    elif key in ("n_preamble", "n"):
                        n_preamble = int(value)
                    else:
                        raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
                else:
                    u, k1, k2 = (int(s) for s in line.split(","))
                    rows.append((u, k1, k2))
            except ValueError as exc:
                if isinstance(exc, ConfigurationError):
                    raise
                raise ConfigurationError(f"line {lineno}: cannot parse {raw!r}") from None
        if m is None:
            raise ConfigurationError("plan file does not define m")
        items = [PreambleAssignment(u, k1, k2, m) for u, k1, k2 in rows]
        return cls(items, m, n_preamble)


def build_preamble_symbol(assignment: PreambleAssignment, table: ChirpTable) -> np.ndarray:
    """``(s_kappa1 + s_kappa2) / sqrt(2)``, one preamble symbol of M samples."""
    if assignment.m != table.m:
        raise ConfigurationError(
            f"assignment built for M={assignment.m}, table has M={table.m}")
    assignment.check()
    return (table.chirps[assignment.kappa1] + table.chirps[assignment.kappa2]) / np.sqrt(2)


def assign_preambles(n_users: int, m: int, policy: str = "sequential", seed: int = 0,
                     n_preamble: int = DEFAULT_N_PREAMBLE) -> AssignmentPlan:
    """Give every ED a chirp pair with a distinct, non-zero distance.

    ``sequential`` hands ED u the pair (0, u).  ``random`` draws a distinct
    distance for every ED and a uniformly random first chirp.
    """
    bound = max_users(m)
    if n_users < 1:
        raise ConfigurationError(f"need at least one end device, got {n_users}")
    if n_users > bound:
        raise CapacityError(n_users, bound)
    if policy == "sequential":
        pairs = [(0, u) for u in range(1, n_users + 1)]
    elif policy in ("random", "seeded-random"):
        rng = np.random.default_rng(seed)
        deltas = rng.choice(np.arange(1, m // 2), size=n_users, replace=False)
        pairs = []
        for d in deltas:
            # no wrap-around, so |k1 - k2| is exactly d < M/2
            k1 = int(rng.integers(m - int(d)))
            pair = (k1, k1 + int(d))
            pairs.append(pair if rng.integers(2) else pair[::-1])
    else:
        raise ConfigurationError(f"unknown assignment policy {policy!r}; use one of {POLICIES}")
    plan = AssignmentPlan.from_pairs(pairs, m, n_preamble)
    plan.policy = policy
    return plan


def same_delta_plan(n_users: int, m: int, delta: int = 30,
                    n_preamble: int = DEFAULT_N_PREAMBLE) -> AssignmentPlan:
    """Deliberately broken plan where every ED shares the distance ``delta``.

    ED u gets (u - 1, u - 1 + delta); used to show what assignment prevents.
    """
    pairs = [(u, (u + delta) % m) for u in range(n_users)]
    plan = AssignmentPlan.from_pairs(pairs, m, n_preamble)
    plan.policy = "same-delta"
    return plan


def validate_assignment(plan: AssignmentPlan) -> List[str]:
    """Every violated constraint as a message; an empty list means valid."""
    problems = []
    m = plan.m
    if len(plan.assignments) > max_users(m):
        problems.append(
            f"{len(plan.assignments)} EDs exceed the limit M/2 - 1 = {max_users(m)}")
    seen_ids = set()
    valid = []
    for a in plan.assignments:
        if a.ed_id in seen_ids:
            problems.append(f"duplicate ED id {a.ed_id}")
        seen_ids.add(a.ed_id)
        bad = [k for k in (a.kappa1, a.kappa2) if not 0 <= k < m]
        if bad:
            problems.append(f"ED {a.ed_id}: chirp index {bad[0]} out of range 0..{m - 1}")
            continue
        if a.kappa1 == a.kappa2:
            problems.append(f"ED {a.ed_id}: identical chirps ({a.kappa1}, {a.kappa2})")
            continue
        if a.delta == 0:
            problems.append(
                f"ED {a.ed_id}: zero delta, chirps ({a.kappa1}, {a.kappa2}) are M/2 apart "
                "(self-resemblance)")
        valid.append(a)
    pair_owner = {}
    delta_owner = {}
    cyclic_owner = {}
    for a in valid:
        key = frozenset((a.kappa1, a.kappa2))
        if key in pair_owner:
            problems.append(
                f"duplicate chirp pair ({a.kappa1}, {a.kappa2}) for EDs "
                f"{pair_owner[key]} and {a.ed_id}")
        else:
            pair_owner[key] = a.ed_id
        if a.delta == 0:
            continue
        if a.delta in delta_owner:
            problems.append(
                f"duplicate delta {a.delta} between EDs {delta_owner[a.delta]} and {a.ed_id}")
        else:
            delta_owner[a.delta] = a.ed_id
        # distances d and M - d resemble each other although their deltas differ
        cyc = cyclic_distance(a.kappa1, a.kappa2, m)
        other = cyclic_owner.get(cyc)
        if other is None:
            cyclic_owner[cyc] = (a.ed_id, a.delta)
        elif other[1] != a.delta:
            problems.append(
                f"duplicate cyclic distance {cyc} between EDs {other[0]} and {a.ed_id}")
    return problems
