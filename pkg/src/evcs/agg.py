"""Grouping parked EVs by laxity level: counts-based state, greedy group
allocation of the total budget, and the group-count transition.

A station state collapses to (price, n_0, ..., n_L) where n_l counts the
parked EVs with laxity l.  Charged EVs keep their laxity, idle EVs drop one
level, so the counts evolve by a simple shift-and-add rule once the total
budget is split greedily from level 0 upward --- the same split the per-EV
least-laxity-first dispatch induces.

The count vector alone cannot predict departures (those depend on remaining
demands inside each level), so `AggSimulator` keeps per-level demand lists as
private bookkeeping.  Controllers only ever see the (price, counts) state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .env import EpisodeConfig, StationState, arrival_schedule
from .llf import laxity


@dataclass(frozen=True)
class AggState:
    """Price plus the number of parked EVs at each laxity level."""

    price: float
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", tuple(int(n) for n in self.counts))
        if any(n < 0 for n in self.counts):
            raise ValueError(f"laxity counts must be >= 0, got {self.counts}")

    @property
    def total(self) -> int:
        """Number of parked EVs."""
        return sum(self.counts)

    @property
    def max_level(self) -> int:
        return len(self.counts) - 1


@dataclass(frozen=True)
class GroupFlow:
    """Per-level flows over one transition: charged, arrived, departed."""

    charged: tuple[int, ...]
    arrived: tuple[int, ...]
    departed: tuple[int, ...]


def aggregate(state: StationState, max_laxity: int) -> AggState:
    """Collapse a station state to per-laxity-level counts."""
    counts = [0] * (max_laxity + 1)
    for ev in state.evs:
        level = laxity(ev.demand, ev.parking)
        if not 0 <= level <= max_laxity:
            raise ValueError(
                f"EV {ev.id} has laxity {level} outside [0, {max_laxity}]; "
                f"raise max_laxity or check state feasibility"
            )
        counts[level] += 1
    return AggState(state.price, tuple(counts))


def group_allocate(total: int, counts: Sequence[int]) -> tuple[int, ...]:
    """Split a total charging budget greedily from laxity level 0 upward.

    Fills each level completely before touching the next, so the cumulative
    allocation up to level l is min(total, cumulative count up to l).
    """
    if total < 0:
        raise ValueError(f"total charging budget must be >= 0, got {total}")
    available = sum(counts)
    if total > available:
        raise ValueError(f"budget {total} exceeds the {available} parked EVs")
    charged = []
    remaining = total
    for n in counts:
        x = min(int(n), remaining)
        charged.append(x)
        remaining -= x
    return tuple(charged)


def _shift_counts(
    counts: Sequence[int],
    charged: Sequence[int],
    arrivals: Sequence[int],
    departures: Sequence[int],
) -> list[int]:
    """Count bookkeeping shared by agg_transition and the simulator."""
    top = len(counts) - 1
    if len(arrivals) != len(counts) or len(departures) != len(counts):
        raise ValueError(f"arrival/departure vectors must have length {len(counts)}")
    if charged[0] < counts[0]:
        raise ValueError(
            f"budget {sum(charged)} leaves {counts[0] - charged[0]} zero-laxity "
            f"EVs idle; their laxity would go negative"
        )
    new_counts = []
    for level in range(top + 1):
        dropped_in = (counts[level + 1] - charged[level + 1]) if level < top else 0
        n = charged[level] + dropped_in + int(arrivals[level]) - int(departures[level])
        if n < 0:
            raise ValueError(
                f"negative count at laxity {level}: inconsistent arrival/"
                f"departure flows"
            )
        new_counts.append(n)
    return new_counts


def agg_transition(
    state: AggState,
    total: int,
    arrivals: Sequence[int],
    departures: Sequence[int],
    next_price: float,
) -> AggState:
    """Advance the count vector one slot.

    Level l at t+1 collects: the level-l EVs charged at t (laxity kept), the
    level-(l+1) EVs left idle (laxity dropped), plus level-l arrivals, minus
    level-l departures.  Only defined on feasible flows: leaving a
    zero-laxity EV idle has no representation in the counts and raises.
    """
    charged = group_allocate(total, state.counts)
    new_counts = _shift_counts(state.counts, charged, arrivals, departures)
    return AggState(next_price, tuple(new_counts))


def cap_merge(state: AggState, cap: int) -> AggState:
    """Pool all laxity levels >= cap into one trailing count."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    if cap >= state.max_level:
        return state
    merged = state.counts[:cap] + (sum(state.counts[cap:]),)
    return AggState(state.price, merged)


class AggSimulator:
    """Rollout engine for one day over laxity-group counts.

    Published counts are driven purely by `group_allocate` + `agg_transition`.
    Internally each level keeps its members' (id, remaining demand) in id
    order, which is exactly what the per-EV least-laxity-first dispatch with
    ascending-id tie-break induces; this bookkeeping only serves to emit
    departures and never reaches the controller.
    """

    def __init__(self, config: EpisodeConfig, max_laxity: int):
        self.config = config
        self.max_laxity = max_laxity
        self._arrivals: dict[int, list[tuple[int, int, int]]] = {}
        for t, items in arrival_schedule(config).items():
            entries = []
            for ev_id, event in items:
                level = laxity(event.demand, event.parking)
                if not 0 <= level <= max_laxity:
                    raise ValueError(
                        f"arrival at t={t} has laxity {level} outside "
                        f"[0, {max_laxity}]"
                    )
                entries.append((ev_id, event.demand, level))
            self._arrivals[t] = entries
        self.reset()

    def reset(self) -> AggState:
        self._t = 0
        # per level: [id, demand] pairs in ascending id order
        self._levels: list[list[list[int]]] = [
            [] for _ in range(self.max_laxity + 1)
        ]
        self._insert_arrivals(0)
        self._state = AggState(
            self.config.prices[0], tuple(len(lv) for lv in self._levels)
        )
        self.last_flow: GroupFlow | None = None
        return self._state

    def _insert_arrivals(self, t: int) -> tuple[int, ...]:
        arrived = [0] * (self.max_laxity + 1)
        touched = set()
        for ev_id, demand, level in self._arrivals.get(t, []):
            self._levels[level].append([ev_id, demand])
            touched.add(level)
            arrived[level] += 1
        for level in touched:
            self._levels[level].sort(key=lambda entry: entry[0])
        return tuple(arrived)

    @property
    def t(self) -> int:
        return self._t

    @property
    def state(self) -> AggState:
        return self._state

    @property
    def urgent(self) -> int:
        """EVs that must be charged this slot (laxity 0)."""
        return self._state.counts[0]

    @property
    def chargeable(self) -> int:
        """EVs that can be charged this slot (all parked EVs still need charge)."""
        return self._state.total

    def step(self, total_action: int) -> tuple[AggState, float]:
        """Charge ``total_action`` EVs, lowest laxity levels first."""
        if self._t >= self.config.horizon:
            raise ValueError(
                f"cannot step past the episode horizon (t={self._t}, "
                f"horizon={self.config.horizon})"
            )
        total_action = int(total_action)
        counts = self._state.counts
        charged_vec = group_allocate(total_action, counts)
        if charged_vec[0] < counts[0]:
            raise ValueError(
                f"slot {self._t}: budget {total_action} leaves zero-laxity "
                f"EVs idle; the rollout would become infeasible"
            )
        reward = -self._state.price * total_action

        departed = [0] * (self.max_laxity + 1)
        new_levels: list[list[list[int]]] = [[] for _ in range(self.max_laxity + 1)]
        for level in range(self.max_laxity + 1):
            members = self._levels[level]
            k = charged_vec[level]
            for entry in members[:k]:  # lowest ids first, as per-EV LLF does
                if entry[1] - 1 == 0:
                    departed[level] += 1
                else:
                    new_levels[level].append([entry[0], entry[1] - 1])
            if k < len(members):
                # idle EVs drop one laxity level; level 0 was guarded above
                moved = [[e[0], e[1]] for e in members[k:]]
                new_levels[level - 1] = _merge_by_id(new_levels[level - 1], moved)

        self._levels = new_levels
        self._t += 1
        arrived = self._insert_arrivals(self._t)
        new_counts = tuple(_shift_counts(counts, charged_vec, arrived, departed))
        if new_counts != tuple(len(lv) for lv in self._levels):
            raise RuntimeError(
                "count transition diverged from per-level bookkeeping"
            )
        next_state = _agg_state_unchecked(self.config.prices[self._t], new_counts)
        self.last_flow = GroupFlow(charged_vec, arrived, tuple(departed))
        self._state = next_state
        return next_state, reward


def _agg_state_unchecked(price: float, counts: tuple[int, ...]) -> AggState:
    """AggState constructor bypassing validation; counts must already be
    non-negative ints (the simulator's shift arithmetic guarantees it)."""
    state = object.__new__(AggState)
    object.__setattr__(state, "price", price)
    object.__setattr__(state, "counts", counts)
    return state


def _merge_by_id(
    left: list[list[int]], right: list[list[int]]
) -> list[list[int]]:
    """Merge two id-sorted entry lists, keeping ascending id order."""
    out: list[list[int]] = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i][0] <= right[j][0]:
            out.append(left[i])
            i += 1
        else:
            out.append(right[j])
            j += 1
    out.extend(left[i:])
    out.extend(right[j:])
    return out
