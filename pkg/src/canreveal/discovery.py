"""Control discovery: accumulates event windows per control, scores the
channel hypotheses on a fixed event cadence, and tracks convergence,
displacement, and the not-identified outcome across ranking rounds."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .canbus import ChannelKey, ChannelStore, channel_name
from .correlate import ChannelScore, Mask, rank, score_channels
from .events import EventWindow
from .imu import ReferenceSeries

COLLECTING = "collecting"
CANDIDATE = "candidate"
CONVERGED = "converged"
NOT_IDENTIFIED = "not_identified"


@dataclass(frozen=True)
class DiscoveryConfig:
    cadence: int = 3          # events per inference round
    r_min: float = 0.4        # minimum winning |correlation|
    stability: int = 2        # consecutive rounds sharing a top channel
    max_events: int = 15      # event budget
    top_n: int = 9            # report depth

    def __post_init__(self):
        if self.cadence < 1:
            raise ConfigError("cadence must be >= 1")
        if not 0 < self.r_min <= 1:
            raise ConfigError("r_min must be in (0, 1]")
        if self.stability < 1:
            raise ConfigError("stability must be >= 1")
        if self.max_events < self.cadence:
            raise ConfigError("max_events must be >= cadence")
        if self.top_n < 1:
            raise ConfigError("top_n must be >= 1")


@dataclass(frozen=True)
class RankingReport:
    round_index: int
    events_seen: int
    elapsed_s: float
    entries: tuple[ChannelScore, ...]

    @property
    def top(self) -> ChannelScore | None:
        return self.entries[0] if self.entries else None


def update_status(rounds: list[RankingReport], cfg: DiscoveryConfig,
                  budget_exhausted: bool) -> tuple[str, ChannelKey | None]:
    """Status from the round history alone.

    Converged: the last `stability` rounds share one top channel at |r| >=
    r_min in each. Candidate: the latest top meets r_min but stability is not
    yet met. Otherwise collecting while budget remains, not_identified after.
    """
    if not rounds:
        return (NOT_IDENTIFIED if budget_exhausted else COLLECTING), None
    recent = rounds[-cfg.stability:]
    if len(recent) == cfg.stability:
        tops = [r.top for r in recent]
        if all(t is not None and abs(t.r) >= cfg.r_min for t in tops):
            names = {t.key for t in tops}
            if len(names) == 1:
                return CONVERGED, tops[-1].key
    latest = rounds[-1].top
    if budget_exhausted:
        return NOT_IDENTIFIED, None
    if latest is not None and abs(latest.r) >= cfg.r_min:
        return CANDIDATE, None
    return COLLECTING, None


def displacement_log(rounds: list[RankingReport]) -> list[tuple[int, ChannelKey, ChannelKey]]:
    """(round_index, old_top, new_top) for every consecutive top change."""
    changes = []
    for prev, cur in zip(rounds, rounds[1:]):
        if prev.top is None or cur.top is None:
            continue
        if prev.top.key != cur.top.key:
            changes.append((cur.round_index, prev.top.key, cur.top.key))
    return changes


@dataclass
class DiscoveryState:
    control: str
    cfg: DiscoveryConfig = field(default_factory=DiscoveryConfig)
    events_seen: int = 0
    windows: list[EventWindow] = field(default_factory=list)
    rounds: list[RankingReport] = field(default_factory=list)
    status: str = COLLECTING
    winner: ChannelKey | None = None

    @property
    def terminal(self) -> bool:
        return self.status in (CONVERGED, NOT_IDENTIFIED)

    @property
    def winner_name(self) -> str:
        return channel_name(self.winner) if self.winner else "N/A"

    def displacements(self) -> list[tuple[int, ChannelKey, ChannelKey]]:
        return displacement_log(self.rounds)


class Discovery:
    """Per-control discovery engine fed with covered event windows.

    Convergence latches: once converged, the winner and status are fixed while
    later rounds continue to be recorded up to the event budget.
    """

    def __init__(self, control: str, cfg: DiscoveryConfig = DiscoveryConfig(),
                 mode: str = "value", rate: float = 20.0):
        self.state = DiscoveryState(control=control, cfg=cfg)
        self.mode = mode
        self.rate = rate

    def on_event(self, window: EventWindow, store: ChannelStore,
                 ref: ReferenceSeries, mask,
                 elapsed_s: float) -> RankingReport | None:
        """Account one event; run an inference round at each cadence boundary.

        `mask` may be a Mask or a zero-argument callable producing one; the
        callable is only evaluated when a round actually fires, so liveliness
        scans are not paid on every event.
        """
        st = self.state
        cfg = st.cfg
        if st.events_seen >= cfg.max_events:
            return None  # budget spent; late events are ignored
        st.events_seen += 1
        st.windows.append(window)
        if st.events_seen % cfg.cadence != 0:
            return None
        if callable(mask):
            mask = mask()
        scores = score_channels(store, ref, st.windows, mask,
                                mode=self.mode, rate=self.rate)
        entries = tuple(rank(scores, cfg.top_n)) if scores else ()
        report = RankingReport(
            round_index=len(st.rounds) + 1,
            events_seen=st.events_seen,
            elapsed_s=elapsed_s,
            entries=entries,
        )
        st.rounds.append(report)
        if not st.terminal:
            status, winner = update_status(
                st.rounds, cfg, budget_exhausted=st.events_seen >= cfg.max_events)
            st.status = status
            if winner is not None:
                st.winner = winner
        return report

    def finalize(self) -> None:
        """End of recording: anything short of convergence is not identified."""
        st = self.state
        if not st.terminal:
            st.status = NOT_IDENTIFIED
            st.winner = None
