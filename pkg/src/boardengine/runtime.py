"""One-stop wiring of hub, gateway, engines, dispatcher, and snapshot store."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .affinity import AffinityEngine
from .clock import Clock, SystemClock
from .dispatch import Dispatcher
from .gateway import Gateway
from .ids import IdFactory
from .ideation import IdeationEngine
from .relhints import HintScheduler, RelationHintEngine
from .snapshots import FileSnapshotBackend, SnapshotStore
from .speech import SpeechEngine
from .sync import WorkspaceHub


@dataclass
class BoardRuntime:
    clock: Clock
    ids: IdFactory
    hub: WorkspaceHub
    gateway: Gateway
    ideation: IdeationEngine
    affinity: AffinityEngine
    relhints: RelationHintEngine
    speech: SpeechEngine
    dispatcher: Dispatcher
    store: Optional[SnapshotStore] = None
    hint_interval_ms: Optional[int] = None
    _schedulers: dict = field(default_factory=dict)

    def scheduler_for(self, workspace_id: str) -> HintScheduler:
        scheduler = self._schedulers.get(workspace_id)
        if scheduler is None:
            scheduler = HintScheduler(
                self.hub, self.relhints, workspace_id, self.clock, interval_ms=self.hint_interval_ms
            )
            self._schedulers[workspace_id] = scheduler
        return scheduler

    def tick_schedulers(self) -> None:
        """Give every known workspace's hint scheduler one look at the clock."""
        for workspace_id, _revision in self.hub.list_workspaces():
            self.scheduler_for(workspace_id).tick()


def build_runtime(
    provider,
    clock: Optional[Clock] = None,
    seed: Optional[int] = None,
    auto_create: bool = True,
    data_dir: Optional[str | Path] = None,
    hint_interval_ms: Optional[int] = None,
) -> BoardRuntime:
    """Assemble a full board engine around the given provider."""
    clock = clock if clock is not None else SystemClock()
    rng = random.Random(seed) if seed is not None else None
    ids = IdFactory(clock, rng=rng)
    hub = WorkspaceHub(id_factory=ids, clock=clock, auto_create=auto_create)
    gateway = Gateway(provider)
    ideation = IdeationEngine(hub, gateway, ids)
    affinity = AffinityEngine(hub, gateway, ids)
    relhints = RelationHintEngine(hub, gateway)
    speech = SpeechEngine(hub, gateway, ids, clock)
    dispatcher = Dispatcher(hub, ideation, affinity, relhints, speech)
    store = None
    if data_dir is not None:
        store = SnapshotStore(hub, FileSnapshotBackend(data_dir))
    return BoardRuntime(
        clock=clock,
        ids=ids,
        hub=hub,
        gateway=gateway,
        ideation=ideation,
        affinity=affinity,
        relhints=relhints,
        speech=speech,
        dispatcher=dispatcher,
        store=store,
        hint_interval_ms=hint_interval_ms,
    )
