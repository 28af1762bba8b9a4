"""Naive reference for the tick rules: walks every tick, no scheduling tricks.

Only activations and token counts are produced; used as an oracle.
"""

from tmkit.model import ActionKind


def reference_run(model, config):
    flows = {s.id: [f for f in model.flows if f.source == s.id] for s in model.stages}
    triggers = {s.id: [t.target for t in model.triggers if t.source == s.id] for s in model.stages}
    cost = {s.id: s.cost_ticks for s in model.stages}
    # (stage, token id, tick it leaves)
    resident: list[tuple[str, int, int]] = []
    fired_next: list[str] = []
    acts = []
    counts = {"source": 0, "trigger": 0, "copy": 0, "pulse": 0, "departed": 0}
    next_id = 1
    for tick in range(config.max_ticks):
        arriving = []
        leaving = sorted(r for r in resident if r[2] == tick)
        resident = [r for r in resident if r[2] != tick]
        for stage, tid, _ in leaving:
            outs = flows[stage]
            if not outs:
                counts["departed"] += 1
            for n, f in enumerate(outs):
                if n == 0:
                    arriving.append((f.target, tid))
                else:
                    arriving.append((f.target, next_id))
                    next_id += 1
                    counts["copy"] += 1
        for src in sorted(config.sources, key=lambda s: s.stage):
            if tick in src.ticks:
                arriving.append((src.stage, next_id))
                next_id += 1
                counts["source"] += 1
        pulses = set()
        for target in fired_next:
            arriving.append((target, next_id))
            if model.stage(target).kind is ActionKind.CREATE:
                counts["trigger"] += 1
            else:
                counts["pulse"] += 1
                pulses.add(next_id)
            next_id += 1
        fired_next = []
        for stage, tid in sorted(arriving):
            acts.append((tick, stage, tid))
            fired_next.extend(triggers[stage])
            if tid not in pulses:
                resident.append((stage, tid, tick + cost[stage]))
    counts["active"] = len(resident)
    return acts, counts
