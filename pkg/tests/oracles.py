"""Independent recomputation oracles used by the test suite.

These deliberately share no code with the library.  Clocks are recomputed
by counting reachable ticks in a causality graph instead of joining vector
clocks, and contention is re-simulated with a from-scratch sliding list.
"""

from collections import defaultdict

from vcreplay.trace import ChanMake, PostClose, Pre, Signal, TraceSet, Wait


def clock_oracle(ts: TraceSet, result) -> dict:
    """Recompute every pre/post clock of a replay by tick reachability.

    Ticks: a start node per thread (the unit clock; for spawned threads it
    hangs off the parent's last tick before the spawn signal), one node per
    signal, and one per committed operation.  Rendezvous partners see each
    other; a buffered receive sees its send, and the send that reuses a
    freed slot sees the receive that freed it.  A clock component is then
    just the number of that thread's ticks that reach the event.

    Returns {(thread, origin_pos): (pre_stamps, post_stamps|None)} covering
    every event in ``result.events`` except channel inits.
    """
    n = ts.threads
    ticks: dict[int, list] = {tid: [("start", tid)] for tid in ts.traces}
    edges: dict[tuple, set] = defaultdict(set)

    # Thread-local tick sequences from the traces.
    node_of_pos: dict[tuple[int, int], tuple] = {}
    for tid in sorted(ts.traces):
        trace = ts.traces[tid]
        i = 0
        while i < len(trace):
            ev = trace[i]
            if isinstance(ev, Signal):
                node = ("sig", tid, i)
            elif isinstance(ev, PostClose):
                node = ("evt", tid, i)
                node_of_pos[(tid, i)] = node
            elif isinstance(ev, Pre) and i + 1 < len(trace):
                node = ("evt", tid, i)
                node_of_pos[(tid, i)] = node
                i += 1  # consume the post as part of this tick
            else:
                i += 1  # ChanMake, Wait, dangling Pre: no tick
                continue
            ticks[tid].append(node)
            i += 1

    for tid in ticks:
        chain = ticks[tid]
        for a, b in zip(chain, chain[1:]):
            edges[a].add(b)

    # A spawned thread starts after the parent's ticks preceding the signal.
    for tid in sorted(ts.traces):
        trace = ts.traces[tid]
        for i, ev in enumerate(trace):
            if isinstance(ev, Signal):
                chain = ticks[tid]
                at = chain.index(("sig", tid, i))
                if at > 0:
                    edges[chain[at - 1]].add(("start", ev.n))

    # Communication edges, from the replay's own pairing and firing order.
    sends_by_channel: dict[str, list] = defaultdict(list)
    recvs_by_channel: dict[str, list] = defaultdict(list)
    caps = {d.id: d.cap for d in ts.channels}
    for ev in result.events:
        if not ev.committed or ev.kind not in ("send", "receive"):
            continue
        node = node_of_pos[(ev.thread, ev.origin.pos)]
        if ev.kind == "send":
            sends_by_channel[ev.channel].append((node, ev.link))
        elif ev.link is not None:
            recvs_by_channel[ev.channel].append((node, ev.link))
    for ch, sends in sends_by_channel.items():
        recvs = recvs_by_channel.get(ch, [])
        if caps[ch] == 0:
            by_link = {link: node for node, link in recvs}
            for node, link in sends:
                partner = by_link[link]
                edges[node].add(partner)
                edges[partner].add(node)
        else:
            for i, (rnode, link) in enumerate(recvs):
                snode, slink = sends[i]
                assert slink == link, "buffered pairing must follow queue order"
                edges[snode].add(rnode)
                if i + caps[ch] < len(sends):
                    edges[rnode].add(sends[i + caps[ch]][0])

    # Reachability: which ticks reach each node.  Rendezvous partners form
    # two-cycles, so iterate to a fixpoint rather than recursing.
    all_nodes = [node for chain in ticks.values() for node in chain]
    preds: dict[tuple, set] = defaultdict(set)
    for src, dsts in edges.items():
        for d in dsts:
            preds[d].add(src)
    reach: dict[tuple, set] = {node: {node} for node in all_nodes}
    changed = True
    while changed:
        changed = False
        for node in all_nodes:
            acc = reach[node]
            before = len(acc)
            for p in preds[node]:
                acc |= reach[p]
            if len(acc) != before:
                changed = True

    def clock_at(node) -> tuple:
        stamps = [0] * n
        for kind_tid_etc in reach[node]:
            stamps[kind_tid_etc[1] - 1] += 1
        return tuple(stamps)

    out = {}
    for ev in result.events:
        if ev.kind == "init":
            continue
        chain = ticks[ev.thread]
        if ev.committed:
            node = node_of_pos[(ev.thread, ev.origin.pos)]
            post = clock_at(node)
            pre = clock_at(chain[chain.index(node) - 1])
        else:
            # Not-selected or dangling: the thread's clock just before this
            # select, which for danglings is its terminal clock.
            prevs = [c for c in chain if c[0] == "start" or c[2] < ev.origin.pos]
            pre = clock_at(prevs[-1])
            post = None
        out[(ev.thread, ev.origin.pos, ev.origin.guard, ev.kind)] = (pre, post)
    return out


def alternatives_oracle(events, ts: TraceSet) -> int:
    """From-scratch alternative-communications count.

    Unbuffered channels: every pair of opposite-direction attempts with
    concurrent pre clocks counts twice (once per side), except actual match
    partners and guards of one select.  Buffered channels: each member of a
    match pair counts the same-direction attempts concurrent with it.
    """
    caps = {d.id: d.cap for d in ts.channels}

    def conc(a, b):
        less = any(x < y for x, y in zip(a.pre.stamps, b.pre.stamps))
        more = any(x > y for x, y in zip(a.pre.stamps, b.pre.stamps))
        return less and more

    comm = [
        e
        for e in events
        if e.kind in ("send", "receive")
        and e.pre is not None
        and not (e.kind == "receive" and e.committed and e.link is None)
    ]
    links = {}
    for e in comm:
        if e.committed and e.link is not None:
            links.setdefault(e.link, {})[e.kind] = e
    count = 0
    for a in comm:
        for b in comm:
            if a is b or a.channel != b.channel:
                continue
            if (a.thread, a.origin.pos) == (b.thread, b.origin.pos):
                continue
            if caps[a.channel] == 0:
                if a.kind == b.kind:
                    continue
                if a.committed and b.committed and a.link == b.link:
                    continue  # actual partners
                if conc(a, b):
                    count += 1
            else:
                if a.kind != b.kind:
                    continue
                # Only match-pair members accumulate on buffered channels.
                if not (a.committed and a.link in links and len(links[a.link]) == 2):
                    continue
                if conc(a, b):
                    count += 1
    return count


def contention_oracle(events, ts: TraceSet):
    """From-scratch sliding-list contention count over full pre clocks."""
    lists: dict[tuple, list] = {}
    max_len: dict[tuple, int] = {}
    total = 0
    per_channel: dict[tuple, int] = {}
    for ev in events:
        if ev.kind == "init":
            for d in ("send", "receive"):
                key = (ev.channel, d)
                lists[key] = [(i, ev.post, False) for i in range(1, len(ev.post) + 1)]
                max_len[key] = max(max_len.get(key, 0), len(lists[key]))
            continue
        if ev.kind not in ("send", "receive") or ev.pre is None:
            continue
        key = (ev.channel, ev.kind)
        cur = lists.get(key, [])
        kept = [(j, c, r) for (j, c, r) in cur if not ev.pre[j] > c[j]]
        retained = [(j, c, r) for (j, c, r) in kept if j != ev.thread]
        if kept:
            lists[key] = [(ev.thread, ev.pre, True)] + retained
        else:
            lists[key] = [(ev.thread, ev.pre, True)]
            retained = []
        real = sum(1 for (_, _, r) in retained if r)
        total += real
        if real:
            per_channel[key] = per_channel.get(key, 0) + real
        max_len[key] = max(max_len.get(key, 0), len(lists[key]))
    return total, per_channel, max_len
