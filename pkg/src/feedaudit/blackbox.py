"""Reference black-box platform speaking the line-delimited JSON protocol.

    python -m feedaudit.blackbox --family '{"id": "gaussian-mean-var"}' \\
        --source '{"kind": "parametric", "theta": [0.5, 1.2]}' --seed 7 --m 30

Reads one query per line on stdin and answers each with one line on stdout.
"""
from __future__ import annotations

import argparse
import json
import sys

from .engine import AuditInput
from .families import family_from_dict
from .feedsim import build_source


def serve(family, spec, seed, default_m, stdin=sys.stdin, stdout=sys.stdout):
    sources = {}
    for line in stdin:
        if not line.strip():
            continue
        query = json.loads(line)
        m = int(query.get("m") or default_m)
        if m not in sources:
            sources[m] = build_source(spec, family, m, seed, "blackbox")
        items = sources[m].query(AuditInput(query["id"], query.get("payload")))
        stdout.write(json.dumps({"id": query["id"], "items": items}) + "\n")
        stdout.flush()


def main(argv=None):
    p = argparse.ArgumentParser(prog="feedaudit-blackbox", description=__doc__.splitlines()[0])
    p.add_argument("--family", required=True, help="family descriptor as JSON")
    p.add_argument("--source", required=True, help="simulated source spec as JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=30, help="feed length when a query omits m")
    args = p.parse_args(argv)
    spec = json.loads(args.source)
    if spec.get("kind") == "subprocess":
        p.error("the reference black box only serves simulated sources")
    serve(family_from_dict(json.loads(args.family)), spec, args.seed, args.m)
    return 0


if __name__ == "__main__":
    sys.exit(main())
