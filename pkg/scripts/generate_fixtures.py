#!/usr/bin/env python3
"""Materialize fixture profiles to disk (thin wrapper over the CLI).

Usage: python scripts/generate_fixtures.py <profile> [out-dir]
Profiles: table1, quarter-q5, quarter-q8, accounting, demo
"""

from __future__ import annotations

import sys

from gridops.fixtures import PROFILES, write_profile


def main() -> int:
    if len(sys.argv) < 2 or sys.argv[1] not in PROFILES:
        print(f"usage: {sys.argv[0]} <{'|'.join(PROFILES)}> [out-dir]", file=sys.stderr)
        return 1
    out_dir = sys.argv[2] if len(sys.argv) > 2 else f"fixtures-{sys.argv[1]}"
    for path in write_profile(sys.argv[1], out_dir):
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
