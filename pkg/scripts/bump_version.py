#!/usr/bin/env python3
"""
Set the CatSynth version.

Usage:
    python scripts/bump_version.py --show
    python scripts/bump_version.py 0.2.0 [--dry-run]

VERSION is the single source of truth: every run manifest copies it into
its "catsynth" entry and the PyInstaller build bundles it.
"""
import argparse
import os
import re
import sys

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
VERSION_FILE = os.path.join(REPO_ROOT, "VERSION")

SEMVER = re.compile(r"^(\d+)\.(\d+)\.(\d+)(-[\w.]+)?$")


def current_version() -> str:
    with open(VERSION_FILE, "r", encoding="utf-8") as f:
        return f.read().strip()


def release_key(version: str):
    """Ordering key; a pre-release sorts before its release."""
    major, minor, patch, pre = SEMVER.match(version).groups()
    return int(major), int(minor), int(patch), pre is None, pre or ""


def main() -> int:
    parser = argparse.ArgumentParser(description="Set the CatSynth version in VERSION")
    parser.add_argument("version", nargs="?", help="new version, e.g. 0.2.0 (a leading 'v' is ignored)")
    parser.add_argument("--show", action="store_true", help="print the current version and exit")
    parser.add_argument("--dry-run", action="store_true", help="validate only, leave VERSION untouched")
    args = parser.parse_args()

    old = current_version()
    if args.show or args.version is None:
        print(old)
        return 0

    new = args.version.lstrip("v")
    if not SEMVER.match(new):
        print(f"Error: '{new}' is not a major.minor.patch version.", file=sys.stderr)
        return 1
    if SEMVER.match(old) and release_key(new) <= release_key(old):
        print(f"Error: {new} does not come after {old}.", file=sys.stderr)
        return 1

    if args.dry_run:
        print(f"  [DRY RUN] VERSION {old} -> {new}")
        return 0
    with open(VERSION_FILE, "w", encoding="utf-8") as f:
        f.write(new + "\n")
    print(f"  [OK] VERSION {old} -> {new}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
