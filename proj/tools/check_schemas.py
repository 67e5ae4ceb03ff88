#!/usr/bin/env python3
"""Validate shipped configs and the JSON written by a quickstart pipeline run.

usage: check_schemas.py <fiberprobe binary> <repo root>
"""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema
from referencing import Registry, Resource


def main() -> int:
    binary, root = Path(sys.argv[1]), Path(sys.argv[2])
    schemas = {p.name: json.loads(p.read_text()) for p in (root / "schemas").glob("*.schema.json")}
    registry = Registry().with_resources(
        (name, Resource.from_contents(s)) for name, s in schemas.items())

    def check(doc_path: Path, schema_name: str) -> None:
        validator = jsonschema.Draft202012Validator(schemas[schema_name], registry=registry)
        errors = sorted(validator.iter_errors(json.loads(doc_path.read_text())), key=lambda e: e.path)
        for e in errors:
            print(f"{doc_path}: /{'/'.join(map(str, e.path))}: {e.message}")
        if errors:
            raise SystemExit(1)
        print(f"ok  {doc_path.name} against {schema_name}")

    for cfg in sorted((root / "configs").glob("*.json")):
        check(cfg, "scenario.schema.json")

    config = root / "configs" / "quickstart.json"
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)
        for args in (["simulate"], ["estimate"],
                     ["analyze", "--truth", str(out / "truth.csv"), "--baseline", str(out / "profile.csv")],
                     ["verify", "convergence"]):
            subprocess.run([binary, *args, "--config", str(config), "--out", str(out)],
                           check=True, stdout=subprocess.DEVNULL)
        check(out / "manifest.json", "manifest.schema.json")
        check(out / "profile.json", "profile.schema.json")
        check(out / "report.json", "report.schema.json")
        check(out / "metrics.json", "metrics.schema.json")
        check(out / "verify_convergence.json", "verify.schema.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
