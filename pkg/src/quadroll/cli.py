"""Thin CLI client for the quadroll service.

Subcommands identities / transform / archimedes load a JSON config, send it
to the service (in-process by default, or a remote instance via --server),
and write the canonical report and mesh files.  `serve` runs the service
with uvicorn.

Exit codes: 0 all checks passed; 1 invalid configuration; 2 tolerance
exceeded or blowups over 10% of nodes; 3 degenerate configuration.  The
QUADROLL_OUT environment variable overrides the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .runs import canonical_json

OUT_ENV = "QUADROLL_OUT"


def _post(args, endpoint: str, payload: dict):
    if args.server:
        import httpx
        resp = httpx.post(args.server.rstrip("/") + endpoint, json=payload,
                          timeout=600.0)
    else:
        from fastapi.testclient import TestClient
        from .service import app
        with TestClient(app) as client:
            resp = client.post(endpoint, json=payload)
    return resp


def _load_config(args, defaults: dict | None = None) -> dict:
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    else:
        cfg = dict(defaults or {})
    if args.seed is not None:
        cfg.setdefault("sweep", {})["rng_seed"] = args.seed
    if args.tol_scale is not None:
        cfg["tol_scale"] = args.tol_scale
    return cfg


def _out_dir(args) -> Path:
    env = os.environ.get(OUT_ENV)
    out = Path(env) if env else Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(args, resp, mesh: bool = False) -> int:
    if resp.status_code == 422:
        detail = resp.json().get("detail", resp.text)
        print(f"invalid configuration: {detail}", file=sys.stderr)
        return 1
    if resp.status_code != 200:
        print(f"service error {resp.status_code}: {resp.text}", file=sys.stderr)
        return 1
    body = resp.json()
    out = _out_dir(args)
    report = body["report"]
    outputs = report.get("meta", {}).get("config", {}).get("outputs") or {}
    report_path = out / outputs.get("report_path", "report.json")
    report_path.write_text(canonical_json(report))
    if mesh and body.get("mesh_seed_csv"):
        prefix = outputs.get("mesh_path", "mesh")
        (out / f"{prefix}_seed.csv").write_text(body["mesh_seed_csv"])
        (out / f"{prefix}_leaf.csv").write_text(body["mesh_leaf_csv"])
    print(f"status: {body['status']}  report: {report_path}")
    return int(body["exit_code"])


def _add_common(p):
    p.add_argument("--config", help="path to the JSON run configuration")
    p.add_argument("--out", help="output directory (default '.')")
    p.add_argument("--seed", type=int, help="override sweep.rng_seed")
    p.add_argument("--tol-scale", dest="tol_scale", type=float,
                   help="scale all pass/fail tolerances")
    p.add_argument("--server", help="base URL of a running service; "
                                    "default runs in-process")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="quadroll",
        description="Identity sweeps, transform runs and the balance demo "
                    "for doubly ruled quadrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_id = sub.add_parser("identities", help="run the static identity sweeps")
    _add_common(p_id)

    p_tr = sub.add_parser("transform", help="run a transform + leaf verification")
    _add_common(p_tr)

    p_ar = sub.add_parser("archimedes", help="run the balance demo")
    _add_common(p_ar)
    p_ar.add_argument("--n", type=int, help="slice count (overrides config)")

    p_srv = sub.add_parser("serve", help="serve the API with uvicorn")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)

    args = parser.parse_args(argv)

    if args.command == "serve":
        import uvicorn
        uvicorn.run("quadroll.service:app", host=args.host, port=args.port)
        return 0

    try:
        if args.command == "identities":
            cfg = _load_config(args)
            return _finish(args, _post(args, "/identities", cfg))
        if args.command == "transform":
            cfg = _load_config(args)
            return _finish(args, _post(args, "/transform", cfg), mesh=True)
        cfg = _load_config(args, defaults={"n": 1000})
        if args.n is not None:
            cfg["n"] = args.n
        return _finish(args, _post(args, "/archimedes", cfg))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
