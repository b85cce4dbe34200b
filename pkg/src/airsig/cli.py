"""Command-line client for the airsig service.

Every subcommand builds a request for the HTTP API and dispatches it:
in-process against the bundled app by default (no server needed for
batch runs), or to a remote instance via --server.  Exit codes: 0 on
success, 2 for usage/input errors, 1 for internal failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .config import load_config
from .errors import AirsigError
from .preprocessing import SensorKind


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=600.0)
    # in-process ASGI dispatch: same request/response path as a real
    # server, without requiring one for reproducible batch runs
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app, raise_server_exceptions=False)


def _post(args, path: str, payload: dict) -> dict:
    with _client(args.server) as client:
        response = client.post(path, json=payload)
    if response.status_code >= 500:
        print(f"error: internal failure ({response.status_code})", file=sys.stderr)
        raise SystemExit(1)
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        print(f"error: {detail}", file=sys.stderr)
        raise SystemExit(2)
    return response.json()


def _load_configs(args):
    """Config file values, overridden by explicit flags where given."""
    if getattr(args, "config", None):
        return load_config(args.config)
    return None, None


def _preprocess_payload(args) -> dict:
    pre_cfg, _ = _load_configs(args)
    if pre_cfg is None:
        return {}
    return dataclasses.asdict(pre_cfg)


def _parse_sensors(raw: str) -> list[str]:
    try:
        return [SensorKind.from_alias(s).value for s in raw.split(",") if s.strip()]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2)


def cmd_synth(args) -> None:
    payload = {
        "out_dir": args.out,
        "users": args.users,
        "sessions": args.sessions,
        "attempts": args.attempts,
        "forgeries_per_user": args.forgeries,
        "seed": args.seed,
    }
    result = _post(args, "/synth", payload)
    print(f"wrote {result['n_samples']} samples for {result['n_users']} users to {result['dataset']}")


def cmd_preprocess(args) -> None:
    payload = {
        "dataset": args.dataset,
        "out_dir": args.out,
        "profile": args.profile,
    }
    cfg = _preprocess_payload(args)
    if cfg:
        payload["config"] = cfg
    result = _post(args, "/preprocess", payload)
    print(
        f"preprocessed {result['n_samples']} samples"
        f" ({result['n_failed']} failed) -> {result['dataset']}"
    )


def cmd_eval(args) -> None:
    if args.matrix:
        with open(args.matrix, encoding="utf-8") as fh:
            cells = json.load(fh)
    else:
        scorer, embedding_file = "dtw", None
        if args.scorer != "dtw":
            if not args.scorer.startswith("embedding:"):
                print(
                    "error: --scorer must be 'dtw' or 'embedding:<file>'",
                    file=sys.stderr,
                )
                raise SystemExit(2)
            scorer = "embedding"
            embedding_file = args.scorer.split(":", 1)[1]
        cells = [
            {
                "sensors": _parse_sensors(args.sensors),
                "mode": args.mode,
                "impostor": args.impostor,
                "scorer": scorer,
            }
        ]
        args.embedding_file = embedding_file
    payload = {
        "dataset": args.dataset,
        "out_dir": args.out,
        "cells": cells,
        "seed": args.seed,
    }
    if getattr(args, "embedding_file", None):
        payload["embedding_file"] = args.embedding_file
    cfg = _preprocess_payload(args)
    if cfg:
        payload["preprocess"] = cfg
    result = _post(args, "/eval", payload)
    for rep in result["reports"]:
        tag = "+".join(rep["sensors"])
        flag = " (low confidence)" if rep["low_confidence"] else ""
        print(
            f"{rep['scorer']} {rep['impostor']} {rep['mode']} {tag}: "
            f"EER {100 * rep['eer']:.2f}% at threshold {rep['eer_threshold']:.4f} "
            f"[{rep['n_genuine']} genuine / {rep['n_impostor']} impostor]{flag}"
        )
    print(f"reports written to {result['out_dir']}")


def cmd_reconstruct(args) -> None:
    payload = {
        "dataset": args.dataset,
        "sample_id": args.sample_id,
        "out_dir": args.out,
        "profile": args.profile,
    }
    _, rec_cfg = _load_configs(args)
    if rec_cfg is not None:
        payload["config"] = dataclasses.asdict(rec_cfg)
    result = _post(args, "/reconstruct", payload)
    print(f"trajectory: {result['trajectory_csv']}")
    print(f"projection: {result['projection_csv']}")
    print(
        f"cutoffs: velocity {result['velocity_cutoff_hz']:.3f} Hz, "
        f"position {result['position_cutoff_hz']:.3f} Hz"
    )
    if result.get("alignment_residual") is not None:
        print(f"alignment residual: {result['alignment_residual']:.4f}")


def cmd_export(args) -> None:
    payload = {
        "dataset": args.dataset,
        "out_dir": args.out,
        "length": args.length,
        "split_seed": args.seed,
    }
    cfg = _preprocess_payload(args)
    if cfg:
        payload["preprocess"] = cfg
    result = _post(args, "/export", payload)
    print(f"exported {result['n_samples']} fixed-length samples to {result['out_dir']}")
    print(f"split manifest: {result['split_file']}")


def cmd_serve(args) -> None:
    import uvicorn

    uvicorn.run("airsig.service.app:app", host=args.host, port=args.port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airsig",
        description="In-air signature verification and trajectory reconstruction",
    )
    parser.add_argument("--server", help="remote service URL (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--sessions", type=int, default=4)
    p.add_argument("--attempts", type=int, default=2)
    p.add_argument("--forgeries", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="run the preprocessing pipeline")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--profile", choices=["verify", "reconstruct"], default="verify")
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("eval", help="run the verification benchmark")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sensors", default="acc,linacc,gyro",
                   help="comma list: acc,linacc,gyro")
    p.add_argument("--mode", choices=["1vs1", "4vs1"], default="4vs1")
    p.add_argument("--impostor", choices=["random", "skilled"], default="random")
    p.add_argument("--scorer", default="dtw", help="dtw or embedding:<file>")
    p.add_argument("--matrix", help="JSON file with a list of benchmark cells")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reconstruct", help="reconstruct one sample's 3D trajectory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--sample-id", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--profile", choices=["reconstruct", "none"], default="reconstruct")
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("export", help="write the fixed-length neural exchange format")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--length", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (AirsigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
