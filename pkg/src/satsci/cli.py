"""Command-line client for the service.

By default requests go to an in-process instance of the app; ``--server URL``
sends them to a running ``satsci serve`` instead. Exit codes: 0 success,
2 validation error, 3 budget error, 4 external-denoiser failure.
"""
from __future__ import annotations

import argparse
import base64
import csv
import json
import shlex
import sys
import warnings
from pathlib import Path

from .errors import SciError
from .harness.formats import CSV_HEADER, encode_cube, import_frames
from .harness.scenes import KINDS

EXIT_OK, EXIT_VALIDATION, EXIT_BUDGET, EXIT_DENOISER = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code


class Client:
    def __init__(self, server: str | None = None):
        if server:
            import httpx
            self._http = httpx.Client(base_url=server.rstrip("/"), timeout=None)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient
            from .service.app import app
            self._http = TestClient(app, raise_server_exceptions=False)

    @staticmethod
    def _check(resp):
        if resp.status_code < 400:
            return
        try:
            err = resp.json()["error"]
            raise CliError(f"{err['type']}: {err['message']}", err["exit_code"])
        except (ValueError, KeyError, TypeError):
            raise CliError(f"server returned HTTP {resp.status_code}") from None

    def post(self, path: str, body: dict) -> dict:
        resp = self._http.post(path, json=body)
        self._check(resp)
        return resp.json()

    def stream(self, path: str, body: dict):
        with self._http.stream("POST", path, json=body) as resp:
            if resp.status_code >= 400:
                resp.read()
                self._check(resp)
            for line in resp.iter_lines():
                if line:
                    yield json.loads(line)


def _b64file(path) -> str:
    try:
        return base64.b64encode(Path(path).read_bytes()).decode("ascii")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_VALIDATION) from exc


def _write(path, b64: str) -> None:
    Path(path).write_bytes(base64.b64decode(b64))


def _json_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_VALIDATION) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}", EXIT_VALIDATION) from exc
    if not isinstance(data, dict):
        raise CliError(f"{path} must hold a JSON object", EXIT_VALIDATION)
    return data


def _floats(s: str) -> list[float]:
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from exc


def _dump(obj) -> None:
    print(json.dumps(obj, indent=2))


def _add_scene_args(ap):
    g = ap.add_argument_group("scene")
    g.add_argument("--scene", choices=[k for k in KINDS if k != "imported"], default="moving_square")
    g.add_argument("--n1", type=int, default=64)
    g.add_argument("--n2", type=int, default=64)
    g.add_argument("--B", type=int, default=8)
    g.add_argument("--brightness", type=float, default=1.0)
    g.add_argument("--scene-seed", type=int, default=0)
    src = g.add_mutually_exclusive_group()
    src.add_argument("--cube", help="scene cube file (SCIC)")
    src.add_argument("--pgm", nargs="+", help="grayscale PGM frames, one per file")


def _scene_fields(args) -> dict:
    if args.cube:
        return {"cube": _b64file(args.cube)}
    if args.pgm:
        x = import_frames(args.pgm)
        return {"cube": base64.b64encode(encode_cube(x)).decode("ascii")}
    return {"scene": {"kind": args.scene, "n1": args.n1, "n2": args.n2, "B": args.B,
                      "brightness_scale": args.brightness, "seed": args.scene_seed}}


def cmd_simulate(client, args):
    body = {**_scene_fields(args), "p": args.p, "seed": args.seed,
            "noise_sigma": args.noise_sigma, "noise_seed": args.noise_seed}
    if args.mask:
        body["mask"] = _b64file(args.mask)
    if args.T is not None:
        body["T"] = args.T
    else:
        body["T_over_B"] = args.T_over_B
    out = client.post("/simulate", body)
    prefix = args.out
    paths = {"measurement": f"{prefix}.meas.scic", "mask": f"{prefix}.mask.scim",
             "truth": f"{prefix}.truth.scic"}
    for key, path in paths.items():
        _write(path, out[key])
    info = {"files": paths, "T": out["T"], "n_saturated": out["n_saturated"],
            "noise_eps": out["noise_eps"], "metadata": out["metadata"]}
    Path(f"{prefix}.json").write_text(json.dumps(info, indent=2))
    _dump(info)


def cmd_recover(client, args):
    body = {"measurement": _b64file(args.measurement), "mask": _b64file(args.mask),
            "mode": args.mode, "T": args.T, "denoiser": args.denoiser,
            "max_iters": args.max_iters, "mu": args.mu, "tv_inner_iters": args.tv_inner_iters,
            "external_timeout": args.timeout}
    if args.schedule is not None:
        body["strength_schedule"] = args.schedule
    if args.tol is not None:
        body["tol"] = args.tol
    if args.sat_tol is not None:
        body["sat_tol"] = args.sat_tol
    if args.external_cmd:
        body["external_command"] = shlex.split(args.external_cmd)
    if args.truth:
        body["truth"] = _b64file(args.truth)
    out = client.post("/recover", body)
    _write(args.out, out.pop("cube"))
    _dump({"out": args.out, **out})


def cmd_sweep(client, args):
    cfg = _json_file(args.config)
    if args.workers is not None:
        cfg["workers"] = args.workers
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        for msg in client.stream("/sweep", cfg):
            if "meta" in msg:
                w.writerow(CSV_HEADER)
                if args.out:
                    Path(f"{args.out}.meta.json").write_text(json.dumps(msg["meta"], indent=2))
            else:
                w.writerow(msg["row"])
                fh.flush()
    finally:
        if args.out:
            fh.close()


def cmd_bound(client, args):
    body = _json_file(args.config) if args.config else {}
    for key in ("p", "T", "B", "rho", "delta", "r", "n", "eps1", "eps2", "eps_z", "p_s"):
        v = getattr(args, key)
        if v is not None:
            body[key] = v
    _dump(client.post("/bound", body))


def cmd_ps(client, args):
    body = {**_scene_fields(args), "T": args.T, "p": args.p, "trials": args.trials, "seed": args.seed}
    _dump(client.post("/ps", body))


def cmd_verify(client, args):
    body = _json_file(args.config) if args.config else {}
    for key in ("trials", "p", "T", "noise_sigma", "seed", "levels"):
        v = getattr(args, key)
        if v is not None:
            body[key] = v
    _dump(client.post("/verify-theorem", body))


def cmd_optimal_p(client, args):
    curve = {"kind": args.curve, "k": args.k, "level": args.level, "trials": args.trials}
    if args.curve == "monte_carlo":
        if not args.cube:
            raise CliError("--curve monte_carlo needs --cube", EXIT_VALIDATION)
        curve["cube"] = _b64file(args.cube)
    body = {"T_over_B_grid": args.T_over_B, "B": args.B, "rho": args.rho, "delta": args.delta,
            "eps1": args.eps1, "eps2": args.eps2, "curve": curve}
    rows = client.post("/optimal-p", body)["rows"]
    if args.format == "json":
        _dump(rows)
        return
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["T_over_B", "T", "p_star", "g_min"])
    for r in rows:
        w.writerow([repr(r["T_over_B"]), repr(r["T"]), repr(r["p_star"]), repr(r["g_min"])])


def cmd_serve(args):
    import uvicorn
    uvicorn.run("satsci.service.app:app", host=args.host, port=args.port)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="satsci", description=__doc__.splitlines()[0])
    ap.add_argument("--server", help="base URL of a running service (default: in-process)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="scene and mask to measurement files")
    _add_scene_args(p)
    p.add_argument("--mask", help="mask file (SCIM); sampled from --p/--seed when omitted")
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0, help="mask seed")
    t = p.add_mutually_exclusive_group()
    t.add_argument("--T", type=float)
    t.add_argument("--T-over-B", dest="T_over_B", type=float, default=0.5)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recover", help="measurement and mask to cube")
    p.add_argument("--measurement", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--mode", choices=["gap", "sapnet"], default="sapnet")
    p.add_argument("--T", type=float)
    p.add_argument("--denoiser", choices=["tv", "external"], default="tv")
    p.add_argument("--external-cmd", help="command line of the external denoiser process")
    p.add_argument("--timeout", type=float, default=30.0, help="external denoiser timeout (s)")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--schedule", type=_floats, help="denoiser strengths, e.g. 0.1,0.05,0.025")
    p.add_argument("--tv-inner-iters", type=int, default=20)
    p.add_argument("--tol", type=float)
    p.add_argument("--sat-tol", type=float)
    p.add_argument("--truth", help="ground-truth cube for a PSNR report")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("sweep", help="experiment config (JSON) to CSV")
    p.add_argument("config")
    p.add_argument("--out", help="CSV path (default stdout); metadata goes to OUT.meta.json")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bound", help="evaluate the recovery bound")
    p.add_argument("--config", help="JSON file with bound parameters")
    for name, typ in (("p", float), ("T", float), ("B", int), ("rho", float), ("delta", float),
                      ("r", float), ("n", int), ("eps1", float), ("eps2", float)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--eps-z", dest="eps_z", type=float)
    p.add_argument("--p-s", dest="p_s", type=float)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("ps", help="Monte-Carlo saturated fraction")
    _add_scene_args(p)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ps)

    p = sub.add_parser("verify-theorem", help="small-instance bound check")
    p.add_argument("--config", help="JSON file with verification settings")
    p.add_argument("--trials", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    p.add_argument("--levels", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("optimal-p", help="bound-optimal density per threshold")
    p.add_argument("--T-over-B", dest="T_over_B", type=_floats,
                   default=[round(0.1 * k, 1) for k in range(1, 11)])
    p.add_argument("--B", type=int, default=8)
    p.add_argument("--rho", type=float, default=2.0)
    p.add_argument("--delta", type=float, default=0.04)
    p.add_argument("--eps1", type=float, default=0.01)
    p.add_argument("--eps2", type=float, default=0.01)
    p.add_argument("--curve", choices=["power", "uniform", "monte_carlo"], default="power")
    p.add_argument("--k", type=float, default=2.0)
    p.add_argument("--level", type=float, default=1.0)
    p.add_argument("--cube")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_optimal_p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        cmd_serve(args)
        return EXIT_OK
    try:
        args.func(Client(args.server), args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SciError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
