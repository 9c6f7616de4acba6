"""Command-line front end.

    hcdeco curve    --config run.yaml --out results/ [--engine analytic|oracle|both]
    hcdeco tau      --config run.yaml --out results/
    hcdeco decayfit --config run.yaml --out results/
    hcdeco compare  --config run.yaml --out results/ [--seed 0]

Exit codes: 0 success, 1 tolerance failure, 2 invalid config, 3 engine error.
The config grammar is documented in README.md.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__, oracle, rdm
from .errors import (DecoherenceError, InsufficientSamples, NonFiniteVariance, ValidationError,
                     ZeroSeparation, ZeroWidth)
from .model import (Box, Cauchy, Coupling, CouplingKind, Delta, Gaussian, GaussianPacket,
                    PhysConsts, ProductEnv, TwoPoint, validate)

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_ENGINE = 0, 1, 2, 3
CSV_COLUMNS = ("t", "z_or_y", "re", "im", "modulus", "phase_exponent", "engine")
ENGINES = ("analytic", "oracle", "both")

_FAMILIES = {
    "gaussian": (Gaussian, ("mean", "std")),
    "box": (Box, ("center", "halfwidth")),
    "cauchy": (Cauchy, ("location", "scale")),
    "delta": (Delta, ("location",)),
}

DEFAULTS = {
    "consts": {"hbar": 1.0, "alpha": 1.0, "n": 1},
    "coupling": {"kind": "sc", "k": 1.0},
    "environment": {"family": "gaussian", "mean": 0.0, "std": 1.0},
    "body": {"kind": "gaussian", "center": 0.0, "width": 1.0, "p0": 0.0},
    "query": {"a": 1.0, "b": -1.0},
    "times": {"start": 0.0, "stop": 10.0, "count": 101},
    "engine": "analytic",
    "oracle": {"points": 1024, "spacing": 0.05, "dt": None, "steps": None},
    "window": None,
    "tolerances": {"modulus": 1e-5, "phase": 1e-6},
    "draws": None,
    "output": {"prefix": "run"},
}


class ConfigError(Exception):
    pass


def _num(v, what):
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a number, got {v!r}") from None


@dataclass
class RunConfig:
    """Normalized run configuration; ``data`` always has every section."""

    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(raw) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        d = copy.deepcopy(DEFAULTS)
        replaced = ("environment", "body", "coupling", "times")
        for key, val in raw.items():
            if isinstance(d[key], dict) and isinstance(val, dict) and key not in replaced:
                d[key].update(val)
            else:
                d[key] = copy.deepcopy(val)
        d = _normalize(d)
        return cls(d)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                raw = yaml.safe_load(fh) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"cannot parse config: {exc}") from None
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    # -- engine objects --

    @property
    def consts(self) -> PhysConsts:
        c = self.data["consts"]
        return PhysConsts(c["hbar"], c["alpha"], c["n"])

    @property
    def coupling(self) -> Coupling:
        c = self.data["coupling"]
        kind = CouplingKind(c["kind"])
        if kind is CouplingKind.MHC:
            return Coupling.mhc(c["mu"], c["nu"])
        return Coupling(kind, **{k: v for k, v in c.items() if k != "kind"})

    @property
    def env(self) -> ProductEnv:
        return ProductEnv(tuple(_family(p) for p in self.data["environment"]["particles"]))

    @property
    def body(self):
        """Amplitude in the pointer basis of the coupling (momentum space for mc/mhc)."""
        b = self.data["body"]
        if b["kind"] == "two_point":
            return TwoPoint(tuple(b["positions"]), tuple(complex(w) for w in b["weights"]))
        packet = GaussianPacket(b["center"], b["width"], b["p0"], self.data["consts"]["hbar"])
        return packet.fourier() if self.coupling.pointer_basis == "momentum" else packet

    @property
    def times(self) -> np.ndarray:
        t = self.data["times"]
        if "values" in t:
            return np.array(t["values"], dtype=float)
        return np.linspace(t["start"], t["stop"], t["count"])

    @property
    def grid(self) -> oracle.GridSpec:
        o = self.data["oracle"]
        return oracle.GridSpec(o["points"], o["spacing"], self.data["consts"]["n"], o.get("origin"))


def _family(spec: dict):
    cls, fields = _FAMILIES[spec["family"]]
    return cls(**{f: spec[f] for f in fields})


def _normalize(d: dict) -> dict:
    c = d["consts"]
    c["hbar"] = _num(c["hbar"], "consts.hbar")
    c["alpha"] = _num(c["alpha"], "consts.alpha")
    if float(c["n"]) != int(float(c["n"])):
        raise ConfigError("consts.n must be an integer")
    c["n"] = int(float(c["n"]))

    cp = d["coupling"]
    kind = str(cp.get("kind", "")).lower()
    if kind not in {k.value for k in CouplingKind}:
        raise ConfigError(f"coupling.kind must be one of sc, mc, hc, mhc, got {cp.get('kind')!r}")
    d["coupling"] = {"kind": kind, **{k: _num(v, f"coupling.{k}") for k, v in cp.items() if k != "kind"}}

    env = d["environment"]
    if "particles" in env:
        parts = env["particles"]
    else:
        parts = [dict(env)] * c["n"]
    norm_parts = []
    for i, p in enumerate(parts):
        fam = str(p.get("family", "")).lower()
        if fam not in _FAMILIES:
            raise ConfigError(f"environment particle {i}: family must be one of {sorted(_FAMILIES)}")
        fields = _FAMILIES[fam][1]
        defaults = {"mean": 0.0, "std": 1.0, "center": 0.0, "halfwidth": 1.0, "location": 0.0, "scale": 1.0}
        extra = set(p) - set(fields) - {"family"}
        if extra:
            raise ConfigError(f"environment particle {i}: unexpected keys {sorted(extra)}")
        norm_parts.append({"family": fam, **{f: _num(p.get(f, defaults[f]), f"environment.{f}") for f in fields}})
    d["environment"] = {"particles": norm_parts}

    b = d["body"]
    kind = b.get("kind", "gaussian")
    if kind == "gaussian":
        d["body"] = {"kind": "gaussian", "center": _num(b.get("center", 0.0), "body.center"),
                     "width": _num(b.get("width", 1.0), "body.width"), "p0": _num(b.get("p0", 0.0), "body.p0")}
    elif kind == "two_point":
        pos = [_num(x, "body.positions") for x in b.get("positions", [])]
        weights = []
        for x in b.get("weights", []):
            if isinstance(x, str):
                try:
                    w = complex(x.replace(" ", ""))
                except ValueError:
                    raise ConfigError(f"body.weights: cannot read {x!r} as a complex number") from None
                weights.append(w.real if w.imag == 0 else str(w))
            else:
                weights.append(_num(x, "body.weights"))
        d["body"] = {"kind": "two_point", "positions": pos, "weights": weights}
    else:
        raise ConfigError(f"body.kind must be gaussian or two_point, got {kind!r}")

    q = d["query"]
    d["query"] = {"a": _num(q["a"], "query.a"), "b": _num(q["b"], "query.b")}

    t = d["times"]
    if "values" in t:
        d["times"] = {"values": [_num(v, "times.values") for v in t["values"]]}
    else:
        count = t.get("count", 101)
        if float(count) != int(float(count)):
            raise ConfigError("times.count must be an integer")
        d["times"] = {"start": _num(t.get("start", 0.0), "times.start"),
                      "stop": _num(t.get("stop", 10.0), "times.stop"), "count": int(float(count))}

    d["engine"] = str(d["engine"]).lower()
    o = d["oracle"]
    d["oracle"] = {"points": int(o["points"]), "spacing": _num(o["spacing"], "oracle.spacing"),
                   "dt": None if o.get("dt") is None else _num(o["dt"], "oracle.dt"),
                   "steps": None if o.get("steps") is None else int(o["steps"])}
    if o.get("origin") is not None:
        d["oracle"]["origin"] = _num(o["origin"], "oracle.origin")
    if d["window"] is not None:
        w = d["window"]
        d["window"] = {"zmin": _num(w["zmin"], "window.zmin"), "zmax": _num(w["zmax"], "window.zmax")}
    tol = d["tolerances"]
    d["tolerances"] = {"modulus": _num(tol["modulus"], "tolerances.modulus"),
                       "phase": _num(tol["phase"], "tolerances.phase")}
    if d["draws"] is not None:
        dr = d["draws"]
        d["draws"] = {"count": int(dr.get("count", 20)),
                      "a": [_num(v, "draws.a") for v in dr.get("a", [-1.0, 1.0])],
                      "b": [_num(v, "draws.b") for v in dr.get("b", [-1.0, 1.0])],
                      "t": [_num(v, "draws.t") for v in dr.get("t", [-1.0, 1.0])]}
    d["output"] = {"prefix": str(d["output"].get("prefix", "run"))}
    return d


def check_config(cfg: RunConfig, engine: str) -> list[str]:
    """Invariants of a run configuration beyond the model's own."""
    problems = []
    d = cfg.data
    if engine not in ENGINES:
        problems.append(f"engine one of {ENGINES}")
    consts = cfg.consts
    try:
        coupling = cfg.coupling
    except (TypeError, ValueError) as exc:
        return problems + [f"coupling: {exc}"]
    body = cfg.body
    rep = validate(consts, coupling, cfg.env, body)
    problems += list(rep.violations)
    if "values" in d["times"]:
        t = np.array(d["times"]["values"])
        if t.size < 1:
            problems.append("time grid count ≥ 1")
        elif np.any(np.diff(t) <= 0):
            problems.append("time grid strictly increasing")
    else:
        if d["times"]["count"] < 1:
            problems.append("time grid count ≥ 1")
        elif d["times"]["count"] > 1 and d["times"]["stop"] <= d["times"]["start"]:
            problems.append("time grid strictly increasing")
    if engine in ("oracle", "both"):
        if consts.n > 3:
            problems.append("engine=oracle requires n ≤ 3")
        if cfg.env.has_delta:
            problems.append("engine=oracle requires a non-Delta environment")
        if coupling.kind is CouplingKind.MHC:
            problems.append("engine=oracle does not support the mhc coupling")
        if not problems:
            try:
                cfg.grid
            except DecoherenceError as exc:
                problems.append(f"oracle grid: {exc}")
    return problems


# --- output -------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def curve_csv(rows: list[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in r[:-1]] + [r[-1]])
    return buf.getvalue()


def write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    """Write every file to a temporary name first, then rename them all."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            staged.append((tmp, out_dir / name))
        for tmp, final in staged:
            os.replace(tmp, final)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _metadata(cfg: RunConfig, command: str, engine: str, summary: dict) -> dict:
    return {
        "command": command,
        "engine": engine,
        "config": cfg.to_dict(),
        "versions": {"hcdeco": __version__, "numpy": np.__version__, "python": sys.version.split()[0]},
        "tolerances": cfg.data["tolerances"],
        "summary": summary,
    }


# --- engines ------------------------------------------------------------------------


def analytic_rows(cfg: RunConfig, times=None, a=None, b=None) -> list[tuple]:
    q = cfg.data["query"]
    a = q["a"] if a is None else a
    b = q["b"] if b is None else b
    times = cfg.times if times is None else np.asarray(times)
    consts, coupling, env, body = cfg.consts, cfg.coupling, cfg.env, cfg.body
    rows = []
    for t in times:
        e = rdm.rdm_element(body, env, a, b, float(t), consts, coupling)
        rows.append((float(t), e.z_or_y, e.value.real, e.value.imag, e.modulus, e.phase_exponent, "analytic"))
    return rows


def oracle_rows(cfg: RunConfig, times=None, a=None, b=None) -> list[tuple]:
    q = cfg.data["query"]
    a = q["a"] if a is None else a
    b = q["b"] if b is None else b
    times = cfg.times if times is None else np.asarray(times)
    consts, coupling, body = cfg.consts, cfg.coupling, cfg.body
    grid = cfg.grid
    wave = oracle.prepare(cfg.env, grid)
    o = cfg.data["oracle"]
    rows = []
    for t in times:
        v = oracle.rdm_element_oracle(body, wave, a, b, float(t), consts, coupling, dt=o["dt"], steps=o["steps"])
        z = float(rdm.transform_arg(coupling, a, b, t, consts))
        th = float(rdm.phase_exponent(coupling, a, b, t, consts) + rdm.body_phase(coupling, a, b, t, consts))
        rows.append((float(t), z, v.real, v.imag, abs(v), th, "oracle"))
    return rows


def _errors(an: list[tuple], orc: list[tuple], floor: float) -> dict:
    rel, ph, skipped = [], [], 0
    for ra, ro in zip(an, orc):
        va = complex(ra[2], ra[3])
        vo = complex(ro[2], ro[3])
        if abs(va) <= floor:
            skipped += 1
            continue
        rel.append(abs(abs(vo) - abs(va)) / abs(va))
        ph.append(abs(np.angle(vo / va)))
    return {"max_rel_modulus_error": max(rel, default=0.0), "max_phase_error": max(ph, default=0.0),
            "compared": len(rel), "skipped_near_zero": skipped}


# --- commands -----------------------------------------------------------------------


def cmd_curve(cfg: RunConfig, out: Path, engine: str) -> int:
    prefix = cfg.data["output"]["prefix"]
    files, summary = {}, {}
    an = orc = None
    if engine in ("analytic", "both"):
        an = analytic_rows(cfg)
        files[f"{prefix}_analytic.csv"] = curve_csv(an)
        summary["rows"] = len(an)
    if engine in ("oracle", "both"):
        orc = oracle_rows(cfg)
        files[f"{prefix}_oracle.csv"] = curve_csv(orc)
        summary["rows"] = len(orc)
    if an is not None and orc is not None:
        summary["max_abs_modulus_discrepancy"] = max(abs(ra[4] - ro[4]) for ra, ro in zip(an, orc))
        summary.update(_errors(an, orc, _floor(an)))
    files[f"{prefix}.json"] = _json(_metadata(cfg, "curve", engine, summary))
    write_outputs(out, files)
    return EXIT_OK


def _floor(rows) -> float:
    return 1e-8 * max((abs(complex(r[2], r[3])) for r in rows), default=0.0)


def cmd_tau(cfg: RunConfig, out: Path, engine: str) -> int:
    consts, coupling, env = cfg.consts, cfg.coupling, cfg.env
    q = cfg.data["query"]
    sep = q["a"] - q["b"]
    base = rdm.decoherence_time(coupling, sep, env, consts)
    table = [{"doubled": "none", "tau": base.tau, "ratio": 1.0}]
    args = {"n": base.n, "strength": base.strength, "separation": base.separation,
            "delta_eta": base.delta_eta}
    for name in args:
        varied = dict(args, **{name: 2 * args[name]})
        tau = rdm.timescale(hbar=base.hbar, **varied)
        table.append({"doubled": name, "tau": tau, "ratio": tau / base.tau})
    # doubling the number of identical particles also narrows Δη by √2
    grown = rdm.decoherence_time(coupling, sep, ProductEnv(env.particles * 2),
                                 PhysConsts(consts.hbar, consts.alpha, 2 * consts.n))
    table.append({"doubled": "identical_particles", "tau": grown.tau, "ratio": grown.tau / base.tau})
    report = {
        "tau": base.tau, "n": base.n, "coupling_kind": base.kind, "coupling_strength": base.strength,
        "separation": base.separation, "delta_eta": base.delta_eta, "hbar": base.hbar,
        "scaling": table,
    }
    prefix = cfg.data["output"]["prefix"]
    meta = _metadata(cfg, "tau", "analytic", report)
    write_outputs(out, {f"{prefix}_tau.json": _json(meta)})
    return EXIT_OK


def cmd_decayfit(cfg: RunConfig, out: Path, engine: str) -> int:
    w = cfg.data["window"]
    if w is None:
        raise ConfigError("decayfit needs a window: {zmin, zmax}")
    crv = rdm.curve(cfg.body, cfg.env, cfg.data["query"]["a"], cfg.data["query"]["b"], cfg.times,
                    cfg.consts, cfg.coupling)
    fit = rdm.decay_fit(crv, (w["zmin"], w["zmax"]))
    report = {"model": fit.model, "order": fit.order, "log_slope": fit.log_slope,
              "residuals": fit.residuals, "points": fit.points, "window": w}
    prefix = cfg.data["output"]["prefix"]
    write_outputs(out, {f"{prefix}_decayfit.json": _json(_metadata(cfg, "decayfit", "analytic", report))})
    return EXIT_OK


def cmd_compare(cfg: RunConfig, out: Path, engine: str, seed: int = 0) -> int:
    q = cfg.data["query"]
    queries = [(q["a"], q["b"], float(t)) for t in cfg.times]
    dr = cfg.data["draws"]
    if dr is not None:
        rng = np.random.default_rng(seed)
        for _ in range(dr["count"]):
            queries.append((float(rng.uniform(*dr["a"])), float(rng.uniform(*dr["b"])), float(rng.uniform(*dr["t"]))))
    an, orc = [], []
    for a, b, t in queries:
        an += analytic_rows(cfg, [t], a, b)
        orc += oracle_rows(cfg, [t], a, b)
    floor = 1e-8 * max(abs(complex(cfg.body(a))) * abs(complex(cfg.body(b))) for a, b, _ in queries)
    stats = _errors(an, orc, floor)
    tol = cfg.data["tolerances"]
    passed = stats["max_rel_modulus_error"] < tol["modulus"] and stats["max_phase_error"] < tol["phase"]
    stats.update({"pass": bool(passed), "queries": len(queries), "seed": seed})
    prefix = cfg.data["output"]["prefix"]
    write_outputs(out, {f"{prefix}_compare.json": _json(_metadata(cfg, "compare", "both", stats))})
    return EXIT_OK if passed else EXIT_TOLERANCE


COMMANDS = {"curve": cmd_curve, "tau": cmd_tau, "decayfit": cmd_decayfit, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hcdeco", description="Exactly solvable decoherence model")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=".")
        p.add_argument("--engine", choices=ENGINES, default=None)
        p.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        engine = args.engine or cfg.data["engine"]
        if args.command == "compare":
            engine = "both"
        elif args.command in ("tau", "decayfit"):
            engine = "analytic"
        problems = check_config(cfg, engine)
        if problems:
            raise ValidationError(problems)
        cfg.data["engine"] = engine
    except (ConfigError, ValidationError, OSError, KeyError) as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        if args.command == "compare":
            return cmd_compare(cfg, out, engine, args.seed)
        return COMMANDS[args.command](cfg, out, engine)
    except (ZeroSeparation, NonFiniteVariance, ZeroWidth, ConfigError) as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InsufficientSamples, DecoherenceError) as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
