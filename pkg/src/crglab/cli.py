"""Command line front end.

    crglab sample --family pcs --r 3 --n 4 --L 2 --count 5
    crglab run --protocol pointer-chasing --r 3 --n 4 --L 8 --draws 10000
    crglab tv --protocol meet-in-middle --r 1 --n 2 --mc-trials 2000
    crglab search --family pv-mix --r 1 --n 3 --rounds 1 --bits 0 1 2 3 --format csv
    crglab check --r 3 --n 4 --delta 0.5 --C 0
    crglab reduce --kind pv --r 1 --n 2 --L 1

Exit codes: 0 success, 2 invalid parameters or protocol violation, 3 size cap exceeded.
CRGLAB_CAP overrides the enumeration cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from . import infometrics as im
from .engine import run_protocol
from .errors import CapExceeded, ProtocolError
from .lab import (
    NoisyClassParams,
    exhaustive_protocol_search,
    mc_tv_estimate,
    noisy_class_check,
    noisy_class_check_lumped,
    output_bit_advantage,
    protocol_tv,
)
from .permcore import Permutation
from .protocols import meet_in_middle_pv, pointer_chasing_skg
from .reductions import enumerate_disj_to_crg, enumerate_pv_to_crg, enumerate_t_removal
from .sources import (
    FAMILIES,
    DisjInstance,
    PcsSample,
    PvInstance,
    default_cap,
    enumerate_pv_lumped,
    enumerate_source,
    sample_family,
)
from .table import DistTable

SIG = 12


def num(x: Any) -> Any:
    """Round floats (and Fractions) to 12 significant digits for output."""
    if isinstance(x, Fraction):
        x = float(x)
    if isinstance(x, float):
        return float(f"{x:.{SIG}g}")
    return x


@dataclass
class ExperimentConfig:
    subcommand: str
    family: str | None = None
    protocol: str | None = None
    r: int | None = None
    n: int | None = None
    L: int | None = None
    t: int | None = None
    delta: float | None = None
    C: float | None = None
    rounds: int | None = None
    bits: list[int] = field(default_factory=list)
    seed: int = 0
    jobs: int = 1
    out: str | None = None
    format: str = "json"

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "ExperimentConfig":
        names = cls.__dataclass_fields__
        return cls(**{k: v for k, v in vars(args).items() if k in names and v is not None})


# -- record rendering ------------------------------------------------


def _perm(p: Permutation) -> list[int]:
    return list(p.image)


def render(atom: Any) -> dict:
    if isinstance(atom, PcsSample):
        return {
            "r": atom.r,
            "n": atom.n,
            "L": atom.L,
            "alice": {"perms": [_perm(p) for p in atom.alice.perms], "blocks": list(atom.alice.blocks)},
            "bob": {"i": atom.bob.i, "perms": [_perm(p) for p in atom.bob.perms], "blocks": list(atom.bob.blocks)},
            "chased": atom.chased,
        }
    if isinstance(atom, PvInstance):
        return {
            "r": atom.r,
            "n": atom.n,
            "alice": {"perms": [_perm(p) for p in atom.alice.perms]},
            "bob": {"i0": atom.bob.i0, "j0": atom.bob.j0, "perms": [_perm(p) for p in atom.bob.perms]},
            "label": atom.label,
        }
    if isinstance(atom, DisjInstance):
        return {"n": atom.n, "u": sorted(atom.u), "v": sorted(atom.v), "intersecting": atom.intersecting}
    raise TypeError(f"cannot render {type(atom).__name__}")


def _draw_rng(seed: int, k: int) -> np.random.Generator:
    # one child stream per draw index, so results do not depend on --jobs
    return np.random.default_rng(np.random.SeedSequence([seed, k]))


def _emit(text: str, cfg: ExperimentConfig) -> None:
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True)


# -- subcommands ------------------------------------------------


def cmd_sample(cfg: ExperimentConfig, count: int) -> str:
    if cfg.family not in FAMILIES:
        raise ValueError(f"unknown family {cfg.family!r}; choose from {FAMILIES}")
    if cfg.family.startswith("disj-") and (cfg.n is None or cfg.n % 4 or cfg.n < 4):
        raise ValueError(f"n={cfg.n} must be a positive multiple of 4")
    lines = []
    for k in range(count):
        atom = sample_family(cfg.family, _draw_rng(cfg.seed, k), r=cfg.r, n=cfg.n, L=cfg.L)
        lines.append(_dumps({"index": k, "family": cfg.family, **render(atom)}))
    return "\n".join(lines) + "\n"


def _spec_for(cfg: ExperimentConfig):
    if cfg.protocol == "pointer-chasing":
        return pointer_chasing_skg(cfg.r, cfg.n, cfg.L)
    if cfg.protocol == "meet-in-middle":
        return meet_in_middle_pv(cfg.r, cfg.n)
    raise ValueError(f"unknown protocol {cfg.protocol!r}")


def _default_family(cfg: ExperimentConfig) -> str:
    return cfg.family or ("pcs" if cfg.protocol == "pointer-chasing" else "pv-mix")


def _run_chunk(args: tuple) -> list[tuple]:
    cfg, family, lo, hi = args
    spec = _spec_for(cfg)
    out = []
    for k in range(lo, hi):
        atom = sample_family(family, _draw_rng(cfg.seed, k), r=cfg.r, n=cfg.n, L=cfg.L)
        rec = run_protocol(spec, atom.alice, atom.bob, seed=cfg.seed)
        correct = None
        if isinstance(atom, PvInstance):
            correct = rec.transcript.last_bit == ("1" if atom.truth else "0")
        out.append((k, rec.agree, rec.bits_used, rec.rounds_used, correct, rec.to_dict()))
    return out


def _chunks(total: int, jobs: int) -> list[tuple[int, int]]:
    step = -(-total // max(jobs, 1))
    return [(lo, min(total, lo + step)) for lo in range(0, total, step)]


def cmd_run(cfg: ExperimentConfig, draws: int, exact: bool, records: bool) -> str:
    family = _default_family(cfg)
    spec = _spec_for(cfg)
    work = [(cfg, family, lo, hi) for lo, hi in _chunks(draws, cfg.jobs)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            parts = list(pool.map(_run_chunk, work))
    else:
        parts = [_run_chunk(w) for w in work]
    rows = sorted((row for part in parts for row in part), key=lambda row: row[0])
    summary: dict[str, Any] = {
        "config": asdict(cfg),
        "protocol": spec.name,
        "family": family,
        "draws": draws,
        "agreement_rate": num(sum(r[1] for r in rows) / draws),
        "bits_max": max(r[2] for r in rows),
        "rounds_max": max(r[3] for r in rows),
        "bit_budget": spec.bit_budget,
        "round_budget": spec.round_budget,
    }
    if rows and rows[0][4] is not None:
        summary["accuracy"] = num(sum(bool(r[4]) for r in rows) / draws)
    if exact:
        summary.update(_exact_secrecy(cfg, family, spec))
    lines = [_dumps(r[5]) for r in rows] if records else []
    lines.append(_dumps({"summary": summary}))
    return "\n".join(lines) + "\n"


def _exact_secrecy(cfg: ExperimentConfig, family: str, spec) -> dict:
    D = enumerate_source(family, r=cfg.r, n=cfg.n, L=cfg.L)
    rows = []
    for atom, w in D.items():
        rec = run_protocol(spec, atom.alice, atom.bob, seed=cfg.seed)
        rows.append(((rec.transcript.messages, rec.k_a, rec.k_b), w))
    J = im.JointTable(
        DistTable.accumulate(rows), {"transcript": lambda a: a[0], "k_a": lambda a: a[1], "k_b": lambda a: a[2]}
    )
    agree = J.table.event_weight(lambda a: a[1] == a[2])
    return {
        "exact_agreement": num(Fraction(agree, J.table.total)),
        "exact_mi_transcript_key": num(im.mutual_information(J, "transcript", "k_a")),
        "exact_min_entropy_key": num(im.min_entropy(J.marginal("k_a"))),
    }


def cmd_tv(cfg: ExperimentConfig, fam1: str, fam2: str, mc_trials: int | None) -> str:
    spec = _spec_for(cfg)
    D1 = enumerate_source(fam1, r=cfg.r, n=cfg.n, L=cfg.L)
    D2 = enumerate_source(fam2, r=cfg.r, n=cfg.n, L=cfg.L)
    out: dict[str, Any] = {
        "config": asdict(cfg),
        "protocol": spec.name,
        "families": [fam1, fam2],
        "exact_tv": num(protocol_tv(spec, D1, D2)),
        "output_bit_advantage": num(output_bit_advantage(spec, D1, D2)),
    }
    if mc_trials:

        def sampler(fam):
            return lambda rng: sample_family(fam, rng, r=cfg.r, n=cfg.n, L=cfg.L)

        est = mc_tv_estimate(spec, sampler(fam1), sampler(fam2), mc_trials, cfg.seed)
        out["mc"] = {k: num(v) for k, v in est.to_dict().items()}
    return _dumps(out) + "\n"


def cmd_search(cfg: ExperimentConfig, timing: bool) -> str:
    family = cfg.family or "pv-mix"
    rows = []
    if family == "pv-mix":
        D_mix = enumerate_source("pv-mix", r=cfg.r, n=cfg.n)
        run = lambda c: exhaustive_protocol_search(D_mix, cfg.rounds, c, cap=default_cap())
    else:
        a, b = family.split(":") if ":" in family else (family, None)
        if b is None:
            raise ValueError("family must be pv-mix or a pair like pv-yes:pv-no")
        D1 = enumerate_source(a, r=cfg.r, n=cfg.n, L=cfg.L)
        D2 = enumerate_source(b, r=cfg.r, n=cfg.n, L=cfg.L)
        run = lambda c: exhaustive_protocol_search(None, cfg.rounds, c, D1=D1, D2=D2, cap=default_cap())
    for c in cfg.bits or [1]:
        t0 = time.perf_counter()
        res = run(c)
        ms = (time.perf_counter() - t0) * 1000
        rows.append(
            {
                "r": cfg.rounds,
                "c": c,
                "n": cfg.n,
                "optimum": num(res.optimum),
                "optimum_exact": str(res.optimum),
                "enumeration_size": res.enumeration_size,
                "wall_time_ms": num(ms) if timing else "",
            }
        )
    if cfg.format == "csv":
        buf = io.StringIO()
        cols = ["r", "c", "n", "optimum", "enumeration_size", "wall_time_ms"]
        w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    return "\n".join(_dumps(r) for r in rows) + "\n"


def cmd_check(cfg: ExperimentConfig, lumped: bool) -> str:
    params = NoisyClassParams(cfg.n, cfg.r, cfg.delta if cfg.delta is not None else 2 / cfg.n, cfg.C or 0.0)
    if lumped:
        report = noisy_class_check_lumped(enumerate_pv_lumped(cfg.r, cfg.n, "mix"), params)
    else:
        D = enumerate_source("pv-mix", r=cfg.r, n=cfg.n)
        report = noisy_class_check(D, params, check_independence=cfg.n <= 3)
    d = report.to_dict()
    for c in d["conditions"]:
        for k in ("measured", "threshold", "margin"):
            c[k] = num(c[k])
    return _dumps({"config": asdict(cfg), **d}) + "\n"


def cmd_reduce(cfg: ExperimentConfig, kind: str) -> str:
    if kind == "t-removal":
        t = cfg.t or 2
        src = {}
        for fam in ("pcs", "product"):
            produced = enumerate_t_removal(enumerate_source(fam, r=cfg.r, n=cfg.n, L=cfg.L * t), cfg.r, t)
            one = enumerate_source(fam, r=cfg.r, n=cfg.n, L=cfg.L)
            target = one
            for _ in range(t - 1):
                target = target.product(one).map(_flatten)
            target = target.map(lambda a: a if isinstance(a, tuple) else (a,))
            src[fam] = num(im.tv_distance(produced, target))
        out = {"kind": kind, "tv": src}
    elif kind == "disj":
        out = {"kind": kind, "tv": {}}
        for fam, target in (("disj-yes", "mid"), ("disj-no", "product")):
            produced = enumerate_disj_to_crg(enumerate_source(fam, n=cfg.n), cfg.r, cfg.L)
            out["tv"][f"{fam}->{target}"] = num(im.tv_distance(produced, enumerate_source(target, r=cfg.r, n=cfg.n, L=cfg.L)))
    elif kind == "pv":
        out = {"kind": kind, "tv": {}}
        for fam, target in (("pv-yes", "pcs"), ("pv-no", "mid")):
            produced = enumerate_pv_to_crg(enumerate_source(fam, r=cfg.r, n=cfg.n), cfg.L)
            out["tv"][f"{fam}->{target}"] = num(im.tv_distance(produced, enumerate_source(target, r=cfg.r, n=cfg.n, L=cfg.L)))
    else:
        raise ValueError(f"unknown reduction {kind!r}")
    return _dumps({"config": asdict(cfg), **out}) + "\n"


def _flatten(pair):
    a, b = pair
    a = a if isinstance(a, tuple) else (a,)
    return a + (b,)


# -- argument parsing ------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crglab", description="Two-party common randomness laboratory.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, *, L=True):
        sp.add_argument("--r", type=int)
        sp.add_argument("--n", type=int)
        if L:
            sp.add_argument("--L", type=int)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")

    s = sub.add_parser("sample", help="draw samples as JSON lines")
    common(s)
    s.add_argument("--family", required=True)
    s.add_argument("--count", type=int, default=1)

    s = sub.add_parser("run", help="run a protocol on sampled inputs")
    common(s)
    s.add_argument("--protocol", required=True, choices=["pointer-chasing", "meet-in-middle"])
    s.add_argument("--family")
    s.add_argument("--draws", type=int, default=1000)
    s.add_argument("--exact", action="store_true", help="also enumerate the source exactly (tiny sizes)")
    s.add_argument("--records", action="store_true", help="emit one RunRecord per draw")
    s.add_argument("--jobs", type=int, default=1, help="worker processes; output does not depend on it")

    s = sub.add_parser("tv", help="exact (and Monte Carlo) transcript distance")
    common(s)
    s.add_argument("--protocol", required=True, choices=["pointer-chasing", "meet-in-middle"])
    s.add_argument("--family1", default="pv-yes")
    s.add_argument("--family2", default="pv-no")
    s.add_argument("--mc-trials", type=int)

    s = sub.add_parser("search", help="exact optimum over deterministic protocols")
    common(s)
    s.add_argument("--family", default="pv-mix")
    s.add_argument("--rounds", type=int, default=1)
    s.add_argument("--bits", type=int, nargs="+", default=[1])
    s.add_argument("--format", choices=["json", "csv"], default="json")
    s.add_argument("--no-timing", action="store_true", help="leave wall_time_ms empty (byte-stable output)")

    s = sub.add_parser("check", help="noisy-class conditions for the pointer verification mixture")
    common(s, L=False)
    s.add_argument("--delta", type=float)
    s.add_argument("--C", type=float)
    s.add_argument("--lumped", action="store_true", help="use the lumped table (conditions 1-4 only)")

    s = sub.add_parser("reduce", help="exact check of an instance reduction")
    common(s)
    s.add_argument("--kind", required=True, choices=["t-removal", "disj", "pv"])
    s.add_argument("--t", type=int)
    return p


_BLOCK_FAMILIES = ("pcs", "product", "mid")


def _missing(cfg: ExperimentConfig) -> list[str]:
    disj = (cfg.family or "").startswith("disj")
    need = ["n"] if disj and cfg.subcommand in ("sample", "run") else ["r", "n"]
    if cfg.subcommand == "sample" and cfg.family in _BLOCK_FAMILIES:
        need.append("L")
    elif cfg.subcommand == "run" and (cfg.protocol == "pointer-chasing" or cfg.family in _BLOCK_FAMILIES):
        need.append("L")
    elif cfg.subcommand == "reduce":
        need.append("L")
    return [f"--{k}" for k in need if getattr(cfg, k) is None]


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = ExperimentConfig.from_args(args)
    missing = _missing(cfg)
    if missing:
        parser.error(f"{cfg.subcommand} needs {', '.join(missing)}")
    try:
        if cfg.subcommand == "sample":
            text = cmd_sample(cfg, args.count)
        elif cfg.subcommand == "run":
            text = cmd_run(cfg, args.draws, args.exact, args.records)
        elif cfg.subcommand == "tv":
            text = cmd_tv(cfg, args.family1, args.family2, args.mc_trials)
        elif cfg.subcommand == "search":
            text = cmd_search(cfg, not args.no_timing)
        elif cfg.subcommand == "check":
            text = cmd_check(cfg, args.lumped)
        else:
            text = cmd_reduce(cfg, args.kind)
    except CapExceeded as exc:
        print(f"crglab: {exc}", file=sys.stderr)
        return 3
    except (ValueError, ProtocolError, TypeError) as exc:
        print(f"crglab: {exc}", file=sys.stderr)
        return 2
    _emit(text, cfg)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
