"""Command line entry point and experiment drivers.

Reports are newline-delimited JSON (one record per n, then a summary
record) or CSV.  Exit codes: 0 success, 2 partial results because a budget
ran out, 1 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from . import arith, cartan, enumeration, equidist, forms, local, so3
from .forms import Form

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARTIAL = 2


class InputError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    form: str = "identity:3"
    form2: Optional[str] = None
    n_min: int = 1
    n_max: int = 10
    n_list: Optional[list[int]] = None
    filter: str = "all"  # all | odd | coprime:N
    max_e: Optional[int] = None
    local_budget: int = 200_000
    time_budget: Optional[float] = None  # seconds for a whole scan
    global_mode: str = "auto"  # count | exists | auto (count for rank <= 3)
    content: str = "rational"
    seed: int = 0
    degree: int = 2
    haar_samples: int = 100_000
    cap_angles: list[float] = field(default_factory=lambda: [math.pi / 3, math.pi / 2])
    workers: int = 1
    out: Optional[str] = None

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls.from_json(json.loads(text))

    def validate(self) -> None:
        if self.n_min < 1 and self.n_list is None:
            raise InputError("n_min must be positive")
        if self.filter != "all" and self.filter != "odd" and not self.filter.startswith("coprime:"):
            raise InputError(f"unknown filter {self.filter!r}")
        if self.global_mode not in ("count", "exists", "auto"):
            raise InputError("global_mode must be count, exists or auto")
        if self.degree not in (1, 2, 3, 4):
            raise InputError("degree must be in 1..4")
        if self.content not in ("rational", "gaussian"):
            raise InputError("content must be rational or gaussian")

    def levels(self) -> list[int]:
        ns = list(self.n_list) if self.n_list is not None else list(range(self.n_min, self.n_max + 1))
        if any(n < 1 for n in ns):
            raise InputError("levels must be positive")
        if self.filter == "odd":
            ns = [n for n in ns if n % 2]
        elif self.filter.startswith("coprime:"):
            big = int(self.filter.split(":", 1)[1])
            ns = [n for n in ns if math.gcd(n, big) == 1]
        return sorted(set(ns))


def load_form(spec: str) -> Form:
    """A JSON path, or ``identity:K`` / ``hermitian-identity:K`` / ``diag:a,b,...``."""
    try:
        if spec.startswith("identity:"):
            return forms.identity_form(int(spec.split(":")[1]))
        if spec.startswith("hermitian-identity:"):
            return forms.identity_form(int(spec.split(":")[1]), "hermitian")
        if spec.startswith("diag:"):
            return forms.quadratic(arith.diag(*[int(x) for x in spec[5:].split(",")]))
        return Form.load(spec)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot load form {spec!r}: {exc}") from exc


def _seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    # counter-based splitting: stream i of seed s is SeedSequence(s, spawn_key=(i,))
    return np.random.SeedSequence(seed, spawn_key=tuple(key))


# ------------------------------------------------------------ experiments


def _global(form: Form, n: int, mode: str, content: str, workers: int) -> tuple[bool, Optional[int]]:
    if mode == "auto":
        mode = "count" if form.rank <= 3 else "exists"
    opts = enumeration.EnumOptions(content=content, workers=workers)
    if mode == "count":
        c = enumeration.count_solutions(form, n, opts)
        return c > 0, c
    return enumeration.has_solution(form, n, opts), None


def run_local_global_scan(cfg: ExperimentConfig) -> list[dict]:
    form = load_form(cfg.form)
    forms.require_definite(form)
    rows = []
    t0 = time.perf_counter()
    for n in cfg.levels():
        if cfg.time_budget is not None and time.perf_counter() - t0 > cfg.time_budget:
            rows.append({"n": n, "local": "unknown", "global_nonempty": None,
                         "global_count": None, "agree": None, "status": "time budget"})
            continue
        prof = local.local_profile(form, n, cfg.local_budget, cfg.content)
        nonempty, count = _global(form, n, cfg.global_mode, cfg.content, cfg.workers)
        member = prof.member
        if member == "unknown":
            agree, status = None, "unknown"
        elif (member == "yes") == nonempty:
            agree, status = True, "agree"
        elif member == "yes":
            agree, status = False, "small-n exception"
        else:
            # global solutions are local solutions, so this is a bug
            agree, status = False, "soundness violation"
        rows.append({"n": n, "local": member, "global_nonempty": nonempty,
                     "global_count": count, "agree": agree, "status": status,
                     "verdicts": {str(p): v.outcome for p, v in sorted(prof.verdicts.items())}})
    return rows


def _scan_summary(rows: list[dict]) -> dict:
    return {"summary": True, "rows": len(rows),
            "agree": sum(1 for r in rows if r["agree"] is True),
            "exceptions": [r["n"] for r in rows if r["status"] == "small-n exception"],
            "violations": [r["n"] for r in rows if r["status"] == "soundness violation"],
            "unknown": [r["n"] for r in rows if r["agree"] is None]}


def solution_array(form: Form, n: int, workers: int = 1) -> np.ndarray:
    """Gamma_n as numerators; the quaternion route for Id_3 and odd n."""
    if form == forms.identity_form(3) and n % 2 == 1:
        return so3.rotation_array(n)
    sols = enumeration.solve_scaled_isometry(form, n, enumeration.EnumOptions(workers=workers))
    if not sols.solutions:
        return np.zeros((0, form.rank, form.rank))
    return equidist._as_numerator_array(sols.solutions, form.hermitian)


def run_equidist_sweep(cfg: ExperimentConfig, full: bool = False) -> list[dict]:
    form = load_form(cfg.form)
    kind = "unitary" if form.hermitian else "orthogonal"
    ref = equidist.haar_sample(form.rank, cfg.haar_samples, _seed_sequence(cfg.seed, 0), kind)
    records = []
    for n in cfg.levels():
        arr = solution_array(form, n, cfg.workers)
        rec: dict = {"n": n, "count": int(len(arr)), "nonempty": bool(len(arr))}
        if len(arr):
            sample = equidist.embed_solutions(form, arr, n)
            rep = equidist.weyl_discrepancy(sample, ref, cfg.degree)
            rec["residual"] = sample.residual
            rec["sup_gap"] = rep.sup_gap()
            rec["sup_gap_by_degree"] = {str(d): rep.sup_gap(d) for d in range(1, cfg.degree + 1)}
            rec["reference_samples"] = cfg.haar_samples
            rec["reference_max_std_error"] = rep.max_std_error()
            if form.rank == 3 and kind == "orthogonal":
                caps = equidist.cap_discrepancy(sample, (1.0, 0.0, 0.0), cfg.cap_angles)
                rec["cap_sup_gap"] = caps.sup_gap()
                if full:
                    rec["caps"] = [e.to_json() for e in caps.entries]
            if full:
                rec["entries"] = [e.to_json() for e in rep.entries]
        records.append(rec)
    return records


def _sweep_summary(records: list[dict]) -> dict:
    gaps = [r["sup_gap"] for r in records if r["nonempty"]]
    return {"summary": True, "levels": [r["n"] for r in records],
            "empty": [r["n"] for r in records if not r["nonempty"]],
            "non_increasing": all(b <= a for a, b in zip(gaps, gaps[1:]))}


def run_genus_compare(cfg: ExperimentConfig) -> tuple[dict, list[dict]]:
    if cfg.form2 is None:
        raise InputError("genus comparison needs a second form")
    f1, f2 = load_form(cfg.form), load_form(cfg.form2)
    if f1.rank != f2.rank:
        raise InputError("forms must have the same rank")
    verdict = forms.genus_equivalent(f1, f2, cfg.max_e, cfg.local_budget)
    rows = []
    for n in cfg.levels():
        _, c1 = _global(f1, n, "count", cfg.content, cfg.workers)
        _, c2 = _global(f2, n, "count", cfg.content, cfg.workers)
        rows.append({"n": n, "count_q": c1, "count_q2": c2,
                     "genus_exception": (c1 > 0) != (c2 > 0)})
    return verdict.to_json(), rows


# ------------------------------------------------------------ output


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _open_out(path: Optional[str]):
    return open(path, "w", newline="") if path else None


def write_records(records: Iterable[dict], fmt: str, out: Optional[str]) -> None:
    records = list(records)
    fh = _open_out(out)
    stream = fh or sys.stdout
    try:
        if fmt == "json":
            for r in records:
                stream.write(_dump(r) + "\n")
        else:
            plain = [r for r in records if not r.get("summary")]
            keys: list[str] = []
            for r in plain:
                keys.extend(k for k in r if k not in keys)
            w = csv.DictWriter(stream, fieldnames=keys, lineterminator="\n")
            w.writeheader()
            for r in plain:
                w.writerow({k: (_dump(v) if isinstance(v, (dict, list)) else v)
                            for k, v in r.items()})
    finally:
        if fh:
            fh.close()


# ------------------------------------------------------------ subcommands


def _cmd_enumerate(args) -> int:
    form = load_form(args.form)
    opts = enumeration.EnumOptions(count_only=args.count_only, special=not args.full_group,
                                   content=args.content, workers=args.workers)
    s = enumeration.solve_scaled_isometry(form, args.n, opts)
    if args.format == "csv":
        fh = _open_out(args.out)
        stream = fh or sys.stdout
        w = csv.writer(stream, lineterminator="\n")
        for m in s.solutions:
            w.writerow([_dump(x) if isinstance(x, list) else x
                        for row in arith.matrix_to_json(m) for x in row] + [args.n])
        if fh:
            fh.close()
    else:
        data = s.to_json()
        data["timestamps"] = {"seconds": data["stats"].pop("seconds")}
        write_records([data], "json", args.out)
    return EXIT_OK


def _cmd_local_check(args) -> int:
    form = load_form(args.form)
    if args.p is not None:
        v = local.local_solvable(form, args.n, args.p, args.budget, args.content, args.max_e)
        data, status = v.to_json(), v.outcome
    else:
        prof = local.local_profile(form, args.n, args.budget, args.content)
        data, status = prof.to_json(), prof.member
    write_records([data], "json", args.out)
    return EXIT_PARTIAL if status == "unknown" else EXIT_OK


def _cmd_quat_gen(args) -> int:
    if args.raw_quaternions:
        rows = [list(map(int, q)) for q in so3.quaternion_array(args.n)]
        header = ["a", "b", "c", "d"]
    else:
        rows = [[int(x) for x in m.ravel()] + [args.n] for m in so3.rotation_array(args.n)]
        header = [f"m{i}{j}" for i in range(1, 4) for j in range(1, 4)] + ["n"]
    if args.format == "json":
        write_records([dict(zip(header, r)) for r in rows], "json", args.out)
    else:
        fh = _open_out(args.out)
        w = csv.writer(fh or sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        if fh:
            fh.close()
    return EXIT_OK


def _cmd_equidist(args, cfg: ExperimentConfig) -> int:
    records = run_equidist_sweep(cfg, full=True)
    write_records(records + [_sweep_summary(records)], args.format, cfg.out)
    return EXIT_OK


def _cmd_scan(args, cfg: ExperimentConfig) -> int:
    rows = run_local_global_scan(cfg)
    summary = _scan_summary(rows)
    write_records(rows + [summary], args.format, cfg.out)
    if summary["violations"]:
        return EXIT_INVALID
    return EXIT_PARTIAL if summary["unknown"] else EXIT_OK


def _cmd_genus(args, cfg: ExperimentConfig) -> int:
    verdict, rows = run_genus_compare(cfg)
    summary = {"summary": True, "genus": verdict,
               "exceptions": [r["n"] for r in rows if r["genus_exception"]]}
    write_records(rows + [summary], args.format, cfg.out)
    return EXIT_PARTIAL if verdict["status"] == "undetermined" else EXIT_OK


def _cmd_coset(args) -> int:
    w = cartan.coweight(args.type, args.coweight)
    val = cartan.double_coset_size(w, args.q)
    data = {"type": args.type, "q": args.q, "coweight": args.coweight,
            "formula_value": str(val), "lengths": {
                "translation": w.length(),
                "double_coset": sorted(y.length() for y in cartan.double_coset(w))}}
    status = EXIT_OK
    if args.oracle:
        group = "SL2" if args.type == "A1" else "SL3"
        try:
            data["oracle_value"] = cartan.direct_coset_count(args.q, args.coweight, group)
            data["agree"] = data["oracle_value"] == val
        except cartan.OracleBudgetExceeded as exc:
            data["oracle_partial"] = exc.partial
            status = EXIT_PARTIAL
    write_records([data], "json", args.out)
    return status


# ------------------------------------------------------------ parser


def _config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.loads(Path(args.config).read_text()) if args.config else ExperimentConfig()
    for name in ("form", "form2", "n_min", "n_max", "filter", "max_e", "seed", "degree",
                 "haar_samples", "workers", "out", "content", "global_mode", "time_budget"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "n", None):
        cfg.n_list = list(args.n)
    budget = getattr(args, "budget", None)
    if budget is not None:
        cfg.local_budget = budget
    cfg.validate()
    if args.dump_config:
        Path(args.dump_config).write_text(cfg.dumps() + "\n")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="denomkit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    workers = enumeration.default_workers()

    def common(p, fmt="json"):
        p.add_argument("--format", choices=("json", "csv"), default=fmt)
        p.add_argument("--out")

    p = sub.add_parser("enumerate", help="all solutions at level n")
    p.add_argument("--form", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--full-group", action="store_true", help="admit det = -n^k as well")
    p.add_argument("--content", choices=("rational", "gaussian"), default="rational")
    p.add_argument("--workers", type=int, default=workers)
    common(p)

    p = sub.add_parser("local-check", help="p-adic solvability")
    p.add_argument("--form", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int)
    p.add_argument("--max-e", type=int)
    p.add_argument("--budget", type=int, default=200_000)
    p.add_argument("--content", choices=("rational", "gaussian"), default="rational")
    common(p)

    p = sub.add_parser("quat-gen", help="rotations of odd denominator n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--raw-quaternions", action="store_true")
    common(p, "csv")

    def experiment(p, two_forms=False):
        p.add_argument("--config")
        p.add_argument("--dump-config")
        p.add_argument("--form")
        if two_forms:
            p.add_argument("--form2")
        p.add_argument("--n", type=int, nargs="+")
        p.add_argument("--n-min", type=int)
        p.add_argument("--n-max", type=int)
        p.add_argument("--filter")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--content", choices=("rational", "gaussian"))
        common(p)

    p = sub.add_parser("equidist", help="discrepancy against Haar measure")
    experiment(p)
    p.add_argument("--degree", type=int)
    p.add_argument("--haar-samples", type=int)

    p = sub.add_parser("scan", help="local-global comparison over a range of n")
    experiment(p)
    p.add_argument("--budget", type=int)
    p.add_argument("--max-e", type=int)
    p.add_argument("--global-mode", choices=("count", "exists", "auto"))
    p.add_argument("--time-budget", type=float)

    p = sub.add_parser("genus-compare", help="genus verdict and shared denominators")
    experiment(p, two_forms=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--max-e", type=int)

    p = sub.add_parser("coset-volume", help="double-coset volume formula")
    p.add_argument("--type", choices=("A1", "A2"), required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--coweight", type=int, required=True)
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--out")
    return ap


_SIMPLE: dict[str, Callable] = {
    "enumerate": _cmd_enumerate,
    "local-check": _cmd_local_check,
    "quat-gen": _cmd_quat_gen,
    "coset-volume": _cmd_coset,
}
_EXPERIMENTS: dict[str, Callable] = {
    "equidist": _cmd_equidist,
    "scan": _cmd_scan,
    "genus-compare": _cmd_genus,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        if args.command in _SIMPLE:
            return _SIMPLE[args.command](args)
        return _EXPERIMENTS[args.command](args, _config_from_args(args))
    except (InputError, forms.FormError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
