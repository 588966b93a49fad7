"""The ``instsm`` command line.

Exit codes: 0 success (refines, conforms, deterministic), 1 property
violation or counterexample, 2 usage, parse or elaboration errors.
"""
from __future__ import annotations

import argparse
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor

from ._util import canonical, dumps, env_cap, jsonable
from .actions import (
    ActionMorphism,
    amalgamate,
    check_amalgamation,
    interleave_actions,
    is_deterministic,
    parse_instance,
    pushout_action_sigs,
)
from .errors import AmalgamationError, DSLError, InstsmError
from .frontend import load, parse_file
from .frontend.ast import MorphismBlock
from .machines import (
    EMPTY_POOL,
    CanonicalMachine,
    Configuration,
    EventInstance,
    EventPool,
    ExplorationBounds,
    PSMSentence,
    materialize,
    psm_check,
    sm_sat,
)
from .products import ProductMachine, det_delta, det_semantic, det_syntactic, interleave_sentences
from .refinement import Theory, refine_check

OK, FAIL, ERROR = 0, 1, 2


class UsageError(InstsmError):
    pass


# ------------------------------------------------------------------ helpers


def _bounds(args) -> ExplorationBounds:
    cap = args.cap if args.cap is not None else env_cap()
    return ExplorationBounds(pool=args.pool, depth=args.depth, cap=cap)


def _machines(elab, name, kinds=("machine", "product")):
    if name:
        art = elab.machine(name)
        if art.kind not in kinds:
            raise UsageError(f"{name} is a {art.kind}, expected one of {', '.join(kinds)}")
        return [art]
    return [elab.machines[n] for n in sorted(elab.machines) if elab.machines[n].kind in kinds]


def _canonical_machine(art):
    if art.kind == "protocol":
        raise UsageError(f"{art.name} is a protocol and has no canonical model")
    return CanonicalMachine(art.omega, art.sentence, art.gamma)


def _pmap(fn, items, jobs: int):
    """Ordered map; with ``jobs > 1`` the work runs in worker processes."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _declared(path, kind):
    model = parse_file(path)
    return [d for d in model.declarations if isinstance(d, kind)]


# ----------------------------------------------------------------- commands


def _check_item(job):
    path, maps, name = job
    art = load(path, maps).machines[name]
    return {"name": name, "kind": art.kind, "actions": art.h.to_json(), "signature": art.sig.to_json(),
            "components": list(art.components),
            "transitions": len(art.sentence.transitions)}


def cmd_check(args):
    elab = load(args.file, args.map)
    names = sorted(elab.machines)
    report = {
        "command": "check",
        "file": args.file,
        "actions": {n: elab.actions[n].sig.to_json() for n in sorted(elab.actions)},
        "machines": _pmap(_check_item, [(args.file, args.map, n) for n in names], args.jobs),
        "morphisms": sorted(elab.morphisms),
        "refines": [f"{r.abstract} by {r.concrete} via {r.theta}, {r.sigma}" for r in elab.refines],
    }
    return OK, report


def _dump_item(job):
    path, maps, name, bounds, with_omega = job
    art = load(path, maps).machines[name]
    theta = materialize(_canonical_machine(art), bounds)
    out = {"name": name, "bounds": bounds.to_json(), "theta": theta.to_json(),
           "size": {"delta": len(theta.delta), "explored": len(theta.explored)}}
    if with_omega:
        out["omega"] = art.omega.to_json()
    return out


def cmd_dump(args):
    elab = load(args.file, args.map)
    arts = _machines(elab, args.machine)
    bounds = _bounds(args)
    jobs = [(args.file, args.map, a.name, bounds, args.dump_omega) for a in arts]
    return OK, {"command": "dump", "file": args.file, "machines": _pmap(_dump_item, jobs, args.jobs)}


def _parse_stimuli(text):
    if not text:
        return []
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    if cur.strip():
        out.append(cur.strip())
    try:
        return [EventInstance(*parse_instance(s)) for s in out]
    except ValueError:
        raise UsageError(f"cannot parse stimuli {text!r}") from None


def cmd_simulate(args):
    """Seeded walk: the next stimulus enters whenever the pool is empty."""
    elab = load(args.file, args.map)
    art = _machines(elab, args.machine)[0] if args.machine else None
    if art is None:
        raise UsageError("simulate needs --machine")
    m = _canonical_machine(art)
    rng = random.Random(args.seed)
    stimuli = _parse_stimuli(args.stimuli)
    for e in stimuli:
        if art.sig.events.get(e.name) != len(e.args):
            raise UsageError(f"stimulus {e} is not an event of {art.name}")
    gamma = canonical(m.gamma())
    if not gamma:
        raise UsageError(f"{art.name} has no initial valuation")
    c = Configuration(rng.choice(gamma), EMPTY_POOL, m.initial_state())
    log = [{"initial": c.to_json()}]
    steps = 0
    while steps < args.steps:
        if c.pool.is_empty():
            if not stimuli:
                break
            e = stimuli.pop(0)
            c = Configuration(c.omega, EventPool((), (e,)), c.state)
            log.append({"stimulus": str(e)})
            continue
        succ = canonical(m.steps(c, args.pool))
        if not succ:
            log.append({"stuck": c.to_json()})
            break
        d = rng.choice(succ)
        log.append({"step": steps + 1, "alternatives": len(succ), **d.to_json()})
        c = d.target
        steps += 1
    return OK, {"command": "simulate", "machine": art.name, "seed": args.seed, "log": log,
                "final": c.to_json()}


def cmd_product(args):
    elab = load(args.file, args.map)
    left, right = elab.machine(args.left), elab.machine(args.right)
    bounds = _bounds(args)
    pm = ProductMachine(_canonical_machine(left), _canonical_machine(right))
    theta = materialize(pm, bounds)
    phi = interleave_sentences(left.sentence, right.sentence)
    omega = interleave_actions(left.omega, right.omega)
    ok = sm_sat(omega, theta, phi)
    report = {"command": "product", "left": left.name, "right": right.name, "bounds": bounds.to_json(),
              "signature": pm.sig.to_json(), "size": {"delta": len(theta.delta), "explored": len(theta.explored)},
              "satisfies_syntactic_product": ok}
    if args.dump:
        report["theta"] = theta.to_json()
    return (OK if ok else FAIL), report


def _det_item(job):
    path, maps, name, mode, bounds = job
    art = load(path, maps).machines[name]
    if mode == "syntactic":
        v = det_syntactic(art.sentence)
    elif mode == "semantic":
        v = det_semantic(art.sentence, art.h.domain, bounds.cap)
    elif mode == "omega":
        v = is_deterministic(art.omega)
    else:
        v = det_delta(materialize(_canonical_machine(art), bounds))
    return {"name": name, "mode": mode, "deterministic": v.holds, "verdict": jsonable(v)}


def cmd_det(args):
    elab = load(args.file, args.map)
    kinds = ("machine", "product", "protocol") if args.mode == "syntactic" else ("machine", "product")
    arts = _machines(elab, args.machine, kinds)
    bounds = _bounds(args)
    items = _pmap(_det_item, [(args.file, args.map, a.name, args.mode, bounds) for a in arts], args.jobs)
    ok = all(i["deterministic"] for i in items)
    return (OK if ok else FAIL), {"command": "det", "mode": args.mode, "machines": items}


def cmd_psm(args):
    elab = load(args.file, args.map)
    proto = elab.machine(args.protocol)
    if not isinstance(proto.sentence, PSMSentence):
        raise UsageError(f"{args.protocol} is not a protocol")
    art = elab.machine(args.machine)
    bounds = _bounds(args)
    theta = materialize(_canonical_machine(art), bounds)
    v = psm_check(theta, proto.sentence)
    return (OK if v.ok else FAIL), {"command": "psm", "protocol": proto.name, "machine": art.name,
                                    "bounds": bounds.to_json(), **v.to_json()}


def _single(path, kind, what):
    found = _declared(path, kind)
    if len(found) != 1:
        raise UsageError(f"{path} must declare exactly one {what}, found {len(found)}")
    return found[0]


def cmd_refine(args):
    """``refine --abstract A --concrete C --theta T --sigma S``."""
    for flag in ("abstract", "concrete", "theta", "sigma"):
        if not getattr(args, flag):
            raise UsageError(f"refine needs --{flag}")
    theta_b = _single(args.theta, MorphismBlock, "morphism")
    sigma_b = _single(args.sigma, MorphismBlock, "morphism")
    abstract_name = args.abstract_name or theta_b.source
    concrete_name = args.concrete_name or sigma_b.source
    extra = [p for p in (args.abstract, args.theta, args.sigma) if os.path.abspath(p) != os.path.abspath(args.concrete)]
    seen, files = set(), []
    for p in extra:
        if os.path.abspath(p) not in seen:
            seen.add(os.path.abspath(p))
            files.append(p)
    elab = load(args.concrete, files)
    t1 = Theory.of(elab.machine(abstract_name))
    t2 = Theory.of(elab.machine(concrete_name))
    bounds = _bounds(args)
    v = refine_check(t1, elab.morphisms[theta_b.name], elab.morphisms[sigma_b.name], t2, bounds)
    report = {"command": "refine", "abstract": abstract_name, "concrete": concrete_name,
              "theta": theta_b.name, "sigma": sigma_b.name, **v.to_json()}
    return (OK if v.refines else FAIL), report


def cmd_amalgamate(args):
    """Amalgamate two action blocks over their common part."""
    elab = load(args.file, args.map)
    try:
        a1, a2 = elab.actions[args.left], elab.actions[args.right]
    except KeyError as exc:
        raise UsageError(f"no actions block named {exc.args[0]}") from None
    apex = a1.sig.intersection(a2.sig)
    span = (ActionMorphism.inclusion(apex, a1.sig), ActionMorphism.inclusion(apex, a2.sig))
    hr, t1, t2 = pushout_action_sigs(*span)
    report = {"command": "amalgamate", "left": a1.name, "right": a2.name, "apex": apex.to_json(),
              "pushout": hr.to_json()}
    try:
        omega = amalgamate(t1, t2, a1.omega, a2.omega, span=span, cap=args.cap)
    except AmalgamationError as exc:
        report.update(result="rejected", detail=str(exc))
        return FAIL, report
    r1, r2 = check_amalgamation(t1, t2, a1.omega, a2.omega, omega)
    report.update(result="amalgamated" if r1 and r2 else "reduct mismatch",
                  reducts_equal={"left": r1, "right": r2}, size=len(omega))
    if args.dump_omega:
        report["omega"] = omega.to_json()
    return (OK if r1 and r2 else FAIL), report


# ------------------------------------------------------------------- output


def _text(report) -> str:
    """Flat ``key: value`` rendering of a report."""
    lines = []

    def walk(prefix, v):
        if isinstance(v, dict):
            if not v:
                lines.append(f"{prefix}: {{}}")
            for k in sorted(v):
                walk(f"{prefix}.{k}" if prefix else str(k), v[k])
        elif isinstance(v, list) and v and any(isinstance(x, (dict, list)) for x in v):
            for i, x in enumerate(v):
                walk(f"{prefix}[{i}]", x)
        elif isinstance(v, list):
            lines.append(f"{prefix}: {', '.join(str(x) for x in v)}")
        else:
            lines.append(f"{prefix}: {v}")

    walk("", jsonable(report))
    return "\n".join(lines) + "\n"


COMMANDS = {
    "check": cmd_check, "dump": cmd_dump, "simulate": cmd_simulate, "product": cmd_product,
    "det": cmd_det, "psm": cmd_psm, "refine": cmd_refine, "amalgamate": cmd_amalgamate,
}


def _positive(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--depth", type=_positive, default=12, help="exploration depth bound")
    common.add_argument("--pool", type=_positive, default=3, help="event pool bound")
    common.add_argument("--cap", type=_positive, default=None, help="enumeration ceiling (default INSTSM_CAP)")
    common.add_argument("--jobs", type=_positive, default=1, help="worker processes")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--map", action="append", default=[], help="extra .sm/.map file (repeatable)")

    p = argparse.ArgumentParser(prog="instsm", description="State machine institutions toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("check", parents=[common], help="parse and elaborate a file")
    s.add_argument("file")
    s = sub.add_parser("dump", parents=[common], help="materialize canonical models")
    s.add_argument("file")
    s.add_argument("--machine")
    s.add_argument("--dump-omega", action="store_true")
    s = sub.add_parser("simulate", parents=[common], help="seeded walk of a machine")
    s.add_argument("file")
    s.add_argument("--machine")
    s.add_argument("--steps", type=_positive, default=20)
    s.add_argument("--stimuli", default="")
    s = sub.add_parser("product", parents=[common], help="interleaving product of two machines")
    s.add_argument("file")
    s.add_argument("left")
    s.add_argument("right")
    s.add_argument("--dump", action="store_true")
    s = sub.add_parser("det", parents=[common], help="determinism checks")
    s.add_argument("file")
    s.add_argument("--machine")
    s.add_argument("--mode", choices=("syntactic", "semantic", "omega", "delta"), default="delta")
    s = sub.add_parser("psm", parents=[common], help="monitor a machine against a protocol")
    s.add_argument("file")
    s.add_argument("--protocol", required=True)
    s.add_argument("--machine", required=True)
    s = sub.add_parser("refine", parents=[common], help="bounded refinement check")
    s.add_argument("--abstract")
    s.add_argument("--concrete")
    s.add_argument("--theta")
    s.add_argument("--sigma")
    s.add_argument("--abstract-name")
    s.add_argument("--concrete-name")
    s = sub.add_parser("amalgamate", parents=[common], help="amalgamate two action blocks")
    s.add_argument("file")
    s.add_argument("left")
    s.add_argument("right")
    s.add_argument("--dump-omega", action="store_true")
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return ERROR if exc.code else OK
    try:
        code, report = COMMANDS[args.command](args)
    except DSLError as exc:
        for d in exc.diagnostics:
            print(d, file=stderr)
        if args.format == "json":
            _emit(args, dumps({"command": args.command, "diagnostics": exc.diagnostics}) + "\n", stdout)
        return ERROR
    except (InstsmError, OSError) as exc:
        print(f"instsm {args.command}: {exc}", file=stderr)
        return ERROR
    _emit(args, dumps(report) + "\n" if args.format == "json" else _text(report), stdout)
    return code


def _emit(args, text, stdout):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def main() -> None:
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the final flush
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 0
    sys.exit(code)


if __name__ == "__main__":
    main()
