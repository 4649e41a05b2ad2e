"""``cp-wald`` command line.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 when
``--exit-on-reject`` is set and the scan rejects at ``--alpha``.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import io as cio

log = logging.getLogger("cpwald")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_REJECT = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    if text is None or str(text).strip() == "":
        return ()
    return tuple(float(v) for v in str(text).replace(",", " ").split())


def _add_model(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=("farima", "ar"), default="farima")
    g.add_argument("--p", type=int, default=None, help="AR order (default 0 for farima, 1 for ar)")
    g.add_argument("--q", type=int, default=0, help="MA order (farima only)")
    g.add_argument("--d-lower", type=float, default=0.01)
    g.add_argument("--d-upper", type=float, default=0.49)
    g.add_argument("--demean", action="store_true", help="subtract the sample mean first")


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="one-column numeric file")
    p.add_argument("--output", default="-", help="destination path, '-' for stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _add_mc(p: argparse.ArgumentParser, d0_list: bool) -> None:
    p.add_argument("--n", type=int, required=False)
    if d0_list:
        p.add_argument("--d0", type=_floats, default=(0.1, 0.2, 0.3, 0.4))
        p.add_argument("--alt-d", type=_floats, default=(0.2, 0.3, 0.4))
        p.add_argument("--taus", type=_floats, default=(0.5, 0.9))
        p.add_argument("--power-d0", type=float, default=0.1)
    else:
        p.add_argument("--d0", type=float, default=0.2)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--levels", type=_floats, default=(0.10, 0.05, 0.01))
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--trim", type=int, default=None)
    p.add_argument("--d-lower", type=float, default=0.01)
    p.add_argument("--d-upper", type=float, default=0.49)
    p.add_argument("--mode", choices=("restart", "continue"), default="restart")
    p.add_argument("--family", choices=("normal", "student-t"), default="normal")
    p.add_argument("--df", type=float, default=None)
    p.add_argument("--output", default="-")
    p.add_argument("--format", choices=("json", "csv"), default="csv" if d0_list else "json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cp-wald", description="Normalized Wald change-point tests.")
    ap.add_argument("--config", help="key = value file; command-line flags override it")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a FARIMA series")
    s.add_argument("--n", type=int, required=False)
    s.add_argument("--d", type=float, default=0.3)
    s.add_argument("--phi", type=_floats, default=())
    s.add_argument("--psi", type=_floats, default=())
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--cut", type=int, default=None)
    s.add_argument("--burn", type=int, default=None)
    s.add_argument("--family", choices=("normal", "student-t"), default="normal")
    s.add_argument("--df", type=float, default=None)
    s.add_argument("--output", default="-")

    f = sub.add_parser("fit", help="fit a model on a range of a series")
    _add_model(f)
    _add_input(f)
    f.add_argument("--start", type=int, default=0)
    f.add_argument("--stop", type=int, default=None)

    c = sub.add_parser("scan", help="run the change-point scan")
    _add_model(c)
    _add_input(c)
    c.add_argument("--trim", type=int, default=None)
    c.add_argument("--stride", type=int, default=1)
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--table", default=None, help="also write the per-split CSV here")
    c.add_argument("--exit-on-reject", action="store_true", help="exit 3 when the test rejects at --alpha")

    t = sub.add_parser("table1", help="size and power table by simulation")
    _add_mc(t, d0_list=True)

    nd = sub.add_parser("null-dist", help="null sample of the normalized statistic")
    _add_mc(nd, d0_list=False)

    ne = sub.add_parser("ned", help="forward/backward partial-sum checks")
    ne.add_argument("--generator", choices=("iid", "ar1-sq", "ar1-score", "farima-score"), default="ar1-sq")
    ne.add_argument("--n", type=int, default=100_000)
    ne.add_argument("--phi", type=float, default=0.8)
    ne.add_argument("--family", choices=("normal", "student-t", "centered-exp"), default="normal")
    ne.add_argument("--df", type=float, default=None)
    ne.add_argument("--seed", type=int, default=0)
    ne.add_argument("--gm-n", type=int, default=5000)
    ne.add_argument("--gm-reps", type=int, default=0)
    ne.add_argument("--mu", type=float, default=0.9)
    ne.add_argument("--paths", default=None, help="write the path table CSV here")
    ne.add_argument("--output", default="-")

    dl = sub.add_parser("doc-lint", help="check the equation map against the code")
    dl.add_argument("--map", default=None, help="equation map path (default docs/equation_map.md)")
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = cio.RunConfig.from_file(known.config)
    values = cfg.flat()
    sub = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction))
    for parser in sub.choices.values():
        dests = {a.dest: a for a in parser._actions}
        found = {}
        for k, v in values.items():
            if k in dests:
                act = dests[k]
                if act.type is not None:
                    found[k] = act.type(v)
                elif isinstance(act, argparse._StoreTrueAction):
                    found[k] = v.lower() in ("1", "true", "yes", "on")
                else:
                    found[k] = v
                if act.required:
                    act.required = False
        parser.set_defaults(**found)


def _model(args):
    from .farima import ParamSpace
    from .models import ar_model, farima_model

    if args.model == "ar":
        return ar_model(1 if args.p is None else args.p)
    p = 0 if args.p is None else args.p
    return farima_model(ParamSpace.farima(p, args.q, (args.d_lower, args.d_upper)), p, args.q)


def _series(args):
    if not args.input:
        raise UsageError("--input is required")
    y = cio.ingest(args.input)
    return y.demeaned() if args.demean else y


def _cmd_simulate(args) -> int:
    from .farima import FarimaParams, simulate_farima

    if args.n is None or args.seed is None:
        raise UsageError("simulate needs --n and --seed")
    y = simulate_farima(
        FarimaParams(args.d, args.phi, args.psi),
        args.n,
        seed=args.seed,
        family=args.family,
        df=args.df,
        cut=args.cut,
        burn=args.burn,
    )
    text = cio.to_csv(["y"], [[v] for v in y.values])
    _write(text, args.output)
    return EXIT_OK


def _write(text: str, dest: str) -> None:
    if dest in (None, "-"):
        sys.stdout.write(text)
    else:
        try:
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {dest}: {exc.strerror or exc}") from exc


def _cmd_fit(args) -> int:
    from .models import fit

    y = _series(args)
    model = _model(args)
    res = fit(model, y, args.start, args.stop)
    payload = {
        "model": model.name,
        "params": dict(zip(model.param_names, res.lambda_hat.tolist())),
        "objective": res.objective,
        "iterations": res.iterations,
        "converged": res.converged,
        "at_boundary": res.at_boundary,
        "range": list(res.sub_range),
        "input_sha256": y.provenance.get("sha256"),
    }
    cio.emit(payload, args.format, args.output)
    return EXIT_OK


def _cmd_scan(args) -> int:
    from .scan import critical_value, scan

    y = _series(args)
    res = scan(_model(args), y, trim=args.trim, stride=args.stride)
    if args.table:
        cio.emit(res, "csv", args.table)
    if args.format == "json":
        summary = res.summary()
        summary.update(
            alpha=args.alpha,
            critical_value=critical_value(args.alpha),
            reject=res.decision(args.alpha),
            input_sha256=y.provenance.get("sha256"),
        )
        cio.emit(summary, "json", args.output)
    else:
        cio.emit(res, "csv", args.output)
    if args.exit_on_reject and res.decision(args.alpha):
        return EXIT_REJECT
    return EXIT_OK


def _design_kw(args) -> dict:
    return dict(
        levels=args.levels,
        trim=args.trim,
        d_bounds=(args.d_lower, args.d_upper),
        mode=args.mode,
        family=args.family,
        df=args.df,
    )


def _cmd_table1(args) -> int:
    from .mc import table1

    if args.n is None or args.seed is None:
        raise UsageError("table1 needs --n and --seed")
    reps = table1(
        args.n,
        args.d0,
        args.reps,
        args.seed,
        alt_d=args.alt_d,
        taus=args.taus,
        power_d0=args.power_d0,
        workers=args.workers,
        **_design_kw(args),
    )
    cio.emit(reps, args.format, args.output)
    return EXIT_OK


def _cmd_null(args) -> int:
    from .mc import McDesign, null_distribution

    if args.n is None or args.seed is None:
        raise UsageError("null-dist needs --n and --seed")
    nd = null_distribution(McDesign(args.n, args.reps, args.d0, seed=args.seed, **_design_kw(args)), args.workers)
    cio.emit(nd, args.format, args.output)
    return EXIT_OK


def _cmd_ned(args) -> int:
    from .ned import NedSequenceSpec, ned_report

    spec = NedSequenceSpec(args.generator, phi=args.phi, family=args.family, df=args.df)
    rep = ned_report(spec, args.n, args.seed, gm_n=args.gm_n, gm_reps=args.gm_reps, mu=args.mu)
    if args.paths:
        rows = []
        for d, r in rep.items():
            rows += [[d, int(k), m, s] for k, m, s in zip(r.paths.k, r.paths.mean, r.paths.tail_sup)]
        _write(cio.to_csv(["direction", "k", "mean", "tail_sup"], rows), args.paths)
    payload = {
        "generator": args.generator,
        "phi": args.phi,
        "family": args.family,
        "seed": args.seed,
        "reports": {d: r.to_dict() for d, r in rep.items()},
        "note": "delta thresholds are calibration choices; the theory asserts only delta > 0",
    }
    cio.emit(payload, "json", args.output)
    return EXIT_OK


def _cmd_doclint(args) -> int:
    from .doclint import doc_lint

    rep = doc_lint(args.map)
    for line in rep.lines():
        print(line)
    return EXIT_OK if rep.ok else EXIT_FAIL


COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "scan": _cmd_scan,
    "table1": _cmd_table1,
    "null-dist": _cmd_null,
    "ned": _cmd_ned,
    "doc-lint": _cmd_doclint,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        _apply_config(ap, argv)
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except (cio.ConfigError, OSError, ValueError) as exc:
        print(f"cp-wald: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cp-wald {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"cp-wald {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
