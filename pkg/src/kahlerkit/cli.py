"""Command-line front end.

    kahlerkit verify <scenario> [--seed N] [--samples N] [--tol T] [--out FILE]
    kahlerkit curvature <scenario> --point "c1,c2,..."
    kahlerkit list-builders

<scenario> is a path to a scenario JSON file or the bare name of a bundled
one.  Exit codes: 0 all checks pass, 1 at least one check failed, 2 usage or
scenario-file problem.
"""

import argparse
import sys

import numpy as np

from kahlerkit.fields import metric_jets, curvature_from_jets
from kahlerkit.scenarios import (BUILDERS, ScenarioError, bundled_names,
                                 build_case, load_scenario, render_json,
                                 run_scenario_obj)


def _cmd_verify(args):
    scn = load_scenario(args.scenario)
    if args.seed is not None:
        scn.seed = int(args.seed)
    if args.samples is not None:
        if args.samples < 1:
            raise ScenarioError("--samples must be positive")
        scn.count = int(args.samples)
    report = run_scenario_obj(scn, tol_override=args.tol)
    for rec in report["checks"]:
        line = "%s  %-26s max=%.3e  tol=%.1e  points=%d" % (
            "PASS" if rec["pass"] else "FAIL", rec["name"],
            rec["max_residual"], rec["tolerance"], rec["points_used"])
        if rec["points_excluded"]:
            line += "  excluded=%d" % rec["points_excluded"]
        if rec.get("error"):
            line += "  [" + rec["error"] + "]"
        print(line)
    text = render_json(report) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print("report written to %s" % args.out)
    else:
        print(text, end="")
    return 0 if report["all_pass"] else 1


def _cmd_curvature(args):
    scn = load_scenario(args.scenario)
    case = build_case(scn)
    try:
        point = [float(tok) for tok in args.point.replace(" ", "").split(",") if tok]
    except ValueError:
        raise ScenarioError("--point must be a comma-separated list of numbers")
    if len(point) != case.chart.dim:
        raise ScenarioError("point has %d coordinates, chart %r needs %d"
                            % (len(point), case.chart.label, case.chart.dim))
    if not case.chart.contains(point):
        raise ScenarioError("point %s lies outside the chart domain %s"
                            % (point, case.chart.domain))
    gv, gg, gh = metric_jets(case.metric.fn, point)
    Rlow, Ric, scal, _ = curvature_from_jets(gv, gg, gh)
    print("scenario: %s (%s)" % (scn.name, case.label))
    print("point:    [%s]" % ", ".join("% .10e" % c for c in point))
    print("scalar curvature: % .10e" % scal)
    print("Ricci tensor:")
    for row in Ric:
        print("  [" + "  ".join("% .10e" % v for v in row) + "]")
    print("max |Ricci|:   % .10e" % np.abs(Ric).max())
    print("max |Riemann|: % .10e" % np.abs(Rlow).max())
    return 0


def _cmd_list_builders(_args):
    for entry in BUILDERS:
        print(entry.id)
        print("  summary: %s" % entry.summary)
        print("  params:  %s" % ", ".join(
            "%s=%r" % (k, v) for k, v in entry.defaults.items()))
        print("  checks:  %s" % ", ".join(entry.check_names))
    names = bundled_names()
    if names:
        print("bundled scenarios: %s" % ", ".join(names))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="kahlerkit",
        description="build fibered Kähler charts, twists and plane products, "
                    "and verify their tensor identities over sampled points")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run a scenario's check suite")
    p_verify.add_argument("scenario", help="scenario file or bundled name")
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--samples", type=int, default=None)
    p_verify.add_argument("--tol", type=float, default=None,
                          help="override every check tolerance")
    p_verify.add_argument("--out", default=None, help="write the JSON report here")
    p_verify.set_defaults(fn=_cmd_verify)

    p_curv = sub.add_parser("curvature", help="print curvature at one point")
    p_curv.add_argument("scenario", help="scenario file or bundled name")
    p_curv.add_argument("--point", required=True, help='comma list "c1,c2,..."')
    p_curv.set_defaults(fn=_cmd_curvature)

    p_list = sub.add_parser("list-builders", help="show the builder registry")
    p_list.set_defaults(fn=_cmd_list_builders)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
