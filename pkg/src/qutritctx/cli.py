"""Command-line front end: ``qutritctx certify|quantum|convert|simulate|robustness``.

Exit codes: 0 success, 1 usage or input error, 2 certified bound differs from
the claimed bound, 3 numerical validity failure (e.g. an invalid state).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from importlib import resources

import numpy as np

from . import bell, photonics, qmath
from .inequality import (
    InequalityExpression,
    classical_bound,
    kappa_expression,
    quantum_value,
    robustness,
    yu_oh_expression,
)
from .rays import build_catalog, build_graph
from .sequential import luders_joint, sequential_expectation

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_NUMERIC = 0, 1, 2, 3

BUILTINS = ("kappa", "kappa-prime", "bell", "yu-oh")


class UsageError(Exception):
    pass


class NumericError(Exception):
    pass


def load_schema(name: str) -> dict:
    text = resources.files("qutritctx").joinpath("schemas", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def resolve_expression(spec: str) -> InequalityExpression:
    """Built-in name or path to an expression JSON file."""
    catalog = build_catalog()
    graph = build_graph(catalog)
    if spec == "kappa":
        return kappa_expression(graph)
    if spec == "kappa-prime":
        return bell.split_expression(kappa_expression(graph), bell.default_split())
    if spec == "bell":
        step1 = bell.split_expression(kappa_expression(graph), bell.default_split())
        return bell.symmetrize(step1, catalog, certify=False).with_bound(15)
    if spec == "yu-oh":
        return yu_oh_expression(graph)
    if not os.path.exists(spec):
        raise UsageError(f"unknown expression {spec!r}: not one of {', '.join(BUILTINS)} and not a file")
    try:
        with open(spec, encoding="utf-8") as fh:
            return InequalityExpression.from_json(json.load(fh))
    except json.JSONDecodeError as e:
        raise UsageError(f"{spec}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"{spec}: malformed expression: {e}") from e


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.strip("[]").split(",")]
    except ValueError as e:
        raise UsageError(f"bad number list {text!r}") from e


def parse_state(spec: str, dim: int) -> tuple[np.ndarray, str]:
    """State spec: maximally-mixed | pure:re0,re1,re2,im0,im1,im2 | ray:K | entangled | noisy:V | file:PATH."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "maximally-mixed":
            rho = qmath.maximally_mixed(dim)
        elif kind == "pure":
            x = _floats(arg)
            if len(x) != 2 * dim:
                raise UsageError(f"pure state needs {2 * dim} numbers (real parts then imaginary parts)")
            v = np.array(x[:dim]) + 1j * np.array(x[dim:])
            if not qmath.is_normalized(v, 1e-9):
                raise NumericError("pure state vector is not normalized")
            rho = np.outer(v, v.conj())
        elif kind == "ray":
            if dim != 3:
                raise UsageError("ray states are qutrit states")
            rho = qmath.projector(build_catalog().ray(int(arg)))
        elif kind == "entangled":
            rho = bell.entangled_state()
        elif kind == "noisy":
            rho = bell.noisy_state(float(arg))
        elif kind == "file":
            with open(arg, encoding="utf-8") as fh:
                doc = json.load(fh)
            rho = np.array(doc["re"], dtype=float) + 1j * np.array(doc.get("im", np.zeros_like(doc["re"])), dtype=float)
        else:
            raise UsageError(f"unknown state spec {spec!r}")
    except (ValueError, IndexError) as e:
        if isinstance(e, ValueError) and kind == "noisy":
            raise NumericError(str(e)) from e
        raise UsageError(str(e)) from e
    if rho.shape != (dim, dim):
        raise UsageError(f"state has dimension {rho.shape[0]}, expression needs {dim}")
    try:
        qmath.check_density_matrix(rho, dim)
    except ValueError as e:
        raise NumericError(str(e)) from e
    return rho, spec


def _names(expr: InequalityExpression) -> tuple[str, str]:
    if expr.name in ("beta",):
        return "beta", "beta_qm"
    if expr.name == "kappa":
        return "kappa", "kappa_qm"
    return expr.name or "value", f"{expr.name or 'value'}_qm"


def rational_guess(x: float, tol: float = 1e-9, max_den: int = 1000) -> Fraction | None:
    f = Fraction(x).limit_denominator(max_den)
    return f if abs(float(f) - x) <= tol else None


def _frac_str(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_certify(args) -> tuple[dict, int]:
    expr = resolve_expression(args.expr)
    cert = classical_bound(expr, jobs=args.jobs)
    report = {"expression": expr.name, "claimed_bound": _frac_json(expr.claimed_bound), **cert.to_json()}
    report["certified"] = cert.bound == expr.claimed_bound
    label = _names(expr)[0]
    report["text"] = {f"{label}_bound": _frac_str(cert.bound)}
    return report, EXIT_OK if report["certified"] else EXIT_MISMATCH


def _frac_json(f: Fraction) -> dict:
    return {"num": f.numerator, "den": f.denominator}


def _evaluate(expr: InequalityExpression, state_spec: str) -> tuple[float, str]:
    catalog = build_catalog()
    if expr.is_single_system:
        rho, _ = parse_state(state_spec, 3)
        return quantum_value(expr, catalog, rho), "single-system"
    if expr.same_system_pairs:
        raise UsageError("expression mixes parties with sequential pairs; it has no quantum evaluator")
    rho, _ = parse_state(state_spec, 9)
    return bell.quantum_value_bipartite(expr, catalog, rho), "bipartite"


def _robustness_fields(expr: InequalityExpression, value: float) -> dict:
    out = {"robustness": None, "robustness_rational": None}
    if value > float(expr.claimed_bound) + 1e-12:
        exact = rational_guess(value)
        out["robustness"] = robustness(expr, value)
        if exact is not None and exact > expr.claimed_bound:
            out["robustness_rational"] = _frac_str(robustness(expr, exact))
    return out


def cmd_quantum(args) -> tuple[dict, int]:
    expr = resolve_expression(args.expr)
    default = "entangled" if not expr.is_single_system else "maximally-mixed"
    state = args.state or default
    value, mode = _evaluate(expr, state)
    exact = rational_guess(value)
    report = {
        "expression": expr.name,
        "mode": mode,
        "state": state,
        "value": value,
        "value_rational": _frac_str(exact) if exact is not None else None,
        "bound": float(expr.claimed_bound),
        "gap": value - float(expr.claimed_bound),
        "violates": value > float(expr.claimed_bound) + 1e-12,
        **_robustness_fields(expr, value),
    }
    _, qm = _names(expr)
    report["text"] = {qm: report["value_rational"] or value, "robustness": report["robustness_rational"] or report["robustness"]}
    return report, EXIT_OK


def cmd_robustness(args) -> tuple[dict, int]:
    expr = resolve_expression(args.expr)
    if args.quantum is not None:
        try:
            q = Fraction(args.quantum)
        except ValueError as e:
            raise UsageError(f"bad quantum value {args.quantum!r}") from e
        qf = float(q)
    else:
        qf, _ = _evaluate(expr, args.state or ("maximally-mixed" if expr.is_single_system else "entangled"))
        q = rational_guess(qf)
    if qf <= float(expr.claimed_bound):
        raise NumericError(f"quantum value {qf} does not violate the bound {float(expr.claimed_bound)}")
    report = {
        "expression": expr.name,
        "quantum": qf,
        "bound": float(expr.claimed_bound),
        "total_weight": _frac_str(expr.total_weight()),
        "robustness": robustness(expr, qf),
        "robustness_rational": _frac_str(robustness(expr, q)) if q is not None else None,
    }
    report["text"] = {"robustness": report["robustness_rational"] or report["robustness"]}
    return report, EXIT_OK


def _frac_from_json(d: dict) -> Fraction:
    return Fraction(d["num"], d["den"])


def cmd_convert(args) -> tuple[dict, int]:
    report = bell.convert(build_catalog(), jobs=args.jobs)
    step1 = _frac_from_json(report["step1_bound"]["bound"])
    step2 = _frac_from_json(report["lhv_bound"]["bound"])
    qm = rational_guess(report["quantum_value"])
    report["text"] = {
        "kappa_prime_bound": _frac_str(step1),
        "beta": _frac_str(step2),
        "beta_qm": _frac_str(qm) if qm is not None else report["quantum_value"],
        "visibility_threshold": report["visibility_threshold"],
    }
    return report, EXIT_OK if (step1, step2) == (9, 15) else EXIT_MISMATCH


def _load_descriptor(path: str) -> dict:
    import jsonschema

    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise UsageError(str(e)) from e
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    try:
        jsonschema.validate(doc, load_schema("descriptor"))
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise UsageError(f"{path}: field {where}: {e.message}") from e
    return doc


def _qutrit_source(state) -> tuple[photonics.QutritSource, str]:
    if state is None or state == "maximally-mixed":
        return photonics.QutritSource.from_density_matrix(qmath.maximally_mixed()), "maximally-mixed"
    if isinstance(state, str) and state.startswith("ray:"):
        return photonics.QutritSource.pure(build_catalog().ray(int(state[4:]))), state
    v = np.array(state["re"], dtype=float) + 1j * np.array(state.get("im", [0, 0, 0]), dtype=float)
    if not qmath.is_normalized(v, 1e-9):
        raise NumericError("descriptor state is not normalized")
    return photonics.QutritSource.pure(v), "pure"


def run_descriptor(doc: dict, jobs: int = 1) -> dict:
    """Run a simulation descriptor and return the (deterministic) report."""
    catalog = build_catalog()
    graph = build_graph(catalog)
    noise = photonics.NoiseModel.from_json(doc.get("noise"))
    shots, seed = int(doc["shots"]), int(doc.get("seed", 0))
    kind = doc["experiment"]
    report: dict = {"experiment": kind, "shots": shots, "seed": seed, "noise": noise.to_json()}

    if kind == "single_pair":
        source, state = _qutrit_source(doc.get("state"))
        report["state"] = state
        rows = []
        rho = source.density_matrix(noise)
        for k, (i, j) in enumerate(doc.get("terms", [])):
            app = photonics.Cascade(photonics.build_device(catalog, i), photonics.build_device(catalog, j))
            table = photonics.run_shots(source, app, shots, noise, seed, stream=k, jobs=jobs)
            m, se = photonics.term_estimate(table)
            rows.append({"term": f"A{i}A{j}", "weight": 1.0, "estimate": m, "stderr": se, "shots": shots,
                         "detected": table.shots_detected, "counts": table.counts,
                         "exact": sequential_expectation(luders_joint(rho, catalog, i, j))})
        if not rows:
            raise UsageError("single_pair descriptor needs a non-empty terms list of [i, j] pairs")
        report["terms"] = rows
        return report

    if kind == "kappa":
        expr = kappa_expression(graph)
        source, state = _qutrit_source(doc.get("state"))
        report["state"] = state
        exact = quantum_value(expr, catalog, source.density_matrix(noise))
        names = ("kappa_hat", "kappa_qm")
    else:
        step1 = bell.split_expression(kappa_expression(graph), bell.default_split())
        expr = bell.symmetrize(step1, catalog, certify=False).with_bound(15)
        source = photonics.two_photon_source(1.0)
        report["state"] = f"noisy:{noise.source_visibility}"
        exact = bell.quantum_value_bipartite(expr, catalog, source.density_matrix(noise))
        names = ("beta_hat", "beta_qm")

    wanted = doc.get("terms")
    if wanted:
        known = {photonics.term_label(t) for t in (*expr.singles, *expr.pairs)}
        bad = [t for t in wanted if t not in known]
        if bad:
            raise UsageError(f"field terms: unknown term labels {bad}")
    counts = photonics.run_experiment(expr, catalog, source, shots, noise, seed, jobs=jobs)
    rows = photonics.per_term_rows(expr, counts)
    for r in rows:
        r["counts"] = counts[r["term"]].counts
    value, stderr = photonics.estimate_expression(expr, counts)
    bound = float(expr.claimed_bound)
    report["terms"] = rows if not wanted else [r for r in rows if r["term"] in wanted]
    report["estimate"] = {
        "value": value,
        "stderr": stderr,
        "exact": exact,
        "bound": bound,
        "sigma_above_bound": (value - bound) / stderr if stderr > 0 else None,
    }
    report["text"] = {names[0]: value, "stderr": stderr, names[1]: exact}
    return report


def cmd_simulate(args) -> tuple[dict, int]:
    doc = _load_descriptor(args.descriptor)
    if args.shots is not None:
        doc["shots"] = args.shots
    if args.seed is not None:
        doc["seed"] = args.seed
    noise = dict(doc.get("noise") or {})
    for key, val in (("eta", args.noise_eta), ("phase_sigma", args.noise_phase_sigma),
                     ("bs_sigma", args.noise_bs_sigma), ("visibility", args.noise_visibility)):
        if val is not None:
            noise[key] = val
    doc["noise"] = noise
    try:
        report = run_descriptor(doc, jobs=args.jobs)
    except KeyError as e:
        raise UsageError(f"descriptor missing field {e}") from e
    return report, EXIT_OK


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        body = {k: v for k, v in report.items() if k != "text"}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"
    if fmt == "text":
        lines = [f"{k}: {v}" for k, v in report.get("text", {}).items()]
        return "\n".join(lines) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if "terms" in report:
        writer.writerow(["term", "estimate", "stderr", "shots"])
        for r in report["terms"]:
            writer.writerow([r["term"], repr(r["estimate"]), repr(r["stderr"]), r["shots"]])
    else:
        writer.writerow(["quantity", "value"])
        for k, v in report.get("text", {}).items():
            writer.writerow([k, v])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    common.add_argument("--out", metavar="FILE", help="write the report to FILE instead of stdout")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes for enumeration and shot batches")

    p = argparse.ArgumentParser(prog="qutritctx", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", parents=[common], help="exhaustively certify a classical/LHV bound")
    c.add_argument("expr", help=f"built-in ({', '.join(BUILTINS)}) or expression JSON file")
    c.set_defaults(func=cmd_certify)

    q = sub.add_parser("quantum", parents=[common], help="quantum value on a state")
    q.add_argument("expr")
    q.add_argument("--state", help="maximally-mixed | pure:... | ray:K | entangled | noisy:V | file:PATH")
    q.set_defaults(func=cmd_quantum)

    r = sub.add_parser("robustness", parents=[common], help="violation divided by total weight")
    r.add_argument("expr")
    r.add_argument("--quantum", help="quantum value, e.g. 29/3 (default: evaluate on --state)")
    r.add_argument("--state")
    r.set_defaults(func=cmd_robustness)

    v = sub.add_parser("convert", parents=[common], help="noncontextual to Bell conversion report")
    v.set_defaults(func=cmd_convert)

    s = sub.add_parser("simulate", parents=[common], help="run a photonic experiment descriptor")
    s.add_argument("descriptor")
    s.add_argument("--seed", type=int)
    s.add_argument("--shots", type=int)
    s.add_argument("--noise-eta", type=float)
    s.add_argument("--noise-phase-sigma", type=float)
    s.add_argument("--noise-bs-sigma", type=float)
    s.add_argument("--noise-visibility", type=float)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        report, code = args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as e:
        print(f"numerical validity failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    text = render(report, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if code == EXIT_MISMATCH:
        print("error: certified bound differs from the claimed bound", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
