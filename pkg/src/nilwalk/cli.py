"""Command-line laboratory: validate groups, verify identities, run experiments.

Six subcommands wrap the library:

* ``list-groups``    built-in algebras and their shapes
* ``validate``       Lie axioms, group-law self-checks, oracle agreement
* ``emit-law``       exact product polynomials as JSON
* ``verify-lemmas``  symbolic product and rearrangement identity suites
* ``cramer``         characteristic-function separation verdict for a measure
* ``run``            seeded Monte Carlo experiments from a JSON config

Exit codes are a stable contract: 0 success, 1 mathematical violation,
2 usage or config error, 3 resource exhaustion.  ``NILWALK_SEED`` overrides
the config seed, and ``--threads`` changes scheduling but never results.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import math
import random
import sys
from fractions import Fraction
from pathlib import Path

from numpy.random import SeedSequence

from . import __version__
from .algebra import LieVector, dilate, validate_algebra, zero_vector
from .catalog import CatalogEntry, catalog, get_group, parse_algebra_json
from .errors import (
    ConfigError,
    MeasureError,
    NilwalkError,
    ResourceError,
    StructuralError,
)
from .grouplaw import group_law, inverse, law_from_json, law_to_json, multiply
from .matrixoracle import matrix_oracle_product
from .measures import (
    cramer_check,
    default_box_measure,
    matched_measure,
    measure_from_json,
    rademacher_measure,
)
from .montecarlo import (
    ExperimentConfig,
    FrequencyWindow,
    char_fn_estimate,
    enumeration_affordable,
    lindeberg_gap,
    llt_gap,
    moment_growth,
    random_power_map,
    sublevel_measure,
    truncation_tail_check,
    walk_functional,
)
from .rearrange import verify_action_identities
from .rng import make_generator, resolve_seed, tag_key
from .stats import loglog_fit
from .sympoly import UStatisticSpec
from .testfn import ProductTestFunction, RampIndicator, Tent, centered_bump
from .walkpoly import check_product_lemma, expand_product, jsonable

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3

CSV_COLUMNS = ("experiment_id", "group", "N", "quantity",
               "mean", "std_error", "samples", "seed")

GAP_QUANTITY = {"lindeberg": "lindeberg_gap", "llt": "llt_gap"}


def _emit(obj) -> None:
    json.dump(jsonable(obj), sys.stdout, indent=2)
    sys.stdout.write("\n")


def _fail_usage(message: str) -> int:
    print(message, file=sys.stderr)
    return EXIT_USAGE


def _entry_from_arg(name_or_path: str) -> CatalogEntry:
    """Catalog name, or a path to a custom algebra JSON (not yet validated)."""
    if name_or_path in catalog():
        return get_group(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(
            f"{name_or_path!r} is neither a known group "
            f"({', '.join(sorted(catalog()))}) nor a file")
    return parse_algebra_json(path.read_text(), name=path.stem)


# ---------------------------------------------------------------------------
# list-groups


def cmd_list_groups(args) -> int:
    rows = []
    for name, entry in sorted(catalog().items()):
        spec = entry.spec
        rows.append({
            "name": name,
            "step": spec.step,
            "dims": list(spec.dims),
            "dim": spec.total_dim,
            "homogeneous_dim": spec.homogeneous_dim,
            "matrix_oracle": entry.matrix_dim is not None,
            "description": entry.description,
        })
    _emit(rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def _random_rational(spec, rnd: random.Random) -> LieVector:
    den = rnd.randint(1, 6)
    coords = tuple(Fraction(rnd.randint(-9, 9), den)
                   for _ in range(spec.total_dim))
    return LieVector(spec, coords)


def _law_self_checks(entry: CatalogEntry, law, rnd: random.Random, *,
                     pairs: int, triples: int) -> list[dict]:
    """Identity, inverse, dilation and associativity on random rational points."""
    spec = entry.spec
    zero = zero_vector(spec)
    issues = []

    def witness(kind, **data):
        issues.append({"kind": kind,
                       **{k: [str(c) for c in v.coords] if isinstance(v, LieVector)
                          else str(v) for k, v in data.items()}})

    for _ in range(pairs):
        x = _random_rational(spec, rnd)
        y = _random_rational(spec, rnd)
        if multiply(law, x, zero).coords != x.coords \
                or multiply(law, zero, x).coords != x.coords:
            witness("identity", x=x)
        if multiply(law, x, inverse(x)).coords != zero.coords:
            witness("inverse", x=x)
        r = Fraction(rnd.randint(1, 8), rnd.randint(1, 8))
        lhs = multiply(law, dilate(spec, r, x), dilate(spec, r, y))
        rhs = dilate(spec, r, multiply(law, x, y))
        if lhs.coords != rhs.coords:
            witness("dilation", x=x, y=y, factor=r)
    for _ in range(triples):
        x, y, z = (_random_rational(spec, rnd) for _ in range(3))
        left = multiply(law, multiply(law, x, y), z)
        right = multiply(law, x, multiply(law, y, z))
        if left.coords != right.coords:
            witness("associativity", x=x, y=y, z=z)
    return issues


def cmd_validate(args) -> int:
    entry = _entry_from_arg(args.group)
    report = {"group": entry.spec.name, "ok": True}

    algebra = validate_algebra(entry.spec, entry.constants)
    report["algebra"] = {
        "ok": algebra.ok,
        "issues": [{"kind": i.kind, "message": i.message, "witness": i.witness}
                   for i in algebra.issues],
    }
    if not algebra.ok:
        report["ok"] = False
        _emit(report)
        return EXIT_VIOLATION

    law = group_law(entry)
    rnd = random.Random(args.seed)
    issues = _law_self_checks(entry, law, rnd,
                              pairs=args.pairs, triples=max(args.pairs // 4, 10))
    roundtrip = law_to_json(law_from_json(law_to_json(law), entry)) == law_to_json(law)
    if not roundtrip:
        issues.append({"kind": "serialization",
                       "message": "law JSON round-trip changed the table"})
    report["law_checks"] = {
        "pairs": args.pairs,
        "triples": max(args.pairs // 4, 10),
        "roundtrip": roundtrip,
        "issues": issues,
    }

    if entry.matrix_dim is not None:
        agree = 0
        first_bad = None
        for _ in range(args.oracle_pairs):
            x = _random_rational(entry.spec, rnd)
            y = _random_rational(entry.spec, rnd)
            if multiply(law, x, y).coords == matrix_oracle_product(entry, [x, y]).coords:
                agree += 1
            elif first_bad is None:
                first_bad = {"x": [str(c) for c in x.coords],
                             "y": [str(c) for c in y.coords]}
        report["oracle_agreement"] = {"pairs": args.oracle_pairs, "equal": agree}
        if first_bad is not None:
            issues.append({"kind": "oracle", "witness": first_bad})
    else:
        report["oracle_agreement"] = None

    if issues:
        report["ok"] = False
        _emit(report)
        return EXIT_VIOLATION
    _emit(report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# emit-law


def cmd_emit_law(args) -> int:
    entry = _entry_from_arg(args.group)
    text = law_to_json(group_law(entry))
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify-lemmas


def _first_failure(bundle) -> dict | None:
    for section in ("product_lemma", "action_identities"):
        for item in bundle.get(section, []):
            for check in item["checks"]:
                if check["status"] == "fail":
                    return {"section": section, "case": item.get("case"),
                            "check": check}
    return None


def cmd_verify_lemmas(args) -> int:
    entry = _entry_from_arg(args.group)
    algebra = validate_algebra(entry.spec, entry.constants)
    if not algebra.ok:
        _emit({"group": entry.spec.name, "ok": False,
               "algebra_issues": [i.message for i in algebra.issues]})
        return EXIT_VIOLATION
    law = group_law(entry)
    step = entry.spec.step
    bundle = {"group": entry.spec.name, "max_n": args.max_n}

    expansions = {}
    for n in range(2, args.max_n + 1):
        expansions[n] = expand_product(law, n, max_monomials=args.max_monomials)
    product_checks = []
    for n in range(2, args.max_n + 1):
        for m in range(n + 1, args.max_n + 1):
            rep = check_product_lemma(expansions[n], expansions[m])
            product_checks.append({
                "case": {"N": n, "M": m},
                "checks": [{"name": c.name, "status": c.status,
                            "witness": c.witness} for c in rep.checks],
            })
    bundle["product_lemma"] = product_checks

    action_checks = []
    if step < 2:
        action_checks.append({
            "case": None,
            "checks": [{"name": "single-block nonvanishing",
                        "status": "not-applicable",
                        "witness": {"reason": "step 1: no level above 1"}}],
        })
    else:
        for level in range(2, min(step, args.max_level) + 1):
            for block_len in range(1, args.max_block + 1):
                for segments in range(1, args.max_segments + 1):
                    rep = verify_action_identities(entry, level, block_len, segments)
                    action_checks.append({
                        "case": {"level": level, "block_len": block_len,
                                 "segments": segments},
                        "checks": [{"name": c.name, "status": c.status,
                                    "witness": c.witness} for c in rep.checks],
                    })
    bundle["action_identities"] = action_checks

    failure = _first_failure(bundle)
    bundle["ok"] = failure is None
    if failure is not None:
        bundle["first_counterexample"] = failure
    _emit(bundle)
    return EXIT_OK if failure is None else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# cramer


def _resolve_measure(entry: CatalogEntry, value):
    """Measure from a shortcut string or an inline JSON object."""
    if isinstance(value, str):
        if value == "rademacher":
            return rademacher_measure(entry)
        if value == "box":
            return default_box_measure(entry)
        if value.startswith("box:"):
            return default_box_measure(entry, half_width=Fraction(value[4:]))
        if value.startswith("@"):
            return measure_from_json(entry.spec,
                                     json.loads(Path(value[1:]).read_text()))
        raise ConfigError(
            f"unknown measure shortcut {value!r}; use rademacher, box, "
            "box:<half-width>, @file.json, or an inline object")
    if isinstance(value, dict):
        if set(value) == {"matched_of"}:
            return matched_measure(entry, _resolve_measure(entry, value["matched_of"]))
        return measure_from_json(entry.spec, value)
    raise ConfigError(f"cannot interpret measure spec {value!r}")


def cmd_cramer(args) -> int:
    entry = _entry_from_arg(args.group)
    try:
        spec_value = json.loads(args.measure)
    except json.JSONDecodeError:
        spec_value = args.measure
    measure = _resolve_measure(entry, spec_value)
    report = cramer_check(measure, margin=args.margin)
    _emit({"group": entry.spec.name, **report.to_dict()})
    if report.verdict == "holds":
        return EXIT_OK
    if report.verdict == "fails":
        return EXIT_VIOLATION
    return EXIT_RESOURCE


# ---------------------------------------------------------------------------
# run


def _resolve_test_function(spec, params) -> ProductTestFunction:
    """Product test function from {"kind": ..., per-kind fields}."""
    q = spec.total_dim
    kind = params.get("kind", "product-tent")
    if kind == "product-tent":
        centers = params.get("centers", [0.0] * q)
        widths = params.get("half_widths", [1.0] * q)
        if len(centers) != q or len(widths) != q:
            raise ConfigError(f"test function needs {q} centers and half_widths")
        return ProductTestFunction(tuple(
            Tent(float(c), float(w)) for c, w in zip(centers, widths)))
    if kind == "smooth-bump":
        return centered_bump(q, float(params.get("half_width", 1.0)))
    if kind == "smoothed-indicator":
        los = params.get("los", [-1.0] * q)
        his = params.get("his", [1.0] * q)
        ramp = float(params.get("ramp", 0.25))
        if len(los) != q or len(his) != q:
            raise ConfigError(f"test function needs {q} los and his")
        return ProductTestFunction(tuple(
            RampIndicator(float(a), float(b), ramp) for a, b in zip(los, his)))
    raise ConfigError(f"unknown test function kind {kind!r}")


def _resolve_statistic(spec, params) -> list[tuple[UStatisticSpec, Fraction]]:
    """Named U-statistic families used by moment-growth experiments."""
    stat = params.get("statistic", {"kind": "level-sum", "level": 1})
    kind = stat.get("kind")
    if kind == "level-sum":
        level = int(stat.get("level", 1))
        index = int(stat.get("index", 1))
        label = (level, index)
        if label not in spec.labels:
            raise ConfigError(f"no coordinate {label} in {spec.name}")
        one = UStatisticSpec(blocks=(((label, 1),),))
        return [(one, Fraction(1))]
    if kind == "signed-pair":
        a = tuple(stat.get("first", (1, 1)))
        b = tuple(stat.get("second", (1, 2)))
        for label in (a, b):
            if tuple(label) not in spec.labels:
                raise ConfigError(f"no coordinate {label} in {spec.name}")
        ab = UStatisticSpec(blocks=(((a, 1),), ((b, 1),)))
        ba = UStatisticSpec(blocks=(((b, 1),), ((a, 1),)))
        return [(ab, Fraction(1)), (ba, Fraction(-1))]
    raise ConfigError(f"unknown statistic kind {kind!r}")


def _parse_run_config(cfg, threads: int) -> tuple[int, list[ExperimentConfig]]:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - {"seed", "experiments"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    records = cfg.get("experiments")
    if not isinstance(records, list) or not records:
        raise ConfigError("config needs a non-empty 'experiments' list")
    seed = resolve_seed(cfg.get("seed"))
    experiments = []
    seen = set()
    for rec in records:
        if not isinstance(rec, dict):
            raise ConfigError("each experiment must be an object")
        unknown = set(rec) - {"id", "group", "kind", "schedule", "samples", "params"}
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        try:
            exp = ExperimentConfig(
                experiment_id=str(rec.get("id", "")),
                group=str(rec.get("group", "")),
                kind=rec.get("kind", ""),
                schedule=tuple(rec.get("schedule", ())),
                samples=int(rec.get("samples", 1 << 16)),
                seed=seed,
                threads=threads,
                params=rec.get("params", {}),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"malformed experiment record: {e}") from None
        if exp.experiment_id in seen:
            raise ConfigError(f"duplicate experiment id {exp.experiment_id!r}")
        seen.add(exp.experiment_id)
        if exp.group not in catalog():
            raise ConfigError(f"unknown group {exp.group!r}")
        experiments.append(exp)
    return seed, experiments


def _gap_pair(entry, exp) -> tuple:
    params = exp.params
    if "mu" not in params:
        raise ConfigError(f"experiment {exp.experiment_id!r} needs params.mu")
    mu = _resolve_measure(entry, params["mu"])
    if "phi" in params:
        phi = _resolve_measure(entry, params["phi"])
    else:
        phi = matched_measure(entry, mu)
    return mu, phi


def _experiment_rows(exp: ExperimentConfig, entry: CatalogEntry, N: int) -> list[dict]:
    """All CSV rows this experiment contributes at one schedule point."""
    params = exp.params
    tag = exp.experiment_id
    kind = exp.kind

    if kind == "walk-functional":
        f = _resolve_test_function(entry.spec, params.get("fn", {}))
        est = walk_functional(
            entry, _resolve_measure(entry, params["measure"]), N, f,
            g=params.get("g"), h=params.get("h"),
            scaled=bool(params.get("scaled", True)),
            samples=exp.samples, seed=exp.seed, threads=exp.threads,
            tag=f"{tag}:{N}", antithetic=bool(params.get("antithetic", False)))
        return [{"N": N, "quantity": "walk_functional", "mean": est.mean,
                 "std_error": est.std_error, "samples": est.samples}]

    if kind == "char-fn":
        est = char_fn_estimate(
            entry, _resolve_measure(entry, params["measure"]), N,
            [float(x) for x in params["xi"]],
            samples=exp.samples, seed=exp.seed, threads=exp.threads,
            tag=f"{tag}:{N}",
            enumeration_budget=int(params.get("enumeration_budget", 10 ** 6)))
        rows = [
            {"N": N, "quantity": "char_re", "mean": est.value.real,
             "std_error": est.std_error, "samples": est.samples},
            {"N": N, "quantity": "char_im", "mean": est.value.imag,
             "std_error": est.std_error, "samples": est.samples},
        ]
        if est.exact is not None:
            rows.append({"N": N, "quantity": "char_exact_re",
                         "mean": est.exact.real, "std_error": 0.0,
                         "samples": est.samples})
            rows.append({"N": N, "quantity": "char_exact_im",
                         "mean": est.exact.imag, "std_error": 0.0,
                         "samples": est.samples})
        return rows

    if kind in ("lindeberg", "llt"):
        mu, phi = _gap_pair(entry, exp)
        cap = int(params.get("total_cap", 10 ** 8)) // len(exp.schedule)
        common = dict(seed=exp.seed, threads=exp.threads,
                      noise_factor=float(params.get("noise_factor", 5.0)),
                      initial_samples=exp.samples,
                      total_cap=cap,
                      max_waves=int(params.get("max_waves", 12)),
                      tag=tag)
        if kind == "lindeberg":
            window = FrequencyWindow.default(entry.spec)
            if "epsilons" in params:
                window = FrequencyWindow(
                    entry.spec, tuple(float(e) for e in params["epsilons"]))
            report = lindeberg_gap(entry, mu, phi, [N],
                                   [float(x) for x in params["eta"]],
                                   window=window, **common)
        else:
            f = _resolve_test_function(entry.spec, params.get("fn", {}))
            report = llt_gap(entry, mu, phi, f, [N],
                             g=params.get("g"), h=params.get("h"), **common)
        point = report.points[0]
        return [{"N": N, "quantity": GAP_QUANTITY[kind], "mean": point.gap,
                 "std_error": point.std_error,
                 "samples": point.samples_a + point.samples_b}]

    if kind == "moment-growth":
        terms = _resolve_statistic(entry.spec, params)
        report = moment_growth(
            entry, terms, _resolve_measure(entry, params["measure"]),
            int(params.get("m", 1)), [N],
            samples=exp.samples, seed=exp.seed, threads=exp.threads,
            tail=bool(params.get("tail", False)), tag=tag)
        point = report.points[0]
        rows = [{"N": N, "quantity": report.quantity,
                 "mean": point.estimate.mean,
                 "std_error": point.estimate.std_error,
                 "samples": point.estimate.samples}]
        if point.tail_ratio is not None:
            rows.append({"N": N, "quantity": f"{report.quantity}_tail",
                         "mean": point.tail_ratio.mean,
                         "std_error": point.tail_ratio.std_error,
                         "samples": point.tail_ratio.samples})
        return rows

    if kind == "truncation-tail":
        points = truncation_tail_check(
            entry, _resolve_measure(entry, params["measure"]), [N],
            float(params.get("delta", 0.1)),
            samples=exp.samples, seed=exp.seed, threads=exp.threads, tag=tag)
        point = points[0]
        rate = point.frequency
        se = math.sqrt(max(rate * (1.0 - rate), 0.0) / point.samples)
        return [{"N": N, "quantity": "tail_exceed_rate", "mean": rate,
                 "std_error": se, "samples": point.samples}]

    raise ConfigError(f"kind {kind!r} has no per-N rows")


def _expected_quantities(exp: ExperimentConfig, entry: CatalogEntry, N: int) -> set[str]:
    """Quantities a completed (experiment, N) group must have in the CSV."""
    kind = exp.kind
    if kind == "walk-functional":
        return {"walk_functional"}
    if kind == "char-fn":
        out = {"char_re", "char_im"}
        measure = _resolve_measure(entry, exp.params["measure"])
        budget = int(exp.params.get("enumeration_budget", 10 ** 6))
        if enumeration_affordable(measure, N, budget):
            out |= {"char_exact_re", "char_exact_im"}
        return out
    if kind in GAP_QUANTITY:
        return {GAP_QUANTITY[kind]}
    if kind == "moment-growth":
        terms = _resolve_statistic(entry.spec, exp.params)
        weight = terms[0][0].hom_degree
        base = f"moment_growth_m{int(exp.params.get('m', 1))}_w{weight}"
        out = {base}
        if exp.params.get("tail", False):
            out.add(f"{base}_tail")
        return out
    if kind == "truncation-tail":
        return {"tail_exceed_rate"}
    raise ConfigError(f"kind {kind!r} has no per-N rows")


def _sublevel_rows(exp: ExperimentConfig) -> list[dict]:
    """Anti-concentration cells; quasirandom, so rows carry no noise column."""
    params = exp.params
    degree = int(params.get("degree", 2))
    dim = int(params.get("dim", 1))
    count = int(params.get("count", 20))
    alphas = [float(a) for a in params.get("alphas", (1e-1, 1e-2, 1e-3, 1e-4))]
    heights = [float(h) for h in params.get("heights", (1.0, 1e2, 1e4))]
    points = 1 << max(int(exp.samples).bit_length() - 1, 10)
    rows = []
    for i in range(count):
        rng = make_generator(SeedSequence(
            exp.seed, spawn_key=(tag_key(f"{exp.experiment_id}:poly:{i}"), 0)))
        pmap = random_power_map(dim, degree, rng)
        report = sublevel_measure(pmap, alphas, heights, points=points,
                                  seed=exp.seed, tag=f"{exp.experiment_id}:{i}")
        for cell in report.cells:
            rows.append({
                "N": 0,
                "quantity": f"sublevel_ratio_p{i:02d}_a{cell.alpha:g}_h{cell.height:g}",
                "mean": cell.ratio, "std_error": 0.0, "samples": points,
            })
    return rows


def _slope_rows(exp: ExperimentConfig, rows: list[dict]) -> list[dict]:
    """Refit the log-log slope from this experiment's per-N rows."""
    if exp.kind in GAP_QUANTITY:
        quantities = [GAP_QUANTITY[exp.kind]]
    elif exp.kind == "moment-growth":
        quantities = sorted({r["quantity"] for r in rows
                             if r["quantity"].startswith("moment_growth")
                             and not r["quantity"].endswith("_tail")})
    else:
        return []
    out = []
    for quantity in quantities:
        pts = [r for r in rows
               if r["quantity"] == quantity and int(r["N"]) > 0
               and float(r["mean"]) > 0 and math.isfinite(float(r["mean"]))]
        if len(pts) < 3:
            continue
        fit = loglog_fit(
            [int(r["N"]) for r in pts],
            [float(r["mean"]) for r in pts],
            weights=[(float(r["mean"]) / float(r["std_error"])) ** 2
                     if float(r["std_error"]) > 0 else 1.0 for r in pts])
        out.append({"N": 0, "quantity": f"{quantity}_slope", "mean": fit.slope,
                    "std_error": fit.slope_se,
                    "samples": sum(int(r["samples"]) for r in pts),
                    "_fit": fit})
    return out


def _experiment_report(exp, rows, slope_rows) -> dict:
    report = {
        "id": exp.experiment_id,
        "group": exp.group,
        "kind": exp.kind,
        "rows": len(rows),
    }
    fits = {}
    for srow in slope_rows:
        fit = srow["_fit"]
        fits[srow["quantity"]] = {
            "slope": fit.slope, "slope_se": fit.slope_se,
            "ci_low": fit.ci_low, "ci_high": fit.ci_high,
        }
    if fits:
        report["fits"] = fits
    if exp.kind in GAP_QUANTITY:
        gaps = [r for r in rows if r["quantity"] == GAP_QUANTITY[exp.kind]]
        worst = max((float(r["std_error"]) / float(r["mean"])
                     for r in gaps if float(r["mean"]) > 0), default=None)
        report["noise"] = {
            "requested_factor": float(exp.params.get("noise_factor", 5.0)),
            "worst_se_over_gap": worst,
        }
        if fits:
            fit = next(iter(fits.values()))
            report["verdict"] = "decaying" if fit["ci_high"] < 0 else "flat"
    if exp.kind == "sublevel":
        ratios = sorted(float(r["mean"]) for r in rows)
        if ratios:
            med = ratios[len(ratios) // 2]
            spread = max(ratios[-1] / med, med / ratios[0]) if ratios[0] > 0 else None
            report["ratio_median"] = med
            report["ratio_spread"] = spread
            report["verdict"] = ("bounded" if spread is not None and spread <= 3.0
                                 else "unbounded")
    return report


def cmd_run(args) -> int:
    config_path = Path(args.config)
    try:
        raw = config_path.read_text()
        cfg = json.loads(raw)
    except OSError as e:
        return _fail_usage(f"cannot read config: {e}")
    except json.JSONDecodeError as e:
        return _fail_usage(f"config is not valid JSON: {e}")
    try:
        seed, experiments = _parse_run_config(cfg, args.threads)
    except ConfigError as e:
        return _fail_usage(f"config rejected: {e}")

    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    config_hash = hashlib.sha256(canonical.encode()).hexdigest()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    manifest = {
        "tool_version": __version__,
        "config_hash": config_hash,
        "master_seed": seed,
        "started": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "finished": None,
        "experiments": {},
    }

    resume = args.resume and csv_path.exists()
    done: set[tuple[str, int, str]] = set()
    rows_by_exp: dict[str, list[dict]] = {e.experiment_id: [] for e in experiments}
    if resume:
        with csv_path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                key = (row["experiment_id"], int(row["N"]), row["quantity"])
                done.add(key)
                if row["experiment_id"] in rows_by_exp:
                    rows_by_exp[row["experiment_id"]].append(row)

    exit_code = EXIT_OK
    with csv_path.open("a" if resume else "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if not resume:
            writer.writeheader()
            fh.flush()

        def write_rows(exp, rows):
            for row in rows:
                full = {"experiment_id": exp.experiment_id, "group": exp.group,
                        "seed": exp.seed, **{k: v for k, v in row.items()
                                             if not k.startswith("_")}}
                writer.writerow(full)
                rows_by_exp[exp.experiment_id].append(full)
            fh.flush()

        for exp in experiments:
            entry = get_group(exp.group)
            status = "completed"
            try:
                if exp.kind == "sublevel":
                    fresh = [r for r in _sublevel_rows(exp)
                             if (exp.experiment_id, 0, r["quantity"]) not in done]
                    write_rows(exp, fresh)
                else:
                    for N in exp.schedule:
                        already = {q for (eid, n, q) in done
                                   if eid == exp.experiment_id and n == N}
                        if _expected_quantities(exp, entry, N) <= already:
                            continue
                        rows = [r for r in _experiment_rows(exp, entry, N)
                                if r["quantity"] not in already]
                        write_rows(exp, rows)
                    slope_rows = _slope_rows(exp, rows_by_exp[exp.experiment_id])
                    fresh = [r for r in slope_rows
                             if (exp.experiment_id, 0, r["quantity"]) not in done]
                    write_rows(exp, fresh)
            except ResourceError as e:
                status = f"resource exhausted: {e}"
                exit_code = EXIT_RESOURCE
            except ConfigError as e:
                print(f"experiment {exp.experiment_id!r} rejected: {e}",
                      file=sys.stderr)
                status = f"config error: {e}"
                exit_code = EXIT_USAGE
            manifest["experiments"][exp.experiment_id] = status

    report = {
        "config_hash": config_hash,
        "master_seed": seed,
        "experiments": [
            _experiment_report(exp, rows_by_exp[exp.experiment_id],
                               _slope_rows(exp, rows_by_exp[exp.experiment_id]))
            for exp in experiments
        ],
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    manifest["finished"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return exit_code


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nilwalk",
        description="Exact group laws and seeded walk experiments "
                    "on graded nilpotent groups.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-groups", help="built-in algebras and their shapes")
    p.set_defaults(func=cmd_list_groups)

    p = sub.add_parser("validate",
                       help="Lie axioms, group-law self-checks, oracle agreement")
    p.add_argument("group", help="catalog name or algebra JSON file")
    p.add_argument("--pairs", type=int, default=200,
                   help="random rational pairs for the law self-checks")
    p.add_argument("--oracle-pairs", type=int, default=1000,
                   help="random pairs for matrix-oracle agreement")
    p.add_argument("--seed", type=int, default=2026)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("emit-law", help="exact product polynomials as JSON")
    p.add_argument("group")
    p.add_argument("-o", "--output", help="write to a file instead of stdout")
    p.set_defaults(func=cmd_emit_law)

    p = sub.add_parser("verify-lemmas",
                       help="symbolic product and rearrangement identity suites")
    p.add_argument("group")
    p.add_argument("--max-n", type=int, default=5,
                   help="largest product length for the expansion pairs")
    p.add_argument("--max-level", type=int, default=3)
    p.add_argument("--max-block", type=int, default=2)
    p.add_argument("--max-segments", type=int, default=2)
    p.add_argument("--max-monomials", type=int, default=10 ** 6,
                   help="abort symbolic expansion beyond this many monomials")
    p.set_defaults(func=cmd_verify_lemmas)

    p = sub.add_parser("cramer",
                       help="characteristic-function separation verdict")
    p.add_argument("group")
    p.add_argument("--measure", required=True,
                   help="rademacher | box | box:<half-width> | @file.json | JSON")
    p.add_argument("--margin", type=float, default=0.05)
    p.set_defaults(func=cmd_cramer)

    p = sub.add_parser("run", help="seeded Monte Carlo experiments from a config")
    p.add_argument("config", help="experiment config JSON")
    p.add_argument("--out-dir", default=".",
                   help="directory for results.csv, report.json, manifest.json")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads; never changes the numbers")
    p.add_argument("--resume", action="store_true",
                   help="skip (experiment, N) rows already present in results.csv")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, StructuralError, MeasureError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except NilwalkError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
