"""Command-line front end.

Subcommands:

    simulate     run a config-driven batch of simulated experiments
    estimate     reconstruct the source from a counts file
    plausible    plausible-region report for a counts file
    asymptotics  large-N rescaling of a result table
    selftest     run the analytic invariant suite

Configs are JSON (schema in the README).  Result tables are long-format,
one row per (run, N, estimator); wall_time is always serialized as null
so identical (config, seed) reruns produce byte-identical files.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .estimate import (OptimizerConfig, li_pipeline, match_and_score,
                       ml_decomposition, ml_estimate)
from .plausible import asymptotics, plausibility
from .povm import get_povm
from .qstate import (ParamVector, PureQubit, ensemble_state, moment_features,
                     random_param_array, to_triplet_matrix)
from .recon import decompose_moments, jacobi_eigh3
from .sim import (GENERATOR_ID, STREAM_OPTIMIZER, STREAM_PRIOR, run_experiment,
                  sample_counts, seed_sequence)

ESTIMATOR_NAMES = ("li-xi", "li-moments", "ml")

RESULT_COLUMNS = ("run", "n", "estimator", "err0_ppm", "err1_ppm", "p_err",
                  "fidelity0", "fidelity1", "lambda_pl", "size",
                  "credibility", "truth_plausible", "wall_time")

ASYMPTOTIC_COLUMNS = ("run", "n", "lambda_scaled", "size_scaled",
                      "one_minus_credibility_scaled", "ratio_d")

DEFAULT_M = 10_000_000


class UsageError(Exception):
    """Bad invocation, config or input file; maps to exit code 2."""


def _as_int(value, name):
    if isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"{name} must be an integer, got {value!r}")
        value = int(value)
    if not isinstance(value, int):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    return value


def _parse_source(node):
    if not isinstance(node, dict):
        raise ValueError("source must be an object")
    if "theta" in node:
        theta = [float(v) for v in node["theta"]]
        if len(theta) != 5:
            raise ValueError("source.theta needs 5 angles "
                             "(theta0, phi0, theta1, phi1, alpha)")
        try:
            return ParamVector.from_array(theta)
        except ValueError:
            # out-of-box angles describe the same source; canonicalize
            return ParamVector.from_any_angles(*theta)
    if {"a_bloch", "b_bloch", "p0"} <= node.keys():
        states = []
        for key in ("a_bloch", "b_bloch"):
            v = [float(c) for c in node[key]]
            if len(v) != 3:
                raise ValueError(f"source.{key} must have 3 components")
            norm = math.sqrt(sum(c * c for c in v))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"source.{key} has norm {norm}, expected 1")
            states.append(PureQubit.from_bloch(v))
        return ParamVector.from_states(states[0], states[1], float(node["p0"]))
    raise ValueError("source needs either 'theta' or 'a_bloch'/'b_bloch'/'p0'")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a simulated batch needs; round-trips through to_dict."""

    povm: str
    source: ParamVector
    n_schedule: tuple
    runs: int = 1
    estimators: tuple = ("li-xi", "ml")
    optimizer: OptimizerConfig = OptimizerConfig()
    plausibility_enabled: bool = False
    plausibility_m: int = DEFAULT_M
    plausibility_checkpoints: tuple = ()
    master_seed: int = 0
    out_dir: object = None
    out_format: str = "csv"

    def validate(self):
        if self.povm not in ("sic", "tetra"):
            raise ValueError(f"unknown povm {self.povm!r}")
        if not isinstance(self.source, ParamVector):
            raise ValueError("source must be a ParamVector")
        if not self.n_schedule:
            raise ValueError("n_schedule must not be empty")
        if any(n < 1 for n in self.n_schedule):
            raise ValueError("n_schedule entries must be positive")
        if any(b <= a for a, b in zip(self.n_schedule, self.n_schedule[1:])):
            raise ValueError("n_schedule must be strictly increasing")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not self.estimators:
            raise ValueError("at least one estimator is required")
        bad = [e for e in self.estimators if e not in ESTIMATOR_NAMES]
        if bad:
            raise ValueError(f"unknown estimators {bad}; "
                             f"choose from {list(ESTIMATOR_NAMES)}")
        if len(set(self.estimators)) != len(self.estimators):
            raise ValueError("duplicate estimators")
        if self.plausibility_enabled:
            if "ml" not in self.estimators:
                raise ValueError("plausibility needs the 'ml' estimator "
                                 "(the threshold anchors at theta_ML)")
            if self.plausibility_m < 1:
                raise ValueError("plausibility m must be >= 1")
            missing = [n for n in self.plausibility_checkpoints
                       if n not in self.n_schedule]
            if missing:
                raise ValueError(f"plausibility checkpoints {missing} "
                                 "not in n_schedule")
            pairs = zip(self.plausibility_checkpoints,
                        self.plausibility_checkpoints[1:])
            if any(b <= a for a, b in pairs):
                raise ValueError("plausibility checkpoints must be "
                                 "strictly increasing")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        if self.out_format not in ("csv", "json"):
            raise ValueError(f"unknown output format {self.out_format!r}")

    @classmethod
    def from_dict(cls, data):
        known = {"povm", "source", "n_schedule", "runs", "estimators",
                 "optimizer", "plausibility", "master_seed", "output"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown config fields: {unknown}")
        try:
            for key in ("povm", "source", "n_schedule"):
                if key not in data:
                    raise ValueError(f"missing required field '{key}'")
            opt = dict(data.get("optimizer") or {})
            bad = sorted(set(opt) - {"population", "sigma0",
                                     "max_evaluations", "tol", "restarts"})
            if bad:
                raise ValueError(f"unknown optimizer fields: {bad}")
            pl = dict(data.get("plausibility") or {})
            bad = sorted(set(pl) - {"enabled", "m", "checkpoints"})
            if bad:
                raise ValueError(f"unknown plausibility fields: {bad}")
            out = dict(data.get("output") or {})
            bad = sorted(set(out) - {"path", "format"})
            if bad:
                raise ValueError(f"unknown output fields: {bad}")
            config = cls(
                povm=str(data["povm"]),
                source=_parse_source(data["source"]),
                n_schedule=tuple(_as_int(n, "n_schedule entry")
                                 for n in data["n_schedule"]),
                runs=_as_int(data.get("runs", 1), "runs"),
                estimators=tuple(str(e) for e in
                                 data.get("estimators", ("li-xi", "ml"))),
                optimizer=OptimizerConfig(**opt),
                plausibility_enabled=bool(pl.get("enabled", False)),
                plausibility_m=_as_int(pl.get("m", DEFAULT_M),
                                       "plausibility.m"),
                plausibility_checkpoints=tuple(
                    _as_int(n, "plausibility checkpoint")
                    for n in pl.get("checkpoints") or ()),
                master_seed=_as_int(data.get("master_seed", 0),
                                    "master_seed"),
                out_dir=out.get("path"),
                out_format=str(out.get("format", "csv")),
            )
            config.validate()
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad config: {exc}") from exc
        return config

    def to_dict(self):
        src = self.source
        return {
            "povm": self.povm,
            "source": {"theta": [src.theta0, src.phi0,
                                 src.theta1, src.phi1, src.alpha]},
            "n_schedule": list(self.n_schedule),
            "runs": self.runs,
            "estimators": list(self.estimators),
            "optimizer": {"population": self.optimizer.population,
                          "sigma0": self.optimizer.sigma0,
                          "max_evaluations": self.optimizer.max_evaluations,
                          "tol": self.optimizer.tol,
                          "restarts": self.optimizer.restarts},
            "plausibility": {"enabled": self.plausibility_enabled,
                             "m": self.plausibility_m,
                             "checkpoints":
                                 list(self.plausibility_checkpoints)},
            "master_seed": self.master_seed,
            "output": {"path": self.out_dir, "format": self.out_format},
        }


# --------------------------------------------------------------------------
# Table and report rendering

def _native(value):
    """Numpy scalars break json and repr formatting; drop to builtins."""
    if value is None or isinstance(value, (bool, np.bool_)):
        return None if value is None else bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def _cell(value):
    value = _native(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_table(columns, rows, fmt):
    """Long-format table as RFC-4180 CSV text or a JSON document."""
    rows = [{k: _native(row[k]) for k in columns} for row in rows]
    if fmt == "json":
        doc = {"columns": list(columns), "rows": rows}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[k]) for k in columns])
    return buf.getvalue()


def _flatten(node, prefix=""):
    if isinstance(node, dict):
        out = []
        for key, value in node.items():
            out.extend(_flatten(value, f"{prefix}.{key}" if prefix else key))
        return out
    if isinstance(node, (list, tuple)):
        out = []
        for i, value in enumerate(node):
            out.extend(_flatten(value, f"{prefix}[{i}]"))
        return out
    return [(prefix, node)]


def render_report(report, fmt):
    """Nested report as JSON, or flattened key/value CSV."""
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(("key", "value"))
    for key, value in _flatten(report):
        writer.writerow((key, _cell(value)))
    return buf.getvalue()


def result_rows(records):
    """Flatten RunRecords into ResultTable rows (wall_time always null)."""
    rows = []
    for rec in records:
        for est in rec.estimates:
            rows.append({
                "run": int(rec.run_index),
                "n": int(rec.n_total),
                "estimator": est.estimator,
                "err0_ppm": est.err0_ppm,
                "err1_ppm": est.err1_ppm,
                "p_err": est.p_err,
                "fidelity0": est.fidelity0,
                "fidelity1": est.fidelity1,
                "lambda_pl": est.lambda_pl,
                "size": est.size_pl,
                "credibility": est.credibility_pl,
                "truth_plausible": est.truth_plausible,
                "wall_time": None,
            })
    return rows


def _emit(text, out_dir, filename, log=None):
    if out_dir is None:
        sys.stdout.write(text)
        return
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, filename)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    if log:
        log(f"wrote {path}")


# --------------------------------------------------------------------------
# Counts and result-table input

def read_counts(path, povm):
    """Counts CSV (header 'outcome,count', documented outcome order)."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except OSError as exc:
        raise UsageError(f"cannot read counts: {exc}") from exc
    if not rows or [c.strip().lower() for c in rows[0][:2]] != ["outcome",
                                                                "count"]:
        raise UsageError(f"{path}: expected header 'outcome,count'")
    body = rows[1:]
    names = tuple(r[0].strip() for r in body)
    if names != povm.outcome_names:
        raise UsageError(
            f"{path}: outcome rows {list(names)} do not match the "
            f"{povm.name} order {list(povm.outcome_names)}")
    try:
        counts = np.array([int(r[1]) for r in body], dtype=np.int64)
    except (IndexError, ValueError) as exc:
        raise UsageError(f"{path}: bad count value ({exc})") from exc
    if (counts < 0).any():
        raise UsageError(f"{path}: negative count")
    if int(counts.sum()) == 0:
        raise UsageError(f"{path}: empty data (all counts zero)")
    return counts


def render_counts(counts, povm):
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(("outcome", "count"))
    for name, n in zip(povm.outcome_names, counts):
        writer.writerow((name, int(n)))
    return buf.getvalue()


def read_result_rows(path):
    """Rows of a result table written by cmd_simulate (csv or json)."""
    try:
        if path.endswith(".json"):
            with open(path) as fh:
                doc = json.load(fh)
            rows = doc["rows"] if isinstance(doc, dict) else doc
            if not isinstance(rows, list):
                raise ValueError("no row list found")
            return rows
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            rows = list(reader)
        missing = [c for c in RESULT_COLUMNS if c not in fields]
        if missing:
            raise ValueError(f"missing columns {missing}")
        return rows
    except OSError as exc:
        raise UsageError(f"cannot read results: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{path}: not a result table ({exc})") from exc


def _row_float(row, key):
    value = row.get(key)
    if value is None or value == "":
        return None
    return float(value)


# --------------------------------------------------------------------------
# Subcommands

def _load_config(args):
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(
            f"{args.config}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise UsageError("config root must be a JSON object")
    config = ExperimentConfig.from_dict(data)
    override = {}
    if args.seed is not None:
        override["master_seed"] = args.seed
    if args.out is not None:
        override["out_dir"] = args.out
    if args.format is not None:
        override["out_format"] = args.format
    if override:
        config = dataclasses.replace(config, **override)
        try:
            config.validate()
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    return config


def _threads(args):
    return args.threads if args.threads else (os.cpu_count() or 1)


def _log(args):
    if args.verbose:
        return lambda msg: print(msg, file=sys.stderr)
    return None


def cmd_simulate(args):
    config = _load_config(args)
    log = _log(args)
    records = run_experiment(config, workers=_threads(args),
                             verbose=args.verbose, log=log)
    table = render_table(RESULT_COLUMNS, result_rows(records),
                         config.out_format)
    cfg_dict = config.to_dict()
    # where results land is runtime i/o, like thread count; the manifest
    # records only what determines the numbers
    del cfg_dict["output"]
    manifest = {
        "config": cfg_dict,
        "master_seed": config.master_seed,
        "generator": GENERATOR_ID,
        "package": "pairtomo",
        "version": __version__,
    }
    _emit(table, config.out_dir, f"results.{config.out_format}", log)
    if config.out_dir is not None:
        _emit(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
              config.out_dir, "manifest.json", log)
    return 0


def _state_dict(state):
    return {"theta": state.theta, "phi": state.phi,
            "bloch": [float(c) for c in state.bloch]}


def _decomposition_dict(name, dec):
    return {
        "estimator": name,
        "p0": dec.p0,
        "p1": dec.p1,
        "state0": _state_dict(dec.state0),
        "state1": _state_dict(dec.state1),
        "degenerate": dec.degenerate,
        "clamped": dec.clamped,
    }


def cmd_estimate(args):
    povm = get_povm(args.povm)
    counts = read_counts(args.counts, povm)
    names = args.estimator or ["li-xi"]
    seed = args.seed if args.seed is not None else 0
    report = {"povm": povm.name, "n_total": int(counts.sum()),
              "estimates": []}
    for name in names:
        if name == "ml":
            opt = OptimizerConfig(seed=seed_sequence(seed, STREAM_OPTIMIZER,
                                                     0, 0))
            ml = ml_estimate(counts, povm, opt)
            entry = _decomposition_dict(name, ml_decomposition(ml))
            entry["objective"] = ml.objective
            entry["converged"] = ml.converged
        else:
            dec = li_pipeline(counts, povm, name.split("-", 1)[1])
            entry = _decomposition_dict(name, dec)
        report["estimates"].append(entry)
    if povm.name == "tetra":
        state = povm.linear_inversion(counts)
        report["singlet_weight"] = float(state.singlet_weight)
        m3 = to_triplet_matrix(state)
    else:
        m3 = povm.linear_inversion(counts)
    spectrum, _ = jacobi_eigh3(np.asarray(m3, dtype=complex))
    report["triplet_spectrum"] = [float(w) for w in spectrum]
    _emit(render_report(report, args.format or "json"), args.out,
          f"estimate.{args.format or 'json'}", _log(args))
    return 0


def cmd_plausible(args):
    povm = get_povm(args.povm)
    counts = read_counts(args.counts, povm)
    seed = args.seed if args.seed is not None else 0
    log = _log(args)
    opt = OptimizerConfig(seed=seed_sequence(seed, STREAM_OPTIMIZER, 0, 0))
    ml = ml_estimate(counts, povm, opt)
    if log:
        log(f"theta_ML = {ml.params.to_array().tolist()}")
    rep = plausibility(counts, povm, ml.params, args.m,
                       seed_sequence(seed, STREAM_PRIOR, 0),
                       workers=_threads(args))
    asym = asymptotics(rep.n_total, rep.lambda_pl, size=rep.size_pl,
                       credibility=rep.credibility_pl)
    report = {
        "n_total": rep.n_total,
        "m_samples": rep.m_samples,
        "theta_ml": ml.params.to_array().tolist(),
        "lambda_pl": rep.lambda_pl,
        "size": rep.size_pl,
        "credibility": rep.credibility_pl,
        "se_lambda_pl": rep.se_lambda_pl,
        "se_size": rep.se_size,
        "se_credibility": rep.se_credibility,
        "predicted_size": asym.predicted_size,
        "predicted_one_minus_credibility":
            asym.predicted_one_minus_credibility,
        "ratio_d": asym.ratio_d,
    }
    _emit(render_report(report, args.format or "json"), args.out,
          f"plausible.{args.format or 'json'}", log)
    return 0


def cmd_asymptotics(args):
    rows = read_result_rows(args.results)
    out_rows = []
    for row in rows:
        lam = _row_float(row, "lambda_pl")
        size = _row_float(row, "size")
        cred = _row_float(row, "credibility")
        if lam is None:
            continue
        n = int(row["n"])
        rep = asymptotics(n, lam, size=size, credibility=cred)
        log_n = math.log(n)
        scale = n ** 2.5
        out_rows.append({
            "run": int(row["run"]),
            "n": n,
            "lambda_scaled": scale * lam,
            "size_scaled": scale * log_n ** -2.5 * size
                if size is not None else None,
            "one_minus_credibility_scaled":
                scale * log_n ** -1.5 * (1.0 - cred)
                if cred is not None else None,
            "ratio_d": rep.ratio_d,
        })
    if not out_rows:
        raise UsageError(f"{args.results}: no plausibility data "
                         "(rerun simulate with plausibility enabled)")
    _emit(render_table(ASYMPTOTIC_COLUMNS, out_rows, args.format or "csv"),
          args.out, f"asymptotics.{args.format or 'csv'}", _log(args))
    return 0


# --------------------------------------------------------------------------
# Self test

def _selftest_checks():
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(7)))
    sic = get_povm("sic")
    tetra = get_povm("tetra")

    def sic_identities():
        err = np.max(np.abs(sic.elements.sum(axis=0) - np.eye(3)))
        gram = np.einsum("jab,kba->jk", sic.elements, sic.elements)
        target = 1.0 / 36.0 + np.eye(9) / 12.0
        return max(err, np.max(np.abs(gram - target))) < 1e-12

    def tetra_identities():
        t = tetra.directions
        gram = t @ t.T - (4.0 * np.eye(4) - 1.0) / 3.0
        err = max(np.max(np.abs(gram)), np.max(np.abs(t.sum(axis=0))))
        total = np.asarray(tetra.elements4()).sum(axis=0)
        return max(err, np.max(np.abs(total - np.eye(4)))) < 1e-12

    def sum_rules():
        worst = 0.0
        for row in random_param_array(rng, 50):
            q = tetra.probabilities(
                ensemble_state(ParamVector.from_array(row)))
            worst = max(worst, abs(q[:4].sum() - 1.0 / 3.0),
                        abs(q[4:].sum() - 2.0 / 3.0))
        return worst < 1e-12

    def singlet_probabilities():
        ket = np.array([0, 1, -1, 0]) / math.sqrt(2)
        rho = np.outer(ket, ket)
        q_sic = [np.trace(e @ rho).real for e in sic.elements4()]
        q_tet = np.array([np.trace(e @ rho).real
                          for e in tetra.elements4()])
        err = max(np.max(np.abs(q_sic)), np.max(np.abs(q_tet[:4])),
                  np.max(np.abs(q_tet[4:] - 1.0 / 6.0)))
        return err < 1e-12

    def purity_band():
        q = sic.probabilities_from_features(
            moment_features(random_param_array(rng, 500)))
        p2 = (q * q).sum(axis=1)
        return bool((p2 > 1.0 / 9.0 - 1e-12).all()
                    and (p2 < 1.0 / 6.0 + 1e-12).all())

    def _round_trip(povm, method):
        worst = 0.0
        for row in random_param_array(rng, 100):
            truth = ParamVector.from_array(row)
            probs = povm.probabilities_from_features(
                ensemble_state(truth).features())
            dec = li_pipeline(probs * 1e7, povm, method)
            if dec.degenerate:
                continue
            e0, e1, perr = match_and_score(truth, dec)
            worst = max(worst, e0 * 1e-6, e1 * 1e-6, perr)
        return worst < 1e-9

    def moment_route():
        worst = 0.0
        for row in random_param_array(rng, 200):
            truth = ParamVector.from_array(row)
            dec = decompose_moments(ensemble_state(truth))
            if dec.degenerate:
                continue
            e0, e1, perr = match_and_score(truth, dec)
            worst = max(worst, e0 * 1e-6, e1 * 1e-6, perr)
        return worst < 1e-9

    def count_determinism():
        probs = np.full(10, 0.1)
        c1 = sample_counts(probs, 1000, 42)
        c2 = sample_counts(probs, 1000, 42)
        return bool((c1 == c2).all() and c1.sum() == 1000)

    def plausibility_replay():
        truth = ParamVector.from_array([0.6, 1.0, 1.2, 4.0, 0.9])
        probs = tetra.probabilities(ensemble_state(truth))
        counts = sample_counts(probs, 500, 11)
        opt = OptimizerConfig(seed=seed_sequence(11, STREAM_OPTIMIZER, 0, 0),
                              max_evaluations=6000)
        ml = ml_estimate(counts, tetra, opt)
        rep1 = plausibility(counts, tetra, ml.params, 20_000,
                            seed_sequence(11, STREAM_PRIOR, 0))
        rep2 = plausibility(counts, tetra, ml.params, 20_000,
                            seed_sequence(11, STREAM_PRIOR, 0))
        return (rep1 == rep2 and 0.0 < rep1.lambda_pl < 1.0
                and 0.0 <= rep1.size_pl <= 1.0
                and 0.0 < rep1.credibility_pl <= 1.0)

    return [
        ("sic-identities", sic_identities),
        ("tetra-identities", tetra_identities),
        ("tetra-sum-rules", sum_rules),
        ("singlet-probabilities", singlet_probabilities),
        ("sic-purity-band", purity_band),
        ("moment-route-round-trip", moment_route),
        ("li-xi-sic", lambda: _round_trip(sic, "xi")),
        ("li-moments-sic", lambda: _round_trip(sic, "moments")),
        ("li-xi-tetra", lambda: _round_trip(tetra, "xi")),
        ("li-moments-tetra", lambda: _round_trip(tetra, "moments")),
        ("count-determinism", count_determinism),
        ("plausibility-replay", plausibility_replay),
    ]


def cmd_selftest(args):
    failures = 0
    for name, fn in _selftest_checks():
        try:
            ok = fn()
        except Exception as exc:
            ok = False
            if args.verbose:
                print(f"     {name}: {exc!r}", file=sys.stderr)
        print(f"{'ok  ' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 1


# --------------------------------------------------------------------------
# Entry point

def _add_common(sub, out=True):
    if out:
        sub.add_argument("--out", metavar="DIR",
                         help="output directory (default: stdout)")
        sub.add_argument("--format", choices=("csv", "json"),
                         help="output format")
    sub.add_argument("--threads", type=int, metavar="K",
                     help="worker count (default: all cores); results do "
                          "not depend on it")
    sub.add_argument("--seed", type=int, metavar="U64",
                     help="master seed (overrides the config for simulate)")
    sub.add_argument("--verbose", action="store_true",
                     help="progress messages on stderr")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pairtomo",
        description="Two-state qubit-pair source simulation and estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate",
                       help="run a config-driven simulated experiment batch")
    p.add_argument("--config", required=True, metavar="PATH",
                   help="JSON experiment config")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate",
                       help="reconstruct the source from a counts file")
    p.add_argument("counts", metavar="COUNTS_CSV")
    p.add_argument("--povm", required=True, choices=("sic", "tetra"))
    p.add_argument("--estimator", action="append",
                   choices=ESTIMATOR_NAMES, metavar="NAME",
                   help="repeatable; default li-xi")
    _add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("plausible",
                       help="plausible-region report for a counts file")
    p.add_argument("counts", metavar="COUNTS_CSV")
    p.add_argument("--povm", required=True, choices=("sic", "tetra"))
    p.add_argument("--m", type=int, default=DEFAULT_M,
                   help="prior sample size (default 1e7)")
    _add_common(p)
    p.set_defaults(func=cmd_plausible)

    p = sub.add_parser("asymptotics",
                       help="large-N rescaled series from a result table")
    p.add_argument("results", metavar="RESULTS_FILE",
                   help="results.csv or results.json from simulate")
    _add_common(p)
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("selftest", help="run the analytic invariant suite")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
