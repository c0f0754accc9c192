"""Command-line entry point: ``opioid-nlp <subcommand> [options]``.

Settings come from an optional ``key = value`` config file and are
overridden by flags. Every run writes ``manifest_<subcommand>.json`` next to
its outputs (settings, their hash, seeds and sha256 of every input and
output). Progress goes to stderr; machine-readable results only go to files.

Exit codes: 0 success, 1 evaluation gate failed, 2 usage or config error,
3 data error (missing or malformed inputs).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import hashlib
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .cascade import (
    CascadeClassifier,
    DocumentClassification,
    PatientNlpStatus,
    SnippetClassification,
    classification_report,
    classify_corpus,
)
from .cohort import (
    ENCOUNTER_ORIGINS,
    GroupAssignment,
    IcdCodeSet,
    assign_groups,
    build_comparison_tables,
    check_partition,
    derive_variables,
    flag_icd_oud,
    group_sizes,
    load_comorbidity_map,
    positive_note_profile,
    write_comparison_csv,
    write_profile_csvs,
)
from .corpus import RECORD_FILES, CorpusError, ingest_corpus
from .features import DEFAULT_MAX_BIGRAMS, DEFAULT_MAX_UNIGRAMS, DEFAULT_MIN_DF
from .learner import DEFAULT_EPOCHS, DEFAULT_LAMBDA, ModelError, load_model, save_model, split_train_test
from .lexicon import DEFAULT_WINDOW_RADIUS, LexiconError, Snippet, extract_snippets, load_lexicon
from .metrics import DEFAULT_GATE, METRIC_NAMES, compute_metrics, confusion
from .rules import RuleError, load_rule_library
from .synth import SynthConfig, SynthConfigError, generate_synthetic_corpus, write_synthetic

logger = logging.getLogger("opioid_nlp")

EXIT_OK, EXIT_GATE, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
COMMANDS = ("synth", "extract", "train", "classify", "evaluate", "cohort", "report")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    # paths
    corpus_dir: str | None = None
    output_dir: str | None = None
    lexicon: str | None = None
    rules: str | None = None
    model: str | None = None
    labels: str | None = None
    predictions: str | None = None
    split: str | None = None
    classifications_dir: str | None = None
    assignments: str | None = None
    comorbidity_map: str | None = None
    # settings
    seed: int = 0
    n_patients: int = 1200
    window_radius: int = DEFAULT_WINDOW_RADIUS
    max_unigrams: int = DEFAULT_MAX_UNIGRAMS
    max_bigrams: int = DEFAULT_MAX_BIGRAMS
    min_df: int = DEFAULT_MIN_DF
    train_fraction: float = 0.8
    lam: float = DEFAULT_LAMBDA
    epochs: int = DEFAULT_EPOCHS
    gate: float = DEFAULT_GATE
    workers: int = 1
    explain: bool = False
    dump_vocab: bool = False
    encounter_origin: str = "index"
    equal_var: bool = False
    concurrent_window_days: int = 0
    top_k: int = 25
    study_start: str = "2012-01-01"
    study_end: str = "2019-12-31"
    icd9_codes: str = "304.00,304.70,305.50"
    icd10_prefixes: str = "F11"

    PATH_FIELDS = ("corpus_dir", "output_dir", "lexicon", "rules", "model", "labels", "predictions", "split",
                   "classifications_dir", "assignments", "comorbidity_map")

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise UsageError(msg)

        need(self.window_radius >= 1, "window_radius must be >= 1")
        need(self.max_unigrams >= 0 and self.max_bigrams >= 0, "vocabulary caps must be >= 0")
        need(self.min_df >= 1, "min_df must be >= 1")
        need(0.0 < self.train_fraction < 1.0, "train_fraction must lie in (0, 1)")
        need(self.lam > 0, "lam must be positive")
        need(self.epochs >= 1, "epochs must be >= 1")
        need(0.0 <= self.gate <= 1.0, "gate must lie in [0, 1]")
        need(self.workers >= 1, "workers must be >= 1")
        need(self.n_patients >= 1, "n_patients must be >= 1")
        need(self.top_k >= 1, "top_k must be >= 1")
        need(self.concurrent_window_days >= 0, "concurrent_window_days must be >= 0")
        need(self.encounter_origin in ENCOUNTER_ORIGINS, f"encounter_origin must be one of {ENCOUNTER_ORIGINS}")
        start, end = self.study_window
        need(start <= end, "study_start must not be after study_end")

    @property
    def study_window(self) -> tuple[dt.date, dt.date]:
        try:
            return dt.date.fromisoformat(self.study_start), dt.date.fromisoformat(self.study_end)
        except ValueError as exc:
            raise UsageError(f"bad study window date: {exc}") from exc

    @property
    def icd_codes(self) -> IcdCodeSet:
        return IcdCodeSet(frozenset(_split_list(self.icd9_codes)), frozenset(_split_list(self.icd10_prefixes)))

    def settings(self) -> dict[str, Any]:
        """Everything except paths; paths are captured as input checksums instead."""
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name not in self.PATH_FIELDS}


def _split_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _coerce(name: str, raw: str) -> Any:
    kind = {f.name: f.type for f in dataclasses.fields(RunConfig)}[name]
    if "bool" in kind:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"config key {name!r}: expected a boolean, got {raw!r}")
    try:
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError as exc:
        raise UsageError(f"config key {name!r}: {exc}") from exc
    return raw.strip()


def read_config_file(path) -> dict[str, Any]:
    """Parse ``key = value`` lines; ``#`` starts a comment line."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for f in dataclasses.fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# manifests and io helpers

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class Run:
    """Collects inputs and outputs of one subcommand for its manifest."""

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.inputs: dict[str, str] = {}
        self.outputs: list[Path] = []
        self.extra: dict[str, Any] = {}
        self.out_dir = Path(_require(cfg, "output_dir"))
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def add_input(self, role: str, path) -> Path:
        path = Path(path)
        if not path.exists():
            raise DataError(f"missing input for {role}: {path}")
        if path.is_dir():
            for child in sorted(p for p in path.iterdir() if p.is_file()):
                self.inputs[f"{role}/{child.name}"] = sha256_file(child)
        else:
            self.inputs[role] = sha256_file(path)
        return path

    def add_bundled(self, role: str, filename: str) -> None:
        data = resources.files("opioid_nlp").joinpath(f"data/{filename}").read_bytes()
        self.inputs[role] = hashlib.sha256(data).hexdigest()

    def output(self, name: str) -> Path:
        path = self.out_dir / name
        self.outputs.append(path)
        return path

    def write_manifest(self) -> Path:
        settings = self.cfg.settings()
        manifest = {
            "command": self.command,
            "version": __version__,
            "config": settings,
            "config_hash": hashlib.sha256(_canonical(settings).encode()).hexdigest(),
            "seeds": {"seed": self.cfg.seed},
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {p.name: sha256_file(p) for p in sorted(set(self.outputs)) if p.exists()},
        }
        manifest.update(self.extra)
        path = self.out_dir / f"manifest_{self.command}.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        return path


def _require(cfg: RunConfig, name: str) -> str:
    value = getattr(cfg, name)
    if not value:
        raise UsageError(f"missing required setting --{name.replace('_', '-')}")
    return value


def write_jsonl(path, rows) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
    return rows


def _lexicon(run: Run):
    if run.cfg.lexicon:
        return load_lexicon(run.add_input("lexicon", run.cfg.lexicon))
    run.add_bundled("lexicon", "lexicon.tsv")
    return load_lexicon()


def _rules(run: Run):
    if run.cfg.rules:
        return load_rule_library(run.add_input("rules", run.cfg.rules))
    run.add_bundled("rules", "rules.tsv")
    return load_rule_library()


def _corpus(run: Run):
    path = run.add_input("corpus", _require(run.cfg, "corpus_dir"))
    if not (path / RECORD_FILES["notes"][0]).exists():
        raise DataError(f"{path} has no {RECORD_FILES['notes'][0]}")
    return ingest_corpus(path, study_window=run.cfg.study_window)


def _labels(run: Run) -> dict[str, str]:
    path = run.add_input("labels", _require(run.cfg, "labels"))
    labels = {}
    for rec in read_jsonl(path):
        if rec.get("kind", "snippet") != "snippet":
            continue
        try:
            labels[rec["snippet_id"]] = rec["label"]
        except KeyError as exc:
            raise DataError(f"{path}: label record without {exc}") from exc
    return labels


def _extract(corpus, lexicon, radius) -> list[Snippet]:
    return [s for note in sorted(corpus.notes, key=lambda n: n.note_id) for s in extract_snippets(note, lexicon, radius)]


def _rate(n: int, seconds: float) -> float:
    return n / max(seconds, 1e-9)


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(run: Run) -> int:
    cfg = run.cfg
    synth_cfg = SynthConfig(study_window=cfg.study_window)
    corpus, truth = generate_synthetic_corpus(cfg.seed, cfg.n_patients, synth_cfg)
    counts = write_synthetic(run.out_dir, corpus, truth)
    for kind, (filename, _cls) in RECORD_FILES.items():
        run.output(filename)
    run.output("ground_truth.jsonl")
    run.extra["counts"] = counts
    logger.info("wrote synthetic corpus: %s", ", ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


def cmd_extract(run: Run) -> int:
    corpus = _corpus(run)
    lexicon = _lexicon(run)
    start = time.perf_counter()
    snippets = _extract(corpus, lexicon, run.cfg.window_radius)
    elapsed = time.perf_counter() - start
    n = write_jsonl(run.output("snippets.jsonl"), (s.to_dict() for s in snippets))
    run.extra["counts"] = {"notes": len(corpus.notes), "snippets": n}
    logger.info("extracted %d snippets from %d notes (%.0f notes/s, %.0f snippets/s)",
                n, len(corpus.notes), _rate(len(corpus.notes), elapsed), _rate(n, elapsed))
    return EXIT_OK


def cmd_train(run: Run) -> int:
    cfg = run.cfg
    corpus = _corpus(run)
    lexicon = _lexicon(run)
    library = _rules(run)
    labels = _labels(run)
    snippets = _extract(corpus, lexicon, cfg.window_radius)
    missing = [s.snippet_id for s in snippets if s.snippet_id not in labels]
    if missing:
        raise DataError(f"{len(missing)} snippets have no label, e.g. {missing[:3]}")
    y = [labels[s.snippet_id] for s in snippets]
    train_idx, test_idx = split_train_test(snippets, y, cfg.train_fraction, cfg.seed)
    start = time.perf_counter()
    clf = CascadeClassifier(library, lam=cfg.lam, epochs=cfg.epochs, random_state=cfg.seed,
                            max_unigrams=cfg.max_unigrams, max_bigrams=cfg.max_bigrams, min_df=cfg.min_df)
    clf.fit([snippets[i] for i in train_idx], [y[i] for i in train_idx])
    logger.info("trained on %d snippets in %.2fs; final objective %.6f",
                len(train_idx), time.perf_counter() - start, clf.objective_curve_[-1])
    save_model(clf.model_, run.output("model.txt"))
    run.output("vocab.tsv").write_text(clf.model_.vocabulary.to_tsv(), encoding="utf-8")
    split = {
        "train_fraction": cfg.train_fraction,
        "seed": cfg.seed,
        "train": [snippets[i].snippet_id for i in train_idx],
        "test": [snippets[i].snippet_id for i in test_idx],
    }
    run.output("split.json").write_text(json.dumps(split, indent=1) + "\n", encoding="utf-8")
    run.extra["counts"] = {"snippets": len(snippets), "train": len(train_idx), "test": len(test_idx)}
    return EXIT_OK


def cmd_classify(run: Run) -> int:
    cfg = run.cfg
    corpus = _corpus(run)
    lexicon = _lexicon(run)
    library = _rules(run)
    model = load_model(run.add_input("model", _require(cfg, "model")))
    result = classify_corpus(corpus, lexicon, library, model, window_radius=cfg.window_radius,
                             workers=cfg.workers, explain=cfg.explain)
    write_jsonl(run.output("snippets.jsonl"), (c.to_dict() for c in result.snippets))
    write_jsonl(run.output("documents.jsonl"), (d.to_dict() for d in result.documents))
    write_jsonl(run.output("patients.jsonl"), (p.to_dict() for p in result.patients))
    if cfg.dump_vocab:
        run.output("vocab.tsv").write_text(model.vocabulary.to_tsv(), encoding="utf-8")
    run.extra["counts"] = classification_report(result)
    logger.info("classified %d snippets in %d notes: %.0f notes/s, %.0f snippets/s", len(result.snippets),
                result.notes_scanned, _rate(result.notes_scanned, result.seconds),
                _rate(len(result.snippets), result.seconds))
    return EXIT_OK


def cmd_evaluate(run: Run) -> int:
    cfg = run.cfg
    pred_path = run.add_input("predictions", _require(cfg, "predictions"))
    predicted = {}
    for rec in read_jsonl(pred_path):
        try:
            predicted[rec["snippet_id"]] = rec["label"]
        except KeyError as exc:
            raise DataError(f"{pred_path}: prediction record without {exc}") from exc
    gold = _labels(run)
    if cfg.split:
        test_ids = json.loads(run.add_input("split", cfg.split).read_text(encoding="utf-8"))["test"]
        keys = test_ids
    else:
        keys = sorted(gold)
    missing = [k for k in keys if k not in predicted or k not in gold]
    if missing:
        raise DataError(f"{len(missing)} evaluated snippets lack a prediction or label, e.g. {missing[:3]}")
    matrix = confusion({k: predicted[k] for k in keys}, {k: gold[k] for k in keys})
    report = compute_metrics(matrix, cfg.gate)
    with open(run.output("metrics.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value", "percent", "passes_gate"])
        for name in METRIC_NAMES:
            v = getattr(report, name)
            if v is None:
                w.writerow([name, "NA", "NA", 0])
            else:
                w.writerow([name, f"{v:.6f}", f"{100 * v:.1f}", int(v >= cfg.gate)])
        for cell in ("tp", "fp", "fn", "tn"):
            w.writerow([cell, getattr(matrix, cell), "", ""])
    run.extra["gate_passed"] = report.gate_passed
    values = ", ".join(f"{k}={'NA' if v is None else f'{100 * v:.1f}%'}" for k, v in report.values().items())
    logger.info("evaluated %d snippets: %s; gate %.2f %s", matrix.total, values, cfg.gate,
                "passed" if report.gate_passed else "FAILED")
    return EXIT_OK if report.gate_passed else EXIT_GATE


def _statuses(run: Run) -> list[PatientNlpStatus]:
    directory = run.add_input("classifications", _require(run.cfg, "classifications_dir"))
    path = directory / "patients.jsonl"
    if not path.exists():
        raise DataError(f"{directory} has no patients.jsonl")
    return [PatientNlpStatus.from_dict(r) for r in read_jsonl(path)]


def cmd_cohort(run: Run) -> int:
    cfg = run.cfg
    corpus = _corpus(run)
    statuses = _statuses(run)
    if cfg.comorbidity_map:
        cmap = load_comorbidity_map(run.add_input("comorbidity_map", cfg.comorbidity_map))
    else:
        run.add_bundled("comorbidity_map", "comorbidity_map.tsv")
        cmap = load_comorbidity_map()
    icd = flag_icd_oud(corpus.diagnoses, cfg.icd_codes, cfg.study_window)
    assignments = assign_groups([p.patient_id for p in corpus.patients], statuses, icd)
    sizes = check_partition(assignments, statuses)
    write_jsonl(run.output("assignments.jsonl"), (a.to_dict() for a in assignments))
    variables = derive_variables(corpus, assignments, cmap, cfg.encounter_origin, cfg.concurrent_window_days)
    tables = build_comparison_tables(variables, assignments, equal_var=cfg.equal_var)
    write_comparison_csv(run.output("table4.csv"), tables["table4"], sizes)
    write_comparison_csv(run.output("table5.csv"), tables["table5"], sizes)
    run.extra["group_sizes"] = sizes
    run.extra["origin_fallback_patients"] = sum(v.origin_fallback for v in variables)
    logger.info("cohort of %d: %s", len(assignments), ", ".join(f"{k}={v}" for k, v in sizes.items()))
    return EXIT_OK


def cmd_report(run: Run) -> int:
    cfg = run.cfg
    directory = run.add_input("classifications", _require(cfg, "classifications_dir"))
    for name in ("snippets.jsonl", "documents.jsonl", "patients.jsonl"):
        if not (directory / name).exists():
            raise DataError(f"{directory} has no {name}")
    snippets = [SnippetClassification.from_dict(r) for r in read_jsonl(directory / "snippets.jsonl")]
    documents = [DocumentClassification.from_dict(r) for r in read_jsonl(directory / "documents.jsonl")]
    statuses = [PatientNlpStatus.from_dict(r) for r in read_jsonl(directory / "patients.jsonl")]
    lexicon = _lexicon(run)
    counts = classification_report(documents)
    if counts["positive_snippets"] + counts["negative_snippets"] != counts["total_snippets"] \
            or counts["total_snippets"] != len(snippets):
        raise DataError("snippet counts do not add up across snippets.jsonl and documents.jsonl")
    start, end = cfg.study_window
    with open(run.output("table2.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["element", "total"])
        w.writerow([f"years ({start.year}-{end.year})", end.year - start.year + 1])
        w.writerow(["key_phrases", len(lexicon)])
        w.writerow(["total_notes", counts["total_notes"]])
        w.writerow(["total_snippets", counts["total_snippets"]])
        w.writerow(["positive_snippets", counts["positive_snippets"]])
        w.writerow(["negative_snippets", counts["negative_snippets"]])
        w.writerow(["mean_snippets_per_document", f"{counts['mean_snippets_per_note']:.2f}"])
    assignments = [GroupAssignment.from_dict(r)
                   for r in read_jsonl(run.add_input("assignments", _require(cfg, "assignments")))]
    check_partition(assignments, statuses)
    profiles = positive_note_profile(statuses, snippets, assignments, cfg.top_k)
    for path in write_profile_csvs(run.out_dir, profiles):
        run.outputs.append(path)
    run.extra["counts"] = counts
    run.extra["group_sizes"] = group_sizes(assignments)
    return EXIT_OK


HANDLERS: dict[str, Callable[[Run], int]] = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "train": cmd_train,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
    "cohort": cmd_cohort,
    "report": cmd_report,
}


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("shared settings (override the config file)")
    g.add_argument("--config", help="key = value settings file")
    g.add_argument("--out", dest="output_dir", help="output directory")
    g.add_argument("--corpus", dest="corpus_dir", help="corpus directory (notes.jsonl, patients.jsonl, ...)")
    g.add_argument("--lexicon", help="key-phrase TSV (default: bundled)")
    g.add_argument("--rules", help="rule library TSV (default: bundled)")
    g.add_argument("--seed", type=int)
    g.add_argument("--window-radius", dest="window_radius", type=int)
    g.add_argument("--study-start", dest="study_start")
    g.add_argument("--study-end", dest="study_end")
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="opioid-nlp", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="subcommand", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus with ground truth")
    p.add_argument("--n-patients", dest="n_patients", type=int)

    sub.add_parser("extract", parents=[common], help="write key-phrase snippets to snippets.jsonl")

    p = sub.add_parser("train", parents=[common], help="train the SVM on labelled snippets")
    p.add_argument("--labels", help="JSONL with snippet_id and label (e.g. ground_truth.jsonl)")
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--max-unigrams", dest="max_unigrams", type=int)
    p.add_argument("--max-bigrams", dest="max_bigrams", type=int)
    p.add_argument("--min-df", dest="min_df", type=int)

    p = sub.add_parser("classify", parents=[common], help="classify every snippet in a corpus")
    p.add_argument("--model")
    p.add_argument("--workers", type=int)
    p.add_argument("--explain", action="store_const", const=True, help="record every matching rule per snippet")
    p.add_argument("--dump-vocab", dest="dump_vocab", action="store_const", const=True,
                   help="also write the model vocabulary to vocab.tsv")

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against gold labels")
    p.add_argument("--predictions", help="snippets.jsonl from classify")
    p.add_argument("--labels", help="gold labels JSONL")
    p.add_argument("--split", help="split.json from train; restricts scoring to the test part")
    p.add_argument("--gate", type=float)

    p = sub.add_parser("cohort", parents=[common], help="assign groups and build comparison tables")
    p.add_argument("--classifications", dest="classifications_dir", help="classify output directory")
    p.add_argument("--encounter-origin", dest="encounter_origin", choices=ENCOUNTER_ORIGINS)
    p.add_argument("--comorbidity-map", dest="comorbidity_map")
    p.add_argument("--equal-var", dest="equal_var", action="store_const", const=True,
                   help="pooled-variance t test instead of Welch")
    p.add_argument("--concurrent-window-days", dest="concurrent_window_days", type=int)

    p = sub.add_parser("report", parents=[common], help="document counts and positive-note profiles")
    p.add_argument("--classifications", dest="classifications_dir", help="classify output directory")
    p.add_argument("--assignments", help="assignments.jsonl from cohort")
    p.add_argument("--top-k", dest="top_k", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        run = Run(args.command, cfg)
        code = HANDLERS[args.command](run)
        run.write_manifest()
        return code
    except UsageError as exc:
        print(f"opioid-nlp {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CorpusError, ModelError, RuleError, LexiconError, SynthConfigError,
            FileNotFoundError, AssertionError, ValueError) as exc:
        print(f"opioid-nlp {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
