"""Command-line entry point: build-corpus, train, generate, evaluate,
copy-baseline. Every run writes a manifest with the resolved config and
content hashes of its inputs into the output directory."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import yaml

from . import __version__
from .backend.base import TrainConfig
from .backend.checkpoint import (
    load_checkpoint,
    load_training_state,
    save_checkpoint,
    save_training_state,
)
from .backend.heuristic import EchoGenerator, OverlapEntailmentClassifier, RuleSplitGenerator
from .backend.toy import ToyConfig
from .errors import BackendUnavailableError, InputError, Rdf2TextError, UsageError
from .seeding import substream_seed

logger = logging.getLogger("rdf2text")


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(out_dir, subcommand: str, resolved: dict, input_paths) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": __version__,
        "subcommand": subcommand,
        "config": resolved,
        "inputs": {str(p): _sha256(p) for p in input_paths if p and Path(p).is_file()},
    }
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def resolve_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Precedence: explicit flags > config file > defaults."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as handle:
            file_config = yaml.safe_load(handle) or {}
        if not isinstance(file_config, dict):
            raise InputError("config file must hold a mapping")
        unknown = set(file_config) - set(defaults)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        resolved.update(file_config)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _make_nli(spec: str):
    if spec == "none":
        return None
    if spec == "overlap":
        return OverlapEntailmentClassifier()
    if spec.startswith("pretrained:"):
        from .backend.pretrained import PretrainedEntailmentClassifier

        return PretrainedEntailmentClassifier(spec.split(":", 1)[1])
    raise InputError(f"unknown NLI backend {spec!r}")


def _make_split_model(spec: str):
    if spec == "rule":
        return RuleSplitGenerator()
    if spec == "echo":
        return EchoGenerator()
    model, _ = load_checkpoint(spec)
    return model


def _make_coref(spec: str):
    from .corpusbuilder import PronounCorefBackend

    if spec == "none":
        return None
    if spec == "pronoun":
        return PronounCorefBackend()
    raise InputError(f"unknown coref backend {spec!r}")


BUILD_DEFAULTS = {
    "dump": None,
    "out_dir": None,
    "quota": 100,
    "seed": 13,
    "dev_size": 0,
    "test_size": 0,
    "workers": 1,
    "split_model": "rule",
    "coref": "pronoun",
    "nli": "overlap",
}


def cmd_build_corpus(args) -> int:
    from .corpusbuilder import CorpusBuildConfig, LengthBuckets, build_corpus

    resolved = resolve_config(args, BUILD_DEFAULTS)
    if not resolved["dump"] or not resolved["out_dir"]:
        raise UsageError("build-corpus needs --dump and --out-dir")
    config = CorpusBuildConfig(
        out_dir=resolved["out_dir"],
        split_model=_make_split_model(resolved["split_model"]),
        coref_backend=_make_coref(resolved["coref"]),
        nli=_make_nli(resolved["nli"]),
        buckets=LengthBuckets(quota=resolved["quota"]),
        seed=substream_seed(resolved["seed"], "corpus"),
        dev_size=resolved["dev_size"],
        test_size=resolved["test_size"],
        workers=resolved["workers"],
    )
    stats = build_corpus(resolved["dump"], config)
    write_manifest(resolved["out_dir"], "build-corpus", resolved, [resolved["dump"]])
    logger.info("built corpus: %d examples, %d kept", stats["n_examples"], stats["n_kept"])
    return 0


TRAIN_DEFAULTS = {
    "which": None,
    "corpus": None,
    "out_dir": None,
    "variant": None,
    "tier": "toy",
    "seed": 13,
    "epochs": None,
    "learning_rate": None,
    "batch_size": None,
    "hidden_size": 64,
    "num_layers": 2,
    "max_length": 256,
    "resume": False,
}


def _train_config(resolved: dict) -> TrainConfig:
    config = TrainConfig.toy(seed=substream_seed(resolved["seed"], "train", resolved["which"]))
    if resolved["epochs"] is not None:
        config.epochs = resolved["epochs"]
    if resolved["learning_rate"] is not None:
        config.learning_rate = resolved["learning_rate"]
    if resolved["batch_size"] is not None:
        config.batch_size = resolved["batch_size"]
    return config


def cmd_train(args) -> int:
    from .aggregation import train_aggregation
    from .compression import PCVariant, train_pc
    from .corpusbuilder import load_corpus, train_split_model
    from .ordering import train_ordering

    resolved = resolve_config(args, TRAIN_DEFAULTS)
    for key in ("which", "corpus", "out_dir"):
        if not resolved[key]:
            raise UsageError(f"train needs --{key.replace('_', '-')}")
    if resolved["tier"] != "toy":
        raise BackendUnavailableError(
            "pretrained-tier training is not bundled; bind checkpoints via the "
            "rdf2text.backend.pretrained wrappers instead"
        )
    which = resolved["which"]
    if which == "pc" and not resolved["variant"]:
        raise UsageError("train --which pc requires --variant (pc, pc_agg, pc_ord_agg)")
    train_cfg = _train_config(resolved)
    model_cfg = ToyConfig(
        hidden_size=resolved["hidden_size"],
        num_layers=resolved["num_layers"],
        max_length=resolved["max_length"],
    )
    out_dir = resolved["out_dir"]
    resume_state = load_training_state(out_dir) if resolved["resume"] else None
    optimizer_state = resume_state["optimizer"] if resume_state else None
    extra = {"trained_on": str(resolved["corpus"]), "train_config": train_cfg.as_dict()}

    if which == "sr":
        with open(resolved["corpus"], encoding="utf-8") as handle:
            records = [json.loads(line) for line in handle if line.strip()]
        model = train_split_model(records, train_cfg, cfg=model_cfg)
    else:
        corpus = load_corpus(resolved["corpus"])
        if which == "ord":
            if resolved["resume"] and resume_state is not None:
                model, _ = load_checkpoint(out_dir)
                model.fit([ex.sentences for ex in corpus], train_cfg,
                          optimizer_state=optimizer_state)
            else:
                model = train_ordering(corpus, train_cfg, cfg=model_cfg)
        elif which == "agg":
            model = train_aggregation(corpus, train_cfg, cfg=model_cfg)
        elif which == "pc":
            variant = PCVariant(resolved["variant"])
            extra["pc_variant"] = variant.value
            model = train_pc(corpus, variant, train_cfg, cfg=model_cfg)
        else:
            raise InputError(f"unknown training target {which!r}")
    save_checkpoint(out_dir, model, extra=extra)
    if getattr(model, "last_optimizer_state", None) is not None:
        save_training_state(out_dir, model.last_optimizer_state, epoch=train_cfg.epochs)
    write_manifest(out_dir, "train", resolved, [resolved["corpus"]])
    history = getattr(model, "train_history", [])
    if history:
        logger.info("final training loss: %.4f", history[-1])
    return 0


GENERATE_DEFAULTS = {
    "dataset": None,
    "templates": None,
    "out_dir": None,
    "stages": 3,
    "pc_model": None,
    "ordering_model": None,
    "aggregation_model": None,
    "dataset_id": "dataset",
    "corpus_variant": "full",
    "seed": 13,
    "allow_errors": False,
}


def cmd_generate(args) -> int:
    from .pipeline import Pipeline, PipelineConfig, Stages, batch_generate

    resolved = resolve_config(args, GENERATE_DEFAULTS)
    for key in ("dataset", "templates", "out_dir", "pc_model"):
        if not resolved[key]:
            raise UsageError(f"generate needs --{key.replace('_', '-')}")
    config = PipelineConfig(
        stages=Stages(resolved["stages"]),
        pc_model=resolved["pc_model"],
        templates=resolved["templates"],
        ordering_model=resolved["ordering_model"],
        aggregation_model=resolved["aggregation_model"],
        dataset_id=resolved["dataset_id"],
        corpus_variant=resolved["corpus_variant"],
        seed=resolved["seed"],
    )
    pipeline = Pipeline.from_config(config)
    out_dir = Path(resolved["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = batch_generate(resolved["dataset"], pipeline, out_dir / "outputs.jsonl")
    with open(out_dir / "summary.json", "w", encoding="utf-8") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    write_manifest(out_dir, "generate", resolved,
                   [resolved["dataset"], resolved["templates"]])
    logger.info("generated %d/%d records", summary["n_ok"], summary["n_records"])
    if summary["n_errors"] and not resolved["allow_errors"]:
        return 1
    return 0


EVALUATE_DEFAULTS = {
    "mode": "text",
    "outputs": None,
    "references": None,
    "predicted": None,
    "gold": None,
    "corpus": None,
    "facts": None,
    "templates": None,
    "out_dir": None,
    "nli": "none",
    "system_tag": "system",
    "details": False,
    "ordering_model": None,
    "aggregation_model": None,
    "pc_model": None,
    "seed": 13,
    "meteor_cmd": None,
}


def _read_jsonl(path) -> list:
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def _field(record: dict, *names):
    for name in names:
        if name in record:
            return record[name]
    raise InputError(f"record is missing any of {names}: {sorted(record)}")


def cmd_evaluate(args) -> int:
    from .evalsuite import ExternalMeteorScorer, evaluate_system, intrinsic_eval
    from .ordering import eval_ordering

    resolved = resolve_config(args, EVALUATE_DEFAULTS)
    if not resolved["out_dir"]:
        raise UsageError("evaluate needs --out-dir")
    out_dir = Path(resolved["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = []
    mode = resolved["mode"]
    if mode == "text":
        if not resolved["outputs"] or not resolved["references"]:
            raise UsageError("evaluate --mode text needs --outputs and --references")
        inputs += [resolved["outputs"], resolved["references"]]
        outputs = [_field(r, "output") for r in _read_jsonl(resolved["outputs"])]
        references = [_field(r, "references", "reference")
                      for r in _read_jsonl(resolved["references"])]
        references = [[r] if isinstance(r, str) else list(r) for r in references]
        fact_sets = None
        nli = None
        if resolved["facts"]:
            inputs.append(resolved["facts"])
            fact_sets = [_field(r, "facts") for r in _read_jsonl(resolved["facts"])]
            nli = _make_nli(resolved["nli"])
            if nli is None:
                raise BackendUnavailableError(
                    "semantic accuracy metrics need --nli overlap or pretrained:<name>"
                )
        scorer = ExternalMeteorScorer(resolved["meteor_cmd"]) if resolved["meteor_cmd"] else None
        details = [] if resolved["details"] else None
        report = evaluate_system(outputs, references, fact_sets, nli,
                                 system_tag=resolved["system_tag"],
                                 meteor_scorer=scorer, details=details)
        payload = report.as_dict()
        if details is not None:
            with open(out_dir / "details.tsv", "w", encoding="utf-8") as handle:
                handle.write("index\tomissions\tn_facts\thallucinated\n")
                for row in details:
                    handle.write(f"{row['index']}\t{row['omissions']}\t"
                                 f"{row['n_facts']}\t{int(row['hallucinated'])}\n")
    elif mode == "plan":
        if not resolved["predicted"] or not resolved["gold"]:
            raise UsageError("evaluate --mode plan needs --predicted and --gold")
        inputs += [resolved["predicted"], resolved["gold"]]
        predicted_records = _read_jsonl(resolved["predicted"])
        gold_records = _read_jsonl(resolved["gold"])
        predicted = [_field(r, "order") for r in predicted_records]
        gold = [_field(r, "order") for r in gold_records]
        payload = eval_ordering(predicted, gold)
        if all("delimiters" in r for r in predicted_records) and all(
            "delimiters" in r for r in gold_records
        ):
            from .aggregation import eval_aggregation

            payload["aggregation"] = eval_aggregation(
                [r["delimiters"] for r in predicted_records],
                [r["delimiters"] for r in gold_records],
            )
    elif mode == "intrinsic":
        from .corpusbuilder import load_corpus

        if not resolved["corpus"]:
            raise UsageError("evaluate --mode intrinsic needs --corpus")
        inputs.append(resolved["corpus"])
        corpus = load_corpus(resolved["corpus"])
        models = {}
        for key in ("ordering_model", "aggregation_model", "pc_model"):
            if resolved[key]:
                models[key], _ = load_checkpoint(resolved[key])
        scorer = ExternalMeteorScorer(resolved["meteor_cmd"]) if resolved["meteor_cmd"] else None
        payload = intrinsic_eval(
            corpus,
            ordering_model=models.get("ordering_model"),
            aggregation_model=models.get("aggregation_model"),
            pc_model=models.get("pc_model"),
            seed=resolved["seed"],
            meteor_scorer=scorer,
        )
    else:
        raise InputError(f"unknown evaluation mode {mode!r}")
    with open(out_dir / "report.json", "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    write_manifest(out_dir, "evaluate", resolved, inputs)
    logger.info("wrote %s", out_dir / "report.json")
    return 0


COPY_DEFAULTS = {
    "dataset": None,
    "templates": None,
    "out_dir": None,
    "dataset_id": "dataset",
}


def cmd_copy_baseline(args) -> int:
    from .core import Triple, load_templates
    from .pipeline import copy_baseline

    resolved = resolve_config(args, COPY_DEFAULTS)
    for key in ("dataset", "templates", "out_dir"):
        if not resolved[key]:
            raise UsageError(f"copy-baseline needs --{key.replace('_', '-')}")
    registry = load_templates(resolved["templates"], resolved["dataset_id"])
    out_dir = Path(resolved["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    n_errors = 0
    with open(resolved["dataset"], encoding="utf-8") as src, \
            open(out_dir / "outputs.jsonl", "w", encoding="utf-8") as dst:
        for line_no, line in enumerate(src, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            record_id = str(record.get("id", line_no))
            try:
                triples = [Triple.from_dict(t) for t in record["triples"]]
                output = copy_baseline(triples, registry)
                dst.write(json.dumps({"id": record_id, "output": output},
                                     sort_keys=True, ensure_ascii=False))
            except Rdf2TextError as exc:
                n_errors += 1
                dst.write(json.dumps({"id": record_id, "error": str(exc)}, sort_keys=True))
            dst.write("\n")
    write_manifest(out_dir, "copy-baseline", resolved,
                   [resolved["dataset"], resolved["templates"]])
    return 1 if n_errors else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdf2text")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-corpus", help="build the synthetic parallel corpus")
    p.add_argument("--config")
    p.add_argument("--dump", required=False)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--quota", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dev-size", dest="dev_size", type=int)
    p.add_argument("--test-size", dest="test_size", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--split-model", dest="split_model")
    p.add_argument("--coref", choices=["pronoun", "none"])
    p.add_argument("--nli")
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("train", help="train a pipeline model on a corpus")
    p.add_argument("--config")
    p.add_argument("--which", choices=["sr", "ord", "agg", "pc"])
    p.add_argument("--corpus")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--variant", choices=["pc", "pc_agg", "pc_ord_agg"])
    p.add_argument("--tier", choices=["toy", "pretrained"])
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--hidden-size", dest="hidden_size", type=int)
    p.add_argument("--num-layers", dest="num_layers", type=int)
    p.add_argument("--max-length", dest="max_length", type=int)
    p.add_argument("--resume", action="store_const", const=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="run the pipeline over a dataset")
    p.add_argument("--config")
    p.add_argument("--dataset")
    p.add_argument("--templates")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--stages", type=int, choices=[1, 2, 3])
    p.add_argument("--pc-model", dest="pc_model")
    p.add_argument("--ordering-model", dest="ordering_model")
    p.add_argument("--aggregation-model", dest="aggregation_model")
    p.add_argument("--dataset-id", dest="dataset_id")
    p.add_argument("--corpus-variant", dest="corpus_variant", choices=["full", "filtered"])
    p.add_argument("--seed", type=int)
    p.add_argument("--allow-errors", dest="allow_errors", action="store_const", const=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score outputs, plans, or modules")
    p.add_argument("--config")
    p.add_argument("--mode", choices=["text", "plan", "intrinsic"])
    p.add_argument("--outputs")
    p.add_argument("--references")
    p.add_argument("--predicted")
    p.add_argument("--gold")
    p.add_argument("--corpus")
    p.add_argument("--facts")
    p.add_argument("--templates")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--nli")
    p.add_argument("--system-tag", dest="system_tag")
    p.add_argument("--details", action="store_const", const=True)
    p.add_argument("--ordering-model", dest="ordering_model")
    p.add_argument("--aggregation-model", dest="aggregation_model")
    p.add_argument("--pc-model", dest="pc_model")
    p.add_argument("--seed", type=int)
    p.add_argument("--meteor-cmd", dest="meteor_cmd")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("copy-baseline", help="concatenate template facts, no models")
    p.add_argument("--config")
    p.add_argument("--dataset")
    p.add_argument("--templates")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--dataset-id", dest="dataset_id")
    p.set_defaults(func=cmd_copy_baseline)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        logger.error("%s", exc)
        return 2
    except Rdf2TextError as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
