"""Command-line entry point.

Subcommands: train-stage1, train-stage2, extract, probe, inject, verify,
sample. Every command is a pure function of (config, seed, inputs): rerunning
with the same arguments produces byte-identical outputs. Exit codes: 0
success, 1 property failure, 2 usage or config error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys

import numpy as np

from .audio import AudioBuffer, WavFormatError, read_wav, write_wav
from .extract import (
    ExtractionConfig,
    cache_path,
    read_features,
    segment_and_stitch,
    tokenize,
    write_features,
)
from .harness import (
    MixingConditionConfig,
    ProbeConfig,
    SeparationInjectionConfig,
    SyntheticTaskSpec,
    TranscriptionInjectionConfig,
    extract_dataset_features,
    gen_tasks,
    run_mixing_experiment,
    run_probe_experiment,
    run_separation_injection,
    run_transcription_injection,
    train_foundation,
)
from .hashing import audio_hash, canonical_json, config_hash
from .modelio import load_prior, load_stage1, save_prior, save_stage1
from .ndgrad import ContractError, NumericalError
from .priors import (
    PriorModel,
    default_prior_configs,
    sample as sample_tokens,
    stub_conditioning,
    train_prior,
)
from .sqvae2 import (
    LEVEL_NAMES,
    ProgressiveSchedule,
    Sqvae2,
    Sqvae2Config,
    codebook_stats,
    train_stage1,
)
from .tokens import write_tokens
from .verify import run_verify

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _require_keys(section: dict, allowed: set, required: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(section)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def _load_config(path) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(canonical_json(obj))


def _load_clips(data_cfg: dict) -> tuple[np.ndarray, int]:
    _require_keys(data_cfg, {"task", "seed", "clip_samples", "sample_rate", "n_clips",
                             "wav_dir", "params"}, set(), "data")
    if "wav_dir" in data_cfg:
        paths = sorted(
            os.path.join(data_cfg["wav_dir"], p)
            for p in os.listdir(data_cfg["wav_dir"]) if p.endswith(".wav")
        )
        if not paths:
            raise ConfigError(f"no .wav files under {data_cfg['wav_dir']}")
        buffers = [read_wav(p) for p in paths]
        rate = buffers[0].sample_rate
        length = min(b.n_samples for b in buffers)
        length -= length % 128
        if length == 0:
            raise ConfigError("clips shorter than 128 samples")
        return np.stack([b.mono()[:length] for b in buffers]), rate
    spec = SyntheticTaskSpec(
        kind=data_cfg.get("task", "tagging"),
        seed=data_cfg.get("seed", 0),
        clip_samples=data_cfg.get("clip_samples", 1024),
        sample_rate=data_cfg.get("sample_rate", 4410),
        n_foundation=data_cfg.get("n_clips", 64),
        n_train=2, n_val=2, n_test=2,
        params=data_cfg.get("params", {}),
    )
    return gen_tasks(spec).splits["foundation"]["clips"], spec.sample_rate


# -- train-stage1 ----------------------------------------------------------------


def cmd_train_stage1(args) -> int:
    cfg = _load_config(args.config)
    _require_keys(cfg, {"model", "data", "train"}, {"data", "train"}, "config")
    model_cfg = Sqvae2Config.from_dict(cfg.get("model", {}))
    train_cfg = dict(cfg["train"])
    _require_keys(train_cfg, {"steps", "batch_size", "lr", "seed", "schedule"},
                  {"steps"}, "train")
    seed = args.seed if args.seed is not None else train_cfg.get("seed", 0)
    steps = args.steps if args.steps is not None else train_cfg["steps"]
    clips, rate = _load_clips(cfg["data"])
    model_cfg.sample_rate = rate
    model = Sqvae2(model_cfg, np.random.default_rng(np.random.PCG64(seed)))
    schedule = ProgressiveSchedule(**cfg["train"].get("schedule", {}))
    history = train_stage1(
        model, clips, steps=steps, batch_size=train_cfg.get("batch_size", 8),
        lr=train_cfg.get("lr", 1e-3), seed=seed, schedule=schedule,
    )
    os.makedirs(args.out, exist_ok=True)
    run_hash = config_hash({"config": cfg, "seed": seed, "steps": steps})
    save_stage1(os.path.join(args.out, "stage1.ckpt"), model, step=steps, seed=seed,
                extra={"run_config_hash": run_hash})
    stats = codebook_stats(model, clips)
    _write_json(os.path.join(args.out, "stage1-losses.json"), {
        "run_config_hash": run_hash, "history": history,
        "codebooks": {str(l): s for l, s in stats.items()},
        "final_recon_mse": model.reconstruction_mse(clips),
    })
    print(f"stage-1 checkpoint written to {args.out} (run {run_hash})")
    return EXIT_OK


# -- train-stage2 ----------------------------------------------------------------


def cmd_train_stage2(args) -> int:
    cfg = _load_config(args.config)
    _require_keys(cfg, {"priors", "data", "train", "levels"}, {"data", "train"}, "config")
    stage1, header = load_stage1(args.stage1)
    train_cfg = dict(cfg["train"])
    _require_keys(train_cfg, {"steps", "batch_size", "lr", "seed", "conditional"},
                  {"steps"}, "train")
    seed = args.seed if args.seed is not None else train_cfg.get("seed", 0)
    clips, rate = _load_clips(cfg["data"])
    conditional = train_cfg.get("conditional", False)
    dataset = []
    for clip in clips:
        tokens = stage1.tokenize(clip[None, :])
        cond = stub_conditioning(AudioBuffer(clip, rate)).vector if conditional else None
        dataset.append({"tokens": {l: s[0] for l, s in tokens.items()}, "cond": cond})
    pcfgs = default_prior_configs(codebook_sizes=stage1.cfg.codebook_sizes,
                                  **cfg.get("priors", {}))
    levels = cfg.get("levels", [1, 2, 3])
    os.makedirs(args.out, exist_ok=True)
    run_hash = config_hash({"config": cfg, "seed": seed, "stage1": header.get("run_config_hash", "")})
    curves = {}
    for level in levels:
        prior = PriorModel(pcfgs[level], np.random.default_rng(np.random.PCG64(seed + level)))
        history = train_prior(prior, dataset, steps=train_cfg["steps"],
                              batch_size=train_cfg.get("batch_size", 4),
                              lr=train_cfg.get("lr", 1e-3), seed=seed + 10 * level)
        name = LEVEL_NAMES[level]
        save_prior(os.path.join(args.out, f"prior-{name}.ckpt"), prior,
                   step=train_cfg["steps"], seed=seed, extra={"run_config_hash": run_hash})
        curves[name] = history
    _write_json(os.path.join(args.out, "stage2-losses.json"),
                {"run_config_hash": run_hash, "nll": curves})
    print(f"prior checkpoints written to {args.out} (run {run_hash})")
    return EXIT_OK


def _load_priors(priors_dir) -> dict[int, PriorModel]:
    priors = {}
    for level, name in LEVEL_NAMES.items():
        path = os.path.join(priors_dir, f"prior-{name}.ckpt")
        if os.path.exists(path):
            priors[level], _ = load_prior(path)
    if not priors:
        raise ConfigError(f"no prior checkpoints under {priors_dir}")
    return priors


# -- extract ----------------------------------------------------------------------


def cmd_extract(args) -> int:
    try:
        audio = read_wav(args.audio)
    except WavFormatError as exc:
        raise ConfigError(str(exc)) from exc
    stage1, _ = load_stage1(args.stage1)
    priors = _load_priors(args.priors)
    levels = tuple(args.levels.split(","))
    ecfg = ExtractionConfig(levels=levels, overlap=args.overlap,
                            conditional=args.cond == "stub")
    a_hash = audio_hash(audio.samples, audio.sample_rate)
    c_hash = config_hash({"extract": ecfg.to_dict(),
                          "taps": {l: priors[l].cfg.tap_layer for l in sorted(priors)}})
    cache_dir = args.cache_dir or os.environ.get("HQFEAT_CACHE")
    os.makedirs(args.out, exist_ok=True)
    done = {}
    if cache_dir:
        os.makedirs(cache_dir, exist_ok=True)
        for name in levels:
            level = {v: k for k, v in LEVEL_NAMES.items()}[name]
            cpath = cache_path(cache_dir, a_hash, c_hash, level)
            if os.path.exists(cpath):
                print(f"cache hit for level {name}")
                done[level], _ = read_features(cpath)
    missing = [n for n in levels if {v: k for k, v in LEVEL_NAMES.items()}[n] not in done]
    if missing:
        fresh = segment_and_stitch(audio, stage1, priors,
                                   ExtractionConfig(levels=tuple(missing),
                                                    overlap=args.overlap,
                                                    conditional=args.cond == "stub"),
                                   workers=args.workers)
        done.update(fresh)
    for level, seq in sorted(done.items()):
        out_path = os.path.join(args.out, f"features-{LEVEL_NAMES[level]}.ftr")
        write_features(out_path, seq, audio_hash=a_hash, config_hash=c_hash)
        if cache_dir:
            cpath = cache_path(cache_dir, a_hash, c_hash, level)
            if not os.path.exists(cpath):
                shutil.copyfile(out_path, cpath)
                shutil.copyfile(out_path + ".json", cpath + ".json")
        print(f"level {LEVEL_NAMES[level]}: {seq.frames} x {seq.width} -> {out_path}")
    return EXIT_OK


# -- probe / inject ------------------------------------------------------------------


def _prepare_experiment(cfg: dict, levels: tuple):
    _require_keys(cfg, {"task", "foundation", "extract", "probe", "experiment"},
                  {"task"}, "config")
    task_cfg = dict(cfg["task"])
    spec = SyntheticTaskSpec(**task_cfg)
    dataset = gen_tasks(spec)
    fnd = dict(cfg.get("foundation", {}))
    if "stage1" in fnd:
        stage1, _ = load_stage1(fnd["stage1"])
        priors = _load_priors(fnd["priors_dir"])
    else:
        stage1, priors, _ = train_foundation(
            dataset.splits["foundation"]["clips"], sample_rate=spec.sample_rate,
            seed=fnd.get("seed", 0),
            stage1_steps=fnd.get("stage1_steps", 800),
            prior_steps=fnd.get("prior_steps", 400),
            stage1_lr=fnd.get("stage1_lr", 1e-3),
            prior_lr=fnd.get("prior_lr", 2e-3),
            prior_kwargs=fnd.get("prior_kwargs", {}),
            conditional=fnd.get("conditional", False),
        )
    ex = dict(cfg.get("extract", {}))
    features = extract_dataset_features(
        dataset, stage1, priors, levels=ex.get("levels", list(levels)),
        conditional=ex.get("conditional", False), workers=ex.get("workers", 1),
    )
    return dataset, features


def _emit_report(report, out_dir, stem):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, f"{stem}.json"), "w") as fh:
        fh.write(report.to_json())
    with open(os.path.join(out_dir, f"{stem}.csv"), "w") as fh:
        fh.write(report.to_csv())
    print(f"report written to {out_dir}/{stem}.json")


def cmd_probe(args) -> int:
    cfg = _load_config(args.config)
    dataset, features = _prepare_experiment(cfg, levels=("top", "middle"))
    probe_cfg = ProbeConfig(**{k: tuple(v) if isinstance(v, list) else v
                               for k, v in cfg.get("probe", {}).items()})
    if args.ablation == "aggregation":
        report = run_probe_experiment(dataset, features, probe_cfg)
    else:
        raise ConfigError(f"unknown ablation {args.ablation!r}")
    _emit_report(report, args.out, "probe-report")
    return EXIT_OK


def cmd_inject(args) -> int:
    cfg = _load_config(args.config)
    exp = dict(cfg.get("experiment", {}))
    kind = exp.pop("kind", args.task)
    if kind == "transcription":
        dataset, features = _prepare_experiment(cfg, levels=("middle",))
        report = run_transcription_injection(dataset, features,
                                             TranscriptionInjectionConfig(**_tupled(exp)))
    elif kind == "separation":
        dataset, features = _prepare_experiment(cfg, levels=("middle",))
        report = run_separation_injection(dataset, features,
                                          SeparationInjectionConfig(**_tupled(exp)))
    elif kind == "mixing":
        dataset, features = _prepare_experiment(cfg, levels=("top",))
        report = run_mixing_experiment(dataset, features,
                                       MixingConditionConfig(**_tupled(exp)))
    else:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    _emit_report(report, args.out, f"inject-{kind}-report")
    return EXIT_OK


def _tupled(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


# -- verify / sample -------------------------------------------------------------------


def cmd_verify(args) -> int:
    results, ok = run_verify(quick=not args.full)
    for name, status in results.items():
        print(f"[{'PASS' if status == 'pass' else 'FAIL'}] {name}"
              + ("" if status == "pass" else f" ({status})"))
    if args.out:
        _write_json(args.out, {"mode": "full" if args.full else "quick",
                               "results": results, "ok": ok})
    if not ok:
        first = next(n for n, s in results.items() if s != "pass")
        print(f"first failing property: {first}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_sample(args) -> int:
    stage1, _ = load_stage1(args.stage1)
    priors = _load_priors(args.priors)
    if len(priors) != 3:
        raise ConfigError("sampling needs all three prior checkpoints")
    cond = None
    if args.cond == "stub":
        rng = np.random.default_rng(np.random.PCG64(args.seed))
        ref = AudioBuffer(rng.normal(size=stage1.cfg.rates[1] * 4), stage1.cfg.sample_rate)
        cond = stub_conditioning(ref)
    rng = np.random.default_rng(np.random.PCG64(args.seed))
    tokens = sample_tokens(priors, cond, top_frames=args.frames,
                           temperature=args.temperature,
                           top_k=args.top_k if args.top_k > 0 else None, rng=rng,
                           sample_rates=stage1.cfg.rates)
    write_tokens(args.out, tokens)
    print(f"tokens written to {args.out} "
          f"({', '.join(str(len(tokens.streams[l])) for l in (1, 2, 3))} per level)")
    if args.wav:
        wave = stage1.decode_tokens(tokens.streams)[0]
        write_wav(args.wav, AudioBuffer(wave, stage1.cfg.sample_rate))
        print(f"decoded audio written to {args.wav}")
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hqfeat", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t1 = sub.add_parser("train-stage1", help="train the hierarchical autoencoder")
    t1.add_argument("--config", required=True)
    t1.add_argument("--out", required=True)
    t1.add_argument("--seed", type=int)
    t1.add_argument("--steps", type=int)
    t1.set_defaults(fn=cmd_train_stage1)

    t2 = sub.add_parser("train-stage2", help="train the token priors")
    t2.add_argument("--config", required=True)
    t2.add_argument("--stage1", required=True)
    t2.add_argument("--out", required=True)
    t2.add_argument("--seed", type=int)
    t2.set_defaults(fn=cmd_train_stage2)

    ex = sub.add_parser("extract", help="extract feature files from audio")
    ex.add_argument("--audio", required=True)
    ex.add_argument("--stage1", required=True)
    ex.add_argument("--priors", required=True)
    ex.add_argument("--out", required=True)
    ex.add_argument("--levels", default="top,middle")
    ex.add_argument("--cond", choices=("none", "stub"), default="none")
    ex.add_argument("--overlap", type=float, default=0.5)
    ex.add_argument("--workers", type=int, default=1)
    ex.add_argument("--cache-dir")
    ex.set_defaults(fn=cmd_extract)

    pr = sub.add_parser("probe", help="run the probing ablation grid")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--ablation", default="aggregation")
    pr.set_defaults(fn=cmd_probe)

    inj = sub.add_parser("inject", help="run a feature-injection experiment")
    inj.add_argument("--config", required=True)
    inj.add_argument("--out", required=True)
    inj.add_argument("--task", default="transcription",
                     choices=("transcription", "separation", "mixing"))
    inj.set_defaults(fn=cmd_inject)

    ver = sub.add_parser("verify", help="run the invariant suite")
    mode = ver.add_mutually_exclusive_group()
    mode.add_argument("--quick", action="store_true", default=True)
    mode.add_argument("--full", action="store_true")
    ver.add_argument("--out")
    ver.set_defaults(fn=cmd_verify)

    sm = sub.add_parser("sample", help="ancestral sampling from the priors")
    sm.add_argument("--stage1", required=True)
    sm.add_argument("--priors", required=True)
    sm.add_argument("--out", required=True)
    sm.add_argument("--frames", type=int, default=8)
    sm.add_argument("--temperature", type=float, default=1.0)
    sm.add_argument("--top-k", type=int, default=0)
    sm.add_argument("--cond", choices=("none", "stub"), default="none")
    sm.add_argument("--seed", type=int, default=0)
    sm.add_argument("--wav")
    sm.set_defaults(fn=cmd_sample)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (ConfigError, ContractError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
