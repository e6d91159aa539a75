"""Command-line entry point: ``desap <subcommand> ...`` or ``python -m desap``."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import alignment, encoder, flops, pruning
from .errors import DesapError
from .io import RunConfig, emit_heatmap, parse_grid, read_tensor, write_tensor, atomic_write


class Outputs:
    """Collects written files so a failed run can remove them all."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.directory / name
        self.written.append(p)
        return p

    def tensor(self, name: str, m) -> None:
        write_tensor(self.path(name), m)

    def text(self, name: str, lines) -> None:
        atomic_write(self.path(name), "".join(f"{l}\n" for l in lines).encode())

    def heatmap(self, name: str, scores, grid) -> None:
        emit_heatmap(scores, grid, self.path(name))

    def cleanup(self) -> None:
        for p in self.written:
            if p.exists():
                p.unlink()


def load_inputs(cfg: RunConfig):
    ecfg = cfg.encoder_config()
    weights = encoder.init_encoder(ecfg)
    if cfg.visual:
        x0 = read_tensor(cfg.resolve(cfg.visual))
    else:
        x0 = np.random.default_rng(cfg.seed + 1).standard_normal((ecfg.num_tokens, ecfg.embed_dim))
    if cfg.text:
        raw = read_tensor(cfg.resolve(cfg.text))
    else:
        raw = np.random.default_rng(cfg.seed + 2).standard_normal((cfg.text_tokens, ecfg.embed_dim))
    if raw.ndim != 2:
        raise DesapError(f"text embedding must be a matrix, got shape {raw.shape}")
    valid = np.zeros(raw.shape[0], dtype=bool)
    valid[: cfg.text_valid or raw.shape[0]] = True
    text = alignment.TextEmbedding.from_padded(raw, valid)
    return weights, x0, text


def cmd_encode(cfg: RunConfig, out: Outputs) -> None:
    weights, x0, _ = load_inputs(cfg)
    trace = encoder.forward(weights, x0)
    out.tensor("final_hidden.dsap", trace.final)
    for i, a in enumerate(trace.attention):
        out.tensor(f"attention_layer{i}.dsap", a)
    for variant in encoder.VARIANTS:
        out.tensor(f"a_d_{variant}.dsap", encoder.decoupled_attention(weights, trace, variant))


def cmd_decompose(cfg: RunConfig, out: Outputs) -> None:
    weights, x0, _ = load_inputs(cfg)
    dec = encoder.decompose_last_layer(weights, encoder.forward(weights, x0))
    out.tensor("s_d.dsap", dec.s_d)
    out.tensor("a_d.dsap", dec.a_d)
    out.tensor("reconstruction.dsap", dec.reconstruction)
    out.text("decompose.txt", [
        f"num_layers={cfg.num_layers}",
        f"tokens={dec.s_d.shape[0]}",
        f"embed_dim={dec.s_d.shape[1]}",
        f"max_reconstruction_error={dec.max_error:.6e}",
    ])


def cmd_align(cfg: RunConfig, out: Outputs) -> None:
    weights, x0, text = load_inputs(cfg)
    trace = encoder.forward(weights, x0)
    a_d = encoder.decoupled_attention(weights, trace, cfg.variant)
    res = alignment.decoupled_similarity(a_d, text, 0 if cfg.has_cls else None, cfg.lam)
    out.tensor("m_s.dsap", res.m_s)
    out.tensor("m_v.dsap", res.m_v)
    out.tensor("m_t.dsap", res.m_t)
    out.tensor("alpha.dsap", res.alpha)
    out.tensor("beta.dsap", res.beta)
    out.tensor("a_t.dsap", res.a_t)
    out.tensor("vanilla.dsap", alignment.vanilla_similarity(trace.final, text))


def cmd_prune(cfg: RunConfig, out: Outputs) -> None:
    weights, x0, text = load_inputs(cfg)
    trace = encoder.forward(weights, x0)
    params = pruning.PruneParams(cfg.total_keep, cfg.variant, cfg.lam, cfg.split)
    res = pruning.prune_pipeline(trace, weights, text, params)
    out.text("retained.txt", res.retained.tolist())
    out.text("task_set.txt", res.task_set.tolist())
    out.text("saliency_set.txt", res.saliency_set.tolist())
    out.text("assignment.txt", [f"{d}->{c}" for d, c in sorted(res.assignment.items())])
    out.tensor("merged.dsap", res.merged_tokens)
    grid = cfg.heatmap_grid()
    if grid is not None:
        out.heatmap("task_heatmap.pgm", res.task_scores, grid)
        out.heatmap("saliency_heatmap.pgm", res.saliency_scores, grid)


CONFIG_COMMANDS = {
    "encode": cmd_encode,
    "decompose": cmd_decompose,
    "align": cmd_align,
    "prune": cmd_prune,
}


def cmd_flops(args) -> None:
    dims = flops.get_preset(args.preset)
    report = flops.flops_report(dims, args.tokens, args.post)
    print(f"{'preset':<16}{args.preset}")
    print(f"{'tokens':<16}{args.tokens} -> {args.post}")
    print(f"{'total':<16}{report.total / 1e12:.2f} T  ({report.total})")
    print(f"{'post-pruning':<16}{report.post_pruning / 1e12:.2f} T  ({report.post_pruning})")
    print(f"{'reduction R':<16}{report.reduction_ratio:.4f}")
    print(f"{'speedup':<16}{report.speedup:.2f}x")
    print()
    for line in report.lines():
        print(line)


def cmd_heatmap(args) -> None:
    scores = read_tensor(args.input)
    emit_heatmap(scores, parse_grid(args.grid), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="desap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in CONFIG_COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key=value run config")
        p.add_argument("--out", help="output directory (overrides output_dir)")
    p = sub.add_parser("flops", help="prefill FLOPs before and after pruning")
    p.add_argument("--preset", default="llava15-7b", choices=sorted(flops.PRESETS))
    p.add_argument("--tokens", type=int, default=576)
    p.add_argument("--post", type=int, default=64)
    p = sub.add_parser("heatmap", help="render a score vector as a PGM")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--grid", required=True, help="HxW")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = None
    try:
        if args.command in CONFIG_COMMANDS:
            cfg = RunConfig.load(args.config)
            directory = Path(args.out) if args.out else cfg.resolve(cfg.output_dir)
            os.makedirs(directory, exist_ok=True)
            out = Outputs(directory)
            CONFIG_COMMANDS[args.command](cfg, out)
        elif args.command == "flops":
            cmd_flops(args)
        else:
            cmd_heatmap(args)
    except (DesapError, OSError, ValueError, IndexError, ZeroDivisionError) as exc:
        if out is not None:
            out.cleanup()
        print(f"desap {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
