"""``inrpatch`` command line: train, sample, extrapolate, superres, profile."""
import argparse
import csv
import json
import statistics
import sys
from pathlib import Path

import numpy as np

from . import checkpoint, config as config_mod, kernels
from .coords import dense_pixels, make_grid
from .data import load_folder, make_procedural, save_png, tile
from .generator import generate, generate_at
from .metrics import image_stats, pfd
from .rng import Rng
from .training import run

CSV_COLUMNS = ["iter", "stage", "g_loss", "d_loss", "patch_loss", "fwd_count", "peak_floats", "wall_ms"]


def latents(seed, n, z_dim):
    return Rng(seed).spawn("latents").normal((n, z_dim)).astype(np.float32)


def load_dataset(cfg):
    if cfg.dataset.source == "folder":
        ds = load_folder(cfg.dataset.path)
        if ds.H != cfg.H:
            raise config_mod.ConfigError(f"H: config says {cfg.H} but images in {cfg.dataset.path} are {ds.H}")
        return ds
    return make_procedural(cfg.dataset.n, cfg.H, cfg.dataset.seed)


# ----------------------------------------------------------------------------
# inference


def sample_images(gen, n, seed):
    """n samples on the generator's full stage lattice: (n, N, N, 3)."""
    z = latents(seed, n, gen.cfg.z_dim)
    return generate(gen, z, make_grid(gen.H, gen.H, gen.N)).data


def extrapolate_image(gen, margin, seed):
    """One sample over the lattice extended by ``margin * H`` on every side."""
    if margin < 0:
        raise ValueError("margin must be >= 0")
    N, stride = gen.N, gen.H // gen.N
    pad = int(round(margin * N))
    side = N + 2 * pad
    z = latents(seed, 1, gen.cfg.z_dim)
    return generate_at(gen, z, dense_pixels(gen.H, -pad * stride, side, stride), side).data[0]


def superres_image(gen, factor, seed):
    """One sample on a lattice ``factor`` times denser than the stage lattice."""
    if factor not in (2, 4):
        raise ValueError("factor must be 2 or 4")
    N, stride = gen.N, gen.H // gen.N
    side = N * factor
    z = latents(seed, 1, gen.cfg.z_dim)
    return generate_at(gen, z, dense_pixels(gen.H, 0.0, side, stride / factor), side).data[0]


# ----------------------------------------------------------------------------
# commands


class _CsvLog:
    def __init__(self, path, wall_time=True):
        self.f = open(path, "w", newline="")
        self.w = csv.writer(self.f, lineterminator="\n")
        self.w.writerow(CSV_COLUMNS)
        self.wall_time = wall_time

    def __call__(self, m):
        self.w.writerow([m.iter, m.stage, repr(m.g_loss), repr(m.d_loss), repr(m.patch_loss),
                         m.activations_fwd, m.peak_floats,
                         f"{m.wall_ms:.3f}" if self.wall_time else "0"])

    def close(self):
        self.f.close()


def cmd_train(config_path, out=None, log_wall_time=True):
    cfg = config_mod.load(config_path)
    out_dir = Path(out or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(cfg.to_json())
    data = load_dataset(cfg)
    log = _CsvLog(out_dir / "metrics.csv", wall_time=log_wall_time)
    sample_z = latents(cfg.seed, cfg.n_samples, cfg.generator.z_dim)

    def on_iter(m, gen):
        log(m)
        if cfg.sample_every and (m.iter + 1) % cfg.sample_every == 0:
            imgs = generate(gen, sample_z, make_grid(gen.H, gen.H, gen.N)).data
            (out_dir / "samples").mkdir(exist_ok=True)
            save_png(out_dir / "samples" / f"iter{m.iter + 1:06d}.png", tile(imgs))

    def on_stage_end(stage, gen, disc):
        name = f"stage{stage}.ckpt" if cfg.mode == "multistage" else f"{cfg.mode}.ckpt"
        checkpoint.save(out_dir / name, gen, cfg.seed)

    try:
        run(cfg, data, on_stage_end=on_stage_end, on_iter=on_iter)
    finally:
        log.close()
    return 0


def cmd_sample(ckpt, n, seed, out):
    gen, _ = checkpoint.load(ckpt)
    save_png(out, tile(sample_images(gen, n, seed)))
    return 0


def cmd_extrapolate(ckpt, margin, seed, out):
    gen, _ = checkpoint.load(ckpt)
    img = extrapolate_image(gen, margin, seed)
    if not np.isfinite(img).all():
        raise FloatingPointError("non-finite pixels in extrapolated image")
    save_png(out, img)
    return 0


def cmd_superres(ckpt, factor, seed, out):
    gen, _ = checkpoint.load(ckpt)
    img = superres_image(gen, factor, seed)
    if not np.isfinite(img).all():
        raise FloatingPointError("non-finite pixels in super-resolved image")
    save_png(out, img)
    return 0


def profile(cfg, iters=None, warmup=3):
    """Instrumented iterations of every mode at equal H and batch.

    Each mode runs ``iters`` measured iterations after ``warmup`` untimed ones;
    multistage runs that many per stage. Returns one row per mode.
    """
    from .training import run as run_mode
    iters = iters or cfg.profile_iters
    data = make_procedural(max(cfg.dataset.n, 16), cfg.H, cfg.dataset.seed)
    d = cfg.to_dict()
    d["mode"] = "multistage"
    d["budget_seconds"] = None
    for s in d["stages"]:
        s["iters"] = iters + warmup
    ours = config_mod.from_dict(d)
    rows = []
    for mode in ("image_based", "patch_based", "multistage"):
        mcfg = ours if mode == "multistage" else config_mod.baseline_config(ours, mode)
        if mode != "multistage":
            mcfg.stages[0].iters = iters + warmup
        log = run_mode(mcfg, data)["log"]
        per_stage = {}
        for m in log:
            per_stage.setdefault(m.stage, []).append(m)
        measured = [m for ms in per_stage.values() for m in ms[warmup:]]
        row = {
            "mode": mode,
            "g_fwd_count": measured[0].activations_fwd,
            "fwd_count": max(m.fwd_total for m in measured),
            "peak_live_floats": max(m.peak_floats for m in measured),
            "wall_ms": statistics.median(m.wall_ms for m in measured),
        }
        if mode == "multistage":
            row["stage_wall_ms"] = {s: statistics.median(m.wall_ms for m in ms[warmup:])
                                    for s, ms in per_stage.items()}
        rows.append(row)
    base = rows[0]
    for r in rows:
        r["g_fwd_ratio"] = base["g_fwd_count"] / r["g_fwd_count"]
        r["peak_ratio"] = r["peak_live_floats"] / base["peak_live_floats"]
        r["wall_ratio"] = r["wall_ms"] / base["wall_ms"]
    return rows


def format_profile(rows):
    lines = [f"{'mode':<12} {'G fwd':>11} {'G+D fwd':>11} {'peak floats':>12} "
             f"{'wall ms':>9} {'G fwd x':>8} {'peak/img':>9} {'wall/img':>9}"]
    for r in rows:
        lines.append(f"{r['mode']:<12} {r['g_fwd_count']:>11} {r['fwd_count']:>11} "
                     f"{r['peak_live_floats']:>12} {r['wall_ms']:>9.2f} {r['g_fwd_ratio']:>8.2f} "
                     f"{r['peak_ratio']:>9.3f} {r['wall_ratio']:>9.3f}")
        if "stage_wall_ms" in r:
            per = ", ".join(f"stage {s}: {v:.2f}" for s, v in r["stage_wall_ms"].items())
            lines.append(f"{'':<12} median wall ms per stage: {per}")
    return "\n".join(lines)


def cmd_profile(config_path, out=None):
    cfg = config_mod.load(config_path)
    rows = profile(cfg)
    print(f"kernels: {kernels.BACKEND}; H={cfg.H}; batch={cfg.stages[0].batch}; "
          f"{cfg.profile_iters} iterations per mode/stage")
    print(format_profile(rows))
    if out:
        Path(out).write_text(json.dumps(rows, indent=2) + "\n")
    return 0


def cmd_evaluate(ckpt, reals, n, seed):
    """pfd between ``n`` samples of a checkpoint and a set of real images."""
    gen, _ = checkpoint.load(ckpt)
    fakes = sample_images(gen, n, seed)
    return pfd(image_stats(fakes), image_stats(reals))


# ----------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="inrpatch", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a generator from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--out", help="output directory (overrides output_dir)")
    t.add_argument("--no-wall-time", action="store_true",
                   help="write 0 in the wall_ms column so reruns give identical CSVs")

    s = sub.add_parser("sample", help="tile n samples from a checkpoint into a PNG")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    e = sub.add_parser("extrapolate", help="render past the image boundary")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--margin", type=float, default=0.25)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)

    r = sub.add_parser("superres", help="render on a denser coordinate lattice")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--factor", type=int, default=2, choices=(2, 4))
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)

    f = sub.add_parser("profile", help="activation/memory/time comparison of the three modes")
    f.add_argument("--config", required=True)
    f.add_argument("--out", help="also write the report as JSON")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args.config, args.out, log_wall_time=not args.no_wall_time)
        if args.command == "sample":
            return cmd_sample(args.checkpoint, args.n, args.seed, args.out)
        if args.command == "extrapolate":
            return cmd_extrapolate(args.checkpoint, args.margin, args.seed, args.out)
        if args.command == "superres":
            return cmd_superres(args.checkpoint, args.factor, args.seed, args.out)
        if args.command == "profile":
            return cmd_profile(args.config, args.out)
    except (config_mod.ConfigError, checkpoint.CheckpointError, OSError, ValueError) as e:
        print(f"inrpatch {args.command}: error: {e}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
