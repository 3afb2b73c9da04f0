"""Command line interface: ``firenet {pattern,measure,reconstruct,adversarial,barrier}``.

Every command writes ``run.json`` to its output directory. The file echoes
the fully resolved configuration (defaults and the seed included) so that a
run can be repeated byte for byte. Failures print a JSON object with keys
``error`` and ``message`` on stderr and exit with status 2.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adversarial import AttackConfig, FirenetMap, perturbation_search, unstable_least_squares
from .barriers import DEFAULT_BARRIER_CONFIG, breakdown_table, write_table_csv
from .io import read_complex, read_json, read_pgm, read_real, write_complex, write_json, write_pgm, write_real
from .numerics import make_rng, norm_l2
from .phantoms import reference_level_model
from .sampling import MeasurementOperator, SamplingScheme, scheme_for_fraction, DEFAULT_SCALE, draw_scheme, build_bands, sample_allocation
from .solver import SolverConfig, firenet_reconstruct
from .sparsity import LevelModel
from .transforms import haar_dwt, haar_idwt

__all__ = ["main", "build_parser", "CliError"]


class CliError(Exception):
    """A user-facing failure reported as JSON."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"bad arguments: {message}")


def _resolve_seed(seed):
    if seed is not None:
        return int(seed)
    env = os.environ.get("FIRENET_SEED")
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError as exc:
            raise CliError(f"FIRENET_SEED must be an integer, got {env!r}") from exc
    return 0


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run(out: Path, command: str, config: dict, outputs: list) -> None:
    write_json(out / "run.json", {"command": command, "version": __version__, "config": config, "outputs": sorted(outputs)})


def _load_levels(path, r: int, d: int) -> LevelModel:
    if path is None:
        return reference_level_model(r, d)
    lm = LevelModel.from_dict(read_json(path))
    return lm


def _load_image(path) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"image file not found: {path}")
    head = p.read_bytes()[:4]
    if head == b"FNR1":
        return read_real(p)
    if head == b"FNC1":
        return read_complex(p)
    if head[:2] == b"P5":
        return read_pgm(p, 0.0, 1.0)
    raise CliError(f"unrecognised image format: {path}")


def _load_scheme(path) -> SamplingScheme:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"scheme file not found: {path}")
    return SamplingScheme.from_json(p.read_text())


def _mask_image(scheme: SamplingScheme) -> np.ndarray:
    return (scheme.multiplicity() > 0).astype(float)


# pattern --------------------------------------------------------------------

def cmd_pattern(args) -> dict:
    seed = _resolve_seed(args.seed)
    out = _out_dir(args.out)
    lm = _load_levels(args.levels, args.r, args.d)
    if args.fraction is not None:
        scheme, scale = scheme_for_fraction(
            lm, args.kind, args.d, args.fraction, seed, args.eps_p, args.full_levels,
            not args.no_replacement, not args.no_compensation,
        )
    else:
        scale = args.scale
        alloc = sample_allocation(lm, args.kind, args.d, args.eps_p, scale, args.full_levels)
        scheme = draw_scheme(build_bands(args.kind, args.r, args.d), alloc, seed, not args.no_replacement, not args.no_compensation)
    (out / "scheme.json").write_text(scheme.to_json() + "\n")
    outputs = ["scheme.json", "run.json"]
    if args.d == 2:
        write_pgm(out / "mask.pgm", _mask_image(scheme), 8, 0.0, 1.0)
        outputs.append("mask.pgm")
    config = {
        "kind": args.kind, "r": args.r, "d": args.d, "levels": lm.to_dict(), "fraction": args.fraction,
        "scale": None if scale == float("inf") else scale, "eps_p": args.eps_p, "full_levels": args.full_levels,
        "replacement": not args.no_replacement, "compensate": not args.no_compensation, "seed": seed,
    }
    _write_run(out, "pattern", config, outputs)
    return {"m": scheme.m, "N": scheme.band.N, "fraction": scheme.fraction}


# measure --------------------------------------------------------------------

def cmd_measure(args) -> dict:
    seed = _resolve_seed(args.seed)
    if not args.noise >= 0:
        raise CliError("--noise must be non-negative")
    scheme = _load_scheme(args.scheme)
    img = _load_image(args.image)
    op = MeasurementOperator(scheme, "image")
    if img.shape != op.domain_shape:
        raise CliError(f"image shape {img.shape} does not match scheme grid {op.domain_shape}")
    out = _out_dir(args.out)
    clean = op.forward(img)
    rng = make_rng(seed)
    e = rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape)
    nc = norm_l2(clean)
    e = e * (args.noise * nc / norm_l2(e)) if args.noise > 0 else np.zeros_like(clean)
    y = clean + e
    write_complex(out / "y.bin", y)
    meta = {"m": int(y.size), "norm_Ax": nc, "norm_e": norm_l2(e), "relative_noise": norm_l2(e) / nc if nc > 0 else 0.0}
    write_json(out / "measure.json", meta)
    config = {"image": str(args.image), "scheme": str(args.scheme), "noise": args.noise, "seed": seed}
    _write_run(out, "measure", config, ["y.bin", "measure.json", "run.json"])
    return meta


# reconstruct ----------------------------------------------------------------

def _weights(args, scheme: SamplingScheme):
    if args.weights == "unit":
        return None, "unit"
    if args.weights == "optimal":
        lm = _load_levels(args.levels, scheme.band.r, scheme.band.d)
        return lm.weight_vector(), "optimal"
    data = read_json(args.weights)
    w = np.asarray(data["w"] if isinstance(data, dict) else data, dtype=float)
    if w.size != scheme.band.N:
        lm = LevelModel.from_dict(data)
        w = lm.weight_vector()
    return w, str(args.weights)


def _solver_config(args, w) -> SolverConfig:
    return SolverConfig(
        lam=args.lam, tau=args.tau, sigma=args.sigma, p=args.p, n=args.n, delta=args.delta,
        eps0=args.eps0, upsilon=args.upsilon, w=w,
    )


def _solver_echo(cfg: SolverConfig, L: float, weights_label: str) -> dict:
    tau = cfg.tau if cfg.tau is not None else 0.99 / L
    sigma = cfg.sigma if cfg.sigma is not None else 0.99 / L
    return {
        "lambda": cfg.lam, "tau": tau, "sigma": sigma, "p": cfg.p, "n": cfg.n, "delta": cfg.delta,
        "eps0": cfg.eps0, "upsilon": cfg.upsilon, "weights": weights_label, "operator_norm_bound": L,
    }


def cmd_reconstruct(args) -> dict:
    scheme = _load_scheme(args.scheme)
    p = Path(args.measurements)
    if not p.exists():
        raise FileNotFoundError(f"measurement file not found: {args.measurements}")
    y = read_complex(p)
    op = MeasurementOperator(scheme, "coeffs")
    if y.shape != op.range_shape:
        raise CliError(f"measurements have shape {y.shape}, scheme expects {op.range_shape}")
    w, wlabel = _weights(args, scheme)
    cfg = _solver_config(args, w)
    ref = None
    if args.reference is not None:
        ref = haar_dwt(_load_image(args.reference), scheme.band.r)
    out = _out_dir(args.out)
    c, trace = firenet_reconstruct(y, op, cfg, reference=ref)
    img = haar_idwt(c, scheme.band.r, scheme.band.d)
    write_complex(out / "recon.bin", img)
    trace.to_csv(out / "trace.csv")
    outputs = ["recon.bin", "trace.csv", "run.json"]
    scale = None
    if scheme.band.d == 2:
        scale = write_pgm(out / "recon.pgm", np.abs(img), args.bits)
        outputs.append("recon.pgm")
    L = op.norm().safe_bound
    config = {
        "measurements": str(args.measurements), "scheme": str(args.scheme), "reference": args.reference,
        "solver": _solver_echo(cfg, L, wlabel), "pgm_bits": args.bits,
        "pgm_scale": None if scale is None else {"vmin": scale[0], "vmax": scale[1]},
    }
    _write_run(out, "reconstruct", config, outputs)
    res = {"restarts": cfg.n, "records": len(trace)}
    if ref is not None:
        res["relative_error"] = norm_l2(c - ref) / max(norm_l2(ref), 1e-300)
    return res


# adversarial ----------------------------------------------------------------

def cmd_adversarial(args) -> dict:
    seed = _resolve_seed(args.seed)
    scheme = _load_scheme(args.scheme)
    img = _load_image(args.image).astype(np.complex128)
    opi = MeasurementOperator(scheme, "image")
    opc = MeasurementOperator(scheme, "coeffs")
    if img.shape != opi.domain_shape:
        raise CliError(f"image shape {img.shape} does not match scheme grid {opi.domain_shape}")
    w, wlabel = _weights(args, scheme)
    cfg = _solver_config(args, w)
    acfg = AttackConfig(
        lambda_pen=args.lambda_pen, gamma_mom=args.gamma, eta=args.eta, steps=args.steps, restarts=args.restarts,
        seed=seed, gradient_mode=args.gradient_mode, fd_step=args.fd_step, init_scale=args.init_scale,
        target_ratio=args.target_ratio, domain=args.domain, allow_large_fd=args.allow_large_fd,
    )
    y = opi.forward(img)
    out = _out_dir(args.out)
    if args.recon == "firenet":
        recon = FirenetMap(opc, cfg, eps0=cfg.eps0 if cfg.eps0 is not None else norm_l2(y))
    else:
        recon = unstable_least_squares(opi, args.tiny, output_shape=opi.domain_shape)
    rep = perturbation_search(recon, opi, img, acfg, y=y)
    r_img = rep.r_star if args.domain == "image" else opi.adjoint(rep.r_star)
    A_r = opi.forward(rep.r_star) if args.domain == "image" else rep.r_star
    clean = np.asarray(recon(y))
    pert = np.asarray(recon(y + A_r))
    write_complex(out / "r.bin", rep.r_star)
    write_complex(out / "recon_clean.bin", clean)
    write_complex(out / "recon_perturbed.bin", pert)
    outputs = ["r.bin", "recon_clean.bin", "recon_perturbed.bin", "report.json", "trace.csv", "run.json"]
    if scheme.band.d == 2:
        write_pgm(out / "perturbation.pgm", np.abs(r_img), 8)
        write_pgm(out / "recon_clean.pgm", np.abs(clean), 8)
        write_pgm(out / "recon_perturbed.pgm", np.abs(pert), 8)
        outputs += ["perturbation.pgm", "recon_clean.pgm", "recon_perturbed.pgm"]
    report = rep.to_dict()
    report["relative_perturbation"] = rep.norms[1] / max(norm_l2(y), 1e-300)
    write_json(out / "report.json", report)
    with open(out / "trace.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "Q"])
        for i, q in enumerate(rep.trace):
            wr.writerow([i, repr(float(q))])
    L = opc.norm().safe_bound
    config = {
        "image": str(args.image), "scheme": str(args.scheme), "recon": args.recon, "tiny": args.tiny,
        "solver": _solver_echo(cfg, L, wlabel), "attack": acfg.to_dict(),
    }
    _write_run(out, "adversarial", config, outputs)
    return {"damage": rep.damage, "lipschitz_ratio": rep.lipschitz_ratio, "baseline_error": rep.baseline_error}


# barrier --------------------------------------------------------------------

def _int_list(text: str) -> list:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def cmd_barrier(args) -> dict:
    seed = _resolve_seed(args.seed)
    cfg = DEFAULT_BARRIER_CONFIG.with_(p=args.p, n=args.restarts, delta=args.delta)
    out = _out_dir(args.out)
    rows = breakdown_table(args.K, args.n, cfg, seed=seed)
    write_table_csv(rows, out / "table.csv")
    config = {"K": args.K, "n": args.n, "seed": seed, "solver": {"lambda": cfg.lam, "p": cfg.p, "restarts": cfg.n, "delta": cfg.delta}}
    _write_run(out, "barrier", config, ["table.csv", "run.json"])
    return {"rows": len(rows), "passed": sum(r.passed for r in rows)}


# parser ---------------------------------------------------------------------

def _add_solver_flags(p) -> None:
    p.add_argument("--lambda", dest="lam", type=float, default=0.00025, help="regularisation weight")
    p.add_argument("--tau", type=float, default=None, help="primal step (default 0.99/||A||)")
    p.add_argument("--sigma", type=float, default=None, help="dual step (default 0.99/||A||)")
    p.add_argument("--p", type=int, default=5, help="inner iterations per restart")
    p.add_argument("--n", type=int, default=12, help="number of restarts")
    p.add_argument("--delta", type=float, default=1e-9)
    p.add_argument("--eps0", type=float, default=None, help="initial error guess (default ||y||)")
    p.add_argument("--upsilon", type=float, default=float(np.exp(-1.0)))
    p.add_argument("--weights", default="optimal", help="optimal, unit, or a JSON file with a level model or weights")
    p.add_argument("--levels", default=None, help="level model JSON (default: phantom-derived)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="firenet", description="Restarted primal-dual reconstruction from subsampled transforms.")
    parser.add_argument("--version", action="version", version=f"firenet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pattern", help="draw a multilevel sampling scheme")
    p.add_argument("--kind", choices=["fourier", "walsh"], default="fourier")
    p.add_argument("--r", type=int, required=True, help="grid side is 2**r")
    p.add_argument("--d", type=int, choices=[1, 2], default=2)
    p.add_argument("--levels", default=None, help="level model JSON (default: phantom-derived)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--fraction", type=float, default=None, help="target sampling fraction")
    g.add_argument("--scale", type=float, default=DEFAULT_SCALE, help="constant of the sample-count estimate")
    p.add_argument("--eps-p", dest="eps_p", type=float, default=0.01)
    p.add_argument("--full-levels", dest="full_levels", type=int, default=0, help="sample bands with max(k) <= this fully")
    p.add_argument("--no-replacement", action="store_true", help="draw distinct indices within each band")
    p.add_argument("--no-compensation", action="store_true", help="drop the density compensation")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("measure", help="simulate noisy measurements of an image")
    p.add_argument("--image", required=True, help="PGM (mapped to [0, 1]) or binary array")
    p.add_argument("--scheme", required=True)
    p.add_argument("--noise", type=float, default=0.0, help="relative l2 noise level")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("reconstruct", help="run FIRENET on measurements")
    p.add_argument("--measurements", required=True)
    p.add_argument("--scheme", required=True)
    _add_solver_flags(p)
    p.add_argument("--reference", default=None, help="ground-truth image for the error column")
    p.add_argument("--bits", type=int, choices=[8, 16], default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("adversarial", help="search for worst-case perturbations")
    p.add_argument("--image", required=True)
    p.add_argument("--scheme", required=True)
    _add_solver_flags(p)
    p.add_argument("--recon", choices=["firenet", "unstable-ls"], default="firenet")
    p.add_argument("--tiny", type=float, default=1e-4, help="singular value of the unstable baseline")
    p.add_argument("--lambda-pen", dest="lambda_pen", type=float, default=1e-3)
    p.add_argument("--gamma", type=float, default=0.9, help="momentum")
    p.add_argument("--eta", type=float, default=None, help="learning rate (default: tuned)")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--gradient-mode", dest="gradient_mode", choices=["backprop", "finite_diff"], default="backprop")
    p.add_argument("--fd-step", dest="fd_step", type=float, default=1e-6)
    p.add_argument("--allow-large-fd", dest="allow_large_fd", action="store_true")
    p.add_argument("--init-scale", dest="init_scale", type=float, default=0.01)
    p.add_argument("--target-ratio", dest="target_ratio", type=float, default=None, help="fix ||Ar|| / ||Ax||")
    p.add_argument("--domain", choices=["image", "measurement"], default="image")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_adversarial)

    p = sub.add_parser("barrier", help="accuracy-barrier table")
    p.add_argument("--K", type=_int_list, default=[1, 3, 6])
    p.add_argument("--n", type=_int_list, default=[10, 20, 30])
    p.add_argument("--p", type=int, default=DEFAULT_BARRIER_CONFIG.p)
    p.add_argument("--restarts", type=int, default=DEFAULT_BARRIER_CONFIG.n)
    p.add_argument("--delta", type=float, default=DEFAULT_BARRIER_CONFIG.delta)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_barrier)
    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        summary = args.func(args)
    except (CliError, ValueError, FileNotFoundError, KeyError, OSError, AssertionError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
