"""Command-line surface: verify / sample / estimate / asymptotics.

Runs are driven by a plain key=value config file plus flag overrides (flags
win), and every report embeds the resolved config and its hash so a JSON
artifact is reproducible from its own header.  Exit codes: 0 all checks
passed, 1 an identity failed its tolerance, 2 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .csbp import (
    CsbpParams,
    conditioned_entrance_laplace,
    csbp_sample_path,
    entrance_exponent_quadrature,
    limit_T_Y1_laplace,
    u_r_lambda,
)
from .partitions import enumerate_set_partitions, kappa_minus, p_theta, rho_minus
from .special import Alpha, d_alpha_product_form, stable_constants
from .stats import (
    conditional_mean_check,
    conditioned_pair_chi_square,
    dust_limit_comparison,
    first_split_chi_square,
    largest_fragment_cross_n_ks,
    root_mark_moment_check,
)
from .streams import RngStream
from .subordinator import sample_conditioned_jumps, sample_jump_field
from .trees import fragment_at_height, sample_conditioned_gw_tree, sample_skeleton
from .verification import (
    DislocationFunctional,
    dislocation_mc,
    phi0_quadrature,
    phi_closed,
    phi_levy_integral,
    tagged_moment,
)

DEFAULT_TOLERANCES = {
    "d_alpha_forms": 1e-12,
    "phi_three_way": 1e-6,
    "moment_chain": 1e-12,
    "partition_norm": 1e-12,
    "partition_exact": 1e-12,
    "kappa_ratio": 1e-12,
    "kappa_restriction": 1e-10,
    "p_theta_norm": 1e-12,
    "u_flow": 1e-14,
    "entrance_quadrature": 1e-10,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    alpha: float = 1.5
    alpha_grid: list = field(default_factory=lambda: [1.1, 1.3, 1.5, 1.7, 1.9])
    seed: int = 20240809
    n_samples: int = 100_000
    epsilon: float = 1e-6
    n_vertices: int = 20_000
    n_trees: int = 100
    n_draws: int = 10
    dt: float = 1e-3
    t_max: float = 0.5
    k_max: int = 500
    delta: float = 1e-3
    workers: int = 4
    output_dir: str = ""
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def validate(self) -> None:
        for a in [self.alpha, *self.alpha_grid]:
            if not (1.0 < a < 2.0):
                raise ConfigError(f"alpha must lie strictly in (1, 2), got {a}")
        if self.n_samples < 1:
            raise ConfigError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        for name in self.tolerances:
            if name not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance name {name!r}")

    def resolved_output_dir(self) -> Path:
        base = self.output_dir or os.environ.get("STABLEFRAG_OUTDIR", ".")
        return Path(base)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path: str | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, val = (part.strip() for part in line.partition("="))
        if key.startswith("tol."):
            cfg.tolerances[key[4:]] = float(val)
        elif key == "alpha_grid":
            cfg.alpha_grid = [float(v) for v in val.replace(",", " ").split()]
        elif key in ("alpha", "epsilon", "dt", "t_max", "delta"):
            setattr(cfg, key, float(val))
        elif key in ("seed", "n_samples", "n_vertices", "n_trees", "n_draws", "k_max", "workers"):
            setattr(cfg, key, int(val))
        elif key == "output_dir":
            cfg.output_dir = val
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return cfg


def _write_report(cfg: RunConfig, command: str, results, out_name: str) -> Path:
    out_dir = cfg.resolved_output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "command": command,
        "version": __version__,
        "config": cfg.as_dict(),
        "config_hash": cfg.hash(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "results": results,
    }
    path = out_dir / out_name
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# verify


def _identity(name, alpha_value, params, lhs, rhs, tol) -> dict:
    abs_err = abs(lhs - rhs)
    rel_err = abs_err / max(abs(lhs), abs(rhs), 1e-300)
    return {
        "identity": name,
        "alpha": alpha_value,
        "params": params,
        "lhs": lhs,
        "rhs": rhs,
        "abs_err": abs_err,
        "rel_err": rel_err,
        "tolerance": tol,
        "pass": bool(rel_err <= tol),
    }


def _verify_identities(cfg: RunConfig) -> list[dict]:
    tol = cfg.tolerances
    out = []
    r_grid = [0.25, 0.5, 1.0, 2.0, 5.0]
    for av in cfg.alpha_grid:
        alpha = Alpha(av)
        out.append(
            _identity(
                "d_alpha_two_forms",
                av,
                {},
                stable_constants(alpha).D_alpha,
                d_alpha_product_form(alpha),
                tol["d_alpha_forms"],
            )
        )
        for r in r_grid:
            closed = phi_closed(r, alpha)
            out.append(
                _identity(
                    "phi_levy_vs_closed", av, {"r": r}, phi_levy_integral(r, alpha), closed,
                    tol["phi_three_way"],
                )
            )
            out.append(
                _identity(
                    "phi0_vs_closed", av, {"r": r}, phi0_quadrature(r, alpha), closed,
                    tol["phi_three_way"],
                )
            )
        for k in range(1, 11):
            prod = 1.0
            for i in range(1, k + 1):
                prod *= phi_closed(i * alpha.theta_conj, alpha)
            out.append(
                _identity(
                    "moment_chain", av, {"k": k}, tagged_moment(k, alpha),
                    math.factorial(k) / prod, tol["moment_chain"],
                )
            )
        for n in range(2, 8):
            total = sum(
                rho_minus(pi, alpha) for pi in enumerate_set_partitions(n) if not pi.is_trivial()
            )
            out.append(
                _identity("rho_normalization", av, {"n": n}, total, 1.0, tol["partition_norm"])
            )
        for n in range(2, 7):
            for pi in enumerate_set_partitions(n):
                if pi.is_trivial():
                    continue
                ratio = av * math.exp(
                    math.lgamma(n - 1.0 / av) - math.lgamma(n - 1) if n > 1 else 0.0
                )
                out.append(
                    _identity(
                        "kappa_rho_ratio", av, {"n": n, "sizes": list(pi.size_multiset())},
                        kappa_minus(pi, alpha), ratio * rho_minus(pi, alpha), tol["kappa_ratio"],
                    )
                )
        for n in range(2, 9):
            for theta in (-0.5, 0.0, 1.0, 5.0):
                total = sum(
                    p_theta(pi.block_sizes(), theta, alpha) for pi in enumerate_set_partitions(n)
                )
                out.append(
                    _identity(
                        "p_theta_normalization", av, {"n": n, "theta": theta}, total, 1.0,
                        tol["p_theta_norm"],
                    )
                )
        for r, s, lam in [(0.3, 0.7, 1.0), (1.0, 2.0, 0.5), (0.1, 0.1, 3.0)]:
            out.append(
                _identity(
                    "u_flow", av, {"r": r, "s": s, "lambda": lam},
                    u_r_lambda(r + s, lam, alpha),
                    u_r_lambda(r, u_r_lambda(s, lam, alpha), alpha),
                    tol["u_flow"],
                )
            )
        for r, lam in [(0.5, 1.0), (1.0, 1.0), (2.0, 0.5)]:
            out.append(
                _identity(
                    "entrance_closed_vs_quadrature", av, {"r": r, "lambda": lam},
                    conditioned_entrance_laplace(r, lam, alpha),
                    math.exp(-entrance_exponent_quadrature(r, lam, alpha)),
                    tol["entrance_quadrature"],
                )
            )
    alpha = Alpha(1.5)
    quartet = [
        rho_minus(pi, alpha) for pi in enumerate_set_partitions(3) if not pi.is_trivial()
    ]
    for i, val in enumerate(quartet):
        out.append(
            _identity("rho_n3_exact_quarter", 1.5, {"index": i}, val, 0.25,
                      tol["partition_exact"])
        )
    # restriction consistency of kappa under adding one element
    for n in range(2, 6):
        for pi in enumerate_set_partitions(n):
            if pi.is_trivial():
                continue
            total = 0.0
            for j in range(pi.k + 1):
                blocks = [set(b) for b in pi.blocks]
                if j < pi.k:
                    blocks[j].add(n + 1)
                else:
                    blocks.append({n + 1})
                from .partitions import SetPartition

                total += kappa_minus(SetPartition.from_blocks(n + 1, blocks), alpha)
            out.append(
                _identity(
                    "kappa_restriction", 1.5, {"n": n, "sizes": list(pi.size_multiset())},
                    total, kappa_minus(pi, alpha), tol["kappa_restriction"],
                )
            )
    return out


def cmd_verify(cfg: RunConfig) -> int:
    results = _verify_identities(cfg)
    n_fail = sum(not r["pass"] for r in results)
    path = _write_report(cfg, "verify", results, "verify_report.json")
    for r in results:
        if not r["pass"]:
            print(f"FAIL {r['identity']} alpha={r['alpha']} {r['params']} rel_err={r['rel_err']:.3e}")
    print(f"verify: {len(results) - n_fail}/{len(results)} identities passed -> {path}")
    return 0 if n_fail == 0 else 1


# ---------------------------------------------------------------------------
# sample


def _provenance_lines(cfg: RunConfig, kind: str) -> str:
    return (
        f"# kind={kind}\n# alpha={cfg.alpha}\n# seed={cfg.seed}\n"
        f"# n={cfg.n_draws}\n# epsilon={cfg.epsilon}\n# version={__version__}\n"
    )


def cmd_sample(kind: str, cfg: RunConfig) -> int:
    alpha = Alpha(cfg.alpha)
    out_dir = cfg.resolved_output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    stream = RngStream(cfg.seed)
    lines = [_provenance_lines(cfg, kind)]
    if kind == "jumps":
        lines.append("sequence_id,rank,magnitude\n")
        for i, sub in enumerate(stream.split(cfg.n_draws)):
            seq = sample_jump_field(alpha, 1.0, cfg.epsilon, sub)
            lines.extend(f"{i},{r + 1},{j!r}\n" for r, j in enumerate(seq.jumps))
    elif kind == "conditioned-jumps":
        lines.append("sequence_id,rank,magnitude\n")
        for i, sub in enumerate(stream.split(cfg.n_draws)):
            seq = sample_conditioned_jumps(
                alpha, 1.0, 1.0, sub, k_max=cfg.k_max, delta=cfg.delta
            )
            lines.extend(f"{i},{r + 1},{j!r}\n" for r, j in enumerate(seq.jumps))
    elif kind == "skeleton":
        lines.append("draw_id,shape,labels\n")
        for i, sub in enumerate(stream.split(cfg.n_draws)):
            tree = sample_skeleton(min(max(cfg.n_vertices, 2), 8), alpha, sub)
            shape = repr(tree.skeleton).replace(" ", "")
            lines.append(f"{i},\"{shape}\",{'+'.join(map(str, tree.leaf_labels))}\n")
    elif kind == "gw-tree":
        lines.append("tree_id,position,height\n")
        for i, sub in enumerate(stream.split(cfg.n_draws)):
            path = sample_conditioned_gw_tree(cfg.n_vertices, alpha, sub)
            lines.extend(f"{i},{p},{h}\n" for p, h in enumerate(path.heights))
    elif kind == "fragmentation":
        lines.append("tree_id,level,rank,mass\n")
        for i, sub in enumerate(stream.split(cfg.n_draws)):
            path = sample_conditioned_gw_tree(cfg.n_vertices, alpha, sub)
            for level in range(int(path.heights.max()) + 1):
                masses = fragment_at_height(path, level).masses
                lines.extend(
                    f"{i},{level},{r + 1},{m!r}\n" for r, m in enumerate(masses)
                )
    elif kind == "csbp-path":
        lines.append("path_id,t,value\n")
        for i, sub in enumerate(stream.split(cfg.n_draws)):
            path = csbp_sample_path(CsbpParams(alpha, 1.0), cfg.t_max, cfg.dt, sub)
            lines.extend(
                f"{i},{t!r},{v!r}\n" for t, v in zip(path.times, path.values)
            )
    else:
        print(f"unknown sample kind {kind!r}", file=sys.stderr)
        return 2
    path = out_dir / f"sample_{kind.replace('-', '_')}.csv"
    path.write_text("".join(lines))
    print(f"sample: wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# estimate


def cmd_estimate(cfg: RunConfig, functionals: list[str] | None = None) -> int:
    alpha = Alpha(cfg.alpha)
    base = RngStream(cfg.seed)
    streams = base.split(8)
    spec = functionals or ["power_sum:1.0", "mass_defect", "largest_below:0.3"]
    jobs = {}
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        for i, name in enumerate(spec):
            kind, _, param = name.partition(":")
            if kind == "power_sum":
                fn = DislocationFunctional("power_sum", r=float(param or 1.0))
            elif kind == "largest_below":
                fn = DislocationFunctional("largest_below", delta=float(param or 0.3))
            elif kind == "mass_defect":
                fn = DislocationFunctional("mass_defect")
            else:
                print(f"unknown functional {name!r}", file=sys.stderr)
                return 2
            jobs[name] = pool.submit(
                dislocation_mc, fn, alpha, cfg.n_samples, streams[i % 4], cfg.epsilon
            )
        chi_first = pool.submit(
            first_split_chi_square, 4, alpha, min(cfg.n_samples, 100_000), streams[4]
        )
        chi_pair = pool.submit(
            conditioned_pair_chi_square, alpha, min(cfg.n_samples, 20_000), streams[5]
        )
        moments = pool.submit(
            root_mark_moment_check, alpha, min(10 * cfg.n_samples, 1_000_000), streams[6]
        )
        cond_mean = pool.submit(
            conditional_mean_check, alpha, 1.0, min(cfg.n_samples, 10_000), streams[7]
        )
    results = []
    for name, job in jobs.items():
        est = job.result()
        block = {
            "block": "dislocation_mc",
            "functional": name,
            "n_samples": est.n_samples,
            "epsilon": est.epsilon,
            "estimate": est.estimate,
            "stderr": est.stderr,
            "estimate_2eps": est.estimate_2eps,
            "epsilon_shift_sigmas": est.epsilon_shift_sigmas(),
            "hill_index": est.hill_index,
            "heavy_tail_warning": est.heavy_tail_warning,
        }
        if name.startswith("power_sum"):
            target = phi_closed(float(name.partition(":")[2] or 1.0), alpha)
            block["target"] = target
            block["pass"] = bool(
                abs(est.estimate - target) < 3.0 * est.stderr
                and est.epsilon_shift_sigmas() < 1.0
            )
        elif name == "mass_defect":
            block["target"] = 0.0
            block["pass"] = bool(est.estimate == 0.0)
        results.append(block)
    results.append({"block": "chi_square", **chi_first.result()})
    results.append({"block": "chi_square", **chi_pair.result()})
    for entry in moments.result():
        results.append({"block": "moments", **entry})
    results.append({"block": "moments", **cond_mean.result()})
    path = _write_report(cfg, "estimate", results, "estimate_report.json")
    n_flag = sum(1 for r in results if r.get("pass") is False)
    print(f"estimate: {len(results)} blocks, {n_flag} flagged -> {path}")
    return 0


# ---------------------------------------------------------------------------
# asymptotics


def cmd_asymptotics(cfg: RunConfig) -> int:
    alpha = Alpha(cfg.alpha)
    results = []
    lam_grid = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0]
    for lam in lam_grid:
        results.append(
            {
                "block": "limit_transform",
                "lambda": lam,
                "limit_T_Y1": limit_T_Y1_laplace(lam, alpha) if lam > 0 else 1.0,
                "entrance_r1": conditioned_entrance_laplace(1.0, lam, alpha) if lam > 0 else 1.0,
            }
        )
    streams = RngStream(cfg.seed).split(2)
    budget_ok = cfg.n_trees >= 10 and cfg.n_vertices >= 1000
    if budget_ok:
        results.append(
            {
                "block": "cross_n_ks",
                **largest_fragment_cross_n_ks(
                    alpha,
                    max(cfg.n_vertices // 5, 500),
                    cfg.n_vertices,
                    cfg.n_trees,
                    streams[0],
                ),
            }
        )
        results.append(
            {
                "block": "dust_fit",
                **dust_limit_comparison(alpha, cfg.n_vertices, cfg.n_trees, streams[1]),
            }
        )
    else:
        results.append({"block": "cross_n_ks", "skipped": "insufficient sample budget"})
        results.append({"block": "dust_fit", "skipped": "insufficient sample budget"})
    path = _write_report(cfg, "asymptotics", results, "asymptotics_report.json")
    print(f"asymptotics: {len(results)} blocks -> {path}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stablefrag",
        description="Verification runs and samplers for the stable-tree height fragmentation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the exact/quadrature identity suites")
    p_verify.add_argument("--config", default=None)
    p_verify.add_argument("--alpha", action="append", type=float, default=None)
    p_verify.add_argument("--tol", action="append", default=[], metavar="NAME=V")
    p_verify.add_argument("--out", default=None)

    p_sample = sub.add_parser("sample", help="write sampler CSV dumps")
    p_sample.add_argument("--kind", required=True)
    p_sample.add_argument("--config", default=None)
    p_sample.add_argument("--n", type=int, default=None)
    p_sample.add_argument("--seed", type=int, default=None)
    p_sample.add_argument("--n-vertices", type=int, default=None)
    p_sample.add_argument("--out", default=None)

    p_est = sub.add_parser("estimate", help="Monte Carlo functionals and sampler-vs-law suites")
    p_est.add_argument("--config", default=None)
    p_est.add_argument("--functional", action="append", default=None)
    p_est.add_argument("--samples", type=int, default=None)
    p_est.add_argument("--epsilon", type=float, default=None)
    p_est.add_argument("--seed", type=int, default=None)
    p_est.add_argument("--out", default=None)

    p_asym = sub.add_parser("asymptotics", help="limit transforms and scaling-invariance checks")
    p_asym.add_argument("--config", default=None)
    p_asym.add_argument("--n-vertices", type=int, default=None)
    p_asym.add_argument("--trees", type=int, default=None)
    p_asym.add_argument("--seed", type=int, default=None)
    p_asym.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if getattr(args, "alpha", None):
            cfg.alpha_grid = list(args.alpha)
            cfg.alpha = args.alpha[0]
        for spec in getattr(args, "tol", []):
            name, _, val = spec.partition("=")
            if not val:
                raise ConfigError(f"bad --tol override {spec!r}")
            cfg.tolerances[name] = float(val)
        if getattr(args, "n", None) is not None:
            cfg.n_draws = args.n
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
        if getattr(args, "samples", None) is not None:
            cfg.n_samples = args.samples
        if getattr(args, "epsilon", None) is not None:
            cfg.epsilon = args.epsilon
        if getattr(args, "n_vertices", None) is not None:
            cfg.n_vertices = args.n_vertices
        if getattr(args, "trees", None) is not None:
            cfg.n_trees = args.trees
        if getattr(args, "out", None):
            cfg.output_dir = args.out
        cfg.validate()
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "verify":
        return cmd_verify(cfg)
    if args.command == "sample":
        return cmd_sample(args.kind, cfg)
    if args.command == "estimate":
        return cmd_estimate(cfg, args.functional)
    if args.command == "asymptotics":
        return cmd_asymptotics(cfg)
    return 2


if __name__ == "__main__":
    sys.exit(main())
