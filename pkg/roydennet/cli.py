"""
roydennet command line
----------------------
Subcommands::

    space validate|profile|generate
    net extract|audit
    transfer smooth|discretize
    solve
    decompose
    verify <check>|all

Exit codes: 0 success, 1 a verification or audit failed (or a solve did not
converge), 2 bad input or configuration.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field

from roydennet import __version__
from roydennet.artifacts import (
    read_boundary,
    read_field,
    read_net,
    read_space,
    write_curves,
    write_field,
    write_json,
    write_net,
    write_report,
    write_space_file,
    write_verification,
)
from roydennet.config import (
    ADJACENCY_FACTOR,
    DEFAULT_MAX_SWEEPS,
    DEFAULT_SEED,
    DEFAULT_TOL,
    DEFAULT_TRIALS,
    LOG_LEVEL,
    OUTPUT_DIR,
    SCHEMA,
    threads_from_env,
)
from roydennet.dirichlet import (
    ENERGY_MODES,
    INITIAL_RULES,
    SOLVE_MODES,
    DirichletProblem,
    EnergySpec,
    royden_split,
    solve,
)
from roydennet.errors import ConfigError, InputError, RoydenNetError, SolverError
from roydennet.generators import GENERATORS, generate_space
from roydennet.geometry import diameter_estimate, volume_profile
from roydennet.net import audit_net, bounded_geometry, estimate_qi, extract_net, verify_qi
from roydennet.transfer import build_partition, discretize, smooth
from roydennet.verify import CHECKS, VerifyOptions, run_check, run_suite

logger = logging.getLogger("RoydenNet.cli")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ids, got {text!r}") from None


@dataclass
class RunConfig:
    command: str
    action: str | None = None
    kind: str | None = None
    space_path: str | None = None
    net_path: str | None = None
    field_path: str | None = None
    boundary_path: str | None = None
    order_path: str | None = None
    kappa: float | None = None
    adjacency_factor: float = ADJACENCY_FACTOR
    p: float | None = None
    energy_mode: str | None = None
    tol: float = DEFAULT_TOL
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    solve_mode: str = "sequential"
    initial: str = "harmonic"
    seed: int = DEFAULT_SEED
    trials: int = DEFAULT_TRIALS
    threads: int = 1
    base: int | None = None
    radii: list[float] = field(default_factory=list)
    kappas: list[float] | None = None
    centers: list[int] | None = None
    qi: bool = False
    generator_params: dict = field(default_factory=dict)
    out: str | None = None
    report: str | None = None
    curves: str | None = None
    log_level: str = LOG_LEVEL

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        values = {k: v for k, v in vars(args).items() if k in known and v is not None}
        values["threads"] = threads_from_env(getattr(args, "threads", None))
        values["generator_params"] = {
            name: getattr(args, name)
            for name in ("n", "width", "height", "degree", "depth", "rings", "spacing")
            if getattr(args, name, None) is not None
        }
        return cls(**values)

    def validate(self) -> "RunConfig":
        if self.p is not None and not self.p > 1:
            raise ConfigError("p", "p must exceed 1")
        if self.kappa is not None and not self.kappa > 0:
            raise ConfigError("kappa", "kappa must be positive")
        if self.kappas is not None and any(not k > 0 for k in self.kappas):
            raise ConfigError("kappas", "every kappa must be positive")
        if not self.tol > 0:
            raise ConfigError("tol", "tol must be positive")
        if self.max_sweeps < 0:
            raise ConfigError("max_sweeps", "max-sweeps must be nonnegative")
        if self.trials < 1:
            raise ConfigError("trials", "trials must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads", "threads must be at least 1")
        if not self.adjacency_factor > 0:
            raise ConfigError("adjacency_factor", "adjacency factor must be positive")
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ConfigError("radii", "radii must be strictly increasing")
        for name in ("space_path", "net_path", "field_path", "boundary_path", "order_path"):
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise InputError(f"no such file: {path}")
        return self

    def energy_spec(self, space) -> EnergySpec:
        p = 2.0 if self.p is None else self.p
        if self.energy_mode is None:
            return EnergySpec.for_space(space, p)
        return EnergySpec(p, self.energy_mode)

    def verify_options(self) -> VerifyOptions:
        return VerifyOptions(
            p=2.0 if self.p is None else self.p,
            trials=self.trials,
            seed=self.seed,
            threads=self.threads,
            base=self.base,
            tol=self.tol,
            max_sweeps=self.max_sweeps,
            kappas=self.kappas,
        )


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", dest="log_level", default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="logging level")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: ROYDENNET_THREADS or 1)")

    parser = argparse.ArgumentParser(prog="roydennet", description="Discrete p-harmonic analysis on κ-nets")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    # space
    space = commands.add_parser("space", help="load, profile or generate spaces")
    space_actions = space.add_subparsers(dest="action", required=True)
    p = space_actions.add_parser("validate", parents=[common], help="check a space file")
    p.add_argument("space_path")
    p = space_actions.add_parser("profile", parents=[common], help="ball volume profile")
    p.add_argument("space_path")
    p.add_argument("--radii", type=_floats, required=True)
    p.add_argument("--centers", type=_ints, help="sample centers (default: every vertex)")
    p.add_argument("--out")
    p = space_actions.add_parser("generate", parents=[common], help="write a fixture space")
    p.add_argument("kind", choices=sorted(GENERATORS))
    p.add_argument("--n", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--rings", type=int)
    p.add_argument("--spacing", type=float)
    p.add_argument("--out", required=True)

    # net
    net = commands.add_parser("net", help="extract or audit κ-nets")
    net_actions = net.add_subparsers(dest="action", required=True)
    p = net_actions.add_parser("extract", parents=[common], help="greedy κ-net")
    p.add_argument("space_path")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--order", dest="order_path", help="file of vertex ids in scan order")
    p.add_argument("--adjacency-factor", dest="adjacency_factor", type=float)
    p.add_argument("--out", required=True)
    p = net_actions.add_parser("audit", parents=[common], help="exhaustive net audit")
    p.add_argument("space_path")
    p.add_argument("net_path")
    p.add_argument("--r", dest="radii", type=_floats, help="bounded-geometry radii")
    p.add_argument("--qi", action="store_true", help="estimate and re-verify quasi-isometry constants")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    # transfer
    transfer = commands.add_parser("transfer", help="smooth or discretize a field")
    transfer_actions = transfer.add_subparsers(dest="action", required=True)
    for name in ("smooth", "discretize"):
        p = transfer_actions.add_parser(name, parents=[common])
        p.add_argument("space_path")
        p.add_argument("net_path")
        p.add_argument("field_path")
        p.add_argument("--out", required=True)

    # solve
    p = commands.add_parser("solve", parents=[common], help="p-Dirichlet problem")
    p.add_argument("space_path")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--boundary", dest="boundary_path", required=True)
    p.add_argument("--energy-mode", dest="energy_mode", choices=ENERGY_MODES)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int)
    p.add_argument("--mode", dest="solve_mode", choices=SOLVE_MODES)
    p.add_argument("--initial", choices=INITIAL_RULES)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="solve report JSON")

    # decompose
    p = commands.add_parser("decompose", parents=[common], help="exhaustion Royden split")
    p.add_argument("space_path")
    p.add_argument("--field", dest="field_path", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--base", type=int, required=True)
    p.add_argument("--radii", type=_floats, required=True)
    p.add_argument("--energy-mode", dest="energy_mode", choices=ENERGY_MODES)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int)
    p.add_argument("--out")

    # verify
    p = commands.add_parser("verify", parents=[common], help="run verification checks")
    p.add_argument("action", metavar="check", choices=sorted(CHECKS) + ["all"])
    p.add_argument("space_path")
    p.add_argument("net_path", nargs="?")
    p.add_argument("--kappa", type=float, help="extract a net when no net.json is given")
    p.add_argument("--kappas", type=_floats, help="κ schedule for roundtrip-refinement")
    p.add_argument("--p", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--base", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int)
    p.add_argument("--out")
    p.add_argument("--curves", help="directory for CSV curve dumps")
    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _space_command(cfg: RunConfig) -> int:
    if cfg.action == "generate":
        space = generate_space(cfg.kind, **cfg.generator_params)
        write_space_file(cfg.out, space)
        _emit({"vertices": len(space), "edges": len(space.edge_lengths), "path": cfg.out})
        return 0

    space = read_space(cfg.space_path)
    summary = {
        "kind": space.kind,
        "vertices": len(space),
        "edges": len(space.edge_lengths),
        "degree_bound": space.degree_bound,
        "max_edge_length": space.max_edge_length,
        "boundary": len(space.boundary),
    }
    if cfg.action == "validate":
        _emit(summary)
        return 0

    profile = volume_profile(space, cfg.radii, cfg.centers)
    payload = {"space": summary, "profile": profile.to_dict(), "diameter_estimate": diameter_estimate(space)}
    if cfg.out:
        write_report(cfg.out, payload)
    else:
        _emit(payload)
    return 0


def _read_order(path: str) -> list[int]:
    with open(path) as f:
        try:
            return [int(t) for t in f.read().split()]
        except ValueError:
            raise InputError(f"{path}: order file must list integer vertex ids") from None


def _net_command(cfg: RunConfig) -> int:
    space = read_space(cfg.space_path)
    if cfg.action == "extract":
        order = _read_order(cfg.order_path) if cfg.order_path else None
        net = extract_net(space, cfg.kappa, order, cfg.adjacency_factor)
        write_net(cfg.out, net)
        _emit({"points": len(net), "degree_bound": net.degree_bound, "path": cfg.out})
        return 0

    net = read_net(cfg.net_path, space)
    audit = audit_net(net)
    payload = {
        "audit": audit.to_dict(),
        "covering_radius": float(net.distances.min(axis=0).max()),
        "bounded_geometry": {repr(r): bounded_geometry(net, r) for r in cfg.radii},
    }
    ok = audit.ok
    if cfg.qi:
        estimate = estimate_qi(net, seed=cfg.seed)
        verified = verify_qi(net, estimate)
        payload["qi"] = {**estimate.to_dict(), "verified": verified}
        ok = ok and verified
    if cfg.out:
        write_report(cfg.out, payload)
    else:
        _emit(payload)
    return 0 if ok else 1


def _transfer_command(cfg: RunConfig) -> int:
    space = read_space(cfg.space_path)
    net = read_net(cfg.net_path, space)
    field_in = read_field(cfg.field_path)
    if cfg.action == "smooth":
        result = smooth(field_in, build_partition(space, net))
    else:
        result = discretize(field_in, net)
    write_field(cfg.out, result)
    return 0


def _solve_command(cfg: RunConfig) -> int:
    space = read_space(cfg.space_path)
    problem = DirichletProblem(space, cfg.energy_spec(space), read_boundary(cfg.boundary_path))
    solution = solve(
        problem,
        tol=cfg.tol,
        max_sweeps=cfg.max_sweeps,
        initial=cfg.initial,
        mode=cfg.solve_mode,
        seed=cfg.seed,
        threads=cfg.threads,
    )
    write_field(cfg.out, solution.field)
    payload = {**solution.to_dict(), "spec": problem.spec.to_dict()}
    if cfg.report:
        write_report(cfg.report, payload)
    _emit(payload)
    return 0


def _decompose_command(cfg: RunConfig) -> int:
    space = read_space(cfg.space_path)
    f = read_field(cfg.field_path)
    spec = cfg.energy_spec(space)
    split = royden_split(
        space, f, spec, cfg.base, cfg.radii, tol=cfg.tol, max_sweeps=cfg.max_sweeps, threads=cfg.threads
    )
    payload = {**split.to_dict(), "spec": spec.to_dict()}
    if cfg.out:
        write_report(cfg.out, payload)
    else:
        _emit(payload)
    return 0


def _verify_command(cfg: RunConfig) -> int:
    space = read_space(cfg.space_path)
    if cfg.net_path:
        net = read_net(cfg.net_path, space)
    elif cfg.kappa is not None:
        net = extract_net(space, cfg.kappa)
    else:
        raise ConfigError("kappa", "kappa is required when no net.json is given")

    options = cfg.verify_options()
    if cfg.action == "all":
        reports = run_suite(space, net, options)
    else:
        reports = [run_check(cfg.action, space, net, options)]

    out = cfg.out or os.path.join(OUTPUT_DIR, "report.json")
    write_verification(out, reports)
    if cfg.curves:
        write_curves(cfg.curves, reports)
    failed = [r.check for r in reports if r.passed is False]
    if failed:
        logger.warning(f"Failed checks: {', '.join(failed)}")
        return 1
    return 0


HANDLERS = {
    "space": _space_command,
    "net": _net_command,
    "transfer": _transfer_command,
    "solve": _solve_command,
    "decompose": _decompose_command,
    "verify": _verify_command,
}


def run(argv: list[str] | None = None, configure_logging: bool = False) -> int:
    """Parse ``argv``, run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        cfg = RunConfig.from_args(args)
        if configure_logging:
            logging.basicConfig(
                level=getattr(logging, cfg.log_level.upper(), logging.INFO),
                format="%(asctime)s - %(levelname)s - %(message)s",
            )
        cfg.validate()
        return HANDLERS[cfg.command](cfg)
    except InputError as e:
        print(f"roydennet: error: {e}", file=sys.stderr)
        return 2
    except SolverError as e:
        print(f"roydennet: solver failed: {e}", file=sys.stderr)
        return 1
    except RoydenNetError as e:
        print(f"roydennet: error: {e}", file=sys.stderr)
        return 2


def main_cli():
    sys.exit(run(sys.argv[1:], configure_logging=True))


if __name__ == "__main__":
    main_cli()
