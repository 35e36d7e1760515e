"""Command-line entry point: ``qds-forge <command> [options]``.

Commands
--------
hash      hash a message file with a seed-derived polynomial and key
session   run one (or many) signing rounds over a simulated channel
attack    Monte Carlo forgery attempts against the verifier
security  print a SecurityReport from direct inputs or from the SNS pipeline
rate      optimize the signature rate independently at each distance (CSV)
sweep     optimize along a distance list with warm starts (CSV)

Every option can also come from a JSON ``--config`` document; explicit flags
win.  Exit status is 0 on success, 2 for invalid input and 3 when the
configuration is infeasible.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields, replace
from typing import Any, Optional, Sequence

from .bitcore import BitString, binary_entropy, gen_irreducible, hamming_ball_size
from .channel_sim import AdversaryModel, ErrorMode, guessing_attack, simulate_kgp, tamper_attack
from .lfsr_hash import HashSpec, toeplitz_hash
from .optimizer import DEFAULT_EPS, DEFAULT_M, RatePoint, SearchBounds, evaluate, search, sweep
from .protocol import ReceiverState, likely_radius, run_session
from .security import guessing_bound, hash_forgery_bound, log2_hash_forgery_bound, security_level
from .seeding import derive_seed, rng_for
from .sns_model import ChannelParams, FailureProbs, Infeasible, SnsParams

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 2, 3

CSV_VERSION_LINE = "# qds-forge csv v1"
CSV_COLUMNS = (
    "distance_km", "N", "mu", "mu1", "mu2", "q", "pz", "p0", "p1", "n", "E", "Delta1", "eph",
    "log2_pg", "log2_ph", "log2_eps", "R", "feasible",
)
DEFAULT_DISTANCES = tuple(float(d) for d in range(100, 501, 50))


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a command may need; defaults follow the standard system table."""

    seed: int = 0
    channel: ChannelParams = field(default_factory=ChannelParams)
    sns: SnsParams = field(default_factory=SnsParams)
    failure: FailureProbs = field(default_factory=FailureProbs)
    eps_target: float = DEFAULT_EPS
    m: int = DEFAULT_M
    # desk-scale protocol sizes
    n: int = 16
    message_bits: int = 256
    error_rates: tuple[float, float, float, float] = (0.02, 0.02, 0.02, 0.02)
    error_mode: str = "exact_count"
    variant: str = "original"
    adversary: str = "none"
    p_e: float = 0.25
    trials: int = 1
    radii: Optional[tuple[int, int]] = None
    distances: tuple[float, ...] = DEFAULT_DISTANCES
    budget: int = 10_000
    search_bounds: SearchBounds = field(default_factory=SearchBounds)

    @classmethod
    def from_json(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls()
        kw: dict[str, Any] = {}
        for name in ("channel", "sns", "failure"):
            if name in doc:
                kw[name] = replace(getattr(cfg, name), **doc[name])
        if "search_bounds" in doc:
            sb = {k: tuple(v) if isinstance(v, list) else v for k, v in doc["search_bounds"].items()}
            kw["search_bounds"] = replace(cfg.search_bounds, **sb)
        for k, v in doc.items():
            if k in kw:
                continue
            if k in ("error_rates", "distances", "radii") and v is not None:
                v = tuple(v)
            kw[k] = v
        return replace(cfg, **kw)


# -- helpers -----------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.replace(" ", "").split(",") if t)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _message_from_file(path: str) -> BitString:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data:
        raise UsageError(f"{path}: empty message")
    return BitString.from_bytes((8 * len(data)).to_bytes(8, "little") + data)


class _Output:
    """Collects primary output and writes it once, to --out or stdout."""

    def __init__(self, path: Optional[str]):
        self.path = path
        self.buf = io.StringIO()

    def line(self, text: str = "") -> None:
        self.buf.write(text + "\n")

    def flush(self) -> None:
        if self.path is None:
            sys.stdout.write(self.buf.getvalue())
            return
        try:
            with open(self.path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(self.buf.getvalue())
        except OSError as exc:
            raise UsageError(f"cannot write {self.path}: {exc.strerror}") from exc


# -- commands ----------------------------------------------------------------


def cmd_hash(cfg: RunConfig, args) -> int:
    if args.message is None:
        raise UsageError("hash needs --message <file>")
    try:
        msg = _message_from_file(args.message)
    except OSError as exc:
        raise UsageError(f"{args.message}: {exc.strerror}") from exc
    rng = rng_for(cfg.seed, "cli-hash")
    poly_seed = BitString.random(rng, cfg.n)
    key = BitString.random(rng, cfg.n)
    poly = gen_irreducible(poly_seed, cfg.n)
    h = toeplitz_hash(HashSpec(poly, key), msg)
    out = _Output(args.out)
    out.line(f"n={cfg.n}")
    out.line(f"m={msg.length}")
    out.line(f"poly={poly}")
    out.line(f"init={key.to_hex()}")
    out.line(f"hash={h.to_hex()}")
    out.flush()
    return EXIT_OK


def _session_radii(cfg: RunConfig) -> tuple[int, int]:
    if cfg.radii is not None:
        return cfg.radii
    e1, e2, e3, e4 = cfg.error_rates
    try:
        return likely_radius(cfg.n, e1, e3), likely_radius(2 * cfg.n, e2, e4)
    except ValueError as exc:
        raise Infeasible("likely_set_error_too_high", str(exc)) from exc


def _round(cfg: RunConfig, t: int):
    keys = simulate_kgp(cfg.n, cfg.error_rates, ErrorMode(cfg.error_mode), seed=derive_seed(cfg.seed, "kgp-round", t))
    rng = rng_for(cfg.seed, "round", t)
    message = BitString.random(rng, cfg.message_bits)
    p_seed = BitString.random(rng, cfg.n)
    return keys, message, p_seed


_ADVERSARIES = {"guess": "guess_keys", "tamper": "tamper_message", "forge": "forge_pair"}


def cmd_session(cfg: RunConfig, args) -> int:
    rx, ry = _session_radii(cfg)
    adv_kind = _ADVERSARIES.get(cfg.adversary) if cfg.adversary != "none" else None
    if cfg.adversary != "none" and adv_kind is None:
        raise UsageError(f"unknown adversary {cfg.adversary!r}")
    radii = cfg.radii
    accepted = 0
    first = None
    for t in range(cfg.trials):
        keys, message, p_seed = _round(cfg, t)
        adv = None
        if adv_kind is not None:
            adv = AdversaryModel(adv_kind, cfg.p_e, seed=derive_seed(cfg.seed, "adv", t))
        res = run_session(cfg.variant, keys, message, p_seed, adversary=adv, radii=radii)
        accepted += res.charlie.accepted
        if first is None:
            first = res
    out = _Output(args.out)
    for ln in first.transcript.to_text().splitlines():
        out.line(ln)
    out.flush()
    b = "accept" if first.bob.accepted else "reject"
    c = "accept" if first.charlie.accepted else "reject"
    print(f"bob={b} charlie={c} comparisons={first.charlie.comparisons_made}")
    if adv_kind is not None:
        nx, ny = hamming_ball_size(cfg.n, rx), hamming_ball_size(2 * cfg.n, ry)
        bound = hash_forgery_bound(cfg.message_bits, cfg.n, nx, ny)
        print(f"trials={cfg.trials} charlie_accept_frequency={_fmt(accepted / cfg.trials)} p_h_bound={_fmt(bound)}")
    return EXIT_OK


def cmd_attack(cfg: RunConfig, args) -> int:
    out = _Output(args.out)
    kind = cfg.adversary if cfg.adversary != "none" else "tamper"
    if kind == "guess":
        keys = simulate_kgp(cfg.n, cfg.error_rates, ErrorMode(cfg.error_mode), seed=cfg.seed)
        rate = guessing_attack(ReceiverState.for_bob(keys), cfg.p_e, cfg.trials, seed=cfg.seed)
        log2_bound = -cfg.n * binary_entropy(cfg.p_e)
        out.line("adversary=guess")
        out.line(f"trials={cfg.trials}")
        out.line(f"success_frequency={_fmt(rate)}")
        out.line(f"log2_bound={_fmt(log2_bound)}")
        out.line(f"bound={_fmt(2.0 ** log2_bound)}")
    elif kind in ("tamper", "forge"):
        rx, ry = _session_radii(cfg)
        radii = (rx, ry)

        def fixture(rng):
            keys = simulate_kgp(cfg.n, cfg.error_rates, ErrorMode(cfg.error_mode), seed=int(rng.integers(1 << 62)))
            return keys, BitString.random(rng, cfg.message_bits), BitString.random(rng, cfg.n)

        strategy = "random_message" if kind == "tamper" else "random_pair"
        res = tamper_attack(fixture, strategy, cfg.trials, seed=cfg.seed, variant=cfg.variant, radii=radii)
        bound = hash_forgery_bound(cfg.message_bits, cfg.n, hamming_ball_size(cfg.n, rx), hamming_ball_size(2 * cfg.n, ry))
        out.line(f"adversary={kind}")
        out.line(f"trials={res.trials}")
        out.line(f"accepted={res.accepted}")
        out.line(f"accept_frequency={_fmt(res.rate)}")
        out.line(f"p_h_bound={_fmt(bound)}")
    else:
        raise UsageError(f"unknown adversary {kind!r}")
    out.flush()
    return EXIT_OK


def cmd_security(cfg: RunConfig, args) -> int:
    out = _Output(args.out)
    if args.distance_km is not None:
        if len(args.distance_km) != 1:
            raise UsageError("security takes a single distance")
        ch = replace(cfg.channel, l=args.distance_km[0] / 2.0)
        pt = evaluate(cfg.sns, ch, cfg.failure, cfg.m, cfg.eps_target)
        if pt.report is None:
            print(f"infeasible: {pt.reason}", file=sys.stderr)
            return EXIT_INFEASIBLE
        report = pt.report
    else:
        n = cfg.n if args.n is None else args.n
        if args.delta1 is None or args.eph is None:
            raise UsageError("security needs --delta1 and --eph (or --distance-km)")
        nx = 1 if args.nx is None else args.nx
        ny = 1 if args.ny is None else args.ny
        m = cfg.m if args.m is None else args.m
        if n < 2 or m < 1 or nx < 1 or ny < 1:
            raise UsageError("need n >= 2, m >= 1, nx >= 1, ny >= 1")
        try:
            p_e, _, log2_pg = guessing_bound(n, args.delta1, args.eph)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        log2_nxny = math.log2(nx) + math.log2(ny)
        log2_ph = log2_hash_forgery_bound(m, n, log2_nxny)
        report = security_level(log2_pg, log2_ph, p_e, n=n, m=m, log2_nx=math.log2(nx), log2_ny=math.log2(ny))
    for ln in report.lines():
        out.line(ln)
    out.flush()
    return EXIT_OK


def csv_row(pt: RatePoint) -> str:
    p = pt.params
    est = pt.estimates
    rep = pt.report
    nan = float("nan")
    vals = [
        pt.distance_km, p.N, p.mu, p.mu1, p.mu2, p.q, p.p_z, p.p0, p.p1,
        est.n if est is not None else nan,
        est.E if est is not None else nan,
        est.Delta1 if est is not None else nan,
        est.e_ph if est is not None else nan,
        rep.log2_pg if rep is not None else nan,
        rep.log2_ph if rep is not None else nan,
        rep.log2_eps if rep is not None else nan,
        pt.R, pt.feasible,
    ]
    return ",".join(_fmt(v) for v in vals)


def write_csv(points: Sequence[RatePoint], out: _Output) -> None:
    out.line(CSV_VERSION_LINE)
    out.line(",".join(CSV_COLUMNS))
    for pt in points:
        out.line(csv_row(pt))


def _channel_kw(cfg: RunConfig) -> dict:
    c = cfg.channel
    return dict(alpha=c.alpha, eta_d=c.eta_d, p_d=c.p_d, e_d=c.e_d)


def cmd_rate(cfg: RunConfig, args) -> int:
    dists = cfg.distances if args.distance_km is None else args.distance_km
    if not dists:
        raise UsageError("empty distance list")
    pts = []
    for d in dists:
        ch = ChannelParams.for_distance(d, **_channel_kw(cfg))
        pts.append(search(ch, cfg.failure, cfg.m, cfg.budget, None, cfg.eps_target, cfg.search_bounds))
    out = _Output(args.out)
    write_csv(pts, out)
    out.flush()
    return EXIT_OK if any(p.feasible for p in pts) else EXIT_INFEASIBLE


def cmd_sweep(cfg: RunConfig, args) -> int:
    dists = cfg.distances if args.distance_km is None else args.distance_km
    if list(dists) != sorted(dists):
        raise UsageError("sweep distances must be ascending")
    pts = sweep(dists, cfg.failure, cfg.m, cfg.budget, cfg.eps_target, cfg.search_bounds, _channel_kw(cfg))
    out = _Output(args.out)
    write_csv(pts, out)
    out.flush()
    return EXIT_OK if not pts or any(p.feasible for p in pts) else EXIT_INFEASIBLE


COMMANDS = {
    "hash": cmd_hash,
    "session": cmd_session,
    "attack": cmd_attack,
    "security": cmd_security,
    "rate": cmd_rate,
    "sweep": cmd_sweep,
}


# -- argument parsing --------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON document with RunConfig fields")
    common.add_argument("--seed", type=_u64, help="64-bit master seed")
    common.add_argument("--out", help="write primary output here instead of stdout")
    common.add_argument("--variant", choices=("original", "improved"))
    common.add_argument("--distance-km", type=_float_list, help="comma-separated distances")
    common.add_argument("--budget", type=int, help="evaluation budget per distance")
    common.add_argument("--trials", type=int)
    common.add_argument("--adversary", choices=("none", "guess", "tamper", "forge"))
    common.add_argument("--n", type=int, help="key length in bits")
    common.add_argument("--message-bits", type=int)
    common.add_argument("--message", help="message file (hash)")
    common.add_argument("--m", type=int, help="message length for the security report")
    common.add_argument("--delta1", type=float)
    common.add_argument("--eph", type=float)
    common.add_argument("--nx", type=int)
    common.add_argument("--ny", type=int)
    common.add_argument("--p-e", type=float)

    parser = _Parser(prog="qds-forge", description="Likely-bit-string quantum digital signatures toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__)
    return parser


def _resolve(args) -> RunConfig:
    cfg = RunConfig()
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise UsageError(f"{args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON ({exc.msg})") from exc
        cfg = RunConfig.from_json(doc)
    flags = {
        "seed": args.seed,
        "variant": args.variant,
        "budget": args.budget,
        "trials": args.trials,
        "adversary": args.adversary,
        "n": args.n,
        "message_bits": args.message_bits,
        "p_e": args.p_e,
    }
    cfg = replace(cfg, **{k: v for k, v in flags.items() if v is not None})
    if args.command in ("rate", "sweep") and args.distance_km is not None:
        cfg = replace(cfg, distances=tuple(args.distance_km))
    if cfg.n < 2 or cfg.message_bits < 1 or cfg.trials < 1 or cfg.budget < 1:
        raise UsageError("need n >= 2, message bits >= 1, trials >= 1, budget >= 1")
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, ValueError, TypeError) as exc:
        print(f"qds-forge: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Infeasible as exc:
        print(f"qds-forge: infeasible: {exc.reason} {exc.detail}".rstrip(), file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
