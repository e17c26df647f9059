"""Command-line front end.

Exit status: 0 on success, 1 when ``solve --verify`` finds a mismatch,
2 for bad arguments or malformed input files. Output files are written
atomically, so a failed command never leaves a partial artifact behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

from . import escrow, harness
from .chain import DomainError
from .games import Equilibrium, PayAndExitGame, max_ransom_pay_and_exit, solve_spne
from .harness import ConfigError
from .slashing import forecast_total_penalty
from .units import describe


class CliError(Exception):
    """Reported on stderr with exit status 2."""


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _load_json(path: str, what: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"{what}: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{what}: {path} is not valid JSON ({exc})") from None


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _scenario(path: str, seed: int | None) -> harness.Scenario:
    data = _load_json(path, "scenario")
    if seed is not None and isinstance(data, dict):
        data = {**data, "seed": seed}
    return harness.scenario_from_dict(data)


# commands ----------------------------------------------------------------------


def cmd_simulate(args) -> str:
    report = harness.run(_scenario(args.scenario, args.seed))
    out = report.series_csv() if args.format == "csv" else report.to_json()
    if args.out:
        _write(args.out, out)
    return (
        f"{report.strategy}: escrow {report.escrow_outcome}, ransom paid {describe(report.ransom_paid)}, "
        f"slashing losses {describe(report.slashing_losses)}"
    )


def _game(data, what: str) -> PayAndExitGame:
    try:
        return PayAndExitGame.from_dict(data)
    except (DomainError, TypeError, ValueError, AttributeError) as exc:
        raise CliError(f"{what}: {exc}") from None


def cmd_solve(args) -> str:
    data = _load_json(args.game, "game")
    if args.verify:
        if not isinstance(data, dict) or not {"game", "tick", "equilibrium"} <= set(data):
            raise CliError("game: --verify expects an earlier solve output with game, tick and equilibrium")
        game = _game(data["game"], "game")
        tick = int(data["tick"]) if args.tick is None else args.tick
        try:
            expected = Equilibrium.from_dict(data["equilibrium"])
        except (KeyError, ValueError) as exc:
            raise CliError(f"equilibrium: {exc}") from None
        got = solve_spne(game, tick)
        if got != expected:
            print("mismatch: recomputed equilibrium differs", file=sys.stderr)
            raise SystemExit(1)
        return f"verified: R = {describe(got.ransom_R)}"
    if args.tick is None:
        raise CliError("tick: --tick is required")
    game = _game(data, "game")
    eq = solve_spne(game, args.tick)
    payload = {"game": game.to_dict(), "tick": args.tick, "equilibrium": eq.to_dict()}
    _write(args.out, _dumps(payload))
    path = "Deposit, NotSlash" if eq.victim_action.value == "Deposit" else f"NotDeposit, {eq.attacker_action_on_no_deposit.value}"
    return f"R = {describe(eq.ransom_R)} ({path}; credible={str(eq.credible).lower()})"


def cmd_bound(args) -> str:
    if args.scenario:
        sc = _scenario(args.scenario, args.seed)
        state = harness.build_state(sc)
        h = forecast_total_penalty(state, sc.compromised_ids(state), sc.deadline, sc.attack.forecast).total
        f = sc.attack.fee_f if args.f is None else args.f
    else:
        if args.H is None:
            raise CliError("H: give --H or --scenario")
        h, f = args.H, 0 if args.f is None else args.f
    if h < 0 or f < 0:
        raise CliError("H and f must be non-negative")
    bound = max_ransom_pay_and_exit(PayAndExitGame(0, h, f))
    if args.out:
        _write(args.out, _dumps({"H": h, "f": f, "max_ransom": bound}))
    return f"R̄_E = {describe(bound)}"


def cmd_escrow_check(args) -> str:
    events = escrow.read_trace(args.trace)
    data = _load_json(args.contract, "contract")
    if not isinstance(data, dict):
        raise CliError("contract: expected a JSON object")
    contract = escrow.contract_from_dict(data)
    final, transfers = escrow.replay(contract, events)
    oracle = escrow.settlement_outcome(events, contract.ransom, contract.deadline, contract.compromised)
    if final.settlement != oracle:
        raise CliError(f"trace: fold gives {final.settlement.value} but history inspection gives {oracle.value}")
    if args.out:
        result = {"settlement": oracle.value, "contract": final.to_dict(),
                  "transfers": [{"kind": t.kind, "amount": t.amount, "surplus": t.surplus} for t in transfers]}
        _write(args.out, _dumps(result))
    return oracle.value


def cmd_sweep(args) -> str:
    sc = _scenario(args.scenario, args.seed)
    grid = _load_json(args.grid, "grid")
    if isinstance(grid, dict):
        grid = grid.get("grid")
    if not isinstance(grid, list) or not all(isinstance(p, list) and len(p) == 3 for p in grid):
        raise CliError("grid: expected a list of [delta, big_delta, initial_divisor] triples")
    try:
        rows = harness.penalty_sweep(sc, grid)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise CliError(f"grid: {exc}") from None
    text = _dumps(rows) if args.format == "json" else harness.rows_to_csv(rows)
    _write(args.out, text)
    low = min(rows, key=lambda r: r["max_ransom"])
    return f"{len(rows)} grid points, lowest R̄_E = {describe(low['max_ransom'])}"


def cmd_population(args) -> str:
    data = _load_json(args.buckets, "buckets")
    open_cap = None
    if isinstance(data, dict):
        open_cap = data.get("open_cap")
        if "preset" in data:
            if data["preset"] not in harness.PRESETS:
                raise CliError(f"preset: expected one of {sorted(harness.PRESETS)}")
            data = harness.PRESETS[data["preset"]]
        else:
            data = data.get("buckets")
    if not isinstance(data, list) or not all(isinstance(b, list | tuple) and len(b) == 3 for b in data):
        raise CliError("buckets: expected a list of [min, max|null, stakers] triples")
    pop = harness.population_from_distribution([tuple(b) for b in data], args.seed or 0, open_cap)
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["staker", "validators"])
        writer.writerows(enumerate(pop.validators_per_staker.tolist()))
        text = buf.getvalue()
    else:
        text = json.dumps(pop.to_dict()) + "\n"
    _write(args.out, text)
    return f"{pop.num_stakers:,} stakers, {pop.num_validators:,} validators at 32 ETH each"


# parser ------------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, default_format: str = "json") -> None:
    p.add_argument("--seed", type=int, default=None, help="override the seed")
    p.add_argument("--out", default=None, help="output file (written atomically)")
    p.add_argument("--format", choices=("json", "csv"), default=default_format)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stakeransom", description="Validator extortion simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario end to end")
    p.add_argument("scenario")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve", help="solve a Pay-and-Exit game")
    p.add_argument("game", help="game JSON, or an earlier solve output with --verify")
    p.add_argument("--tick", type=int, default=None, help="ransom granularity in Gwei")
    p.add_argument("--verify", action="store_true", help="re-solve and compare with the stored equilibrium")
    _common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bound", help="maximum ransom H - f")
    p.add_argument("--H", type=int, default=None, help="total slashing penalty in Gwei")
    p.add_argument("--f", type=int, default=None, help="victim's fee in Gwei")
    p.add_argument("--scenario", default=None, help="forecast H from a scenario instead")
    _common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("escrow-check", help="settle an escrow contract against an event trace")
    p.add_argument("trace", help="JSONL file of chain events")
    p.add_argument("contract", help="contract JSON: ransom, deadline, compromised")
    _common(p)
    p.set_defaults(func=cmd_escrow_check)

    p = sub.add_parser("sweep", help="maximum ransom across slashing parameters")
    p.add_argument("scenario")
    p.add_argument("grid", help="JSON list of [delta, big_delta, initial_divisor]")
    _common(p, "csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("population", help="synthesize stakers from a bucket distribution")
    p.add_argument("buckets")
    p.add_argument("out_path", nargs="?", default=None)
    _common(p)
    p.set_defaults(func=cmd_population)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "out_path", None):
        args.out = args.out_path
    try:
        summary = args.func(args)
    except (CliError, ConfigError, DomainError, escrow.ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 2
    # keep stdout clean when it carries the artifact itself
    data_on_stdout = args.out is None and args.command in ("solve", "population", "sweep")
    print(summary, file=sys.stderr if data_on_stdout else sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
