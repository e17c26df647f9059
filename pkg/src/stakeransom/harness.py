"""Scenario files, synthetic staker populations, end-to-end attack runs and
the two mitigation experiments (validator partitioning, lighter slashing).

Randomness comes from numpy's PCG64 seeded through a ``SeedSequence``: the
main timeline and the counterfactual replay get independent child
streams, so a scenario with a fixed seed reproduces byte-for-byte.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from typing import Any

import numpy as np

from . import escrow
from .chain import ChainParams, ChainState, DomainError, Status
from .games import (
    PayAndExitGame,
    VictimAction,
    max_ransom_pay_and_exit,
    naive_policy,
    never_pay_policy,
    rational_policy,
    simulate_pay_or_slash,
    solve_spne,
)
from .slashing import ForecastAssumption, apply_slash, forecast_total_penalty, realized_penalty
from .units import Gwei, as_fraction

_EXITED = int(Status.EXITED)
_SLASHED_EXITED = int(Status.SLASHED_EXITED)

# (min validators, max validators or None for open-ended, number of stakers)
STAKERS_MARCH_2023 = [
    (1, 1, 83_365),
    (2, 5, 4_393),
    (6, 10, 882),
    (11, 50, 2_179),
    (51, 100, 231),
    (101, 500, 268),
    (501, 1000, 47),
    (1001, None, 60),
]
STAKERS_NOV_2021 = [
    (1, 1, 40_144),
    (2, 5, 2_341),
    (6, 10, 442),
    (11, 50, 1_376),
    (51, 100, 92),
    (101, 500, 103),
    (501, 1000, 28),
    (1001, None, 42),
]
PRESETS = {"march_2023": STAKERS_MARCH_2023, "nov_2021": STAKERS_NOV_2021}


class ConfigError(ValueError):
    """Invalid scenario; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# populations -------------------------------------------------------------------


@dataclass
class Population:
    validators_per_staker: np.ndarray

    @property
    def num_stakers(self) -> int:
        return len(self.validators_per_staker)

    @property
    def num_validators(self) -> int:
        return int(self.validators_per_staker.sum())

    def to_dict(self) -> dict:
        return {"stakers": self.validators_per_staker.tolist()}


def population_from_distribution(buckets, seed: int = 0, open_cap: int | None = None) -> Population:
    """Stakers whose validator counts are uniform within each bucket.

    An open-ended bucket (``max`` of ``None``) needs ``open_cap``.
    """
    if not buckets:
        raise DomainError("no population buckets given")
    rng = np.random.Generator(np.random.PCG64(seed))
    parts = []
    for lo, hi, count in buckets:
        if hi is None:
            if open_cap is None:
                raise DomainError(f"bucket starting at {lo} has no upper bound; configure open_cap")
            hi = open_cap
        if lo < 1 or hi < lo or count < 0:
            raise DomainError(f"bad bucket ({lo}, {hi}, {count})")
        parts.append(rng.integers(lo, hi + 1, size=count, dtype=np.int64))
    return Population(np.concatenate(parts))


# scenarios --------------------------------------------------------------------


@dataclass(frozen=True)
class DutyModel:
    p_correct: float = 1.0
    p_incorrect: float = 0.0
    p_offline: float = 0.0

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.p_correct >= 1.0:
            return np.zeros(n, dtype=np.int8)
        u = rng.random(n)
        codes = (u >= self.p_correct).astype(np.int8)
        codes += u >= self.p_correct + self.p_incorrect
        return codes


@dataclass(frozen=True)
class AttackConfig:
    victim_staker: int = 0
    compromised: int | str = "all"
    strategy: str = "PayAndExit"  # or "PayOrSlash"
    fee_f: Gwei = 0
    zeta: int = 0
    deadline_offset: int = 1
    tick: Gwei = 10**6
    window_x: int = 225
    iterations: int = 1
    demand_schedule: tuple[Gwei, ...] = ()
    victim_policy: str = "rational"  # rational | never_pay | always_pay | exit_without_paying | naive
    naive_budget: Gwei | None = None
    whistleblower_win_prob: float = 0.0
    forecast: ForecastAssumption = ForecastAssumption(mode="projected")
    victim_forecast: ForecastAssumption | None = None
    # Slash-and-Ransom inputs; carried in scenario files, no game uses them
    extra_threat_prob: float | None = None
    extra_threat_balance: Gwei | None = None


POLICIES = ("rational", "never_pay", "always_pay", "exit_without_paying", "naive")


@dataclass(frozen=True)
class Scenario:
    params: ChainParams = ChainParams()
    population: Population = field(default_factory=lambda: Population(np.array([1], dtype=np.int64)))
    attack: AttackConfig = AttackConfig()
    duty_model: DutyModel = DutyModel()
    horizon_epochs: int = 0
    seed: int = 0
    checkpoint_every: int = 1000
    series_stride: int = 1

    @property
    def deadline(self) -> int:
        return self.attack.deadline_offset

    def compromised_ids(self, state: ChainState) -> list[int]:
        owned = list(state.stakers[self.attack.victim_staker].validators)
        if self.attack.compromised == "all":
            return owned
        return owned[: self.attack.compromised]


def _expect(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(path, message)


def _int(data: dict, key: str, path: str, default=None, allow_none=False):
    value = data.get(key, default)
    if value is None and allow_none:
        return None
    _expect(isinstance(value, int) and not isinstance(value, bool), f"{path}.{key}", f"expected an integer, got {value!r}")
    return value


def _forecast(data, path) -> ForecastAssumption | None:
    if data is None:
        return None
    _expect(isinstance(data, dict), path, "expected an object")
    try:
        return ForecastAssumption(**data)
    except (TypeError, DomainError) as exc:
        raise ConfigError(path, str(exc)) from None


def scenario_from_dict(data: dict[str, Any]) -> Scenario:
    _expect(isinstance(data, dict), "scenario", "expected a JSON object")
    known = {f.name for f in fields(Scenario)}
    for key in data:
        _expect(key in known, key, "unknown scenario field")

    try:
        params = ChainParams.from_dict(data.get("params", {}))
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError("params", str(exc)) from None

    pop = data.get("population", {"stakers": [1]})
    _expect(isinstance(pop, dict), "population", "expected an object")
    if "stakers" in pop:
        counts = pop["stakers"]
        _expect(isinstance(counts, list) and all(isinstance(c, int) and c >= 0 for c in counts),
                "population.stakers", "expected a list of non-negative integers")
        population = Population(np.asarray(counts, dtype=np.int64))
    else:
        if "preset" in pop:
            _expect(pop["preset"] in PRESETS, "population.preset", f"expected one of {sorted(PRESETS)}")
            buckets = PRESETS[pop["preset"]]
        else:
            _expect("buckets" in pop, "population", "needs 'stakers', 'buckets' or 'preset'")
            buckets = [tuple(b) for b in pop["buckets"]]
        try:
            population = population_from_distribution(
                buckets, _int(pop, "seed", "population", data.get("seed", 0)), pop.get("open_cap")
            )
        except (DomainError, TypeError, ValueError) as exc:
            raise ConfigError("population", str(exc)) from None

    duty_raw = data.get("duty_model", {})
    _expect(isinstance(duty_raw, dict), "duty_model", "expected an object")
    try:
        duty = DutyModel(**{k: float(v) for k, v in duty_raw.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError("duty_model", str(exc)) from None
    probs = (duty.p_correct, duty.p_incorrect, duty.p_offline)
    _expect(all(p >= 0 for p in probs), "duty_model", "probabilities must be non-negative")
    _expect(abs(sum(probs) - 1.0) <= 1e-9, "duty_model", f"probabilities sum to {sum(probs)!r}, expected 1")

    att = dict(data.get("attack", {}))
    _expect(isinstance(att, dict), "attack", "expected an object")
    akeys = {f.name for f in fields(AttackConfig)}
    for key in att:
        _expect(key in akeys, f"attack.{key}", "unknown attack field")
    att["forecast"] = _forecast(att.get("forecast", {"mode": "projected"}), "attack.forecast")
    att["victim_forecast"] = _forecast(att.get("victim_forecast"), "attack.victim_forecast")
    att["demand_schedule"] = tuple(att.get("demand_schedule", ()))
    attack = AttackConfig(**att)
    _expect(attack.strategy in ("PayAndExit", "PayOrSlash"), "attack.strategy", "expected PayAndExit or PayOrSlash")
    _expect(attack.victim_policy in POLICIES, "attack.victim_policy", f"expected one of {', '.join(POLICIES)}")
    _expect(0 <= attack.victim_staker < population.num_stakers, "attack.victim_staker", "no such staker")
    owned = int(population.validators_per_staker[attack.victim_staker])
    if attack.compromised != "all":
        _expect(isinstance(attack.compromised, int) and 1 <= attack.compromised <= owned,
                "attack.compromised", f"expected 'all' or 1..{owned}")
    _expect(owned >= 1, "attack.victim_staker", "victim owns no validators")
    _expect(attack.deadline_offset >= 1, "attack.deadline_offset", "must be at least 1")
    _expect(attack.tick >= 1, "attack.tick", "must be positive")
    _expect(attack.fee_f >= 0, "attack.fee_f", "must be non-negative")
    _expect(attack.window_x >= 1, "attack.window_x", "must be at least 1")
    _expect(attack.iterations >= 1, "attack.iterations", "must be at least 1")
    _expect(0.0 <= attack.whistleblower_win_prob <= 1.0, "attack.whistleblower_win_prob", "must be a probability")
    if attack.victim_policy == "naive":
        _expect(attack.naive_budget is not None, "attack.naive_budget", "required by the naive policy")

    horizon = _int(data, "horizon_epochs", "scenario", attack.deadline_offset + params.z_epochs)
    _expect(horizon >= attack.deadline_offset + params.z_epochs, "horizon_epochs",
            f"must be at least deadline + Z = {attack.deadline_offset + params.z_epochs}")
    return Scenario(
        params=params,
        population=population,
        attack=attack,
        duty_model=duty,
        horizon_epochs=horizon,
        seed=_int(data, "seed", "scenario", 0),
        checkpoint_every=_int(data, "checkpoint_every", "scenario", 1000),
        series_stride=_int(data, "series_stride", "scenario", 1),
    )


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("scenario", f"not valid JSON: {exc}") from None
    return scenario_from_dict(data)


def build_state(scenario: Scenario) -> ChainState:
    return ChainState.genesis(scenario.params, scenario.population.validators_per_staker)


# running ------------------------------------------------------------------------


@dataclass
class SimReport:
    timeline: list[dict]
    ransom_paid: Gwei
    slashing_losses: Gwei
    forecast_H: Gwei
    realized_H: Gwei
    victim_net: int
    attacker_net: int
    escrow_outcome: str
    strategy: str = "PayAndExit"
    equilibrium: dict | None = None
    forecast: dict | None = None
    realized: dict | None = None
    exit_epoch: int | None = None
    checkpoints: list[dict] = field(default_factory=list)
    series: list[tuple[int, int, int, int]] = field(default_factory=list)

    def to_dict(self, include_series: bool = False) -> dict:
        out = asdict(self)
        if not include_series:
            out.pop("series")
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def series_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "total_Y", "slashed_G", "victim_balance"])
        writer.writerows(self.series)
        return buf.getvalue()


class _Run:
    """Mutable bookkeeping for one scenario execution."""

    def __init__(self, scenario: Scenario):
        self.sc = scenario
        main_seq, cf_seq = np.random.SeedSequence(scenario.seed).spawn(2)
        self.rng = np.random.Generator(np.random.PCG64(main_seq))
        self.cf_seq = cf_seq
        self.state = build_state(scenario)
        self.initial = self.state.copy()
        self.C = scenario.compromised_ids(self.state)
        self.timeline: list[dict] = []
        self.series: list[tuple[int, int, int, int]] = []
        self.checkpoints: list[dict] = []
        self.contract: escrow.EscrowContract | None = None
        self.transfers: list[escrow.TransferAction] = []
        self.log_cursor = 0
        self.attacker_slashed = False
        self.whistle_gain = 0
        self.exit_epoch: int | None = None
        self.unwithdrawn = np.asarray(self.C, dtype=np.int64)
        self._g_len = -1

    def slashed_g(self, epoch: int) -> int:
        ledger = self.state.slash_ledger
        if len(ledger) != self._g_len:
            self._g_len = len(ledger)
            self._g_epochs = np.array([r.slash_epoch for r in ledger], dtype=np.int64)
            self._g_effs = np.array([r.effective_at_slash for r in ledger], dtype=np.int64)
        if not self._g_len:
            return 0
        lo = epoch - self.sc.params.z_epochs + 1
        window = (self._g_epochs >= lo) & (self._g_epochs <= epoch)
        return int(self._g_effs[window].sum())

    def note(self, epoch: int, kind: str, **extra) -> None:
        self.timeline.append({"epoch": epoch, "kind": kind, **extra})

    def slash_compromised(self) -> None:
        st, p = self.state, self.sc.params
        targets = [j for j in self.C if st.is_active(j) and not st.slashed[j]]
        if not targets:
            return
        self.attacker_slashed = True
        members = set(self.C)
        for j in targets:
            whistleblower = proposer = None
            if p.whistleblower_reward:
                honest = np.flatnonzero(st.active_mask())
                honest = honest[~np.isin(honest, list(members))]
                if len(honest):
                    whistleblower, proposer = (int(x) for x in self.rng.choice(honest, size=2))
                    if self.rng.random() < self.sc.attack.whistleblower_win_prob:
                        self.whistle_gain += p.whistleblower_reward
            apply_slash(st, j, whistleblower, proposer)

    def feed_escrow(self, extra: list[escrow.ChainEvent] = ()) -> None:
        new = self.state.log[self.log_cursor:]
        self.log_cursor = len(self.state.log)
        events = list(extra)
        for entry in new:
            if entry.kind in ("Slashed", "ExitSigned", "ExitFinalized"):
                events.append(escrow.ChainEvent(entry.kind, entry.epoch, validator=entry.validator))
                self.note(entry.epoch, entry.kind, validator=entry.validator)
                if entry.kind == "ExitFinalized" and entry.validator in self.C:
                    self.exit_epoch = entry.epoch
            elif entry.kind == "Withdrawn" and entry.validator in self.C:
                self.note(entry.epoch, "Withdrawn", validator=entry.validator)
        if self.contract is None:
            return
        before = self.contract.state
        self.contract, actions = escrow.replay(self.contract, events)
        for action in actions:
            self.transfers.append(action)
            self.note(self.contract.last_epoch, action.kind, amount=action.amount, surplus=action.surplus)
        if self.contract.state != before:
            self.note(self.contract.last_epoch, "EscrowState", state=self.contract.state.value)

    def step(self) -> None:
        st = self.state
        t = st.epoch
        st.advance(self.sc.duty_model.draw(self.rng, st.num_validators))
        if self.contract is not None and not self.contract.state.terminal:
            self.feed_escrow([escrow.tick(t)])
        if len(self.unwithdrawn):
            s = st.status[self.unwithdrawn]
            ready = ((s == _EXITED) & (st.status_epoch[self.unwithdrawn] <= st.epoch)) | (s == _SLASHED_EXITED)
            if ready.any():
                for j in self.unwithdrawn[ready]:
                    st.withdraw_validator(int(j))
                self.unwithdrawn = self.unwithdrawn[~ready]
        if len(st.log) > self.log_cursor or (self.contract is not None and not self.contract.state.terminal):
            self.feed_escrow()
        if self.sc.series_stride and st.epoch % self.sc.series_stride == 0:
            victim = self.sc.attack.victim_staker
            wealth = st.staker_balance(victim) + st.stakers[victim].withdrawn_funds
            self.series.append((st.epoch, st.total_active, self.slashed_g(st.epoch), wealth))
        if self.sc.checkpoint_every and st.epoch % self.sc.checkpoint_every == 0:
            lhs, rhs = st.supply_check()
            self.checkpoints.append({"epoch": st.epoch, "holdings": lhs, "issued": rhs, "conserved": lhs == rhs})


def _victim_deposits(sc: Scenario, run: _Run, eq, game: PayAndExitGame) -> bool:
    policy = sc.attack.victim_policy
    R = eq.ransom_R
    if R <= 0 or policy in ("never_pay", "exit_without_paying"):
        return False
    if policy in ("always_pay", "naive"):
        return policy == "always_pay" or R <= sc.attack.naive_budget
    if sc.attack.victim_forecast is None:
        return eq.victim_action == VictimAction.DEPOSIT
    # the victim prices the threat with their own forecast
    own = forecast_total_penalty(run.initial, run.C, sc.deadline, sc.attack.victim_forecast).total
    threat = -game.slash_cost_zeta
    return threat > 0 and threat < R < own - game.fee_f


def run(scenario: Scenario) -> SimReport:
    """Execute one attack campaign end to end."""
    if scenario.attack.strategy == "PayOrSlash":
        return _run_pay_or_slash(scenario)
    sc, at = scenario, scenario.attack
    r = _Run(sc)
    st = r.state
    t_r = sc.deadline
    fc = forecast_total_penalty(st, r.C, t_r, at.forecast)
    game = PayAndExitGame(st.balance[r.C].sum().item(), fc.total, at.fee_f, at.zeta, t_r, t_r)
    eq = solve_spne(game, at.tick)
    r.note(0, "Demand", ransom=eq.ransom_R, deadline=t_r, bound=max_ransom_pay_and_exit(game))
    if eq.ransom_R > 0:
        r.contract = escrow.create(eq.ransom_R, t_r, r.C, now=0)

    deposited = _victim_deposits(sc, r, eq, game)
    threat = -at.zeta
    pending = []
    if deposited:
        pending.append(escrow.deposited(eq.ransom_R, 0))
        r.note(0, "Deposited", amount=eq.ransom_R)
    if deposited or at.victim_policy == "exit_without_paying":
        for j in r.C:
            st.sign_exit(j)
    # with funds in escrow the attacker only slashes if that beats the ransom;
    # an exit signed outside the contract trips the switch
    slash_now = (deposited and threat > eq.ransom_R) or (
        at.victim_policy == "exit_without_paying" and threat > 0
    )
    if slash_now:
        r.slash_compromised()
    r.feed_escrow(pending)
    slash_at_deadline = not deposited and not slash_now and threat > 0

    for _ in range(sc.horizon_epochs):
        if st.epoch == t_r and slash_at_deadline:
            r.slash_compromised()
            r.feed_escrow()
        r.step()

    losses = realized_penalty(st, r.C)
    if r.attacker_slashed:
        realized = losses
    else:
        realized = _counterfactual(r.initial, r.C, t_r, sc, r.cf_seq)
    paid = sum(a.amount for a in r.transfers if a.kind == "PayAttacker")
    outcome = _outcome_label(r.contract)
    victim_net = -paid - (at.fee_f if deposited else 0) - losses.total
    attacker_net = paid + (threat if r.attacker_slashed else 0) + r.whistle_gain
    return SimReport(
        timeline=r.timeline,
        ransom_paid=paid,
        slashing_losses=losses.total,
        forecast_H=fc.total,
        realized_H=realized.total,
        victim_net=victim_net,
        attacker_net=attacker_net,
        escrow_outcome=outcome,
        strategy="PayAndExit",
        equilibrium={"game": game.to_dict(), **eq.to_dict()},
        forecast=fc.to_dict(),
        realized=realized.to_dict(),
        exit_epoch=r.exit_epoch,
        checkpoints=r.checkpoints,
        series=r.series,
    )


def _outcome_label(contract: escrow.EscrowContract | None) -> str:
    # an expired contract keeps its state name so a lapsed demand stays
    # distinguishable from one that was never made
    if contract is None:
        return escrow.Settlement.NO_DEPOSIT.value
    if contract.state == escrow.EscrowState.EXPIRED_NO_DEPOSIT:
        return contract.state.value
    return contract.settlement.value


def _counterfactual(initial: ChainState, C: list[int], t_r: int, sc: Scenario, seq) -> Any:
    """Burns the compromised set would have suffered had it been slashed at
    ``t_r`` with nobody paying, replayed on a copy of the starting chain."""
    rng = np.random.Generator(np.random.PCG64(seq))
    st = initial.copy()
    while st.epoch < t_r:
        st.advance(sc.duty_model.draw(rng, st.num_validators))
    for j in C:
        apply_slash(st, j)
    for _ in range(sc.params.z_epochs):
        st.advance(sc.duty_model.draw(rng, st.num_validators))
    return realized_penalty(st, C)


def _run_pay_or_slash(sc: Scenario) -> SimReport:
    at = sc.attack
    r = _Run(sc)
    st = r.state
    fc = forecast_total_penalty(st, r.C, sc.deadline, at.forecast)
    game = PayAndExitGame(st.balance[r.C].sum().item(), fc.total, at.fee_f, at.zeta, sc.deadline, sc.deadline)
    schedule = list(at.demand_schedule) or [max(max_ransom_pay_and_exit(game) - at.tick, 1)]
    policy = {
        "rational": rational_policy,
        "never_pay": never_pay_policy,
        "naive": lambda: naive_policy(at.naive_budget),
        "always_pay": lambda: naive_policy(10**30),
        "exit_without_paying": never_pay_policy,
    }[at.victim_policy]()
    result = simulate_pay_or_slash(game, at.window_x, at.iterations, policy, schedule)
    for i, amount in enumerate(result.payments):
        r.note(i * at.window_x, "PayAttacker", amount=amount)
    slash_epoch = result.epochs_elapsed if result.outcome == "Slashed" else None
    for _ in range(sc.horizon_epochs):
        if st.epoch == slash_epoch:
            r.slash_compromised()
            r.feed_escrow()
        r.step()
    losses = realized_penalty(st, r.C)
    paid = result.cumulative_ransom
    return SimReport(
        timeline=sorted(r.timeline, key=lambda e: e["epoch"]),
        ransom_paid=paid,
        slashing_losses=losses.total,
        forecast_H=fc.total,
        realized_H=losses.total if r.attacker_slashed else _counterfactual(r.initial, r.C, sc.deadline, sc, r.cf_seq).total,
        victim_net=-paid - at.fee_f * len(result.payments) - losses.total,
        attacker_net=paid + (-at.zeta if r.attacker_slashed else 0) + r.whistle_gain,
        escrow_outcome="Payout" if paid else "NoDeposit",
        strategy="PayOrSlash",
        equilibrium={"game": game.to_dict(), "repeated": result.to_dict()},
        forecast=fc.to_dict(),
        checkpoints=r.checkpoints,
        series=r.series,
    )


# mitigation experiments -----------------------------------------------------------


def _bound_row(label: str, state: ChainState, ids: list[int], sc: Scenario) -> dict:
    fc = forecast_total_penalty(state, ids, sc.deadline, sc.attack.forecast)
    return {
        "case": label,
        "validators": len(ids),
        "compromised_balance": int(state.balance[ids].sum()),
        **fc.to_dict(),
        "max_ransom": max(fc.total - sc.attack.fee_f, 0),
    }


def partition_experiment(scenario: Scenario, k: int) -> dict:
    """Split the victim's validators into ``k`` isolated groups and compare
    the exposure of one breached group with a breach of everything."""
    state = build_state(scenario)
    owned = list(state.stakers[scenario.attack.victim_staker].validators)
    if k < 1 or k > len(owned):
        raise DomainError(f"cannot split {len(owned)} validators into {k} groups")
    groups = [g.tolist() for g in np.array_split(np.asarray(owned), k)]
    base = _bound_row("unpartitioned", state, owned, scenario)
    part = _bound_row(f"1 of {k} groups", state, groups[0], scenario)
    reduction = (
        Fraction(base["max_ransom"] - part["max_ransom"], base["max_ransom"]) if base["max_ransom"] else Fraction(0)
    )
    return {"k": k, "group_sizes": [len(g) for g in groups], "baseline": base, "partitioned": part,
            "max_ransom_reduction": float(reduction)}


def penalty_sweep(scenario: Scenario, grid) -> list[dict]:
    """H and the maximum ransom for each ``(delta, big_delta, initial_divisor)``."""
    if not grid:
        raise DomainError("penalty grid is empty")
    base = build_state(scenario)
    ids = scenario.compromised_ids(base)
    rows = []
    for delta, big_delta, divisor in grid:
        params = replace(scenario.params, delta=as_fraction(delta), big_delta=as_fraction(big_delta),
                         initial_penalty_divisor=int(divisor))
        state = base.copy()
        state.params = params
        row = _bound_row("sweep", state, ids, scenario)
        del row["case"]
        rows.append({"delta": str(params.delta), "big_delta": str(params.big_delta),
                     "initial_divisor": params.initial_penalty_divisor, **row})
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()
