"""Slashing: initial burn, per-epoch burns, the correlated special penalty,
and forecasts of the total penalty a compromised set would suffer.

A slashed validator ``j`` (slashed in epoch ``s``) loses

* ``floor(ybar_j / initial_penalty_divisor)`` immediately,
* ``floor(delta * b_j(s))`` in each of the ``Z`` epochs ``s .. s+Z-1``, where
  ``b_j(s)`` is its base reward in the slashing epoch,
* a special penalty at ``tau = s + Z/2`` of
  ``floor(ybar_j(tau) * min(Delta * G(tau), Y(tau)) / Y(tau))``, ``G`` being
  the effective balance slashed within the last ``Z`` epochs.

Every burn is clamped at the remaining balance.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from math import isqrt

import numpy as np

from .chain import ChainParams, ChainState, DomainError, LogEntry, Status, base_reward, effective_balance_update
from .units import Gwei

PROPOSER_SHARE_DIVISOR = 7
_SLASHED_PENDING = int(Status.SLASHED_PENDING)


@dataclass
class SlashRecord:
    validator: int
    slash_epoch: int
    effective_at_slash: Gwei
    base_reward_at_slash: Gwei
    special_due_epoch: int
    special_applied: bool = False
    whistleblower: int | None = None
    proposer: int | None = None


@dataclass(frozen=True)
class PenaltyForecast:
    initial: Gwei
    per_epoch_total: Gwei
    special_total: Gwei
    total: Gwei = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.initial + self.per_epoch_total + self.special_total)

    def to_dict(self) -> dict[str, int]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data) -> PenaltyForecast:
        fc = cls(int(data["initial"]), int(data["per_epoch_total"]), int(data["special_total"]))
        if "total" in data and int(data["total"]) != fc.total:
            raise DomainError("forecast total does not equal the sum of its components")
        return fc


@dataclass(frozen=True)
class ForecastAssumption:
    """How the unknown future is pinned down when forecasting H(t_r).

    ``constant``: Y stays at its current value, every base reward and
    effective balance stays where it is now, and only the compromised set
    (plus ``other_slashed`` Gwei) counts as recently slashed.

    ``projected``: the rest of the chain is frozen, the compromised
    validators attest correctly until ``t_r`` and are then slashed; their own
    balances, hysteresis steps, the active-set shrinkage and burn clamping
    are replayed epoch by epoch. For deterministic duties this reproduces
    what the chain will actually burn.
    """

    mode: str = "constant"
    other_slashed: Gwei = 0
    total_stake: Gwei | None = None

    def __post_init__(self):
        if self.mode not in ("constant", "projected"):
            raise DomainError(f"unknown forecast mode {self.mode!r}")
        if self.other_slashed < 0:
            raise DomainError("other_slashed must be non-negative")


def special_penalty_amount(effective: int, slashed_recently: int, total: int, big_delta: Fraction) -> Gwei:
    """Integer form of ``effective * min(Delta*G/Y, 1)``."""
    if total <= 0:
        return effective
    num = min(big_delta.numerator * slashed_recently, big_delta.denominator * total)
    return effective * num // (big_delta.denominator * total)


# chain operations ---------------------------------------------------------


def apply_slash(state: ChainState, j: int, whistleblower: int | None = None, proposer: int | None = None) -> SlashRecord:
    """Slash ``j`` in place; returns the new ledger record."""
    state._check_id(j)
    if state.slashed[j]:
        raise DomainError(f"validator {j} is already slashed")
    if not state.is_active(j):
        raise DomainError(f"cannot slash exited validator {j}")
    for other in (whistleblower, proposer):
        if other is not None:
            state._check_id(other)
            if other == j:
                raise DomainError("a slashed validator cannot report itself")
    p = state.params
    eff = int(state.effective[j])
    b = base_reward(state, j)
    if state.status[j] == Status.EXIT_QUEUED:
        state.exit_queue.remove(j)

    state.burned_initial[j] = state.burn(j, eff // p.initial_penalty_divisor)
    state.slash_per_epoch[j] = p.scaled(p.delta, b)
    state.status[j] = Status.SLASHED_PENDING
    state.status_epoch[j] = state.epoch
    state.slashed[j] = True

    if whistleblower is not None and p.whistleblower_reward:
        state.credit(whistleblower, p.whistleblower_reward)
    if proposer is not None and p.whistleblower_reward:
        state.credit(proposer, p.whistleblower_reward // PROPOSER_SHARE_DIVISOR)

    record = SlashRecord(
        validator=j,
        slash_epoch=state.epoch,
        effective_at_slash=eff,
        base_reward_at_slash=b,
        special_due_epoch=state.epoch + p.z_epochs // 2,
        whistleblower=whistleblower,
        proposer=proposer,
    )
    state.slash_due.setdefault(record.special_due_epoch, []).append(len(state.slash_ledger))
    state.slash_ledger.append(record)
    state.log.append(LogEntry(state.epoch, "Slashed", j))
    return record


def slash(state: ChainState, j: int, whistleblower: int | None = None, proposer: int | None = None) -> ChainState:
    new = state.copy()
    apply_slash(new, j, whistleblower, proposer)
    return new


def recently_slashed_balance(state: ChainState, at_epoch: int) -> Gwei:
    lo = at_epoch - state.params.z_epochs + 1
    return sum(r.effective_at_slash for r in state.slash_ledger if lo <= r.slash_epoch <= at_epoch)


def _due_record(state: ChainState, j: int, at_epoch: int) -> SlashRecord:
    for r in state.slash_ledger:
        if r.validator == j and r.special_due_epoch == at_epoch and not r.special_applied:
            return r
    raise DomainError(f"no special penalty due for validator {j} at epoch {at_epoch}")


def special_penalty(state: ChainState, j: int, at_epoch: int) -> Gwei:
    """Special penalty owed by ``j`` at its due epoch, against the state's
    current effective balance of ``j`` and current Y."""
    _due_record(state, j, at_epoch)
    return special_penalty_amount(
        int(state.effective[j]),
        recently_slashed_balance(state, at_epoch),
        state.total_active,
        state.params.big_delta,
    )


def per_epoch_slash_penalty(state: ChainState, j: int) -> Gwei:
    """``floor(delta * b_j)`` with ``b_j`` frozen at the slashing epoch."""
    state._check_id(j)
    if state.status[j] != Status.SLASHED_PENDING:
        raise DomainError(f"validator {j} is not inside a slashing penalty window")
    return int(state.slash_per_epoch[j])


def apply_epoch_penalties(state: ChainState) -> None:
    """Burn this epoch's per-epoch slash penalties, then any special
    penalties falling due."""
    pending = np.flatnonzero(state.status == _SLASHED_PENDING)
    if len(pending):
        state.burned_per_epoch[pending] += state.burn(pending, state.slash_per_epoch[pending])
    due = state.slash_due.pop(state.epoch, None)
    if not due:
        return
    g = recently_slashed_balance(state, state.epoch)
    for idx in due:
        rec = state.slash_ledger[idx]
        j = rec.validator
        amount = special_penalty_amount(int(state.effective[j]), g, state.total_active, state.params.big_delta)
        state.burned_special[j] += int(state.burn(j, amount))
        rec.special_applied = True


def realized_penalty(state: ChainState, validators: Iterable[int]) -> PenaltyForecast:
    """What slashing has actually burned from ``validators`` so far."""
    ids = np.asarray(list(validators), dtype=np.int64)
    return PenaltyForecast(
        int(state.burned_initial[ids].sum()),
        int(state.burned_per_epoch[ids].sum()),
        int(state.burned_special[ids].sum()),
    )


# forecasting ----------------------------------------------------------------


def forecast_total_penalty(
    state: ChainState,
    compromised: Iterable[int],
    t_r: int,
    assumption: ForecastAssumption = ForecastAssumption(),
) -> PenaltyForecast:
    """Forecast H(t_r): what slashing ``compromised`` at ``t_r`` will burn."""
    ids = sorted(set(compromised))
    if not ids:
        raise DomainError("compromised set is empty")
    for j in ids:
        state._check_id(j)
        if state.slashed[j]:
            raise DomainError(f"validator {j} is already slashed")
        if not state.is_active(j):
            raise DomainError(f"validator {j} is not in the active set")
    if t_r < state.epoch:
        raise DomainError(f"t_r={t_r} is before the current epoch {state.epoch}")
    if assumption.mode == "constant":
        return _forecast_constant(state, ids, assumption)
    return _forecast_projected(state, ids, t_r, assumption)


def _forecast_constant(state: ChainState, ids: list[int], assumption: ForecastAssumption) -> PenaltyForecast:
    p = state.params
    total = assumption.total_stake if assumption.total_stake is not None else state.total_active
    if total <= 0:
        raise DomainError("no stake")
    root = isqrt(total)
    effs = [int(state.effective[j]) for j in ids]
    g = sum(effs) + assumption.other_slashed
    initial = per_epoch = special = 0
    for e in effs:
        initial += e // p.initial_penalty_divisor
        b = e * p.base_reward_factor // (p.base_rewards_per_epoch * root)
        per_epoch += p.z_epochs * p.scaled(p.delta, b)
        special += special_penalty_amount(e, g, total, p.big_delta)
    return PenaltyForecast(initial, per_epoch, special)


def _forecast_projected(state: ChainState, ids: list[int], t_r: int, assumption: ForecastAssumption) -> PenaltyForecast:
    p = state.params
    idx = np.asarray(ids, dtype=np.int64)
    bal = state.balance[idx].copy()
    eff = state.effective[idx].copy()
    total = assumption.total_stake if assumption.total_stake is not None else state.total_active
    others = total - int(eff.sum())

    def reward(eff_now):
        y = others + int(eff_now.sum())
        if y <= 0:
            raise DomainError("no stake")
        return eff_now * p.base_reward_factor // (p.base_rewards_per_epoch * isqrt(y))

    for _ in range(state.epoch, t_r):
        bal += p.scaled(p.alpha, reward(eff))
        eff = effective_balance_update(bal, eff, p)

    per_epoch_burn = p.scaled(p.delta, reward(eff))
    initial = np.minimum(eff // p.initial_penalty_divisor, bal)
    bal -= initial

    tau = t_r + p.z_epochs // 2
    lo = tau - p.z_epochs + 1
    g = int(eff.sum()) + assumption.other_slashed + sum(
        r.effective_at_slash for r in state.slash_ledger if lo <= r.slash_epoch <= tau
    )
    per_epoch = np.zeros_like(bal)
    special = np.zeros_like(bal)
    # epochs t_r .. tau-1: per-epoch burns with hysteresis steps between them
    for _ in range(t_r, tau):
        take = np.minimum(per_epoch_burn, bal)
        bal -= take
        per_epoch += take
        eff = effective_balance_update(bal, eff, p)
    # epoch tau: per-epoch burn, then the special penalty
    take = np.minimum(per_epoch_burn, bal)
    bal -= take
    per_epoch += take
    for k in range(len(ids)):
        owed = special_penalty_amount(int(eff[k]), g, others, p.big_delta)
        special[k] = min(owed, int(bal[k]))
    bal -= special
    # remaining epochs tau+1 .. t_r+Z-1 only burn a fixed amount each
    remaining = t_r + p.z_epochs - 1 - tau
    per_epoch += np.minimum(per_epoch_burn * remaining, bal)
    return PenaltyForecast(int(initial.sum()), int(per_epoch.sum()), int(special.sum()))


def with_params(state: ChainState, params: ChainParams) -> ChainState:
    """Shallow copy of ``state`` under different protocol parameters."""
    new = state.copy()
    new.params = params
    return new
