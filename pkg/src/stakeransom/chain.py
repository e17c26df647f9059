"""Validator economics: balances, duty rewards, exits and the epoch transition.

Validator state is held column-wise in numpy ``int64`` arrays so that an
epoch over tens of thousands of validators is a handful of vector
operations. Every amount is an exact Gwei integer; division is floor
division. Aggregates that can exceed 64 bits (minted/burned totals, the
special-penalty product) are kept as Python ints.

Mutating work happens in ``ChainState`` methods. The module-level
functions (:func:`advance_epoch`, :func:`sign_voluntary_exit`,
:func:`withdraw`) copy the state first and leave their input untouched.
"""

from __future__ import annotations

import json
from collections import deque
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field, fields, replace
from enum import IntEnum
from fractions import Fraction
from math import isqrt
from typing import Any

import numpy as np

from .units import ETH, Gwei, as_fraction, eth


class DomainError(ValueError):
    """An operation was asked to do something the protocol model forbids."""


class Status(IntEnum):
    ACTIVE = 0
    EXIT_QUEUED = 1
    EXITED = 2  # finalized, waiting for the withdrawable epoch
    WITHDRAWN = 3
    SLASHED_PENDING = 4
    SLASHED_EXITED = 5

    @property
    def label(self) -> str:
        return _STATUS_LABELS[self]


_STATUS_LABELS = {
    Status.ACTIVE: "Active",
    Status.EXIT_QUEUED: "ExitQueued",
    Status.EXITED: "ExitedAwaitingWithdraw",
    Status.WITHDRAWN: "Withdrawn",
    Status.SLASHED_PENDING: "SlashedPending",
    Status.SLASHED_EXITED: "SlashedExited",
}


class Outcome(IntEnum):
    CORRECT = 0
    INCORRECT = 1
    OFFLINE = 2


NO_DUTY = -1

_EXIT_QUEUED = int(Status.EXIT_QUEUED)
_SLASHED_PENDING = int(Status.SLASHED_PENDING)
_CORRECT, _INCORRECT, _OFFLINE = (int(o) for o in Outcome)

_RATIONAL_FIELDS = ("alpha", "beta", "gamma", "delta", "big_delta")


@dataclass(frozen=True)
class ChainParams:
    base_reward_factor: int = 64
    base_rewards_per_epoch: int = 4
    alpha: Fraction = Fraction(3)
    beta: Fraction = Fraction(3)
    gamma: Fraction = Fraction(1)
    delta: Fraction = Fraction(3)
    big_delta: Fraction = Fraction(3)
    z_epochs: int = 8192
    withdraw_delay_epochs: int = 256
    exit_quota_per_epoch: int = 4
    whistleblower_reward: Gwei = 0
    forced_exit_floor: Gwei = 16 * ETH
    max_effective_balance: Gwei = 32 * ETH
    hysteresis_up: Gwei = eth("1.25")
    hysteresis_down: Gwei = eth("0.25")
    initial_penalty_divisor: int = 32

    def __post_init__(self):
        for name in _RATIONAL_FIELDS:
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        # delta/big_delta may be zero: penalty sweeps switch components off.
        for name in ("delta", "big_delta"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if self.z_epochs <= 0 or self.z_epochs % 2:
            raise DomainError("z_epochs must be a positive even integer")
        if self.base_reward_factor <= 0 or self.base_rewards_per_epoch <= 0:
            raise DomainError("base reward constants must be positive")
        if self.exit_quota_per_epoch <= 0:
            raise DomainError("exit_quota_per_epoch must be positive")
        if self.initial_penalty_divisor < 1:
            raise DomainError("initial_penalty_divisor must be >= 1")
        if self.max_effective_balance % ETH:
            raise DomainError("max_effective_balance must be a whole number of ETH")
        for name in ("withdraw_delay_epochs", "whistleblower_reward", "forced_exit_floor",
                     "hysteresis_up", "hysteresis_down"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ChainParams:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown chain parameter(s): {', '.join(sorted(unknown))}")
        return cls(**dict(data))

    @classmethod
    def from_json(cls, path) -> ChainParams:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        for name in _RATIONAL_FIELDS:
            value = getattr(self, name)
            out[name] = value.numerator if value.denominator == 1 else str(value)
        return out

    def scaled(self, factor: Fraction, amount):
        """``floor(factor * amount)`` for an int or an int64 array."""
        return factor.numerator * amount // factor.denominator


@dataclass
class Staker:
    id: int
    validators: tuple[int, ...]
    withdrawn_funds: Gwei = 0


@dataclass(frozen=True)
class Validator:
    """Read-only snapshot of one validator's row in a :class:`ChainState`."""

    id: int
    owner: int
    balance: Gwei
    effective_balance: Gwei
    status: Status
    status_epoch: int | None
    slashed: bool


@dataclass(frozen=True)
class LogEntry:
    epoch: int
    kind: str  # "ExitSigned" | "ExitFinalized" | "Slashed" | "Withdrawn"
    validator: int


@dataclass
class ChainState:
    params: ChainParams
    epoch: int
    balance: np.ndarray
    effective: np.ndarray
    status: np.ndarray
    status_epoch: np.ndarray
    slashed: np.ndarray
    owner: np.ndarray
    stakers: dict[int, Staker]
    initial_deposits: Gwei
    minted_total: Gwei = 0
    burned_total: Gwei = 0
    total_active: Gwei = 0
    exit_queue: deque = field(default_factory=deque)
    slash_ledger: list = field(default_factory=list)
    slash_due: dict[int, list[int]] = field(default_factory=dict)
    # per-validator slashing columns; zero for unslashed validators
    slash_per_epoch: np.ndarray | None = None
    burned_initial: np.ndarray | None = None
    burned_per_epoch: np.ndarray | None = None
    burned_special: np.ndarray | None = None
    log: list[LogEntry] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.balance)
        for name in ("slash_per_epoch", "burned_initial", "burned_per_epoch", "burned_special"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(n, dtype=np.int64))

    # construction -------------------------------------------------------

    @classmethod
    def genesis(
        cls,
        params: ChainParams | None = None,
        validators_per_staker: Sequence[int] = (1,),
        balance: Gwei = 32 * ETH,
    ) -> ChainState:
        """Fresh chain where staker ``i`` owns ``validators_per_staker[i]``
        consecutive validators, each deposited with ``balance``."""
        params = params or ChainParams()
        counts = np.asarray(validators_per_staker, dtype=np.int64)
        if np.any(counts < 0):
            raise DomainError("validator counts must be non-negative")
        n = int(counts.sum())
        owner = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
        starts = np.concatenate(([0], np.cumsum(counts)[:-1])) if len(counts) else []
        stakers = {
            i: Staker(i, tuple(range(int(s), int(s + c))))
            for i, (s, c) in enumerate(zip(starts, counts))
        }
        bal = np.full(n, balance, dtype=np.int64)
        eff = np.full(n, min(balance - balance % ETH, params.max_effective_balance), dtype=np.int64)
        state = cls(
            params=params,
            epoch=0,
            balance=bal,
            effective=eff,
            status=np.zeros(n, dtype=np.int8),
            status_epoch=np.zeros(n, dtype=np.int64),
            slashed=np.zeros(n, dtype=bool),
            owner=owner,
            stakers=stakers,
            initial_deposits=int(balance) * n,
        )
        state.refresh_total()
        return state

    def copy(self) -> ChainState:
        return replace(
            self,
            balance=self.balance.copy(),
            effective=self.effective.copy(),
            status=self.status.copy(),
            status_epoch=self.status_epoch.copy(),
            slashed=self.slashed.copy(),
            owner=self.owner.copy(),
            stakers={k: replace(v) for k, v in self.stakers.items()},
            exit_queue=deque(self.exit_queue),
            slash_ledger=[replace(r) for r in self.slash_ledger],
            slash_due={k: list(v) for k, v in self.slash_due.items()},
            slash_per_epoch=self.slash_per_epoch.copy(),
            burned_initial=self.burned_initial.copy(),
            burned_per_epoch=self.burned_per_epoch.copy(),
            burned_special=self.burned_special.copy(),
            log=list(self.log),
        )

    # queries ------------------------------------------------------------

    @property
    def num_validators(self) -> int:
        return len(self.balance)

    def active_mask(self) -> np.ndarray:
        # ACTIVE and EXIT_QUEUED are the two lowest codes
        return self.status <= _EXIT_QUEUED

    def is_active(self, j: int) -> bool:
        return self.status[j] in (Status.ACTIVE, Status.EXIT_QUEUED)

    def refresh_total(self) -> Gwei:
        """Recompute Y(t), the total effective balance of the active set."""
        self.total_active = int(self.effective[self.active_mask()].sum())
        return self.total_active

    def validator(self, j: int) -> Validator:
        self._check_id(j)
        st = Status(int(self.status[j]))
        return Validator(
            id=j,
            owner=int(self.owner[j]),
            balance=int(self.balance[j]),
            effective_balance=int(self.effective[j]),
            status=st,
            status_epoch=None if st in (Status.ACTIVE, Status.WITHDRAWN) else int(self.status_epoch[j]),
            slashed=bool(self.slashed[j]),
        )

    def staker_balance(self, staker: int) -> Gwei:
        ids = list(self.stakers[staker].validators)
        return int(self.balance[ids].sum()) if ids else 0

    def supply_check(self) -> tuple[int, int]:
        """Both sides of the conservation identity
        ``sum(balances) + sum(withdrawn) == deposits + minted - burned``."""
        lhs = int(self.balance.sum()) + sum(s.withdrawn_funds for s in self.stakers.values())
        rhs = self.initial_deposits + self.minted_total - self.burned_total
        return lhs, rhs

    def _check_id(self, j: int) -> None:
        if not 0 <= j < self.num_validators:
            raise DomainError(f"unknown validator {j}")

    # balance movements --------------------------------------------------

    def credit(self, j: int, amount: Gwei) -> None:
        """Mint ``amount`` into validator ``j``'s balance."""
        self.balance[j] += amount
        self.minted_total += int(amount)

    def burn(self, idx, amount) -> np.ndarray:
        """Burn up to ``amount`` from each indexed balance; returns what was
        actually burned (balances never go negative)."""
        taken = np.minimum(np.asarray(amount, dtype=np.int64), self.balance[idx])
        self.balance[idx] -= taken
        self.burned_total += int(np.sum(taken))
        return taken

    # transitions --------------------------------------------------------

    def sign_exit(self, j: int) -> None:
        self._check_id(j)
        if self.slashed[j] or self.status[j] != Status.ACTIVE:
            raise DomainError(
                f"exit not permitted: validator {j} is {Status(int(self.status[j])).label}"
            )
        self.status[j] = Status.EXIT_QUEUED
        self.status_epoch[j] = self.epoch
        self.exit_queue.append(j)
        self.log.append(LogEntry(self.epoch, "ExitSigned", j))

    def advance(self, duties) -> None:
        """Process epoch ``self.epoch`` in place and move to the next one."""
        from . import slashing

        p = self.params
        t = self.epoch
        n = self.num_validators
        codes = duty_codes(duties, n)
        active = self.active_mask()
        missing = active & (codes < 0)
        if missing.any():
            raise DomainError(f"missing duty for active validator {int(np.flatnonzero(missing)[0])}")

        # (1) duty rewards and penalties against Y(t)
        if active.any() and self.total_active > 0:
            b = self.effective * p.base_reward_factor // (p.base_rewards_per_epoch * isqrt(self.total_active))
            good = active & (codes == _CORRECT)
            gain = p.scaled(p.alpha, b)
            gain *= good
            self.balance += gain
            self.minted_total += int(gain.sum())
            for outcome, factor in ((_INCORRECT, p.beta), (_OFFLINE, p.gamma)):
                bad = np.flatnonzero(active & (codes == outcome))
                if len(bad):
                    self.burn(bad, p.scaled(factor, b[bad]))

        # (2) slashing penalties
        slashing.apply_epoch_penalties(self)

        # (3) exit queue, FIFO under the per-epoch quota
        done = 0
        while self.exit_queue and done < p.exit_quota_per_epoch:
            j = self.exit_queue.popleft()
            if self.status[j] != Status.EXIT_QUEUED:
                continue
            self._finalize_exit(j, t)
            done += 1

        # (4) forced exit below the balance floor, no extra penalty
        low = np.flatnonzero(self.active_mask() & (self.balance < p.forced_exit_floor))
        for j in low:
            j = int(j)
            if self.status[j] == Status.EXIT_QUEUED:
                self.exit_queue.remove(j)
            self._finalize_exit(j, t)

        # (5) slashed validators leave after Z epochs
        pending = self.status == _SLASHED_PENDING
        if pending.any():
            gone = pending & (self.status_epoch + p.z_epochs <= t + 1)
            self.status[gone] = Status.SLASHED_EXITED

        # (6) effective balances
        # withdrawn rows hold zero balance and zero effective: a fixed point
        self.effective = effective_balance_update(self.balance, self.effective, p)

        # (7)
        self.epoch = t + 1
        self.refresh_total()

    def _finalize_exit(self, j: int, t: int) -> None:
        self.status[j] = Status.EXITED
        self.status_epoch[j] = t + self.params.withdraw_delay_epochs
        self.log.append(LogEntry(t, "ExitFinalized", j))

    def withdraw_validator(self, j: int) -> Gwei:
        self._check_id(j)
        st = Status(int(self.status[j]))
        if st == Status.EXITED:
            if self.status_epoch[j] > self.epoch:
                raise DomainError(
                    f"validator {j} not withdrawable until epoch {int(self.status_epoch[j])}"
                )
        elif st == Status.SLASHED_PENDING:
            raise DomainError(
                f"validator {j} not withdrawable until epoch "
                f"{int(self.status_epoch[j]) + self.params.z_epochs}"
            )
        elif st != Status.SLASHED_EXITED:
            raise DomainError(f"validator {j} is {st.label}; nothing to withdraw")
        amount = int(self.balance[j])
        self.balance[j] = 0
        self.effective[j] = 0
        self.status[j] = Status.WITHDRAWN
        self.stakers[int(self.owner[j])].withdrawn_funds += amount
        self.log.append(LogEntry(self.epoch, "Withdrawn", j))
        return amount


def duty_codes(duties, n: int) -> np.ndarray:
    """Normalise duties (array of outcome codes or mapping id -> Outcome)
    to an int8 array with ``NO_DUTY`` where unspecified."""
    if isinstance(duties, np.ndarray):
        if duties.shape != (n,):
            raise DomainError(f"duty array has shape {duties.shape}, expected ({n},)")
        return duties
    codes = np.full(n, NO_DUTY, dtype=np.int8)
    for j, outcome in duties.items():
        codes[j] = Outcome(outcome)
    return codes


def all_correct(state: ChainState) -> np.ndarray:
    return np.zeros(state.num_validators, dtype=np.int8)


def base_reward(state: ChainState, j: int) -> Gwei:
    """``floor(ybar_j * factor / (per_epoch * isqrt(Y)))`` for active ``j``."""
    state._check_id(j)
    if not state.is_active(j):
        raise DomainError(f"validator {j} is not in the active set")
    if state.total_active <= 0:
        raise DomainError("no stake")
    p = state.params
    return int(state.effective[j]) * p.base_reward_factor // (
        p.base_rewards_per_epoch * isqrt(state.total_active)
    )


def effective_balance_update(balance, current, params: ChainParams):
    """One hysteresis step: move the effective balance by at most 1 ETH.

    Up when ``balance > current + hysteresis_up``, down when
    ``balance < current - hysteresis_down``; capped at the maximum. Works on
    ints and on int64 arrays.
    """
    up = balance > current + params.hysteresis_up
    down = balance < current - params.hysteresis_down
    if isinstance(balance, np.ndarray):
        out = current + ETH * (up.view(np.int8) - down.view(np.int8)).astype(np.int64)
        np.clip(out, 0, params.max_effective_balance, out=out)
        return out
    out = current + ETH if up else current - ETH if down else current
    return min(max(out, 0), params.max_effective_balance)


def apply_duty_outcome(state: ChainState, j: int, outcome: Outcome) -> int:
    """Apply one duty result to ``j`` in place; returns the signed delta."""
    b = base_reward(state, j)
    p = state.params
    outcome = Outcome(outcome)
    if outcome == Outcome.CORRECT:
        gain = p.scaled(p.alpha, b)
        state.balance[j] += gain
        state.minted_total += gain
        return gain
    factor = p.beta if outcome == Outcome.INCORRECT else p.gamma
    return -int(state.burn(j, p.scaled(factor, b)))


def sign_voluntary_exit(state: ChainState, j: int) -> ChainState:
    new = state.copy()
    new.sign_exit(j)
    return new


def advance_epoch(state: ChainState, duties) -> ChainState:
    new = state.copy()
    new.advance(duties)
    return new


def withdraw(state: ChainState, j: int) -> tuple[ChainState, Gwei]:
    new = state.copy()
    amount = new.withdraw_validator(j)
    return new, amount


def snapshot(state: ChainState) -> dict[str, Any]:
    """Plain-data view of a state; equal snapshots mean identical states."""
    return {
        "epoch": state.epoch,
        "balance": state.balance.tolist(),
        "effective": state.effective.tolist(),
        "status": state.status.tolist(),
        "status_epoch": state.status_epoch.tolist(),
        "slashed": state.slashed.tolist(),
        "minted": state.minted_total,
        "burned": state.burned_total,
        "withdrawn": {k: s.withdrawn_funds for k, s in state.stakers.items()},
        "queue": list(state.exit_queue),
        "ledger": [asdict(r) for r in state.slash_ledger],
        "log": [asdict(e) for e in state.log],
        "total_active": state.total_active,
    }

