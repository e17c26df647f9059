"""Ransom escrow driven by observable beacon-chain facts.

The contract holds the victim's deposit and releases it to the attacker
only once every compromised validator has signed its exit by the deadline
and all of them have exited without being slashed. Any slashing of a
compromised validator while funds are held, or a missed signing deadline,
returns the deposit to the victim.

Events are applied one at a time with :func:`on_event`. Within one epoch
the order of delivery matters, so :func:`replay` and the settlement oracle
both canonicalise each epoch's batch: slashings first, then deposits, exit
signatures, finalizations and ticks.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace
from enum import Enum

from .units import Gwei


class ProtocolError(ValueError):
    """Events delivered out of order, or a malformed contract."""


class EventKind(str, Enum):
    SLASHED = "Slashed"
    DEPOSITED = "Deposited"
    EXIT_SIGNED = "ExitSigned"
    EXIT_FINALIZED = "ExitFinalized"
    EPOCH_TICK = "EpochTick"


# within-epoch processing order
PRECEDENCE = {
    EventKind.SLASHED: 0,
    EventKind.DEPOSITED: 1,
    EventKind.EXIT_SIGNED: 2,
    EventKind.EXIT_FINALIZED: 3,
    EventKind.EPOCH_TICK: 4,
}

_VALIDATOR_EVENTS = (EventKind.SLASHED, EventKind.EXIT_SIGNED, EventKind.EXIT_FINALIZED)


@dataclass(frozen=True)
class ChainEvent:
    kind: EventKind
    epoch: int
    validator: int | None = None
    amount: Gwei | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        if self.kind in _VALIDATOR_EVENTS and self.validator is None:
            raise ProtocolError(f"{self.kind.value} event needs a validator")
        if self.kind == EventKind.DEPOSITED and (self.amount is None or self.amount < 0):
            raise ProtocolError("Deposited event needs a non-negative amount")

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "epoch": self.epoch}
        if self.validator is not None:
            out["validator"] = self.validator
        if self.amount is not None:
            out["amount"] = self.amount
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ChainEvent:
        try:
            return cls(
                kind=EventKind(data["kind"]),
                epoch=int(data["epoch"]),
                validator=None if data.get("validator") is None else int(data["validator"]),
                amount=None if data.get("amount") is None else int(data["amount"]),
            )
        except KeyError as exc:
            raise ProtocolError(f"event is missing field {exc.args[0]!r}") from None
        except ValueError as exc:
            raise ProtocolError(f"bad event {data!r}: {exc}") from None


def deposited(amount: Gwei, epoch: int) -> ChainEvent:
    return ChainEvent(EventKind.DEPOSITED, epoch, amount=amount)


def exit_signed(j: int, epoch: int) -> ChainEvent:
    return ChainEvent(EventKind.EXIT_SIGNED, epoch, validator=j)


def exit_finalized(j: int, epoch: int) -> ChainEvent:
    return ChainEvent(EventKind.EXIT_FINALIZED, epoch, validator=j)


def slashed(j: int, epoch: int) -> ChainEvent:
    return ChainEvent(EventKind.SLASHED, epoch, validator=j)


def tick(epoch: int) -> ChainEvent:
    return ChainEvent(EventKind.EPOCH_TICK, epoch)


class EscrowState(str, Enum):
    OPEN = "Open"
    FUNDED = "Funded"
    SETTLED_PAYOUT = "SettledPayout"
    SETTLED_REFUND = "SettledRefund"
    EXPIRED_NO_DEPOSIT = "ExpiredNoDeposit"

    @property
    def terminal(self) -> bool:
        return self in (EscrowState.SETTLED_PAYOUT, EscrowState.SETTLED_REFUND, EscrowState.EXPIRED_NO_DEPOSIT)


class Settlement(str, Enum):
    PAYOUT = "Payout"
    REFUND = "Refund"
    NO_DEPOSIT = "NoDeposit"
    PENDING = "Pending"  # history ends before the contract resolves


@dataclass(frozen=True)
class TransferAction:
    """Funds leaving the contract. ``surplus`` is an overpayment handed back
    to the victim alongside a payout."""

    kind: str = "None"  # "PayAttacker" | "RefundVictim" | "None"
    amount: Gwei = 0
    surplus: Gwei = 0

    @property
    def is_none(self) -> bool:
        return self.kind == "None"


NO_TRANSFER = TransferAction()


def pay_attacker(amount: Gwei, surplus: Gwei = 0) -> TransferAction:
    return TransferAction("PayAttacker", amount, surplus)


def refund_victim(amount: Gwei) -> TransferAction:
    return TransferAction("RefundVictim", amount)


@dataclass
class EscrowContract:
    ransom: Gwei
    deadline: int
    compromised: frozenset[int]
    state: EscrowState = EscrowState.OPEN
    deposit_held: Gwei = 0
    exits_signed: frozenset[int] = frozenset()
    exits_finalized: frozenset[int] = frozenset()
    slashed_seen: bool = False
    last_epoch: int | None = None

    def to_dict(self) -> dict:
        return {
            "ransom": self.ransom,
            "deadline": self.deadline,
            "compromised": sorted(self.compromised),
            "state": self.state.value,
            "deposit_held": self.deposit_held,
            "exits_signed": sorted(self.exits_signed),
            "exits_finalized": sorted(self.exits_finalized),
        }

    @property
    def settlement(self) -> Settlement:
        return {
            EscrowState.SETTLED_PAYOUT: Settlement.PAYOUT,
            EscrowState.SETTLED_REFUND: Settlement.REFUND,
            EscrowState.EXPIRED_NO_DEPOSIT: Settlement.NO_DEPOSIT,
            EscrowState.OPEN: Settlement.NO_DEPOSIT,
            EscrowState.FUNDED: Settlement.PENDING,
        }[self.state]


def create(ransom: Gwei, deadline: int, compromised: Iterable[int], now: int = 0) -> EscrowContract:
    members = frozenset(int(j) for j in compromised)
    if ransom <= 0:
        raise ProtocolError("ransom must be positive")
    if not members:
        raise ProtocolError("compromised set is empty")
    if deadline <= now:
        raise ProtocolError(f"deadline {deadline} is not after epoch {now}")
    return EscrowContract(ransom=ransom, deadline=deadline, compromised=members)


def on_event(contract: EscrowContract, event: ChainEvent) -> tuple[EscrowContract, TransferAction]:
    """Apply one observed chain event. The input contract is not modified."""
    if contract.state.terminal:
        return contract, NO_TRANSFER
    if contract.last_epoch is not None and event.epoch < contract.last_epoch:
        raise ProtocolError(f"event at epoch {event.epoch} arrived after epoch {contract.last_epoch}")
    c = replace(contract, last_epoch=event.epoch)
    if event.kind in _VALIDATOR_EVENTS and event.validator not in c.compromised:
        return c, NO_TRANSFER

    # deadline: any event past t_r resolves a contract still waiting on it
    if event.epoch > c.deadline:
        if c.state == EscrowState.OPEN:
            c.state = EscrowState.EXPIRED_NO_DEPOSIT
            if event.kind == EventKind.DEPOSITED:
                return c, refund_victim(event.amount)
            return c, NO_TRANSFER
        if c.exits_signed != c.compromised:
            return _refund(c)

    kind = event.kind
    if kind == EventKind.SLASHED:
        c.slashed_seen = True
        if c.state == EscrowState.FUNDED:
            return _refund(c)
    elif kind == EventKind.DEPOSITED:
        if c.state != EscrowState.OPEN or event.amount < c.ransom or c.slashed_seen:
            return c, refund_victim(event.amount)
        c.state = EscrowState.FUNDED
        c.deposit_held = event.amount
    elif kind == EventKind.EXIT_SIGNED:
        c.exits_signed = c.exits_signed | {event.validator}
    elif kind == EventKind.EXIT_FINALIZED:
        c.exits_finalized = c.exits_finalized | {event.validator}

    if (
        c.state == EscrowState.FUNDED
        and not c.slashed_seen
        and c.exits_signed == c.compromised
        and c.exits_finalized == c.compromised
    ):
        held = c.deposit_held
        c.state = EscrowState.SETTLED_PAYOUT
        c.deposit_held = 0
        return c, pay_attacker(c.ransom, held - c.ransom)
    return c, NO_TRANSFER


def _refund(c: EscrowContract) -> tuple[EscrowContract, TransferAction]:
    held = c.deposit_held
    c.state = EscrowState.SETTLED_REFUND
    c.deposit_held = 0
    return c, refund_victim(held)


def canonical_order(history: Sequence[ChainEvent]) -> list[ChainEvent]:
    """Stable sort by (epoch, precedence)."""
    return sorted(history, key=lambda e: (e.epoch, PRECEDENCE[e.kind]))


def replay(contract: EscrowContract, history: Sequence[ChainEvent]) -> tuple[EscrowContract, list[TransferAction]]:
    """Fold :func:`on_event` over ``history`` in canonical order."""
    transfers = []
    for event in canonical_order(history):
        contract, action = on_event(contract, event)
        if not action.is_none:
            transfers.append(action)
    return contract, transfers


def settlement_outcome(
    history: Sequence[ChainEvent], ransom: Gwei, deadline: int, compromised: Iterable[int]
) -> Settlement:
    """Outcome decided by inspecting the whole history at once.

    Reference for :func:`replay`; shares no code with :func:`on_event`.
    """
    members = frozenset(compromised)
    prio = {"Slashed": 0, "Deposited": 1, "ExitSigned": 2, "ExitFinalized": 3, "EpochTick": 4}
    events = sorted(history, key=lambda e: (e.epoch, prio[e.kind.value]))
    # events about validators outside C play no part
    events = [e for e in events if e.validator is None or e.validator in members]

    slash_at = [i for i, e in enumerate(events) if e.kind.value == "Slashed"]
    # a deposit qualifies if it is large enough, on time, and no member was
    # slashed before it
    dep = next(
        (
            i
            for i, e in enumerate(events)
            if e.kind.value == "Deposited"
            and e.amount >= ransom
            and e.epoch <= deadline
            and not any(s < i for s in slash_at)
        ),
        None,
    )
    if dep is None:
        return Settlement.NO_DEPOSIT

    def first_index(pred) -> int | None:
        return next((i for i, e in enumerate(events) if pred(i, e)), None)

    # point at which every member has signed (by the deadline) and finalized
    signed_on_time = {e.validator: i for i, e in reversed(list(enumerate(events)))
                      if e.kind.value == "ExitSigned" and e.epoch <= deadline}
    finalized = {e.validator: i for i, e in reversed(list(enumerate(events)))
                 if e.kind.value == "ExitFinalized"}
    complete = None
    if set(signed_on_time) == members and set(finalized) == members:
        complete = max(max(signed_on_time.values()), max(finalized.values()), dep)

    slash_after = first_index(lambda i, e: i > dep and e.kind.value == "Slashed")
    late = None
    if set(signed_on_time) != members:
        late = first_index(lambda i, e: i > dep and e.epoch > deadline)

    if complete is not None and (slash_after is None or complete < slash_after):
        return Settlement.PAYOUT
    if slash_after is not None or late is not None:
        return Settlement.REFUND
    return Settlement.PENDING


def read_trace(path) -> list[ChainEvent]:
    """One JSON object per line: ``{kind, validator?, amount?, epoch}``."""
    events = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                events.append(ChainEvent.from_dict(json.loads(line)))
            except (json.JSONDecodeError, ProtocolError) as exc:
                raise ProtocolError(f"{path}:{lineno}: {exc}") from None
    return events


def write_trace(events: Iterable[ChainEvent], fh) -> None:
    for e in events:
        fh.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")


def contract_from_dict(data: dict) -> EscrowContract:
    try:
        return create(int(data["ransom"]), int(data["deadline"]), data["compromised"], int(data.get("created", 0)))
    except KeyError as exc:
        raise ProtocolError(f"contract is missing field {exc.args[0]!r}") from None
