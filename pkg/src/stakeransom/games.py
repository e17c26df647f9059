"""The Pay-and-Exit extortion game and the repeated Pay-or-Slash interaction.

Timeline of Pay and Exit: the attacker names a ransom ``R`` and deadline
``t_r``; the victim deposits into escrow or not; at ``t_r`` the attacker
slashes or not. Payoffs (attacker, victim) with ``S`` the compromised
balance, ``H`` the forecast slashing loss, ``f`` the victim's fee and
``zeta`` the attacker's net cost of slashing::

    Deposit,    NotSlash   ( R,     S - f - R )
    Deposit,    Slash      ( -zeta, S - H - f )   ransom refunded
    NotDeposit, NotSlash   ( 0,     S )
    NotDeposit, Slash      ( -zeta, S - H )

Ties are broken against acting: the attacker slashes only on a strict
gain, the victim deposits only on a strict gain. On a Gwei grid the
attacker's best demand is therefore one tick below ``H - f``.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .chain import DomainError
from .units import Gwei

DEFAULT_GRID_LIMIT = 10**6


class VictimAction(str, Enum):
    DEPOSIT = "Deposit"
    NOT_DEPOSIT = "NotDeposit"


class AttackerAction(str, Enum):
    SLASH = "Slash"
    NOT_SLASH = "NotSlash"


@dataclass(frozen=True)
class PayAndExitGame:
    compromised_balance: Gwei
    penalty_H: Gwei
    fee_f: Gwei = 0
    slash_cost_zeta: int = 0
    deadline: int = 0
    exit_epoch: int = 0

    def __post_init__(self):
        if self.fee_f < 0:
            raise DomainError("fee_f must be non-negative")
        if self.penalty_H < 0 or self.compromised_balance < 0:
            raise DomainError("balances and penalties must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> PayAndExitGame:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown game field(s): {', '.join(sorted(unknown))}")
        for name in ("compromised_balance", "penalty_H"):
            if name not in data:
                raise DomainError(f"game is missing field {name!r}")
        return cls(**{k: int(v) for k, v in data.items()})


@dataclass(frozen=True)
class Equilibrium:
    ransom_R: Gwei
    victim_action: VictimAction
    attacker_action_on_deposit: AttackerAction
    attacker_action_on_no_deposit: AttackerAction
    attacker_payoff: int
    victim_payoff: int
    credible: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("victim_action", "attacker_action_on_deposit", "attacker_action_on_no_deposit"):
            out[key] = out[key].value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> Equilibrium:
        return cls(
            ransom_R=int(data["ransom_R"]),
            victim_action=VictimAction(data["victim_action"]),
            attacker_action_on_deposit=AttackerAction(data["attacker_action_on_deposit"]),
            attacker_action_on_no_deposit=AttackerAction(data["attacker_action_on_no_deposit"]),
            attacker_payoff=int(data["attacker_payoff"]),
            victim_payoff=int(data["victim_payoff"]),
            credible=bool(data["credible"]),
        )


def payoffs(game: PayAndExitGame, R, victim: VictimAction, attacker: AttackerAction):
    """(attacker, victim) payoff at one leaf. ``R`` may be an int or an array."""
    s, h, f, zeta = game.compromised_balance, game.penalty_H, game.fee_f, game.slash_cost_zeta
    victim, attacker = VictimAction(victim), AttackerAction(attacker)
    if victim == VictimAction.DEPOSIT:
        if attacker == AttackerAction.NOT_SLASH:
            return R, s - f - R
        return -zeta + 0 * R, s - h - f + 0 * R
    if attacker == AttackerAction.NOT_SLASH:
        return 0 * R, s + 0 * R
    return -zeta + 0 * R, s - h + 0 * R


def max_ransom_pay_and_exit(game: PayAndExitGame) -> Gwei:
    return max(game.penalty_H - game.fee_f, 0)


def solve_spne(game: PayAndExitGame, tick: Gwei) -> Equilibrium:
    """Backward induction in closed form."""
    if tick <= 0:
        raise DomainError("tick must be positive")
    threat = -game.slash_cost_zeta
    on_no_deposit = AttackerAction.SLASH if threat > 0 else AttackerAction.NOT_SLASH
    bound = max_ransom_pay_and_exit(game)
    demand = bound - tick
    if threat > 0 and demand > 0 and demand > threat:
        return _profile(game, demand, VictimAction.DEPOSIT, AttackerAction.NOT_SLASH, on_no_deposit, True)
    # no demand the victim strictly prefers to pay
    on_deposit = AttackerAction.SLASH if threat > 0 else AttackerAction.NOT_SLASH
    return _profile(game, 0, VictimAction.NOT_DEPOSIT, on_deposit, on_no_deposit, threat > 0)


def _profile(game, R, victim, on_deposit, on_no_deposit, credible) -> Equilibrium:
    attacker_move = on_deposit if victim == VictimAction.DEPOSIT else on_no_deposit
    a, v = payoffs(game, R, victim, attacker_move)
    return Equilibrium(R, victim, on_deposit, on_no_deposit, int(a), int(v), credible)


def brute_force_spne(game: PayAndExitGame, tick: Gwei, grid_limit: int = DEFAULT_GRID_LIMIT) -> Equilibrium:
    """Enumerate every ransom on the tick grid and every pure action at each
    node, keeping only moves that are optimal in their own subgame.

    The grid is the lattice of demands congruent to ``H - f`` modulo
    ``tick`` (so a demand can sit exactly one tick under the victim's
    ceiling), from the first positive point up to two ticks past ``H``;
    nothing above ``H`` can be accepted since refusing costs at most ``H``.
    """
    if tick <= 0:
        raise DomainError("tick must be positive")
    phase = max(game.penalty_H - game.fee_f, 0) % tick
    points = game.penalty_H // tick + 2
    if points > grid_limit:
        raise DomainError(f"ransom grid of {points} points exceeds the limit of {grid_limit}")
    grid = phase + np.arange(0 if phase else 1, points + 1, dtype=np.int64) * tick
    A = AttackerAction
    V = VictimAction

    # attacker after a deposit: compare both moves at every R
    keep_dep, _ = payoffs(game, grid, V.DEPOSIT, A.NOT_SLASH)
    slash_dep, _ = payoffs(game, grid, V.DEPOSIT, A.SLASH)
    dep_move_slash = slash_dep > keep_dep
    # attacker after no deposit: independent of R
    a_ns, _ = payoffs(game, 0, V.NOT_DEPOSIT, A.NOT_SLASH)
    a_s, _ = payoffs(game, 0, V.NOT_DEPOSIT, A.SLASH)
    nodep_move = A.SLASH if a_s > a_ns else A.NOT_SLASH
    _, v_nodep = payoffs(game, 0, V.NOT_DEPOSIT, nodep_move)

    _, v_dep_keep = payoffs(game, grid, V.DEPOSIT, A.NOT_SLASH)
    _, v_dep_slash = payoffs(game, grid, V.DEPOSIT, A.SLASH)
    v_dep = np.where(dep_move_slash, v_dep_slash, v_dep_keep)
    deposits = v_dep > v_nodep

    a_dep = np.where(dep_move_slash, slash_dep, keep_dep)
    if deposits.any():
        a_best = a_dep[deposits].max()
        candidates = grid[deposits & (a_dep == a_best)]
        if a_best > (a_s if nodep_move == A.SLASH else a_ns):
            R = int(candidates.max())
            on_dep = A.SLASH if dep_move_slash[grid == R][0] else A.NOT_SLASH
            a, v = payoffs(game, R, V.DEPOSIT, on_dep)
            return Equilibrium(R, V.DEPOSIT, on_dep, nodep_move, int(a), int(v), nodep_move == A.SLASH)
    on_dep = A.SLASH if (payoffs(game, 0, V.DEPOSIT, A.SLASH)[0] > 0) else A.NOT_SLASH
    a, v = payoffs(game, 0, V.NOT_DEPOSIT, nodep_move)
    return Equilibrium(0, V.NOT_DEPOSIT, on_dep, nodep_move, int(a), int(v), nodep_move == A.SLASH)


# Pay or Slash ----------------------------------------------------------------


@dataclass(frozen=True)
class PayOrSlashCap:
    cap: Gwei  # cumulative ransom ceiling, H - f
    pre_fee_cap: Gwei  # H


def pay_or_slash_cap(game: PayAndExitGame) -> PayOrSlashCap:
    return PayOrSlashCap(max_ransom_pay_and_exit(game), game.penalty_H)


VictimPolicy = Callable[[int, int, PayAndExitGame], bool]
"""``policy(paid_so_far, demand, game) -> accept?``"""


def rational_policy() -> VictimPolicy:
    """Pay only while the running total stays strictly below ``H - f``."""

    def accept(paid: int, demand: int, game: PayAndExitGame) -> bool:
        return paid + demand < max_ransom_pay_and_exit(game)

    return accept


def naive_policy(budget: Gwei) -> VictimPolicy:
    """Keeps paying until the running total would exceed ``budget``."""

    def accept(paid: int, demand: int, game: PayAndExitGame) -> bool:
        return paid + demand <= budget

    return accept


def never_pay_policy() -> VictimPolicy:
    return lambda paid, demand, game: False


@dataclass
class RepeatedOutcome:
    cumulative_ransom: Gwei
    iterations_survived: int
    outcome: str  # "Slashed" | "ThreatAbandoned" | "Survived"
    payments: list[Gwei] = field(default_factory=list)
    epochs_elapsed: int = 0
    attacker_payoff: int = 0
    victim_payoff: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def simulate_pay_or_slash(
    game: PayAndExitGame,
    window_x: int,
    iterations: int,
    victim_policy: VictimPolicy,
    demand_schedule: Sequence[Gwei],
) -> RepeatedOutcome:
    """Run the renewable "no slashing for X epochs" contract.

    Iteration ``i`` demands ``demand_schedule[i]`` (the last entry repeats).
    A rejected demand ends the game: the attacker slashes if that is a
    strict gain for the attacker, otherwise the threat is abandoned.
    """
    if not demand_schedule:
        raise DomainError("demand schedule is empty")
    if iterations < 1 or window_x < 1:
        raise DomainError("iterations and window_x must be at least 1")
    s, h, zeta = game.compromised_balance, game.penalty_H, game.slash_cost_zeta
    paid: list[int] = []
    for i in range(iterations):
        demand = demand_schedule[min(i, len(demand_schedule) - 1)]
        if demand <= 0:
            raise DomainError("demands must be positive")
        if victim_policy(sum(paid), demand, game):
            paid.append(demand)
            continue
        total = sum(paid)
        if -zeta > 0:
            return RepeatedOutcome(total, i, "Slashed", paid, i * window_x, total - zeta, s - h - total)
        return RepeatedOutcome(total, i, "ThreatAbandoned", paid, i * window_x, total, s - total)
    total = sum(paid)
    return RepeatedOutcome(total, iterations, "Survived", paid, iterations * window_x, total, s - total)
