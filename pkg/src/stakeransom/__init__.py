"""Deterministic simulator and game-theoretic analyzer for extortion of
proof-of-stake validators."""

from .chain import ChainParams, ChainState, DomainError, Outcome, Status
from .escrow import ChainEvent, EscrowContract, ProtocolError, Settlement, replay, settlement_outcome
from .games import PayAndExitGame, brute_force_spne, max_ransom_pay_and_exit, simulate_pay_or_slash, solve_spne
from .harness import ConfigError, Scenario, SimReport, partition_experiment, penalty_sweep, run, scenario_from_dict
from .slashing import ForecastAssumption, PenaltyForecast, forecast_total_penalty, special_penalty
from .units import ETH, Gwei, describe

__all__ = [
    "ETH", "ChainEvent", "ChainParams", "ChainState", "ConfigError", "DomainError", "EscrowContract",
    "ForecastAssumption", "Gwei", "Outcome", "PayAndExitGame", "PenaltyForecast", "ProtocolError",
    "Scenario", "Settlement", "SimReport", "Status", "brute_force_spne", "describe", "forecast_total_penalty",
    "max_ransom_pay_and_exit", "partition_experiment", "penalty_sweep", "replay", "run", "scenario_from_dict",
    "settlement_outcome", "simulate_pay_or_slash", "solve_spne", "special_penalty",
]
