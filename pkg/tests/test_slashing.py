from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from stakeransom.chain import ChainParams, ChainState, DomainError, Status, all_correct, base_reward
from stakeransom.slashing import (
    ForecastAssumption,
    PenaltyForecast,
    SlashRecord,
    apply_slash,
    forecast_total_penalty,
    per_epoch_slash_penalty,
    realized_penalty,
    recently_slashed_balance,
    slash,
    special_penalty,
    special_penalty_amount,
)
from stakeransom.units import ETH


def chain(n=4, **kw):
    return ChainState.genesis(ChainParams(**kw), [1] * n)


def big_chain_view(total=10**15):
    """A single 32 ETH validator sitting in a chain of total stake ``total``."""
    s = chain(1)
    s.total_active = total
    return s


def test_slash_burns_one_eth_and_pays_reporters():
    s = chain(4, whistleblower_reward=70_000)
    s2 = slash(s, 0, whistleblower=1, proposer=2)
    assert s.validator(0).status == Status.ACTIVE
    assert s2.balance[0] == 31 * ETH
    assert s2.balance[1] - s.balance[1] == 70_000
    assert s2.balance[2] - s.balance[2] == 10_000
    v = s2.validator(0)
    assert v.slashed and v.status == Status.SLASHED_PENDING
    rec = s2.slash_ledger[0]
    assert rec.special_due_epoch - rec.slash_epoch == s.params.z_epochs // 2
    lhs, rhs = s2.supply_check()
    assert lhs == rhs


def test_slash_errors_and_exit_queue():
    s = chain(3)
    s.sign_exit(0)
    apply_slash(s, 0)  # allowed while queued
    assert 0 not in s.exit_queue
    with pytest.raises(DomainError, match="already slashed"):
        apply_slash(s, 0)
    s.sign_exit(1)
    s.advance(all_correct(s))
    with pytest.raises(DomainError, match="cannot slash exited validator"):
        apply_slash(s, 1)


def test_slashed_validator_leaves_duty_set():
    s = chain(3)
    apply_slash(s, 0)
    s.advance({1: 0, 2: 0})
    assert s.total_active == 2 * 32 * ETH


def test_recently_slashed_window():
    s = chain(2)
    assert recently_slashed_balance(s, 100) == 0
    s.slash_ledger.append(SlashRecord(0, 100, 32 * ETH, 0, 100 + 4096))
    z = s.params.z_epochs
    assert recently_slashed_balance(s, 100) == 32 * ETH
    assert recently_slashed_balance(s, 99) == 0
    assert recently_slashed_balance(s, 100 + z - 1) == 32 * ETH
    assert recently_slashed_balance(s, 100 + z) == 0


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 40), st.integers(1, 32)), max_size=12), st.integers(0, 60))
def test_window_matches_brute_force_scan(records, at):
    s = chain(1, z_epochs=16)
    for epoch, eth_units in records:
        s.slash_ledger.append(SlashRecord(0, epoch, eth_units * ETH, 0, epoch + 8))
    expected = 0
    for epoch, eth_units in records:
        if epoch in range(at - 16 + 1, at + 1):
            expected += eth_units * ETH
    assert recently_slashed_balance(s, at) == expected


def test_special_penalty_examples():
    assert special_penalty_amount(32 * ETH, 10**12, 10**15, Fraction(3)) == 96_000_000
    assert special_penalty_amount(32 * ETH, 0, 10**15, Fraction(3)) == 0
    assert special_penalty_amount(32 * ETH, 10**15 // 3 + 1, 10**15, Fraction(3)) == 32 * ETH


def test_special_penalty_requires_due_record():
    s = chain(3)
    apply_slash(s, 0)
    tau = s.params.z_epochs // 2
    with pytest.raises(DomainError, match="no special penalty due"):
        special_penalty(s, 0, tau + 1)
    # G = 32 ETH, Y = 96 ETH: 3*G >= Y, so the whole effective balance goes
    assert special_penalty(s, 0, tau) == 32 * ETH


def test_per_epoch_penalty():
    s = chain(1)
    s.total_active = 10**15
    assert base_reward(s, 0) == 16_190
    apply_slash(s, 0)
    assert per_epoch_slash_penalty(s, 0) == 48_570
    assert 8192 * per_epoch_slash_penalty(s, 0) == 397_885_440
    with pytest.raises(DomainError, match="not inside"):
        per_epoch_slash_penalty(chain(1), 0)


def test_forecast_worked_example():
    s = big_chain_view()
    default = forecast_total_penalty(s, [0], 0)
    assert default.to_dict() == {"initial": 10**9, "per_epoch_total": 397_885_440,
                                 "special_total": 3_072_000, "total": 1_400_957_440}
    # with 10^12 Gwei slashed in the window the special term is 96e6
    crowded = forecast_total_penalty(s, [0], 0, ForecastAssumption(other_slashed=10**12 - 32 * ETH))
    assert crowded.special_total == 96_000_000
    assert crowded.total == 1_493_885_440


def test_forecast_delta_zero_leaves_initial_only():
    s = ChainState.genesis(ChainParams(delta=0), [1])
    s.total_active = 10**18
    fc = forecast_total_penalty(s, [0], 0)
    assert fc.per_epoch_total == 0 and fc.initial == 10**9
    assert fc.special_total < 10_000  # G tiny relative to Y


def test_forecast_whole_chain_loses_everything_special():
    s = chain(5)
    fc = forecast_total_penalty(s, range(5), 0)
    assert fc.special_total == 5 * 32 * ETH


def test_forecast_errors():
    s = chain(3)
    with pytest.raises(DomainError, match="empty"):
        forecast_total_penalty(s, [], 0)
    apply_slash(s, 0)
    with pytest.raises(DomainError):
        forecast_total_penalty(s, [0], 5)


def test_penalty_forecast_serialization():
    fc = PenaltyForecast(1, 2, 3)
    assert fc.total == 6
    assert PenaltyForecast.from_dict(fc.to_dict()) == fc
    with pytest.raises(DomainError):
        PenaltyForecast.from_dict({"initial": 1, "per_epoch_total": 2, "special_total": 3, "total": 7})


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(0, 30), st.data())
def test_constant_forecast_matches_oracle(n, extra, data):
    s = ChainState.genesis(ChainParams(), [1] * (n + extra))
    effs = data.draw(st.lists(st.integers(17, 32), min_size=n + extra, max_size=n + extra))
    s.effective[:] = np.array(effs) * ETH
    s.refresh_total()
    ids = list(range(n))
    fc = forecast_total_penalty(s, ids, 0)
    init, per, special = oracles.forecast_constant([e * ETH for e in effs[:n]], s.total_active)
    assert (fc.initial, fc.per_epoch_total, fc.special_total) == (init, per, special)


def test_forecast_monotone_in_set_and_scales():
    s = ChainState.genesis(ChainParams(), [1] * 40)
    prev = 0
    for k in range(1, 40):
        total = forecast_total_penalty(s, range(k), 0).total
        assert total >= prev
        prev = total
    lo = forecast_total_penalty(ChainState.genesis(ChainParams(delta=1, big_delta=1), [1] * 40), range(3), 0).total
    hi = forecast_total_penalty(ChainState.genesis(ChainParams(delta=2, big_delta=2), [1] * 40), range(3), 0).total
    assert lo <= hi


@pytest.mark.parametrize("n, k, t_r", [(20, 1, 0), (20, 3, 5), (10, 4, 2), (6, 6, 0)])
def test_projected_forecast_equals_live_replay(n, k, t_r):
    params = ChainParams(z_epochs=256)
    s = ChainState.genesis(params, [1] * n)
    fc = forecast_total_penalty(s, range(k), t_r, ForecastAssumption(mode="projected"))
    live = s.copy()
    while live.epoch < t_r:
        live.advance(all_correct(live))
    for j in range(k):
        apply_slash(live, j)
    for _ in range(params.z_epochs):
        live.advance(all_correct(live))
    assert realized_penalty(live, range(k)) == fc
    assert live.supply_check()[0] == live.supply_check()[1]


def test_special_is_applied_once_at_tau():
    params = ChainParams(z_epochs=32)
    s = ChainState.genesis(params, [1] * 10)
    apply_slash(s, 0)
    for _ in range(40):
        s.advance(all_correct(s))
    assert s.slash_ledger[0].special_applied
    # at tau: effective 31 ETH after the initial burn, G = 32 ETH, Y = 9 * 32 ETH
    assert s.burned_special[0] == 31 * ETH // 3
