import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from stakeransom.chain import (
    ChainParams,
    ChainState,
    DomainError,
    Outcome,
    Status,
    advance_epoch,
    all_correct,
    apply_duty_outcome,
    base_reward,
    effective_balance_update,
    sign_voluntary_exit,
    snapshot,
    withdraw,
)
from stakeransom.slashing import apply_slash
from stakeransom.units import ETH, eth

P = ChainParams()


def chain(n=4, **kw):
    return ChainState.genesis(ChainParams(**kw), [1] * n)


def state_with_total(total):
    """One active validator at 32 ETH inside a chain whose Y is ``total``."""
    st = ChainState.genesis(P, [1])
    st.total_active = total
    return st


# base reward ------------------------------------------------------------------


@pytest.mark.parametrize(
    "total, expected",
    [
        (10**15, 16_190),
        # 2,862,175 is sometimes quoted; exact evaluation floors to 2,862,174
        (32 * ETH, 2_862_174),
    ],
)
def test_base_reward_examples(total, expected):
    assert base_reward(state_with_total(total), 0) == expected
    assert oracles.base_reward(32 * ETH, total) == expected


def test_base_reward_zero_effective():
    st = state_with_total(10**15)
    st.effective[0] = 0
    assert base_reward(st, 0) == 0


def test_base_reward_no_stake():
    st = state_with_total(0)
    with pytest.raises(DomainError, match="no stake"):
        base_reward(st, 0)


def test_base_reward_homogeneous():
    st = chain(8)
    assert len({base_reward(st, j) for j in range(8)}) == 1


@given(st.integers(0, 32), st.integers(1, 10**18))
def test_base_reward_matches_oracle(eth_units, total):
    st = state_with_total(total)
    st.effective[0] = eth_units * ETH
    assert base_reward(st, 0) == oracles.base_reward(eth_units * ETH, total)


# effective balance ---------------------------------------------------------------


def test_hysteresis_examples():
    assert effective_balance_update(eth("28.25") + 1, 27 * ETH, P) == 28 * ETH
    assert effective_balance_update(eth("28.25"), 27 * ETH, P) == 27 * ETH
    assert effective_balance_update(eth("25.75") - 1, 27 * ETH, P) == 26 * ETH
    assert effective_balance_update(eth("26.75"), 27 * ETH, P) == 27 * ETH
    assert effective_balance_update(eth("26.75") - 1, 27 * ETH, P) == 26 * ETH
    assert effective_balance_update(32 * ETH, 32 * ETH, P) == 32 * ETH
    assert effective_balance_update(40 * ETH, 32 * ETH, P) == 32 * ETH


@given(st.integers(0, 40 * ETH), st.integers(0, 32))
def test_hysteresis_matches_oracle_scalar_and_array(balance, current_eth):
    cur = current_eth * ETH
    expected = oracles.hysteresis(balance, cur)
    assert effective_balance_update(balance, cur, P) == expected
    arr = effective_balance_update(np.array([balance]), np.array([cur]), P)
    assert arr.tolist() == [expected]
    assert expected % ETH == 0 and expected <= 32 * ETH


# duties ---------------------------------------------------------------------------


def test_duty_outcomes():
    st = state_with_total(10**15)
    before = st.supply_check()
    assert apply_duty_outcome(st, 0, Outcome.CORRECT) == 48_570
    assert apply_duty_outcome(st, 0, Outcome.OFFLINE) == -16_190
    assert apply_duty_outcome(st, 0, Outcome.INCORRECT) == -48_570
    assert st.balance[0] == 32 * ETH - 16_190
    lhs, rhs = st.supply_check()
    assert lhs == rhs and before[0] == before[1]


def test_duty_outcome_zero_reward():
    st = state_with_total(10**15)
    st.effective[0] = 0
    for o in Outcome:
        assert apply_duty_outcome(st, 0, o) == 0


def test_duty_on_inactive_validator_rejected():
    st = chain(2)
    apply_slash(st, 0)
    with pytest.raises(DomainError):
        apply_duty_outcome(st, 0, Outcome.CORRECT)


def test_missing_duty_rejected():
    st = chain(3)
    with pytest.raises(DomainError, match="missing duty"):
        advance_epoch(st, {0: Outcome.CORRECT, 1: Outcome.CORRECT})


# exits ------------------------------------------------------------------------------


def test_voluntary_exit_and_irreversibility():
    st = chain(2)
    st.epoch = 10
    st2 = sign_voluntary_exit(st, 0)
    assert st.validator(0).status == Status.ACTIVE  # original untouched
    v = st2.validator(0)
    assert v.status == Status.EXIT_QUEUED and v.status_epoch == 10
    with pytest.raises(DomainError, match="exit not permitted"):
        sign_voluntary_exit(st2, 0)
    apply_slash(st2, 1)
    with pytest.raises(DomainError, match="exit not permitted"):
        sign_voluntary_exit(st2, 1)


def test_exit_queue_quota_fifo():
    st = chain(12)
    for j in range(10):
        st.sign_exit(j)
    st.advance(all_correct(st))
    exited = [j for j in range(12) if st.status[j] == Status.EXITED]
    assert exited == [0, 1, 2, 3]
    st.advance(all_correct(st))
    assert [j for j in range(12) if st.status[j] == Status.EXITED] == list(range(8))


def test_withdraw_delay_and_single_transfer():
    st = chain(2)
    st.epoch = 100
    st.sign_exit(0)
    st.advance(all_correct(st))
    v = st.validator(0)
    assert v.status == Status.EXITED and v.status_epoch == 356
    with pytest.raises(DomainError, match="356"):
        withdraw(st, 0)
    while st.epoch < 356:
        st.advance(all_correct(st))
    balance = int(st.balance[0])
    st2, amount = withdraw(st, 0)
    assert amount == balance and st2.stakers[0].withdrawn_funds == balance
    assert st2.validator(0).status == Status.WITHDRAWN and st2.balance[0] == 0
    with pytest.raises(DomainError):
        withdraw(st2, 0)
    lhs, rhs = st2.supply_check()
    assert lhs == rhs


def test_withdraw_exact_amount():
    st = chain(1)
    st.sign_exit(0)
    st.advance(all_correct(st))
    st.epoch = int(st.status_epoch[0])
    st.balance[0] = eth("31.4")
    st.initial_deposits = eth("31.4")
    st.minted_total = st.burned_total = 0
    _, amount = withdraw(st, 0)
    assert amount == 31_400_000_000


def test_forced_exit_below_floor_without_penalty():
    st = chain(3)
    st.balance[0] = eth("15.9") + 16_190 * 10  # duty penalty lands it under 16 ETH
    st.initial_deposits = int(st.balance.sum())
    duties = {0: Outcome.OFFLINE, 1: Outcome.CORRECT, 2: Outcome.CORRECT}
    b = base_reward(st, 0)
    before = int(st.balance[0])
    st.advance(duties)
    assert st.validator(0).status == Status.EXITED
    assert st.balance[0] == before - b  # only the duty penalty
    assert any(e.kind == "ExitFinalized" and e.validator == 0 for e in st.log)


def test_slashed_exits_after_z_epochs():
    st = chain(4, z_epochs=64)
    apply_slash(st, 0)
    for _ in range(63):
        st.advance(all_correct(st))
    assert st.validator(0).status == Status.SLASHED_PENDING
    st.advance(all_correct(st))
    assert st.epoch == 64 and st.validator(0).status == Status.SLASHED_EXITED


# invariants ----------------------------------------------------------------------------

actions = st.lists(
    st.tuples(st.sampled_from(["advance", "exit", "slash", "withdraw"]), st.integers(0, 5), st.integers(0, 2**32)),
    max_size=40,
)


@settings(max_examples=60, deadline=None)
@given(actions)
def test_random_operation_sequences_keep_invariants(ops):
    st = ChainState.genesis(ChainParams(z_epochs=8, withdraw_delay_epochs=3, whistleblower_reward=70_000), [2, 2, 2])
    left_active = set()
    for op, j, seed in ops:
        prev = st.status.copy()
        try:
            if op == "advance":
                rng = np.random.default_rng(seed)
                st.advance(rng.integers(0, 3, st.num_validators).astype(np.int8))
            elif op == "exit":
                st.sign_exit(j)
            elif op == "slash":
                apply_slash(st, j, whistleblower=(j + 1) % 6, proposer=(j + 2) % 6)
            else:
                st.withdraw_validator(j)
        except DomainError:
            pass
        lhs, rhs = st.supply_check()
        assert lhs == rhs
        assert np.all(st.effective % ETH == 0) and np.all(st.effective <= 32 * ETH)
        assert np.all(st.balance >= 0)
        left_active |= {k for k in range(6) if prev[k] != Status.ACTIVE}
        assert all(st.status[k] != Status.ACTIVE for k in left_active)


def test_advance_is_deterministic():
    def go():
        st = chain(6)
        apply_slash(st, 2)
        st.sign_exit(4)
        rng = np.random.default_rng(5)
        for _ in range(30):
            st = advance_epoch(st, rng.integers(0, 3, 6).astype(np.int8))
        return snapshot(st)

    assert go() == go()


def test_params_json_roundtrip(tmp_path):
    p = ChainParams(delta="3/2", exit_quota_per_epoch=8)
    path = tmp_path / "p.json"
    import json

    path.write_text(json.dumps(p.to_dict()))
    assert ChainParams.from_json(path) == p
    with pytest.raises(DomainError, match="unknown"):
        ChainParams.from_dict({"nope": 1})
    with pytest.raises(DomainError, match="even"):
        ChainParams(z_epochs=7)
