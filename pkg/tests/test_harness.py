import json

import numpy as np
import pytest

from conftest import forward_policy_value, two_step_mdp
from esa_rl.agents import Hyperparams, new_esa_agent, new_ucbq_agent
from esa_rl.envs import GeneratorSpec, chain_mdp, random_mdp
from esa_rl.harness import (
    DETERMINISTIC,
    InitStateSchedule,
    RegretRecord,
    check_invariants,
    deterministic_failures,
    fit_regret_exponent,
    fraction_clean,
    read_regret_csv,
    run_experiment,
    sweep,
)
from esa_rl.mdp import TabularMDP, greedy_policy, make_rng, optimal_values, run_episode


def injected(algo, mdp, K):
    hp = Hyperparams.for_mdp(mdp, K=K)
    opt = optimal_values(mdp)
    agent = new_esa_agent(hp) if algo == "esa" else new_ucbq_agent(hp)
    agent.Q[:] = opt.Q
    agent.V[:] = opt.V
    return hp, agent


class TestRunExperiment:
    @pytest.mark.parametrize("algo", ["esa", "ucb-q"])
    def test_optimal_tables_give_zero_regret(self, algo):
        mdp = random_mdp(4, 3, 4, seed=3)
        hp, agent = injected(algo, mdp, 200)
        rec = run_experiment(mdp, algo, hp, InitStateSchedule("round-robin"), seed=1, agent=agent)
        assert rec.K == 200 and np.all(rec.per_episode == 0.0)

    def test_fresh_agent_first_episode(self):
        mdp = two_step_mdp()
        rec = run_experiment(mdp, "esa", Hyperparams.for_mdp(mdp, K=1), seed=0)
        # all-H table ties resolve to action 0, which is optimal from state 0
        assert rec.per_episode[0] == 0.0

    def test_regret_is_exact_policy_gap(self):
        mdp = random_mdp(3, 2, 3, seed=8)
        hp = Hyperparams.for_mdp(mdp, K=30, c_b=0.05)
        rec = run_experiment(mdp, "esa", hp, InitStateSchedule("round-robin"), seed=2)
        # replay by hand with an independent value oracle
        agent = new_esa_agent(hp)
        rng = make_rng(2)
        v_star = optimal_values(mdp).V[0]
        for k in range(30):
            s1 = k % mdp.S
            expected = v_star[s1] - forward_policy_value(mdp, agent.policy())[s1]
            assert rec.per_episode[k] == pytest.approx(expected, abs=1e-12)
            run_episode(mdp, agent.act, agent.observe, s1, rng)

    def test_empty_budget(self):
        mdp = random_mdp(2, 2, 2, seed=0)
        rec = run_experiment(mdp, "esa", Hyperparams.for_mdp(mdp, K=5), episodes=0)
        assert rec.K == 0 and rec.final_regret == 0.0 and len(rec.cumulative) == 0

    def test_dimension_mismatch(self):
        mdp = random_mdp(2, 2, 2, seed=0)
        with pytest.raises(ValueError, match="sized"):
            run_experiment(mdp, "esa", Hyperparams(S=3, A=2, H=2, K=5))

    def test_record_invariants(self):
        mdp = random_mdp(3, 2, 4, seed=4)
        hp = Hyperparams.for_mdp(mdp, K=400, c_b=0.1)
        rec = run_experiment(mdp, "esa", hp, InitStateSchedule("seeded-random"), seed=5)
        assert np.all(rec.per_episode >= -1e-9) and np.all(rec.per_episode <= mdp.H)
        np.testing.assert_allclose(rec.cumulative, np.cumsum(rec.per_episode), atol=1e-9)

    @pytest.mark.parametrize("level", ["off", "cheap", "full"])
    def test_replay_is_bitwise(self, level):
        mdp = chain_mdp(4, 5, 0.2)
        hp = Hyperparams.for_mdp(mdp, K=300, c_b=0.2)
        a = run_experiment(mdp, "esa", hp, seed=9, check_level=level)
        b = run_experiment(mdp, "esa", hp, seed=9, check_level=level)
        assert a == b and a.csv_text() == b.csv_text()
        assert a != run_experiment(mdp, "esa", hp, seed=10, check_level=level)

    def test_checks_are_passive(self):
        mdp = random_mdp(3, 3, 3, seed=2)
        hp = Hyperparams.for_mdp(mdp, K=200, c_b=0.1)
        off = run_experiment(mdp, "esa", hp, seed=1, check_level="off")
        full = run_experiment(mdp, "esa", hp, seed=1, check_level="full")
        assert np.array_equal(off.per_episode, full.per_episode)

    def test_monitor_detects_lost_optimism(self):
        # a bonus this small cannot keep Q above Q*; the statistical counters must notice
        mdp = random_mdp(3, 2, 3, seed=0)
        hp = Hyperparams.for_mdp(mdp, K=2000, c_b=1e-3)
        rec = run_experiment(mdp, "esa", hp, InitStateSchedule("round-robin"), seed=0, check_level="full")
        assert rec.violations.get("optimism", 0) > 0
        assert not deterministic_failures(rec.violations)

    def test_schedules(self):
        rng = make_rng(0)
        assert [InitStateSchedule("round-robin").start(k, 3, rng) for k in range(5)] == [0, 1, 2, 0, 1]
        assert InitStateSchedule.parse("fixed:2").start(0, 3, rng) == 2
        assert str(InitStateSchedule.parse("fixed")) == "fixed:0"
        with pytest.raises(ValueError):
            InitStateSchedule.parse("fixed:5").start(0, 3, rng)
        with pytest.raises(ValueError):
            InitStateSchedule("adversary")


class TestCheckInvariants:
    def trained(self):
        mdp = random_mdp(3, 2, 3, seed=1)
        hp = Hyperparams.for_mdp(mdp, K=100, c_b=0.3)
        agent = new_esa_agent(hp)
        rng = make_rng(0)
        for k in range(100):
            run_episode(mdp, agent.act, agent.observe, k % 3, rng)
        return mdp, agent

    def test_fresh_agent_is_optimistic_and_pessimistic(self):
        mdp = random_mdp(3, 2, 3, seed=1)
        agent = new_esa_agent(Hyperparams.for_mdp(mdp, K=10))
        report = check_invariants(agent, optimal_values(mdp), "full")
        assert report["optimism"] == 0 and report["pessimism_q"] == 0 and report["pessimism_v"] == 0
        assert sum(report.values()) == 0

    def test_injected_increase_counts_once(self):
        mdp, agent = self.trained()
        prev = agent.copy()
        cur = agent.copy()
        idx = tuple(np.argwhere((cur.Q < cur.Q_ref - 1e-3) & (cur.Q < mdp.H - 1e-3))[0])
        cur.Q[idx] += 1e-4
        report = check_invariants(cur, None, "full", previous=prev)
        assert report["q_monotone"] == 1
        assert sum(report[k] for k in DETERMINISTIC) == 1

    def test_zero_closeness_gap(self):
        _, agent = self.trained()
        agent.V_ref[:] = agent.V
        assert check_invariants(agent, None, "full")["closeness"] == 0
        agent.V_ref[0, 0] = agent.V[0, 0] + 2.5
        assert check_invariants(agent, None, "full")["closeness"] == 1

    def test_cheap_only_looks_at_visited(self):
        _, agent = self.trained()
        prev = agent.copy()
        agent.Q[2, 2, 1] += 0.5
        assert check_invariants(agent, None, "cheap", prev, visited=[(0, 0, 0)])["q_monotone"] == 0
        assert check_invariants(agent, None, "cheap", prev, visited=[(2, 2, 1)])["q_monotone"] == 1

    def test_settle_counter(self):
        _, agent = self.trained()
        prev = agent.copy()
        prev.u_ref[:] = True
        agent.u_ref[:] = True
        agent.u_ref[1, 1] = False
        counts = np.zeros((3, 3), dtype=np.int64)
        assert check_invariants(agent, None, "full", prev, settle_counts=counts)["settle_once"] == 0
        assert counts[1, 1] == 1
        assert check_invariants(agent, None, "full", prev, settle_counts=counts)["settle_once"] == 1

    def test_off_level(self):
        _, agent = self.trained()
        agent.Q[:] = -5
        assert not check_invariants(agent, None, "off")


class TestFitExponent:
    K = np.arange(1, 5001, dtype=float)

    @pytest.mark.parametrize("power", [0.5, 1.0])
    def test_power_laws(self, power):
        assert fit_regret_exponent(self.K**power, 0.5) == pytest.approx(power, abs=1e-6)

    def test_constant(self):
        assert fit_regret_exponent(np.full(5000, 3.0), 0.5) == pytest.approx(0.0, abs=1e-6)

    def test_degenerate(self):
        assert fit_regret_exponent(np.zeros(500)) is None

    def test_preconditions(self):
        with pytest.raises(ValueError):
            fit_regret_exponent(np.ones(99))
        with pytest.raises(ValueError):
            fit_regret_exponent(np.r_[np.zeros(150), np.ones(50)], window_fraction=0.5)

    def test_record_input(self):
        cum = self.K**0.5
        rec = RegretRecord(np.diff(cum, prepend=0.0), cum)
        assert fit_regret_exponent(rec) == pytest.approx(0.5, abs=1e-6)


class TestSweep:
    def test_product_and_determinism(self):
        mdp = random_mdp(3, 2, 3, seed=0)
        grid = [{"K": 50, "c_b": 0.5}]
        a = sweep([mdp], ["esa", "ucb-q"], grid, [0, 1, 2])
        b = sweep([mdp], ["esa", "ucb-q"], grid, [0, 1, 2])
        assert len(a) == 6 and all(r.error is None for r in a)
        assert [(r.algo, r.seed) for r in a] == [(al, s) for al in ("esa", "ucb-q") for s in (0, 1, 2)]
        assert all(x.record == y.record for x, y in zip(a, b))

    def test_parallel_matches_serial(self):
        specs = [GeneratorSpec("random", 3, 2, 3, seed=1), GeneratorSpec("chain", 4, 2, 4)]
        grid = [{"K": 60, "c_b": 0.3}, {"K": 60, "c_b": 1.0}]
        serial = sweep(specs, ["esa"], grid, [0, 1], workers=1)
        parallel = sweep(specs, ["esa"], grid, [0, 1], workers=2)
        assert [r.record for r in serial] == [r.record for r in parallel]

    def test_failures_are_isolated(self):
        good = random_mdp(3, 2, 3, seed=0)
        bad = TabularMDP(good.P * 0.9, good.r)
        res = sweep([good, bad], ["esa"], [{"K": 20}], [0, 1, 2])
        assert sum(r.record is not None for r in res) == 3
        errors = [r for r in res if r.error]
        assert len(errors) == 3 and all("row sum" in r.error for r in errors)

    def test_single_bad_cell(self):
        mdp = random_mdp(3, 2, 3, seed=0)
        res = sweep([mdp], ["esa", "ucb-vi"], [{"K": 20}], [0, 1, 2])
        assert sum(r.record is not None for r in res) == 3 and sum(r.error is not None for r in res) == 3

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            sweep([], ["esa"], [{"K": 1}], [0])

    def test_fraction_clean(self):
        recs = [RegretRecord(np.zeros(1), np.zeros(1), {"optimism": n}) for n in (0, 0, 3, 0)]
        assert fraction_clean(recs) == 0.75


class TestPersistence:
    def test_csv_round_trip(self, tmp_path):
        mdp = random_mdp(3, 2, 3, seed=0)
        rec = run_experiment(mdp, "esa", Hyperparams.for_mdp(mdp, K=120, c_b=0.2), seed=3)
        csv_path, json_path = rec.write(tmp_path)
        per, cum = read_regret_csv(csv_path)
        assert np.array_equal(per, rec.per_episode) and np.array_equal(cum, rec.cumulative)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "episode,episode_regret,cum_regret" and lines[1].startswith("0,")
        summary = json.loads(json_path.read_text())
        assert summary["final_cum_regret"] == rec.final_regret
        assert set(summary) >= {"config", "slope", "violations", "runtime_seconds"}

    def test_rejects_bad_header(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("k,regret\n0,1\n")
        with pytest.raises(ValueError):
            read_regret_csv(p)

    def test_greedy_oracle_policy_is_optimal(self):
        mdp = random_mdp(4, 3, 4, seed=12)
        opt = optimal_values(mdp)
        v = forward_policy_value(mdp, greedy_policy(opt.Q))
        np.testing.assert_allclose(v, opt.V[0], atol=1e-12)
