import json
import math

import pytest

import robustkd


def test_losses():
    assert robustkd.sq_distill_loss([1, 0, 0], [0, 1, 0]) == pytest.approx(2.0, abs=1e-12)
    assert robustkd.sq_distill_loss([0.7, 0.2, 0.1], [0.5, 0.3, 0.2]) == pytest.approx(0.06, abs=1e-12)
    assert robustkd.cross_entropy([1 / 3] * 3, 1) == pytest.approx(math.log(3), abs=1e-12)
    assert robustkd.ensemble_target([[0.6, 0.3, 0.1], [0.3, 0.6, 0.1], [0.3, 0.3, 0.4]]) == pytest.approx(
        [0.4, 0.4, 0.2], abs=1e-12
    )


def test_smoothing_matches_power_rule():
    q = [0.5, 0.3, 0.2]
    powered = [v**0.9 for v in q]
    expected = [v / sum(powered) for v in powered]
    assert robustkd.smooth_teacher(q) == pytest.approx(expected, abs=1e-12)


def test_gate():
    assert robustkd.gate(0, [0.1, 0.1, 0.8], [0.6, 0.3, 0.1]) == (True, "teacher_correct")
    assert robustkd.gate(0, [0.4, 0.3, 0.3], [0.3, 0.5, 0.2])[0] is False


def test_bad_distribution_raises():
    with pytest.raises(ValueError):
        robustkd.sq_distill_loss([0.5, 0.6, 0.2], [1 / 3] * 3)


def test_bootstrap():
    ids = [str(i) for i in range(50)]
    same = [i % 3 == 0 for i in range(50)]
    assert robustkd.bootstrap_pvalue(ids, same, same, resamples=200)["p_value"] == 1.0
    better = robustkd.bootstrap_pvalue(ids, [True] * 50, [False] * 50, resamples=200)
    assert better["mean_diff"] == 1.0
    assert better["p_value"] < 0.01
    assert robustkd.format_p_value(0.00001) == "<0.0001"


def test_prompts_and_manifest():
    assert robustkd.premise_prompt("travel") == "Example extract from a travel guide:"
    assert robustkd.filter_premise("Hi.") is None
    assert robustkd.filter_premise("Ok. The museum opens at nine.") == "The museum opens at nine."
    assert robustkd.build_manifest(["a", "b", "c"], ["b"], 3) == ["a", "b", "c", "b", "b"]


def test_cli_round_trip(tmp_path):
    out = tmp_path / "dta"
    assert robustkd.run_cli(["gen-dta", "--mock-llm", "--n", "9", "--seed", "4", "--out-dir", str(out)]) == 0
    rows = [json.loads(line) for line in (out / "dta.jsonl").read_text().splitlines()]
    assert len(rows) == 9
    assert robustkd.run_cli(["no-such-command"]) == 1
