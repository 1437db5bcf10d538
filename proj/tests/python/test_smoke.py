import json
import math

import pytest

import hlvest


def test_metrics_match_closed_forms():
    assert hlvest.kl([1, 0, 0], [1 / 3, 1 / 3, 1 / 3]) == pytest.approx(math.log(3), abs=1e-12)
    assert hlvest.jsd([1, 0, 0], [0, 0, 1]) == pytest.approx(1.0, abs=1e-12)
    assert hlvest.tvd([1, 0, 0], [0, 1, 0]) == pytest.approx(1.0)
    p, q = [0.5, 0.3, 0.2], [0.2, 0.2, 0.6]
    assert hlvest.soft_cross_entropy(p, q) == pytest.approx(hlvest.entropy(p) + hlvest.kl(p, q), abs=1e-9)
    x = [[0.1, 0.2, 0.7], [0.5, 0.4, 0.1], [0.3, 0.3, 0.4], [0.9, 0.05, 0.05]]
    assert hlvest.distance_correlation(x, x) == pytest.approx(1.0, abs=1e-12)


def test_score_transforms():
    probs = hlvest.normalize_scores([5.906385898590088, 6.259021282196045, 43.25299835205078])
    assert probs == pytest.approx([0.106578055463, 0.1129412010, 0.78048074346], abs=5e-5)
    e = math.e
    assert hlvest.softmax_scores([20, 0, 0], 20)[0] == pytest.approx(e / (e + 2), abs=1e-12)
    assert hlvest.option_mappings()[0] == "ENC"


def test_geometry():
    assert hlvest.ternary_coords([0, 0, 1]) == pytest.approx((0.5, math.sqrt(3) / 2))
    zoomed, clipped = hlvest.zoom([0.4, 0.35, 0.25], 3.3)
    assert not clipped
    assert zoomed == pytest.approx([0.55333, 0.38833, 0.05833], abs=1e-5)


def test_library_errors_become_python_errors():
    with pytest.raises(hlvest.HlvError):
        hlvest.tvd([0.5, 0.5, 0.5], [1, 0, 0])
    with pytest.raises(ValueError):
        hlvest.check_finetune_metrics('{"source_digest": "x"}')


def test_export_and_finetune_metrics_round_trip(tmp_path):
    data = tmp_path / "data.jsonl"
    data.write_text(
        "".join(
            json.dumps({"id": f"i{k}", "premise": f"p{k}", "hypothesis": f"h{k}", "distribution": [0.5, 0.3, 0.2]})
            + "\n"
            for k in range(3)
        )
    )
    out = tmp_path / "train.jsonl"
    code, _, err = hlvest.run(["export-softlabels", "--labels", str(data), "--items", str(data), "--out", str(out)])
    assert code == 0, err
    records = hlvest.read_softlabels(out)
    assert [r["soft_label"] for r in records] == [[0.5, 0.3, 0.2]] * 3

    metrics = {
        "source_digest": records[0]["source_digest"],
        "training_file_digest": "abc",
        "config_digest": "def",
        "selected_epoch": 1,
        "splits": {"dev": {"accuracy": 0.7, "weighted_f1": 0.69, "macro_f1": 0.6, "kl": 0.1, "ce_loss": 0.9}},
    }
    path = tmp_path / "metrics.json"
    hlvest.write_finetune_metrics(path, metrics)
    assert json.loads(path.read_text())["splits"]["dev"]["weighted_f1"] == 0.69


def test_cli_exit_codes():
    assert hlvest.run(["--version"])[0] == 0
    assert hlvest.run(["no-such-command"])[0] == 1
