import json

import pytest

from pclda_plots.schema import (SchemaError, read_metrics, read_metrics_csv,
                                read_topic_checkpoint)

GOOD_CSV = """method,lambda,K,map_mode,split,data_nll_per_token,label_nll_per_doc,auc_mean,auc_signal
pc_slda,100,4,train,train,1.52,0.01,0.99,0.99
pc_slda,100,4,predict,train,1.66,0.02,0.98,0.98
"""


def test_parses_typed_rows(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text(GOOD_CSV)
    rows = read_metrics_csv(path)
    assert len(rows) == 2
    assert rows[0]["lambda"] == 100.0
    assert rows[0]["K"] == 4
    assert rows[1]["data_nll_per_token"] == 1.66


def test_missing_column_named(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("method,lambda,K,map_mode,split,data_nll_per_token\n")
    with pytest.raises(SchemaError, match="missing column: label_nll_per_doc"):
        read_metrics_csv(path)


def test_empty_body_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text(GOOD_CSV.splitlines()[0] + "\n")
    with pytest.raises(SchemaError, match="no rows"):
        read_metrics_csv(path)


def test_bad_numeric_field_reports_line(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text(GOOD_CSV.replace("1.66", "not-a-number"))
    with pytest.raises(SchemaError, match="line 3"):
        read_metrics_csv(path)


def test_bad_map_mode_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text(GOOD_CSV.replace("predict", "sideways"))
    with pytest.raises(SchemaError, match="map_mode"):
        read_metrics_csv(path)


def test_json_mirror(tmp_path):
    path = tmp_path / "m.json"
    rows = [{"method": "pc", "lambda": 10.0, "K": 4, "map_mode": "predict",
             "split": "train", "data_nll_per_token": 1.5,
             "label_nll_per_doc": 0.2}]
    path.write_text(json.dumps(rows))
    parsed = read_metrics(path)
    assert parsed[0]["K"] == 4


def test_json_missing_column(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps([{"method": "pc"}]))
    with pytest.raises(SchemaError, match="missing column"):
        read_metrics(path)


def test_checkpoint_reader(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"K": 2, "V": 4,
                                "phi": [0.25] * 8, "eta": [0, 0]}))
    phi, K, V = read_topic_checkpoint(path)
    assert (K, V) == (2, 4)
    assert len(phi) == 8


def test_checkpoint_shape_mismatch(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"K": 2, "V": 4, "phi": [0.25] * 7}))
    with pytest.raises(SchemaError, match="expected K\\*V"):
        read_topic_checkpoint(path)
