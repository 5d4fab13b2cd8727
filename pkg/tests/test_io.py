import json

import pytest

from sirsq.core import EpidemicParams
from sirsq.io import (
    CompareConfig,
    MissingColumnError,
    NonContiguousDatesError,
    NonNumericValueError,
    ParseError,
    RunConfig,
    ValidationError,
    config_from_dict,
    ingest_case_csv,
    load_config,
    read_sim_series,
    write_config,
)
from sirsq.network import WsConfig

BASE_DOC = {
    "experiment": "population",
    "params": {
        "beta": 0.001,
        "gamma": 0.7,
        "alpha": 0.8,
        "lambda_in": 3.0,
        "revive_frac": 0.995,
        "protect_intensity": 0.0,
    },
    "seeds": [1, 2, 3],
    "mean_degree": 5.0,
    "t_end": 4000.0,
    "window": [3000.0, 4000.0],
}


class TestLoadConfig:
    def test_paper_base_config(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(BASE_DOC))
        cfg = load_config(path)
        assert cfg.params.lambda_in == 3.0
        assert cfg.params.beta == 0.001
        assert cfg.params.gamma == 0.7
        assert cfg.params.alpha == 0.8
        assert cfg.params.revive_frac == 0.995
        assert cfg.mean_degree == 5.0
        assert cfg.t_end == 4000.0
        assert cfg.window == (3000.0, 4000.0)

    def test_missing_seeds(self):
        doc = {k: v for k, v in BASE_DOC.items() if k != "seeds"}
        with pytest.raises(ValidationError) as exc:
            config_from_dict(doc)
        assert exc.value.field == "seeds"

    def test_negative_t_end(self):
        doc = dict(BASE_DOC, t_end=-1.0, window=None)
        with pytest.raises(ValidationError) as exc:
            config_from_dict(doc)
        assert exc.value.field in ("t_end", "window")

    def test_unknown_top_level_key(self):
        with pytest.raises(ParseError):
            config_from_dict(dict(BASE_DOC, bogus=1))

    def test_unknown_params_key(self):
        doc = dict(BASE_DOC, params=dict(BASE_DOC["params"], extra=2))
        with pytest.raises(ParseError):
            config_from_dict(doc)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            load_config(path)

    def test_out_of_range_param(self):
        doc = dict(BASE_DOC, params=dict(BASE_DOC["params"], beta=1.5))
        with pytest.raises(ValidationError) as exc:
            config_from_dict(doc)
        assert "beta" in exc.value.field

    def test_window_outside_horizon(self):
        with pytest.raises(ValidationError):
            config_from_dict(dict(BASE_DOC, window=[3000.0, 5000.0]))

    def test_experiment_requirements(self):
        doc = dict(BASE_DOC, experiment="individual")
        with pytest.raises(ValidationError) as exc:
            config_from_dict(doc)
        assert exc.value.field == "ws"


class TestRoundTrip:
    def test_population_round_trip(self, tmp_path):
        cfg = config_from_dict(BASE_DOC)
        path = tmp_path / "cfg.json"
        write_config(cfg, path)
        assert load_config(path) == cfg

    def test_full_round_trip(self, tmp_path):
        cfg = RunConfig(
            experiment="network-evolve",
            params=EpidemicParams(beta=0.001, gamma=0.7, alpha=0.8,
                                  lambda_in=3.0, revive_frac=0.995),
            seeds=(7, 8),
            ws=WsConfig(n0=1000, k_init=4, rewire_prob=0.7),
            k_init_sweep=(2, 4, 8),
            m_arrival=4,
            t_end=4000.0,
            window=(3000.0, 4000.0),
            initial=(140, 857, 750),
            output_dir="somewhere",
            workers=2,
        )
        path = tmp_path / "cfg.json"
        write_config(cfg, path)
        assert load_config(path) == cfg

    def test_compare_round_trip(self, tmp_path):
        cfg = RunConfig(
            experiment="compare",
            params=EpidemicParams(beta=0.0, gamma=0.0, alpha=0.0),
            seeds=(0,),
            compare=CompareConfig(sim_csv="a.csv", obs_csv="b.csv", shift=3),
        )
        path = tmp_path / "cfg.json"
        write_config(cfg, path)
        assert load_config(path) == cfg


def write_case_csv(path, rows, header="date,cases"):
    path.write_text("\n".join([header] + rows) + "\n")


class TestIngestCaseCsv:
    def test_contiguous_daily_series(self, tmp_path):
        path = tmp_path / "cases.csv"
        rows = [f"2021-08-{d:02d},{d * 2}" for d in range(6, 29)]
        write_case_csv(path, rows)
        cs = ingest_case_csv(path, "date", "cases")
        assert len(cs) == 23
        assert cs.t0_label == "2021-08-06"
        assert cs.values[0] == 12.0

    def test_duplicate_date_rejected(self, tmp_path):
        path = tmp_path / "cases.csv"
        write_case_csv(path, ["2021-08-06,1", "2021-08-06,2", "2021-08-07,3"])
        with pytest.raises(NonContiguousDatesError):
            ingest_case_csv(path, "date", "cases")

    def test_gap_rejected(self, tmp_path):
        path = tmp_path / "cases.csv"
        write_case_csv(path, ["2021-08-06,1", "2021-08-08,2"])
        with pytest.raises(NonContiguousDatesError):
            ingest_case_csv(path, "date", "cases")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "cases.csv"
        path.write_text("")
        with pytest.raises(MissingColumnError):
            ingest_case_csv(path, "date", "cases")

    def test_missing_column(self, tmp_path):
        path = tmp_path / "cases.csv"
        write_case_csv(path, ["2021-08-06,1"], header="date,confirmed")
        with pytest.raises(MissingColumnError):
            ingest_case_csv(path, "date", "cases")

    def test_non_numeric_value(self, tmp_path):
        path = tmp_path / "cases.csv"
        write_case_csv(path, ["2021-08-06,1", "2021-08-07,oops"])
        with pytest.raises(NonNumericValueError) as exc:
            ingest_case_csv(path, "date", "cases")
        assert exc.value.row == 3


class TestReadSimSeries:
    def test_reads_component_column(self, tmp_path):
        path = tmp_path / "traj.csv"
        path.write_text("t,s,i,r\n0.0,5,3,1\n1.0,4,4,1\n2.0,4,3,2\n")
        cs = read_sim_series(path, "i")
        assert cs.values.tolist() == [3.0, 4.0, 3.0]

    def test_missing_column(self, tmp_path):
        path = tmp_path / "traj.csv"
        path.write_text("t,x\n0,1\n1,2\n")
        with pytest.raises(MissingColumnError):
            read_sim_series(path, "i")
