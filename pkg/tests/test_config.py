import pytest

from lrlab.config import ExperimentConfig, load_config, log_grid, parse_config
from lrlab.errors import ConfigError


def test_three_point_grid():
    cfg = parse_config("plr_grid = 1e-4,1e-3,1e-2")
    assert cfg.plr_grid == [1e-4, 1e-3, 1e-2]


def test_defaults_match_protocol_constants():
    cfg = parse_config("plr_grid = 0.1")
    assert (cfg.pretrain_steps, cfg.finetune_steps, cfg.batch_size) == (40000, 20000, 32)
    assert cfg.swa_n == 5 and cfg.alpha_grid == 25 and cfg.hidden_dim == 32 and cfg.radius == 1.0
    assert cfg.thresholds.converged_loss == 1e-3 and cfg.thresholds.barrier == 0.05


def test_missing_grid_names_key():
    with pytest.raises(ConfigError, match="plr_grid"):
        parse_config("flr_list = 1e-4")


def test_errors_name_the_line():
    with pytest.raises(ConfigError, match="line 2.*unknown key"):
        parse_config("plr_grid = 1\nbogus = 3")
    with pytest.raises(ConfigError, match="line 2.*batch_size"):
        parse_config("plr_grid = 1\nbatch_size = many")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("plr_grid 1")
    with pytest.raises(ConfigError, match="line 3.*learning rates"):
        parse_config("# comment\n\nplr_grid = 1, -2\n")
    with pytest.raises(ConfigError, match="line 2.*pretrain_steps"):
        parse_config("plr_grid = 1\npretrain_steps = 0")


def test_comments_lists_and_overrides(tmp_path):
    text = "plr_grid = 1e-3, 1e-2  # two points\ndata_seeds = 0,1,2\ninit_seeds=3,4\n"
    p = tmp_path / "c.cfg"
    p.write_text(text)
    cfg = load_config(p, {"batch_size": "16", "workers": 2, "output_dir": None})
    assert cfg.data_seeds == [0, 1, 2] and cfg.batch_size == 16 and cfg.workers == 2
    assert cfg.seed_triples[:2] == [(0, 3, 3), (0, 4, 4)] and len(cfg.seed_triples) == 6
    with pytest.raises(ConfigError):
        parse_config(text, {"nope": 1})


def test_to_text_round_trip():
    cfg = parse_config("plr_grid = 0.001,0.01\nbatch_seeds = 7\ninit_seeds = 1\nlabel_noise = 0.1")
    again = parse_config(cfg.to_text())
    assert again == cfg


def test_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(plr_grid=[])
    with pytest.raises(ConfigError):
        ExperimentConfig(plr_grid=[1.0], dataset="mnist")
    with pytest.raises(ConfigError):
        ExperimentConfig(plr_grid=[1.0], init_seeds=[0, 1], batch_seeds=[0])
    with pytest.raises(ConfigError):
        ExperimentConfig(plr_grid=[1.0], label_noise=0.5)


def test_budget_scale():
    cfg = parse_config("plr_grid = 1\nbudget_scale = 0.25")
    assert cfg.scaled_pretrain_steps == 10000 and cfg.scaled_finetune_steps == 5000


def test_log_grid():
    g = log_grid(-6, 0, 4)
    assert len(g) == 25 and g[0] == pytest.approx(1e-6) and g[-1] == 1.0
    assert g[4] == pytest.approx(1e-5)
