import json

import pytest

from rankcf import exc
from rankcf.cli import main
from rankcf.cli import make_parser
from rankcf.dataset import write_csv


@pytest.fixture()
def csv_path(sample, tmp_path):
    path = tmp_path / "sample.csv"
    write_csv(sample.dataset, path)
    return str(path)


@pytest.fixture()
def run(csv_path, tmp_path):
    out = tmp_path / "out.json"

    def run(command, *args):
        argv = [command, "--data", csv_path, "--exogenous", "z", "--out", str(out)]
        status = main([*argv, *args])
        document = json.loads(out.read_text()) if status == 0 else None
        return status, document

    return run


def test_fit(run):
    status, report = run("fit", "--first-stage", "ols", "--boot", "0")
    assert status == 0
    assert [c["name"] for c in report["coefficients"]] == ["const", "z", "d", "rho"]
    assert report["covariance"] is None
    assert report["converged"]


def test_fit_bootstrap(run):
    status, report = run(
        "fit", "--first-stage", "ols", "--boot", "20", "--seed", "1", "--asf"
    )
    assert status == 0
    assert report["covariance"]["b_used"] + report["covariance"]["b_failed"] == 20
    assert all(c["se"] > 0 for c in report["coefficients"])
    assert 0 < report["asf"]["value"] < 1
    assert report["asf"]["se"] > 0


def test_fit_bootstrap_deterministic(run):
    args = ("fit", "--first-stage", "ols", "--boot", "10", "--seed", "4")
    _, a = run(*args)
    _, b = run(*args, "--threads", "2")
    assert a == b


def test_fit_without_control(run):
    status, report = run("fit", "--control", "none", "--boot", "0")
    assert status == 0
    assert [c["name"] for c in report["coefficients"]] == ["const", "z", "d"]


def test_asf(run):
    status, document = run("asf", "--first-stage", "ols", "--boot", "10", "--at", "0,1")
    assert status == 0
    assert document["x"] == [1.0, 0.0, 1.0]
    assert document["link"] == "probit"
    assert document["se"] > 0


def test_asf_semiparametric(run):
    status, document = run(
        "asf", "--first-stage", "ols", "--link", "np", "--boot", "5", "--at", "0,1"
    )
    assert status == 0
    assert document["link"] == "np"
    assert 0 < document["value"] < 1


def test_asf_negative_point(run):
    status, document = run("asf", "--first-stage", "ols", "--boot", "0", "--at", "-1,0")
    assert status == 0
    assert document["x"] == [1.0, -1.0, 0.0]


def test_asf_wrong_point(run):
    status, _ = run("asf", "--boot", "0", "--at", "0")
    assert status == 4


def test_profile(run):
    status, document = run(
        "profile-lambda", "--first-stage", "ols", "--grid", "-0.2,0,0.2"
    )
    assert status == 0
    assert [p["lambda"] for p in document["profile"]] == [-0.2, 0.0, 0.2]
    assert document["argmax"] in (-0.2, 0.0, 0.2)


@pytest.mark.parametrize(
    ("args", "status"),
    [
        (["--control", "skew:5"], 4),
        (["--link", "cauchy"], 4),
        (["--boot", "-1"], 4),
        (["--endogenous", "x"], 2),
        (["--link", "logit", "--asf", "--boot", "0"], 4),
    ],
)
def test_fit_errors(run, args, status, capsys):
    assert run("fit", *args)[0] == status
    assert "rankcf: error:" in capsys.readouterr().err


def test_profile_grid_outside_domain(run, capsys):
    status, _ = run("profile-lambda", "--first-stage", "ols", "--grid", "-0.5,1.5")
    assert status == 4
    assert "rankcf: error:" in capsys.readouterr().err


def test_too_few_rows(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("y,z,d\n0,1,1\n1,2,2\n")
    argv = ["fit", "--data", str(path), "--exogenous", "z", "--first-stage", "ols"]
    assert main([*argv, "--boot", "0"]) == 2


def test_missing_file(tmp_path, capsys):
    missing = str(tmp_path / "missing.csv")
    assert main(["fit", "--data", missing]) == 2
    assert "missing.csv" in capsys.readouterr().err


def test_unknown_command():
    assert main(["estimate"]) == 4


def test_mc(tmp_path, capsys):
    config = tmp_path / "experiment.json"
    config.write_text(
        json.dumps(
            {
                "dgp": {"n": 150},
                "replications": 1,
                "estimators": ["ML"],
                "asf_draws": 1000,
            }
        )
    )
    assert main(["mc", "--config", str(config), "--seed", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "estimator,parameter,truth,mean,std,rmse,size,failures"
    assert len(lines) == 5


def test_mc_json(tmp_path):
    config = tmp_path / "experiment.json"
    config.write_text('{"dgp": {"n": 150}, "replications": 1, "estimators": ["ML"]}')
    out = tmp_path / "table.json"
    assert main(["mc", "--config", str(config), "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["config"]["replications"] == 1


@pytest.mark.parametrize("content", ["[1, 2]", "{bad", '{"reps": 3}'])
def test_mc_invalid_config(tmp_path, content):
    config = tmp_path / "experiment.json"
    config.write_text(content)
    assert main(["mc", "--config", str(config)]) == 4


def test_parser_defaults():
    args = make_parser().parse_args(["fit", "--data", "x.csv"])
    assert args.endogenous == ["d"]
    assert args.first_stage == "local-linear"
    assert args.link == "probit"
    assert args.trim == (0.01, 0.99)


def test_exit_codes():
    errors = [
        value
        for value in vars(exc).values()
        if isinstance(value, type)
        and issubclass(value, exc.RankCFError)
        and value is not exc.RankCFError
    ]
    assert {error.exit_code for error in errors} == {2, 3, 4}
