import json
import math

import numpy as np
import pytest

from mslik import io
from mslik.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, estimate_sigma_mad, main
from mslik.errors import InvalidArgument
from mslik.estimators import estimate_rp
from mslik.models import Poisson, loglik_direct, model_from_name


@pytest.fixture
def vec(tmp_path):
    def make(values, name="x.csv"):
        path = tmp_path / name
        io.write_vector(path, values)
        return str(path)

    return make


class TestSigmaMAD:
    def test_zero_noise(self):
        assert estimate_sigma_mad(np.full(8, 3.0)) == 0.0

    def test_pair(self):
        assert estimate_sigma_mad([0.0, 2.0]) == pytest.approx(math.sqrt(2) / 0.6745, abs=1e-4)
        assert estimate_sigma_mad([0.0, 2.0]) == pytest.approx(2.09674, abs=1e-4)

    def test_gaussian_noise(self):
        x = np.random.default_rng(5).normal(0, 1, 1024)
        assert 0.9 <= estimate_sigma_mad(x) <= 1.1

    @pytest.mark.parametrize("x", [[1.0], [1.0, 2.0, 3.0]])
    def test_invalid(self, x):
        with pytest.raises(InvalidArgument):
            estimate_sigma_mad(x)


class TestEstimate:
    def test_worked_example(self, vec, tmp_path):
        out, fitted = tmp_path / "out.json", tmp_path / "fit.csv"
        code = main(["estimate", "--model", "poisson", "--estimator", "rp", "--input", vec([0, 0, 8, 8]),
                     "--output", str(out), "--fitted", str(fitted)])
        assert code == EXIT_OK
        d = json.loads(out.read_text())
        assert [(c["start"], c["end"]) for c in d["partition"]] == [(0, 2), (2, 4)]
        want = estimate_rp(np.array([0.0, 0, 8, 8]), Poisson(), 1.5).objective
        assert abs(d["objective_nats"] - want) <= 1e-9
        np.testing.assert_array_equal(io.read_vector(fitted), [0, 0, 8, 8])

    @pytest.mark.parametrize("model,extra", [("poisson", []), ("gaussian", ["--sigma", "1.5"]), ("multinomial", [])])
    @pytest.mark.parametrize("estimator", ["threshold", "rdp", "rp"])
    def test_objective_from_files(self, vec, tmp_path, model, extra, estimator):
        rng = np.random.default_rng(3)
        x = rng.poisson(3, 16).astype(float)
        out, fitted = tmp_path / "o.json", tmp_path / "f.csv"
        code = main(["estimate", "--model", model, "--estimator", estimator, "--input", vec(x),
                     "--output", str(out), "--fitted", str(fitted), *extra])
        assert code == EXIT_OK
        d = json.loads(out.read_text())
        m = model_from_name(model, sigma=1.5 if extra else None, n_total=int(x.sum()))
        theta = io.read_vector(fitted)
        recomputed = -loglik_direct(x, theta, m) + 2 * d["lambda"] * len(d["kept"])
        assert abs(recomputed - d["objective_nats"]) <= 1e-9 * (1 + abs(recomputed))

    def test_byte_identical_reruns(self, vec, tmp_path):
        x = vec(np.random.default_rng(1).normal(0, 1, 32))
        outs = []
        for i in range(2):
            p = tmp_path / f"r{i}.json"
            assert main(["estimate", "--model", "gaussian", "--input", x, "--output", str(p)]) == EXIT_OK
            outs.append(p.read_bytes())
        assert outs[0] == outs[1]

    def test_non_dyadic_threshold(self, vec):
        assert main(["estimate", "--estimator", "threshold", "--input", vec([1, 2, 3, 4, 5])]) == EXIT_CONFIG

    def test_zero_mad(self, vec):
        assert main(["estimate", "--model", "gaussian", "--input", vec([1, 1, 1, 1])]) == EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        assert main(["estimate", "--input", str(tmp_path / "nope.csv")]) == EXIT_IO

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("x\n1\n2\n")
        assert main(["estimate", "--input", str(p)]) == EXIT_CONFIG

    def test_negative_counts(self, vec):
        assert main(["estimate", "--input", vec([1, -1])]) == EXIT_CONFIG

    def test_bad_gamma(self, vec):
        assert main(["estimate", "--gamma", "-1", "--input", vec([1, 2])]) == EXIT_CONFIG

    def test_low_gamma_warns(self, vec, caplog):
        assert main(["estimate", "--gamma", "0.5", "--input", vec([1, 2])]) == EXIT_OK
        assert any("below 3/2" in r.getMessage() for r in caplog.records)


class TestSimulate:
    @pytest.mark.parametrize("model", ["poisson", "gaussian", "multinomial"])
    def test_reproducible(self, tmp_path, model):
        files = []
        for i in range(2):
            p = tmp_path / f"s{i}.csv"
            args = ["simulate", "--model", model, "--n", "64", "--seed", "9", "--output", str(p)]
            if model == "gaussian":
                args += ["--sigma", "1"]
            assert main(args) == EXIT_OK
            files.append(p.read_bytes())
        assert files[0] == files[1]
        x = io.read_vector(tmp_path / "s0.csv")
        assert x.size == 64
        if model == "multinomial":
            assert x.sum() == 64

    def test_theta_output(self, tmp_path):
        th = tmp_path / "theta.csv"
        assert main(["simulate", "--n", "8", "--output", str(tmp_path / "x.csv"), "--theta-output", str(th)]) == EXIT_OK
        assert io.read_vector(th).size == 8

    def test_requires_n(self, tmp_path):
        assert main(["simulate", "--output", str(tmp_path / "x.csv")]) == EXIT_CONFIG

    def test_unknown_signal(self, tmp_path):
        assert main(["simulate", "--n", "8", "--signal", "zigzag", "--output", str(tmp_path / "x.csv")]) == EXIT_CONFIG

    def test_signal_json(self, tmp_path):
        spec = tmp_path / "sig.json"
        spec.write_text(json.dumps({"kind": "blocks", "breakpoints": [0.5], "levels": [1, 3]}))
        assert main(["simulate", "--n", "8", "--signal", str(spec), "--output", str(tmp_path / "x.csv")]) == EXIT_OK


class TestDecompose:
    def test_dyadic(self, vec, tmp_path):
        out = tmp_path / "d.json"
        assert main(["decompose", "--input", vec([1, 1, 2, 2]), "--output", str(out)]) == EXIT_OK
        d = json.loads(out.read_text())
        assert d["tree"] == "dyadic"

    def test_balanced_for_odd_length(self, vec, tmp_path):
        out = tmp_path / "d.json"
        assert main(["decompose", "--input", vec([1, 2, 3]), "--output", str(out)]) == EXIT_OK
        assert json.loads(out.read_text())["tree"] == "balanced"

    def test_dyadic_needs_power_of_two(self, vec):
        assert main(["decompose", "--tree", "dyadic", "--input", vec([1, 2, 3])]) == EXIT_CONFIG


class TestRiskSweep:
    def test_outputs(self, tmp_path):
        out, summ = tmp_path / "r.csv", tmp_path / "s.json"
        code = main(["risk-sweep", "--estimator", "threshold", "--n-list", "16,32,64", "--reps", "4",
                     "--output", str(out), "--summary", str(summ)])
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "n,risk,stderr,reps" and len(lines) == 4
        s = json.loads(summ.read_text())
        assert {"slope", "slope_se", "strictly_decreasing", "metric"} <= set(s)

    def test_missing_n_list(self):
        assert main(["risk-sweep", "--reps", "4"]) == EXIT_CONFIG

    def test_non_dyadic_grid(self):
        assert main(["risk-sweep", "--estimator", "rdp", "--n-list", "12,24", "--reps", "4"]) == EXIT_CONFIG


class TestVerify:
    @pytest.mark.parametrize("suite", ["factorization", "roundtrip", "kraft", "nesting"])
    def test_suites_pass(self, suite, tmp_path):
        out = tmp_path / "v.json"
        assert main(["verify", "--suite", suite, "--output", str(out)]) == EXIT_OK
        assert json.loads(out.read_text())["pass"] is True

    def test_kraft_below_theory_fails(self, tmp_path):
        out = tmp_path / "v.json"
        code = main(["verify", "--suite", "kraft", "--n", "4", "--gamma", "0", "--output", str(out)])
        d = json.loads(out.read_text())
        assert d["exceeds_one"] is True
        assert code == EXIT_OK  # gamma = 0 is outside the regime the bound covers

    def test_requires_suite(self):
        assert main(["verify"]) == EXIT_CONFIG
