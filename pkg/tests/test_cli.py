import io
import json

import pytest

from asdkit import cli, zoo
from asdkit.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, UsageError, main, parse_config, read_config, run


def invoke(argv):
    buf = io.StringIO()
    code = run(parse_config(argv), buf)
    return code, buf.getvalue()


def records(text):
    return [json.loads(s) for s in text.splitlines() if s.strip()]


class TestExitCodes:
    def test_ppwave_passes(self):
        code, out = invoke(["verify", "--entry", "ppwave", "--Q", "x^2+y^2", "--samples", "50"])
        assert code == EXIT_PASS
        assert all(r["verdict"] == "pass" for r in records(out))

    def test_heavenly_curved_potential_passes(self):
        code, _ = invoke(["verify", "--entry", "heavenly1", "--Omega", "w*x+z*y+x^3", "--samples", "20"])
        assert code == EXIT_PASS

    def test_heavenly_non_solution_fails(self):
        code, out = invoke(["verify", "--entry", "heavenly1", "--Omega", "w*x+z*y+x^3*w", "--samples", "20"])
        assert code == EXIT_FAIL
        assert any(r["verdict"] == "fail" for r in records(out))

    def test_cp2_fails_parity(self, capsys):
        assert main(["topology", "--manifold", "CP2"]) == EXIT_FAIL
        assert "fails Atiyah parity" in capsys.readouterr().out

    def test_unknown_entry_is_usage_error(self, capsys):
        assert main(["verify", "--entry", "no_such_entry"]) == EXIT_USAGE
        assert "asdkit:" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [[], ["verify"], ["topology", "--manifold", "RP4"],
                                      ["lift", "--ew", "flat", "--stray", "1"],
                                      ["verify", "--entry", "g0", "--box", "1,0;0,1;0,1;0,1"]])
    def test_usage_errors(self, argv, capsys):
        assert main(argv) == EXIT_USAGE

    def test_bad_expression_is_usage_error(self, capsys):
        assert main(["verify", "--entry", "ppwave", "--Q", "x^^2"]) == EXIT_USAGE


class TestDeterminism:
    @pytest.mark.parametrize("argv", [
        ["verify", "--entry", "g0", "--samples", "8", "--seed", "3"],
        ["xray", "--random", "3", "--seed", "5"],
    ])
    def test_same_seed_same_bytes(self, argv):
        assert invoke(argv) == invoke(argv)

    def test_seed_changes_samples(self):
        a = records(invoke(["petrov", "--entry", "g0", "--samples", "2", "--seed", "1"])[1])
        b = records(invoke(["petrov", "--entry", "g0", "--samples", "2", "--seed", "2"])[1])
        assert a[0]["point"] != b[0]["point"]


class TestConfig:
    def test_read_pairs_and_comments(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("# header\nsubcommand = topology\nmanifold = K3  # inline\n\nradius=6\n")
        assert read_config(p) == [("subcommand", "topology"), ("manifold", "K3"), ("radius", "6")]

    def test_config_drives_run(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("subcommand = topology\nmanifold = K3\nradius = 6\nformat = json\n")
        code, out = invoke(["--config", str(p)])
        assert code == EXIT_PASS
        assert records(out)[0]["radius"] == 6

    def test_flags_win(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("manifold = K3\nradius = 6\nformat = json\n")
        cfg = parse_config(["--config", str(p), "topology", "--radius", "2"])
        assert cfg.options["radius"] == 2 and cfg.options["manifold"] == "K3"

    def test_malformed_line(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("radius 6\n")
        with pytest.raises(UsageError):
            read_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError):
            read_config(tmp_path / "absent.cfg")

    def test_no_subcommand_anywhere(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("radius = 2\n")
        with pytest.raises(UsageError):
            parse_config(["--config", str(p)])


class TestSubcommands:
    def test_zoo_list_is_the_registry(self):
        code, out = invoke(["zoo", "list"])
        assert code == EXIT_PASS
        assert [r["entry"] for r in records(out)] == list(zoo.entry_names())

    def test_zoo_eval(self):
        code, out = invoke(["zoo", "eval", "--entry", "g0", "--point", "0.1,0.2,0.3,0.4"])
        (r,) = records(out)
        assert code == EXIT_PASS and r["sdWeylRatio"] <= 1e-8
        assert r["point"] == [0.1, 0.2, 0.3, 0.4]

    def test_xray_csv(self):
        code, out = invoke(["xray", "--random", "4", "--seed", "1"])
        rows = out.splitlines()
        assert code == EXIT_PASS
        assert rows[0] == "x,y,w,z,psi,residual" and len(rows) == 5
        assert all(abs(float(r.split(",")[-1])) < 1e-4 for r in rows[1:])

    def test_xray_lines_file(self, tmp_path):
        p = tmp_path / "lines.csv"
        p.write_text("x,y,w,z\n0,0,0,0\n")
        code, out = invoke(["xray", "--lines", str(p)])
        assert code == EXIT_PASS and len(out.splitlines()) == 2

    def test_petrov_with_rotations(self):
        code, out = invoke(["petrov", "--entry", "ppwave", "--Q", "x^2-y^2+x*y^3", "--samples", "3",
                            "--rotations", "2"])
        rs = records(out)
        assert code == EXIT_PASS
        assert rs[-1]["types"] == ["N"]
        assert all(len(r["rotated"]) == 2 for r in rs[:-1])

    def test_reduce_null_killing_field(self):
        code, out = invoke(["reduce", "--entry", "ppwave", "--Q", "x^2+y^2", "--samples", "5"])
        (r,) = records(out)
        assert code == EXIT_FAIL and r["error"] == "null Killing field"

    def test_lift_toda(self):
        code, out = invoke(["lift", "--ew", "toda", "--samples", "5"])
        names = [r["name"] for r in records(out)]
        assert code == EXIT_PASS
        assert "toda_lift:ASD" in names and "toda:monopole" in names

    def test_solve_monopole_flat_with_csv(self, tmp_path):
        p = tmp_path / "v.csv"
        code, out = invoke(["solve-monopole", "--ew", "flat", "--n", "9", "--csv", str(p)])
        (r,) = records(out)
        assert code == EXIT_PASS and r["maxError"] < 1e-8
        assert len(p.read_text().splitlines()) >= 9 ** 3

    def test_output_file(self, tmp_path):
        p = tmp_path / "out.jsonl"
        assert main(["topology", "--manifold", "K3", "--format", "json", "--output", str(p)]) == EXIT_PASS
        assert records(p.read_text())[1]["check"] == "atiyah"

    def test_every_subcommand_is_wired(self):
        assert set(cli.COMMANDS) == {"verify", "lax", "reduce", "lift", "solve-monopole", "xray", "petrov",
                                     "topology", "zoo"}

    def test_lax_agrees_with_asd(self):
        code, out = invoke(["lax", "--entry", "heavenly1", "--Omega", "w*x+z*y+x^2*z^3", "--samples", "5",
                            "--lambdas", "0.5,-2,3"])
        agree = [r for r in records(out) if r["name"].endswith("lax_vs_asd")]
        assert code == EXIT_PASS and agree[0]["lax"] == agree[0]["asd"] == "pass"

    def test_too_few_lambdas(self):
        assert main(["lax", "--entry", "g0", "--lambdas", "1,2"]) == EXIT_USAGE
