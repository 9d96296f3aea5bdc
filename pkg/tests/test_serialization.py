import io
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigsas_rc import serialization as ser
from sigsas_rc.jl import sample_jl
from sigsas_rc.random_sas import build_direct
from sigsas_rc.readout import Readout
from sigsas_rc.volterra import VolterraKernelSet, eval_series, fir_quadratic

GOLDEN = Path(__file__).parent / "golden"


def roundtrip_text(tmp_path, name, writer):
    out = tmp_path / name
    writer(out)
    return out.read_text()


def test_golden_reservoir(tmp_path):
    res = ser.reservoir_from_dict(ser.read_json(GOLDEN / "reservoir.json"))
    assert (res.k, res.p, res.l, res.sign, res.seed) == (2, 1, 1, -1, 7)
    assert res.A[1, 1, 0] == -1.5
    text = roundtrip_text(tmp_path, "r.json", lambda p: ser.write_json(ser.reservoir_to_dict(res), p))
    assert text == (GOLDEN / "reservoir.json").read_text()


def test_golden_jl_map(tmp_path):
    jl = ser.jl_map_from_dict(ser.read_json(GOLDEN / "jl_map.json"))
    assert (jl.k, jl.N, jl.seed, jl.epsilon) == (2, 4, 3, 0.5)
    text = roundtrip_text(tmp_path, "j.json", lambda p: ser.write_json(ser.jl_map_to_dict(jl), p))
    assert text == (GOLDEN / "jl_map.json").read_text()


def test_golden_readout(tmp_path):
    W = ser.readout_from_dict(ser.read_json(GOLDEN / "readout.json"))
    assert W.provenance == "least_squares" and W.ridge == 1e-8
    text = roundtrip_text(tmp_path, "w.json", lambda p: ser.write_json(ser.readout_to_dict(W), p))
    assert text == (GOLDEN / "readout.json").read_text()


def test_golden_inputs(tmp_path):
    z, Y = ser.read_sequence_csv(GOLDEN / "inputs.csv")
    assert z.tolist() == [0.1, -0.25, 0.5]
    assert Y[:, 0].tolist() == [1.0, 0.5, -0.125]
    text = roundtrip_text(tmp_path, "i.csv", lambda p: ser.write_sequence_csv(p, z, Y))
    assert text == (GOLDEN / "inputs.csv").read_text()


def test_golden_states(tmp_path):
    X = ser.read_matrix_csv(GOLDEN / "states.csv")
    assert X.tolist() == [[0.5, -1.0], [0.25, 2.0]]
    text = roundtrip_text(tmp_path, "s.csv", lambda p: ser.write_matrix_csv(p, X))
    assert text == (GOLDEN / "states.csv").read_text()


def test_golden_kernels():
    text = (GOLDEN / "kernels.txt").read_text()
    ks = ser.kernels_from_text(text)
    assert ser.kernels_to_text(ks) == text
    z = np.random.default_rng(0).uniform(-1, 1, 20)
    assert np.allclose(eval_series(ks, z), fir_quadratic()(z))


def test_golden_config():
    cfg = ser.load_config(GOLDEN / "config.json")
    assert cfg["experiment"]["horizon"] == 300
    assert cfg["inputs"]["envelope_scale"] == 1.0  # default kept
    assert cfg["audit"]["cert_trials"] == 1000


def test_golden_eval_header():
    from sigsas_rc.cli import EVAL_COLUMNS
    assert ",".join(EVAL_COLUMNS) + "\n" == (GOLDEN / "eval_header.csv").read_text()


def test_sequence_csv_rejects_out_of_bound_row(tmp_path):
    p = tmp_path / "in.csv"
    p.write_text("z\n0.1\n0.2\n0.7\n")
    with pytest.raises(ser.FormatError) as info:
        ser.read_sequence_csv(p, M=0.5)
    assert info.value.row == 3


@pytest.mark.parametrize("content", ["", "x\n1\n", "z,y_2\n1,2\n", "z\nabc\n", "z\nnan\n"])
def test_sequence_csv_malformed(tmp_path, content):
    p = tmp_path / "in.csv"
    p.write_text(content)
    with pytest.raises(ser.FormatError):
        ser.read_sequence_csv(p)


def test_matrix_csv_ragged_row(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("x_1,x_2\n1,2\n3\n")
    with pytest.raises(ser.FormatError) as info:
        ser.read_matrix_csv(p)
    assert info.value.row == 2


def test_writer_accepts_streams():
    buf = io.StringIO()
    ser.write_matrix_csv(buf, np.eye(2))
    assert buf.getvalue().splitlines()[0] == "x_1,x_2"


def test_reservoir_checksum_detects_tamper():
    doc = ser.reservoir_to_dict(build_direct(4, 1, 1, 0.5, 0.1, seed=0))
    doc["A"][0][0][0] += 1.0
    with pytest.raises(ser.FormatError, match="checksum"):
        ser.reservoir_from_dict(doc)


def test_document_kind_and_version_checked():
    doc = ser.readout_to_dict(Readout(np.eye(2), "least_squares"))
    with pytest.raises(ser.FormatError):
        ser.reservoir_from_dict(doc)
    doc["schema_version"] = 99
    with pytest.raises(ser.FormatError):
        ser.readout_from_dict(doc)


def test_jl_roundtrip_exact():
    jl = sample_jl(30, 6, seed=4, epsilon=0.3)
    back = ser.jl_map_from_dict(json.loads(ser.dumps(ser.jl_map_to_dict(jl))))
    assert np.array_equal(back.matrix, jl.matrix)


@settings(max_examples=30)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=20))
def test_sequence_roundtrip_exact(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("seq") / "z.csv"
    ser.write_sequence_csv(p, values)
    z, Y = ser.read_sequence_csv(p)
    assert z.tolist() == [float(v) for v in values] and Y is None


def test_kernel_text_errors():
    with pytest.raises(ser.FormatError):
        ser.kernels_from_text("p 1\nl 1\n0 : 1\n")
    with pytest.raises(ser.FormatError):
        ser.kernels_from_text("p 1\nl 1\nm_out 1\nq 3\n")
    with pytest.raises(ser.FormatError):
        ser.kernels_from_text("p 1\nl 1\nm_out 1\n : 1\n")


def test_kernel_text_comments_and_multi_output():
    ks = ser.kernels_from_text("# demo\np 1\nl 0\nm_out 2\n0 : 1.5 -2  # tap\n")
    assert isinstance(ks, VolterraKernelSet)
    assert ks.kernels[1][(0,)].tolist() == [1.5, -2.0]


def test_config_rejects_unknown(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"sigsas": {"bogus": 1}}')
    with pytest.raises(ser.FormatError):
        ser.load_config(p)
    p.write_text('{"nope": {}}')
    with pytest.raises(ser.FormatError):
        ser.load_config(p)


def test_target_from_config_variants(tmp_path):
    (tmp_path / "k.txt").write_text((GOLDEN / "kernels.txt").read_text())
    f = ser.target_from_config({"name": "mine", "kernels_file": "k.txt", "M": 1.0}, tmp_path)
    assert f.kind == "custom_kernels"
    assert ser.target_from_config({"name": "fir_linear", "taps": [1, 2]}).params["taps"] == [1, 2]
    with pytest.raises(ser.FormatError):
        ser.target_from_config({"name": "unknown"})
