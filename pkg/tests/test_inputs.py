import numpy as np
import pytest
from hypothesis import given, strategies as st

from dnnbench.errors import InputError
from dnnbench.inputs import InputSpec, decode_ppm, encode_ppm, load_input, parse_prices


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_ppm_round_trip(h, w, seed):
    px = np.random.default_rng(seed).integers(0, 256, size=(3, h, w)).astype(np.float32) / 255
    assert np.array_equal(decode_ppm(encode_ppm(px)), px)


def test_ppm_header_comments_and_channel_order():
    data = b"P6\n# made by hand\n2 1\n255\n" + bytes([255, 0, 0, 0, 0, 255])
    x = decode_ppm(data)
    assert x.shape == (3, 1, 2)
    assert x[0, 0, 0] == 1.0 and x[2, 0, 1] == 1.0 and x[1].sum() == 0


@pytest.mark.parametrize("data", [b"P3\n1 1\n255\n000", b"P6\n2 2\n255\n" + bytes(5), b"P6\n1", b"P6\n1 1\n65535\n"])
def test_ppm_rejects_bad_files(data):
    with pytest.raises(InputError):
        decode_ppm(data)


def test_load_ppm_with_mean_subtraction(tmp_path):
    p = tmp_path / "img.ppm"
    p.write_bytes(encode_ppm(np.full((3, 4, 4), 1.0)))
    x = load_input(InputSpec("ppm_image", path=p, mean=(0.5, 0.25, 0.0)), (3, 4, 4))
    assert np.allclose(x[0], 0.5) and np.allclose(x[1], 0.75) and np.allclose(x[2], 1.0)
    with pytest.raises(InputError):
        load_input(InputSpec("ppm_image", path=p), (3, 32, 32))
    with pytest.raises(InputError):
        load_input(InputSpec("ppm_image", path=p, mean=(1, 2)), (3, 4, 4))


def test_raw_f32(tmp_path):
    p = tmp_path / "x.bin"
    np.arange(12, dtype="<f4").tofile(p)
    assert load_input(InputSpec("raw_f32", path=p), (3, 2, 2))[2, 1, 1] == 11
    with pytest.raises(InputError):
        load_input(InputSpec("raw_f32", path=p), (3, 2, 3))
    with pytest.raises(InputError):
        load_input(InputSpec("raw_f32", path=tmp_path / "missing.bin"), (3, 2, 2))


def test_price_pair_arity():
    assert parse_prices("0.5,0.75") == (0.5, 0.75)
    for bad in ("1", "1,2,3", "a,b"):
        with pytest.raises(InputError):
            parse_prices(bad)
    with pytest.raises(InputError):
        load_input(InputSpec("price_pair", values=(1.0,)), (2, 1))
    assert load_input(InputSpec("price_pair", values=(1.0, 2.0)), (2, 1)).tolist() == [[1.0], [2.0]]


def test_generated_input_is_seeded():
    a = load_input(InputSpec("generated", seed=4), (3, 8, 8))
    b = load_input(InputSpec("generated", seed=4), (3, 8, 8))
    assert np.array_equal(a, b) and a.min() >= 0 and a.max() < 1


def test_non_finite_rejected(tmp_path):
    p = tmp_path / "nan.bin"
    np.array([np.nan, 1.0], dtype="<f4").tofile(p)
    with pytest.raises(InputError):
        load_input(InputSpec("raw_f32", path=p), (2, 1))
