import numpy as np
import pytest

from bcred.exceptions import MalformedFileError
from bcred.io import (format_float, read_mask_file, read_matrix_file, read_pgm,
                      read_vector_csv, write_mask_file, write_matrix_file,
                      write_pgm, write_vector_csv)


def test_p2_example(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_text("P2\n2 2\n255\n0 255 255 0\n")
    assert np.array_equal(read_pgm(p), [[0.0, 1.0], [1.0, 0.0]])


def test_p2_with_comment_and_16bit(tmp_path):
    p = tmp_path / "b.pgm"
    p.write_text("P2\n# comment\n3 1\n65535\n0 65535 32768\n")
    img = read_pgm(p)
    assert img.shape == (1, 3)
    assert img[0, 2] == pytest.approx(32768 / 65535)


def test_pgm_roundtrip_bound(tmp_path):
    img = np.random.default_rng(0).random((13, 7))
    write_pgm(img, tmp_path / "r.pgm")
    back = read_pgm(tmp_path / "r.pgm")
    assert np.abs(back - img).max() <= 1 / 510 + 1e-15
    assert (tmp_path / "r.pgm").read_bytes().startswith(b"P5\n7 13\n255\n")


def test_pgm_rounding_half_away(tmp_path):
    write_pgm(np.array([[0.5 / 255, 1.5 / 255 - 1e-12, 2.0]]), tmp_path / "h.pgm")
    assert list((tmp_path / "h.pgm").read_bytes()[-3:]) == [1, 1, 255]


def test_pgm_errors(tmp_path):
    bad = tmp_path / "z.pgm"
    bad.write_text("P2\n2 2\n0\n0 0 0 0\n")
    with pytest.raises(MalformedFileError):
        read_pgm(bad)
    bad.write_bytes(b"P5\n4 4\n255\n\x00\x01")
    with pytest.raises(MalformedFileError):
        read_pgm(bad)
    bad.write_text("P3\n1 1\n255\n0 0 0\n")
    with pytest.raises(MalformedFileError):
        read_pgm(bad)


def test_matrix_file_layout(tmp_path):
    M = np.arange(6.0).reshape(2, 3)
    write_matrix_file(M, tmp_path / "m.bmat")
    raw = (tmp_path / "m.bmat").read_bytes()
    assert raw[:4] == b"BMAT"
    assert int.from_bytes(raw[4:8], "little") == 2
    assert int.from_bytes(raw[8:12], "little") == 3
    assert np.array_equal(np.frombuffer(raw[12:], "<f8"), np.arange(6.0))
    assert np.array_equal(read_matrix_file(tmp_path / "m.bmat"), M)
    (tmp_path / "t.bmat").write_bytes(raw[:-8])
    with pytest.raises(MalformedFileError):
        read_matrix_file(tmp_path / "t.bmat")


def test_mask_file(tmp_path):
    mask = np.array([[1, 0, 1], [0, 0, 1]], dtype=bool)
    write_mask_file(mask, tmp_path / "m.txt")
    assert (tmp_path / "m.txt").read_text() == "2 3\n101\n001\n"
    assert np.array_equal(read_mask_file(tmp_path / "m.txt"), mask)
    (tmp_path / "bad.txt").write_text("2 3\n101\n")
    with pytest.raises(MalformedFileError):
        read_mask_file(tmp_path / "bad.txt")


def test_vector_csv_and_float_format(tmp_path):
    x = np.array([0.1, -2.5e-300, 3.0])
    write_vector_csv(x, tmp_path / "v.csv")
    assert np.array_equal(read_vector_csv(tmp_path / "v.csv"), x)
    assert format_float(np.inf) == "inf"
    assert format_float(-np.inf) == "-inf"
    assert format_float(0.1) == "0.1"
