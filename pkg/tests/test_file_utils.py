import io
import os

import pytest

from file_utils import cleanup_file, write_atomic, write_output


def test_write_output_to_stream():
    """Output without a path goes to the given stream."""
    stream = io.StringIO()
    assert write_output("k,f\n0,1\n", None, stream=stream) is True
    assert stream.getvalue() == "k,f\n0,1\n"


def test_write_output_dash_means_stdout(capsys):
    assert write_output("hello\n", "-") is True
    assert capsys.readouterr().out == "hello\n"


def test_write_output_to_file(tmp_path):
    path = tmp_path / "out.csv"
    assert write_output("k\n0\n", str(path)) is True
    assert path.read_text(encoding="utf-8") == "k\n0\n"


def test_write_atomic_replaces_existing_file(tmp_path):
    """An existing file is replaced and no temporary files are left behind."""
    path = tmp_path / "out.csv"
    path.write_text("old", encoding="utf-8")
    assert write_atomic(str(path), "new") is True
    assert path.read_text(encoding="utf-8") == "new"
    assert os.listdir(tmp_path) == ["out.csv"]


def test_write_atomic_missing_directory(tmp_path):
    assert write_atomic(str(tmp_path / "missing" / "out.csv"), "x") is False


def test_write_atomic_cleans_up_when_rename_fails(tmp_path, mocker):
    mocker.patch("file_utils.os.replace", side_effect=OSError("read-only"))
    assert write_atomic(str(tmp_path / "out.csv"), "x") is False
    assert os.listdir(tmp_path) == []


def test_cleanup_file(tmp_path):
    path = tmp_path / "scratch.tmp"
    path.write_text("x", encoding="utf-8")
    assert cleanup_file(str(path)) is True
    assert not path.exists()
    # missing files count as cleaned up
    assert cleanup_file(str(path)) is True
    assert cleanup_file("") is True


def test_cleanup_file_failure(tmp_path, mocker):
    path = tmp_path / "scratch.tmp"
    path.write_text("x", encoding="utf-8")
    mocker.patch("file_utils.os.unlink", side_effect=OSError("busy"))
    assert cleanup_file(str(path)) is False