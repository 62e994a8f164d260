"""
Utility functions for file handling operations in the Heavy Ball lab.
This module writes command output either to standard output or atomically to a file.
"""
import logging
import os
import sys
import tempfile
from typing import Optional, TextIO


def write_output(text: str, path: Optional[str] = None, stream: Optional[TextIO] = None) -> bool:
    """
    Write command output.

    Args:
        text: Content to write
        path: Destination file; None or '-' means standard output
        stream: Stream used instead of sys.stdout

    Returns:
        bool: True if the output was written, False otherwise
    """
    if path is None or path == "-":
        (stream or sys.stdout).write(text)
        return True
    return write_atomic(path, text)


def write_atomic(path: str, text: str) -> bool:
    """
    Replace path with text so readers never see a partial file.

    The content goes to a temporary file in the same directory which is then
    renamed over the destination.

    Returns:
        bool: True if the file was written, False otherwise
    """
    directory = os.path.dirname(os.path.abspath(path))
    file_path = None
    try:
        fd, file_path = tempfile.mkstemp(prefix=".heavyball-", suffix=".tmp", dir=directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as tmp_file:
                tmp_file.write(text)
        except Exception:
            cleanup_file(file_path)
            raise
        os.replace(file_path, path)
        logging.info(f"Wrote {len(text)} characters to {path}")
        return True
    except OSError as e:
        logging.error(f"Failed to write {path}: {e}")
        if file_path:
            cleanup_file(file_path)
        return False


def cleanup_file(file_path: str) -> bool:
    """
    Safely remove a file.

    Args:
        file_path: Path to the file to remove

    Returns:
        bool: True if cleanup was successful, False otherwise
    """
    if not file_path or not os.path.exists(file_path):
        return True

    try:
        os.unlink(file_path)
        logging.debug(f"Removed file: {file_path}")
        return True
    except OSError as e:
        logging.warning(f"Failed to remove file {file_path}: {e}")
        return False
