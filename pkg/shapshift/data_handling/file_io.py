#!/usr/bin/env python3
# -*- coding: utf-8 -*-

#----------------#
# Import modules #
#----------------#

import os
import tempfile
from pathlib import Path

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.strings.string_handler import append_ext, get_obj_specs
from pygenutils.strings.text_formatters import format_string

#------------------#
# Define functions #
#------------------#

# Helpers #
#---------#

def ensure_extension(file_path: str | Path, extension: str) -> str:
    """Return 'file_path' as a string, appending 'extension' if it has none."""
    file_path = str(file_path)
    file_ext = get_obj_specs(file_path, obj_spec_key="ext")
    if len(file_ext) == 0:
        return append_ext(file_path, extension)
    return file_path


def _sibling_tmp_path(file_path: str) -> str:
    """Reserve a hidden scratch file in the directory of 'file_path'."""
    folder = get_obj_specs(file_path, obj_spec_key="parent") or None
    stem = get_obj_specs(file_path, obj_spec_key="name_noext")
    ext = get_obj_specs(file_path, obj_spec_key="ext")

    handle, scratch = tempfile.mkstemp(prefix=f".{stem}.", suffix=f".{ext or 'part'}", dir=folder)
    os.close(handle)
    return scratch


def _write_text(file_path: str, text: str) -> None:
    # '\n' line endings on every platform
    with open(file_path, "w", encoding="utf-8", newline="") as file_obj:
        file_obj.write(text)


# Writers #
#---------#

def write_text_atomic(file_path: str | Path,
                      text: str,
                      extension: str | None = None) -> str:
    """
    Write 'text' to 'file_path' without leaving a half-written file behind.

    The content goes to a scratch file in the destination folder, which is
    then moved over the target with 'os.replace'. Where the move is refused
    (some network and Windows shares), the target is removed and written
    directly.

    Parameters
    ----------
    file_path : str | Path
        Destination path. Parent directories are created when missing.
    text : str
        Full file content, UTF-8 encoded on disk.
    extension : str | None, optional
        Extension (without dot) appended when 'file_path' has none.

    Returns
    -------
    str
        The path actually written.
    """
    file_path = ensure_extension(file_path, extension) if extension else str(file_path)
    folder = get_obj_specs(file_path, obj_spec_key="parent")
    if folder:
        os.makedirs(folder, exist_ok=True)

    scratch = _sibling_tmp_path(file_path)
    try:
        _write_text(scratch, text)
        try:
            os.replace(scratch, file_path)
        except OSError:
            if os.path.exists(file_path):
                os.remove(file_path)
            _write_text(file_path, text)
    finally:
        if os.path.exists(scratch):
            os.remove(scratch)
    return file_path


def write_key_value_file(file_path: str | Path, items: dict) -> str:
    """
    Write a plain-text 'key=value' file, one pair per line, in the
    insertion order of 'items'. Floats use their shortest round-trip form.
    """
    lines = [f"{key}={format_scalar(value)}" for key, value in items.items()]
    return write_text_atomic(file_path, "\n".join(lines) + "\n", extension="txt")


# Readers #
#---------#

def read_key_value_file(file_path: str | Path) -> dict[str, str]:
    """
    Read a 'key=value' file written by 'write_key_value_file'.
    Blank lines and lines starting with '#' are skipped.

    Raises
    ------
    FileNotFoundError
        If the file does not exist.
    ValueError
        If a non-blank line has no '=' separator.
    """
    file_path = str(file_path)
    if not os.path.isfile(file_path):
        raise FileNotFoundError(format_string(FILE_NOT_FOUND_ERROR_TEMPLATE, (file_path,)))

    items = {}
    with open(file_path, encoding="utf-8") as file_obj:
        for line_number, line in enumerate(file_obj, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(format_string(MALFORMED_LINE_ERROR_TEMPLATE,
                                               (file_path, line_number, stripped)))
            key, value = stripped.split("=", 1)
            items[key.strip()] = value.strip()
    return items


# Formatting #
#------------#

def format_scalar(value) -> str:
    """Shortest round-trip text for floats, 'str' for everything else."""
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ",".join(format_scalar(item) for item in value)
    return str(value)

#--------------------------#
# Parameters and constants #
#--------------------------#

# Error strings #
#---------------#

FILE_NOT_FOUND_ERROR_TEMPLATE = "File not found: '{}'"
MALFORMED_LINE_ERROR_TEMPLATE = "Malformed line in '{}' (line {}): '{}'. Expected 'key=value'."
