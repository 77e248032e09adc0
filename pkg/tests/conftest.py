import pytest

from pinaccess import synthetic
from pinaccess.techlib import profile_library


@pytest.fixture
def rules():
    return synthetic.tech()


@pytest.fixture
def planted():
    rules, cells = synthetic.planted_library()
    return rules, {c.name: c for c in cells}


@pytest.fixture
def planted_profile():
    rules, cells = synthetic.planted_library()
    return rules, profile_library(cells)


@pytest.fixture
def planted_lib_file(tmp_path):
    path = tmp_path / "planted.lib"
    path.write_text(synthetic.library_text(*synthetic.planted_library()))
    return path


@pytest.fixture
def clean_lib_file(tmp_path):
    path = tmp_path / "clean.lib"
    path.write_text(synthetic.library_text(*synthetic.toy_clean_library()))
    return path
