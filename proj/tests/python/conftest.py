import os
import subprocess

import pytest


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("STREAKFIT_CLI")
    if not path:
        pytest.skip("STREAKFIT_CLI is not set")
    return path


@pytest.fixture
def run(cli):
    def _run(*args, check=True):
        proc = subprocess.run([cli, *map(str, args)], capture_output=True, text=True)
        if check and proc.returncode != 0:
            raise AssertionError(f"{args} failed ({proc.returncode}): {proc.stderr}")
        return proc

    return _run
