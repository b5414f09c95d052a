#!/usr/bin/env python3
"""Print the acceptance PASS/FAIL lines without pytest (takes a few minutes)."""

import pathlib
import runpy

runpy.run_path(str(pathlib.Path(__file__).resolve().parents[1] / "tests" / "test_acceptance.py"), run_name="__main__")
