"""Differential checks: bytecode VM (numba and interpreted) against the small-step interpreter."""

import itertools
import os
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weirdc import imp, kernels
from weirdc.corpus import read
from weirdc.gen import ImpGen

DOM = [False, True, 0, 1, 2, 3]
BACKENDS = ["python"] + (["jit"] if kernels.HAVE_NUMBA else [])


def grid(names):
    return list(itertools.product(DOM, repeat=len(names)))


@pytest.mark.parametrize("backend", BACKENDS)
@given(seed=st.integers(0, 100_000), budget=st.sampled_from([5, 17, 60, 400]))
@settings(max_examples=60)
def test_random_programs_agree_with_reference(backend, seed, budget):
    p = ImpGen(seed).whole(4)
    names = ("x", "y")
    g = grid(names)
    assert kernels.run_imp_batch(p, names, g, budget, backend=backend) == \
        kernels.run_imp_batch(p, names, g, budget, backend="reference")


@pytest.mark.parametrize("backend", BACKENDS)
def test_dop_component_agrees_with_reference(backend):
    j = imp.parse_imp(read("dop-J.imp"))
    g = list(itertools.product([False, 0, 1, 3], repeat=len(j.vars)))
    assert kernels.run_imp_batch(j.body, j.vars, g, 300, backend=backend) == \
        kernels.run_imp_batch(j.body, j.vars, g, 300, backend="reference")


@pytest.mark.parametrize("backend", BACKENDS)
def test_long_output_traces_fall_back_to_a_full_buffer(backend):
    p = imp.parse_imp("(while true (output x))")
    out = kernels.run_imp_batch(p, ("x",), [(1,), (True,)], 1000, backend=backend)
    assert out == kernels.run_imp_batch(p, ("x",), [(1,), (True,)], 1000, backend="reference")
    assert len(out[0].outputs) > kernels.BATCH_CAP


@pytest.mark.parametrize("backend", BACKENDS)
def test_huge_numbers_fall_back_to_reference(backend):
    p = imp.parse_imp("(seq (assign y x) (while true (seq (assign y (* y y)) (output y))))")
    out = kernels.run_imp_batch(p, ("x",), [(3,)], 100, backend=backend)
    assert out == kernels.run_imp_batch(p, ("x",), [(3,)], 100, backend="reference")


def test_jit_can_be_switched_off():
    code = "from weirdc import kernels; print(kernels.jit_enabled())"
    env = dict(os.environ, WEIRDC_JIT="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
