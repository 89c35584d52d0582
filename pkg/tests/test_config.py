import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fhks import ConfigError, DomainSpec, FracParams, RunManifest, SimConfig, make_initial_data, parse_config, render_config
from fhks.config import PRESETS


def test_empty_config_gives_defaults():
    m = parse_config("")
    assert m == RunManifest()
    assert m.domain == DomainSpec((1.0,), (128,), "discrete")
    assert m.config.frac == FracParams(0.4, 0.0)
    assert m.config.epsilon == 1e-3 and m.config.t_end == 0.5
    assert m.preset == "bump"


def test_full_config():
    text = """
    # a 2D run
    [domain]
    lengths = 1.0, 2.0
    cells = 32, 64      # per axis
    symbol_mode = continuum

    [model]
    s = 0.25
    sigma = 0.5
    epsilon = 1e-2

    [time]
    t_end = 0.1
    splitting = strang

    [initial]
    preset = random_clipped
    seed = 11

    [sweep]
    axis = epsilon
    values = 1e-1, 1e-2
    """
    m = parse_config(text)
    assert m.domain == DomainSpec((1.0, 2.0), (32, 64), "continuum")
    assert m.config.frac == FracParams(0.25, 0.5)
    assert m.config.splitting == "strang"
    assert m.seed == 11 and m.preset == "random_clipped"
    assert m.sweep_axis == "epsilon" and m.sweep_values == (0.1, 0.01)


def test_s_out_of_range_names_interval():
    with pytest.raises(ConfigError, match=r"s must lie in the open interval \(0, 1\)"):
        parse_config("[model]\ns = 1.0\n")


def test_unknown_key_is_hard_error():
    with pytest.raises(ConfigError, match="'foo'") as info:
        parse_config("[model]\ns = 0.3\nfoo = 1\n")
    assert info.value.line == 3


@pytest.mark.parametrize(
    "text,line",
    [
        ("[model\ns = 0.3", 1),
        ("s = 0.3", 1),
        ("[model]\ns 0.3", 2),
        ("[model]\ns = abc", 2),
        ("[nope]", 1),
        ("[model]\ns = 0.3\ns = 0.2", 3),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


@pytest.mark.parametrize(
    "text,field",
    [
        ("[model]\nepsilon = 0", "epsilon"),
        ("[model]\nsigma = 2", "sigma"),
        ("[time]\ncfl = 1.5", "cfl"),
        ("[domain]\ncells = 1", "cells"),
        ("[sweep]\naxis = s\nvalues = 0.3", "sweep.values"),
        ("[initial]\npreset = square", "initial.preset"),
    ],
)
def test_validation_names_field(text, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(text)


@settings(max_examples=40, deadline=None)
@given(
    s=st.floats(0.01, 0.99),
    sigma=st.floats(0, 1),
    eps=st.floats(1e-6, 1.0),
    n=st.integers(2, 512),
    two_d=st.booleans(),
    preset=st.sampled_from(PRESETS),
    seed=st.integers(0, 10**6),
    axis=st.sampled_from([None, "s", "epsilon", "sigma"]),
)
def test_render_parse_round_trip(s, sigma, eps, n, two_d, preset, seed, axis):
    domain = DomainSpec((1.0, 0.5), (n, 3)) if two_d else DomainSpec((2.0,), (n,), "continuum")
    m = RunManifest(
        domain=domain,
        config=SimConfig(FracParams(s, sigma), epsilon=eps, diag_levels=(0.1, 0.9)),
        preset=preset,
        seed=seed,
        sweep_axis=axis,
        sweep_values=(0.3, 0.1) if axis else (),
    )
    assert parse_config(render_config(m)) == m


def test_presets():
    d = DomainSpec((1.0,), (4,))
    assert np.all(make_initial_data("constant", d, level=0.5).values == 0.5)
    np.testing.assert_array_equal(make_initial_data("riemann_step", d).values, [0.9, 0.9, 0.1, 0.1])
    a = make_initial_data("random_clipped", DomainSpec((1.0,), (64,)), seed=7)
    b = make_initial_data("random_clipped", DomainSpec((1.0,), (64,)), seed=7)
    assert np.array_equal(a.values, b.values)
    d = DomainSpec((2.0,), (64,))
    bump = make_initial_data("bump", d)
    x = d.midpoints()
    np.testing.assert_allclose(bump.values, 0.9 * np.exp(-(((x - 1.0) / 0.25) ** 2)), rtol=1e-14)
    for p in PRESETS:
        for dom in (d, DomainSpec((1.0, 2.0), (8, 6))):
            u = make_initial_data(p, dom).values
            assert u.min() >= 0 and u.max() <= 1
