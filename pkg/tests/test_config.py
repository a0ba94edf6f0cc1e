import pytest

from csbflock.config import ConfigError, format_config, parse_config, with_overrides
from csbflock.model import KernelKind, Variant

MINIMAL = """
[system]
n = 4
dim = 2

[model]
variant = original
kernel = regular
"""


def test_minimal_config_uses_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.params.n == cfg.init.n == 4
    assert cfg.params.variant is Variant.ORIGINAL
    assert cfg.params.kernel.kind is KernelKind.REGULAR and cfg.params.kernel.alpha == 1.0
    assert cfg.t_end == 500.0 and cfg.sample_every == 0.5


def test_round_trip():
    cfg = parse_config(MINIMAL + "\n[run]\nt_end = 0.1\n[init]\nseed = 99\npos_box = -0.3, 0.7\n")
    assert parse_config(format_config(cfg)) == cfg


@pytest.mark.parametrize(
    "extra, path",
    [
        ("[model]\nalpha = 0.5\n", "model.alpha"),
        ("[bogus]\nx = 1\n", "bogus"),
        ("[run]\nfoo = 1\n", "run.foo"),
        ("[run]\nt_end = abc\n", "run.t_end"),
        ("[init]\npos_box = 1, 0\n", "init.pos_box"),
        ("[model]\nk2 = -1\n", "model.k2"),
    ],
)
def test_errors_name_the_field(extra, path):
    text = "[system]\nn = 3\ndim = 2\n[model]\nvariant = simplified\nkernel = singular\n"
    # a duplicate section is a parse error, so merge [model] extras in place
    if extra.startswith("[model]"):
        text += extra.split("\n", 1)[1]
    else:
        text += extra
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.path == path


def test_missing_required_key():
    with pytest.raises(ConfigError) as info:
        parse_config("[system]\nn = 3\ndim = 2\n[model]\nvariant = simplified\n")
    assert info.value.path == "model.kernel"


def test_too_few_particles():
    with pytest.raises(ConfigError, match="N >= 2"):
        parse_config(MINIMAL.replace("n = 4", "n = 1"))


def test_overrides():
    cfg = with_overrides(parse_config(MINIMAL), n=7, seed=3, kernel="singular", alpha=2.0, t_end=1.5)
    assert cfg.params.n == cfg.init.n == 7
    assert cfg.init.seed == 3
    assert cfg.params.kernel.kind is KernelKind.SINGULAR and cfg.params.kernel.alpha == 2.0
    assert cfg.t_end == 1.5
    with pytest.raises(ConfigError):
        with_overrides(cfg, alpha=0.5)
