import pytest
from hypothesis import given
from hypothesis import strategies as st

from desap.errors import ConfigError, ShapeError
from desap.flops import (
    PRESETS,
    ModelDims,
    alignment_overhead_flops,
    constant_schedule,
    flops_report,
    get_preset,
    layer_flops,
    reduction_ratio,
    total_flops,
)

LLAVA = PRESETS["llava15-7b"]


def eq6(n, d, m):
    return 4 * n * d**2 + 2 * n**2 * d + 3 * n * d * m


class TestLayer:
    def test_small(self):
        # 4*4*64 + 2*16*8 + 3*4*8*16 = 1024 + 256 + 1536
        assert layer_flops(4, ModelDims(1, 8, 16)) == 2816

    def test_empty(self):
        assert layer_flops(0, LLAVA) == 0

    def test_llava_layer(self):
        assert layer_flops(576, LLAVA) == 119_286_005_760

    @given(st.integers(0, 10**5), st.integers(1, 10**5), st.integers(1, 10**5))
    def test_formula_and_monotone(self, n, d, m):
        dims = ModelDims(1, d, m)
        assert layer_flops(n, dims) == eq6(n, d, m)
        assert layer_flops(n + 1, dims) > layer_flops(n, dims)

    def test_negative(self):
        with pytest.raises(ValueError):
            layer_flops(-1, LLAVA)


class TestTotal:
    def test_table_values(self):
        total = total_flops(constant_schedule(576, LLAVA), LLAVA)
        post = total_flops(constant_schedule(64, LLAVA), LLAVA)
        assert total == 3_817_152_184_320
        assert post == 415_538_085_888
        assert f"{total / 1e12:.2f}" == "3.82"
        assert f"{post / 1e12:.2f}" == "0.42"

    def test_single_layer(self):
        dims = ModelDims(1, 32, 64)
        assert total_flops([17], dims) == layer_flops(17, dims)

    def test_varying_schedule(self):
        dims = ModelDims(3, 16, 32)
        assert total_flops([10, 5, 0], dims) == eq6(10, 16, 32) + eq6(5, 16, 32)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            total_flops([1, 2], LLAVA)

    def test_wide_integers(self):
        dims = ModelDims(1000, 10**5, 10**5)
        total = total_flops(constant_schedule(10**5, dims), dims)
        assert total == 1000 * eq6(10**5, 10**5, 10**5)
        assert isinstance(total, int)
        big = ModelDims(4000, 10**5, 10**5)
        assert total_flops(constant_schedule(10**5, big), big) == 4 * total > 2**63


class TestRatio:
    def test_no_pruning(self):
        assert reduction_ratio(100, 100) == 0.0

    def test_everything(self):
        assert reduction_ratio(100, 0) == 1.0

    def test_rounded_table_pair(self):
        assert reduction_ratio(3.82e12, 0.42e12) == pytest.approx(0.890, abs=1e-3)
        assert 3.82 / 0.42 == pytest.approx(9.1, abs=0.01)

    def test_zero_total(self):
        with pytest.raises(ZeroDivisionError):
            reduction_ratio(0, 0)

    @given(st.integers(1, 10**15), st.data())
    def test_range(self, total, data):
        post = data.draw(st.integers(0, total))
        assert 0.0 <= reduction_ratio(total, post) <= 1.0

    def test_report(self):
        r = flops_report(LLAVA, 576, 64)
        assert r.total == 3_817_152_184_320 and r.post_pruning == 415_538_085_888
        assert r.reduction_ratio == pytest.approx(1 - 415_538_085_888 / 3_817_152_184_320)
        assert r.speedup == pytest.approx(3_817_152_184_320 / 415_538_085_888)
        assert "total_tflops=3.82" in r.lines() and "post_tflops=0.42" in r.lines()


class TestOverhead:
    def test_representative(self):
        v = alignment_overhead_flops(576, 30, 768)
        assert v == 26_542_080 + 2 * 576 * 768 + 2 * 30 * 768
        assert 2.6e7 <= v <= 2.8e7

    def test_unit(self):
        assert alignment_overhead_flops(1, 1, 1) == 6

    def test_negligible(self):
        total = total_flops(constant_schedule(576, LLAVA), LLAVA)
        assert alignment_overhead_flops(576, 30, 768) / total < 1e-4

    def test_invalid(self):
        with pytest.raises(ValueError):
            alignment_overhead_flops(0, 1, 1)


def test_presets():
    assert get_preset("llava15-7b") == ModelDims(32, 4096, 11008)
    with pytest.raises(ConfigError):
        get_preset("nope")
    with pytest.raises(ConfigError):
        ModelDims(0, 1, 1)
