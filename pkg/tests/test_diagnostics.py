import json

import numpy as np
import pytest
from scipy import signal

from qbld.diagnostics import (
    autocorrelation,
    compare_summaries,
    default_batch_size,
    inefficiency_factor,
    summarize,
    summarize_chain,
    write_summary_json,
    write_trace_csv,
)
from qbld.errors import DegenerateChainError, InsufficientLengthError
from qbld.models import DrawStore
from qbld.rng import RandomStream


def ar1(rho, size, seed):
    e = RandomStream(seed).standard_normal(size)
    return signal.lfilter([1.0], [1.0, -rho], e)


def test_autocorrelation_examples():
    alternating = np.tile([1.0, -1.0], 5000)
    assert autocorrelation(alternating, 1) == pytest.approx(-1.0, abs=1e-3)
    assert autocorrelation(alternating, 0) == 1.0
    iid = RandomStream(1).standard_normal(100_000)
    assert autocorrelation(iid, 5) == pytest.approx(0.0, abs=0.01)


def test_autocorrelation_of_ar1():
    chain = ar1(0.6, 200_000, 2)
    assert autocorrelation(chain, 1) == pytest.approx(0.6, abs=0.01)
    assert autocorrelation(chain, 3) == pytest.approx(0.216, abs=0.01)


def test_autocorrelation_errors():
    with pytest.raises(DegenerateChainError):
        autocorrelation(np.full(100, 3.0), 1)
    with pytest.raises(InsufficientLengthError):
        autocorrelation(np.arange(5.0), 5)


def test_inefficiency_factor_iid():
    iid = RandomStream(3).standard_normal(100_000)
    assert inefficiency_factor(iid, 100) == pytest.approx(1.0, abs=0.15)


def test_inefficiency_factor_ar1():
    chain = ar1(0.9, 4_000_000, 4)
    assert inefficiency_factor(chain, 2000) == pytest.approx(19.0, abs=2.0)


def test_inefficiency_factor_is_affine_invariant():
    chain = ar1(0.5, 20_000, 5)
    assert inefficiency_factor(3.0 * chain - 7.0) == pytest.approx(inefficiency_factor(chain), rel=1e-9)


def test_autocorrelation_is_affine_invariant():
    chain = ar1(0.7, 50_000, 10)
    for lag in (1, 5, 10):
        assert autocorrelation(-2.5 * chain + 10.0, lag) == pytest.approx(autocorrelation(chain, lag),
                                                                          rel=1e-10, abs=1e-12)


def test_inefficiency_factor_is_stable_across_batch_sizes():
    iid = RandomStream(11).standard_normal(1_000_000)
    factors = [inefficiency_factor(iid, b) for b in (50, 100, 200)]
    for f in factors:
        assert f == pytest.approx(factors[0], rel=0.10)
        assert f == pytest.approx(1.0, rel=0.10)


def test_inefficiency_factor_errors():
    with pytest.raises(DegenerateChainError):
        inefficiency_factor(np.full(1000, 2.5))
    with pytest.raises(InsufficientLengthError):
        inefficiency_factor(np.arange(50.0), batch_size=10)
    assert default_batch_size(10_000) == 100


def test_summary_of_constant_column_is_flagged_not_fatal(tmp_path):
    rng = RandomStream(6)
    store = DrawStore(beta=np.column_stack([np.full(400, 1.5), rng.standard_normal(400)]),
                      phi2=rng.uniform(size=400) + 1.0, x_names=("const", "x"), s_names=("const",))
    out = summarize(store)
    flat = out["beta[const]"]
    assert flat.mean == pytest.approx(1.5)
    assert flat.std == 0.0
    assert flat.error
    assert out["beta[x]"].error is None
    assert out["beta[x]"].ess == pytest.approx(400 / out["beta[x]"].if_factor)

    path = write_summary_json(tmp_path / "summary.json", out)
    payload = json.loads(path.read_text())
    assert payload["beta[const]"]["if"] is None
    assert set(payload["beta[x]"]) >= {"mean", "std", "if", "ess", "mcse", "acf1", "acf5", "acf10"}


def test_summarize_chain_quantiles():
    chain = RandomStream(7).standard_normal(40_000)
    s = summarize_chain(chain)
    assert s.q025 == pytest.approx(-1.96, abs=0.05)
    assert s.q975 == pytest.approx(1.96, abs=0.05)
    assert s.mcse == pytest.approx(s.std * np.sqrt(s.if_factor / s.G))


def test_compare_summaries():
    fast = {"b": summarize_chain(RandomStream(8).standard_normal(10_000))}
    slow = {"b": summarize_chain(ar1(0.9, 10_000, 9))}
    table = compare_summaries(fast, slow)
    assert table["b"]["blocked_better"] is True
    assert table["b"]["if_blocked"] < table["b"]["if_nonblocked"]


def test_trace_csv(tmp_path):
    store = DrawStore(beta=np.ones((3, 1)) * [[0.25]], phi2=np.array([1.0, 2.0, 3.0]), x_names=("x",),
                      s_names=("const",))
    path = write_trace_csv(store, tmp_path / "out" / "draws.csv")
    assert path.read_text().splitlines()[0] == "draw,beta[x],phi2"
