import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stanceseg.emissions import (
    EmissionModel,
    FeatureConfig,
    document_emissions,
    feature_strings,
    featurize,
    linear_emissions,
    load_emissions,
    plan_windows,
    save_emissions,
    stitch_windows,
    windowed_emissions,
)
from stanceseg.errors import DimensionError, InvalidInputError, NonFiniteError, ParseError

CFG = FeatureConfig(hash_dim=2**12)


def test_feature_strings_cover_context():
    feats = feature_strings(["We", "act", "."], CFG)
    assert "bias" in feats[0]
    assert "w=we" in feats[0]
    assert "w[-1]=<s>" in feats[0] and "w[+1]=act" in feats[0]
    assert "w[+2]=</s>" in feats[1]


def test_featurize_csr_layout():
    batch = featurize(["a", "b", "c"], CFG)
    assert batch.offsets[0] == 0 and batch.offsets[-1] == len(batch.indices)
    assert np.all(np.diff(batch.offsets) > 0)
    assert batch.indices.max() < CFG.hash_dim
    np.testing.assert_array_equal(batch.token_ids()[batch.offsets[:-1]], [0, 1, 2])


def test_hashing_is_stable():
    a = featurize(["same", "tokens"], CFG)
    b = featurize(["same", "tokens"], CFG)
    np.testing.assert_array_equal(a.indices, b.indices)
    c = featurize(["same", "tokens"], FeatureConfig(hash_dim=2**12, seed=1))
    assert not np.array_equal(a.indices, c.indices)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        FeatureConfig(hash_dim=1000)
    with pytest.raises(InvalidInputError):
        featurize([], CFG)
    assert FeatureConfig.from_dict(CFG.to_dict()) == CFG


def test_linear_emissions_sum_rows():
    rng = np.random.default_rng(0)
    model = EmissionModel(CFG, rng.normal(size=(CFG.hash_dim, 3)))
    batch = featurize(["x", "y"], CFG)
    em = linear_emissions(batch, model)
    for t in range(2):
        rows = batch.indices[batch.offsets[t]:batch.offsets[t + 1]]
        np.testing.assert_allclose(em[t], model.weights[rows].sum(axis=0))


@settings(max_examples=500, deadline=None)
@given(st.integers(1, 3000), st.integers(1, 300).map(lambda x: 2 * x))
def test_window_plan_partitions(n, w):
    plan = plan_windows(n, w)
    covered = np.zeros(n, dtype=int)
    for win in plan.windows:
        assert win.start <= win.select_start < win.select_end <= win.end
        assert win.end - win.start <= w
        covered[win.select_start:win.select_end] += 1
    assert np.all(covered == 1)
    expected = 1 if n <= w else -(-(n - w) // (w // 2)) + 1
    assert len(plan.windows) == expected


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 700), st.sampled_from([2, 8, 16, 64, 128]))
def test_stitching_constant_split_is_exact(n, w):
    rng = np.random.default_rng(n)
    full = rng.normal(size=(n, 3))
    plan = plan_windows(n, w)
    assert np.array_equal(stitch_windows([full[x.start:x.end] for x in plan.windows], plan), full)


def test_window_counts_at_default_size():
    assert len(plan_windows(512).windows) == 1
    assert len(plan_windows(513).windows) == 2
    plan = plan_windows(1000)
    assert [(w.select_start, w.select_end) for w in plan.windows] == [(0, 384), (384, 640), (640, 1000)]


def test_stitch_shape_errors():
    plan = plan_windows(10, 4)
    parts = [np.zeros((w.end - w.start, 2)) for w in plan.windows]
    with pytest.raises(DimensionError):
        stitch_windows(parts[:-1], plan)
    parts[1] = np.zeros((3, 2))
    with pytest.raises(DimensionError):
        stitch_windows(parts, plan)


def test_local_features_make_windowing_transparent():
    rng = np.random.default_rng(1)
    model = EmissionModel(CFG, rng.normal(size=(CFG.hash_dim, 5)))
    tokens = [f"t{rng.integers(50)}" for _ in range(300)]
    whole = linear_emissions(featurize(tokens, CFG), model)
    np.testing.assert_allclose(document_emissions(tokens, model, 16), whole)


def test_windowed_scorer_sees_each_window():
    seen = []

    def score(chunk):
        seen.append(len(chunk))
        return np.zeros((len(chunk), 1))

    windowed_emissions(list("abcdefghij"), score, 4)
    assert seen == [4, 4, 4, 4]


def test_emission_file_roundtrip(tmp_path):
    em = np.random.default_rng(2).normal(size=(4, 3))
    save_emissions(em, tmp_path / "e.em")
    assert np.array_equal(load_emissions(tmp_path / "e.em", n_tags=3, n_tokens=4), em)


@pytest.mark.parametrize(
    "body,err",
    [
        ("2 2\n1 2\n", DimensionError),
        ("2 2\n1 2\n3\n", DimensionError),
        ("2 2\n1 2\n3 x\n", ParseError),
        ("2 2\n1 2\n3 nan\n", NonFiniteError),
        ("2\n", ParseError),
    ],
)
def test_emission_file_errors(tmp_path, body, err):
    (tmp_path / "e.em").write_text(body)
    with pytest.raises(err):
        load_emissions(tmp_path / "e.em")


def test_emission_file_error_details(tmp_path):
    (tmp_path / "e.em").write_text("2 2\n1 2\n3 inf\n")
    with pytest.raises(NonFiniteError) as exc:
        load_emissions(tmp_path / "e.em")
    assert exc.value.position == (1, 1)
    save_emissions(np.zeros((2, 5)), tmp_path / "k.em")
    with pytest.raises(DimensionError) as exc:
        load_emissions(tmp_path / "k.em", n_tags=7)
    assert (exc.value.expected, exc.value.actual) == (7, 5)
    with pytest.raises(FileNotFoundError):
        load_emissions(tmp_path / "missing.em")
