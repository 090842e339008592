import numpy as np
import pytest

from ddccanet import (
    ConfigError,
    CorruptModelError,
    ModelArtifact,
    fit,
    load_model,
    parse_config_text,
    save_model,
)
from ddccanet.patches import PatchGeometry
from ddccanet.solver import FilterBank, FilterLayer

BASE_CONFIG = """
# smoke settings
view.recipe = lbp_plus_gray
net.layers = 2
layer1.filters = 4
layer2.filters = 3
patch.l1 = 5
patch.l2 = 5
batch.size = 16
encode.block_h = 8
encode.block_w = 8
"""


def test_parse_config_defaults_and_layers():
    cfg = parse_config_text(BASE_CONFIG)
    assert cfg.net.layers[0].filters == 4
    assert cfg.net.layers[1].filters == 3
    assert cfg.net.layers[0].geom == PatchGeometry(5, 5, stride=1, padding="zero_same")
    assert cfg.net.batch.batch_size == 16
    assert cfg.net.epsilon == 1e-4
    assert cfg.exec.threads == 1 and cfg.exec.deterministic is True
    assert cfg.clf_kind == "nearest_neighbor"
    assert cfg.clf_lambda is None  # auto


def test_parse_config_layer_overrides():
    cfg = parse_config_text(BASE_CONFIG + "layer2.patch.l1 = 3\nlayer2.patch.l2 = 3\n")
    assert cfg.net.layers[0].geom.l1 == 5
    assert cfg.net.layers[1].geom == PatchGeometry(3, 3)


def test_parse_config_rejects_unknown_key():
    with pytest.raises(ConfigError):
        parse_config_text(BASE_CONFIG + "nonsense.key = 1\n")


def test_parse_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        parse_config_text(BASE_CONFIG.replace("layer1.filters = 4", "layer1.filters = 0"))
    with pytest.raises(ConfigError):
        parse_config_text(BASE_CONFIG.replace("batch.size = 16", "batch.size = zero"))
    with pytest.raises(ConfigError):
        parse_config_text(BASE_CONFIG + "exec.deterministic = maybe\n")
    with pytest.raises(ConfigError):
        parse_config_text(BASE_CONFIG + "moments.epsilon = -1\n")


def test_parse_config_requires_patch_size():
    with pytest.raises(ConfigError):
        parse_config_text("net.layers = 1\nlayer1.filters = 2\nencode.block_h = 4\nencode.block_w = 4\n")


def test_parse_config_missing_manifest_file():
    with pytest.raises(ConfigError):
        parse_config_text(BASE_CONFIG + "data.train_manifest = missing.csv\n")
    # but snapshot reparsing tolerates it
    cfg = parse_config_text(BASE_CONFIG + "data.train_manifest = missing.csv\n", require_files=False)
    assert cfg.train_manifest is not None


def test_parse_config_duplicate_key():
    with pytest.raises(ConfigError):
        parse_config_text(BASE_CONFIG + "patch.l1 = 3\n")


def test_snapshot_reparses_to_same_config():
    cfg = parse_config_text(BASE_CONFIG)
    text = "\n".join(f"{k} = {v}" for k, v in cfg.snapshot().items())
    again = parse_config_text(text, require_files=False)
    assert again.net == cfg.net
    assert again.encoder == cfg.encoder
    assert again.recipe == cfg.recipe
    assert again.snapshot() == cfg.snapshot()


def _artifact(rng, kind="nearest_neighbor"):
    geom = PatchGeometry(3, 3)
    layers = tuple(
        FilterLayer(
            filters1=rng.standard_normal((2, 3, 3)),
            filters2=rng.standard_normal((2, 3, 3)),
            geom=geom,
            center=True,
        )
        for _ in range(2)
    )
    x = rng.standard_normal((6, 5))
    y = np.array([0, 1, 0, 1, 0, 1])
    clf = fit(x, y, kind=kind, lam=None if kind == "nearest_neighbor" else 0.3)
    snapshot = parse_config_text(BASE_CONFIG).snapshot()
    return ModelArtifact(
        snapshot=snapshot,
        bank=FilterBank(layers=layers),
        classifier=clf,
        label_map={9: 0, 4: 1},
    )


def test_model_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    artifact = _artifact(rng)
    path = tmp_path / "model.ddcca"
    save_model(artifact, path)
    back = load_model(path)
    assert back.snapshot == artifact.snapshot
    for la, lb in zip(back.bank.layers, artifact.bank.layers):
        assert np.array_equal(la.filters1, lb.filters1)
        assert np.array_equal(la.filters2, lb.filters2)
        assert la.geom == lb.geom and la.center == lb.center
    assert np.array_equal(back.classifier.train_features, artifact.classifier.train_features)
    assert np.array_equal(back.classifier.train_labels, artifact.classifier.train_labels)
    assert back.label_map == {9: 0, 4: 1}


def test_model_round_trip_ridge(tmp_path):
    rng = np.random.default_rng(1)
    artifact = _artifact(rng, kind="ridge_one_vs_all")
    path = tmp_path / "model.ddcca"
    save_model(artifact, path)
    back = load_model(path)
    assert np.array_equal(back.classifier.weights, artifact.classifier.weights)
    assert back.classifier.lam == artifact.classifier.lam


def test_model_save_is_deterministic(tmp_path):
    rng = np.random.default_rng(2)
    artifact = _artifact(rng)
    save_model(artifact, tmp_path / "a")
    save_model(artifact, tmp_path / "b")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_corrupted_model_fails_checksum(tmp_path):
    rng = np.random.default_rng(3)
    path = tmp_path / "model.ddcca"
    save_model(_artifact(rng), path)
    raw = bytearray(path.read_bytes())
    flip = raw.index(b"filters 2"[0], 200)
    raw[flip] ^= 0x01
    path.write_bytes(bytes(raw))
    with pytest.raises(CorruptModelError):
        load_model(path)


def test_truncated_model_rejected(tmp_path):
    rng = np.random.default_rng(4)
    path = tmp_path / "model.ddcca"
    save_model(_artifact(rng), path)
    path.write_bytes(path.read_bytes()[:100])
    with pytest.raises(CorruptModelError):
        load_model(path)
