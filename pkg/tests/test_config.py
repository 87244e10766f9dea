import json

import numpy as np
import pytest

from jpdkit.config import (artifact_entry, build_camera, build_manifest,
                           build_scene, load_config, parse_config,
                           read_manifest, write_manifest)
from jpdkit.errors import ConfigurationError, FileFormatError
from jpdkit.scenes import grating
from jpdkit.simulate import EmccdCamera, IdealCamera, SpadCamera

GRATING_INI = """\
[scene]
kind = grating
size = 32
period = 5.0
duty = 0.1

[pairs]
sigma = 0.84
rate = 60
frames = 5000

[rng]
seed = 7
"""


def test_parse_fills_defaults():
    cfg = parse_config(GRATING_INI)
    assert cfg.scene["kind"] == "grating"
    assert cfg.scene["size"] == 32
    assert cfg.scene["oversample"] == 8
    assert cfg.pairs["mode"] == "near"
    assert cfg.pairs["sigma"] == 0.84
    assert cfg.camera["profile"] == "ideal"
    assert cfg.processing["band_radius"] == 3
    assert cfg.processing["threshold"] == 0.5
    assert cfg.seed == 7


def test_canonical_text_round_trips():
    cfg = parse_config(GRATING_INI)
    again = parse_config(cfg.text)
    assert again.text == cfg.text
    assert again == cfg
    # only keys applicable to the chosen kind/profile are rendered
    assert "blocks" not in cfg.text
    assert "gain_mean" not in cfg.text
    assert "period = 5.0" in cfg.text


def test_emccd_config_gets_reference_defaults():
    cfg = parse_config(GRATING_INI + "\n[camera]\nprofile = emccd\ngain_cv = 0.7\n")
    reference = EmccdCamera()
    assert cfg.camera["gain_cv"] == 0.7
    assert cfg.camera["gain_mean"] == reference.gain_mean
    assert cfg.camera["read_sigma"] == reference.read_sigma
    assert "gain_mean" in cfg.text
    cam = build_camera(cfg)
    assert isinstance(cam, EmccdCamera)
    assert cam.gain_cv == 0.7


def test_inapplicable_keys_rejected():
    with pytest.raises(ConfigurationError, match="does not apply"):
        parse_config(GRATING_INI + "\n[camera]\nprofile = ideal\ngain_mean = 10\n")
    bad_scene = GRATING_INI.replace("kind = grating", "kind = uniform")
    with pytest.raises(ConfigurationError, match="does not apply"):
        parse_config(bad_scene)


def test_errors_carry_line_numbers():
    bad = GRATING_INI.replace("duty = 0.1", "duty = 1.4")
    with pytest.raises(ConfigurationError, match=r"duty.*line 5"):
        parse_config(bad)
    extra_key = GRATING_INI.replace("frames = 5000",
                                    "frames = 5000\nwavelength = 810")
    with pytest.raises(ConfigurationError, match="unknown setting"):
        parse_config(extra_key)
    with pytest.raises(ConfigurationError, match="unknown section"):
        parse_config(GRATING_INI + "\n[detector]\nx = 1\n")


def test_required_settings():
    with pytest.raises(ConfigurationError, match="kind"):
        parse_config("[scene]\nsize = 16\n")
    with pytest.raises(ConfigurationError, match="size"):
        parse_config("[scene]\nkind = uniform\n")
    with pytest.raises(ConfigurationError, match="required for a grating"):
        parse_config("[scene]\nkind = grating\nsize = 16\nperiod = 4.0\n")


def test_checkerboard_divisibility_checked():
    text = "[scene]\nkind = checkerboard\nsize = 16\nblocks = 3\n"
    with pytest.raises(ConfigurationError, match="divisible"):
        parse_config(text)


def test_noon_requires_near_field():
    text = GRATING_INI.replace(
        "sigma = 0.84", "sigma = 0.84\ninterference = noon\nmode = far")
    with pytest.raises(ConfigurationError, match="near-field"):
        parse_config(text)


def test_overrides():
    cfg = parse_config(GRATING_INI, overrides=["pairs.sigma=0.5", "rng.seed=11"])
    assert cfg.pairs["sigma"] == 0.5
    assert cfg.seed == 11
    with pytest.raises(ConfigurationError, match="no such setting"):
        parse_config(GRATING_INI, overrides=["pairs.bogus=1"])
    with pytest.raises(ConfigurationError, match="section.key=value"):
        parse_config(GRATING_INI, overrides=["sigma0.5"])
    with pytest.raises(ConfigurationError, match="override"):
        parse_config(GRATING_INI, overrides=["pairs.sigma=-1"])


def test_threshold_and_workers_accept_none():
    cfg = parse_config(GRATING_INI +
                       "\n[processing]\nthreshold = none\nworkers = 4\n")
    assert cfg.processing["threshold"] is None
    assert cfg.processing["workers"] == 4
    assert "threshold = none" in cfg.text


def test_build_scene_matches_direct_construction():
    cfg = parse_config(GRATING_INI)
    scene = build_scene(cfg)
    direct = grating(32, 5.0, 0.1)
    assert np.array_equal(scene.magnitude2, direct.magnitude2)
    assert isinstance(build_camera(cfg), IdealCamera)
    spad = parse_config(GRATING_INI + "\n[camera]\nprofile = spad\n")
    assert isinstance(build_camera(spad), SpadCamera)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        load_config(tmp_path / "absent.ini")


def test_manifest_round_trip(tmp_path):
    artifact = tmp_path / "data.bin"
    artifact.write_bytes(b"\x00\x01\x02")
    entry = artifact_entry(artifact, pitch=0.5)
    assert entry["bytes"] == 3
    assert entry["pitch"] == 0.5
    assert len(entry["sha256"]) == 64
    manifest = build_manifest("simulate", {"data.bin": entry},
                              config_text="[scene]\n", seed=7, mode="near")
    path = tmp_path / "manifest.json"
    write_manifest(path, manifest)
    back = read_manifest(path)
    assert back == manifest
    assert back["tool"] == "jpdkit"
    assert back["seed"] == 7
    # canonical rendering: stable key order, no timestamps
    assert path.read_text() == json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    assert "time" not in path.read_text().lower()


def test_manifest_rejects_foreign_files(tmp_path):
    path = tmp_path / "not.json"
    path.write_text("{broken")
    with pytest.raises(FileFormatError, match="JSON"):
        read_manifest(path)
    path.write_text(json.dumps({"tool": "other"}))
    with pytest.raises(FileFormatError, match="manifest"):
        read_manifest(path)
    with pytest.raises(FileFormatError, match="cannot read"):
        read_manifest(tmp_path / "absent.json")
