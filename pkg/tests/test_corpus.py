"""Procedural primitives and corpus assembly."""

import json

import numpy as np
import pytest

from graspforge.corpus import (
    TOY_KINDS,
    build_toy_corpus,
    import_corpus,
    make_box,
    make_capsule,
    make_cylinder,
    make_l_prism,
    make_plate,
    make_sphere,
    write_corpus,
)
from graspforge.errors import DataError


class TestPrimitives:
    @pytest.mark.parametrize(
        "mesh,volume",
        [
            (make_box(0.1, 0.08, 0.05), 0.1 * 0.08 * 0.05),
            (make_cylinder(0.02, 0.1, segments=64), np.pi * 0.02**2 * 0.1),
            (make_sphere(0.03, rings=32, segments=48), 4 / 3 * np.pi * 0.03**3),
        ],
    )
    def test_volumes_match_analytic(self, mesh, volume):
        assert abs(mesh.volume() - volume) / volume < 0.02

    def test_all_primitives_watertight_and_orientable(self):
        meshes = [
            make_box(0.1, 0.08, 0.05),
            make_sphere(0.03),
            make_cylinder(0.02, 0.08),
            make_capsule(0.015, 0.05),
            make_l_prism(0.08, 0.1, 0.04, 0.03, 0.04),
            make_plate(0.1, 0.08, 0.005),
        ]
        for mesh in meshes:
            assert mesh.is_watertight()
            assert mesh.is_orientable()
            assert mesh.volume() > 0

    def test_capsule_volume(self):
        r, h = 0.02, 0.06
        mesh = make_capsule(r, h, rings=24, segments=48)
        want = np.pi * r**2 * h + 4 / 3 * np.pi * r**3
        assert abs(mesh.volume() - want) / want < 0.02

    def test_l_prism_volume(self):
        mesh = make_l_prism(0.1, 0.1, 0.05, 0.04, 0.04)
        # L area = full - notch = 0.1*0.1 - (0.1-0.04)*(0.1-0.04)
        want = (0.1 * 0.1 - 0.06 * 0.06) * 0.05
        assert abs(mesh.volume() - want) / want < 1e-9


class TestToyCorpus:
    def test_every_toy_mesh_is_watertight(self):
        entries = build_toy_corpus(24, seed=5)
        assert len(entries) == 24
        kinds = {kind for _, kind, _ in entries}
        assert kinds == set(TOY_KINDS)
        for _, _, mesh in entries:
            assert mesh.is_watertight()

    def test_deterministic_rebuild(self):
        a = build_toy_corpus(12, seed=9)
        b = build_toy_corpus(12, seed=9)
        for (ia, ka, ma), (ib, kb, mb) in zip(a, b):
            assert ia == ib and ka == kb
            assert np.array_equal(ma.vertices, mb.vertices)

    def test_write_corpus_byte_identical(self, tmp_path):
        entries = build_toy_corpus(6, seed=3)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        write_corpus(entries, out_a, seed=3)
        write_corpus(entries, out_b, seed=3)
        man_a = (out_a / "manifest.json").read_bytes()
        man_b = (out_b / "manifest.json").read_bytes()
        assert man_a == man_b
        for mesh_file in sorted((out_a / "meshes").iterdir()):
            twin = out_b / "meshes" / mesh_file.name
            assert mesh_file.read_bytes() == twin.read_bytes()

    def test_manifest_contents(self, tmp_path):
        entries = build_toy_corpus(6, seed=3)
        manifest = write_corpus(entries, tmp_path, seed=3)
        assert manifest["schema"] == 1
        assert manifest["count"] == 6
        for entry in manifest["entries"]:
            assert (tmp_path / entry["path"]).exists()
            assert entry["provenance"] == "original"
            assert entry["watertight"] is True
            assert entry["physical_extent"] > 0

    def test_import_corpus_round_trip(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        from graspforge.geometry import save_mesh

        save_mesh(make_box(0.1, 0.1, 0.1), src / "one.obj")
        save_mesh(make_sphere(0.04), src / "two.obj")
        manifest = import_corpus(src, tmp_path / "out", seed=1)
        assert manifest["count"] == 2
        assert manifest["kind"] == "import"

    def test_import_reports_malformed_files(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        (src / "bad.obj").write_text("v 0 0 0\nf 1 1\n")
        with pytest.raises(DataError, match="bad.obj"):
            import_corpus(src, tmp_path / "out", seed=1)
