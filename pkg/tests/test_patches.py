import numpy as np

from nona_jdd._exceptions import ConfigError, DataError, EmptyDatasetError
from nona_jdd._utils import read_rgb, write_rgb
from nona_jdd.patches import extract_patches, save_patches
from tests import NonaJddTest


class TestPatchExtraction(NonaJddTest):
    def image(self, directory, name, height, width, seed=0):
        rgb = np.round(self.rng(seed).uniform(size=(height, width, 3)) * 255) / 255
        write_rgb(directory / name, rgb)
        return rgb

    def test_exact_tiling(self):
        directory = self.tmp_dir()
        self.image(directory, "a.png", 256, 256)
        self.assertEqual(len(extract_patches(directory, 128, 128)), 4)

    def test_partial_edges_are_dropped(self):
        directory = self.tmp_dir()
        self.image(directory, "a.png", 300, 300)
        patch_set = extract_patches(directory, 128)
        self.assertEqual(len(patch_set), 4)
        self.assertTrue(all(p.rgb.shape == (128, 128, 3) for p in patch_set))

    def test_patch_equals_crop(self):
        directory = self.tmp_dir()
        rgb = self.image(directory, "a.png", 256, 128)
        patch_set = extract_patches(directory, 128, 128)
        patch = [p for p in patch_set if p.offset == (128, 0)][0]
        np.testing.assert_allclose(patch.rgb, rgb[128:256, 0:128], atol=1e-12)

    def test_order_is_by_path_then_raster(self):
        directory = self.tmp_dir()
        self.image(directory, "b.png", 64, 64, seed=1)
        self.image(directory, "a.png", 64, 64, seed=2)
        patch_set = extract_patches(directory, 32, workers=3)
        self.assertEqual(
            [(p.source.name, p.offset) for p in patch_set],
            [
                ("a.png", (0, 0)),
                ("a.png", (0, 32)),
                ("a.png", (32, 0)),
                ("a.png", (32, 32)),
                ("b.png", (0, 0)),
                ("b.png", (0, 32)),
                ("b.png", (32, 0)),
                ("b.png", (32, 32)),
            ],
        )

    def test_overlapping_stride(self):
        directory = self.tmp_dir()
        self.image(directory, "a.png", 64, 64)
        self.assertEqual(len(extract_patches(directory, 32, stride=16)), 9)

    def test_unreadable_files_are_skipped(self):
        directory = self.tmp_dir()
        self.image(directory, "a.png", 64, 64)
        (directory / "broken.png").write_bytes(b"garbage")
        patch_set = extract_patches(directory, 32)
        self.assertEqual(len(patch_set), 4)

    def test_empty_result(self):
        directory = self.tmp_dir()
        self.image(directory, "small.png", 16, 16)
        with self.assertRaises(EmptyDatasetError):
            extract_patches(directory, 32)

    def test_missing_directory(self):
        with self.assertRaises(DataError):
            extract_patches(self.tmp_dir() / "missing", 32)

    def test_bad_size(self):
        with self.assertRaises(ConfigError):
            extract_patches(self.tmp_dir(), 0)

    def test_stack_and_save(self):
        source = self.tmp_dir()
        self.image(source, "img.png", 64, 32)
        patch_set = extract_patches(source, 32)
        self.assertEqual(patch_set.stack().shape, (2, 32, 32, 3))
        written = save_patches(patch_set, self.tmp_dir() / "out")
        self.assertEqual(
            [p.name for p in written], ["img_00000_00000.png", "img_00032_00000.png"]
        )
        np.testing.assert_allclose(read_rgb(written[1]), patch_set[1].rgb, atol=1e-12)
