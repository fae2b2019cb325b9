import numpy as np

from nona_jdd._exceptions import ShapeMismatchError
from nona_jdd._tensor import Tensor
from nona_jdd.losses import loss_pcl
from nona_jdd.metrics import (
    ImageMetrics,
    MetricsReport,
    delta_e_image,
    luminance,
    psnr,
    ssim,
)
from tests import NonaJddTest


class TestPsnr(NonaJddTest):
    def test_constant_offset(self):
        target = np.full((8, 8, 3), 0.5)
        self.assertAlmostEqual(psnr(target + 0.1, target), 20.0, places=9)

    def test_identical_images_report_the_cap(self):
        image = self.rng(1).uniform(size=(8, 8, 3))
        self.assertEqual(psnr(image, image), 100.0)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeMismatchError):
            psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


class TestSsim(NonaJddTest):
    def test_identical_images(self):
        image = self.rng(2).uniform(size=(24, 24, 3))
        self.assertAlmostEqual(ssim(image, image), 1.0, places=9)

    def test_constant_images(self):
        first, second = np.full((16, 16, 3), 0.25), np.full((16, 16, 3), 0.75)
        expected = (2 * 0.25 * 0.75 + 1e-4) / (0.25 ** 2 + 0.75 ** 2 + 1e-4)
        self.assertAlmostEqual(ssim(first, second), expected, places=6)
        self.assertAlmostEqual(ssim(first, second), 0.6001, places=4)

    def test_noise_lowers_ssim(self):
        rng = self.rng(3)
        image = rng.uniform(size=(32, 32, 3))
        noisy = np.clip(image + rng.normal(0, 0.2, size=image.shape), 0, 1)
        self.assertLess(ssim(noisy, image), 0.9)

    def test_symmetric(self):
        rng = self.rng(4)
        first, second = rng.uniform(size=(16, 16, 3)), rng.uniform(size=(16, 16, 3))
        self.assertAlmostEqual(ssim(first, second), ssim(second, first), places=12)

    def test_image_smaller_than_window(self):
        with self.assertRaises(ShapeMismatchError):
            ssim(np.zeros((10, 10, 3)), np.zeros((10, 10, 3)))

    def test_luminance_weights(self):
        self.assertAlmostEqual(float(luminance(np.array([1.0, 1.0, 1.0]))), 1.0)
        self.assertAlmostEqual(float(luminance(np.array([0.0, 1.0, 0.0]))), 0.587)


class TestDeltaEImage(NonaJddTest):
    def test_zero_on_identical(self):
        image = self.rng(5).uniform(size=(6, 6, 3))
        self.assertEqual(delta_e_image(image, image), 0.0)

    def test_positive_on_different(self):
        image = self.rng(6).uniform(0.2, 0.8, size=(6, 6, 3))
        self.assertGreater(delta_e_image(image[..., ::-1].copy(), image), 1.0)

    def test_matches_the_colour_loss(self):
        rng = self.rng(7)
        first, second = rng.uniform(size=(5, 4, 3)), rng.uniform(size=(5, 4, 3))
        loss = loss_pcl(
            Tensor(np.transpose(first, (2, 0, 1))),
            Tensor(np.transpose(second, (2, 0, 1))),
        )
        self.assertAlmostEqual(delta_e_image(first, second), float(loss.data), places=9)


class TestMetricsReport(NonaJddTest):
    def report(self):
        images = [
            ImageMetrics("a.png", 5.0, 40.0, 0.9, 1.0),
            ImageMetrics("b.png", 5.0, 30.0, 0.8, 3.0),
            ImageMetrics("a.png", 15.0, 25.0, 0.7, 4.0),
        ]
        return MetricsReport.from_images(images, sigmas=[5, 15, 25], pattern="nona")

    def test_one_summary_per_sigma_with_images(self):
        report = self.report()
        self.assertEqual([s.sigma for s in report.summaries], [5.0, 15.0])
        first = report.summaries[0]
        self.assertEqual(first.count, 2)
        self.assertAlmostEqual(first.psnr, 35.0)
        self.assertAlmostEqual(first.ssim, 0.85)
        self.assertAlmostEqual(first.delta_e, 2.0)

    def test_json_roundtrip(self):
        report = self.report()
        loaded = MetricsReport.from_json(report.to_json())
        self.assertEqual(loaded, report)
        self.assertEqual(loaded.meta, {"pattern": "nona"})

    def test_table(self):
        lines = self.report().to_table().splitlines()
        self.assertEqual(len(lines), 4)
        self.assertIn("PSNR", lines[0])
        self.assertEqual(lines[2].split(), ["5", "35.0000", "0.8500", "2.0000", "2"])
