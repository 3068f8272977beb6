import numpy as np
import pytest

from rirkit import (
    IrTooShortError,
    Material,
    enumerate_images_generic,
    enumerate_images_shoebox,
    image_count,
    intersect,
    make_shoebox,
    render_ir_image,
    validate_image_path,
)
from rirkit.geometry import Ray

from _helpers import brute_force_lattice, five_wall_scene

C = 343.0


class TestShoeboxEnumeration:
    def test_order_zero_is_source_only(self):
        imgs = enumerate_images_shoebox((4, 5, 3), (1, 2, 1.5), 0)
        assert len(imgs) == 1
        np.testing.assert_allclose(imgs[0].position, [1, 2, 1.5])
        assert imgs[0].order == 0 and imgs[0].gain == 1.0

    def test_order_one_has_six_images(self):
        imgs = enumerate_images_shoebox((4, 5, 3), (1, 2, 1.5), 1)
        assert sum(1 for i in imgs if i.order == 1) == 6

    def test_order_two_has_eighteen_images(self):
        imgs = enumerate_images_shoebox((4, 5, 3), (1, 2, 1.5), 2)
        assert sum(1 for i in imgs if i.order == 2) == 18

    @pytest.mark.parametrize("max_order", [1, 2, 3, 4])
    def test_matches_brute_force_mirroring(self, max_order):
        dims, src = (4.0, 5.0, 3.0), (1.1, 2.3, 1.7)
        imgs = enumerate_images_shoebox(dims, src, max_order)
        oracle = brute_force_lattice(dims, src, max_order)
        got = {tuple(np.round(i.position, 9)): i.order for i in imgs}
        assert got == oracle

    def test_gain_is_reflection_product(self):
        alpha = 0.3
        imgs = enumerate_images_shoebox((4, 5, 3), (1, 2, 1.5), 3, absorption=alpha)
        for img in imgs:
            assert img.gain == pytest.approx(np.sqrt(1 - alpha) ** img.order, rel=1e-12)

    def test_source_on_boundary_rejected(self):
        with pytest.raises(ValueError):
            enumerate_images_shoebox((4, 5, 3), (0.0, 2, 1.5), 1)
        with pytest.raises(ValueError):
            enumerate_images_shoebox((4, 5, 3), (1, 2, 3.5), 1)

    def test_reciprocity(self):
        # swapping source and receiver preserves the (distance, gain) multiset
        dims = (4.0, 5.0, 3.0)
        a, b = np.array([1.1, 2.3, 1.7]), np.array([3.2, 0.9, 2.1])
        alpha = 0.25

        def arrivals(src, rec):
            imgs = enumerate_images_shoebox(dims, src, 3, absorption=alpha)
            return sorted((np.linalg.norm(i.position - rec), i.gain) for i in imgs)

        fwd, bwd = arrivals(a, b), arrivals(b, a)
        fs = 16000
        for (d1, g1), (d2, g2) in zip(fwd, bwd):
            assert abs(d1 - d2) / C * fs < 0.5  # within half a sample
            assert g1 == pytest.approx(g2, abs=1e-6)


class TestGenericCandidates:
    def test_counts_match_closed_form(self):
        scene, _, _ = five_wall_scene()
        n = 5
        for d in (1, 2, 3):
            closed = sum(n * (n - 1) ** (k - 1) for k in range(1, d + 1))
            assert image_count(scene, d) == closed
        assert image_count(scene, 1) == 5
        assert image_count(scene, 2) == 25
        assert image_count(scene, 3) == 105

    def test_counts_match_brute_force_sequences(self):
        scene, src, _ = five_wall_scene()
        # brute force: all wall-index sequences without immediate repeats
        seqs = [[w] for w in range(5)]
        total = len(seqs)
        for _ in range(2):
            seqs = [s + [w] for s in seqs for w in range(5) if w != s[-1]]
            total += len(seqs)
        assert image_count(scene, 3) == total

    def test_no_immediate_same_wall_repeat(self):
        scene, src, _ = five_wall_scene()
        for img in enumerate_images_generic(scene, src, 3):
            for a, b in zip(img.generating_surfaces, img.generating_surfaces[1:]):
                assert a != b


class TestPathValidation:
    def test_five_plane_case_rejects_exactly_the_baffle(self):
        # the baffle's mirror path misses its finite extent; the four
        # enclosing walls validate
        scene, src, listener = five_wall_scene()
        first_order = enumerate_images_generic(scene, src, 1)
        results = {img.generating_surfaces[0]: validate_image_path(scene, img, listener) for img in first_order}
        assert results[0] is None
        for wall in (1, 2, 3, 4):
            path = results[wall]
            assert path is not None and len(path) == 1
            # reflection point lies on the generating wall plane
            w = scene.walls[wall]
            assert abs(np.dot(path[0] - w.vertices[0], w.normal)) < 1e-9

    def test_empty_shoebox_lattice_always_valid(self):
        scene = make_shoebox((4, 5, 3))
        listener = np.array([3.0, 1.0, 2.0])
        for img in enumerate_images_shoebox((4, 5, 3), (1, 2, 1.5), 3):
            assert validate_image_path(scene, img, listener) is not None

    def test_lattice_path_delays_equal_unfolded_distance(self):
        # every arrival's delay corresponds to the unfolded path length
        scene = make_shoebox((4, 5, 3))
        listener = np.array([3.0, 1.0, 2.0])
        src = np.array([1.0, 2.0, 1.5])
        for img in enumerate_images_shoebox((4, 5, 3), src, 2):
            pts = validate_image_path(scene, img, listener)
            chain = [src] + pts + [listener]
            folded = sum(np.linalg.norm(b - a) for a, b in zip(chain, chain[1:]))
            unfolded = np.linalg.norm(img.position - listener)
            assert folded == pytest.approx(unfolded, rel=1e-9)

    def test_obstacle_blocks_first_order_path(self):
        # full-height pillar between source and the x=0 wall reflection point
        scene = make_shoebox(
            (4, 5, 3),
            materials=(Material(absorption=0.3),),
            obstacles=[((1.8, 2.2, 0.0), (2.2, 2.8, 3.0))],
        )
        src = np.array([1.0, 2.5, 1.5])
        listener = np.array([3.0, 2.5, 1.5])
        blocked = 0
        valid = 0
        for img in enumerate_images_shoebox((4, 5, 3), src, 1):
            path = validate_image_path(scene, img, listener)
            if path is None:
                blocked += 1
            else:
                valid += 1
        # direct + x-wall images + floor/ceiling cross the pillar; the two
        # y-wall paths go around it
        assert blocked == 5
        assert valid == 2

    def test_reflection_points_verified_by_ray_casts(self):
        # no valid path segment penetrates any surface
        scene, src, listener = five_wall_scene()
        for img in enumerate_images_generic(scene, src, 2):
            path = validate_image_path(scene, img, listener)
            if path is None:
                continue
            chain = [np.asarray(src)] + path + [np.asarray(listener)]
            for a, b in zip(chain, chain[1:]):
                delta = b - a
                length = np.linalg.norm(delta)
                hit = intersect(scene, Ray(a, delta / length))
                assert hit is None or hit.distance >= length - 1e-6


class TestRenderIr:
    def test_free_field_direct_arrival(self):
        scene = make_shoebox((8, 8, 8), materials=(Material(absorption=0.999999),))
        src = np.array([3.0, 4.0, 4.0])
        rec = np.array([5.0, 4.0, 4.0])  # 2 m
        ir = render_ir_image(scene, src, [rec], max_order=0, fs=16000, ir_length=0.05)
        h = ir.samples[0]
        peak_bin = int(np.argmax(np.abs(h)))
        assert peak_bin == 93  # 2/343*16000 = 93.29
        # amplitude recovered from arrival energy (the sinc spreads the peak)
        amp = np.sqrt(float((h**2).sum()))
        assert amp == pytest.approx(1.0 / (8 * np.pi), rel=0.02)
        centroid = float((np.arange(h.size) * h**2).sum() / (h**2).sum())
        assert centroid == pytest.approx(93.29, abs=0.5)

    def test_one_over_distance_amplitude_ratio(self):
        scene = make_shoebox((10, 10, 10), materials=(Material(absorption=0.999999),))
        src = np.array([5.0, 5.0, 5.0])
        ir = render_ir_image(
            scene, src, [src + [1, 0, 0], src + [0, 2, 0]], max_order=0, fs=16000, ir_length=0.05
        )
        a1 = np.sqrt(float((ir.samples[0] ** 2).sum()))
        a2 = np.sqrt(float((ir.samples[1] ** 2).sum()))
        assert a1 / a2 == pytest.approx(2.0, rel=0.01)

    def test_nearest_sample_placement(self):
        scene = make_shoebox((8, 8, 8), materials=(Material(absorption=0.999999),))
        src = np.array([3.0, 4.0, 4.0])
        rec = np.array([5.0, 4.0, 4.0])
        ir = render_ir_image(scene, src, [rec], 0, 16000, 0.05, fractional_delay=False)
        h = ir.samples[0]
        nz = np.nonzero(h)[0]
        assert list(nz) == [93]
        assert h[93] == pytest.approx(1.0 / (8 * np.pi), rel=1e-12)

    def test_t60_round_trip_at_order_40(self):
        from rirkit import estimate_t60, sabine_absorption, schroeder_edc

        dims = (4.0, 5.0, 3.0)
        alpha = sabine_absorption(dims, 0.3)
        scene = make_shoebox(dims, materials=(Material(absorption=alpha),))
        ir = render_ir_image(
            scene,
            np.array([1.2, 3.1, 1.6]),
            [np.array([2.9, 1.4, 1.2])],
            max_order=40,
            fs=16000,
            ir_length=0.45,
        )
        est = estimate_t60(schroeder_edc(ir, 0))
        assert est == pytest.approx(0.3, rel=0.25)

    def test_ir_too_short(self):
        scene = make_shoebox((4, 5, 3))
        with pytest.raises(IrTooShortError):
            render_ir_image(
                scene, np.array([1, 2.5, 1.5]), [np.array([3, 2.5, 1.5])], 0, 16000, 0.004
            )

    def test_render_deterministic(self):
        dims = (4.0, 5.0, 3.0)
        scene = make_shoebox(dims, materials=(Material(absorption=0.4),))
        args = (scene, np.array([1.0, 2.0, 1.5]), [np.array([3.0, 3.0, 2.0])], 10, 16000, 0.2)
        a = render_ir_image(*args)
        b = render_ir_image(*args)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_occluded_render_loses_blocked_arrivals(self):
        dims = (4.0, 5.0, 3.0)
        mat = Material(absorption=0.3)
        free = make_shoebox(dims, materials=(mat,))
        blocked = make_shoebox(dims, materials=(mat,), obstacles=[((1.8, 2.2, 0.0), (2.2, 2.8, 3.0))])
        src = np.array([1.0, 2.5, 1.5])
        rec = np.array([3.0, 2.5, 1.5])
        ir_free = render_ir_image(free, src, [rec], 1, 16000, 0.06)
        ir_blk = render_ir_image(blocked, src, [rec], 1, 16000, 0.06)
        e_free = float((ir_free.samples**2).sum())
        e_blk = float((ir_blk.samples**2).sum())
        assert e_blk < 0.2 * e_free  # direct + 4 of 6 first-order paths gone
        direct_bin = round(2.0 / C * 16000)
        assert np.abs(ir_blk.samples[0, direct_bin - 2 : direct_bin + 3]).max() < 1e-12
