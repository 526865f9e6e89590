//! Unit tests for the bidimensional measurements, checked against a
//! deliberately naive independent oracle (plain nested loops over every
//! endpoint pair, dense inscription sampling, no sorting or pruning).

use super::*;
use crate::volume::{BinaryMask, Connectivity, Dims, Mask2D, Spacing};

fn sp1() -> Spacing {
    Spacing::isotropic(1.0).unwrap()
}

fn mask_from_slices(
    nx: usize,
    ny: usize,
    spacing: Spacing,
    slices: &[&[(usize, usize)]],
) -> BinaryMask {
    let dims = Dims::new(nx, ny, slices.len().max(1)).unwrap();
    let mut m = BinaryMask::empty(dims, spacing);
    for (z, px) in slices.iter().enumerate() {
        for &(x, y) in *px {
            m.set(x, y, z, true);
        }
    }
    m
}

fn disk_pixels(cx: f64, cy: f64, r: f64, nx: usize, ny: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..ny {
        for x in 0..nx {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r * r {
                out.push((x, y));
            }
        }
    }
    out
}

fn rect_pixels(x0: usize, y0: usize, w: usize, h: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            out.push((x, y));
        }
    }
    out
}

/// Naive single-slice oracle over a 2D pixel set: every unordered endpoint
/// pair, dense sampling at `step / 8`, angle by acos of |cos|.
struct NaiveOracle {
    mask: Mask2D,
    step: f64,
}

#[derive(Clone, Copy, Debug)]
struct NaiveChord {
    p0: (usize, usize),
    p1: (usize, usize),
    len: f64,
}

impl NaiveOracle {
    fn new(mask: Mask2D, params: &RanoParams) -> Self {
        let step = params
            .inscription_step_mm
            .unwrap_or(0.25 * mask.dx.min(mask.dy));
        NaiveOracle { mask, step }
    }

    fn inscribed(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        // Independent dense walk: fixed 8x oversampling, nearest-pixel with
        // the same half-tie rule (either neighbor allowed).
        let (dx, dy) = (self.mask.dx, self.mask.dy);
        let (x0, y0) = (a.0 as f64 * dx, a.1 as f64 * dy);
        let (x1, y1) = (b.0 as f64 * dx, b.1 as f64 * dy);
        let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        let n = ((len / (self.step / 8.0)).ceil() as usize).max(1);
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let xi = (x0 + t * (x1 - x0)) / dx;
            let yi = (y0 + t * (y1 - y0)) / dy;
            if !self.hits(xi, yi) {
                return false;
            }
        }
        true
    }

    fn hits(&self, x: f64, y: f64) -> bool {
        let set = |i: i64, j: i64| {
            i >= 0
                && j >= 0
                && (i as usize) < self.mask.nx
                && (j as usize) < self.mask.ny
                && self.mask.get(i as usize, j as usize)
        };
        let candidates = |v: f64| {
            let f = v.floor();
            if v - f == 0.5 {
                vec![f as i64, f as i64 + 1]
            } else {
                vec![v.round() as i64]
            }
        };
        candidates(x)
            .into_iter()
            .any(|i| candidates(y).into_iter().any(|j| set(i, j)))
    }

    fn chords(&self, min_len: Option<f64>) -> Vec<NaiveChord> {
        let px: Vec<(usize, usize)> = self.mask.iter_set().collect();
        let mut out = Vec::new();
        for i in 0..px.len() {
            for j in i + 1..px.len() {
                let len = (((px[j].0 as f64 - px[i].0 as f64) * self.mask.dx).powi(2)
                    + ((px[j].1 as f64 - px[i].1 as f64) * self.mask.dy).powi(2))
                .sqrt();
                if min_len.is_none_or(|m| len >= m) && self.inscribed(px[i], px[j]) {
                    out.push(NaiveChord {
                        p0: px[i],
                        p1: px[j],
                        len,
                    });
                }
            }
        }
        out
    }

    fn angle_ok(&self, a: &NaiveChord, b: &NaiveChord, tol_deg: f64) -> bool {
        let va = (
            (a.p1.0 as f64 - a.p0.0 as f64) * self.mask.dx,
            (a.p1.1 as f64 - a.p0.1 as f64) * self.mask.dy,
        );
        let vb = (
            (b.p1.0 as f64 - b.p0.0 as f64) * self.mask.dx,
            (b.p1.1 as f64 - b.p0.1 as f64) * self.mask.dy,
        );
        let cos = (va.0 * vb.0 + va.1 * vb.1) / (a.len * b.len);
        let angle = cos.abs().clamp(0.0, 1.0).acos().to_degrees();
        angle >= 90.0 - tol_deg - 1e-9
    }

    /// (major, perp) under the sequential rule.
    fn diameters(&self, params: &RanoParams) -> Option<(NaiveChord, Option<NaiveChord>)> {
        let all = self.chords(None);
        let major = all
            .iter()
            .copied()
            .max_by(|a, b| {
                a.len
                    .total_cmp(&b.len)
                    .then_with(|| (b.p0, b.p1).cmp(&(a.p0, a.p1)))
            })?;
        let perp = all
            .iter()
            .copied()
            .filter(|c| self.angle_ok(c, &major, params.angle_tolerance_deg))
            .max_by(|a, b| {
                a.len
                    .total_cmp(&b.len)
                    .then_with(|| (b.p0, b.p1).cmp(&(a.p0, a.p1)))
            });
        Some((major, perp))
    }

    /// Best product pair under the joint rule.
    fn product(&self, params: &RanoParams) -> Option<(NaiveChord, NaiveChord, f64)> {
        let chords = self.chords(Some(params.min_diameter_mm));
        let mut best: Option<(NaiveChord, NaiveChord, f64)> = None;
        for i in 0..chords.len() {
            for j in i + 1..chords.len() {
                if !self.angle_ok(&chords[i], &chords[j], params.angle_tolerance_deg) {
                    continue;
                }
                let p = chords[i].len * chords[j].len;
                if best.is_none_or(|(_, _, bp)| p > bp) {
                    best = Some((chords[i], chords[j], p));
                }
            }
        }
        best
    }
}

fn single_slice_mask2d(m: &BinaryMask, z: usize) -> Mask2D {
    m.slice(z).unwrap()
}

#[test]
fn degenerate_segment_is_inscribed() {
    let m = Mask2D::from_fn(4, 4, 1.0, 1.0, |x, y| x == 2 && y == 2);
    assert!(is_inscribed(&m, (2, 2), (2, 2), 0.25));
}

#[test]
fn rectangle_diagonal_is_inscribed() {
    let m = Mask2D::from_fn(12, 6, 1.0, 1.0, |x, y| (1..11).contains(&x) && (1..5).contains(&y));
    assert!(is_inscribed(&m, (1, 1), (10, 4), 0.25));
}

#[test]
fn chord_across_c_shape_notch_is_rejected() {
    // Annulus with the right side opened: a chord across the opening leaves
    // the region. Cross-checked against a dense sampling walk.
    let m = Mask2D::from_fn(21, 21, 1.0, 1.0, |x, y| {
        let (dx, dy) = (x as f64 - 10.0, y as f64 - 10.0);
        let r2 = dx * dx + dy * dy;
        let in_ring = (25.0..=100.0).contains(&r2);
        let in_notch = dx > 0.0 && dy.abs() <= 2.0;
        in_ring && !in_notch
    });
    assert!(m.get(14, 14) && m.get(14, 6));
    // Chord between the two jaw tips crosses the notch.
    assert!(!is_inscribed(&m, (14, 6), (14, 14), 0.25));
    // Dense oracle agrees.
    let params = RanoParams::default();
    let oracle = NaiveOracle::new(m.clone(), &params);
    assert!(!oracle.inscribed((14, 6), (14, 14)));
    // A chord along the intact left arc stays inside.
    assert!(is_inscribed(&m, (10, 2), (2, 10), 0.25) == oracle.inscribed((10, 2), (2, 10)));
}

#[test]
fn single_voxel_lesion_is_unmeasurable() {
    let m = mask_from_slices(5, 5, sp1(), &[&[(2, 2)]]);
    for f in [measure_lesion_diameters, measure_lesion_product] {
        let l = f(&m, &RanoParams::default()).unwrap();
        assert!(!l.measurable);
        assert_eq!(l.product_mm2, 0.0);
        assert!(l.major.is_none() && l.perpendicular.is_none());
        assert!(l.slice_index.is_none());
    }
}

#[test]
fn digital_disk_measures_near_its_diameter() {
    // Radius 10 mm at 1 mm spacing; the extreme pixel pair is exactly 20 mm.
    let px = disk_pixels(16.0, 16.0, 10.0, 33, 33);
    let m = mask_from_slices(33, 33, sp1(), &[&px]);
    let params = RanoParams::default();
    for (f, name) in [
        (measure_lesion_diameters as fn(&BinaryMask, &RanoParams) -> crate::Result<LesionMeasurement>, "diameters"),
        (measure_lesion_product, "product"),
    ] {
        let l = f(&m, &params).unwrap();
        assert!(l.measurable, "{name}");
        let major = l.major.unwrap();
        let perp = l.perpendicular.unwrap();
        assert!((major.length_mm - 20.0).abs() < 1.0, "{name}: {}", major.length_mm);
        assert!((perp.length_mm - 20.0).abs() < 1.0, "{name}: {}", perp.length_mm);
        assert!((l.product_mm2 - 400.0).abs() / 400.0 < 0.05, "{name}: {}", l.product_mm2);
    }
}

#[test]
fn rect_41x11_matches_naive_oracle_diameters() {
    let px = rect_pixels(1, 1, 41, 11);
    let m = mask_from_slices(44, 14, sp1(), &[&px]);
    let params = RanoParams::default();
    let l = measure_lesion_diameters(&m, &params).unwrap();
    let oracle = NaiveOracle::new(single_slice_mask2d(&m, 0), &params);
    let (omajor, operp) = oracle.diameters(&params).unwrap();
    let major = l.major.unwrap();
    let operp = operp.unwrap();
    assert_eq!(major.length_mm, omajor.len);
    assert_eq!(l.perpendicular.unwrap().length_mm, operp.len);
    // Raster diagonal of the 41x11 rectangle: sqrt(40^2 + 10^2).
    assert_eq!(omajor.len, (40.0f64 * 40.0 + 10.0 * 10.0).sqrt());
    assert_eq!(l.product_mm2, omajor.len * operp.len);
}

#[test]
fn square_21x21_product_matches_naive_oracle() {
    let px = rect_pixels(2, 2, 21, 21);
    let m = mask_from_slices(25, 25, sp1(), &[&px]);
    let params = RanoParams::default();
    let l = measure_lesion_product(&m, &params).unwrap();
    let oracle = NaiveOracle::new(single_slice_mask2d(&m, 0), &params);
    let (_, _, oprod) = oracle.product(&params).unwrap();
    assert_eq!(l.product_mm2, oprod);
    // The two raster diagonals are an exactly-perpendicular feasible pair.
    assert!(l.product_mm2 >= 800.0 - 1e-9, "{}", l.product_mm2);
}

#[test]
fn product_variant_dominates_diameters_variant() {
    let shapes: Vec<Vec<(usize, usize)>> = vec![
        rect_pixels(1, 1, 25, 12),
        disk_pixels(14.0, 14.0, 11.0, 30, 30),
        // L-shaped union.
        {
            let mut v = rect_pixels(1, 1, 25, 8);
            v.extend(rect_pixels(1, 8, 8, 18));
            v.sort_unstable();
            v.dedup();
            v
        },
    ];
    for px in &shapes {
        let m = mask_from_slices(32, 32, sp1(), &[px]);
        let d = measure_lesion_diameters(&m, &RanoParams::default()).unwrap();
        let p = measure_lesion_product(&m, &RanoParams::default()).unwrap();
        assert!(p.product_mm2 >= d.product_mm2);
    }
}

#[test]
fn empty_mask_yields_empty_measurement() {
    let m = BinaryMask::empty(Dims::new(8, 8, 3).unwrap(), sp1());
    for algo in [RanoAlgorithm::Diameters, RanoAlgorithm::Product] {
        let r = rano(&m, algo, &RanoParams::default(), Connectivity::TwentySix).unwrap();
        assert_eq!(r.sum_product_mm2, 0.0);
        assert!(r.lesions.is_empty());
    }
}

#[test]
fn two_disjoint_disks_sum_their_products() {
    let d1 = disk_pixels(12.0, 12.0, 8.0, 64, 28);
    let d2 = disk_pixels(44.0, 13.0, 10.0, 64, 28);
    let m = mask_from_slices(64, 28, sp1(), &[&[d1.as_slice(), d2.as_slice()].concat()]);
    let params = RanoParams::default();
    let r = rano(&m, RanoAlgorithm::Product, &params, Connectivity::TwentySix).unwrap();
    assert_eq!(r.lesions.len(), 2);
    assert!(r.lesions.iter().all(|l| l.measurable));
    let expected: f64 = r.lesions.iter().map(|l| l.product_mm2).sum();
    assert_eq!(r.sum_product_mm2, expected);
    // Each lesion equals its isolated oracle measurement.
    for (px, id_hint) in [(d1, "left"), (d2, "right")] {
        let isolated = mask_from_slices(64, 28, sp1(), &[&px]);
        let alone = rano_oracle(
            &isolated,
            RanoAlgorithm::Product,
            &params,
            Connectivity::TwentySix,
        )
        .unwrap();
        assert!(
            r.lesions
                .iter()
                .any(|l| l.product_mm2 == alone.sum_product_mm2),
            "{id_hint} lesion mismatch"
        );
    }
}

#[test]
fn six_lesions_sum_only_the_five_largest() {
    // Six disjoint disks of increasing radius on separate slices.
    let radii = [6.0, 6.5, 7.0, 7.5, 8.0, 8.5];
    let slices: Vec<Vec<(usize, usize)>> = radii
        .iter()
        .map(|&r| disk_pixels(12.0, 12.0, r, 25, 25))
        .collect();
    let refs: Vec<&[(usize, usize)]> = slices.iter().map(|v| v.as_slice()).collect();
    // Separate slices would 26-connect; leave an empty slice between disks.
    let mut interleaved: Vec<&[(usize, usize)]> = Vec::new();
    for r in refs {
        interleaved.push(r);
        interleaved.push(&[]);
    }
    let m = mask_from_slices(25, 25, sp1(), &interleaved);
    let params = RanoParams::default();
    let r = rano(&m, RanoAlgorithm::Diameters, &params, Connectivity::TwentySix).unwrap();
    assert_eq!(r.lesions.len(), 6);
    assert!(r.lesions.iter().all(|l| l.measurable));
    let mut products: Vec<f64> = r.lesions.iter().map(|l| l.product_mm2).collect();
    // Lesions are reported sorted by descending product already.
    let sorted = {
        let mut s = products.clone();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    };
    assert_eq!(products, sorted);
    products.sort_by(|a, b| b.total_cmp(a));
    let expected: f64 = products.iter().take(5).sum();
    assert_eq!(r.sum_product_mm2, expected);
    assert!(r.sum_product_mm2 < products.iter().sum::<f64>());
}

#[test]
fn max_lesions_parameter_is_honored() {
    let radii = [6.0, 7.0, 8.0];
    let slices: Vec<Vec<(usize, usize)>> = radii
        .iter()
        .map(|&r| disk_pixels(10.0, 10.0, r, 21, 21))
        .collect();
    let mut interleaved: Vec<&[(usize, usize)]> = Vec::new();
    for s in &slices {
        interleaved.push(s.as_slice());
        interleaved.push(&[]);
    }
    let m = mask_from_slices(21, 21, sp1(), &interleaved);
    let params = RanoParams {
        max_lesions: 2,
        ..RanoParams::default()
    };
    let r = rano(&m, RanoAlgorithm::Diameters, &params, Connectivity::TwentySix).unwrap();
    let mut products: Vec<f64> = r.lesions.iter().map(|l| l.product_mm2).collect();
    products.sort_by(|a, b| b.total_cmp(a));
    assert_eq!(r.sum_product_mm2, products[0] + products[1]);
}

#[test]
fn oracle_guard_rejects_oversized_regions() {
    // A 70x70 solid square exceeds the 4096-pixel guard.
    let px = rect_pixels(0, 0, 70, 70);
    let m = mask_from_slices(70, 70, sp1(), &[&px]);
    let err = rano_oracle(
        &m,
        RanoAlgorithm::Diameters,
        &RanoParams::default(),
        Connectivity::TwentySix,
    );
    assert!(matches!(err, Err(crate::Error::OracleGuardExceeded { .. })));
    // The optimized path is unaffected.
    assert!(rano(&m, RanoAlgorithm::Diameters, &RanoParams::default(), Connectivity::TwentySix).is_ok());
}

#[test]
fn params_are_validated() {
    let m = mask_from_slices(4, 4, sp1(), &[&[(1, 1)]]);
    for bad in [
        RanoParams { min_diameter_mm: 0.0, ..RanoParams::default() },
        RanoParams { angle_tolerance_deg: 45.0, ..RanoParams::default() },
        RanoParams { angle_tolerance_deg: -1.0, ..RanoParams::default() },
        RanoParams { max_lesions: 0, ..RanoParams::default() },
        RanoParams { inscription_step_mm: Some(0.0), ..RanoParams::default() },
    ] {
        assert!(rano(&m, RanoAlgorithm::Diameters, &bad, Connectivity::TwentySix).is_err());
    }
}

#[test]
fn perpendicular_window_is_inclusive_at_the_boundary() {
    let tol = 5.0;
    // Exactly 85°: the |cos| equals the threshold bit-for-bit.
    let u = [1.0, 0.0];
    let v = [85f64.to_radians().cos(), 85f64.to_radians().sin()];
    assert!(perpendicular_within_tolerance(u, v, tol));
    // 84.9° falls outside.
    let w = [84.9f64.to_radians().cos(), 84.9f64.to_radians().sin()];
    assert!(!perpendicular_within_tolerance(u, w, tol));
    // 95° mirrors 85°; 95.1° is out.
    let r95 = [95f64.to_radians().cos(), 95f64.to_radians().sin()];
    assert!(perpendicular_within_tolerance(u, r95, tol));
    let r951 = [95.1f64.to_radians().cos(), 95.1f64.to_radians().sin()];
    assert!(!perpendicular_within_tolerance(u, r951, tol));
    // Integer-geometry spot checks: atan(1/10) = 84.29° from vertical -> out;
    // atan(1/20) = 87.14° -> in.
    assert!(!perpendicular_within_tolerance([10.0, 0.0], [1.0, 10.0], tol));
    assert!(perpendicular_within_tolerance([10.0, 0.0], [1.0, 20.0], tol));
}

#[test]
fn min_diameter_boundary_is_inclusive() {
    // A 1x11-pixel bar at 1 mm spacing has a 10.0 mm major diameter but no
    // perpendicular partner; pair it with a thick cross arm instead.
    // Use a plus-shape: 11 px horizontal bar and 11 px vertical bar.
    let mut px = Vec::new();
    for x in 2..13 {
        px.push((x, 7));
    }
    for y in 2..13 {
        px.push((7, y));
    }
    px.sort_unstable();
    px.dedup();
    let m = mask_from_slices(16, 16, sp1(), &[&px]);
    let l = measure_lesion_diameters(&m, &RanoParams::default()).unwrap();
    // Both arms are exactly 10 mm: measurable at the inclusive boundary.
    assert!(l.measurable);
    assert_eq!(l.major.unwrap().length_mm, 10.0);
    assert_eq!(l.perpendicular.unwrap().length_mm, 10.0);
    assert_eq!(l.product_mm2, 100.0);

    // Shrink one arm below 10 mm: unmeasurable.
    let mut short = Vec::new();
    for x in 2..13 {
        short.push((x, 7));
    }
    for y in 3..13 {
        short.push((7, y));
    }
    short.sort_unstable();
    short.dedup();
    let m2 = mask_from_slices(16, 16, sp1(), &[&short]);
    let l2 = measure_lesion_diameters(&m2, &RanoParams::default()).unwrap();
    assert!(!l2.measurable);
}

#[test]
fn monotone_measurability_under_threshold() {
    let px = disk_pixels(8.0, 8.0, 6.2, 17, 17);
    let m = mask_from_slices(17, 17, sp1(), &[&px]);
    let at = |min: f64| {
        let p = RanoParams {
            min_diameter_mm: min,
            ..RanoParams::default()
        };
        (
            measure_lesion_diameters(&m, &p).unwrap().measurable,
            measure_lesion_product(&m, &p).unwrap().measurable,
        )
    };
    assert_eq!(at(10.0), (true, true));
    assert_eq!(at(5.0), (true, true));
    assert_eq!(at(13.0), (false, false));
}

#[test]
fn measurement_reports_slice_of_best_plane() {
    // Component spanning three slices; the middle one is widest.
    let small = disk_pixels(10.0, 10.0, 5.0, 21, 21);
    let big = disk_pixels(10.0, 10.0, 9.0, 21, 21);
    let m = mask_from_slices(21, 21, sp1(), &[&small, &big, &small]);
    let l = measure_lesion_diameters(&m, &RanoParams::default()).unwrap();
    assert_eq!(l.slice_index, Some(1));
    let lp = measure_lesion_product(&m, &RanoParams::default()).unwrap();
    assert_eq!(lp.slice_index, Some(1));
}

#[test]
fn anisotropic_inplane_spacing_scales_lengths() {
    // 21-pixel bar along x at dx = 0.5 is 10 mm long exactly.
    let px: Vec<(usize, usize)> = (0..21).flat_map(|x| (0..21).map(move |y| (x, y))).collect();
    let m = mask_from_slices(21, 21, Spacing::new(0.5, 1.0, 1.0).unwrap(), &[&px]);
    let l = measure_lesion_diameters(&m, &RanoParams::default()).unwrap();
    assert!(l.measurable);
    // Major is the raster diagonal in mm space: sqrt(10^2 + 20^2).
    let major = l.major.unwrap();
    assert_eq!(major.length_mm, (10.0f64 * 10.0 + 20.0 * 20.0).sqrt());
}
