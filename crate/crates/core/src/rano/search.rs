//! Shared search core for the bidimensional measurements.
//!
//! The optimized path and the exhaustive oracle run the exact same
//! feasibility rules (inscription sampling, angle window, tie-breaking);
//! they differ only in the candidate endpoint set (in-plane boundary pixels
//! vs every set pixel) and in the oracle's pixel-count guard. Length and
//! direction are always computed from integer index deltas scaled by the
//! in-plane spacing, so whole-voxel translations and mirrorings cannot
//! perturb any comparison.

use crate::error::{Error, Result};
use crate::volume::{ComponentLabeling, Dims};

pub(crate) const ORACLE_PIXEL_GUARD: usize = 4096;

/// One in-plane 8-connected region of a 3D component's cross-section.
#[derive(Debug, Clone)]
pub(crate) struct SliceRegion {
    pub slice: usize,
    x0: i64,
    y0: i64,
    w: usize,
    h: usize,
    set: Vec<bool>,
    /// Global pixel coordinates, sorted by (x, y).
    pub pixels: Vec<(u32, u32)>,
    /// Subset of `pixels` with some 8-neighbor outside the region.
    pub boundary: Vec<(u32, u32)>,
}

impl SliceRegion {
    #[inline]
    pub fn is_set_global(&self, x: i64, y: i64) -> bool {
        let lx = x - self.x0;
        let ly = y - self.y0;
        lx >= 0
            && ly >= 0
            && (lx as usize) < self.w
            && (ly as usize) < self.h
            && self.set[lx as usize + self.w * ly as usize]
    }

    /// Upper bound on any chord length between pixel centers of this region.
    pub fn diag_mm(&self, dx: f64, dy: f64) -> f64 {
        let ddx = (self.w - 1) as f64 * dx;
        let ddy = (self.h - 1) as f64 * dy;
        (ddx * ddx + ddy * ddy).sqrt()
    }
}

/// Splits one component's slice cross-sections into 8-connected regions,
/// ordered by (slice, smallest pixel).
pub(crate) fn component_slice_regions(
    dims: Dims,
    labeling: &ComponentLabeling,
    component_id: u32,
) -> Vec<SliceRegion> {
    // Gather the component's pixels per slice.
    let mut per_slice: Vec<Vec<(u32, u32)>> = vec![Vec::new(); dims.nz];
    for (i, &id) in labeling.ids().iter().enumerate() {
        if id == component_id {
            let (x, y, z) = dims.coords(i);
            per_slice[z].push((x as u32, y as u32));
        }
    }

    let mut regions = Vec::new();
    for (z, pixels) in per_slice.iter().enumerate() {
        if pixels.is_empty() {
            continue;
        }
        regions.extend(split_plane_regions(z, pixels));
    }
    regions
}

/// 8-connected labeling of one plane's pixel set into [`SliceRegion`]s,
/// sorted by smallest (x, y) pixel.
pub(crate) fn split_plane_regions(slice: usize, pixels: &[(u32, u32)]) -> Vec<SliceRegion> {
    let min_x = pixels.iter().map(|p| p.0).min().unwrap() as i64;
    let min_y = pixels.iter().map(|p| p.1).min().unwrap() as i64;
    let max_x = pixels.iter().map(|p| p.0).max().unwrap() as i64;
    let max_y = pixels.iter().map(|p| p.1).max().unwrap() as i64;
    let w = (max_x - min_x + 1) as usize;
    let h = (max_y - min_y + 1) as usize;

    let mut plane = vec![false; w * h];
    for &(x, y) in pixels {
        plane[(x as i64 - min_x) as usize + w * (y as i64 - min_y) as usize] = true;
    }

    let mut region_of = vec![u32::MAX; w * h];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for start in 0..plane.len() {
        if !plane[start] || region_of[start] != u32::MAX {
            continue;
        }
        let id = count;
        count += 1;
        region_of[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (lx, ly) = ((i % w) as i64, (i / w) as i64);
            for oy in -1..=1i64 {
                for ox in -1..=1i64 {
                    if ox == 0 && oy == 0 {
                        continue;
                    }
                    let (nx, ny) = (lx + ox, ly + oy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let ni = nx as usize + w * ny as usize;
                    if plane[ni] && region_of[ni] == u32::MAX {
                        region_of[ni] = id;
                        stack.push(ni);
                    }
                }
            }
        }
    }

    let mut buckets: Vec<Vec<(u32, u32)>> = vec![Vec::new(); count as usize];
    for &(x, y) in pixels {
        let li = (x as i64 - min_x) as usize + w * (y as i64 - min_y) as usize;
        buckets[region_of[li] as usize].push((x, y));
    }

    let mut regions: Vec<SliceRegion> = buckets
        .into_iter()
        .map(|mut px| {
            px.sort_unstable();
            let rminx = px.iter().map(|p| p.0).min().unwrap() as i64;
            let rminy = px.iter().map(|p| p.1).min().unwrap() as i64;
            let rmaxx = px.iter().map(|p| p.0).max().unwrap() as i64;
            let rmaxy = px.iter().map(|p| p.1).max().unwrap() as i64;
            let rw = (rmaxx - rminx + 1) as usize;
            let rh = (rmaxy - rminy + 1) as usize;
            let mut set = vec![false; rw * rh];
            for &(x, y) in &px {
                set[(x as i64 - rminx) as usize + rw * (y as i64 - rminy) as usize] = true;
            }
            let mut region = SliceRegion {
                slice,
                x0: rminx,
                y0: rminy,
                w: rw,
                h: rh,
                set,
                pixels: px,
                boundary: Vec::new(),
            };
            region.boundary = region
                .pixels
                .iter()
                .copied()
                .filter(|&(x, y)| {
                    let (xi, yi) = (x as i64, y as i64);
                    for oy in -1..=1i64 {
                        for ox in -1..=1i64 {
                            if (ox != 0 || oy != 0) && !region.is_set_global(xi + ox, yi + oy) {
                                return true;
                            }
                        }
                    }
                    false
                })
                .collect();
            region
        })
        .collect();
    regions.sort_by_key(|r| r.pixels[0]);
    regions
}

/// Canonical chord length: integer index deltas scaled by spacing.
#[inline]
pub(crate) fn chord_length_mm(p0: (u32, u32), p1: (u32, u32), dx: f64, dy: f64) -> f64 {
    let ddx = (p1.0 as f64 - p0.0 as f64) * dx;
    let ddy = (p1.1 as f64 - p0.1 as f64) * dy;
    (ddx * ddx + ddy * ddy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Chord {
    pub p0: (u32, u32),
    pub p1: (u32, u32),
    pub len: f64,
}

impl Chord {
    pub fn new(a: (u32, u32), b: (u32, u32), dx: f64, dy: f64) -> Chord {
        let (p0, p1) = if a <= b { (a, b) } else { (b, a) };
        Chord {
            p0,
            p1,
            len: chord_length_mm(p0, p1, dx, dy),
        }
    }

    /// Unit direction in physical coordinates. Callers never ask for the
    /// direction of a degenerate chord.
    pub fn unit_dir(&self, dx: f64, dy: f64) -> (f64, f64) {
        debug_assert!(self.len > 0.0);
        let ux = (self.p1.0 as f64 - self.p0.0 as f64) * dx / self.len;
        let uy = (self.p1.1 as f64 - self.p0.1 as f64) * dy / self.len;
        (ux, uy)
    }

    pub fn endpoint_key(&self) -> ((u32, u32), (u32, u32)) {
        (self.p0, self.p1)
    }
}

/// Two segments sit within the perpendicularity window exactly when the
/// absolute cosine of their angle is at most `cos_tol` (the window is
/// inclusive at both edges).
#[inline]
pub(crate) fn angle_feasible(u: (f64, f64), v: (f64, f64), cos_tol: f64) -> bool {
    (u.0 * v.0 + u.1 * v.1).abs() <= cos_tol
}

/// Nearest-pixel walk along the segment. A sample landing exactly halfway
/// between pixel centers accepts either neighbor, which keeps the test
/// symmetric under translation and mirroring.
pub(crate) fn segment_inscribed(
    is_set: &impl Fn(i64, i64) -> bool,
    p0: (u32, u32),
    p1: (u32, u32),
    dx: f64,
    dy: f64,
    step_mm: f64,
) -> bool {
    let len = chord_length_mm(p0, p1, dx, dy);
    if len == 0.0 {
        return is_set(p0.0 as i64, p0.1 as i64);
    }
    let n = (len / step_mm).ceil().max(1.0) as usize;
    let (fx0, fy0) = (p0.0 as f64, p0.1 as f64);
    let (fx1, fy1) = (p1.0 as f64, p1.1 as f64);
    for k in 0..=n {
        let t = k as f64 / n as f64;
        let x = fx0 + t * (fx1 - fx0);
        let y = fy0 + t * (fy1 - fy0);
        if !sample_hits(is_set, x, y) {
            return false;
        }
    }
    true
}

#[inline]
fn sample_hits(is_set: &impl Fn(i64, i64) -> bool, x: f64, y: f64) -> bool {
    let fx = x.floor();
    let fy = y.floor();
    let tie_x = x - fx == 0.5;
    let tie_y = y - fy == 0.5;
    match (tie_x, tie_y) {
        (false, false) => is_set(x.round() as i64, y.round() as i64),
        (true, false) => {
            let j = y.round() as i64;
            is_set(fx as i64, j) || is_set(fx as i64 + 1, j)
        }
        (false, true) => {
            let i = x.round() as i64;
            is_set(i, fy as i64) || is_set(i, fy as i64 + 1)
        }
        (true, true) => {
            let (i, j) = (fx as i64, fy as i64);
            is_set(i, j) || is_set(i + 1, j) || is_set(i, j + 1) || is_set(i + 1, j + 1)
        }
    }
}

/// Which endpoints are admitted as chord candidates.
#[derive(Debug, Clone, Copy)]
pub(crate) enum CandidateSet {
    /// In-plane boundary pixels only (the production pruning).
    Boundary,
    /// Every set pixel, with a per-region pixel guard (the oracle).
    AllPixels,
}

pub(crate) struct SearchContext {
    pub dx: f64,
    pub dy: f64,
    pub step_mm: f64,
    pub cos_tol: f64,
    pub min_len_mm: f64,
    pub candidates: CandidateSet,
}

impl SearchContext {
    fn candidate_pixels<'a>(&self, region: &'a SliceRegion) -> &'a [(u32, u32)] {
        match self.candidates {
            CandidateSet::Boundary => &region.boundary,
            CandidateSet::AllPixels => &region.pixels,
        }
    }

    /// All candidate chords of a region, optionally filtered to the minimum
    /// measurable length, sorted by descending length with ascending
    /// endpoint tie-break.
    fn sorted_chords(&self, region: &SliceRegion, min_len: Option<f64>) -> Vec<Chord> {
        let pts = self.candidate_pixels(region);
        let mut chords = Vec::with_capacity(pts.len() * (pts.len().saturating_sub(1)) / 2);
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let c = Chord::new(pts[i], pts[j], self.dx, self.dy);
                if min_len.is_none_or(|m| c.len >= m) {
                    chords.push(c);
                }
            }
        }
        chords.sort_unstable_by(|a, b| {
            b.len
                .total_cmp(&a.len)
                .then_with(|| a.endpoint_key().cmp(&b.endpoint_key()))
        });
        chords
    }

    fn inscribed(&self, region: &SliceRegion, c: &Chord) -> bool {
        segment_inscribed(
            &|x, y| region.is_set_global(x, y),
            c.p0,
            c.p1,
            self.dx,
            self.dy,
            self.step_mm,
        )
    }
}

/// A chord located in a specific slice.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PlacedChord {
    pub slice: usize,
    pub chord: Chord,
}

impl PlacedChord {
    fn key(&self) -> (usize, (u32, u32), (u32, u32)) {
        (self.slice, self.chord.p0, self.chord.p1)
    }
}

fn better_major(a: &PlacedChord, b: &PlacedChord) -> bool {
    a.chord.len > b.chord.len || (a.chord.len == b.chord.len && a.key() < b.key())
}

/// A feasible perpendicular pair; `major` is the longer chord (endpoint
/// order decides between equals).
#[derive(Debug, Clone, Copy)]
pub(crate) struct PlacedPair {
    pub slice: usize,
    pub major: Chord,
    pub perp: Chord,
    pub product: f64,
}

impl PlacedPair {
    fn new(slice: usize, a: Chord, b: Chord) -> PlacedPair {
        let (major, perp) = if a.len > b.len
            || (a.len == b.len && a.endpoint_key() <= b.endpoint_key())
        {
            (a, b)
        } else {
            (b, a)
        };
        PlacedPair {
            slice,
            major,
            perp,
            product: major.len * perp.len,
        }
    }

    fn key(&self) -> (usize, (u32, u32), (u32, u32), (u32, u32), (u32, u32)) {
        (self.slice, self.major.p0, self.major.p1, self.perp.p0, self.perp.p1)
    }
}

fn better_pair(a: &PlacedPair, b: &PlacedPair) -> bool {
    a.product > b.product || (a.product == b.product && a.key() < b.key())
}

/// Raw result of measuring one component.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ComponentMeasure {
    pub major: Option<PlacedChord>,
    pub perp: Option<Chord>,
    pub slice: Option<usize>,
    pub product: f64,
    pub measurable: bool,
}

fn guard_regions(regions: &[SliceRegion], ctx: &SearchContext) -> Result<()> {
    if matches!(ctx.candidates, CandidateSet::AllPixels) {
        for r in regions {
            if r.pixels.len() > ORACLE_PIXEL_GUARD {
                return Err(Error::OracleGuardExceeded {
                    pixels: r.pixels.len(),
                    limit: ORACLE_PIXEL_GUARD,
                });
            }
        }
    }
    Ok(())
}

/// Sequential search: longest inscribed chord over all regions, then the
/// longest inscribed chord within the perpendicularity window in the same
/// slice and region.
pub(crate) fn measure_diameters(
    regions: &[SliceRegion],
    ctx: &SearchContext,
) -> Result<ComponentMeasure> {
    guard_regions(regions, ctx)?;

    let mut best: Option<(usize, PlacedChord)> = None; // (region index, chord)
    for (ri, region) in regions.iter().enumerate() {
        if let Some((_, b)) = &best {
            if region.diag_mm(ctx.dx, ctx.dy) < b.chord.len {
                continue;
            }
        }
        for c in self::SearchContext::sorted_chords(ctx, region, None) {
            if let Some((_, b)) = &best {
                if c.len < b.chord.len {
                    break;
                }
            }
            if ctx.inscribed(region, &c) {
                let placed = PlacedChord {
                    slice: region.slice,
                    chord: c,
                };
                if best.as_ref().is_none_or(|(_, b)| better_major(&placed, b)) {
                    best = Some((ri, placed));
                }
                break; // chords are sorted: nothing later in this region beats this
            }
        }
    }

    // Degenerate fallback: no proper chord is inscribed anywhere, so the
    // longest "segment" is a single set pixel (regions are ordered, so the
    // first region's first pixel is the global tie-break winner).
    let (region_idx, major) = match best {
        Some((ri, b)) => (ri, b),
        None => {
            let p = regions[0].pixels[0];
            let placed = PlacedChord {
                slice: regions[0].slice,
                chord: Chord {
                    p0: p,
                    p1: p,
                    len: 0.0,
                },
            };
            return Ok(ComponentMeasure {
                major: Some(placed),
                perp: None,
                slice: None,
                product: 0.0,
                measurable: false,
            });
        }
    };

    let mut perp: Option<Chord> = None;
    if major.chord.len > 0.0 {
        let region = &regions[region_idx];
        let u = major.chord.unit_dir(ctx.dx, ctx.dy);
        for c in ctx.sorted_chords(region, None) {
            if c.len == 0.0 {
                break;
            }
            if !angle_feasible(c.unit_dir(ctx.dx, ctx.dy), u, ctx.cos_tol) {
                continue;
            }
            if ctx.inscribed(region, &c) {
                perp = Some(c);
                break;
            }
        }
    }

    let measurable = major.chord.len >= ctx.min_len_mm
        && perp.is_some_and(|p| p.len >= ctx.min_len_mm);
    let product = match (measurable, &perp) {
        (true, Some(p)) => major.chord.len * p.len,
        _ => 0.0,
    };
    Ok(ComponentMeasure {
        slice: Some(major.slice).filter(|_| measurable),
        major: Some(major),
        perp,
        product,
        measurable,
    })
}

/// Joint search: the inscribed, mutually-perpendicular-within-tolerance pair
/// of at-least-minimum-length chords maximizing the length product, over all
/// slices and regions of the component.
pub(crate) fn measure_product(
    regions: &[SliceRegion],
    ctx: &SearchContext,
) -> Result<ComponentMeasure> {
    guard_regions(regions, ctx)?;

    let mut best: Option<PlacedPair> = None;
    for region in regions {
        let bound = best.as_ref().map(|b| b.product).unwrap_or(0.0);
        let diag = region.diag_mm(ctx.dx, ctx.dy);
        if diag < ctx.min_len_mm || (bound > 0.0 && diag * diag < bound) {
            continue;
        }
        if let Some(pair) = best_pair_in_region(region, ctx, bound) {
            if best.as_ref().is_none_or(|b| better_pair(&pair, b)) {
                best = Some(pair);
            }
        }
    }

    Ok(match best {
        Some(pair) => ComponentMeasure {
            major: Some(PlacedChord {
                slice: pair.slice,
                chord: pair.major,
            }),
            perp: Some(pair.perp),
            slice: Some(pair.slice),
            product: pair.product,
            measurable: true,
        },
        None => ComponentMeasure {
            major: None,
            perp: None,
            slice: None,
            product: 0.0,
            measurable: false,
        },
    })
}

/// Exact pruned pair search within one region. Chords are visited in
/// descending length order; a chord whose squared length falls strictly
/// below the best product seen so far can no longer participate in any
/// improving or tying pair, so the scan stops there.
fn best_pair_in_region(
    region: &SliceRegion,
    ctx: &SearchContext,
    outer_bound: f64,
) -> Option<PlacedPair> {
    let chords = ctx.sorted_chords(region, Some(ctx.min_len_mm));
    let mut inscribed: Vec<(Chord, (f64, f64))> = Vec::new();
    let mut best: Option<PlacedPair> = None;

    for c in chords {
        let bound = best.as_ref().map(|b| b.product).unwrap_or(outer_bound);
        if c.len * c.len < bound {
            break;
        }
        if !ctx.inscribed(region, &c) {
            continue;
        }
        let dir_c = c.unit_dir(ctx.dx, ctx.dy);
        for (t, dir_t) in &inscribed {
            let bound = best.as_ref().map(|b| b.product).unwrap_or(outer_bound);
            if c.len * t.len < bound {
                break;
            }
            if angle_feasible(dir_c, *dir_t, ctx.cos_tol) {
                let pair = PlacedPair::new(region.slice, *t, c);
                if best.as_ref().is_none_or(|b| better_pair(&pair, b)) {
                    best = Some(pair);
                }
            }
        }
        inscribed.push((c, dir_c));
    }
    // Pairs exactly at the outer bound still matter for cross-region
    // tie-breaking, which `better_pair` resolves at the caller.
    best
}
