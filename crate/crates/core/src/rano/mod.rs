//! Automated bidimensional measurements over enhancing-tumor masks.
//!
//! Two algorithms are provided. The sequential variant finds the longest
//! inscribed segment (major diameter) across all axial slices of each 3D
//! component and then the longest inscribed segment within ±5° of
//! perpendicular in the same slice and in-plane region. The joint variant
//! directly maximizes the product of two mutually-perpendicular (within
//! tolerance) inscribed segments over every slice of the component, which is
//! less sensitive to small contour alterations. Per lesion, both diameters
//! must reach the minimum measurable length; the up-to-five largest lesion
//! products are summed.
//!
//! An exhaustive oracle ([`rano_oracle`]) enumerates every set-pixel
//! endpoint pair under the same feasibility rules and defines ground truth
//! for the optimized search, whose candidate endpoints are restricted to
//! in-plane boundary pixels.

mod search;

use crate::error::{Error, Result};
use crate::volume::{connected_components, BinaryMask, Connectivity, Mask2D, Spacing};

use search::{CandidateSet, ComponentMeasure, SearchContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RanoAlgorithm {
    /// Longest diameter first, then the best perpendicular partner.
    Diameters,
    /// Joint maximization of the diameter product.
    Product,
}

impl RanoAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            RanoAlgorithm::Diameters => "diameters",
            RanoAlgorithm::Product => "product",
        }
    }
}

/// Measurement rule constants.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RanoParams {
    /// Both diameters must be at least this long (mm) for a lesion to be
    /// measurable.
    pub min_diameter_mm: f64,
    /// Half-width of the perpendicularity window around 90°, inclusive.
    pub angle_tolerance_deg: f64,
    /// At most this many largest lesion products are summed.
    pub max_lesions: usize,
    /// Sampling step for the inscription test; defaults to a quarter of the
    /// smaller in-plane spacing, which cannot step over a one-pixel gap.
    pub inscription_step_mm: Option<f64>,
}

impl Default for RanoParams {
    fn default() -> Self {
        RanoParams {
            min_diameter_mm: 10.0,
            angle_tolerance_deg: 5.0,
            max_lesions: 5,
            inscription_step_mm: None,
        }
    }
}

impl RanoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_diameter_mm.is_finite() && self.min_diameter_mm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "min_diameter_mm must be finite and > 0, got {}",
                self.min_diameter_mm
            )));
        }
        if !(self.angle_tolerance_deg > 0.0 && self.angle_tolerance_deg < 45.0) {
            return Err(Error::InvalidParameter(format!(
                "angle_tolerance_deg must be in (0, 45), got {}",
                self.angle_tolerance_deg
            )));
        }
        if self.max_lesions == 0 {
            return Err(Error::InvalidParameter("max_lesions must be >= 1".into()));
        }
        if let Some(s) = self.inscription_step_mm {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "inscription_step_mm must be finite and > 0, got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn step_for(&self, spacing: &Spacing) -> f64 {
        self.inscription_step_mm
            .unwrap_or(0.25 * spacing.dx.min(spacing.dy))
    }

    /// `|cos angle| <= cos(90° - tolerance)` is the inclusive
    /// perpendicularity test.
    pub fn cos_tolerance(&self) -> f64 {
        (90.0 - self.angle_tolerance_deg).to_radians().cos()
    }
}

/// An in-plane segment between two voxel centers, in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment2D {
    pub p0_mm: [f64; 2],
    pub p1_mm: [f64; 2],
    pub length_mm: f64,
}

/// One 3D component's measurement. When the lesion is not measurable the
/// product is zero and no segments are reported.
#[derive(Debug, Clone, PartialEq)]
pub struct LesionMeasurement {
    pub component_id: u32,
    pub slice_index: Option<usize>,
    pub major: Option<Segment2D>,
    pub perpendicular: Option<Segment2D>,
    pub product_mm2: f64,
    pub measurable: bool,
}

/// Full measurement of an ET mask: one lesion per 3D component, sorted by
/// descending product (component id breaks ties), plus the sum of the
/// up-to-`max_lesions` largest measurable products.
#[derive(Debug, Clone, PartialEq)]
pub struct RanoMeasurement {
    pub algorithm: RanoAlgorithm,
    pub lesions: Vec<LesionMeasurement>,
    pub sum_product_mm2: f64,
}

/// True when every sample point along the segment (step `inscription_step_mm`)
/// maps to a set pixel of `region` by nearest voxel center.
pub fn is_inscribed(
    region: &Mask2D,
    p0_px: (usize, usize),
    p1_px: (usize, usize),
    inscription_step_mm: f64,
) -> bool {
    let is_set = |x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < region.nx && (y as usize) < region.ny
            && region.get(x as usize, y as usize)
    };
    search::segment_inscribed(
        &is_set,
        (p0_px.0 as u32, p0_px.1 as u32),
        (p1_px.0 as u32, p1_px.1 as u32),
        region.dx,
        region.dy,
        inscription_step_mm,
    )
}

/// True when two segments (given by their physical-space direction deltas)
/// lie within the inclusive perpendicularity window.
pub fn perpendicular_within_tolerance(
    a_delta_mm: [f64; 2],
    b_delta_mm: [f64; 2],
    angle_tolerance_deg: f64,
) -> bool {
    let norm = |v: [f64; 2]| {
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        [v[0] / n, v[1] / n]
    };
    let u = norm(a_delta_mm);
    let v = norm(b_delta_mm);
    let cos_tol = (90.0 - angle_tolerance_deg).to_radians().cos();
    search::angle_feasible((u[0], u[1]), (v[0], v[1]), cos_tol)
}

fn context(
    spacing: &Spacing,
    params: &RanoParams,
    candidates: CandidateSet,
) -> SearchContext {
    SearchContext {
        dx: spacing.dx,
        dy: spacing.dy,
        step_mm: params.step_for(spacing),
        cos_tol: params.cos_tolerance(),
        min_len_mm: params.min_diameter_mm,
        candidates,
    }
}

fn segment_from(chord: &search::Chord, spacing: &Spacing) -> Segment2D {
    Segment2D {
        p0_mm: [chord.p0.0 as f64 * spacing.dx, chord.p0.1 as f64 * spacing.dy],
        p1_mm: [chord.p1.0 as f64 * spacing.dx, chord.p1.1 as f64 * spacing.dy],
        length_mm: chord.len,
    }
}

fn lesion_from(id: u32, m: ComponentMeasure, spacing: &Spacing) -> LesionMeasurement {
    if m.measurable {
        let major = m.major.expect("measurable lesion has a major diameter");
        let perp = m.perp.expect("measurable lesion has a perpendicular diameter");
        LesionMeasurement {
            component_id: id,
            slice_index: m.slice,
            major: Some(segment_from(&major.chord, spacing)),
            perpendicular: Some(segment_from(&perp, spacing)),
            product_mm2: m.product,
            measurable: true,
        }
    } else {
        LesionMeasurement {
            component_id: id,
            slice_index: None,
            major: None,
            perpendicular: None,
            product_mm2: 0.0,
            measurable: false,
        }
    }
}

fn measure_regions(
    regions: &[search::SliceRegion],
    ctx: &SearchContext,
    algorithm: RanoAlgorithm,
) -> Result<ComponentMeasure> {
    match algorithm {
        RanoAlgorithm::Diameters => search::measure_diameters(regions, ctx),
        RanoAlgorithm::Product => search::measure_product(regions, ctx),
    }
}

fn rano_impl(
    et: &BinaryMask,
    algorithm: RanoAlgorithm,
    params: &RanoParams,
    connectivity: Connectivity,
    candidates: CandidateSet,
) -> Result<RanoMeasurement> {
    params.validate()?;
    let spacing = et.spacing();
    let ctx = context(&spacing, params, candidates);
    let labeling = connected_components(et, connectivity);

    let mut lesions = Vec::with_capacity(labeling.component_count as usize);
    for id in 1..=labeling.component_count {
        let regions = search::component_slice_regions(et.dims(), &labeling, id);
        let measure = measure_regions(&regions, &ctx, algorithm)?;
        lesions.push(lesion_from(id, measure, &spacing));
    }

    lesions.sort_by(|a, b| {
        b.product_mm2
            .total_cmp(&a.product_mm2)
            .then_with(|| a.component_id.cmp(&b.component_id))
    });
    let sum_product_mm2 = lesions
        .iter()
        .filter(|l| l.measurable)
        .take(params.max_lesions)
        .map(|l| l.product_mm2)
        .sum();

    Ok(RanoMeasurement {
        algorithm,
        lesions,
        sum_product_mm2,
    })
}

/// Measures every 3D ET component with the optimized (boundary-candidate)
/// search. Components are found at the given connectivity; in-plane regions
/// are always 8-connected.
pub fn rano(
    et: &BinaryMask,
    algorithm: RanoAlgorithm,
    params: &RanoParams,
    connectivity: Connectivity,
) -> Result<RanoMeasurement> {
    rano_impl(et, algorithm, params, connectivity, CandidateSet::Boundary)
}

/// Exhaustive reference: identical feasibility rules, candidate endpoints
/// drawn from every set pixel. Errors when any slice region exceeds the
/// 4096-set-pixel guard.
pub fn rano_oracle(
    et: &BinaryMask,
    algorithm: RanoAlgorithm,
    params: &RanoParams,
    connectivity: Connectivity,
) -> Result<RanoMeasurement> {
    rano_impl(et, algorithm, params, connectivity, CandidateSet::AllPixels)
}

fn measure_single_component(
    region3d: &BinaryMask,
    algorithm: RanoAlgorithm,
    params: &RanoParams,
) -> Result<LesionMeasurement> {
    params.validate()?;
    // The mask is taken as one lesion regardless of connectivity: gather all
    // set pixels per slice.
    let dims = region3d.dims();
    let mut per_slice: Vec<Vec<(u32, u32)>> = vec![Vec::new(); dims.nz];
    for (x, y, z) in region3d.iter_set() {
        per_slice[z].push((x as u32, y as u32));
    }
    let mut regions = Vec::new();
    for (z, pixels) in per_slice.iter().enumerate() {
        if !pixels.is_empty() {
            regions.extend(search::split_plane_regions(z, pixels));
        }
    }
    if regions.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot measure an empty lesion mask".into(),
        ));
    }
    let spacing = region3d.spacing();
    let ctx = context(&spacing, params, CandidateSet::Boundary);
    let measure = measure_regions(&regions, &ctx, algorithm)?;
    Ok(lesion_from(1, measure, &spacing))
}

/// Sequential (major-then-perpendicular) measurement of a single lesion mask.
pub fn measure_lesion_diameters(
    region3d: &BinaryMask,
    params: &RanoParams,
) -> Result<LesionMeasurement> {
    measure_single_component(region3d, RanoAlgorithm::Diameters, params)
}

/// Joint product-maximizing measurement of a single lesion mask.
pub fn measure_lesion_product(
    region3d: &BinaryMask,
    params: &RanoParams,
) -> Result<LesionMeasurement> {
    measure_single_component(region3d, RanoAlgorithm::Product, params)
}

#[cfg(test)]
mod tests;
