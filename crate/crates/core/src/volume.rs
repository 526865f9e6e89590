//! Voxel-grid data model: label volumes, per-class binary masks, physical
//! spacing, slice extraction, connected components and boundary extraction.
//!
//! All operations here are pure functions over immutable inputs. Component
//! ids are assigned deterministically (lexicographic order of each
//! component's smallest `(x, y, z)` coordinate) so results never depend on
//! traversal or thread scheduling.

use crate::error::{Error, Result};

/// Physical voxel spacing in millimeters per voxel along x, y (in-plane)
/// and z (slice axis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spacing {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Spacing {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(dx) && ok(dy) && ok(dz) {
            Ok(Spacing { dx, dy, dz })
        } else {
            Err(Error::InvalidSpacing { dx, dy, dz })
        }
    }

    pub fn isotropic(s: f64) -> Result<Self> {
        Spacing::new(s, s, s)
    }

    /// Volume of a single voxel in mm^3.
    pub fn voxel_volume_mm3(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    /// Relative comparison, used when two files must share a grid.
    pub fn approx_eq(&self, other: &Spacing, rel_tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= rel_tol * a.abs().max(b.abs());
        close(self.dx, other.dx) && close(self.dy, other.dy) && close(self.dz, other.dz)
    }
}

/// Grid extents. The voxel at `(x, y, z)` lives at linear index
/// `x + nx * (y + ny * z)` (x fastest, matching NIfTI on-disk order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidDims { nx, ny, nz });
        }
        nx.checked_mul(ny)
            .and_then(|v| v.checked_mul(nz))
            .ok_or(Error::InvalidDims { nx, ny, nz })?;
        Ok(Dims { nx, ny, nz })
    }

    /// Total voxel count. Never zero: dims are validated to be >= 1 on
    /// every axis.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.nx && y < self.ny && z < self.nz);
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let x = index % self.nx;
        let y = (index / self.nx) % self.ny;
        let z = index / (self.nx * self.ny);
        (x, y, z)
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }
}

/// Tumor sub-region classes carried by a label volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TumorClass {
    /// Contrast-enhancing tumor.
    Et,
    /// Peritumoral edema (T2/FLAIR abnormality).
    Ed,
    /// Surgical resection cavity.
    Cavity,
}

impl TumorClass {
    pub const ALL: [TumorClass; 3] = [TumorClass::Et, TumorClass::Ed, TumorClass::Cavity];

    pub fn name(&self) -> &'static str {
        match self {
            TumorClass::Et => "et",
            TumorClass::Ed => "ed",
            TumorClass::Cavity => "cavity",
        }
    }
}

impl std::str::FromStr for TumorClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "et" => Ok(TumorClass::Et),
            "ed" => Ok(TumorClass::Ed),
            "cavity" => Ok(TumorClass::Cavity),
            other => Err(Error::UnknownClassName(other.to_string())),
        }
    }
}

impl std::fmt::Display for TumorClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Mapping from class to stored label value. The default follows the
/// 0/1/2/3 = background/ET/ED/cavity convention; BraTS-style encodings can
/// be bridged by remapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LabelSemantics {
    pub background: u8,
    pub et: u8,
    pub ed: u8,
    pub cavity: u8,
}

impl Default for LabelSemantics {
    fn default() -> Self {
        LabelSemantics {
            background: 0,
            et: 1,
            ed: 2,
            cavity: 3,
        }
    }
}

impl LabelSemantics {
    pub fn label_for(&self, class: TumorClass) -> u8 {
        match class {
            TumorClass::Et => self.et,
            TumorClass::Ed => self.ed,
            TumorClass::Cavity => self.cavity,
        }
    }

    pub fn is_known(&self, label: u8) -> bool {
        label == self.background || label == self.et || label == self.ed || label == self.cavity
    }

    pub fn validate(&self) -> Result<()> {
        let mut values = [self.background, self.et, self.ed, self.cavity];
        values.sort_unstable();
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(
                "label semantics must map background/et/ed/cavity to distinct values".into(),
            ));
        }
        Ok(())
    }
}

/// Dense 3D grid of class labels with physical spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    dims: Dims,
    spacing: Spacing,
    semantics: LabelSemantics,
    labels: Vec<u8>,
}

impl LabelVolume {
    /// Builds a volume, enforcing that the label buffer matches the dims and
    /// that every stored label is either background or a mapped class.
    pub fn new(
        dims: Dims,
        spacing: Spacing,
        labels: Vec<u8>,
        semantics: LabelSemantics,
    ) -> Result<Self> {
        semantics.validate()?;
        if labels.len() != dims.len() {
            return Err(Error::LabelLengthMismatch {
                expected: dims.len(),
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| !semantics.is_known(l)) {
            return Err(Error::UnknownLabelValue { label: bad });
        }
        Ok(LabelVolume {
            dims,
            spacing,
            semantics,
            labels,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn semantics(&self) -> LabelSemantics {
        self.semantics
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn label_at(&self, x: usize, y: usize, z: usize) -> u8 {
        self.labels[self.dims.index(x, y, z)]
    }

    /// Binary mask of the voxels carrying `class`'s label.
    pub fn class_mask(&self, class: TumorClass) -> BinaryMask {
        let wanted = self.semantics.label_for(class);
        let data = self.labels.iter().map(|&l| l == wanted).collect();
        BinaryMask {
            dims: self.dims,
            spacing: self.spacing,
            data,
        }
    }

    /// Replaces every voxel of `class` that is unset in `keep` with background.
    pub(crate) fn retain_class(&self, class: TumorClass, keep: &BinaryMask) -> LabelVolume {
        let wanted = self.semantics.label_for(class);
        let mut labels = self.labels.clone();
        for (i, l) in labels.iter_mut().enumerate() {
            if *l == wanted && !keep.data[i] {
                *l = self.semantics.background;
            }
        }
        LabelVolume {
            dims: self.dims,
            spacing: self.spacing,
            semantics: self.semantics,
            labels,
        }
    }
}

/// One class's voxel membership over a label volume's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    dims: Dims,
    spacing: Spacing,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(dims: Dims, spacing: Spacing) -> Self {
        BinaryMask {
            dims,
            spacing,
            data: vec![false; dims.len()],
        }
    }

    pub fn from_fn(dims: Dims, spacing: Spacing, f: impl Fn(usize, usize, usize) -> bool) -> Self {
        let mut data = vec![false; dims.len()];
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    data[dims.index(x, y, z)] = f(x, y, z);
                }
            }
        }
        BinaryMask {
            dims,
            spacing,
            data,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.dims.index(x, y, z)]
    }

    #[inline]
    pub fn get_index(&self, index: usize) -> bool {
        self.data[index]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.dims.index(x, y, z);
        self.data[i] = value;
    }

    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Set voxel coordinates in scan order (z, then y, then x fastest).
    pub fn set_voxels(&mut self) -> Vec<(usize, usize, usize)> {
        self.iter_set().collect()
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let dims = self.dims;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| dims.coords(i))
    }

    /// Physical volume of the mask: set-voxel count times voxel volume.
    pub fn volume_mm3(&self) -> f64 {
        self.count_set() as f64 * self.spacing.voxel_volume_mm3()
    }

    /// 2D membership of plane `z = k`, carrying the in-plane spacing.
    pub fn slice(&self, k: usize) -> Result<Mask2D> {
        if k >= self.dims.nz {
            return Err(Error::SliceOutOfRange {
                index: k,
                nz: self.dims.nz,
            });
        }
        let (nx, ny) = (self.dims.nx, self.dims.ny);
        let base = self.dims.index(0, 0, k);
        Ok(Mask2D {
            nx,
            ny,
            dx: self.spacing.dx,
            dy: self.spacing.dy,
            data: self.data[base..base + nx * ny].to_vec(),
        })
    }

    /// Set voxels with at least one unset 6-neighbor or lying on the array
    /// border, in scan order.
    pub fn boundary_voxels(&self) -> Vec<(usize, usize, usize)> {
        let d = self.dims;
        let mut out = Vec::new();
        for z in 0..d.nz {
            for y in 0..d.ny {
                for x in 0..d.nx {
                    if !self.data[d.index(x, y, z)] {
                        continue;
                    }
                    let on_border = x == 0
                        || y == 0
                        || z == 0
                        || x == d.nx - 1
                        || y == d.ny - 1
                        || z == d.nz - 1;
                    let exposed = on_border
                        || !self.data[d.index(x - 1, y, z)]
                        || !self.data[d.index(x + 1, y, z)]
                        || !self.data[d.index(x, y - 1, z)]
                        || !self.data[d.index(x, y + 1, z)]
                        || !self.data[d.index(x, y, z - 1)]
                        || !self.data[d.index(x, y, z + 1)];
                    if exposed {
                        out.push((x, y, z));
                    }
                }
            }
        }
        out
    }

    /// Labels the mask's connected components under the given connectivity.
    pub fn connected_components(&self, connectivity: Connectivity) -> ComponentLabeling {
        connected_components(self, connectivity)
    }
}

/// 2D in-plane mask extracted from one slice of a [`BinaryMask`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mask2D {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    data: Vec<bool>,
}

impl Mask2D {
    pub fn from_fn(
        nx: usize,
        ny: usize,
        dx: f64,
        dy: f64,
        f: impl Fn(usize, usize) -> bool,
    ) -> Self {
        let mut data = vec![false; nx * ny];
        for y in 0..ny {
            for x in 0..nx {
                data[x + nx * y] = f(x, y);
            }
        }
        Mask2D {
            nx,
            ny,
            dx,
            dy,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[x + self.nx * y]
    }

    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nx = self.nx;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % nx, i / nx))
    }
}

/// 3D neighborhood used for component labeling and adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Connectivity {
    Six,
    Eighteen,
    TwentySix,
}

impl Connectivity {
    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::InvalidParameter(format!(
                "connectivity must be 6, 18 or 26, got {other}"
            ))),
        }
    }

    pub fn as_u8(&self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// Neighbor offsets for this connectivity.
    pub fn offsets(&self) -> &'static [(i32, i32, i32)] {
        const OFF26: [(i32, i32, i32); 26] = {
            let mut out = [(0, 0, 0); 26];
            let mut n = 0;
            let mut dz = -1;
            while dz <= 1 {
                let mut dy = -1;
                while dy <= 1 {
                    let mut dx = -1;
                    while dx <= 1 {
                        if !(dx == 0 && dy == 0 && dz == 0) {
                            out[n] = (dx, dy, dz);
                            n += 1;
                        }
                        dx += 1;
                    }
                    dy += 1;
                }
                dz += 1;
            }
            out
        };
        const OFF6: [(i32, i32, i32); 6] = [
            (-1, 0, 0),
            (1, 0, 0),
            (0, -1, 0),
            (0, 1, 0),
            (0, 0, -1),
            (0, 0, 1),
        ];
        // 18-connectivity keeps face and edge neighbors (squared offset <= 2).
        const OFF18: [(i32, i32, i32); 18] = {
            let mut out = [(0, 0, 0); 18];
            let mut n = 0;
            let mut i = 0;
            while i < 26 {
                let (dx, dy, dz) = OFF26[i];
                if dx * dx + dy * dy + dz * dz <= 2 {
                    out[n] = (dx, dy, dz);
                    n += 1;
                }
                i += 1;
            }
            out
        };
        match self {
            Connectivity::Six => &OFF6,
            Connectivity::Eighteen => &OFF18,
            Connectivity::TwentySix => &OFF26,
        }
    }
}

/// Connected-component labeling of a binary mask. Component ids are
/// contiguous `1..=component_count`; id 0 means "not in the mask".
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLabeling {
    dims: Dims,
    pub connectivity: Connectivity,
    pub component_count: u32,
    ids: Vec<u32>,
}

impl ComponentLabeling {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    #[inline]
    pub fn id_at(&self, x: usize, y: usize, z: usize) -> u32 {
        self.ids[self.dims.index(x, y, z)]
    }

    /// Voxels of component `id` in scan order.
    pub fn component_voxels(&self, id: u32) -> Vec<(usize, usize, usize)> {
        self.ids
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == id)
            .map(|(i, _)| self.dims.coords(i))
            .collect()
    }
}

/// Deterministic component labeling: ids are assigned in lexicographic order
/// of each component's smallest `(x, y, z)` coordinate.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabeling {
    let dims = mask.dims;
    let offsets = connectivity.offsets();
    let mut ids = vec![0u32; dims.len()];
    let mut next = 0u32;
    // (min coordinate, provisional id) per component
    let mut mins: Vec<((usize, usize, usize), u32)> = Vec::new();
    let mut stack = Vec::new();

    for start in 0..dims.len() {
        if !mask.data[start] || ids[start] != 0 {
            continue;
        }
        next += 1;
        let id = next;
        let mut min_coord = (usize::MAX, usize::MAX, usize::MAX);
        ids[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y, z) = dims.coords(i);
            min_coord = min_coord.min((x, y, z));
            for &(ox, oy, oz) in offsets {
                let nx = x as i64 + ox as i64;
                let ny = y as i64 + oy as i64;
                let nz = z as i64 + oz as i64;
                if nx < 0
                    || ny < 0
                    || nz < 0
                    || nx >= dims.nx as i64
                    || ny >= dims.ny as i64
                    || nz >= dims.nz as i64
                {
                    continue;
                }
                let ni = dims.index(nx as usize, ny as usize, nz as usize);
                if mask.data[ni] && ids[ni] == 0 {
                    ids[ni] = id;
                    stack.push(ni);
                }
            }
        }
        mins.push((min_coord, id));
    }

    // Remap provisional ids so that component 1 has the lexicographically
    // smallest minimum coordinate, component 2 the next, and so on.
    mins.sort_unstable();
    let mut remap = vec![0u32; next as usize + 1];
    for (rank, &(_, old)) in mins.iter().enumerate() {
        remap[old as usize] = rank as u32 + 1;
    }
    for id in ids.iter_mut() {
        if *id != 0 {
            *id = remap[*id as usize];
        }
    }

    ComponentLabeling {
        dims,
        connectivity,
        component_count: next,
        ids,
    }
}
