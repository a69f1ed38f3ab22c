//! Voxel back projection: the scalar reference kernel, the lane-generic
//! optimised kernels, clip masks and image padding.

mod clip;
mod grid;
mod lanes;
mod recip;
mod reference;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use clip::{compute_clip_mask, voxel_contributes, ClipMask};
pub use grid::{ProjectionImage, Volume};
pub use recip::{fast_reciprocal, fast_reciprocal_refined};
pub use reference::backproject_reference;

use crate::error::{Error, Result};
use crate::geometry::{ProjectionMatrix, ReconParams};
use lanes::{
    update_line, Conditional, Exact, Fast, FastRefined, LineContext, LineFn, PaddedGather,
    PaddedPairwise,
};

/// Apron width used for the padded strategies. Truncation of slightly
/// negative coordinates can address column/row -1 and the clamp in the
/// branch-free fetch can address -2.
pub const KERNEL_PAD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LaneWidth {
    X1,
    X4,
    X8,
    X16,
}

impl LaneWidth {
    pub const ALL: [LaneWidth; 4] = [LaneWidth::X1, LaneWidth::X4, LaneWidth::X8, LaneWidth::X16];

    pub fn lanes(self) -> usize {
        match self {
            LaneWidth::X1 => 1,
            LaneWidth::X4 => 4,
            LaneWidth::X8 => 8,
            LaneWidth::X16 => 16,
        }
    }

    pub fn from_lanes(n: usize) -> Result<Self> {
        Ok(match n {
            1 => LaneWidth::X1,
            4 => LaneWidth::X4,
            8 => LaneWidth::X8,
            16 => LaneWidth::X16,
            _ => {
                return Err(Error::invalid(format!(
                    "lane width must be 1, 4, 8 or 16, got {n}"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FetchStrategy {
    /// Bounds-checked scalar loads, unpadded image.
    Conditional,
    /// Indexed per-lane loads from a zero-padded image.
    PaddedGather,
    /// Adjacent-pair loads from a zero-padded image plus a deinterleave.
    PaddedPairwise,
}

impl FetchStrategy {
    pub const ALL: [FetchStrategy; 3] = [
        FetchStrategy::Conditional,
        FetchStrategy::PaddedGather,
        FetchStrategy::PaddedPairwise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FetchStrategy::Conditional => "conditional",
            FetchStrategy::PaddedGather => "padded-gather",
            FetchStrategy::PaddedPairwise => "padded-pairwise",
        }
    }

    pub fn is_padded(self) -> bool {
        !matches!(self, FetchStrategy::Conditional)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReciprocalMode {
    ExactDivide,
    FastReciprocal,
    FastReciprocalRefined,
}

impl ReciprocalMode {
    pub const ALL: [ReciprocalMode; 3] = [
        ReciprocalMode::ExactDivide,
        ReciprocalMode::FastReciprocal,
        ReciprocalMode::FastReciprocalRefined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReciprocalMode::ExactDivide => "exact",
            ReciprocalMode::FastReciprocal => "fast",
            ReciprocalMode::FastReciprocalRefined => "fast-refined",
        }
    }
}

/// Kernel selection. Textual form:
/// `lanes=8 strategy=padded-gather recip=fast-refined clip=on`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct KernelConfig {
    pub lanes: LaneWidth,
    pub strategy: FetchStrategy,
    pub reciprocal: ReciprocalMode,
    pub clip: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            lanes: LaneWidth::X8,
            strategy: FetchStrategy::PaddedPairwise,
            reciprocal: ReciprocalMode::ExactDivide,
            clip: true,
        }
    }
}

impl KernelConfig {
    /// Configuration that reproduces the reference kernel bit for bit.
    pub fn scalar_reference() -> Self {
        KernelConfig {
            lanes: LaneWidth::X1,
            strategy: FetchStrategy::Conditional,
            reciprocal: ReciprocalMode::ExactDivide,
            clip: false,
        }
    }

    pub fn new(
        lanes: LaneWidth,
        strategy: FetchStrategy,
        reciprocal: ReciprocalMode,
        clip: bool,
    ) -> Self {
        KernelConfig {
            lanes,
            strategy,
            reciprocal,
            clip,
        }
    }

    /// Apron the strategy needs on its input images.
    pub fn required_pad(&self) -> usize {
        if self.strategy.is_padded() {
            KERNEL_PAD
        } else {
            0
        }
    }

    /// Brings an unpadded image into the layout this configuration expects.
    pub fn prepare_image<'a>(&self, img: &'a ProjectionImage) -> Result<Cow<'a, ProjectionImage>> {
        let pad = self.required_pad();
        if img.pad() == pad {
            return Ok(Cow::Borrowed(img));
        }
        if img.pad() != 0 {
            return Err(Error::invalid(format!(
                "image has pad {} but {} needs {pad}",
                img.pad(),
                self
            )));
        }
        Ok(Cow::Owned(img.pad_image(pad)?))
    }

    fn line_fn(&self) -> LineFn {
        macro_rules! by_lanes {
            ($f:ty, $d:ty) => {
                match self.lanes {
                    LaneWidth::X1 => update_line::<$f, $d, 1>,
                    LaneWidth::X4 => update_line::<$f, $d, 4>,
                    LaneWidth::X8 => update_line::<$f, $d, 8>,
                    LaneWidth::X16 => update_line::<$f, $d, 16>,
                }
            };
        }
        macro_rules! by_recip {
            ($f:ty) => {
                match self.reciprocal {
                    ReciprocalMode::ExactDivide => by_lanes!($f, Exact),
                    ReciprocalMode::FastReciprocal => by_lanes!($f, Fast),
                    ReciprocalMode::FastReciprocalRefined => by_lanes!($f, FastRefined),
                }
            };
        }
        match self.strategy {
            FetchStrategy::Conditional => by_recip!(Conditional),
            FetchStrategy::PaddedGather => by_recip!(PaddedGather),
            FetchStrategy::PaddedPairwise => by_recip!(PaddedPairwise),
        }
    }
}

impl fmt::Display for KernelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lanes={} strategy={} recip={} clip={}",
            self.lanes.lanes(),
            self.strategy.name(),
            self.reciprocal.name(),
            if self.clip { "on" } else { "off" }
        )
    }
}

impl FromStr for KernelConfig {
    type Err = Error;

    /// Parses `key=value` tokens separated by whitespace or commas; missing
    /// keys keep their [`Default`] values.
    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = KernelConfig::default();
        for token in s
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
        {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected key=value, got '{token}'")))?;
            match key {
                "lanes" => {
                    let n = value
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad lane count '{value}'")))?;
                    cfg.lanes = LaneWidth::from_lanes(n)?;
                }
                "strategy" => {
                    cfg.strategy = FetchStrategy::ALL
                        .into_iter()
                        .find(|s| s.name() == value)
                        .ok_or_else(|| Error::invalid(format!("unknown strategy '{value}'")))?;
                }
                "recip" => {
                    cfg.reciprocal = ReciprocalMode::ALL
                        .into_iter()
                        .find(|r| r.name() == value)
                        .ok_or_else(|| {
                            Error::invalid(format!("unknown reciprocal mode '{value}'"))
                        })?;
                }
                "clip" => {
                    cfg.clip = match value {
                        "on" | "true" | "1" => true,
                        "off" | "false" | "0" => false,
                        _ => {
                            return Err(Error::invalid(format!(
                                "clip must be on/off, got '{value}'"
                            )))
                        }
                    };
                }
                _ => return Err(Error::invalid(format!("unknown kernel key '{key}'"))),
            }
        }
        Ok(cfg)
    }
}

impl From<KernelConfig> for String {
    fn from(cfg: KernelConfig) -> String {
        cfg.to_string()
    }
}

impl TryFrom<String> for KernelConfig {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// A kernel bound to one projection: validated configuration, image, matrix
/// and optional clip mask. Stateless apart from borrowed inputs, so it can be
/// shared by workers that own disjoint z-plane ranges.
pub struct LineKernel<'a> {
    ctx: LineContext<'a>,
    line_fn: LineFn,
    mask: Option<&'a ClipMask>,
    edge: usize,
}

impl<'a> LineKernel<'a> {
    pub fn new(
        img: &'a ProjectionImage,
        a: &ProjectionMatrix,
        p: &ReconParams,
        cfg: &KernelConfig,
        mask: Option<&'a ClipMask>,
    ) -> Result<Self> {
        p.validate()?;
        if img.width() != p.width || img.height() != p.height {
            return Err(Error::invalid(format!(
                "image is {}x{} but parameters say {}x{}",
                img.width(),
                img.height(),
                p.width,
                p.height
            )));
        }
        match cfg.strategy {
            FetchStrategy::Conditional if img.pad() != 0 => {
                return Err(Error::invalid(
                    "conditional strategy expects an unpadded image",
                ));
            }
            s if s.is_padded() && img.pad() < KERNEL_PAD => {
                return Err(Error::invalid(format!(
                    "{} needs an image padded by at least {KERNEL_PAD} pixels (got {})",
                    s.name(),
                    img.pad()
                )));
            }
            _ => {}
        }
        match (cfg.clip, mask) {
            (true, None) => return Err(Error::invalid("clip=on requires a clip mask")),
            (false, Some(_)) => return Err(Error::invalid("clip mask given but clip=off")),
            (true, Some(m)) if m.edge() != p.edge => {
                return Err(Error::DimensionMismatch {
                    what: "clip mask edge",
                    expected: p.edge,
                    actual: m.edge(),
                });
            }
            _ => {}
        }
        Ok(LineKernel {
            ctx: LineContext {
                a: *a.entries(),
                origin: p.origin,
                spacing: p.spacing,
                width: p.width as i32,
                height: p.height as i32,
                pixels: img.data(),
                stride: img.stride(),
                pad: img.pad(),
            },
            line_fn: cfg.line_fn(),
            mask,
            edge: p.edge,
        })
    }

    /// Updates whole z-planes. `planes` holds consecutive planes starting
    /// at plane `first_z`.
    pub fn run_planes(&self, planes: &mut [f32], first_z: usize) {
        let l = self.edge;
        for (dz, plane) in planes.chunks_exact_mut(l * l).enumerate() {
            let z = first_z + dz;
            for (y, line) in plane.chunks_exact_mut(l).enumerate() {
                let range = match self.mask {
                    Some(m) => m.line(y, z),
                    None => 0..l,
                };
                if !range.is_empty() {
                    (self.line_fn)(&self.ctx, line, y, z, range);
                }
            }
        }
    }
}

/// Adds one projection into `vol` with the selected kernel. `img` must
/// already have the padding the strategy requires (see
/// [`KernelConfig::prepare_image`]); `mask` must be present exactly when
/// `cfg.clip` is set.
pub fn backproject_kernel(
    vol: &mut Volume,
    img: &ProjectionImage,
    a: &ProjectionMatrix,
    p: &ReconParams,
    cfg: &KernelConfig,
    mask: Option<&ClipMask>,
) -> Result<()> {
    if vol.edge() != p.edge {
        return Err(Error::DimensionMismatch {
            what: "volume edge",
            expected: p.edge,
            actual: vol.edge(),
        });
    }
    let kernel = LineKernel::new(img, a, p, cfg, mask)?;
    kernel.run_planes(vol.data_mut(), 0);
    Ok(())
}
