//! Sphere phantoms and synthetic projection sets.

use serde::{Deserialize, Serialize};

use super::dataset::{Projection, ProjectionSet};
use crate::backproject::Volume;
use crate::error::{Error, Result};
use crate::geometry::{forward_splat, make_circular_trajectory, ReconParams, ScanGeometry};

/// Ball of constant value, in world millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
    pub value: f32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub spheres: Vec<Sphere>,
}

impl PhantomSpec {
    /// Three overlapping spheres inside a 64 mm cube centred on the origin.
    pub fn default_spheres() -> Self {
        PhantomSpec {
            spheres: vec![
                Sphere {
                    center: [0.0, 0.0, 0.0],
                    radius: 24.0,
                    value: 1.0,
                },
                Sphere {
                    center: [8.0, -6.0, 4.0],
                    radius: 9.0,
                    value: 0.5,
                },
                Sphere {
                    center: [-10.0, 7.0, -8.0],
                    radius: 5.0,
                    value: -0.25,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.spheres {
            if !(s.radius.is_finite() && s.radius >= 0.0) || s.center.iter().any(|c| !c.is_finite())
            {
                return Err(Error::invalid(format!("bad sphere {s:?}")));
            }
            if !s.value.is_finite() {
                return Err(Error::invalid("sphere value must be finite"));
            }
        }
        Ok(())
    }

    /// Rasterizes by voxel-centre inclusion; overlapping spheres add up.
    pub fn rasterize(&self, p: &ReconParams) -> Result<Volume> {
        self.validate()?;
        p.validate()?;
        let l = p.edge;
        let mut vol = Volume::zeros(l);
        for s in &self.spheres {
            let r2 = s.radius * s.radius;
            for z in 0..l {
                let dz = p.world(z) as f64 - s.center[2];
                if dz * dz > r2 {
                    continue;
                }
                for y in 0..l {
                    let dy = p.world(y) as f64 - s.center[1];
                    if dy * dy + dz * dz > r2 {
                        continue;
                    }
                    for x in 0..l {
                        let dx = p.world(x) as f64 - s.center[0];
                        if dx * dx + dy * dy + dz * dz <= r2 {
                            let i = vol.index(x, y, z);
                            vol.data_mut()[i] += s.value;
                        }
                    }
                }
            }
        }
        Ok(vol)
    }
}

/// Everything needed to regenerate a synthetic projection set. Missing
/// sections take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SynthSpec {
    pub geometry: ScanGeometry,
    pub phantom: PhantomSpec,
    pub params: ReconParams,
}

impl Default for SynthSpec {
    /// 64^3 volume at 1 mm, 60 views over a full circle onto a 112x96
    /// detector. The volume corners fall off the detector, so clip masks
    /// have work to do.
    fn default() -> Self {
        SynthSpec {
            geometry: ScanGeometry {
                num_projections: 60,
                source_detector_distance: 1200.0,
                source_iso_distance: 750.0,
                detector_pixel_pitch: 1.0,
                angular_range: std::f64::consts::TAU,
            },
            phantom: PhantomSpec::default_spheres(),
            params: ReconParams {
                edge: 64,
                spacing: 1.0,
                origin: -31.5,
                width: 112,
                height: 96,
            },
        }
    }
}

impl SynthSpec {
    pub fn synthesize(&self) -> Result<ProjectionSet> {
        synthesize_dataset(&self.geometry, &self.phantom, &self.params)
    }
}

/// Forward-splats the rasterized phantom along a circular trajectory.
pub fn synthesize_dataset(
    geom: &ScanGeometry,
    phantom: &PhantomSpec,
    p: &ReconParams,
) -> Result<ProjectionSet> {
    let vol = phantom.rasterize(p)?;
    let projections = make_circular_trajectory(geom, p)?
        .into_iter()
        .map(|matrix| {
            Ok(Projection {
                image: forward_splat(&vol, &matrix, p)?,
                matrix,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ProjectionSet::new(*p, projections)
}
