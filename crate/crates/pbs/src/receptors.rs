//! Receptor disks on the x = a face.

use rand::Rng;

use crate::error::{PbsError, Result};

/// Coverage above which random sequential placement cannot succeed.
pub const JAMMING_COVERAGE: f64 = 0.547;

/// Dart-throwing attempts allowed per disk.
pub const PLACEMENT_RETRIES: u32 = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ReceptorLayout {
    radius: f64,
    width_y: f64,
    width_z: f64,
    centers: Vec<(f64, f64)>,
}

impl ReceptorLayout {
    /// Uniform non-overlapping placement of `count` disks fully inside the face.
    pub fn place<R: Rng + ?Sized>(
        count: u64,
        radius: f64,
        width_y: f64,
        width_z: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let fail = |reason: String| PbsError::Placement {
            requested: count,
            radius,
            reason,
        };
        if !(radius > 0.0) || 2.0 * radius > width_y.min(width_z) {
            return Err(fail("disk does not fit on the face".into()));
        }
        let coverage = count as f64 * std::f64::consts::PI * radius * radius / (width_y * width_z);
        if coverage > JAMMING_COVERAGE {
            return Err(fail(format!(
                "coverage {coverage:.3} exceeds the random packing limit {JAMMING_COVERAGE}"
            )));
        }
        let min_d2 = 4.0 * radius * radius;
        let mut centers: Vec<(f64, f64)> = Vec::with_capacity(count as usize);
        for placed in 0..count {
            let mut ok = false;
            for _ in 0..PLACEMENT_RETRIES {
                let y = rng.gen_range(radius..=width_y - radius);
                let z = rng.gen_range(radius..=width_z - radius);
                let clear = centers
                    .iter()
                    .all(|&(cy, cz)| (cy - y).powi(2) + (cz - z).powi(2) >= min_d2);
                if clear {
                    centers.push((y, z));
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Err(fail(format!(
                    "gave up after {PLACEMENT_RETRIES} attempts at disk {}",
                    placed + 1
                )));
            }
        }
        Ok(Self {
            radius,
            width_y,
            width_z,
            centers,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn centers(&self) -> &[(f64, f64)] {
        &self.centers
    }

    /// Fraction of the face covered by disks.
    pub fn coverage(&self) -> f64 {
        self.len() as f64 * std::f64::consts::PI * self.radius * self.radius
            / (self.width_y * self.width_z)
    }

    /// Index of the disk containing (y, z), if any.
    pub fn locate(&self, y: f64, z: f64) -> Option<usize> {
        let r2 = self.radius * self.radius;
        self.centers
            .iter()
            .position(|&(cy, cz)| (cy - y).powi(2) + (cz - z).powi(2) <= r2)
    }
}
