use crate::geometry::Vec3;

use super::ModelError;

pub const MIN_BIN_SIZE: f64 = 1e-5;
pub const MAX_BIN_SIZE: f64 = 1.0;
/// Largest admissible magnitude of a bin index component.
pub const MAX_BIN_INDEX: i64 = 1_000_000;

/// Per-axis quantization step for the last movement, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSizes {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl BinSizes {
    pub fn new(bx: f64, by: f64, bz: f64) -> Result<Self, ModelError> {
        for b in [bx, by, bz] {
            if !(MIN_BIN_SIZE..=MAX_BIN_SIZE).contains(&b) {
                return Err(ModelError::InvalidConfig(format!(
                    "bin size {b} outside [{MIN_BIN_SIZE}, {MAX_BIN_SIZE}] m"
                )));
            }
        }
        Ok(Self { bx, by, bz })
    }

    pub fn isotropic(b: f64) -> Result<Self, ModelError> {
        Self::new(b, b, b)
    }

    pub fn is_isotropic(&self) -> bool {
        self.bx == self.by && self.by == self.bz
    }

    pub fn as_vec(&self) -> Vec3 {
        Vec3::new(self.bx, self.by, self.bz)
    }
}

impl std::fmt::Display for BinSizes {
    /// `B` when isotropic, `BX BY BZ` otherwise.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_isotropic() {
            write!(f, "{}", self.bx)
        } else {
            write!(f, "{} {} {}", self.bx, self.by, self.bz)
        }
    }
}

/// Quantized per-frame movement. Orders lexicographically by `(ix, iy, iz)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinId {
    pub ix: i32,
    pub iy: i32,
    pub iz: i32,
}

impl BinId {
    pub const ZERO: BinId = BinId {
        ix: 0,
        iy: 0,
        iz: 0,
    };

    pub fn new(ix: i32, iy: i32, iz: i32) -> Result<Self, ModelError> {
        if [ix, iy, iz]
            .iter()
            .any(|v| (*v as i64).abs() > MAX_BIN_INDEX)
        {
            return Err(ModelError::BinOverflow);
        }
        Ok(Self { ix, iy, iz })
    }
}

/// `floor(last_movement / sizes)` per axis.
///
/// Floor rather than truncation keeps small negative movements out of the
/// zero bin, so direction survives quantization.
pub fn bin_id(last_movement: &Vec3, sizes: &BinSizes) -> Result<BinId, ModelError> {
    if !last_movement.iter().all(|v| v.is_finite()) {
        return Err(ModelError::NonFiniteInput);
    }
    let q = last_movement.component_div(&sizes.as_vec()).map(f64::floor);
    if q.iter().any(|v| v.abs() > MAX_BIN_INDEX as f64) {
        return Err(ModelError::BinOverflow);
    }
    Ok(BinId {
        ix: q.x as i32,
        iy: q.y as i32,
        iz: q.z as i32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iso(b: f64) -> BinSizes {
        BinSizes::isotropic(b).unwrap()
    }

    #[test]
    fn floor_examples() {
        let s = iso(0.002);
        assert_eq!(
            bin_id(&Vec3::new(0.0031, -0.0009, 0.0021), &s).unwrap(),
            BinId {
                ix: 1,
                iy: -1,
                iz: 1
            }
        );
        assert_eq!(bin_id(&Vec3::zeros(), &iso(0.37)).unwrap(), BinId::ZERO);
        assert_eq!(
            bin_id(&Vec3::new(0.002, 0.0, 0.0), &s).unwrap(),
            BinId {
                ix: 1,
                iy: 0,
                iz: 0
            }
        );
    }

    #[test]
    fn errors() {
        let s = iso(1e-5);
        assert_eq!(
            bin_id(&Vec3::new(f64::NAN, 0.0, 0.0), &s),
            Err(ModelError::NonFiniteInput)
        );
        assert_eq!(
            bin_id(&Vec3::new(11.0, 0.0, 0.0), &s),
            Err(ModelError::BinOverflow)
        );
        assert!(bin_id(&Vec3::new(9.0, 0.0, 0.0), &s).is_ok());
        assert!(BinSizes::new(0.0, 0.1, 0.1).is_err());
        assert!(BinSizes::new(0.1, 2.0, 0.1).is_err());
        assert_eq!(BinId::new(0, 1_000_001, 0), Err(ModelError::BinOverflow));
    }

    #[test]
    fn lexicographic_order() {
        let mut ids = [
            BinId {
                ix: 0,
                iy: 1,
                iz: -5,
            },
            BinId {
                ix: -1,
                iy: 9,
                iz: 9,
            },
            BinId {
                ix: 0,
                iy: 0,
                iz: 3,
            },
        ];
        ids.sort();
        assert_eq!(ids[0].ix, -1);
        assert_eq!(
            ids[1],
            BinId {
                ix: 0,
                iy: 0,
                iz: 3
            }
        );
    }

    proptest! {
        #[test]
        fn movement_lies_in_its_cell(
            m in (-0.05f64..0.05, -0.05f64..0.05, -0.05f64..0.05),
            b in (0.0005f64..0.02, 0.0005f64..0.02, 0.0005f64..0.02),
        ) {
            let sizes = BinSizes::new(b.0, b.1, b.2).unwrap();
            let mv = Vec3::new(m.0, m.1, m.2);
            let id = bin_id(&mv, &sizes).unwrap();
            let idx = [id.ix, id.iy, id.iz];
            for i in 0..3 {
                let s = sizes.as_vec()[i];
                let lo = idx[i] as f64 * s;
                prop_assert!(lo <= mv[i] + 1e-15 && mv[i] < lo + s + 1e-15);
            }
        }
    }
}
