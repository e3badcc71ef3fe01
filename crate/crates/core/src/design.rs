//! Design specifications for the three steerable-tip concepts.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnetics::moment_from_remanence;
use crate::mechanics::annulus_second_moment;

/// Density used for ball masses when none is measured, kg/m³.
pub const NDFEB_DENSITY: f64 = 7500.0;

/// Default rod discretization pitch in m.
pub const DEFAULT_ROD_PITCH: f64 = 0.5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    BallChain,
    TipMagnet,
    DistributedParticles,
}

impl DesignKind {
    pub const ALL: [DesignKind; 3] = [
        DesignKind::BallChain,
        DesignKind::TipMagnet,
        DesignKind::DistributedParticles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DesignKind::BallChain => "ball_chain",
            DesignKind::TipMagnet => "tip_magnet",
            DesignKind::DistributedParticles => "distributed_particles",
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ball_chain" | "ballchain" => Ok(DesignKind::BallChain),
            "tip_magnet" => Ok(DesignKind::TipMagnet),
            "distributed_particles" | "distributed" => Ok(DesignKind::DistributedParticles),
            other => Err(Error::InvalidInput(format!(
                "unknown design `{other}` (expected ball_chain, tip_magnet or distributed_particles)"
            ))),
        }
    }
}

/// Cylindrical elastomer sleeve around the balls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Skin {
    pub outer_diameter: f64,
    pub inner_diameter: f64,
    pub modulus: f64,
}

impl Skin {
    /// E·I of the sleeve cross-section.
    pub fn bending_stiffness(&self) -> f64 {
        self.modulus * annulus_second_moment(self.outer_diameter, self.inner_diameter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallChainDesign {
    pub ball_diameter: f64,
    pub remanence: f64,
    /// Moment magnitude of one ball, A·m².
    pub ball_moment: f64,
    /// Mass of one ball, kg.
    pub ball_mass: f64,
    pub skin: Option<Skin>,
}

impl BallChainDesign {
    /// Builds a chain of N-grade spheres; moment and mass follow from the volume.
    pub fn from_material(
        ball_diameter: f64,
        remanence: f64,
        skin_thickness: f64,
        skin_modulus: f64,
    ) -> Self {
        let volume = PI / 6.0 * ball_diameter.powi(3);
        Self {
            ball_diameter,
            remanence,
            ball_moment: moment_from_remanence(remanence, volume),
            ball_mass: NDFEB_DENSITY * volume,
            skin: Some(Skin {
                outer_diameter: ball_diameter + 2.0 * skin_thickness,
                inner_diameter: ball_diameter,
                modulus: skin_modulus,
            }),
        }
    }

    /// 0.9 mm N52 spheres in a 0.05 mm Ecoflex 00-30 sleeve.
    pub fn table() -> Self {
        Self::from_material(0.9e-3, 1.48, 0.05e-3, 42.7e3)
    }

    /// Bench prototype: 3.175 mm N42 spheres weighing 0.13 g each.
    pub fn experimental() -> Self {
        Self {
            ball_mass: 0.13e-3,
            ..Self::from_material(3.175e-3, 1.32, 0.05e-3, 42.7e3)
        }
    }

    /// Penalty stiffness for non-adjacent ball overlap, J/m².
    ///
    /// Scaled so that two touching balls pulled together by their dipole
    /// attraction penetrate by well under 0.1 % of a diameter.
    pub fn contact_stiffness(&self) -> f64 {
        let pair = crate::magnetics::MU0 * self.ball_moment.powi(2)
            / (2.0 * PI * self.ball_diameter.powi(3));
        1.0e4 * pair / self.ball_diameter.powi(2)
    }

    pub fn skin_stiffness(&self) -> f64 {
        self.skin.map_or(0.0, |s| s.bending_stiffness())
    }

    pub fn validate(&self) -> Result<()> {
        positive("ball diameter", self.ball_diameter)?;
        positive("remanence", self.remanence)?;
        positive("ball moment", self.ball_moment)?;
        non_negative("ball mass", self.ball_mass)?;
        if let Some(skin) = self.skin {
            positive("skin modulus", skin.modulus)?;
            if skin.outer_diameter <= skin.inner_diameter {
                return Err(Error::InvalidInput(
                    "skin outer diameter must exceed inner diameter".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipMagnetDesign {
    pub rod_diameter: f64,
    pub modulus: f64,
    pub tip_moment: f64,
    pub magnet_length: f64,
    pub magnet_diameter: f64,
    pub pitch: f64,
}

impl TipMagnetDesign {
    pub fn table() -> Self {
        Self {
            rod_diameter: 1.0e-3,
            modulus: 42.7e3,
            tip_moment: 0.67e-3,
            magnet_length: 1.0e-3,
            magnet_diameter: 0.9e-3,
            pitch: DEFAULT_ROD_PITCH,
        }
    }

    pub fn bending_stiffness(&self) -> f64 {
        self.modulus * annulus_second_moment(self.rod_diameter, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        positive("rod diameter", self.rod_diameter)?;
        positive("rod modulus", self.modulus)?;
        positive("tip moment", self.tip_moment)?;
        positive("magnet length", self.magnet_length)?;
        positive("pitch", self.pitch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributedDesign {
    pub rod_diameter: f64,
    pub modulus: f64,
    pub remanence: f64,
    /// Moment per unit length along the rod, A·m.
    pub moment_per_length: f64,
    pub pitch: f64,
}

impl DistributedDesign {
    pub fn table() -> Self {
        Self {
            rod_diameter: 1.0e-3,
            modulus: 128.2e3,
            remanence: 0.59,
            moment_per_length: 0.37,
            pitch: DEFAULT_ROD_PITCH,
        }
    }

    pub fn bending_stiffness(&self) -> f64 {
        self.modulus * annulus_second_moment(self.rod_diameter, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        positive("rod diameter", self.rod_diameter)?;
        positive("rod modulus", self.modulus)?;
        positive("moment per length", self.moment_per_length)?;
        positive("pitch", self.pitch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignSpec {
    BallChain(BallChainDesign),
    TipMagnet(TipMagnetDesign),
    DistributedParticles(DistributedDesign),
}

impl DesignSpec {
    pub fn kind(&self) -> DesignKind {
        match self {
            DesignSpec::BallChain(_) => DesignKind::BallChain,
            DesignSpec::TipMagnet(_) => DesignKind::TipMagnet,
            DesignSpec::DistributedParticles(_) => DesignKind::DistributedParticles,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DesignSpec::BallChain(d) => d.validate(),
            DesignSpec::TipMagnet(d) => d.validate(),
            DesignSpec::DistributedParticles(d) => d.validate(),
        }
    }

    pub fn without_skin(self) -> Self {
        match self {
            DesignSpec::BallChain(d) => DesignSpec::BallChain(BallChainDesign { skin: None, ..d }),
            other => other,
        }
    }
}

/// Comparison-table constants for each design.
pub fn design_from_table(kind: DesignKind) -> DesignSpec {
    match kind {
        DesignKind::BallChain => DesignSpec::BallChain(BallChainDesign::table()),
        DesignKind::TipMagnet => DesignSpec::TipMagnet(TipMagnetDesign::table()),
        DesignKind::DistributedParticles => {
            DesignSpec::DistributedParticles(DistributedDesign::table())
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be non-negative, got {v}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_constants() {
        let DesignSpec::BallChain(bc) = design_from_table(DesignKind::BallChain) else {
            unreachable!()
        };
        // 0.45 mA·m² in the table is the rounded sphere moment
        assert_relative_eq!(bc.ball_moment, 0.45e-3, max_relative = 0.01);
        assert_relative_eq!(bc.ball_moment, 4.495e-4, max_relative = 1e-3);
        assert_relative_eq!(bc.skin.unwrap().modulus, 42.7e3);
        assert_relative_eq!(
            bc.skin.unwrap().outer_diameter,
            1.0e-3,
            max_relative = 1e-12
        );

        let DesignSpec::DistributedParticles(dp) =
            design_from_table(DesignKind::DistributedParticles)
        else {
            unreachable!()
        };
        assert_eq!(dp.modulus, 128.2e3);
        assert_eq!(dp.moment_per_length, 0.37);
        // 0.37 A·m is B_r/μ₀ over the 1 mm rod cross-section
        let per_length = moment_from_remanence(dp.remanence, PI * 0.25 * dp.rod_diameter.powi(2));
        assert_relative_eq!(per_length, 0.37, max_relative = 0.01);

        let DesignSpec::TipMagnet(tm) = design_from_table(DesignKind::TipMagnet) else {
            unreachable!()
        };
        assert_eq!(tm.tip_moment, 0.67e-3);
        assert_eq!(tm.modulus, 42.7e3);
    }

    #[test]
    fn experimental_ball() {
        let e = BallChainDesign::experimental();
        assert_relative_eq!(e.ball_moment, 1.760e-2, max_relative = 1e-3);
        assert_eq!(e.ball_mass, 0.13e-3);
    }

    #[test]
    fn kind_parsing() {
        for k in DesignKind::ALL {
            assert_eq!(k.name().parse::<DesignKind>().unwrap(), k);
        }
        assert!("rope".parse::<DesignKind>().is_err());
    }

    #[test]
    fn validation_rejects_nonpositive() {
        let mut d = BallChainDesign::table();
        d.ball_diameter = 0.0;
        assert!(d.validate().is_err());
        let mut t = TipMagnetDesign::table();
        t.pitch = -1.0;
        assert!(DesignSpec::TipMagnet(t).validate().is_err());
    }
}
