//! Strategy acronyms such as `Ritz-S`, `HRitz-M`, `RGen-L(R)-NSC` or
//! `inner:RGen-L(R)`.

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VecType {
    None,
    /// Eigenvectors of the full Hessian.
    Eig,
    Ritz,
    HRitz,
    /// Generalized singular vectors of the full pair `(J, H)`.
    Gsvd,
    /// Ritz generalized singular vectors.
    RGen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SizeSel {
    Small,
    Large,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Right,
    Left,
    Mixed,
}

/// Which Hessian the projected decomposition uses: the one about to be solved
/// (outer) or the previous one (inner).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Placement {
    #[default]
    Outer,
    Inner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StrategyDescriptor {
    pub vec_type: VecType,
    pub size: SizeSel,
    pub side: Option<Side>,
    pub placement: Placement,
    /// Stop on the projected hypergradient-error estimate instead of the residual.
    pub nsc: bool,
}

impl StrategyDescriptor {
    pub const NONE: StrategyDescriptor = StrategyDescriptor {
        vec_type: VecType::None,
        size: SizeSel::Small,
        side: None,
        placement: Placement::Outer,
        nsc: false,
    };

    pub fn new(vec_type: VecType, size: SizeSel, side: Option<Side>) -> Result<Self, Error> {
        let d = Self {
            vec_type,
            size,
            side,
            placement: Placement::Outer,
            nsc: false,
        };
        d.validate().map_err(|reason| Error::StrategyParse {
            input: d.to_string(),
            reason,
        })?;
        Ok(d)
    }

    pub fn with_nsc(mut self, nsc: bool) -> Self {
        self.nsc = nsc;
        self
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    pub fn is_none(&self) -> bool {
        self.vec_type == VecType::None
    }

    /// Whether the strategy carries GSVD data usable by the projected stop rule.
    pub fn uses_gsvd(&self) -> bool {
        matches!(self.vec_type, VecType::Gsvd | VecType::RGen)
    }

    /// Eig and GSVD decompose the unprojected matrices.
    pub fn is_full_dimensional(&self) -> bool {
        matches!(self.vec_type, VecType::Eig | VecType::Gsvd)
    }

    fn validate(&self) -> Result<(), &'static str> {
        if self.uses_gsvd() != self.side.is_some() {
            return Err("a side (R, L or M) is required exactly for GSVD and RGen");
        }
        if self.nsc && !self.uses_gsvd() {
            return Err("-NSC needs a GSVD-based strategy");
        }
        Ok(())
    }
}

impl fmt::Display for StrategyDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.placement == Placement::Inner {
            f.write_str("inner:")?;
        }
        let name = match self.vec_type {
            VecType::None => return f.write_str("None"),
            VecType::Eig => "Eig",
            VecType::Ritz => "Ritz",
            VecType::HRitz => "HRitz",
            VecType::Gsvd => "GSVD",
            VecType::RGen => "RGen",
        };
        let size = match self.size {
            SizeSel::Small => 'S',
            SizeSel::Large => 'L',
            SizeSel::Mixed => 'M',
        };
        write!(f, "{name}-{size}")?;
        if let Some(side) = self.side {
            let c = match side {
                Side::Right => 'R',
                Side::Left => 'L',
                Side::Mixed => 'M',
            };
            write!(f, "({c})")?;
        }
        if self.nsc {
            f.write_str("-NSC")?;
        }
        Ok(())
    }
}

impl FromStr for StrategyDescriptor {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let fail = |reason| Error::StrategyParse {
            input: String::from(input),
            reason,
        };
        let mut rest = input.trim();
        let mut placement = Placement::Outer;
        if let Some(r) = rest.strip_prefix("inner:") {
            placement = Placement::Inner;
            rest = r;
        } else if let Some(r) = rest.strip_prefix("outer:") {
            rest = r;
        }
        if rest == "None" {
            return Ok(Self {
                placement,
                ..Self::NONE
            });
        }
        let mut nsc = false;
        if let Some(r) = rest.strip_suffix("-NSC") {
            nsc = true;
            rest = r;
        }
        let (name, tail) = rest.split_once('-').ok_or_else(|| fail("expected VecType-Size"))?;
        let vec_type = match name {
            "Eig" => VecType::Eig,
            "Ritz" => VecType::Ritz,
            "HRitz" => VecType::HRitz,
            "GSVD" => VecType::Gsvd,
            "RGen" => VecType::RGen,
            _ => return Err(fail("unknown vector type")),
        };
        let mut chars = tail.chars();
        let size = match chars.next() {
            Some('S') => SizeSel::Small,
            Some('L') => SizeSel::Large,
            Some('M') => SizeSel::Mixed,
            _ => return Err(fail("size must be S, L or M")),
        };
        let side = match chars.as_str() {
            "" => None,
            "(R)" => Some(Side::Right),
            "(L)" => Some(Side::Left),
            "(M)" => Some(Side::Mixed),
            _ => return Err(fail("side must be (R), (L) or (M)")),
        };
        let d = Self {
            vec_type,
            size,
            side,
            placement,
            nsc,
        };
        d.validate().map_err(fail)?;
        Ok(d)
    }
}
