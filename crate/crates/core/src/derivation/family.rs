use serde::{Deserialize, Serialize};

use crate::model::{MeasureKind, MeasureType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    InverseGaussian,
    Gamma,
    Poisson,
    NegativeBinomial,
    Binomial,
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Log,
    Inverse,
    InverseSquared,
    Sqrt,
    Logit,
    Probit,
    Cauchit,
    #[serde(rename = "cloglog")]
    CLogLog,
}

impl Family {
    /// Links offered for this family, canonical link first.
    pub fn links(self) -> &'static [Link] {
        use Link::*;
        match self {
            Family::Gaussian => &[Identity, Log, Inverse],
            Family::InverseGaussian => &[InverseSquared, Inverse, Identity, Log],
            Family::Gamma => &[Inverse, Identity, Log],
            Family::Poisson => &[Log, Identity, Sqrt],
            Family::NegativeBinomial => &[Log, Identity, Sqrt],
            Family::Binomial => &[Logit, Probit, Cauchit, Log, CLogLog],
            Family::Multinomial => &[Logit],
        }
    }

    pub fn canonical_link(self) -> Link {
        self.links()[0]
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "Gaussian",
            Family::InverseGaussian => "Inverse Gaussian",
            Family::Gamma => "Gamma",
            Family::Poisson => "Poisson",
            Family::NegativeBinomial => "Negative Binomial",
            Family::Binomial => "Binomial",
            Family::Multinomial => "Multinomial",
        }
    }
}

impl Link {
    pub fn name(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Log => "log",
            Link::Inverse => "inverse",
            Link::InverseSquared => "inverse squared",
            Link::Sqrt => "sqrt",
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Cauchit => "cauchit",
            Link::CLogLog => "cloglog",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FamilyLink {
    pub family: Family,
    pub link: Link,
}

impl FamilyLink {
    pub fn new(family: Family, link: Link) -> Self {
        FamilyLink { family, link }
    }
}

/// Families considered for a dependent variable of the given type.
pub fn candidate_families(mtype: &MeasureType) -> &'static [Family] {
    use Family::*;
    match mtype.kind {
        MeasureKind::Continuous => &[Gaussian, InverseGaussian, Gamma],
        MeasureKind::Counts => &[Poisson, NegativeBinomial],
        MeasureKind::OrderedCategories { .. } => &[Binomial, Multinomial, Gaussian, InverseGaussian, Gamma],
        MeasureKind::UnorderedCategories { .. } => &[Binomial, Multinomial],
    }
}

/// Every admissible (family, link) pair for the dependent variable type,
/// families in order and each family's canonical link first. The first
/// entry is the default.
pub fn candidate_family_links(mtype: &MeasureType) -> Vec<FamilyLink> {
    candidate_families(mtype)
        .iter()
        .flat_map(|&f| f.links().iter().map(move |&l| FamilyLink::new(f, l)))
        .collect()
}
